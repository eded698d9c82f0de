use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use super::wire::{decode_decision, encode_decision, DecisionMessage, SequenceGuard, FRAME_LEN};
use crate::dsp::TaskCode;
use crate::{Error, Result};

/// Decoder side of the datagram channel. Sequence numbers start at 1.
pub struct DecisionSender {
    socket: UdpSocket,
    target: SocketAddr,
    next_seq: u32,
}

impl DecisionSender {
    pub fn connect(target: impl ToSocketAddrs) -> Result<Self> {
        let target = target
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::Config("no address to send decisions to".into()))?;
        let bind: SocketAddr = if target.is_ipv4() {
            "0.0.0.0:0".parse().expect("literal")
        } else {
            "[::]:0".parse().expect("literal")
        };
        Ok(DecisionSender {
            socket: UdpSocket::bind(bind)?,
            target,
            next_seq: 1,
        })
    }

    pub fn send(&mut self, class: Option<TaskCode>, timestamp_ms: u64) -> Result<DecisionMessage> {
        let msg = DecisionMessage {
            class,
            sequence: self.next_seq,
            timestamp_ms,
        };
        self.socket.send_to(&encode_decision(&msg), self.target)?;
        self.next_seq = self.next_seq.wrapping_add(1);
        Ok(msg)
    }
}

/// Feedback side. Drops stale or duplicated frames.
pub struct DecisionReceiver {
    socket: UdpSocket,
    guard: SequenceGuard,
}

impl DecisionReceiver {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(DecisionReceiver {
            socket: UdpSocket::bind(addr)?,
            guard: SequenceGuard::default(),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    /// Waits for the next in-order frame. `Ok(None)` on timeout.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<DecisionMessage>> {
        self.socket.set_read_timeout(Some(timeout))?;
        let mut buf = [0u8; FRAME_LEN + 1];
        loop {
            let n = match self.socket.recv(&mut buf) {
                Ok(n) => n,
                Err(e)
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) =>
                {
                    return Ok(None)
                }
                Err(e) => return Err(e.into()),
            };
            let msg = decode_decision(&buf[..n])?;
            if self.guard.accept(&msg) {
                return Ok(Some(msg));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_delivery() {
        let Ok(mut rx) = DecisionReceiver::bind("127.0.0.1:0") else {
            return;
        };
        let mut tx = DecisionSender::connect(rx.local_addr().unwrap()).unwrap();
        let sent = tx.send(Some(TaskCode::RightHand), 1000).unwrap();
        tx.send(None, 2000).unwrap();
        let got = rx.recv(Duration::from_secs(2)).unwrap().unwrap();
        assert_eq!(got, sent);
        let got = rx.recv(Duration::from_secs(2)).unwrap().unwrap();
        assert_eq!(got.sequence, 2);
        assert_eq!(got.class, None);
    }
}

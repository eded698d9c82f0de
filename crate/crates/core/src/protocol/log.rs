//! Plain-text session log.
//!
//! ```text
//! # mi-bci session log v1
//! # mode=online
//! # maze_seed=7
//! # config_hash=<sha256 hex>
//! # config=<single-line JSON>
//! trial_idx,task,t_s,predicted,correct,motion_s
//! 0,FEET,2,FEET,1,1
//! ...
//! =outcome,0,FEET,1,7
//! # status=complete
//! ```
//!
//! `predicted` is `NONE` for ticks without a decision. Every trial ends with
//! an `=outcome` trailer `trial_idx,task,success,elapsed_s`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::online::{DecisionRecord, SessionStatus, TrialOutcome};
use crate::dsp::TaskCode;
use crate::{Error, Result};

const MAGIC_LINE: &str = "# mi-bci session log v1";
const COLUMNS: &str = "trial_idx,task,t_s,predicted,correct,motion_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    Online,
    Sham,
}

impl SessionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionMode::Online => "online",
            SessionMode::Sham => "sham",
        }
    }
}

impl FromStr for SessionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(SessionMode::Online),
            "sham" => Ok(SessionMode::Sham),
            _ => Err(Error::Config(format!("unknown session mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLog {
    pub mode: SessionMode,
    pub maze_seed: u64,
    pub config_hash: String,
    /// Config echo; must not contain newlines.
    pub config_json: String,
    pub outcomes: Vec<TrialOutcome>,
    pub status: SessionStatus,
}

fn task_str(t: Option<TaskCode>) -> &'static str {
    t.map_or("NONE", TaskCode::name)
}

fn bad(line_no: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("session log line {line_no}: {msg}"))
}

fn parse_task(s: &str, line_no: usize) -> Result<TaskCode> {
    TaskCode::from_name(s).ok_or_else(|| bad(line_no, format!("unknown task {s:?}")))
}

fn parse_num<T: FromStr>(s: &str, line_no: usize) -> Result<T> {
    s.parse().map_err(|_| bad(line_no, format!("bad number {s:?}")))
}

fn parse_flag(s: &str, line_no: usize) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(bad(line_no, format!("bad flag {s:?}"))),
    }
}

impl SessionLog {
    pub fn to_text(&self) -> Result<String> {
        if self.config_json.contains('\n') {
            return Err(Error::InvalidInput("config echo must be a single line".into()));
        }
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC_LINE}");
        let _ = writeln!(s, "# mode={}", self.mode.as_str());
        let _ = writeln!(s, "# maze_seed={}", self.maze_seed);
        let _ = writeln!(s, "# config_hash={}", self.config_hash);
        let _ = writeln!(s, "# config={}", self.config_json);
        let _ = writeln!(s, "{COLUMNS}");
        for o in &self.outcomes {
            for d in &o.decisions {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    o.index,
                    o.task,
                    d.t_s,
                    task_str(d.predicted),
                    d.correct as u8,
                    d.motion_s
                );
            }
            let _ = writeln!(
                s,
                "=outcome,{},{},{},{}",
                o.index, o.task, o.success as u8, o.elapsed_s
            );
        }
        match self.status {
            SessionStatus::Complete => {
                let _ = writeln!(s, "# status=complete");
            }
            SessionStatus::Incomplete { trials_finished } => {
                let _ = writeln!(s, "# status=incomplete:{trials_finished}");
            }
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, MAGIC_LINE)) => {}
            _ => return Err(Error::Format("not a session log (missing header)".into())),
        }
        let (mut mode, mut seed, mut hash, mut config, mut status) = (None, None, None, None, None);
        let mut outcomes: Vec<TrialOutcome> = Vec::new();
        let mut pending: Vec<DecisionRecord> = Vec::new();
        let mut pending_trial: Option<(usize, TaskCode)> = None;
        let mut seen_columns = false;

        for (no, line) in lines {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta.split_once('=').ok_or_else(|| bad(no, "bad header"))?;
                match k {
                    "mode" => mode = Some(v.parse::<SessionMode>()?),
                    "maze_seed" => seed = Some(parse_num::<u64>(v, no)?),
                    "config_hash" => hash = Some(v.to_string()),
                    "config" => config = Some(v.to_string()),
                    "status" => {
                        status = Some(if v == "complete" {
                            SessionStatus::Complete
                        } else if let Some(n) = v.strip_prefix("incomplete:") {
                            SessionStatus::Incomplete {
                                trials_finished: parse_num(n, no)?,
                            }
                        } else {
                            return Err(bad(no, format!("bad status {v:?}")));
                        })
                    }
                    _ => {}
                }
                continue;
            }
            if line == COLUMNS {
                seen_columns = true;
                continue;
            }
            if !seen_columns {
                return Err(bad(no, "data before column header"));
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.first() == Some(&"=outcome") {
                if f.len() != 5 {
                    return Err(bad(no, "outcome line needs 5 fields"));
                }
                let index: usize = parse_num(f[1], no)?;
                let task = parse_task(f[2], no)?;
                if let Some(p) = pending_trial {
                    if p != (index, task) {
                        return Err(bad(no, "outcome does not match its decisions"));
                    }
                }
                if index != outcomes.len() {
                    return Err(bad(no, format!("expected trial {}, got {index}", outcomes.len())));
                }
                outcomes.push(TrialOutcome {
                    index,
                    task,
                    success: parse_flag(f[3], no)?,
                    elapsed_s: parse_num(f[4], no)?,
                    decisions: std::mem::take(&mut pending),
                });
                pending_trial = None;
                continue;
            }
            if f.len() != 6 {
                return Err(bad(no, "decision line needs 6 fields"));
            }
            let key = (parse_num::<usize>(f[0], no)?, parse_task(f[1], no)?);
            if pending_trial.is_some_and(|p| p != key) {
                return Err(bad(no, "decisions of two trials interleave"));
            }
            pending_trial = Some(key);
            pending.push(DecisionRecord {
                t_s: parse_num(f[2], no)?,
                predicted: match f[3] {
                    "NONE" => None,
                    s => Some(parse_task(s, no)?),
                },
                correct: parse_flag(f[4], no)?,
                motion_s: parse_num(f[5], no)?,
            });
        }
        if !pending.is_empty() {
            return Err(Error::Format("session log ends inside a trial".into()));
        }
        let missing = |what: &str| Error::Format(format!("session log lacks {what}"));
        Ok(SessionLog {
            mode: mode.ok_or_else(|| missing("mode"))?,
            maze_seed: seed.ok_or_else(|| missing("maze_seed"))?,
            config_hash: hash.ok_or_else(|| missing("config_hash"))?,
            config_json: config.ok_or_else(|| missing("config"))?,
            outcomes,
            status: status.ok_or_else(|| missing("status"))?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

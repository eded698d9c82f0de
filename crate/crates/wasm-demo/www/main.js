import init, { filterResponse, erdSpectra, trialCompletion, onlineRule } from "./pkg/mi_bci_wasm.js";

const PAD = 36;

function axes(ctx, w, h, xmax, ymin, ymax, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(PAD, 4);
  ctx.lineTo(PAD, h - PAD);
  ctx.lineTo(w - 4, h - PAD);
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(xlabel, w - 80, h - 8);
  ctx.fillText(ylabel, 4, 12);
  ctx.fillText(String(ymax), 4, 24);
  ctx.fillText(String(ymin), 4, h - PAD);
  ctx.fillText(String(xmax), w - 30, h - PAD + 14);
  return {
    x: (v) => PAD + (v / xmax) * (w - PAD - 8),
    y: (v) => 4 + (1 - (Math.min(Math.max(v, ymin), ymax) - ymin) / (ymax - ymin)) * (h - PAD - 8),
  };
}

function line(ctx, sx, sy, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function drawFilter() {
  const c = document.getElementById("filter");
  const ctx = c.getContext("2d");
  const freqs = Float64Array.from({ length: 500 }, (_, i) => (i + 1) * 0.25);
  const db = filterResponse(freqs);
  const s = axes(ctx, c.width, c.height, 125, -60, 5, "Hz", "dB");
  line(ctx, s.x, s.y, freqs, db, "#333");
  const at = (f) => db[Math.round(f / 0.25) - 1].toFixed(2);
  document.getElementById("filter-out").textContent =
    `gain at 1 Hz ${at(1)} dB, 10 Hz ${at(10)} dB, 45 Hz ${at(45)} dB, 60 Hz ${at(60)} dB`;
}

function drawSpectrum() {
  const erd = parseFloat(document.getElementById("erd").value);
  const seed = parseInt(document.getElementById("seed").value, 10) || 0;
  const flat = erdSpectra(erd, seed, 6);
  const n = flat[0];
  const part = (k) => flat.subarray(1 + k * n, 1 + (k + 1) * n);
  const freqs = part(0);
  const c3Left = part(1);
  const c3Right = part(2);
  const c = document.getElementById("spectrum");
  const ctx = c.getContext("2d");
  const all = [...c3Left, ...c3Right];
  const ymax = Math.ceil(Math.max(...all) / 5) * 5;
  const s = axes(ctx, c.width, c.height, 45, ymax - 40, ymax, "Hz", "dB");
  line(ctx, s.x, s.y, freqs, c3Left, "#c33");
  line(ctx, s.x, s.y, freqs, c3Right, "#36c");
  const mu = freqs.findIndex((f) => f >= 10);
  const ratio = Math.pow(10, (c3Right[mu] - c3Left[mu]) / 10);
  document.getElementById("spectrum-out").textContent =
    `C3 power at ${freqs[mu].toFixed(2)} Hz, RIGHT_HAND / LEFT_HAND = ${ratio.toFixed(3)}`;
}

function drawChance() {
  const p = parseFloat(document.getElementById("p").value);
  document.getElementById("p-val").textContent = p.toFixed(2);
  const [opportunities, needed] = onlineRule();
  const ps = Array.from({ length: 101 }, (_, i) => i / 100);
  const ys = ps.map((q) => trialCompletion(q));
  const c = document.getElementById("chance");
  const ctx = c.getContext("2d");
  const s = axes(ctx, c.width, c.height, 1, 0, 1, "p", "P(complete)");
  line(ctx, s.x, s.y, ps, ys, "#333");
  const here = trialCompletion(p);
  ctx.fillStyle = "#c33";
  ctx.beginPath();
  ctx.arc(s.x(p), s.y(here), 4, 0, 2 * Math.PI);
  ctx.fill();
  document.getElementById("chance-out").textContent =
    `${needed} correct of ${opportunities} decisions needed; P(complete | p = ${p.toFixed(2)}) = ${(100 * here).toFixed(2)}%` +
    `; uniform guessing (p = 1/3) gives ${(100 * trialCompletion(1 / 3)).toFixed(2)}%`;
}

await init();
drawFilter();
drawChance();
drawSpectrum();
document.getElementById("erd").addEventListener("input", (e) => {
  document.getElementById("erd-val").textContent = parseFloat(e.target.value).toFixed(2);
});
document.getElementById("erd-run").addEventListener("click", drawSpectrum);
document.getElementById("p").addEventListener("input", drawChance);

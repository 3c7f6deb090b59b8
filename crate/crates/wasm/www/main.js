import init, { gapGrid, phaseCurve, twoPointTrajectory } from "./pkg/baflow_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function fail(out, e) {
  out.textContent = String(e);
  out.className = "readout err";
}

function ok(out, text) {
  out.textContent = text;
  out.className = "readout";
}

// Simple line plot; series = [{xs, ys, color}].
function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.xs), ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = opts.y0 ?? Math.min(...ys), y1 = opts.y1 ?? Math.max(...ys);
  if (y1 === y0) { y1 += 1; y0 -= 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  if (y0 < 0 && y1 > 0) {
    ctx.beginPath(); ctx.moveTo(pad, py(0)); ctx.lineTo(w - pad, py(0)); ctx.stroke();
  }
  ctx.fillStyle = "#444";
  ctx.font = "11px monospace";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 14);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
  }
}

function heat(canvas, grid, na, nb) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  const vals = Array.from(grid).filter(Number.isFinite);
  const lo = Math.min(...vals), hi = Math.max(...vals);
  const cw = w / nb, ch = h / na;
  for (let i = 0; i < na; i++) {
    for (let j = 0; j < nb; j++) {
      const v = grid[i * nb + j];
      if (!Number.isFinite(v)) { ctx.fillStyle = "#eee"; }
      else {
        const u = (v - lo) / (hi - lo || 1);
        ctx.fillStyle = `hsl(${240 - 240 * u}, 70%, ${35 + 25 * u}%)`;
      }
      // alpha increases upward
      ctx.fillRect(j * cw, h - (i + 1) * ch, cw + 1, ch + 1);
    }
  }
  return [lo, hi];
}

function runGap() {
  const out = $("g-out");
  const na = 80, nb = 160;
  try {
    const grid = gapGrid(num("g-alo"), num("g-ahi"), na, num("g-blo"), num("g-bhi"), nb);
    const [lo, hi] = heat($("g-canvas"), grid, na, nb);
    ok(out, `lambda* from ${lo.toFixed(5)} (blue) to ${hi.toFixed(5)} (red); grey: no interior optimum`);
  } catch (e) { fail(out, e); }
}

function runPhase() {
  const out = $("p-out");
  const beta = num("p-beta");
  $("p-beta-v").textContent = beta.toFixed(2);
  try {
    const s2 = num("p-s2");
    const v = phaseCurve(s2, beta, 2 * s2, 201);
    const xs = [], ys = [];
    for (let i = 0; i + 1 < v.length; i += 2) { xs.push(v[i]); ys.push(v[i + 1]); }
    plot($("p-canvas"), [{ xs, ys, color: "#1565c0" }]);
    const sStar = v[v.length - 1];
    ok(out, sStar > 0 ? `s* = ${sStar.toFixed(6)}, alpha = ${(1 - 1 / (2 * beta * s2)).toFixed(6)}`
                      : "2 beta sigma^2 <= 1: the variance collapses to 0");
  } catch (e) { fail(out, e); }
}

function runFlow() {
  const out = $("f-out");
  try {
    const v = twoPointTrajectory(num("f-alpha"), num("f-bd"), num("f-q0"), 0.02, num("f-t"));
    const t = [], q = [], f = [];
    for (let i = 0; i < v.length; i += 4) { t.push(v[i]); q.push(v[i + 1]); f.push(v[i + 2]); }
    const fmin = Math.min(...f), fmax = Math.max(...f);
    const fs = f.map((x) => (x - fmin) / (fmax - fmin || 1));
    plot($("f-canvas"), [
      { xs: t, ys: q, color: "#2e7d32" },
      { xs: t, ys: fs, color: "#c62828" },
    ], { y0: 0, y1: 1 });
    ok(out, `green: q0(t), final ${q[q.length - 1].toFixed(6)}; red: free energy rescaled to [0,1], drop ${(fmax - fmin).toExponential(3)} nats`);
  } catch (e) { fail(out, e); }
}

await init();
$("g-run").onclick = runGap;
$("f-run").onclick = runFlow;
$("p-beta").oninput = runPhase;
$("p-s2").onchange = runPhase;
runGap();
runPhase();
runFlow();

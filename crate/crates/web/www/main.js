import init, { compare, spacing_histogram, echo_curve } from "./pkg/chaotic_kraus_web.js";

const $ = (id) => document.getElementById(id);
const model = () => [Number($("n").value), Number($("jx").value), Number($("seed").value)];

function axes(ctx, w, h, pad, xmax, ymin, ymax) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(ymax.toFixed(3), 2, pad / 2 + 10);
  ctx.fillText(ymin.toFixed(3), 2, h - pad);
  ctx.fillText(String(+xmax.toFixed(2)), w - pad, h - pad / 4);
  return {
    x: (v) => pad + (v / xmax) * (w - 1.5 * pad),
    y: (v) => pad / 2 + (1 - (v - ymin) / (ymax - ymin || 1)) * (h - 1.5 * pad),
  };
}

function line(ctx, sx, sy, xs, ys, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function legend(ctx, entries, x0) {
  entries.forEach(([label, color, dash], i) => {
    ctx.strokeStyle = color;
    ctx.setLineDash(dash || []);
    ctx.beginPath();
    ctx.moveTo(x0, 20 + 16 * i);
    ctx.lineTo(x0 + 30, 20 + 16 * i);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#333";
    ctx.fillText(label, x0 + 36, 24 + 16 * i);
  });
}

async function guarded(statusId, work) {
  const status = $(statusId);
  status.className = "status";
  status.textContent = "working...";
  await new Promise((r) => setTimeout(r, 10));
  try {
    const t0 = performance.now();
    const note = work();
    status.textContent = `${note} (${((performance.now() - t0) / 1000).toFixed(2)} s)`;
  } catch (e) {
    status.className = "error";
    status.textContent = String(e.message || e);
  }
}

function runCompare() {
  const [n, jx, seed] = model();
  const tmax = Number($("tmax").value);
  const c = compare(n, jx, seed, tmax, 401);
  const cv = $("compare");
  const ctx = cv.getContext("2d");
  const series = [c.purity_exact, c.purity_kraus, c.fidelity_exact, c.fidelity_kraus];
  const ymin = Math.min(...series.map((s) => Math.min(...s)));
  const ax = axes(ctx, cv.width, cv.height, 40, tmax, Math.min(ymin, 0.999), 1);
  const t = c.times;
  line(ctx, ax.x, ax.y, t, c.purity_exact, "#1f77b4");
  line(ctx, ax.x, ax.y, t, c.purity_kraus, "#1f77b4", [5, 4]);
  line(ctx, ax.x, ax.y, t, c.fidelity_exact, "#d62728");
  line(ctx, ax.x, ax.y, t, c.fidelity_kraus, "#d62728", [5, 4]);
  legend(ctx, [
    ["purity, exact", "#1f77b4"],
    ["purity, Kraus", "#1f77b4", [5, 4]],
    ["fidelity, exact", "#d62728"],
    ["fidelity, Kraus", "#d62728", [5, 4]],
  ], cv.width - 190);
  const dp = c.mean_abs_dp;
  c.free();
  return `mean |dP| = ${dp.toExponential(3)}`;
}

function runSpacing() {
  const [n, jx, seed] = model();
  const v = spacing_histogram(n, jx, seed);
  const bins = (v.length - 2) / 2;
  const centers = v.slice(0, bins);
  const dens = v.slice(bins, 2 * bins);
  const width = centers[1] - centers[0];
  const cv = $("spacing");
  const ctx = cv.getContext("2d");
  const smax = centers[bins - 1] + width / 2;
  const ax = axes(ctx, cv.width, cv.height, 40, smax, 0, Math.max(1.05, ...dens));
  ctx.fillStyle = "#9ecae1";
  centers.forEach((c, i) => {
    const x0 = ax.x(c - width / 2);
    ctx.fillRect(x0, ax.y(dens[i]), ax.x(c + width / 2) - x0 - 1, ax.y(0) - ax.y(dens[i]));
  });
  const s = Array.from({ length: 200 }, (_, i) => (i * smax) / 199);
  line(ctx, ax.x, ax.y, s, s.map((x) => Math.exp(-x)), "#2ca02c");
  line(ctx, ax.x, ax.y, s, s.map((x) => (Math.PI / 2) * x * Math.exp((-Math.PI * x * x) / 4)), "#d62728", [5, 4]);
  legend(ctx, [["Poisson", "#2ca02c"], ["Wigner-Dyson", "#d62728", [5, 4]]], cv.width - 190);
  return `D_poisson = ${v[2 * bins].toFixed(3)}, D_wd = ${v[2 * bins + 1].toFixed(3)}`;
}

function runEcho() {
  const [n, jx, seed] = model();
  const tmax = Number($("echo-tmax").value);
  const v = echo_curve(n, jx, seed, tmax, 401);
  const half = v.length / 2;
  const t = v.slice(0, half);
  const m = v.slice(half);
  const cv = $("echo");
  const ctx = cv.getContext("2d");
  const ax = axes(ctx, cv.width, cv.height, 40, tmax, 0, 1);
  line(ctx, ax.x, ax.y, t, m, "#333");
  return `M(t_max) = ${m[half - 1].toFixed(4)}`;
}

await init();
$("run-compare").onclick = () => guarded("compare-status", runCompare);
$("run-spacing").onclick = () => guarded("spacing-status", runSpacing);
$("run-echo").onclick = () => guarded("echo-status", runEcho);

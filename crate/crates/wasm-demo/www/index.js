import init, { explore_example, fano_curve, eptlu_histogram } from "./pkg/uda_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const SOURCE = "#1f77b4";
const TARGET = "#d62728";

function call(fn, msg, ...args) {
  try {
    msg.textContent = "";
    msg.className = "";
    return JSON.parse(fn(...args));
  } catch (e) {
    msg.textContent = String(e.message ?? e);
    msg.className = "error";
    return null;
  }
}

function fmt(v) {
  if (v === null || v === undefined) return "";
  if (typeof v === "string") return v === "Infinity" ? "∞" : v;
  return Number.isInteger(v) ? String(v) : v.toFixed(4);
}

function shade(p) {
  const g = Math.round(255 * (1 - p));
  return `rgb(${g},${g},${g})`;
}

function clear(ctx) {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function drawCircle(ctx, points) {
  const cx = ctx.canvas.width / 2, cy = ctx.canvas.height / 2, r = 140;
  points.forEach((pt) => {
    const a = (pt.angle * Math.PI) / 180;
    const [x, y] = [Math.cos(a), -Math.sin(a)];
    ctx.fillStyle = shade(pt.prob_one);
    ctx.fillRect(cx + 0.75 * r * x - 2, cy + 0.75 * r * y - 2, 4, 4);
    if (pt.p > 0) dot(ctx, cx + r * x, cy + r * y, SOURCE);
    if (pt.q > 0) dot(ctx, cx + 1.1 * r * x, cy + 1.1 * r * y, TARGET);
    ctx.fillStyle = pt.truth === 1 ? "#2ca02c" : "#bbb";
    ctx.fillRect(cx + 0.6 * r * x - 1, cy + 0.6 * r * y - 1, 2, 2);
  });
}

function dot(ctx, x, y, color) {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, 2, 0, 2 * Math.PI);
  ctx.fill();
}

function drawPlane(ctx, points) {
  const xs = points.map((p) => p.coords[0]);
  const ys = points.map((p) => (p.coords.length > 1 ? p.coords[1] : 0));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const w = ctx.canvas.width - 80, h = ctx.canvas.height - 80;
  const sx = (x) => 40 + (x1 > x0 ? ((x - x0) / (x1 - x0)) * w : w / 2);
  const sy = (y) => 40 + (y1 > y0 ? (1 - (y - y0) / (y1 - y0)) * h : h / 2);
  const flat = y1 === y0;
  points.forEach((pt, i) => {
    const [x, y] = [sx(xs[i]), sy(ys[i])];
    ctx.fillStyle = shade(pt.prob_one);
    ctx.fillRect(x - 1, flat ? y - 30 : y - 1, 2, flat ? 20 : 2);
    if (pt.p > 0) dot(ctx, flat ? x : x - 6, flat ? y + 10 : y, SOURCE);
    if (pt.q > 0) dot(ctx, flat ? x : x + 6, flat ? y + 20 : y, TARGET);
    ctx.fillStyle = pt.truth === 1 ? "#2ca02c" : "#bbb";
    ctx.fillRect(x - 1, flat ? y - 45 : y + 4, 2, 4);
  });
}

function runExplore() {
  const msg = $("ex-msg");
  const id = Number($("ex-id").value);
  const cls = id === 4 ? 1 : Number($("ex-class").value);
  const data = call(explore_example, msg, id, cls, Number($("ex-res").value));
  const ctx = $("ex-canvas").getContext("2d");
  clear(ctx);
  if (!data) return;
  if (data.metric === "angular-degrees") drawCircle(ctx, data.points);
  else drawPlane(ctx, data.points);
  msg.textContent = `${data.points.length} points, ${data.posterior_support} classifiers keep posterior mass (entropy in bits; green marks label 1 under the ground truth)`;
  const rows = data.values
    .map((v) => `<tr><td>${v.quantity}</td><td>${fmt(v.value)}</td><td>${fmt(v.reference)}</td></tr>`)
    .join("");
  $("ex-table").innerHTML = `<tr><th>quantity</th><th>computed</th><th>reference</th></tr>${rows}`;
}

function axes(ctx, xmax, ymax, xlabel, ylabel) {
  const w = ctx.canvas.width, h = ctx.canvas.height;
  ctx.strokeStyle = "#444";
  ctx.beginPath();
  ctx.moveTo(50, 10);
  ctx.lineTo(50, h - 30);
  ctx.lineTo(w - 10, h - 30);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(xlabel, w - 120, h - 10);
  ctx.fillText(ylabel, 5, 20);
  ctx.fillText(fmt(xmax), w - 40, h - 15);
  ctx.fillText(fmt(ymax), 5, 40);
  return { x: (v) => 50 + (v / xmax) * (w - 60), y: (v) => h - 30 - (v / ymax) * (h - 40) };
}

function runFano() {
  const k = Number($("fano-k").value);
  const e = Number($("fano-e").value);
  $("fano-k-val").textContent = k;
  $("fano-e-val").textContent = e.toFixed(2);
  $("fano-e").disabled = k !== 2;
  const data = call(fano_curve, $("fano-msg"), k, e, 200);
  const ctx = $("fano-canvas").getContext("2d");
  clear(ctx);
  if (!data) return;
  const ymax = Math.max(1 - 1 / k, ...data.curve.map((c) => c.bound));
  const s = axes(ctx, data.max_u, ymax, "PTLU (bits)", "risk bound");
  ctx.strokeStyle = SOURCE;
  ctx.beginPath();
  data.curve.forEach((c, i) => {
    const [x, y] = [s.x(c.u), s.y(Math.max(c.bound, 0))];
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  $("fano-msg").textContent =
    k === 2 ? "Binary form: U²/4 + e*², bound on every learner's sample-wise risk." : "Multiclass form: (U − 1) / log₂(k − 1).";
}

function runEptlu() {
  const msg = $("ep-msg");
  const id = Number($("ep-id").value);
  const res = id <= 2 ? 360 : 200;
  const data = call(
    eptlu_histogram,
    msg,
    id,
    Number($("ep-class").value),
    res,
    Number($("ep-n").value),
    Number($("ep-trials").value),
    BigInt($("ep-seed").value),
  );
  const ctx = $("ep-canvas").getContext("2d");
  clear(ctx);
  if (!data) return;
  const bins = 40;
  const xmax = Math.log2(data.k);
  const counts = new Array(bins).fill(0);
  data.values.forEach((v) => counts[Math.min(bins - 1, Math.floor((v / xmax) * bins))]++);
  const s = axes(ctx, xmax, Math.max(...counts), "EPTLU (bits)", "count");
  ctx.fillStyle = "#9ecae1";
  counts.forEach((c, i) => {
    const [x0, x1] = [s.x((i * xmax) / bins), s.x(((i + 1) * xmax) / bins)];
    ctx.fillRect(x0, s.y(c), x1 - x0 - 1, s.y(0) - s.y(c));
  });
  ctx.strokeStyle = TARGET;
  ctx.beginPath();
  ctx.moveTo(s.x(data.ptlu), s.y(0));
  ctx.lineTo(s.x(data.ptlu), 10);
  ctx.stroke();
  const beyond = (t) => data.values.filter((v) => Math.abs(v - data.ptlu) > t).length / data.values.length;
  msg.textContent =
    `PTLU ${fmt(data.ptlu)} bits (red line). ` +
    `Pr[|U − Ũ| > 0.05] = ${fmt(beyond(0.05))} vs Hoeffding ${fmt(data.tail_0_05)}; ` +
    `Pr[|U − Ũ| > 0.1] = ${fmt(beyond(0.1))} vs ${fmt(data.tail_0_1)}.`;
}

await init();
$("ex-run").addEventListener("click", runExplore);
$("ex-id").addEventListener("change", () => {
  $("ex-res").value = Number($("ex-id").value) <= 2 ? 360 : 200;
  $("ex-class").disabled = $("ex-id").value === "4";
});
$("fano-k").addEventListener("input", runFano);
$("fano-e").addEventListener("input", runFano);
$("ep-run").addEventListener("click", runEptlu);
runExplore();
runFano();
runEptlu();

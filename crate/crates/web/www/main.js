import init, { negativity_trajectory, squeezing_threshold, cavity_protocol } from "./pkg/cvgauss_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

// rows is a flat array with `width` numbers per record; column 0 is x
function plot(canvas, rows, width, series, labels) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 40;
  ctx.clearRect(0, 0, W, H);
  const n = rows.length / width;
  const xs = [], ys = series.map(() => []);
  for (let i = 0; i < n; i++) {
    xs.push(rows[i * width]);
    series.forEach((c, k) => ys[k].push(rows[i * width + c]));
  }
  const all = ys.flat().filter(Number.isFinite);
  const lo = Math.min(0, ...all), hi = Math.max(...all, 1e-12);
  const x0 = xs[0], x1 = xs[n - 1];
  const px = x => pad + (x - x0) / (x1 - x0) * (W - 2 * pad);
  const py = y => H - pad - (y - lo) / (hi - lo) * (H - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, H - pad);
  ctx.fillText(x0.toFixed(1), pad, H - pad + 14);
  ctx.fillText(x1.toFixed(1), W - pad - 20, H - pad + 14);

  ys.forEach((y, k) => {
    ctx.strokeStyle = COLORS[k];
    ctx.beginPath();
    y.forEach((v, i) => (i ? ctx.lineTo(px(xs[i]), py(v)) : ctx.moveTo(px(xs[i]), py(v))));
    ctx.stroke();
    ctx.fillStyle = COLORS[k];
    ctx.fillText(labels[k], W - pad - 150, pad + 14 * (k + 1));
  });
}

function values(form) {
  const out = {};
  for (const el of form.elements) {
    if (el.name) out[el.name] = el.type === "checkbox" ? el.checked : Number(el.value);
  }
  return out;
}

function report(id, text, failed = false) {
  const el = document.getElementById(id);
  el.textContent = text;
  el.classList.toggle("error", failed);
}

function runOscillators(e) {
  e?.preventDefault();
  const v = values(document.getElementById("osc"));
  const start = performance.now();
  try {
    const rows = negativity_trajectory(v.r, v.coupling, v.gamma0, v.cutoff, v.temperature, v.t_end, 0.02, v.markov);
    plot(document.getElementById("osc-plot"), rows, 3, [1, 2], ["smallest PT eigenvalue", "log-negativity"]);
    const n = rows.length / 3;
    const ms = (performance.now() - start).toFixed(0);
    report("osc-status", `final E_N = ${rows[3 * n - 1].toFixed(4)}, ${n} samples in ${ms} ms`);
  } catch (err) {
    report("osc-status", String(err), true);
  }
}

function runThreshold() {
  const v = values(document.getElementById("thr"));
  try {
    report("thr-status", `r_th = ${squeezing_threshold(v.temperature, v.coupling).toFixed(6)}`);
  } catch (err) {
    report("thr-status", String(err), true);
  }
}

function runCavity(e) {
  e?.preventDefault();
  const v = values(document.getElementById("cav"));
  try {
    const out = cavity_protocol(v.kappa, v.beta_u, v.beta_s);
    const [xi0, xi1] = out.slice(-2);
    const rows = out.slice(0, -2);
    plot(document.getElementById("cav-plot"), rows, 3, [1, 2], ["purity", "distance to target"]);
    const last = rows.length - 1;
    report("cav-status", `xi0 = ${xi0.toFixed(4)}, xi1 = ${xi1.toFixed(4)}, final distance ${rows[last].toExponential(2)}`);
  } catch (err) {
    report("cav-status", String(err), true);
  }
}

await init();
document.getElementById("osc").addEventListener("submit", runOscillators);
document.getElementById("thr").addEventListener("input", runThreshold);
document.getElementById("cav").addEventListener("submit", runCavity);
runThreshold();
runCavity();
runOscillators();

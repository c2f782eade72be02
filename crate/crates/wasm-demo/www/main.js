import init, { field_heatmap, clt_histogram, variance_profile } from "./pkg/lattice_clt_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function diverging(t) {
  // t in [-1, 1] -> blue / white / red
  const a = Math.min(1, Math.abs(t));
  const w = Math.round(255 * (1 - a));
  return t < 0 ? [w, w, 255] : [255, w, w];
}

function drawHeatmap() {
  const side = Math.max(8, Math.min(256, num("hm-side")));
  const values = field_heatmap($("hm-kernel").value, side, num("hm-seed"));
  const scale = Math.max(...values.map(Math.abs)) || 1;
  const canvas = $("hm-canvas");
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(side, side);
  values.forEach((v, i) => {
    const [r, g, b] = diverging(v / scale);
    img.data.set([r, g, b, 255], 4 * i);
  });
  const off = new OffscreenCanvas(side, side);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function axes(ctx, w, h, pad) {
  ctx.strokeStyle = "#444";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
}

function drawClt() {
  const r = JSON.parse(clt_histogram($("clt-kernel").value, num("clt-n"), num("clt-reps"), num("clt-seed"), 40));
  const canvas = $("clt-canvas");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  axes(ctx, w, h, pad);

  const lo = r.bin_lo, hi = -r.bin_lo;
  const peak = 1 / (r.sigma * Math.sqrt(2 * Math.PI));
  const ymax = 1.1 * Math.max(peak, ...r.density);
  const px = (x) => pad + ((x - lo) / (hi - lo)) * (w - 1.5 * pad);
  const py = (y) => h - pad - (y / ymax) * (h - 1.5 * pad);

  ctx.fillStyle = "#8fb3d9";
  r.density.forEach((d, k) => {
    const x0 = px(lo + k * r.bin_width), x1 = px(lo + (k + 1) * r.bin_width);
    ctx.fillRect(x0, py(d), x1 - x0 - 1, py(0) - py(d));
  });

  ctx.strokeStyle = "#c0392b";
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i <= 200; i++) {
    const x = lo + ((hi - lo) * i) / 200;
    const y = Math.exp(-0.5 * (x / r.sigma) ** 2) * peak;
    i ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
  }
  ctx.stroke();
  ctx.lineWidth = 1;

  ctx.fillStyle = "#222";
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  [-3, -2, -1, 0, 1, 2, 3].forEach((k) => ctx.fillText(`${k}σ`, px(k * r.sigma), h - pad + 16));

  const verdict = r.passed ? '<span class="pass">not rejected</span>' : '<span class="fail">rejected</span>';
  $("clt-out").innerHTML =
    `σ = ${r.sigma.toFixed(4)}   σ_n/b_n = ${r.sigma_n_over_b_n.toFixed(4)}   sample variance / σ² = ${(r.sample_variance / r.sigma ** 2).toFixed(4)}\n` +
    `KS D = ${r.ks.toFixed(4)}, critical value ${r.ks_critical.toFixed(4)}, p = ${r.ks_p_value.toFixed(3)}: normality ${verdict}`;
}

function drawProfile() {
  const { levels } = JSON.parse(variance_profile(num("ex2-n")));
  const canvas = $("ex2-canvas");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  axes(ctx, w, h, pad);

  const ymax = 1.15 * Math.max(...levels.map((l) => l.ratio));
  const px = (i) => pad + ((i + 0.5) / levels.length) * (w - 1.5 * pad);
  const py = (y) => h - pad - (y / ymax) * (h - 1.5 * pad);

  ctx.strokeStyle = "#3b6ea5";
  ctx.lineWidth = 2;
  ctx.beginPath();
  levels.forEach((l, i) => (i ? ctx.lineTo(px(i), py(l.ratio)) : ctx.moveTo(px(i), py(l.ratio))));
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#3b6ea5";
  levels.forEach((l, i) => {
    ctx.beginPath();
    ctx.arc(px(i), py(l.ratio), 3.5, 0, 2 * Math.PI);
    ctx.fill();
  });
  ctx.fillStyle = "#222";
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  levels.forEach((l, i) => ctx.fillText(String(l.n), px(i), h - pad + 16));
  ctx.textAlign = "right";
  [0, 0.5, 1, 1.5].filter((y) => y < ymax).forEach((y) => ctx.fillText(y.toFixed(1), pad - 6, py(y) + 4));

  $("ex2-out").textContent = levels
    .map((l) => `n=${String(l.n).padStart(2)}  |Γ_n|=${String(l.size).padStart(6)}  σ²/|Γ_n| = ${l.ratio.toFixed(4)}`)
    .join("\n");
}

function guard(f) {
  return () => {
    try {
      f();
    } catch (e) {
      $("status").textContent = `Error: ${e}`;
    }
  };
}

await init();
$("status").textContent = "Ready. Everything below runs locally in your browser.";
$("hm-run").addEventListener("click", guard(drawHeatmap));
$("clt-run").addEventListener("click", guard(drawClt));
$("ex2-run").addEventListener("click", guard(drawProfile));
guard(drawHeatmap)();
guard(drawClt)();
guard(drawProfile)();

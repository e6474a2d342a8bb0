import init, { otfCurves, budgetCurves, simulateChart } from "./pkg/fdd_wasm.js";

const COLORS = ["#000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function bindLabel(input) {
  const span = input.parentElement.querySelector("span");
  const show = () => { if (span) span.textContent = input.value; };
  input.addEventListener("input", show);
  show();
}

// series: [{name, x, y, axis: "left"|"right"}], optional log scales
function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 50;
  ctx.clearRect(0, 0, W, H);
  const tx = opts.logX ? Math.log10 : (v) => v;
  const ty = { left: opts.logY ? Math.log10 : (v) => v, right: (v) => v };
  const range = (vals) => {
    const f = vals.filter(Number.isFinite);
    let lo = Math.min(...f), hi = Math.max(...f);
    if (hi === lo) hi = lo + 1;
    return [lo, hi];
  };
  const xs = range(series.flatMap((s) => s.x.map(tx)));
  const ys = {};
  for (const side of ["left", "right"]) {
    const ss = series.filter((s) => (s.axis || "left") === side);
    if (ss.length) ys[side] = range(ss.flatMap((s) => s.y.map(ty[side])));
  }
  const px = (v) => pad + ((tx(v) - xs[0]) / (xs[1] - xs[0])) * (W - 2 * pad);
  const py = (v, side) => H - pad + ((ys[side][0] - ty[side](v)) / (ys[side][1] - ys[side][0])) * (H - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  const fmt = (v, log) => (log ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(fmt(xs[0], opts.logX), pad, H - pad + 16);
  ctx.fillText(fmt(xs[1], opts.logX), W - pad - 40, H - pad + 16);
  if (opts.xLabel) ctx.fillText(opts.xLabel, W / 2 - 30, H - 12);
  if (ys.left) {
    ctx.fillText(fmt(ys.left[1], opts.logY), 4, pad + 4);
    ctx.fillText(fmt(ys.left[0], opts.logY), 4, H - pad);
  }
  if (ys.right) {
    ctx.fillText(fmt(ys.right[1]), W - pad + 4, pad + 4);
    ctx.fillText(fmt(ys.right[0]), W - pad + 4, H - pad);
  }

  series.forEach((s, i) => {
    const side = s.axis || "left";
    ctx.strokeStyle = s.color || COLORS[i % COLORS.length];
    ctx.setLineDash(side === "right" ? [5, 3] : []);
    ctx.beginPath();
    let pen = false;
    s.x.forEach((x, j) => {
      const y = s.y[j];
      if (!Number.isFinite(y) || (opts.logY && side === "left" && y <= 0)) { pen = false; return; }
      if (pen) ctx.lineTo(px(x), py(y, side)); else ctx.moveTo(px(x), py(y, side));
      pen = true;
    });
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.name, pad + 8 + 110 * i, pad - 10);
  });
}

function updateOtf() {
  const ka = +document.getElementById("otf-ka").value;
  const alpha = +document.getElementById("otf-alpha").value;
  const c = JSON.parse(otfCurves(ka, alpha, 256));
  const series = [{ name: "full", x: c.k_over_kc, y: c.beta_full }];
  c.beta_regions.forEach((b, i) => series.push({ name: `region ${i + 1}`, x: c.k_over_kc, y: b }));
  series.push({ name: "CRB gain", x: c.k_over_kc, y: c.crb_ratio, axis: "right" });
  plot(document.getElementById("otf-plot"), series, { xLabel: "k / k_c" });
  const at = (f) => {
    const j = c.k_over_kc.findIndex((k) => k >= f);
    return j < 0 ? NaN : c.crb_ratio[j];
  };
  document.getElementById("otf-out").textContent =
    `region areas: ${c.area_fractions.map((a) => a.toFixed(3)).join(", ")}\n` +
    `CRB gain at 0.5 / 0.8 / 0.9 k_c: ${[0.5, 0.8, 0.9].map((f) => at(f).toFixed(2)).join(" / ")}`;
}

function updateBudget() {
  const out = document.getElementById("budget-out");
  out.textContent = "computing...";
  // let the message paint before the blocking call
  setTimeout(() => {
    try {
      const b = JSON.parse(budgetCurves(+document.getElementById("b-rough").value, +document.getElementById("b-gamma").value, 256));
      plot(document.getElementById("budget-plot"), [
        { name: "N_min DI", x: b.resolution_nm, y: b.n_di },
        { name: "N_min FDD", x: b.resolution_nm, y: b.n_fdd },
      ], { logY: true, xLabel: "resolution (nm)" });
      out.textContent = `budget ratio DI/FDD at Rayleigh (${b.rayleigh_nm.toFixed(1)} nm): ${b.rayleigh_ratio.toFixed(3)}`;
    } catch (e) {
      out.textContent = String(e);
    }
  }, 10);
}

function runSim() {
  const out = document.getElementById("sim-out");
  out.textContent = "simulating...";
  setTimeout(() => {
    try {
      const c = simulateChart(
        +document.getElementById("s-ppp").value,
        +document.getElementById("s-alpha").value,
        +document.getElementById("otf-ka").value,
        BigInt(document.getElementById("s-seed").value),
        256,
      );
      const canvas = document.getElementById("sim-canvas");
      canvas.width = c.width();
      canvas.height = c.height();
      const img = new ImageData(new Uint8ClampedArray(c.rgba()), c.width(), c.height());
      canvas.getContext("2d").putImageData(img, 0, 0);
      const s = JSON.parse(c.summary_json());
      c.free();
      out.textContent =
        `pixel ${s.pixel_nm.toFixed(2)} nm, bar frequency ${s.k_over_kc.toFixed(3)} k_c\n` +
        `SNR at the bar frequency: DI deconvolution ${s.snr_di_dcv_db.toFixed(2)} dB, FDD ${s.snr_fdd_db.toFixed(2)} dB`;
    } catch (e) {
      out.textContent = String(e);
    }
  }, 10);
}

await init();
for (const id of ["otf-ka", "otf-alpha", "b-rough", "b-gamma"]) bindLabel(document.getElementById(id));
for (const id of ["otf-ka", "otf-alpha"]) document.getElementById(id).addEventListener("input", updateOtf);
document.getElementById("b-run").addEventListener("click", updateBudget);
document.getElementById("s-run").addEventListener("click", runSim);
updateOtf();
updateBudget();

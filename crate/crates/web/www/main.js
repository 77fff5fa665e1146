import init, { encodeAmplitudes, noiseSweep, synthHistogram } from "./pkg/qrecover_web.js";

const $ = (id) => document.getElementById(id);
const parseValues = (s) => new Float64Array(s.split(/[\s,;]+/).filter(Boolean).map(Number));
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px sans-serif";
  return ctx;
}

function bars(canvas, values, lo, hi, labels) {
  const ctx = clear(canvas);
  const pad = 24, w = (canvas.width - 2 * pad) / values.length;
  const y = (v) => canvas.height - pad - ((v - lo) / (hi - lo)) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.moveTo(pad, y(0)); ctx.lineTo(canvas.width - pad, y(0)); ctx.stroke();
  values.forEach((v, i) => {
    ctx.fillStyle = v < 0 ? "#d62728" : "#1f77b4";
    const top = Math.min(y(v), y(0));
    ctx.fillRect(pad + i * w + 1, top, Math.max(w - 2, 1), Math.abs(y(v) - y(0)));
    if (labels && values.length <= 32) {
      ctx.fillStyle = "#444";
      ctx.fillText(labels[i], pad + i * w + 2, canvas.height - 6);
    }
  });
}

function lines(canvas, xs, series) {
  const ctx = clear(canvas);
  const pad = 30;
  const x = (v) => pad + (v - xs[0]) / (xs[xs.length - 1] - xs[0] || 1) * (canvas.width - 2 * pad);
  const y = (v) => canvas.height - pad - (v + 1) / 2 * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath(); ctx.moveTo(pad, y(0)); ctx.lineTo(canvas.width - pad, y(0)); ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText("+1", 4, y(1) + 4); ctx.fillText("-1", 4, y(-1) + 4);
  ctx.fillText(`scale ${xs[xs.length - 1]}`, canvas.width - pad - 50, canvas.height - 8);
  series.forEach((ys, q) => {
    ctx.strokeStyle = COLORS[q % COLORS.length];
    ctx.beginPath();
    ys.forEach((v, i) => (i ? ctx.lineTo(x(xs[i]), y(v)) : ctx.moveTo(x(xs[i]), y(v))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(`q${q}`, canvas.width - pad + 4, y(ys[ys.length - 1]) + 4);
  });
}

function guarded(info, f) {
  return () => {
    try { f(); } catch (e) { info.innerHTML = `<span class="err">${e.message ?? e}</span>`; }
  };
}

function runEncode() {
  const v = JSON.parse(encodeAmplitudes(parseValues($("enc-values").value)));
  const n = v.n_qubits;
  $("enc-info").textContent =
    `${n} qubits, ${v.n_ry} RY and ${v.n_cnot} CNOT gates; probabilities sum to ${v.probabilities.reduce((a, b) => a + b, 0).toFixed(12)}`;
  const labels = v.amplitudes.map((_, i) => i.toString(2).padStart(n, "0"));
  bars($("enc-plot"), v.amplitudes, -1, 1, labels);
  $("enc-gates").textContent = v.gates.join("\n");
}

function runSweep() {
  const s = JSON.parse(noiseSweep(
    parseValues($("ns-values").value),
    Number($("ns-layers").value),
    Number($("ns-seed").value),
    Number($("ns-scale").value),
    Number($("ns-steps").value),
  ));
  const perQubit = Array.from({ length: s.n_qubits }, (_, q) => s.expvals.map((row) => row[q]));
  lines($("ns-plot"), s.scales, perQubit);
  const last = s.deviation[s.deviation.length - 1];
  $("ns-info").textContent =
    `noiseless <Z> = [${s.noiseless.map((z) => z.toFixed(3)).join(", ")}]; mean |deviation| at max scale ${last.toFixed(4)}`;
}

function runHistogram() {
  const h = JSON.parse(synthHistogram(
    Number($("sh-n").value),
    Number($("sh-f").value),
    Number($("sh-seed").value),
    Number($("sh-bins").value),
  ));
  const max = Math.max(...h.counts);
  bars($("sh-plot"), h.counts, 0, max, h.edges.slice(0, -1).map((e) => e.toFixed(2)));
  const m = h.moments;
  $("sh-info").textContent =
    `mean ${m.mean.toFixed(3)}, std ${m.std.toFixed(3)}, range [${m.min.toFixed(3)}, ${m.max.toFixed(3)}]; modes near ${h.modes.map((x) => x.toFixed(2)).join(", ")}`;
}

await init();
for (const [btn, info, f] of [["enc-run", "enc-info", runEncode], ["ns-run", "ns-info", runSweep], ["sh-run", "sh-info", runHistogram]]) {
  const g = guarded($(info), f);
  $(btn).addEventListener("click", g);
  g();
}

import init, { scenarios, verify, hym_curve } from "./pkg/higgs_wasm.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => (typeof x === "number" ? x.toExponential(3) : String(x));

function heatmap(canvas, n, values) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  values.forEach((v, i) => {
    const t = (v - lo) / span;
    img.data.set([Math.round(255 * t), 60, Math.round(255 * (1 - t)), 255], 4 * i);
  });
  const tmp = new OffscreenCanvas(n, n);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
  return [lo, hi];
}

function solveCurve() {
  const log = $("curve-log");
  try {
    const r = JSON.parse(hym_curve(+$("len-l").value, +$("len-m").value, +$("amp").value, +$("curve-seed").value, 32));
    const [lo, hi] = heatmap($("heat"), r.grid, r.log_h);
    const steps = r.history.map(([s, res, dt]) => `${String(s).padStart(4)}  ${fmt(res)}  dt ${dt}`).join("\n");
    log.textContent =
      `converged ${r.converged}, λ = ${fmt(r.lambda)}\n` +
      `|h_flow − h_direct| = ${fmt(r.direct_difference)}\n` +
      `log h in [${fmt(lo)}, ${fmt(hi)}]\n\nstep  residual\n${steps}`;
  } catch (e) {
    log.textContent = String(e);
  }
}

function runVerify() {
  const status = $("verify-status");
  const table = $("rows");
  status.textContent = "running…";
  table.innerHTML = "";
  setTimeout(() => {
    try {
      const r = JSON.parse(verify($("toml").value, +$("verify-seed").value));
      const failed = r.rows.filter((row) => row.status === "FAIL").length;
      status.textContent = `${r.rows.length} checks, ${failed} failed, λ = ${fmt(r.lambda)}`;
      table.innerHTML = "<tr><th></th><th>tag</th><th>check</th><th>residual</th><th>tolerance</th></tr>";
      for (const row of r.rows) {
        const tr = table.insertRow();
        tr.className = row.status === "n/a" ? "na" : row.status;
        tr.title = row.note;
        [row.status, row.tag, row.check].forEach((t) => (tr.insertCell().textContent = t));
        [row.residual, row.tolerance].forEach((x) => {
          const td = tr.insertCell();
          td.className = "num";
          td.textContent = fmt(x);
        });
      }
    } catch (e) {
      status.textContent = String(e);
    }
  }, 10);
}

await init();
const list = JSON.parse(scenarios());
for (const s of list) $("scenario").add(new Option(s.name, s.name));
const pick = () => {
  const s = list.find((x) => x.name === $("scenario").value);
  $("toml").value = s.toml;
  $("scenario-desc").textContent = s.description;
};
$("scenario").addEventListener("change", pick);
pick();
$("curve-run").addEventListener("click", solveCurve);
$("verify-run").addEventListener("click", runVerify);
solveCurve();

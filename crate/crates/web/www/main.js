import init, { simulate_episode, score_policies, dispersion } from "./pkg/cybergym_web.js";

const $ = (id) => document.getElementById(id);
const REWARDS = ["sparse-positive", "sparse-negative", "dense"];
let episode = null;

function env() {
  return [Number($("nodes").value), $("order").value, $("space").value, Number($("attack").value)];
}

function guarded(fn) {
  return () => {
    $("error").textContent = "";
    try {
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function nodes(flags) {
  return flags.map((c) => `<span class="node${c ? " hit" : ""}"></span>`).join("");
}

function showStep() {
  const s = episode.steps[Number($("step").value) - 1];
  const turns = s.turns
    .map((t) => `<div class="step">${t.actor.padEnd(4)} ${t.action.padEnd(22)} ${nodes(t.compromised)}</div>`)
    .join("");
  const rewards = REWARDS.map((r, i) => `${r} ${s.rewards[i]}`).join(", ");
  $("episode").innerHTML =
    `<p>Episode ground truth ${episode.ground_truth_score.toFixed(3)}; episodic rewards ` +
    REWARDS.map((r, i) => `${r} ${episode.episodic_rewards[i]}`).join(", ") + "</p>" +
    `<p>Step ${s.step}</p>${turns}` +
    `<div class="step">seen ${"".padEnd(23)} ${nodes(s.union)}</div>` +
    `<p>ground-truth penalty ${s.ground_truth_penalty}; end-of-step rewards: ${rewards}</p>`;
}

function simulate() {
  const [n, order, space, attack] = env();
  episode = JSON.parse(simulate_episode(n, order, space, $("policy").value, attack, BigInt($("seed").value)));
  $("step").max = episode.steps.length;
  $("step").disabled = false;
  showStep();
}

function score() {
  const [n, order, space, attack] = env();
  const rows = JSON.parse(score_policies(n, order, space, attack, Number($("episodes").value), BigInt($("seed").value)));
  const body = rows
    .map((r) =>
      r.error
        ? `<tr><th>${r.policy}</th><td colspan="4">${r.error}</td></tr>`
        : `<tr><th>${r.policy}</th><td>${r.ground_truth_mean.toFixed(4)} ± ${r.ground_truth_se.toFixed(4)}</td>` +
          r.step_rewards.map((x) => `<td>${x.toFixed(4)}</td>`).join("") + "</tr>",
    )
    .join("");
  $("scores").innerHTML =
    `<table><tr><th>policy</th><th>ground truth</th>${REWARDS.map((r) => `<th>${r}</th>`).join("")}</tr>${body}</table>`;
}

function dv() {
  const out = JSON.parse(dispersion($("curve").value, Number($("window").value)));
  $("dvout").innerHTML =
    `<p>DV = ${out.dv.toFixed(4)} (window ${out.window}, ${out.window_iqrs.length} windows)</p>` +
    `<p>first differences: ${out.differences.map((d) => d.toFixed(3)).join(" ")}</p>`;
}

await init();
$("simulate").onclick = guarded(simulate);
$("step").oninput = guarded(showStep);
$("score").onclick = guarded(score);
$("dv").onclick = guarded(dv);

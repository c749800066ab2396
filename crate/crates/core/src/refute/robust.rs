//! Safety is not robust: arbitrarily small perturbations of the safety
//! counterexample MDP make every optimal policy far from optimal on the
//! original.

use serde_json::json;

use super::figures::fig3_mdp;
use super::report::{ExperimentReport, Table};
use crate::error::{Error, Result};
use crate::mdp::{DeterministicPolicies, PositionalPolicy};
use crate::spec::{optimal_value, spec_value, Specification};

const TOL: f64 = 1e-9;

/// Compares `Π_opt(M_δ)` with the `eps`-optimal policies of `M` for
/// `M = fig3(1, 1)` and `M_δ = fig3(1 - δ, 1 - δ)`, over all deterministic
/// positional policies. The verdict is `"disjoint"` when no optimal policy
/// of `M_δ` is `eps`-optimal on `M`, `"overlap"` otherwise.
pub fn robustness_experiment(delta: f64, eps: f64) -> Result<ExperimentReport> {
    if !(0.0..1.0).contains(&delta) || !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter("need delta and eps in [0, 1)".into()));
    }
    let m = fig3_mdp(1.0, 1.0)?;
    let md = fig3_mdp(1.0 - delta, 1.0 - delta)?;
    let spec = Specification::safe(&["b"]);
    let (opt_m, _) = optimal_value(&m, &spec)?;
    let (opt_md, _) = optimal_value(&md, &spec)?;
    let closeness = m.max_abs_difference(&md);

    let mut table = Table::new(&["policy", "value_perturbed", "value_original", "optimal_perturbed", "eps_optimal_original"]);
    let mut optimal_members = Vec::new();
    let mut overlap = false;
    let mut best_seen = f64::NEG_INFINITY;
    for actions in DeterministicPolicies::new(m.num_states(), m.num_actions()) {
        let policy = PositionalPolicy::deterministic(m.num_actions(), &actions);
        let v_md = spec_value(&md, &spec, &policy)?;
        let v_m = spec_value(&m, &spec, &policy)?;
        best_seen = best_seen.max(v_md);
        let optimal = v_md >= opt_md - TOL;
        let eps_optimal = v_m >= opt_m - eps - TOL;
        if optimal {
            optimal_members.push(json!({ "actions": actions, "value_perturbed": v_md, "value_original": v_m }));
            overlap |= eps_optimal;
        }
        let name: Vec<String> = actions.iter().map(|a| format!("a{}", a + 1)).collect();
        table.push(vec![json!(name.join(" ")), json!(v_md), json!(v_m), json!(optimal), json!(eps_optimal)]);
    }
    let verdict = if overlap { "overlap" } else { "disjoint" };
    let mut report = ExperimentReport::new("robustness");
    report
        .param("delta", delta)
        .param("eps", eps)
        .quantity("optimum_original", opt_m)
        .quantity("optimum_perturbed", opt_md)
        .quantity("best_enumerated_perturbed", best_seen)
        .quantity("max_transition_difference", closeness)
        .quantity("optimal_policies_perturbed", json!(optimal_members))
        .quantity("verdict", verdict);
    report.check("perturbed MDP is delta-close", closeness <= delta + 1e-12);
    report.check("optimum of the original is 1", (opt_m - 1.0).abs() <= TOL);
    report.check("enumeration agrees with the solver", (best_seen - opt_md).abs() <= TOL);
    if delta > 0.0 {
        report.check("optimum of the perturbed MDP is delta", (opt_md - delta).abs() <= TOL);
        report.check("optimal perturbed policies are not eps-optimal originally", !overlap);
    } else {
        report.check("without perturbation the sets intersect", overlap);
    }
    report.table = table;
    Ok(report)
}

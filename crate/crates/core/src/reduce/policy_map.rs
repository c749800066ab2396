//! Mapping reduced-MDP policies back to the original MDP, and the
//! optimality-preservation check built on it.

use std::collections::BTreeSet;

use super::descriptor::{induced_transitions, validate_reduction, ReductionDescriptor};
use crate::error::{Error, Result};
use crate::graph::forward_reachable;
use crate::mdp::{DeterministicPolicies, FiniteMemoryPolicy, Mdp, MdpShape, PositionalPolicy};
use crate::scalar::Real;
use crate::spec::{optimal_value, spec_value, PolicyRef, Specification};

/// Slack used when comparing values of enumerated policies.
const VALUE_SLACK: f64 = 1e-7;

/// Maps a policy `π̄` of the reduced MDP to a finite-memory policy on the
/// original one. The memory is the reduced state `s̄` (paired with `π̄`'s own
/// memory), tracked from observed `(a, s')`; at `s̄` the policy plays `a` with
/// weight `Σ_ā π̄(ā) (1 - q1(s̄, ā)) α(s̄, ā)(a)`.
///
/// Fails when a reachable observation is compatible with more than one
/// successor memory, or when some `q1` target is not a trap.
pub fn map_policy<'a, R: Real>(
    rd: &ReductionDescriptor<R>,
    shape: &MdpShape,
    policy: impl Into<PolicyRef<'a, R>>,
) -> Result<FiniteMemoryPolicy<R>> {
    let policy = policy.into();
    let violations = validate_reduction(rd, shape);
    if !violations.is_empty() {
        return Err(Error::InvalidReduction(violations));
    }
    if !rd.q1_targets_are_traps() {
        return Err(Error::PolicyMap("some q1 target is not a trap".into()));
    }
    let (nb, mb, m, n) = (rd.num_states, rd.num_actions, rd.base_actions, shape.num_states);
    let (pol_states, pol_actions) = policy.dims();
    if pol_states != nb || pol_actions != mb {
        return Err(Error::InvalidPolicy(format!(
            "policy is defined over {pol_states} states and {pol_actions} actions, reduced MDP has {nb} and {mb}"
        )));
    }
    let pm = policy.memory_size();
    let size = nb * pm;
    let split = |mem: usize| (mem / pm, mem % pm);

    let act_row = |mem: usize| -> Vec<R> {
        let (sb, mm) = split(mem);
        let choice = policy.act(mm, sb);
        let mut w = vec![R::zero(); m];
        let mut fallback = vec![R::zero(); m];
        for (ab, &pa) in choice.iter().enumerate() {
            if pa == R::zero() {
                continue;
            }
            let stay = R::one() - rd.q1_mass(sb, ab);
            for (a, &x) in rd.alpha_row(sb, ab).iter().enumerate() {
                w[a] = w[a] + pa * stay.max(R::zero()) * x;
                fallback[a] = fallback[a] + pa * x;
            }
        }
        let total: R = w.iter().copied().sum();
        let (w, total) = if total > R::zero() {
            (w, total)
        } else {
            let t = fallback.iter().copied().sum();
            (fallback, t)
        };
        w.into_iter().map(|x| x / total).collect()
    };

    // Successor memories compatible with observing `(a, s')` at `mem`.
    let successors = |mem: usize, a: usize, t: usize| -> BTreeSet<usize> {
        let (sb, mm) = split(mem);
        let mut out = BTreeSet::new();
        for (ab, &pa) in policy.act(mm, sb).iter().enumerate() {
            if pa == R::zero() || rd.alpha_row(sb, ab)[a] == R::zero() {
                continue;
            }
            for &(tb, x) in rd.q2_row(sb, ab, a) {
                if x > R::zero() && rd.beta[tb] == t {
                    out.insert(tb * pm + policy.next_memory(mm, ab, tb));
                }
            }
        }
        out
    };

    let acts: Vec<Vec<R>> = (0..size).map(act_row).collect();
    let mut update: Vec<usize> = (0..size).flat_map(|mem| std::iter::repeat_n(mem, m * n)).collect();
    let init = rd.initial * pm + policy.initial_memory();
    let mut seen = vec![false; size];
    seen[init] = true;
    let mut stack = vec![init];
    while let Some(mem) = stack.pop() {
        for a in (0..m).filter(|&a| acts[mem][a] > R::zero()) {
            for t in 0..n {
                let next = successors(mem, a, t);
                if next.len() > 1 {
                    let (sb, _) = split(mem);
                    return Err(Error::PolicyMap(format!(
                        "observing action {a} and state {t} from reduced state {sb} leaves {} candidate reduced states",
                        next.len()
                    )));
                }
                if let Some(&nm) = next.first() {
                    update[(mem * m + a) * n + t] = nm;
                    if !seen[nm] {
                        seen[nm] = true;
                        stack.push(nm);
                    }
                }
            }
        }
    }
    let act = (0..size).flat_map(|mem| std::iter::repeat_n(acts[mem].clone(), n)).collect();
    FiniteMemoryPolicy::new(size, init, n, m, update, act)
}

/// Outcome of [`check_optimality_preservation`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreservationReport<R = f64> {
    /// `Some(true)` if every optimal deterministic positional policy of the
    /// reduced MDP maps to an optimal policy; `None` if enumeration was over
    /// budget and only the solver's witness was checked.
    pub preserved: Option<bool>,
    pub exhaustive: bool,
    /// `J*(M, φ)`.
    pub optimal: R,
    /// `J*(M̄, φ')`.
    pub reduced_optimal: R,
    pub policies_checked: u64,
    pub optimal_reduced_policies: u64,
    /// Actions of a reduced policy that maps to a suboptimal policy, or of
    /// the first optimal one when none does. Empty for a non-positional
    /// witness.
    pub witness: Vec<usize>,
    /// `J^M_φ` of the mapped witness.
    pub witness_value: R,
    pub witness_optimal: bool,
}

/// Checks that optimal reduced policies map to optimal original policies.
/// Enumerates the deterministic positional policies of the reduced MDP over
/// its reachable states when there are at most `budget` of them.
pub fn check_optimality_preservation<R: Real>(
    mdp: &Mdp<R>,
    spec: &Specification<R>,
    rd: &ReductionDescriptor<R>,
    budget: u64,
) -> Result<PreservationReport<R>> {
    let spec_out = rd
        .spec_out
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("descriptor carries no output specification".into()))?;
    let shape = mdp.shape();
    let reduced = induced_transitions(rd, mdp)?;
    let (optimal, _) = optimal_value(mdp, spec)?;
    let slack = R::lit(VALUE_SLACK);
    let reachable = forward_reachable(&reduced.adjacency(), &[reduced.initial()]);
    let mb = reduced.num_actions();
    let count = DeterministicPolicies::count(mb, reachable.iter().filter(|&&r| r).count());

    if count > budget {
        let (reduced_optimal, witness) = optimal_value(&reduced, spec_out)?;
        let mapped = map_policy(rd, &shape, &witness)?;
        let witness_value = spec_value(mdp, spec, &mapped)?;
        return Ok(PreservationReport {
            preserved: None,
            exhaustive: false,
            optimal,
            reduced_optimal,
            policies_checked: 0,
            optimal_reduced_policies: 1,
            witness: Vec::new(),
            witness_value,
            witness_optimal: witness_value >= optimal - slack,
        });
    }

    let enumerate = || DeterministicPolicies::over(reduced.num_states(), mb, &reachable);
    let mut values = Vec::with_capacity(count as usize);
    for actions in enumerate() {
        let p = PositionalPolicy::deterministic(mb, &actions);
        values.push(spec_value(&reduced, spec_out, &p)?);
    }
    let reduced_optimal = values.iter().copied().fold(R::neg_infinity(), R::max);
    let mut optimal_count = 0;
    let mut first: Option<(Vec<usize>, R)> = None;
    let mut failure: Option<(Vec<usize>, R)> = None;
    for (actions, &v) in enumerate().zip(&values) {
        if v < reduced_optimal - slack {
            continue;
        }
        optimal_count += 1;
        let p = PositionalPolicy::deterministic(mb, &actions);
        let mapped = map_policy(rd, &shape, &p)?;
        let value = spec_value(mdp, spec, &mapped)?;
        if value < optimal - slack {
            failure = Some((actions, value));
            break;
        }
        if first.is_none() {
            first = Some((actions, value));
        }
    }
    let ok = failure.is_none();
    let (witness, witness_value) = failure.or(first).expect("some policy attains the maximum");
    Ok(PreservationReport {
        preserved: Some(ok),
        exhaustive: true,
        optimal,
        reduced_optimal,
        policies_checked: count,
        optimal_reduced_policies: optimal_count,
        witness,
        witness_value,
        witness_optimal: ok,
    })
}

use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::{LabelSet, Mdp, MdpShape};
use crate::scalar::Real;
use crate::spec::Specification;

/// The explicit tables of a sampling-based reduction from `(S, A, s0, L, φ)`
/// to `(S̄, Ā, s̄0, L̄, φ')`.
///
/// One step of the reduced MDP from `(s̄, ā)` either jumps directly to `s̄'`
/// with probability `q1(s̄, ā, s̄')` without touching the original MDP, or
/// samples `a ~ α(s̄, ā)`, steps the original MDP to `s'` and picks
/// `s̄' ∈ β⁻¹(s')` with weight `q2(s̄, ā, a, s̄')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionDescriptor<R = f64> {
    pub num_states: usize,
    pub num_actions: usize,
    pub initial: usize,
    pub propositions: Vec<String>,
    pub labels: Vec<LabelSet>,
    pub action_names: Vec<String>,
    /// Number of actions of the original MDP.
    pub base_actions: usize,
    pub beta: Vec<usize>,
    /// `alpha[s̄ * |Ā| + ā]`: distribution over original actions.
    pub alpha: Vec<Vec<R>>,
    /// `q1[s̄ * |Ā| + ā]`: sparse `(s̄', mass)`.
    pub q1: Vec<Vec<(usize, R)>>,
    /// `q2[(s̄ * |Ā| + ā) * |A| + a]`: sparse `(s̄', weight)`.
    pub q2: Vec<Vec<(usize, R)>>,
    pub spec_out: Option<Specification<R>>,
}

/// One failed invariant of a descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum ReductionViolation {
    TableShape { table: &'static str, expected: usize, found: usize },
    IndexOutOfRange { table: &'static str, index: usize },
    InitialImage { found: usize, expected: usize },
    Range { table: &'static str, state: usize, action: usize, value: f64 },
    AlphaRowSum { state: usize, action: usize, sum: f64 },
    Q1AcrossFibers { state: usize, action: usize, to: usize },
    Normalization { state: usize, action: usize, base_action: usize, base_next: usize, fiber_mass: f64, expected: f64 },
}

impl fmt::Display for ReductionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ReductionViolation::*;
        match self {
            TableShape { table, expected, found } => write!(f, "{table} has {found} entries, expected {expected}"),
            IndexOutOfRange { table, index } => write!(f, "{table} references index {index} out of range"),
            InitialImage { found, expected } => {
                write!(f, "initial state maps to {found}, expected the original initial state {expected}")
            }
            Range { table, state, action, value } => {
                write!(f, "{table} entry at ({state}, {action}) is {value}, outside [0, 1]")
            }
            AlphaRowSum { state, action, sum } => write!(f, "alpha({state}, {action}) sums to {sum}"),
            Q1AcrossFibers { state, action, to } => {
                write!(f, "q1({state}, {action}, {to}) is positive but the states have different images")
            }
            Normalization { state, action, base_action, base_next, fiber_mass, expected } => write!(
                f,
                "q2({state}, {action}, {base_action}, ·) puts {fiber_mass} on the fiber of {base_next}, expected {expected}"
            ),
        }
    }
}

impl<R: Real> ReductionDescriptor<R> {
    pub fn q1_row(&self, s: usize, a: usize) -> &[(usize, R)] {
        &self.q1[s * self.num_actions + a]
    }

    pub fn q1_mass(&self, s: usize, a: usize) -> R {
        self.q1_row(s, a).iter().map(|e| e.1).sum()
    }

    pub fn alpha_row(&self, s: usize, a: usize) -> &[R] {
        &self.alpha[s * self.num_actions + a]
    }

    pub fn q2_row(&self, s: usize, a: usize, base_a: usize) -> &[(usize, R)] {
        &self.q2[(s * self.num_actions + a) * self.base_actions + base_a]
    }

    /// The reduced MDP's `(S̄, Ā, s̄0, L̄)`.
    pub fn shape(&self) -> MdpShape {
        MdpShape {
            num_states: self.num_states,
            num_actions: self.num_actions,
            initial: self.initial,
            propositions: self.propositions.clone(),
            labels: self.labels.clone(),
        }
    }

    /// States `s̄'` with positive `q1` mass from some `(s̄, ā)` must be traps:
    /// every action keeps them in place through `q1` alone.
    pub(crate) fn q1_targets_are_traps(&self) -> bool {
        let tol = R::stochastic_tol();
        (0..self.num_states * self.num_actions).all(|i| {
            self.q1[i].iter().filter(|e| e.1 > R::zero()).all(|&(t, _)| {
                (0..self.num_actions).all(|b| {
                    let row = self.q1_row(t, b);
                    row.iter().filter(|e| e.0 == t).map(|e| e.1).sum::<R>() >= R::one() - tol
                })
            })
        })
    }
}

/// Checks every descriptor invariant against the original `(S, A, s0, L)`.
pub fn validate_reduction<R: Real>(rd: &ReductionDescriptor<R>, shape: &MdpShape) -> Vec<ReductionViolation> {
    use ReductionViolation::*;
    let mut out = Vec::new();
    let (nb, mb, m) = (rd.num_states, rd.num_actions, rd.base_actions);
    let mut size = |table: &'static str, expected: usize, found: usize| {
        if expected != found {
            out.push(TableShape { table, expected, found });
            false
        } else {
            true
        }
    };
    let shapes_ok = [
        size("actions", shape.num_actions, m),
        size("beta", nb, rd.beta.len()),
        size("labels", nb, rd.labels.len()),
        size("alpha", nb * mb, rd.alpha.len()),
        size("q1", nb * mb, rd.q1.len()),
        size("q2", nb * mb * m, rd.q2.len()),
    ];
    if shapes_ok.iter().any(|ok| !ok) {
        return out;
    }
    if rd.initial >= nb {
        out.push(IndexOutOfRange { table: "initial", index: rd.initial });
        return out;
    }
    if let Some(&bad) = rd.beta.iter().find(|&&s| s >= shape.num_states) {
        out.push(IndexOutOfRange { table: "beta", index: bad });
        return out;
    }
    for row in rd.q1.iter().chain(rd.q2.iter()) {
        if let Some(&(bad, _)) = row.iter().find(|e| e.0 >= nb) {
            out.push(IndexOutOfRange { table: "q1/q2", index: bad });
            return out;
        }
    }
    if rd.alpha.iter().any(|r| r.len() != m) {
        out.push(TableShape { table: "alpha row", expected: m, found: rd.alpha.iter().map(Vec::len).find(|&l| l != m).unwrap_or(0) });
        return out;
    }
    if rd.beta[rd.initial] != shape.initial {
        out.push(InitialImage { found: rd.beta[rd.initial], expected: shape.initial });
    }
    let tol = R::stochastic_tol();
    let in_range = |x: R| x >= R::zero() && x <= R::one();
    for s in 0..nb {
        for a in 0..mb {
            let alpha = rd.alpha_row(s, a);
            if let Some(&x) = alpha.iter().find(|&&x| !in_range(x)) {
                out.push(Range { table: "alpha", state: s, action: a, value: x.as_f64() });
            }
            let sum: R = alpha.iter().copied().sum();
            if (sum - R::one()).abs() > tol {
                out.push(AlphaRowSum { state: s, action: a, sum: sum.as_f64() });
            }
            for &(t, x) in rd.q1_row(s, a) {
                if !in_range(x) {
                    out.push(Range { table: "q1", state: s, action: a, value: x.as_f64() });
                }
                if x != R::zero() && rd.beta[t] != rd.beta[s] {
                    out.push(Q1AcrossFibers { state: s, action: a, to: t });
                }
            }
            let mass = rd.q1_mass(s, a);
            if mass > R::one() + tol {
                out.push(Range { table: "q1 mass", state: s, action: a, value: mass.as_f64() });
            }
            let expected = R::one() - mass;
            for b in 0..m {
                let mut fiber = vec![R::zero(); shape.num_states];
                for &(t, x) in rd.q2_row(s, a, b) {
                    if !in_range(x) {
                        out.push(Range { table: "q2", state: s, action: a, value: x.as_f64() });
                    }
                    fiber[rd.beta[t]] = fiber[rd.beta[t]] + x;
                }
                for (sp, &f) in fiber.iter().enumerate() {
                    if (f - expected).abs() > tol {
                        out.push(Normalization {
                            state: s,
                            action: a,
                            base_action: b,
                            base_next: sp,
                            fiber_mass: f.as_f64(),
                            expected: expected.as_f64(),
                        });
                    }
                }
            }
        }
    }
    out
}

fn ensure_valid<R: Real>(rd: &ReductionDescriptor<R>, shape: &MdpShape) -> Result<()> {
    let v = validate_reduction(rd, shape);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidReduction(v))
    }
}

/// The reduced MDP: `P̄(s̄, ā, s̄') = q1(s̄, ā, s̄') + Σ_a α(s̄, ā)(a) q2(s̄, ā, a, s̄') P(β(s̄), a, β(s̄'))`.
pub fn induced_transitions<R: Real>(rd: &ReductionDescriptor<R>, mdp: &Mdp<R>) -> Result<Mdp<R>> {
    ensure_valid(rd, &mdp.shape())?;
    let (nb, mb) = (rd.num_states, rd.num_actions);
    let mut rows = Vec::with_capacity(nb * mb);
    for s in 0..nb {
        for a in 0..mb {
            let mut dense: Vec<(usize, R)> = rd.q1_row(s, a).to_vec();
            for (b, &w) in rd.alpha_row(s, a).iter().enumerate() {
                if w == R::zero() {
                    continue;
                }
                for &(t, x) in rd.q2_row(s, a, b) {
                    let p = mdp.prob(rd.beta[s], b, rd.beta[t]);
                    if p != R::zero() && x != R::zero() {
                        dense.push((t, w * x * p));
                    }
                }
            }
            rows.push(dense);
        }
    }
    Ok(Mdp::new(nb, mb, rd.initial, rd.propositions.clone(), rd.labels.clone(), rows)?
        .with_action_names(rd.action_names.clone()))
}

/// Chains `first: M → M1` with `second: M1 → M2` into one descriptor
/// `M → M2`.
///
/// The composite keeps the sampling form only when the direct-jump mass of
/// `first` does not depend on which of its actions `second` samples; other
/// pairs are rejected.
pub fn compose<R: Real>(
    first: &ReductionDescriptor<R>,
    second: &ReductionDescriptor<R>,
    base: &MdpShape,
) -> Result<ReductionDescriptor<R>> {
    ensure_valid(first, base)?;
    ensure_valid(second, &first.shape())?;
    let tol = R::stochastic_tol();
    let (n2, m2, m1, m) = (second.num_states, second.num_actions, first.num_actions, first.base_actions);
    let mut alpha = Vec::with_capacity(n2 * m2);
    let mut q1 = Vec::with_capacity(n2 * m2);
    let mut q2 = Vec::with_capacity(n2 * m2 * m);
    for s2 in 0..n2 {
        let s1 = second.beta[s2];
        for a2 in 0..m2 {
            let a2w = second.alpha_row(s2, a2);
            let used: Vec<usize> = (0..m1).filter(|&a1| a2w[a1] > R::zero()).collect();
            if let Some(&a0) = used.first() {
                let p0 = first.q1_mass(s1, a0);
                if used.iter().any(|&a1| (first.q1_mass(s1, a1) - p0).abs() > tol) {
                    return Err(Error::InvalidParameter(format!(
                        "cannot compose: jump mass of the inner reduction varies across sampled actions at ({s2}, {a2})"
                    )));
                }
            }
            // Direct jumps: those of `second`, plus inner jumps seen through q2.
            let mut jumps: Vec<(usize, R)> = second.q1_row(s2, a2).to_vec();
            for &a1 in &used {
                for &(t2, x) in second.q2_row(s2, a2, a1) {
                    let inner: R = first
                        .q1_row(s1, a1)
                        .iter()
                        .filter(|e| e.0 == second.beta[t2])
                        .map(|e| e.1)
                        .sum();
                    if inner > R::zero() && x > R::zero() {
                        jumps.push((t2, a2w[a1] * x * inner));
                    }
                }
            }
            q1.push(merge(jumps));
            let mut alpha_row = vec![R::zero(); m];
            for &a1 in &used {
                for (a, &w) in first.alpha_row(s1, a1).iter().enumerate() {
                    alpha_row[a] = alpha_row[a] + a2w[a1] * w;
                }
            }
            for a in 0..m {
                let weight = |a1: usize| {
                    if alpha_row[a] > R::zero() {
                        a2w[a1] * first.alpha_row(s1, a1)[a] / alpha_row[a]
                    } else {
                        a2w[a1]
                    }
                };
                let mut entries = Vec::new();
                for &a1 in &used {
                    let w = weight(a1);
                    if w == R::zero() {
                        continue;
                    }
                    let inner = first.q2_row(s1, a1, a);
                    for &(t2, x) in second.q2_row(s2, a2, a1) {
                        let y: R = inner.iter().filter(|e| e.0 == second.beta[t2]).map(|e| e.1).sum();
                        if x > R::zero() && y > R::zero() {
                            entries.push((t2, w * x * y));
                        }
                    }
                }
                q2.push(merge(entries));
            }
            alpha.push(alpha_row);
        }
    }
    let composed = ReductionDescriptor {
        num_states: n2,
        num_actions: m2,
        initial: second.initial,
        propositions: second.propositions.clone(),
        labels: second.labels.clone(),
        action_names: second.action_names.clone(),
        base_actions: m,
        beta: second.beta.iter().map(|&s1| first.beta[s1]).collect(),
        alpha,
        q1,
        q2,
        spec_out: second.spec_out.clone(),
    };
    ensure_valid(&composed, base)?;
    Ok(composed)
}

pub(crate) fn merge<R: Real>(mut entries: Vec<(usize, R)>) -> Vec<(usize, R)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, R)> = Vec::with_capacity(entries.len());
    for (t, x) in entries {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = last.1 + x,
            _ => out.push((t, x)),
        }
    }
    out
}

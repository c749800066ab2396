//! Built-in reductions. Every builder receives only `(S, A, s0, L)` and the
//! specification data, never transition probabilities.

use super::descriptor::{validate_reduction, ReductionDescriptor};
use crate::error::{Error, Result};
use crate::mdp::{Discount, MdpShape};
use crate::scalar::Real;
use crate::spec::{
    parse_ltl, project_labels, BuchiAutomaton, Machine, RewardMachine, Specification,
};

/// Name of the proposition marking accepting product states.
pub const ACCEPTING_PROPOSITION: &str = "acc";

/// How machine rewards are aggregated.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation<R = f64> {
    Discounted(Discount<R>),
    LimitAverage,
}

fn default_action_names(m: usize) -> Vec<String> {
    (0..m).map(|a| format!("a{}", a + 1)).collect()
}

fn point_mass<R: Real>(m: usize, a: usize) -> Vec<R> {
    let mut row = vec![R::zero(); m];
    row[a] = R::one();
    row
}

fn finish<R: Real>(rd: ReductionDescriptor<R>, shape: &MdpShape) -> Result<ReductionDescriptor<R>> {
    let v = validate_reduction(&rd, shape);
    if !v.is_empty() {
        return Err(Error::InvalidReduction(v));
    }
    Ok(rd)
}

/// A single-state machine over `num_states` states assigning `reward(s, a, s')`.
fn transition_reward<R: Real>(
    num_states: usize,
    num_actions: usize,
    reward: impl Fn(usize, usize, usize) -> R,
) -> Result<RewardMachine<R>> {
    RewardMachine::from_fn(1, 0, num_states, num_actions, |_, _| 0, |_, s, a, t| reward(s, a, t))
}

/// `S̄ = S`, `Ā = A`, identity tables.
pub fn identity_reduction<R: Real>(shape: &MdpShape, spec: Option<Specification<R>>) -> Result<ReductionDescriptor<R>> {
    let (n, m) = (shape.num_states, shape.num_actions);
    let rd = ReductionDescriptor {
        num_states: n,
        num_actions: m,
        initial: shape.initial,
        propositions: shape.propositions.clone(),
        labels: shape.labels.clone(),
        action_names: default_action_names(m),
        base_actions: m,
        beta: (0..n).collect(),
        alpha: (0..n * m).map(|i| point_mass(m, i % m)).collect(),
        q1: vec![Vec::new(); n * m],
        q2: (0..n * m * m).map(|_| (0..n).map(|t| (t, R::one())).collect()).collect(),
        spec_out: spec,
    };
    finish(rd, shape)
}

/// Product with a reward machine: `S̄ = S × U` indexed `s * |U| + u`, the
/// machine moving on every observed successor. The output specification is
/// the transition reward `δr(u)(s, a, s')` with the same aggregation.
pub fn product_rm_reduction<R: Real>(
    shape: &MdpShape,
    machine: &Machine<R>,
    aggregation: &Aggregation<R>,
) -> Result<ReductionDescriptor<R>> {
    let rm = machine.lower(shape)?;
    let (n, m, k) = (shape.num_states, shape.num_actions, rm.num_states());
    let nb = n * k;
    let mut q2 = Vec::with_capacity(nb * m * m);
    for _s in 0..n {
        for u in 0..k {
            let row: Vec<(usize, R)> = (0..n).map(|t| (t * k + rm.next(u, t), R::one())).collect();
            for _ in 0..m * m {
                q2.push(row.clone());
            }
        }
    }
    let reward = transition_reward(nb, m, |i, a, j| rm.reward(i % k, i / k, a, j / k))?;
    let spec_out = match aggregation {
        Aggregation::Discounted(gamma) => {
            gamma.validate(n)?;
            let gamma = match gamma {
                Discount::Constant(g) => Discount::Constant(*g),
                Discount::PerState(v) => Discount::PerState((0..nb).map(|i| v[i / k]).collect()),
            };
            Specification::DiscountedRm { machine: reward.into(), gamma }
        }
        Aggregation::LimitAverage => Specification::LimitAvgRm { machine: reward.into() },
    };
    let rd = ReductionDescriptor {
        num_states: nb,
        num_actions: m,
        initial: shape.initial * k + rm.initial(),
        propositions: shape.propositions.clone(),
        labels: (0..nb).map(|i| shape.labels[i / k]).collect(),
        action_names: default_action_names(m),
        base_actions: m,
        beta: (0..nb).map(|i| i / k).collect(),
        alpha: (0..nb * m).map(|i| point_mass(m, i % m)).collect(),
        q1: vec![Vec::new(); nb * m],
        q2,
        spec_out: Some(spec_out),
    };
    finish(rd, shape)
}

/// Adds a trap copy `⊥_s` (with `β(⊥_s) = s`) for every state in `with_sink`,
/// reached through `q1` with mass `jump[s]`; the remaining mass follows the
/// original MDP. Sink copies are numbered after the original states in
/// increasing order of `s`.
fn sink_descriptor<R: Real>(
    shape: &MdpShape,
    jump: &[R],
    spec_out: impl FnOnce(&[Option<usize>], usize) -> Result<Specification<R>>,
) -> Result<ReductionDescriptor<R>> {
    let (n, m) = (shape.num_states, shape.num_actions);
    let mut sink_of = vec![None; n];
    let mut owner = Vec::new();
    for s in 0..n {
        if jump[s] > R::zero() {
            sink_of[s] = Some(n + owner.len());
            owner.push(s);
        }
    }
    let nb = n + owner.len();
    let mut q1 = Vec::with_capacity(nb * m);
    let mut q2 = Vec::with_capacity(nb * m * m);
    for sb in 0..nb {
        for _ in 0..m {
            if sb < n {
                q1.push(sink_of[sb].map(|k| vec![(k, jump[sb])]).unwrap_or_default());
                let stay = R::one() - jump[sb];
                for _ in 0..m {
                    q2.push((0..n).map(|t| (t, stay)).collect());
                }
            } else {
                q1.push(vec![(sb, R::one())]);
                for _ in 0..m {
                    q2.push(Vec::new());
                }
            }
        }
    }
    let beta: Vec<usize> = (0..n).chain(owner.iter().copied()).collect();
    let spec = spec_out(&sink_of, nb)?;
    let rd = ReductionDescriptor {
        num_states: nb,
        num_actions: m,
        initial: shape.initial,
        propositions: shape.propositions.clone(),
        labels: beta.iter().map(|&s| shape.labels[s]).collect(),
        action_names: default_action_names(m),
        base_actions: m,
        alpha: (0..nb * m).map(|i| point_mass(m, i % m)).collect(),
        beta,
        q1,
        q2,
        spec_out: Some(spec),
    };
    finish(rd, shape)
}

/// Replaces state-dependent discounting by the single factor `γmax`: from
/// `s` the run is diverted to a trap with probability `1 - γ(s)/γmax` and
/// rewards are scaled by `γmax/γ(s)`. `reward` must be a one-state machine.
pub fn multidiscount_reduction<R: Real>(
    shape: &MdpShape,
    reward: &RewardMachine<R>,
    gamma: &Discount<R>,
) -> Result<ReductionDescriptor<R>> {
    gamma.validate(shape.num_states)?;
    discount_to(shape, reward, gamma, gamma.max())
}

/// [`multidiscount_reduction`] towards a target factor `gmax ≥ max γ`.
fn discount_to<R: Real>(
    shape: &MdpShape,
    reward: &RewardMachine<R>,
    gamma: &Discount<R>,
    gmax: R,
) -> Result<ReductionDescriptor<R>> {
    let n = shape.num_states;
    reward.check_shape(n, shape.num_actions)?;
    if reward.num_states() != 1 {
        return Err(Error::InvalidParameter("expected a transition reward (a one-state machine)".into()));
    }
    let jump: Vec<R> = (0..n).map(|s| (R::one() - gamma.at(s) / gmax).max(R::zero())).collect();
    let m = shape.num_actions;
    sink_descriptor(shape, &jump, |_, nb| {
        let scaled = transition_reward(nb, m, |s, a, t| {
            if s < n && t < n {
                gmax / gamma.at(s) * reward.reward(0, s, a, t)
            } else {
                R::zero()
            }
        })?;
        Ok(Specification::DiscountedRm { machine: scaled.into(), gamma: Discount::Constant(gmax) })
    })
}

/// From accepting states, mass `1 - λ` is diverted to a trap paying 1 per
/// step forever; the output specification is that limit-average reward.
pub fn lambda_sink_reduction<R: Real>(shape: &MdpShape, accepting: &[bool], lambda: R) -> Result<ReductionDescriptor<R>> {
    if !(lambda > R::zero() && lambda < R::one()) {
        return Err(Error::InvalidParameter("lambda must lie in (0, 1)".into()));
    }
    check_accepting(shape, accepting)?;
    let jump: Vec<R> = accepting.iter().map(|&a| if a { R::one() - lambda } else { R::zero() }).collect();
    let (n, m) = (shape.num_states, shape.num_actions);
    sink_descriptor(shape, &jump, |_, nb| {
        let reward = transition_reward(nb, m, |s, _, t| if s >= n && s == t { R::one() } else { R::zero() })?;
        Ok(Specification::LimitAvgRm { machine: reward.into() })
    })
}

fn check_accepting(shape: &MdpShape, accepting: &[bool]) -> Result<()> {
    if accepting.len() != shape.num_states {
        return Err(Error::InvalidParameter("accepting set has the wrong length".into()));
    }
    Ok(())
}

/// The state-dependent discounted specification of the two-discount
/// construction: accepting states discount by `γ1` and pay `1 - γ1`, the
/// others discount by `γ2` and pay nothing.
pub fn two_discount_spec<R: Real>(
    shape: &MdpShape,
    accepting: &[bool],
    gamma1: R,
    gamma2: R,
) -> Result<(RewardMachine<R>, Discount<R>)> {
    if !(R::zero() < gamma1 && gamma1 < gamma2 && gamma2 < R::one()) {
        return Err(Error::InvalidParameter("need 0 < gamma1 < gamma2 < 1".into()));
    }
    check_accepting(shape, accepting)?;
    let reward = transition_reward(shape.num_states, shape.num_actions, |s, _, _| {
        if accepting[s] {
            R::one() - gamma1
        } else {
            R::zero()
        }
    })?;
    let gamma = Discount::PerState(accepting.iter().map(|&a| if a { gamma1 } else { gamma2 }).collect());
    Ok((reward, gamma))
}

/// [`two_discount_spec`] followed by [`multidiscount_reduction`], giving a
/// single discount `γ2` (also when every state is accepting).
pub fn two_discount_reduction<R: Real>(
    shape: &MdpShape,
    accepting: &[bool],
    gamma1: R,
    gamma2: R,
) -> Result<ReductionDescriptor<R>> {
    let (reward, gamma) = two_discount_spec(shape, accepting, gamma1, gamma2)?;
    discount_to(shape, &reward, &gamma, gamma2)
}

/// Product of an MDP shape with a Büchi automaton.
#[derive(Debug, Clone)]
pub struct AutomatonProduct<R = f64> {
    pub descriptor: ReductionDescriptor<R>,
    /// Product states whose automaton component is accepting.
    pub accepting: Vec<bool>,
    /// Automaton states per MDP state; product state `s * k + q`.
    pub automaton_states: usize,
    /// Automaton choices per MDP action; product action `a * c + j`.
    pub choices: usize,
}

/// Product `S̄ = S × Q`, with the automaton's nondeterministic choices
/// turned into extra actions `Ā = A × C`: action `(a, j)` plays `a` and
/// moves the automaton to its `j`-th successor (the last one if there are
/// fewer). The automaton reads the label of every state including the
/// initial one; the initial choice is the first successor. The output
/// labels add the proposition [`ACCEPTING_PROPOSITION`], and the output
/// specification is `G F acc`.
pub fn automaton_product_reduction<R: Real>(shape: &MdpShape, aut: &BuchiAutomaton) -> Result<AutomatonProduct<R>> {
    if shape.propositions.iter().any(|p| p == ACCEPTING_PROPOSITION) {
        return Err(Error::InvalidParameter(format!(
            "proposition `{ACCEPTING_PROPOSITION}` is reserved for accepting product states"
        )));
    }
    let aut = complete(aut)?;
    let labels = project_labels(aut.propositions(), shape)?;
    let (n, m, k) = (shape.num_states, shape.num_actions, aut.num_states());
    let c = aut.max_branching();
    let nb = n * k;
    let mb = m * c;
    let succ = |q: usize, t: usize, j: usize| {
        let options = aut.successors(q, labels[t]);
        options[j.min(options.len() - 1)]
    };
    let mut q2 = Vec::with_capacity(nb * mb * m);
    for _s in 0..n {
        for q in 0..k {
            for ab in 0..mb {
                let row: Vec<(usize, R)> = (0..n).map(|t| (t * k + succ(q, t, ab % c), R::one())).collect();
                for _ in 0..m {
                    q2.push(row.clone());
                }
            }
        }
    }
    let acc_bit = 1u64 << shape.propositions.len();
    let mut propositions = shape.propositions.clone();
    propositions.push(ACCEPTING_PROPOSITION.to_string());
    let accepting: Vec<bool> = (0..nb).map(|i| aut.is_accepting(i % k)).collect();
    let spec_out = Specification::ltl(parse_ltl(&format!("G F {ACCEPTING_PROPOSITION}"), &propositions)?);
    let action_names = (0..mb)
        .map(|ab| if c == 1 { format!("a{}", ab + 1) } else { format!("a{}/{}", ab / c + 1, ab % c + 1) })
        .collect();
    let rd = ReductionDescriptor {
        num_states: nb,
        num_actions: mb,
        initial: shape.initial * k + succ(aut.initial(), shape.initial, 0),
        labels: (0..nb).map(|i| shape.labels[i / k] | if accepting[i] { acc_bit } else { 0 }).collect(),
        propositions,
        action_names,
        base_actions: m,
        beta: (0..nb).map(|i| i / k).collect(),
        alpha: (0..nb * mb).map(|i| point_mass(m, (i % mb) / c)).collect(),
        q1: vec![Vec::new(); nb * mb],
        q2,
        spec_out: Some(spec_out),
    };
    Ok(AutomatonProduct { descriptor: finish(rd, shape)?, accepting, automaton_states: k, choices: c })
}

/// Adds a rejecting trap for `(state, label)` pairs without successors.
fn complete(aut: &BuchiAutomaton) -> Result<BuchiAutomaton> {
    let width = aut.num_labels();
    let k = aut.num_states();
    let needs_trap = (0..k).any(|q| (0..width).any(|l| aut.successors(q, l as u64).is_empty()));
    if !needs_trap {
        return Ok(aut.clone());
    }
    let mut edges = Vec::with_capacity((k + 1) * width);
    for q in 0..=k {
        for l in 0..width {
            let t = if q < k { aut.successors(q, l as u64).to_vec() } else { Vec::new() };
            edges.push(if t.is_empty() { vec![k] } else { t });
        }
    }
    let mut accepting = aut.accepting().to_vec();
    accepting.push(false);
    BuchiAutomaton::new(aut.propositions().to_vec(), k + 1, aut.initial(), accepting, edges)
}

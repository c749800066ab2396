//! Random instance generators for property tests, experiments and the CLI.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::mdp::{Discount, LabelSet, Mdp, MdpShape};
use crate::reduce::ReductionDescriptor;
use crate::scalar::Real;
use crate::spec::{AbstractRewardMachine, RewardMachine};

/// Parameters of [`random_mdp`].
#[derive(Debug, Clone)]
pub struct MdpParams {
    pub num_states: usize,
    pub num_actions: usize,
    /// Proposition names; each state carries each one with probability 1/2.
    pub propositions: Vec<String>,
    /// Upper bound on successors per `(s, a)`.
    pub max_successors: usize,
    /// Probability that a row is deterministic.
    pub deterministic_rows: f64,
}

impl MdpParams {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            propositions: vec!["b".into()],
            max_successors: 3,
            deterministic_rows: 0.25,
        }
    }
}

/// A probability vector of length `k` with full support.
pub fn random_distribution<R: Real>(rng: &mut impl Rng, k: usize) -> Vec<R> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| R::lit(x / total)).collect()
}

pub fn random_mdp<R: Real>(rng: &mut impl Rng, params: &MdpParams) -> Result<Mdp<R>> {
    let (n, m) = (params.num_states, params.num_actions);
    let labels: Vec<LabelSet> = (0..n)
        .map(|_| (0..params.propositions.len()).filter(|_| rng.gen_bool(0.5)).fold(0, |l, i| l | 1 << i))
        .collect();
    let mut rows = Vec::with_capacity(n * m);
    let states: Vec<usize> = (0..n).collect();
    for _ in 0..n * m {
        let k = if rng.gen_bool(params.deterministic_rows) {
            1
        } else {
            rng.gen_range(1..=params.max_successors.min(n).max(1))
        };
        let targets: Vec<usize> = states.choose_multiple(rng, k).copied().collect();
        let probs = random_distribution::<R>(rng, k);
        rows.push(targets.into_iter().zip(probs).collect());
    }
    Mdp::new(n, m, rng.gen_range(0..n), params.propositions.clone(), labels, rows)
}

/// A reward machine over `shape`'s states with uniform rewards in `[0, 1]`.
/// With probability 1/4 per `(u, s, a)` the reward ignores the successor.
pub fn random_rm<R: Real>(rng: &mut impl Rng, num_machine_states: usize, shape: &MdpShape) -> Result<RewardMachine<R>> {
    let (k, n, m) = (num_machine_states, shape.num_states, shape.num_actions);
    let update: Vec<usize> = (0..k * n).map(|_| rng.gen_range(0..k)).collect();
    let mut rewards = Vec::with_capacity(k * n * m * n);
    for _ in 0..k * n * m {
        if rng.gen_bool(0.25) {
            let r = R::lit(rng.gen::<f64>());
            rewards.extend(std::iter::repeat_n(r, n));
        } else {
            rewards.extend((0..n).map(|_| R::lit(rng.gen::<f64>())));
        }
    }
    RewardMachine::new(k, 0, n, m, update, rewards, true)
}

/// An abstract reward machine with uniform rewards in `[0, 1]`.
pub fn random_arm<R: Real, S: AsRef<str>>(
    rng: &mut impl Rng,
    propositions: &[S],
    num_states: usize,
) -> Result<AbstractRewardMachine<R>> {
    let machine = AbstractRewardMachine::from_fn(propositions, num_states, 0, |_, _| {
        (rng.gen_range(0..num_states), R::lit(rng.gen::<f64>()))
    })?;
    machine.normalize_flag()
}

/// State-dependent discount factors in `[lo, hi]`; with probability 1/4 one
/// factor is repeated so that ties with the maximum occur.
pub fn random_discount<R: Real>(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Discount<R> {
    let mut g: Vec<R> = (0..n).map(|_| R::lit(rng.gen_range(lo..=hi))).collect();
    if n > 1 && rng.gen_bool(0.25) {
        let i = rng.gen_range(1..n);
        g[i] = g[0];
    }
    Discount::PerState(g)
}

/// A valid reduction descriptor for `shape` exercising every table: extra
/// copies of original states, `q1` jumps within fibers (including full
/// `q1` mass), mixed `α` rows and `q2` split across several copies.
pub fn random_descriptor<R: Real>(
    rng: &mut impl Rng,
    shape: &MdpShape,
    extra_states: usize,
    num_actions: usize,
) -> ReductionDescriptor<R> {
    let (n, m) = (shape.num_states, shape.num_actions);
    let nb = n + extra_states;
    let beta: Vec<usize> = (0..n).chain((0..extra_states).map(|_| rng.gen_range(0..n))).collect();
    let fibers: Vec<Vec<usize>> = (0..n).map(|s| (0..nb).filter(|&t| beta[t] == s).collect()).collect();
    let initial = *fibers[shape.initial].choose(rng).expect("fiber of s0 is nonempty");
    let split = |rng: &mut dyn rand::RngCore, mass: f64, among: &[usize]| -> Vec<(usize, R)> {
        let k = rng.gen_range(1..=among.len());
        let chosen: Vec<usize> = among.choose_multiple(rng, k).copied().collect();
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        chosen.into_iter().zip(w).map(|(t, x)| (t, R::lit(mass * x / total))).collect()
    };
    let mut alpha = Vec::with_capacity(nb * num_actions);
    let mut q1 = Vec::with_capacity(nb * num_actions);
    let mut q2 = Vec::with_capacity(nb * num_actions * m);
    for sb in 0..nb {
        for _ in 0..num_actions {
            let p = match rng.gen_range(0..10) {
                0 => 1.0,
                1..=3 => rng.gen_range(0.0..1.0),
                _ => 0.0,
            };
            q1.push(if p > 0.0 { split(rng, p, &fibers[beta[sb]]) } else { Vec::new() });
            alpha.push(if rng.gen_bool(0.5) {
                let mut row = vec![R::zero(); m];
                row[rng.gen_range(0..m)] = R::one();
                row
            } else {
                random_distribution(rng, m)
            });
            for _ in 0..m {
                let mut row = Vec::new();
                if p < 1.0 {
                    for fiber in &fibers {
                        row.extend(split(rng, 1.0 - p, fiber));
                    }
                }
                q2.push(row);
            }
        }
    }
    ReductionDescriptor {
        num_states: nb,
        num_actions,
        initial,
        propositions: shape.propositions.clone(),
        labels: beta.iter().map(|&s| shape.labels[s]).collect(),
        action_names: (0..num_actions).map(|a| format!("a{}", a + 1)).collect(),
        base_actions: m,
        beta,
        alpha,
        q1,
        q2,
        spec_out: None,
    }
}

//! Tabular learners over black-box simulators and exact monitors of their
//! output policies. Everything here works in `f64`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{FiniteMemoryPolicy, Mdp, MdpShape, Simulator};
use crate::rng::seeded;
use crate::spec::{optimal_value, spec_value, RewardMachine, Specification};

/// Learner settings. Exploration is ε-greedy with ε moving linearly from
/// `epsilon_start` to `epsilon_end` over the first `anneal_fraction` of the
/// budget; the learning rate for a pair visited `n` times before is
/// `rate_constant / (rate_constant + n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub seed: u64,
    pub step_budget: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub anneal_fraction: f64,
    pub rate_constant: f64,
    /// A snapshot is recorded every `eval_every` steps and after the last.
    pub eval_every: u64,
    pub initial_q: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            step_budget: 100_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            anneal_fraction: 0.5,
            rate_constant: 10.0,
            eval_every: 10_000,
            initial_q: 0.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) || !unit(self.anneal_fraction) {
            return Err(Error::InvalidParameter("exploration schedule must lie in [0, 1]".into()));
        }
        if !(self.rate_constant > 0.0) || self.eval_every == 0 || !self.initial_q.is_finite() {
            return Err(Error::InvalidParameter(
                "rate constant and snapshot stride must be positive, initial Q finite".into(),
            ));
        }
        Ok(())
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        let horizon = self.anneal_fraction * self.step_budget as f64;
        if horizon <= 0.0 || step as f64 >= horizon {
            return self.epsilon_end;
        }
        let t = step as f64 / horizon;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }

    pub fn learning_rate(&self, visits: u64) -> f64 {
        self.rate_constant / (self.rate_constant + visits as f64)
    }
}

/// A policy emitted by a learner after `iteration` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub policy: FiniteMemoryPolicy<f64>,
}

/// The sequence of output policies of a learning run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyTrace {
    pub snapshots: Vec<Snapshot>,
    /// Exact values of the snapshots, when computed.
    pub values: Option<Vec<f64>>,
}

impl PolicyTrace {
    /// Appends a snapshot; iterations must increase strictly.
    pub fn push(&mut self, iteration: u64, policy: FiniteMemoryPolicy<f64>) -> Result<()> {
        if self.snapshots.last().is_some_and(|s| s.iteration >= iteration) {
            return Err(Error::InvalidParameter("snapshot iterations must increase".into()));
        }
        self.snapshots.push(Snapshot { iteration, policy });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// The trace without its first `k` snapshots.
    pub fn suffix(&self, k: usize) -> PolicyTrace {
        PolicyTrace {
            snapshots: self.snapshots[k.min(self.len())..].to_vec(),
            values: self.values.as_ref().map(|v| v[k.min(v.len())..].to_vec()),
        }
    }
}

/// Action values over `(s, u)` pairs of the MDP and reward machine:
/// `q[(u * |S| + s) * |A| + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub num_states: usize,
    pub num_machine_states: usize,
    pub num_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn get(&self, s: usize, u: usize, a: usize) -> f64 {
        self.values[(u * self.num_states + s) * self.num_actions + a]
    }

    fn slot(&self, s: usize, u: usize) -> usize {
        (u * self.num_states + s) * self.num_actions
    }

    /// Greedy action, lowest index among maximizers.
    pub fn greedy(&self, s: usize, u: usize) -> usize {
        let base = self.slot(s, u);
        let row = &self.values[base..base + self.num_actions];
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The greedy policy, with the machine state as memory.
    pub fn greedy_policy(&self, rm: &RewardMachine<f64>) -> FiniteMemoryPolicy<f64> {
        let (n, k, m) = (self.num_states, self.num_machine_states, self.num_actions);
        let mut update = Vec::with_capacity(k * m * n);
        for u in 0..k {
            for _ in 0..m {
                update.extend((0..n).map(|t| rm.next(u, t)));
            }
        }
        let act = (0..k * n)
            .map(|i| {
                let mut row = vec![0.0; m];
                row[self.greedy(i % n, i / n)] = 1.0;
                row
            })
            .collect();
        FiniteMemoryPolicy::new(k, rm.initial(), n, m, update, act).expect("greedy policy is well formed")
    }
}

/// Episode length `H` with `γ^H ≤ 1e-6`.
pub fn episode_length(gamma: f64) -> u64 {
    if gamma <= 0.0 {
        return 1;
    }
    ((1e-6f64).ln() / gamma.ln()).ceil().max(1.0) as u64
}

/// Tabular Q-learning for the discounted sum of the machine's rewards. The
/// machine state is tracked alongside the simulator state (a one-state
/// machine is a plain transition reward). Episodes restart every
/// [`episode_length`] steps.
pub fn q_learning<S: Simulator>(
    sim: &mut S,
    rm: &RewardMachine<f64>,
    gamma: f64,
    config: &LearnerConfig,
) -> Result<(PolicyTrace, QTable)> {
    config.validate()?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter("Q-learning needs a constant discount in [0, 1)".into()));
    }
    let (n, m) = (sim.num_states(), sim.num_actions());
    rm.check_shape(n, m)?;
    let k = rm.num_states();
    let mut q = QTable { num_states: n, num_machine_states: k, num_actions: m, values: vec![config.initial_q; n * k * m] };
    let mut visits = vec![0u64; n * k * m];
    let mut rng = seeded(config.seed);
    let horizon = episode_length(gamma);
    let mut trace = PolicyTrace::default();
    sim.reset();
    let mut u = rm.initial();
    let mut t_episode = 0;
    for step in 0..config.step_budget {
        if t_episode == horizon {
            sim.reset();
            u = rm.initial();
            t_episode = 0;
        }
        let s = sim.state();
        let a = if rng.gen::<f64>() < config.epsilon(step) { rng.gen_range(0..m) } else { q.greedy(s, u) };
        let t = sim.step(a)?;
        let v = rm.next(u, t);
        let r = rm.reward(u, s, a, t);
        let slot = q.slot(s, u) + a;
        let target = r + gamma * q.values[q.slot(t, v) + q.greedy(t, v)];
        let rate = config.learning_rate(visits[slot]);
        q.values[slot] += rate * (target - q.values[slot]);
        visits[slot] += 1;
        u = v;
        t_episode += 1;
        if (step + 1) % config.eval_every == 0 {
            trace.push(step + 1, q.greedy_policy(rm))?;
        }
    }
    if trace.last().is_none_or(|s| s.iteration != config.step_budget) {
        trace.push(config.step_budget, q.greedy_policy(rm))?;
    }
    Ok((trace, q))
}

/// Maximum-likelihood model from transition counts
/// `counts[(s * |A| + a) * |S| + t]`; unvisited pairs loop in place.
pub fn estimate_mdp(shape: &MdpShape, counts: &[u64]) -> Result<Mdp<f64>> {
    let (n, m) = (shape.num_states, shape.num_actions);
    let rows = (0..n * m)
        .map(|i| {
            let c = &counts[i * n..(i + 1) * n];
            let total: u64 = c.iter().sum();
            if total == 0 {
                vec![(i / m, 1.0)]
            } else {
                c.iter()
                    .enumerate()
                    .filter(|e| *e.1 > 0)
                    .map(|(t, &x)| (t, x as f64 / total as f64))
                    .collect()
            }
        })
        .collect();
    Mdp::new(n, m, shape.initial, shape.propositions.clone(), shape.labels.clone(), rows)
}

/// Certainty-equivalence learner. It spends exactly `step_budget` simulator
/// steps visiting the least-tried `(s, a)` pairs round-robin, navigating
/// through observed transitions and resetting when no such pair is known to
/// be reachable; resets are free. Each snapshot is the optimal policy of the
/// current estimate.
pub fn model_based_learner<S: Simulator>(
    sim: &mut S,
    shape: &MdpShape,
    spec: &Specification<f64>,
    config: &LearnerConfig,
) -> Result<PolicyTrace> {
    config.validate()?;
    let (n, m) = (shape.num_states, shape.num_actions);
    if sim.num_states() != n || sim.num_actions() != m {
        return Err(Error::InvalidParameter("simulator does not match the MDP shape".into()));
    }
    let mut counts = vec![0u64; n * m * n];
    let mut pair_visits = vec![0u64; n * m];
    let mut known = vec![false; n];
    let mut trace = PolicyTrace::default();
    sim.reset();
    known[sim.state()] = true;
    let snapshot = |counts: &[u64]| -> Result<FiniteMemoryPolicy<f64>> {
        let estimate = estimate_mdp(shape, counts)?;
        Ok(optimal_value(&estimate, spec)?.1)
    };
    let mut reset_last = false;
    let mut step = 0;
    while step < config.step_budget {
        let s = sim.state();
        let least = (0..n * m).filter(|&i| known[i / m]).map(|i| pair_visits[i]).min().unwrap_or(0);
        let wanted = |x: usize| (0..m).find(|&a| pair_visits[x * m + a] == least);
        let action = match wanted(s) {
            Some(a) => Some(a),
            None => first_step_towards(s, n, m, &counts, |x| wanted(x).is_some()),
        };
        let a = match action {
            Some(a) => a,
            None if !reset_last && s != shape.initial => {
                sim.reset();
                reset_last = true;
                continue;
            }
            // Nothing reachable even after a reset: try the least-used action here.
            None => (0..m).min_by_key(|&a| pair_visits[s * m + a]).expect("at least one action"),
        };
        reset_last = false;
        let t = sim.step(a)?;
        counts[(s * m + a) * n + t] += 1;
        pair_visits[s * m + a] += 1;
        known[t] = true;
        step += 1;
        if step % config.eval_every == 0 {
            trace.push(step, snapshot(&counts)?)?;
        }
    }
    if trace.last().is_none_or(|s| s.iteration != config.step_budget) {
        trace.push(config.step_budget, snapshot(&counts)?)?;
    }
    Ok(trace)
}

/// First action of a shortest path in the observed transition graph from
/// `s` to a state satisfying `goal`.
fn first_step_towards(s: usize, n: usize, m: usize, counts: &[u64], goal: impl Fn(usize) -> bool) -> Option<usize> {
    let mut first: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(x) = queue.pop_front() {
        for a in 0..m {
            for t in 0..n {
                if counts[(x * m + a) * n + t] == 0 || seen[t] {
                    continue;
                }
                seen[t] = true;
                first[t] = if x == s { Some(a) } else { first[x] };
                if goal(t) {
                    return first[t];
                }
                queue.push_back(t);
            }
        }
    }
    None
}

/// Number of snapshots that are not `eps`-optimal.
pub fn pac_mistake_count(trace: &PolicyTrace, mdp: &Mdp<f64>, spec: &Specification<f64>, eps: f64) -> Result<usize> {
    let (opt, _) = optimal_value(mdp, spec)?;
    let mut count = 0;
    for snap in &trace.snapshots {
        if spec_value(mdp, spec, &snap.policy)? < opt - eps - 1e-9 {
            count += 1;
        }
    }
    Ok(count)
}

/// One row of a [`Convergence`] table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub iteration: u64,
    /// Index of the snapshot's policy among the distinct policies of the
    /// trace, in order of first appearance.
    pub policy_id: usize,
    pub value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub optimum: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl Convergence {
    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.gap)
    }

    /// CSV with columns `iteration,policy-id,J,gap`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,policy-id,J,gap\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.16e},{:.16e}", r.iteration, r.policy_id, r.value, r.gap);
        }
        out
    }
}

/// Exact value of every snapshot and its gap to the optimum.
pub fn convergence_trace(trace: &PolicyTrace, mdp: &Mdp<f64>, spec: &Specification<f64>) -> Result<Convergence> {
    let (optimum, _) = optimal_value(mdp, spec)?;
    let mut distinct: Vec<&FiniteMemoryPolicy<f64>> = Vec::new();
    let mut rows = Vec::with_capacity(trace.len());
    for snap in &trace.snapshots {
        let policy_id = match distinct.iter().position(|p| **p == snap.policy) {
            Some(i) => i,
            None => {
                distinct.push(&snap.policy);
                distinct.len() - 1
            }
        };
        let value = spec_value(mdp, spec, &snap.policy)?;
        rows.push(ConvergenceRow { iteration: snap.iteration, policy_id, value, gap: optimum - value });
    }
    Ok(Convergence { optimum, rows })
}

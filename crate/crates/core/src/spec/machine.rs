//! Reward machines keyed by MDP states and abstract reward machines keyed by
//! labels.

use crate::error::{Error, Result};
use crate::mdp::{prop_mask_of, Discount, LabelSet, LassoRun, MdpShape, Run};
use crate::scalar::Real;

/// `R = (U, u0, δu, δr)` over the states and actions of a fixed MDP.
///
/// The machine moves on the successor state: `u_{i+1} = δu(u_i, s_{i+1})`,
/// and the reward of step `i` is `δr(u_i)(s_i, a_i, s_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMachine<R = f64> {
    num_states: usize,
    initial: usize,
    num_mdp_states: usize,
    num_actions: usize,
    /// `update[u * |S| + s']`
    update: Vec<usize>,
    /// `rewards[((u * |S| + s) * |A| + a) * |S| + s']`
    rewards: Vec<R>,
    normalized: bool,
}

impl<R: Real> RewardMachine<R> {
    pub fn from_fn(
        num_states: usize,
        initial: usize,
        num_mdp_states: usize,
        num_actions: usize,
        mut update: impl FnMut(usize, usize) -> usize,
        mut reward: impl FnMut(usize, usize, usize, usize) -> R,
    ) -> Result<Self> {
        let n = num_mdp_states;
        let upd: Vec<usize> = (0..num_states * n).map(|i| update(i / n, i % n)).collect();
        let mut rewards = Vec::with_capacity(num_states * n * num_actions * n);
        for u in 0..num_states {
            for s in 0..n {
                for a in 0..num_actions {
                    for t in 0..n {
                        rewards.push(reward(u, s, a, t));
                    }
                }
            }
        }
        Self::new(num_states, initial, num_mdp_states, num_actions, upd, rewards, false)
    }

    pub fn new(
        num_states: usize,
        initial: usize,
        num_mdp_states: usize,
        num_actions: usize,
        update: Vec<usize>,
        rewards: Vec<R>,
        normalized: bool,
    ) -> Result<Self> {
        if num_states == 0 || initial >= num_states {
            return Err(Error::InvalidMachine("initial state out of range".into()));
        }
        if update.len() != num_states * num_mdp_states || update.iter().any(|&u| u >= num_states) {
            return Err(Error::InvalidMachine("update table is not total".into()));
        }
        if rewards.len() != num_states * num_mdp_states * num_actions * num_mdp_states {
            return Err(Error::InvalidMachine("reward table has the wrong size".into()));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMachine("rewards must be finite".into()));
        }
        let rm = Self { num_states, initial, num_mdp_states, num_actions, update, rewards, normalized: false };
        if normalized {
            rm.normalize_flag()
        } else {
            Ok(rm)
        }
    }

    /// Asserts that every reward lies in `[0, 1]` and records it.
    pub fn normalize_flag(mut self) -> Result<Self> {
        if self.rewards.iter().any(|&r| r < R::zero() || r > R::one()) {
            return Err(Error::InvalidMachine("normalized machine has a reward outside [0, 1]".into()));
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn num_mdp_states(&self) -> usize {
        self.num_mdp_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn next(&self, u: usize, s_next: usize) -> usize {
        self.update[u * self.num_mdp_states + s_next]
    }

    pub fn reward(&self, u: usize, s: usize, a: usize, t: usize) -> R {
        let n = self.num_mdp_states;
        self.rewards[((u * n + s) * self.num_actions + a) * n + t]
    }

    pub fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.num_mdp_states != num_states || self.num_actions != num_actions {
            return Err(Error::InvalidMachine(format!(
                "machine is defined over {} states and {} actions, MDP has {num_states} and {num_actions}",
                self.num_mdp_states, self.num_actions
            )));
        }
        Ok(())
    }

    /// The reward sequence along a finite run.
    pub fn rewards_along(&self, run: &Run) -> Vec<R> {
        let mut u = self.initial;
        run.transitions()
            .into_iter()
            .map(|(s, a, t)| {
                let r = self.reward(u, s, a, t);
                u = self.next(u, t);
                r
            })
            .collect()
    }
}

/// A reward machine whose transitions and rewards only read state labels:
/// `u_{i+1} = δu(u_i, L(s_{i+1}))`, reward `δr(u_i)(L(s_{i+1}))`.
///
/// Labels are interpreted over the machine's own proposition list; they are
/// matched against an MDP's propositions by name when lowering.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractRewardMachine<R = f64> {
    num_states: usize,
    initial: usize,
    propositions: Vec<String>,
    /// `update[u << k | label]`
    update: Vec<usize>,
    rewards: Vec<R>,
    normalized: bool,
}

/// Largest proposition count an abstract machine or automaton may use: tables
/// are dense over all labels.
pub const MAX_TABLE_PROPOSITIONS: usize = 16;

impl<R: Real> AbstractRewardMachine<R> {
    pub fn from_fn<S: AsRef<str>>(
        propositions: &[S],
        num_states: usize,
        initial: usize,
        mut f: impl FnMut(usize, LabelSet) -> (usize, R),
    ) -> Result<Self> {
        let props: Vec<String> = propositions.iter().map(|p| p.as_ref().to_string()).collect();
        if props.len() > MAX_TABLE_PROPOSITIONS {
            return Err(Error::InvalidMachine(format!(
                "at most {MAX_TABLE_PROPOSITIONS} propositions are supported"
            )));
        }
        let width = 1usize << props.len();
        let mut update = Vec::with_capacity(num_states * width);
        let mut rewards = Vec::with_capacity(num_states * width);
        for u in 0..num_states {
            for l in 0..width {
                let (v, r) = f(u, l as LabelSet);
                update.push(v);
                rewards.push(r);
            }
        }
        Self::new(props, num_states, initial, update, rewards, false)
    }

    pub fn new(
        propositions: Vec<String>,
        num_states: usize,
        initial: usize,
        update: Vec<usize>,
        rewards: Vec<R>,
        normalized: bool,
    ) -> Result<Self> {
        if propositions.len() > MAX_TABLE_PROPOSITIONS {
            return Err(Error::InvalidMachine(format!(
                "at most {MAX_TABLE_PROPOSITIONS} propositions are supported"
            )));
        }
        let width = 1usize << propositions.len();
        if num_states == 0 || initial >= num_states {
            return Err(Error::InvalidMachine("initial state out of range".into()));
        }
        if update.len() != num_states * width || update.iter().any(|&u| u >= num_states) {
            return Err(Error::InvalidMachine("update table is not total".into()));
        }
        if rewards.len() != num_states * width || rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMachine("reward table must be total and finite".into()));
        }
        let arm = Self { num_states, initial, propositions, update, rewards, normalized: false };
        if normalized {
            arm.normalize_flag()
        } else {
            Ok(arm)
        }
    }

    pub fn normalize_flag(mut self) -> Result<Self> {
        if self.rewards.iter().any(|&r| r < R::zero() || r > R::one()) {
            return Err(Error::InvalidMachine("normalized machine has a reward outside [0, 1]".into()));
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn propositions(&self) -> &[String] {
        &self.propositions
    }

    pub fn num_labels(&self) -> usize {
        1 << self.propositions.len()
    }

    pub fn next(&self, u: usize, label: LabelSet) -> usize {
        self.update[(u << self.propositions.len()) | label as usize]
    }

    pub fn reward(&self, u: usize, label: LabelSet) -> R {
        self.rewards[(u << self.propositions.len()) | label as usize]
    }

    /// Maps each MDP label into this machine's proposition space.
    pub fn label_map(&self, shape: &MdpShape) -> Result<Vec<LabelSet>> {
        project_labels(&self.propositions, shape)
    }

    /// The equivalent state-keyed machine for a concrete MDP.
    pub fn lower(&self, shape: &MdpShape) -> Result<RewardMachine<R>> {
        let labels = self.label_map(shape)?;
        let rm = RewardMachine::from_fn(
            self.num_states,
            self.initial,
            shape.num_states,
            shape.num_actions,
            |u, t| self.next(u, labels[t]),
            |u, _, _, t| self.reward(u, labels[t]),
        )?;
        if self.normalized {
            rm.normalize_flag()
        } else {
            Ok(rm)
        }
    }
}

/// For every MDP state, the bitmask over `props` of the propositions that
/// hold there. Every name in `props` must be an MDP proposition.
pub fn project_labels(props: &[String], shape: &MdpShape) -> Result<Vec<LabelSet>> {
    let bits: Vec<LabelSet> = props
        .iter()
        .map(|p| prop_mask_of(&shape.propositions, &[p]))
        .collect::<Result<_>>()?;
    Ok(shape
        .labels
        .iter()
        .map(|&l| {
            bits.iter()
                .enumerate()
                .filter(|&(_, &b)| l & b != 0)
                .fold(0, |acc, (j, _)| acc | (1 << j))
        })
        .collect())
}

/// Either kind of reward machine.
#[derive(Debug, Clone, PartialEq)]
pub enum Machine<R = f64> {
    State(RewardMachine<R>),
    Abstract(AbstractRewardMachine<R>),
}

impl<R: Real> Machine<R> {
    pub fn num_states(&self) -> usize {
        match self {
            Machine::State(m) => m.num_states(),
            Machine::Abstract(m) => m.num_states(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        match self {
            Machine::State(m) => m.is_normalized(),
            Machine::Abstract(m) => m.is_normalized(),
        }
    }

    /// State-keyed form for the MDP `shape`.
    pub fn lower(&self, shape: &MdpShape) -> Result<RewardMachine<R>> {
        match self {
            Machine::State(m) => {
                m.check_shape(shape.num_states, shape.num_actions)?;
                Ok(m.clone())
            }
            Machine::Abstract(m) => m.lower(shape),
        }
    }
}

impl<R> From<RewardMachine<R>> for Machine<R> {
    fn from(m: RewardMachine<R>) -> Self {
        Machine::State(m)
    }
}

impl<R> From<AbstractRewardMachine<R>> for Machine<R> {
    fn from(m: AbstractRewardMachine<R>) -> Self {
        Machine::Abstract(m)
    }
}

fn check_props<S: AsRef<str>>(x: &[S]) -> Result<Vec<String>> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("proposition set must be nonempty".into()));
    }
    let mut props: Vec<String> = x.iter().map(|p| p.as_ref().to_string()).collect();
    props.sort();
    props.dedup();
    Ok(props)
}

/// Machine paying 1 from the first step that enters a state labeled with
/// some proposition of `x`, forever after.
pub fn build_reach_arm<R: Real, S: AsRef<str>>(x: &[S]) -> Result<AbstractRewardMachine<R>> {
    let props = check_props(x)?;
    let arm = AbstractRewardMachine::from_fn(&props, 2, 0, |u, l| match (u, l != 0) {
        (0, false) => (0, R::zero()),
        _ => (1, R::one()),
    })?;
    arm.normalize_flag()
}

/// The reach machine for the complement of `x` with rewards `1 - r`: pays 1
/// as long as every visited state satisfies some proposition of `x`.
pub fn build_safe_arm<R: Real, S: AsRef<str>>(x: &[S]) -> Result<AbstractRewardMachine<R>> {
    let props = check_props(x)?;
    let arm = AbstractRewardMachine::from_fn(&props, 2, 0, |u, l| match (u, l != 0) {
        (0, true) => (0, R::one()),
        _ => (1, R::zero()),
    })?;
    arm.normalize_flag()
}

/// Built-in machine shapes recognized structurally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArmKind {
    Reach(Vec<String>),
    Safe(Vec<String>),
}

/// Recognizes machines equal to [`build_reach_arm`] or [`build_safe_arm`]
/// for some proposition set, up to the naming of the propositions that are
/// never read.
pub fn classify_arm<R: Real>(arm: &AbstractRewardMachine<R>) -> Option<ArmKind> {
    if arm.num_states() != 2 || arm.initial() != 0 || arm.propositions().is_empty() {
        return None;
    }
    let k = arm.propositions().len();
    let reach_x: Vec<String> =
        (0..k).filter(|&i| arm.next(0, 1 << i) == 1).map(|i| arm.propositions()[i].clone()).collect();
    let same_as = |other: &AbstractRewardMachine<R>| {
        (0..2).all(|u| {
            (0..arm.num_labels() as LabelSet).all(|l| {
                let ol = remap_label(l, arm.propositions(), other.propositions());
                arm.next(u, l) == other.next(u, ol) && arm.reward(u, l) == other.reward(u, ol)
            })
        })
    };
    if !reach_x.is_empty() {
        if let Ok(reach) = build_reach_arm::<R, _>(&reach_x) {
            if same_as(&reach) {
                return Some(ArmKind::Reach(reach_x));
            }
        }
    }
    let safe_x: Vec<String> =
        (0..k).filter(|&i| arm.next(0, 1 << i) == 0).map(|i| arm.propositions()[i].clone()).collect();
    if !safe_x.is_empty() {
        if let Ok(safe) = build_safe_arm::<R, _>(&safe_x) {
            if same_as(&safe) {
                return Some(ArmKind::Safe(safe_x));
            }
        }
    }
    None
}

fn remap_label(l: LabelSet, from: &[String], to: &[String]) -> LabelSet {
    let mut out = 0;
    for (i, p) in from.iter().enumerate() {
        if l & (1 << i) != 0 {
            if let Some(j) = to.iter().position(|q| q == p) {
                out |= 1 << j;
            }
        }
    }
    out
}

/// How a reward sequence is aggregated by [`rm_return`].
#[derive(Debug, Clone, PartialEq)]
pub enum ReturnMode<R = f64> {
    /// `Σ_i (Π_{j<i} γ(s_j)) r_i`.
    Discounted(Discount<R>),
    /// `(1/t) Σ_{i<t} r_i`.
    Average(usize),
}

/// A finite run or a lasso.
#[derive(Debug, Clone, Copy)]
pub enum RunRef<'a> {
    Finite(&'a Run),
    Lasso(&'a LassoRun),
}

impl<'a> From<&'a Run> for RunRef<'a> {
    fn from(r: &'a Run) -> Self {
        RunRef::Finite(r)
    }
}

impl<'a> From<&'a LassoRun> for RunRef<'a> {
    fn from(r: &'a LassoRun) -> Self {
        RunRef::Lasso(r)
    }
}

/// Return of a run under a state-keyed reward machine. Lassos are
/// discounted in closed form; averages need at least `t` transitions.
pub fn rm_return<'a, R: Real>(
    rm: &RewardMachine<R>,
    run: impl Into<RunRef<'a>>,
    mode: &ReturnMode<R>,
) -> Result<R> {
    match (run.into(), mode) {
        (RunRef::Finite(run), ReturnMode::Discounted(gamma)) => {
            let mut weight = R::one();
            let mut total = R::zero();
            for ((s, _, _), r) in run.transitions().into_iter().zip(rm.rewards_along(run)) {
                total = total + weight * r;
                weight = weight * gamma.at(s);
            }
            Ok(total)
        }
        (RunRef::Finite(run), ReturnMode::Average(t)) => average(rm, run, *t),
        (RunRef::Lasso(lasso), ReturnMode::Average(t)) => average(rm, &lasso.unroll(*t), *t),
        (RunRef::Lasso(lasso), ReturnMode::Discounted(gamma)) => Ok(lasso_discounted(rm, lasso, gamma)),
    }
}

fn average<R: Real>(rm: &RewardMachine<R>, run: &Run, t: usize) -> Result<R> {
    if t == 0 || run.len() < t {
        return Err(Error::RunTooShort { len: run.len(), t });
    }
    let rewards = rm.rewards_along(run);
    Ok(rewards[..t].iter().copied().sum::<R>() / R::lit(t as f64))
}

fn lasso_discounted<R: Real>(rm: &RewardMachine<R>, lasso: &LassoRun, gamma: &Discount<R>) -> R {
    let mut u = rm.initial();
    let mut weight = R::one();
    let mut total = R::zero();
    let step = |u: &mut usize, weight: &mut R, total: &mut R, (s, a, t): (usize, usize, usize)| {
        *total = *total + *weight * rm.reward(*u, s, a, t);
        *weight = *weight * gamma.at(s);
        *u = rm.next(*u, t);
    };
    for tr in lasso.prefix.transitions() {
        step(&mut u, &mut weight, &mut total, tr);
    }
    // The machine state at the start of each cycle pass is eventually
    // periodic; find the first repeat and sum the periodic part as a
    // geometric series.
    let cycle = lasso.cycle.transitions();
    let mut seen: Vec<(usize, R, R)> = Vec::new();
    loop {
        if let Some(pos) = seen.iter().position(|e| e.0 == u) {
            let (_, w0, t0) = seen[pos];
            let period_total = total - t0;
            let period_weight = weight / w0;
            // total_so_far counts everything up to the second visit; the
            // remaining passes repeat the period with factor period_weight.
            return t0 + period_total / (R::one() - period_weight);
        }
        seen.push((u, weight, total));
        for &tr in &cycle {
            step(&mut u, &mut weight, &mut total, tr);
        }
    }
}

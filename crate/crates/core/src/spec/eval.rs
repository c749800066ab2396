//! Exact values of specifications by product construction.

use std::collections::HashMap;

use super::buchi::BuchiAutomaton;
use super::ltl::LtlFormula;
use super::machine::{classify_arm, project_labels, ArmKind, Machine, RewardMachine};
use crate::error::{Error, Result};
use crate::mdp::{
    limit_avg_value, max_buchi_prob, max_reach_prob, max_safe_prob, optimal_discounted,
    DeterministicPolicies, Discount, FiniteMemoryPolicy, MarkovChain, Mdp, MdpShape,
    PositionalPolicy, RewardTable,
};
use crate::graph::forward_reachable;
use crate::scalar::Real;

/// A specification `φ` defining `J^M_φ(π)` for every policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Specification<R = f64> {
    /// Discounted sum of machine rewards; per-state discounts refer to MDP
    /// states.
    DiscountedRm { machine: Machine<R>, gamma: Discount<R> },
    /// Limit-average (liminf of running means) of machine rewards.
    LimitAvgRm { machine: Machine<R> },
    /// Probability of visiting a state labeled with some proposition of the
    /// set.
    Reach(Vec<String>),
    /// Probability that every visited state is labeled with some
    /// proposition of the set.
    Safe(Vec<String>),
    /// Probability of satisfying an LTL formula, through an attached or
    /// built-in deterministic Büchi automaton.
    Ltl { formula: LtlFormula, automaton: Option<BuchiAutomaton> },
}

impl<R: Real> Specification<R> {
    pub fn reach<S: AsRef<str>>(x: &[S]) -> Self {
        Specification::Reach(x.iter().map(|p| p.as_ref().to_string()).collect())
    }

    pub fn safe<S: AsRef<str>>(x: &[S]) -> Self {
        Specification::Safe(x.iter().map(|p| p.as_ref().to_string()).collect())
    }

    pub fn ltl(formula: LtlFormula) -> Self {
        Specification::Ltl { formula, automaton: None }
    }

    /// Whether values are probabilities.
    pub fn is_probabilistic(&self) -> bool {
        matches!(self, Specification::Reach(_) | Specification::Safe(_) | Specification::Ltl { .. })
    }

    /// The deterministic automaton used to evaluate an LTL specification.
    pub fn automaton(&self) -> Result<Option<BuchiAutomaton>> {
        let Specification::Ltl { formula, automaton } = self else {
            return Ok(None);
        };
        let aut = match automaton {
            Some(a) => a.clone(),
            None => BuchiAutomaton::for_builtin(formula).ok_or_else(|| {
                Error::Unsupported(format!("no automaton attached to `{formula}` and no built-in form applies"))
            })?,
        };
        if !aut.is_deterministic() {
            return Err(Error::Unsupported(
                "evaluation needs a deterministic automaton; resolve choices with a product reduction".into(),
            ));
        }
        Ok(Some(aut))
    }
}

/// Either kind of policy.
#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a, R> {
    Positional(&'a PositionalPolicy<R>),
    FiniteMemory(&'a FiniteMemoryPolicy<R>),
}

impl<'a, R> From<&'a PositionalPolicy<R>> for PolicyRef<'a, R> {
    fn from(p: &'a PositionalPolicy<R>) -> Self {
        PolicyRef::Positional(p)
    }
}

impl<'a, R> From<&'a FiniteMemoryPolicy<R>> for PolicyRef<'a, R> {
    fn from(p: &'a FiniteMemoryPolicy<R>) -> Self {
        PolicyRef::FiniteMemory(p)
    }
}

impl<R: Real> PolicyRef<'_, R> {
    pub(crate) fn dims(&self) -> (usize, usize) {
        match self {
            PolicyRef::Positional(p) => (p.num_states(), p.num_actions()),
            PolicyRef::FiniteMemory(p) => (p.num_states(), p.num_actions()),
        }
    }

    pub(crate) fn memory_size(&self) -> usize {
        match self {
            PolicyRef::Positional(_) => 1,
            PolicyRef::FiniteMemory(p) => p.memory_size(),
        }
    }

    pub(crate) fn initial_memory(&self) -> usize {
        match self {
            PolicyRef::Positional(_) => 0,
            PolicyRef::FiniteMemory(p) => p.initial_memory(),
        }
    }

    pub(crate) fn act(&self, m: usize, s: usize) -> &[R] {
        match self {
            PolicyRef::Positional(p) => p.row(s),
            PolicyRef::FiniteMemory(p) => p.act(m, s),
        }
    }

    pub(crate) fn next_memory(&self, m: usize, a: usize, t: usize) -> usize {
        match self {
            PolicyRef::Positional(_) => 0,
            PolicyRef::FiniteMemory(p) => p.next_memory(m, a, t),
        }
    }

    fn check(&self, mdp_states: usize, mdp_actions: usize) -> Result<()> {
        let (n, m) = self.dims();
        if n != mdp_states || m != mdp_actions {
            return Err(Error::InvalidPolicy(format!(
                "policy is defined over {n} states and {m} actions, MDP has {mdp_states} and {mdp_actions}"
            )));
        }
        Ok(())
    }
}

/// A deterministic automaton reading MDP successor states: the reward
/// machine state, or the Büchi automaton state after reading the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tracker {
    size: usize,
    initial: usize,
    num_mdp_states: usize,
    next: Vec<usize>,
}

impl Tracker {
    pub fn trivial(num_mdp_states: usize) -> Self {
        Self { size: 1, initial: 0, num_mdp_states, next: vec![0; num_mdp_states] }
    }

    pub fn from_rm<R: Real>(rm: &RewardMachine<R>) -> Self {
        let n = rm.num_mdp_states();
        Self {
            size: rm.num_states(),
            initial: rm.initial(),
            num_mdp_states: n,
            next: (0..rm.num_states() * n).map(|i| rm.next(i / n, i % n)).collect(),
        }
    }

    /// Tracks a deterministic automaton; the initial value has already read
    /// the label of the initial MDP state.
    pub fn from_dba(aut: &BuchiAutomaton, shape: &MdpShape) -> Result<Self> {
        if !aut.is_deterministic() {
            return Err(Error::Unsupported("tracking needs a deterministic automaton".into()));
        }
        let labels = project_labels(aut.propositions(), shape)?;
        let n = shape.num_states;
        Ok(Self {
            size: aut.num_states(),
            initial: aut.next(aut.initial(), labels[shape.initial]),
            num_mdp_states: n,
            next: (0..aut.num_states() * n).map(|i| aut.next(i / n, labels[i % n])).collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn next(&self, q: usize, s_next: usize) -> usize {
        self.next[q * self.num_mdp_states + s_next]
    }
}

/// The synchronous product `M × T` over all pairs, indexed `s * |T| + q`.
#[derive(Debug, Clone)]
pub struct ProductMdp<R = f64> {
    pub mdp: Mdp<R>,
    pub tracker: Tracker,
    pub base_states: usize,
}

impl<R: Real> ProductMdp<R> {
    pub fn new(mdp: &Mdp<R>, tracker: Tracker) -> Result<Self> {
        let n = mdp.num_states();
        let k = tracker.size();
        let m = mdp.num_actions();
        let mut rows = Vec::with_capacity(n * k * m);
        let mut labels = Vec::with_capacity(n * k);
        for s in 0..n {
            for q in 0..k {
                labels.push(mdp.label(s));
                for a in 0..m {
                    rows.push(mdp.row(s, a).iter().map(|&(t, p)| (t * k + tracker.next(q, t), p)).collect());
                }
            }
        }
        let product = Mdp::new(
            n * k,
            m,
            mdp.initial() * k + tracker.initial(),
            mdp.propositions().to_vec(),
            labels,
            rows,
        )?
        .with_action_names(mdp.action_names().to_vec());
        Ok(Self { mdp: product, tracker, base_states: n })
    }

    pub fn index(&self, s: usize, q: usize) -> usize {
        s * self.tracker.size() + q
    }

    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.tracker.size(), i % self.tracker.size())
    }

    /// Per-product-state flags from a predicate on `(s, q)`.
    pub fn states_where(&self, f: impl Fn(usize, usize) -> bool) -> Vec<bool> {
        (0..self.mdp.num_states()).map(|i| {
            let (s, q) = self.split(i);
            f(s, q)
        }).collect()
    }

    /// Rewards `R((s, u), a, (t, u')) = δr(u)(s, a, t)`.
    pub fn rm_rewards(&self, rm: &RewardMachine<R>) -> RewardTable<R> {
        let k = self.tracker.size();
        RewardTable::from_fn(&self.mdp, |i, a, j| rm.reward(i % k, i / k, a, j / k))
    }

    pub fn lift_discount(&self, gamma: &Discount<R>) -> Discount<R> {
        match gamma {
            Discount::Constant(g) => Discount::Constant(*g),
            Discount::PerState(v) => {
                Discount::PerState((0..self.mdp.num_states()).map(|i| v[self.split(i).0]).collect())
            }
        }
    }

    /// Runs a positional product policy on the base MDP, tracking the
    /// product component in memory.
    pub fn lift(&self, policy: &PositionalPolicy<R>) -> FiniteMemoryPolicy<R> {
        let n = self.base_states;
        let k = self.tracker.size();
        let m = self.mdp.num_actions();
        let mut update = Vec::with_capacity(k * m * n);
        for q in 0..k {
            for _ in 0..m {
                for t in 0..n {
                    update.push(self.tracker.next(q, t));
                }
            }
        }
        let act = (0..k)
            .flat_map(|q| (0..n).map(move |s| (q, s)))
            .map(|(q, s)| policy.row(self.index(s, q)).to_vec())
            .collect();
        FiniteMemoryPolicy::new(k, self.tracker.initial(), n, m, update, act)
            .expect("lifted product policy is well formed")
    }
}

/// The Markov chain of a policy jointly with a tracker, restricted to states
/// reachable from the initial one (which gets index 0).
struct Joint<R> {
    chain: MarkovChain<R>,
    /// `(s, memory, q)` of each joint state.
    states: Vec<(usize, usize, usize)>,
    reward: Vec<R>,
}

fn joint<R: Real>(
    mdp: &Mdp<R>,
    policy: PolicyRef<'_, R>,
    tracker: &Tracker,
    rm: Option<&RewardMachine<R>>,
) -> Result<Joint<R>> {
    policy.check(mdp.num_states(), mdp.num_actions())?;
    let start = (mdp.initial(), policy.initial_memory(), tracker.initial());
    let mut index: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut states = vec![start];
    index.insert(start, 0);
    let mut rows = Vec::new();
    let mut reward = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (s, mem, q) = states[i];
        let mut row: Vec<(usize, R)> = Vec::new();
        let mut r = R::zero();
        for (a, &w) in policy.act(mem, s).iter().enumerate() {
            if w == R::zero() {
                continue;
            }
            for &(t, p) in mdp.row(s, a) {
                if let Some(rm) = rm {
                    r = r + w * p * rm.reward(q, s, a, t);
                }
                let key = (t, policy.next_memory(mem, a, t), tracker.next(q, t));
                let j = *index.entry(key).or_insert_with(|| {
                    states.push(key);
                    states.len() - 1
                });
                match row.iter_mut().find(|e| e.0 == j) {
                    Some(e) => e.1 = e.1 + w * p,
                    None => row.push((j, w * p)),
                }
            }
        }
        rows.push(row);
        reward.push(r);
        i += 1;
    }
    Ok(Joint { chain: MarkovChain::from_rows(rows), states, reward })
}

fn label_targets<R: Real>(mdp: &Mdp<R>, x: &[String]) -> Result<Vec<bool>> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("proposition set must be nonempty".into()));
    }
    let mask = mdp.prop_mask(x)?;
    Ok(mdp.states_with_any(mask))
}

/// Exact value `J^M_φ(π)` from the initial state.
pub fn spec_value<'a, R: Real>(
    mdp: &Mdp<R>,
    spec: &Specification<R>,
    policy: impl Into<PolicyRef<'a, R>>,
) -> Result<R> {
    let policy = policy.into();
    match spec {
        Specification::DiscountedRm { machine, gamma } => {
            gamma.validate(mdp.num_states())?;
            let rm = machine.lower(&mdp.shape())?;
            let j = joint(mdp, policy, &Tracker::from_rm(&rm), Some(&rm))?;
            let v = j.chain.discounted(&j.reward, |i| gamma.at(j.states[i].0))?;
            Ok(v[0])
        }
        Specification::LimitAvgRm { machine } => {
            let rm = machine.lower(&mdp.shape())?;
            let j = joint(mdp, policy, &Tracker::from_rm(&rm), Some(&rm))?;
            Ok(j.chain.gains(&j.reward)?[0])
        }
        Specification::Reach(x) => {
            let target = label_targets(mdp, x)?;
            let j = joint(mdp, policy, &Tracker::trivial(mdp.num_states()), None)?;
            let hit: Vec<bool> = j.states.iter().map(|st| target[st.0]).collect();
            Ok(j.chain.reach_probability(&hit)?[0])
        }
        Specification::Safe(x) => {
            let safe = label_targets(mdp, x)?;
            let j = joint(mdp, policy, &Tracker::trivial(mdp.num_states()), None)?;
            let bad: Vec<bool> = j.states.iter().map(|st| !safe[st.0]).collect();
            Ok((R::one() - j.chain.reach_probability(&bad)?[0]).clamp01())
        }
        Specification::Ltl { .. } => {
            let aut = spec.automaton()?.expect("LTL specification");
            let tracker = Tracker::from_dba(&aut, &mdp.shape())?;
            let j = joint(mdp, policy, &tracker, None)?;
            let acc: Vec<bool> = j.states.iter().map(|st| aut.is_accepting(st.2)).collect();
            Ok(j.chain.buchi_probability(&acc)?[0])
        }
    }
}

/// Budget for exhaustive limit-average control.
pub const DEFAULT_POLICY_BUDGET: u64 = 1 << 20;

/// `J*(M, φ)` and an optimal deterministic finite-memory witness whose
/// memory is the machine or automaton state.
pub fn optimal_value<R: Real>(mdp: &Mdp<R>, spec: &Specification<R>) -> Result<(R, FiniteMemoryPolicy<R>)> {
    let positional = |(v, p): (Vec<R>, PositionalPolicy<R>)| (v[mdp.initial()], p.to_finite_memory());
    match spec {
        Specification::Reach(x) => max_reach_prob(mdp, &label_targets(mdp, x)?).map(positional),
        Specification::Safe(x) => max_safe_prob(mdp, &label_targets(mdp, x)?).map(positional),
        Specification::DiscountedRm { machine, gamma } => {
            gamma.validate(mdp.num_states())?;
            let rm = machine.lower(&mdp.shape())?;
            let product = ProductMdp::new(mdp, Tracker::from_rm(&rm))?;
            let rewards = product.rm_rewards(&rm);
            let (v, p) = optimal_discounted(&product.mdp, &rewards, &product.lift_discount(gamma))?;
            Ok((v[product.mdp.initial()], product.lift(&p)))
        }
        Specification::Ltl { .. } => {
            let aut = spec.automaton()?.expect("LTL specification");
            let product = ProductMdp::new(mdp, Tracker::from_dba(&aut, &mdp.shape())?)?;
            let acc = product.states_where(|_, q| aut.is_accepting(q));
            let (v, p) = max_buchi_prob(&product.mdp, &acc)?;
            Ok((v[product.mdp.initial()], product.lift(&p)))
        }
        Specification::LimitAvgRm { machine } => optimal_limit_average(mdp, machine, DEFAULT_POLICY_BUDGET),
    }
}

/// Optimal limit-average value. Built-in reach and safety machines reduce to
/// reachability and safety on the product; other machines are solved by
/// enumerating the deterministic positional policies of the product over its
/// reachable states, which suffices for mean payoff on finite MDPs.
pub fn optimal_limit_average<R: Real>(
    mdp: &Mdp<R>,
    machine: &Machine<R>,
    budget: u64,
) -> Result<(R, FiniteMemoryPolicy<R>)> {
    let rm = machine.lower(&mdp.shape())?;
    let product = ProductMdp::new(mdp, Tracker::from_rm(&rm))?;
    let init = product.mdp.initial();
    if let Machine::Abstract(arm) = machine {
        match classify_arm(arm) {
            Some(ArmKind::Reach(_)) => {
                let (v, p) = max_reach_prob(&product.mdp, &product.states_where(|_, u| u == 1))?;
                return Ok((v[init], product.lift(&p)));
            }
            Some(ArmKind::Safe(_)) => {
                let (v, p) = max_safe_prob(&product.mdp, &product.states_where(|_, u| u == 0))?;
                return Ok((v[init], product.lift(&p)));
            }
            None => {}
        }
    }
    let reachable = forward_reachable(&product.mdp.adjacency(), &[init]);
    let count = DeterministicPolicies::count(
        product.mdp.num_actions(),
        reachable.iter().filter(|&&r| r).count(),
    );
    if count > budget {
        return Err(Error::Unsupported(format!(
            "limit-average control needs {count} policy evaluations, budget is {budget}"
        )));
    }
    let rewards = product.rm_rewards(&rm);
    let m = product.mdp.num_actions();
    let mut best: Option<(R, PositionalPolicy<R>)> = None;
    for actions in DeterministicPolicies::over(product.mdp.num_states(), m, &reachable) {
        let policy = PositionalPolicy::deterministic(m, &actions);
        let g = limit_avg_value(&product.mdp, &rewards, &policy)?.at_initial();
        if best.as_ref().is_none_or(|(b, _)| g > *b + R::tie_tol()) {
            best = Some((g, policy));
        }
    }
    let (g, p) = best.expect("at least one policy");
    Ok((g, product.lift(&p)))
}

/// `J^M_φ(π) ≥ J*(M, φ) - eps`, with `1e-9` numerical slack.
pub fn is_eps_optimal<'a, R: Real>(
    mdp: &Mdp<R>,
    spec: &Specification<R>,
    policy: impl Into<PolicyRef<'a, R>>,
    eps: R,
) -> Result<bool> {
    let (opt, _) = optimal_value(mdp, spec)?;
    let v = spec_value(mdp, spec, policy)?;
    Ok(v >= opt - eps - R::lit(1e-9))
}

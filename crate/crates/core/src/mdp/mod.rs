//! Finite labeled MDPs, runs, policies, the simulator contract and exact
//! numerical oracles.

mod chain;
mod mec;
mod policy;
mod run;
mod sim;
mod solve;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use chain::MarkovChain;
pub use mec::{max_buchi_prob, mec_decomposition, EndComponent};
pub use policy::{cylinder_prob, DeterministicPolicies, FiniteMemoryPolicy, PositionalPolicy};
pub use run::{LassoRun, Run};
pub use sim::{CountingSimulator, MdpSimulator, Simulator};
pub use solve::{
    discounted_value, limit_avg_value, max_reach_avoid_prob, max_reach_prob, max_safe_prob,
    optimal_discounted, value_iteration_discounted, Discount, LimitAverage, RewardTable,
};

/// Label of a state: bit `i` set iff proposition `i` holds.
pub type LabelSet = u64;

pub const MAX_PROPOSITIONS: usize = 64;

/// The input tuple `(S, A, s0, L)` of a reduction: everything about an MDP
/// except its transition probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpShape {
    pub num_states: usize,
    pub num_actions: usize,
    pub initial: usize,
    pub propositions: Vec<String>,
    pub labels: Vec<LabelSet>,
}

impl MdpShape {
    pub fn prop_mask<S: AsRef<str>>(&self, names: &[S]) -> Result<LabelSet> {
        prop_mask_of(&self.propositions, names)
    }

    /// States whose label intersects `mask`.
    pub fn states_with_any(&self, mask: LabelSet) -> Vec<bool> {
        self.labels.iter().map(|&l| l & mask != 0).collect()
    }
}

/// Bitmask of the named propositions within `props`.
pub fn prop_mask_of<S: AsRef<str>>(props: &[String], names: &[S]) -> Result<LabelSet> {
    let mut mask = 0;
    for name in names {
        let name = name.as_ref();
        let idx = props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::UnknownProposition(name.to_string()))?;
        mask |= 1 << idx;
    }
    Ok(mask)
}

/// A finite labeled MDP with every action enabled in every state.
///
/// Transition rows are stored sparsely per `(state, action)` and sorted by
/// successor. Unavailable actions are modeled by the caller, usually with an
/// explicit dead state or by duplicating an available action.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<R = f64> {
    num_states: usize,
    num_actions: usize,
    initial: usize,
    propositions: Vec<String>,
    action_names: Vec<String>,
    labels: Vec<LabelSet>,
    rows: Vec<Vec<(usize, R)>>,
}

/// One failed invariant of an [`Mdp`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { state: usize, action: usize, sum: f64 },
    ProbabilityRange { state: usize, action: usize, to: usize, prob: f64 },
    SuccessorOutOfRange { state: usize, action: usize, to: usize },
    InitialOutOfRange { initial: usize },
    NoActions,
    TooManyPropositions { count: usize },
    LabelOutOfRange { state: usize },
    TableShape { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "row ({state}, {action}) sums to {sum}")
            }
            Violation::ProbabilityRange { state, action, to, prob } => {
                write!(f, "P({state}, {action}, {to}) = {prob} is outside [0, 1]")
            }
            Violation::SuccessorOutOfRange { state, action, to } => {
                write!(f, "row ({state}, {action}) names successor {to} out of range")
            }
            Violation::InitialOutOfRange { initial } => {
                write!(f, "initial state {initial} out of range")
            }
            Violation::NoActions => write!(f, "MDP has no actions"),
            Violation::TooManyPropositions { count } => {
                write!(f, "{count} propositions exceed the limit of {MAX_PROPOSITIONS}")
            }
            Violation::LabelOutOfRange { state } => {
                write!(f, "label of state {state} uses an undeclared proposition")
            }
            Violation::TableShape { expected, found } => {
                write!(f, "transition table has {found} rows, expected {expected}")
            }
        }
    }
}

impl<R: Real> Mdp<R> {
    /// Builds and validates an MDP. `rows[s * num_actions + a]` lists the
    /// successors of `(s, a)`; duplicate successors are summed and zero
    /// entries dropped.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        initial: usize,
        propositions: Vec<String>,
        labels: Vec<LabelSet>,
        rows: Vec<Vec<(usize, R)>>,
    ) -> Result<Self> {
        let mdp = Self::from_parts_unchecked(num_states, num_actions, initial, propositions, labels, rows);
        let violations = validate_mdp(&mdp);
        if !violations.is_empty() {
            return Err(Error::InvalidMdp(violations));
        }
        Ok(mdp.normalized())
    }

    /// Assembles an MDP without checking any invariant. Use [`validate_mdp`]
    /// to inspect the result.
    pub fn from_parts_unchecked(
        num_states: usize,
        num_actions: usize,
        initial: usize,
        propositions: Vec<String>,
        mut labels: Vec<LabelSet>,
        rows: Vec<Vec<(usize, R)>>,
    ) -> Self {
        labels.resize(num_states, 0);
        let action_names = (0..num_actions).map(|a| format!("a{}", a + 1)).collect();
        Self {
            num_states,
            num_actions,
            initial,
            propositions,
            action_names,
            labels,
            rows,
        }
    }

    fn normalized(mut self) -> Self {
        for row in &mut self.rows {
            row.sort_by_key(|&(s, _)| s);
            let mut merged: Vec<(usize, R)> = Vec::with_capacity(row.len());
            for &(s, p) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == s => last.1 = last.1 + p,
                    _ => merged.push((s, p)),
                }
            }
            merged.retain(|&(_, p)| p > R::zero());
            *row = merged;
        }
        self
    }

    pub fn with_action_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.num_actions, "one name per action");
        self.action_names = names;
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn propositions(&self) -> &[String] {
        &self.propositions
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn label(&self, s: usize) -> LabelSet {
        self.labels[s]
    }

    pub fn labels(&self) -> &[LabelSet] {
        &self.labels
    }

    /// Successors of `(s, a)` with positive probability.
    pub fn row(&self, s: usize, a: usize) -> &[(usize, R)] {
        &self.rows[s * self.num_actions + a]
    }

    pub fn rows(&self) -> &[Vec<(usize, R)>] {
        &self.rows
    }

    pub fn prob(&self, s: usize, a: usize, to: usize) -> R {
        self.row(s, a)
            .iter()
            .find(|&&(t, _)| t == to)
            .map_or(R::zero(), |&(_, p)| p)
    }

    pub fn shape(&self) -> MdpShape {
        MdpShape {
            num_states: self.num_states,
            num_actions: self.num_actions,
            initial: self.initial,
            propositions: self.propositions.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn prop_mask<S: AsRef<str>>(&self, names: &[S]) -> Result<LabelSet> {
        prop_mask_of(&self.propositions, names)
    }

    /// States whose label intersects `mask`.
    pub fn states_with_any(&self, mask: LabelSet) -> Vec<bool> {
        self.labels.iter().map(|&l| l & mask != 0).collect()
    }

    /// Successor graph over all actions.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.num_states)
            .map(|s| {
                let mut succ: Vec<usize> = (0..self.num_actions)
                    .flat_map(|a| self.row(s, a).iter().filter(|e| e.1 > R::zero()).map(|e| e.0))
                    .collect();
                succ.sort_unstable();
                succ.dedup();
                succ
            })
            .collect()
    }

    /// Same MDP with a different transition table (used for δ-close variants).
    pub fn with_rows(&self, rows: Vec<Vec<(usize, R)>>) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.initial,
            self.propositions.clone(),
            self.labels.clone(),
            rows,
        )
        .map(|m| m.with_action_names(self.action_names.clone()))
    }

    /// Largest entrywise difference between the transition functions of two
    /// MDPs of the same shape.
    pub fn max_abs_difference(&self, other: &Self) -> R {
        assert_eq!(self.shape(), other.shape(), "MDPs must share their shape");
        let mut worst = R::zero();
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for t in 0..self.num_states {
                    worst = worst.max((self.prob(s, a, t) - other.prob(s, a, t)).abs());
                }
            }
        }
        worst
    }

    pub fn check_action(&self, a: usize) -> Result<()> {
        if a < self.num_actions {
            Ok(())
        } else {
            Err(Error::ActionOutOfRange { action: a, num_actions: self.num_actions })
        }
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.num_states {
            Ok(())
        } else {
            Err(Error::StateOutOfRange { state: s, num_states: self.num_states })
        }
    }
}

/// Checks every [`Mdp`] invariant; violations are returned as data.
pub fn validate_mdp<R: Real>(mdp: &Mdp<R>) -> Vec<Violation> {
    let mut out = Vec::new();
    if mdp.num_actions == 0 {
        out.push(Violation::NoActions);
    }
    if mdp.initial >= mdp.num_states {
        out.push(Violation::InitialOutOfRange { initial: mdp.initial });
    }
    if mdp.propositions.len() > MAX_PROPOSITIONS {
        out.push(Violation::TooManyPropositions { count: mdp.propositions.len() });
    } else {
        let allowed: LabelSet = if mdp.propositions.len() == 64 {
            u64::MAX
        } else {
            (1u64 << mdp.propositions.len()) - 1
        };
        for (s, &l) in mdp.labels.iter().enumerate() {
            if l & !allowed != 0 {
                out.push(Violation::LabelOutOfRange { state: s });
            }
        }
    }
    let expected = mdp.num_states * mdp.num_actions;
    if mdp.rows.len() != expected {
        out.push(Violation::TableShape { expected, found: mdp.rows.len() });
        return out;
    }
    let tol = R::stochastic_tol();
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let mut sum = R::zero();
            for &(to, p) in mdp.row(s, a) {
                if to >= mdp.num_states {
                    out.push(Violation::SuccessorOutOfRange { state: s, action: a, to });
                }
                if !(p >= R::zero() && p <= R::one()) {
                    out.push(Violation::ProbabilityRange { state: s, action: a, to, prob: p.as_f64() });
                }
                sum = sum + p;
            }
            if (sum - R::one()).abs() > tol {
                out.push(Violation::RowSum { state: s, action: a, sum: sum.as_f64() });
            }
        }
    }
    out
}

/// Incremental construction of an [`Mdp`].
#[derive(Debug, Clone)]
pub struct MdpBuilder<R = f64> {
    num_states: usize,
    num_actions: usize,
    initial: usize,
    propositions: Vec<String>,
    labels: Vec<LabelSet>,
    rows: Vec<Vec<(usize, R)>>,
    action_names: Option<Vec<String>>,
}

impl<R: Real> MdpBuilder<R> {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            initial: 0,
            propositions: Vec::new(),
            labels: vec![0; num_states],
            rows: vec![Vec::new(); num_states * num_actions],
            action_names: None,
        }
    }

    pub fn initial(mut self, s: usize) -> Self {
        self.initial = s;
        self
    }

    pub fn propositions<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.propositions = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn action_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.action_names = Some(names.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    /// Marks proposition `prop` (by name) true in state `s`.
    ///
    /// # Panics
    /// If `prop` was not declared.
    pub fn label(mut self, s: usize, prop: &str) -> Self {
        let mask = prop_mask_of(&self.propositions, &[prop]).expect("declared proposition");
        self.labels[s] |= mask;
        self
    }

    pub fn label_mask(mut self, s: usize, mask: LabelSet) -> Self {
        self.labels[s] = mask;
        self
    }

    pub fn transition(mut self, s: usize, a: usize, to: usize, p: R) -> Self {
        self.rows[s * self.num_actions + a].push((to, p));
        self
    }

    /// Adds `s -a-> to` with probability `p` for every action `a`.
    pub fn transition_all(mut self, s: usize, to: usize, p: R) -> Self {
        for a in 0..self.num_actions {
            self.rows[s * self.num_actions + a].push((to, p));
        }
        self
    }

    pub fn build(self) -> Result<Mdp<R>> {
        let names = self.action_names;
        let mdp = Mdp::new(
            self.num_states,
            self.num_actions,
            self.initial,
            self.propositions,
            self.labels,
            self.rows,
        )?;
        Ok(match names {
            Some(n) => mdp.with_action_names(n),
            None => mdp,
        })
    }

    pub fn build_unchecked(self) -> Mdp<R> {
        Mdp::from_parts_unchecked(
            self.num_states,
            self.num_actions,
            self.initial,
            self.propositions,
            self.labels,
            self.rows,
        )
    }
}

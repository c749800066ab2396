use serde::{Deserialize, Serialize};

use super::{Mdp, Run};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A positional (memoryless) policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "R: Serialize", deserialize = "R: serde::de::DeserializeOwned"))]
pub struct PositionalPolicy<R = f64> {
    num_actions: usize,
    choice: Vec<Vec<R>>,
    deterministic: bool,
}

impl<R: Real> PositionalPolicy<R> {
    /// Builds a policy from per-state action distributions.
    pub fn from_rows(num_actions: usize, choice: Vec<Vec<R>>) -> Result<Self> {
        let tol = R::stochastic_tol();
        for (s, row) in choice.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::InvalidPolicy(format!(
                    "state {s} has {} entries, expected {num_actions}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(p >= R::zero() && p <= R::one())) {
                return Err(Error::InvalidPolicy(format!("state {s} has an entry outside [0, 1]")));
            }
            let sum: R = row.iter().copied().sum();
            if (sum - R::one()).abs() > tol {
                return Err(Error::InvalidPolicy(format!("state {s} sums to {sum}")));
            }
        }
        let deterministic = choice.iter().all(|row| row.iter().all(|&p| p == R::zero() || p == R::one()));
        Ok(Self { num_actions, choice, deterministic })
    }

    /// Deterministic policy playing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let choice = actions
            .iter()
            .map(|&a| {
                assert!(a < num_actions, "action {a} out of range");
                let mut row = vec![R::zero(); num_actions];
                row[a] = R::one();
                row
            })
            .collect();
        Self { num_actions, choice, deterministic: true }
    }

    pub fn constant(num_states: usize, num_actions: usize, action: usize) -> Self {
        Self::deterministic(num_actions, &vec![action; num_states])
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = R::one() / R::lit(num_actions as f64);
        Self {
            num_actions,
            choice: vec![vec![p; num_actions]; num_states],
            deterministic: num_actions == 1,
        }
    }

    pub fn num_states(&self) -> usize {
        self.choice.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn row(&self, s: usize) -> &[R] {
        &self.choice[s]
    }

    pub fn prob(&self, s: usize, a: usize) -> R {
        self.choice[s][a]
    }

    /// The chosen action, for deterministic policies.
    pub fn action(&self, s: usize) -> Option<usize> {
        if !self.deterministic {
            return None;
        }
        self.choice[s].iter().position(|&p| p == R::one())
    }

    /// Deterministic action table, if the policy is deterministic.
    pub fn actions(&self) -> Option<Vec<usize>> {
        (0..self.num_states()).map(|s| self.action(s)).collect()
    }

    /// Views the policy as a finite-memory policy with a single memory state.
    pub fn to_finite_memory(&self) -> FiniteMemoryPolicy<R> {
        FiniteMemoryPolicy {
            memory_size: 1,
            initial_memory: 0,
            num_states: self.num_states(),
            num_actions: self.num_actions,
            update: vec![0; self.num_actions * self.num_states()],
            act: self.choice.clone(),
        }
    }
}

/// A policy realized by a finite automaton over observations.
///
/// After playing action `a` and observing the successor `s'`, the memory
/// moves from `m` to `update(m, a, s')`. The action distribution in state `s`
/// is `act(m, s)`. Observing the action lets a policy map reconstruct
/// abstract-state evolutions whose tracking depends on the abstract action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "R: Serialize", deserialize = "R: serde::de::DeserializeOwned"))]
pub struct FiniteMemoryPolicy<R = f64> {
    memory_size: usize,
    initial_memory: usize,
    num_states: usize,
    num_actions: usize,
    /// `update[(m * num_actions + a) * num_states + s']`
    update: Vec<usize>,
    /// `act[m * num_states + s][a]`
    act: Vec<Vec<R>>,
}

impl<R: Real> FiniteMemoryPolicy<R> {
    pub fn new(
        memory_size: usize,
        initial_memory: usize,
        num_states: usize,
        num_actions: usize,
        update: Vec<usize>,
        act: Vec<Vec<R>>,
    ) -> Result<Self> {
        let policy = Self { memory_size, initial_memory, num_states, num_actions, update, act };
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<()> {
        if self.initial_memory >= self.memory_size {
            return Err(Error::InvalidPolicy("initial memory out of range".into()));
        }
        if self.update.len() != self.memory_size * self.num_actions * self.num_states {
            return Err(Error::InvalidPolicy("update table has the wrong size".into()));
        }
        if self.update.iter().any(|&m| m >= self.memory_size) {
            return Err(Error::InvalidPolicy("update leaves the memory set".into()));
        }
        if self.act.len() != self.memory_size * self.num_states {
            return Err(Error::InvalidPolicy("action table has the wrong size".into()));
        }
        let tol = R::stochastic_tol();
        for (i, row) in self.act.iter().enumerate() {
            let sum: R = row.iter().copied().sum();
            if row.len() != self.num_actions
                || row.iter().any(|&p| !(p >= R::zero() && p <= R::one()))
                || (sum - R::one()).abs() > tol
            {
                return Err(Error::InvalidPolicy(format!(
                    "action row for memory {} and state {} is not a distribution",
                    i / self.num_states,
                    i % self.num_states
                )));
            }
        }
        Ok(())
    }

    pub fn memory_size(&self) -> usize {
        self.memory_size
    }

    pub fn initial_memory(&self) -> usize {
        self.initial_memory
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn next_memory(&self, m: usize, a: usize, next: usize) -> usize {
        self.update[(m * self.num_actions + a) * self.num_states + next]
    }

    pub fn act(&self, m: usize, s: usize) -> &[R] {
        &self.act[m * self.num_states + s]
    }

    /// Memory state reached after reading the run, or `None` if the run is
    /// not well formed for this policy.
    pub fn memory_after(&self, run: &Run) -> Option<usize> {
        let mut m = self.initial_memory;
        for &(a, next) in &run.steps {
            if a >= self.num_actions || next >= self.num_states {
                return None;
            }
            m = self.next_memory(m, a, next);
        }
        Some(m)
    }
}

impl<R: Real> From<&PositionalPolicy<R>> for FiniteMemoryPolicy<R> {
    fn from(p: &PositionalPolicy<R>) -> Self {
        p.to_finite_memory()
    }
}

/// Probability of the cylinder set of `run` under `policy`.
pub fn cylinder_prob<R: Real>(mdp: &Mdp<R>, policy: &FiniteMemoryPolicy<R>, run: &Run) -> R {
    if run.start != mdp.initial() {
        return R::zero();
    }
    let mut prob = R::one();
    let mut m = policy.initial_memory();
    let mut s = run.start;
    for &(a, next) in &run.steps {
        if a >= mdp.num_actions() || next >= mdp.num_states() {
            return R::zero();
        }
        prob = prob * policy.act(m, s)[a] * mdp.prob(s, a, next);
        if prob == R::zero() {
            return prob;
        }
        m = policy.next_memory(m, a, next);
        s = next;
    }
    prob
}

/// Enumerates every deterministic positional policy in mixed-radix order;
/// state 0 varies fastest. States not marked relevant always play action 0.
#[derive(Debug, Clone)]
pub struct DeterministicPolicies {
    num_actions: usize,
    relevant: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl DeterministicPolicies {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self::over(num_states, num_actions, &vec![true; num_states])
    }

    pub fn over(num_states: usize, num_actions: usize, relevant: &[bool]) -> Self {
        Self {
            num_actions,
            relevant: (0..num_states).filter(|&s| relevant[s]).collect(),
            current: vec![0; num_states],
            done: num_actions == 0,
        }
    }

    /// Number of policies the iterator yields, saturating at `u64::MAX`.
    pub fn count(num_actions: usize, relevant_states: usize) -> u64 {
        (num_actions as u64).checked_pow(relevant_states as u32).unwrap_or(u64::MAX)
    }
}

impl Iterator for DeterministicPolicies {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.done = true;
        for &s in &self.relevant {
            self.current[s] += 1;
            if self.current[s] < self.num_actions {
                self.done = false;
                break;
            }
            self.current[s] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;

    #[test]
    fn enumeration_covers_all_policies() {
        let all: Vec<_> = DeterministicPolicies::new(3, 2).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0], vec![0, 0, 0]);
        assert_eq!(all[1], vec![1, 0, 0]);
        let partial: Vec<_> = DeterministicPolicies::over(3, 3, &[false, true, false]).collect();
        assert_eq!(partial, vec![vec![0, 0, 0], vec![0, 1, 0], vec![0, 2, 0]]);
    }

    #[test]
    fn rows_must_be_distributions() {
        assert!(PositionalPolicy::<f64>::from_rows(2, vec![vec![0.5, 0.4]]).is_err());
        let p = PositionalPolicy::<f64>::from_rows(2, vec![vec![0.0, 1.0]]).unwrap();
        assert!(p.is_deterministic());
        assert_eq!(p.action(0), Some(1));
    }

    #[test]
    fn cylinder_probability() {
        let mdp = MdpBuilder::<f64>::new(2, 1)
            .transition(0, 0, 1, 0.5)
            .transition(0, 0, 0, 0.5)
            .transition(1, 0, 1, 1.0)
            .build()
            .unwrap();
        let pol = PositionalPolicy::constant(2, 1, 0).to_finite_memory();
        assert_eq!(cylinder_prob(&mdp, &pol, &Run::new(0)), 1.0);
        assert_eq!(cylinder_prob(&mdp, &pol, &Run::new(1)), 0.0);
        let run = Run::new(0).then(0, 0).then(0, 1);
        assert!((cylinder_prob(&mdp, &pol, &run) - 0.25).abs() < 1e-15);
    }
}

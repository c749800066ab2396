use serde::{Deserialize, Serialize};

use super::Mdp;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A finite run `s0 a0 s1 a1 ... sn`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Run {
    pub start: usize,
    pub steps: Vec<(usize, usize)>,
}

impl Run {
    pub fn new(start: usize) -> Self {
        Self { start, steps: Vec::new() }
    }

    /// Appends one `(action, next_state)` step.
    pub fn then(mut self, action: usize, next: usize) -> Self {
        self.steps.push((action, next));
        self
    }

    pub fn push(&mut self, action: usize, next: usize) {
        self.steps.push((action, next));
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> usize {
        self.steps.last().map_or(self.start, |&(_, s)| s)
    }

    /// Visited states, `len() + 1` of them.
    pub fn states(&self) -> Vec<usize> {
        std::iter::once(self.start).chain(self.steps.iter().map(|&(_, s)| s)).collect()
    }

    /// Transitions as `(s, a, s')` triples.
    pub fn transitions(&self) -> Vec<(usize, usize, usize)> {
        let mut s = self.start;
        self.steps
            .iter()
            .map(|&(a, next)| {
                let t = (s, a, next);
                s = next;
                t
            })
            .collect()
    }

    /// Checks that every index is in range for `mdp`.
    pub fn check<R: Real>(&self, mdp: &Mdp<R>) -> Result<()> {
        mdp.check_state(self.start)?;
        for &(a, s) in &self.steps {
            mdp.check_action(a)?;
            mdp.check_state(s)?;
        }
        Ok(())
    }
}

/// An ultimately periodic run `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoRun {
    pub prefix: Run,
    pub cycle: Run,
}

impl LassoRun {
    pub fn new(prefix: Run, cycle: Run) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::InvalidParameter("lasso cycle must be nonempty".into()));
        }
        if prefix.last() != cycle.start {
            return Err(Error::InvalidParameter(
                "lasso prefix must end where the cycle starts".into(),
            ));
        }
        if cycle.last() != cycle.start {
            return Err(Error::InvalidParameter("lasso cycle must be closed".into()));
        }
        Ok(Self { prefix, cycle })
    }

    /// The first `n` transitions of the infinite run.
    pub fn unroll(&self, n: usize) -> Run {
        let mut run = Run::new(self.prefix.start);
        let tail = self.prefix.steps.iter().chain(self.cycle.steps.iter().cycle());
        for &(a, s) in tail.take(n) {
            run.push(a, s);
        }
        run
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lasso_shape_is_checked() {
        let prefix = Run::new(0).then(0, 1);
        assert!(LassoRun::new(prefix.clone(), Run::new(1).then(0, 1)).is_ok());
        assert!(LassoRun::new(prefix.clone(), Run::new(2).then(0, 2)).is_err());
        assert!(LassoRun::new(prefix.clone(), Run::new(1).then(0, 2)).is_err());
        assert!(LassoRun::new(prefix, Run::new(1)).is_err());
    }

    #[test]
    fn unroll_repeats_the_cycle() {
        let lasso = LassoRun::new(Run::new(0).then(1, 1), Run::new(1).then(0, 2).then(0, 1)).unwrap();
        assert_eq!(lasso.unroll(4).states(), vec![0, 1, 2, 1, 2]);
        assert_eq!(lasso.unroll(2).transitions(), vec![(0, 1, 1), (1, 0, 2)]);
    }
}

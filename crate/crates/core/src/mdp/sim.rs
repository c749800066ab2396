use rand::Rng;

use super::Mdp;
use crate::error::Result;
use crate::rng::{seeded, SeededRng};
use crate::scalar::Real;

/// Black-box access to an MDP: the current state is observable, transition
/// probabilities are not.
pub trait Simulator {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// The current state.
    fn state(&self) -> usize;
    /// Returns to the initial state.
    fn reset(&mut self);
    /// Samples a successor of the current state under `action`, moves there
    /// and returns it.
    fn step(&mut self, action: usize) -> Result<usize>;
}

impl<S: Simulator + ?Sized> Simulator for Box<S> {
    fn num_states(&self) -> usize {
        (**self).num_states()
    }
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn state(&self) -> usize {
        (**self).state()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
    fn step(&mut self, action: usize) -> Result<usize> {
        (**self).step(action)
    }
}

/// Simulator backed by a known [`Mdp`].
///
/// Each step draws one uniform number `u` and returns the first successor
/// (in index order) whose cumulative probability exceeds `u`. Two simulators
/// with the same seed therefore see the same uniform sequence, which couples
/// runs on MDPs of the same shape.
#[derive(Debug, Clone)]
pub struct MdpSimulator<'a, R = f64> {
    mdp: &'a Mdp<R>,
    state: usize,
    rng: SeededRng,
}

impl<'a, R: Real> MdpSimulator<'a, R> {
    pub fn new(mdp: &'a Mdp<R>, seed: u64) -> Self {
        Self { mdp, state: mdp.initial(), rng: seeded(seed) }
    }

    pub fn mdp(&self) -> &'a Mdp<R> {
        self.mdp
    }
}

impl<R: Real> Simulator for MdpSimulator<'_, R> {
    fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn state(&self) -> usize {
        self.state
    }

    fn reset(&mut self) {
        self.state = self.mdp.initial();
    }

    fn step(&mut self, action: usize) -> Result<usize> {
        self.mdp.check_action(action)?;
        let u: f64 = self.rng.gen();
        let row = self.mdp.row(self.state, action);
        let mut acc = 0.0;
        let mut next = row.last().map_or(self.state, |e| e.0);
        for &(to, p) in row {
            acc += p.as_f64();
            if u < acc {
                next = to;
                break;
            }
        }
        self.state = next;
        Ok(next)
    }
}

/// Wraps a simulator and counts the steps and resets issued through it.
#[derive(Debug, Clone)]
pub struct CountingSimulator<S> {
    inner: S,
    steps: usize,
    resets: usize,
}

impl<S: Simulator> CountingSimulator<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, steps: 0, resets: 0 }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: Simulator> Simulator for CountingSimulator<S> {
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn state(&self) -> usize {
        self.inner.state()
    }

    fn reset(&mut self) {
        self.resets += 1;
        self.inner.reset()
    }

    fn step(&mut self, action: usize) -> Result<usize> {
        let next = self.inner.step(action)?;
        self.steps += 1;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mdp::MdpBuilder;

    #[test]
    fn reset_and_range_checks() {
        let mdp = MdpBuilder::<f64>::new(2, 1)
            .transition(0, 0, 1, 1.0)
            .transition(1, 0, 1, 1.0)
            .build()
            .unwrap();
        let mut sim = MdpSimulator::new(&mdp, 3);
        assert_eq!(sim.step(0).unwrap(), 1);
        assert!(matches!(sim.step(1), Err(Error::ActionOutOfRange { .. })));
        sim.reset();
        assert_eq!(sim.state(), 0);
    }

    #[test]
    fn frequencies_match_probabilities() {
        let mdp = MdpBuilder::<f64>::new(3, 1)
            .transition(0, 0, 1, 0.3)
            .transition(0, 0, 2, 0.7)
            .transition_all(1, 1, 1.0)
            .transition_all(2, 2, 1.0)
            .build()
            .unwrap();
        let mut sim = MdpSimulator::new(&mdp, 11);
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            sim.reset();
            if sim.step(0).unwrap() == 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let bound = 3.0 * (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.3).abs() <= bound, "{freq}");
    }
}

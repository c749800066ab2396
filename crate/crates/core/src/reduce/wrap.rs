use rand::Rng;

use super::descriptor::{validate_reduction, ReductionDescriptor};
use crate::error::{Error, Result};
use crate::mdp::{MdpShape, Simulator};
use crate::rng::{seeded, SeededRng};
use crate::scalar::Real;

/// Simulator of the reduced MDP built on top of a simulator of the original
/// one, without access to its transition probabilities.
#[derive(Debug, Clone)]
pub struct WrappedSimulator<'a, S, R = f64> {
    rd: &'a ReductionDescriptor<R>,
    inner: S,
    state: usize,
    rng: SeededRng,
}

/// Wraps `inner`, an unstarted or running simulator of an MDP with shape
/// `shape`. The wrapper starts from a reset.
pub fn wrap_simulator<'a, S: Simulator, R: Real>(
    rd: &'a ReductionDescriptor<R>,
    shape: &MdpShape,
    inner: S,
    seed: u64,
) -> Result<WrappedSimulator<'a, S, R>> {
    let violations = validate_reduction(rd, shape);
    if !violations.is_empty() {
        return Err(Error::InvalidReduction(violations));
    }
    if inner.num_states() != shape.num_states || inner.num_actions() != shape.num_actions {
        return Err(Error::InvalidParameter("inner simulator does not match the descriptor's base shape".into()));
    }
    let mut w = WrappedSimulator { rd, inner, state: rd.initial, rng: seeded(seed) };
    w.reset();
    Ok(w)
}

impl<S: Simulator, R: Real> WrappedSimulator<'_, S, R> {
    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn into_inner(self) -> S {
        self.inner
    }

    fn pick<T: Copy>(&mut self, items: &[(T, R)], total: f64) -> Option<T> {
        let u = self.rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for &(t, w) in items {
            let w = w.as_f64();
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(t);
            if u < acc {
                return Some(t);
            }
        }
        last
    }
}

impl<S: Simulator, R: Real> Simulator for WrappedSimulator<'_, S, R> {
    fn num_states(&self) -> usize {
        self.rd.num_states
    }

    fn num_actions(&self) -> usize {
        self.rd.num_actions
    }

    fn state(&self) -> usize {
        self.state
    }

    fn reset(&mut self) {
        self.inner.reset();
        self.state = self.rd.initial;
    }

    fn step(&mut self, action: usize) -> Result<usize> {
        if action >= self.rd.num_actions {
            return Err(Error::ActionOutOfRange { action, num_actions: self.rd.num_actions });
        }
        let s = self.state;
        let rd = self.rd;
        let jump = rd.q1_row(s, action);
        let p = rd.q1_mass(s, action).as_f64();
        if p > 0.0 && self.rng.gen::<f64>() < p {
            let next = self
                .pick(jump, p)
                .ok_or_else(|| Error::DescriptorCorruption(format!("empty q1 row at ({s}, {action})")))?;
            self.state = next;
            return Ok(next);
        }
        let alpha: Vec<(usize, R)> = rd.alpha_row(s, action).iter().copied().enumerate().collect();
        let a = self
            .pick(&alpha, 1.0)
            .ok_or_else(|| Error::DescriptorCorruption(format!("empty alpha row at ({s}, {action})")))?;
        let base_next = self.inner.step(a)?;
        let fiber: Vec<(usize, R)> =
            rd.q2_row(s, action, a).iter().copied().filter(|&(t, _)| rd.beta[t] == base_next).collect();
        let mass: f64 = fiber.iter().map(|e| e.1.as_f64()).sum();
        let next = self.pick(&fiber, mass).ok_or_else(|| {
            Error::DescriptorCorruption(format!("q2({s}, {action}, {a}, ·) has no mass on the fiber of {base_next}"))
        })?;
        self.state = next;
        Ok(next)
    }
}

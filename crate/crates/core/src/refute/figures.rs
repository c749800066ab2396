use crate::error::{Error, Result};
use crate::mdp::{Mdp, MdpBuilder};

fn check_probabilities(ps: &[f64]) -> Result<()> {
    if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter(format!("probabilities must lie in [0, 1], got {ps:?}")));
    }
    Ok(())
}

fn builder(n: usize) -> MdpBuilder<f64> {
    MdpBuilder::new(n, 2).propositions(&["b"]).action_names(&["a1", "a2"])
}

/// Reachability counterexample: `b` holds at `s1` only; `s0 -a1-> s1 (p1) | s3`,
/// `s0 -a2-> s2 (p2) | s3`, `s2 -> s2 (p3) | s1`, with `s1` and `s3`
/// absorbing. Outside `s0` both actions behave alike.
pub fn fig1_mdp(p1: f64, p2: f64, p3: f64) -> Result<Mdp<f64>> {
    check_probabilities(&[p1, p2, p3])?;
    builder(4)
        .label(1, "b")
        .transition(0, 0, 1, p1)
        .transition(0, 0, 3, 1.0 - p1)
        .transition(0, 1, 2, p2)
        .transition(0, 1, 3, 1.0 - p2)
        .transition_all(1, 1, 1.0)
        .transition_all(2, 2, p3)
        .transition_all(2, 1, 1.0 - p3)
        .transition_all(3, 3, 1.0)
        .build()
}

/// Non-robust safety: `b` at `s0` and `s2`; `s0 -a1-> s0 (p1) | s1`,
/// `s0 -a2-> s1 (p2) | s2`, with `s1` and `s2` absorbing.
pub fn fig3_mdp(p1: f64, p2: f64) -> Result<Mdp<f64>> {
    check_probabilities(&[p1, p2])?;
    builder(3)
        .label(0, "b")
        .label(2, "b")
        .transition(0, 0, 0, p1)
        .transition(0, 0, 1, 1.0 - p1)
        .transition(0, 1, 1, p2)
        .transition(0, 1, 2, 1.0 - p2)
        .transition_all(1, 1, 1.0)
        .transition_all(2, 2, 1.0)
        .build()
}

/// The PAC family: `b` at `s0` and `s2`; `s0 -a1-> s0 (p1) | s1`,
/// `s0 -a2-> s2`, `s2 -> s2 (p2) | s1`, with `s1` absorbing.
pub fn fig4_mdp(p1: f64, p2: f64) -> Result<Mdp<f64>> {
    check_probabilities(&[p1, p2])?;
    builder(3)
        .label(0, "b")
        .label(2, "b")
        .transition(0, 0, 0, p1)
        .transition(0, 0, 1, 1.0 - p1)
        .transition(0, 1, 2, 1.0)
        .transition_all(1, 1, 1.0)
        .transition_all(2, 2, p2)
        .transition_all(2, 1, 1.0 - p2)
        .build()
}

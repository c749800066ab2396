//! Discounted reward machines cannot encode reachability: for every
//! normalized machine and discount, transition probabilities on the
//! reachability counterexample MDP make an optimal policy for the machine
//! reach-suboptimal.

use super::figures::fig1_mdp;
use super::report::ExperimentReport;
use crate::error::{Error, Result};
use crate::mdp::{Discount, LassoRun, PositionalPolicy, Run};
use crate::spec::{rm_return, spec_value, ReturnMode, RewardMachine, Specification};

/// Tolerance for the optimality comparisons in the verification.
const VERIFY_TOL: f64 = 1e-9;

/// Result of [`synthesize_thm1_counterexample`].
#[derive(Debug, Clone, PartialEq)]
pub struct Thm1Witness {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Return gap between the `a1` and `a2` runs at `p1 = p2 = p3 = 1`.
    pub epsilon: f64,
    /// `None` for the immediate witness (`epsilon ≤ 0`).
    pub horizon: Option<u32>,
    /// Exact machine values of the two policies.
    pub value_pi1: f64,
    pub value_pi2: f64,
    /// Exact reachability values of the two policies.
    pub reach_pi1: f64,
    pub reach_pi2: f64,
    /// Index (1 or 2) of the machine-optimal, reach-suboptimal policy.
    pub violating_policy: u8,
    pub verified: bool,
}

/// `π1` plays `a1` everywhere; `π2` plays `a2` at `s0` and `a1` elsewhere.
fn policies() -> [PositionalPolicy<f64>; 2] {
    [PositionalPolicy::deterministic(2, &[0, 0, 0, 0]), PositionalPolicy::deterministic(2, &[1, 0, 0, 0])]
}

/// Synthesizes `(p1, p2, p3)` following the counterexample construction and
/// verifies the outcome with exact product evaluation. In the figure only
/// `a1` is available outside `s0`, so optimality is judged between the two
/// policies that play `a1` there.
pub fn synthesize_thm1_counterexample(rm: &RewardMachine<f64>, gamma: f64) -> Result<(Thm1Witness, ExperimentReport)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter("gamma must lie in (0, 1)".into()));
    }
    rm.check_shape(4, 2)?;
    if !rm.is_normalized() {
        return Err(Error::InvalidMachine("the construction needs rewards in [0, 1]".into()));
    }
    let mode = ReturnMode::Discounted(Discount::Constant(gamma));
    let run1 = LassoRun::new(Run::new(0).then(0, 1), Run::new(1).then(0, 1))?;
    let run2 = LassoRun::new(Run::new(0).then(1, 2), Run::new(2).then(0, 2))?;
    let r1 = rm_return(rm, &run1, &mode)?;
    let r2 = rm_return(rm, &run2, &mode)?;
    let epsilon = r1 - r2;

    let (p1, p3, horizon) = if epsilon <= 0.0 {
        (1.0, 1.0, None)
    } else {
        let tail = |t: u32| gamma.powi(t as i32) / (1.0 - gamma);
        let t = (0..).find(|&t| tail(t) <= epsilon / 2.0).expect("geometric tail vanishes");
        // p3 solves 1 - p3^t = (ε/8)(1 - γ) exactly.
        let p3 = if t == 0 { 0.0 } else { (1.0 - epsilon / 8.0 * (1.0 - gamma)).powf(1.0 / t as f64) };
        let mut prefix = Run::new(0).then(1, 2);
        for _ in 0..t {
            prefix.push(0, 2);
        }
        let bound = rm_return(rm, &prefix, &mode)? + tail(t) + epsilon / 4.0;
        let p1 = (1..=52)
            .map(|k| 1.0 - 0.5f64.powi(k))
            .find(|&p1| p1 * r1 >= bound)
            .ok_or_else(|| Error::Unsupported("no grid value of p1 satisfies the bound".into()))?;
        (p1, p3, Some(t))
    };
    let p2 = 1.0;

    let mdp = fig1_mdp(p1, p2, p3)?;
    let machine = Specification::DiscountedRm { machine: rm.clone().into(), gamma: Discount::Constant(gamma) };
    let reach = Specification::reach(&["b"]);
    let [pi1, pi2] = policies();
    let value_pi1 = spec_value(&mdp, &machine, &pi1)?;
    let value_pi2 = spec_value(&mdp, &machine, &pi2)?;
    let reach_pi1 = spec_value(&mdp, &reach, &pi1)?;
    let reach_pi2 = spec_value(&mdp, &reach, &pi2)?;
    let best = value_pi1.max(value_pi2);
    let best_reach = reach_pi1.max(reach_pi2);
    let (violating_policy, verified) = if horizon.is_none() {
        // π2 is machine-optimal but never reaches b.
        (2, value_pi2 >= best - VERIFY_TOL && reach_pi2 < best_reach - VERIFY_TOL)
    } else {
        (
            1,
            value_pi1 >= best - VERIFY_TOL
                && (reach_pi1 - p1).abs() <= VERIFY_TOL
                && p1 < 1.0
                && (reach_pi2 - 1.0).abs() <= VERIFY_TOL,
        )
    };

    let witness = Thm1Witness {
        p1,
        p2,
        p3,
        epsilon,
        horizon,
        value_pi1,
        value_pi2,
        reach_pi1,
        reach_pi2,
        violating_policy,
        verified,
    };
    let mut report = ExperimentReport::new("thm1");
    report
        .param("gamma", gamma)
        .param("machine_states", rm.num_states() as u64)
        .quantity("epsilon", epsilon)
        .quantity("p1", p1)
        .quantity("p2", p2)
        .quantity("p3", p3)
        .quantity("horizon", horizon.map(u64::from))
        .quantity("machine_value_pi1", value_pi1)
        .quantity("machine_value_pi2", value_pi2)
        .quantity("reach_pi1", reach_pi1)
        .quantity("reach_pi2", reach_pi2)
        .quantity("violating_policy", violating_policy as u64);
    report.check("machine-optimal policy is reach-suboptimal", verified);
    Ok((witness, report))
}

/// Reward 1 on every transition entering a `b`-state (here `s1`), else 0.
pub fn canonical_reach_rm() -> RewardMachine<f64> {
    RewardMachine::new(1, 0, 4, 2, vec![0; 4], entering_b_rewards(), true).expect("well-formed machine")
}

fn entering_b_rewards() -> Vec<f64> {
    let mut r = vec![0.0; 4 * 2 * 4];
    for s in 0..4 {
        for a in 0..2 {
            r[(s * 2 + a) * 4 + 1] = 1.0;
        }
    }
    r
}

/// The same reward on every transition.
pub fn constant_rm(value: f64) -> Result<RewardMachine<f64>> {
    RewardMachine::new(1, 0, 4, 2, vec![0; 4], vec![value; 32], true)
}

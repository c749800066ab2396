use serde::{Deserialize, Serialize};

use super::{MarkovChain, Mdp, PositionalPolicy};
use crate::error::{Error, Result};
use crate::graph::backward_reachable;
use crate::scalar::Real;

/// Transition rewards `R(s, a, s')`, stored aligned with the successor rows
/// of the MDP they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable<R = f64> {
    num_actions: usize,
    rewards: Vec<Vec<R>>,
}

impl<R: Real> RewardTable<R> {
    pub fn from_fn(mdp: &Mdp<R>, mut f: impl FnMut(usize, usize, usize) -> R) -> Self {
        let m = mdp.num_actions();
        let rewards = mdp
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(t, _)| f(i / m, i % m, t)).collect())
            .collect();
        Self { num_actions: m, rewards }
    }

    pub fn zero(mdp: &Mdp<R>) -> Self {
        Self::from_fn(mdp, |_, _, _| R::zero())
    }

    /// Reward of the `k`-th successor entry of `(s, a)`.
    pub fn get(&self, s: usize, a: usize, k: usize) -> R {
        self.rewards[s * self.num_actions + a][k]
    }

    pub fn lookup(&self, mdp: &Mdp<R>, s: usize, a: usize, t: usize) -> R {
        mdp.row(s, a)
            .iter()
            .position(|e| e.0 == t)
            .map_or(R::zero(), |k| self.get(s, a, k))
    }

    /// `Σ_{s'} P(s, a, s') R(s, a, s')`.
    pub fn expected(&self, mdp: &Mdp<R>, s: usize, a: usize) -> R {
        mdp.row(s, a)
            .iter()
            .zip(&self.rewards[s * self.num_actions + a])
            .map(|(&(_, p), &r)| p * r)
            .sum()
    }

    fn check(&self, mdp: &Mdp<R>) {
        assert!(
            self.rewards.len() == mdp.rows().len()
                && self.rewards.iter().zip(mdp.rows()).all(|(r, row)| r.len() == row.len()),
            "reward table was built for a different MDP"
        );
    }

    fn policy_rewards(&self, mdp: &Mdp<R>, policy: &PositionalPolicy<R>) -> Vec<R> {
        (0..mdp.num_states())
            .map(|s| {
                (0..mdp.num_actions())
                    .filter(|&a| policy.prob(s, a) > R::zero())
                    .map(|a| policy.prob(s, a) * self.expected(mdp, s, a))
                    .sum()
            })
            .collect()
    }
}

/// Discount factor: constant, or one factor per state. A reward earned at
/// step `i` is weighted by the product of the discounts of the states
/// visited before step `i` completes, so `v(s) = r(s) + γ(s) Σ P v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Discount<R = f64> {
    Constant(R),
    PerState(Vec<R>),
}

impl<R: Real> Discount<R> {
    pub fn at(&self, s: usize) -> R {
        match self {
            Discount::Constant(g) => *g,
            Discount::PerState(v) => v[s],
        }
    }

    pub fn max(&self) -> R {
        match self {
            Discount::Constant(g) => *g,
            Discount::PerState(v) => v.iter().copied().fold(R::zero(), R::max),
        }
    }

    pub fn is_uniform(&self) -> bool {
        match self {
            Discount::Constant(_) => true,
            Discount::PerState(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Checks `γ(s) ∈ (0, 1)` for every state.
    pub fn validate(&self, num_states: usize) -> Result<()> {
        let ok = |g: R| g > R::zero() && g < R::one();
        match self {
            Discount::Constant(g) if ok(*g) => Ok(()),
            Discount::PerState(v) if v.len() == num_states && v.iter().all(|&g| ok(g)) => Ok(()),
            _ => Err(Error::InvalidParameter("discount factors must lie in (0, 1)".into())),
        }
    }
}

/// Exact discounted value of a positional policy, by direct elimination.
pub fn discounted_value<R: Real>(
    mdp: &Mdp<R>,
    reward: &RewardTable<R>,
    gamma: &Discount<R>,
    policy: &PositionalPolicy<R>,
) -> Result<Vec<R>> {
    gamma.validate(mdp.num_states())?;
    reward.check(mdp);
    let chain = MarkovChain::induced(mdp, policy);
    chain.discounted(&reward.policy_rewards(mdp, policy), |s| gamma.at(s))
}

/// Optimal discounted values and a greedy deterministic policy.
///
/// Iterates until the sup-norm change drops to `tol (1 - γmax) / (2 γmax)`,
/// which bounds the greedy policy's loss by `tol`. Ties go to the lowest
/// action index.
pub fn value_iteration_discounted<R: Real>(
    mdp: &Mdp<R>,
    reward: &RewardTable<R>,
    gamma: &Discount<R>,
    tol: R,
) -> Result<(Vec<R>, PositionalPolicy<R>)> {
    gamma.validate(mdp.num_states())?;
    reward.check(mdp);
    if !(tol > R::zero()) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let n = mdp.num_states();
    let m = mdp.num_actions();
    let gmax = gamma.max();
    let threshold = tol * (R::one() - gmax) / (R::lit(2.0) * gmax);
    let q = |v: &[R], s: usize, a: usize| -> R {
        let g = gamma.at(s);
        mdp.row(s, a)
            .iter()
            .enumerate()
            .map(|(k, &(t, p))| p * (reward.get(s, a, k) + g * v[t]))
            .sum()
    };
    let mut v = vec![R::zero(); n];
    loop {
        let next: Vec<R> = (0..n)
            .map(|s| (0..m).map(|a| q(&v, s, a)).fold(R::neg_infinity(), R::max))
            .collect();
        let change = next.iter().zip(&v).map(|(a, b)| (*a - *b).abs()).fold(R::zero(), R::max);
        v = next;
        if change <= threshold {
            break;
        }
    }
    let actions: Vec<usize> = (0..n)
        .map(|s| {
            let qs: Vec<R> = (0..m).map(|a| q(&v, s, a)).collect();
            let best = qs.iter().copied().fold(R::neg_infinity(), R::max);
            qs.iter().position(|&x| x >= best - R::tie_tol()).unwrap_or(0)
        })
        .collect();
    Ok((v, PositionalPolicy::deterministic(m, &actions)))
}

/// Optimal discounted values by value iteration followed by policy
/// iteration, so that the returned values are the exact values of the
/// returned policy. Ties go to the lowest action index.
pub fn optimal_discounted<R: Real>(
    mdp: &Mdp<R>,
    reward: &RewardTable<R>,
    gamma: &Discount<R>,
) -> Result<(Vec<R>, PositionalPolicy<R>)> {
    let (_, mut policy) = value_iteration_discounted(mdp, reward, gamma, R::lit(1e-6))?;
    let n = mdp.num_states();
    let m = mdp.num_actions();
    let mut actions = policy.actions().expect("greedy policy is deterministic");
    for _ in 0..1000 {
        let v = discounted_value(mdp, reward, gamma, &policy)?;
        let scale = v.iter().fold(R::one(), |acc, x| acc.max(x.abs()));
        let slack = R::tie_tol() * scale;
        let mut changed = false;
        for s in 0..n {
            let g = gamma.at(s);
            let qs: Vec<R> = (0..m)
                .map(|a| {
                    mdp.row(s, a)
                        .iter()
                        .enumerate()
                        .map(|(k, &(t, p))| p * (reward.get(s, a, k) + g * v[t]))
                        .sum()
                })
                .collect();
            let best = qs.iter().copied().fold(R::neg_infinity(), R::max);
            if qs[actions[s]] < best - slack {
                actions[s] = qs.iter().position(|&q| q >= best - slack).unwrap_or(0);
                changed = true;
            }
        }
        policy = PositionalPolicy::deterministic(m, &actions);
        if !changed {
            return Ok((v, policy));
        }
    }
    let v = discounted_value(mdp, reward, gamma, &policy)?;
    Ok((v, policy))
}

/// Successor graph restricted to edges leaving `allowed` states.
fn restricted_adjacency<R: Real>(mdp: &Mdp<R>, allowed: &[bool]) -> Vec<Vec<usize>> {
    let full = mdp.adjacency();
    full.into_iter()
        .enumerate()
        .map(|(s, succ)| if allowed[s] { succ } else { Vec::new() })
        .collect()
}

fn post_within<R: Real>(mdp: &Mdp<R>, s: usize, a: usize, set: &[bool]) -> bool {
    mdp.row(s, a).iter().all(|&(t, _)| set[t])
}

fn post_meets<R: Real>(mdp: &Mdp<R>, s: usize, a: usize, set: &[bool]) -> bool {
    mdp.row(s, a).iter().any(|&(t, _)| set[t])
}

/// States that can reach `target` with probability one while staying in
/// `allowed`, together with an attractor action for each of them.
fn prob1_region<R: Real>(
    mdp: &Mdp<R>,
    target: &[bool],
    allowed: &[bool],
    can_reach: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = mdp.num_states();
    let m = mdp.num_actions();
    let mut u = can_reach.to_vec();
    loop {
        let mut reached = target.to_vec();
        let mut choice = vec![None; n];
        loop {
            let mut newly = Vec::new();
            for s in 0..n {
                if reached[s] || !u[s] || !allowed[s] {
                    continue;
                }
                if let Some(a) =
                    (0..m).find(|&a| post_within(mdp, s, a, &u) && post_meets(mdp, s, a, &reached))
                {
                    newly.push((s, a));
                }
            }
            if newly.is_empty() {
                break;
            }
            for (s, a) in newly {
                reached[s] = true;
                choice[s] = Some(a);
            }
        }
        if reached == u {
            return (u, choice);
        }
        u = reached;
    }
}

/// Deterministic policy choosing, among the actions whose Q-value is within
/// `slack` of the best, the lowest one that makes progress toward `anchor`
/// along positive-probability edges of such actions.
fn progress_policy<R: Real>(
    mdp: &Mdp<R>,
    values: &[R],
    free: &[bool],
    anchor: &[bool],
    slack: R,
) -> Vec<Option<usize>> {
    let n = mdp.num_states();
    let m = mdp.num_actions();
    let optimal: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            if !free[s] {
                return Vec::new();
            }
            let qs: Vec<R> = (0..m).map(|a| q_value(mdp, values, s, a)).collect();
            let best = qs.iter().copied().fold(R::neg_infinity(), R::max);
            (0..m).filter(|&a| qs[a] >= best - slack).collect()
        })
        .collect();
    let mut ranked = anchor.to_vec();
    let mut choice = vec![None; n];
    loop {
        let mut newly = Vec::new();
        for s in 0..n {
            if ranked[s] || !free[s] {
                continue;
            }
            if let Some(&a) = optimal[s].iter().find(|&&a| post_meets(mdp, s, a, &ranked)) {
                newly.push((s, a));
            }
        }
        if newly.is_empty() {
            break;
        }
        for (s, a) in newly {
            ranked[s] = true;
            choice[s] = Some(a);
        }
    }
    for s in 0..n {
        if free[s] && choice[s].is_none() {
            choice[s] = optimal[s].first().copied();
        }
    }
    choice
}

fn q_value<R: Real>(mdp: &Mdp<R>, values: &[R], s: usize, a: usize) -> R {
    mdp.row(s, a).iter().map(|&(t, p)| p * values[t]).sum()
}

/// Maximal probability of reaching `target` while only passing through
/// `allowed` states (states outside both sets count as failure).
pub fn max_reach_avoid_prob<R: Real>(
    mdp: &Mdp<R>,
    target: &[bool],
    allowed: &[bool],
) -> Result<(Vec<R>, PositionalPolicy<R>)> {
    let n = mdp.num_states();
    let m = mdp.num_actions();
    assert!(target.len() == n && allowed.len() == n, "state set has wrong length");
    let open: Vec<bool> = (0..n).map(|s| allowed[s] && !target[s]).collect();
    let can_reach = backward_reachable(&restricted_adjacency(mdp, &open), target);
    let (sure, sure_choice) = prob1_region(mdp, target, &open, &can_reach);
    let free: Vec<bool> = (0..n).map(|s| can_reach[s] && !sure[s]).collect();

    let mut values: Vec<R> = (0..n).map(|s| if sure[s] { R::one() } else { R::zero() }).collect();
    if free.iter().any(|&f| f) {
        let threshold = R::lit(1e-12).max(R::epsilon() * R::lit(4.0));
        let mut iterations = 0usize;
        loop {
            let mut change = R::zero();
            for s in (0..n).filter(|&s| free[s]) {
                let best = (0..m).map(|a| q_value(mdp, &values, s, a)).fold(R::zero(), R::max);
                change = change.max((best - values[s]).abs());
                values[s] = best;
            }
            iterations += 1;
            if change <= threshold || iterations >= 1_000_000 {
                break;
            }
        }
    }

    // Extract a policy, evaluate it exactly and improve until no state can
    // gain by a one-step deviation.
    let slack = R::lit(1e-10).max(R::tie_tol());
    let mut actions = vec![0usize; n];
    for s in 0..n {
        if let Some(a) = sure_choice[s] {
            actions[s] = a;
        }
    }
    for _ in 0..100 {
        let choice = progress_policy(mdp, &values, &free, &sure, slack);
        for s in 0..n {
            if let Some(a) = choice[s] {
                actions[s] = a;
            }
        }
        let policy = PositionalPolicy::deterministic(m, &actions);
        let exact = MarkovChain::induced_on(mdp, &policy, &free).reach_probability(&sure)?;
        let mut next = values.clone();
        for s in (0..n).filter(|&s| free[s]) {
            next[s] = exact[s];
        }
        let improvable = (0..n).filter(|&s| free[s]).any(|s| {
            (0..m).any(|a| q_value(mdp, &next, s, a) > next[s] + R::tie_tol())
        });
        values = next;
        if !improvable {
            break;
        }
    }
    let values = values.into_iter().map(R::clamp01).collect();
    Ok((values, PositionalPolicy::deterministic(m, &actions)))
}

/// Maximal probability of eventually reaching `target`.
pub fn max_reach_prob<R: Real>(mdp: &Mdp<R>, target: &[bool]) -> Result<(Vec<R>, PositionalPolicy<R>)> {
    max_reach_avoid_prob(mdp, target, &vec![true; mdp.num_states()])
}

/// Maximal probability of staying in `safe` forever.
pub fn max_safe_prob<R: Real>(mdp: &Mdp<R>, safe: &[bool]) -> Result<(Vec<R>, PositionalPolicy<R>)> {
    let n = mdp.num_states();
    let m = mdp.num_actions();
    // Greatest fixpoint: states from which some action keeps the run surely
    // inside the region.
    let mut sure = safe.to_vec();
    loop {
        let next: Vec<bool> = (0..n)
            .map(|s| sure[s] && (0..m).any(|a| post_within(mdp, s, a, &sure)))
            .collect();
        if next == sure {
            break;
        }
        sure = next;
    }
    let (values, reach_policy) = max_reach_avoid_prob(mdp, &sure, safe)?;
    let actions: Vec<usize> = (0..n)
        .map(|s| {
            if sure[s] {
                (0..m).find(|&a| post_within(mdp, s, a, &sure)).unwrap_or(0)
            } else {
                reach_policy.action(s).unwrap_or(0)
            }
        })
        .collect();
    Ok((values, PositionalPolicy::deterministic(m, &actions)))
}

/// Long-run average reward of a positional policy, from every state.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitAverage<R = f64> {
    pub gains: Vec<R>,
    pub initial: usize,
}

impl<R: Real> LimitAverage<R> {
    pub fn at_initial(&self) -> R {
        self.gains[self.initial]
    }
}

pub fn limit_avg_value<R: Real>(
    mdp: &Mdp<R>,
    reward: &RewardTable<R>,
    policy: &PositionalPolicy<R>,
) -> Result<LimitAverage<R>> {
    reward.check(mdp);
    let chain = MarkovChain::induced(mdp, policy);
    let gains = chain.gains(&reward.policy_rewards(mdp, policy))?;
    Ok(LimitAverage { gains, initial: mdp.initial() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;

    fn fig1(p1: f64, p2: f64, p3: f64) -> Mdp<f64> {
        MdpBuilder::new(4, 2)
            .propositions(&["b"])
            .label(1, "b")
            .transition(0, 0, 1, p1)
            .transition(0, 0, 3, 1.0 - p1)
            .transition(0, 1, 2, p2)
            .transition(0, 1, 3, 1.0 - p2)
            .transition_all(2, 2, p3)
            .transition_all(2, 1, 1.0 - p3)
            .transition_all(1, 1, 1.0)
            .transition_all(3, 3, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn single_state_geometric_value() {
        let mdp = MdpBuilder::<f64>::new(1, 1).transition(0, 0, 0, 1.0).build().unwrap();
        let r = RewardTable::from_fn(&mdp, |_, _, _| 1.0);
        let v = discounted_value(&mdp, &r, &Discount::Constant(0.5), &PositionalPolicy::constant(1, 1, 0)).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_picks_rewarding_action() {
        let mdp = MdpBuilder::<f64>::new(1, 2).transition_all(0, 0, 1.0).build().unwrap();
        let r = RewardTable::from_fn(&mdp, |_, a, _| a as f64);
        let (v, pi) = value_iteration_discounted(&mdp, &r, &Discount::Constant(0.9), 1e-9).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-8);
        assert_eq!(pi.action(0), Some(1));
    }

    #[test]
    fn fig1_reach_values() {
        let (v, pi) = max_reach_prob(&fig1(1.0, 1.0, 1.0), &[false, true, false, false]).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(pi.action(0), Some(0));
        let (v, _) = max_reach_prob(&fig1(0.7, 1.0, 1.0), &[false, true, false, false]).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-12);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn reach_prefers_progress_over_stalling() {
        // Action 0 self-loops, action 1 moves to the target: both have value 1.
        let mdp = MdpBuilder::<f64>::new(2, 2)
            .transition(0, 0, 0, 1.0)
            .transition(0, 1, 1, 1.0)
            .transition_all(1, 1, 1.0)
            .build()
            .unwrap();
        let (v, pi) = max_reach_prob(&mdp, &[false, true]).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(pi.action(0), Some(1));
    }

    #[test]
    fn quantitative_policy_avoids_zero_loops() {
        // State 0: action 0 loops, action 1 reaches target w.p. 0.5.
        let mdp = MdpBuilder::<f64>::new(3, 2)
            .transition(0, 0, 0, 1.0)
            .transition(0, 1, 1, 0.5)
            .transition(0, 1, 2, 0.5)
            .transition_all(1, 1, 1.0)
            .transition_all(2, 2, 1.0)
            .build()
            .unwrap();
        let (v, pi) = max_reach_prob(&mdp, &[false, true, false]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
        assert_eq!(pi.action(0), Some(1));
    }

    #[test]
    fn fig3_safety() {
        let fig3 = |p1: f64, p2: f64| {
            MdpBuilder::new(3, 2)
                .propositions(&["b"])
                .label(0, "b")
                .label(2, "b")
                .transition(0, 0, 0, p1)
                .transition(0, 0, 1, 1.0 - p1)
                .transition(0, 1, 1, p2)
                .transition(0, 1, 2, 1.0 - p2)
                .transition_all(1, 1, 1.0)
                .transition_all(2, 2, 1.0)
                .build()
                .unwrap()
        };
        let safe = [true, false, true];
        let (v, pi) = max_safe_prob(&fig3(1.0, 1.0), &safe).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(pi.action(0), Some(0));
        let (v, pi) = max_safe_prob(&fig3(0.9, 0.9), &safe).unwrap();
        assert!((v[0] - 0.1).abs() < 1e-12);
        assert_eq!(pi.action(0), Some(1));
    }

    #[test]
    fn per_state_discount_validation() {
        assert!(Discount::<f64>::Constant(1.0).validate(1).is_err());
        assert!(Discount::<f64>::PerState(vec![0.5, 0.9]).validate(2).is_ok());
        assert!(Discount::<f64>::PerState(vec![0.5]).validate(2).is_err());
    }
}

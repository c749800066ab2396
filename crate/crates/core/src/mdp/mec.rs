use super::{max_reach_prob, Mdp, PositionalPolicy};
use crate::error::Result;
use crate::graph::tarjan_scc;
use crate::scalar::Real;

/// A maximal end component: a state set together with, for each member, the
/// actions that keep the run inside the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    /// `actions[i]` are the allowed actions of `states[i]`.
    pub actions: Vec<Vec<usize>>,
}

impl EndComponent {
    pub fn contains(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }
}

/// Maximal end components by iterated SCC refinement. Components are sorted
/// by their smallest state.
pub fn mec_decomposition<R: Real>(mdp: &Mdp<R>) -> Vec<EndComponent> {
    let n = mdp.num_states();
    let m = mdp.num_actions();
    let mut allowed: Vec<Vec<usize>> = vec![(0..m).collect(); n];
    loop {
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                let mut succ: Vec<usize> =
                    allowed[s].iter().flat_map(|&a| mdp.row(s, a).iter().map(|e| e.0)).collect();
                succ.sort_unstable();
                succ.dedup();
                succ
            })
            .collect();
        let sccs = tarjan_scc(&adj);
        let mut comp = vec![0usize; n];
        for (i, c) in sccs.iter().enumerate() {
            for &s in c {
                comp[s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            let before = allowed[s].len();
            allowed[s].retain(|&a| mdp.row(s, a).iter().all(|&(t, _)| comp[t] == comp[s]));
            changed |= allowed[s].len() != before;
        }
        if !changed {
            return sccs
                .into_iter()
                .filter(|c| c.iter().all(|&s| !allowed[s].is_empty()))
                .map(|states| {
                    let actions = states.iter().map(|&s| allowed[s].clone()).collect();
                    EndComponent { states, actions }
                })
                .collect();
        }
    }
}

/// Maximal probability of visiting `accepting` infinitely often: the maximal
/// probability of reaching an end component that contains an accepting
/// state. The returned policy is positional: it reaches such a component and
/// then keeps cycling through accepting states inside it.
pub fn max_buchi_prob<R: Real>(
    mdp: &Mdp<R>,
    accepting: &[bool],
) -> Result<(Vec<R>, PositionalPolicy<R>)> {
    let n = mdp.num_states();
    let mut good = vec![false; n];
    let mut inside: Vec<Option<usize>> = vec![None; n];
    for mec in mec_decomposition(mdp) {
        if !mec.states.iter().any(|&s| accepting[s]) {
            continue;
        }
        // Attractor toward the accepting members, using component actions.
        let mut ranked: Vec<bool> = vec![false; n];
        for (i, &s) in mec.states.iter().enumerate() {
            good[s] = true;
            if accepting[s] {
                ranked[s] = true;
                inside[s] = Some(mec.actions[i][0]);
            }
        }
        loop {
            let mut newly = Vec::new();
            for (i, &s) in mec.states.iter().enumerate() {
                if ranked[s] {
                    continue;
                }
                if let Some(&a) = mec.actions[i]
                    .iter()
                    .find(|&&a| mdp.row(s, a).iter().any(|&(t, _)| ranked[t]))
                {
                    newly.push((s, a));
                }
            }
            if newly.is_empty() {
                break;
            }
            for (s, a) in newly {
                ranked[s] = true;
                inside[s] = Some(a);
            }
        }
    }
    let (values, reach) = max_reach_prob(mdp, &good)?;
    let actions: Vec<usize> = (0..n)
        .map(|s| inside[s].or_else(|| reach.action(s)).unwrap_or(0))
        .collect();
    Ok((values, PositionalPolicy::deterministic(mdp.num_actions(), &actions)))
}

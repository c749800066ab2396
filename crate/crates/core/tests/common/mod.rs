//! Reference evaluators used as oracles by the integration tests. They share
//! no code with the library's solvers: values come from plain fixed-point
//! iteration and from the Cesàro limit of the joint chain, obtained by
//! repeatedly squaring the lazy transition matrix.

#![allow(dead_code)]

use std::collections::HashMap;

use rlspec::mdp::{FiniteMemoryPolicy, Mdp, PositionalPolicy};
use rlspec::spec::{BuchiAutomaton, RewardMachine};

pub struct Joint {
    pub p: Vec<Vec<f64>>,
    pub reward: Vec<f64>,
    /// `(s, policy memory, tracker state)`; index 0 is the start.
    pub states: Vec<(usize, usize, usize)>,
}

/// Chain over reachable `(s, memory, q)` triples. `track(q, t)` advances the
/// tracker on the successor state `t`.
pub fn joint(
    mdp: &Mdp<f64>,
    policy: &FiniteMemoryPolicy<f64>,
    q0: usize,
    track: impl Fn(usize, usize) -> usize,
    reward: impl Fn(usize, usize, usize, usize) -> f64,
) -> Joint {
    let start = (mdp.initial(), policy.initial_memory(), q0);
    let mut index = HashMap::from([(start, 0usize)]);
    let mut states = vec![start];
    let mut edges: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rew = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (s, mem, q) = states[i];
        let mut out = Vec::new();
        let mut r = 0.0;
        for a in 0..mdp.num_actions() {
            let w = policy.act(mem, s)[a];
            if w == 0.0 {
                continue;
            }
            for &(t, p) in mdp.row(s, a) {
                r += w * p * reward(q, s, a, t);
                let key = (t, policy.next_memory(mem, a, t), track(q, t));
                let next = states.len();
                let j = *index.entry(key).or_insert(next);
                if j == next {
                    states.push(key);
                }
                out.push((j, w * p));
            }
        }
        edges.push(out);
        rew.push(r);
        i += 1;
    }
    let n = states.len();
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in edges.into_iter().enumerate() {
        for (j, x) in row {
            p[i][j] += x;
        }
    }
    Joint { p, reward: rew, states }
}

pub fn rm_joint(mdp: &Mdp<f64>, policy: &FiniteMemoryPolicy<f64>, rm: &RewardMachine<f64>) -> Joint {
    joint(mdp, policy, rm.initial(), |u, t| rm.next(u, t), |u, s, a, t| rm.reward(u, s, a, t))
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let x = a[i][k];
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += x * b[k][j];
            }
        }
    }
    c
}

/// `lim_t ((I + P) / 2)^t`, which equals the Cesàro limit of `P^t`.
pub fn cesaro(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * p[i][j] + if i == j { 0.5 } else { 0.0 }).collect())
        .collect();
    // Rounding drift in the row sums would compound over the squarings.
    for _ in 0..64 {
        m = matmul(&m, &m);
        for row in &mut m {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= total);
        }
    }
    m
}

pub fn discounted(j: &Joint, gamma: impl Fn(usize) -> f64) -> f64 {
    let n = j.p.len();
    let mut v = vec![0.0; n];
    for _ in 0..200_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| j.reward[i] + gamma(j.states[i].0) * (0..n).map(|k| j.p[i][k] * v[k]).sum::<f64>())
            .collect();
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    v[0]
}

pub fn gain(j: &Joint) -> f64 {
    let lim = cesaro(&j.p);
    (0..j.p.len()).map(|k| lim[0][k] * j.reward[k]).sum()
}

/// Probability of ever entering a state with `target(s, q)`.
pub fn reach(j: &Joint, target: impl Fn(usize, usize) -> bool) -> f64 {
    let n = j.p.len();
    let hit: Vec<bool> = j.states.iter().map(|&(s, _, q)| target(s, q)).collect();
    let p: Vec<Vec<f64>> = (0..n)
        .map(|i| if hit[i] { (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect() } else { j.p[i].clone() })
        .collect();
    let lim = cesaro(&p);
    (0..n).filter(|&k| hit[k]).map(|k| lim[0][k]).sum()
}

/// Probability of visiting states with `accepting(s, q)` infinitely often.
pub fn buchi(j: &Joint, accepting: impl Fn(usize, usize) -> bool) -> f64 {
    let n = j.p.len();
    let lim = cesaro(&j.p);
    let acc: Vec<bool> = j.states.iter().map(|&(s, _, q)| accepting(s, q)).collect();
    let recurrent: Vec<bool> = (0..n).map(|k| lim[k][k] > 1e-12).collect();
    let good: Vec<bool> = (0..n).map(|k| recurrent[k] && (0..n).any(|l| acc[l] && lim[k][l] > 1e-12)).collect();
    (0..n).filter(|&k| good[k]).map(|k| lim[0][k]).sum()
}

/// Büchi acceptance probability of a deterministic automaton reading labels
/// (the initial state's label included).
pub fn automaton_value(
    mdp: &Mdp<f64>,
    policy: &FiniteMemoryPolicy<f64>,
    aut: &BuchiAutomaton,
    labels: &[u64],
) -> f64 {
    let q0 = aut.next(aut.initial(), labels[mdp.initial()]);
    let j = joint(mdp, policy, q0, |q, t| aut.next(q, labels[t]), |_, _, _, _| 0.0);
    buchi(&j, |_, q| aut.is_accepting(q))
}

/// All deterministic positional policies of `mdp`.
pub fn all_policies(n: usize, m: usize) -> Vec<PositionalPolicy<f64>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let actions: Vec<usize> = (0..n)
                .map(|_| {
                    let a = code % m;
                    code /= m;
                    a
                })
                .collect();
            PositionalPolicy::deterministic(m, &actions)
        })
        .collect()
}

/// A random stochastic positional policy.
pub fn random_policy(rng: &mut impl rand::Rng, n: usize, m: usize) -> PositionalPolicy<f64> {
    let rows = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                let mut row = vec![0.0; m];
                row[rng.gen_range(0..m)] = 1.0;
                row
            } else {
                let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
                let t: f64 = w.iter().sum();
                w.into_iter().map(|x| x / t).collect()
            }
        })
        .collect();
    PositionalPolicy::from_rows(m, rows).unwrap()
}

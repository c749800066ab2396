//! Abstract reward machines with limit-average aggregation cannot encode
//! "b holds infinitely often": cycle analysis of the machine graph and the
//! two-branch MDP that separates the two objectives.

use std::collections::VecDeque;

use serde_json::json;

use super::report::ExperimentReport;
use crate::error::{Error, Result};
use crate::graph::{bottom_sccs, forward_reachable};
use crate::mdp::{max_buchi_prob, Mdp, PositionalPolicy};
use crate::spec::{parse_ltl, spec_value, AbstractRewardMachine, Specification};

/// Upper bound on enumerated simple cycles.
pub const CYCLE_CAP: usize = 100_000;

const EMPTY: u64 = 0;
const B: u64 = 1;

/// A simple cycle `u1 ℓ1 u2 … ℓk u1` of the machine graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub states: Vec<usize>,
    pub labels: Vec<u64>,
    pub average: f64,
}

impl Cycle {
    fn new(arm: &AbstractRewardMachine<f64>, states: Vec<usize>, labels: Vec<u64>) -> Self {
        let total: f64 = states.iter().zip(&labels).map(|(&u, &l)| arm.reward(u, l)).sum();
        let average = total / states.len() as f64;
        Self { states, labels, average }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.labels.iter().all(|&l| l == B)
    }

    pub fn is_negative(&self) -> bool {
        self.labels.iter().all(|&l| l == EMPTY)
    }
}

/// How the separating MDP was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum WitnessPlan {
    /// A positive cycle whose average does not exceed a negative one's.
    Immediate { positive: usize, negative: usize },
    /// `C_m = C−^m C` against a positive cycle, with branch probability `p`.
    Scaled { negative: usize, companion: Cycle, positive: usize, m: usize, p: f64, average_cm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleAnalysis {
    pub cycles: Vec<Cycle>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub bottom_sccs: Vec<Vec<usize>>,
    /// Minimum of `avg(C+) - avg(C−)` over all pairs.
    pub gap_epsilon: f64,
    pub plan: WitnessPlan,
    /// States dropped because they are unreachable from the initial state.
    pub pruned: Vec<usize>,
}

/// Values of the two policies on the separating MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm3Witness {
    pub mdp: Mdp<f64>,
    pub machine_pi1: f64,
    pub machine_pi2: f64,
    pub buchi_pi1: f64,
    pub buchi_pi2: f64,
    pub buchi_optimum: f64,
    pub verified: bool,
}

fn successors(arm: &AbstractRewardMachine<f64>, u: usize) -> [(u64, usize); 2] {
    [(EMPTY, arm.next(u, EMPTY)), (B, arm.next(u, B))]
}

/// Simple cycles among `alive` states, each listed once starting from its
/// smallest state.
fn simple_cycles(arm: &AbstractRewardMachine<f64>, alive: &[bool]) -> Result<Vec<Cycle>> {
    let n = arm.num_states();
    let mut out = Vec::new();
    let mut states = Vec::new();
    let mut labels = Vec::new();
    let mut on_path = vec![false; n];
    for start in (0..n).filter(|&u| alive[u]) {
        states.clear();
        labels.clear();
        states.push(start);
        on_path[start] = true;
        extend(arm, alive, start, &mut states, &mut labels, &mut on_path, &mut out)?;
        on_path[start] = false;
    }
    Ok(out)
}

fn extend(
    arm: &AbstractRewardMachine<f64>,
    alive: &[bool],
    start: usize,
    states: &mut Vec<usize>,
    labels: &mut Vec<u64>,
    on_path: &mut [bool],
    out: &mut Vec<Cycle>,
) -> Result<()> {
    let u = *states.last().expect("path is nonempty");
    for (l, v) in successors(arm, u) {
        if v == start {
            labels.push(l);
            out.push(Cycle::new(arm, states.clone(), labels.clone()));
            labels.pop();
            if out.len() > CYCLE_CAP {
                return Err(Error::Unsupported(format!("more than {CYCLE_CAP} simple cycles")));
            }
        } else if v > start && alive[v] && !on_path[v] {
            states.push(v);
            labels.push(l);
            on_path[v] = true;
            extend(arm, alive, start, states, labels, on_path, out)?;
            on_path[v] = false;
            states.pop();
            labels.pop();
        }
    }
    Ok(())
}

/// Shortest label word driving the machine from `from` to `to`, preferring
/// `∅` on ties.
fn word_between(arm: &AbstractRewardMachine<f64>, from: usize, to: usize) -> Vec<u64> {
    let n = arm.num_states();
    let mut prev: Vec<Option<(usize, u64)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for (l, v) in successors(arm, u) {
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, l));
                queue.push_back(v);
            }
        }
    }
    let mut word = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, l) = prev[cur].expect("target is reachable");
        word.push(l);
        cur = p;
    }
    word.reverse();
    word
}

/// Cycle analysis and the separating construction. The machine must read
/// the single proposition `b` and have rewards in `[0, 1]`.
pub fn analyze_cycles(arm: &AbstractRewardMachine<f64>) -> Result<CycleAnalysis> {
    if arm.propositions() != ["b"] {
        return Err(Error::InvalidMachine("the analysis needs a machine over the single proposition `b`".into()));
    }
    if !arm.is_normalized() {
        return Err(Error::InvalidMachine("the analysis needs rewards in [0, 1]".into()));
    }
    let n = arm.num_states();
    let adj: Vec<Vec<usize>> = (0..n).map(|u| successors(arm, u).iter().map(|e| e.1).collect()).collect();
    let alive = forward_reachable(&adj, &[arm.initial()]);
    let pruned: Vec<usize> = (0..n).filter(|&u| !alive[u]).collect();
    let cycles = simple_cycles(arm, &alive)?;
    let positives: Vec<usize> = (0..cycles.len()).filter(|&i| cycles[i].is_positive()).collect();
    let negatives: Vec<usize> = (0..cycles.len()).filter(|&i| cycles[i].is_negative()).collect();
    let live_adj: Vec<Vec<usize>> =
        (0..n).map(|u| if alive[u] { adj[u].clone() } else { Vec::new() }).collect();
    let bottoms: Vec<Vec<usize>> = bottom_sccs(&live_adj).into_iter().filter(|c| alive[c[0]]).collect();

    let mut gap = f64::INFINITY;
    let mut worst = None;
    for &i in &positives {
        for &j in &negatives {
            let d = cycles[i].average - cycles[j].average;
            if d < gap {
                gap = d;
                worst = Some((i, j));
            }
        }
    }
    let (worst_pos, worst_neg) = worst.expect("every machine over {b} has positive and negative cycles");
    let plan = if gap <= 0.0 {
        WitnessPlan::Immediate { positive: worst_pos, negative: worst_neg }
    } else {
        // Follow ∅-edges inside a bottom component until a state repeats.
        let mut u = bottoms[0][0];
        let mut visited = vec![false; n];
        while !visited[u] {
            visited[u] = true;
            u = arm.next(u, EMPTY);
        }
        let u1 = u;
        let negative = negatives
            .iter()
            .copied()
            .find(|&j| cycles[j].states.contains(&u1))
            .expect("the ∅-cycle through u1 is enumerated");
        let negative_cycle = rotate(&cycles[negative], u1);
        let u2 = arm.next(u1, B);
        let back = word_between(arm, u2, u1);
        let mut c_states = vec![u1];
        let mut c_labels = vec![B];
        let mut cur = u2;
        for &l in &back {
            c_states.push(cur);
            c_labels.push(l);
            cur = arm.next(cur, l);
        }
        let companion = Cycle::new(arm, c_states, c_labels);
        let (k, kp) = (negative_cycle.len() as f64, companion.len() as f64);
        let m = (1..).find(|&m| kp / (m as f64 * k + kp) <= gap / 2.0).expect("the fraction vanishes");
        let mk = m as f64 * k;
        let average_cm = (mk * negative_cycle.average + kp * companion.average) / (mk + kp);
        let positive = positives
            .iter()
            .copied()
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if cycles[b].average >= cycles[i].average => Some(b),
                _ => Some(i),
            })
            .expect("positive cycles exist");
        let p = (average_cm + gap / 4.0) / cycles[positive].average;
        WitnessPlan::Scaled { negative, companion, positive, m, p, average_cm }
    };
    Ok(CycleAnalysis { cycles, positives, negatives, bottom_sccs: bottoms, gap_epsilon: gap, plan, pruned })
}

/// The cycle rotated to start at `u`.
fn rotate(c: &Cycle, u: usize) -> Cycle {
    let i = c.states.iter().position(|&x| x == u).expect("state on cycle");
    let mut states = c.states[i..].to_vec();
    states.extend_from_slice(&c.states[..i]);
    let mut labels = c.labels[i..].to_vec();
    labels.extend_from_slice(&c.labels[..i]);
    Cycle { states, labels, average: c.average }
}

/// Builder for single-action label chains hanging off `s0`.
struct ChainMdp {
    labels: Vec<u64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl ChainMdp {
    fn new() -> Self {
        // s0 with placeholder rows for a1 and a2.
        Self { labels: vec![EMPTY], rows: vec![Vec::new(), Vec::new()] }
    }

    fn add_state(&mut self, label: u64) -> usize {
        self.labels.push(label);
        self.rows.push(Vec::new());
        self.rows.push(Vec::new());
        self.labels.len() - 1
    }

    fn link(&mut self, from: usize, to: usize) {
        self.rows[from * 2] = vec![(to, 1.0)];
        self.rows[from * 2 + 1] = vec![(to, 1.0)];
    }

    /// States generating `prefix` then `cycle` forever; returns the first.
    fn lasso(&mut self, prefix: &[u64], cycle: &[u64]) -> usize {
        let first = self.labels.len();
        let mut prev = None;
        let mut loop_start = 0;
        for (i, &l) in prefix.iter().chain(cycle).enumerate() {
            let s = self.add_state(l);
            if i == prefix.len() {
                loop_start = s;
            }
            if let Some(p) = prev {
                self.link(p, s);
            }
            prev = Some(s);
        }
        self.link(prev.expect("cycle is nonempty"), loop_start);
        first
    }

    fn build(self) -> Result<Mdp<f64>> {
        let n = self.labels.len();
        Mdp::new(n, 2, 0, vec!["b".into()], self.labels, self.rows)
            .map(|m| m.with_action_names(vec!["a1".into(), "a2".into()]))
    }
}

/// Builds the separating MDP for `analysis` and evaluates both branches
/// exactly.
pub fn build_thm3_witness(arm: &AbstractRewardMachine<f64>, analysis: &CycleAnalysis) -> Result<Thm3Witness> {
    let cycles = &analysis.cycles;
    let mut chain = ChainMdp::new();
    let u0 = arm.initial();
    let (prob, pos_word, neg_prefix, neg_cycle) = match &analysis.plan {
        WitnessPlan::Immediate { positive, negative } => {
            let (cp, cn) = (&cycles[*positive], &cycles[*negative]);
            (1.0, (word_between(arm, u0, cp.states[0]), cp.labels.clone()), word_between(arm, u0, cn.states[0]), cn.labels.clone())
        }
        WitnessPlan::Scaled { negative, companion, positive, m, p, .. } => {
            let cp = &cycles[*positive];
            let cn = rotate(&cycles[*negative], companion.states[0]);
            let mut word = Vec::new();
            for _ in 0..*m {
                word.extend_from_slice(&cn.labels);
            }
            word.extend_from_slice(&companion.labels);
            (*p, (word_between(arm, u0, cp.states[0]), cp.labels.clone()), word_between(arm, u0, cn.states[0]), word)
        }
    };
    let pos = chain.lasso(&pos_word.0, &pos_word.1);
    let neg = chain.lasso(&neg_prefix, &neg_cycle);
    let dead = chain.add_state(EMPTY);
    chain.link(dead, dead);
    chain.rows[0] = if prob < 1.0 { vec![(pos, prob), (dead, 1.0 - prob)] } else { vec![(pos, 1.0)] };
    chain.rows[1] = vec![(neg, 1.0)];
    let mdp = chain.build()?;

    let n = mdp.num_states();
    let pi1 = PositionalPolicy::constant(n, 2, 0);
    let pi2 = PositionalPolicy::deterministic(2, &std::iter::once(1).chain(std::iter::repeat_n(0, n - 1)).collect::<Vec<_>>());
    let machine = Specification::LimitAvgRm { machine: arm.clone().into() };
    let buchi = Specification::ltl(parse_ltl("G F b", mdp.propositions())?);
    let machine_pi1 = spec_value(&mdp, &machine, &pi1)?;
    let machine_pi2 = spec_value(&mdp, &machine, &pi2)?;
    let buchi_pi1 = spec_value(&mdp, &buchi, &pi1)?;
    let buchi_pi2 = spec_value(&mdp, &buchi, &pi2)?;
    let accepting = mdp.states_with_any(1);
    let (opt, _) = max_buchi_prob(&mdp, &accepting)?;
    let buchi_optimum = opt[mdp.initial()];
    let tol = 1e-9;
    let verified = match analysis.plan {
        // π2 is machine-optimal yet never sees b infinitely often.
        WitnessPlan::Immediate { .. } => {
            machine_pi2 >= machine_pi1 - tol && buchi_pi2.abs() <= tol && (buchi_pi1 - 1.0).abs() <= tol
        }
        WitnessPlan::Scaled { p, .. } => {
            machine_pi1 > machine_pi2 + analysis.gap_epsilon / 4.0 - tol
                && (buchi_pi1 - p).abs() <= tol
                && p < 1.0
                && (buchi_pi2 - 1.0).abs() <= tol
                && (buchi_optimum - 1.0).abs() <= tol
        }
    };
    Ok(Thm3Witness { mdp, machine_pi1, machine_pi2, buchi_pi1, buchi_pi2, buchi_optimum, verified })
}

/// Cycle analysis, separating MDP and exact verification, as a report.
pub fn analyze_arm_for_buchi(arm: &AbstractRewardMachine<f64>) -> Result<(CycleAnalysis, Thm3Witness, ExperimentReport)> {
    let analysis = analyze_cycles(arm)?;
    let witness = build_thm3_witness(arm, &analysis)?;
    let mut report = ExperimentReport::new("thm3");
    report
        .param("machine_states", arm.num_states() as u64)
        .quantity("pruned_states", json!(analysis.pruned))
        .quantity("cycles", analysis.cycles.len() as u64)
        .quantity("positive_cycles", analysis.positives.len() as u64)
        .quantity("negative_cycles", analysis.negatives.len() as u64)
        .quantity("gap_epsilon", analysis.gap_epsilon)
        .quantity("machine_value_pi1", witness.machine_pi1)
        .quantity("machine_value_pi2", witness.machine_pi2)
        .quantity("buchi_pi1", witness.buchi_pi1)
        .quantity("buchi_pi2", witness.buchi_pi2)
        .quantity("witness_states", witness.mdp.num_states() as u64);
    match &analysis.plan {
        WitnessPlan::Immediate { .. } => {
            report.quantity("plan", "immediate");
        }
        WitnessPlan::Scaled { m, p, average_cm, companion, .. } => {
            report
                .quantity("plan", "scaled")
                .quantity("m", *m as u64)
                .quantity("p", *p)
                .quantity("average_cm", *average_cm)
                .quantity("companion_length", companion.len() as u64);
        }
    }
    report.check("machine-optimal policy is not Buchi-optimal", witness.verified);
    Ok((analysis, witness, report))
}

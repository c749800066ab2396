//! No PAC learner for safety: a learner run for `K` steps on the
//! deterministic PAC-family MDP observes, with probability close to one,
//! exactly what it would observe on either perturbation, yet no policy is
//! near-optimal for both perturbations.

use serde_json::json;

use super::figures::fig4_mdp;
use super::report::{ExperimentReport, Table};
use crate::error::{Error, Result};
use crate::learn::{model_based_learner, q_learning, LearnerConfig, PolicyTrace};
use crate::mdp::{FiniteMemoryPolicy, Mdp, MdpSimulator, PositionalPolicy, Simulator};
use crate::rng::derive_seed;
use crate::spec::{build_safe_arm, spec_value, Specification};

/// Which learner the experiment drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacLearner {
    ModelBased,
    /// Q-learning on the limit-average safety machine's rewards, discounted.
    QLearning { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacExperiment {
    pub learner: PacLearner,
    pub eps: f64,
    pub k: usize,
    /// Defaults to `1 - 0.9^{1/K}`.
    pub delta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Trials rerun with `δ = 0` to check coupling.
    pub control_trials: usize,
    pub grid_delta: f64,
    pub grid_eps: f64,
    pub grid_points: usize,
}

impl Default for PacExperiment {
    fn default() -> Self {
        Self {
            learner: PacLearner::ModelBased,
            eps: 0.25,
            k: 21,
            delta: None,
            trials: 1000,
            seed: 0,
            control_trials: 50,
            grid_delta: 0.5,
            grid_eps: 0.25,
            grid_points: 101,
        }
    }
}

/// Records every transition passed through it.
struct Recording<S> {
    inner: S,
    log: Vec<(usize, usize, usize)>,
}

impl<S: Simulator> Simulator for Recording<S> {
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
        self.inner.reset()
    }
    fn step(&mut self, action: usize) -> Result<usize> {
        let s = self.inner.state();
        let t = self.inner.step(action)?;
        self.log.push((s, action, t));
        Ok(t)
    }
}

type Observed = (Vec<(usize, usize, usize)>, PolicyTrace);

fn run_learner(exp: &PacExperiment, mdp: &Mdp<f64>, seed: u64) -> Result<Observed> {
    let config = LearnerConfig { seed, step_budget: exp.k as u64, eval_every: 1, ..LearnerConfig::default() };
    let mut sim = Recording { inner: MdpSimulator::new(mdp, seed), log: Vec::new() };
    let trace = match exp.learner {
        PacLearner::ModelBased => model_based_learner(&mut sim, &mdp.shape(), &Specification::safe(&["b"]), &config)?,
        PacLearner::QLearning { gamma } => {
            let rm = build_safe_arm::<f64, _>(&["b"])?.lower(&mdp.shape())?;
            q_learning(&mut sim, &rm, gamma, &config)?.0
        }
    };
    Ok((sim.log, trace))
}

/// Closed-form safety values of the stationary policy playing `a1` at `s0`
/// with probability `x`, on the two perturbations with parameter `delta`.
pub fn stationary_values(x: f64, delta: f64) -> (f64, f64) {
    let j1 = if x == 1.0 { 1.0 } else { 0.0 };
    let j2 = (1.0 - x) / (1.0 - x * (1.0 - delta));
    (j1, j2)
}

fn stationary(x: f64) -> PositionalPolicy<f64> {
    PositionalPolicy::from_rows(2, vec![vec![x, 1.0 - x], vec![1.0, 0.0], vec![1.0, 0.0]]).expect("valid rows")
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Memoized safety values of snapshot policies on one MDP.
struct ValueCache<'a> {
    mdp: &'a Mdp<f64>,
    seen: Vec<(FiniteMemoryPolicy<f64>, f64)>,
}

impl ValueCache<'_> {
    fn value(&mut self, policy: &FiniteMemoryPolicy<f64>) -> Result<f64> {
        if let Some((_, v)) = self.seen.iter().find(|(p, _)| p == policy) {
            return Ok(*v);
        }
        let v = spec_value(self.mdp, &Specification::safe(&["b"]), policy)?;
        self.seen.push((policy.clone(), v));
        Ok(v)
    }
}

pub fn pac_indistinguishability_experiment(exp: &PacExperiment) -> Result<ExperimentReport> {
    if !(exp.eps > 0.0 && exp.eps < 0.5) {
        return Err(Error::InvalidParameter("eps must lie in (0, 1/2)".into()));
    }
    if exp.k == 0 || exp.trials == 0 {
        return Err(Error::InvalidParameter("K and the number of trials must be positive".into()));
    }
    let delta = exp.delta.unwrap_or_else(|| 1.0 - 0.9f64.powf(1.0 / exp.k as f64));
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter("delta must lie in [0, 1)".into()));
    }
    let m = fig4_mdp(1.0, 1.0)?;
    let perturbed = [fig4_mdp(1.0, 1.0 - delta)?, fig4_mdp(1.0 - delta, 1.0)?];
    let deterministic = |s: usize, a: usize| m.row(s, a)[0].0;
    let n_allowed = (exp.k - 1) / 2;

    let mut caches = [ValueCache { mdp: &perturbed[0], seen: Vec::new() }, ValueCache { mdp: &perturbed[1], seen: Vec::new() }];
    let mut table = Table::new(&["trial", "seed", "G1", "G2", "mistakes1", "mistakes2", "E1", "E2"]);
    let mut g_counts = [0usize; 2];
    let mut both_e = 0usize;
    let mut seeds = Vec::with_capacity(exp.trials);
    for trial in 0..exp.trials {
        let seed = derive_seed(exp.seed, trial as u64);
        seeds.push(seed);
        let (_, trace_m) = run_learner(exp, &m, seed)?;
        let mut g = [false; 2];
        for j in 0..2 {
            let (log, _) = run_learner(exp, &perturbed[j], seed)?;
            g[j] = log.len() == exp.k && log.iter().all(|&(s, a, t)| t == deterministic(s, a));
            g_counts[j] += g[j] as usize;
        }
        let mut mistakes = [0usize; 2];
        for snap in trace_m.snapshots.iter().take(exp.k) {
            for j in 0..2 {
                // Both perturbations have optimum 1.
                if caches[j].value(&snap.policy)? < 1.0 - exp.eps - 1e-9 {
                    mistakes[j] += 1;
                }
            }
        }
        let e = [mistakes[0] <= n_allowed, mistakes[1] <= n_allowed];
        both_e += (e[0] && e[1]) as usize;
        table.push(vec![
            json!(trial),
            json!(seed),
            json!(g[0]),
            json!(g[1]),
            json!(mistakes[0]),
            json!(mistakes[1]),
            json!(e[0]),
            json!(e[1]),
        ]);
    }
    let pr = [g_counts[0] as f64 / exp.trials as f64, g_counts[1] as f64 / exp.trials as f64];
    let ci = [wilson_interval(g_counts[0], exp.trials), wilson_interval(g_counts[1], exp.trials)];

    // Coupling control: with δ = 0 all three runs coincide.
    let mut control_identical = true;
    for trial in 0..exp.control_trials.min(exp.trials) {
        let seed = seeds[trial];
        let runs: Vec<Observed> = [&m, &fig4_mdp(1.0, 1.0)?, &fig4_mdp(1.0, 1.0)?]
            .iter()
            .map(|mdp| run_learner(exp, mdp, seed))
            .collect::<Result<_>>()?;
        control_identical &= runs[0] == runs[1] && runs[1] == runs[2];
    }

    // Stationary-policy grid.
    let g1 = fig4_mdp(1.0, 1.0 - exp.grid_delta)?;
    let g2 = fig4_mdp(1.0 - exp.grid_delta, 1.0)?;
    let safe = Specification::safe(&["b"]);
    let mut max_closed_form_error = 0.0f64;
    let mut jointly_optimal = Vec::new();
    for i in 0..exp.grid_points {
        let x = if exp.grid_points == 1 { 0.0 } else { i as f64 / (exp.grid_points - 1) as f64 };
        let (c1, c2) = stationary_values(x, exp.grid_delta);
        let p = stationary(x);
        let (e1, e2) = (spec_value(&g1, &safe, &p)?, spec_value(&g2, &safe, &p)?);
        max_closed_form_error = max_closed_form_error.max((c1 - e1).abs()).max((c2 - e2).abs());
        if e1 >= 1.0 - exp.grid_eps - 1e-9 && e2 >= 1.0 - exp.grid_eps - 1e-9 {
            jointly_optimal.push(x);
        }
    }

    let mut report = ExperimentReport::new("pac");
    report
        .param("learner", format!("{:?}", exp.learner))
        .param("eps", exp.eps)
        .param("K", exp.k as u64)
        .param("delta", delta)
        .param("trials", exp.trials as u64)
        .param("seed", exp.seed)
        .param("grid_delta", exp.grid_delta)
        .param("grid_eps", exp.grid_eps)
        .param("grid_points", exp.grid_points as u64)
        .quantity("one_minus_delta_pow_K", (1.0 - delta).powi(exp.k as i32))
        .quantity("pr_G1", pr[0])
        .quantity("pr_G2", pr[1])
        .quantity("ci_G1", json!([ci[0].0, ci[0].1]))
        .quantity("ci_G2", json!([ci[1].0, ci[1].1]))
        .quantity("trials_with_E1_and_E2", both_e as u64)
        .quantity("grid_max_closed_form_error", max_closed_form_error)
        .quantity("grid_jointly_eps_optimal", json!(jointly_optimal))
        .quantity("control_identical", control_identical);
    report.seeds = seeds;
    for j in 0..2 {
        report.check(&format!("Pr(G{}) within [0.87, 0.93]", j + 1), (0.87..=0.93).contains(&pr[j]));
        report.check(&format!("Pr(G{}) at least (1 - delta)^K up to sampling error", j + 1), ci[j].1 >= 0.9);
    }
    report.check("E1 and E2 never hold together", both_e == 0);
    report.check("delta = 0 control runs are identical", control_identical);
    report.check("closed forms match the exact solver on the grid", max_closed_form_error <= 1e-9);
    report.check("grid evidence: no stationary policy is eps-optimal for both perturbations", jointly_optimal.is_empty());
    report.table = table;
    Ok(report)
}

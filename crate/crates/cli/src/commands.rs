//! Subcommand implementations. Each command returns the files it produces;
//! with `--out` they are written to that directory, otherwise the first one
//! is printed to stdout.

use std::fs;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;
use rlspec::io::{
    buchi_from_json, descriptor_from_json, descriptor_to_json, machine_from_json, MdpDoc, ReductionReport,
};
use rlspec::learn::{convergence_trace, model_based_learner, pac_mistake_count, q_learning, LearnerConfig};
use rlspec::mdp::{validate_mdp, Discount, Mdp, MdpSimulator, PositionalPolicy, Simulator, Violation};
use rlspec::reduce::{
    automaton_product_reduction, check_optimality_preservation, compose, lambda_sink_reduction,
    multidiscount_reduction, product_rm_reduction, two_discount_reduction, validate_reduction, wrap_simulator,
    Aggregation, ReductionDescriptor,
};
use rlspec::refute::{
    analyze_arm_for_buchi, canonical_reach_rm, fig1_mdp, pac_indistinguishability_experiment,
    preservation_sweep, robustness_experiment, synthesize_thm1_counterexample, ExperimentReport, PacExperiment,
    PacLearner, SweepKind,
};
use rlspec::rng::seeded;
use rlspec::spec::{build_reach_arm, build_safe_arm, optimal_value, parse_ltl, LtlFormula, Machine, Specification};
use serde_json::{json, Value};

use crate::source;
use crate::{
    Cli, Command, ExperimentArgs, ExperimentName, FileKind, LearnArgs, LearnerKind, ReduceArgs, SimulateArgs,
    SolveArgs, ValidateArgs,
};

type Files = Vec<(String, String)>;

/// Runs the command; `Ok(false)` means a clean run with a negative outcome
/// (violations found, a verdict failed).
pub fn run(cli: &Cli) -> Result<bool> {
    if !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        bail!("--tol must be a finite non-negative number");
    }
    if cli.trials == Some(0) {
        bail!("--trials must be positive");
    }
    let (files, ok) = match &cli.command {
        Command::Validate(args) => validate(cli, args)?,
        Command::Solve(args) => (solve(args)?, true),
        Command::Reduce(args) => reduce(args)?,
        Command::Simulate(args) => (simulate(cli, args)?, true),
        Command::Learn(args) => (learn(cli, args)?, true),
        Command::Experiment(args) => experiment(cli, args)?,
    };
    emit(cli, &files)?;
    Ok(ok)
}

fn emit(cli: &Cli, files: &Files) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for (name, content) in files {
                let path = dir.join(name);
                fs::write(&path, terminated(content)).with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        None => {
            if let Some((_, content)) = files.first() {
                let mut stdout = std::io::stdout().lock();
                match stdout.write_all(terminated(content).as_bytes()).and_then(|()| stdout.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

fn terminated(content: &str) -> String {
    if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    }
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn guess_kind(doc: &Value) -> Result<FileKind> {
    let has = |k: &str| doc.get(k).is_some();
    Ok(if has("beta") || has("q2") {
        FileKind::Reduction
    } else if has("edges") || has("accepting") {
        FileKind::Buchi
    } else if has("update") || has("rewards") || has("mdp_states") {
        FileKind::Machine
    } else if has("transitions") {
        FileKind::Mdp
    } else {
        bail!("cannot tell what kind of document this is; pass --kind")
    })
}

/// MDP violations with row sums checked against `tol` instead of the
/// library default.
fn mdp_violations(mdp: &Mdp<f64>, tol: f64) -> Vec<Violation> {
    let mut out: Vec<Violation> =
        validate_mdp(mdp).into_iter().filter(|v| !matches!(v, Violation::RowSum { .. })).collect();
    let m = mdp.num_actions();
    for (i, row) in mdp.rows().iter().enumerate() {
        let sum: f64 = row.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > tol {
            out.push(Violation::RowSum { state: i / m, action: i % m, sum });
        }
    }
    out
}

fn validate(cli: &Cli, args: &ValidateArgs) -> Result<(Files, bool)> {
    let text = source::read(&args.file)?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", args.file))?;
    let kind = match args.kind {
        Some(k) => k,
        None => guess_kind(&doc)?,
    };
    let violations: Vec<String> = match kind {
        FileKind::Mdp => match serde_json::from_value::<MdpDoc>(doc).map_err(|e| e.to_string()) {
            Ok(d) => match d.to_mdp_unchecked() {
                Ok(mdp) => mdp_violations(&mdp, cli.tol).iter().map(ToString::to_string).collect(),
                Err(e) => vec![e.to_string()],
            },
            Err(e) => vec![e],
        },
        FileKind::Machine => machine_from_json(&text).err().map(|e| e.to_string()).into_iter().collect(),
        FileKind::Buchi => buchi_from_json(&text).err().map(|e| e.to_string()).into_iter().collect(),
        FileKind::Reduction => {
            let base = args.base.as_deref().ok_or_else(|| anyhow!("reduction descriptors need --base <mdp>"))?;
            let base = source::mdp(base)?;
            match descriptor_from_json(&text) {
                Ok(rd) => validate_reduction(&rd, &base.shape()).iter().map(ToString::to_string).collect(),
                Err(e) => vec![e.to_string()],
            }
        }
    };
    let kind_name = format!("{kind:?}").to_lowercase();
    let valid = violations.is_empty();
    let report = json!({ "kind": kind_name, "valid": valid, "violations": violations });
    Ok((vec![("validation.json".into(), pretty(&report))], valid))
}

fn solve(args: &SolveArgs) -> Result<Files> {
    let mdp = source::mdp(&args.mdp)?;
    let spec = source::spec(&args.spec, mdp.propositions())?;
    let (optimal, policy) = optimal_value(&mdp, &spec)?;
    let report = json!({ "optimal": optimal, "policy": policy });
    Ok(vec![("solution.json".into(), pretty(&report))])
}

/// Rewrites reachability and safety as the matching built-in formulas.
fn as_formula(spec: &Specification<f64>, props: &[String]) -> Result<LtlFormula> {
    let text = match spec {
        Specification::Ltl { formula, .. } => return Ok(formula.clone()),
        Specification::Reach(x) => format!("F ({})", x.join(" | ")),
        Specification::Safe(x) => format!("G ({})", x.join(" | ")),
        _ => bail!("this reduction needs a reach, safe or LTL specification"),
    };
    Ok(parse_ltl(&text, props)?)
}

fn parse_pair(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text.split_once(',').ok_or_else(|| anyhow!("expected `<g1>,<g2>`, got `{text}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn reduce(args: &ReduceArgs) -> Result<(Files, bool)> {
    let mdp = source::mdp(&args.mdp)?;
    let shape = mdp.shape();
    let spec = source::spec(&args.spec, mdp.propositions())?;
    let mut sweep = Vec::new();
    let (rd, check_spec): (ReductionDescriptor<f64>, Specification<f64>) = match args.kind.as_str() {
        "product" => {
            let (machine, aggregation) = match &spec {
                Specification::DiscountedRm { machine, gamma } => (machine.clone(), Aggregation::Discounted(gamma.clone())),
                Specification::LimitAvgRm { machine } => (machine.clone(), Aggregation::LimitAverage),
                Specification::Reach(x) => (Machine::from(build_reach_arm::<f64, _>(x)?), Aggregation::LimitAverage),
                Specification::Safe(x) => (Machine::from(build_safe_arm::<f64, _>(x)?), Aggregation::LimitAverage),
                Specification::Ltl { .. } => bail!("product needs a machine specification"),
            };
            (product_rm_reduction(&shape, &machine, &aggregation)?, spec.clone())
        }
        "multidiscount" => {
            let Specification::DiscountedRm { machine, gamma } = &spec else {
                bail!("multidiscount needs a discounted specification");
            };
            let reward = machine.lower(&shape)?;
            (multidiscount_reduction(&shape, &reward, gamma)?, spec.clone())
        }
        kind => {
            let (name, param) = kind.split_once(':').ok_or_else(|| anyhow!("unknown reduction kind `{kind}`"))?;
            let formula = as_formula(&spec, mdp.propositions())?;
            let ltl = Specification::ltl(formula.clone());
            let aut = ltl.automaton()?.ok_or_else(|| anyhow!("no automaton for `{formula}`"))?;
            let product = automaton_product_reduction::<f64>(&shape, &aut)?;
            let inner = product.descriptor.shape();
            let outer = match name {
                "lambda" => {
                    let x: f64 = param.parse().with_context(|| format!("`{param}` is not a number"))?;
                    let mut params = vec![0.5, 0.9, 0.99, 0.999];
                    if !params.contains(&x) {
                        params.push(x);
                    }
                    sweep = preservation_sweep(&mdp, &formula, SweepKind::LambdaSink, &params, args.budget)?;
                    lambda_sink_reduction(&inner, &product.accepting, x)?
                }
                "twodiscount" => {
                    let (g1, g2) = parse_pair(param)?;
                    two_discount_reduction(&inner, &product.accepting, g1, g2)?
                }
                _ => bail!("unknown reduction kind `{kind}`"),
            };
            (compose(&product.descriptor, &outer, &shape)?, ltl)
        }
    };
    let mut report = ReductionReport::validate(&rd, &mdp);
    if report.valid {
        let preservation = check_optimality_preservation(&mdp, &check_spec, &rd, args.budget)?;
        report = report.with_preservation(&preservation);
    }
    report.sweep = sweep;
    let ok = report.valid && report.preserved != Some(false);
    Ok((
        vec![("descriptor.json".into(), descriptor_to_json(&rd)), ("reduction-report.json".into(), report.to_json())],
        ok,
    ))
}

fn sample(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return a;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn trajectory<S: Simulator>(sim: &mut S, policy: &PositionalPolicy<f64>, steps: usize, seed: u64) -> Result<String> {
    let mut rng = seeded(seed);
    let mut csv = String::from("step,state,action,next\n");
    for step in 0..steps {
        let s = sim.state();
        let a = sample(&mut rng, policy.row(s));
        let t = sim.step(a)?;
        csv.push_str(&format!("{step},{s},{a},{t}\n"));
    }
    Ok(csv)
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<Files> {
    let mdp = source::mdp(&args.mdp)?;
    // The policy stream and the simulator stream use different seeds.
    let policy_seed = rlspec::rng::derive_seed(cli.seed, 1);
    let csv = match &args.reduction {
        None => {
            let policy = source::policy(&args.policy, mdp.num_states(), mdp.num_actions())?;
            let mut sim = MdpSimulator::new(&mdp, cli.seed);
            trajectory(&mut sim, &policy, args.steps, policy_seed)?
        }
        Some(path) => {
            let rd = descriptor_from_json(&source::read(path)?)?;
            let policy = source::policy(&args.policy, rd.num_states, rd.num_actions)?;
            let inner = MdpSimulator::new(&mdp, cli.seed);
            let mut sim = wrap_simulator(&rd, &mdp.shape(), inner, rlspec::rng::derive_seed(cli.seed, 2))?;
            trajectory(&mut sim, &policy, args.steps, policy_seed)?
        }
    };
    Ok(vec![("trajectory.csv".into(), csv)])
}

/// Reward machine and discount that Q-learning optimizes for `spec`.
fn q_target(spec: &Specification<f64>, mdp: &Mdp<f64>, gamma: f64) -> Result<(rlspec::RewardMachine, f64)> {
    let shape = mdp.shape();
    Ok(match spec {
        Specification::DiscountedRm { machine, gamma: Discount::Constant(g) } => (machine.lower(&shape)?, *g),
        Specification::DiscountedRm { .. } => bail!("Q-learning needs a constant discount"),
        Specification::LimitAvgRm { machine } => (machine.lower(&shape)?, gamma),
        Specification::Reach(x) => (build_reach_arm::<f64, _>(x)?.lower(&shape)?, gamma),
        Specification::Safe(x) => (build_safe_arm::<f64, _>(x)?.lower(&shape)?, gamma),
        Specification::Ltl { .. } => bail!("Q-learning has no reward for LTL; use --learner model"),
    })
}

fn learn(cli: &Cli, args: &LearnArgs) -> Result<Files> {
    let mdp = source::mdp(&args.mdp)?;
    let spec = source::spec(&args.spec, mdp.propositions())?;
    let config = LearnerConfig { seed: cli.seed, step_budget: args.steps, eval_every: args.eval_every, ..Default::default() };
    let mut sim = MdpSimulator::new(&mdp, rlspec::rng::derive_seed(cli.seed, 1));
    let trace = match args.learner {
        LearnerKind::Q => {
            let (rm, gamma) = q_target(&spec, &mdp, args.gamma)?;
            q_learning(&mut sim, &rm, gamma, &config)?.0
        }
        LearnerKind::Model => model_based_learner(&mut sim, &mdp.shape(), &spec, &config)?,
    };
    let convergence = convergence_trace(&trace, &mdp, &spec)?;
    let mistakes = match args.eps {
        Some(eps) => Some(pac_mistake_count(&trace, &mdp, &spec, eps)?),
        None => None,
    };
    let snapshots: Vec<Value> =
        trace.snapshots.iter().map(|s| json!({ "iteration": s.iteration, "policy": s.policy })).collect();
    let policies = json!({
        "optimum": convergence.optimum,
        "final_gap": convergence.final_gap(),
        "mistakes": mistakes,
        "snapshots": snapshots,
    });
    Ok(vec![("trace.csv".into(), convergence.to_csv()), ("policies.json".into(), pretty(&policies))])
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> Result<(Files, bool)> {
    let report: ExperimentReport = match args.name {
        ExperimentName::Thm1 => {
            let rm = match &args.machine {
                None => canonical_reach_rm(),
                Some(m) => source::machine(m)?.lower(&fig1_mdp(0.5, 1.0, 1.0)?.shape())?,
            };
            synthesize_thm1_counterexample(&rm, args.gamma)?.1
        }
        ExperimentName::Thm3 => {
            let arm = match &args.machine {
                None => build_reach_arm::<f64, _>(&["b"])?,
                Some(m) => match source::machine(m)? {
                    Machine::Abstract(arm) => arm,
                    Machine::State(_) => bail!("thm3 needs an abstract reward machine"),
                },
            };
            analyze_arm_for_buchi(&arm)?.2
        }
        ExperimentName::Robustness => robustness_experiment(args.delta.unwrap_or(0.1), args.eps.unwrap_or(0.5))?,
        ExperimentName::Pac => {
            let defaults = PacExperiment::default();
            let learner = match args.learner {
                LearnerKind::Model => PacLearner::ModelBased,
                LearnerKind::Q => PacLearner::QLearning { gamma: args.gamma },
            };
            pac_indistinguishability_experiment(&PacExperiment {
                learner,
                eps: args.eps.unwrap_or(defaults.eps),
                k: args.k,
                delta: args.delta,
                trials: cli.trials.unwrap_or(defaults.trials),
                seed: cli.seed,
                ..defaults
            })?
        }
    };
    let name = report.name.clone();
    let passed = report.passed();
    Ok((vec![(format!("{name}.json"), report.to_json()), (format!("{name}.csv"), report.to_csv())], passed))
}

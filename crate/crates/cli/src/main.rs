mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rlspec", version, about = "Labeled MDPs, specifications, reductions and counterexample experiments")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Stochasticity tolerance used by `validate`.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of trials for randomized experiments.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check an MDP, machine, automaton or reduction descriptor file.
    Validate(ValidateArgs),
    /// Optimal value and an optimal policy.
    Solve(SolveArgs),
    /// Build a reduction descriptor and check it against the model.
    Reduce(ReduceArgs),
    /// Sample a trajectory under a policy.
    Simulate(SimulateArgs),
    /// Run a learner and report its convergence trace.
    Learn(LearnArgs),
    /// Run one of the counterexample experiments.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FileKind {
    Mdp,
    Machine,
    Buchi,
    Reduction,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub file: String,
    /// File kind; guessed from the document when omitted.
    #[arg(long)]
    pub kind: Option<FileKind>,
    /// Original MDP for reduction descriptors.
    #[arg(long)]
    pub base: Option<String>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// MDP JSON file, or `fig1:p1,p2,p3`, `fig3:p1,p2`, `fig4:p1,p2`.
    pub mdp: String,
    /// `reach:<props>`, `safe:<props>`, `ltl:<formula>`,
    /// `discounted:<machine>:<gamma>`, `limavg:<machine>`.
    #[arg(long)]
    pub spec: String,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    pub mdp: String,
    #[arg(long)]
    pub spec: String,
    /// `product`, `multidiscount`, `lambda:<x>` or `twodiscount:<g1>,<g2>`.
    #[arg(long)]
    pub kind: String,
    /// Policy budget for the exhaustive preservation check.
    #[arg(long, default_value_t = 1 << 20)]
    pub budget: u64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub mdp: String,
    /// `uniform`, `actions:<a0,a1,...>` or a policy JSON file.
    #[arg(long, default_value = "uniform")]
    pub policy: String,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Simulate the reduced MDP of this descriptor through the original.
    #[arg(long)]
    pub reduction: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LearnerKind {
    Q,
    Model,
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    pub mdp: String,
    #[arg(long)]
    pub spec: String,
    #[arg(long, value_enum, default_value_t = LearnerKind::Q)]
    pub learner: LearnerKind,
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 10_000)]
    pub eval_every: u64,
    /// Discount for Q-learning when the specification has none.
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    /// Also count snapshots that are not `eps`-optimal.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Thm1,
    Thm3,
    Robustness,
    Pac,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    /// Machine for thm1 (state machine on the reachability figure) or thm3
    /// (abstract machine over `b`).
    #[arg(long)]
    pub machine: Option<String>,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "K", alias = "k", default_value_t = 21)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = LearnerKind::Model)]
    pub learner: LearnerKind,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

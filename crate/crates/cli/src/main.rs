//! `sgcca`: generate synthetic blocks, fit SGCCA models, benchmark solvers,
//! project vectors and grid-search sparsity budgets.

mod commands;
mod output;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use settings::Settings;

/// Failure reported as a single `error[code]: message` line.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<sgcca::Error> for CliError {
    fn from(e: sgcca::Error) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = self.message.replace('\n', " ");
        write!(f, "error[{}]: {}", self.code, message)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sgcca",
    version,
    about = "Sparse generalized canonical correlation analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic blocks with a known sparse structure.
    Gen(GenArgs),
    /// Fit one model and write a report plus per-block coefficients.
    Fit(FitArgs),
    /// Time several algorithms over the same sequence of starting points.
    Bench(BenchArgs),
    /// Linear maximization and Euclidean projection of one vector.
    Project(ProjectArgs),
    /// Pick per-block sparsity budgets by support recovery.
    Grid(GridArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (a file for `project`).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Comma-separated block CSV files (header row, one file per block).
    #[arg(long)]
    blocks: Option<String>,
    /// Design preset (complete, hierarchical, cascade) or a CSV connection matrix.
    #[arg(long)]
    design: Option<String>,
    /// Ground-truth file written by `gen`, for sensitivity and specificity.
    #[arg(long)]
    ground_truth: Option<String>,
    /// Center and scale every column before fitting.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// bcd1, bcd2, bcd3, gp1, gp2, gp3 or baseline.
    #[arg(long)]
    algo: Option<String>,
    /// horst, centroid or factorial.
    #[arg(long)]
    scheme: Option<String>,
    /// Seed of the random feasible start.
    #[arg(long)]
    seed: Option<String>,
    /// BCD: relative improvement threshold. GP: projected-step threshold.
    #[arg(long)]
    tol: Option<String>,
    /// Sweep (BCD) or step (GP) limit.
    #[arg(long)]
    max_iters: Option<String>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<String>,
    /// Rows per block.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated block widths.
    #[arg(long)]
    dims: Option<String>,
    /// Nonzero loadings per block.
    #[arg(long)]
    support: Option<String>,
    /// Variance of the additive noise.
    #[arg(long)]
    noise_var: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated l1 budgets, one per block.
    #[arg(long)]
    sparsity: Option<String>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    sparsity: Option<String>,
    /// Starting points per algorithm (seeds `seed`, `seed + 1`, ...).
    #[arg(long)]
    repeats: Option<String>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[command(flatten)]
    common: Common,
    /// File of numbers separated by commas, spaces or newlines.
    input: PathBuf,
    /// l1 budget.
    #[arg(long)]
    t: Option<String>,
    /// p1, p2 or p3.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Candidates per block: comma-separated within a block, `;` between blocks.
    #[arg(long)]
    grid: Option<String>,
}

impl DataArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("blocks", self.blocks.clone()),
            ("design", self.design.clone()),
            ("ground_truth", self.ground_truth.clone()),
            ("standardize", self.standardize.then(|| "true".into())),
        ]
    }
}

impl SolverArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("algo", self.algo.clone()),
            ("scheme", self.scheme.clone()),
            ("seed", self.seed.clone()),
            ("tol", self.tol.clone()),
            ("max_iters", self.max_iters.clone()),
        ]
    }
}

fn settings(
    common: &Common,
    mut pairs: Vec<(&'static str, Option<String>)>,
) -> Result<Settings, CliError> {
    pairs.push(("out", common.out.clone()));
    Settings::load(common.config.as_deref(), pairs)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => {
            let s = settings(
                &a.common,
                vec![
                    ("seed", a.seed),
                    ("n", a.n),
                    ("dims", a.dims),
                    ("support", a.support),
                    ("noise_var", a.noise_var),
                ],
            )?;
            commands::gen(&s)
        }
        Command::Fit(a) => {
            let mut pairs = a.data.pairs();
            pairs.extend(a.solver.pairs());
            pairs.push(("sparsity", a.sparsity));
            commands::fit(&settings(&a.common, pairs)?)
        }
        Command::Bench(a) => {
            let mut pairs = a.data.pairs();
            pairs.extend(a.solver.pairs());
            pairs.push(("sparsity", a.sparsity));
            pairs.push(("repeats", a.repeats));
            commands::bench(&settings(&a.common, pairs)?)
        }
        Command::Project(a) => {
            let s = settings(&a.common, vec![("t", a.t), ("variant", a.variant)])?;
            commands::project(&s, &a.input)
        }
        Command::Grid(a) => {
            let mut pairs = a.data.pairs();
            pairs.extend(a.solver.pairs());
            pairs.push(("grid", a.grid));
            commands::grid(&settings(&a.common, pairs)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::new("usage", first));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

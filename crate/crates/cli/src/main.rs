//! `memberscope`: build wave-plate POVMs, verify whether they can solve
//! fidelity membership problems conclusively, and decide from coincidence
//! data which fidelity segment contains an unknown two-qubit state.
//!
//! Exit codes: 0 = conclusive decision (or plain success), 2 = the data
//! was processed but the verdict is inconclusive, 1 = any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memberscope::format::{self, AngleUnit, ExperimentFile, Metadata};
use memberscope::report::{self, to_json_pretty};
use memberscope::svg;
use memberscope_core::linalg::{ComplexMatrix, HermitianOperator, C64, DEFAULT_RANK_TOL};
use memberscope_core::membership::{
    decide, overlap_estimates, solvable_pure, standard_reference_states, sweep, DecisionPolicy,
    MembershipError, Partition, ReferenceSpec, Verdict, SOLVABILITY_TOL,
};
use memberscope_core::povm::{povm_from_settings, settings, simulate_counts, Povm};
use memberscope_core::states::{
    bell_state, bloch_to_density, werner_state, BellState, BlochVector, DensityMatrix, PureState,
};

const ENV_FIT_TOL: &str = "MEMBERSCOPE_FIT_TOL";

#[derive(Parser)]
#[command(name = "memberscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// POVM inspection commands.
    Povm {
        #[command(subcommand)]
        command: PovmCommand,
    },
    /// Decide which fidelity segment contains the measured state.
    Solve(SolveArgs),
    /// Run the decision over a grid of threshold pairs.
    Sweep(SweepArgs),
    /// Generate synthetic coincidence data for a known state.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum PovmCommand {
    /// Span dimension, perturbation space, and per-reference solvability.
    Check {
        /// `table1`, `table2`, `minimal-psi-minus`, or a settings file.
        spec: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Experiment file (JSON, or CSV count table).
    #[arg(long)]
    data: PathBuf,
    /// `table1`, `table2`, `minimal-psi-minus`, or a settings file.
    #[arg(long, default_value = "table1")]
    povm: String,
    /// Reference state name (repeatable): Psi-, Psi+, Phi-, Phi+, 00, 01, 10, 11.
    #[arg(long = "ref", value_name = "NAME")]
    refs: Vec<String>,
    /// Fidelity threshold per reference (repeat to pair with --ref).
    #[arg(long = "eps", value_name = "VALUE")]
    epsilons: Vec<f64>,
    #[command(flatten)]
    tols: TolArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TolArgs {
    /// Residual at or below which a segment fit counts as exact
    /// (default 1e-7; MEMBERSCOPE_FIT_TOL overrides).
    #[arg(long)]
    fit_tol: Option<f64>,
    /// Residual separation the runner-up segment must keep (default 1e-4).
    #[arg(long)]
    reject_tol: Option<f64>,
}

impl TolArgs {
    fn policy(&self) -> Result<DecisionPolicy, CliError> {
        let mut policy = DecisionPolicy::default();
        if let Ok(text) = std::env::var(ENV_FIT_TOL) {
            policy.fit_tol = text
                .parse()
                .map_err(|_| CliError::Usage(format!("{ENV_FIT_TOL}={text} is not a number")))?;
        }
        if let Some(fit) = self.fit_tol {
            policy.fit_tol = fit;
        }
        if let Some(reject) = self.reject_tol {
            policy.reject_tol = reject;
        }
        Ok(policy)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "table1")]
    povm: String,
    /// Threshold grids as `MINUS_LIST:PLUS_LIST`, e.g. `0.5,0.7:0.3,0.5`;
    /// the sweep covers the Cartesian product.
    #[arg(long)]
    grid: String,
    /// Render the partition diagram here.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    tols: TolArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Bell names, `00|01|10|11`, `mixed`, `werner:P`,
    /// `bloch:FILE`, or `density:FILE`.
    #[arg(long)]
    state: String,
    #[arg(long, default_value = "table1")]
    povm: String,
    /// Coincidences per basis; 0 records exact probabilities.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Angle unit written to the file.
    #[arg(long, value_enum, default_value = "pi-fractions")]
    angle_unit: AngleUnitArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AngleUnitArg {
    Radians,
    PiFractions,
}

impl From<AngleUnitArg> for AngleUnit {
    fn from(a: AngleUnitArg) -> Self {
        match a {
            AngleUnitArg::Radians => AngleUnit::Radians,
            AngleUnitArg::PiFractions => AngleUnit::PiFractions,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] format::FormatError),
    #[error(transparent)]
    Membership(#[from] MembershipError),
    #[error("{0}")]
    State(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(conclusive) => {
            if conclusive {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

/// Ok(true) maps to exit 0, Ok(false) to exit 2 (inconclusive).
fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Povm {
            command: PovmCommand::Check { spec, json },
        } => cmd_povm_check(&spec, json),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn resolve_povm(spec: &str) -> Result<(String, Povm), CliError> {
    let povm = match spec {
        "table1" => povm_from_settings(&settings::three_mub())
            .map_err(|e| CliError::State(e.to_string()))?,
        "table2" => povm_from_settings(&settings::nine_basis())
            .map_err(|e| CliError::State(e.to_string()))?,
        "minimal-psi-minus" => {
            memberscope_core::membership::minimal_pure_povm(&bell_state(BellState::PsiMinus))
        }
        path => format::load_povm(Path::new(path))?,
    };
    Ok((spec.to_string(), povm))
}

fn cmd_povm_check(spec: &str, json: bool) -> Result<bool, CliError> {
    let (source, povm) = resolve_povm(spec)?;
    let span = povm.span_dimension(DEFAULT_RANK_TOL);
    let kernel_dim = povm.perturbation_kernel().len();
    let complete = povm.is_informationally_complete(DEFAULT_RANK_TOL);

    let mut checks = Vec::new();
    if povm.dim() == 4 {
        for (name, phi) in standard_reference_states() {
            let rep = solvable_pure(&povm, &phi, SOLVABILITY_TOL)?;
            checks.push(report::reference_check(name, &rep));
        }
    }

    if json {
        let out = report::PovmCheckReport {
            tool_version: report::TOOL_VERSION.into(),
            source,
            elements: povm.len(),
            dim: povm.dim(),
            span_dimension: span,
            informationally_complete: complete,
            kernel_dimension: kernel_dim,
            references: checks,
        };
        print!("{}", to_json_pretty(&out));
    } else {
        println!("POVM {source}: {} elements on dimension {}", povm.len(), povm.dim());
        println!("span dimension:        {span}");
        println!(
            "informationally complete: {} (complete iff span = {})",
            if complete { "yes" } else { "no" },
            povm.dim() * povm.dim()
        );
        println!("perturbation space:    {kernel_dim}");
        for c in &checks {
            println!(
                "reference {:<5} solvable: {}  (worst violation {:.3e})",
                c.name,
                if c.solvable { "yes" } else { "NO " },
                c.worst_violation
            );
        }
    }
    Ok(true)
}

fn parse_reference(name: &str) -> Result<PureState, CliError> {
    let canonical = name.trim();
    standard_reference_states()
        .into_iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(canonical))
        .map(|(_, phi)| phi)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "unknown reference {name:?}; expected one of 00, 01, 10, 11, Phi-, Phi+, Psi-, Psi+"
            ))
        })
}

fn build_partition(refs: &[String], epsilons: &[f64]) -> Result<(Vec<String>, Partition), CliError> {
    if refs.is_empty() {
        return Err(CliError::Usage(
            "at least one --ref NAME --eps VALUE pair is required".into(),
        ));
    }
    if refs.len() != epsilons.len() {
        return Err(CliError::Usage(format!(
            "{} --ref flags but {} --eps flags; they must pair up",
            refs.len(),
            epsilons.len()
        )));
    }
    let mut specs = Vec::with_capacity(refs.len());
    for (name, &eps) in refs.iter().zip(epsilons) {
        specs.push(ReferenceSpec::new(parse_reference(name)?, eps)?);
    }
    Ok((refs.to_vec(), Partition::new(specs)?))
}

fn cmd_solve(args: SolveArgs) -> Result<bool, CliError> {
    let record = format::load_experiment(&args.data)?;
    let (_, povm) = resolve_povm(&args.povm)?;
    let (names, partition) = build_partition(&args.refs, &args.epsilons)?;
    let policy = args.tols.policy()?;

    let decision = decide(&record, &povm, &partition, &policy)?;
    let out = report::decision_report(&names, &partition, &decision, policy.fit_tol, policy.reject_tol);
    let text = to_json_pretty(&out);
    match &args.output {
        Some(path) => format::write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(matches!(decision.verdict, Verdict::Conclusive(_)))
}

fn parse_grid(spec: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let (minus, plus) = spec.split_once(':').ok_or_else(|| {
        CliError::Usage("grid must look like `0.5,0.7:0.3,0.5` (MINUS_LIST:PLUS_LIST)".into())
    })?;
    let parse_list = |text: &str| -> Result<Vec<f64>, CliError> {
        text.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad grid value {t:?}")))
            })
            .collect()
    };
    Ok((parse_list(minus)?, parse_list(plus)?))
}

fn cmd_sweep(args: SweepArgs) -> Result<bool, CliError> {
    let record = format::load_experiment(&args.data)?;
    let (_, povm) = resolve_povm(&args.povm)?;
    let (minus_grid, plus_grid) = parse_grid(&args.grid)?;
    let policy = args.tols.policy()?;

    let cells = sweep(&record, &povm, &minus_grid, &plus_grid, &policy)?;

    if let Some(path) = &args.svg {
        let image = svg::render_sweep(&cells, plus_grid.len());
        format::write_atomic(path, &image)?;
    }
    let out = report::sweep_report(&cells, policy.fit_tol, policy.reject_tol);
    let text = to_json_pretty(&out);
    match &args.output {
        Some(path) => format::write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

#[derive(serde::Deserialize)]
struct BlochFile {
    coords: Vec<f64>,
}

#[derive(serde::Deserialize)]
struct DensityFile {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

fn parse_state(spec: &str) -> Result<DensityMatrix, CliError> {
    let bad = |msg: String| CliError::State(msg);
    if let Some(rest) = spec.strip_prefix("werner:") {
        let p: f64 = rest
            .parse()
            .map_err(|_| bad(format!("werner parameter {rest:?} is not a number")))?;
        return werner_state(p).map_err(|e| bad(e.to_string()));
    }
    if let Some(rest) = spec.strip_prefix("bloch:") {
        let text = std::fs::read_to_string(rest).map_err(|e| bad(format!("{rest}: {e}")))?;
        let file: BlochFile =
            serde_json::from_str(&text).map_err(|e| bad(format!("{rest}: {e}")))?;
        let b = BlochVector::new(file.coords).map_err(|e| bad(e.to_string()))?;
        return bloch_to_density(&b).map_err(|e| bad(e.to_string()));
    }
    if let Some(rest) = spec.strip_prefix("density:") {
        let text = std::fs::read_to_string(rest).map_err(|e| bad(format!("{rest}: {e}")))?;
        let file: DensityFile =
            serde_json::from_str(&text).map_err(|e| bad(format!("{rest}: {e}")))?;
        let dim = file.re.len();
        if file.im.len() != dim
            || file.re.iter().any(|r| r.len() != dim)
            || file.im.iter().any(|r| r.len() != dim)
        {
            return Err(bad(format!("{rest}: re/im must be square and equally sized")));
        }
        let m = ComplexMatrix::from_fn(dim, |r, c| C64::new(file.re[r][c], file.im[r][c]));
        let op = HermitianOperator::new(m).map_err(|e| bad(e.to_string()))?;
        return DensityMatrix::new(op).map_err(|e| bad(e.to_string()));
    }
    if spec.eq_ignore_ascii_case("mixed") {
        return Ok(DensityMatrix::maximally_mixed(4));
    }
    Ok(parse_reference(spec)?.to_density())
}

fn cmd_simulate(args: SimulateArgs) -> Result<bool, CliError> {
    let rho = parse_state(&args.state)?;
    let (_, povm) = resolve_povm(&args.povm)?;
    let mub = povm
        .source_settings()
        .ok_or_else(|| CliError::Usage(format!("POVM {} carries no wave-plate settings", args.povm)))?
        .to_vec();
    if povm.dim() != rho.dim() {
        return Err(CliError::State(format!(
            "state dimension {} does not match the POVM dimension {}",
            rho.dim(),
            povm.dim()
        )));
    }
    let record = simulate_counts(&rho, &mub, args.shots, args.seed);

    // quick diagnostic on stderr when the record supports it
    if let Ok(est) = overlap_estimates(&record) {
        eprintln!(
            "estimated F(Psi-) = {:.4}, F(Psi+) = {:.4}",
            est.psi_minus, est.psi_plus
        );
    }

    let metadata = Metadata {
        label: Some(args.state.clone()),
        shots: Some(args.shots),
        timestamp: None,
    };
    let file = ExperimentFile::from_record(&record, args.angle_unit.into(), metadata);
    let text = to_json_pretty(&file);
    match &args.output {
        Some(path) => format::write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

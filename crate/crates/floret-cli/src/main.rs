//! Command-line interface for fitting floret models to sequential-design
//! data: validate models, print design matrices, fit data, simulate, and
//! run Monte Carlo verification of the asymptotic covariances.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use floret_core::estimation::fit_mle;
use floret_core::simulate::{self, Sampler, SimulationConfig};
use floret_core::{
    DesignMatrix, Error as CoreError, FitReport, ModelSpec, ObservedCounts, ParameterVector,
    SequentialTree,
};

/// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "floret",
    version,
    about = "Fit multiplicative staged-tree models to sequential-design data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Path,
    Multinomial,
}

impl From<SamplerArg> for Sampler {
    fn from(s: SamplerArg) -> Sampler {
        match s {
            SamplerArg::Path => Sampler::Path,
            SamplerArg::Multinomial => Sampler::Multinomial,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model file and report its structure
    Validate { model: PathBuf },
    /// Print the design matrix with floret row labels and leaf path headers
    Matrix { model: PathBuf },
    /// Fit a model to observed counts
    Fit {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Generate data from a model at given true parameter values
    Simulate {
        model: PathBuf,
        /// Per-floret probabilities, repeatable: --theta floret=p1,p2,...
        #[arg(long)]
        theta: Vec<String>,
        #[arg(long)]
        n: u64,
        #[arg(long, env = "FLORET_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "path")]
        sampler: SamplerArg,
    },
    /// Run a Monte Carlo check of the asymptotic covariance at theta0
    McCheck {
        model: PathBuf,
        #[arg(long)]
        theta: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 2_000)]
        reps: u64,
        #[arg(long, env = "FLORET_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "multinomial")]
        sampler: SamplerArg,
        /// Relative Frobenius tolerance for the covariance comparison
        #[arg(long, default_value_t = 0.10)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CoreError>()
                .map_or(EXIT_INVALID, |e| match e {
                    CoreError::ZeroExposure(_) | CoreError::BoundaryFit => EXIT_NUMERIC,
                    _ => EXIT_INVALID,
                });
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Matrix { model } => cmd_matrix(&model),
        Command::Fit {
            model,
            data,
            format,
        } => cmd_fit(&model, &data, format),
        Command::Simulate {
            model,
            theta,
            n,
            seed,
            sampler,
        } => cmd_simulate(&model, &theta, n, seed, sampler.into()),
        Command::McCheck {
            model,
            theta,
            n,
            reps,
            seed,
            sampler,
            tolerance,
        } => cmd_mc_check(&model, &theta, n, reps, seed, sampler.into(), tolerance),
    }
}

fn load_model(path: &Path) -> anyhow::Result<(SequentialTree, DesignMatrix)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))?;
    let spec = ModelSpec::from_json(&text)
        .with_context(|| format!("invalid model file {}", path.display()))?;
    let tree = SequentialTree::validate(&spec)?;
    let m = DesignMatrix::from_tree(&tree);
    Ok((tree, m))
}

fn cmd_validate(model: &Path) -> anyhow::Result<ExitCode> {
    let (tree, m) = load_model(model)?;
    println!("model: {}", model.display());
    println!("leaves (I)            = {}", tree.leaf_count());
    println!("non-terminal nodes (K) = {}", tree.node_count());
    println!("florets (F)           = {}", tree.floret_count());
    println!("degrees of freedom    = {}", m.degrees_of_freedom()?);
    for (f, fl) in tree.florets().iter().enumerate() {
        println!(
            "floret {:<12} outcomes = {:?}  nodes = {}  overall effect = {}",
            fl.id,
            fl.outcomes,
            tree.floret_members(f).len(),
            m.floret_has_overall_effect(f)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_matrix(model: &Path) -> anyhow::Result<ExitCode> {
    let (tree, m) = load_model(model)?;
    let headers = tree.leaf_labels();
    let width = headers.iter().map(String::len).max().unwrap_or(0).max(3);
    print!("{:<24}", "");
    for h in &headers {
        print!(" {h:>width$}");
    }
    println!();
    let mut row = 0;
    for (f, fl) in tree.florets().iter().enumerate() {
        for label in &fl.outcomes {
            print!("{:<24}", format!("{}:{}", fl.id, label));
            for i in 0..m.leaf_count() {
                print!(" {:>width$}", m.entry(row, i));
            }
            println!();
            row += 1;
        }
        let _ = f;
    }
    Ok(ExitCode::SUCCESS)
}

fn read_counts(tree: &SequentialTree, path: &Path) -> anyhow::Result<ObservedCounts> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read data file {}", path.display()))?;
    let counts = if path.extension().is_some_and(|e| e == "csv") {
        read_csv_counts(tree, &text)?
    } else {
        let raw: Vec<u64> = serde_json::from_str(&text)
            .with_context(|| format!("data file {} is not a JSON integer array", path.display()))?;
        raw
    };
    if counts.len() != tree.leaf_count() {
        bail!(
            "data has {} entries but the model has {} leaves",
            counts.len(),
            tree.leaf_count()
        );
    }
    Ok(ObservedCounts::new(counts)?)
}

fn read_csv_counts(tree: &SequentialTree, text: &str) -> anyhow::Result<Vec<u64>> {
    let mut counts = vec![0u64; tree.leaf_count()];
    let mut seen = vec![false; tree.leaf_count()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("leaf_path,count")) {
            continue;
        }
        let (path, count) = line
            .rsplit_once(',')
            .with_context(|| format!("line {}: expected `leaf_path,count`", lineno + 1))?;
        let leaf = tree
            .leaf_by_label(path.trim())
            .ok_or_else(|| CoreError::UnknownLeafPath(path.trim().to_string()))?;
        if seen[leaf] {
            bail!("line {}: duplicate leaf path `{}`", lineno + 1, path.trim());
        }
        seen[leaf] = true;
        counts[leaf] = count
            .trim()
            .parse()
            .with_context(|| format!("line {}: invalid count `{}`", lineno + 1, count.trim()))?;
    }
    Ok(counts)
}

fn cmd_fit(model: &Path, data: &Path, format: Format) -> anyhow::Result<ExitCode> {
    let (tree, m) = load_model(model)?;
    let y = read_counts(&tree, data)?;
    let fit = fit_mle(&m, &y)?;
    let report = FitReport::build(&tree, &m, &fit, &y)?;
    match format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_theta(tree: &SequentialTree, args: &[String]) -> anyhow::Result<ParameterVector> {
    let mut groups: Vec<Option<Vec<f64>>> = vec![None; tree.floret_count()];
    for arg in args {
        let (id, values) = arg
            .split_once('=')
            .with_context(|| format!("--theta `{arg}`: expected floret=p1,p2,..."))?;
        let f = tree
            .florets()
            .iter()
            .position(|fl| fl.id == id)
            .with_context(|| format!("--theta `{arg}`: unknown floret `{id}`"))?;
        let parsed: Vec<f64> = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("--theta `{arg}`: invalid probability list"))?;
        if groups[f].replace(parsed).is_some() {
            bail!("--theta given twice for floret `{id}`");
        }
    }
    let groups: Vec<Vec<f64>> = groups
        .into_iter()
        .enumerate()
        .map(|(f, g)| g.with_context(|| format!("missing --theta for floret `{}`", tree.florets()[f].id)))
        .collect::<Result<_, _>>()?;
    Ok(ParameterVector::new(groups)?)
}

fn cmd_simulate(
    model: &Path,
    theta: &[String],
    n: u64,
    seed: u64,
    sampler: Sampler,
) -> anyhow::Result<ExitCode> {
    let (tree, m) = load_model(model)?;
    let theta0 = parse_theta(&tree, theta)?;
    let y = match sampler {
        Sampler::Path => simulate::sample_path(&tree, &theta0, n, seed)?,
        Sampler::Multinomial => simulate::sample_multinomial(&m, &theta0, n, seed)?,
    };
    println!("{}", serde_json::to_string(y.counts())?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_mc_check(
    model: &Path,
    theta: &[String],
    n: u64,
    reps: u64,
    seed: u64,
    sampler: Sampler,
    tolerance: f64,
) -> anyhow::Result<ExitCode> {
    let (tree, m) = load_model(model)?;
    let theta0 = parse_theta(&tree, theta)?;
    let cfg = SimulationConfig {
        theta0,
        n,
        reps,
        seed,
        sampler,
    };
    let report = simulate::run_monte_carlo(&cfg, &tree, &m)?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let frob = |m: &[Vec<f64>]| -> f64 {
        m.iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    };
    let dim = report.phi_theta.len();
    let mut diff = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            diff[i][j] = report.scaled_error_covariance[i][j] - report.phi_theta[i][j];
        }
    }
    let rel = frob(&diff) / frob(&report.phi_theta);
    let pass = rel <= tolerance;
    eprintln!("covariance check: relative Frobenius error = {rel:.4} (tolerance {tolerance})");
    eprintln!(
        "boundary replicates excluded: {} of {}",
        report.boundary_count, report.reps
    );
    eprintln!("verdict: {}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_NUMERIC))
    }
}

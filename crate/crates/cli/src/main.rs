//! `kernrank`: sampling, rank measurement, tensor dumps, recovery and
//! condition sweeps from the command line.
//!
//! Exit status is 0 on success, 1 on bad input and 2 when a computation
//! produces non-finite values or fails to converge.

mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kernrank_core::kernel::parse_real;
use kernrank_core::montecarlo::{analytic_mean_distance, trial_seed, DEFAULT_COND_TRIALS, DEFAULT_K_GRID};
use kernrank_core::report::{
    fmt_real, write_csv, write_fields_csv, write_fields_jsonl, write_jsonl, write_matrices_csv,
};
use kernrank_core::rng::{derive_seed, sample_rng};
use kernrank_core::{
    alpha_recommendation, condition_sweep, modified_sigma_field, outer_field, rank_law_sweep, recover, recover_cov,
    sigma_field, CovField, DMatrix, DVector, ExperimentConfig, Field, KernelFamily, KernelSpec, ManifoldSpec, Record,
    Region, SystemKind, TensorSystem, TolerancePolicy,
};
use rand::Rng;

/// Stream index for the forward-simulation weights of a sample.
const WEIGHT_STREAM: u64 = 0x5745_4947;

#[derive(Parser)]
#[command(name = "kernrank", version, about = "Rank and conditioning experiments for distance kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw uniform points.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
    },
    /// Rank statistics of kernel matrices or tensor systems.
    Rank {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
        #[arg(long, default_value = "sqdist")]
        kernel: KernelFamily,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = System::Kernel)]
        system: System,
    },
    /// Dump the Y, C, Z and Psi systems of one sample.
    Tensor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
        /// Shift used to build C with the modified covariance.
        #[arg(long, value_parser = parse_alpha)]
        alpha: Option<f64>,
    },
    /// Recover weights from covariance blocks, simulated or read from files.
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "points", conflicts_with = "points")]
        k: Option<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Points file, one point per line.
        #[arg(long, requires = "sigma")]
        points: Option<PathBuf>,
        /// Covariance blocks, one row-major block per line.
        #[arg(long, requires = "points")]
        sigma: Option<PathBuf>,
    },
    /// Condition numbers of shifted squared-distance matrices.
    CondSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', value_parser = parse_alpha, default_value = "0,pi/2")]
        alpha_list: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_COND_TRIALS)]
        trials: usize,
    },
    /// Monte Carlo estimate of the mean pairwise distance.
    Alpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
}

#[derive(Args)]
struct Common {
    /// `euclid:<n>[:box=<a>,<b>]` or `sphere:<n>`.
    #[arg(long, value_parser = parse_domain)]
    manifold: Domain,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rank threshold as a fraction of the largest singular value.
    #[arg(long)]
    tol_factor: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Sizes {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
}

impl Sizes {
    fn values(&self) -> Vec<usize> {
        match (&self.k, &self.k_list) {
            (Some(k), _) => vec![*k],
            (None, Some(list)) => list.clone(),
            (None, None) => unreachable!("clap requires one of --k, --k-list"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    Kernel,
    Y,
    Z,
}

impl From<System> for SystemKind {
    fn from(s: System) -> Self {
        match s {
            System::Kernel => SystemKind::KernelMatrix,
            System::Y => SystemKind::Y,
            System::Z => SystemKind::Z,
        }
    }
}

#[derive(Clone)]
struct Domain {
    manifold: ManifoldSpec,
    region: Option<Region>,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    let (base, region) = match s.split_once(":box=") {
        Some((base, bounds)) => {
            let (lo, hi) =
                bounds.split_once(',').ok_or_else(|| format!("box must be `box=<a>,<b>`, got `{bounds}`"))?;
            let lo = parse_real(lo).map_err(|e| e.to_string())?;
            let hi = parse_real(hi).map_err(|e| e.to_string())?;
            (base, Some((lo, hi)))
        }
        None => (s, None),
    };
    let manifold: ManifoldSpec = base.parse().map_err(|e: kernrank_core::Error| e.to_string())?;
    let region = match (region, manifold) {
        (None, _) => None,
        (Some((lo, hi)), ManifoldSpec::Euclidean { n }) => {
            let r = Region::cube(n, lo, hi);
            r.validate(n).map_err(|e| e.to_string())?;
            Some(r)
        }
        (Some(_), ManifoldSpec::UnitSphere { .. }) => return Err("a box only applies to euclid manifolds".into()),
    };
    Ok(Domain { manifold, region })
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

/// Marks a result that came out non-finite.
#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().any(|x| !x.is_finite()) {
        return Err(NumericalFailure(format!("{what} is not finite")).into());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NumericalFailure>().is_some() {
        return 2;
    }
    match err.downcast_ref::<kernrank_core::Error>() {
        Some(kernrank_core::Error::NonFinite | kernrank_core::Error::NoConvergence) => 2,
        _ => 1,
    }
}

impl Common {
    fn policy(&self) -> Result<TolerancePolicy> {
        Ok(match self.tol_factor {
            Some(f) => TolerancePolicy::relative(f)?,
            None => TolerancePolicy::default(),
        })
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit<R: Record>(&self, rows: &[R]) -> Result<()> {
        let mut w = self.sink()?;
        match self.format {
            Format::Csv => write_csv(rows, &mut w)?,
            Format::Jsonl => write_jsonl(rows, &mut w)?,
        }
        Ok(w.flush()?)
    }

    fn emit_fields(&self, columns: &[String], rows: Vec<Vec<Field>>) -> Result<()> {
        let mut w = self.sink()?;
        match self.format {
            Format::Csv => write_fields_csv(columns, rows, &mut w)?,
            Format::Jsonl => write_fields_jsonl(columns, rows, &mut w)?,
        }
        Ok(w.flush()?)
    }
}

fn forward_weights(k: usize, sample_seed: u64) -> DVector<f64> {
    let mut rng = sample_rng(derive_seed(sample_seed, WEIGHT_STREAM));
    DVector::from_fn(k, |_, _| rng.random::<f64>())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("# {summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<String> {
    let common = match &command {
        Command::Sample { common, .. }
        | Command::Rank { common, .. }
        | Command::Tensor { common, .. }
        | Command::Recover { common, .. }
        | Command::CondSweep { common, .. }
        | Command::Alpha { common, .. } => common,
    };
    if let Some(threads) = common.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let Domain { manifold, region } = common.manifold.clone();
    let seed = common.seed;

    match command {
        Command::Sample { common, k } => {
            let sample = manifold.sample_uniform(k, seed, region.as_ref())?;
            let mut columns = vec!["index".to_string()];
            columns.extend((0..manifold.coord_dim()).map(|i| format!("x{i}")));
            let rows = sample
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    std::iter::once(Field::Int(i as u64)).chain(p.as_slice().iter().map(|&x| Field::Real(x))).collect()
                })
                .collect();
            common.emit_fields(&columns, rows)?;
            Ok(format!("sample manifold={manifold} k={k} seed={seed}"))
        }

        Command::Rank { common, sizes, kernel, trials, system } => {
            let mut cfg = ExperimentConfig::new(KernelSpec::new(kernel, manifold), sizes.values(), trials, seed)?;
            cfg.region = region;
            cfg.tolerance = common.policy()?;
            cfg.validate()?;
            let rows = rank_law_sweep(&cfg, system.into())?;
            common.emit(&rows)?;
            let cells: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "k={} fullrank_fraction={} min_rank={} max_rank={} borderline_fraction={}",
                        r.k,
                        fmt_real(r.fullrank_fraction),
                        r.min_rank,
                        r.max_rank,
                        fmt_real(r.borderline_fraction)
                    )
                })
                .collect();
            Ok(format!("rank manifold={manifold} kernel={kernel} trials={trials} seed={seed} {}", cells.join(" | ")))
        }

        Command::Tensor { common, k, alpha } => {
            if matches!(common.format, Format::Jsonl) {
                bail!("tensor output is CSV only");
            }
            let sample = manifold.sample_uniform(k, seed, region.as_ref())?;
            let field = outer_field(manifold, &sample)?;
            let f = forward_weights(k, seed);
            let cov = match alpha {
                Some(a) => modified_sigma_field(&field, &f, &vec![a; k])?,
                None => sigma_field(&field, &f)?,
            };
            let sys = TensorSystem::build(&field, Some(&cov))?;
            let c = DMatrix::from_column_slice(cov.unfold().len(), 1, cov.unfold().as_slice());
            let fm = DMatrix::from_column_slice(k, 1, f.as_slice());
            ensure_finite("tensor system", sys.y.iter().chain(sys.z.iter()).chain(c.iter()).copied())?;
            let mut w = common.sink()?;
            write_matrices_csv(&[("Y", &sys.y), ("C", &c), ("Z", &sys.z), ("Psi", &sys.psi), ("f", &fm)], &mut w)?;
            w.flush()?;
            Ok(format!(
                "tensor manifold={manifold} k={k} seed={seed} d={} Y={}x{} Z={}x{} Psi={}x{}",
                field.d(),
                sys.y.nrows(),
                sys.y.ncols(),
                sys.z.nrows(),
                sys.z.ncols(),
                sys.psi.nrows(),
                sys.psi.ncols()
            ))
        }

        Command::Recover { common, k, trials, points, sigma } => {
            let policy = common.policy()?;
            if let (Some(points), Some(sigma)) = (points, sigma) {
                let sample = input::read_points(&points, manifold, seed)?;
                let field = outer_field(manifold, &sample)?;
                let cov = CovField::from_blocks(input::read_sigmas(&sigma, manifold.coord_dim())?, seed)?;
                if cov.k() != sample.len() {
                    bail!("{} points but {} covariance blocks", sample.len(), cov.k());
                }
                let rec = recover_cov(&field, &cov, policy)?;
                ensure_finite("recovered weights", rec.f_hat.iter().copied().chain([rec.residual]))?;
                let columns = ["index".to_string(), "f_hat".to_string()];
                let rows =
                    rec.f_hat.iter().enumerate().map(|(i, &x)| vec![Field::Int(i as u64), Field::Real(x)]).collect();
                common.emit_fields(&columns, rows)?;
                return Ok(format!(
                    "recover manifold={manifold} k={} rank_y={} rank_augmented={} unique={} residual={}",
                    sample.len(),
                    rec.rank_y,
                    rec.rank_augmented,
                    rec.unique,
                    fmt_real(rec.residual)
                ));
            }
            let k = k.expect("clap requires --k without --points");
            if trials == 0 {
                bail!("trials must be at least 1");
            }
            let mut rows = Vec::with_capacity(trials);
            let (mut unique, mut worst_error, mut worst_residual) = (0, 0.0f64, 0.0f64);
            for t in 0..trials {
                let sample_seed = trial_seed(seed, k, t);
                let sample = manifold.sample_uniform(k, sample_seed, region.as_ref())?;
                let field = outer_field(manifold, &sample)?;
                let f0 = forward_weights(k, sample_seed);
                let rec = recover(&field, &sigma_field(&field, &f0)?.unfold(), policy)?;
                let error = (&rec.f_hat - &f0).norm() / f0.norm();
                ensure_finite("recovered weights", rec.f_hat.iter().copied().chain([rec.residual, error]))?;
                unique += usize::from(rec.unique);
                worst_error = worst_error.max(error);
                worst_residual = worst_residual.max(rec.residual);
                rows.push(vec![
                    Field::Int(t as u64),
                    Field::Int(k as u64),
                    Field::Int(sample_seed),
                    Field::Int(rec.rank_y as u64),
                    Field::Int(rec.rank_augmented as u64),
                    Field::Int(u64::from(rec.unique)),
                    Field::Real(rec.residual),
                    Field::Real(error),
                ]);
            }
            let columns: Vec<String> =
                ["trial", "k", "sample_seed", "rank_y", "rank_augmented", "unique", "residual", "relative_error"]
                    .map(String::from)
                    .to_vec();
            common.emit_fields(&columns, rows)?;
            Ok(format!(
                "recover manifold={manifold} k={k} trials={trials} seed={seed} unique={unique}/{trials} max_relative_error={} max_residual={}",
                fmt_real(worst_error),
                fmt_real(worst_residual)
            ))
        }

        Command::CondSweep { common, alpha_list, k_list, trials } => {
            let ks = k_list.unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
            let rows = condition_sweep(manifold, region.as_ref(), &alpha_list, &ks, trials, seed)?;
            common.emit(&rows)?;
            let last_k = *ks.last().unwrap();
            let cells: Vec<String> = rows
                .iter()
                .filter(|r| r.k == last_k)
                .map(|r| format!("alpha={} mean_cond={}", fmt_real(r.alpha), fmt_real(r.mean_cond)))
                .collect();
            Ok(format!("cond-sweep manifold={manifold} trials={trials} seed={seed} k={last_k} {}", cells.join(" ")))
        }

        Command::Alpha { common, trials } => {
            let estimate = alpha_recommendation(manifold, trials, seed, region.as_ref())?;
            ensure_finite("alpha estimate", [estimate])?;
            let analytic = analytic_mean_distance(manifold, region.as_ref());
            let columns: Vec<String> =
                ["manifold", "trials", "seed", "estimate", "analytic"].map(String::from).to_vec();
            let row = vec![
                Field::Text(manifold.to_string()),
                Field::Int(trials as u64),
                Field::Int(seed),
                Field::Real(estimate),
                analytic.map_or(Field::Missing, Field::Real),
            ];
            common.emit_fields(&columns, vec![row])?;
            Ok(format!("alpha manifold={manifold} trials={trials} seed={seed} estimate={}", fmt_real(estimate)))
        }
    }
}

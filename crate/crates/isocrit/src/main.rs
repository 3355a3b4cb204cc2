use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isocrit::config::{check_writable, parse_list, pick, pick_opt, read_config, ConfigMap, ExperimentConfig, TestFunctionChoice};
use isocrit::emit::{self, ConstantsReport, Summary, SweepWriter, ZConstReport};
use isocrit::runner::Pool;
use isocrit::sweep::{run_sweep, simulate, SweepKind};
use isocrit::{HarnessError, Result};
use isocrit_core::field::DEFAULT_WAVES;
use isocrit_core::kac_rice::{log_rule, one_point_from_moments, two_point_profile, z_constant, ZOptions};
use isocrit_core::rng::SeedKey;
use isocrit_core::spectral::kernel_derivatives;
use isocrit_core::{Amplitude, SpectralMoments};

/// Critical points of isotropic Gaussian random fields: constants,
/// two-point densities and simulation sweeps.
#[derive(Parser)]
#[command(name = "isocrit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral moments and the critical point density C_m.
    Constants {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Kernel derivatives up to order 4 at separations t·e1.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// Comma-separated separations.
        #[arg(long)]
        t: Option<String>,
    },
    /// Two-point densities on log-spaced separations.
    TwoPoint {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        quad: Quadrature,
    },
    /// Z_m and V_m = Z_m + C_m.
    Zconst {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        quad: Quadrature,
    },
    /// Critical point censuses of [0, L]^m.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Side length L of the box.
        #[arg(long = "box")]
        side: Option<f64>,
    },
    /// Expectation and variance of c[f_R] over scales R.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// L_N[f] = N^-m c[f_N] over scales N.
    Lln {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// gaussian, gaussian-scaled:SIGMA or poly-gaussian:C.
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Quadrature {
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    waves: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long = "f", value_parser = parse_test_function)]
    f: Option<TestFunctionChoice>,
    /// Side of the unscaled support [0, side]^m.
    #[arg(long)]
    base_side: Option<f64>,
    /// Require at least 500 reps and compare against V_m.
    #[arg(long)]
    variance: bool,
    /// Skip the Z_m / V_m computation.
    #[arg(long)]
    no_constants: bool,
    /// Summary JSON path.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_test_function(s: &str) -> std::result::Result<TestFunctionChoice, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

struct Resolved {
    file: ConfigMap,
    dim: usize,
    amplitude: String,
    mc_samples: usize,
    seed: u64,
    workers: usize,
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(self) -> Result<Resolved> {
        let file = match &self.config {
            Some(p) => read_config(p)?,
            None => ConfigMap::new(),
        };
        let out = match self.out {
            Some(p) => Some(p),
            None => file.get("out").map(PathBuf::from),
        };
        if let Some(p) = &out {
            check_writable(p)?;
        }
        Ok(Resolved {
            dim: pick(self.dim, &file, "dim", 1)?,
            amplitude: pick(self.amplitude, &file, "amplitude", "gaussian".to_string())?,
            mc_samples: pick(self.mc_samples, &file, "mc-samples", 1 << 20)?,
            seed: pick(self.seed, &file, "seed", 0)?,
            workers: pick(self.workers, &file, "workers", 0)?,
            out,
            file,
        })
    }
}

impl Resolved {
    fn amplitude(&self) -> Result<Amplitude> {
        Ok(self.amplitude.parse::<Amplitude>()?)
    }

    fn z_options(&self, q: Quadrature) -> Result<ZOptions> {
        Ok(ZOptions {
            r_min: pick_opt(q.r_min, &self.file, "r-min")?,
            r_max: pick_opt(q.r_max, &self.file, "r-max")?,
            nodes: pick(q.nodes, &self.file, "nodes", ZOptions::default().nodes)?,
            n_mc: self.mc_samples,
            tolerance: None,
        })
    }

    fn experiment(&self, run: RunArgs) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            dim: self.dim,
            amplitude: self.amplitude.clone(),
            reps: pick(run.reps, &self.file, "reps", ExperimentConfig::default().reps)?,
            n_waves: pick(run.waves, &self.file, "waves", DEFAULT_WAVES)?,
            seed: self.seed,
            workers: self.workers,
            mc_samples: self.mc_samples,
            out: self.out.clone(),
            ..ExperimentConfig::default()
        })
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(std::io::BufWriter::new(
                std::fs::File::create(p).map_err(|source| HarnessError::Io {
                    path: p.display().to_string(),
                    source,
                })?,
            )),
            None => Box::new(std::io::stdout().lock()),
        })
    }
}

fn write_text(mut out: Box<dyn Write>, text: &str, path: Option<&Path>) -> Result<()> {
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|source| HarnessError::Io {
            path: path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into()),
            source,
        })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Constants { common, format } => {
            let r = common.resolve()?;
            let pool = Pool::new(r.workers);
            let a = r.amplitude()?;
            let mom = SpectralMoments::new(&a, r.dim)?;
            let one = one_point_from_moments(&pool, &mom, r.mc_samples, SeedKey::new(r.seed))?;
            let report = ConstantsReport {
                m: r.dim,
                amplitude: a.to_string(),
                s_m: mom.s,
                d_m: mom.d,
                h_m: mom.h,
                abs_det: one.abs_det.value,
                abs_det_se: one.abs_det.stderr,
                c_m: one.c_m.value,
                c_m_se: one.c_m.stderr,
            };
            let format = match format {
                Some(f) => f,
                None => match r.file.get("format").map(String::as_str) {
                    Some("csv") => Format::Csv,
                    _ => Format::Json,
                },
            };
            match format {
                Format::Json => write_text(r.output()?, &emit::to_json_string(&report)?, r.out.as_deref()),
                Format::Csv => emit::write_constants_csv(r.output()?, &report),
            }
        }
        Command::Kernel { common, t } => {
            let r = common.resolve()?;
            let t = match t.or_else(|| r.file.get("t").cloned()) {
                Some(s) => parse_list(&s)?,
                None => vec![0.0],
            };
            let a = r.amplitude()?;
            let tables = t
                .iter()
                .map(|&t| kernel_derivatives(&a, r.dim, t))
                .collect::<isocrit_core::Result<Vec<_>>>()?;
            emit::write_kernel_csv(r.output()?, &tables)
        }
        Command::TwoPoint { common, quad } => {
            let r = common.resolve()?;
            let pool = Pool::new(r.workers);
            let a = r.amplitude()?;
            let opts = r.z_options(quad)?;
            let r_min = opts.r_min.unwrap_or(0.05);
            let r_max = opts.r_max.unwrap_or(8.0);
            let (nodes, _, _) = log_rule(r_min, r_max, opts.nodes);
            let profile = two_point_profile(&pool, &a, r.dim, &nodes, r.mc_samples, SeedKey::new(r.seed))?;
            emit::write_two_point_csv(r.output()?, &profile)
        }
        Command::Zconst { common, quad } => {
            let r = common.resolve()?;
            let pool = Pool::new(r.workers);
            let opts = r.z_options(quad)?;
            let vc = z_constant(&pool, &r.amplitude()?, r.dim, &opts, SeedKey::new(r.seed))?;
            write_text(r.output()?, &emit::to_json_string(&ZConstReport::from(&vc))?, r.out.as_deref())
        }
        Command::Simulate { common, run, side } => {
            let r = common.resolve()?;
            let side = pick(side, &r.file, "box", 10.0)?;
            let cfg = r.experiment(run)?;
            let pool = Pool::new(cfg.workers);
            let censuses = simulate(&pool, &cfg, side)?;
            emit::write_census_csv(r.output()?, cfg.dim, &censuses)
        }
        Command::Sweep { common, run, sweep } => run_sweep_command(common, run, sweep, false),
        Command::Lln { common, run, sweep } => run_sweep_command(common, run, sweep, true),
    }
}

fn run_sweep_command(common: Common, run: RunArgs, sweep: SweepArgs, lln: bool) -> Result<()> {
    let r = common.resolve()?;
    let mut cfg = r.experiment(run)?;
    if let Some(s) = sweep.scales.or_else(|| r.file.get("scales").cloned()) {
        cfg.scales = parse_list(&s)?;
    }
    cfg.test_function = pick(sweep.f, &r.file, "f", TestFunctionChoice::Box)?;
    cfg.base_side = pick(sweep.base_side, &r.file, "base-side", 1.0)?;
    let no_constants = sweep.no_constants || pick(None, &r.file, "no-constants", false)?;
    cfg.variance_constants = !no_constants;
    cfg.summary = match sweep.summary {
        Some(p) => Some(p),
        None => r.file.get("summary").map(PathBuf::from),
    };
    let variance = sweep.variance || pick(None, &r.file, "variance", false)?;
    let kind = match (lln, variance) {
        (true, _) => SweepKind::Lln,
        (false, true) => SweepKind::Variance,
        (false, false) => SweepKind::Expectation,
    };
    kind.validate(&cfg)?;
    if let Some(p) = &cfg.summary {
        check_writable(p)?;
    }
    let pool = Pool::new(cfg.workers);
    let workers = pool.workers();
    let result = match &cfg.out {
        Some(path) => {
            let mut writer = SweepWriter::create(path)?;
            run_sweep(&pool, workers, kind, &cfg, |rows| writer.append(rows))?
        }
        None => {
            let result = run_sweep(&pool, workers, kind, &cfg, |_| Ok(()))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(std::io::stdout().lock());
            w.write_record(emit::SWEEP_HEADER)?;
            for row in &result.rows {
                w.serialize(row)?;
            }
            result
        }
    };
    let summary = Summary::of(&result);
    match &cfg.summary {
        Some(p) => emit::write_summary(p, &summary),
        None => {
            eprintln!("{}", emit::to_json_string(&summary)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

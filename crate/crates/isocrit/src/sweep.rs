//! Expectation, variance and LLN sweeps over scales and repetitions.

use isocrit_core::census::{find_critical_points, weigh, CensusOptions, CriticalCensus, Cuboid};
use isocrit_core::exec::BlockRunner;
use isocrit_core::field::FieldSampler;
use isocrit_core::kac_rice::{one_point_from_moments, z_constant, OnePointDensity, ZOptions};
use isocrit_core::rng::{tags, SeedKey};
use isocrit_core::stats::{jackknife, Moments};
use isocrit_core::SpectralMoments;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{HarnessError, Result};

/// Which experiment a sweep reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Mean of `𝔠^R[f]` against `C_m R^m ∫f`.
    Expectation,
    /// Variance of `𝔠^R[f]` against `V_m R^m ∫f²`.
    Variance,
    /// `ℒ_N[f] = N^{-m} 𝔠[f_N]`.
    Lln,
}

/// Smallest replication count for variance estimation.
pub const VARIANCE_MIN_REPS: usize = 500;
/// Smallest number of scales for the LLN diagnostic.
pub const LLN_MIN_SCALES: usize = 3;

impl SweepKind {
    pub fn validate(self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.validate()?;
        match self {
            SweepKind::Variance if cfg.reps < VARIANCE_MIN_REPS => Err(HarnessError::Config(format!(
                "variance sweeps need at least {VARIANCE_MIN_REPS} reps"
            ))),
            SweepKind::Lln if cfg.scales.len() < LLN_MIN_SCALES => Err(HarnessError::Config(format!(
                "LLN runs need at least {LLN_MIN_SCALES} scales"
            ))),
            _ => Ok(()),
        }
    }
}

/// One `(scale, rep)` outcome: number of critical points in the census
/// region and `𝔠[f_R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub scale: f64,
    pub rep: usize,
    pub count: usize,
    pub weighted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub scale: f64,
    pub mean: f64,
    pub var: f64,
    pub mean_se: f64,
    pub var_se: f64,
    pub ratio_mean: f64,
    pub ratio_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c_m: f64,
    pub c_m_se: f64,
    pub z_m: Option<f64>,
    pub z_m_err: Option<f64>,
    pub v_m: Option<f64>,
    pub v_m_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub config: ExperimentConfig,
    pub rows: Vec<RepRow>,
    pub per_scale: Vec<ScaleSummary>,
    pub constants: Constants,
}

/// Stream of the realization used for `(scale index, rep)`.
pub fn realization_key(seed: u64, scale_index: usize, rep: usize) -> SeedKey {
    SeedKey::new(seed)
        .child(tags::FIELD)
        .child(scale_index as u64)
        .child(rep as u64)
}

/// `C_m` and census settings shared by every realization of a run.
pub struct Setup {
    pub moments: SpectralMoments,
    pub one_point: OnePointDensity,
    pub census: CensusOptions,
    pub sampler: FieldSampler,
}

impl Setup {
    pub fn new<R: BlockRunner>(runner: &R, cfg: &ExperimentConfig) -> Result<Self> {
        let a = cfg.amplitude()?;
        let moments = SpectralMoments::new(&a, cfg.dim)?;
        let one_point = one_point_from_moments(runner, &moments, cfg.mc_samples, SeedKey::new(cfg.seed))?;
        let census = CensusOptions::for_moments(&moments, one_point.c_m.value);
        let sampler = FieldSampler::new(&a, cfg.dim, cfg.n_waves)?;
        Ok(Setup {
            moments,
            one_point,
            census,
            sampler,
        })
    }

    /// Census of realization `(scale_index, rep)` on `region`.
    pub fn census(&self, seed: u64, scale_index: usize, rep: usize, region: &Cuboid) -> Result<CriticalCensus> {
        let field = self.sampler.sample(&mut realization_key(seed, scale_index, rep).rng());
        Ok(find_critical_points(&field, region, &self.census)?)
    }
}

/// Mean, variance and their jackknife standard errors.
pub fn summarize(values: &[f64]) -> (f64, f64, f64, f64) {
    let acc = Moments::from_slice(values);
    let (mean_se, var_se) = if values.len() >= 3 {
        jackknife(values)
    } else {
        (acc.stderr(), acc.variance() * (2.0 / (values.len() as f64 - 1.0)).sqrt())
    };
    (acc.mean, acc.variance().max(0.0), mean_se, var_se)
}

/// Per-scale statistics recomputed from rows.
pub fn scale_summaries(kind: SweepKind, cfg: &ExperimentConfig, rows: &[RepRow]) -> Result<Vec<ScaleSummary>> {
    let f = cfg.test_function()?;
    let (int_f, int_f2) = (f.integral(), f.integral_sq());
    let m = cfg.dim as i32;
    Ok(cfg
        .scales
        .iter()
        .map(|&scale| {
            let vol = scale.powi(m);
            let norm = if kind == SweepKind::Lln { vol } else { 1.0 };
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.scale == scale)
                .map(|r| r.weighted / norm)
                .collect();
            let (mean, var, mean_se, var_se) = summarize(&values);
            let (ratio_mean, ratio_var) = match kind {
                SweepKind::Lln => (mean / int_f, var * vol / int_f2),
                _ => (mean / (vol * int_f), var / (vol * int_f2)),
            };
            ScaleSummary {
                scale,
                mean,
                var,
                mean_se,
                var_se,
                ratio_mean,
                ratio_var,
            }
        })
        .collect())
}

/// Reps computed between two flushes of the row sink.
fn chunk_len(workers: usize) -> usize {
    (4 * workers).max(8)
}

/// Runs a sweep. Rows reach `sink` in `(scale, rep)` order as chunks
/// complete; summaries are recomputed from the rows.
pub fn run_sweep<R: BlockRunner>(
    runner: &R,
    workers: usize,
    kind: SweepKind,
    cfg: &ExperimentConfig,
    mut sink: impl FnMut(&[RepRow]) -> Result<()>,
) -> Result<SweepResult> {
    kind.validate(cfg)?;
    let setup = Setup::new(runner, cfg)?;
    let base = cfg.test_function()?;
    let mut rows = Vec::with_capacity(cfg.scales.len() * cfg.reps);
    for (si, &scale) in cfg.scales.iter().enumerate() {
        let f = base.with_scale(scale)?;
        let region = f.scaled_support();
        let mut start = 0;
        while start < cfg.reps {
            let len = chunk_len(workers).min(cfg.reps - start);
            let chunk = runner
                .run(len, |i| -> Result<RepRow> {
                    let rep = start + i;
                    let census = setup.census(cfg.seed, si, rep, &region)?;
                    Ok(RepRow {
                        scale,
                        rep,
                        count: census.count(),
                        weighted: weigh(&census, &f)?,
                    })
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            sink(&chunk)?;
            rows.extend(chunk);
            start += len;
        }
    }
    let per_scale = scale_summaries(kind, cfg, &rows)?;
    let mut constants = Constants {
        c_m: setup.one_point.c_m.value,
        c_m_se: setup.one_point.c_m.stderr,
        z_m: None,
        z_m_err: None,
        v_m: None,
        v_m_err: None,
    };
    if cfg.variance_constants {
        let opts = ZOptions {
            n_mc: cfg.mc_samples,
            ..ZOptions::default()
        };
        let vc = z_constant(runner, &cfg.amplitude()?, cfg.dim, &opts, SeedKey::new(cfg.seed))?;
        constants.z_m = Some(vc.z_m.value);
        constants.z_m_err = Some(vc.z_err());
        constants.v_m = Some(vc.v_m);
        constants.v_m_err = Some(vc.v_err());
    }
    Ok(SweepResult {
        kind,
        config: cfg.clone(),
        rows,
        per_scale,
        constants,
    })
}

pub fn run_expectation<R: BlockRunner>(runner: &R, workers: usize, cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep(runner, workers, SweepKind::Expectation, cfg, |_| Ok(()))
}

pub fn run_variance_sweep<R: BlockRunner>(runner: &R, workers: usize, cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep(runner, workers, SweepKind::Variance, cfg, |_| Ok(()))
}

pub fn run_lln<R: BlockRunner>(runner: &R, workers: usize, cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep(runner, workers, SweepKind::Lln, cfg, |_| Ok(()))
}

/// Censuses of `[0, side]^m` for reps `0..reps`, using the streams of scale
/// index 0.
pub fn simulate<R: BlockRunner>(
    runner: &R,
    cfg: &ExperimentConfig,
    side: f64,
) -> Result<Vec<CriticalCensus>> {
    cfg.validate()?;
    let setup = Setup::new(runner, cfg)?;
    let region = Cuboid::cube(cfg.dim, side)?;
    runner
        .run(cfg.reps, |rep| setup.census(cfg.seed, 0, rep, &region))
        .into_iter()
        .collect()
}

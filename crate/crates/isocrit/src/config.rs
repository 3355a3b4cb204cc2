//! Experiment configuration: flat `key = value` files and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use isocrit_core::census::{Cuboid, TestFunction, TestFunctionKind};
use isocrit_core::field::DEFAULT_WAVES;
use isocrit_core::Amplitude;
use serde::{Deserialize, Serialize};

use crate::{io_err, HarnessError, Result};

/// Parsed `key = value` lines; `#` starts a comment.
pub type ConfigMap = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

/// Value from the command line, else the config file, else `default`.
pub fn pick<T: FromStr>(cli: Option<T>, file: &ConfigMap, key: &str, default: T) -> Result<T> {
    if let Some(v) = cli {
        return Ok(v);
    }
    match file.get(key) {
        Some(s) => s
            .parse()
            .map_err(|_| HarnessError::Config(format!("cannot parse `{key} = {s}`"))),
        None => Ok(default),
    }
}

pub fn pick_opt<T: FromStr>(cli: Option<T>, file: &ConfigMap, key: &str) -> Result<Option<T>> {
    if cli.is_some() {
        return Ok(cli);
    }
    file.get(key)
        .map(|s| {
            s.parse()
                .map_err(|_| HarnessError::Config(format!("cannot parse `{key} = {s}`")))
        })
        .transpose()
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("not a number: `{p}`")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunctionChoice {
    Box,
    Bump,
}

impl FromStr for TestFunctionChoice {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "box" => Ok(TestFunctionChoice::Box),
            "bump" => Ok(TestFunctionChoice::Bump),
            other => Err(HarnessError::Config(format!("unknown test function `{other}`"))),
        }
    }
}

impl std::fmt::Display for TestFunctionChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestFunctionChoice::Box => "box",
            TestFunctionChoice::Bump => "bump",
        })
    }
}

/// Everything a sweep needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub amplitude: String,
    pub test_function: TestFunctionChoice,
    /// Support of the unscaled test function, `[0, base_side]^m`.
    pub base_side: f64,
    /// Multiplier of the test function.
    pub weight: f64,
    pub scales: Vec<f64>,
    pub reps: usize,
    pub n_waves: usize,
    pub seed: u64,
    /// 0 = all available cores.
    pub workers: usize,
    /// Samples for the one-point constant (census spacing and summaries).
    pub mc_samples: usize,
    /// Compute `Z_m` and `V_m` for the summary.
    pub variance_constants: bool,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 1,
            amplitude: "gaussian".into(),
            test_function: TestFunctionChoice::Box,
            base_side: 1.0,
            weight: 1.0,
            scales: vec![5.0, 10.0, 20.0],
            reps: 100,
            n_waves: DEFAULT_WAVES,
            seed: 0,
            workers: 0,
            mc_samples: 1 << 20,
            variance_constants: true,
            out: None,
            summary: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(HarnessError::Config("dim must be at least 1".into()));
        }
        self.amplitude()?;
        if self.reps < 2 {
            return Err(HarnessError::Config("reps must be at least 2".into()));
        }
        if self.scales.is_empty() {
            return Err(HarnessError::Config("at least one scale is required".into()));
        }
        if self.scales.iter().any(|s| !(*s >= 1.0 && s.is_finite())) {
            return Err(HarnessError::Config("scales must be finite and at least 1".into()));
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::Config("scales must be strictly increasing".into()));
        }
        if !(self.base_side > 0.0) || self.n_waves == 0 {
            return Err(HarnessError::Config("base side and wave count must be positive".into()));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> Result<Amplitude> {
        Ok(self.amplitude.parse::<Amplitude>()?)
    }

    /// The unscaled test function.
    pub fn test_function(&self) -> Result<TestFunction> {
        let kind = match self.test_function {
            TestFunctionChoice::Box => TestFunctionKind::BoxIndicator,
            TestFunctionChoice::Bump => TestFunctionKind::TensorBump,
        };
        Ok(TestFunction::new(kind, Cuboid::cube(self.dim, self.base_side)?, 1.0)?.with_weight(self.weight))
    }

    /// Flat key/value echo for summaries.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("dim".into(), self.dim.to_string());
        m.insert("amplitude".into(), self.amplitude.clone());
        m.insert("f".into(), self.test_function.to_string());
        m.insert("base-side".into(), self.base_side.to_string());
        m.insert("weight".into(), self.weight.to_string());
        m.insert(
            "scales".into(),
            self.scales.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
        );
        m.insert("reps".into(), self.reps.to_string());
        m.insert("waves".into(), self.n_waves.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("mc-samples".into(), self.mc_samples.to_string());
        m
    }
}

/// Fails early if `path` cannot be created for writing.
pub fn check_writable(path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if !dir.is_dir() {
        return Err(HarnessError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "parent directory does not exist"),
        });
    }
    if path.is_dir() {
        return Err(HarnessError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "path is a directory"),
        });
    }
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(|_| ())
        .map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let m = parse_config("# comment\ndim = 2\n amplitude=poly-gaussian:0.5 # trailing\n\nmc_samples = 10\n").unwrap();
        assert_eq!(m["dim"], "2");
        assert_eq!(m["amplitude"], "poly-gaussian:0.5");
        assert_eq!(m["mc-samples"], "10");
        assert!(parse_config("dim 2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let m = parse_config("reps = 7").unwrap();
        assert_eq!(pick(Some(3usize), &m, "reps", 1).unwrap(), 3);
        assert_eq!(pick(None, &m, "reps", 1usize).unwrap(), 7);
        assert_eq!(pick(None, &m, "seed", 5u64).unwrap(), 5);
    }

    #[test]
    fn validation_rules() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.reps = 1;
        assert!(c.validate().is_err());
        c.reps = 2;
        c.scales = vec![5.0, 5.0];
        assert!(c.validate().is_err());
        c.scales = vec![10.0, 5.0];
        assert!(c.validate().is_err());
        c.scales = vec![5.0];
        c.amplitude = "nope".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unwritable_paths_fail_early() {
        assert!(check_writable(Path::new("/nonexistent-dir/x.csv")).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(check_writable(dir.path()).is_err());
        assert!(check_writable(&dir.path().join("ok.csv")).is_ok());
    }
}

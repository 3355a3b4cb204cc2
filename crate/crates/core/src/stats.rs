//! Streaming moments, estimates with standard errors, and jackknife helpers.

use alloc::vec::Vec;

/// Welford accumulator with an order-deterministic merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        self.mean += delta * other.n as f64 / nf;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / nf;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            libm::sqrt(self.variance() / self.n as f64)
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean, self.stderr())
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::new();
        for &x in xs {
            m.push(x);
        }
        m
    }
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub const fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    pub const fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate::new(self.value * c, self.stderr * libm::fabs(c))
    }

    /// `|self - other|` measured in combined standard errors (independent errors).
    pub fn z_score(self, other: Estimate) -> f64 {
        let se = libm::sqrt(self.stderr * self.stderr + other.stderr * other.stderr);
        libm::fabs(self.value - other.value) / se
    }

    /// Whether `|self - target| <= k·stderr`.
    pub fn within(self, target: f64, k: f64) -> bool {
        libm::fabs(self.value - target) <= k * self.stderr
    }
}

/// Jackknife standard errors of the mean and of the unbiased variance of
/// `xs`, returned as `(mean_se, var_se)`.
pub fn jackknife(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 3 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let nf = n as f64;
    let sum: f64 = xs.iter().sum();
    let mean = sum / nf;
    // Centered sums keep the leave-one-out formulas well conditioned.
    let s2: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let loo_means: Vec<f64> = xs.iter().map(|x| (sum - x) / (nf - 1.0)).collect();
    let loo_vars: Vec<f64> = xs
        .iter()
        .map(|x| {
            let d = x - mean;
            // Sum of squares about the leave-one-out mean.
            let ss = s2 - d * d * nf / (nf - 1.0);
            ss / (nf - 2.0)
        })
        .collect();
    let spread = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / nf;
        let ss: f64 = v.iter().map(|y| (y - m) * (y - m)).sum();
        libm::sqrt((nf - 1.0) / nf * ss)
    };
    (spread(&loo_means), spread(&loo_vars))
}

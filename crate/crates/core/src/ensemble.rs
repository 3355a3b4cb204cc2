//! The `O(m)`-invariant Gaussian ensemble `𝒮_m^v` on symmetric matrices and
//! Monte Carlo estimators of `E|det H|`.
//!
//! Symmetric matrices are flattened to the orthonormal coordinates `ω`:
//! diagonal entries as they are, off-diagonal entries `(i < j)` multiplied by
//! `√2`, in row-major order of the upper triangle.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::{monte_carlo, BlockRunner};
use crate::gaussian::{fill_normal, CenteredGaussian, SqrtFactor};
use crate::rng::{SeedKey, Stream};
use crate::stats::Estimate;

/// Minimum sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

pub fn omega_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of entry `(i, j)`, `i ≤ j`, in the `ω` vector.
pub fn omega_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + j
}

pub fn to_omega(h: &DMatrix<f64>) -> Vec<f64> {
    let m = h.nrows();
    let mut w = Vec::with_capacity(omega_len(m));
    for i in 0..m {
        for j in i..m {
            w.push(if i == j { h[(i, i)] } else { SQRT_2 * h[(i, j)] });
        }
    }
    w
}

pub fn from_omega(w: &[f64], m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in i..m {
            let v = if i == j { w[k] } else { w[k] / SQRT_2 };
            h[(i, j)] = v;
            h[(j, i)] = v;
            k += 1;
        }
    }
    h
}

/// Determinant of the symmetric matrix with coordinates `w`.
pub fn det_from_omega(w: &[f64], m: usize) -> f64 {
    const H: f64 = core::f64::consts::FRAC_1_SQRT_2;
    match m {
        0 => 1.0,
        1 => w[0],
        2 => {
            let b = w[1] * H;
            w[0] * w[2] - b * b
        }
        3 => {
            let (a, d, f) = (w[0], w[3], w[5]);
            let (b, c, e) = (w[1] * H, w[2] * H, w[4] * H);
            a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d)
        }
        _ => from_omega(w, m).determinant(),
    }
}

/// `𝒮_m^v`: covariance `E[h_ij h_kl] = v(δ_ij δ_kl + δ_ik δ_jl + δ_il δ_jk)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEnsemble {
    pub dim: usize,
    pub v: f64,
}

impl SymmetricEnsemble {
    pub fn new(dim: usize, v: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter("ensemble scale must be nonnegative"));
        }
        Ok(SymmetricEnsemble { dim, v })
    }

    /// Covariance of the `ω` coordinates.
    pub fn omega_covariance(&self) -> DMatrix<f64> {
        let m = self.dim;
        let n = omega_len(m);
        let mut c = DMatrix::zeros(n, n);
        for i in 0..m {
            for j in i..m {
                let p = omega_index(m, i, j);
                if i == j {
                    for k in 0..m {
                        let q = omega_index(m, k, k);
                        c[(p, q)] = if k == i { 3.0 * self.v } else { self.v };
                    }
                } else {
                    c[(p, p)] = 2.0 * self.v;
                }
            }
        }
        c
    }

    /// One draw `H = G + ξ·1`, written into `w` as `ω` coordinates.
    #[inline]
    pub fn sample_omega(&self, rng: &mut Stream, w: &mut [f64]) {
        let m = self.dim;
        let sd = libm::sqrt(self.v);
        let xi: f64 = StandardNormal.sample(rng);
        let shift = sd * xi;
        let diag_sd = libm::sqrt(2.0 * self.v);
        let off_sd = SQRT_2 * sd;
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                let z: f64 = StandardNormal.sample(rng);
                w[k] = if i == j { diag_sd * z + shift } else { off_sd * z };
                k += 1;
            }
        }
    }
}

/// One symmetric matrix from `𝒮_m^v`.
pub fn sample_matrix(e: &SymmetricEnsemble, rng: &mut Stream) -> DMatrix<f64> {
    let mut w = vec![0.0; omega_len(e.dim)];
    e.sample_omega(rng, &mut w);
    from_omega(&w, e.dim)
}

/// `E_{𝒮_m^v} |det H|`.
pub fn expected_abs_det<R: BlockRunner>(
    runner: &R,
    m: usize,
    v: f64,
    n: usize,
    key: SeedKey,
) -> Result<Estimate> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParameter("at least 1000 samples are required"));
    }
    let e = SymmetricEnsemble::new(m, v)?;
    let acc = monte_carlo(runner, key, n, 1, |rng, len, acc| {
        let mut w = vec![0.0; omega_len(m)];
        for _ in 0..len {
            e.sample_omega(rng, &mut w);
            acc[0].push(libm::fabs(det_from_omega(&w, m)));
        }
    });
    Ok(acc[0].estimate())
}

/// `E[|det H_x| · |det H_y|]` for `(H_x, H_y)` with joint `ω` covariance
/// `joint_cov` of size `2·m(m+1)/2`.
pub fn expected_abs_det_pair<R: BlockRunner>(
    runner: &R,
    joint_cov: &DMatrix<f64>,
    m: usize,
    n: usize,
    key: SeedKey,
) -> Result<Estimate> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParameter("at least 1000 samples are required"));
    }
    let k = omega_len(m);
    if joint_cov.nrows() != 2 * k {
        return Err(Error::DimensionMismatch {
            expected: 2 * k,
            got: joint_cov.nrows(),
        });
    }
    let g = CenteredGaussian::new(joint_cov.clone())?;
    let factor = SqrtFactor::new(g.cov());
    let acc = monte_carlo(runner, key, n, 1, |rng, len, acc| {
        let mut z = vec![0.0; 2 * k];
        let mut x = vec![0.0; 2 * k];
        for _ in 0..len {
            fill_normal(rng, &mut z);
            factor.apply(&z, &mut x);
            acc[0].push(pair_abs_det(&x, m));
        }
    });
    Ok(acc[0].estimate())
}

/// `|det H_x| · |det H_y|` for stacked `ω` coordinates.
#[inline]
pub fn pair_abs_det(x: &[f64], m: usize) -> f64 {
    let k = omega_len(m);
    libm::fabs(det_from_omega(&x[..k], m) * det_from_omega(&x[k..2 * k], m))
}

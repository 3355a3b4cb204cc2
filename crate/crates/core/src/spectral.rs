//! Amplitudes, their spectral measures and the covariance kernel.
//!
//! An amplitude `a` defines the spectral measure `μ(dξ) = (2π)^{-m} a(|ξ|)² dξ`
//! on `R^m`; the covariance kernel `K` is its characteristic function.
//! Moments of `μ` reduce to one-dimensional radial integrals
//! `I_k = ∫_0^∞ r^k a(r)² dr` times angular moments of the sphere, and the
//! kernel derivatives at `t·e₁` reduce to a two-dimensional integral over
//! `(ξ₁, |ξ_⊥|)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Highest derivative order tabulated by [`KernelTable`].
pub const KERNEL_ORDER: u32 = 4;

/// Relative tolerance for radial moments computed by quadrature.
pub const RADIAL_REL_TOL: f64 = 1e-10;

/// Cut-off criterion `a(r)² r^{k} < CUTOFF_EPS`.
const CUTOFF_EPS: f64 = 1e-16;

/// The built-in amplitude families. Each is even, decays faster than any
/// polynomial and satisfies `a(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// `a(t) = exp(-t²/4)`.
    Gaussian,
    /// `a(t) = exp(-t²/(4σ²))`, i.e. the Gaussian amplitude rescaled by `σ`.
    GaussianScaled { sigma: f64 },
    /// `a(t) = (1 + c t²) exp(-t²/4)` with `c ≥ 0`.
    PolyGaussian { c: f64 },
}

impl Amplitude {
    pub fn gaussian_scaled(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter("gaussian-scaled needs sigma > 0"));
        }
        Ok(Amplitude::GaussianScaled { sigma })
    }

    pub fn poly_gaussian(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter("poly-gaussian needs c >= 0"));
        }
        Ok(Amplitude::PolyGaussian { c })
    }

    pub fn family(&self) -> &'static str {
        match self {
            Amplitude::Gaussian => "gaussian",
            Amplitude::GaussianScaled { .. } => "gaussian-scaled",
            Amplitude::PolyGaussian { .. } => "poly-gaussian",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Amplitude::Gaussian => Vec::new(),
            Amplitude::GaussianScaled { sigma } => vec![sigma],
            Amplitude::PolyGaussian { c } => vec![c],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = libm::fabs(t);
        match *self {
            Amplitude::Gaussian => libm::exp(-0.25 * t * t),
            Amplitude::GaussianScaled { sigma } => {
                let u = t / sigma;
                libm::exp(-0.25 * u * u)
            }
            Amplitude::PolyGaussian { c } => (1.0 + c * t * t) * libm::exp(-0.25 * t * t),
        }
    }

    /// Spectral weight `a(t)²`.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        match *self {
            Amplitude::Gaussian => libm::exp(-0.5 * t * t),
            Amplitude::GaussianScaled { sigma } => {
                let u = t / sigma;
                libm::exp(-0.5 * u * u)
            }
            Amplitude::PolyGaussian { c } => {
                let p = 1.0 + c * t * t;
                p * p * libm::exp(-0.5 * t * t)
            }
        }
    }

    /// `I_k` in closed form, for the families that provide one.
    pub fn closed_form_radial_moment(&self, k: u32) -> Option<f64> {
        match *self {
            Amplitude::Gaussian => Some(gaussian_radial_moment(k)),
            Amplitude::GaussianScaled { sigma } => {
                Some(libm::pow(sigma, k as f64 + 1.0) * gaussian_radial_moment(k))
            }
            Amplitude::PolyGaussian { .. } => None,
        }
    }

    /// Radius beyond which `a(r)² r^k` stays below `1e-16` of its peak.
    pub fn cutoff(&self, k: u32) -> f64 {
        let step = match *self {
            Amplitude::GaussianScaled { sigma } => 0.25 * sigma,
            _ => 0.25,
        };
        let g = |r: f64| self.weight(r) * libm::pow(r, k as f64);
        let mut peak: f64 = 1.0;
        let mut r = step;
        let mut prev = g(0.0);
        loop {
            let v = g(r);
            peak = peak.max(v);
            if v < CUTOFF_EPS * peak && v <= prev {
                return r;
            }
            prev = v;
            r += step;
        }
    }
}

impl fmt::Display for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Amplitude::Gaussian => write!(f, "gaussian"),
            Amplitude::GaussianScaled { sigma } => write!(f, "gaussian-scaled:{sigma}"),
            Amplitude::PolyGaussian { c } => write!(f, "poly-gaussian:{c}"),
        }
    }
}

impl FromStr for Amplitude {
    type Err = Error;

    /// Parses `NAME[:PARAM]`, e.g. `gaussian`, `gaussian-scaled:2`, `poly-gaussian:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let value = |p: Option<&str>| -> Result<f64> {
            p.ok_or(Error::InvalidParameter("amplitude parameter missing"))?
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter("amplitude parameter is not a number"))
        };
        match name {
            "gaussian" if param.is_none() => Ok(Amplitude::Gaussian),
            "gaussian" => Err(Error::InvalidParameter("gaussian takes no parameter")),
            "gaussian-scaled" => Amplitude::gaussian_scaled(value(param)?),
            "poly-gaussian" => Amplitude::poly_gaussian(value(param)?),
            _ => Err(Error::InvalidParameter("unknown amplitude family")),
        }
    }
}

/// `∫_0^∞ r^k e^{-r²/2} dr = 2^{(k-1)/2} Γ((k+1)/2)`.
pub fn gaussian_radial_moment(k: u32) -> f64 {
    let k = k as f64;
    libm::pow(2.0, 0.5 * (k - 1.0)) * libm::tgamma(0.5 * (k + 1.0))
}

/// `I_k(a) = ∫_0^∞ r^k a(r)² dr`.
pub fn radial_moment(a: &Amplitude, k: u32) -> Result<f64> {
    if let Some(v) = a.closed_form_radial_moment(k) {
        return Ok(v);
    }
    radial_moment_by_quadrature(a, k)
}

/// `I_k(a)` by adaptive quadrature, ignoring any closed form.
pub fn radial_moment_by_quadrature(a: &Amplitude, k: u32) -> Result<f64> {
    let cut = a.cutoff(k + 7);
    let opts = QuadOptions {
        rel_tol: RADIAL_REL_TOL,
        abs_tol: 0.0,
        max_intervals: 2000,
        initial_intervals: 8,
    };
    let kf = k as f64;
    crate::quadrature::integrate_scalar(|r| libm::pow(r, kf) * a.weight(r), 0.0, cut, &opts)
}

/// Surface area of the unit sphere `S^{m-1} ⊂ R^m`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * libm::pow(PI, 0.5 * m as f64) / libm::tgamma(0.5 * m as f64)
}

/// `∫_{S^{m-1}} ξ^{2κ} dσ = 2 ∏ Γ(κ_j + 1/2) / Γ(|κ| + m/2)`.
pub fn angular_moment(m: usize, kappa: &[u32]) -> f64 {
    assert_eq!(kappa.len(), m, "kappa must have m entries");
    let total: u32 = kappa.iter().sum();
    let num: f64 = kappa
        .iter()
        .map(|&k| libm::tgamma(k as f64 + 0.5))
        .product();
    2.0 * num / libm::tgamma(total as f64 + 0.5 * m as f64)
}

/// Moment data of `μ_a` in dimension `m`, cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMoments {
    pub amplitude: Amplitude,
    pub dim: usize,
    /// Total mass `s_m = ∫ μ`.
    pub s: f64,
    /// `d_m = ∫ ξ₁² μ`.
    pub d: f64,
    /// `h_m = ∫ ξ₁²ξ₂² μ` (for `m = 1`, one third of `∫ ξ₁⁴ μ`).
    pub h: f64,
    /// `I_0, …, I_{m+7}`.
    pub radial: Vec<f64>,
}

impl SpectralMoments {
    pub fn new(a: &Amplitude, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        let radial = (0..=(m as u32 + 7))
            .map(|k| radial_moment(a, k))
            .collect::<Result<Vec<_>>>()?;
        let mf = m as f64;
        let norm = libm::pow(2.0 * PI, -mf);
        let pm = libm::pow(PI, 0.5 * mf);
        let s = norm * 2.0 * pm / libm::tgamma(0.5 * mf) * radial[m - 1];
        let d = norm * pm / libm::tgamma(0.5 * mf + 1.0) * radial[m + 1];
        let h = norm * pm / (2.0 * libm::tgamma(0.5 * mf + 2.0)) * radial[m + 3];
        Ok(SpectralMoments {
            amplitude: *a,
            dim: m,
            s,
            d,
            h,
            radial,
        })
    }

    /// `I_k` from the cache.
    pub fn radial_moment(&self, k: usize) -> f64 {
        self.radial[k]
    }

    /// `M_α = ∫ ξ^α μ` for `|α| ≤ 8`.
    pub fn full_moment(&self, alpha: &[u32]) -> f64 {
        assert_eq!(alpha.len(), self.dim);
        if alpha.iter().any(|a| a % 2 == 1) {
            return 0.0;
        }
        let order: u32 = alpha.iter().sum();
        assert!(order <= 8, "moments are cached up to order 8");
        let kappa: Vec<u32> = alpha.iter().map(|a| a / 2).collect();
        libm::pow(2.0 * PI, -(self.dim as f64))
            * self.radial[self.dim - 1 + order as usize]
            * angular_moment(self.dim, &kappa)
    }

    /// Correlation length `sqrt(s_m / d_m)`.
    pub fn length_scale(&self) -> f64 {
        libm::sqrt(self.s / self.d)
    }

    /// `T(0) = Σ_{|γ|≤4} |∂^γ K(0)|`.
    pub fn decay_at_origin(&self) -> f64 {
        multi_indices(self.dim, KERNEL_ORDER)
            .iter()
            .map(|g| libm::fabs(self.full_moment(g)))
            .sum()
    }

    /// Kernel derivatives at `t·e₁`; see [`kernel_derivatives`].
    pub fn kernel_table(&self, t: f64) -> Result<KernelTable> {
        kernel_table_from_moments(self, t)
    }
}

/// `s_m, d_m, h_m` and the radial table for `(a, m)`.
pub fn spectral_moments(a: &Amplitude, m: usize) -> Result<SpectralMoments> {
    SpectralMoments::new(a, m)
}

/// `M_α = ∫ ξ^α μ_a(dξ)`, zero for odd `α`.
pub fn spectral_moment_full(a: &Amplitude, m: usize, alpha: &[u32]) -> Result<f64> {
    Ok(SpectralMoments::new(a, m)?.full_moment(alpha))
}

/// All multi-indices in `N^m` of order `≤ max_order`, graded then
/// lexicographically descending in the first coordinate.
pub fn multi_indices(m: usize, max_order: u32) -> Vec<Vec<u32>> {
    fn fill(m: usize, order: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == m {
            prefix.push(order);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=order).rev() {
            prefix.push(first);
            fill(m, order - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for order in 0..=max_order {
        fill(m, order, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

/// Values of `∂^γ K(t·e₁)` for every `|γ| ≤ 4`.
///
/// Stored as the radial pieces `(C_{k,p}, S_{k,p})`: `k` is the exponent of
/// `ξ₁` and `p` the total (even) exponent of the perpendicular coordinates.
/// Entries with an odd perpendicular exponent vanish identically.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub dim: usize,
    pub t: f64,
    /// `(2π)^{-m} ∫ u^k cos(tu) P_p(u) du`, indexed `[k][p/2]`.
    cos_part: [[f64; 3]; 5],
    /// `(2π)^{-m} ∫ u^k sin(tu) P_p(u) du`, indexed `[k][p/2]`.
    sin_part: [[f64; 3]; 5],
    /// Largest discarded imaginary residual.
    pub imag_residual: f64,
}

impl KernelTable {
    /// `∂^γ K(t·e₁)`.
    pub fn get(&self, gamma: &[u32]) -> f64 {
        assert_eq!(gamma.len(), self.dim);
        let order: u32 = gamma.iter().sum();
        assert!(order <= KERNEL_ORDER, "kernel table holds derivatives up to order 4");
        if gamma[1..].iter().any(|g| g % 2 == 1) {
            return 0.0;
        }
        let k = gamma[0] as usize;
        let p = (order - gamma[0]) as usize;
        let angular = if self.dim == 1 {
            1.0
        } else {
            let kappa: Vec<u32> = gamma[1..].iter().map(|g| g / 2).collect();
            angular_moment(self.dim - 1, &kappa)
        };
        let c = self.cos_part[k][p / 2];
        let s = self.sin_part[k][p / 2];
        // ∂^γ K(t e₁) = i^{|γ|} ∫ ξ^γ e^{i t ξ₁} μ(dξ)
        let value = match order % 4 {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        };
        angular * value
    }

    /// `(γ, ∂^γ K(t·e₁))` for all `|γ| ≤ 4`.
    pub fn entries(&self) -> Vec<(Vec<u32>, f64)> {
        multi_indices(self.dim, KERNEL_ORDER)
            .into_iter()
            .map(|g| {
                let v = self.get(&g);
                (g, v)
            })
            .collect()
    }

    /// Decay diagnostic `T(t e₁) = Σ_{|γ|≤4} |∂^γ K(t e₁)|`.
    pub fn decay(&self) -> f64 {
        self.entries().iter().map(|(_, v)| libm::fabs(*v)).sum()
    }

    /// `∂^γ K` at `-t·e₁`, using that `K` is even.
    pub fn get_reflected(&self, gamma: &[u32]) -> f64 {
        let order: u32 = gamma.iter().sum();
        if order % 2 == 0 {
            self.get(gamma)
        } else {
            -self.get(gamma)
        }
    }
}

fn kernel_table_from_moments(mom: &SpectralMoments, t: f64) -> Result<KernelTable> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter("separation must be nonnegative"));
    }
    let a = mom.amplitude;
    let m = mom.dim;
    let norm = libm::pow(2.0 * PI, -(m as f64));
    let cut = a.cutoff(m as u32 + 7);

    // Components: (k, p) with k + p ≤ 4, p even (p = 0 only when m = 1).
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for p in [0usize, 2, 4] {
        if m == 1 && p > 0 {
            continue;
        }
        for k in 0..=(4 - p) {
            pairs.push((k, p));
        }
    }
    let ncomp = pairs.len();
    let scale: Vec<f64> = pairs
        .iter()
        .flat_map(|&(k, p)| {
            let r = mom.radial[(m - 1 + k + p).min(mom.radial.len() - 1)];
            [r, r]
        })
        .collect();
    let outer_opts = QuadOptions {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_intervals: 4000,
        initial_intervals: 8,
    };

    let values = if m == 1 {
        integrate(
            |u, out| {
                let w = a.weight(u);
                let (s, c) = libm::sincos(t * u);
                let mut up = 1.0;
                for (i, _) in pairs.iter().enumerate() {
                    out[2 * i] = up * c * w;
                    out[2 * i + 1] = up * s * w;
                    up *= u;
                }
            },
            -cut,
            cut,
            2 * ncomp,
            &outer_opts,
            Some(&scale),
        )?
    } else {
        let inner_opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_intervals: 2000,
            initial_intervals: 2,
        };
        let inner_scale: Vec<f64> = [0usize, 2, 4]
            .iter()
            .map(|&p| mom.radial[m - 2 + p])
            .collect();
        let mut failure: Option<Error> = None;
        let result = integrate(
            |u, out| {
                let rho_max = libm::sqrt(libm::fmax(cut * cut - u * u, 0.0));
                let perp = if rho_max > 0.0 {
                    match integrate(
                        |rho, o| {
                            let w = a.weight(libm::sqrt(u * u + rho * rho));
                            let base = libm::pow(rho, (m - 2) as f64) * w;
                            o[0] = base;
                            o[1] = base * rho * rho;
                            o[2] = base * rho * rho * rho * rho;
                        },
                        0.0,
                        rho_max,
                        3,
                        &inner_opts,
                        Some(&inner_scale),
                    ) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            vec![0.0; 3]
                        }
                    }
                } else {
                    vec![0.0; 3]
                };
                let (s, c) = libm::sincos(t * u);
                for (i, &(k, p)) in pairs.iter().enumerate() {
                    let base = libm::pow(u, k as f64) * perp[p / 2];
                    out[2 * i] = base * c;
                    out[2 * i + 1] = base * s;
                }
            },
            -cut,
            cut,
            2 * ncomp,
            &outer_opts,
            Some(&scale),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        result?
    };

    let mut cos_part = [[0.0; 3]; 5];
    let mut sin_part = [[0.0; 3]; 5];
    let mut residual: f64 = 0.0;
    for (i, &(k, p)) in pairs.iter().enumerate() {
        let c = norm * values[2 * i];
        let s = norm * values[2 * i + 1];
        // Parity in ξ₁ kills the sine part for even k and the cosine part for odd k.
        let max_angular = if m == 1 {
            1.0
        } else {
            angular_moment(m - 1, &{
                let mut kap = vec![0u32; m - 1];
                kap[0] = (p / 2) as u32;
                kap
            })
        };
        if k % 2 == 0 {
            cos_part[k][p / 2] = c;
            residual = residual.max(libm::fabs(s) * max_angular);
        } else {
            sin_part[k][p / 2] = s;
            residual = residual.max(libm::fabs(c) * max_angular);
        }
    }
    let threshold = 1e-10 * mom.decay_at_origin();
    if residual > threshold {
        return Err(Error::ImaginaryResidual {
            residual,
            threshold,
        });
    }
    Ok(KernelTable {
        dim: m,
        t,
        cos_part,
        sin_part,
        imag_residual: residual,
    })
}

/// `∂^γ K_a(t·e₁)` for every multi-index `|γ| ≤ 4`.
pub fn kernel_derivatives(a: &Amplitude, m: usize, t: f64) -> Result<KernelTable> {
    SpectralMoments::new(a, m)?.kernel_table(t)
}

/// `d_m(j)(t) = ∫ cos(t ξ₁) ξ_j² μ(dξ)` for `j = 1..m`.
pub fn grad_cross_cov(a: &Amplitude, m: usize, t: f64) -> Result<Vec<f64>> {
    let table = kernel_derivatives(a, m, t)?;
    Ok(grad_cross_cov_from_table(&table))
}

pub(crate) fn grad_cross_cov_from_table(table: &KernelTable) -> Vec<f64> {
    let m = table.dim;
    (0..m)
        .map(|j| {
            let mut g = vec![0u32; m];
            g[j] = 2;
            -table.get(&g)
        })
        .collect()
}

/// Gramian of the monomials `{ξ^α : |α| ≤ order}` in `L²(μ_a)`.
pub fn jet_gramian(a: &Amplitude, m: usize, order: u32) -> Result<DMatrix<f64>> {
    let mom = SpectralMoments::new(a, m)?;
    Ok(jet_gramian_from_moments(&mom, order))
}

pub fn jet_gramian_from_moments(mom: &SpectralMoments, order: u32) -> DMatrix<f64> {
    let idx = multi_indices(mom.dim, order);
    let n = idx.len();
    DMatrix::from_fn(n, n, |i, j| {
        let sum: Vec<u32> = idx[i].iter().zip(&idx[j]).map(|(a, b)| a + b).collect();
        mom.full_moment(&sum)
    })
}

/// Human-readable multi-index such as `(2,0,1)`.
pub fn format_multi_index(g: &[u32]) -> String {
    use core::fmt::Write;
    let mut s = String::from("(");
    for (i, v) in g.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s.push(')');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        libm::fabs(a - b) <= rel * libm::fmax(libm::fabs(b), 1e-300)
    }

    fn hermite_prob(n: u32, x: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, x);
        if n == 0 {
            return p0;
        }
        for k in 1..n {
            let p2 = x * p1 - k as f64 * p0;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    /// Closed-form derivatives of `(2π)^{-m/2} exp(-|x|²/2)` at `t e₁`.
    fn gaussian_kernel_oracle(m: usize, t: f64, gamma: &[u32]) -> f64 {
        let mut v = libm::pow(2.0 * PI, -0.5 * m as f64);
        for (j, &g) in gamma.iter().enumerate() {
            let x = if j == 0 { t } else { 0.0 };
            let sign = if g % 2 == 0 { 1.0 } else { -1.0 };
            v *= sign * hermite_prob(g, x) * libm::exp(-0.5 * x * x);
        }
        v
    }

    #[test]
    fn gaussian_radial_moments() {
        assert!(close(radial_moment(&Amplitude::Gaussian, 1).unwrap(), 1.0, 1e-14));
        assert!(close(radial_moment(&Amplitude::Gaussian, 0).unwrap(), 1.2533141373155003, 1e-14));
        assert!(close(radial_moment(&Amplitude::Gaussian, 3).unwrap(), 2.0, 1e-14));
    }

    #[test]
    fn quadrature_path_matches_closed_forms() {
        for k in 0..12 {
            let q = radial_moment_by_quadrature(&Amplitude::Gaussian, k).unwrap();
            assert!(close(q, gaussian_radial_moment(k), 1e-10), "k={k}");
        }
        let c = 0.7;
        let a = Amplitude::poly_gaussian(c).unwrap();
        for k in 0..10 {
            let g = gaussian_radial_moment;
            let oracle = g(k) + 2.0 * c * g(k + 2) + c * c * g(k + 4);
            assert!(close(radial_moment(&a, k).unwrap(), oracle, 1e-10), "k={k}");
        }
        let a = Amplitude::gaussian_scaled(2.5).unwrap();
        let q = radial_moment_by_quadrature(&a, 4).unwrap();
        assert!(close(q, radial_moment(&a, 4).unwrap(), 1e-10));
    }

    #[test]
    fn gaussian_moments_per_dimension() {
        for m in 1..=3 {
            let mom = SpectralMoments::new(&Amplitude::Gaussian, m).unwrap();
            let want = libm::pow(2.0 * PI, -0.5 * m as f64);
            assert!(close(mom.s, want, 1e-10));
            assert!(close(mom.d, want, 1e-10));
            assert!(close(mom.h, want, 1e-10));
        }
    }

    #[test]
    fn d_formula_and_fourth_moment_pattern() {
        for a in [
            Amplitude::Gaussian,
            Amplitude::poly_gaussian(0.3).unwrap(),
            Amplitude::gaussian_scaled(0.6).unwrap(),
        ] {
            for m in 1..=4 {
                let mom = SpectralMoments::new(&a, m).unwrap();
                let mf = m as f64;
                let d = libm::pow(2.0 * PI, -mf) * libm::pow(PI, 0.5 * mf)
                    / libm::tgamma(0.5 * mf + 1.0)
                    * mom.radial[m + 1];
                assert!(close(mom.d, d, 1e-12));
                let mut g = vec![0u32; m];
                assert!(close(mom.full_moment(&g), mom.s, 1e-12));
                g[0] = 2;
                assert!(close(mom.full_moment(&g), mom.d, 1e-12));
                g[0] = 4;
                assert!(close(mom.full_moment(&g), 3.0 * mom.h, 1e-12));
                if m >= 2 {
                    g[0] = 2;
                    g[1] = 2;
                    assert!(close(mom.full_moment(&g), mom.h, 1e-12));
                }
            }
        }
    }

    #[test]
    fn angular_moment_examples() {
        assert!(close(angular_moment(3, &[0, 0, 0]), 4.0 * PI, 1e-14));
        assert!(close(angular_moment(2, &[1, 0]), PI, 1e-14));
        assert!(close(angular_moment(2, &[1, 1]), PI / 4.0, 1e-14));
        assert!(close(sphere_area(2), 2.0 * PI, 1e-14));
    }

    #[test]
    fn odd_moments_vanish_exactly() {
        for m in 1..=3 {
            let mom = SpectralMoments::new(&Amplitude::poly_gaussian(0.2).unwrap(), m).unwrap();
            for g in multi_indices(m, 8) {
                if g.iter().any(|x| x % 2 == 1) {
                    assert_eq!(mom.full_moment(&g), 0.0);
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let k0 = kernel_derivatives(&Amplitude::Gaussian, 2, 0.0).unwrap();
        assert!(close(k0.get(&[0, 0]), 1.0 / (2.0 * PI), 1e-10));
        let k1 = kernel_derivatives(&Amplitude::Gaussian, 2, 1.0).unwrap();
        assert!(close(k1.get(&[0, 0]), libm::exp(-0.5) / (2.0 * PI), 1e-10));
        for a in [Amplitude::Gaussian, Amplitude::poly_gaussian(0.4).unwrap()] {
            for m in 1..=3 {
                let mom = SpectralMoments::new(&a, m).unwrap();
                let t = mom.kernel_table(0.0).unwrap();
                let mut g = vec![0u32; m];
                assert!(close(t.get(&g), mom.s, 1e-10));
                g[0] = 2;
                assert!(close(-t.get(&g), mom.d, 1e-10));
                g[0] = 4;
                assert!(close(t.get(&g), 3.0 * mom.h, 1e-10));
                if m >= 2 {
                    g[0] = 2;
                    g[1] = 2;
                    assert!(close(t.get(&g), mom.h, 1e-10));
                }
            }
        }
    }

    #[test]
    fn gaussian_kernel_matches_closed_form() {
        for m in 1..=3 {
            let mom = SpectralMoments::new(&Amplitude::Gaussian, m).unwrap();
            for &t in &[0.0, 0.3, 1.0, 2.2, 4.0] {
                let table = mom.kernel_table(t).unwrap();
                let scale = mom.decay_at_origin();
                for (g, v) in table.entries() {
                    let o = gaussian_kernel_oracle(m, t, &g);
                    assert!(
                        libm::fabs(v - o) <= 1e-8 * libm::fmax(libm::fabs(o), 1e-6 * scale),
                        "m={m} t={t} g={g:?}: {v} vs {o}"
                    );
                }
            }
        }
    }

    #[test]
    fn perpendicular_symmetry_and_odd_zeros() {
        let table = kernel_derivatives(&Amplitude::poly_gaussian(0.5).unwrap(), 3, 1.3).unwrap();
        assert_eq!(table.get(&[1, 1, 0]), 0.0);
        assert_eq!(table.get(&[0, 3, 1]), 0.0);
        assert_eq!(table.get(&[2, 2, 0]), table.get(&[2, 0, 2]));
        assert_eq!(table.get(&[0, 0, 4]), table.get(&[0, 4, 0]));
        assert_eq!(table.get(&[1, 2, 0]), table.get(&[1, 0, 2]));
    }

    #[test]
    fn grad_cross_cov_examples() {
        let mom = SpectralMoments::new(&Amplitude::Gaussian, 2).unwrap();
        let d0 = grad_cross_cov(&Amplitude::Gaussian, 2, 0.0).unwrap();
        assert!(d0.iter().all(|&v| close(v, mom.d, 1e-10)));
        let d1 = grad_cross_cov(&Amplitude::Gaussian, 2, 1.0).unwrap();
        assert!(libm::fabs(d1[0]) < 1e-12);
        assert!(close(d1[1], libm::exp(-0.5) / (2.0 * PI), 1e-10));
    }

    #[test]
    fn gradient_cross_covariance_is_strictly_smaller() {
        for m in 1..=2 {
            let mom = SpectralMoments::new(&Amplitude::Gaussian, m).unwrap();
            for i in 1..=80 {
                let t = 0.1 * i as f64;
                let table = mom.kernel_table(t).unwrap();
                for dj in grad_cross_cov_from_table(&table) {
                    assert!(libm::fabs(dj) < mom.d);
                }
            }
        }
    }

    #[test]
    fn kernel_is_monotone_for_gaussian() {
        let mom = SpectralMoments::new(&Amplitude::Gaussian, 2).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=24 {
            let k = mom.kernel_table(0.25 * i as f64).unwrap().get(&[0, 0]);
            assert!(k <= prev + 1e-15);
            prev = k;
        }
    }

    #[test]
    fn kernel_integrates_to_one() {
        // ∫ K dx = a(0)² by Fourier inversion; trapezoid on radial samples.
        for (a, m) in [
            (Amplitude::Gaussian, 1usize),
            (Amplitude::Gaussian, 2),
            (Amplitude::poly_gaussian(0.3).unwrap(), 1),
            (Amplitude::poly_gaussian(0.3).unwrap(), 2),
        ] {
            let mom = SpectralMoments::new(&a, m).unwrap();
            let radius = 12.0 / libm::sqrt(mom.d / mom.s);
            let n = 600;
            let step = radius / n as f64;
            let mut sum = 0.0;
            for i in 0..=n {
                let r = i as f64 * step;
                let k = mom.kernel_table(r).unwrap().get(&vec![0; m]);
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let shell = if m == 1 { 2.0 } else { sphere_area(m) * libm::pow(r, (m - 1) as f64) };
                sum += w * shell * k * step;
            }
            assert!(libm::fabs(sum - 1.0) < 1e-4, "{a} m={m}: {sum}");
        }
    }

    #[test]
    fn gramian_examples() {
        let g = jet_gramian(&Amplitude::Gaussian, 1, 0).unwrap();
        assert_eq!(g.shape(), (1, 1));
        let mom = SpectralMoments::new(&Amplitude::Gaussian, 1).unwrap();
        assert!(close(g[(0, 0)], mom.s, 1e-14));
        let g = jet_gramian(&Amplitude::Gaussian, 1, 1).unwrap();
        assert_eq!(g[(0, 1)], 0.0);
        assert!(close(g[(1, 1)], mom.d, 1e-14));
        for m in 1..=3 {
            for n in 0..=3 {
                let g = jet_gramian(&Amplitude::Gaussian, m, n).unwrap();
                let eig = g.symmetric_eigenvalues();
                assert!(eig.min() > 0.0, "m={m} N={n}");
            }
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["gaussian", "gaussian-scaled:2", "poly-gaussian:0.5"] {
            let a: Amplitude = s.parse().unwrap();
            assert_eq!(a.to_string().parse::<Amplitude>().unwrap(), a);
        }
        assert!("poly-gaussian:-1".parse::<Amplitude>().is_err());
        assert!("gaussian-scaled:0".parse::<Amplitude>().is_err());
        assert!("cauchy".parse::<Amplitude>().is_err());
        assert!("gaussian:3".parse::<Amplitude>().is_err());
    }

    fn any_amplitude() -> impl Strategy<Value = Amplitude> {
        prop_oneof![
            Just(Amplitude::Gaussian),
            (0.2f64..5.0).prop_map(|s| Amplitude::GaussianScaled { sigma: s }),
            (0.0f64..3.0).prop_map(|c| Amplitude::PolyGaussian { c }),
        ]
    }

    proptest! {
        #[test]
        fn amplitude_is_normalized_even_and_decays(a in any_amplitude(), t in -30.0f64..30.0, m in 1usize..5) {
            prop_assert_eq!(a.eval(0.0), 1.0);
            prop_assert_eq!(a.eval(t), a.eval(-t));
            let k = m as u32 + 7;
            let r = a.cutoff(k);
            let far = 2.0 * r;
            prop_assert!(a.weight(far) * libm::pow(far, k as f64) < 1e-16);
        }

        #[test]
        fn moments_are_positive_with_consistent_fourth_moment(a in any_amplitude(), m in 1usize..5) {
            let mom = SpectralMoments::new(&a, m).unwrap();
            prop_assert!(mom.s > 0.0 && mom.d > 0.0 && mom.h > 0.0);
            let mut g = vec![0u32; m];
            g[0] = 4;
            prop_assert!(close(mom.full_moment(&g), 3.0 * mom.h, 1e-12));
        }
    }
}

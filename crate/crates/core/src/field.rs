//! Random-wave synthesis of stationary isotropic Gaussian fields.
//!
//! A realization is the finite cosine sum
//! `Φ(x) = √(2s/N) Σ_j cos(⟨ξ_j, x⟩ + φ_j)` with wave vectors drawn from
//! `μ_a / s` and uniform phases, so that `E[Φ(x)Φ(y)] = K_a(x − y)` exactly.
//! Values, gradients and Hessians are exact derivatives of this sum.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::rng::Stream;
use crate::spectral::{Amplitude, SpectralMoments};

pub const DEFAULT_WAVES: usize = 4096;

/// Cells of the tabulated radial distribution function.
pub const CDF_CELLS: usize = 4096;

const CELL_GAUSS_POINTS: usize = 8;

/// Coordinates beyond this magnitude fall back to `libm` range reduction.
const FAST_TRIG_LIMIT: f64 = 1e4;

/// Sine and cosine via Cody–Waite reduction by `π/2` and the fdlibm kernel
/// polynomials on `[-π/4, π/4]`; accurate for `|x| < 1e6`.
#[inline(always)]
fn sincos_reduced(x: f64) -> (f64, f64) {
    const INV_PIO2: f64 = 6.36619772367581382433e-01;
    const PIO2_1: f64 = 1.57079632673412561417e+00;
    const PIO2_2: f64 = 6.07710050630396597660e-11;
    const PIO2_3: f64 = 2.02226624871116645580e-21;
    let n = (x * INV_PIO2).round_ties_even();
    let r = ((x - n * PIO2_1) - n * PIO2_2) - n * PIO2_3;
    let z = r * r;
    let sin_r = r + r * z
        * (-1.66666666666666324348e-01
            + z * (8.33333333332248946124e-03
                + z * (-1.98412698298579493134e-04
                    + z * (2.75573137070700676789e-06 + z * (-2.50507602534068634195e-08 + z * 1.58969099521155010221e-10)))));
    let cos_r = 1.0 - 0.5 * z
        + z * z
            * (4.16666666666666019037e-02
                + z * (-1.38888888888741095749e-03
                    + z * (2.48015872894767294178e-05
                        + z * (-2.75573143513906633035e-07 + z * (2.08757232129817482790e-09 + z * -1.13596475577881948265e-11)))));
    let q = (n + 6755399441055744.0).to_bits();
    let swap = 0u64.wrapping_sub(q & 1);
    let (sb, cb) = (sin_r.to_bits(), cos_r.to_bits());
    let s = (sb & !swap) | (cb & swap);
    let c = (cb & !swap) | (sb & swap);
    (
        f64::from_bits(s ^ ((q & 2) << 62)),
        f64::from_bits(c ^ (((q + 1) & 2) << 62)),
    )
}

#[inline]
fn sincos(x: f64) -> (f64, f64) {
    if x.abs() < 1e6 {
        sincos_reduced(x)
    } else {
        libm::sincos(x)
    }
}

const LANES: usize = 4;

#[inline]
fn fast_trig_ok(x: &[f64]) -> bool {
    x.iter().all(|v| v.abs() < FAST_TRIG_LIMIT)
}

/// Inverse-CDF sampler for the radial density `∝ r^{m-1} a(r)²`.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    step: f64,
    cdf: Vec<f64>,
    slope: Vec<f64>,
    /// Mass beyond the last node relative to the total.
    pub tail_mass: f64,
}

impl RadialSampler {
    pub fn new(a: &Amplitude, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        let power = (m - 1) as f64;
        let density = |r: f64| libm::pow(r, power) * a.weight(r);
        let r_tail = tail_radius(a, m)?;
        let step = r_tail / CDF_CELLS as f64;
        let (gx, gw) = gauss_legendre(CELL_GAUSS_POINTS);
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..CDF_CELLS {
            let lo = k as f64 * step;
            let mut cell = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                cell += w * density(lo + 0.5 * step * (x + 1.0));
            }
            acc += 0.5 * step * cell;
            cdf.push(acc);
        }
        let total = crate::spectral::radial_moment(a, m as u32 - 1)?;
        let tail_mass = libm::fmax(1.0 - acc / total, 0.0);
        let mut slope: Vec<f64> = (0..=CDF_CELLS)
            .map(|i| density(i as f64 * step) / acc)
            .collect();
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        *cdf.last_mut().unwrap() = 1.0;
        fritsch_carlson(&cdf, &mut slope, step);
        Ok(RadialSampler {
            step,
            cdf,
            slope,
            tail_mass,
        })
    }

    pub fn r_tail(&self) -> f64 {
        self.step * CDF_CELLS as f64
    }

    /// Interpolated distribution function.
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let pos = r / self.step;
        if pos >= CDF_CELLS as f64 {
            return 1.0;
        }
        let k = pos as usize;
        self.hermite(k, pos - k as f64).0
    }

    /// `(H(t), H'(t))` on cell `k`, derivative in `t`.
    #[inline]
    fn hermite(&self, k: usize, t: f64) -> (f64, f64) {
        let (y0, y1) = (self.cdf[k], self.cdf[k + 1]);
        let (m0, m1) = (self.slope[k] * self.step, self.slope[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d = (6.0 * t2 - 6.0 * t) * (y0 - y1) + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1;
        (value, d)
    }

    /// Quantile function at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_CELLS) - 1;
        let (y0, y1) = (self.cdf[k], self.cdf[k + 1]);
        if y1 <= y0 {
            return k as f64 * self.step;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut t = ((u - y0) / (y1 - y0)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let (h, dh) = self.hermite(k, t);
            let f = h - u;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if libm::fabs(f) <= 1e-15 {
                break;
            }
            let newton = t - f / dh;
            t = if dh > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        (k as f64 + t) * self.step
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Smallest grid radius beyond which the normalized radial mass is `< 1e-12`.
fn tail_radius(a: &Amplitude, m: usize) -> Result<f64> {
    let total = crate::spectral::radial_moment(a, m as u32 - 1)?;
    let cut = a.cutoff(m as u32 + 7);
    let power = (m - 1) as f64;
    let density = |r: f64| libm::pow(r, power) * a.weight(r);
    let step = cut / 256.0;
    let (gx, gw) = gauss_legendre(16);
    let mut tail = 0.0;
    let mut r = cut;
    while r > step {
        let lo = r - step;
        let mut cell = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            cell += w * density(lo + 0.5 * step * (x + 1.0));
        }
        tail += 0.5 * step * cell;
        if tail >= 1e-13 * total {
            return Ok(r);
        }
        r = lo;
    }
    Ok(cut)
}

fn fritsch_carlson(y: &[f64], slope: &mut [f64], step: f64) {
    for k in 0..y.len() - 1 {
        let delta = (y[k + 1] - y[k]) / step;
        if delta <= 0.0 {
            slope[k] = 0.0;
            slope[k + 1] = 0.0;
            continue;
        }
        let alpha = slope[k] / delta;
        let beta = slope[k + 1] / delta;
        let s = alpha * alpha + beta * beta;
        if s > 9.0 {
            let tau = 3.0 / libm::sqrt(s);
            slope[k] = tau * alpha * delta;
            slope[k + 1] = tau * beta * delta;
        }
    }
}

/// Value, gradient and Hessian of a field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// One finite random-wave realization.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub dim: usize,
    /// Row-major `N×m` wave vectors.
    pub wave_vectors: Vec<f64>,
    pub phases: Vec<f64>,
    pub scale: f64,
}

impl FieldRealization {
    /// Builds a realization from explicit waves.
    pub fn from_waves(dim: usize, wave_vectors: Vec<f64>, phases: Vec<f64>, scale: f64) -> Result<Self> {
        if dim == 0 || wave_vectors.len() != dim * phases.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * phases.len(),
                got: wave_vectors.len(),
            });
        }
        Ok(FieldRealization {
            dim,
            wave_vectors,
            phases,
            scale,
        })
    }

    pub fn n_waves(&self) -> usize {
        self.phases.len()
    }

    #[inline]
    fn wave(&self, j: usize) -> &[f64] {
        &self.wave_vectors[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    fn angle(&self, j: usize, x: &[f64]) -> f64 {
        self.wave(j).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.phases[j]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.n_waves()).map(|j| sincos(self.angle(j, x)).1).sum();
        self.scale * s
    }

    /// Writes `∇Φ(x)` into `g`.
    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        match (self.dim, fast_trig_ok(x)) {
            (1, true) => return self.gradient_fixed::<1>(x, g),
            (2, true) => return self.gradient_fixed::<2>(x, g),
            (3, true) => return self.gradient_fixed::<3>(x, g),
            _ => {}
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n_waves() {
            let s = sincos(self.angle(j, x)).0;
            for (gi, xi) in g.iter_mut().zip(self.wave(j)) {
                *gi -= s * xi;
            }
        }
        g.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn gradient_fixed<const M: usize>(&self, x: &[f64], g: &mut [f64]) {
        let x: [f64; M] = core::array::from_fn(|i| x[i]);
        let mut gs = [[0.0; LANES]; M];
        let waves = self.wave_vectors.chunks_exact(M * LANES);
        let phases = self.phases.chunks_exact(LANES);
        let (rest_w, rest_p) = (waves.remainder(), phases.remainder());
        for (w, phase) in waves.zip(phases) {
            let mut angle = [0.0; LANES];
            for l in 0..LANES {
                angle[l] = phase[l];
                for i in 0..M {
                    angle[l] += w[l * M + i] * x[i];
                }
            }
            let sin: [f64; LANES] = core::array::from_fn(|l| sincos_reduced(angle[l]).0);
            for a in 0..M {
                for l in 0..LANES {
                    gs[a][l] -= sin[l] * w[l * M + a];
                }
            }
        }
        for (w, phase) in rest_w.chunks_exact(M).zip(rest_p) {
            let mut angle = *phase;
            for i in 0..M {
                angle += w[i] * x[i];
            }
            let s = sincos_reduced(angle).0;
            for a in 0..M {
                gs[a][0] -= s * w[a];
            }
        }
        for a in 0..M {
            g[a] = gs[a].iter().sum::<f64>() * self.scale;
        }
    }

    /// Value, `∇Φ` into `g` and row-major `HessΦ` into `h`.
    pub fn jet_into(&self, x: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
        match (self.dim, fast_trig_ok(x)) {
            (1, true) => self.jet_fixed::<1>(x, g, h),
            (2, true) => self.jet_fixed::<2>(x, g, h),
            (3, true) => self.jet_fixed::<3>(x, g, h),
            _ => self.jet_general(x, g, h),
        }
    }

    fn jet_fixed<const M: usize>(&self, x: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
        let x: [f64; M] = core::array::from_fn(|i| x[i]);
        let mut value = [0.0; LANES];
        let mut gs = [[0.0; LANES]; M];
        let mut hs = [[[0.0; LANES]; M]; M];
        let waves = self.wave_vectors.chunks_exact(M * LANES);
        let phases = self.phases.chunks_exact(LANES);
        let (rest_w, rest_p) = (waves.remainder(), phases.remainder());
        for (w, phase) in waves.zip(phases) {
            let mut angle = [0.0; LANES];
            for l in 0..LANES {
                angle[l] = phase[l];
                for i in 0..M {
                    angle[l] += w[l * M + i] * x[i];
                }
            }
            let mut sin = [0.0; LANES];
            let mut cos = [0.0; LANES];
            for l in 0..LANES {
                (sin[l], cos[l]) = sincos_reduced(angle[l]);
                value[l] += cos[l];
            }
            for a in 0..M {
                for l in 0..LANES {
                    gs[a][l] -= sin[l] * w[l * M + a];
                }
                for b in a..M {
                    for l in 0..LANES {
                        hs[a][b][l] -= cos[l] * w[l * M + a] * w[l * M + b];
                    }
                }
            }
        }
        for (w, phase) in rest_w.chunks_exact(M).zip(rest_p) {
            let mut angle = *phase;
            for i in 0..M {
                angle += w[i] * x[i];
            }
            let (s, c) = sincos_reduced(angle);
            value[0] += c;
            for a in 0..M {
                gs[a][0] -= s * w[a];
                for b in a..M {
                    hs[a][b][0] -= c * w[a] * w[b];
                }
            }
        }
        for a in 0..M {
            g[a] = gs[a].iter().sum::<f64>() * self.scale;
            for b in a..M {
                let v = hs[a][b].iter().sum::<f64>() * self.scale;
                h[a * M + b] = v;
                h[b * M + a] = v;
            }
        }
        value.iter().sum::<f64>() * self.scale
    }

    fn jet_general(&self, x: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
        let m = self.dim;
        g.iter_mut().for_each(|v| *v = 0.0);
        h.iter_mut().for_each(|v| *v = 0.0);
        let mut value = 0.0;
        for j in 0..self.n_waves() {
            let (s, c) = sincos(self.angle(j, x));
            let w = self.wave(j);
            value += c;
            for a in 0..m {
                g[a] -= s * w[a];
                let cw = c * w[a];
                for b in a..m {
                    h[a * m + b] -= cw * w[b];
                }
            }
        }
        for a in 0..m {
            g[a] *= self.scale;
            for b in a..m {
                let v = h[a * m + b] * self.scale;
                h[a * m + b] = v;
                h[b * m + a] = v;
            }
        }
        value * self.scale
    }
}

/// Exact jet of `f` at `x`.
pub fn evaluate_jet(f: &FieldRealization, x: &[f64]) -> Jet {
    let m = f.dim;
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m * m];
    let value = f.jet_into(x, &mut g, &mut h);
    Jet {
        value,
        gradient: g,
        hessian: DMatrix::from_row_slice(m, m, &h),
    }
}

/// Reusable sampler for realizations of `Φ_a` in dimension `m`.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    pub dim: usize,
    pub n_waves: usize,
    pub radial: RadialSampler,
    pub moments: SpectralMoments,
}

impl FieldSampler {
    pub fn new(a: &Amplitude, m: usize, n_waves: usize) -> Result<Self> {
        if n_waves == 0 {
            return Err(Error::InvalidParameter("at least one wave is required"));
        }
        Ok(FieldSampler {
            dim: m,
            n_waves,
            radial: RadialSampler::new(a, m)?,
            moments: SpectralMoments::new(a, m)?,
        })
    }

    pub fn sample(&self, rng: &mut Stream) -> FieldRealization {
        let m = self.dim;
        let n = self.n_waves;
        let mut waves = vec![0.0; n * m];
        let mut phases = vec![0.0; n];
        for j in 0..n {
            let r = self.radial.sample(rng);
            let dir = &mut waves[j * m..(j + 1) * m];
            loop {
                for d in dir.iter_mut() {
                    *d = StandardNormal.sample(rng);
                }
                let norm = libm::sqrt(dir.iter().map(|v| v * v).sum::<f64>());
                if norm > 0.0 {
                    dir.iter_mut().for_each(|d| *d *= r / norm);
                    break;
                }
            }
            phases[j] = 2.0 * PI * rng.random::<f64>();
        }
        FieldRealization {
            dim: m,
            wave_vectors: waves,
            phases,
            scale: libm::sqrt(2.0 * self.moments.s / n as f64),
        }
    }
}

/// One realization of `Φ_a` with `n_waves` waves.
pub fn sample_field(a: &Amplitude, m: usize, n_waves: usize, rng: &mut Stream) -> Result<FieldRealization> {
    Ok(FieldSampler::new(a, m, n_waves)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedKey;
    use crate::stats::Moments;

    #[test]
    fn radial_cdf_matches_exact_distribution() {
        // m = 2 Gaussian: density r e^{-r²/2}, CDF 1 − e^{-r²/2}.
        let s = RadialSampler::new(&Amplitude::Gaussian, 2).unwrap();
        assert!(s.tail_mass < 1e-12);
        for i in 0..200 {
            let r = 0.031 * i as f64;
            let exact = 1.0 - libm::exp(-0.5 * r * r);
            assert!((s.cdf(r) - exact).abs() < 1e-12, "r={r}");
        }
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let exact = libm::sqrt(-2.0 * libm::log(1.0 - u));
            assert!((s.quantile(u) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn radial_quantile_is_monotone() {
        let s = RadialSampler::new(&Amplitude::poly_gaussian(2.0).unwrap(), 3).unwrap();
        let mut prev = 0.0;
        for i in 0..10_000 {
            let q = s.quantile(i as f64 / 10_000.0);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn single_wave_calculus() {
        let scale = 0.7;
        let f = FieldRealization::from_waves(2, vec![1.0, 0.0], vec![PI / 2.0], scale).unwrap();
        let jet = evaluate_jet(&f, &[0.0, 0.0]);
        assert!(jet.value.abs() < 1e-15);
        assert!((jet.gradient[0] + scale).abs() < 1e-15);
        assert_eq!(jet.gradient[1], 0.0);
        assert!(jet.hessian.amax() < 1e-15);
        let jet = evaluate_jet(&f, &[-PI / 2.0, 0.3]);
        assert!((jet.value - scale).abs() < 1e-15);
        assert!((jet.hessian[(0, 0)] + scale).abs() < 1e-15);
    }

    #[test]
    fn jets_match_finite_differences() {
        let mut rng = SeedKey::new(21).rng();
        let f = sample_field(&Amplitude::Gaussian, 2, 256, &mut rng).unwrap();
        let eps = 1e-5;
        for _ in 0..100 {
            let x = [20.0 * rng.random::<f64>(), 20.0 * rng.random::<f64>()];
            let jet = evaluate_jet(&f, &x);
            assert_eq!(jet.hessian, jet.hessian.transpose());
            let gnorm = jet.gradient.iter().map(|g| g.abs()).fold(0.0, f64::max);
            let hnorm = jet.hessian.amax();
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += eps;
                xm[k] -= eps;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * eps);
                assert!((fd - jet.gradient[k]).abs() <= 1e-6 * gnorm.max(1e-3));
                let mut gp = [0.0; 2];
                let mut gm = [0.0; 2];
                f.gradient_into(&xp, &mut gp);
                f.gradient_into(&xm, &mut gm);
                for l in 0..2 {
                    let fd = (gp[l] - gm[l]) / (2.0 * eps);
                    assert!((fd - jet.hessian[(l, k)]).abs() <= 1e-5 * hnorm.max(1e-3));
                }
            }
        }
    }

    #[test]
    fn empirical_one_point_statistics() {
        let sampler = FieldSampler::new(&Amplitude::Gaussian, 2, 256).unwrap();
        let key = SeedKey::new(22);
        let (mut v, mut v2, mut g1) = (Moments::new(), Moments::new(), Moments::new());
        for rep in 0..10_000u64 {
            let f = sampler.sample(&mut key.child(rep).rng());
            let jet = evaluate_jet(&f, &[0.0, 0.0]);
            v.push(jet.value);
            v2.push(jet.value * jet.value);
            g1.push(jet.gradient[0] * jet.gradient[0]);
        }
        let mom = &sampler.moments;
        assert!(v.estimate().within(0.0, 3.0));
        assert!(v2.estimate().within(mom.s, 3.0));
        assert!(g1.estimate().within(mom.d, 3.0));
    }

    #[test]
    fn determinism() {
        let a = sample_field(&Amplitude::Gaussian, 3, 64, &mut SeedKey::new(5).child(2).rng()).unwrap();
        let b = sample_field(&Amplitude::Gaussian, 3, 64, &mut SeedKey::new(5).child(2).rng()).unwrap();
        assert_eq!(a, b);
    }
}

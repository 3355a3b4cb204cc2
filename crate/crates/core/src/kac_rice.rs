//! Kac–Rice densities: the one-point constant `C_m`, the two-point densities
//! `ρ̂`, `ρ̃`, their difference `Δ`, and the variance constants `Z_m`, `V_m`.
//!
//! Two-point quantities are computed at `x = r·e₁`, `y = 0`. Derivative
//! covariances follow `Cov[∂^αΦ(p), ∂^βΦ(q)] = (−1)^{|β|} ∂^{α+β}K(p − q)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use crate::ensemble::{expected_abs_det, omega_len, pair_abs_det, SymmetricEnsemble};
use crate::error::{Error, Result};
use crate::exec::{monte_carlo, BlockRunner};
use crate::gaussian::{condition, density_at_zero, fill_normal, is_nondegenerate, CenteredGaussian, SqrtFactor};
use crate::rng::{tags, SeedKey};
use crate::spectral::{sphere_area, Amplitude, KernelTable, SpectralMoments};
use crate::stats::{Estimate, Moments};

/// `C_m(a)` with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePointDensity {
    pub c_m: Estimate,
    pub d: f64,
    pub h: f64,
    /// `E_{𝒮_m^{1/2}} |det X|`.
    pub abs_det: Estimate,
}

/// `C_m(a) = (h_m / (π d_m))^{m/2} · E_{𝒮_m^{1/2}} |det X|`.
pub fn one_point_constant<R: BlockRunner>(
    runner: &R,
    a: &Amplitude,
    m: usize,
    n_mc: usize,
    key: SeedKey,
) -> Result<OnePointDensity> {
    let mom = SpectralMoments::new(a, m)?;
    one_point_from_moments(runner, &mom, n_mc, key)
}

pub fn one_point_from_moments<R: BlockRunner>(
    runner: &R,
    mom: &SpectralMoments,
    n_mc: usize,
    key: SeedKey,
) -> Result<OnePointDensity> {
    let abs_det = expected_abs_det(runner, mom.dim, 0.5, n_mc, key.child(tags::ONE_POINT))?;
    let factor = libm::pow(mom.h / (PI * mom.d), 0.5 * mom.dim as f64);
    Ok(OnePointDensity {
        c_m: abs_det.scale(factor),
        d: mom.d,
        h: mom.h,
        abs_det,
    })
}

/// `ρ̃ = C_m²`, with the propagated standard error.
pub fn two_point_density_tilde<R: BlockRunner>(
    runner: &R,
    a: &Amplitude,
    m: usize,
    n_mc: usize,
    key: SeedKey,
) -> Result<Estimate> {
    let c = one_point_constant(runner, a, m, n_mc, key)?.c_m;
    Ok(square(c))
}

fn square(c: Estimate) -> Estimate {
    Estimate::new(c.value * c.value, 2.0 * c.value.abs() * c.stderr)
}

/// Derivative of `Φ` at one of the two points, scaled by `coef`.
#[derive(Debug, Clone)]
struct Variable {
    at_x: bool,
    alpha: Vec<u32>,
    coef: f64,
}

fn hessian_variables(m: usize, at_x: bool) -> Vec<Variable> {
    let mut out = Vec::with_capacity(omega_len(m));
    for i in 0..m {
        for j in i..m {
            let mut alpha = vec![0u32; m];
            alpha[i] += 1;
            alpha[j] += 1;
            out.push(Variable {
                at_x,
                alpha,
                coef: if i == j { 1.0 } else { SQRT_2 },
            });
        }
    }
    out
}

fn gradient_variables(m: usize, at_x: bool) -> Vec<Variable> {
    (0..m)
        .map(|j| {
            let mut alpha = vec![0u32; m];
            alpha[j] = 1;
            Variable { at_x, alpha, coef: 1.0 }
        })
        .collect()
}

/// The two-point Gaussian model at separation `r` along `±e₁`.
#[derive(Debug, Clone)]
pub struct TwoPointModel {
    pub moments: SpectralMoments,
    origin: KernelTable,
}

/// Conditioned law of the stacked Hessians at one separation.
#[derive(Debug, Clone)]
pub struct ConditionedPair {
    pub r: f64,
    /// `Var[(ω(H_x), ω(H_y)) | ∇Φ̂ = 0]`.
    pub cov: DMatrix<f64>,
    pub factor: SqrtFactor,
    /// Density of `∇Φ̂ = (∇Φ(x), ∇Φ(y))` at 0.
    pub density: f64,
    /// `T(r e₁)`.
    pub decay: f64,
}

impl TwoPointModel {
    pub fn new(a: &Amplitude, m: usize) -> Result<Self> {
        let moments = SpectralMoments::new(a, m)?;
        let origin = moments.kernel_table(0.0)?;
        Ok(TwoPointModel { moments, origin })
    }

    pub fn dim(&self) -> usize {
        self.moments.dim
    }

    fn covariance(&self, table: &KernelTable, orientation: f64, rows: &[Variable], cols: &[Variable]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let (a, b) = (&rows[i], &cols[j]);
            let gamma: Vec<u32> = a.alpha.iter().zip(&b.alpha).map(|(p, q)| p + q).collect();
            let beta_order: u32 = b.alpha.iter().sum();
            let k = match (a.at_x, b.at_x) {
                (true, true) | (false, false) => self.origin.get(&gamma),
                // x − y = orientation · r e₁
                (true, false) if orientation > 0.0 => table.get(&gamma),
                (true, false) => table.get_reflected(&gamma),
                (false, true) if orientation > 0.0 => table.get_reflected(&gamma),
                (false, true) => table.get(&gamma),
            };
            let sign = if beta_order % 2 == 0 { 1.0 } else { -1.0 };
            a.coef * b.coef * sign * k
        })
    }

    /// `Var[(∇Φ(x), ∇Φ(y))]`, without a degeneracy check.
    pub fn gradient_covariance(&self, table: &KernelTable, orientation: f64) -> DMatrix<f64> {
        let m = self.dim();
        let mut g = gradient_variables(m, true);
        g.extend(gradient_variables(m, false));
        self.covariance(table, orientation, &g, &g)
    }

    /// Joint blocks `(Var Y, Var X, Cov(Y, X))` with `Y` the stacked Hessians
    /// in `ω` coordinates and `X` the stacked gradients.
    pub fn joint(&self, table: &KernelTable, orientation: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let m = self.dim();
        let mut y = hessian_variables(m, true);
        y.extend(hessian_variables(m, false));
        let mut x = gradient_variables(m, true);
        x.extend(gradient_variables(m, false));
        (
            self.covariance(table, orientation, &y, &y),
            self.covariance(table, orientation, &x, &x),
            self.covariance(table, orientation, &y, &x),
        )
    }

    pub fn conditioned(&self, r: f64) -> Result<ConditionedPair> {
        self.conditioned_oriented(r, 1.0)
    }

    pub fn conditioned_oriented(&self, r: f64, orientation: f64) -> Result<ConditionedPair> {
        let table = self.moments.kernel_table(r)?;
        let (vy, vx, cyx) = self.joint(&table, orientation);
        let reg = condition(&vy, &vx, &cyx)?;
        let density = density_at_zero(&CenteredGaussian::new(vx)?)?;
        Ok(ConditionedPair {
            r,
            factor: SqrtFactor::new(&reg.cov_conditioned),
            cov: reg.cov_conditioned,
            density,
            decay: table.decay(),
        })
    }

    /// The `r → ∞` limit: independent Hessians from `𝒮_m^{h_m}` and
    /// gradient density `(2π d_m)^{-m}`.
    pub fn independent_limit(&self) -> ConditionedPair {
        let m = self.dim();
        let k = omega_len(m);
        let single = SymmetricEnsemble {
            dim: m,
            v: self.moments.h,
        }
        .omega_covariance();
        let mut cov = DMatrix::zeros(2 * k, 2 * k);
        cov.view_mut((0, 0), (k, k)).copy_from(&single);
        cov.view_mut((k, k), (k, k)).copy_from(&single);
        ConditionedPair {
            r: f64::INFINITY,
            factor: SqrtFactor::new(&cov),
            cov,
            density: libm::pow(2.0 * PI * self.moments.d, -(m as f64)),
            decay: 0.0,
        }
    }

    /// Smallest `r` of the geometric scan `r₀·1.1^k`, `r₀ = 10⁻³·√(s/d)`,
    /// at which the gradient pair passes `is_nondegenerate(rel_tol)`.
    pub fn smallest_nondegenerate(&self, rel_tol: f64) -> Result<f64> {
        let mut r = 1e-3 * self.moments.length_scale();
        for _ in 0..400 {
            let table = self.moments.kernel_table(r)?;
            let g = CenteredGaussian::new(self.gradient_covariance(&table, 1.0))?;
            if is_nondegenerate(&g, rel_tol) {
                return Ok(r);
            }
            r *= 1.1;
        }
        Err(Error::InvalidParameter("no nondegenerate separation found"))
    }
}

/// `Var[∇Φ̂]` at separation `r > 0`, ordered `(∇Φ(x), ∇Φ(y))`.
pub fn grad_pair_covariance(a: &Amplitude, m: usize, r: f64) -> Result<DMatrix<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("separation must be positive"));
    }
    let cov = grad_pair_covariance_unchecked(a, m, r)?;
    let g = CenteredGaussian::new(cov.clone())?;
    let vals = g.cov().clone().symmetric_eigenvalues();
    if !is_nondegenerate(&g, crate::gaussian::DEFAULT_REL_TOL) {
        return Err(Error::Degenerate {
            min_eigenvalue: vals.min(),
            threshold: crate::gaussian::DEFAULT_REL_TOL * vals.sum() / vals.len() as f64,
        });
    }
    Ok(cov)
}

/// `Var[∇Φ̂]` at any `r ≥ 0`, including the singular diagonal.
pub fn grad_pair_covariance_unchecked(a: &Amplitude, m: usize, r: f64) -> Result<DMatrix<f64>> {
    let model = TwoPointModel::new(a, m)?;
    let table = model.moments.kernel_table(r)?;
    Ok(model.gradient_covariance(&table, 1.0))
}

/// The `2×2` blocks `V_j = [[d_m, d_m(j)], [d_m(j), d_m]]` after pairing
/// `∂_jΦ(x)` with `∂_jΦ(y)`.
pub fn grad_pair_blocks(cov: &DMatrix<f64>) -> Vec<[[f64; 2]; 2]> {
    let m = cov.nrows() / 2;
    (0..m)
        .map(|j| [[cov[(j, j)], cov[(j, m + j)]], [cov[(m + j, j)], cov[(m + j, m + j)]]])
        .collect()
}

/// Direct Monte Carlo `ρ̂(r) = E[|det H_x^♭||det H_y^♭|] · p_{∇Φ̂}(0)`.
pub fn two_point_density_hat<R: BlockRunner>(
    runner: &R,
    a: &Amplitude,
    m: usize,
    r: f64,
    n_mc: usize,
    key: SeedKey,
) -> Result<Estimate> {
    let model = TwoPointModel::new(a, m)?;
    two_point_hat_oriented(runner, &model, r, 1.0, n_mc, key)
}

/// [`two_point_density_hat`] with `x − y = orientation · r e₁`.
pub fn two_point_hat_oriented<R: BlockRunner>(
    runner: &R,
    model: &TwoPointModel,
    r: f64,
    orientation: f64,
    n_mc: usize,
    key: SeedKey,
) -> Result<Estimate> {
    let pair = model.conditioned_oriented(r, orientation)?;
    let e = crate::ensemble::expected_abs_det_pair(runner, &pair.cov, model.dim(), n_mc, key.child(tags::TWO_POINT))?;
    Ok(e.scale(pair.density))
}

/// One row of the two-point profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub r: f64,
    pub rho_hat: Estimate,
    pub rho_tilde: Estimate,
    pub delta: Estimate,
    pub decay: f64,
}

/// Two-point densities over a set of separations.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointProfile {
    pub rows: Vec<ProfileRow>,
}

/// Draws used by the control-variate estimator of `Δ` at several
/// separations: per sample, `|det||det|(L_r z)·p_r − |det||det|(L_∞ z)·p_∞`
/// with the same normals `z` at every `r`. Returns per-node moments and the
/// moments of `Σ_k w_k Δ(r_k) + w_∞ ρ̃` for each weight vector.
fn delta_draws<R: BlockRunner>(
    runner: &R,
    model: &TwoPointModel,
    pairs: &[ConditionedPair],
    weights: &[(Vec<f64>, f64)],
    n_mc: usize,
    key: SeedKey,
) -> (Vec<Moments>, Vec<Moments>) {
    let m = model.dim();
    let dim = 2 * omega_len(m);
    let limit = model.independent_limit();
    let nodes = pairs.len();
    let acc = monte_carlo(runner, key.child(tags::TWO_POINT), n_mc, nodes + weights.len(), |rng, len, acc| {
        let mut z = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut deltas = vec![0.0; nodes];
        for _ in 0..len {
            fill_normal(rng, &mut z);
            limit.factor.apply(&z, &mut x);
            let tilde = pair_abs_det(&x, m) * limit.density;
            for (k, p) in pairs.iter().enumerate() {
                p.factor.apply(&z, &mut x);
                deltas[k] = pair_abs_det(&x, m) * p.density - tilde;
                acc[k].push(deltas[k]);
            }
            for (w, (node_w, tilde_w)) in weights.iter().enumerate() {
                let s: f64 = node_w.iter().zip(&deltas).map(|(a, b)| a * b).sum();
                acc[nodes + w].push(s + tilde_w * tilde);
            }
        }
    });
    let (node_acc, weight_acc) = acc.split_at(nodes);
    (node_acc.to_vec(), weight_acc.to_vec())
}

/// `(ρ̂, ρ̃, Δ)` at each separation, with `Δ` from common random numbers
/// against the independent limit and `ρ̂ = ρ̃ + Δ`.
pub fn two_point_profile<R: BlockRunner>(
    runner: &R,
    a: &Amplitude,
    m: usize,
    separations: &[f64],
    n_mc: usize,
    key: SeedKey,
) -> Result<TwoPointProfile> {
    let model = TwoPointModel::new(a, m)?;
    let one = one_point_from_moments(runner, &model.moments, n_mc, key)?;
    let rho_tilde = square(one.c_m);
    let pairs = separations
        .iter()
        .map(|&r| model.conditioned(r))
        .collect::<Result<Vec<_>>>()?;
    let (nodes, _) = delta_draws(runner, &model, &pairs, &[], n_mc, key);
    let rows = pairs
        .iter()
        .zip(&nodes)
        .map(|(p, acc)| {
            let delta = acc.estimate();
            ProfileRow {
                r: p.r,
                rho_hat: Estimate::new(rho_tilde.value + delta.value, libm::hypot(rho_tilde.stderr, delta.stderr)),
                rho_tilde,
                delta,
                decay: p.decay,
            }
        })
        .collect();
    Ok(TwoPointProfile { rows })
}

/// Settings for [`z_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZOptions {
    /// Defaults to [`TwoPointModel::smallest_nondegenerate`] at `1e-4`.
    pub r_min: Option<f64>,
    /// Defaults to `max(10·√(s/d), first r with T(r) ≤ 1e-16·T(0))`.
    pub r_max: Option<f64>,
    pub nodes: usize,
    pub n_mc: usize,
    /// Bound on the diagonal and tail terms; defaults to `1e-3·C_m`.
    pub tolerance: Option<f64>,
}

impl Default for ZOptions {
    fn default() -> Self {
        ZOptions {
            r_min: None,
            r_max: None,
            nodes: 32,
            n_mc: 1 << 20,
            tolerance: None,
        }
    }
}

/// Relative threshold used for the default `r_min`.
pub const R_MIN_REL_TOL: f64 = 1e-4;

/// `C_m`, `Z_m` and `V_m = Z_m + C_m` with their error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceConstants {
    pub dim: usize,
    pub amplitude: Amplitude,
    pub c_m: Estimate,
    /// `Z_m` with its Monte Carlo standard error.
    pub z_m: Estimate,
    /// `|Simpson − trapezoid|` on the nodes.
    pub quad_err: f64,
    /// Extrapolated `∫_0^{r_min} r^{m-1} ρ̂ dr` term (included in `z_m`).
    pub diagonal_mass: f64,
    /// Bound on `∫_{r_max}^∞ r^{m-1} |Δ| dr`.
    pub tail_bound: f64,
    pub v_m: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
    pub profile: TwoPointProfile,
}

impl VarianceConstants {
    /// Total error of `z_m`: MC standard error plus the deterministic terms.
    pub fn z_err(&self) -> f64 {
        self.z_m.stderr + self.quad_err + self.diagonal_mass + self.tail_bound
    }

    pub fn v_err(&self) -> f64 {
        libm::hypot(self.z_m.stderr, self.c_m.stderr) + self.quad_err + self.diagonal_mass + self.tail_bound
    }
}

/// Log-spaced nodes and Simpson / trapezoid weights for `∫ g(r) dr` written
/// as `∫ g(e^u) e^u du`.
pub fn log_rule(r_min: f64, r_max: f64, nodes: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = nodes.max(4);
    let (u0, u1) = (libm::log(r_min), libm::log(r_max));
    let du = (u1 - u0) / (n - 1) as f64;
    let rs: Vec<f64> = (0..n).map(|i| libm::exp(u0 + i as f64 * du)).collect();
    let intervals = n - 1;
    let mut simpson = vec![0.0; n];
    let (even_part, tail) = if intervals % 2 == 0 { (intervals, 0) } else { (intervals - 3, 3) };
    for i in (0..even_part).step_by(2) {
        simpson[i] += du / 3.0;
        simpson[i + 1] += 4.0 * du / 3.0;
        simpson[i + 2] += du / 3.0;
    }
    if tail == 3 {
        let s = even_part;
        for (o, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            simpson[s + o] += 3.0 * du / 8.0 * c;
        }
    }
    let mut trap = vec![du; n];
    trap[0] = 0.5 * du;
    trap[n - 1] = 0.5 * du;
    for i in 0..n {
        simpson[i] *= rs[i];
        trap[i] *= rs[i];
    }
    (rs, simpson, trap)
}

/// Radial integral `Z_m = vol(S^{m-1}) ∫_0^∞ r^{m-1} Δ(r) dr` and `V_m`.
pub fn z_constant<R: BlockRunner>(
    runner: &R,
    a: &Amplitude,
    m: usize,
    opts: &ZOptions,
    key: SeedKey,
) -> Result<VarianceConstants> {
    let model = TwoPointModel::new(a, m)?;
    let mom = model.moments.clone();
    let one = one_point_from_moments(runner, &mom, opts.n_mc, key)?;
    let tolerance = opts.tolerance.unwrap_or(1e-3 * one.c_m.value);
    let r_min = match opts.r_min {
        Some(r) => r,
        None => model.smallest_nondegenerate(R_MIN_REL_TOL)?,
    };
    let t0 = mom.decay_at_origin();
    let r_max = match opts.r_max {
        Some(r) => r,
        None => {
            let ell = mom.length_scale();
            let mut r = 10.0 * ell;
            while mom.kernel_table(r)?.decay() > 1e-16 * t0 {
                r += 0.5 * ell;
            }
            r
        }
    };
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::InvalidParameter("need 0 < r_min < r_max"));
    }
    let (rs, simpson, trap) = log_rule(r_min, r_max, opts.nodes);
    let pairs = rs.iter().map(|&r| model.conditioned(r)).collect::<Result<Vec<_>>>()?;
    let mf = m as f64;
    let area = sphere_area(m);
    let weight = |w: &[f64]| -> Vec<f64> {
        w.iter()
            .zip(&rs)
            .map(|(wi, r)| area * wi * libm::pow(*r, mf - 1.0))
            .collect()
    };
    let rm = libm::pow(r_min, mf);
    let mut with_diag = weight(&simpson);
    // ∫_0^{r_min} r^{m-1}Δ with r^{m-1}ρ̂ extrapolated linearly to 0:
    // r_min^m (ρ̃ + Δ(r_min)) / 2 − ρ̃ r_min^m / m.
    with_diag[0] += area * 0.5 * rm;
    let tilde_w = area * (0.5 * rm - rm / mf);
    let weights = vec![
        (with_diag, tilde_w),
        (weight(&simpson), 0.0),
        (weight(&trap), 0.0),
        (vec![0.0; rs.len()], 1.0),
    ];
    let (node_acc, w_acc) = delta_draws(runner, &model, &pairs, &weights, opts.n_mc, key);
    let z = w_acc[0].estimate();
    let quad_err = libm::fabs(w_acc[1].mean - w_acc[2].mean);
    let rho_tilde_cv = w_acc[3].mean;
    let diagonal_mass = libm::fabs(area * 0.5 * rm * (rho_tilde_cv + node_acc[0].mean));

    // Tail: |Δ(r)| ≤ K·T(r) with K fitted on the nodes beyond one length
    // scale, integrated over [r_max, 3 r_max].
    let ell = mom.length_scale();
    let k_env = pairs
        .iter()
        .zip(&node_acc)
        .filter(|(p, _)| p.r >= ell && p.decay > 0.0)
        .map(|(p, acc)| (libm::fabs(acc.mean) + 3.0 * acc.stderr()) / p.decay)
        .fold(0.0, f64::max);
    let (gx, gw) = crate::quadrature::gauss_legendre(8);
    let panels = 4;
    let width = 2.0 * r_max / panels as f64;
    let mut tail_int = 0.0;
    for p in 0..panels {
        let lo = r_max + p as f64 * width;
        for (x, w) in gx.iter().zip(&gw) {
            let r = lo + 0.5 * width * (x + 1.0);
            tail_int += 0.5 * width * w * libm::pow(r, mf - 1.0) * mom.kernel_table(r)?.decay();
        }
    }
    let tail_bound = area * k_env * tail_int;

    if diagonal_mass > tolerance {
        return Err(Error::Precision {
            what: "diagonal extrapolation",
            value: diagonal_mass,
            tolerance,
        });
    }
    if tail_bound > tolerance {
        return Err(Error::Precision {
            what: "tail bound",
            value: tail_bound,
            tolerance,
        });
    }

    let rho_tilde = square(one.c_m);
    let rows = pairs
        .iter()
        .zip(&node_acc)
        .map(|(p, acc)| {
            let delta = acc.estimate();
            ProfileRow {
                r: p.r,
                rho_hat: Estimate::new(rho_tilde.value + delta.value, libm::hypot(rho_tilde.stderr, delta.stderr)),
                rho_tilde,
                delta,
                decay: p.decay,
            }
        })
        .collect();
    Ok(VarianceConstants {
        dim: m,
        amplitude: *a,
        c_m: one.c_m,
        z_m: z,
        quad_err,
        diagonal_mass,
        tail_bound,
        v_m: z.value + one.c_m.value,
        r_min,
        r_max,
        nodes: rs.len(),
        profile: TwoPointProfile { rows },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    /// `E|XY|` for a centered bivariate normal.
    fn abs_product_oracle(s1: f64, s2: f64, rho: f64) -> f64 {
        let rho = rho.clamp(-1.0, 1.0);
        2.0 * s1 * s2 / PI * (libm::sqrt(1.0 - rho * rho) + rho * libm::asin(rho))
    }

    /// Closed-form `ρ̂(r)` for `m = 1`, Gaussian amplitude: kernel
    /// `(2π)^{-1/2} e^{-t²/2}` and its derivatives.
    fn rho_hat_oracle_m1(r: f64) -> f64 {
        let c = 1.0 / libm::sqrt(2.0 * PI);
        let e = libm::exp(-0.5 * r * r);
        let k2 = c * (r * r - 1.0) * e;
        let k3 = c * (3.0 * r - r * r * r) * e;
        let k4 = c * (r.powi(4) - 6.0 * r * r + 3.0) * e;
        // Variables Φ''(x), Φ''(y), Φ'(x), Φ'(y) with x − y = r.
        let var_y = DMatrix::from_row_slice(2, 2, &[3.0 * c, k4, k4, 3.0 * c]);
        let var_x = DMatrix::from_row_slice(2, 2, &[c, -k2, -k2, c]);
        let cov_yx = DMatrix::from_row_slice(2, 2, &[0.0, -k3, k3, 0.0]);
        let inv = var_x.clone().try_inverse().unwrap();
        let cond = &var_y - &cov_yx * inv * cov_yx.transpose();
        let (s1, s2) = (cond[(0, 0)].sqrt(), cond[(1, 1)].sqrt());
        let rho = cond[(0, 1)] / (s1 * s2);
        let density = 1.0 / (2.0 * PI * var_x.determinant().sqrt());
        abs_product_oracle(s1, s2, rho) * density
    }

    #[test]
    fn one_point_gaussian_m1() {
        let one = one_point_constant(&Sequential, &Amplitude::Gaussian, 1, 200_000, SeedKey::new(1)).unwrap();
        assert!(one.c_m.within(libm::sqrt(3.0) / PI, 3.0));
    }

    #[test]
    fn ratio_identity() {
        for a in [Amplitude::Gaussian, Amplitude::poly_gaussian(0.8).unwrap()] {
            for m in 1..=3 {
                let mom = SpectralMoments::new(&a, m).unwrap();
                let want = mom.radial[m + 3] / ((m as f64 + 2.0) * mom.radial[m + 1]);
                assert!((mom.h / mom.d - want).abs() < 1e-10 * want);
            }
        }
    }

    #[test]
    fn one_point_gaussian_m2_composes() {
        let one = one_point_constant(&Sequential, &Amplitude::Gaussian, 2, 200_000, SeedKey::new(2)).unwrap();
        assert!((one.c_m.value - one.abs_det.value / PI).abs() < 1e-14);
        assert!(one.c_m.within(2.0 / (libm::sqrt(3.0) * PI), 3.0));
    }

    #[test]
    fn gradient_pair_structure() {
        let cov = grad_pair_covariance(&Amplitude::Gaussian, 2, 20.0).unwrap();
        let d = SpectralMoments::new(&Amplitude::Gaussian, 2).unwrap().d;
        assert!((cov - DMatrix::identity(4, 4) * d).amax() < 1e-10);
        for i in 1..=80 {
            let r = 0.1 * i as f64;
            let cov = grad_pair_covariance(&Amplitude::Gaussian, 2, r).unwrap();
            for b in grad_pair_blocks(&cov) {
                assert!(b[0][0] * b[1][1] - b[0][1] * b[1][0] > 0.0);
            }
        }
        let singular = grad_pair_covariance_unchecked(&Amplitude::Gaussian, 2, 0.0).unwrap();
        for b in grad_pair_blocks(&singular) {
            assert!((b[0][0] * b[1][1] - b[0][1] * b[1][0]).abs() < 1e-14);
        }
        assert!(grad_pair_covariance(&Amplitude::Gaussian, 2, 0.0).is_err());
        assert!(matches!(
            grad_pair_covariance(&Amplitude::Gaussian, 2, 1e-7),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn gradient_pair_decay_is_monotone() {
        let d = SpectralMoments::new(&Amplitude::Gaussian, 2).unwrap().d;
        let mut prev = f64::INFINITY;
        for r in 2..=8 {
            let cov = grad_pair_covariance(&Amplitude::Gaussian, 2, r as f64).unwrap();
            let dev = (cov - DMatrix::identity(4, 4) * d).norm();
            assert!(dev < prev);
            prev = dev;
        }
    }

    #[test]
    fn conditioned_pair_matches_closed_form_m1() {
        let model = TwoPointModel::new(&Amplitude::Gaussian, 1).unwrap();
        for &r in &[0.3, 1.0, 2.5] {
            let pair = model.conditioned(r).unwrap();
            let est = two_point_density_hat(&Sequential, &Amplitude::Gaussian, 1, r, 200_000, SeedKey::new(3)).unwrap();
            let oracle = rho_hat_oracle_m1(r);
            assert!(est.within(oracle, 3.0), "r={r}: {est:?} vs {oracle}");
            assert!(pair.cov.clone().symmetric_eigenvalues().min() >= -1e-12);
        }
    }

    #[test]
    fn orientation_symmetry() {
        let model = TwoPointModel::new(&Amplitude::Gaussian, 2).unwrap();
        let a = two_point_hat_oriented(&Sequential, &model, 1.3, 1.0, 20_000, SeedKey::new(4)).unwrap();
        let b = two_point_hat_oriented(&Sequential, &model, 1.3, -1.0, 20_000, SeedKey::new(4)).unwrap();
        assert!((a.value - b.value).abs() <= 1e-12 * a.value);
    }

    #[test]
    fn profile_factorizes_and_decays() {
        let profile = two_point_profile(&Sequential, &Amplitude::Gaussian, 1, &[1.0, 8.0, 12.0], 200_000, SeedKey::new(5)).unwrap();
        let c1sq = 3.0 / (PI * PI);
        let (d1, d8, d12) = (profile.rows[0], profile.rows[1], profile.rows[2]);
        assert!((d1.delta.value - (rho_hat_oracle_m1(1.0) - c1sq)).abs() < 3.0 * d1.delta.stderr + 1e-3);
        assert!(d8.delta.value.abs() <= 1e-4 * d1.delta.value.abs());
        let tol = (0.01 * c1sq).max(3.0 * d12.rho_hat.stderr);
        assert!((d12.rho_hat.value - c1sq).abs() <= tol);
        for row in &profile.rows {
            assert_eq!(row.rho_tilde, d1.rho_tilde);
            assert!(row.rho_hat.value >= 0.0);
        }
    }

    #[test]
    fn log_rule_integrates_smooth_functions() {
        let (rs, simpson, trap) = log_rule(0.01, 10.0, 32);
        let f = |r: f64| libm::exp(-r);
        let s: f64 = rs.iter().zip(&simpson).map(|(r, w)| w * f(*r)).sum();
        let t: f64 = rs.iter().zip(&trap).map(|(r, w)| w * f(*r)).sum();
        let exact = libm::exp(-0.01) - libm::exp(-10.0);
        assert!((s - exact).abs() < 1e-4);
        assert!((s - exact).abs() < (t - exact).abs());
    }

    #[test]
    fn z_constant_gaussian_m1() {
        let opts = ZOptions {
            n_mc: 1 << 17,
            ..ZOptions::default()
        };
        let vc = z_constant(&Sequential, &Amplitude::Gaussian, 1, &opts, SeedKey::new(6)).unwrap();
        assert_eq!(vc.v_m, vc.z_m.value + vc.c_m.value);
        assert!((vc.z_m.value + 0.380848).abs() < 3.0 * vc.z_err() + 2e-3, "{vc:?}");
        let last = vc.profile.rows.last().unwrap();
        assert!(last.delta.value.abs() < 1e-6);
        assert!(vc.v_m > 0.0);
    }
}

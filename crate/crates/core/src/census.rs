//! Critical points of a field in a box and the critical measure `𝔠[f]`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::FieldRealization;
use crate::spectral::SpectralMoments;

/// A field with exact first and second derivatives.
pub trait GradientField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Returns the value; writes the gradient and the row-major Hessian.
    fn jet(&self, x: &[f64], g: &mut [f64], h: &mut [f64]) -> f64;
}

impl GradientField for FieldRealization {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        FieldRealization::value(self, x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        self.gradient_into(x, g)
    }
    fn jet(&self, x: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
        self.jet_into(x, g, h)
    }
}

/// Axis-aligned box `∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuboid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("box sides must have positive length"));
        }
        Ok(Cuboid { lo, hi })
    }

    /// `[0, side]^m`.
    pub fn cube(m: usize, side: f64) -> Result<Self> {
        Cuboid::new(vec![0.0; m], vec![side; m])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn scaled(&self, r: f64) -> Cuboid {
        Cuboid {
            lo: self.lo.iter().map(|v| v * r).collect(),
            hi: self.hi.iter().map(|v| v * r).collect(),
        }
    }

    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a < *v && *v < *b)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Whether `other ⊆ self` up to a relative slack of `1e-12`.
    pub fn covers(&self, other: &Cuboid) -> bool {
        if other.dim() != self.dim() {
            return false;
        }
        (0..self.dim()).all(|i| {
            let slack = 1e-12 * (self.hi[i] - self.lo[i]).abs().max(1.0);
            other.lo[i] >= self.lo[i] - slack && other.hi[i] <= self.hi[i] + slack
        })
    }
}

/// Census settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensusOptions {
    /// Seed-grid spacing.
    pub h: f64,
    pub newton_tol: f64,
    pub dedup_radius: f64,
    pub max_iter: usize,
    /// Hessian eigenvalues with `|λ| ≤ hess_tol` mark a degenerate point.
    pub hess_tol: f64,
    /// Run the secondary pass from local minima of `|∇Φ|²`.
    pub audit: bool,
}

impl CensusOptions {
    /// Defaults for a field with the given moments and expected critical
    /// point density `c_m`.
    pub fn for_moments(moments: &SpectralMoments, c_m: f64) -> Self {
        let h = 0.5 * libm::pow(c_m, -1.0 / moments.dim as f64);
        CensusOptions {
            h,
            newton_tol: 1e-10 * libm::sqrt(moments.d),
            dedup_radius: 1e-6 * h,
            max_iter: 60,
            hess_tol: 1e-8 * libm::sqrt(moments.h),
            audit: true,
        }
    }

    pub fn with_spacing(mut self, h: f64) -> Self {
        self.h = h;
        self.dedup_radius = 1e-6 * h;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub morse_index: usize,
    pub min_abs_hess_eig: f64,
}

/// A converged point whose Hessian is numerically singular.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneratePoint {
    pub location: Vec<f64>,
    pub grad_norm: f64,
    pub min_abs_hess_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCensus {
    pub region: Cuboid,
    /// Sorted lexicographically by location.
    pub points: Vec<CriticalPoint>,
    /// Excluded from counts.
    pub degenerate: Vec<DegeneratePoint>,
    pub options: CensusOptions,
    /// Points found only by the audit pass.
    pub audit_extra: usize,
}

impl CriticalCensus {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    /// `Σ_p g(p)` over critical points.
    pub fn integrate<G: Fn(&[f64]) -> f64>(&self, g: G) -> f64 {
        self.points.iter().map(|p| g(&p.location)).sum()
    }
}

/// Number of negative eigenvalues of a nondegenerate symmetric matrix.
pub fn morse_index(hessian: &DMatrix<f64>, hess_tol: f64) -> Result<usize> {
    let eig = hessian.clone().symmetric_eigenvalues();
    let (idx, min_abs) = index_and_gap(eig.as_slice());
    if min_abs <= hess_tol {
        return Err(Error::DegenerateCriticalPoint {
            eigenvalue: min_abs,
            tolerance: hess_tol,
        });
    }
    Ok(idx)
}

fn index_and_gap(eig: &[f64]) -> (usize, f64) {
    let idx = eig.iter().filter(|&&l| l < 0.0).count();
    let gap = eig.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    (idx, gap)
}

fn symmetric_eigenvalues(h: &[f64], m: usize) -> Vec<f64> {
    match m {
        1 => vec![h[0]],
        2 => {
            let (a, b, c) = (h[0], h[1], h[3]);
            let mean = 0.5 * (a + c);
            let rad = libm::hypot(0.5 * (a - c), b);
            vec![mean - rad, mean + rad]
        }
        _ => DMatrix::from_row_slice(m, m, h)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect(),
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Solves `(H + λ·1) δ = rhs` for symmetric `H`; `None` if singular.
fn solve_shifted(h: &[f64], m: usize, lambda: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    match m {
        1 => {
            let d = h[0] + lambda;
            (d != 0.0).then(|| vec![rhs[0] / d])
        }
        2 => {
            let (a, b, c) = (h[0] + lambda, h[1], h[3] + lambda);
            let det = a * c - b * b;
            (det != 0.0).then(|| vec![(c * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - b * rhs[0]) / det])
        }
        _ => {
            let mut mat = DMatrix::from_row_slice(m, m, h);
            for i in 0..m {
                mat[(i, i)] += lambda;
            }
            mat.lu()
                .solve(&nalgebra::DVector::from_column_slice(rhs))
                .map(|v| v.iter().copied().collect())
        }
    }
}

fn within<'a>(points: impl IntoIterator<Item = &'a [f64]>, x: &[f64], radius: f64) -> bool {
    points.into_iter().any(|p| {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 <= radius * radius
    })
}

fn cap_step(step: &mut [f64], limit: f64) {
    let n = norm(step);
    if n > limit {
        step.iter_mut().for_each(|s| *s *= limit / n);
    }
}

/// Newton on `∇Φ` from `x`, steps capped at `h` and backtracked on `|∇Φ|`.
fn newton<F: GradientField + ?Sized>(f: &F, x: Vec<f64>, opts: &CensusOptions) -> Option<Vec<f64>> {
    newton_capped(f, x, opts, opts.h)
}

fn newton_capped<F: GradientField + ?Sized>(
    f: &F,
    mut x: Vec<f64>,
    opts: &CensusOptions,
    cap: f64,
) -> Option<Vec<f64>> {
    let m = x.len();
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m * m];
    let mut trial = vec![0.0; m];
    let mut g_trial = vec![0.0; m];
    let mut h_trial = vec![0.0; m * m];
    f.jet(&x, &mut g, &mut h);
    let mut residual = norm(&g);
    for _ in 0..opts.max_iter {
        if residual <= opts.newton_tol {
            return Some(x);
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut step = solve_shifted(&h, m, 0.0, &rhs)?;
        if step.iter().any(|s| !s.is_finite()) {
            return None;
        }
        cap_step(&mut step, cap);
        let mut t = 1.0;
        for k in 0..BACKTRACK_STEPS {
            for i in 0..m {
                trial[i] = x[i] + t * step[i];
            }
            f.jet(&trial, &mut g_trial, &mut h_trial);
            if norm(&g_trial) < residual {
                break;
            }
            if k + 1 == BACKTRACK_STEPS {
                return None;
            }
            t *= 0.5;
        }
        core::mem::swap(&mut x, &mut trial);
        core::mem::swap(&mut g, &mut g_trial);
        core::mem::swap(&mut h, &mut h_trial);
        residual = norm(&g);
    }
    (residual <= opts.newton_tol).then_some(x)
}

const BACKTRACK_STEPS: usize = 6;

/// Levenberg–Marquardt descent on `|∇Φ|²` from `x`.
fn levenberg_marquardt<F: GradientField + ?Sized>(f: &F, mut x: Vec<f64>, opts: &CensusOptions) -> Option<Vec<f64>> {
    let m = x.len();
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m * m];
    f.jet(&x, &mut g, &mut h);
    let mut lambda = 1e-3 * h.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut cost = norm(&g);
    let mut stalled = 0;
    for _ in 0..opts.max_iter {
        if cost <= opts.newton_tol {
            return Some(x);
        }
        // Gauss–Newton system (HᵀH + λ²) δ = −Hᵀ g with H symmetric.
        let mut hh = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                hh[i * m + j] = (0..m).map(|k| h[i * m + k] * h[k * m + j]).sum();
            }
        }
        let rhs: Vec<f64> = (0..m).map(|i| -(0..m).map(|k| h[i * m + k] * g[k]).sum::<f64>()).collect();
        let mut step = solve_shifted(&hh, m, lambda * lambda, &rhs)?;
        cap_step(&mut step, opts.h);
        let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s).collect();
        let mut g_t = vec![0.0; m];
        let mut h_t = vec![0.0; m * m];
        f.jet(&trial, &mut g_t, &mut h_t);
        let cost_t = norm(&g_t);
        if cost_t < cost {
            stalled = if cost_t > 0.5 * cost { stalled + 1 } else { 0 };
            if stalled >= 5 {
                return None;
            }
            x = trial;
            g = g_t;
            h = h_t;
            cost = cost_t;
            lambda *= 0.1;
        } else {
            lambda *= 10.0;
            if !lambda.is_finite() || lambda > 1e12 {
                return None;
            }
        }
    }
    (cost <= opts.newton_tol).then_some(x)
}

/// Eigenvector-following Newton targeting critical points of Morse index
/// `index`: the step uses `|H|` with the `index` lowest eigendirections
/// reversed, so it ascends along those and descends along the rest. Extrema
/// use a backtracking line search on `±Φ`; saddles a trust radius of `h/2`.
/// Stops with `None` on entering a small ball around a point of `known`.
fn index_flow<F: GradientField + ?Sized>(
    f: &F,
    mut x: Vec<f64>,
    opts: &CensusOptions,
    index: usize,
    known: &[Vec<f64>],
) -> Option<Vec<f64>> {
    let m = x.len();
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m * m];
    let mut g_trial = vec![0.0; m];
    let mut h_trial = vec![0.0; m * m];
    let mut trial = vec![0.0; m];
    let floor = 1e5 * opts.hess_tol;
    let near = 0.05 * opts.h;
    let merit = match index {
        0 => Some(1.0),
        i if i == m => Some(-1.0),
        _ => None,
    };
    let radius = if merit.is_some() { opts.h } else { 0.5 * opts.h };
    let mut value = f.jet(&x, &mut g, &mut h);
    for _ in 0..opts.max_iter {
        if norm(&g) <= opts.newton_tol {
            return Some(x);
        }
        if within(known.iter().map(|k| k.as_slice()), &x, near) {
            return None;
        }
        let eig = DMatrix::from_row_slice(m, m, &h).symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut step = vec![0.0; m];
        for (rank, &k) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let proj: f64 = v.iter().zip(&g).map(|(a, b)| a * b).sum();
            let curvature = libm::fabs(eig.eigenvalues[k]).max(floor);
            let direction = if rank < index { 1.0 } else { -1.0 };
            for i in 0..m {
                step[i] += direction * proj / curvature * v[i];
            }
        }
        cap_step(&mut step, radius);
        let Some(sign) = merit else {
            for i in 0..m {
                x[i] += step[i];
            }
            value = f.jet(&x, &mut g, &mut h);
            continue;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..BACKTRACK_STEPS {
            for i in 0..m {
                trial[i] = x[i] + t * step[i];
            }
            let v = f.jet(&trial, &mut g_trial, &mut h_trial);
            if sign * v < sign * value {
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
        core::mem::swap(&mut x, &mut trial);
        core::mem::swap(&mut g, &mut g_trial);
        core::mem::swap(&mut h, &mut h_trial);
    }
    (norm(&g) <= opts.newton_tol).then_some(x)
}

/// Unit eigenvector of the eigenvalue of smallest modulus.
fn soft_direction(h: &[f64], m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![1.0];
    }
    let eig = DMatrix::from_row_slice(m, m, h).symmetric_eigen();
    let k = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    eig.eigenvectors.column(k).iter().copied().collect()
}

fn grid_axes(region: &Cuboid, h: f64) -> Vec<Vec<f64>> {
    (0..region.dim())
        .map(|i| {
            let lo = region.lo[i] - 2.0 * h;
            let hi = region.hi[i] + 2.0 * h;
            let n = libm::ceil((hi - lo) / h) as usize;
            (0..=n).map(|k| lo + k as f64 * h).collect()
        })
        .collect()
}

/// Iterates over all grid nodes as multi-indices.
fn for_each_node(shape: &[usize], mut visit: impl FnMut(&[usize])) {
    let m = shape.len();
    let mut idx = vec![0usize; m];
    if shape.iter().any(|&s| s == 0) {
        return;
    }
    loop {
        visit(&idx);
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == m {
                return;
            }
        }
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

struct Candidate {
    location: Vec<f64>,
    grad_norm: f64,
}

/// Keeps the smallest-residual representative of every cluster within
/// `radius`; output sorted lexicographically.
fn deduplicate(mut cands: Vec<Candidate>, radius: f64) -> Vec<Candidate> {
    cands.sort_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm).then_with(|| lex(&a.location, &b.location)));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        let dup = kept.iter().any(|k| {
            let d2: f64 = k.location.iter().zip(&c.location).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 <= radius * radius
        });
        if !dup {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| lex(&a.location, &b.location));
    kept
}

/// Locates the critical points of `f` in `region`.
pub fn find_critical_points<F: GradientField + ?Sized>(
    f: &F,
    region: &Cuboid,
    opts: &CensusOptions,
) -> Result<CriticalCensus> {
    let m = f.dim();
    if region.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: region.dim(),
        });
    }
    if !(opts.h > 0.0 && opts.newton_tol > 0.0 && opts.dedup_radius >= 0.0) {
        return Err(Error::InvalidParameter("census spacing and tolerances must be positive"));
    }
    let axes = grid_axes(region, opts.h);
    let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let mut primary = Vec::new();
    let node_point = |idx: &[usize]| -> Vec<f64> { idx.iter().enumerate().map(|(d, &k)| axes[d][k]).collect() };
    for_each_node(&shape, |idx| {
        if let Some(x) = newton(f, node_point(idx), opts) {
            if region.contains_strictly(&x) {
                let mut g = vec![0.0; m];
                f.gradient(&x, &mut g);
                primary.push(Candidate {
                    grad_norm: norm(&g),
                    location: x,
                });
            }
        }
    });
    let mut found = deduplicate(primary, opts.dedup_radius);

    let mut audit_extra = 0;
    if opts.audit {
        let total: usize = shape.iter().product();
        let mut sq = vec![0.0; total];
        let strides: Vec<usize> = (0..m).map(|d| shape[..d].iter().product()).collect();
        let flat = |idx: &[usize]| idx.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>();
        let mut g = vec![0.0; m];
        for_each_node(&shape, |idx| {
            f.gradient(&node_point(idx), &mut g);
            sq[flat(idx)] = g.iter().map(|v| v * v).sum();
        });
        let mut extra = Vec::new();
        let offsets: Vec<Vec<i64>> = {
            let mut out = Vec::new();
            for_each_node(&vec![3; m], |o| {
                if o.iter().any(|&v| v != 1) {
                    out.push(o.iter().map(|&v| v as i64 - 1).collect());
                }
            });
            out
        };
        for_each_node(&shape, |idx| {
            let here = sq[flat(idx)];
            let is_min = offsets.iter().all(|off| {
                let mut nb = vec![0usize; m];
                for d in 0..m {
                    let v = idx[d] as i64 + off[d];
                    if v < 0 || v >= shape[d] as i64 {
                        return true;
                    }
                    nb[d] = v as usize;
                }
                sq[flat(&nb)] >= here
            });
            if !is_min {
                return;
            }
            if let Some(x) = levenberg_marquardt(f, node_point(idx), opts) {
                if !region.contains_strictly(&x) {
                    return;
                }
                let known = within(found.iter().chain(extra.iter()).map(|c| c.location.as_slice()), &x, opts.dedup_radius);
                if !known {
                    let mut g = vec![0.0; m];
                    f.gradient(&x, &mut g);
                    extra.push(Candidate {
                        grad_norm: norm(&g),
                        location: x,
                    });
                }
            }
        });
        let mut by_index: Vec<Vec<Vec<f64>>> = vec![Vec::new(); m + 1];
        let mut hess = vec![0.0; m * m];
        for c in found.iter().chain(extra.iter()) {
            f.jet(&c.location, &mut g, &mut hess);
            by_index[index_and_gap(&symmetric_eigenvalues(&hess, m)).0].push(c.location.clone());
        }
        for slot in 0..=m {
            for_each_node(&shape, |idx| {
                let Some(x) = index_flow(f, node_point(idx), opts, slot, &by_index[slot]) else { return };
                if within(by_index[slot].iter().map(|v| v.as_slice()), &x, opts.dedup_radius) {
                    return;
                }
                by_index[slot].push(x.clone());
                if region.contains_strictly(&x)
                    && !within(found.iter().chain(extra.iter()).map(|c| c.location.as_slice()), &x, opts.dedup_radius)
                {
                    let mut gx = vec![0.0; m];
                    f.gradient(&x, &mut gx);
                    extra.push(Candidate {
                        grad_norm: norm(&gx),
                        location: x,
                    });
                }
            });
        }
        // Seed from both sides of every known point along its soft Hessian direction.
        let mut queue: Vec<Vec<f64>> = found.iter().chain(extra.iter()).map(|c| c.location.clone()).collect();
        while let Some(p) = queue.pop() {
            f.jet(&p, &mut g, &mut hess);
            let soft = soft_direction(&hess, m);
            for s in [opts.h / 8.0, opts.h / 4.0, opts.h / 2.0] {
                for sign in [-1.0, 1.0] {
                    let seed: Vec<f64> = p.iter().zip(&soft).map(|(a, v)| a + sign * s * v).collect();
                    let Some(x) = newton_capped(f, seed, opts, s) else { continue };
                    if !region.contains_strictly(&x) {
                        continue;
                    }
                    let known =
                        within(found.iter().chain(extra.iter()).map(|c| c.location.as_slice()), &x, opts.dedup_radius);
                    if !known {
                        let mut gx = vec![0.0; m];
                        f.gradient(&x, &mut gx);
                        queue.push(x.clone());
                        extra.push(Candidate {
                            grad_norm: norm(&gx),
                            location: x,
                        });
                    }
                }
            }
        }
        audit_extra = extra.len();
        if audit_extra > 0 {
            found.extend(extra);
            found = deduplicate(found, opts.dedup_radius);
        }
    }

    let mut points = Vec::with_capacity(found.len());
    let mut degenerate = Vec::new();
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m * m];
    for c in found {
        let value = f.jet(&c.location, &mut g, &mut h);
        let (morse, gap) = index_and_gap(&symmetric_eigenvalues(&h, m));
        if gap <= opts.hess_tol {
            degenerate.push(DegeneratePoint {
                location: c.location,
                grad_norm: c.grad_norm,
                min_abs_hess_eig: gap,
            });
        } else {
            points.push(CriticalPoint {
                location: c.location,
                value,
                grad_norm: c.grad_norm,
                morse_index: morse,
                min_abs_hess_eig: gap,
            });
        }
    }
    Ok(CriticalCensus {
        region: region.clone(),
        points,
        degenerate,
        options: *opts,
        audit_extra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunctionKind {
    BoxIndicator,
    /// `∏ (1 − u_i²)³` with `u_i` the affine map of the support onto `[-1, 1]`.
    TensorBump,
}

/// A test function `f` with compact support, evaluated as `f_R(x) = f(x/R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub kind: TestFunctionKind,
    pub support: Cuboid,
    pub scale: f64,
    /// Constant multiplier.
    pub weight: f64,
}

/// `∫_{-1}^{1} (1 − u²)^n du = √π Γ(n+1) / Γ(n + 3/2)`.
fn bump_power_integral(n: u32) -> f64 {
    libm::sqrt(core::f64::consts::PI) * libm::tgamma(n as f64 + 1.0) / libm::tgamma(n as f64 + 1.5)
}

impl TestFunction {
    pub fn new(kind: TestFunctionKind, support: Cuboid, scale: f64) -> Result<Self> {
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter("test function scale must be at least 1"));
        }
        Ok(TestFunction {
            kind,
            support,
            scale,
            weight: 1.0,
        })
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        let mut t = TestFunction::new(self.kind, self.support.clone(), scale)?;
        t.weight = self.weight;
        Ok(t)
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Support of `f_R`.
    pub fn scaled_support(&self) -> Cuboid {
        self.support.scaled(self.scale)
    }

    /// `f(y)` for the unscaled function.
    pub fn eval_unscaled(&self, y: &[f64]) -> f64 {
        if !self.support.contains_closed(y) {
            return 0.0;
        }
        let v = match self.kind {
            TestFunctionKind::BoxIndicator => 1.0,
            TestFunctionKind::TensorBump => y
                .iter()
                .zip(self.support.lo.iter().zip(&self.support.hi))
                .map(|(v, (a, b))| {
                    let u = 2.0 * (v - a) / (b - a) - 1.0;
                    let w = 1.0 - u * u;
                    w * w * w
                })
                .product(),
        };
        self.weight * v
    }

    /// `f_R(x) = f(x / R)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v / self.scale).collect();
        self.eval_unscaled(&y)
    }

    /// `∫ f` of the unscaled function.
    pub fn integral(&self) -> f64 {
        self.power_integral(1)
    }

    /// `∫ f²` of the unscaled function.
    pub fn integral_sq(&self) -> f64 {
        self.power_integral(2)
    }

    fn power_integral(&self, p: u32) -> f64 {
        let per_axis = match self.kind {
            TestFunctionKind::BoxIndicator => 1.0,
            TestFunctionKind::TensorBump => 0.5 * bump_power_integral(3 * p),
        };
        let sides: f64 = self
            .support
            .lo
            .iter()
            .zip(&self.support.hi)
            .map(|(a, b)| (b - a) * per_axis)
            .product();
        libm::pow(self.weight, p as f64) * sides
    }
}

/// `𝔠[f_R] = Σ_p f(p / R)`.
pub fn weigh(census: &CriticalCensus, f: &TestFunction) -> Result<f64> {
    if !census.region.covers(&f.scaled_support()) {
        return Err(Error::SupportNotCovered);
    }
    Ok(census.integrate(|x| f.eval(x)))
}

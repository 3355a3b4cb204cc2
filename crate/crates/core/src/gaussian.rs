//! Centered Gaussian vectors: regression, densities, square roots and sampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::{monte_carlo, BlockRunner};
use crate::rng::{SeedKey, Stream};
use crate::stats::Estimate;

/// Default relative threshold for [`is_nondegenerate`].
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// A centered Gaussian vector described by its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredGaussian {
    cov: DMatrix<f64>,
}

impl CenteredGaussian {
    /// Validates symmetry (relative `1e-12`) and numerical positive
    /// semidefiniteness (eigenvalues `≥ -1e-10·trace`).
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::DimensionMismatch {
                expected: cov.nrows(),
                got: cov.ncols(),
            });
        }
        let asym = asymmetry(&cov);
        if asym > SYMMETRY_TOL * cov.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let cov = symmetrize(cov);
        if cov.nrows() > 0 {
            let min = cov.clone().symmetric_eigenvalues().min();
            if min < -PSD_TOL * cov.trace().abs() {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
            }
        }
        Ok(CenteredGaussian { cov })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// Largest `|A_ij - A_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

/// `Var[Y | X = 0]` of jointly Gaussian centered `(Y, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub cov_conditioned: DMatrix<f64>,
    /// `Cov[Y, X] Var[X]^{-1}`, the coefficient of `E[Y | X] = B X`.
    pub coefficient: DMatrix<f64>,
}

/// Regression formula `Var Y − Cov(Y,X) Var(X)^{-1} Cov(X,Y)`, solved through
/// the symmetric eigendecomposition of `Var X`.
pub fn condition(
    var_y: &DMatrix<f64>,
    var_x: &DMatrix<f64>,
    cov_yx: &DMatrix<f64>,
) -> Result<RegressionResult> {
    if cov_yx.nrows() != var_y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: var_y.nrows(),
            got: cov_yx.nrows(),
        });
    }
    if cov_yx.ncols() != var_x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: var_x.nrows(),
            got: cov_yx.ncols(),
        });
    }
    let eig = SymmetricEigen::new(symmetrize(var_x.clone()));
    check_nondegenerate(&eig.eigenvalues, DEFAULT_REL_TOL)?;
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
    let var_x_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    let coefficient = cov_yx * var_x_inv;
    let explained = &coefficient * cov_yx.transpose();
    let cov_conditioned = symmetrize(var_y - explained);
    Ok(RegressionResult {
        cov_conditioned,
        coefficient,
    })
}

fn check_nondegenerate(eigenvalues: &DVector<f64>, rel_tol: f64) -> Result<()> {
    let n = eigenvalues.len();
    if n == 0 {
        return Ok(());
    }
    let min = eigenvalues.min();
    let threshold = rel_tol * eigenvalues.sum() / n as f64;
    if min > threshold {
        Ok(())
    } else {
        Err(Error::Degenerate {
            min_eigenvalue: min,
            threshold,
        })
    }
}

/// `min eigenvalue > rel_tol · trace / dim`.
pub fn is_nondegenerate(g: &CenteredGaussian, rel_tol: f64) -> bool {
    let vals = g.cov.clone().symmetric_eigenvalues();
    check_nondegenerate(&vals, rel_tol).is_ok()
}

/// Density of `g` at the origin, `(2π)^{-n/2} det(cov)^{-1/2}`.
pub fn density_at_zero(g: &CenteredGaussian) -> Result<f64> {
    let vals = g.cov.clone().symmetric_eigenvalues();
    check_nondegenerate(&vals, DEFAULT_REL_TOL)?;
    let n = g.dim() as f64;
    let log_det: f64 = vals.iter().map(|l| libm::log(*l)).sum();
    Ok(libm::exp(-0.5 * n * libm::log(2.0 * PI) - 0.5 * log_det))
}

/// Principal square root of a PSD matrix, negative eigenvalues clipped to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtFactor {
    dim: usize,
    /// Row-major `n×n`.
    root: Vec<f64>,
    /// Most negative eigenvalue that was clipped (0 if none).
    pub clipped: f64,
}

impl SqrtFactor {
    pub fn new(cov: &DMatrix<f64>) -> Self {
        let n = cov.nrows();
        let eig = SymmetricEigen::new(symmetrize(cov.clone()));
        let clipped = eig.eigenvalues.iter().fold(0.0f64, |c, &l| c.min(l));
        let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
        let r = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        let mut root = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                root[i * n + j] = 0.5 * (r[(i, j)] + r[(j, i)]);
            }
        }
        SqrtFactor {
            dim: n,
            root,
            clipped,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.root)
    }

    /// `out = root · z`.
    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.root[i * n..(i + 1) * n];
            *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }
}

/// Fills `z` with independent standard normals.
#[inline]
pub fn fill_normal(rng: &mut Stream, z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// `n` draws of `g`, as `root · z` with the principal square root.
pub fn sample(g: &CenteredGaussian, rng: &mut Stream, n: usize) -> Vec<DVector<f64>> {
    let f = SqrtFactor::new(&g.cov);
    let d = g.dim();
    let mut z = vec![0.0; d];
    (0..n)
        .map(|_| {
            fill_normal(rng, &mut z);
            let mut x = DVector::zeros(d);
            f.apply(&z, x.as_mut_slice());
            x
        })
        .collect()
}

/// Monte Carlo estimate of `∫ f dΓ_A`.
pub fn gaussian_expectation<R, F>(
    runner: &R,
    f: F,
    a: &DMatrix<f64>,
    n: usize,
    key: SeedKey,
) -> Result<Estimate>
where
    R: BlockRunner,
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let g = CenteredGaussian::new(a.clone())?;
    let factor = SqrtFactor::new(g.cov());
    let d = g.dim();
    let acc = monte_carlo(runner, key, n, 1, |rng, len, acc| {
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        for _ in 0..len {
            fill_normal(rng, &mut z);
            factor.apply(&z, &mut x);
            acc[0].push(f(&x));
        }
    });
    Ok(acc[0].estimate())
}

/// Estimates of `∫ f dΓ_{A_i} − ∫ f dΓ_{A_0}` for each `A_i` in `others`,
/// pushing the same normal draws through every square root.
pub fn gaussian_expectation_differences<R, F>(
    runner: &R,
    f: F,
    base: &DMatrix<f64>,
    others: &[DMatrix<f64>],
    n: usize,
    key: SeedKey,
) -> Result<Vec<Estimate>>
where
    R: BlockRunner,
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let base_factor = SqrtFactor::new(CenteredGaussian::new(base.clone())?.cov());
    let factors = others
        .iter()
        .map(|a| Ok(SqrtFactor::new(CenteredGaussian::new(a.clone())?.cov())))
        .collect::<Result<Vec<_>>>()?;
    let d = base.nrows();
    for f in &factors {
        if f.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: f.dim(),
            });
        }
    }
    let acc = monte_carlo(runner, key, n, factors.len(), |rng, len, acc| {
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        for _ in 0..len {
            fill_normal(rng, &mut z);
            base_factor.apply(&z, &mut x);
            let f0 = f(&x);
            for (fac, a) in factors.iter().zip(acc.iter_mut()) {
                fac.apply(&z, &mut x);
                a.push(f(&x) - f0);
            }
        }
    });
    Ok(acc.iter().map(|m| m.estimate()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use proptest::prelude::*;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    #[test]
    fn condition_examples() {
        let vy = m(2, &[2.0, 0.3, 0.3, 1.0]);
        let vx = m(1, &[4.0]);
        let r = condition(&vy, &vx, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(r.cov_conditioned, vy);

        let v = m(2, &[2.0, 0.5, 0.5, 1.0]);
        let r = condition(&v, &v, &v).unwrap();
        assert!(r.cov_conditioned.amax() < 1e-14);

        let r = condition(&m(1, &[1.0]), &m(1, &[1.0]), &m(1, &[0.5])).unwrap();
        assert!((r.cov_conditioned[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn condition_rejects_degenerate() {
        let vx = m(2, &[1.0, 1.0, 1.0, 1.0]);
        let err = condition(&m(1, &[1.0]), &vx, &m(1, &[0.1, 0.1])).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn density_examples() {
        let g = CenteredGaussian::new(m(1, &[1.0])).unwrap();
        assert!((density_at_zero(&g).unwrap() - 0.3989422804014327).abs() < 1e-15);
        let g = CenteredGaussian::new(m(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert!((density_at_zero(&g).unwrap() - 1.0 / (12.0 * PI)).abs() < 1e-15);
        let d = 0.7;
        let g = CenteredGaussian::new(DMatrix::identity(3, 3) * d).unwrap();
        let want = libm::pow(2.0 * PI * d, -1.5);
        assert!((density_at_zero(&g).unwrap() / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn nondegeneracy_examples() {
        let id = CenteredGaussian::new(DMatrix::identity(3, 3)).unwrap();
        assert!(is_nondegenerate(&id, DEFAULT_REL_TOL));
        let v = DVector::from_vec(vec![1.0, 2.0]);
        let rank1 = CenteredGaussian::new(&v * v.transpose()).unwrap();
        assert!(!is_nondegenerate(&rank1, DEFAULT_REL_TOL));
    }

    #[test]
    fn validation() {
        assert!(matches!(
            CenteredGaussian::new(m(2, &[1.0, 0.5, 0.4, 1.0])),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            CenteredGaussian::new(m(2, &[1.0, 2.0, 2.0, 1.0])),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn sampling_examples() {
        let zero = CenteredGaussian::new(DMatrix::zeros(3, 3)).unwrap();
        let mut rng = SeedKey::new(1).rng();
        assert!(sample(&zero, &mut rng, 10).iter().all(|x| x.amax() == 0.0));

        let id = CenteredGaussian::new(DMatrix::identity(3, 3)).unwrap();
        let n = 100_000;
        let xs = sample(&id, &mut SeedKey::new(2).rng(), n);
        let mut emp = DMatrix::<f64>::zeros(3, 3);
        for x in &xs {
            emp += x * x.transpose();
        }
        emp /= n as f64;
        let se = libm::sqrt(2.0 / n as f64);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((emp[(i, j)] - want).abs() < 5.0 * se);
            }
        }

        let a = sample(&id, &mut SeedKey::new(3).rng(), 5);
        let b = sample(&id, &mut SeedKey::new(3).rng(), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn expectation_examples() {
        let est = gaussian_expectation(&Sequential, |x| x[0].abs(), &m(1, &[1.0]), 200_000, SeedKey::new(4)).unwrap();
        let want = libm::sqrt(2.0 / PI);
        assert!(est.within(want, 3.0));
        let c = 2.5;
        let est2 = gaussian_expectation(&Sequential, |x| x[0].abs(), &m(1, &[c * c]), 200_000, SeedKey::new(4)).unwrap();
        assert!((est2.value - c * est.value).abs() < 1e-12 * c);
    }

    #[test]
    fn density_normalization_identity() {
        let a = m(3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.9]);
        let g = CenteredGaussian::new(a.clone()).unwrap();
        let det = a.determinant();
        let prod = density_at_zero(&g).unwrap() * libm::pow(2.0 * PI, 1.5) * libm::sqrt(det);
        assert!((prod - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_factor_squares_back() {
        let a = m(3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.9]);
        let r = SqrtFactor::new(&a).matrix();
        assert!((&r * &r - &a).amax() < 1e-13);
        let clipped = SqrtFactor::new(&m(2, &[1.0, 0.0, 0.0, -1e-14]));
        assert!(clipped.clipped < 0.0);
    }

    fn gram(n: usize, k: usize, data: &[f64]) -> DMatrix<f64> {
        let b = DMatrix::from_row_slice(n, k, &data[..n * k]);
        &b * b.transpose()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn conditioned_covariance_is_psd_and_dominated(
            ny in 1usize..4, nx in 1usize..4, extra in 0usize..3,
            data in proptest::collection::vec(-1.0f64..1.0, 64)
        ) {
            let n = ny + nx;
            let k = n + extra;
            let full = gram(n, k, &data);
            let vy = full.view((0, 0), (ny, ny)).into_owned();
            let vx = full.view((ny, ny), (nx, nx)).into_owned();
            let cyx = full.view((0, ny), (ny, nx)).into_owned();
            let gx = CenteredGaussian::new(vx.clone()).unwrap();
            prop_assume!(is_nondegenerate(&gx, 1e-6));
            let r = condition(&vy, &vx, &cyx).unwrap();
            let scale = full.trace();
            let tol = 1e-9 * scale;
            prop_assert!(r.cov_conditioned.clone().symmetric_eigenvalues().min() >= -tol);
            prop_assert!((vy - &r.cov_conditioned).symmetric_eigenvalues().min() >= -tol);
        }
    }
}

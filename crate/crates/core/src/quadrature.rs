//! Globally adaptive 10/21-point Gauss–Kronrod quadrature for
//! vector-valued integrands on finite intervals.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_584,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    pub initial_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 4000,
            initial_intervals: 1,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    score: f64,
}

fn gk21<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    dim: usize,
    scratch: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f(center, scratch);
    for k in 0..dim {
        kronrod[k] = WGK[10] * scratch[k];
    }
    for (j, &x) in XGK[..10].iter().enumerate() {
        let dx = half * x;
        for &p in &[center - dx, center + dx] {
            f(p, scratch);
            for k in 0..dim {
                kronrod[k] += WGK[j] * scratch[k];
                if j % 2 == 1 {
                    gauss[k] += WG[j / 2] * scratch[k];
                }
            }
        }
    }
    let err = (0..dim)
        .map(|k| libm::fabs((kronrod[k] - gauss[k]) * half))
        .collect();
    for v in kronrod.iter_mut() {
        *v *= half;
    }
    (kronrod, err)
}

/// Integrates the `dim`-component integrand `f` over `[a, b]`.
///
/// `f(x, out)` writes the integrand components at `x` into `out`. Every
/// component must satisfy `err_k <= max(abs_tol, rel_tol * |I_k|)`;
/// `scale` (optional) supplies per-component reference magnitudes used in
/// place of `|I_k|` for the relative test.
pub fn integrate<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    opts: &QuadOptions,
    scale: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut scratch = vec![0.0; dim];
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let tol = |value: &[f64], k: usize| -> f64 {
        let reference = match scale {
            Some(s) => libm::fmax(s[k], libm::fabs(value[k])),
            None => libm::fabs(value[k]),
        };
        libm::fmax(opts.abs_tol, opts.rel_tol * reference)
    };

    let n0 = opts.initial_intervals.max(1);
    let width = (b - a) / n0 as f64;
    let mut segments: Vec<Segment> = Vec::with_capacity(n0 * 4);
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        let (value, error) = gk21(&mut f, lo, hi, dim, &mut scratch);
        segments.push(Segment {
            a: lo,
            b: hi,
            value,
            error,
            score: 0.0,
        });
    }

    let mut previous_total = f64::NAN;
    loop {
        let mut total = vec![0.0; dim];
        let mut total_err = vec![0.0; dim];
        for s in &segments {
            for k in 0..dim {
                total[k] += s.value[k];
                total_err[k] += s.error[k];
            }
        }
        let converged = (0..dim).all(|k| total_err[k] <= tol(&total, k));
        if converged {
            return Ok(total);
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailed {
                intervals: segments.len(),
                previous: previous_total,
                last: total[0],
            });
        }
        previous_total = total[0];

        // Bisect the segment contributing the largest normalized error.
        for s in segments.iter_mut() {
            s.score = (0..dim)
                .map(|k| s.error[k] / libm::fmax(tol(&total, k), f64::MIN_POSITIVE))
                .fold(0.0, libm::fmax);
        }
        let worst = segments
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, s)| {
                if s.score > best.1 {
                    (i, s.score)
                } else {
                    best
                }
            })
            .0;
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            return Err(Error::QuadratureFailed {
                intervals: segments.len() + 1,
                previous: previous_total,
                last: total[0],
            });
        }
        for (lo, hi) in [(seg.a, mid), (mid, seg.b)] {
            let (value, error) = gk21(&mut f, lo, hi, dim, &mut scratch);
            segments.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
                score: 0.0,
            });
        }
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    integrate(|x, out| out[0] = f(x), a, b, 1, opts, None).map(|v| v[0])
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * x * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if libm::fabs(dx) < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate_scalar(|x| x * x * x * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((v - 32.0 / 5.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_gaussian() {
        // ∫ cos(5x) e^{-x²/2} dx over R = √(2π) e^{-12.5}
        let v = integrate_scalar(
            |x| libm::cos(5.0 * x) * libm::exp(-0.5 * x * x),
            -14.0,
            14.0,
            &QuadOptions {
                abs_tol: 1e-15,
                ..QuadOptions::default()
            },
        )
        .unwrap();
        let exact = libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(-12.5);
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn vector_components_share_subdivision() {
        let v = integrate(
            |x, out| {
                out[0] = libm::sin(x);
                out[1] = libm::exp(x);
            },
            0.0,
            1.0,
            2,
            &QuadOptions::default(),
            None,
        )
        .unwrap();
        assert!((v[0] - (1.0 - libm::cos(1.0))).abs() < 1e-14);
        assert!((v[1] - (core::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn reports_last_two_estimates_on_failure() {
        let err = integrate_scalar(
            |x| 1.0 / libm::sqrt(libm::fabs(x - 0.3)),
            0.0,
            1.0,
            &QuadOptions {
                rel_tol: 1e-15,
                max_intervals: 20,
                ..QuadOptions::default()
            },
        )
        .unwrap_err();
        match err {
            Error::QuadratureFailed { intervals, previous, last } => {
                assert!(intervals >= 20);
                assert!(previous.is_finite() && last.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}

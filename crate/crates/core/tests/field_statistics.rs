//! Second-order statistics of random-wave realizations, estimated across
//! independent realizations and compared with closed-form Gaussian kernels.

use std::f64::consts::PI;

use isocrit_core::field::{evaluate_jet, FieldSampler};
use isocrit_core::rng::SeedKey;
use isocrit_core::spectral::kernel_derivatives;
use isocrit_core::Amplitude;

const REPS: u64 = 4000;
const WAVES: usize = 64;

/// Sample covariance and its standard error.
fn cov(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let c = prods.iter().sum::<f64>() / (n - 1.0);
    let v = prods.iter().map(|p| (p - c) * (p - c)).sum::<f64>() / (n - 1.0);
    (c, (v / n).sqrt())
}

fn assert_close(label: &str, (est, se): (f64, f64), exact: f64) {
    assert!(
        (est - exact).abs() <= 4.0 * se + 1e-12,
        "{label}: estimate {est} ± {se}, expected {exact}"
    );
}

#[test]
fn covariance_matches_gaussian_kernel_along_an_axis() {
    let a = Amplitude::Gaussian;
    let sampler = FieldSampler::new(&a, 2, WAVES).unwrap();
    let lags = [0.5, 1.0, 2.0];
    let mut at_origin = Vec::new();
    let mut at_lag = vec![Vec::new(); lags.len()];
    for rep in 0..REPS {
        let f = sampler.sample(&mut SeedKey::new(101).child(rep).rng());
        at_origin.push(f.value(&[0.0, 0.0]));
        for (k, &t) in lags.iter().enumerate() {
            at_lag[k].push(f.value(&[t, 0.0]));
        }
    }
    for (k, &t) in lags.iter().enumerate() {
        let closed = (-0.5 * t * t).exp() / (2.0 * PI);
        let table = kernel_derivatives(&a, 2, t).unwrap().get(&[0, 0]);
        assert!((table - closed).abs() < 1e-10 * closed.max(1e-3));
        assert_close(&format!("K({t} e1)"), cov(&at_origin, &at_lag[k]), closed);
    }
}

#[test]
fn gradient_and_hessian_follow_the_isotropic_pattern() {
    let a = Amplitude::Gaussian;
    let sampler = FieldSampler::new(&a, 2, WAVES).unwrap();
    let (d, h) = (sampler.moments.d, sampler.moments.h);
    let x = [0.3, -1.7];
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    let mut h11 = Vec::new();
    let mut h12 = Vec::new();
    let mut h22 = Vec::new();
    for rep in 0..REPS {
        let f = sampler.sample(&mut SeedKey::new(202).child(rep).rng());
        let jet = evaluate_jet(&f, &x);
        g1.push(jet.gradient[0]);
        g2.push(jet.gradient[1]);
        h11.push(jet.hessian[(0, 0)]);
        h12.push(jet.hessian[(0, 1)]);
        h22.push(jet.hessian[(1, 1)]);
    }
    assert_close("Var g1", cov(&g1, &g1), d);
    assert_close("Cov g1 g2", cov(&g1, &g2), 0.0);
    assert_close("Var H11", cov(&h11, &h11), 3.0 * h);
    assert_close("Var H22", cov(&h22, &h22), 3.0 * h);
    assert_close("Var H12", cov(&h12, &h12), h);
    assert_close("Cov H11 H22", cov(&h11, &h22), h);
    assert_close("Cov H11 H12", cov(&h11, &h12), 0.0);
    for (name, g) in [("g1", &g1), ("g2", &g2)] {
        for (hn, hv) in [("H11", &h11), ("H12", &h12), ("H22", &h22)] {
            assert_close(&format!("Cov {name} {hn}"), cov(g, hv), 0.0);
        }
    }
}

#[test]
fn value_and_hessian_are_anticorrelated_by_d() {
    let sampler = FieldSampler::new(&Amplitude::poly_gaussian(0.5).unwrap(), 1, WAVES).unwrap();
    let d = sampler.moments.d;
    let mut v = Vec::new();
    let mut h = Vec::new();
    for rep in 0..REPS {
        let f = sampler.sample(&mut SeedKey::new(303).child(rep).rng());
        let jet = evaluate_jet(&f, &[2.5]);
        v.push(jet.value);
        h.push(jet.hessian[(0, 0)]);
    }
    assert_close("Cov Φ Φ''", cov(&v, &h), -d);
}

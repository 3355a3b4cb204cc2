use isocrit_core::census::{find_critical_points, CensusOptions, Cuboid};
use isocrit_core::exec::Sequential;
use isocrit_core::field::FieldSampler;
use isocrit_core::kac_rice::one_point_constant;
use isocrit_core::rng::SeedKey;
use isocrit_core::stats::Moments;
use isocrit_core::Amplitude;
use proptest::prelude::*;

fn setup(m: usize) -> (FieldSampler, CensusOptions, f64) {
    let a = Amplitude::Gaussian;
    let c = one_point_constant(&Sequential, &a, m, 1 << 18, SeedKey::new(7)).unwrap().c_m.value;
    let sampler = FieldSampler::new(&a, m, 1024).unwrap();
    let opts = CensusOptions::for_moments(&sampler.moments, c);
    (sampler, opts, c)
}

fn mean_density(m: usize, side: f64, reps: u64) -> (Moments, f64) {
    let (sampler, opts, c) = setup(m);
    let region = Cuboid::cube(m, side).unwrap();
    let mut acc = Moments::new();
    for rep in 0..reps {
        let f = sampler.sample(&mut SeedKey::new(55).child(rep).rng());
        let census = find_critical_points(&f, &region, &opts).unwrap();
        acc.push(census.count() as f64 / region.volume());
    }
    (acc, c)
}

#[test]
fn mean_count_matches_density_on_the_line() {
    let (acc, c) = mean_density(1, 10.0, 400);
    assert!((acc.mean - c).abs() <= 3.0 * acc.stderr(), "{} ± {} vs {c}", acc.mean, acc.stderr());
}

#[test]
fn mean_count_matches_density_in_the_plane() {
    let (acc, c) = mean_density(2, 5.0, 120);
    assert!((acc.mean - c).abs() <= 3.0 * acc.stderr(), "{} ± {} vs {c}", acc.mean, acc.stderr());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn census_output_contract(seed in 0u64..1_000_000, m in 1usize..=2) {
        let sampler = FieldSampler::new(&Amplitude::Gaussian, m, 512).unwrap();
        let c = if m == 1 { 0.5513 } else { 0.3657 };
        let opts = CensusOptions::for_moments(&sampler.moments, c);
        let region = Cuboid::new(vec![-1.5; m], vec![2.0; m]).unwrap();
        let f = sampler.sample(&mut SeedKey::new(seed).rng());
        let census = find_critical_points(&f, &region, &opts).unwrap();
        for p in &census.points {
            prop_assert!(p.grad_norm <= opts.newton_tol);
            prop_assert!(region.contains_strictly(&p.location));
            prop_assert!(p.min_abs_hess_eig > opts.hess_tol);
            prop_assert!(p.morse_index <= m);
        }
        for (i, p) in census.points.iter().enumerate() {
            for q in &census.points[i + 1..] {
                let d: f64 = p.location.iter().zip(&q.location).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                prop_assert!(d > opts.dedup_radius);
            }
        }
        let sorted = census.points.windows(2).all(|w| w[0].location <= w[1].location);
        prop_assert!(sorted);
        let again = find_critical_points(&f, &region, &opts).unwrap();
        prop_assert_eq!(census, again);
    }
}

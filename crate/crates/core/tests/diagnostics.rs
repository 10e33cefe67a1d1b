use griddy_core::diagnostics::{
    autocorrelation_series, cdf_distance, cdf_distance_2d, ecdf_distance, least_squares_slope, Ecdf, Ecdf2d,
};
use griddy_core::Norm;
use proptest::collection::vec;
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniforms(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
        .collect()
}

/// Kolmogorov distribution tail `P(K > λ)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    (1..=100)
        .map(|k| {
            let k = f64::from(k);
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum()
}

#[test]
fn ks_statistic_matches_brute_force() {
    let xs = uniforms(3, 200);
    let e = Ecdf::new(&xs).unwrap();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let brute = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let d = cdf_distance(&e, |t| t.clamp(0.0, 1.0), Norm::Inf, 100, (0.0, 1.0)).unwrap();
    assert!((d - brute).abs() < 1e-12, "{d} vs {brute}");
}

#[test]
fn ks_p_values_are_not_extreme_for_iid_uniforms() {
    // 40 iid samples of size 2000: the Kolmogorov tail at √n·D should rarely fall below 0.01
    let mut small = 0;
    for seed in 0..40 {
        let e = Ecdf::new(&uniforms(seed, 2000)).unwrap();
        let d = cdf_distance(&e, |t| t.clamp(0.0, 1.0), Norm::Inf, 100, (0.0, 1.0)).unwrap();
        if kolmogorov_tail(d * 2000f64.sqrt()) < 0.01 {
            small += 1;
        }
    }
    assert!(small <= 3, "{small} p-values below 0.01");
}

#[test]
fn joint_ecdf_of_independent_uniforms() {
    let (xs, ys) = (uniforms(5, 4000), uniforms(6, 4000));
    let e = Ecdf2d::new(&xs, &ys).unwrap();
    let d = cdf_distance_2d(
        &e,
        |a, b| a.clamp(0.0, 1.0) * b.clamp(0.0, 1.0),
        Norm::Inf,
        64,
        [(0.0, 1.0); 2],
    )
    .unwrap();
    assert!(d < 0.04, "{d}");
    let direct = xs.iter().zip(&ys).filter(|(x, y)| **x <= 0.3 && **y <= 0.6).count() as f64 / 4000.0;
    assert_eq!(e.eval(0.3, 0.6), direct);
}

#[test]
fn acf_of_ar1_matches_theory() {
    // x_t = φ x_{t-1} + ε_t has ρ(l) = φ^l and IAT (1+φ)/(1−φ)
    let phi = 0.6;
    let eps = uniforms(9, 200_000);
    let mut x = 0.0;
    let series: Vec<f64> = eps
        .iter()
        .map(|e| {
            x = phi * x + (e - 0.5);
            x
        })
        .collect();
    let acf = autocorrelation_series(&series, 60).unwrap();
    for l in 1..5 {
        assert!((acf.coefficients[l] - phi.powi(l as i32)).abs() < 0.01, "lag {l}");
    }
    let iat = (1.0 + phi) / (1.0 - phi);
    assert!((acf.iat - iat).abs() < 0.1 * iat, "{} vs {iat}", acf.iat);
}

#[test]
fn slope_of_exact_power_law() {
    let xs = [1.0f64, 2.0, 4.0, 8.0];
    let ys: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    assert!((least_squares_slope(&ys, &ys.iter().map(|l| -2.0 * l + 1.0).collect::<Vec<_>>()) + 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ecdf_distance_is_a_pseudometric(
        a in vec(-1.0f64..1.0, 1..40),
        b in vec(-1.0f64..1.0, 1..40),
        c in vec(-1.0f64..1.0, 1..40),
    ) {
        let (ea, eb, ec) = (Ecdf::new(&a).unwrap(), Ecdf::new(&b).unwrap(), Ecdf::new(&c).unwrap());
        for p in [Norm::Inf, Norm::L2] {
            let d = |x: &Ecdf, y: &Ecdf| ecdf_distance(x, y, p, 200, (-1.0, 1.0)).unwrap();
            prop_assert!(d(&ea, &ea).abs() < 1e-15);
            prop_assert!((d(&ea, &eb) - d(&eb, &ea)).abs() < 1e-12);
            prop_assert!(d(&ea, &ec) <= d(&ea, &eb) + d(&eb, &ec) + 1e-12);
            prop_assert!(d(&ea, &eb) >= 0.0);
        }
        let sup = ecdf_distance(&ea, &eb, Norm::Inf, 200, (-1.0, 1.0)).unwrap();
        prop_assert!(sup <= 1.0);
    }

    #[test]
    fn ecdf_is_a_monotone_step_function(xs in vec(-5.0f64..5.0, 1..60), t in -6.0f64..6.0, s in -6.0f64..6.0) {
        let e = Ecdf::new(&xs).unwrap();
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        prop_assert!(e.eval(lo) <= e.eval(hi));
        prop_assert!(e.eval_left(t) <= e.eval(t));
        prop_assert_eq!(e.eval(6.0), 1.0);
        prop_assert_eq!(e.eval(-6.0), 0.0);
    }

    #[test]
    fn acf_starts_at_one_and_iat_at_least_one(xs in vec(-1.0f64..1.0, 60..200)) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-6));
        let acf = autocorrelation_series(&xs, 5).unwrap();
        prop_assert!((acf.coefficients[0] - 1.0).abs() < 1e-12);
        prop_assert!(acf.coefficients.iter().all(|r| r.abs() <= 1.0 + 1e-12));
        prop_assert!(acf.iat >= 1.0);
    }
}

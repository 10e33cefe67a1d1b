use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use proptest::prelude::*;

use super::*;
use crate::target::{beta_mixture_2d, FnTarget, PiecewiseMultilinear, TruncationSpec};

fn unit_states(m: usize) -> StateGrid {
    StateGrid::uniform(BoxDomain::cube(1, 0.0, m as f64).unwrap(), m).unwrap()
}

fn beta_states(m: usize) -> StateGrid {
    StateGrid::uniform(beta_mixture_2d().domain().clone(), m).unwrap()
}

fn knots(n: usize) -> Vec<Grid1D> {
    vec![Grid1D::uniform(-1.0, 1.0, n).unwrap(); 2]
}

fn beta_griddy(m: usize, n: usize) -> KernelMatrix {
    discretize_griddy_kernel(
        &beta_mixture_2d(),
        &beta_states(m),
        &knots(n),
        InterpScheme::PiecewiseLinear,
        ClampSpec::default(),
    )
    .unwrap()
}

#[test]
fn state_cap() {
    let d = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    assert!(StateGrid::new(d.clone(), vec![100, 200]).is_ok());
    assert_eq!(
        StateGrid::new(d, vec![100, 201]).unwrap_err(),
        KernelError::TooManyStates(20_100)
    );
}

#[test]
fn state_indexing_round_trips() {
    let s = StateGrid::new(
        BoxDomain::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap(),
        vec![2, 3, 4],
    )
    .unwrap();
    assert_eq!(s.n_states(), 24);
    assert!((s.cell_volume() - 0.25).abs() < 1e-15);
    // last axis fastest
    assert_eq!((s.coord(5, 0), s.coord(5, 1), s.coord(5, 2)), (0, 1, 1));
    for axis in 0..3 {
        for state in 0..24 {
            let ctx = s.context(state, axis);
            let rep = s.context_state(ctx, axis);
            assert_eq!(s.coord(rep, axis), 0);
            for k in (0..3).filter(|&k| k != axis) {
                assert_eq!(s.coord(rep, k), s.coord(state, k));
            }
        }
    }
}

#[test]
fn two_state_toy() {
    let k = KernelMatrix::from_masses(unit_states(2), DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap();
    let eta = invariant_measure(&k).unwrap();
    assert!((eta.density[0] - 2.0 / 3.0).abs() < 1e-14);
    assert!((eta.density[1] - 1.0 / 3.0).abs() < 1e-14);
    assert!(eta.residual <= 1e-10);
}

#[test]
fn non_stochastic_rows_are_rejected() {
    let bad = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.8]);
    assert!(matches!(
        KernelMatrix::from_masses(unit_states(2), bad),
        Err(KernelError::NotStochastic { row: 0, .. })
    ));
}

#[test]
fn identity_kernel_has_no_unique_fixed_vector() {
    let k = KernelMatrix::from_masses(unit_states(3), DMatrix::identity(3, 3)).unwrap();
    assert!(invariant_measure(&k).is_err());
    assert_eq!(fixed_space_dimension(&k, FIXED_SPACE_TOL), 3);
}

/// Symmetric kernel with eigenvalues 1, 0.5, 0.2.
fn symmetric_three() -> DMatrix<f64> {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    let q2 = [1.0 / s2, -1.0 / s2, 0.0];
    let q3 = [1.0 / s6, 1.0 / s6, -2.0 / s6];
    DMatrix::from_fn(3, 3, |i, j| 1.0 / 3.0 + 0.5 * q2[i] * q2[j] + 0.2 * q3[i] * q3[j])
}

#[test]
fn doubly_stochastic_fixes_uniform() {
    let k = KernelMatrix::from_masses(unit_states(3), symmetric_three()).unwrap();
    let eta = invariant_measure(&k).unwrap();
    for v in &eta.density {
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }
}

#[test]
fn alpha_of_symmetric_kernel() {
    let p = symmetric_three();
    let eig = SymmetricEigen::new(Matrix3::from_iterator(p.iter().copied()));
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    // oracle: distance of the non-unit eigenvalues from 1
    let oracle = ev[..2].iter().map(|l| (1.0 - l).abs()).fold(f64::INFINITY, f64::min);
    assert!((oracle - 0.5).abs() < 1e-12);
    let k = KernelMatrix::from_masses(unit_states(3), p).unwrap();
    let u = invariant_measure(&k).unwrap();
    assert!((spectral_gap_alpha(&k, &u).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn identical_rows_give_alpha_one() {
    let row = [0.1, 0.4, 0.3, 0.2];
    let k = KernelMatrix::from_masses(unit_states(4), DMatrix::from_fn(4, 4, |_, j| row[j])).unwrap();
    let u = invariant_measure(&k).unwrap();
    assert!((spectral_gap_alpha(&k, &u).unwrap() - 1.0).abs() < 1e-12);
    let curve = tv_curve(&k, &u, 5);
    assert!(curve.iter().all(|&t| t < 1e-15));
}

#[test]
fn one_dimensional_gibbs_kernel_is_the_target() {
    let states = StateGrid::uniform(BoxDomain::cube(1, 0.0, 2.0).unwrap(), 8).unwrap();
    let t = FnTarget::new(states.domain().clone(), "ramp", |x| 1.0 + x[0] * x[0]);
    let k = discretize_gibbs_kernel(&t, &states).unwrap();
    let target = discretized_target(&t, &states).unwrap();
    for x in 0..8 {
        for y in 0..8 {
            assert!((k.density_at(x, y) - target[y]).abs() < 1e-13);
        }
    }
    let eta = invariant_measure(&k).unwrap();
    assert!(tv_distance(&eta.density, &target, states.cell_volume()) < 1e-13);
}

#[test]
fn product_target_has_identical_rows() {
    let states = beta_states(6);
    let t = FnTarget::new(states.domain().clone(), "product", |x| {
        (2.0 + x[0]) * (1.5 - x[1] * x[1])
    });
    let k = discretize_gibbs_kernel(&t, &states).unwrap();
    for x in 1..k.n_states() {
        for y in 0..k.n_states() {
            assert!((k.mass()[(x, y)] - k.mass()[(0, y)]).abs() < 1e-15);
        }
    }
}

#[test]
fn gibbs_invariant_is_discretized_target() {
    let t = beta_mixture_2d();
    let states = beta_states(12);
    let k = discretize_gibbs_kernel(&t, &states).unwrap();
    let eta = invariant_measure(&k).unwrap();
    let target = discretized_target(&t, &states).unwrap();
    assert!(tv_distance(&eta.density, &target, states.cell_volume()) < 1e-12);
}

#[test]
fn entrywise_and_dense_composition_agree() {
    let states = StateGrid::new(BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(), vec![3, 4]).unwrap();
    let t = beta_mixture_2d();
    let grids = vec![Grid1D::uniform(-1.0, 1.0, 5).unwrap(); 2];
    let all = [
        gibbs_factors(&t, &states).unwrap(),
        griddy_factors(&t, &states, &grids, InterpScheme::Polynomial(2), ClampSpec::default()).unwrap(),
        metropolized_factors(
            &t,
            &states,
            &grids,
            InterpScheme::PiecewiseConstant,
            ClampSpec::default(),
        )
        .unwrap(),
    ];
    for factors in all {
        let dense = compose_dense(&states, &factors);
        let k = compose(states.clone(), factors).unwrap();
        assert!((k.mass() - &dense).abs().max() < 1e-15);
    }
}

#[test]
fn exact_scheme_matches_gibbs() {
    let g = Grid1D::new(vec![0.0, 0.3, 1.0, 1.5, 2.0]).unwrap();
    let h = Grid1D::uniform(-1.0, 1.0, 4).unwrap();
    let values: Vec<f64> = (0..20).map(|k| 0.5 + ((k * 11) % 7) as f64).collect();
    let t = PiecewiseMultilinear::new(vec![g.clone(), h.clone()], values).unwrap();
    let states = StateGrid::new(t.domain().clone(), vec![10, 9]).unwrap();
    let kp = discretize_gibbs_kernel(&t, &states).unwrap();
    let kq = discretize_griddy_kernel(
        &t,
        &states,
        &[g, h],
        InterpScheme::PiecewiseLinear,
        ClampSpec::default(),
    )
    .unwrap();
    let diff = (kp.density() - kq.density()).abs().max();
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn griddy_kernel_distance_and_clamp_floor() {
    let t = beta_mixture_2d();
    let states = beta_states(32);
    let kp = discretize_gibbs_kernel(&t, &states).unwrap();
    let kq = beta_griddy(32, 11);
    let d = kp.lp_distance(&kq, Norm::L2).unwrap();
    assert!(d > 0.0 && d.is_finite());
    for s in kq.factor_stats() {
        let floor = s.clamp_floor.unwrap();
        assert!(s.min_density >= floor * (1.0 - 1e-12), "{s:?}");
    }
    let floor: f64 = kq.factor_stats().iter().map(|s| s.clamp_floor.unwrap()).product();
    assert!(doeblin_constant(&kq) >= floor * (1.0 - 1e-12));
}

#[test]
fn uniform_kernel_doeblin_and_regularity_equality() {
    let states = StateGrid::uniform(BoxDomain::cube(2, 0.0, 2.0).unwrap(), 4).unwrap();
    let n = states.n_states();
    let vol = states.domain().volume();
    let k = KernelMatrix::from_density(states, DMatrix::from_element(n, n, 1.0 / vol)).unwrap();
    assert!((doeblin_constant(&k) - 1.0 / vol).abs() < 1e-15);
    let eta = invariant_measure(&k).unwrap();
    let r = regularity_check(&k, &eta);
    assert!((r.image_sup - r.sup_bound).abs() < 1e-15);
    assert!(r.all_hold());
}

#[test]
fn tv_decay_is_monotone_and_under_the_envelope() {
    let k = beta_griddy(16, 6);
    let eta = invariant_measure(&k).unwrap();
    let c = doeblin_constant(&k);
    assert!(c > 0.0);
    let curve = tv_curve(&k, &eta, 50);
    let env = doeblin_envelope(c, 4.0, 50);
    for n in 0..50 {
        assert!(curve[n] <= env[n] + 1e-9, "n={} tv={} env={}", n + 1, curve[n], env[n]);
        if n > 0 {
            assert!(curve[n] <= curve[n - 1] + 1e-15);
        }
    }
    assert_eq!(fixed_space_dimension(&k, FIXED_SPACE_TOL), 1);
}

#[test]
fn metropolized_kernel_fixes_the_discretized_target_1d() {
    let states = StateGrid::uniform(BoxDomain::cube(1, -1.0, 1.0).unwrap(), 16).unwrap();
    let t = FnTarget::new(states.domain().clone(), "bimodal", |x| {
        (-(x[0] - 0.5).powi(2) * 8.0).exp() + 0.6 * (-(x[0] + 0.4).powi(2) * 20.0).exp()
    });
    let grid = [Grid1D::uniform(-1.0, 1.0, 5).unwrap()];
    let k = discretize_metropolized_kernel(&t, &states, &grid, InterpScheme::PiecewiseLinear, ClampSpec::default())
        .unwrap();
    let eta = invariant_measure(&k).unwrap();
    let target = discretized_target(&t, &states).unwrap();
    assert!(tv_distance(&eta.density, &target, states.cell_volume()) < 1e-10);
    // the proposal alone is biased
    let kq = discretize_griddy_kernel(&t, &states, &grid, InterpScheme::PiecewiseLinear, ClampSpec::default()).unwrap();
    let biased = invariant_measure(&kq).unwrap();
    assert!(tv_distance(&biased.density, &target, states.cell_volume()) > 1e-3);
}

#[test]
fn identical_kernels_have_zero_distance() {
    let k = beta_griddy(8, 6);
    let a = PerturbationAnalysis::new(&k, &k).unwrap();
    for p in [Norm::L2, Norm::P(4.0), Norm::Inf] {
        let r = a.report(p);
        assert_eq!(r.kernel_dist, 0.0);
        assert_eq!(r.measure_dist, 0.0);
        assert_eq!(r.implied_constant, 0.0);
        assert!((r.overlap_lambda - 1.0).abs() < 1e-12);
        assert!(r.remark_bound_holds);
    }
}

#[test]
fn report_on_mismatched_grids_fails() {
    let a = beta_griddy(8, 6);
    let b = beta_griddy(6, 6);
    assert!(matches!(
        perturbation_report(&a, &b, Norm::L2),
        Err(KernelError::DimensionMismatch)
    ));
}

#[test]
fn beta_gibbs_report() {
    let t = beta_mixture_2d();
    let kp = discretize_gibbs_kernel(&t, &beta_states(32)).unwrap();
    let kq = beta_griddy(32, 11);
    let a = PerturbationAnalysis::new(&kp, &kq).unwrap();
    assert!(a.gap_alpha > 0.0);
    assert!(a.operator_norm_ratio <= 1.0 + 1e-8, "{}", a.operator_norm_ratio);
    assert_eq!((a.fixed_space_dim_p, a.fixed_space_dim_q), (1, 1));
    let r = a.report(Norm::L2);
    assert!(r.measure_dist > 0.0 && r.kernel_dist > 0.0);
    assert!(r.overlap_lambda <= 1.0 + 1e-10 && r.overlap_lambda > 0.9);
}

#[test]
fn regularity_on_griddy_kernel_is_strict_and_homogeneous() {
    let k = beta_griddy(16, 11);
    let eta = invariant_measure(&k).unwrap();
    let r = regularity_check(&k, &eta);
    assert!(r.all_hold());
    assert!(r.image_sup < r.sup_bound);
    assert!(r.parts.iter().all(|p| p.lhs < p.rhs));
    let scaled: Vec<f64> = eta.density.iter().map(|v| 10.0 * v).collect();
    let s = regularity_check_with(&k, &scaled, &[Norm::L2, Norm::P(4.0), Norm::Inf]);
    assert!((s.image_sup / r.image_sup - 10.0).abs() < 1e-12);
    assert!((s.sup_bound / r.sup_bound - 10.0).abs() < 1e-12);
    for (a, b) in s.parts.iter().zip(&r.parts) {
        assert!((a.lhs / b.lhs - 10.0).abs() < 1e-12);
        assert!((a.rhs / b.rhs - 10.0).abs() < 1e-12);
    }
}

fn dummy_report() -> PerturbationReport {
    let k = KernelMatrix::from_masses(unit_states(2), DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap();
    let q = KernelMatrix::from_masses(unit_states(2), DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8])).unwrap();
    perturbation_report(&k, &q, Norm::L2).unwrap()
}

#[test]
fn truncation_report_from_c3_c4() {
    let r = dummy_report();
    let spec = TruncationSpec {
        c3: Some(1.0),
        c4: Some(1.0),
        ..TruncationSpec::new(2.0)
    };
    let lp = 0.8;
    let b = truncation_bound_report(&spec, Norm::L2, lp, &r).unwrap();
    assert_eq!((b.c1, b.c2), (1.0, 2.0));
    assert_eq!(b.mass_term, lp / 2.0);
    assert_eq!(b.lp_term, 1.0 / (2.0 * lp));
    assert_eq!(b.perturbation_term, r.implied_constant * r.kernel_dist);

    let doubled = truncation_bound_report(&TruncationSpec { t: 4.0, ..spec }, Norm::L2, lp, &r).unwrap();
    assert_eq!(doubled.mass_term * 2.0, b.mass_term);
    assert_eq!(doubled.lp_term * 2.0, b.lp_term);

    let err = truncation_bound_report(&TruncationSpec { t: 0.999, ..spec }, Norm::L2, lp, &r).unwrap_err();
    assert!(matches!(err, KernelError::HypothesisViolation { .. }));
    assert!(truncation_bound_report(&TruncationSpec { t: 1.0, ..spec }, Norm::L2, lp, &r).is_ok());
    assert_eq!(
        truncation_bound_report(&TruncationSpec::new(2.0), Norm::L2, lp, &r).unwrap_err(),
        KernelError::TailConstantsUnavailable
    );
    assert_eq!(
        truncation_bound_report(&spec, Norm::Inf, lp, &r).unwrap_err(),
        KernelError::TailConstantsUnavailable
    );
}

#[test]
fn compact_case_reduces_to_the_perturbation_term() {
    let r = dummy_report();
    let spec = TruncationSpec {
        c1: Some(0.0),
        c2: Some(0.0),
        ..TruncationSpec::new(1.0)
    };
    let b = truncation_bound_report(&spec, Norm::L2, 0.7, &r).unwrap();
    assert_eq!(b.mass_term, 0.0);
    assert_eq!(b.lp_term, 0.0);
    assert_eq!(b.total, r.implied_constant * r.kernel_dist);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn composition_is_row_stochastic(
        values in prop::collection::vec(0.01f64..10.0, 12),
        metropolized in any::<bool>(),
    ) {
        let g = Grid1D::uniform(0.0, 1.0, 3).unwrap();
        let h = Grid1D::uniform(0.0, 1.0, 4).unwrap();
        let t = PiecewiseMultilinear::new(vec![g, h], values).unwrap();
        let states = StateGrid::new(t.domain().clone(), vec![4, 5]).unwrap();
        let grids = vec![Grid1D::uniform(0.0, 1.0, 5).unwrap(); 2];
        let factors = if metropolized {
            metropolized_factors(&t, &states, &grids, InterpScheme::PiecewiseLinear, ClampSpec::default()).unwrap()
        } else {
            griddy_factors(&t, &states, &grids, InterpScheme::Polynomial(3), ClampSpec::default()).unwrap()
        };
        let dense = compose_dense(&states, &factors);
        for r in dense.row_iter() {
            prop_assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        let k = compose(states, factors).unwrap();
        let eta = invariant_measure(&k).unwrap();
        prop_assert_eq!(fixed_space_dimension(&k, FIXED_SPACE_TOL), 1);
        prop_assert!(eta.density.iter().all(|&v| v > 0.0));
    }
}

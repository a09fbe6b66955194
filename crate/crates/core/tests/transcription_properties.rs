use fipsed::fourier::full_period_integral;
use fipsed::nlp::{check_jacobian, NlpProblem};
use fipsed::transcription::{normalize, Block, DecisionVector};
use fipsed::uav::UavParameters;
use fipsed::EquispacedGrid;
use proptest::prelude::*;

fn decision_vector(n: usize) -> impl Strategy<Value = DecisionVector> {
    (
        prop::collection::vec(-1.0e3..1.0e3f64, n),
        prop::collection::vec(3900.0..4100.0f64, n),
        prop::collection::vec(-0.5..0.5f64, n),
        prop::collection::vec(10.0..40.0f64, n),
        prop::collection::vec(-0.17..0.17f64, n),
        prop::collection::vec(0.0..140.0f64, n),
        1.0..30.0f64,
    )
        .prop_map(|(x, z, g, v, a, t, tf)| DecisionVector::pack(&x, &z, &g, &v, &a, &t, tf).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn performance_index_is_mean_fuel_rate(dv in decision_vector(16)) {
        let p = UavParameters::default();
        let nlp = normalize(&p, 16).unwrap();
        let j = nlp.performance_index(&dv);
        // (σ / T_f) ∫_0^{T_f} T dt on the physical grid
        let grid = EquispacedGrid::new(dv.t_f(), 16).unwrap();
        let oracle = p.sigma / dv.t_f() * full_period_integral(&grid, dv.thrust()).unwrap();
        prop_assert!((j - oracle).abs() <= 1e-14 * oracle.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn objective_ignores_the_period(dv in decision_vector(16), tf in 1.0..30.0f64) {
        let nlp = normalize(&UavParameters::default(), 16).unwrap();
        let mut other = dv.clone();
        other.set_t_f(tf);
        prop_assert_eq!(nlp.objective(dv.as_slice()), nlp.objective(other.as_slice()));
    }

    #[test]
    fn solver_rows_match_residual_table(dv in decision_vector(12)) {
        let nlp = normalize(&UavParameters::default(), 12).unwrap();
        let mut c = vec![0.0; nlp.num_constraints()];
        nlp.constraints(dv.as_slice(), &mut c);
        let r = nlp.residuals(&dv).unwrap();
        prop_assert!(r.gamma[0].abs() < 1e-12 && r.v[0].abs() < 1e-12);
        let mut expected: Vec<f64> = Vec::new();
        expected.extend(&r.x);
        expected.extend(&r.z);
        expected.extend(&r.gamma[1..]);
        expected.extend(&r.v[1..]);
        expected.extend(r.closure);
        prop_assert_eq!(expected.len(), c.len());
        let worst = expected.iter().zip(&c).fold(0.0_f64, |a, (e, g)| a.max((e - g).abs()));
        prop_assert!(worst < 1e-9 * (1.0 + r.max_abs()), "{}", worst);
    }

    #[test]
    fn jacobian_matches_differences(dv in decision_vector(8)) {
        let nlp = normalize(&UavParameters::default(), 8).unwrap();
        let dev = check_jacobian(&nlp, dv.as_slice(), 1e-6).unwrap();
        prop_assert!(dev < 1e-5, "{}", dev);
    }

    #[test]
    fn level_trim_is_feasible_for_any_period(tf in 1.0..30.0f64) {
        let nlp = normalize(&UavParameters::default(), 16).unwrap();
        let dv = nlp.initial_guess(tf).unwrap();
        let r = nlp.residuals(&dv).unwrap();
        prop_assert!(r.max_abs() < 1e-8, "{}", r.max_abs());
        prop_assert!(dv.block(Block::Thrust).iter().all(|&t| (0.0..=140.0).contains(&t)));
    }
}

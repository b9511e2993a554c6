use proptest::prelude::*;
use rigidplast::tensor::{project_k, radial_return, support_h, HookeTensor, SymTensor, YieldSet};

fn sym(dim: usize) -> impl Strategy<Value = SymTensor> {
    prop::collection::vec(-3.0..3.0f64, dim * (dim + 1) / 2)
        .prop_map(move |c| SymTensor::from_coeffs(dim, &c).unwrap())
}

fn pair() -> impl Strategy<Value = (SymTensor, SymTensor)> {
    prop_oneof![(sym(2), sym(2)), (sym(3), sym(3))]
}

fn triple() -> impl Strategy<Value = (SymTensor, SymTensor, SymTensor)> {
    prop_oneof![(sym(2), sym(2), sym(2)), (sym(3), sym(3), sym(3))]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ddot_is_symmetric_and_matches_norm((a, b) in pair()) {
        prop_assert!((a.ddot(&b) - b.ddot(&a)).abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
        prop_assert!((a.ddot(&a) - a.norm_sq()).abs() <= 1e-12 * (1.0 + a.norm_sq()));
        prop_assert!(a.ddot(&b).abs() <= a.norm() * b.norm() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn dev_is_traceless_and_orthogonal_to_identity((a, _) in pair()) {
        let (d, mean) = a.dev_decompose();
        prop_assert!(d.trace().abs() <= 1e-12 * (1.0 + a.norm()));
        prop_assert!(d.ddot(&SymTensor::identity(a.dim())).abs() <= 1e-12 * (1.0 + a.norm()));
        let back = d + mean * SymTensor::identity(a.dim());
        prop_assert!((back - a).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn projection_is_idempotent_and_feasible((a, _) in pair(), r in 0.1..3.0f64) {
        let k = YieldSet::von_mises(r).unwrap();
        let p = project_k(&a.dev(), &k).unwrap();
        prop_assert!(p.norm() <= r * (1.0 + 1e-12));
        let q = project_k(&p, &k).unwrap();
        prop_assert!((q - p).norm() <= 1e-14 * (1.0 + r));
    }

    #[test]
    fn support_function_bounds_pairing((a, b) in pair(), r in 0.1..3.0f64) {
        let k = YieldSet::von_mises(r).unwrap();
        let tau = project_k(&b.dev(), &k).unwrap();
        let p = a.dev();
        prop_assert!(tau.ddot(&p) <= support_h(&p, &k).unwrap() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn return_map_satisfies_hill_principle(
        (e, p_old, t) in triple(),
        mu in 0.2..3.0f64,
        eps in 1e-4..1.0f64,
        r in 0.1..3.0f64,
    ) {
        let hooke = HookeTensor::new(mu, 1.0, eps).unwrap();
        let k = YieldSet::von_mises(r).unwrap();
        let (e, p_old) = (e.dev(), p_old.dev());
        let m = radial_return(&e, &p_old, &hooke, &k);
        prop_assert!(m.stress_dev.norm() <= r * (1.0 + 1e-12));
        prop_assert!(m.plastic_strain.is_deviatoric());
        // (σ_D - τ):Δp ≥ 0 for every admissible τ.
        let tau = project_k(&t.dev(), &k).unwrap();
        let dp = m.plastic_strain - p_old;
        let scale = r * dp.norm();
        prop_assert!((m.stress_dev - tau).ddot(&dp) >= -1e-10 * (1.0 + scale));
    }

    #[test]
    fn return_map_is_identity_inside_the_yield_set((e, p_old) in pair(), mu in 0.2..3.0f64) {
        let hooke = HookeTensor::new(mu, 1.0, 1.0).unwrap();
        let (e, p_old) = (e.dev(), p_old.dev());
        let trial = hooke.deviatoric_stiffness() * (e - p_old).norm();
        let k = YieldSet::von_mises(trial * 1.01 + 1e-9).unwrap();
        let m = radial_return(&e, &p_old, &hooke, &k);
        prop_assert!(!m.yielded(&p_old));
    }
}

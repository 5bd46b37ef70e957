use fracsplit::quadrature::{jacobi_weight_mass, GaussJacobi};
use fracsplit::rational::{gauss_jacobi_coeffs, simpson_coeffs};
use fracsplit::splitting::{
    build_d_terms, componentwise_substep, mass_substep, regularized_substep,
    split_step_componentwise,
};
use fracsplit::{
    apply_a, inner_product, solve_shifted, EigenBasis, GridFunction, GridSpec, MassOperator,
    ShiftedSolveConfig, TermOrdering,
};
use proptest::prelude::*;

fn grid_and_values() -> impl Strategy<Value = (GridSpec, Vec<f64>)> {
    (2usize..10, 2usize..10).prop_flat_map(|(n1, n2)| {
        let g = GridSpec::new(n1, n2).unwrap();
        (
            Just(g),
            prop::collection::vec(-1.0f64..1.0, g.interior_len()),
        )
    })
}

fn grid_and_two_fields() -> impl Strategy<Value = (GridSpec, Vec<f64>, Vec<f64>)> {
    (2usize..10, 2usize..10).prop_flat_map(|(n1, n2)| {
        let g = GridSpec::new(n1, n2).unwrap();
        let len = g.interior_len();
        (
            Just(g),
            prop::collection::vec(-1.0f64..1.0, len),
            prop::collection::vec(-1.0f64..1.0, len),
        )
    })
}

fn field(g: GridSpec, v: Vec<f64>) -> GridFunction {
    GridFunction::from_values(g, v).unwrap()
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().any(|x| x.abs() > 1e-3)
}

fn cfg() -> ShiftedSolveConfig {
    ShiftedSolveConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn index_round_trip(n1 in 2usize..40, n2 in 2usize..40) {
        let g = GridSpec::new(n1, n2).unwrap();
        for idx in 0..g.interior_len() {
            let (i1, i2) = g.node(idx);
            prop_assert!((1..n1).contains(&i1) && (1..n2).contains(&i2));
            prop_assert_eq!(g.index(i1, i2), idx);
        }
    }

    #[test]
    fn norms_are_consistent((g, u, w) in grid_and_two_fields()) {
        let (u, w) = (field(g, u), field(g, w));
        let uu = inner_product(&u, &u).unwrap();
        prop_assert!((uu.sqrt() - u.norm_l2()).abs() <= 1e-14 * (1.0 + u.norm_l2()));
        prop_assert!((inner_product(&u, &w).unwrap() - inner_product(&w, &u).unwrap()).abs() < 1e-15);
        let mut sum = u.clone();
        sum.axpy(1.0, &w).unwrap();
        prop_assert!(sum.norm_l2() <= u.norm_l2() + w.norm_l2() + 1e-14);
        prop_assert!(u.norm_l2() <= u.norm_linf() + 1e-15);
    }

    #[test]
    fn laplacian_is_self_adjoint_and_bounded_below((g, u, w) in grid_and_two_fields()) {
        let (u, w) = (field(g, u), field(g, w));
        let auw = inner_product(&apply_a(&u), &w).unwrap();
        let uaw = inner_product(&u, &apply_a(&w)).unwrap();
        let scale = apply_a(&u).norm_l2() * w.norm_l2() + 1e-300;
        prop_assert!((auw - uaw).abs() <= 1e-13 * scale);
        let energy = inner_product(&apply_a(&u), &u).unwrap();
        let norm2 = u.norm_l2().powi(2);
        prop_assert!(energy >= g.delta_lower_bound() * norm2 * (1.0 - 1e-12));
        prop_assert!(energy <= fracsplit::lambda_max(&g) * norm2 * (1.0 + 1e-12));
    }

    #[test]
    fn shifted_solve_inverts((g, r) in grid_and_values(), b in 0.0f64..100.0, c in 0.1f64..5.0) {
        prop_assume!(nonzero(&r));
        let r = field(g, r);
        let x = solve_shifted(b, c, &r, &cfg()).unwrap();
        let mut back = apply_a(&x).scaled(c);
        back.axpy(b, &x).unwrap();
        prop_assert!(back.sub(&r).unwrap().norm_l2() <= 1e-11 * r.norm_l2());
    }

    #[test]
    fn spectral_round_trip_and_power_one((g, u) in grid_and_values()) {
        let u = field(g, u);
        let basis = EigenBasis::new(g);
        let back = basis.inverse(&basis.forward(&u));
        prop_assert!(back.sub(&u).unwrap().norm_l2() <= 1e-12 * (u.norm_l2() + 1e-300));
        let a = apply_a(&u);
        let p = basis.apply_power(&u, 1.0).unwrap();
        prop_assert!(p.sub(&a).unwrap().norm_l2() <= 1e-11 * (a.norm_l2() + 1e-300));
    }

    #[test]
    fn fractional_powers_compose((g, u) in grid_and_values(), s in 0.05f64..0.95) {
        prop_assume!(nonzero(&u));
        let u = field(g, u);
        let basis = EigenBasis::new(g);
        let half = basis.apply_power(&basis.apply_power(&u, s).unwrap(), 1.0 - s).unwrap();
        let full = basis.apply_power(&u, 1.0).unwrap();
        prop_assert!(half.sub(&full).unwrap().norm_l2() <= 1e-11 * full.norm_l2());
        let inv = basis.apply_power(&basis.apply_power(&u, -s).unwrap(), s).unwrap();
        prop_assert!(inv.sub(&u).unwrap().norm_l2() <= 1e-11 * u.norm_l2());
    }

    #[test]
    fn quadrature_weights_positive(n in 1usize..120, beta in 0.05f64..0.95) {
        let q = GaussJacobi::new(n, -beta, beta - 1.0).unwrap();
        prop_assert!(q.weights.iter().all(|w| *w > 0.0));
        prop_assert!(q.nodes.windows(2).all(|p| p[0] < p[1]));
        let mass = jacobi_weight_mass(-beta, beta - 1.0);
        prop_assert!((q.weights.iter().sum::<f64>() - mass).abs() <= 1e-10 * mass);
    }

    #[test]
    fn coefficients_positive_and_sorted(beta in 0.05f64..0.95, half_m in 1usize..60) {
        for c in [gauss_jacobi_coeffs(beta, 2 * half_m, 4.0).unwrap(), simpson_coeffs(beta, 2 * half_m, 5.0).unwrap()] {
            prop_assert!(c.terms().iter().all(|t| t.a > 0.0 && t.b >= 0.0));
            prop_assert!(c.terms().windows(2).all(|p| p[0].b <= p[1].b));
            prop_assert!(c.evaluate(1.0) > 0.0);
            // r_m is decreasing in lambda
            prop_assert!(c.evaluate(10.0) < c.evaluate(1.0));
        }
    }

    #[test]
    fn componentwise_substeps_never_grow(
        (g, u) in grid_and_values(),
        sigma in 0.5f64..1.5,
        log_tau in -4.0f64..1.0,
        alpha in 0.1f64..0.9,
    ) {
        let tau = 10f64.powf(log_tau);
        let coeffs = simpson_coeffs(1.0 - alpha, 10, 5.0).unwrap();
        let mut w = field(g, u);
        for &t in coeffs.terms() {
            let next = componentwise_substep(&w, t, sigma, tau, &cfg()).unwrap();
            prop_assert!(next.norm_l2() <= w.norm_l2() * (1.0 + 1e-11) + 1e-300);
            w = next;
        }
    }

    #[test]
    fn mass_substeps_never_grow_in_b_norm(
        (g, u) in grid_and_values(),
        seed in prop::collection::vec(1.0f64..3.0, 81),
        sigma in 0.5f64..1.5,
        log_tau in -4.0f64..1.0,
    ) {
        let tau = 10f64.powf(log_tau);
        let b = MassOperator::new(g, seed[..g.interior_len()].to_vec()).unwrap();
        let coeffs = gauss_jacobi_coeffs(0.5, 6, 4.0).unwrap();
        let mut w = field(g, u);
        for &t in coeffs.terms() {
            let next = mass_substep(&w, t, &b, sigma, tau, &cfg()).unwrap();
            prop_assert!(b.norm(&next).unwrap() <= b.norm(&w).unwrap() * (1.0 + 1e-11) + 1e-300);
            w = next;
        }
    }

    #[test]
    fn regularized_substeps_never_grow_in_b_norm(
        (g, u) in grid_and_values(),
        seed in prop::collection::vec(1.0f64..3.0, 81),
        log_tau in -4.0f64..1.0,
        slack in 1.0f64..3.0,
    ) {
        let tau = 10f64.powf(log_tau);
        let b = MassOperator::new(g, seed[..g.interior_len()].to_vec()).unwrap();
        let sigma = slack / (2.0 * b.gamma());
        let coeffs = simpson_coeffs(0.5, 6, 5.0).unwrap();
        let mut w = field(g, u);
        for &t in coeffs.terms() {
            let next = regularized_substep(&w, t, &b, sigma, tau, &cfg()).unwrap();
            prop_assert!(b.norm(&next).unwrap() <= b.norm(&w).unwrap() * (1.0 + 1e-11) + 1e-300);
            w = next;
        }
    }

    #[test]
    fn d_terms_commute_and_are_self_adjoint(
        (g, v, w) in grid_and_two_fields(),
        i in 0usize..8,
        j in 0usize..8,
    ) {
        prop_assume!(nonzero(&v) && nonzero(&w));
        let (v, w) = (field(g, v), field(g, w));
        let coeffs = simpson_coeffs(0.5, 8, 5.0).unwrap();
        let d = build_d_terms(&coeffs, &cfg());
        let ij = d[i].apply(&d[j].apply(&v).unwrap()).unwrap();
        let ji = d[j].apply(&d[i].apply(&v).unwrap()).unwrap();
        prop_assert!(ij.sub(&ji).unwrap().norm_l2() <= 1e-9 * ij.norm_l2());
        let left = inner_product(&d[i].apply(&v).unwrap(), &w).unwrap();
        let right = inner_product(&v, &d[i].apply(&w).unwrap()).unwrap();
        let scale = d[i].apply(&v).unwrap().norm_l2() * w.norm_l2();
        prop_assert!((left - right).abs() <= 1e-9 * scale);
        prop_assert!(inner_product(&d[i].apply(&v).unwrap(), &v).unwrap() > 0.0);
    }

    #[test]
    fn splitting_is_deterministic((g, u) in grid_and_values(), sigma in 0.5f64..1.0) {
        let u = field(g, u);
        let coeffs = simpson_coeffs(0.5, 6, 5.0).unwrap();
        let a = split_step_componentwise(&u, &coeffs, sigma, 0.01, &cfg(), TermOrdering::Symmetrized).unwrap();
        let b = split_step_componentwise(&u, &coeffs, sigma, 0.01, &cfg(), TermOrdering::Symmetrized).unwrap();
        prop_assert_eq!(a, b);
    }
}

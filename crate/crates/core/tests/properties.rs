use proptest::prelude::*;

use pwcycles::bifurcation::{lifted_field, lyapunov_v2_leading};
use pwcycles::field::{PiecewiseField, Side};
use pwcycles::hamiltonian_family::{build_level, default_tables, field_degree};
use pwcycles::poly::{phi_iterate, BiPolynomial, UniPolynomial};

fn coeffs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 1..=max_len)
}

fn bi(max: usize) -> impl Strategy<Value = BiPolynomial> {
    prop::collection::vec(coeffs(max), 1..=max).prop_map(BiPolynomial::new)
}

fn field() -> impl Strategy<Value = PiecewiseField> {
    (bi(3), bi(3), bi(3), bi(3)).prop_map(|(a, b, c, d)| PiecewiseField::new(a, b, c, d))
}

fn nonzero() -> impl Strategy<Value = f64> {
    prop_oneof![-2.0..-0.1f64, 0.1..2.0f64]
}

proptest! {
    #[test]
    fn divided_difference_is_symmetric(c in coeffs(8), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let p = UniPolynomial::new(c);
        let (ab, _) = p.divided_difference(a, b);
        let (ba, _) = p.divided_difference(b, a);
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab.abs()));
        if (a - b).abs() > 1e-3 {
            let direct = (p.eval(a) - p.eval(b)) / (a - b);
            prop_assert!((ab - direct).abs() <= 1e-8 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn divided_difference_on_the_diagonal_is_the_derivative(c in coeffs(8), a in -2.0..2.0f64) {
        let p = UniPolynomial::new(c);
        let d = p.derivative().eval(a);
        prop_assert!((p.divided_difference(a, a).0 - d).abs() <= 1e-10 * (1.0 + d.abs()));
    }

    #[test]
    fn shifts_compose_and_cancel(z in field(), b in -1.0..1.0f64, c in -1.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let once = z.apply_shift(b).apply_shift(c);
        let joined = z.apply_shift(b + c);
        prop_assert_eq!(once.eval_side(Side::Plus, x, y), joined.eval_side(Side::Plus, x, y));
        let back = z.apply_shift(b).apply_shift(-b).expanded();
        for side in [Side::Plus, Side::Minus] {
            let (u, v) = (back.eval_side(side, x, y), z.eval_side(side, x, y));
            prop_assert!((u[0] - v[0]).abs() <= 1e-9 && (u[1] - v[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn expanded_shift_matches_the_lazy_one(z in field(), b in -1.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let lazy = z.apply_shift(b);
        let u = lazy.eval_side(Side::Plus, x, y);
        let v = lazy.expanded().eval_side(Side::Plus, x, y);
        prop_assert!((u[0] - v[0]).abs() <= 1e-9 * (1.0 + u[0].abs()));
        prop_assert!((u[1] - v[1]).abs() <= 1e-9 * (1.0 + u[1].abs()));
    }

    #[test]
    fn v2_scales_as_inverse_epsilon(pp in nonzero(), qp in nonzero(), pm in nonzero(), qm in nonzero(), eps in 1e-6..1e-1f64) {
        prop_assume!(pp * pm > 0.0 && (pp * qp + pm * qm).abs() > 1e-3);
        let v1 = lyapunov_v2_leading(pp, qp, pm, qm, eps).unwrap();
        let v2 = lyapunov_v2_leading(pp, qp, pm, qm, 2.0 * eps).unwrap();
        prop_assert!((v1 - 2.0 * v2).abs() <= 1e-12 * v1.abs());
    }

    #[test]
    fn lift_multiplies_by_y_and_raises_degree(z in field(), eps in 0.0..0.1f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let lifted = lifted_field(&z, eps);
        prop_assert!(lifted.degree() <= z.degree() + 1);
        let flat = lifted_field(&z, 0.0);
        for side in [Side::Plus, Side::Minus] {
            let (u, v) = (flat.eval_side(side, x, y), z.eval_side(side, x, y));
            prop_assert!((u[0] - y * v[0]).abs() <= 1e-12 && (u[1] - y * v[1]).abs() <= 1e-12);
        }
        // P is untouched by eps
        let p0 = lifted.eval_side(Side::Plus, x, y)[0];
        prop_assert!((p0 - y * z.eval_side(Side::Plus, x, y)[0]).abs() <= 1e-12);
    }

    #[test]
    fn pullback_evaluates_through_phi(h in bi(4), x in -1.5..1.5f64, y in -1.5..1.5f64) {
        let pulled = h.pullback_phi();
        let direct = h.eval(x, phi_iterate(1, y));
        prop_assert!((pulled.eval(x, y) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        prop_assert_eq!(pulled.degree_y(), 2 * h.degree_y());
    }

    #[test]
    fn roots_of_products_are_found(roots in prop::collection::btree_set(-90i32..90, 1..6)) {
        let roots: Vec<f64> = roots.into_iter().map(|r| r as f64 / 100.0).collect();
        let p = UniPolynomial::from_roots(&roots);
        let found = p.real_roots(-1.0, 1.0, 1e-12).unwrap();
        prop_assert_eq!(found.len(), roots.len());
        for (f, r) in found.iter().zip(&roots) {
            prop_assert!((f.value - r).abs() <= 1e-9 && f.simple);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unperturbed_levels_are_mirror_symmetric(k in 0usize..3, x in 0.01..1.0f64, y in -1.0..1.0f64) {
        let tables = default_tables(2).unwrap();
        let level = build_level(k, 0.0, &vec![0.0; k], &tables).unwrap();
        let (hp, hm) = (level.hamiltonian(true), level.hamiltonian(false));
        prop_assert!((hp.eval(x, y) - hm.eval(-x, y)).abs() <= 1e-9 * (1.0 + hp.eval(x, y).abs()));
        prop_assert!(level.field().degree() <= field_degree(k));
    }
}

use delaymid::mid_solver::{compatibility_function, FixedVariable};
use delaymid::{
    classic_mid, control_oriented_mid, count_roots, find_roots, simulate, ComplexPoint, ControlSpec, InitialCondition,
    Quasipolynomial, Rectangle,
};
use proptest::prelude::*;

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

/// Random `(n, m, a, b, tau)` with `n <= 4`.
fn quasipoly() -> impl Strategy<Value = Quasipolynomial> {
    (1usize..=4)
        .prop_flat_map(|n| (Just(n), 0..n))
        .prop_flat_map(|(n, m)| (coeffs(n), coeffs(m + 1), 0.1..2.0f64))
        .prop_map(|(a, b, tau)| Quasipolynomial::new(a, b, tau).unwrap())
}

fn point() -> impl Strategy<Value = ComplexPoint> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| ComplexPoint::new(re, im))
}

fn central_difference(f: &dyn Fn(ComplexPoint) -> ComplexPoint, s: ComplexPoint, k: usize, h: f64) -> ComplexPoint {
    if k == 0 {
        return f(s);
    }
    let step = ComplexPoint::new(h, 0.0);
    (central_difference(f, s + step, k - 1, h) - central_difference(f, s - step, k - 1, h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn evaluation_is_linear_in_coefficients(
        (n, m) in (1usize..=4).prop_flat_map(|n| (Just(n), 0..n)),
        seed in prop::collection::vec(-5.0..5.0f64, 20),
        tau in 0.1..3.0f64,
        s in point(),
    ) {
        let a1 = seed[..n].to_vec();
        let a2 = seed[5..5 + n].to_vec();
        let b1 = seed[10..11 + m].to_vec();
        let b2 = seed[15..16 + m].to_vec();
        let sum = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + q).collect::<Vec<_>>();
        let q1 = Quasipolynomial::new(a1.clone(), b1.clone(), tau).unwrap();
        let q2 = Quasipolynomial::new(a2.clone(), b2.clone(), tau).unwrap();
        let q12 = Quasipolynomial::new(sum(&a1, &a2), sum(&b1, &b2), tau).unwrap();
        let leading = s.powu(n as u32);
        let gap = q12.evaluate(s) - q1.evaluate(s) - q2.evaluate(s) + leading;
        let scale = q1.term_magnitude(s) + q2.term_magnitude(s);
        prop_assert!(gap.norm() <= 1e-13 * scale, "gap {gap} scale {scale}");
    }

    #[test]
    fn conjugate_symmetry(qp in quasipoly(), s in point()) {
        let lhs = qp.evaluate(s.conj());
        let rhs = qp.evaluate(s).conj();
        prop_assert!((lhs - rhs).norm() <= 1e-13 * qp.term_magnitude(s));
    }

    #[test]
    fn derivatives_match_finite_differences(qp in quasipoly(), s in point(), k in 1usize..=3) {
        let f = |z: ComplexPoint| qp.evaluate(z);
        let h = if k == 1 { 1e-6 } else { 1e-3 };
        let numeric = central_difference(&f, s, k, h);
        let exact = qp.evaluate_derivative(s, k);
        let scale = exact.norm().max(qp.term_magnitude(s));
        prop_assert!((numeric - exact).norm() <= 1e-5 * scale, "k={k} {numeric} vs {exact}");
    }

    #[test]
    fn zeroth_derivative_is_evaluation(qp in quasipoly(), s in point()) {
        prop_assert_eq!(qp.evaluate_derivative(s, 0), qp.evaluate(s));
    }

    #[test]
    fn classic_first_order_closed_form(s0 in -10.0..-0.1f64, tau in 0.1..5.0f64) {
        let d = classic_mid(1, 0, s0, tau).unwrap();
        let a0 = -s0 - 1.0 / tau;
        let b0 = (s0 * tau).exp() / tau;
        prop_assert!((d.qp.a()[0] - a0).abs() <= 1e-10 * a0.abs().max(1e-300));
        prop_assert!((d.qp.b()[0] - b0).abs() <= 1e-10 * b0);
    }

    #[test]
    fn classic_designs_carry_certificates(
        (n, m) in (1usize..=4).prop_flat_map(|n| (Just(n), 0..n)),
        s0 in -3.0..-0.2f64,
        tau in 0.2..2.0f64,
    ) {
        let d = classic_mid(n, m, s0, tau).unwrap();
        prop_assert_eq!(d.multiplicity, n + m + 1);
        let cert = d.certificate();
        prop_assert!(cert.holds(), "{cert:?}");
        prop_assert!(cert.leading > 1e-4 * cert.scale, "{cert:?}");
    }

    #[test]
    fn control_oriented_scaling(lambda in 0.2..5.0f64) {
        let base = control_oriented_mid(&ControlSpec::new(vec![0.0, 0.0], 1, FixedVariable::Tau, 1.0)).unwrap();
        let scaled = control_oriented_mid(&ControlSpec::new(vec![0.0, 0.0], 1, FixedVariable::Tau, lambda)).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * y.abs().max(1e-12);
        prop_assert!(close(scaled.s0, base.s0 / lambda));
        prop_assert!(close(scaled.qp.b()[1], base.qp.b()[1] / lambda));
        prop_assert!(close(scaled.qp.b()[0], base.qp.b()[0] / (lambda * lambda)));
    }

    #[test]
    fn control_oriented_solves_the_next_condition(a in coeffs(2), tau in 0.3..3.0f64) {
        let spec = ControlSpec::new(a.clone(), 1, FixedVariable::Tau, tau);
        if let Ok(d) = control_oriented_mid(&spec) {
            let s = ComplexPoint::new(d.s0, 0.0);
            let scale = d.s0.abs().powi(2).max(1.0);
            prop_assert!(d.qp.evaluate_derivative(s, 2).norm() <= 1e-8 * scale);
            prop_assert!(compatibility_function(2, 1, &a, d.s0, tau).unwrap().abs() <= 1e-8 * scale);
            prop_assert!(d.candidates.iter().any(|c| *c == d.s0));
        }
    }

    #[test]
    fn count_is_additive_over_vertical_splits(
        roots in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 1..=5),
        cut in -2.5..2.5f64,
    ) {
        // Real polynomial with roots r and conj(r); skip cuts that graze a root.
        prop_assume!(roots.iter().all(|(re, _)| (re - cut).abs() > 1e-3));
        let mut poly = vec![ComplexPoint::new(1.0, 0.0)];
        for (re, im) in &roots {
            for r in [ComplexPoint::new(*re, *im), ComplexPoint::new(*re, -*im)] {
                let mut next = vec![ComplexPoint::new(0.0, 0.0); poly.len() + 1];
                for (i, c) in poly.iter().enumerate() {
                    next[i + 1] += c;
                    next[i] -= c * r;
                }
                poly = next;
            }
        }
        let n = poly.len() - 1;
        let a: Vec<f64> = poly[..n].iter().map(|c| c.re).collect();
        let qp = Quasipolynomial::new(a, vec![0.0], 1.0).unwrap();
        let whole = Rectangle::new(-4.0, 4.0, -4.0, 4.0).unwrap();
        let left = Rectangle::new(-4.0, cut, -4.0, 4.0).unwrap();
        let right = Rectangle::new(cut, 4.0, -4.0, 4.0).unwrap();
        let total = count_roots(&qp, &whole).unwrap();
        prop_assert_eq!(total, n);
        prop_assert_eq!(count_roots(&qp, &left).unwrap() + count_roots(&qp, &right).unwrap(), total);
    }

    #[test]
    fn simulation_is_homogeneous(lambda in -4.0..4.0f64, c in -2.0..2.0f64, omega in 0.1..5.0f64) {
        let qp = classic_mid(2, 1, -1.0, 1.0).unwrap().qp;
        let ic = InitialCondition::Trigonometric { amplitude: c, omega, phase: 0.3 };
        let base = simulate(&qp, &ic, 3.0, 50).unwrap();
        let scaled = simulate(&qp, &ic.scaled(lambda), 3.0, 50).unwrap();
        let peak = base.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (y, z) in base.y.iter().zip(&scaled.y) {
            prop_assert!((lambda * y - z).abs() <= 1e-12 * (lambda.abs() * peak).max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn roots_are_conjugate_closed_on_symmetric_rectangles(qp in quasipoly()) {
        let rect = Rectangle::new(-6.0, 3.0, -8.0, 8.0).unwrap();
        let Ok(rs) = find_roots(&qp, &rect) else {
            // A root chain grazing the boundary is a legitimate failure here.
            return Ok(());
        };
        prop_assert_eq!(rs.roots.iter().map(|r| r.multiplicity).sum::<usize>(), rs.total_count);
        for r in &rs.roots {
            let scale = r.location().norm().powi(qp.n() as i32).max(1.0);
            prop_assert!(r.residual <= 1e-6 * scale, "{r:?}");
            if r.im.abs() > 1e-9 {
                let mirrored = rs.roots.iter().any(|q| {
                    (q.location() - r.location().conj()).norm() <= 1e-8 * r.location().norm().max(1.0)
                });
                prop_assert!(mirrored, "no mirror for {r:?}");
            }
        }
    }
}

use delaymid::rootfinder::check_dominance;
use delaymid::{
    classic_mid, control_oriented_mid, count_roots, find_roots, simulate, ControlSpec, FixedVariable, InitialCondition,
    Quasipolynomial, Rectangle,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn falling(j: usize, k: usize) -> f64 {
    (0..k).map(|i| (j - i) as f64).product()
}

fn choose(k: usize, i: usize) -> f64 {
    (0..i).map(|l| (k - l) as f64 / (l + 1) as f64).product()
}

/// Solves all `n + m + 1` multiplicity conditions at once as one dense
/// system in `(a_0..a_{n-1}, b_0..b_m)`.
fn dense_classic(n: usize, m: usize, s0: f64, tau: f64) -> (Vec<f64>, Vec<f64>) {
    let size = n + m + 1;
    let mut matrix = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    let power = |j: usize, k: usize| if j >= k { falling(j, k) * s0.powi((j - k) as i32) } else { 0.0 };
    for k in 0..size {
        for j in 0..n {
            matrix[(k, j)] = power(j, k);
        }
        for j in 0..=m {
            let leibniz: f64 = (0..=k).map(|i| choose(k, i) * (-tau).powi((k - i) as i32) * power(j, i)).sum();
            matrix[(k, n + j)] = (-s0 * tau).exp() * leibniz;
        }
        rhs[k] = -power(n, k);
    }
    let x = matrix.lu().solve(&rhs).expect("dense multiplicity system is singular");
    (x.as_slice()[..n].to_vec(), x.as_slice()[n..].to_vec())
}

fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300)
}

#[test]
fn classic_matches_dense_solve() {
    for &(n, m, s0, tau) in &[
        (1, 0, -2.0, 1.0),
        (2, 0, -1.0, 0.5),
        (2, 1, -5.0, 1.0),
        (3, 1, -1.5, 2.0),
        (3, 2, -0.7, 1.3),
        (4, 2, -2.0, 0.4),
    ] {
        let design = classic_mid(n, m, s0, tau).unwrap();
        let (a, b) = dense_classic(n, m, s0, tau);
        for (got, want) in design.qp.a().iter().zip(&a).chain(design.qp.b().iter().zip(&b)) {
            assert!(close(*got, *want, 1e-9), "(n={n}, m={m}): {got} vs {want}");
        }
    }
}

#[test]
fn classic_quadruple_coefficients_follow_the_conditions() {
    let design = classic_mid(2, 1, -5.0, 1.0).unwrap();
    let e5 = (-5.0f64).exp();
    assert!(close(design.qp.a()[0], 11.0, 1e-12));
    assert!(close(design.qp.a()[1], 6.0, 1e-12));
    assert!(close(design.qp.b()[0], -16.0 * e5, 1e-12));
    assert!(close(design.qp.b()[1], -2.0 * e5, 1e-12));
    let (_, b) = dense_classic(2, 1, -5.0, 1.0);
    assert!(close(b[0], -16.0 * e5, 1e-10));
}

fn companion_roots(a: &[f64]) -> Vec<nalgebra::Complex<f64>> {
    let n = a.len();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 1..n {
        matrix[(i, i - 1)] = 1.0;
    }
    for (k, ak) in a.iter().enumerate() {
        matrix[(k, n - 1)] = -ak;
    }
    matrix.complex_eigenvalues().iter().copied().collect()
}

#[test]
fn polynomial_roots_match_companion_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rect = Rectangle::new(-3.0, 3.0, -3.0, 3.0).unwrap();
    for _ in 0..20 {
        let degree = rng.gen_range(1..=6);
        let a: Vec<f64> = (0..degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let qp = Quasipolynomial::new(a.clone(), vec![0.0], 1.0).unwrap();
        let expected: Vec<_> = companion_roots(&a)
            .into_iter()
            .filter(|z| z.re.abs() < 2.99 && z.im.abs() < 2.99)
            .collect();
        let found = find_roots(&qp, &rect).unwrap();
        let simple: usize = found.roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(simple, expected.len(), "a = {a:?}");
        for z in expected {
            let hit = found.roots.iter().any(|r| (r.location() - z).norm() <= 1e-8 * z.norm().max(1.0));
            assert!(hit, "missing {z} for a = {a:?}: {:?}", found.roots);
        }
    }
}

#[test]
fn classic_spectrum_is_dominated_by_the_quadruple_root() {
    let design = classic_mid(2, 1, -5.0, 1.0).unwrap();
    let rect = Rectangle::new(-50.0, 50.0, -100.0, 100.0).unwrap();
    let rs = find_roots(&design.qp, &rect).unwrap();
    let first = rs.roots[0];
    assert!((first.re + 5.0).abs() < 1e-4 && first.im.abs() < 1e-4, "{first:?}");
    assert_eq!(first.multiplicity, 4);
    assert!(rs.roots[1..].iter().all(|r| r.re < -5.0));
    let report = check_dominance(&rs, -5.0, 1e-6);
    assert!(report.pass && report.margin.unwrap() > 0.0);
    let disk = Rectangle::square(first.location(), 0.5).unwrap();
    assert_eq!(count_roots(&design.qp, &disk).unwrap(), 4);
}

#[test]
fn control_spectrum_is_dominated_by_the_triple_root() {
    let spec = ControlSpec::new(vec![-3.0, 2.0], 1, FixedVariable::Tau, 1.0);
    let design = control_oriented_mid(&spec).unwrap();
    let rect = Rectangle::new(-50.0, 50.0, -100.0, 100.0).unwrap();
    let rs = find_roots(&design.qp, &rect).unwrap();
    let first = rs.roots[0];
    assert!((first.re - design.s0).abs() < 1e-4 && first.im.abs() < 1e-4, "{first:?}");
    assert_eq!(first.multiplicity, 3);
    assert!(check_dominance(&rs, design.s0, 1e-6).pass);
}

#[test]
fn multiplicity_fidelity_on_small_squares() {
    let designs = [
        classic_mid(1, 0, -2.0, 1.0).unwrap(),
        classic_mid(2, 1, -5.0, 1.0).unwrap(),
        classic_mid(3, 1, -1.0, 1.0).unwrap(),
        control_oriented_mid(&ControlSpec::new(vec![0.0, 0.0], 1, FixedVariable::Tau, 1.0)).unwrap(),
        control_oriented_mid(&ControlSpec::new(vec![-3.0, 2.0], 1, FixedVariable::Tau, 1.0)).unwrap(),
    ];
    for d in designs {
        let square = Rectangle::square(delaymid::ComplexPoint::new(d.s0, 0.0), 0.1).unwrap();
        let rs = find_roots(&d.qp, &square).unwrap();
        assert_eq!(rs.roots.len(), 1, "{:?}", rs.roots);
        assert_eq!(rs.roots[0].multiplicity, d.multiplicity);
    }
}

/// Decay rate from the slope of `log |y|` between two late times; the
/// polynomial factor of a multiple root shrinks as the window moves out.
///
/// Euler perturbs a root of multiplicity `k` by about `h^(1/k)`, so the
/// quadruple root needs a finer step than the default to sit within 15%.
fn late_slope(qp: &Quasipolynomial, t1: f64, t2: f64) -> f64 {
    let traj = simulate(qp, &InitialCondition::Constant { c: 1.0 }, t2, 4000).unwrap();
    (traj.value_near(t2).abs().ln() - traj.value_near(t1).abs().ln()) / (t2 - t1)
}

#[test]
fn decay_rate_follows_the_dominant_root() {
    let classic = classic_mid(2, 1, -5.0, 1.0).unwrap();
    let slope = late_slope(&classic.qp, 10.0, 20.0);
    assert!((slope / -5.0 - 1.0).abs() < 0.15, "slope {slope}");

    let control = control_oriented_mid(&ControlSpec::new(vec![-3.0, 2.0], 1, FixedVariable::Tau, 1.0)).unwrap();
    let slope = late_slope(&control.qp, 40.0, 80.0);
    assert!((slope / control.s0 - 1.0).abs() < 0.15, "slope {slope} vs {}", control.s0);
}

#[test]
fn euler_error_is_first_order() {
    let qp = classic_mid(2, 1, -5.0, 1.0).unwrap().qp;
    let ic = InitialCondition::Constant { c: 1.0 };
    let endpoint = |steps| simulate(&qp, &ic, 2.0, steps).unwrap().last().1;
    let reference = endpoint(8000);
    let ratio = (endpoint(1000) - reference).abs() / (endpoint(500) - reference).abs();
    assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn history_is_reproduced_exactly() {
    let qp = classic_mid(2, 1, -1.0, 0.5).unwrap().qp;
    let ic = InitialCondition::Polynomial { coefficients: vec![1.0, -0.5, 0.25] };
    let traj = simulate(&qp, &ic, 1.0, 100).unwrap();
    for (t, y) in traj.t.iter().zip(&traj.y).take_while(|(t, _)| **t <= 0.0) {
        assert_eq!(*y, delaymid::simulator::ic_eval(&ic, *t, 0));
    }
}

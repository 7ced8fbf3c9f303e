use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use streamnav::flow_field::{FlowField, Obstacle, Rect};
use streamnav::{SafetyMargins, Vec2};

fn margins() -> SafetyMargins {
    SafetyMargins::default()
}

fn obstacle(x: f64, y: f64, a_p: f64) -> Obstacle {
    Obstacle::from_planned(Vec2::new(x, y), a_p, &margins()).unwrap()
}

/// f(z) = sum over obstacles of (z - z_f) + a_p^2 / (z - z_f), in complex arithmetic.
fn oracle_f(obs: &[(f64, f64, f64)], p: Vec2) -> Complex64 {
    let z = Complex64::new(p.x, p.y);
    obs.iter()
        .map(|&(x, y, a)| {
            let w = z - Complex64::new(x, y);
            w + a * a / w
        })
        .sum()
}

fn oracle_df(obs: &[(f64, f64, f64)], p: Vec2) -> Complex64 {
    let z = Complex64::new(p.x, p.y);
    obs.iter()
        .map(|&(x, y, a)| {
            let w = z - Complex64::new(x, y);
            Complex64::new(1.0, 0.0) - a * a / (w * w)
        })
        .sum()
}

fn build(obs: &[(f64, f64, f64)]) -> FlowField {
    FlowField::new(obs.iter().map(|&(x, y, a)| obstacle(x, y, a)).collect()).unwrap()
}

fn obstacles() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0.7..2.0f64), 1..4).prop_filter("distinct centers", |v| {
        v.iter()
            .enumerate()
            .all(|(i, a)| v[i + 1..].iter().all(|b| (a.0 - b.0).hypot(a.1 - b.1) > 1e-3))
    })
}

/// A point at least `gap` from every center.
fn clear_of(obs: &[(f64, f64, f64)], p: Vec2, gap: f64) -> bool {
    obs.iter().all(|&(x, y, _)| (p.x - x).hypot(p.y - y) > gap)
}

#[test]
fn unit_obstacle_reference_point() {
    let f = FlowField::single(obstacle(0.0, 0.0, 1.0));
    let fp = f.eval_field(Vec2::new(2.0, 0.0)).unwrap();
    let o = oracle_f(&[(0.0, 0.0, 1.0)], Vec2::new(2.0, 0.0));
    assert_eq!((fp.phi, fp.psi), (2.5, 0.0));
    assert_eq!((o.re, o.im), (2.5, 0.0));
}

#[test]
fn jacobian_reference_points_match_finite_differences() {
    let f = FlowField::single(obstacle(0.0, 0.0, 1.0));
    let j = f.eval_jacobian(Vec2::new(2.0, 0.0)).unwrap();
    let h = 1e-6;
    let fd = |dx: Vec2| {
        let a = f.eval_field(Vec2::new(2.0, 0.0) + dx).unwrap();
        let b = f.eval_field(Vec2::new(2.0, 0.0) - dx).unwrap();
        ((a.phi - b.phi) / (2.0 * h), (a.psi - b.psi) / (2.0 * h))
    };
    let (phi_x, psi_x) = fd(Vec2::new(h, 0.0));
    let (phi_y, psi_y) = fd(Vec2::new(0.0, h));
    assert_relative_eq!(j.dphi_dx, 0.75, epsilon = 1e-15);
    assert_relative_eq!(j.dpsi_dy, 0.75, epsilon = 1e-15);
    assert_relative_eq!(phi_x, 0.75, epsilon = 1e-8);
    assert_relative_eq!(psi_y, 0.75, epsilon = 1e-8);
    assert!(phi_y.abs() < 1e-8 && psi_x.abs() < 1e-8);

    let s = f.eval_jacobian(Vec2::new(1.0, 0.0)).unwrap();
    assert_eq!([s.dphi_dx, s.dphi_dy, s.dpsi_dx, s.dpsi_dy], [0.0; 4]);
}

#[test]
fn superposition_of_two_unit_obstacles() {
    let a = FlowField::single(obstacle(0.0, 0.0, 1.0));
    let b = FlowField::single(obstacle(5.0, 0.0, 1.0));
    let both = FlowField::new(vec![obstacle(0.0, 0.0, 1.0), obstacle(5.0, 0.0, 1.0)]).unwrap();
    for p in [Vec2::new(2.5, 0.3), Vec2::new(-3.0, 4.0), Vec2::new(7.0, -1.5)] {
        let s = both.eval_field(p).unwrap();
        let (fa, fb) = (a.eval_field(p).unwrap(), b.eval_field(p).unwrap());
        assert_relative_eq!(s.phi, fa.phi + fb.phi, epsilon = 1e-12);
        assert_relative_eq!(s.psi, fa.psi + fb.psi, epsilon = 1e-12);
    }
}

#[test]
fn far_field_potential_approaches_x() {
    let f = FlowField::single(obstacle(0.0, 0.0, 1.0));
    for x in [-100.0, 100.0] {
        let fp = f.eval_field(Vec2::new(x, 0.0)).unwrap();
        assert!((fp.phi - x).abs() <= 0.0100001, "phi - x = {}", fp.phi - x);
    }
    let near = (f.eval_field(Vec2::new(10.0, 0.0)).unwrap().phi - 10.0).abs();
    let far = (f.eval_field(Vec2::new(100.0, 0.0)).unwrap().phi - 100.0).abs();
    assert!(far < near / 9.0);
}

#[test]
fn lambda_max_single_obstacle_annulus_and_far_box() {
    let f = FlowField::single(obstacle(0.0, 0.0, 1.0));
    let annulus = f.lambda_max(&Rect::square(3.0).unwrap(), 0.01).unwrap();
    assert!((annulus - 4.0).abs() <= 0.05, "lambda_max = {annulus}");
    let far = f.lambda_max(&Rect::new(100.0, 106.0, -3.0, 3.0).unwrap(), 0.01).unwrap();
    assert!((far - 1.0).abs() <= 1e-3, "lambda_max = {far}");
}

/// Grid-search oracle: |f'|^2 maximised over the same points, via complex arithmetic.
#[test]
fn lambda_max_matches_a_complex_grid_search() {
    let obs = [(0.0, 0.0, 1.0)];
    let f = build(&obs);
    let mut best: f64 = 0.0;
    for i in 0..=120 {
        for j in 0..=120 {
            let p = Vec2::new(-3.0 + 0.05 * i as f64, -3.0 + 0.05 * j as f64);
            if p.norm() >= 1.0 {
                best = best.max(oracle_df(&obs, p).norm_sqr());
            }
        }
    }
    let ours = f.lambda_max(&Rect::square(3.0).unwrap(), 0.05).unwrap();
    assert_relative_eq!(ours, best, max_relative = 1e-12);
}

/// `h^2`-scaled five-point Laplacian error shrinks by about 4x when `h` halves.
#[test]
fn discrete_laplacian_is_second_order() {
    let f = build(&[(0.0, 0.0, 1.0), (3.0, 1.0, 0.8)]);
    let lap = |p: Vec2, h: f64| {
        let v = |d: Vec2| f.eval_field(p + d).unwrap();
        let c = v(Vec2::zeros());
        let n = [
            v(Vec2::new(h, 0.0)),
            v(Vec2::new(-h, 0.0)),
            v(Vec2::new(0.0, h)),
            v(Vec2::new(0.0, -h)),
        ];
        let phi = (n.iter().map(|q| q.phi).sum::<f64>() - 4.0 * c.phi) / (h * h);
        let psi = (n.iter().map(|q| q.psi).sum::<f64>() - 4.0 * c.psi) / (h * h);
        (phi, psi)
    };
    for p in [Vec2::new(-1.5, 0.4), Vec2::new(1.4, -1.1), Vec2::new(3.0, 2.3)] {
        let (a_phi, a_psi) = lap(p, 0.02);
        let (b_phi, b_psi) = lap(p, 0.01);
        assert!(a_phi.abs() < 1e-2 && a_psi.abs() < 1e-2);
        let r_phi = a_phi.abs() / b_phi.abs();
        let r_psi = a_psi.abs() / b_psi.abs();
        assert!((3.0..5.0).contains(&r_phi), "phi ratio {r_phi} at {p:?}");
        assert!((3.0..5.0).contains(&r_psi), "psi ratio {r_psi} at {p:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn field_matches_complex_oracle(obs in obstacles(), x in -8.0..8.0f64, y in -8.0..8.0f64) {
        let p = Vec2::new(x, y);
        prop_assume!(clear_of(&obs, p, 0.05));
        let (fp, j) = build(&obs).eval(p).unwrap();
        let o = oracle_f(&obs, p);
        let d = oracle_df(&obs, p);
        let scale = 1.0 + o.norm();
        prop_assert!((fp.phi - o.re).abs() <= 1e-12 * scale);
        prop_assert!((fp.psi - o.im).abs() <= 1e-12 * scale);
        let dscale = 1.0 + d.norm();
        prop_assert!((j.dphi_dx - d.re).abs() <= 1e-12 * dscale);
        prop_assert!((j.dpsi_dx - d.im).abs() <= 1e-12 * dscale);
    }

    #[test]
    fn cauchy_riemann_holds_exactly(obs in obstacles(), x in -8.0..8.0f64, y in -8.0..8.0f64) {
        let p = Vec2::new(x, y);
        prop_assume!(clear_of(&obs, p, 1e-3));
        let j = build(&obs).eval_jacobian(p).unwrap();
        prop_assert_eq!(j.dphi_dx, j.dpsi_dy);
        prop_assert_eq!(j.dphi_dy, -j.dpsi_dx);
        prop_assert_eq!(j.gain(), j.det());
    }

    #[test]
    fn stream_function_vanishes_on_every_exclusion_circle(
        a in 0.7..3.0f64, cx in -5.0..5.0f64, cy in -5.0..5.0f64, theta in 0.0..std::f64::consts::TAU,
    ) {
        let f = FlowField::single(obstacle(cx, cy, a));
        let p = Vec2::new(cx + a * theta.cos(), cy + a * theta.sin());
        prop_assert!(f.eval_field(p).unwrap().psi.abs() < 1e-12 * (1.0 + a));
    }

    #[test]
    fn empty_field_is_the_identity(x in -1e3..1e3f64, y in -1e3..1e3f64) {
        let f = FlowField::empty();
        let (fp, j) = f.eval(Vec2::new(x, y)).unwrap();
        prop_assert_eq!((fp.phi, fp.psi), (x, y));
        prop_assert_eq!(j.det(), 1.0);
    }

    #[test]
    fn lambda_of_empty_field_is_one(x0 in -10.0..10.0f64, w in 0.1..5.0f64) {
        let r = Rect::new(x0, x0 + w, -w, w).unwrap();
        prop_assert_eq!(FlowField::empty().lambda_max(&r, 0.1).unwrap(), 1.0);
    }
}

/// Analytic Jacobian vs central differences at 1000 random points.
#[test]
fn analytic_jacobian_matches_finite_differences_at_1000_points() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let obs = [(0.0, 0.0, 1.36), (4.0, 2.0, 1.0), (-3.0, -3.5, 0.8)];
    let f = build(&obs);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 1000 {
        let p = Vec2::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        if !clear_of(&obs, p, 0.2) {
            continue;
        }
        let j = f.eval_jacobian(p).unwrap();
        let e = |d: Vec2| {
            let a = f.eval_field(p + d).unwrap();
            let b = f.eval_field(p - d).unwrap();
            ((a.phi - b.phi) / (2.0 * h), (a.psi - b.psi) / (2.0 * h))
        };
        let (px, sx) = e(Vec2::new(h, 0.0));
        let (py, sy) = e(Vec2::new(0.0, h));
        let analytic = nalgebra::Vector4::new(j.dphi_dx, j.dphi_dy, j.dpsi_dx, j.dpsi_dy);
        let fd = nalgebra::Vector4::new(px, py, sx, sy);
        let rel = (analytic - fd).norm() / analytic.norm().max(1e-3);
        assert!(rel < 1e-5, "relative error {rel} at {p:?}");
        checked += 1;
    }
}

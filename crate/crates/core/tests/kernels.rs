use std::f64::consts::PI;

use adslab::geometry::BulkPoint;
use adslab::kernels::*;
use adslab::quad::{integrate, integrate_breaks, QuadConfig};
use adslab::special::sphere_area;
use adslab::{Branch, BoundaryTestFunction, Bump, SpectralParams};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Solves G'' + d coth(r) G' = m² G inward from large r with the decaying
/// boundary behaviour, then normalizes by the flux −ω_d sinh^d(r) G'(r) at r → 0.
fn shooting_propagator(d: usize, m2: f64, delta: f64, r_eval: f64) -> f64 {
    let omega = sphere_area(d + 1);
    let di = d as i32;
    // state (G, F) with F = −ω sinh^d G'
    let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] {
        let sh = r.sinh().powi(di);
        [-y[1] / (omega * sh), -omega * sh * m2 * y[0]]
    };
    let rk4 = |r: f64, y: [f64; 2], h: f64| -> [f64; 2] {
        let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
        let k1 = rhs(r, y);
        let k2 = rhs(r + h / 2.0, add(y, k1, h / 2.0));
        let k3 = rhs(r + h / 2.0, add(y, k2, h / 2.0));
        let k4 = rhs(r + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    // for Δ < d/2 the flux grows like e^{(d−Δ)r}; start closer in to keep the
    // final normalization free of cancellation
    let r_start = if delta < d as f64 / 2.0 { 8.0 } else { 25.0 };
    // G ≈ e^{−Δr}(1 + c e^{−2r}) with c = dΔ/(2Δ+2−d)
    let c = d as f64 * delta / (2.0 * delta + 2.0 - d as f64);
    let e = (-delta * r_start).exp();
    let x = (-2.0 * r_start).exp();
    let g0 = e * (1.0 + c * x);
    let dg0 = -e * (delta + (delta + 2.0) * c * x);
    let mut y = [g0, -omega * r_start.sinh().powi(di) * dg0];
    // linear steps down to r_eval
    let n = 200_000;
    let h = (r_eval - r_start) / n as f64;
    let mut r = r_start;
    for _ in 0..n {
        y = rk4(r, y, h);
        r += h;
    }
    let g_at = y[0];
    // logarithmic steps towards the origin: r = e^s
    let (s0, s1) = (r_eval.ln(), (1e-9f64).ln());
    let n = 200_000;
    let hs = (s1 - s0) / n as f64;
    let mut s = s0;
    let rhs_s = |s: f64, y: [f64; 2]| -> [f64; 2] {
        let r = s.exp();
        let k = rhs(r, y);
        [k[0] * r, k[1] * r]
    };
    for _ in 0..n {
        let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
        let k1 = rhs_s(s, y);
        let k2 = rhs_s(s + hs / 2.0, add(y, k1, hs / 2.0));
        let k3 = rhs_s(s + hs / 2.0, add(y, k2, hs / 2.0));
        let k4 = rhs_s(s + hs, add(y, k3, hs));
        y = [
            y[0] + hs / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + hs / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        s += hs;
    }
    g_at / y[1]
}

#[test]
fn propagator_matches_shooting_oracle() {
    for &(d, m2) in &[(2usize, -0.75), (1, 0.0), (3, 1.0), (1, 6.25)] {
        let p = SpectralParams::new(d, m2).unwrap();
        for &u in &[0.2, 1.0, 4.0] {
            let r = (1.0f64 + u).acosh();
            let oracle = shooting_propagator(d, m2, p.delta_plus, r);
            let g = bulk_propagator(u, &p, Branch::Plus).unwrap();
            assert!(rel(g, oracle) < 1e-6, "d={d} m2={m2} u={u}: {g} vs {oracle}");
        }
    }
}

#[test]
fn minus_branch_matches_shooting_oracle() {
    // Δ₋ solution decays as e^{−Δ₋ r} and is still normalizable for these cases
    let p = SpectralParams::new(2, -0.75).unwrap();
    let r = 2f64.acosh();
    let oracle = shooting_propagator(2, -0.75, p.delta_minus, r);
    let g = bulk_propagator(1.0, &p, Branch::Minus).unwrap();
    assert!(rel(g, oracle) < 1e-6, "{g} vs {oracle}");
}

#[test]
fn disjoint_bumps_match_position_space() {
    for &nu in &[0.3, 0.8, 1.5] {
        let p = SpectralParams::from_nu(1, nu).unwrap();
        let f = BoundaryTestFunction::bump(vec![0.0], 1.0, 1.0).unwrap();
        let g = BoundaryTestFunction::bump(vec![10.0], 1.0, 0.8).unwrap();
        let fourier = boundary_form(&f, &g, &p, Branch::Plus).unwrap();
        // direct double quadrature, excluding the band |x − y| < 1/2 where f·g ~ e^{−25}
        let cfg = QuadConfig::with_tols(0.0, 1e-10);
        let inner = |x: f64| {
            let mut k = |y: f64| {
                alpha_kernel(&[x], &[y], &p, Branch::Plus).unwrap() * g.eval(&[y])
            };
            let mut right = vec![x + 0.5];
            right.extend([5.0, 10.0, 25.0].into_iter().filter(|&b| b > x + 0.5));
            integrate_breaks(&mut k, &[-15.0, x - 0.5], cfg).value + integrate_breaks(&mut k, &right, cfg).value
        };
        let direct = integrate_breaks(&mut |x: f64| f.eval(&[x]) * inner(x), &[-10.0, 0.0, 5.0, 15.0], cfg).value;
        assert!(rel(fourier, direct) < 1e-4, "ν={nu}: {fourier} vs {direct}");
    }
}

#[test]
fn free_form_positive_when_weight_positive() {
    let p = SpectralParams::from_nu(1, 1.5).unwrap();
    assert!(fourier_constant(&p, Branch::Plus).unwrap() > 0.0);
    let f = BoundaryTestFunction::new(vec![
        Bump { center: vec![0.0], width: 0.5, amplitude: 1.0 },
        Bump { center: vec![1.2], width: 0.8, amplitude: -0.6 },
    ])
    .unwrap();
    assert!(boundary_form(&f, &f, &p, Branch::Plus).unwrap() > 0.0);
}

#[test]
fn alpha_plus_dilation_invariance() {
    let p = SpectralParams::new(2, 1.0).unwrap();
    let f = BoundaryTestFunction::new(vec![
        Bump { center: vec![0.3, 0.0], width: 0.4, amplitude: 1.0 },
        Bump { center: vec![-0.5, 0.7], width: 0.9, amplitude: 0.5 },
    ])
    .unwrap();
    let base = boundary_form(&f, &f, &p, Branch::Plus).unwrap();
    for &s in &[0.5, 2.0, 3.7] {
        let g = transform_source(&f, s, &p).unwrap();
        let v = boundary_form(&g, &g, &p, Branch::Plus).unwrap();
        assert!(rel(v, base) < 1e-4, "s={s}");
    }
}

#[test]
fn splitting_identity_holds() {
    let cfg = QuadConfig::with_tols(0.0, 1e-10);
    let cases: [(usize, f64); 2] = [(2, 0.5), (3, 0.7)];
    for &(d, nu) in &cases {
        let p = SpectralParams::from_nu(d, nu).unwrap();
        let pairs = [(1.0, 0.0, 1.0, 1.0), (0.5, 0.2, 2.0, -0.3), (1.0, 0.0, 0.3, 0.0), (2.0, 1.0, 1.5, -2.0)];
        for &(z1, x1, z2, x2) in &pairs {
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            a[0] = x1;
            b[0] = x2;
            let rep = splitting_report(&BulkPoint::new(z1, a).unwrap(), &BulkPoint::new(z2, b).unwrap(), &p, cfg).unwrap();
            assert!(rep.relative_residual.abs() < 1e-4, "d={d} ν={nu} {rep:?}");
        }
    }
}

#[test]
fn splitting_spec_case_and_refinement() {
    let p = SpectralParams::new(2, -0.75).unwrap();
    let a = BulkPoint::new(1.0, vec![0.0, 0.0]).unwrap();
    let b = BulkPoint::new(1.0, vec![1.0, 0.0]).unwrap();
    let rep = splitting_report(&a, &b, &p, QuadConfig::with_tols(0.0, 1e-10)).unwrap();
    assert!(rep.relative_residual.abs() < 1e-4, "{rep:?}");
    let levels = splitting_refinement(&a, &b, &p, &[2, 4, 8]).unwrap();
    let errs: Vec<f64> = levels.iter().map(|r| r.abs()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 1e-4, "{errs:?}");
    assert!(splitting_residual(&a, &a, &p, QuadConfig::default()).is_err());
    // 2ν ≥ d rejected
    let q = SpectralParams::from_nu(2, 1.2).unwrap();
    assert!(splitting_residual(&a, &b, &q, QuadConfig::default()).is_err());
}

#[test]
fn corr_routes_agree() {
    for &nu in &[0.3, 0.7, 1.4] {
        let p = SpectralParams::from_nu(1, nu).unwrap();
        let a = corr_coefficients(&p).unwrap();
        let b = corr_coefficients_direct(&p).unwrap();
        for (x, y) in a.a.iter().zip(&b.a) {
            assert!(rel(*x, *y) < 1e-6, "ν={nu}: {x} vs {y}");
        }
    }
}

#[test]
fn corr_subtraction_limit() {
    let p = SpectralParams::new(1, 0.0).unwrap();
    let coeffs = corr_coefficients(&p).unwrap();
    let f = BoundaryTestFunction::bump(vec![0.0], 1.0, 1.0).unwrap();
    let alpha = boundary_form(&f, &f, &p, Branch::Plus).unwrap();
    assert!((alpha + 1.0).abs() < 1e-10);
    let z = 1e-3;
    let g = equal_height_form(z, &f, &f, &p, Branch::Plus).unwrap();
    let subtracted = z.powf(-2.0 * p.delta_plus) * g - corr_form(z, &f, &coeffs).unwrap();
    assert!(rel(subtracted, alpha) < 1e-2, "{subtracted} vs {alpha}");
}

#[test]
fn smeared_small_z_behaviour() {
    let p = SpectralParams::new(1, 6.25).unwrap();
    let f = BoundaryTestFunction::bump(vec![0.0], 1.0, 1.0).unwrap();
    let zs = [1e-4, 1e-3, 1e-2];
    let vals: Vec<f64> = zs.iter().map(|&z| smeared_bulk_to_boundary(z, &[0.0], &f, &p).unwrap()).collect();
    let slope = (vals[2] / vals[0]).ln() / (zs[2] / zs[0]).ln();
    let want = p.d as f64 - p.delta_plus;
    assert!(((slope - want) / want).abs() < 1e-2, "{slope} vs {want}");
    let lead = smeared_leading_constant(&p) * zs[0].powf(want);
    assert!(rel(vals[0], lead) < 1e-3);
}

#[test]
fn poisson_normalization_by_quadrature() {
    let p = SpectralParams::new(1, 0.0).unwrap();
    assert!(rel(p.gamma_plus, 1.0 / PI) < 1e-14);
    let v = integrate(|t: f64| {
        let x = t / (1.0 - t * t);
        let jac = (1.0 + t * t) / (1.0 - t * t).powi(2);
        bulk_to_boundary(0.3, &[0.0], &[x], &p).unwrap() * jac
    }, -1.0, 1.0, QuadConfig::with_rel(1e-12))
    .value;
    assert!((v - 1.0).abs() < 1e-8);
}

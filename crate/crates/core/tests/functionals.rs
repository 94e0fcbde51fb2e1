use adslab::functionals::*;
use adslab::kernels::{boundary_form, transform_source};
use adslab::lattice::{build_model, LatticeModel, LatticeSpec};
use adslab::{BoundaryTestFunction, Branch, Error, SpectralParams};
use nalgebra::DMatrix;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn bump(c: f64, w: f64, a: f64) -> BoundaryTestFunction {
    BoundaryTestFunction::bump(vec![c], w, a).unwrap()
}

fn small_model(m2: f64) -> LatticeModel {
    build_model(LatticeSpec::new(0.2, 2.0, 1.0, 1, 8, 8, m2)).unwrap()
}

#[test]
fn free_field_value_and_normalization() {
    let p = SpectralParams::new(1, 6.25).unwrap();
    let m = small_model(6.25);
    let f = bump(0.1, 0.3, 0.4);
    let v = generating_c(&f, &m, &p, 0.0, 1000, 1).unwrap();
    let alpha = boundary_form(&f, &f, &p, Branch::Plus).unwrap();
    assert_eq!(v.mc_ratio, 1.0);
    assert!(rel(v.value, (0.5 * p.c * p.c * alpha).exp()) < 1e-14);
    let t = generating_tilde_c(&f, &m, &p, 0.0, 1000, 1).unwrap();
    assert!(rel(t.value, (0.5 * alpha).exp()) < 1e-14);

    let zero = BoundaryTestFunction::zero(1);
    for lambda in [0.0, 0.1] {
        assert_eq!(generating_c(&zero, &m, &p, lambda, 1000, 2).unwrap().value, 1.0);
        assert_eq!(generating_tilde_c(&zero, &m, &p, lambda, 1000, 2).unwrap().value, 1.0);
    }
}

#[test]
fn prefactor_through_the_inverted_minus_weight() {
    for (d, nu) in [(1usize, 0.3), (2, 0.5), (2, 0.8)] {
        let p = SpectralParams::from_nu(d, nu).unwrap();
        let f = BoundaryTestFunction::bump(vec![0.2; d], 0.6, 1.3).unwrap();
        let direct = log_prefactor(&f, &p).unwrap();
        let inverted = log_prefactor_inverted(&f, &p).unwrap();
        assert!(rel(inverted, direct) < 1e-6, "d={d} ν={nu}: {inverted} vs {direct}");
    }
    let p = SpectralParams::from_nu(1, 0.7).unwrap();
    assert!(log_prefactor_inverted(&bump(0.0, 1.0, 1.0), &p).is_err());
}

#[test]
fn duality_with_shared_seeds() {
    let p = SpectralParams::new(1, 6.25).unwrap();
    let m = small_model(6.25);
    let family = [
        bump(0.0, 0.3, 0.1),
        bump(0.4, 0.2, -0.15),
        BoundaryTestFunction::new(vec![
            adslab::Bump { center: vec![-0.3], width: 0.25, amplitude: 0.08 },
            adslab::Bump { center: vec![0.5], width: 0.4, amplitude: 0.05 },
        ])
        .unwrap(),
    ];
    for (i, f) in family.iter().enumerate() {
        let r = duality_check(f, &m, &p, 0.1, 10_000, 30 + i as u64).unwrap();
        assert!(r.agree, "{r:?}");
        assert!(r.c.mc_ratio != 1.0 && r.c.value > 0.0);
    }
}

#[test]
fn free_field_limit_of_the_subtracted_form() {
    let p = SpectralParams::from_nu(1, 0.5).unwrap();
    let f = bump(0.0, 1.0, 1.0);
    let coarse = free_field_limit(1e-2, &f, &p).unwrap();
    let fine = free_field_limit(1e-3, &f, &p).unwrap();
    assert!(fine.gap < 1e-2, "{fine:?}");
    assert!(fine.gap < coarse.gap);
}

#[test]
fn conformal_covariance_of_the_free_functional() {
    let p = SpectralParams::new(1, 6.25).unwrap();
    let f = bump(0.3, 0.5, 0.7);
    let base = log_prefactor(&f, &p).unwrap();
    for s in [0.5, 2.0, 3.7] {
        let g = transform_source(&f, s, &p).unwrap();
        assert!(rel(log_prefactor(&g, &p).unwrap(), base) < 1e-6, "s={s}");
    }
}

#[test]
fn gaussian_conditioning_is_exact() {
    for (nb, nd, seed) in [(1, 1, 1u64), (2, 2, 2), (3, 2, 3), (3, 1, 4)] {
        let f: Vec<f64> = (0..nd).map(|i| 0.7 - 0.9 * i as f64).collect();
        let r = finite_dim_conditioning_check(nb, nd, 0.0, &f, seed).unwrap();
        assert!(r < 1e-10, "({nb},{nd}): {r:e}");
    }
}

#[test]
fn quartic_conditioning_identity() {
    let f = [0.8];
    for seed in 1..4 {
        let r1 = finite_dim_conditioning_check(1, 1, 0.5, &f, seed).unwrap();
        let r2 = finite_dim_conditioning_check(1, 1, 0.5, &[2.0 * f[0]], seed).unwrap();
        assert!(r1 < 1e-6 && r2 < 1e-6, "seed {seed}: {r1:e} {r2:e}");
    }
    let prob = ConditioningProblem::random(3, 2, 9).unwrap();
    let rep = prob.check(0.2, &[0.5, -0.4]).unwrap();
    assert!(rep.residual < 1e-6, "{rep:?}");
    assert!(rep.closed_form > 0.0 && rep.closed_form != 1.0);
}

#[test]
fn conditioning_preconditions() {
    let g = DMatrix::identity(1, 1);
    let k = DMatrix::from_element(1, 2, 1.0);
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-10]);
    assert!(matches!(ConditioningProblem::new(g.clone(), k.clone(), bad), Err(Error::InvalidInput(_))));
    let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert!(ConditioningProblem::new(g, k, singular).is_err());
    assert!(matches!(finite_dim_conditioning_check(4, 1, 0.0, &[1.0], 1), Err(Error::Budget(_))));
    assert!(matches!(finite_dim_conditioning_check(1, 3, 0.0, &[1.0; 3], 1), Err(Error::Budget(_))));
    assert!(finite_dim_conditioning_check(1, 2, 0.0, &[1.0], 1).is_err());
}

#[test]
fn renormalized_functional_limits() {
    let p = SpectralParams::new(1, 6.25).unwrap();
    assert_eq!(renormalized_functional(&BoundaryTestFunction::zero(1), &p, 0.3).unwrap(), 1.0);
    let f = bump(0.0, 0.3, 1.0);
    let free = (0.5 * boundary_form(&f, &f, &p, Branch::Plus).unwrap()).exp();
    assert_eq!(renormalized_functional(&f, &p, 0.0).unwrap(), free);
    assert!(renormalized_functional(&f, &p, 0.5).unwrap() < free);
    assert!(renormalized_functional(&f, &p, -1.0).is_err());
    // Δ₊ < 3d/4: nothing diverges
    assert!(renormalization_constant(&SpectralParams::from_nu(4, 0.5).unwrap()).is_err());
}

#[test]
fn renormalized_energy_converges() {
    let p = SpectralParams::new(1, 6.25).unwrap();
    let f = bump(0.0, 0.3, 1.0);
    let r = renormalization_check(1e-3, &f, &p, 0.1, 1.0, 2.0).unwrap();
    assert!(r.relative_gap < 0.03, "{r:?}");
}

fn corners(w: f64) -> Vec<BoundaryTestFunction> {
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|&(x, y)| BoundaryTestFunction::bump(vec![x, y], w, 1.0).unwrap())
        .collect()
}

#[test]
fn witten_integral_converges_and_is_symmetric() {
    let p = SpectralParams::new(2, 0.0).unwrap();
    let fs = corners(0.1);
    let q = WittenQuad::default();
    let r = witten_4pt([&fs[0], &fs[1], &fs[2], &fs[3]], &p, &q).unwrap();
    assert!(r.refinement_error < 1e-2, "{r:?}");
    assert!(r.value > 0.0 && r.small_z_exponent > 0.0);
    let s = witten_4pt([&fs[2], &fs[0], &fs[3], &fs[1]], &p, &q).unwrap();
    assert_eq!(r.value.to_bits(), s.value.to_bits());
}

#[test]
fn witten_rejects_overlapping_sources() {
    let p = SpectralParams::new(2, 0.0).unwrap();
    let fs = corners(0.3);
    let e = witten_4pt([&fs[0], &fs[1], &fs[2], &fs[3]], &p, &WittenQuad::default());
    assert!(matches!(e, Err(Error::InvalidInput(_))));
}

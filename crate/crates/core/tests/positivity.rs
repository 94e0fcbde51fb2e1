use adslab::lattice::{build_model, LatticeModel, LatticeSpec};
use adslab::positivity::*;
use adslab::{BoundaryTestFunction, Branch, Error, SpectralParams};

fn b(c: Vec<f64>, w: f64, a: f64) -> BoundaryTestFunction {
    BoundaryTestFunction::bump(c, w, a).unwrap()
}

// ν = 3/2: α̂₊ > 0, so the free functional is a Gaussian characteristic
fn free() -> FreeFunctional {
    FreeFunctional { params: SpectralParams::from_nu(1, 1.5).unwrap() }
}

fn mixed_family() -> Vec<BoundaryTestFunction> {
    vec![
        b(vec![0.0], 0.5, 1.0),
        b(vec![0.7], 0.3, -0.8),
        b(vec![-1.0], 0.8, 0.5),
        b(vec![2.0], 0.4, 1.2),
    ]
}

#[test]
fn free_functional_is_stochastically_positive() {
    let r = gram_stochastic(&free(), &mixed_family()).unwrap();
    assert!(r.psd && r.min_eigenvalue >= -1e-10 * r.max_eigenvalue, "{r:?}");
    assert!(r.asymmetry < 1e-12);
    for row in 0..4 {
        for col in 0..4 {
            assert_eq!(r.gram[row][col], r.gram[col][row]);
        }
    }
}

#[test]
fn single_member_gram() {
    let r = gram_stochastic(&free(), &[b(vec![0.3], 0.4, 2.0)]).unwrap();
    assert_eq!(r.gram.len(), 1);
    assert!(r.psd && r.min_eigenvalue > 0.0);
    let f = b(vec![1.0], 0.1, 1.0);
    let rp = gram_reflection(&free(), &[f]).unwrap();
    assert!(rp.psd && rp.gram[0][0] > 0.0);
}

#[test]
fn verdict_survives_rescaling_for_gaussian_functionals() {
    for s in [0.25, 0.5, 2.0] {
        let fam: Vec<_> = mixed_family().iter().map(|f| f.scaled(s)).collect();
        assert!(gram_stochastic(&free(), &fam).unwrap().psd, "s={s}");
    }
    let minus = GaussianFunctional { params: SpectralParams::from_nu(2, 1.5).unwrap(), branch: Branch::Minus };
    let pair = [b(vec![0.5, 0.0], 0.08, 1.0), b(vec![0.5, 2.0], 0.08, 1.0)];
    for s in [0.5, 1.0, 2.0] {
        let fam: Vec<_> = pair.iter().map(|f| f.scaled(s)).collect();
        assert!(!gram_reflection(&minus, &fam).unwrap().psd, "s={s}");
    }
}

#[test]
fn renormalized_functional_is_not_stochastically_positive() {
    let params = SpectralParams::from_nu(1, 1.5).unwrap();
    let pool: Vec<_> = [0.0, 0.5, 1.0, -1.0, 2.0]
        .iter()
        .map(|&a| if a == 0.0 { BoundaryTestFunction::zero(1) } else { b(vec![0.0], 0.3, a) })
        .collect();
    let weak = RenormalizedFunctional { params: params.clone(), lambda: 0.1 };
    assert!(search_witness(&weak, &pool, 3, false).unwrap().is_none());
    let strong = RenormalizedFunctional { params, lambda: 10.0 };
    let w = search_witness(&strong, &pool, 3, false).unwrap().expect("a witness family");
    assert!(!w.psd && w.min_eigenvalue < -1e-10 * w.max_eigenvalue);
    assert_eq!(w.family.len(), 3);
    // the reported family reproduces the negative eigenvalue
    let fam: Vec<_> = w
        .family
        .iter()
        .map(|s| match s {
            Source::Boundary(f) => f.clone(),
            Source::Sites(_) => unreachable!(),
        })
        .collect();
    assert_eq!(gram_stochastic(&strong, &fam).unwrap().min_eigenvalue, w.min_eigenvalue);
}

#[test]
fn free_functional_is_reflection_positive_below_the_bound() {
    for nu in [0.3, 0.5, 0.8] {
        let f = FreeFunctional { params: SpectralParams::from_nu(1, nu).unwrap() };
        let r = gram_reflection(&f, &[b(vec![1.0], 0.15, 1.0), b(vec![2.0], 0.15, 1.0)]).unwrap();
        assert!(r.psd && r.asymmetry < 1e-12, "ν={nu}: {r:?}");
    }
}

#[test]
fn unitarity_bound_witness() {
    let minus = GaussianFunctional { params: SpectralParams::from_nu(2, 1.5).unwrap(), branch: Branch::Minus };
    let mut pool = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        for h in [0.0, 1.0, 2.0] {
            pool.push(b(vec![a, h], 0.08, 1.0));
        }
    }
    let w = search_witness(&minus, &pool, 2, true).unwrap().expect("a unitarity-bound witness");
    assert!(w.min_eigenvalue < -1e-10 * w.max_eigenvalue, "{w:?}");
    // below the bound the same pool has no witness
    let below = GaussianFunctional { params: SpectralParams::from_nu(2, 0.7).unwrap(), branch: Branch::Minus };
    assert!(search_witness(&below, &pool, 2, true).unwrap().is_none());
}

#[test]
fn unitarity_transition_is_bracketed() {
    let pair = [b(vec![0.5, 0.0], 0.08, 1.0), b(vec![2.0, 0.0], 0.08, 1.0)];
    let scan = unitarity_scan(2, &[0.9, 0.95, 0.99, 1.01, 1.05, 1.1], &pair).unwrap();
    let signs: Vec<bool> = scan.iter().map(|(_, r)| r.psd).collect();
    assert_eq!(signs, [true, true, true, false, false, false]);
}

#[test]
fn reflection_support_is_checked() {
    let f = FreeFunctional { params: SpectralParams::from_nu(1, 0.5).unwrap() };
    let e = gram_reflection(&f, &[b(vec![0.2], 0.15, 1.0)]);
    assert!(matches!(e, Err(Error::InvalidInput(_))));
    assert!(gram_reflection(&f, &[b(vec![-1.0], 0.1, 1.0)]).is_err());
    assert!(gram_stochastic(&f, &vec![b(vec![0.0], 1.0, 1.0); 7]).is_err());
}

fn rp_model() -> LatticeModel {
    build_model(LatticeSpec::new(0.2, 5.0, 1.5, 1, 16, 16, 6.25)).unwrap()
}

fn bulk_family(m: &LatticeModel) -> Vec<Vec<(usize, f64)>> {
    let half = m.positive_half();
    vec![
        vec![(half[3], 0.5)],
        vec![(half[20], 0.5)],
        vec![(half[40], -0.4), (half[41], 0.3)],
        vec![(half[60], 0.6)],
    ]
}

#[test]
fn lattice_reflection_positivity_free_and_perturbed() {
    let m = rp_model();
    let fam = bulk_family(&m);
    let exact = perturbed_rp_gram(&m, 0.0, &fam, 0, 0).unwrap();
    assert!(exact.psd && exact.stderr.is_none(), "{exact:?}");
    let mc = perturbed_rp_gram(&m, 0.1, &fam, 10_000, 5).unwrap();
    let se = mc.stderr.unwrap();
    assert!(se > 0.0 && mc.min_eigenvalue >= -3.0 * se, "{mc:?}");
    assert!(mc.psd);
}

#[test]
fn lattice_reflection_preconditions() {
    let m = rp_model();
    let neg: Vec<usize> = (0..m.len()).filter(|&s| m.sites[s].x[0] < 0.0).collect();
    assert!(perturbed_rp_gram(&m, 0.0, &[vec![(neg[0], 1.0)]], 0, 0).is_err());
    let odd = build_model(LatticeSpec::new(0.2, 5.0, 1.5, 1, 8, 9, 6.25)).unwrap();
    let site = odd.positive_half()[0];
    assert!(matches!(perturbed_rp_gram(&odd, 0.0, &[vec![(site, 1.0)]], 0, 0), Err(Error::InvalidInput(_))));
}

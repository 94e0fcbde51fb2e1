//! Lattice free field on the cut-off region [z₀, A] × [−l, l]^d.
//!
//! Sites sit on a grid that is geometric in z and uniform in x, with
//! Dirichlet conditions on every face. The operator is the finite-difference
//! form of −Δ_g + m² in the coordinates (t = ln z, x); its inverse is the
//! lattice covariance that stands in for G₊.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::ops::serial::spsolve_csc_lower_triangular;
use nalgebra_sparse::ops::Op;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chordal_u, BulkPoint};
use crate::kernels::bulk_propagator;
use crate::params::{Branch, SpectralParams};

pub const DEFAULT_MAX_SITES: usize = 4096;

/// Exact eigenvalues are computed up to this many sites; above it the
/// reported minimum is the Gershgorin lower bound 1/max_i Σ_j |K_ij|.
const EXACT_EIGEN_SITES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub z0: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub l: f64,
    pub d: usize,
    pub n_z: usize,
    pub n_x: usize,
    pub m2: f64,
    #[serde(default = "default_max_sites")]
    pub max_sites: usize,
}

fn default_max_sites() -> usize {
    DEFAULT_MAX_SITES
}

impl LatticeSpec {
    pub fn new(z0: f64, a: f64, l: f64, d: usize, n_z: usize, n_x: usize, m2: f64) -> Self {
        LatticeSpec { z0, a, l, d, n_z, n_x, m2, max_sites: DEFAULT_MAX_SITES }
    }

    pub fn site_count(&self) -> usize {
        self.n_x.checked_pow(self.d as u32).and_then(|p| p.checked_mul(self.n_z)).unwrap_or(usize::MAX)
    }

    /// Spacing in t = ln z.
    pub fn h_t(&self) -> f64 {
        (self.a / self.z0).ln() / (self.n_z + 1) as f64
    }

    pub fn h_x(&self) -> f64 {
        2.0 * self.l / (self.n_x + 1) as f64
    }

    /// z of layer i (0-based); the Dirichlet faces are layers −1 and n_z.
    pub fn layer_z(&self, i: usize) -> f64 {
        self.z0 * ((i + 1) as f64 * self.h_t()).exp()
    }

    pub fn x_coord(&self, j: usize) -> f64 {
        -self.l + (j + 1) as f64 * self.h_x()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z0 > 0.0 && self.z0 < self.a && self.a.is_finite()) {
            return Err(Error::invalid(format!("lattice needs 0 < z0 < A (z0 = {}, A = {})", self.z0, self.a)));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::invalid("lattice needs l > 0"));
        }
        if self.d == 0 {
            return Err(Error::invalid("lattice needs d ≥ 1"));
        }
        if self.n_z < 2 || self.n_x < 2 {
            return Err(Error::invalid("lattice needs n_z ≥ 2 and n_x ≥ 2"));
        }
        let floor = -((self.d * self.d) as f64) / 4.0;
        if !(self.m2 > floor) {
            return Err(Error::invalid(format!("m² = {} is not above {floor}", self.m2)));
        }
        let n = self.site_count();
        if n > self.max_sites {
            return Err(Error::Budget(format!("{n} sites exceed the budget of {}", self.max_sites)));
        }
        Ok(())
    }
}

/// Lattice model; immutable once built.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub spec: LatticeSpec,
    pub sites: Vec<BulkPoint>,
    /// Hyperbolic volume of each site's cell. Cells tile Λ(z₀): interior
    /// cells are [z e^{∓h_t/2}] × [x ∓ h_x/2]^d and the outermost ones reach
    /// the faces, so Σ weights = |Λ(z₀)|.
    pub weights: Vec<f64>,
    pub operator: CscMatrix<f64>,
    pub covariance: DMatrix<f64>,
    /// Cholesky factor L of the site-reversed operator P K P = L Lᵀ. The
    /// covariance factor is F = P L^{−T} P: lower triangular, F Fᵀ = C.
    pub factor: CscMatrix<f64>,
    pub wick_diag: Vec<f64>,
    pub c_kappa: f64,
    pub min_eigenvalue: f64,
    /// True when `min_eigenvalue` is exact rather than a lower bound.
    pub min_eigenvalue_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatch {
    pub i: usize,
    pub j: usize,
    pub lattice: f64,
    pub continuum: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumMatch {
    pub pairs: Vec<PairMatch>,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub spec: LatticeSpec,
    pub sites: usize,
    pub c_kappa: f64,
    pub min_eigenvalue: f64,
    pub min_eigenvalue_exact: bool,
    pub continuum_match: Option<ContinuumMatch>,
}

/// Multi-index (layer, x₁, …, x_d) of a site; x₁ varies slowest.
fn unflatten(spec: &LatticeSpec, mut s: usize) -> (usize, Vec<usize>) {
    let mut xs = vec![0; spec.d];
    for k in (0..spec.d).rev() {
        xs[k] = s % spec.n_x;
        s /= spec.n_x;
    }
    (s, xs)
}

fn flatten(spec: &LatticeSpec, layer: usize, xs: &[usize]) -> usize {
    xs.iter().fold(layer, |acc, &j| acc * spec.n_x + j)
}

fn assemble(spec: &LatticeSpec) -> (Vec<BulkPoint>, Vec<f64>, CooMatrix<f64>) {
    let n = spec.site_count();
    let d = spec.d as i32;
    let (ht, hx) = (spec.h_t(), spec.h_x());
    let cell = ht * hx.powi(d);
    let mut sites = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut diag = vec![0.0; n];
    let mut coo = CooMatrix::new(n, n);
    for s in 0..n {
        let (i, xs) = unflatten(spec, s);
        let z = spec.layer_z(i);
        sites.push(BulkPoint { z, x: xs.iter().map(|&j| spec.x_coord(j)).collect() });
        let lo = if i == 0 { spec.z0 } else { z * (-0.5 * ht).exp() };
        let hi = if i + 1 == spec.n_z { spec.a } else { z * (0.5 * ht).exp() };
        let widths: f64 = xs.iter().map(|&j| if j == 0 || j + 1 == spec.n_x { 1.5 * hx } else { hx }).product();
        weights.push((lo.powi(-d) - hi.powi(-d)) / d as f64 * widths);
        diag[s] += spec.m2 * z.powi(-d) * cell;
        // t-edges to the layer above and below, coupling at the geometric midpoint
        for (up, exists) in [(true, i + 1 < spec.n_z), (false, i > 0)] {
            let zm = z * (if up { 0.5 } else { -0.5 } * ht).exp();
            let c = zm.powi(-d) / ht * hx.powi(d);
            diag[s] += c;
            if exists && up {
                let t = flatten(spec, i + 1, &xs);
                coo.push(s, t, -c);
                coo.push(t, s, -c);
            }
        }
        // x-edges in each direction
        let c = z.powi(2 - d) * ht * hx.powi(d - 2);
        for k in 0..spec.d {
            diag[s] += 2.0 * c;
            if xs[k] + 1 < spec.n_x {
                let mut ys = xs.clone();
                ys[k] += 1;
                let t = flatten(spec, i, &ys);
                coo.push(s, t, -c);
                coo.push(t, s, -c);
            }
        }
    }
    for (s, v) in diag.into_iter().enumerate() {
        coo.push(s, s, v);
    }
    (sites, weights, coo)
}

fn reverse_operator(k: &CscMatrix<f64>) -> CscMatrix<f64> {
    let n = k.nrows();
    let mut coo = CooMatrix::new(n, n);
    for (i, j, v) in k.triplet_iter() {
        coo.push(n - 1 - i, n - 1 - j, *v);
    }
    CscMatrix::from(&coo)
}

/// Upper bound on the largest eigenvalue of K by Gershgorin's theorem.
fn gershgorin_max(k: &CscMatrix<f64>) -> f64 {
    let mut rows = vec![0.0; k.nrows()];
    for (i, _, v) in k.triplet_iter() {
        rows[i] += v.abs();
    }
    rows.into_iter().fold(0.0, f64::max)
}

pub fn build_model(spec: LatticeSpec) -> Result<LatticeModel> {
    spec.validate()?;
    let n = spec.site_count();
    let (sites, weights, coo) = assemble(&spec);
    let operator = CscMatrix::from(&coo);
    let factor = CscCholesky::factor(&reverse_operator(&operator))
        .map_err(|e| Error::Singular(format!("lattice operator is not positive definite ({e:?})")))?
        .take_l();
    // X = (P K P)⁻¹ and C = P X P
    let mut covariance = DMatrix::<f64>::identity(n, n);
    spsolve_csc_lower_triangular(Op::NoOp(&factor), &mut covariance)
        .and_then(|_| spsolve_csc_lower_triangular(Op::Transpose(&factor), &mut covariance))
        .map_err(|e| Error::Singular(format!("triangular solve failed: {e:?}")))?;
    let covariance = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (covariance[(n - 1 - i, n - 1 - j)], covariance[(n - 1 - j, n - 1 - i)]);
        0.5 * (a + b)
    });
    let wick_diag: Vec<f64> = (0..n).map(|i| covariance[(i, i)]).collect();
    let c_kappa = covariance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (min_eigenvalue, min_eigenvalue_exact) = if n <= EXACT_EIGEN_SITES {
        let ev = SymmetricEigen::new(covariance.clone()).eigenvalues;
        (ev.iter().cloned().fold(f64::INFINITY, f64::min), true)
    } else {
        (1.0 / gershgorin_max(&operator), false)
    };
    if !(min_eigenvalue > 0.0) {
        return Err(Error::Singular(format!("lattice covariance has eigenvalue {min_eigenvalue}")));
    }
    Ok(LatticeModel {
        spec,
        sites,
        weights,
        operator,
        covariance,
        factor,
        wick_diag,
        c_kappa,
        min_eigenvalue,
        min_eigenvalue_exact,
    })
}

impl LatticeModel {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    /// F ξ, with F the lower-triangular covariance factor.
    pub fn apply_factor(&self, xi: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut v = DVector::from_iterator(n, xi.iter().rev().cloned());
        spsolve_csc_lower_triangular(Op::Transpose(&self.factor), &mut v)
            .expect("factor has a nonzero diagonal by construction");
        v.iter().rev().cloned().collect()
    }

    /// Dense F; quadratic in memory, meant for checks on small lattices.
    pub fn factor_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut f = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            f.set_column(j, &DVector::from_vec(self.apply_factor(&e)));
        }
        f
    }

    /// Site index of the mirror image under x₁ → −x₁.
    pub fn reflection_map(&self) -> Result<Vec<usize>> {
        let spec = &self.spec;
        let map: Vec<usize> = (0..self.len())
            .map(|s| {
                let (i, mut xs) = unflatten(spec, s);
                xs[0] = spec.n_x - 1 - xs[0];
                flatten(spec, i, &xs)
            })
            .collect();
        for (s, &t) in map.iter().enumerate() {
            let (p, q) = (&self.sites[s], &self.sites[t]);
            if (p.x[0] + q.x[0]).abs() > 1e-12 * spec.l || p.z != q.z {
                return Err(Error::invalid("lattice is not symmetric under x₁ → −x₁"));
            }
        }
        Ok(map)
    }

    /// Sites with x₁ > 0.
    pub fn positive_half(&self) -> Vec<usize> {
        (0..self.len()).filter(|&s| self.sites[s].x[0] > 0.0).collect()
    }

    /// Σ over sites of w(x)·g(x).
    pub fn integrate<F: Fn(usize) -> f64>(&self, g: F) -> f64 {
        self.weights.iter().enumerate().map(|(s, w)| w * g(s)).sum()
    }

    /// Lattice vs continuum G₊ at the given site pairs.
    pub fn continuum_match(&self, pairs: &[(usize, usize)]) -> Result<ContinuumMatch> {
        let params = SpectralParams::new(self.spec.d, self.spec.m2)?;
        let mut out = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            if i >= self.len() || j >= self.len() {
                return Err(Error::invalid(format!("site pair ({i}, {j}) out of range")));
            }
            let u = chordal_u(&self.sites[i], &self.sites[j])?;
            if u == 0.0 {
                return Err(Error::invalid("continuum match needs distinct sites"));
            }
            let continuum = bulk_propagator(u, &params, Branch::Plus)?;
            let lattice = self.covariance[(i, j)];
            out.push(PairMatch { i, j, lattice, continuum, relative_error: (lattice / continuum - 1.0).abs() });
        }
        let max_relative_error = out.iter().map(|p| p.relative_error).fold(0.0, f64::max);
        Ok(ContinuumMatch { pairs: out, max_relative_error })
    }

    /// Site closest to `p` in the (ln z, x) grid metric.
    pub fn nearest_site(&self, p: &BulkPoint) -> usize {
        let spec = &self.spec;
        let dist = |s: &BulkPoint| {
            let dt = (s.z / p.z).ln() / spec.h_t();
            dt * dt + s.x.iter().zip(&p.x).map(|(a, b)| ((a - b) / spec.h_x()).powi(2)).sum::<f64>()
        };
        (0..self.len())
            .min_by(|&a, &b| dist(&self.sites[a]).total_cmp(&dist(&self.sites[b])))
            .unwrap_or(0)
    }

    /// Site pairs around the middle of the box, a few lattice steps apart
    /// along z and along x₁.
    pub fn central_pairs(&self) -> Vec<(usize, usize)> {
        let spec = &self.spec;
        let mid: Vec<usize> = vec![spec.n_x / 2; spec.d];
        let ci = spec.n_z / 2;
        let c = flatten(spec, ci, &mid);
        let mut pairs = Vec::new();
        for step in [2usize, 3] {
            if ci + step < spec.n_z {
                pairs.push((c, flatten(spec, ci + step, &mid)));
            }
            if ci >= step {
                pairs.push((c, flatten(spec, ci - step, &mid)));
            }
            if mid[0] + step < spec.n_x {
                let mut xs = mid.clone();
                xs[0] += step;
                pairs.push((c, flatten(spec, ci, &xs)));
            }
        }
        pairs
    }

    pub fn summary(&self, with_match: bool) -> Result<LatticeSummary> {
        let continuum_match = if with_match { Some(self.continuum_match(&self.central_pairs())?) } else { None };
        Ok(LatticeSummary {
            spec: self.spec.clone(),
            sites: self.len(),
            c_kappa: self.c_kappa,
            min_eigenvalue: self.min_eigenvalue,
            min_eigenvalue_exact: self.min_eigenvalue_exact,
            continuum_match,
        })
    }
}

/// Random stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample `index`: F ξ with ξ standard normal from the (seed, index) stream.
pub fn sample_field(model: &LatticeModel, seed: u64, index: u64) -> FieldSample {
    let mut rng = sample_rng(seed, index);
    let xi: Vec<f64> = (0..model.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    FieldSample { values: model.apply_factor(&xi), seed, index }
}

pub fn sample_fields(model: &LatticeModel, seed: u64, n: usize) -> Result<Vec<FieldSample>> {
    if n == 0 {
        return Err(Error::invalid("sample_fields needs n ≥ 1"));
    }
    Ok((0..n as u64).into_par_iter().map(|i| sample_field(model, seed, i)).collect())
}

/// Wick-ordered power :vⁿ: with respect to variance c (Hermite recursion).
pub fn wick_power(v: f64, c: f64, n: usize) -> f64 {
    let (mut prev, mut cur) = (1.0, v);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let next = v * cur - k as f64 * c * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Per-site constant B in :φ⁴: ≥ −B C².
pub const WICK4_LOWER: f64 = 6.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn small(m2: f64) -> LatticeSpec {
        LatticeSpec::new(0.1, 10.0, 2.0, 1, 6, 6, m2)
    }

    #[test]
    fn wick_values() {
        assert_eq!(wick_power(0.0, 1.0, 4), 3.0);
        assert_eq!(wick_power(1.0, 1.0, 4), -2.0);
        assert_eq!(wick_power(2.0, 0.5, 3), 8.0 - 3.0);
        assert_eq!(wick_power(0.7, 2.0, 0), 1.0);
        let c: f64 = 1.7;
        let vmin = (3.0 * c).sqrt();
        assert!((wick_power(vmin, c, 4) + WICK4_LOWER * c * c).abs() < 1e-12);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let m = build_model(small(1.0)).unwrap();
        let f = m.factor_matrix();
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                assert_eq!(f[(i, j)], 0.0);
            }
        }
        let r = (&f * f.transpose() - &m.covariance).abs().max();
        assert!(r < 1e-10 * m.c_kappa, "{r}");
        let kc = DMatrix::from(&m.operator) * &m.covariance;
        assert!((kc - DMatrix::identity(m.len(), m.len())).abs().max() < 1e-10);
    }

    #[test]
    fn budget_and_validation() {
        let mut s = small(1.0);
        s.max_sites = 10;
        assert!(matches!(build_model(s), Err(Error::Budget(_))));
        assert!(build_model(LatticeSpec::new(1.0, 0.5, 1.0, 1, 4, 4, 0.0)).is_err());
        assert!(build_model(LatticeSpec::new(0.1, 1.0, 1.0, 1, 4, 4, -0.25)).is_err());
    }

    #[test]
    fn reflection_is_an_involution() {
        let m = build_model(small(0.0)).unwrap();
        let r = m.reflection_map().unwrap();
        for s in 0..m.len() {
            assert_eq!(r[r[s]], s);
            for t in 0..m.len() {
                assert!((m.covariance[(r[s], r[t])] - m.covariance[(s, t)]).abs() < 1e-12 * m.c_kappa);
            }
        }
        assert_eq!(m.positive_half().len(), m.len() / 2);
    }

    #[test]
    fn weights_tile_the_region() {
        for spec in [small(1.0), LatticeSpec::new(0.2, 5.0, 1.0, 2, 4, 4, 2.0)] {
            let m = build_model(spec.clone()).unwrap();
            let d = spec.d as i32;
            let vol = (2.0 * spec.l).powi(d) * (spec.z0.powi(-d) - spec.a.powi(-d)) / spec.d as f64;
            let total: f64 = m.weights.iter().sum();
            assert!((total / vol - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_boundary() {
        let m = build_model(LatticeSpec::new(0.2, 5.0, 1.0, 2, 4, 4, 2.0)).unwrap();
        assert_eq!(m.len(), 64);
        assert!(m.min_eigenvalue > 0.0 && m.min_eigenvalue_exact);
        assert_eq!(m.reflection_map().unwrap().len(), 64);
    }
}

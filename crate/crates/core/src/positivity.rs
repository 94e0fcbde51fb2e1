//! Gram-matrix certificates of stochastic positivity, reflection positivity
//! and the unitarity bound, for boundary functionals and for the
//! interacting lattice measure.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{free_log_prefactor, renormalized_log};
use crate::interaction::potential_region;
use crate::kernels::boundary_form_continued;
use crate::lattice::{sample_field, LatticeModel};
use crate::params::{BoundaryTestFunction, Branch, SpectralParams};

/// Deterministic PSD tolerance, relative to the largest eigenvalue.
pub const PSD_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Statistical PSD tolerance in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
pub const MAX_FAMILY: usize = 6;
/// A bump counts as supported in {x₁ > 0} when its centre lies this many
/// widths from the plane.
pub const RP_SUPPORT_WIDTHS: f64 = 6.0;

/// f ↦ ln F(f) for a boundary functional F.
pub trait BoundaryFunctional: Sync {
    fn log_value(&self, f: &BoundaryTestFunction) -> Result<f64>;
    fn describe(&self) -> String;
}

/// e^{½α₊(f,f)}.
#[derive(Debug, Clone)]
pub struct FreeFunctional {
    pub params: SpectralParams,
}

impl BoundaryFunctional for FreeFunctional {
    fn log_value(&self, f: &BoundaryTestFunction) -> Result<f64> {
        free_log_prefactor(f, &self.params)
    }
    fn describe(&self) -> String {
        format!("free e^(alpha+/2), d={}, nu={}", self.params.d, self.params.nu)
    }
}

/// e^{½α₊(f,f) − λC∫f⁴}.
#[derive(Debug, Clone)]
pub struct RenormalizedFunctional {
    pub params: SpectralParams,
    pub lambda: f64,
}

impl BoundaryFunctional for RenormalizedFunctional {
    fn log_value(&self, f: &BoundaryTestFunction) -> Result<f64> {
        renormalized_log(f, &self.params, self.lambda)
    }
    fn describe(&self) -> String {
        format!("renormalized, d={}, nu={}, lambda={}", self.params.d, self.params.nu, self.lambda)
    }
}

/// e^{½α(f,f)} for either branch, with |k|^{−2ν} continued past 2ν < d.
#[derive(Debug, Clone)]
pub struct GaussianFunctional {
    pub params: SpectralParams,
    pub branch: Branch,
}

impl BoundaryFunctional for GaussianFunctional {
    fn log_value(&self, f: &BoundaryTestFunction) -> Result<f64> {
        Ok(0.5 * boundary_form_continued(f, f, &self.params, self.branch)?)
    }
    fn describe(&self) -> String {
        let b = match self.branch {
            Branch::Plus => "alpha+",
            Branch::Minus => "alpha-",
        };
        format!("gaussian e^({b}/2), d={}, nu={}", self.params.d, self.params.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Boundary(BoundaryTestFunction),
    /// Σ a_s φ(s) over lattice sites.
    Sites(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub functional: String,
    pub family: Vec<Source>,
    pub gram: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub psd: bool,
    pub tol: f64,
    /// max|G − Gᵀ| / max|G| before symmetrization.
    pub asymmetry: f64,
    /// Standard error of the smallest eigenvalue, for Monte-Carlo Grams.
    pub stderr: Option<f64>,
    /// Eigenvector of the smallest eigenvalue: the z_j of the most negative
    /// combination Σ z_j z_l G_jl.
    pub witness: Vec<f64>,
}

impl GramReport {
    /// λ_min / λ_max, the scale-free verdict.
    pub fn relative_min(&self) -> f64 {
        self.min_eigenvalue / self.max_eigenvalue.abs()
    }
}

fn report(functional: String, family: Vec<Source>, raw: DMatrix<f64>, stderr: Option<f64>) -> Result<GramReport> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("Gram entry overflow", f64::INFINITY));
    }
    let scale = raw.amax();
    let asymmetry = if scale > 0.0 { (&raw - raw.transpose()).amax() / scale } else { 0.0 };
    if stderr.is_none() && asymmetry > SYMMETRY_TOL {
        return Err(Error::numerical("Gram matrix is not symmetric", asymmetry));
    }
    let gram = (&raw + raw.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gram.clone());
    let imin = eig.eigenvalues.imin();
    let (min_eigenvalue, max_eigenvalue) = (eig.eigenvalues[imin], eig.eigenvalues.max());
    let psd = match stderr {
        Some(se) => min_eigenvalue >= -MC_SIGMAS * se,
        None => min_eigenvalue >= -PSD_TOL * max_eigenvalue.abs(),
    };
    Ok(GramReport {
        functional,
        family,
        gram: gram.row_iter().map(|r| r.iter().copied().collect()).collect(),
        min_eigenvalue,
        max_eigenvalue,
        psd,
        tol: if stderr.is_some() { MC_SIGMAS } else { PSD_TOL },
        asymmetry,
        stderr,
        witness: eig.eigenvectors.column(imin).iter().copied().collect(),
    })
}

fn check_family(family: &[BoundaryTestFunction]) -> Result<()> {
    if family.is_empty() || family.len() > MAX_FAMILY {
        return Err(Error::invalid(format!("Gram families have 1..={MAX_FAMILY} members, got {}", family.len())));
    }
    if family.iter().any(|f| f.dim() != family[0].dim()) {
        return Err(Error::invalid("Gram family of mixed dimension"));
    }
    Ok(())
}

fn boundary_gram<F: BoundaryFunctional + ?Sized>(
    functional: &F,
    family: &[BoundaryTestFunction],
    left: impl Fn(&BoundaryTestFunction) -> BoundaryTestFunction,
) -> Result<GramReport> {
    let k = family.len();
    let mut raw = DMatrix::zeros(k, k);
    for j in 0..k {
        let fj = left(&family[j]);
        for l in 0..k {
            raw[(j, l)] = functional.log_value(&fj.plus(&family[l])?)?.exp();
        }
    }
    report(functional.describe(), family.iter().cloned().map(Source::Boundary).collect(), raw, None)
}

/// G_jl = F(f_j + f_l).
pub fn gram_stochastic<F: BoundaryFunctional + ?Sized>(functional: &F, family: &[BoundaryTestFunction]) -> Result<GramReport> {
    check_family(family)?;
    boundary_gram(functional, family, |f| f.clone())
}

/// Every bump centred at least [`RP_SUPPORT_WIDTHS`] widths inside x₁ > 0.
pub fn check_positive_support(f: &BoundaryTestFunction) -> Result<()> {
    for b in &f.bumps {
        if b.amplitude != 0.0 && b.center[0] < RP_SUPPORT_WIDTHS * b.width {
            return Err(Error::invalid(format!(
                "bump at x₁ = {} with width {} is not supported in x₁ > 0",
                b.center[0], b.width
            )));
        }
    }
    Ok(())
}

/// G_jl = F(θf_j + f_l), θ the sign flip of x₁.
pub fn gram_reflection<F: BoundaryFunctional + ?Sized>(functional: &F, family: &[BoundaryTestFunction]) -> Result<GramReport> {
    check_family(family)?;
    family.iter().try_for_each(check_positive_support)?;
    boundary_gram(functional, family, |f| f.reflected())
}

/// Most negative Gram (by λ_min/λ_max) over all `size`-subsets of `pool`;
/// `None` when every subset is PSD.
pub fn search_witness<F: BoundaryFunctional + ?Sized>(
    functional: &F,
    pool: &[BoundaryTestFunction],
    size: usize,
    reflected: bool,
) -> Result<Option<GramReport>> {
    if size == 0 || size > pool.len() || size > MAX_FAMILY {
        return Err(Error::invalid(format!("cannot draw families of {size} from a pool of {}", pool.len())));
    }
    let mut best: Option<GramReport> = None;
    for idx in (0..pool.len()).combinations(size) {
        let family: Vec<BoundaryTestFunction> = idx.iter().map(|&i| pool[i].clone()).collect();
        let r = if reflected { gram_reflection(functional, &family)? } else { gram_stochastic(functional, &family)? };
        if !r.psd && best.as_ref().is_none_or(|b| r.relative_min() < b.relative_min()) {
            best = Some(r);
        }
    }
    Ok(best)
}

/// Reflection Gram of the α₋ Gaussian functional along a ν scan.
pub fn unitarity_scan(d: usize, nus: &[f64], family: &[BoundaryTestFunction]) -> Result<Vec<(f64, GramReport)>> {
    nus.iter()
        .map(|&nu| {
            let params = SpectralParams::from_nu(d, nu)?;
            Ok((nu, gram_reflection(&GaussianFunctional { params, branch: Branch::Minus }, family)?))
        })
        .collect()
}

/// 𝔼[Θ(F̄_j e^{−V_{Λ₊}}) F_l e^{−V_{Λ₊}}] / Z_Λ with F_j = exp φ(f_j), for
/// bulk sources on the x₁ > 0 half of the lattice.
pub fn perturbed_rp_gram(
    model: &LatticeModel,
    lambda: f64,
    family: &[Vec<(usize, f64)>],
    n: usize,
    seed: u64,
) -> Result<GramReport> {
    if model.spec.n_x % 2 == 1 {
        return Err(Error::invalid("an odd n_x puts sites on the reflection plane: Λ ≠ Λ₊ ∪ θΛ₊"));
    }
    let theta = model.reflection_map()?;
    if family.is_empty() || family.len() > MAX_FAMILY {
        return Err(Error::invalid(format!("Gram families have 1..={MAX_FAMILY} members, got {}", family.len())));
    }
    for src in family {
        for &(s, _) in src {
            if s >= model.len() || !(model.sites[s].x[0] > 0.0) {
                return Err(Error::invalid(format!("site {s} is not in the x₁ > 0 half of the lattice")));
            }
        }
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("λ must be non-negative"));
    }
    let name = format!("lattice reflection, lambda={lambda}");
    let sources: Vec<Source> = family.iter().cloned().map(Source::Sites).collect();
    let k = family.len();
    let reflect = |src: &[(usize, f64)]| -> Vec<(usize, f64)> { src.iter().map(|&(s, a)| (theta[s], a)).collect() };

    if lambda == 0.0 {
        let cov = &model.covariance;
        let mut raw = DMatrix::zeros(k, k);
        for j in 0..k {
            let left = reflect(&family[j]);
            for l in 0..k {
                let src: Vec<(usize, f64)> = left.iter().chain(&family[l]).copied().collect();
                let q: f64 = src.iter().flat_map(|&(s, a)| src.iter().map(move |&(t, b)| a * b * cov[(s, t)])).sum();
                raw[(j, l)] = (0.5 * q).exp();
            }
        }
        // the covariance is symmetric up to rounding, so is the Gram
        return report(name, sources, raw, None);
    }

    if n < 2 {
        return Err(Error::invalid("Monte-Carlo Gram needs n ≥ 2"));
    }
    let plus = model.positive_half();
    let minus: Vec<usize> = plus.iter().map(|&s| theta[s]).collect();
    let reflected: Vec<Vec<(usize, f64)>> = family.iter().map(|f| reflect(f)).collect();
    let smear = |v: &[f64], src: &[(usize, f64)]| src.iter().map(|&(s, a)| a * v[s]).sum::<f64>().exp();
    let draws: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let v = sample_field(model, seed, i).values;
            let weight = (-potential_region(&v, model, lambda, &plus) - potential_region(&v, model, lambda, &minus)).exp();
            let a = reflected.iter().map(|f| smear(&v, f)).collect();
            let b = family.iter().map(|f| smear(&v, f)).collect();
            (a, b, weight)
        })
        .collect();
    let z: f64 = draws.iter().map(|d| d.2).sum::<f64>() / n as f64;
    let mut raw = DMatrix::zeros(k, k);
    for (a, b, w) in &draws {
        for j in 0..k {
            for l in 0..k {
                raw[(j, l)] += a[j] * b[l] * w;
            }
        }
    }
    raw /= n as f64 * z;
    // delta method for the smallest eigenvalue of the ratio estimate
    let sym = (&raw + raw.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let imin = eig.eigenvalues.imin();
    let (lmin, v) = (eig.eigenvalues[imin], eig.eigenvectors.column(imin).into_owned());
    let ys: Vec<f64> = draws
        .iter()
        .map(|(a, b, w)| {
            let (a, b) = (DVector::from_column_slice(a), DVector::from_column_slice(b));
            v.dot(&a) * v.dot(&b) * w - lmin * w
        })
        .collect();
    let my = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / (n - 1) as f64;
    let stderr = (var / n as f64).sqrt() / z;
    report(name, sources, raw, Some(stderr))
}

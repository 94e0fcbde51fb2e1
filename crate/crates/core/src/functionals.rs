//! Boundary generating functionals 𝒞 and 𝒞̃, the finite-dimensional
//! conditioning identity, the renormalized limit functional and the
//! four-point Witten integral.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::{expected_energy, mc_ratio, McRatio};
use crate::kernels::{
    boundary_form, corr_coefficients, corr_form, equal_height_form, fourier_constant, fourier_moment,
    smeared_bulk_to_boundary, smeared_leading_constant,
};
use crate::lattice::LatticeModel;
use crate::params::{BoundaryTestFunction, Branch, Bump, SpectralParams};
use crate::quad::gauss_legendre_on;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub log_prefactor: f64,
    pub mc_ratio: f64,
    /// Half-width of the 95% interval on `value`.
    pub mc_ci: f64,
    pub value: f64,
    pub ln_value: f64,
}

impl FunctionalValue {
    fn assemble(log_prefactor: f64, r: &McRatio) -> Self {
        let scale = log_prefactor.exp();
        FunctionalValue {
            log_prefactor,
            mc_ratio: r.ratio,
            mc_ci: r.ci * scale,
            value: r.ratio * scale,
            ln_value: log_prefactor + r.ln_ratio,
        }
    }
}

/// ½α₊(f, f).
pub fn free_log_prefactor(f: &BoundaryTestFunction, params: &SpectralParams) -> Result<f64> {
    Ok(0.5 * boundary_form(f, f, params, Branch::Plus)?)
}

/// −½(f, α₋⁻¹f) through α₋⁻¹ = −c²α₊.
pub fn log_prefactor(f: &BoundaryTestFunction, params: &SpectralParams) -> Result<f64> {
    Ok(params.c * params.c * free_log_prefactor(f, params)?)
}

/// −½(f, α₋⁻¹f) with the calibrated α₋ weight inverted pointwise in k.
/// Needs 2ν < d.
pub fn log_prefactor_inverted(f: &BoundaryTestFunction, params: &SpectralParams) -> Result<f64> {
    if 2.0 * params.nu >= params.d as f64 {
        return Err(Error::invalid("inverting the α₋ weight needs 2ν < d"));
    }
    if f.is_zero() {
        return Ok(0.0);
    }
    let cm = fourier_constant(params, Branch::Minus)?;
    Ok(-0.5 * fourier_moment(f, f, 2.0 * params.nu)? / cm)
}

/// 𝒞(f): e^{−½(f,α₋⁻¹f)} times the ratio shifted by c·H₊f.
pub fn generating_c(
    f: &BoundaryTestFunction,
    model: &LatticeModel,
    params: &SpectralParams,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<FunctionalValue> {
    let lp = log_prefactor(f, params)?;
    let r = mc_ratio(f, model, params, lambda, params.c, n, seed)?;
    Ok(FunctionalValue::assemble(lp, &r))
}

/// 𝒞̃(f): e^{½α₊(f,f)} times the ratio shifted by H₊f.
pub fn generating_tilde_c(
    f: &BoundaryTestFunction,
    model: &LatticeModel,
    params: &SpectralParams,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<FunctionalValue> {
    let lp = free_log_prefactor(f, params)?;
    let r = mc_ratio(f, model, params, lambda, 1.0, n, seed)?;
    Ok(FunctionalValue::assemble(lp, &r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duality {
    pub c: FunctionalValue,
    pub tilde_c: FunctionalValue,
    pub difference: f64,
    pub combined_ci: f64,
    pub agree: bool,
}

/// 𝒞(f) against 𝒞̃(c·f) on the same samples.
pub fn duality_check(
    f: &BoundaryTestFunction,
    model: &LatticeModel,
    params: &SpectralParams,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<Duality> {
    let c = generating_c(f, model, params, lambda, n, seed)?;
    let tilde_c = generating_tilde_c(&f.scaled(params.c), model, params, lambda, n, seed)?;
    let difference = (c.value - tilde_c.value).abs();
    let combined_ci = c.mc_ci + tilde_c.mc_ci;
    // identical inputs up to rounding give a zero-width interval
    let agree = difference <= combined_ci + 1e-12 * c.value.abs();
    Ok(Duality { c, tilde_c, difference, combined_ci, agree })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeFieldLimit {
    pub z: f64,
    /// ½[G₊(f_z, f_z) − (Corr(z)f, f)] with f_z = z^{−Δ₊}δ_z⊗f.
    pub ln_y: f64,
    pub ln_limit: f64,
    /// |e^{ln_y − ln_limit} − 1|.
    pub gap: f64,
}

/// Free-field Y_z(f) against its z → 0 limit e^{½α₊(f,f)}.
pub fn free_field_limit(z: f64, f: &BoundaryTestFunction, params: &SpectralParams) -> Result<FreeFieldLimit> {
    let coeffs = corr_coefficients(params)?;
    let g = equal_height_form(z, f, f, params, Branch::Plus)?;
    let ln_y = 0.5 * (z.powf(-2.0 * params.delta_plus) * g - corr_form(z, f, &coeffs)?);
    let ln_limit = free_log_prefactor(f, params)?;
    Ok(FreeFieldLimit {
        z,
        ln_y,
        ln_limit,
        gap: ((ln_y - ln_limit).exp() - 1.0).abs(),
    })
}

/// Size limits of the dense-quadrature oracle.
pub const MAX_BULK: usize = 3;
pub const MAX_BOUNDARY: usize = 2;
/// Largest condition number accepted for α.
pub const MAX_ALPHA_CONDITION: f64 = 1e8;
const DENSE_NODES: usize = 64;
const DENSE_HALF_WIDTH: f64 = 11.0;

/// Finite Gaussian analogue of φ₋ = φ₊ + Kψ: φ₊ ~ N(0, G), ψ ~ N(0, α).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningProblem {
    pub g: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    /// 𝔼[δ(ψ−f)e^{−V}] / 𝔼[δ(ψ)e^{−V}] from the joint density.
    pub conditioned: f64,
    /// e^{−½fα⁻¹f}·𝔼[e^{−V(φ₊+Kf)}]/𝔼[e^{−V(φ₊)}].
    pub closed_form: f64,
    pub residual: f64,
    pub nodes: usize,
}

fn spd_check(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax() {
        return Err(Error::invalid(format!("{what} is not symmetric")));
    }
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if !(lo > 0.0) {
        return Err(Error::invalid(format!("{what} is not positive definite (min eigenvalue {lo:e})")));
    }
    Ok(hi / lo)
}

impl ConditioningProblem {
    pub fn new(g: DMatrix<f64>, k: DMatrix<f64>, alpha: DMatrix<f64>) -> Result<Self> {
        let (nb, nd) = (g.nrows(), alpha.nrows());
        if nb == 0 || nd == 0 || nb > MAX_BULK || nd > MAX_BOUNDARY {
            return Err(Error::Budget(format!(
                "dense quadrature allows 1..={MAX_BULK} bulk and 1..={MAX_BOUNDARY} boundary variables, got {nb} and {nd}"
            )));
        }
        if g.ncols() != nb || alpha.ncols() != nd || k.shape() != (nb, nd) {
            return Err(Error::invalid("conditioning matrices have inconsistent shapes"));
        }
        spd_check(&g, "G")?;
        let cond = spd_check(&alpha, "α")?;
        if cond > MAX_ALPHA_CONDITION {
            return Err(Error::invalid(format!("α is ill-conditioned (condition number {cond:.3e})")));
        }
        Ok(ConditioningProblem { g, k, alpha })
    }

    /// G and α of the form AAᵀ + 0.2·I, K with standard normal entries.
    pub fn random(n_bulk: usize, n_bdry: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let a = normal(n_bulk, n_bulk);
        let k = normal(n_bulk, n_bdry);
        let b = normal(n_bdry, n_bdry);
        let g = &a * a.transpose() / n_bulk as f64 + DMatrix::identity(n_bulk, n_bulk) * 0.2;
        let alpha = &b * b.transpose() / n_bdry as f64 + DMatrix::identity(n_bdry, n_bdry) * 0.2;
        Self::new(g, k.scale(0.7), alpha)
    }

    pub fn n_bulk(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_bdry(&self) -> usize {
        self.alpha.nrows()
    }

    /// Both sides of the conditioning identity for V(φ) = λΣφ_i⁴.
    pub fn check(&self, lambda: f64, f: &[f64]) -> Result<ConditioningReport> {
        let (nb, nd) = (self.n_bulk(), self.n_bdry());
        if f.len() != nd {
            return Err(Error::invalid(format!("f has {} entries, the boundary has {nd}", f.len())));
        }
        if !(lambda >= 0.0) || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("conditioning check needs λ ≥ 0 and finite f"));
        }
        let v = |phi: &[f64]| lambda * phi.iter().map(|p| p.powi(4)).sum::<f64>();
        let fv = DVector::from_column_slice(f);

        // left side: the joint law of (φ₋, ψ), inverted as a whole
        let n = nb + nd;
        let mut sigma = DMatrix::zeros(n, n);
        let ka = &self.k * &self.alpha;
        sigma.view_mut((0, 0), (nb, nb)).copy_from(&(&self.g + &ka * self.k.transpose()));
        sigma.view_mut((0, nb), (nb, nd)).copy_from(&ka);
        sigma.view_mut((nb, 0), (nd, nb)).copy_from(&ka.transpose());
        sigma.view_mut((nb, nb), (nd, nd)).copy_from(&self.alpha);
        let q = Cholesky::new(sigma)
            .ok_or_else(|| Error::numerical("joint covariance factorization", f64::NAN))?
            .inverse();
        let q = (&q + q.transpose()) * 0.5;
        let qbb = q.view((0, 0), (nb, nb)).into_owned();
        let qbd = q.view((0, nb), (nb, nd)).into_owned();
        let cond_cov = Cholesky::new(qbb.clone())
            .ok_or_else(|| Error::numerical("conditional precision factorization", f64::NAN))?
            .inverse();
        let lc = Cholesky::new((&cond_cov + cond_cov.transpose()) * 0.5)
            .ok_or_else(|| Error::numerical("conditional covariance factorization", f64::NAN))?
            .l();
        let rule = gauss_legendre_on(DENSE_NODES, -DENSE_HALF_WIDTH, DENSE_HALF_WIDTH);
        let joint = |psi: &DVector<f64>| -> f64 {
            // box placed on the conditional law, the integrand is the raw joint density
            let centre = -(&cond_cov * &qbd * psi);
            let total = nb_product(nb, &rule, |u, w| {
                let phi = &centre + &lc * DVector::from_column_slice(u);
                let mut x = DVector::zeros(n);
                x.rows_mut(0, nb).copy_from(&phi);
                x.rows_mut(nb, nd).copy_from(psi);
                w * (-0.5 * x.dot(&(&q * &x)) - v(phi.as_slice())).exp()
            });
            total
        };
        let conditioned = joint(&fv) / joint(&DVector::zeros(nd));

        // right side: Gaussian conditioning in closed form, then the shift Kf
        let alpha_inv_f = Cholesky::new(self.alpha.clone())
            .ok_or_else(|| Error::numerical("α factorization", f64::NAN))?
            .solve(&fv);
        let lg = Cholesky::new(self.g.clone())
            .ok_or_else(|| Error::numerical("G factorization", f64::NAN))?
            .l();
        let shift = &self.k * &fv;
        let expect = |h: &DVector<f64>| {
            nb_product(nb, &rule, |u, w| {
                let xi = DVector::from_column_slice(u);
                let phi = &lg * &xi + h;
                w * (-0.5 * xi.norm_squared() - v(phi.as_slice())).exp()
            })
        };
        let closed_form = (-0.5 * fv.dot(&alpha_inv_f)).exp() * expect(&shift) / expect(&DVector::zeros(nb));
        if !(conditioned.is_finite() && closed_form.is_finite() && closed_form > 0.0) {
            return Err(Error::numerical("conditioning quadrature", f64::NAN));
        }
        Ok(ConditioningReport {
            conditioned,
            closed_form,
            residual: ((conditioned - closed_form) / closed_form).abs(),
            nodes: DENSE_NODES.pow(nb as u32),
        })
    }
}

/// Σ over the tensor grid of a one-dimensional rule in `dim` variables.
fn nb_product<F: Fn(&[f64], f64) -> f64 + Sync>(dim: usize, rule: &[(f64, f64)], g: F) -> f64 {
    let m = rule.len();
    let total = m.pow(dim as u32);
    // fixed chunking keeps the reduction order independent of the thread count
    let partial: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut u = vec![0.0; dim];
            let mut acc = 0.0;
            for rest in 0..total / m {
                let mut w = rule[first].1;
                u[0] = rule[first].0;
                let mut r = rest;
                for slot in u.iter_mut().skip(1) {
                    let (x, wi) = rule[r % m];
                    *slot = x;
                    w *= wi;
                    r /= m;
                }
                acc += g(&u, w);
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

/// Relative residual of the conditioning identity on a random PSD instance.
pub fn finite_dim_conditioning_check(n_bulk: usize, n_bdry: usize, lambda: f64, f: &[f64], seed: u64) -> Result<f64> {
    Ok(ConditioningProblem::random(n_bulk, n_bdry, seed)?.check(lambda, f)?.residual)
}

/// C in 𝒞(f) = exp(½α₊(f,f) − λC∫f⁴): the z₀ → 0 limit of
/// z₀^{d+4(Δ₊−d)} ∫_{Λ(z₀)} (H₊f)⁴ per unit ∫f⁴.
pub fn renormalization_constant(params: &SpectralParams) -> Result<f64> {
    if !params.gamma_plus.is_finite() {
        return Err(Error::Singular("γ₊ has a Γ pole".into()));
    }
    let k = smeared_leading_constant(params);
    let e = renormalization_exponent(params);
    if !(e > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("no divergent φ⁴ energy to renormalize (d + 4(Δ₊−d) = {e})")));
    }
    Ok(k.powi(4) / e)
}

/// d + 4(Δ₊ − d).
pub fn renormalization_exponent(params: &SpectralParams) -> f64 {
    let d = params.d as f64;
    d + 4.0 * (params.delta_plus - d)
}

pub fn renormalized_log(f: &BoundaryTestFunction, params: &SpectralParams, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("the renormalized functional needs λ ≥ 0"));
    }
    let free = free_log_prefactor(f, params)?;
    if lambda == 0.0 {
        return Ok(free);
    }
    Ok(free - lambda * renormalization_constant(params)? * f.integral_fourth_power())
}

pub fn renormalized_functional(f: &BoundaryTestFunction, params: &SpectralParams, lambda: f64) -> Result<f64> {
    Ok(renormalized_log(f, params, lambda)?.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormalizationCheck {
    pub z0: f64,
    /// λ·z₀^{d+4(Δ₊−d)}.
    pub lambda_z0: f64,
    /// E(z₀, f) at unit coupling.
    pub energy: f64,
    /// λC∫f⁴.
    pub limit: f64,
    pub relative_gap: f64,
}

/// λ(z₀)E(z₀, f) against λC∫f⁴ on the box [z₀, A] × [−l, l]ᵈ.
pub fn renormalization_check(
    z0: f64,
    f: &BoundaryTestFunction,
    params: &SpectralParams,
    lambda: f64,
    a: f64,
    l: f64,
) -> Result<RenormalizationCheck> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("renormalization check needs λ > 0"));
    }
    let energy = expected_energy(z0, f, params, 1.0, a, l)?;
    let lambda_z0 = lambda * z0.powf(renormalization_exponent(params));
    let limit = lambda * renormalization_constant(params)? * f.integral_fourth_power();
    Ok(RenormalizationCheck {
        z0,
        lambda_z0,
        energy,
        limit,
        relative_gap: (lambda_z0 * energy / limit - 1.0).abs(),
    })
}

/// Bulk quadrature settings for [`witten_4pt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WittenQuad {
    pub z_min: f64,
    pub z_max: f64,
    /// Width of a layer in ln z.
    pub layer: f64,
    /// Gauss–Legendre nodes per layer and per x panel at the coarse level;
    /// the fine level doubles them.
    pub nodes: usize,
    /// Accepted relative gap between the two levels.
    pub rel_tol: f64,
}

impl Default for WittenQuad {
    fn default() -> Self {
        WittenQuad {
            z_min: 1e-3,
            z_max: 50.0,
            layer: 1.0,
            nodes: 4,
            rel_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WittenReport {
    pub value: f64,
    pub coarse: f64,
    /// |fine − coarse| / |fine|.
    pub refinement_error: f64,
    /// Measured d ln ρ/d ln z between the two lowest nodes, ρ being the
    /// x-integrated density per unit ln z.
    pub small_z_exponent: f64,
    /// 4(d−Δ₊) − d: the exponent if all four sources overlapped.
    pub overlapping_exponent: f64,
    pub evaluations: usize,
}

/// Minimum centre separation, in units of the summed widths.
pub const WITTEN_SEPARATION: f64 = 6.0;

fn check_disjoint(fs: &[&BoundaryTestFunction; 4]) -> Result<()> {
    for i in 0..4 {
        for j in i + 1..4 {
            for a in &fs[i].bumps {
                for b in &fs[j].bumps {
                    let r: f64 = a.center.iter().zip(&b.center).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    if r < WITTEN_SEPARATION * (a.width + b.width) {
                        return Err(Error::invalid(format!(
                            "sources {i} and {j} overlap: centres {r:.3} apart, need {:.3}",
                            WITTEN_SEPARATION * (a.width + b.width)
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn panel_breaks(fs: &[&BoundaryTestFunction; 4], axis: usize, z: f64, reach: f64) -> Vec<f64> {
    let mut pts = vec![-reach, reach];
    for f in fs {
        for b in &f.bumps {
            let s = b.width.max(z);
            for m in [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0] {
                let x = b.center[axis] + m * s;
                if x.abs() < reach {
                    pts.push(x);
                }
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

const PROFILE_NODES: usize = 600;

/// H₊b(z, ·) of one bump as a function of ρ = ln(1 + r²/(w² + z²)),
/// tabulated on a uniform grid and read back by cubic interpolation.
struct RadialProfile {
    center: Vec<f64>,
    scale2: f64,
    step: f64,
    values: Vec<f64>,
}

impl RadialProfile {
    fn new(b: &Bump, z: f64, reach: f64, params: &SpectralParams) -> Result<Self> {
        let unit = BoundaryTestFunction::new(vec![Bump { center: vec![0.0; params.d], width: b.width, amplitude: b.amplitude }])?;
        let scale2 = b.width * b.width + z * z;
        let rho_max = (1.0 + reach * reach / scale2).ln();
        let step = rho_max / (PROFILE_NODES - 4) as f64;
        let values = (0..PROFILE_NODES)
            .into_par_iter()
            .map(|i| {
                let r = (scale2 * ((i as f64 * step).exp() - 1.0)).sqrt();
                let mut x = vec![0.0; params.d];
                x[0] = r;
                smeared_bulk_to_boundary(z, &x, &unit, params)
            })
            .collect::<Result<_>>()?;
        Ok(RadialProfile { center: b.center.clone(), scale2, step, values })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = self.center.iter().zip(x).map(|(c, x)| (x - c) * (x - c)).sum();
        let t = (r2 / self.scale2).ln_1p() / self.step;
        let i = (t.floor() as usize).clamp(1, PROFILE_NODES - 3);
        let s = t - i as f64;
        let v = &self.values[i - 1..i + 3];
        // four-point Lagrange on nodes −1, 0, 1, 2
        -s * (s - 1.0) * (s - 2.0) / 6.0 * v[0] + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * v[1]
            - (s + 1.0) * s * (s - 2.0) / 2.0 * v[2]
            + (s + 1.0) * s * (s - 1.0) / 6.0 * v[3]
    }
}

/// z^{−d} ∫ ∏ H₊f_l dx at one height (density per unit ln z), panel rule of order q.
fn layer_density(fs: &[&BoundaryTestFunction; 4], params: &SpectralParams, z: f64, q: usize) -> Result<(f64, usize)> {
    let d = params.d;
    let extent = fs
        .iter()
        .flat_map(|f| f.bumps.iter())
        .map(|b| b.center.iter().map(|c| c.abs()).fold(0.0, f64::max) + 8.0 * b.width)
        .fold(0.0, f64::max);
    let reach = extent + 10.0 * z;
    let profiles: Vec<Vec<RadialProfile>> = fs
        .iter()
        .map(|f| f.bumps.iter().map(|b| RadialProfile::new(b, z, 2.0 * reach * (d as f64).sqrt(), params)).collect())
        .collect::<Result<_>>()?;
    let axes: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|k| {
            let pts = panel_breaks(fs, k, z, reach);
            pts.windows(2).flat_map(|w| gauss_legendre_on(q, w[0], w[1])).collect()
        })
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let vals: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            let mut w = 1.0;
            for (k, axis) in axes.iter().enumerate() {
                let (xk, wk) = axis[idx % axis.len()];
                idx /= axis.len();
                x[k] = xk;
                w *= wk;
            }
            let mut h = [0.0; 4];
            for (slot, p) in h.iter_mut().zip(&profiles) {
                *slot = p.iter().map(|b| b.eval(&x)).sum();
            }
            // a fixed multiplication order makes the result symmetric in the sources
            h.sort_by(f64::total_cmp);
            w * h[0] * h[1] * h[2] * h[3]
        })
        .collect();
    let evals = profiles.iter().map(|p| p.len()).sum::<usize>() * PROFILE_NODES;
    Ok((vals.iter().sum::<f64>() * z.powi(-(d as i32)), evals))
}

fn witten_level(
    fs: &[&BoundaryTestFunction; 4],
    params: &SpectralParams,
    quad: &WittenQuad,
    q: usize,
) -> Result<(f64, Vec<(f64, f64)>, usize)> {
    let (t0, t1) = (quad.z_min.ln(), quad.z_max.ln());
    let layers = ((t1 - t0) / quad.layer).ceil().max(1.0) as usize;
    let h = (t1 - t0) / layers as f64;
    let mut total = 0.0;
    let mut profile = Vec::new();
    let mut evals = 0;
    for i in 0..layers {
        for (t, w) in gauss_legendre_on(q, t0 + i as f64 * h, t0 + (i + 1) as f64 * h) {
            let (rho, n) = layer_density(fs, params, t.exp(), q)?;
            total += w * rho;
            profile.push((t, rho));
            evals += n;
        }
    }
    Ok((total, profile, evals))
}

/// ∫_{ℍ^{d+1}} ∏_{l=1}^{4} H₊f_l d_g x for pairwise disjoint sources.
pub fn witten_4pt(fs: [&BoundaryTestFunction; 4], params: &SpectralParams, quad: &WittenQuad) -> Result<WittenReport> {
    if fs.iter().any(|f| f.dim() != params.d) {
        return Err(Error::invalid("source dimension differs from params.d"));
    }
    if !(quad.z_min > 0.0 && quad.z_max > quad.z_min && quad.layer > 0.0 && quad.nodes >= 2) {
        return Err(Error::invalid("Witten quadrature needs 0 < z_min < z_max, layer > 0 and nodes ≥ 2"));
    }
    check_disjoint(&fs)?;
    let (coarse, _, e1) = witten_level(&fs, params, quad, quad.nodes)?;
    let (fine, profile, e2) = witten_level(&fs, params, quad, 2 * quad.nodes)?;
    let (a, b) = (profile[0], profile[1]);
    let small_z_exponent = (b.1.abs().ln() - a.1.abs().ln()) / (b.0 - a.0);
    let d = params.d as f64;
    let report = WittenReport {
        value: fine,
        coarse,
        refinement_error: ((fine - coarse) / fine).abs(),
        small_z_exponent,
        overlapping_exponent: 4.0 * (d - params.delta_plus) - d,
        evaluations: e1 + e2,
    };
    if !fine.is_finite() || !(small_z_exponent > 0.0) {
        return Err(Error::numerical("Witten integral does not decay at small z", report.refinement_error));
    }
    if report.refinement_error > quad.rel_tol {
        return Err(Error::numerical("Witten integral refinement", report.refinement_error));
    }
    Ok(report)
}

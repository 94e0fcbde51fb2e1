//! The lattice :φ⁴: interaction on Λ(z₀), its shift by the boundary source
//! H₊f, the energy and variance of the shifted potential, the
//! hypercontractivity tail bound and the Monte-Carlo ratio
//! ∫e^{−V(φ+H₊f)}dμ / ∫e^{−V(φ)}dμ.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::ScalingSeries;
use crate::kernels::smeared_bulk_to_boundary;
use crate::lattice::{build_model, sample_field, sample_rng, wick_power, FieldSample, LatticeModel, LatticeSpec, WICK4_LOWER};
use crate::params::{BoundaryTestFunction, SpectralParams};
use crate::quad::{integrate_breaks, QuadConfig};

const BINOM4: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// Relative tolerance between the two routes of the shifted potential.
pub const ROUTE_TOL: f64 = 1e-9;

const BOOTSTRAP_RESAMPLES: usize = 200;

fn check_len(values: &[f64], model: &LatticeModel) -> Result<()> {
    if values.len() != model.len() {
        return Err(Error::invalid(format!("field has {} values, lattice has {} sites", values.len(), model.len())));
    }
    Ok(())
}

/// scale·(H₊f) at every lattice site.
pub fn source_values(model: &LatticeModel, f: &BoundaryTestFunction, params: &SpectralParams, scale: f64) -> Result<Vec<f64>> {
    if f.dim() != model.d() || params.d != model.d() {
        return Err(Error::invalid("source and lattice dimensions differ"));
    }
    if f.is_zero() || scale == 0.0 {
        return Ok(vec![0.0; model.len()]);
    }
    model
        .sites
        .par_iter()
        .map(|p| Ok(scale * smeared_bulk_to_boundary(p.z, &p.x, f, params)?))
        .collect()
}

/// λ Σ_{s ∈ sites} w(s) :φ⁴:(s).
pub fn potential_region(values: &[f64], model: &LatticeModel, lambda: f64, sites: &[usize]) -> f64 {
    lambda * sites.iter().map(|&s| model.weights[s] * wick_power(values[s], model.wick_diag[s], 4)).sum::<f64>()
}

pub fn potential_values(values: &[f64], model: &LatticeModel, lambda: f64) -> f64 {
    lambda
        * values
            .iter()
            .zip(&model.weights)
            .zip(&model.wick_diag)
            .map(|((v, w), c)| w * wick_power(*v, *c, 4))
            .sum::<f64>()
}

pub fn potential(sample: &FieldSample, model: &LatticeModel, lambda: f64) -> Result<f64> {
    check_len(&sample.values, model)?;
    Ok(potential_values(&sample.values, model, lambda))
}

/// V(φ + h) two ways: Wick powers of the shifted field, and the binomial
/// expansion Σ_j C(4,j) :φʲ: h^{4−j}. Disagreement beyond `ROUTE_TOL`
/// (relative to the sum of absolute terms) is an error.
pub fn shifted_potential_values(values: &[f64], h: &[f64], model: &LatticeModel, lambda: f64) -> Result<f64> {
    check_len(values, model)?;
    check_len(h, model)?;
    let mut direct = 0.0;
    let mut expanded = 0.0;
    let mut size = 0.0;
    for s in 0..values.len() {
        let (w, c, v, hs) = (model.weights[s], model.wick_diag[s], values[s], h[s]);
        direct += w * wick_power(v + hs, c, 4);
        let mut hp = 1.0;
        for j in (0..=4).rev() {
            let t = BINOM4[j] * wick_power(v, c, j) * hp;
            expanded += w * t;
            size += w * t.abs();
            hp *= hs;
        }
    }
    if (direct - expanded).abs() > ROUTE_TOL * size {
        return Err(Error::numerical("shifted potential routes disagree", (direct - expanded).abs() / size));
    }
    Ok(lambda * direct)
}

pub fn shifted_potential(
    sample: &FieldSample,
    f: &BoundaryTestFunction,
    model: &LatticeModel,
    params: &SpectralParams,
    lambda: f64,
    scale: f64,
) -> Result<f64> {
    let h = source_values(model, f, params, scale)?;
    shifted_potential_values(&sample.values, &h, model, lambda)
}

/// λ Σ w h⁴: the mean of the shifted potential on the lattice.
pub fn lattice_energy(model: &LatticeModel, h: &[f64], lambda: f64) -> f64 {
    lambda * model.weights.iter().zip(h).map(|(w, v)| w * v.powi(4)).sum::<f64>()
}

fn x_breaks(f: &BoundaryTestFunction, k: usize, l: f64) -> Vec<f64> {
    let mut pts = vec![-l, l];
    for b in &f.bumps {
        for m in [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0] {
            let x = b.center[k] + m * b.width;
            if x > -l && x < l {
                pts.push(x);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// ∫_{[−l,l]^d} g(x) dx by nested adaptive quadrature.
fn box_integral<G: FnMut(&[f64]) -> f64>(g: &mut G, f: &BoundaryTestFunction, l: f64, cfg: QuadConfig) -> Result<f64> {
    fn nest<G: FnMut(&[f64]) -> f64>(
        g: &mut G,
        x: &mut Vec<f64>,
        f: &BoundaryTestFunction,
        l: f64,
        cfg: QuadConfig,
        failed: &mut bool,
    ) -> f64 {
        let k = x.len();
        let d = f.dim();
        let pts = x_breaks(f, k, l);
        let mut inner = |t: f64| {
            x.push(t);
            let v = if k + 1 == d { g(x) } else { nest(g, x, f, l, cfg, failed) };
            x.pop();
            v
        };
        let r = integrate_breaks(&mut inner, &pts, cfg);
        *failed |= !r.converged;
        r.value
    }
    let mut failed = false;
    let v = nest(g, &mut Vec::with_capacity(f.dim()), f, l, cfg, &mut failed);
    if failed {
        return Err(Error::numerical("boundary-box integral", f64::NAN));
    }
    Ok(v)
}

/// E(z₀, f) = λ ∫_{Λ(z₀)} (H₊f)⁴ z^{−d−1} dz dx, by adaptive quadrature in
/// (ln z, x).
pub fn expected_energy(
    z0: f64,
    f: &BoundaryTestFunction,
    params: &SpectralParams,
    lambda: f64,
    a: f64,
    l: f64,
) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::invalid("expected energy needs f ≠ 0"));
    }
    if !(z0 > 0.0 && z0 < a && l > 0.0) {
        return Err(Error::invalid("expected energy needs 0 < z0 < A and l > 0"));
    }
    if f.dim() != params.d {
        return Err(Error::invalid("source dimension differs from params.d"));
    }
    let d = params.d as i32;
    let inner_cfg = QuadConfig::with_tols(0.0, 1e-9);
    let mut failure: Option<Error> = None;
    let mut layer = |t: f64| {
        let z = t.exp();
        let mut g = |x: &[f64]| match smeared_bulk_to_boundary(z, x, f, params) {
            Ok(h) => h.powi(4),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        match box_integral(&mut g, f, l, inner_cfg) {
            Ok(v) => z.powi(-d) * v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let (t0, t1) = (z0.ln(), a.ln());
    let mut pts = vec![t0];
    let mut t = t0;
    while t + 0.5 < t1 {
        t += 0.5;
        pts.push(t);
    }
    pts.push(t1);
    let r = integrate_breaks(&mut layer, &pts, QuadConfig::with_tols(0.0, 1e-8));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(lambda * r.require("expected energy")?)
}

/// σ of V(φ + h) from the four-term double sum over sites.
pub fn sigma_from_source(model: &LatticeModel, h: &[f64], lambda: f64) -> Result<f64> {
    check_len(h, model)?;
    let n = model.len();
    let c = &model.covariance;
    let w = &model.weights;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                let cij = c[(i, j)];
                let hh = h[i] * h[j];
                let c2 = cij * cij;
                acc += w[j] * cij * (24.0 * c2 * cij + 96.0 * hh * c2 + 72.0 * hh * hh * cij + 16.0 * hh * hh * hh);
            }
            w[i] * acc
        })
        .collect();
    let var: f64 = rows.iter().sum();
    if !(var >= 0.0) {
        return Err(Error::numerical("variance of the shifted potential is negative", var));
    }
    Ok(lambda.abs() * var.sqrt())
}

pub fn sigma(z0: f64, f: &BoundaryTestFunction, model: &LatticeModel, params: &SpectralParams, lambda: f64) -> Result<f64> {
    if (model.spec.z0 / z0 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("lattice covers z ≥ {}, not z ≥ {z0}", model.spec.z0)));
    }
    let h = source_values(model, f, params, 1.0)?;
    sigma_from_source(model, &h, lambda)
}

/// 0 = ln γ + 2p/(p−1) + 2 ln(p−1).
pub fn stationarity_residual(gamma: f64, p: f64) -> f64 {
    gamma.ln() + 2.0 * p / (p - 1.0) + 2.0 * (p - 1.0).ln()
}

/// Minimizer p > 2 of γ^p (p−1)^{2p}. The residual is increasing in p, so
/// a root above 2 exists iff γ < e⁻⁴.
pub fn optimal_p(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("optimal_p needs γ in (0, 1), got {gamma}")));
    }
    let mut lo = 2.0;
    if stationarity_residual(gamma, lo) >= 0.0 {
        return Err(Error::invalid(format!("no stationary p > 2 for γ = {gamma} (needs γ < e⁻⁴)")));
    }
    let mut hi = 4.0;
    while stationarity_residual(gamma, hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::numerical("optimal_p bracket", hi));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if stationarity_residual(gamma, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let r = stationarity_residual(gamma, p);
    if r.abs() > 1e-10 {
        return Err(Error::numerical("optimal_p stationarity", r.abs()));
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub gamma: f64,
    pub p: f64,
    pub ln_tail: f64,
    /// γ^p (p−1)^{2p}.
    pub tail: f64,
    /// λ·6·c_κ²·|Λ(z₀)|.
    pub lower: f64,
    pub ln_envelope: f64,
    /// e^{−E/2} + e^{lower}·tail.
    pub envelope: f64,
    /// Δ₊ > 3d.
    pub mass_condition_met: bool,
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Tail bound, pointwise lower bound of V and their combined envelope at one z₀.
#[allow(clippy::too_many_arguments)]
pub fn tail_and_envelope(
    z0: f64,
    energy: f64,
    sigma: f64,
    params: &SpectralParams,
    lambda: f64,
    c_kappa: f64,
    a: f64,
    l: f64,
) -> Result<Envelope> {
    if !(energy > 0.0 && sigma >= 0.0) {
        return Err(Error::invalid("envelope needs E > 0 and σ ≥ 0"));
    }
    let d = params.d as i32;
    let gamma = 2.0 * sigma / energy;
    let p = optimal_p(gamma)?;
    let ln_tail = p * gamma.ln() + 2.0 * p * (p - 1.0).ln();
    let volume = (2.0 * l).powi(d) * (z0.powi(-d) - a.powi(-d)) / params.d as f64;
    let lower = lambda * WICK4_LOWER * c_kappa * c_kappa * volume;
    let ln_envelope = ln_add_exp(-energy / 2.0, lower + ln_tail);
    Ok(Envelope {
        gamma,
        p,
        ln_tail,
        tail: ln_tail.exp(),
        lower,
        ln_envelope,
        envelope: ln_envelope.exp(),
        mass_condition_met: params.delta_plus > 3.0 * params.d as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRatio {
    pub n: usize,
    pub seed: u64,
    pub ratio: f64,
    pub ln_ratio: f64,
    /// Half-width of the 95% bootstrap interval.
    pub ci: f64,
    pub ln_ci_low: f64,
    pub ln_ci_high: f64,
    /// 𝔼[e^{−V(φ)}] and its standard error.
    pub denominator: f64,
    pub denominator_stderr: f64,
    /// Jensen: the denominator is ≥ 1 up to 3 standard errors.
    pub jensen_ok: bool,
}

fn ln_mean_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + (x - m).exp(), n + 1));
    m + (s / n as f64).ln()
}

/// −V(φ) and −V(φ + h) on the samples 0..n of `seed`.
pub fn potential_pairs(model: &LatticeModel, h: &[f64], lambda: f64, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_len(h, model)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = sample_field(model, seed, i);
            let v0 = potential_values(&s.values, model, lambda);
            let v1 = shifted_potential_values(&s.values, h, model, lambda)?;
            Ok((-v0, -v1))
        })
        .collect()
}

/// Ratio estimate from paired log-weights (−V(φ), −V(φ+h)).
pub fn ratio_from_pairs(pairs: &[(f64, f64)], seed: u64) -> Result<McRatio> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::invalid("ratio needs at least two samples"));
    }
    let ln_num = ln_mean_exp(pairs.iter().map(|p| p.1));
    let ln_den = ln_mean_exp(pairs.iter().map(|p| p.0));
    let ln_ratio = ln_num - ln_den;
    // bootstrap on its own stream, disjoint from the sample streams
    let mut rng = sample_rng(seed, u64::MAX);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut idx = vec![0usize; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for k in idx.iter_mut() {
            *k = rng.gen_range(0..n);
        }
        let a = ln_mean_exp(idx.iter().map(|&k| pairs[k].1));
        let b = ln_mean_exp(idx.iter().map(|&k| pairs[k].0));
        boot.push(a - b);
    }
    boot.sort_by(f64::total_cmp);
    let q = |p: f64| boot[((p * (BOOTSTRAP_RESAMPLES - 1) as f64).round() as usize).min(BOOTSTRAP_RESAMPLES - 1)];
    let (ln_ci_low, ln_ci_high) = (q(0.025).min(ln_ratio), q(0.975).max(ln_ratio));
    let ci = 0.5 * (ln_ci_high.exp() - ln_ci_low.exp());
    // denominator statistics with a shift that cancels in the ratio se/mean
    let m = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = pairs.iter().map(|p| (p.0 - m).exp()).collect();
    let mean = e.iter().sum::<f64>() / n as f64;
    let var = e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let denominator = ln_den.exp();
    let denominator_stderr = (var / n as f64).sqrt() / mean * denominator;
    Ok(McRatio {
        n,
        seed,
        ratio: ln_ratio.exp(),
        ln_ratio,
        ci,
        ln_ci_low,
        ln_ci_high,
        denominator,
        denominator_stderr,
        jensen_ok: denominator >= 1.0 - 3.0 * denominator_stderr,
    })
}

pub fn mc_ratio_from_source(model: &LatticeModel, h: &[f64], lambda: f64, n: usize, seed: u64) -> Result<McRatio> {
    if n < 1000 {
        return Err(Error::invalid(format!("mc_ratio needs n ≥ 1000, got {n}")));
    }
    ratio_from_pairs(&potential_pairs(model, h, lambda, n, seed)?, seed)
}

/// ∫e^{−V(φ+s·H₊f)}dμ / ∫e^{−V(φ)}dμ on common samples.
pub fn mc_ratio(
    f: &BoundaryTestFunction,
    model: &LatticeModel,
    params: &SpectralParams,
    lambda: f64,
    scale: f64,
    n: usize,
    seed: u64,
) -> Result<McRatio> {
    let h = source_values(model, f, params, scale)?;
    mc_ratio_from_source(model, &h, lambda, n, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialityConfig {
    pub d: usize,
    pub m2: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub l: f64,
    pub n_x: usize,
    /// Target layer spacing in ln z; n_z follows from it at each z₀.
    pub h_t: f64,
    pub max_sites: usize,
    pub z0_list: Vec<f64>,
    pub f: BoundaryTestFunction,
    pub n: usize,
    pub seed: u64,
}

impl TrivialityConfig {
    pub fn lattice_spec(&self, z0: f64) -> LatticeSpec {
        let layers = ((self.a / z0).ln() / self.h_t).round() as usize;
        LatticeSpec {
            z0,
            a: self.a,
            l: self.l,
            d: self.d,
            n_z: layers.saturating_sub(1).max(2),
            n_x: self.n_x,
            m2: self.m2,
            max_sites: self.max_sites,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialityChecks {
    /// Point estimates strictly decreasing as z₀ shrinks.
    pub ratio_decreasing: bool,
    /// Upper CI end at the last z₀ below the lower CI end at the first.
    pub ci_separated: bool,
    pub final_below_tenth: bool,
    pub envelope_decreasing: bool,
    pub jensen_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialityReport {
    pub config: TrivialityConfig,
    pub z0_list: Vec<f64>,
    pub sites_list: Vec<usize>,
    #[serde(rename = "E_list")]
    pub e_list: Vec<f64>,
    pub lattice_e_list: Vec<f64>,
    pub sigma_list: Vec<f64>,
    pub gamma_list: Vec<f64>,
    pub p_opt_list: Vec<Option<f64>>,
    pub tail_bound_list: Vec<Option<f64>>,
    pub lower_bound_list: Vec<f64>,
    pub envelope_list: Vec<Option<f64>>,
    pub ln_envelope_list: Vec<Option<f64>>,
    pub mc_ratio_list: Vec<McRatio>,
    pub mass_condition_met: bool,
    pub notes: Vec<String>,
    pub checks: TrivialityChecks,
}

impl TrivialityReport {
    pub fn energy_series(&self) -> Result<ScalingSeries> {
        ScalingSeries::fit(self.z0_list.iter().cloned().zip(self.e_list.iter().cloned()).collect())
    }

    pub fn sigma_series(&self) -> Result<ScalingSeries> {
        ScalingSeries::fit(self.z0_list.iter().cloned().zip(self.sigma_list.iter().cloned()).collect())
    }

    pub fn gamma_series(&self) -> Result<ScalingSeries> {
        ScalingSeries::fit(self.z0_list.iter().cloned().zip(self.gamma_list.iter().cloned()).collect())
    }
}

/// Energy, σ and γ at one z₀ on its own lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub z0: f64,
    pub sites: usize,
    pub energy: f64,
    pub lattice_energy: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub c_kappa: f64,
}

pub fn scaling_point(cfg: &TrivialityConfig, params: &SpectralParams, z0: f64) -> Result<(ScalingPoint, LatticeModel, Vec<f64>)> {
    let model = build_model(cfg.lattice_spec(z0))?;
    let h = source_values(&model, &cfg.f, params, 1.0)?;
    let energy = expected_energy(z0, &cfg.f, params, cfg.lambda, cfg.a, cfg.l)?;
    let sigma = sigma_from_source(&model, &h, cfg.lambda)?;
    let point = ScalingPoint {
        z0,
        sites: model.len(),
        energy,
        lattice_energy: lattice_energy(&model, &h, cfg.lambda),
        sigma,
        gamma: 2.0 * sigma / energy,
        c_kappa: model.c_kappa,
    };
    Ok((point, model, h))
}

pub fn triviality_run(cfg: &TrivialityConfig) -> Result<TrivialityReport> {
    if cfg.z0_list.len() < 2 {
        return Err(Error::invalid("triviality run needs at least two z0 values"));
    }
    if cfg.z0_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("z0_list must be strictly decreasing"));
    }
    if cfg.f.is_zero() {
        return Err(Error::invalid("triviality run needs f ≠ 0"));
    }
    let params = SpectralParams::new(cfg.d, cfg.m2)?;
    let mut notes = Vec::new();
    if !(params.m2 >= 6.0 * (cfg.d * cfg.d) as f64) {
        notes.push(format!("m² = {} is below 6d²; the envelope is not expected to vanish", cfg.m2));
    }
    let k = cfg.z0_list.len();
    let mut r = TrivialityReport {
        config: cfg.clone(),
        z0_list: cfg.z0_list.clone(),
        sites_list: Vec::with_capacity(k),
        e_list: Vec::with_capacity(k),
        lattice_e_list: Vec::with_capacity(k),
        sigma_list: Vec::with_capacity(k),
        gamma_list: Vec::with_capacity(k),
        p_opt_list: Vec::with_capacity(k),
        tail_bound_list: Vec::with_capacity(k),
        lower_bound_list: Vec::with_capacity(k),
        envelope_list: Vec::with_capacity(k),
        ln_envelope_list: Vec::with_capacity(k),
        mc_ratio_list: Vec::with_capacity(k),
        mass_condition_met: params.delta_plus > 3.0 * cfg.d as f64,
        notes,
        checks: TrivialityChecks {
            ratio_decreasing: false,
            ci_separated: false,
            final_below_tenth: false,
            envelope_decreasing: false,
            jensen_ok: false,
        },
    };
    for &z0 in &cfg.z0_list {
        let (pt, model, h) = scaling_point(cfg, &params, z0)?;
        r.sites_list.push(pt.sites);
        r.e_list.push(pt.energy);
        r.lattice_e_list.push(pt.lattice_energy);
        r.sigma_list.push(pt.sigma);
        r.gamma_list.push(pt.gamma);
        let volume = (2.0 * cfg.l).powi(cfg.d as i32) * (z0.powi(-(cfg.d as i32)) - cfg.a.powi(-(cfg.d as i32))) / cfg.d as f64;
        r.lower_bound_list.push(cfg.lambda * WICK4_LOWER * model.c_kappa * model.c_kappa * volume);
        match tail_and_envelope(z0, pt.energy, pt.sigma, &params, cfg.lambda, model.c_kappa, cfg.a, cfg.l) {
            Ok(env) => {
                r.p_opt_list.push(Some(env.p));
                r.tail_bound_list.push(Some(env.tail));
                r.envelope_list.push(Some(env.envelope));
                r.ln_envelope_list.push(Some(env.ln_envelope));
            }
            Err(e) => {
                r.notes.push(format!("z0 = {z0}: no tail bound ({e})"));
                r.p_opt_list.push(None);
                r.tail_bound_list.push(None);
                r.envelope_list.push(None);
                r.ln_envelope_list.push(None);
            }
        }
        r.mc_ratio_list.push(mc_ratio_from_source(&model, &h, cfg.lambda, cfg.n, cfg.seed)?);
    }
    let ln: Vec<f64> = r.mc_ratio_list.iter().map(|m| m.ln_ratio).collect();
    let (first, last) = (&r.mc_ratio_list[0], &r.mc_ratio_list[k - 1]);
    let env: Option<Vec<f64>> = r.ln_envelope_list.iter().cloned().collect();
    r.checks = TrivialityChecks {
        ratio_decreasing: ln.windows(2).all(|w| w[1] < w[0]),
        ci_separated: last.ln_ci_high < first.ln_ci_low,
        final_below_tenth: last.ln_ratio < first.ln_ratio + 0.1f64.ln(),
        envelope_decreasing: env.map(|e| e.windows(2).all(|w| w[1] < w[0])).unwrap_or(false),
        jensen_ok: r.mc_ratio_list.iter().all(|m| m.jensen_ok),
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_p_reference_values() {
        let g = (-10f64).exp();
        let p = optimal_p(g).unwrap();
        assert!(stationarity_residual(g, p).abs() < 1e-10);
        // mpmath root
        assert!((p - 54.588761410323826).abs() < 1e-9, "{p}");
        assert!(optimal_p(0.9).is_err());
        assert!(optimal_p((-3.9f64).exp()).is_err());
        assert!(optimal_p((-4.1f64).exp()).unwrap() > 2.0);
    }

    #[test]
    fn asymptotic_ratio_approaches_one() {
        let r: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&k: &f64| {
                let g = (-k).exp();
                let p = optimal_p(g).unwrap();
                assert!(stationarity_residual(g, p).abs() < 1e-10);
                p * std::f64::consts::E * g.sqrt()
            })
            .collect();
        assert!(r.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()), "{r:?}");
        assert!((r[2] - 1.0).abs() < 0.01);
    }

    #[test]
    fn ln_mean_exp_is_stable() {
        let xs = [-1e6, -1e6 + 2f64.ln()];
        let v = ln_mean_exp(xs.iter().cloned());
        assert!((v - (-1e6 + 1.5f64.ln())).abs() < 1e-9);
    }
}

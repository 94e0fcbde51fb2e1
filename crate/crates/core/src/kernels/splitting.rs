//! Covariance splitting G₋ = G₊ + ∬ H₊ c²α₋ H₊, with the boundary double
//! integral done on the Fourier side where it collapses to a radial integral
//! of two Macdonald functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bulk_propagator;
use crate::error::{Error, Result};
use crate::geometry::{chordal_u, BulkPoint};
use crate::params::{Branch, SpectralParams};
use crate::quad::{gauss_legendre_on, integrate_breaks, QuadConfig, QuadResult};
use crate::special::{bessel_k, sphere_cos_average};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub g_minus: f64,
    pub g_plus: f64,
    pub boundary_term: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// Quadrature error estimate of the boundary term.
    pub error_estimate: f64,
}

/// How the radial integral is discretized.
#[derive(Debug, Clone, Copy)]
enum Rule {
    Adaptive(QuadConfig),
    /// n-point Gauss–Legendre on every panel; error estimate left at zero.
    Fixed(usize),
}

impl Rule {
    fn run<F: FnMut(f64) -> f64>(&self, f: &mut F, pts: &[f64]) -> QuadResult {
        match *self {
            Rule::Adaptive(cfg) => integrate_breaks(f, pts, cfg),
            Rule::Fixed(n) => {
                let mut value = 0.0;
                for w in pts.windows(2) {
                    value += gauss_legendre_on(n, w[0], w[1]).iter().map(|&(x, wt)| wt * f(x)).sum::<f64>();
                }
                QuadResult { value, error: 0.0, evaluations: n * (pts.len() - 1), converged: true }
            }
        }
    }
}

/// ∬ H₊(p,y) c²α₋(y,y') H₊(q,y') dy dy' =
/// (2 sin πν/π)(2π)^{−d}(z_p z_q)^{d/2} ∫ e^{ik·(x_q−x_p)} K_ν(|k|z_p) K_ν(|k|z_q) dk.
fn boundary_term(p: &BulkPoint, q: &BulkPoint, params: &SpectralParams, rule: Rule) -> Result<(f64, f64)> {
    let d = params.d;
    let nu = params.nu;
    let sep: f64 = p.x.iter().zip(&q.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let (zp, zq) = (p.z, q.z);
    let mut failure: Option<Error> = None;
    // k^{2ν} K_ν(k z_p) K_ν(k z_q) × angular factor; finite at k = 0
    let mut core = |k: f64| -> f64 {
        let kk = bessel_k(nu, k * zp).and_then(|a| Ok(a * bessel_k(nu, k * zq)?));
        let ang = sphere_cos_average(d, k * sep);
        match (kk, ang) {
            (Ok(kk), Ok(ang)) => k.powf(2.0 * nu) * kk * ang,
            (Err(e), _) | (_, Err(e)) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let alpha = d as f64 - 2.0 * nu;
    // k ∈ [0, 1] through k = v^{1/α}, which absorbs the k^{α−1} endpoint behaviour
    let mut low = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        core(v.powf(1.0 / alpha)) / alpha
    };
    let r1 = rule.run(&mut low, &[0.0, 1e-6, 1e-3, 0.1, 1.0]);
    let kmax = 700.0 / (zp + zq);
    let mut high = |k: f64| core(k) * k.powf(alpha - 1.0);
    let mut pts = vec![1.0];
    let mut k = 1.0;
    while k < kmax {
        k = (k * 1.5).max(k + PI / sep.max(1e-3)).min(kmax);
        pts.push(k);
    }
    let r2 = if kmax > 1.0 {
        rule.run(&mut high, &pts)
    } else {
        QuadResult { value: 0.0, error: 0.0, evaluations: 0, converged: true }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let pre = 2.0 * (PI * nu).sin() / PI * (2.0 * PI).powi(-(d as i32)) * (zp * zq).powf(d as f64 / 2.0);
    let value = pre * (r1.value + r2.value);
    let err = pre.abs() * (r1.error + r2.error);
    if !(r1.converged && r2.converged) {
        return Err(Error::numerical("splitting boundary integral", err));
    }
    Ok((value, err))
}

/// Full report for G₋(p,q) − G₊(p,q) − boundary term.
pub fn splitting_report(p: &BulkPoint, q: &BulkPoint, params: &SpectralParams, quad: QuadConfig) -> Result<SplittingReport> {
    report_with(p, q, params, Rule::Adaptive(quad))
}

/// Relative residuals with fixed n-point panels, one per entry of `orders`;
/// a self-convergence check of the boundary integral.
pub fn splitting_refinement(p: &BulkPoint, q: &BulkPoint, params: &SpectralParams, orders: &[usize]) -> Result<Vec<f64>> {
    orders
        .iter()
        .map(|&n| Ok(report_with(p, q, params, Rule::Fixed(n))?.relative_residual))
        .collect()
}

fn report_with(p: &BulkPoint, q: &BulkPoint, params: &SpectralParams, rule: Rule) -> Result<SplittingReport> {
    if 2.0 * params.nu >= params.d as f64 {
        return Err(Error::invalid(format!(
            "the splitting identity needs 2ν < d (ν = {}, d = {})",
            params.nu, params.d
        )));
    }
    let u = chordal_u(p, q)?;
    if u == 0.0 {
        return Err(Error::Singular("splitting check at coincident points".into()));
    }
    let g_minus = bulk_propagator(u, params, Branch::Minus)?;
    let g_plus = bulk_propagator(u, params, Branch::Plus)?;
    let (boundary_term, error_estimate) = boundary_term(p, q, params, rule)?;
    let residual = g_minus - g_plus - boundary_term;
    Ok(SplittingReport {
        g_minus,
        g_plus,
        boundary_term,
        residual,
        relative_residual: residual / g_minus,
        error_estimate,
    })
}

pub fn splitting_residual(p: &BulkPoint, q: &BulkPoint, params: &SpectralParams, quad: QuadConfig) -> Result<f64> {
    Ok(splitting_report(p, q, params, quad)?.residual)
}

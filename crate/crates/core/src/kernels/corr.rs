//! Coefficients a_j of the short-distance subtraction Corr(z) and the form
//! (Corr(z)f, f) on Gaussian bumps.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::forms::fourier_moment;
use crate::error::{Error, Result};
use crate::params::{BoundaryTestFunction, SpectralParams};
use crate::quad::{integrate_breaks, QuadConfig};
use crate::special::{bessel_j, gamma};

/// Matching point between numerical quadrature and the Hankel tail.
const TAIL_START: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrCoefficients {
    pub nu: f64,
    /// a_j = ∫₀^∞ (∫₀¹ cos(ωt)(1−t²)^{ν−½} dt)² ω^{2(ν−j)−1} dω, j = 0 … ⌊ν⌋.
    pub a: Vec<f64>,
    pub overall_prefactor: f64,
}

fn check_nu(nu: f64) -> Result<usize> {
    if !(nu > 0.0) {
        return Err(Error::invalid("ν must be positive"));
    }
    if (nu - nu.round()).abs() < 1e-9 {
        return Err(Error::invalid(format!("integer ν = {nu} gives a logarithmic subtraction (not supported)")));
    }
    Ok(nu.floor() as usize)
}

/// (√π Γ(ν+½) 2^{ν−1})²: the square of the inner integral's Bessel prefactor.
fn inner_scale_sq(nu: f64) -> f64 {
    let c = PI.sqrt() * gamma(nu + 0.5) * 2f64.powf(nu - 1.0);
    c * c
}

/// (2^{1−ν}/(√π Γ(ν+½)))².
fn prefactor(nu: f64) -> f64 {
    1.0 / inner_scale_sq(nu)
}

/// ∫_W^∞ of J_ν(ω)² ω^{−2j−1} from the Hankel expansion: the smooth part
/// term by term, the oscillating part by repeated integration by parts.
fn hankel_tail(nu: f64, j: usize, w: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let c = [
        1.0,
        (mu - 1.0) / 8.0,
        3.0 * (mu - 1.0) * (mu - 9.0) / 128.0,
        15.0 * (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / 3072.0,
    ];
    let m0 = 2.0 * j as f64 + 1.0;
    let smooth: f64 = c
        .iter()
        .enumerate()
        .map(|(n, cn)| {
            let p = m0 + 2.0 * n as f64;
            cn * w.powf(-p) / p
        })
        .sum();
    let phi = -nu * PI - PI / 2.0;
    let osc = |m: f64| -> Complex<f64> {
        // ∫_W^∞ ω^{−m} e^{i(2ω+φ)} dω
        let two_i = Complex::new(0.0, 2.0);
        let mut term = Complex::new(w.powf(-m), 0.0);
        let mut sum = term;
        for k in 0..12 {
            let next = term * (m + k as f64) / (two_i * w);
            if next.norm() < 1e-18 * sum.norm() {
                break;
            }
            term = next;
            sum += term;
        }
        -Complex::from_polar(1.0, 2.0 * w + phi) / two_i * sum
    };
    let oscillating = osc(m0 + 1.0).re - (mu - 1.0) / 4.0 * osc(m0 + 2.0).im;
    (smooth + oscillating) / PI
}

/// ∫₀^∞ g(ω)² ω^{α−1} dω split at 1 and at the tail start, where g is smooth
/// at 0 and `tail` supplies the [W, ∞) piece.
fn outer_integral<G: FnMut(f64) -> Result<f64>>(mut g: G, alpha: f64, tail: f64, what: &str) -> Result<f64> {
    let cfg = QuadConfig::with_tols(0.0, 1e-12);
    let mut failure = None;
    let mut eval = |w: f64| match g(w) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    // ω = v^{1/α} on [0, 1]
    let mut low = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let w = v.powf(1.0 / alpha);
        let gv = eval(w);
        gv * gv / alpha
    };
    let r1 = integrate_breaks(&mut low, &[0.0, 0.25, 1.0], cfg);
    let mut mid = |w: f64| {
        let gv = eval(w);
        gv * gv * w.powf(alpha - 1.0)
    };
    let mut pts = vec![1.0];
    while *pts.last().unwrap() < TAIL_START {
        let next = (pts.last().unwrap() + PI).min(TAIL_START);
        pts.push(next);
    }
    let r2 = integrate_breaks(&mut mid, &pts, cfg);
    if let Some(e) = failure {
        return Err(e);
    }
    let r1 = r1.require(what)?;
    let r2 = r2.require(what)?;
    Ok(r1 + r2 + tail)
}

/// a_j through the closed form ∫₀¹cos(ωt)(1−t²)^{ν−½}dt = √πΓ(ν+½)2^{ν−1} ω^{−ν} J_ν(ω).
pub fn corr_coefficients(params: &SpectralParams) -> Result<CorrCoefficients> {
    let nu = params.nu;
    let jmax = check_nu(nu)?;
    let scale = inner_scale_sq(nu);
    let mut a = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let alpha = 2.0 * (nu - j as f64);
        // h(ω) = J_ν(ω)/ω^ν, regular at the origin
        let h = |w: f64| -> Result<f64> { Ok(bessel_j(nu, w)? * w.powf(-nu)) };
        let v = outer_integral(h, alpha, hankel_tail(nu, j, TAIL_START), "a_j outer integral")?;
        a.push(scale * v);
    }
    Ok(CorrCoefficients { nu, a, overall_prefactor: prefactor(nu) })
}

/// Same coefficients by nested quadrature of the defining double integral
/// (inner integral with t = sin θ); only the asymptotic tail is shared.
pub fn corr_coefficients_direct(params: &SpectralParams) -> Result<CorrCoefficients> {
    let nu = params.nu;
    let jmax = check_nu(nu)?;
    let scale = inner_scale_sq(nu);
    let inner = |w: f64| -> Result<f64> {
        let n = ((w / 2.0).ceil() as usize).max(2);
        let pts: Vec<f64> = (0..=n).map(|i| PI / 2.0 * i as f64 / n as f64).collect();
        let mut f = |th: f64| (w * th.sin()).cos() * th.cos().powf(2.0 * nu);
        integrate_breaks(&mut f, &pts, QuadConfig::with_tols(1e-15, 1e-12)).require("a_j inner integral")
    };
    let mut a = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let alpha = 2.0 * (nu - j as f64);
        let tail = scale * hankel_tail(nu, j, TAIL_START);
        let v = outer_integral(inner, alpha, tail, "a_j direct outer integral")?;
        a.push(v);
    }
    Ok(CorrCoefficients { nu, a, overall_prefactor: prefactor(nu) })
}

/// j-th term prefactor·z^{−2(ν−j)}(−1)^j a_j ∫|f̂|²|k|^{2j}dk.
pub fn corr_form_term(z: f64, f: &BoundaryTestFunction, coeffs: &CorrCoefficients, j: usize) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::invalid("corr_form needs z > 0"));
    }
    let Some(&aj) = coeffs.a.get(j) else {
        return Err(Error::invalid(format!("no coefficient a_{j}")));
    };
    if f.is_zero() {
        return Ok(0.0);
    }
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let moment = fourier_moment(f, f, 2.0 * j as f64)?;
    Ok(coeffs.overall_prefactor * z.powf(-2.0 * (coeffs.nu - j as f64)) * sign * aj * moment)
}

/// (Corr(z)f, f).
pub fn corr_form(z: f64, f: &BoundaryTestFunction, coeffs: &CorrCoefficients) -> Result<f64> {
    (0..coeffs.a.len()).map(|j| corr_form_term(z, f, coeffs, j)).sum()
}

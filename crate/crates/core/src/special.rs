//! Special functions used by the propagators: Gamma wrappers, Gauss and
//! confluent hypergeometric functions, Bessel functions of real order, and
//! sphere averages of plane waves.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_breaks, QuadConfig};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// True when `x` is (numerically) a non-positive integer, i.e. a pole of Γ.
pub fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && (x - x.round()).abs() < 1e-12
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// 1/Γ(x), zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if is_gamma_pole(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Surface area of the unit sphere S^{d-1} ⊂ ℝ^d (2 for d = 1).
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Gauss series Σ (a)_n (b)_n / ((c)_n n!) x^n for |x| < 1.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if is_gamma_pole(c) {
        return Err(Error::Singular(format!("2F1 with c = {c} at a pole")));
    }
    if x.abs() >= 1.0 {
        return Err(Error::invalid(format!("2F1 series needs |x| < 1, got {x}")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..200_000 {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * x;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && n > 2 {
            return Ok(sum);
        }
        if term == 0.0 {
            return Ok(sum);
        }
    }
    Err(Error::numerical(format!("2F1 series at x = {x}"), term.abs()))
}

/// ₂F₁(a, b; c; x) for 0 ≤ x < 1.
///
/// Direct series for x ≤ 1/2; otherwise the connection formulas to 1 − x,
/// including the logarithmic cases c − a − b = −m, m = 0, 1, 2, ….
pub fn hyp2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::invalid(format!("2F1 argument {x} outside [0,1)")));
    }
    if x <= 0.5 {
        return hyp2f1_series(a, b, c, x);
    }
    hyp2f1_complement(a, b, c, 1.0 - x)
}

/// ₂F₁(a, b; c; 1 − w) for 0 < w ≤ 1, taking the complement directly so that
/// arguments close to 1 keep full relative precision in w.
pub fn hyp2f1_complement(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::invalid(format!("2F1 complement argument {w} outside (0,1]")));
    }
    if w >= 0.5 {
        return hyp2f1_series(a, b, c, 1.0 - w);
    }
    if is_gamma_pole(c) {
        return Err(Error::Singular(format!("2F1 with c = {c} at a pole")));
    }
    let s = c - a - b;
    let m_f = -s;
    if (m_f - m_f.round()).abs() > 1e-9 {
        let t1 = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b);
        let t2 = gamma(c) * gamma(-s) * rgamma(a) * rgamma(b);
        let f1 = if t1 != 0.0 { hyp2f1_series(a, b, 1.0 - s, w)? } else { 0.0 };
        let f2 = if t2 != 0.0 { hyp2f1_series(c - a, c - b, 1.0 + s, w)? } else { 0.0 };
        return Ok(t1 * f1 + t2 * w.powf(s) * f2);
    }
    if m_f.round() < 0.0 {
        // c - a - b a positive integer: swap roles via Euler's transformation
        let e = hyp2f1_complement(c - a, c - b, c, w)?;
        return Ok(w.powf(s) * e);
    }
    let m = m_f.round() as usize;
    // a + b = c + m
    let mut head = 0.0;
    if m > 0 {
        let pref = gamma(m as f64) * gamma(c) * rgamma(a) * rgamma(b) * w.powi(-(m as i32));
        let mut term = 1.0;
        let mut acc = 0.0;
        for n in 0..m {
            acc += term;
            let nf = n as f64;
            term *= (a - m as f64 + nf) * (b - m as f64 + nf) / ((nf + 1.0) * (1.0 - m as f64 + nf)) * w;
        }
        head = pref * acc;
    }
    let pref = -(if m.is_multiple_of(2) { 1.0 } else { -1.0 }) * gamma(c) * rgamma(a - m as f64) * rgamma(b - m as f64);
    if pref == 0.0 {
        return Ok(head);
    }
    let ln_w = w.ln();
    let mut psi_n1 = -EULER_GAMMA; // ψ(n+1)
    let mut psi_nm1 = digamma(m as f64 + 1.0); // ψ(n+m+1)
    let mut psi_a = digamma(a);
    let mut psi_b = digamma(b);
    let mut coeff = 1.0 / gamma(m as f64 + 1.0); // (a)_n (b)_n / (n! (n+m)!) w^n
    let mut sum = 0.0;
    for n in 0..100_000 {
        let nf = n as f64;
        let t = coeff * (ln_w - psi_n1 - psi_nm1 + psi_a + psi_b);
        sum += t;
        if n > 2 && t.abs() <= 1e-17 * sum.abs() {
            return Ok(head + pref * sum);
        }
        coeff *= (a + nf) * (b + nf) / ((nf + 1.0) * (nf + m as f64 + 1.0)) * w;
        psi_n1 += 1.0 / (nf + 1.0);
        psi_nm1 += 1.0 / (nf + m as f64 + 1.0);
        psi_a += 1.0 / (a + nf);
        psi_b += 1.0 / (b + nf);
    }
    Err(Error::numerical("2F1 logarithmic connection series", sum.abs()))
}

/// Kummer's function evaluated at a negative argument, M(a, b, −x) for x ≥ 0.
///
/// Uses Kummer's transformation e^{−x} M(b−a, b, x) (a positive-term series
/// once n exceeds a−b) for moderate x and the large-x asymptotic series beyond.
pub fn hyp1f1_neg(a: f64, b: f64, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::invalid("hyp1f1_neg needs x >= 0"));
    }
    if is_gamma_pole(b) {
        return Err(Error::Singular(format!("1F1 with b = {b}")));
    }
    let ba = b - a;
    let poly = is_gamma_pole(ba);
    if x <= 60.0 || poly {
        // e^{-x} M(b-a, b, x); for b-a a non-positive integer the series terminates
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 0usize;
        loop {
            let nf = n as f64;
            term *= (ba + nf) / ((b + nf) * (nf + 1.0)) * x;
            sum += term;
            n += 1;
            if term == 0.0 || (nf > x && term.abs() <= 1e-17 * sum.abs()) {
                break;
            }
            if n > 100_000 {
                return Err(Error::numerical("1F1 series", term.abs()));
            }
        }
        return Ok((-x).exp() * sum);
    }
    // M(a,b,-x) ~ Γ(b)/Γ(b-a) x^{-a} Σ (a)_n (a-b+1)_n / n! x^{-n}
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for n in 0..200 {
        let nf = n as f64;
        let next = term * (a + nf) * (a - b + 1.0 + nf) / (nf + 1.0) / x;
        if next.abs() >= prev.min(term.abs()) {
            break;
        }
        prev = term.abs();
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Ok(gamma(b) * rgamma(ba) * x.powf(-a) * sum)
}

/// Modified Bessel function K_ν(x), x > 0, from ∫₀^∞ e^{−x cosh t} cosh(νt) dt.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::invalid("bessel_k needs x > 0"));
    }
    let nu = nu.abs();
    // exponentially scaled integrand e^{-x (cosh t - 1)} cosh(νt)
    let f = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    // integrand negligible once x (cosh t - 1) - ν t > 745
    let mut t_max: f64 = 1.0;
    while x * (t_max.cosh() - 1.0) - nu * t_max < 60.0 {
        t_max *= 1.5;
    }
    let peak = if nu > x { (nu / x).asinh() } else { 0.0 };
    let mut pts = vec![0.0];
    if peak > 0.0 && peak < t_max {
        pts.push(peak);
    }
    pts.push(t_max);
    let mut g = f;
    let r = integrate_breaks(&mut g, &pts, QuadConfig::with_tols(0.0, 1e-13));
    Ok(r.require("bessel_k")? * (-x).exp())
}

fn bessel_j_series(nu: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h.powf(nu) * rgamma(nu + 1.0);
    let mut sum = term;
    let q = -h * h;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Bessel function J_ν(x) for real ν ≥ 0 and x ≥ 0.
///
/// Power series for x ≤ 8, Hankel's expansion once x ≥ 25 + ν², Schläfli's
/// integral representation in between.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if nu < 0.0 || x < 0.0 {
        return Err(Error::invalid("bessel_j needs nu >= 0 and x >= 0"));
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    if x <= 8.0 {
        return Ok(bessel_j_series(nu, x));
    }
    if x >= 25.0 + nu * nu {
        return Ok(bessel_j_hankel(nu, x));
    }
    let cfg = QuadConfig::with_tols(1e-15, 1e-13);
    let n_pieces = ((x / 2.0).ceil() as usize).max(4);
    let pts: Vec<f64> = (0..=n_pieces).map(|i| PI * i as f64 / n_pieces as f64).collect();
    let mut osc = |th: f64| (nu * th - x * th.sin()).cos();
    let first = integrate_breaks(&mut osc, &pts, cfg).require("bessel_j oscillatory part")? / PI;
    let s = (nu * PI).sin();
    if s.abs() < 1e-15 {
        return Ok(first);
    }
    let second = integrate(|t| (-x * t.sinh() - nu * t).exp(), 0.0, 40.0_f64.min(10.0 + (60.0 / x).asinh()), cfg)
        .require("bessel_j tail part")?;
    Ok(first - s / PI * second)
}

fn bessel_j_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= last.min(term.abs()) || next.abs() < 1e-17 {
            break;
        }
        last = term.abs();
        term = next;
        // a_k/x^k contributes to Q for odd k, to P for even k, with alternating signs
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - (nu / 2.0 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// ∫_{S^{d-1}} cos(x ω₁) dω: the spherical average of a plane wave
/// (times the sphere area). Equals (2π)^{d/2} x^{1−d/2} J_{d/2−1}(x).
pub fn sphere_cos_average(d: usize, x: f64) -> Result<f64> {
    let x = x.abs();
    match d {
        0 => Err(Error::invalid("dimension must be positive")),
        1 => Ok(2.0 * x.cos()),
        3 => Ok(if x < 1e-8 { 4.0 * PI * (1.0 - x * x / 6.0) } else { 4.0 * PI * x.sin() / x }),
        _ => {
            let h = d as f64 / 2.0;
            if x < 1e-10 {
                return Ok(sphere_area(d));
            }
            Ok((2.0 * PI).powf(h) * x.powf(1.0 - h) * bessel_j(h - 1.0, x)?)
        }
    }
}

/// e^{−x} ∫_{S^{d-1}} e^{x ω₁} dω for x ≥ 0.
pub fn sphere_exp_average_scaled(d: usize, x: f64) -> Result<f64> {
    match d {
        0 => Err(Error::invalid("dimension must be positive")),
        1 => Ok(1.0 + (-2.0 * x).exp()),
        3 => Ok(if x < 1e-8 { 4.0 * PI * (1.0 - x) } else { 2.0 * PI * (1.0 - (-2.0 * x).exp()) / x }),
        _ => {
            if x == 0.0 {
                return Ok(sphere_area(d));
            }
            let p = (d - 2) as i32;
            let lower = sphere_area(d - 1);
            // peak width ~ 1/sqrt(x) around θ = 0
            let knee = (4.0 / x.sqrt()).min(PI);
            let mut f = |th: f64| (x * (th.cos() - 1.0)).exp() * th.sin().powi(p);
            let r = integrate_breaks(&mut f, &[0.0, knee, PI], QuadConfig::with_tols(1e-300, 1e-13));
            Ok(lower * r.require("sphere average")?)
        }
    }
}

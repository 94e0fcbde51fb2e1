//! Spectral constants of the kernel family and the Gaussian-bump test functions
//! on which every boundary form is evaluated.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma, is_gamma_pole, rgamma};

/// Derived constants for a scalar of mass² `m2` on the (d+1)-dimensional half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub d: usize,
    pub m2: f64,
    pub nu: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// NaN when Γ(Δ) has a pole.
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub c: f64,
}

/// γ = Γ(Δ)/(2π^{d/2}Γ(Δ+1−d/2)).
pub fn propagator_normalization(delta: f64, d: usize) -> f64 {
    if is_gamma_pole(delta) {
        return f64::NAN;
    }
    let h = d as f64 / 2.0;
    gamma(delta) * rgamma(delta + 1.0 - h) / (2.0 * PI.powf(h))
}

impl SpectralParams {
    pub fn new(d: usize, m2: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("boundary dimension d must be positive"));
        }
        if !m2.is_finite() {
            return Err(Error::invalid("m2 must be finite"));
        }
        let df = d as f64;
        let disc = df * df + 4.0 * m2;
        if !(disc > 0.0) {
            return Err(Error::invalid(format!(
                "m2 = {m2} violates the spectral bound m2 > -d^2/4 = {}",
                -df * df / 4.0
            )));
        }
        let nu = disc.sqrt() / 2.0;
        let delta_plus = df / 2.0 + nu;
        let delta_minus = df / 2.0 - nu;
        Ok(SpectralParams {
            d,
            m2,
            nu,
            delta_plus,
            delta_minus,
            gamma_plus: propagator_normalization(delta_plus, d),
            gamma_minus: propagator_normalization(delta_minus, d),
            c: 2.0 * nu,
        })
    }

    /// Convenience constructor from ν: m² = ν² − d²/4.
    pub fn from_nu(d: usize, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::invalid("nu must be positive"));
        }
        let df = d as f64;
        let mut p = Self::new(d, nu * nu - df * df / 4.0)?;
        // keep ν exact rather than round-tripping through a square root
        p.nu = nu;
        p.delta_plus = df / 2.0 + nu;
        p.delta_minus = df / 2.0 - nu;
        p.gamma_plus = propagator_normalization(p.delta_plus, d);
        p.gamma_minus = propagator_normalization(p.delta_minus, d);
        p.c = 2.0 * nu;
        Ok(p)
    }

    pub fn delta(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.delta_plus,
            Branch::Minus => self.delta_minus,
        }
    }

    pub fn gamma(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.gamma_plus,
            Branch::Minus => self.gamma_minus,
        }
    }
}

pub fn spectral_params(d: usize, m2: f64) -> Result<SpectralParams> {
    SpectralParams::new(d, m2)
}

/// Which of the two boundary conditions (Δ₊ or Δ₋ fall-off).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            _ => Err(Error::invalid(format!("unknown branch '{s}'"))),
        }
    }
}

/// a·exp(−|x−center|²/(2w²)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = self.center.iter().zip(x).map(|(c, x)| (x - c) * (x - c)).sum();
        self.amplitude * (-r2 / (2.0 * self.width * self.width)).exp()
    }
}

/// Finite sum of Gaussian bumps on ℝᵈ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTestFunction {
    pub bumps: Vec<Bump>,
}

impl BoundaryTestFunction {
    pub fn new(bumps: Vec<Bump>) -> Result<Self> {
        let Some(first) = bumps.first() else {
            return Err(Error::invalid("test function needs at least one bump"));
        };
        let d = first.center.len();
        if d == 0 {
            return Err(Error::invalid("bump centre must have dimension >= 1"));
        }
        for b in &bumps {
            if b.center.len() != d {
                return Err(Error::invalid("bumps of mixed dimension"));
            }
            if !(b.width > 0.0) || !b.width.is_finite() {
                return Err(Error::invalid(format!("bump width must be positive, got {}", b.width)));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("bump parameters must be finite"));
            }
        }
        Ok(BoundaryTestFunction { bumps })
    }

    pub fn bump(center: Vec<f64>, width: f64, amplitude: f64) -> Result<Self> {
        Self::new(vec![Bump { center, width, amplitude }])
    }

    /// The zero function in dimension d (a single bump of amplitude 0).
    pub fn zero(d: usize) -> Self {
        BoundaryTestFunction {
            bumps: vec![Bump {
                center: vec![0.0; d],
                width: 1.0,
                amplitude: 0.0,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.bumps[0].center.len()
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    /// Unitary transform (2π)^{−d/2}∫e^{ik·x}f(x)dx as (re, im).
    pub fn fourier(&self, k: &[f64]) -> (f64, f64) {
        let d = self.dim() as i32;
        let k2: f64 = k.iter().map(|v| v * v).sum();
        let (mut re, mut im) = (0.0, 0.0);
        for b in &self.bumps {
            let mag = b.amplitude * b.width.powi(d) * (-0.5 * b.width * b.width * k2).exp();
            let phase: f64 = k.iter().zip(&b.center).map(|(k, c)| k * c).sum();
            re += mag * phase.cos();
            im += mag * phase.sin();
        }
        (re, im)
    }

    /// Radius of a ball about the origin outside which |f| < 1e−16·max|a|.
    pub fn support_radius(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.center.iter().map(|c| c * c).sum::<f64>().sqrt() + 8.6 * b.width)
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.amplitude *= s;
        }
        out
    }

    pub fn translated(&self, a: &[f64]) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            for (c, a) in b.center.iter_mut().zip(a) {
                *c += a;
            }
        }
        out
    }

    /// θf: the sign flip x₁ ↦ −x₁.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.center[0] = -b.center[0];
        }
        out
    }

    /// x ↦ weight·f(x/s).
    pub fn dilated(&self, s: f64, weight: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.center.iter_mut().for_each(|c| *c *= s);
            b.width *= s;
            b.amplitude *= weight;
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::invalid("adding test functions of different dimension"));
        }
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().cloned());
        Ok(BoundaryTestFunction { bumps })
    }

    /// ∫ f(x)⁴ dx, closed form through products of four Gaussians.
    pub fn integral_fourth_power(&self) -> f64 {
        let n = self.bumps.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let bs = [&self.bumps[i], &self.bumps[j], &self.bumps[k], &self.bumps[l]];
                        total += gaussian_product_integral(&bs);
                    }
                }
            }
        }
        total
    }

    /// ∫ f(x)² dx.
    pub fn integral_square(&self) -> f64 {
        let mut total = 0.0;
        for a in &self.bumps {
            for b in &self.bumps {
                total += gaussian_product_integral(&[a, b]);
            }
        }
        total
    }
}

/// ∫ ∏ bumps dx over ℝᵈ.
pub fn gaussian_product_integral(bumps: &[&Bump]) -> f64 {
    let d = bumps[0].center.len();
    let p: Vec<f64> = bumps.iter().map(|b| 1.0 / (b.width * b.width)).collect();
    let ptot: f64 = p.iter().sum();
    // Σ p_i|c_i|² − P|m|² written as a sum of pairwise distances
    let mut spread = 0.0;
    for i in 0..bumps.len() {
        for j in i + 1..bumps.len() {
            let r2: f64 = bumps[i]
                .center
                .iter()
                .zip(&bumps[j].center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            spread += p[i] * p[j] * r2;
        }
    }
    spread /= ptot;
    let amp: f64 = bumps.iter().map(|b| b.amplitude).product();
    amp * (2.0 * PI / ptot).powf(d as f64 / 2.0) * (-0.5 * spread).exp()
}

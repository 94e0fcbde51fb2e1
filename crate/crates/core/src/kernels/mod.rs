//! Continuum propagators of the free field: bulk-to-bulk G±, bulk-to-boundary
//! H₊ and the boundary kernels α±, together with their Fourier-side forms,
//! the covariance-splitting identity and the Corr(z) subtraction.

mod corr;
mod forms;
mod splitting;

use std::f64::consts::PI;
use std::io::Write;

pub use corr::{corr_coefficients, corr_coefficients_direct, corr_form, corr_form_term, CorrCoefficients};
pub use forms::{
    boundary_form, boundary_form_continued, calibrate_fourier_constant, equal_height_form,
    fourier_constant, fourier_constant_analytic, fourier_moment, inverse_identity_residual,
    inverse_identity_residual_signed, position_pair_integral, radial_fourier_integral,
    transform_source,
};
pub use splitting::{splitting_refinement, splitting_report, splitting_residual, SplittingReport};

use crate::error::{Error, Result};
use crate::geometry::{chordal_u, BulkPoint};
use crate::params::{Branch, BoundaryTestFunction, SpectralParams};
use crate::quad::{integrate_breaks, QuadConfig};
use crate::special::{gamma, hyp2f1_complement, hyp2f1_series, is_gamma_pole};

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Numerical { what, achieved } => Error::Numerical {
            what: format!("{what} ({ctx})"),
            achieved,
        },
        other => other,
    }
}

/// Bulk-to-bulk propagator G±(u) as a function of the chordal variable u.
///
/// Evaluated as γ 2^{−Δ} ξ^Δ ₂F₁(Δ/2, Δ/2+½; Δ−d/2+1; ξ²) with ξ = 1/(1+u),
/// which is valid for every u > 0.
pub fn bulk_propagator(u: f64, params: &SpectralParams, branch: Branch) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::invalid(format!("chordal variable must be finite and >= 0, got {u}")));
    }
    if u == 0.0 {
        return Err(Error::Singular("coincident points (u = 0): the bulk propagator is singular on the diagonal".into()));
    }
    let delta = params.delta(branch);
    let gam = params.gamma(branch);
    let c = delta - params.d as f64 / 2.0 + 1.0;
    if !gam.is_finite() || is_gamma_pole(c) || is_gamma_pole(delta) {
        return Err(Error::Singular(format!("no normalizable propagator for Δ = {delta}, d = {}", params.d)));
    }
    let xi = 1.0 / (1.0 + u);
    // 1 − ξ² without cancellation
    let w = u * (u + 2.0) * xi * xi;
    let (a, b) = (delta / 2.0, delta / 2.0 + 0.5);
    let f = if w < 0.5 { hyp2f1_complement(a, b, c, w) } else { hyp2f1_series(a, b, c, xi * xi) }
        .map_err(|e| with_context(e, &format!("u = {u:e}")))?;
    Ok(gam * (delta * (xi / 2.0).ln()).exp() * f)
}

/// The same propagator from the hypergeometric series in −2/u; only for u > 2.
pub fn bulk_propagator_series(u: f64, params: &SpectralParams, branch: Branch) -> Result<f64> {
    if !(u > 2.0) {
        return Err(Error::invalid(format!("the −2/u series needs u > 2, got {u}")));
    }
    let delta = params.delta(branch);
    let d = params.d as f64;
    let c = 2.0 * delta + 1.0 - d;
    if is_gamma_pole(c) || !params.gamma(branch).is_finite() {
        return Err(Error::Singular(format!("series parameter c = {c} at a pole")));
    }
    let f = hyp2f1_series(delta, delta + (1.0 - d) / 2.0, c, -2.0 / u)
        .map_err(|e| with_context(e, &format!("u = {u:e}")))?;
    Ok(params.gamma(branch) * (2.0 * u).powf(-delta) * f)
}

/// G±(p, q) for two bulk points.
pub fn bulk_propagator_points(p: &BulkPoint, q: &BulkPoint, params: &SpectralParams, branch: Branch) -> Result<f64> {
    bulk_propagator(chordal_u(p, q)?, params, branch)
}

/// H₊(z, x; x') = γ₊ (z/(z² + |x−x'|²))^{Δ₊}.
pub fn bulk_to_boundary(z: f64, x: &[f64], xp: &[f64], params: &SpectralParams) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::invalid(format!("bulk-to-boundary needs z > 0, got {z}")));
    }
    if x.len() != params.d || xp.len() != params.d {
        return Err(Error::invalid("bulk-to-boundary: dimension mismatch"));
    }
    let r2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(params.gamma_plus * (z / (z * z + r2)).powf(params.delta_plus))
}

/// Position-space boundary kernel α±(x, x') = γ± |x−x'|^{−2Δ±}, x ≠ x'.
pub fn alpha_kernel(x: &[f64], xp: &[f64], params: &SpectralParams, branch: Branch) -> Result<f64> {
    let r2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
    if r2 == 0.0 {
        return Err(Error::Singular("α± is a distribution on the diagonal".into()));
    }
    let g = params.gamma(branch);
    if !g.is_finite() {
        return Err(Error::Singular("γ has a pole for these parameters".into()));
    }
    Ok(g * r2.powf(-params.delta(branch)))
}

/// (H₊f)(z, x) = ∫ H₊(z, x; y) f(y) dy for a Gaussian-bump f.
///
/// Each bump is integrated through the Schwinger representation of
/// (z² + |x−y|²)^{−Δ₊}, leaving a one-dimensional integral per bump.
pub fn smeared_bulk_to_boundary(z: f64, x: &[f64], f: &BoundaryTestFunction, params: &SpectralParams) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::invalid(format!("smeared bulk-to-boundary needs z > 0, got {z}")));
    }
    if x.len() != params.d || f.dim() != params.d {
        return Err(Error::invalid("smeared bulk-to-boundary: dimension mismatch"));
    }
    let delta = params.delta_plus;
    let h = params.d as f64 / 2.0;
    let mut total = 0.0;
    for b in &f.bumps {
        if b.amplitude == 0.0 {
            continue;
        }
        let s2 = b.width * b.width;
        let q = z * z / (2.0 * s2);
        let r2: f64 = b.center.iter().zip(x).map(|(c, x)| (c - x) * (c - x)).sum();
        let rr = r2 / (2.0 * s2);
        let mut g = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            ((delta - 1.0) * t.ln() - t - h * (t + q).ln() - rr * t / (t + q)).exp()
        };
        let scale = delta.max(1.0) + q.min(1.0);
        let pts = [0.0, 0.01 * scale, scale, 4.0 * scale, 20.0 * scale, 60.0 * scale + 200.0];
        let v = integrate_breaks(&mut g, &pts, QuadConfig::with_tols(0.0, 1e-12))
            .require("smeared bulk-to-boundary integral")?;
        total += b.amplitude * PI.powf(h) * v;
    }
    Ok(params.gamma_plus * z.powf(params.d as f64 - delta) / gamma(delta) * total)
}

/// Leading small-z coefficient: H₊f(z, x) ≈ z^{d−Δ₊} f(x) · this constant.
pub fn smeared_leading_constant(params: &SpectralParams) -> f64 {
    let h = params.d as f64 / 2.0;
    params.gamma_plus * PI.powf(h) * gamma(params.delta_plus - h) / gamma(params.delta_plus)
}

/// Table of (u, G±(u)) rows.
pub fn kernel_table(us: &[f64], params: &SpectralParams, branch: Branch) -> Result<Vec<(f64, f64)>> {
    us.iter().map(|&u| Ok((u, bulk_propagator(u, params, branch)?))).collect()
}

/// Writes (u, value) rows as CSV with a header.
pub fn write_kernel_csv<W: Write>(out: W, column: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", column]).map_err(|e| Error::Io(e.to_string()))?;
    for (u, v) in rows {
        w.write_record([format!("{u:.17e}"), format!("{v:.17e}")])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

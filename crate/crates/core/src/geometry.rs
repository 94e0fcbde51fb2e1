//! Half-space model of Euclidean AdS: points, the chordal distance variable,
//! the Möbius generators acting on bulk and conformal boundary, and the
//! hyperbolic volume density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SpectralParams;

/// A point (z, x₁, …, x_d) of the half-space, z > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkPoint {
    pub z: f64,
    pub x: Vec<f64>,
}

impl BulkPoint {
    pub fn new(z: f64, x: Vec<f64>) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid(format!("bulk point needs z > 0, got {z}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("bulk point has non-finite coordinates"));
        }
        Ok(BulkPoint { z, x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// u = ((z−z')² + |x−x'|²) / (2zz'); cosh of the geodesic distance is 1 + u.
pub fn chordal_u(p: &BulkPoint, q: &BulkPoint) -> Result<f64> {
    if !(p.z > 0.0 && q.z > 0.0) {
        return Err(Error::invalid("chordal_u needs z > 0 for both points"));
    }
    if p.dim() != q.dim() {
        return Err(Error::invalid("chordal_u: dimension mismatch"));
    }
    let dz = p.z - q.z;
    Ok((dz * dz + dist2(&p.x, &q.x)) / (2.0 * p.z * q.z))
}

/// Density of the hyperbolic volume form, z^{−d−1}.
pub fn volume_weight(z: f64, d: usize) -> f64 {
    z.powi(-(d as i32) - 1)
}

/// Hyperbolic volume of [z₀, A] × (box of boundary volume 1): (z₀^{−d} − A^{−d})/d.
pub fn slab_volume_per_boundary_volume(z0: f64, a: f64, d: usize) -> f64 {
    let di = d as i32;
    (z0.powi(-di) - a.powi(-di)) / d as f64
}

/// One generator of the conformal group of ℝᵈ, extended to the half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    Translation(Vec<f64>),
    Dilation(f64),
    /// x̲ ↦ x̲ / |x̲|² (unit sphere inversion).
    Inversion,
}

impl Generator {
    fn inverse(&self) -> Generator {
        match self {
            Generator::Translation(a) => Generator::Translation(a.iter().map(|v| -v).collect()),
            Generator::Dilation(s) => Generator::Dilation(1.0 / s),
            Generator::Inversion => Generator::Inversion,
        }
    }

    fn apply_bulk(&self, p: &BulkPoint) -> Result<BulkPoint> {
        match self {
            Generator::Translation(a) => {
                check_dim(a.len(), p.dim())?;
                Ok(BulkPoint {
                    z: p.z,
                    x: p.x.iter().zip(a).map(|(x, a)| x + a).collect(),
                })
            }
            Generator::Dilation(s) => Ok(BulkPoint {
                z: s * p.z,
                x: p.x.iter().map(|x| s * x).collect(),
            }),
            Generator::Inversion => {
                let r2 = p.z * p.z + norm2(&p.x);
                Ok(BulkPoint {
                    z: p.z / r2,
                    x: p.x.iter().map(|x| x / r2).collect(),
                })
            }
        }
    }

    fn apply_boundary(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Generator::Translation(a) => {
                check_dim(a.len(), x.len())?;
                Ok(x.iter().zip(a).map(|(x, a)| x + a).collect())
            }
            Generator::Dilation(s) => Ok(x.iter().map(|x| s * x).collect()),
            Generator::Inversion => {
                let r2 = norm2(x);
                if r2 == 0.0 {
                    return Err(Error::Singular("inversion pole at x = 0".into()));
                }
                Ok(x.iter().map(|x| x / r2).collect())
            }
        }
    }

    /// ln |det ∂g(x)/∂x| on the boundary.
    fn ln_jacobian(&self, x: &[f64]) -> Result<f64> {
        let d = x.len() as f64;
        match self {
            Generator::Translation(_) => Ok(0.0),
            Generator::Dilation(s) => Ok(d * s.ln()),
            Generator::Inversion => {
                let r2 = norm2(x);
                if r2 == 0.0 {
                    return Err(Error::Singular("inversion Jacobian singular at x = 0".into()));
                }
                Ok(-d * r2.ln())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Generator::Dilation(s) if !(*s > 0.0) || !s.is_finite() => {
                Err(Error::invalid(format!("dilation scale must be positive, got {s}")))
            }
            Generator::Translation(a) if a.iter().any(|v| !v.is_finite()) => {
                Err(Error::invalid("translation vector not finite"))
            }
            _ => Ok(()),
        }
    }
}

fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::invalid(format!("dimension mismatch: {a} vs {b}")))
    } else {
        Ok(())
    }
}

/// A product of generators, stored in application order (first element acts first).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConformalMap {
    pub steps: Vec<Generator>,
}

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap { steps: Vec::new() }
    }

    pub fn from_generator(g: Generator) -> Result<Self> {
        g.validate()?;
        Ok(ConformalMap { steps: vec![g] })
    }

    pub fn translation(a: Vec<f64>) -> Result<Self> {
        Self::from_generator(Generator::Translation(a))
    }

    pub fn dilation(s: f64) -> Result<Self> {
        Self::from_generator(Generator::Dilation(s))
    }

    pub fn inversion() -> Self {
        ConformalMap {
            steps: vec![Generator::Inversion],
        }
    }

    /// The map "first `self`, then `next`".
    pub fn then(&self, next: &ConformalMap) -> ConformalMap {
        let mut steps = self.steps.clone();
        steps.extend(next.steps.iter().cloned());
        ConformalMap { steps }
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &ConformalMap, inner: &ConformalMap) -> ConformalMap {
        inner.then(outer)
    }

    pub fn inverse(&self) -> ConformalMap {
        ConformalMap {
            steps: self.steps.iter().rev().map(Generator::inverse).collect(),
        }
    }

    pub fn apply_bulk(&self, p: &BulkPoint) -> Result<BulkPoint> {
        let mut q = p.clone();
        for g in &self.steps {
            g.validate()?;
            q = g.apply_bulk(&q)?;
        }
        Ok(q)
    }

    pub fn apply_boundary(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        for g in &self.steps {
            g.validate()?;
            y = g.apply_boundary(&y)?;
        }
        Ok(y)
    }

    /// |det ∂m(x)/∂x|, accumulated along the composition by the chain rule.
    pub fn jacobian_det(&self, x: &[f64]) -> Result<f64> {
        let mut y = x.to_vec();
        let mut ln_det = 0.0;
        for g in &self.steps {
            g.validate()?;
            ln_det += g.ln_jacobian(&y)?;
            y = g.apply_boundary(&y)?;
        }
        Ok(ln_det.exp())
    }

    /// λ_m(x) = |det ∂m(x)/∂x|^{−Δ₊/d}.
    pub fn conformal_factor(&self, x: &[f64], params: &SpectralParams) -> Result<f64> {
        check_dim(x.len(), params.d)?;
        let det = self.jacobian_det(x)?;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::Singular("singular Jacobian".into()));
        }
        Ok(det.powf(-params.delta_plus / params.d as f64))
    }
}

pub fn apply_map_bulk(m: &ConformalMap, p: &BulkPoint) -> Result<BulkPoint> {
    m.apply_bulk(p)
}

pub fn apply_map_boundary(m: &ConformalMap, x: &[f64]) -> Result<Vec<f64>> {
    m.apply_boundary(x)
}

pub fn conformal_factor(m: &ConformalMap, x: &[f64], params: &SpectralParams) -> Result<f64> {
    m.conformal_factor(x, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadConfig};
    use proptest::prelude::*;

    fn pt(z: f64, x: &[f64]) -> BulkPoint {
        BulkPoint::new(z, x.to_vec()).unwrap()
    }

    #[test]
    fn chordal_examples() {
        assert_eq!(chordal_u(&pt(1.0, &[0.0]), &pt(1.0, &[0.0])).unwrap(), 0.0);
        assert_eq!(chordal_u(&pt(1.0, &[0.0]), &pt(2.0, &[0.0])).unwrap(), 0.25);
        assert!(BulkPoint::new(0.0, vec![0.0]).is_err());
        assert!(BulkPoint::new(-1.0, vec![0.0]).is_err());
    }

    #[test]
    fn generator_examples() {
        let p = pt(1.0, &[0.0]);
        assert_eq!(ConformalMap::dilation(2.0).unwrap().apply_bulk(&p).unwrap(), pt(2.0, &[0.0]));
        assert_eq!(ConformalMap::inversion().apply_bulk(&p).unwrap(), p);
        let t = ConformalMap::translation(vec![1.5, -2.0]).unwrap();
        assert_eq!(t.apply_boundary(&[1.0, 1.0]).unwrap(), vec![2.5, -1.0]);
        let e = [0.6, 0.8];
        let inv = ConformalMap::inversion().apply_boundary(&e).unwrap();
        assert!((inv[0] - 0.6).abs() < 1e-15 && (inv[1] - 0.8).abs() < 1e-15);
        assert!(matches!(
            ConformalMap::inversion().apply_boundary(&[0.0, 0.0]),
            Err(Error::Singular(_))
        ));
        assert!(ConformalMap::dilation(0.0).is_err());
        assert!(ConformalMap::dilation(-1.0).is_err());
    }

    #[test]
    fn boundary_action_is_z_to_zero_limit() {
        let m = ConformalMap::translation(vec![0.3, -0.2])
            .unwrap()
            .then(&ConformalMap::inversion())
            .then(&ConformalMap::dilation(1.7).unwrap());
        let x = [0.4, 1.1];
        let b = m.apply_boundary(&x).unwrap();
        let bulk = m.apply_bulk(&pt(1e-8, &x)).unwrap();
        for (u, v) in b.iter().zip(&bulk.x) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn conformal_factor_examples() {
        let params = SpectralParams::new(2, 0.0).unwrap(); // Δ₊ = 2
        let x = [0.3, 0.4];
        let t = ConformalMap::translation(vec![1.0, 2.0]).unwrap();
        assert_eq!(t.conformal_factor(&x, &params).unwrap(), 1.0);
        let s = 3.0;
        let dil = ConformalMap::dilation(s).unwrap();
        assert!((dil.conformal_factor(&x, &params).unwrap() - s.powf(-2.0)).abs() < 1e-14);
        let inv = ConformalMap::inversion();
        assert!((inv.conformal_factor(&[0.6, 0.8], &params).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(inv.conformal_factor(&[0.0, 0.0], &params), Err(Error::Singular(_))));
    }

    #[test]
    fn volume_weight_examples() {
        assert_eq!(volume_weight(1.0, 1), 1.0);
        assert_eq!(volume_weight(1.0, 3), 1.0);
        assert_eq!(volume_weight(2.0, 1), 0.25);
        for d in 1..=3 {
            let (z0, a) = (0.05, 2.0);
            let q = integrate(|z| volume_weight(z, d), z0, a, QuadConfig::with_rel(1e-14)).value;
            let exact = slab_volume_per_boundary_volume(z0, a, d);
            assert!(((q - exact) / exact).abs() < 1e-10);
        }
    }

    fn generator_strategy(d: usize) -> impl Strategy<Value = Generator> {
        prop_oneof![
            prop::collection::vec(-2.0..2.0f64, d).prop_map(Generator::Translation),
            (0.3..3.0f64).prop_map(Generator::Dilation),
            Just(Generator::Inversion),
        ]
    }

    fn map_strategy(d: usize) -> impl Strategy<Value = ConformalMap> {
        prop::collection::vec(generator_strategy(d), 1..5).prop_map(|steps| ConformalMap { steps })
    }

    fn point_strategy(d: usize) -> impl Strategy<Value = BulkPoint> {
        (0.1..3.0f64, prop::collection::vec(-2.0..2.0f64, d)).prop_map(|(z, x)| BulkPoint { z, x })
    }

    proptest! {
        #[test]
        fn chordal_symmetric(p in point_strategy(2), q in point_strategy(2)) {
            prop_assert_eq!(chordal_u(&p, &q).unwrap(), chordal_u(&q, &p).unwrap());
        }

        #[test]
        fn chordal_invariant_under_maps(m in map_strategy(2), p in point_strategy(2), q in point_strategy(2)) {
            let u = chordal_u(&p, &q).unwrap();
            let v = chordal_u(&m.apply_bulk(&p).unwrap(), &m.apply_bulk(&q).unwrap()).unwrap();
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u), "u={} v={}", u, v);
        }

        #[test]
        fn composition_and_inverse(a in map_strategy(2), b in map_strategy(2), p in point_strategy(2)) {
            let ab = ConformalMap::compose(&a, &b);
            let lhs = ab.apply_bulk(&p).unwrap();
            let rhs = a.apply_bulk(&b.apply_bulk(&p).unwrap()).unwrap();
            prop_assert!((lhs.z - rhs.z).abs() <= 1e-12 * (1.0 + rhs.z));
            let back = ab.inverse().apply_bulk(&lhs).unwrap();
            prop_assert!((back.z - p.z).abs() <= 1e-9 * (1.0 + p.z));
            for (u, v) in back.x.iter().zip(&p.x) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()));
            }
        }

        #[test]
        fn conformal_factor_cocycle(u in map_strategy(1), v in map_strategy(1), x in 0.2..2.0f64) {
            let params = SpectralParams::new(1, 6.25).unwrap();
            let x = [x];
            let uv = ConformalMap::compose(&u, &v);
            let vx = v.apply_boundary(&x);
            prop_assume!(vx.is_ok());
            let vx = vx.unwrap();
            prop_assume!(vx[0].abs() > 1e-3);
            let lhs = uv.conformal_factor(&x, &params);
            let a = u.conformal_factor(&vx, &params);
            let b = v.conformal_factor(&x, &params);
            prop_assume!(lhs.is_ok() && a.is_ok() && b.is_ok());
            let (lhs, rhs) = (lhs.unwrap(), a.unwrap() * b.unwrap());
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-10, "{} vs {}", lhs, rhs);
        }
    }
}

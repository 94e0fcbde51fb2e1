//! Flat key-value (TOML) configurations, one per subcommand. Every key has a
//! default, so an empty file or no `--config` at all is a valid run.

use adslab::{BoundaryTestFunction, Bump};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn bump(center: Vec<f64>, width: f64, amplitude: f64) -> Result<BoundaryTestFunction, CliError> {
    Ok(BoundaryTestFunction::bump(center, width, amplitude)?)
}

/// Single-bump test functions from parallel lists.
pub fn family(centers: &[Vec<f64>], widths: &[f64], amplitudes: &[f64]) -> Result<Vec<BoundaryTestFunction>, CliError> {
    if centers.len() != widths.len() || centers.len() != amplitudes.len() {
        return Err(CliError::Config("f_centers, f_widths and f_amplitudes must have equal length".into()));
    }
    centers
        .iter()
        .zip(widths)
        .zip(amplitudes)
        .map(|((c, &w), &a)| Ok(BoundaryTestFunction::new(vec![Bump { center: c.clone(), width: w, amplitude: a }])?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub d: usize,
    pub m2: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig { d: 1, m2: 6.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub d: usize,
    pub m2: f64,
    /// "plus" or "minus".
    pub branch: String,
    pub u_min: f64,
    pub u_max: f64,
    pub points: usize,
    /// Height at which z'^{−Δ₊}G₊ is compared with H₊.
    pub z_prime: f64,
    pub tolerance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            d: 1,
            m2: 6.25,
            branch: "plus".into(),
            u_min: 1e-3,
            u_max: 1e3,
            points: 25,
            z_prime: 1e-4,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingConfig {
    pub d: usize,
    pub m2: f64,
    /// (z, x₁, z', x₁') per pair; the other coordinates are zero.
    pub pairs: Vec<[f64; 4]>,
    pub rel_tol: f64,
    pub tolerance: f64,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig {
            d: 2,
            m2: -0.75,
            pairs: vec![[1.0, 0.0, 1.0, 1.0], [0.5, 0.2, 2.0, -0.3], [1.0, 0.0, 0.3, 0.0], [2.0, 1.0, 1.5, -2.0]],
            rel_tol: 1e-10,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrConfig {
    pub d: usize,
    pub m2: f64,
    pub z: f64,
    pub f_center: Vec<f64>,
    pub f_width: f64,
    pub f_amplitude: f64,
    pub tolerance: f64,
}

impl Default for CorrConfig {
    fn default() -> Self {
        CorrConfig {
            d: 1,
            m2: 0.0,
            z: 1e-3,
            f_center: vec![0.0],
            f_width: 1.0,
            f_amplitude: 1.0,
            tolerance: 1e-2,
        }
    }
}

/// Shared by `scaling-fit` and `triviality-run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub m2: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub l: f64,
    pub n_x: usize,
    pub h_t: f64,
    pub max_sites: usize,
    pub z0_list: Vec<f64>,
    pub f_center: Vec<f64>,
    pub f_width: f64,
    pub f_amplitude: f64,
    pub n: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn triviality() -> Self {
        RunConfig {
            d: 1,
            m2: 6.25,
            lambda: 0.1,
            a: 2.0,
            l: 1.0,
            n_x: 32,
            h_t: 0.1,
            max_sites: adslab::lattice::DEFAULT_MAX_SITES,
            z0_list: vec![0.2, 0.1, 0.05, 0.025],
            f_center: vec![0.0],
            f_width: 0.3,
            f_amplitude: 20.0,
            n: 4000,
            seed: 1,
        }
    }

    pub fn scaling() -> Self {
        RunConfig {
            n_x: 16,
            z0_list: vec![3.2e-2, 1e-2, 3.2e-3, 1e-3],
            f_amplitude: 1.0,
            ..Self::triviality()
        }
    }

    pub fn to_core(&self) -> Result<adslab::interaction::TrivialityConfig, CliError> {
        Ok(adslab::interaction::TrivialityConfig {
            d: self.d,
            m2: self.m2,
            lambda: self.lambda,
            a: self.a,
            l: self.l,
            n_x: self.n_x,
            h_t: self.h_t,
            max_sites: self.max_sites,
            z0_list: self.z0_list.clone(),
            f: bump(self.f_center.clone(), self.f_width, self.f_amplitude)?,
            n: self.n,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalConfig {
    pub d: usize,
    pub m2: f64,
    pub lambda: f64,
    pub z0: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub l: f64,
    pub n_z: usize,
    pub n_x: usize,
    pub n: usize,
    pub seed: u64,
    pub f_centers: Vec<Vec<f64>>,
    pub f_widths: Vec<f64>,
    pub f_amplitudes: Vec<f64>,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        FunctionalConfig {
            d: 1,
            m2: 6.25,
            lambda: 0.1,
            z0: 0.2,
            a: 2.0,
            l: 1.0,
            n_z: 8,
            n_x: 8,
            n: 10_000,
            seed: 1,
            f_centers: vec![vec![0.0], vec![0.4], vec![-0.3]],
            f_widths: vec![0.3, 0.2, 0.25],
            f_amplitudes: vec![0.1, -0.15, 0.08],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningConfig {
    pub n_bulk: usize,
    pub n_bdry: usize,
    pub lambda: f64,
    pub f: Vec<f64>,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        ConditioningConfig {
            n_bulk: 1,
            n_bdry: 1,
            lambda: 0.5,
            f: vec![0.8],
            seed: 1,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormConfig {
    pub d: usize,
    pub m2: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub l: f64,
    pub z0_list: Vec<f64>,
    pub f_center: Vec<f64>,
    pub f_width: f64,
    pub f_amplitude: f64,
    pub tolerance: f64,
}

impl Default for RenormConfig {
    fn default() -> Self {
        RenormConfig {
            d: 1,
            m2: 6.25,
            lambda: 0.1,
            a: 1.0,
            l: 2.0,
            z0_list: vec![1e-1, 1e-2, 1e-3],
            f_center: vec![0.0],
            f_width: 0.3,
            f_amplitude: 1.0,
            tolerance: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WittenConfig {
    pub d: usize,
    pub m2: f64,
    /// Bumps sit at (±half_side, ±half_side, 0, …).
    pub half_side: f64,
    pub width: f64,
    pub amplitude: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub layer: f64,
    pub nodes: usize,
    pub rel_tol: f64,
}

impl Default for WittenConfig {
    fn default() -> Self {
        let q = adslab::functionals::WittenQuad::default();
        WittenConfig {
            d: 2,
            m2: 0.0,
            half_side: 1.0,
            width: 0.1,
            amplitude: 1.0,
            z_min: q.z_min,
            z_max: q.z_max,
            layer: q.layer,
            nodes: q.nodes,
            rel_tol: q.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityConfig {
    /// ν of the free and renormalized stochastic-positivity suites (d = 1).
    pub nu_stochastic: f64,
    pub lambda_renormalized: f64,
    /// ν of the free reflection-positivity suite (d = 1).
    pub nu_reflection: f64,
    /// ν of the α₋ unitarity-bound witness search (d = 2).
    pub nu_unitarity: f64,
    pub nu_scan: Vec<f64>,
    pub lattice_m2: f64,
    pub lattice_n: usize,
    pub lattice_lambda: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for PositivityConfig {
    fn default() -> Self {
        PositivityConfig {
            nu_stochastic: 1.5,
            lambda_renormalized: 10.0,
            nu_reflection: 0.5,
            nu_unitarity: 1.5,
            nu_scan: vec![0.9, 0.95, 0.99, 1.01, 1.05, 1.1],
            lattice_m2: 6.25,
            lattice_n: 16,
            lattice_lambda: 0.1,
            n: 10_000,
            seed: 5,
        }
    }
}

/// Overlays the keys of a TOML file on the defaults. Unknown keys are
/// rejected; `seed`, when the command has one, is replaced by `--seed`.
pub fn load<T: Serialize + serde::de::DeserializeOwned>(
    text: Option<&str>,
    defaults: T,
    seed: Option<u64>,
) -> Result<T, CliError> {
    let mut table = toml::Table::try_from(&defaults).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(text) = text {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for (k, v) in user {
            if !table.contains_key(&k) {
                let known: Vec<&String> = table.keys().collect();
                return Err(CliError::Config(format!("unknown key '{k}' (known: {known:?})")));
            }
            table.insert(k, v);
        }
    }
    if let (Some(s), true) = (seed, table.contains_key("seed")) {
        let s = i64::try_from(s).map_err(|_| CliError::Config("seed must fit in a signed 64-bit integer".into()))?;
        table.insert("seed".into(), toml::Value::Integer(s));
    }
    T::deserialize(table).map_err(|e| CliError::Config(e.to_string()))
}

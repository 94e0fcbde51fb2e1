use std::f64::consts::PI;

use adslab::fit::ScalingSeries;
use adslab::functionals::{
    duality_check, finite_dim_conditioning_check, free_field_limit, renormalization_check, renormalized_functional,
    witten_4pt, WittenQuad,
};
use adslab::geometry::BulkPoint;
use adslab::interaction::{scaling_point, triviality_run};
use adslab::kernels::{
    alpha_kernel, bulk_propagator_points, bulk_to_boundary, corr_coefficients, kernel_table, splitting_report,
    write_kernel_csv,
};
use adslab::lattice::{build_model, LatticeSpec};
use adslab::positivity::{
    gram_reflection, gram_stochastic, perturbed_rp_gram, search_witness, unitarity_scan, FreeFunctional,
    GaussianFunctional, GramReport, RenormalizedFunctional,
};
use adslab::quad::QuadConfig;
use adslab::{BoundaryTestFunction, Branch, SpectralParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;
use crate::CliError;

/// What a subcommand hands back for persistence.
pub struct Outcome {
    pub config: Value,
    pub result: Value,
    /// (file stem, CSV text).
    pub csv: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub pass: bool,
}

pub struct Ctx {
    pub config_text: Option<String>,
    pub seed: Option<u64>,
}

impl Ctx {
    fn load<T: Serialize + serde::de::DeserializeOwned>(&self, defaults: T) -> Result<T, CliError> {
        load(self.config_text.as_deref(), defaults, self.seed)
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

pub fn params(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(ParamsConfig::default())?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    Ok(Outcome {
        summary: vec![format!(
            "d={} m2={}: nu={} Delta+={} Delta-={} gamma+={:e} c={}",
            p.d, p.m2, p.nu, p.delta_plus, p.delta_minus, p.gamma_plus, p.c
        )],
        config: to_value(&cfg)?,
        result: to_value(&p)?,
        csv: vec![],
        pass: true,
    })
}

pub fn kernel_eval(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(KernelConfig::default())?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let branch: Branch = cfg.branch.parse()?;
    if !(cfg.u_min > 0.0 && cfg.u_max > cfg.u_min && cfg.points >= 2) {
        return Err(CliError::Config("need 0 < u_min < u_max and points ≥ 2".into()));
    }
    let step = (cfg.u_max / cfg.u_min).ln() / (cfg.points - 1) as f64;
    let us: Vec<f64> = (0..cfg.points).map(|i| cfg.u_min * (i as f64 * step).exp()).collect();
    let table = kernel_table(&us, &p, branch)?;
    let mut buf = Vec::new();
    write_kernel_csv(&mut buf, "G", &table)?;

    // z'^{−Δ₊}G₊ → H₊ and z^{−Δ₊}H₊ → α₊
    let (x, xp) = (vec![0.3; cfg.d], vec![-0.4; cfg.d]);
    let g = bulk_propagator_points(&BulkPoint::new(0.8, x.clone())?, &BulkPoint::new(cfg.z_prime, xp.clone())?, &p, Branch::Plus)?;
    let h = bulk_to_boundary(0.8, &x, &xp, &p)?;
    let g_to_h = (cfg.z_prime.powf(-p.delta_plus) * g / h - 1.0).abs();
    let a = alpha_kernel(&x, &xp, &p, Branch::Plus)?;
    let h_small = bulk_to_boundary(cfg.z_prime, &x, &xp, &p)?;
    let h_to_alpha = (cfg.z_prime.powf(-p.delta_plus) * h_small / a - 1.0).abs();
    let pass = g_to_h < cfg.tolerance && h_to_alpha < cfg.tolerance;

    // H₊(1, r) and α(r) at boundary separations r on the same grid
    let boundary_rows = us
        .iter()
        .map(|&r| {
            let mut y = vec![0.0; cfg.d];
            y[0] = r;
            let origin = vec![0.0; cfg.d];
            Ok(vec![r, bulk_to_boundary(1.0, &origin, &y, &p)?, alpha_kernel(&origin, &y, &p, branch)?])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Outcome {
        summary: vec![
            format!("{} rows of G_{:?} written", table.len(), branch),
            format!("limit gaps at z'={:e}: G->H {g_to_h:.3e}, H->alpha {h_to_alpha:.3e}", cfg.z_prime),
        ],
        config: to_value(&cfg)?,
        result: json!({ "params": p, "table": table, "g_to_h_gap": g_to_h, "h_to_alpha_gap": h_to_alpha, "H": h, "alpha": a }),
        csv: vec![
            ("kernel".into(), String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?),
            ("boundary_kernels".into(), csv_table(&["r", "H_plus_z1", "alpha"], &boundary_rows)?),
        ],
        pass,
    })
}

fn pair_points(d: usize, q: &[f64; 4]) -> Result<(BulkPoint, BulkPoint), CliError> {
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    a[0] = q[1];
    b[0] = q[3];
    Ok((BulkPoint::new(q[0], a)?, BulkPoint::new(q[2], b)?))
}

pub fn splitting_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(SplittingConfig::default())?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let reports = cfg
        .pairs
        .iter()
        .map(|q| {
            let (a, b) = pair_points(cfg.d, q)?;
            Ok(splitting_report(&a, &b, &p, QuadConfig::with_tols(0.0, cfg.rel_tol))?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let worst = reports.iter().map(|r| r.relative_residual.abs()).fold(0.0, f64::max);
    let rows: Vec<Vec<f64>> = cfg
        .pairs
        .iter()
        .zip(&reports)
        .map(|(q, r)| vec![q[0], q[1], q[2], q[3], r.g_minus, r.g_plus, r.boundary_term, r.relative_residual])
        .collect();
    Ok(Outcome {
        summary: vec![format!("{} pairs, max relative residual {worst:.3e} (tolerance {:e})", reports.len(), cfg.tolerance)],
        config: to_value(&cfg)?,
        result: json!({ "reports": reports, "max_relative_residual": worst }),
        csv: vec![(
            "splitting".into(),
            csv_table(&["z", "x1", "z_prime", "x1_prime", "G_minus", "G_plus", "boundary_term", "relative_residual"], &rows)?,
        )],
        pass: worst < cfg.tolerance,
    })
}

pub fn corr_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(CorrConfig::default())?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let f = bump(cfg.f_center.clone(), cfg.f_width, cfg.f_amplitude)?;
    let coeffs = corr_coefficients(&p)?;
    let limit = free_field_limit(cfg.z, &f, &p)?;
    // a₀ has the closed form π/2 at ν = ½
    let a0_gap = ((p.nu - 0.5).abs() < 1e-12).then(|| (coeffs.a[0] / (PI / 2.0) - 1.0).abs());
    let pass = limit.gap < cfg.tolerance && a0_gap.is_none_or(|g| g < 1e-6);
    let mut summary = vec![format!("free-field limit gap at z={:e}: {:.3e}", cfg.z, limit.gap)];
    if let Some(g) = a0_gap {
        summary.push(format!("a0 = {} (pi/2 relative gap {g:.3e})", coeffs.a[0]));
    }
    Ok(Outcome {
        summary,
        config: to_value(&cfg)?,
        result: json!({ "coefficients": coeffs, "limit": limit, "a0_gap": a0_gap }),
        csv: vec![],
        pass,
    })
}

pub fn scaling_fit(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(RunConfig::scaling())?;
    let core = cfg.to_core()?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let points = cfg
        .z0_list
        .iter()
        .map(|&z0| Ok(scaling_point(&core, &p, z0)?.0))
        .collect::<Result<Vec<_>, CliError>>()?;
    let series = |g: fn(&adslab::interaction::ScalingPoint) -> f64| ScalingSeries::fit(points.iter().map(|s| (s.z0, g(s))).collect());
    let (e, s, g) = (series(|s| s.energy)?, series(|s| s.sigma)?, series(|s| s.gamma)?);
    let d = cfg.d as f64;
    let e_target = -d - 4.0 * (p.delta_plus - d);
    let s_bound = -d - 3.0 * (p.delta_plus - d);
    let g_target = p.delta_plus - d;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|s| vec![s.z0, s.sites as f64, s.energy, s.lattice_energy, s.sigma, s.gamma])
        .collect();
    Ok(Outcome {
        summary: vec![
            format!("E slope {:.4} (target {e_target:.4})", e.slope),
            format!("sigma slope {:.4} (bound {s_bound:.4})", s.slope),
            format!("gamma slope {:.4} (target {g_target:.4})", g.slope),
        ],
        config: to_value(&cfg)?,
        result: json!({
            "points": points, "energy": e, "sigma": s, "gamma": g,
            "energy_target": e_target, "sigma_bound": s_bound, "gamma_target": g_target,
        }),
        csv: vec![
            ("scaling".into(), csv_table(&["z0", "sites", "E", "lattice_E", "sigma", "gamma"], &rows)?),
            ("scaling_E".into(), e.to_csv("E")?),
            ("scaling_sigma".into(), s.to_csv("sigma")?),
            ("scaling_gamma".into(), g.to_csv("gamma")?),
        ],
        pass: true,
    })
}

pub fn triviality(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(RunConfig::triviality())?;
    let r = triviality_run(&cfg.to_core()?)?;
    let rows: Vec<Vec<f64>> = (0..r.z0_list.len())
        .map(|i| {
            vec![
                r.z0_list[i],
                r.sites_list[i] as f64,
                r.e_list[i],
                r.sigma_list[i],
                r.gamma_list[i],
                r.ln_envelope_list[i].unwrap_or(f64::NAN),
                r.mc_ratio_list[i].ln_ratio,
                r.mc_ratio_list[i].ln_ci_low,
                r.mc_ratio_list[i].ln_ci_high,
            ]
        })
        .collect();
    let c = &r.checks;
    let mut summary: Vec<String> = r
        .z0_list
        .iter()
        .zip(&r.mc_ratio_list)
        .map(|(z, m)| format!("z0={z:<8} ln ratio {:.4e}  [{:.4e}, {:.4e}]", m.ln_ratio, m.ln_ci_low, m.ln_ci_high))
        .collect();
    summary.push(format!(
        "ratio decreasing {}, CI separated {}, final < 0.1 initial {}, envelope decreasing {}, Jensen {}",
        c.ratio_decreasing, c.ci_separated, c.final_below_tenth, c.envelope_decreasing, c.jensen_ok
    ));
    summary.extend(r.notes.iter().cloned());
    Ok(Outcome {
        summary,
        config: to_value(&cfg)?,
        result: to_value(&r)?,
        csv: vec![(
            "triviality".into(),
            csv_table(&["z0", "sites", "E", "sigma", "gamma", "ln_envelope", "ln_ratio", "ln_ci_low", "ln_ci_high"], &rows)?,
        )],
        pass: true,
    })
}

pub fn functional(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(FunctionalConfig::default())?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let model = build_model(LatticeSpec::new(cfg.z0, cfg.a, cfg.l, cfg.d, cfg.n_z, cfg.n_x, cfg.m2))?;
    let fam = family(&cfg.f_centers, &cfg.f_widths, &cfg.f_amplitudes)?;
    let mut records = Vec::new();
    let mut summary = Vec::new();
    let mut pass = true;
    for f in &fam {
        let r = duality_check(f, &model, &p, cfg.lambda, cfg.n, cfg.seed)?;
        pass &= r.agree;
        summary.push(format!(
            "C(f) = {:.6e} +- {:.1e}, C~(cf) = {:.6e} +- {:.1e}, agree {}",
            r.c.value, r.c.mc_ci, r.tilde_c.value, r.tilde_c.mc_ci, r.agree
        ));
        let record = |v: &adslab::functionals::FunctionalValue, f: &BoundaryTestFunction| {
            json!({ "f": f, "prefactor": v.log_prefactor.exp(), "ratio": v.mc_ratio, "ci": v.mc_ci, "value": v.value })
        };
        records.push(json!({
            "C": record(&r.c, f),
            "C_tilde": record(&r.tilde_c, &f.scaled(p.c)),
            "difference": r.difference,
            "combined_ci": r.combined_ci,
            "agree": r.agree,
        }));
    }
    Ok(Outcome { summary, config: to_value(&cfg)?, result: json!({ "duality": records }), csv: vec![], pass })
}

pub fn conditioning(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(ConditioningConfig::default())?;
    let doubled: Vec<f64> = cfg.f.iter().map(|v| 2.0 * v).collect();
    let gaussian = finite_dim_conditioning_check(cfg.n_bulk, cfg.n_bdry, 0.0, &cfg.f, cfg.seed)?;
    let quartic = finite_dim_conditioning_check(cfg.n_bulk, cfg.n_bdry, cfg.lambda, &cfg.f, cfg.seed)?;
    let quartic_2f = finite_dim_conditioning_check(cfg.n_bulk, cfg.n_bdry, cfg.lambda, &doubled, cfg.seed)?;
    let pass = gaussian < 1e-10 && quartic < cfg.tolerance && quartic_2f < cfg.tolerance;
    Ok(Outcome {
        summary: vec![format!("residuals: V=0 {gaussian:.3e}, quartic {quartic:.3e}, quartic at 2f {quartic_2f:.3e}")],
        config: to_value(&cfg)?,
        result: json!({ "gaussian": gaussian, "quartic": quartic, "quartic_2f": quartic_2f }),
        csv: vec![],
        pass,
    })
}

pub fn renorm(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(RenormConfig::default())?;
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let f = bump(cfg.f_center.clone(), cfg.f_width, cfg.f_amplitude)?;
    let checks = cfg
        .z0_list
        .iter()
        .map(|&z0| Ok(renormalization_check(z0, &f, &p, cfg.lambda, cfg.a, cfg.l)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let value = renormalized_functional(&f, &p, cfg.lambda)?;
    let last = checks.last().ok_or_else(|| CliError::Config("z0_list is empty".into()))?;
    let rows: Vec<Vec<f64>> = checks.iter().map(|c| vec![c.z0, c.lambda_z0 * c.energy, c.limit, c.relative_gap]).collect();
    let mut summary: Vec<String> = checks
        .iter()
        .map(|c| format!("z0={:e}: lambda(z0)E = {:.6e}, limit {:.6e}, gap {:.3e}", c.z0, c.lambda_z0 * c.energy, c.limit, c.relative_gap))
        .collect();
    summary.push(format!("renormalized functional C(f) = {value:.6e}"));
    Ok(Outcome {
        summary,
        config: to_value(&cfg)?,
        result: json!({ "checks": checks, "functional": value }),
        csv: vec![("renorm".into(), csv_table(&["z0", "lambda_z0_E", "limit", "relative_gap"], &rows)?)],
        pass: last.relative_gap < cfg.tolerance,
    })
}

pub fn witten(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(WittenConfig::default())?;
    if cfg.d < 2 {
        return Err(CliError::Config("witten4 places the sources on a square and needs d ≥ 2".into()));
    }
    let p = SpectralParams::new(cfg.d, cfg.m2)?;
    let s = cfg.half_side;
    let fs = [(s, s), (-s, s), (-s, -s), (s, -s)]
        .iter()
        .map(|&(x, y)| {
            let mut c = vec![0.0; cfg.d];
            c[0] = x;
            c[1] = y;
            bump(c, cfg.width, cfg.amplitude)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let quad = WittenQuad { z_min: cfg.z_min, z_max: cfg.z_max, layer: cfg.layer, nodes: cfg.nodes, rel_tol: cfg.rel_tol };
    let r = witten_4pt([&fs[0], &fs[1], &fs[2], &fs[3]], &p, &quad)?;
    Ok(Outcome {
        summary: vec![format!(
            "W4 = {:.6e} (coarse {:.6e}, refinement error {:.2e}); small-z exponent {:.3}",
            r.value, r.coarse, r.refinement_error, r.small_z_exponent
        )],
        config: to_value(&cfg)?,
        result: to_value(&r)?,
        csv: vec![],
        pass: true,
    })
}

fn b(center: Vec<f64>, w: f64, a: f64) -> Result<BoundaryTestFunction, CliError> {
    bump(center, w, a)
}

pub fn positivity(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.load(PositivityConfig::default())?;
    let mut suites: Vec<(String, Option<GramReport>, bool)> = Vec::new();

    let stoch = SpectralParams::from_nu(1, cfg.nu_stochastic)?;
    let fam = vec![b(vec![0.0], 0.5, 1.0)?, b(vec![0.7], 0.3, -0.8)?, b(vec![-1.0], 0.8, 0.5)?, b(vec![2.0], 0.4, 1.2)?];
    let r = gram_stochastic(&FreeFunctional { params: stoch.clone() }, &fam)?;
    let ok = r.psd;
    suites.push(("free functional, stochastic".into(), Some(r), ok));

    let pool = [0.0, 0.5, 1.0, -1.0, 2.0]
        .iter()
        .map(|&a| if a == 0.0 { Ok(BoundaryTestFunction::zero(1)) } else { b(vec![0.0], 0.3, a) })
        .collect::<Result<Vec<_>, CliError>>()?;
    let renorm = RenormalizedFunctional { params: stoch, lambda: cfg.lambda_renormalized };
    let w = search_witness(&renorm, &pool, 3, false)?;
    let ok = w.is_some();
    suites.push(("renormalized functional, stochastic witness".into(), w, ok));

    let refl = SpectralParams::from_nu(1, cfg.nu_reflection)?;
    let r = gram_reflection(&FreeFunctional { params: refl }, &[b(vec![1.0], 0.15, 1.0)?, b(vec![2.0], 0.15, 1.0)?])?;
    let ok = r.psd;
    suites.push(("free functional, reflection".into(), Some(r), ok));

    let mut pool2 = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        for h in [0.0, 1.0, 2.0] {
            pool2.push(b(vec![a, h], 0.08, 1.0)?);
        }
    }
    let minus = GaussianFunctional { params: SpectralParams::from_nu(2, cfg.nu_unitarity)?, branch: Branch::Minus };
    let w = search_witness(&minus, &pool2, 2, true)?;
    let ok = w.is_some();
    suites.push(("alpha- functional, unitarity-bound witness".into(), w, ok));

    let pair = [b(vec![0.5, 0.0], 0.08, 1.0)?, b(vec![2.0, 0.0], 0.08, 1.0)?];
    let scan = unitarity_scan(2, &cfg.nu_scan, &pair)?;
    let bracket = scan
        .windows(2)
        .find(|w| w[0].1.psd && !w[1].1.psd)
        .map(|w| (w[0].0, w[1].0));
    let scan_rows: Vec<Value> = scan
        .iter()
        .map(|(nu, r)| json!({ "nu": nu, "min_eigenvalue": r.min_eigenvalue, "relative_min": r.relative_min(), "psd": r.psd }))
        .collect();

    let model = build_model(LatticeSpec::new(0.2, 5.0, 1.5, 1, cfg.lattice_n, cfg.lattice_n, cfg.lattice_m2))?;
    let half = model.positive_half();
    let pick = |i: usize| half[i * half.len() / 64 % half.len()];
    let bulk = vec![
        vec![(pick(3), 0.5)],
        vec![(pick(20), 0.5)],
        vec![(pick(40), -0.4), (pick(41), 0.3)],
        vec![(pick(60), 0.6)],
    ];
    let exact = perturbed_rp_gram(&model, 0.0, &bulk, 0, cfg.seed)?;
    let ok = exact.psd;
    suites.push(("lattice reflection, lambda = 0".into(), Some(exact), ok));
    let mc = perturbed_rp_gram(&model, cfg.lattice_lambda, &bulk, cfg.n, cfg.seed)?;
    let ok = mc.psd;
    suites.push((format!("lattice reflection, lambda = {}", cfg.lattice_lambda), Some(mc), ok));

    let mut summary: Vec<String> = suites
        .iter()
        .map(|(name, r, ok)| match r {
            Some(r) => format!("{name}: min eig {:.3e}, max {:.3e}, psd {} -> {}", r.min_eigenvalue, r.max_eigenvalue, r.psd, if *ok { "as expected" } else { "UNEXPECTED" }),
            None => format!("{name}: no negative family found -> {}", if *ok { "as expected" } else { "UNEXPECTED" }),
        })
        .collect();
    summary.push(format!("unitarity scan sign change: {bracket:?}"));
    let pass = suites.iter().all(|s| s.2) && bracket.is_some();
    let result = json!({
        "suites": suites.iter().map(|(name, r, ok)| json!({ "name": name, "report": r, "as_expected": ok })).collect::<Vec<_>>(),
        "unitarity_scan": scan_rows,
        "sign_change": bracket,
    });
    Ok(Outcome { summary, config: to_value(&cfg)?, result, csv: vec![], pass })
}

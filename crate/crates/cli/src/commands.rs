use std::io::Write;
use std::path::{Path, PathBuf};
use std::{env, fs, io};

use anyhow::Context;
use log::{info, warn};
use otto_core::propagator::{convergence_report, propagate_default, DrivingProtocol};
use otto_core::sampler::{estimate_efficiency_distribution, goodness_of_fit, EmpiricalDistribution, FitReport};
use otto_core::spectra::{
    efficiency_distribution, efficiency_heat_covariance, heat2_distribution, joint_distribution_with_tol,
    transition_matrix, work1_distribution, work3_distribution, UNITARITY_TOL,
};
use otto_core::twolevel::{
    adiabatic_mean, adiabatic_mean_limits, adiabatic_variance, adiabatic_variance_limits, closed_form_unitary,
    compression_unitary, derive, efficiency_distribution_closed, engine_bounds, engine_spec, eta_th, mean_energetics,
    TwoLevelParams,
};
use otto_core::{CoreError, EfficiencyDistribution, EngineSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::artifact::{
    distribution_document, eta_value, generic_params_json, num, opt_num, read_distribution, support_json, to_pretty,
    twolevel_params_json,
};
use crate::config::{grid, ModelKind, RunConfig, Spacing};
use crate::error::{usage, CliError};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "OTTO_OUTPUT_DIR";

/// Where an artifact goes: explicit path, else `$OTTO_OUTPUT_DIR/<default>`, else stdout.
pub fn output_path(explicit: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| env::var_os(OUTPUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(default_name)))
}

fn emit(path: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => io::stdout().write_all(contents.as_bytes())?,
    }
    Ok(())
}

fn params_json(config: &RunConfig, spec: &EngineSpec) -> anyhow::Result<Value> {
    let tol = config.tolerances.grouping;
    Ok(match config.model_kind()? {
        ModelKind::Twolevel => twolevel_params_json(&config.twolevel_params()?, tol),
        ModelKind::Generic => generic_params_json(spec.dim(), spec.beta_cold(), spec.beta_hot(), tol),
    })
}

fn exact_distribution(config: &RunConfig, spec: &EngineSpec) -> EfficiencyDistribution {
    let tol = config.tolerances.grouping;
    efficiency_distribution(&joint_distribution_with_tol(spec, tol), tol)
}

pub fn dist_document(config: &RunConfig) -> anyhow::Result<Value> {
    let spec = config.engine_spec()?;
    Ok(distribution_document(
        &exact_distribution(config, &spec),
        params_json(config, &spec)?,
    ))
}

pub fn cmd_dist(config: &RunConfig) -> anyhow::Result<()> {
    let doc = dist_document(config)?;
    emit(
        output_path(config.output.as_deref(), "dist.json").as_deref(),
        &to_pretty(&doc),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauRow {
    pub tau: f64,
    pub omega: f64,
    pub nu0: f64,
    pub nu_tau: f64,
    pub u: f64,
    pub a_star: f64,
    pub eta_th: Option<f64>,
    pub mean_eta: Option<f64>,
    pub is_engine: bool,
    pub bound14: f64,
    pub bound15: f64,
}

pub const TAU_COLUMNS: [&str; 11] = [
    "tau",
    "omega",
    "nu0",
    "nu_tau",
    "u",
    "a_star",
    "eta_th",
    "mean_eta",
    "is_engine",
    "bound14",
    "bound15",
];

pub fn sweep_tau_rows(config: &RunConfig) -> anyhow::Result<Vec<TauRow>> {
    config.validate_ranges()?;
    let base = config.twolevel_params()?;
    let s = &config.sweep_tau;
    grid(s.start, s.stop, s.points, Spacing::Linear)
        .into_par_iter()
        .map(|tau| -> anyhow::Result<TauRow> {
            let p = base.with_tau(tau)?;
            let d = derive(&p);
            let bounds = engine_bounds(&p);
            Ok(TauRow {
                tau,
                omega: d.omega,
                nu0: d.nu0,
                nu_tau: d.nu_tau,
                u: d.u,
                a_star: d.a_star,
                eta_th: eta_th(&p).ok(),
                mean_eta: adiabatic_mean(&p).ok(),
                is_engine: bounds.satisfied,
                bound14: bounds.bound_heat,
                bound15: bounds.bound_work,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub beta1: f64,
    pub beta2: f64,
    pub mean_eta: Option<f64>,
    pub mean_high_limit: Option<f64>,
    pub mean_low_limit: Option<f64>,
    pub variance: Option<f64>,
    pub var_high_limit: Option<f64>,
    pub var_low_limit: Option<f64>,
    pub cov_q2_eta: Option<f64>,
    pub eta_th: Option<f64>,
}

pub const BETA_COLUMNS: [&str; 10] = [
    "beta1",
    "beta2",
    "mean_eta",
    "mean_high_limit",
    "mean_low_limit",
    "variance",
    "var_high_limit",
    "var_low_limit",
    "cov_q2_eta",
    "eta_th",
];

pub fn sweep_beta_rows(config: &RunConfig) -> anyhow::Result<Vec<BetaRow>> {
    config.validate_ranges()?;
    let base = config.twolevel_params()?;
    let s = &config.sweep_beta;
    if s.ratio <= 1.0 {
        warn!("beta1/beta2 = {} leaves no cold/hot temperature gradient", s.ratio);
    }
    if !derive(&base).is_adiabatic() {
        warn!("tau = {} is not adiabatic; moment columns will be empty", base.tau());
    }
    let tol = config.tolerances.grouping;
    grid(s.start, s.stop, s.points, s.spacing)
        .into_par_iter()
        .map(|beta1| -> anyhow::Result<BetaRow> {
            let beta2 = beta1 / s.ratio;
            let p = base.with_betas(beta1, beta2)?;
            let adiabatic = derive(&p).is_adiabatic();
            let mean_lim = adiabatic.then(|| adiabatic_mean_limits(&p));
            let var_lim = adiabatic.then(|| adiabatic_variance_limits(&p));
            let joint = joint_distribution_with_tol(&engine_spec(&p)?, tol);
            Ok(BetaRow {
                beta1,
                beta2,
                mean_eta: adiabatic_mean(&p).ok(),
                mean_high_limit: mean_lim.map(|l| l.high_t),
                mean_low_limit: mean_lim.map(|l| l.low_t),
                variance: adiabatic_variance(&p).ok(),
                var_high_limit: var_lim.map(|l| l.high_t),
                var_low_limit: var_lim.map(|l| l.low_t),
                cov_q2_eta: efficiency_heat_covariance(&joint).cov,
                eta_th: eta_th(&p).ok(),
            })
        })
        .collect()
}

/// Shortest round-trip text; scientific notation at the extremes.
fn cell(x: f64) -> String {
    format!("{x:?}")
}

fn field(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?)
}

pub fn cmd_sweep_tau(config: &RunConfig) -> anyhow::Result<()> {
    let rows = sweep_tau_rows(config)?;
    let text = csv_text(
        &TAU_COLUMNS,
        rows.iter().map(|r| {
            vec![
                cell(r.tau),
                cell(r.omega),
                cell(r.nu0),
                cell(r.nu_tau),
                cell(r.u),
                cell(r.a_star),
                field(r.eta_th),
                field(r.mean_eta),
                r.is_engine.to_string(),
                cell(r.bound14),
                cell(r.bound15),
            ]
        }),
    )?;
    emit(output_path(config.output.as_deref(), "sweep_tau.csv").as_deref(), &text)
}

pub fn cmd_sweep_beta(config: &RunConfig) -> anyhow::Result<()> {
    let rows = sweep_beta_rows(config)?;
    let text = csv_text(
        &BETA_COLUMNS,
        rows.iter().map(|r| {
            vec![
                cell(r.beta1),
                cell(r.beta2),
                field(r.mean_eta),
                field(r.mean_high_limit),
                field(r.mean_low_limit),
                field(r.variance),
                field(r.var_high_limit),
                field(r.var_low_limit),
                field(r.cov_q2_eta),
                field(r.eta_th),
            ]
        }),
    )?;
    emit(
        output_path(config.output.as_deref(), "sweep_beta.csv").as_deref(),
        &text,
    )
}

fn empirical_json(emp: &EmpiricalDistribution) -> Value {
    Value::Array(
        emp.atoms()
            .iter()
            .map(|&(eta, count)| json!({ "eta": eta_value(eta), "count": count }))
            .collect(),
    )
}

fn fit_json(fit: &FitReport, alpha: f64) -> Value {
    json!({
        "tv_distance": num(fit.tv_distance),
        "chi2": num(fit.chi2_stat),
        "dof": fit.dof,
        "p_value": num(fit.p_value),
        "alpha": num(alpha),
        "passed": fit.passes(alpha),
    })
}

pub fn cmd_sample(config: &RunConfig) -> anyhow::Result<()> {
    let s = &config.sample;
    if s.n_samples == 0 {
        return usage("sample.n_samples must be at least 1");
    }
    if !(s.alpha > 0.0 && s.alpha < 1.0) {
        return usage("sample.alpha must lie in (0, 1)");
    }
    let spec = config.engine_spec()?;
    let exact = match &s.exact {
        Some(path) => read_distribution(path)?,
        None => exact_distribution(config, &spec),
    };
    let emp = estimate_efficiency_distribution(&spec, s.n_samples, s.seed)?;
    let out = output_path(config.output.as_deref(), "sample.json");
    let mut doc = json!({
        "seed": s.seed,
        "n_samples": s.n_samples,
        "generator": "ChaCha8",
        "empirical": empirical_json(&emp),
        "exact": support_json(&exact),
        "params": params_json(config, &spec)?,
    });
    if let Some(path) = &s.exact {
        doc["exact_source"] = Value::String(path.display().to_string());
    }
    match goodness_of_fit(&emp, &exact) {
        Ok(fit) => {
            doc["status"] = Value::String(if fit.passes(s.alpha) { "ok" } else { "rejected" }.into());
            doc["fit"] = fit_json(&fit, s.alpha);
            emit(out.as_deref(), &to_pretty(&doc))?;
            if !fit.passes(s.alpha) {
                return Err(CliError::Validation(format!(
                    "chi-square test rejects the exact distribution (p = {:.3e} <= {})",
                    fit.p_value, s.alpha
                ))
                .into());
            }
            Ok(())
        }
        Err(CoreError::SupportViolation(msg)) => {
            doc["status"] = Value::String("support_violation".into());
            doc["message"] = Value::String(msg.clone());
            emit(out.as_deref(), &to_pretty(&doc))?;
            Err(CliError::SupportViolation(msg).into())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl Check {
    fn at_most(name: &'static str, residual: f64, tolerance: f64, note: impl Into<String>) -> Self {
        Self {
            name,
            residual: Some(residual),
            tolerance,
            passed: residual <= tolerance,
            note: note.into(),
        }
    }

    fn skipped(name: &'static str, tolerance: f64, note: impl Into<String>) -> Self {
        Self {
            name,
            residual: None,
            tolerance,
            passed: true,
            note: note.into(),
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        let residual = self.residual.map_or("-".to_string(), |r| format!("{r:.3e}"));
        format!(
            "[{tag}] {}: max residual {residual} (tolerance {:.1e}){}{}",
            self.name,
            self.tolerance,
            if self.note.is_empty() { "" } else { "; " },
            self.note
        )
    }
}

fn marginal_gap(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if (x.0 - y.0).abs() > tol {
                f64::INFINITY
            } else {
                (x.1 - y.1).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn spec_checks(spec: &EngineSpec, grouping: f64, checks: &mut Vec<Check>) {
    let joint = joint_distribution_with_tol(spec, grouping);
    let dist = efficiency_distribution(&joint, grouping);
    let mass = (joint.total_mass() - 1.0).abs().max((dist.total_mass() - 1.0).abs());
    checks.push(Check::at_most("normalization", mass, 1e-12, ""));
    let stoch = spec
        .t_expansion()
        .stochasticity_defect()
        .max(spec.t_compression().stochasticity_defect());
    checks.push(Check::at_most("double stochasticity", stoch, 1e-9, ""));
    let chain = marginal_gap(&joint.marginal_w1(), &work1_distribution(spec), grouping)
        .max(marginal_gap(&joint.marginal_q2(), &heat2_distribution(spec), grouping))
        .max(marginal_gap(&joint.marginal_w3(), &work3_distribution(spec), grouping));
    checks.push(Check::at_most("chain-rule marginals", chain, 1e-12, ""));
    let cov = efficiency_heat_covariance(&joint);
    checks.push(match cov.identity_residual {
        Some(r) => Check::at_most(
            "covariance identity",
            r,
            1e-12,
            format!("cov(Q2, eta) = {:.6e}", cov.cov.unwrap()),
        ),
        None if !cov.defined => Check::skipped("covariance identity", 1e-12, "efficiency has mass at infinity"),
        None => Check::skipped("covariance identity", 1e-12, "mean heat vanishes"),
    });
}

fn twolevel_checks(config: &RunConfig, params: &TwoLevelParams) -> anyhow::Result<Vec<Check>> {
    let grouping = config.tolerances.grouping;
    let mut checks = Vec::new();
    let s = &config.sweep_tau;
    let taus = grid(s.start, s.stop, s.points, Spacing::Linear);

    let mut closed_gap: f64 = 0.0;
    for p in std::iter::once(Ok(params.clone())).chain(taus.iter().map(|&t| params.with_tau(t))) {
        let p = p?;
        let spec = engine_spec(&p)?;
        let enumerated = efficiency_distribution(&joint_distribution_with_tol(&spec, grouping), grouping);
        closed_gap = closed_gap.max(efficiency_distribution_closed(&p).max_weight_difference(&enumerated));
    }
    checks.push(Check::at_most(
        "closed form vs enumeration",
        closed_gap,
        1e-12,
        format!("configured tau and {} sweep points", taus.len()),
    ));

    spec_checks(&engine_spec(params)?, grouping, &mut checks);

    let protocol = DrivingProtocol::two_level_expansion(params);
    let numeric = propagate_default(&protocol)?;
    let exact = closed_form_unitary(params, params.tau())?;
    checks.push(Check::at_most(
        "propagator vs closed form",
        numeric.matrix().max_abs_diff(exact.matrix()),
        1e-8,
        format!("{} steps", protocol.default_steps()),
    ));
    let report = convergence_report(&protocol, &[200, 400, 800, 1600, 3200, 102_400])?;
    let order = report.observed_order.unwrap_or(f64::NAN);
    checks.push(Check {
        name: "convergence order",
        residual: Some((2.0 - order).max(0.0)),
        tolerance: 0.05,
        passed: order >= 1.95,
        note: format!("observed order {order:.3}"),
    });

    let compression = propagate_default(&DrivingProtocol::two_level_compression(params))?;
    let t_num = transition_matrix(&compression);
    let t_exp = transition_matrix(&exact);
    let t_cf = transition_matrix(&compression_unitary(params)?);
    let mut reversal: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            reversal = reversal
                .max((t_num.prob(i, j) - t_exp.prob(i, j)).abs())
                .max((t_cf.prob(i, j) - t_exp.prob(i, j)).abs());
        }
    }
    checks.push(Check::at_most("compression time reversal", reversal, 1e-10, ""));

    let (mut mismatches, mut boundary) = (0usize, 0usize);
    for &tau in &taus {
        let p = params.with_tau(tau)?;
        let bounds = engine_bounds(&p);
        if bounds.margin(derive(&p).a_star).abs() <= 1e-10 {
            boundary += 1;
            continue;
        }
        let m = mean_energetics(&p);
        mismatches += usize::from(bounds.satisfied != (m.q2 > 0.0 && m.work_output() > 0.0));
    }
    checks.push(Check::at_most(
        "bound consistency",
        mismatches as f64,
        0.0,
        format!("{} sweep points, {boundary} on the boundary", taus.len()),
    ));
    Ok(checks)
}

fn generic_checks(config: &RunConfig) -> anyhow::Result<Vec<Check>> {
    let inputs = config.generic_inputs()?;
    let defect = inputs
        .u_expansion
        .unitarity_defect()
        .max(inputs.u_compression.unitarity_defect());
    let mut checks = vec![Check::at_most("unitarity", defect, UNITARITY_TOL, "")];
    if !checks[0].passed {
        checks.push(Check {
            passed: false,
            ..Check::skipped("engine checks", 0.0, "not run: input matrices are not unitary")
        });
        return Ok(checks);
    }
    let grouping = config.tolerances.grouping;
    spec_checks(&inputs.into_spec()?, grouping, &mut checks);
    Ok(checks)
}

pub fn validation_checks(config: &RunConfig) -> anyhow::Result<Vec<Check>> {
    config.validate_ranges()?;
    match config.model_kind()? {
        ModelKind::Twolevel => twolevel_checks(config, &config.twolevel_params()?),
        ModelKind::Generic => generic_checks(config),
    }
}

pub fn cmd_validate(config: &RunConfig) -> anyhow::Result<()> {
    let checks = validation_checks(config)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("validate: {}/{} checks passed", checks.len() - failed, checks.len());
    if let Some(path) = output_path(config.output.as_deref(), "validate.json") {
        let doc = Value::Array(
            checks
                .iter()
                .map(|c| {
                    json!({
                        "check": c.name,
                        "passed": c.passed,
                        "residual": opt_num(c.residual),
                        "tolerance": num(c.tolerance),
                        "note": c.note,
                    })
                })
                .collect(),
        );
        emit(Some(&path), &to_pretty(&doc))?;
    }
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} check(s) failed")).into());
    }
    Ok(())
}

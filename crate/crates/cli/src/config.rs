//! Run configuration: a TOML file plus command-line overrides (flags win).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use num_complex::Complex64;
use otto_core::twolevel::{adiabatic_tau, engine_spec, TwoLevelParams};
use otto_core::{CMatrix, EnergySpectrum, EngineSpec, Unitary, DEFAULT_GROUPING_TOL};
use serde::Deserialize;

use crate::error::usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Twolevel,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelSection {
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub tau: Option<f64>,
    /// Use the `k`-th exactly adiabatic duration instead of `tau`.
    pub adiabatic_k: Option<u32>,
    pub omega: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericSection {
    pub spectrum_start: PathBuf,
    pub spectrum_end: PathBuf,
    pub u_expansion: PathBuf,
    pub u_compression: PathBuf,
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauSweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for TauSweep {
    fn default() -> Self {
        Self {
            start: 2.0,
            stop: 10.0,
            points: 81,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// `β1/β2`
    pub ratio: f64,
    pub spacing: Spacing,
}

impl Default for BetaSweep {
    fn default() -> Self {
        Self {
            start: 0.01,
            stop: 100.0,
            points: 61,
            ratio: 10.0,
            spacing: Spacing::Log,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub n_samples: u64,
    pub seed: u64,
    /// χ² significance level below which the fit is rejected.
    pub alpha: f64,
    /// Compare against a distribution artifact instead of the model's own.
    pub exact: Option<PathBuf>,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            seed: 42,
            alpha: 1e-3,
            exact: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub grouping: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            grouping: DEFAULT_GROUPING_TOL,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub output: Option<PathBuf>,
    pub twolevel: Option<TwoLevelSection>,
    pub generic: Option<GenericSection>,
    #[serde(default)]
    pub sweep_tau: TauSweep,
    #[serde(default)]
    pub sweep_beta: BetaSweep,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Reference engine parameters, used for anything the config leaves open.
pub const DEFAULT_GAMMA1: f64 = 0.5;
pub const DEFAULT_GAMMA2: f64 = 3.0;
pub const DEFAULT_TAU: f64 = 2.39;
pub const DEFAULT_BETA1: f64 = 2.0;
pub const DEFAULT_BETA2: f64 = 0.1;

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.output = config.output.as_deref().map(|p| config.resolve(p));
        config.sample.exact = config.sample.exact.as_deref().map(|p| config.resolve(p));
        Ok(config)
    }

    pub fn model_kind(&self) -> anyhow::Result<ModelKind> {
        let kind = match (self.model, self.twolevel.is_some(), self.generic.is_some()) {
            (_, true, true) => return usage("config has both [twolevel] and [generic] sections; keep exactly one"),
            (Some(ModelKind::Generic), true, _) => {
                return usage("model = \"generic\" but a [twolevel] section is present")
            }
            (Some(ModelKind::Twolevel), _, true) => {
                return usage("model = \"twolevel\" but a [generic] section is present")
            }
            (Some(kind), _, _) => kind,
            (None, _, true) => ModelKind::Generic,
            (None, _, false) => ModelKind::Twolevel,
        };
        if kind == ModelKind::Generic && self.generic.is_none() {
            return usage("model = \"generic\" needs a [generic] section with spectra and unitaries");
        }
        Ok(kind)
    }

    pub fn twolevel_params(&self) -> anyhow::Result<TwoLevelParams> {
        if self.model_kind()? != ModelKind::Twolevel {
            return usage("this command needs the two-level model");
        }
        let s = self.twolevel.clone().unwrap_or_default();
        let gamma1 = s.gamma1.unwrap_or(DEFAULT_GAMMA1);
        let gamma2 = s.gamma2.unwrap_or(DEFAULT_GAMMA2);
        let tau = match (s.tau, s.adiabatic_k) {
            (Some(_), Some(_)) => return usage("set either twolevel.tau or twolevel.adiabatic_k, not both"),
            (Some(tau), None) => tau,
            (None, Some(0)) => return usage("adiabatic_k must be at least 1"),
            (None, Some(k)) => adiabatic_tau(gamma1, gamma2, k),
            (None, None) => DEFAULT_TAU,
        };
        let params = TwoLevelParams::new(
            gamma1,
            gamma2,
            tau,
            s.beta1.unwrap_or(DEFAULT_BETA1),
            s.beta2.unwrap_or(DEFAULT_BETA2),
        )?;
        Ok(match s.omega {
            Some(omega) => params.with_omega(omega)?,
            None => params,
        })
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Raw generic inputs, before the unitarity check.
    pub fn generic_inputs(&self) -> anyhow::Result<GenericInputs> {
        let Some(g) = self.generic.as_ref() else {
            return usage("no [generic] section");
        };
        Ok(GenericInputs {
            spectrum_start: read_spectrum(&self.resolve(&g.spectrum_start))?,
            spectrum_end: read_spectrum(&self.resolve(&g.spectrum_end))?,
            u_expansion: read_matrix(&self.resolve(&g.u_expansion))?,
            u_compression: read_matrix(&self.resolve(&g.u_compression))?,
            beta1: g.beta1,
            beta2: g.beta2,
        })
    }

    pub fn engine_spec(&self) -> anyhow::Result<EngineSpec> {
        match self.model_kind()? {
            ModelKind::Twolevel => Ok(engine_spec(&self.twolevel_params()?)?),
            ModelKind::Generic => self.generic_inputs()?.into_spec(),
        }
    }

    pub fn validate_ranges(&self) -> anyhow::Result<()> {
        check_range(
            "sweep_tau",
            self.sweep_tau.start,
            self.sweep_tau.stop,
            self.sweep_tau.points,
        )?;
        if self.sweep_tau.start <= 0.0 {
            return usage("sweep_tau.start must be positive");
        }
        let b = &self.sweep_beta;
        check_range("sweep_beta", b.start, b.stop, b.points)?;
        if b.start <= 0.0 {
            return usage("sweep_beta.start must be positive");
        }
        if !(b.ratio.is_finite() && b.ratio > 0.0) {
            return usage("sweep_beta.ratio must be positive");
        }
        if !(self.tolerances.grouping.is_finite() && self.tolerances.grouping >= 0.0) {
            return usage("tolerances.grouping must be non-negative");
        }
        Ok(())
    }
}

fn check_range(name: &str, start: f64, stop: f64, points: usize) -> anyhow::Result<()> {
    if points == 0 {
        return usage(format!("{name}.points must be at least 1"));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return usage(format!("{name} bounds must be finite"));
    }
    if points > 1 && stop <= start {
        return usage(format!("{name} range is empty or reversed: start {start}, stop {stop}"));
    }
    Ok(())
}

/// `points` values from `start` to `stop` inclusive.
pub fn grid(start: f64, stop: f64, points: usize, spacing: Spacing) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            let f = i as f64 / last;
            match spacing {
                Spacing::Linear => start + (stop - start) * f,
                Spacing::Log => start * (stop / start).powf(f),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GenericInputs {
    pub spectrum_start: EnergySpectrum,
    pub spectrum_end: EnergySpectrum,
    pub u_expansion: CMatrix,
    pub u_compression: CMatrix,
    pub beta1: f64,
    pub beta2: f64,
}

impl GenericInputs {
    pub fn into_spec(self) -> anyhow::Result<EngineSpec> {
        Ok(EngineSpec::new(
            self.spectrum_start,
            self.spectrum_end,
            Unitary::new(self.u_expansion).context("expansion unitary")?,
            Unitary::new(self.u_compression).context("compression unitary")?,
            self.beta1,
            self.beta2,
        )?)
    }
}

fn matrix_entry(value: &serde_json::Value) -> Option<Complex64> {
    match value {
        serde_json::Value::Number(n) => Some(Complex64::new(n.as_f64()?, 0.0)),
        serde_json::Value::Array(pair) if pair.len() == 2 => Some(Complex64::new(pair[0].as_f64()?, pair[1].as_f64()?)),
        _ => None,
    }
}

/// Ascending energies stored as a JSON array of numbers.
pub fn read_spectrum(path: &Path) -> anyhow::Result<EnergySpectrum> {
    let text = fs::read_to_string(path).with_context(|| format!("reading spectrum {}", path.display()))?;
    let levels: Vec<f64> =
        serde_json::from_str(&text).with_context(|| format!("parsing spectrum {}", path.display()))?;
    EnergySpectrum::new(levels).with_context(|| format!("spectrum {}", path.display()))
}

/// Square matrix stored as a JSON array of rows; entries are numbers or `[re, im]` pairs.
pub fn read_matrix(path: &Path) -> anyhow::Result<CMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading matrix {}", path.display()))?;
    let rows: Vec<Vec<serde_json::Value>> =
        serde_json::from_str(&text).with_context(|| format!("parsing matrix {}", path.display()))?;
    let rows = rows
        .iter()
        .map(|row| row.iter().map(matrix_entry).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>();
    let Some(rows) = rows else {
        return usage(format!(
            "{}: matrix entries must be numbers or [re, im] pairs",
            path.display()
        ));
    };
    CMatrix::from_rows(rows).with_context(|| format!("matrix {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_engine() {
        let cfg = RunConfig::default();
        let p = cfg.twolevel_params().unwrap();
        assert_eq!(
            (p.gamma1(), p.gamma2(), p.tau(), p.beta1(), p.beta2()),
            (0.5, 3.0, 2.39, 2.0, 0.1)
        );
    }

    #[test]
    fn both_model_sources_rejected() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [twolevel]
            tau = 1.0
            [generic]
            spectrum_start = "a.json"
            spectrum_end = "b.json"
            u_expansion = "c.json"
            u_compression = "d.json"
            beta1 = 1.0
            beta2 = 0.5
            "#,
        )
        .unwrap();
        assert!(cfg.model_kind().is_err());
        let cfg: RunConfig = toml::from_str("model = \"generic\"").unwrap();
        assert!(cfg.model_kind().is_err());
    }

    #[test]
    fn adiabatic_k_and_tau_are_exclusive() {
        let cfg: RunConfig = toml::from_str("[twolevel]\ntau = 2.0\nadiabatic_k = 4").unwrap();
        assert!(cfg.twolevel_params().is_err());
        let cfg: RunConfig = toml::from_str("[twolevel]\nadiabatic_k = 4").unwrap();
        assert!((cfg.twolevel_params().unwrap().tau() - 16.0 * std::f64::consts::PI / 7.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[twolevel]\ngama1 = 2.0").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(grid(2.0, 10.0, 1, Spacing::Linear), vec![2.0]);
        assert_eq!(grid(2.0, 10.0, 5, Spacing::Linear), vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        let g = grid(0.1, 1000.0, 5, Spacing::Log);
        for (x, e) in g.iter().zip([0.1, 1.0, 10.0, 100.0, 1000.0]) {
            assert!((x - e).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn reversed_range_rejected() {
        let mut cfg = RunConfig::default();
        cfg.sweep_tau.stop = 1.0;
        assert!(cfg.validate_ranges().is_err());
        cfg.sweep_tau.points = 1;
        assert!(cfg.validate_ranges().is_ok());
    }
}

//! JSON artifacts. Numbers are written with 17 significant digits so that
//! every `f64` survives a write/read cycle bit for bit; infinite efficiencies
//! are the strings `"+inf"` and `"-inf"`.

use std::fs;
use std::path::Path;

use anyhow::Context;
use otto_core::spectra::{efficiency_moments, EfficiencyAtom};
use otto_core::twolevel::{derive, TwoLevelParams};
use otto_core::{EfficiencyDistribution, ExtendedReal, DEFAULT_GROUPING_TOL};
use serde_json::{json, Map, Number, Value};

use crate::error::usage;

/// A JSON number carrying 17 significant digits; `null` for non-finite input.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        let n: Number = format!("{x:.16e}").parse().expect("formatted float is a JSON number");
        Value::Number(n)
    } else {
        Value::Null
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn eta_value(eta: ExtendedReal) -> Value {
    match eta {
        ExtendedReal::NegInfinity => Value::String("-inf".into()),
        ExtendedReal::PosInfinity => Value::String("+inf".into()),
        ExtendedReal::Finite(x) => num(x),
    }
}

pub fn parse_eta(value: &Value) -> anyhow::Result<ExtendedReal> {
    match value {
        Value::String(s) if s == "+inf" => Ok(ExtendedReal::PosInfinity),
        Value::String(s) if s == "-inf" => Ok(ExtendedReal::NegInfinity),
        Value::Number(n) => match n.as_f64() {
            Some(x) if x.is_finite() => Ok(ExtendedReal::Finite(x)),
            _ => usage(format!("efficiency value {n} is out of range")),
        },
        other => usage(format!(
            "efficiency must be a number, \"+inf\" or \"-inf\", got {other}"
        )),
    }
}

pub fn support_json(dist: &EfficiencyDistribution) -> Value {
    Value::Array(
        dist.atoms()
            .iter()
            .map(|a| json!({ "eta": eta_value(a.eta), "prob": num(a.prob) }))
            .collect(),
    )
}

pub fn twolevel_params_json(params: &TwoLevelParams, grouping_tol: f64) -> Value {
    let d = derive(params);
    json!({
        "model": "twolevel",
        "gamma1": num(params.gamma1()),
        "gamma2": num(params.gamma2()),
        "tau": num(params.tau()),
        "omega": num(d.omega),
        "beta1": num(params.beta1()),
        "beta2": num(params.beta2()),
        "nu0": num(d.nu0),
        "nu_tau": num(d.nu_tau),
        "u": num(d.u),
        "a_star": num(d.a_star),
        "adiabatic": d.is_adiabatic(),
        "grouping_tol": num(grouping_tol),
    })
}

pub fn generic_params_json(dim: usize, beta1: f64, beta2: f64, grouping_tol: f64) -> Value {
    json!({
        "model": "generic",
        "dimension": dim,
        "beta1": num(beta1),
        "beta2": num(beta2),
        "grouping_tol": num(grouping_tol),
    })
}

/// The `dist` document: support, 0/0 mass, parameters and moments.
pub fn distribution_document(dist: &EfficiencyDistribution, params: Value) -> Value {
    let moments = efficiency_moments(dist);
    let mut m = Map::new();
    m.insert("defined".into(), Value::Bool(moments.defined));
    if let Some(mean) = moments.mean {
        m.insert("mean".into(), num(mean));
    }
    if let Some(var) = moments.variance {
        m.insert("variance".into(), num(var));
    }
    json!({
        "support": support_json(dist),
        "zero_over_zero_mass": num(dist.zero_over_zero_weight()),
        "params": params,
        "moments": Value::Object(m),
    })
}

/// Rebuilds a distribution from a `dist` document.
pub fn distribution_from_json(doc: &Value) -> anyhow::Result<EfficiencyDistribution> {
    let Some(support) = doc.get("support").and_then(Value::as_array) else {
        return usage("distribution document has no \"support\" array");
    };
    let atoms = support
        .iter()
        .map(|entry| {
            let eta = parse_eta(entry.get("eta").unwrap_or(&Value::Null))?;
            let Some(prob) = entry.get("prob").and_then(Value::as_f64) else {
                return usage("support entry without numeric \"prob\"");
            };
            Ok(EfficiencyAtom { eta, prob })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let zero_over_zero = doc.get("zero_over_zero_mass").and_then(Value::as_f64).unwrap_or(0.0);
    let tol = doc
        .pointer("/params/grouping_tol")
        .and_then(Value::as_f64)
        .unwrap_or(DEFAULT_GROUPING_TOL);
    Ok(EfficiencyDistribution::from_atoms(atoms, zero_over_zero, tol))
}

pub fn read_distribution(path: &Path) -> anyhow::Result<EfficiencyDistribution> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    distribution_from_json(&doc).with_context(|| format!("distribution in {}", path.display()))
}

pub fn to_pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use otto_core::twolevel::efficiency_distribution_closed;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(num(-2.5).to_string(), "-2.5000000000000000e+0");
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn round_trip_is_exact() {
        let params = TwoLevelParams::new(0.5, 3.0, 2.39, 2.0, 0.1).unwrap();
        let dist = efficiency_distribution_closed(&params);
        let doc = distribution_document(&dist, twolevel_params_json(&params, DEFAULT_GROUPING_TOL));
        let text = to_pretty(&doc);
        let back = distribution_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, dist);
        assert!(text.contains("\"+inf\"") && text.contains("\"-inf\""));
    }

    #[test]
    fn awkward_values_round_trip() {
        for x in [f64::MIN_POSITIVE, 5e-324, 1.0 / 3.0, -1e300, 0.0, 123456789.12345679] {
            let v: Value = serde_json::from_str(&num(x).to_string()).unwrap();
            assert_eq!(v.as_f64().unwrap().to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn bad_eta_rejected() {
        assert!(parse_eta(&json!("inf")).is_err());
        assert!(parse_eta(&json!(null)).is_err());
        assert_eq!(parse_eta(&json!("-inf")).unwrap(), ExtendedReal::NegInfinity);
    }
}

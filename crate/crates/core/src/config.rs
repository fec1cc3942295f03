//! Flat key/value experiment configuration.
//!
//! A config file is a one-level JSON object. `--set key=value` overrides
//! are applied after the file; list values are comma separated. Absent
//! keys keep the per-mode defaults of [`ExperimentConfig::defaults`].

use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, Mode};
use crate::model::LikelihoodSpec;

pub const KEYS: &[&str] = &[
    "mode",
    "mean_theta",
    "mean_psi",
    "var_theta",
    "var_psi",
    "var_x",
    "var_eta",
    "rho_list",
    "n_list",
    "m_ratio_list",
    "trials",
    "master_seed",
    "theta_star",
    "psi_star",
    "psi_curve_min",
    "psi_curve_max",
    "psi_curve_points",
    "finite_m",
];

/// Unsigned decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|e| Error::validation("seed", format!("`{s}`: {e}")))
}

fn parse_real(field: &str, s: &str) -> Result<f64> {
    let v = s
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::validation(field, format!("`{s}`: {e}")))?;
    if !v.is_finite() {
        return Err(Error::validation(field, "must be finite"));
    }
    Ok(v)
}

fn parse_count(field: &str, s: &str) -> Result<usize> {
    let t = s.trim();
    if let Ok(v) = t.parse::<usize>() {
        return Ok(v);
    }
    // JSON writers may emit integral floats such as `100.0` or `1e4`
    let v = parse_real(field, t)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::validation(field, format!("`{s}` is not a non-negative integer")))
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    let s = s.trim();
    let s = s.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(s);
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "mode" => {
            let mode = Mode::parse(value.trim())
                .ok_or_else(|| Error::validation("mode", format!("unknown mode `{value}`")))?;
            if mode != cfg.mode {
                return Err(Error::validation(
                    "mode",
                    format!("`{}` does not match subcommand mode `{}`", mode.name(), cfg.mode.name()),
                ));
            }
        }
        "mean_theta" => cfg.prior.mean_theta = parse_real(key, value)?,
        "mean_psi" => cfg.prior.mean_psi = parse_real(key, value)?,
        "var_theta" => cfg.prior.var_theta = parse_real(key, value)?,
        "var_psi" => cfg.prior.var_psi = parse_real(key, value)?,
        "var_x" => {
            cfg.lik = LikelihoodSpec::new(parse_real(key, value)?, cfg.lik.var_eta())
                .map_err(|e| Error::validation(key, e.to_string()))?
        }
        "var_eta" => {
            cfg.lik = LikelihoodSpec::new(cfg.lik.var_x(), parse_real(key, value)?)
                .map_err(|e| Error::validation(key, e.to_string()))?
        }
        "rho_list" => cfg.rho_list = split_list(value).map(|t| parse_real(key, t)).collect::<Result<_>>()?,
        "n_list" => cfg.n_list = split_list(value).map(|t| parse_count(key, t)).collect::<Result<_>>()?,
        "m_ratio_list" => {
            cfg.m_ratio_list = split_list(value).map(|t| parse_real(key, t)).collect::<Result<_>>()?
        }
        "trials" => cfg.trials = parse_count(key, value)?,
        "master_seed" => cfg.master_seed = parse_seed(value)?,
        "theta_star" => cfg.true_params.theta_star = parse_real(key, value)?,
        "psi_star" => cfg.true_params.psi_star = parse_real(key, value)?,
        "psi_curve_min" => cfg.psi_curve_min = parse_real(key, value)?,
        "psi_curve_max" => cfg.psi_curve_max = parse_real(key, value)?,
        "psi_curve_points" => cfg.psi_curve_points = parse_count(key, value)?,
        "finite_m" => cfg.finite_m = parse_count(key, value)?,
        other => return Err(Error::Usage(format!("unknown config key `{other}`"))),
    }
    Ok(())
}

fn json_to_text(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::Number(n) => Ok(n.to_string()),
                Value::String(s) => Ok(s.clone()),
                _ => Err(Error::validation(key, "list entries must be numbers")),
            })
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => return Err(Error::validation(key, "expected a number, string or list")),
    })
}

/// Builds a config from optional file bytes and `key=value` overrides.
pub fn parse_config(file: Option<&[u8]>, overrides: &[String], mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::defaults(mode);
    if let Some(bytes) = file {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::validation("config", e.to_string()))?;
        if !text.trim().is_empty() {
            let doc: Value = serde_json::from_str(text)?;
            let obj = doc
                .as_object()
                .ok_or_else(|| Error::validation("config", "top level must be a JSON object"))?;
            for (k, v) in obj {
                if !KEYS.contains(&k.as_str()) {
                    return Err(Error::Usage(format!("unknown config key `{k}`")));
                }
                apply(&mut cfg, k, &json_to_text(k, v)?)?;
            }
        }
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override `{o}` is not key=value")))?;
        apply(&mut cfg, k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

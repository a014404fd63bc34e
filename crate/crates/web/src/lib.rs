//! Browser bindings for the `fris` experiments. Every entry point takes a
//! JSON experiment config and returns a JSON document for plotting.

use fris::experiments::{cmd_capacity, cmd_dist, cmd_outage, parse_config, Preset, RunOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Config of a built-in preset, as pretty-printed JSON.
pub fn preset_json(name: &str) -> Result<String, String> {
    let preset: Preset = name.parse().map_err(|e: fris::Error| e.to_string())?;
    serde_json::to_string_pretty(&preset.config()).map_err(|e| e.to_string())
}

/// Gamma fit and empirical CDF of the first static mode.
pub fn gain_distribution_value(config: &str) -> Result<Value, String> {
    let cfg = parse_config(config).map_err(|e| e.to_string())?;
    let r = cmd_dist(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "mode": r.mode.to_string(),
        "k": r.fit.shape_k,
        "theta": r.fit.scale_theta,
        "ks": r.ks,
        "trials": r.samples.len(),
        "g": r.rows.iter().map(|x| x.g).collect::<Vec<_>>(),
        "pdf": r.rows.iter().map(|x| x.analytical_pdf).collect::<Vec<_>>(),
        "cdf": r.rows.iter().map(|x| x.analytical_cdf).collect::<Vec<_>>(),
        "ecdf": r.rows.iter().map(|x| x.empirical_cdf).collect::<Vec<_>>(),
    }))
}

type Field<'a, R> = (&'a str, &'a dyn Fn(&R) -> f64);

/// Groups per-(snr, mode) rows into one series per mode.
fn series<R>(snr: &[f64], rows: &[R], mode: impl Fn(&R) -> &str, fields: &[Field<R>]) -> Value {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&mode(r)) {
            names.push(mode(r));
        }
    }
    let out: Vec<Value> = names
        .iter()
        .map(|name| {
            let mine: Vec<&R> = rows.iter().filter(|r| mode(r) == *name).collect();
            let mut obj = serde_json::Map::new();
            obj.insert("mode".into(), json!(name));
            for (key, f) in fields {
                obj.insert((*key).into(), json!(mine.iter().map(|r| f(r)).collect::<Vec<_>>()));
            }
            Value::Object(obj)
        })
        .collect();
    json!({ "snr_db": snr, "series": out })
}

/// Analytical, asymptotic and Monte-Carlo outage curves for every mode.
pub fn outage_curve_value(config: &str) -> Result<Value, String> {
    let cfg = parse_config(config).map_err(|e| e.to_string())?;
    let r = cmd_outage(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    Ok(series(
        &cfg.snr_grid_db,
        &r.rows,
        |x| x.mode.as_str(),
        &[
            ("analytical", &|x| x.analytical),
            ("asymptotic", &|x| x.asymptotic),
            ("monte_carlo", &|x| x.monte_carlo.estimate),
        ],
    ))
}

/// Capacity bound, asymptote and Monte-Carlo capacity for every mode.
pub fn capacity_curve_value(config: &str) -> Result<Value, String> {
    let cfg = parse_config(config).map_err(|e| e.to_string())?;
    let r = cmd_capacity(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    Ok(series(
        &cfg.snr_grid_db,
        &r.rows,
        |x| x.mode.as_str(),
        &[
            ("bound", &|x| x.bound),
            ("asymptotic", &|x| x.asymptotic),
            ("monte_carlo", &|x| x.monte_carlo.estimate),
        ],
    ))
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsValue> {
    preset_json(name).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn gain_distribution(config: &str) -> Result<String, JsValue> {
    to_js(gain_distribution_value(config))
}

#[wasm_bindgen]
pub fn outage_curve(config: &str) -> Result<String, JsValue> {
    to_js(outage_curve_value(config))
}

#[wasm_bindgen]
pub fn capacity_curve(config: &str) -> Result<String, JsValue> {
    to_js(capacity_curve_value(config))
}

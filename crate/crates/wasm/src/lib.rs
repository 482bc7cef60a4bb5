//! Browser demo bindings. Every entry point returns a JSON string.

use higgs_core::form::{Bundle, FiberMetric, FormField};
use higgs_core::gauge::GaugeConfig;
use higgs_core::geometry::TorusGeometry;
use higgs_core::hym::{hym_flow, rank_one_direct, HymOptions};
use higgs_core::pipeline::{run_scenario, RunOptions, RunOutput};
use higgs_core::scenario::{Scenario, BUNDLED};
use higgs_core::C64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

/// Bundled scenarios as `[{name, description, toml}]`.
#[wasm_bindgen]
pub fn scenarios() -> String {
    let list: Vec<Value> = BUNDLED
        .iter()
        .map(|(name, text)| {
            let desc = Scenario::from_toml(text).map(|s| s.description).unwrap_or_default();
            json!({ "name": name, "description": desc, "toml": text })
        })
        .collect();
    Value::Array(list).to_string()
}

fn summarize(out: &RunOutput) -> Value {
    let rows: Vec<Value> = out
        .rows
        .iter()
        .map(|r| {
            json!({
                "tag": r.tag,
                "check": r.check,
                "residual": finite(r.residual),
                "tolerance": finite(r.tolerance),
                "status": match (r.pass, r.applicable) { (false, _) => "FAIL", (true, true) => "ok", (true, false) => "n/a" },
                "note": r.note,
            })
        })
        .collect();
    let history: Vec<Value> = out.flow.history.iter().map(|s| json!([s.step, finite(s.residual_sup)])).collect();
    json!({
        "scenario": out.scenario.name,
        "pass": out.all_pass(),
        "lambda": finite(out.lambda),
        "history": history,
        "rows": rows,
    })
}

/// Parse a scenario TOML, run every task and return the verification table.
#[wasm_bindgen]
pub fn verify(toml: &str, seed: u32) -> Result<String, JsError> {
    let sc = Scenario::from_toml(toml).map_err(|e| JsError::new(&e.to_string()))?;
    let opts = RunOptions { seed: Some(seed as u64), fault: None, all_tasks: true };
    let out = run_scenario(&sc, &opts).map_err(|e| JsError::new(&e.to_string()))?;
    Ok(summarize(&out).to_string())
}

/// Line bundle on the rectangular curve `C / (LZ + iMZ)` with a random
/// connection of the given amplitude: runs the HYM flow, compares with the direct solve and
/// returns `log h` on the grid.
#[wasm_bindgen]
pub fn hym_curve(l: f64, m: f64, amplitude: f64, seed: u32, grid: u32) -> Result<String, JsError> {
    let err = |e: higgs_core::LabError| JsError::new(&e.to_string());
    let n = grid as usize;
    let geom = TorusGeometry::new(&[(l, m)], &[C64::new(1.0, 0.0)], n).map_err(err)?;
    let bundle = Bundle::trivial(geom.clone(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let a = FormField::random(&bundle, 0, 1, 3, &mut rng).map_err(err)?.scaled(C64::new(amplitude, 0.0));
    let phi = FormField::zeros(&bundle, 1, 0).map_err(err)?;
    let cfg = GaugeConfig::new(a, phi, FiberMetric::identity(&bundle), 0.0).map_err(err)?;
    let (solved, rep) = hym_flow(&cfg, &HymOptions::default()).map_err(err)?;
    let direct = rank_one_direct(&cfg).map_err(err)?;
    let h = |m: &FiberMetric, pt: usize| m.h().at(0, pt)[0].re;
    let diff = (0..geom.npts()).map(|pt| (h(solved.metric(), pt) - h(&direct, pt)).abs()).fold(0.0, f64::max);
    let log_h: Vec<Value> = (0..geom.npts()).map(|pt| finite(h(solved.metric(), pt).ln())).collect();
    let history: Vec<Value> = rep.history.iter().map(|s| json!([s.step, finite(s.residual_sup), finite(s.dt)])).collect();
    Ok(json!({
        "grid": n,
        "converged": rep.converged,
        "lambda": finite(rep.lambda),
        "residual": finite(rep.residual_sup),
        "direct_difference": finite(diff),
        "history": history,
        "log_h": log_h,
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_flow_agrees_with_direct_solve() {
        let v: Value = serde_json::from_str(&hym_curve(1.0, 0.7, 0.2, 4, 32).unwrap()).unwrap();
        assert_eq!(v["converged"], json!(true));
        assert!(v["direct_difference"].as_f64().unwrap() < 1e-9);
        assert_eq!(v["log_h"].as_array().unwrap().len(), 32 * 32);
    }

    #[test]
    fn scenario_list_round_trips() {
        let v: Value = serde_json::from_str(&scenarios()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), BUNDLED.len());
    }

    #[test]
    fn verify_runs_bundled_scenario() {
        let text = BUNDLED.iter().find(|(n, _)| *n == "rank1-pure-higgs").unwrap().1;
        let v: Value = serde_json::from_str(&verify(text, 1).unwrap()).unwrap();
        assert_eq!(v["pass"], json!(true));
        assert!(!v["rows"].as_array().unwrap().is_empty());
    }
}

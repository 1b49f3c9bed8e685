//! WebAssembly bindings for the demo page in `www/`. Every export returns
//! a JSON string; the computations live in [`api`] so they can be tested
//! natively.

use wasm_bindgen::prelude::*;

pub mod api;

fn into_js(result: longcast::Result<serde_json::Value>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Loss curve of the substituted forecast against the superprediction.
#[wasm_bindgen(js_name = substitutionCurve)]
pub fn substitution_curve(forecasts: Vec<f64>, weights: Vec<f64>, eta: f64, rule: &str) -> Result<String, JsError> {
    into_js(api::substitution_curve(&forecasts, &weights, eta, rule))
}

/// Regret traces of the smoothing regressor on a switching dataset.
#[wasm_bindgen(js_name = regressionTraces)]
pub fn regression_traces(seed: u64, steps: usize, window: usize, segments: usize) -> Result<String, JsError> {
    into_js(api::regression_traces(seed, steps, window, segments))
}

/// Excess loss of the delayed-feedback aggregator against its bound.
#[wasm_bindgen(js_name = longtermRun)]
pub fn longterm_run(n_experts: usize, horizon: usize, steps: usize, seed: u64, adversarial: bool) -> Result<String, JsError> {
    into_js(api::longterm_run(n_experts, horizon, steps, seed, adversarial))
}

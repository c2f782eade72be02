//! Browser bindings for three small interactive views: a field realization,
//! a weighted-sum histogram with its KS verdict, and the oscillating variance
//! profile of the nested index sets.
//!
//! Each binding returns plain numbers or a JSON string so the page needs no
//! glue beyond what `wasm-bindgen` generates.

use lattice_clt::dependence::sigma2_exact;
use lattice_clt::fields::{FieldModel, Kernel};
use lattice_clt::innovations::{stream_seed, InnovationField, InnovationSpec};
use lattice_clt::stats::{ks_critical_value, ks_p_value, ks_statistic, normal_cdf};
use lattice_clt::sums::{exact_variance, SumMethod, SumPlan};
use lattice_clt::weights::{oscillating_blocks, IndexSetWeights, RectangleWeights, WeightScheme};
use lattice_clt::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_SIDE: u32 = 256;
const MAX_REPS: u32 = 20_000;
const MAX_LEVEL: u32 = 14;

fn kernel_terms(name: &str) -> Vec<(Vec<i64>, f64)> {
    match name {
        "iid" => vec![(vec![0, 0], 1.0)],
        "box" => {
            let mut t = Vec::new();
            for i in 0..4 {
                for j in 0..4 {
                    t.push((vec![i, j], 0.25));
                }
            }
            t
        }
        "contrast" => vec![(vec![0, 0], 1.0), (vec![1, 0], -0.5), (vec![0, 1], -0.5)],
        _ => vec![(vec![0, 0], 1.0), (vec![1, 0], 0.5), (vec![0, 1], -0.4), (vec![1, 1], 0.25)],
    }
}

fn model(name: &str, gaussian: bool, seed: u64) -> Result<FieldModel> {
    let law = if gaussian { InnovationSpec::StandardGaussian } else { InnovationSpec::Rademacher };
    FieldModel::kernel(Kernel::new(2, kernel_terms(name))?, InnovationField::new(law, 2, seed)?)
}

/// Row-major `side × side` realization.
pub fn field_values(name: &str, side: u32, seed: u64) -> Result<Vec<f64>> {
    let side = side.clamp(1, MAX_SIDE) as i64;
    let m = model(name, true, seed)?;
    let mut out = Vec::with_capacity((side * side) as usize);
    for r in 0..side {
        for c in 0..side {
            out.push(m.evaluate(&[c, r])?);
        }
    }
    Ok(out)
}

/// Replicates `S_n / b_n` over an `n × n` square and tests it against `N(0, σ²)`.
pub fn clt_summary(name: &str, n: u32, reps: u32, seed: u64, bins: u32) -> Result<Value> {
    let n = n.clamp(2, MAX_SIDE);
    let reps = reps.clamp(50, MAX_REPS) as usize;
    let m = model(name, false, seed)?;
    let scheme = WeightScheme::Rectangle(RectangleWeights::full(n as u64, 2));
    let b_n = scheme.norm();
    let sigma = sigma2_exact(&m)?.sqrt();
    let sigma_n = exact_variance(&m, &scheme)?.sqrt();
    let plan = SumPlan::new(&m, std::slice::from_ref(&scheme), None, SumMethod::Auto)?;
    let mut samples = Vec::with_capacity(reps);
    for i in 0..reps {
        samples.push(plan.evaluate(stream_seed(seed, i as u64))?[0] / b_n);
    }
    let d = ks_statistic(&samples, |x| normal_cdf(x, sigma));
    let critical = ks_critical_value(reps, 0.01);

    let bins = bins.clamp(5, 80) as usize;
    let half = 4.0 * sigma;
    let width = 2.0 * half / bins as f64;
    let mut counts = vec![0u32; bins];
    for &x in &samples {
        let k = ((x + half) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (reps as f64 * width)).collect();
    let mean = samples.iter().sum::<f64>() / reps as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    Ok(json!({
        "n": n,
        "reps": reps,
        "sigma": sigma,
        "sigma_n_over_b_n": sigma_n / b_n,
        "sample_variance": var,
        "ks": d,
        "ks_critical": critical,
        "ks_p_value": ks_p_value(d, reps),
        "passed": d <= critical,
        "bin_lo": -half,
        "bin_width": width,
        "density": density,
    }))
}

/// `σ²_{Γ_n} / |Γ_n|` for `n = 1..=n_max` under the difference field with
/// Rademacher innovations.
pub fn oscillating_ratios(n_max: u32) -> Result<Value> {
    let n_max = n_max.clamp(2, MAX_LEVEL);
    let m = FieldModel::difference(InnovationField::new(InnovationSpec::Rademacher, 1, 0)?)?;
    let mut gamma: Vec<i64> = Vec::new();
    let mut rows = Vec::new();
    for (idx, block) in oscillating_blocks(n_max).into_iter().enumerate() {
        gamma.extend(block);
        let scheme = WeightScheme::IndexSet(IndexSetWeights::from_1d(&gamma));
        let v = exact_variance(&m, &scheme)?;
        rows.push(json!({ "n": idx + 1, "size": gamma.len(), "variance": v, "ratio": v / gamma.len() as f64 }));
    }
    Ok(json!({ "levels": rows }))
}

fn js_err(e: lattice_clt::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn field_heatmap(kernel: &str, side: u32, seed: f64) -> std::result::Result<Vec<f64>, JsValue> {
    field_values(kernel, side, seed as u64).map_err(js_err)
}

#[wasm_bindgen]
pub fn clt_histogram(kernel: &str, n: u32, reps: u32, seed: f64, bins: u32) -> std::result::Result<String, JsValue> {
    clt_summary(kernel, n, reps, seed as u64, bins).map(|v| v.to_string()).map_err(js_err)
}

#[wasm_bindgen]
pub fn variance_profile(n_max: u32) -> std::result::Result<String, JsValue> {
    oscillating_ratios(n_max).map(|v| v.to_string()).map_err(js_err)
}

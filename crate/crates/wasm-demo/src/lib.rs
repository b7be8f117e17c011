//! Browser bindings. Each export returns a JSON string consumed by `www/index.js`.

use serde_json::{json, Value};
use uda_core::posterior::{aggregate, posterior_infinite};
use uda_core::sampling::{PointSampler, RngSpec};
use uda_core::uncertainty::{eptlu_points, fano_bound, hoeffding_tail, ptlu};
use uda_core::worked_examples::{build_example, compute_values, ExampleSpec};
use uda_core::{EntropyConfig, Error};
use wasm_bindgen::prelude::*;

const CFG: EntropyConfig = EntropyConfig::BITS;

fn num(v: f64) -> Value {
    if v.is_infinite() {
        Value::from(if v > 0.0 { "Infinity" } else { "-Infinity" })
    } else {
        json!(v)
    }
}

/// Geometry, masses, ground truth, the infinite-sample soft prediction and the
/// regression values of one worked example, in bits.
pub fn explore(id: u8, class: u8, resolution: usize) -> Result<Value, Error> {
    let spec = ExampleSpec::new(id, class, resolution);
    spec.validate()?;
    let ex = build_example(&spec)?;
    let inst = &ex.instance;
    let domain = ex.class.domain();
    let all: Vec<usize> = (0..domain.len()).collect();
    let rho = posterior_infinite(&ex.class, &inst.p, &inst.q, &inst.f)?.posterior;
    let soft = aggregate(&rho, &all);
    let points: Vec<Value> = domain
        .points()
        .iter()
        .enumerate()
        .map(|(x, pt)| {
            json!({
                "angle": pt.angle,
                "coords": pt.coords,
                "p": inst.p.mass(x),
                "q": inst.q.mass(x),
                "truth": inst.f.label(x),
                "prob_one": soft.row(x)[1],
            })
        })
        .collect();
    let values: Vec<Value> = compute_values(&ex, CFG)?
        .into_iter()
        .map(|(q, v)| {
            let reference = ex.reference(q).and_then(|r| r.value_in(CFG)).map(|r| num(r.as_f64()));
            json!({ "quantity": q.name(), "value": num(v.as_f64()), "reference": reference })
        })
        .collect();
    Ok(json!({
        "example": id,
        "class": class,
        "resolution": spec.resolution,
        "metric": domain.metric(),
        "posterior_support": rho.support_len(),
        "points": points,
        "values": values,
    }))
}

/// Lower bound on the risk of any learner as a function of PTLU (bits), for
/// `k` labels. The binary form also needs `e*`.
pub fn fano(k: usize, e_star: f64, steps: usize) -> Result<Value, Error> {
    if k < 2 || steps == 0 {
        return Err(Error::InvalidArgument(format!("need k >= 2 and steps >= 1, got k = {k}, steps = {steps}")));
    }
    let top = (k as f64).log2();
    let curve: Vec<Value> = (0..=steps)
        .map(|i| {
            let u = top * i as f64 / steps as f64;
            fano_bound(u, k, Some(e_star), CFG).map(|b| json!({ "u": u, "bound": b }))
        })
        .collect::<Result<_, _>>()?;
    Ok(json!({ "k": k, "e_star": e_star, "max_u": top, "curve": curve }))
}

/// EPTLU of `trials` resampled `n`-point targets against the example's PTLU,
/// with the infinite-sample posterior held fixed.
pub fn eptlu_samples(id: u8, class: u8, resolution: usize, n: usize, trials: usize, seed: u64) -> Result<Value, Error> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n and trials must be at least 1".into()));
    }
    let spec = ExampleSpec::new(id, class, resolution);
    spec.validate()?;
    let ex = build_example(&spec)?;
    let inst = &ex.instance;
    let rho = posterior_infinite(&ex.class, &inst.p, &inst.q, &inst.f)?.posterior;
    let u = ptlu(&rho, &inst.q, CFG);
    let sampler = PointSampler::new(&inst.q);
    let rng = RngSpec::new(seed, 0);
    let values: Vec<f64> = (0..trials)
        .map(|t| eptlu_points(&rho, &sampler.draw_n(n, &mut rng.trial(0, t as u64).rng()), CFG))
        .collect::<Result<_, _>>()?;
    let k = ex.class.k();
    Ok(json!({
        "ptlu": u,
        "k": k,
        "n": n,
        "values": values,
        "tail_0_05": hoeffding_tail(n, 0.05, k).min(1.0),
        "tail_0_1": hoeffding_tail(n, 0.1, k).min(1.0),
    }))
}

fn to_js(r: Result<Value, Error>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn explore_example(id: u8, class: u8, resolution: usize) -> Result<String, JsError> {
    to_js(explore(id, class, resolution))
}

#[wasm_bindgen]
pub fn fano_curve(k: usize, e_star: f64, steps: usize) -> Result<String, JsError> {
    to_js(fano(k, e_star, steps))
}

#[wasm_bindgen]
pub fn eptlu_histogram(id: u8, class: u8, resolution: usize, n: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    to_js(eptlu_samples(id, class, resolution, n, trials, seed))
}

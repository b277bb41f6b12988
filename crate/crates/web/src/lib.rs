//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export is a thin wrapper over a plain Rust function so the numbers
//! the page draws can be tested natively.

use chainkit::inference::{self, labels_to_index, ConditionalModel};
use chainkit::{chain, search, synth, ChainStructure, LearnerConfig, Propagation, TabularJoint};
use wasm_bindgen::prelude::*;

/// Decision regions for the XOR label (label 3) on a `grid x grid` lattice
/// over `[-0.5, 1.5]^2`, row-major with y growing downward.
///
/// `mode`: 0 = independent logistic per label, 1 = logistic chain OR, AND,
/// XOR, 2 = independent trees. Returns the probability of XOR = 1 per cell
/// followed by the held-out XOR accuracy.
pub fn xor_regions(mode: u32, sigma: f64, seed: u64, grid: usize) -> Result<Vec<f64>, String> {
    let train = synth::xor_toy(50, sigma, seed);
    let test = synth::xor_toy(50, sigma, seed.wrapping_add(1));
    let (structure, lc) = match mode {
        0 => (ChainStructure::empty(3), LearnerConfig::default()),
        1 => (ChainStructure::full_cascade_identity(3), LearnerConfig::default()),
        2 => (ChainStructure::empty(3), LearnerConfig::tree(6)),
        _ => return Err(format!("unknown mode {mode}")),
    };
    let m = chain::train(&train, &structure, &lc, Propagation::Hard).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(grid * grid + 1);
    for r in 0..grid {
        for c in 0..grid {
            let x = [-0.5 + 2.0 * (c as f64 + 0.5) / grid as f64, 1.5 - 2.0 * (r as f64 + 0.5) / grid as f64];
            out.push(m.predict_greedy(&x).marginals()[2]);
        }
    }
    let hits = (0..test.n_rows()).filter(|&i| m.predict_greedy(test.x(i)).labels()[2] == test.label(i, 2)).count();
    out.push(hits as f64 / test.n_rows() as f64);
    Ok(out)
}

/// The probability tree of a random joint over `l` labels, chained in label
/// order.
///
/// Layout: `2^l - 1` conditionals `P(y_k = 1 | prefix)` in heap order (root
/// first, children of node `i` at `2i+1` for 0 and `2i+2` for 1), then the
/// leaf indices reached by greedy, beam(`width`) and exhaustive MAP, then
/// their joint probabilities.
pub fn probability_tree(l: usize, seed: u64, width: usize) -> Result<Vec<f64>, String> {
    if !(1..=6).contains(&l) {
        return Err("the tree view supports 1 to 6 labels".into());
    }
    let joint = TabularJoint::random(l, seed)
        .with_structure(ChainStructure::full_cascade_identity(l))
        .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity((1 << l) + 5);
    for depth in 0..l {
        for prefix in 0..1usize << depth {
            let parents: Vec<f64> = (0..depth).map(|k| ((prefix >> (depth - 1 - k)) & 1) as f64).collect();
            out.push(joint.prob_one(depth, &[], &parents));
        }
    }
    let found = [
        inference::map_greedy(&joint, &[]),
        inference::map_beam(&joint, &[], width.max(1)),
        inference::map_exhaustive(&joint, &[]).map_err(|e| e.to_string())?,
    ];
    out.extend(found.iter().map(|p| labels_to_index(p.labels()) as f64));
    out.extend(found.iter().map(|p| p.joint_payoff()));
    Ok(out)
}

/// Pivot weights over chain positions at step `step` of order search.
pub fn pivot_weights(l: usize, step: usize, decay: f64) -> Vec<f64> {
    search::pivot_distribution(l, step, decay)
}

#[wasm_bindgen(js_name = xorRegions)]
pub fn xor_regions_js(mode: u32, sigma: f64, seed: u32, grid: u32) -> Result<Vec<f64>, JsError> {
    xor_regions(mode, sigma, seed as u64, grid as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = probabilityTree)]
pub fn probability_tree_js(l: u32, seed: u32, width: u32) -> Result<Vec<f64>, JsError> {
    probability_tree(l as usize, seed as u64, width as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pivotWeights)]
pub fn pivot_weights_js(l: u32, step: u32, decay: f64) -> Vec<f64> {
    pivot_weights(l as usize, step as usize, decay)
}

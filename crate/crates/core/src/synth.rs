//! Synthetic datasets with known label structure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Matrix};
use crate::inference::TabularJoint;
use crate::learners::sigmoid;

const GRID: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];

/// The four points of `{0,1}^2` labelled (OR, XOR).
pub fn or_xor_grid() -> Dataset {
    let x: Vec<Vec<f64>> = GRID.iter().map(|r| r.to_vec()).collect();
    let y: Vec<Vec<u8>> = GRID
        .iter()
        .map(|r| {
            let (a, b) = (r[0] as u8, r[1] as u8);
            vec![a | b, a ^ b]
        })
        .collect();
    Dataset::from_rows(&x, &y).expect("grid dataset")
}

/// The four points of `{0,1}^2` replicated `replicates` times with Gaussian
/// jitter of standard deviation `sigma`, labelled (OR, AND, XOR) from the
/// un-jittered bits.
pub fn xor_toy(replicates: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut x = Vec::with_capacity(replicates * 8);
    let mut y = Vec::with_capacity(replicates * 12);
    for _ in 0..replicates {
        for r in &GRID {
            x.push(r[0] + noise.sample(&mut rng));
            x.push(r[1] + noise.sample(&mut rng));
            let (a, b) = (r[0] as u8, r[1] as u8);
            y.extend_from_slice(&[a | b, a & b, a ^ b]);
        }
    }
    let features = Matrix::from_vec(replicates * 4, 2, x).expect("shape");
    let names = vec!["or".to_string(), "and".to_string(), "xor".to_string()];
    Dataset::with_names(features, y, 3, names).expect("toy dataset")
}

/// Six labels over two independent XOR gadgets plus noise features.
///
/// Features: `[a1, a2, b1, b2, n1, n2]`, where `a`, `b` are jittered bits and
/// `n` is pure noise. Labels (1-based): 1 = OR(a), 2 = AND(a), 3 = XOR(b),
/// 4 = OR(b), 5 = AND(b), 6 = XOR(a). Each label is flipped independently
/// with probability `flip`. A linear base learner can only recover an XOR
/// label when both its OR and AND labels precede it in the chain.
pub fn planted_dependence(n: usize, sigma: f64, flip: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut x = Vec::with_capacity(n * 6);
    let mut y = Vec::with_capacity(n * 6);
    for _ in 0..n {
        let bits: [u8; 4] = std::array::from_fn(|_| rng.gen_range(0..2u8));
        for &b in &bits {
            x.push(b as f64 + noise.sample(&mut rng));
        }
        x.push(rng.gen::<f64>() * 2.0 - 1.0);
        x.push(rng.gen::<f64>() * 2.0 - 1.0);
        let (a1, a2, b1, b2) = (bits[0], bits[1], bits[2], bits[3]);
        let clean = [a1 | a2, a1 & a2, b1 ^ b2, b1 | b2, b1 & b2, a1 ^ a2];
        for v in clean {
            y.push(if rng.gen::<f64>() < flip { v ^ 1 } else { v });
        }
    }
    Dataset::new(Matrix::from_vec(n, 6, x).expect("shape"), y, 6).expect("planted dataset")
}

/// Labels drawn from a random logistic cascade: label `j` depends on the
/// features and on every earlier label through random weights.
pub fn random_cascade(n: usize, n_features: usize, n_labels: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let wx: Vec<Vec<f64>> =
        (0..n_labels).map(|_| (0..n_features).map(|_| std.sample(&mut rng) * 1.5).collect()).collect();
    let wy: Vec<Vec<f64>> = (0..n_labels).map(|j| (0..j).map(|_| std.sample(&mut rng) * 2.0).collect()).collect();
    let bias: Vec<f64> = (0..n_labels).map(|_| std.sample(&mut rng) * 0.5).collect();
    let mut x = Vec::with_capacity(n * n_features);
    let mut y = Vec::with_capacity(n * n_labels);
    for _ in 0..n {
        let row: Vec<f64> = (0..n_features).map(|_| std.sample(&mut rng)).collect();
        let mut labels: Vec<u8> = Vec::with_capacity(n_labels);
        for j in 0..n_labels {
            let mut z = bias[j];
            z += wx[j].iter().zip(&row).map(|(w, v)| w * v).sum::<f64>();
            z += wy[j].iter().zip(&labels).map(|(w, &v)| w * v as f64).sum::<f64>();
            labels.push((rng.gen::<f64>() < sigmoid(z)) as u8);
        }
        x.extend_from_slice(&row);
        y.extend_from_slice(&labels);
    }
    Dataset::new(Matrix::from_vec(n, n_features, x).expect("shape"), y, n_labels).expect("cascade dataset")
}

/// `n` label vectors sampled from `joint`, each paired with a single
/// constant feature.
pub fn sample_tabular(joint: &TabularJoint, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = joint.n_labels();
    let mut y = Vec::with_capacity(n * l);
    for _ in 0..n {
        y.extend(joint.sample(&mut rng));
    }
    Dataset::new(Matrix::from_vec(n, 1, vec![1.0; n]).expect("shape"), y, l).expect("tabular sample")
}

/// Independent fair-coin labels with Gaussian features unrelated to them.
pub fn independent_labels(n: usize, n_features: usize, n_labels: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let x: Vec<f64> = (0..n * n_features).map(|_| std.sample(&mut rng)).collect();
    let y: Vec<u8> = (0..n * n_labels).map(|_| rng.gen_range(0..2u8)).collect();
    Dataset::new(Matrix::from_vec(n, n_features, x).expect("shape"), y, n_labels).expect("independent dataset")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shapes_and_logic() {
        let d = xor_toy(50, 0.05, 1);
        assert_eq!((d.n_rows(), d.n_features(), d.n_labels()), (200, 2, 3));
        for i in 0..d.n_rows() {
            let y = d.y(i);
            assert_eq!(y[2], y[0] & !y[1] & 1);
        }
        assert_eq!(xor_toy(5, 0.05, 9), xor_toy(5, 0.05, 9));
    }

    #[test]
    fn planted_labels_without_noise() {
        let d = planted_dependence(100, 0.0, 0.0, 4);
        for i in 0..d.n_rows() {
            let (x, y) = (d.x(i), d.y(i));
            let bit = |v: f64| v as u8;
            assert_eq!(y[5], bit(x[0]) ^ bit(x[1]));
            assert_eq!(y[2], y[3] - y[4]);
        }
    }
}

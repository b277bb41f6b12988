use chainkit_web::{pivot_weights, probability_tree, xor_regions};

#[test]
fn chain_separates_xor_and_independent_logistic_does_not() {
    let br = xor_regions(0, 0.05, 1, 16).unwrap();
    let cc = xor_regions(1, 0.05, 1, 16).unwrap();
    assert_eq!(br.len(), 16 * 16 + 1);
    assert!(br[256] <= 0.75, "independent accuracy {}", br[256]);
    assert!(cc[256] >= 0.95, "chain accuracy {}", cc[256]);
    assert!(br[..256].iter().chain(&cc[..256]).all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn tree_paths_are_ordered() {
    for seed in 0..30 {
        let v = probability_tree(4, seed, 2).unwrap();
        assert_eq!(v.len(), 15 + 6);
        let (g, b, m) = (v[18], v[19], v[20]);
        assert!(g <= b + 1e-15 && b <= m + 1e-15);
        assert!(v[15..18].iter().all(|&i| i.fract() == 0.0 && (0.0..16.0).contains(&i)));
    }
    assert!(probability_tree(0, 1, 1).is_err());
}

#[test]
fn pivot_weights_shift_toward_the_tail() {
    let early = pivot_weights(6, 0, 0.05);
    let late = pivot_weights(6, 200, 0.05);
    assert!((early.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(early.iter().all(|&w| (w - 0.2).abs() < 1e-12));
    assert!(late[4] > late[0]);
}

#[test]
fn unknown_mode_is_rejected() {
    assert!(xor_regions(7, 0.05, 1, 4).is_err());
}

use chainkit::chain;
use chainkit::inference::{self, index_to_labels, map_beam, map_epsilon, map_exhaustive, map_greedy};
use chainkit::io::AnyModel;
use chainkit::{synth, ChainStructure, LearnerConfig, Predictor, Propagation, TabularJoint};
use proptest::prelude::*;

fn order_from_keys(keys: &[u32]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by_key(|&i| (keys[i], i));
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beam_is_sandwiched(l in 2usize..6, seed in 0u64..10_000, keys in prop::collection::vec(any::<u32>(), 6), width in 1usize..40) {
        let order = order_from_keys(&keys[..l]);
        let j = TabularJoint::random(l, seed).with_structure(ChainStructure::full_cascade(&order).unwrap()).unwrap();
        let g = map_greedy(&j, &[]).log_payoff();
        let b = map_beam(&j, &[], width).log_payoff();
        let e = map_exhaustive(&j, &[]).unwrap();
        prop_assert!(g <= b && b <= e.log_payoff());
        prop_assert_eq!(map_epsilon(&j, &[], 0.0), e);
    }

    #[test]
    fn epsilon_search_is_exact_when_it_returns(l in 2usize..6, seed in 0u64..10_000, eps in 0.0f64..0.5) {
        let j = TabularJoint::random(l, seed);
        let found = map_epsilon(&j, &[], eps);
        let exact = map_exhaustive(&j, &[]).unwrap();
        prop_assert!(found.log_payoff() <= exact.log_payoff() + 1e-12);
    }

    #[test]
    fn fitted_chain_is_normalised(l in 2usize..6, seed in 0u64..1000, x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let d = synth::random_cascade(60, 3, l, seed);
        let m = chain::train(&d, &ChainStructure::full_cascade_identity(l), &LearnerConfig::default(), Propagation::Hard).unwrap();
        let total: f64 = (0..1usize << l).map(|i| inference::joint_payoff(&m, &x, &index_to_labels(i, l)).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn saved_chain_predicts_identically() {
    let d = synth::planted_dependence(120, 0.1, 0.05, 2);
    let m = chain::train(&d, &ChainStructure::full_cascade(&[5, 3, 1, 0, 2, 4]).unwrap(), &LearnerConfig::tree(4), Propagation::Hard).unwrap();
    let dir = std::env::temp_dir().join(format!("chainkit-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.txt");
    let any = AnyModel::Chain(m);
    any.save(&path).unwrap();
    let back = AnyModel::load(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back, any);
    for i in 0..d.n_rows() {
        assert_eq!(back.predict(d.x(i)), any.predict(d.x(i)));
    }
}

#[test]
fn csv_round_trip_keeps_the_dataset() {
    let d = synth::random_cascade(25, 2, 3, 1);
    let mut buf = Vec::new();
    d.write_csv(&mut buf, true).unwrap();
    let back = chainkit::Dataset::read_csv(&buf[..], 3, true).unwrap();
    assert_eq!(back.labels(), d.labels());
    assert_eq!(back.features().as_slice(), d.features().as_slice());
}

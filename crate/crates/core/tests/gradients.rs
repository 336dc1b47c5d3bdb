use activelabel::data::ClassId;
use activelabel::model::{grad_weighted_ce, Architecture, ClassifierParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..40 {
        let inst = common::random_fd_instance(&mut rng);
        let err = common::fd_max_rel_error(&inst);
        assert!(
            err < 1e-4,
            "case {case}: relative error {err:e} ({:?})",
            inst.params.architecture
        );
    }
}

#[test]
fn gradient_vanishes_for_zero_weight_samples() {
    let params = ClassifierParams::init(Architecture::Mlp1Hidden { hidden_units: 5 }, 3, 3, 9).unwrap();
    let x1 = [0.3, -1.0, 2.0];
    let x2 = [1.5, 0.2, -0.7];
    let both = [(&x1[..], ClassId(0)), (&x2[..], ClassId(2))];
    let only_first = [(&x1[..], ClassId(0))];
    let g = grad_weighted_ce(&params, &both, &[1.0, 0.0]).unwrap();
    let g1 = grad_weighted_ce(&params, &only_first, &[1.0]).unwrap();
    assert_eq!(g, g1);
}

#[test]
fn gradient_is_linear_in_the_weights() {
    let params = ClassifierParams::init(Architecture::SoftmaxLinear, 2, 3, 4).unwrap();
    let x = [0.5, -0.25];
    let batch = [(&x[..], ClassId(1))];
    let g = grad_weighted_ce(&params, &batch, &[1.0]).unwrap();
    let half = grad_weighted_ce(&params, &batch, &[0.5]).unwrap();
    for (a, b) in g.values().zip(half.values()) {
        assert_eq!(a * 0.5, *b);
    }
}

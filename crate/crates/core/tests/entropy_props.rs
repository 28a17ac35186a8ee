use biased_bb84::channel::QubitChannel;
use biased_bb84::entropy::{
    binary_entropy, h_x_given_e, h_y_given_e, joint_distribution, Conditioning, SourceDistribution,
};
use biased_bb84::keyrate::{closed_form_rate, Direction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn eve_entropies_are_bounded(seed in any::<u64>(), q in 0.02..0.98f64) {
        let ch = QubitChannel::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let source = SourceDistribution::new(q).unwrap();
        let hx = h_x_given_e(&ch, source).unwrap();
        prop_assert!(hx >= -1e-9 && hx <= binary_entropy(q).unwrap() + 1e-9, "H(X|E) = {hx}");
        let [_, py1] = joint_distribution(&ch, source).marginal_y();
        let hy = h_y_given_e(&ch, source).unwrap();
        prop_assert!(hy >= -1e-9 && hy <= binary_entropy(py1).unwrap() + 1e-9, "H(Y|E) = {hy}");
    }
}

#[test]
fn entropic_paths_agree_with_closed_forms() {
    for i in 0..10 {
        for j in 1..10 {
            let (p, q) = (i as f64 * 0.1, j as f64 * 0.1);
            let ch = QubitChannel::amplitude_damping(p).unwrap();
            let source = SourceDistribution::new(q).unwrap();
            let joint = joint_distribution(&ch, source);
            let direct = h_x_given_e(&ch, source).unwrap()
                - joint.conditional_entropy(Conditioning::XGivenY)
                - closed_form_rate(p, q, Direction::Direct).unwrap();
            let reverse = h_y_given_e(&ch, source).unwrap()
                - joint.conditional_entropy(Conditioning::YGivenX)
                - closed_form_rate(p, q, Direction::Reverse).unwrap();
            assert!(direct.abs() < 1e-8, "direct p={p} q={q}: {direct:e}");
            assert!(reverse.abs() < 1e-8, "reverse p={p} q={q}: {reverse:e}");
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo and property checks of the delay model, the interconnect and
//! the chained MIPUF.

use proptest::prelude::*;
use puf_gkm::bits::{Bits, Challenge, ResponseWord};
use puf_gkm::interconnect::{omega_route, permutation_of, se_count, InterconnectConfig};
use puf_gkm::mipuf::{
    inter_config_variation, intra_config_variation, ChallengePolicy, Geometry, Mipuf, RepetitionCode,
};
use puf_gkm::puf_core::{calibrate_noise, parity_features, ArbiterPufModel, NoiseCalibration, PufNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const BER: f64 = 0.029;

fn sigma() -> f64 {
    calibrate_noise(BER, &NoiseCalibration::new(32, 1.0, 11)).unwrap()
}

#[test]
fn calibrated_noise_reproduces_the_target_error_rate_on_fresh_devices() {
    let s = sigma();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut flips, mut total) = (0u64, 0u64);
    for d in 0..20 {
        let puf = ArbiterPufModel::<f64>::sample(1000 + d, 32, 1.0, s).unwrap();
        for _ in 0..5000 {
            let c = Challenge::new(Bits::random(32, &mut rng));
            flips += (puf.eval(&c, false, &mut rng).unwrap() != puf.eval(&c, true, &mut rng).unwrap()) as u64;
            total += 1;
        }
    }
    let ber = flips as f64 / total as f64;
    assert!((0.025..=0.033).contains(&ber), "measured {ber}");
}

#[test]
fn responses_pooled_over_devices_are_balanced() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ones = 0u64;
    let n = 200 * 100;
    for d in 0..200 {
        let puf = ArbiterPufModel::<f64>::sample(d, 32, 1.0, 0.0).unwrap();
        for _ in 0..100 {
            let c = Challenge::new(Bits::random(32, &mut rng));
            ones += puf.eval(&c, false, &mut rng).unwrap() as u64;
        }
    }
    let expected = n as f64 / 2.0;
    let zeros = n - ones;
    let chi2 = ((ones as f64 - expected).powi(2) + (zeros as f64 - expected).powi(2)) / expected;
    let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 {chi2} p {p}");
}

#[test]
fn nodes_of_different_devices_are_unique() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let nodes: Vec<PufNode<f64>> = (0..10).map(|d| PufNode::sample(d, 64, 32, 1.0, 0.0).unwrap()).collect();
    let (mut dist, mut count) = (0usize, 0usize);
    for _ in 0..200 {
        let c = Challenge::new(Bits::random(32, &mut rng));
        let words: Vec<ResponseWord> = nodes.iter().map(|n| n.eval(&c, false, &mut rng).unwrap()).collect();
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                dist += words[i].hamming(&words[j]);
                count += 64;
            }
        }
    }
    let u = dist as f64 / count as f64;
    assert!((0.45..=0.55).contains(&u), "uniqueness {u}");
}

#[test]
fn inter_configuration_variation_is_near_half() {
    let puf = Mipuf::<f64>::sample(Geometry::default(), 5, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = inter_config_variation(&puf, 12, 200, &mut rng).unwrap();
    assert_eq!(r.comparisons, 66 * 200);
    assert!((0.45..=0.55).contains(&r.mean), "inter {}", r.mean);
}

#[test]
fn correction_shrinks_intra_configuration_variation() {
    let mut puf = Mipuf::<f64>::sample(Geometry::default(), 6, sigma()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = puf.random_seed(&mut rng);
    puf.reconfigure(g, ChallengePolicy::Keep, &Challenge::new(Bits::zeros(32))).unwrap();
    let raw = intra_config_variation(&puf, false, 500, 5, &mut rng).unwrap();
    let fixed = intra_config_variation(&puf, true, 500, 5, &mut rng).unwrap();
    assert!(fixed.mean <= 0.05, "corrected {}", fixed.mean);
    assert!(fixed.mean <= raw.mean / 5.0, "corrected {} raw {}", fixed.mean, raw.mean);
    assert!(raw.mean > 0.1, "raw {}", raw.mean);
}

#[test]
fn noise_free_devices_have_no_intra_variation() {
    let mut puf = Mipuf::<f64>::sample(Geometry::default(), 7, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = puf.random_seed(&mut rng);
    puf.reconfigure(g, ChallengePolicy::Keep, &Challenge::new(Bits::zeros(32))).unwrap();
    assert_eq!(intra_config_variation(&puf, false, 100, 3, &mut rng).unwrap().mean, 0.0);
}

#[test]
fn enrollment_under_one_configuration_fails_under_another() {
    let puf = Mipuf::<f64>::sample(Geometry::default(), 8, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (g1, g2) = (puf.random_seed(&mut rng), puf.random_seed(&mut rng));
    let c = Challenge::new(Bits::random(32, &mut rng));
    let a = puf.at(&g1).unwrap().respond(&c).unwrap();
    let b = puf.at(&g2).unwrap().respond(&c).unwrap();
    assert!(a.hamming(&b) > 10, "distance {}", a.hamming(&b));
    assert_eq!(a, puf.at(&g1).unwrap().respond(&c).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parity_features_are_signs_with_a_bias_term(bits in prop::collection::vec(any::<bool>(), 1..70)) {
        let c = Bits::from_bools(bits.clone());
        let phi = parity_features::<f64>(&c);
        prop_assert_eq!(phi.len(), bits.len() + 1);
        prop_assert_eq!(phi[bits.len()], 1.0);
        for (i, &f) in phi.iter().take(bits.len()).enumerate() {
            let ones = bits[i..].iter().filter(|&&b| b).count();
            prop_assert_eq!(f, if ones % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn negated_weights_give_complementary_responses(seed in any::<u64>(), c in any::<u32>()) {
        let puf = ArbiterPufModel::<f64>::sample(seed, 32, 1.0, 0.0).unwrap();
        let neg = ArbiterPufModel::new(puf.weights().iter().map(|w| -w).collect(), 0.0).unwrap();
        let c = Challenge::new(Bits::from_u64(c as u64, 32));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = puf.delay(&parity_features(&c));
        prop_assume!(d != 0.0);
        prop_assert_ne!(puf.eval(&c, false, &mut rng).unwrap(), neg.eval(&c, false, &mut rng).unwrap());
    }

    #[test]
    fn omega_routing_is_a_weight_preserving_bijection(seed in any::<u64>(), log_w in 1u32..7) {
        let w = 1usize << log_w;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = InterconnectConfig::new(w, Bits::random(se_count(w), &mut rng)).unwrap();
        let perm = permutation_of(&cfg);
        prop_assert!(perm.is_bijection());
        let word = ResponseWord::new(Bits::random(w, &mut rng));
        let routed = omega_route(&cfg, &word).unwrap();
        prop_assert_eq!(routed.count_ones(), word.count_ones());
        prop_assert_eq!(&*routed, &perm.apply(&word));
    }

    #[test]
    fn repetition_code_corrects_minority_flips(seed in any::<u64>()) {
        let code = RepetitionCode::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Bits::random(64, &mut rng);
        let helper = code.sketch(&w, &mut rng);
        let mut noisy = w.clone();
        for g in 0..w.len().div_ceil(5) {
            let group: Vec<usize> = (g * 5..(g * 5 + 5).min(64)).collect();
            for _ in 0..rng.random_range(0..=2usize) {
                let i = group[rng.random_range(0..group.len())];
                noisy.flip(i);
            }
        }
        // Double flips of one position cancel, so at most two flips survive per group.
        prop_assert_eq!(code.recover(&noisy, &helper).unwrap(), w);
    }

    #[test]
    fn noiseless_chains_are_deterministic(seed in any::<u64>()) {
        let g: Geometry = "3:16:16".parse().unwrap();
        let puf = Mipuf::<f64>::sample(g, seed, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = puf.random_seed(&mut rng);
        let c = Challenge::new(Bits::random(16, &mut rng));
        let a = puf.at(&gamma).unwrap().respond(&c).unwrap();
        let again = Mipuf::<f64>::sample(g, seed, 0.0).unwrap();
        prop_assert_eq!(a, again.at(&gamma).unwrap().respond(&c).unwrap());
    }
}

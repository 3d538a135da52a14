// SPDX-License-Identifier: Apache-2.0

//! Group key management driven through the simulator plus properties of the
//! crypto layer, the codec and the exposure bound.

use proptest::prelude::*;
use puf_gkm::bits::Bits;
use puf_gkm::costmodel::SystemParams;
use puf_gkm::netsim::{run_scenario, Scenario};
use puf_gkm::protocol::crypto::sealed_len;
use puf_gkm::protocol::message::{plaintext_bits, wire_sizes};
use puf_gkm::protocol::{sample_complexity_bound, CipherMode, RekeyBoundParams};
use puf_gkm::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn script(n: u64, m: u64, joiner: bool, leaver: Option<u64>) -> String {
    let mut s = format!("set noise 0\nset subgroups {m}\nat 0 enroll 1-{}\nat 1 distribute 1-{n}\n", n + 1);
    s.push_str("at 2 assert agree\n");
    if joiner {
        s.push_str(&format!("at 3 join {}\nat 4 assert agree\nat 4 assert backward {}\n", n + 1, n + 1));
    }
    if let Some(l) = leaver {
        s.push_str(&format!("at 5 leave {l}\nat 6 assert agree\nat 6 assert forward {l}\n"));
    }
    s.push_str("at 7 assert audit\nat 7 assert no-leak\n");
    s
}

#[test]
fn manual_complete_rekey_replaces_the_key_everywhere() {
    let sc: Scenario = "set noise 0\nat 0 enroll 1-5\nat 1 distribute\nat 2 complete-rekey\nat 3 assert agree\n\
        at 3 assert rekeys 1\nat 3 assert audit\n"
        .parse()
        .unwrap();
    let out = run_scenario(&sc, 1).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
}

#[test]
fn a_retired_node_cannot_rejoin_without_enrollment() {
    let sc: Scenario = "set noise 0\nat 0 enroll 1-4\nat 1 distribute\nat 2 leave 3\nat 3 join 3\n"
        .parse()
        .unwrap();
    let err = run_scenario(&sc, 2).unwrap_err().to_string();
    assert!(err.starts_with("line 5:") && err.contains("unknown member 3"), "{err}");
}

#[test]
fn distributing_to_an_unenrolled_node_is_refused_before_running() {
    assert!("at 0 enroll 1\nat 1 distribute 1-2\n".parse::<Scenario>().is_err());
}

#[test]
fn every_bit_of_a_sealed_payload_is_authenticated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let key = Bits::random(64, &mut rng);
    let plain = Bits::random(100, &mut rng);
    let sealed = CipherMode::Aes128CtrHmacSha1.seal(&key, &plain, &mut rng);
    assert_eq!(sealed.len(), sealed_len(100));
    assert_eq!(CipherMode::Aes128CtrHmacSha1.open(&key, &sealed, 100).unwrap(), plain);
    for bit in 0..sealed.len() * 8 {
        let mut t = sealed.clone();
        t[bit / 8] ^= 0x80 >> (bit % 8);
        assert!(matches!(
            CipherMode::Aes128CtrHmacSha1.open(&key, &t, 100),
            Err(Error::Authentication)
        ));
    }
    let other = Bits::random(64, &mut rng);
    assert!(CipherMode::Aes128CtrHmacSha1.open(&other, &sealed, 100).is_err());
}

#[test]
fn bound_instances() {
    let p = |m, n, k, delta, epsilon| RekeyBoundParams {
        m_nodes: m,
        n_pufs: n,
        k_vc: k,
        delta,
        epsilon,
    };
    assert_eq!(sample_complexity_bound(&p(4, 64, 33, 0.01, 0.01)).unwrap(), 870_861);
    assert_eq!(sample_complexity_bound(&p(4, 64, 33, 1.0, 0.01)).unwrap(), (4 * 33 + 4) * 64 * 100);
    assert_eq!(sample_complexity_bound(&p(2, 8, 9, 0.05, 0.05)).unwrap(), 3260);
    assert!(sample_complexity_bound(&p(4, 64, 33, 0.01, 0.0)).is_err());
    assert!(sample_complexity_bound(&p(4, 64, 33, 0.0, 0.01)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn membership_changes_keep_agreement(n in 2u64..9, m in 1u64..4, seed in any::<u64>(), leave in 0u64..9) {
        let m = m.min(n);
        let leaver = Some(1 + leave % n);
        let sc: Scenario = script(n, m, true, leaver).parse().unwrap();
        let out = run_scenario(&sc, seed).unwrap();
        prop_assert!(out.passed(), "{:?}", out.assertions.iter().filter(|a| !a.passed).collect::<Vec<_>>());
    }
}

proptest! {
    #[test]
    fn hints_unmask_at_any_width(seed in any::<u64>(), w in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, k) = (Bits::random(w, &mut rng), Bits::random(w, &mut rng));
        let hint = r.xor(&k);
        prop_assert_eq!(hint.xor(&r), k.clone());
        prop_assert_eq!(hint.xor(&k), r);
    }

    #[test]
    fn wire_frames_never_undercut_the_plaintext(a in 1u64..256, c in 1u64..256, extra in 0u64..128, l in 2u64..64) {
        let p = SystemParams { a, b: c + extra, c, l, n: 4, m: 2 };
        let (plain, wire) = (plaintext_bits(&p), wire_sizes(&p));
        prop_assert!(wire.key_delivery >= plain.key_delivery);
        prop_assert!(wire.crp_update >= plain.crp_update);
        prop_assert!(wire.join >= plain.join && wire.leave >= plain.leave);
    }

    #[test]
    fn bound_falls_as_tolerances_grow(delta in 0.001f64..1.0, epsilon in 0.001f64..0.5) {
        let base = RekeyBoundParams::for_geometry(&Default::default(), delta, epsilon);
        let looser = RekeyBoundParams { epsilon: (epsilon * 1.5).min(0.99), ..base };
        let surer = RekeyBoundParams { delta: (delta * 1.5).min(1.0), ..base };
        let b = sample_complexity_bound(&base).unwrap();
        prop_assert!(sample_complexity_bound(&looser).unwrap() <= b);
        prop_assert!(sample_complexity_bound(&surer).unwrap() <= b);
    }
}

mod common;

use common::oracles::{check_pair, fuzz_pair};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use todsim::model::{DONTCARE, GENERAL, NONE};
use todsim::revision::filter_with_drops;
use todsim::SlotValues;

const PAIRS: usize = 10_000;

#[test]
fn soundness_and_idempotence_on_10k_pairs() {
    let w = World::shared();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..PAIRS {
        let (b, u) = fuzz_pair(w, &mut rng);
        check_pair(&b, &u);
    }
}

#[test]
fn verbatim_values_survive() {
    let w = World::shared();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..1000 {
        let b = random_goal(&w.ontology, &mut rng);
        let utt: Vec<String> = b
            .slot_triples()
            .filter(|t| !matches!(t.value.as_str(), "yes" | "no" | "free") && t.value != DONTCARE)
            .map(|t| t.value)
            .collect();
        let utt = utt.join(" , ");
        let (kept, _) = filter_with_drops(&b, &utt);
        for t in b.slot_triples().filter(|t| utt.contains(t.value.as_str())) {
            if !matches!(t.value.as_str(), "yes" | "no" | "free" | DONTCARE) {
                assert_eq!(kept.get(&t.domain, &t.slot), Some(t.value.as_str()), "`{utt}`");
            }
        }
    }
}

#[test]
fn negation_scope() {
    let b = sv(&[("hotel", "parking", "yes"), ("hotel", "internet", "no")]);
    let (kept, _) = filter_with_drops(&b, "i need free parking but no wifi please");
    assert_eq!(kept, b);
    let (kept, dropped) = filter_with_drops(&b, "i do not need parking and have wifi");
    assert!(kept.is_empty());
    assert_eq!(dropped.len(), 2);
}

#[test]
fn exempt_entries_pass_through() {
    let b: SlotValues = sv(&[("train", NONE, NONE), (GENERAL, NONE, NONE)]);
    assert_eq!(filter_with_drops(&b, "bye").0, b);
}

proptest! {
    #[test]
    fn filter_is_sound_prop(seed in any::<u64>()) {
        let w = World::shared();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, u) = fuzz_pair(w, &mut rng);
        check_pair(&b, &u);
    }
}

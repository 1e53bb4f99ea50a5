mod support;

use msgen_core::contract::{ContractState, DeltaAction};

#[test]
fn replay_reproduces_every_intermediate_state() {
    for seed in 0..300 {
        let mut rng = support::rng(seed);
        let mut c = support::base_contract(&mut rng);
        for _ in 0..6 {
            let deltas = support::random_deltas(&mut rng, &c);
            let before = c.version();
            c = c.apply_deltas(&deltas).unwrap();
            assert!(c.version() >= before, "seed {seed}: version went backwards");
            assert_eq!(c.version() as usize, c.update_log().len(), "seed {seed}");
            let replayed = ContractState::replay(c.update_log()).unwrap();
            assert_eq!(replayed.to_canonical_json(), c.to_canonical_json(), "seed {seed}");
        }
        let from_jsonl = ContractState::from_journal_jsonl(&c.journal_jsonl()).unwrap();
        assert_eq!(from_jsonl, c);
        assert_eq!(ContractState::from_json(&c.to_canonical_json()).unwrap(), c);
    }
}

#[test]
fn feedback_application_is_idempotent() {
    for seed in 0..300 {
        let mut rng = support::rng(1_000 + seed);
        let c = support::base_contract(&mut rng);
        let deltas = support::random_deltas(&mut rng, &c);
        let once = c.apply_deltas(&deltas).unwrap();
        let twice = once.apply_deltas(&deltas).unwrap();
        assert_eq!(once.to_canonical_json(), twice.to_canonical_json(), "seed {seed}: {deltas:?}");
    }
}

#[test]
fn application_order_within_a_batch_does_not_matter() {
    for seed in 0..200 {
        let mut rng = support::rng(2_000 + seed);
        let c = support::base_contract(&mut rng);
        let deltas = support::random_deltas(&mut rng, &c);
        let mut reversed = deltas.clone();
        reversed.reverse();
        assert_eq!(c.apply_deltas(&deltas).unwrap(), c.apply_deltas(&reversed).unwrap(), "seed {seed}");
    }
}

#[test]
fn competing_placements_keep_one_winner_per_label() {
    for seed in 0..200 {
        let mut rng = support::rng(3_000 + seed);
        let c = support::base_contract(&mut rng);
        let deltas = support::random_deltas(&mut rng, &c);
        let next = c.apply_deltas(&deltas).unwrap();
        let mut winners = std::collections::BTreeMap::new();
        for d in &deltas {
            if let DeltaAction::AdjustPlacement { label, section } = &d.action {
                let key = d.canonical_key();
                let entry = winners.entry(label.clone()).or_insert((key.clone(), section.clone()));
                if key > entry.0 {
                    *entry = (key, section.clone());
                }
            }
        }
        for (label, (_, section)) in winners {
            assert_eq!(next.sections_requiring(&label), vec![section.as_str()], "seed {seed}");
        }
    }
}

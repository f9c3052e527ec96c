use fedpc::topology::{gossip_schedule, line_schedule, ring_schedule, Schedule, Sender};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

fn assert_chain(s: &Schedule) {
    assert_eq!(s.events[0].sender, Sender::Source);
    for pair in s.events.windows(2) {
        assert_eq!(pair[1].sender, Sender::Client(pair[0].receiver));
    }
    for e in &s.events {
        assert_ne!(e.sender, Sender::Client(e.receiver), "self-loop at {e:?}");
        assert!(s.clients.contains(&e.receiver));
    }
    assert!(s.round_counts().iter().all(|&n| n == s.clients.len()));
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: Some(Box::new(FileFailurePersistence::WithSource("regressions"))),
        ..ProptestConfig::default()
    })]

    #[test]
    fn gossip_is_a_chain_without_self_loops(
        ids in prop::collection::btree_set(0usize..500, 2..20),
        rounds in 1usize..6,
        seed in any::<u64>(),
    ) {
        let ids: Vec<usize> = ids.into_iter().collect();
        let s = gossip_schedule(&ids, rounds, seed).unwrap();
        assert_chain(&s);
        prop_assert_eq!(s.events.len(), ids.len() * rounds);
        prop_assert_eq!(&s, &gossip_schedule(&ids, rounds, seed).unwrap());
    }

    #[test]
    fn ring_covers_every_client_each_round(
        ids in prop::collection::btree_set(0usize..500, 2..20),
        rounds in 1usize..6,
    ) {
        let ids: Vec<usize> = ids.into_iter().collect();
        let s = ring_schedule(&ids, rounds).unwrap();
        assert_chain(&s);
        for r in 0..rounds {
            let got: Vec<usize> = s.events_in_round(r).map(|e| e.receiver).collect();
            prop_assert_eq!(&got, &ids);
        }
    }
}

#[test]
fn gossip_may_skip_and_repeat_clients() {
    let ids: Vec<usize> = (0..8).collect();
    let (mut skipped, mut repeated) = (false, false);
    for seed in 0..50 {
        let s = gossip_schedule(&ids, 1, seed).unwrap();
        let mut hits = [0usize; 8];
        s.receivers().for_each(|r| hits[r] += 1);
        skipped |= hits.contains(&0);
        repeated |= hits.iter().any(|&h| h > 1);
    }
    assert!(skipped && repeated);
}

#[test]
fn ring_order_over_two_rounds() {
    let s = ring_schedule(&[0, 1, 2], 2).unwrap();
    assert_eq!(s.receivers().collect::<Vec<_>>(), vec![0, 1, 2, 0, 1, 2]);
}

#[test]
fn line_matches_single_round_ring() {
    let ids = [4, 1, 9];
    let (l, r) = (
        line_schedule(&ids).unwrap(),
        ring_schedule(&ids, 1).unwrap(),
    );
    assert_eq!(l.events, r.events);
}

#[test]
fn rejects_degenerate_inputs() {
    assert!(gossip_schedule(&[3], 2, 0).is_err());
    assert!(gossip_schedule(&[], 2, 0).is_err());
    assert!(gossip_schedule(&[0, 1], 0, 0).is_err());
    assert!(ring_schedule(&[7], 1).is_err());
}

#[test]
fn schedule_csv_round_trips_the_rows() {
    let s = gossip_schedule(&[0, 1, 2], 2, 5).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,step,sender,receiver"));
    assert!(lines.next().unwrap().starts_with("0,0,SOURCE,"));
    assert_eq!(text.lines().count(), 7);
}

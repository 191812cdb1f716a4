use proptest::prelude::*;
use seqlab_core::synth::{generate_synthetic_match, SynthConfig, TowerFallSpec};
use seqlab_core::Team;
use seqlab_core::telemetry::{
    parse_match_log, resample_positions, to_jsonl, validate, EventKind, MatchLog, Position,
};

fn short(sample_every: u32) -> SynthConfig {
    SynthConfig {
        duration_s: 400.0,
        sample_every,
        towers: vec![
            TowerFallSpec { t: 150.0, tier: 1, team: Team::Dire },
            TowerFallSpec { t: 300.0, tier: 3, team: Team::Radiant },
        ],
        ..SynthConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn synthetic_matches_validate_and_round_trip(seed in any::<u64>(), every in 1u32..=4) {
        let m = generate_synthetic_match(&short(every), seed).unwrap();
        prop_assert!(validate(&m).is_empty());
        let text = to_jsonl(&m);
        let back = parse_match_log(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(to_jsonl(&back), text);
    }

    #[test]
    fn resampling_carries_last_sample_forward(seed in any::<u64>(), every in 2u32..=5) {
        let m = generate_synthetic_match(&short(every), seed).unwrap();
        let table = resample_positions(&m, 1.0).unwrap();
        prop_assert_eq!(table.n_ticks(), 401);
        for (pi, info) in m.players.iter().enumerate() {
            let samples: Vec<(f64, Position)> = m.events.iter().filter_map(|e| match &e.kind {
                EventKind::PositionSample { player, position } if *player == info.player_id => Some((e.time_s, *position)),
                _ => None,
            }).collect();
            let deaths: Vec<f64> = m.events.iter().filter_map(|e| match &e.kind {
                EventKind::Death { player } if *player == info.player_id => Some(e.time_s),
                _ => None,
            }).collect();
            for tick in 0..table.n_ticks() {
                let tau = tick as f64;
                // latest sample at or before tau, unless a death follows it before tau
                let want = samples.iter().rev().find(|(t, _)| *t <= tau).and_then(|&(s, p)| {
                    if deaths.iter().any(|&d| s <= d && d < tau) { None } else { Some(p) }
                });
                prop_assert_eq!(table.position(pi, tick), want, "player {} tick {}", info.player_id, tick);
                let died_here = deaths.iter().any(|&d| d.floor() as usize == tick);
                prop_assert_eq!(table.flags(pi, tick).died, died_here);
            }
        }
    }

    #[test]
    fn resampling_is_deterministic(seed in any::<u64>()) {
        let m = generate_synthetic_match(&short(3), seed).unwrap();
        let a = resample_positions(&m, 1.0).unwrap();
        let b = resample_positions(&m, 1.0).unwrap();
        for p in 0..10 {
            for t in 0..a.n_ticks() {
                prop_assert_eq!(a.position(p, t), b.position(p, t));
                prop_assert_eq!(a.flags(p, t), b.flags(p, t));
            }
        }
    }
}

#[test]
fn bundled_match_round_trips_byte_for_byte() {
    let text = seqlab_core::fixtures::MATCH_PAPER;
    let m: MatchLog = parse_match_log(text.as_bytes()).unwrap();
    assert_eq!(to_jsonl(&m), text);
}

mod common;

use common::oracles::{brute_ngrams, brute_top_k, collapse, dss_from_ticks};
use proptest::prelude::*;
use seqlab_core::abstraction::BehaviorState;
use seqlab_core::seqmine::{
    mine_ngrams_with, top_frequent_sequences_with, NgramParams, PatternMode, SequenceCorpus,
};

fn state() -> impl Strategy<Value = BehaviorState> {
    prop::sample::select(BehaviorState::ALL[..4].to_vec())
}

fn corpus() -> impl Strategy<Value = Vec<Vec<BehaviorState>>> {
    prop::collection::vec(prop::collection::vec(state(), 1..=10), 1..=20)
}

fn build(ticks: &[Vec<BehaviorState>]) -> SequenceCorpus {
    let seqs = ticks.iter().enumerate().map(|(i, t)| dss_from_ticks(&format!("p{i}"), t)).collect();
    SequenceCorpus::new(None, seqs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn top_k_matches_brute_force(ticks in corpus(), k in 1usize..12, raw in any::<bool>()) {
        let c = build(&ticks);
        let (mode, symbols): (PatternMode, Vec<Vec<BehaviorState>>) = if raw {
            (PatternMode::RawTicks, ticks.clone())
        } else {
            (PatternMode::Dss, ticks.iter().map(|t| collapse(t)).collect())
        };
        let got = top_frequent_sequences_with(&c, k, mode).unwrap();
        let want = brute_top_k(&symbols, k);
        let got_rows: Vec<(Vec<BehaviorState>, usize)> = got.rows.iter().map(|r| (r.pattern.clone(), r.count)).collect();
        prop_assert_eq!(got_rows, want);
        prop_assert_eq!(got.total, ticks.len());
        for r in &got.rows {
            prop_assert_eq!(r.share, r.count as f64 / ticks.len() as f64);
        }
    }

    #[test]
    fn ngrams_match_brute_force(
        ticks in corpus(),
        min_len in 1usize..=3,
        extra in 0usize..=2,
        support in prop::sample::select(vec![0.05, 0.1, 0.2, 0.25, 0.5, 0.75, 1.0]),
        raw in any::<bool>(),
    ) {
        let c = build(&ticks);
        let (mode, symbols): (PatternMode, Vec<Vec<BehaviorState>>) = if raw {
            (PatternMode::RawTicks, ticks.clone())
        } else {
            (PatternMode::Dss, ticks.iter().map(|t| collapse(t)).collect())
        };
        let params = NgramParams::new(min_len, min_len + extra, support);
        let got = mine_ngrams_with(&c, params, mode).unwrap();
        let got_rows: Vec<(Vec<BehaviorState>, usize, usize)> =
            got.rows.iter().map(|r| (r.ngram.clone(), r.sequences, r.occurrences)).collect();
        prop_assert_eq!(got_rows, brute_ngrams(&symbols, min_len, min_len + extra, support));
    }

    #[test]
    fn raising_support_only_removes_rows(ticks in corpus(), lo in 0.05f64..0.5, hi in 0.5f64..=1.0) {
        let c = build(&ticks);
        let a = mine_ngrams_with(&c, NgramParams::new(1, 3, lo), PatternMode::Dss).unwrap();
        let b = mine_ngrams_with(&c, NgramParams::new(1, 3, hi), PatternMode::Dss).unwrap();
        for row in &b.rows {
            prop_assert!(a.rows.contains(row));
        }
    }
}

#[test]
fn paper_style_example() {
    use BehaviorState::{Fight as B, Solo as A};
    let ticks = vec![vec![A, B, A], vec![A, B, B]];
    let c = build(&ticks);
    let raw = mine_ngrams_with(&c, NgramParams::new(2, 2, 0.5), PatternMode::RawTicks).unwrap();
    let rows: Vec<(Vec<BehaviorState>, f64)> = raw.rows.iter().map(|r| (r.ngram.clone(), r.support)).collect();
    assert_eq!(rows, vec![(vec![A, B], 1.0), (vec![B, A], 0.5), (vec![B, B], 0.5)]);
    let dss = mine_ngrams_with(&c, NgramParams::new(2, 2, 0.5), PatternMode::Dss).unwrap();
    let rows: Vec<(Vec<BehaviorState>, f64)> = dss.rows.iter().map(|r| (r.ngram.clone(), r.support)).collect();
    assert_eq!(rows, vec![(vec![A, B], 1.0), (vec![B, A], 0.5)]);
}

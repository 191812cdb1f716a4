//! Regenerates the data fixtures under `crates/core/fixtures/`.
//!
//! The reference match is a synthetic game with four scripted early-game
//! deaths. The labelled applications and the two-annotator pair are laid out
//! by hand (the pair by seeded corruption) and checked before writing.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqlab_core::annotation::{applications_to_jsonl, irr_report, load_rubric, AnnotationSet, LabelApplication};
use seqlab_core::report::{death_followups, label_counts_by_segment};
use seqlab_core::segmentation::find_boundaries;
use seqlab_core::synth::{generate_synthetic_match, ScriptedKill, SynthConfig};
use seqlab_core::telemetry::{to_jsonl, MatchLog};
use seqlab_core::Segment;

const MATCH_ID: &str = "paper-0001";
const TF: &str = "Team Fighting";
const SR: &str = "Solo Recovery";
const TR: &str = "Team Recovery";
const FOCUS: (&str, &str) = (TF, "Focus Target");
const FARMING: (&str, &str) = (SR, "Farming");

fn paper_match() -> MatchLog {
    let cfg = SynthConfig {
        match_id: Some(MATCH_ID.into()),
        sample_every: 5,
        kill_chance: 0.0,
        scripted_kills: vec![
            ScriptedKill { t: 100.0, killer: 5, victim: 0 },
            ScriptedKill { t: 220.0, killer: 1, victim: 5 },
            ScriptedKill { t: 340.0, killer: 6, victim: 0 },
            ScriptedKill { t: 460.0, killer: 2, victim: 5 },
            ScriptedKill { t: 900.0, killer: 7, victim: 3 },
        ],
        ..SynthConfig::default()
    };
    generate_synthetic_match(&cfg, 4242).expect("valid config")
}

struct Layout {
    annotator: String,
    apps: Vec<LabelApplication>,
}

impl Layout {
    fn put(&mut self, players: &[&str], start: f64, end: f64, (label, tag): (&str, &str)) {
        for p in players {
            self.apps.push(LabelApplication {
                application_id: format!("{}-{:03}", self.annotator, self.apps.len() + 1),
                annotator_id: self.annotator.clone(),
                match_id: MATCH_ID.into(),
                player_id: p.to_string(),
                start_s: start,
                end_s: end,
                label: label.into(),
                tag: tag.into(),
            });
        }
    }
}

fn paper_annotations() -> Vec<LabelApplication> {
    let mut l = Layout { annotator: "analyst-1".into(), apps: Vec::new() };
    // early game: focus-target fights around each scripted death
    l.put(&["r0", "r1"], 90.0, 110.0, FOCUS);
    l.put(&["d0", "d1"], 210.0, 230.0, FOCUS);
    l.put(&["r0", "r2"], 330.0, 350.0, FOCUS);
    l.put(&["d0", "d2"], 450.0, 470.0, FOCUS);
    l.put(&["r3", "d3"], 500.0, 520.0, FOCUS);
    // three of the four fallen targets go farming right after
    l.put(&["r0"], 125.0, 160.0, FARMING);
    l.put(&["d0"], 245.0, 280.0, FARMING);
    l.put(&["r0"], 365.0, 400.0, FARMING);
    l.put(&["r3"], 40.0, 70.0, FARMING);
    l.put(&["d3"], 300.0, 330.0, FARMING);
    l.put(&["r4"], 250.0, 280.0, FARMING);
    l.put(&["r4", "d4"], 150.0, 170.0, (TF, "Retaliation"));
    l.put(&["r1"], 400.0, 420.0, (TF, "Retaliation"));
    l.put(&["d1"], 40.0, 70.0, (SR, "Scout"));
    l.put(&["d2"], 300.0, 330.0, (SR, "Scout"));
    l.put(&["r2"], 540.0, 570.0, (TR, "Push"));
    l.put(&["d2"], 540.0, 570.0, (TR, "Objective Struggle"));

    // mid game
    l.put(&["r0", "d0"], 700.0, 720.0, (TF, "Objective Struggle"));
    l.put(&["r1"], 1100.0, 1120.0, (TF, "Retaliation"));
    l.put(&["d1"], 1500.0, 1520.0, FOCUS);
    l.put(&["r2"], 900.0, 930.0, FARMING);
    l.put(&["d2"], 1000.0, 1030.0, (SR, "Scout"));
    l.put(&["r3"], 1300.0, 1330.0, (TR, "Assist"));
    l.put(&["d3"], 1300.0, 1330.0, (TR, "Push"));

    // late game: objectives dominate
    l.put(&["r0", "r1", "r2", "r3", "d0", "d1", "d2", "d3"], 1850.0, 1875.0, (TF, "Objective Struggle"));
    l.put(&["r0", "r1", "d0", "d1", "d2"], 2000.0, 2020.0, FOCUS);
    l.put(&["r2", "r3", "d3", "d4"], 2150.0, 2170.0, (TF, "Retaliation"));
    l.put(&["r0", "r1", "r2", "r3"], 2250.0, 2280.0, (TR, "Push"));
    l.put(&["d0", "d1", "d2"], 2250.0, 2280.0, (TR, "Objective Struggle"));
    l.put(&["r4", "d4"], 2300.0, 2330.0, (TR, "Assist"));
    l.apps
}

const PAIRS: [(&str, &str); 9] = [
    (TF, "Objective Struggle"),
    (TF, "Retaliation"),
    (TF, "Focus Target"),
    (SR, "Farming"),
    (SR, "Scout"),
    (SR, "Push"),
    (TR, "Push"),
    (TR, "Objective Struggle"),
    (TR, "Assist"),
];

const PLAYERS: [&str; 10] = ["r0", "r1", "r2", "r3", "r4", "d0", "d1", "d2", "d3", "d4"];

/// Non-overlapping mid-game applications for one rater.
fn irr_base(rng: &mut ChaCha8Rng) -> Vec<LabelApplication> {
    let mut l = Layout { annotator: "rater-a".into(), apps: Vec::new() };
    for p in PLAYERS {
        let mut t = 600.0 + rng.random_range(0..12) as f64 * 5.0;
        while t < 1700.0 {
            let len = rng.random_range(3..9) as f64 * 5.0;
            l.put(&[p], t, t + len, PAIRS[rng.random_range(0..PAIRS.len())]);
            t += len + rng.random_range(4..20) as f64 * 5.0;
        }
    }
    l.apps
}

/// Second rater: same intervals with a share of labels swapped, some
/// applications missed and boundaries nudged.
fn corrupt(base: &[LabelApplication], rng: &mut ChaCha8Rng, p_swap: f64, p_drop: f64) -> Vec<LabelApplication> {
    let mut out = Vec::new();
    for a in base {
        if rng.random_bool(p_drop) {
            continue;
        }
        let mut b = a.clone();
        b.annotator_id = "rater-b".into();
        b.application_id = format!("rater-b-{:03}", out.len() + 1);
        if rng.random_bool(p_swap) {
            let (label, tag) = PAIRS[rng.random_range(0..PAIRS.len())];
            b.label = label.into();
            b.tag = tag.into();
        }
        let shift = rng.random_range(-1i32..=1) as f64 * 2.5;
        b.start_s += shift.max(0.0);
        b.end_s += shift.min(0.0);
        out.push(b);
    }
    out
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let rubric = load_rubric(&std::fs::read_to_string(dir.join("rubric_final.toml")).unwrap()).unwrap();

    let m = paper_match();
    let apps = paper_annotations();
    let bounds = BTreeMap::from([(MATCH_ID.to_string(), find_boundaries(&m))]);
    let report = label_counts_by_segment(&apps, &bounds).unwrap();
    let counts: Vec<u64> = Segment::ALL.iter().map(|&s| report.label_count(s, TF)).collect();
    assert_eq!(counts, vec![13, 4, 17]);
    let set = AnnotationSet { annotator_id: "analyst-1".into(), applications: apps.clone() };
    assert!(set.overlapping_pairs().is_empty());
    for a in &apps {
        assert!(rubric.contains(&a.label, &a.tag), "{a:?}");
    }
    let f = death_followups(&apps, std::slice::from_ref(&m), FOCUS, FARMING, 30.0);
    assert_eq!((f.considered, f.followed), (4, 3));

    // search corruption seeds for a pair landing on the target agreement
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let base = irr_base(&mut rng);
    let a = AnnotationSet { annotator_id: "rater-a".into(), applications: base.clone() };
    let mut found = None;
    'search: for step in 0..=60 {
        let p_swap = step as f64 * 0.01;
        for seed in 0..200u64 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let b = AnnotationSet { annotator_id: "rater-b".into(), applications: corrupt(&base, &mut r, p_swap, 0.1) };
            let k = irr_report(&a, &b, std::slice::from_ref(&m), 5.0, &rubric).unwrap().overall_kappa;
            if (k - 0.60).abs() <= 0.002 {
                println!("irr pair: p_swap {p_swap}, seed {seed}, kappa {k:.4}");
                found = Some(b);
                break 'search;
            }
        }
    }
    let b = found.expect("no corruption seed reached the target");
    assert!(b.overlapping_pairs().is_empty());

    std::fs::write(dir.join("match_paper.jsonl"), to_jsonl(&m)).unwrap();
    std::fs::write(dir.join("annotations_paper.jsonl"), applications_to_jsonl(&apps)).unwrap();
    std::fs::write(dir.join("irr_fixture_A.jsonl"), applications_to_jsonl(&a.applications)).unwrap();
    std::fs::write(dir.join("irr_fixture_B.jsonl"), applications_to_jsonl(&b.applications)).unwrap();
    println!("wrote fixtures to {}", dir.display());
}

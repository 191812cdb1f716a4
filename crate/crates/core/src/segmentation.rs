//! Early / mid / late game segmentation by tower falls.
//!
//! Early game ends when the first tower (any tier, either team) falls; mid
//! game ends when the first tier-3 tower falls. Segments are half-open, so a
//! tick at the exact fall instant belongs to the new segment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abstraction::{compress_dss, DssSequence, StateSequence};
use crate::telemetry::MatchLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Early,
    Mid,
    Late,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::Early, Segment::Mid, Segment::Late];

    pub fn name(self) -> &'static str {
        match self {
            Segment::Early => "early",
            Segment::Mid => "mid",
            Segment::Late => "late",
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "early" => Ok(Segment::Early),
            "mid" => Ok(Segment::Mid),
            "late" => Ok(Segment::Late),
            other => Err(format!("unknown segment `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentBoundaries {
    pub early_end_s: Option<f64>,
    pub mid_end_s: Option<f64>,
    pub match_end_s: f64,
}

impl SegmentBoundaries {
    /// Segment containing time `t`. Without an early boundary everything is
    /// early; without a mid boundary nothing is late.
    pub fn segment_of(&self, t: f64) -> Segment {
        match (self.early_end_s, self.mid_end_s) {
            (None, _) => Segment::Early,
            (Some(e), _) if t < e => Segment::Early,
            (Some(_), None) => Segment::Mid,
            (Some(_), Some(m)) if t < m => Segment::Mid,
            _ => Segment::Late,
        }
    }

    pub fn reached_late_game(&self) -> bool {
        self.mid_end_s.is_some()
    }

    /// `[start, end)` of a segment, or `None` if the match never entered it.
    pub fn span(&self, seg: Segment) -> Option<(f64, f64)> {
        match seg {
            Segment::Early => Some((0.0, self.early_end_s.unwrap_or(self.match_end_s))),
            Segment::Mid => self
                .early_end_s
                .map(|e| (e, self.mid_end_s.unwrap_or(self.match_end_s))),
            Segment::Late => self.mid_end_s.map(|m| (m, self.match_end_s)),
        }
    }
}

pub fn find_boundaries(m: &MatchLog) -> SegmentBoundaries {
    let mut early = None;
    let mut mid = None;
    for (t, tier, _) in m.tower_falls() {
        if early.is_none() {
            early = Some(t);
        }
        if tier == 3 && mid.is_none() {
            mid = Some(t);
        }
    }
    SegmentBoundaries { early_end_s: early, mid_end_s: mid, match_end_s: m.match_end_s() }
}

/// Partition a sequence by segment. All three keys are always present; a
/// segment the player never reached maps to an empty sequence.
pub fn split_sequence(seq: &StateSequence, b: &SegmentBoundaries) -> BTreeMap<Segment, StateSequence> {
    let mut out: BTreeMap<Segment, StateSequence> = Segment::ALL
        .into_iter()
        .map(|seg| {
            (
                seg,
                StateSequence {
                    match_id: seq.match_id.clone(),
                    player_id: seq.player_id.clone(),
                    segment: Some(seg),
                    entries: Vec::new(),
                },
            )
        })
        .collect();
    for &(t, state) in &seq.entries {
        out.get_mut(&b.segment_of(t))
            .expect("all segments present")
            .entries
            .push((t, state));
    }
    out
}

/// Keep only matches where a tier-3 tower fell.
pub fn filter_complete_games<T>(corpus: Vec<(MatchLog, T)>) -> Vec<(MatchLog, T)> {
    corpus
        .into_iter()
        .filter(|(m, _)| find_boundaries(m).reached_late_game())
        .collect()
}

/// Per-segment DSS corpora from abstracted matches. Games without a tier-3
/// fall are dropped, so each kept player contributes one sequence to every
/// segment, in input order.
pub fn segment_corpus(abstracted: Vec<(MatchLog, Vec<StateSequence>)>) -> BTreeMap<Segment, Vec<DssSequence>> {
    let mut out: BTreeMap<Segment, Vec<DssSequence>> = Segment::ALL.into_iter().map(|s| (s, Vec::new())).collect();
    for (m, seqs) in filter_complete_games(abstracted) {
        let b = find_boundaries(&m);
        for seq in &seqs {
            for (seg, part) in split_sequence(seq, &b) {
                out.get_mut(&seg).expect("all segments present").push(compress_dss(&part));
            }
        }
    }
    out
}

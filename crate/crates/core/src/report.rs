//! Label usage and state frequencies broken down by game segment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{BehaviorState, StateSequence};
use crate::annotation::{LabelApplication, Rubric};
use crate::segmentation::{Segment, SegmentBoundaries};
use crate::telemetry::{EventKind, MatchLog};

pub const DEFAULT_MAX_GAP_S: f64 = 30.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no segment boundaries for match `{0}`")]
    MissingBoundaries(String),
    #[error("label `{0}` is not in the rubric")]
    UnknownLabel(String),
    #[error("report rows are inconsistent: {0}")]
    Inconsistent(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One row of the flat report form. Label totals have no tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub segment: Segment,
    pub label: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub tag: Option<String>,
    pub count: u64,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.is_empty()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<ReportRow>", try_from = "Vec<ReportRow>")]
pub struct SegmentLabelReport {
    labels: BTreeMap<(Segment, String), u64>,
    tags: BTreeMap<(Segment, String, String), u64>,
}

impl SegmentLabelReport {
    pub fn label_count(&self, segment: Segment, label: &str) -> u64 {
        self.labels.get(&(segment, label.to_string())).copied().unwrap_or(0)
    }

    pub fn tag_count(&self, segment: Segment, label: &str, tag: &str) -> u64 {
        self.tags
            .get(&(segment, label.to_string(), tag.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Tag counts of one label within a segment. Labels absent from the
    /// rubric are rejected; labels simply unused give an empty map.
    pub fn tag_distribution(
        &self,
        rubric: &Rubric,
        label: &str,
        segment: Segment,
    ) -> Result<BTreeMap<String, u64>, ReportError> {
        if rubric.label(label).is_none() {
            return Err(ReportError::UnknownLabel(label.to_string()));
        }
        Ok(self
            .tags
            .iter()
            .filter(|((s, l, _), _)| *s == segment && l == label)
            .map(|((_, _, t), &c)| (t.clone(), c))
            .collect())
    }

    /// Rows ordered by segment, then label, with each label total followed by its tags.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        for ((segment, label), &count) in &self.labels {
            out.push(ReportRow { segment: *segment, label: label.clone(), tag: None, count });
            for ((_, _, tag), &count) in self
                .tags
                .range((*segment, label.clone(), String::new())..)
                .take_while(|((s, l, _), _)| s == segment && l == label)
            {
                out.push(ReportRow { segment: *segment, label: label.clone(), tag: Some(tag.clone()), count });
            }
        }
        out
    }

    pub fn from_rows(rows: Vec<ReportRow>) -> Result<Self, ReportError> {
        let mut report = SegmentLabelReport::default();
        for row in rows {
            let dup = match row.tag {
                None => report.labels.insert((row.segment, row.label.clone()), row.count),
                Some(tag) => report.tags.insert((row.segment, row.label.clone(), tag), row.count),
            };
            if dup.is_some() {
                return Err(ReportError::Inconsistent(format!("repeated row for {}/{}", row.segment, row.label)));
            }
        }
        for ((segment, label), &count) in &report.labels {
            let sum: u64 = report
                .tags
                .iter()
                .filter(|((s, l, _), _)| s == segment && l == label)
                .map(|(_, c)| c)
                .sum();
            if sum != count {
                return Err(ReportError::Inconsistent(format!("{segment}/{label}: tags sum to {sum}, label says {count}")));
            }
        }
        if let Some((s, l, _)) = report.tags.keys().find(|(s, l, _)| !report.labels.contains_key(&(*s, l.clone()))) {
            return Err(ReportError::Inconsistent(format!("tag row without label total for {s}/{l}")));
        }
        Ok(report)
    }
}

impl From<SegmentLabelReport> for Vec<ReportRow> {
    fn from(r: SegmentLabelReport) -> Self {
        r.rows()
    }
}

impl TryFrom<Vec<ReportRow>> for SegmentLabelReport {
    type Error = ReportError;

    fn try_from(rows: Vec<ReportRow>) -> Result<Self, Self::Error> {
        SegmentLabelReport::from_rows(rows)
    }
}

fn boundaries_for<'a>(
    boundaries: &'a BTreeMap<String, SegmentBoundaries>,
    match_id: &str,
) -> Result<&'a SegmentBoundaries, ReportError> {
    boundaries
        .get(match_id)
        .ok_or_else(|| ReportError::MissingBoundaries(match_id.to_string()))
}

/// Count applications by the segment holding their interval midpoint.
pub fn label_counts_by_segment(
    apps: &[LabelApplication],
    boundaries: &BTreeMap<String, SegmentBoundaries>,
) -> Result<SegmentLabelReport, ReportError> {
    let mut report = SegmentLabelReport::default();
    for app in apps {
        let seg = boundaries_for(boundaries, &app.match_id)?.segment_of(app.midpoint());
        *report.labels.entry((seg, app.label.clone())).or_default() += 1;
        *report.tags.entry((seg, app.label.clone(), app.tag.clone())).or_default() += 1;
    }
    Ok(report)
}

/// Number of `first` applications followed, on the same match and player,
/// by a `second` application starting no more than `max_gap_s` after the
/// first one ends. Each `first` counts at most once.
pub fn followup_counts(
    apps: &[LabelApplication],
    first: (&str, &str),
    second: (&str, &str),
    max_gap_s: f64,
) -> u64 {
    followup_summary(apps, first, second, max_gap_s, |_| true).followed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowupSummary {
    /// `first` applications that passed the filter.
    pub considered: u64,
    pub followed: u64,
}

pub fn followup_summary(
    apps: &[LabelApplication],
    first: (&str, &str),
    second: (&str, &str),
    max_gap_s: f64,
    filter: impl Fn(&LabelApplication) -> bool,
) -> FollowupSummary {
    let is = |a: &LabelApplication, (l, t): (&str, &str)| a.label == l && a.tag == t;
    let mut summary = FollowupSummary { considered: 0, followed: 0 };
    for f in apps.iter().filter(|a| is(a, first) && filter(a)) {
        summary.considered += 1;
        let followed = apps.iter().any(|s| {
            let gap = s.start_s - f.end_s;
            is(s, second) && s.match_id == f.match_id && s.player_id == f.player_id && (0.0..=max_gap_s).contains(&gap)
        });
        if followed {
            summary.followed += 1;
        }
    }
    summary
}

/// Whether the labelled player died inside the application's interval.
pub fn player_died_during(m: &MatchLog, app: &LabelApplication) -> bool {
    m.match_id == app.match_id
        && m.events.iter().any(|e| {
            matches!(&e.kind, EventKind::Death { player } if player.as_str() == app.player_id) && app.covers(e.time_s)
        })
}

/// Follow-ups restricted to `first` applications during which the player died.
pub fn death_followups(
    apps: &[LabelApplication],
    matches: &[MatchLog],
    first: (&str, &str),
    second: (&str, &str),
    max_gap_s: f64,
) -> FollowupSummary {
    followup_summary(apps, first, second, max_gap_s, |a| matches.iter().any(|m| player_died_during(m, a)))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFrequency {
    pub counts: BTreeMap<Segment, BTreeMap<BehaviorState, u64>>,
}

impl StateFrequency {
    pub fn get(&self, segment: Segment, state: BehaviorState) -> u64 {
        self.counts.get(&segment).and_then(|m| m.get(&state)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|m| m.values()).sum()
    }
}

/// Tick histogram per segment. Sequences that already carry a segment are
/// counted there; others are split with their match's boundaries.
pub fn state_frequency_by_segment(
    corpus: &[StateSequence],
    boundaries: &BTreeMap<String, SegmentBoundaries>,
) -> Result<StateFrequency, ReportError> {
    let mut freq = StateFrequency::default();
    for seq in corpus {
        let bounds = match seq.segment {
            Some(_) => None,
            None => Some(boundaries_for(boundaries, &seq.match_id)?),
        };
        for &(t, state) in &seq.entries {
            let seg = seq.segment.unwrap_or_else(|| bounds.expect("looked up above").segment_of(t));
            *freq.counts.entry(seg).or_default().entry(state).or_default() += 1;
        }
    }
    Ok(freq)
}

pub fn export_csv(report: &SegmentLabelReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["segment", "label", "tag", "count"]).expect("write to memory");
    for row in report.rows() {
        let count = row.count.to_string();
        w.write_record([row.segment.name(), &row.label, row.tag.as_deref().unwrap_or(""), &count])
            .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn parse_csv(bytes: &[u8]) -> Result<SegmentLabelReport, ReportError> {
    let mut r = csv::Reader::from_reader(bytes);
    let rows = r.deserialize().collect::<Result<Vec<ReportRow>, _>>()?;
    SegmentLabelReport::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn app(player: &str, start: f64, end: f64, label: &str, tag: &str) -> LabelApplication {
        LabelApplication {
            application_id: String::new(),
            annotator_id: "a".into(),
            match_id: "m".into(),
            player_id: player.into(),
            start_s: start,
            end_s: end,
            label: label.into(),
            tag: tag.into(),
        }
    }

    fn bounds() -> BTreeMap<String, SegmentBoundaries> {
        let b = SegmentBoundaries { early_end_s: Some(600.0), mid_end_s: Some(1800.0), match_end_s: 2400.0 };
        BTreeMap::from([("m".to_string(), b)])
    }

    #[test]
    fn midpoint_assignment() {
        let apps = vec![
            app("p", 590.0, 620.0, "Team Fighting", "Retaliation"), // midpoint 605
            app("p", 500.0, 520.0, "Team Fighting", "Focus Target"),
            app("q", 1790.0, 1800.0, "Team Recovery", "Push"),
        ];
        let r = label_counts_by_segment(&apps, &bounds()).unwrap();
        assert_eq!(r.label_count(Segment::Early, "Team Fighting"), 1);
        assert_eq!(r.label_count(Segment::Mid, "Team Fighting"), 1);
        assert_eq!(r.tag_count(Segment::Mid, "Team Recovery", "Push"), 1);
        let mut other = apps[0].clone();
        other.match_id = "zzz".into();
        assert!(matches!(label_counts_by_segment(&[other], &bounds()), Err(ReportError::MissingBoundaries(_))));
    }

    #[test]
    fn followups() {
        let apps = vec![
            app("p", 0.0, 10.0, "A", "x"),
            app("p", 25.0, 40.0, "B", "y"),
            app("q", 0.0, 10.0, "A", "x"),
            app("q", 50.0, 60.0, "B", "y"),
        ];
        assert_eq!(followup_counts(&apps, ("A", "x"), ("B", "y"), 30.0), 1);
        assert_eq!(followup_counts(&apps, ("A", "x"), ("B", "y"), 40.0), 2);
        assert_eq!(followup_counts(&apps, ("A", "x"), ("B", "y"), 10.0), 0);
        assert_eq!(followup_counts(&[], ("A", "x"), ("B", "y"), 30.0), 0);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        assert_eq!(export_csv(&SegmentLabelReport::default()), b"segment,label,tag,count\n");
        let apps = vec![
            app("p", 0.0, 10.0, "Team Fighting", "Focus Target"),
            app("q", 0.0, 10.0, "Team Fighting", "Retaliation"),
            app("r", 0.0, 10.0, "Team, \"Odd\"", "t"),
        ];
        let r = label_counts_by_segment(&apps, &bounds()).unwrap();
        let text = String::from_utf8(export_csv(&r)).unwrap();
        assert!(text.contains("early,Team Fighting,,2\n"));
        assert!(text.contains("\"Team, \"\"Odd\"\"\""));
        assert_eq!(parse_csv(text.as_bytes()).unwrap(), r);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SegmentLabelReport>(&json).unwrap(), r);
    }

    #[test]
    fn inconsistent_rows_rejected() {
        let bad = "segment,label,tag,count\nearly,A,,2\nearly,A,x,1\n";
        assert!(matches!(parse_csv(bad.as_bytes()), Err(ReportError::Inconsistent(_))));
    }

    #[test]
    fn state_frequency_conserves_ticks() {
        let seq = StateSequence {
            match_id: "m".into(),
            player_id: "p".into(),
            segment: None,
            entries: (0..2400).map(|t| (t as f64, BehaviorState::Solo)).collect(),
        };
        let f = state_frequency_by_segment(std::slice::from_ref(&seq), &bounds()).unwrap();
        assert_eq!(f.total(), 2400);
        assert_eq!(f.get(Segment::Early, BehaviorState::Solo), 600);
        assert_eq!(f.get(Segment::Late, BehaviorState::Solo), 600);
    }
}

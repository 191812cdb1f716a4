//! Rubric, label applications, inter-rater reliability and the annotation store.

mod kappa;
mod store;

pub use kappa::{cohen_kappa, irr_report, Agreement, ConfusionMatrix, KappaError, KappaReport, LabelAgreement};
pub use store::{replay as replay_log, AnnotationStore, LoadReport, LogOp, LogRecord, Snapshot, StoreError, StoredApplication};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricTag {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricLabel {
    pub name: String,
    pub tags: Vec<RubricTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRubricJson")]
pub struct Rubric {
    labels: Vec<RubricLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RubricError {
    #[error("label `{0}` defined more than once")]
    DuplicateLabel(String),
    #[error("tag `{tag}` defined more than once under `{label}`")]
    DuplicateTag { label: String, tag: String },
    #[error("malformed rubric: {0}")]
    Malformed(String),
}

// File layout: [[label]] name = ..., with nested [[label.tag]] entries.
#[derive(Deserialize)]
struct RawRubricToml {
    #[serde(default)]
    label: Vec<RawLabelToml>,
}

#[derive(Deserialize)]
struct RawLabelToml {
    name: String,
    #[serde(default)]
    tag: Vec<RubricTag>,
}

#[derive(Deserialize)]
struct RawRubricJson {
    labels: Vec<RubricLabel>,
}

impl TryFrom<RawRubricJson> for Rubric {
    type Error = RubricError;

    fn try_from(raw: RawRubricJson) -> Result<Self, Self::Error> {
        Rubric::new(raw.labels)
    }
}

impl Rubric {
    pub fn new(labels: Vec<RubricLabel>) -> Result<Self, RubricError> {
        let mut seen = HashSet::new();
        for label in &labels {
            if label.name.trim().is_empty() {
                return Err(RubricError::Malformed("empty label name".into()));
            }
            if !seen.insert(label.name.as_str()) {
                return Err(RubricError::DuplicateLabel(label.name.clone()));
            }
            let mut tags = HashSet::new();
            for tag in &label.tags {
                if tag.name.trim().is_empty() {
                    return Err(RubricError::Malformed(format!("empty tag name under `{}`", label.name)));
                }
                if !tags.insert(tag.name.as_str()) {
                    return Err(RubricError::DuplicateTag { label: label.name.clone(), tag: tag.name.clone() });
                }
            }
        }
        Ok(Rubric { labels })
    }

    pub fn labels(&self) -> &[RubricLabel] {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&RubricLabel> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn contains(&self, label: &str, tag: &str) -> bool {
        self.label(label).is_some_and(|l| l.tags.iter().any(|t| t.name == tag))
    }

    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for (i, label) in self.labels.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("[[label]]\nname = {}\n", toml_str(&label.name)));
            for tag in &label.tags {
                out.push_str(&format!(
                    "\n[[label.tag]]\nname = {}\ndescription = {}\n",
                    toml_str(&tag.name),
                    toml_str(&tag.description)
                ));
            }
        }
        out
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

pub fn load_rubric(raw: &str) -> Result<Rubric, RubricError> {
    let parsed: RawRubricToml = toml::from_str(raw).map_err(|e| RubricError::Malformed(e.message().to_string()))?;
    Rubric::new(
        parsed
            .label
            .into_iter()
            .map(|l| RubricLabel { name: l.name, tags: l.tag })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelApplication {
    #[serde(default)]
    pub application_id: String,
    pub annotator_id: String,
    pub match_id: String,
    pub player_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub tag: String,
}

impl LabelApplication {
    pub fn midpoint(&self) -> f64 {
        (self.start_s + self.end_s) / 2.0
    }

    /// Half-open intervals overlap.
    pub fn overlaps(&self, other: &LabelApplication) -> bool {
        self.match_id == other.match_id
            && self.player_id == other.player_id
            && self.start_s < other.end_s
            && other.start_s < self.end_s
    }

    pub fn covers(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }

    pub fn category(&self) -> Category {
        Category::Tag { label: self.label.clone(), tag: self.tag.clone() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub annotator_id: String,
    pub applications: Vec<LabelApplication>,
}

impl AnnotationSet {
    pub fn new(annotator_id: impl Into<String>) -> Self {
        AnnotationSet { annotator_id: annotator_id.into(), applications: Vec::new() }
    }

    /// Applications of one annotator out of a mixed list.
    pub fn from_applications<'a>(annotator_id: &str, apps: impl IntoIterator<Item = &'a LabelApplication>) -> Self {
        AnnotationSet {
            annotator_id: annotator_id.to_string(),
            applications: apps.into_iter().filter(|a| a.annotator_id == annotator_id).cloned().collect(),
        }
    }

    /// Every pair of overlapping applications, by index.
    pub fn overlapping_pairs(&self) -> Vec<(usize, usize)> {
        let apps = &self.applications;
        let mut out = Vec::new();
        for i in 0..apps.len() {
            for j in i + 1..apps.len() {
                if apps[i].overlaps(&apps[j]) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    #[error("`{label}/{tag}` is not in the rubric")]
    UnknownLabelTag { label: String, tag: String },
    #[error("interval [{start_s}, {end_s}) is empty or not finite")]
    InvertedInterval { start_s: f64, end_s: f64 },
    #[error("overlaps existing application {existing_id}")]
    Overlap { existing_id: String },
    #[error("application belongs to annotator `{found}`, set is `{expected}`")]
    AnnotatorMismatch { expected: String, found: String },
}

pub fn validate_application(
    rubric: &Rubric,
    existing: &AnnotationSet,
    app: &LabelApplication,
) -> Result<(), Violation> {
    if !rubric.contains(&app.label, &app.tag) {
        return Err(Violation::UnknownLabelTag { label: app.label.clone(), tag: app.tag.clone() });
    }
    if !(app.start_s.is_finite() && app.end_s.is_finite() && app.start_s < app.end_s) {
        return Err(Violation::InvertedInterval { start_s: app.start_s, end_s: app.end_s });
    }
    if app.annotator_id != existing.annotator_id {
        return Err(Violation::AnnotatorMismatch {
            expected: existing.annotator_id.clone(),
            found: app.annotator_id.clone(),
        });
    }
    if let Some(other) = existing.applications.iter().find(|e| e.overlaps(app)) {
        return Err(Violation::Overlap { existing_id: other.application_id.clone() });
    }
    Ok(())
}

/// A window's category: the label/tag covering its midpoint, or nothing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    None,
    Tag { label: String, tag: String },
}

impl Category {
    pub fn tag(label: &str, tag: &str) -> Self {
        Category::Tag { label: label.into(), tag: tag.into() }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Category::None => None,
            Category::Tag { label, .. } => Some(label),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::None => f.write_str("None"),
            Category::Tag { label, tag } => write!(f, "{label}/{tag}"),
        }
    }
}

/// Number of windows of width `window_s` covering `[start, end)`; the last
/// one may be short.
pub fn window_count(horizon: (f64, f64), window_s: f64) -> usize {
    let span = horizon.1 - horizon.0;
    if span <= 0.0 {
        return 0;
    }
    ((span / window_s) - 1e-9).ceil().max(1.0) as usize
}

/// Cut the horizon into windows and categorise each by its midpoint.
pub fn discretize(
    set: &AnnotationSet,
    match_id: &str,
    player_id: &str,
    horizon: (f64, f64),
    window_s: f64,
) -> Result<Vec<Category>, KappaError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(KappaError::BadWindow(window_s));
    }
    let mut apps: Vec<&LabelApplication> = set
        .applications
        .iter()
        .filter(|a| a.match_id == match_id && a.player_id == player_id)
        .collect();
    apps.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let n = window_count(horizon, window_s);
    Ok((0..n)
        .map(|i| {
            let lo = horizon.0 + i as f64 * window_s;
            let hi = (horizon.0 + (i + 1) as f64 * window_s).min(horizon.1);
            let mid = (lo + hi) / 2.0;
            // last application starting at or before the midpoint
            let idx = apps.partition_point(|a| a.start_s <= mid);
            match idx.checked_sub(1).map(|k| apps[k]) {
                Some(a) if a.covers(mid) => a.category(),
                _ => Category::None,
            }
        })
        .collect())
}

pub fn applications_from_jsonl(text: &str) -> Result<Vec<LabelApplication>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

pub fn applications_to_jsonl(apps: &[LabelApplication]) -> String {
    apps.iter()
        .map(|a| serde_json::to_string(a).expect("application serializes") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FINAL: &str = include_str!("../../fixtures/rubric_final.toml");
    const ITER1: &str = include_str!("../../fixtures/rubric_iter1.toml");

    pub(crate) fn app(id: &str, player: &str, start: f64, end: f64, label: &str, tag: &str) -> LabelApplication {
        LabelApplication {
            application_id: id.into(),
            annotator_id: "ann".into(),
            match_id: "m".into(),
            player_id: player.into(),
            start_s: start,
            end_s: end,
            label: label.into(),
            tag: tag.into(),
        }
    }

    fn names(r: &Rubric) -> Vec<(String, Vec<String>)> {
        r.labels()
            .iter()
            .map(|l| (l.name.clone(), l.tags.iter().map(|t| t.name.clone()).collect()))
            .collect()
    }

    #[test]
    fn bundled_rubrics() {
        let r = load_rubric(FINAL).unwrap();
        let expect = |xs: &[(&str, &[&str])]| -> Vec<(String, Vec<String>)> {
            xs.iter()
                .map(|(l, ts)| (l.to_string(), ts.iter().map(|t| t.to_string()).collect()))
                .collect()
        };
        assert_eq!(
            names(&r),
            expect(&[
                ("Team Fighting", &["Objective Struggle", "Retaliation", "Focus Target"]),
                ("Solo Recovery", &["Farming", "Scout", "Push"]),
                ("Team Recovery", &["Push", "Objective Struggle", "Assist"]),
            ])
        );
        let r1 = load_rubric(ITER1).unwrap();
        assert_eq!(r1.labels().len(), 4);
        assert_eq!(names(&r1)[1], expect(&[("Assist", &["Scout", "Vanguard", "Rearguard", "Babysitter"])])[0]);
        assert_eq!(
            r1.label("Assist").unwrap().tags[3].description,
            "The player \"babysits\" players, providing heals and shields"
        );
    }

    #[test]
    fn rubric_errors() {
        let dup = "[[label]]\nname = \"Team Fighting\"\n[[label]]\nname = \"Team Fighting\"\n";
        assert_eq!(load_rubric(dup).unwrap_err(), RubricError::DuplicateLabel("Team Fighting".into()));
        let dup_tag = "[[label]]\nname = \"A\"\n[[label.tag]]\nname = \"x\"\n[[label.tag]]\nname = \"x\"\n";
        assert!(matches!(load_rubric(dup_tag), Err(RubricError::DuplicateTag { .. })));
        assert!(matches!(load_rubric("[[label]"), Err(RubricError::Malformed(_))));
    }

    #[test]
    fn rubric_toml_and_json_round_trip() {
        let r = load_rubric(FINAL).unwrap();
        assert_eq!(load_rubric(&r.to_toml()).unwrap(), r);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<Rubric>(&json).unwrap(), r);
        let bad = r#"{"labels":[{"name":"A","tags":[]},{"name":"A","tags":[]}]}"#;
        assert!(serde_json::from_str::<Rubric>(bad).is_err());
    }

    #[test]
    fn validation() {
        let r = load_rubric(FINAL).unwrap();
        let mut set = AnnotationSet::new("ann");
        let ok = app("a1", "p", 100.0, 200.0, "Team Fighting", "Focus Target");
        assert_eq!(validate_application(&r, &set, &ok), Ok(()));
        set.applications.push(ok);

        let bad_pair = app("a2", "p", 300.0, 400.0, "Team Fighting", "Farming");
        assert!(matches!(validate_application(&r, &set, &bad_pair), Err(Violation::UnknownLabelTag { .. })));

        let overlapping = app("a3", "p", 150.0, 250.0, "Team Fighting", "Retaliation");
        assert_eq!(
            validate_application(&r, &set, &overlapping),
            Err(Violation::Overlap { existing_id: "a1".into() })
        );
        // touching intervals and other players are fine
        assert!(validate_application(&r, &set, &app("a4", "p", 200.0, 250.0, "Team Fighting", "Retaliation")).is_ok());
        assert!(validate_application(&r, &set, &app("a5", "q", 150.0, 250.0, "Team Fighting", "Retaliation")).is_ok());

        let inverted = app("a6", "p", 500.0, 500.0, "Team Fighting", "Retaliation");
        assert!(matches!(validate_application(&r, &set, &inverted), Err(Violation::InvertedInterval { .. })));
    }

    #[test]
    fn discretize_examples() {
        let mut set = AnnotationSet::new("ann");
        set.applications.push(app("a", "p", 0.0, 10.0, "Team Fighting", "Retaliation"));
        let tf = Category::tag("Team Fighting", "Retaliation");
        let cats = discretize(&set, "m", "p", (0.0, 20.0), 5.0).unwrap();
        assert_eq!(cats, vec![tf.clone(), tf, Category::None, Category::None]);

        let empty = discretize(&AnnotationSet::new("ann"), "m", "p", (0.0, 20.0), 5.0).unwrap();
        assert!(empty.iter().all(|c| *c == Category::None));

        // midpoint 12.5 sits exactly on end_s and is excluded
        let mut set = AnnotationSet::new("ann");
        set.applications.push(app("a", "p", 7.5, 12.5, "Team Fighting", "Retaliation"));
        let cats = discretize(&set, "m", "p", (0.0, 20.0), 5.0).unwrap();
        assert_eq!(cats[1], Category::tag("Team Fighting", "Retaliation"));
        assert_eq!(cats[2], Category::None);

        // short last window
        assert_eq!(discretize(&set, "m", "p", (0.0, 21.0), 5.0).unwrap().len(), 5);
        assert!(discretize(&set, "m", "p", (0.0, 21.0), 0.0).is_err());
    }

    #[test]
    fn category_order_and_display() {
        assert!(Category::None < Category::tag("A", "b"));
        assert_eq!(Category::tag("Team Fighting", "Push").to_string(), "Team Fighting/Push");
    }

    #[test]
    fn jsonl_round_trip() {
        let apps = vec![app("a", "p", 0.0, 10.0, "L", "T"), app("b", "q", 1.5, 2.5, "L", "U")];
        let text = applications_to_jsonl(&apps);
        assert_eq!(applications_from_jsonl(&text).unwrap(), apps);
        assert_eq!(applications_from_jsonl("{}\n").unwrap_err().0, 1);
    }
}

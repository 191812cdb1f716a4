use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{discretize, AnnotationSet, Category, Rubric};
use crate::telemetry::MatchLog;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KappaError {
    #[error("rating vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no ratings to compare")]
    Empty,
    #[error("window must be positive, got {0}")]
    BadWindow(f64),
    #[error("application references unknown match `{0}`")]
    UnknownMatch(String),
}

/// Square contingency table; rows are rater A, columns rater B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_ratings<T: Ord + Clone + ToString>(a: &[T], b: &[T]) -> Result<Self, KappaError> {
        if a.len() != b.len() {
            return Err(KappaError::LengthMismatch(a.len(), b.len()));
        }
        if a.is_empty() {
            return Err(KappaError::Empty);
        }
        let mut cats: Vec<T> = a.iter().chain(b).cloned().collect();
        cats.sort();
        cats.dedup();
        let k = cats.len();
        let pos = |x: &T| cats.binary_search(x).expect("category collected");
        let mut counts = vec![vec![0u64; k]; k];
        for (x, y) in a.iter().zip(b) {
            counts[pos(x)][pos(y)] += 1;
        }
        Ok(ConfusionMatrix { categories: cats.iter().map(|c| c.to_string()).collect(), counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.categories.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Agreement statistics. Everything is accumulated in integers and divided
    /// once, so recomputing from a stored table is bit-identical.
    pub fn agreement(&self) -> Result<Agreement, KappaError> {
        let n = self.total() as u128;
        if n == 0 {
            return Err(KappaError::Empty);
        }
        let diag: u128 = (0..self.categories.len()).map(|i| self.counts[i][i] as u128).sum();
        let pe_num: u128 = self
            .row_sums()
            .iter()
            .zip(self.col_sums())
            .map(|(&r, c)| r as u128 * c as u128)
            .sum();
        let nn = n * n;
        let p_o = diag as f64 / n as f64;
        let p_e = pe_num as f64 / nn as f64;
        if pe_num == nn {
            let kappa = if diag == n { 1.0 } else { 0.0 };
            return Ok(Agreement { kappa, p_o, p_e, degenerate: true });
        }
        let po_num = diag * n;
        let kappa = (po_num as i128 - pe_num as i128) as f64 / (nn - pe_num) as f64;
        Ok(Agreement { kappa, p_o, p_e, degenerate: false })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub kappa: f64,
    pub p_o: f64,
    pub p_e: f64,
    /// Expected agreement is 1, so the ratio is 0/0 and `kappa` is by convention.
    pub degenerate: bool,
}

pub fn cohen_kappa<T: Ord + Clone + ToString>(a: &[T], b: &[T]) -> Result<Agreement, KappaError> {
    ConfusionMatrix::from_ratings(a, b)?.agreement()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAgreement {
    #[serde(flatten)]
    pub agreement: Agreement,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub window_s: f64,
    pub n_windows: u64,
    pub overall_kappa: f64,
    pub p_o: f64,
    pub p_e: f64,
    pub degenerate: bool,
    pub confusion: ConfusionMatrix,
    pub per_label_kappa: BTreeMap<String, f64>,
    pub per_label: BTreeMap<String, LabelAgreement>,
}

/// Windowed agreement between two annotators over every player of every
/// match, in match-id order and header player order.
pub fn irr_report(
    a: &AnnotationSet,
    b: &AnnotationSet,
    matches: &[MatchLog],
    window_s: f64,
    rubric: &Rubric,
) -> Result<KappaReport, KappaError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(KappaError::BadWindow(window_s));
    }
    let mut ordered: Vec<&MatchLog> = matches.iter().collect();
    ordered.sort_by(|x, y| x.match_id.cmp(&y.match_id));
    for app in a.applications.iter().chain(&b.applications) {
        if !ordered.iter().any(|m| m.match_id == app.match_id) {
            return Err(KappaError::UnknownMatch(app.match_id.clone()));
        }
    }

    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    for m in ordered {
        let horizon = (0.0, m.match_end_s());
        for p in &m.players {
            ra.extend(discretize(a, &m.match_id, p.player_id.as_str(), horizon, window_s)?);
            rb.extend(discretize(b, &m.match_id, p.player_id.as_str(), horizon, window_s)?);
        }
    }

    let confusion = ConfusionMatrix::from_ratings(&ra, &rb)?;
    let overall = confusion.agreement()?;
    let mut per_label = BTreeMap::new();
    for label in rubric.labels() {
        let is = |c: &Category| c.label() == Some(label.name.as_str());
        let bin_a: Vec<&str> = ra.iter().map(|c| if is(c) { "L" } else { "not L" }).collect();
        let bin_b: Vec<&str> = rb.iter().map(|c| if is(c) { "L" } else { "not L" }).collect();
        let confusion = ConfusionMatrix::from_ratings(&bin_a, &bin_b)?;
        let agreement = confusion.agreement()?;
        per_label.insert(label.name.clone(), LabelAgreement { agreement, confusion });
    }
    Ok(KappaReport {
        window_s,
        n_windows: ra.len() as u64,
        overall_kappa: overall.kappa,
        p_o: overall.p_o,
        p_e: overall.p_e,
        degenerate: overall.degenerate,
        confusion,
        per_label_kappa: per_label.iter().map(|(k, v)| (k.clone(), v.agreement.kappa)).collect(),
        per_label,
    })
}

//! `seqlab` Python module: match parsing, abstraction, mining, DTW and
//! agreement statistics over plain Python values.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use seqlab_core::abstraction::{abstract_match, compress_dss};
use seqlab_core::annotation::{applications_from_jsonl, load_rubric, AnnotationSet, LabelApplication};
use seqlab_core::dtw::{dtw_patterns, mds_embed, pairwise_distances, DistanceMatrix, DtwOptions, StateCostMatrix};
use seqlab_core::report::{export_csv, label_counts_by_segment};
use seqlab_core::segmentation::{find_boundaries, split_sequence};
use seqlab_core::seqmine::{mine_ngrams, top_frequent_sequences, NgramParams, SequenceCorpus};
use seqlab_core::synth::{generate_synthetic_match, SynthConfig};
use seqlab_core::telemetry::{parse_match_log, to_jsonl, MatchLog, PlayerId};
use seqlab_core::{fixtures, BehaviorState, DssSequence, ProximityConfig, Segment, StateSequence};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn states(names: &[String]) -> PyResult<Vec<BehaviorState>> {
    names.iter().map(|n| n.parse::<BehaviorState>().map_err(value_err)).collect()
}

fn names(states: &[BehaviorState]) -> Vec<String> {
    states.iter().map(|s| s.name().to_string()).collect()
}

/// Treat each list as one tick per entry and run-compress it.
fn to_dss(i: usize, ticks: &[BehaviorState]) -> DssSequence {
    compress_dss(&StateSequence {
        match_id: "py".into(),
        player_id: PlayerId::new(format!("s{i}")),
        segment: None,
        entries: ticks.iter().enumerate().map(|(t, &s)| (t as f64, s)).collect(),
    })
}

fn corpus(seqs: &[Vec<String>]) -> PyResult<SequenceCorpus> {
    let dss = seqs.iter().enumerate().map(|(i, s)| Ok(to_dss(i, &states(s)?))).collect::<PyResult<Vec<_>>>()?;
    SequenceCorpus::new(None, dss).map_err(value_err)
}

fn parse_apps(jsonl: &str) -> PyResult<Vec<LabelApplication>> {
    applications_from_jsonl(jsonl).map_err(|(line, e)| value_err(format!("line {line}: {e}")))
}

#[pyclass(name = "Match", module = "seqlab", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyMatch {
    log: MatchLog,
}

#[pymethods]
impl PyMatch {
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        Ok(PyMatch { log: parse_match_log(text.as_bytes()).map_err(value_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, duration_s=None))]
    fn synthetic(seed: u64, duration_s: Option<f64>) -> PyResult<Self> {
        let mut cfg = SynthConfig::default();
        if let Some(d) = duration_s {
            cfg.duration_s = d;
        }
        Ok(PyMatch { log: generate_synthetic_match(&cfg, seed).map_err(value_err)? })
    }

    /// The bundled hand-checked match.
    #[staticmethod]
    fn bundled() -> Self {
        PyMatch { log: fixtures::paper_match() }
    }

    #[getter]
    fn match_id(&self) -> &str {
        &self.log.match_id
    }

    #[getter]
    fn player_ids(&self) -> Vec<String> {
        self.log.players.iter().map(|p| p.player_id.to_string()).collect()
    }

    #[getter]
    fn end_s(&self) -> f64 {
        self.log.match_end_s()
    }

    /// `(early_end_s, mid_end_s, match_end_s)`; missing boundaries are `None`.
    fn boundaries(&self) -> (Option<f64>, Option<f64>, f64) {
        let b = find_boundaries(&self.log);
        (b.early_end_s, b.mid_end_s, b.match_end_s)
    }

    fn to_jsonl(&self) -> String {
        to_jsonl(&self.log)
    }

    /// Per player, the `(time, state)` entries, optionally cut to one segment.
    #[pyo3(signature = (radius=81.92, segment=None))]
    fn states(&self, radius: f64, segment: Option<&str>) -> PyResult<BTreeMap<String, Vec<(f64, String)>>> {
        let seqs = abstract_match(&self.log, &ProximityConfig::with_radius(radius)).map_err(value_err)?;
        let seg = segment.map(|s| s.parse::<Segment>().map_err(value_err)).transpose()?;
        let b = find_boundaries(&self.log);
        Ok(seqs
            .into_iter()
            .map(|s| {
                let s = match seg {
                    Some(seg) => split_sequence(&s, &b).remove(&seg).unwrap_or(s),
                    None => s,
                };
                let entries = s.entries.iter().map(|&(t, st)| (t, st.name().to_string())).collect();
                (s.player_id.to_string(), entries)
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Match({:?}, players={}, end_s={})", self.log.match_id, self.log.players.len(), self.log.match_end_s())
    }
}

#[pyfunction]
fn cohen_kappa(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    Ok(seqlab_core::annotation::cohen_kappa(&a, &b).map_err(value_err)?.kappa)
}

/// Windowed agreement between two annotation files (application JSONL).
#[pyfunction]
#[pyo3(signature = (a_jsonl, b_jsonl, matches, window_s=5.0, rubric_toml=None))]
fn irr(
    a_jsonl: &str,
    b_jsonl: &str,
    matches: Vec<PyMatch>,
    window_s: f64,
    rubric_toml: Option<&str>,
) -> PyResult<(f64, u64, BTreeMap<String, f64>)> {
    let rubric = match rubric_toml {
        Some(t) => load_rubric(t).map_err(value_err)?,
        None => fixtures::rubric_final(),
    };
    let set = |text: &str| -> PyResult<AnnotationSet> {
        let apps = parse_apps(text)?;
        let who = apps.first().map(|a| a.annotator_id.clone()).unwrap_or_default();
        Ok(AnnotationSet { annotator_id: who, applications: apps })
    };
    let logs: Vec<MatchLog> = matches.into_iter().map(|m| m.log).collect();
    let r = seqlab_core::annotation::irr_report(&set(a_jsonl)?, &set(b_jsonl)?, &logs, window_s, &rubric)
        .map_err(value_err)?;
    Ok((r.overall_kappa, r.n_windows, r.per_label_kappa))
}

#[pyfunction]
#[pyo3(signature = (a, b, normalize=false))]
fn dtw(a: Vec<String>, b: Vec<String>, normalize: bool) -> PyResult<f64> {
    let opts = DtwOptions { normalize, band: None };
    dtw_patterns(&states(&a)?, &states(&b)?, &StateCostMatrix::unit(), opts).map_err(value_err)
}

/// Full DTW distance matrix over run-compressed sequences.
#[pyfunction]
#[pyo3(signature = (sequences, normalize=true))]
fn pairwise_dtw(sequences: Vec<Vec<String>>, normalize: bool) -> PyResult<Vec<Vec<f64>>> {
    let dss = sequences.iter().enumerate().map(|(i, s)| Ok(to_dss(i, &states(s)?))).collect::<PyResult<Vec<_>>>()?;
    let m = pairwise_distances(&dss, &StateCostMatrix::unit(), DtwOptions { normalize, band: None }).map_err(value_err)?;
    Ok(m.d.chunks(m.n).map(<[f64]>::to_vec).collect())
}

#[pyfunction]
fn mds(matrix: Vec<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
    let n = matrix.len();
    if matrix.iter().any(|r| r.len() != n) {
        return Err(value_err("matrix must be square"));
    }
    let m = DistanceMatrix::from_fn((0..n).map(|i| i.to_string()).collect(), |i, j| matrix[i][j]);
    if !m.is_symmetric() || (0..n).any(|i| (0..n).any(|j| m.get(i, j) != matrix[i][j])) {
        return Err(value_err("matrix must be symmetric with a zero diagonal"));
    }
    Ok(mds_embed(&m).map_err(value_err)?.points.iter().map(|p| (p.u, p.v)).collect())
}

#[pyfunction]
fn top_frequent(sequences: Vec<Vec<String>>, k: usize) -> PyResult<Vec<(Vec<String>, usize)>> {
    let t = top_frequent_sequences(&corpus(&sequences)?, k).map_err(value_err)?;
    Ok(t.rows.iter().map(|r| (names(&r.pattern), r.count)).collect())
}

/// Rows of `(ngram, support, sequences, occurrences)`.
#[pyfunction]
#[pyo3(signature = (sequences, min_len=2, max_len=4, min_support=0.1))]
fn ngrams(
    sequences: Vec<Vec<String>>,
    min_len: usize,
    max_len: usize,
    min_support: f64,
) -> PyResult<Vec<(Vec<String>, f64, usize, usize)>> {
    let t = mine_ngrams(&corpus(&sequences)?, NgramParams::new(min_len, max_len, min_support)).map_err(value_err)?;
    Ok(t.rows.iter().map(|r| (names(&r.ngram), r.support, r.sequences, r.occurrences)).collect())
}

/// Label usage per segment as CSV text.
#[pyfunction]
fn label_report_csv(annotations_jsonl: &str, matches: Vec<PyMatch>) -> PyResult<String> {
    let bounds = matches.iter().map(|m| (m.log.match_id.clone(), find_boundaries(&m.log))).collect();
    let report = label_counts_by_segment(&parse_apps(annotations_jsonl)?, &bounds).map_err(value_err)?;
    String::from_utf8(export_csv(&report)).map_err(value_err)
}

#[pymodule]
fn seqlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatch>()?;
    m.add("STATES", BehaviorState::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    m.add("BUNDLED_ANNOTATIONS", fixtures::ANNOTATIONS_PAPER)?;
    m.add("IRR_FIXTURE_A", fixtures::IRR_FIXTURE_A)?;
    m.add("IRR_FIXTURE_B", fixtures::IRR_FIXTURE_B)?;
    m.add_function(wrap_pyfunction!(cohen_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(irr, m)?)?;
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_dtw, m)?)?;
    m.add_function(wrap_pyfunction!(mds, m)?)?;
    m.add_function(wrap_pyfunction!(top_frequent, m)?)?;
    m.add_function(wrap_pyfunction!(ngrams, m)?)?;
    m.add_function(wrap_pyfunction!(label_report_csv, m)?)?;
    Ok(())
}

//! The `seqlab` command line.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use seqlab_core::abstraction::{abstract_match, compress_dss, sequences_from_jsonl, sequences_to_jsonl, StateSequence};
use seqlab_core::annotation::{applications_from_jsonl, load_rubric, replay_log, LabelApplication, Rubric};
use seqlab_core::dtw::Linkage;
use seqlab_core::fixtures::rubric_final;
use seqlab_core::report::export_csv;
use seqlab_core::segmentation::{find_boundaries, split_sequence};
use seqlab_core::seqmine::render_svg;
use seqlab_core::synth::{generate_synthetic_match, SynthConfig};
use seqlab_core::telemetry::{event_counts, parse_match_log, to_jsonl, MatchLog};
use seqlab_core::{ProximityConfig, Segment};

use crate::pipeline::{self, EmbeddingView, MineParams, PipelineError};
use crate::workspace::{Workspace, WorkspaceError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "seqlab", version, about = "Behavior-sequence analysis for match telemetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic match log.
    Synth {
        #[arg(long, default_value_t = 10)]
        players: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Match length in seconds; overrides the config file.
        #[arg(long)]
        duration: Option<f64>,
        /// TOML file with generator settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse and validate a match log.
    Validate { file: PathBuf },
    /// Abstract match logs into per-player state sequences.
    Abstract {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 81.92)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        tick: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find segment boundaries, optionally splitting a sequence file.
    Segment {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sequences of this match to split by segment.
        #[arg(long, requires = "split_out")]
        sequences: Option<PathBuf>,
        #[arg(long)]
        split_out: Option<PathBuf>,
    },
    /// Frequent whole sequences and n-grams of one segment.
    Mine {
        sequences: PathBuf,
        #[arg(long)]
        segment: Option<Segment>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value_t = 2)]
        ngram_min: usize,
        #[arg(long, default_value_t = 4)]
        ngram_max: usize,
        #[arg(long, default_value_t = 0.1)]
        min_support: f64,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// DTW distances, clusters and a planar embedding.
    Dtw {
        sequences: PathBuf,
        #[arg(long)]
        segment: Option<Segment>,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "average")]
        linkage: Linkage,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        embed: Option<PathBuf>,
    },
    /// Windowed Cohen's kappa between two annotators.
    Kappa {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Annotator to take from `--a` when the file holds several.
        #[arg(long)]
        annotator_a: Option<String>,
        #[arg(long)]
        annotator_b: Option<String>,
        /// Directory of `*.jsonl` match logs.
        #[arg(long)]
        matches: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        window: f64,
        /// Defaults to the bundled final rubric.
        #[arg(long)]
        rubric: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label counts and state frequencies by segment.
    Report {
        #[arg(long)]
        annotations: PathBuf,
        /// Directory of `*.jsonl` match logs.
        #[arg(long)]
        matches: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Add match logs to a workspace.
    Ingest {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the REST service.
    Serve {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory of front-end assets served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    write(path, text)
}

fn input_err(path: &Path, message: impl ToString) -> CliError {
    CliError::Input { path: path.to_path_buf(), message: message.to_string() }
}

pub fn load_match(path: &Path) -> Result<MatchLog, CliError> {
    parse_match_log(&read(path)?).map_err(|e| input_err(path, e))
}

fn load_sequences(path: &Path) -> Result<Vec<StateSequence>, CliError> {
    sequences_from_jsonl(&read_text(path)?).map_err(|e| input_err(path, e))
}

/// Applications from either a plain application file or an annotation log.
pub fn load_annotations(path: &Path) -> Result<Vec<LabelApplication>, CliError> {
    let text = read_text(path)?;
    let is_log = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("tx").is_some() && v.get("op").is_some());
    if is_log {
        let (snap, _) = replay_log(text.as_bytes()).map_err(|e| input_err(path, e))?;
        Ok(snap.applications())
    } else {
        applications_from_jsonl(&text).map_err(|(line, e)| input_err(path, format!("line {line}: {e}")))
    }
}

fn only_annotator(apps: &[LabelApplication], chosen: Option<String>, path: &Path) -> Result<String, CliError> {
    if let Some(a) = chosen {
        return Ok(a);
    }
    let mut ids: Vec<&str> = apps.iter().map(|a| a.annotator_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    match ids.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(input_err(path, "no applications")),
        _ => Err(input_err(path, format!("several annotators ({}); pick one", ids.join(", ")))),
    }
}

fn segment_sequences(seqs: Vec<StateSequence>, segment: Option<Segment>, path: &Path) -> Result<Vec<StateSequence>, CliError> {
    match segment {
        None => Ok(seqs),
        Some(seg) => {
            if seqs.iter().any(|s| s.segment.is_none()) {
                return Err(input_err(path, "sequences carry no segment; split them with `seqlab segment --sequences`"));
            }
            Ok(seqs.into_iter().filter(|s| s.segment == Some(seg)).collect())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { players, seed, out, duration, config } => {
            let mut cfg: SynthConfig = match config {
                Some(p) => toml::from_str(&read_text(&p)?).map_err(|e| input_err(&p, e))?,
                None => SynthConfig::default(),
            };
            cfg.players = players;
            if let Some(d) = duration {
                cfg.duration_s = d;
            }
            let m = generate_synthetic_match(&cfg, seed).map_err(|e| CliError::Usage(e.to_string()))?;
            write(&out, to_jsonl(&m))?;
        }
        Command::Validate { file } => {
            let m = load_match(&file)?;
            let counts: Vec<String> = event_counts(&m).into_iter().map(|(k, n)| format!("{k}={n}")).collect();
            println!("{}: ok, match {}, {} players, {}", file.display(), m.match_id, m.players.len(), counts.join(" "));
        }
        Command::Abstract { files, radius, tick, out } => {
            let cfg = ProximityConfig { radius, tick_interval_s: tick, ..Default::default() };
            let mut all = Vec::new();
            for f in &files {
                let m = load_match(f)?;
                all.extend(abstract_match(&m, &cfg).map_err(PipelineError::from)?);
            }
            write(&out, sequences_to_jsonl(&all))?;
        }
        Command::Segment { file, out, sequences, split_out } => {
            let m = load_match(&file)?;
            let b = find_boundaries(&m);
            write_json(&out, &b)?;
            if let (Some(src), Some(dst)) = (sequences, split_out) {
                let seqs = load_sequences(&src)?;
                let mut parts = Vec::new();
                for s in seqs.iter().filter(|s| s.match_id == m.match_id) {
                    parts.extend(split_sequence(s, &b).into_values());
                }
                write(&dst, sequences_to_jsonl(&parts))?;
            }
        }
        Command::Mine { sequences, segment, top, ngram_min, ngram_max, min_support, svg, out } => {
            let seqs = segment_sequences(load_sequences(&sequences)?, segment, &sequences)?;
            let dss = seqs.iter().map(compress_dss).collect();
            let params = MineParams { top, ngram_min, ngram_max, min_support };
            let result = pipeline::mine(segment, dss, params)?;
            if let Some(svg) = svg {
                write(&svg, render_svg(&result.plot).map_err(PipelineError::from)?)?;
            }
            write_json(&out, &result)?;
        }
        Command::Dtw { sequences, segment, normalize, k, linkage, out, embed } => {
            let seqs = segment_sequences(load_sequences(&sequences)?, segment, &sequences)?;
            let dss: Vec<_> = seqs.iter().map(compress_dss).collect();
            let r = pipeline::dtw_analysis(&dss, k, normalize, linkage)?;
            if let Some(embed) = embed {
                write_json(&embed, &EmbeddingView::new(segment, &r))?;
            }
            write_json(&out, &serde_json::json!({ "distances": r.distances, "clusters": r.clusters }))?;
        }
        Command::Kappa { a, b, annotator_a, annotator_b, matches, window, rubric, out } => {
            let apps_a = load_annotations(&a)?;
            let apps_b = load_annotations(&b)?;
            let id_a = only_annotator(&apps_a, annotator_a, &a)?;
            let id_b = only_annotator(&apps_b, annotator_b, &b)?;
            let rubric: Rubric = match rubric {
                Some(p) => load_rubric(&read_text(&p)?).map_err(|e| input_err(&p, e))?,
                None => rubric_final(),
            };
            let logs = pipeline::load_matches_dir(&matches)?;
            let report = pipeline::irr(&apps_a, &id_a, &apps_b, &id_b, &logs, window, &rubric)?;
            write_json(&out, &report)?;
        }
        Command::Report { annotations, matches, out, csv } => {
            let apps = load_annotations(&annotations)?;
            let logs = pipeline::load_matches_dir(&matches)?;
            let seqs = pipeline::abstract_all(&logs, &ProximityConfig::default())?;
            let report = pipeline::segment_report(&apps, &logs, &seqs)?;
            if let Some(csv) = csv {
                write(&csv, export_csv(&report.labels))?;
            }
            write_json(&out, &report)?;
        }
        Command::Ingest { workspace, files } => {
            let ws = Workspace::open(&workspace)?;
            for f in &files {
                let m = ws.ingest(&read(f)?).map_err(|e| input_err(f, e))?;
                println!("{}: ingested {}", f.display(), m.log.match_id);
            }
        }
        Command::Serve { workspace, port, host, static_dir } => {
            let ws = Arc::new(Workspace::open(&workspace)?);
            let report = ws.load_report();
            if report.truncated_bytes > 0 {
                eprintln!("annotation log: dropped {} bytes of an interrupted write", report.truncated_bytes);
            }
            let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: workspace.clone(), source })?;
            rt.block_on(crate::api::serve(ws, SocketAddr::new(host, port), static_dir))
                .map_err(|source| CliError::Io { path: workspace, source })?;
        }
    }
    Ok(())
}

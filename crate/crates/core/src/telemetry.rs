//! Match-log data model, the line-delimited telemetry format, validation and
//! tick-grid resampling.
//!
//! A log is UTF-8 text with one JSON object per line. The first line is the
//! header; every following line is one event:
//!
//! ```text
//! {"type":"header","match_id":"m1","tick_interval_s":1.0,"map_bounds":{...},"players":[...]}
//! {"type":"pos","t":0.0,"p":"r0","x":120.5,"y":88.0}
//! {"type":"kill","t":31.4,"actor":"r0","victim":"d2"}
//! {"type":"death","t":31.4,"p":"d2"}
//! {"type":"tower","t":600.0,"tier":1,"team":"dire"}
//! {"type":"end","t":2400.0}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack used when matching event times against the tick grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Team {
    Radiant,
    Dire,
}

impl Team {
    pub fn opponent(self) -> Team {
        match self {
            Team::Radiant => Team::Dire,
            Team::Dire => Team::Radiant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Carry,
    Support,
    Initiator,
    Other,
}

/// A point on the map, in map units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapBounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl MapBounds {
    pub fn contains(&self, p: &Position) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerInfo {
    pub player_id: PlayerId,
    pub team: Team,
    pub hero_name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PositionSample { player: PlayerId, position: Position },
    Kill { actor: PlayerId, victim: PlayerId },
    Death { player: PlayerId },
    TowerFall { tier: u8, team: Team },
    MatchEnd,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PositionSample { .. } => "pos",
            EventKind::Kill { .. } => "kill",
            EventKind::Death { .. } => "death",
            EventKind::TowerFall { .. } => "tower",
            EventKind::MatchEnd => "end",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn new(time_s: f64, kind: EventKind) -> Self {
        Event { time_s, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchLog {
    pub match_id: String,
    pub map_bounds: MapBounds,
    pub tick_interval_s: f64,
    pub players: Vec<PlayerInfo>,
    pub events: Vec<Event>,
}

impl MatchLog {
    /// Time of the `MatchEnd` event, or of the last event if there is none.
    pub fn match_end_s(&self) -> f64 {
        self.events
            .iter()
            .rev()
            .find(|e| matches!(e.kind, EventKind::MatchEnd))
            .or_else(|| self.events.last())
            .map_or(0.0, |e| e.time_s)
    }

    pub fn player_index(&self, id: &PlayerId) -> Option<usize> {
        self.players.iter().position(|p| &p.player_id == id)
    }

    pub fn player(&self, id: &PlayerId) -> Option<&PlayerInfo> {
        self.players.iter().find(|p| &p.player_id == id)
    }

    pub fn tower_falls(&self) -> impl Iterator<Item = (f64, u8, Team)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::TowerFall { tier, team } => Some((e.time_s, tier, team)),
            _ => None,
        })
    }

    /// Events with `from <= t <= to`, optionally restricted to the given kind names.
    pub fn events_between(&self, from: f64, to: f64, kinds: Option<&[&str]>) -> Vec<&Event> {
        self.events
            .iter()
            .filter(|e| e.time_s >= from && e.time_s <= to)
            .filter(|e| kinds.is_none_or(|k| k.contains(&e.kind.name())))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("duplicate player id {0}")]
    DuplicatePlayerId(PlayerId),
    #[error("team {team:?} has {count} players, expected 5")]
    TeamSize { team: Team, count: usize },
    #[error("tick_interval_s must be finite and > 0")]
    BadTickInterval,
    #[error("map bounds are empty or not finite")]
    BadMapBounds,
    #[error("event {index} is earlier than its predecessor")]
    UnsortedEvents { index: usize },
    #[error("event {index} references unknown player {player}")]
    UnknownPlayer { index: usize, player: PlayerId },
    #[error("event {index} has a non-finite or negative value")]
    NonFinite { index: usize },
    #[error("event {index}: position outside map bounds")]
    OutOfBounds { index: usize },
    #[error("event {index}: position sample is not on the tick grid")]
    OffGridSample { index: usize },
    #[error("event {index}: kill without a matching death of the victim")]
    KillWithoutDeath { index: usize },
    #[error("event {index}: tower tier must be 1, 2 or 3")]
    BadTowerTier { index: usize },
    #[error("no match end event")]
    MissingMatchEnd,
    #[error("event {index}: match end is not the last event")]
    MatchEndNotLast { index: usize },
    #[error("event {index}: more than one match end event")]
    DuplicateMatchEnd { index: usize },
}

impl Violation {
    /// Name of the schema field the violation is about, used in parse errors.
    pub fn field(&self) -> &'static str {
        match self {
            Violation::DuplicatePlayerId(_) => "player_id",
            Violation::TeamSize { .. } => "players",
            Violation::BadTickInterval => "tick_interval_s",
            Violation::BadMapBounds => "map_bounds",
            Violation::UnsortedEvents { .. } => "t",
            Violation::UnknownPlayer { .. } => "p",
            Violation::NonFinite { .. } => "t",
            Violation::OutOfBounds { .. } => "x",
            Violation::OffGridSample { .. } => "t",
            Violation::KillWithoutDeath { .. } => "victim",
            Violation::BadTowerTier { .. } => "tier",
            Violation::MissingMatchEnd
            | Violation::MatchEndNotLast { .. }
            | Violation::DuplicateMatchEnd { .. } => "end",
        }
    }
}

fn on_grid(t: f64, interval: f64) -> bool {
    let k = t / interval;
    (k - k.round()).abs() <= 1e-6
}

/// Check every match-log invariant. Returns an empty list iff the log is valid.
pub fn validate(m: &MatchLog) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for p in &m.players {
        if !seen.insert(&p.player_id) {
            out.push(Violation::DuplicatePlayerId(p.player_id.clone()));
        }
    }
    for team in [Team::Radiant, Team::Dire] {
        let count = m.players.iter().filter(|p| p.team == team).count();
        if count != 5 {
            out.push(Violation::TeamSize { team, count });
        }
    }
    if !(m.tick_interval_s.is_finite() && m.tick_interval_s > 0.0) {
        out.push(Violation::BadTickInterval);
    }
    let b = &m.map_bounds;
    if ![b.min_x, b.min_y, b.max_x, b.max_y].iter().all(|v| v.is_finite())
        || b.min_x > b.max_x
        || b.min_y > b.max_y
    {
        out.push(Violation::BadMapBounds);
    }

    let known: HashSet<&PlayerId> = m.players.iter().map(|p| &p.player_id).collect();
    let check_player = |index: usize, id: &PlayerId, out: &mut Vec<Violation>| {
        if !known.contains(id) {
            out.push(Violation::UnknownPlayer { index, player: id.clone() });
        }
    };

    // death times per victim, for the kill/death pairing check
    let mut deaths: HashMap<&PlayerId, Vec<f64>> = HashMap::new();
    for e in &m.events {
        if let EventKind::Death { player } = &e.kind {
            deaths.entry(player).or_default().push(e.time_s);
        }
    }

    let grid_ok = m.tick_interval_s.is_finite() && m.tick_interval_s > 0.0;
    let mut end_seen = false;
    for (index, e) in m.events.iter().enumerate() {
        if !(e.time_s.is_finite() && e.time_s >= 0.0) {
            out.push(Violation::NonFinite { index });
        }
        if index > 0 && e.time_s < m.events[index - 1].time_s {
            out.push(Violation::UnsortedEvents { index });
        }
        match &e.kind {
            EventKind::PositionSample { player, position } => {
                check_player(index, player, &mut out);
                if !position.is_finite() {
                    out.push(Violation::NonFinite { index });
                } else if !m.map_bounds.contains(position) {
                    out.push(Violation::OutOfBounds { index });
                }
                if grid_ok && e.time_s.is_finite() && !on_grid(e.time_s, m.tick_interval_s) {
                    out.push(Violation::OffGridSample { index });
                }
            }
            EventKind::Kill { actor, victim } => {
                check_player(index, actor, &mut out);
                check_player(index, victim, &mut out);
                let paired = deaths
                    .get(victim)
                    .is_some_and(|ts| ts.iter().any(|&t| t == e.time_s));
                if !paired {
                    out.push(Violation::KillWithoutDeath { index });
                }
            }
            EventKind::Death { player } => check_player(index, player, &mut out),
            EventKind::TowerFall { tier, .. } => {
                if !(1..=3).contains(tier) {
                    out.push(Violation::BadTowerTier { index });
                }
            }
            EventKind::MatchEnd => {
                if end_seen {
                    out.push(Violation::DuplicateMatchEnd { index });
                }
                end_seen = true;
                if index + 1 != m.events.len() {
                    out.push(Violation::MatchEndNotLast { index });
                }
            }
        }
    }
    if !end_seen {
        out.push(Violation::MissingMatchEnd);
    }
    out
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header {
        match_id: String,
        tick_interval_s: f64,
        map_bounds: MapBounds,
        players: Vec<PlayerInfo>,
    },
    Pos {
        t: f64,
        p: PlayerId,
        x: f64,
        y: f64,
    },
    Kill {
        t: f64,
        actor: PlayerId,
        victim: PlayerId,
    },
    Death {
        t: f64,
        p: PlayerId,
    },
    Tower {
        t: f64,
        tier: u8,
        team: Team,
    },
    End {
        t: f64,
    },
}

impl Line {
    fn from_event(e: &Event) -> Line {
        let t = e.time_s;
        match &e.kind {
            EventKind::PositionSample { player, position } => Line::Pos {
                t,
                p: player.clone(),
                x: position.x,
                y: position.y,
            },
            EventKind::Kill { actor, victim } => Line::Kill {
                t,
                actor: actor.clone(),
                victim: victim.clone(),
            },
            EventKind::Death { player } => Line::Death { t, p: player.clone() },
            EventKind::TowerFall { tier, team } => Line::Tower { t, tier: *tier, team: *team },
            EventKind::MatchEnd => Line::End { t },
        }
    }
}

/// Serialize one event as its wire-format JSON object.
pub fn event_to_json(e: &Event) -> serde_json::Value {
    serde_json::to_value(Line::from_event(e)).expect("event lines always serialize")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("schema violation in field `{field}`: {detail}")]
    SchemaViolation { field: String, detail: String },
    #[error("event {0} is out of time order")]
    UnsortedEvents(usize),
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
}

impl ParseError {
    fn schema(field: &str, detail: impl Into<String>) -> Self {
        ParseError::SchemaViolation {
            field: field.to_string(),
            detail: detail.into(),
        }
    }
}

impl From<Violation> for ParseError {
    fn from(v: Violation) -> Self {
        match v {
            Violation::UnsortedEvents { index } => ParseError::UnsortedEvents(index),
            Violation::UnknownPlayer { player, .. } => ParseError::UnknownPlayer(player),
            other => ParseError::schema(other.field(), other.to_string()),
        }
    }
}

/// Parse and validate a line-delimited match log. Line numbers in errors are 1-based.
pub fn parse_match_log(raw: &[u8]) -> Result<MatchLog, ParseError> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let line = raw[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        ParseError::MalformedLine { line, message: "invalid UTF-8".into() }
    })?;

    let mut log: Option<MatchLog> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(raw_line).map_err(|e| ParseError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        match (parsed, log.as_mut()) {
            (
                Line::Header {
                    match_id,
                    tick_interval_s,
                    map_bounds,
                    players,
                },
                None,
            ) => {
                log = Some(MatchLog {
                    match_id,
                    map_bounds,
                    tick_interval_s,
                    players,
                    events: Vec::new(),
                });
            }
            (Line::Header { .. }, Some(_)) => {
                return Err(ParseError::schema("type", format!("second header on line {line_no}")))
            }
            (_, None) => {
                return Err(ParseError::schema("type", format!("line {line_no} precedes the header")))
            }
            (line, Some(m)) => {
                let event = match line {
                    Line::Pos { t, p, x, y } => Event::new(
                        t,
                        EventKind::PositionSample { player: p, position: Position::new(x, y) },
                    ),
                    Line::Kill { t, actor, victim } => Event::new(t, EventKind::Kill { actor, victim }),
                    Line::Death { t, p } => Event::new(t, EventKind::Death { player: p }),
                    Line::Tower { t, tier, team } => Event::new(t, EventKind::TowerFall { tier, team }),
                    Line::End { t } => Event::new(t, EventKind::MatchEnd),
                    Line::Header { .. } => unreachable!(),
                };
                m.events.push(event);
            }
        }
    }

    let log = log.ok_or_else(|| ParseError::schema("type", "missing header line"))?;
    if let Some(v) = validate(&log).into_iter().next() {
        return Err(v.into());
    }
    Ok(log)
}

/// Canonical serialization: header first, then one line per event, each
/// terminated by `\n`.
pub fn to_jsonl(m: &MatchLog) -> String {
    let mut out = String::new();
    let header = Line::Header {
        match_id: m.match_id.clone(),
        tick_interval_s: m.tick_interval_s,
        map_bounds: m.map_bounds,
        players: m.players.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for e in &m.events {
        out.push_str(&serde_json::to_string(&Line::from_event(e)).expect("event serializes"));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickFlags {
    pub killed: bool,
    pub died: bool,
}

/// Player positions and kill/death flags on a uniform time grid.
///
/// Positions are `None` while a player is dead (from the tick after a death
/// until the next position sample) or before their first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TickTable {
    pub interval_s: f64,
    pub ticks: Vec<f64>,
    pub players: Vec<PlayerId>,
    pub teams: Vec<Team>,
    positions: Vec<Vec<Option<Position>>>,
    flags: Vec<Vec<TickFlags>>,
}

impl TickTable {
    pub fn n_ticks(&self) -> usize {
        self.ticks.len()
    }

    pub fn player_index(&self, id: &PlayerId) -> Option<usize> {
        self.players.iter().position(|p| p == id)
    }

    pub fn position(&self, player: usize, tick: usize) -> Option<Position> {
        self.positions[player][tick]
    }

    pub fn flags(&self, player: usize, tick: usize) -> TickFlags {
        self.flags[player][tick]
    }

    pub fn is_present(&self, player: usize, tick: usize) -> bool {
        self.positions[player][tick].is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResampleError {
    #[error("resampling interval must be finite and > 0")]
    InvalidInterval,
    #[error("player {0} has no position samples")]
    NoPositions(PlayerId),
}

fn tick_of(t: f64, interval: f64) -> usize {
    (t / interval + GRID_EPS).floor().max(0.0) as usize
}

/// Resample positions onto a grid of `interval_s` using last observation
/// carried forward. A tick carries `died`/`killed` if the event time falls
/// inside it; the player is absent from the following tick until their next
/// position sample.
pub fn resample_positions(m: &MatchLog, interval_s: f64) -> Result<TickTable, ResampleError> {
    if !(interval_s.is_finite() && interval_s > 0.0) {
        return Err(ResampleError::InvalidInterval);
    }
    let end = m.match_end_s();
    let n_ticks = tick_of(end, interval_s) + 1;
    let ticks: Vec<f64> = (0..n_ticks).map(|k| k as f64 * interval_s).collect();
    let n_players = m.players.len();
    let index: HashMap<&PlayerId, usize> = m
        .players
        .iter()
        .enumerate()
        .map(|(i, p)| (&p.player_id, i))
        .collect();

    let mut samples: Vec<Vec<(f64, Position)>> = vec![Vec::new(); n_players];
    let mut deaths: Vec<Vec<f64>> = vec![Vec::new(); n_players];
    let mut flags = vec![vec![TickFlags::default(); n_ticks]; n_players];
    for e in &m.events {
        match &e.kind {
            EventKind::PositionSample { player, position } => {
                if let Some(&i) = index.get(player) {
                    samples[i].push((e.time_s, *position));
                }
            }
            EventKind::Death { player } => {
                if let Some(&i) = index.get(player) {
                    deaths[i].push(e.time_s);
                    let k = tick_of(e.time_s, interval_s).min(n_ticks - 1);
                    flags[i][k].died = true;
                }
            }
            EventKind::Kill { actor, .. } => {
                if let Some(&i) = index.get(actor) {
                    let k = tick_of(e.time_s, interval_s).min(n_ticks - 1);
                    flags[i][k].killed = true;
                }
            }
            _ => {}
        }
    }

    let mut positions = Vec::with_capacity(n_players);
    for (i, info) in m.players.iter().enumerate() {
        if samples[i].is_empty() {
            return Err(ResampleError::NoPositions(info.player_id.clone()));
        }
        let eps = GRID_EPS * interval_s;
        let mut row = Vec::with_capacity(n_ticks);
        let (mut s_ptr, mut d_ptr) = (0usize, 0usize);
        let mut last_sample: Option<(f64, Position)> = None;
        let mut last_death: Option<f64> = None;
        for &tau in &ticks {
            while s_ptr < samples[i].len() && samples[i][s_ptr].0 <= tau + eps {
                last_sample = Some(samples[i][s_ptr]);
                s_ptr += 1;
            }
            // deaths strictly before this tick
            while d_ptr < deaths[i].len() && deaths[i][d_ptr] < tau - eps {
                last_death = Some(deaths[i][d_ptr]);
                d_ptr += 1;
            }
            let cell = match (last_sample, last_death) {
                (None, _) => None,
                (Some((s, _)), Some(d)) if d >= s - eps => None,
                (Some((_, p)), _) => Some(p),
            };
            row.push(cell);
        }
        positions.push(row);
    }

    Ok(TickTable {
        interval_s,
        ticks,
        players: m.players.iter().map(|p| p.player_id.clone()).collect(),
        teams: m.players.iter().map(|p| p.team).collect(),
        positions,
        flags,
    })
}

/// Count events by kind name; handy for header summaries.
pub fn event_counts(m: &MatchLog) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for e in &m.events {
        *counts.entry(e.kind.name()).or_insert(0) += 1;
    }
    counts
}

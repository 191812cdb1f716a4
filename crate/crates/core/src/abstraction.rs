//! Proximity-based behavior abstraction.
//!
//! Every tick a player is present is mapped to one of ten behavior states
//! from the number of allies (`A`) and enemies (`E`) within the proximity
//! radius, the enemy count at the player's previous present tick (`E'`), and
//! the kill/death flags on the tick. The first rule of the configured
//! precedence list that matches decides the state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmentation::Segment;
use crate::telemetry::{resample_positions, MatchLog, PlayerId, ResampleError, TickFlags, TickTable};

pub const DEFAULT_RADIUS: f64 = 81.92;

/// The ten abstracted behavior states. Declaration order is the canonical
/// order used for sorting and tie-breaking everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorState {
    Solo,
    Fight,
    KillHero,
    Teaming,
    Death,
    Harassed,
    FightDiminishes,
    FightIntensifies,
    TeamFight,
    FullTeamAssembly,
}

impl BehaviorState {
    pub const ALL: [BehaviorState; 10] = [
        BehaviorState::Solo,
        BehaviorState::Fight,
        BehaviorState::KillHero,
        BehaviorState::Teaming,
        BehaviorState::Death,
        BehaviorState::Harassed,
        BehaviorState::FightDiminishes,
        BehaviorState::FightIntensifies,
        BehaviorState::TeamFight,
        BehaviorState::FullTeamAssembly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BehaviorState::Solo => "solo",
            BehaviorState::Fight => "fight",
            BehaviorState::KillHero => "kill_hero",
            BehaviorState::Teaming => "teaming",
            BehaviorState::Death => "death",
            BehaviorState::Harassed => "harassed",
            BehaviorState::FightDiminishes => "fight_diminishes",
            BehaviorState::FightIntensifies => "fight_intensifies",
            BehaviorState::TeamFight => "team_fight",
            BehaviorState::FullTeamAssembly => "full_team_assembly",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BehaviorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown behavior state `{0}`")]
pub struct UnknownState(pub String);

impl FromStr for BehaviorState {
    type Err = UnknownState;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BehaviorState::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| UnknownState(s.to_string()))
    }
}

/// Everything a rule may look at for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickContext {
    pub allies: u32,
    pub enemies: u32,
    /// Enemy count at the previous tick the player was present, if any.
    pub prev_enemies: Option<u32>,
    pub killed: bool,
    pub died: bool,
    /// Number of teammates (excluding the player); `allies == team_allies`
    /// means the whole team is nearby.
    pub team_allies: u32,
}

/// One abstraction rule. Each rule produces exactly one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Died,
    Killed,
    TeamFight,
    FightIntensifies,
    Harassed,
    FightDiminishes,
    Fight,
    FullTeamAssembly,
    Teaming,
    Solo,
}

impl Rule {
    pub const ALL: [Rule; 10] = [
        Rule::Died,
        Rule::Killed,
        Rule::TeamFight,
        Rule::FightIntensifies,
        Rule::Harassed,
        Rule::FightDiminishes,
        Rule::Fight,
        Rule::FullTeamAssembly,
        Rule::Teaming,
        Rule::Solo,
    ];

    pub fn state(self) -> BehaviorState {
        match self {
            Rule::Died => BehaviorState::Death,
            Rule::Killed => BehaviorState::KillHero,
            Rule::TeamFight => BehaviorState::TeamFight,
            Rule::FightIntensifies => BehaviorState::FightIntensifies,
            Rule::Harassed => BehaviorState::Harassed,
            Rule::FightDiminishes => BehaviorState::FightDiminishes,
            Rule::Fight => BehaviorState::Fight,
            Rule::FullTeamAssembly => BehaviorState::FullTeamAssembly,
            Rule::Teaming => BehaviorState::Teaming,
            Rule::Solo => BehaviorState::Solo,
        }
    }

    pub fn matches(self, c: &TickContext) -> bool {
        let (a, e) = (c.allies, c.enemies);
        match self {
            Rule::Died => c.died,
            Rule::Killed => c.killed,
            Rule::TeamFight => a >= 2 && e >= 2,
            Rule::FightIntensifies => c.prev_enemies.is_some_and(|p| p >= 1 && e > p),
            Rule::Harassed => e >= 2,
            Rule::FightDiminishes => e >= 1 && c.prev_enemies.is_some_and(|p| e < p),
            Rule::Fight => e >= 1,
            Rule::FullTeamAssembly => c.team_allies > 0 && a == c.team_allies,
            Rule::Teaming => a >= 1,
            Rule::Solo => a == 0,
        }
    }
}

/// Ordered rule list; the first matching rule wins.
///
/// Any permutation of all ten rules is total: every context satisfies at
/// least one of `Died`, `Killed`, `Fight` (E >= 1), `Teaming` (A >= 1) or
/// `Solo` (A = 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rule>", into = "Vec<Rule>")]
pub struct Precedence(Vec<Rule>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("precedence must list each of the ten rules exactly once")]
    InvalidPrecedence,
    #[error("proximity radius must be finite and > 0")]
    InvalidRadius,
    #[error("player {0} is absent at tick {1}")]
    PlayerAbsent(PlayerId, usize),
    #[error("player {0} is not in the match")]
    UnknownPlayer(PlayerId),
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

impl Precedence {
    pub fn new(rules: Vec<Rule>) -> Result<Self, AbstractionError> {
        let complete = rules.len() == Rule::ALL.len() && Rule::ALL.iter().all(|r| rules.contains(r));
        if complete {
            Ok(Precedence(rules))
        } else {
            Err(AbstractionError::InvalidPrecedence)
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.0
    }

    pub fn first_match(&self, c: &TickContext) -> Rule {
        *self
            .0
            .iter()
            .find(|r| r.matches(c))
            .expect("precedence lists are total")
    }
}

impl Default for Precedence {
    fn default() -> Self {
        Precedence(Rule::ALL.to_vec())
    }
}

impl TryFrom<Vec<Rule>> for Precedence {
    type Error = AbstractionError;
    fn try_from(v: Vec<Rule>) -> Result<Self, Self::Error> {
        Precedence::new(v)
    }
}

impl From<Precedence> for Vec<Rule> {
    fn from(p: Precedence) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProximityConfig {
    /// Inclusive neighbourhood radius in map units.
    pub radius: f64,
    pub tick_interval_s: f64,
    pub precedence: Precedence,
}

impl Default for ProximityConfig {
    fn default() -> Self {
        ProximityConfig {
            radius: DEFAULT_RADIUS,
            tick_interval_s: 1.0,
            precedence: Precedence::default(),
        }
    }
}

impl ProximityConfig {
    pub fn with_radius(radius: f64) -> Self {
        ProximityConfig { radius, ..Default::default() }
    }
}

/// Per-player, time-ordered behavior states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSequence {
    pub match_id: String,
    pub player_id: PlayerId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<Segment>,
    #[serde(rename = "states", with = "state_entries")]
    pub entries: Vec<(f64, BehaviorState)>,
}

/// Entries serialize as `[state, time]` pairs.
mod state_entries {
    use super::BehaviorState;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[(f64, BehaviorState)], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(BehaviorState, f64)> = v.iter().map(|&(t, st)| (st, t)).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, BehaviorState)>, D::Error> {
        let pairs: Vec<(BehaviorState, f64)> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|(st, t)| (t, st)).collect())
    }
}

impl StateSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = BehaviorState> + '_ {
        self.entries.iter().map(|&(_, s)| s)
    }
}

/// A maximal run of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub state: BehaviorState,
    pub length: usize,
    pub start_s: f64,
}

/// Run-length compressed ("distinct successive states") view of a sequence.
///
/// `times` keeps the original entry times so that [`DssSequence::expand`] is
/// exact even across ticks where the player was absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssSequence {
    pub match_id: String,
    pub player_id: PlayerId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<Segment>,
    pub runs: Vec<Run>,
    #[serde(skip)]
    pub times: Vec<f64>,
}

impl DssSequence {
    /// The run states, ignoring run lengths.
    pub fn pattern(&self) -> Vec<BehaviorState> {
        self.runs.iter().map(|r| r.state).collect()
    }

    pub fn expand(&self) -> StateSequence {
        let states = self.runs.iter().flat_map(|r| std::iter::repeat_n(r.state, r.length));
        StateSequence {
            match_id: self.match_id.clone(),
            player_id: self.player_id.clone(),
            segment: self.segment,
            entries: self.times.iter().copied().zip(states).collect(),
        }
    }

    /// Total number of ticks covered.
    pub fn tick_len(&self) -> usize {
        self.runs.iter().map(|r| r.length).sum()
    }

    /// Identifier `match/player[/segment]` used for matrix rows and plots.
    pub fn label(&self) -> String {
        match self.segment {
            Some(seg) => format!("{}/{}/{}", self.match_id, self.player_id, seg),
            None => format!("{}/{}", self.match_id, self.player_id),
        }
    }
}

/// Collapse consecutive equal states into runs.
pub fn compress_dss(seq: &StateSequence) -> DssSequence {
    let mut runs: Vec<Run> = Vec::new();
    for &(t, state) in &seq.entries {
        match runs.last_mut() {
            Some(run) if run.state == state => run.length += 1,
            _ => runs.push(Run { state, length: 1, start_s: t }),
        }
    }
    DssSequence {
        match_id: seq.match_id.clone(),
        player_id: seq.player_id.clone(),
        segment: seq.segment,
        runs,
        times: seq.entries.iter().map(|&(t, _)| t).collect(),
    }
}

/// Allies and enemies present within `cfg.radius` (inclusive) of `player` at `tick`.
pub fn proximity_counts(
    table: &TickTable,
    player: usize,
    tick: usize,
    cfg: &ProximityConfig,
) -> Result<(u32, u32), AbstractionError> {
    let me = table
        .position(player, tick)
        .ok_or_else(|| AbstractionError::PlayerAbsent(table.players[player].clone(), tick))?;
    let team = table.teams[player];
    let (mut allies, mut enemies) = (0u32, 0u32);
    for other in 0..table.players.len() {
        if other == player {
            continue;
        }
        let Some(p) = table.position(other, tick) else { continue };
        if me.distance(&p) <= cfg.radius {
            if table.teams[other] == team {
                allies += 1;
            } else {
                enemies += 1;
            }
        }
    }
    Ok((allies, enemies))
}

fn check_config(cfg: &ProximityConfig) -> Result<(), AbstractionError> {
    if !(cfg.radius.is_finite() && cfg.radius > 0.0) {
        return Err(AbstractionError::InvalidRadius);
    }
    Ok(())
}

/// Abstract one player from an already resampled table.
pub fn abstract_from_table(
    table: &TickTable,
    match_id: &str,
    player: usize,
    cfg: &ProximityConfig,
) -> Result<StateSequence, AbstractionError> {
    check_config(cfg)?;
    let team = table.teams[player];
    let team_allies = table.teams.iter().filter(|&&t| t == team).count() as u32 - 1;
    let mut entries = Vec::new();
    let mut prev_enemies = None;
    for tick in 0..table.n_ticks() {
        if !table.is_present(player, tick) {
            continue;
        }
        let (allies, enemies) = proximity_counts(table, player, tick, cfg)?;
        let TickFlags { killed, died } = table.flags(player, tick);
        let ctx = TickContext { allies, enemies, prev_enemies, killed, died, team_allies };
        entries.push((table.ticks[tick], cfg.precedence.first_match(&ctx).state()));
        prev_enemies = Some(enemies);
    }
    Ok(StateSequence {
        match_id: match_id.to_string(),
        player_id: table.players[player].clone(),
        segment: None,
        entries,
    })
}

pub fn abstract_player(
    m: &MatchLog,
    player: &PlayerId,
    cfg: &ProximityConfig,
) -> Result<StateSequence, AbstractionError> {
    check_config(cfg)?;
    let idx = m
        .player_index(player)
        .ok_or_else(|| AbstractionError::UnknownPlayer(player.clone()))?;
    let table = resample_positions(m, cfg.tick_interval_s)?;
    abstract_from_table(&table, &m.match_id, idx, cfg)
}

/// Abstract every player of the match, in header order.
pub fn abstract_match(m: &MatchLog, cfg: &ProximityConfig) -> Result<Vec<StateSequence>, AbstractionError> {
    check_config(cfg)?;
    let table = resample_positions(m, cfg.tick_interval_s)?;
    (0..m.players.len())
        .map(|i| abstract_from_table(&table, &m.match_id, i, cfg))
        .collect()
}

/// One JSON object per line, in the `seqlab abstract` output format.
pub fn sequences_to_jsonl(seqs: &[StateSequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        out.push_str(&serde_json::to_string(s).expect("sequences serialize"));
        out.push('\n');
    }
    out
}

pub fn sequences_from_jsonl(text: &str) -> Result<Vec<StateSequence>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

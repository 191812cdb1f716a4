//! Deterministic synthetic match generator.
//!
//! Matches are simulated as a chain of "episodes" (20-60 s by default). In
//! each episode every living player is either alone at a private spot, grouped
//! with teammates, or drawn into a skirmish or team fight whose participants
//! arrive and leave at staggered times. Spots sit on a coarse grid whose
//! spacing is well above the default proximity radius, so proximity only
//! arises from the scripted gatherings.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{
    Event, EventKind, MapBounds, MatchLog, PlayerId, PlayerInfo, Position, Role, Team,
};

const HEROES: [&str; 10] = [
    "Juggernaut", "Lion", "Earthshaker", "Crystal Maiden", "Sniper",
    "Phantom Assassin", "Shadow Shaman", "Tidehunter", "Witch Doctor", "Drow Ranger",
];
const ROLES: [Role; 5] = [Role::Carry, Role::Other, Role::Initiator, Role::Support, Role::Support];

/// Relative weights of the four episode kinds within one game segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityMix {
    pub solo: f64,
    pub group: f64,
    pub skirmish: f64,
    pub team_fight: f64,
}

impl Default for ActivityMix {
    fn default() -> Self {
        ActivityMix { solo: 0.4, group: 0.25, skirmish: 0.25, team_fight: 0.1 }
    }
}

impl ActivityMix {
    fn weights(&self) -> [f64; 4] {
        [self.solo, self.group, self.skirmish, self.team_fight]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseMix {
    pub early: ActivityMix,
    pub mid: ActivityMix,
    pub late: ActivityMix,
}

impl Default for PhaseMix {
    fn default() -> Self {
        PhaseMix {
            early: ActivityMix { solo: 0.5, group: 0.2, skirmish: 0.25, team_fight: 0.05 },
            mid: ActivityMix { solo: 0.35, group: 0.3, skirmish: 0.25, team_fight: 0.1 },
            late: ActivityMix { solo: 0.15, group: 0.3, skirmish: 0.2, team_fight: 0.35 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerFallSpec {
    pub t: f64,
    pub tier: u8,
    pub team: Team,
}

/// A kill forced at a fixed time, by player index (0-4 radiant, 5-9 dire).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedKill {
    pub t: f64,
    pub killer: usize,
    pub victim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Defaults to `synth-{seed}`.
    pub match_id: Option<String>,
    pub players: usize,
    pub duration_s: f64,
    pub tick_interval_s: f64,
    /// Emit a position sample every this many ticks.
    pub sample_every: u32,
    pub map_size: f64,
    pub towers: Vec<TowerFallSpec>,
    /// End the match before the first scheduled tier-3 fall and drop it.
    pub surrender_before_late: bool,
    pub phases: PhaseMix,
    pub episode_min_s: f64,
    pub episode_max_s: f64,
    /// Probability that a skirmish or team fight produces a kill.
    pub kill_chance: f64,
    pub scripted_kills: Vec<ScriptedKill>,
    pub respawn_base_s: f64,
    /// Extra respawn delay per second of game time.
    pub respawn_growth: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            match_id: None,
            players: 10,
            duration_s: 2400.0,
            tick_interval_s: 1.0,
            sample_every: 1,
            map_size: 1000.0,
            towers: vec![
                TowerFallSpec { t: 600.0, tier: 1, team: Team::Dire },
                TowerFallSpec { t: 1200.0, tier: 2, team: Team::Radiant },
                TowerFallSpec { t: 1800.0, tier: 3, team: Team::Dire },
            ],
            surrender_before_late: false,
            phases: PhaseMix::default(),
            episode_min_s: 20.0,
            episode_max_s: 60.0,
            kill_chance: 0.6,
            scripted_kills: Vec::new(),
            respawn_base_s: 6.0,
            respawn_growth: 1.0 / 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

impl SynthConfig {
    /// Time at which the match ends after applying `surrender_before_late`.
    fn end_time(&self) -> f64 {
        if self.surrender_before_late {
            if let Some(t3) = self.first_tier3() {
                return (t3 - 30.0).min(self.duration_s);
            }
        }
        self.duration_s
    }

    fn first_tier3(&self) -> Option<f64> {
        self.towers.iter().filter(|t| t.tier == 3).map(|t| t.t).reduce(f64::min)
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.players != 10 {
            return Err(invalid("a match needs exactly 10 players (5 per team)"));
        }
        if !(self.tick_interval_s.is_finite() && self.tick_interval_s > 0.0) {
            return Err(invalid("tick_interval_s must be > 0"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > self.episode_max_s) {
            return Err(invalid("duration_s must exceed episode_max_s"));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every must be >= 1"));
        }
        if !(self.map_size.is_finite() && self.map_size >= 500.0) {
            return Err(invalid("map_size must be >= 500"));
        }
        if !(self.episode_min_s >= 20.0 && self.episode_max_s >= self.episode_min_s) {
            return Err(invalid("episodes must last at least 20 s"));
        }
        if !(0.0..=1.0).contains(&self.kill_chance) {
            return Err(invalid("kill_chance must be in [0, 1]"));
        }
        if !(self.respawn_base_s > 0.0 && self.respawn_growth >= 0.0) {
            return Err(invalid("respawn parameters must be positive"));
        }
        for mix in [&self.phases.early, &self.phases.mid, &self.phases.late] {
            let w = mix.weights();
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(invalid("activity weights must be non-negative with a positive sum"));
            }
        }
        if !self.towers.iter().any(|t| t.tier == 1) {
            return Err(invalid("tower schedule needs at least one tier-1 fall"));
        }
        for t in &self.towers {
            if !(1..=3).contains(&t.tier) || !(t.t > 0.0 && t.t < self.duration_s) {
                return Err(invalid(format!("bad tower fall {t:?}")));
            }
        }
        let end = self.end_time();
        let first_fall = self.towers.iter().map(|t| t.t).fold(f64::INFINITY, f64::min);
        if first_fall >= end {
            return Err(invalid("first tower must fall before the match ends"));
        }
        for k in &self.scripted_kills {
            let same_team = (k.killer < 5) == (k.victim < 5);
            if k.killer >= 10 || k.victim >= 10 || same_team || !(k.t > 0.0 && k.t < end) {
                return Err(invalid(format!("bad scripted kill {k:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Activity {
    Solo,
    Group,
    Skirmish,
    TeamFight,
}

struct Episode {
    /// Per player: private spot, and optionally a shared spot with the tick
    /// range during which the player is there.
    solo_spot: Vec<Position>,
    shared: Vec<Option<(Position, usize, usize)>>,
}

fn team_of(i: usize) -> Team {
    if i < 5 {
        Team::Radiant
    } else {
        Team::Dire
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

struct Sim<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    spots: Vec<Position>,
    fountains: [Position; 2],
}

impl Sim<'_> {
    fn phase_mix(&self, t: f64) -> &ActivityMix {
        let first = self.cfg.towers.iter().map(|t| t.t).fold(f64::INFINITY, f64::min);
        if t < first {
            &self.cfg.phases.early
        } else if self.cfg.first_tier3().is_none_or(|t3| t < t3) {
            &self.cfg.phases.mid
        } else {
            &self.cfg.phases.late
        }
    }

    fn pick_activity(&mut self, t: f64) -> Activity {
        let w = self.phase_mix(t).weights();
        let total: f64 = w.iter().sum();
        let mut r = self.rng.random::<f64>() * total;
        for (i, wi) in w.iter().enumerate() {
            if r < *wi {
                return [Activity::Solo, Activity::Group, Activity::Skirmish, Activity::TeamFight][i];
            }
            r -= wi;
        }
        Activity::Solo
    }

    fn plan_episode(&mut self, start: usize, end: usize, alive: &[bool]) -> Episode {
        let mut spots = self.spots.clone();
        spots.shuffle(&mut self.rng);
        let meeting = spots.pop().expect("spot grid is never empty");
        let solo_spot: Vec<Position> = (0..10).map(|_| spots.pop().expect("enough spots")).collect();
        let mut shared = vec![None; 10];

        let activity = self.pick_activity(start as f64 * self.cfg.tick_interval_s);
        let pick = |rng: &mut ChaCha8Rng, team: Team, lo: usize, hi: usize| -> Vec<usize> {
            let mut members: Vec<usize> =
                (0..10).filter(|&i| team_of(i) == team && alive[i]).collect();
            members.shuffle(rng);
            let n = rng.random_range(lo..=hi).min(members.len());
            members.truncate(n);
            members
        };
        let participants: Vec<usize> = match activity {
            Activity::Solo => Vec::new(),
            Activity::Group => {
                let team = if self.rng.random_bool(0.5) { Team::Radiant } else { Team::Dire };
                pick(&mut self.rng, team, 2, 5)
            }
            Activity::Skirmish => {
                let mut v = pick(&mut self.rng, Team::Radiant, 1, 2);
                v.extend(pick(&mut self.rng, Team::Dire, 1, 2));
                v
            }
            Activity::TeamFight => {
                let mut v = pick(&mut self.rng, Team::Radiant, 3, 5);
                v.extend(pick(&mut self.rng, Team::Dire, 3, 5));
                v
            }
        };
        let staggered = matches!(activity, Activity::Skirmish | Activity::TeamFight);
        let len = end - start;
        let max_offset = if staggered { (len / 3).min(8) } else { 0 };
        for &i in &participants {
            let arrive = start + self.rng.random_range(0..=max_offset);
            let leave = end - self.rng.random_range(0..=max_offset);
            let offset = Position::new(
                self.rng.random_range(-15.0..=15.0),
                self.rng.random_range(-15.0..=15.0),
            );
            let p = Position::new(meeting.x + offset.x, meeting.y + offset.y);
            shared[i] = Some((p, arrive, leave));
        }
        Episode { solo_spot, shared }
    }
}

/// Generate a valid match log. Output is a pure function of `(config, seed)`.
pub fn generate_synthetic_match(config: &SynthConfig, seed: u64) -> Result<MatchLog, SynthError> {
    config.validate()?;
    let cfg = config;
    let dt = cfg.tick_interval_s;
    let end_s = cfg.end_time();
    let last_tick = (end_s / dt + 1e-9).floor() as usize;

    let grid = 5usize;
    let cell = cfg.map_size / grid as f64;
    let spots: Vec<Position> = (0..grid)
        .flat_map(|i| (0..grid).map(move |j| (i, j)))
        .map(|(i, j)| Position::new(cell * (i as f64 + 0.5), cell * (j as f64 + 0.5)))
        .collect();
    let mut sim = Sim {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
        spots,
        fountains: [
            Position::new(cfg.map_size * 0.02, cfg.map_size * 0.02),
            Position::new(cfg.map_size * 0.98, cfg.map_size * 0.98),
        ],
    };

    let players: Vec<PlayerInfo> = (0..10)
        .map(|i| PlayerInfo {
            player_id: player_id(i),
            team: team_of(i),
            hero_name: HEROES[i].to_string(),
            role: ROLES[i % 5],
        })
        .collect();

    // (time, order, event); order keeps pos < kill < death < tower < end at equal times
    let mut events: Vec<(f64, u8, Event)> = Vec::new();
    let mut dead_until: Vec<Option<usize>> = vec![None; 10];
    let mut scripted: Vec<ScriptedKill> = cfg.scripted_kills.clone();
    scripted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut next_scripted = 0usize;

    let ep_min = (cfg.episode_min_s / dt).round().max(1.0) as usize;
    let ep_max = (cfg.episode_max_s / dt).round().max(ep_min as f64) as usize;
    let mut tick = 0usize;
    while tick <= last_tick {
        let len = sim.rng.random_range(ep_min..=ep_max);
        let ep_end = (tick + len).min(last_tick + 1);
        let alive: Vec<bool> = dead_until.iter().map(|d| d.is_none()).collect();
        let episode = sim.plan_episode(tick, ep_end, &alive);
        let mut respawned_this_episode = [false; 10];

        // random kills inside fights
        let fighters: Vec<usize> = (0..10).filter(|&i| episode.shared[i].is_some()).collect();
        let two_teams = fighters.iter().any(|&i| i < 5) && fighters.iter().any(|&i| i >= 5);
        let mut planned: Vec<(f64, usize, usize)> = Vec::new();
        if two_teams && ep_end - tick >= 20 && sim.rng.random_bool(cfg.kill_chance) {
            let n_kills = if fighters.len() >= 6 { sim.rng.random_range(1..=2) } else { 1 };
            let lo = tick + 8;
            let hi = ep_end - 8;
            let mut victims = Vec::new();
            for _ in 0..n_kills {
                let k_tick = sim.rng.random_range(lo..hi);
                let frac = sim.rng.random_range(0..10) as f64 / 10.0;
                let victim = *fighters.choose(&mut sim.rng).expect("fighters non-empty");
                if victims.contains(&victim) {
                    continue;
                }
                let killers: Vec<usize> = fighters
                    .iter()
                    .copied()
                    .filter(|&k| team_of(k) != team_of(victim) && !victims.contains(&k))
                    .collect();
                if let Some(&killer) = killers.choose(&mut sim.rng) {
                    victims.push(victim);
                    planned.push(((k_tick as f64 + frac) * dt, killer, victim));
                }
            }
        }
        while next_scripted < scripted.len() && scripted[next_scripted].t < ep_end as f64 * dt {
            let k = scripted[next_scripted];
            planned.push((k.t, k.killer, k.victim));
            next_scripted += 1;
        }
        planned.sort_by(|a, b| a.0.total_cmp(&b.0));

        for k in tick..ep_end {
            let t = k as f64 * dt;
            for i in 0..10 {
                if let Some(r) = dead_until[i] {
                    if k < r {
                        continue;
                    }
                    dead_until[i] = None;
                    respawned_this_episode[i] = true;
                }
                // respawn ticks are aligned to the sampling cadence
                if k % cfg.sample_every as usize != 0 {
                    continue;
                }
                let anchor = if respawned_this_episode[i] {
                    sim.fountains[if i < 5 { 0 } else { 1 }]
                } else {
                    match episode.shared[i] {
                        Some((p, a, l)) if k >= a && k < l => p,
                        _ => episode.solo_spot[i],
                    }
                };
                let jitter_x = sim.rng.random_range(-3.0..=3.0);
                let jitter_y = sim.rng.random_range(-3.0..=3.0);
                let p = Position::new(
                    round2((anchor.x + jitter_x).clamp(0.0, cfg.map_size)),
                    round2((anchor.y + jitter_y).clamp(0.0, cfg.map_size)),
                );
                events.push((
                    t,
                    0,
                    Event::new(t, EventKind::PositionSample { player: player_id(i), position: p }),
                ));
            }
            // kills whose time falls inside this tick
            for &(kt, killer, victim) in &planned {
                if kt >= t && kt < t + dt && dead_until[killer].is_none() && dead_until[victim].is_none() {
                    events.push((
                        kt,
                        1,
                        Event::new(kt, EventKind::Kill { actor: player_id(killer), victim: player_id(victim) }),
                    ));
                    events.push((kt, 2, Event::new(kt, EventKind::Death { player: player_id(victim) })));
                    let respawn_s = cfg.respawn_base_s + cfg.respawn_growth * kt;
                    let raw = ((kt + respawn_s) / dt).ceil() as usize;
                    let every = cfg.sample_every as usize;
                    dead_until[victim] = Some(raw.div_ceil(every) * every);
                }
            }
        }
        tick = ep_end;
    }

    for tower in &cfg.towers {
        if cfg.surrender_before_late && tower.tier == 3 {
            continue;
        }
        if tower.t <= end_s {
            events.push((tower.t, 3, Event::new(tower.t, EventKind::TowerFall { tier: tower.tier, team: tower.team })));
        }
    }
    events.push((end_s, 4, Event::new(end_s, EventKind::MatchEnd)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    Ok(MatchLog {
        match_id: cfg.match_id.clone().unwrap_or_else(|| format!("synth-{seed}")),
        map_bounds: MapBounds { min_x: 0.0, min_y: 0.0, max_x: cfg.map_size, max_y: cfg.map_size },
        tick_interval_s: dt,
        players,
        events: events.into_iter().map(|(_, _, e)| e).collect(),
    })
}

/// Player ids used by the generator: `r0`..`r4` (radiant), `d0`..`d4` (dire).
pub fn player_id(index: usize) -> PlayerId {
    if index < 5 {
        PlayerId(format!("r{index}"))
    } else {
        PlayerId(format!("d{}", index - 5))
    }
}

//! Scenario files, seeded trial execution, metrics and CSV output.
//!
//! A scenario is a JSON document with a version field; every omitted field
//! takes its default, so a minimal file only names the head counts and the
//! policy. The batch runner derives one seed per trial from the master
//! seed, runs trials in parallel, and aggregates in trial order, so the
//! resulting CSV is a pure function of (scenario, trials, master seed).

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{classify, AdversaryClass, RegressionCoeffs};
use crate::geom::Vec2;
use crate::util_model::{
    need_expectation, winning_probability, CellModifiers, EnergyCoeffs, EngagementObs, HpCoeffs,
    NeedKind, NeedSpec, WinCoeffs,
};
use crate::world::policy::{
    AbilityParams, GutSelection, InfoMode, MonsterPolicy, PolicyConfig, PolicyEngine, PolicyMode,
};
use crate::world::{outcome, step, CostTable, Obstacle, Outcome, WorldError, WorldParams, WorldState};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("trial failed: {0}")]
    Trial(String),
}

/// Disc the explorers start in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnDisc {
    pub center: Vec2,
    pub radius: f64,
}

impl Default for SpawnDisc {
    fn default() -> Self {
        SpawnDisc { center: Vec2::new(8.0, 50.0), radius: 6.0 }
    }
}

/// Axis-aligned rectangle the monsters scatter over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnRect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Default for SpawnRect {
    fn default() -> Self {
        SpawnRect { min: Vec2::new(35.0, 25.0), max: Vec2::new(70.0, 75.0) }
    }
}

/// Complete experiment input. Serialized as JSON with a schema version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub version: u32,
    pub explorers: usize,
    pub monsters: usize,
    pub policy: PolicyMode,
    pub gut_mode: GutSelection,
    pub info: InfoMode,
    pub monster_policy: MonsterPolicy,
    pub treasure: Vec2,
    pub obstacles: Vec<Obstacle>,
    pub explorer_spawn: SpawnDisc,
    pub monster_region: SpawnRect,
    pub world: WorldParams,
    pub cost_table: CostTable,
    pub win_coeffs: WinCoeffs,
    pub energy_coeffs: EnergyCoeffs,
    pub hp_coeffs: HpCoeffs,
    pub modifiers: CellModifiers,
    pub regression: RegressionCoeffs,
    pub abilities: AbilityParams,
    pub explorer_size: f64,
    pub monster_size: f64,
    pub press_threshold: f64,
    pub cautious_speed_factor: f64,
    pub formation_spacing: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let policy = PolicyConfig::default();
        ScenarioConfig {
            version: 1,
            explorers: 25,
            monsters: 25,
            policy: PolicyMode::Gut,
            gut_mode: GutSelection::Greedy,
            info: InfoMode::Complete,
            monster_policy: MonsterPolicy::Nearest,
            treasure: Vec2::new(90.0, 50.0),
            obstacles: Vec::new(),
            explorer_spawn: SpawnDisc::default(),
            monster_region: SpawnRect::default(),
            world: WorldParams::default(),
            cost_table: CostTable::default(),
            win_coeffs: policy.win_coeffs,
            energy_coeffs: policy.energy_coeffs,
            hp_coeffs: policy.hp_coeffs,
            modifiers: policy.modifiers,
            regression: policy.regression,
            abilities: policy.abilities,
            explorer_size: policy.explorer_size,
            monster_size: policy.monster_size,
            press_threshold: policy.press_threshold,
            cautious_speed_factor: policy.cautious_speed_factor,
            formation_spacing: policy.formation_spacing,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid { field: field.into(), message: message.into() }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.explorers == 0 {
            return Err(invalid("explorers", "at least one explorer is required"));
        }
        if self.world.comm_radius <= self.world.sensing_radius {
            return Err(invalid(
                "comm_radius",
                format!(
                    "must exceed sensing_radius ({} <= {})",
                    self.world.comm_radius, self.world.sensing_radius
                ),
            ));
        }
        if !(self.world.speed > 0.0) {
            return Err(invalid("world.speed", "must be positive"));
        }
        if !(self.world.arena > 0.0) {
            return Err(invalid("world.arena", "must be positive"));
        }
        if self.world.tick_cap == 0 {
            return Err(invalid("world.tick_cap", "must be at least 1"));
        }
        self.cost_table.validate().map_err(|e| invalid("cost_table", e.to_string()))?;
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(invalid("obstacles", format!("obstacle {i} radius must be positive")));
            }
            if o.contains(self.treasure) {
                return Err(invalid("obstacles", format!("obstacle {i} covers the treasure")));
            }
        }
        if !(0.0..=1.0).contains(&self.press_threshold) {
            return Err(invalid("press_threshold", "must lie in [0,1]"));
        }
        if !(self.cautious_speed_factor > 0.0 && self.cautious_speed_factor <= 1.0) {
            return Err(invalid("cautious_speed_factor", "must lie in (0,1]"));
        }
        if !(self.formation_spacing > 0.0) {
            return Err(invalid("formation_spacing", "must be positive"));
        }
        if self.explorer_spawn.radius < 0.0 {
            return Err(invalid("explorer_spawn", "radius must be nonnegative"));
        }
        if self.monster_region.min.x > self.monster_region.max.x
            || self.monster_region.min.y > self.monster_region.max.y
        {
            return Err(invalid("monster_region", "min corner must not exceed max corner"));
        }
        Ok(())
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            mode: self.policy,
            monster_policy: self.monster_policy,
            info: self.info,
            gut_selection: self.gut_mode,
            win_coeffs: self.win_coeffs,
            energy_coeffs: self.energy_coeffs,
            hp_coeffs: self.hp_coeffs,
            modifiers: self.modifiers,
            regression: self.regression,
            abilities: self.abilities,
            explorer_size: self.explorer_size,
            monster_size: self.monster_size,
            press_threshold: self.press_threshold,
            cautious_speed_factor: self.cautious_speed_factor,
            formation_spacing: self.formation_spacing,
        }
    }
}

/// Load and validate a scenario file. Parse and validation errors name the
/// offending input.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, HarnessError> {
    let text = fs::read_to_string(path)?;
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed derivation; order-independent across trials.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_add(0x5151_7EA6_57B1_14D1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    ExplorersWin,
    MonstersWin,
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Winner::ExplorersWin => write!(f, "ExplorersWin"),
            Winner::MonstersWin => write!(f, "MonstersWin"),
        }
    }
}

/// Outcome record of a single trial, all costs summed off the agent
/// ledgers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialMetrics {
    pub seed: u64,
    pub winner: Winner,
    pub ticks: u64,
    pub explorer_avg_hp_cost: f64,
    pub explorers_lost_per_monster_killed: f64,
    pub hp_cost_per_monster_killed: f64,
    pub system_energy_cost: f64,
    pub system_hp_cost: f64,
}

fn sample_in_disc(rng: &mut ChaCha8Rng, disc: &SpawnDisc, arena: f64, obstacles: &[Obstacle]) -> Vec2 {
    loop {
        let x = rng.random_range(-1.0..=1.0);
        let y = rng.random_range(-1.0..=1.0);
        if x * x + y * y > 1.0 {
            continue;
        }
        let p = disc.center + Vec2::new(x, y) * disc.radius;
        let p = Vec2::new(p.x.clamp(0.0, arena), p.y.clamp(0.0, arena));
        if obstacles.iter().all(|o| !o.contains(p)) {
            return p;
        }
    }
}

fn sample_in_rect(rng: &mut ChaCha8Rng, rect: &SpawnRect, arena: f64, obstacles: &[Obstacle]) -> Vec2 {
    loop {
        let x = rng.random_range(rect.min.x..=rect.max.x);
        let y = rng.random_range(rect.min.y..=rect.max.y);
        let p = Vec2::new(x.clamp(0.0, arena), y.clamp(0.0, arena));
        if obstacles.iter().all(|o| !o.contains(p)) {
            return p;
        }
    }
}

fn build_world(config: &ScenarioConfig, seed: u64) -> Result<WorldState, HarnessError> {
    let mut spawn_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let explorer_positions: Vec<Vec2> = (0..config.explorers)
        .map(|_| sample_in_disc(&mut spawn_rng, &config.explorer_spawn, config.world.arena, &config.obstacles))
        .collect();
    let monster_positions: Vec<Vec2> = (0..config.monsters)
        .map(|_| sample_in_rect(&mut spawn_rng, &config.monster_region, config.world.arena, &config.obstacles))
        .collect();
    Ok(WorldState::new(
        config.world.clone(),
        config.cost_table,
        config.treasure,
        config.obstacles.clone(),
        explorer_positions,
        monster_positions,
    )?)
}

/// Build the pieces of a seeded trial without running it, for callers that
/// want to drive the tick loop themselves.
pub fn init_trial(
    config: &ScenarioConfig,
    seed: u64,
) -> Result<(WorldState, PolicyEngine, ChaCha8Rng), HarnessError> {
    config.validate()?;
    let world = build_world(config, seed)?;
    let engine = PolicyEngine::new(config.policy_config());
    let noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    Ok((world, engine, noise_rng))
}

/// Run one trial to completion and compute its metrics.
pub fn run_trial(config: &ScenarioConfig, seed: u64) -> Result<TrialMetrics, HarnessError> {
    config.validate()?;
    let mut world = build_world(config, seed)?;
    let mut engine = PolicyEngine::new(config.policy_config());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));

    let winner = loop {
        match outcome(&world) {
            Outcome::ExplorersWin => break Winner::ExplorersWin,
            Outcome::MonstersWin => break Winner::MonstersWin,
            Outcome::Ongoing => step(&mut world, &mut engine, &mut noise_rng),
        }
    };

    let explorer_count = config.explorers as f64;
    let system_hp_cost: f64 = world.explorers().map(|a| a.hp_lost()).sum();
    let system_energy_cost: f64 = world.explorers().map(|a| a.energy_spent()).sum();
    let explorers_lost = world.explorers().filter(|a| !a.alive).count() as f64;
    let monsters_killed = world.monsters().filter(|a| !a.alive).count() as f64;
    let per_kill = |num: f64| if monsters_killed > 0.0 { num / monsters_killed } else { 0.0 };

    Ok(TrialMetrics {
        seed,
        winner,
        ticks: world.tick,
        explorer_avg_hp_cost: system_hp_cost / explorer_count,
        explorers_lost_per_monster_killed: per_kill(explorers_lost),
        hp_cost_per_monster_killed: per_kill(system_hp_cost),
        system_energy_cost,
        system_hp_cost,
    })
}

/// Batch aggregate. Per-cost means are taken over winning trials only.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchMetrics {
    pub master_seed: u64,
    pub trials: Vec<TrialMetrics>,
    pub win_rate: f64,
    pub mean_ticks_win: f64,
    pub mean_explorer_avg_hp_cost_win: f64,
    pub mean_explorers_lost_per_kill_win: f64,
    pub mean_hp_cost_per_kill_win: f64,
    pub mean_system_energy_cost_win: f64,
    pub mean_system_hp_cost_win: f64,
}

/// Run `trials` seeded trials (in parallel) and aggregate in trial order.
pub fn run_batch(
    config: &ScenarioConfig,
    trials: usize,
    master_seed: u64,
) -> Result<BatchMetrics, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::Trial("at least one trial is required".into()));
    }
    config.validate()?;
    let results: Result<Vec<TrialMetrics>, HarnessError> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(config, derive_seed(master_seed, i as u64)))
        .collect();
    let trials_vec = results?;

    let wins: Vec<&TrialMetrics> =
        trials_vec.iter().filter(|t| t.winner == Winner::ExplorersWin).collect();
    let win_rate = wins.len() as f64 / trials_vec.len() as f64;
    let mean = |f: &dyn Fn(&TrialMetrics) -> f64| {
        if wins.is_empty() {
            0.0
        } else {
            wins.iter().map(|t| f(t)).sum::<f64>() / wins.len() as f64
        }
    };

    Ok(BatchMetrics {
        master_seed,
        win_rate,
        mean_ticks_win: mean(&|t| t.ticks as f64),
        mean_explorer_avg_hp_cost_win: mean(&|t| t.explorer_avg_hp_cost),
        mean_explorers_lost_per_kill_win: mean(&|t| t.explorers_lost_per_monster_killed),
        mean_hp_cost_per_kill_win: mean(&|t| t.hp_cost_per_monster_killed),
        mean_system_energy_cost_win: mean(&|t| t.system_energy_cost),
        mean_system_hp_cost_win: mean(&|t| t.system_hp_cost),
        trials: trials_vec,
    })
}

pub const CSV_HEADER: &str = "trial,seed,winner,ticks,explorer_avg_hp_cost,explorers_lost_per_kill,hp_cost_per_kill,system_energy_cost,system_hp_cost";

/// Render a batch as CSV: header, one row per trial, one summary row.
/// Cost metrics carry six decimal places; identifiers and tick counts are
/// integers.
pub fn csv_string(batch: &BatchMetrics) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, t) in batch.trials.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            i,
            t.seed,
            t.winner,
            t.ticks,
            t.explorer_avg_hp_cost,
            t.explorers_lost_per_monster_killed,
            t.hp_cost_per_monster_killed,
            t.system_energy_cost,
            t.system_hp_cost,
        ));
    }
    out.push_str(&format!(
        "summary,{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        batch.master_seed,
        batch.win_rate,
        batch.mean_ticks_win,
        batch.mean_explorer_avg_hp_cost_win,
        batch.mean_explorers_lost_per_kill_win,
        batch.mean_hp_cost_per_kill_win,
        batch.mean_system_energy_cost_win,
        batch.mean_system_hp_cost_win,
    ));
    out
}

/// Write the batch CSV to a file.
pub fn write_csv(batch: &BatchMetrics, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    fs::write(path, csv_string(batch))?;
    Ok(())
}

/// Classification of the scenario's opposition under the needs test:
/// monsters change their own expected payoff when facing the team
/// (intentional), terrain does not (unintentional).
pub fn classify_scenario(
    config: &ScenarioConfig,
) -> Result<(Option<AdversaryClass>, Option<AdversaryClass>), HarnessError> {
    let teaming = |p: f64| NeedSpec {
        kind: NeedKind::Teaming,
        weights: vec![1.0],
        probabilities: vec![p.clamp(0.0, 1.0)],
    };
    let need = |p: f64| need_expectation(&teaming(p)).map_err(|e| HarnessError::Trial(e.to_string()));

    // Corridor from spawn to treasure, as wide as the spawn disc; an
    // obstacle crossing it forces a detour and lowers the reachable need.
    let blocked = config.obstacles.iter().any(|o| {
        let a = config.explorer_spawn.center;
        let b = config.treasure;
        let ab = b - a;
        let t = ((o.center - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
        (a + ab * t).dist(o.center) < o.radius + config.explorer_spawn.radius
    });
    let detour_factor = if blocked { 0.9 } else { 1.0 };

    let alone = need(1.0)?;

    let monster_class = if config.monsters > 0 {
        let obs = EngagementObs {
            explorers: config.explorers,
            monsters: config.monsters,
            explorer_attack_level: config.abilities.explorer_attack,
            explorer_defend_level: config.abilities.explorer_defend,
            monster_attack_level: config.abilities.monster_attack,
            monster_defend_level: config.abilities.monster_defend,
            ..EngagementObs::default()
        };
        let team_win = winning_probability(&obs, &config.win_coeffs, true)
            .map_err(|e| HarnessError::Trial(e.to_string()))?;
        let with_monsters = need(team_win * detour_factor)?;

        // The monster side expects to gain the complement of the team's
        // winning probability; on its own it has nothing at stake.
        let expected_facing = need(1.0 - team_win)?;
        let current = need(0.0)?;
        Some(classify(alone, with_monsters, expected_facing, current, 1e-9))
    } else {
        None
    };

    let obstacle_class = if config.obstacles.is_empty() {
        None
    } else {
        let with_obstacles = need(detour_factor)?;
        // Terrain wants nothing: expected and current needs coincide.
        Some(classify(alone, with_obstacles, 0.0, 0.0, 1e-9))
    };

    Ok((monster_class, obstacle_class))
}

//! Team and monster policies.
//!
//! Three explorer policies are wired in:
//!
//! * `Gut` — full communication: the team fuses every member's perception,
//!   runs the three-level tree once per monster-count change, and acts on
//!   one shared decision (formation shape, focused target, group split).
//!   The team keeps advancing on the treasure; the solved level-one value
//!   gates between a full-speed press and a cautious crawl.
//! * `Qmix` — partial communication: each explorer evaluates a local
//!   winning rate from the head counts it can see or hear about, attacks
//!   the weakest monster it knows of when the rate is good, holds
//!   otherwise, and walks to the treasure when nothing is in sight.
//! * `QmixGut` — no cooperation: each explorer runs its own private tree
//!   over local information and chases its own pick; nobody agrees on a
//!   target.
//!
//! Monsters are self-interested: by default each one attacks its nearest
//! explorer; a scenario can switch them to the local winning-rate rule.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::adversary::{predict_linear, predict_poly, RegressionCoeffs};
use crate::geom::Vec2;
use crate::gut::{self, GutError, GutSpec, LevelSpec, StrategyPath};
use crate::util_model::{
    payoff_level1, payoff_level2, payoff_level3, winning_probability, CellModifiers, EnergyCoeffs,
    EngagementObs, HpCoeffs, WinCoeffs, LEVEL1_EXPLORER_ACTIONS, LEVEL1_MONSTER_ACTIONS,
    LEVEL2_EXPLORER_ACTIONS, LEVEL2_MONSTER_ACTIONS, LEVEL3_EXPLORER_ACTIONS,
    LEVEL3_MONSTER_ACTIONS,
};
use crate::world::{FormationShape, Side, WorldState, INITIAL_HP};

use super::formation_targets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    Gut,
    Qmix,
    QmixGut,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonsterPolicy {
    Nearest,
    Qmix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoMode {
    Complete,
    Linear,
    Poly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GutSelection {
    Greedy,
    Map,
}

/// Side ability levels at full energy; current levels scale with energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbilityParams {
    pub explorer_attack: f64,
    pub explorer_defend: f64,
    pub monster_attack: f64,
    pub monster_defend: f64,
}

impl Default for AbilityParams {
    fn default() -> Self {
        AbilityParams { explorer_attack: 1.0, explorer_defend: 1.0, monster_attack: 1.0, monster_defend: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub monster_policy: MonsterPolicy,
    pub info: InfoMode,
    pub gut_selection: GutSelection,
    pub win_coeffs: WinCoeffs,
    pub energy_coeffs: EnergyCoeffs,
    pub hp_coeffs: HpCoeffs,
    pub modifiers: CellModifiers,
    pub regression: RegressionCoeffs,
    pub abilities: AbilityParams,
    pub explorer_size: f64,
    pub monster_size: f64,
    /// Press when the solved level-one value (a winning probability) is at
    /// least this.
    pub press_threshold: f64,
    /// Advance speed factor while in the cautious posture.
    pub cautious_speed_factor: f64,
    pub formation_spacing: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            mode: PolicyMode::Gut,
            monster_policy: MonsterPolicy::Nearest,
            info: InfoMode::Complete,
            gut_selection: GutSelection::Greedy,
            win_coeffs: WinCoeffs::default(),
            energy_coeffs: EnergyCoeffs::default(),
            hp_coeffs: HpCoeffs::default(),
            modifiers: CellModifiers::default(),
            regression: RegressionCoeffs::default(),
            abilities: AbilityParams::default(),
            explorer_size: 1.0,
            monster_size: 1.0,
            press_threshold: 0.5,
            cautious_speed_factor: 0.4,
            formation_spacing: 3.0,
        }
    }
}

/// What one agent wants to do this tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intent {
    pub move_to: Option<Vec2>,
    pub attack: Option<usize>,
    pub speed_factor: f64,
}

impl Intent {
    pub fn idle() -> Self {
        Intent { move_to: None, attack: None, speed_factor: 1.0 }
    }
}

/// Fixed per-agent behavior for scripted bookkeeping tests: move along a
/// constant direction, hammer one victim, optionally join communication.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptEntry {
    pub move_dir: Option<Vec2>,
    pub attack: Option<usize>,
    pub communicates: bool,
}

/// A monster as currently known to the explorer side. Under incomplete
/// information the state fields are regression estimates, not ground truth.
#[derive(Clone, Copy, Debug)]
pub struct MonsterView {
    pub id: usize,
    pub position: Vec2,
    pub hp_est: f64,
    pub energy_est: f64,
    pub attack_est: f64,
}

/// The team-level decision extracted from one tree evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct TeamDecision {
    pub shape: FormationShape,
    /// Level-two row: 0 nearest, 1 weakest state, 2 highest attack.
    pub target_rule: usize,
    /// Concrete monster chosen at decision time.
    pub target: Option<usize>,
    pub groups: usize,
    pub press: bool,
    pub path: StrategyPath,
}

#[derive(Clone, Debug, Default)]
pub struct GutPolicyState {
    cached: Option<TeamDecision>,
    last_monster_count: Option<usize>,
}

impl GutPolicyState {
    pub fn cached(&self) -> Option<&TeamDecision> {
        self.cached.as_ref()
    }
}

pub struct PolicyEngine {
    pub cfg: PolicyConfig,
    gut_spec: GutSpec,
    team_state: GutPolicyState,
    agent_states: Vec<GutPolicyState>,
    script: Option<Vec<ScriptEntry>>,
}

fn build_gut_spec(cfg: &PolicyConfig) -> GutSpec {
    let to_labels = |labels: &[&str]| labels.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let (wc, ec, hc, mods) = (cfg.win_coeffs, cfg.energy_coeffs, cfg.hp_coeffs, cfg.modifiers);
    let levels = vec![
        LevelSpec::new(
            1,
            to_labels(&LEVEL1_EXPLORER_ACTIONS),
            to_labels(&LEVEL1_MONSTER_ACTIONS),
            Arc::new(move |obs: &EngagementObs, _| payoff_level1(obs, &wc, &mods)),
        )
        .expect("static level"),
        LevelSpec::new(
            2,
            to_labels(&LEVEL2_EXPLORER_ACTIONS),
            to_labels(&LEVEL2_MONSTER_ACTIONS),
            Arc::new(move |obs: &EngagementObs, _| payoff_level2(obs, &ec, &mods)),
        )
        .expect("static level"),
        LevelSpec::new(
            3,
            to_labels(&LEVEL3_EXPLORER_ACTIONS),
            to_labels(&LEVEL3_MONSTER_ACTIONS),
            Arc::new(move |obs: &EngagementObs, _| payoff_level3(obs, &hc, &mods)),
        )
        .expect("static level"),
    ];
    GutSpec::new(levels).expect("static spec")
}

impl PolicyEngine {
    pub fn new(cfg: PolicyConfig) -> Self {
        let gut_spec = build_gut_spec(&cfg);
        PolicyEngine { cfg, gut_spec, team_state: GutPolicyState::default(), agent_states: Vec::new(), script: None }
    }

    /// Engine that replays fixed per-agent scripts; used to exercise the
    /// bookkeeping with exactly known event counts.
    pub fn scripted(script: Vec<ScriptEntry>) -> Self {
        let cfg = PolicyConfig::default();
        let gut_spec = build_gut_spec(&cfg);
        PolicyEngine { cfg, gut_spec, team_state: GutPolicyState::default(), agent_states: Vec::new(), script: Some(script) }
    }

    pub fn gut_spec(&self) -> &GutSpec {
        &self.gut_spec
    }

    pub fn team_state(&self) -> &GutPolicyState {
        &self.team_state
    }

    /// Explorers that exchange information this tick (and pay for it).
    pub fn communicating_explorers(&self, world: &WorldState) -> Vec<usize> {
        if let Some(script) = &self.script {
            return world
                .agents
                .iter()
                .filter(|a| a.alive && script.get(a.id).is_some_and(|s| s.communicates))
                .map(|a| a.id)
                .collect();
        }
        let explorers: Vec<usize> = world.living(Side::Explorer).map(|a| a.id).collect();
        match self.cfg.mode {
            // Full communication: the whole team talks every round.
            PolicyMode::Gut => {
                if explorers.len() >= 2 {
                    explorers
                } else {
                    Vec::new()
                }
            }
            // Partial communication: only agents with a peer in range.
            PolicyMode::Qmix | PolicyMode::QmixGut => explorers
                .iter()
                .copied()
                .filter(|&id| {
                    explorers.iter().any(|&other| {
                        other != id
                            && world.agents[id].position.dist(world.agents[other].position)
                                <= world.params.comm_radius
                    })
                })
                .collect(),
        }
    }

    /// The peers an explorer consults when adapting around an obstacle.
    pub fn comm_group(&self, world: &WorldState, id: usize, comm_ids: &[usize]) -> Vec<usize> {
        match self.cfg.mode {
            PolicyMode::Gut if self.script.is_none() => {
                comm_ids.iter().copied().filter(|&p| p != id).collect()
            }
            _ => world
                .living(Side::Explorer)
                .filter(|a| {
                    a.id != id
                        && a.position.dist(world.agents[id].position) <= world.params.comm_radius
                })
                .map(|a| a.id)
                .collect(),
        }
    }

    pub fn decide(&mut self, world: &WorldState, rng: &mut ChaCha8Rng) -> Vec<Intent> {
        let mut intents = vec![Intent::idle(); world.agents.len()];
        if let Some(script) = &self.script {
            for a in &world.agents {
                if let Some(entry) = script.get(a.id) {
                    intents[a.id] = Intent {
                        move_to: entry.move_dir.map(|d| a.position + d.normalized() * 1e6),
                        attack: entry.attack,
                        speed_factor: 1.0,
                    };
                }
            }
            return intents;
        }
        match self.cfg.mode {
            PolicyMode::Gut => self.gut_team_intents(world, rng, &mut intents),
            PolicyMode::Qmix => self.qmix_intents(world, rng, &mut intents),
            PolicyMode::QmixGut => self.qmix_gut_intents(world, rng, &mut intents),
        }
        self.monster_intents(world, &mut intents);
        intents
    }

    fn perceived_monsters_of(&self, world: &WorldState, id: usize) -> Vec<usize> {
        let pos = world.agents[id].position;
        world
            .living(Side::Monster)
            .filter(|m| m.position.dist(pos) <= world.params.sensing_radius)
            .map(|m| m.id)
            .collect()
    }

    /// Estimated views of a set of monsters, honoring the info mode.
    fn monster_views(
        &self,
        world: &WorldState,
        ids: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Vec<MonsterView> {
        let cfg = &self.cfg;
        let hp_unit = world.cost_table.explorer_attacked_hp;
        ids.iter()
            .map(|&id| {
                let m = &world.agents[id];
                let (hp_est, energy_est) = match cfg.info {
                    InfoMode::Complete => (m.hp, m.energy),
                    InfoMode::Linear | InfoMode::Poly => {
                        // Damage already dealt to this monster is observable
                        // and serves as its state regressor.
                        let observed_damage = INITIAL_HP - m.hp;
                        let p = match cfg.info {
                            InfoMode::Linear => {
                                predict_linear(hp_unit, observed_damage, &cfg.regression, rng)
                            }
                            _ => predict_poly(hp_unit, observed_damage, &cfg.regression, rng),
                        };
                        (p.energy_level, p.energy_level)
                    }
                };
                MonsterView {
                    id,
                    position: m.position,
                    hp_est,
                    energy_est,
                    attack_est: cfg.abilities.monster_attack * energy_est / 100.0,
                }
            })
            .collect()
    }

    /// Fused team observation for the tree, with opponent state either read
    /// off the world or predicted from HP-cost regressors.
    fn team_engagement(
        &self,
        world: &WorldState,
        views: &[MonsterView],
        rng: &mut ChaCha8Rng,
    ) -> EngagementObs {
        let cfg = &self.cfg;
        let explorers: Vec<_> = world.living(Side::Explorer).collect();
        let n = explorers.len();
        let mean_energy =
            explorers.iter().map(|a| a.energy).sum::<f64>() / n.max(1) as f64;
        let centroid =
            explorers.iter().fold(Vec2::ZERO, |acc, a| acc + a.position) * (1.0 / n.max(1) as f64);
        let monster_centroid =
            views.iter().fold(Vec2::ZERO, |acc, v| acc + v.position) * (1.0 / views.len().max(1) as f64);
        let distance = centroid.dist(monster_centroid).max(1e-6);

        let (monster_energy, monster_unit_cost) = match cfg.info {
            InfoMode::Complete => {
                let mean = views.iter().map(|v| v.energy_est).sum::<f64>() / views.len().max(1) as f64;
                (mean, world.cost_table.monster_attack_energy)
            }
            InfoMode::Linear | InfoMode::Poly => {
                let hp_unit = world.cost_table.explorer_attacked_hp;
                let system_hp_cost: f64 = world.explorers().map(|a| a.hp_lost()).sum();
                let p = match cfg.info {
                    InfoMode::Linear => predict_linear(hp_unit, system_hp_cost, &cfg.regression, rng),
                    _ => predict_poly(hp_unit, system_hp_cost, &cfg.regression, rng),
                };
                (p.energy_level, p.unit_energy_cost.max(0.0))
            }
        };

        EngagementObs {
            explorers: n,
            monsters: views.len(),
            distance,
            speed: world.params.speed,
            explorer_attack_cost: world.cost_table.explorer_attack_energy,
            monster_attack_cost: monster_unit_cost,
            explorer_attack_level: cfg.abilities.explorer_attack * mean_energy / 100.0,
            monster_attack_level: cfg.abilities.monster_attack * monster_energy / 100.0,
            explorer_defend_level: cfg.abilities.explorer_defend * mean_energy / 100.0,
            monster_defend_level: cfg.abilities.monster_defend * monster_energy / 100.0,
            focal_explorer_attack: cfg.hp_coeffs.gamma_e * mean_energy,
            focal_monster_attack: cfg.hp_coeffs.gamma_m * monster_energy,
            focal_explorer_defend: cfg.hp_coeffs.delta_e * mean_energy,
            focal_monster_defend: cfg.hp_coeffs.delta_m * monster_energy,
            explorer_size: cfg.explorer_size,
            monster_size: cfg.monster_size,
            explorer_attackers: n.max(1),
            monster_attackers: 1,
            explorer_energy: mean_energy,
            monster_energy,
        }
    }

    fn select_path(&self, obs: &EngagementObs) -> Result<StrategyPath, GutError> {
        match self.cfg.gut_selection {
            GutSelection::Greedy => gut::decide(&self.gut_spec, obs),
            GutSelection::Map => gut::map_assignment(&self.gut_spec, obs),
        }
    }

    /// Team decision for the current fused observation, re-solving the tree
    /// only when the perceived monster count changes.
    pub fn gut_policy(
        &mut self,
        world: &WorldState,
        views: &[MonsterView],
        obs: &EngagementObs,
    ) -> Result<TeamDecision, GutError> {
        let count = views.len();
        let needs_recompute = self.team_state.last_monster_count != Some(count)
            || self.team_state.cached.is_none();
        if needs_recompute {
            let decision = if count == 0 {
                let treasure_sensed = world.living(Side::Explorer).any(|a| {
                    a.position.dist(world.treasure) <= world.params.sensing_radius
                });
                TeamDecision {
                    shape: if treasure_sensed { FormationShape::Circle } else { FormationShape::Patrol },
                    target_rule: 0,
                    target: None,
                    groups: 1,
                    press: true,
                    path: StrategyPath { steps: Vec::new(), joint_prob: 1.0 },
                }
            } else {
                let path = self.select_path(obs)?;
                let shape = if path.steps[0].row == 0 {
                    FormationShape::Triangle
                } else {
                    FormationShape::RegularPolygon
                };
                let target_rule = path.steps[1].row;
                let groups = path.steps[2].row + 1;
                let unit = gut::evaluate_unit(&self.gut_spec.levels()[0], obs, 1.0)?;
                let press = unit.solution.value >= self.cfg.press_threshold;
                let ranked = rank_targets(target_rule, views, monster_reference(world));
                TeamDecision {
                    shape,
                    target_rule,
                    target: ranked.first().map(|v| v.id),
                    groups,
                    press,
                    path,
                }
            };
            self.team_state.cached = Some(decision);
            self.team_state.last_monster_count = Some(count);
        }
        Ok(self.team_state.cached.clone().expect("just cached"))
    }

    fn gut_team_intents(&mut self, world: &WorldState, rng: &mut ChaCha8Rng, intents: &mut [Intent]) {
        let explorer_ids: Vec<usize> = world.living(Side::Explorer).map(|a| a.id).collect();
        if explorer_ids.is_empty() {
            return;
        }
        let mut perceived: Vec<usize> = Vec::new();
        for &id in &explorer_ids {
            perceived.extend(self.perceived_monsters_of(world, id));
        }
        perceived.sort_unstable();
        perceived.dedup();

        let views = self.monster_views(world, &perceived, rng);
        let obs = self.team_engagement(world, &views, rng);
        let decision = match self.gut_policy(world, &views, &obs) {
            Ok(d) => d,
            Err(_) => return,
        };

        let centroid = world.centroid(Side::Explorer).unwrap_or(world.treasure);
        let advance = (world.treasure - centroid).normalized();
        let speed_factor = if decision.press { 1.0 } else { self.cfg.cautious_speed_factor };

        // Group split: round-robin by rank; each group leans on its own
        // ranked target so the fire concentrates per group.
        let groups = decision.groups.max(1);
        let ranked = rank_targets(decision.target_rule, &views, centroid);
        let spacing = if decision.shape == FormationShape::Circle {
            world.params.treasure_radius * 0.6
        } else {
            self.cfg.formation_spacing
        };
        let lateral = advance.perp();

        for g in 0..groups {
            let members: Vec<usize> =
                explorer_ids.iter().copied().skip(g).step_by(groups).collect();
            if members.is_empty() {
                continue;
            }
            let group_target = (!ranked.is_empty()).then(|| &ranked[g % ranked.len()]);
            let anchor = if decision.shape == FormationShape::Circle {
                world.treasure
            } else {
                let offset = (g as f64 - (groups as f64 - 1.0) / 2.0) * spacing * 4.0;
                centroid + advance * (world.params.speed * 2.0) + lateral * offset
            };
            let slots = formation_targets(decision.shape, members.len(), anchor, spacing);
            for (slot, &id) in slots.iter().zip(&members) {
                let me = &world.agents[id];
                // Focus fire on the group target when it is already in
                // reach, otherwise hit whatever is.
                let in_range = |target: &MonsterView| {
                    me.position.dist(target.position) <= world.params.attack_range
                };
                let attack = match group_target {
                    Some(t) if decision.press && in_range(t) => Some(t.id),
                    _ => nearest_in_range(world, me.position, &views),
                };
                intents[id] = Intent { move_to: Some(*slot), attack, speed_factor };
            }
        }
    }

    /// Local winning rate from head counts, on full-energy abilities.
    fn local_win_rate(&self, own: usize, opposing: usize, explorer_side: bool) -> f64 {
        let a = &self.cfg.abilities;
        let mut obs = EngagementObs {
            explorers: own.max(1),
            monsters: opposing,
            ..EngagementObs::default()
        };
        if explorer_side {
            obs.explorer_attack_level = a.explorer_attack;
            obs.explorer_defend_level = a.explorer_defend;
            obs.monster_attack_level = a.monster_attack;
            obs.monster_defend_level = a.monster_defend;
        } else {
            obs.explorer_attack_level = a.monster_attack;
            obs.explorer_defend_level = a.monster_defend;
            obs.monster_attack_level = a.explorer_attack;
            obs.monster_defend_level = a.explorer_defend;
        }
        winning_probability(&obs, &self.cfg.win_coeffs, true).unwrap_or(0.0)
    }

    /// Monsters an explorer knows about: own sensing plus one-hop shares.
    fn shared_monsters(&self, world: &WorldState, id: usize) -> Vec<usize> {
        let mut ids = self.perceived_monsters_of(world, id);
        for peer in world.living(Side::Explorer) {
            if peer.id != id
                && peer.position.dist(world.agents[id].position) <= world.params.comm_radius
            {
                ids.extend(self.perceived_monsters_of(world, peer.id));
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn local_explorer_count(&self, world: &WorldState, id: usize) -> usize {
        let pos = world.agents[id].position;
        world
            .living(Side::Explorer)
            .filter(|a| a.position.dist(pos) <= world.params.sensing_radius)
            .count()
    }

    fn qmix_intents(&mut self, world: &WorldState, rng: &mut ChaCha8Rng, intents: &mut [Intent]) {
        let explorer_ids: Vec<usize> = world.living(Side::Explorer).map(|a| a.id).collect();
        for &id in &explorer_ids {
            let monsters = self.shared_monsters(world, id);
            if monsters.is_empty() {
                intents[id] = Intent {
                    move_to: Some(world.treasure),
                    attack: None,
                    speed_factor: 1.0,
                };
                continue;
            }
            let n_loc = self.local_explorer_count(world, id);
            let w = self.local_win_rate(n_loc, monsters.len(), true);
            if w >= 0.5 {
                let views = self.monster_views(world, &monsters, rng);
                // Greedy choice: the monster with the lowest known HP.
                let target = views
                    .iter()
                    .min_by(|a, b| {
                        a.hp_est.partial_cmp(&b.hp_est).unwrap().then(a.id.cmp(&b.id))
                    })
                    .expect("nonempty");
                intents[id] = Intent {
                    move_to: Some(target.position),
                    attack: Some(target.id),
                    speed_factor: 1.0,
                };
            } else {
                intents[id] = Intent::idle(); // defend: hold position
            }
        }
    }

    fn qmix_gut_intents(&mut self, world: &WorldState, rng: &mut ChaCha8Rng, intents: &mut [Intent]) {
        if self.agent_states.len() < world.agents.len() {
            self.agent_states.resize_with(world.agents.len(), GutPolicyState::default);
        }
        let explorer_ids: Vec<usize> = world.living(Side::Explorer).map(|a| a.id).collect();
        for &id in &explorer_ids {
            let monsters = self.shared_monsters(world, id);
            if monsters.is_empty() {
                self.agent_states[id].last_monster_count = Some(0);
                self.agent_states[id].cached = None;
                intents[id] = Intent {
                    move_to: Some(world.treasure),
                    attack: None,
                    speed_factor: 1.0,
                };
                continue;
            }
            let views = self.monster_views(world, &monsters, rng);
            let me = &world.agents[id];
            let obs = self.solo_engagement(world, me.id, &views, rng);

            let state = &mut self.agent_states[id];
            let needs_recompute =
                state.last_monster_count != Some(monsters.len()) || state.cached.is_none();
            if needs_recompute {
                let Ok(path) = (match self.cfg.gut_selection {
                    GutSelection::Greedy => gut::decide(&self.gut_spec, &obs),
                    GutSelection::Map => gut::map_assignment(&self.gut_spec, &obs),
                }) else {
                    continue;
                };
                let Ok(unit) = gut::evaluate_unit(&self.gut_spec.levels()[0], &obs, 1.0) else {
                    continue;
                };
                let decision = TeamDecision {
                    shape: if path.steps[0].row == 0 {
                        FormationShape::Triangle
                    } else {
                        FormationShape::RegularPolygon
                    },
                    target_rule: path.steps[1].row,
                    target: None,
                    groups: path.steps[2].row + 1,
                    press: unit.solution.value >= self.cfg.press_threshold,
                    path,
                };
                state.cached = Some(decision);
                state.last_monster_count = Some(monsters.len());
            }
            let decision = self.agent_states[id].cached.clone().expect("cached above");

            if decision.press {
                // Chase its very own pick; no consistency across agents.
                let ranked = rank_targets(decision.target_rule, &views, me.position);
                let target = &ranked[0];
                intents[id] = Intent {
                    move_to: Some(target.position),
                    attack: Some(target.id),
                    speed_factor: 1.0,
                };
            } else {
                intents[id] = Intent::idle();
            }
        }
    }

    /// One agent's private engagement picture (no team fusion).
    fn solo_engagement(
        &self,
        world: &WorldState,
        id: usize,
        views: &[MonsterView],
        rng: &mut ChaCha8Rng,
    ) -> EngagementObs {
        let cfg = &self.cfg;
        let me = &world.agents[id];
        let monster_centroid =
            views.iter().fold(Vec2::ZERO, |acc, v| acc + v.position) * (1.0 / views.len().max(1) as f64);
        let n_loc = self.local_explorer_count(world, id);

        let (monster_energy, monster_unit_cost) = match cfg.info {
            InfoMode::Complete => {
                let mean = views.iter().map(|v| v.energy_est).sum::<f64>() / views.len().max(1) as f64;
                (mean, world.cost_table.monster_attack_energy)
            }
            InfoMode::Linear | InfoMode::Poly => {
                let hp_unit = world.cost_table.explorer_attacked_hp;
                let p = match cfg.info {
                    InfoMode::Linear => predict_linear(hp_unit, me.hp_lost(), &cfg.regression, rng),
                    _ => predict_poly(hp_unit, me.hp_lost(), &cfg.regression, rng),
                };
                (p.energy_level, p.unit_energy_cost.max(0.0))
            }
        };

        EngagementObs {
            explorers: n_loc.max(1),
            monsters: views.len(),
            distance: me.position.dist(monster_centroid).max(1e-6),
            speed: world.params.speed,
            explorer_attack_cost: world.cost_table.explorer_attack_energy,
            monster_attack_cost: monster_unit_cost,
            explorer_attack_level: cfg.abilities.explorer_attack * me.energy / 100.0,
            monster_attack_level: cfg.abilities.monster_attack * monster_energy / 100.0,
            explorer_defend_level: cfg.abilities.explorer_defend * me.energy / 100.0,
            monster_defend_level: cfg.abilities.monster_defend * monster_energy / 100.0,
            focal_explorer_attack: cfg.hp_coeffs.gamma_e * me.energy,
            focal_monster_attack: cfg.hp_coeffs.gamma_m * monster_energy,
            focal_explorer_defend: cfg.hp_coeffs.delta_e * me.energy,
            focal_monster_defend: cfg.hp_coeffs.delta_m * monster_energy,
            explorer_size: cfg.explorer_size,
            monster_size: cfg.monster_size,
            explorer_attackers: n_loc.max(1),
            monster_attackers: 1,
            explorer_energy: me.energy,
            monster_energy,
        }
    }

    fn monster_intents(&self, world: &WorldState, intents: &mut [Intent]) {
        let monster_ids: Vec<usize> = world.living(Side::Monster).map(|a| a.id).collect();
        for &id in &monster_ids {
            let me = &world.agents[id];
            let visible: Vec<&crate::world::AgentState> = world
                .living(Side::Explorer)
                .filter(|e| e.position.dist(me.position) <= world.params.sensing_radius)
                .collect();
            if visible.is_empty() {
                continue;
            }
            match self.cfg.monster_policy {
                MonsterPolicy::Nearest => {
                    let target = visible
                        .iter()
                        .min_by(|a, b| {
                            let da = a.position.dist(me.position);
                            let db = b.position.dist(me.position);
                            da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
                        })
                        .expect("nonempty");
                    intents[id] = Intent {
                        move_to: Some(target.position),
                        attack: Some(target.id),
                        speed_factor: 1.0,
                    };
                }
                MonsterPolicy::Qmix => {
                    let own = world
                        .living(Side::Monster)
                        .filter(|m| m.position.dist(me.position) <= world.params.sensing_radius)
                        .count();
                    let w = self.local_win_rate(own, visible.len(), false);
                    if w >= 0.5 {
                        let target = visible
                            .iter()
                            .min_by(|a, b| {
                                a.hp.partial_cmp(&b.hp).unwrap().then(a.id.cmp(&b.id))
                            })
                            .expect("nonempty");
                        intents[id] = Intent {
                            move_to: Some(target.position),
                            attack: Some(target.id),
                            speed_factor: 1.0,
                        };
                    } else {
                        intents[id] = Intent::idle();
                    }
                }
            }
        }
    }
}

fn monster_reference(world: &WorldState) -> Vec2 {
    world.centroid(Side::Explorer).unwrap_or(world.treasure)
}

/// Order candidate targets under a level-two rule. Ties break by id, so the
/// ordering is total and deterministic.
pub fn rank_targets(rule: usize, views: &[MonsterView], reference: Vec2) -> Vec<MonsterView> {
    let mut ranked: Vec<MonsterView> = views.to_vec();
    match rule {
        0 => ranked.sort_by(|a, b| {
            let da = a.position.dist(reference);
            let db = b.position.dist(reference);
            da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
        }),
        1 => ranked.sort_by(|a, b| a.hp_est.partial_cmp(&b.hp_est).unwrap().then(a.id.cmp(&b.id))),
        _ => ranked.sort_by(|a, b| {
            b.attack_est.partial_cmp(&a.attack_est).unwrap().then(a.id.cmp(&b.id))
        }),
    }
    ranked
}

fn nearest_in_range(world: &WorldState, from: Vec2, views: &[MonsterView]) -> Option<usize> {
    views
        .iter()
        .filter(|v| from.dist(v.position) <= world.params.attack_range)
        .min_by(|a, b| {
            let da = from.dist(a.position);
            let db = from.dist(b.position);
            da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
        })
        .map(|v| v.id)
}

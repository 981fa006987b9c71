//! Deterministic discrete-time explorers-and-monsters simulation.
//!
//! Explorers try to reach a treasure; monsters intercept them. Both sides
//! carry two 0-100 resources: HP, drained by enemy hits, and energy,
//! drained by moving, attacking and communicating. Every deduction is
//! bookkept through per-agent event counters, so resource levels are exact
//! multiples of the configured costs at all times.
//!
//! A tick runs six phases in fixed order: perception and communication,
//! policy decisions, movement (obstacle-adjusted), attacks, death marking,
//! clock advance. All iteration is in agent-id order; with seeded inputs a
//! trial is reproducible tick by tick.

pub mod policy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use policy::{Intent, PolicyEngine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid world: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Explorer,
    Monster,
}

/// Flat per-event costs on the 0-100 resource scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub move_cost: f64,
    pub comm_cost: f64,
    pub explorer_attack_energy: f64,
    /// HP an explorer loses per hit received (the monster's attack power).
    pub explorer_attacked_hp: f64,
    pub monster_attack_energy: f64,
    /// HP a monster loses per hit received (the explorer's attack power).
    pub monster_attacked_hp: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            move_cost: 0.015,
            comm_cost: 0.006,
            explorer_attack_energy: 0.01,
            explorer_attacked_hp: 0.15,
            monster_attack_energy: 0.03,
            monster_attacked_hp: 0.05,
        }
    }
}

impl CostTable {
    pub fn validate(&self) -> Result<(), WorldError> {
        let all = [
            ("move_cost", self.move_cost),
            ("comm_cost", self.comm_cost),
            ("explorer_attack_energy", self.explorer_attack_energy),
            ("explorer_attacked_hp", self.explorer_attacked_hp),
            ("monster_attack_energy", self.monster_attack_energy),
            ("monster_attacked_hp", self.monster_attacked_hp),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(WorldError::Invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

pub const INITIAL_HP: f64 = 100.0;
pub const INITIAL_ENERGY: f64 = 100.0;

/// One agent. `hp` and `energy` are always derived from the event counters
/// below, which keeps the resource ledger exact.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub side: Side,
    pub position: Vec2,
    pub hp: f64,
    pub energy: f64,
    /// HP removed from a victim per hit.
    pub attack_power: f64,
    pub alive: bool,
    pub moves: u64,
    pub attacks: u64,
    pub comm_rounds: u64,
    pub hits_received: u64,
}

impl AgentState {
    fn new(id: usize, side: Side, position: Vec2, attack_power: f64) -> Self {
        AgentState {
            id,
            side,
            position,
            hp: INITIAL_HP,
            energy: INITIAL_ENERGY,
            attack_power,
            alive: true,
            moves: 0,
            attacks: 0,
            comm_rounds: 0,
            hits_received: 0,
        }
    }

    fn attack_energy_cost(&self, costs: &CostTable) -> f64 {
        match self.side {
            Side::Explorer => costs.explorer_attack_energy,
            Side::Monster => costs.monster_attack_energy,
        }
    }

    fn attacked_hp_cost(&self, costs: &CostTable) -> f64 {
        match self.side {
            Side::Explorer => costs.explorer_attacked_hp,
            Side::Monster => costs.monster_attacked_hp,
        }
    }

    /// Recompute `energy` and `hp` from the event counters. The spend is
    /// accumulated in a fixed order (moves, attacks, communication) so the
    /// ledger identity is bit-stable.
    pub fn refresh(&mut self, costs: &CostTable) {
        let spent = self.moves as f64 * costs.move_cost
            + self.attacks as f64 * self.attack_energy_cost(costs)
            + self.comm_rounds as f64 * costs.comm_cost;
        self.energy = (INITIAL_ENERGY - spent).max(0.0);
        self.hp = (INITIAL_HP - self.hits_received as f64 * self.attacked_hp_cost(costs)).max(0.0);
    }

    pub fn hp_lost(&self) -> f64 {
        INITIAL_HP - self.hp
    }

    pub fn energy_spent(&self) -> f64 {
        INITIAL_ENERGY - self.energy
    }

    pub fn can_act(&self) -> bool {
        self.alive && self.energy > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn contains(&self, p: Vec2) -> bool {
        p.dist(self.center) < self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormationShape {
    Patrol,
    Triangle,
    RegularPolygon,
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ongoing,
    ExplorersWin,
    MonstersWin,
}

/// Geometry and rules of one arena instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub arena: f64,
    pub sensing_radius: f64,
    pub comm_radius: f64,
    pub attack_range: f64,
    pub treasure_radius: f64,
    pub speed: f64,
    pub tick_cap: u64,
    /// Strict liveness: an agent with zero energy counts as dead. When
    /// false, exhausted agents merely stop moving and attacking.
    pub exhausted_dies: bool,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            arena: 100.0,
            sensing_radius: 15.0,
            comm_radius: 25.0,
            attack_range: 3.0,
            treasure_radius: 2.0,
            speed: 1.0,
            tick_cap: 5000,
            exhausted_dies: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WorldState {
    pub agents: Vec<AgentState>,
    pub obstacles: Vec<Obstacle>,
    pub treasure: Vec2,
    pub tick: u64,
    pub cost_table: CostTable,
    pub params: WorldParams,
}

impl WorldState {
    pub fn new(
        params: WorldParams,
        cost_table: CostTable,
        treasure: Vec2,
        obstacles: Vec<Obstacle>,
        explorer_positions: Vec<Vec2>,
        monster_positions: Vec<Vec2>,
    ) -> Result<Self, WorldError> {
        if params.comm_radius <= params.sensing_radius {
            return Err(WorldError::Invalid(format!(
                "comm_radius ({}) must exceed sensing_radius ({})",
                params.comm_radius, params.sensing_radius
            )));
        }
        if !(params.speed > 0.0) {
            return Err(WorldError::Invalid("speed must be positive".into()));
        }
        cost_table.validate()?;
        for (i, o) in obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(WorldError::Invalid(format!("obstacle {i} radius must be positive")));
            }
        }

        let mut agents = Vec::with_capacity(explorer_positions.len() + monster_positions.len());
        for p in explorer_positions {
            let id = agents.len();
            agents.push(AgentState::new(id, Side::Explorer, p, cost_table.monster_attacked_hp));
        }
        for p in monster_positions {
            let id = agents.len();
            agents.push(AgentState::new(id, Side::Monster, p, cost_table.explorer_attacked_hp));
        }
        Ok(WorldState { agents, obstacles, treasure, tick: 0, cost_table, params })
    }

    pub fn explorers(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| a.side == Side::Explorer)
    }

    pub fn monsters(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| a.side == Side::Monster)
    }

    pub fn living(&self, side: Side) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(move |a| a.side == side && a.alive)
    }

    pub fn living_count(&self, side: Side) -> usize {
        self.living(side).count()
    }

    pub fn centroid(&self, side: Side) -> Option<Vec2> {
        let mut sum = Vec2::ZERO;
        let mut n = 0usize;
        for a in self.living(side) {
            sum += a.position;
            n += 1;
        }
        (n > 0).then(|| sum * (1.0 / n as f64))
    }
}

/// Trial state: treasure reached, explorers wiped, timeout, or still going.
pub fn outcome(world: &WorldState) -> Outcome {
    let reached = world
        .living(Side::Explorer)
        .any(|a| a.position.dist(world.treasure) <= world.params.treasure_radius);
    if reached {
        return Outcome::ExplorersWin;
    }
    if world.living_count(Side::Explorer) == 0 {
        return Outcome::MonstersWin;
    }
    if world.tick >= world.params.tick_cap {
        return Outcome::MonstersWin;
    }
    Outcome::Ongoing
}

/// Slot positions for a formation of `members` agents around `anchor`.
/// Slot `i` always belongs to the i-th member by agent-id rank.
pub fn formation_targets(
    shape: FormationShape,
    members: usize,
    anchor: Vec2,
    spacing: f64,
) -> Vec<Vec2> {
    assert!(members >= 1, "a formation needs at least one member");
    match shape {
        FormationShape::Patrol => (0..members)
            .map(|i| anchor + Vec2::new(0.0, (i as f64 - (members as f64 - 1.0) / 2.0) * spacing))
            .collect(),
        FormationShape::Triangle => (0..members)
            .map(|i| {
                if i == 0 {
                    anchor
                } else {
                    let depth = i.div_ceil(2) as f64;
                    let lateral = if i % 2 == 1 { depth } else { -depth };
                    anchor + Vec2::new(-depth * spacing, lateral * spacing * 0.5)
                }
            })
            .collect(),
        FormationShape::RegularPolygon | FormationShape::Circle => (0..members)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / members as f64;
                anchor + Vec2::new(angle.cos(), angle.sin()) * spacing
            })
            .collect(),
    }
}

/// A teammate as seen by the obstacle-avoidance rule: where it is and
/// whether its own straight route currently collides.
#[derive(Clone, Copy, Debug)]
pub struct PeerState {
    pub position: Vec2,
    pub colliding: bool,
}

/// Edge-following around an obstacle.
///
/// With no collision point the agent heads straight for its goal. With one,
/// the line through the collision point perpendicular to the tangent splits
/// the communicating group in two; the agent moves one step along the
/// tangent toward the side holding more non-colliding peers, and stops when
/// the sides tie. Returns a unit direction and a step count of 0 or 1.
pub fn adapt_the_edge(
    agent: &AgentState,
    nearest_collision: Option<Vec2>,
    peers: &[PeerState],
    goal: Vec2,
) -> (Vec2, f64) {
    let Some(collision) = nearest_collision else {
        let dir = (goal - agent.position).normalized();
        let dist = if dir == Vec2::ZERO { 0.0 } else { 1.0 };
        return (dir, dist);
    };

    let radial = (collision - agent.position).normalized();
    let radial = if radial == Vec2::ZERO { (collision - goal).normalized() } else { radial };
    let tangent = radial.perp();

    let mut plus = 0usize;
    let mut minus = 0usize;
    for peer in peers {
        if peer.colliding {
            continue;
        }
        let side = (peer.position - collision).dot(tangent);
        if side > 0.0 {
            plus += 1;
        } else if side < 0.0 {
            minus += 1;
        }
    }

    match plus.cmp(&minus) {
        std::cmp::Ordering::Greater => (tangent, 1.0),
        std::cmp::Ordering::Less => (-tangent, 1.0),
        std::cmp::Ordering::Equal => (Vec2::ZERO, 0.0),
    }
}

/// First point where the segment `from -> from + step` crosses into the
/// obstacle, if it does.
fn segment_circle_entry(from: Vec2, step: Vec2, obstacle: &Obstacle) -> Option<(f64, Vec2)> {
    let d = step;
    let f = from - obstacle.center;
    let a = d.dot(d);
    if a <= f64::EPSILON {
        return None;
    }
    let b = 2.0 * f.dot(d);
    let c = f.dot(f) - obstacle.radius * obstacle.radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    for t in [(-b - sqrt_disc) / (2.0 * a), (-b + sqrt_disc) / (2.0 * a)] {
        if (0.0..=1.0).contains(&t) {
            let point = from + d * t;
            // Only count crossings that head inward.
            if d.dot(point - obstacle.center) < 0.0 {
                return Some((t, point));
            }
        }
    }
    None
}

/// Nearest collision point over all obstacles along a straight probe
/// toward `goal`, looking at most `lookahead` units out.
pub fn probe_collision(world: &WorldState, from: Vec2, goal: Vec2, lookahead: f64) -> Option<Vec2> {
    let to_goal = goal - from;
    let dist = to_goal.norm();
    if dist <= f64::EPSILON {
        return None;
    }
    let probe = to_goal * (dist.min(lookahead) / dist);
    let mut best: Option<(f64, Vec2)> = None;
    for o in &world.obstacles {
        if let Some((t, p)) = segment_circle_entry(from, probe, o) {
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, p));
            }
        }
    }
    best.map(|(_, p)| p)
}

fn clamp_to_arena(p: Vec2, arena: f64) -> Vec2 {
    Vec2::new(p.x.clamp(0.0, arena), p.y.clamp(0.0, arena))
}

fn push_out_of_obstacles(p: Vec2, obstacles: &[Obstacle]) -> Vec2 {
    let mut q = p;
    for o in obstacles {
        if o.contains(q) {
            let radial = (q - o.center).normalized();
            let radial = if radial == Vec2::ZERO { Vec2::new(1.0, 0.0) } else { radial };
            q = o.center + radial * o.radius;
        }
    }
    q
}

/// Monster obstacle handling: slide along the tangent at the collision
/// point, keeping the component toward the goal.
fn tangent_slide(position: Vec2, collision: Vec2, goal: Vec2) -> Vec2 {
    let radial = (collision - position).normalized();
    let tangent = radial.perp();
    if tangent.dot(goal - position) >= 0.0 {
        tangent
    } else {
        -tangent
    }
}

/// Advance the world by one tick.
pub fn step(world: &mut WorldState, engine: &mut PolicyEngine, rng: &mut rand_chacha::ChaCha8Rng) {
    let costs = world.cost_table;

    // 1. Perception and communication.
    let comm_ids = engine.communicating_explorers(world);
    for &id in &comm_ids {
        if world.agents[id].can_act() {
            world.agents[id].comm_rounds += 1;
            world.agents[id].refresh(&costs);
        }
    }

    // 2. Policy decisions against the post-communication snapshot.
    let intents: Vec<Intent> = engine.decide(world, rng);

    // 3. Movement, in agent-id order.
    let speed = world.params.speed;
    let lookahead = world.params.sensing_radius;
    for id in 0..world.agents.len() {
        if !world.agents[id].can_act() {
            continue;
        }
        let intent = &intents[id];

        // A chaser (moving onto its victim) holds once in range; agents
        // moving to a formation slot keep walking while they shoot.
        if let (Some(victim), Some(move_to)) = (intent.attack, intent.move_to) {
            let vp = world.agents[victim].position;
            if world.agents[victim].alive
                && move_to.dist(vp) <= 1e-9
                && world.agents[id].position.dist(vp) <= world.params.attack_range
            {
                continue;
            }
        }

        let Some(goal) = intent.move_to else { continue };
        let from = world.agents[id].position;
        let to_goal = goal - from;
        if to_goal.norm() <= 1e-9 {
            continue;
        }
        let straight = to_goal.clamp_len(speed * intent.speed_factor);

        let displacement = match probe_collision(world, from, goal, lookahead) {
            None => straight,
            Some(collision) => match world.agents[id].side {
                Side::Monster => tangent_slide(from, collision, goal) * speed,
                Side::Explorer => {
                    let peers: Vec<PeerState> = engine
                        .comm_group(world, id, &comm_ids)
                        .into_iter()
                        .map(|peer_id| {
                            let peer = &world.agents[peer_id];
                            let peer_goal = intents[peer_id].move_to.unwrap_or(peer.position);
                            PeerState {
                                position: peer.position,
                                colliding: probe_collision(world, peer.position, peer_goal, lookahead)
                                    .is_some(),
                            }
                        })
                        .collect();
                    let (dir, steps) = adapt_the_edge(&world.agents[id], Some(collision), &peers, goal);
                    dir * (speed * steps)
                }
            },
        };

        if displacement.norm() <= 1e-9 {
            continue;
        }
        let mut next = clamp_to_arena(from + displacement, world.params.arena);
        next = push_out_of_obstacles(next, &world.obstacles);
        if next.dist(from) <= 1e-9 {
            continue;
        }
        world.agents[id].position = next;
        world.agents[id].moves += 1;
        world.agents[id].refresh(&costs);
    }

    // 4. Attacks. Victims keep absorbing hits until the death phase, so
    // simultaneous exchanges land on both sides.
    for id in 0..world.agents.len() {
        let Some(victim) = intents[id].attack else { continue };
        if !world.agents[id].can_act() || !world.agents[victim].alive {
            continue;
        }
        let dist = world.agents[id].position.dist(world.agents[victim].position);
        if dist > world.params.attack_range {
            continue;
        }
        world.agents[id].attacks += 1;
        world.agents[id].refresh(&costs);
        world.agents[victim].hits_received += 1;
        world.agents[victim].refresh(&costs);
    }

    // 5. Deaths.
    let strict = world.params.exhausted_dies;
    for a in &mut world.agents {
        if a.alive {
            a.alive = a.hp > 0.0 && (!strict || a.energy > 0.0);
        }
    }

    // 6. Clock.
    world.tick += 1;
}

#[cfg(test)]
mod tests;

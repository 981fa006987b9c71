//! Cooperative multi-agent decision making against intentional and
//! unintentional adversaries.
//!
//! The engine stacks finite two-player zero-sum games into a layered
//! utility tree: each level solves one game (attack or defend, which
//! opponent to engage, how to split the team), feeds the outcome
//! probability of the chosen cell into the next level, and the most
//! probable joint assignment can be extracted either greedily or by
//! max-product variable elimination over the chain.
//!
//! The crate ships the building blocks and a harness around them:
//!
//! * [`matgame`] — saddle points, mixed equilibria and game values for
//!   zero-sum payoff matrices, with certified exploitability bounds.
//! * [`util_model`] — the utility formulas (winning probability,
//!   expected energy and HP deltas) and the per-level payoff builders.
//! * [`gut`] — the layered tree: computation units, greedy descent and
//!   exact MAP assignment.
//! * [`adversary`] — adversary classification and the regression
//!   predictors used when opponent state is hidden.
//! * [`world`] — a deterministic explorers-and-monsters simulation with
//!   formations, obstacle handling and the team policies.
//! * [`harness`] — scenario files, seeded batch execution, metrics and
//!   CSV output. The `gut` binary is a thin CLI over this module.

pub mod adversary;
pub mod geom;
pub mod gut;
pub mod harness;
pub mod matgame;
pub mod util_model;
pub mod world;

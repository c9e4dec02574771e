//! Search strategies as deterministic state machines.
//!
//! A strategy fixes the initial group partition and reacts to conflicts and
//! their resolutions with movement orders. The engine owns time and votes;
//! strategies only ever see observable state (positions, the ledger, who has
//! been identified), never ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rational::Rational;
use crate::trajectory::{Pos, RobotId, Time};
use crate::voting::{Verdict, VoteLedger, VoteTally};

mod chain;
mod middle;
mod small;
mod zigzag;

pub use chain::{derive_chain_schedule, smallest_chain_f, ChainPlanError};

/// Movement order for one robot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Order {
    pub robot: RobotId,
    pub motion: Motion,
}

/// A robot's motion plan from the moment the order applies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Motion {
    /// Constant velocity forever (|velocity| <= 1; 0 holds position).
    Glide { velocity: Rational },
    /// Visit waypoints in order at unit speed, then glide at `terminal`.
    Route { waypoints: Vec<Pos>, terminal: Rational },
}

impl Motion {
    pub fn hold() -> Motion {
        Motion::Glide {
            velocity: Rational::ZERO,
        }
    }

    pub fn glide(velocity: Rational) -> Motion {
        Motion::Glide { velocity }
    }

    pub fn to_point_then_hold(pos: Pos) -> Motion {
        Motion::Route {
            waypoints: vec![pos],
            terminal: Rational::ZERO,
        }
    }
}

/// Role a group plays in the partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    SearchLeft,
    SearchRight,
    Center,
    Middle(usize),
    Cohort,
}

/// One named group of the initial partition.
#[derive(Clone, Debug)]
pub struct Group {
    pub name: String,
    pub members: Vec<RobotId>,
    pub speed: Rational,
    pub role: Role,
}

/// Initial partition plus the left/right mirror pairing of groups.
///
/// `mirror[i]` is the index of the group that takes group `i`'s place when
/// the line is reflected; `None` when the strategy is not mirror-symmetric
/// (the zigzag cohort starts to the right).
#[derive(Clone, Debug)]
pub struct GroupPlan {
    pub groups: Vec<Group>,
    pub mirror: Option<Vec<usize>>,
}

impl GroupPlan {
    pub fn robot_count(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    /// Index of the group containing `robot`.
    pub fn group_of(&self, robot: RobotId) -> Option<usize> {
        self.groups.iter().position(|g| g.members.contains(&robot))
    }

    pub fn assert_partition(&self, n: usize) {
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            for &m in &g.members {
                assert!((m.0 as usize) < n, "plan member out of range");
                assert!(seen.insert(m), "plan member duplicated");
            }
        }
        assert_eq!(seen.len(), n, "plan does not partition the robots");
    }
}

/// Why a strategy cannot be built for the requested parameters.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("strategy {strategy} inapplicable: {constraint}")]
pub struct StrategyError {
    pub strategy: &'static str,
    pub constraint: String,
}

impl StrategyError {
    fn new(strategy: &'static str, constraint: impl Into<String>) -> Self {
        StrategyError {
            strategy,
            constraint: constraint.into(),
        }
    }
}

/// Observable world state handed to strategy callbacks.
pub struct WorldView<'a> {
    pub time: Time,
    pub f_remaining: usize,
    pub identified: &'a BTreeSet<RobotId>,
    pub ledger: &'a VoteLedger,
    pub positions: BTreeMap<RobotId, Pos>,
}

impl WorldView<'_> {
    pub fn position(&self, robot: RobotId) -> Pos {
        self.positions[&robot]
    }

    /// Unidentified robots currently at `pos`, ascending id.
    pub fn robots_at(&self, pos: Pos) -> Vec<RobotId> {
        self.positions
            .iter()
            .filter(|(r, &p)| p == pos && !self.identified.contains(r))
            .map(|(&r, _)| r)
            .collect()
    }

    /// Current vote about `pos`.
    pub fn tally(&self, pos: Pos) -> VoteTally {
        self.ledger.tally(pos, self.time, self.identified)
    }
}

/// An announcement that could not be resolved by the standing vote.
#[derive(Clone, Debug)]
pub struct ConflictCtx {
    pub pos: Pos,
    pub time: Time,
    pub tally: VoteTally,
}

/// Deterministic reaction machine driven by the engine.
pub trait Strategy {
    fn name(&self) -> &'static str;

    fn plan(&self) -> &GroupPlan;

    /// Orders issued at time 0. Robots without an order hold at the origin.
    /// `horizon` bounds the run (the scenario time cap); only open-ended
    /// schedules like the zigzag need it.
    fn initial_orders(&mut self, horizon: Time) -> Vec<Order>;

    /// Reaction to an unresolved conflict; search groups are already frozen,
    /// these orders move the resolvers.
    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order>;

    /// Reaction after a conflict closes (refuted); identified robots are
    /// already disregarded and frozen search groups resume automatically.
    /// These orders re-task the robots dispatched by `on_conflict`.
    fn on_resolved(&mut self, ctx: &ConflictCtx, verdict: &Verdict, view: &WorldView)
        -> Vec<Order>;

    /// Called if a conflict ran out of inbound voters while still undecided.
    /// The default streams the nearest idle robots to the conflict.
    fn on_stalled(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        stream_nearest(ctx, view)
    }
}

/// Generic last-resort resolver: send the nearest unidentified robots that
/// have not voted at the conflict until a decisive tally is guaranteed.
pub fn stream_nearest(ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
    let tally = view.tally(ctx.pos);
    let have = tally.yes() + tally.no();
    let need = (2 * view.f_remaining + 1).saturating_sub(have);
    let mut candidates: Vec<(Rational, RobotId)> = view
        .positions
        .iter()
        .filter(|(r, _)| !view.identified.contains(r))
        .filter(|(r, _)| !view.ledger.has_voted(**r, ctx.pos))
        .map(|(&r, &p)| ((p - ctx.pos).abs(), r))
        .collect();
    candidates.sort();
    candidates
        .into_iter()
        .take(need)
        .map(|(_, robot)| Order {
            robot,
            motion: Motion::to_point_then_hold(ctx.pos),
        })
        .collect()
}

/// Lowest-id `count` robots from `pool`, skipping identified ones.
fn take_lowest(pool: &[RobotId], identified: &BTreeSet<RobotId>, count: usize) -> Vec<RobotId> {
    pool.iter()
        .filter(|r| !identified.contains(r))
        .take(count)
        .copied()
        .collect()
}

/// Variant of one exchange-chain redistribution step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainVariant {
    Rec1,
    Rec2,
}

impl fmt::Display for ChainVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainVariant::Rec1 => write!(f, "rec1"),
            ChainVariant::Rec2 => write!(f, "rec2"),
        }
    }
}

/// One scheduled chain step: identify at least `k` faulty robots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainStep {
    pub variant: ChainVariant,
    pub k: usize,
}

/// Construction recipe for a strategy; deterministic to rebuild per run.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategySpec {
    TwoGroup { n: usize, f: usize },
    Zigzag { n: usize, f: usize, r0: Rational },
    P41,
    P51,
    P62,
    Thirds { f: usize },
    Fifths { f: usize },
    Chain { f: usize, schedule: Vec<ChainStep> },
    Middle { f: usize, i: usize },
}

impl StrategySpec {
    /// Robot count the spec implies.
    pub fn n(&self) -> Result<usize, StrategyError> {
        match self {
            StrategySpec::TwoGroup { n, .. } | StrategySpec::Zigzag { n, .. } => Ok(*n),
            StrategySpec::P41 => Ok(4),
            StrategySpec::P51 => Ok(5),
            StrategySpec::P62 => Ok(6),
            StrategySpec::Thirds { f } => {
                small::check_thirds(*f)?;
                Ok((10 * f + 4) / 3)
            }
            StrategySpec::Fifths { f } => {
                small::check_fifths(*f)?;
                Ok((14 * f + 4) / 5)
            }
            StrategySpec::Chain { f, schedule } => {
                let table = chain::validate_schedule(*f, schedule)?;
                Ok(table.n)
            }
            StrategySpec::Middle { f, i } => {
                middle::check_middle(*f, *i)?;
                Ok((3 * i + 4) * f / (i + 1) + 2)
            }
        }
    }

    pub fn f(&self) -> usize {
        match self {
            StrategySpec::TwoGroup { f, .. } | StrategySpec::Zigzag { f, .. } => *f,
            StrategySpec::P41 | StrategySpec::P51 => 1,
            StrategySpec::P62 => 2,
            StrategySpec::Thirds { f }
            | StrategySpec::Fifths { f }
            | StrategySpec::Chain { f, .. }
            | StrategySpec::Middle { f, .. } => *f,
        }
    }

    pub fn display_name(&self) -> String {
        match self {
            StrategySpec::TwoGroup { .. } => "two_group".into(),
            StrategySpec::Zigzag { .. } => "zigzag".into(),
            StrategySpec::P41 => "p41".into(),
            StrategySpec::P51 => "p51".into(),
            StrategySpec::P62 => "p62".into(),
            StrategySpec::Thirds { .. } => "thirds".into(),
            StrategySpec::Fifths { .. } => "fifths".into(),
            StrategySpec::Chain { schedule, .. } => {
                let steps: Vec<String> = schedule.iter().map(|s| s.variant.to_string()).collect();
                format!("chain({})", steps.join(","))
            }
            StrategySpec::Middle { i, .. } => format!("middle(i={i})"),
        }
    }

    /// Builds a fresh strategy state machine.
    pub fn build(&self) -> Result<Box<dyn Strategy>, StrategyError> {
        match self {
            StrategySpec::TwoGroup { n, f } => Ok(Box::new(small::TwoGroup::new(*n, *f)?)),
            StrategySpec::Zigzag { n, f, r0 } => Ok(Box::new(zigzag::Zigzag::new(*n, *f, *r0)?)),
            StrategySpec::P41 => Ok(Box::new(small::P41::new())),
            StrategySpec::P51 => Ok(Box::new(small::P51::new())),
            StrategySpec::P62 => Ok(Box::new(small::P62::new())),
            StrategySpec::Thirds { f } => Ok(Box::new(small::Thirds::new(*f)?)),
            StrategySpec::Fifths { f } => Ok(Box::new(small::Fifths::new(*f)?)),
            StrategySpec::Chain { f, schedule } => {
                Ok(Box::new(chain::ChainStrategy::new(*f, schedule)?))
            }
            StrategySpec::Middle { f, i } => Ok(Box::new(middle::MiddleGroups::new(*f, *i)?)),
        }
    }

    /// The plan without building run state (for symmetry analysis).
    pub fn plan(&self) -> Result<GroupPlan, StrategyError> {
        Ok(self.build()?.plan().clone())
    }
}

/// Splits `0..n` into two search fronts (left gets the larger half) and
/// returns the matching plan skeleton used by several strategies.
fn two_front_plan(n: usize) -> GroupPlan {
    let left = n - n / 2;
    let l: Vec<RobotId> = (0..left as u32).map(RobotId).collect();
    let r: Vec<RobotId> = (left as u32..n as u32).map(RobotId).collect();
    GroupPlan {
        groups: vec![
            Group {
                name: "L".into(),
                members: l,
                speed: -Rational::ONE,
                role: Role::SearchLeft,
            },
            Group {
                name: "R".into(),
                members: r,
                speed: Rational::ONE,
                role: Role::SearchRight,
            },
        ],
        mirror: Some(vec![1, 0]),
    }
}

/// Orders putting every group on its planned initial velocity.
fn plan_orders(plan: &GroupPlan) -> Vec<Order> {
    let mut orders = Vec::new();
    for g in &plan.groups {
        for &m in &g.members {
            orders.push(Order {
                robot: m,
                motion: Motion::glide(g.speed),
            });
        }
    }
    orders
}

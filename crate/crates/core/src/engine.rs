//! Deterministic event-driven simulation.
//!
//! The engine advances robots along strategy-issued motion plans, delivers
//! instantaneous broadcasts, pauses search groups while a conflict is being
//! resolved, and terminates exactly when a vote certifies the target. Equal
//! event times are ordered by (kind, |position|, position, robot id) with
//! arrivals before announcements before resolutions, so whole runs are
//! bit-reproducible.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::rational::Rational;
use crate::strategies::{ConflictCtx, Motion, Order, Strategy, StrategyError, StrategySpec, WorldView};
use crate::trajectory::{Pos, RobotId, Target, Time, Trajectory, TrajectoryError};
use crate::voting::{resolve, Verdict, VoteLedger};

const MAX_EVENTS: usize = 500_000;

/// Byzantine behavior of the faulty robots during one run.
#[derive(Clone, Debug, PartialEq)]
pub enum AdversaryPolicy {
    /// Faulty robots behave exactly like reliable ones.
    Honest,
    /// The listed robots stay silent when they visit the target; everything
    /// else is truthful.
    SilentAtTarget(BTreeSet<RobotId>),
    /// Scripted false claims: each `(robot, position)` fires the first time
    /// the robot is at the position. Votes elsewhere are truthful.
    FalseClaims(Vec<(RobotId, Pos)>),
    /// Decisions resolved lazily by an external search. `decisions` is the
    /// committed prefix; running past it stops the run with a
    /// [`RunOutcome::NeedVote`]. Claim opportunities on `grid` are logged.
    GameTree {
        grid: Vec<Pos>,
        decisions: Vec<Decision>,
    },
}

/// One committed adversary decision in a game-tree prefix.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Decision {
    /// `robot` broadcasts a target claim from `pos` at `time`.
    Claim { robot: RobotId, pos: Pos, time: Time },
    /// At the vote point `(pos, time)`, `yes` members of the pending class
    /// join the claim; the rest stay silent.
    Votes { pos: Pos, time: Time, yes: usize },
}

impl Decision {
    pub fn time(&self) -> Time {
        match self {
            Decision::Claim { time, .. } | Decision::Votes { time, .. } => *time,
        }
    }
}

/// A vote point the committed prefix did not cover.
#[derive(Clone, Debug)]
pub struct PendingVote {
    pub pos: Pos,
    pub time: Time,
    pub cohort: u32,
    /// Class members that must choose yes or silent, ascending id.
    pub robots: Vec<RobotId>,
    pub is_target_pos: bool,
    /// True when this vote happens at the instant a claim is raised.
    pub at_claim_raise: bool,
    /// Explicit yes votes already on the books at this position.
    pub yes_so_far: usize,
    /// Distinct voters (yes or silent) the tally will contain.
    pub visitors: usize,
    /// Upper bound on yes votes still to be chosen by later classes at this
    /// same vote point.
    pub later_classes_max: usize,
    pub f_remaining: usize,
}

/// A moment a faulty robot could have issued a fresh false claim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opportunity {
    pub time: Time,
    pub robot: RobotId,
    pub cohort: u32,
    pub pos: Pos,
}

/// Full description of one simulation run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub n: usize,
    pub f: usize,
    pub faulty: BTreeSet<RobotId>,
    pub target: Target,
    pub adversary: AdversaryPolicy,
    pub strategy: StrategySpec,
    pub time_cap: Time,
}

impl Scenario {
    /// Default time cap: 20 d, far beyond any implemented strategy's bound.
    pub fn new(
        strategy: StrategySpec,
        faulty: BTreeSet<RobotId>,
        target: Target,
        adversary: AdversaryPolicy,
    ) -> Result<Self, SimError> {
        let n = strategy.n().map_err(SimError::StrategyInapplicable)?;
        let f = strategy.f();
        if n < 2 * f + 1 {
            return Err(SimError::Infeasible { n, f });
        }
        if faulty.len() > f {
            return Err(SimError::TooManyFaulty {
                given: faulty.len(),
                f,
            });
        }
        if let Some(&r) = faulty.iter().next_back() {
            if r.0 as usize >= n {
                return Err(SimError::UnknownRobot(r));
            }
        }
        let time_cap = Rational::int(20) * target.distance;
        Ok(Scenario {
            n,
            f,
            faulty,
            target,
            adversary,
            strategy,
            time_cap,
        })
    }
}

/// Event kinds recorded in a transcript.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Arrival { robot: RobotId, pos: Pos },
    Announcement { robot: RobotId, pos: Pos, value: bool },
    Resolution { pos: Pos, verdict: Verdict },
    Termination { pos: Pos },
}

/// Timestamped transcript entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: Time,
    pub kind: EventKind,
}

impl Event {
    fn sort_key(&self) -> (Time, u8, Rational, Rational, u32) {
        match &self.kind {
            EventKind::Arrival { robot, pos } => (self.time, 0, pos.abs(), *pos, robot.0),
            EventKind::Announcement { robot, pos, .. } => (self.time, 1, pos.abs(), *pos, robot.0),
            EventKind::Resolution { pos, .. } => (self.time, 2, pos.abs(), *pos, u32::MAX),
            EventKind::Termination { pos } => (self.time, 3, pos.abs(), *pos, u32::MAX),
        }
    }
}

/// Everything a completed run certifies.
#[derive(Clone, Debug)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub search_time: Time,
    pub identified_faulty: BTreeSet<RobotId>,
    pub sound: bool,
    /// Realized path of every robot, for kinematic checks.
    pub paths: BTreeMap<RobotId, Trajectory>,
}

impl Transcript {
    /// One event per line: time as num/den, kind, robot, position.
    pub fn event_log(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match &e.kind {
                EventKind::Arrival { robot, pos } => {
                    let _ = writeln!(out, "{} arrival {} {}", e.time, robot, pos);
                }
                EventKind::Announcement { robot, pos, value } => {
                    let v = if *value { "yes" } else { "no" };
                    let _ = writeln!(out, "{} announcement {} {} {}", e.time, robot, pos, v);
                }
                EventKind::Resolution { pos, verdict } => {
                    let v = match verdict {
                        Verdict::Found => "found".to_string(),
                        Verdict::Refuted { newly_identified } => {
                            let ids: Vec<String> =
                                newly_identified.iter().map(|r| r.to_string()).collect();
                            format!("refuted[{}]", ids.join(","))
                        }
                        Verdict::Unresolved => "unresolved".to_string(),
                    };
                    let _ = writeln!(out, "{} resolution - {} {}", e.time, pos, v);
                }
                EventKind::Termination { pos } => {
                    let _ = writeln!(out, "{} termination - {}", e.time, pos);
                }
            }
        }
        out
    }
}

/// Search time divided by the target distance; only defined for sound runs.
pub fn competitive_ratio(tr: &Transcript, d: Rational) -> Result<Rational, SimError> {
    if !d.is_positive() {
        return Err(SimError::BadDistance);
    }
    if !tr.sound {
        return Err(SimError::UnsoundRatio);
    }
    Ok(tr.search_time / d)
}

/// Failure modes of a run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("strategy inapplicable: {0}")]
    StrategyInapplicable(StrategyError),
    #[error("search infeasible: n={n} < 2f+1 for f={f}")]
    Infeasible { n: usize, f: usize },
    #[error("faulty set has {given} robots, exceeds f={f}")]
    TooManyFaulty { given: usize, f: usize },
    #[error("robot {0} out of range")]
    UnknownRobot(RobotId),
    #[error("time cap exceeded: strategy failed to terminate")]
    TimeCapExceeded,
    #[error("event budget exceeded")]
    EventBudget,
    #[error("conflict at {0} stalled with no inbound voters")]
    Stalled(Pos),
    #[error("kinematics violation for {robot}: {source}")]
    Kinematics {
        robot: RobotId,
        source: TrajectoryError,
    },
    #[error("game-tree decision mismatch: {0}")]
    DecisionMismatch(String),
    #[error("game-tree prefix exhausted at an undecided vote")]
    IncompleteDecisions,
    #[error("competitive ratio undefined for unsound transcript")]
    UnsoundRatio,
    #[error("distance must be positive")]
    BadDistance,
}

/// Result of driving a scenario to completion or to a missing decision.
#[derive(Clone, Debug)]
pub enum RunOutcome {
    Done {
        transcript: Transcript,
        opportunities: Vec<Opportunity>,
    },
    NeedVote {
        pending: PendingVote,
        opportunities: Vec<Opportunity>,
    },
}

/// Runs a scenario; game-tree prefixes may stop early with `NeedVote`.
pub fn run(scenario: &Scenario) -> Result<RunOutcome, SimError> {
    Sim::new(scenario)?.drive()
}

/// Runs a fully specified scenario to a transcript.
pub fn simulate(scenario: &Scenario) -> Result<Transcript, SimError> {
    match run(scenario)? {
        RunOutcome::Done { transcript, .. } => Ok(transcript),
        RunOutcome::NeedVote { .. } => Err(SimError::IncompleteDecisions),
    }
}

// ---------------------------------------------------------------------------
// internals
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct StashedPlan {
    waypoints: VecDeque<Pos>,
    terminal: Rational,
}

struct RobotState {
    id: RobotId,
    anchor_t: Time,
    anchor_p: Pos,
    velocity: Rational,
    waypoints: VecDeque<Pos>,
    terminal: Rational,
    path: Trajectory,
    identified: bool,
    burned_claim: bool,
    cohort: u32,
    stash: Option<StashedPlan>,
    version: u64,
}

impl RobotState {
    fn position_at(&self, t: Time) -> Pos {
        self.anchor_p + self.velocity * (t - self.anchor_t)
    }

    /// Whether the current plan ever reaches `pos` strictly after `now`.
    fn plan_reaches(&self, pos: Pos, now: Time) -> bool {
        let mut p = self.position_at(now);
        let mut v = self.velocity;
        let mut wps = self.waypoints.clone();
        loop {
            match wps.pop_front() {
                Some(w) => {
                    if (pos - p).signum() == (w - p).signum() && (pos - p).abs() <= (w - p).abs() {
                        return true;
                    }
                    p = w;
                    v = self.terminal;
                }
                None => {
                    if v.is_zero() {
                        return p == pos;
                    }
                    return (pos - p).signum() as i128 * v.signum() as i128 >= 0;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Payload {
    /// Robot crosses `pos` mid-leg.
    Presence { version: u64 },
    /// Robot completes the leg ending at `pos`.
    LegEnd { version: u64 },
    /// Explicit broadcast "target at pos".
    Announce,
    /// Re-evaluate the claim at `pos`.
    Resolve,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct QEvent {
    time: Time,
    kind: u8,
    abs_pos: Rational,
    pos: Pos,
    robot: u32,
    seq: u64,
    payload: Payload,
}

impl Ord for QEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.kind, self.abs_pos, self.pos, self.robot, self.seq).cmp(&(
            other.time,
            other.kind,
            other.abs_pos,
            other.pos,
            other.robot,
            other.seq,
        ))
    }
}

impl PartialOrd for QEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

enum Stop {
    Terminated,
    Need(PendingVote),
    Fail(SimError),
}

struct Sim<'a> {
    scenario: &'a Scenario,
    strategy: Box<dyn Strategy>,
    robots: Vec<RobotState>,
    ledger: VoteLedger,
    identified: BTreeSet<RobotId>,
    queue: BinaryHeap<Reverse<QEvent>>,
    seq: u64,
    next_cohort: u32,
    claimed: BTreeSet<Pos>,
    withheld: BTreeSet<(Rational, Pos)>,
    active: Option<Pos>,
    decided: BTreeSet<(RobotId, Pos)>,
    announced_target: BTreeSet<RobotId>,
    arrivals_logged: BTreeSet<(RobotId, Pos)>,
    fired_claims: BTreeSet<(RobotId, Pos)>,
    events: Vec<Event>,
    opportunities: Vec<Opportunity>,
    opp_seen: BTreeSet<(Time, RobotId, Pos)>,
    grid: Vec<Pos>,
    vote_cursor: usize,
    vote_decisions: Vec<(Pos, Time, usize)>,
    terminated_at: Option<(Pos, Time)>,
    events_processed: usize,
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        let strategy = scenario
            .strategy
            .build()
            .map_err(SimError::StrategyInapplicable)?;
        strategy.plan().assert_partition(scenario.n);

        let robots = (0..scenario.n as u32)
            .map(|i| RobotState {
                id: RobotId(i),
                anchor_t: Rational::ZERO,
                anchor_p: Rational::ZERO,
                velocity: Rational::ZERO,
                waypoints: VecDeque::new(),
                terminal: Rational::ZERO,
                path: Trajectory::from_origin(Rational::ZERO),
                identified: false,
                burned_claim: false,
                cohort: u32::MAX,
                stash: None,
                version: 0,
            })
            .collect();

        let mut grid: Vec<Pos> = Vec::new();
        let mut vote_decisions = Vec::new();
        let mut claims: Vec<(RobotId, Pos, Time)> = Vec::new();
        if let AdversaryPolicy::GameTree { grid: g, decisions } = &scenario.adversary {
            grid = g.clone();
            for d in decisions {
                match d {
                    Decision::Claim { robot, pos, time } => claims.push((*robot, *pos, *time)),
                    Decision::Votes { pos, time, yes } => vote_decisions.push((*pos, *time, *yes)),
                }
            }
        }

        let mut sim = Sim {
            scenario,
            strategy,
            robots,
            ledger: VoteLedger::new(),
            identified: BTreeSet::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            next_cohort: 0,
            claimed: BTreeSet::new(),
            withheld: BTreeSet::new(),
            active: None,
            decided: BTreeSet::new(),
            announced_target: BTreeSet::new(),
            arrivals_logged: BTreeSet::new(),
            fired_claims: BTreeSet::new(),
            events: Vec::new(),
            opportunities: Vec::new(),
            opp_seen: BTreeSet::new(),
            grid,
            vote_cursor: 0,
            vote_decisions,
            terminated_at: None,
            events_processed: 0,
        };
        for (robot, pos, time) in claims {
            sim.push_event(time, 1, pos, robot.0, Payload::Announce);
        }
        Ok(sim)
    }

    fn f_remaining(&self) -> usize {
        self.scenario.f - self.identified.len()
    }

    fn is_faulty(&self, r: RobotId) -> bool {
        self.scenario.faulty.contains(&r)
    }

    fn push_event(&mut self, time: Time, kind: u8, pos: Pos, robot: u32, payload: Payload) {
        self.seq += 1;
        self.queue.push(Reverse(QEvent {
            time,
            kind,
            abs_pos: pos.abs(),
            pos,
            robot,
            seq: self.seq,
            payload,
        }));
    }

    fn drive(mut self) -> Result<RunOutcome, SimError> {
        let orders = self.strategy.initial_orders(self.scenario.time_cap);
        self.apply_orders(orders, Rational::ZERO);

        while let Some(Reverse(ev)) = self.queue.pop() {
            if self.terminated_at.is_some() {
                break;
            }
            if ev.time > self.scenario.time_cap {
                return Err(SimError::TimeCapExceeded);
            }
            self.events_processed += 1;
            if self.events_processed > MAX_EVENTS {
                return Err(SimError::EventBudget);
            }
            let outcome = match ev.payload {
                Payload::Presence { version } => {
                    if self.robots[ev.robot as usize].version == version {
                        self.handle_presence(RobotId(ev.robot), ev.pos, ev.time)
                    } else {
                        Ok(())
                    }
                }
                Payload::LegEnd { version } => {
                    if self.robots[ev.robot as usize].version == version {
                        self.handle_leg_end(RobotId(ev.robot), ev.pos, ev.time)
                    } else {
                        Ok(())
                    }
                }
                Payload::Announce => self.handle_announce(RobotId(ev.robot), ev.pos, ev.time),
                Payload::Resolve => self.handle_resolve(ev.pos, ev.time),
            };
            match outcome {
                Ok(()) => {}
                Err(Stop::Terminated) => break,
                Err(Stop::Need(p)) => {
                    return Ok(RunOutcome::NeedVote {
                        pending: p,
                        opportunities: std::mem::take(&mut self.opportunities),
                    })
                }
                Err(Stop::Fail(e)) => return Err(e),
            }
        }

        let (pos, time) = self.terminated_at.ok_or(SimError::TimeCapExceeded)?;
        let mut events = std::mem::take(&mut self.events);
        events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let transcript = Transcript {
            events,
            search_time: time,
            identified_faulty: self.identified.clone(),
            sound: pos == self.scenario.target.position(),
            paths: self
                .robots
                .iter()
                .map(|r| {
                    let mut p = r.path.clone();
                    p.set_terminal_velocity(r.velocity);
                    (r.id, p)
                })
                .collect(),
        };
        Ok(RunOutcome::Done {
            transcript,
            opportunities: std::mem::take(&mut self.opportunities),
        })
    }

    // -- motion ------------------------------------------------------------

    fn set_motion(&mut self, robot: RobotId, motion: Motion, now: Time) -> Result<(), Stop> {
        let idx = robot.0 as usize;
        let pos = self.robots[idx].position_at(now);
        {
            let r = &mut self.robots[idx];
            let (last_t, _) = r.path.last_breakpoint();
            if last_t < now {
                r.path
                    .push(now, pos)
                    .map_err(|source| Stop::Fail(SimError::Kinematics { robot, source }))?;
            }
            r.anchor_t = now;
            r.anchor_p = pos;
            r.version += 1;
            match motion {
                Motion::Glide { velocity } => {
                    debug_assert!(velocity.abs() <= Rational::ONE);
                    r.velocity = velocity;
                    r.waypoints.clear();
                    r.terminal = velocity;
                }
                Motion::Route { waypoints, terminal } => {
                    let mut wps: VecDeque<Pos> = waypoints.into();
                    while wps.front() == Some(&pos) {
                        wps.pop_front();
                    }
                    if let Some(&w) = wps.front() {
                        r.velocity = if w > pos { Rational::ONE } else { -Rational::ONE };
                        r.waypoints = wps;
                        r.terminal = terminal;
                    } else {
                        r.velocity = terminal;
                        r.waypoints = wps;
                        r.terminal = terminal;
                    }
                }
            }
            r.path.set_terminal_velocity(r.velocity);
        }
        self.schedule_leg(robot, now);
        Ok(())
    }

    /// Queues the current leg's endpoint and all tracked-position crossings.
    fn schedule_leg(&mut self, robot: RobotId, now: Time) {
        let idx = robot.0 as usize;
        let (pos, v, version) = {
            let r = &self.robots[idx];
            (r.anchor_p, r.velocity, r.version)
        };
        if v.is_zero() {
            return;
        }
        let leg_end = self.robots[idx].waypoints.front().map(|&w| {
            let t = now + (w - pos) / v;
            (t, w)
        });
        if let Some((t_end, w)) = leg_end {
            self.push_event(t_end, 0, w, robot.0, Payload::LegEnd { version });
        }
        let mut watch: Vec<Pos> = Vec::new();
        watch.push(self.scenario.target.position());
        watch.extend(self.claimed.iter().copied());
        if let AdversaryPolicy::FalseClaims(schedule) = &self.scenario.adversary {
            for (r, p) in schedule {
                if *r == robot && !self.fired_claims.contains(&(robot, *p)) {
                    watch.push(*p);
                }
            }
        }
        if self.grid_eligible(robot) {
            watch.extend(self.grid.iter().copied());
        }
        watch.sort();
        watch.dedup();
        for x in watch {
            let t = now + (x - pos) / v;
            if t <= now {
                continue;
            }
            if let Some((t_end, _)) = leg_end {
                if t >= t_end {
                    continue;
                }
            }
            self.push_event(t, 0, x, robot.0, Payload::Presence { version });
        }
    }

    fn grid_eligible(&self, robot: RobotId) -> bool {
        matches!(self.scenario.adversary, AdversaryPolicy::GameTree { .. })
            && self.is_faulty(robot)
            && !self.robots[robot.0 as usize].burned_claim
            && !self.robots[robot.0 as usize].identified
    }

    /// Makes a position interesting to crossing detection from now on.
    fn watch_new_position(&mut self, pos: Pos, now: Time) {
        for i in 0..self.robots.len() {
            let r = &self.robots[i];
            if r.velocity.is_zero() {
                continue;
            }
            let t_cross = r.anchor_t + (pos - r.anchor_p) / r.velocity;
            if t_cross <= now {
                continue;
            }
            if let Some(&w) = r.waypoints.front() {
                let t_end = r.anchor_t + (w - r.anchor_p) / r.velocity;
                if t_cross >= t_end {
                    continue;
                }
            }
            let version = r.version;
            let id = r.id.0;
            self.push_event(t_cross, 0, pos, id, Payload::Presence { version });
        }
    }

    fn apply_orders(&mut self, orders: Vec<Order>, now: Time) {
        // Robots sharing a motion and a position in one batch form a cohort.
        let mut batch: Vec<(Motion, Pos, u32)> = Vec::new();
        for order in orders {
            if self.robots[order.robot.0 as usize].identified {
                continue;
            }
            let pos = self.robots[order.robot.0 as usize].position_at(now);
            let cohort = match batch
                .iter()
                .find(|(m, p, _)| *m == order.motion && *p == pos)
            {
                Some((_, _, c)) => *c,
                None => {
                    let c = self.next_cohort;
                    self.next_cohort += 1;
                    batch.push((order.motion.clone(), pos, c));
                    c
                }
            };
            self.robots[order.robot.0 as usize].stash = None;
            self.robots[order.robot.0 as usize].cohort = cohort;
            if let Err(Stop::Fail(e)) = self.set_motion(order.robot, order.motion, now) {
                // Motion application only fails on kinematics bugs.
                panic!("order application failed: {e}");
            }
        }
    }

    // -- presence and votes --------------------------------------------------

    fn handle_leg_end(&mut self, robot: RobotId, pos: Pos, now: Time) -> Result<(), Stop> {
        {
            let idx = robot.0 as usize;
            let r = &mut self.robots[idx];
            r.path
                .push(now, pos)
                .map_err(|source| Stop::Fail(SimError::Kinematics { robot, source }))?;
            r.anchor_t = now;
            r.anchor_p = pos;
            r.waypoints.pop_front();
            r.velocity = if let Some(&w) = r.waypoints.front() {
                if w > pos {
                    Rational::ONE
                } else {
                    -Rational::ONE
                }
            } else {
                r.terminal
            };
            r.version += 1;
            r.path.set_terminal_velocity(r.velocity);
        }
        self.schedule_leg(robot, now);
        self.handle_presence(robot, pos, now)
    }

    fn handle_presence(&mut self, robot: RobotId, pos: Pos, now: Time) -> Result<(), Stop> {
        if self.terminated_at.is_some() {
            return Ok(());
        }
        let target_pos = self.scenario.target.position();
        let tracked = self.claimed.contains(&pos) || pos == target_pos;
        if tracked {
            self.ledger.record_visit(robot, pos, now);
            if self.arrivals_logged.insert((robot, pos)) {
                self.events.push(Event {
                    time: now,
                    kind: EventKind::Arrival { robot, pos },
                });
            }
        }

        // Scripted false claims fire on first touch.
        if let AdversaryPolicy::FalseClaims(schedule) = &self.scenario.adversary {
            let due = schedule
                .iter()
                .any(|&(r, p)| r == robot && p == pos && !self.fired_claims.contains(&(robot, pos)));
            if due && !self.robots[robot.0 as usize].identified {
                self.fired_claims.insert((robot, pos));
                self.push_event(now, 1, pos, robot.0, Payload::Announce);
            }
        }

        // Claim opportunities for the game tree.
        if self.grid_eligible(robot)
            && self.grid.contains(&pos)
            && !self.claimed.contains(&pos)
            && pos != target_pos
            && !self.ledger.has_voted(robot, pos)
        {
            self.log_opportunity(robot, pos, now);
        }

        if pos == target_pos && !self.robots[robot.0 as usize].identified {
            if !self.is_faulty(robot) {
                if self.announced_target.insert(robot) {
                    self.push_event(now, 1, pos, robot.0, Payload::Announce);
                }
            } else if !self.claimed.contains(&pos) && !self.decided.contains(&(robot, pos)) {
                // If a reliable robot stands here it is announcing this
                // instant; the claim-raise vote covers this robot's choice.
                let reliable_here = self.robots.iter().any(|o| {
                    !self.is_faulty(o.id) && !o.identified && o.position_at(now) == pos
                });
                if !reliable_here {
                    let yes = self.ask_class_votes(
                        pos,
                        now,
                        vec![robot],
                        true,
                        self.visitors_preview(pos, now),
                        0,
                    )?;
                    for r in yes {
                        self.push_event(now, 1, pos, r.0, Payload::Announce);
                    }
                }
            }
        }

        if self.active == Some(pos) {
            self.push_event(now, 2, pos, u32::MAX, Payload::Resolve);
        }
        Ok(())
    }

    fn log_opportunity(&mut self, robot: RobotId, pos: Pos, now: Time) {
        if !self.opp_seen.insert((now, robot, pos)) {
            return;
        }
        // Viability: some yes-count must leave the claim unresolved,
        // otherwise the claim refutes instantly and is dominated.
        let f_rem = self.f_remaining();
        let standing_faulty = self
            .robots
            .iter()
            .filter(|r| {
                self.is_faulty(r.id)
                    && !r.identified
                    && r.position_at(now) == pos
                    && !self.ledger.has_voted(r.id, pos)
            })
            .count()
            .max(1);
        let visitors = self.visitors_preview(pos, now);
        if visitors > f_rem + standing_faulty.min(f_rem) {
            return;
        }
        let cohort = self.robots[robot.0 as usize].cohort;
        self.opportunities.push(Opportunity {
            time: now,
            robot,
            cohort,
            pos,
        });
    }

    /// Distinct non-disregarded robots that have been at `pos` by `now`.
    fn visitors_preview(&self, pos: Pos, now: Time) -> usize {
        self.robots
            .iter()
            .filter(|r| !r.identified)
            .filter(|r| {
                let mut path = r.path.clone();
                path.set_terminal_velocity(r.velocity);
                path.first_visit(pos, Rational::ZERO)
                    .map_or(false, |t| t <= now)
            })
            .count()
    }

    // -- claims -----------------------------------------------------------

    fn handle_announce(&mut self, robot: RobotId, pos: Pos, now: Time) -> Result<(), Stop> {
        if self.terminated_at.is_some() {
            return Ok(());
        }
        if self.robots[robot.0 as usize].identified {
            return Ok(());
        }
        debug_assert_eq!(
            self.robots[robot.0 as usize].position_at(now),
            pos,
            "broadcast position must match the claimant's location"
        );
        let first_claim_here = !self.claimed.contains(&pos);
        self.ledger.record_yes(robot, pos, now);
        self.robots[robot.0 as usize].burned_claim = true;
        self.decided.insert((robot, pos));
        self.events.push(Event {
            time: now,
            kind: EventKind::Announcement {
                robot,
                pos,
                value: true,
            },
        });
        if first_claim_here {
            self.claimed.insert(pos);
            self.watch_new_position(pos, now);
            // Latent silent visits become countable now.
            let visits: Vec<(RobotId, Time)> = self
                .robots
                .iter()
                .filter_map(|r| {
                    let mut path = r.path.clone();
                    path.set_terminal_velocity(r.velocity);
                    path.first_visit(pos, Rational::ZERO)
                        .filter(|&t| t <= now)
                        .map(|t| (r.id, t))
                })
                .collect();
            for (r, t) in visits {
                self.ledger.record_visit(r, pos, t);
            }
        }
        // Co-located faulty robots choose their vote the instant they hear
        // the broadcast, even if its processing is deferred.
        self.standing_votes(pos, now)?;

        match self.active {
            Some(p) if p == pos => {
                self.push_event(now, 2, pos, u32::MAX, Payload::Resolve);
            }
            Some(_) => {
                self.withheld.insert((pos.abs(), pos));
            }
            None => {
                self.push_event(now, 2, pos, u32::MAX, Payload::Resolve);
            }
        }
        Ok(())
    }

    /// Asks every undecided faulty robot standing at `pos` for its vote.
    fn standing_votes(&mut self, pos: Pos, now: Time) -> Result<(), Stop> {
        let mut classes: BTreeMap<(u32, bool), Vec<RobotId>> = BTreeMap::new();
        for r in &self.robots {
            if self.is_faulty(r.id)
                && !r.identified
                && r.position_at(now) == pos
                && !self.decided.contains(&(r.id, pos))
                && self.ledger.yes_time(r.id, pos).is_none()
            {
                // A strictly earlier silent visit is a committed "no".
                let visited_earlier = {
                    let mut path = r.path.clone();
                    path.set_terminal_velocity(r.velocity);
                    path.first_visit(pos, Rational::ZERO)
                        .map_or(false, |t| t < now)
                };
                if !visited_earlier {
                    classes.entry((r.cohort, r.burned_claim)).or_default().push(r.id);
                }
            }
        }
        let class_list: Vec<Vec<RobotId>> = classes.into_values().collect();
        let mut later_max: usize = class_list.iter().map(|c| c.len()).sum();
        let visitors = self.visitors_preview(pos, now);
        for members in class_list {
            later_max -= members.len();
            let yes = self.ask_class_votes(pos, now, members, true, visitors, later_max)?;
            for r in yes {
                self.ledger.record_yes(r, pos, now);
                self.robots[r.0 as usize].burned_claim = true;
                self.events.push(Event {
                    time: now,
                    kind: EventKind::Announcement {
                        robot: r,
                        pos,
                        value: true,
                    },
                });
            }
        }
        Ok(())
    }

    /// Resolves the vote choice for one class of interchangeable robots.
    fn ask_class_votes(
        &mut self,
        pos: Pos,
        now: Time,
        members: Vec<RobotId>,
        at_claim_raise: bool,
        visitors: usize,
        later_classes_max: usize,
    ) -> Result<Vec<RobotId>, Stop> {
        if members.is_empty() {
            return Ok(Vec::new());
        }
        for &m in &members {
            self.decided.insert((m, pos));
        }
        let is_target_pos = pos == self.scenario.target.position();
        let yes: Vec<RobotId> = match &self.scenario.adversary {
            AdversaryPolicy::Honest => {
                if is_target_pos {
                    members.clone()
                } else {
                    Vec::new()
                }
            }
            AdversaryPolicy::SilentAtTarget(which) => {
                if is_target_pos {
                    members.iter().filter(|r| !which.contains(r)).copied().collect()
                } else {
                    Vec::new()
                }
            }
            AdversaryPolicy::FalseClaims(_) => {
                if is_target_pos {
                    members.clone()
                } else {
                    Vec::new()
                }
            }
            AdversaryPolicy::GameTree { .. } => {
                if self.vote_cursor >= self.vote_decisions.len() {
                    let tally = self.ledger.tally(pos, now, &self.identified);
                    return Err(Stop::Need(PendingVote {
                        pos,
                        time: now,
                        cohort: self.robots[members[0].0 as usize].cohort,
                        robots: members,
                        is_target_pos,
                        at_claim_raise,
                        yes_so_far: tally.yes(),
                        visitors,
                        later_classes_max,
                        f_remaining: self.f_remaining(),
                    }));
                }
                let (dpos, dtime, dyes) = self.vote_decisions[self.vote_cursor];
                self.vote_cursor += 1;
                if dpos != pos || dtime != now {
                    return Err(Stop::Fail(SimError::DecisionMismatch(format!(
                        "expected vote at ({pos}, {now}), prefix has ({dpos}, {dtime})"
                    ))));
                }
                if dyes > members.len() {
                    return Err(Stop::Fail(SimError::DecisionMismatch(format!(
                        "vote count {dyes} exceeds class size {}",
                        members.len()
                    ))));
                }
                members[..dyes].to_vec()
            }
        };
        Ok(yes)
    }

    // -- resolution ---------------------------------------------------------

    fn handle_resolve(&mut self, pos: Pos, now: Time) -> Result<(), Stop> {
        if self.terminated_at.is_some() {
            return Ok(());
        }
        match self.active {
            Some(p) if p == pos => self.recheck_active(pos, now),
            Some(_) => {
                // An announcement raced a conflict opening at this instant.
                if self.ledger.tally(pos, now, &self.identified).yes() > 0 {
                    self.withheld.insert((pos.abs(), pos));
                }
                Ok(())
            }
            None => {
                self.evaluate(pos, now)?;
                self.drain_withheld(now)
            }
        }
    }

    /// Vote check of the active conflict after new arrivals.
    fn recheck_active(&mut self, pos: Pos, now: Time) -> Result<(), Stop> {
        self.arrival_votes(pos, now)?;
        let tally = self.ledger.tally(pos, now, &self.identified);
        match resolve(&tally, self.f_remaining()) {
            Verdict::Found => self.terminate(pos, now),
            Verdict::Refuted { newly_identified } => {
                self.events.push(Event {
                    time: now,
                    kind: EventKind::Resolution {
                        pos,
                        verdict: Verdict::Refuted {
                            newly_identified: newly_identified.clone(),
                        },
                    },
                });
                self.identify(&newly_identified, now)?;
                self.active = None;
                self.unfreeze(now)?;
                let ctx = ConflictCtx { pos, time: now, tally };
                let verdict = Verdict::Refuted { newly_identified };
                let orders = {
                    let view = make_view(&self.robots, &self.identified, &self.ledger, self.scenario.f, now);
                    self.strategy.on_resolved(&ctx, &verdict, &view)
                };
                self.apply_orders(orders, now);
                self.drain_withheld(now)
            }
            Verdict::Unresolved => {
                let inbound = self.robots.iter().any(|r| {
                    !r.identified
                        && !self.ledger.has_voted(r.id, pos)
                        && r.plan_reaches(pos, now)
                });
                if inbound {
                    return Ok(());
                }
                let ctx = ConflictCtx { pos, time: now, tally };
                let orders = {
                    let view = make_view(&self.robots, &self.identified, &self.ledger, self.scenario.f, now);
                    self.strategy.on_stalled(&ctx, &view)
                };
                if orders.is_empty() {
                    return Err(Stop::Fail(SimError::Stalled(pos)));
                }
                self.apply_orders(orders, now);
                Ok(())
            }
        }
    }

    /// Votes of faulty robots that arrived at the active claim this instant.
    fn arrival_votes(&mut self, pos: Pos, now: Time) -> Result<(), Stop> {
        let mut classes: BTreeMap<(u32, bool), Vec<RobotId>> = BTreeMap::new();
        for r in &self.robots {
            if self.is_faulty(r.id)
                && !r.identified
                && r.position_at(now) == pos
                && !self.decided.contains(&(r.id, pos))
                && self.ledger.yes_time(r.id, pos).is_none()
            {
                let mut path = r.path.clone();
                path.set_terminal_velocity(r.velocity);
                let fv = path.first_visit(pos, Rational::ZERO);
                if fv == Some(now) {
                    classes.entry((r.cohort, r.burned_claim)).or_default().push(r.id);
                }
            }
        }
        let class_list: Vec<Vec<RobotId>> = classes.into_values().collect();
        let mut later_max: usize = class_list.iter().map(|c| c.len()).sum();
        let visitors = self.visitors_preview(pos, now);
        for members in class_list {
            later_max -= members.len();
            let yes = self.ask_class_votes(pos, now, members, false, visitors, later_max)?;
            for r in yes {
                self.ledger.record_yes(r, pos, now);
                self.robots[r.0 as usize].burned_claim = true;
                self.events.push(Event {
                    time: now,
                    kind: EventKind::Announcement {
                        robot: r,
                        pos,
                        value: true,
                    },
                });
            }
        }
        Ok(())
    }

    /// First evaluation of a claim with no conflict in progress.
    fn evaluate(&mut self, pos: Pos, now: Time) -> Result<(), Stop> {
        let tally = self.ledger.tally(pos, now, &self.identified);
        if tally.yes() == 0 {
            return Ok(());
        }
        match resolve(&tally, self.f_remaining()) {
            Verdict::Found => self.terminate(pos, now),
            Verdict::Refuted { newly_identified } => {
                self.events.push(Event {
                    time: now,
                    kind: EventKind::Resolution {
                        pos,
                        verdict: Verdict::Refuted {
                            newly_identified: newly_identified.clone(),
                        },
                    },
                });
                self.identify(&newly_identified, now)
            }
            Verdict::Unresolved => {
                self.active = Some(pos);
                self.freeze_all(now)?;
                let ctx = ConflictCtx { pos, time: now, tally };
                let orders = {
                    let view = make_view(&self.robots, &self.identified, &self.ledger, self.scenario.f, now);
                    self.strategy.on_conflict(&ctx, &view)
                };
                self.apply_orders(orders, now);
                Ok(())
            }
        }
    }

    /// Re-raises withheld announcements, oldest frontier first.
    fn drain_withheld(&mut self, now: Time) -> Result<(), Stop> {
        while self.terminated_at.is_none() && self.active.is_none() {
            let next = match self.withheld.iter().next() {
                Some(&k) => k,
                None => break,
            };
            self.withheld.remove(&next);
            let pos = next.1;
            // Dropped entirely if every claimant has been identified.
            if self.ledger.tally(pos, now, &self.identified).yes() == 0 {
                continue;
            }
            self.standing_votes(pos, now)?;
            self.evaluate(pos, now)?;
        }
        Ok(())
    }

    fn identify(&mut self, ids: &BTreeSet<RobotId>, now: Time) -> Result<(), Stop> {
        for &r in ids {
            debug_assert!(self.is_faulty(r), "identified a reliable robot");
            self.identified.insert(r);
            self.robots[r.0 as usize].identified = true;
            self.robots[r.0 as usize].stash = None;
            self.set_motion(r, Motion::hold(), now)?;
        }
        Ok(())
    }

    fn freeze_all(&mut self, now: Time) -> Result<(), Stop> {
        for i in 0..self.robots.len() {
            if self.robots[i].identified || self.robots[i].stash.is_some() {
                continue;
            }
            let stash = StashedPlan {
                waypoints: self.robots[i].waypoints.clone(),
                terminal: if self.robots[i].waypoints.is_empty() {
                    self.robots[i].velocity
                } else {
                    self.robots[i].terminal
                },
            };
            let id = self.robots[i].id;
            self.robots[i].stash = Some(stash);
            self.set_motion(id, Motion::hold(), now)?;
        }
        // Frozen faulty robots standing on a grid point may still claim.
        if matches!(self.scenario.adversary, AdversaryPolicy::GameTree { .. }) {
            let target_pos = self.scenario.target.position();
            let snapshot: Vec<(RobotId, Pos)> = self
                .robots
                .iter()
                .map(|r| (r.id, r.position_at(now)))
                .collect();
            for (id, pos) in snapshot {
                if self.grid_eligible(id)
                    && self.grid.contains(&pos)
                    && !self.claimed.contains(&pos)
                    && pos != target_pos
                    && self
                        .ledger
                        .yes_time(id, pos)
                        .is_none()
                {
                    // Only a robot that just arrived can still speak up.
                    let mut path = self.robots[id.0 as usize].path.clone();
                    path.set_terminal_velocity(self.robots[id.0 as usize].velocity);
                    if path.first_visit(pos, Rational::ZERO) == Some(now) {
                        self.log_opportunity(id, pos, now);
                    }
                }
            }
        }
        Ok(())
    }

    fn unfreeze(&mut self, now: Time) -> Result<(), Stop> {
        for i in 0..self.robots.len() {
            if let Some(stash) = self.robots[i].stash.take() {
                let id = self.robots[i].id;
                let motion = if stash.waypoints.is_empty() {
                    Motion::Glide {
                        velocity: stash.terminal,
                    }
                } else {
                    Motion::Route {
                        waypoints: stash.waypoints.into_iter().collect(),
                        terminal: stash.terminal,
                    }
                };
                self.set_motion(id, motion, now)?;
            }
        }
        Ok(())
    }

    fn terminate(&mut self, pos: Pos, now: Time) -> Result<(), Stop> {
        self.events.push(Event {
            time: now,
            kind: EventKind::Resolution {
                pos,
                verdict: Verdict::Found,
            },
        });
        self.events.push(Event {
            time: now,
            kind: EventKind::Termination { pos },
        });
        self.terminated_at = Some((pos, now));
        Err(Stop::Terminated)
    }

}

/// Observable snapshot from disjoint simulator fields.
fn make_view<'v>(
    robots: &[RobotState],
    identified: &'v BTreeSet<RobotId>,
    ledger: &'v VoteLedger,
    f: usize,
    now: Time,
) -> WorldView<'v> {
    WorldView {
        time: now,
        f_remaining: f - identified.len(),
        identified,
        ledger,
        positions: robots.iter().map(|r| (r.id, r.position_at(now))).collect(),
    }
}

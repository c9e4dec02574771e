//! Claim ledger and majority vote resolution.
//!
//! A position's vote `V(x, t) = (y, z)` counts the robots that have claimed
//! the target is at `x` by time `t` against those that have visited `x`
//! silently. With at most `f` unidentified faulty robots, `y > f` certifies
//! the target and `z > f` refutes the claim, exposing every yes-voter.

use std::collections::{BTreeMap, BTreeSet};

use crate::trajectory::{Pos, RobotId, Time};

/// How a vote entered the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimKind {
    /// Explicit broadcast from the claimed position.
    ExplicitBroadcast,
    /// Silent visit, interpreted as "not here".
    ImplicitSilentVisit,
}

/// A single recorded vote about one position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub robot: RobotId,
    pub position: Pos,
    pub time: Time,
    pub value: bool,
    pub kind: ClaimKind,
}

/// The vote about one position at one instant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteTally {
    pub position: Pos,
    pub yes_voters: BTreeSet<RobotId>,
    pub no_voters: BTreeSet<RobotId>,
}

impl VoteTally {
    pub fn yes(&self) -> usize {
        self.yes_voters.len()
    }

    pub fn no(&self) -> usize {
        self.no_voters.len()
    }
}

/// Outcome of applying the majority rules to a tally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Found,
    Refuted { newly_identified: BTreeSet<RobotId> },
    Unresolved,
}

/// Resolves a tally against the current bound on unidentified faulty robots.
pub fn resolve(tally: &VoteTally, f_remaining: usize) -> Verdict {
    if tally.yes() > f_remaining {
        Verdict::Found
    } else if tally.no() > f_remaining {
        Verdict::Refuted {
            newly_identified: tally.yes_voters.clone(),
        }
    } else {
        Verdict::Unresolved
    }
}

/// Per-position history of explicit claims and silent visits.
///
/// Only the first record per `(robot, position)` counts; a robot cannot
/// change its vote. Queries exclude robots that have been identified as
/// faulty, past and future.
#[derive(Clone, Debug, Default)]
pub struct VoteLedger {
    yes: BTreeMap<Pos, BTreeMap<RobotId, Time>>,
    visits: BTreeMap<Pos, BTreeMap<RobotId, Time>>,
}

impl VoteLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an explicit "target here" broadcast.
    pub fn record_yes(&mut self, robot: RobotId, pos: Pos, time: Time) {
        self.yes.entry(pos).or_default().entry(robot).or_insert(time);
        // A claim is made from the claimed position, so it is also a visit.
        self.record_visit(robot, pos, time);
    }

    /// Records that `robot` has been at `pos` (silently or otherwise).
    pub fn record_visit(&mut self, robot: RobotId, pos: Pos, time: Time) {
        self.visits
            .entry(pos)
            .or_default()
            .entry(robot)
            .or_insert(time);
    }

    pub fn has_voted(&self, robot: RobotId, pos: Pos) -> bool {
        self.visits
            .get(&pos)
            .map_or(false, |m| m.contains_key(&robot))
    }

    pub fn yes_time(&self, robot: RobotId, pos: Pos) -> Option<Time> {
        self.yes.get(&pos).and_then(|m| m.get(&robot)).copied()
    }

    /// `V(x, t)` with identified-faulty robots disregarded everywhere.
    pub fn tally(&self, x: Pos, t: Time, disregarded: &BTreeSet<RobotId>) -> VoteTally {
        let empty = BTreeMap::new();
        let yes_map = self.yes.get(&x).unwrap_or(&empty);
        let visit_map = self.visits.get(&x).unwrap_or(&empty);
        let yes_voters: BTreeSet<RobotId> = yes_map
            .iter()
            .filter(|(r, &at)| at <= t && !disregarded.contains(r))
            .map(|(&r, _)| r)
            .collect();
        let no_voters: BTreeSet<RobotId> = visit_map
            .iter()
            .filter(|(r, &at)| at <= t && !disregarded.contains(r) && !yes_voters.contains(r))
            .map(|(&r, _)| r)
            .collect();
        VoteTally {
            position: x,
            yes_voters,
            no_voters,
        }
    }

    /// All claims about `x` as a flat list, explicit first.
    pub fn claims_at(&self, x: Pos) -> Vec<Claim> {
        let mut out = Vec::new();
        if let Some(m) = self.yes.get(&x) {
            for (&robot, &time) in m {
                out.push(Claim {
                    robot,
                    position: x,
                    time,
                    value: true,
                    kind: ClaimKind::ExplicitBroadcast,
                });
            }
        }
        if let Some(m) = self.visits.get(&x) {
            for (&robot, &time) in m {
                if self.yes_time(robot, x).is_none() {
                    out.push(Claim {
                        robot,
                        position: x,
                        time,
                        value: false,
                        kind: ClaimKind::ImplicitSilentVisit,
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn r(id: u32) -> RobotId {
        RobotId(id)
    }

    #[test]
    fn empty_ledger_tallies_to_zero() {
        let ledger = VoteLedger::new();
        let t = ledger.tally(rat(1, 1), rat(5, 1), &BTreeSet::new());
        assert_eq!((t.yes(), t.no()), (0, 0));
    }

    #[test]
    fn one_yes_one_silent_visit() {
        let mut ledger = VoteLedger::new();
        let x = rat(1, 1);
        ledger.record_yes(r(0), x, rat(1, 1));
        ledger.record_visit(r(1), x, rat(1, 1));
        let t = ledger.tally(x, rat(1, 1), &BTreeSet::new());
        assert_eq!((t.yes(), t.no()), (1, 1));
    }

    #[test]
    fn disregarded_robot_vanishes_from_tallies() {
        let mut ledger = VoteLedger::new();
        let x = rat(1, 1);
        ledger.record_yes(r(0), x, rat(1, 1));
        let dis: BTreeSet<RobotId> = [r(0)].into();
        let t = ledger.tally(x, rat(9, 1), &dis);
        assert_eq!((t.yes(), t.no()), (0, 0));
    }

    #[test]
    fn tally_respects_time_cutoff() {
        let mut ledger = VoteLedger::new();
        let x = rat(2, 1);
        ledger.record_yes(r(0), x, rat(2, 1));
        ledger.record_visit(r(1), x, rat(6, 1));
        let t = ledger.tally(x, rat(3, 1), &BTreeSet::new());
        assert_eq!((t.yes(), t.no()), (1, 0));
    }

    #[test]
    fn first_vote_per_position_sticks() {
        let mut ledger = VoteLedger::new();
        let x = rat(1, 1);
        ledger.record_visit(r(0), x, rat(1, 1));
        ledger.record_yes(r(0), x, rat(2, 1));
        // The silent visit at t=1 stands; the later yes joins the yes set
        // only for queries at t >= 2, and the robot is never double-counted.
        let t1 = ledger.tally(x, rat(1, 1), &BTreeSet::new());
        assert_eq!((t1.yes(), t1.no()), (0, 1));
        let t2 = ledger.tally(x, rat(2, 1), &BTreeSet::new());
        assert_eq!((t2.yes(), t2.no()), (1, 0));
    }

    fn tally_of(y: usize, z: usize) -> VoteTally {
        VoteTally {
            position: rat(1, 1),
            yes_voters: (0..y as u32).map(r).collect(),
            no_voters: (100..(100 + z) as u32).map(r).collect(),
        }
    }

    #[test]
    fn resolve_examples() {
        assert_eq!(resolve(&tally_of(2, 0), 1), Verdict::Found);
        let v = resolve(&tally_of(1, 2), 1);
        match v {
            Verdict::Refuted { newly_identified } => {
                assert_eq!(newly_identified, [r(0)].into());
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        assert_eq!(resolve(&tally_of(1, 1), 1), Verdict::Unresolved);
    }

    #[test]
    fn found_and_refuted_are_exclusive() {
        // With y + z voters and one side bounded by f, both sides cannot
        // exceed f at once unless y + z > 2f + 1 and both > f, which resolve
        // would report as Found (checked first); enumerate small tallies.
        for f in 0..4usize {
            for y in 0..6 {
                for z in 0..6 {
                    let v = resolve(&tally_of(y, z), f);
                    if y <= f && z <= f {
                        assert_eq!(v, Verdict::Unresolved);
                    }
                    if matches!(v, Verdict::Found) {
                        assert!(y > f);
                    }
                    if matches!(v, Verdict::Refuted { .. }) {
                        assert!(z > f && y <= f);
                    }
                }
            }
        }
    }

    #[test]
    fn adding_claims_never_flips_a_decided_verdict() {
        // Monotonicity: growing either voter set can move Unresolved to a
        // decided verdict but never Found -> Refuted or vice versa, because
        // yes-voters only ever grow and Found is checked before Refuted.
        let mut ledger = VoteLedger::new();
        let x = rat(1, 1);
        for i in 0..3 {
            ledger.record_yes(r(i), x, rat(i as i128 + 1, 1));
        }
        let mut last = Verdict::Unresolved;
        for step in 1..10i128 {
            let t = ledger.tally(x, rat(step, 1), &BTreeSet::new());
            let v = resolve(&t, 2);
            if matches!(last, Verdict::Found) {
                assert!(matches!(v, Verdict::Found));
            }
            last = v;
        }
        assert_eq!(last, Verdict::Found);
    }
}

//! Byzantine behavior policies and exhaustive worst-case search.
//!
//! The adversary controls the faulty set, a schedule of false claims on a
//! position grid, and every faulty robot's yes/silent choice at each vote
//! point. `best_response` runs a depth-first minimax over those decisions by
//! replaying the deterministic simulation with growing decision prefixes.
//! The tree is finite: every refutation permanently removes at least one
//! faulty robot, and each robot issues at most one fresh claim.
//!
//! Two exactness-preserving reductions keep the tree small: faulty sets are
//! enumerated once per orbit under within-group permutation and left/right
//! reflection, and claim/vote branches that would refute instantly (taking
//! zero time and burning faulty robots) are dominated and skipped.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use crate::engine::{
    competitive_ratio, run, AdversaryPolicy, Decision, Opportunity, PendingVote, RunOutcome,
    Scenario, SimError, Transcript,
};
use crate::rational::Rational;
use crate::strategies::{GroupPlan, StrategySpec};
use crate::trajectory::{Pos, RobotId, Target, Time};

/// Limits and switches for a worst-case sweep.
#[derive(Clone, Debug)]
pub struct SweepOptions {
    /// Maximum number of simulation replays (tree nodes).
    pub node_budget: u64,
    /// Restrict the adversary to the two-announcement pattern
    /// x0 <= x1 <= d with extremal vote counts (the structured fallback).
    pub two_announcement_pattern: bool,
    /// Validate every robot path at every leaf (slower; the engine already
    /// checks each segment incrementally).
    pub check_paths: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            node_budget: 10_000_000,
            two_announcement_pattern: false,
            check_paths: false,
        }
    }
}

/// Concrete scenario achieving a reported ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessScenario {
    pub faulty: BTreeSet<RobotId>,
    pub target_side: i8,
    pub decisions: Vec<Decision>,
}

/// Result of one worst-case sweep.
#[derive(Clone, Debug)]
pub struct WorstCaseReport {
    pub strategy: String,
    pub n: usize,
    pub f: usize,
    pub grid_resolution: usize,
    pub d: Rational,
    pub sup_ratio: Rational,
    pub witness: WitnessScenario,
    /// False when the node budget tripped or the structured pattern was used.
    pub exhaustive: bool,
    pub nodes: u64,
    pub leaves: u64,
    /// Soundness or accusation failures observed in any explored leaf.
    pub violations: Vec<String>,
}

impl WorstCaseReport {
    /// Structured-text form, stable across runs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "strategy {}", self.strategy);
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "f {}", self.f);
        let _ = writeln!(out, "grid_m {}", self.grid_resolution);
        let _ = writeln!(out, "d {}", self.d);
        let _ = writeln!(out, "sup_ratio {}", self.sup_ratio);
        let _ = writeln!(out, "exhaustive {}", self.exhaustive);
        let _ = writeln!(out, "nodes {}", self.nodes);
        let _ = writeln!(out, "leaves {}", self.leaves);
        let _ = writeln!(out, "witness_side {}", self.witness.target_side);
        let faulty: Vec<String> = self.witness.faulty.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "witness_faulty {}", faulty.join(","));
        for d in &self.witness.decisions {
            match d {
                Decision::Claim { robot, pos, time } => {
                    let _ = writeln!(out, "witness_claim {robot} {pos} {time}");
                }
                Decision::Votes { pos, time, yes } => {
                    let _ = writeln!(out, "witness_votes {pos} {time} {yes}");
                }
            }
        }
        for v in &self.violations {
            let _ = writeln!(out, "violation {v}");
        }
        out
    }
}

impl fmt::Display for WorstCaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// One representative faulty subset per orbit under within-group
/// permutations and, when the plan is symmetric, left/right reflection.
pub fn symmetry_prune(plan: &GroupPlan, f: usize) -> Vec<BTreeSet<RobotId>> {
    let sizes: Vec<usize> = plan.groups.iter().map(|g| g.members.len()).collect();
    count_vectors(&sizes, f)
        .into_iter()
        .filter(|cv| match &plan.mirror {
            Some(mir) => *cv <= mirror_counts(cv, mir),
            None => true,
        })
        .map(|cv| faulty_ids(plan, &cv))
        .collect()
}

/// `(faulty set, target side)` pairs, one per orbit under the same
/// symmetries extended to the target placement.
fn scenario_pairs(plan: &GroupPlan, f: usize) -> Vec<(BTreeSet<RobotId>, i8)> {
    let sizes: Vec<usize> = plan.groups.iter().map(|g| g.members.len()).collect();
    let mut pairs = Vec::new();
    for cv in count_vectors(&sizes, f) {
        for side in [1i8, -1] {
            let keep = match &plan.mirror {
                Some(mir) => {
                    let mirrored = (mirror_counts(&cv, mir), -side);
                    (cv.clone(), side) <= mirrored
                }
                None => true,
            };
            if keep {
                pairs.push((faulty_ids(plan, &cv), side));
            }
        }
    }
    pairs
}

fn count_vectors(sizes: &[usize], f: usize) -> Vec<Vec<usize>> {
    fn rec(
        sizes: &[usize],
        i: usize,
        left: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == sizes.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let cap = sizes[i].min(left);
        for c in 0..=cap {
            cur[i] = c;
            rec(sizes, i + 1, left - c, cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; sizes.len()];
    rec(sizes, 0, f, &mut cur, &mut out);
    out
}

fn mirror_counts(cv: &[usize], mirror: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; cv.len()];
    for (i, &c) in cv.iter().enumerate() {
        out[mirror[i]] = c;
    }
    out
}

fn faulty_ids(plan: &GroupPlan, cv: &[usize]) -> BTreeSet<RobotId> {
    let mut out = BTreeSet::new();
    for (g, &c) in plan.groups.iter().zip(cv.iter()) {
        for &m in g.members.iter().take(c) {
            out.insert(m);
        }
    }
    out
}

fn signed_grid(m: usize, d: Rational) -> Vec<Pos> {
    let mut grid: Vec<Pos> = Vec::new();
    for j in 1..=m {
        let g = d * Rational::new(j as i128, m as i128);
        grid.push(g);
        grid.push(-g);
    }
    grid.sort();
    grid
}

/// Exhaustive worst case of `strategy` against every admissible adversary,
/// with false claims restricted to the grid `{±d·j/m : 1 <= j <= m}`.
pub fn best_response(
    strategy: &StrategySpec,
    m: usize,
    d: Rational,
    opts: &SweepOptions,
) -> Result<WorstCaseReport, SimError> {
    assert!(m >= 1, "grid resolution must be at least 1");
    let plan = strategy.plan().map_err(SimError::StrategyInapplicable)?;
    let n = strategy.n().map_err(SimError::StrategyInapplicable)?;
    let f = strategy.f();

    let mut search = Search {
        strategy,
        d,
        grid: signed_grid(m, d),
        opts,
        nodes: 0,
        leaves: 0,
        exhausted_budget: false,
        best: None,
        violations: Vec::new(),
    };
    for (faulty, side) in scenario_pairs(&plan, f) {
        let mut prefix = Vec::new();
        search.explore(&faulty, side, &mut prefix)?;
    }

    let (sup_ratio, witness) = search.best.unwrap_or_else(|| {
        (
            Rational::ZERO,
            WitnessScenario {
                faulty: BTreeSet::new(),
                target_side: 1,
                decisions: Vec::new(),
            },
        )
    });
    Ok(WorstCaseReport {
        strategy: strategy.display_name(),
        n,
        f,
        grid_resolution: m,
        d,
        sup_ratio,
        witness,
        exhaustive: !search.exhausted_budget && !opts.two_announcement_pattern,
        nodes: search.nodes,
        leaves: search.leaves,
        violations: search.violations,
    })
}

/// Rebuilds the scenario a report's witness describes.
pub fn witness_scenario(
    strategy: &StrategySpec,
    m: usize,
    d: Rational,
    witness: &WitnessScenario,
) -> Result<Scenario, SimError> {
    Scenario::new(
        strategy.clone(),
        witness.faulty.clone(),
        Target::new(witness.target_side, d),
        AdversaryPolicy::GameTree {
            grid: signed_grid(m, d),
            decisions: witness.decisions.clone(),
        },
    )
}

struct Search<'a> {
    strategy: &'a StrategySpec,
    d: Rational,
    grid: Vec<Pos>,
    opts: &'a SweepOptions,
    nodes: u64,
    leaves: u64,
    exhausted_budget: bool,
    best: Option<(Rational, WitnessScenario)>,
    violations: Vec<String>,
}

impl Search<'_> {
    fn explore(
        &mut self,
        faulty: &BTreeSet<RobotId>,
        side: i8,
        prefix: &mut Vec<Decision>,
    ) -> Result<(), SimError> {
        if self.nodes >= self.opts.node_budget {
            self.exhausted_budget = true;
            return Ok(());
        }
        self.nodes += 1;
        let scenario = Scenario::new(
            self.strategy.clone(),
            faulty.clone(),
            Target::new(side, self.d),
            AdversaryPolicy::GameTree {
                grid: self.grid.clone(),
                decisions: prefix.clone(),
            },
        )?;
        match run(&scenario) {
            Ok(RunOutcome::Done {
                transcript,
                opportunities,
            }) => {
                self.leaf(&transcript, faulty, side, prefix);
                for claim in self.claim_options(&opportunities, prefix, None) {
                    prefix.push(claim);
                    self.explore(faulty, side, prefix)?;
                    prefix.pop();
                }
                Ok(())
            }
            Ok(RunOutcome::NeedVote {
                pending,
                opportunities,
            }) => {
                for claim in self.claim_options(&opportunities, prefix, Some(pending.time)) {
                    prefix.push(claim);
                    self.explore(faulty, side, prefix)?;
                    prefix.pop();
                }
                for yes in self.vote_options(&pending) {
                    prefix.push(Decision::Votes {
                        pos: pending.pos,
                        time: pending.time,
                        yes,
                    });
                    self.explore(faulty, side, prefix)?;
                    prefix.pop();
                }
                Ok(())
            }
            // A pruned non-canonical interleaving; the same decision set is
            // reached through a canonical order elsewhere in the tree.
            Err(SimError::DecisionMismatch(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }

    fn leaf(
        &mut self,
        transcript: &Transcript,
        faulty: &BTreeSet<RobotId>,
        side: i8,
        prefix: &[Decision],
    ) {
        self.leaves += 1;
        if !transcript.sound {
            self.violations.push(format!(
                "unsound termination (faulty {faulty:?}, side {side}, decisions {prefix:?})"
            ));
            return;
        }
        if !transcript.identified_faulty.is_subset(faulty) {
            self.violations.push(format!(
                "reliable robot accused (faulty {faulty:?}, side {side}, decisions {prefix:?})"
            ));
        }
        if self.opts.check_paths {
            for (robot, path) in &transcript.paths {
                if let Err(e) = path.validate() {
                    self.violations
                        .push(format!("kinematics violation for {robot}: {e}"));
                }
            }
        }
        let ratio = match competitive_ratio(transcript, self.d) {
            Ok(r) => r,
            Err(e) => {
                self.violations.push(format!("ratio error: {e}"));
                return;
            }
        };
        let better = match &self.best {
            Some((best, _)) => ratio > *best,
            None => true,
        };
        if better {
            self.best = Some((
                ratio,
                WitnessScenario {
                    faulty: faulty.clone(),
                    target_side: side,
                    decisions: prefix.to_vec(),
                },
            ));
        }
    }

    /// Fresh-claim branches consistent with the committed prefix.
    fn claim_options(
        &self,
        opportunities: &[Opportunity],
        prefix: &[Decision],
        upper: Option<Time>,
    ) -> Vec<Decision> {
        let mut last_vote_time: Option<Time> = None;
        let mut last_claim: Option<(Time, Pos, RobotId)> = None;
        let mut claims_made = 0usize;
        let mut last_claim_abs = Rational::ZERO;
        for d in prefix {
            match d {
                Decision::Votes { time, .. } => last_vote_time = Some(*time),
                Decision::Claim { robot, pos, time } => {
                    last_claim = Some((*time, *pos, *robot));
                    claims_made += 1;
                    last_claim_abs = pos.abs();
                }
            }
        }
        if self.opts.two_announcement_pattern && claims_made >= 2 {
            return Vec::new();
        }
        // One branch per interchangeable class and position/time.
        let mut seen: BTreeSet<(Time, Pos, u32)> = BTreeSet::new();
        let mut out = Vec::new();
        let mut sorted: Vec<&Opportunity> = opportunities.iter().collect();
        sorted.sort_by_key(|o| (o.time, o.pos, o.robot));
        for o in sorted {
            if let Some(t) = upper {
                if o.time > t {
                    continue;
                }
            }
            if let Some(tv) = last_vote_time {
                if o.time <= tv {
                    continue;
                }
            }
            if let Some((tc, pc, rc)) = last_claim {
                if (o.time, o.pos, o.robot) <= (tc, pc, rc) {
                    continue;
                }
            }
            if self.opts.two_announcement_pattern && o.pos.abs() < last_claim_abs {
                continue;
            }
            if !seen.insert((o.time, o.pos, o.cohort)) {
                continue;
            }
            out.push(Decision::Claim {
                robot: o.robot,
                pos: o.pos,
                time: o.time,
            });
        }
        out
    }

    /// Yes-count branches for a pending vote class.
    ///
    /// At the instant a false claim is raised, counts that would refute it
    /// on the spot are dominated (zero delay, faulty robots burned) and are
    /// skipped; the surviving range keeps the conflict genuine. Votes at the
    /// target and mid-resolution votes branch over the full range.
    fn vote_options(&self, p: &PendingVote) -> Vec<usize> {
        let k = p.robots.len();
        let all: Vec<usize> = if p.is_target_pos || !p.at_claim_raise {
            (0..=k).collect()
        } else {
            let lo_total = 1.max(p.visitors.saturating_sub(p.f_remaining));
            let hi_total = p.f_remaining;
            let c_lo = lo_total.saturating_sub(p.yes_so_far + p.later_classes_max);
            let c_hi = match hi_total.checked_sub(p.yes_so_far) {
                Some(h) => h.min(k),
                None => return Vec::new(),
            };
            if c_lo > c_hi {
                return Vec::new();
            }
            (c_lo..=c_hi).collect()
        };
        if self.opts.two_announcement_pattern && all.len() > 2 {
            vec![all[0], all[all.len() - 1]]
        } else {
            all
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::StrategySpec;

    #[test]
    fn symmetry_orbits_match_hand_counts() {
        let p41 = StrategySpec::P41.plan().unwrap();
        assert_eq!(symmetry_prune(&p41, 1).len(), 1);

        let p51 = StrategySpec::P51.plan().unwrap();
        assert_eq!(symmetry_prune(&p51, 1).len(), 2);

        let p62 = StrategySpec::P62.plan().unwrap();
        assert_eq!(symmetry_prune(&p62, 2).len(), 2);
    }

    #[test]
    fn zigzag_orbits_keep_both_sides() {
        // The zigzag starts rightward, so reflection is not a symmetry;
        // both target sides survive the orbit dedup.
        let spec = StrategySpec::Zigzag {
            n: 3,
            f: 1,
            r0: Rational::ONE,
        };
        let plan = spec.plan().unwrap();
        assert_eq!(symmetry_prune(&plan, 1).len(), 1);
        assert_eq!(scenario_pairs(&plan, 1).len(), 2);
    }
}

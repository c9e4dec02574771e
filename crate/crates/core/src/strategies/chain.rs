//! Exchange-chain strategies: repeated redistribution rounds, each buying
//! the identification of at least `k` faulty robots for 2x extra time, until
//! the remaining problem fits a one-round base strategy.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::rational::Rational;
use crate::trajectory::{Pos, RobotId, Time};
use crate::voting::Verdict;

use super::small::{check_fifths, check_thirds};
use super::{
    plan_orders, stream_nearest, take_lowest, two_front_plan, ChainStep, ChainVariant,
    ConflictCtx, GroupPlan, Motion, Order, Strategy, StrategyError, WorldView,
};

#[derive(Debug, Error)]
pub enum ChainPlanError {
    #[error("no valid schedule for the requested shape")]
    NoSchedule,
}

/// Which one-round strategy finishes the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum Base {
    /// Needs f = 4 mod 5 and fronts of (7f+2)/5.
    Fifths { f: usize },
    /// Needs f = 2 mod 3, fronts of (4f+1)/3 and a centre of (2f+2)/3.
    Thirds { f: usize },
}

/// Movement counts for one scheduled redistribution round.
#[derive(Clone, Copy, Debug)]
pub(super) struct Phase {
    pub variant: ChainVariant,
    pub k: usize,
    /// Robots crossing from the opposite front to the claim.
    pub cross_in: usize,
    /// Claim-side robots sent to the opposite front (rec1 only).
    pub out_far: usize,
    /// Claim-side robots sent to the origin (rec1 only).
    pub out_mid: usize,
}

#[derive(Clone, Debug)]
pub(super) struct ChainTable {
    pub n: usize,
    pub phases: Vec<Phase>,
    pub base: Base,
}

fn fail(constraint: impl Into<String>) -> StrategyError {
    StrategyError {
        strategy: "chain",
        constraint: constraint.into(),
    }
}

/// Validates a schedule against `f` and fills in the movement counts.
///
/// Invariants maintained per step, with `s` the per-front robot count and
/// `f_rem` the nominal faulty bound:
/// - an unresolved conflict forces at least `k = s - f_rem` yes votes, so
///   each step identifies at least its scheduled `k`;
/// - the step gathers at least `2 f_rem + 1` votes at the claim, so the
///   conflict always settles (rec1 sends one crosser more than the minimum
///   needed, avoiding the even-split deadlock at exactly 2 f_rem votes);
/// - the terminal fronts and centre fit the base strategy's shape.
pub(super) fn validate_schedule(f: usize, steps: &[ChainStep]) -> Result<ChainTable, StrategyError> {
    if steps.is_empty() {
        return Err(fail("schedule must contain at least one step"));
    }
    let k1 = steps[0].k;
    if k1 == 0 {
        return Err(fail("k must be positive"));
    }
    let mut s = f + k1;
    let mut f_rem = f;
    let mut center = 0usize;
    let n = 2 * s;
    let mut phases = Vec::new();

    for (j, step) in steps.iter().enumerate() {
        let k = step.k;
        if k == 0 {
            return Err(fail(format!("step {j}: k must be positive")));
        }
        if k != s - f_rem {
            return Err(fail(format!(
                "step {j}: k={k} inconsistent with front {s} and faulty bound {f_rem} (expected {})",
                s - f_rem
            )));
        }
        if k > f_rem {
            return Err(fail(format!("step {j}: k={k} exceeds faulty bound {f_rem}")));
        }
        match step.variant {
            ChainVariant::Rec2 => {
                if k % 2 != 0 {
                    return Err(fail(format!("step {j}: rec2 requires even k, got {k}")));
                }
                phases.push(Phase {
                    variant: ChainVariant::Rec2,
                    k,
                    cross_in: f_rem + k / 2,
                    out_far: 0,
                    out_mid: 0,
                });
                s = f_rem + k / 2;
                f_rem -= k;
            }
            ChainVariant::Rec1 => {
                if 4 * k < f_rem {
                    return Err(fail(format!(
                        "step {j}: rec1 requires k >= f/4, got k={k}, f={f_rem}"
                    )));
                }
                // The next front size is fixed by the following step's k, or
                // chosen for the base strategy on the last step.
                let s_next = if j + 1 < steps.len() {
                    let f_next = f_rem - k;
                    f_next + steps[j + 1].k
                } else {
                    choose_last_front(s, k, f_rem - k, center)?
                };
                if s_next + k > s {
                    return Err(fail(format!(
                        "step {j}: next front {s_next} too large for front {s}"
                    )));
                }
                let out_mid = 2 * (s - s_next) - k;
                let cross_min = (out_mid + k) / 2; // out_mid + k is even
                let cross_in = cross_min.max(f_rem + 1 - k);
                if cross_in > s {
                    return Err(fail(format!(
                        "step {j}: needs {cross_in} crossers, front has {s}"
                    )));
                }
                let out_far = cross_in - (out_mid + k) / 2;
                phases.push(Phase {
                    variant: ChainVariant::Rec1,
                    k,
                    cross_in,
                    out_far,
                    out_mid,
                });
                center += out_mid;
                s = s_next;
                f_rem -= k;
            }
        }
    }

    let base = base_for(f_rem, s, center)?;
    Ok(ChainTable { n, phases, base })
}

/// Last rec1 step: smallest centre feed that satisfies a thirds base.
fn choose_last_front(
    s: usize,
    k: usize,
    f_final: usize,
    center_so_far: usize,
) -> Result<usize, StrategyError> {
    check_thirds(f_final).map_err(|_| {
        fail(format!(
            "terminal faulty bound {f_final} fits no base (thirds needs f = 2 mod 3)"
        ))
    })?;
    let center_need = (2 * f_final + 2) / 3;
    let side_need = (4 * f_final + 1) / 3;
    let mut out_mid = center_need.saturating_sub(center_so_far);
    if (out_mid + k) % 2 != 0 {
        out_mid += 1;
    }
    let s_next = s
        .checked_sub((out_mid + k) / 2)
        .ok_or_else(|| fail("front exhausted by centre feed"))?;
    if s_next < side_need {
        return Err(fail(format!(
            "terminal front {s_next} below thirds requirement {side_need}"
        )));
    }
    Ok(s_next)
}

fn base_for(f_rem: usize, s: usize, center: usize) -> Result<Base, StrategyError> {
    if check_fifths(f_rem).is_ok() {
        let need = (7 * f_rem + 2) / 5;
        if s >= need {
            return Ok(Base::Fifths { f: f_rem });
        }
        return Err(fail(format!(
            "terminal front {s} below fifths requirement {need}"
        )));
    }
    if check_thirds(f_rem).is_ok() {
        let side_need = (4 * f_rem + 1) / 3;
        let center_need = (2 * f_rem + 2) / 3;
        if s >= side_need && center >= center_need {
            return Ok(Base::Thirds { f: f_rem });
        }
        return Err(fail(format!(
            "terminal shape (front {s}, centre {center}) below thirds requirement ({side_need}, {center_need})"
        )));
    }
    Err(fail(format!(
        "terminal faulty bound {f_rem} fits neither base (needs 4 mod 5 or 2 mod 3)"
    )))
}

/// Searches for the cheapest valid k-schedule for `f` over the variant
/// sequence, minimising the total robot count (ascending first-round k).
pub fn derive_chain_schedule(
    f: usize,
    variants: &[ChainVariant],
) -> Result<Vec<ChainStep>, ChainPlanError> {
    for k1 in 1..=f {
        let mut steps = vec![ChainStep {
            variant: variants[0],
            k: k1,
        }];
        if fill_schedule(f, f + k1, f, variants, &mut steps) {
            return Ok(steps);
        }
    }
    Err(ChainPlanError::NoSchedule)
}

/// Extends `steps` (whose last k is chosen, entering shape `(s, f_rem)`)
/// step by step; the front after a rec2 round is forced, after a rec1 round
/// it is a free choice bounded by the centre-feed bookkeeping.
fn fill_schedule(
    f0: usize,
    s: usize,
    f_rem: usize,
    variants: &[ChainVariant],
    steps: &mut Vec<ChainStep>,
) -> bool {
    let j = steps.len() - 1;
    let step = steps[j];
    let k = step.k;
    if k == 0 || s < f_rem || k != s - f_rem || k > f_rem {
        return false;
    }
    match step.variant {
        ChainVariant::Rec2 => {
            if k % 2 != 0 {
                return false;
            }
        }
        ChainVariant::Rec1 => {
            if 4 * k < f_rem {
                return false;
            }
        }
    }
    if j + 1 == variants.len() {
        return validate_schedule(f0, steps).is_ok();
    }
    let f_next = f_rem - k;
    match step.variant {
        ChainVariant::Rec2 => {
            let s_next = f_rem + k / 2;
            if s_next <= f_next {
                return false;
            }
            steps.push(ChainStep {
                variant: variants[j + 1],
                k: s_next - f_next,
            });
            if fill_schedule(f0, s_next, f_next, variants, steps) {
                return true;
            }
            steps.pop();
            false
        }
        ChainVariant::Rec1 => {
            let s_cap = s.saturating_sub((k + 1) / 2);
            let k_cap = f_next.min(s_cap.saturating_sub(f_next));
            for k_next in 1..=k_cap {
                steps.push(ChainStep {
                    variant: variants[j + 1],
                    k: k_next,
                });
                if fill_schedule(f0, f_next + k_next, f_next, variants, steps) {
                    return true;
                }
                steps.pop();
            }
            false
        }
    }
}

/// Smallest f admitting a valid schedule over `variants`.
pub fn smallest_chain_f(variants: &[ChainVariant]) -> Option<(usize, Vec<ChainStep>)> {
    (1..=400).find_map(|f| {
        derive_chain_schedule(f, variants)
            .ok()
            .map(|steps| (f, steps))
    })
}

/// The chain strategy proper.
pub struct ChainStrategy {
    plan: GroupPlan,
    table: ChainTable,
    phase_idx: usize,
    advancing: bool,
    dispatched: Vec<(RobotId, Rational)>,
}

impl ChainStrategy {
    pub fn new(f: usize, steps: &[ChainStep]) -> Result<Self, StrategyError> {
        let table = validate_schedule(f, steps)?;
        Ok(ChainStrategy {
            plan: two_front_plan(table.n),
            table,
            phase_idx: 0,
            advancing: false,
            dispatched: Vec::new(),
        })
    }

    fn send(&mut self, orders: &mut Vec<Order>, robots: &[RobotId], dest: Pos, resume: Rational) {
        for &r in robots {
            orders.push(Order {
                robot: r,
                motion: Motion::to_point_then_hold(dest),
            });
            self.dispatched.push((r, resume));
        }
    }

    fn sign_of(pos: Pos) -> Rational {
        if pos.is_negative() {
            -Rational::ONE
        } else {
            Rational::ONE
        }
    }
}

impl Strategy for ChainStrategy {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        let here = view.robots_at(ctx.pos);
        let there = view.robots_at(-ctx.pos);
        let mut orders = Vec::new();
        let out = Self::sign_of(ctx.pos);

        if let Some(&phase) = self.table.phases.get(self.phase_idx) {
            self.advancing = true;
            match phase.variant {
                ChainVariant::Rec2 => {
                    let crossers = take_lowest(&there, view.identified, phase.cross_in);
                    if crossers.len() < phase.cross_in {
                        self.advancing = false;
                        return stream_nearest(ctx, view);
                    }
                    // Everyone at the claim relocates to the far front.
                    self.send(&mut orders, &here, -ctx.pos, -out);
                    self.send(&mut orders, &crossers, ctx.pos, out);
                }
                ChainVariant::Rec1 => {
                    let crossers = take_lowest(&there, view.identified, phase.cross_in);
                    let movers = take_lowest(&here, view.identified, phase.out_far + phase.out_mid);
                    if crossers.len() < phase.cross_in
                        || movers.len() < phase.out_far + phase.out_mid
                    {
                        self.advancing = false;
                        return stream_nearest(ctx, view);
                    }
                    self.send(&mut orders, &crossers, ctx.pos, out);
                    self.send(&mut orders, &movers[..phase.out_far], -ctx.pos, -out);
                    self.send(
                        &mut orders,
                        &movers[phase.out_far..],
                        Rational::ZERO,
                        Rational::ZERO,
                    );
                }
            }
            return orders;
        }

        // Base strategy movements.
        match self.table.base {
            Base::Fifths { f } => {
                let cross_in = (3 * f + 3) / 5;
                let swap = (2 * f + 2) / 5;
                let crossers = take_lowest(&there, view.identified, cross_in);
                let yes: Vec<RobotId> = ctx.tally.yes_voters.iter().copied().collect();
                let no: Vec<RobotId> = ctx.tally.no_voters.iter().copied().collect();
                if crossers.len() < cross_in || yes.len() < swap || no.len() < swap {
                    return stream_nearest(ctx, view);
                }
                self.send(&mut orders, &crossers, ctx.pos, out);
                self.send(&mut orders, &yes[..swap], -ctx.pos, -out);
                self.send(&mut orders, &no[..swap], -ctx.pos, -out);
            }
            Base::Thirds { .. } => {
                let center: Vec<RobotId> = view.robots_at(Rational::ZERO);
                if center.is_empty() {
                    return stream_nearest(ctx, view);
                }
                self.send(&mut orders, &center, ctx.pos, out);
            }
        }
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, view: &WorldView) -> Vec<Order> {
        if self.advancing {
            self.phase_idx += 1;
            self.advancing = false;
        }
        let identified: &BTreeSet<RobotId> = view.identified;
        self.dispatched
            .drain(..)
            .filter(|(r, _)| !identified.contains(r))
            .map(|(robot, v)| Order {
                robot,
                motion: Motion::glide(v),
            })
            .collect()
    }
}

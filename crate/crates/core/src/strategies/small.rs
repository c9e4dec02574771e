//! Strategies with fixed small shapes and the two density families that
//! resolve every conflict in a single identification round.

use std::collections::BTreeSet;

use crate::rational::Rational;
use crate::trajectory::{Pos, RobotId, Time};
use crate::voting::Verdict;

use super::{
    plan_orders, stream_nearest, take_lowest, two_front_plan, ConflictCtx, Group, GroupPlan,
    Motion, Order, Role, Strategy, StrategyError, WorldView,
};

fn sign_of(pos: Pos) -> Rational {
    if pos.is_negative() {
        -Rational::ONE
    } else {
        Rational::ONE
    }
}

/// Robots the strategy sent toward a conflict, with the glide direction they
/// take once the conflict closes.
#[derive(Default)]
struct Dispatched(Vec<(RobotId, Rational)>);

impl Dispatched {
    fn send(&mut self, orders: &mut Vec<Order>, robots: &[RobotId], dest: Pos, resume: Rational) {
        for &r in robots {
            orders.push(Order {
                robot: r,
                motion: Motion::to_point_then_hold(dest),
            });
            self.0.push((r, resume));
        }
    }

    fn release(&mut self, identified: &BTreeSet<RobotId>) -> Vec<Order> {
        self.0
            .drain(..)
            .filter(|(r, _)| !identified.contains(r))
            .map(|(robot, v)| Order {
                robot,
                motion: Motion::glide(v),
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// two groups, n >= 4f + 2
// ---------------------------------------------------------------------------

/// Both halves carry a reliable majority, so every claim settles on the spot.
pub struct TwoGroup {
    plan: GroupPlan,
}

impl TwoGroup {
    pub fn new(n: usize, f: usize) -> Result<Self, StrategyError> {
        if n < 4 * f + 2 {
            return Err(StrategyError::new(
                "two_group",
                format!("requires n >= 4f+2, got n={n}, f={f}"),
            ));
        }
        Ok(TwoGroup {
            plan: two_front_plan(n),
        })
    }
}

impl Strategy for TwoGroup {
    fn name(&self) -> &'static str {
        "two_group"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        // Unreachable: a front of >= 2f+1 voters always decides its own
        // claims. Kept total via the generic resolver.
        stream_nearest(ctx, view)
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, _: &WorldView) -> Vec<Order> {
        Vec::new()
    }
}

// ---------------------------------------------------------------------------
// (4, 1)
// ---------------------------------------------------------------------------

/// Two pairs; one opposite-side robot crosses to settle a conflict.
pub struct P41 {
    plan: GroupPlan,
    dispatched: Dispatched,
}

impl P41 {
    pub fn new() -> Self {
        P41 {
            plan: two_front_plan(4),
            dispatched: Dispatched::default(),
        }
    }
}

impl Strategy for P41 {
    fn name(&self) -> &'static str {
        "p41"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        let opposite = view.robots_at(-ctx.pos);
        let pick = take_lowest(&opposite, view.identified, 1);
        if pick.is_empty() {
            return stream_nearest(ctx, view);
        }
        let mut orders = Vec::new();
        self.dispatched.send(&mut orders, &pick, ctx.pos, sign_of(ctx.pos));
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, view: &WorldView) -> Vec<Order> {
        self.dispatched.release(view.identified)
    }
}

// ---------------------------------------------------------------------------
// (5, 1)
// ---------------------------------------------------------------------------

/// Two pairs plus a spare at the origin; the spare settles conflicts.
pub struct P51 {
    plan: GroupPlan,
    dispatched: Dispatched,
}

impl P51 {
    pub fn new() -> Self {
        let plan = GroupPlan {
            groups: vec![
                Group {
                    name: "L".into(),
                    members: vec![RobotId(0), RobotId(1)],
                    speed: -Rational::ONE,
                    role: Role::SearchLeft,
                },
                Group {
                    name: "C".into(),
                    members: vec![RobotId(2)],
                    speed: Rational::ZERO,
                    role: Role::Center,
                },
                Group {
                    name: "R".into(),
                    members: vec![RobotId(3), RobotId(4)],
                    speed: Rational::ONE,
                    role: Role::SearchRight,
                },
            ],
            mirror: Some(vec![2, 1, 0]),
        };
        P51 {
            plan,
            dispatched: Dispatched::default(),
        }
    }
}

impl Strategy for P51 {
    fn name(&self) -> &'static str {
        "p51"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        let spare: Vec<RobotId> = self.plan.groups[1]
            .members
            .iter()
            .filter(|r| !view.identified.contains(r))
            .copied()
            .collect();
        if spare.is_empty() {
            return stream_nearest(ctx, view);
        }
        let mut orders = Vec::new();
        self.dispatched.send(&mut orders, &spare, ctx.pos, sign_of(ctx.pos));
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, view: &WorldView) -> Vec<Order> {
        self.dispatched.release(view.identified)
    }
}

// ---------------------------------------------------------------------------
// (6, 2)
// ---------------------------------------------------------------------------

/// Two triples with the two-case redistribution, falling back to the
/// five-robot pattern when one faulty robot survives the first round.
pub struct P62 {
    plan: GroupPlan,
    dispatched: Dispatched,
    /// Robot parked at the origin by case 2, acting as the phase-2 spare.
    spare: Option<RobotId>,
    phase: u8,
}

impl P62 {
    pub fn new() -> Self {
        P62 {
            plan: two_front_plan(6),
            dispatched: Dispatched::default(),
            spare: None,
            phase: 0,
        }
    }
}

impl Strategy for P62 {
    fn name(&self) -> &'static str {
        "p62"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        let mut orders = Vec::new();
        if self.phase == 1 {
            // Five-robot continuation: the parked spare crosses.
            match self.spare.filter(|r| !view.identified.contains(r)) {
                Some(spare) => {
                    self.dispatched
                        .send(&mut orders, &[spare], ctx.pos, sign_of(ctx.pos));
                    return orders;
                }
                None => return stream_nearest(ctx, view),
            }
        }
        let (y, z) = (ctx.tally.yes(), ctx.tally.no());
        let opposite = view.robots_at(-ctx.pos);
        let crossers = take_lowest(&opposite, view.identified, 2);
        if crossers.len() < 2 {
            return stream_nearest(ctx, view);
        }
        match (y, z) {
            (2, 1) => {
                self.dispatched
                    .send(&mut orders, &crossers, ctx.pos, sign_of(ctx.pos));
            }
            (1, 2) => {
                self.dispatched
                    .send(&mut orders, &crossers, ctx.pos, sign_of(ctx.pos));
                let yes: Vec<RobotId> = ctx.tally.yes_voters.iter().copied().collect();
                let no: Vec<RobotId> = ctx.tally.no_voters.iter().copied().collect();
                // One "no" voter parks at the origin as a future spare; the
                // claimant and the other "no" voter cross to the far front.
                self.spare = Some(no[0]);
                self.dispatched
                    .send(&mut orders, &[no[0]], Rational::ZERO, Rational::ZERO);
                self.dispatched
                    .send(&mut orders, &[yes[0], no[1]], -ctx.pos, -sign_of(ctx.pos));
            }
            _ => return stream_nearest(ctx, view),
        }
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, verdict: &Verdict, view: &WorldView) -> Vec<Order> {
        if let Verdict::Refuted { newly_identified } = verdict {
            if self.phase == 0 && newly_identified.len() == 1 && view.f_remaining == 1 {
                self.phase = 1;
            }
        }
        self.dispatched.release(view.identified)
    }
}

// ---------------------------------------------------------------------------
// thirds: n = (10f + 4) / 3, f = 2 mod 3, bound 2d
// ---------------------------------------------------------------------------

pub fn check_thirds(f: usize) -> Result<(), StrategyError> {
    if f % 3 != 2 {
        return Err(StrategyError::new(
            "thirds",
            format!("requires f = 2 mod 3, got f={f}"),
        ));
    }
    Ok(())
}

/// Search groups of (4f+1)/3 with a center reserve of (2f+2)/3 that streams
/// to the first genuine conflict and settles it by time 2x.
pub struct Thirds {
    plan: GroupPlan,
    dispatched: Dispatched,
}

impl Thirds {
    pub fn new(f: usize) -> Result<Self, StrategyError> {
        check_thirds(f)?;
        let side = (4 * f + 1) / 3;
        let center = (2 * f + 2) / 3;
        let mut next = 0u32;
        let mut grab = |count: usize| -> Vec<RobotId> {
            let v: Vec<RobotId> = (next..next + count as u32).map(RobotId).collect();
            next += count as u32;
            v
        };
        let plan = GroupPlan {
            groups: vec![
                Group {
                    name: "L".into(),
                    members: grab(side),
                    speed: -Rational::ONE,
                    role: Role::SearchLeft,
                },
                Group {
                    name: "C".into(),
                    members: grab(center),
                    speed: Rational::ZERO,
                    role: Role::Center,
                },
                Group {
                    name: "R".into(),
                    members: grab(side),
                    speed: Rational::ONE,
                    role: Role::SearchRight,
                },
            ],
            mirror: Some(vec![2, 1, 0]),
        };
        Ok(Thirds {
            plan,
            dispatched: Dispatched::default(),
        })
    }
}

impl Strategy for Thirds {
    fn name(&self) -> &'static str {
        "thirds"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        let center: Vec<RobotId> = self.plan.groups[1]
            .members
            .iter()
            .filter(|r| !view.identified.contains(r))
            .filter(|&&r| view.position(r) == Rational::ZERO)
            .copied()
            .collect();
        if center.is_empty() {
            return stream_nearest(ctx, view);
        }
        let mut orders = Vec::new();
        self.dispatched
            .send(&mut orders, &center, ctx.pos, sign_of(ctx.pos));
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, view: &WorldView) -> Vec<Order> {
        self.dispatched.release(view.identified)
    }
}

// ---------------------------------------------------------------------------
// fifths: n = (14f + 4) / 5, f = 4 mod 5, bound 3d
// ---------------------------------------------------------------------------

pub fn check_fifths(f: usize) -> Result<(), StrategyError> {
    if f % 5 != 4 {
        return Err(StrategyError::new(
            "fifths",
            format!("requires f = 4 mod 5, got f={f}"),
        ));
    }
    Ok(())
}

/// Two fronts of (7f+2)/5; a conflict triggers a symmetric exchange that
/// gathers 2f+1 votes at the claim by time 3x.
pub struct Fifths {
    f: usize,
    plan: GroupPlan,
    dispatched: Dispatched,
}

impl Fifths {
    pub fn new(f: usize) -> Result<Self, StrategyError> {
        check_fifths(f)?;
        let n = (14 * f + 4) / 5;
        Ok(Fifths {
            f,
            plan: two_front_plan(n),
            dispatched: Dispatched::default(),
        })
    }
}

impl Strategy for Fifths {
    fn name(&self) -> &'static str {
        "fifths"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        let cross_in = (3 * self.f + 3) / 5;
        let swap = (2 * self.f + 2) / 5;
        let opposite = view.robots_at(-ctx.pos);
        let crossers = take_lowest(&opposite, view.identified, cross_in);
        let yes: Vec<RobotId> = ctx.tally.yes_voters.iter().copied().collect();
        let no: Vec<RobotId> = ctx.tally.no_voters.iter().copied().collect();
        if crossers.len() < cross_in || yes.len() < swap || no.len() < swap {
            return stream_nearest(ctx, view);
        }
        let mut orders = Vec::new();
        self.dispatched
            .send(&mut orders, &crossers, ctx.pos, sign_of(ctx.pos));
        self.dispatched
            .send(&mut orders, &yes[..swap], -ctx.pos, -sign_of(ctx.pos));
        self.dispatched
            .send(&mut orders, &no[..swap], -ctx.pos, -sign_of(ctx.pos));
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, view: &WorldView) -> Vec<Order> {
        self.dispatched.release(view.identified)
    }
}

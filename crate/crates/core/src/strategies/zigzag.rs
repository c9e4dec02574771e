//! Single-cohort doubling zigzag, the 9d fallback for any n >= 2f + 1.

use crate::rational::Rational;
use crate::trajectory::{Pos, RobotId, Time};
use crate::voting::Verdict;

use super::{
    stream_nearest, ConflictCtx, Group, GroupPlan, Motion, Order, Role, Strategy, StrategyError,
    WorldView,
};

/// All robots move as one cohort with turn radii r0, 2 r0, 4 r0, ...
/// alternating right and left. The reliable majority inside the cohort
/// certifies the target the moment the cohort reaches it.
pub struct Zigzag {
    plan: GroupPlan,
    r0: Rational,
}

impl Zigzag {
    pub fn new(n: usize, f: usize, r0: Rational) -> Result<Self, StrategyError> {
        if n < 2 * f + 1 {
            return Err(StrategyError::new(
                "zigzag",
                format!("requires n >= 2f+1, got n={n}, f={f}"),
            ));
        }
        if !r0.is_positive() {
            return Err(StrategyError::new("zigzag", "r0 must be positive"));
        }
        let plan = GroupPlan {
            groups: vec![Group {
                name: "cohort".into(),
                members: (0..n as u32).map(RobotId).collect(),
                speed: Rational::ONE,
                role: Role::Cohort,
            }],
            // The schedule starts rightward; reflection changes the path.
            mirror: None,
        };
        Ok(Zigzag { plan, r0 })
    }

    /// Turning points covering at least `horizon` of travel time.
    pub fn turning_points(r0: Rational, horizon: Time) -> (Vec<Pos>, Rational) {
        let mut waypoints = Vec::new();
        let mut radius = r0;
        let mut side = Rational::ONE;
        let mut elapsed = Rational::ZERO;
        let mut here = Rational::ZERO;
        while elapsed <= horizon {
            let turn = radius * side;
            elapsed += (turn - here).abs();
            here = turn;
            waypoints.push(turn);
            radius = radius + radius;
            side = -side;
        }
        let terminal = if side.is_positive() {
            Rational::ONE
        } else {
            -Rational::ONE
        };
        (waypoints, terminal)
    }
}

impl Strategy for Zigzag {
    fn name(&self) -> &'static str {
        "zigzag"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, horizon: Time) -> Vec<Order> {
        let (waypoints, terminal) = Zigzag::turning_points(self.r0, horizon);
        let motion = Motion::Route {
            waypoints,
            terminal,
        };
        self.plan.groups[0]
            .members
            .iter()
            .map(|&robot| Order {
                robot,
                motion: motion.clone(),
            })
            .collect()
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        // Unreachable: the whole cohort votes at once, so every claim is
        // decided instantly. Kept total via the generic resolver.
        stream_nearest(ctx, view)
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, _: &WorldView) -> Vec<Order> {
        Vec::new()
    }
}

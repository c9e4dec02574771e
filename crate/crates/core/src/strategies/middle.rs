//! Middle-group strategies: fractional-speed reserves stationed at the
//! points dividing the interval between the two search fronts, streamed to a
//! conflict one group at a time with a re-tally after each arrival.

use crate::rational::Rational;
use crate::trajectory::{RobotId, Time};
use crate::voting::Verdict;

use super::{
    plan_orders, stream_nearest, ConflictCtx, Group, GroupPlan, Motion, Order, Role, Strategy,
    StrategyError, WorldView,
};

pub fn check_middle(f: usize, i: usize) -> Result<(), StrategyError> {
    if i < 3 || i % 2 == 0 {
        return Err(StrategyError {
            strategy: "middle",
            constraint: format!("requires odd i >= 3, got i={i}"),
        });
    }
    if f == 0 || f % (i + 1) != 0 {
        return Err(StrategyError {
            strategy: "middle",
            constraint: format!("requires f = 0 mod (i+1) and f > 0, got f={f}, i={i}"),
        });
    }
    Ok(())
}

/// Fronts of (i+2)f/(i+1) + 1 with `i` middle groups of f/(i+1) at speeds
/// -1 + 2j/(i+1), so group `j` sits at fraction (j - (i+1)/2) of the front
/// gap. Resolution time for a conflict at x is 3x - 2x/(i+1).
pub struct MiddleGroups {
    plan: GroupPlan,
    /// Middle group indices (into plan.groups) not yet consumed.
    reserves: Vec<usize>,
    dispatched: Vec<(RobotId, Rational)>,
}

impl MiddleGroups {
    pub fn new(f: usize, i: usize) -> Result<Self, StrategyError> {
        check_middle(f, i)?;
        let front = (i + 2) * f / (i + 1) + 1;
        let mid = f / (i + 1);
        let mut next = 0u32;
        let mut grab = |count: usize| -> Vec<RobotId> {
            let v: Vec<RobotId> = (next..next + count as u32).map(RobotId).collect();
            next += count as u32;
            v
        };
        let mut groups = vec![Group {
            name: "L".into(),
            members: grab(front),
            speed: -Rational::ONE,
            role: Role::SearchLeft,
        }];
        for j in 1..=i {
            groups.push(Group {
                name: format!("M{j}"),
                members: grab(mid),
                speed: -Rational::ONE + Rational::new(2 * j as i128, (i + 1) as i128),
                role: Role::Middle(j),
            });
        }
        groups.push(Group {
            name: "R".into(),
            members: grab(front),
            speed: Rational::ONE,
            role: Role::SearchRight,
        });
        // Reflection swaps the fronts and maps group j to group i+1-j.
        let mut mirror = vec![0; i + 2];
        mirror[0] = i + 1;
        mirror[i + 1] = 0;
        for j in 1..=i {
            mirror[j] = i + 1 - j;
        }
        Ok(MiddleGroups {
            plan: GroupPlan {
                groups,
                mirror: Some(mirror),
            },
            reserves: (1..=i).collect(),
            dispatched: Vec::new(),
        })
    }
}

impl Strategy for MiddleGroups {
    fn name(&self) -> &'static str {
        "middle"
    }

    fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    fn initial_orders(&mut self, _horizon: Time) -> Vec<Order> {
        plan_orders(&self.plan)
    }

    fn on_conflict(&mut self, ctx: &ConflictCtx, view: &WorldView) -> Vec<Order> {
        if self.reserves.is_empty() {
            return stream_nearest(ctx, view);
        }
        let resume = if ctx.pos.is_negative() {
            -Rational::ONE
        } else {
            Rational::ONE
        };
        let mut orders = Vec::new();
        for g in std::mem::take(&mut self.reserves) {
            for &robot in &self.plan.groups[g].members {
                if view.identified.contains(&robot) {
                    continue;
                }
                orders.push(Order {
                    robot,
                    motion: Motion::to_point_then_hold(ctx.pos),
                });
                self.dispatched.push((robot, resume));
            }
        }
        orders
    }

    fn on_resolved(&mut self, _: &ConflictCtx, _: &Verdict, view: &WorldView) -> Vec<Order> {
        self.dispatched
            .drain(..)
            .filter(|(r, _)| !view.identified.contains(r))
            .map(|(robot, v)| Order {
                robot,
                motion: Motion::glide(v),
            })
            .collect()
    }
}

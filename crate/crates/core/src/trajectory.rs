//! Piecewise-linear robot paths on the infinite line.
//!
//! A trajectory is a list of breakpoints plus a terminal velocity; between
//! breakpoints the robot moves linearly, after the last one it glides at the
//! terminal velocity forever. Event times are found by solving the linear
//! segment equations exactly, never by time-stepping.

use std::fmt;

use thiserror::Error;

use crate::rational::Rational;

/// Time coordinate (non-negative in all public operations).
pub type Time = Rational;
/// Position on the line.
pub type Pos = Rational;

/// Unique, immutable robot identity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RobotId(pub u32);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Debug for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Target placement: `side * distance` is its position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Target {
    pub side: i8,
    pub distance: Rational,
}

impl Target {
    pub fn new(side: i8, distance: Rational) -> Self {
        assert!(side == 1 || side == -1, "target side must be +1 or -1");
        assert!(distance.is_positive(), "target distance must be positive");
        Target { side, distance }
    }

    pub fn position(&self) -> Pos {
        if self.side == 1 {
            self.distance
        } else {
            -self.distance
        }
    }
}

/// Violation found by [`Trajectory::validate`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrajectoryError {
    #[error("trajectory must start at the origin at time 0")]
    BadStart,
    #[error("breakpoint times not strictly increasing at segment {0}")]
    NonMonotoneTime(usize),
    #[error("speed bound exceeded on segment {0}")]
    SpeedExceeded(usize),
    #[error("terminal velocity outside [-1, 1]")]
    BadTerminalVelocity,
    #[error("time is negative")]
    NegativeTime,
}

/// Piecewise-linear path: breakpoints followed by a perpetual glide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    breakpoints: Vec<(Time, Pos)>,
    terminal_velocity: Rational,
}

impl Trajectory {
    /// Path that sits at the origin and then glides at `terminal_velocity`.
    pub fn from_origin(terminal_velocity: Rational) -> Self {
        Trajectory {
            breakpoints: vec![(Rational::ZERO, Rational::ZERO)],
            terminal_velocity,
        }
    }

    pub fn new(breakpoints: Vec<(Time, Pos)>, terminal_velocity: Rational) -> Self {
        assert!(!breakpoints.is_empty(), "trajectory needs a starting breakpoint");
        Trajectory {
            breakpoints,
            terminal_velocity,
        }
    }

    pub fn breakpoints(&self) -> &[(Time, Pos)] {
        &self.breakpoints
    }

    pub fn terminal_velocity(&self) -> Rational {
        self.terminal_velocity
    }

    pub fn last_breakpoint(&self) -> (Time, Pos) {
        *self.breakpoints.last().expect("nonempty")
    }

    /// Appends a breakpoint, checking the new segment obeys the model.
    pub fn push(&mut self, time: Time, pos: Pos) -> Result<(), TrajectoryError> {
        let (t0, p0) = self.last_breakpoint();
        if time <= t0 {
            return Err(TrajectoryError::NonMonotoneTime(self.breakpoints.len() - 1));
        }
        if (pos - p0).abs() > time - t0 {
            return Err(TrajectoryError::SpeedExceeded(self.breakpoints.len() - 1));
        }
        self.breakpoints.push((time, pos));
        Ok(())
    }

    pub fn set_terminal_velocity(&mut self, v: Rational) {
        self.terminal_velocity = v;
    }

    /// Exact position at time `t`.
    pub fn position_at(&self, t: Time) -> Result<Pos, TrajectoryError> {
        if t.is_negative() {
            return Err(TrajectoryError::NegativeTime);
        }
        let (last_t, last_p) = self.last_breakpoint();
        if t >= last_t {
            return Ok(last_p + self.terminal_velocity * (t - last_t));
        }
        for win in self.breakpoints.windows(2) {
            let (t0, p0) = win[0];
            let (t1, p1) = win[1];
            if t >= t0 && t <= t1 {
                return Ok(p0 + (p1 - p0) * (t - t0) / (t1 - t0));
            }
        }
        // t earlier than the first breakpoint time can only mean a malformed
        // path; validate() reports it as BadStart.
        Err(TrajectoryError::BadStart)
    }

    /// Earliest time `>= from` at which the path is at `x`, if ever.
    pub fn first_visit(&self, x: Pos, from: Time) -> Option<Time> {
        debug_assert!(!from.is_negative());
        for win in self.breakpoints.windows(2) {
            let (t0, p0) = win[0];
            let (t1, p1) = win[1];
            if t1 < from {
                continue;
            }
            if let Some(t) = segment_visit(t0, p0, t1, p1, x, from) {
                return Some(t);
            }
        }
        let (t0, p0) = self.last_breakpoint();
        let v = self.terminal_velocity;
        let start = if from > t0 { from } else { t0 };
        let p_start = p0 + v * (start - t0);
        if p_start == x {
            return Some(start);
        }
        if !v.is_zero() {
            let t = start + (x - p_start) / v;
            if t >= start {
                return Some(t);
            }
        }
        None
    }

    /// Checks all model invariants, reporting the first violation.
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let (t0, p0) = self.breakpoints[0];
        if !t0.is_zero() || !p0.is_zero() {
            return Err(TrajectoryError::BadStart);
        }
        for (i, win) in self.breakpoints.windows(2).enumerate() {
            let (t0, p0) = win[0];
            let (t1, p1) = win[1];
            if t1 <= t0 {
                return Err(TrajectoryError::NonMonotoneTime(i));
            }
            if (p1 - p0).abs() > t1 - t0 {
                return Err(TrajectoryError::SpeedExceeded(i));
            }
        }
        if self.terminal_velocity.abs() > Rational::ONE {
            return Err(TrajectoryError::BadTerminalVelocity);
        }
        Ok(())
    }
}

/// Earliest `t >= from` in `[t0, t1]` where the segment passes through `x`.
fn segment_visit(t0: Time, p0: Pos, t1: Time, p1: Pos, x: Pos, from: Time) -> Option<Time> {
    let lo = if from > t0 { from } else { t0 };
    if lo > t1 {
        return None;
    }
    if p0 == p1 {
        return if p0 == x { Some(lo) } else { None };
    }
    let t = t0 + (x - p0) * (t1 - t0) / (p1 - p0);
    if t >= lo && t <= t1 {
        Some(t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn traj(points: &[(i64, i64)], term: Rational) -> Trajectory {
        Trajectory::new(
            points
                .iter()
                .map(|&(t, p)| (Rational::int(t), Rational::int(p)))
                .collect(),
            term,
        )
    }

    /// Independent interpolation oracle: walks segments explicitly.
    fn oracle_position(traj: &Trajectory, t: Time) -> Pos {
        let bps = traj.breakpoints();
        for i in 0..bps.len() - 1 {
            let (t0, p0) = bps[i];
            let (t1, p1) = bps[i + 1];
            if t >= t0 && t <= t1 {
                let frac = (t - t0) / (t1 - t0);
                return p0 * (Rational::ONE - frac) + p1 * frac;
            }
        }
        let (tl, pl) = bps[bps.len() - 1];
        pl + traj.terminal_velocity() * (t - tl)
    }

    /// Independent first-visit oracle: segment-by-segment linear solve.
    fn oracle_first_visit(traj: &Trajectory, x: Pos, from: Time) -> Option<Time> {
        let bps = traj.breakpoints();
        let mut best: Option<Time> = None;
        for i in 0..bps.len() - 1 {
            let (t0, p0) = bps[i];
            let (t1, p1) = bps[i + 1];
            let candidates = if p0 == p1 {
                if p0 == x {
                    vec![if from > t0 { from } else { t0 }]
                } else {
                    vec![]
                }
            } else {
                vec![t0 + (x - p0) * (t1 - t0) / (p1 - p0)]
            };
            for t in candidates {
                if t >= t0 && t <= t1 && t >= from && best.map_or(true, |b| t < b) {
                    best = Some(t);
                }
            }
            if best.is_some() {
                return best;
            }
        }
        let (tl, pl) = bps[bps.len() - 1];
        let v = traj.terminal_velocity();
        let start = if from > tl { from } else { tl };
        let p_start = pl + v * (start - tl);
        if p_start == x {
            return Some(start);
        }
        if !v.is_zero() {
            let t = start + (x - p_start) / v;
            if t >= start {
                return Some(t);
            }
        }
        None
    }

    #[test]
    fn position_unit_speed_ray() {
        let t = Trajectory::from_origin(Rational::ONE);
        assert_eq!(t.position_at(Rational::int(5)).unwrap(), Rational::int(5));
    }

    #[test]
    fn position_interpolates_between_breakpoints() {
        let t = traj(&[(0, 0), (1, 1), (4, -2)], Rational::ZERO);
        let want = oracle_position(&t, Rational::int(2));
        assert_eq!(want, Rational::int(0));
        assert_eq!(t.position_at(Rational::int(2)).unwrap(), want);
    }

    #[test]
    fn position_extrapolates_with_terminal_velocity() {
        let t = traj(&[(0, 0), (1, 1)], -Rational::ONE);
        assert_eq!(t.position_at(Rational::int(3)).unwrap(), Rational::int(-1));
        assert!(matches!(
            t.position_at(rat(-1, 2)),
            Err(TrajectoryError::NegativeTime)
        ));
    }

    #[test]
    fn first_visit_examples() {
        let ray = Trajectory::from_origin(Rational::ONE);
        assert_eq!(
            ray.first_visit(Rational::int(7), Rational::ZERO),
            Some(Rational::int(7))
        );
        assert_eq!(ray.first_visit(Rational::int(-1), Rational::ZERO), None);

        let t = traj(&[(0, 0), (1, 1), (4, -2)], Rational::ZERO);
        let want = oracle_first_visit(&t, Rational::int(-1), Rational::ZERO);
        assert_eq!(want, Some(Rational::int(3)));
        assert_eq!(t.first_visit(Rational::int(-1), Rational::ZERO), want);
    }

    #[test]
    fn validate_examples() {
        assert!(traj(&[(0, 0), (1, 1)], Rational::ZERO).validate().is_ok());
        assert_eq!(
            traj(&[(0, 0), (1, 2)], Rational::ZERO).validate(),
            Err(TrajectoryError::SpeedExceeded(0))
        );
        assert_eq!(
            traj(&[(0, 1), (1, 2)], Rational::ZERO).validate(),
            Err(TrajectoryError::BadStart)
        );
    }

    #[test]
    fn push_rejects_bad_segments() {
        let mut t = Trajectory::from_origin(Rational::ZERO);
        assert_eq!(
            t.push(Rational::int(1), Rational::int(2)),
            Err(TrajectoryError::SpeedExceeded(0))
        );
        assert!(t.push(Rational::int(1), Rational::int(1)).is_ok());
        assert_eq!(
            t.push(Rational::int(1), Rational::int(1)),
            Err(TrajectoryError::NonMonotoneTime(1))
        );
    }

    proptest! {
        /// Speed bound holds between arbitrary rational sample times.
        #[test]
        fn lipschitz_on_samples(
            legs in proptest::collection::vec((1i64..5, -1i64..=1), 1..6),
            qa in (0i128..200, 1i128..8),
            qb in (0i128..200, 1i128..8),
        ) {
            let mut t = Trajectory::from_origin(Rational::ZERO);
            let (mut now, mut pos) = (Rational::ZERO, Rational::ZERO);
            for (dt, dir) in legs {
                now += Rational::int(dt);
                pos += Rational::int(dir * dt);
                t.push(now, pos).unwrap();
            }
            t.set_terminal_velocity(Rational::ONE);
            prop_assert!(t.validate().is_ok());

            let t1 = Rational::new(qa.0, qa.1).min(Rational::new(qb.0, qb.1));
            let t2 = Rational::new(qa.0, qa.1).max(Rational::new(qb.0, qb.1));
            let p1 = t.position_at(t1).unwrap();
            let p2 = t.position_at(t2).unwrap();
            prop_assert!((p2 - p1).abs() <= t2 - t1);
        }

        /// position_at(first_visit(x)) == x whenever a visit exists.
        #[test]
        fn visit_lands_on_target(
            legs in proptest::collection::vec((1i64..5, -1i64..=1), 1..6),
            xn in -6i128..6, xd in 1i128..4,
        ) {
            let mut t = Trajectory::from_origin(Rational::ZERO);
            let (mut now, mut pos) = (Rational::ZERO, Rational::ZERO);
            for (dt, dir) in legs {
                now += Rational::int(dt);
                pos += Rational::int(dir * dt);
                t.push(now, pos).unwrap();
            }
            let x = Rational::new(xn, xd);
            if let Some(when) = t.first_visit(x, Rational::ZERO) {
                prop_assert_eq!(t.position_at(when).unwrap(), x);
            }
        }
    }
}

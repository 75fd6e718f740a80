//! Symmetric trapezoidal angular-velocity profiles for the arm joint.
//!
//! An action is `(q_s, q_g, vel, acc)`: ramp up at `acc`, cruise at `vel`,
//! ramp down at `acc`. When the cruise speed is unreachable over the sweep
//! the profile degrades to a symmetric triangle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joint start angle of the one-shot cast, radians.
pub const CAST_Q_S: f64 = 0.0;
/// Joint goal angle of the one-shot cast, radians.
pub const CAST_Q_G: f64 = std::f64::consts::PI;
/// Joint acceleration of the one-shot cast, rad/s^2.
pub const CAST_ACC: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("invalid action: vel and acc must be positive, q_g must differ from q_s")]
    InvalidAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileShape {
    Trapezoid,
    Triangle,
}

/// A planned symmetric trapezoidal (or degenerate triangular) velocity profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub q_s: f64,
    pub q_g: f64,
    pub vel: f64,
    pub acc: f64,
    pub t_ramp: f64,
    pub t_cruise: f64,
    pub total_time: f64,
    pub shape: ProfileShape,
    /// Peak angular speed actually reached: min(vel, sqrt(acc * |q_g - q_s|)).
    pub peak_vel: f64,
}

/// Plan a profile from the four action parameters.
///
/// Degrades to a triangle when `vel^2 / acc >= |q_g - q_s|`; the sign of
/// motion follows `sign(q_g - q_s)`.
pub fn plan_profile(q_s: f64, q_g: f64, vel: f64, acc: f64) -> Result<MotionProfile, ProfileError> {
    if !(vel > 0.0) || !(acc > 0.0) || q_g == q_s || !q_s.is_finite() || !q_g.is_finite() {
        return Err(ProfileError::InvalidAction);
    }
    let dist = (q_g - q_s).abs();
    if vel * vel / acc >= dist {
        let peak = (acc * dist).sqrt();
        let t_ramp = peak / acc;
        Ok(MotionProfile {
            q_s,
            q_g,
            vel,
            acc,
            t_ramp,
            t_cruise: 0.0,
            total_time: 2.0 * t_ramp,
            shape: ProfileShape::Triangle,
            peak_vel: peak,
        })
    } else {
        let t_ramp = vel / acc;
        let t_cruise = (dist - vel * vel / acc) / vel;
        Ok(MotionProfile {
            q_s,
            q_g,
            vel,
            acc,
            t_ramp,
            t_cruise,
            total_time: 2.0 * t_ramp + t_cruise,
            shape: ProfileShape::Trapezoid,
            peak_vel: vel,
        })
    }
}

/// The fixed one-shot cast profile at cruising speed `vel`.
pub fn cast_profile(vel: f64) -> Result<MotionProfile, ProfileError> {
    plan_profile(CAST_Q_S, CAST_Q_G, vel, CAST_ACC)
}

impl MotionProfile {
    /// Signed sweep direction.
    fn dir(&self) -> f64 {
        (self.q_g - self.q_s).signum()
    }

    /// Joint angle at time `t`, clamped to `q_g` for `t >= total_time`.
    pub fn position_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.q_s;
        }
        if t >= self.total_time {
            return self.q_g;
        }
        let dir = self.dir();
        let a = self.acc;
        let p = self.peak_vel;
        let travelled = if t < self.t_ramp {
            0.5 * a * t * t
        } else if t < self.t_ramp + self.t_cruise {
            0.5 * a * self.t_ramp * self.t_ramp + p * (t - self.t_ramp)
        } else {
            let td = t - self.t_ramp - self.t_cruise;
            0.5 * a * self.t_ramp * self.t_ramp + p * self.t_cruise + p * td - 0.5 * a * td * td
        };
        self.q_s + dir * travelled
    }

    /// Signed joint velocity at time `t`, 0 for `t >= total_time`.
    pub fn velocity_at(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.total_time {
            return 0.0;
        }
        let dir = self.dir();
        let speed = if t < self.t_ramp {
            self.acc * t
        } else if t < self.t_ramp + self.t_cruise {
            self.peak_vel
        } else {
            self.peak_vel - self.acc * (t - self.t_ramp - self.t_cruise)
        };
        dir * speed.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn trapezoid_closed_form() {
        let p = plan_profile(0.0, PI, 2.0, 20.0).unwrap();
        assert_eq!(p.shape, ProfileShape::Trapezoid);
        assert!((p.t_ramp - 0.1).abs() < 1e-12);
        assert!((p.t_cruise - 1.4708).abs() < 1e-4);
        assert!((p.total_time - 1.6708).abs() < 1e-4);
    }

    #[test]
    fn triangle_closed_form() {
        let p = plan_profile(0.0, 0.1, 6.28, 20.0).unwrap();
        assert_eq!(p.shape, ProfileShape::Triangle);
        assert!((p.peak_vel - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((p.total_time - 2.0 * (0.1_f64 / 20.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert_eq!(plan_profile(0.0, PI, -1.0, 20.0), Err(ProfileError::InvalidAction));
        assert_eq!(plan_profile(0.0, PI, 0.0, 20.0), Err(ProfileError::InvalidAction));
        assert_eq!(plan_profile(0.0, PI, 1.0, -5.0), Err(ProfileError::InvalidAction));
        assert_eq!(plan_profile(1.0, 1.0, 1.0, 5.0), Err(ProfileError::InvalidAction));
    }

    #[test]
    fn boundary_values() {
        let p = plan_profile(0.0, PI, 2.0, 20.0).unwrap();
        assert_eq!(p.position_at(0.0), 0.0);
        assert_eq!(p.velocity_at(0.0), 0.0);
        assert_eq!(p.position_at(p.total_time), PI);
        assert_eq!(p.position_at(p.total_time + 1.0), PI);
        assert_eq!(p.velocity_at(p.total_time), 0.0);
        // On the ramp: v = acc * t.
        assert!((p.velocity_at(0.05) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_sweep_is_mirrored() {
        let p = plan_profile(1.0, -1.0, 2.0, 20.0).unwrap();
        assert!(p.velocity_at(0.05) < 0.0);
        assert_eq!(p.position_at(p.total_time), -1.0);
    }

    /// Quadrature oracle: integrating velocity_at on a 1e-5 s grid must
    /// recover the commanded sweep.
    fn integrated_sweep(p: &MotionProfile) -> f64 {
        let h = 1e-5;
        let n = (p.total_time / h).ceil() as usize;
        let mut acc = 0.0;
        for k in 0..n {
            let t0 = k as f64 * h;
            let t1 = ((k + 1) as f64 * h).min(p.total_time);
            acc += 0.5 * (p.velocity_at(t0) + p.velocity_at(t1)) * (t1 - t0);
            if t1 >= p.total_time {
                break;
            }
        }
        acc
    }

    #[test]
    fn velocity_integrates_to_sweep() {
        for &(q_g, vel, acc) in
            &[(PI, 2.0, 20.0), (0.1, 6.28, 20.0), (0.6, 3.0, 40.0), (PI, 6.28, 20.0)]
        {
            let p = plan_profile(0.0, q_g, vel, acc).unwrap();
            assert!(
                (integrated_sweep(&p) - (q_g - 0.0)).abs() < 1e-6,
                "quadrature mismatch for vel={vel} acc={acc}"
            );
        }
    }

    #[test]
    fn finite_difference_matches_velocity() {
        let p = plan_profile(0.0, PI, 2.0, 20.0).unwrap();
        let h = 1e-5;
        let mut t = h;
        while t < p.total_time - h {
            let fd = (p.position_at(t + h) - p.position_at(t - h)) / (2.0 * h);
            assert!(
                (fd - p.velocity_at(t)).abs() < 1e-6,
                "fd mismatch at t={t}: {fd} vs {}",
                p.velocity_at(t)
            );
            t += 0.0137;
        }
    }

    proptest! {
        #[test]
        fn symmetry_holds(q_g in 0.05f64..6.0, vel in 0.2f64..7.0, acc in 5.0f64..60.0) {
            let p = plan_profile(0.0, q_g, vel, acc).unwrap();
            let steps = 97;
            for k in 0..=steps {
                let t = p.total_time * k as f64 / steps as f64;
                let a = p.velocity_at(t);
                let b = p.velocity_at(p.total_time - t);
                prop_assert!((a - b).abs() < 1e-12, "t={t} {a} vs {b}");
            }
        }

        #[test]
        fn duration_monotone_in_vel(q_g in 0.5f64..6.0, acc in 5.0f64..60.0) {
            let mut prev = f64::INFINITY;
            let mut vel = 0.5;
            while vel < 8.0 {
                let p = plan_profile(0.0, q_g, vel, acc).unwrap();
                prop_assert!(p.total_time <= prev + 1e-12);
                prev = p.total_time;
                vel += 0.25;
            }
        }
    }
}

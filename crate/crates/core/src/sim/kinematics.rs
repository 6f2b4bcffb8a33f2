use crate::geometry::{wrap_angle, Pose2D, Twist2D, WheelSpeeds};
use crate::robot::RobotParams;

/// Below this yaw rate a step is integrated as a straight line.
pub const STRAIGHT_EPS: f64 = 1e-9;

/// Body velocity produced by the given wheel rates.
///
/// `v = r (w_R + w_L) / 2`, `ω = r (w_R - w_L) / d`.
pub fn wheels_to_twist(ws: WheelSpeeds, params: &RobotParams) -> Twist2D {
    let r = params.wheel_radius;
    Twist2D {
        v: r * (ws.w_right + ws.w_left) / 2.0,
        w: r * (ws.w_right - ws.w_left) / params.wheel_separation,
    }
}

/// Wheel rates that realise `t`, scaled down uniformly if either wheel would
/// exceed `max_wheel_speed`.
///
/// Within limits, any twist that [`wheels_to_twist`] can produce maps back
/// to itself bit-for-bit: the closed-form inverse is refined by a few ulps
/// when rounding would otherwise perturb the round trip. Other twists have no
/// exact preimage (multiplying by `r` skips some floats) and land within
/// rounding of `t`.
pub fn twist_to_wheels(t: Twist2D, params: &RobotParams) -> WheelSpeeds {
    let ws = exact_inverse(t, params);
    let peak = ws.w_right.abs().max(ws.w_left.abs());
    if peak > params.max_wheel_speed {
        let k = params.max_wheel_speed / peak;
        return WheelSpeeds::new(ws.w_right * k, ws.w_left * k);
    }
    ws
}

fn closed_form_inverse(t: Twist2D, params: &RobotParams) -> WheelSpeeds {
    let half_turn = t.w * params.wheel_separation / 2.0;
    WheelSpeeds {
        w_right: (t.v + half_turn) / params.wheel_radius,
        w_left: (t.v - half_turn) / params.wheel_radius,
    }
}

fn exact_inverse(t: Twist2D, params: &RobotParams) -> WheelSpeeds {
    let base = closed_form_inverse(t, params);
    if wheels_to_twist(base, params) == t || !base.w_right.is_finite() || !base.w_left.is_finite() {
        return base;
    }
    // per-wheel ulps first, then steps of the larger wheel's ulp, which is
    // the resolution of the sum and difference when one wheel is near zero
    let unit = ulp(base.w_right.abs().max(base.w_left.abs()));
    let per_wheel = |dr: i64, dl: i64| WheelSpeeds::new(ulp_step(base.w_right, dr), ulp_step(base.w_left, dl));
    let coarse = |dr: i64, dl: i64| WheelSpeeds::new(base.w_right + dr as f64 * unit, base.w_left + dl as f64 * unit);
    const SPAN: i64 = 8;
    for candidate in [&per_wheel as &dyn Fn(i64, i64) -> WheelSpeeds, &coarse] {
        for radius in 1..=SPAN {
            for dr in -radius..=radius {
                for dl in -radius..=radius {
                    if dr.abs() != radius && dl.abs() != radius {
                        continue;
                    }
                    let cand = candidate(dr, dl);
                    if wheels_to_twist(cand, params) == t {
                        return cand;
                    }
                }
            }
        }
    }
    base
}

fn ulp(x: f64) -> f64 {
    x.next_up() - x
}

fn ulp_step(x: f64, n: i64) -> f64 {
    let mut v = x;
    for _ in 0..n.unsigned_abs() {
        v = if n > 0 { v.next_up() } else { v.next_down() };
    }
    v
}

/// Exact-arc unicycle update.
///
/// The arc is applied as its chord: a translation of length
/// `2 (v/ω) sin(ω dt / 2)` along the mid-step heading, then the full
/// rotation. Pure spins therefore never translate.
pub fn step_kinematics(pose: Pose2D, t: Twist2D, dt: f64) -> Pose2D {
    let dtheta = t.w * dt;
    let (chord, heading) = if t.w.abs() < STRAIGHT_EPS {
        (t.v * dt, pose.theta)
    } else {
        (2.0 * (t.v / t.w) * (dtheta / 2.0).sin(), pose.theta + dtheta / 2.0)
    };
    let (s, c) = heading.sin_cos();
    Pose2D {
        x: pose.x + chord * c,
        y: pose.y + chord * s,
        theta: wrap_angle(pose.theta + dtheta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn wheels_to_twist_examples() {
        let p = RobotParams::default();
        let t = wheels_to_twist(WheelSpeeds::new(7.0, 7.0), &p);
        assert_eq!(t.v, 0.04 * 7.0);
        assert_eq!(t.w, 0.0);

        let t = wheels_to_twist(WheelSpeeds::new(3.0, -3.0), &p);
        assert_eq!(t.v, 0.0);
        assert!(t.w > 0.0);

        let t = wheels_to_twist(WheelSpeeds::new(10.0, 5.0), &p);
        assert_eq!(t.v, 0.3);
        assert_eq!(t.w, 2.0);
    }

    #[test]
    fn twist_to_wheels_examples() {
        let p = RobotParams::default();
        let ws = twist_to_wheels(Twist2D::new(0.3, 2.0), &p);
        assert_eq!(wheels_to_twist(ws, &p), Twist2D::new(0.3, 2.0));
        assert!((ws.w_right - 10.0).abs() < 1e-12);
        assert!((ws.w_left - 5.0).abs() < 1e-12);

        let ws = twist_to_wheels(Twist2D::new(0.04 * 6.0, 0.0), &p);
        assert_eq!(ws.w_right, ws.w_left);
        assert!((ws.w_right - 6.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn realizable_twists_round_trip(wr in -25.0f64..25.0, wl in -25.0f64..25.0) {
            let p = RobotParams::default();
            let t = wheels_to_twist(WheelSpeeds::new(wr, wl), &p);
            prop_assert_eq!(wheels_to_twist(twist_to_wheels(t, &p), &p), t);
        }

        #[test]
        fn any_twist_round_trips_within_rounding(v in -1.0f64..1.0, w in -3.0f64..3.0) {
            let p = RobotParams::default();
            let back = wheels_to_twist(twist_to_wheels(Twist2D::new(v, w), &p), &p);
            prop_assert!((back.v - v).abs() <= 1e-15 && (back.w - w).abs() <= 1e-14);
        }

        #[test]
        fn steps_never_move_sideways(v in -1.0f64..1.0, w in -3.0f64..3.0, theta in -PI..PI, dt in 0.001f64..0.5) {
            let a = Pose2D::new(1.0, -2.0, theta);
            let b = step_kinematics(a, Twist2D::new(v, w), dt);
            let heading = theta + 0.5 * w * dt;
            let lateral = -heading.sin() * (b.x - a.x) + heading.cos() * (b.y - a.y);
            prop_assert!(lateral.abs() <= 1e-15, "lateral {}", lateral);
        }
    }

    #[test]
    fn saturation_preserves_ratio() {
        let p = RobotParams::default();
        let want = Twist2D::new(3.0, 4.0);
        let ws = twist_to_wheels(want, &p);
        assert!(ws.w_right.abs() <= p.max_wheel_speed + 1e-12);
        assert!(ws.w_left.abs() <= p.max_wheel_speed + 1e-12);
        let got = wheels_to_twist(ws, &p);
        assert!((got.v / got.w - want.v / want.w).abs() < 1e-12);
    }

    #[test]
    fn linearity_exact_on_dyadic_geometry() {
        let p = RobotParams {
            wheel_radius: 0.5,
            wheel_separation: 0.25,
            ..RobotParams::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut ws = || WheelSpeeds::new(rng.random_range(-64..64) as f64, rng.random_range(-64..64) as f64);
            let (a, b) = (ws(), ws());
            let (ka, kb) = (rng.random_range(-8..8) as f64, rng.random_range(-8..8) as f64);
            let mixed = WheelSpeeds::new(ka * a.w_right + kb * b.w_right, ka * a.w_left + kb * b.w_left);
            let lhs = wheels_to_twist(mixed, &p);
            let (ta, tb) = (wheels_to_twist(a, &p), wheels_to_twist(b, &p));
            assert_eq!(lhs.v, ka * ta.v + kb * tb.v);
            assert_eq!(lhs.w, ka * ta.w + kb * tb.w);
        }
    }

    #[test]
    fn linearity_default_geometry() {
        let p = RobotParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let mut ws = || WheelSpeeds::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let (a, b) = (ws(), ws());
            let (ka, kb): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mixed = WheelSpeeds::new(ka * a.w_right + kb * b.w_right, ka * a.w_left + kb * b.w_left);
            let lhs = wheels_to_twist(mixed, &p);
            let (ta, tb) = (wheels_to_twist(a, &p), wheels_to_twist(b, &p));
            assert!((lhs.v - (ka * ta.v + kb * tb.v)).abs() < 1e-12);
            assert!((lhs.w - (ka * ta.w + kb * tb.w)).abs() < 1e-12);
        }
    }

    #[test]
    fn step_examples() {
        let p = step_kinematics(Pose2D::default(), Twist2D::new(1.0, 0.0), 1.0);
        assert_eq!(p, Pose2D::new(1.0, 0.0, 0.0));

        let p = step_kinematics(Pose2D::default(), Twist2D::new(0.0, FRAC_PI_2), 1.0);
        assert_eq!((p.x, p.y), (0.0, 0.0));
        assert!((p.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn circle_closes_for_any_subdivision() {
        for n in [1usize, 2, 3, 7, 64, 1000] {
            let dt = 2.0 * PI / n as f64;
            let mut pose = Pose2D::default();
            for _ in 0..n {
                pose = step_kinematics(pose, Twist2D::new(1.0, 1.0), dt);
            }
            assert!(pose.x.abs() < 1e-9 && pose.y.abs() < 1e-9, "n={n} {pose:?}");
            assert!(wrap_angle(pose.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn quarter_arc_matches_analytic() {
        let p = step_kinematics(Pose2D::default(), Twist2D::new(1.0, 1.0), FRAC_PI_2);
        assert!((p.x - 1.0).abs() < 1e-12);
        assert!((p.y - 1.0).abs() < 1e-12);
    }
}

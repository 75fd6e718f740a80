//! Deterministic planar dynamics of the rope + payload system.
//!
//! Top-down world: gravity enters only through Coulomb friction against the
//! ground. Bodies are the arm end-effector (kinematic, on a circle around the
//! origin), a chain of rope particles joined by distance constraints, and a
//! payload rigidly attached to the rope's far end (it shares the last
//! particle's position and adds its mass there).
//!
//! Integration is semi-implicit Euler followed by Gauss-Seidel projection of
//! the pin, distance, and wall contact constraints; velocities are rebuilt
//! from the position change (position-based dynamics).

use crate::config::{EnvConfig, SimParams};
use crate::math::{Rect, Vec2};
use crate::profile::MotionProfile;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid placement: initial rope or payload overlaps the wall")]
    InvalidPlacement,
    #[error("invalid environment: {0}")]
    InvalidEnvironment(&'static str),
    #[error("numerical divergence at t = {t} s")]
    NumericalDivergence { t: f64 },
}

/// Full mechanical state at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub arm_angle: f64,
    pub rope_pos: Vec<Vec2>,
    pub rope_vel: Vec<Vec2>,
    pub payload_pos: Vec2,
    pub payload_vel: Vec2,
    /// Set once the payload disc touches the wall; never cleared.
    pub payload_wall_collision: bool,
    /// Set once any rope particle touches the wall; never cleared.
    pub rope_wall_contact: bool,
    pub action_done: bool,
}

/// Outcome of one simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub final_payload_pos: Vec2,
    /// Payload centroid sampled every `record_stride` steps plus the final pose.
    pub poi_trajectory: Vec<Vec2>,
    /// Payload struck the wall at some point; downstream data is discarded.
    pub invalid: bool,
    pub duration: f64,
}

fn validate(cfg: &EnvConfig) -> Result<(), SimError> {
    if cfg.rope_particles < 3 {
        return Err(SimError::InvalidEnvironment("rope_particles must be >= 3"));
    }
    if !(0.05..=1.0).contains(&cfg.mu) {
        return Err(SimError::InvalidEnvironment("mu must lie in [0.05, 1.0]"));
    }
    if cfg.rope_length <= 0.0
        || cfg.rope_mass <= 0.0
        || cfg.payload_mass <= 0.0
        || cfg.payload_half_extent <= 0.0
        || cfg.arm_length <= 0.0
    {
        return Err(SimError::InvalidEnvironment("lengths and masses must be positive"));
    }
    if cfg.wall().contains(Vec2::ZERO) {
        return Err(SimError::InvalidEnvironment("wall must not contain the origin"));
    }
    Ok(())
}

/// Lay the system out at rest with the arm at `q_s`: rope straight along the
/// ray from the origin through the end-effector, payload at the far end.
pub fn init_at_angle(cfg: &EnvConfig, q_s: f64) -> Result<SimState, SimError> {
    validate(cfg)?;
    let p = cfg.rope_particles;
    let ee = Vec2::from_angle(q_s) * cfg.arm_length;
    let dir = Vec2::from_angle(q_s);
    let seg = cfg.segment_length();
    let rope_pos: Vec<Vec2> = (0..p).map(|i| ee + dir * (seg * i as f64)).collect();
    let payload_pos = rope_pos[p - 1];

    let wall = cfg.wall();
    let overlaps = rope_pos.iter().any(|&q| wall.contains(q))
        || wall.distance(payload_pos) < cfg.payload_half_extent;
    if overlaps {
        return Err(SimError::InvalidPlacement);
    }

    Ok(SimState {
        t: 0.0,
        arm_angle: q_s,
        rope_pos,
        rope_vel: vec![Vec2::ZERO; p],
        payload_pos,
        payload_vel: Vec2::ZERO,
        payload_wall_collision: false,
        rope_wall_contact: false,
        action_done: false,
    })
}

/// Lay the system out with the arm at angle 0 (the task's start pose).
pub fn init_environment(cfg: &EnvConfig) -> Result<SimState, SimError> {
    init_at_angle(cfg, 0.0)
}

/// Coulomb ground-friction velocity update over `dt`: decelerate by `mu * g`
/// against the motion, zeroing speeds at or below the static cutoff.
pub fn apply_ground_friction(v: Vec2, mu: f64, params: &SimParams, dt: f64) -> Vec2 {
    let speed = v.norm();
    if speed <= params.static_cutoff {
        return Vec2::ZERO;
    }
    let drop = mu * params.gravity * dt;
    if drop >= speed {
        Vec2::ZERO
    } else {
        v - v.normalized() * drop
    }
}

#[derive(Clone, Copy)]
struct Contact {
    normal: Vec2,
    /// Total positional correction along the normal accumulated this step.
    depth: f64,
}

/// Reusable per-step buffers; the episode loop runs millions of steps.
#[derive(Default)]
struct StepScratch {
    prev: Vec<Vec2>,
    contacts: Vec<Option<Contact>>,
}

/// Push a point out of the rectangle through its nearest face.
/// Returns the outward normal and the correction applied, or None if outside.
fn project_point_out(p: &mut Vec2, rect: &Rect) -> Option<(Vec2, f64)> {
    if !rect.contains(*p) {
        return None;
    }
    let (lo, hi) = (rect.min(), rect.max());
    let d_left = p.x - lo.x;
    let d_right = hi.x - p.x;
    let d_bottom = p.y - lo.y;
    let d_top = hi.y - p.y;
    let min = d_left.min(d_right).min(d_bottom).min(d_top);
    let (normal, depth) = if min == d_left {
        (Vec2 { x: -1.0, y: 0.0 }, d_left)
    } else if min == d_right {
        (Vec2 { x: 1.0, y: 0.0 }, d_right)
    } else if min == d_bottom {
        (Vec2 { x: 0.0, y: -1.0 }, d_bottom)
    } else {
        (Vec2 { x: 0.0, y: 1.0 }, d_top)
    };
    *p += normal * depth;
    Some((normal, depth))
}

/// Push a disc of radius `r` clear of the rectangle. Returns contact normal
/// and correction if the disc intersected.
fn project_disc_out(c: &mut Vec2, r: f64, rect: &Rect) -> Option<(Vec2, f64)> {
    if rect.contains(*c) {
        let (n, inner) = project_point_out(c, rect).expect("contained point projects");
        *c += n * r;
        return Some((n, inner + r));
    }
    let cp = rect.closest_point(*c);
    let delta = *c - cp;
    if delta.norm_sq() >= r * r {
        return None;
    }
    let dist = delta.norm();
    let n = delta.normalized();
    let depth = r - dist;
    *c += n * depth;
    Some((n, depth))
}

/// Advance the state by one step of `params.dt` under the driving profile.
pub fn step(
    state: &SimState,
    cfg: &EnvConfig,
    profile: &MotionProfile,
    params: &SimParams,
) -> Result<SimState, SimError> {
    let mut next = state.clone();
    step_mut(&mut next, cfg, profile, params)?;
    Ok(next)
}

/// In-place variant of [`step`]; the episode loop uses this to avoid clones.
pub fn step_mut(
    state: &mut SimState,
    cfg: &EnvConfig,
    profile: &MotionProfile,
    params: &SimParams,
) -> Result<(), SimError> {
    step_scratch(state, cfg, profile, params, &mut StepScratch::default())
}

fn step_scratch(
    state: &mut SimState,
    cfg: &EnvConfig,
    profile: &MotionProfile,
    params: &SimParams,
    scratch: &mut StepScratch,
) -> Result<(), SimError> {
    // Substep resolution is needed while the arm drives and while bodies
    // still move briskly; the slow settle tail is stiff-free. The switch
    // depends only on the state, so trajectories stay deterministic.
    let fast = !state.action_done || state.rope_vel.iter().any(|v| v.norm_sq() > 0.25);
    let n_sub = if fast { params.substeps.max(1) } else { 1 };
    let dt_sub = params.dt / n_sub as f64;
    for _ in 0..n_sub {
        substep(state, cfg, profile, params, scratch, dt_sub)?;
    }
    Ok(())
}

fn substep(
    state: &mut SimState,
    cfg: &EnvConfig,
    profile: &MotionProfile,
    params: &SimParams,
    scratch: &mut StepScratch,
    dt: f64,
) -> Result<(), SimError> {
    let p = cfg.rope_particles;
    let t_new = state.t + dt;
    let theta = profile.position_at(t_new);
    let ee = Vec2::from_angle(theta) * cfg.arm_length;
    let wall = cfg.wall();
    let seg = cfg.segment_length();

    // Inverse masses: particle 0 is kinematic (arm-held); the last particle
    // carries the payload mass on top of its own.
    let w_mid = 1.0 / cfg.particle_mass();
    let w_end = 1.0 / (cfg.particle_mass() + cfg.payload_mass);
    let inv_mass = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if i == p - 1 {
            w_end
        } else {
            w_mid
        }
    };

    // Semi-implicit Euler with ground friction.
    scratch.prev.clear();
    scratch.prev.extend_from_slice(&state.rope_pos);
    let prev = &scratch.prev;
    for i in 1..p {
        let v = apply_ground_friction(state.rope_vel[i], cfg.mu, params, dt);
        state.rope_vel[i] = v;
        state.rope_pos[i] += v * dt;
    }

    // Contacts are only possible when the system's bounding box (inflated by
    // the payload radius plus solver slack) meets the wall.
    let mut bb_lo = state.rope_pos[0];
    let mut bb_hi = state.rope_pos[0];
    for q in &state.rope_pos {
        bb_lo = Vec2 { x: bb_lo.x.min(q.x), y: bb_lo.y.min(q.y) };
        bb_hi = Vec2 { x: bb_hi.x.max(q.x), y: bb_hi.y.max(q.y) };
    }
    let slack = cfg.payload_half_extent + 0.05;
    let (w_lo, w_hi) = (wall.min(), wall.max());
    let near_wall = bb_lo.x - slack <= w_hi.x
        && bb_hi.x + slack >= w_lo.x
        && bb_lo.y - slack <= w_hi.y
        && bb_hi.y + slack >= w_lo.y;

    // Gauss-Seidel projection: pin, chain distances, wall contacts.
    scratch.contacts.clear();
    scratch.contacts.resize(p, None);
    let contacts = &mut scratch.contacts;
    for _ in 0..params.solver_iters {
        state.rope_pos[0] = ee;

        // Sweep from the pin outward: the pin is the disturbance source, so
        // this ordering propagates its motion down the whole chain per pass.
        for j in 0..p - 1 {
            let delta = state.rope_pos[j + 1] - state.rope_pos[j];
            let dist = delta.norm();
            if dist <= f64::EPSILON {
                continue;
            }
            let err = dist - seg;
            let n = delta * (1.0 / dist);
            let w0 = inv_mass(j);
            let w1 = inv_mass(j + 1);
            let scale = err / (w0 + w1);
            state.rope_pos[j] += n * (w0 * scale);
            state.rope_pos[j + 1] -= n * (w1 * scale);
        }

        if !near_wall {
            continue;
        }
        for i in 1..p {
            let hit = if i == p - 1 {
                let hit = project_disc_out(&mut state.rope_pos[i], cfg.payload_half_extent, &wall);
                if hit.is_some() {
                    state.payload_wall_collision = true;
                }
                hit
            } else {
                let hit = project_point_out(&mut state.rope_pos[i], &wall);
                if hit.is_some() {
                    state.rope_wall_contact = true;
                }
                hit
            };
            if let Some((normal, depth)) = hit {
                let c = contacts[i].get_or_insert(Contact { normal, depth: 0.0 });
                c.normal = normal;
                c.depth += depth;
            }
        }
    }

    // Rebuild velocities from the position change.
    for i in 0..p {
        state.rope_vel[i] = (state.rope_pos[i] - prev[i]) * (1.0 / dt);
    }

    // Contact velocity pass: cancel inward normal velocity and apply
    // Coulomb friction bounded by the normal impulse.
    for i in 1..p {
        let Some(contact) = &contacts[i] else { continue };
        let contact = *contact;
        let n = contact.normal;
        let mut v = state.rope_vel[i];
        let vn = v.dot(n);
        if vn < 0.0 {
            v -= n * vn;
        }
        let vt = v - n * v.dot(n);
        let vt_len = vt.norm();
        if vt_len > 0.0 {
            let max_drop = cfg.mu * contact.depth / dt;
            let drop = max_drop.min(vt_len);
            v -= vt.normalized() * drop;
        }
        state.rope_vel[i] = v;
    }

    state.payload_pos = state.rope_pos[p - 1];
    state.payload_vel = state.rope_vel[p - 1];
    state.arm_angle = theta;
    state.t = t_new;
    state.action_done = t_new >= profile.total_time;

    let finite = state.rope_pos.iter().all(|q| q.is_finite())
        && state.rope_vel.iter().all(|q| q.is_finite());
    if !finite {
        return Err(SimError::NumericalDivergence { t: state.t });
    }
    Ok(())
}

/// Total kinetic energy: rope particles at `rope_mass / P` each plus the
/// payload mass riding on the last particle.
pub fn kinetic_energy(state: &SimState, cfg: &EnvConfig) -> f64 {
    let m_particle = cfg.particle_mass();
    let rope: f64 =
        state.rope_vel.iter().map(|v| 0.5 * m_particle * v.norm_sq()).sum();
    rope + 0.5 * cfg.payload_mass * state.payload_vel.norm_sq()
}

/// Run a full episode: drive the profile from its start angle, then let the
/// system settle. Terminates when the action is done and kinetic energy has
/// decayed below `rest_energy`, or at the hard time limit.
pub fn run_episode(
    cfg: &EnvConfig,
    action: &MotionProfile,
    params: &SimParams,
) -> Result<EpisodeResult, SimError> {
    run_episode_full(cfg, action, params).map(|(result, _)| result)
}

/// [`run_episode`] variant that also returns the settled final state.
pub fn run_episode_full(
    cfg: &EnvConfig,
    action: &MotionProfile,
    params: &SimParams,
) -> Result<(EpisodeResult, SimState), SimError> {
    let mut state = init_at_angle(cfg, action.q_s)?;
    let mut trajectory = Vec::new();
    let mut scratch = StepScratch::default();
    let mut step_idx: usize = 0;
    loop {
        if step_idx % params.record_stride == 0 {
            trajectory.push(state.payload_pos);
        }
        step_scratch(&mut state, cfg, action, params, &mut scratch)?;
        step_idx += 1;
        let settled = state.action_done && kinetic_energy(&state, cfg) < params.rest_energy;
        if settled || state.t > params.max_duration {
            break;
        }
    }
    trajectory.push(state.payload_pos);
    let result = EpisodeResult {
        final_payload_pos: state.payload_pos,
        poi_trajectory: trajectory,
        invalid: state.payload_wall_collision,
        duration: state.t,
    };
    Ok((result, state))
}

/// Largest rope-segment length error, meters.
pub fn constraint_residual(state: &SimState, cfg: &EnvConfig) -> f64 {
    let seg = cfg.segment_length();
    state
        .rope_pos
        .windows(2)
        .map(|w| ((w[1] - w[0]).norm() - seg).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimParams;
    use crate::math::vec2;
    use crate::profile::{cast_profile, plan_profile};

    fn far_wall(cfg: &mut EnvConfig) {
        cfg.wall_center = vec2(100.0, 100.0);
    }

    #[test]
    fn straight_line_layout() {
        let mut cfg = EnvConfig { arm_length: 0.5, rope_length: 1.0, ..EnvConfig::default() };
        far_wall(&mut cfg);
        let s = init_environment(&cfg).unwrap();
        assert_eq!(s.rope_pos[0], vec2(0.5, 0.0));
        assert!((s.payload_pos.x - 1.5).abs() < 1e-12);
        assert!((s.payload_pos.y).abs() < 1e-12);
        assert_eq!(s.rope_pos[cfg.rope_particles - 1], s.payload_pos);
        assert_eq!(kinetic_energy(&s, &cfg), 0.0);
    }

    #[test]
    fn overlapping_wall_rejected() {
        let cfg = EnvConfig {
            arm_length: 0.5,
            rope_length: 1.0,
            wall_center: vec2(1.5, 0.0),
            wall_half_extents: vec2(0.2, 0.2),
            ..EnvConfig::default()
        };
        assert_eq!(init_environment(&cfg), Err(SimError::InvalidPlacement));
    }

    #[test]
    fn invalid_particle_count_rejected() {
        let cfg = EnvConfig { rope_particles: 2, ..EnvConfig::default() };
        assert!(matches!(init_environment(&cfg), Err(SimError::InvalidEnvironment(_))));
    }

    /// Coulomb stop oracle: a free body at 1 m/s under mu = 0.5 stops after
    /// v / (mu g) = 0.2039 s having gone v^2 / (2 mu g) = 0.10194 m.
    #[test]
    fn coulomb_stop_closed_form() {
        let params = SimParams::default();
        let mu = 0.5;
        let mut v = vec2(1.0, 0.0);
        let mut x = 0.0;
        let mut t = 0.0;
        while v.norm() > 0.0 {
            v = apply_ground_friction(v, mu, &params, params.dt);
            x += v.x * params.dt;
            t += params.dt;
            assert!(t < 1.0, "failed to stop");
        }
        assert!((x - 0.10194).abs() < 1e-3, "stop distance {x}");
        assert!((t - 0.2039).abs() < 2e-3, "stop time {t}");
    }

    #[test]
    fn frictionless_coasting_preserves_velocity() {
        let params = SimParams::default();
        let v = vec2(0.7, -0.4);
        let out = apply_ground_friction(v, 0.0, &params, params.dt);
        assert!((out - v).norm() < 1e-9);
    }

    #[test]
    fn residual_stays_small_through_cast() {
        let cfg = EnvConfig::default();
        let params = SimParams::default();
        let action = cast_profile(6.28).unwrap();
        let mut state = init_at_angle(&cfg, action.q_s).unwrap();
        let mut worst: f64 = 0.0;
        while !(state.action_done && kinetic_energy(&state, &cfg) < params.rest_energy)
            && state.t <= params.max_duration
        {
            step_mut(&mut state, &cfg, &action, &params).unwrap();
            worst = worst.max(constraint_residual(&state, &cfg));
        }
        assert!(worst <= 1e-3, "worst residual {worst}");
    }

    #[test]
    fn pin_is_exact_while_driving() {
        let cfg = EnvConfig::default();
        let params = SimParams::default();
        let action = cast_profile(3.0).unwrap();
        let mut state = init_at_angle(&cfg, action.q_s).unwrap();
        for _ in 0..2000 {
            step_mut(&mut state, &cfg, &action, &params).unwrap();
            let r = state.rope_pos[0].norm();
            assert!((r - cfg.arm_length).abs() <= 1e-9);
        }
    }

    #[test]
    fn energy_decays_after_action() {
        let cfg = EnvConfig::default();
        let params = SimParams::default();
        let action = cast_profile(4.0).unwrap();
        let mut state = init_at_angle(&cfg, action.q_s).unwrap();
        let mut prev: Option<f64> = None;
        loop {
            step_mut(&mut state, &cfg, &action, &params).unwrap();
            if state.action_done {
                let ke = kinetic_energy(&state, &cfg);
                if let Some(p) = prev {
                    assert!(ke <= p + 1e-6, "energy rose {p} -> {ke} at t={}", state.t);
                }
                if ke < params.rest_energy {
                    break;
                }
                prev = Some(ke);
            }
            assert!(state.t <= params.max_duration, "no rest reached");
        }
    }

    #[test]
    fn episode_is_deterministic() {
        let cfg = EnvConfig::default();
        let params = SimParams::default();
        let action = cast_profile(3.5).unwrap();
        let a = run_episode(&cfg, &action, &params).unwrap();
        let b = run_episode(&cfg, &action, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slowest_cast_still_terminates() {
        let mut cfg = EnvConfig::default();
        far_wall(&mut cfg);
        let params = SimParams::default();
        let action = cast_profile(1.0).unwrap();
        let ep = run_episode(&cfg, &action, &params).unwrap();
        assert!(ep.duration < params.max_duration);
        let start = init_environment(&cfg).unwrap().payload_pos;
        assert!(ep.final_payload_pos.distance(start) > 0.05, "payload never moved");
    }

    #[test]
    fn wall_on_swing_path_flags_invalid() {
        // Take a mid-flight payload position from a wall-free run, then put
        // the wall exactly there and replay.
        let mut cfg = EnvConfig::default();
        far_wall(&mut cfg);
        let params = SimParams::default();
        let action = cast_profile(6.28).unwrap();
        let free = run_episode(&cfg, &action, &params).unwrap();
        let mid = free.poi_trajectory[free.poi_trajectory.len() / 2];
        let blocked_cfg =
            EnvConfig { wall_center: mid, wall_half_extents: vec2(0.2, 0.2), ..EnvConfig::default() };
        let ep = run_episode(&blocked_cfg, &action, &params).unwrap();
        assert!(ep.invalid);
    }

    #[test]
    fn no_penetration_at_step_end() {
        let cfg = EnvConfig::default();
        let params = SimParams::default();
        let action = cast_profile(6.28).unwrap();
        let wall = cfg.wall();
        let mut state = init_at_angle(&cfg, action.q_s).unwrap();
        while !(state.action_done && kinetic_energy(&state, &cfg) < params.rest_energy)
            && state.t <= params.max_duration
        {
            step_mut(&mut state, &cfg, &action, &params).unwrap();
            for q in &state.rope_pos {
                let inside_depth = if wall.contains(*q) {
                    let (lo, hi) = (wall.min(), wall.max());
                    (q.x - lo.x).min(hi.x - q.x).min(q.y - lo.y).min(hi.y - q.y)
                } else {
                    0.0
                };
                assert!(inside_depth <= 1e-6, "penetration {inside_depth} at t={}", state.t);
            }
        }
    }

    #[test]
    fn wall_free_reach_monotone_in_vel() {
        let mut cfg = EnvConfig::default();
        far_wall(&mut cfg);
        let params = SimParams::default();
        let mut prev = -f64::INFINITY;
        let mut vel = 1.0;
        while vel <= 6.25 + 1e-9 {
            let action = cast_profile(vel).unwrap();
            let ep = run_episode(&cfg, &action, &params).unwrap();
            let reach = ep.final_payload_pos.norm();
            assert!(
                reach >= prev - 1e-3,
                "reach fell from {prev} to {reach} at vel={vel}"
            );
            prev = reach;
            vel += 0.25;
        }
    }

    #[test]
    fn probe_profile_stays_clear_of_wall() {
        let cfg = EnvConfig::default();
        let params = SimParams::default();
        let probe = plan_profile(0.0, 0.6, 3.0, 40.0).unwrap();
        let (ep, state) = run_episode_full(&cfg, &probe, &params).unwrap();
        assert!(!ep.invalid);
        assert!(!state.rope_wall_contact);
    }
}

//! Environment description and the JSON run configuration.

use crate::math::{vec2, Rect, Vec2};
use serde::{Deserialize, Serialize};

/// One sampled environment: physics parameters, geometry, and goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Kinetic friction coefficient of the ground (and wall faces).
    pub mu: f64,
    /// Rope length in meters.
    pub rope_length: f64,
    /// Total rope mass in kg, spread uniformly over the particles.
    pub rope_mass: f64,
    /// Rope radius in meters; render-only.
    pub rope_radius: f64,
    /// Number of rope particles (>= 3).
    pub rope_particles: usize,
    /// Payload mass in kg.
    pub payload_mass: f64,
    /// Half side of the square payload; also its collision radius.
    pub payload_half_extent: f64,
    /// Payload height in meters; render-only.
    pub payload_height: f64,
    /// Center of the obstacle wall rectangle.
    pub wall_center: Vec2,
    /// Half extents of the obstacle wall rectangle.
    pub wall_half_extents: Vec2,
    /// Wall height in meters; render-only.
    pub wall_height: f64,
    /// Target position for the payload centroid.
    pub goal: Vec2,
    /// Arm length: the end-effector moves on a circle of this radius.
    pub arm_length: f64,
    /// Seed this environment was sampled from.
    pub seed: u64,
}

impl EnvConfig {
    pub fn wall(&self) -> Rect {
        Rect { center: self.wall_center, half_extents: self.wall_half_extents }
    }

    /// Mass of a single rope particle.
    pub fn particle_mass(&self) -> f64 {
        self.rope_mass / self.rope_particles as f64
    }

    /// Rest length of one rope segment.
    pub fn segment_length(&self) -> f64 {
        self.rope_length / (self.rope_particles - 1) as f64
    }
}

impl Default for EnvConfig {
    /// A mid-range environment; the wall sits across the sweep's terminal arc
    /// and the goal lies in the acceptance region at its lower-left corner.
    fn default() -> Self {
        EnvConfig {
            mu: 0.45,
            rope_length: 1.0,
            rope_mass: 0.1,
            rope_radius: 0.01,
            rope_particles: 20,
            payload_mass: 0.4,
            payload_half_extent: 0.045,
            payload_height: 0.1,
            wall_center: vec2(1.5 * (120.0f64).to_radians().cos(), 1.5 * (120.0f64).to_radians().sin()),
            wall_half_extents: vec2(0.3, 0.045),
            wall_height: 0.3,
            goal: vec2(-1.3, 0.7),
            arm_length: 0.8,
            seed: 0,
        }
    }
}

fn default_m() -> usize {
    64
}

fn default_extent() -> f64 {
    2.5
}

/// Raster geometry shared by every observation channel: an ego-centric,
/// top-down square window of `2 * extent` meters rendered at `m x m` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterSpec {
    pub m: usize,
    pub extent: f64,
}

impl Default for RasterSpec {
    fn default() -> Self {
        RasterSpec { m: default_m(), extent: default_extent() }
    }
}

/// Fixed integrator and episode constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    /// Integration step, seconds.
    pub dt: f64,
    /// Gauss-Seidel projection iterations per substep.
    pub solver_iters: usize,
    /// Internal substeps per `dt`; raises solver stiffness headroom during
    /// whip-crack transients without changing the public step size.
    pub substeps: usize,
    /// Gravitational acceleration, m/s^2; enters through friction only.
    pub gravity: f64,
    /// Below this speed a body is considered statically stuck and zeroed.
    pub static_cutoff: f64,
    /// Episode ends when the action is done and kinetic energy drops below this.
    pub rest_energy: f64,
    /// Hard episode time limit, seconds.
    pub max_duration: f64,
    /// The payload centroid is recorded every this many steps.
    pub record_stride: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 1e-3,
            solver_iters: 10,
            substeps: 2,
            gravity: 9.81,
            static_cutoff: 1e-3,
            rest_energy: 1e-4,
            max_duration: 8.0,
            record_stride: 10,
        }
    }
}

/// Uniform randomization ranges for environment sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleRanges {
    pub mu: [f64; 2],
    pub rope_length: [f64; 2],
    pub rope_mass: [f64; 2],
    pub rope_radius: [f64; 2],
    pub payload_mass: [f64; 2],
    pub payload_half_extent: [f64; 2],
    pub wall_half_x: [f64; 2],
    pub wall_half_y: [f64; 2],
    /// Wall center radius from the origin, meters.
    pub wall_radius: [f64; 2],
    /// Wall center bearing from +x, degrees.
    pub wall_bearing_deg: [f64; 2],
    pub rope_particles: usize,
    pub arm_length: f64,
    pub payload_height: f64,
    pub wall_height: f64,
}

impl Default for SampleRanges {
    fn default() -> Self {
        SampleRanges {
            mu: [0.2, 0.7],
            rope_length: [0.8, 1.5],
            rope_mass: [0.05, 0.2],
            rope_radius: [0.005, 0.015],
            payload_mass: [0.1, 0.5],
            payload_half_extent: [0.03, 0.06],
            wall_half_x: [0.15, 0.4],
            wall_half_y: [0.03, 0.06],
            wall_radius: [1.2, 1.8],
            wall_bearing_deg: [100.0, 140.0],
            rope_particles: 20,
            arm_length: 0.8,
            payload_height: 0.1,
            wall_height: 0.3,
        }
    }
}

/// Network training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Decoupled weight decay.
    pub weight_decay: f64,
    pub seed: u64,
    /// Reshuffle the training split every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 96,
            epochs: 37,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            seed: 0,
            shuffle: true,
        }
    }
}

/// Whole-pipeline configuration as accepted by the CLI `--config` flag.
///
/// Every field is optional in JSON; omitted fields take the defaults below.
/// Unknown keys are rejected so a typo cannot silently alter the physics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub raster: RasterSpec,
    pub sim: SimParams,
    pub sample: SampleRanges,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

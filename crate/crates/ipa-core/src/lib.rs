//! Core library: planar rope-cast simulation, observation rendering, dataset
//! generation, a small convolutional regressor, and the evaluation harness.

pub mod config;
pub mod datagen;
pub mod eval;
pub mod io;
pub mod math;
pub mod profile;
pub mod percept;
pub mod sim;

pub use config::{EnvConfig, RasterSpec, RunConfig, SampleRanges, SimParams, TrainConfig};
pub use math::{vec2, Rect, Vec2};
pub use profile::{cast_profile, plan_profile, MotionProfile, ProfileError, ProfileShape};
pub use sim::{
    init_environment, kinetic_energy, run_episode, step, EpisodeResult, SimError, SimState,
};

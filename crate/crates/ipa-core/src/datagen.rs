//! Environment randomization, the SysID probe, iterative velocity sampling
//! with hindsight relabeling, and dataset serialization.
//!
//! # Dataset file layout (magic `IPA1`, version 1, little-endian)
//!
//! ```text
//! header:  magic [u8;4] | version u32 | m u32 | channels u32 | records u32 | extent f64
//! record:  env_id u32 | cfg (16 f64 fields + rope_particles u32 + seed u64)
//!          | label_vel f64 | oracle_vel f64 | final_pos 2xf64
//!          | obs channels*m*m f32
//! footer:  crc32 u32 over everything above
//! ```
//!
//! Observation channels are stored as f32 (they are network inputs); the
//! physics snapshot and labels keep full f64 so re-simulating a record
//! reproduces its goal bit-for-bit.

use crate::config::{EnvConfig, RasterSpec, SampleRanges, SimParams};
use crate::eval::{self, EvalError, VEL_RANGE};
use crate::io::{CrcReader, CrcWriter, FormatError};
use crate::math::{vec2, Rect, Vec2};
use crate::percept::{self, Channel, ObservationStack, PerceptError};
use crate::profile::{cast_profile, plan_profile, MotionProfile, CAST_ACC, CAST_Q_G, CAST_Q_S};
use crate::sim::{self, SimError, SimState};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use thiserror::Error;

/// Probe joint sweep, rad.
pub const PROBE_Q_G: f64 = 0.6;
/// Probe cruising velocity, rad/s.
pub const PROBE_VEL: f64 = 3.0;
/// Probe acceleration, rad/s^2.
pub const PROBE_ACC: f64 = 40.0;

/// Most environment draws allowed before giving up on a seed.
pub const MAX_SAMPLE_TRIES: usize = 100;
/// Most episodes sampled per environment.
pub const MAX_EPISODES: usize = 25;

const SCHEDULE_SALT: u64 = 0x5343_4845_4455_4C45; // "SCHEDULE"
const SPLIT_SALT: u64 = 0x5350_4C49_5453_4545; // "SPLITSEE"

const MAGIC: [u8; 4] = *b"IPA1";
const VERSION: u32 = 1;
const CHANNELS: u32 = 5;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Percept(#[from] PerceptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("probe contacted the wall; environment must be resampled")]
    ProbeContact,
    #[error("unsatisfiable environment: no valid draw in {0} tries")]
    UnsatisfiableEnvironment(usize),
    #[error("too few environments: {0} (need at least 10)")]
    TooFewEnvironments(usize),
    #[error("split ratios must be positive and sum to 1")]
    BadRatios,
}

/// The fixed short-horizon, high-acceleration probe action; identical across
/// every environment so trajectory differences encode only the physics.
pub fn probe_action() -> MotionProfile {
    plan_profile(0.0, PROBE_Q_G, PROBE_VEL, PROBE_ACC).expect("probe constants are valid")
}

/// One SysID interaction: the probe, its rasterized payload trajectory, and
/// the settled state the observation channels are rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct SysIDRecord {
    pub probe_action: MotionProfile,
    pub traj_map: Channel,
    pub rest_state: SimState,
}

/// One training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub env_id: u32,
    pub obs: ObservationStack,
    pub label_vel: f64,
    pub oracle_vel: f64,
    pub final_pos: Vec2,
    /// Environment with the hindsight goal; audit only, never a network input.
    pub cfg_snapshot: EnvConfig,
}

/// In-memory dataset plus the raster geometry it was rendered with.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub m: usize,
    pub extent: f64,
    pub records: Vec<DatasetRecord>,
}

/// Environment-level split assignment, written alongside the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub m: usize,
    pub extent: f64,
    pub splits: Splits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

/// The rectangle adjoining the wall's left and bottom edges: its top-right
/// corner is the wall's min corner and it extends 1 m toward -x and -y.
pub fn acceptance_region(cfg: &EnvConfig) -> Rect {
    let corner = cfg.wall().min();
    Rect { center: corner - vec2(0.5, 0.5), half_extents: vec2(0.5, 0.5) }
}

/// Draw one environment. Rejects draws whose initial layout overlaps the wall
/// or whose probe episode touches it, resampling up to [`MAX_SAMPLE_TRIES`].
pub fn sample_environment(
    rng_seed: u64,
    ranges: &SampleRanges,
    params: &SimParams,
) -> Result<EnvConfig, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_SAMPLE_TRIES {
        let cfg = draw_environment(&mut rng, ranges, rng_seed);
        if sim::init_environment(&cfg).is_err() {
            continue;
        }
        match run_sysid(&cfg, params, &RasterSpec::default()) {
            Ok(_) => return Ok(cfg),
            Err(DataError::ProbeContact) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(DataError::UnsatisfiableEnvironment(MAX_SAMPLE_TRIES))
}

fn draw_environment(rng: &mut ChaCha8Rng, ranges: &SampleRanges, seed: u64) -> EnvConfig {
    let mut u = |r: [f64; 2]| rng.gen_range(r[0]..r[1]);
    let mu = u(ranges.mu);
    let rope_length = u(ranges.rope_length);
    let rope_mass = u(ranges.rope_mass);
    let rope_radius = u(ranges.rope_radius);
    let payload_mass = u(ranges.payload_mass);
    let payload_half_extent = u(ranges.payload_half_extent);
    let wall_half_extents = vec2(u(ranges.wall_half_x), u(ranges.wall_half_y));
    let radius = u(ranges.wall_radius);
    let bearing = u(ranges.wall_bearing_deg).to_radians();
    let wall_center = Vec2::from_angle(bearing) * radius;

    let mut cfg = EnvConfig {
        mu,
        rope_length,
        rope_mass,
        rope_radius,
        rope_particles: ranges.rope_particles,
        payload_mass,
        payload_half_extent,
        payload_height: ranges.payload_height,
        wall_center,
        wall_half_extents,
        wall_height: ranges.wall_height,
        goal: Vec2::ZERO,
        arm_length: ranges.arm_length,
        seed,
    };
    let region = acceptance_region(&cfg);
    cfg.goal = vec2(
        rng.gen_range(region.min().x..region.max().x),
        rng.gen_range(region.min().y..region.max().y),
    );
    cfg
}

/// Execute the fixed probe, record the payload trajectory map, and capture
/// the settled rest state. Any wall contact aborts with `ProbeContact`.
pub fn run_sysid(
    cfg: &EnvConfig,
    params: &SimParams,
    spec: &RasterSpec,
) -> Result<SysIDRecord, DataError> {
    let probe = probe_action();
    let (episode, rest_state) = sim::run_episode_full(cfg, &probe, params)?;
    if episode.invalid || rest_state.rope_wall_contact {
        return Err(DataError::ProbeContact);
    }
    let traj_map = percept::rasterize_trajectory(&episode.poi_trajectory, spec);
    Ok(SysIDRecord { probe_action: probe, traj_map, rest_state })
}

/// The descending velocity schedule: 6.28, then steps of U(0.1, 0.3) down,
/// stopping below the valid floor or after [`MAX_EPISODES`] values.
pub fn velocity_schedule(rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(MAX_EPISODES);
    let mut vel = VEL_RANGE.1;
    while out.len() < MAX_EPISODES && vel >= VEL_RANGE.0 {
        out.push(vel);
        vel -= rng.gen_range(0.1..0.3);
    }
    out
}

/// Run the sampling schedule against one environment.
///
/// Per episode: a wall collision discards the episode and continues; a final
/// position inside the acceptance region emits a record whose goal is that
/// achieved position (hindsight relabeling); a clean miss terminates the
/// environment. An empty result is legal.
pub fn collect_environment(
    cfg: &EnvConfig,
    sysid: &SysIDRecord,
    rng: &mut impl Rng,
    params: &SimParams,
    spec: &RasterSpec,
) -> Result<Vec<DatasetRecord>, DataError> {
    let region = acceptance_region(cfg);
    let mut records = Vec::new();
    for vel in velocity_schedule(rng) {
        let action = cast_profile(vel).expect("schedule stays in the valid range");
        let episode = sim::run_episode(cfg, &action, params)?;
        if episode.invalid {
            continue;
        }
        if !region.contains(episode.final_payload_pos) {
            break;
        }
        let hindsight = EnvConfig { goal: episode.final_payload_pos, ..cfg.clone() };
        let obs =
            percept::assemble_observation(&hindsight, sysid, spec, (CAST_Q_S, CAST_Q_G, CAST_ACC))?;
        let oracle_vel = eval::oracle_velocity(&hindsight, params)?;
        records.push(DatasetRecord {
            env_id: cfg.seed as u32,
            obs,
            label_vel: vel,
            oracle_vel,
            final_pos: episode.final_payload_pos,
            cfg_snapshot: hindsight,
        });
    }
    Ok(records)
}

/// Generate `n_envs` independent environments and collect their records.
/// Environment `i` derives its seed as `seed ^ i`, so workers are order-free;
/// records come out sorted by (env_id, episode index).
pub fn build_dataset(
    n_envs: usize,
    seed: u64,
    ranges: &SampleRanges,
    params: &SimParams,
    spec: &RasterSpec,
) -> Result<Dataset, DataError> {
    if n_envs < 10 {
        return Err(DataError::TooFewEnvironments(n_envs));
    }
    let mut per_env: Vec<(u32, Vec<DatasetRecord>)> = (0..n_envs as u64)
        .into_par_iter()
        .map(|env_id| {
            let env_seed = seed ^ env_id;
            let cfg = sample_environment(env_seed, ranges, params)?;
            let sysid = run_sysid(&cfg, params, spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(env_seed ^ SCHEDULE_SALT);
            let mut records = collect_environment(&cfg, &sysid, &mut rng, params, spec)?;
            for r in &mut records {
                r.env_id = env_id as u32;
                r.cfg_snapshot.seed = env_seed;
            }
            Ok((env_id as u32, records))
        })
        .collect::<Result<_, DataError>>()?;
    per_env.sort_by_key(|(id, _)| *id);
    let records = per_env.into_iter().flat_map(|(_, r)| r).collect();
    Ok(Dataset { m: spec.m, extent: spec.extent, records })
}

/// Partition the dataset's distinct environments into train/val/test by
/// shuffled env_id; no environment appears in two splits.
pub fn split_dataset(dataset: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<Manifest, DataError> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(DataError::BadRatios);
    }
    let mut env_ids: Vec<u32> = dataset.records.iter().map(|r| r.env_id).collect();
    env_ids.sort_unstable();
    env_ids.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    // Fisher-Yates; rand's shuffle would also work but this keeps the byte
    // stream identical across rand versions.
    for i in (1..env_ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        env_ids.swap(i, j);
    }

    let n = env_ids.len();
    let n_train = (n as f64 * a).floor() as usize;
    let n_val = (n as f64 * b).floor() as usize;
    let mut train: Vec<u32> = env_ids[..n_train].to_vec();
    let mut val: Vec<u32> = env_ids[n_train..n_train + n_val].to_vec();
    let mut test: Vec<u32> = env_ids[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Ok(Manifest {
        seed,
        m: dataset.m,
        extent: dataset.extent,
        splits: Splits { train, val, test },
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

impl Dataset {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let mut w = CrcWriter::new(BufWriter::new(File::create(path)?));
        w.write_bytes(&MAGIC)?;
        w.write_u32(VERSION)?;
        w.write_u32(self.m as u32)?;
        w.write_u32(CHANNELS)?;
        w.write_u32(self.records.len() as u32)?;
        w.write_f64(self.extent)?;
        for rec in &self.records {
            w.write_u32(rec.env_id)?;
            write_cfg(&mut w, &rec.cfg_snapshot)?;
            w.write_f64(rec.label_vel)?;
            w.write_f64(rec.oracle_vel)?;
            w.write_f64(rec.final_pos.x)?;
            w.write_f64(rec.final_pos.y)?;
            for ch in &rec.obs.channels {
                for &v in &ch.data {
                    w.write_f32(v)?;
                }
            }
        }
        w.finish()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Dataset, DataError> {
        let mut r = CrcReader::new(BufReader::new(File::open(path)?));
        r.expect_magic(&MAGIC)?;
        let version = r.read_u32()?;
        if version != VERSION {
            return Err(FormatError::Version { got: version, expected: VERSION }.into());
        }
        let m = r.read_u32()? as usize;
        let channels = r.read_u32()?;
        if channels != CHANNELS {
            return Err(FormatError::Malformed("unexpected channel count").into());
        }
        let count = r.read_u32()? as usize;
        let extent = r.read_f64()?;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let env_id = r.read_u32()?;
            let cfg_snapshot = read_cfg(&mut r)?;
            let label_vel = r.read_f64()?;
            let oracle_vel = r.read_f64()?;
            let final_pos = vec2(r.read_f64()?, r.read_f64()?);
            let mut flat = vec![0.0f32; CHANNELS as usize * m * m];
            for v in flat.iter_mut() {
                *v = r.read_f32()?;
            }
            let obs = ObservationStack::from_flat(m, &flat)?;
            records.push(DatasetRecord {
                env_id,
                obs,
                label_vel,
                oracle_vel,
                final_pos,
                cfg_snapshot,
            });
        }
        r.verify_crc()?;
        Ok(Dataset { m, extent, records })
    }
}

fn write_cfg<W: std::io::Write>(w: &mut CrcWriter<W>, cfg: &EnvConfig) -> Result<(), FormatError> {
    w.write_f64(cfg.mu)?;
    w.write_f64(cfg.rope_length)?;
    w.write_f64(cfg.rope_mass)?;
    w.write_f64(cfg.rope_radius)?;
    w.write_u32(cfg.rope_particles as u32)?;
    w.write_f64(cfg.payload_mass)?;
    w.write_f64(cfg.payload_half_extent)?;
    w.write_f64(cfg.payload_height)?;
    w.write_f64(cfg.wall_center.x)?;
    w.write_f64(cfg.wall_center.y)?;
    w.write_f64(cfg.wall_half_extents.x)?;
    w.write_f64(cfg.wall_half_extents.y)?;
    w.write_f64(cfg.wall_height)?;
    w.write_f64(cfg.goal.x)?;
    w.write_f64(cfg.goal.y)?;
    w.write_f64(cfg.arm_length)?;
    w.write_u64(cfg.seed)?;
    Ok(())
}

fn read_cfg<R: std::io::Read>(r: &mut CrcReader<R>) -> Result<EnvConfig, FormatError> {
    Ok(EnvConfig {
        mu: r.read_f64()?,
        rope_length: r.read_f64()?,
        rope_mass: r.read_f64()?,
        rope_radius: r.read_f64()?,
        rope_particles: r.read_u32()? as usize,
        payload_mass: r.read_f64()?,
        payload_half_extent: r.read_f64()?,
        payload_height: r.read_f64()?,
        wall_center: vec2(r.read_f64()?, r.read_f64()?),
        wall_half_extents: vec2(r.read_f64()?, r.read_f64()?),
        wall_height: r.read_f64()?,
        goal: vec2(r.read_f64()?, r.read_f64()?),
        arm_length: r.read_f64()?,
        seed: r.read_u64()?,
    })
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(FormatError::Io)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest, DataError> {
        let text = std::fs::read_to_string(path).map_err(FormatError::Io)?;
        serde_json::from_str(&text)
            .map_err(|_| FormatError::Malformed("manifest is not valid JSON").into())
    }
}

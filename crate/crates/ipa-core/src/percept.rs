//! Rasterize world state into the five-channel observation stack.
//!
//! All channels share one ego-centric, top-down raster geometry. Shape
//! footprints (wall, payload, rope discs, goal, agent) are stamped
//! conservatively: a pixel is painted when its cell overlaps the shape, so
//! thin walls and rope segments never vanish between pixel centers.

use crate::config::{EnvConfig, RasterSpec};
use crate::math::{vec2, Rect, Vec2};
use crate::sim::SimState;
use thiserror::Error;

/// Segmentation labels.
pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_ROPE: u8 = 1;
pub const LABEL_WALL: u8 = 2;
pub const LABEL_PAYLOAD: u8 = 3;
pub const LABEL_GOAL: u8 = 4;
pub const LABEL_AGENT: u8 = 5;

/// Goal marker disc radius, meters.
pub const GOAL_DISC_RADIUS: f64 = 0.1;
/// Agent marker disc radius at the origin, meters.
pub const AGENT_DISC_RADIUS: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptError {
    #[error("channel dimensions disagree: expected {expected} pixels, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("broadcast takes 1..=m values, got {0}")]
    BadBroadcastLen(usize),
}

/// A single m-by-m channel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub m: usize,
    pub data: Vec<f32>,
}

impl Channel {
    pub fn zeros(m: usize) -> Channel {
        Channel { m, data: vec![0.0; m * m] }
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.m + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.m + col] = v;
    }

    /// Number of nonzero pixels.
    pub fn popcount(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }
}

/// The five-channel network input: probe action broadcast, probe trajectory
/// map, depth, segmentation, and fixed one-shot action broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStack {
    pub m: usize,
    pub channels: [Channel; 5],
}

impl ObservationStack {
    pub fn as_flat(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(5 * self.m * self.m);
        for ch in &self.channels {
            out.extend_from_slice(&ch.data);
        }
        out
    }

    pub fn from_flat(m: usize, data: &[f32]) -> Result<ObservationStack, PerceptError> {
        if data.len() != 5 * m * m {
            return Err(PerceptError::DimensionMismatch { expected: 5 * m * m, got: data.len() });
        }
        let ch = |k: usize| Channel { m, data: data[k * m * m..(k + 1) * m * m].to_vec() };
        Ok(ObservationStack { m, channels: [ch(0), ch(1), ch(2), ch(3), ch(4)] })
    }
}

impl RasterSpec {
    /// Pixel (row, col) containing a world point, clamped to the window.
    pub fn pixel_of(&self, p: Vec2) -> (usize, usize) {
        let m = self.m as f64;
        let col = ((p.x + self.extent) / (2.0 * self.extent) * m).floor();
        let row = ((self.extent - p.y) / (2.0 * self.extent) * m).floor();
        let clamp = |v: f64| (v.max(0.0) as usize).min(self.m - 1);
        (clamp(row), clamp(col))
    }

    /// World-space center of a pixel cell.
    pub fn pixel_center(&self, row: usize, col: usize) -> Vec2 {
        let px = 2.0 * self.extent / self.m as f64;
        vec2(-self.extent + (col as f64 + 0.5) * px, self.extent - (row as f64 + 0.5) * px)
    }

    /// World-space cell rectangle of a pixel.
    pub fn pixel_cell(&self, row: usize, col: usize) -> Rect {
        let px = 2.0 * self.extent / self.m as f64;
        Rect { center: self.pixel_center(row, col), half_extents: vec2(px / 2.0, px / 2.0) }
    }
}

/// Visit pixels whose cells overlap an axis-aligned rectangle.
fn stamp_rect(spec: &RasterSpec, rect: &Rect, mut paint: impl FnMut(usize, usize)) {
    let (r_lo, c_lo) = spec.pixel_of(vec2(rect.min().x, rect.max().y));
    let (r_hi, c_hi) = spec.pixel_of(vec2(rect.max().x, rect.min().y));
    for row in r_lo..=r_hi {
        for col in c_lo..=c_hi {
            let cell = spec.pixel_cell(row, col);
            let overlap_x = (cell.max().x.min(rect.max().x)) - (cell.min().x.max(rect.min().x));
            let overlap_y = (cell.max().y.min(rect.max().y)) - (cell.min().y.max(rect.min().y));
            if overlap_x >= 0.0 && overlap_y >= 0.0 {
                paint(row, col);
            }
        }
    }
}

/// Visit pixels whose cells overlap a disc.
fn stamp_disc(spec: &RasterSpec, center: Vec2, radius: f64, mut paint: impl FnMut(usize, usize)) {
    let bbox = Rect { center, half_extents: vec2(radius, radius) };
    let (r_lo, c_lo) = spec.pixel_of(vec2(bbox.min().x, bbox.max().y));
    let (r_hi, c_hi) = spec.pixel_of(vec2(bbox.max().x, bbox.min().y));
    for row in r_lo..=r_hi {
        for col in c_lo..=c_hi {
            let cell = spec.pixel_cell(row, col);
            if cell.distance(center) <= radius {
                paint(row, col);
            }
        }
    }
}

/// Rasterize a polyline of world points into a binary map using integer line
/// drawing between consecutive pixels; out-of-window points clamp to the
/// border.
pub fn rasterize_trajectory(traj: &[Vec2], spec: &RasterSpec) -> Channel {
    let mut map = Channel::zeros(spec.m);
    if traj.is_empty() {
        return map;
    }
    let mut prev = spec.pixel_of(traj[0]);
    map.set(prev.0, prev.1, 1.0);
    for p in &traj[1..] {
        let cur = spec.pixel_of(*p);
        draw_line(&mut map, prev, cur);
        prev = cur;
    }
    map
}

/// Bresenham line between two pixels, inclusive.
fn draw_line(map: &mut Channel, from: (usize, usize), to: (usize, usize)) {
    let (mut r0, mut c0) = (from.0 as i64, from.1 as i64);
    let (r1, c1) = (to.0 as i64, to.1 as i64);
    let dr = (r1 - r0).abs();
    let dc = (c1 - c0).abs();
    let sr = if r0 < r1 { 1 } else { -1 };
    let sc = if c0 < c1 { 1 } else { -1 };
    let mut err = dc - dr;
    loop {
        map.set(r0 as usize, c0 as usize, 1.0);
        if r0 == r1 && c0 == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 > -dr {
            err -= dr;
            c0 += sc;
        }
        if e2 < dc {
            err += dc;
            r0 += sr;
        }
    }
}

/// Top-down height field: ground 0, wall and payload at their heights, rope
/// particles as discs of height `2 * rope_radius`; overlaps take the maximum.
pub fn render_depth(cfg: &EnvConfig, state: &SimState, spec: &RasterSpec) -> Channel {
    let mut map = Channel::zeros(spec.m);
    let raise = |map: &mut Channel, row: usize, col: usize, h: f64| {
        let v = map.at(row, col);
        if (h as f32) > v {
            map.set(row, col, h as f32);
        }
    };

    stamp_rect(spec, &cfg.wall(), |r, c| raise(&mut map, r, c, cfg.wall_height));
    let payload_rect = Rect {
        center: state.payload_pos,
        half_extents: vec2(cfg.payload_half_extent, cfg.payload_half_extent),
    };
    stamp_rect(spec, &payload_rect, |r, c| raise(&mut map, r, c, cfg.payload_height));
    for q in &state.rope_pos {
        stamp_disc(spec, *q, cfg.rope_radius, |r, c| raise(&mut map, r, c, 2.0 * cfg.rope_radius));
    }
    map
}

/// Label map; paint order (later wins): wall, rope, payload, goal, agent.
pub fn render_segmentation(cfg: &EnvConfig, state: &SimState, spec: &RasterSpec) -> Channel {
    let mut map = Channel::zeros(spec.m);
    stamp_rect(spec, &cfg.wall(), |r, c| map.set(r, c, LABEL_WALL as f32));
    for q in &state.rope_pos {
        stamp_disc(spec, *q, cfg.rope_radius, |r, c| map.set(r, c, LABEL_ROPE as f32));
    }
    let payload_rect = Rect {
        center: state.payload_pos,
        half_extents: vec2(cfg.payload_half_extent, cfg.payload_half_extent),
    };
    stamp_rect(spec, &payload_rect, |r, c| map.set(r, c, LABEL_PAYLOAD as f32));
    stamp_disc(spec, cfg.goal, GOAL_DISC_RADIUS, |r, c| map.set(r, c, LABEL_GOAL as f32));
    stamp_disc(spec, Vec2::ZERO, AGENT_DISC_RADIUS, |r, c| map.set(r, c, LABEL_AGENT as f32));
    map
}

/// Build the full five-channel stack for one environment:
/// probe-parameter broadcast, probe trajectory map, depth and segmentation of
/// the post-probe rest state, and the fixed one-shot parameter broadcast.
pub fn assemble_observation(
    cfg: &EnvConfig,
    sysid: &crate::datagen::SysIDRecord,
    spec: &RasterSpec,
    fixed_action: (f64, f64, f64),
) -> Result<ObservationStack, PerceptError> {
    if sysid.traj_map.m != spec.m {
        return Err(PerceptError::DimensionMismatch {
            expected: spec.m * spec.m,
            got: sysid.traj_map.m * sysid.traj_map.m,
        });
    }
    let probe = &sysid.probe_action;
    let ch0 = broadcast_params(&[probe.q_s, probe.q_g, probe.vel, probe.acc], spec)?;
    let ch1 = sysid.traj_map.clone();
    let ch2 = render_depth(cfg, &sysid.rest_state, spec);
    let ch3 = render_segmentation(cfg, &sysid.rest_state, spec);
    let (q_s, q_g, acc) = fixed_action;
    let ch4 = broadcast_params(&[q_s, q_g, acc], spec)?;
    Ok(ObservationStack { m: spec.m, channels: [ch0, ch1, ch2, ch3, ch4] })
}

/// Fill the channel with `values` as equal horizontal bands, top to bottom;
/// remainder rows go to the last band.
pub fn broadcast_params(values: &[f64], spec: &RasterSpec) -> Result<Channel, PerceptError> {
    if values.is_empty() || values.len() > spec.m {
        return Err(PerceptError::BadBroadcastLen(values.len()));
    }
    let mut map = Channel::zeros(spec.m);
    let band = spec.m / values.len();
    for row in 0..spec.m {
        let k = (row / band).min(values.len() - 1);
        for col in 0..spec.m {
            map.set(row, col, values[k] as f32);
        }
    }
    Ok(map)
}

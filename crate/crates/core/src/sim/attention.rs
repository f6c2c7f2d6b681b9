use serde::{Deserialize, Serialize};

use super::world::{World, WorldState};
use crate::costmap::{
    normalize, AttentionMap, CameraModel, CostmapIndex, GroundGrid, MapFrame, MapRole,
};

pub const BLOB_SIGMA_M: f64 = 0.4;
/// Blobs are cut off beyond this many sigmas so far objects add exactly 0.
const BLOB_CUTOFF_SIGMAS: f64 = 3.0;
pub const EXTRAPOLATION_HORIZON_S: f64 = 3.0;
pub const EXTRAPOLATION_STEP_S: f64 = 0.25;
const EXTRAPOLATION_END_PEAK: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    /// Blobs at current obstacle and pedestrian positions.
    PretrainedLike,
    /// Additionally paints each pedestrian's constant-velocity future.
    GroundTruthSocial,
}

impl SynthMode {
    pub fn role(self) -> MapRole {
        match self {
            SynthMode::PretrainedLike => MapRole::Pretrained,
            SynthMode::GroundTruthSocial => MapRole::Synthetic,
        }
    }
}

fn blob(d: f64, peak: f64) -> f64 {
    if d > BLOB_CUTOFF_SIGMAS * BLOB_SIGMA_M {
        0.0
    } else {
        peak * (-d * d / (2.0 * BLOB_SIGMA_M * BLOB_SIGMA_M)).exp()
    }
}

/// Raw (unnormalized) attention at a world ground point.
pub fn raw_attention_at(world: &World, state: &WorldState, mode: SynthMode, x: f64, y: f64) -> f64 {
    let mut v: f64 = 0.0;
    for o in &world.scenario.obstacles {
        v = v.max(blob(o.distance(x, y), 1.0));
    }
    for p in &state.pedestrians {
        v = v.max(blob((x - p.x).hypot(y - p.y), 1.0));
        if mode == SynthMode::GroundTruthSocial {
            let steps = (EXTRAPOLATION_HORIZON_S / EXTRAPOLATION_STEP_S).round() as usize;
            for k in 1..=steps {
                let t = k as f64 * EXTRAPOLATION_STEP_S;
                let peak = 1.0 - (1.0 - EXTRAPOLATION_END_PEAK) * t / EXTRAPOLATION_HORIZON_S;
                let (ex, ey) = p.extrapolate(t);
                v = v.max(blob((x - ex).hypot(y - ey), peak));
            }
        }
    }
    v
}

fn synth_with(
    world: &World,
    state: &WorldState,
    mode: SynthMode,
    width: usize,
    height: usize,
    frame: MapFrame,
    cell_ground: impl Fn(CostmapIndex) -> Option<(f64, f64)>,
) -> AttentionMap {
    let mut raw = vec![0.0; width * height];
    for i in 0..height {
        for j in 0..width {
            if let Some((lx, ly)) = cell_ground(CostmapIndex::new(i, j)) {
                let (wx, wy) = state.robot.to_world(lx, ly);
                raw[i * width + j] = raw_attention_at(world, state, mode, wx, wy);
            }
        }
    }
    normalize(width, height, &raw, mode.role(), frame).expect("finite raw attention")
}

/// Image-space synthetic attention: each cell's centre pixel is cast to the
/// ground and scored; cells above the horizon stay 0. Min-max normalized.
pub fn synth_attention(
    world: &World,
    state: &WorldState,
    cam: &CameraModel,
    mode: SynthMode,
    width: usize,
    height: usize,
) -> AttentionMap {
    synth_with(world, state, mode, width, height, MapFrame::Image, |cell| {
        cam.unproject_to_ground(cam.cell_center(cell, width, height))
    })
}

/// Robot-centric ground-frame variant of [`synth_attention`].
pub fn synth_attention_ground(
    world: &World,
    state: &WorldState,
    grid: &GroundGrid,
    mode: SynthMode,
    width: usize,
    height: usize,
) -> AttentionMap {
    synth_with(
        world,
        state,
        mode,
        width,
        height,
        MapFrame::Ground,
        |cell| Some(grid.cell_center(cell)),
    )
}

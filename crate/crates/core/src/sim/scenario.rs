use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::kinematics::Pose2;
use crate::occupancy::{point_rect_distance, point_segment_distance, OccupancyGrid};

fn default_height() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    /// True when a disc lies entirely inside the bounds.
    pub fn contains_disc(&self, x: f64, y: f64, r: f64) -> bool {
        x - r >= self.min_x && x + r <= self.max_x && y - r >= self.min_y && y + r <= self.max_y
    }
}

/// Static obstacle footprint. `lidar_visible = false` marks geometry the
/// camera sees but the occupancy grid does not (e.g. a low curb).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    Box {
        min: [f64; 2],
        max: [f64; 2],
        #[serde(default = "default_height")]
        height: f64,
        #[serde(default = "default_true")]
        lidar_visible: bool,
    },
    Segment {
        a: [f64; 2],
        b: [f64; 2],
        thickness: f64,
        #[serde(default = "default_height")]
        height: f64,
        #[serde(default = "default_true")]
        lidar_visible: bool,
    },
}

impl Obstacle {
    pub fn lidar_visible(&self) -> bool {
        match self {
            Obstacle::Box { lidar_visible, .. } | Obstacle::Segment { lidar_visible, .. } => {
                *lidar_visible
            }
        }
    }

    pub fn height(&self) -> f64 {
        match self {
            Obstacle::Box { height, .. } | Obstacle::Segment { height, .. } => *height,
        }
    }

    /// Distance from a ground point to the footprint; 0 inside.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self {
            Obstacle::Box { min, max, .. } => {
                point_rect_distance(x, y, min[0], min[1], max[0], max[1])
            }
            Obstacle::Segment {
                a, b, thickness, ..
            } => (point_segment_distance(x, y, (a[0], a[1]), (b[0], b[1])) - thickness / 2.0)
                .max(0.0),
        }
    }

    pub fn rasterize(&self, grid: &mut OccupancyGrid) {
        match self {
            Obstacle::Box { min, max, .. } => grid.fill_box(min[0], min[1], max[0], max[1]),
            Obstacle::Segment {
                a, b, thickness, ..
            } => grid.fill_segment((a[0], a[1]), (b[0], b[1]), thickness / 2.0),
        }
    }

    /// Footprint as an oriented rectangle: center, unit axis, half extents.
    pub(crate) fn oriented_box(&self) -> ([f64; 2], [f64; 2], [f64; 2]) {
        match self {
            Obstacle::Box { min, max, .. } => (
                [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0],
                [1.0, 0.0],
                [(max[0] - min[0]) / 2.0, (max[1] - min[1]) / 2.0],
            ),
            Obstacle::Segment {
                a, b, thickness, ..
            } => {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len = dx.hypot(dy);
                let axis = if len > 0.0 {
                    [dx / len, dy / len]
                } else {
                    [1.0, 0.0]
                };
                (
                    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0],
                    axis,
                    [len / 2.0 + thickness / 2.0, thickness / 2.0],
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpec {
    pub start: [f64; 2],
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    #[serde(default)]
    pub start_delay: f64,
}

/// Per-seed randomization ranges applied by [`ScenarioSpec::instantiate`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Jitter {
    /// Uniform shift of each pedestrian path, meters (per axis, +/-).
    pub position: f64,
    /// Relative speed change (+/-).
    pub speed: f64,
    /// Extra start delay drawn from `[0, delay]`, seconds.
    pub delay: f64,
}

/// Brightness/contrast transform applied to rendered frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lighting {
    pub brightness: f64,
    pub contrast: f64,
}

impl Default for Lighting {
    fn default() -> Self {
        Self {
            brightness: 1.0,
            contrast: 1.0,
        }
    }
}

impl Lighting {
    pub fn is_nominal(&self) -> bool {
        self.brightness == 1.0 && self.contrast == 1.0
    }

    pub fn apply(&self, c: u8) -> u8 {
        let x = ((c as f64 / 255.0 - 0.5) * self.contrast + 0.5) * self.brightness;
        (x.clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    #[default]
    Outdoor,
    Indoor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub setting: Setting,
    pub bounds: Bounds,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianSpec>,
    pub robot_start: Pose2,
    pub goal: [f64; 2],
    pub time_limit: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jitter: Jitter,
    #[serde(default)]
    pub lighting: Lighting,
    /// Std-dev of noise the mock annotation oracle adds in this scenario.
    #[serde(default)]
    pub oracle_noise: f64,
}

const BUNDLED: [(&str, &str); 4] = [
    ("scen1", include_str!("../../scenarios/scen1.json")),
    ("scen2", include_str!("../../scenarios/scen2.json")),
    ("scen3", include_str!("../../scenarios/scen3.json")),
    ("scen4", include_str!("../../scenarios/scen4.json")),
];

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    /// One of the scenarios shipped with the crate (`scen1` .. `scen4`).
    pub fn bundled(id: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(name, _)| *name == id)
            .map(|(_, text)| Self::from_json(text).expect("bundled scenario parses"))
    }

    pub fn bundled_ids() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(name, _)| *name)
    }

    /// Checks speeds, time limit and that start and goal are free for a
    /// robot of the given radius.
    pub fn validate(&self, robot_radius: f64) -> Result<()> {
        let bad = |m: String| Err(SimError::Scenario(m));
        let b = &self.bounds;
        if !(b.max_x > b.min_x && b.max_y > b.min_y) {
            return bad("bounds are empty".into());
        }
        if !(self.time_limit > 0.0) {
            return bad("time limit must be positive".into());
        }
        for (k, p) in self.pedestrians.iter().enumerate() {
            if !(p.speed >= 0.0) || !(p.start_delay >= 0.0) {
                return bad(format!("pedestrian {k} has negative speed or delay"));
            }
        }
        let s = &self.robot_start;
        for (name, x, y) in [
            ("robot start", s.x, s.y),
            ("goal", self.goal[0], self.goal[1]),
        ] {
            if !b.contains_disc(x, y, robot_radius) {
                return bad(format!("{name} is outside the bounds"));
            }
            if self
                .obstacles
                .iter()
                .any(|o| o.distance(x, y) < robot_radius)
            {
                return bad(format!("{name} overlaps an obstacle"));
            }
        }
        Ok(())
    }

    /// Applies the seeded jitter. Draws happen in pedestrian order with a
    /// fixed number of draws each, so the result depends only on the seed.
    pub fn instantiate(&self, seed: u64) -> ScenarioSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.seed = seed;
        let j = self.jitter;
        for p in &mut out.pedestrians {
            let dx = (rng.random::<f64>() * 2.0 - 1.0) * j.position;
            let dy = (rng.random::<f64>() * 2.0 - 1.0) * j.position;
            let ds = (rng.random::<f64>() * 2.0 - 1.0) * j.speed;
            let dd = rng.random::<f64>() * j.delay;
            p.start = [p.start[0] + dx, p.start[1] + dy];
            for w in &mut p.waypoints {
                *w = [w[0] + dx, w[1] + dy];
            }
            p.speed = (p.speed * (1.0 + ds)).max(0.0);
            p.start_delay += dd;
        }
        out
    }

    /// Occupancy of the lidar-visible static obstacles over the bounds.
    pub fn static_occupancy(&self, resolution: f64) -> OccupancyGrid {
        let b = &self.bounds;
        let mut grid = OccupancyGrid::covering(b.min_x, b.min_y, b.max_x, b.max_y, resolution);
        for o in self.obstacles.iter().filter(|o| o.lidar_visible()) {
            o.rasterize(&mut grid);
        }
        grid
    }
}

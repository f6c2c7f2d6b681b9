use super::world::{World, WorldState};
use super::PEDESTRIAN_RADIUS;
use crate::costmap::CameraModel;
use crate::frame::ImageFrame;

const SKY_TOP: [f64; 3] = [105.0, 155.0, 225.0];
const SKY_HORIZON: [f64; 3] = [200.0, 220.0, 245.0];
const GROUND_NEAR: [f64; 3] = [100.0, 112.0, 92.0];
const GROUND_FAR: [f64; 3] = [165.0, 170.0, 155.0];
const GROUND_FADE_M: f64 = 15.0;
const PEDESTRIAN_COLORS: [[u8; 3]; 4] =
    [[220, 40, 40], [230, 120, 20], [200, 40, 160], [40, 90, 220]];

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [0, 1, 2].map(|k| (a[k] + (b[k] - a[k]) * t).round() as u8)
}

fn obstacle_color(height: f64, face: usize) -> [u8; 3] {
    let base: [f64; 3] = if height < 0.3 {
        [205.0, 195.0, 150.0]
    } else if height < 1.2 {
        [150.0, 108.0, 70.0]
    } else {
        [85.0, 88.0, 100.0]
    };
    let shade = [0.85, 1.0, 1.15][face];
    base.map(|c| (c * shade).clamp(0.0, 255.0).round() as u8)
}

/// Ray/slab intersection against an oriented box standing on the ground.
/// Returns the entry parameter and the slab index of the entry face.
fn ray_box(
    origin: [f64; 3],
    dir: [f64; 3],
    center: [f64; 2],
    axis: [f64; 2],
    half: [f64; 2],
    height: f64,
) -> Option<(f64, usize)> {
    let (ox, oy) = (origin[0] - center[0], origin[1] - center[1]);
    let o = [
        ox * axis[0] + oy * axis[1],
        -ox * axis[1] + oy * axis[0],
        origin[2],
    ];
    let d = [
        dir[0] * axis[0] + dir[1] * axis[1],
        -dir[0] * axis[1] + dir[1] * axis[0],
        dir[2],
    ];
    let lo = [-half[0], -half[1], 0.0];
    let hi = [half[0], half[1], height];
    let (mut t0, mut t1, mut face) = (0.0f64, f64::INFINITY, 0usize);
    for k in 0..3 {
        if d[k].abs() < 1e-12 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]);
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        if near > t0 {
            t0 = near;
            face = k;
        }
        t1 = t1.min(far);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some((t0, face))
}

/// Flat-shaded view from the robot camera: sky/ground gradient, obstacle
/// volumes by ray casting, pedestrians as depth-tested disc billboards
/// centred on their projected ground point. Lighting is applied last.
pub fn render_frame(world: &World, state: &WorldState, cam: &CameraModel) -> ImageFrame {
    let (w, h) = (cam.image_width, cam.image_height);
    let pose = state.robot;
    let (s, c) = pose.theta.sin_cos();
    let (sp, cp) = cam.pitch_rad.sin_cos();
    let origin = [pose.x, pose.y, cam.height_m];
    let horizon_v = cam.principal_v - cam.focal_px * cam.pitch_rad.tan();
    let boxes: Vec<_> = world
        .scenario
        .obstacles
        .iter()
        .map(|o| {
            let (center, axis, half) = o.oriented_box();
            (center, axis, half, o.height())
        })
        .collect();

    let mut rgb = Vec::with_capacity((w * h * 3) as usize);
    let mut depth = vec![f64::INFINITY; (w * h) as usize];
    for r in 0..h {
        let yn = (r as f64 + 0.5 - cam.principal_v) / cam.focal_px;
        for u in 0..w {
            let xn = (u as f64 + 0.5 - cam.principal_u) / cam.focal_px;
            let (lx, ly, lz) = (cp - yn * sp, -xn, -sp - yn * cp);
            let dir = [c * lx - s * ly, s * lx + c * ly, lz];
            let ground_t = if lz < 0.0 {
                cam.height_m / -lz
            } else {
                f64::INFINITY
            };
            let mut color = if lz < 0.0 {
                lerp(GROUND_NEAR, GROUND_FAR, ground_t / GROUND_FADE_M)
            } else {
                lerp(SKY_TOP, SKY_HORIZON, (r as f64 + 0.5) / horizon_v.max(1.0))
            };
            // only obstacle hits occlude billboards; the ground never does
            let mut best = ground_t;
            let mut hit = f64::INFINITY;
            for &(center, axis, half, height) in &boxes {
                if let Some((t, face)) = ray_box(origin, dir, center, axis, half, height) {
                    if t < best {
                        best = t;
                        hit = t * (cp * lx + sp * -lz);
                        color = obstacle_color(height, face);
                    }
                }
            }
            depth[(r * w + u) as usize] = hit;
            rgb.extend_from_slice(&color);
        }
    }

    let mut peds: Vec<(f64, usize)> = state
        .pedestrians
        .iter()
        .enumerate()
        .filter_map(|(k, p)| {
            let (x, _) = pose.to_local(p.x, p.y);
            let d = x * cp + cam.height_m * sp;
            (d > 1e-6).then_some((d, k))
        })
        .collect();
    peds.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (d, k) in peds {
        let p = &state.pedestrians[k];
        let (lx, ly) = pose.to_local(p.x, p.y);
        let Some(center) = cam.project_ground_unclipped(lx, ly) else {
            continue;
        };
        let radius = cam.focal_px * PEDESTRIAN_RADIUS / d;
        let color = PEDESTRIAN_COLORS[k % PEDESTRIAN_COLORS.len()];
        let c0 = (center.u - radius).floor().max(0.0) as i64;
        let c1 = ((center.u + radius).ceil() as i64).min(w as i64 - 1);
        let r0 = (center.v - radius).floor().max(0.0) as i64;
        let r1 = ((center.v + radius).ceil() as i64).min(h as i64 - 1);
        for r in r0..=r1 {
            for u in c0..=c1 {
                let (du, dv) = (u as f64 + 0.5 - center.u, r as f64 + 0.5 - center.v);
                let idx = (r as u32 * w + u as u32) as usize;
                if du * du + dv * dv <= radius * radius && d < depth[idx] {
                    depth[idx] = d;
                    rgb[idx * 3..idx * 3 + 3].copy_from_slice(&color);
                }
            }
        }
    }

    let lighting = world.scenario.lighting;
    if !lighting.is_nominal() {
        rgb.iter_mut().for_each(|v| *v = lighting.apply(*v));
    }
    ImageFrame::new(w, h, rgb, state.time, state.tick).expect("buffer matches frame size")
}

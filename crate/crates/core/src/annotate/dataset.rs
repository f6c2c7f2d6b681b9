use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    likelihood_to_map, mark_frontiers, AnnotateError, AnnotationOracle, AnnotationRequest,
    FrontierAnnotation, PromptTemplate, Result, SceneTruth,
};
use crate::costmap::{decode_grid, encode_grid, AttentionMap, MapRole};
use crate::distill::{ImageSequence, ModelConfig, TrainingSample};
use crate::frame::ImageFrame;
use crate::sim::{
    render_frame, synth_attention, Episode, EpisodeConfig, Policy, ScenarioSpec, SynthMode, World,
    WorldState,
};

pub const INDEX_FILE: &str = "index.json";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Prior frames per record (`n`).
    pub history: usize,
    /// Records to write (`m`).
    pub count: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    /// First replay seed; clip `c` uses `seed + c`.
    pub seed: u64,
    /// Upper bound on replayed episodes when gathering frames.
    pub max_clips: usize,
    pub episode: EpisodeConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            history: 2,
            count: 10,
            grid_width: 32,
            grid_height: 24,
            seed: 0,
            max_clips: 64,
            episode: EpisodeConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DatasetSource {
    /// Episodes replayed with the planner on synthetic social attention.
    Scenario(ScenarioSpec),
    /// PNG frames in name order; `<stem>.agrid` beside a frame is taken as its
    /// pretrained map.
    ImageDir(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: String,
    pub frame: String,
    /// Oldest first.
    pub history: Vec<String>,
    pub map: String,
    pub pretrained: Option<String>,
    pub annotation: FrontierAnnotation,
    /// SHA-256 over the record's file contents and annotation.
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    pub oracle: String,
    pub source: String,
    pub history: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub frame_width: u32,
    pub frame_height: u32,
    pub seed: u64,
    pub records: Vec<IndexRecord>,
}

/// One selected frame with its history and, for replays, scene truth.
struct Slot {
    id: String,
    frame: ImageFrame,
    history: Vec<(String, ImageFrame)>,
    scene: Option<SceneTruth>,
    pretrained: Option<AttentionMap>,
}

fn frame_id(clip: usize, tick: usize) -> String {
    format!("c{clip:03}_t{tick:05}")
}

/// Indexes `count` positions evenly spread over `total`.
fn spread(total: usize, count: usize) -> Vec<usize> {
    (0..count).map(|j| j * total / count).collect()
}

fn replay_slots(spec: &ScenarioSpec, cfg: &DatasetConfig) -> Result<Vec<Slot>> {
    let ep_cfg = cfg.episode;
    let mut clips: Vec<(World, Vec<WorldState>)> = Vec::new();
    let mut eligible: Vec<(usize, usize)> = Vec::new();
    for c in 0..cfg.max_clips {
        if eligible.len() >= cfg.count {
            break;
        }
        let world = World::new(
            spec.instantiate(cfg.seed + c as u64),
            ep_cfg.planner.robot_radius,
            ep_cfg.planner.goal_tolerance,
        )?;
        let mut ep = Episode::new(
            world.clone(),
            Policy::PlannerWithMap(SynthMode::GroundTruthSocial),
            ep_cfg,
        )?;
        let mut states = vec![ep.state().clone()];
        while !ep.is_done() {
            states.push(ep.tick(None)?.state);
        }
        eligible.extend((cfg.history..states.len()).map(|t| (c, t)));
        clips.push((world, states));
    }
    if eligible.len() < cfg.count {
        return Err(AnnotateError::Source(format!(
            "replays yielded {} frames with {} history, need {}",
            eligible.len(),
            cfg.history,
            cfg.count
        )));
    }
    let cam = ep_cfg.camera;
    Ok(spread(eligible.len(), cfg.count)
        .into_iter()
        .map(|k| {
            let (c, t) = eligible[k];
            let (world, states) = &clips[c];
            let history = (t - cfg.history..t)
                .map(|h| (frame_id(c, h), render_frame(world, &states[h], &cam)))
                .collect();
            Slot {
                id: frame_id(c, t),
                frame: render_frame(world, &states[t], &cam),
                history,
                scene: Some(SceneTruth::from_state(&states[t])),
                pretrained: Some(
                    synth_attention(
                        world,
                        &states[t],
                        &cam,
                        SynthMode::PretrainedLike,
                        cfg.grid_width,
                        cfg.grid_height,
                    )
                    .with_role(MapRole::Pretrained),
                ),
            }
        })
        .collect())
}

fn dir_slots(dir: &Path, cfg: &DatasetConfig) -> Result<Vec<Slot>> {
    let mut pngs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    pngs.sort();
    let eligible = pngs.len().saturating_sub(cfg.history);
    if eligible < cfg.count {
        return Err(AnnotateError::Source(format!(
            "{} holds {} frames, need {} with {} history",
            dir.display(),
            pngs.len(),
            cfg.count,
            cfg.history
        )));
    }
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let load = |i: usize| ImageFrame::load_png(&pngs[i], 0.0, i as u64);
    spread(eligible, cfg.count)
        .into_iter()
        .map(|k| {
            let t = k + cfg.history;
            let side = pngs[t].with_extension("agrid");
            Ok(Slot {
                id: stem(&pngs[t]),
                frame: load(t)?,
                history: (k..t)
                    .map(|h| Ok((stem(&pngs[h]), load(h)?)))
                    .collect::<Result<_>>()?,
                scene: None,
                pretrained: if side.exists() {
                    Some(decode_grid(&fs::read(side)?)?)
                } else {
                    None
                },
            })
        })
        .collect()
}

fn write_once(path: &Path, bytes: &[u8]) -> Result<()> {
    if !path.exists() {
        fs::write(path, bytes)?;
    }
    Ok(())
}

fn record_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Annotates `cfg.count` frames and writes `index.json`, `frames/*.png`,
/// `maps/*.agrid` and `pretrained/*.agrid` under `out`.
pub fn build_dataset(
    source: &DatasetSource,
    oracle: &mut dyn AnnotationOracle,
    template: &PromptTemplate,
    cfg: &DatasetConfig,
    out: &Path,
) -> Result<DatasetIndex> {
    if cfg.count == 0 {
        return Err(AnnotateError::Validation(
            "dataset count must be at least 1".into(),
        ));
    }
    template.validate()?;
    let (slots, source_name) = match source {
        DatasetSource::Scenario(spec) => {
            (replay_slots(spec, cfg)?, format!("scenario:{}", spec.id))
        }
        DatasetSource::ImageDir(dir) => (dir_slots(dir, cfg)?, format!("dir:{}", dir.display())),
    };
    for sub in ["frames", "maps", "pretrained"] {
        fs::create_dir_all(out.join(sub))?;
    }
    let mut records = Vec::with_capacity(slots.len());
    for slot in &slots {
        let (marked, _) = mark_frontiers(&slot.frame)?;
        let annotation = oracle.annotate(&AnnotationRequest {
            frame: &marked,
            template,
            scene: slot.scene.as_ref(),
        })?;
        let map = likelihood_to_map(&annotation, cfg.grid_width, cfg.grid_height)?;

        let frame_rel = format!("frames/{}.png", slot.id);
        let frame_png = slot.frame.encode_png()?;
        write_once(&out.join(&frame_rel), &frame_png)?;
        let mut parts: Vec<Vec<u8>> = vec![frame_png];
        let mut history = Vec::with_capacity(slot.history.len());
        for (id, f) in &slot.history {
            let rel = format!("frames/{id}.png");
            let png = f.encode_png()?;
            write_once(&out.join(&rel), &png)?;
            parts.push(png);
            history.push(rel);
        }
        let map_rel = format!("maps/{}.agrid", slot.id);
        let map_bytes = encode_grid(&map);
        fs::write(out.join(&map_rel), &map_bytes)?;
        parts.push(map_bytes);
        let pretrained = match &slot.pretrained {
            Some(p) => {
                let rel = format!("pretrained/{}.agrid", slot.id);
                let bytes = encode_grid(p);
                fs::write(out.join(&rel), &bytes)?;
                parts.push(bytes);
                Some(rel)
            }
            None => None,
        };
        parts.push(serde_json::to_vec(&annotation)?);
        let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
        records.push(IndexRecord {
            id: slot.id.clone(),
            frame: frame_rel,
            history,
            map: map_rel,
            pretrained,
            annotation,
            hash: record_hash(&refs),
        });
    }
    let index = DatasetIndex {
        version: INDEX_VERSION,
        oracle: oracle.kind().into(),
        source: source_name,
        history: cfg.history,
        grid_width: cfg.grid_width,
        grid_height: cfg.grid_height,
        frame_width: slots[0].frame.width,
        frame_height: slots[0].frame.height,
        seed: cfg.seed,
        records,
    };
    fs::write(out.join(INDEX_FILE), serde_json::to_string_pretty(&index)?)?;
    Ok(index)
}

pub fn load_index(dir: &Path) -> Result<DatasetIndex> {
    Ok(serde_json::from_str(&fs::read_to_string(
        dir.join(INDEX_FILE),
    )?)?)
}

fn check_map(map: &AttentionMap, index: &DatasetIndex, what: &str, id: &str) -> Result<()> {
    if map.width() != index.grid_width || map.height() != index.grid_height {
        return Err(AnnotateError::Dataset(format!(
            "record {id}: {what} is {}x{}, index says {}x{}",
            map.width(),
            map.height(),
            index.grid_width,
            index.grid_height
        )));
    }
    Ok(())
}

/// Re-reads every file, checking history length, map sizes and hashes.
pub fn validate_dataset(dir: &Path) -> Result<DatasetIndex> {
    let index = load_index(dir)?;
    if index.version != INDEX_VERSION {
        return Err(AnnotateError::Dataset(format!(
            "unsupported index version {}",
            index.version
        )));
    }
    for r in &index.records {
        if r.history.len() != index.history {
            return Err(AnnotateError::Dataset(format!(
                "record {}: history of {} frames, index says {}",
                r.id,
                r.history.len(),
                index.history
            )));
        }
        r.annotation.validate()?;
        let mut parts = vec![fs::read(dir.join(&r.frame))?];
        for h in &r.history {
            parts.push(fs::read(dir.join(h))?);
        }
        let map_bytes = fs::read(dir.join(&r.map))?;
        let map = decode_grid(&map_bytes)?;
        check_map(&map, &index, "supervision map", &r.id)?;
        if map.role() != MapRole::Vlm {
            return Err(AnnotateError::Dataset(format!(
                "record {}: supervision map role is {:?}",
                r.id,
                map.role()
            )));
        }
        parts.push(map_bytes);
        if let Some(p) = &r.pretrained {
            let bytes = fs::read(dir.join(p))?;
            check_map(&decode_grid(&bytes)?, &index, "pretrained map", &r.id)?;
            parts.push(bytes);
        }
        parts.push(serde_json::to_vec(&r.annotation)?);
        let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
        if record_hash(&refs) != r.hash {
            return Err(AnnotateError::Dataset(format!(
                "record {}: content hash mismatch",
                r.id
            )));
        }
    }
    Ok(index)
}

/// Distillation samples for a dataset whose history and grid match `model`.
pub fn load_training_samples(dir: &Path, model: &ModelConfig) -> Result<Vec<TrainingSample>> {
    let index = load_index(dir)?;
    if index.history != model.history
        || index.grid_width != model.grid_width
        || index.grid_height != model.grid_height
    {
        return Err(AnnotateError::Dataset(format!(
            "dataset (history {}, grid {}x{}) does not fit model (history {}, grid {}x{})",
            index.history,
            index.grid_width,
            index.grid_height,
            model.history,
            model.grid_width,
            model.grid_height
        )));
    }
    index
        .records
        .iter()
        .map(|r| {
            let mut frames = Vec::with_capacity(r.history.len() + 1);
            for (i, rel) in r
                .history
                .iter()
                .chain(std::iter::once(&r.frame))
                .enumerate()
            {
                frames.push(ImageFrame::load_png(dir.join(rel), 0.0, i as u64)?);
            }
            let pretrained = r.pretrained.as_ref().ok_or_else(|| {
                AnnotateError::Dataset(format!("record {} has no pretrained map", r.id))
            })?;
            Ok(TrainingSample {
                id: r.id.clone(),
                sequence: ImageSequence::from_frames(&frames, model)?,
                a_pretrained: decode_grid(&fs::read(dir.join(pretrained))?)?,
                a_vlm: decode_grid(&fs::read(dir.join(&r.map))?)?,
            })
        })
        .collect()
}

//! Dataset generation and replay.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compositor::FramePair;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::par::{self, Exec};

use super::config::SequenceConfig;
use super::frames::{discover_scenes, downsample, subsample_from, Scene};
use super::plan::{plan_sequence, SceneSource, Split};
use super::render::{write_sequence, FlowOrigin, SequenceManifest, SequenceRenderer, MANIFEST_VERSION};
use super::select::split_dataset;

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub split_ratio: f64,
    pub sequences: Vec<SequenceManifest>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if let Ok(d) = serde_json::from_str::<DatasetManifest>(&text) {
            return Ok(d);
        }
        // a single sequence's manifest
        let seq: SequenceManifest = serde_json::from_str(&text)?;
        Ok(DatasetManifest {
            version: seq.version,
            seed: seq.config.seed,
            split_ratio: DEFAULT_SPLIT_RATIO,
            sequences: vec![seq],
        })
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub input_dir: PathBuf,
    pub flow_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub config: SequenceConfig,
    /// Defaults to one sequence per scene.
    pub sequences: Option<usize>,
    pub split_ratio: f64,
    pub exec: Exec,
}

fn scene_flow_dir(flow_root: &Path, scene: &Scene, single: bool) -> Result<PathBuf> {
    let nested = flow_root.join(&scene.name);
    if nested.is_dir() {
        return Ok(nested);
    }
    let has_flo = std::fs::read_dir(flow_root)
        .map_err(|e| Error::io(format!("listing {}", flow_root.display()), e))?
        .filter_map(|e| e.ok())
        .any(|e| e.path().extension().is_some_and(|x| x == "flo"));
    if single && has_flo {
        return Ok(flow_root.to_path_buf());
    }
    Err(Error::invalid(format!(
        "no flow directory for scene {} under {}",
        scene.name,
        flow_root.display()
    )))
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).map_err(|e| Error::io(format!("resolving {}", p.display()), e))
}

/// Plans every sequence: sequence `s` uses scene `s mod M` starting at source
/// frame `(s div M) mod stride`, so asking for more sequences than scenes
/// yields differently phased subsamplings.
pub fn plan_dataset(opts: &GenerateOptions) -> Result<DatasetManifest> {
    let cfg = &opts.config;
    cfg.validate()?;
    let input = absolute(&opts.input_dir)?;
    let scenes = discover_scenes(&input)?;
    let flow_root = opts.flow_dir.as_deref().map(absolute).transpose()?;
    let n = opts.sequences.unwrap_or(scenes.len());
    if n == 0 {
        return Err(Error::invalid("asked for zero sequences"));
    }
    let indices: Vec<usize> = (0..n).collect();
    let (train, _) = split_dataset(&indices, opts.split_ratio, cfg.seed)?;
    let mut splits = vec![Split::Test; n];
    for i in train {
        splits[i] = Split::Train;
    }
    let sequences = (0..n)
        .map(|s| {
            let scene = &scenes[s % scenes.len()];
            let phase = (s / scenes.len()) % cfg.frame_stride;
            let idx: Vec<usize> = (0..scene.frames.len()).collect();
            let mut kept = subsample_from(&idx, cfg.frame_stride, phase)?;
            if let Some(m) = cfg.max_frames {
                kept.truncate(m);
            }
            let flow_dir = flow_root
                .as_deref()
                .map(|r| scene_flow_dir(r, scene, scenes.len() == 1))
                .transpose()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            let plan = plan_sequence(cfg, splits[s], &mut rng)?;
            Ok(SequenceManifest {
                version: MANIFEST_VERSION,
                name: format!("seq_{s:05}"),
                index: s,
                split: splits[s],
                scene: SceneSource {
                    name: scene.name.clone(),
                    dir: scene.dir.clone(),
                    frames: kept.iter().map(|&i| scene.frames[i].clone()).collect(),
                    kept,
                    flow_dir,
                },
                config: cfg.clone(),
                plan,
                flow_origin: if flow_root.is_some() {
                    FlowOrigin::File
                } else {
                    FlowOrigin::Estimated
                },
                frames: Vec::new(),
                clamped_frames: 0,
                clamp_flag: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetManifest {
        version: MANIFEST_VERSION,
        seed: cfg.seed,
        split_ratio: opts.split_ratio,
        sequences,
    })
}

/// Renders every sequence of `manifest` under `root` and writes the dataset
/// manifest. Sequences render in parallel; the result does not depend on the
/// thread count.
pub fn render_dataset(manifest: &DatasetManifest, root: &Path, exec: Exec) -> Result<DatasetManifest> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
    let sequences = par::try_map_indexed(exec, manifest.sequences.len(), |i| {
        let mut m = manifest.sequences[i].clone();
        write_sequence(&mut m, root, exec).map_err(|e| Error::Sequence {
            sequence: m.name.clone(),
            source: Box::new(e),
        })?;
        Ok::<_, Error>(m)
    })?;
    let out = DatasetManifest {
        sequences,
        ..manifest.clone()
    };
    let path = root.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&out)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(out)
}

pub fn generate_dataset(opts: &GenerateOptions) -> Result<DatasetManifest> {
    let plan = plan_dataset(opts)?;
    render_dataset(&plan, &opts.output_dir, opts.exec)
}

/// Regenerates a dataset from a manifest alone. Fails if the recomputed
/// trajectories or ghost placements differ from the recorded ones, which
/// means the inputs changed.
pub fn replay_dataset(manifest: &DatasetManifest, root: &Path, exec: Exec) -> Result<DatasetManifest> {
    let fresh = DatasetManifest {
        sequences: manifest
            .sequences
            .iter()
            .map(|s| SequenceManifest {
                frames: Vec::new(),
                ..s.clone()
            })
            .collect(),
        ..manifest.clone()
    };
    let out = render_dataset(&fresh, root, exec)?;
    for (a, b) in manifest.sequences.iter().zip(&out.sequences) {
        if !a.frames.is_empty() && a.frames != b.frames {
            return Err(Error::Sequence {
                sequence: a.name.clone(),
                source: Box::new(Error::invalid(
                    "replayed trajectory differs from the manifest; inputs have changed",
                )),
            });
        }
    }
    Ok(out)
}

/// One composited frame of `frame` with a flare drawn from `config`.
pub fn preview_frame(config: &SequenceConfig, frame: &Image, exec: Exec) -> Result<FramePair> {
    let [w, h] = config.target_size;
    let scene = downsample(frame, w, h, config.gamma, exec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let plan = plan_sequence(config, Split::Train, &mut rng)?;
    SequenceRenderer::new(config, &plan, vec![scene], Vec::new(), exec)?.frame(0)
}

//! Input scenes: discovery on disk, temporal subsampling, linear-light
//! downsampling and per-step flow preparation.

use std::path::{Path, PathBuf};

use crate::compositor::{apply_gamma, inverse_gamma};
use crate::error::{Error, Result};
use crate::flowio::{estimate_flow_pyramidal, flow_file_name, FlowField, LkParams};
use crate::image::Image;
use crate::par::{self, Exec};

/// Keeps indices `0, stride, 2·stride, …`.
pub fn subsample_frames<T: Clone>(frames: &[T], stride: usize) -> Result<Vec<T>> {
    subsample_from(frames, stride, 0)
}

/// Keeps indices `phase, phase + stride, …`.
pub fn subsample_from<T: Clone>(frames: &[T], stride: usize, phase: usize) -> Result<Vec<T>> {
    if stride == 0 {
        return Err(Error::invalid("frame stride must be >= 1"));
    }
    if frames.is_empty() {
        return Err(Error::invalid("no frames to subsample"));
    }
    if phase >= frames.len() {
        return Err(Error::invalid(format!(
            "start frame {phase} is past the end of a {}-frame scene",
            frames.len()
        )));
    }
    Ok(frames.iter().skip(phase).step_by(stride).cloned().collect())
}

/// Area-average resampling in linear light. The identity size returns the
/// input unchanged.
pub fn downsample(frame: &Image, width: usize, height: usize, gamma: f64, exec: Exec) -> Result<Image> {
    if frame.dims() == (width, height) {
        return Ok(frame.clone());
    }
    let (sw, sh) = frame.dims();
    if width > sw || height > sh {
        return Err(Error::invalid(format!(
            "cannot downsample {sw}x{sh} to the larger {width}x{height}"
        )));
    }
    let linear = inverse_gamma(frame, gamma)?;
    apply_gamma(&linear.area_resample(width, height, exec)?, gamma)
}

/// A directory of frames, ordered by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub dir: PathBuf,
    pub frames: Vec<String>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut out = Vec::new();
    for entry in rd {
        out.push(entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?.path());
    }
    out.sort();
    Ok(out)
}

/// PNG file names directly inside `dir`, sorted.
pub fn png_files(dir: &Path) -> Result<Vec<String>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect())
}

/// Scenes under `root`: every subdirectory holding PNG frames, or `root`
/// itself when it holds frames directly.
pub fn discover_scenes(root: &Path) -> Result<Vec<Scene>> {
    let direct = png_files(root)?;
    if !direct.is_empty() {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into());
        return Ok(vec![Scene {
            name,
            dir: root.to_path_buf(),
            frames: direct,
        }]);
    }
    let mut scenes = Vec::new();
    for p in sorted_entries(root)? {
        if p.is_dir() {
            let frames = png_files(&p)?;
            if !frames.is_empty() {
                scenes.push(Scene {
                    name: p.file_name().expect("directory entry").to_string_lossy().into_owned(),
                    dir: p,
                    frames,
                });
            }
        }
    }
    if scenes.is_empty() {
        return Err(Error::invalid(format!("no PNG frames found under {}", root.display())));
    }
    Ok(scenes)
}

/// Loads `names` from `dir` and downsamples them to the target size.
pub fn load_frames(dir: &Path, names: &[String], target: (usize, usize), gamma: f64, exec: Exec) -> Result<Vec<Image>> {
    par::try_map_indexed(exec, names.len(), |i| {
        let img = Image::load_png(&dir.join(&names[i]))?;
        downsample(&img, target.0, target.1, gamma, Exec::Sequential)
    })
}

/// Flow between consecutive kept frames at the target size. `flow_dir` holds
/// `flow_%05d.flo` files for consecutive source frames (`i → i+1`); the steps
/// between kept frames are chained. Without `flow_dir` the flow is estimated
/// from the kept frames themselves.
pub fn prepare_flows(
    kept: &[usize],
    frames: &[Image],
    flow_dir: Option<&Path>,
    target: (usize, usize),
    estimator: &LkParams,
    exec: Exec,
) -> Result<Vec<FlowField>> {
    let steps = kept.len().saturating_sub(1);
    match flow_dir {
        Some(dir) => par::try_map_indexed(exec, steps, |t| {
            let fields = (kept[t]..kept[t + 1])
                .map(|i| {
                    let path = dir.join(flow_file_name(i));
                    FlowField::load(&path)
                        .and_then(|f| f.resized(target.0, target.1, Exec::Sequential))
                        .map_err(|e| Error::Sequence {
                            sequence: path.display().to_string(),
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            FlowField::chain(&fields, Exec::Sequential)
        }),
        None => par::try_map_indexed(exec, steps, |t| {
            estimate_flow_pyramidal(
                &frames[t].luminance(),
                &frames[t + 1].luminance(),
                estimator,
                Exec::Sequential,
            )
        }),
    }
}

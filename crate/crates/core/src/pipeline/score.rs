//! Scoring directories of frames.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::metrics::{score_sequences, MetricsReport, SequenceFrames};
use crate::par::{self, Exec};

use super::frames::png_files;

/// Frame directories under `root`, keyed by sequence name. `root` itself is one
/// sequence when it holds PNGs; otherwise each subdirectory is, looked up
/// through `role` (`degraded`, `clean`, `mask`) when the generator layout is
/// used, searching one split level (`train`, `test`) deep as well.
fn sequence_dirs(root: &Path, role: &str) -> Result<Vec<(String, PathBuf)>> {
    if !png_files(root)?.is_empty() {
        return Ok(vec![(String::new(), root.to_path_buf())]);
    }
    if root.join(role).is_dir() {
        return Ok(vec![(String::new(), root.join(role))]);
    }
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(format!("listing {}", root.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().expect("entry").to_string_lossy().into_owned();
        if !png_files(&p)?.is_empty() {
            out.push((name, p));
        } else if p.join(role).is_dir() {
            out.push((name, p.join(role)));
        } else {
            for (inner, dir) in sequence_dirs(&p, role).unwrap_or_default() {
                if !inner.is_empty() {
                    out.push((format!("{name}/{inner}"), dir));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no frames found under {}", root.display())));
    }
    Ok(out)
}

fn load_all<T: Send>(dir: &Path, exec: Exec, load: impl Fn(&Path) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let names = png_files(dir)?;
    par::try_map_indexed(exec, names.len(), |i| load(&dir.join(&names[i])))
}

/// Scores predictions against ground truth, pairing sequences by name and
/// frames (and masks) by sorted file order.
pub fn score_dirs(pred: &Path, gt: &Path, masks: Option<&Path>, epsilon: f64, exec: Exec) -> Result<MetricsReport> {
    let gt_dirs = sequence_dirs(gt, "clean")?;
    let pred_dirs = sequence_dirs(pred, "degraded")?;
    let mask_dirs = masks.map(|m| sequence_dirs(m, "mask")).transpose()?;
    let mut seqs = Vec::new();
    for (name, gdir) in &gt_dirs {
        let pdir = pred_dirs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::invalid(format!("no predictions for sequence `{name}`")))?;
        let mdir = match &mask_dirs {
            Some(list) => Some(
                list.iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, d)| d)
                    .ok_or_else(|| Error::invalid(format!("no masks for sequence `{name}`")))?,
            ),
            None => None,
        };
        seqs.push(SequenceFrames {
            name: if name.is_empty() { ".".into() } else { name.clone() },
            pred: load_all(pdir, exec, Image::load_png)?,
            gt: load_all(gdir, exec, Image::load_png)?,
            masks: mdir.map(|d| load_all(d, exec, Mask::load_png)).transpose()?,
        });
    }
    score_sequences(&seqs, epsilon, exec)
}

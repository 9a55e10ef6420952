//! Per-sequence ghost selection and the train/test split.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::luminance;
use crate::optics::GhostDescriptor;

use super::config::GhostSettings;

pub const JITTER_RANGE: (f64, f64) = (0.5, 2.0);

/// Ghosts worth rendering: finite, within `max_abs_rho` of the axis, and with
/// a radius between `min_radius_px` and `max_radius_fraction · height`.
pub fn visible_ghosts(all: &[GhostDescriptor], settings: &GhostSettings, height: usize) -> Vec<GhostDescriptor> {
    let max_r = settings.max_radius_fraction * height as f64;
    all.iter()
        .filter(|g| {
            g.rho.is_finite()
                && g.rho.abs() <= settings.max_abs_rho
                && g.radius_px >= settings.min_radius_px
                && g.radius_px <= max_r
                && g.intensity_rgb.iter().all(|v| v.is_finite())
                && luminance(g.intensity_rgb[0], g.intensity_rgb[1], g.intensity_rgb[2]) > 0.0
        })
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedGhost {
    pub descriptor: GhostDescriptor,
    /// Log-uniform factor in `[0.5, 2]` applied to the ranking score.
    pub jitter: f64,
}

/// Draws `k` uniformly in `range`, jitters every candidate's luminance by a
/// log-uniform factor, and keeps the `k` highest (ties by original order).
/// The result keeps the candidates' original order.
pub fn select_ghosts<R: Rng + ?Sized>(
    candidates: &[GhostDescriptor],
    range: (usize, usize),
    rng: &mut R,
) -> Result<Vec<SelectedGhost>> {
    if range.0 > range.1 {
        return Err(Error::invalid(format!("ghost count range {range:?} has min > max")));
    }
    let k = rng.gen_range(range.0..=range.1).min(candidates.len());
    let (lo, hi) = (JITTER_RANGE.0.ln(), JITTER_RANGE.1.ln());
    let jitter: Vec<f64> = candidates.iter().map(|_| rng.gen_range(lo..hi).exp()).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let score = |i: usize| {
        let c = candidates[i].intensity_rgb;
        luminance(c[0], c[1], c[2]) * jitter[i]
    };
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    Ok(keep
        .into_iter()
        .map(|i| SelectedGhost {
            descriptor: candidates[i],
            jitter: jitter[i],
        })
        .collect())
}

/// Seeded shuffle, then the first `round(ratio · N)` go to training.
pub fn split_dataset<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng);
    let n_train = (ratio * items.len() as f64).round() as usize;
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

//! Gamma-linear composition of a clean frame with flare layers.

mod layers;

pub use layers::{render_ghost_sprite, render_source_blob, SourceBlob};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, luminance, Image, Mask};
use crate::par::{self, Exec};

pub const DEFAULT_GAMMA: f64 = 2.2;
pub const DEFAULT_MASK_THRESHOLD: f64 = 1e-3;

/// Smallest luminance weight; bounds how far one channel can rise while the
/// layer luminance stays under the mask threshold.
const MIN_LUMA_WEIGHT: f64 = 0.0722;

#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    pub degraded: Image,
    pub clean: Image,
    pub mask: Mask,
    pub frame_index: usize,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("gamma {gamma} must be positive")))
    }
}

/// `x ↦ x^γ` on a gamma-encoded image with values in `[0, 1]`.
pub fn inverse_gamma(img: &Image, gamma: f64) -> Result<Image> {
    check_gamma(gamma)?;
    if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("gamma-domain value {v} outside [0, 1]")));
    }
    Ok(img.map(|x| x.powf(gamma)))
}

/// `x ↦ clip(x, 0, 1)^(1/γ)`.
pub fn apply_gamma(img: &Image, gamma: f64) -> Result<Image> {
    check_gamma(gamma)?;
    if img.data().iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("linear image contains NaN"));
    }
    let inv = 1.0 / gamma;
    Ok(img.map(|x| x.clamp(0.0, 1.0).powf(inv)))
}

/// Pixels whose summed-layer luminance exceeds `threshold`.
pub fn flare_mask(layers: &[Image], width: usize, height: usize, threshold: f64) -> Result<Mask> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::invalid(format!("mask threshold {threshold} must be positive")));
    }
    for l in layers {
        ensure_same_dims(l.dims(), (width, height))?;
    }
    Ok(Mask::from_fn(width, height, |x, y| {
        let mut s = [0.0; 3];
        for l in layers {
            let p = l.pixel(x, y);
            for c in 0..3 {
                s[c] += p[c];
            }
        }
        luminance(s[0], s[1], s[2]) > threshold
    }))
}

/// Largest gamma-domain change a pixel outside the mask can show.
pub fn mask_tolerance(threshold: f64, gamma: f64) -> f64 {
    (threshold / MIN_LUMA_WEIGHT).powf(1.0 / gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compositor {
    pub gamma: f64,
    pub mask_threshold: f64,
}

impl Default for Compositor {
    fn default() -> Self {
        Compositor {
            gamma: DEFAULT_GAMMA,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
        }
    }
}

impl Compositor {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Compositor {
            gamma,
            ..Compositor::default()
        })
    }

    /// `degraded = (clip(scene^γ + Σ layers, 0, 1))^(1/γ)`; the clean frame is
    /// the scene itself.
    pub fn composite(&self, frame_index: usize, scene: &Image, layers: &[Image], exec: Exec) -> Result<FramePair> {
        check_gamma(self.gamma)?;
        let (w, h) = scene.dims();
        for l in layers {
            ensure_same_dims(l.dims(), (w, h))?;
            if l.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("flare layer values must be finite and nonnegative"));
            }
        }
        let mut degraded = inverse_gamma(scene, self.gamma)?;
        let inv = 1.0 / self.gamma;
        let row = w * 3;
        if row > 0 {
            par::for_each_row_mut(exec, degraded.data_mut(), row, |y, out| {
                let base = y * row;
                for (i, v) in out.iter_mut().enumerate() {
                    let added: f64 = layers.iter().map(|l| l.data()[base + i]).sum();
                    *v = (*v + added).clamp(0.0, 1.0).powf(inv);
                }
            });
        }
        Ok(FramePair {
            degraded,
            clean: scene.clone(),
            mask: flare_mask(layers, w, h, self.mask_threshold)?,
            frame_index,
        })
    }
}

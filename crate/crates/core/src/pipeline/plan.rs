//! Per-sequence plans: every random draw of a sequence, made up front in a
//! fixed order so that rendering is a pure function of the manifest.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::luminance;
use crate::optics::{
    enumerate_ghosts, focal_scale_for_field, ghost_geometry, ApertureShape, GhostOptions, GhostPair,
    LensPrescription,
};
use crate::scatter::ApertureSpec;
use crate::trajectory::{init_source, sample_scatter_offset, SourcePosition};

use super::config::SequenceConfig;
use super::select::{select_ghosts, visible_ghosts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairType {
    ScatterOnly,
    ScatterReflective,
}

/// Where a sequence's clean frames (and optional flow files) come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSource {
    pub name: String,
    pub dir: PathBuf,
    /// Source frame indices kept after subsampling.
    pub kept: Vec<usize>,
    /// File names of the kept frames, in order.
    pub frames: Vec<String>,
    pub flow_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPlan {
    pub aperture: ApertureSpec,
    pub streak_gain: f64,
    pub kernel_size: usize,
    pub intensity: f64,
    pub tint: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedGhost {
    pub pair: GhostPair,
    pub rho: f64,
    pub radius_px: f64,
    /// Final linear-light value per covered pixel.
    pub rgb: [f64; 3],
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectivePlan {
    pub aperture_scale: f64,
    pub focal_scale: f64,
    /// Luminance of the brightest selected ghost.
    pub peak: f64,
    /// Gain applied to the optical ghost intensities.
    pub flux: f64,
    /// Empty for scatter-only pairs.
    pub ghosts: Vec<PlannedGhost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan {
    pub init: SourcePosition,
    pub offset: (f64, f64),
    pub pair_type: PairType,
    pub aperture_shape: ApertureShape,
    pub scatter: ScatterPlan,
    pub reflective: ReflectivePlan,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    uniform(rng, [lo.ln(), hi.ln()]).exp().clamp(lo, hi)
}

/// The lens a plan renders ghosts with.
pub fn plan_lens(cfg: &SequenceConfig, shape: ApertureShape, aperture_scale: f64) -> Result<LensPrescription> {
    cfg.lens()?.with_aperture_shape(shape).with_scaled_entrance(aperture_scale)
}

pub fn ghost_options(cfg: &SequenceConfig) -> GhostOptions {
    GhostOptions {
        paraxial_cap: cfg.ghosts.paraxial_cap,
        ..GhostOptions::default()
    }
}

pub fn half_diagonal(width: usize, height: usize) -> f64 {
    0.5 * (width as f64).hypot(height as f64)
}

/// Draws, in order: source position, scatter offset, pair type, aperture
/// shape, occluders, scatter intensity and tint, aperture scale, ghost peak,
/// ghost count and ranking jitter.
pub fn plan_sequence<R: Rng + ?Sized>(cfg: &SequenceConfig, split: Split, rng: &mut R) -> Result<SequencePlan> {
    cfg.validate()?;
    let [w, h] = cfg.target_size;
    let init = init_source(w, h, rng)?;
    let offset = sample_scatter_offset(rng);
    let u: f64 = rng.gen();
    let reflective = cfg.include_reflective && (split == Split::Train || u < cfg.reflective_fraction);
    let pair_type = if reflective {
        PairType::ScatterReflective
    } else {
        PairType::ScatterOnly
    };
    let shape = match cfg.fixed_shape() {
        Some(s) => s,
        None if rng.gen_bool(0.5) => ApertureShape::Circle,
        None => ApertureShape::Hexagon,
    };
    let s = &cfg.scatter;
    let aperture = ApertureSpec {
        shape,
        resolution: s.resolution,
        fill: s.fill,
        occluders: s.occluders.sample(rng),
    };
    let intensity = uniform(rng, s.intensity_range);
    let tint = [0, 1, 2].map(|c| uniform(rng, [s.tint_min[c], s.tint_max[c]]));

    let g = &cfg.ghosts;
    let aperture_scale = uniform(rng, g.aperture_scale_range);
    let peak = log_uniform(rng, g.peak_range);
    let lens = plan_lens(cfg, shape, aperture_scale)?;
    let focal_scale = focal_scale_for_field(&lens, half_diagonal(w, h), g.field_angle)?;
    let opts = ghost_options(cfg);
    let table: Vec<_> = enumerate_ghosts(&lens)
        .into_iter()
        .filter_map(|pair| ghost_geometry(&lens, pair, 0.0, focal_scale, &opts).ok())
        .collect();
    let pool = visible_ghosts(&table, g, h);
    let range = (cfg.ghost_count_range[0], cfg.ghost_count_range[1]);
    let selected = select_ghosts(&pool, range, rng)?;
    let brightest = selected
        .iter()
        .map(|s| {
            let c = s.descriptor.intensity_rgb;
            luminance(c[0], c[1], c[2])
        })
        .fold(0.0, f64::max);
    let flux = if brightest > 0.0 { peak / brightest } else { 0.0 };
    let ghosts = if reflective {
        selected
            .iter()
            .map(|s| PlannedGhost {
                pair: s.descriptor.pair,
                rho: s.descriptor.rho,
                radius_px: s.descriptor.radius_px,
                rgb: s.descriptor.intensity_rgb.map(|v| v * flux),
                jitter: s.jitter,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SequencePlan {
        init,
        offset,
        pair_type,
        aperture_shape: shape,
        scatter: ScatterPlan {
            aperture,
            streak_gain: s.streak_gain,
            kernel_size: s.kernel_size,
            intensity,
            tint,
        },
        reflective: ReflectivePlan {
            aperture_scale,
            focal_scale,
            peak,
            flux,
            ghosts,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plans_are_deterministic() {
        let cfg = SequenceConfig::default();
        let a = plan_sequence(&cfg, Split::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = plan_sequence(&cfg, Split::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let c = plan_sequence(&cfg, Split::Train, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn training_plans_carry_ghosts_with_the_drawn_peak() {
        let cfg = SequenceConfig {
            ghost_count_range: [5, 5],
            ..SequenceConfig::default()
        };
        for seed in 0..5 {
            let p = plan_sequence(&cfg, Split::Train, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(p.pair_type, PairType::ScatterReflective);
            assert_eq!(p.reflective.ghosts.len(), 5);
            let top = p
                .reflective
                .ghosts
                .iter()
                .map(|g| luminance(g.rgb[0], g.rgb[1], g.rgb[2]))
                .fold(0.0, f64::max);
            assert!((top - p.reflective.peak).abs() < 1e-12 * p.reflective.peak);
            assert!((0.05..=0.3).contains(&p.reflective.peak));
            for g in &p.reflective.ghosts {
                assert!(g.rho.abs() <= 2.0 && g.radius_px >= 2.0 && g.radius_px <= 120.0);
            }
        }
    }

    #[test]
    fn test_split_mixes_pair_types() {
        let cfg = SequenceConfig::default();
        let kinds: Vec<PairType> = (0..40)
            .map(|s| plan_sequence(&cfg, Split::Test, &mut ChaCha8Rng::seed_from_u64(s)).unwrap().pair_type)
            .collect();
        assert!(kinds.contains(&PairType::ScatterOnly));
        assert!(kinds.contains(&PairType::ScatterReflective));
        let mut off = cfg.clone();
        off.include_reflective = false;
        let p = plan_sequence(&off, Split::Train, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.pair_type, PairType::ScatterOnly);
        assert!(p.reflective.ghosts.is_empty());
    }
}

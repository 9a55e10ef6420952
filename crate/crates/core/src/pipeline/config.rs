//! Generator configuration, read from TOML. Every field has a default, so an
//! empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compositor::{SourceBlob, DEFAULT_GAMMA, DEFAULT_MASK_THRESHOLD};
use crate::error::{Error, Result};
use crate::flowio::LkParams;
use crate::optics::{ApertureShape, LensPrescription, DEFAULT_PARAXIAL_CAP};
use crate::scatter::OccluderRandomization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeChoice {
    Circle,
    Hexagon,
    /// Drawn per sequence.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSettings {
    pub shape: ShapeChoice,
    /// Pupil grid size for the diffraction FFT.
    pub resolution: usize,
    pub fill: f64,
    /// Side of the splatted kernel in output pixels.
    pub kernel_size: usize,
    /// Total linear energy of the scatter layer, drawn uniformly.
    pub intensity_range: [f64; 2],
    pub tint_min: [f64; 3],
    pub tint_max: [f64; 3],
    /// Fraction of the occluder-induced PSF structure kept (0 = clean pupil).
    pub streak_gain: f64,
    pub occluders: OccluderRandomization,
}

impl Default for ScatterSettings {
    fn default() -> Self {
        ScatterSettings {
            shape: ShapeChoice::Random,
            resolution: 512,
            fill: 0.5,
            kernel_size: 192,
            intensity_range: [300.0, 1200.0],
            tint_min: [0.85, 0.8, 0.7],
            tint_max: [1.0, 1.0, 1.0],
            streak_gain: 0.5,
            occluders: OccluderRandomization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhostSettings {
    /// Ghosts farther than `max_abs_rho` times the source offset are dropped.
    pub max_abs_rho: f64,
    pub min_radius_px: f64,
    /// Upper radius bound as a fraction of the frame height.
    pub max_radius_fraction: f64,
    /// Luminance of the brightest selected ghost, drawn log-uniformly.
    pub peak_range: [f64; 2],
    /// Entrance-pupil scale, drawn uniformly per sequence.
    pub aperture_scale_range: [f64; 2],
    /// Incidence angle (rad) of a source on the frame corner.
    pub field_angle: f64,
    pub paraxial_cap: f64,
}

impl Default for GhostSettings {
    fn default() -> Self {
        GhostSettings {
            max_abs_rho: 2.0,
            min_radius_px: 2.0,
            max_radius_fraction: 0.5,
            peak_range: [0.05, 0.3],
            aperture_scale_range: [0.7, 1.0],
            field_angle: 0.3,
            paraxial_cap: DEFAULT_PARAXIAL_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceConfig {
    pub seed: u64,
    pub frame_stride: usize,
    /// Cap on frames per sequence after subsampling.
    pub max_frames: Option<usize>,
    pub target_size: [usize; 2],
    pub gamma: f64,
    /// Lens prescription; the bundled representative prescription when unset.
    pub lens_file: Option<PathBuf>,
    pub ghost_count_range: [usize; 2],
    pub include_reflective: bool,
    /// Share of test sequences that carry reflective ghosts as well as scatter.
    pub reflective_fraction: f64,
    pub mask_threshold: f64,
    pub scatter: ScatterSettings,
    pub ghosts: GhostSettings,
    pub source_blob: SourceBlob,
    /// Estimator used when no flow files are supplied.
    pub flow_estimator: LkParams,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            seed: 0,
            frame_stride: 8,
            max_frames: None,
            target_size: [320, 240],
            gamma: DEFAULT_GAMMA,
            lens_file: None,
            ghost_count_range: [3, 8],
            include_reflective: true,
            reflective_fraction: 0.5,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
            scatter: ScatterSettings::default(),
            ghosts: GhostSettings::default(),
            source_blob: SourceBlob::default(),
            flow_estimator: LkParams::default(),
        }
    }
}

fn range_ok(r: [f64; 2], min: f64) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] >= min && r[0] <= r[1]
}

impl SequenceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SequenceConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lens(&self) -> Result<LensPrescription> {
        match &self.lens_file {
            Some(p) => LensPrescription::load(p),
            None => Ok(LensPrescription::default_lens()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.frame_stride == 0 {
            return bad("frame_stride must be >= 1");
        }
        if self.max_frames == Some(0) {
            return bad("max_frames must be >= 1");
        }
        let [w, h] = self.target_size;
        if w < 16 || h < 16 {
            return bad("target_size must be at least 16x16");
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.ghost_count_range[0] > self.ghost_count_range[1] {
            return bad("ghost_count_range must satisfy min <= max");
        }
        if !(0.0..=1.0).contains(&self.reflective_fraction) {
            return bad("reflective_fraction must lie in [0, 1]");
        }
        if !(self.mask_threshold.is_finite() && self.mask_threshold > 0.0) {
            return bad("mask_threshold must be positive");
        }
        let s = &self.scatter;
        if s.resolution < 64 || !s.resolution.is_power_of_two() {
            return bad("scatter.resolution must be a power of two >= 64");
        }
        if !(s.fill > 0.0 && s.fill <= 1.0) {
            return bad("scatter.fill must lie in (0, 1]");
        }
        if s.kernel_size == 0 || s.kernel_size > s.resolution {
            return bad("scatter.kernel_size must lie in [1, resolution]");
        }
        if !range_ok(s.intensity_range, 0.0) {
            return bad("scatter.intensity_range must be nonnegative with min <= max");
        }
        if (0..3).any(|c| !range_ok([s.tint_min[c], s.tint_max[c]], 0.0)) {
            return bad("scatter tints must be nonnegative with tint_min <= tint_max");
        }
        if !(s.streak_gain.is_finite() && s.streak_gain >= 0.0) {
            return bad("scatter.streak_gain must be >= 0");
        }
        s.occluders.validate()?;
        let g = &self.ghosts;
        if !(g.max_abs_rho > 0.0 && g.min_radius_px >= 0.0 && g.max_radius_fraction > 0.0) {
            return bad("ghost visibility bounds must be positive");
        }
        if !range_ok(g.peak_range, f64::MIN_POSITIVE) {
            return bad("ghosts.peak_range must be positive with min <= max");
        }
        if !range_ok(g.aperture_scale_range, f64::MIN_POSITIVE) || g.aperture_scale_range[1] > 1.0 {
            return bad("ghosts.aperture_scale_range must lie in (0, 1] with min <= max");
        }
        if !(g.field_angle > 0.0 && g.paraxial_cap > 0.0 && g.field_angle <= g.paraxial_cap) {
            return bad("ghosts.field_angle must be positive and within paraxial_cap");
        }
        let b = &self.source_blob;
        if !(b.sigma > 0.0 && b.peak >= 0.0 && b.sigma.is_finite() && b.peak.is_finite()) {
            return bad("source_blob needs sigma > 0 and peak >= 0");
        }
        let lk = &self.flow_estimator;
        if lk.levels == 0 || lk.iterations == 0 || lk.window_radius == 0 || lk.min_eigenvalue < 0.0 {
            return bad("flow_estimator needs levels, iterations and window_radius >= 1");
        }
        Ok(())
    }

    pub(crate) fn fixed_shape(&self) -> Option<ApertureShape> {
        match self.scatter.shape {
            ShapeChoice::Circle => Some(ApertureShape::Circle),
            ShapeChoice::Hexagon => Some(ApertureShape::Hexagon),
            ShapeChoice::Random => None,
        }
    }
}

//! Second-order reflection ("ghost") paths through a lens prescription.
//!
//! A ghost pair `(i, j)` with `i < j` is the path that refracts forward
//! through interfaces `0..j`, reflects at `j`, travels back through
//! `j-1..=i+1` (using inverse refraction matrices), reflects at `i`, then
//! refracts forward through `i+1..` to the sensor. Backward gaps are
//! traversed with positive translations, so an index-matched all-flat lens
//! reduces to a single translation over the forward length plus twice the
//! bounce length.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::coating::{interface_reflectance_with_index, DEFAULT_COATING_INDEX};
use super::lens::LensPrescription;
use super::matrix::{
    reflection_matrix, refraction_matrix, translation_matrix, RayState, RayTransferMatrix,
};
use crate::error::{Error, Result};

/// Interface indices `(i, j)`, `i < j`: reflect at `j` first, then at `i`.
pub type GhostPair = (usize, usize);

/// Default largest incidence angle (rad) accepted by [`ghost_geometry`].
pub const DEFAULT_PARAXIAL_CAP: f64 = 0.35;

/// One elementary step of an optical path. Indices are 0-based interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFactor {
    /// Translation over the gap following interface `m` (the sensor gap for the last one).
    Gap(usize),
    Refract(usize),
    InverseRefract(usize),
    Reflect(usize),
    InverseReflect(usize),
}

impl PathFactor {
    /// Interface the ray meets during this step, if any.
    pub fn interface(self) -> Option<usize> {
        match self {
            PathFactor::Gap(_) => None,
            PathFactor::Refract(m)
            | PathFactor::InverseRefract(m)
            | PathFactor::Reflect(m)
            | PathFactor::InverseReflect(m) => Some(m),
        }
    }

    pub fn matrix(self, lens: &LensPrescription) -> Result<RayTransferMatrix> {
        let check = |m: usize| -> Result<()> {
            if m >= lens.len() {
                return Err(Error::invalid(format!(
                    "interface {m} out of range for {} interfaces",
                    lens.len()
                )));
            }
            Ok(())
        };
        match self {
            PathFactor::Gap(m) => {
                check(m)?;
                translation_matrix(lens.gap_after(m))
            }
            PathFactor::Refract(m) => {
                check(m)?;
                let s = &lens.interfaces()[m];
                refraction_matrix(lens.index_before(m), s.index, s.radius)
            }
            PathFactor::InverseRefract(m) => PathFactor::Refract(m).matrix(lens)?.inverse(),
            PathFactor::Reflect(m) => {
                check(m)?;
                reflection_matrix(lens.interfaces()[m].radius)
            }
            PathFactor::InverseReflect(m) => PathFactor::Reflect(m).matrix(lens)?.inverse(),
        }
    }
}

/// Writes the factor in 1-based product notation: `T3`, `R4`, `L4`, `R4^-1`.
impl fmt::Display for PathFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PathFactor::Gap(m) => write!(f, "T{}", m + 1),
            PathFactor::Refract(m) => write!(f, "R{}", m + 1),
            PathFactor::InverseRefract(m) => write!(f, "R{}^-1", m + 1),
            PathFactor::Reflect(m) => write!(f, "L{}", m + 1),
            PathFactor::InverseReflect(m) => write!(f, "L{}^-1", m + 1),
        }
    }
}

/// Sequence of factors in propagation order (first element acts first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpticalPath {
    factors: Vec<PathFactor>,
}

impl OpticalPath {
    pub fn from_factors(factors: Vec<PathFactor>) -> Self {
        OpticalPath { factors }
    }

    /// Straight refraction path from the first interface to the sensor.
    pub fn direct(lens: &LensPrescription) -> Self {
        let factors = (0..lens.len())
            .flat_map(|m| [PathFactor::Refract(m), PathFactor::Gap(m)])
            .collect();
        OpticalPath { factors }
    }

    pub fn ghost(lens: &LensPrescription, pair: GhostPair) -> Result<Self> {
        validate_pair(lens, pair)?;
        let (i, j) = pair;
        let mut factors = Vec::with_capacity(4 * lens.len());
        for m in 0..j {
            factors.push(PathFactor::Refract(m));
            factors.push(PathFactor::Gap(m));
        }
        factors.push(PathFactor::Reflect(j));
        for m in (i + 1..j).rev() {
            factors.push(PathFactor::Gap(m));
            factors.push(PathFactor::InverseRefract(m));
        }
        factors.push(PathFactor::Gap(i));
        factors.push(PathFactor::Reflect(i));
        factors.push(PathFactor::Gap(i));
        for m in i + 1..lens.len() {
            factors.push(PathFactor::Refract(m));
            factors.push(PathFactor::Gap(m));
        }
        Ok(OpticalPath { factors })
    }

    pub fn factors(&self) -> &[PathFactor] {
        &self.factors
    }

    /// Per-factor matrices, in propagation order.
    pub fn matrices(&self, lens: &LensPrescription) -> Result<Vec<RayTransferMatrix>> {
        self.factors.iter().map(|f| f.matrix(lens)).collect()
    }

    pub fn system_matrix(&self, lens: &LensPrescription) -> Result<RayTransferMatrix> {
        let mut total = RayTransferMatrix::IDENTITY;
        for f in &self.factors {
            total = total.then(&f.matrix(lens)?);
        }
        if !total.is_finite() {
            return Err(Error::NumericDegenerate(
                "optical path produced a non-finite system matrix".into(),
            ));
        }
        Ok(total)
    }

    /// Traces `ray` step by step; the flag is set when the ray meets any
    /// interface outside its semi-aperture.
    pub fn trace_checked(&self, lens: &LensPrescription, ray: RayState) -> Result<(RayState, bool)> {
        let mut state = ray;
        let mut clipped = false;
        for f in &self.factors {
            if let Some(m) = f.interface() {
                let h = lens.interfaces()[m].semi_aperture;
                if state.r.abs() > h * (1.0 + 1e-9) {
                    clipped = true;
                }
            }
            state = f.matrix(lens)?.apply(state);
        }
        Ok((state, clipped))
    }

    /// Product notation with the last-applied factor leftmost, e.g. `T2 R2 T1 R1`.
    pub fn notation(&self) -> String {
        self.factors
            .iter()
            .rev()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn validate_pair(lens: &LensPrescription, (i, j): GhostPair) -> Result<()> {
    if i >= j || j >= lens.len() {
        return Err(Error::invalid(format!(
            "ghost pair ({i}, {j}) must satisfy i < j < {}",
            lens.len()
        )));
    }
    let s = lens.interfaces();
    if s[i].is_flat() || s[j].is_flat() {
        return Err(Error::invalid(format!(
            "ghost pair ({i}, {j}) uses a flat interface"
        )));
    }
    Ok(())
}

/// All second-order reflection pairs over the non-flat interfaces, ordered
/// by `(i, j)`. For `k` curved interfaces there are `k(k−1)/2` pairs.
pub fn enumerate_ghosts(lens: &LensPrescription) -> Vec<GhostPair> {
    let curved: Vec<usize> = lens
        .interfaces()
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_flat())
        .map(|(i, _)| i)
        .collect();
    let mut pairs = Vec::with_capacity(curved.len() * curved.len().saturating_sub(1) / 2);
    for (a, &i) in curved.iter().enumerate() {
        for &j in &curved[a + 1..] {
            pairs.push((i, j));
        }
    }
    pairs
}

pub fn direct_system_matrix(lens: &LensPrescription) -> Result<RayTransferMatrix> {
    OpticalPath::direct(lens).system_matrix(lens)
}

pub fn ghost_system_matrix(lens: &LensPrescription, pair: GhostPair) -> Result<RayTransferMatrix> {
    OpticalPath::ghost(lens, pair)?.system_matrix(lens)
}

/// Tunables for [`ghost_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GhostOptions {
    /// Largest accepted |θ| (rad).
    pub paraxial_cap: f64,
    /// Design wavelength per RGB channel (nm).
    pub wavelengths_nm: [f64; 3],
    /// Refractive index of the coating layer.
    pub coating_index: f64,
}

impl Default for GhostOptions {
    fn default() -> Self {
        GhostOptions {
            paraxial_cap: DEFAULT_PARAXIAL_CAP,
            wavelengths_nm: [650.0, 550.0, 450.0],
            coating_index: DEFAULT_COATING_INDEX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhostDescriptor {
    pub pair: GhostPair,
    /// Ghost centre = image centre + rho · (source image − image centre).
    pub rho: f64,
    pub radius_px: f64,
    /// Linear-light gain per pixel of ghost area, per channel.
    pub intensity_rgb: [f64; 3],
    pub clipped: bool,
}

/// Reflectance of interface `m` in each colour channel.
pub fn interface_reflectance_rgb(lens: &LensPrescription, m: usize, opts: &GhostOptions) -> [f64; 3] {
    let s = &lens.interfaces()[m];
    let n1 = lens.index_before(m);
    opts.wavelengths_nm.map(|wl| {
        interface_reflectance_with_index(n1, s.index, s.coating_nm, wl, opts.coating_index)
    })
}

/// Position ratio, size and intensity of one ghost for a source at incidence
/// angle `theta_in`; `focal_scale` converts sensor millimetres to pixels.
pub fn ghost_geometry(
    lens: &LensPrescription,
    pair: GhostPair,
    theta_in: f64,
    focal_scale: f64,
    opts: &GhostOptions,
) -> Result<GhostDescriptor> {
    if !theta_in.is_finite() || theta_in.abs() > opts.paraxial_cap {
        return Err(Error::invalid(format!(
            "incidence angle {theta_in} rad exceeds the paraxial cap {}",
            opts.paraxial_cap
        )));
    }
    if !(focal_scale > 0.0 && focal_scale.is_finite()) {
        return Err(Error::invalid("focal scale must be positive"));
    }
    let direct = direct_system_matrix(lens)?;
    if direct.b == 0.0 || !direct.b.is_finite() {
        return Err(Error::NumericDegenerate(
            "direct path maps every chief ray to the axis".into(),
        ));
    }
    let path = OpticalPath::ghost(lens, pair)?;
    let ghost = path.system_matrix(lens)?;

    let chief = RayState::new(0.0, theta_in);
    let rho = if theta_in == 0.0 {
        ghost.b / direct.b
    } else {
        ghost.apply(chief).r / direct.apply(chief).r
    };

    let (i, j) = pair;
    let s = lens.interfaces();
    let entrance = s[0].semi_aperture;
    let upper = RayState::new(entrance, theta_in);
    let lower = RayState::new(-entrance, theta_in);
    let (upper_out, clip_upper) = path.trace_checked(lens, upper)?;
    let (lower_out, clip_lower) = path.trace_checked(lens, lower)?;
    let (_, clip_chief) = path.trace_checked(lens, chief)?;

    let radius_mm = 0.5 * (upper_out.r - lower_out.r).abs();
    let radius_px = radius_mm * focal_scale * s[i].thickness_scale * s[j].thickness_scale;

    let area = lens.aperture_shape().area(radius_px).max(1.0);
    let ri = interface_reflectance_rgb(lens, i, opts);
    let rj = interface_reflectance_rgb(lens, j, opts);
    let intensity_rgb = [0, 1, 2].map(|c| ri[c] * rj[c] / area);

    Ok(GhostDescriptor {
        pair,
        rho,
        radius_px,
        intensity_rgb,
        clipped: clip_upper || clip_lower || clip_chief,
    })
}

/// Every ghost of `lens` at one incidence angle.
pub fn ghost_table(
    lens: &LensPrescription,
    theta_in: f64,
    focal_scale: f64,
    opts: &GhostOptions,
) -> Result<Vec<GhostDescriptor>> {
    enumerate_ghosts(lens)
        .into_iter()
        .map(|pair| ghost_geometry(lens, pair, theta_in, focal_scale, opts))
        .collect()
}

/// Pixels per sensor millimetre such that a source `half_diagonal_px` from the
/// image centre arrives at `field_angle` radians.
pub fn focal_scale_for_field(
    lens: &LensPrescription,
    half_diagonal_px: f64,
    field_angle: f64,
) -> Result<f64> {
    if !(field_angle > 0.0 && half_diagonal_px > 0.0) {
        return Err(Error::invalid("field angle and half diagonal must be positive"));
    }
    let direct = direct_system_matrix(lens)?;
    if direct.b == 0.0 {
        return Err(Error::NumericDegenerate("direct path has zero focal length".into()));
    }
    Ok(half_diagonal_px / (direct.b.abs() * field_angle))
}

/// Signed incidence angle of a source imaged `offset_px` from the centre.
pub fn incidence_angle(lens: &LensPrescription, offset_px: f64, focal_scale: f64) -> Result<f64> {
    let direct = direct_system_matrix(lens)?;
    if direct.b == 0.0 {
        return Err(Error::NumericDegenerate("direct path has zero focal length".into()));
    }
    Ok(offset_px / (focal_scale * direct.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::lens::{ApertureShape, LensInterface};

    fn stack(curved: usize) -> LensPrescription {
        let mut s: Vec<LensInterface> = (0..curved)
            .map(|k| {
                let r = if k % 2 == 0 { 60.0 } else { -80.0 };
                let n = if k % 2 == 0 { 1.6 } else { 1.0 };
                LensInterface::curved(r, 2.0, n, 20.0)
            })
            .collect();
        s.push(LensInterface::plane(30.0, 1.0, 10.0));
        LensPrescription::new(s, curved, ApertureShape::Circle, 30.0).unwrap()
    }

    fn brute_force_pairs(lens: &LensPrescription) -> usize {
        let n = lens.len();
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if i < j && !lens.interfaces()[i].is_flat() && !lens.interfaces()[j].is_flat() {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn ghost_counts_follow_pair_law() {
        for (k, expected) in [(1, 0), (4, 6), (10, 45), (29, 406)] {
            let lens = stack(k);
            let pairs = enumerate_ghosts(&lens);
            assert_eq!(pairs.len(), expected);
            assert_eq!(pairs.len(), brute_force_pairs(&lens));
            assert!(pairs.iter().all(|&(i, j)| i < j));
        }
        // two elements have four air-glass interfaces: 2n^2 - n = 6
        let n = 2;
        assert_eq!(enumerate_ghosts(&stack(2 * n)).len(), 2 * n * n - n);
    }

    #[test]
    fn default_lens_excludes_the_stop() {
        let lens = LensPrescription::default_lens();
        let pairs = enumerate_ghosts(&lens);
        assert_eq!(pairs.len(), 28 * 27 / 2);
        let stop = lens.aperture_index();
        assert!(pairs.iter().all(|&(i, j)| i != stop && j != stop));
    }

    #[test]
    fn flat_unit_index_ghost_is_pure_translation() {
        // Flat planes never pair, so use effectively flat curved surfaces.
        let d = [3.0, 5.0, 7.0, 11.0];
        let mut s: Vec<LensInterface> = d
            .iter()
            .map(|&dist| LensInterface::curved(1e15, dist, 1.0, 10.0))
            .collect();
        s.push(LensInterface::plane(13.0, 1.0, 10.0));
        let lens = LensPrescription::new(s, 4, ApertureShape::Circle, 13.0).unwrap();
        let h = ghost_system_matrix(&lens, (1, 3)).unwrap();
        let forward: f64 = d.iter().sum::<f64>() + 13.0;
        let bounce = 2.0 * (5.0 + 7.0);
        let expected = translation_matrix(forward + bounce).unwrap();
        assert!(h.max_abs_diff(&expected) < 1e-9, "{h}");
    }

    #[test]
    fn ghost_path_notation_for_adjacent_pair() {
        let lens = stack(6);
        let path = OpticalPath::ghost(&lens, (2, 3)).unwrap();
        assert_eq!(
            path.notation(),
            "T7 R7 T6 R6 T5 R5 T4 R4 T3 L3 T3 L4 T3 R3 T2 R2 T1 R1"
        );
        let path = OpticalPath::ghost(&lens, (1, 4)).unwrap();
        assert!(path.notation().contains("R3 T2 L2 T2 R3^-1 T3 R4^-1 T4 L5"));
    }

    #[test]
    fn pair_validation() {
        let lens = stack(4);
        assert!(ghost_system_matrix(&lens, (2, 2)).is_err());
        assert!(ghost_system_matrix(&lens, (3, 1)).is_err());
        assert!(ghost_system_matrix(&lens, (1, 9)).is_err());
        assert!(ghost_system_matrix(&lens, (1, 4)).is_err(), "stop is flat");
    }

    #[test]
    fn geometry_rejects_angles_past_the_cap() {
        let lens = LensPrescription::default_lens();
        let opts = GhostOptions::default();
        assert!(ghost_geometry(&lens, (0, 1), 0.36, 10.0, &opts).is_err());
        assert!(ghost_geometry(&lens, (0, 1), -0.36, 10.0, &opts).is_err());
        assert!(ghost_geometry(&lens, (0, 1), 0.34, 10.0, &opts).is_ok());
        assert!(ghost_geometry(&lens, (0, 1), 0.1, 0.0, &opts).is_err());
    }

    #[test]
    fn degenerate_direct_path_is_reported() {
        // Zero-length lens focused on itself: every chief ray stays on the axis.
        let s = vec![
            LensInterface::curved(50.0, 0.0, 1.0, 5.0),
            LensInterface::curved(-50.0, 0.0, 1.0, 5.0),
            LensInterface::plane(0.0, 1.0, 5.0),
        ];
        let lens = LensPrescription::new(s, 2, ApertureShape::Circle, 0.0).unwrap();
        let err = ghost_geometry(&lens, (0, 1), 0.1, 10.0, &GhostOptions::default());
        assert!(matches!(err, Err(Error::NumericDegenerate(_))));
    }

    #[test]
    fn rho_at_zero_angle_uses_the_limit() {
        let lens = LensPrescription::default_lens();
        let opts = GhostOptions::default();
        for &pair in enumerate_ghosts(&lens).iter().take(40) {
            let a = ghost_geometry(&lens, pair, 0.0, 10.0, &opts).unwrap();
            let b = ghost_geometry(&lens, pair, 0.05, 10.0, &opts).unwrap();
            assert!((a.rho - b.rho).abs() <= 1e-9 * a.rho.abs().max(1.0));
        }
    }

    #[test]
    fn radius_scales_with_entrance_aperture() {
        let lens = LensPrescription::default_lens();
        let wide = lens.clone().with_scaled_entrance(2.0).unwrap();
        let opts = GhostOptions::default();
        for &pair in enumerate_ghosts(&lens).iter().step_by(17) {
            let a = ghost_geometry(&lens, pair, 0.05, 8.0, &opts).unwrap();
            let b = ghost_geometry(&wide, pair, 0.05, 8.0, &opts).unwrap();
            assert!((b.radius_px - 2.0 * a.radius_px).abs() <= 1e-9 * a.radius_px.max(1.0));
        }
    }

    #[test]
    fn clipping_is_monotone_in_angle() {
        let lens = LensPrescription::default_lens();
        let opts = GhostOptions::default();
        for pair in enumerate_ghosts(&lens) {
            let mut seen = false;
            for step in 0..=35 {
                let theta = step as f64 / 100.0;
                let g = ghost_geometry(&lens, pair, theta, 10.0, &opts).unwrap();
                assert!(!(seen && !g.clipped), "pair {pair:?} unclipped at {theta}");
                seen |= g.clipped;
                assert!(g.intensity_rgb.iter().all(|v| v.is_finite() && *v >= 0.0));
                assert!(g.radius_px >= 0.0);
            }
        }
    }
}

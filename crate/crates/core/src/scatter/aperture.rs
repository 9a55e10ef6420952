//! Pupil masks: circular or hexagonal openings with scratch and dust occluders.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Plane;
use crate::optics::ApertureShape;
use crate::par::{self, Exec};

/// An obstruction on the pupil, in unit-square coordinates (`x` to the right,
/// `y` down, the opening centred at `(0.5, 0.5)` with circumradius 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Occluder {
    /// A straight scratch: a `length × width` bar along direction `angle` (rad).
    Line {
        center: [f64; 2],
        angle: f64,
        width: f64,
        length: f64,
        opacity: f64,
    },
    /// A round dust speck.
    Speck {
        center: [f64; 2],
        radius: f64,
        opacity: f64,
    },
}

impl Occluder {
    fn opacity(&self) -> f64 {
        match *self {
            Occluder::Line { opacity, .. } | Occluder::Speck { opacity, .. } => opacity,
        }
    }

    fn center(&self) -> [f64; 2] {
        match *self {
            Occluder::Line { center, .. } | Occluder::Speck { center, .. } => center,
        }
    }

    fn covers(&self, x: f64, y: f64) -> bool {
        match *self {
            Occluder::Line {
                center,
                angle,
                width,
                length,
                ..
            } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let (s, c) = angle.sin_cos();
                let along = dx * c + dy * s;
                let across = -dx * s + dy * c;
                along.abs() <= 0.5 * length && across.abs() <= 0.5 * width
            }
            Occluder::Speck { center, radius, .. } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// The same occluder rotated by `phi` about the pupil centre.
    pub fn rotated(&self, phi: f64) -> Occluder {
        let rot = |c: [f64; 2]| {
            let (s, co) = phi.sin_cos();
            let (dx, dy) = (c[0] - 0.5, c[1] - 0.5);
            [0.5 + dx * co - dy * s, 0.5 + dx * s + dy * co]
        };
        match *self {
            Occluder::Line {
                center,
                angle,
                width,
                length,
                opacity,
            } => Occluder::Line {
                center: rot(center),
                angle: angle + phi,
                width,
                length,
                opacity,
            },
            Occluder::Speck {
                center,
                radius,
                opacity,
            } => Occluder::Speck {
                center: rot(center),
                radius,
                opacity,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureSpec {
    pub shape: ApertureShape,
    /// Grid size `N` (power of two, at least 64).
    pub resolution: usize,
    /// Fraction of the grid spanned by the unit square; the rest is zero padding.
    pub fill: f64,
    pub occluders: Vec<Occluder>,
}

impl ApertureSpec {
    pub fn open(shape: ApertureShape, resolution: usize) -> Self {
        ApertureSpec {
            shape,
            resolution,
            fill: 0.5,
            occluders: Vec::new(),
        }
    }

    pub fn with_occluder(mut self, occluder: Occluder) -> Self {
        self.occluders.push(occluder);
        self
    }

    pub fn rotated(&self, phi: f64) -> ApertureSpec {
        ApertureSpec {
            occluders: self.occluders.iter().map(|o| o.rotated(phi)).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.resolution;
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "aperture resolution {n} must be a power of two >= 64"
            )));
        }
        if !(self.fill > 0.0 && self.fill <= 1.0) {
            return Err(Error::invalid(format!("aperture fill {} outside (0, 1]", self.fill)));
        }
        for (k, o) in self.occluders.iter().enumerate() {
            let [cx, cy] = o.center();
            if !((0.0..=1.0).contains(&cx) && (0.0..=1.0).contains(&cy)) {
                return Err(Error::invalid(format!("occluder {k} centre outside the unit square")));
            }
            if !(0.0..=1.0).contains(&o.opacity()) {
                return Err(Error::invalid(format!("occluder {k} opacity outside [0, 1]")));
            }
            let sizes_ok = match *o {
                Occluder::Line { width, length, angle, .. } => {
                    width > 0.0 && length > 0.0 && width <= 1.0 && length <= 2.0 && angle.is_finite()
                }
                Occluder::Speck { radius, .. } => radius > 0.0 && radius <= 1.0,
            };
            if !sizes_ok {
                return Err(Error::invalid(format!("occluder {k} has invalid size")));
            }
        }
        Ok(())
    }

    fn transmittance(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - 0.5, y - 0.5);
        let inside = match self.shape {
            ApertureShape::Circle => dx * dx + dy * dy <= 0.25,
            ApertureShape::Hexagon => {
                // flat-top regular hexagon, circumradius 0.5
                let (ax, ay) = (dx.abs(), dy.abs());
                let r = 0.5;
                ay <= 0.5 * 3f64.sqrt() * r && 3f64.sqrt() * ax + ay <= 3f64.sqrt() * r
            }
        };
        if !inside {
            return 0.0;
        }
        self.occluders
            .iter()
            .filter(|o| o.covers(x, y))
            .fold(1.0, |t, o| t * (1.0 - o.opacity()))
    }
}

/// `N × N` transmittance in [0, 1], 2× supersampled per axis.
pub fn aperture_mask(spec: &ApertureSpec, exec: Exec) -> Result<Plane> {
    spec.validate()?;
    let n = spec.resolution;
    let span = spec.fill * n as f64;
    let to_unit = |p: f64| (p - n as f64 / 2.0) / span + 0.5;
    let mut mask = Plane::new(n, n);
    par::for_each_row_mut(exec, mask.data_mut(), n, |row, out| {
        for (col, v) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for sy in [0.25, 0.75] {
                for sx in [0.25, 0.75] {
                    let x = to_unit(col as f64 + sx);
                    let y = to_unit(row as f64 + sy);
                    acc += spec.transmittance(x, y);
                }
            }
            *v = 0.25 * acc;
        }
    });
    Ok(mask)
}

/// Ranges used when drawing a random dirty aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OccluderRandomization {
    pub scratches: (usize, usize),
    pub specks: (usize, usize),
    pub scratch_width: (f64, f64),
    pub scratch_length: (f64, f64),
    pub speck_radius: (f64, f64),
    /// Opacities are drawn from `[0.1, max_opacity]`.
    pub max_opacity: f64,
}

impl Default for OccluderRandomization {
    fn default() -> Self {
        OccluderRandomization {
            scratches: (1, 3),
            specks: (2, 6),
            scratch_width: (0.004, 0.012),
            scratch_length: (0.3, 0.9),
            speck_radius: (0.01, 0.04),
            max_opacity: 0.6,
        }
    }
}

impl OccluderRandomization {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a > 0.0 && a <= b;
        if self.scratches.0 > self.scratches.1 || self.specks.0 > self.specks.1 {
            return Err(Error::Config("occluder count ranges must satisfy min <= max".into()));
        }
        if !(ordered(self.scratch_width) && ordered(self.scratch_length) && ordered(self.speck_radius))
        {
            return Err(Error::Config("occluder size ranges must be positive with min <= max".into()));
        }
        if !(0.1..=1.0).contains(&self.max_opacity) {
            return Err(Error::Config("max_opacity must lie in [0.1, 1]".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Occluder> {
        let range = |rng: &mut R, (a, b): (f64, f64)| if a == b { a } else { rng.gen_range(a..b) };
        let mut out = Vec::new();
        let scratches = rng.gen_range(self.scratches.0..=self.scratches.1);
        for _ in 0..scratches {
            out.push(Occluder::Line {
                center: [rng.gen_range(0.25..0.75), rng.gen_range(0.25..0.75)],
                angle: rng.gen_range(0.0..PI),
                width: range(rng, self.scratch_width),
                length: range(rng, self.scratch_length),
                opacity: range(rng, (0.1, self.max_opacity)),
            });
        }
        let specks = rng.gen_range(self.specks.0..=self.specks.1);
        for _ in 0..specks {
            out.push(Occluder::Speck {
                center: [rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85)],
                radius: range(rng, self.speck_radius),
                opacity: range(rng, (0.1, self.max_opacity)),
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(p: &Plane) -> f64 {
        p.data().iter().sum()
    }

    #[test]
    fn open_circle_is_fourfold_symmetric() {
        let m = aperture_mask(&ApertureSpec::open(ApertureShape::Circle, 128), Exec::Sequential)
            .unwrap();
        let n = 128;
        for y in 0..n {
            for x in 0..n {
                let v = m.get(x, y);
                assert!((v - m.get(y, x)).abs() < 1e-12);
                assert!((v - m.get(n - 1 - x, y)).abs() < 1e-12);
                assert!((v - m.get(x, n - 1 - y)).abs() < 1e-12);
            }
        }
        let span = 0.5 * n as f64;
        let expected = std::f64::consts::PI / 4.0 * span * span;
        assert!((sum(&m) - expected).abs() / expected < 0.01);
    }

    #[test]
    fn opaque_speck_over_everything_blocks_all_light() {
        let spec = ApertureSpec::open(ApertureShape::Hexagon, 64).with_occluder(Occluder::Speck {
            center: [0.5, 0.5],
            radius: 1.0,
            opacity: 1.0,
        });
        let m = aperture_mask(&spec, Exec::Sequential).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hexagon_to_circle_area_matches_analytic_ratio() {
        let circle = aperture_mask(&ApertureSpec::open(ApertureShape::Circle, 256), Exec::Sequential)
            .unwrap();
        let hex = aperture_mask(&ApertureSpec::open(ApertureShape::Hexagon, 256), Exec::Sequential)
            .unwrap();
        let expected = (3.0 * 3f64.sqrt() / 8.0) / (std::f64::consts::PI / 4.0);
        let ratio = sum(&hex) / sum(&circle);
        assert!((ratio - expected).abs() < 0.005, "ratio {ratio} expected {expected}");
    }

    #[test]
    fn partial_opacity_scales_transmittance() {
        let spec = ApertureSpec::open(ApertureShape::Circle, 64).with_occluder(Occluder::Speck {
            center: [0.5, 0.5],
            radius: 1.0,
            opacity: 0.25,
        });
        let m = aperture_mask(&spec, Exec::Sequential).unwrap();
        assert!((m.get(32, 32) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = ApertureSpec::open(ApertureShape::Circle, 64);
        assert!(aperture_mask(&ApertureSpec { resolution: 32, ..base.clone() }, Exec::Sequential).is_err());
        assert!(aperture_mask(&ApertureSpec { resolution: 96, ..base.clone() }, Exec::Sequential).is_err());
        assert!(aperture_mask(&ApertureSpec { fill: 0.0, ..base.clone() }, Exec::Sequential).is_err());
        let bad_opacity = base.clone().with_occluder(Occluder::Speck {
            center: [0.5, 0.5],
            radius: 0.1,
            opacity: 1.5,
        });
        assert!(aperture_mask(&bad_opacity, Exec::Sequential).is_err());
        let outside = base.with_occluder(Occluder::Line {
            center: [1.2, 0.5],
            angle: 0.0,
            width: 0.01,
            length: 0.5,
            opacity: 0.5,
        });
        assert!(aperture_mask(&outside, Exec::Sequential).is_err());
    }

    #[test]
    fn random_occluders_respect_the_opacity_cap() {
        use rand::SeedableRng;
        let cfg = OccluderRandomization::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            for o in cfg.sample(&mut rng) {
                assert!(o.opacity() <= 0.6 && o.opacity() >= 0.1);
            }
        }
    }
}

//! Synthetic clean scenes with exactly known motion, for demos and tests when
//! no real video is at hand.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flowio::{flow_file_name, FlowField};
use crate::image::Image;
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Largest per-axis speed in pixels per frame.
    pub max_speed: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 320,
            height: 240,
            frames: 240,
            max_speed: 1.5,
        }
    }
}

/// A dim textured plane translating at constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub velocity: (f64, f64),
    waves: Vec<(f64, f64, f64, f64)>,
    lights: Vec<(f64, f64, f64, f64)>,
    base: [f64; 3],
}

impl SyntheticScene {
    pub fn random<R: Rng + ?Sized>(spec: &SceneSpec, rng: &mut R) -> Self {
        let velocity = (
            rng.gen_range(-spec.max_speed..=spec.max_speed),
            rng.gen_range(-spec.max_speed..=spec.max_speed),
        );
        let waves = (0..6)
            .map(|_| {
                let wavelength = rng.gen_range(12.0..60.0);
                let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / wavelength;
                (k * dir.cos(), k * dir.sin(), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.01..0.03))
            })
            .collect();
        let (w, h) = (spec.width as f64, spec.height as f64);
        let lights = (0..12)
            .map(|_| {
                (
                    rng.gen_range(-0.2 * w..1.2 * w),
                    rng.gen_range(-0.2 * h..1.2 * h),
                    rng.gen_range(2.0..10.0),
                    rng.gen_range(0.1..0.6),
                )
            })
            .collect();
        let base = [rng.gen_range(0.03..0.1), rng.gen_range(0.03..0.1), rng.gen_range(0.05..0.14)];
        SyntheticScene {
            velocity,
            waves,
            lights,
            base,
        }
    }

    fn value(&self, x: f64, y: f64) -> [f64; 3] {
        let texture: f64 = self.waves.iter().map(|&(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum();
        let glow: f64 = self
            .lights
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum();
        [0, 1, 2].map(|c| (self.base[c] + texture + glow * [1.0, 0.85, 0.6][c]).clamp(0.0, 1.0))
    }

    /// Frame `t`: the texture shifted by `t · velocity`.
    pub fn frame(&self, t: usize, width: usize, height: usize) -> Image {
        let (dx, dy) = (self.velocity.0 * t as f64, self.velocity.1 * t as f64);
        let mut img = Image::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set_pixel(x, y, self.value(x as f64 - dx, y as f64 - dy));
            }
        }
        img
    }

    pub fn flow(&self, width: usize, height: usize) -> FlowField {
        FlowField::constant(width, height, self.velocity.0 as f32, self.velocity.1 as f32)
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
}

/// Writes `count` scenes as `out_dir/scene_%03d/frame_%05d.png`, and their
/// exact per-step flows as `flow_dir/scene_%03d/flow_%05d.flo` when asked.
pub fn write_synthetic_scenes(
    out_dir: &Path,
    flow_dir: Option<&Path>,
    count: usize,
    spec: &SceneSpec,
    seed: u64,
    exec: Exec,
) -> Result<Vec<SyntheticScene>> {
    if spec.width == 0 || spec.height == 0 || spec.frames == 0 {
        return Err(Error::invalid("synthetic scenes need a nonempty size and frame count"));
    }
    par::try_map_indexed(exec, count, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let scene = SyntheticScene::random(spec, &mut rng);
        let name = format!("scene_{s:03}");
        let dir = out_dir.join(&name);
        create_dir(&dir)?;
        for t in 0..spec.frames {
            scene
                .frame(t, spec.width, spec.height)
                .save_png(&dir.join(format!("frame_{t:05}.png")))?;
        }
        if let Some(fd) = flow_dir {
            let fdir = fd.join(&name);
            create_dir(&fdir)?;
            let flow = scene.flow(spec.width, spec.height);
            for t in 0..spec.frames - 1 {
                flow.save(&fdir.join(flow_file_name(t)))?;
            }
        }
        Ok(scene)
    })
}

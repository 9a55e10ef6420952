//! Optical-flow fields: Middlebury `.flo` I/O, sub-pixel sampling and a
//! classical pyramidal estimator used when no precomputed flow is supplied.

mod flo;
mod lk;

pub use flo::{flow_file_name, FLO_MAGIC};
pub use lk::{estimate_flow_pyramidal, LkParams};

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Plane;
use crate::par::{self, Exec};

/// Dense per-pixel displacement `(u, v)` in pixels per frame step.
///
/// Values are stored as `f32`, the precision of the `.flo` format, so a field
/// read from disk and a field about to be written are the same object.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        FlowField {
            width,
            height,
            data: vec![[u, v]; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f32, f32)) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                data.push([u, v]);
            }
        }
        FlowField {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} flow vectors for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("flow field contains non-finite values"));
        }
        Ok(FlowField {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[f32; 2]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let [u, v] = self.data[y * self.width + x];
        (u, v)
    }

    pub fn set(&mut self, x: usize, y: usize, u: f32, v: f32) {
        self.data[y * self.width + x] = [u, v];
    }

    /// Bilinear blend of the four neighbours of `(x, y)`; the position is
    /// first clamped to `[0, W−1] × [0, H−1]`. Integer positions return the
    /// stored vector exactly.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> (f64, f64) {
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, (self.width - 1) as f64) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, (self.height - 1) as f64) };
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let lerp = |a: f32, b: f32, t: f64| f64::from(a) * (1.0 - t) + f64::from(b) * t;
        let [u00, v00] = self.data[y0 * self.width + x0];
        let [u10, v10] = self.data[y0 * self.width + x1];
        let [u01, v01] = self.data[y1 * self.width + x0];
        let [u11, v11] = self.data[y1 * self.width + x1];
        let top_u = lerp(u00, u10, fx);
        let bot_u = lerp(u01, u11, fx);
        let top_v = lerp(v00, v10, fx);
        let bot_v = lerp(v01, v11, fx);
        (
            top_u * (1.0 - fy) + bot_u * fy,
            top_v * (1.0 - fy) + bot_v * fy,
        )
    }

    /// Area-resampled to `width × height`, with `u` and `v` rescaled to the
    /// new pixel pitch.
    pub fn resized(&self, width: usize, height: usize, exec: Exec) -> Result<FlowField> {
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let channel = |c: usize| {
            Plane::from_vec(
                self.width,
                self.height,
                self.data.iter().map(|d| f64::from(d[c])).collect(),
            )
            .and_then(|p| p.area_resample(width, height, exec))
        };
        let (u, v) = (channel(0)?, channel(1)?);
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let data = u
            .data()
            .iter()
            .zip(v.data())
            .map(|(&a, &b)| [(a * sx) as f32, (b * sy) as f32])
            .collect();
        FlowField::from_vec(width, height, data)
    }

    /// The displacement of following `flows` in order from each pixel:
    /// `p₁ = p₀ + f₀(p₀)`, `p₂ = p₁ + f₁(p₁)`, … and the result is `pₙ − p₀`.
    pub fn chain(flows: &[FlowField], exec: Exec) -> Result<FlowField> {
        let first = flows
            .first()
            .ok_or_else(|| Error::invalid("cannot chain an empty list of flows"))?;
        let (w, h) = first.dims();
        if let Some(f) = flows.iter().find(|f| f.dims() != (w, h)) {
            return Err(Error::invalid(format!(
                "flow sizes differ: {:?} vs {:?}",
                f.dims(),
                (w, h)
            )));
        }
        let mut data = vec![[0f32; 2]; w * h];
        par::for_each_row_mut(exec, &mut data, w.max(1), |y, row| {
            for (x, out) in row.iter_mut().enumerate() {
                let (mut px, mut py) = (x as f64, y as f64);
                for f in flows {
                    let (u, v) = f.sample_bilinear(px, py);
                    px += u;
                    py += v;
                }
                *out = [(px - x as f64) as f32, (py - y as f64) as f32];
            }
        });
        FlowField::from_vec(w, h, data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        FlowField::read_flo(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.write_flo()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integer_positions_are_exact() {
        let f = FlowField::from_fn(5, 4, |x, y| (x as f32 * 0.37 - y as f32, (x * y) as f32 * 1.1));
        for y in 0..4 {
            for x in 0..5 {
                let (u, v) = f.sample_bilinear(x as f64, y as f64);
                let (su, sv) = f.get(x, y);
                assert_eq!(u, f64::from(su));
                assert_eq!(v, f64::from(sv));
            }
        }
    }

    #[test]
    fn midpoint_is_the_average() {
        let f = FlowField::from_vec(2, 2, vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
            .unwrap();
        assert_eq!(f.sample_bilinear(0.5, 0.5), (1.0, 1.0));
    }

    #[test]
    fn constant_field_is_constant_everywhere() {
        let f = FlowField::constant(7, 3, 1.25, -0.5);
        for &(x, y) in &[(0.0, 0.0), (3.3, 1.7), (6.0, 2.0), (-4.0, 9.0), (100.0, -3.0)] {
            assert_eq!(f.sample_bilinear(x, y), (1.25, -0.5));
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        assert!(FlowField::from_vec(1, 1, vec![[f32::NAN, 0.0]]).is_err());
        assert!(FlowField::from_vec(2, 1, vec![[0.0, 0.0]]).is_err());
    }

    #[test]
    fn resize_rescales_vectors() {
        let f = FlowField::constant(16, 12, 4.0, -2.0);
        let g = f.resized(8, 3, Exec::Sequential).unwrap();
        assert_eq!(g.dims(), (8, 3));
        assert!(g.data().iter().all(|&[u, v]| u == 2.0 && v == -0.5));
        assert_eq!(f.resized(16, 12, Exec::Parallel).unwrap(), f);
    }

    #[test]
    fn chaining_constant_flows_adds_them() {
        let a = FlowField::constant(20, 10, 1.5, 0.25);
        let b = FlowField::constant(20, 10, -0.5, 1.0);
        let c = FlowField::chain(&[a.clone(), b, a], Exec::Sequential).unwrap();
        assert!(c.data().iter().all(|&[u, v]| u == 2.5 && v == 1.5));
        assert!(FlowField::chain(&[], Exec::Sequential).is_err());
    }

    #[test]
    fn chaining_follows_the_path() {
        // first step moves right by 2; the second field only moves x >= 2
        let a = FlowField::constant(6, 1, 2.0, 0.0);
        let b = FlowField::from_fn(6, 1, |x, _| (if x >= 2 { 1.0 } else { 0.0 }, 0.0));
        let c = FlowField::chain(&[a, b], Exec::Sequential).unwrap();
        assert_eq!(c.get(0, 0), (3.0, 0.0));
    }

    proptest! {
        #[test]
        fn sampling_is_lipschitz(
            vals in proptest::collection::vec(-5.0f32..5.0, 2 * 6 * 5),
            x in 0.0..5.0f64, y in 0.0..4.0f64,
            dx in -0.5..0.5f64, dy in -0.5..0.5f64,
        ) {
            let data: Vec<[f32; 2]> = vals.chunks(2).map(|c| [c[0], c[1]]).collect();
            let f = FlowField::from_vec(6, 5, data.clone()).unwrap();
            let mut lip = 0.0f64;
            for yy in 0..5 {
                for xx in 0..6 {
                    let here = data[yy * 6 + xx];
                    for (nx, ny) in [(xx + 1, yy), (xx, yy + 1)] {
                        if nx < 6 && ny < 5 {
                            let there = data[ny * 6 + nx];
                            for c in 0..2 {
                                lip = lip.max(f64::from((here[c] - there[c]).abs()));
                            }
                        }
                    }
                }
            }
            let delta = dx.abs().max(dy.abs());
            let (u0, v0) = f.sample_bilinear(x, y);
            let (u1, v1) = f.sample_bilinear(x + dx, y + dy);
            let bound = 2.0 * lip * delta + 1e-9;
            prop_assert!((u1 - u0).abs() <= bound);
            prop_assert!((v1 - v0).abs() <= bound);
        }
    }
}

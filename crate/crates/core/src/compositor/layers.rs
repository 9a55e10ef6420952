//! Flare layers that are not diffraction-based: the light source itself and
//! reflective ghost sprites.

use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::optics::ApertureShape;

/// A Gaussian blob standing in for the light source; `peak` is linear light
/// and usually above 1 so the core saturates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceBlob {
    pub sigma: f64,
    pub peak: f64,
}

impl Default for SourceBlob {
    fn default() -> Self {
        SourceBlob { sigma: 3.0, peak: 4.0 }
    }
}

pub fn render_source_blob(blob: &SourceBlob, center: (f64, f64), width: usize, height: usize) -> Image {
    let mut layer = Image::new(width, height);
    if blob.peak <= 0.0 || blob.sigma <= 0.0 || width == 0 || height == 0 {
        return layer;
    }
    let reach = 4.0 * blob.sigma;
    let x0 = (center.0 - reach).floor().max(0.0) as usize;
    let y0 = (center.1 - reach).floor().max(0.0) as usize;
    let x1 = ((center.0 + reach).ceil().max(-1.0) + 1.0).min(width as f64) as usize;
    let y1 = ((center.1 + reach).ceil().max(-1.0) + 1.0).min(height as f64) as usize;
    let k = -0.5 / (blob.sigma * blob.sigma);
    for y in y0..y1 {
        for x in x0..x1 {
            let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
            let v = blob.peak * ((dx * dx + dy * dy) * k).exp();
            layer.add_pixel(x, y, [v; 3]);
        }
    }
    layer
}

fn inside(shape: ApertureShape, dx: f64, dy: f64, r: f64) -> bool {
    match shape {
        ApertureShape::Circle => dx * dx + dy * dy <= r * r,
        ApertureShape::Hexagon => {
            let (ax, ay) = (dx.abs(), dy.abs());
            let s3 = 3f64.sqrt();
            ay <= 0.5 * s3 * r && s3 * ax + ay <= s3 * r
        }
    }
}

/// Adds a uniformly lit aperture-shaped ghost of circumradius `radius` at
/// `center`, `rgb` per unit of covered area (4×4 supersampled coverage).
pub fn render_ghost_sprite(
    layer: &mut Image,
    shape: ApertureShape,
    center: (f64, f64),
    radius: f64,
    rgb: [f64; 3],
) {
    let (w, h) = layer.dims();
    if radius <= 0.0 || w == 0 || h == 0 || rgb.iter().all(|&v| v == 0.0) {
        return;
    }
    let lo = |c: f64| (c - radius - 1.0).floor();
    let hi = |c: f64, n: usize| (c + radius + 1.0).ceil().min(n as f64 - 1.0);
    let (x0, x1) = (lo(center.0).max(0.0), hi(center.0, w));
    let (y0, y1) = (lo(center.1).max(0.0), hi(center.1, h));
    if x1 < x0 || y1 < y0 {
        return;
    }
    const SUB: usize = 4;
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let mut hits = 0;
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let px = x as f64 - 0.5 + (sx as f64 + 0.5) / SUB as f64;
                    let py = y as f64 - 0.5 + (sy as f64 + 0.5) / SUB as f64;
                    if inside(shape, px - center.0, py - center.1, radius) {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                let cov = hits as f64 / (SUB * SUB) as f64;
                layer.add_pixel(x, y, rgb.map(|v| v * cov));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_peaks_at_center() {
        let b = render_source_blob(&SourceBlob { sigma: 2.0, peak: 3.0 }, (10.0, 8.0), 20, 16);
        assert_eq!(b.pixel(10, 8), [3.0; 3]);
        let side = 3.0 * (-0.5f64 / 4.0).exp();
        assert!((b.pixel(11, 8)[0] - side).abs() < 1e-12);
        assert_eq!(b.pixel(0, 0), [0.0; 3]);
    }

    #[test]
    fn blob_off_frame_is_empty_and_disabled_blob_is_zero() {
        let b = render_source_blob(&SourceBlob { sigma: 2.0, peak: 3.0 }, (-100.0, 8.0), 20, 16);
        assert_eq!(b.sum(), 0.0);
        let z = render_source_blob(&SourceBlob { sigma: 2.0, peak: 0.0 }, (10.0, 8.0), 20, 16);
        assert_eq!(z.sum(), 0.0);
    }

    #[test]
    fn sprite_energy_matches_shape_area() {
        for shape in [ApertureShape::Circle, ApertureShape::Hexagon] {
            let mut l = Image::new(100, 100);
            render_ghost_sprite(&mut l, shape, (50.3, 49.6), 20.0, [1.0, 0.0, 0.0]);
            let want = shape.area(20.0);
            assert!((l.sum() - want).abs() / want < 0.01, "{shape}: {} vs {want}", l.sum());
        }
    }

    #[test]
    fn sprite_partially_outside_is_cropped() {
        let mut l = Image::new(40, 40);
        render_ghost_sprite(&mut l, ApertureShape::Circle, (0.0, 20.0), 10.0, [1.0; 3]);
        let half = 3.0 * ApertureShape::Circle.area(10.0) / 2.0;
        assert!(l.sum() > 0.9 * half && l.sum() < 1.2 * half);
        let mut far = Image::new(40, 40);
        render_ghost_sprite(&mut far, ApertureShape::Circle, (-50.0, 20.0), 10.0, [1.0; 3]);
        assert_eq!(far.sum(), 0.0);
    }
}

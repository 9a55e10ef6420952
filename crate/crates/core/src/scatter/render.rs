//! Rasterizing a PSF into a linear-light RGB layer.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::par::{self, Exec};
use crate::trajectory::SourcePosition;

use super::Psf;

/// Splats `psf` with its optical axis on `anchor`, scaled by
/// `intensity · tint[c]`. Every kernel pixel shares the same sub-pixel
/// fraction, so the bilinear splat is evaluated as a two-tap gather per axis.
pub fn render_scatter_layer(
    psf: &Psf,
    anchor: SourcePosition,
    intensity: f64,
    tint: [f64; 3],
    width: usize,
    height: usize,
    exec: Exec,
) -> Result<Image> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::invalid(format!("scatter intensity {intensity} must be >= 0")));
    }
    if tint.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::invalid("tint gains must be finite and nonnegative"));
    }
    if !(anchor.x.is_finite() && anchor.y.is_finite()) {
        return Err(Error::invalid("anchor is not finite"));
    }
    let mut layer = Image::new(width, height);
    if intensity == 0.0 || width == 0 || height == 0 {
        return Ok(layer);
    }
    let n = psf.size() as i64;
    let (cx, cy) = psf.center();
    let (ox, oy) = (anchor.x - cx, anchor.y - cy);
    let (ix, iy) = (ox.floor(), oy.floor());
    let (fx, fy) = (ox - ix, oy - iy);
    let (ix, iy) = (ix as i64, iy as i64);
    let gain = tint.map(|t| t * intensity);
    let k = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= n || y >= n {
            0.0
        } else {
            psf.get(x as usize, y as usize)
        }
    };
    let x_range = (ix.max(0), (ix + n + 1).min(width as i64));
    par::for_each_row_mut(exec, layer.data_mut(), width * 3, |row, out| {
        let ky = row as i64 - iy;
        if ky < 0 || ky > n {
            return;
        }
        for x in x_range.0..x_range.1 {
            let kx = x - ix;
            let v = (1.0 - fy) * ((1.0 - fx) * k(kx, ky) + fx * k(kx - 1, ky))
                + fy * ((1.0 - fx) * k(kx, ky - 1) + fx * k(kx - 1, ky - 1));
            let p = &mut out[x as usize * 3..x as usize * 3 + 3];
            for c in 0..3 {
                p[c] += v * gain[c];
            }
        }
    });
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::ApertureShape;
    use crate::scatter::{aperture_mask, diffraction_psf, ApertureSpec, Occluder};

    fn psf() -> Psf {
        let spec = ApertureSpec::open(ApertureShape::Hexagon, 128).with_occluder(Occluder::Line {
            center: [0.5, 0.5],
            angle: 0.5,
            width: 0.02,
            length: 0.8,
            opacity: 0.6,
        });
        diffraction_psf(&aperture_mask(&spec, Exec::Sequential).unwrap(), Exec::Sequential)
            .unwrap()
            .resampled(32, Exec::Sequential)
            .unwrap()
    }

    #[test]
    fn zero_intensity_gives_zero_layer() {
        let l = render_scatter_layer(&psf(), SourcePosition::new(50.0, 40.0), 0.0, [1.0; 3], 100, 80, Exec::Sequential)
            .unwrap();
        assert!(l.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interior_splat_conserves_energy() {
        let tint = [1.0, 0.8, 0.5];
        for (x, y) in [(50.0, 40.0), (50.3, 40.7), (49.99, 41.01)] {
            let l = render_scatter_layer(&psf(), SourcePosition::new(x, y), 2.5, tint, 100, 80, Exec::Sequential)
                .unwrap();
            let want = 2.5 * (1.0 + 0.8 + 0.5);
            assert!((l.sum() - want).abs() < 1e-9, "sum {} at ({x}, {y})", l.sum());
        }
    }

    #[test]
    fn integer_translation_is_exact() {
        let p = psf();
        let a = render_scatter_layer(&p, SourcePosition::new(40.25, 35.5), 1.0, [1.0; 3], 120, 90, Exec::Sequential)
            .unwrap();
        let b = render_scatter_layer(&p, SourcePosition::new(53.25, 42.5), 1.0, [1.0; 3], 120, 90, Exec::Sequential)
            .unwrap();
        for y in 0..80 {
            for x in 0..100 {
                let pa = a.pixel(x, y);
                let pb = b.pixel(x + 13, y + 7);
                for c in 0..3 {
                    assert!((pa[c] - pb[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn peak_lands_on_anchor() {
        let p = psf();
        let l = render_scatter_layer(&p, SourcePosition::new(60.0, 30.0), 1.0, [1.0; 3], 120, 90, Exec::Sequential)
            .unwrap();
        let lum = l.luminance();
        let (mut best, mut at) = (0.0, (0, 0));
        for y in 0..90 {
            for x in 0..120 {
                if lum.get(x, y) > best {
                    best = lum.get(x, y);
                    at = (x, y);
                }
            }
        }
        assert!((at.0 as i64 - 60).abs() <= 1 && (at.1 as i64 - 30).abs() <= 1, "peak at {at:?}");
    }

    #[test]
    fn edge_splat_is_cropped_and_modes_agree() {
        let p = psf();
        let a = render_scatter_layer(&p, SourcePosition::new(0.0, 79.0), 1.0, [1.0; 3], 100, 80, Exec::Sequential)
            .unwrap();
        let b = render_scatter_layer(&p, SourcePosition::new(0.0, 79.0), 1.0, [1.0; 3], 100, 80, Exec::Parallel)
            .unwrap();
        assert_eq!(a, b);
        assert!(a.sum() < 3.0 && a.sum() > 0.0);
    }

    #[test]
    fn rejects_bad_gains() {
        let p = psf();
        let at = SourcePosition::new(10.0, 10.0);
        assert!(render_scatter_layer(&p, at, -1.0, [1.0; 3], 20, 20, Exec::Sequential).is_err());
        assert!(render_scatter_layer(&p, at, 1.0, [1.0, f64::NAN, 1.0], 20, 20, Exec::Sequential).is_err());
    }
}

//! Fraunhofer point-spread functions: `|DFT(pupil)|²`, centred and normalized.
//!
//! The DFT is unnormalized, `F(k) = Σ m(n) e^{−2πi k·n/N}`, so before
//! normalization `Σ|F|² = N² Σ m²`.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::Plane;
use crate::par::{self, Exec};

pub const PSF1_MAGIC: &[u8; 4] = b"PSF1";

#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    size: usize,
    kernel: Vec<f64>,
    peak_index: (usize, usize),
    /// Optical axis in kernel pixel coordinates `(x, y)`.
    center: (f64, f64),
}

impl Psf {
    /// Normalizes `energy` (row-major `size × size`) to unit sum.
    pub fn from_energy(size: usize, energy: Vec<f64>, center: (f64, f64)) -> Result<Psf> {
        if size == 0 || energy.len() != size * size {
            return Err(Error::invalid(format!(
                "kernel of {} values is not {size}x{size}",
                energy.len()
            )));
        }
        if energy.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("kernel values must be finite and nonnegative"));
        }
        let total: f64 = energy.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateInput("kernel carries no energy".into()));
        }
        let kernel: Vec<f64> = energy.iter().map(|v| v / total).collect();
        let peak = kernel
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > kernel[best] { i } else { best });
        Ok(Psf {
            size,
            peak_index: (peak / size, peak % size),
            kernel,
            center,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// `(row, col)` of the largest entry (first in row-major order on ties).
    pub fn peak_index(&self) -> (usize, usize) {
        self.peak_index
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.kernel[y * self.size + x]
    }

    pub fn sum(&self) -> f64 {
        self.kernel.iter().sum()
    }

    /// Area-averaged to `size × size`, renormalized to unit sum.
    pub fn resampled(&self, size: usize, exec: Exec) -> Result<Psf> {
        if size == 0 {
            return Err(Error::invalid("target kernel size must be positive"));
        }
        if size == self.size {
            return Ok(self.clone());
        }
        let plane = Plane::from_vec(self.size, self.size, self.kernel.clone())?;
        let small = plane.area_resample(size, size, exec)?;
        let s = size as f64 / self.size as f64;
        let center = ((self.center.0 + 0.5) * s - 0.5, (self.center.1 + 0.5) * s - 0.5);
        Psf::from_energy(size, small.data().to_vec(), center)
    }

    /// `open + gain · (self − open)`, clipped at zero and renormalized; scales
    /// how much of the occluder-induced structure survives.
    pub fn with_streak_gain(&self, open: &Psf, gain: f64) -> Result<Psf> {
        if self.size != open.size {
            return Err(Error::invalid("streak gain needs kernels of equal size"));
        }
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::invalid(format!("streak gain {gain} must be >= 0")));
        }
        let blended = self
            .kernel
            .iter()
            .zip(&open.kernel)
            .map(|(&d, &o)| (o + gain * (d - o)).max(0.0))
            .collect();
        Psf::from_energy(self.size, blended, self.center)
    }

    /// Second central moments `(cxx, cyy, cxy)` about the optical axis, over a
    /// disc of `radius` pixels (the full grid when `None`).
    pub fn second_moments(&self, radius: Option<f64>) -> (f64, f64, f64) {
        let (cx, cy) = self.center;
        let r2 = radius.map(|r| r * r).unwrap_or(f64::INFINITY);
        let (mut w, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0);
        for y in 0..self.size {
            for x in 0..self.size {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy > r2 {
                    continue;
                }
                let v = self.get(x, y);
                w += v;
                xx += v * dx * dx;
                yy += v * dy * dy;
                xy += v * dx * dy;
            }
        }
        (xx / w, yy / w, xy / w)
    }

    /// Orientation of the major second-moment axis in `[0, π)`, measured from
    /// `+x` towards `+y`.
    pub fn principal_axis(&self, radius: Option<f64>) -> f64 {
        let (xx, yy, xy) = self.second_moments(radius);
        (0.5 * (2.0 * xy).atan2(xx - yy)).rem_euclid(std::f64::consts::PI)
    }

    pub fn write_psf1<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.size).map_err(|_| Error::invalid("kernel too large for PSF1"))?;
        let mut buf = Vec::with_capacity(8 + 4 * self.kernel.len());
        buf.extend_from_slice(PSF1_MAGIC);
        buf.extend_from_slice(&n.to_le_bytes());
        for &v in &self.kernel {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io("writing PSF1", e))
    }

    /// Reads a PSF1 grid. The optical axis is taken to be `(N/2, N/2)`; values
    /// are renormalized after the f32 round trip.
    pub fn read_psf1<R: Read>(mut r: R) -> Result<Psf> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("reading PSF1", e))?;
        if bytes.len() < 8 {
            return Err(Error::Format {
                offset: bytes.len(),
                message: "truncated PSF1 header".into(),
            });
        }
        if &bytes[..4] != PSF1_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad PSF1 magic".into(),
            });
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        if n == 0 {
            return Err(Error::Format {
                offset: 4,
                message: "PSF1 grid size is zero".into(),
            });
        }
        let expected = n
            .checked_mul(n)
            .and_then(|c| c.checked_mul(4))
            .and_then(|c| c.checked_add(8))
            .ok_or_else(|| Error::Format {
                offset: 4,
                message: "PSF1 grid size overflows".into(),
            })?;
        if bytes.len() != expected {
            return Err(Error::Format {
                offset: bytes.len().min(expected),
                message: format!("PSF1 payload is {} bytes, expected {expected}", bytes.len()),
            });
        }
        let values: Vec<f64> = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Format {
                offset: 8 + 4 * i,
                message: "PSF1 value is negative or not finite".into(),
            });
        }
        let c = (n / 2) as f64;
        Psf::from_energy(n, values, (c, c))
    }

    pub fn save_psf1(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_psf1(std::io::BufWriter::new(f))
    }

    pub fn load_psf1(path: &Path) -> Result<Psf> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Psf::read_psf1(std::io::BufReader::new(f))
    }
}

/// Unnormalized, centred `|DFT(mask)|²` for a square mask. DC lands on
/// `(N/2, N/2)`.
pub fn diffraction_energy(mask: &Plane, exec: Exec) -> Result<Plane> {
    let (w, h) = mask.dims();
    if w != h || w == 0 {
        return Err(Error::invalid(format!("mask must be square, got {w}x{h}")));
    }
    let n = w;
    if mask.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mask contains non-finite values"));
    }
    if mask.data().iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("aperture mask is all zero".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = mask.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    par::for_each_row_mut(exec, &mut buf, n, |_, row| fft.process(row));
    let mut t = vec![Complex::new(0.0, 0.0); n * n];
    for y in 0..n {
        for x in 0..n {
            t[x * n + y] = buf[y * n + x];
        }
    }
    par::for_each_row_mut(exec, &mut t, n, |_, row| fft.process(row));
    // t[kx * n + ky] = F(ky, kx)
    let half = n / 2;
    let mut out = Plane::new(n, n);
    par::for_each_row_mut(exec, out.data_mut(), n, |row, dst| {
        let ky = (row + n - half) % n;
        for (col, v) in dst.iter_mut().enumerate() {
            let kx = (col + n - half) % n;
            *v = t[kx * n + ky].norm_sqr();
        }
    });
    Ok(out)
}

pub fn diffraction_psf(mask: &Plane, exec: Exec) -> Result<Psf> {
    let energy = diffraction_energy(mask, exec)?;
    let n = energy.width();
    let c = (n / 2) as f64;
    Psf::from_energy(n, energy.data().to_vec(), (c, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::ApertureShape;
    use crate::scatter::{aperture_mask, ApertureSpec, Occluder};
    use std::f64::consts::PI;

    fn scratched(angle: f64, n: usize) -> ApertureSpec {
        ApertureSpec::open(ApertureShape::Circle, n).with_occluder(Occluder::Line {
            center: [0.5, 0.5],
            angle,
            width: 0.03,
            length: 1.0,
            opacity: 1.0,
        })
    }

    fn axis_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn open_square_gives_separable_sinc_squared() {
        // A centred block of width L: |F(k)|² = (sin(πkL/N) / sin(πk/N))², per axis.
        let n = 64;
        let l = 16;
        let lo = (n - l) / 2;
        let mask = Plane::from_fn(n, n, |x, y| {
            if (lo..lo + l).contains(&x) && (lo..lo + l).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let e = diffraction_energy(&mask, Exec::Sequential).unwrap();
        let dirichlet = |k: i64| {
            if k == 0 {
                (l * l) as f64
            } else {
                let a = PI * k as f64 / n as f64;
                ((a * l as f64).sin() / a.sin()).powi(2)
            }
        };
        for y in 0..n {
            for x in 0..n {
                let (kx, ky) = (x as i64 - 32, y as i64 - 32);
                let want = dirichlet(kx) * dirichlet(ky);
                assert!((e.get(x, y) - want).abs() < 1e-6 * (l * l * l * l) as f64);
            }
        }
        let psf = diffraction_psf(&mask, Exec::Sequential).unwrap();
        assert_eq!(psf.peak_index(), (32, 32));
    }

    #[test]
    fn parseval_holds() {
        let spec = scratched(0.4, 128).with_occluder(Occluder::Speck {
            center: [0.3, 0.6],
            radius: 0.05,
            opacity: 0.5,
        });
        let mask = aperture_mask(&spec, Exec::Sequential).unwrap();
        let e = diffraction_energy(&mask, Exec::Sequential).unwrap();
        let lhs: f64 = e.data().iter().sum();
        let rhs = (128.0 * 128.0) * mask.data().iter().map(|v| v * v).sum::<f64>();
        assert!((lhs - rhs).abs() / rhs < 1e-9);
    }

    #[test]
    fn normalized_and_nonnegative() {
        let mask = aperture_mask(&scratched(1.0, 64), Exec::Sequential).unwrap();
        let psf = diffraction_psf(&mask, Exec::Sequential).unwrap();
        assert!((psf.sum() - 1.0).abs() < 1e-9);
        assert!(psf.kernel().iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn zero_mask_is_degenerate() {
        let err = diffraction_psf(&Plane::new(64, 64), Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
        assert!(diffraction_psf(&Plane::new(64, 32), Exec::Sequential).is_err());
    }

    #[test]
    fn vertical_scratch_streaks_horizontally() {
        let mask = aperture_mask(&scratched(PI / 2.0, 256), Exec::Sequential).unwrap();
        let psf = diffraction_psf(&mask, Exec::Sequential).unwrap();
        let axis = psf.principal_axis(Some(64.0));
        assert!(axis_diff(axis, 0.0) < 2f64.to_radians(), "axis {}", axis.to_degrees());
        let (xx, yy, _) = psf.second_moments(Some(64.0));
        assert!(xx > yy);
    }

    #[test]
    fn rotation_covariance() {
        let base = scratched(PI / 2.0, 256);
        let axis0 = diffraction_psf(&aperture_mask(&base, Exec::Parallel).unwrap(), Exec::Parallel)
            .unwrap()
            .principal_axis(Some(64.0));
        for deg in [15.0f64, 30.0, 45.0, 60.0] {
            let phi = deg.to_radians();
            let mask = aperture_mask(&base.rotated(phi), Exec::Parallel).unwrap();
            let axis = diffraction_psf(&mask, Exec::Parallel)
                .unwrap()
                .principal_axis(Some(64.0));
            let err = axis_diff(axis, axis0 + phi);
            assert!(err < 2f64.to_radians(), "phi {deg}: error {}", err.to_degrees());
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mask = aperture_mask(&scratched(0.7, 128), Exec::Parallel).unwrap();
        let a = diffraction_psf(&mask, Exec::Sequential).unwrap();
        let b = diffraction_psf(&mask, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resampling_keeps_unit_sum_and_axis() {
        let mask = aperture_mask(&scratched(PI / 2.0, 256), Exec::Sequential).unwrap();
        let psf = diffraction_psf(&mask, Exec::Sequential).unwrap();
        let small = psf.resampled(64, Exec::Sequential).unwrap();
        assert_eq!(small.size(), 64);
        assert!((small.sum() - 1.0).abs() < 1e-9);
        // DC pixel 128 covers [128, 129) → [32, 32.25) at 1/4 scale, centre 32.125 − 0.5
        assert_eq!(small.center(), (31.625, 31.625));
        assert_eq!(small.peak_index(), (32, 32));
    }

    #[test]
    fn streak_gain_endpoints() {
        let open = diffraction_psf(
            &aperture_mask(&ApertureSpec::open(ApertureShape::Circle, 64), Exec::Sequential).unwrap(),
            Exec::Sequential,
        )
        .unwrap();
        let dirty =
            diffraction_psf(&aperture_mask(&scratched(0.3, 64), Exec::Sequential).unwrap(), Exec::Sequential)
                .unwrap();
        let g0 = dirty.with_streak_gain(&open, 0.0).unwrap();
        let g1 = dirty.with_streak_gain(&open, 1.0).unwrap();
        for i in 0..open.kernel().len() {
            assert!((g0.kernel()[i] - open.kernel()[i]).abs() < 1e-12);
            assert!((g1.kernel()[i] - dirty.kernel()[i]).abs() < 1e-12);
        }
        assert!(dirty.with_streak_gain(&open, -1.0).is_err());
    }

    #[test]
    fn psf1_round_trip_and_errors() {
        let mask = aperture_mask(&scratched(0.3, 64), Exec::Sequential).unwrap();
        let psf = diffraction_psf(&mask, Exec::Sequential).unwrap();
        let mut bytes = Vec::new();
        psf.write_psf1(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 64 * 64 * 4);
        assert_eq!(&bytes[..4], b"PSF1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 64);
        let back = Psf::read_psf1(bytes.as_slice()).unwrap();
        assert_eq!(back.size(), 64);
        assert_eq!(back.center(), psf.center());
        for (a, b) in back.kernel().iter().zip(psf.kernel()) {
            assert!((a - b).abs() < 1e-6 * b.max(1e-12) + 1e-12);
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Psf::read_psf1(bad.as_slice()), Err(Error::Format { offset: 0, .. })));
        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(Psf::read_psf1(short), Err(Error::Format { .. })));
        assert!(Psf::read_psf1(&bytes[..5]).is_err());
    }
}

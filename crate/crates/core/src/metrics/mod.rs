//! Restoration metrics: PSNR, masked PSNR, SSIM, temporal PSNR and the
//! Charbonnier objective. Exact matches give `f64::INFINITY` dB.

mod report;

pub use report::{score_sequences, FrameMetrics, MetricsReport, SequenceFrames};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, Image, Mask};
use crate::par::{self, Exec};

pub const DEFAULT_CHARBONNIER_EPSILON: f64 = 1e-3;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn db(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    ensure_same_dims(a.dims(), b.dims())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.data().len();
    if n == 0 {
        return Err(Error::invalid("images are empty"));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / n as f64)
}

/// `10·log10(1 / MSE)` over all channels; peak 1.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    mse(a, b).map(db)
}

/// PSNR with the MSE averaged over masked pixels only (all three channels).
pub fn psnr_masked(a: &Image, b: &Image, mask: &Mask) -> Result<f64> {
    check_pair(a, b)?;
    ensure_same_dims(a.dims(), mask.dims())?;
    let count = mask.count();
    if count == 0 {
        return Err(Error::DegenerateInput("mask selects no pixels".into()));
    }
    let mut s = 0.0;
    for (i, &m) in mask.data().iter().enumerate() {
        if m {
            for c in 0..3 {
                let d = a.data()[3 * i + c] - b.data()[3 * i + c];
                s += d * d;
            }
        }
    }
    Ok(db(s / (3 * count) as f64))
}

fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut taps = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.map(|t| t / s)
}

/// Valid-region separable filter of one channel-plane product stream.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64], exec: Exec) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut horiz = vec![0.0; ow * h];
    par::for_each_row_mut(exec, &mut horiz, ow, |y, row| {
        let line = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            *out = taps.iter().zip(&line[x..x + k]).map(|(t, v)| t * v).sum();
        }
    });
    let mut out = vec![0.0; ow * oh];
    par::for_each_row_mut(exec, &mut out, ow, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * horiz[(y + j) * ow + x])
                .sum();
        }
    });
    out
}

/// Mean SSIM (11×11 Gaussian window, σ = 1.5, K1 = 0.01, K2 = 0.03, range 1)
/// over the valid region, averaged over channels.
pub fn ssim(a: &Image, b: &Image, exec: Exec) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h) = a.dims();
    let k = 2 * SSIM_RADIUS + 1;
    if w < k || h < k {
        return Err(Error::invalid(format!("SSIM needs at least {k}x{k} pixels, got {w}x{h}")));
    }
    let taps = gaussian_taps();
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let mut total = 0.0;
    for c in 0..3 {
        let pa: Vec<f64> = a.data().iter().skip(c).step_by(3).copied().collect();
        let pb: Vec<f64> = b.data().iter().skip(c).step_by(3).copied().collect();
        let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            pa.iter().zip(&pb).map(|(&x, &y)| f(x, y)).collect()
        };
        let mu_a = filter_valid(&pa, w, h, &taps, exec);
        let mu_b = filter_valid(&pb, w, h, &taps, exec);
        let aa = filter_valid(&prod(&|x, _| x * x), w, h, &taps, exec);
        let bb = filter_valid(&prod(&|_, y| y * y), w, h, &taps, exec);
        let ab = filter_valid(&prod(&|x, y| x * y), w, h, &taps, exec);
        let n = mu_a.len();
        let s: f64 = (0..n)
            .map(|i| {
                let (ma, mb) = (mu_a[i], mu_b[i]);
                let va = aa[i] - ma * ma;
                let vb = bb[i] - mb * mb;
                let cov = ab[i] - ma * mb;
                ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
            })
            .sum();
        total += s / n as f64;
    }
    Ok(total / 3.0)
}

/// PSNR between the temporal difference sequences `a[t+1] − a[t]` and
/// `b[t+1] − b[t]`, with the MSE pooled over every difference frame.
pub fn tpsnr(seq_a: &[Image], seq_b: &[Image]) -> Result<f64> {
    if seq_a.len() != seq_b.len() {
        return Err(Error::invalid(format!(
            "sequence lengths differ: {} vs {}",
            seq_a.len(),
            seq_b.len()
        )));
    }
    if seq_a.len() < 2 {
        return Err(Error::invalid("tPSNR needs at least two frames"));
    }
    let dims = seq_a[0].dims();
    for f in seq_a.iter().chain(seq_b) {
        ensure_same_dims(f.dims(), dims)?;
    }
    let mut s = 0.0;
    let mut n = 0usize;
    for t in 0..seq_a.len() - 1 {
        let (a0, a1, b0, b1) = (&seq_a[t], &seq_a[t + 1], &seq_b[t], &seq_b[t + 1]);
        for i in 0..a0.data().len() {
            let d = (a1.data()[i] - a0.data()[i]) - (b1.data()[i] - b0.data()[i]);
            s += d * d;
        }
        n += a0.data().len();
    }
    if n == 0 {
        return Err(Error::invalid("frames are empty"));
    }
    Ok(db(s / n as f64))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon {epsilon} must be positive")))
    }
}

/// Element-wise mean of `sqrt((a − b)² + ε²)`.
pub fn charbonnier(a: &Image, b: &Image, epsilon: f64) -> Result<f64> {
    check_pair(a, b)?;
    check_epsilon(epsilon)?;
    let n = a.data().len();
    if n == 0 {
        return Err(Error::invalid("images are empty"));
    }
    let e2 = epsilon * epsilon;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| ((x - y) * (x - y) + e2).sqrt())
        .sum();
    Ok(s / n as f64)
}

/// `sqrt(‖a − b‖² + ε²)` over the whole tensor.
pub fn charbonnier_tensor(a: &Image, b: &Image, epsilon: f64) -> Result<f64> {
    check_pair(a, b)?;
    check_epsilon(epsilon)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s + epsilon * epsilon).sqrt())
}

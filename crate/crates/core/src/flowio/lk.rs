//! Dense coarse-to-fine Lucas-Kanade.
//!
//! Each pyramid level refines the upsampled flow from the level above by
//! warping the second frame, solving the windowed 2×2 structure-tensor
//! system per pixel, and adding the increment. Pixels whose tensor is rank
//! deficient (smallest eigenvalue below `min_eigenvalue`) keep their current
//! flow, so textureless input yields exactly zero flow.

use serde::{Deserialize, Serialize};

use super::FlowField;
use crate::error::{Error, Result};
use crate::image::Plane;
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LkParams {
    pub levels: usize,
    /// Window radius; the window is `(2r+1)²`.
    pub window_radius: usize,
    pub iterations: usize,
    /// Threshold on the smallest eigenvalue of the window-averaged tensor.
    pub min_eigenvalue: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            levels: 4,
            window_radius: 4,
            iterations: 5,
            min_eigenvalue: 1e-6,
        }
    }
}

/// Flow from `a` to `b`: a feature at `p` in `a` appears at `p + flow(p)` in `b`.
pub fn estimate_flow_pyramidal(
    a: &Plane,
    b: &Plane,
    params: &LkParams,
    exec: Exec,
) -> Result<FlowField> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "flow inputs differ in size: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if params.levels == 0 {
        return Err(Error::invalid("pyramid needs at least one level"));
    }
    if a.width() == 0 || a.height() == 0 {
        return Err(Error::invalid("flow inputs are empty"));
    }

    let pa = pyramid(a, params.levels, exec);
    let pb = pyramid(b, params.levels, exec);

    let coarsest = pa.len() - 1;
    let (w, h) = pa[coarsest].dims();
    let mut u = Plane::new(w, h);
    let mut v = Plane::new(w, h);

    for level in (0..pa.len()).rev() {
        let la = &pa[level];
        let lb = &pb[level];
        if level != coarsest {
            let (w, h) = la.dims();
            u = upsample_flow(&u, w, h);
            v = upsample_flow(&v, w, h);
        }
        let (gax, gay) = gradients(la, exec);
        let hessian = Hessian::new(&gax, &gay);
        for _ in 0..params.iterations {
            refine(la, lb, &gax, &gay, &hessian, &mut u, &mut v, params, exec);
        }
    }

    let (w, h) = a.dims();
    let data = u
        .data()
        .iter()
        .zip(v.data())
        .map(|(&du, &dv)| [du as f32, dv as f32])
        .collect();
    FlowField::from_vec(w, h, data)
}

fn pyramid(base: &Plane, levels: usize, exec: Exec) -> Vec<Plane> {
    let mut out = vec![base.clone()];
    while out.len() < levels {
        let last = out.last().expect("nonempty");
        if last.width() < 16 || last.height() < 16 {
            break;
        }
        out.push(pyr_down(last, exec));
    }
    out
}

/// 5-tap binomial blur followed by 2× decimation.
fn pyr_down(src: &Plane, exec: Exec) -> Plane {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = src.dims();
    let mut horiz = Plane::new(w, h);
    par::for_each_row_mut(exec, horiz.data_mut(), w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = K
                .iter()
                .enumerate()
                .map(|(k, c)| c * src.get_clamped(x as isize + k as isize - 2, y as isize))
                .sum();
        }
    });
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Plane::new(nw, nh);
    par::for_each_row_mut(exec, out.data_mut(), nw, |oy, row| {
        let y = 2 * oy;
        for (ox, out) in row.iter_mut().enumerate() {
            let x = 2 * ox;
            *out = K
                .iter()
                .enumerate()
                .map(|(k, c)| c * horiz.get_clamped(x as isize, y as isize + k as isize - 2))
                .sum();
        }
    });
    out
}

fn upsample_flow(coarse: &Plane, w: usize, h: usize) -> Plane {
    Plane::from_fn(w, h, |x, y| 2.0 * coarse.sample(x as f64 * 0.5, y as f64 * 0.5))
}

/// Central differences with replicated borders.
fn gradients(p: &Plane, exec: Exec) -> (Plane, Plane) {
    let (w, h) = p.dims();
    let mut gx = Plane::new(w, h);
    let mut gy = Plane::new(w, h);
    par::for_each_row_mut(exec, gx.data_mut(), w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let (x, y) = (x as isize, y as isize);
            *out = 0.5 * (p.get_clamped(x + 1, y) - p.get_clamped(x - 1, y));
        }
    });
    par::for_each_row_mut(exec, gy.data_mut(), w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let (x, y) = (x as isize, y as isize);
            *out = 0.5 * (p.get_clamped(x, y + 1) - p.get_clamped(x, y - 1));
        }
    });
    (gx, gy)
}

/// Summed-area table with a zero row and column prepended.
struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(p: &Plane) -> Self {
        let (w, h) = p.dims();
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += p.get(x, y);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Integral { width: w, sums }
    }

    /// Sum over `[x0, x1) × [y0, y1)`.
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.width + 1;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
            + self.sums[y0 * s + x0]
    }
}

/// Window sums of the gradient products of the first frame, which stay fixed
/// across iterations on one level.
struct Hessian {
    xx: Integral,
    xy: Integral,
    yy: Integral,
}

impl Hessian {
    fn new(gx: &Plane, gy: &Plane) -> Self {
        let (w, h) = gx.dims();
        let prod = |f: &dyn Fn(f64, f64) -> f64| {
            let data = gx.data().iter().zip(gy.data()).map(|(&a, &b)| f(a, b)).collect();
            Integral::new(&Plane::from_vec(w, h, data).expect("sized"))
        };
        Hessian {
            xx: prod(&|a, _| a * a),
            xy: prod(&|a, b| a * b),
            yy: prod(&|_, b| b * b),
        }
    }
}

/// One Gauss-Newton step per pixel. Each window is compared against `b`
/// warped by the flow of its centre pixel, with the Hessian taken from the
/// gradients of `a` (inverse compositional form).
#[allow(clippy::too_many_arguments)]
fn refine(
    a: &Plane,
    b: &Plane,
    gax: &Plane,
    gay: &Plane,
    hessian: &Hessian,
    u: &mut Plane,
    v: &mut Plane,
    params: &LkParams,
    exec: Exec,
) {
    let (w, h) = a.dims();
    let r = params.window_radius;
    let (cu, cv) = (&*u, &*v);
    let increments: Vec<Vec<(f64, f64)>> = par::map_indexed(exec, h, |y| {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        (0..w)
            .map(|x| {
                let x0 = x.saturating_sub(r);
                let x1 = (x + r + 1).min(w);
                let count = ((x1 - x0) * (y1 - y0)) as f64;
                let sxx = hessian.xx.rect(x0, y0, x1, y1);
                let sxy = hessian.xy.rect(x0, y0, x1, y1);
                let syy = hessian.yy.rect(x0, y0, x1, y1);
                let trace = (sxx + syy) / count;
                let det = (sxx * syy - sxy * sxy) / (count * count);
                let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
                if trace / 2.0 - disc < params.min_eigenvalue {
                    return (0.0, 0.0);
                }
                let (fu, fv) = (cu.get(x, y), cv.get(x, y));
                let (mut sxt, mut syt) = (0.0, 0.0);
                for qy in y0..y1 {
                    for qx in x0..x1 {
                        let it = b.sample(qx as f64 + fu, qy as f64 + fv) - a.get(qx, qy);
                        sxt += gax.get(qx, qy) * it;
                        syt += gay.get(qx, qy) * it;
                    }
                }
                let det_raw = sxx * syy - sxy * sxy;
                let du = -(syy * sxt - sxy * syt) / det_raw;
                let dv = -(sxx * syt - sxy * sxt) / det_raw;
                (du, dv)
            })
            .collect()
    });
    for (y, row) in increments.into_iter().enumerate() {
        for (x, (du, dv)) in row.into_iter().enumerate() {
            let i = y * w + x;
            u.data_mut()[i] += du;
            v.data_mut()[i] += dv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize, shift_x: f64) -> Plane {
        Plane::from_fn(w, h, |x, y| {
            let x = x as f64 - shift_x;
            let y = y as f64;
            0.5 + 0.2 * (0.31 * x + 0.17 * y).sin()
                + 0.15 * (0.13 * x - 0.29 * y).cos()
                + 0.1 * (0.07 * x * 0.9 + 0.21 * y).sin() * (0.19 * x).cos()
        })
    }

    #[test]
    fn extra_iterations_stay_converged() {
        let (a, b) = (texture(64, 48, 0.0), texture(64, 48, 2.0));
        for iterations in [5, 40] {
            let p = LkParams { iterations, ..LkParams::default() };
            let f = estimate_flow_pyramidal(&a, &b, &p, Exec::Sequential).unwrap();
            for y in 8..40 {
                for x in 8..56 {
                    let (u, v) = f.get(x, y);
                    assert!((u - 2.0).abs() < 1e-2 && v.abs() < 1e-2, "({x}, {y}): {u} {v}");
                }
            }
        }
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let a = texture(64, 48, 0.0);
        let f = estimate_flow_pyramidal(&a, &a, &LkParams::default(), Exec::Sequential).unwrap();
        for [u, v] in f.data() {
            assert!(u.hypot(*v) <= 1e-3);
        }
    }

    #[test]
    fn flat_frames_give_exactly_zero_flow() {
        let a = Plane::from_fn(40, 30, |_, _| 0.4);
        let b = Plane::from_fn(40, 30, |_, _| 0.6);
        let f = estimate_flow_pyramidal(&a, &b, &LkParams::default(), Exec::Sequential).unwrap();
        assert!(f.data().iter().all(|&[u, v]| u == 0.0 && v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = Plane::new(10, 10);
        let b = Plane::new(11, 10);
        assert!(estimate_flow_pyramidal(&a, &b, &LkParams::default(), Exec::Sequential).is_err());
        let p = LkParams {
            levels: 0,
            ..LkParams::default()
        };
        assert!(estimate_flow_pyramidal(&a, &a, &p, Exec::Sequential).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let a = texture(64, 48, 0.0);
        let b = texture(64, 48, 1.5);
        let p = LkParams::default();
        let s = estimate_flow_pyramidal(&a, &b, &p, Exec::Sequential).unwrap();
        let q = estimate_flow_pyramidal(&a, &b, &p, Exec::Parallel).unwrap();
        assert_eq!(s, q);
    }
}

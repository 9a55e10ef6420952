//! Paraxial ray-transfer (ABCD) matrices acting on meridional ray state `(r, θ)`.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of curvature of an interface. A plane is kept as its own variant so
/// that its power is exactly zero instead of `1 / huge`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Curvature {
    Flat,
    Radius(f64),
}

impl Curvature {
    /// `1 / R`, zero for a plane.
    pub fn inverse_radius(self) -> Result<f64> {
        match self {
            Curvature::Flat => Ok(0.0),
            Curvature::Radius(r) if r == 0.0 || !r.is_finite() => Err(Error::invalid(format!(
                "radius of curvature must be finite and nonzero, got {r}"
            ))),
            Curvature::Radius(r) => Ok(1.0 / r),
        }
    }

    pub fn is_flat(self) -> bool {
        matches!(self, Curvature::Flat)
    }
}

/// 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayTransferMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Height above the optical axis (mm) and paraxial angle (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub r: f64,
    pub theta: f64,
}

impl RayState {
    pub fn new(r: f64, theta: f64) -> Self {
        RayState { r, theta }
    }
}

impl RayTransferMatrix {
    pub const IDENTITY: RayTransferMatrix = RayTransferMatrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        RayTransferMatrix { a, b, c, d }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn inverse(&self) -> Result<RayTransferMatrix> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NumericDegenerate(format!(
                "cannot invert ray-transfer matrix with determinant {det}"
            )));
        }
        Ok(RayTransferMatrix {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        })
    }

    /// `next · self`: apply `self` first, then `next`.
    pub fn then(&self, next: &RayTransferMatrix) -> RayTransferMatrix {
        *next * *self
    }

    pub fn apply(&self, ray: RayState) -> RayState {
        RayState {
            r: self.a * ray.r + self.b * ray.theta,
            theta: self.c * ray.r + self.d * ray.theta,
        }
    }

    pub fn max_abs_diff(&self, other: &RayTransferMatrix) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }
}

impl Mul for RayTransferMatrix {
    type Output = RayTransferMatrix;

    fn mul(self, rhs: RayTransferMatrix) -> RayTransferMatrix {
        RayTransferMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

impl fmt::Display for RayTransferMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Free propagation over `d` millimetres.
pub fn translation_matrix(d: f64) -> Result<RayTransferMatrix> {
    if !d.is_finite() {
        return Err(Error::invalid(format!("translation distance must be finite, got {d}")));
    }
    Ok(RayTransferMatrix::new(1.0, d, 0.0, 1.0))
}

/// Refraction from index `n1` into index `n2` at a surface of the given curvature.
pub fn refraction_matrix(n1: f64, n2: f64, radius: Curvature) -> Result<RayTransferMatrix> {
    if !(n1 > 0.0 && n1.is_finite() && n2 > 0.0 && n2.is_finite()) {
        return Err(Error::invalid(format!(
            "refractive indices must be positive and finite, got {n1} and {n2}"
        )));
    }
    let inv_r = radius.inverse_radius()?;
    Ok(RayTransferMatrix::new(
        1.0,
        0.0,
        (n1 - n2) / n2 * inv_r,
        n1 / n2,
    ))
}

/// Mirror reflection at a surface of the given curvature.
pub fn reflection_matrix(radius: Curvature) -> Result<RayTransferMatrix> {
    let inv_r = radius.inverse_radius()?;
    Ok(RayTransferMatrix::new(1.0, 0.0, 2.0 * inv_r, 1.0))
}

/// Product of `factors` exactly as written: `factors[0] · factors[1] · …`.
///
/// The last element acts on the ray first, so a propagation sequence
/// `first, second, third` is passed as `[third, second, first]`.
pub fn compose(factors: &[RayTransferMatrix]) -> Result<RayTransferMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::invalid("cannot compose an empty matrix list"))?;
    Ok(rest.iter().fold(*first, |acc, m| acc * *m))
}

pub fn trace_ray(m: &RayTransferMatrix, ray: RayState) -> RayState {
    m.apply(ray)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &RayTransferMatrix, b: &RayTransferMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn translation_cases() {
        assert_eq!(translation_matrix(0.0).unwrap(), RayTransferMatrix::IDENTITY);
        assert_eq!(
            translation_matrix(10.0).unwrap(),
            RayTransferMatrix::new(1.0, 10.0, 0.0, 1.0)
        );
        let t7 = translation_matrix(3.0).unwrap() * translation_matrix(4.0).unwrap();
        assert_eq!(t7, translation_matrix(7.0).unwrap());
        assert!(translation_matrix(f64::NAN).is_err());
        assert!(translation_matrix(f64::INFINITY).is_err());
    }

    #[test]
    fn refraction_cases() {
        let m = refraction_matrix(1.5, 1.5, Curvature::Radius(37.0)).unwrap();
        assert_eq!(m, RayTransferMatrix::IDENTITY);

        let m = refraction_matrix(1.0, 1.5, Curvature::Radius(100.0)).unwrap();
        assert!(close(
            &m,
            &RayTransferMatrix::new(1.0, 0.0, -1.0 / 300.0, 2.0 / 3.0),
            1e-15
        ));

        let m = refraction_matrix(1.0, 1.5, Curvature::Flat).unwrap();
        assert_eq!(m, RayTransferMatrix::new(1.0, 0.0, 0.0, 1.0 / 1.5));

        assert!(refraction_matrix(0.0, 1.5, Curvature::Flat).is_err());
        assert!(refraction_matrix(1.0, -1.5, Curvature::Flat).is_err());
        assert!(refraction_matrix(1.0, 1.5, Curvature::Radius(0.0)).is_err());
    }

    #[test]
    fn reflection_cases() {
        assert_eq!(reflection_matrix(Curvature::Flat).unwrap(), RayTransferMatrix::IDENTITY);
        assert_eq!(
            reflection_matrix(Curvature::Radius(20.0)).unwrap(),
            RayTransferMatrix::new(1.0, 0.0, 0.1, 1.0)
        );
        assert!(reflection_matrix(Curvature::Radius(0.0)).is_err());
    }

    #[test]
    fn compose_cases() {
        assert_eq!(
            compose(&[RayTransferMatrix::IDENTITY]).unwrap(),
            RayTransferMatrix::IDENTITY
        );
        let t = translation_matrix(10.0).unwrap();
        let l = reflection_matrix(Curvature::Radius(20.0)).unwrap();
        let m = compose(&[t, l]).unwrap();
        assert!(close(&m, &RayTransferMatrix::new(2.0, 10.0, 0.1, 1.0), 1e-15));
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn trace_cases() {
        let ray = RayState::new(0.7, -0.02);
        assert_eq!(trace_ray(&RayTransferMatrix::IDENTITY, ray), ray);
        let m = RayTransferMatrix::new(2.0, 10.0, 0.1, 1.0);
        let out = trace_ray(&m, RayState::new(1.0, 0.0));
        assert!((out.r - 2.0).abs() < 1e-15 && (out.theta - 0.1).abs() < 1e-15);
    }

    #[test]
    fn singular_inverse_is_degenerate() {
        let m = RayTransferMatrix::new(1.0, 2.0, 2.0, 4.0);
        assert!(matches!(m.inverse(), Err(Error::NumericDegenerate(_))));
    }

    fn matrix() -> impl Strategy<Value = RayTransferMatrix> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_map(|(a, b, c, d)| RayTransferMatrix::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in matrix(), b in matrix(), c in matrix()) {
            let nested = compose(&[a, compose(&[b, c]).unwrap()]).unwrap();
            let flat = compose(&[a, b, c]).unwrap();
            prop_assert!(close(&nested, &flat, 1e-12));
        }

        #[test]
        fn trace_is_linear(m in matrix(), r in -10.0..10.0f64, t in -0.3..0.3f64, s in -4.0..4.0f64) {
            let lhs = trace_ray(&m, RayState::new(s * r, s * t));
            let base = trace_ray(&m, RayState::new(r, t));
            prop_assert!((lhs.r - s * base.r).abs() < 1e-12);
            prop_assert!((lhs.theta - s * base.theta).abs() < 1e-12);
        }

        #[test]
        fn inverse_round_trips(n1 in 1.0..2.0f64, n2 in 1.0..2.0f64, r in 5.0..300.0f64) {
            let m = refraction_matrix(n1, n2, Curvature::Radius(r)).unwrap();
            let id = m * m.inverse().unwrap();
            prop_assert!(close(&id, &RayTransferMatrix::IDENTITY, 1e-12));
        }
    }
}

//! Lens prescriptions: the ordered interface table and its text format.
//!
//! Text format, one interface per line, whitespace separated:
//!
//! ```text
//! # r        d      n     f  w     h      c
//!   105.28   2.20   1.800 0  1.00  12.96  105
//!   stop     3.50   1.000 1  1.00  28.78  0
//!   -99.31  50.01   1.000 0  1.00  27.62  117
//! ```
//!
//! Column `r` takes a signed radius in mm, `flat` for a plane, or `stop` for
//! the (flat) aperture plane; exactly one `stop` row is required. The last
//! row's `d` is the distance to the sensor. `#` starts a comment. Two
//! optional directive lines are recognised: `aperture circle|hexagon` sets the
//! aperture shape and `sensor <mm>` overrides the sensor distance.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::matrix::Curvature;
use crate::error::{Error, Result};

const DEFAULT_PRESCRIPTION: &str = include_str!("../../data/nikon_28_75_representative.lens");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApertureShape {
    Circle,
    #[default]
    Hexagon,
}

impl ApertureShape {
    /// Area of the shape with circumradius `radius`.
    pub fn area(self, radius: f64) -> f64 {
        match self {
            ApertureShape::Circle => std::f64::consts::PI * radius * radius,
            ApertureShape::Hexagon => 1.5 * 3f64.sqrt() * radius * radius,
        }
    }
}

impl FromStr for ApertureShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(ApertureShape::Circle),
            "hexagon" => Ok(ApertureShape::Hexagon),
            other => Err(Error::invalid(format!("unknown aperture shape `{other}`"))),
        }
    }
}

impl fmt::Display for ApertureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApertureShape::Circle => "circle",
            ApertureShape::Hexagon => "hexagon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensInterface {
    /// Radius of curvature (mm).
    pub radius: Curvature,
    /// Axial distance to the next interface (mm).
    pub distance: f64,
    /// Refractive index of the medium after the interface.
    pub index: f64,
    /// Plane interfaces never take part in ghost pairs.
    pub flat: bool,
    /// Thickness scaling applied to rendered ghost size.
    pub thickness_scale: f64,
    /// Semi-aperture (mm).
    pub semi_aperture: f64,
    /// Anti-reflection coating thickness (nm).
    pub coating_nm: f64,
}

impl LensInterface {
    /// Curved interface with unit rendering scale and no coating.
    pub fn curved(radius: f64, distance: f64, index: f64, semi_aperture: f64) -> Self {
        LensInterface {
            radius: Curvature::Radius(radius),
            distance,
            index,
            flat: false,
            thickness_scale: 1.0,
            semi_aperture,
            coating_nm: 0.0,
        }
    }

    pub fn plane(distance: f64, index: f64, semi_aperture: f64) -> Self {
        LensInterface {
            radius: Curvature::Flat,
            distance,
            index,
            flat: true,
            thickness_scale: 1.0,
            semi_aperture,
            coating_nm: 0.0,
        }
    }

    pub fn with_coating(mut self, coating_nm: f64) -> Self {
        self.coating_nm = coating_nm;
        self
    }

    pub fn is_flat(&self) -> bool {
        self.flat || self.radius.is_flat()
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("interface {index}: {what}")));
        if !(self.distance >= 0.0 && self.distance.is_finite()) {
            return bad("distance must be finite and >= 0");
        }
        if !(self.index > 0.0 && self.index.is_finite()) {
            return bad("refractive index must be > 0");
        }
        if !(self.semi_aperture > 0.0 && self.semi_aperture.is_finite()) {
            return bad("semi-aperture must be > 0");
        }
        if !(self.coating_nm >= 0.0 && self.coating_nm.is_finite()) {
            return bad("coating thickness must be >= 0");
        }
        if !(self.thickness_scale > 0.0 && self.thickness_scale.is_finite()) {
            return bad("thickness scale must be > 0");
        }
        if let Curvature::Radius(r) = self.radius {
            if r == 0.0 || !r.is_finite() {
                return bad("radius must be finite and nonzero");
            }
            if self.flat {
                return bad("flat flag set on a curved interface");
            }
        }
        Ok(())
    }
}

/// Immutable camera model: interfaces ordered from the object side to the sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensPrescription {
    interfaces: Vec<LensInterface>,
    aperture_index: usize,
    aperture_shape: ApertureShape,
    sensor_distance: f64,
}

impl LensPrescription {
    pub fn new(
        interfaces: Vec<LensInterface>,
        aperture_index: usize,
        aperture_shape: ApertureShape,
        sensor_distance: f64,
    ) -> Result<Self> {
        if interfaces.is_empty() {
            return Err(Error::invalid("lens prescription has no interfaces"));
        }
        if aperture_index >= interfaces.len() {
            return Err(Error::invalid(format!(
                "aperture index {aperture_index} out of range for {} interfaces",
                interfaces.len()
            )));
        }
        if !(sensor_distance >= 0.0 && sensor_distance.is_finite()) {
            return Err(Error::invalid("sensor distance must be finite and >= 0"));
        }
        for (i, s) in interfaces.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(LensPrescription {
            interfaces,
            aperture_index,
            aperture_shape,
            sensor_distance,
        })
    }

    /// The bundled 29-interface representative zoom lens.
    pub fn default_lens() -> Self {
        DEFAULT_PRESCRIPTION
            .parse()
            .expect("bundled lens prescription is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        text.parse()
    }

    pub fn interfaces(&self) -> &[LensInterface] {
        &self.interfaces
    }

    pub fn len(&self) -> usize {
        self.interfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty()
    }

    pub fn aperture_index(&self) -> usize {
        self.aperture_index
    }

    pub fn aperture_shape(&self) -> ApertureShape {
        self.aperture_shape
    }

    pub fn sensor_distance(&self) -> f64 {
        self.sensor_distance
    }

    /// Index of the medium in front of interface `i` (air before the first).
    pub fn index_before(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.interfaces[i - 1].index
        }
    }

    /// Distance travelled after interface `i`; the last gap ends at the sensor.
    pub fn gap_after(&self, i: usize) -> f64 {
        if i + 1 == self.interfaces.len() {
            self.sensor_distance
        } else {
            self.interfaces[i].distance
        }
    }

    pub fn with_aperture_shape(mut self, shape: ApertureShape) -> Self {
        self.aperture_shape = shape;
        self
    }

    /// Copy with the entrance semi-aperture scaled by `factor`.
    pub fn with_scaled_entrance(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("aperture scale must be positive"));
        }
        self.interfaces[0].semi_aperture *= factor;
        Ok(self)
    }
}

impl FromStr for LensPrescription {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut interfaces = Vec::new();
        let mut stop = None;
        let mut shape = ApertureShape::default();
        let mut sensor = None;
        let mut offset = 0;

        for line in text.split_inclusive('\n') {
            let line_offset = offset;
            offset += line.len();
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fail = |message: String| Error::Format {
                offset: line_offset,
                message,
            };
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens[0] {
                "aperture" => {
                    let value = tokens
                        .get(1)
                        .ok_or_else(|| fail("`aperture` needs a shape".into()))?;
                    shape = value.parse().map_err(|e: Error| fail(e.to_string()))?;
                    continue;
                }
                "sensor" => {
                    let value = tokens
                        .get(1)
                        .and_then(|v| v.parse::<f64>().ok())
                        .ok_or_else(|| fail("`sensor` needs a distance in mm".into()))?;
                    sensor = Some(value);
                    continue;
                }
                _ => {}
            }
            if tokens.len() != 7 {
                return Err(fail(format!(
                    "expected 7 columns (r d n f w h c), found {}",
                    tokens.len()
                )));
            }
            let num = |col: usize, name: &str| -> Result<f64> {
                tokens[col]
                    .parse::<f64>()
                    .map_err(|_| fail(format!("column {name}: `{}` is not a number", tokens[col])))
            };
            let (radius, is_stop) = match tokens[0] {
                "flat" => (Curvature::Flat, false),
                "stop" => (Curvature::Flat, true),
                _ => (Curvature::Radius(num(0, "r")?), false),
            };
            let flat_flag = match tokens[3] {
                "0" => false,
                "1" => true,
                other => return Err(fail(format!("column f: expected 0 or 1, found `{other}`"))),
            };
            if is_stop {
                if stop.is_some() {
                    return Err(fail("more than one aperture stop".into()));
                }
                stop = Some(interfaces.len());
            }
            let interface = LensInterface {
                radius,
                distance: num(1, "d")?,
                index: num(2, "n")?,
                flat: flat_flag || radius.is_flat(),
                thickness_scale: num(4, "w")?,
                semi_aperture: num(5, "h")?,
                coating_nm: num(6, "c")?,
            };
            interface
                .validate(interfaces.len())
                .map_err(|e| fail(e.to_string()))?;
            interfaces.push(interface);
        }

        let aperture_index = stop.ok_or_else(|| Error::Format {
            offset,
            message: "prescription has no `stop` row".into(),
        })?;
        let sensor_distance = match (sensor, interfaces.last()) {
            (Some(s), _) => s,
            (None, Some(last)) => last.distance,
            (None, None) => 0.0,
        };
        LensPrescription::new(interfaces, aperture_index, shape, sensor_distance)
    }
}

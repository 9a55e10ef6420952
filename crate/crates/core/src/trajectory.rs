//! Light-source motion: flow-driven propagation of the source position, the
//! scattering-flare anchor, and collinear placement of reflective ghosts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowio::FlowField;

/// Upper bound (exclusive) of each scatter-offset component, in pixels.
pub const MAX_SCATTER_OFFSET: f64 = 15.0;

/// Fraction of clamped frames above which a trajectory is flagged.
pub const CLAMP_FLAG_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePosition {
    pub x: f64,
    pub y: f64,
}

impl SourcePosition {
    pub fn new(x: f64, y: f64) -> Self {
        SourcePosition { x, y }
    }

    fn clamped(self, width: usize, height: usize) -> (SourcePosition, bool) {
        let cx = self.x.clamp(0.0, (width - 1) as f64);
        let cy = self.y.clamp(0.0, (height - 1) as f64);
        (SourcePosition::new(cx, cy), cx != self.x || cy != self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageCenter {
    pub cx: f64,
    pub cy: f64,
}

impl ImageCenter {
    pub fn of_frame(width: usize, height: usize) -> Self {
        ImageCenter {
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn as_position(self) -> SourcePosition {
        SourcePosition::new(self.cx, self.cy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTrajectory {
    pub positions: Vec<SourcePosition>,
    pub scatter_anchor: Vec<SourcePosition>,
    /// Per-sequence scatter offset `(dx, dy)`, each in `[0, 15)`.
    pub offset: (f64, f64),
    /// Frames on which the source position was clamped to the frame.
    pub clamped_frames: usize,
}

impl SourceTrajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Set when the source was clamped on more than a quarter of the frames.
    pub fn clamp_flag(&self) -> bool {
        !self.positions.is_empty()
            && self.clamped_frames as f64 > CLAMP_FLAG_FRACTION * self.positions.len() as f64
    }
}

/// Uniform position inside the central two-thirds of the frame:
/// `x ∈ [W/6, 5W/6)`, `y ∈ [H/6, 5H/6)`.
pub fn init_source<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> Result<SourcePosition> {
    if width < 3 || height < 3 {
        return Err(Error::invalid(format!(
            "frame {width}x{height} is too small to place a source"
        )));
    }
    let (w, h) = (width as f64, height as f64);
    Ok(SourcePosition::new(
        rng.gen_range(w / 6.0..5.0 * w / 6.0),
        rng.gen_range(h / 6.0..5.0 * h / 6.0),
    ))
}

/// Two independent per-axis offsets in `[0, 15)`.
pub fn sample_scatter_offset<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (
        rng.gen_range(0.0..MAX_SCATTER_OFFSET),
        rng.gen_range(0.0..MAX_SCATTER_OFFSET),
    )
}

/// One flow step without clamping.
pub fn advance_source_unclamped(pos: SourcePosition, flow: &FlowField) -> SourcePosition {
    let (u, v) = flow.sample_bilinear(pos.x, pos.y);
    SourcePosition::new(pos.x + u, pos.y + v)
}

/// `pos + flow(pos)`, clamped to `[0, W−1] × [0, H−1]`.
pub fn advance_source(pos: SourcePosition, flow: &FlowField) -> SourcePosition {
    advance_source_unclamped(pos, flow)
        .clamped(flow.width(), flow.height())
        .0
}

pub fn scatter_anchor(
    source: SourcePosition,
    offset: (f64, f64),
    width: usize,
    height: usize,
) -> Result<SourcePosition> {
    let ok = |v: f64| (0.0..MAX_SCATTER_OFFSET).contains(&v);
    if !ok(offset.0) || !ok(offset.1) {
        return Err(Error::invalid(format!(
            "scatter offset {offset:?} outside [0, {MAX_SCATTER_OFFSET})"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("frame is empty"));
    }
    Ok(SourcePosition::new(source.x + offset.0, source.y + offset.1)
        .clamped(width, height)
        .0)
}

/// Point on the line through the centre and the source:
/// `center + rho · (source − center)`.
pub fn reflective_position(center: ImageCenter, source: SourcePosition, rho: f64) -> SourcePosition {
    SourcePosition::new(
        center.cx + rho * (source.x - center.cx),
        center.cy + rho * (source.y - center.cy),
    )
}

/// `|sin|` of the angle at `ghost` between the directions to `center` and to
/// `source`; zero for collinear points.
pub fn collinearity_residual(center: ImageCenter, source: SourcePosition, ghost: SourcePosition) -> f64 {
    const EPS_DIV: f64 = 1e-12;
    let (ax, ay) = (center.cx - ghost.x, center.cy - ghost.y);
    let (bx, by) = (source.x - ghost.x, source.y - ghost.y);
    let cross = ax * by - ay * bx;
    cross.abs() / (ax.hypot(ay) * bx.hypot(by) + EPS_DIV)
}

/// Source positions over `frames` frames, driven by `flows[t]` (frame t → t+1).
pub fn build_trajectory(
    flows: &[FlowField],
    init: SourcePosition,
    offset: (f64, f64),
    frames: usize,
    width: usize,
    height: usize,
) -> Result<SourceTrajectory> {
    if frames == 0 {
        return Err(Error::invalid("trajectory needs at least one frame"));
    }
    if flows.len() + 1 != frames {
        return Err(Error::invalid(format!(
            "{frames} frames need {} flow fields, got {}",
            frames - 1,
            flows.len()
        )));
    }
    if let Some(f) = flows.iter().find(|f| f.dims() != (width, height)) {
        return Err(Error::invalid(format!(
            "flow field {:?} does not match frame {width}x{height}",
            f.dims()
        )));
    }
    let (start, start_clamped) = init.clamped(width, height);
    let mut positions = Vec::with_capacity(frames);
    positions.push(start);
    let mut clamped_frames = usize::from(start_clamped);
    for flow in flows {
        let prev = *positions.last().expect("nonempty");
        let (next, was_clamped) = advance_source_unclamped(prev, flow).clamped(width, height);
        clamped_frames += usize::from(was_clamped);
        positions.push(next);
    }
    let scatter_anchor = positions
        .iter()
        .map(|&p| scatter_anchor(p, offset, width, height))
        .collect::<Result<_>>()?;
    Ok(SourceTrajectory {
        positions,
        scatter_anchor,
        offset,
        clamped_frames,
    })
}

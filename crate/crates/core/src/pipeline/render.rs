//! Rendering a planned sequence: trajectory, per-frame layers, composition
//! and output files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compositor::{render_ghost_sprite, render_source_blob, Compositor, FramePair};
use crate::error::{Error, Result};
use crate::flowio::{flow_file_name, FlowField};
use crate::image::Image;
use crate::optics::{ghost_geometry, incidence_angle, ApertureShape, GhostPair, LensPrescription};
use crate::par::{self, Exec};
use crate::scatter::{aperture_mask, diffraction_psf, render_scatter_layer, ApertureSpec, Psf};
use crate::trajectory::{build_trajectory, reflective_position, ImageCenter, SourcePosition, SourceTrajectory};

use super::config::SequenceConfig;
use super::frames::{load_frames, prepare_flows};
use super::plan::{ghost_options, plan_lens, SceneSource, SequencePlan, Split};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhostPlacement {
    pub pair: GhostPair,
    pub center: SourcePosition,
    /// Some traced ray left an interface's clear aperture at this frame's
    /// incidence angle. Recorded only.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub source_frame: usize,
    pub source: SourcePosition,
    pub scatter_anchor: SourcePosition,
    pub ghosts: Vec<GhostPlacement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowOrigin {
    File,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub version: u32,
    pub name: String,
    pub index: usize,
    pub split: Split,
    pub scene: SceneSource,
    pub config: SequenceConfig,
    pub plan: SequencePlan,
    pub flow_origin: FlowOrigin,
    pub frames: Vec<FrameRecord>,
    pub clamped_frames: usize,
    pub clamp_flag: bool,
}

impl SequenceManifest {
    /// Output directory of this sequence under `root`.
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(self.split.as_str()).join(&self.name)
    }
}

/// Everything needed to render any frame of one sequence.
pub struct SequenceRenderer {
    pub config: SequenceConfig,
    pub plan: SequencePlan,
    pub scenes: Vec<Image>,
    pub flows: Vec<FlowField>,
    pub trajectory: SourceTrajectory,
    psf: Psf,
    lens: LensPrescription,
    compositor: Compositor,
}

/// The scatter PSF of a plan: occluded-pupil diffraction with the streak gain
/// applied against the clean pupil, area-averaged to the splat size.
pub fn plan_psf(spec: &ApertureSpec, streak_gain: f64, kernel_size: usize, exec: Exec) -> Result<Psf> {
    let dirty = diffraction_psf(&aperture_mask(spec, exec)?, exec)?;
    let clean_spec = ApertureSpec {
        occluders: Vec::new(),
        ..spec.clone()
    };
    let clean = diffraction_psf(&aperture_mask(&clean_spec, exec)?, exec)?;
    dirty.with_streak_gain(&clean, streak_gain)?.resampled(kernel_size, exec)
}

impl SequenceRenderer {
    /// `scenes` are at the target size; `flows` has one field fewer.
    pub fn new(config: &SequenceConfig, plan: &SequencePlan, scenes: Vec<Image>, flows: Vec<FlowField>, exec: Exec) -> Result<Self> {
        config.validate()?;
        let [w, h] = config.target_size;
        if scenes.is_empty() {
            return Err(Error::invalid("sequence has no frames"));
        }
        if let Some(f) = scenes.iter().find(|f| f.dims() != (w, h)) {
            return Err(Error::invalid(format!("frame is {:?}, expected {w}x{h}", f.dims())));
        }
        // Scenes are quantized to what the clean PNG will hold, so degraded
        // and clean frames are built from the same pixels.
        let scenes = scenes
            .into_iter()
            .map(|s| Image::from_rgb8(w, h, &s.to_rgb8()))
            .collect::<Result<Vec<_>>>()?;
        let trajectory = build_trajectory(&flows, plan.init, plan.offset, scenes.len(), w, h)?;
        let psf = plan_psf(
            &plan.scatter.aperture,
            plan.scatter.streak_gain,
            plan.scatter.kernel_size,
            exec,
        )?;
        let lens = plan_lens(config, plan.aperture_shape, plan.reflective.aperture_scale)?;
        Ok(SequenceRenderer {
            config: config.clone(),
            plan: plan.clone(),
            scenes,
            flows,
            trajectory,
            psf,
            lens,
            compositor: Compositor {
                gamma: config.gamma,
                mask_threshold: config.mask_threshold,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.config.target_size[0], self.config.target_size[1])
    }

    pub fn record(&self, t: usize, source_frame: usize) -> Result<FrameRecord> {
        let (w, h) = self.dims();
        let center = ImageCenter::of_frame(w, h);
        let source = self.trajectory.positions[t];
        let offset = (source.x - center.cx).hypot(source.y - center.cy);
        let theta = incidence_angle(&self.lens, offset, self.plan.reflective.focal_scale)?;
        let opts = ghost_options(&self.config);
        let ghosts = self
            .plan
            .reflective
            .ghosts
            .iter()
            .map(|g| {
                let geo = ghost_geometry(&self.lens, g.pair, theta, self.plan.reflective.focal_scale, &opts)?;
                Ok(GhostPlacement {
                    pair: g.pair,
                    center: reflective_position(center, source, g.rho),
                    clipped: geo.clipped,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameRecord {
            index: t,
            source_frame,
            source,
            scatter_anchor: self.trajectory.scatter_anchor[t],
            ghosts,
        })
    }

    /// Scatter, ghost and source layers of frame `t` (each may be all zero).
    pub fn layers(&self, t: usize) -> Result<Vec<Image>> {
        let (w, h) = self.dims();
        let s = &self.plan.scatter;
        let scatter = render_scatter_layer(
            &self.psf,
            self.trajectory.scatter_anchor[t],
            s.intensity,
            s.tint,
            w,
            h,
            Exec::Sequential,
        )?;
        let mut layers = vec![scatter];
        let source = self.trajectory.positions[t];
        if !self.plan.reflective.ghosts.is_empty() {
            let center = ImageCenter::of_frame(w, h);
            let mut ghosts = Image::new(w, h);
            for g in &self.plan.reflective.ghosts {
                let p = reflective_position(center, source, g.rho);
                render_ghost_sprite(&mut ghosts, self.plan.aperture_shape, (p.x, p.y), g.radius_px, g.rgb);
            }
            layers.push(ghosts);
        }
        if self.config.source_blob.peak > 0.0 {
            layers.push(render_source_blob(&self.config.source_blob, (source.x, source.y), w, h));
        }
        Ok(layers)
    }

    pub fn frame(&self, t: usize) -> Result<FramePair> {
        let layers = self.layers(t)?;
        self.compositor.composite(t, &self.scenes[t], &layers, Exec::Sequential)
    }

    pub fn frames(&self, exec: Exec) -> Result<Vec<FramePair>> {
        par::try_map_indexed(exec, self.len(), |t| self.frame(t))
    }

    pub fn shape(&self) -> ApertureShape {
        self.plan.aperture_shape
    }
}

fn frame_name(t: usize) -> String {
    format!("frame_{t:05}.png")
}

fn mask_name(t: usize) -> String {
    format!("mask_{t:05}.png")
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
}

fn write_bytes(p: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(p, bytes).map_err(|e| Error::io(format!("writing {}", p.display()), e))
}

/// Loads the inputs a manifest points at and builds its renderer.
pub fn renderer_for(m: &SequenceManifest, exec: Exec) -> Result<SequenceRenderer> {
    let [w, h] = m.config.target_size;
    let scenes = load_frames(&m.scene.dir, &m.scene.frames, (w, h), m.config.gamma, exec)?;
    let flows = prepare_flows(
        &m.scene.kept,
        &scenes,
        m.scene.flow_dir.as_deref(),
        (w, h),
        &m.config.flow_estimator,
        exec,
    )?;
    SequenceRenderer::new(&m.config, &m.plan, scenes, flows, exec)
}

/// Renders a planned sequence into `root/<split>/<name>/` and fills in the
/// manifest's per-frame records. Frames are written as they are rendered.
pub fn write_sequence(m: &mut SequenceManifest, root: &Path, exec: Exec) -> Result<()> {
    let r = renderer_for(m, exec)?;
    let dir = m.dir(root);
    for sub in ["degraded", "clean", "mask", "flow"] {
        create_dir(&dir.join(sub))?;
    }
    let records = par::try_map_indexed(exec, r.len(), |t| {
        let pair = r.frame(t)?;
        write_bytes(&dir.join("degraded").join(frame_name(t)), &pair.degraded.encode_png()?)?;
        write_bytes(&dir.join("clean").join(frame_name(t)), &pair.clean.encode_png()?)?;
        write_bytes(&dir.join("mask").join(mask_name(t)), &pair.mask.encode_png()?)?;
        if let Some(f) = r.flows.get(t) {
            write_bytes(&dir.join("flow").join(flow_file_name(t)), &f.write_flo())?;
        }
        r.record(t, m.scene.kept[t])
    })?;
    m.frames = records;
    m.clamped_frames = r.trajectory.clamped_frames;
    m.clamp_flag = r.trajectory.clamp_flag();
    m.flow_origin = if m.scene.flow_dir.is_some() {
        FlowOrigin::File
    } else {
        FlowOrigin::Estimated
    };
    write_bytes(&dir.join("manifest.json"), serde_json::to_string_pretty(m)?.as_bytes())
}

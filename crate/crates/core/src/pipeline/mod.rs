//! End-to-end dataset generation: configuration, planning, rendering,
//! manifests, replay and scoring of frame directories.

mod config;
mod frames;
mod generate;
mod plan;
mod render;
mod scenes;
mod score;
mod select;

pub use config::{GhostSettings, ScatterSettings, SequenceConfig, ShapeChoice};
pub use frames::{discover_scenes, downsample, load_frames, png_files, prepare_flows, subsample_frames, subsample_from, Scene};
pub use generate::{
    generate_dataset, plan_dataset, preview_frame, render_dataset, replay_dataset, DatasetManifest, GenerateOptions,
    DEFAULT_SPLIT_RATIO,
};
pub use plan::{
    ghost_options, half_diagonal, plan_lens, plan_sequence, PairType, PlannedGhost, ReflectivePlan, SceneSource,
    ScatterPlan, SequencePlan, Split,
};
pub use render::{
    plan_psf, renderer_for, write_sequence, FlowOrigin, FrameRecord, GhostPlacement, SequenceManifest,
    SequenceRenderer, MANIFEST_VERSION,
};
pub use scenes::{write_synthetic_scenes, SceneSpec, SyntheticScene};
pub use score::score_dirs;
pub use select::{select_ghosts, split_dataset, visible_ghosts, SelectedGhost, JITTER_RANGE};

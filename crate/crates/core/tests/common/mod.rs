#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flareforge::par::Exec;
use flareforge::pipeline::{write_synthetic_scenes, SceneSpec, SequenceConfig};

/// Small synthetic scenes with exact flows under `root/scenes` and `root/flows`.
pub fn scenes(root: &Path, count: usize, frames: usize, size: (usize, usize)) -> (PathBuf, PathBuf) {
    let (input, flows) = (root.join("scenes"), root.join("flows"));
    let spec = SceneSpec {
        width: size.0,
        height: size.1,
        frames,
        ..SceneSpec::default()
    };
    write_synthetic_scenes(&input, Some(&flows), count, &spec, 21, Exec::Parallel).unwrap();
    (input, flows)
}

pub fn small_config() -> SequenceConfig {
    SequenceConfig {
        frame_stride: 2,
        target_size: [96, 64],
        ..SequenceConfig::default()
    }
}

pub fn write_config(root: &Path, cfg: &SequenceConfig) -> PathBuf {
    let path = root.join("config.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flareforge"))
        .args(args)
        .env_remove("FLAREFORGE_SEED")
        .output()
        .unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use flareforge::image::Image;
use flareforge::optics::{
    enumerate_ghosts, focal_scale_for_field, ghost_geometry, ApertureShape, GhostOptions, LensPrescription,
};
use flareforge::par::Exec;
use flareforge::pipeline::{
    generate_dataset, plan_psf, preview_frame, replay_dataset, score_dirs, write_synthetic_scenes, DatasetManifest,
    GenerateOptions, SceneSpec, SequenceConfig, DEFAULT_SPLIT_RATIO,
};
use flareforge::scatter::ApertureSpec;

const SEED_ENV: &str = "FLAREFORGE_SEED";

#[derive(Parser)]
#[command(name = "flareforge", version, about = "Dynamic lens-flare synthesis for paired video datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a paired degraded/clean dataset from clean frame sequences.
    Generate {
        #[arg(long)]
        input_dir: PathBuf,
        /// Per-scene `flow_%05d.flo` files for consecutive source frames.
        #[arg(long)]
        flow_dir: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; FLAREFORGE_SEED takes precedence when set.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of sequences (defaults to one per scene).
        #[arg(long)]
        sequences: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
        split_ratio: f64,
        /// Worker threads; 0 uses every core, 1 runs sequentially.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Regenerate a dataset from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Score restored frames against ground truth.
    Score {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        #[arg(long)]
        mask_dir: Option<PathBuf>,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = flareforge::metrics::DEFAULT_CHARBONNIER_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Composite one flare onto a single frame.
    Preview {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the clean frame and mask next to `out`.
        #[arg(long)]
        all: bool,
    },
    /// Print the ghost table of a lens prescription.
    Ghosts {
        #[arg(long)]
        lens: Option<PathBuf>,
        /// Incidence angle in radians.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        /// Pixel distance from the image centre to a corner.
        #[arg(long, default_value_t = 200.0)]
        half_diagonal: f64,
        /// Incidence angle of a source on the corner.
        #[arg(long, default_value_t = 0.3)]
        field_angle: f64,
        #[arg(long)]
        shape: Option<ApertureShape>,
        #[arg(long)]
        json: bool,
    },
    /// Write synthetic clean scenes with exact flow.
    Scenes {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        flow_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 240)]
        frames: usize,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Export the scatter PSF of a configuration as a PSF1 grid.
    Psf {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Keep the full pupil-grid resolution instead of the splat size.
        #[arg(long)]
        full: bool,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<SequenceConfig> {
    Ok(match path {
        Some(p) => SequenceConfig::load(p)?,
        None => SequenceConfig::default(),
    })
}

/// Environment beats the flag, which beats the config file.
fn resolve_seed(flag: Option<u64>, config: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v} is not an unsigned 64-bit integer")),
        Err(std::env::VarError::NotPresent) => Ok(flag.unwrap_or(config)),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce(Exec) -> Result<T> + Send) -> Result<T> {
    let exec = if jobs == 1 { Exec::Sequential } else { Exec::Parallel };
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building the worker pool")?;
        return pool.install(|| f(exec));
    }
    f(exec)
}

/// Prints `text` plus a newline; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            input_dir,
            flow_dir,
            output_dir,
            config,
            seed,
            sequences,
            split_ratio,
            jobs,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            cfg.seed = resolve_seed(seed, cfg.seed)?;
            let opts = GenerateOptions {
                input_dir,
                flow_dir,
                output_dir,
                config: cfg,
                sequences,
                split_ratio,
                exec: Exec::Parallel,
            };
            let manifest = with_jobs(jobs, |exec| Ok(generate_dataset(&GenerateOptions { exec, ..opts.clone() })?))?;
            let flagged = manifest.sequences.iter().filter(|s| s.clamp_flag).count();
            eprintln!(
                "wrote {} sequences ({} frames) to {}{}",
                manifest.sequences.len(),
                manifest.sequences.iter().map(|s| s.frames.len()).sum::<usize>(),
                opts.output_dir.display(),
                if flagged > 0 {
                    format!("; {flagged} with the source clamped on over a quarter of frames")
                } else {
                    String::new()
                }
            );
        }
        Command::Replay {
            manifest,
            output_dir,
            jobs,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let out = with_jobs(jobs, |exec| Ok(replay_dataset(&m, &output_dir, exec)?))?;
            eprintln!("replayed {} sequences into {}", out.sequences.len(), output_dir.display());
        }
        Command::Score {
            pred_dir,
            gt_dir,
            mask_dir,
            report,
            epsilon,
            jobs,
        } => {
            let r = with_jobs(jobs, |exec| Ok(score_dirs(&pred_dir, &gt_dir, mask_dir.as_deref(), epsilon, exec)?))?;
            let json = r.to_json()?;
            if let Some(p) = report {
                std::fs::write(&p, &json).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(&json)?;
        }
        Command::Preview {
            config,
            frame,
            out,
            seed,
            all,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            cfg.seed = resolve_seed(seed, cfg.seed)?;
            let img = Image::load_png(&frame)?;
            let pair = preview_frame(&cfg, &img, Exec::Parallel)?;
            pair.degraded.save_png(&out)?;
            if all {
                let stem = out.with_extension("");
                let stem = stem.display();
                pair.clean.save_png(&PathBuf::from(format!("{stem}_clean.png")))?;
                let mask = PathBuf::from(format!("{stem}_mask.png"));
                std::fs::write(&mask, pair.mask.encode_png()?).with_context(|| format!("writing {}", mask.display()))?;
            }
        }
        Command::Ghosts {
            lens,
            theta,
            half_diagonal,
            field_angle,
            shape,
            json,
        } => {
            let mut lens = match lens {
                Some(p) => LensPrescription::load(&p)?,
                None => LensPrescription::default_lens(),
            };
            if let Some(s) = shape {
                lens = lens.with_aperture_shape(s);
            }
            let scale = focal_scale_for_field(&lens, half_diagonal, field_angle)?;
            let opts = GhostOptions::default();
            let table = enumerate_ghosts(&lens)
                .into_iter()
                .map(|pair| ghost_geometry(&lens, pair, theta, scale, &opts))
                .collect::<flareforge::Result<Vec<_>>>()?;
            if json {
                emit(&serde_json::to_string_pretty(&table)?)?;
            } else {
                let mut text = format!("# {} ghosts, theta = {theta} rad, {scale:.4} px/mm\n", table.len());
                let _ = writeln!(text, "{:>4} {:>4} {:>12} {:>12} {:>12} {:>12} {:>12} {:>7}", "i", "j", "rho", "radius_px", "I_r", "I_g", "I_b", "clipped");
                for g in &table {
                    let _ = writeln!(
                        text,
                        "{:>4} {:>4} {:>12.6} {:>12.4} {:>12.4e} {:>12.4e} {:>12.4e} {:>7}",
                        g.pair.0 + 1,
                        g.pair.1 + 1,
                        g.rho,
                        g.radius_px,
                        g.intensity_rgb[0],
                        g.intensity_rgb[1],
                        g.intensity_rgb[2],
                        g.clipped
                    );
                }
                emit(text.trim_end())?;
            }
        }
        Command::Scenes {
            out_dir,
            flow_dir,
            count,
            frames,
            width,
            height,
            seed,
            jobs,
        } => {
            let spec = SceneSpec {
                width,
                height,
                frames,
                ..SceneSpec::default()
            };
            with_jobs(jobs, |exec| {
                Ok(write_synthetic_scenes(&out_dir, flow_dir.as_deref(), count, &spec, seed, exec)?)
            })?;
            eprintln!("wrote {count} scenes of {frames} frames to {}", out_dir.display());
        }
        Command::Psf { config, seed, out, full } => {
            use rand::SeedableRng;
            let mut cfg = load_config(config.as_ref())?;
            cfg.seed = resolve_seed(seed, cfg.seed)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let plan = flareforge::pipeline::plan_sequence(&cfg, flareforge::pipeline::Split::Train, &mut rng)?;
            let spec: &ApertureSpec = &plan.scatter.aperture;
            let size = if full { spec.resolution } else { plan.scatter.kernel_size };
            let psf = plan_psf(spec, plan.scatter.streak_gain, size, Exec::Parallel)?;
            psf.save_psf1(&out)?;
            eprintln!("wrote {size}x{size} PSF1 grid to {}", out.display());
        }
    }
    Ok(())
}

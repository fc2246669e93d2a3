//! Command-line driver: resolves the run configuration, runs both stages and
//! writes every artifact into the output directory.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Parser;
use thiserror::Error;

use relitex_core::envlight::procedural::studio_pool;
use relitex_core::envlight::{load_light_pool, EnvironmentLight, LightError, PrefilterSettings, PrefilteredLight};
use relitex_core::field::{bake_uv, save_checkpoint, FieldConfig, FieldError, TextureField};
use relitex_core::geometry::{GeometryError, Mesh};
use relitex_core::guidance::{assemble_grid, GuidanceBackend, GuidanceError, RemoteBackend, StubBackend};
use relitex_core::image::{tonemap, write_png8, Image, ImageError};
use relitex_core::pipeline::{
    log_to_csv, optimize, render_canonical, stage1_reference, turntable, CanonicalSetup, LogRow, PipelineError, Prompt, Scene,
    SNAPSHOT_EVERY,
};

pub use config::{resolve, BackendChoice, FlagValues, RunConfig, BACKEND_URL_ENV};

/// Width of the built-in studio environment maps.
pub const STUDIO_WIDTH: usize = 128;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mesh {path}: {source}")]
    Mesh { path: PathBuf, source: GeometryError },
    #[error("lighting: {0}")]
    Light(#[from] LightError),
    #[error("guidance backend: {0}")]
    Backend(GuidanceError),
    #[error("{0}")]
    NonFinite(String),
    #[error("{0}")]
    Pipeline(PipelineError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Light(_) => 2,
            CliError::Mesh { .. } => 3,
            CliError::Backend(_) => 4,
            CliError::NonFinite(_) => 5,
            CliError::Pipeline(_) | CliError::Output { .. } => 1,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend(g) | PipelineError::Guidance(g) => CliError::Backend(g),
            PipelineError::NonFinite { .. } => CliError::NonFinite(e.to_string()),
            PipelineError::Config(m) => CliError::Config(m),
            other => CliError::Pipeline(other),
        }
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "relitex", version, about = "Relightable texture synthesis for UV-mapped meshes")]
pub struct Args {
    /// Triangulated OBJ mesh with texture coordinates.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub negative_prompt: Option<String>,
    /// Lighting manifest (one `path [rotation_deg] [scale]` per line).
    #[arg(long)]
    pub lights: Option<PathBuf>,
    /// `stub` or `remote`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub backend_url: Option<String>,
    /// Render resolution: 128, 256 or 512.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write each conditioning view separately.
    #[arg(long)]
    pub dump_conditioning: bool,
    /// Also save a field checkpoint next to every snapshot.
    #[arg(long)]
    pub dump_snapshots: bool,
}

impl Args {
    pub fn flag_values(&self) -> FlagValues {
        FlagValues {
            mesh: self.mesh.clone(),
            prompt: self.prompt.clone(),
            negative_prompt: self.negative_prompt.clone(),
            lights: self.lights.clone(),
            backend: self.backend.clone(),
            backend_url: self.backend_url.clone(),
            resolution: self.resolution,
            iterations: self.iterations,
            seed: self.seed,
            out: self.out.clone(),
            config: self.config.clone(),
            dump_conditioning: self.dump_conditioning,
            dump_snapshots: self.dump_snapshots,
        }
    }
}

/// Paths of everything a run writes, relative to the output directory.
pub mod layout {
    pub const RESOLVED_CONFIG: &str = "config.resolved.txt";
    pub const RUN_LOG: &str = "run_log.csv";
    pub const REFERENCE_GRID: &str = "reference_grid.png";
    pub const CONDITIONING_GRID: &str = "conditioning_grid.png";
    pub const CHECKPOINT: &str = "field.bin";
    pub const MAPS_DIR: &str = "maps";
    pub const SNAPSHOT_DIR: &str = "snapshots";
    pub const TURNTABLE_DIR: &str = "turntable";

    pub fn reference_view(i: usize) -> String {
        format!("reference_view_{i}.png")
    }

    pub fn conditioning_view(i: usize) -> String {
        format!("conditioning_view_{i}.png")
    }

    pub fn snapshot(iteration: usize) -> String {
        format!("iter_{iteration:04}.png")
    }

    pub fn snapshot_checkpoint(iteration: usize) -> String {
        format!("iter_{iteration:04}.bin")
    }

    pub fn turntable_frame(k: usize) -> String {
        format!("frame_{k:03}.png")
    }
}

/// Loads the lighting pool and prefilters it; entry 0 is the canonical light.
pub fn light_pool(manifest: Option<&Path>) -> Result<Vec<PrefilteredLight>, CliError> {
    let envs: Vec<EnvironmentLight> = match manifest {
        Some(p) => load_light_pool(p)?,
        None => studio_pool(STUDIO_WIDTH),
    };
    if envs.is_empty() {
        return Err(CliError::Config("lighting pool is empty".into()));
    }
    let settings = PrefilterSettings::default();
    let first = PrefilteredLight::build(&envs[0], &settings);
    let lut = Arc::clone(&first.maps().brdf_lut);
    let mut pool = vec![first];
    pool.extend(
        envs[1..]
            .iter()
            .map(|e| PrefilteredLight::build_with_lut(e, &settings, Arc::clone(&lut))),
    );
    Ok(pool)
}

pub fn make_backend(choice: &BackendChoice) -> Result<Box<dyn GuidanceBackend>, CliError> {
    Ok(match choice {
        BackendChoice::Stub => Box::new(StubBackend::echo()),
        BackendChoice::Remote(url) => {
            let remote = RemoteBackend::new(url);
            remote.health().map_err(CliError::Backend)?;
            Box::new(remote)
        }
    })
}

fn write_image(path: &Path, image: &Image) -> Result<(), CliError> {
    write_png8(path, image).map_err(|e: ImageError| output_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| output_error(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| output_error(path, e))
}

fn canonical_grid(mesh: &Mesh, field: &TextureField, setup: &CanonicalSetup) -> Result<Image, CliError> {
    let views: Vec<Image> = render_canonical(mesh, field, &setup.light, setup)?
        .iter()
        .map(|r| tonemap(&r.image))
        .collect();
    Ok(assemble_grid(&views).map_err(PipelineError::from)?)
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub log: Vec<LogRow>,
    pub output_dir: PathBuf,
}

/// Runs both stages for a resolved configuration.
pub fn run(config: &RunConfig) -> Result<RunSummary, CliError> {
    let mesh = Mesh::load(&config.mesh_path).map_err(|source| CliError::Mesh {
        path: config.mesh_path.clone(),
        source,
    })?;
    let pool = light_pool(config.lighting_manifest_path.as_deref())?;
    let backend = make_backend(&config.backend)?;
    let out = &config.output_dir;
    create_dir(out)?;
    write_text(&out.join(layout::RESOLVED_CONFIG), &config.to_config_text())?;

    let setup = CanonicalSetup::new(&mesh, pool[0].clone(), config.resolution)?;
    let prompt = Prompt {
        text: config.prompt.clone(),
        negative: config.negative_prompt.clone(),
    };
    log::info!("stage one: reference generation");
    let refs = stage1_reference(&mesh, &prompt, &setup, backend.as_ref(), config.optim.seed)?;
    write_image(&out.join(layout::REFERENCE_GRID), &refs.grid_image)?;
    for (i, v) in refs.views.iter().enumerate() {
        write_image(&out.join(layout::reference_view(i)), v)?;
    }
    write_image(&out.join(layout::CONDITIONING_GRID), &refs.conditioning_grid)?;
    if config.dump_conditioning {
        for (i, c) in refs.conditioning.iter().enumerate() {
            write_image(&out.join(layout::conditioning_view(i)), &c.image)?;
        }
    }

    log::info!("stage two: {} iterations", config.optim.total_iterations);
    let snapshot_dir = out.join(layout::SNAPSHOT_DIR);
    create_dir(&snapshot_dir)?;
    let scene = Scene {
        mesh: &mesh,
        setup: &setup,
        pool: &pool,
        references: Some(&refs),
    };
    let field = TextureField::new(FieldConfig::default(), config.optim.seed);
    let mut snapshot_error = None;
    let optimized = optimize(scene, &prompt, &config.optim, backend.as_ref(), field, |row, field| {
        let done = row.iteration + 1;
        if done % 10 == 0 {
            log::info!("iteration {done}: total {:.5}", row.total);
        }
        if done % SNAPSHOT_EVERY == 0 && snapshot_error.is_none() {
            let mut result = canonical_grid(&mesh, field, &setup)
                .and_then(|g| write_image(&snapshot_dir.join(layout::snapshot(done)), &g));
            if config.dump_snapshots && result.is_ok() {
                let path = snapshot_dir.join(layout::snapshot_checkpoint(done));
                result = save_checkpoint(field, &path).map_err(|e| output_error(&path, e));
            }
            snapshot_error = result.err();
        }
    })?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    if optimized.skipped() > 0 {
        log::warn!("{} iterations skipped after backend failures", optimized.skipped());
    }

    write_text(&out.join(layout::RUN_LOG), &log_to_csv(&optimized.log))?;

    let checkpoint = out.join(layout::CHECKPOINT);
    save_checkpoint(&optimized.field, &checkpoint).map_err(|e: FieldError| output_error(&checkpoint, e))?;
    let maps_dir = out.join(layout::MAPS_DIR);
    create_dir(&maps_dir)?;
    let maps = bake_uv(&mesh, &optimized.field, config.bake_resolution).map_err(PipelineError::from)?;
    maps.write_pngs(&maps_dir).map_err(|e| output_error(&maps_dir, e))?;

    let tt_dir = out.join(layout::TURNTABLE_DIR);
    create_dir(&tt_dir)?;
    for (k, frame) in turntable(&mesh, &optimized.field, &setup.light, &setup, config.turntable_frames)?
        .iter()
        .enumerate()
    {
        write_image(&tt_dir.join(layout::turntable_frame(k)), &tonemap(&frame.image))?;
    }

    Ok(RunSummary {
        log: optimized.log,
        output_dir: out.clone(),
    })
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let env_url = std::env::var(BACKEND_URL_ENV).ok().filter(|s| !s.is_empty());
    let result = resolve(&args.flag_values(), env_url).and_then(|c| run(&c));
    match result {
        Ok(summary) => {
            log::info!("wrote {}", summary.output_dir.display());
            0
        }
        Err(e) => {
            eprintln!("relitex: {e}");
            e.exit_code()
        }
    }
}

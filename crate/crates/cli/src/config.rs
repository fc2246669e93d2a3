//! Run configuration from flags, a key=value file and defaults.
//!
//! File grammar: one `key = value` pair per line; blank lines and lines
//! starting with `#` are ignored, and ` #` starts a trailing comment. A value
//! may be wrapped in double quotes to keep `#` or surrounding spaces.
//! Precedence is flags, then `RELITEX_BACKEND_URL` (backend URL only), then
//! the file, then defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relitex_core::pipeline::OptimConfig;

use crate::CliError;

pub const BACKEND_URL_ENV: &str = "RELITEX_BACKEND_URL";
pub const RESOLUTIONS: [usize; 3] = [128, 256, 512];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Stub,
    Remote(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh_path: PathBuf,
    pub prompt: String,
    pub negative_prompt: String,
    /// Lighting manifest; the built-in studio pool when absent.
    pub lighting_manifest_path: Option<PathBuf>,
    pub backend: BackendChoice,
    pub resolution: usize,
    pub optim: OptimConfig,
    pub output_dir: PathBuf,
    pub dump_conditioning: bool,
    pub dump_snapshots: bool,
    pub turntable_frames: usize,
    pub bake_resolution: usize,
}

/// Values given on the command line; `None` means not given.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagValues {
    pub mesh: Option<PathBuf>,
    pub prompt: Option<String>,
    pub negative_prompt: Option<String>,
    pub lights: Option<PathBuf>,
    pub backend: Option<String>,
    pub backend_url: Option<String>,
    pub resolution: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub dump_conditioning: bool,
    pub dump_snapshots: bool,
}

/// Every key the config file accepts.
pub const FILE_KEYS: &[&str] = &[
    "mesh",
    "prompt",
    "negative_prompt",
    "lights",
    "backend",
    "backend_url",
    "resolution",
    "iterations",
    "seed",
    "out",
    "dump_conditioning",
    "dump_snapshots",
    "warmup_iterations",
    "batch",
    "lr",
    "lambda_recon",
    "lambda_reg",
    "t_max",
    "t_min",
    "cfg_scale",
    "reg_samples",
    "reg_epsilon",
    "turntable_frames",
    "bake_resolution",
];

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'"' => in_quotes = !in_quotes,
            b'#' if !in_quotes && (i == 0 || bytes[i - 1].is_ascii_whitespace()) => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses the key=value format. Paths are kept as written.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_error(format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim();
        if !FILE_KEYS.contains(&key) {
            return Err(config_error(format!("config line {}: unknown key {key:?}", n + 1)));
        }
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(config_error(format!("config line {}: duplicate key {key:?}", n + 1)));
        }
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| config_error(format!("invalid value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(config_error(format!("invalid boolean {v:?} for {key}"))),
    }
}

/// Merges flags, environment and file into a validated configuration.
/// Relative paths from the file resolve against the file's directory.
pub fn resolve(flags: &FlagValues, env_backend_url: Option<String>) -> Result<RunConfig, CliError> {
    let (file, base) = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
            (parse_config_text(&text)?, path.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (BTreeMap::new(), PathBuf::new()),
    };
    let file_path = |k: &str| file.get(k).map(|v| base.join(v));
    let get = |k: &str| file.get(k).map(String::as_str);

    let mesh_path = flags
        .mesh
        .clone()
        .or_else(|| file_path("mesh"))
        .ok_or_else(|| config_error("no mesh given (--mesh or `mesh` in the config file)"))?;
    let prompt = flags
        .prompt
        .clone()
        .or_else(|| get("prompt").map(str::to_string))
        .ok_or_else(|| config_error("no prompt given (--prompt or `prompt` in the config file)"))?;
    let negative_prompt = flags
        .negative_prompt
        .clone()
        .or_else(|| get("negative_prompt").map(str::to_string))
        .unwrap_or_default();
    let lighting_manifest_path = flags.lights.clone().or_else(|| file_path("lights"));
    if let Some(p) = &lighting_manifest_path {
        if !p.is_file() {
            return Err(config_error(format!("lighting manifest {} not found", p.display())));
        }
    }

    let backend_name = flags
        .backend
        .clone()
        .or_else(|| get("backend").map(str::to_string))
        .unwrap_or_else(|| "stub".into());
    let url = flags
        .backend_url
        .clone()
        .or(env_backend_url)
        .or_else(|| get("backend_url").map(str::to_string));
    let backend = match backend_name.as_str() {
        "stub" => BackendChoice::Stub,
        "remote" => BackendChoice::Remote(url.ok_or_else(|| {
            config_error(format!("remote backend needs --backend-url or {BACKEND_URL_ENV}"))
        })?),
        other => return Err(config_error(format!("unknown backend {other:?} (stub or remote)"))),
    };

    let resolution = match flags.resolution {
        Some(r) => r,
        None => get("resolution").map(|v| parse_value("resolution", v)).transpose()?.unwrap_or(256),
    };
    if !RESOLUTIONS.contains(&resolution) {
        return Err(config_error(format!("resolution {resolution} not one of {RESOLUTIONS:?}")));
    }

    let mut optim = OptimConfig::default();
    macro_rules! file_field {
        ($($key:literal => $field:ident),* $(,)?) => {
            $(if let Some(v) = get($key) { optim.$field = parse_value($key, v)?; })*
        };
    }
    file_field!(
        "iterations" => total_iterations,
        "warmup_iterations" => warmup_iterations,
        "batch" => batch,
        "lr" => lr,
        "lambda_recon" => lambda_recon,
        "lambda_reg" => lambda_reg,
        "t_max" => t_max,
        "t_min" => t_min,
        "cfg_scale" => cfg_scale,
        "reg_samples" => reg_samples,
        "reg_epsilon" => reg_epsilon,
        "seed" => seed,
    );
    if let Some(n) = flags.iterations {
        optim.total_iterations = n;
    }
    if let Some(s) = flags.seed {
        optim.seed = s;
    }
    // A run shorter than the warm-up is all warm-up.
    optim.warmup_iterations = optim.warmup_iterations.min(optim.total_iterations);
    optim.validate().map_err(|e| config_error(e.to_string()))?;

    let output_dir = flags
        .out
        .clone()
        .or_else(|| file_path("out"))
        .unwrap_or_else(|| PathBuf::from("relitex-out"));
    let dump_conditioning =
        flags.dump_conditioning || get("dump_conditioning").map(|v| parse_bool("dump_conditioning", v)).transpose()?.unwrap_or(false);
    let dump_snapshots =
        flags.dump_snapshots || get("dump_snapshots").map(|v| parse_bool("dump_snapshots", v)).transpose()?.unwrap_or(false);
    let turntable_frames = get("turntable_frames")
        .map(|v| parse_value("turntable_frames", v))
        .transpose()?
        .unwrap_or(36);
    let bake_resolution = get("bake_resolution")
        .map(|v| parse_value("bake_resolution", v))
        .transpose()?
        .unwrap_or(1024);
    if bake_resolution < 64 {
        return Err(config_error(format!("bake_resolution must be at least 64, got {bake_resolution}")));
    }

    Ok(RunConfig {
        mesh_path,
        prompt,
        negative_prompt,
        lighting_manifest_path,
        backend,
        resolution,
        optim,
        output_dir,
        dump_conditioning,
        dump_snapshots,
        turntable_frames,
        bake_resolution,
    })
}

impl RunConfig {
    /// The configuration in the file format, with every key spelled out.
    pub fn to_config_text(&self) -> String {
        let o = &self.optim;
        let (backend, url) = match &self.backend {
            BackendChoice::Stub => ("stub", String::new()),
            BackendChoice::Remote(u) => ("remote", u.clone()),
        };
        let lights = self
            .lighting_manifest_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let pairs: Vec<(&str, String)> = vec![
            ("mesh", self.mesh_path.display().to_string()),
            ("prompt", self.prompt.clone()),
            ("negative_prompt", self.negative_prompt.clone()),
            ("lights", lights),
            ("backend", backend.into()),
            ("backend_url", url),
            ("resolution", self.resolution.to_string()),
            ("iterations", o.total_iterations.to_string()),
            ("seed", o.seed.to_string()),
            ("out", self.output_dir.display().to_string()),
            ("dump_conditioning", self.dump_conditioning.to_string()),
            ("dump_snapshots", self.dump_snapshots.to_string()),
            ("warmup_iterations", o.warmup_iterations.to_string()),
            ("batch", o.batch.to_string()),
            ("lr", o.lr.to_string()),
            ("lambda_recon", o.lambda_recon.to_string()),
            ("lambda_reg", o.lambda_reg.to_string()),
            ("t_max", o.t_max.to_string()),
            ("t_min", o.t_min.to_string()),
            ("cfg_scale", o.cfg_scale.to_string()),
            ("reg_samples", o.reg_samples.to_string()),
            ("reg_epsilon", o.reg_epsilon.to_string()),
            ("turntable_frames", self.turntable_frames.to_string()),
            ("bake_resolution", self.bake_resolution.to_string()),
        ];
        pairs
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k} = \"{v}\"\n"))
            .collect()
    }
}

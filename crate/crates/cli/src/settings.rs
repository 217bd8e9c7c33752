//! Flag, config-file and default resolution.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use vgd_core::backends::gateway::GATEWAY_URL_ENV;
use vgd_core::config::{DEFAULT_ALPHA, DEFAULT_BEAM_WIDTH, DEFAULT_INIT_TOKENS, DEFAULT_MAX_CLIP_TOKENS};
use vgd_core::{DecodeConfig, Mode};

use crate::args::GlobalArgs;

/// Keys accepted in the `--config` file. Relative paths are taken from the
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub beam: Option<usize>,
    pub alpha: Option<f64>,
    pub init_tokens: Option<usize>,
    pub tokens: Option<usize>,
    pub mode: Option<String>,
    pub template_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub logit_scale: Option<f64>,
    pub cache: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub json: Option<bool>,
    pub trace: Option<PathBuf>,
    pub dry_run: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.template_file,
            &mut cfg.cache,
            &mut cfg.vocab,
            &mut cfg.trace,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(spec) = cfg.backend.as_mut() {
            if let Some(file) = spec.strip_prefix("toy:") {
                if Path::new(file).is_relative() {
                    *spec = format!("toy:{}", base.join(file).display());
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub backend: Option<String>,
    pub beam: usize,
    pub alpha: f64,
    pub init_tokens: usize,
    pub tokens: usize,
    pub mode: Mode,
    pub template_file: Option<PathBuf>,
    pub seed: u64,
    /// `None` means the backend's own scale.
    pub logit_scale: Option<f64>,
    pub cache: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub json: bool,
    pub trace: Option<PathBuf>,
    pub dry_run: bool,
}

impl Settings {
    /// Flag > config file > environment > built-in default.
    pub fn resolve(args: &GlobalArgs, file: FileConfig, env_gateway: Option<String>) -> anyhow::Result<Self> {
        let mode = match (args.mode, file.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse().map_err(|e| anyhow::anyhow!("config file: {e}"))?,
            (None, None) => Mode::Full,
        };
        let settings = Self {
            backend: args
                .backend
                .clone()
                .or(file.backend)
                .or_else(|| env_gateway.map(|url| format!("gateway:{url}"))),
            beam: args.beam.or(file.beam).unwrap_or(DEFAULT_BEAM_WIDTH),
            alpha: args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            init_tokens: args.init_tokens.or(file.init_tokens).unwrap_or(DEFAULT_INIT_TOKENS),
            tokens: args.tokens.or(file.tokens).unwrap_or(DEFAULT_MAX_CLIP_TOKENS),
            mode,
            template_file: args.template_file.clone().or(file.template_file),
            seed: args.seed.or(file.seed).unwrap_or(0),
            logit_scale: args.logit_scale.or(file.logit_scale),
            cache: args.cache.clone().or(file.cache),
            vocab: args.vocab.clone().or(file.vocab),
            json: args.json || file.json.unwrap_or(false),
            trace: args.trace.clone().or(file.trace),
            dry_run: args.dry_run || file.dry_run.unwrap_or(false),
        };
        settings.decode_config(settings.logit_scale.unwrap_or(1.0)).validate()?;
        Ok(settings)
    }

    pub fn from_args(args: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let env = std::env::var(GATEWAY_URL_ENV).ok().filter(|s| !s.is_empty());
        Self::resolve(args, file, env)
    }

    pub fn decode_config(&self, backend_scale: f64) -> DecodeConfig {
        DecodeConfig {
            beam_width: self.beam,
            init_tokens: self.init_tokens,
            alpha: self.alpha,
            max_clip_tokens: self.tokens,
            logit_scale: self.logit_scale.unwrap_or(backend_scale),
            mode: self.mode,
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn backend_spec(&self) -> anyhow::Result<BackendSpec> {
        let Some(spec) = &self.backend else {
            return Err(Usage(format!(
                "no backend: pass --backend toy:FILE or gateway:URL, or set {GATEWAY_URL_ENV}"
            ))
            .into());
        };
        if let Some(file) = spec.strip_prefix("toy:") {
            Ok(BackendSpec::Toy(PathBuf::from(file)))
        } else if let Some(url) = spec.strip_prefix("gateway:") {
            Ok(BackendSpec::Gateway(url.to_string()))
        } else {
            Err(Usage(format!("backend {spec:?} must start with toy: or gateway:")).into())
        }
    }
}

/// A configuration mistake the user can fix by changing flags.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Toy(PathBuf),
    Gateway(String),
}

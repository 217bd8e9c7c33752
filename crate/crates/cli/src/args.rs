use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vgd_core::Mode;

/// Find readable text-to-image prompts by visually guided beam search.
#[derive(Debug, Parser)]
#[command(name = "vgd", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each also has a key of the same name
/// (dashes as underscores) in the `--config` file.
#[derive(Debug, Default, Clone, Args)]
pub struct GlobalArgs {
    /// TOML file with defaults for any of the flags below.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Scorer backend: `toy:FILE` or `gateway:URL` [default: gateway:$VGD_GATEWAY_URL].
    #[arg(long, global = true, value_name = "SPEC")]
    pub backend: Option<String>,

    /// Beam width K [default: 10].
    #[arg(long, global = true, value_name = "K")]
    pub beam: Option<usize>,

    /// Weight of the LM log-probability [default: 0.67].
    #[arg(long, global = true, value_name = "A")]
    pub alpha: Option<f64>,

    /// Vocabulary tokens used to seed the beam [default: 1].
    #[arg(long, global = true, value_name = "M")]
    pub init_tokens: Option<usize>,

    /// Alignment-token budget of the prompt [default: 32].
    #[arg(long, global = true, value_name = "N")]
    pub tokens: Option<usize>,

    /// Which objective terms drive pruning [default: full].
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<Mode>,

    /// TOML or JSON file overriding the built-in chat templates.
    #[arg(long, global = true, value_name = "FILE")]
    pub template_file: Option<PathBuf>,

    /// Recorded with the run; decoding itself is deterministic [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Alignment logit scale [default: the backend's].
    #[arg(long, global = true)]
    pub logit_scale: Option<f64>,

    /// Precomputed vocabulary cache [default: built in memory].
    #[arg(long, global = true, value_name = "FILE")]
    pub cache: Option<PathBuf>,

    /// Vocabulary file, one token per line, line number = token id.
    #[arg(long, global = true, value_name = "FILE")]
    pub vocab: Option<PathBuf>,

    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,

    /// Write the decode trace as JSON lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub trace: Option<PathBuf>,

    /// Print the resolved settings and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|_| format!("expected full, llm-only or clip-only, got {s:?}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a prompt for one image.
    Invert {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
    },
    /// Find one prompt for the style shared by several images.
    Style {
        #[arg(long, value_name = "PATH", num_args = 2.., required = true)]
        images: Vec<PathBuf>,
    },
    /// Shorten a prompt to a smaller token budget.
    Distill {
        #[arg(long)]
        prompt: String,
        #[arg(long, value_name = "N")]
        max_tokens: usize,
    },
    /// Join prompts into one multi-concept prompt.
    Fuse {
        #[arg(long, num_args = 2.., required = true)]
        prompts: Vec<String>,
    },
    /// Report how well a prompt matches an image.
    Score {
        #[arg(long)]
        prompt: String,
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        /// An image generated from the prompt, compared against `--image`.
        #[arg(long, value_name = "PATH")]
        generated: Option<PathBuf>,
    },
    /// Build or inspect a vocabulary embedding cache.
    #[command(subcommand)]
    Cache(CacheCommand),
    /// Work with decode traces.
    #[command(subcommand)]
    Trace(TraceCommand),
}

#[derive(Debug, Subcommand)]
pub enum CacheCommand {
    /// Embed every vocabulary token and write the cache.
    Build {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Print a cache file's header.
    Inspect { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    /// Recompute every recorded score and check the bookkeeping.
    Replay { file: PathBuf },
}

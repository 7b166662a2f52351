//! Library side of the `nmmp` command-line tool.
//!
//! Every command writes its outputs under `--out` and finishes by writing
//! `manifest.json`, which lists each produced file with its SHA-256.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nmmp::SystemKind;

mod commands;
pub mod svg;
pub mod tsne;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "nmmp", version, about = "Multi-actor trajectory forecasting with neural motion message passing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and evaluate it on the held-out scenes.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Write per-actor predictions as JSON lines.
    Predict(PredictArgs),
    /// Project interaction embeddings to 2-D and plot nearest pairs.
    VizEmbeddings(VizEmbeddingsArgs),
    /// Overlay ground truth and predictions, one SVG per scene.
    VizTrajectories(VizTrajectoriesArgs),
    /// Generate a synthetic dataset with its manifest.
    Synth(SynthArgs),
    /// Render joint scenes to bird's-eye images.
    Rasterize(RasterizeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Pedestrian,
    Joint,
}

impl From<SystemArg> for SystemKind {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::Pedestrian => SystemKind::Pedestrian,
            SystemArg::Joint => SystemKind::Joint,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Held-out set name for leave-one-out; without it the `train`/`val`/`test` sets are used.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `eval_k` from the config.
    #[arg(long)]
    pub k: Option<usize>,
    /// Overrides `system` from the config.
    #[arg(long, value_enum)]
    pub system: Option<SystemArg>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub system: Option<SystemArg>,
    /// Crowd-split bucket edges on actor count, e.g. `1,3,6`.
    #[arg(long, value_delimiter = ',')]
    pub buckets: Vec<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub system: Option<SystemArg>,
}

#[derive(Args, Debug, Clone)]
pub struct VizEmbeddingsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of nearest-pair trajectory figures.
    #[arg(long, default_value_t = 3)]
    pub pairs: usize,
    /// Caps the number of projected interactions.
    #[arg(long, default_value_t = 2000)]
    pub max_points: usize,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct VizTrajectoriesArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Optional second checkpoint drawn in blue.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of scenes to plot.
    #[arg(long, default_value_t = 8)]
    pub limit: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "pedestrian")]
    pub system: SystemArg,
    /// `parallel_group`, `head_on_avoidance` or `leader_follower` (pedestrian only).
    #[arg(long, default_value = "leader_follower")]
    pub rule: String,
    #[arg(long, default_value_t = 500)]
    pub train_scenes: usize,
    #[arg(long, default_value_t = 100)]
    pub test_scenes: usize,
    #[arg(long, default_value_t = 3)]
    pub actors: usize,
    #[arg(long)]
    pub t_obs: Option<usize>,
    #[arg(long)]
    pub t_pred: Option<usize>,
    #[arg(long)]
    pub timestep: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Ppm,
    Png,
    Both,
}

#[derive(Args, Debug, Clone)]
pub struct RasterizeArgs {
    /// Joint scenes, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Training config whose `joint.raster` table sets the image geometry.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "ppm")]
    pub format: ImageFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Data,
    Divergence,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Divergence => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind, "code": self.exit_code(), "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<nmmp::Error> for CliError {
    fn from(e: nmmp::Error) -> Self {
        let kind = match e {
            nmmp::Error::Config(_) => ErrorKind::Config,
            nmmp::Error::Divergence(_) => ErrorKind::Divergence,
            _ => ErrorKind::Data,
        };
        Self { kind, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    /// SHA-256 of the resolved configuration TOML.
    pub config_hash: Option<String>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn artifact(&self, path: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory that records every file written through it.
pub(crate) struct RunDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl RunDir {
    pub(crate) fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::data(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        if name == MANIFEST_FILE || self.artifacts.iter().any(|a| a.path == name) {
            return Err(CliError::data(format!("output `{name}` written twice")));
        }
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        self.artifacts.push(Artifact { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub(crate) fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub(crate) fn finish(
        self,
        command: &str,
        config_path: Option<&Path>,
        config_hash: Option<String>,
        seed: u64,
    ) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            config_hash,
            seed,
            output_dir: self.root.clone(),
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))? + "\n";
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}

pub fn run(cli: Cli) -> CliResult<RunManifest> {
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::VizEmbeddings(a) => commands::viz_embeddings(a),
        Command::VizTrajectories(a) => commands::viz_trajectories(a),
        Command::Synth(a) => commands::synth(a),
        Command::Rasterize(a) => commands::rasterize(a),
    }
}

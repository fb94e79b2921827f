//! Run configuration: command-line flags over a TOML file over environment
//! over defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use egoground::pipeline::DEFAULT_TAU;
use egoground::scorers::{DirectionStrategy, ENV_API_BASE, ENV_API_KEY};
use egoground::{CoordinateMode, TaskKind};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_FAMILY: &str = "qwen3-vl";
pub const DEFAULT_OUT: &str = "runs";
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;
/// Also the bound on concurrent endpoint requests.
pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Edg,
    Drec,
    Pog,
    Dvqa,
    All,
}

impl TaskArg {
    pub fn tasks(self) -> Vec<TaskKind> {
        match self {
            TaskArg::Edg => vec![TaskKind::Edg],
            TaskArg::Drec => vec![TaskKind::DRec],
            TaskArg::Pog => vec![TaskKind::Pog],
            TaskArg::Dvqa => vec![TaskKind::DVqa],
            TaskArg::All => TaskKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Svcot,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifierKind {
    Mock,
    Remote,
}

/// Flags of `run`. Every field is optional so that unset flags fall through
/// to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Dataset document to evaluate
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML file with any of the settings below
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineKind>,
    /// Semantic verifier for the svcot engine
    #[arg(long, value_enum)]
    pub verifier: Option<VerifierKind>,
    /// fixture_gt, keypoint_heuristic or remote
    #[arg(long)]
    pub direction: Option<DirectionStrategy>,
    /// Coordinate mode of the direct engine's output (defaults to the template's)
    #[arg(long)]
    pub mode: Option<CoordinateMode>,
    /// Rejection threshold
    #[arg(long)]
    pub tau: Option<f64>,
    /// Pruning cone half-angle in radians
    #[arg(long)]
    pub cone_half_angle: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// First case index
    #[arg(long)]
    pub start: Option<usize>,
    /// Exclusive end index, -1 for the whole set
    #[arg(long, allow_hyphen_values = true)]
    pub end: Option<i64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output root; each task writes to <out>/<task>
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep existing complete records and run only the missing cases
    #[arg(long)]
    pub resume: bool,
    /// Prompt template family for the direct engine
    #[arg(long)]
    pub model_family: Option<String>,
    /// Model name sent to the endpoint (defaults to the family)
    #[arg(long)]
    pub model: Option<String>,
    /// Directory of extra `<task>__<family>__<mode>.txt` templates
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Directory holding the images named by the dataset
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    /// Endpoint base URL (overrides EGO_API_BASE)
    #[arg(long)]
    pub api_base: Option<String>,
    /// Request timeout in seconds
    #[arg(long)]
    pub timeout: Option<u64>,
}

/// Contents of a `run --config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub task: Option<TaskArg>,
    pub engine: Option<EngineKind>,
    pub verifier: Option<VerifierKind>,
    pub direction: Option<DirectionStrategy>,
    pub mode: Option<CoordinateMode>,
    pub tau: Option<f64>,
    pub cone_half_angle: Option<f64>,
    pub seed: Option<u64>,
    pub start: Option<usize>,
    pub end: Option<i64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub resume: Option<bool>,
    pub model_family: Option<String>,
    pub model: Option<String>,
    pub templates: Option<PathBuf>,
    pub image_root: Option<PathBuf>,
    pub api_base: Option<String>,
    pub api_key: Option<String>,
    pub timeout: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

/// Fully resolved `run` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub tasks: Vec<TaskKind>,
    pub engine: EngineKind,
    pub verifier: VerifierKind,
    pub direction: DirectionStrategy,
    pub mode: Option<CoordinateMode>,
    pub tau: f64,
    pub cone_half_angle: f64,
    pub seed: u64,
    pub start: usize,
    pub end: i64,
    pub workers: usize,
    pub out: PathBuf,
    pub resume: bool,
    pub model_family: String,
    pub templates: Option<PathBuf>,
    pub image_root: Option<PathBuf>,
    pub endpoint: Option<Endpoint>,
}

impl RunConfig {
    pub fn needs_endpoint(&self) -> bool {
        self.engine == EngineKind::Direct
            || (self.engine == EngineKind::Svcot
                && (self.verifier == VerifierKind::Remote || self.direction == DirectionStrategy::Remote))
    }
}

/// Merges the layers. `env` looks up environment variables.
pub fn resolve(
    args: &RunArgs,
    file: &FileConfig,
    env: impl Fn(&str) -> Option<String>,
) -> Result<RunConfig, CliError> {
    let env_base = env(ENV_API_BASE).filter(|s| !s.trim().is_empty());
    let env_key = env(ENV_API_KEY).filter(|s| !s.is_empty());

    let data = args
        .data
        .clone()
        .or_else(|| file.data.clone())
        .ok_or_else(|| CliError::Config("no dataset given (use --data or `data` in the config file)".into()))?;
    let model_family = args
        .model_family
        .clone()
        .or_else(|| file.model_family.clone())
        .unwrap_or_else(|| DEFAULT_FAMILY.to_string());
    let timeout = Duration::from_secs(args.timeout.or(file.timeout).unwrap_or(DEFAULT_TIMEOUT_SECS));

    let mut cfg = RunConfig {
        data,
        tasks: args.task.or(file.task).unwrap_or(TaskArg::Edg).tasks(),
        engine: args.engine.or(file.engine).unwrap_or(EngineKind::Svcot),
        verifier: args.verifier.or(file.verifier).unwrap_or(VerifierKind::Mock),
        direction: args.direction.or(file.direction).unwrap_or(DirectionStrategy::FixtureGt),
        mode: args.mode.or(file.mode),
        tau: args.tau.or(file.tau).unwrap_or(DEFAULT_TAU),
        cone_half_angle: args.cone_half_angle.or(file.cone_half_angle).unwrap_or(0.0),
        seed: args.seed.or(file.seed).unwrap_or(0),
        start: args.start.or(file.start).unwrap_or(0),
        end: args.end.or(file.end).unwrap_or(-1),
        workers: args.workers.or(file.workers).unwrap_or(DEFAULT_WORKERS),
        out: args
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        resume: args.resume || file.resume.unwrap_or(false),
        templates: args.templates.clone().or_else(|| file.templates.clone()),
        image_root: args.image_root.clone().or_else(|| file.image_root.clone()),
        endpoint: None,
        model_family: model_family.clone(),
    };

    let base = args.api_base.clone().or_else(|| file.api_base.clone()).or(env_base);
    if let Some(base_url) = base {
        cfg.endpoint = Some(Endpoint {
            base_url,
            api_key: file.api_key.clone().or(env_key),
            model: args
                .model
                .clone()
                .or_else(|| file.model.clone())
                .unwrap_or(model_family),
            timeout,
        });
    }
    check(&cfg)?;
    Ok(cfg)
}

fn check(cfg: &RunConfig) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&cfg.tau) {
        return Err(CliError::Config(format!("tau must be in [0, 1], got {}", cfg.tau)));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&cfg.cone_half_angle) {
        return Err(CliError::Config(format!(
            "cone half-angle must be in [0, pi/2), got {}",
            cfg.cone_half_angle
        )));
    }
    if cfg.workers == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    if cfg.end < -1 {
        return Err(CliError::Config(format!("end must be -1 or an index, got {}", cfg.end)));
    }
    if cfg.end >= 0 && (cfg.start as i64) > cfg.end {
        return Err(CliError::Config(format!("start {} is past end {}", cfg.start, cfg.end)));
    }
    if cfg.needs_endpoint() && cfg.endpoint.is_none() {
        let what = match cfg.engine {
            EngineKind::Direct => "the direct engine",
            EngineKind::Svcot if cfg.verifier == VerifierKind::Remote => "the remote verifier",
            EngineKind::Svcot => "the remote direction estimator",
        };
        return Err(CliError::Config(format!(
            "{what} needs an endpoint: set {ENV_API_BASE} or pass --api-base"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    fn args_with_data() -> RunArgs {
        RunArgs {
            data: Some("d.json".into()),
            ..RunArgs::default()
        }
    }

    #[test]
    fn defaults() {
        let c = resolve(&args_with_data(), &FileConfig::default(), no_env).unwrap();
        assert_eq!(c.tasks, vec![TaskKind::Edg]);
        assert_eq!(c.engine, EngineKind::Svcot);
        assert_eq!(c.verifier, VerifierKind::Mock);
        assert_eq!(c.direction, DirectionStrategy::FixtureGt);
        assert_eq!((c.tau, c.start, c.end, c.workers), (DEFAULT_TAU, 0, -1, DEFAULT_WORKERS));
        assert_eq!(c.endpoint, None);
    }

    #[test]
    fn flags_beat_file_beat_env() {
        let file: FileConfig = toml::from_str(
            "tau = 0.3\nworkers = 6\napi_base = \"http://file\"\ntask = \"all\"\ndirection = \"keypoint_heuristic\"\n",
        )
        .unwrap();
        let env = |k: &str| (k == ENV_API_BASE).then(|| "http://env".to_string());
        let mut args = args_with_data();
        args.tau = Some(0.7);
        let c = resolve(&args, &file, env).unwrap();
        assert_eq!(c.tau, 0.7);
        assert_eq!(c.workers, 6);
        assert_eq!(c.tasks.len(), 4);
        assert_eq!(c.direction, DirectionStrategy::KeypointHeuristic);
        assert_eq!(c.endpoint.as_ref().unwrap().base_url, "http://file");

        let c = resolve(&args, &FileConfig::default(), env).unwrap();
        assert_eq!(c.endpoint.unwrap().base_url, "http://env");
        args.api_base = Some("http://flag".into());
        let c = resolve(&args, &file, env).unwrap();
        assert_eq!(c.endpoint.unwrap().base_url, "http://flag");
    }

    #[test]
    fn direct_without_endpoint_is_a_config_error() {
        let mut args = args_with_data();
        args.engine = Some(EngineKind::Direct);
        args.task = Some(TaskArg::Pog);
        let err = resolve(&args, &FileConfig::default(), no_env).unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains(ENV_API_BASE)), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        for patch in [
            |a: &mut RunArgs| a.tau = Some(1.5),
            |a: &mut RunArgs| a.workers = Some(0),
            |a: &mut RunArgs| a.end = Some(-3),
            |a: &mut RunArgs| {
                a.start = Some(20);
                a.end = Some(10);
            },
            |a: &mut RunArgs| a.data = None,
        ] {
            let mut args = args_with_data();
            patch(&mut args);
            assert!(resolve(&args, &FileConfig::default(), no_env).is_err());
        }
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}

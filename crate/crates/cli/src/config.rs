//! Flag and config-file resolution. Every flag has a config key of the same
//! name; flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use autog_core::oracle::{ScorerConfig, Task, DEFAULT_BUDGET};
use autog_core::planner::{read_transcript, ChatClient, LiveClient, PlannerConfig, ReplayClient, DEFAULT_RUNS};
use autog_core::synth::BenchSpec;
use autog_core::BuildMode;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// YAML config file; keys mirror the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Schema file; repeat to evaluate several.
    #[arg(long)]
    pub schema: Vec<PathBuf>,
    /// Payload root; defaults to the schema file's directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Task file (JSON or YAML): one task or a list.
    #[arg(long)]
    pub task: Option<PathBuf>,
    /// Task to pick from a task list; defaults to the first.
    #[arg(long)]
    pub task_name: Option<String>,
    /// row2node, row2node_edge or both.
    #[arg(long)]
    pub mode: Option<String>,
    /// replay:PATH or live:PROFILE.
    #[arg(long)]
    pub client: Option<String>,
    /// Shorthand for --client replay:PATH.
    #[arg(long, conflicts_with = "client")]
    pub replay: Option<PathBuf>,
    /// Independent planner sessions for AutoG-A [default: 3].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Fraction of training labels the oracle may use, in (0, 1] [default: 0.1].
    #[arg(long)]
    pub budget: Option<f64>,
    /// Base seed for splits, sampling and the planner.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveProfile {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

/// The config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub schema: Vec<PathBuf>,
    pub data: Option<PathBuf>,
    pub task: Option<PathBuf>,
    pub task_name: Option<String>,
    pub mode: Option<String>,
    pub client: Option<String>,
    pub runs: Option<usize>,
    pub budget: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Natural-language task description for the planner prompt.
    pub goal: Option<String>,
    pub live_profiles: BTreeMap<String, LiveProfile>,
    pub basket: Option<Vec<ScorerConfig>>,
    pub planner: Option<PlannerConfig>,
    pub synth: Option<BenchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ClientSpec {
    Replay(PathBuf),
    Live(LiveProfile),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub schema: Vec<PathBuf>,
    pub data: Option<PathBuf>,
    pub task: Option<PathBuf>,
    pub task_name: Option<String>,
    pub modes: Vec<BuildMode>,
    pub client: Option<ClientSpec>,
    pub runs: usize,
    pub budget: f64,
    pub seed: u64,
    /// Set when a seed came from a flag or the config file; it then also
    /// replaces the task file's split seed.
    pub seed_given: bool,
    pub out: PathBuf,
    pub goal: Option<String>,
    pub basket: Option<Vec<ScorerConfig>>,
    pub planner: PlannerConfig,
    pub synth: BenchSpec,
}

fn parse_modes(s: &str) -> Result<Vec<BuildMode>, UsageError> {
    match s {
        "both" => Ok(BuildMode::ALL.to_vec()),
        other => other.parse::<BuildMode>().map(|m| vec![m]).map_err(UsageError),
    }
}

fn parse_client(s: &str, profiles: &BTreeMap<String, LiveProfile>) -> Result<ClientSpec, UsageError> {
    if let Some(path) = s.strip_prefix("replay:") {
        if path.is_empty() {
            return Err(UsageError("replay client needs a transcript path".into()));
        }
        return Ok(ClientSpec::Replay(PathBuf::from(path)));
    }
    if let Some(name) = s.strip_prefix("live:") {
        return profiles
            .get(name)
            .cloned()
            .map(ClientSpec::Live)
            .ok_or_else(|| UsageError(format!("live profile '{name}' is not defined under live_profiles")));
    }
    Err(UsageError(format!("client '{s}' must be replay:PATH or live:PROFILE")))
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, UsageError> {
        let file: FileConfig = match &args.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                serde_yaml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let mode = args.mode.clone().or(file.mode.clone()).unwrap_or_else(|| "both".into());
        let client = match (&args.replay, &args.client) {
            (Some(p), _) => Some(ClientSpec::Replay(p.clone())),
            (None, Some(c)) => Some(parse_client(c, &file.live_profiles)?),
            (None, None) => file.client.as_deref().map(|c| parse_client(c, &file.live_profiles)).transpose()?,
        };
        let budget = args.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);
        if !(budget > 0.0 && budget <= 1.0) {
            return Err(UsageError(format!("budget {budget} must lie in (0, 1]")));
        }
        let runs = args.runs.or(file.runs).unwrap_or(DEFAULT_RUNS);
        if runs == 0 {
            return Err(UsageError("runs must be at least 1".into()));
        }
        let given = args.seed.or(file.seed);
        let mut planner = file.planner.clone().unwrap_or_default();
        let mut synth = file.synth.clone().unwrap_or_default();
        if let Some(s) = given {
            planner.seed = s;
            synth.seed = s;
        }
        let seed = given.unwrap_or(planner.seed);
        Ok(Self {
            schema: if args.schema.is_empty() { file.schema.clone() } else { args.schema.clone() },
            data: args.data.clone().or(file.data.clone()),
            task: args.task.clone().or(file.task.clone()),
            task_name: args.task_name.clone().or(file.task_name.clone()),
            modes: parse_modes(&mode)?,
            client,
            runs,
            budget,
            seed,
            seed_given: given.is_some(),
            out: args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            goal: file.goal.clone(),
            basket: file.basket.clone(),
            planner,
            synth,
        })
    }

    pub fn single_schema(&self) -> Result<&Path, UsageError> {
        match self.schema.as_slice() {
            [one] => Ok(one),
            [] => Err(UsageError("--schema is required".into())),
            _ => Err(UsageError("this command takes exactly one --schema".into())),
        }
    }

    /// Payload root for `schema`: `--data`, else the schema's directory.
    pub fn data_root(&self, schema: &Path) -> PathBuf {
        self.data.clone().unwrap_or_else(|| schema.parent().map(Path::to_path_buf).unwrap_or_default())
    }

    pub fn client(&self) -> anyhow::Result<Option<Box<dyn ChatClient>>> {
        Ok(match &self.client {
            None => None,
            Some(ClientSpec::Replay(p)) => {
                let entries = read_transcript(p).map_err(|e| anyhow::anyhow!("transcript {}: {e}", p.display()))?;
                Some(Box::new(ReplayClient::new(&entries)))
            }
            Some(ClientSpec::Live(p)) => Some(Box::new(LiveClient { command: p.command.clone(), args: p.args.clone() })),
        })
    }

    pub fn load_task(&self) -> anyhow::Result<Option<Task>> {
        let Some(path) = &self.task else { return Ok(None) };
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("task file {}: {e}", path.display()))?;
        let tasks: Vec<Task> = match serde_yaml::from_str::<Vec<Task>>(&text) {
            Ok(list) => list,
            Err(_) => vec![serde_yaml::from_str(&text).map_err(|e| anyhow::anyhow!("task file {}: {e}", path.display()))?],
        };
        let task = match &self.task_name {
            Some(name) => tasks.into_iter().find(|t| &t.name == name),
            None => tasks.into_iter().next(),
        };
        let mut task = task.ok_or_else(|| anyhow::anyhow!("task file {} has no matching task", path.display()))?;
        if self.seed_given {
            task.split.seed = self.seed;
        }
        Ok(Some(task))
    }

    /// Files this run reads, for the manifest.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = self.schema.clone();
        v.extend(self.task.clone());
        if let Some(ClientSpec::Replay(p)) = &self.client {
            v.push(p.clone());
        }
        v
    }
}

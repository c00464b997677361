use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use autog_core::actions::{apply_script, parse_script, Action, State};
use autog_core::graph::{classify_tables, export_graph, graph_summary};
use autog_core::ingest::{
    infer_types, load_database, profile_database, render_stats_report, write_database, Profiles, TypeGuess,
    DEFAULT_SAMPLE_SIZE,
};
use autog_core::join::{rank_pairs, Method, DEFAULT_TOP_N};
use autog_core::oracle::{default_basket, kendall_tau_distance, rank_candidates, score_candidate, Candidate, OracleReport};
use autog_core::planner::{
    infer_types_llm, run_autog_a, run_autog_s, write_transcript, HistoryEntry, OracleConfig, PromptContext, SessionState,
};
use autog_core::schema::{parse_schema, serialize_schema};
use autog_core::synth::{generate, write_bench, KeyAction};
use autog_core::{build_graph, BuildMode, ScorerConfig, Task};
use serde::Serialize;
use serde_json::json;
use tracing::info;

use crate::config::RunConfig;
use crate::output::{Manifest, Staging};

/// Shared state of one command invocation.
pub struct Ctx {
    pub name: &'static str,
    pub argv: Vec<String>,
    pub cfg: RunConfig,
    pub staging: Staging,
    inputs: Vec<PathBuf>,
}

impl Ctx {
    pub fn new(name: &'static str, argv: Vec<String>, cfg: RunConfig) -> Result<Self> {
        let staging = Staging::new(&cfg.out)?;
        let inputs = cfg.input_files();
        Ok(Self { name, argv, cfg, staging, inputs })
    }

    fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Loads the schema at `path` and its payloads, recording both as inputs.
    fn load_state(&mut self, path: &Path) -> Result<State> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read schema {}", path.display()))?;
        let schema = parse_schema(&text).with_context(|| format!("schema {}", path.display()))?;
        let root = self.cfg.data_root(path);
        let (data, warnings) = load_database(&schema, &root)?;
        for w in warnings {
            tracing::warn!("{w}");
        }
        self.input(path);
        for t in &schema.tables {
            let p = root.join(&t.source);
            if p.exists() {
                self.input(&p);
            }
        }
        Ok(State::new(schema, data))
    }

    fn single_state(&mut self) -> Result<State> {
        let path = self.cfg.single_schema()?.to_path_buf();
        self.load_state(&path)
    }

    fn task(&self) -> Result<Task> {
        self.cfg.load_task()?.ok_or_else(|| anyhow!("--task is required"))
    }

    fn basket(&self, task: &Task) -> Vec<ScorerConfig> {
        self.cfg.basket.clone().unwrap_or_else(|| default_basket(task))
    }

    /// Stages the manifest and moves everything into the output directory.
    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            tool: "autog",
            version: env!("CARGO_PKG_VERSION"),
            command: self.name.to_string(),
            argv: self.argv.clone(),
            seed: self.cfg.seed,
            settings: serde_json::to_value(&self.cfg)?,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        manifest.write(&self.staging, &self.inputs)?;
        self.staging.commit()
    }
}

fn keyed<T: Clone>(map: &BTreeMap<autog_core::ColumnKey, T>) -> BTreeMap<String, T> {
    map.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn profiles_of(state: &State, seed: u64) -> Profiles {
    profile_database(&state.schema, &state.data.decoded(&state.schema), DEFAULT_SAMPLE_SIZE, seed)
}

/// Writes `schema.yaml` and the payloads of `state` under `prefix`.
fn write_state(ctx: &Ctx, prefix: &str, state: &State) -> Result<()> {
    let root = ctx.staging.path(prefix);
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join("schema.yaml"), serialize_schema(&state.schema))?;
    write_database(&state.schema, &state.data, &root)?;
    Ok(())
}

pub fn profile(ctx: &mut Ctx) -> Result<()> {
    let state = ctx.single_state()?;
    let profiles = profiles_of(&state, ctx.cfg.seed);
    ctx.staging.write("stats.txt", render_stats_report(&state.schema, &profiles))?;
    ctx.staging.write_json("profiles.json", &keyed(&profiles))
}

#[derive(Serialize)]
struct TypesOut {
    types: BTreeMap<String, TypeGuess>,
    /// Columns typed by the rules because the model gave no usable answer.
    fallback: Vec<String>,
    source: &'static str,
}

pub fn infer(ctx: &mut Ctx) -> Result<()> {
    let state = ctx.single_state()?;
    let profiles = profiles_of(&state, ctx.cfg.seed);
    let out = match ctx.cfg.client()? {
        Some(client) => {
            let stats = render_stats_report(&state.schema, &profiles);
            let r = infer_types_llm(client.as_ref(), &stats, &profiles, ctx.cfg.seed);
            let source = if r.transport_failed { "rules (model unreachable)" } else { "model" };
            TypesOut { types: keyed(&r.types), fallback: r.fallback.iter().map(ToString::to_string).collect(), source }
        }
        None => TypesOut { types: keyed(&infer_types(&profiles)), fallback: vec![], source: "rules" },
    };
    ctx.staging.write_json("types.json", &out)
}

pub fn similarity(ctx: &mut Ctx, method: Method, top_n: usize) -> Result<()> {
    let state = ctx.single_state()?;
    let profiles = profiles_of(&state, ctx.cfg.seed);
    let ranking = rank_pairs(&state.schema, &profiles, &state.data.decoded(&state.schema), method, top_n);
    ctx.staging.write("similarity.txt", format!("{}\n", ranking.report))?;
    ctx.staging.write_json("similarity.json", &ranking.pairs)
}

/// Reads an action list: a JSON array of actions, or an answer key.
fn read_actions(path: &Path) -> Result<Vec<Action>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if let Ok(actions) = parse_script(&text) {
        return Ok(actions);
    }
    #[derive(serde::Deserialize)]
    struct Keyed {
        actions: Vec<KeyAction>,
    }
    let keyed: Keyed = serde_json::from_str(&text)
        .with_context(|| format!("{} is neither an action list nor an answer key", path.display()))?;
    Ok(keyed.actions.into_iter().map(|k| k.action).collect())
}

pub fn apply(ctx: &mut Ctx, positional: &[PathBuf]) -> Result<()> {
    let (schema_path, actions_path) = match positional {
        [s, a] => (s.clone(), a.clone()),
        [a] => (ctx.cfg.single_schema()?.to_path_buf(), a.clone()),
        _ => bail!(crate::UsageError("apply takes [SCHEMA] ACTIONS".into())),
    };
    let state = ctx.load_state(&schema_path)?;
    let actions = read_actions(&actions_path)?;
    ctx.input(&actions_path);
    let run = apply_script(&state, &actions);
    if let Some((i, e)) = &run.error {
        bail!("action {i} ({}) failed: {e}", actions[i - 1].action);
    }
    write_state(ctx, "", &run.state)?;
    ctx.staging.write_json("apply_log.json", &json!({"log": run.log, "warnings": run.warnings}))
}

#[derive(Serialize)]
struct SessionOut<'a> {
    turns: usize,
    terminal: bool,
    applied: &'a [Action],
    history: &'a [HistoryEntry],
    log: &'a [String],
    warnings: &'a [String],
}

fn write_session(ctx: &Ctx, prefix: &str, s: &SessionState) -> Result<()> {
    write_state(ctx, prefix, &s.state)?;
    let out = SessionOut {
        turns: s.turns,
        terminal: s.terminal,
        applied: &s.applied,
        history: &s.history,
        log: &s.log,
        warnings: &s.warnings,
    };
    ctx.staging.write_json(&format!("{prefix}session.json"), &out)?;
    write_transcript(&ctx.staging.path(&format!("{prefix}transcript.jsonl")), &s.transcript)?;
    Ok(())
}

fn goal(ctx: &Ctx, task: Option<&Task>) -> String {
    if let Some(g) = &ctx.cfg.goal {
        return g.clone();
    }
    match task {
        Some(t) if !t.label_column.is_empty() => format!("Predict the {} of each {}.", t.label_column, t.target_type),
        Some(t) => format!("Predict the missing links of relation {}.", t.target_type),
        None => "Build a graph from the tables that is useful for downstream prediction.".into(),
    }
}

fn oracle_config(ctx: &Ctx, task: Task) -> OracleConfig {
    OracleConfig {
        basket: ctx.basket(&task),
        task,
        budget: ctx.cfg.budget,
        modes: ctx.cfg.modes.clone(),
    }
}

pub fn plan(ctx: &mut Ctx, variant: Option<Variant>) -> Result<()> {
    let state = ctx.single_state()?;
    let client = ctx.cfg.client()?.ok_or_else(|| crate::UsageError("plan needs --client or --replay".into()))?;
    let task = ctx.cfg.load_task()?;
    let variant = variant.unwrap_or(if task.is_some() && ctx.cfg.runs > 1 { Variant::A } else { Variant::S });
    let prompt = PromptContext::from_state(&state, &goal(ctx, task.as_ref()), ctx.cfg.seed);
    match variant {
        Variant::S => {
            let session = run_autog_s(&state, &prompt, client.as_ref(), &ctx.cfg.planner)
                .map_err(|e| anyhow!("planner stopped at turn {}: {}", e.session.turns, e.error))?;
            info!(applied = session.applied.len(), turns = session.turns, "session finished");
            write_session(ctx, "", &session)
        }
        Variant::A => {
            let task = task.ok_or_else(|| crate::UsageError("plan --variant a needs --task".into()))?;
            let oracle = oracle_config(ctx, task);
            let result = run_autog_a(&state, &prompt, client.as_ref(), &ctx.cfg.planner, ctx.cfg.runs, &oracle)?;
            let winner = result.winner();
            write_session(ctx, "", &winner.session)?;
            for r in &result.runs {
                write_session(ctx, &format!("runs/{}/", r.report.candidate_id), &r.session)?;
            }
            let runs: Vec<_> = result
                .runs
                .iter()
                .map(|r| json!({"id": r.report.candidate_id, "seed": r.seed, "mode": r.mode, "report": r.report}))
                .collect();
            ctx.staging.write_json("runs.json", &runs)?;
            ctx.staging.write_json(
                "ranking.json",
                &json!({"ranking": result.ranking, "failures": result.failures, "winner": winner.report.candidate_id, "mode": winner.mode}),
            )
        }
    }
}

pub fn build(ctx: &mut Ctx) -> Result<()> {
    let state = ctx.single_state()?;
    for &mode in &ctx.cfg.modes {
        let built = build_graph(&state.schema, &state.data, mode)?;
        let dir = format!("graph/{mode}");
        export_graph(&built.graph, &ctx.staging.path(&dir))?;
        ctx.staging.write(&format!("{dir}/summary.txt"), graph_summary(&built.graph).render())?;
        let (roles, _) = classify_tables(&state.schema, mode);
        ctx.staging.write_json(&format!("{dir}/roles.json"), &json!({"roles": roles, "warnings": built.warnings}))?;
    }
    Ok(())
}

/// Scores `state` under every configured mode; the best mode comes first
/// among equals in configuration order.
fn score_modes(ctx: &Ctx, id: &str, state: &State, actions: usize, task: &Task) -> Result<(BuildMode, Vec<(BuildMode, OracleReport)>)> {
    let basket = ctx.basket(task);
    let mut reports = Vec::new();
    for &mode in &ctx.cfg.modes {
        let graph = build_graph(&state.schema, &state.data, mode)?.graph;
        let c = Candidate { id: id.to_string(), graph, action_count: actions };
        reports.push((mode, score_candidate(&c, task, &basket, ctx.cfg.budget)?));
    }
    let best = reports
        .iter()
        .fold(None::<&(BuildMode, OracleReport)>, |b, r| match b {
            Some(b) if b.1.aggregate >= r.1.aggregate => Some(b),
            _ => Some(r),
        })
        .map(|r| r.0)
        .ok_or_else(|| anyhow!("no build mode configured"))?;
    Ok((best, reports))
}

pub fn evaluate(ctx: &mut Ctx) -> Result<()> {
    let task = ctx.task()?;
    if ctx.cfg.schema.is_empty() {
        bail!(crate::UsageError("--schema is required".into()));
    }
    let mut best = Vec::new();
    let mut all = Vec::new();
    for path in ctx.cfg.schema.clone() {
        let state = ctx.load_state(&path)?;
        let id = path.display().to_string();
        let (mode, reports) = score_modes(ctx, &id, &state, 0, &task)?;
        let chosen = reports.iter().find(|r| r.0 == mode).expect("best mode scored").1.clone();
        all.push(json!({"id": id, "mode": mode, "reports": reports.iter().map(|(m, r)| json!({"mode": m, "report": r})).collect::<Vec<_>>()}));
        best.push(chosen);
    }
    ctx.staging.write_json("reports.json", &all)?;
    ctx.staging.write_json("ranking.json", &json!({"ranking": rank_candidates(&best)}))
}

fn read_ranking(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?;
    let list = value.get("ranking").unwrap_or(&value);
    serde_json::from_value(list.clone()).with_context(|| format!("{}: expected a list of ids or {{\"ranking\": [...]}}", path.display()))
}

pub fn compare(ctx: &mut Ctx, positional: &[PathBuf]) -> Result<()> {
    let [a, b] = positional else {
        bail!(crate::UsageError("compare takes two ranking files".into()));
    };
    let (ra, rb) = (read_ranking(a)?, read_ranking(b)?);
    ctx.input(a);
    ctx.input(b);
    let distance = kendall_tau_distance(&ra, &rb)?;
    ctx.staging.write_json("compare.json", &json!({"kendall_tau_distance": distance, "items": ra.len()}))
}

pub fn synth(ctx: &mut Ctx) -> Result<()> {
    let bench = generate(&ctx.cfg.synth)?;
    write_bench(&bench, ctx.staging.root())?;
    ctx.staging.write_json("spec.json", &ctx.cfg.synth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Variant {
    /// One session.
    S,
    /// Several sessions ranked by the oracle.
    A,
}

#[derive(Serialize)]
struct Stage {
    stage: &'static str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Profile, infer, similarity, plan, build, evaluate and rank in one go.
/// A failing stage is recorded and every later stage is skipped.
pub fn run(ctx: &mut Ctx) -> Result<bool> {
    const STAGES: [&str; 7] = ["load", "profile", "infer", "similarity", "plan", "evaluate", "rank"];
    let mut stages: Vec<Stage> = Vec::new();
    let mut summary = serde_json::Map::new();
    let outcome = run_stages(ctx, &mut stages, &mut summary);
    let failed = outcome.is_err();
    if let Err((stage, e)) = outcome {
        stages.push(Stage { stage, status: "failed", error: Some(format!("{e:#}")) });
    }
    for s in STAGES.iter().skip(stages.len()) {
        stages.push(Stage { stage: s, status: "skipped", error: None });
    }
    summary.insert("stages".into(), serde_json::to_value(&stages)?);
    if failed {
        // Keep only the record of what happened.
        for f in ctx.staging.files()? {
            std::fs::remove_file(ctx.staging.path(&f))?;
        }
    }
    ctx.staging.write_json("summary.json", &summary)?;
    Ok(!failed)
}

type StageResult<T> = std::result::Result<T, (&'static str, anyhow::Error)>;

fn run_stages(ctx: &mut Ctx, stages: &mut Vec<Stage>, summary: &mut serde_json::Map<String, serde_json::Value>) -> StageResult<()> {
    let ok = |stages: &mut Vec<Stage>, stage| stages.push(Stage { stage, status: "ok", error: None });
    let at = |stage: &'static str| move |e: anyhow::Error| (stage, e);

    let (state, task) = (|| Ok::<_, anyhow::Error>((ctx.single_state()?, ctx.task()?)))().map_err(at("load"))?;
    ok(stages, "load");

    let profiles = profiles_of(&state, ctx.cfg.seed);
    let stats = render_stats_report(&state.schema, &profiles);
    ctx.staging.write("stats.txt", &stats).map_err(at("profile"))?;
    ok(stages, "profile");

    let client = ctx.cfg.client().map_err(at("infer"))?;
    let types = match &client {
        Some(c) => keyed(&infer_types_llm(c.as_ref(), &stats, &profiles, ctx.cfg.seed).types),
        None => keyed(&infer_types(&profiles)),
    };
    ctx.staging.write_json("types.json", &types).map_err(at("infer"))?;
    ok(stages, "infer");

    let ranking = rank_pairs(&state.schema, &profiles, &state.data.decoded(&state.schema), Method::Embedding, DEFAULT_TOP_N);
    ctx.staging.write("similarity.txt", format!("{}\n", ranking.report)).map_err(at("similarity"))?;
    ok(stages, "similarity");

    let client = client.ok_or_else(|| anyhow!("no client configured")).map_err(at("plan"))?;
    let prompt = PromptContext::from_state(&state, &goal(ctx, Some(&task)), ctx.cfg.seed);
    let oracle = oracle_config(ctx, task.clone());
    let result = run_autog_a(&state, &prompt, client.as_ref(), &ctx.cfg.planner, ctx.cfg.runs, &oracle)
        .map_err(|e| ("plan", anyhow!(e)))?;
    for r in &result.runs {
        write_session(ctx, &format!("runs/{}/", r.report.candidate_id), &r.session).map_err(at("plan"))?;
    }
    ok(stages, "plan");

    let (mode, original) = score_modes(ctx, "original", &state, 0, &task).map_err(at("evaluate"))?;
    let original = original.into_iter().find(|r| r.0 == mode).expect("best mode scored").1;
    let mut reports = vec![original];
    reports.extend(result.runs.iter().map(|r| r.report.clone()));
    ok(stages, "evaluate");

    let ranking = rank_candidates(&reports);
    let winner = ranking[0].clone();
    let chosen = result.runs.iter().find(|r| r.report.candidate_id == winner);
    let (schema, actions, log, mode) = match chosen {
        Some(r) => (&r.session.state, r.session.applied.clone(), r.session.log.clone(), r.mode),
        None => (&state, vec![], vec![], mode),
    };
    write_state(ctx, "final/", schema).map_err(at("rank"))?;
    summary.insert("task".into(), json!(task.name));
    summary.insert("winner".into(), json!(winner));
    summary.insert("mode".into(), json!(mode));
    summary.insert("ranking".into(), json!(ranking));
    summary.insert(
        "scores".into(),
        reports.iter().map(|r| (r.candidate_id.clone(), json!(r.aggregate))).collect::<serde_json::Map<_, _>>().into(),
    );
    summary.insert("reports".into(), json!(reports));
    summary.insert("actions".into(), json!(actions));
    summary.insert("action_log".into(), json!(log));
    summary.insert("run_failures".into(), json!(result.failures));
    ok(stages, "rank");
    Ok(())
}

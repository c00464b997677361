//! The augmentation loop: prompt, complete, reflect, parse, apply.
//!
//! Schemas change only through [`apply_action`]; a completion can never
//! inject a schema directly.

mod client;
mod infer;
mod prompt;
mod selection;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

pub use client::{
    parse_transcript, read_transcript, write_transcript, CallOptions, ChatClient, ClientError, FnClient, LiveClient,
    Message, Phase, RecordingClient, ReplayClient, Role, ScriptedClient, ScriptedTurn, TranscriptEntry,
    NONE_SELECTION,
};
pub use infer::{infer_types_llm, parse_type_response, InferOutcome};
pub use prompt::{
    assemble_prompt, format_template, reflection_messages, render_history, HistoryEntry, PromptContext, ACTION_DOCS,
    AUGMENT_TEMPLATE, COT_EXAMPLE, INFER_TYPES_PROMPT, REFLECTION_PROMPT, SLOTS,
};
pub use selection::{parse_lenient, parse_selection, Selection, SelectionError};

use crate::actions::{apply_action, Action, State};
use crate::error::{GraphError, OracleError};
use crate::graph::{build_graph, BuildMode};
use crate::oracle::{rank_candidates, score_candidate, Candidate, OracleReport, ScorerConfig, Task};

/// Action budget per session.
pub const DEFAULT_HARD_THRESHOLD: usize = 10;
/// Sessions per AutoG-A run.
pub const DEFAULT_RUNS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub hard_threshold: usize,
    /// Turns allowed before giving up on a client that never stops or
    /// never produces an applicable action.
    pub max_turns: usize,
    /// Extra attempts per completion after a transport failure.
    pub retries: usize,
    pub reflect: bool,
    /// Recompute stats and similarity after every turn that changed the
    /// schema.
    pub refresh_context: bool,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            hard_threshold: DEFAULT_HARD_THRESHOLD,
            max_turns: 3 * DEFAULT_HARD_THRESHOLD,
            retries: 2,
            reflect: true,
            refresh_context: true,
            seed: 0,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub state: State,
    /// Successfully applied actions, in order.
    pub applied: Vec<Action>,
    pub history: Vec<HistoryEntry>,
    pub turns: usize,
    pub terminal: bool,
    pub transcript: Vec<TranscriptEntry>,
    pub log: Vec<String>,
    pub warnings: Vec<String>,
}

impl SessionState {
    fn new(state: State) -> Self {
        Self {
            state,
            applied: vec![],
            history: vec![],
            turns: 0,
            terminal: false,
            transcript: vec![],
            log: vec![],
            warnings: vec![],
        }
    }

    fn fail(&mut self, error: String) {
        let index = self.history.len() + 1;
        self.history.push(HistoryEntry::Failed { index, error });
    }
}

/// A client failure; `session` holds everything up to the failing call.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("session stopped at turn {}: {error}", session.turns)]
pub struct SessionError {
    pub error: ClientError,
    pub session: Box<SessionState>,
}

fn complete_with_retries(
    client: &dyn ChatClient,
    messages: &[Message],
    opts: &CallOptions,
    retries: usize,
) -> Result<String, ClientError> {
    let mut last = None;
    for attempt in 0..=retries {
        match client.complete(messages, opts) {
            Ok(text) => return Ok(text),
            Err(e) => {
                warn!(turn = opts.turn, attempt, "completion failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// One self-reflection pass over `draft`.
pub fn reflect(
    client: &dyn ChatClient,
    messages: &[Message],
    draft: &str,
    opts: &CallOptions,
    retries: usize,
) -> Result<String, ClientError> {
    let opts = CallOptions { phase: Phase::Reflection, ..*opts };
    complete_with_retries(client, &reflection_messages(messages, draft), &opts, retries)
}

/// AutoG-S: one session, returning its final state.
pub fn run_autog_s(
    initial: &State,
    ctx: &PromptContext,
    client: &dyn ChatClient,
    config: &PlannerConfig,
) -> Result<SessionState, SessionError> {
    let mut s = SessionState::new(initial.clone());
    let mut ctx = ctx.clone();
    let threshold = config.hard_threshold.max(1);
    while !s.terminal && s.applied.len() < threshold && s.turns < config.max_turns {
        let turn = s.turns;
        let opts = CallOptions { seed: config.seed, temperature: config.temperature, turn, phase: Phase::Draft };
        let messages = assemble_prompt(&s.state, &ctx, &s.history);
        let user = messages.last().expect("prompt message").content.clone();
        s.transcript.push(TranscriptEntry { turn, role: Role::User, content: user });
        let abort = |s: SessionState, error| SessionError { error, session: Box::new(s) };
        let draft = match complete_with_retries(client, &messages, &opts, config.retries) {
            Ok(d) => d,
            Err(e) => return Err(abort(s, e)),
        };
        s.transcript.push(TranscriptEntry { turn, role: Role::Assistant, content: draft.clone() });

        let mut parsed = parse_selection(&draft);
        if config.reflect && parsed.as_ref().is_ok_and(|p| !p.actions.is_empty()) {
            s.transcript.push(TranscriptEntry { turn, role: Role::User, content: REFLECTION_PROMPT.into() });
            let revised = match reflect(client, &messages, &draft, &opts, config.retries) {
                Ok(r) => r,
                Err(e) => return Err(abort(s, e)),
            };
            s.transcript.push(TranscriptEntry { turn, role: Role::Assistant, content: revised.clone() });
            parsed = parse_selection(&revised);
        }
        s.turns += 1;

        let selection = match parsed {
            Ok(sel) => sel,
            Err(e) => {
                debug!(turn, "selection rejected: {e}");
                s.fail(e.to_string());
                continue;
            }
        };
        let before = s.applied.len();
        for action in &selection.actions {
            if s.applied.len() >= threshold {
                break;
            }
            match apply_action(&s.state, action) {
                Ok(done) => {
                    s.state = done.state;
                    s.log.push(done.log);
                    s.warnings.extend(done.warnings);
                    s.applied.push(action.clone());
                    let index = s.history.len() + 1;
                    s.history.push(HistoryEntry::Applied { index, action: action.clone() });
                }
                Err(e) => s.fail(e.to_string()),
            }
        }
        s.terminal = selection.terminal;
        if config.refresh_context && s.applied.len() > before {
            ctx.refresh(&s.state, config.seed);
        }
    }
    Ok(s)
}

/// Scoring setup for AutoG-A.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub task: Task,
    pub basket: Vec<ScorerConfig>,
    pub budget: f64,
    pub modes: Vec<BuildMode>,
}

impl OracleConfig {
    pub fn new(task: Task) -> Self {
        let basket = crate::oracle::default_basket(&task);
        Self { task, basket, budget: crate::oracle::DEFAULT_BUDGET, modes: BuildMode::ALL.to_vec() }
    }
}

/// One finished AutoG-A session with its best construction mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub session: SessionState,
    pub mode: BuildMode,
    pub report: OracleReport,
    /// Reports for every mode tried.
    pub mode_reports: Vec<(BuildMode, OracleReport)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutogA {
    /// Index into `runs` of the winner.
    pub best: usize,
    pub runs: Vec<RunResult>,
    /// Candidate ids, best first.
    pub ranking: Vec<String>,
    /// Runs that failed before producing a candidate.
    pub failures: Vec<(usize, String)>,
}

impl AutogA {
    pub fn winner(&self) -> &RunResult {
        &self.runs[self.best]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("all {} runs failed: {}", .0.len(), .0.iter().map(|(r, e)| format!("run {r}: {e}")).collect::<Vec<_>>().join("; "))]
    AllRunsFailed(Vec<(usize, String)>),
    #[error("runs must be at least 1")]
    NoRuns,
}

pub fn run_id(run: usize) -> String {
    format!("run-{run:02}")
}

fn score_session(run: usize, seed: u64, session: SessionState, oracle: &OracleConfig) -> Result<RunResult, String> {
    let mut mode_reports = Vec::new();
    for &mode in &oracle.modes {
        let built = build_graph(&session.state.schema, &session.state.data, mode).map_err(|e: GraphError| e.to_string())?;
        let candidate = Candidate { id: run_id(run), graph: built.graph, action_count: session.applied.len() };
        let report = score_candidate(&candidate, &oracle.task, &oracle.basket, oracle.budget)
            .map_err(|e: OracleError| e.to_string())?;
        mode_reports.push((mode, report));
    }
    // Keep the first mode among equals so the choice is stable.
    let (mode, report) = mode_reports
        .iter()
        .cloned()
        .reduce(|best, next| if next.1.aggregate > best.1.aggregate { next } else { best })
        .ok_or_else(|| "no construction mode configured".to_string())?;
    Ok(RunResult { run, seed, session, mode, report, mode_reports })
}

/// AutoG-A: `runs` concurrent sessions with seeds `config.seed + r`, each
/// scored under every mode; the best aggregate wins.
pub fn run_autog_a(
    initial: &State,
    ctx: &PromptContext,
    client: &dyn ChatClient,
    config: &PlannerConfig,
    runs: usize,
    oracle: &OracleConfig,
) -> Result<AutogA, PlannerError> {
    if runs == 0 {
        return Err(PlannerError::NoRuns);
    }
    let outcomes: Vec<Result<RunResult, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..runs)
            .map(|r| {
                scope.spawn(move || {
                    let seed = config.seed + r as u64;
                    let cfg = PlannerConfig { seed, ..config.clone() };
                    let session = run_autog_s(initial, ctx, client, &cfg).map_err(|e| e.to_string())?;
                    score_session(r, seed, session, oracle)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("session thread panicked")).collect()
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(res) => results.push(res),
            Err(e) => failures.push((r, e)),
        }
    }
    if results.is_empty() {
        return Err(PlannerError::AllRunsFailed(failures));
    }
    let reports: Vec<OracleReport> = results.iter().map(|r| r.report.clone()).collect();
    let ranking = rank_candidates(&reports);
    let best = results.iter().position(|r| r.report.candidate_id == ranking[0]).expect("ranked id exists");
    Ok(AutogA { best, runs: results, ranking, failures })
}

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Which completion of a turn is being requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Draft,
    Reflection,
    /// Column type inference.
    Inference,
}

/// Per-call settings passed through to the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallOptions {
    pub seed: u64,
    pub temperature: f64,
    /// 0-based turn of the session.
    pub turn: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("no recorded completion for turn {turn} ({phase:?})")]
    Exhausted { turn: usize, phase: Phase },
    #[error("protocol: {0}")]
    Protocol(String),
}

/// Ordered messages in, one completion out. Implementations serve
/// independent sessions concurrently.
pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[Message], opts: &CallOptions) -> Result<String, ClientError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        (**self).complete(messages, opts)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&self, messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        (**self).complete(messages, opts)
    }
}

/// One line of a persisted transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: usize,
    pub role: Role,
    pub content: String,
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptEntry>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptEntry>> {
    let text = std::fs::read_to_string(path)?;
    parse_transcript(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptedTurn {
    pub draft: String,
    /// Answer to the reflection request; the draft itself when absent.
    pub revision: Option<String>,
}

impl From<&str> for ScriptedTurn {
    fn from(draft: &str) -> Self {
        Self { draft: draft.into(), revision: None }
    }
}

impl From<String> for ScriptedTurn {
    fn from(draft: String) -> Self {
        Self { draft, revision: None }
    }
}

/// Canned completions keyed by session seed and turn. Past the end of a
/// script every turn answers `<selection>None</selection>`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    default: Vec<ScriptedTurn>,
    by_seed: BTreeMap<u64, Vec<ScriptedTurn>>,
    inference: Option<String>,
}

pub const NONE_SELECTION: &str = "<selection>None</selection>";

impl ScriptedClient {
    pub fn new<T: Into<ScriptedTurn>>(turns: impl IntoIterator<Item = T>) -> Self {
        Self { default: turns.into_iter().map(Into::into).collect(), ..Self::default() }
    }

    /// Script used by the session with this seed instead of the default.
    pub fn with_seed<T: Into<ScriptedTurn>>(mut self, seed: u64, turns: impl IntoIterator<Item = T>) -> Self {
        self.by_seed.insert(seed, turns.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_inference(mut self, response: impl Into<String>) -> Self {
        self.inference = Some(response.into());
        self
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, _messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        if opts.phase == Phase::Inference {
            return self.inference.clone().ok_or(ClientError::Exhausted { turn: opts.turn, phase: opts.phase });
        }
        let script = self.by_seed.get(&opts.seed).unwrap_or(&self.default);
        let Some(turn) = script.get(opts.turn) else { return Ok(NONE_SELECTION.to_string()) };
        Ok(match opts.phase {
            Phase::Reflection => turn.revision.clone().unwrap_or_else(|| turn.draft.clone()),
            _ => turn.draft.clone(),
        })
    }
}

type CompleteFn = dyn Fn(&[Message], &CallOptions) -> Result<String, ClientError> + Send + Sync;

/// A client backed by a closure.
pub struct FnClient(Box<CompleteFn>);

impl FnClient {
    pub fn new(f: impl Fn(&[Message], &CallOptions) -> Result<String, ClientError> + Send + Sync + 'static) -> Self {
        Self(Box::new(f))
    }
}

impl ChatClient for FnClient {
    fn complete(&self, messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        (self.0)(messages, opts)
    }
}

/// Wraps a client and keeps every exchange: the final request message and
/// the completion, tagged with the turn.
pub struct RecordingClient<C> {
    inner: C,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<C: ChatClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, entries: Mutex::new(Vec::new()) }
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("recording lock").clone()
    }
}

impl<C: ChatClient> ChatClient for RecordingClient<C> {
    fn complete(&self, messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        let reply = self.inner.complete(messages, opts)?;
        let mut entries = self.entries.lock().expect("recording lock");
        if let Some(last) = messages.last() {
            entries.push(TranscriptEntry { turn: opts.turn, role: last.role, content: last.content.clone() });
        }
        entries.push(TranscriptEntry { turn: opts.turn, role: Role::Assistant, content: reply.clone() });
        Ok(reply)
    }
}

/// Serves the assistant lines of recorded transcripts: the first of a turn
/// answers the draft, the second the reflection.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    default: BTreeMap<usize, Vec<String>>,
    by_seed: BTreeMap<u64, BTreeMap<usize, Vec<String>>>,
}

fn by_turn(entries: &[TranscriptEntry]) -> BTreeMap<usize, Vec<String>> {
    let mut map: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.role == Role::Assistant) {
        map.entry(e.turn).or_default().push(e.content.clone());
    }
    map
}

impl ReplayClient {
    pub fn new(entries: &[TranscriptEntry]) -> Self {
        Self { default: by_turn(entries), by_seed: BTreeMap::new() }
    }

    pub fn with_seed(mut self, seed: u64, entries: &[TranscriptEntry]) -> Self {
        self.by_seed.insert(seed, by_turn(entries));
        self
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, _messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        let turns = self.by_seed.get(&opts.seed).unwrap_or(&self.default);
        let exhausted = ClientError::Exhausted { turn: opts.turn, phase: opts.phase };
        let replies = turns.get(&opts.turn).ok_or(exhausted.clone())?;
        let reply = match opts.phase {
            Phase::Reflection => replies.get(1).or(replies.first()),
            _ => replies.first(),
        };
        reply.cloned().ok_or(exhausted)
    }
}

#[derive(Serialize)]
struct LiveRequest<'a> {
    messages: &'a [Message],
    seed: u64,
    temperature: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LiveResponse {
    Content { content: String },
    Error { error: String },
}

/// Runs `command` once per completion: one JSON request line on stdin
/// (`messages`, `seed`, `temperature`), one response line on stdout
/// (`{"content": ...}` or `{"error": ...}`). The command owns the network.
#[derive(Debug, Clone)]
pub struct LiveClient {
    pub command: String,
    pub args: Vec<String>,
}

impl ChatClient for LiveClient {
    fn complete(&self, messages: &[Message], opts: &CallOptions) -> Result<String, ClientError> {
        let t = |m: String| ClientError::Transport(m);
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| t(format!("spawn {}: {e}", self.command)))?;
        let request = LiveRequest { messages, seed: opts.seed, temperature: opts.temperature };
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            let line = serde_json::to_string(&request).expect("request serializes");
            writeln!(stdin, "{line}").map_err(|e| t(format!("write: {e}")))?;
        }
        let mut reply = String::new();
        BufReader::new(child.stdout.take().expect("piped stdout"))
            .read_line(&mut reply)
            .map_err(|e| t(format!("read: {e}")))?;
        let _ = child.wait();
        match serde_json::from_str::<LiveResponse>(reply.trim()) {
            Ok(LiveResponse::Content { content }) => Ok(content),
            Ok(LiveResponse::Error { error }) => Err(t(error)),
            Err(e) => Err(ClientError::Protocol(format!("{e}: {:?}", reply.trim()))),
        }
    }
}

//! Text embedders used by the similarity ranking.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::EmbedError;

/// Dimension of [`TrigramEmbedder`] vectors unless configured otherwise.
pub const DEFAULT_DIM: usize = 1024;

/// Maps text to unit-norm vectors of a fixed dimension.
pub trait Embedder {
    fn embed(&mut self, text: &str) -> Result<Vec<f64>, EmbedError>;

    fn embed_batch(&mut self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine of two vectors, clamped to [0, 1]. Zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Hashed character-trigram frequencies. Texts shorter than three
/// characters count as a single gram; the empty text maps to zero.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    pub dim: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl TrigramEmbedder {
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut bump = |gram: &[char]| {
            let s: String = gram.iter().collect();
            v[(fnv1a(s.as_bytes()) % self.dim as u64) as usize] += 1.0;
        };
        match chars.len() {
            0 => {}
            1 | 2 => bump(&chars),
            _ => chars.windows(3).for_each(&mut bump),
        }
        normalize(v)
    }
}

impl Embedder for TrigramEmbedder {
    fn embed(&mut self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.vector(text))
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: usize,
    text: &'a str,
}

#[derive(Deserialize)]
struct Response {
    id: usize,
    vector: Vec<f64>,
}

/// Newline-delimited JSON embedder over any reader/writer pair. Requests
/// are `{"id","text"}`, responses `{"id","vector"}`; responses may arrive
/// out of order within a batch.
pub struct LineEmbedder<R, W> {
    reader: R,
    writer: W,
    next_id: usize,
}

impl<R: BufRead, W: Write> LineEmbedder<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer, next_id: 0 }
    }
}

impl<R: BufRead, W: Write> Embedder for LineEmbedder<R, W> {
    fn embed(&mut self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&mut self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let base = self.next_id;
        self.next_id += texts.len();
        for (i, text) in texts.iter().enumerate() {
            let line = serde_json::to_string(&Request { id: base + i, text }).expect("request serializes");
            writeln!(self.writer, "{line}")?;
        }
        self.writer.flush()?;
        let mut got: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut line = String::new();
        while got.len() < texts.len() {
            line.clear();
            if self.reader.read_line(&mut line)? == 0 {
                return Err(EmbedError::Protocol(format!("stream closed after {} of {} vectors", got.len(), texts.len())));
            }
            if line.trim().is_empty() {
                continue;
            }
            let r: Response =
                serde_json::from_str(line.trim()).map_err(|e| EmbedError::Protocol(format!("bad response: {e}")))?;
            if r.id < base || r.id >= base + texts.len() {
                return Err(EmbedError::Protocol(format!("unexpected response id {}", r.id)));
            }
            got.insert(r.id, normalize(r.vector));
        }
        Ok((base..base + texts.len()).map(|id| got.remove(&id).expect("collected")).collect())
    }
}

/// A [`LineEmbedder`] talking to a child process over stdin/stdout.
pub struct SubprocessEmbedder {
    child: Child,
    inner: LineEmbedder<BufReader<ChildStdout>, ChildStdin>,
}

impl SubprocessEmbedder {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, EmbedError> {
        let mut child = Command::new(program).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self { child, inner: LineEmbedder::new(BufReader::new(stdout), stdin) })
    }
}

impl Embedder for SubprocessEmbedder {
    fn embed(&mut self, text: &str) -> Result<Vec<f64>, EmbedError> {
        self.inner.embed(text)
    }

    fn embed_batch(&mut self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        self.inner.embed_batch(texts)
    }
}

impl Drop for SubprocessEmbedder {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

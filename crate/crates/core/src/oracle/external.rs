use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::Task;
use crate::error::OracleError;

#[derive(Debug, Clone, Serialize)]
pub struct OracleRequest<'a> {
    pub graph_dir: String,
    pub task: &'a Task,
    pub budget_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OracleResponse {
    Score { score: f64, metric: String },
    Error { error: String },
}

/// One request line to a fresh `command` process, one response line back.
pub fn call_external(
    command: &str,
    args: &[String],
    graph_dir: &Path,
    task: &Task,
    budget: f64,
) -> Result<f64, OracleError> {
    let ext = |m: String| OracleError::External(m);
    let mut child = Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| ext(format!("spawn {command}: {e}")))?;
    let request = OracleRequest {
        graph_dir: graph_dir.display().to_string(),
        task,
        budget_fraction: budget,
        seed: task.split.seed,
    };
    let line = serde_json::to_string(&request).expect("request serializes");
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        writeln!(stdin, "{line}").map_err(|e| ext(format!("write request: {e}")))?;
    }
    let mut reply = String::new();
    BufReader::new(child.stdout.take().expect("piped stdout"))
        .read_line(&mut reply)
        .map_err(|e| ext(format!("read response: {e}")))?;
    let _ = child.wait();
    match serde_json::from_str::<OracleResponse>(reply.trim()) {
        Ok(OracleResponse::Score { score, metric }) => {
            if metric != task.metric.as_str() {
                return Err(ext(format!("oracle reported {metric}, task metric is {}", task.metric.as_str())));
            }
            if !score.is_finite() {
                return Err(ext(format!("non-finite score {score}")));
            }
            Ok(score)
        }
        Ok(OracleResponse::Error { error }) => Err(ext(error)),
        Err(e) => Err(ext(format!("malformed response {:?}: {e}", reply.trim()))),
    }
}

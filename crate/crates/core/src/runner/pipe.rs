//! External controller over newline-delimited JSON.
//!
//! Each control step the runner writes `{"t": <float>, "obs": [<floats>]}` to
//! the child's stdin and expects `{"action": <float>}` on its stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::controllers::Controller;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct Observation<'a> {
    pub t: f64,
    #[serde(borrow)]
    pub obs: std::borrow::Cow<'a, [f64]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reply {
    pub action: f64,
}

pub struct PipeController {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl PipeController {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, timeout_ms: u64) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines: rx, timeout: Duration::from_millis(timeout_ms) })
    }
}

impl Controller for PipeController {
    fn act(&mut self, t: f64, observation: &[f64]) -> Result<f64> {
        let msg = serde_json::to_string(&Observation { t, obs: observation.into() })?;
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::Protocol("child stdin closed".into()))?;
        writeln!(stdin, "{msg}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Protocol(format!("writing observation: {e}")))?;
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Protocol(format!("reading reply: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Protocol(format!("no reply within {} ms", self.timeout.as_millis())))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(Error::Protocol("child closed its stdout".into())),
        };
        let reply: Reply =
            serde_json::from_str(line.trim()).map_err(|e| Error::Protocol(format!("malformed reply `{line}`: {e}")))?;
        if !reply.action.is_finite() {
            return Err(Error::Protocol(format!("non-finite action in reply `{line}`")));
        }
        Ok(reply.action)
    }
}

impl Drop for PipeController {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved child exit on EOF
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

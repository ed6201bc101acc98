//! Long-lived executor child processes.

use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{Outcome, Request, Response};
use super::HarnessError;
use crate::model::{Arg, BackendId};

/// Code reported when an executor answers with something that is not a
/// protocol response.
pub const PROTOCOL_VIOLATION_CODE: i32 = -1;

const REAP_GRACE: Duration = Duration::from_secs(2);

/// How to launch one executor process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutorSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub cwd: Option<PathBuf>,
    /// Forward the child's stderr instead of discarding it.
    pub inherit_stderr: bool,
}

impl ExecutorSpec {
    pub fn new(program: impl Into<PathBuf>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
            cwd: None,
            inherit_stderr: false,
        }
    }

    pub fn with_cwd(mut self, cwd: impl Into<PathBuf>) -> Self {
        self.cwd = Some(cwd.into());
        self
    }
}

struct Live {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
}

/// One executor process serving one backend. Restarted after a crash or a
/// timeout; every request is self-contained, so no state survives a restart.
pub struct Executor {
    backend: BackendId,
    spec: ExecutorSpec,
    live: Option<Live>,
    next_id: u64,
    restarts: u64,
}

impl Executor {
    pub fn spawn(backend: BackendId, spec: ExecutorSpec) -> Result<Self, HarnessError> {
        let live = start(&spec).map_err(|e| HarnessError::ExecutorUnavailable {
            backend: backend.name.clone(),
            reason: format!("{}: {e}", spec.program.display()),
        })?;
        Ok(Self {
            backend,
            spec,
            live: Some(live),
            next_id: 1,
            restarts: 0,
        })
    }

    pub fn backend(&self) -> &BackendId {
        &self.backend
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    /// Sends one request and waits at most `timeout` for its response.
    pub fn execute(
        &mut self,
        api: &str,
        args: &[Arg],
        timing_reps: u32,
        timeout: Duration,
    ) -> Result<Outcome, HarnessError> {
        if self.live.is_none() {
            self.restart()?;
        }
        let id = self.next_id;
        self.next_id += 1;
        let request = Request {
            id,
            api: api.to_owned(),
            backend: self.backend.name.clone(),
            args: args.to_vec(),
            timing_reps,
        };
        let line = serde_json::to_string(&request).map_err(io::Error::other)?;

        let live = self.live.as_mut().expect("started above");
        if writeln!(live.stdin, "{line}")
            .and_then(|_| live.stdin.flush())
            .is_err()
        {
            return Ok(self.reap_crash());
        }

        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let live = self.live.as_mut().expect("live while waiting");
            match live.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let resp = serde_json::from_str::<Response>(&line)
                        .map_err(|e| e.to_string())
                        .and_then(|r| r.validate().map(|_| r));
                    match resp {
                        Ok(r) if r.id == id => {
                            return Ok(Outcome::from_response(self.backend.clone(), r))
                        }
                        // Stale answer to an earlier request.
                        Ok(_) => continue,
                        Err(_) => {
                            self.kill();
                            self.try_restart();
                            return Ok(Outcome::crash(
                                self.backend.clone(),
                                PROTOCOL_VIOLATION_CODE,
                            ));
                        }
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    self.try_restart();
                    return Ok(Outcome::timeout(self.backend.clone()));
                }
                Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => return Ok(self.reap_crash()),
            }
        }
    }

    fn reap_crash(&mut self) -> Outcome {
        let code = match self.live.take() {
            Some(mut live) => {
                drop(live.stdin);
                let status = wait_with_grace(&mut live.child, REAP_GRACE);
                status.map_or(PROTOCOL_VIOLATION_CODE, exit_code)
            }
            None => PROTOCOL_VIOLATION_CODE,
        };
        self.try_restart();
        Outcome::crash(self.backend.clone(), code)
    }

    fn kill(&mut self) {
        if let Some(mut live) = self.live.take() {
            let _ = live.child.kill();
            let _ = live.child.wait();
        }
    }

    fn try_restart(&mut self) {
        let _ = self.restart();
    }

    fn restart(&mut self) -> Result<(), HarnessError> {
        self.kill();
        let live = start(&self.spec).map_err(|e| HarnessError::ExecutorUnavailable {
            backend: self.backend.name.clone(),
            reason: format!("restart failed: {e}"),
        })?;
        self.live = Some(live);
        self.restarts += 1;
        Ok(())
    }
}

impl Drop for Executor {
    fn drop(&mut self) {
        self.kill();
    }
}

fn start(spec: &ExecutorSpec) -> io::Result<Live> {
    let mut cmd = Command::new(&spec.program);
    cmd.args(&spec.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(if spec.inherit_stderr {
            Stdio::inherit()
        } else {
            Stdio::null()
        });
    if let Some(dir) = &spec.cwd {
        cmd.current_dir(dir);
    }
    let mut child = cmd.spawn()?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    Ok(Live {
        child,
        stdin,
        lines: rx,
    })
}

fn wait_with_grace(child: &mut Child, grace: Duration) -> Option<ExitStatus> {
    let deadline = Instant::now() + grace;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Some(status),
            Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(2)),
            Ok(None) => {
                let _ = child.kill();
                return child.wait().ok();
            }
            Err(_) => return None,
        }
    }
}

#[cfg(unix)]
fn exit_code(status: ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status
        .code()
        .or_else(|| status.signal().map(|s| 128 + s))
        .unwrap_or(PROTOCOL_VIOLATION_CODE)
}

#[cfg(not(unix))]
fn exit_code(status: ExitStatus) -> i32 {
    status.code().unwrap_or(PROTOCOL_VIOLATION_CODE)
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::harness::protocol::Status;

    fn sh(script: &str) -> ExecutorSpec {
        ExecutorSpec::new("/bin/sh", ["-c", script])
    }

    #[test]
    fn missing_program_is_unavailable() {
        let err = Executor::spawn(
            BackendId::new("ref", "local"),
            ExecutorSpec::new("/nonexistent/executor", Vec::<String>::new()),
        )
        .err()
        .unwrap();
        assert!(matches!(err, HarnessError::ExecutorUnavailable { .. }));
    }

    #[test]
    fn abnormal_exit_is_a_crash() {
        let mut ex = Executor::spawn(BackendId::new("b", "local"), sh("read line; exit 3")).unwrap();
        let out = ex.execute("f", &[], 1, Duration::from_secs(5)).unwrap();
        assert_eq!(out.status, Status::Crash { code: 3 });
        assert!(out.output.is_none());
        // Restarted and crashes the same way again.
        let out = ex.execute("f", &[], 1, Duration::from_secs(5)).unwrap();
        assert_eq!(out.status, Status::Crash { code: 3 });
        assert!(ex.restarts() >= 2);
    }

    #[test]
    fn signal_death_is_encoded() {
        let mut ex = Executor::spawn(BackendId::new("b", "local"), sh("read line; kill -9 $$")).unwrap();
        let out = ex.execute("f", &[], 1, Duration::from_secs(5)).unwrap();
        assert_eq!(out.status, Status::Crash { code: 128 + 9 });
    }

    #[test]
    fn silence_times_out() {
        let mut ex = Executor::spawn(BackendId::new("b", "local"), sh("sleep 30")).unwrap();
        let start = Instant::now();
        let out = ex.execute("f", &[], 1, Duration::from_millis(100)).unwrap();
        assert_eq!(out.status, Status::Timeout);
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn garbage_is_a_protocol_violation() {
        let mut ex = Executor::spawn(BackendId::new("b", "local"), sh("read line; echo hello; sleep 30")).unwrap();
        let out = ex.execute("f", &[], 1, Duration::from_secs(5)).unwrap();
        assert_eq!(
            out.status,
            Status::Crash {
                code: PROTOCOL_VIOLATION_CODE
            }
        );
    }
}

//! Test execution across backends.
//!
//! An [`ExecutorPool`] owns one executor process per backend. A test case is
//! run on each of its backends in turn; crashes and missed deadlines become
//! [`Status::Crash`] and [`Status::Timeout`] outcomes and the process is
//! restarted, so a misbehaving case never affects the next one.

mod executor;
pub mod protocol;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use executor::{Executor, ExecutorSpec, PROTOCOL_VIOLATION_CODE};
pub use protocol::{ExceptionInfo, OutputDigest, Outcome, Request, Response, ResponseStatus, Status};

use crate::model::{BackendId, TestCase};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const TESTCASE_MAGIC: &str = "#tracefuzz-testcase v1";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("executor for backend `{backend}` unavailable: {reason}")]
    ExecutorUnavailable { backend: String, reason: String },
    #[error("malformed test case file: {0}")]
    ReplayFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Executors keyed by backend name.
#[derive(Default)]
pub struct ExecutorPool {
    executors: BTreeMap<String, Executor>,
    order: Vec<BackendId>,
}

impl ExecutorPool {
    /// Launches every target; fails if any executor cannot start.
    pub fn launch(targets: &[(BackendId, ExecutorSpec)]) -> Result<Self, HarnessError> {
        let (pool, mut errors) = Self::launch_available(targets);
        match errors.is_empty() {
            true => Ok(pool),
            false => Err(errors.remove(0)),
        }
    }

    /// Launches what it can and reports the rest.
    pub fn launch_available(targets: &[(BackendId, ExecutorSpec)]) -> (Self, Vec<HarnessError>) {
        let mut pool = Self::default();
        let mut errors = Vec::new();
        for (backend, spec) in targets {
            match Executor::spawn(backend.clone(), spec.clone()) {
                Ok(ex) => pool.insert(ex),
                Err(e) => errors.push(e),
            }
        }
        (pool, errors)
    }

    pub fn insert(&mut self, executor: Executor) {
        let backend = executor.backend().clone();
        if self.executors.insert(backend.name.clone(), executor).is_none() {
            self.order.push(backend);
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Executor> {
        self.order.retain(|b| b.name != name);
        self.executors.remove(name)
    }

    /// Backends in launch order.
    pub fn backends(&self) -> &[BackendId] {
        &self.order
    }

    pub fn executor(&self, name: &str) -> Option<&Executor> {
        self.executors.get(name)
    }

    /// Runs `tc` once per backend, in `tc.backends` order. Every backend gets
    /// exactly one outcome.
    pub fn run_test(&mut self, tc: &TestCase, timeout: Duration) -> Result<Vec<Outcome>, HarnessError> {
        if let Some(missing) = tc
            .backends
            .iter()
            .find(|b| !self.executors.contains_key(&b.name))
        {
            return Err(HarnessError::ExecutorUnavailable {
                backend: missing.name.clone(),
                reason: "no executor registered".into(),
            });
        }
        tc.backends
            .iter()
            .map(|b| {
                let ex = self.executors.get_mut(&b.name).expect("checked above");
                let mut outcome = ex.execute(&tc.entry.api, &tc.entry.args, tc.timing_reps, timeout)?;
                outcome.backend = b.clone();
                Ok(outcome)
            })
            .collect()
    }
}

pub fn run_test(
    tc: &TestCase,
    pool: &mut ExecutorPool,
    timeout: Duration,
) -> Result<Vec<Outcome>, HarnessError> {
    pool.run_test(tc, timeout)
}

/// Body of a test case file, after the magic header line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campaign_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub testcase: TestCase,
}

pub fn write_case_file(path: &Path, case: &CaseFile) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let body = serde_json::to_string(case).map_err(io::Error::other)?;
    fs::write(path, format!("{TESTCASE_MAGIC}\n{body}\n"))?;
    Ok(())
}

pub fn read_case_file(path: &Path) -> Result<CaseFile, HarnessError> {
    let text = fs::read_to_string(path)?;
    parse_case_file(&text)
}

pub fn parse_case_file(text: &str) -> Result<CaseFile, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == TESTCASE_MAGIC => {}
        _ => {
            return Err(HarnessError::ReplayFormat(format!(
                "expected header `{TESTCASE_MAGIC}`"
            )))
        }
    }
    let body = lines
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| HarnessError::ReplayFormat("missing test case body".into()))?;
    serde_json::from_str(body).map_err(|e| HarnessError::ReplayFormat(e.to_string()))
}

/// Re-executes a saved test case.
pub fn replay(
    path: &Path,
    pool: &mut ExecutorPool,
    timeout: Duration,
) -> Result<(CaseFile, Vec<Outcome>), HarnessError> {
    let case = read_case_file(path)?;
    let outcomes = pool.run_test(&case.testcase, timeout)?;
    Ok((case, outcomes))
}

//! Campaign driver: config, the per-API fuzz loop, artifacts and reports.
//!
//! A campaign mutates every selected API `per_api_mutants` times, runs each
//! mutant on all configured backends and classifies the outcomes. Float
//! cases are also rerun with their lowest-precision dtype promoted one step,
//! and the two timings feed the performance oracle.
//!
//! Artifacts written under `output_dir`:
//!
//! | file | content |
//! |------|---------|
//! | `testcases.jsonl` | one test case per line, in (api, index) order |
//! | `outcomes.jsonl` | per-backend outcomes for each case, timings included |
//! | `verdicts.jsonl` | one line per case and oracle |
//! | `cases/<api>/<index>.tc` | replayable file for every non-`Pass` case |
//! | `summary.json`, `summary.txt` | verdict counts overall and per api |

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::harness::{
    read_case_file, write_case_file, CaseFile, ExecutorPool, ExecutorSpec, HarnessError, Outcome,
    DEFAULT_TIMEOUT_MS,
};
use crate::model::{BackendId, Dtype, InvocationEntry, TestCase, Value};
use crate::mutation::{mutate, ExecPlan, MutationConfig, MutationError};
use crate::oracle::{differential_verdict, performance_verdict, OracleConfig, OracleError, Verdict, VerdictKind};
use crate::rng::RngStream;
use crate::store::{StoreError, ValueStore};

pub const DEFAULT_CAMPAIGN_SEED: u64 = 42;
pub const DEFAULT_TIMING_REPS: u32 = 11;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("no verdicts found in {}", .0.display())]
    EmptyReport(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Campaign settings, normally read from a flat `key = value` file.
///
/// Relative paths are resolved against the config file's directory, which
/// is also the working directory of executor processes. In `target.<name>`
/// command lines, `{self}` stands for the running executable.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub store_path: PathBuf,
    pub output_dir: PathBuf,
    pub targets: Vec<(BackendId, ExecutorSpec)>,
    pub api_filter: Option<Vec<String>>,
    pub mutation: MutationConfig,
    pub oracle: OracleConfig,
    pub campaign_seed: u64,
    pub timeout_ms: u64,
    pub timing_reps: u32,
    pub jobs: usize,
    pub machine: String,
    pub base_dir: PathBuf,
    pub self_exe: PathBuf,
}

impl CampaignConfig {
    pub fn new(store_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            store_path: store_path.into(),
            output_dir: output_dir.into(),
            targets: Vec::new(),
            api_filter: None,
            mutation: MutationConfig::default(),
            oracle: OracleConfig::default(),
            campaign_seed: DEFAULT_CAMPAIGN_SEED,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            timing_reps: DEFAULT_TIMING_REPS,
            jobs: 1,
            machine: "local".into(),
            base_dir: PathBuf::from("."),
            self_exe: std::env::current_exe().unwrap_or_else(|_| PathBuf::from("tracefuzz")),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CampaignError> {
        let mut cfg = Self::new("", "");
        cfg.base_dir = base_dir.to_path_buf();
        let mut seen_store = false;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CampaignError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            seen_store |= key.trim() == "store_path";
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CampaignError::Config(format!("line {}: {e}", n + 1)))?;
        }
        if !seen_store {
            return Err(CampaignError::Config("missing `store_path`".into()));
        }
        if cfg.output_dir.as_os_str().is_empty() {
            cfg.output_dir = cfg.resolve("out");
        }
        Ok(cfg)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Sets one key, as a config line or a `--set key=value` override would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
        }
        match key {
            "store_path" => self.store_path = self.resolve(value),
            "output_dir" => self.output_dir = self.resolve(value),
            "campaign_seed" => self.campaign_seed = num(key, value)?,
            "per_api_mutants" => self.mutation.per_api_mutants = num(key, value)?,
            "timeout_ms" => self.timeout_ms = num(key, value)?,
            "timing_reps" => self.timing_reps = num(key, value)?,
            "jobs" => self.jobs = num(key, value)?,
            "machine" => {
                self.machine = value.to_string();
                for (b, _) in &mut self.targets {
                    b.machine = value.to_string();
                }
            }
            "api_filter" => {
                let names: Vec<String> = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
                self.api_filter = (!names.is_empty()).then_some(names);
            }
            "p_type_mutation" => self.mutation.p_type_mutation = num(key, value)?,
            "p_rand_over_db" => self.mutation.p_rand_over_db = num(key, value)?,
            "max_rank" => self.mutation.max_rank = num(key, value)?,
            "max_dim" => self.mutation.max_dim = num(key, value)?,
            "max_int" => self.mutation.max_int = num(key, value)?,
            "max_str_len" => self.mutation.max_str_len = num(key, value)?,
            "rtol" => self.oracle.rtol = num(key, value)?,
            "atol" => self.oracle.atol = num(key, value)?,
            "perf_ratio" => self.oracle.perf_ratio = num(key, value)?,
            "perf_min_ms" => self.oracle.perf_min_ms = num(key, value)?,
            "warmup_reps" => self.oracle.warmup_reps = num(key, value)?,
            "benign_exceptions" => {
                self.oracle.benign_exceptions = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            _ => match key.strip_prefix("target.") {
                Some(name) if !name.is_empty() => self.set_target(name, value)?,
                _ => return Err(format!("unknown key `{key}`")),
            },
        }
        Ok(())
    }

    fn set_target(&mut self, name: &str, command: &str) -> Result<(), String> {
        let words = shell_words::split(command).map_err(|e| format!("target.{name}: {e}"))?;
        let self_exe = self.self_exe.to_string_lossy().into_owned();
        let mut words = words.into_iter().map(|w| w.replace("{self}", &self_exe));
        let program = words
            .next()
            .ok_or_else(|| format!("target.{name}: empty command"))?;
        let program = if program.contains('/') {
            self.resolve(&program)
        } else {
            PathBuf::from(program)
        };
        let spec = ExecutorSpec::new(program, words).with_cwd(&self.base_dir);
        let backend = BackendId::new(name, &self.machine);
        self.targets.retain(|(b, _)| b.name != name);
        self.targets.push((backend, spec));
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        self.mutation.validate()?;
        self.oracle.validate()?;
        if self.targets.len() < 2 {
            return Err(CampaignError::Config(format!(
                "need at least two targets, got {}",
                self.targets.len()
            )));
        }
        if self.timing_reps == 0 || self.timeout_ms == 0 || self.jobs == 0 {
            return Err(CampaignError::Config(
                "timing_reps, timeout_ms and jobs must be positive".into(),
            ));
        }
        if !self.store_path.exists() {
            return Err(CampaignError::Config(format!(
                "store `{}` does not exist",
                self.store_path.display()
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn backends(&self) -> Vec<BackendId> {
        self.targets.iter().map(|(b, _)| b.clone()).collect()
    }
}

/// One line of `verdicts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub api: String,
    pub verdict: VerdictKind,
    pub detail: String,
    pub testcase_ref: String,
    /// `functional` (differential plus crash) or `performance`.
    pub oracle: String,
    pub index: usize,
    pub campaign_seed: u64,
}

pub const ORACLE_FUNCTIONAL: &str = "functional";
pub const ORACLE_PERFORMANCE: &str = "performance";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub campaign_seed: u64,
    pub apis_covered: usize,
    pub testcases: usize,
    /// Verdict counts over every line of `verdicts.jsonl`.
    pub counts: BTreeMap<VerdictKind, usize>,
    pub per_api: BTreeMap<String, BTreeMap<VerdictKind, usize>>,
    pub perf_checked: usize,
    pub perf_not_applicable: usize,
    pub diagnostics: Vec<String>,
}

impl Summary {
    pub fn count(&self, kind: VerdictKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn has_bugs(&self) -> bool {
        self.counts.iter().any(|(k, &n)| k.is_bug() && n > 0)
    }

    pub fn render(&self) -> String {
        render_table(self.campaign_seed, self.apis_covered, self.testcases, &self.counts, &self.per_api)
    }
}

fn render_table(
    seed: u64,
    apis: usize,
    cases: usize,
    counts: &BTreeMap<VerdictKind, usize>,
    per_api: &BTreeMap<String, BTreeMap<VerdictKind, usize>>,
) -> String {
    let mut out = format!("campaign_seed {seed}: {cases} test cases over {apis} covered APIs\n\n");
    let width = per_api.keys().map(String::len).max().unwrap_or(3).max(5);
    out.push_str(&format!("{:<width$}", "api"));
    for k in VerdictKind::ALL {
        out.push_str(&format!(" {:>18}", k.as_str()));
    }
    out.push('\n');
    let mut row = |name: &str, c: &BTreeMap<VerdictKind, usize>| {
        out.push_str(&format!("{name:<width$}"));
        for k in VerdictKind::ALL {
            out.push_str(&format!(" {:>18}", c.get(&k).copied().unwrap_or(0)));
        }
        out.push('\n');
    };
    for (api, c) in per_api {
        row(api, c);
    }
    row("total", counts);
    out
}

/// Everything one case produced.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub index: usize,
    pub testcase: TestCase,
    pub outcomes: Vec<Outcome>,
    pub functional: Verdict,
    pub twin: Option<PrecisionTwin>,
    pub twin_outcomes: Vec<Outcome>,
    /// `None` when the performance check did not apply.
    pub performance: Option<Verdict>,
}

/// Result of [`run_campaign`].
#[derive(Debug)]
pub struct CampaignRun {
    pub summary: Summary,
    pub output_dir: PathBuf,
}

/// Same call with its least precise float dtype promoted one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionTwin {
    pub entry: InvocationEntry,
    pub low: Dtype,
    pub high: Dtype,
}

fn float_dtype_name(v: &Value) -> Option<Dtype> {
    match v {
        Value::Str { v } => v.parse::<Dtype>().ok().filter(|d| d.promoted().is_some()),
        _ => None,
    }
}

fn least_precise_tensor(v: &Value, best: &mut Option<Dtype>) {
    match v {
        Value::Tensor(t) if t.dtype.promoted().is_some() => {
            if best.map_or(true, |b| t.dtype.less_precise_than(b)) {
                *best = Some(t.dtype);
            }
        }
        Value::Tuple { items } | Value::List { items } => {
            items.iter().for_each(|i| least_precise_tensor(i, best))
        }
        _ => {}
    }
}

fn promote(v: &mut Value, low: Dtype, high: Dtype) {
    match v {
        Value::Tensor(t) if t.dtype == low => t.dtype = high,
        Value::Str { v } if v.parse::<Dtype>().ok() == Some(low) => *v = high.name().to_string(),
        Value::Tuple { items } | Value::List { items } => {
            items.iter_mut().for_each(|i| promote(i, low, high))
        }
        _ => {}
    }
}

/// Builds the higher-precision twin of `entry`. The subject dtype is the
/// first float dtype named by a string argument, or else the least precise
/// float tensor dtype. Returns `None` when nothing can be promoted.
pub fn precision_twin(entry: &InvocationEntry) -> Option<PrecisionTwin> {
    let low = entry.args.iter().find_map(|a| float_dtype_name(&a.value)).or_else(|| {
        let mut best = None;
        entry.args.iter().for_each(|a| least_precise_tensor(&a.value, &mut best));
        best
    })?;
    let high = low.promoted()?;
    let mut twin = entry.clone();
    twin.args.iter_mut().for_each(|a| promote(&mut a.value, low, high));
    Some(PrecisionTwin { entry: twin, low, high })
}

/// Applies the performance oracle per backend. `None` if no backend could
/// be compared.
pub fn twin_verdict(
    twin: &PrecisionTwin,
    low: &[Outcome],
    high: &[Outcome],
    cfg: &OracleConfig,
) -> Option<Verdict> {
    let mut applicable = false;
    for l in low {
        let Some(h) = high.iter().find(|h| h.backend == l.backend) else {
            continue;
        };
        match performance_verdict(l, h, twin.low, twin.high, cfg) {
            Ok(v @ Verdict::PerformanceAnomaly(_)) => return Some(v),
            Ok(_) => applicable = true,
            Err(_) => {}
        }
    }
    applicable.then_some(Verdict::Pass)
}

/// Runs one test case and, when it makes sense, its precision twin.
pub fn execute_case(
    pool: &mut ExecutorPool,
    index: usize,
    testcase: TestCase,
    cfg: &CampaignConfig,
) -> Result<CaseRun, CampaignError> {
    let timeout = cfg.timeout();
    let outcomes = pool.run_test(&testcase, timeout)?;
    let functional = differential_verdict(&outcomes, &cfg.oracle)?;
    let mut run = CaseRun {
        index,
        twin: None,
        twin_outcomes: Vec::new(),
        performance: None,
        testcase,
        outcomes,
        functional,
    };
    if run.outcomes.iter().all(Outcome::is_ok) {
        if let Some(twin) = precision_twin(&run.testcase.entry) {
            let twin_case = TestCase {
                entry: twin.entry.clone(),
                ..run.testcase.clone()
            };
            run.twin_outcomes = pool.run_test(&twin_case, timeout)?;
            run.performance = twin_verdict(&twin, &run.outcomes, &run.twin_outcomes, &cfg.oracle);
            run.twin = Some(twin);
        }
    }
    Ok(run)
}

struct ApiRun {
    api: String,
    cases: Vec<CaseRun>,
    diagnostics: Vec<String>,
}

fn fuzz_api(api: &str, store: &ValueStore, cfg: &CampaignConfig) -> ApiRun {
    let mut run = ApiRun {
        api: api.to_string(),
        cases: Vec::new(),
        diagnostics: Vec::new(),
    };
    let (mut pool, errors) = ExecutorPool::launch_available(&cfg.targets);
    for e in errors {
        run.diagnostics.push(format!("{api}: {e}"));
    }
    let plan = ExecPlan {
        backends: cfg.backends(),
        timing_reps: cfg.timing_reps,
    };
    for index in 0..cfg.mutation.per_api_mutants {
        let mut rng = RngStream::derive(cfg.campaign_seed, &[api, &index.to_string()]);
        let mut tc = match mutate(api, store, &cfg.mutation, &mut rng, &plan) {
            Ok(tc) => tc,
            Err(e) => {
                run.diagnostics.push(format!("{api}: {e}"));
                break;
            }
        };
        loop {
            tc.backends.retain(|b| pool.backends().contains(b));
            if tc.backends.len() < 2 {
                run.diagnostics.push(format!(
                    "{api}: fewer than two live backends, stopping after {index} cases"
                ));
                return run;
            }
            match execute_case(&mut pool, index, tc.clone(), cfg) {
                Ok(case) => {
                    run.cases.push(case);
                    break;
                }
                Err(CampaignError::Harness(HarnessError::ExecutorUnavailable { backend, reason })) => {
                    run.diagnostics
                        .push(format!("{api}: backend `{backend}` dropped: {reason}"));
                    pool.remove(&backend);
                }
                Err(e) => {
                    run.diagnostics.push(format!("{api}: case {index}: {e}"));
                    return run;
                }
            }
        }
    }
    run
}

/// APIs the campaign will fuzz: the filter (or every stored API), in
/// sorted order.
pub fn selected_apis(store: &ValueStore, cfg: &CampaignConfig) -> Vec<String> {
    let mut apis: Vec<String> = match &cfg.api_filter {
        Some(names) => names.clone(),
        None => store.apis().map(String::from).collect(),
    };
    apis.sort();
    apis.dedup();
    apis
}

fn case_path(api: &str, index: usize) -> String {
    let safe: String = api
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    format!("cases/{safe}/{index}.tc")
}

fn json_line<T: Serialize>(w: &mut impl Write, v: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, v).map_err(io::Error::other)?;
    w.write_all(b"\n")
}

#[derive(Serialize)]
struct OutcomeLine<'a> {
    api: &'a str,
    index: usize,
    outcomes: &'a [Outcome],
    #[serde(skip_serializing_if = "<[Outcome]>::is_empty")]
    twin_outcomes: &'a [Outcome],
}

fn write_artifacts(
    cfg: &CampaignConfig,
    runs: &[ApiRun],
    summary: &mut Summary,
) -> Result<(), CampaignError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let cases_dir = dir.join("cases");
    if cases_dir.exists() {
        fs::remove_dir_all(&cases_dir).map_err(io_at(&cases_dir))?;
    }
    let open = |name: &str| -> Result<BufWriter<File>, CampaignError> {
        let p = dir.join(name);
        File::create(&p).map(BufWriter::new).map_err(io_at(&p))
    };
    let (mut tcs, mut outs, mut verdicts) = (
        open("testcases.jsonl")?,
        open("outcomes.jsonl")?,
        open("verdicts.jsonl")?,
    );
    let seed = cfg.campaign_seed;
    for run in runs {
        let per_api = summary.per_api.entry(run.api.clone()).or_default();
        for case in &run.cases {
            let file = CaseFile {
                campaign_seed: Some(seed),
                index: Some(case.index),
                testcase: case.testcase.clone(),
            };
            let io_err = io_at(dir);
            json_line(&mut tcs, &file).map_err(io_err)?;
            json_line(
                &mut outs,
                &OutcomeLine {
                    api: &run.api,
                    index: case.index,
                    outcomes: &case.outcomes,
                    twin_outcomes: &case.twin_outcomes,
                },
            )
            .map_err(io_at(dir))?;

            let interesting = case.functional.kind() != VerdictKind::Pass
                || case.performance.as_ref().is_some_and(|v| v.kind() != VerdictKind::Pass);
            let testcase_ref = if interesting {
                let rel = case_path(&run.api, case.index);
                write_case_file(&dir.join(&rel), &file)?;
                rel
            } else {
                format!("testcases.jsonl#{}/{}", run.api, case.index)
            };
            let mut emit = |verdict: &Verdict, oracle: &str| -> Result<(), CampaignError> {
                *summary.counts.entry(verdict.kind()).or_default() += 1;
                *per_api.entry(verdict.kind()).or_default() += 1;
                let record = VerdictRecord {
                    api: run.api.clone(),
                    verdict: verdict.kind(),
                    detail: verdict.detail().to_string(),
                    testcase_ref: testcase_ref.clone(),
                    oracle: oracle.to_string(),
                    index: case.index,
                    campaign_seed: seed,
                };
                json_line(&mut verdicts, &record).map_err(io_at(dir))
            };
            emit(&case.functional, ORACLE_FUNCTIONAL)?;
            match (&case.twin, &case.performance) {
                (Some(_), Some(v)) => {
                    summary.perf_checked += 1;
                    emit(v, ORACLE_PERFORMANCE)?;
                }
                (Some(_), None) => summary.perf_not_applicable += 1,
                _ => {}
            }
        }
    }
    for w in [&mut tcs, &mut outs, &mut verdicts] {
        w.flush().map_err(io_at(dir))?;
    }
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(summary).map_err(io::Error::other).map_err(io_at(&p))?)
        .map_err(io_at(&p))?;
    let p = dir.join("summary.txt");
    let mut text = summary.render();
    if !summary.diagnostics.is_empty() {
        text.push_str("\ndiagnostics:\n");
        for d in &summary.diagnostics {
            text.push_str(&format!("  {d}\n"));
        }
    }
    fs::write(&p, text).map_err(io_at(&p))?;
    Ok(())
}

/// Runs a whole campaign and writes its artifacts.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignRun, CampaignError> {
    cfg.validate()?;
    let store = ValueStore::load(&cfg.store_path)?;
    run_campaign_with_store(cfg, &store)
}

/// Like [`run_campaign`] with an already loaded store.
pub fn run_campaign_with_store(cfg: &CampaignConfig, store: &ValueStore) -> Result<CampaignRun, CampaignError> {
    cfg.mutation.validate()?;
    cfg.oracle.validate()?;
    let apis = selected_apis(store, cfg);
    let mut diagnostics = Vec::new();
    let covered: Vec<&String> = apis
        .iter()
        .filter(|api| {
            let has = !store.entries(api).is_empty();
            if !has {
                diagnostics.push(format!("{api}: no seed entries in the store"));
            }
            has
        })
        .collect();

    let slots: Vec<Mutex<Option<ApiRun>>> = covered.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.jobs.clamp(1, covered.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(api) = covered.get(i) else { break };
                let run = fuzz_api(api, store, cfg);
                *slots[i].lock().expect("slot lock") = Some(run);
            });
        }
    });
    let runs: Vec<ApiRun> = slots
        .into_iter()
        .filter_map(|m| m.into_inner().expect("slot lock"))
        .collect();

    for r in &runs {
        diagnostics.extend(r.diagnostics.iter().cloned());
    }
    let mut summary = Summary {
        campaign_seed: cfg.campaign_seed,
        apis_covered: runs.iter().filter(|r| !r.cases.is_empty()).count(),
        testcases: runs.iter().map(|r| r.cases.len()).sum(),
        diagnostics,
        ..Summary::default()
    };
    for k in VerdictKind::ALL {
        summary.counts.insert(k, 0);
    }
    write_artifacts(cfg, &runs, &mut summary)?;
    Ok(CampaignRun {
        summary,
        output_dir: cfg.output_dir.clone(),
    })
}

/// Verdict aggregation over an output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub campaign_seed: Option<u64>,
    pub testcases: usize,
    pub counts: BTreeMap<VerdictKind, usize>,
    pub per_api: BTreeMap<String, BTreeMap<VerdictKind, usize>>,
    /// Records with a bug verdict, in file order.
    pub findings: Vec<VerdictRecord>,
}

impl Report {
    pub fn render(&self) -> String {
        let apis = self.per_api.len();
        let mut out = render_table(self.campaign_seed.unwrap_or(0), apis, self.testcases, &self.counts, &self.per_api);
        if !self.findings.is_empty() {
            out.push_str("\nfindings:\n");
            for f in &self.findings {
                out.push_str(&format!(
                    "  [{}] {} #{} ({}) {}\n      {}\n",
                    f.verdict, f.api, f.index, f.oracle, f.testcase_ref, f.detail
                ));
            }
        }
        out
    }
}

/// Reads `verdicts.jsonl` under `dir`. Fails if there is nothing to report.
pub fn report(dir: &Path) -> Result<Report, CampaignError> {
    let path = dir.join("verdicts.jsonl");
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(CampaignError::EmptyReport(dir.to_path_buf()))
        }
        Err(e) => return Err(io_at(&path)(e)),
    };
    let mut rep = Report {
        campaign_seed: None,
        testcases: 0,
        counts: VerdictKind::ALL.into_iter().map(|k| (k, 0)).collect(),
        per_api: BTreeMap::new(),
        findings: Vec::new(),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_at(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VerdictRecord = serde_json::from_str(&line).map_err(|e| {
            CampaignError::Config(format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        rep.campaign_seed.get_or_insert(rec.campaign_seed);
        if rec.oracle == ORACLE_FUNCTIONAL {
            rep.testcases += 1;
        }
        *rep.counts.entry(rec.verdict).or_default() += 1;
        *rep.per_api.entry(rec.api.clone()).or_default().entry(rec.verdict).or_default() += 1;
        if rec.verdict.is_bug() {
            rep.findings.push(rec);
        }
    }
    if rep.testcases == 0 {
        return Err(CampaignError::EmptyReport(dir.to_path_buf()));
    }
    Ok(rep)
}

/// Reads a campaign's `summary.json`.
pub fn read_summary(dir: &Path) -> Result<Summary, CampaignError> {
    let p = dir.join("summary.json");
    let text = fs::read_to_string(&p).map_err(io_at(&p))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::Config(format!("{}: {e}", p.display())))
}

/// Re-executes a saved case on the config's targets and reclassifies it.
pub fn replay_case(cfg: &CampaignConfig, path: &Path) -> Result<(CaseFile, CaseRun), CampaignError> {
    let case = read_case_file(path)?;
    let mut pool = ExecutorPool::launch(&cfg.targets)?;
    let run = execute_case(&mut pool, case.index.unwrap_or(0), case.testcase.clone(), cfg)?;
    Ok((case, run))
}

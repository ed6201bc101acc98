//! Verdicts over per-backend outcomes.
//!
//! Three checks: backends must agree on results (differential), a
//! lower-precision dtype must not run markedly slower than a higher one on
//! the same backend (performance), and failures must be consistent benign
//! exceptions rather than crashes or backend-specific errors (crash).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::harness::{OutputDigest, Outcome, Status};
use crate::model::Dtype;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub rtol: f64,
    pub atol: f64,
    pub perf_ratio: f64,
    pub perf_min_ms: f64,
    /// Leading timing repetitions ignored as warmup.
    pub warmup_reps: usize,
    pub benign_exceptions: Vec<String>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-4,
            atol: 1e-6,
            perf_ratio: 1.5,
            perf_min_ms: 1.0,
            warmup_reps: 2,
            benign_exceptions: vec![
                "ValueError".into(),
                "InvalidArgumentError".into(),
                "TypeError".into(),
            ],
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.rtol >= 0.0 && self.atol >= 0.0) {
            return Err(OracleError::Config("rtol and atol must be >= 0".into()));
        }
        if !(self.perf_ratio > 1.0) {
            return Err(OracleError::Config("perf_ratio must be > 1".into()));
        }
        if !(self.perf_min_ms >= 0.0) {
            return Err(OracleError::Config("perf_min_ms must be >= 0".into()));
        }
        Ok(())
    }

    pub fn is_benign(&self, class: &str) -> bool {
        self.benign_exceptions.iter().any(|c| c == class)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("differential check needs at least two outcomes, got {0}")]
    TooFewOutcomes(usize),
    #[error("invalid oracle config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictKind {
    Pass,
    WrongComputation,
    PerformanceAnomaly,
    CrashBug,
    InvalidInput,
}

impl VerdictKind {
    pub const ALL: [VerdictKind; 5] = [
        VerdictKind::Pass,
        VerdictKind::WrongComputation,
        VerdictKind::PerformanceAnomaly,
        VerdictKind::CrashBug,
        VerdictKind::InvalidInput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Pass => "Pass",
            VerdictKind::WrongComputation => "WrongComputation",
            VerdictKind::PerformanceAnomaly => "PerformanceAnomaly",
            VerdictKind::CrashBug => "CrashBug",
            VerdictKind::InvalidInput => "InvalidInput",
        }
    }

    /// Whether the verdict points at a suspected library bug.
    pub fn is_bug(self) -> bool {
        matches!(
            self,
            VerdictKind::WrongComputation | VerdictKind::PerformanceAnomaly | VerdictKind::CrashBug
        )
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    WrongComputation(String),
    PerformanceAnomaly(String),
    CrashBug(String),
    InvalidInput(String),
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Pass => VerdictKind::Pass,
            Verdict::WrongComputation(_) => VerdictKind::WrongComputation,
            Verdict::PerformanceAnomaly(_) => VerdictKind::PerformanceAnomaly,
            Verdict::CrashBug(_) => VerdictKind::CrashBug,
            Verdict::InvalidInput(_) => VerdictKind::InvalidInput,
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            Verdict::Pass => "",
            Verdict::WrongComputation(d)
            | Verdict::PerformanceAnomaly(d)
            | Verdict::CrashBug(d)
            | Verdict::InvalidInput(d) => d,
        }
    }
}

/// Result of the performance check when it does not apply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotApplicable(pub String);

fn close(a: f64, b: f64, cfg: &OracleConfig) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= cfg.atol + cfg.rtol * b.abs()
}

/// Names of the digest fields on which `a` departs from the reference `b`.
fn digest_mismatch(a: &OutputDigest, b: &OutputDigest, cfg: &OracleConfig) -> Vec<String> {
    if a.shape != b.shape {
        return vec![format!("shape {:?} vs {:?}", a.shape, b.shape)];
    }
    let mut fields = Vec::new();
    if a.dtype != b.dtype {
        fields.push(format!("dtype {} vs {}", a.dtype, b.dtype));
    }
    if !close(a.sum, b.sum, cfg) {
        fields.push(format!("sum {} vs {}", a.sum, b.sum));
    }
    if !close(a.abs_sum, b.abs_sum, cfg) {
        fields.push(format!("abs_sum {} vs {}", a.abs_sum, b.abs_sum));
    }
    let bad = a
        .sample
        .iter()
        .zip(&b.sample)
        .position(|(x, y)| !close(*x, *y, cfg));
    if a.sample.len() != b.sample.len() {
        fields.push("sample length".into());
    } else if let Some(i) = bad {
        fields.push(format!("sample[{i}] {} vs {}", a.sample[i], b.sample[i]));
    }
    fields
}

/// Compares results across backends. Outcomes containing any failure are
/// handed to [`crash_verdict`].
pub fn differential_verdict(outcomes: &[Outcome], cfg: &OracleConfig) -> Result<Verdict, OracleError> {
    if outcomes.len() < 2 {
        return Err(OracleError::TooFewOutcomes(outcomes.len()));
    }
    if outcomes.iter().any(|o| !o.is_ok()) {
        return Ok(crash_verdict(outcomes, cfg));
    }
    for (i, reference) in outcomes.iter().enumerate() {
        for other in &outcomes[i + 1..] {
            let (Some(b), Some(a)) = (&reference.output, &other.output) else {
                return Ok(Verdict::CrashBug(format!(
                    "ok outcome without output on {} or {}",
                    reference.backend.name, other.backend.name
                )));
            };
            let fields = digest_mismatch(a, b, cfg);
            if !fields.is_empty() {
                return Ok(Verdict::WrongComputation(format!(
                    "{} vs {}: {}",
                    other.backend.name,
                    reference.backend.name,
                    fields.join("; ")
                )));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// Median of the timings after the warmup repetitions (all timings if there
/// are no more than `warmup`).
pub fn steady_median(elapsed: &[f64], warmup: usize) -> Option<f64> {
    let steady = if elapsed.len() > warmup {
        &elapsed[warmup..]
    } else {
        elapsed
    };
    if steady.is_empty() {
        return None;
    }
    let mut v = steady.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Checks that the lower-precision run is not markedly slower than the
/// higher-precision run of the same call on the same backend.
pub fn performance_verdict(
    low: &Outcome,
    high: &Outcome,
    dt_low: Dtype,
    dt_high: Dtype,
    cfg: &OracleConfig,
) -> Result<Verdict, NotApplicable> {
    if !dt_low.less_precise_than(dt_high) {
        return Err(NotApplicable(format!(
            "{dt_low} is not less precise than {dt_high}"
        )));
    }
    if !low.is_ok() || !high.is_ok() {
        return Err(NotApplicable("both runs must succeed".into()));
    }
    let (Some(t_low), Some(t_high)) = (
        steady_median(&low.elapsed_ms, cfg.warmup_reps),
        steady_median(&high.elapsed_ms, cfg.warmup_reps),
    ) else {
        return Err(NotApplicable("missing timings".into()));
    };
    if t_high >= cfg.perf_min_ms && t_low > cfg.perf_ratio * t_high {
        Ok(Verdict::PerformanceAnomaly(format!(
            "{}: {dt_low} median {t_low:.3} ms > {} x {dt_high} median {t_high:.3} ms",
            low.backend.name, cfg.perf_ratio
        )))
    } else {
        Ok(Verdict::Pass)
    }
}

/// Classifies outcomes where at least one backend failed.
pub fn crash_verdict(outcomes: &[Outcome], cfg: &OracleConfig) -> Verdict {
    let mut exceptions = Vec::new();
    let mut ok = Vec::new();
    for o in outcomes {
        match &o.status {
            Status::Crash { code } => {
                return Verdict::CrashBug(format!("{} crashed with code {code}", o.backend.name))
            }
            Status::Timeout => return Verdict::CrashBug(format!("{} timed out", o.backend.name)),
            Status::Exception { class, message } => exceptions.push((o, class, message)),
            Status::Ok => ok.push(o),
        }
    }
    if exceptions.is_empty() {
        return Verdict::Pass;
    }
    let (first, class, message) = exceptions[0];
    if !ok.is_empty() {
        let ok_names: Vec<&str> = ok.iter().map(|o| o.backend.name.as_str()).collect();
        return Verdict::CrashBug(format!(
            "{class} on {} ({message}) but ok on {}",
            first.backend.name,
            ok_names.join(",")
        ));
    }
    if let Some((o, other, _)) = exceptions.iter().find(|(_, c, _)| c != &class) {
        return Verdict::CrashBug(format!(
            "inconsistent exceptions: {class} on {} vs {other} on {}",
            first.backend.name, o.backend.name
        ));
    }
    if cfg.is_benign(class) {
        Verdict::InvalidInput(format!("{class} on all backends: {message}"))
    } else {
        Verdict::CrashBug(format!("{class} on all backends: {message}"))
    }
}

//! A small multi-backend numeric library with seeded defects.
//!
//! Three backends share one implementation of seven APIs:
//!
//! * `ref` accumulates reductions front to back; it is the golden semantics.
//! * `fast` accumulates reductions back to front. Elementwise results are
//!   bit-identical to `ref`; reductions may differ in the last bit.
//! * `buggy` is `fast` plus whichever defects are enabled.
//!
//! The library is served over the executor protocol by [`serve`], normally
//! from the `tracefuzz serve-ref` subcommand.
//!
//! | id | effect | trigger on `buggy` |
//! |----|--------|--------------------|
//! | D1 | +1.0 on every output element | `rt.pool1d` with `stride > 1` |
//! | D2 | `InternalError` | `rt.pad1d` with `mode = "reflect"` |
//! | D3 | silently returns zeros | `rt.pool1d` with `window <= 0` |
//! | D4 | sleeps 50 ms | `rt.cast` to `float16` |
//! | D5 | `NotFoundError` | `rt.reduce_sum` on a `float16` tensor |
//! | D6 | aborts the process | `rt.pad1d` with a negative amount |

mod ops;
mod tensor;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

pub use ops::{add, call, cast, matmul, pad1d, pool1d, reduce_sum, scale, SumOrder, APIS};
pub use tensor::{round_to, Tensor, MAX_ELEMENTS};

use crate::harness::{ExecutorSpec, Request, Response};
use crate::model::BackendId;

/// Seed corpus for the reference APIs, in trace format.
pub const BUNDLED_CORPUS: &str = include_str!("../../data/reference_corpus.jsonl");
/// Defect config enabling D1 through D5.
pub const DEFECTS_ALL: &str = include_str!("../../data/defects_all.txt");

/// An exception raised by a reference API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub class: String,
    pub message: String,
}

impl ApiError {
    pub fn new(class: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            class: class.into(),
            message: message.into(),
        }
    }

    pub fn value(message: impl Into<String>) -> Self {
        Self::new("ValueError", message)
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        Self::new("TypeError", message)
    }
}

/// How a call can fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Raise(ApiError),
    /// The serving process must die abnormally.
    Abort,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Raise(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Ref,
    Fast,
    Buggy,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Ref, Backend::Fast, Backend::Buggy];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Ref => "ref",
            Backend::Fast => "fast",
            Backend::Buggy => "buggy",
        }
    }

    pub fn sum_order(self) -> SumOrder {
        match self {
            Backend::Ref => SumOrder::Forward,
            Backend::Fast | Backend::Buggy => SumOrder::Reverse,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown backend `{s}` (expected ref, fast or buggy)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefectId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
}

impl DefectId {
    pub const ALL: [DefectId; 6] = [
        DefectId::D1,
        DefectId::D2,
        DefectId::D3,
        DefectId::D4,
        DefectId::D5,
        DefectId::D6,
    ];
}

impl fmt::Display for DefectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for DefectId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DefectId::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown defect id `{s}`"))
    }
}

/// Enabled defects.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DefectSet(BTreeSet<DefectId>);

impl DefectSet {
    pub fn none() -> Self {
        Self::default()
    }

    /// D1 through D5, the set used by the bundled campaign.
    pub fn campaign() -> Self {
        Self::parse_config(DEFECTS_ALL).expect("bundled defect config parses")
    }

    pub fn of(ids: impl IntoIterator<Item = DefectId>) -> Self {
        Self(ids.into_iter().collect())
    }

    pub fn contains(&self, id: DefectId) -> bool {
        self.0.contains(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = DefectId> + '_ {
        self.0.iter().copied()
    }

    /// Parses a defect config: one id per line, `#` starts a comment.
    pub fn parse_config(text: &str) -> Result<Self, String> {
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Self)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse_config(&text)
    }

    /// Parses a comma-separated list; `none` or an empty string is the empty set.
    pub fn parse_list(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() || s.trim().eq_ignore_ascii_case("none") {
            return Ok(Self::none());
        }
        s.split(',').map(str::parse).collect::<Result<BTreeSet<_>, _>>().map(Self)
    }
}

impl fmt::Display for DefectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let ids: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&ids.join(","))
    }
}

/// Arguments of the `serve-ref` executor.
#[derive(Debug, Clone, clap::Args)]
pub struct ServeArgs {
    /// Backend to serve: ref, fast or buggy.
    #[arg(long)]
    pub backend: String,
    /// Comma-separated defect ids to enable, or `none`.
    #[arg(long, default_value = "none")]
    pub defects: String,
    /// Defect config file, merged with `--defects`.
    #[arg(long)]
    pub defects_file: Option<std::path::PathBuf>,
    /// Simulated per-call dispatch latency in microseconds.
    #[arg(long, default_value_t = 1000)]
    pub latency_us: u64,
}

#[derive(clap::Parser)]
struct ServeCli {
    #[command(flatten)]
    args: ServeArgs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub backend: Backend,
    pub defects: DefectSet,
    /// Slept before every timed repetition; stands in for device dispatch
    /// cost so that timings sit above the performance oracle's floor.
    pub dispatch_latency: Duration,
}

impl ServeConfig {
    pub fn new(backend: Backend, defects: DefectSet) -> Self {
        Self {
            backend,
            defects,
            dispatch_latency: Duration::ZERO,
        }
    }

    pub fn from_args(args: &ServeArgs) -> Result<Self, String> {
        let backend = args.backend.parse()?;
        let mut defects = DefectSet::parse_list(&args.defects)?;
        if let Some(path) = &args.defects_file {
            defects.0.extend(DefectSet::load(path)?.0);
        }
        Ok(Self {
            backend,
            defects,
            dispatch_latency: Duration::from_micros(args.latency_us),
        })
    }
}

/// Executes one request in-process. Aborting defects abort the process.
pub fn handle(cfg: &ServeConfig, req: &Request) -> Response {
    if req.backend != cfg.backend.name() {
        return Response::exception(
            req.id,
            "UnsupportedBackend",
            format!(
                "this executor serves `{}`, not `{}`",
                cfg.backend, req.backend
            ),
        );
    }
    let reps = req.timing_reps.max(1);
    let mut elapsed = Vec::with_capacity(reps as usize);
    let mut last = None;
    for _ in 0..reps {
        let start = Instant::now();
        if !cfg.dispatch_latency.is_zero() {
            thread::sleep(cfg.dispatch_latency);
        }
        let result = call(&req.api, &req.args, cfg.backend, &cfg.defects);
        elapsed.push(start.elapsed().as_secs_f64() * 1e3);
        match result {
            Ok(t) => last = Some(t),
            Err(Failure::Raise(e)) => return Response::exception(req.id, e.class, e.message),
            Err(Failure::Abort) => std::process::abort(),
        }
    }
    Response::ok(req.id, last.expect("reps >= 1").digest(), elapsed)
}

/// Serves requests line by line until `input` closes.
pub fn serve<R: BufRead, W: Write>(cfg: &ServeConfig, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Request>(&line) {
            Ok(req) => handle(cfg, &req),
            Err(e) => Response::exception(0, "ProtocolError", e.to_string()),
        };
        writeln!(output, "{}", serde_json::to_string(&resp).map_err(io::Error::other)?)?;
        output.flush()?;
    }
    Ok(())
}

/// Serves on stdin/stdout.
pub fn serve_stdio(cfg: &ServeConfig) -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve(cfg, stdin.lock(), stdout.lock())
}

/// Lets any binary double as a reference executor: when the first argument
/// is `serve-ref`, serves on stdio and exits; otherwise returns.
pub fn maybe_serve() {
    let mut argv = std::env::args();
    let program = argv.next().unwrap_or_default();
    let rest: Vec<String> = argv.collect();
    if rest.first().map(String::as_str) != Some("serve-ref") {
        return;
    }
    use clap::Parser;
    let cli = ServeCli::parse_from(std::iter::once(program).chain(rest.into_iter().skip(1)));
    let code = match ServeConfig::from_args(&cli.args) {
        Ok(cfg) => match serve_stdio(&cfg) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("serve-ref: {e}");
                2
            }
        },
        Err(e) => {
            eprintln!("serve-ref: {e}");
            2
        }
    };
    std::process::exit(code);
}

/// Launch spec for a reference executor hosted by `program` (a binary that
/// handles `serve-ref`, such as `tracefuzz` itself).
pub fn executor_spec(
    program: impl AsRef<Path>,
    backend: Backend,
    defects: &DefectSet,
    latency: Duration,
) -> ExecutorSpec {
    ExecutorSpec::new(
        program.as_ref(),
        [
            "serve-ref".to_string(),
            "--backend".to_string(),
            backend.name().to_string(),
            "--defects".to_string(),
            defects.to_string(),
            "--latency-us".to_string(),
            latency.as_micros().to_string(),
        ],
    )
}

/// Targets for all three reference backends on the local machine.
pub fn targets(
    program: impl AsRef<Path>,
    defects: &DefectSet,
    latency: Duration,
) -> Vec<(BackendId, ExecutorSpec)> {
    Backend::ALL
        .into_iter()
        .map(|b| {
            (
                BackendId::new(b.name(), "local"),
                executor_spec(program.as_ref(), b, defects, latency),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arg, Dtype, Value};

    fn req(api: &str, backend: &str, args: Vec<Arg>) -> Request {
        Request {
            id: 1,
            api: api.into(),
            backend: backend.into(),
            args,
            timing_reps: 2,
        }
    }

    fn x(shape: &[usize], dtype: Dtype) -> Arg {
        Arg::new("x", Value::tensor(shape.to_vec(), dtype, 3))
    }

    #[test]
    fn defect_config_parsing() {
        let set = DefectSet::parse_config("# all\nD1\nd2 # reflect\n\nD5\n").unwrap();
        assert_eq!(set, DefectSet::of([DefectId::D1, DefectId::D2, DefectId::D5]));
        assert!(DefectSet::parse_config("D9").is_err());
        assert_eq!(DefectSet::parse_list("none").unwrap(), DefectSet::none());
        assert_eq!(DefectSet::parse_list(&set.to_string()).unwrap(), set);
        let campaign = DefectSet::campaign();
        assert!(campaign.contains(DefectId::D5) && !campaign.contains(DefectId::D6));
    }

    #[test]
    fn scale_by_one_is_identity_everywhere() {
        let spec = Value::tensor(vec![4, 5], Dtype::Float32, 8);
        let input = Tensor::materialize(spec.as_tensor().unwrap()).unwrap();
        for b in Backend::ALL {
            let cfg = ServeConfig::new(b, DefectSet::campaign());
            let resp = handle(
                &cfg,
                &req(
                    "rt.scale",
                    b.name(),
                    vec![Arg::new("x", spec.clone()), Arg::new("factor", Value::float(1.0))],
                ),
            );
            assert_eq!(resp.output.unwrap(), input.digest());
            assert_eq!(resp.elapsed_ms.len(), 2);
        }
    }

    #[test]
    fn d1_adds_one_per_element() {
        let args = vec![
            x(&[8], Dtype::Float64),
            Arg::new("window", Value::int(2)),
            Arg::new("stride", Value::int(2)),
        ];
        let good = call("rt.pool1d", &args, Backend::Ref, &DefectSet::campaign()).unwrap();
        let bad = call("rt.pool1d", &args, Backend::Buggy, &DefectSet::campaign()).unwrap();
        assert_eq!(good.shape, vec![4]);
        for (g, b) in good.data.iter().zip(&bad.data) {
            assert_eq!(b - g, 1.0);
        }
        let healthy = call("rt.pool1d", &args, Backend::Buggy, &DefectSet::none()).unwrap();
        assert_eq!(healthy, good);
    }

    #[test]
    fn d3_silently_accepts_bad_window() {
        let args = vec![
            x(&[8], Dtype::Float32),
            Arg::new("window", Value::int(-1)),
            Arg::new("stride", Value::int(1)),
        ];
        let on_ref = call("rt.pool1d", &args, Backend::Ref, &DefectSet::campaign()).unwrap_err();
        assert_eq!(on_ref, Failure::Raise(ApiError::value("pool1d: window (-1) and stride (1) must be positive")));
        let on_buggy = call("rt.pool1d", &args, Backend::Buggy, &DefectSet::campaign()).unwrap();
        assert!(on_buggy.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn d2_d5_d6_effects() {
        let pad = |mode: &str, amount: (i64, i64)| {
            vec![
                x(&[2, 8], Dtype::Float32),
                Arg::new("amount", Value::tuple(vec![Value::int(amount.0), Value::int(amount.1)])),
                Arg::new("mode", Value::str(mode)),
            ]
        };
        let all = DefectSet::of(DefectId::ALL);
        match call("rt.pad1d", &pad("reflect", (2, 2)), Backend::Buggy, &all).unwrap_err() {
            Failure::Raise(e) => assert_eq!(e.class, "InternalError"),
            other => panic!("{other:?}"),
        }
        assert!(call("rt.pad1d", &pad("reflect", (2, 2)), Backend::Ref, &all).is_ok());
        assert_eq!(
            call("rt.pad1d", &pad("zeros", (-1, 0)), Backend::Buggy, &all).unwrap_err(),
            Failure::Abort
        );

        let rs = vec![x(&[4, 4], Dtype::Float16), Arg::new("axis", Value::int(0))];
        match call("rt.reduce_sum", &rs, Backend::Buggy, &all).unwrap_err() {
            Failure::Raise(e) => assert_eq!(e.class, "NotFoundError"),
            other => panic!("{other:?}"),
        }
        assert!(call("rt.reduce_sum", &rs, Backend::Fast, &all).is_ok());
    }

    #[test]
    fn d4_sleeps_on_half_cast() {
        let args = vec![x(&[4], Dtype::Float32), Arg::new("dtype", Value::str("float16"))];
        let start = Instant::now();
        call("rt.cast", &args, Backend::Buggy, &DefectSet::campaign()).unwrap();
        assert!(start.elapsed() >= ops::CAST_SLEEP);
    }

    #[test]
    fn invalid_arguments_raise_benign_classes() {
        let cfg = ServeConfig::new(Backend::Ref, DefectSet::none());
        let cases = vec![
            req("rt.scale", "ref", vec![x(&[2], Dtype::Float32)]),
            req("rt.scale", "ref", vec![x(&[2], Dtype::Float32), Arg::new("factor", Value::str("a"))]),
            req("rt.cast", "ref", vec![x(&[2], Dtype::Float32), Arg::new("dtype", Value::str("qq"))]),
            req("rt.add", "ref", vec![Arg::new("a", Value::int(1)), Arg::new("b", Value::int(1))]),
            req("rt.reduce_sum", "ref", vec![x(&[2], Dtype::Complex64)]),
        ];
        for r in cases {
            let resp = handle(&cfg, &r);
            let class = resp.exception.unwrap().class;
            assert!(class == "ValueError" || class == "TypeError", "{class}");
        }
    }

    #[test]
    fn wrong_backend_is_refused() {
        let cfg = ServeConfig::new(Backend::Ref, DefectSet::none());
        let resp = handle(&cfg, &req("rt.scale", "gpu", vec![]));
        assert_eq!(resp.exception.unwrap().class, "UnsupportedBackend");
    }

    #[test]
    fn serve_answers_each_line() {
        let cfg = ServeConfig::new(Backend::Fast, DefectSet::none());
        let r = req(
            "rt.reduce_sum",
            "fast",
            vec![x(&[3, 4], Dtype::Float32), Arg::new("axis", Value::int(1))],
        );
        let input = format!("{}\n\nnot json\n", serde_json::to_string(&r).unwrap());
        let mut out = Vec::new();
        serve(&cfg, input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Response> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].output.as_ref().unwrap().shape, vec![3]);
        assert_eq!(lines[1].exception.as_ref().unwrap().class, "ProtocolError");
    }
}

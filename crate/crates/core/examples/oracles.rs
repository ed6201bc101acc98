//! The three oracles on hand-made outcomes.
//!
//! ```text
//! cargo run --example oracles
//! ```

use tracefuzz::harness::{OutputDigest, Outcome, Status};
use tracefuzz::model::{BackendId, Dtype};
use tracefuzz::oracle::{crash_verdict, differential_verdict, performance_verdict, OracleConfig};

fn ok(backend: &str, output: Option<OutputDigest>, elapsed_ms: Vec<f64>) -> Outcome {
    Outcome {
        backend: BackendId::new(backend, "local"),
        status: Status::Ok,
        output,
        elapsed_ms,
    }
}

fn raised(backend: &str, class: &str) -> Outcome {
    Outcome {
        backend: BackendId::new(backend, "local"),
        status: Status::Exception {
            class: class.into(),
            message: "bad argument".into(),
        },
        output: None,
        elapsed_ms: vec![],
    }
}

fn main() {
    let cfg = OracleConfig::default();

    let digest = |sum: f64| OutputDigest {
        shape: vec![1, 16, 7, 7],
        dtype: Dtype::Float32,
        all_finite: true,
        sum,
        abs_sum: sum.abs(),
        sample: vec![],
    };
    let v = differential_verdict(
        &[ok("cpu", Some(digest(-523.5300)), vec![1.0]), ok("gpu", Some(digest(-601.6165)), vec![1.0])],
        &cfg,
    )
    .unwrap();
    println!("differential: {} ({})", v.kind(), v.detail());

    let timed = |ms: f64| ok("gpu", Some(digest(0.0)), vec![ms; 11]);
    let v = performance_verdict(&timed(377.0), &timed(101.0), Dtype::Float16, Dtype::Float32, &cfg).unwrap();
    println!("performance:  {} ({})", v.kind(), v.detail());
    let na = performance_verdict(&timed(377.0), &timed(101.0), Dtype::Float16, Dtype::Bfloat16, &cfg);
    println!("performance:  float16 vs bfloat16 -> {na:?}");

    for outcomes in [
        vec![raised("cpu", "ValueError"), raised("gpu", "ValueError")],
        vec![raised("cpu", "RuntimeError"), ok("gpu", Some(digest(1.0)), vec![1.0])],
        vec![
            ok("cpu", Some(digest(1.0)), vec![1.0]),
            Outcome::crash(BackendId::new("gpu", "local"), 139),
        ],
    ] {
        let v = crash_verdict(&outcomes, &cfg);
        println!("crash:        {} ({})", v.kind(), v.detail());
    }
}

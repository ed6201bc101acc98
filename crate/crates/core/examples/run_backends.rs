//! Runs one call on three reference backends in separate executor
//! processes, then classifies the outcomes.
//!
//! This binary doubles as the executor: it re-launches itself with
//! `serve-ref`.
//!
//! ```text
//! cargo run --example run_backends
//! ```

use std::time::Duration;

use tracefuzz::harness::ExecutorPool;
use tracefuzz::model::{Arg, Dtype, InvocationEntry, Source, TestCase, Value};
use tracefuzz::oracle::{differential_verdict, OracleConfig};
use tracefuzz::reference::{self, DefectSet};

fn case(pool: &ExecutorPool, api: &str, args: Vec<Arg>) -> TestCase {
    TestCase {
        entry: InvocationEntry::new(api, Source::Doc, args),
        seed: 0,
        lineage: vec![],
        backends: pool.backends().to_vec(),
        timing_reps: 3,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    reference::maybe_serve();
    let exe = std::env::current_exe()?;
    let targets = reference::targets(&exe, &DefectSet::campaign(), Duration::ZERO);
    let mut pool = ExecutorPool::launch(&targets)?;
    let oracle = OracleConfig::default();
    let x = || Arg::new("x", Value::tensor(vec![8], Dtype::Float32, 3));

    let cases = [
        case(&pool, "rt.scale", vec![x(), Arg::new("factor", Value::float(1.0))]),
        case(&pool, "rt.pool1d", vec![x(), Arg::new("window", Value::int(2)), Arg::new("stride", Value::int(2))]),
        case(&pool, "rt.pool1d", vec![x(), Arg::new("window", Value::int(-1)), Arg::new("stride", Value::int(1))]),
        case(&pool, "rt.pool1d", vec![x(), Arg::new("window", Value::int(99)), Arg::new("stride", Value::int(1))]),
    ];
    for tc in &cases {
        let outcomes = pool.run_test(tc, Duration::from_secs(5))?;
        println!("{} {:?}", tc.entry.api, tc.entry.args.iter().skip(1).map(|a| &a.value).collect::<Vec<_>>());
        for o in &outcomes {
            match &o.output {
                Some(d) => println!("  {:<12} ok shape={:?} sum={:.4}", o.backend.to_string(), d.shape, d.sum),
                None => println!("  {:<12} {:?}", o.backend.to_string(), o.status),
            }
        }
        let v = differential_verdict(&outcomes, &oracle)?;
        println!("  => {} {}\n", v.kind(), v.detail());
    }
    Ok(())
}

//! Mutates seed entries and prints each mutant with the rules applied.
//!
//! ```text
//! cargo run --example mutate_entries -- rt.pool1d 8
//! ```

use tracefuzz::model::TestCase;
use tracefuzz::mutation::{MutationConfig, Mutator};
use tracefuzz::reference::BUNDLED_CORPUS;
use tracefuzz::rng::RngStream;
use tracefuzz::store::{parse_trace_str, ValueStore};

fn render(entry: &tracefuzz::model::InvocationEntry) -> String {
    let args: Vec<String> = entry
        .args
        .iter()
        .map(|a| format!("{}={}", a.name, serde_json::to_string(&a.value).unwrap_or_default()))
        .collect();
    format!("{}({})", entry.api, args.join(", "))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut argv = std::env::args().skip(1);
    let api = argv.next().unwrap_or_else(|| "rt.pool1d".into());
    let count: usize = argv.next().map(|n| n.parse()).transpose()?.unwrap_or(8);

    let mut store = ValueStore::new();
    store.ingest(parse_trace_str(BUNDLED_CORPUS));
    let cfg = MutationConfig::default();
    let mutator = Mutator::new(&store, &cfg);

    for i in 0..count {
        let mut rng = RngStream::derive(42, &[&api, &i.to_string()]);
        let m = mutator.mutate(&api, &mut rng)?;
        println!("#{i} numMutation={}", m.num_mutation);
        for a in &m.applications {
            let ty = a.type_rule.map(|r| format!("{} + ", r.as_str())).unwrap_or_default();
            println!("   slot {} ({}): {ty}{}", a.index, a.name, a.value_rule.as_str());
        }
        println!("   {}", render(&m.entry));
    }

    // The same seed always yields the same test case.
    let plan = tracefuzz::mutation::ExecPlan {
        backends: vec![],
        timing_reps: 1,
    };
    let once: TestCase = tracefuzz::mutation::mutate(&api, &store, &cfg, &mut RngStream::new(5), &plan)?;
    let twice = tracefuzz::mutation::mutate(&api, &store, &cfg, &mut RngStream::new(5), &plan)?;
    assert_eq!(serde_json::to_string(&once)?, serde_json::to_string(&twice)?);
    println!("\nreplaying seed 5 reproduces the same test case");
    Ok(())
}

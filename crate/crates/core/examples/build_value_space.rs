//! Builds the API and argument value spaces from the bundled corpus and
//! queries them.
//!
//! ```text
//! cargo run --example build_value_space
//! ```

use tracefuzz::model::FuzzType;
use tracefuzz::reference::BUNDLED_CORPUS;
use tracefuzz::store::{parse_trace_str, StoreFile, ValueStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("seeds.tfs");

    let mut file = StoreFile::open(&path)?;
    let first = file.ingest(parse_trace_str(BUNDLED_CORPUS))?;
    let again = file.ingest(parse_trace_str(BUNDLED_CORPUS))?;
    println!(
        "first ingest: {} apis, {} added, {} duplicates",
        first.apis_covered, first.entries_added, first.duplicates_skipped
    );
    println!(
        "second ingest: {} added, {} duplicates",
        again.entries_added, again.duplicates_skipped
    );

    let store = ValueStore::load(&path)?;
    let stats = store.stats();
    println!("reloaded: {} apis, {} entries", stats.num_apis, stats.total_entries);
    for api in store.apis() {
        println!("  {:<14} {}", api, store.signature(api).unwrap_or("?"));
    }

    // Which other APIs recorded a tensor named `x` of type Tensor<2,float32>?
    let t = FuzzType::Tensor {
        rank: 2,
        dtype: tracefuzz::model::Dtype::Float32,
    };
    println!("\ncandidates for x: {t} outside rt.scale");
    for (api, values) in store.query_arg_candidates(&t, "x", "rt.scale") {
        println!("  {api}: {} value(s)", values.len());
    }
    Ok(())
}

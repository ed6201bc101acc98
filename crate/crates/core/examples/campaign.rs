//! A small end-to-end campaign against the reference library: ingest the
//! bundled corpus, fuzz every API on three backends with all defects
//! enabled, then print the report.
//!
//! ```text
//! cargo run --release --example campaign -- 40
//! ```

use std::fs;

use tracefuzz::campaign::{report, run_campaign, CampaignConfig};
use tracefuzz::reference::{self, BUNDLED_CORPUS, DEFECTS_ALL};
use tracefuzz::store::{parse_trace_str, StoreFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    reference::maybe_serve();
    let mutants = std::env::args().nth(1).unwrap_or_else(|| "40".into());

    let dir = tempfile::tempdir()?;
    fs::write(dir.path().join("defects.txt"), DEFECTS_ALL)?;
    StoreFile::open(dir.path().join("store.tfs"))?.ingest(parse_trace_str(BUNDLED_CORPUS))?;

    let mut text = format!("store_path = store.tfs\nper_api_mutants = {mutants}\ntiming_reps = 5\n");
    for backend in ["ref", "fast", "buggy"] {
        text.push_str(&format!(
            "target.{backend} = {{self}} serve-ref --backend {backend} --defects-file defects.txt\n"
        ));
    }
    let cfg = CampaignConfig::parse(&text, dir.path())?;
    let run = run_campaign(&cfg)?;
    for d in &run.summary.diagnostics {
        eprintln!("warning: {d}");
    }

    let rep = report(&run.output_dir)?;
    println!("{}", rep.render());
    Ok(())
}

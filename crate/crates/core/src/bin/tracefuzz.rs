use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tracefuzz::campaign::{self, CampaignConfig, CampaignError};
use tracefuzz::oracle::Verdict;
use tracefuzz::reference::{self, ServeArgs, ServeConfig};
use tracefuzz::store::{parse_trace, StoreFile};

const EXIT_FINDINGS: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "tracefuzz", version, about = "Trace-driven API mutation fuzzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add trace records to a value store.
    Ingest {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        store: PathBuf,
    },
    /// Run a fuzzing campaign.
    Fuzz {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mutants: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated API names.
        #[arg(long)]
        api: Option<String>,
    },
    /// Re-execute a saved test case.
    Replay {
        testcase: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Summarize the verdicts of a campaign output directory.
    Report { dir: PathBuf },
    /// Serve the bundled reference library as an executor on stdio.
    ServeRef(ServeArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<CampaignConfig, CampaignError> {
        let mut cfg = CampaignConfig::load(&self.config)?;
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CampaignError::Config(format!("--set expects KEY=VALUE, got `{o}`")))?;
            cfg.set(k.trim(), v.trim()).map_err(CampaignError::Config)?;
        }
        Ok(cfg)
    }
}

fn ingest(traces: &[PathBuf], store: &PathBuf) -> Result<u8, CampaignError> {
    let mut file = StoreFile::open(store)?;
    let (mut added, mut dups, mut ok) = (0, 0, 0);
    let mut apis = BTreeSet::new();
    for path in traces {
        let f = File::open(path).map_err(|source| CampaignError::Io {
            path: path.clone(),
            source,
        })?;
        let records: Vec<_> = parse_trace(BufReader::new(f)).collect();
        apis.extend(records.iter().flatten().map(|e| e.api.clone()));
        let stats = file.ingest(records)?;
        for e in &stats.errors {
            eprintln!("{}:{}: {}", path.display(), e.line, e.message);
        }
        added += stats.entries_added;
        dups += stats.duplicates_skipped;
        ok += stats.records_ok();
    }
    let total = file.store().stats();
    println!(
        "apis_covered={} entries_added={added} duplicates_skipped={dups} store_apis={} store_entries={}",
        apis.len(),
        total.num_apis,
        total.total_entries
    );
    if ok == 0 {
        eprintln!("no valid records ingested");
        return Ok(EXIT_ERROR);
    }
    Ok(0)
}

fn fuzz(mut cfg: CampaignConfig, jobs: Option<usize>, seed: Option<u64>, mutants: Option<usize>, out: Option<PathBuf>, api: Option<String>) -> Result<u8, CampaignError> {
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if let Some(s) = seed {
        cfg.campaign_seed = s;
    }
    if let Some(m) = mutants {
        cfg.mutation.per_api_mutants = m;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    if let Some(a) = api {
        cfg.set("api_filter", &a).map_err(CampaignError::Config)?;
    }
    let run = campaign::run_campaign(&cfg)?;
    print!("{}", run.summary.render());
    for d in &run.summary.diagnostics {
        eprintln!("warning: {d}");
    }
    println!("artifacts in {}", run.output_dir.display());
    Ok(if run.summary.has_bugs() { EXIT_FINDINGS } else { 0 })
}

fn replay(testcase: &PathBuf, cfg: CampaignConfig) -> Result<u8, CampaignError> {
    let (case, run) = campaign::replay_case(&cfg, testcase)?;
    println!(
        "{} (seed {}, lineage {:?})",
        case.testcase.entry.api, case.testcase.seed, case.testcase.lineage
    );
    for o in &run.outcomes {
        let out = o
            .output
            .as_ref()
            .map(|d| format!(" shape={:?} sum={}", d.shape, d.sum))
            .unwrap_or_default();
        println!("  {}: {:?}{out}", o.backend, o.status);
    }
    let show = |label: &str, v: &Verdict| println!("{label}: {} {}", v.kind(), v.detail());
    show("functional", &run.functional);
    match &run.performance {
        Some(v) => show("performance", v),
        None if run.twin.is_some() => println!("performance: not applicable"),
        None => {}
    }
    let bug = run.functional.kind().is_bug() || run.performance.as_ref().is_some_and(|v| v.kind().is_bug());
    Ok(if bug { EXIT_FINDINGS } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { traces, store } => ingest(&traces, &store),
        Command::Fuzz { config, jobs, seed, mutants, output_dir, api } => {
            config.load().and_then(|cfg| fuzz(cfg, jobs, seed, mutants, output_dir, api))
        }
        Command::Replay { testcase, config } => config.load().and_then(|cfg| replay(&testcase, cfg)),
        Command::Report { dir } => campaign::report(&dir).map(|r| {
            print!("{}", r.render());
            0
        }),
        Command::ServeRef(args) => {
            let served = ServeConfig::from_args(&args)
                .map_err(CampaignError::Config)
                .and_then(|cfg| {
                    reference::serve_stdio(&cfg).map_err(|source| CampaignError::Io {
                        path: PathBuf::from("<stdio>"),
                        source,
                    })
                });
            served.map(|()| 0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

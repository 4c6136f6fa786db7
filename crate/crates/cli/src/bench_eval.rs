use std::path::PathBuf;

use hdbo::benchmarks::BenchmarkSpec;
use hdbo::bo::initial_design;
use serde::{Deserialize, Serialize};

use crate::config::{self, RunManifest};
use crate::data::read_rows;
use crate::error::{usage, Result};
use crate::output::{fmt_f64, sibling, write_json, CsvOut};

pub const COMMAND: &str = "bench-eval";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark as `Name(d,d_eff)`.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// CSV of points in [0, 1]^d, one per row.
    #[arg(long, conflicts_with = "random")]
    pub points: Option<PathBuf>,
    /// Evaluate at this many seeded uniform points instead.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV `x1..xd,y` with `y` the maximization value (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Settings {
    pub benchmark: String,
    pub points: Option<PathBuf>,
    pub random: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn resolve(args: &Args) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(seed) = config::env_seed()? {
        s.seed = seed;
    }
    let mut s = config::apply_file(s, args.config.as_deref(), COMMAND)?;
    if let Some(b) = &args.benchmark {
        s.benchmark = b.clone();
    }
    if args.points.is_some() {
        s.points = args.points.clone();
        s.random = None;
    }
    if args.random.is_some() {
        s.random = args.random;
        s.points = None;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if args.out.is_some() {
        s.out = args.out.clone();
    }
    if s.benchmark.trim().is_empty() {
        return Err(usage(
            "a benchmark is required (--benchmark \"Name(d,d_eff)\")",
        ));
    }
    if s.points.is_some() == s.random.is_some() {
        return Err(usage("give exactly one of --points <csv> or --random <n>"));
    }
    Ok(s)
}

pub fn run(args: Args) -> Result<()> {
    let s = resolve(&args)?;
    let bench: BenchmarkSpec = s.benchmark.parse()?;
    let points: Vec<Vec<f64>> = match (&s.points, s.random) {
        (Some(p), _) => {
            let rows = read_rows(p)?;
            if rows[0].len() != bench.d {
                return Err(usage(format!(
                    "{} has {} columns, {} needs {}",
                    p.display(),
                    rows[0].len(),
                    bench.name(),
                    bench.d
                )));
            }
            rows
        }
        (None, Some(n)) => {
            let x = initial_design(bench.d, n, s.seed)?;
            x.row_iter().map(|r| r.iter().copied().collect()).collect()
        }
        (None, None) => unreachable!("checked in resolve"),
    };

    let mut out = CsvOut::create(s.out.as_deref())?;
    let mut header: Vec<String> = (1..=bench.d).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    out.row(&header)?;
    for (i, u) in points.iter().enumerate() {
        let y = bench
            .evaluate(u)
            .map_err(|e| usage(format!("point {}: {e}", i + 1)))?;
        let mut row: Vec<String> = u.iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(y));
        out.row(&row)?;
    }
    out.finish()?;
    if let Some(path) = &s.out {
        write_json(
            &sibling(path, "manifest.json"),
            &RunManifest::new(COMMAND, s.seed, &s, vec![path.clone()])?,
        )?;
    }
    Ok(())
}

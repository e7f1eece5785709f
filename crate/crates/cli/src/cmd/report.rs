use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use stylecap::metrics::render_table;

use super::eval::MetricsFile;
use crate::error::{invalid, CliError};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directories written by `eval`, one table row each.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Use the oracle top-1 rows instead of the first-sample rows.
    #[arg(long)]
    pub oracle: bool,
}

fn label(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Writes `summary.txt`, `summary.json` and `sentiment.csv` (lexicon
/// classification counts per run).
pub fn run(out: &Path, args: &ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(args.runs.len());
    let mut csv = String::from("run,negative,neutral,positive\n");
    for dir in &args.runs {
        let path = dir.join("metrics.json");
        let text = fs::read_to_string(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let m: MetricsFile = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        if let Some(c) = &m.sentiment_counts {
            let _ = writeln!(csv, "{},{},{},{}", label(dir), c.negative, c.neutral, c.positive);
        }
        rows.push((label(dir), if args.oracle { m.oracle } else { m.first }));
    }
    let table = render_table(&rows);
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(out)?;
        fs::write(out.join("summary.txt"), &table)?;
        let json: Vec<_> = rows.iter().map(|(l, r)| serde_json::json!({ "run": l, "metrics": r })).collect();
        fs::write(out.join("summary.json"), serde_json::to_string_pretty(&json)? + "\n")?;
        fs::write(out.join("sentiment.csv"), &csv)?;
        Ok(())
    };
    write().with_context(|| format!("writing {}", out.display()))?;
    print!("{table}");
    Ok(())
}

//! Runs every pipeline stage on a small configuration and prints the
//! overall scores.
//!
//! ```bash
//! cargo run --release --example pipeline
//! cargo run --release --example pipeline -- /tmp/windcast-run
//! ```
//!
//! The same run from the command line, with the configuration below saved
//! as `run.toml`:
//!
//! ```bash
//! windcast pipeline --config run.toml --out /tmp/windcast-run
//! ```

use std::path::PathBuf;

use windcast::config::RunConfig;
use windcast::pipeline::{files, run_pipeline, RunOptions, Stage};

const CONFIG: &str = r#"
seed = 2024

[sites]
ids = ["north", "east", "south"]
capacities = [1.0]

[simulation]
hours = 6000

[model]
train_hours = 4000

[market]
site = "east"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("windcast-example"));
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.out = out.clone();
    run_pipeline(&cfg, Stage::Simulate, &RunOptions { emit_plots_data: true })?;

    let mut names: Vec<String> = std::fs::read_dir(&out)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    names.sort();
    println!("outputs in {}: {}", out.display(), names.join(", "));

    let scores = std::fs::read_to_string(out.join(files::SCORES))?;
    println!("{:<18} {:>10} {:>10} {:>6}", "metric", "value", "se", "n");
    for line in scores.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] != "all" {
            continue;
        }
        let value: f64 = f[2].parse().unwrap_or(f64::NAN);
        let se: f64 = f[3].parse().unwrap_or(f64::NAN);
        println!("{:<18} {:>10.4e} {:>10.2e} {:>6}", f[0], value, se, f[4]);
    }
    Ok(())
}

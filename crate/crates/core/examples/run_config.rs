//! Drive a bundled experiment config through the library API, the same path
//! the `regime-bsde run` command takes, and print its verdicts.
//!
//! ```bash
//! cargo run --release --example run_config -- configs/example_3_2_aggregate.json
//! ```

use std::path::PathBuf;

use regime_bsde::experiment::{describe, run, ExperimentConfig};

fn main() -> regime_bsde::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/example_3_2_aggregate.json"));
    let cfg = ExperimentConfig::from_file(&path)?;
    println!("{}", describe(&cfg.kind)?.lines().next().unwrap_or_default());
    let out = std::env::temp_dir().join("regime-bsde-example").join(&cfg.kind);
    let report = run(&cfg, None, Some(&out))?;
    for (name, ok) in &report.outcome.verdicts {
        println!("  {name:<28} {}", if *ok { "pass" } else { "FAIL" });
    }
    println!("summary and CSV files in {}", report.out_dir.display());
    println!("{}", serde_json::to_string_pretty(&report.outcome.results)?);
    Ok(())
}

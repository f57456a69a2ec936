//! Random planes against registration with and without scan alignment.
//!
//! cargo run --release --example benchmark -- 4

use planeguide::evaluation::{format_table, run_benchmark, BenchmarkConfig};
use planeguide::volume::generate_phantom;

fn main() -> planeguide::Result<()> {
    let scans = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let (volume, planes) = generate_phantom(0, [64, 64, 64])?;
    let tables = run_benchmark(&volume, &planes, scans, &BenchmarkConfig::default())?;
    print!("{}", format_table(&tables));
    Ok(())
}

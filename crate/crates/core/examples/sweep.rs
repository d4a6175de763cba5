//! Run a named sweep and print the metrics table.
//!
//!     cargo run --release --example sweep -- collusion 20

use spoofguard::harness::{csv_string, run_sweep, ExperimentConfig};

fn main() -> spoofguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "attackers".into());
    let mut cfg = ExperimentConfig::preset(&name)?;
    if let Some(t) = args.next() {
        cfg.trials_per_point = t.parse().expect("trials");
    }
    let start = std::time::Instant::now();
    let out = run_sweep(&cfg)?;
    print!("{}", csv_string(&out.rows)?);
    let unknown: usize = out.trials.iter().flat_map(|t| &t.outcomes).map(|o| o.unknown_verdicts).sum();
    eprintln!("{name}: {:.1}s, {unknown} undecided oracle verdicts", start.elapsed().as_secs_f64());
    Ok(())
}

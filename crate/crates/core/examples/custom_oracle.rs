//! Detectors accept any feasibility oracle. This one counts calls and logs the
//! sub-network sizes before delegating.
//!
//!     cargo run --release --example custom_oracle

use std::sync::atomic::{AtomicUsize, Ordering};

use spoofguard::detect::{Detector, DetectorOptions};
use spoofguard::harness::{build_scenario, initial_partition, AttackKindName, Point};
use spoofguard::sdr::{FeasibilityOracle, FeasibilityProblem, OracleResult, SdrOracle};

struct Counting {
    inner: SdrOracle,
    calls: AtomicUsize,
    largest: AtomicUsize,
}

impl FeasibilityOracle for Counting {
    fn check(&self, problem: &FeasibilityProblem) -> spoofguard::Result<OracleResult> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.largest.fetch_max(problem.n_sub(), Ordering::Relaxed);
        self.inner.check(problem)
    }
}

fn main() -> spoofguard::Result<()> {
    let point = Point { n: 30, m: 4, d: 0.3, pos_var: 1e-6, dist_var: 1e-6, value: 4.0 };
    let scenario = build_scenario(&point, AttackKindName::Collusion, 0.5, None, 8)?;
    let opts = DetectorOptions::default();
    let oracle = Counting {
        inner: SdrOracle::new(opts.oracle),
        calls: AtomicUsize::new(0),
        largest: AtomicUsize::new(0),
    };
    let initial = initial_partition(&scenario, &opts)?;
    let mut detector = Detector::new(&scenario, &oracle, opts)?;
    let c = detector.cdi(&initial)?;
    let after_cdi = oracle.calls.load(Ordering::Relaxed);
    let e = detector.ecdi(&initial)?;
    println!("cdi  {:?}: {} logical calls, {after_cdi} solves", c.predicted_malicious, c.oracle_calls);
    println!(
        "ecdi {:?}: {} logical calls, {} more solves (cdi verdicts reused)",
        e.predicted_malicious,
        e.oracle_calls,
        oracle.calls.load(Ordering::Relaxed) - after_cdi
    );
    println!("largest sub-network: {}", oracle.largest.load(Ordering::Relaxed));
    Ok(())
}

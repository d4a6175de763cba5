//! All four detectors on one distributed-attack instance, with the E-CDI trace.
//!
//!     cargo run --release --example detect -- 4 21

use spoofguard::detect::{run_algorithm, Algorithm, DetectorOptions, TestKind};
use spoofguard::harness::{build_scenario, initial_partition, AttackKindName, Point};
use spoofguard::metrics::precision_recall_f1;

fn main() -> spoofguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().map_or(4, |s| s.parse().expect("m"));
    let seed: u64 = args.next().map_or(21, |s| s.parse().expect("seed"));
    let point = Point { n: 30, m, d: 0.3, pos_var: 1e-6, dist_var: 1e-6, value: m as f64 };
    let scenario = build_scenario(&point, AttackKindName::Distributed, 0.5, None, seed)?;
    let opts = DetectorOptions::default();
    let initial = initial_partition(&scenario, &opts)?;
    println!("truth {:?}", scenario.truth());
    println!("initially suspected {} of {}", initial.suspected.len(), point.n);

    for algo in Algorithm::ALL {
        let r = run_algorithm(algo, &scenario, &initial, &opts, seed)?;
        let s = precision_recall_f1(&r.predicted_malicious, scenario.truth());
        println!(
            "{algo:>6}: {:?}  P={:.2} R={:.2} F1={:.2}  calls={}",
            r.predicted_malicious, s.precision, s.recall, s.f1, r.oracle_calls
        );
        if algo == Algorithm::Ecdi {
            for t in r.per_iteration_trace.iter().filter(|t| t.test == TestKind::Individual) {
                println!("        individual {:?}: {:?} -> cleared {:?}", t.assessed, t.status, t.exonerated);
            }
        }
    }
    Ok(())
}

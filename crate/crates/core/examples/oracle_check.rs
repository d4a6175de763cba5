//! Ask the feasibility oracle about an honest sub-network and a spoofed one.
//!
//!     cargo run --release --example oracle_check

use std::collections::BTreeSet;

use spoofguard::attack::{apply_distributed, AttackedScenario};
use spoofguard::sdr::{assemble, check_feasibility, OracleOptions, ProblemParams, PsdSplitting};
use spoofguard::swarm::{apply_position_noise, generate_swarm, measure_distances, NoiseParams};

fn main() -> spoofguard::Result<()> {
    let (n, d, seed) = (20, 0.3, 2);
    let noise = NoiseParams::default();
    let swarm = apply_position_noise(&generate_swarm(n, 0.5, d, seed)?, &noise, seed)?;
    let honest = measure_distances(&swarm, &noise, seed)?;
    let everyone: BTreeSet<usize> = (0..n).collect();

    // the busiest UAV is the most constrained one to spoof
    let lists = honest.neighbor_lists();
    let victim = (0..n).max_by_key(|&i| lists[i].len()).unwrap_or(0);
    let spoofed = apply_distributed(&swarm, &honest, &BTreeSet::from([victim]), 2.0 * d, &noise, seed)?;

    for (label, scenario) in [("honest", AttackedScenario::clean(swarm.clone(), honest.clone())), ("spoofed", spoofed)] {
        let problem = assemble(&everyone, &scenario, &ProblemParams::default())?;
        for splitting in [PsdSplitting::Chordal, PsdSplitting::Dense] {
            let opts = OracleOptions { splitting, ..OracleOptions::default() };
            let r = check_feasibility(&problem, &opts)?;
            println!(
                "{label:>8} {splitting:?}: {:?} after {} iterations, slack in [{}, {:.2e}]",
                r.status,
                r.iterations,
                r.lower_bound.map_or("-inf".into(), |lb| format!("{lb:.2e}")),
                r.upper_bound
            );
        }
        println!("         {} constraints, {} nodes", problem.constraint_count(), problem.n_sub());
    }
    Ok(())
}

//! Independent spoofers, and the pairs they leave inconsistent.
//!
//!     cargo run --example distributed_attack

use spoofguard::attack::{apply_distributed, select_malicious};
use spoofguard::suspect::{build_reported_matrix, default_pair_tolerance, initial_suspects, violating_pairs};
use spoofguard::swarm::{apply_position_noise, generate_swarm, measure_distances, NoiseParams};

fn main() -> spoofguard::Result<()> {
    let (n, m, d, seed) = (30, 4, 0.3, 11);
    let noise = NoiseParams::default();
    let swarm = apply_position_noise(&generate_swarm(n, 0.5, d, seed)?, &noise, seed)?;
    let honest = measure_distances(&swarm, &noise, seed)?;

    let attackers = select_malicious(&swarm, m, seed)?;
    let scenario = apply_distributed(&swarm, &honest, &attackers, d, &noise, seed)?;
    for &a in &attackers {
        let u = &scenario.swarm.uavs[a];
        println!("attacker {a:>2}: reports {:.3} away from where it is", u.true_pos.distance(&u.reported_pos));
    }

    let e_r = build_reported_matrix(&scenario);
    let flagged = violating_pairs(&e_r, &scenario.measurements, default_pair_tolerance(d))?;
    println!("{} violating directed pairs", flagged.len());
    for (i, j, why) in flagged.iter().take(8) {
        println!("  ({i:>2}, {j:>2}) {why:?}");
    }
    let sets = initial_suspects(&e_r, &scenario.measurements, d)?;
    println!("suspected {:?}", sets.suspected);
    Ok(())
}

//! Generate a noisy swarm and look at its measurement graph.
//!
//!     cargo run --example generate_swarm -- 30 0.3 7

use spoofguard::swarm::{apply_position_noise, generate_swarm, measure_distances, NoiseParams};

fn main() -> spoofguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(30, |s| s.parse().expect("n"));
    let d: f64 = args.next().map_or(0.3, |s| s.parse().expect("d"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let noise = NoiseParams::default();
    let swarm = apply_position_noise(&generate_swarm(n, 0.5, d, seed)?, &noise, seed)?;
    let measurements = measure_distances(&swarm, &noise, seed)?;

    let degrees: Vec<usize> = measurements.neighbor_lists().iter().map(|s| s.len()).collect();
    let isolated = degrees.iter().filter(|&&k| k == 0).count();
    let mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    println!("{n} UAVs, d = {d}: {} directed measurements", measurements.len());
    println!("mean neighbors {mean:.2}, isolated {isolated}");
    for u in swarm.uavs.iter().take(5) {
        let drift = u.true_pos.distance(&u.reported_pos);
        println!("  uav {:>2} at {:?}  (report drift {drift:.2e})", u.id, u.reported_pos.0);
    }
    Ok(())
}

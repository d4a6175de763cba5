//! Colluders gather around one benign UAV and try to get it blamed.
//!
//!     cargo run --example collusion_attack

use std::collections::BTreeSet;

use spoofguard::attack::{apply_collusion, default_collusion_target, select_malicious_excluding};
use spoofguard::detect::{cdi, ecdi, DetectorOptions};
use spoofguard::harness::initial_partition;
use spoofguard::swarm::{apply_position_noise, generate_swarm, measure_distances, NoiseParams};

fn main() -> spoofguard::Result<()> {
    let (n, m, d, seed) = (30, 4, 0.3, 5);
    let noise = NoiseParams::default();
    let swarm = apply_position_noise(&generate_swarm(n, 0.5, d, seed)?, &noise, seed)?;
    let honest = measure_distances(&swarm, &noise, seed)?;

    let target = default_collusion_target(&swarm, &honest, &BTreeSet::new()).expect("a benign UAV");
    let colluders = select_malicious_excluding(&swarm, m, &BTreeSet::from([target]), seed)?;
    let scenario = apply_collusion(&swarm, &honest, &colluders, target, d, &noise, seed)?;
    println!("target {target}, colluders {colluders:?}");

    let opts = DetectorOptions::default();
    let initial = initial_partition(&scenario, &opts)?;
    println!("initially suspected {:?} (target flagged: {})", initial.suspected, initial.suspected.contains(&target));
    let c = cdi(&initial, &scenario, &opts)?;
    let e = ecdi(&initial, &scenario, &opts)?;
    println!("cdi  keeps {:?}", c.predicted_malicious);
    println!("ecdi keeps {:?}", e.predicted_malicious);
    Ok(())
}

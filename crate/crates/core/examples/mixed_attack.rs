//! Half the attackers act alone, half collude; the plan round-trips through JSON.
//!
//!     cargo run --example mixed_attack

use std::collections::BTreeSet;

use spoofguard::attack::{apply_mixed, apply_plan, default_collusion_target, even_split, select_malicious_excluding};
use spoofguard::swarm::{apply_position_noise, generate_swarm, measure_distances, NoiseParams};

fn main() -> spoofguard::Result<()> {
    let (n, m, d, seed) = (30, 6, 0.3, 3);
    let noise = NoiseParams::default();
    let swarm = apply_position_noise(&generate_swarm(n, 0.5, d, seed)?, &noise, seed)?;
    let honest = measure_distances(&swarm, &noise, seed)?;

    let target = default_collusion_target(&swarm, &honest, &BTreeSet::new()).expect("a benign UAV");
    let ids = select_malicious_excluding(&swarm, m, &BTreeSet::from([target]), seed)?;
    let (alone, together) = even_split(&ids);
    let scenario = apply_mixed(&swarm, &honest, &alone, &together, target, d, &noise, seed)?;

    let plan = serde_json::to_string(&scenario.plan).expect("plan serializes");
    println!("plan: {plan}");
    let replayed = apply_plan(&swarm, &honest, &serde_json::from_str(&plan).expect("plan parses"), &noise)?;
    println!("replay identical: {}", replayed == scenario);
    Ok(())
}

//! Position-spoofing attacks: distributed, collusion and mixed.
//!
//! An attacker changes only what it *says*: its broadcast position and the
//! distances it claims to have measured. Its physical location, and therefore
//! every honest range measurement other UAVs take of it, stays put.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, purpose};
use crate::swarm::{MeasurementSet, NoiseParams, Position3, Swarm};

/// Colluders place fakes inside a ball of radius `d·(1 − COLLUSION_MARGIN)` around the target.
pub const COLLUSION_MARGIN: f64 = 0.05;

const MAX_REJECTION_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttackKind {
    Distributed,
    Collusion {
        target: usize,
    },
    Mixed {
        distributed_ids: BTreeSet<usize>,
        collusion_ids: BTreeSet<usize>,
        target: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub kind: AttackKind,
    pub malicious_ids: BTreeSet<usize>,
    pub fake_offset_min: f64,
    pub seed: u64,
}

impl AttackPlan {
    pub fn none(seed: u64) -> Self {
        AttackPlan {
            kind: AttackKind::Distributed,
            malicious_ids: BTreeSet::new(),
            fake_offset_min: 0.0,
            seed,
        }
    }

    pub fn target(&self) -> Option<usize> {
        match &self.kind {
            AttackKind::Distributed => None,
            AttackKind::Collusion { target } | AttackKind::Mixed { target, .. } => Some(*target),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.malicious_ids.len() >= n {
            return Err(Error::InvalidCount {
                m: self.malicious_ids.len(),
                n,
            });
        }
        if let Some(&id) = self.malicious_ids.iter().find(|&&id| id >= n) {
            return Err(Error::IdOutOfRange { id, n });
        }
        if !(self.fake_offset_min >= 0.0 && self.fake_offset_min.is_finite()) {
            return Err(invalid("fake_offset_min", "must be a nonnegative finite real"));
        }
        if let Some(t) = self.target() {
            if t >= n {
                return Err(Error::IdOutOfRange { id: t, n });
            }
            if self.malicious_ids.contains(&t) {
                return Err(Error::TargetNotBenign(t));
            }
        }
        if let AttackKind::Mixed {
            distributed_ids,
            collusion_ids,
            ..
        } = &self.kind
        {
            if let Some(&id) = distributed_ids.intersection(collusion_ids).next() {
                return Err(Error::OverlappingSets(id));
            }
            let union: BTreeSet<usize> = distributed_ids.union(collusion_ids).copied().collect();
            if union != self.malicious_ids {
                return Err(invalid("malicious_ids", "must equal distributed ∪ collusion ids"));
            }
        }
        Ok(())
    }
}

/// The swarm and measurements as the detector sees them, plus the ground truth plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackedScenario {
    pub swarm: Swarm,
    pub measurements: MeasurementSet,
    pub plan: AttackPlan,
}

impl AttackedScenario {
    /// A scenario with no attacker.
    pub fn clean(swarm: Swarm, measurements: MeasurementSet) -> Self {
        let seed = swarm.seed;
        AttackedScenario {
            swarm,
            measurements,
            plan: AttackPlan::none(seed),
        }
    }

    pub fn n(&self) -> usize {
        self.swarm.len()
    }

    pub fn comm_range(&self) -> f64 {
        self.swarm.comm_range
    }

    pub fn truth(&self) -> &BTreeSet<usize> {
        &self.plan.malicious_ids
    }

    pub fn validate(&self) -> Result<()> {
        self.swarm.validate()?;
        if self.measurements.n() != self.swarm.len() {
            return Err(Error::DimensionMismatch(self.measurements.n(), self.swarm.len()));
        }
        self.plan.validate(self.swarm.len())
    }
}

/// `m` distinct ids drawn uniformly. For a fixed seed the draws for increasing `m`
/// are nested, which keeps attacker-count sweeps on common random numbers.
pub fn select_malicious(swarm: &Swarm, m: usize, seed: u64) -> Result<BTreeSet<usize>> {
    select_malicious_excluding(swarm, m, &BTreeSet::new(), seed)
}

pub fn select_malicious_excluding(
    swarm: &Swarm,
    m: usize,
    exclude: &BTreeSet<usize>,
    seed: u64,
) -> Result<BTreeSet<usize>> {
    let n = swarm.len();
    let mut pool: Vec<usize> = (0..n).filter(|id| !exclude.contains(id)).collect();
    if m >= n || m > pool.len() {
        return Err(Error::InvalidCount { m, n });
    }
    pool.shuffle(&mut rng::stream(seed, purpose::SELECT, &[]));
    Ok(pool.into_iter().take(m).collect())
}

/// The benign UAV with the most honest neighbors (lowest id on ties).
pub fn default_collusion_target(
    swarm: &Swarm,
    honest: &MeasurementSet,
    exclude: &BTreeSet<usize>,
) -> Option<usize> {
    let lists = honest.neighbor_lists();
    (0..swarm.len())
        .filter(|id| !exclude.contains(id) && !swarm.uavs[*id].malicious)
        .max_by_key(|&id| (lists[id].len(), std::cmp::Reverse(id)))
}

fn check_ids(swarm: &Swarm, ids: &BTreeSet<usize>) -> Result<()> {
    if ids.len() >= swarm.len() {
        return Err(Error::InvalidCount {
            m: ids.len(),
            n: swarm.len(),
        });
    }
    ids.iter().try_for_each(|&id| swarm.check_id(id))
}

/// Rewrites every outgoing claim of `m` to be consistent with its current report.
fn fabricate_claims(
    swarm: &Swarm,
    measurements: &mut MeasurementSet,
    m: usize,
    noise: &NoiseParams,
    seed: u64,
) {
    let mut rng = rng::stream(seed, purpose::FABRICATION_NOISE, &[m as u64]);
    let fake = swarm.reported(m);
    let d = swarm.comm_range;
    for j in 0..swarm.len() {
        if j == m {
            continue;
        }
        measurements.remove(m, j);
        let claimed = fake.distance(&swarm.reported(j));
        if claimed <= d {
            let r = noise.noisy_distance(claimed, &mut rng);
            measurements
                .insert(m, j, r)
                .expect("ids in range and distance floored");
        }
    }
}

fn farthest_corner(p: &Position3, h: f64) -> Position3 {
    Position3(p.0.map(|c| if c >= 0.0 { -h } else { h }))
}

fn sample_distributed_fake(swarm: &Swarm, m: usize, min_offset: f64, seed: u64) -> Position3 {
    let h = swarm.cube_half_width;
    let truth = swarm.true_position(m);
    let mut rng = rng::stream(seed, purpose::FAKE_POSITIONS, &[m as u64]);
    for _ in 0..MAX_REJECTION_DRAWS {
        let p = Position3(std::array::from_fn(|_| rng.random_range(-h..=h)));
        if p.distance(&truth) >= min_offset {
            return p;
        }
    }
    farthest_corner(&truth, h)
}

fn sample_collusion_fake(
    swarm: &Swarm,
    m: usize,
    anchor: Position3,
    min_offset: f64,
    seed: u64,
) -> Position3 {
    let h = swarm.cube_half_width;
    let radius = swarm.comm_range * (1.0 - COLLUSION_MARGIN);
    let truth = swarm.true_position(m);
    let mut rng = rng::stream(seed, purpose::FAKE_POSITIONS, &[m as u64, 1]);
    let mut best: Option<(f64, Position3)> = None;
    for _ in 0..MAX_REJECTION_DRAWS {
        let offset = Position3(std::array::from_fn(|_| rng.random_range(-radius..=radius)));
        if offset.norm() >= radius {
            continue;
        }
        let p = anchor + offset;
        if !p.in_cube(h) {
            continue;
        }
        let gap = p.distance(&truth);
        if gap >= min_offset {
            return p;
        }
        if best.is_none_or(|(g, _)| gap > g) {
            best = Some((gap, p));
        }
    }
    best.map(|(_, p)| p)
        .unwrap_or_else(|| Position3(anchor.0.map(|c| c.clamp(-h, h))))
}

/// Each attacker independently reports a uniformly resampled position at least
/// `fake_offset_min` from where it really is, and rewrites its own claims to match.
pub fn apply_distributed(
    swarm: &Swarm,
    measurements: &MeasurementSet,
    malicious_ids: &BTreeSet<usize>,
    fake_offset_min: f64,
    noise: &NoiseParams,
    seed: u64,
) -> Result<AttackedScenario> {
    let plan = AttackPlan {
        kind: AttackKind::Distributed,
        malicious_ids: malicious_ids.clone(),
        fake_offset_min,
        seed,
    };
    plan.validate(swarm.len())?;
    check_ids(swarm, malicious_ids)?;
    noise.validate()?;
    let mut swarm = swarm.clone();
    let mut measurements = measurements.clone();
    for &m in malicious_ids {
        let fake = sample_distributed_fake(&swarm, m, fake_offset_min, seed);
        let u = &mut swarm.uavs[m];
        u.reported_pos = fake;
        u.malicious = true;
    }
    for &m in malicious_ids {
        fabricate_claims(&swarm, &mut measurements, m, noise, seed);
    }
    Ok(AttackedScenario {
        swarm,
        measurements,
        plan,
    })
}

/// Colluders report positions just inside the target's range and back them with
/// consistent distance claims, framing the target.
#[allow(clippy::too_many_arguments)]
pub fn apply_collusion(
    swarm: &Swarm,
    measurements: &MeasurementSet,
    malicious_ids: &BTreeSet<usize>,
    target: usize,
    fake_offset_min: f64,
    noise: &NoiseParams,
    seed: u64,
) -> Result<AttackedScenario> {
    if malicious_ids.is_empty() {
        return Err(invalid("malicious_ids", "collusion needs at least one attacker"));
    }
    let plan = AttackPlan {
        kind: AttackKind::Collusion { target },
        malicious_ids: malicious_ids.clone(),
        fake_offset_min,
        seed,
    };
    plan.validate(swarm.len())?;
    check_ids(swarm, malicious_ids)?;
    if swarm.uavs[target].malicious {
        return Err(Error::TargetNotBenign(target));
    }
    noise.validate()?;
    let mut swarm = swarm.clone();
    let mut measurements = measurements.clone();
    let anchor = swarm.reported(target);
    for &m in malicious_ids {
        let fake = sample_collusion_fake(&swarm, m, anchor, fake_offset_min, seed);
        let u = &mut swarm.uavs[m];
        u.reported_pos = fake;
        u.malicious = true;
    }
    for &m in malicious_ids {
        fabricate_claims(&swarm, &mut measurements, m, noise, seed);
    }
    Ok(AttackedScenario {
        swarm,
        measurements,
        plan,
    })
}

/// Distributed attack on `distributed_ids`, then collusion on `collusion_ids`.
#[allow(clippy::too_many_arguments)]
pub fn apply_mixed(
    swarm: &Swarm,
    measurements: &MeasurementSet,
    distributed_ids: &BTreeSet<usize>,
    collusion_ids: &BTreeSet<usize>,
    target: usize,
    fake_offset_min: f64,
    noise: &NoiseParams,
    seed: u64,
) -> Result<AttackedScenario> {
    if let Some(&id) = distributed_ids.intersection(collusion_ids).next() {
        return Err(Error::OverlappingSets(id));
    }
    if distributed_ids.contains(&target) || collusion_ids.contains(&target) {
        return Err(Error::TargetNotBenign(target));
    }
    let mut scenario = apply_distributed(
        swarm,
        measurements,
        distributed_ids,
        fake_offset_min,
        noise,
        seed,
    )?;
    if !collusion_ids.is_empty() {
        scenario = apply_collusion(
            &scenario.swarm,
            &scenario.measurements,
            collusion_ids,
            target,
            fake_offset_min,
            noise,
            seed,
        )?;
    }
    scenario.plan = AttackPlan {
        kind: AttackKind::Mixed {
            distributed_ids: distributed_ids.clone(),
            collusion_ids: collusion_ids.clone(),
            target,
        },
        malicious_ids: distributed_ids.union(collusion_ids).copied().collect(),
        fake_offset_min,
        seed,
    };
    Ok(scenario)
}

/// Applies a serialized plan.
pub fn apply_plan(
    swarm: &Swarm,
    measurements: &MeasurementSet,
    plan: &AttackPlan,
    noise: &NoiseParams,
) -> Result<AttackedScenario> {
    plan.validate(swarm.len())?;
    match &plan.kind {
        AttackKind::Distributed => apply_distributed(
            swarm,
            measurements,
            &plan.malicious_ids,
            plan.fake_offset_min,
            noise,
            plan.seed,
        ),
        AttackKind::Collusion { target } => apply_collusion(
            swarm,
            measurements,
            &plan.malicious_ids,
            *target,
            plan.fake_offset_min,
            noise,
            plan.seed,
        ),
        AttackKind::Mixed {
            distributed_ids,
            collusion_ids,
            target,
        } => apply_mixed(
            swarm,
            measurements,
            distributed_ids,
            collusion_ids,
            *target,
            plan.fake_offset_min,
            noise,
            plan.seed,
        ),
    }
}

/// Splits `ids` evenly: the first half (ascending) attacks independently, the rest collude.
pub fn even_split(ids: &BTreeSet<usize>) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let k = ids.len() / 2;
    let distributed = ids.iter().take(k).copied().collect();
    let collusion = ids.iter().skip(k).copied().collect();
    (distributed, collusion)
}

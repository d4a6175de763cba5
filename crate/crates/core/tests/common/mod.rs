//! Shared test-side oracles and instance generators.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spoofguard::attack::AttackedScenario;
use spoofguard::detect::DetectionResult;
use spoofguard::sdr::{assemble, FeasibilityOracle, FeasibilityProblem, FeasibilityStatus, OracleResult, ProblemParams};
use spoofguard::suspect::SuspectSets;
use spoofguard::swarm::{MeasurementSet, Position3, Swarm, Uav};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn sq(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// One scalar requirement on a single unknown position: `lo ≤ ‖x − a‖² ≤ hi`.
#[derive(Clone, Copy, Debug)]
struct Shell {
    a: [f64; 3],
    lo: f64,
    hi: f64,
}

impl Shell {
    fn violation(&self, x: [f64; 3]) -> f64 {
        let s = sq(sub(x, self.a));
        (self.lo - s).max(s - self.hi).max(0.0)
    }
}

/// Per-node requirements of the unrelaxed problem. The constraints never couple two
/// unknowns, so each node can be solved on its own.
fn shells(problem: &FeasibilityProblem, id: usize) -> Vec<Shell> {
    let d2 = problem.comm_range * problem.comm_range;
    let delta = problem.strictness_margin;
    let tau = problem.pair_tolerance;
    let mut out = vec![Shell {
        a: problem.reported_positions[&id].0,
        lo: f64::NEG_INFINITY,
        hi: problem.epsilon,
    }];
    for c in problem.constraint_pairs.iter().filter(|c| c.i == id) {
        let r2 = c.r_hat * c.r_hat;
        out.push(Shell {
            a: problem.reported_positions[&c.j].0,
            lo: r2 - tau + delta,
            hi: (d2 - delta).min(r2 + tau - delta),
        });
    }
    out
}

fn total(shells: &[Shell], x: [f64; 3]) -> f64 {
    shells.iter().map(|s| s.violation(x).powi(2)).sum()
}

fn worst(shells: &[Shell], x: [f64; 3]) -> f64 {
    shells.iter().map(|s| s.violation(x)).fold(0.0, f64::max)
}

/// Gradient descent with backtracking on the summed squared violations.
fn refine(shells: &[Shell], mut x: [f64; 3]) -> [f64; 3] {
    let mut f = total(shells, x);
    let mut step = 1.0;
    for _ in 0..4000 {
        if f == 0.0 {
            break;
        }
        let mut g = [0.0; 3];
        for s in shells {
            let diff = sub(x, s.a);
            let r = sq(diff);
            let coef = if r > s.hi {
                2.0 * (r - s.hi)
            } else if r < s.lo {
                -2.0 * (s.lo - r)
            } else {
                0.0
            };
            for k in 0..3 {
                g[k] += coef * 2.0 * diff[k];
            }
        }
        let gn = sq(g);
        if gn == 0.0 {
            break;
        }
        loop {
            let cand = [x[0] - step * g[0], x[1] - step * g[1], x[2] - step * g[2]];
            let fc = total(shells, cand);
            if fc < f {
                x = cand;
                f = fc;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                return x;
            }
        }
    }
    x
}

/// Brute force on the unrelaxed constraints: a dense grid at `grid_step` over each
/// node's ε-box, every grid point refined by local least squares. Returns the
/// satisfying positions, or `None` if some node has none.
pub fn brute_force(problem: &FeasibilityProblem, grid_step: f64) -> Option<Vec<Position3>> {
    let r = problem.epsilon.sqrt();
    let cells = (2.0 * r / grid_step).ceil() as i64;
    let mut found = Vec::new();
    for &id in &problem.node_order {
        let sh = shells(problem, id);
        let c = problem.reported_positions[&id].0;
        let mut best: Option<[f64; 3]> = None;
        'grid: for a in 0..=cells {
            for b in 0..=cells {
                for e in 0..=cells {
                    let off = |t: i64| -r + 2.0 * r * t as f64 / cells.max(1) as f64;
                    let x = [c[0] + off(a), c[1] + off(b), c[2] + off(e)];
                    let x = refine(&sh, x);
                    if worst(&sh, x) == 0.0 {
                        best = Some(x);
                        break 'grid;
                    }
                }
            }
        }
        found.push(Position3(best?));
    }
    Some(found)
}

/// Verdicts drawn from a hash of the sub-network, so they are arbitrary but repeatable.
pub struct HashOracle {
    pub salt: u64,
    /// Probability of `Feasible`, in 1/256 steps.
    pub feasible_256: u8,
}

impl FeasibilityOracle for HashOracle {
    fn check(&self, problem: &FeasibilityProblem) -> spoofguard::Result<OracleResult> {
        let mut h = DefaultHasher::new();
        (self.salt, &problem.node_order).hash(&mut h);
        let v = h.finish();
        let status = match (v & 0xff) as u8 {
            b if b < self.feasible_256 => FeasibilityStatus::Feasible,
            _ if v & 0x100 == 0 => FeasibilityStatus::Unknown,
            _ => FeasibilityStatus::Infeasible,
        };
        Ok(OracleResult {
            status,
            phase1_slack: 0.0,
            upper_bound: 0.0,
            lower_bound: None,
            iterations: 0,
            max_residual: 0.0,
            recovered_positions: None,
            rank_gap: None,
        })
    }
}

/// A random swarm in the unit cube with exact or arbitrary measurements and some
/// reports moved. The measurement set need not be physically realizable.
pub fn random_scenario(seed: u64, n: usize, d: f64) -> AttackedScenario {
    let mut r = rng(seed);
    let uavs: Vec<Uav> = (0..n)
        .map(|id| {
            let p = Position3(std::array::from_fn(|_| r.random_range(-0.5..=0.5)));
            Uav {
                id,
                true_pos: p,
                reported_pos: p,
                malicious: false,
            }
        })
        .collect();
    let mut swarm = Swarm {
        uavs,
        comm_range: d,
        cube_half_width: 0.5,
        seed,
    };
    let mut e_n = MeasurementSet::empty(n);
    for i in 0..n {
        for j in 0..n {
            let dist = swarm.uavs[i].true_pos.distance(&swarm.uavs[j].true_pos);
            if i != j && dist <= d && r.random_bool(0.9) {
                e_n.insert(i, j, dist.max(1e-6)).unwrap();
            }
        }
    }
    for u in swarm.uavs.iter_mut().skip(1) {
        if r.random_bool(0.25) {
            u.malicious = true;
            u.reported_pos = Position3(std::array::from_fn(|_| r.random_range(-0.5..=0.5)));
        }
    }
    let mut s = AttackedScenario::clean(swarm, e_n);
    s.plan.malicious_ids = s.swarm.malicious_ids();
    s
}

/// Replays a detection trace from `initial`, checking that every step keeps the
/// partition valid, only ever moves suspects to the trusted side, and ends at the
/// reported result.
pub fn replay_trace(initial: &SuspectSets, n: usize, result: &DetectionResult) -> Result<(), String> {
    let mut sets = initial.clone();
    for (step, t) in result.per_iteration_trace.iter().enumerate() {
        for &id in &t.exonerated {
            if !sets.suspected.contains(&id) {
                return Err(format!("step {step}: {id} cleared but not suspected"));
            }
            sets.exonerate(id);
        }
        if !sets.is_partition_of(n) {
            return Err(format!("step {step}: partition broken"));
        }
    }
    if sets.suspected != result.predicted_malicious {
        return Err("trace does not end at the reported result".into());
    }
    Ok(())
}

pub fn set(ids: &[usize]) -> BTreeSet<usize> {
    ids.iter().copied().collect()
}

pub fn distinct<T: Hash + Eq>(xs: impl IntoIterator<Item = T>) -> usize {
    xs.into_iter().collect::<HashSet<_>>().len()
}

/// A tight cluster of `n` UAVs with exact ranges, then up to two reports pushed by
/// a random offset of up to `max_offset`. Small offsets stay consistent, larger ones
/// break the squared-distance tolerance, so the set mixes both verdicts.
pub fn small_instance(seed: u64, n: usize, max_offset: f64) -> FeasibilityProblem {
    let mut r = rng(seed);
    let centre: [f64; 3] = std::array::from_fn(|_| r.random_range(-0.3..0.3));
    let uavs: Vec<Uav> = (0..n)
        .map(|id| {
            let p = Position3(std::array::from_fn(|a| centre[a] + r.random_range(-0.08..0.08)));
            Uav {
                id,
                true_pos: p,
                reported_pos: p,
                malicious: false,
            }
        })
        .collect();
    let mut swarm = Swarm {
        uavs,
        comm_range: 0.3,
        cube_half_width: 0.5,
        seed,
    };
    let mut e_n = MeasurementSet::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && r.random_bool(0.85) {
                let dist = swarm.uavs[i].true_pos.distance(&swarm.uavs[j].true_pos);
                e_n.insert(i, j, dist).unwrap();
            }
        }
    }
    let moved = r.random_range(0..=2usize);
    for u in swarm.uavs.iter_mut().take(moved) {
        let dir: [f64; 3] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        let off = r.random_range(0.0..=max_offset);
        u.reported_pos = Position3(std::array::from_fn(|a| u.true_pos.0[a] + off * dir[a] / norm));
        u.malicious = true;
    }
    let scenario = AttackedScenario::clean(swarm, e_n);
    let ids: BTreeSet<usize> = (0..n).collect();
    assemble(&ids, &scenario, &ProblemParams::default()).unwrap()
}

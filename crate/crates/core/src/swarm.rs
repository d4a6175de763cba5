//! Swarm geometry, position/distance corruption and the measurement graph.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Sub};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, purpose};

/// Floor applied to every stored distance so that an entry always means `r̂ > 0`.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Default geometry and noise.
pub const DEFAULT_CUBE_HALF_WIDTH: f64 = 0.5;
pub const DEFAULT_COMM_RANGE: f64 = 0.3;
pub const DEFAULT_POSITION_VARIANCE: f64 = 1e-6;
pub const DEFAULT_DISTANCE_VARIANCE: f64 = 1e-6;

/// A point in the swarm's unitless cube coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position3(pub [f64; 3]);

impl Position3 {
    pub const ORIGIN: Position3 = Position3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position3([x, y, z])
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        (*self - *other).norm()
    }

    pub fn distance_squared(&self, other: &Position3) -> f64 {
        (*self - *other).norm_squared()
    }

    pub fn dot(&self, other: &Position3) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, k: f64) -> Position3 {
        Position3(self.0.map(|c| c * k))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn in_cube(&self, half_width: f64) -> bool {
        self.0.iter().all(|c| c.abs() <= half_width)
    }
}

impl Add for Position3 {
    type Output = Position3;
    fn add(self, rhs: Position3) -> Position3 {
        Position3([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Position3 {
    type Output = Position3;
    fn sub(self, rhs: Position3) -> Position3 {
        Position3([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    pub id: usize,
    pub true_pos: Position3,
    pub reported_pos: Position3,
    #[serde(default)]
    pub malicious: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swarm {
    pub uavs: Vec<Uav>,
    pub comm_range: f64,
    pub cube_half_width: f64,
    pub seed: u64,
}

impl Swarm {
    pub fn len(&self) -> usize {
        self.uavs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uavs.is_empty()
    }

    pub fn reported(&self, id: usize) -> Position3 {
        self.uavs[id].reported_pos
    }

    pub fn true_position(&self, id: usize) -> Position3 {
        self.uavs[id].true_pos
    }

    pub fn malicious_ids(&self) -> BTreeSet<usize> {
        self.uavs.iter().filter(|u| u.malicious).map(|u| u.id).collect()
    }

    pub fn check_id(&self, id: usize) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::IdOutOfRange { id, n: self.len() })
        }
    }

    /// Checks the structural invariants (contiguous ids, N ≥ 2, finite coordinates, d > 0).
    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(invalid("n", format!("need at least 2 uavs, got {}", self.len())));
        }
        if !(self.comm_range > 0.0) {
            return Err(invalid("comm_range", "must be positive"));
        }
        if !(self.cube_half_width > 0.0) {
            return Err(invalid("cube_half_width", "must be positive"));
        }
        for (k, u) in self.uavs.iter().enumerate() {
            if u.id != k {
                return Err(invalid("uavs", format!("id {} at index {k}", u.id)));
            }
            if !u.true_pos.is_finite() || !u.reported_pos.is_finite() {
                return Err(invalid("uavs", format!("non-finite coordinates on uav {k}")));
            }
        }
        Ok(())
    }
}

/// Per-axis position noise variance and per-pair distance noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub pos_var: f64,
    pub dist_var: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            pos_var: DEFAULT_POSITION_VARIANCE,
            dist_var: DEFAULT_DISTANCE_VARIANCE,
        }
    }
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        pos_var: 0.0,
        dist_var: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.pos_var >= 0.0 && self.pos_var.is_finite()) {
            return Err(invalid("pos_var", "must be a nonnegative finite real"));
        }
        if !(self.dist_var >= 0.0 && self.dist_var.is_finite()) {
            return Err(invalid("dist_var", "must be a nonnegative finite real"));
        }
        Ok(())
    }

    /// Adds one distance-noise draw to `distance` and applies the floor.
    pub(crate) fn noisy_distance<R: Rng>(&self, distance: f64, rng: &mut R) -> f64 {
        let noise = if self.dist_var > 0.0 {
            Normal::new(0.0, self.dist_var.sqrt())
                .expect("validated variance")
                .sample(rng)
        } else {
            0.0
        };
        (distance + noise).max(DISTANCE_FLOOR)
    }
}

/// Directed distance reports `r̂_ij`; an entry exists iff `ρ_ij = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MeasurementDoc", try_from = "MeasurementDoc")]
pub struct MeasurementSet {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

/// JSON form: `{"n": N, "entries": [[i, j, r], ...]}`.
#[derive(Serialize, Deserialize)]
struct MeasurementDoc {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl From<MeasurementSet> for MeasurementDoc {
    fn from(m: MeasurementSet) -> Self {
        MeasurementDoc {
            n: m.n,
            entries: m.entries.into_iter().map(|((i, j), r)| (i, j, r)).collect(),
        }
    }
}

impl TryFrom<MeasurementDoc> for MeasurementSet {
    type Error = Error;

    fn try_from(doc: MeasurementDoc) -> Result<Self> {
        let mut set = MeasurementSet::empty(doc.n);
        for (i, j, r) in doc.entries {
            set.insert(i, j, r)?;
        }
        Ok(set)
    }
}

impl MeasurementSet {
    pub fn empty(n: usize) -> Self {
        MeasurementSet {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&(i, j)).copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.contains_key(&(i, j))
    }

    /// Inserts or replaces `r̂_ij`. Rejects self-pairs, bad ids and non-positive distances.
    pub fn insert(&mut self, i: usize, j: usize, r: f64) -> Result<()> {
        for id in [i, j] {
            if id >= self.n {
                return Err(Error::IdOutOfRange { id, n: self.n });
            }
        }
        if i == j {
            return Err(invalid("entries", format!("self-measurement on uav {i}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("entries", format!("r[{i},{j}] = {r} must be positive")));
        }
        self.entries.insert((i, j), r);
        Ok(())
    }

    pub fn remove(&mut self, i: usize, j: usize) -> Option<f64> {
        self.entries.remove(&(i, j))
    }

    /// Iterates `(i, j, r̂_ij)` in ascending `(i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &r)| (i, j, r))
    }

    /// Entries whose first index is `i`.
    pub fn outgoing(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries
            .range((i, 0)..(i + 1, 0))
            .map(|(&(_, j), &r)| (j, r))
    }

    pub fn adjacency(&self, i: usize, j: usize) -> bool {
        self.contains(i, j)
    }

    /// Symmetrized neighbor lists for every id.
    pub fn neighbor_lists(&self) -> Vec<BTreeSet<usize>> {
        let mut lists = vec![BTreeSet::new(); self.n];
        for &(i, j) in self.entries.keys() {
            lists[i].insert(j);
            lists[j].insert(i);
        }
        lists
    }
}

/// One-hop neighbors of `k`: every `j` with an entry `(k, j)` or `(j, k)`.
pub fn neighbor_set(measurements: &MeasurementSet, k: usize) -> Result<BTreeSet<usize>> {
    if k >= measurements.n() {
        return Err(Error::IdOutOfRange {
            id: k,
            n: measurements.n(),
        });
    }
    Ok(measurements
        .iter()
        .filter_map(|(i, j, _)| {
            if i == k {
                Some(j)
            } else if j == k {
                Some(i)
            } else {
                None
            }
        })
        .collect())
}

/// Uniform i.i.d. positions in `[-h, h]³`; reports equal truth; nobody malicious.
pub fn generate_swarm(n: usize, cube_half_width: f64, comm_range: f64, seed: u64) -> Result<Swarm> {
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 uavs, got {n}")));
    }
    if !(cube_half_width > 0.0 && cube_half_width.is_finite()) {
        return Err(invalid("cube_half_width", "must be positive"));
    }
    if !(comm_range > 0.0 && comm_range.is_finite()) {
        return Err(invalid("comm_range", "must be positive"));
    }
    let mut rng = rng::stream(seed, purpose::GEOMETRY, &[]);
    let uavs = (0..n)
        .map(|id| {
            let p = Position3(std::array::from_fn(|_| {
                rng.random_range(-cube_half_width..=cube_half_width)
            }));
            Uav {
                id,
                true_pos: p,
                reported_pos: p,
                malicious: false,
            }
        })
        .collect();
    Ok(Swarm {
        uavs,
        comm_range,
        cube_half_width,
        seed,
    })
}

/// `x̂_i = x_i + w_i` for every benign UAV; malicious reports are left alone.
pub fn apply_position_noise(swarm: &Swarm, params: &NoiseParams, seed: u64) -> Result<Swarm> {
    swarm.validate()?;
    params.validate()?;
    let mut out = swarm.clone();
    if params.pos_var == 0.0 {
        for u in out.uavs.iter_mut().filter(|u| !u.malicious) {
            u.reported_pos = u.true_pos;
        }
        return Ok(out);
    }
    let normal = Normal::new(0.0, params.pos_var.sqrt()).expect("validated variance");
    let mut rng = rng::stream(seed, purpose::POSITION_NOISE, &[]);
    for u in out.uavs.iter_mut() {
        // draw for every uav so the stream does not depend on who is malicious
        let w = Position3(std::array::from_fn(|_| normal.sample(&mut rng)));
        if !u.malicious {
            u.reported_pos = u.true_pos + w;
        }
    }
    Ok(out)
}

/// Honest ranging: `r̂_ij = ‖x_i − x_j‖ + w_ij` for every ordered pair within range of the
/// true geometry, with independent draws per direction.
pub fn measure_distances(swarm: &Swarm, params: &NoiseParams, seed: u64) -> Result<MeasurementSet> {
    swarm.validate()?;
    params.validate()?;
    let n = swarm.len();
    let d = swarm.comm_range;
    let mut rng = rng::stream(seed, purpose::DISTANCE_NOISE, &[]);
    let mut set = MeasurementSet::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = swarm.uavs[i].true_pos.distance(&swarm.uavs[j].true_pos);
            if dist <= d {
                let r = params.noisy_distance(dist, &mut rng);
                set.entries.insert((i, j), r);
            }
        }
    }
    Ok(set)
}

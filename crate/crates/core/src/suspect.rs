//! Initial partition of the swarm into suspected and trusted UAVs.
//!
//! Two sparse matrices are compared entry by entry: `E_r`, distances implied by the
//! reported positions, and `E_n`, the reported range measurements. A directed pair
//! is violating when it is claimed in one direction only, or when the squared
//! distances disagree by at least the pair tolerance (default `(d/2)²`).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attack::AttackedScenario;
use crate::error::{Error, Result};
use crate::swarm::MeasurementSet;

/// Default right-hand side of the distance-consistency test, `(d/2)²`.
pub fn default_pair_tolerance(comm_range: f64) -> f64 {
    (comm_range / 2.0).powi(2)
}

/// `E_r`: `‖x̂_i − x̂_j‖` for every directed pair present in the measurement adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedDistanceMatrix {
    pub n: usize,
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl ReportedDistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&(i, j)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuspectSets {
    pub suspected: BTreeSet<usize>,
    pub trusted: BTreeSet<usize>,
}

impl SuspectSets {
    /// Everyone trusted except `suspected`.
    pub fn from_suspected(n: usize, suspected: BTreeSet<usize>) -> Self {
        let trusted = (0..n).filter(|id| !suspected.contains(id)).collect();
        SuspectSets { suspected, trusted }
    }

    pub fn n(&self) -> usize {
        self.suspected.len() + self.trusted.len()
    }

    /// Moves `id` from suspected to trusted; a no-op if it is already trusted.
    pub fn exonerate(&mut self, id: usize) -> bool {
        if self.suspected.remove(&id) {
            self.trusted.insert(id);
            true
        } else {
            false
        }
    }

    /// Partition check: disjoint and covering `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        self.suspected.is_disjoint(&self.trusted)
            && self.n() == n
            && self.suspected.iter().chain(&self.trusted).all(|&id| id < n)
    }
}

/// Why a directed pair was flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    /// `(i, j)` is claimed but `(j, i)` is not, or one matrix lacks the entry.
    OneSided,
    /// `|r̂_ij² − e_r(i,j)²| ≥ tolerance`.
    Inconsistent,
}

pub fn build_reported_matrix(scenario: &AttackedScenario) -> ReportedDistanceMatrix {
    let swarm = &scenario.swarm;
    ReportedDistanceMatrix {
        n: swarm.len(),
        entries: scenario
            .measurements
            .iter()
            .map(|(i, j, _)| ((i, j), swarm.reported(i).distance(&swarm.reported(j))))
            .collect(),
    }
}

/// Every violating directed pair, in ascending `(i, j)` order.
pub fn violating_pairs(
    e_r: &ReportedDistanceMatrix,
    e_n: &MeasurementSet,
    tolerance: f64,
) -> Result<Vec<(usize, usize, Violation)>> {
    if e_r.n != e_n.n() {
        return Err(Error::DimensionMismatch(e_r.n, e_n.n()));
    }
    let keys: BTreeSet<(usize, usize)> = e_r
        .entries
        .keys()
        .copied()
        .chain(e_n.iter().map(|(i, j, _)| (i, j)))
        .collect();
    let mut out = Vec::new();
    for (i, j) in keys {
        let reverse = e_n.contains(j, i) && e_r.entries.contains_key(&(j, i));
        let verdict = match (e_n.get(i, j), e_r.get(i, j)) {
            (Some(r), Some(e)) if reverse => {
                ((r * r - e * e).abs() >= tolerance).then_some(Violation::Inconsistent)
            }
            (Some(r), Some(e)) if (r * r - e * e).abs() >= tolerance => Some(Violation::Inconsistent),
            _ => Some(Violation::OneSided),
        };
        if let Some(v) = verdict {
            out.push((i, j, v));
        }
    }
    Ok(out)
}

/// Both endpoints of every violating pair are suspected; everyone else is trusted.
pub fn initial_suspects(e_r: &ReportedDistanceMatrix, e_n: &MeasurementSet, d: f64) -> Result<SuspectSets> {
    initial_suspects_with_tolerance(e_r, e_n, default_pair_tolerance(d))
}

pub fn initial_suspects_with_tolerance(
    e_r: &ReportedDistanceMatrix,
    e_n: &MeasurementSet,
    tolerance: f64,
) -> Result<SuspectSets> {
    let suspected = violating_pairs(e_r, e_n, tolerance)?
        .into_iter()
        .flat_map(|(i, j, _)| [i, j])
        .collect();
    Ok(SuspectSets::from_suspected(e_r.n, suspected))
}

/// Number of violating pairs each id takes part in.
pub fn incrimination_counts(violations: &[(usize, usize, Violation)], n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    for &(i, j, _) in violations {
        counts[i] += 1;
        counts[j] += 1;
    }
    counts
}

/// For every UAV, the ids whose evidence points at it. An inconsistent measurement
/// `(i, j)` is evidence against `j`; an unreciprocated but consistent claim `(i, j)` is
/// evidence against `i`. Each accuser is tagged with the kind of evidence.
pub fn accusers(violations: &[(usize, usize, Violation)], n: usize) -> Vec<BTreeMap<usize, Violation>> {
    let mut out = vec![BTreeMap::new(); n];
    for &(i, j, v) in violations {
        match v {
            Violation::Inconsistent => out[j].insert(i, v),
            Violation::OneSided => out[i].insert(j, v),
        };
    }
    out
}

//! Iterative exoneration (CDI, E-CDI) and the two sampling baselines.
//!
//! Both proposed detectors start from the initial partition and repeatedly ask the
//! feasibility oracle whether a candidate, joined to the trusted set, still admits a
//! consistent embedding. A few rules fill gaps in the published pseudo-code:
//!
//! - The initial comparison tells us who accuses whom. An inconsistent measurement
//!   `(i, j)` points at `j`; a consistent claim `(i, j)` that `j` never reciprocates
//!   points at `i`. The relaxation only has constraints for measured pairs inside the
//!   tested sub-network, so a verdict is blind to an accuser left outside it and to
//!   unreciprocated claims. Nobody is cleared while such evidence stands against them,
//!   unless the accusation is mutual.
//! - An individual test of a UAV with no trusted neighbor would be vacuous; it is run
//!   together with the suspected neighbors the UAV does not accuse, or skipped.
//! - E-CDI runs CDI to its fixpoint first, then the individual passes. Its result is
//!   therefore always a subset of CDI's.
//! - E-CDI visits suspects, and the members of a failed neighborhood, in ascending
//!   order of how many violating pairs they are part of.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::AttackedScenario;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use crate::sdr::{assemble, FeasibilityOracle, FeasibilityStatus, OracleOptions, ProblemParams, SdrOracle};
use crate::suspect::{
    accusers, build_reported_matrix, default_pair_tolerance, incrimination_counts, violating_pairs, Violation,
    ReportedDistanceMatrix, SuspectSets,
};
use crate::swarm::MeasurementSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cdi,
    Ecdi,
    Nlos,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Cdi, Algorithm::Ecdi, Algorithm::Nlos, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cdi => "cdi",
            Algorithm::Ecdi => "ecdi",
            Algorithm::Nlos => "nlos",
            Algorithm::Random => "random",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| crate::error::invalid("algorithm", format!("unknown algorithm {s:?}")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What to do when the oracle can neither certify nor refute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    /// Keep the candidate suspected.
    #[default]
    Infeasible,
    /// Re-solve once with a four times larger iteration budget, then keep suspected.
    Retry,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorOptions {
    pub oracle: OracleOptions,
    pub problem: ProblemParams,
    pub unknown: UnknownPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// The trusted set on its own, before the main loop.
    TrustedSet,
    /// `𝔹 ∪ {k} ∪ 𝕎_k`.
    Neighborhood,
    /// `𝔹 ∪ {π}`.
    Individual,
    /// `{π} ∪ (𝕎_π ∩ 𝔹)`, used when the trusted set is itself infeasible.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub assessed: Option<usize>,
    pub test: TestKind,
    pub subnet_size: usize,
    /// `None` when the test would have been vacuous and was skipped.
    pub status: Option<FeasibilityStatus>,
    pub exonerated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub algorithm: Algorithm,
    pub predicted_malicious: BTreeSet<usize>,
    /// Full passes over the suspected set, including the final one without change.
    pub iterations: usize,
    pub oracle_calls: usize,
    pub unknown_verdicts: usize,
    /// Set when the initial trusted set failed its own check and the local fallback ran.
    pub trusted_set_infeasible: bool,
    pub per_iteration_trace: Vec<TraceEntry>,
}

impl DetectionResult {
    fn baseline(algorithm: Algorithm, predicted: BTreeSet<usize>) -> Self {
        DetectionResult {
            algorithm,
            predicted_malicious: predicted,
            iterations: 0,
            oracle_calls: 0,
            unknown_verdicts: 0,
            trusted_set_infeasible: false,
            per_iteration_trace: Vec::new(),
        }
    }
}

/// Shared state for detection runs on one scenario. Verdicts are memoised by
/// sub-network, so running CDI and then E-CDI on the same detector re-uses the
/// first run's solves; each run still reports its own logical call count.
pub struct Detector<'a, O: FeasibilityOracle> {
    scenario: &'a AttackedScenario,
    oracle: &'a O,
    opts: DetectorOptions,
    neighbors: Vec<BTreeSet<usize>>,
    counts: Vec<usize>,
    accusers: Vec<BTreeMap<usize, Violation>>,
    memo: HashMap<Vec<usize>, FeasibilityStatus>,
}

/// Per-run bookkeeping.
struct Run {
    sets: SuspectSets,
    trace: Vec<TraceEntry>,
    seen: BTreeSet<Vec<usize>>,
    calls: usize,
    unknown: usize,
    passes: usize,
}

impl Run {
    fn new(sets: SuspectSets) -> Self {
        Run {
            sets,
            trace: Vec::new(),
            seen: BTreeSet::new(),
            calls: 0,
            unknown: 0,
            passes: 0,
        }
    }

    fn finish(self, algorithm: Algorithm, fallback: bool) -> DetectionResult {
        DetectionResult {
            algorithm,
            predicted_malicious: self.sets.suspected,
            iterations: self.passes,
            oracle_calls: self.calls,
            unknown_verdicts: self.unknown,
            trusted_set_infeasible: fallback,
            per_iteration_trace: self.trace,
        }
    }
}

impl<'a, O: FeasibilityOracle> Detector<'a, O> {
    pub fn new(scenario: &'a AttackedScenario, oracle: &'a O, opts: DetectorOptions) -> Result<Self> {
        scenario.validate()?;
        let n = scenario.n();
        let tolerance = opts
            .problem
            .pair_tolerance
            .unwrap_or_else(|| default_pair_tolerance(scenario.comm_range()));
        let violations = violating_pairs(&build_reported_matrix(scenario), &scenario.measurements, tolerance)?;
        Ok(Detector {
            scenario,
            oracle,
            opts,
            neighbors: scenario.measurements.neighbor_lists(),
            counts: incrimination_counts(&violations, n),
            accusers: accusers(&violations, n),
            memo: HashMap::new(),
        })
    }

    fn check_initial(&self, initial: &SuspectSets) -> Result<()> {
        if initial.is_partition_of(self.scenario.n()) {
            Ok(())
        } else {
            Err(crate::error::invalid("initial", "suspected/trusted must partition the swarm"))
        }
    }

    /// Oracle verdict for `subnet`, memoised.
    fn test(&mut self, run: &mut Run, subnet: &BTreeSet<usize>) -> Result<FeasibilityStatus> {
        let key: Vec<usize> = subnet.iter().copied().collect();
        if run.seen.insert(key.clone()) {
            run.calls += 1;
        }
        let status = match self.memo.get(&key) {
            Some(&s) => s,
            None => {
                let problem = assemble(subnet, self.scenario, &self.opts.problem)?;
                let mut status = self.oracle.check(&problem)?.status;
                if status == FeasibilityStatus::Unknown && self.opts.unknown == UnknownPolicy::Retry {
                    let retry = SdrOracle::new(OracleOptions {
                        max_iterations: self.opts.oracle.max_iterations * 4,
                        ..self.opts.oracle
                    });
                    status = retry.check(&problem)?.status;
                }
                self.memo.insert(key, status);
                status
            }
        };
        if status == FeasibilityStatus::Unknown {
            run.unknown += 1;
        }
        Ok(status)
    }

    /// Tests only when `connected`; `None` in the trace means no call was made.
    fn test_if(&mut self, run: &mut Run, connected: bool, subnet: &BTreeSet<usize>) -> Result<Option<FeasibilityStatus>> {
        if connected {
            self.test(run, subnet).map(Some)
        } else {
            Ok(None)
        }
    }

    fn record(
        &self,
        run: &mut Run,
        assessed: Option<usize>,
        test: TestKind,
        size: usize,
        status: Option<FeasibilityStatus>,
        moved: Vec<usize>,
    ) {
        run.trace.push(TraceEntry {
            assessed,
            test,
            subnet_size: size,
            status,
            exonerated: moved,
        });
    }

    fn touches_trusted(&self, id: usize, trusted: &BTreeSet<usize>) -> bool {
        self.neighbors[id].iter().any(|j| trusted.contains(j))
    }

    /// `false` means the initial trusted set is itself infeasible.
    fn trusted_set_ok(&mut self, run: &mut Run) -> Result<bool> {
        if run.sets.trusted.is_empty() {
            return Ok(true);
        }
        let b = run.sets.trusted.clone();
        let status = self.test(run, &b)?;
        self.record(run, None, TestKind::TrustedSet, b.len(), Some(status), Vec::new());
        Ok(status == FeasibilityStatus::Feasible)
    }

    /// Neighborhood test for `k`; returns the ids cleared. A feasible verdict clears `k`
    /// and its suspected neighbors, except those the verdict cannot speak for.
    fn neighborhood_step(&mut self, run: &mut Run, k: usize) -> Result<Vec<usize>> {
        let mut subnet = run.sets.trusted.clone();
        subnet.insert(k);
        subnet.extend(self.neighbors[k].iter().copied());
        let group: Vec<usize> = std::iter::once(k)
            .chain(self.neighbors[k].iter().copied())
            .filter(|id| run.sets.suspected.contains(id))
            .collect();
        let status = self.test(run, &subnet)?;
        let moved: Vec<usize> = if status == FeasibilityStatus::Feasible {
            group
                .into_iter()
                .filter(|&v| {
                    if v == k {
                        !self.unseen_evidence(v)
                    } else {
                        !self.held_back(run, v)
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        for &v in &moved {
            run.sets.exonerate(v);
        }
        self.record(run, Some(k), TestKind::Neighborhood, subnet.len(), Some(status), moved.clone());
        Ok(moved)
    }

    /// Individual test for `pi`; returns whether it was cleared. A `pi` with no trusted
    /// neighbor would be unconstrained against `B` alone, so it is tested together with
    /// the suspected neighbors it does not accuse; that only adds constraints.
    fn individual_step(&mut self, run: &mut Run, pi: usize, test: TestKind) -> Result<bool> {
        let trusted = run.sets.trusted.clone();
        let mut connected = self.touches_trusted(pi, &trusted);
        let subnet: BTreeSet<usize> = match test {
            TestKind::Local => self.neighbors[pi]
                .iter()
                .filter(|j| trusted.contains(j))
                .copied()
                .chain(std::iter::once(pi))
                .collect(),
            _ if connected => trusted.iter().copied().chain(std::iter::once(pi)).collect(),
            _ => {
                let partners: Vec<usize> = self.neighbors[pi]
                    .iter()
                    .copied()
                    .filter(|&j| !self.accusers[j].contains_key(&pi))
                    .collect();
                // With nothing to test against, the plain `B ∪ {pi}` test is vacuous;
                // it is only allowed when no evidence points at `pi`.
                connected = !partners.is_empty() || self.accusers[pi].is_empty();
                trusted.iter().copied().chain(std::iter::once(pi)).chain(partners).collect()
            }
        };
        let status = self.test_if(run, connected, &subnet)?;
        let ok = status == Some(FeasibilityStatus::Feasible);
        if ok {
            run.sets.exonerate(pi);
        }
        self.record(run, Some(pi), test, subnet.len(), status, if ok { vec![pi] } else { Vec::new() });
        Ok(ok)
    }

    /// Circular sweep over the suspects in ascending `key` order; stops after a full
    /// pass without change.
    fn circular<F>(&mut self, run: &mut Run, key: fn(&Self, usize) -> (usize, usize), mut step: F) -> Result<()>
    where
        F: FnMut(&mut Self, &mut Run, usize) -> Result<bool>,
    {
        let mut cursor: Option<(usize, usize)> = None;
        let mut idle = 0;
        let mut pass_len = run.sets.suspected.len();
        let mut in_pass = 0;
        while idle < run.sets.suspected.len() {
            let keyed = run.sets.suspected.iter().map(|&id| (key(self, id), id));
            let next = cursor
                .and_then(|c| keyed.clone().filter(|(k, _)| *k > c).min())
                .or_else(|| keyed.min());
            let Some((kk, k)) = next else { break };
            cursor = Some(kk);
            if step(self, run, k)? {
                idle = 0;
            } else {
                idle += 1;
            }
            in_pass += 1;
            if in_pass >= pass_len {
                run.passes += 1;
                in_pass = 0;
                pass_len = run.sets.suspected.len().max(1);
            }
        }
        if in_pass > 0 {
            run.passes += 1;
        }
        Ok(())
    }

    /// Fallback when the trusted set fails on its own: every suspect is tested against
    /// its trusted neighbors only.
    fn local_fallback(&mut self, run: &mut Run) -> Result<()> {
        let order = self.by_incrimination(run.sets.suspected.iter().copied());
        for pi in order {
            self.individual_step(run, pi, TestKind::Local)?;
        }
        run.passes += 1;
        Ok(())
    }

    /// Unreciprocated claims against `v` that no feasibility test can see, since the
    /// relaxation only has constraints for measured pairs.
    fn unseen_evidence(&self, v: usize) -> bool {
        self.accusers[v]
            .iter()
            .any(|(&a, &kind)| kind == Violation::OneSided && !self.accusers[a].contains_key(&v))
    }

    /// Whether a test that leaves `v`'s accusers outside the sub-network may clear `v`:
    /// not while a one-sided accuser is still suspected. Mutual accusations do not hold
    /// anyone back.
    fn held_back(&self, run: &Run, v: usize) -> bool {
        self.unseen_evidence(v)
            || self.accusers[v]
                .iter()
                .any(|(&a, _)| run.sets.suspected.contains(&a) && !self.accusers[a].contains_key(&v))
    }

    fn by_incrimination(&self, ids: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut v: Vec<usize> = ids.collect();
        v.sort_by_key(|&id| (self.counts[id], id));
        v
    }

    fn run_cdi(&mut self, run: &mut Run) -> Result<()> {
        self.circular(run, |_, id| (0, id), |det, run, k| Ok(!det.neighborhood_step(run, k)?.is_empty()))
    }

    /// Neighborhood-granularity identification.
    pub fn cdi(&mut self, initial: &SuspectSets) -> Result<DetectionResult> {
        self.check_initial(initial)?;
        let mut run = Run::new(initial.clone());
        if run.sets.suspected.is_empty() {
            return Ok(run.finish(Algorithm::Cdi, false));
        }
        if !self.trusted_set_ok(&mut run)? {
            self.local_fallback(&mut run)?;
            return Ok(run.finish(Algorithm::Cdi, true));
        }
        self.run_cdi(&mut run)?;
        Ok(run.finish(Algorithm::Cdi, false))
    }

    /// CDI followed by individual assessment inside every failed neighborhood.
    pub fn ecdi(&mut self, initial: &SuspectSets) -> Result<DetectionResult> {
        self.check_initial(initial)?;
        let mut run = Run::new(initial.clone());
        if run.sets.suspected.is_empty() {
            return Ok(run.finish(Algorithm::Ecdi, false));
        }
        if !self.trusted_set_ok(&mut run)? {
            self.local_fallback(&mut run)?;
            return Ok(run.finish(Algorithm::Ecdi, true));
        }
        self.run_cdi(&mut run)?;
        self.circular(&mut run, |det, id| (det.counts[id], id), |det, run, k| {
            if !det.neighborhood_step(run, k)?.is_empty() {
                return Ok(true);
            }
            let group = det.by_incrimination(
                std::iter::once(k)
                    .chain(det.neighbors[k].iter().copied())
                    .filter(|id| run.sets.suspected.contains(id)),
            );
            let mut changed = false;
            for pi in group {
                if det.held_back(run, pi) {
                    continue;
                }
                changed |= det.individual_step(run, pi, TestKind::Individual)?;
            }
            Ok(changed)
        })?;
        Ok(run.finish(Algorithm::Ecdi, false))
    }
}

/// CDI with the relaxation oracle.
pub fn cdi(initial: &SuspectSets, scenario: &AttackedScenario, opts: &DetectorOptions) -> Result<DetectionResult> {
    let oracle = SdrOracle::new(opts.oracle);
    Detector::new(scenario, &oracle, *opts)?.cdi(initial)
}

/// E-CDI with the relaxation oracle.
pub fn ecdi(initial: &SuspectSets, scenario: &AttackedScenario, opts: &DetectorOptions) -> Result<DetectionResult> {
    let oracle = SdrOracle::new(opts.oracle);
    Detector::new(scenario, &oracle, *opts)?.ecdi(initial)
}

/// Picks `m` ids from the endpoints of the most inconsistent pairs. Pairs are ranked by
/// `|r̂² − e_r²|`; an id drawn from the pool has weight `1 / rank` of the first pair it
/// appears in.
pub fn nlos_baseline(
    e_r: &ReportedDistanceMatrix,
    e_n: &MeasurementSet,
    m: usize,
    seed: u64,
) -> Result<BTreeSet<usize>> {
    if e_r.n != e_n.n() {
        return Err(Error::DimensionMismatch(e_r.n, e_n.n()));
    }
    let mut ranked: Vec<((usize, usize), f64)> = e_n
        .iter()
        .filter_map(|(i, j, r)| e_r.get(i, j).map(|e| ((i, j), (r * r - e * e).abs())))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut pool: Vec<(usize, f64)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (rank, ((i, j), _)) in ranked.iter().enumerate() {
        for id in [*i, *j] {
            if seen.insert(id) {
                pool.push((id, 1.0 / (rank + 1) as f64));
            }
        }
    }
    if m >= pool.len() {
        return Ok(seen);
    }
    let mut rng = rng::stream(seed, purpose::BASELINE, &[0]);
    let mut picked = BTreeSet::new();
    while picked.len() < m {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        let mut idx = pool.len() - 1;
        for (k, (_, w)) in pool.iter().enumerate() {
            if u < *w {
                idx = k;
                break;
            }
            u -= w;
        }
        picked.insert(pool.remove(idx).0);
    }
    Ok(picked)
}

/// Uniform sample of `min(m, |suspected|)` ids from the initial suspects.
pub fn random_baseline(initial_suspected: &BTreeSet<usize>, m: usize, seed: u64) -> BTreeSet<usize> {
    let mut pool: Vec<usize> = initial_suspected.iter().copied().collect();
    pool.shuffle(&mut rng::stream(seed, purpose::BASELINE, &[1]));
    pool.into_iter().take(m).collect()
}

/// Runs one algorithm on a scenario; baselines receive the true attacker count.
pub fn run_algorithm(
    algorithm: Algorithm,
    scenario: &AttackedScenario,
    initial: &SuspectSets,
    opts: &DetectorOptions,
    seed: u64,
) -> Result<DetectionResult> {
    let m = scenario.truth().len();
    match algorithm {
        Algorithm::Cdi => cdi(initial, scenario, opts),
        Algorithm::Ecdi => ecdi(initial, scenario, opts),
        Algorithm::Nlos => {
            let e_r = build_reported_matrix(scenario);
            let picked = nlos_baseline(&e_r, &scenario.measurements, m, seed)?;
            Ok(DetectionResult::baseline(Algorithm::Nlos, picked))
        }
        Algorithm::Random => Ok(DetectionResult::baseline(
            Algorithm::Random,
            random_baseline(&initial.suspected, m, seed),
        )),
    }
}

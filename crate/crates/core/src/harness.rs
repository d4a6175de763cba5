//! Monte-Carlo sweeps over one parameter at a time, and their CSV output.
//!
//! Every trial index maps to one seed shared by all sweep points, so each point sees
//! the same swarms, noise draws and (nested) attacker choices; only the swept
//! parameter changes. Trials run in parallel and are reduced in a fixed order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::attack::{
    apply_collusion, apply_distributed, apply_mixed, default_collusion_target, even_split, select_malicious,
    select_malicious_excluding, AttackedScenario,
};
use crate::detect::{run_algorithm, Algorithm, DetectionResult, Detector, DetectorOptions};
use crate::error::{invalid, Error, Result};
use crate::metrics::{harmonic, malicious_ratio, mean_std, precision_recall_f1, Prf};
use crate::rng;
use crate::sdr::SdrOracle;
use crate::suspect::{build_reported_matrix, initial_suspects_with_tolerance, default_pair_tolerance, SuspectSets};
use crate::swarm::{
    apply_position_noise, generate_swarm, measure_distances, NoiseParams, DEFAULT_COMM_RANGE,
    DEFAULT_CUBE_HALF_WIDTH, DEFAULT_DISTANCE_VARIANCE, DEFAULT_POSITION_VARIANCE,
};

pub const CSV_HEADER: [&str; 10] = [
    "sweep_param",
    "value",
    "algorithm",
    "precision",
    "recall",
    "f1",
    "r_m",
    "trials",
    "oracle_calls",
    "runtime_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKindName {
    #[default]
    Distributed,
    Collusion,
    Mixed,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

/// One experiment. Any list-valued field with more than one entry is the swept
/// dimension; at most one may be swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub n_uavs: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub malicious_counts: Vec<usize>,
    pub attack_kind: AttackKindName,
    #[serde(deserialize_with = "one_or_many")]
    pub comm_range: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub pos_var: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub dist_var: Vec<f64>,
    pub cube_half_width: f64,
    /// Minimum spoofing displacement; the communication range when absent.
    pub fake_offset_min: Option<f64>,
    pub trials_per_point: usize,
    pub base_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub output_path: Option<PathBuf>,
    /// Record wall-clock runtimes. Off by default so that output is reproducible byte for byte.
    pub timing: bool,
    pub detector: DetectorOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_uavs: vec![30],
            malicious_counts: vec![4],
            attack_kind: AttackKindName::Distributed,
            comm_range: vec![DEFAULT_COMM_RANGE],
            pos_var: vec![DEFAULT_POSITION_VARIANCE],
            dist_var: vec![DEFAULT_DISTANCE_VARIANCE],
            cube_half_width: DEFAULT_CUBE_HALF_WIDTH,
            fake_offset_min: None,
            trials_per_point: 20,
            base_seed: 2024,
            algorithms: Algorithm::ALL.to_vec(),
            output_path: None,
            timing: false,
            detector: DetectorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    M,
    N,
    D,
    PosVar,
    DistVar,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::M => "m",
            SweepParam::N => "n",
            SweepParam::D => "d",
            SweepParam::PosVar => "pos_var",
            SweepParam::DistVar => "dist_var",
        }
    }
}

/// Fully resolved parameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub n: usize,
    pub m: usize,
    pub d: f64,
    pub pos_var: f64,
    pub dist_var: f64,
    pub value: f64,
}

impl Point {
    pub fn noise(&self) -> NoiseParams {
        NoiseParams {
            pos_var: self.pos_var,
            dist_var: self.dist_var,
        }
    }
}

impl ExperimentConfig {
    /// Named sweeps, one per experiment in `PRESETS`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentConfig::default();
        Ok(match name {
            "attackers" => ExperimentConfig {
                malicious_counts: vec![2, 3, 4, 5, 6],
                ..base
            },
            "collusion" => ExperimentConfig {
                malicious_counts: vec![2, 3, 4, 5, 6],
                attack_kind: AttackKindName::Collusion,
                ..base
            },
            "mixed" => ExperimentConfig {
                malicious_counts: vec![2, 4, 6],
                attack_kind: AttackKindName::Mixed,
                ..base
            },
            "scale" => ExperimentConfig {
                n_uavs: vec![20, 30, 40, 50],
                ..base
            },
            "noise" => ExperimentConfig {
                dist_var: vec![1e-6, 1e-5, 1e-4, 1e-3],
                ..base
            },
            "range" => ExperimentConfig {
                comm_range: vec![0.25, 0.30, 0.35, 0.40, 0.45],
                ..base
            },
            "ratio" => ExperimentConfig {
                malicious_counts: vec![1, 2, 3, 4, 5, 6, 7],
                algorithms: Vec::new(),
                ..base
            },
            other => return Err(invalid("preset", format!("unknown preset {other:?}"))),
        })
    }

    pub const PRESETS: [&'static str; 7] = ["attackers", "collusion", "mixed", "scale", "noise", "range", "ratio"];

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep()?;
        if self.trials_per_point == 0 {
            return Err(invalid("trials_per_point", "must be at least 1"));
        }
        if !(self.cube_half_width > 0.0) {
            return Err(invalid("cube_half_width", "must be positive"));
        }
        if self.comm_range.iter().any(|d| !(*d > 0.0)) {
            return Err(invalid("comm_range", "must be positive"));
        }
        if self.pos_var.iter().chain(&self.dist_var).any(|v| !(*v >= 0.0)) {
            return Err(invalid("noise", "variances must be nonnegative"));
        }
        for (&n, &m) in self.n_uavs.iter().flat_map(|n| self.malicious_counts.iter().map(move |m| (n, m))) {
            let reserve = usize::from(self.attack_kind != AttackKindName::Distributed && m > 0);
            if n == 0 || m + reserve >= n {
                return Err(Error::InvalidCount { m, n });
            }
        }
        self.detector.oracle.validate()
    }

    /// The swept dimension and its values; `m` with a single value if nothing is swept.
    pub fn sweep(&self) -> Result<(SweepParam, Vec<f64>)> {
        let lists: [(SweepParam, Vec<f64>); 5] = [
            (SweepParam::M, self.malicious_counts.iter().map(|&m| m as f64).collect()),
            (SweepParam::N, self.n_uavs.iter().map(|&n| n as f64).collect()),
            (SweepParam::D, self.comm_range.clone()),
            (SweepParam::PosVar, self.pos_var.clone()),
            (SweepParam::DistVar, self.dist_var.clone()),
        ];
        if let Some((p, _)) = lists.iter().find(|(_, v)| v.is_empty()) {
            return Err(invalid(p.name(), "sweep lists must be nonempty"));
        }
        let swept: Vec<&(SweepParam, Vec<f64>)> = lists.iter().filter(|(_, v)| v.len() > 1).collect();
        match swept.as_slice() {
            [] => Ok((SweepParam::M, lists[0].1.clone())),
            [(p, v)] => Ok((*p, v.clone())),
            _ => Err(invalid("config", "at most one dimension may be swept")),
        }
    }

    pub fn points(&self) -> Result<Vec<Point>> {
        let (_, values) = self.sweep()?;
        let pick = |list_len: usize, k: usize| if list_len > 1 { k } else { 0 };
        Ok(values
            .iter()
            .enumerate()
            .map(|(k, &value)| Point {
                n: self.n_uavs[pick(self.n_uavs.len(), k)],
                m: self.malicious_counts[pick(self.malicious_counts.len(), k)],
                d: self.comm_range[pick(self.comm_range.len(), k)],
                pos_var: self.pos_var[pick(self.pos_var.len(), k)],
                dist_var: self.dist_var[pick(self.dist_var.len(), k)],
                value,
            })
            .collect())
    }

    /// The seed of trial `trial`, identical at every sweep point.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        rng::derive(self.base_seed, "trial", &[trial as u64])
    }
}

/// Generates and perturbs one attack-free swarm.
pub fn build_clean(point: &Point, cube_half_width: f64, seed: u64) -> Result<AttackedScenario> {
    let noise = point.noise();
    let swarm = generate_swarm(point.n, cube_half_width, point.d, seed)?;
    let swarm = apply_position_noise(&swarm, &noise, seed)?;
    let honest = measure_distances(&swarm, &noise, seed)?;
    Ok(AttackedScenario::clean(swarm, honest))
}

/// Picks `m` attackers in a clean scenario and applies `kind`. Collusion and mixed
/// attacks frame the default target.
pub fn attack_scenario(
    clean: &AttackedScenario,
    kind: AttackKindName,
    m: usize,
    fake_offset_min: f64,
    noise: &NoiseParams,
    seed: u64,
) -> Result<AttackedScenario> {
    let (swarm, honest) = (&clean.swarm, &clean.measurements);
    if m == 0 {
        return Ok(clean.clone());
    }
    match kind {
        AttackKindName::Distributed => {
            let ids = select_malicious(swarm, m, seed)?;
            apply_distributed(swarm, honest, &ids, fake_offset_min, noise, seed)
        }
        AttackKindName::Collusion | AttackKindName::Mixed => {
            let target = default_collusion_target(swarm, honest, &BTreeSet::new())
                .ok_or_else(|| invalid("attack", "no benign target available"))?;
            let ids = select_malicious_excluding(swarm, m, &BTreeSet::from([target]), seed)?;
            if kind == AttackKindName::Collusion {
                apply_collusion(swarm, honest, &ids, target, fake_offset_min, noise, seed)
            } else {
                let (dist, coll) = even_split(&ids);
                apply_mixed(swarm, honest, &dist, &coll, target, fake_offset_min, noise, seed)
            }
        }
    }
}

/// Generates, perturbs and attacks one swarm.
pub fn build_scenario(
    point: &Point,
    kind: AttackKindName,
    cube_half_width: f64,
    fake_offset_min: Option<f64>,
    seed: u64,
) -> Result<AttackedScenario> {
    let clean = build_clean(point, cube_half_width, seed)?;
    let offset = fake_offset_min.unwrap_or(point.d);
    attack_scenario(&clean, kind, point.m, offset, &point.noise(), seed)
}

/// The initial partition under the detector's pair tolerance.
pub fn initial_partition(scenario: &AttackedScenario, opts: &DetectorOptions) -> Result<SuspectSets> {
    let tol = opts
        .problem
        .pair_tolerance
        .unwrap_or_else(|| default_pair_tolerance(scenario.comm_range()));
    initial_suspects_with_tolerance(&build_reported_matrix(scenario), &scenario.measurements, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoOutcome {
    pub algorithm: Algorithm,
    pub predicted: BTreeSet<usize>,
    pub prf: Prf,
    pub oracle_calls: usize,
    pub unknown_verdicts: usize,
    pub trusted_set_infeasible: bool,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub truth: BTreeSet<usize>,
    pub malicious_ratio: f64,
    pub outcomes: Vec<AlgoOutcome>,
}

fn outcome(result: DetectionResult, truth: &BTreeSet<usize>, runtime_ms: f64) -> AlgoOutcome {
    AlgoOutcome {
        algorithm: result.algorithm,
        prf: precision_recall_f1(&result.predicted_malicious, truth),
        predicted: result.predicted_malicious,
        oracle_calls: result.oracle_calls,
        unknown_verdicts: result.unknown_verdicts,
        trusted_set_infeasible: result.trusted_set_infeasible,
        runtime_ms,
    }
}

/// One swarm through every configured algorithm.
pub fn run_trial(config: &ExperimentConfig, point: &Point, trial: usize) -> Result<TrialResult> {
    let seed = config.trial_seed(trial);
    let scenario = build_scenario(point, config.attack_kind, config.cube_half_width, config.fake_offset_min, seed)?;
    let initial = initial_partition(&scenario, &config.detector)?;
    let truth = scenario.truth().clone();
    let oracle = SdrOracle::new(config.detector.oracle);
    // E-CDI starts with a CDI run; sharing the detector lets it reuse those solves.
    let mut detector = Detector::new(&scenario, &oracle, config.detector)?;
    let mut cdi_ms = None;
    let mut outcomes = Vec::with_capacity(config.algorithms.len());
    let elapsed = |t: Instant| if config.timing { t.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    for &algorithm in &config.algorithms {
        let start = Instant::now();
        let (result, ms) = match algorithm {
            Algorithm::Cdi => {
                let r = detector.cdi(&initial)?;
                let ms = elapsed(start);
                cdi_ms = Some(ms);
                (r, ms)
            }
            Algorithm::Ecdi => {
                let r = detector.ecdi(&initial)?;
                // charge the shared CDI phase back so runtimes stay comparable
                (r, elapsed(start) + cdi_ms.unwrap_or(0.0))
            }
            _ => {
                let r = run_algorithm(algorithm, &scenario, &initial, &config.detector, seed)?;
                (r, elapsed(start))
            }
        };
        outcomes.push(outcome(result, &truth, ms));
    }
    Ok(TrialResult {
        value: point.value,
        trial,
        seed,
        malicious_ratio: malicious_ratio(&initial),
        truth,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub sweep_param: SweepParam,
    pub value: f64,
    /// `None` for the metrics-free row written when no algorithm is configured.
    pub algorithm: Option<Algorithm>,
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the row's `precision` and `recall`.
    pub f1: f64,
    /// Mean of the per-trial F1 scores.
    pub f1_trial_mean: f64,
    pub precision_sd: f64,
    pub recall_sd: f64,
    pub f1_trial_sd: f64,
    pub r_m: f64,
    pub r_m_sd: f64,
    pub trials: usize,
    pub oracle_calls: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
    pub trials: Vec<TrialResult>,
}

impl SweepOutput {
    pub fn rows_for(&self, algorithm: Algorithm) -> Vec<&MetricsRow> {
        self.rows.iter().filter(|r| r.algorithm == Some(algorithm)).collect()
    }
}

fn aggregate(param: SweepParam, value: f64, trials: &[&TrialResult], algorithms: &[Algorithm]) -> Vec<MetricsRow> {
    let ratios: Vec<f64> = trials.iter().map(|t| t.malicious_ratio).collect();
    let (r_m, r_m_sd) = mean_std(&ratios);
    let empty = |algorithm| MetricsRow {
        sweep_param: param,
        value,
        algorithm,
        precision: f64::NAN,
        recall: f64::NAN,
        f1: f64::NAN,
        f1_trial_mean: f64::NAN,
        precision_sd: f64::NAN,
        recall_sd: f64::NAN,
        f1_trial_sd: f64::NAN,
        r_m,
        r_m_sd,
        trials: trials.len(),
        oracle_calls: 0.0,
        runtime_ms: 0.0,
    };
    if algorithms.is_empty() {
        return vec![empty(None)];
    }
    algorithms
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let outs: Vec<&AlgoOutcome> = trials.iter().map(|t| &t.outcomes[k]).collect();
            let col = |f: &dyn Fn(&AlgoOutcome) -> f64| -> Vec<f64> { outs.iter().map(|o| f(o)).collect() };
            let (precision, precision_sd) = mean_std(&col(&|o| o.prf.precision));
            let (recall, recall_sd) = mean_std(&col(&|o| o.prf.recall));
            let (f1_trial_mean, f1_trial_sd) = mean_std(&col(&|o| o.prf.f1));
            MetricsRow {
                precision,
                recall,
                f1: harmonic(precision, recall),
                f1_trial_mean,
                precision_sd,
                recall_sd,
                f1_trial_sd,
                oracle_calls: mean_std(&col(&|o| o.oracle_calls as f64)).0,
                runtime_ms: mean_std(&col(&|o| o.runtime_ms)).0,
                ..empty(Some(a))
            }
        })
        .collect()
}

/// Runs every point and trial, then aggregates per point in sweep order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let (param, _) = config.sweep()?;
    let points = config.points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..config.trials_per_point).map(move |t| (p, t)))
        .collect();
    let trials: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(config, &points[p], t))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (p, point) in points.iter().enumerate() {
        let per: Vec<&TrialResult> = trials[p * config.trials_per_point..(p + 1) * config.trials_per_point]
            .iter()
            .collect();
        rows.extend(aggregate(param, point.value, &per, &config.algorithms));
    }
    let out = SweepOutput {
        config: config.clone(),
        rows,
        trials,
    };
    if let Some(path) = &config.output_path {
        write_csv(&out.rows, path)?;
        write_plot_data(&out.rows, &plot_data_path(path))?;
    }
    Ok(out)
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// The CSV body, header first.
pub fn csv_string(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep_param.name().to_string(),
            num(r.value),
            r.algorithm.map(|a| a.name().to_string()).unwrap_or_default(),
            num(r.precision),
            num(r.recall),
            num(r.f1),
            num(r.r_m),
            r.trials.to_string(),
            num(r.oracle_calls),
            num(r.runtime_ms),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| invalid("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_file(path, &csv_string(rows)?)
}

/// `<stem>.dat` next to the CSV.
pub fn plot_data_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("dat")
}

/// Whitespace-separated blocks, one per algorithm, separated by two blank lines so
/// gnuplot can address them with `index`.
pub fn plot_data_string(rows: &[MetricsRow]) -> String {
    let mut s = String::new();
    s.push_str("# empty-set conventions: Qp=Qt=0 -> P=R=F1=1; Qp=0<Qt -> P=1,R=0,F1=0; Qt=0<Qp -> P=0,R=1,F1=0\n");
    s.push_str("# f1 = harmonic mean of the mean precision and mean recall; f1_trial is the mean per-trial F1\n");
    let mut algos: Vec<Option<Algorithm>> = Vec::new();
    for r in rows {
        if !algos.contains(&r.algorithm) {
            algos.push(r.algorithm);
        }
    }
    for (k, a) in algos.iter().enumerate() {
        if k > 0 {
            s.push_str("\n\n");
        }
        let name = a.map(|a| a.name()).unwrap_or("none");
        let _ = writeln!(s, "# algorithm {name}");
        s.push_str("# value precision precision_sd recall recall_sd f1 f1_trial f1_trial_sd r_m r_m_sd\n");
        for r in rows.iter().filter(|r| r.algorithm == *a) {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {} {} {}",
                r.value,
                r.precision,
                r.precision_sd,
                r.recall,
                r.recall_sd,
                r.f1,
                r.f1_trial_mean,
                r.f1_trial_sd,
                r.r_m,
                r.r_m_sd
            );
        }
    }
    s
}

pub fn write_plot_data(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_file(path, &plot_data_string(rows))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

//! Release acceptance: one PASS/FAIL line per criterion. The test fails if the set of
//! failing criteria differs from `KNOWN_UNMET`, in either direction.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{brute_force, random_scenario, replay_trace, small_instance, HashOracle};
use spoofguard::attack::{apply_distributed, AttackedScenario};
use spoofguard::detect::{Algorithm, Detector, DetectorOptions};
use spoofguard::harness::{initial_partition, run_sweep, ExperimentConfig, MetricsRow, SweepOutput};
use spoofguard::metrics::{harmonic, pearson, precision_recall_f1, slope};
use spoofguard::sdr::{assemble, check_feasibility, FeasibilityStatus, OracleOptions, ProblemParams};
use spoofguard::swarm::{apply_position_noise, generate_swarm, measure_distances, NoiseParams};

const HONEST_MIN_FEASIBLE: usize = 99;
const POSITION_TOL: f64 = 1e-3;
const PER_INSTANCE_LIMIT: Duration = Duration::from_secs(5);
const DISPLACED_MIN_REJECTED: usize = 95;
const MIN_BENIGN_NEIGHBORS: usize = 3;
const TRIALS: usize = 20;
const SWEEP_LIMIT: Duration = Duration::from_secs(30 * 60);
/// Largest rise between consecutive noise levels still read as "non-increasing": about
/// one Monte Carlo standard error of a mean F1 over 20 trials.
const NOISE_RISE_TOL: f64 = 0.03;
/// Least-squares slope of collusion F1 per extra attacker still read as "non-decreasing".
const COLLUSION_SLOPE_TOL: f64 = -0.002;
const RATIO_MIN_PEARSON: f64 = 0.95;
const INVARIANT_INSTANCES: u64 = 1000;

/// Sub-criteria that are known not to hold; see the README.
const KNOWN_UNMET: &[&str] = &["1b-position-error", "4f-range-peak-cdi"];

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn check(&mut self, id: &'static str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id);
        }
    }
}

fn honest(seed: u64, n: usize) -> AttackedScenario {
    let noise = NoiseParams::default();
    let s = generate_swarm(n, 0.5, 0.3, seed).unwrap();
    let s = apply_position_noise(&s, &noise, seed).unwrap();
    let e = measure_distances(&s, &noise, seed).unwrap();
    AttackedScenario::clean(s, e)
}

fn full(s: &AttackedScenario) -> spoofguard::sdr::FeasibilityProblem {
    let ids: BTreeSet<usize> = (0..s.n()).collect();
    assemble(&ids, s, &ProblemParams::default()).unwrap()
}

/// Lower bound on how far some UAV must move from its report in any consistent
/// embedding: a measured pair whose reports sit beyond the range limit forces the
/// measuring end to close the gap on its own.
fn forced_move(problem: &spoofguard::sdr::FeasibilityProblem) -> f64 {
    let limit = (problem.comm_range.powi(2) - problem.strictness_margin).sqrt();
    problem
        .constraint_pairs
        .iter()
        .map(|c| problem.reported_positions[&c.i].distance(&problem.reported_positions[&c.j]) - limit)
        .fold(0.0, f64::max)
}

fn oracle_soundness(r: &mut Report) {
    let (mut feasible, mut worst_err, mut worst_time) = (0, 0.0f64, Duration::ZERO);
    let (mut forced, mut worst_forced) = (0, 0.0f64);
    for seed in 0..100 {
        let s = honest(seed, 20);
        let problem = full(&s);
        let f = forced_move(&problem);
        forced += usize::from(f > POSITION_TOL);
        worst_forced = worst_forced.max(f);
        let start = Instant::now();
        let res = check_feasibility(&problem, &OracleOptions::default()).unwrap();
        worst_time = worst_time.max(start.elapsed());
        if res.status == FeasibilityStatus::Feasible {
            feasible += 1;
            for (p, id) in res.recovered_positions.unwrap().iter().zip(&problem.node_order) {
                worst_err = worst_err.max(p.distance(&s.swarm.reported(*id)));
            }
        }
    }
    r.check(
        "1a-soundness",
        feasible >= HONEST_MIN_FEASIBLE && worst_time <= PER_INSTANCE_LIMIT,
        format!("{feasible}/100 feasible, slowest {worst_time:?}"),
    );
    r.check(
        "1b-position-error",
        worst_err <= POSITION_TOL,
        format!(
            "max position error {worst_err:.2e}; {forced}/100 swarms force a move above {POSITION_TOL:e} \
             in any consistent embedding (largest {worst_forced:.2e})"
        ),
    );
}

fn oracle_sensitivity(r: &mut Report) {
    let (mut rejected, mut built, mut seed) = (0, 0, 0u64);
    while built < 100 {
        seed += 1;
        let s = honest(seed, 20);
        let lists = s.measurements.neighbor_lists();
        let Some(victim) = (0..20).find(|&i| lists[i].len() >= MIN_BENIGN_NEIGHBORS) else {
            continue;
        };
        let ids = BTreeSet::from([victim]);
        let attacked =
            apply_distributed(&s.swarm, &s.measurements, &ids, 2.0 * 0.3, &NoiseParams::default(), seed).unwrap();
        assert!(attacked.swarm.reported(victim).distance(&attacked.swarm.true_position(victim)) >= 0.6);
        built += 1;
        if check_feasibility(&full(&attacked), &OracleOptions::default()).unwrap().status != FeasibilityStatus::Feasible {
            rejected += 1;
        }
    }
    r.check(
        "2-sensitivity",
        rejected >= DISPLACED_MIN_REJECTED,
        format!("{rejected}/100 infeasible or unknown"),
    );
}

fn brute_force_equivalence(r: &mut Report) {
    let (mut violations, mut witnessed) = (0, 0);
    for seed in 0..50 {
        let problem = small_instance(seed, 2 + (seed as usize % 4), 0.25);
        if brute_force(&problem, problem.comm_range / 100.0).is_some() {
            witnessed += 1;
            if check_feasibility(&problem, &OracleOptions::default()).unwrap().status == FeasibilityStatus::Infeasible {
                violations += 1;
            }
        }
    }
    r.check(
        "3-brute-force",
        violations == 0,
        format!("{violations} refuted among {witnessed}/50 instances with a brute-force point"),
    );
}

fn col(rows: &[&MetricsRow], f: fn(&MetricsRow) -> f64) -> Vec<f64> {
    rows.iter().map(|r| f(r)).collect()
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn sweep(name: &str) -> SweepOutput {
    let cfg = ExperimentConfig {
        trials_per_point: TRIALS,
        ..ExperimentConfig::preset(name).unwrap()
    };
    run_sweep(&cfg).unwrap()
}

/// ECDI never keeps anyone CDI cleared, on any trial of a sweep.
fn paired_subset(out: &SweepOutput) -> bool {
    out.trials.iter().all(|t| {
        let get = |a| t.outcomes.iter().find(|o| o.algorithm == a).map(|o| &o.predicted);
        match (get(Algorithm::Ecdi), get(Algorithm::Cdi)) {
            (Some(e), Some(c)) => e.is_subset(c),
            _ => true,
        }
    })
}

fn interior_peak(ys: &[f64]) -> bool {
    let best = (0..ys.len()).max_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap();
    best > 0 && best + 1 < ys.len() && ys[best] > ys[0] && ys[best] > ys[ys.len() - 1]
}

fn trends(r: &mut Report) -> Vec<SweepOutput> {
    let start = Instant::now();
    let attackers = sweep("attackers");
    let collusion = sweep("collusion");
    let noise = sweep("noise");
    let range = sweep("range");

    let (c, e) = (attackers.rows_for(Algorithm::Cdi), attackers.rows_for(Algorithm::Ecdi));
    let (n, rnd) = (attackers.rows_for(Algorithm::Nlos), attackers.rows_for(Algorithm::Random));
    let mut beat = true;
    for k in 0..c.len() {
        for ours in [c[k], e[k]] {
            for base in [n[k], rnd[k]] {
                beat &= ours.precision > base.precision && ours.recall > base.recall && ours.f1 > base.f1;
            }
        }
    }
    r.check(
        "4a-attackers-beat-baselines",
        beat,
        format!(
            "F1 cdi [{}] ecdi [{}] nlos [{}] random [{}]",
            fmt(&col(&c, |r| r.f1)),
            fmt(&col(&e, |r| r.f1)),
            fmt(&col(&n, |r| r.f1)),
            fmt(&col(&rnd, |r| r.f1))
        ),
    );
    let (rc, re) = (col(&c, |r| r.recall), col(&e, |r| r.recall));
    r.check(
        "4b-ecdi-recall-at-least-cdi",
        re.iter().zip(&rc).all(|(e, c)| e >= c),
        format!("recall cdi [{}] ecdi [{}]", fmt(&rc), fmt(&re)),
    );
    let mean = |rows: &[&MetricsRow]| rows.iter().map(|r| r.f1).sum::<f64>() / rows.len() as f64;
    let (me, mn, mr) = (mean(&e), mean(&n), mean(&rnd));
    r.check(
        "4c-ordering-ecdi-nlos-random",
        me > mn && mn > mr,
        format!("mean F1 over M: ecdi {me:.3} nlos {mn:.3} random {mr:.3}"),
    );

    let ce = collusion.rows_for(Algorithm::Ecdi);
    let f1: Vec<f64> = col(&ce, |r| r.f1);
    let beat = (0..ce.len()).all(|k| {
        [Algorithm::Nlos, Algorithm::Random]
            .iter()
            .all(|&b| ce[k].f1 > collusion.rows_for(b)[k].f1)
    });
    let ms = col(&ce, |r| r.value);
    let s = slope(&ms, &f1).unwrap();
    r.check(
        "4d-collusion-ecdi",
        beat && s >= COLLUSION_SLOPE_TOL,
        format!("ecdi F1 [{}], slope {s:.4} per attacker", fmt(&f1)),
    );

    let mut ok = true;
    let mut detail = Vec::new();
    for a in Algorithm::ALL {
        let ys = col(&noise.rows_for(a), |r| r.f1);
        ok &= ys.windows(2).all(|w| w[1] <= w[0] + NOISE_RISE_TOL) && ys[ys.len() - 1] < ys[0];
        detail.push(format!("{a} [{}]", fmt(&ys)));
    }
    r.check("4e-noise-non-increasing", ok, detail.join(", "));

    for (id, a) in [("4f-range-peak-cdi", Algorithm::Cdi), ("4f-range-peak-ecdi", Algorithm::Ecdi)] {
        let ys = col(&range.rows_for(a), |r| r.f1);
        r.check(id, interior_peak(&ys), format!("F1 over d 0.25..0.45 [{}]", fmt(&ys)));
    }

    let all = [attackers, collusion, noise, range];
    r.check(
        "4g-ecdi-subset-of-cdi-on-sweeps",
        all.iter().all(paired_subset),
        format!("{} paired trials", all.iter().map(|o| o.trials.len()).sum::<usize>()),
    );
    let took = start.elapsed();
    r.check("4h-sweep-runtime", took <= SWEEP_LIMIT, format!("{took:?}"));
    all.into()
}

fn ratio_linearity(r: &mut Report) {
    let out = sweep("ratio");
    let ms: Vec<f64> = out.rows.iter().map(|r| r.value).collect();
    let rm: Vec<f64> = out.rows.iter().map(|r| r.r_m).collect();
    let rho = pearson(&ms, &rm).unwrap_or(0.0);
    r.check(
        "5-ratio-linear",
        rho >= RATIO_MIN_PEARSON,
        format!("Pearson {rho:.4}, R_M [{}]", fmt(&rm)),
    );
}

fn invariants(r: &mut Report) {
    let mut bad = Vec::new();
    for seed in 0..INVARIANT_INSTANCES {
        let n = 3 + (seed as usize % 12);
        let s = random_scenario(seed, n, 0.45);
        let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
        let oracle = HashOracle {
            salt: seed,
            feasible_256: (seed * 37 % 256) as u8,
        };
        let mut det = Detector::new(&s, &oracle, DetectorOptions::default()).unwrap();
        let c = det.cdi(&initial).unwrap();
        let e = det.ecdi(&initial).unwrap();
        let m0 = initial.suspected.len();
        let ok = replay_trace(&initial, n, &c).is_ok()
            && replay_trace(&initial, n, &e).is_ok()
            && c.iterations <= m0 + 1
            && e.iterations <= m0 + 2
            && e.predicted_malicious.is_subset(&c.predicted_malicious);
        if !ok {
            bad.push(seed);
        }
    }
    let mut metric_bad = 0;
    let mut rng = common::rng(99);
    for _ in 0..INVARIANT_INSTANCES {
        use rand::Rng;
        let p: BTreeSet<usize> = (0..20).filter(|_| rng.random_bool(0.3)).collect();
        let t: BTreeSet<usize> = (0..20).filter(|_| rng.random_bool(0.3)).collect();
        let m = precision_recall_f1(&p, &t);
        let hit = p.intersection(&t).count() as f64;
        let ok = if p.is_empty() || t.is_empty() {
            m.f1 == f64::from(u8::from(p.is_empty() && t.is_empty()))
        } else {
            m.precision == hit / p.len() as f64 && m.recall == hit / t.len() as f64 && m.f1 == harmonic(m.precision, m.recall)
        };
        metric_bad += usize::from(!ok);
    }
    r.check(
        "6-invariants",
        bad.is_empty() && metric_bad == 0,
        format!(
            "{} of {INVARIANT_INSTANCES} detector runs and {metric_bad} of {INVARIANT_INSTANCES} metric pairs broke an invariant",
            bad.len()
        ),
    );
}

fn cli_determinism(r: &mut Report) {
    let bin = env!("CARGO_BIN_EXE_spoofguard");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let run = |args: &[&str]| -> Vec<u8> {
        let out = Command::new(bin).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}");
        out.stdout
    };
    let cfg = path("cfg.json");
    std::fs::write(&cfg, r#"{"malicious_counts": [2, 4], "trials_per_point": 3}"#).unwrap();
    let attacked = path("attacked.json");
    run(&["attack", "--config", &cfg, "--seed", "11", "--out", &attacked]);
    let cases: Vec<Vec<&str>> = vec![
        vec!["generate", "--config", &cfg, "--seed", "11"],
        vec!["attack", "--config", &cfg, "--seed", "11"],
        vec!["detect", "--algo", "cdi", "--input", &attacked],
        vec!["detect", "--algo", "ecdi", "--input", &attacked],
        vec!["detect", "--algo", "nlos", "--input", &attacked, "--seed", "5"],
        vec!["detect", "--algo", "random", "--input", &attacked, "--seed", "5"],
        vec!["sweep", "--config", &cfg, "--seed", "11"],
        vec!["oracle-check", "--input", &attacked],
    ];
    let same = cases.iter().filter(|args| run(args) == run(args)).count();
    // file outputs too: the sweep CSV and its plot data
    let files = |tag: &str| {
        let csv = path(&format!("{tag}.csv"));
        run(&["sweep", "--config", &cfg, "--out", &csv]);
        let dat = Path::new(&csv).with_extension("dat");
        (std::fs::read(&csv).unwrap(), std::fs::read(dat).unwrap())
    };
    let files_same = files("a") == files("b");
    r.check(
        "7-cli-determinism",
        same == cases.len() && files_same,
        format!("{same}/{} invocations byte-identical, sweep files identical: {files_same}", cases.len()),
    );
}

#[test]
fn acceptance() {
    let mut r = Report { failed: Vec::new() };
    oracle_soundness(&mut r);
    oracle_sensitivity(&mut r);
    brute_force_equivalence(&mut r);
    trends(&mut r);
    ratio_linearity(&mut r);
    invariants(&mut r);
    cli_determinism(&mut r);
    let failed: BTreeSet<&str> = r.failed.iter().copied().collect();
    let known: BTreeSet<&str> = KNOWN_UNMET.iter().copied().collect();
    println!("known unmet: {known:?}");
    assert_eq!(failed, known, "failing criteria differ from the documented ones");
}

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{random_scenario, replay_trace, set, HashOracle};
use spoofguard::attack::AttackedScenario;
use spoofguard::detect::{
    cdi, ecdi, nlos_baseline, random_baseline, Detector, DetectorOptions, TestKind,
};
use spoofguard::harness::{build_scenario, initial_partition, AttackKindName, Point};
use spoofguard::sdr::SdrOracle;
use spoofguard::suspect::{build_reported_matrix, SuspectSets};
use spoofguard::swarm::{generate_swarm, measure_distances, MeasurementSet, NoiseParams, Position3};

fn point(n: usize, m: usize) -> Point {
    Point {
        n,
        m,
        d: 0.3,
        pos_var: 1e-6,
        dist_var: 1e-6,
        value: m as f64,
    }
}

fn scenario(kind: AttackKindName, n: usize, m: usize, seed: u64) -> AttackedScenario {
    build_scenario(&point(n, m), kind, 0.5, None, seed).unwrap()
}

fn max_degree(s: &AttackedScenario) -> usize {
    s.measurements.neighbor_lists().iter().map(BTreeSet::len).max().unwrap_or(0)
}

/// Pass and call bounds, trace replay and the E-CDI refinement property, for any oracle.
fn check_run_invariants(s: &AttackedScenario, initial: &SuspectSets, oracle: &impl spoofguard::sdr::FeasibilityOracle) {
    let opts = DetectorOptions::default();
    let mut det = Detector::new(s, oracle, opts).unwrap();
    let c = det.cdi(initial).unwrap();
    let e = det.ecdi(initial).unwrap();
    let m0 = initial.suspected.len();
    let n = s.n();
    for r in [&c, &e] {
        replay_trace(initial, n, r).unwrap();
        assert!(r.predicted_malicious.is_subset(&initial.suspected));
    }
    assert!(c.iterations <= m0 + 1, "cdi passes {} for {m0}", c.iterations);
    assert!(e.iterations <= m0 + 2, "ecdi passes {} for {m0}", e.iterations);
    // the quadratic call bounds, plus the one trusted-set check
    assert!(c.oracle_calls <= m0 * m0 + 1);
    assert!(e.oracle_calls <= m0 * m0 * (1 + max_degree(s)) + 1);
    assert!(e.predicted_malicious.is_subset(&c.predicted_malicious));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn invariants_hold_for_arbitrary_verdicts(seed in 0u64..1_000_000, n in 3usize..14, salt: u64, p in 0u8..=255) {
        let s = random_scenario(seed, n, 0.45);
        let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
        check_run_invariants(&s, &initial, &HashOracle { salt, feasible_256: p });
    }

    #[test]
    fn invariants_hold_for_arbitrary_initial_sets(seed in 0u64..1_000_000, mask: u16, salt: u64) {
        let s = random_scenario(seed, 12, 0.4);
        let suspected: BTreeSet<usize> = (0..12).filter(|i| mask >> i & 1 == 1).collect();
        let initial = SuspectSets::from_suspected(12, suspected);
        check_run_invariants(&s, &initial, &HashOracle { salt, feasible_256: 128 });
    }

    #[test]
    fn random_baseline_samples_from_the_suspects(ids in prop::collection::btree_set(0usize..40, 0..20), m in 0usize..25, seed: u64) {
        let picked = random_baseline(&ids, m, seed);
        prop_assert!(picked.is_subset(&ids));
        prop_assert_eq!(picked.len(), m.min(ids.len()));
        prop_assert_eq!(picked, random_baseline(&ids, m, seed));
    }
}

#[test]
fn invariants_hold_with_the_real_oracle() {
    let oracle = SdrOracle::default();
    for seed in 0..6 {
        let s = scenario(AttackKindName::Distributed, 15, 1 + seed as usize % 3, seed);
        let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
        check_run_invariants(&s, &initial, &oracle);
    }
}

#[test]
fn nothing_suspected_needs_no_oracle() {
    let s = scenario(AttackKindName::Distributed, 20, 0, 1);
    let initial = SuspectSets::from_suspected(20, BTreeSet::new());
    for r in [
        cdi(&initial, &s, &DetectorOptions::default()).unwrap(),
        ecdi(&initial, &s, &DetectorOptions::default()).unwrap(),
    ] {
        assert!(r.predicted_malicious.is_empty());
        assert_eq!(r.oracle_calls, 0);
    }
}

#[test]
fn spuriously_suspected_pair_is_cleared() {
    let swarm = generate_swarm(20, 0.5, 0.3, 8).unwrap();
    let mut e = measure_distances(&swarm, &NoiseParams::NONE, 8).unwrap();
    // push one long honest range just past the initial squared-distance threshold; a
    // long baseline lets the ε-ball absorb the excess in the relaxation
    let (i, j, r) = e.iter().find(|&(_, _, r)| (0.2..0.25).contains(&r)).unwrap();
    let bumped = (r * r + 0.0226).sqrt();
    e.insert(i, j, bumped).unwrap();
    let s = AttackedScenario::clean(swarm, e);
    let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
    assert_eq!(initial.suspected, set(&[i, j]));
    let r = cdi(&initial, &s, &DetectorOptions::default()).unwrap();
    assert!(r.predicted_malicious.is_empty());
    assert_eq!(r.iterations, 1);
}

#[test]
fn cdi_keeps_every_distributed_attacker() {
    let mut hits = 0;
    for seed in 0..10 {
        let s = scenario(AttackKindName::Distributed, 30, 4, seed);
        let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
        let r = cdi(&initial, &s, &DetectorOptions::default()).unwrap();
        hits += usize::from(s.truth().is_subset(&r.predicted_malicious));
    }
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn ecdi_clears_the_framed_target() {
    let s = scenario(AttackKindName::Collusion, 30, 4, 5);
    let target = s.plan.target().unwrap();
    let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
    assert!(initial.suspected.contains(&target));
    let c = cdi(&initial, &s, &DetectorOptions::default()).unwrap();
    let e = ecdi(&initial, &s, &DetectorOptions::default()).unwrap();
    assert!(c.predicted_malicious.contains(&target));
    assert!(!e.predicted_malicious.contains(&target));
    assert!(s.truth().is_subset(&e.predicted_malicious));
}

#[test]
fn ecdi_finds_a_mixed_attack_exactly() {
    let exact = (0..20).find(|&seed| {
        let s = scenario(AttackKindName::Mixed, 30, 6, seed);
        let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
        let e = ecdi(&initial, &s, &DetectorOptions::default()).unwrap();
        &e.predicted_malicious == s.truth()
    });
    assert!(exact.is_some());
}

#[test]
fn individual_tests_follow_failed_neighborhoods() {
    let s = scenario(AttackKindName::Collusion, 30, 4, 5);
    let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
    let e = ecdi(&initial, &s, &DetectorOptions::default()).unwrap();
    let kinds: Vec<TestKind> = e.per_iteration_trace.iter().map(|t| t.test).collect();
    assert_eq!(kinds[0], TestKind::TrustedSet);
    let first = kinds.iter().position(|k| *k == TestKind::Individual).unwrap();
    assert_eq!(kinds[first - 1], TestKind::Neighborhood);
}

#[test]
fn nlos_edge_cases() {
    let swarm = generate_swarm(6, 0.5, 0.3, 2).unwrap();
    let s = AttackedScenario::clean(swarm, MeasurementSet::empty(6));
    assert!(nlos_baseline(&build_reported_matrix(&s), &s.measurements, 0, 1).unwrap().is_empty());
    // a lone inconsistent pair forces the choice
    let mut only = MeasurementSet::empty(6);
    only.insert(4, 5, p_of(&s, 4, 5) + 0.2).unwrap();
    let s1 = AttackedScenario::clean(s.swarm.clone(), only.clone());
    assert_eq!(nlos_baseline(&build_reported_matrix(&s1), &only, 2, 9).unwrap(), set(&[4, 5]));
    assert_eq!(nlos_baseline(&build_reported_matrix(&s1), &only, 0, 9).unwrap(), BTreeSet::new());
}

fn p_of(s: &AttackedScenario, a: usize, b: usize) -> f64 {
    s.swarm.reported(a).distance(&s.swarm.reported(b))
}

/// Attackers shift their reports by exactly `offset` along a fixed direction and keep
/// their own claims consistent with the shifted report.
fn shifted(seed: u64, offset: f64) -> AttackedScenario {
    let swarm = generate_swarm(30, 0.5, 0.3, seed).unwrap();
    let mut e = measure_distances(&swarm, &NoiseParams::default(), seed).unwrap();
    let mut swarm = swarm;
    let ids = spoofguard::attack::select_malicious(&swarm, 4, seed).unwrap();
    for &m in &ids {
        let u = &mut swarm.uavs[m];
        u.reported_pos = Position3::new(u.true_pos.0[0] + offset, u.true_pos.0[1], u.true_pos.0[2]);
        u.malicious = true;
    }
    for &m in &ids {
        let claims: Vec<usize> = e.outgoing(m).map(|(j, _)| j).collect();
        for j in claims {
            let r = swarm.reported(m).distance(&swarm.reported(j));
            e.insert(m, j, r).unwrap();
        }
    }
    let mut s = AttackedScenario::clean(swarm, e);
    s.plan.malicious_ids = ids;
    s
}

#[test]
fn nlos_overlap_grows_with_displacement() {
    let overlap = |offset: f64| -> f64 {
        (0..50u64)
            .map(|seed| {
                let s = shifted(seed, offset);
                let picked = nlos_baseline(&build_reported_matrix(&s), &s.measurements, 4, seed).unwrap();
                picked.intersection(s.truth()).count() as f64
            })
            .sum::<f64>()
            / 50.0
    };
    let (near, far) = (overlap(1e-4), overlap(0.1));
    assert!(far > near, "{near} {far}");
}

/// `E[R] = E|P ∩ T| / |T|` with `P` a uniform `m`-subset of the suspects `S`, so
/// `E|P ∩ T| = m · |T ∩ S| / |S|`.
#[test]
fn random_baseline_recall_matches_hypergeometric_mean() {
    let (mut empirical, mut analytic) = (0.0, 0.0);
    for seed in 0..400u64 {
        let s = scenario(AttackKindName::Distributed, 30, 4, seed);
        let initial = initial_partition(&s, &DetectorOptions::default()).unwrap();
        let truth = s.truth();
        let sus = &initial.suspected;
        if sus.is_empty() {
            continue;
        }
        let m = truth.len().min(sus.len());
        analytic += m as f64 / truth.len() as f64 * sus.intersection(truth).count() as f64 / sus.len() as f64;
        let picked = random_baseline(sus, truth.len(), seed);
        empirical += picked.intersection(truth).count() as f64 / truth.len() as f64;
    }
    assert!((empirical / analytic - 1.0).abs() <= 0.1, "{empirical} vs {analytic}");
}

#[test]
fn detectors_reject_a_broken_partition() {
    let s = scenario(AttackKindName::Distributed, 10, 2, 3);
    let mut bad = SuspectSets::from_suspected(10, set(&[1]));
    bad.trusted.insert(1);
    assert!(cdi(&bad, &s, &DetectorOptions::default()).is_err());
}

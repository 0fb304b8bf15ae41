use edgebench_core::fixtures::{fixture, FIXTURE_NAMES};
use edgebench_core::metrics::round_half_away;
use edgebench_core::model::WorkloadSpec;
use edgebench_core::probes::execute_simulated;
use edgebench_core::report::{
    build_report, check_consistency, emit_csv, report_from_json, report_to_json, KpiReport,
    LedgerPair,
};
use proptest::prelude::*;

fn report_for(name: &str) -> KpiReport {
    let f = fixture(name).unwrap();
    let data = execute_simulated(&f.spec).unwrap();
    let pair = f.ledgers.as_ref().map(|(b, t)| LedgerPair {
        treatment: t,
        baseline: b,
    });
    build_report(&f.spec, &data, pair).unwrap()
}

#[test]
fn every_fixture_report_is_consistent() {
    for name in FIXTURE_NAMES {
        let r = report_for(name);
        assert!(
            check_consistency(&r).is_empty(),
            "{name}: {:?}",
            check_consistency(&r)
        );
        assert_eq!(report_from_json(&report_to_json(&r)).unwrap(), r, "{name}");
    }
}

#[test]
fn tampered_overhead_is_flagged() {
    let mut r = report_for("inf2-150pods");
    let o = r.lifecycle[0].readiness_overhead.as_mut().unwrap();
    o.pct += 0.1;
    assert!(!check_consistency(&r).is_empty());
}

#[test]
fn tampered_share_is_flagged() {
    let mut r = report_for("fig4b");
    r.phases[0].phases[0].share_pct += 1.0;
    assert!(!check_consistency(&r).is_empty());
}

#[test]
fn csv_output_is_stable() {
    let r = report_for("table4");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = emit_csv(&r, a.path()).unwrap();
    let fb = emit_csv(&r, b.path()).unwrap();
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_campaigns_give_consistent_reports(
        seed in any::<u64>(),
        batch in 1u32..60,
        reps in 1u32..4,
        jitter in 0.0f64..0.3,
    ) {
        let mut spec = fixture("inf2-150pods").unwrap().spec;
        spec.seed = seed;
        spec.workload = WorkloadSpec::PauseBatch { batch_size: batch };
        spec.scale_points = vec![batch];
        spec.repetitions = reps;
        for n in spec.treatment.cluster.nodes.iter_mut() {
            n.jitter_rel = jitter;
        }
        let data = execute_simulated(&spec).unwrap();
        let r = build_report(&spec, &data, None).unwrap();
        prop_assert!(check_consistency(&r).is_empty());
        let row = &r.lifecycle[0];
        let o = row.readiness_overhead.as_ref().unwrap();
        prop_assert_eq!(o.pct, round_half_away(o.raw_pct, 1));
        prop_assert!(row.treatment.as_ref().unwrap().readiness_s.min
            <= row.treatment.as_ref().unwrap().readiness_s.p95);
    }
}

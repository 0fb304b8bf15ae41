//! Acceptance criteria. Prints one PASS/FAIL line per criterion, followed by
//! the failing sub-checks, and exits nonzero if any criterion fails.

#![allow(clippy::approx_constant)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use edgebench_core::cam::{
    parse_cam, serialize_cam, validate_cam, CamManifest, CamService, PerformanceProfile, QosClass,
    ServiceChannel, ServiceClass,
};
use edgebench_core::fixtures::fixture;
use edgebench_core::metrics::{
    aggregate_stats, compute_mip, compute_overhead, daily_energy, estimate_power, PowerModelParams,
};
use edgebench_core::model::{
    ActionEntry, ActionLedger, ActionMode, DeploymentPhase, ExperimentSpec, PhaseId,
};
use edgebench_core::probes::{execute_simulated, measure_pod_batch};
use edgebench_core::report::{build_report, check_consistency, report_from_json, KpiReport};
use edgebench_core::sim::open_session;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_edgebench");

type Criterion = (&'static str, fn() -> Checks);

const MIP_TOL: f64 = 0.0;
const WATT_TOL: f64 = 0.15;
const SUM_TOL: f64 = 0.2;
const ENERGY_TOL: f64 = 0.01;
const PHASE_SUM_TOL: f64 = 1e-9;
const SHARE_TOL_PP: f64 = 0.2;
const READINESS_REL_TOL: f64 = 0.02;
const STATS_REL_TOL: f64 = 1e-12;

#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    count: usize,
}

impl Checks {
    fn ok(&mut self, cond: bool, what: impl Into<String>) {
        self.count += 1;
        if !cond {
            self.failures.push(what.into());
        }
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.ok(
            (got - want).abs() <= tol,
            format!("{what}: got {got}, want {want} ± {tol}"),
        );
    }

    fn runtime(&mut self, started: Instant, limit_s: u64) {
        let took = started.elapsed();
        self.ok(
            took < Duration::from_secs(limit_s),
            format!("runtime {:.2}s exceeds {limit_s}s", took.as_secs_f64()),
        );
    }
}

fn ledger(counts: &[(DeploymentPhase, usize, usize)]) -> ActionLedger {
    let mut entries = Vec::new();
    for (phase, manual, automated) in counts {
        for i in 0..manual + automated {
            entries.push(ActionEntry {
                phase: *phase,
                action_id: format!("{phase}-{i}"),
                description: format!("step {i}"),
                mode: if i < *manual {
                    ActionMode::Manual
                } else {
                    ActionMode::Automated
                },
            });
        }
    }
    ActionLedger {
        label: "x".into(),
        entries,
        reference_mip: BTreeMap::new(),
    }
}

fn criterion_1() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    use DeploymentPhase::*;
    let baseline = ledger(&[
        (ClusterDeployment, 19, 0),
        (K8sInstallation, 42, 0),
        (ServiceDeployment, 11, 0),
    ]);
    let mut treatment = ledger(&[
        (ClusterDeployment, 3, 16),
        (K8sInstallation, 4, 38),
        (ServiceDeployment, 2, 9),
    ]);
    treatment.reference_mip.insert(ClusterDeployment, 25.3);
    for (phase, want) in [
        (K8sInstallation, 9.52),
        (ServiceDeployment, 18.18),
        (ClusterDeployment, 15.79),
    ] {
        match compute_mip(&treatment, &baseline, phase) {
            Ok(m) => c.near(&format!("mip {phase}"), m.mip_pct, want, MIP_TOL),
            Err(e) => c.ok(false, format!("mip {phase}: {e}")),
        }
    }
    let cd = compute_mip(&treatment, &baseline, ClusterDeployment).ok();
    let note = cd.and_then(|m| m.note).unwrap_or_default();
    c.ok(
        note.contains("25.3") && note.contains("15.79"),
        format!("cluster-deployment discrepancy note missing or incomplete: `{note}`"),
    );

    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["fixtures", "table3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    c.ok(out.status.success(), "fixtures table3 failed");
    let out = Command::new(BIN)
        .arg("mip")
        .arg("--treatment")
        .arg(dir.path().join("treatment-ledger.csv"))
        .arg("--baseline")
        .arg(dir.path().join("baseline-ledger.csv"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    c.ok(out.status.success(), "mip command failed");
    for row in [
        "k8s-installation,4,42,9.52",
        "service-deployment,2,11,18.18",
        "cluster-deployment,3,19,15.79",
    ] {
        c.ok(stdout.contains(row), format!("mip output lacks `{row}`"));
    }
    c.runtime(started, 1);
    c
}

fn criterion_2() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let t4 = PowerModelParams::new(35.0, 95.0);
    // (cpu %, mem GB, printed W) per node, K8s then CODECO.
    let table4 = [
        [(1.76, 1.15, 36.3), (1.10, 0.99, 35.8), (0.69, 0.57, 35.5)],
        [(4.66, 3.14, 38.3), (3.81, 2.92, 37.8), (2.30, 1.22, 36.6)],
    ];
    let sums = [107.6, 112.7];
    let energies = [2.58, 2.70];
    let mut totals = Vec::new();
    for (arm, rows) in table4.iter().enumerate() {
        let mut total = 0.0;
        for (i, (cpu, mem, want)) in rows.iter().enumerate() {
            let p = estimate_power(cpu / 100.0, *mem, &t4).unwrap();
            c.near(
                &format!("table4 arm {arm} node {i} watts"),
                p,
                *want,
                WATT_TOL,
            );
            total += p;
        }
        c.near(
            &format!("table4 arm {arm} cluster watts"),
            total,
            sums[arm],
            SUM_TOL,
        );
        c.near(
            &format!("table4 arm {arm} kWh/day"),
            daily_energy(total),
            energies[arm],
            ENERGY_TOL,
        );
        totals.push(total);
    }

    let t5 = PowerModelParams::new(60.0, 165.0);
    let table5 = [
        ((0.6, 4.91, 61.6), (2.3, 12.18, 64.9)),
        ((1.8, 4.98, 62.9), (2.9, 12.92, 65.6)),
        ((2.4, 5.42, 63.6), (4.2, 14.88, 67.4)),
        ((3.1, 6.28, 64.5), (7.5, 17.70, 71.4)),
    ];
    let mut largest = (0.0, 0.0);
    for (i, (k, cd)) in table5.iter().enumerate() {
        let pk = estimate_power(k.0 / 100.0, k.1, &t5).unwrap();
        let pc = estimate_power(cd.0 / 100.0, cd.1, &t5).unwrap();
        c.near(&format!("table5 row {i} kind watts"), pk, k.2, WATT_TOL);
        c.near(&format!("table5 row {i} codeco watts"), pc, cd.2, WATT_TOL);
        largest = (pk, pc);
    }
    c.near(
        "table5 kind kWh/day",
        daily_energy(largest.0),
        1.55,
        ENERGY_TOL,
    );
    c.near(
        "table5 codeco kWh/day",
        daily_energy(largest.1),
        1.71,
        ENERGY_TOL,
    );

    let report = fixture_report("table4");
    let row = &report.footprint[0];
    for (arm, want) in [
        (row.baseline.as_ref(), totals[0]),
        (row.treatment.as_ref(), totals[1]),
    ] {
        let got = arm.map(|a| a.total_power_w).unwrap_or(f64::NAN);
        c.ok(
            (got - want).abs() < 1e-9,
            format!("table4 pipeline total {got} differs from {want}"),
        );
    }
    c.runtime(started, 1);
    c
}

fn fixture_report(name: &str) -> KpiReport {
    let f = fixture(name).unwrap();
    let data = execute_simulated(&f.spec).unwrap();
    build_report(&f.spec, &data, None).unwrap()
}

fn criterion_3() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let fig4a = fixture_report("fig4a");
    for (nodes, want) in [(3, 532.3), (9, 1023.7)] {
        match fig4a.phases.iter().find(|r| r.node_count == nodes) {
            Some(row) => {
                c.near(
                    &format!("fig4a total at {nodes} nodes"),
                    row.total_s.avg,
                    want,
                    PHASE_SUM_TOL,
                );
                let sum: f64 = row.phases.iter().map(|p| p.duration_s.avg).sum();
                c.near(
                    &format!("fig4a phase sum at {nodes} nodes"),
                    sum,
                    want,
                    PHASE_SUM_TOL,
                );
            }
            None => c.ok(false, format!("fig4a has no {nodes}-node row")),
        }
    }
    let fig4b = fixture_report("fig4b");
    for (nodes, want) in [(3, 33.7), (9, 40.5)] {
        let share = fig4b
            .phases
            .iter()
            .find(|r| r.node_count == nodes)
            .and_then(|r| {
                r.phases
                    .iter()
                    .find(|p| p.phase == PhaseId::Component("NetMA".into()))
            })
            .map(|p| p.share_raw_pct);
        match share {
            Some(s) => c.near(
                &format!("NetMA share at {nodes} nodes"),
                s,
                want,
                SHARE_TOL_PP,
            ),
            None => c.ok(false, format!("fig4b lacks NetMA at {nodes} nodes")),
        }
    }
    c.runtime(started, 5);
    c
}

fn criterion_4() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    for (t, b, want) in [
        (57.11, 37.73, 51.4),
        (112.7, 107.6, 4.7),
        (71.4, 64.5, 10.7),
    ] {
        let got = compute_overhead(t, b).unwrap();
        c.ok(
            got == want,
            format!("overhead {t} vs {b}: got {got}, want {want}"),
        );
    }
    c.runtime(started, 1);
    c
}

fn criterion_5() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let cluster = fixture("inf2-150pods").unwrap().spec.treatment.cluster;
    for seed in 0..100u64 {
        for batch in [1u32, 10, 50, 150] {
            let mut s = open_session(&cluster, seed).unwrap();
            let m = match measure_pod_batch(&mut s, batch) {
                Ok(m) => m,
                Err(e) => {
                    c.ok(false, format!("seed {seed} batch {batch}: {e}"));
                    continue;
                }
            };
            let scheduled: Vec<_> = m.pod_ids.iter().map(|id| s.scheduled_latency(id)).collect();
            let measured: Vec<_> = m.readiness_ns.iter().map(|n| Some(*n)).collect();
            c.ok(
                m.pod_ids.len() == batch as usize && scheduled == measured,
                format!("seed {seed} batch {batch}: readiness differs from schedule"),
            );
            c.ok(
                Some(m.makespan_ns) == m.readiness_ns.iter().copied().max(),
                format!("seed {seed} batch {batch}: makespan is not the maximum"),
            );
        }
    }
    c.runtime(started, 30);
    c
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn criterion_6() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for v in 0..1000 {
        let n: usize = if v % 4 == 0 {
            rng.gen_range(1..=10_000)
        } else {
            rng.gen_range(1..=500)
        };
        // Values k / 1024 keep integer oracles exact.
        let hi: i64 = 1 << rng.gen_range(1..30);
        let ks: Vec<i64> = (0..n).map(|_| rng.gen_range(0..hi)).collect();
        let xs: Vec<f64> = ks.iter().map(|k| *k as f64 / 1024.0).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let s1: i128 = ks.iter().map(|k| i128::from(*k)).sum();
        let s2: i128 = ks.iter().map(|k| i128::from(*k).pow(2)).sum();
        let nn = n as i128;
        let mean = s1 as f64 / n as f64 / 1024.0;
        let stdev = if n > 1 {
            ((nn * s2 - s1 * s1) as f64 / (nn * (nn - 1)) as f64).sqrt() / 1024.0
        } else {
            0.0
        };
        let p95 = sorted[(95 * n).div_ceil(100) - 1];
        let Ok(s) = aggregate_stats(&xs) else {
            c.ok(false, format!("vector {v}: aggregate_stats failed"));
            continue;
        };
        c.ok(
            s.min.to_bits() == sorted[0].to_bits(),
            format!("vector {v}: min"),
        );
        c.ok(
            s.max.to_bits() == sorted[n - 1].to_bits(),
            format!("vector {v}: max"),
        );
        c.ok(
            s.p95.to_bits() == p95.to_bits(),
            format!("vector {v}: p95 {} vs {p95}", s.p95),
        );
        c.ok(
            rel(s.avg, mean) <= STATS_REL_TOL,
            format!("vector {v}: avg {} vs {mean}", s.avg),
        );
        c.ok(
            rel(s.stdev, stdev) <= STATS_REL_TOL,
            format!("vector {v}: stdev {} vs {stdev}", s.stdev),
        );
    }
    c.runtime(started, 30);
    c
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..12);
    let mut s = String::new();
    s.push(rng.gen_range(b'a'..=b'z') as char);
    for _ in 1..len {
        let pool = b"abcdefghijklmnopqrstuvwxyz0123456789-";
        s.push(pool[rng.gen_range(0..pool.len())] as char);
    }
    s
}

fn free_text(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(0..16))
        .map(|_| rng.gen_range(b' '..=b'~') as char)
        .collect()
}

fn random_manifest(rng: &mut ChaCha8Rng) -> CamManifest {
    let mut services: Vec<CamService> = Vec::new();
    for _ in 0..rng.gen_range(1..6) {
        let name = word(rng);
        if services.iter().all(|s| s.name != name) {
            services.push(CamService {
                image: format!("registry.local/{}:{}", word(rng), rng.gen_range(1..9)),
                name,
                replicas: rng.gen_range(1..20),
            });
        }
    }
    let mut channels: Vec<ServiceChannel> = Vec::new();
    for _ in 0..rng.gen_range(0..8) {
        let a = rng.gen_range(0..services.len());
        let b = rng.gen_range(0..services.len());
        let (from, to) = (&services[a].name, &services[b].name);
        if a == b
            || channels
                .iter()
                .any(|c| &c.from_service == from && &c.to_service == to)
        {
            continue;
        }
        channels.push(ServiceChannel {
            from_service: from.clone(),
            to_service: to.clone(),
            service_class: if rng.gen() {
                ServiceClass::Assured
            } else {
                ServiceClass::BestEffort
            },
            bandwidth_bps: rng.gen_range(1..5_000_000_000),
            max_delay_ns: rng.gen_range(1..10_000_000_000),
        });
    }
    let opt = |rng: &mut ChaCha8Rng| rng.gen_bool(0.5).then(|| free_text(rng));
    CamManifest {
        app_name: word(rng),
        performance_profile: rng.gen_bool(0.7).then(|| {
            [
                PerformanceProfile::Performance,
                PerformanceProfile::Greenness,
                PerformanceProfile::Cost,
            ][rng.gen_range(0..3)]
            .clone()
        }),
        app_energy_limit: rng
            .gen_bool(0.5)
            .then(|| f64::from(rng.gen_range(0..100_000u32)) / 100.0),
        app_failure_tolerance: opt(rng),
        scheduler_name: word(rng),
        service_channels: channels,
        compliance_class: opt(rng),
        qos_class: rng
            .gen_bool(0.7)
            .then(|| [QosClass::Gold, QosClass::Silver, QosClass::Bronze][rng.gen_range(0..3)]),
        security_class: opt(rng),
        services,
    }
}

fn corpus(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(name);
    fs::read_to_string(path).unwrap()
}

fn criterion_7() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..200 {
        let m = random_manifest(&mut rng);
        c.ok(
            validate_cam(&m).is_empty(),
            format!("generated manifest {i} is invalid"),
        );
        let back = parse_cam(&serialize_cam(&m)).map(|p| p.manifest);
        c.ok(
            back.as_ref() == Ok(&m),
            format!("manifest {i} does not round-trip"),
        );
    }

    // (file, services, channel bandwidths, channel delays)
    let expected: [(&str, usize, &[u64], &[u64]); 5] = [
        ("acm-sample.yaml", 2, &[5_000_000], &[10_000_000]),
        (
            "bookinfo.yaml",
            4,
            &[1_000_000, 2_500_000, 500_000],
            &[50_000_000, 20_000_000, 5_000_000],
        ),
        (
            "frontend-backend.yaml",
            2,
            &[1_000_000_000, 10_000_000],
            &[250_000, 2_000_000],
        ),
        ("pause.yaml", 1, &[], &[]),
        (
            "uc-smart-parking.yaml",
            3,
            &[20_000_000, 100_000],
            &[15_000_000, 1_000_000_000],
        ),
    ];
    for (file, services, bw, delay) in expected {
        match parse_cam(&corpus(file)) {
            Ok(p) => {
                let m = p.manifest;
                let got_bw: Vec<_> = m.service_channels.iter().map(|c| c.bandwidth_bps).collect();
                let got_delay: Vec<_> = m.service_channels.iter().map(|c| c.max_delay_ns).collect();
                c.ok(
                    m.services.len() == services && got_bw == bw && got_delay == delay,
                    format!("{file}: unexpected normal form"),
                );
                c.ok(validate_cam(&m).is_empty(), format!("{file}: violations"));
            }
            Err(e) => c.ok(false, format!("{file}: {e}")),
        }
    }

    let seeds = [corpus("acm-sample.yaml"), corpus("bookinfo.yaml")];
    let result = std::panic::catch_unwind(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for i in 0..100_000 {
            let text = if i % 5 == 0 {
                let bytes: Vec<u8> = (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            } else {
                let mut bytes = seeds[i % 2].as_bytes().to_vec();
                for _ in 0..rng.gen_range(1..6) {
                    let pos = rng.gen_range(0..bytes.len().max(1));
                    match rng.gen_range(0..3) {
                        0 if !bytes.is_empty() => {
                            bytes.remove(pos);
                        }
                        1 => bytes
                            .insert(pos.min(bytes.len()), b" :-\"#\n[]{}M"[rng.gen_range(0..11)]),
                        _ => bytes.truncate(pos),
                    }
                }
                String::from_utf8_lossy(&bytes).into_owned()
            };
            let _ = parse_cam(&text);
        }
    });
    c.ok(result.is_ok(), "fuzzing crashed the parser");
    c.runtime(started, 60);
    c
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn run_spec(spec: &Path, out: &Path) -> bool {
    Command::new(BIN)
        .arg("run")
        .arg("--spec")
        .arg(spec)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_8() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    let ok = Command::new(BIN)
        .args(["fixtures", "inf2-150pods", "--out"])
        .arg(&bundle)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    c.ok(ok, "fixtures inf2-150pods failed");
    let spec = bundle.join("spec.yaml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    c.ok(run_spec(&spec, &a), "first run failed");
    c.ok(run_spec(&spec, &b), "second run failed");
    let (fa, fb) = (files_under(&a), files_under(&b));
    c.ok(!fa.is_empty() && fa == fb, "output directories differ");

    match fs::read_to_string(a.join("report.json"))
        .ok()
        .and_then(|t| report_from_json(&t).ok())
    {
        Some(report) => {
            let v = check_consistency(&report);
            c.ok(v.is_empty(), format!("consistency violations: {v:?}"));
            match report.lifecycle.iter().find(|r| r.scale == 150) {
                Some(row) => {
                    let mean = |arm: Option<&edgebench_core::report::ArmLifecycle>| {
                        arm.map(|a| a.readiness_s.avg).unwrap_or(f64::NAN)
                    };
                    let (t, b) = (mean(row.treatment.as_ref()), mean(row.baseline.as_ref()));
                    c.near(
                        "treatment mean readiness",
                        t,
                        57.11,
                        57.11 * READINESS_REL_TOL,
                    );
                    c.near(
                        "baseline mean readiness",
                        b,
                        37.73,
                        37.73 * READINESS_REL_TOL,
                    );
                }
                None => c.ok(false, "no 150-pod row"),
            }
        }
        None => c.ok(false, "report.json missing or unreadable"),
    }
    c.runtime(started, 60);
    c
}

fn capacity_100_spec() -> ExperimentSpec {
    let mut spec = fixture("inf2-150pods").unwrap().spec;
    for arm in [&mut spec.baseline, &mut spec.treatment] {
        for n in arm
            .cluster
            .nodes
            .iter_mut()
            .filter(|n| n.name.starts_with("jetson"))
        {
            n.cpu_cores = 5;
        }
    }
    spec
}

fn criterion_9() -> Checks {
    let started = Instant::now();
    let mut c = Checks::default();
    let spec = capacity_100_spec();
    match execute_simulated(&spec) {
        Ok(data) => {
            let expected = spec.scale_points.len() * spec.repetitions as usize * 2;
            c.ok(
                data.runs.len() == expected,
                format!("{} runs, want {expected}", data.runs.len()),
            );
            for r in &data.runs {
                c.ok(
                    r.failed() == (r.scale > 100),
                    format!(
                        "scale {} rep {} {}: failed = {}",
                        r.scale,
                        r.repetition,
                        r.label,
                        r.failed()
                    ),
                );
            }
            match build_report(&spec, &data, None) {
                Ok(report) => {
                    c.ok(check_consistency(&report).is_empty(), "report inconsistent");
                    c.ok(
                        report.failures.len() == spec.repetitions as usize * 2
                            && report.failures.iter().all(|f| f.scale == 150),
                        "failure notes do not match the oversized cells",
                    );
                }
                Err(e) => c.ok(false, format!("report: {e}")),
            }
        }
        Err(e) => c.ok(false, format!("campaign did not complete: {e}")),
    }
    c.runtime(started, 10);
    c
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("MIP exactness", criterion_1),
        ("power-model reproduction", criterion_2),
        ("phase-decomposition consistency", criterion_3),
        ("overhead arithmetic", criterion_4),
        ("probe/simulator oracle equivalence", criterion_5),
        ("statistics oracle", criterion_6),
        ("CAM round-trip", criterion_7),
        ("end-to-end determinism", criterion_8),
        ("capacity failure mode", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let checks = run();
        let verdict = if checks.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "criterion {}: {name}: {verdict} ({}/{} checks)",
            i + 1,
            checks.count - checks.failures.len(),
            checks.count
        );
        for f in &checks.failures {
            println!("    {f}");
        }
        if !checks.failures.is_empty() {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! KPI reports: lifecycle statistics per scale, phase shares, MIP rows and
//! resource footprints, with consistency checks and file emitters.
//!
//! Every derived number is recomputed from measurements. CSV output rounds
//! half away from zero:
//!
//! | quantity                   | decimals |
//! |----------------------------|----------|
//! | seconds                    | 3        |
//! | shares, overheads (%)      | 1        |
//! | MIP (%)                    | 2        |
//! | CPU utilization (%)        | 2        |
//! | memory (GB), power (W)     | 3        |
//! | energy (kWh/day)           | 4        |
//!
//! `report.json` carries the unrounded values.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    aggregate_stats, compute_overhead, daily_energy, estimate_power, mean_over_window, mip_table,
    overhead_raw, round_half_away, MipResult, PowerModelParams,
};
use crate::model::{
    ActionLedger, ArmRole, DeploymentPhase, ExperimentSpec, PhaseId, StatsSummary, Violation,
    WorkloadKind, TIMELINE_TOLERANCE_S,
};
use crate::probes::{CampaignData, RunRecord};

pub const SCHEMA_VERSION: u32 = 1;
pub const SHARE_TOLERANCE_PP: f64 = 0.2;

const SECONDS: u32 = 3;
const PERCENT: u32 = 1;
const MIP: u32 = 2;
const CPU_PCT: u32 = 2;
const GB: u32 = 3;
const WATTS: u32 = 3;
const KWH: u32 = 4;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: no runs, phases or footprint samples")]
    Empty,
    #[error("{0}")]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// A baseline/treatment comparison of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overhead {
    pub baseline: f64,
    pub treatment: f64,
    pub raw_pct: f64,
    pub pct: f64,
}

impl Overhead {
    fn between(baseline: f64, treatment: f64) -> Option<Self> {
        Some(Self {
            baseline,
            treatment,
            raw_pct: overhead_raw(treatment, baseline).ok()?,
            pct: compute_overhead(treatment, baseline).ok()?,
        })
    }
}

/// Statistics over the completed runs of one arm at one scale. Each run
/// contributes its batch-average (or makespan) value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmLifecycle {
    pub runs: u64,
    pub readiness_s: StatsSummary,
    pub readiness_makespan_s: StatsSummary,
    pub deletion_s: StatsSummary,
    pub deletion_makespan_s: StatsSummary,
    pub service_startup_s: Option<StatsSummary>,
    pub service_deletion_s: Option<StatsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleRow {
    pub scale: u32,
    pub baseline: Option<ArmLifecycle>,
    pub treatment: Option<ArmLifecycle>,
    pub readiness_overhead: Option<Overhead>,
    pub deletion_overhead: Option<Overhead>,
    pub service_startup_overhead: Option<Overhead>,
    pub service_deletion_overhead: Option<Overhead>,
    /// Set when only one arm has completed runs at this scale.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShare {
    pub phase: PhaseId,
    pub duration_s: StatsSummary,
    pub share_raw_pct: f64,
    pub share_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub node_count: u32,
    pub phases: Vec<PhaseShare>,
    pub total_s: StatsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipRow {
    pub phase: DeploymentPhase,
    pub result: Option<MipResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFootprint {
    pub node: String,
    pub cpu_util: f64,
    pub mem_gb: f64,
    pub power_w: f64,
    pub energy_kwh_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmFootprint {
    pub arm: ArmRole,
    pub label: String,
    pub nodes: Vec<NodeFootprint>,
    pub total_power_w: f64,
    pub total_energy_kwh_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintRow {
    pub config: String,
    pub baseline: Option<ArmFootprint>,
    pub treatment: Option<ArmFootprint>,
    pub power_overhead: Option<Overhead>,
    pub energy_overhead: Option<Overhead>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub scale: u32,
    pub repetition: u32,
    pub arm: ArmRole,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub schema: u32,
    pub experiment_id: String,
    pub workload: WorkloadKind,
    pub baseline_label: String,
    pub treatment_label: String,
    pub lifecycle: Vec<LifecycleRow>,
    pub phases: Vec<PhaseRow>,
    pub mip: Vec<MipRow>,
    pub footprint: Vec<FootprintRow>,
    pub failures: Vec<FailureNote>,
}

fn stats_of(values: &[f64]) -> Option<StatsSummary> {
    aggregate_stats(values).ok()
}

fn arm_lifecycle(runs: &[&RunRecord]) -> Option<ArmLifecycle> {
    let done: Vec<_> = runs
        .iter()
        .filter(|r| !r.failed())
        .filter_map(|r| r.batch.as_ref().map(|b| (b, r.service.as_ref())))
        .collect();
    if done.is_empty() {
        return None;
    }
    let col = |f: &dyn Fn(&crate::probes::BatchMeasurement) -> Option<f64>| {
        done.iter().filter_map(|(b, _)| f(b)).collect::<Vec<_>>()
    };
    let services: Vec<_> = done.iter().filter_map(|(_, s)| *s).collect();
    let service_col = |f: &dyn Fn(&crate::probes::ServiceMeasurement) -> f64| {
        (services.len() == done.len())
            .then(|| stats_of(&services.iter().map(|s| f(s)).collect::<Vec<_>>()))
            .flatten()
    };
    Some(ArmLifecycle {
        runs: done.len() as u64,
        readiness_s: stats_of(&col(&|b| b.mean_readiness_s()))?,
        readiness_makespan_s: stats_of(&col(&|b| Some(b.makespan_s())))?,
        deletion_s: stats_of(&col(&|b| b.mean_deletion_s()))?,
        deletion_makespan_s: stats_of(&col(&|b| Some(b.deletion_makespan_s())))?,
        service_startup_s: service_col(&|s| s.startup_s()),
        service_deletion_s: service_col(&|s| s.deletion_s()),
    })
}

fn compare(
    b: Option<&ArmLifecycle>,
    t: Option<&ArmLifecycle>,
    f: impl Fn(&ArmLifecycle) -> Option<&StatsSummary>,
) -> Option<Overhead> {
    Overhead::between(f(b?)?.avg, f(t?)?.avg)
}

fn lifecycle_rows(spec: &ExperimentSpec, runs: &[RunRecord]) -> Vec<LifecycleRow> {
    let mut scales: Vec<u32> = runs.iter().map(|r| r.scale).collect();
    scales.sort_unstable();
    scales.dedup();
    scales
        .into_iter()
        .map(|scale| {
            let pick = |arm| {
                runs.iter()
                    .filter(|r| r.scale == scale && r.arm == arm)
                    .collect::<Vec<_>>()
            };
            let baseline = arm_lifecycle(&pick(ArmRole::Baseline));
            let treatment = arm_lifecycle(&pick(ArmRole::Treatment));
            let note = match (&baseline, &treatment) {
                (Some(_), None) => Some(format!(
                    "no completed {} runs; baseline reported alone",
                    spec.treatment.label
                )),
                (None, Some(_)) => Some(format!(
                    "no completed {} runs; treatment reported alone",
                    spec.baseline.label
                )),
                (None, None) => Some("no completed runs in either arm".to_string()),
                _ => None,
            };
            let (b, t) = (baseline.as_ref(), treatment.as_ref());
            LifecycleRow {
                scale,
                readiness_overhead: compare(b, t, |a| Some(&a.readiness_s)),
                deletion_overhead: compare(b, t, |a| Some(&a.deletion_s)),
                service_startup_overhead: compare(b, t, |a| a.service_startup_s.as_ref()),
                service_deletion_overhead: compare(b, t, |a| a.service_deletion_s.as_ref()),
                baseline,
                treatment,
                note,
            }
        })
        .collect()
}

fn phase_rows(data: &CampaignData) -> Vec<PhaseRow> {
    let mut by_nodes: BTreeMap<u32, Vec<&crate::model::PhaseTimeline>> = BTreeMap::new();
    for run in &data.phases {
        by_nodes
            .entry(run.node_count)
            .or_default()
            .push(&run.timeline);
    }
    by_nodes
        .into_iter()
        .filter_map(|(node_count, timelines)| {
            let order: Vec<PhaseId> = timelines[0]
                .phases
                .iter()
                .map(|p| p.phase.clone())
                .collect();
            let total_s = stats_of(&timelines.iter().map(|t| t.total_s).collect::<Vec<_>>())?;
            let phases = order
                .into_iter()
                .map(|phase| {
                    let durations: Vec<f64> = timelines
                        .iter()
                        .filter_map(|t| t.duration_s(&phase))
                        .collect();
                    let duration_s = stats_of(&durations)?;
                    let share_raw_pct = if total_s.avg > 0.0 {
                        duration_s.avg / total_s.avg * 100.0
                    } else {
                        0.0
                    };
                    Some(PhaseShare {
                        phase,
                        duration_s,
                        share_raw_pct,
                        share_pct: round_half_away(share_raw_pct, PERCENT),
                    })
                })
                .collect::<Option<Vec<_>>>()?;
            Some(PhaseRow {
                node_count,
                phases,
                total_s,
            })
        })
        .collect()
}

fn footprint_rows(
    spec: &ExperimentSpec,
    data: &CampaignData,
) -> Result<Vec<FootprintRow>, ReportError> {
    let mut rows: Vec<FootprintRow> = Vec::new();
    for run in &data.footprint {
        let cluster = &spec.arm(run.arm).cluster;
        let mut nodes = Vec::new();
        for series in &run.series {
            let Some(profile) = cluster.node(&series.node) else {
                continue;
            };
            let (cpu_util, mem_gb) = mean_over_window(series)?;
            let power_w = estimate_power(cpu_util, mem_gb, &PowerModelParams::for_node(profile))?;
            nodes.push(NodeFootprint {
                node: series.node.clone(),
                cpu_util,
                mem_gb,
                power_w,
                energy_kwh_day: daily_energy(power_w),
            });
        }
        let total_power_w: f64 = nodes.iter().map(|n| n.power_w).sum();
        let arm = ArmFootprint {
            arm: run.arm,
            label: run.label.clone(),
            nodes,
            total_power_w,
            total_energy_kwh_day: daily_energy(total_power_w),
        };
        let idx = match rows.iter().position(|r| r.config == run.config) {
            Some(i) => i,
            None => {
                rows.push(FootprintRow {
                    config: run.config.clone(),
                    baseline: None,
                    treatment: None,
                    power_overhead: None,
                    energy_overhead: None,
                });
                rows.len() - 1
            }
        };
        match run.arm {
            ArmRole::Baseline => rows[idx].baseline = Some(arm),
            ArmRole::Treatment => rows[idx].treatment = Some(arm),
        }
    }
    for row in &mut rows {
        if let (Some(b), Some(t)) = (&row.baseline, &row.treatment) {
            row.power_overhead = Overhead::between(b.total_power_w, t.total_power_w);
            row.energy_overhead = Overhead::between(b.total_energy_kwh_day, t.total_energy_kwh_day);
        }
    }
    Ok(rows)
}

/// Both ledgers of a MIP comparison.
pub struct LedgerPair<'a> {
    pub treatment: &'a ActionLedger,
    pub baseline: &'a ActionLedger,
}

/// Assembles a report from raw measurements. Derived values (means,
/// shares, overheads, power) are computed here, never copied.
pub fn build_report(
    spec: &ExperimentSpec,
    data: &CampaignData,
    ledgers: Option<LedgerPair<'_>>,
) -> Result<KpiReport, ReportError> {
    if data.runs.is_empty() && data.phases.is_empty() && data.footprint.is_empty() {
        return Err(ReportError::Empty);
    }
    let mip = ledgers
        .map(|l| {
            mip_table(l.treatment, l.baseline)
                .into_iter()
                .map(|(phase, r)| match r {
                    Ok(result) => MipRow {
                        phase,
                        result: Some(result),
                        error: None,
                    },
                    Err(e) => MipRow {
                        phase,
                        result: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect()
        })
        .unwrap_or_default();
    let failures = data
        .runs
        .iter()
        .filter_map(|r| {
            Some(FailureNote {
                scale: r.scale,
                repetition: r.repetition,
                arm: r.arm,
                label: r.label.clone(),
                reason: r.failure.clone()?,
            })
        })
        .collect();
    Ok(KpiReport {
        schema: SCHEMA_VERSION,
        experiment_id: spec.id.clone(),
        workload: spec.workload.kind(),
        baseline_label: spec.baseline.label.clone(),
        treatment_label: spec.treatment.label.clone(),
        lifecycle: lifecycle_rows(spec, &data.runs),
        phases: phase_rows(data),
        mip,
        footprint: footprint_rows(spec, data)?,
        failures,
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn check_overhead(path: &str, o: &Overhead, out: &mut Vec<Violation>) {
    match overhead_raw(o.treatment, o.baseline) {
        Ok(raw) if close(raw, o.raw_pct, 1e-9) => {}
        _ => out.push(Violation::new(
            path,
            "overhead equals recomputation from operands",
        )),
    }
    if o.pct != round_half_away(o.raw_pct, PERCENT) {
        out.push(Violation::new(
            path,
            "displayed overhead is the rounded raw overhead",
        ));
    }
}

fn check_operands(
    path: &str,
    o: Option<&Overhead>,
    b: Option<f64>,
    t: Option<f64>,
    out: &mut Vec<Violation>,
) {
    if let Some(o) = o {
        check_overhead(path, o, out);
        if b != Some(o.baseline) || t != Some(o.treatment) {
            out.push(Violation::new(path, "overhead operands are the arm means"));
        }
    }
}

type StatPick = fn(&ArmLifecycle) -> Option<&StatsSummary>;

/// Identities every report must satisfy. Empty means consistent.
pub fn check_consistency(report: &KpiReport) -> Vec<Violation> {
    let mut out = Vec::new();
    if report.schema != SCHEMA_VERSION {
        out.push(Violation::new(
            "schema",
            format!("schema == {SCHEMA_VERSION}"),
        ));
    }
    for row in &report.lifecycle {
        let p = format!("lifecycle[scale={}]", row.scale);
        for (name, arm) in [("baseline", &row.baseline), ("treatment", &row.treatment)] {
            if let Some(a) = arm {
                for (field, s) in [
                    ("readiness_s", Some(&a.readiness_s)),
                    ("readiness_makespan_s", Some(&a.readiness_makespan_s)),
                    ("deletion_s", Some(&a.deletion_s)),
                    ("deletion_makespan_s", Some(&a.deletion_makespan_s)),
                    ("service_startup_s", a.service_startup_s.as_ref()),
                    ("service_deletion_s", a.service_deletion_s.as_ref()),
                ] {
                    if let Some(s) = s {
                        out.extend(s.violations(&format!("{p}.{name}.{field}")));
                    }
                }
            }
        }
        let avg = |a: &Option<ArmLifecycle>, f: fn(&ArmLifecycle) -> Option<&StatsSummary>| {
            a.as_ref().and_then(f).map(|s| s.avg)
        };
        let pairs: [(&str, &Option<Overhead>, StatPick); 4] = [
            ("readiness_overhead", &row.readiness_overhead, |a| {
                Some(&a.readiness_s)
            }),
            ("deletion_overhead", &row.deletion_overhead, |a| {
                Some(&a.deletion_s)
            }),
            (
                "service_startup_overhead",
                &row.service_startup_overhead,
                |a| a.service_startup_s.as_ref(),
            ),
            (
                "service_deletion_overhead",
                &row.service_deletion_overhead,
                |a| a.service_deletion_s.as_ref(),
            ),
        ];
        for (name, o, f) in pairs {
            check_operands(
                &format!("{p}.{name}"),
                o.as_ref(),
                avg(&row.baseline, f),
                avg(&row.treatment, f),
                &mut out,
            );
        }
    }
    for row in &report.phases {
        let p = format!("phases[nodes={}]", row.node_count);
        let sum: f64 = row.phases.iter().map(|s| s.duration_s.avg).sum();
        if (sum - row.total_s.avg).abs() > TIMELINE_TOLERANCE_S {
            out.push(Violation::new(
                &p,
                format!("phase means sum to total ({sum} vs {})", row.total_s.avg),
            ));
        }
        let shares: f64 = row.phases.iter().map(|s| s.share_raw_pct).sum();
        if !row.phases.is_empty() && (shares - 100.0).abs() > SHARE_TOLERANCE_PP {
            out.push(Violation::new(
                &p,
                format!("shares sum to 100% +/- {SHARE_TOLERANCE_PP} pp (got {shares})"),
            ));
        }
        for s in &row.phases {
            if s.share_pct != round_half_away(s.share_raw_pct, PERCENT) {
                out.push(Violation::new(
                    format!("{p}.{}", s.phase),
                    "displayed share is the rounded raw share",
                ));
            }
        }
    }
    for row in &report.mip {
        if let Some(r) = &row.result {
            let p = format!("mip[{}]", row.phase);
            if r.k_a == 0 {
                out.push(Violation::new(&p, "k_a >= 1"));
                continue;
            }
            let raw = r.c_a as f64 / r.k_a as f64 * 100.0;
            if !close(raw, r.mip_raw, 1e-12) || r.mip_pct != round_half_away(raw, MIP) {
                out.push(Violation::new(&p, "mip equals 100 * c_a / k_a"));
            }
        }
    }
    for row in &report.footprint {
        let p = format!("footprint[{}]", row.config);
        for arm in [&row.baseline, &row.treatment].into_iter().flatten() {
            let ap = format!("{p}.{}", arm.arm);
            let sum: f64 = arm.nodes.iter().map(|n| n.power_w).sum();
            if (sum - arm.total_power_w).abs() > 1e-9 {
                out.push(Violation::new(
                    &ap,
                    "cluster power equals sum of node estimates",
                ));
            }
            if (daily_energy(arm.total_power_w) - arm.total_energy_kwh_day).abs() > 1e-9 {
                out.push(Violation::new(
                    &ap,
                    "cluster energy equals daily energy of cluster power",
                ));
            }
            for n in &arm.nodes {
                if (daily_energy(n.power_w) - n.energy_kwh_day).abs() > 1e-9 {
                    out.push(Violation::new(
                        format!("{ap}.{}", n.node),
                        "node energy equals daily energy of node power",
                    ));
                }
            }
        }
        let totals = |f: fn(&ArmFootprint) -> f64| {
            (row.baseline.as_ref().map(f), row.treatment.as_ref().map(f))
        };
        let (b, t) = totals(|a| a.total_power_w);
        check_operands(
            &format!("{p}.power_overhead"),
            row.power_overhead.as_ref(),
            b,
            t,
            &mut out,
        );
        let (b, t) = totals(|a| a.total_energy_kwh_day);
        check_operands(
            &format!("{p}.energy_overhead"),
            row.energy_overhead.as_ref(),
            b,
            t,
            &mut out,
        );
    }
    out
}

fn fixed(v: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_away(v, decimals))
}

fn opt_fixed(v: Option<f64>, decimals: u32) -> String {
    v.map(|v| fixed(v, decimals)).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, ReportError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn lifecycle_csv(report: &KpiReport) -> Vec<Vec<String>> {
    type Metric = (
        &'static str,
        fn(&ArmLifecycle) -> Option<&StatsSummary>,
        fn(&LifecycleRow) -> Option<&Overhead>,
    );
    let metrics: [Metric; 6] = [
        (
            "readiness_mean",
            |a| Some(&a.readiness_s),
            |r| r.readiness_overhead.as_ref(),
        ),
        (
            "readiness_makespan",
            |a| Some(&a.readiness_makespan_s),
            |_| None,
        ),
        (
            "deletion_mean",
            |a| Some(&a.deletion_s),
            |r| r.deletion_overhead.as_ref(),
        ),
        (
            "deletion_makespan",
            |a| Some(&a.deletion_makespan_s),
            |_| None,
        ),
        (
            "service_startup",
            |a| a.service_startup_s.as_ref(),
            |r| r.service_startup_overhead.as_ref(),
        ),
        (
            "service_deletion",
            |a| a.service_deletion_s.as_ref(),
            |r| r.service_deletion_overhead.as_ref(),
        ),
    ];
    let mut rows = Vec::new();
    for row in &report.lifecycle {
        for (metric, stat, overhead) in metrics {
            for (role, label, arm) in [
                (ArmRole::Baseline, &report.baseline_label, &row.baseline),
                (ArmRole::Treatment, &report.treatment_label, &row.treatment),
            ] {
                let Some(a) = arm else { continue };
                let Some(s) = stat(a) else { continue };
                let o = (role == ArmRole::Treatment)
                    .then(|| overhead(row).map(|o| o.raw_pct))
                    .flatten();
                rows.push(vec![
                    row.scale.to_string(),
                    metric.to_string(),
                    role.to_string(),
                    label.clone(),
                    s.n.to_string(),
                    fixed(s.min, SECONDS),
                    fixed(s.max, SECONDS),
                    fixed(s.avg, SECONDS),
                    fixed(s.p95, SECONDS),
                    fixed(s.stdev, SECONDS),
                    opt_fixed(o, PERCENT),
                ]);
            }
        }
        if let Some(note) = &row.note {
            rows.push(vec![
                row.scale.to_string(),
                "note".into(),
                String::new(),
                String::new(),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                note.clone(),
            ]);
        }
    }
    rows
}

fn phases_csv(report: &KpiReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for row in &report.phases {
        for s in &row.phases {
            rows.push(vec![
                row.node_count.to_string(),
                s.phase.to_string(),
                s.duration_s.n.to_string(),
                fixed(s.duration_s.avg, SECONDS),
                fixed(s.duration_s.stdev, SECONDS),
                fixed(s.share_raw_pct, PERCENT),
            ]);
        }
        rows.push(vec![
            row.node_count.to_string(),
            "total".into(),
            row.total_s.n.to_string(),
            fixed(row.total_s.avg, SECONDS),
            fixed(row.total_s.stdev, SECONDS),
            fixed(100.0, PERCENT),
        ]);
    }
    rows
}

fn mip_csv(report: &KpiReport) -> Vec<Vec<String>> {
    report
        .mip
        .iter()
        .map(|row| match &row.result {
            Some(r) => vec![
                row.phase.to_string(),
                r.c_a.to_string(),
                r.k_a.to_string(),
                fixed(r.mip_raw, MIP),
                r.reference_pct.map(|v| v.to_string()).unwrap_or_default(),
                r.note.clone().unwrap_or_default(),
            ],
            None => vec![
                row.phase.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                row.error.clone().unwrap_or_default(),
            ],
        })
        .collect()
}

fn resources_csv(report: &KpiReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for row in &report.footprint {
        for arm in [&row.baseline, &row.treatment].into_iter().flatten() {
            for n in &arm.nodes {
                rows.push(vec![
                    row.config.clone(),
                    arm.arm.to_string(),
                    arm.label.clone(),
                    n.node.clone(),
                    fixed(n.cpu_util * 100.0, CPU_PCT),
                    fixed(n.mem_gb, GB),
                    fixed(n.power_w, WATTS),
                    fixed(n.energy_kwh_day, KWH),
                    String::new(),
                ]);
            }
            let overhead = (arm.arm == ArmRole::Treatment)
                .then(|| row.power_overhead.as_ref().map(|o| o.raw_pct))
                .flatten();
            rows.push(vec![
                row.config.clone(),
                arm.arm.to_string(),
                arm.label.clone(),
                "total".into(),
                String::new(),
                String::new(),
                fixed(arm.total_power_w, WATTS),
                fixed(arm.total_energy_kwh_day, KWH),
                opt_fixed(overhead, PERCENT),
            ]);
        }
    }
    rows
}

/// Writes lifecycle.csv, phases.csv, mip.csv and resources.csv, plus
/// failures.csv when any run failed.
pub fn emit_csv(report: &KpiReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = vec![
        write_file(
            dir,
            "lifecycle.csv",
            &csv_bytes(
                &[
                    "scale",
                    "metric",
                    "arm",
                    "label",
                    "n",
                    "min_s",
                    "max_s",
                    "avg_s",
                    "p95_s",
                    "stdev_s",
                    "overhead_pct",
                ],
                &lifecycle_csv(report),
            ),
        )?,
        write_file(
            dir,
            "phases.csv",
            &csv_bytes(
                &["node_count", "phase", "n", "mean_s", "stdev_s", "share_pct"],
                &phases_csv(report),
            ),
        )?,
        write_file(
            dir,
            "mip.csv",
            &csv_bytes(
                &["phase", "c_a", "k_a", "mip_pct", "reference_pct", "note"],
                &mip_csv(report),
            ),
        )?,
        write_file(
            dir,
            "resources.csv",
            &csv_bytes(
                &[
                    "config",
                    "arm",
                    "label",
                    "node",
                    "cpu_pct",
                    "mem_gb",
                    "power_w",
                    "energy_kwh_day",
                    "overhead_pct",
                ],
                &resources_csv(report),
            ),
        )?,
    ];
    if !report.failures.is_empty() {
        let rows: Vec<Vec<String>> = report
            .failures
            .iter()
            .map(|f| {
                vec![
                    f.scale.to_string(),
                    f.repetition.to_string(),
                    f.arm.to_string(),
                    f.label.clone(),
                    f.reason.clone(),
                ]
            })
            .collect();
        written.push(write_file(
            dir,
            "failures.csv",
            &csv_bytes(&["scale", "repetition", "arm", "label", "reason"], &rows),
        )?);
    }
    Ok(written)
}

/// Serializes with lexicographically sorted keys.
pub fn report_to_json(report: &KpiReport) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

pub fn report_from_json(text: &str) -> Result<KpiReport, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn emit_json(report: &KpiReport, dir: &Path) -> Result<PathBuf, ReportError> {
    write_file(dir, "report.json", report_to_json(report).as_bytes())
}

/// Figure number used for lifecycle plot files.
fn lifecycle_figure(kind: WorkloadKind) -> u32 {
    match kind {
        WorkloadKind::PauseBatch => 5,
        WorkloadKind::FrontendBackend => 6,
        WorkloadKind::MultiService => 7,
    }
}

/// Writes x/y series per figure: `fig<N>_readiness.csv` and
/// `fig<N>_deletion.csv` (scale against per-arm mean and stdev),
/// `fig4_phases.csv` (one column per phase) and `fig8_footprint.csv`.
pub fn emit_plot_data(report: &KpiReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    if !report.lifecycle.is_empty() {
        let fig = lifecycle_figure(report.workload);
        let services = report.workload == WorkloadKind::MultiService;
        let header = [
            "scale",
            "baseline_mean",
            "baseline_stdev",
            "treatment_mean",
            "treatment_stdev",
        ];
        type Pick = fn(&ArmLifecycle) -> Option<&StatsSummary>;
        let (ready, delete): (Pick, Pick) = if services {
            (
                |a| a.service_startup_s.as_ref(),
                |a| a.service_deletion_s.as_ref(),
            )
        } else {
            (|a| Some(&a.readiness_s), |a| Some(&a.deletion_s))
        };
        for (name, pick) in [("readiness", ready), ("deletion", delete)] {
            let rows: Vec<Vec<String>> = report
                .lifecycle
                .iter()
                .map(|row| {
                    let cell = |a: &Option<ArmLifecycle>| {
                        let s = a.as_ref().and_then(pick);
                        [
                            opt_fixed(s.map(|s| s.avg), SECONDS),
                            opt_fixed(s.map(|s| s.stdev), SECONDS),
                        ]
                    };
                    let [bm, bs] = cell(&row.baseline);
                    let [tm, ts] = cell(&row.treatment);
                    vec![row.scale.to_string(), bm, bs, tm, ts]
                })
                .collect();
            written.push(write_file(
                dir,
                &format!("fig{fig}_{name}.csv"),
                &csv_bytes(&header, &rows),
            )?);
        }
    }
    if !report.phases.is_empty() {
        let mut ids: Vec<PhaseId> = Vec::new();
        for row in &report.phases {
            for s in &row.phases {
                if !ids.contains(&s.phase) {
                    ids.push(s.phase.clone());
                }
            }
        }
        let mut header = vec!["node_count".to_string()];
        header.extend(ids.iter().map(|p| p.to_string()));
        header.push("total".into());
        let rows: Vec<Vec<String>> = report
            .phases
            .iter()
            .map(|row| {
                let mut r = vec![row.node_count.to_string()];
                r.extend(ids.iter().map(|id| {
                    opt_fixed(
                        row.phases
                            .iter()
                            .find(|s| &s.phase == id)
                            .map(|s| s.duration_s.avg),
                        SECONDS,
                    )
                }));
                r.push(fixed(row.total_s.avg, SECONDS));
                r
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        written.push(write_file(
            dir,
            "fig4_phases.csv",
            &csv_bytes(&header, &rows),
        )?);
    }
    if !report.footprint.is_empty() {
        let mut rows = Vec::new();
        for row in &report.footprint {
            let mut nodes: Vec<&str> = Vec::new();
            for arm in [&row.baseline, &row.treatment].into_iter().flatten() {
                for n in &arm.nodes {
                    if !nodes.contains(&n.node.as_str()) {
                        nodes.push(&n.node);
                    }
                }
            }
            for node in nodes {
                let cell = |a: &Option<ArmFootprint>| {
                    let n = a
                        .as_ref()
                        .and_then(|a| a.nodes.iter().find(|n| n.node == node));
                    [
                        opt_fixed(n.map(|n| n.cpu_util * 100.0), CPU_PCT),
                        opt_fixed(n.map(|n| n.mem_gb), GB),
                    ]
                };
                let [bc, bm] = cell(&row.baseline);
                let [tc, tm] = cell(&row.treatment);
                rows.push(vec![row.config.clone(), node.to_string(), bc, bm, tc, tm]);
            }
        }
        written.push(write_file(
            dir,
            "fig8_footprint.csv",
            &csv_bytes(
                &[
                    "config",
                    "node",
                    "baseline_cpu_pct",
                    "baseline_mem_gb",
                    "treatment_cpu_pct",
                    "treatment_mem_gb",
                ],
                &rows,
            ),
        )?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PhaseSpan, PhaseTimeline};
    use crate::probes::PhaseRun;
    use crate::time::Nanos;

    fn timeline(durations: &[(PhaseId, f64)]) -> PhaseTimeline {
        let mut t = Nanos::ZERO;
        let spans = durations
            .iter()
            .map(|(p, d)| {
                let end = t + Nanos::from_secs_f64(*d).unwrap();
                let s = PhaseSpan {
                    phase: p.clone(),
                    start: t,
                    end,
                };
                t = end;
                s
            })
            .collect();
        PhaseTimeline::from_spans(spans)
    }

    fn phase_report() -> KpiReport {
        let data = CampaignData {
            runs: vec![],
            phases: vec![PhaseRun {
                node_count: 3,
                repetition: 0,
                seed: 0,
                timeline: timeline(&[
                    (PhaseId::NodeDiscovery, 73.4),
                    (PhaseId::OsInstall, 167.7),
                    (PhaseId::K8sInstall, 291.2),
                ]),
            }],
            footprint: vec![],
        };
        KpiReport {
            schema: SCHEMA_VERSION,
            experiment_id: "x".into(),
            workload: WorkloadKind::PauseBatch,
            baseline_label: "b".into(),
            treatment_label: "t".into(),
            lifecycle: vec![],
            phases: phase_rows(&data),
            mip: vec![],
            footprint: vec![],
            failures: vec![],
        }
    }

    #[test]
    fn phase_sums_are_consistent() {
        let r = phase_report();
        assert!((r.phases[0].total_s.avg - 532.3).abs() < 1e-9);
        assert!(check_consistency(&r).is_empty());
    }

    #[test]
    fn perturbed_phase_breaks_sum() {
        let mut r = phase_report();
        r.phases[0].phases[1].duration_s.avg += 1.0;
        let v = check_consistency(&r);
        assert!(
            v.iter().any(|v| v.rule.starts_with("phase means sum")),
            "{v:?}"
        );
    }

    #[test]
    fn short_shares_flagged() {
        let mut r = phase_report();
        r.phases[0].phases.truncate(2);
        r.phases[0].phases[0].share_raw_pct = 50.0;
        r.phases[0].phases[0].share_pct = 50.0;
        r.phases[0].phases[1].share_raw_pct = 49.0;
        r.phases[0].phases[1].share_pct = 49.0;
        let v = check_consistency(&r);
        assert!(v.iter().any(|v| v.rule.starts_with("shares sum")), "{v:?}");
    }

    #[test]
    fn tampered_overhead_flagged() {
        let o = Overhead::between(37.73, 57.11).unwrap();
        assert_eq!(o.pct, 51.4);
        let mut v = Vec::new();
        check_overhead(
            "x",
            &Overhead {
                pct: 51.3,
                ..o.clone()
            },
            &mut v,
        );
        check_overhead("y", &Overhead { raw_pct: 50.0, ..o }, &mut v);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn fixed_rendering() {
        assert_eq!(fixed(9.523809523809524, 2), "9.52");
        assert_eq!(fixed(51.365, 1), "51.4");
        assert_eq!(fixed(-0.04, 1), "0.0");
        assert_eq!(fixed(3.0, 3), "3.000");
    }
}

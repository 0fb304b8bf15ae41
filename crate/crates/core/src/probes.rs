//! Measurement scenarios run against a backend: batch readiness and
//! deletion, service startup, phase timelines, and whole campaigns.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    ArmRole, ClusterSpec, EntityKind, ExperimentSpec, LifecycleEvent, PhaseScript, PhaseTimeline,
    SampleSeries, Transition, Violation, WorkloadKind, WorkloadSpec,
};
use crate::sim::{open_session, BackendError, BackendSession, ClusterBackend};
use crate::time::Nanos;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("measurement incomplete: {source}")]
    Incomplete {
        partial: Box<BatchMeasurement>,
        source: BackendError,
    },
    #[error("no `{transition}` event observed for `{entity_id}`")]
    MissingEvent {
        entity_id: String,
        transition: Transition,
    },
    #[error("service measurement needs a frontend-backend or multi-service workload, got {0}")]
    WrongKind(WorkloadKind),
    #[error("phase template is empty")]
    EmptyTemplate,
    #[error("timeline sum mismatch: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    SumMismatch(Vec<Violation>),
}

/// Per-pod latencies of one apply/delete cycle, in nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeasurement {
    pub scale: u32,
    pub pod_ids: Vec<String>,
    /// Ready minus apply request, aligned with `pod_ids`.
    pub readiness_ns: Vec<Nanos>,
    /// Last Ready minus apply request.
    pub makespan_ns: Nanos,
    /// Deleted minus delete request, aligned with `pod_ids`.
    pub deletion_ns: Vec<Nanos>,
    pub deletion_makespan_ns: Nanos,
    /// False when the workload could not be created in full.
    pub complete: bool,
}

fn to_secs(v: &[Nanos]) -> Vec<f64> {
    v.iter().map(|n| n.as_secs_f64()).collect()
}

fn mean_secs(v: &[Nanos]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let total: u128 = v.iter().map(|n| u128::from(n.0)).sum();
    Some(total as f64 / v.len() as f64 / 1e9)
}

impl BatchMeasurement {
    fn empty(scale: u32) -> Self {
        Self {
            scale,
            pod_ids: Vec::new(),
            readiness_ns: Vec::new(),
            makespan_ns: Nanos::ZERO,
            deletion_ns: Vec::new(),
            deletion_makespan_ns: Nanos::ZERO,
            complete: false,
        }
    }

    pub fn per_pod_readiness_s(&self) -> Vec<f64> {
        to_secs(&self.readiness_ns)
    }

    pub fn per_pod_deletion_s(&self) -> Vec<f64> {
        to_secs(&self.deletion_ns)
    }

    pub fn makespan_s(&self) -> f64 {
        self.makespan_ns.as_secs_f64()
    }

    pub fn deletion_makespan_s(&self) -> f64 {
        self.deletion_makespan_ns.as_secs_f64()
    }

    /// Batch-average readiness.
    pub fn mean_readiness_s(&self) -> Option<f64> {
        mean_secs(&self.readiness_ns)
    }

    pub fn mean_deletion_s(&self) -> Option<f64> {
        mean_secs(&self.deletion_ns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceMeasurement {
    /// Deploy request to the last service accepting traffic.
    pub startup_ns: Nanos,
    /// Delete request to the last pod removed.
    pub deletion_ns: Nanos,
}

impl ServiceMeasurement {
    pub fn startup_s(&self) -> f64 {
        self.startup_ns.as_secs_f64()
    }

    pub fn deletion_s(&self) -> f64 {
        self.deletion_ns.as_secs_f64()
    }
}

fn event_times(
    events: &[LifecycleEvent],
    entity: EntityKind,
    transition: Transition,
) -> BTreeMap<&str, Nanos> {
    events
        .iter()
        .filter(|e| e.entity == entity && e.transition == transition)
        .map(|e| (e.entity_id.as_str(), e.at))
        .collect()
}

fn times_for(
    ids: &[String],
    seen: &BTreeMap<&str, Nanos>,
    since: Nanos,
    transition: Transition,
) -> Result<Vec<Nanos>, ProbeError> {
    ids.iter()
        .map(|id| {
            seen.get(id.as_str())
                .map(|t| *t - since)
                .ok_or_else(|| ProbeError::MissingEvent {
                    entity_id: id.clone(),
                    transition,
                })
        })
        .collect()
}

/// Applies `workload`, waits for every pod, deletes them all and waits
/// again. The service measurement is present for workloads with services.
pub fn measure_deployment<B: ClusterBackend + ?Sized>(
    backend: &mut B,
    workload: &WorkloadSpec,
    scale: u32,
) -> Result<(BatchMeasurement, Option<ServiceMeasurement>), ProbeError> {
    let deployment = match backend.apply_workload(workload) {
        Ok(d) => d,
        Err(source @ BackendError::CapacityExceeded { .. }) => {
            return Err(ProbeError::Incomplete {
                partial: Box::new(BatchMeasurement::empty(scale)),
                source,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let requested = deployment.requested_at;
    let events = backend.drain_events()?;
    let ready = event_times(&events, EntityKind::Pod, Transition::Ready);
    let readiness_ns = times_for(&deployment.pod_ids, &ready, requested, Transition::Ready)?;
    let service_ready = event_times(&events, EntityKind::Service, Transition::Ready);
    let service_startup = times_for(
        &deployment.service_ids,
        &service_ready,
        requested,
        Transition::Ready,
    )?;

    let delete_at = backend.now();
    backend.delete_workload(&deployment.pod_ids)?;
    let events = backend.drain_events()?;
    let deleted = event_times(&events, EntityKind::Pod, Transition::Deleted);
    let deletion_ns = times_for(
        &deployment.pod_ids,
        &deleted,
        delete_at,
        Transition::Deleted,
    )?;

    let max = |v: &[Nanos]| v.iter().copied().max().unwrap_or(Nanos::ZERO);
    let batch = BatchMeasurement {
        scale,
        makespan_ns: max(&readiness_ns),
        deletion_makespan_ns: max(&deletion_ns),
        pod_ids: deployment.pod_ids,
        readiness_ns,
        deletion_ns,
        complete: true,
    };
    let service = (!deployment.service_ids.is_empty()).then(|| ServiceMeasurement {
        startup_ns: max(&service_startup),
        deletion_ns: batch.deletion_makespan_ns,
    });
    Ok((batch, service))
}

pub fn measure_pod_batch<B: ClusterBackend + ?Sized>(
    backend: &mut B,
    batch_size: u32,
) -> Result<BatchMeasurement, ProbeError> {
    let wl = WorkloadSpec::PauseBatch { batch_size };
    measure_deployment(backend, &wl, batch_size).map(|(b, _)| b)
}

pub fn measure_service<B: ClusterBackend + ?Sized>(
    backend: &mut B,
    workload: &WorkloadSpec,
) -> Result<ServiceMeasurement, ProbeError> {
    if workload.kind() == WorkloadKind::PauseBatch {
        return Err(ProbeError::WrongKind(workload.kind()));
    }
    let scale = u32::try_from(workload.total_pods()).unwrap_or(u32::MAX);
    let (_, service) = measure_deployment(backend, workload, scale)?;
    Ok(service.expect("workloads with services report a service measurement"))
}

/// Fails when the timeline's total disagrees with the sum of its phases.
pub fn check_timeline(timeline: &PhaseTimeline) -> Result<(), ProbeError> {
    let v = timeline.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(ProbeError::SumMismatch(v))
    }
}

pub fn measure_phases<B: ClusterBackend + ?Sized>(
    backend: &mut B,
    script: &PhaseScript,
) -> Result<PhaseTimeline, ProbeError> {
    if script.phases.is_empty() {
        return Err(ProbeError::EmptyTemplate);
    }
    let timeline = backend.run_phase_script(script)?;
    check_timeline(&timeline)?;
    Ok(timeline)
}

/// Stable per-cell seed: the first eight bytes (little endian) of
/// `SHA-256("edgebench/<stream>/v1" || seed || a || b)`, integers little
/// endian, `seed` as u64 and `a`, `b` as u32.
pub fn derive_seed(seed: u64, stream: &str, a: u32, b: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(format!("edgebench/{stream}/v1").as_bytes());
    h.update(seed.to_le_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One arm of one (scale, repetition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub arm: ArmRole,
    pub label: String,
    pub scale: u32,
    pub repetition: u32,
    pub seed: u64,
    pub batch: Option<BatchMeasurement>,
    pub service: Option<ServiceMeasurement>,
    /// Why the run did not complete.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRun {
    pub node_count: u32,
    pub repetition: u32,
    pub seed: u64,
    pub timeline: PhaseTimeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintRun {
    pub config: String,
    pub arm: ArmRole,
    pub label: String,
    pub seed: u64,
    pub series: Vec<SampleSeries>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error("every run failed; first failure: {}", .0.first().and_then(|r| r.failure.as_deref()).unwrap_or("none"))]
    AllRunsFailed(Vec<RunRecord>),
    #[error("phase run at {node_count} nodes: {source}")]
    Phase { node_count: u32, source: ProbeError },
    #[error("footprint `{config}` ({arm}): {source}")]
    Footprint {
        config: String,
        arm: ArmRole,
        source: BackendError,
    },
}

/// Runs every (scale, repetition, arm) cell in its own session. Failed cells
/// are kept with their reason; the campaign fails only when all do. Records
/// come back sorted by scale, repetition, then arm.
pub fn run_campaign<B, F>(
    spec: &ExperimentSpec,
    factory: F,
) -> Result<Vec<RunRecord>, CampaignError>
where
    B: ClusterBackend,
    F: Fn(&ClusterSpec, u64) -> Result<B, BackendError> + Sync,
{
    let mut cells = Vec::new();
    for &scale in &spec.scale_points {
        for repetition in 0..spec.repetitions {
            for arm in ArmRole::ALL {
                cells.push((scale, repetition, *arm));
            }
        }
    }
    let mut records: Vec<RunRecord> = cells
        .into_par_iter()
        .map(|(scale, repetition, arm)| {
            let arm_spec = spec.arm(arm);
            let seed = derive_seed(spec.seed, "campaign", repetition, scale);
            let mut record = RunRecord {
                arm,
                label: arm_spec.label.clone(),
                scale,
                repetition,
                seed,
                batch: None,
                service: None,
                failure: None,
            };
            let workload = spec.workload.at_scale(scale);
            let outcome = factory(&arm_spec.cluster, seed)
                .map_err(ProbeError::from)
                .and_then(|mut b| measure_deployment(&mut b, &workload, scale));
            match outcome {
                Ok((batch, service)) => {
                    record.batch = Some(batch);
                    record.service = service;
                }
                Err(ProbeError::Incomplete { partial, source }) => {
                    record.batch = Some(*partial);
                    record.failure = Some(source.to_string());
                }
                Err(e) => record.failure = Some(e.to_string()),
            }
            record
        })
        .collect();
    records.sort_by_key(|r| (r.scale, r.repetition, r.arm));
    if records.iter().all(RunRecord::failed) {
        return Err(CampaignError::AllRunsFailed(records));
    }
    Ok(records)
}

/// Phase timelines for every node count and repetition, on the treatment
/// cluster.
pub fn run_phase_campaign<B, F>(
    spec: &ExperimentSpec,
    factory: F,
) -> Result<Vec<PhaseRun>, CampaignError>
where
    B: ClusterBackend,
    F: Fn(&ClusterSpec, u64) -> Result<B, BackendError> + Sync,
{
    let Some(scenario) = &spec.phases else {
        return Ok(Vec::new());
    };
    let mut cells = Vec::new();
    for &n in &scenario.node_counts {
        for rep in 0..spec.repetitions {
            cells.push((n, rep));
        }
    }
    let mut runs = cells
        .into_par_iter()
        .map(|(node_count, repetition)| {
            let seed = derive_seed(spec.seed, "phases", repetition, node_count);
            let script = PhaseScript {
                node_count: Some(node_count),
                phases: scenario.phases.clone(),
            };
            factory(&spec.treatment.cluster, seed)
                .map_err(ProbeError::from)
                .and_then(|mut b| measure_phases(&mut b, &script))
                .map(|timeline| PhaseRun {
                    node_count,
                    repetition,
                    seed,
                    timeline,
                })
                .map_err(|source| CampaignError::Phase { node_count, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| (r.node_count, r.repetition));
    Ok(runs)
}

/// Idle resource samples for every footprint config and arm.
pub fn run_footprint<B, F>(
    spec: &ExperimentSpec,
    factory: F,
) -> Result<Vec<FootprintRun>, CampaignError>
where
    B: ClusterBackend,
    F: Fn(&ClusterSpec, u64) -> Result<B, BackendError> + Sync,
{
    let mut out = Vec::new();
    for (ci, config) in spec.footprint.iter().enumerate() {
        for (ai, arm) in ArmRole::ALL.iter().enumerate() {
            let profiles = match arm {
                ArmRole::Baseline => &config.baseline,
                ArmRole::Treatment => &config.treatment,
            };
            let seed = derive_seed(spec.seed, "footprint", ci as u32, ai as u32);
            let wrap = |source| CampaignError::Footprint {
                config: config.name.clone(),
                arm: *arm,
                source,
            };
            let mut backend = factory(&spec.arm(*arm).cluster, seed).map_err(wrap)?;
            backend.set_resource_profiles(profiles).map_err(wrap)?;
            let series = backend
                .sample_resources(spec.sampling_window_s, spec.sampling_interval_s)
                .map_err(wrap)?
                .into_iter()
                .filter(|s| profiles.iter().any(|p| p.node == s.node))
                .collect();
            out.push(FootprintRun {
                config: config.name.clone(),
                arm: *arm,
                label: spec.arm(*arm).label.clone(),
                seed,
                series,
            });
        }
    }
    Ok(out)
}

/// Everything a spec asks to measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignData {
    pub runs: Vec<RunRecord>,
    pub phases: Vec<PhaseRun>,
    pub footprint: Vec<FootprintRun>,
}

/// Runs the lifecycle campaign, phase timelines and footprint sampling on
/// the simulator.
pub fn execute_simulated(spec: &ExperimentSpec) -> Result<CampaignData, CampaignError> {
    let factory =
        |c: &ClusterSpec, seed| -> Result<BackendSession, BackendError> { open_session(c, seed) };
    Ok(CampaignData {
        runs: run_campaign(spec, factory)?,
        phases: run_phase_campaign(spec, factory)?,
        footprint: run_footprint(spec, factory)?,
    })
}

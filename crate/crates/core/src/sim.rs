//! Cluster backends. [`BackendSession`] is a seeded in-process simulator on
//! a virtual nanosecond clock; [`RemoteOrchestrator`] is the shape of an
//! adapter for a live cluster and refuses every call.
//!
//! Latency model, per pod placed on node `n` at admit index `i`:
//!
//! ```text
//! ready   = t_apply  + base(n) + slope(n) * i * (1 + jitter(n) * u)
//! deleted = t_delete + deletion_base(n) * (1 + jitter(n) * u)
//! ```
//!
//! with `u` uniform in [-1, 1], one draw per pod per operation.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    ClusterSpec, EntityKind, LifecycleEvent, NodeProfile, PhaseScript, PhaseSpan, PhaseTimeline,
    ResourceProfile, Sample, SampleSeries, Transition, Violation, WorkloadSpec,
};
use crate::time::Nanos;

/// Delay between the last member pod turning Ready and its service
/// accepting traffic.
pub const REGISTRATION_DELAY: Nanos = Nanos(200_000_000);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("cluster has no worker nodes")]
    NoWorkers,
    #[error("invalid cluster: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCluster(Vec<Violation>),
    #[error("capacity exceeded: {requested} pods requested, {live} live, capacity {capacity}")]
    CapacityExceeded {
        requested: u64,
        live: u64,
        capacity: u64,
    },
    #[error("unknown pod `{0}`")]
    UnknownPod(String),
    #[error("pod `{0}` is already being deleted")]
    AlreadyDeleting(String),
    #[error("service `{0}` is already deployed")]
    DuplicateService(String),
    #[error("cannot watch until {until}: clock is at {now}")]
    ClockRegression { until: Nanos, now: Nanos },
    #[error("sampling: {0}")]
    InvalidSampling(String),
    #[error("phase script: {0}")]
    InvalidPhase(String),
    #[error("virtual time overflow")]
    TimeOverflow,
    #[error("not supported by this backend: {0}")]
    NotSupported(&'static str),
}

/// Pods and services created by one apply.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Deployment {
    pub requested_at: Nanos,
    pub pod_ids: Vec<String>,
    pub service_ids: Vec<String>,
}

/// What every backend offers to probes.
pub trait ClusterBackend {
    fn now(&self) -> Nanos;

    fn apply_workload(&mut self, workload: &WorkloadSpec) -> Result<Deployment, BackendError>;

    fn delete_workload(&mut self, pod_ids: &[String]) -> Result<(), BackendError>;

    /// Advances the clock to `until`, returning every event due by then.
    fn watch_events(&mut self, until: Nanos) -> Result<Vec<LifecycleEvent>, BackendError>;

    /// Watches until no event is pending.
    fn drain_events(&mut self) -> Result<Vec<LifecycleEvent>, BackendError>;

    fn set_resource_profiles(&mut self, profiles: &[ResourceProfile]) -> Result<(), BackendError>;

    fn sample_resources(
        &mut self,
        window_s: f64,
        interval_s: f64,
    ) -> Result<Vec<SampleSeries>, BackendError>;

    fn run_phase_script(&mut self, script: &PhaseScript) -> Result<PhaseTimeline, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PodState {
    Pending,
    Creating,
    Ready,
    Terminating,
    Deleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPod {
    pub id: String,
    pub node: String,
    pub state: PodState,
    /// 1-based position within its batch on its node.
    pub admit_index: u32,
    pub requested_at: Nanos,
    pub ready_at: Nanos,
    pub delete_requested_at: Option<Nanos>,
    pub deleted_at: Option<Nanos>,
}

#[derive(Debug, Clone, PartialEq)]
struct SimService {
    members: Vec<String>,
    pending_deletes: usize,
    deleted_at: Nanos,
}

type EventKey = (Nanos, EntityKind, String, Transition);

pub struct BackendSession {
    cluster: ClusterSpec,
    seed: u64,
    clock: Nanos,
    rng: ChaCha8Rng,
    pods: BTreeMap<String, SimPod>,
    services: BTreeMap<String, SimService>,
    pending: BTreeSet<EventKey>,
    log: Vec<LifecycleEvent>,
    profiles: BTreeMap<String, ResourceProfile>,
    registration_delay: Nanos,
    next_pod: u64,
}

fn secs(v: f64) -> Result<Nanos, BackendError> {
    Nanos::from_secs_f64(v).ok_or(BackendError::TimeOverflow)
}

fn after(t: Nanos, d: Nanos) -> Result<Nanos, BackendError> {
    t.checked_add(d).ok_or(BackendError::TimeOverflow)
}

/// Opens a simulator session at virtual time zero.
pub fn open_session(cluster: &ClusterSpec, seed: u64) -> Result<BackendSession, BackendError> {
    if cluster.workers().next().is_none() {
        return Err(BackendError::NoWorkers);
    }
    let mut violations = Vec::new();
    cluster.violations("cluster", &mut violations);
    if !violations.is_empty() {
        return Err(BackendError::InvalidCluster(violations));
    }
    Ok(BackendSession {
        cluster: cluster.clone(),
        seed,
        clock: Nanos::ZERO,
        rng: ChaCha8Rng::seed_from_u64(seed),
        pods: BTreeMap::new(),
        services: BTreeMap::new(),
        pending: BTreeSet::new(),
        log: Vec::new(),
        profiles: BTreeMap::new(),
        registration_delay: REGISTRATION_DELAY,
        next_pod: 0,
    })
}

impl BackendSession {
    pub fn cluster(&self) -> &ClusterSpec {
        &self.cluster
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_registration_delay(&mut self, delay: Nanos) {
        self.registration_delay = delay;
    }

    pub fn pod(&self, id: &str) -> Option<&SimPod> {
        self.pods.get(id)
    }

    /// Pods not yet deleted at the current clock, including those whose
    /// deletion is scheduled but not due.
    pub fn live_pods(&self) -> u64 {
        self.pods
            .values()
            .filter(|p| p.deleted_at.is_none_or(|t| t > self.clock))
            .count() as u64
    }

    /// Readiness latency the simulator scheduled for a pod, measured from
    /// its apply request. Exposed so probes can be checked against it.
    pub fn scheduled_latency(&self, pod_id: &str) -> Option<Nanos> {
        self.pods.get(pod_id).map(|p| p.ready_at - p.requested_at)
    }

    /// Deletion latency scheduled for a pod, from its delete request.
    pub fn scheduled_deletion(&self, pod_id: &str) -> Option<Nanos> {
        let p = self.pods.get(pod_id)?;
        Some(p.deleted_at? - p.delete_requested_at?)
    }

    /// Every event emitted so far, in emission order.
    pub fn event_log(&self) -> &[LifecycleEvent] {
        &self.log
    }

    pub fn pending_events(&self) -> usize {
        self.pending.len()
    }

    /// SHA-256 over the cluster, seed, clock, generator position and the
    /// emitted log.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.cluster).expect("cluster serializes"));
        h.update(self.seed.to_le_bytes());
        h.update(self.clock.0.to_le_bytes());
        h.update(self.rng.get_word_pos().to_le_bytes());
        h.update(export_event_log(&self.log).as_bytes());
        hex::encode(h.finalize())
    }

    fn draw(&mut self) -> f64 {
        self.rng.gen_range(-1.0..=1.0)
    }

    fn schedule(&mut self, t: Nanos, entity: EntityKind, id: &str, transition: Transition) {
        self.pending.insert((t, entity, id.to_string(), transition));
    }

    fn profile_for(&self, node: &str) -> ResourceProfile {
        self.profiles.get(node).cloned().unwrap_or(ResourceProfile {
            node: node.to_string(),
            cpu_baseline: 0.0,
            cpu_noise_amp: 0.0,
            mem_baseline_gb: 0.0,
            mem_noise_amp_gb: 0.0,
        })
    }

    fn apply_transition(&mut self, ev: &LifecycleEvent) {
        if ev.entity != EntityKind::Pod {
            return;
        }
        if let Some(p) = self.pods.get_mut(&ev.entity_id) {
            p.state = match ev.transition {
                Transition::Created => PodState::Pending,
                Transition::Scheduled => PodState::Creating,
                Transition::Ready => PodState::Ready,
                Transition::DeleteRequested => PodState::Terminating,
                Transition::Deleted => PodState::Deleted,
            };
        }
    }
}

impl ClusterBackend for BackendSession {
    fn now(&self) -> Nanos {
        self.clock
    }

    fn apply_workload(&mut self, workload: &WorkloadSpec) -> Result<Deployment, BackendError> {
        let requested = workload.total_pods();
        let live = self.live_pods();
        let capacity = self.cluster.pod_capacity();
        if live + requested > capacity {
            return Err(BackendError::CapacityExceeded {
                requested,
                live,
                capacity,
            });
        }
        let services = workload.services();
        if let Some(s) = services
            .iter()
            .find(|s| self.services.contains_key(&s.name))
        {
            return Err(BackendError::DuplicateService(s.name.clone()));
        }
        // (prefix, service) per pod, in apply order.
        let plan: Vec<(String, Option<usize>)> = match workload {
            WorkloadSpec::PauseBatch { batch_size } => (0..*batch_size)
                .map(|_| ("pod".to_string(), None))
                .collect(),
            _ => services
                .iter()
                .enumerate()
                .flat_map(|(si, s)| (0..s.replicas).map(move |_| (s.name.clone(), Some(si))))
                .collect(),
        };
        let workers: Vec<NodeProfile> = self.cluster.workers().cloned().collect();
        let t = self.clock;
        let mut deployment = Deployment {
            requested_at: t,
            ..Deployment::default()
        };
        let mut members: Vec<Vec<String>> = vec![Vec::new(); services.len()];
        let mut service_ready = vec![t; services.len()];
        for (k, (prefix, service)) in plan.into_iter().enumerate() {
            let node = &workers[k % workers.len()];
            let admit_index = (k / workers.len()) as u32 + 1;
            let u = self.draw();
            let latency = secs(
                node.readiness_base_s
                    + node.readiness_slope_s * f64::from(admit_index) * (1.0 + node.jitter_rel * u),
            )?;
            let ready_at = after(t, latency)?;
            self.next_pod += 1;
            let id = format!("{prefix}-{:06}", self.next_pod);
            self.schedule(t, EntityKind::Pod, &id, Transition::Created);
            self.schedule(t, EntityKind::Pod, &id, Transition::Scheduled);
            self.schedule(ready_at, EntityKind::Pod, &id, Transition::Ready);
            if let Some(si) = service {
                members[si].push(id.clone());
                service_ready[si] = service_ready[si].max(ready_at);
            }
            self.pods.insert(
                id.clone(),
                SimPod {
                    id: id.clone(),
                    node: node.name.clone(),
                    state: PodState::Pending,
                    admit_index,
                    requested_at: t,
                    ready_at,
                    delete_requested_at: None,
                    deleted_at: None,
                },
            );
            deployment.pod_ids.push(id);
        }
        for (si, s) in services.iter().enumerate() {
            let ready = after(service_ready[si], self.registration_delay)?;
            self.schedule(t, EntityKind::Service, &s.name, Transition::Created);
            self.schedule(t, EntityKind::Service, &s.name, Transition::Scheduled);
            self.schedule(ready, EntityKind::Service, &s.name, Transition::Ready);
            let pending_deletes = members[si].len();
            self.services.insert(
                s.name.clone(),
                SimService {
                    members: std::mem::take(&mut members[si]),
                    pending_deletes,
                    deleted_at: Nanos::ZERO,
                },
            );
            deployment.service_ids.push(s.name.clone());
        }
        Ok(deployment)
    }

    fn delete_workload(&mut self, pod_ids: &[String]) -> Result<(), BackendError> {
        let mut seen = BTreeSet::new();
        for id in pod_ids {
            let pod = self
                .pods
                .get(id)
                .ok_or_else(|| BackendError::UnknownPod(id.clone()))?;
            if pod.delete_requested_at.is_some() || !seen.insert(id.as_str()) {
                return Err(BackendError::AlreadyDeleting(id.clone()));
            }
        }
        let t = self.clock;
        let mut done: BTreeMap<String, Nanos> = BTreeMap::new();
        for id in pod_ids {
            let u = self.draw();
            let pod = &self.pods[id];
            let node = self
                .cluster
                .node(&pod.node)
                .expect("pod placed on a cluster node");
            let requested = t.max(pod.ready_at);
            let deleted = after(
                requested,
                secs(node.deletion_base_s * (1.0 + node.jitter_rel * u))?,
            )?;
            self.schedule(requested, EntityKind::Pod, id, Transition::DeleteRequested);
            self.schedule(deleted, EntityKind::Pod, id, Transition::Deleted);
            let pod = self.pods.get_mut(id).expect("checked above");
            pod.delete_requested_at = Some(requested);
            pod.deleted_at = Some(deleted);
            done.insert(id.clone(), deleted);
        }
        let mut finished = Vec::new();
        for (name, svc) in self.services.iter_mut() {
            for m in svc.members.iter().filter(|m| done.contains_key(*m)) {
                svc.pending_deletes -= 1;
                svc.deleted_at = svc.deleted_at.max(done[m]);
            }
            if svc.pending_deletes == 0 && svc.members.iter().any(|m| done.contains_key(m)) {
                finished.push((name.clone(), svc.deleted_at));
            }
        }
        for (name, deleted) in finished {
            // A service cannot start terminating before it became ready.
            let ready = self
                .pending
                .iter()
                .find(|(_, e, id, tr)| {
                    *e == EntityKind::Service && *id == name && *tr == Transition::Ready
                })
                .map(|k| k.0)
                .unwrap_or(t);
            let requested = t.max(ready);
            self.schedule(
                requested,
                EntityKind::Service,
                &name,
                Transition::DeleteRequested,
            );
            self.schedule(
                deleted.max(requested),
                EntityKind::Service,
                &name,
                Transition::Deleted,
            );
        }
        Ok(())
    }

    fn watch_events(&mut self, until: Nanos) -> Result<Vec<LifecycleEvent>, BackendError> {
        if until < self.clock {
            return Err(BackendError::ClockRegression {
                until,
                now: self.clock,
            });
        }
        let mut out = Vec::new();
        while let Some(first) = self.pending.first() {
            if first.0 > until {
                break;
            }
            let (at, entity, entity_id, transition) = self.pending.pop_first().expect("nonempty");
            let ev = LifecycleEvent {
                entity,
                entity_id,
                transition,
                at,
            };
            self.apply_transition(&ev);
            out.push(ev);
        }
        self.clock = until;
        self.log.extend(out.iter().cloned());
        Ok(out)
    }

    fn drain_events(&mut self) -> Result<Vec<LifecycleEvent>, BackendError> {
        let until = self
            .pending
            .last()
            .map_or(self.clock, |k| k.0.max(self.clock));
        self.watch_events(until)
    }

    fn set_resource_profiles(&mut self, profiles: &[ResourceProfile]) -> Result<(), BackendError> {
        let mut violations = Vec::new();
        for (i, p) in profiles.iter().enumerate() {
            if self.cluster.node(&p.node).is_none() {
                violations.push(Violation::new(
                    format!("profiles[{i}].node"),
                    format!("node `{}` declared in the cluster", p.node),
                ));
            }
            p.violations(&format!("profiles[{i}]"), &mut violations);
        }
        if !violations.is_empty() {
            return Err(BackendError::InvalidCluster(violations));
        }
        self.profiles = profiles
            .iter()
            .map(|p| (p.node.clone(), p.clone()))
            .collect();
        Ok(())
    }

    fn sample_resources(
        &mut self,
        window_s: f64,
        interval_s: f64,
    ) -> Result<Vec<SampleSeries>, BackendError> {
        if !(interval_s.is_finite() && interval_s > 0.0) {
            return Err(BackendError::InvalidSampling(
                "interval must be positive".into(),
            ));
        }
        if !(window_s.is_finite() && window_s >= interval_s) {
            return Err(BackendError::InvalidSampling(
                "window must be at least one interval".into(),
            ));
        }
        let window = secs(window_s)?;
        let interval = secs(interval_s)?;
        if interval == Nanos::ZERO {
            return Err(BackendError::InvalidSampling("interval below 1 ns".into()));
        }
        let count = window.0 / interval.0;
        let start = self.clock;
        let names: Vec<String> = self.cluster.nodes.iter().map(|n| n.name.clone()).collect();
        let mut series: Vec<SampleSeries> = names
            .iter()
            .map(|n| SampleSeries {
                node: n.clone(),
                samples: Vec::with_capacity(count as usize),
            })
            .collect();
        for k in 1..=count {
            let at = Nanos(
                interval
                    .0
                    .checked_mul(k)
                    .ok_or(BackendError::TimeOverflow)?,
            );
            let at = after(start, at)?;
            for (i, name) in names.iter().enumerate() {
                let p = self.profile_for(name);
                let (u, v) = (self.draw(), self.draw());
                series[i].samples.push(Sample {
                    at,
                    cpu_util: (p.cpu_baseline + p.cpu_noise_amp * u).clamp(0.0, 1.0),
                    mem_gb: (p.mem_baseline_gb + p.mem_noise_amp_gb * v).max(0.0),
                });
            }
        }
        self.clock = after(start, Nanos(interval.0 * count))?;
        Ok(series)
    }

    fn run_phase_script(&mut self, script: &PhaseScript) -> Result<PhaseTimeline, BackendError> {
        let nodes = script.node_count.unwrap_or(self.cluster.nodes.len() as u32);
        let mut spans = Vec::with_capacity(script.phases.len());
        let mut t = self.clock;
        for m in &script.phases {
            let u = self.draw();
            let d = m.intercept_s + m.slope_s * f64::from(nodes) * (1.0 + m.jitter_rel * u);
            if !(d.is_finite() && d >= 0.0) {
                return Err(BackendError::InvalidPhase(format!(
                    "{} has duration {d} s at {nodes} nodes",
                    m.phase
                )));
            }
            let end = after(t, secs(d)?)?;
            spans.push(PhaseSpan {
                phase: m.phase.clone(),
                start: t,
                end,
            });
            t = end;
        }
        self.clock = t;
        Ok(PhaseTimeline::from_spans(spans))
    }
}

/// Renders events as `t_ns,entity,entity_id,transition` records with a
/// header line.
pub fn export_event_log(events: &[LifecycleEvent]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["t_ns", "entity", "entity_id", "transition"])
        .expect("in-memory write");
    for e in events {
        w.write_record([
            e.at.0.to_string().as_str(),
            e.entity.as_str(),
            e.entity_id.as_str(),
            e.transition.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Adapter shape for a live orchestrator: apply a manifest document, stream
/// watch events, delete by label, scrape samples. Not implemented.
#[derive(Debug, Clone)]
pub struct RemoteOrchestrator {
    pub endpoint: String,
    pub label_selector: String,
}

impl ClusterBackend for RemoteOrchestrator {
    fn now(&self) -> Nanos {
        Nanos::ZERO
    }

    fn apply_workload(&mut self, _: &WorkloadSpec) -> Result<Deployment, BackendError> {
        Err(BackendError::NotSupported("apply manifest"))
    }

    fn delete_workload(&mut self, _: &[String]) -> Result<(), BackendError> {
        Err(BackendError::NotSupported("delete by label"))
    }

    fn watch_events(&mut self, _: Nanos) -> Result<Vec<LifecycleEvent>, BackendError> {
        Err(BackendError::NotSupported("watch stream"))
    }

    fn drain_events(&mut self) -> Result<Vec<LifecycleEvent>, BackendError> {
        Err(BackendError::NotSupported("watch stream"))
    }

    fn set_resource_profiles(&mut self, _: &[ResourceProfile]) -> Result<(), BackendError> {
        Err(BackendError::NotSupported("resource profiles"))
    }

    fn sample_resources(&mut self, _: f64, _: f64) -> Result<Vec<SampleSeries>, BackendError> {
        Err(BackendError::NotSupported("metrics scrape"))
    }

    fn run_phase_script(&mut self, _: &PhaseScript) -> Result<PhaseTimeline, BackendError> {
        Err(BackendError::NotSupported("phase script"))
    }
}

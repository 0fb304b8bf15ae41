//! Shared domain types and experiment-spec validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::Nanos;

/// One broken rule, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// The accepted spellings, for error messages.
            pub fn allowed() -> String {
                [$($text),+].join(", ")
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "`{}` is not one of {{{}}}",
                        other,
                        $name::allowed()
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

pub(crate) use string_enum;

string_enum!(NodeRole {
    ControlPlane => "control-plane",
    Worker => "worker",
});

string_enum!(Arch {
    X86_64 => "x86_64",
    Arm64 => "arm64",
});

string_enum!(
    /// Lifecycle entity kind.
    EntityKind {
        Pod => "pod",
        Service => "service",
    }
);

string_enum!(
    /// Lifecycle transitions, declared in the order every entity passes them.
    Transition {
        Created => "created",
        Scheduled => "scheduled",
        Ready => "ready",
        DeleteRequested => "delete-requested",
        Deleted => "deleted",
    }
);

string_enum!(
    /// Deployment stage an action belongs to.
    DeploymentPhase {
        ClusterDeployment => "cluster-deployment",
        K8sInstallation => "k8s-installation",
        ServiceDeployment => "service-deployment",
    }
);

string_enum!(ActionMode {
    Manual => "manual",
    Automated => "automated",
});

string_enum!(WorkloadKind {
    PauseBatch => "pause-batch",
    FrontendBackend => "frontend-backend",
    MultiService => "multi-service",
});

string_enum!(
    /// Which side of a baseline-vs-treatment comparison a run belongs to.
    ArmRole {
        Baseline => "baseline",
        Treatment => "treatment",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub name: String,
    pub role: NodeRole,
    pub cpu_cores: u32,
    pub mem_gb: f64,
    pub arch: Arch,
    pub p_idle_w: f64,
    pub p_max_w: f64,
    pub readiness_base_s: f64,
    pub readiness_slope_s: f64,
    pub deletion_base_s: f64,
    pub jitter_rel: f64,
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn finite_pos(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl NodeProfile {
    pub fn violations(&self, path: &str, out: &mut Vec<Violation>) {
        let f = |name: &str| format!("{path}.{name}");
        if self.name.trim().is_empty() {
            out.push(Violation::new(f("name"), "name nonempty"));
        }
        if self.cpu_cores < 1 {
            out.push(Violation::new(f("cpu_cores"), "cpu_cores >= 1"));
        }
        if !finite_pos(self.mem_gb) {
            out.push(Violation::new(f("mem_gb"), "mem_gb > 0"));
        }
        if !finite_pos(self.p_idle_w) {
            out.push(Violation::new(f("p_idle_w"), "p_idle_w > 0"));
        }
        if !finite_pos(self.p_max_w) {
            out.push(Violation::new(f("p_max_w"), "p_max_w > 0"));
        }
        if !(self.p_max_w > self.p_idle_w) {
            out.push(Violation::new(f("p_max_w"), "p_max_w > p_idle_w"));
        }
        if !finite_nonneg(self.readiness_base_s) {
            out.push(Violation::new(
                f("readiness_base_s"),
                "readiness_base_s >= 0",
            ));
        }
        if !finite_nonneg(self.readiness_slope_s) {
            out.push(Violation::new(
                f("readiness_slope_s"),
                "readiness_slope_s >= 0",
            ));
        }
        if !finite_nonneg(self.deletion_base_s) {
            out.push(Violation::new(f("deletion_base_s"), "deletion_base_s >= 0"));
        }
        if !(self.jitter_rel >= 0.0 && self.jitter_rel < 1.0) {
            out.push(Violation::new(f("jitter_rel"), "jitter_rel in [0, 1)"));
        }
    }
}

pub const DEFAULT_PODS_PER_CORE: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub name: String,
    pub nodes: Vec<NodeProfile>,
    pub flavor_label: String,
    /// Scheduling capacity per worker core.
    pub pods_per_core: u32,
}

impl ClusterSpec {
    pub fn workers(&self) -> impl Iterator<Item = &NodeProfile> {
        self.nodes.iter().filter(|n| n.role == NodeRole::Worker)
    }

    pub fn node(&self, name: &str) -> Option<&NodeProfile> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Maximum number of simultaneously live pods.
    pub fn pod_capacity(&self) -> u64 {
        self.workers()
            .map(|n| u64::from(n.cpu_cores) * u64::from(self.pods_per_core))
            .sum()
    }

    pub fn violations(&self, path: &str, out: &mut Vec<Violation>) {
        if self.name.trim().is_empty() {
            out.push(Violation::new(format!("{path}.name"), "name nonempty"));
        }
        if !self.nodes.iter().any(|n| n.role == NodeRole::ControlPlane) {
            out.push(Violation::new(
                format!("{path}.nodes"),
                "at least one control-plane node",
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let node_path = format!("{path}.nodes[{i}]");
            if !seen.insert(node.name.as_str()) {
                out.push(Violation::new(
                    format!("{node_path}.name"),
                    format!("node names unique (`{}` repeated)", node.name),
                ));
            }
            node.violations(&node_path, out);
        }
        if self.pods_per_core < 1 {
            out.push(Violation::new(
                format!("{path}.pods_per_core"),
                "pods_per_core >= 1",
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub name: String,
    pub replicas: u32,
    pub depends_on: Vec<String>,
}

/// Exactly one workload kind per campaign; the variant carries only that
/// kind's fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WorkloadSpec {
    PauseBatch { batch_size: u32 },
    FrontendBackend { replicas: u32 },
    MultiService { services: Vec<ServiceSpec> },
}

impl WorkloadSpec {
    pub fn kind(&self) -> WorkloadKind {
        match self {
            WorkloadSpec::PauseBatch { .. } => WorkloadKind::PauseBatch,
            WorkloadSpec::FrontendBackend { .. } => WorkloadKind::FrontendBackend,
            WorkloadSpec::MultiService { .. } => WorkloadKind::MultiService,
        }
    }

    /// The workload as run at one campaign scale point: batch size for pause
    /// batches, frontend replicas for frontend-backend, and a replica
    /// multiplier for multi-service suites.
    pub fn at_scale(&self, scale: u32) -> WorkloadSpec {
        match self {
            WorkloadSpec::PauseBatch { .. } => WorkloadSpec::PauseBatch { batch_size: scale },
            WorkloadSpec::FrontendBackend { .. } => {
                WorkloadSpec::FrontendBackend { replicas: scale }
            }
            WorkloadSpec::MultiService { services } => WorkloadSpec::MultiService {
                services: services
                    .iter()
                    .map(|s| ServiceSpec {
                        replicas: s.replicas.saturating_mul(scale),
                        ..s.clone()
                    })
                    .collect(),
            },
        }
    }

    /// The services this workload deploys, in declaration order. Pause
    /// batches are bare pods.
    pub fn services(&self) -> Vec<ServiceSpec> {
        match self {
            WorkloadSpec::PauseBatch { .. } => Vec::new(),
            WorkloadSpec::FrontendBackend { replicas } => vec![
                ServiceSpec {
                    name: "frontend".into(),
                    replicas: *replicas,
                    depends_on: vec!["backend".into()],
                },
                ServiceSpec {
                    name: "backend".into(),
                    replicas: 1,
                    depends_on: Vec::new(),
                },
            ],
            WorkloadSpec::MultiService { services } => services.clone(),
        }
    }

    pub fn total_pods(&self) -> u64 {
        match self {
            WorkloadSpec::PauseBatch { batch_size } => u64::from(*batch_size),
            _ => self.services().iter().map(|s| u64::from(s.replicas)).sum(),
        }
    }

    pub fn violations(&self, path: &str, out: &mut Vec<Violation>) {
        match self {
            WorkloadSpec::PauseBatch { batch_size } => {
                if *batch_size < 1 {
                    out.push(Violation::new(
                        format!("{path}.batch_size"),
                        "batch_size >= 1",
                    ));
                }
            }
            WorkloadSpec::FrontendBackend { replicas } => {
                if *replicas < 1 {
                    out.push(Violation::new(format!("{path}.replicas"), "replicas >= 1"));
                }
            }
            WorkloadSpec::MultiService { services } => {
                if services.is_empty() {
                    out.push(Violation::new(
                        format!("{path}.services"),
                        "services nonempty",
                    ));
                }
                let names: BTreeSet<&str> = services.iter().map(|s| s.name.as_str()).collect();
                if names.len() != services.len() {
                    out.push(Violation::new(
                        format!("{path}.services"),
                        "service names unique",
                    ));
                }
                for (i, s) in services.iter().enumerate() {
                    let sp = format!("{path}.services[{i}]");
                    if s.name.trim().is_empty() {
                        out.push(Violation::new(format!("{sp}.name"), "name nonempty"));
                    }
                    if s.replicas < 1 {
                        out.push(Violation::new(format!("{sp}.replicas"), "replicas >= 1"));
                    }
                    for d in &s.depends_on {
                        if !names.contains(d.as_str()) {
                            out.push(Violation::new(
                                format!("{sp}.depends_on"),
                                format!("dependency `{d}` names a declared service"),
                            ));
                        }
                    }
                }
                if let Some(cycle_at) = find_cycle(services) {
                    out.push(Violation::new(
                        format!("{path}.services"),
                        format!("dependency edges form a DAG (cycle through `{cycle_at}`)"),
                    ));
                }
            }
        }
    }
}

/// Returns a service on a dependency cycle, if any (Kahn's algorithm).
fn find_cycle(services: &[ServiceSpec]) -> Option<String> {
    let names: BTreeSet<&str> = services.iter().map(|s| s.name.as_str()).collect();
    let mut indegree: BTreeMap<&str, usize> = names.iter().map(|n| (*n, 0)).collect();
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in services {
        for d in s.depends_on.iter().filter(|d| names.contains(d.as_str())) {
            edges.entry(d.as_str()).or_default().push(s.name.as_str());
            *indegree.get_mut(s.name.as_str())? += 1;
        }
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    while let Some(n) = ready.pop() {
        for m in edges.get(n).into_iter().flatten() {
            let d = indegree.get_mut(m)?;
            *d -= 1;
            if *d == 0 {
                ready.push(m);
            }
        }
        indegree.remove(n);
    }
    indegree.into_keys().next().map(str::to_string)
}

/// Idle-state resource usage of one node, used by the simulator's sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceProfile {
    pub node: String,
    pub cpu_baseline: f64,
    pub cpu_noise_amp: f64,
    pub mem_baseline_gb: f64,
    pub mem_noise_amp_gb: f64,
}

impl ResourceProfile {
    pub fn violations(&self, path: &str, out: &mut Vec<Violation>) {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.cpu_baseline) {
            out.push(Violation::new(
                format!("{path}.cpu_baseline"),
                "cpu_baseline in [0, 1]",
            ));
        }
        if !in_unit(self.cpu_noise_amp) {
            out.push(Violation::new(
                format!("{path}.cpu_noise_amp"),
                "cpu_noise_amp in [0, 1]",
            ));
        }
        if !finite_nonneg(self.mem_baseline_gb) {
            out.push(Violation::new(
                format!("{path}.mem_baseline_gb"),
                "mem_baseline_gb >= 0",
            ));
        }
        if !finite_nonneg(self.mem_noise_amp_gb) {
            out.push(Violation::new(
                format!("{path}.mem_noise_amp_gb"),
                "mem_noise_amp_gb >= 0",
            ));
        }
    }
}

/// Deployment phase identifiers of a timeline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhaseId {
    NodeDiscovery,
    OsInstall,
    K8sInstall,
    Component(String),
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseId::NodeDiscovery => f.write_str("ND"),
            PhaseId::OsInstall => f.write_str("OS_I"),
            PhaseId::K8sInstall => f.write_str("K8S_I"),
            PhaseId::Component(name) => write!(f, "component:{name}"),
        }
    }
}

impl FromStr for PhaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ND" => Ok(PhaseId::NodeDiscovery),
            "OS_I" => Ok(PhaseId::OsInstall),
            "K8S_I" => Ok(PhaseId::K8sInstall),
            other => match other.strip_prefix("component:") {
                Some(name) if !name.is_empty() => Ok(PhaseId::Component(name.to_string())),
                _ => Err(format!(
                    "`{other}` is not one of {{ND, OS_I, K8S_I, component:<name>}}"
                )),
            },
        }
    }
}

impl Serialize for PhaseId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Duration model of one deployment phase: `intercept + slope × nodes × (1 + jitter)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub phase: PhaseId,
    pub intercept_s: f64,
    pub slope_s: f64,
    pub jitter_rel: f64,
}

/// Ordered phases run back to back by the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScript {
    /// Node count fed to the models; the session's cluster size when absent.
    pub node_count: Option<u32>,
    pub phases: Vec<PhaseModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScenario {
    pub node_counts: Vec<u32>,
    pub phases: Vec<PhaseModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintConfig {
    pub name: String,
    pub baseline: Vec<ResourceProfile>,
    pub treatment: Vec<ResourceProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub label: String,
    pub cluster: ClusterSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRefs {
    pub baseline: String,
    pub treatment: String,
}

/// Declarative description of one benchmark campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub workload: WorkloadSpec,
    pub scale_points: Vec<u32>,
    pub repetitions: u32,
    pub seed: u64,
    pub sampling_window_s: f64,
    pub sampling_interval_s: f64,
    pub baseline: ArmSpec,
    pub treatment: ArmSpec,
    pub phases: Option<PhaseScenario>,
    pub footprint: Vec<FootprintConfig>,
    pub ledgers: Option<LedgerRefs>,
}

impl ExperimentSpec {
    pub fn arm(&self, role: ArmRole) -> &ArmSpec {
        match role {
            ArmRole::Baseline => &self.baseline,
            ArmRole::Treatment => &self.treatment,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push(Violation::new("id", "id nonempty"));
        }
        if self.scale_points.is_empty() {
            out.push(Violation::new("scale_points", "scale_points nonempty"));
        }
        if self.scale_points.contains(&0) {
            out.push(Violation::new("scale_points", "scale_points positive"));
        }
        if self.scale_points.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::new(
                "scale_points",
                "scale_points strictly increasing",
            ));
        }
        if self.repetitions < 1 {
            out.push(Violation::new("repetitions", "repetitions >= 1"));
        }
        if !finite_pos(self.sampling_window_s) {
            out.push(Violation::new("sampling_window_s", "sampling_window_s > 0"));
        }
        if !finite_pos(self.sampling_interval_s) {
            out.push(Violation::new(
                "sampling_interval_s",
                "sampling_interval_s > 0",
            ));
        }
        if !(self.sampling_interval_s < self.sampling_window_s) {
            out.push(Violation::new(
                "sampling_interval_s",
                "sampling_interval_s < sampling_window_s",
            ));
        }
        self.workload.violations("workload", &mut out);
        for role in ArmRole::ALL {
            let arm = self.arm(*role);
            let path = role.as_str();
            if arm.label.trim().is_empty() {
                out.push(Violation::new(format!("{path}.label"), "label nonempty"));
            }
            arm.cluster.violations(&format!("{path}.cluster"), &mut out);
            if arm.cluster.workers().next().is_none() {
                out.push(Violation::new(
                    format!("{path}.cluster.nodes"),
                    "at least one worker node",
                ));
            }
        }
        if self.baseline.label == self.treatment.label {
            out.push(Violation::new("treatment.label", "arm labels distinct"));
        }
        if let Some(ph) = &self.phases {
            if ph.node_counts.is_empty() {
                out.push(Violation::new("phases.node_counts", "node_counts nonempty"));
            }
            if ph.node_counts.windows(2).any(|w| w[0] >= w[1]) {
                out.push(Violation::new(
                    "phases.node_counts",
                    "node_counts strictly increasing",
                ));
            }
            if ph.phases.is_empty() {
                out.push(Violation::new("phases.stages", "stages nonempty"));
            }
            let mut ids = BTreeSet::new();
            for (i, m) in ph.phases.iter().enumerate() {
                let p = format!("phases.stages[{i}]");
                if !ids.insert(&m.phase) {
                    out.push(Violation::new(format!("{p}.phase"), "phase ids unique"));
                }
                if !finite_nonneg(m.intercept_s) {
                    out.push(Violation::new(
                        format!("{p}.intercept_s"),
                        "intercept_s >= 0",
                    ));
                }
                if !m.slope_s.is_finite() {
                    out.push(Violation::new(format!("{p}.slope_s"), "slope_s finite"));
                }
                if !(m.jitter_rel >= 0.0 && m.jitter_rel < 1.0) {
                    out.push(Violation::new(
                        format!("{p}.jitter_rel"),
                        "jitter_rel in [0, 1)",
                    ));
                }
                for n in &ph.node_counts {
                    let worst =
                        m.intercept_s + (m.slope_s * f64::from(*n)).min(0.0) * (1.0 + m.jitter_rel);
                    if worst < 0.0 {
                        out.push(Violation::new(
                            format!("{p}.slope_s"),
                            format!("duration nonnegative at {n} nodes"),
                        ));
                    }
                }
            }
        }
        let mut configs = BTreeSet::new();
        for (i, fc) in self.footprint.iter().enumerate() {
            let p = format!("footprint[{i}]");
            if fc.name.trim().is_empty() {
                out.push(Violation::new(format!("{p}.name"), "name nonempty"));
            }
            if !configs.insert(fc.name.as_str()) {
                out.push(Violation::new(
                    format!("{p}.name"),
                    "footprint config names unique",
                ));
            }
            for role in ArmRole::ALL {
                let profiles = match role {
                    ArmRole::Baseline => &fc.baseline,
                    ArmRole::Treatment => &fc.treatment,
                };
                let cluster = &self.arm(*role).cluster;
                let mut nodes = BTreeSet::new();
                for (j, rp) in profiles.iter().enumerate() {
                    let rp_path = format!("{p}.{role}[{j}]");
                    if cluster.node(&rp.node).is_none() {
                        out.push(Violation::new(
                            format!("{rp_path}.node"),
                            format!("node `{}` declared in the {role} cluster", rp.node),
                        ));
                    }
                    if !nodes.insert(rp.node.as_str()) {
                        out.push(Violation::new(
                            format!("{rp_path}.node"),
                            "one profile per node",
                        ));
                    }
                    rp.violations(&rp_path, &mut out);
                }
            }
        }
        out
    }
}

/// Returns the spec unchanged when every invariant holds, otherwise the
/// complete violation list.
pub fn validate_experiment(spec: ExperimentSpec) -> Result<ExperimentSpec, Vec<Violation>> {
    let violations = spec.violations();
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: PhaseId,
    pub start: Nanos,
    pub end: Nanos,
}

impl PhaseSpan {
    pub fn duration(&self) -> Nanos {
        self.end.saturating_sub(self.start)
    }
}

pub const TIMELINE_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimeline {
    pub phases: Vec<PhaseSpan>,
    pub total_s: f64,
}

impl PhaseTimeline {
    /// Builds a timeline whose total is the integer sum of its phase durations.
    pub fn from_spans(phases: Vec<PhaseSpan>) -> Self {
        let total: u64 = phases.iter().map(|p| p.duration().0).sum();
        Self {
            phases,
            total_s: Nanos(total).as_secs_f64(),
        }
    }

    pub fn duration_s(&self, phase: &PhaseId) -> Option<f64> {
        self.phases
            .iter()
            .find(|p| &p.phase == phase)
            .map(|p| p.duration().as_secs_f64())
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, p) in self.phases.iter().enumerate() {
            if p.end < p.start {
                out.push(Violation::new(format!("phases[{i}]"), "end >= start"));
            }
        }
        for (i, w) in self.phases.windows(2).enumerate() {
            if w[1].start < w[0].end {
                out.push(Violation::new(
                    format!("phases[{}]", i + 1),
                    "phases non-overlapping and ordered by start",
                ));
            }
        }
        let sum: u64 = self.phases.iter().map(|p| p.duration().0).sum();
        let sum_s = Nanos(sum).as_secs_f64();
        if !((self.total_s - sum_s).abs() <= TIMELINE_TOLERANCE_S) {
            out.push(Violation::new(
                "total_s",
                format!(
                    "total_s {} equals phase-duration sum {}",
                    self.total_s, sum_s
                ),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub entity: EntityKind,
    pub entity_id: String,
    pub transition: Transition,
    pub at: Nanos,
}

/// Checks per-entity ordering: transitions advance one step at a time in
/// declared order with nondecreasing timestamps.
pub fn lifecycle_violations(events: &[LifecycleEvent]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut last: BTreeMap<(EntityKind, &str), (Transition, Nanos)> = BTreeMap::new();
    for ev in events {
        let key = (ev.entity, ev.entity_id.as_str());
        let expected_prev = Transition::ALL
            .iter()
            .position(|t| *t == ev.transition)
            .and_then(|i| i.checked_sub(1))
            .map(|i| Transition::ALL[i]);
        match (last.get(&key), expected_prev) {
            (None, None) => {}
            (Some((prev, at)), Some(want)) if *prev == want => {
                if ev.at < *at {
                    out.push(Violation::new(
                        &ev.entity_id,
                        "timestamps nondecreasing per entity",
                    ));
                }
            }
            _ => out.push(Violation::new(
                &ev.entity_id,
                format!("transition `{}` out of order", ev.transition),
            )),
        }
        last.insert(key, (ev.transition, ev.at));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub phase: DeploymentPhase,
    pub action_id: String,
    pub description: String,
    pub mode: ActionMode,
}

/// Enumerated deployment actions of one method (baseline or treatment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLedger {
    pub label: String,
    pub entries: Vec<ActionEntry>,
    /// Published MIP values to compare against, keyed by phase.
    pub reference_mip: BTreeMap<DeploymentPhase, f64>,
}

impl ActionLedger {
    pub fn manual_count(&self, phase: DeploymentPhase) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.phase == phase && e.mode == ActionMode::Manual)
            .count() as u64
    }

    pub fn phases(&self) -> BTreeSet<DeploymentPhase> {
        self.entries.iter().map(|e| e.phase).collect()
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .filter(|e| !seen.insert(e.action_id.as_str()))
            .map(|e| {
                Violation::new(
                    "action_id",
                    format!("action_ids unique (`{}` repeated)", e.action_id),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub at: Nanos,
    pub cpu_util: f64,
    pub mem_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub node: String,
    pub samples: Vec<Sample>,
}

impl SampleSeries {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.samples.windows(2).any(|w| w[1].at <= w[0].at) {
            out.push(Violation::new(&self.node, "timestamps strictly increasing"));
        }
        if self
            .samples
            .iter()
            .any(|s| !(0.0..=1.0).contains(&s.cpu_util))
        {
            out.push(Violation::new(&self.node, "cpu_util within [0, 1]"));
        }
        if self.samples.iter().any(|s| !finite_nonneg(s.mem_gb)) {
            out.push(Violation::new(&self.node, "mem_gb >= 0"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n: u64,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub p95: f64,
    pub stdev: f64,
}

impl StatsSummary {
    pub fn violations(&self, path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 1 {
            out.push(Violation::new(path, "n >= 1"));
        }
        if !(self.min <= self.avg && self.avg <= self.max) {
            out.push(Violation::new(path, "min <= avg <= max"));
        }
        if !(self.min <= self.p95 && self.p95 <= self.max) {
            out.push(Violation::new(path, "min <= p95 <= max"));
        }
        if !(self.stdev >= 0.0) {
            out.push(Violation::new(path, "stdev >= 0"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub node: String,
    pub power_w: f64,
    pub energy_kwh_day: f64,
}

//! Built-in calibrated bundles. Each bundle is a spec document, optionally
//! with a pair of action ledgers, whose processed outputs land on the
//! published reference values.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::metrics::write_ledger;
use crate::model::{
    ActionEntry, ActionLedger, ActionMode, Arch, ArmSpec, ClusterSpec, DeploymentPhase,
    ExperimentSpec, FootprintConfig, LedgerRefs, NodeProfile, NodeRole, PhaseId, PhaseModel,
    PhaseScenario, ResourceProfile, ServiceSpec, WorkloadSpec, DEFAULT_PODS_PER_CORE,
};
use crate::specdoc::experiment_to_text;

pub const FIXTURE_NAMES: [&str; 7] = [
    "fig4a",
    "fig4b",
    "table3",
    "table4",
    "table5",
    "inf2-150pods",
    "inf6-bookinfo",
];

pub const SPEC_FILE: &str = "spec.yaml";
pub const BASELINE_LEDGER_FILE: &str = "baseline-ledger.csv";
pub const TREATMENT_LEDGER_FILE: &str = "treatment-ledger.csv";

pub const BASELINE_LABEL: &str = "k8s";
pub const TREATMENT_LABEL: &str = "codeco";

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub spec: ExperimentSpec,
    /// Baseline then treatment.
    pub ledgers: Option<(ActionLedger, ActionLedger)>,
}

impl Fixture {
    /// File name and contents of every file in the bundle.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![(SPEC_FILE.to_string(), experiment_to_text(&self.spec))];
        if let Some((b, t)) = &self.ledgers {
            out.push((BASELINE_LEDGER_FILE.to_string(), write_ledger(b)));
            out.push((TREATMENT_LEDGER_FILE.to_string(), write_ledger(t)));
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        self.files()
            .into_iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                fs::write(&path, contents)?;
                Ok(path)
            })
            .collect()
    }
}

pub fn fixture(name: &str) -> Option<Fixture> {
    let (spec, ledgers) = match name {
        "fig4a" => (fig4a(), None),
        "fig4b" => (fig4b(), None),
        "table3" => table3(),
        "table4" => (table4(), None),
        "table5" => (table5(), None),
        "inf2-150pods" => (inf2_150pods(), None),
        "inf6-bookinfo" => (inf6_bookinfo(), None),
        _ => return None,
    };
    Some(Fixture {
        name: name.to_string(),
        spec,
        ledgers,
    })
}

struct Latency {
    base: f64,
    slope: f64,
    deletion: f64,
    jitter: f64,
}

const FLAT: Latency = Latency {
    base: 2.0,
    slope: 0.1,
    deletion: 2.0,
    jitter: 0.0,
};

fn node(
    name: &str,
    role: NodeRole,
    cores: u32,
    mem: f64,
    arch: Arch,
    power: (f64, f64),
    l: &Latency,
) -> NodeProfile {
    NodeProfile {
        name: name.into(),
        role,
        cpu_cores: cores,
        mem_gb: mem,
        arch,
        p_idle_w: power.0,
        p_max_w: power.1,
        readiness_base_s: l.base,
        readiness_slope_s: l.slope,
        deletion_base_s: l.deletion,
        jitter_rel: l.jitter,
    }
}

fn cluster(name: &str, nodes: Vec<NodeProfile>) -> ClusterSpec {
    ClusterSpec {
        name: name.into(),
        nodes,
        flavor_label: "k8s".into(),
        pods_per_core: DEFAULT_PODS_PER_CORE,
    }
}

/// Control plane plus two workers of identical shape.
fn three_node(name: &str, power: (f64, f64), cores: u32, arch: Arch, l: &Latency) -> ClusterSpec {
    cluster(
        name,
        vec![
            node("master", NodeRole::ControlPlane, 4, 16.0, arch, power, l),
            node("worker-1", NodeRole::Worker, cores, 16.0, arch, power, l),
            node("worker-2", NodeRole::Worker, cores, 16.0, arch, power, l),
        ],
    )
}

fn arms(baseline: ClusterSpec, treatment: ClusterSpec) -> (ArmSpec, ArmSpec) {
    (
        ArmSpec {
            label: BASELINE_LABEL.into(),
            cluster: baseline,
        },
        ArmSpec {
            label: TREATMENT_LABEL.into(),
            cluster: treatment,
        },
    )
}

fn base_spec(id: &str, cluster: ClusterSpec) -> ExperimentSpec {
    let (baseline, treatment) = arms(cluster.clone(), cluster);
    ExperimentSpec {
        id: id.into(),
        workload: WorkloadSpec::PauseBatch { batch_size: 10 },
        scale_points: vec![10],
        repetitions: 1,
        seed: 42,
        sampling_window_s: 1800.0,
        sampling_interval_s: 15.0,
        baseline,
        treatment,
        phases: None,
        footprint: Vec::new(),
        ledgers: None,
    }
}

/// Affine model through two measured points.
fn through(phase: PhaseId, lo: (u32, f64), hi: (u32, f64)) -> PhaseModel {
    let slope = (hi.1 - lo.1) / f64::from(hi.0 - lo.0);
    PhaseModel {
        phase,
        intercept_s: lo.1 - slope * f64::from(lo.0),
        slope_s: slope,
        jitter_rel: 0.0,
    }
}

fn phase_spec(id: &str, stages: &[(PhaseId, f64, f64)]) -> ExperimentSpec {
    let mut spec = base_spec(
        id,
        three_node("codef", (35.0, 95.0), 4, Arch::X86_64, &FLAT),
    );
    spec.repetitions = 3;
    spec.phases = Some(PhaseScenario {
        node_counts: vec![3, 9],
        phases: stages
            .iter()
            .map(|(p, at3, at9)| through(p.clone(), (3, *at3), (9, *at9)))
            .collect(),
    });
    spec
}

fn fig4a() -> ExperimentSpec {
    phase_spec(
        "fig4a",
        &[
            (PhaseId::NodeDiscovery, 73.4, 168.8),
            (PhaseId::OsInstall, 167.7, 319.9),
            (PhaseId::K8sInstall, 291.2, 535.0),
        ],
    )
}

fn fig4b() -> ExperimentSpec {
    let c = |n: &str| PhaseId::Component(n.into());
    phase_spec(
        "fig4b",
        &[
            (c("Preparation"), 346.1, 389.2),
            (c("NetMA"), 624.6, 932.4),
            (c("PDLC"), 429.0, 483.5),
            (c("MDM"), 383.9, 427.3),
            (c("SWM"), 72.3, 70.7),
        ],
    )
}

fn ledger(label: &str, phases: &[(DeploymentPhase, &[&str], &[&str])]) -> ActionLedger {
    let mut entries = Vec::new();
    for (phase, manual, automated) in phases {
        let prefix = match phase {
            DeploymentPhase::ClusterDeployment => "cd",
            DeploymentPhase::K8sInstallation => "ki",
            DeploymentPhase::ServiceDeployment => "sd",
        };
        let tagged = manual
            .iter()
            .map(|d| (*d, ActionMode::Manual))
            .chain(automated.iter().map(|d| (*d, ActionMode::Automated)));
        for (i, (description, mode)) in tagged.enumerate() {
            entries.push(ActionEntry {
                phase: *phase,
                action_id: format!("{prefix}-{:02}", i + 1),
                description: description.to_string(),
                mode,
            });
        }
    }
    ActionLedger {
        label: label.into(),
        entries,
        reference_mip: Default::default(),
    }
}

const CLUSTER_STEPS: [&str; 19] = [
    "request VM quota on the target infrastructure",
    "instantiate control-plane VM",
    "instantiate worker VMs",
    "select OS image",
    "size disks and attach volumes",
    "configure VM networking",
    "generate SSH key pair",
    "distribute public keys to all nodes",
    "set up firewall rules",
    "open control-plane ports",
    "set hostnames",
    "populate /etc/hosts on every node",
    "configure time synchronization",
    "disable swap",
    "load kernel modules",
    "set sysctl networking parameters",
    "update OS packages",
    "reboot nodes",
    "verify SSH reachability",
];

const K8S_STEPS: [&str; 42] = [
    "add container runtime repository",
    "install containerd",
    "generate containerd default config",
    "enable systemd cgroup driver",
    "restart containerd",
    "enable containerd service",
    "add Kubernetes package repository",
    "import repository signing key",
    "install kubelet",
    "install kubeadm",
    "install kubectl",
    "pin Kubernetes package versions",
    "enable kubelet service",
    "write kubeadm init configuration",
    "choose pod network CIDR",
    "choose service CIDR",
    "pre-pull control-plane images",
    "run kubeadm init",
    "generate cluster certificates",
    "copy admin kubeconfig",
    "set kubeconfig ownership",
    "export KUBECONFIG",
    "verify API server health",
    "download CNI manifest",
    "edit CNI pod CIDR",
    "apply CNI manifest",
    "wait for CNI pods",
    "verify CoreDNS rollout",
    "create bootstrap token",
    "compute CA certificate hash",
    "assemble kubeadm join command",
    "copy join command to worker 1",
    "copy join command to worker 2",
    "run kubeadm join on worker 1",
    "run kubeadm join on worker 2",
    "label worker nodes",
    "verify node registration",
    "verify nodes Ready",
    "deploy metrics server",
    "run smoke-test pod",
    "verify cluster DNS resolution",
    "remove smoke-test pod",
];

const SERVICE_STEPS: [&str; 11] = [
    "retrieve cluster information",
    "retrieve cluster credentials",
    "install Prometheus",
    "install Kepler",
    "clone component repositories",
    "deploy ACM",
    "deploy NetMA",
    "deploy MDM",
    "deploy PDLC and SWM",
    "validate component deployment",
    "verify end-to-end functionality",
];

fn table3() -> (ExperimentSpec, Option<(ActionLedger, ActionLedger)>) {
    let mut spec = base_spec(
        "table3",
        three_node("inf6", (35.0, 95.0), 4, Arch::X86_64, &FLAT),
    );
    spec.ledgers = Some(LedgerRefs {
        baseline: BASELINE_LEDGER_FILE.into(),
        treatment: TREATMENT_LEDGER_FILE.into(),
    });
    let baseline = ledger(
        BASELINE_LABEL,
        &[
            (DeploymentPhase::ClusterDeployment, &CLUSTER_STEPS, &[]),
            (DeploymentPhase::K8sInstallation, &K8S_STEPS, &[]),
            (DeploymentPhase::ServiceDeployment, &SERVICE_STEPS, &[]),
        ],
    );
    let mut treatment = ledger(
        TREATMENT_LABEL,
        &[
            (
                DeploymentPhase::ClusterDeployment,
                &[
                    "write configuration file (infrastructure manager, credentials, node specifications)",
                    "declare the configuration file in the deployment script",
                    "run the deployment script",
                ],
                &CLUSTER_STEPS[..16],
            ),
            (
                DeploymentPhase::K8sInstallation,
                &[
                    "select Kubernetes distribution",
                    "select CNI plugin",
                    "set network parameters",
                    "run the installation script",
                ],
                &K8S_STEPS[..38],
            ),
            (
                DeploymentPhase::ServiceDeployment,
                &["run post_deploy.sh", "run validation scripts"],
                &SERVICE_STEPS[..9],
            ),
        ],
    );
    treatment
        .reference_mip
        .insert(DeploymentPhase::ClusterDeployment, 25.3);
    treatment
        .reference_mip
        .insert(DeploymentPhase::K8sInstallation, 9.52);
    treatment
        .reference_mip
        .insert(DeploymentPhase::ServiceDeployment, 18.18);
    (spec, Some((baseline, treatment)))
}

fn idle(node: &str, cpu_pct: f64, mem_gb: f64) -> ResourceProfile {
    ResourceProfile {
        node: node.into(),
        cpu_baseline: cpu_pct / 100.0,
        cpu_noise_amp: 0.0,
        mem_baseline_gb: mem_gb,
        mem_noise_amp_gb: 0.0,
    }
}

#[allow(clippy::approx_constant)]
fn table4() -> ExperimentSpec {
    let mut spec = base_spec(
        "table4",
        three_node("inf6", (35.0, 95.0), 4, Arch::X86_64, &FLAT),
    );
    spec.footprint = vec![FootprintConfig {
        name: "idle".into(),
        baseline: vec![
            idle("master", 1.76, 1.15),
            idle("worker-1", 1.10, 0.99),
            idle("worker-2", 0.69, 0.57),
        ],
        treatment: vec![
            idle("master", 4.66, 3.14),
            idle("worker-1", 3.81, 2.92),
            idle("worker-2", 2.30, 1.22),
        ],
    }];
    spec
}

#[allow(clippy::approx_constant)]
fn table5() -> ExperimentSpec {
    // Every simulated node runs as a container on one host; only the host
    // is profiled.
    let power = (60.0, 165.0);
    let host = cluster(
        "kind",
        vec![
            node(
                "host",
                NodeRole::ControlPlane,
                10,
                64.0,
                Arch::X86_64,
                power,
                &FLAT,
            ),
            node(
                "kind-worker",
                NodeRole::Worker,
                10,
                64.0,
                Arch::X86_64,
                power,
                &FLAT,
            ),
        ],
    );
    let mut spec = base_spec("table5", host);
    spec.footprint = [
        ("n3", (0.6, 4.91), (2.3, 12.18)),
        ("n5", (1.8, 4.98), (2.9, 12.92)),
        ("n10", (2.4, 5.42), (4.2, 14.88)),
        ("n20", (3.1, 6.28), (7.5, 17.70)),
    ]
    .into_iter()
    .map(|(name, b, t)| FootprintConfig {
        name: name.into(),
        baseline: vec![idle("host", b.0, b.1)],
        treatment: vec![idle("host", t.0, t.1)],
    })
    .collect();
    spec
}

fn jetson(name: &str, l: &Latency) -> ClusterSpec {
    let power = (15.0, 60.0);
    cluster(
        name,
        vec![
            node(
                "control-plane",
                NodeRole::ControlPlane,
                4,
                16.0,
                Arch::X86_64,
                power,
                l,
            ),
            node(
                "jetson-1",
                NodeRole::Worker,
                12,
                64.0,
                Arch::Arm64,
                power,
                l,
            ),
            node(
                "jetson-2",
                NodeRole::Worker,
                12,
                64.0,
                Arch::Arm64,
                power,
                l,
            ),
        ],
    )
}

fn inf2_150pods() -> ExperimentSpec {
    // Mean admit index at 150 pods over two workers is 38.
    let baseline = Latency {
        base: 1.0871,
        slope: 0.9643,
        deletion: 1.5,
        jitter: 0.05,
    };
    let treatment = Latency {
        base: 1.0329,
        slope: 1.4757,
        deletion: 1.6,
        jitter: 0.05,
    };
    let mut spec = base_spec("inf2-150pods", jetson("inf2", &baseline));
    spec.treatment.cluster = jetson("inf2", &treatment);
    spec.workload = WorkloadSpec::PauseBatch { batch_size: 150 };
    spec.scale_points = vec![10, 50, 100, 150];
    spec.repetitions = 5;
    spec
}

fn inf6_bookinfo() -> ExperimentSpec {
    // Six pods over two workers: the deepest admit index is 3.
    let baseline = Latency {
        base: 2.7,
        slope: 0.2,
        deletion: 3.9,
        jitter: 0.05,
    };
    let treatment = Latency {
        base: 9.9,
        slope: 0.3,
        deletion: 6.0,
        jitter: 0.05,
    };
    let mut spec = base_spec(
        "inf6-bookinfo",
        three_node("inf6", (35.0, 95.0), 4, Arch::X86_64, &baseline),
    );
    spec.treatment.cluster = three_node("inf6", (35.0, 95.0), 4, Arch::X86_64, &treatment);
    let svc = |name: &str, replicas, deps: &[&str]| ServiceSpec {
        name: name.into(),
        replicas,
        depends_on: deps.iter().map(|d| d.to_string()).collect(),
    };
    spec.workload = WorkloadSpec::MultiService {
        services: vec![
            svc("productpage", 1, &["details", "reviews"]),
            svc("details", 1, &[]),
            svc("reviews", 3, &["ratings"]),
            svc("ratings", 1, &[]),
        ],
    };
    spec.scale_points = vec![1];
    spec.repetitions = 5;
    spec
}

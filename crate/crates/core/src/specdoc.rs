//! Reading and writing experiment specs in the key-value document format.
//!
//! ```text
//! id: inf2-150pods
//! seed: 42
//! repetitions: 5
//! scalePoints: [10, 50, 100, 150]
//! sampling:
//!   windowS: 1800
//!   intervalS: 15
//! workload:
//!   kind: pause-batch          # or frontend-backend (replicas), multi-service (services)
//!   batchSize: 10
//! baseline:
//!   label: k8s
//!   cluster:
//!     name: inf2
//!     flavor: vanilla
//!     podsPerCore: 10          # optional, default 10
//!     nodes:
//!       - name: cp
//!         role: control-plane
//!         cpuCores: 4
//!         memGb: 16
//!         arch: x86_64
//!         pIdleW: 35
//!         pMaxW: 95
//!         readinessBaseS: 1.0871
//!         readinessSlopeS: 0.9643
//!         deletionBaseS: 1.5
//!         jitterRel: 0.05
//! treatment:
//!   ...same shape as baseline...
//! phases:                      # optional
//!   nodeCounts: [3, 9]
//!   stages:
//!     - phase: ND              # ND, OS_I, K8S_I or component:<name>
//!       interceptS: 25.7
//!       slopeS: 15.9
//!       jitterRel: 0           # optional, default 0
//! footprint:                   # optional
//!   - name: idle
//!     baseline:
//!       - node: cp
//!         cpu: 0.0176          # utilization fraction
//!         cpuNoise: 0          # optional, default 0
//!         memGb: 1.15
//!         memNoiseGb: 0        # optional, default 0
//!     treatment: [...]
//! ledgers:                     # optional, paths relative to the spec file
//!   baseline: baseline_ledger.csv
//!   treatment: treatment_ledger.csv
//! ```
//!
//! Unknown keys are errors here: a typo in a campaign definition should not
//! silently change what gets measured.

use thiserror::Error;

use crate::doc::{self, Fields, Issue, MapBuilder, Node, SyntaxError};
use crate::model::*;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{}", join_lines(.0))]
    Decode(Vec<Issue>),
    #[error("{}", join_lines(.0))]
    Invalid(Vec<Violation>),
}

fn join_lines<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

struct Decoder {
    issues: Vec<Issue>,
}

impl Decoder {
    fn record<T>(&mut self, r: Result<T, Issue>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.issues.push(e);
                None
            }
        }
    }

    fn fields<'a>(&mut self, node: &'a Node, path: &str) -> Option<Fields<'a>> {
        self.record(Fields::new(node, path))
    }

    fn finish(&mut self, f: &Fields<'_>) {
        self.issues.extend(f.unknown());
    }

    fn str(&mut self, f: &mut Fields<'_>, key: &str) -> Option<String> {
        let p = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        self.record(n.expect_str(&p))
    }

    fn u32(&mut self, f: &mut Fields<'_>, key: &str) -> Option<u32> {
        let p = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        self.record(n.expect_u32(&p))
    }

    fn u64(&mut self, f: &mut Fields<'_>, key: &str) -> Option<u64> {
        let p = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        self.record(n.expect_u64(&p))
    }

    fn f64(&mut self, f: &mut Fields<'_>, key: &str) -> Option<f64> {
        let p = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        self.record(n.expect_f64(&p))
    }

    fn f64_or(&mut self, f: &mut Fields<'_>, key: &str, default: f64) -> Option<f64> {
        let p = f.path(key);
        match f.get(key) {
            Some(n) => self.record(n.expect_f64(&p)),
            None => Some(default),
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(
        &mut self,
        f: &mut Fields<'_>,
        key: &str,
    ) -> Option<T> {
        let p = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        let s = self.record(n.expect_str(&p))?;
        self.record(s.parse::<T>().map_err(|e| n.issue(&p, e)))
    }

    fn list<'a>(&mut self, node: &'a Node, path: &str) -> Option<&'a [Node]> {
        self.record(
            node.as_list()
                .ok_or_else(|| node.issue(path, "expected a list")),
        )
    }

    fn u32_list(&mut self, f: &mut Fields<'_>, key: &str) -> Option<Vec<u32>> {
        let p = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        let items = self.list(n, &p)?;
        let mut out = Vec::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match self.record(item.expect_u32(&format!("{p}[{i}]"))) {
                Some(v) => out.push(v),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn str_list(&mut self, node: &Node, path: &str) -> Option<Vec<String>> {
        let items = self.list(node, path)?;
        let mut out = Vec::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match self.record(item.expect_str(&format!("{path}[{i}]"))) {
                Some(v) => out.push(v),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn node_profile(&mut self, node: &Node, path: &str) -> Option<NodeProfile> {
        let mut f = self.fields(node, path)?;
        let name = self.str(&mut f, "name");
        let role = self.parsed(&mut f, "role");
        let cpu_cores = self.u32(&mut f, "cpuCores");
        let mem_gb = self.f64(&mut f, "memGb");
        let arch = self.parsed(&mut f, "arch");
        let p_idle_w = self.f64(&mut f, "pIdleW");
        let p_max_w = self.f64(&mut f, "pMaxW");
        let readiness_base_s = self.f64(&mut f, "readinessBaseS");
        let readiness_slope_s = self.f64(&mut f, "readinessSlopeS");
        let deletion_base_s = self.f64(&mut f, "deletionBaseS");
        let jitter_rel = self.f64_or(&mut f, "jitterRel", 0.0);
        self.finish(&f);
        Some(NodeProfile {
            name: name?,
            role: role?,
            cpu_cores: cpu_cores?,
            mem_gb: mem_gb?,
            arch: arch?,
            p_idle_w: p_idle_w?,
            p_max_w: p_max_w?,
            readiness_base_s: readiness_base_s?,
            readiness_slope_s: readiness_slope_s?,
            deletion_base_s: deletion_base_s?,
            jitter_rel: jitter_rel?,
        })
    }

    fn cluster(&mut self, node: &Node, path: &str) -> Option<ClusterSpec> {
        let mut f = self.fields(node, path)?;
        let name = self.str(&mut f, "name");
        let flavor = match f.get("flavor") {
            Some(n) => self.record(n.expect_str(&f.path("flavor"))),
            None => Some(String::new()),
        };
        let pods_per_core = match f.get("podsPerCore") {
            Some(n) => self.record(n.expect_u32(&f.path("podsPerCore"))),
            None => Some(DEFAULT_PODS_PER_CORE),
        };
        let nodes_path = f.path("nodes");
        let nodes = f.require("nodes", &mut self.issues).and_then(|n| {
            let items = self.list(n, &nodes_path)?;
            let parsed: Vec<Option<NodeProfile>> = items
                .iter()
                .enumerate()
                .map(|(i, item)| self.node_profile(item, &format!("{nodes_path}[{i}]")))
                .collect();
            parsed.into_iter().collect::<Option<Vec<_>>>()
        });
        self.finish(&f);
        Some(ClusterSpec {
            name: name?,
            nodes: nodes?,
            flavor_label: flavor?,
            pods_per_core: pods_per_core?,
        })
    }

    fn arm(&mut self, node: &Node, path: &str) -> Option<ArmSpec> {
        let mut f = self.fields(node, path)?;
        let label = self.str(&mut f, "label");
        let cluster_path = f.path("cluster");
        let cluster = f
            .require("cluster", &mut self.issues)
            .and_then(|n| self.cluster(n, &cluster_path));
        self.finish(&f);
        Some(ArmSpec {
            label: label?,
            cluster: cluster?,
        })
    }

    fn workload(&mut self, node: &Node, path: &str) -> Option<WorkloadSpec> {
        let mut f = self.fields(node, path)?;
        let kind: Option<WorkloadKind> = self.parsed(&mut f, "kind");
        let w = match kind? {
            WorkloadKind::PauseBatch => {
                let n = self.u32(&mut f, "batchSize");
                n.map(|batch_size| WorkloadSpec::PauseBatch { batch_size })
            }
            WorkloadKind::FrontendBackend => {
                let n = self.u32(&mut f, "replicas");
                n.map(|replicas| WorkloadSpec::FrontendBackend { replicas })
            }
            WorkloadKind::MultiService => {
                let sp = f.path("services");
                f.require("services", &mut self.issues).and_then(|n| {
                    let items = self.list(n, &sp)?;
                    let services: Vec<Option<ServiceSpec>> = items
                        .iter()
                        .enumerate()
                        .map(|(i, item)| {
                            let ip = format!("{sp}[{i}]");
                            let mut sf = self.fields(item, &ip)?;
                            let name = self.str(&mut sf, "name");
                            let replicas = self.u32(&mut sf, "replicas");
                            let deps = match sf.get("dependsOn") {
                                Some(d) => self.str_list(d, &sf.path("dependsOn")),
                                None => Some(Vec::new()),
                            };
                            self.finish(&sf);
                            Some(ServiceSpec {
                                name: name?,
                                replicas: replicas?,
                                depends_on: deps?,
                            })
                        })
                        .collect();
                    services
                        .into_iter()
                        .collect::<Option<Vec<_>>>()
                        .map(|services| WorkloadSpec::MultiService { services })
                })
            }
        };
        // Fields of other kinds are reported as unknown keys.
        self.finish(&f);
        w
    }

    fn phases(&mut self, node: &Node, path: &str) -> Option<PhaseScenario> {
        let mut f = self.fields(node, path)?;
        let node_counts = self.u32_list(&mut f, "nodeCounts");
        let sp = f.path("stages");
        let stages = f.require("stages", &mut self.issues).and_then(|n| {
            let items = self.list(n, &sp)?;
            let models: Vec<Option<PhaseModel>> = items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let mut mf = self.fields(item, &format!("{sp}[{i}]"))?;
                    let phase = self.parsed(&mut mf, "phase");
                    let intercept_s = self.f64(&mut mf, "interceptS");
                    let slope_s = self.f64(&mut mf, "slopeS");
                    let jitter_rel = self.f64_or(&mut mf, "jitterRel", 0.0);
                    self.finish(&mf);
                    Some(PhaseModel {
                        phase: phase?,
                        intercept_s: intercept_s?,
                        slope_s: slope_s?,
                        jitter_rel: jitter_rel?,
                    })
                })
                .collect();
            models.into_iter().collect::<Option<Vec<_>>>()
        });
        self.finish(&f);
        Some(PhaseScenario {
            node_counts: node_counts?,
            phases: stages?,
        })
    }

    fn profiles(&mut self, node: &Node, path: &str) -> Option<Vec<ResourceProfile>> {
        let items = self.list(node, path)?;
        let parsed: Vec<Option<ResourceProfile>> = items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let mut f = self.fields(item, &format!("{path}[{i}]"))?;
                let node = self.str(&mut f, "node");
                let cpu = self.f64(&mut f, "cpu");
                let cpu_noise = self.f64_or(&mut f, "cpuNoise", 0.0);
                let mem = self.f64(&mut f, "memGb");
                let mem_noise = self.f64_or(&mut f, "memNoiseGb", 0.0);
                self.finish(&f);
                Some(ResourceProfile {
                    node: node?,
                    cpu_baseline: cpu?,
                    cpu_noise_amp: cpu_noise?,
                    mem_baseline_gb: mem?,
                    mem_noise_amp_gb: mem_noise?,
                })
            })
            .collect();
        parsed.into_iter().collect()
    }

    fn footprint(&mut self, node: &Node, path: &str) -> Option<Vec<FootprintConfig>> {
        let items = self.list(node, path)?;
        let parsed: Vec<Option<FootprintConfig>> = items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let ip = format!("{path}[{i}]");
                let mut f = self.fields(item, &ip)?;
                let name = self.str(&mut f, "name");
                let mut side = |d: &mut Self, key: &str| match f.get(key) {
                    Some(n) => d.profiles(n, &join(&ip, key)),
                    None => Some(Vec::new()),
                };
                let baseline = side(self, "baseline");
                let treatment = side(self, "treatment");
                self.finish(&f);
                Some(FootprintConfig {
                    name: name?,
                    baseline: baseline?,
                    treatment: treatment?,
                })
            })
            .collect();
        parsed.into_iter().collect()
    }

    fn spec(&mut self, root: &Node) -> Option<ExperimentSpec> {
        let mut f = self.fields(root, "")?;
        let id = self.str(&mut f, "id");
        let seed = self.u64(&mut f, "seed");
        let repetitions = self.u32(&mut f, "repetitions");
        let scale_points = self.u32_list(&mut f, "scalePoints");
        let sampling = f.require("sampling", &mut self.issues).and_then(|n| {
            let mut sf = self.fields(n, "sampling")?;
            let w = self.f64(&mut sf, "windowS");
            let i = self.f64(&mut sf, "intervalS");
            self.finish(&sf);
            Some((w?, i?))
        });
        let workload = f
            .require("workload", &mut self.issues)
            .and_then(|n| self.workload(n, "workload"));
        let baseline = f
            .require("baseline", &mut self.issues)
            .and_then(|n| self.arm(n, "baseline"));
        let treatment = f
            .require("treatment", &mut self.issues)
            .and_then(|n| self.arm(n, "treatment"));
        let phases = match f.get("phases") {
            Some(n) => self.phases(n, "phases").map(Some),
            None => Some(None),
        };
        let footprint = match f.get("footprint") {
            Some(n) => self.footprint(n, "footprint"),
            None => Some(Vec::new()),
        };
        let ledgers = match f.get("ledgers") {
            Some(n) => (|| {
                let mut lf = self.fields(n, "ledgers")?;
                let b = self.str(&mut lf, "baseline");
                let t = self.str(&mut lf, "treatment");
                self.finish(&lf);
                Some(Some(LedgerRefs {
                    baseline: b?,
                    treatment: t?,
                }))
            })(),
            None => Some(None),
        };
        self.finish(&f);
        let (sampling_window_s, sampling_interval_s) = sampling?;
        Some(ExperimentSpec {
            id: id?,
            workload: workload?,
            scale_points: scale_points?,
            repetitions: repetitions?,
            seed: seed?,
            sampling_window_s,
            sampling_interval_s,
            baseline: baseline?,
            treatment: treatment?,
            phases: phases?,
            footprint: footprint?,
            ledgers: ledgers?,
        })
    }
}

fn join(base: &str, key: &str) -> String {
    doc::join_path(base, key)
}

/// Parses a spec document and validates every invariant.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec, SpecError> {
    let root = doc::parse(text)?;
    let mut d = Decoder { issues: Vec::new() };
    let spec = d.spec(&root);
    if !d.issues.is_empty() {
        return Err(SpecError::Decode(d.issues));
    }
    let spec = spec.ok_or_else(|| SpecError::Decode(Vec::new()))?;
    validate_experiment(spec).map_err(SpecError::Invalid)
}

fn num(v: f64) -> Node {
    doc::plain(format!("{v}"))
}

fn int(v: impl std::fmt::Display) -> Node {
    doc::plain(v.to_string())
}

fn text(s: &str) -> Node {
    doc::plain(s)
}

fn cluster_node(c: &ClusterSpec) -> Node {
    let nodes = c
        .nodes
        .iter()
        .map(|n| {
            MapBuilder::new()
                .put("name", text(&n.name))
                .put("role", text(n.role.as_str()))
                .put("cpuCores", int(n.cpu_cores))
                .put("memGb", num(n.mem_gb))
                .put("arch", text(n.arch.as_str()))
                .put("pIdleW", num(n.p_idle_w))
                .put("pMaxW", num(n.p_max_w))
                .put("readinessBaseS", num(n.readiness_base_s))
                .put("readinessSlopeS", num(n.readiness_slope_s))
                .put("deletionBaseS", num(n.deletion_base_s))
                .put("jitterRel", num(n.jitter_rel))
                .build()
        })
        .collect();
    MapBuilder::new()
        .put("name", text(&c.name))
        .put("flavor", text(&c.flavor_label))
        .put("podsPerCore", int(c.pods_per_core))
        .put("nodes", doc::list(nodes))
        .build()
}

fn profiles_node(ps: &[ResourceProfile]) -> Node {
    doc::list(
        ps.iter()
            .map(|p| {
                MapBuilder::new()
                    .put("node", text(&p.node))
                    .put("cpu", num(p.cpu_baseline))
                    .put("cpuNoise", num(p.cpu_noise_amp))
                    .put("memGb", num(p.mem_baseline_gb))
                    .put("memNoiseGb", num(p.mem_noise_amp_gb))
                    .build()
            })
            .collect(),
    )
}

/// Renders a spec; `parse_experiment(&experiment_to_text(s)) == Ok(s)` for
/// every valid spec.
pub fn experiment_to_text(spec: &ExperimentSpec) -> String {
    let workload = match &spec.workload {
        WorkloadSpec::PauseBatch { batch_size } => MapBuilder::new()
            .put("kind", text("pause-batch"))
            .put("batchSize", int(batch_size)),
        WorkloadSpec::FrontendBackend { replicas } => MapBuilder::new()
            .put("kind", text("frontend-backend"))
            .put("replicas", int(replicas)),
        WorkloadSpec::MultiService { services } => {
            MapBuilder::new().put("kind", text("multi-service")).put(
                "services",
                doc::list(
                    services
                        .iter()
                        .map(|s| {
                            MapBuilder::new()
                                .put("name", text(&s.name))
                                .put("replicas", int(s.replicas))
                                .put(
                                    "dependsOn",
                                    doc::list(s.depends_on.iter().map(|d| text(d)).collect()),
                                )
                                .build()
                        })
                        .collect(),
                ),
            )
        }
    }
    .build();
    let arm = |a: &ArmSpec| {
        MapBuilder::new()
            .put("label", text(&a.label))
            .put("cluster", cluster_node(&a.cluster))
            .build()
    };
    let phases = spec.phases.as_ref().map(|p| {
        MapBuilder::new()
            .put(
                "nodeCounts",
                doc::list(p.node_counts.iter().map(int).collect()),
            )
            .put(
                "stages",
                doc::list(
                    p.phases
                        .iter()
                        .map(|m| {
                            MapBuilder::new()
                                .put("phase", text(&m.phase.to_string()))
                                .put("interceptS", num(m.intercept_s))
                                .put("slopeS", num(m.slope_s))
                                .put("jitterRel", num(m.jitter_rel))
                                .build()
                        })
                        .collect(),
                ),
            )
            .build()
    });
    let footprint = (!spec.footprint.is_empty()).then(|| {
        doc::list(
            spec.footprint
                .iter()
                .map(|fc| {
                    MapBuilder::new()
                        .put("name", text(&fc.name))
                        .put("baseline", profiles_node(&fc.baseline))
                        .put("treatment", profiles_node(&fc.treatment))
                        .build()
                })
                .collect(),
        )
    });
    let ledgers = spec.ledgers.as_ref().map(|l| {
        MapBuilder::new()
            .put("baseline", text(&l.baseline))
            .put("treatment", text(&l.treatment))
            .build()
    });
    let root = MapBuilder::new()
        .put("id", text(&spec.id))
        .put("seed", int(spec.seed))
        .put("repetitions", int(spec.repetitions))
        .put(
            "scalePoints",
            doc::list(spec.scale_points.iter().map(int).collect()),
        )
        .put(
            "sampling",
            MapBuilder::new()
                .put("windowS", num(spec.sampling_window_s))
                .put("intervalS", num(spec.sampling_interval_s))
                .build(),
        )
        .put("workload", workload)
        .put("baseline", arm(&spec.baseline))
        .put("treatment", arm(&spec.treatment))
        .put_opt("phases", phases)
        .put_opt("footprint", footprint)
        .put_opt("ledgers", ledgers)
        .build();
    doc::to_text(&root.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
id: demo
seed: 42
repetitions: 2
scalePoints: [10, 50]
sampling:
  windowS: 1800
  intervalS: 15
workload:
  kind: pause-batch
  batchSize: 10
baseline:
  label: k8s
  cluster:
    name: c
    nodes:
      - name: cp
        role: control-plane
        cpuCores: 4
        memGb: 16
        arch: x86_64
        pIdleW: 35
        pMaxW: 95
        readinessBaseS: 2
        readinessSlopeS: 0.1
        deletionBaseS: 1
      - name: w1
        role: worker
        cpuCores: 8
        memGb: 32
        arch: arm64
        pIdleW: 35
        pMaxW: 95
        readinessBaseS: 2
        readinessSlopeS: 0.1
        deletionBaseS: 1
treatment:
  label: codeco
  cluster:
    name: c
    nodes:
      - name: cp
        role: control-plane
        cpuCores: 4
        memGb: 16
        arch: x86_64
        pIdleW: 35
        pMaxW: 95
        readinessBaseS: 3
        readinessSlopeS: 0.1
        deletionBaseS: 1
      - name: w1
        role: worker
        cpuCores: 8
        memGb: 32
        arch: arm64
        pIdleW: 35
        pMaxW: 95
        readinessBaseS: 3
        readinessSlopeS: 0.1
        deletionBaseS: 1
";

    #[test]
    fn minimal_spec_parses_and_round_trips() {
        let spec = parse_experiment(MINIMAL).unwrap();
        assert_eq!(spec.scale_points, vec![10, 50]);
        assert_eq!(spec.baseline.cluster.pods_per_core, DEFAULT_PODS_PER_CORE);
        assert_eq!(spec.treatment.cluster.nodes[1].arch, Arch::Arm64);
        let text = experiment_to_text(&spec);
        assert_eq!(parse_experiment(&text).unwrap(), spec);
        assert_eq!(experiment_to_text(&parse_experiment(&text).unwrap()), text);
    }

    #[test]
    fn decode_errors_are_positioned_and_complete() {
        let broken = MINIMAL
            .replace("repetitions: 2", "repetitions: two")
            .replace("role: worker", "role: boss")
            .replace("seed: 42\n", "seed: 42\nextra: 1\n");
        let SpecError::Decode(issues) = parse_experiment(&broken).unwrap_err() else {
            panic!("expected decode error")
        };
        assert!(
            issues
                .iter()
                .any(|i| i.path == "repetitions" && i.pos.line == 4),
            "{issues:?}"
        );
        assert_eq!(issues.len(), 4, "{issues:?}");
        assert!(issues
            .iter()
            .any(|i| i.path == "extra" && i.message == "unknown key"));
        assert!(issues
            .iter()
            .any(|i| i.path.ends_with("nodes[1].role")
                && i.message.contains("control-plane, worker")));
    }

    #[test]
    fn invariant_violations_surface_after_decoding() {
        let broken = MINIMAL.replace("scalePoints: [10, 50]", "scalePoints: []");
        let SpecError::Invalid(v) = parse_experiment(&broken).unwrap_err() else {
            panic!("expected violations")
        };
        assert!(v.iter().any(|v| v.rule == "scale_points nonempty"));
    }

    #[test]
    fn wrong_kind_fields_are_rejected() {
        let broken = MINIMAL.replace("  batchSize: 10\n", "  batchSize: 10\n  replicas: 3\n");
        let SpecError::Decode(issues) = parse_experiment(&broken).unwrap_err() else {
            panic!()
        };
        assert_eq!(issues[0].path, "workload.replicas");
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = parse_experiment("id: x\n  seed: 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}

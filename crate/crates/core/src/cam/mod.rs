//! Application manifests: services plus the intents they run under (QoS
//! tier, service channels with bandwidth/delay guarantees, energy budget).
//!
//! ```text
//! appName: bookinfo
//! performanceProfile: Greenness
//! appEnergyLimit: "20"
//! appFailureTolerance: ""
//! schedulerName: qos-scheduler
//! complianceClass: gdpr
//! qosClass: Gold
//! securityClass: baseline
//! services:
//!   - name: frontend
//!     image: registry.example/frontend:1.0
//!     replicas: 2
//! serviceChannels:
//!   - from: frontend
//!     to: backend
//!     serviceClass: ASSURED
//!     bandwidth: "5M"
//!     maxDelay: "10ms"
//! ```

mod units;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{self, Fields, Issue, MapBuilder, Node, SyntaxError};
use crate::model::{string_enum, Violation};

pub use units::{format_bandwidth, format_delay, parse_bandwidth, parse_delay, UnitError};

pub const DEFAULT_SCHEDULER: &str = "default-scheduler";

string_enum!(QosClass {
    Gold => "Gold",
    Silver => "Silver",
    Bronze => "Bronze",
});

string_enum!(ServiceClass {
    Assured => "ASSURED",
    BestEffort => "BESTEFFORT",
});

/// Optimization goal. Values outside the known set pass through with a
/// warning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerformanceProfile {
    Performance,
    Greenness,
    Cost,
    Other(String),
}

impl PerformanceProfile {
    pub const KNOWN: &'static str = "Performance, Greenness, Cost";

    pub fn parse(s: &str) -> Self {
        match s {
            "Performance" => Self::Performance,
            "Greenness" => Self::Greenness,
            "Cost" => Self::Cost,
            other => Self::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Self::Performance => "Performance",
            Self::Greenness => "Greenness",
            Self::Cost => "Cost",
            Self::Other(s) => s,
        }
    }
}

impl fmt::Display for PerformanceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CamService {
    pub name: String,
    pub image: String,
    pub replicas: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceChannel {
    pub from_service: String,
    pub to_service: String,
    pub service_class: ServiceClass,
    pub bandwidth_bps: u64,
    pub max_delay_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamManifest {
    pub app_name: String,
    pub performance_profile: Option<PerformanceProfile>,
    /// Unitless: the manifest gives the budget as a bare decimal string.
    pub app_energy_limit: Option<f64>,
    pub app_failure_tolerance: Option<String>,
    pub scheduler_name: String,
    pub service_channels: Vec<ServiceChannel>,
    pub compliance_class: Option<String>,
    pub qos_class: Option<QosClass>,
    pub security_class: Option<String>,
    pub services: Vec<CamService>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCam {
    pub manifest: CamManifest,
    /// Unknown keys and pass-through values.
    pub warnings: Vec<Issue>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CamError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{} problem(s):\n{}", .0.len(), lines(.0))]
    Invalid(Vec<Issue>),
    #[error("{} violation(s):\n{}", .0.len(), lines(.0))]
    Violations(Vec<Violation>),
}

fn lines<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CamError {
    /// Number of individual findings carried by the error.
    pub fn count(&self) -> usize {
        match self {
            CamError::Syntax(_) => 1,
            CamError::Invalid(v) => v.len(),
            CamError::Violations(v) => v.len(),
        }
    }
}

struct Reader {
    issues: Vec<Issue>,
    warnings: Vec<Issue>,
}

impl Reader {
    fn take<T>(&mut self, r: Result<T, Issue>) -> Option<T> {
        r.map_err(|e| self.issues.push(e)).ok()
    }

    fn opt_str(&mut self, f: &mut Fields<'_>, key: &str) -> Option<String> {
        let path = f.path(key);
        let n = f.get(key)?;
        self.take(n.expect_str(&path))
    }

    fn enum_field<T: std::str::FromStr<Err = String>>(
        &mut self,
        f: &mut Fields<'_>,
        key: &str,
    ) -> Option<T> {
        let path = f.path(key);
        let n = f.get(key)?;
        let s = self.take(n.expect_str(&path))?;
        self.take(s.parse::<T>().map_err(|e| n.issue(&path, e)))
    }

    fn unit(
        &mut self,
        f: &mut Fields<'_>,
        key: &str,
        parse: fn(&str) -> Result<u64, UnitError>,
    ) -> Option<u64> {
        let path = f.path(key);
        let n = f.require(key, &mut self.issues)?;
        let s = self.take(n.expect_str(&path))?;
        self.take(parse(&s).map_err(|e| n.issue(&path, e.to_string())))
    }

    fn finish(&mut self, f: &Fields<'_>) {
        self.warnings.extend(f.unknown());
    }

    fn service(&mut self, node: &Node, path: &str) -> Option<CamService> {
        let mut f = self.take(Fields::new(node, path))?;
        let name = f
            .require("name", &mut self.issues)
            .and_then(|n| self.take(n.expect_str(&doc::join_path(path, "name"))));
        let image = f
            .require("image", &mut self.issues)
            .and_then(|n| self.take(n.expect_str(&doc::join_path(path, "image"))));
        let replicas = match f.get("replicas") {
            Some(n) => self.take(n.expect_u32(&doc::join_path(path, "replicas"))),
            None => Some(1),
        };
        self.finish(&f);
        Some(CamService {
            name: name?,
            image: image?,
            replicas: replicas?,
        })
    }

    fn channel(&mut self, node: &Node, path: &str) -> Option<ServiceChannel> {
        let mut f = self.take(Fields::new(node, path))?;
        let from = f
            .require("from", &mut self.issues)
            .and_then(|n| self.take(n.expect_str(&doc::join_path(path, "from"))));
        let to = f
            .require("to", &mut self.issues)
            .and_then(|n| self.take(n.expect_str(&doc::join_path(path, "to"))));
        let class_path = f.path("serviceClass");
        let class = f.require("serviceClass", &mut self.issues).and_then(|n| {
            let s = self.take(n.expect_str(&class_path))?;
            self.take(
                s.parse::<ServiceClass>()
                    .map_err(|e| n.issue(&class_path, e)),
            )
        });
        let bandwidth = self.unit(&mut f, "bandwidth", parse_bandwidth);
        let delay = self.unit(&mut f, "maxDelay", parse_delay);
        self.finish(&f);
        Some(ServiceChannel {
            from_service: from?,
            to_service: to?,
            service_class: class?,
            bandwidth_bps: bandwidth?,
            max_delay_ns: delay?,
        })
    }

    fn items<T>(
        &mut self,
        f: &mut Fields<'_>,
        key: &str,
        each: fn(&mut Self, &Node, &str) -> Option<T>,
    ) -> Option<Vec<T>> {
        let path = f.path(key);
        let Some(n) = f.get(key) else {
            return Some(Vec::new());
        };
        let list = self.take(n.as_list().ok_or_else(|| n.issue(&path, "expected a list")))?;
        let parsed: Vec<Option<T>> = list
            .iter()
            .enumerate()
            .map(|(i, item)| each(self, item, &format!("{path}[{i}]")))
            .collect();
        parsed.into_iter().collect()
    }

    fn manifest(&mut self, root: &Node) -> Option<CamManifest> {
        let mut f = self.take(Fields::new(root, ""))?;
        let app_name = f
            .require("appName", &mut self.issues)
            .and_then(|n| self.take(n.expect_str("appName")));
        let performance_profile = f.get("performanceProfile").and_then(|n| {
            let s = self.take(n.expect_str("performanceProfile"))?;
            let p = PerformanceProfile::parse(&s);
            if let PerformanceProfile::Other(v) = &p {
                self.warnings.push(n.issue(
                    "performanceProfile",
                    format!(
                        "`{v}` is not one of {{{}}}; passed through",
                        PerformanceProfile::KNOWN
                    ),
                ));
            }
            Some(p)
        });
        let energy_present = f.get("appEnergyLimit");
        let app_energy_limit =
            energy_present.and_then(|n| {
                let parsed = n
                    .as_str()
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v >= 0.0);
                self.take(parsed.ok_or_else(|| {
                    n.issue("appEnergyLimit", "expected a nonnegative decimal string")
                }))
            });
        let app_failure_tolerance = self.opt_str(&mut f, "appFailureTolerance");
        let scheduler_name = self
            .opt_str(&mut f, "schedulerName")
            .unwrap_or_else(|| DEFAULT_SCHEDULER.to_string());
        let compliance_class = self.opt_str(&mut f, "complianceClass");
        let security_class = self.opt_str(&mut f, "securityClass");
        let qos_present = f.get("qosClass").is_some();
        let qos_class = self.enum_field::<QosClass>(&mut f, "qosClass");
        let services = self.items(&mut f, "services", Self::service);
        let channels = self.items(&mut f, "serviceChannels", Self::channel);
        self.finish(&f);
        if (energy_present.is_some() && app_energy_limit.is_none())
            || (qos_present && qos_class.is_none())
        {
            return None;
        }
        Some(CamManifest {
            app_name: app_name?,
            performance_profile,
            app_energy_limit,
            app_failure_tolerance,
            scheduler_name,
            service_channels: channels?,
            compliance_class,
            qos_class,
            security_class,
            services: services?,
        })
    }
}

/// Parses and validates a manifest document. Unit fields are normalized;
/// unknown keys become warnings.
pub fn parse_cam(document: &str) -> Result<ParsedCam, CamError> {
    let root = doc::parse(document)?;
    let mut reader = Reader {
        issues: Vec::new(),
        warnings: Vec::new(),
    };
    let manifest = reader.manifest(&root);
    if !reader.issues.is_empty() {
        return Err(CamError::Invalid(reader.issues));
    }
    let manifest = manifest.ok_or_else(|| CamError::Invalid(Vec::new()))?;
    let violations = validate_cam(&manifest);
    if !violations.is_empty() {
        return Err(CamError::Violations(violations));
    }
    Ok(ParsedCam {
        manifest,
        warnings: reader.warnings,
    })
}

/// Cross-field checks. An empty list means the manifest is valid.
pub fn validate_cam(m: &CamManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.app_name.trim().is_empty() {
        out.push(Violation::new("appName", "appName nonempty"));
    }
    if m.scheduler_name.trim().is_empty() {
        out.push(Violation::new("schedulerName", "schedulerName nonempty"));
    }
    if let Some(e) = m.app_energy_limit {
        if !(e.is_finite() && e >= 0.0) {
            out.push(Violation::new("appEnergyLimit", "appEnergyLimit >= 0"));
        }
    }
    let mut names = BTreeSet::new();
    for (i, s) in m.services.iter().enumerate() {
        let p = format!("services[{i}]");
        if s.name.trim().is_empty() {
            out.push(Violation::new(format!("{p}.name"), "service name nonempty"));
        } else if !names.insert(s.name.as_str()) {
            out.push(Violation::new(
                format!("{p}.name"),
                format!("service names unique (`{}` repeated)", s.name),
            ));
        }
        if s.image.trim().is_empty() {
            out.push(Violation::new(format!("{p}.image"), "image nonempty"));
        }
        if s.replicas < 1 {
            out.push(Violation::new(format!("{p}.replicas"), "replicas >= 1"));
        }
    }
    let mut pairs = BTreeSet::new();
    for (i, c) in m.service_channels.iter().enumerate() {
        let p = format!("serviceChannels[{i}]");
        for (field, svc) in [("from", &c.from_service), ("to", &c.to_service)] {
            if !names.contains(svc.as_str()) {
                out.push(Violation::new(
                    format!("{p}.{field}"),
                    format!("channel endpoint `{svc}` is a declared service"),
                ));
            }
        }
        if c.from_service == c.to_service {
            out.push(Violation::new(p.clone(), "from and to services differ"));
        }
        if c.bandwidth_bps == 0 {
            out.push(Violation::new(format!("{p}.bandwidth"), "bandwidth > 0"));
        }
        if c.max_delay_ns == 0 {
            out.push(Violation::new(format!("{p}.maxDelay"), "maxDelay > 0"));
        }
        if !pairs.insert((c.from_service.as_str(), c.to_service.as_str())) {
            out.push(Violation::new(
                p,
                format!("duplicate channel {} -> {}", c.from_service, c.to_service),
            ));
        }
    }
    out
}

fn text_node(s: &str) -> Node {
    doc::plain(s)
}

/// Renders a manifest in canonical form. Units are re-emitted with the
/// largest exact suffix; empty collections are omitted.
pub fn serialize_cam(m: &CamManifest) -> String {
    let services = (!m.services.is_empty()).then(|| {
        doc::list(
            m.services
                .iter()
                .map(|s| {
                    MapBuilder::new()
                        .put("name", text_node(&s.name))
                        .put("image", text_node(&s.image))
                        .put("replicas", doc::plain(s.replicas.to_string()))
                        .build()
                })
                .collect(),
        )
    });
    let channels = (!m.service_channels.is_empty()).then(|| {
        doc::list(
            m.service_channels
                .iter()
                .map(|c| {
                    MapBuilder::new()
                        .put("from", text_node(&c.from_service))
                        .put("to", text_node(&c.to_service))
                        .put("serviceClass", text_node(c.service_class.as_str()))
                        .put("bandwidth", doc::quoted(format_bandwidth(c.bandwidth_bps)))
                        .put("maxDelay", doc::quoted(format_delay(c.max_delay_ns)))
                        .build()
                })
                .collect(),
        )
    });
    let root = MapBuilder::new()
        .put("appName", text_node(&m.app_name))
        .put_opt(
            "performanceProfile",
            m.performance_profile
                .as_ref()
                .map(|p| text_node(p.as_str())),
        )
        .put_opt(
            "appEnergyLimit",
            m.app_energy_limit.map(|e| doc::quoted(format!("{e}"))),
        )
        .put_opt(
            "appFailureTolerance",
            m.app_failure_tolerance.as_deref().map(doc::quoted),
        )
        .put("schedulerName", text_node(&m.scheduler_name))
        .put_opt(
            "complianceClass",
            m.compliance_class.as_deref().map(text_node),
        )
        .put_opt("qosClass", m.qos_class.map(|q| text_node(q.as_str())))
        .put_opt("securityClass", m.security_class.as_deref().map(text_node))
        .put_opt("services", services)
        .put_opt("serviceChannels", channels)
        .build();
    doc::to_text(&root.value)
}

//! Manual intervention percentage, the linear power model, summary
//! statistics and baseline/treatment overheads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ActionEntry, ActionLedger, ActionMode, DeploymentPhase, NodeProfile, SampleSeries, StatsSummary,
};

pub const DEFAULT_MEM_W_PER_GB: f64 = 0.2;
pub const MIP_DECIMALS: u32 = 2;
pub const OVERHEAD_DECIMALS: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("baseline has no manual actions in phase {0}")]
    ZeroBaseline(DeploymentPhase),
    #[error("cpu utilization {0} outside [0, 1]")]
    UtilOutOfRange(f64),
    #[error("memory {0} GB is negative or not finite")]
    InvalidMemory(f64),
    #[error("power parameters invalid: {0}")]
    InvalidParams(String),
    #[error("empty input")]
    Empty,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("baseline {0} must be positive")]
    NonPositiveBaseline(f64),
    #[error("ledger line {line}: {message}")]
    Ledger { line: u64, message: String },
}

/// Node power parameters: `P = p_idle + (p_max - p_idle) * u + mem_w_per_gb * mem_gb`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModelParams {
    pub p_idle_w: f64,
    pub p_max_w: f64,
    pub mem_w_per_gb: f64,
}

impl PowerModelParams {
    pub fn new(p_idle_w: f64, p_max_w: f64) -> Self {
        Self {
            p_idle_w,
            p_max_w,
            mem_w_per_gb: DEFAULT_MEM_W_PER_GB,
        }
    }

    pub fn for_node(node: &NodeProfile) -> Self {
        Self::new(node.p_idle_w, node.p_max_w)
    }

    pub fn check(&self) -> Result<(), MetricsError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.p_idle_w) && pos(self.p_max_w)) {
            return Err(MetricsError::InvalidParams(
                "powers must be positive".into(),
            ));
        }
        if self.p_max_w <= self.p_idle_w {
            return Err(MetricsError::InvalidParams(
                "p_max_w must exceed p_idle_w".into(),
            ));
        }
        if !(self.mem_w_per_gb.is_finite() && self.mem_w_per_gb >= 0.0) {
            return Err(MetricsError::InvalidParams(
                "mem_w_per_gb must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub phase: DeploymentPhase,
    pub c_a: u64,
    pub k_a: u64,
    /// Unrounded percentage.
    pub mip_raw: f64,
    /// Rounded to two decimals.
    pub mip_pct: f64,
    /// Externally reported value for the same phase, when known.
    pub reference_pct: Option<f64>,
    /// Set when the reference disagrees with the computed percentage.
    pub note: Option<String>,
}

/// Rounds half away from zero at `decimals` places, deciding on the
/// shortest decimal representation of `v` so that values such as 0.125 or
/// 51.35 round the way they read.
pub fn round_half_away(v: f64, decimals: u32) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let text = format!("{}", v.abs());
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let d = decimals as usize;
    if frac_part.len() <= d {
        return v;
    }
    let mut digits: Vec<u8> = int_part.bytes().chain(frac_part.bytes().take(d)).collect();
    if frac_part.as_bytes()[d] >= b'5' {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits[i] == b'9' {
                digits[i] = b'0';
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - d;
    let mut out = String::with_capacity(digits.len() + 2);
    if v < 0.0 {
        out.push('-');
    }
    out.push_str(std::str::from_utf8(&digits[..split]).expect("ascii digits"));
    if d > 0 {
        out.push('.');
        out.push_str(std::str::from_utf8(&digits[split..]).expect("ascii digits"));
    }
    let r: f64 = out.parse().expect("decimal text");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `c_a / k_a * 100` where both counts are manual actions in `phase`.
pub fn compute_mip(
    treatment: &ActionLedger,
    baseline: &ActionLedger,
    phase: DeploymentPhase,
) -> Result<MipResult, MetricsError> {
    let c_a = treatment.manual_count(phase);
    let k_a = baseline.manual_count(phase);
    if k_a == 0 {
        return Err(MetricsError::ZeroBaseline(phase));
    }
    let mip_raw = c_a as f64 / k_a as f64 * 100.0;
    let mip_pct = round_half_away(mip_raw, MIP_DECIMALS);
    let reference_pct = treatment
        .reference_mip
        .get(&phase)
        .or_else(|| baseline.reference_mip.get(&phase))
        .copied();
    let note = reference_pct
        .filter(|r| (r - mip_pct).abs() > 0.005)
        .map(|r| {
            format!(
                "reported {r} differs from {c_a}/{k_a} x 100 = {mip_pct:.2}; computed value kept"
            )
        });
    Ok(MipResult {
        phase,
        c_a,
        k_a,
        mip_raw,
        mip_pct,
        reference_pct,
        note,
    })
}

/// One result per phase present in both ledgers, in phase order.
pub fn mip_table(
    treatment: &ActionLedger,
    baseline: &ActionLedger,
) -> Vec<(DeploymentPhase, Result<MipResult, MetricsError>)> {
    let both = treatment.phases();
    baseline
        .phases()
        .intersection(&both)
        .map(|p| (*p, compute_mip(treatment, baseline, *p)))
        .collect()
}

/// Instantaneous node power in watts. No clamping is applied.
pub fn estimate_power(
    u_cpu: f64,
    mem_gb: f64,
    params: &PowerModelParams,
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&u_cpu) {
        return Err(MetricsError::UtilOutOfRange(u_cpu));
    }
    if !(mem_gb.is_finite() && mem_gb >= 0.0) {
        return Err(MetricsError::InvalidMemory(mem_gb));
    }
    params.check()?;
    Ok(params.p_idle_w + (params.p_max_w - params.p_idle_w) * u_cpu + params.mem_w_per_gb * mem_gb)
}

/// kWh per day at constant power.
pub fn daily_energy(power_w: f64) -> f64 {
    power_w * 24.0 / 1000.0
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// min, max, mean, nearest-rank p95 and sample standard deviation
/// (divisor n - 1, zero for a single value).
pub fn aggregate_stats(values: &[f64]) -> Result<StatsSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let n = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg = compensated_sum(values.iter().copied()) / n as f64;
    let stdev = if n == 1 {
        0.0
    } else {
        let ss = compensated_sum(values.iter().map(|v| (v - avg) * (v - avg)));
        (ss / (n - 1) as f64).sqrt()
    };
    let rank = (95 * n).div_ceil(100);
    let mut scratch = values.to_vec();
    let (_, p95, _) = scratch.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(StatsSummary {
        n: n as u64,
        min,
        max,
        avg: avg.clamp(min, max),
        p95: *p95,
        stdev,
    })
}

/// Mean CPU utilization and mean memory over every sample of a series.
pub fn mean_over_window(series: &SampleSeries) -> Result<(f64, f64), MetricsError> {
    if series.samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = series.samples.len() as f64;
    let cpu = compensated_sum(series.samples.iter().map(|s| s.cpu_util)) / n;
    let mem = compensated_sum(series.samples.iter().map(|s| s.mem_gb)) / n;
    Ok((cpu, mem))
}

/// Unrounded signed percentage change from baseline to treatment.
pub fn overhead_raw(treatment: f64, baseline: f64) -> Result<f64, MetricsError> {
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(MetricsError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (treatment - baseline) / baseline)
}

/// Signed percentage change, rounded to one decimal.
pub fn compute_overhead(treatment: f64, baseline: f64) -> Result<f64, MetricsError> {
    overhead_raw(treatment, baseline).map(|v| round_half_away(v, OVERHEAD_DECIMALS))
}

const LEDGER_HEADER: [&str; 4] = ["phase", "action_id", "description", "mode"];

/// Reads an action ledger: a `phase,action_id,description,mode` CSV. Lines
/// starting with `#` are comments; two comment forms are directives:
///
/// ```text
/// # label: <method name>
/// # reference-mip: <phase>=<percent>
/// ```
pub fn parse_ledger(text: &str, default_label: &str) -> Result<ActionLedger, MetricsError> {
    let mut label = default_label.to_string();
    let mut reference_mip = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let Some(comment) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let err = |message: String| MetricsError::Ledger {
            line: line_no,
            message,
        };
        let comment = comment.trim();
        if let Some(v) = comment.strip_prefix("label:") {
            label = v.trim().to_string();
        } else if let Some(v) = comment.strip_prefix("reference-mip:") {
            let (phase, value) = v
                .split_once('=')
                .ok_or_else(|| err("expected `<phase>=<percent>`".into()))?;
            let phase: DeploymentPhase = phase.trim().parse().map_err(err)?;
            let value: f64 = value
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("`{}` is not a number", value.trim())))?;
            reference_mip.insert(phase, value);
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header_line = rdr.position().line();
    let headers = rdr.headers().map_err(|e| MetricsError::Ledger {
        line: header_line.max(1),
        message: e.to_string(),
    })?;
    if headers.iter().map(str::trim).ne(LEDGER_HEADER) {
        return Err(MetricsError::Ledger {
            line: headers.position().map_or(1, |p| p.line()),
            message: format!("header must be `{}`", LEDGER_HEADER.join(",")),
        });
    }
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| MetricsError::Ledger {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| MetricsError::Ledger { line, message };
        if record.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", record.len())));
        }
        let action_id = record[1].trim().to_string();
        if action_id.is_empty() {
            return Err(err("action_id is empty".into()));
        }
        entries.push(ActionEntry {
            phase: record[0].trim().parse().map_err(err)?,
            action_id,
            description: record[2].to_string(),
            mode: record[3].trim().parse::<ActionMode>().map_err(err)?,
        });
    }
    let ledger = ActionLedger {
        label,
        entries,
        reference_mip,
    };
    if let Some(v) = ledger.violations().into_iter().next() {
        return Err(MetricsError::Ledger {
            line: 0,
            message: v.rule,
        });
    }
    Ok(ledger)
}

/// Writes a ledger in the format [`parse_ledger`] reads.
pub fn write_ledger(ledger: &ActionLedger) -> String {
    let mut out = format!("# label: {}\n", ledger.label);
    for (phase, v) in &ledger.reference_mip {
        out.push_str(&format!("# reference-mip: {phase}={v}\n"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(LEDGER_HEADER).expect("in-memory write");
    for e in &ledger.entries {
        w.write_record([
            e.phase.as_str(),
            e.action_id.as_str(),
            e.description.as_str(),
            e.mode.as_str(),
        ])
        .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sample;
    use crate::time::Nanos;
    use proptest::prelude::*;

    fn ledger(counts: &[(DeploymentPhase, usize, usize)]) -> ActionLedger {
        let mut entries = Vec::new();
        for (phase, manual, auto) in counts {
            for i in 0..manual + auto {
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

    #[test]
    fn mip_rows() {
        let k8s = DeploymentPhase::K8sInstallation;
        let svc = DeploymentPhase::ServiceDeployment;
        let t = ledger(&[(k8s, 4, 10), (svc, 2, 5)]);
        let b = ledger(&[(k8s, 42, 0), (svc, 11, 0)]);
        assert_eq!(compute_mip(&t, &b, k8s).unwrap().mip_pct, 9.52);
        assert_eq!(compute_mip(&t, &b, svc).unwrap().mip_pct, 18.18);
        assert_eq!(compute_mip(&b, &b, k8s).unwrap().mip_pct, 100.0);
        let raw = compute_mip(&t, &b, k8s).unwrap().mip_raw;
        assert!((raw - 400.0 / 42.0).abs() < 1e-12);
    }

    #[test]
    fn mip_zero_baseline_rejected() {
        let p = DeploymentPhase::ClusterDeployment;
        let t = ledger(&[(p, 1, 0)]);
        let b = ledger(&[(p, 0, 3)]);
        assert_eq!(compute_mip(&t, &b, p), Err(MetricsError::ZeroBaseline(p)));
    }

    #[test]
    fn mip_reference_discrepancy_noted() {
        let p = DeploymentPhase::ClusterDeployment;
        let mut t = ledger(&[(p, 3, 2)]);
        t.reference_mip.insert(p, 25.3);
        let r = compute_mip(&t, &ledger(&[(p, 19, 0)]), p).unwrap();
        assert_eq!(r.mip_pct, 15.79);
        assert!(r.note.unwrap().contains("25.3"));
        t.reference_mip.insert(p, 15.79);
        assert!(compute_mip(&t, &ledger(&[(p, 19, 0)]), p)
            .unwrap()
            .note
            .is_none());
    }

    #[test]
    fn power_examples() {
        let p = estimate_power(0.0176, 1.15, &PowerModelParams::new(35.0, 95.0)).unwrap();
        assert!((p - 36.286).abs() < 1e-9);
        let p = estimate_power(0.075, 17.70, &PowerModelParams::new(60.0, 165.0)).unwrap();
        assert!((p - 71.415).abs() < 1e-9);
        assert_eq!(
            estimate_power(0.0, 0.0, &PowerModelParams::new(35.0, 95.0)),
            Ok(35.0)
        );
        assert!(estimate_power(1.01, 0.0, &PowerModelParams::new(35.0, 95.0)).is_err());
        assert!(estimate_power(0.5, 0.0, &PowerModelParams::new(95.0, 35.0)).is_err());
    }

    #[test]
    fn energy_examples() {
        assert!((daily_energy(107.6) - 2.5824).abs() < 1e-12);
        assert!((daily_energy(112.7) - 2.7048).abs() < 1e-12);
        assert_eq!(daily_energy(0.0), 0.0);
    }

    #[test]
    fn overhead_examples() {
        assert_eq!(compute_overhead(57.11, 37.73), Ok(51.4));
        assert_eq!(compute_overhead(112.7, 107.6), Ok(4.7));
        assert_eq!(compute_overhead(71.4, 64.5), Ok(10.7));
        assert_eq!(compute_overhead(3.0, 3.0), Ok(0.0));
        assert_eq!(compute_overhead(1.0, 2.0), Ok(-50.0));
        assert!(compute_overhead(1.0, 0.0).is_err());
    }

    #[test]
    fn rounding_reads_decimal() {
        assert_eq!(round_half_away(0.125, 2), 0.13);
        assert_eq!(round_half_away(-0.125, 2), -0.13);
        assert_eq!(round_half_away(51.35, 1), 51.4);
        assert_eq!(round_half_away(2.675, 2), 2.68);
        assert_eq!(round_half_away(9.995, 2), 10.0);
        assert_eq!(round_half_away(-99.95, 1), -100.0);
        assert_eq!(round_half_away(1.0, 2), 1.0);
        assert_eq!(round_half_away(0.4, 0), 0.0);
        assert!(round_half_away(-0.0001, 1).is_sign_positive());
    }

    #[test]
    fn stats_examples() {
        let s = aggregate_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.min, s.max, s.avg, s.p95), (1.0, 5.0, 3.0, 5.0));
        assert!((s.stdev - 2.5f64.sqrt()).abs() < 1e-12);
        let s = aggregate_stats(&[4.2]).unwrap();
        assert_eq!(
            (s.min, s.max, s.avg, s.p95, s.stdev),
            (4.2, 4.2, 4.2, 4.2, 0.0)
        );
        assert_eq!(aggregate_stats(&[]), Err(MetricsError::Empty));
        assert_eq!(
            aggregate_stats(&[1.0, f64::NAN]),
            Err(MetricsError::NonFinite)
        );
    }

    #[test]
    fn p95_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(aggregate_stats(&v).unwrap().p95, 19.0);
        let v: Vec<f64> = (1..=21).map(f64::from).collect();
        assert_eq!(aggregate_stats(&v).unwrap().p95, 20.0);
    }

    fn series(values: &[f64]) -> SampleSeries {
        SampleSeries {
            node: "n".into(),
            samples: values
                .iter()
                .enumerate()
                .map(|(i, v)| Sample {
                    at: Nanos(i as u64 + 1),
                    cpu_util: *v,
                    mem_gb: 2.0 * v,
                })
                .collect(),
        }
    }

    #[test]
    fn window_means() {
        assert_eq!(mean_over_window(&series(&[0.0466; 120])).unwrap().0, 0.0466);
        assert_eq!(
            mean_over_window(&series(&[0.0, 1.0, 0.0, 1.0])).unwrap(),
            (0.5, 1.0)
        );
        assert_eq!(mean_over_window(&series(&[])), Err(MetricsError::Empty));
    }

    const LEDGER: &str = "\
# label: automated
# reference-mip: cluster-deployment=25.3
phase,action_id,description,mode
cluster-deployment,cd-1,\"flash image, reboot\",manual
k8s-installation,k8s-1,run playbook,automated
";

    #[test]
    fn ledger_round_trip() {
        let l = parse_ledger(LEDGER, "default").unwrap();
        assert_eq!(l.label, "automated");
        assert_eq!(l.entries.len(), 2);
        assert_eq!(l.entries[0].description, "flash image, reboot");
        assert_eq!(l.reference_mip[&DeploymentPhase::ClusterDeployment], 25.3);
        assert_eq!(parse_ledger(&write_ledger(&l), "other").unwrap(), l);
    }

    #[test]
    fn ledger_errors_carry_lines() {
        let bad = LEDGER.replace("automated\n", "maybe\n");
        let err = parse_ledger(&bad, "x").unwrap_err();
        assert!(matches!(err, MetricsError::Ledger { line: 5, .. }), "{err}");
        let err = parse_ledger("a,b\n", "x").unwrap_err();
        assert!(err.to_string().contains("phase,action_id,description,mode"));
    }

    proptest! {
        #[test]
        fn power_is_affine(
            u1 in 0.0f64..=1.0, u2 in 0.0f64..=1.0,
            m1 in 0.0f64..64.0, m2 in 0.0f64..64.0,
            a in 0.0f64..=1.0,
        ) {
            let p = PowerModelParams::new(35.0, 95.0);
            let mixed = estimate_power(a * u1 + (1.0 - a) * u2, a * m1 + (1.0 - a) * m2, &p).unwrap();
            let blend = a * estimate_power(u1, m1, &p).unwrap()
                + (1.0 - a) * estimate_power(u2, m2, &p).unwrap();
            prop_assert!((mixed - blend).abs() < 1e-9);
            let p1 = estimate_power(u1, m1, &p).unwrap();
            prop_assert!(p1 >= 35.0 && p1 <= 95.0 + 0.2 * m1 + 1e-12);
        }

        #[test]
        fn mip_ignores_descriptions(seed in any::<u64>()) {
            let p = DeploymentPhase::K8sInstallation;
            let t = ledger(&[(p, 4, 6)]);
            let b = ledger(&[(p, 42, 1)]);
            let mut t2 = t.clone();
            for (i, e) in t2.entries.iter_mut().enumerate() {
                e.description = format!("{:x}", seed.wrapping_mul(i as u64 + 1));
            }
            t2.entries.rotate_left((seed % 10) as usize);
            prop_assert_eq!(compute_mip(&t, &b, p), compute_mip(&t2, &b, p));
        }

        #[test]
        fn rounding_within_half_unit(v in -1e6f64..1e6) {
            let r = round_half_away(v, 2);
            prop_assert!((r - v).abs() <= 0.005 + 1e-9);
        }
    }
}

//! Fairness indices, run comparisons and trace statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::mac::{normalized_throughput, MacParams, SimReportRaw};
use crate::tonemap::{asymmetry, DirectedLink, MAX_SLOT_BITS};
use crate::trace::Deployment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("fairness is undefined when every value is zero")]
    AllZero,
    #[error("no values")]
    Empty,
    #[error("negative value")]
    Negative,
    #[error("reports cover different links")]
    LinkMismatch,
    #[error("link {0} has no reverse tonemap")]
    MissingReverse(DirectedLink),
    #[error("window must be at least 2 samples")]
    Window,
    #[error("series of {len} samples is shorter than window {window}")]
    SeriesTooShort { len: usize, window: usize },
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`.
pub fn jain_index(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if values.iter().any(|&v| v < 0.0) {
        return Err(MetricsError::Negative);
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}

/// Fairly shared spectrum efficiency, taken as `n * min(x)`: the network
/// total when every node gets the same throughput, and driven entirely by the
/// worst node otherwise.
pub fn fsse(per_node: &BTreeMap<String, f64>) -> Result<f64, MetricsError> {
    let min = per_node
        .values()
        .copied()
        .reduce(f64::min)
        .ok_or(MetricsError::Empty)?;
    Ok(per_node.len() as f64 * min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub jfi: f64,
    pub fsse: f64,
    pub per_node_throughput: BTreeMap<String, f64>,
    pub aggregate_throughput: f64,
}

/// Normalized throughput of every link in the report.
pub fn link_throughputs(r: &SimReportRaw, mac: &MacParams) -> BTreeMap<DirectedLink, f64> {
    r.links
        .keys()
        .map(|l| {
            let thr = normalized_throughput(r, l, mac).expect("link taken from report");
            (l.clone(), thr)
        })
        .collect()
}

/// Fairness over transmitting nodes: a node's throughput is the sum over the
/// flows it transmits.
pub fn fairness_report(r: &SimReportRaw, mac: &MacParams) -> Result<FairnessReport, MetricsError> {
    let mut per_node: BTreeMap<String, f64> = BTreeMap::new();
    for (link, thr) in link_throughputs(r, mac) {
        *per_node.entry(link.tx).or_default() += thr;
    }
    let values: Vec<f64> = per_node.values().copied().collect();
    Ok(FairnessReport {
        jfi: jain_index(&values)?,
        fsse: fsse(&per_node)?,
        aggregate_throughput: values.iter().sum(),
        per_node_throughput: per_node,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkGain {
    pub link: DirectedLink,
    pub base: f64,
    pub ss: f64,
    /// Percentage change; infinite when only the shared run delivered data.
    pub gain_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub aggregate_base: f64,
    pub aggregate_ss: f64,
    pub aggregate_gain_pct: f64,
    pub per_link: Vec<LinkGain>,
    pub base: FairnessReport,
    pub ss: FairnessReport,
}

impl GainReport {
    pub fn jfi_delta(&self) -> f64 {
        self.ss.jfi - self.base.jfi
    }

    pub fn fsse_delta(&self) -> f64 {
        self.ss.fsse - self.base.fsse
    }

    pub fn max_link_gain_pct(&self) -> f64 {
        self.per_link
            .iter()
            .map(|g| g.gain_pct)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in [
            ("aggregate_base", self.aggregate_base),
            ("aggregate_ss", self.aggregate_ss),
            ("aggregate_gain_pct", self.aggregate_gain_pct),
            ("jfi_base", self.base.jfi),
            ("jfi_ss", self.ss.jfi),
            ("jfi_delta", self.jfi_delta()),
            ("fsse_base", self.base.fsse),
            ("fsse_ss", self.ss.fsse),
            ("fsse_delta", self.fsse_delta()),
        ] {
            let _ = writeln!(out, "{name},{v:.6}");
        }
        out
    }

    pub fn links_csv(&self) -> String {
        let mut out = String::from("link_tx,link_rx,base,ss,gain_pct\n");
        for g in &self.per_link {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6}",
                g.link.tx, g.link.rx, g.base, g.ss, g.gain_pct
            );
        }
        out
    }
}

fn pct(base: f64, new: f64) -> f64 {
    if base == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (new - base) / base
    }
}

/// Compares a run without sharing against one with sharing.
pub fn compare_runs(
    base: &SimReportRaw,
    ss: &SimReportRaw,
    mac: &MacParams,
) -> Result<GainReport, MetricsError> {
    if !base.links.keys().eq(ss.links.keys()) {
        return Err(MetricsError::LinkMismatch);
    }
    let tb = link_throughputs(base, mac);
    let ts = link_throughputs(ss, mac);
    let per_link: Vec<LinkGain> = tb
        .iter()
        .zip(&ts)
        .map(|((link, &b), (_, &s))| LinkGain {
            link: link.clone(),
            base: b,
            ss: s,
            gain_pct: pct(b, s),
        })
        .collect();
    let aggregate_base: f64 = tb.values().sum();
    let aggregate_ss: f64 = ts.values().sum();
    Ok(GainReport {
        aggregate_base,
        aggregate_ss,
        aggregate_gain_pct: pct(aggregate_base, aggregate_ss),
        per_link,
        base: fairness_report(base, mac)?,
        ss: fairness_report(ss, mac)?,
    })
}

/// Asymmetry of every traced node pair normalized by its maximum, in pair
/// order `(a, b)` with `a < b`.
pub fn asymmetry_distribution(d: &Deployment) -> Result<Vec<(DirectedLink, f64)>, MetricsError> {
    let mut out = Vec::new();
    for (link, tm) in d.links() {
        if link.tx > link.rx {
            continue;
        }
        let rev = link.reversed();
        let back = d
            .tonemap(&rev)
            .ok_or_else(|| MetricsError::MissingReverse(link.clone()))?;
        let a = asymmetry(tm, back).expect("deployment tonemaps share a slot count");
        out.push((link.clone(), a / f64::from(MAX_SLOT_BITS)));
    }
    Ok(out)
}

/// Population standard deviation of each non-overlapping `window` of the
/// series; a trailing partial window is ignored.
pub fn stability_std(series: &[f64], window: usize) -> Result<Vec<f64>, MetricsError> {
    if window < 2 {
        return Err(MetricsError::Window);
    }
    if series.len() < window {
        return Err(MetricsError::SeriesTooShort {
            len: series.len(),
            window,
        });
    }
    Ok(series
        .chunks_exact(window)
        .map(|w| {
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / w.len() as f64;
            var.sqrt()
        })
        .collect())
}

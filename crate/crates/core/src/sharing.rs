//! Spectrum-sharing decisions made by the central coordinator.
//!
//! For a primary link `p` and a candidate secondary link `s` in one AC slot,
//! the per-subcarrier difference `T_s - T_p` marks the subcarriers where the
//! secondary would carry at least `beta` more bits than the primary. Handing
//! those subcarriers to the secondary gains `sum(T_s) - sum(T_p)` over them.
//! Each primary keeps its `top_m` best node-disjoint candidates per slot.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::tonemap::{DirectedLink, SUBCARRIERS};
use crate::trace::Deployment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("tonemap vectors must have {SUBCARRIERS} entries, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("subcarrier index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("top_m must be at least 1")]
    TopM,
    #[error("max_share_fraction {0} outside [0, 1]")]
    ShareFraction(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsPolicy {
    /// Minimum per-subcarrier advantage, in bits, for a subcarrier to be shared.
    pub beta: u8,
    pub top_m: usize,
    /// Cap on the fraction of the 917 subcarriers a primary may hand away.
    pub max_share_fraction: f64,
}

impl Default for SsPolicy {
    fn default() -> Self {
        Self {
            beta: 2,
            top_m: 3,
            max_share_fraction: 1.0,
        }
    }
}

impl SsPolicy {
    pub fn validate(&self) -> Result<(), SharingError> {
        if self.top_m == 0 {
            return Err(SharingError::TopM);
        }
        if !(0.0..=1.0).contains(&self.max_share_fraction) {
            return Err(SharingError::ShareFraction(
                self.max_share_fraction.to_string(),
            ));
        }
        Ok(())
    }

    /// Largest number of subcarriers one allocation may contain.
    pub fn share_cap(&self) -> usize {
        // small epsilon so that e.g. 0.1 * 917 = 91.7 is not nudged below 91
        ((self.max_share_fraction * SUBCARRIERS as f64) + 1e-9).floor() as usize
    }
}

/// Subcarriers granted to one secondary while a primary is active in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsAllocation {
    pub primary: DirectedLink,
    pub secondary: DirectedLink,
    /// 0-based AC slot.
    pub slot: usize,
    /// 0-based subcarrier indices, ascending.
    pub shared_indices: Vec<usize>,
    pub gain: i64,
    /// 1-based rank among the primary's candidates.
    pub rank: usize,
}

/// `secondary[j] - primary[j]` for every subcarrier.
pub fn diff_vector(primary: &[u8], secondary: &[u8]) -> Result<Vec<i16>, SharingError> {
    if primary.len() != SUBCARRIERS || secondary.len() != SUBCARRIERS {
        return Err(SharingError::LengthMismatch(primary.len(), secondary.len()));
    }
    Ok(primary
        .iter()
        .zip(secondary)
        .map(|(&p, &s)| i16::from(s) - i16::from(p))
        .collect())
}

/// Indices `j` with `d[j] >= beta`.
pub fn eligible_indices(d: &[i16], beta: u8) -> Vec<usize> {
    let beta = i16::from(beta);
    d.iter()
        .enumerate()
        .filter(|(_, &v)| v >= beta)
        .map(|(j, _)| j)
        .collect()
}

/// `sum(secondary[I]) - sum(primary[I])`.
pub fn gain(primary: &[u8], secondary: &[u8], indices: &[usize]) -> Result<i64, SharingError> {
    indices
        .iter()
        .try_fold(0i64, |acc, &j| match (primary.get(j), secondary.get(j)) {
            (Some(&p), Some(&s)) => Ok(acc + i64::from(s) - i64::from(p)),
            _ => Err(SharingError::IndexOutOfRange(j)),
        })
}

/// Eligible indices for one primary/secondary slot pair after applying the
/// share cap, dropping the smallest differences first (higher index first
/// among equal differences). Returned ascending.
pub fn capped_indices(d: &[i16], policy: &SsPolicy) -> Vec<usize> {
    let mut idx = eligible_indices(d, policy.beta);
    let cap = policy.share_cap();
    if idx.len() > cap {
        idx.sort_by(|&a, &b| d[b].cmp(&d[a]).then(a.cmp(&b)));
        idx.truncate(cap);
        idx.sort_unstable();
    }
    idx
}

/// Ranked candidates for every (primary link, slot).
#[derive(Debug, Clone, PartialEq)]
pub struct SsDecisionTable {
    policy: SsPolicy,
    slot_count: usize,
    entries: BTreeMap<(DirectedLink, usize), Vec<SsAllocation>>,
}

impl SsDecisionTable {
    pub fn policy(&self) -> &SsPolicy {
        &self.policy
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    /// Ranked candidates for `primary` in 0-based `slot`; empty when none.
    pub fn candidates(&self, primary: &DirectedLink, slot: usize) -> &[SsAllocation] {
        self.entries
            .get(&(primary.clone(), slot))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All entries ordered by primary link then slot.
    pub fn entries(&self) -> impl Iterator<Item = (&DirectedLink, usize, &[SsAllocation])> {
        self.entries
            .iter()
            .map(|((link, slot), v)| (link, *slot, v.as_slice()))
    }

    pub fn allocation_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Debug export. Slots and subcarrier indices are written 1-based, the
    /// shared indices as trailing columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "primary_tx,primary_rx,slot,rank,secondary_tx,secondary_rx,gain,num_shared,indices\n",
        );
        for (_, _, allocs) in self.entries() {
            for a in allocs {
                let _ = write!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    a.primary.tx,
                    a.primary.rx,
                    a.slot + 1,
                    a.rank,
                    a.secondary.tx,
                    a.secondary.rx,
                    a.gain,
                    a.shared_indices.len()
                );
                for j in &a.shared_indices {
                    let _ = write!(out, ",{}", j + 1);
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Evaluates every node-disjoint (primary, secondary) pair in every slot and
/// keeps the `top_m` positive-gain candidates per primary and slot, sorted by
/// descending gain with ties broken by the secondary's `(tx, rx)`.
pub fn build_decision_table(
    d: &Deployment,
    policy: &SsPolicy,
) -> Result<SsDecisionTable, SharingError> {
    policy.validate()?;
    let mut entries = BTreeMap::new();
    for (p, tp) in d.links() {
        for k in 0..d.slot_count() {
            let primary_slot = tp.slot(k).expect("slot within deployment");
            let mut cands: Vec<SsAllocation> = d
                .links()
                .iter()
                .filter(|(s, _)| p.is_node_disjoint(s))
                .filter_map(|(s, ts)| {
                    let secondary_slot = ts.slot(k).expect("slot within deployment");
                    let dv = diff_vector(primary_slot, secondary_slot).expect("valid tonemaps");
                    let shared = capped_indices(&dv, policy);
                    let g: i64 = shared.iter().map(|&j| i64::from(dv[j])).sum();
                    (g > 0).then(|| SsAllocation {
                        primary: p.clone(),
                        secondary: s.clone(),
                        slot: k,
                        shared_indices: shared,
                        gain: g,
                        rank: 0,
                    })
                })
                .collect();
            if cands.is_empty() {
                continue;
            }
            cands.sort_by(|a, b| {
                b.gain
                    .cmp(&a.gain)
                    .then_with(|| a.secondary.cmp(&b.secondary))
            });
            cands.truncate(policy.top_m);
            for (i, c) in cands.iter_mut().enumerate() {
                c.rank = i + 1;
            }
            entries.insert((p.clone(), k), cands);
        }
    }
    Ok(SsDecisionTable {
        policy: *policy,
        slot_count: d.slot_count(),
        entries,
    })
}

//! Tonemaps, directed links and the closed-form link metrics derived from them.
//!
//! A tonemap holds, for each AC line cycle slot, the number of bits loaded on
//! each of the 917 HPAV OFDM subcarriers. Everything else in the crate (rates,
//! spectrum-sharing gains, simulated throughput) is computed from these values.
//!
//! Slot and subcarrier indices are 0-based throughout the Rust API. File
//! formats and CSV outputs use 1-based indices.

use std::fmt;

use thiserror::Error;

/// Number of OFDM subcarriers used by HomePlug AV.
pub const SUBCARRIERS: usize = 917;

/// Highest modulation value a subcarrier may carry (1024-QAM).
pub const MAX_BITS: u8 = 10;

/// Largest possible per-slot bit sum, `SUBCARRIERS * MAX_BITS`.
pub const MAX_SLOT_BITS: u32 = SUBCARRIERS as u32 * MAX_BITS as u32;

/// Most AC line cycle slots a tonemap set may describe.
pub const MAX_SLOTS: usize = 6;

/// Slot count used when nothing else is specified.
pub const DEFAULT_SLOTS: usize = 5;

/// Modulation values HPAV can actually assign (BPSK through 1024-QAM).
pub const LEGAL_BITS: [u8; 8] = [0, 1, 2, 3, 4, 6, 8, 10];

/// First violated tonemap invariant. Indices in the message are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TonemapViolation {
    #[error("slot count {count} outside 1..={max}", max = MAX_SLOTS)]
    SlotCount { count: usize },
    #[error("subcarrier count {len} in slot {} (expected {SUBCARRIERS})", slot + 1)]
    SubcarrierCount { slot: usize, len: usize },
    #[error(
        "modulation out of range: value {value} at slot {}, subcarrier {}",
        slot + 1,
        subcarrier + 1
    )]
    ModulationOutOfRange {
        slot: usize,
        subcarrier: usize,
        value: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("slot {slot} out of range for a tonemap with {slot_count} slots")]
    SlotOutOfRange { slot: usize, slot_count: usize },
    #[error("subcarrier index {0} out of range")]
    SubcarrierOutOfRange(usize),
    #[error("slot count mismatch: {0} vs {1}")]
    SlotCountMismatch(usize, usize),
}

/// Checks raw slot data against every tonemap invariant, reporting the first
/// violation found (slots in order, subcarriers in order).
pub fn validate_tonemap(slots: &[Vec<u8>]) -> Result<(), TonemapViolation> {
    if slots.is_empty() || slots.len() > MAX_SLOTS {
        return Err(TonemapViolation::SlotCount { count: slots.len() });
    }
    for (slot, values) in slots.iter().enumerate() {
        if values.len() != SUBCARRIERS {
            return Err(TonemapViolation::SubcarrierCount {
                slot,
                len: values.len(),
            });
        }
        if let Some((subcarrier, &value)) = values.iter().enumerate().find(|(_, &v)| v > MAX_BITS) {
            return Err(TonemapViolation::ModulationOutOfRange {
                slot,
                subcarrier,
                value,
            });
        }
    }
    Ok(())
}

/// Per-slot modulation map of one directed link. Always valid once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tonemap {
    slots: Vec<Vec<u8>>,
}

impl Tonemap {
    pub fn new(slots: Vec<Vec<u8>>) -> Result<Self, TonemapViolation> {
        validate_tonemap(&slots)?;
        Ok(Self { slots })
    }

    /// A tonemap with every subcarrier of every slot at `bits`.
    pub fn uniform(slot_count: usize, bits: u8) -> Result<Self, TonemapViolation> {
        Self::new(vec![vec![bits; SUBCARRIERS]; slot_count])
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, k: usize) -> Result<&[u8], MetricError> {
        self.slots
            .get(k)
            .map(Vec::as_slice)
            .ok_or(MetricError::SlotOutOfRange {
                slot: k,
                slot_count: self.slots.len(),
            })
    }

    pub fn slots(&self) -> impl Iterator<Item = &[u8]> {
        self.slots.iter().map(Vec::as_slice)
    }

    /// Total bits per OFDM symbol in slot `k`.
    pub fn slot_bits(&self, k: usize) -> Result<u32, MetricError> {
        Ok(self.slot(k)?.iter().map(|&v| u32::from(v)).sum())
    }
}

/// Directed link identified by transmitter and receiver node names.
///
/// Ordering is lexicographic on `(tx, rx)`, which is the canonical link order
/// of trace files and every tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedLink {
    pub tx: String,
    pub rx: String,
}

impl DirectedLink {
    /// Returns `None` for self-loops.
    pub fn new(tx: impl Into<String>, rx: impl Into<String>) -> Option<Self> {
        let (tx, rx) = (tx.into(), rx.into());
        (tx != rx).then_some(Self { tx, rx })
    }

    pub fn reversed(&self) -> Self {
        Self {
            tx: self.rx.clone(),
            rx: self.tx.clone(),
        }
    }

    /// True when the two links share no endpoint.
    pub fn is_node_disjoint(&self, other: &DirectedLink) -> bool {
        self.tx != other.tx && self.tx != other.rx && self.rx != other.tx && self.rx != other.rx
    }

    pub fn touches(&self, node: &str) -> bool {
        self.tx == node || self.rx == node
    }
}

impl fmt::Display for DirectedLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tx, self.rx)
    }
}

/// Forward error correction code rates supported by HPAV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FecRate {
    Half,
    #[default]
    SixteenTwentyFirst,
}

impl FecRate {
    pub fn as_f64(self) -> f64 {
        match self {
            FecRate::Half => 1.0 / 2.0,
            FecRate::SixteenTwentyFirst => 16.0 / 21.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyParamsError {
    #[error("bit error rate {0} outside [0, 1)")]
    BitErrorRate(f64),
    #[error("symbol interval must be positive, got {0} us")]
    SymbolInterval(f64),
    #[error("protocol overhead {0} outside [0, 1)")]
    ProtocolOverhead(f64),
}

/// Physical-layer constants used to turn tonemaps into rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyParams {
    pub fec_rate: FecRate,
    pub bit_error_rate: f64,
    pub symbol_interval_us: f64,
    pub protocol_overhead: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            fec_rate: FecRate::SixteenTwentyFirst,
            bit_error_rate: 0.0,
            symbol_interval_us: 46.0,
            protocol_overhead: 0.4,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<(), PhyParamsError> {
        if !(0.0..1.0).contains(&self.bit_error_rate) {
            return Err(PhyParamsError::BitErrorRate(self.bit_error_rate));
        }
        if self.symbol_interval_us.is_nan() || self.symbol_interval_us <= 0.0 {
            return Err(PhyParamsError::SymbolInterval(self.symbol_interval_us));
        }
        if !(0.0..1.0).contains(&self.protocol_overhead) {
            return Err(PhyParamsError::ProtocolOverhead(self.protocol_overhead));
        }
        Ok(())
    }
}

/// Effective PHY rate of slot `k` in bits per second.
///
/// `bits_per_symbol * fec_rate * (1 - ber) / symbol_interval`.
pub fn phy_rate(t: &Tonemap, k: usize, p: &PhyParams) -> Result<f64, MetricError> {
    let bits = f64::from(t.slot_bits(k)?);
    Ok(bits * p.fec_rate.as_f64() * (1.0 - p.bit_error_rate) / (p.symbol_interval_us * 1e-6))
}

/// Mean PHY rate over all slots, before protocol overhead.
pub fn mean_phy_rate(t: &Tonemap, p: &PhyParams) -> f64 {
    let total: f64 = (0..t.slot_count())
        .map(|k| phy_rate(t, k, p).expect("slot index within slot_count"))
        .sum();
    total / t.slot_count() as f64
}

/// Expected link throughput in bits per second: the slot-averaged PHY rate
/// scaled by `1 - protocol_overhead`.
pub fn expected_throughput(t: &Tonemap, p: &PhyParams) -> f64 {
    (1.0 - p.protocol_overhead) * mean_phy_rate(t, p)
}

/// Total absolute per-subcarrier difference between the two directions of a
/// link, averaged over slots. Ranges over `[0, 9170]`; not rounded.
pub fn asymmetry(t_ab: &Tonemap, t_ba: &Tonemap) -> Result<f64, MetricError> {
    if t_ab.slot_count() != t_ba.slot_count() {
        return Err(MetricError::SlotCountMismatch(
            t_ab.slot_count(),
            t_ba.slot_count(),
        ));
    }
    let total: u32 = t_ab
        .slots()
        .zip(t_ba.slots())
        .flat_map(|(a, b)| a.iter().zip(b))
        .map(|(&a, &b)| u32::from(a.abs_diff(b)))
        .sum();
    Ok(f64::from(total) / t_ab.slot_count() as f64)
}

/// Fraction of the maximum slot capacity carried by `active` subcarriers of
/// slot `k`: `sum(T[j] for j in active) / 9170`.
pub fn spectrum_fraction(t: &Tonemap, k: usize, active: &[usize]) -> Result<f64, MetricError> {
    let slot = t.slot(k)?;
    Ok(f64::from(active_bits(slot, active)?) / f64::from(MAX_SLOT_BITS))
}

/// Bits carried by the `active` subcarriers of one slot vector.
pub fn active_bits(slot: &[u8], active: &[usize]) -> Result<u32, MetricError> {
    active.iter().try_fold(0u32, |acc, &j| {
        slot.get(j)
            .map(|&v| acc + u32::from(v))
            .ok_or(MetricError::SubcarrierOutOfRange(j))
    })
}

//! Slot-based simulation of the HPAV CSMA/CA MAC with spectrum sharing.
//!
//! Time is kept in integer ticks of 10 ns so that the default timing constants
//! (35.84 us slots, 2542.64 us frames, 2920.64 us collisions) are exact.
//!
//! Global contention follows the 1901 backoff procedure with deferral
//! counters: each station holds `(stage, bc, dc)`; `bc` counts idle slots
//! down and the station transmits at the boundary where it is 0. Every time
//! another transmission starts while it is backing off, a station with
//! `dc == 0` moves to the next stage (capped at the last) and redraws, otherwise
//! it spends one unit of `dc` and keeps `bc` frozen. Colliders move up a stage
//! and redraw; a successful transmitter restarts at stage 0.
//!
//! When a decision table is supplied, a lone global transmission becomes a
//! primary link: it announces itself and gives up the subcarriers of its best
//! available secondary candidate. Candidates wait `rank * rank_wait` slots;
//! the first to finish waiting transmits on the shared subcarriers, the others
//! fall back to a separate CSMA instance over the shared spectrum. Secondary
//! frames never outlive the primary frame and are credited in proportion to
//! their airtime. When the primary ends every station returns to global
//! contention.

mod engine;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::tonemap::DirectedLink;

pub use engine::{run_simulation, SimInput, Simulation};

/// Simulation clock resolution: ticks per microsecond.
pub const TICKS_PER_US: u64 = 100;

pub fn us_to_ticks(us: f64) -> u64 {
    (us * TICKS_PER_US as f64).round() as u64
}

pub fn ticks_to_us(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_US as f64
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("flow list is empty")]
    NoFlows,
    #[error("flow {0} has no tonemap in the deployment")]
    MissingLink(DirectedLink),
    #[error("duplicate flow {0}")]
    DuplicateFlow(DirectedLink),
    #[error("decision table has {table} slots, deployment has {deployment}")]
    SlotMismatch { table: usize, deployment: usize },
    #[error("invalid MAC parameters: {0}")]
    Params(String),
    #[error("invalid duration {0} us")]
    Duration(f64),
    #[error("link {0} not present in report")]
    UnknownLink(DirectedLink),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub collision_duration_us: f64,
    pub success_duration_us: f64,
    /// Unitless multiplier of the normalized throughput.
    pub frame_length: f64,
    pub cw_schedule: Vec<u32>,
    pub dc_schedule: Vec<u32>,
    pub slot_duration_us: f64,
    pub rank_wait_slots_per_rank: u32,
    /// Period of full-spectrum re-evaluation; `None` disables it.
    pub reeval_period_us: Option<f64>,
    /// Length of the repeating AC pattern the tonemap slots divide
    /// (half of a 60 Hz mains cycle).
    pub tonemap_period_us: f64,
    /// When set, secondary candidates stop hearing the primary once they have
    /// disabled its subcarriers and keep counting their global backoff down
    /// during sharing. An expiring counter aborts any secondary frame and
    /// collides with the primary.
    pub ss_global_countdown: bool,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            collision_duration_us: 2920.64,
            success_duration_us: 2542.64,
            frame_length: 2050.0,
            cw_schedule: vec![8, 16, 32, 64],
            dc_schedule: vec![0, 1, 3, 15],
            slot_duration_us: 35.84,
            rank_wait_slots_per_rank: 1,
            reeval_period_us: None,
            tonemap_period_us: 8333.33,
            ss_global_countdown: false,
        }
    }
}

impl MacParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Params(m.to_string()));
        if self.cw_schedule.is_empty() || self.cw_schedule.len() != self.dc_schedule.len() {
            return bad("cw and dc schedules must be non-empty and of equal length");
        }
        if self.cw_schedule.contains(&0) {
            return bad("contention windows must be at least 1");
        }
        for (name, v) in [
            ("collision_duration_us", self.collision_duration_us),
            ("success_duration_us", self.success_duration_us),
            ("slot_duration_us", self.slot_duration_us),
            ("tonemap_period_us", self.tonemap_period_us),
            ("frame_length", self.frame_length),
        ] {
            if v.is_nan() || v <= 0.0 || us_to_ticks(v) == 0 {
                return Err(SimError::Params(format!("{name} must be positive")));
            }
        }
        if let Some(p) = self.reeval_period_us {
            if p.is_nan() || p <= 0.0 || us_to_ticks(p) == 0 {
                return bad("reeval_period_us must be positive");
            }
        }
        Ok(())
    }
}

/// Which contention instance a transmission or counter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Full-spectrum transmission with no sharing.
    Global,
    /// Full-spectrum contention winner that shares spectrum.
    Primary,
    Secondary,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Global => "global",
            Role::Primary => "primary",
            Role::Secondary => "secondary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TxStart,
    TxEndSuccess,
    TxEndCollision,
    StageAdvance,
    SsEngage,
    SsAbort,
    ReevalStart,
    ReevalEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::TxStart => "tx_start",
            EventKind::TxEndSuccess => "tx_end_success",
            EventKind::TxEndCollision => "tx_end_collision",
            EventKind::StageAdvance => "stage_advance",
            EventKind::SsEngage => "ss_engage",
            EventKind::SsAbort => "ss_abort",
            EventKind::ReevalStart => "reeval_start",
            EventKind::ReevalEnd => "reeval_end",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One log entry. Counters are the station's values right after the event in
/// the contention instance named by `role` (the global one for primaries).
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time_ticks: u64,
    pub kind: EventKind,
    pub link: DirectedLink,
    pub role: Role,
    pub stage: usize,
    pub bc: u32,
    pub dc: u32,
    pub spectrum_fraction: Option<f64>,
}

impl SimEvent {
    pub fn time_us(&self) -> f64 {
        ticks_to_us(self.time_ticks)
    }
}

pub const EVENT_CSV_HEADER: &str =
    "time_us,event,node,link_tx,link_rx,role,stage,bc,dc,spectrum_fraction";

fn format_ticks(t: u64) -> String {
    format!("{}.{:02}", t / TICKS_PER_US, t % TICKS_PER_US)
}

/// Event log as CSV. `node` is the transmitting node of the station's flow.
pub fn events_to_csv(events: &[SimEvent]) -> String {
    let mut out = String::from(EVENT_CSV_HEADER);
    out.push('\n');
    for e in events {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},",
            format_ticks(e.time_ticks),
            e.kind,
            e.link.tx,
            e.link.tx,
            e.link.rx,
            e.role.as_str(),
            e.stage,
            e.bc,
            e.dc
        );
        if let Some(sf) = e.spectrum_fraction {
            let _ = write!(out, "{sf:.6}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkTally {
    /// Successful frames in any role.
    pub success_count: u64,
    pub collision_count: u64,
    pub secondary_success_count: u64,
    /// Secondary frames lost to a full-spectrum transmission during sharing.
    pub aborted_count: u64,
    /// Sum of spectrum fractions of global and primary successes.
    pub sf_primary: f64,
    /// Sum of airtime-weighted spectrum fractions of secondary successes.
    pub sf_secondary: f64,
}

impl LinkTally {
    pub fn sf_total(&self) -> f64 {
        self.sf_primary + self.sf_secondary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReportRaw {
    pub links: BTreeMap<DirectedLink, LinkTally>,
    pub total_sim_time_us: f64,
    pub busy_time_us: f64,
    pub idle_time_us: f64,
    /// Primary transmissions that shared spectrum.
    pub ss_engagements: u64,
    pub events: Option<Vec<SimEvent>>,
}

impl SimReportRaw {
    pub fn tally(&self, link: &DirectedLink) -> Result<&LinkTally, SimError> {
        self.links
            .get(link)
            .ok_or_else(|| SimError::UnknownLink(link.clone()))
    }
}

/// `100 * sum(S_F) * frame_length / total_time_us` for one link; 0 for an
/// empty run.
pub fn normalized_throughput(
    r: &SimReportRaw,
    link: &DirectedLink,
    mac: &MacParams,
) -> Result<f64, SimError> {
    let tally = r.tally(link)?;
    if r.total_sim_time_us <= 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * tally.sf_total() * mac.frame_length / r.total_sim_time_us)
}

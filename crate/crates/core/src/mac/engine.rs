use std::collections::HashSet;

use super::{
    ticks_to_us, us_to_ticks, EventKind, LinkTally, MacParams, Role, SimError, SimEvent,
    SimReportRaw,
};
use crate::rng::SplitMix64;
use crate::sharing::{SsAllocation, SsDecisionTable};
use crate::tonemap::{active_bits, DirectedLink, Tonemap, MAX_SLOT_BITS};
use crate::trace::Deployment;

/// Everything that determines a run.
#[derive(Debug, Clone, Copy)]
pub struct SimInput<'a> {
    pub deployment: &'a Deployment,
    /// `None` runs plain CSMA/CA without spectrum sharing.
    pub table: Option<&'a SsDecisionTable>,
    pub mac: &'a MacParams,
    /// Saturated flows; one contending station per flow.
    pub flows: &'a [DirectedLink],
    pub duration_us: f64,
    pub seed: u64,
    pub record_events: bool,
}

/// Runs one simulation to completion.
pub fn run_simulation(input: SimInput<'_>) -> Result<SimReportRaw, SimError> {
    Ok(Simulation::new(input)?.run())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    GlobalContention,
    PrimaryActive,
    SecondaryCandidate,
    SecondaryContending,
    SecondaryActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Backoff {
    stage: usize,
    bc: u32,
    dc: u32,
}

#[derive(Debug)]
struct Schedule {
    cw: Vec<u32>,
    dc: Vec<u32>,
}

impl Schedule {
    fn enter(&self, stage: usize, rng: &mut SplitMix64) -> Backoff {
        Backoff {
            stage,
            bc: rng.below(u64::from(self.cw[stage])) as u32,
            dc: self.dc[stage],
        }
    }

    fn escalate(&self, b: Backoff, rng: &mut SplitMix64) -> Backoff {
        self.enter((b.stage + 1).min(self.cw.len() - 1), rng)
    }

    /// Medium sensed busy while backing off. Returns true when the station
    /// moved up a stage.
    fn sense_busy(&self, b: &mut Backoff, rng: &mut SplitMix64) -> bool {
        if b.dc == 0 {
            *b = self.escalate(*b, rng);
            true
        } else {
            b.dc -= 1;
            false
        }
    }
}

#[derive(Debug)]
struct Station<'a> {
    link: DirectedLink,
    /// Deployment index of the transmitting node, used for tie-breaks.
    node_order: usize,
    tonemap: &'a Tonemap,
    global: Backoff,
    secondary: Backoff,
    mode: Mode,
}

/// A secondary candidate engaged for one primary frame.
struct Candidate {
    station: usize,
    wait_until: u64,
    /// Spectrum fraction of a full-length frame over the usable subcarriers.
    sf_frame: f64,
}

struct Window {
    primary: usize,
    start: u64,
    end: u64,
}

/// A single run. Strictly sequential; independent runs may execute on
/// separate threads.
pub struct Simulation<'a> {
    table: Option<&'a SsDecisionTable>,
    mac: &'a MacParams,
    schedule: Schedule,
    stations: Vec<Station<'a>>,
    global_rng: SplitMix64,
    secondary_rng: SplitMix64,
    slot: u64,
    t_success: u64,
    t_collision: u64,
    tonemap_period: u64,
    slot_count: usize,
    end: u64,
    now: u64,
    busy: u64,
    idle: u64,
    next_reeval: Option<u64>,
    tallies: Vec<LinkTally>,
    ss_engagements: u64,
    events: Option<Vec<SimEvent>>,
}

impl<'a> Simulation<'a> {
    pub fn new(input: SimInput<'a>) -> Result<Self, SimError> {
        let mac = input.mac;
        mac.validate()?;
        if !input.duration_us.is_finite() || input.duration_us < 0.0 {
            return Err(SimError::Duration(input.duration_us));
        }
        if input.flows.is_empty() {
            return Err(SimError::NoFlows);
        }
        let d = input.deployment;
        if let Some(t) = input.table {
            if t.slot_count() != d.slot_count() {
                return Err(SimError::SlotMismatch {
                    table: t.slot_count(),
                    deployment: d.slot_count(),
                });
            }
        }
        let mut seen = HashSet::new();
        let mut flows = Vec::with_capacity(input.flows.len());
        for f in input.flows {
            let tonemap = d
                .tonemap(f)
                .ok_or_else(|| SimError::MissingLink(f.clone()))?;
            if !seen.insert(f) {
                return Err(SimError::DuplicateFlow(f.clone()));
            }
            let tx = d
                .node_index(&f.tx)
                .expect("link endpoints are deployment nodes");
            let rx = d
                .node_index(&f.rx)
                .expect("link endpoints are deployment nodes");
            flows.push((tx, rx, f, tonemap));
        }
        flows.sort_by_key(|&(tx, rx, ..)| (tx, rx));

        let schedule = Schedule {
            cw: mac.cw_schedule.clone(),
            dc: mac.dc_schedule.clone(),
        };
        let mut global_rng = SplitMix64::stream(input.seed, 0);
        let stations: Vec<Station> = flows
            .into_iter()
            .map(|(tx, _, f, tonemap)| Station {
                link: f.clone(),
                node_order: tx,
                tonemap,
                global: schedule.enter(0, &mut global_rng),
                secondary: Backoff {
                    stage: 0,
                    bc: 0,
                    dc: 0,
                },
                mode: Mode::GlobalContention,
            })
            .collect();
        let reeval = mac
            .reeval_period_us
            .filter(|_| input.table.is_some())
            .map(us_to_ticks);

        Ok(Self {
            table: input.table,
            mac,
            schedule,
            tallies: vec![LinkTally::default(); stations.len()],
            stations,
            global_rng,
            secondary_rng: SplitMix64::stream(input.seed, 1),
            slot: us_to_ticks(mac.slot_duration_us),
            t_success: us_to_ticks(mac.success_duration_us),
            t_collision: us_to_ticks(mac.collision_duration_us),
            tonemap_period: us_to_ticks(mac.tonemap_period_us),
            slot_count: d.slot_count(),
            end: us_to_ticks(input.duration_us),
            now: 0,
            busy: 0,
            idle: 0,
            next_reeval: reeval,
            ss_engagements: 0,
            events: input.record_events.then(Vec::new),
        })
    }

    pub fn run(mut self) -> SimReportRaw {
        while self.now < self.end {
            let ready: Vec<usize> = (0..self.stations.len())
                .filter(|&s| self.stations[s].global.bc == 0)
                .collect();
            match ready.len() {
                0 => {
                    for st in &mut self.stations {
                        st.global.bc -= 1;
                    }
                    self.idle += self.slot;
                    self.now += self.slot;
                }
                1 => self.transmit(ready[0]),
                _ => self.collide(&ready),
            }
        }
        self.finish()
    }

    fn finish(self) -> SimReportRaw {
        let mut events = self.events;
        if let Some(ev) = events.as_mut() {
            // stable: same-tick events keep their causal order
            ev.sort_by_key(|e| e.time_ticks);
        }
        SimReportRaw {
            links: self
                .stations
                .iter()
                .map(|s| s.link.clone())
                .zip(self.tallies)
                .collect(),
            total_sim_time_us: ticks_to_us(self.end),
            busy_time_us: ticks_to_us(self.busy),
            idle_time_us: ticks_to_us(self.idle),
            ss_engagements: self.ss_engagements,
            events,
        }
    }

    fn log(&mut self, time: u64, kind: EventKind, s: usize, role: Role, sf: Option<f64>) {
        if let Some(ev) = self.events.as_mut() {
            let st = &self.stations[s];
            let b = if role == Role::Secondary {
                st.secondary
            } else {
                st.global
            };
            ev.push(SimEvent {
                time_ticks: time,
                kind,
                link: st.link.clone(),
                role,
                stage: b.stage,
                bc: b.bc,
                dc: b.dc,
                spectrum_fraction: sf,
            });
        }
    }

    /// Tonemap slot in force at tick `t`.
    fn ac_slot(&self, t: u64) -> usize {
        let phase = u128::from(t % self.tonemap_period);
        (phase * self.slot_count as u128 / u128::from(self.tonemap_period)) as usize
    }

    /// Busy period starting at `self.now` that would run past the end of the
    /// run: account the remaining time and stop.
    fn truncate(&mut self) {
        self.busy += self.end - self.now;
        self.now = self.end;
    }

    /// Global busy-sensing for every station other than `except`.
    fn others_sense_busy(&mut self, except: &[usize], t: u64) {
        for s in 0..self.stations.len() {
            if except.contains(&s) {
                continue;
            }
            let mut b = self.stations[s].global;
            if self.schedule.sense_busy(&mut b, &mut self.global_rng) {
                self.stations[s].global = b;
                self.log(t, EventKind::StageAdvance, s, Role::Global, None);
            } else {
                self.stations[s].global = b;
            }
        }
    }

    fn escalate_global(&mut self, s: usize, t: u64) {
        self.stations[s].global = self
            .schedule
            .escalate(self.stations[s].global, &mut self.global_rng);
        self.log(t, EventKind::StageAdvance, s, Role::Global, None);
    }

    fn collide(&mut self, ready: &[usize]) {
        let t = self.now;
        for &s in ready {
            self.log(t, EventKind::TxStart, s, Role::Global, None);
        }
        self.others_sense_busy(ready, t);
        let done = t + self.t_collision;
        if done > self.end {
            self.truncate();
            return;
        }
        for &s in ready {
            self.tallies[s].collision_count += 1;
            self.log(done, EventKind::TxEndCollision, s, Role::Global, None);
            self.escalate_global(s, done);
        }
        self.busy += self.t_collision;
        self.now = done;
    }

    fn full_bits(&self, s: usize, k: usize) -> u32 {
        self.stations[s]
            .tonemap
            .slot_bits(k)
            .expect("slot within deployment")
    }

    fn transmit(&mut self, p: usize) {
        let t = self.now;
        let p_end = t + self.t_success;
        let k = self.ac_slot(t);

        let mut suspended = false;
        if let Some(next) = self.next_reeval {
            if t >= next {
                suspended = true;
                let period = us_to_ticks(self.mac.reeval_period_us.expect("reeval enabled"));
                let mut n = next;
                while n <= t {
                    n += period;
                }
                self.next_reeval = Some(n);
            }
        }

        let candidates = match (self.table, suspended) {
            (Some(table), false) => self.engage(table.candidates(&self.stations[p].link, k), t, k),
            _ => Vec::new(),
        };

        if candidates.is_empty() {
            let sf = f64::from(self.full_bits(p, k)) / f64::from(MAX_SLOT_BITS);
            if suspended {
                self.log(t, EventKind::ReevalStart, p, Role::Global, None);
            }
            self.log(t, EventKind::TxStart, p, Role::Global, Some(sf));
            self.others_sense_busy(&[p], t);
            if p_end > self.end {
                self.truncate();
                return;
            }
            self.record_success(p, Role::Global, sf, p_end);
            if suspended {
                self.log(p_end, EventKind::ReevalEnd, p, Role::Global, None);
            }
            self.busy += self.t_success;
            self.now = p_end;
            return;
        }

        self.share(p, t, p_end, k, candidates);
    }

    fn record_success(&mut self, s: usize, role: Role, sf: f64, at: u64) {
        let tally = &mut self.tallies[s];
        tally.success_count += 1;
        tally.sf_primary += sf;
        self.stations[s].global = self.schedule.enter(0, &mut self.global_rng);
        self.log(at, EventKind::TxEndSuccess, s, role, Some(sf));
    }

    /// Candidates of the table entry that have a station in this run, with
    /// the subcarriers each may use: its own allocation restricted to the
    /// subcarriers the primary gives up (those of the best such candidate).
    fn engage(&self, allocs: &'a [SsAllocation], t: u64, k: usize) -> Vec<(Candidate, Vec<usize>)> {
        let wait = u64::from(self.mac.rank_wait_slots_per_rank) * self.slot;
        let mut out: Vec<(Candidate, Vec<usize>)> = Vec::new();
        for a in allocs {
            let Some(s) = self.stations.iter().position(|st| st.link == a.secondary) else {
                continue;
            };
            let usable: Vec<usize> = match out.first() {
                None => a.shared_indices.clone(),
                Some((_, shared)) => a
                    .shared_indices
                    .iter()
                    .copied()
                    .filter(|j| shared.binary_search(j).is_ok())
                    .collect(),
            };
            let slot = self.stations[s]
                .tonemap
                .slot(k)
                .expect("slot within deployment");
            let bits = active_bits(slot, &usable).expect("allocation indices are valid");
            out.push((
                Candidate {
                    station: s,
                    wait_until: t + a.rank as u64 * wait,
                    sf_frame: f64::from(bits) / f64::from(MAX_SLOT_BITS),
                },
                usable,
            ));
        }
        out
    }

    fn share(
        &mut self,
        p: usize,
        t: u64,
        p_end: u64,
        k: usize,
        engaged: Vec<(Candidate, Vec<usize>)>,
    ) {
        let shared = &engaged[0].1;
        let primary_slot = self.stations[p]
            .tonemap
            .slot(k)
            .expect("slot within deployment");
        let given_up = active_bits(primary_slot, shared).expect("allocation indices are valid");
        let sf_primary = f64::from(self.full_bits(p, k) - given_up) / f64::from(MAX_SLOT_BITS);
        let cands: Vec<Candidate> = engaged.into_iter().map(|(c, _)| c).collect();

        self.ss_engagements += 1;
        self.stations[p].mode = Mode::PrimaryActive;
        self.log(t, EventKind::TxStart, p, Role::Primary, Some(sf_primary));
        self.log(t, EventKind::SsEngage, p, Role::Primary, None);
        self.others_sense_busy(&[p], t);
        if p_end > self.end {
            self.truncate();
            self.reset_modes();
            return;
        }
        for c in &cands {
            self.stations[c.station].mode = Mode::SecondaryCandidate;
        }

        let win = Window {
            primary: p,
            start: t,
            end: p_end,
        };
        // (candidate index, start, end) of the secondary frame on air
        let mut active: Option<(usize, u64, u64)> = None;
        // colliding candidate indices and the end of the collision
        let mut collision: Option<(Vec<usize>, u64)> = None;
        let mut established = false;

        let mut u = t;
        let mut first = true;
        while u < p_end {
            if let Some((ci, start, end)) = active {
                if end <= u {
                    self.secondary_success(&cands[ci], start, end, p_end);
                    active = None;
                }
            }
            if let Some((who, end)) = collision.take() {
                if end <= u {
                    self.secondary_collision_end(&cands, &who, end, p_end);
                } else {
                    collision = Some((who, end));
                }
            }

            if self.mac.ss_global_countdown && !first {
                let ready: Vec<usize> = cands
                    .iter()
                    .map(|c| c.station)
                    .filter(|&s| self.stations[s].global.bc == 0)
                    .collect();
                if !ready.is_empty() {
                    let on_air = active.map(|(ci, ..)| cands[ci].station);
                    self.interrupt(&win, u, &ready, on_air);
                    return;
                }
                for c in &cands {
                    self.stations[c.station].global.bc -= 1;
                }
            }
            first = false;

            if !established {
                let first_up = (0..cands.len())
                    .filter(|&ci| cands[ci].wait_until == u)
                    .min_by_key(|&ci| (self.stations[cands[ci].station].node_order, ci));
                if let Some(ci) = first_up {
                    established = true;
                    let s = cands[ci].station;
                    self.stations[s].secondary = Backoff {
                        stage: 0,
                        bc: 0,
                        dc: self.schedule.dc[0],
                    };
                    active = Some(self.start_secondary(&cands, ci, u, p_end));
                    for (cj, c) in cands.iter().enumerate() {
                        if cj != ci {
                            let st = c.station;
                            self.stations[st].mode = Mode::SecondaryContending;
                            self.stations[st].secondary =
                                self.schedule.enter(0, &mut self.secondary_rng);
                        }
                    }
                    self.secondary_sense_busy(&cands, &[ci], u);
                }
            } else if active.is_none() && collision.is_none() {
                let ready: Vec<usize> = (0..cands.len())
                    .filter(|&ci| {
                        let st = &self.stations[cands[ci].station];
                        st.mode == Mode::SecondaryContending && st.secondary.bc == 0
                    })
                    .collect();
                match ready.len() {
                    0 => {
                        for c in &cands {
                            let st = &mut self.stations[c.station];
                            if st.mode == Mode::SecondaryContending {
                                st.secondary.bc -= 1;
                            }
                        }
                    }
                    1 => {
                        active = Some(self.start_secondary(&cands, ready[0], u, p_end));
                        self.secondary_sense_busy(&cands, &ready, u);
                    }
                    _ => {
                        for &ci in &ready {
                            self.stations[cands[ci].station].mode = Mode::SecondaryActive;
                            self.log(
                                u,
                                EventKind::TxStart,
                                cands[ci].station,
                                Role::Secondary,
                                None,
                            );
                        }
                        self.secondary_sense_busy(&cands, &ready, u);
                        collision = Some((ready, (u + self.t_collision).min(p_end)));
                    }
                }
            }
            u += self.slot;
        }

        if let Some((ci, start, end)) = active {
            self.secondary_success(&cands[ci], start, end, p_end);
        }
        if let Some((who, end)) = collision {
            self.secondary_collision_end(&cands, &who, end, p_end);
        }
        self.record_success(p, Role::Primary, sf_primary, p_end);
        self.reset_modes();
        self.busy += self.t_success;
        self.now = p_end;
    }

    fn start_secondary(
        &mut self,
        cands: &[Candidate],
        ci: usize,
        u: u64,
        p_end: u64,
    ) -> (usize, u64, u64) {
        let c = &cands[ci];
        self.stations[c.station].mode = Mode::SecondaryActive;
        self.log(
            u,
            EventKind::TxStart,
            c.station,
            Role::Secondary,
            Some(c.sf_frame),
        );
        (ci, u, (u + self.t_success).min(p_end))
    }

    fn secondary_sense_busy(&mut self, cands: &[Candidate], except: &[usize], u: u64) {
        for (ci, c) in cands.iter().enumerate() {
            let s = c.station;
            if except.contains(&ci) || self.stations[s].mode != Mode::SecondaryContending {
                continue;
            }
            let mut b = self.stations[s].secondary;
            let advanced = self.schedule.sense_busy(&mut b, &mut self.secondary_rng);
            self.stations[s].secondary = b;
            if advanced {
                self.log(u, EventKind::StageAdvance, s, Role::Secondary, None);
            }
        }
    }

    fn secondary_success(&mut self, c: &Candidate, start: u64, end: u64, p_end: u64) {
        let s = c.station;
        let credit = c.sf_frame * (end - start) as f64 / self.t_success as f64;
        let tally = &mut self.tallies[s];
        tally.success_count += 1;
        tally.secondary_success_count += 1;
        tally.sf_secondary += credit;
        if end < p_end {
            self.stations[s].secondary = self.schedule.enter(0, &mut self.secondary_rng);
            self.stations[s].mode = Mode::SecondaryContending;
        }
        self.log(
            end,
            EventKind::TxEndSuccess,
            s,
            Role::Secondary,
            Some(credit),
        );
    }

    fn secondary_collision_end(
        &mut self,
        cands: &[Candidate],
        who: &[usize],
        end: u64,
        p_end: u64,
    ) {
        for &ci in who {
            let s = cands[ci].station;
            self.tallies[s].collision_count += 1;
            self.log(end, EventKind::TxEndCollision, s, Role::Secondary, None);
            if end < p_end {
                self.stations[s].secondary = self
                    .schedule
                    .escalate(self.stations[s].secondary, &mut self.secondary_rng);
                self.stations[s].mode = Mode::SecondaryContending;
                self.log(end, EventKind::StageAdvance, s, Role::Secondary, None);
            }
        }
    }

    /// A secondary candidate's global counter expired during sharing: it drops
    /// any secondary frame and its full-spectrum attempt collides with the
    /// primary.
    fn interrupt(&mut self, win: &Window, u: u64, ready: &[usize], on_air: Option<usize>) {
        if let Some(s) = on_air {
            self.tallies[s].aborted_count += 1;
            self.log(u, EventKind::SsAbort, s, Role::Secondary, None);
        }
        for &s in ready {
            self.log(u, EventKind::TxStart, s, Role::Global, None);
        }
        self.reset_modes();
        let done = win.end.max(u + self.t_collision);
        if done > self.end {
            self.now = win.start;
            self.truncate();
            return;
        }
        let mut colliders: Vec<usize> = ready.to_vec();
        colliders.push(win.primary);
        colliders.sort_unstable();
        for s in colliders {
            self.tallies[s].collision_count += 1;
            let role = if s == win.primary {
                Role::Primary
            } else {
                Role::Global
            };
            self.log(done, EventKind::TxEndCollision, s, role, None);
            self.escalate_global(s, done);
        }
        self.busy += done - win.start;
        self.now = done;
    }

    fn reset_modes(&mut self) {
        for st in &mut self.stations {
            st.mode = Mode::GlobalContention;
        }
    }
}

//! Seeded synthetic deployments.
//!
//! Every random draw comes from a [`SplitMix64`] stream keyed by what it
//! describes (an unordered pair or a directed link), so the output is
//! a pure function of `(n_nodes, profile, slot_count)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rng::{self, SplitMix64};
use crate::tonemap::{DirectedLink, Tonemap, LEGAL_BITS, MAX_BITS, MAX_SLOTS, SUBCARRIERS};
use crate::trace::Deployment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Flat modulation at `base_quality` on every link.
    Uniform,
    /// Each node transmits well inside its own disjoint band of subcarriers
    /// and around `base_quality` elsewhere, so nodes differ in where they are
    /// strong rather than in overall strength.
    Complementary,
    /// Frequency-selective fading with contiguous zeroed bands.
    InterferenceNotched,
    /// Opposite frequency tilts in the two directions of each pair.
    Asymmetric,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Uniform => "uniform",
            ProfileKind::Complementary => "complementary",
            ProfileKind::InterferenceNotched => "interference-notched",
            ProfileKind::Asymmetric => "asymmetric",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileKind {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(ProfileKind::Uniform),
            "complementary" => Ok(ProfileKind::Complementary),
            "interference-notched" => Ok(ProfileKind::InterferenceNotched),
            "asymmetric" => Ok(ProfileKind::Asymmetric),
            other => Err(GenerateError::UnknownProfile(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorProfile {
    pub kind: ProfileKind,
    /// Mean modulation level, 0 to 10.
    pub base_quality: f64,
    pub notch_count: usize,
    /// Subcarriers per notch.
    pub notch_width: usize,
    /// Largest per-subcarrier directional perturbation, in bits.
    pub asymmetry_noise: u8,
    pub seed: u64,
}

impl GeneratorProfile {
    pub fn new(kind: ProfileKind, seed: u64) -> Self {
        Self {
            kind,
            base_quality: 6.0,
            notch_count: 0,
            notch_width: 0,
            asymmetry_noise: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("slot count {0} outside 1..={MAX_SLOTS}")]
    SlotCount(usize),
    #[error("base quality {0} outside [0, 10]")]
    BaseQuality(f64),
    #[error("infeasible notch layout: {count} notches of width {width} exceed {SUBCARRIERS} subcarriers")]
    NotchLayout { count: usize, width: usize },
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
}

/// Largest HPAV-legal modulation not above `x` rounded to the nearest integer.
pub fn quantize(x: f64) -> u8 {
    let r = x.clamp(0.0, f64::from(MAX_BITS)).round() as u8;
    *LEGAL_BITS.iter().rev().find(|&&b| b <= r).unwrap_or(&0)
}

const PAIR_STREAM: u64 = 2 << 40;
const LINK_STREAM: u64 = 3 << 40;

/// Builds a deployment over nodes `N1..Nn` with tonemaps for every directed
/// link.
pub fn generate_deployment(
    n_nodes: usize,
    profile: &GeneratorProfile,
    slot_count: usize,
) -> Result<Deployment, GenerateError> {
    if n_nodes < 2 {
        return Err(GenerateError::TooFewNodes(n_nodes));
    }
    if !(1..=MAX_SLOTS).contains(&slot_count) {
        return Err(GenerateError::SlotCount(slot_count));
    }
    if !(0.0..=10.0).contains(&profile.base_quality) {
        return Err(GenerateError::BaseQuality(profile.base_quality));
    }
    if profile
        .notch_count
        .checked_mul(profile.notch_width)
        .is_none_or(|total| total > SUBCARRIERS)
    {
        return Err(GenerateError::NotchLayout {
            count: profile.notch_count,
            width: profile.notch_width,
        });
    }

    let seed = profile.seed;
    let nodes: Vec<String> = (1..=n_nodes).map(|i| format!("N{i}")).collect();

    let mut links = BTreeMap::new();
    for a in 0..n_nodes {
        for b in (a + 1)..n_nodes {
            let pair_id = (a * n_nodes + b) as u64;
            let mut pair_rng = SplitMix64::stream(seed, PAIR_STREAM + pair_id);
            let pair = PairChannel::draw(&mut pair_rng, profile, slot_count);
            let shared_notches = (profile.asymmetry_noise == 0)
                .then(|| notch_layout(&mut pair_rng, profile.notch_count, profile.notch_width));

            for (tx, rx, direction) in [(a, b, 1.0), (b, a, -1.0)] {
                let link_id = (tx * n_nodes + rx) as u64;
                let mut link_rng = SplitMix64::stream(seed, LINK_STREAM + link_id);
                let notches = match &shared_notches {
                    Some(n) => n.clone(),
                    None => notch_layout(&mut link_rng, profile.notch_count, profile.notch_width),
                };
                let ctx = LinkContext {
                    tx,
                    n_nodes,
                    direction,
                };
                let slots = (0..slot_count)
                    .map(|k| {
                        let mut values: Vec<u8> = (0..SUBCARRIERS)
                            .map(|j| {
                                let mut level = pair.level(profile, &ctx, k, j);
                                if profile.asymmetry_noise > 0 {
                                    let a = i64::from(profile.asymmetry_noise);
                                    level += link_rng.range_inclusive(-a, a) as f64;
                                }
                                quantize(level)
                            })
                            .collect();
                        for &(start, width) in &notches {
                            values[start..start + width].fill(0);
                        }
                        values
                    })
                    .collect();
                links.insert(
                    DirectedLink::new(nodes[tx].clone(), nodes[rx].clone()).expect("tx != rx"),
                    Tonemap::new(slots).expect("generated values are legal"),
                );
            }
        }
    }

    let metadata = BTreeMap::from([
        (
            "asymmetry_noise".to_string(),
            profile.asymmetry_noise.to_string(),
        ),
        ("base_quality".to_string(), profile.base_quality.to_string()),
        ("generator".to_string(), "plcnet-generate-v1".to_string()),
        ("notch_count".to_string(), profile.notch_count.to_string()),
        ("notch_width".to_string(), profile.notch_width.to_string()),
        ("prng".to_string(), rng::ALGORITHM.to_string()),
        ("profile".to_string(), profile.kind.name().to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);
    Ok(Deployment::new(nodes, slot_count, links, metadata).expect("generated deployment is valid"))
}

/// Home band of node `i` out of `n`: contiguous, disjoint across nodes, the
/// last band absorbing the remainder.
pub fn home_band(i: usize, n: usize) -> std::ops::Range<usize> {
    let width = SUBCARRIERS / n;
    let start = i * width;
    let end = if i + 1 == n {
        SUBCARRIERS
    } else {
        start + width
    };
    start..end
}

/// Non-overlapping notches: the band is split into `count` equal segments and
/// each notch is placed uniformly inside its own segment.
fn notch_layout(rng: &mut SplitMix64, count: usize, width: usize) -> Vec<(usize, usize)> {
    if count == 0 || width == 0 {
        return Vec::new();
    }
    let segment = SUBCARRIERS / count;
    (0..count)
        .map(|i| {
            let slack = (segment - width) as u64;
            (i * segment + rng.below(slack + 1) as usize, width)
        })
        .collect()
}

struct LinkContext {
    tx: usize,
    n_nodes: usize,
    /// +1 for the `a -> b` direction of a pair, -1 for `b -> a`.
    direction: f64,
}

/// Random structure shared by both directions of a node pair.
struct PairChannel {
    /// (amplitude, cycles across the band, phase) of each fading component.
    ripples: Vec<(f64, f64, f64)>,
    /// Degradation per slot, synchronous with the mains cycle.
    slot_offsets: Vec<f64>,
    tilt: f64,
}

impl PairChannel {
    fn draw(rng: &mut SplitMix64, profile: &GeneratorProfile, slot_count: usize) -> Self {
        if profile.kind == ProfileKind::Uniform {
            return Self {
                ripples: Vec::new(),
                slot_offsets: vec![0.0; slot_count],
                tilt: 0.0,
            };
        }
        let ripples = (0..3)
            .map(|_| {
                (
                    0.4 + 0.8 * rng.unit_f64(),
                    1.0 + 5.0 * rng.unit_f64(),
                    TAU * rng.unit_f64(),
                )
            })
            .collect();
        let slot_offsets = (0..slot_count)
            .map(|_| if rng.below(10) < 3 { -1.0 } else { 0.0 })
            .collect();
        let tilt = 1.0 + 2.0 * rng.unit_f64();
        Self {
            ripples,
            slot_offsets,
            tilt,
        }
    }

    fn ripple(&self, j: usize) -> f64 {
        let x = j as f64 / SUBCARRIERS as f64;
        self.ripples
            .iter()
            .map(|&(amp, cycles, phase)| amp * (TAU * cycles * x + phase).sin())
            .sum()
    }

    fn level(&self, profile: &GeneratorProfile, ctx: &LinkContext, k: usize, j: usize) -> f64 {
        let slot = self.slot_offsets[k];
        match profile.kind {
            ProfileKind::Uniform => profile.base_quality,
            ProfileKind::Complementary => {
                if home_band(ctx.tx, ctx.n_nodes).contains(&j) {
                    f64::from(MAX_BITS) + 0.25 * self.ripple(j).min(0.0) + slot
                } else {
                    profile.base_quality + 0.5 * self.ripple(j) + slot
                }
            }
            ProfileKind::InterferenceNotched => profile.base_quality + self.ripple(j) + slot,
            ProfileKind::Asymmetric => {
                let x = j as f64 / (SUBCARRIERS - 1) as f64 - 0.5;
                profile.base_quality + self.ripple(j) + ctx.direction * self.tilt * 2.0 * x + slot
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::serialize_trace;

    #[test]
    fn quantize_maps_to_legal_values() {
        assert_eq!(quantize(10.0), 10);
        assert_eq!(quantize(9.6), 10);
        assert_eq!(quantize(9.4), 8);
        assert_eq!(quantize(7.0), 6);
        assert_eq!(quantize(5.0), 4);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(42.0), 10);
    }

    #[test]
    fn degenerate_uniform_profile() {
        let mut p = GeneratorProfile::new(ProfileKind::Uniform, 3);
        p.base_quality = 10.0;
        let d = generate_deployment(2, &p, 5).unwrap();
        assert_eq!(d.links().len(), 2);
        for tm in d.links().values() {
            assert!(tm.slots().all(|s| s.iter().all(|&v| v == 10)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut p = GeneratorProfile::new(ProfileKind::InterferenceNotched, 11);
        p.notch_count = 3;
        p.notch_width = 40;
        p.asymmetry_noise = 1;
        let a = serialize_trace(&generate_deployment(4, &p, 5).unwrap());
        let b = serialize_trace(&generate_deployment(4, &p, 5).unwrap());
        assert_eq!(a, b);
        p.seed = 12;
        assert_ne!(a, serialize_trace(&generate_deployment(4, &p, 5).unwrap()));
    }

    #[test]
    fn notches_zero_contiguous_bands() {
        let mut p = GeneratorProfile::new(ProfileKind::Uniform, 5);
        p.base_quality = 8.0;
        p.notch_count = 2;
        p.notch_width = 100;
        let d = generate_deployment(3, &p, 2).unwrap();
        for tm in d.links().values() {
            for s in tm.slots() {
                assert_eq!(s.iter().filter(|&&v| v == 0).count(), 200);
            }
        }
    }

    #[test]
    fn infeasible_notches_and_bad_inputs() {
        let mut p = GeneratorProfile::new(ProfileKind::Uniform, 1);
        p.notch_count = 10;
        p.notch_width = 92;
        assert!(matches!(
            generate_deployment(4, &p, 5),
            Err(GenerateError::NotchLayout { .. })
        ));
        p.notch_width = 91;
        assert!(generate_deployment(4, &p, 5).is_ok());
        assert_eq!(
            generate_deployment(1, &p, 5),
            Err(GenerateError::TooFewNodes(1))
        );
        assert_eq!(
            generate_deployment(2, &p, 7),
            Err(GenerateError::SlotCount(7))
        );
        assert!("nonsense".parse::<ProfileKind>().is_err());
    }

    #[test]
    fn complementary_home_bands_are_strong() {
        let p = GeneratorProfile::new(ProfileKind::Complementary, 9);
        let d = generate_deployment(4, &p, 5).unwrap();
        for (link, tm) in d.links() {
            let tx = d.node_index(&link.tx).unwrap();
            let band = home_band(tx, 4);
            for s in tm.slots() {
                assert!(s[band.clone()].iter().all(|&v| v >= 8), "{link}");
            }
        }
    }

    #[test]
    fn values_are_hpav_legal() {
        for kind in [
            ProfileKind::Uniform,
            ProfileKind::Complementary,
            ProfileKind::InterferenceNotched,
            ProfileKind::Asymmetric,
        ] {
            let mut p = GeneratorProfile::new(kind, 21);
            p.asymmetry_noise = 2;
            let d = generate_deployment(3, &p, 6).unwrap();
            for tm in d.links().values() {
                assert!(tm.slots().flatten().all(|v| LEGAL_BITS.contains(v)));
            }
        }
    }
}

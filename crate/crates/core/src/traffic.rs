//! Self-similar traffic from aggregated Pareto ON/OFF sources.
//!
//! A source alternates between ON periods, during which it emits packets back to back at its
//! peak rate, and silent OFF periods. Both period lengths are Pareto distributed with shape
//! `alpha = 3 - 2H`; the ON scale is one packet time and the OFF scale is solved from the
//! requested mean load.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time slack when deciding whether a packet completes inside the current slot.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub hurst: f64,
    pub peak_bps: f64,
    /// Long-run fraction of time spent ON.
    pub mean_load: f64,
    pub packet_bits: f64,
    pub seed: u64,
}

impl SourceConfig {
    pub fn pareto_shape(&self) -> f64 {
        3.0 - 2.0 * self.hurst
    }
}

/// Stateful ON/OFF generator.
#[derive(Debug, Clone)]
pub struct OnOffSource {
    cfg: SourceConfig,
    rng: ChaCha8Rng,
    on_dist: Pareto<f64>,
    off_dist: Option<Pareto<f64>>,
    is_on: bool,
    remaining_s: f64,
    credit_bits: f64,
}

pub fn make_onoff_source(cfg: SourceConfig) -> Result<OnOffSource> {
    if !(cfg.hurst > 0.0 && cfg.hurst < 1.0) {
        return Err(Error::InvalidHurst(cfg.hurst));
    }
    if !(cfg.mean_load > 0.0 && cfg.mean_load <= 1.0) {
        return Err(Error::InvalidSource(format!("mean load {} outside (0, 1]", cfg.mean_load)));
    }
    if !(cfg.peak_bps > 0.0 && cfg.packet_bits > 0.0) {
        return Err(Error::InvalidSource("peak rate and packet size must be positive".into()));
    }
    let alpha = cfg.pareto_shape();
    let on_scale = cfg.packet_bits / cfg.peak_bps;
    let on_dist = Pareto::new(on_scale, alpha).map_err(|e| Error::InvalidSource(e.to_string()))?;
    let off_dist = if cfg.mean_load < 1.0 {
        let mean_on = alpha * on_scale / (alpha - 1.0);
        let mean_off = mean_on * (1.0 - cfg.mean_load) / cfg.mean_load;
        let off_scale = mean_off * (alpha - 1.0) / alpha;
        Some(Pareto::new(off_scale, alpha).map_err(|e| Error::InvalidSource(e.to_string()))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let is_on = off_dist.is_none() || rng.random_bool(cfg.mean_load);
    let remaining_s = match (&off_dist, is_on) {
        (None, _) => f64::INFINITY,
        (Some(_), true) => on_dist.sample(&mut rng),
        (Some(off), false) => off.sample(&mut rng),
    };
    Ok(OnOffSource {
        cfg,
        rng,
        on_dist,
        off_dist,
        is_on,
        remaining_s,
        credit_bits: 0.0,
    })
}

impl OnOffSource {
    pub fn config(&self) -> &SourceConfig {
        &self.cfg
    }

    /// Runs the source for one slot and appends the completion offset (seconds from the slot
    /// start) of every packet finished in it. Returns the number of packets.
    pub fn emit(&mut self, slot_s: f64, out: &mut Vec<f64>) -> u64 {
        let mut t = 0.0;
        let mut emitted = 0;
        let rate = self.cfg.peak_bps;
        let size = self.cfg.packet_bits;
        while t < slot_s - TIME_EPS {
            let chunk = self.remaining_s.min(slot_s - t);
            if self.is_on {
                let mut left = chunk;
                let mut at = t;
                loop {
                    let need = (size - self.credit_bits) / rate;
                    if need <= left + TIME_EPS {
                        at += need;
                        left -= need;
                        out.push(at.min(slot_s));
                        emitted += 1;
                        self.credit_bits = 0.0;
                    } else {
                        self.credit_bits += rate * left;
                        break;
                    }
                }
            }
            t += chunk;
            self.remaining_s -= chunk;
            if self.remaining_s <= TIME_EPS {
                self.toggle();
            }
        }
        emitted
    }

    fn toggle(&mut self) {
        let Some(off) = &self.off_dist else {
            self.remaining_s = f64::INFINITY;
            return;
        };
        self.is_on = !self.is_on;
        self.remaining_s = if self.is_on {
            self.on_dist.sample(&mut self.rng)
        } else {
            off.sample(&mut self.rng)
        };
    }
}

/// Total packets emitted by `sources` during one slot.
pub fn arrivals_for_slot(sources: &mut [OnOffSource], slot_s: f64) -> u64 {
    let mut scratch = Vec::new();
    sources.iter_mut().map(|s| s.emit(slot_s, &mut scratch)).sum()
}

/// Deterministic 64-bit mixing used to derive per-source seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ c.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-slot packet counts for every `(onu, group)` flow. Group 0 is best effort, groups
/// `1..` are the delay classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalTrace {
    pub n_onus: usize,
    pub n_groups: usize,
    slots: Vec<Vec<u64>>,
}

impl ArrivalTrace {
    pub fn new(n_onus: usize, n_groups: usize) -> Self {
        ArrivalTrace { n_onus, n_groups, slots: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push_slot(&mut self, counts: Vec<u64>) {
        assert_eq!(counts.len(), self.n_onus * self.n_groups);
        self.slots.push(counts);
    }

    pub fn get(&self, slot: usize, onu: usize, group: usize) -> u64 {
        self.slots
            .get(slot)
            .map(|s| s[onu * self.n_groups + group])
            .unwrap_or(0)
    }

    pub fn slot(&self, slot: usize) -> Option<&[u64]> {
        self.slots.get(slot).map(Vec::as_slice)
    }

    /// Writes `slot,onu,class,packets` rows; zero counts are omitted.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["slot", "onu", "class", "packets"])?;
        for (t, counts) in self.slots.iter().enumerate() {
            for onu in 0..self.n_onus {
                for g in 0..self.n_groups {
                    let n = counts[onu * self.n_groups + g];
                    if n > 0 {
                        out.write_record(&[t.to_string(), onu.to_string(), g.to_string(), n.to_string()])?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`ArrivalTrace::write_csv`]. Dimensions are given explicitly
    /// because idle flows leave no rows; `slots` extends the trace past its last row.
    pub fn read_csv<R: Read>(r: R, n_onus: usize, n_groups: usize, slots: usize) -> Result<Self> {
        let mut trace = ArrivalTrace::new(n_onus, n_groups);
        trace.slots = vec![vec![0; n_onus * n_groups]; slots];
        let mut rdr = csv::Reader::from_reader(r);
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<u64> {
                rec.get(i)
                    .ok_or_else(|| Error::Trace(format!("missing column {i}")))?
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Trace(e.to_string()))
            };
            let (t, onu, g, n) = (field(0)? as usize, field(1)? as usize, field(2)? as usize, field(3)?);
            if onu >= n_onus || g >= n_groups {
                return Err(Error::Trace(format!("row for onu {onu} class {g} is out of range")));
            }
            if t >= trace.slots.len() {
                trace.slots.resize(t + 1, vec![0; n_onus * n_groups]);
            }
            trace.slots[t][onu * n_groups + g] += n;
        }
        Ok(trace)
    }
}

/// Arrivals of one slot: for every flow, the packet offsets within the slot.
pub type SlotArrivals = Vec<Vec<f64>>;

/// Source of per-slot arrivals for the simulator with bounded look-ahead for predictions.
#[derive(Debug)]
pub enum TrafficFeed {
    Live {
        slot_s: f64,
        /// Sources of each flow, flow index `onu * n_groups + group`.
        flows: Vec<Vec<OnOffSource>>,
        ahead: VecDeque<SlotArrivals>,
    },
    Replay {
        slot_s: f64,
        trace: ArrivalTrace,
        next: usize,
    },
}

impl TrafficFeed {
    pub fn live(slot_s: f64, flows: Vec<Vec<OnOffSource>>) -> Self {
        TrafficFeed::Live { slot_s, flows, ahead: VecDeque::new() }
    }

    pub fn replay(slot_s: f64, trace: ArrivalTrace) -> Self {
        TrafficFeed::Replay { slot_s, trace, next: 0 }
    }

    fn generate(slot_s: f64, flows: &mut [Vec<OnOffSource>]) -> SlotArrivals {
        flows
            .iter_mut()
            .map(|sources| {
                let mut times = Vec::new();
                for s in sources.iter_mut() {
                    s.emit(slot_s, &mut times);
                }
                times.sort_by(f64::total_cmp);
                times
            })
            .collect()
    }

    fn spread(slot_s: f64, counts: &[u64]) -> SlotArrivals {
        counts
            .iter()
            .map(|&n| (0..n).map(|k| (k as f64 + 1.0) * slot_s / n as f64).collect())
            .collect()
    }

    fn fill(&mut self, depth: usize) {
        if let TrafficFeed::Live { slot_s, flows, ahead } = self {
            while ahead.len() < depth {
                let s = Self::generate(*slot_s, flows);
                ahead.push_back(s);
            }
        }
    }

    /// Arrivals of the next slot. Replayed traces spread each slot's packets evenly.
    pub fn next_slot(&mut self) -> SlotArrivals {
        self.fill(1);
        match self {
            TrafficFeed::Live { ahead, .. } => ahead.pop_front().expect("filled above"),
            TrafficFeed::Replay { slot_s, trace, next } => {
                let counts = trace
                    .slot(*next)
                    .map(<[u64]>::to_vec)
                    .unwrap_or_else(|| vec![0; trace.n_onus * trace.n_groups]);
                *next += 1;
                Self::spread(*slot_s, &counts)
            }
        }
    }

    /// Per-flow counts `offset` slots after the one that [`TrafficFeed::next_slot`] returns
    /// next.
    pub fn peek_counts(&mut self, offset: usize) -> Vec<u64> {
        self.fill(offset + 1);
        match self {
            TrafficFeed::Live { ahead, .. } => ahead[offset].iter().map(|v| v.len() as u64).collect(),
            TrafficFeed::Replay { trace, next, .. } => trace
                .slot(*next + offset)
                .map(<[u64]>::to_vec)
                .unwrap_or_else(|| vec![0; trace.n_onus * trace.n_groups]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(hurst: f64, load: f64, seed: u64) -> SourceConfig {
        SourceConfig { hurst, peak_bps: 100e6, mean_load: load, packet_bits: 10_000.0, seed }
    }

    #[test]
    fn shape_follows_hurst() {
        assert!((cfg(0.8, 0.5, 0).pareto_shape() - 1.4).abs() < 1e-12);
        assert!((cfg(0.2, 0.5, 0).pareto_shape() - 2.6).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(make_onoff_source(cfg(1.0, 0.5, 0)).unwrap_err(), Error::InvalidHurst(1.0));
        assert_eq!(make_onoff_source(cfg(0.0, 0.5, 0)).unwrap_err(), Error::InvalidHurst(0.0));
        assert!(matches!(make_onoff_source(cfg(0.5, 0.0, 0)), Err(Error::InvalidSource(_))));
        assert!(matches!(make_onoff_source(cfg(0.5, 1.5, 0)), Err(Error::InvalidSource(_))));
    }

    #[test]
    fn full_load_source_is_always_on() {
        let mut src = make_onoff_source(cfg(0.5, 1.0, 3)).unwrap();
        let mut out = Vec::new();
        for _ in 0..1000 {
            out.clear();
            assert_eq!(src.emit(0.5e-3, &mut out), 5);
            assert!(out.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_always_on_source_per_slot() {
        let mut sources = vec![make_onoff_source(cfg(0.5, 1.0, 1)).unwrap()];
        assert_eq!(arrivals_for_slot(&mut sources, 0.5e-3), 5);
        assert_eq!(arrivals_for_slot(&mut [], 0.5e-3), 0);
    }

    #[test]
    fn same_seed_same_trace() {
        let run = |seed| {
            let mut s = make_onoff_source(cfg(0.8, 0.3, seed)).unwrap();
            (0..5000).map(|_| arrivals_for_slot(std::slice::from_mut(&mut s), 0.5e-3)).collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn sixteen_sources_hit_aggregate_mean() {
        // 16 sources sharing 50 Mb/s on average: 2.5 packets per 0.5 ms slot.
        let per_source = 50e6 / 16.0 / 100e6;
        let mut sources: Vec<_> = (0..16)
            .map(|i| make_onoff_source(cfg(0.2, per_source, mix_seed(7, i, 0, 0))).unwrap())
            .collect();
        let slots = 100_000;
        let total: u64 = (0..slots).map(|_| arrivals_for_slot(&mut sources, 0.5e-3)).sum();
        let mean = total as f64 / slots as f64;
        assert!((mean - 2.5).abs() / 2.5 < 0.05, "mean {mean}");
    }

    #[test]
    fn trace_csv_round_trip() {
        let mut trace = ArrivalTrace::new(2, 3);
        trace.push_slot(vec![0, 1, 2, 3, 0, 0]);
        trace.push_slot(vec![0; 6]);
        trace.push_slot(vec![5, 0, 0, 0, 0, 1]);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("slot,onu,class,packets\n"));
        assert!(!text.contains('\r'));
        let back = ArrivalTrace::read_csv(&buf[..], 2, 3, 3).unwrap();
        assert_eq!(back, trace);
        assert!(ArrivalTrace::read_csv(&b"slot,onu,class,packets\n0,9,0,1\n"[..], 2, 3, 1).is_err());
    }

    #[test]
    fn feed_lookahead_matches_delivery() {
        let flows = vec![
            (0..4).map(|i| make_onoff_source(cfg(0.8, 0.2, i)).unwrap()).collect(),
            (0..4).map(|i| make_onoff_source(cfg(0.2, 0.4, 100 + i)).unwrap()).collect(),
        ];
        let mut feed = TrafficFeed::live(0.5e-3, flows);
        let predicted: Vec<_> = (0..5).map(|k| feed.peek_counts(k)).collect();
        for expected in predicted {
            let got: Vec<u64> = feed.next_slot().iter().map(|v| v.len() as u64).collect();
            assert_eq!(got, expected);
        }
    }
}

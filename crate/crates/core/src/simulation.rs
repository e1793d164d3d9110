//! Monte-Carlo throughput engine: binomial traffic, frame loop, pure Aloha
//! baseline, closed-form oracles and grid sweeps.
//!
//! Throughput is the mean number of packets delivered per frame. Devices are
//! memoryless: every frame redraws the active set from the binomial model, so
//! backoff after an abort or NACK only shows up as lost frames.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::TrainingConfig;
use crate::detector::DetectorConfig;
use crate::protocol::{
    frame_success_probability, ActiveSet, DeviceId, Detection, FrameResolution, Gateway, ProtocolConfig,
};
use crate::stats::{Probability, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    total_devices: usize,
    transmit_probability: Probability,
}

impl TrafficConfig {
    pub fn new(total_devices: usize, transmit_probability: Probability) -> Result<Self> {
        if total_devices == 0 {
            return Err(Error::InvalidConfig("need at least one device".into()));
        }
        Ok(TrafficConfig {
            total_devices,
            transmit_probability,
        })
    }

    pub fn total_devices(&self) -> usize {
        self.total_devices
    }

    pub fn transmit_probability(&self) -> Probability {
        self.transmit_probability
    }
}

/// `P(N = n)` for `N ~ Binomial(M, p_T)`.
pub fn binomial_pmf(n: usize, traffic: &TrafficConfig) -> f64 {
    let m = traffic.total_devices;
    if n > m {
        return 0.0;
    }
    let p = traffic.transmit_probability.value();
    let mut coeff = 1.0;
    for i in 0..n {
        coeff = coeff * (m - i) as f64 / (i + 1) as f64;
    }
    coeff * p.powi(n as i32) * (1.0 - p).powi((m - n) as i32)
}

/// Each device independently flips a `p_T` coin, in device order.
pub fn draw_active_set(traffic: &TrafficConfig, rng: &mut RngStream) -> ActiveSet {
    let p = traffic.transmit_probability.value();
    ActiveSet::new((0..traffic.total_devices).filter(|_| rng.random::<f64>() < p).map(DeviceId))
}

pub fn draw_active_count(traffic: &TrafficConfig, rng: &mut RngStream) -> usize {
    let p = traffic.transmit_probability.value();
    (0..traffic.total_devices).filter(|_| rng.random::<f64>() < p).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    PureAloha,
    AlohaNoma,
}

impl ProtocolKind {
    pub fn label(self) -> &'static str {
        match self {
            ProtocolKind::PureAloha => "pure_aloha",
            ProtocolKind::AlohaNoma => "aloha_noma",
        }
    }
}

/// Experiment coordinates a record was produced under. In a sweep both
/// protocols carry the grid point they belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordParams {
    pub total_devices: usize,
    pub p_transmit: f64,
    pub sic_degree: usize,
    pub attempts: usize,
    /// `None` under perfect detection.
    pub snr_db: Option<f64>,
    pub pfa: Option<f64>,
    pub perfect_detection: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRecord {
    pub protocol: ProtocolKind,
    pub params: RecordParams,
    pub frames: u64,
    pub mean_throughput: f64,
    pub stderr: f64,
    pub abort_rate: Probability,
    pub nack_rate: Probability,
    pub idle_rate: Probability,
    pub missed_rate: Probability,
}

#[derive(Debug, Default)]
struct Tally {
    frames: u64,
    delivered: u64,
    delivered_sq: u64,
    aborts: u64,
    nacks: u64,
    idles: u64,
    missed: u64,
}

impl Tally {
    fn add(&mut self, delivered: usize, resolution: FrameResolution) {
        let d = delivered as u64;
        self.frames += 1;
        self.delivered += d;
        self.delivered_sq += d * d;
        match resolution {
            FrameResolution::Aborted => self.aborts += 1,
            FrameResolution::Nacked => self.nacks += 1,
            FrameResolution::Idle => self.idles += 1,
            FrameResolution::Missed => self.missed += 1,
            FrameResolution::Acked => {}
        }
    }

    fn finish(self, protocol: ProtocolKind, params: RecordParams) -> ThroughputRecord {
        let n = self.frames as f64;
        let mean = self.delivered as f64 / n;
        let stderr = if self.frames > 1 {
            let ss = self.delivered_sq as f64 - self.delivered as f64 * mean;
            (ss.max(0.0) / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        ThroughputRecord {
            protocol,
            params,
            frames: self.frames,
            mean_throughput: mean,
            stderr,
            abort_rate: Probability::from_ratio(self.aborts, self.frames),
            nack_rate: Probability::from_ratio(self.nacks, self.frames),
            idle_rate: Probability::from_ratio(self.idles, self.frames),
            missed_rate: Probability::from_ratio(self.missed, self.frames),
        }
    }
}

fn check_frames(frames: u64) -> Result<()> {
    if frames == 0 {
        return Err(Error::InvalidConfig("need at least one frame".into()));
    }
    Ok(())
}

pub fn simulate_aloha_noma(
    traffic: &TrafficConfig,
    proto: &ProtocolConfig,
    frames: u64,
    rng: &mut RngStream,
) -> Result<ThroughputRecord> {
    check_frames(frames)?;
    if traffic.total_devices != proto.total_devices() {
        return Err(Error::InvalidConfig(format!(
            "traffic population {} differs from protocol population {}",
            traffic.total_devices,
            proto.total_devices()
        )));
    }
    let gateway = Gateway::new(*proto)?;
    let mut tally = Tally::default();
    for _ in 0..frames {
        let active = draw_active_set(traffic, rng);
        let out = gateway.run_frame(&active, rng)?;
        tally.add(out.delivered, out.resolution);
    }
    let (snr_db, pfa) = match proto.detection() {
        Detection::Perfect => (None, None),
        Detection::Estimated(det) => (Some(det.training().snr_db()), Some(det.false_alarm().value())),
    };
    let params = RecordParams {
        total_devices: traffic.total_devices,
        p_transmit: traffic.transmit_probability.value(),
        sic_degree: proto.sic_degree(),
        attempts: proto.max_attempts(),
        snr_db,
        pfa,
        perfect_detection: proto.perfect_detection(),
    };
    Ok(tally.finish(ProtocolKind::AlohaNoma, params))
}

/// Pure Aloha: a frame delivers one packet iff exactly one device transmits.
pub fn simulate_pure_aloha(traffic: &TrafficConfig, frames: u64, rng: &mut RngStream) -> Result<ThroughputRecord> {
    check_frames(frames)?;
    let mut tally = Tally::default();
    for _ in 0..frames {
        match draw_active_count(traffic, rng) {
            0 => tally.add(0, FrameResolution::Idle),
            1 => tally.add(1, FrameResolution::Acked),
            _ => tally.add(0, FrameResolution::Nacked),
        }
    }
    let params = RecordParams {
        total_devices: traffic.total_devices,
        p_transmit: traffic.transmit_probability.value(),
        sic_degree: 1,
        attempts: 1,
        snr_db: None,
        pfa: None,
        perfect_detection: true,
    };
    Ok(tally.finish(ProtocolKind::PureAloha, params))
}

/// Closed-form pure Aloha throughput `M p_T (1 - p_T)^(M - 1)`.
pub fn oracle_throughput_aloha(traffic: &TrafficConfig) -> f64 {
    binomial_pmf(1, traffic)
}

/// Closed-form Aloha-NOMA throughput under perfect detection:
/// `sum_{N=1}^{m} P(N) * N * P_success(N)`.
pub fn oracle_throughput_noma(traffic: &TrafficConfig, proto: &ProtocolConfig) -> f64 {
    let top = proto.sic_degree().min(traffic.total_devices);
    (1..=top)
        .map(|n| binomial_pmf(n, traffic) * n as f64 * frame_success_probability(n, proto).value())
        .sum()
}

/// Axes of a throughput sweep. Under perfect detection the SNR axis is
/// ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub p_transmit: Vec<f64>,
    pub sic_degree: Vec<usize>,
    pub attempts: Vec<usize>,
    pub snr_db: Vec<f64>,
}

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBase {
    pub total_devices: usize,
    pub pfa: f64,
    pub train_len: usize,
    pub amplitude: f64,
    pub perfect_detection: bool,
}

/// One grid point, fully resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub traffic: TrafficConfig,
    pub proto: ProtocolConfig,
}

impl SweepGrid {
    /// Grid points in row-major order: transmit probability, degree,
    /// attempts, SNR.
    pub fn points(&self, base: &SweepBase) -> Result<Vec<GridPoint>> {
        if self.p_transmit.is_empty() || self.sic_degree.is_empty() || self.attempts.is_empty() {
            return Err(Error::InvalidConfig("sweep grid has an empty axis".into()));
        }
        let snr: Vec<Option<f64>> = if base.perfect_detection {
            vec![None]
        } else if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        } else {
            self.snr_db.iter().copied().map(Some).collect()
        };
        let mut points = Vec::new();
        for &p in &self.p_transmit {
            let traffic = TrafficConfig::new(base.total_devices, Probability::new(p)?)?;
            for &m in &self.sic_degree {
                for &k in &self.attempts {
                    for s in &snr {
                        let detection = match s {
                            None => Detection::Perfect,
                            Some(db) => {
                                let training = TrainingConfig::from_snr_db(base.train_len, *db, base.amplitude)?;
                                Detection::Estimated(DetectorConfig::new(Probability::new(base.pfa)?, m, training)?)
                            }
                        };
                        let proto = ProtocolConfig::new(base.total_devices, m, k, detection)?;
                        points.push(GridPoint { traffic, proto });
                    }
                }
            }
        }
        Ok(points)
    }
}

/// Runs both protocols at every grid point. Point `i` uses sub-streams
/// `2i` (pure Aloha) and `2i + 1` (Aloha-NOMA) of `seed`, so the output is
/// independent of how points are scheduled. Records come back as
/// `[aloha_0, noma_0, aloha_1, noma_1, ...]`.
pub fn sweep(grid: &SweepGrid, base: &SweepBase, frames: u64, seed: u64) -> Result<Vec<ThroughputRecord>> {
    check_frames(frames)?;
    let points = grid.points(base)?;
    let pairs = points
        .par_iter()
        .enumerate()
        .map(|(i, point)| {
            let i = i as u64;
            let noma = simulate_aloha_noma(&point.traffic, &point.proto, frames, &mut RngStream::derive(seed, 2 * i + 1))?;
            let mut aloha = simulate_pure_aloha(&point.traffic, frames, &mut RngStream::derive(seed, 2 * i))?;
            aloha.params = noma.params;
            Ok([aloha, noma])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

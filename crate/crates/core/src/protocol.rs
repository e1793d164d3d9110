//! The five-phase Aloha-NOMA frame run by the gateway.
//!
//! 1. beacon
//! 2. training: active devices superpose their training word and the gateway
//!    estimates the active count
//! 3. abort if the estimate exceeds the SIC degree, otherwise broadcast the
//!    degree
//! 4. power selection: every active device picks one of `m` levels uniformly;
//!    distinct picks let the SIC receiver decode all packets, a collision
//!    triggers reselection, up to `k` attempts
//! 5. ACK on success, NACK (and backoff) when the attempts run out

use rand::Rng;

use crate::channel::superpose;
use crate::detector::{Detector, DetectorConfig};
use crate::stats::{Probability, RngStream};
use crate::{Error, Result};

/// Power-level picks are tracked in a bitmask.
pub const MAX_SIC_DEGREE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub usize);

/// Devices with a packet ready this frame; sorted and duplicate free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSet {
    ids: Vec<DeviceId>,
}

impl ActiveSet {
    pub fn new(ids: impl IntoIterator<Item = DeviceId>) -> Self {
        let mut ids: Vec<DeviceId> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        ActiveSet { ids }
    }

    /// Devices `0..count`.
    pub fn first(count: usize) -> Self {
        ActiveSet {
            ids: (0..count).map(DeviceId).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[DeviceId] {
        &self.ids
    }
}

/// How the gateway learns the active count in the training phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    /// Genie-aided: the estimate is the true count.
    Perfect,
    /// Sequential Neyman-Pearson test on a noisy training observation.
    Estimated(DetectorConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    total_devices: usize,
    sic_degree: usize,
    max_attempts: usize,
    detection: Detection,
}

impl ProtocolConfig {
    pub fn new(total_devices: usize, sic_degree: usize, max_attempts: usize, detection: Detection) -> Result<Self> {
        if total_devices == 0 {
            return Err(Error::InvalidConfig("need at least one device".into()));
        }
        if sic_degree == 0 || sic_degree > MAX_SIC_DEGREE {
            return Err(Error::InvalidConfig(format!(
                "SIC degree must be in 1..={MAX_SIC_DEGREE}, got {sic_degree}"
            )));
        }
        if max_attempts == 0 {
            return Err(Error::InvalidConfig("need at least one power selection attempt".into()));
        }
        if let Detection::Estimated(det) = &detection {
            if sic_degree > det.max_detectable() {
                return Err(Error::InvalidConfig(format!(
                    "SIC degree {sic_degree} exceeds the detector ceiling {}",
                    det.max_detectable()
                )));
            }
        }
        Ok(ProtocolConfig {
            total_devices,
            sic_degree,
            max_attempts,
            detection,
        })
    }

    pub fn perfect(total_devices: usize, sic_degree: usize, max_attempts: usize) -> Result<Self> {
        Self::new(total_devices, sic_degree, max_attempts, Detection::Perfect)
    }

    pub fn total_devices(&self) -> usize {
        self.total_devices
    }

    pub fn sic_degree(&self) -> usize {
        self.sic_degree
    }

    pub fn max_attempts(&self) -> usize {
        self.max_attempts
    }

    pub fn detection(&self) -> &Detection {
        &self.detection
    }

    pub fn perfect_detection(&self) -> bool {
        matches!(self.detection, Detection::Perfect)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FramePhase {
    Beacon,
    Training,
    DegreeBroadcastOrAbort,
    PowerSelection,
    AckNack,
}

impl FramePhase {
    pub const ALL: [FramePhase; 5] = [
        FramePhase::Beacon,
        FramePhase::Training,
        FramePhase::DegreeBroadcastOrAbort,
        FramePhase::PowerSelection,
        FramePhase::AckNack,
    ];
}

/// How a frame ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameResolution {
    /// No device was active.
    Idle,
    /// Devices were active but the gateway detected none.
    Missed,
    /// Detected count above the SIC degree.
    Aborted,
    /// Distinct power levels within the attempt budget; all packets decoded.
    Acked,
    /// Every attempt collided.
    Nacked,
}

impl FrameResolution {
    pub fn label(self) -> &'static str {
        match self {
            FrameResolution::Idle => "idle",
            FrameResolution::Missed => "missed",
            FrameResolution::Aborted => "aborted",
            FrameResolution::Acked => "ack",
            FrameResolution::Nacked => "nack",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutcome {
    pub true_active: usize,
    /// Gateway estimate. With an estimating detector, `m_max + 1` marks a
    /// terminated (out of range) test.
    pub detected: usize,
    pub aborted: bool,
    pub attempts_used: usize,
    pub delivered: usize,
    pub backoff_issued: bool,
    pub resolution: FrameResolution,
    last_phase: FramePhase,
}

impl FrameOutcome {
    /// Phases visited, in order.
    pub fn phases(&self) -> &'static [FramePhase] {
        let end = FramePhase::ALL.iter().position(|&p| p == self.last_phase).unwrap_or(0);
        &FramePhase::ALL[..=end]
    }
}

/// Gateway state for repeated frames under one configuration.
#[derive(Debug, Clone)]
pub struct Gateway {
    cfg: ProtocolConfig,
    detector: Option<Detector>,
}

impl Gateway {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        let detector = match cfg.detection {
            Detection::Perfect => None,
            Detection::Estimated(det) => Some(Detector::new(det)?),
        };
        Ok(Gateway { cfg, detector })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn run_frame(&self, active: &ActiveSet, rng: &mut RngStream) -> Result<FrameOutcome> {
        let total = self.cfg.total_devices;
        if active.len() > total {
            return Err(Error::TooManyActive {
                active: active.len(),
                total,
            });
        }
        if let Some(&DeviceId(id)) = active.ids().iter().find(|d| d.0 >= total) {
            return Err(Error::UnknownDevice { id, total });
        }

        let n = active.len();
        let m = self.cfg.sic_degree;

        // Beacon, then training.
        let detected = match &self.detector {
            None => n,
            Some(det) => det.detect(&superpose(n, det.config().training(), rng))?.estimated_count,
        };

        let mut outcome = FrameOutcome {
            true_active: n,
            detected,
            aborted: false,
            attempts_used: 0,
            delivered: 0,
            backoff_issued: false,
            resolution: FrameResolution::Idle,
            last_phase: FramePhase::Training,
        };
        if n == 0 {
            return Ok(outcome);
        }
        if detected == 0 {
            outcome.resolution = FrameResolution::Missed;
            return Ok(outcome);
        }

        outcome.last_phase = FramePhase::DegreeBroadcastOrAbort;
        if detected > m {
            outcome.aborted = true;
            outcome.backoff_issued = true;
            outcome.resolution = FrameResolution::Aborted;
            return Ok(outcome);
        }

        outcome.last_phase = FramePhase::PowerSelection;
        let mut success = false;
        for attempt in 1..=self.cfg.max_attempts {
            outcome.attempts_used = attempt;
            if distinct_picks(n, m, rng) {
                success = true;
                break;
            }
        }

        outcome.last_phase = FramePhase::AckNack;
        if success {
            outcome.delivered = n;
            outcome.resolution = FrameResolution::Acked;
        } else {
            outcome.backoff_issued = true;
            outcome.resolution = FrameResolution::Nacked;
        }
        Ok(outcome)
    }
}

/// One joint power-level selection round; true when all picks differ.
fn distinct_picks(devices: usize, levels: usize, rng: &mut RngStream) -> bool {
    let mut taken = 0u64;
    for _ in 0..devices {
        let bit = 1u64 << rng.random_range(0..levels);
        if taken & bit != 0 {
            return false;
        }
        taken |= bit;
    }
    true
}

pub fn run_frame(active: &ActiveSet, cfg: &ProtocolConfig, rng: &mut RngStream) -> Result<FrameOutcome> {
    Gateway::new(*cfg)?.run_frame(active, rng)
}

/// Probability that `devices` uniform picks among `levels` are pairwise
/// distinct: `m! / (m - N)! / m^N`.
pub fn distinct_pick_probability(devices: usize, levels: usize) -> Probability {
    if devices > levels {
        return Probability::ZERO;
    }
    let m = levels as f64;
    let p = (0..devices).map(|i| (levels - i) as f64 / m).product();
    Probability::saturating(p)
}

/// Success probability of one frame with `devices` active under perfect
/// detection: `1 - (1 - p_distinct)^k`, zero above the SIC degree.
pub fn frame_success_probability(devices: usize, cfg: &ProtocolConfig) -> Probability {
    if devices > cfg.sic_degree {
        return Probability::ZERO;
    }
    let miss = distinct_pick_probability(devices, cfg.sic_degree).complement().value();
    Probability::saturating(1.0 - miss.powi(cfg.max_attempts as i32))
}

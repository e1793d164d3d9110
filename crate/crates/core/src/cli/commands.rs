use std::io::Write;

use rayon::prelude::*;

use super::format::sig9;
use super::Settings;
use crate::channel::TrainingConfig;
use crate::detector::{
    analytic_detection_probability, monte_carlo_boundary_probability, monte_carlo_detection_probability,
    DetectorConfig,
};
use crate::protocol::{FrameOutcome, Gateway, ProtocolConfig};
use crate::simulation::{
    draw_active_set, oracle_throughput_aloha, oracle_throughput_noma, sweep, ProtocolKind, SweepBase, SweepGrid,
    ThroughputRecord, TrafficConfig,
};
use crate::stats::{Probability, RngStream};
use crate::{Error, Result};

pub const TRACE_FRAME_LIMIT: u64 = 10_000;

const AMPLITUDE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectCurveRow {
    pub snr_db: f64,
    pub boundary: usize,
    pub analytic_pd: f64,
    /// `P(N_hat = N)` from the full sequential test.
    pub empirical_pd: f64,
    /// `P(T >= gamma'_N | H_N)`, comparable with `analytic_pd`.
    pub empirical_boundary_pd: f64,
    pub trials: u64,
}

/// One row per SNR point per boundary `N = 1 ..= max(sic_degree)`. Row `r`
/// draws from sub-streams `2r` and `2r + 1`.
pub fn detect_curve(s: &Settings) -> Result<Vec<DetectCurveRow>> {
    if s.snr_db.is_empty() {
        return Err(Error::InvalidConfig("SNR grid is empty".into()));
    }
    if s.trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let m = *s
        .sic_degree
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidConfig("SIC degree list is empty".into()))?;
    let pfa = Probability::new(s.pfa)?;
    let cells: Vec<(f64, usize)> = s
        .snr_db
        .iter()
        .flat_map(|&snr| (1..=m).map(move |n| (snr, n)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(r, &(snr_db, n))| {
            let cfg = DetectorConfig::new(pfa, m, TrainingConfig::from_snr_db(s.train_len, snr_db, AMPLITUDE)?)?;
            let r = r as u64;
            let exact = monte_carlo_detection_probability(n, &cfg, s.trials, &mut RngStream::derive(s.seed, 2 * r))?;
            let boundary =
                monte_carlo_boundary_probability(n, &cfg, s.trials, &mut RngStream::derive(s.seed, 2 * r + 1))?;
            Ok(DetectCurveRow {
                snr_db,
                boundary: n,
                analytic_pd: analytic_detection_probability(n, &cfg)?.value(),
                empirical_pd: exact.value(),
                empirical_boundary_pd: boundary.value(),
                trials: s.trials,
            })
        })
        .collect()
}

pub fn write_detect_curve<W: Write>(rows: &[DetectCurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["snr_db", "n", "analytic_pd", "empirical_pd", "empirical_boundary_pd", "trials"])?;
    for r in rows {
        w.write_record([
            sig9(r.snr_db),
            r.boundary.to_string(),
            sig9(r.analytic_pd),
            sig9(r.empirical_pd),
            sig9(r.empirical_boundary_pd),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub record: ThroughputRecord,
    /// `10 log10(noma / aloha)` for the grid point the row belongs to.
    pub gain_db: f64,
    /// Closed-form value; absent for Aloha-NOMA with an estimating detector.
    pub oracle: Option<f64>,
}

fn traffic_of(s: &Settings) -> SweepBase {
    SweepBase {
        total_devices: s.m_devices,
        pfa: s.pfa,
        train_len: s.train_len,
        amplitude: AMPLITUDE,
        perfect_detection: s.perfect_detection,
    }
}

fn grid_of(s: &Settings) -> SweepGrid {
    SweepGrid {
        p_transmit: s.p_transmit.clone(),
        sic_degree: s.sic_degree.clone(),
        attempts: s.attempts.clone(),
        snr_db: s.snr_db.clone(),
    }
}

pub fn throughput(s: &Settings) -> Result<Vec<ThroughputRow>> {
    let base = traffic_of(s);
    let records = sweep(&grid_of(s), &base, s.frames, s.seed)?;
    let mut rows = Vec::with_capacity(records.len());
    for pair in records.chunks(2) {
        let [aloha, noma] = pair else {
            unreachable!("sweep yields records in pairs")
        };
        let gain_db = 10.0 * (noma.mean_throughput / aloha.mean_throughput).log10();
        let p = &noma.params;
        let traffic = TrafficConfig::new(p.total_devices, Probability::new(p.p_transmit)?)?;
        let noma_oracle = if p.perfect_detection {
            let proto = ProtocolConfig::perfect(p.total_devices, p.sic_degree, p.attempts)?;
            Some(oracle_throughput_noma(&traffic, &proto))
        } else {
            None
        };
        rows.push(ThroughputRow {
            record: aloha.clone(),
            gain_db,
            oracle: Some(oracle_throughput_aloha(&traffic)),
        });
        rows.push(ThroughputRow {
            record: noma.clone(),
            gain_db,
            oracle: noma_oracle,
        });
    }
    Ok(rows)
}

pub fn write_throughput<W: Write>(rows: &[ThroughputRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "protocol",
        "p_t",
        "m",
        "k",
        "snr_db",
        "mean_throughput",
        "stderr",
        "abort_rate",
        "nack_rate",
        "idle_rate",
        "gain_db",
        "oracle",
    ])?;
    for row in rows {
        let r = &row.record;
        let p = &r.params;
        w.write_record([
            r.protocol.label().to_string(),
            sig9(p.p_transmit),
            p.sic_degree.to_string(),
            p.attempts.to_string(),
            p.snr_db.map(sig9).unwrap_or_default(),
            sig9(r.mean_throughput),
            sig9(r.stderr),
            sig9(r.abort_rate.value()),
            sig9(r.nack_rate.value()),
            sig9(r.idle_rate.value()),
            sig9(row.gain_db),
            row.oracle.map(sig9).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl ThroughputRow {
    pub fn is(&self, kind: ProtocolKind) -> bool {
        self.record.protocol == kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub frame: u64,
    pub outcome: FrameOutcome,
}

/// Frame-by-frame run at the first value of every list parameter, from
/// sub-stream 0 of the seed.
pub fn frame_trace(s: &Settings) -> Result<Vec<TraceLine>> {
    if s.frames > TRACE_FRAME_LIMIT {
        return Err(Error::TraceTooLong {
            frames: s.frames,
            limit: TRACE_FRAME_LIMIT,
        });
    }
    let grid = SweepGrid {
        p_transmit: s.p_transmit.iter().take(1).copied().collect(),
        sic_degree: s.sic_degree.iter().take(1).copied().collect(),
        attempts: s.attempts.iter().take(1).copied().collect(),
        snr_db: s.snr_db.iter().take(1).copied().collect(),
    };
    let point = grid.points(&traffic_of(s))?.remove(0);
    let gateway = Gateway::new(point.proto)?;
    let mut rng = RngStream::derive(s.seed, 0);
    (0..s.frames)
        .map(|frame| {
            let active = draw_active_set(&point.traffic, &mut rng);
            Ok(TraceLine {
                frame,
                outcome: gateway.run_frame(&active, &mut rng)?,
            })
        })
        .collect()
}

pub fn write_frame_trace<W: Write>(lines: &[TraceLine], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record([
        "frame",
        "n",
        "n_hat",
        "aborted",
        "attempts_used",
        "delivered",
        "backoff",
        "resolution",
    ])?;
    for line in lines {
        let o = &line.outcome;
        w.write_record([
            line.frame.to_string(),
            o.true_active.to_string(),
            o.detected.to_string(),
            o.aborted.to_string(),
            o.attempts_used.to_string(),
            o.delivered.to_string(),
            o.backoff_issued.to_string(),
            o.resolution.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{Command, Overrides, Settings};
    use super::*;

    fn settings(command: Command, o: Overrides) -> Settings {
        Settings::resolve(command, o)
    }

    #[test]
    fn detect_curve_shape() {
        let s = settings(
            Command::DetectCurve,
            Overrides {
                trials: Some(500),
                ..Default::default()
            },
        );
        let rows = detect_curve(&s).unwrap();
        assert_eq!(rows.len(), 31 * 3);
        // P_D >= P_FA for every non-negative separation
        let lowest: Vec<_> = rows.iter().filter(|r| r.snr_db == -10.0).collect();
        assert!(lowest.iter().all(|r| r.analytic_pd >= 0.1));
        let n1: Vec<f64> = rows.iter().filter(|r| r.boundary == 1).map(|r| r.analytic_pd).collect();
        assert!(n1.windows(2).all(|w| w[0] < w[1]), "{n1:?}");
    }

    #[test]
    fn detect_curve_errors() {
        let base = settings(Command::DetectCurve, Overrides::default());
        assert!(detect_curve(&Settings { snr_db: vec![], ..base.clone() }).is_err());
        assert!(detect_curve(&Settings { pfa: 1.0, ..base.clone() }).is_err());
        assert!(detect_curve(&Settings { pfa: 0.0, ..base.clone() }).is_err());
        assert!(detect_curve(&Settings { trials: 0, ..base }).is_err());
    }

    #[test]
    fn throughput_degree_one_has_no_gain() {
        let s = settings(
            Command::Throughput,
            Overrides {
                sic_degree: Some(vec![1]),
                frames: Some(200_000),
                perfect_detection: Some(true),
                ..Default::default()
            },
        );
        let rows = throughput(&s).unwrap();
        let (a, n) = (&rows[0].record, &rows[1].record);
        let combined = (a.stderr.powi(2) + n.stderr.powi(2)).sqrt();
        assert!((n.mean_throughput - a.mean_throughput).abs() <= 3.0 * combined);
        let oracle = rows[1].oracle.unwrap();
        assert!((oracle - rows[0].oracle.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn more_attempts_help_at_degree_five() {
        let s = settings(
            Command::Throughput,
            Overrides {
                sic_degree: Some(vec![5]),
                attempts: Some(vec![3, 5]),
                frames: Some(200_000),
                perfect_detection: Some(true),
                ..Default::default()
            },
        );
        let rows = throughput(&s).unwrap();
        let noma: Vec<_> = rows.iter().filter(|r| r.is(ProtocolKind::AlohaNoma)).collect();
        assert_eq!(noma[0].record.params.attempts, 3);
        assert!(noma[1].record.mean_throughput >= noma[0].record.mean_throughput);
    }

    #[test]
    fn imperfect_rows_have_no_noma_oracle() {
        let s = settings(
            Command::Throughput,
            Overrides {
                frames: Some(1000),
                ..Default::default()
            },
        );
        let rows = throughput(&s).unwrap();
        assert!(rows[0].oracle.is_some());
        assert!(rows[1].oracle.is_none());
        assert_eq!(rows[1].record.params.snr_db.map(|v| v.round()), Some(20.0));
    }

    #[test]
    fn trace_limits_and_modes() {
        let too_long = settings(
            Command::FrameTrace,
            Overrides {
                frames: Some(TRACE_FRAME_LIMIT + 1),
                ..Default::default()
            },
        );
        let err = frame_trace(&too_long).unwrap_err();
        assert!(err.to_string().contains("throughput"), "{err}");

        let idle = settings(
            Command::FrameTrace,
            Overrides {
                p_transmit: Some(vec![0.0]),
                ..Default::default()
            },
        );
        assert!(frame_trace(&idle)
            .unwrap()
            .iter()
            .all(|l| l.outcome.true_active == 0 && l.outcome.delivered == 0));

        let perfect = settings(
            Command::FrameTrace,
            Overrides {
                perfect_detection: Some(true),
                ..Default::default()
            },
        );
        assert!(frame_trace(&perfect)
            .unwrap()
            .iter()
            .all(|l| l.outcome.true_active == l.outcome.detected));
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_throughput(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "protocol,p_t,m,k,snr_db,mean_throughput,stderr,abort_rate,nack_rate,idle_rate,gain_db,oracle\n"
        );
        let mut buf = Vec::new();
        write_detect_curve(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db,n,analytic_pd,empirical_pd,empirical_boundary_pd,trials\n"
        );
    }
}

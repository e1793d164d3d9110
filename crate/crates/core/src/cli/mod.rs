//! Command-line front end.
//!
//! Parameters resolve in order of precedence: command-line flag, the
//! `ALOHA_NOMA_SEED` environment variable (seed only), the `--config` file,
//! built-in defaults.

mod commands;
pub mod config;
pub mod format;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    detect_curve, frame_trace, throughput, write_detect_curve, write_frame_trace, write_throughput,
    DetectCurveRow, ThroughputRow, TraceLine, TRACE_FRAME_LIMIT,
};

use crate::{Error, Result};

pub const SEED_ENV: &str = "ALOHA_NOMA_SEED";

pub const DEFAULT_M_DEVICES: usize = 10;
pub const DEFAULT_P_TRANSMIT: f64 = 0.25;
pub const DEFAULT_SIC_DEGREE: usize = 3;
pub const DEFAULT_ATTEMPTS: usize = 3;
pub const DEFAULT_PFA: f64 = 0.1;
pub const DEFAULT_TRAIN_LEN: usize = 100;
pub const DEFAULT_FRAMES: u64 = 1_000_000;
pub const DEFAULT_TRACE_FRAMES: u64 = 1_000;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 42;
/// Operating point for throughput and trace runs with an estimating detector.
pub const DEFAULT_SNR_DB: f64 = 20.0;

/// Detect-curve default grid: -10 dB to +20 dB in 1 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=30).map(|i| -10.0 + i as f64).collect()
}

#[derive(Debug, Parser)]
#[command(name = "aloha-noma", version, about = "Aloha-NOMA random access Monte-Carlo simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub overrides: Overrides,

    /// Flat key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write output here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Detection probability against SNR, analytic and Monte-Carlo
    DetectCurve,
    /// Throughput sweep of pure Aloha and Aloha-NOMA
    Throughput,
    /// One tab-separated line per simulated frame
    FrameTrace,
}

/// Parameters settable from flags or a config file.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    /// Total number of devices M
    #[arg(long = "m-devices", global = true)]
    pub m_devices: Option<usize>,

    /// Transmit probability p_T (comma separated list)
    #[arg(long, global = true, value_delimiter = ',')]
    pub p_transmit: Option<Vec<f64>>,

    /// SIC degree m (comma separated list)
    #[arg(long, global = true, value_delimiter = ',')]
    pub sic_degree: Option<Vec<usize>>,

    /// Power selection attempts k per frame (comma separated list)
    #[arg(long, global = true, value_delimiter = ',')]
    pub attempts: Option<Vec<usize>>,

    /// Per-boundary false alarm probability
    #[arg(long, global = true)]
    pub pfa: Option<f64>,

    /// Training sequence length L
    #[arg(long, global = true)]
    pub train_len: Option<usize>,

    /// Training word energy to noise ratio in dB (comma separated list)
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_db: Option<Vec<f64>>,

    /// Frames per grid point
    #[arg(long, global = true)]
    pub frames: Option<u64>,

    /// Monte-Carlo trials per detect-curve point
    #[arg(long, global = true)]
    pub trials: Option<u64>,

    /// Master seed (falls back to ALOHA_NOMA_SEED)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Genie-aided active count instead of the training-phase detector
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub perfect_detection: Option<bool>,
}

impl Overrides {
    /// Fields set in `self` win over `base`.
    fn over(self, base: Overrides) -> Overrides {
        Overrides {
            m_devices: self.m_devices.or(base.m_devices),
            p_transmit: self.p_transmit.or(base.p_transmit),
            sic_degree: self.sic_degree.or(base.sic_degree),
            attempts: self.attempts.or(base.attempts),
            pfa: self.pfa.or(base.pfa),
            train_len: self.train_len.or(base.train_len),
            snr_db: self.snr_db.or(base.snr_db),
            frames: self.frames.or(base.frames),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            perfect_detection: self.perfect_detection.or(base.perfect_detection),
        }
    }
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub m_devices: usize,
    pub p_transmit: Vec<f64>,
    pub sic_degree: Vec<usize>,
    pub attempts: Vec<usize>,
    pub pfa: f64,
    pub train_len: usize,
    pub snr_db: Vec<f64>,
    pub frames: u64,
    pub trials: u64,
    pub seed: u64,
    pub perfect_detection: bool,
}

impl Settings {
    pub fn resolve(command: Command, o: Overrides) -> Settings {
        let snr_db = o.snr_db.unwrap_or_else(|| match command {
            Command::DetectCurve => default_snr_grid(),
            Command::Throughput | Command::FrameTrace => vec![DEFAULT_SNR_DB],
        });
        let frames = o.frames.unwrap_or(match command {
            Command::FrameTrace => DEFAULT_TRACE_FRAMES,
            Command::DetectCurve | Command::Throughput => DEFAULT_FRAMES,
        });
        Settings {
            m_devices: o.m_devices.unwrap_or(DEFAULT_M_DEVICES),
            p_transmit: o.p_transmit.unwrap_or_else(|| vec![DEFAULT_P_TRANSMIT]),
            sic_degree: o.sic_degree.unwrap_or_else(|| vec![DEFAULT_SIC_DEGREE]),
            attempts: o.attempts.unwrap_or_else(|| vec![DEFAULT_ATTEMPTS]),
            pfa: o.pfa.unwrap_or(DEFAULT_PFA),
            train_len: o.train_len.unwrap_or(DEFAULT_TRAIN_LEN),
            snr_db,
            frames,
            trials: o.trials.unwrap_or(DEFAULT_TRIALS),
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            perfect_detection: o.perfect_detection.unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub settings: Settings,
}

impl ExperimentSpec {
    /// Merges flags, the seed environment value and the config file.
    pub fn resolve(cli: Cli, env_seed: Option<&str>) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => config::load(path)?,
            None => Overrides::default(),
        };
        let env = Overrides {
            seed: env_seed
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::InvalidConfig(format!("{SEED_ENV}=`{s}`: {e}")))
                })
                .transpose()?,
            ..Overrides::default()
        };
        let merged = cli.overrides.over(env.over(file));
        Ok(ExperimentSpec {
            command: cli.command,
            config: cli.config,
            output: cli.output,
            settings: Settings::resolve(cli.command, merged),
        })
    }

    pub fn with_settings(command: Command, settings: Settings) -> Self {
        ExperimentSpec {
            command,
            config: None,
            output: None,
            settings,
        }
    }

    /// Runs the command, writing to `out`.
    pub fn run_to<W: Write>(&self, out: W) -> Result<()> {
        let s = &self.settings;
        match self.command {
            Command::DetectCurve => write_detect_curve(&detect_curve(s)?, out),
            Command::Throughput => write_throughput(&throughput(s)?, out),
            Command::FrameTrace => write_frame_trace(&frame_trace(s)?, out),
        }
    }

    /// Runs the command, writing to `--output` or stdout.
    pub fn run(&self) -> Result<()> {
        match &self.output {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                self.run_to(&mut w)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = BufWriter::new(stdout.lock());
                self.run_to(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("aloha-noma").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn documented_defaults() {
        let spec = ExperimentSpec::resolve(parse(&["throughput"]), None).unwrap();
        let s = spec.settings;
        assert_eq!(s.m_devices, 10);
        assert_eq!(s.p_transmit, vec![0.25]);
        assert_eq!(s.sic_degree, vec![3]);
        assert_eq!(s.attempts, vec![3]);
        assert_eq!(s.pfa, 0.1);
        assert_eq!(s.train_len, 100);
        assert_eq!(s.frames, 1_000_000);
        assert_eq!(s.seed, 42);
        assert!(!s.perfect_detection);

        let s = ExperimentSpec::resolve(parse(&["detect-curve"]), None).unwrap().settings;
        assert_eq!(s.snr_db.len(), 31);
        assert_eq!(s.snr_db[0], -10.0);
        assert_eq!(s.snr_db[30], 20.0);
    }

    #[test]
    fn list_and_negative_flags() {
        let cli = parse(&["detect-curve", "--snr-db", "-5,0,5", "--p-transmit", "0.1,0.2", "--perfect-detection"]);
        let s = ExperimentSpec::resolve(cli, None).unwrap().settings;
        assert_eq!(s.snr_db, vec![-5.0, 0.0, 5.0]);
        assert_eq!(s.p_transmit, vec![0.1, 0.2]);
        assert!(s.perfect_detection);
        let s = ExperimentSpec::resolve(parse(&["throughput", "--perfect-detection=false"]), None)
            .unwrap()
            .settings;
        assert!(!s.perfect_detection);
    }

    #[test]
    fn precedence_flag_env_file_default() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "seed = 5\nframes = 77\nsic-degree = 2,4").unwrap();
        let path = file.path().to_str().unwrap().to_string();

        let s = ExperimentSpec::resolve(parse(&["throughput", "--config", &path]), None).unwrap().settings;
        assert_eq!((s.seed, s.frames, s.sic_degree.clone()), (5, 77, vec![2, 4]));

        let s = ExperimentSpec::resolve(parse(&["throughput", "--config", &path]), Some("9")).unwrap().settings;
        assert_eq!(s.seed, 9);

        let cli = parse(&["throughput", "--config", &path, "--seed", "11", "--frames", "5"]);
        let s = ExperimentSpec::resolve(cli, Some("9")).unwrap().settings;
        assert_eq!((s.seed, s.frames), (11, 5));

        assert!(ExperimentSpec::resolve(parse(&["throughput"]), Some("x")).is_err());
    }

    #[test]
    fn trace_has_its_own_frame_default() {
        let s = ExperimentSpec::resolve(parse(&["frame-trace"]), None).unwrap().settings;
        assert_eq!(s.frames, DEFAULT_TRACE_FRAMES);
    }
}

//! Sequential Neyman-Pearson estimate of the number of active devices.
//!
//! The statistic is the sample mean of the training observation. Boundary
//! `N` tests `H_N` against `H_{N-1}` with the threshold anchored on the
//! `H_{N-1}` mean,
//!
//! ```text
//! gamma'_N = Q^{-1}(P_FA) * sqrt(sigma^2 / L) + (N - 1) * A * h
//! ```
//!
//! so every boundary has false-alarm probability exactly `P_FA`. Boundaries
//! are tested upward from 1; the estimate is the last one passed. Passing
//! boundary `m_max + 1` terminates the test and reports out of range.

use crate::channel::{superpose, ReceivedTraining, TrainingConfig, CHANNEL_GAIN};
use crate::stats::{q_function, q_inverse, Probability, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    false_alarm: Probability,
    max_detectable: usize,
    training: TrainingConfig,
}

impl DetectorConfig {
    pub fn new(false_alarm: Probability, max_detectable: usize, training: TrainingConfig) -> Result<Self> {
        let p = false_alarm.value();
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::ThresholdUndefined(p));
        }
        if max_detectable == 0 {
            return Err(Error::InvalidConfig("detector ceiling must be at least 1".into()));
        }
        Ok(DetectorConfig {
            false_alarm,
            max_detectable,
            training,
        })
    }

    pub fn false_alarm(&self) -> Probability {
        self.false_alarm
    }

    pub fn max_detectable(&self) -> usize {
        self.max_detectable
    }

    pub fn training(&self) -> &TrainingConfig {
        &self.training
    }

    /// Count reported when the test terminates above the ceiling.
    pub fn out_of_range_count(&self) -> usize {
        self.max_detectable + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub estimated_count: usize,
    pub in_range: bool,
    pub test_statistic: f64,
    /// Thresholds compared against, in test order.
    pub thresholds_used: Vec<f64>,
}

/// Sample mean of the observation.
pub fn test_statistic(obs: &ReceivedTraining) -> Result<f64> {
    let samples = obs.samples();
    if samples.is_empty() {
        return Err(Error::EmptyObservation);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Threshold `gamma'_N` for the boundary test `H_N` vs `H_{N-1}`.
pub fn threshold_for(boundary: usize, cfg: &DetectorConfig) -> Result<f64> {
    let max = cfg.out_of_range_count();
    if boundary == 0 || boundary > max {
        return Err(Error::BoundaryOutOfRange { boundary, max });
    }
    let training = cfg.training();
    let step = training.amplitude() * CHANNEL_GAIN;
    Ok(q_inverse(cfg.false_alarm())? * training.statistic_std() + (boundary - 1) as f64 * step)
}

/// Detector with all `m_max + 1` thresholds precomputed.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    thresholds: Vec<f64>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        let thresholds = (1..=cfg.out_of_range_count())
            .map(|n| threshold_for(n, &cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Detector { cfg, thresholds })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// `gamma'_1 ..= gamma'_{m_max + 1}`.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Estimated count for a given statistic value. Ties go to the higher
    /// hypothesis.
    pub fn classify(&self, statistic: f64) -> usize {
        self.thresholds.iter().take_while(|&&gamma| statistic >= gamma).count()
    }

    pub fn detect(&self, obs: &ReceivedTraining) -> Result<DetectionOutcome> {
        let statistic = test_statistic(obs)?;
        let estimated_count = self.classify(statistic);
        // The failing comparison (if any) is part of the trace.
        let used = (estimated_count + 1).min(self.thresholds.len());
        Ok(DetectionOutcome {
            estimated_count,
            in_range: estimated_count <= self.cfg.max_detectable,
            test_statistic: statistic,
            thresholds_used: self.thresholds[..used].to_vec(),
        })
    }
}

pub fn detect_count(obs: &ReceivedTraining, cfg: &DetectorConfig) -> Result<DetectionOutcome> {
    Detector::new(*cfg)?.detect(obs)
}

/// Probability that boundary test `N` fires when `H_N` holds:
/// `Q(Q^{-1}(P_FA) - A h sqrt(L / sigma^2))`. The mean step between adjacent
/// hypotheses is the same for every `N`.
pub fn analytic_detection_probability(boundary: usize, cfg: &DetectorConfig) -> Result<Probability> {
    if boundary == 0 {
        return Err(Error::BoundaryOutOfRange {
            boundary,
            max: cfg.out_of_range_count(),
        });
    }
    q_function(q_inverse(cfg.false_alarm())? - cfg.training().separation())
}

/// Fraction of fresh `H_N` observations for which the full sequential test
/// returns exactly `true_count`.
pub fn monte_carlo_detection_probability(
    true_count: usize,
    cfg: &DetectorConfig,
    trials: u64,
    rng: &mut RngStream,
) -> Result<Probability> {
    let detector = Detector::new(*cfg)?;
    let mut hits = 0u64;
    for _ in 0..trials {
        let obs = superpose(true_count, cfg.training(), rng);
        if detector.classify(test_statistic(&obs)?) == true_count {
            hits += 1;
        }
    }
    Ok(Probability::from_ratio(hits, trials))
}

/// Fraction of fresh `H_N` observations whose statistic reaches
/// `gamma'_N`; the empirical counterpart of
/// [`analytic_detection_probability`].
pub fn monte_carlo_boundary_probability(
    boundary: usize,
    cfg: &DetectorConfig,
    trials: u64,
    rng: &mut RngStream,
) -> Result<Probability> {
    let gamma = threshold_for(boundary, cfg)?;
    let mut hits = 0u64;
    for _ in 0..trials {
        let obs = superpose(boundary, cfg.training(), rng);
        if test_statistic(&obs)? >= gamma {
            hits += 1;
        }
    }
    Ok(Probability::from_ratio(hits, trials))
}

/// Fraction of noise-only observations detected as one or more devices.
pub fn monte_carlo_false_alarm(cfg: &DetectorConfig, trials: u64, rng: &mut RngStream) -> Result<Probability> {
    let detector = Detector::new(*cfg)?;
    let mut hits = 0u64;
    for _ in 0..trials {
        let obs = superpose(0, cfg.training(), rng);
        if detector.classify(test_statistic(&obs)?) >= 1 {
            hits += 1;
        }
    }
    Ok(Probability::from_ratio(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn cfg(pfa: f64, m_max: usize, l: usize, var: f64) -> DetectorConfig {
        DetectorConfig::new(p(pfa), m_max, TrainingConfig::new(l, var, 1.0).unwrap()).unwrap()
    }

    /// Config with a given hypothesis separation in statistic std units.
    fn with_separation(pfa: f64, m_max: usize, separation: f64) -> DetectorConfig {
        let l = 100;
        let var = l as f64 / (separation * separation);
        cfg(pfa, m_max, l, var)
    }

    fn binomial_se(p: f64, n: u64) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    const Q_INV_TENTH: f64 = 1.281_551_565_5;

    #[test]
    fn statistic_is_sample_mean() {
        let obs = ReceivedTraining::new(vec![1.0; 4], 0).unwrap();
        assert_eq!(test_statistic(&obs).unwrap(), 1.0);
        let obs = ReceivedTraining::new(vec![0.0, 2.0], 0).unwrap();
        assert_eq!(test_statistic(&obs).unwrap(), 1.0);
        let c = TrainingConfig::new(37, 1e-30, 1.0).unwrap();
        let obs = superpose(3, &c, &mut RngStream::new(0));
        assert!((test_statistic(&obs).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn statistic_rejects_empty() {
        let obs = ReceivedTraining::new(vec![], 0).unwrap();
        assert!(matches!(test_statistic(&obs), Err(Error::EmptyObservation)));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_for(1, &cfg(0.5, 3, 10, 4.0)).unwrap(), 0.0);
        let c = cfg(0.1, 3, 100, 1.0);
        assert!((threshold_for(2, &c).unwrap() - (1.0 + Q_INV_TENTH * 0.1)).abs() < 1e-6);
        assert!((threshold_for(3, &c).unwrap() - 2.128_155_16).abs() < 1e-6);
    }

    #[test]
    fn threshold_boundary_range() {
        let c = cfg(0.1, 3, 100, 1.0);
        assert!(threshold_for(0, &c).is_err());
        assert!(threshold_for(4, &c).is_ok());
        assert!(matches!(
            threshold_for(5, &c),
            Err(Error::BoundaryOutOfRange { boundary: 5, max: 4 })
        ));
    }

    #[test]
    fn config_rejects_degenerate_false_alarm() {
        let t = TrainingConfig::new(10, 1.0, 1.0).unwrap();
        assert!(DetectorConfig::new(Probability::ZERO, 3, t).is_err());
        assert!(DetectorConfig::new(Probability::ONE, 3, t).is_err());
        assert!(DetectorConfig::new(p(0.1), 0, t).is_err());
    }

    #[test]
    fn thresholds_strictly_increase() {
        for &pfa in &[1e-6, 0.01, 0.1, 0.5, 0.9] {
            for &var in &[1e-6, 1.0, 100.0] {
                let d = Detector::new(cfg(pfa, 6, 50, var)).unwrap();
                assert!(d.thresholds().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn noiseless_observations() {
        let c = cfg(0.1, 3, 20, 1e-18);
        let exact = |n: f64| ReceivedTraining::new(vec![n; 20], n as usize).unwrap();

        let out = detect_count(&exact(0.0), &c).unwrap();
        assert_eq!(out.estimated_count, 0);
        assert!(out.in_range);
        assert_eq!(out.thresholds_used.len(), 1);

        let out = detect_count(&exact(2.0), &c).unwrap();
        assert_eq!(out.estimated_count, 2);
        assert!(out.in_range);
        assert_eq!(out.thresholds_used.len(), 3);

        let out = detect_count(&exact(5.0), &c).unwrap();
        assert_eq!(out.estimated_count, 4);
        assert!(!out.in_range);
        assert_eq!(out.thresholds_used.len(), 4);
    }

    #[test]
    fn tie_decides_for_higher_hypothesis() {
        let c = cfg(0.1, 3, 100, 1.0);
        let d = Detector::new(c).unwrap();
        let gamma2 = d.thresholds()[1];
        assert_eq!(d.classify(gamma2), 2);
        assert_eq!(d.classify(gamma2 - 1e-12), 1);
    }

    #[test]
    fn analytic_examples() {
        let zero = with_separation(0.1, 3, 1e-12);
        assert!((analytic_detection_probability(1, &zero).unwrap().value() - 0.1).abs() < 1e-9);

        let one = cfg(0.1, 3, 100, 100.0);
        assert!((one.training().separation() - 1.0).abs() < 1e-12);
        let oracle = q_function(Q_INV_TENTH - 1.0).unwrap().value();
        let got = analytic_detection_probability(1, &one).unwrap().value();
        assert!((got - 0.389_14).abs() < 1e-4);
        assert!((got - oracle).abs() < 1e-9);

        let four = with_separation(0.1, 3, 4.0);
        let got = analytic_detection_probability(2, &four).unwrap().value();
        assert!((got - 0.996_72).abs() < 1e-4);
        assert!(analytic_detection_probability(0, &four).is_err());
    }

    #[test]
    fn analytic_increasing_in_separation() {
        // Beyond separation ~8 the value rounds to 1.0 in f64.
        let mut last = 0.0;
        for i in 0..=160 {
            let s = 0.05 * i as f64 + 1e-9;
            let pd = analytic_detection_probability(1, &with_separation(0.1, 3, s)).unwrap().value();
            assert!(pd > last, "not increasing at separation {s}");
            last = pd;
        }
    }

    #[test]
    fn monte_carlo_noise_only() {
        let c = with_separation(0.1, 3, 3.0);
        let pd = monte_carlo_detection_probability(0, &c, 10_000, &mut RngStream::new(11)).unwrap();
        assert!((pd.value() - 0.9).abs() <= 0.02, "{pd}");
    }

    #[test]
    fn monte_carlo_zero_separation() {
        let c = with_separation(0.1, 3, 1e-6);
        let pd = monte_carlo_detection_probability(1, &c, 10_000, &mut RngStream::new(12)).unwrap();
        assert!(pd.value() <= 0.15, "{pd}");
    }

    // At large separation the only remaining error is the next boundary's
    // false alarm, so P(N_hat = N) tends to 1 - P_FA rather than 1.
    #[test]
    fn monte_carlo_high_separation_limit() {
        let trials = 10_000;
        let c = with_separation(0.1, 3, 8.0);
        let pd = monte_carlo_detection_probability(1, &c, trials, &mut RngStream::new(13)).unwrap();
        let limit = 0.9 - q_function(8.0 - Q_INV_TENTH).unwrap().value();
        assert!((pd.value() - limit).abs() <= 3.0 * binomial_se(limit, trials), "{pd}");

        let strict = with_separation(1e-4, 3, 8.0);
        let pd = monte_carlo_detection_probability(1, &strict, trials, &mut RngStream::new(13)).unwrap();
        assert!(pd.value() >= 0.99, "{pd}");
    }

    #[test]
    fn exact_count_limit_for_every_count() {
        let trials = 20_000;
        for n in 0..=3 {
            let c = with_separation(0.1, 3, 12.0);
            let pd = monte_carlo_detection_probability(n, &c, trials, &mut RngStream::derive(14, n as u64))
                .unwrap()
                .value();
            assert!((pd - 0.9).abs() <= 3.0 * binomial_se(0.9, trials), "N = {n}: {pd}");
        }
    }

    #[test]
    fn false_alarm_rate_matches_target() {
        let trials = 100_000;
        let c = with_separation(0.1, 3, 2.0);
        let fa = monte_carlo_false_alarm(&c, trials, &mut RngStream::new(15)).unwrap().value();
        assert!((fa - 0.1).abs() <= 3.0 * binomial_se(0.1, trials), "{fa}");
    }
}

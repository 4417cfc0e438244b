use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::update::InnovationRecord;
use crate::error::{Error, Result};

/// Upper chi-square quantile: the `p` quantile with `dof` degrees of freedom.
pub fn chi_square_quantile(p: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("degrees of freedom are positive")
        .inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Number of innovation records summed per test.
    pub window: usize,
    /// False-alarm probability per test.
    pub alpha: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 10,
            alpha: 0.01,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("detector.window", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("detector.alpha", format!("{} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// Sliding-window NIS test. Each pushed record is tested against the
/// chi-square `(1 - alpha)` quantile for the summed degrees of freedom of
/// the last `window` records (fewer at start-up).
#[derive(Debug, Clone)]
pub struct SpoofDetector {
    cfg: DetectorConfig,
    recent: VecDeque<InnovationRecord>,
    thresholds: BTreeMap<usize, f64>,
}

impl SpoofDetector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            recent: VecDeque::with_capacity(cfg.window),
            thresholds: BTreeMap::new(),
        })
    }

    pub fn threshold(&mut self, dof: usize) -> f64 {
        let p = 1.0 - self.cfg.alpha;
        *self.thresholds.entry(dof).or_insert_with(|| chi_square_quantile(p, dof))
    }

    /// Adds a record and returns it with `flagged` set by the windowed test.
    pub fn push(&mut self, mut record: InnovationRecord) -> InnovationRecord {
        if self.recent.len() == self.cfg.window {
            self.recent.pop_front();
        }
        self.recent.push_back(record);
        let dof: usize = self.recent.iter().map(|r| r.dof).sum();
        let nis: f64 = self.recent.iter().map(|r| r.nis).sum();
        record.flagged = dof > 0 && nis > self.threshold(dof);
        if let Some(last) = self.recent.back_mut() {
            last.flagged = record.flagged;
        }
        record
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub flagged: bool,
    pub first_flag_epoch: Option<f64>,
}

/// Runs the windowed NIS test over a history of records.
pub fn spoof_detect(history: &[InnovationRecord], window: usize, alpha: f64) -> Result<Detection> {
    let mut det = SpoofDetector::new(DetectorConfig { window, alpha })?;
    let first = history
        .iter()
        .map(|r| det.push(*r))
        .find(|r| r.flagged)
        .map(|r| r.epoch);
    Ok(Detection {
        flagged: first.is_some(),
        first_flag_epoch: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quiet_history_never_flags() {
        let history: Vec<_> = (0..100).map(|k| InnovationRecord::new(k as f64, 0.0, 4)).collect();
        let d = spoof_detect(&history, 10, 0.01).unwrap();
        assert!(!d.flagged && d.first_flag_epoch.is_none());
    }

    #[test]
    fn quantile_matches_table() {
        // standard chi-square tables: 95% with 4 dof is 9.488
        assert!((chi_square_quantile(0.95, 4) - 9.488).abs() < 0.01);
        assert!((chi_square_quantile(0.99, 1) - 6.635).abs() < 0.01);
    }

    #[test]
    fn jump_is_flagged_at_its_epoch() {
        let mut history: Vec<_> = (0..30).map(|k| InnovationRecord::new(k as f64, 1.0, 1)).collect();
        history[20].nis = 50.0;
        let d = spoof_detect(&history, 5, 0.01).unwrap();
        assert_eq!(d.first_flag_epoch, Some(20.0));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(spoof_detect(&[], 0, 0.01).is_err());
        assert!(spoof_detect(&[], 3, 1.0).is_err());
    }
}

//! Calibrated prediction rules for pretrained and split conformal prediction.
//!
//! A rule stores `(score, threshold, context)`. The prediction set at a new
//! covariate is `{y : s((x, y); context) ≤ threshold}`, which is only inverted
//! to an explicit interval for residual scores.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::DataPoint;
use crate::quantile::{conformal_level, quantile_in_place};
use crate::scoring::{jitter, score_series_into, Context, ScoreFunction, TrainingAlgorithm};

/// How the score function was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Pretrained,
    /// First `n0` points train the score, the rest calibrate.
    Split {
        n0: usize,
    },
}

impl Mode {
    /// Split with `n0 = ⌊n/2⌋`.
    pub fn default_split(n: usize) -> Self {
        Mode::Split { n0: n / 2 }
    }
}

/// A calibrated conformal predictor.
#[derive(Clone)]
pub struct PredictionRule {
    pub score_fn: Arc<dyn ScoreFunction>,
    /// `quantile(calibration scores, level)`, possibly `±∞`.
    pub threshold: f64,
    /// `Z_{n−L+1}, …, Z_n` in time order.
    pub context: Vec<DataPoint>,
    pub alpha: f64,
    pub mode: Mode,
    /// Number of calibration scores (`n − L` or `n1 − L`).
    pub m_cal: usize,
    pub level: f64,
    /// Salt of the tie-breaking jitter, if scores were jittered.
    pub jitter_salt: Option<u64>,
    /// Time index of the test point, `n + 1`.
    pub test_index: usize,
}

impl fmt::Debug for PredictionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictionRule")
            .field("score_fn", &self.score_fn)
            .field("threshold", &self.threshold)
            .field("alpha", &self.alpha)
            .field("mode", &self.mode)
            .field("m_cal", &self.m_cal)
            .field("level", &self.level)
            .finish_non_exhaustive()
    }
}

impl PredictionRule {
    pub fn memory(&self) -> usize {
        self.score_fn.memory()
    }

    /// `S_{n+1}` for a candidate test point, jittered like the calibration scores.
    pub fn test_score(&self, z: &DataPoint) -> f64 {
        let raw = self
            .score_fn
            .eval(z, Context::from_chronological(&self.context));
        match self.jitter_salt {
            Some(salt) => raw + jitter(salt, self.test_index),
            None => raw,
        }
    }
}

/// Result of checking one test point against a rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageOutcome {
    pub covered: bool,
    pub test_score: f64,
    pub threshold: f64,
}

/// `[lower, upper]`; empty when `lower > upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Calibrate a pretrained score on `Z_1, …, Z_n`.
pub fn calibrate_pretrained(
    score_fn: Arc<dyn ScoreFunction>,
    history: &[DataPoint],
    alpha: f64,
) -> Result<PredictionRule> {
    calibrate_pretrained_with(score_fn, history, alpha, None, &mut Vec::new())
}

/// [`calibrate_pretrained`] with optional jitter and a reusable score buffer.
pub fn calibrate_pretrained_with(
    score_fn: Arc<dyn ScoreFunction>,
    history: &[DataPoint],
    alpha: f64,
    jitter_salt: Option<u64>,
    scratch: &mut Vec<f64>,
) -> Result<PredictionRule> {
    check_alpha(alpha)?;
    let n = history.len();
    let memory = score_fn.memory();
    if n <= memory {
        return Err(Error::NoCalibrationScores { n, memory });
    }
    finish(
        score_fn,
        history,
        memory + 1,
        alpha,
        Mode::Pretrained,
        jitter_salt,
        scratch,
    )
}

/// Fit a score on `Z_1, …, Z_{n0}` and calibrate on the remaining history.
pub fn calibrate_split(
    algorithm: &dyn TrainingAlgorithm,
    history: &[DataPoint],
    n0: usize,
    alpha: f64,
) -> Result<PredictionRule> {
    calibrate_split_with(algorithm, history, n0, alpha, None, &mut Vec::new())
}

/// [`calibrate_split`] with optional jitter and a reusable score buffer.
pub fn calibrate_split_with(
    algorithm: &dyn TrainingAlgorithm,
    history: &[DataPoint],
    n0: usize,
    alpha: f64,
    jitter_salt: Option<u64>,
    scratch: &mut Vec<f64>,
) -> Result<PredictionRule> {
    check_alpha(alpha)?;
    let n = history.len();
    if n0 == 0 || n0 >= n {
        return Err(invalid(format!(
            "split point n0 = {n0} must satisfy 1 <= n0 < n = {n}"
        )));
    }
    let n1 = n - n0;
    let memory = algorithm.memory();
    if n1 <= memory {
        return Err(Error::CalibrationBlockTooShort {
            n1,
            needed: memory + 1,
        });
    }
    let score_fn = algorithm.fit(&history[..n0])?;
    finish(
        score_fn,
        history,
        n0 + memory + 1,
        alpha,
        Mode::Split { n0 },
        jitter_salt,
        scratch,
    )
}

fn finish(
    score_fn: Arc<dyn ScoreFunction>,
    history: &[DataPoint],
    from_index: usize,
    alpha: f64,
    mode: Mode,
    jitter_salt: Option<u64>,
    scores: &mut Vec<f64>,
) -> Result<PredictionRule> {
    let n = history.len();
    let memory = score_fn.memory();
    score_series_into(score_fn.as_ref(), history, from_index, scores)?;
    if let Some((position, &value)) = scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteScore { position, value });
    }
    if let Some(salt) = jitter_salt {
        for (offset, s) in scores.iter_mut().enumerate() {
            *s += jitter(salt, from_index + offset);
        }
    }
    let m_cal = scores.len();
    let level = conformal_level(alpha, m_cal)?;
    let threshold = quantile_in_place(scores, level);
    Ok(PredictionRule {
        score_fn,
        threshold,
        context: history[n - memory..].to_vec(),
        alpha,
        mode,
        m_cal,
        level,
        jitter_salt,
        test_index: n + 1,
    })
}

/// Whether `test_point` falls in the rule's prediction set.
pub fn evaluate_coverage(rule: &PredictionRule, test_point: &DataPoint) -> CoverageOutcome {
    let test_score = rule.test_score(test_point);
    CoverageOutcome {
        covered: test_score <= rule.threshold,
        test_score,
        threshold: rule.threshold,
    }
}

/// Explicit interval `f̂(x; context) ± q` for residual scores.
pub fn interval_from_rule(rule: &PredictionRule, x: f64) -> Result<PredictionInterval> {
    let center = rule
        .score_fn
        .point_prediction(x, Context::from_chronological(&rule.context))
        .ok_or(Error::IntervalUnavailable)?;
    let q = rule.threshold;
    if q == f64::INFINITY {
        return Ok(PredictionInterval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
    }
    if q == f64::NEG_INFINITY || q < 0.0 {
        return Ok(PredictionInterval {
            lower: f64::INFINITY,
            upper: f64::NEG_INFINITY,
        });
    }
    Ok(PredictionInterval {
        lower: center - q,
        upper: center + q,
    })
}

//! Exact coverage on finite processes by summing the joint law over every
//! sequence.
//!
//! With jitter on, ties between the test score and calibration scores are
//! broken uniformly at random, which is what a random jitter salt does; the
//! coverage of a sequence is then the fraction of tie orders that cover.

use serde::{Deserialize, Serialize};

use crate::conformal::Mode;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ScoreKind};
use crate::process::{DataPoint, FiniteDistribution};
use crate::quantile::{conformal_level, order_statistic_rank};
use crate::scoring::{score_series_into, Context, ScoreFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactCoverage {
    pub coverage: f64,
    pub support_size: usize,
    pub config: ExperimentConfig,
    pub mode: Mode,
}

/// Probability of coverage given the calibration scores and test score, when
/// ties are broken uniformly at random (`jitter`) or kept (`!jitter`).
pub fn coverage_given_scores(calibration: &[f64], test: f64, level: f64, jitter: bool) -> f64 {
    let m = calibration.len();
    let rank = match order_statistic_rank(level, m) {
        None => return 0.0,
        Some(r) if r > m => return 1.0,
        Some(r) => r,
    };
    let below = calibration.iter().filter(|&&s| s < test).count();
    let tied = calibration.iter().filter(|&&s| s == test).count();
    if !jitter {
        // covered iff the rank-th order statistic is ≥ test
        return f64::from(u8::from(below < rank));
    }
    // the test score lands after r of its ties, r uniform on 0..=tied
    let good = (0..=tied).filter(|r| below + r < rank).count();
    good as f64 / (tied + 1) as f64
}

/// Coverage of one realised sequence `Z_1..Z_{n+1}`.
pub fn sequence_coverage(
    score: &ScoreKind,
    mode: Mode,
    alpha: f64,
    jitter: bool,
    points: &[DataPoint],
    buf: &mut Vec<f64>,
) -> Result<f64> {
    let n = points.len() - 1;
    let (fitted, from): (std::sync::Arc<dyn ScoreFunction>, usize) = match (score, mode) {
        (ScoreKind::Pretrained(s), _) => (s.clone(), s.memory() + 1),
        (ScoreKind::Trained(a), Mode::Split { n0 }) => (a.fit(&points[..n0])?, n0 + a.memory() + 1),
        (ScoreKind::Trained(_), Mode::Pretrained) => {
            return Err(Error::Config(
                "pretrained mode needs an untrained score".into(),
            ))
        }
    };
    let memory = fitted.memory();
    score_series_into(fitted.as_ref(), &points[..n], from, buf)?;
    let test = fitted.eval(
        &points[n],
        Context::from_chronological(&points[n - memory..n]),
    );
    let level = conformal_level(alpha, buf.len())?;
    Ok(coverage_given_scores(buf, test, level, jitter))
}

/// Exact coverage of `cfg` (trials and seed are ignored).
pub fn run_exact_coverage(cfg: &ExperimentConfig) -> Result<ExactCoverage> {
    cfg.validate()?;
    let process = cfg.build_process()?;
    let joint = process.joint_pmf(cfg.n + 1)?;
    let score = cfg.build_score(&process)?;
    let mode = cfg.resolved_mode();
    let atoms: Option<Vec<DataPoint>> = match &process {
        crate::harness::config::Process::Cyclic(c) => Some(c.atoms()),
        _ => None,
    };
    let (coverage, support_size) = exact_coverage_of(
        &joint,
        &score,
        mode,
        cfg.alpha,
        cfg.jitter,
        |a| match &atoms {
            Some(list) => list[a],
            None => DataPoint::state(a),
        },
    )?;
    Ok(ExactCoverage {
        coverage,
        support_size,
        config: cfg.clone(),
        mode,
    })
}

/// `Σ_z P(z) · P(covered | z)` over the support of `joint`.
pub fn exact_coverage_of(
    joint: &FiniteDistribution,
    score: &ScoreKind,
    mode: Mode,
    alpha: f64,
    jitter: bool,
    embed: impl Fn(usize) -> DataPoint,
) -> Result<(f64, usize)> {
    let mut points = Vec::with_capacity(joint.len());
    let mut buf = Vec::new();
    let mut total = 0.0;
    let mut support = 0;
    let mut err = None;
    joint.for_each_support(|seq, p| {
        if err.is_some() {
            return;
        }
        points.clear();
        points.extend(seq.iter().map(|&a| embed(a)));
        match sequence_coverage(score, mode, alpha, jitter, &points, &mut buf) {
            Ok(c) => {
                total += p * c;
                support += 1;
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok((total.min(1.0), support)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ProcessSpec, ScoreSpec};

    fn markov(
        transition: Vec<Vec<f64>>,
        initial: Option<Vec<f64>>,
        n: usize,
        alpha: f64,
    ) -> ExperimentConfig {
        ExperimentConfig {
            process: ProcessSpec::Markov {
                transition,
                initial,
            },
            score: ScoreSpec::State,
            mode: None,
            n,
            alpha,
            trials: 1,
            seed: 0,
            jitter: true,
        }
    }

    #[test]
    fn tie_break_probabilities() {
        // m = 3, level 1 → rank 3
        assert_eq!(
            coverage_given_scores(&[1.0, 1.0, 1.0], 1.0, 1.0, true),
            0.75
        );
        assert_eq!(
            coverage_given_scores(&[1.0, 1.0, 1.0], 1.0, 1.0, false),
            1.0
        );
        assert_eq!(
            coverage_given_scores(&[0.0, 2.0, 3.0], 1.0, 0.33, true),
            0.0
        );
        assert_eq!(
            coverage_given_scores(&[0.0, 2.0, 3.0], 1.0, 0.67, true),
            1.0
        );
        assert_eq!(coverage_given_scores(&[0.0], 9.0, 1.5, true), 1.0);
        assert_eq!(coverage_given_scores(&[0.0], -9.0, 0.0, true), 0.0);
    }

    #[test]
    fn iid_injective_score_is_exactly_nominal() {
        // (1 − α)(n + 1) = 3 and ties broken at random: exchangeability gives 0.75 exactly
        let cfg = markov(vec![vec![0.5, 0.5], vec![0.5, 0.5]], None, 3, 0.25);
        let exact = run_exact_coverage(&cfg).unwrap();
        assert!((exact.coverage - 0.75).abs() < 1e-12);
        assert_eq!(exact.support_size, 16);
    }

    #[test]
    fn deterministic_chain() {
        // identity transitions started at state 1: every score equals 1
        let mut cfg = markov(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![0.0, 1.0]),
            4,
            0.3,
        );
        cfg.jitter = false;
        assert_eq!(run_exact_coverage(&cfg).unwrap().coverage, 1.0);
        // with random tie breaks the test lands uniformly among 5 equal scores; rank ⌈0.7·5/4·4⌉ = 4
        cfg.jitter = true;
        assert!((run_exact_coverage(&cfg).unwrap().coverage - 0.8).abs() < 1e-12);
    }

    #[test]
    fn forced_infinite_threshold() {
        let cfg = markov(vec![vec![0.9, 0.1], vec![0.2, 0.8]], None, 2, 0.1);
        assert_eq!(run_exact_coverage(&cfg).unwrap().coverage, 1.0);
    }

    #[test]
    fn continuous_process_rejected() {
        let cfg = ExperimentConfig {
            process: ProcessSpec::Ma {
                order: 0,
                regression: Default::default(),
                covariate: Default::default(),
            },
            score: ScoreSpec::Residual { regression: None },
            mode: None,
            n: 3,
            alpha: 0.1,
            trials: 1,
            seed: 0,
            jitter: false,
        };
        assert!(run_exact_coverage(&cfg).is_err());
    }
}

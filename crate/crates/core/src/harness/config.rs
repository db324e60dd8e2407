//! Experiment configuration and the process/score objects it builds.

use std::path::Path;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::conformal::Mode;
use crate::error::{Error, Result};
use crate::process::{
    CovariateLaw, CyclicMixture, DataPoint, FiniteDistribution, FiniteMarkov, FiniteProcess,
    MaProcess, Provenance, RegressionFn,
};
use crate::scoring::{
    lag_mean_residual_score, state_value_score, LeastSquaresAr, ModeMatch, RankScore,
    ResidualScore, ScoreFunction, TrainingAlgorithm,
};

/// Data-generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Ma {
        order: usize,
        #[serde(default)]
        regression: RegressionFn,
        #[serde(default)]
        covariate: CovariateLaw,
    },
    Cyclic {
        k: usize,
        b: f64,
    },
    /// Started from `initial`, or from the stationary law when omitted.
    Markov {
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        initial: Option<Vec<f64>>,
    },
}

/// Score function (pretrained) or training algorithm (split).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreSpec {
    /// `|y − f(x)|`; defaults to the process's own regression function.
    Residual {
        #[serde(default)]
        regression: Option<RegressionFn>,
    },
    /// Rank of the atom; cyclic processes only.
    Rank,
    /// `s(z) = y`.
    State,
    /// `|y − mean(y_{−1}, …, y_{−L})|`.
    LagMean { memory: usize },
    /// Least-squares AR fit on the training block.
    LeastSquaresAr { memory: usize },
    /// Mode of the training block plus lag mismatches.
    ModeMatch { memory: usize },
}

impl ScoreSpec {
    pub fn memory(&self) -> usize {
        match *self {
            Self::Residual { .. } | Self::Rank | Self::State => 0,
            Self::LagMean { memory }
            | Self::LeastSquaresAr { memory }
            | Self::ModeMatch { memory } => memory,
        }
    }

    pub fn is_trained(&self) -> bool {
        matches!(self, Self::LeastSquaresAr { .. } | Self::ModeMatch { .. })
    }
}

fn default_alpha() -> f64 {
    0.1
}

fn default_trials() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub score: ScoreSpec,
    /// Omitted means pretrained for untrained scores and `n0 = ⌊n/2⌋` otherwise.
    #[serde(default)]
    pub mode: Option<Mode>,
    pub n: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jitter: bool,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolved_mode(&self) -> Mode {
        self.mode.unwrap_or(if self.score.is_trained() {
            Mode::default_split(self.n)
        } else {
            Mode::Pretrained
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        let memory = self.score.memory();
        match self.resolved_mode() {
            Mode::Pretrained => {
                if self.score.is_trained() {
                    return bad("pretrained mode needs an untrained score".into());
                }
                if self.n <= memory {
                    return bad(format!(
                        "n = {} leaves no calibration scores for memory {memory}",
                        self.n
                    ));
                }
            }
            Mode::Split { n0 } => {
                if !self.score.is_trained() {
                    return bad("split mode needs a training algorithm".into());
                }
                if n0 == 0 || n0 >= self.n {
                    return bad(format!(
                        "split point n0 = {n0} must satisfy 1 <= n0 < n = {}",
                        self.n
                    ));
                }
                if self.n - n0 <= memory {
                    return bad(format!(
                        "calibration block of {} points is too short for memory {memory}",
                        self.n - n0
                    ));
                }
            }
        }
        match (&self.process, &self.score) {
            (ProcessSpec::Cyclic { .. }, _) => {}
            (_, ScoreSpec::Rank) => return bad("rank score needs a cyclic process".into()),
            _ => {}
        }
        if let (ProcessSpec::Ma { .. }, ScoreSpec::ModeMatch { .. }) = (&self.process, &self.score)
        {
            return bad("mode_match needs a finite process".into());
        }
        self.build_process()?;
        Ok(())
    }

    pub fn build_process(&self) -> Result<Process> {
        Process::from_spec(&self.process)
    }

    pub fn build_score(&self, process: &Process) -> Result<ScoreKind> {
        let memory = self.score.memory();
        Ok(match &self.score {
            ScoreSpec::Residual { regression } => {
                let f = regression.unwrap_or(match process {
                    Process::Ma(p) => p.regression,
                    _ => RegressionFn::Zero,
                });
                ScoreKind::Pretrained(Arc::new(ResidualScore::new(f)))
            }
            ScoreSpec::Rank => match process {
                Process::Cyclic(c) => ScoreKind::Pretrained(Arc::new(RankScore::new(&c.atoms())?)),
                _ => return Err(Error::Config("rank score needs a cyclic process".into())),
            },
            ScoreSpec::State => ScoreKind::Pretrained(Arc::new(state_value_score())),
            ScoreSpec::LagMean { .. } => {
                ScoreKind::Pretrained(Arc::new(lag_mean_residual_score(memory)))
            }
            ScoreSpec::LeastSquaresAr { .. } => {
                ScoreKind::Trained(Arc::new(LeastSquaresAr::new(memory)))
            }
            ScoreSpec::ModeMatch { .. } => ScoreKind::Trained(Arc::new(ModeMatch::new(memory))),
        })
    }
}

/// Built score: a fixed function or a training algorithm.
#[derive(Clone, Debug)]
pub enum ScoreKind {
    Pretrained(Arc<dyn ScoreFunction>),
    Trained(Arc<dyn TrainingAlgorithm>),
}

/// A process ready for sampling.
#[derive(Clone, Debug)]
pub enum Process {
    Ma(MaProcess),
    Cyclic(CyclicMixture),
    Markov(FiniteMarkov),
}

impl Process {
    pub fn from_spec(spec: &ProcessSpec) -> Result<Self> {
        Ok(match spec {
            ProcessSpec::Ma {
                order,
                regression,
                covariate,
            } => {
                let p = MaProcess {
                    order: *order,
                    regression: *regression,
                    covariate: *covariate,
                };
                p.validate()?;
                Process::Ma(p)
            }
            ProcessSpec::Cyclic { k, b } => Process::Cyclic(CyclicMixture::new(*k, *b)?),
            ProcessSpec::Markov {
                transition,
                initial,
            } => Process::Markov(match initial {
                Some(init) => FiniteMarkov::new(transition.clone(), init.clone())?,
                None => FiniteMarkov::stationary(transition.clone())?,
            }),
        })
    }

    /// Writes `Z_1, …, Z_{n+1}` into `out`; `states` and `noise` are scratch.
    pub fn sample_into(
        &self,
        n: usize,
        rng: &mut dyn RngCore,
        out: &mut Vec<DataPoint>,
        scratch: &mut Scratch,
    ) {
        match self {
            Process::Ma(p) => p.sample_into(n, rng, out, &mut scratch.noise),
            Process::Cyclic(c) => {
                c.sample_states(n + 1, rng, &mut scratch.states);
                out.clear();
                out.extend(scratch.states.iter().map(|&j| c.atom(j)));
            }
            Process::Markov(m) => {
                m.sample_states(n + 1, rng, &mut scratch.states);
                out.clear();
                out.extend(scratch.states.iter().map(|&a| DataPoint::state(a)));
            }
        }
    }

    pub fn as_finite(&self) -> Option<&dyn FiniteProcess> {
        match self {
            Process::Ma(_) => None,
            Process::Cyclic(c) => Some(c),
            Process::Markov(m) => Some(m),
        }
    }

    /// Exact joint law of `Z_1, …, Z_len` for finite processes.
    pub fn joint_pmf(&self, len: usize) -> Result<FiniteDistribution> {
        self.as_finite()
            .ok_or_else(|| Error::Config("exact enumeration needs a finite process".into()))?
            .joint_pmf(len)
    }

    /// `β(τ)` for `τ = 0..=max_lag` with provenance, when one is available
    /// without enumeration.
    pub fn analytic_beta(&self, max_lag: usize) -> Option<Vec<(f64, Provenance)>> {
        match self {
            Process::Ma(p) => Some(p.beta_table(max_lag)),
            Process::Cyclic(c) => Some(vec![
                (c.beta_upper_bound(), Provenance::UpperBound);
                max_lag + 1
            ]),
            Process::Markov(_) => None,
        }
    }
}

/// Per-worker buffers reused across trials.
#[derive(Debug, Default)]
pub struct Scratch {
    pub noise: Vec<f64>,
    pub states: Vec<usize>,
    pub scores: Vec<f64>,
    pub points: Vec<DataPoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_json() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"process": {"kind": "ma", "order": 2}, "score": {"kind": "residual"}, "n": 50}"#,
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.resolved_mode(), Mode::Pretrained);
        cfg.validate().unwrap();
        let split: ExperimentConfig = serde_json::from_str(
            r#"{"process": {"kind": "ma", "order": 0}, "score": {"kind": "least_squares_ar", "memory": 1},
                "n": 40, "trials": 5}"#,
        )
        .unwrap();
        assert_eq!(split.resolved_mode(), Mode::Split { n0: 20 });
        split.validate().unwrap();
    }

    #[test]
    fn incompatible_combinations_rejected() {
        let base = ExperimentConfig {
            process: ProcessSpec::Ma {
                order: 1,
                regression: RegressionFn::Zero,
                covariate: CovariateLaw::default(),
            },
            score: ScoreSpec::Rank,
            mode: None,
            n: 10,
            alpha: 0.1,
            trials: 1,
            seed: 0,
            jitter: false,
        };
        assert!(base.validate().is_err());
        let mut cfg = base.clone();
        cfg.score = ScoreSpec::Residual { regression: None };
        cfg.mode = Some(Mode::Split { n0: 5 });
        assert!(cfg.validate().is_err());
        cfg.mode = None;
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.1;
        cfg.validate().unwrap();
    }
}

//! Seeded, parallel Monte Carlo coverage estimation.
//!
//! Trial `i` draws from the ChaCha8 stream `i` keyed by the master seed, so
//! results depend only on `(seed, trials)` and never on the worker count.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundResult, Direction};
use crate::conformal::{calibrate_pretrained_with, calibrate_split_with, evaluate_coverage, Mode};
use crate::dependence::beta_mixing;
use crate::error::Result;
use crate::harness::config::{
    ExperimentConfig, Process, ProcessSpec, ScoreKind, ScoreSpec, Scratch,
};
use crate::process::{checked_cells, Provenance};

/// Width of the pre-registered tolerance band, in standard errors.
pub const SIGMA_BAND: f64 = 3.0;

const BATCH: u64 = 2048;

/// Key shared by every trial stream of one experiment.
pub fn master_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// Generator for trial `trial`.
pub fn trial_rng(key: &[u8; 32], trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(trial);
    rng
}

/// `sqrt(p(1 − p)/N)`.
pub fn standard_error(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Coverage of one bound at the `SIGMA_BAND` tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub name: String,
    pub direction: Direction,
    pub value: f64,
    pub satisfied: bool,
}

impl BoundComparison {
    pub fn new(name: &str, direction: Direction, value: f64, coverage: f64, stderr: f64) -> Self {
        Self {
            name: name.to_owned(),
            direction,
            value,
            satisfied: satisfies(direction, value, coverage, stderr),
        }
    }

    pub fn from_bound(b: &BoundResult, coverage: f64, stderr: f64) -> Self {
        Self::new(&b.name, b.direction, b.value, coverage, stderr)
    }
}

/// `coverage ≥ value − 3σ` for lower bounds, `coverage ≤ value + 3σ` for upper.
pub fn satisfies(direction: Direction, value: f64, coverage: f64, stderr: f64) -> bool {
    match direction {
        Direction::Lower => coverage >= value - SIGMA_BAND * stderr,
        Direction::Upper => coverage <= value + SIGMA_BAND * stderr,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub empirical_coverage: f64,
    pub covered: u64,
    pub trials: u64,
    pub standard_error: f64,
    pub config: ExperimentConfig,
    pub mode: Mode,
    pub bounds: Vec<BoundComparison>,
    pub wall_time_secs: f64,
}

/// Everything a trial needs, built once per experiment.
#[derive(Clone, Debug)]
pub struct TrialSetup {
    pub process: Process,
    pub score: ScoreKind,
    pub mode: Mode,
    pub n: usize,
    pub alpha: f64,
    pub jitter: bool,
}

impl TrialSetup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let process = cfg.build_process()?;
        let score = cfg.build_score(&process)?;
        Ok(Self {
            process,
            score,
            mode: cfg.resolved_mode(),
            n: cfg.n,
            alpha: cfg.alpha,
            jitter: cfg.jitter,
        })
    }

    /// Draws `Z_1..Z_{n+1}`, calibrates on the first `n` and tests the last.
    pub fn run_trial(&self, rng: &mut dyn RngCore, scratch: &mut Scratch) -> Result<bool> {
        let mut points = std::mem::take(&mut scratch.points);
        self.process.sample_into(self.n, rng, &mut points, scratch);
        let salt = self.jitter.then(|| rng.next_u64());
        let history = &points[..self.n];
        let rule = match (&self.score, self.mode) {
            (ScoreKind::Pretrained(s), _) => {
                calibrate_pretrained_with(s.clone(), history, self.alpha, salt, &mut scratch.scores)
            }
            (ScoreKind::Trained(a), Mode::Split { n0 }) => calibrate_split_with(
                a.as_ref(),
                history,
                n0,
                self.alpha,
                salt,
                &mut scratch.scores,
            ),
            (ScoreKind::Trained(_), Mode::Pretrained) => {
                unreachable!("config validation pairs trained scores with split mode")
            }
        };
        let covered = rule.map(|r| evaluate_coverage(&r, &points[self.n]).covered);
        scratch.points = points;
        covered
    }

    /// Number of covered trials among `0..trials`.
    pub fn count_covered(&self, seed: u64, trials: u64) -> Result<u64> {
        let key = master_key(seed);
        let batches = trials.div_ceil(BATCH);
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut scratch = Scratch::default();
                let mut covered = 0u64;
                for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                    let mut rng = trial_rng(&key, trial);
                    covered += u64::from(self.run_trial(&mut rng, &mut scratch)?);
                }
                Ok(covered)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))
    }
}

/// Monte Carlo coverage for `cfg.trials` independent series.
pub fn run_coverage_sim(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    let start = Instant::now();
    let setup = TrialSetup::from_config(cfg)?;
    let covered = setup.count_covered(cfg.seed, cfg.trials)?;
    let p = covered as f64 / cfg.trials as f64;
    let se = standard_error(p, cfg.trials);
    let bounds = applicable_bounds(cfg, &setup)?
        .iter()
        .map(|b| BoundComparison::from_bound(b, p, se))
        .collect();
    Ok(CoverageReport {
        empirical_coverage: p,
        covered,
        trials: cfg.trials,
        standard_error: se,
        config: cfg.clone(),
        mode: setup.mode,
        bounds,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Largest series length whose joint law is enumerated for exact `β`.
const EXACT_BETA_CELLS: usize = 1 << 16;

/// `β(0..=max_lag)`: analytic when known, exact for small finite laws.
pub fn beta_table(
    process: &Process,
    n: usize,
    max_lag: usize,
) -> Result<Option<Vec<(f64, Provenance)>>> {
    if let Some(table) = process.analytic_beta(max_lag) {
        return Ok(Some(table));
    }
    let Some(finite) = process.as_finite() else {
        return Ok(None);
    };
    match checked_cells(finite.alphabet_size(), n + 1) {
        Ok(cells) if cells <= EXACT_BETA_CELLS => {}
        _ => return Ok(None),
    }
    let joint = finite.joint_pmf(n + 1)?;
    let table = (0..=max_lag)
        .map(|tau| Ok((beta_mixing(&joint, tau.min(n))?, Provenance::Exact)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(table))
}

/// The bounds that apply to the configured process, score and mode.
pub fn applicable_bounds(cfg: &ExperimentConfig, setup: &TrialSetup) -> Result<Vec<BoundResult>> {
    let memory = cfg.score.memory();
    let n = cfg.n;
    let mut out = Vec::new();
    match setup.mode {
        Mode::Pretrained => {
            if n >= 2 * memory {
                if let Some(table) = beta_table(&setup.process, n, n)? {
                    let beta: Vec<f64> = table.iter().map(|e| e.0).collect();
                    out.push(bounds::mixing_lower_bound(cfg.alpha, n, memory, &beta)?);
                    if distinct_scores(cfg) {
                        out.push(bounds::mixing_upper_bound(cfg.alpha, n, memory, &beta)?);
                    }
                }
            }
            if let (ProcessSpec::Cyclic { k, b }, ScoreSpec::Rank) = (&cfg.process, &cfg.score) {
                if let Ok(ceiling) = bounds::cyclic_coverage_ceiling(cfg.alpha, n, *b, *k) {
                    out.push(BoundResult {
                        name: "cyclic_ceiling".into(),
                        direction: Direction::Upper,
                        value: ceiling,
                        base: ceiling,
                        minimizing_tau: 0,
                        minimizing_tau_star: -1,
                        candidates: Vec::new(),
                        vacuous: ceiling >= 1.0,
                    });
                }
            }
        }
        Mode::Split { n0 } => {
            let n1 = n - n0;
            if n1 >= 2 * memory {
                if let Some(table) = beta_table(&setup.process, n, n1)? {
                    let beta: Vec<f64> = table.iter().map(|e| e.0).collect();
                    out.push(bounds::split_mixing_lower_bound(
                        cfg.alpha, n1, memory, &beta,
                    )?);
                }
            }
        }
    }
    Ok(out)
}

fn distinct_scores(cfg: &ExperimentConfig) -> bool {
    cfg.jitter || matches!(cfg.process, ProcessSpec::Ma { .. })
}

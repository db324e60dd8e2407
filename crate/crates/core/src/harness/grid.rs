//! Coverage against sample size for `MA(t)` noise, and the cyclic-mixture
//! undercoverage experiment.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, Direction};
use crate::conformal::Mode;
use crate::error::{invalid, Result};
use crate::harness::config::{ExperimentConfig, ProcessSpec, ScoreSpec};
use crate::harness::simulate::{
    master_key, run_coverage_sim, standard_error, trial_rng, BoundComparison, CoverageReport,
    TrialSetup,
};
use crate::process::{CovariateLaw, DataPoint, MaProcess, RegressionFn};
use crate::quantile::{conformal_level, quantile_in_place};
use crate::scoring::{score_series_into, ResidualScore};

pub const DEFAULT_ORDERS: [usize; 5] = [0, 1, 2, 4, 8];
pub const DEFAULT_SIZES: [usize; 5] = [25, 50, 100, 200, 400];

/// Grid and Monte Carlo settings for [`run_ma_grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaGrid {
    pub orders: Vec<usize>,
    pub sizes: Vec<usize>,
    pub alpha: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub regression: RegressionFn,
    #[serde(default)]
    pub covariate: CovariateLaw,
}

impl Default for MaGrid {
    fn default() -> Self {
        Self {
            orders: DEFAULT_ORDERS.to_vec(),
            sizes: DEFAULT_SIZES.to_vec(),
            alpha: 0.1,
            trials: 1_000_000,
            seed: 0,
            regression: RegressionFn::default(),
            covariate: CovariateLaw::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaGridRow {
    pub t: usize,
    pub n: usize,
    pub coverage: f64,
    pub stderr: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// Config for one grid cell: `MA(t)` noise, true-`f` residual score, pretrained.
pub fn grid_cell_config(grid: &MaGrid, t: usize, n: usize, cell_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        process: ProcessSpec::Ma {
            order: t,
            regression: grid.regression,
            covariate: grid.covariate,
        },
        score: ScoreSpec::Residual { regression: None },
        mode: Some(Mode::Pretrained),
        n,
        alpha: grid.alpha,
        trials: grid.trials,
        seed: cell_seed,
        jitter: false,
    }
}

/// Seed of grid cell `(t, n)`; distinct cells use unrelated streams.
pub fn cell_seed(master: u64, t: usize, n: usize) -> u64 {
    master ^ ((t as u64) << 48) ^ ((n as u64) << 16) ^ 0x5DEE_CE66_D1CE_4E5B
}

/// One row per `(t, n)` with the `β`-based lower and upper bounds.
pub fn run_ma_grid(grid: &MaGrid) -> Result<Vec<MaGridRow>> {
    if grid.orders.is_empty() || grid.sizes.is_empty() || grid.trials == 0 {
        return Err(invalid("grid needs orders, sizes and at least one trial"));
    }
    let mut rows = Vec::with_capacity(grid.orders.len() * grid.sizes.len());
    for &t in &grid.orders {
        for &n in &grid.sizes {
            let cfg = grid_cell_config(grid, t, n, cell_seed(grid.seed, t, n));
            let setup = TrialSetup::from_config(&cfg)?;
            let covered = setup.count_covered(cfg.seed, cfg.trials)?;
            let p = covered as f64 / cfg.trials as f64;
            let beta: Vec<f64> = MaProcess::new(t)
                .beta_table(n)
                .into_iter()
                .map(|e| e.0)
                .collect();
            rows.push(MaGridRow {
                t,
                n,
                coverage: p,
                stderr: standard_error(p, cfg.trials),
                lower_bound: bounds::mixing_lower_bound(grid.alpha, n, 0, &beta)?.value,
                upper_bound: bounds::mixing_upper_bound(grid.alpha, n, 0, &beta)?.value,
            });
        }
    }
    Ok(rows)
}

pub fn write_grid_csv<W: Write>(rows: &[MaGridRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "n", "coverage", "stderr", "lower_bound", "upper_bound"])?;
    for r in rows {
        wtr.serialize((r.t, r.n, r.coverage, r.stderr, r.lower_bound, r.upper_bound))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Coverage estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCoverage {
    pub coverage: f64,
    pub standard_error: f64,
    pub trials: u64,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(|μ + W| ≤ q)` for `W ~ N(0, 1)`.
fn covered_given_mean(mu: f64, q: f64) -> f64 {
    if q == f64::INFINITY {
        1.0
    } else if q < 0.0 {
        0.0
    } else {
        normal_cdf(q - mu) - normal_cdf(-q - mu)
    }
}

/// `z` with `P(|N(0,1)| ≤ z) = level`, by bisection.
fn two_sided_normal_quantile(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::erf(mid / std::f64::consts::SQRT_2) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coverage of the pretrained residual score under `MA(t)` noise, with the
/// variance of plain Monte Carlo removed by three unbiased steps.
///
/// 1. The test noise `W_{n+1}` is integrated out: given the past, the test
///    residual is `N(μ, 1)` with `μ = W_{n+1−t} + … + W_n`.
/// 2. The same conditional probability at a fixed threshold `q*` has known
///    mean `P(|ε| ≤ q*)` and is subtracted.
/// 3. What remains is driven by `q̂ − q*`, which moves against the empirical
///    CDF at `q*`. The CDF is taken over `S_1..S_{n−t}`, which are
///    independent of `μ`, so `g'(μ)·(F̃(q*) − F(q*))` has mean exactly zero
///    and is added with the first-order coefficient `1/f(q*)`.
///
/// Uses the same trial streams as the plain simulation, so both estimate the
/// coverage of identical series.
pub fn smoothed_ma_coverage(
    grid: &MaGrid,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<SmoothedCoverage> {
    if n == 0 || grid.trials < 2 || !(grid.alpha > 0.0 && grid.alpha < 1.0) {
        return Err(invalid(
            "smoothed coverage needs n >= 1, two trials and alpha in (0, 1)",
        ));
    }
    let process = MaProcess {
        order: t,
        regression: grid.regression,
        covariate: grid.covariate,
    };
    process.validate()?;
    let score = ResidualScore::new(grid.regression);
    let level = conformal_level(grid.alpha, n)?;
    let sd = ((t + 1) as f64).sqrt();
    let q_star = sd * two_sided_normal_quantile(1.0 - grid.alpha);
    let control_mean = libm::erf(q_star / sd / std::f64::consts::SQRT_2);
    // density of |ε| at q*
    let density =
        2.0 * (-0.5 * (q_star / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let independent = n.saturating_sub(t);
    let key = master_key(seed);
    let trials = grid.trials;
    const BATCH: u64 = 2048;
    // per-batch sums, added in batch order for worker-count invariance
    let sums = (0..trials.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut points: Vec<DataPoint> = Vec::with_capacity(n + 1);
            let mut noise = Vec::with_capacity(n + 1 + t);
            let mut scores = Vec::with_capacity(n);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                let mut rng = trial_rng(&key, trial);
                process.sample_into(n, &mut rng, &mut points, &mut noise);
                score_series_into(&score, &points[..n], 1, &mut scores)?;
                let below = scores[..independent]
                    .iter()
                    .filter(|&&v| v <= q_star)
                    .count();
                let q = quantile_in_place(&mut scores, level);
                // noise[j] holds W_{j+1−t}
                let mu: f64 = noise[n..n + t].iter().sum();
                let mut d = covered_given_mean(mu, q) - covered_given_mean(mu, q_star);
                if independent > 0 {
                    let slope = normal_density(q_star - mu) + normal_density(-q_star - mu);
                    let cdf_gap = below as f64 / independent as f64 - control_mean;
                    d += slope * cdf_gap / density;
                }
                sum += d;
                sum_sq += d * d;
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (sum, sum_sq) = sums
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let count = trials as f64;
    let mean = sum / count;
    let var = (sum_sq - count * mean * mean).max(0.0) / (count - 1.0);
    Ok(SmoothedCoverage {
        coverage: control_mean + mean,
        standard_error: (var / count).sqrt(),
        trials,
    })
}

/// Parameters of the cyclic-mixture experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicExperiment {
    pub alpha: f64,
    pub n: usize,
    pub b: f64,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
}

impl Default for CyclicExperiment {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            n: 9,
            b: 1.0,
            k: 10_000,
            trials: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicReport {
    pub report: CoverageReport,
    /// `(1 − b/4)(1 − α) + n(n+1)/(2K)`.
    pub ceiling: f64,
    /// Coverage at most `ceiling + 3σ`.
    pub below_ceiling: bool,
}

/// Rank score on the cyclic mixture, pretrained, no jitter.
pub fn run_cyclic_experiment(exp: &CyclicExperiment) -> Result<CyclicReport> {
    let start = Instant::now();
    let ceiling = bounds::cyclic_coverage_ceiling(exp.alpha, exp.n, exp.b, exp.k)?;
    let cfg = ExperimentConfig {
        process: ProcessSpec::Cyclic { k: exp.k, b: exp.b },
        score: ScoreSpec::Rank,
        mode: Some(Mode::Pretrained),
        n: exp.n,
        alpha: exp.alpha,
        trials: exp.trials,
        seed: exp.seed,
        jitter: false,
    };
    let mut report = run_coverage_sim(&cfg)?;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    let below = BoundComparison::new(
        "cyclic_ceiling",
        Direction::Upper,
        ceiling,
        report.empirical_coverage,
        report.standard_error,
    )
    .satisfied;
    Ok(CyclicReport {
        report,
        ceiling,
        below_ceiling: below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_rows() {
        let grid = MaGrid {
            orders: vec![0, 2],
            sizes: vec![20, 40],
            trials: 2000,
            seed: 3,
            ..MaGrid::default()
        };
        let rows = run_ma_grid(&grid).unwrap();
        assert_eq!(rows.len(), 4);
        let iid = rows.iter().find(|r| r.t == 0).unwrap();
        assert!((iid.lower_bound - 0.9).abs() < 1e-15);
        let r = rows.iter().find(|r| r.t == 2 && r.n == 40).unwrap();
        assert!((r.lower_bound - (0.9 - 2.0 / 41.0)).abs() < 1e-12);
        let mut buf = Vec::new();
        write_grid_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,n,coverage,stderr,lower_bound,upper_bound\n0,20,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn smoothed_estimate_agrees_with_plain_simulation() {
        let grid = MaGrid {
            trials: 40_000,
            ..MaGrid::default()
        };
        for (t, n) in [(0, 30), (3, 30)] {
            let smooth = smoothed_ma_coverage(&grid, t, n, 11).unwrap();
            let plain = TrialSetup::from_config(&grid_cell_config(&grid, t, n, 11))
                .unwrap()
                .count_covered(11, grid.trials)
                .unwrap() as f64
                / grid.trials as f64;
            let se = standard_error(plain, grid.trials);
            assert!(smooth.standard_error < se / 3.0, "{smooth:?} vs {se}");
            assert!(
                (smooth.coverage - plain).abs() < 4.0 * se,
                "{smooth:?} vs {plain}"
            );
        }
        // iid: exact coverage is ⌈0.9·31⌉/31
        let iid = smoothed_ma_coverage(&grid, 0, 30, 5).unwrap();
        assert!((iid.coverage - 28.0 / 31.0).abs() < 4.0 * iid.standard_error);
    }

    #[test]
    fn normal_quantile() {
        assert!((two_sided_normal_quantile(0.9) - 1.644_853_626_951_472_2).abs() < 1e-12);
        assert_eq!(covered_given_mean(0.0, f64::INFINITY), 1.0);
    }

    #[test]
    fn pure_iid_branch_is_nominal() {
        let exp = CyclicExperiment {
            b: 0.0,
            k: 1_000_000,
            trials: 20_000,
            seed: 5,
            ..CyclicExperiment::default()
        };
        let r = run_cyclic_experiment(&exp).unwrap();
        let slack = 90.0 / 2e6 + 4.0 * r.report.standard_error;
        assert!((r.report.empirical_coverage - 0.9).abs() < slack);
        assert!(r.below_ceiling);
    }

    #[test]
    fn hypothesis_enforced() {
        let exp = CyclicExperiment {
            n: 10,
            trials: 10,
            ..CyclicExperiment::default()
        };
        assert!(run_cyclic_experiment(&exp).is_err());
    }
}

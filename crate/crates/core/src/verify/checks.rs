//! Invariant checks for every module, plus mutation sanity checks showing
//! that the quantile and deletion checks catch off-by-one bugs.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds;
use crate::conformal::{calibrate_pretrained, calibrate_pretrained_with, evaluate_coverage, Mode};
use crate::dependence::{
    self, deletion_indices, psi_bar, psi_column, score_law, tv_distance, DeletionSpec, Variant,
};
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, ProcessSpec, ScoreSpec};
use crate::harness::exact::run_exact_coverage;
use crate::harness::simulate::{run_coverage_sim, satisfies, standard_error, TrialSetup};
use crate::process::{CyclicMixture, DataPoint, FiniteDistribution, FiniteProcess, MaProcess};
use crate::quantile::{order_statistic_rank, quantile, ScoreVector};
use crate::scoring::{
    score_series, LeastSquaresAr, ModeMatch, ResidualScore, ScoreFunction, TrainingAlgorithm,
};
use crate::verify::criteria::{self, Budget};
use crate::verify::toys::{finite_scores, random_chain, scores_of};
use crate::verify::{oracle, run_check, CheckResult};

/// A quantile implementation under test: `(values, level) ↦ threshold`.
pub type QuantileFn = dyn Fn(&[f64], f64) -> f64;

/// A deletion implementation under test: `(m, spec) ↦ kept 0-based indices`.
pub type DeletionFn = dyn Fn(usize, DeletionSpec) -> Result<Vec<usize>>;

pub fn library_quantile(values: &[f64], level: f64) -> f64 {
    quantile(
        &ScoreVector::new(values.to_vec()).expect("finite scores"),
        level,
    )
}

/// Takes the order statistic one rank too high.
pub fn off_by_one_quantile(values: &[f64], level: f64) -> f64 {
    let m = values.len();
    match order_statistic_rank(level, m) {
        None => f64::NEG_INFINITY,
        Some(r) if r >= m => f64::INFINITY,
        Some(r) => {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            v[r]
        }
    }
}

/// Rotates the end-at-`k` deletion one step too far.
pub fn shifted_deletion(m: usize, spec: DeletionSpec) -> Result<Vec<usize>> {
    let mut idx = deletion_indices(m, spec)?;
    if spec.variant == Variant::EndAtK {
        for i in &mut idx {
            *i = (*i + 1) % m;
        }
    }
    Ok(idx)
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const LEVELS: [f64; 7] = [0.05, 0.3, 0.5, 0.75, 0.9, 0.999, 1.0];

pub fn quantile_monotone(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 1);
    run_check("quantile_monotone_in_level", |t| {
        for _ in 0..500 {
            let m = rng.random_range(1..=20);
            let v: Vec<f64> = (0..m)
                .map(|_| f64::from(rng.random_range(0..6u8)))
                .collect();
            let mut levels: Vec<f64> = (0..30).map(|_| rng.random_range(-0.2..1.3)).collect();
            levels.sort_by(f64::total_cmp);
            let qs: Vec<f64> = levels.iter().map(|&b| library_quantile(&v, b)).collect();
            t.case(qs.windows(2).all(|w| w[0] <= w[1]), || format!("{v:?}"));
        }
        Ok(())
    })
}

/// With distinct entries exactly `⌈bm⌉` of them are `≤ quantile(v, b)`.
pub fn rank_identity(seed: u64, q: &QuantileFn) -> CheckResult {
    let mut rng = rng_for(seed, 2);
    run_check("quantile_rank_identity", |t| {
        for _ in 0..400 {
            let m = rng.random_range(1..=15);
            let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            for &b in &LEVELS {
                let thr = q(&v, b);
                let count = v.iter().filter(|&&x| x <= thr).count();
                let want = (b * m as f64 - 1e-9).ceil() as usize;
                t.case(count == want, || format!("m={m} b={b}: {count} vs {want}"));
            }
        }
        Ok(())
    })
}

/// Lower and upper count bounds of the empirical quantile.
pub fn quantile_count_bounds(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 3);
    run_check("quantile_count_bounds", |t| {
        for _ in 0..400 {
            let m = rng.random_range(1..=15);
            let tied: Vec<f64> = (0..m)
                .map(|_| f64::from(rng.random_range(0..4u8)))
                .collect();
            let distinct: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let a = rng.random::<f64>();
            let frac = |v: &[f64]| {
                let thr = library_quantile(v, 1.0 - a);
                v.iter().filter(|&&x| x <= thr).count() as f64 / m as f64
            };
            t.case(frac(&tied) >= 1.0 - a - 1e-12, || {
                format!("lower: {tied:?} a={a}")
            });
            let ceiling = ((1.0 - a) * m as f64 - 1e-9).ceil() / m as f64;
            t.case(frac(&distinct) <= ceiling + 1e-12, || {
                format!("upper: m={m} a={a}")
            });
        }
        Ok(())
    })
}

/// `q(v, (1−a)(m−τ)/m) ≤ q(v′, 1−a) ≤ q(v, 1 − a(m−τ)/m)` for every deletion
/// of `τ` entries, exhaustively for `m ≤ max_m`.
pub fn quantile_stability(seed: u64, max_m: usize) -> CheckResult {
    let mut rng = rng_for(seed, 4);
    let a_grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    run_check("quantile_stability_exhaustive", |t| {
        for m in 1..=max_m {
            let mut vectors: Vec<Vec<f64>> = Vec::new();
            if m <= 5 {
                // every vector over {0, 1, 2}
                for code in 0..3usize.pow(m as u32) {
                    let mut c = code;
                    vectors.push(
                        (0..m)
                            .map(|_| {
                                let d = c % 3;
                                c /= 3;
                                d as f64
                            })
                            .collect(),
                    );
                }
            }
            for _ in 0..12 {
                vectors.push((0..m).map(|_| rng.random::<f64>()).collect());
                vectors.push(
                    (0..m)
                        .map(|_| f64::from(rng.random_range(0..4u8)))
                        .collect(),
                );
            }
            for v in &vectors {
                for mask in 0u32..(1 << m) {
                    let tau = mask.count_ones() as usize;
                    if tau == m {
                        continue;
                    }
                    let kept: Vec<f64> = (0..m)
                        .filter(|i| mask & (1 << i) == 0)
                        .map(|i| v[i])
                        .collect();
                    let shrink = (m - tau) as f64 / m as f64;
                    for &a in &a_grid {
                        let lo = library_quantile(v, (1.0 - a) * shrink);
                        let mid = library_quantile(&kept, 1.0 - a);
                        let hi = library_quantile(v, 1.0 - a * shrink);
                        t.case(lo <= mid && mid <= hi, || {
                            format!("v={v:?} mask={mask:b} a={a}")
                        });
                    }
                }
            }
        }
        Ok(())
    })
}

/// Marginals of `(Z_i, …, Z_{i+h})` do not depend on `i` for stationary laws.
pub fn stationary_marginals(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 5);
    run_check("process_stationary_marginals", |t| {
        let mut laws: Vec<FiniteDistribution> = Vec::new();
        for _ in 0..6 {
            let a = rng.random_range(2..=3);
            laws.push(random_chain(&mut rng, a, true).joint_pmf(6)?);
        }
        laws.push(CyclicMixture::new(3, 1.0)?.joint_pmf(5)?);
        laws.push(CyclicMixture::new(4, 0.5)?.joint_pmf(5)?);
        for joint in &laws {
            let len = joint.len();
            for h in 0..len {
                let first = joint.marginal(&(0..=h).collect::<Vec<_>>())?;
                for i in 1..len - h {
                    let other = joint.marginal(&(i..=i + h).collect::<Vec<_>>())?;
                    let gap = first
                        .pmf()
                        .iter()
                        .zip(other.pmf())
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    t.case(gap <= 1e-12, || format!("h={h} i={i} gap={gap:e}"));
                }
            }
        }
        Ok(())
    })
}

/// Sampled sequence frequencies match `joint_pmf` within 4σ per cell.
pub fn generator_matches_pmf(seed: u64, samples: u64) -> CheckResult {
    let mut rng = rng_for(seed, 6);
    run_check("process_generator_matches_pmf", |t| {
        let chain = random_chain(&mut rng, 2, false);
        let cyclic = CyclicMixture::new(4, 1.0)?;
        let cases: [(&dyn FiniteProcess, usize); 2] = [(&chain, 6), (&cyclic, 3)];
        for (process, len) in cases {
            let joint = process.joint_pmf(len)?;
            let a = process.alphabet_size();
            let mut counts = vec![0u64; joint.pmf().len()];
            let mut states = Vec::with_capacity(len);
            for _ in 0..samples {
                process.sample_states(len, &mut rng, &mut states);
                counts[crate::process::encode(&states, a)] += 1;
            }
            for (cell, (&c, &p)) in counts.iter().zip(joint.pmf()).enumerate() {
                let freq = c as f64 / samples as f64;
                let sd = (p * (1.0 - p) / samples as f64).sqrt();
                // two counts of slack: the normal band is useless for cells with p·N ≪ 1
                let slack = 2.0 / samples as f64;
                t.case((freq - p).abs() <= 4.0 * sd + slack, || {
                    format!("cell {cell}: {freq} vs {p}")
                });
            }
        }
        Ok(())
    })
}

/// Score vectors have length `len − from + 1`; memoryless scores are pointwise.
pub fn score_series_shape(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 7);
    run_check("scoring_series_shape", |t| {
        let ma = MaProcess::new(2);
        for _ in 0..100 {
            let n = rng.random_range(1..=30);
            let pts = ma.sample(n, &mut rng).into_points();
            let memory = rng.random_range(0..=n);
            let score = crate::scoring::lag_mean_residual_score(memory);
            let from = rng.random_range(memory + 1..=n + 1);
            let s = score_series(&score, &pts, from)?;
            t.case(s.len() == n + 2 - from, || {
                format!("n={n} L={memory} from={from}")
            });
            let residual = ResidualScore::new(ma.regression);
            let all = score_series(&residual, &pts, 1)?;
            let pointwise: Vec<f64> = pts
                .iter()
                .map(|p| (p.y - ma.regression.eval(p.x)).abs())
                .collect();
            t.case(all.as_slice() == pointwise.as_slice(), || {
                format!("pointwise n={n}")
            });
        }
        Ok(())
    })
}

/// Fitted scores ignore everything after the training block.
pub fn training_locality(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 8);
    run_check("scoring_training_locality", |t| {
        let ma = MaProcess::new(1);
        for _ in 0..60 {
            let n = 30;
            let n0 = rng.random_range(6..=20);
            let memory = rng.random_range(0..=2);
            let pts = ma.sample(n, &mut rng).into_points();
            let mut perturbed = pts.clone();
            for p in &mut perturbed[n0..] {
                p.y += rng.random_range(-5.0..5.0);
                p.x = rng.random::<f64>();
            }
            let algorithms: [Arc<dyn TrainingAlgorithm>; 2] = [
                Arc::new(LeastSquaresAr::new(memory)),
                Arc::new(ModeMatch::new(memory)),
            ];
            for algo in algorithms {
                let a = algo.fit(&pts[..n0])?;
                let b = algo.fit(&perturbed[..n0])?;
                let sa = score_series(a.as_ref(), &perturbed, memory + 1)?;
                let sb = score_series(b.as_ref(), &perturbed, memory + 1)?;
                t.case(sa == sb, || format!("{algo:?} n0={n0}"));
            }
        }
        Ok(())
    })
}

/// `covered ⇔ S_{n+1} ≤ quantile(all scores, 1−α) ⇔ S_{n+1} ≤ q`.
pub fn rank_threshold_equivalence(seed: u64, instances: u64) -> CheckResult {
    let mut rng = rng_for(seed, 9);
    run_check("conformal_rank_threshold_equivalence", |t| {
        let ma = MaProcess::new(1);
        for i in 0..instances {
            let n = rng.random_range(2..=25);
            let alpha = rng.random_range(0.02..0.6);
            let (pts, score, salt): (Vec<DataPoint>, Arc<dyn ScoreFunction>, Option<u64>) =
                if i % 2 == 0 {
                    (
                        ma.sample(n, &mut rng).into_points(),
                        Arc::new(ResidualScore::new(ma.regression)),
                        None,
                    )
                } else {
                    // discrete scores need the jitter to be distinct
                    let chain = random_chain(&mut rng, 3, false);
                    let mut states = Vec::new();
                    chain.sample_states(n + 1, &mut rng, &mut states);
                    let pts = states.into_iter().map(DataPoint::state).collect();
                    (
                        pts,
                        Arc::new(crate::scoring::state_value_score()),
                        Some(rng.random::<u64>()),
                    )
                };
            let rule = calibrate_pretrained_with(score, &pts[..n], alpha, salt, &mut Vec::new())?;
            let covered = evaluate_coverage(&rule, &pts[n]).covered;
            let mut all = score_series(rule.score_fn.as_ref(), &pts, 1)?.into_inner();
            if let Some(s) = salt {
                for (j, v) in all.iter_mut().enumerate() {
                    *v += crate::scoring::jitter(s, j + 1);
                }
            }
            let test = *all.last().expect("n + 1 scores");
            let by_rank = test <= library_quantile(&all, 1.0 - alpha);
            let by_threshold = test <= rule.threshold;
            t.case(covered == by_rank && covered == by_threshold, || {
                format!("n={n} alpha={alpha}")
            });
        }
        Ok(())
    })
}

/// Smaller `α` never lowers the threshold.
pub fn alpha_monotone(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 10);
    run_check("conformal_alpha_monotone", |t| {
        let ma = MaProcess::new(2);
        let score: Arc<dyn ScoreFunction> = Arc::new(ResidualScore::new(ma.regression));
        for _ in 0..200 {
            let n = rng.random_range(1..=40);
            let pts = ma.sample(n, &mut rng).into_points();
            let mut alphas: Vec<f64> = (0..8).map(|_| rng.random_range(0.001..0.999)).collect();
            alphas.sort_by(f64::total_cmp);
            let qs = alphas
                .iter()
                .map(|&a| Ok(calibrate_pretrained(score.clone(), &pts[..n], a)?.threshold))
                .collect::<Result<Vec<f64>>>()?;
            t.case(qs.windows(2).all(|w| w[0] >= w[1]), || format!("n={n}"));
        }
        Ok(())
    })
}

fn markov_config(
    chain: &crate::process::FiniteMarkov,
    score: ScoreSpec,
    n: usize,
    alpha: f64,
    jitter: bool,
) -> ExperimentConfig {
    ExperimentConfig {
        process: ProcessSpec::Markov {
            transition: chain.transition.clone(),
            initial: Some(chain.initial.clone()),
        },
        score,
        mode: None,
        n,
        alpha,
        trials: 1,
        seed: 0,
        jitter,
    }
}

/// iid data, `L = 0`, random ties: exact coverage in `[1−α, ⌈(1−α)(n+1)⌉/(n+1)]`.
pub fn exchangeable_exact(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 11);
    run_check("conformal_exchangeable_exact", |t| {
        for _ in 0..12 {
            let a = rng.random_range(2..=3);
            let chain =
                crate::process::FiniteMarkov::iid(crate::verify::toys::random_law(&mut rng, a))?;
            let n = rng.random_range(2..=6);
            let alpha = rng.random_range(0.05..0.5);
            let exact =
                run_exact_coverage(&markov_config(&chain, ScoreSpec::State, n, alpha, true))?
                    .coverage;
            let top = ((1.0 - alpha) * (n + 1) as f64 - 1e-9).ceil() / (n + 1) as f64;
            t.case(exact >= 1.0 - alpha - 1e-12 && exact <= top + 1e-12, || {
                format!("n={n} alpha={alpha} coverage={exact}")
            });
        }
        Ok(())
    })
}

/// Both deletions keep `m − τ` entries; `Δ⁰` ends at `w_m`, `Δ¹` at `w_k`.
pub fn deletion_laws() -> CheckResult {
    run_check("dependence_deletion_length_and_anchor", |t| {
        for m in 1..=12 {
            for k in 1..=m {
                for tau in 0..m {
                    for variant in [Variant::KeepEnd, Variant::EndAtK] {
                        let idx = deletion_indices(m, DeletionSpec::new(k, tau, variant))?;
                        let anchor = if variant == Variant::KeepEnd {
                            m - 1
                        } else {
                            k - 1
                        };
                        t.case(idx.len() == m - tau && idx.last() == Some(&anchor), || {
                            format!("m={m} k={k} tau={tau} {variant:?}: {idx:?}")
                        });
                    }
                }
            }
        }
        Ok(())
    })
}

/// The pictured cases for `m = 10`, 1-based.
pub const GOLDEN_DELETIONS: [(usize, usize, Variant, [usize; 5]); 4] = [
    (3, 5, Variant::KeepEnd, [1, 2, 8, 9, 10]),
    (3, 5, Variant::EndAtK, [9, 10, 1, 2, 3]),
    (8, 5, Variant::KeepEnd, [6, 7, 8, 9, 10]),
    (8, 5, Variant::EndAtK, [4, 5, 6, 7, 8]),
];

pub fn deletion_golden(del: &DeletionFn) -> CheckResult {
    run_check("dependence_deletion_golden", |t| {
        for (k, tau, variant, want) in GOLDEN_DELETIONS {
            let got: Vec<usize> = del(10, DeletionSpec::new(k, tau, variant))?
                .iter()
                .map(|i| i + 1)
                .collect();
            t.case(got == want, || {
                format!("k={k} tau={tau} {variant:?}: {got:?}")
            });
        }
        Ok(())
    })
}

/// Symmetry, triangle inequality and data processing of `d_TV`.
pub fn tv_properties(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 12);
    run_check("dependence_tv_properties", |t| {
        let law = |rng: &mut ChaCha8Rng| {
            let pmf = crate::verify::toys::random_law(rng, 9);
            FiniteDistribution::new(3, 2, pmf)
        };
        for _ in 0..200 {
            let (p, q, r) = (law(&mut rng)?, law(&mut rng)?, law(&mut rng)?);
            let pq = tv_distance(&p, &q)?;
            t.case(pq == tv_distance(&q, &p)?, || "symmetry".into());
            t.case(
                pq <= tv_distance(&p, &r)? + tv_distance(&r, &q)? + 1e-12,
                || "triangle".into(),
            );
            let table: Vec<usize> = (0..9).map(|_| rng.random_range(0..4)).collect();
            let push = |d: &FiniteDistribution| {
                d.pushforward(4, 1, |seq, out| out[0] = table[seq[0] * 3 + seq[1]])
            };
            t.case(tv_distance(&push(&p)?, &push(&q)?)? <= pq + 1e-12, || {
                "data processing".into()
            });
        }
        Ok(())
    })
}

/// Bound values equal a direct scan of their defining formulas.
pub fn bound_minimizers(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 13);
    run_check("bounds_minimizer_exhaustive", |t| {
        for _ in 0..200 {
            let n = rng.random_range(1..=30);
            let memory = rng.random_range(0..=n / 2);
            let alpha = rng.random_range(0.01..0.5);
            let m = n - memory + 1;
            let psi: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 0.3).collect();
            let beta: Vec<f64> = (0..=n).map(|_| rng.random::<f64>() * 0.2).collect();
            let scan_switch = (0..m)
                .map(|tau| tau as f64 / m as f64 + psi[tau])
                .fold(f64::INFINITY, f64::min);
            let scan_mix = (0..=n - 2 * memory)
                .map(|tau| (tau + memory) as f64 / m as f64 + 2.0 * beta[tau])
                .fold(f64::INFINITY, f64::min);
            let lo = bounds::switch_lower_bound(alpha, n, memory, &psi)?;
            let up = bounds::switch_upper_bound(alpha, n, memory, &psi)?;
            let mix = bounds::mixing_lower_bound(alpha, n, memory, &beta)?;
            let base = ((1.0 - alpha) * m as f64 - 1e-9).ceil() / m as f64;
            t.case(
                (lo.value - (1.0 - alpha - scan_switch)).abs() < 1e-12,
                || "switch_lower".into(),
            );
            t.case((up.value - (base + scan_switch)).abs() < 1e-12, || {
                "switch_upper".into()
            });
            t.case((mix.value - (1.0 - alpha - scan_mix)).abs() < 1e-12, || {
                "mixing_lower".into()
            });
            let n1 = n;
            let scan_split = (0..=n1 - 2 * memory)
                .flat_map(|tau| (0..=n1 - 2 * memory - tau).map(move |s| (tau, s)))
                .map(|(tau, s)| {
                    (tau as f64 + alpha * s as f64 + memory as f64) / (n1 - s - memory + 1) as f64
                        + 2.0 * beta[tau]
                        + 2.0 * beta[s]
                })
                .fold(f64::INFINITY, f64::min);
            let split = bounds::split_mixing_lower_bound(alpha, n1, memory, &beta)?;
            t.case(
                (split.value - (1.0 - alpha - scan_split)).abs() < 1e-12,
                || "split_mixing".into(),
            );
            let c = split.minimizer();
            t.case((c.total - scan_split).abs() < 1e-12, || {
                "split minimizer".into()
            });
        }
        Ok(())
    })
}

/// Lower bounds never exceed `1−α`; upper bounds never fall below the
/// rounded nominal level; a `τ* = 0` split table reduces to the full bound.
pub fn bound_dominance(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 14);
    run_check("bounds_dominance_and_reduction", |t| {
        for _ in 0..200 {
            let n = rng.random_range(1..=30);
            let memory = rng.random_range(0..=n / 2);
            let alpha = rng.random_range(0.01..0.5);
            let m = n - memory + 1;
            let psi: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let lo = bounds::switch_lower_bound(alpha, n, memory, &psi)?;
            let up = bounds::switch_upper_bound(alpha, n, memory, &psi)?;
            let base = bounds::rounded_nominal(alpha, n, memory)?;
            t.case(lo.value <= 1.0 - alpha && up.value >= base, || {
                format!("n={n} L={memory}")
            });
            let split = bounds::split_switch_lower_bound(alpha, n, memory, std::slice::from_ref(&psi))?;
            t.case(split.value == lo.value, || {
                format!("reduction n={n} L={memory}")
            });
        }
        Ok(())
    })
}

/// Exact coverage lies between the switch lower and upper bounds computed
/// from the exact score law, with random tie-breaking.
pub fn sandwich_exact(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 15);
    run_check("bounds_sandwich_exact", |t| {
        for i in 0..10 {
            let a = rng.random_range(2..=3);
            let chain = random_chain(&mut rng, a, i % 2 == 0);
            let memory = i % 2;
            let n = rng.random_range(memory + 2..=5);
            let alpha = rng.random_range(0.05..0.4);
            let spec = if memory == 0 {
                ScoreSpec::State
            } else {
                ScoreSpec::LagMean { memory }
            };
            let cfg = markov_config(&chain, spec, n, alpha, true);
            let exact = run_exact_coverage(&cfg)?.coverage;
            let score: Arc<dyn ScoreFunction> = if memory == 0 {
                Arc::new(crate::scoring::state_value_score())
            } else {
                Arc::new(crate::scoring::lag_mean_residual_score(memory))
            };
            let (law, _) = score_law(&chain.joint_pmf(n + 1)?, score.as_ref())?;
            let m = law.len();
            let table = (0..m)
                .map(|tau| psi_bar(&psi_column(&law, tau)?, m))
                .collect::<Result<Vec<f64>>>()?;
            let lo = bounds::switch_lower_bound(alpha, n, memory, &table)?.value;
            let hi = bounds::switch_upper_bound(alpha, n, memory, &table)?.value;
            t.case(lo - 1e-12 <= exact && exact <= hi + 1e-12, || {
                format!("n={n} L={memory}: {lo} <= {exact} <= {hi}")
            });
        }
        Ok(())
    })
}

/// Coverage counts do not depend on the number of worker threads.
pub fn worker_invariance(seed: u64) -> CheckResult {
    run_check("harness_worker_count_invariance", |t| {
        let cfg = ExperimentConfig {
            process: ProcessSpec::Ma {
                order: 3,
                regression: Default::default(),
                covariate: Default::default(),
            },
            score: ScoreSpec::Residual { regression: None },
            mode: None,
            n: 40,
            alpha: 0.1,
            trials: 9000,
            seed,
            jitter: false,
        };
        let setup = TrialSetup::from_config(&cfg)?;
        let mut counts = Vec::new();
        for threads in [1, 2, 5] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
            counts.push(pool.install(|| setup.count_covered(cfg.seed, cfg.trials))?);
        }
        t.case(counts.windows(2).all(|w| w[0] == w[1]), || {
            format!("{counts:?}")
        });
        let again = run_coverage_sim(&cfg)?;
        t.case(again.covered == counts[0], || "rerun".into());
        Ok(())
    })
}

/// Every report flag matches a recomputation from the report's raw fields.
pub fn report_flags(seed: u64) -> CheckResult {
    run_check("harness_report_flags_recomputed", |t| {
        let configs = [
            (
                ProcessSpec::Ma {
                    order: 2,
                    regression: Default::default(),
                    covariate: Default::default(),
                },
                ScoreSpec::Residual { regression: None },
                None,
            ),
            (ProcessSpec::Cyclic { k: 50, b: 1.0 }, ScoreSpec::Rank, None),
            (
                ProcessSpec::Ma {
                    order: 1,
                    regression: Default::default(),
                    covariate: Default::default(),
                },
                ScoreSpec::LeastSquaresAr { memory: 1 },
                Some(Mode::Split { n0: 20 }),
            ),
        ];
        for (process, score, mode) in configs {
            let cfg = ExperimentConfig {
                process,
                score,
                mode,
                n: 39,
                alpha: 0.1,
                trials: 3000,
                seed,
                jitter: false,
            };
            let r = run_coverage_sim(&cfg)?;
            t.case(
                r.empirical_coverage == r.covered as f64 / r.trials as f64,
                || "coverage".into(),
            );
            t.case(
                r.standard_error == standard_error(r.empirical_coverage, r.trials),
                || "stderr".into(),
            );
            t.case(!r.bounds.is_empty(), || "no bounds".into());
            for b in &r.bounds {
                let again = satisfies(b.direction, b.value, r.empirical_coverage, r.standard_error);
                t.case(again == b.satisfied, || b.name.clone());
            }
        }
        Ok(())
    })
}

/// Exact coverage from the harness equals both oracle paths.
pub fn exact_dual_path(seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 16);
    run_check("harness_exact_dual_path", |t| {
        for _ in 0..10 {
            let a = rng.random_range(2..=3);
            let chain = {
                let st = rng.random::<bool>();
                random_chain(&mut rng, a, st)
            };
            let n = rng.random_range(2..=6);
            let alpha = rng.random_range(0.05..0.5);
            let cfg = markov_config(&chain, ScoreSpec::State, n, alpha, true);
            let lib = run_exact_coverage(&cfg)?.coverage;
            let e = oracle::Enumerated::from_distribution(&chain.joint_pmf(n + 1)?);
            let score = crate::scoring::state_value_score();
            let split = |seq: &[usize]| {
                let s = scores_of(&score, seq);
                (s[..n].to_vec(), s[n])
            };
            let by_event = oracle::exact_coverage(&e, alpha, true, split);
            let by_rank = oracle::exact_coverage_by_rank(&e, alpha, split);
            t.case(
                (lib - by_event).abs() < 1e-12 && (lib - by_rank).abs() < 1e-12,
                || format!("{lib} {by_event} {by_rank}"),
            );
        }
        Ok(())
    })
}

/// The quantile and deletion checks reject deliberately broken versions.
pub fn mutation_checks(seed: u64) -> Vec<CheckResult> {
    let caught = |name: &str, r: CheckResult| CheckResult {
        name: name.to_owned(),
        passed: !r.passed,
        cases: 1,
        detail: format!(
            "mutant {}: {}",
            if r.passed { "survived" } else { "caught" },
            r.detail
        ),
    };
    vec![
        caught(
            "mutation_off_by_one_quantile",
            rank_identity(seed, &off_by_one_quantile),
        ),
        caught(
            "mutation_shifted_deletion",
            deletion_golden(&shifted_deletion),
        ),
    ]
}

/// Coefficients of the dependence module against the brute-force oracle on
/// random chains: every `Ψ_{k,τ}`, `Ψ̄_τ` and `β(τ)`.
pub fn coefficients_match_oracle(seed: u64, configs: usize) -> CheckResult {
    let mut rng = rng_for(seed, 17);
    run_check("dependence_coefficients_match_oracle", |t| {
        for _ in 0..configs {
            let a = rng.random_range(2..=3);
            let len = rng.random_range(2..=if a == 2 { 8 } else { 6 });
            let joint = {
                let st = rng.random::<bool>();
                random_chain(&mut rng, a, st)
            }
            .joint_pmf(len)?;
            compare_coefficients(t, &joint)?;
            // the same for a memory-one score law
            let score = &finite_scores(1)[0];
            let (law, _) = score_law(&joint, score.as_ref())?;
            let e = oracle::Enumerated::from_distribution(&joint);
            for tau in 0..law.len() {
                for k in 1..=law.len() {
                    let lib = dependence::psi_k_tau(&law, k, tau)?;
                    let keep = oracle::deletion_positions(law.len(), k, tau, 0);
                    let rot = oracle::deletion_positions(law.len(), k, tau, 1);
                    let key = |pos: &[usize]| {
                        let pos = pos.to_vec();
                        let s = score.clone();
                        move |seq: &[usize]| {
                            let v = scores_of(s.as_ref(), seq);
                            pos.iter()
                                .map(|&i| v[i - 1].to_bits())
                                .collect::<Vec<u64>>()
                        }
                    };
                    let brute = oracle::tv(&e.law(key(&keep)), &e.law(key(&rot)));
                    t.case((lib - brute).abs() < 1e-12, || {
                        format!("score psi k={k} tau={tau}")
                    });
                }
            }
        }
        Ok(())
    })
}

pub(crate) fn compare_coefficients(
    t: &mut crate::verify::Tally,
    joint: &FiniteDistribution,
) -> Result<()> {
    let e = oracle::Enumerated::from_distribution(joint);
    let m = joint.len();
    for tau in 0..m {
        let column = psi_column(joint, tau)?;
        for (k, &lib) in (1..=m).zip(&column) {
            let brute = oracle::psi(&e, k, tau);
            t.case((lib - brute).abs() < 1e-12, || {
                format!("psi k={k} tau={tau}: {lib} vs {brute}")
            });
        }
        let bar = psi_bar(&column, m)?;
        let brute_bar = oracle::psi_bar(&e, tau);
        t.case((bar - brute_bar).abs() < 1e-12, || {
            format!("psi_bar tau={tau}")
        });
        let beta = dependence::beta_mixing(joint, tau)?;
        let brute_beta = oracle::beta(&e, tau);
        t.case((beta - brute_beta).abs() < 1e-12, || {
            format!("beta tau={tau}: {beta} vs {brute_beta}")
        });
    }
    Ok(())
}

/// Every invariant check at the given budget.
pub fn all_checks(seed: u64, budget: &Budget) -> Vec<CheckResult> {
    let mut out = vec![
        quantile_monotone(seed),
        rank_identity(seed, &library_quantile),
        quantile_count_bounds(seed),
        quantile_stability(seed, budget.stability_max_m),
        stationary_marginals(seed),
        generator_matches_pmf(seed, budget.generator_samples),
        score_series_shape(seed),
        training_locality(seed),
        rank_threshold_equivalence(seed, budget.equivalence_instances),
        alpha_monotone(seed),
        exchangeable_exact(seed),
        deletion_laws(),
        deletion_golden(&deletion_indices),
        tv_properties(seed),
        coefficients_match_oracle(seed, 6),
        criteria::proposition_1(seed),
        criteria::proposition_2(seed),
        criteria::proposition_3(seed),
        bound_minimizers(seed),
        bound_dominance(seed),
        sandwich_exact(seed),
        worker_invariance(seed),
        report_flags(seed),
        exact_dual_path(seed),
    ];
    out.extend(mutation_checks(seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_passes_and_mutants_are_caught() {
        assert!(rank_identity(1, &library_quantile).passed);
        assert!(!rank_identity(1, &off_by_one_quantile).passed);
        assert!(deletion_golden(&deletion_indices).passed);
        assert!(!deletion_golden(&shifted_deletion).passed);
        assert!(mutation_checks(1).iter().all(|c| c.passed));
    }

    #[test]
    fn cheap_checks_pass() {
        for r in [
            quantile_monotone(2),
            quantile_count_bounds(2),
            quantile_stability(2, 5),
            deletion_laws(),
            tv_properties(2),
            bound_minimizers(2),
            bound_dominance(2),
            alpha_monotone(2),
            score_series_shape(2),
            training_locality(2),
            rank_threshold_equivalence(2, 2000),
        ] {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn enumeration_checks_pass() {
        for r in [
            stationary_marginals(3),
            generator_matches_pmf(3, 20_000),
            exchangeable_exact(3),
            sandwich_exact(3),
            exact_dual_path(3),
            coefficients_match_oracle(3, 3),
            report_flags(3),
            worker_invariance(3),
        ] {
            assert!(r.passed, "{r:?}");
        }
    }
}

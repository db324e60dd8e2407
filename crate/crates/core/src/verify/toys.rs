//! Small finite processes and scores used by the checks.

use std::sync::Arc;

use rand::Rng;

use crate::process::{DataPoint, FiniteMarkov};
use crate::scoring::{lag_mean_residual_score, state_value_score, Context, FnScore, ScoreFunction};

/// Row-stochastic matrix with entries bounded away from zero, or a
/// permutation-like near-deterministic one when `sticky`.
pub fn random_transition<R: Rng>(rng: &mut R, alphabet: usize, sticky: bool) -> Vec<Vec<f64>> {
    (0..alphabet)
        .map(|i| {
            let w: Vec<f64> = (0..alphabet)
                .map(|j| {
                    let base = rng.random::<f64>() + 0.05;
                    if sticky && j == (i + 1) % alphabet {
                        base + 4.0
                    } else {
                        base
                    }
                })
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn random_law<R: Rng>(rng: &mut R, alphabet: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..alphabet).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Stationary chain, or one started from a random law.
pub fn random_chain<R: Rng>(rng: &mut R, alphabet: usize, stationary: bool) -> FiniteMarkov {
    let sticky = rng.random::<bool>();
    let transition = random_transition(rng, alphabet, sticky);
    if stationary {
        FiniteMarkov::stationary(transition).expect("positive transition matrix")
    } else {
        let initial = random_law(rng, alphabet);
        FiniteMarkov::new(transition, initial).expect("valid chain")
    }
}

/// `y + 3·#{j ≤ L : y ≠ y_{−j}}`, finite-valued with memory `L`.
pub fn change_count_score(memory: usize) -> FnScore {
    FnScore::new("change_count", memory, |z, ctx| {
        z.y + 3.0 * ctx.iter().filter(|p| p.y != z.y).count() as f64
    })
}

/// Finite-valued scores with memory `L` on state-embedded sequences.
pub fn finite_scores(memory: usize) -> Vec<Arc<dyn ScoreFunction>> {
    let mut out: Vec<Arc<dyn ScoreFunction>> = vec![Arc::new(change_count_score(memory))];
    if memory == 0 {
        out.push(Arc::new(state_value_score()));
    } else {
        out.push(Arc::new(lag_mean_residual_score(memory)));
    }
    out
}

/// `S_{L+1}, …, S_len` of a state sequence, by direct evaluation.
pub fn scores_of(score: &dyn ScoreFunction, seq: &[usize]) -> Vec<f64> {
    let points: Vec<DataPoint> = seq.iter().map(|&a| DataPoint::state(a)).collect();
    let l = score.memory();
    (l..points.len())
        .map(|i| score.eval(&points[i], Context::from_chronological(&points[i - l..i])))
        .collect()
}

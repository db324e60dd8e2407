//! Score functions with memory `L` and training algorithms for split calibration.
//!
//! A score with memory `L` maps the current point and the `L` preceding points to
//! a real number: `S_i = s(Z_i; Z_{i−1}, …, Z_{i−L})`. The preceding points are
//! handed over as a [`Context`], which is indexed most recent first.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::process::{DataPoint, RegressionFn};
use crate::quantile::ScoreVector;

/// Jitter scale for tie breaking.
pub const JITTER_SCALE: f64 = 1e-9;

/// The `L` points preceding a scored point, viewed most recent first.
///
/// Wraps a chronological slice so no copy is needed.
#[derive(Clone, Copy, Debug)]
pub struct Context<'a> {
    chronological: &'a [DataPoint],
}

impl<'a> Context<'a> {
    /// `window` in time order (`Z_{i−L}, …, Z_{i−1}`).
    pub fn from_chronological(window: &'a [DataPoint]) -> Self {
        Self {
            chronological: window,
        }
    }

    pub fn empty() -> Self {
        Self { chronological: &[] }
    }

    pub fn len(&self) -> usize {
        self.chronological.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chronological.is_empty()
    }

    /// `z_{−j}` for `j = 1..=L`.
    pub fn lag(&self, j: usize) -> &'a DataPoint {
        assert!(
            j >= 1 && j <= self.len(),
            "lag {j} outside context of length {}",
            self.len()
        );
        &self.chronological[self.chronological.len() - j]
    }

    /// `z_{−1}, z_{−2}, …, z_{−L}`.
    pub fn iter(&self) -> impl Iterator<Item = &'a DataPoint> + 'a {
        self.chronological.iter().rev()
    }

    pub fn as_chronological(&self) -> &'a [DataPoint] {
        self.chronological
    }
}

/// A score `s: Z^{L+1} → ℝ`.
pub trait ScoreFunction: Send + Sync + fmt::Debug {
    fn memory(&self) -> usize;

    /// `s(z; z_{−1}, …, z_{−L})`. `context.len()` always equals [`Self::memory`].
    fn eval(&self, z: &DataPoint, context: Context<'_>) -> f64;

    /// Point prediction `f̂(x; context)` for residual scores `|y − f̂|`.
    fn point_prediction(&self, _x: f64, _context: Context<'_>) -> Option<f64> {
        None
    }
}

/// A training algorithm mapping `Z_1, …, Z_{n0}` to a score function.
pub trait TrainingAlgorithm: Send + Sync + fmt::Debug {
    /// Memory of every score this algorithm returns.
    fn memory(&self) -> usize;

    fn fit(&self, training: &[DataPoint]) -> Result<Arc<dyn ScoreFunction>>;
}

/// `(S_{from}, …, S_{len})` over `points` (1-based indices).
pub fn score_series(
    score: &dyn ScoreFunction,
    points: &[DataPoint],
    from_index: usize,
) -> Result<ScoreVector> {
    let mut out = Vec::new();
    score_series_into(score, points, from_index, &mut out)?;
    ScoreVector::new(out)
}

/// Buffer-reusing variant of [`score_series`]; does not check finiteness.
pub fn score_series_into(
    score: &dyn ScoreFunction,
    points: &[DataPoint],
    from_index: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let memory = score.memory();
    if from_index <= memory {
        return Err(Error::InsufficientContext { memory, from_index });
    }
    if from_index > points.len() {
        return Err(Error::EmptyScores);
    }
    out.clear();
    out.extend((from_index..=points.len()).map(|i| {
        // S_i reads Z_i (points[i−1]) and Z_{i−L}..Z_{i−1}
        let context = Context::from_chronological(&points[i - 1 - memory..i - 1]);
        score.eval(&points[i - 1], context)
    }));
    Ok(())
}

/// Deterministic pseudo-uniform in `[0, 1)` from `(salt, index)`.
pub fn jitter_unit(salt: u64, index: usize) -> f64 {
    // splitmix64 finaliser
    let mut z = salt ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Tie-breaking jitter `1e−9 · u(salt, i)` for the score at time index `i`.
pub fn jitter(salt: u64, index: usize) -> f64 {
    JITTER_SCALE * jitter_unit(salt, index)
}

/// Absolute residual `|y − f(x)|` of a pretrained regression function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualScore {
    pub regression: RegressionFn,
}

impl ResidualScore {
    pub fn new(regression: RegressionFn) -> Self {
        Self { regression }
    }
}

impl ScoreFunction for ResidualScore {
    fn memory(&self) -> usize {
        0
    }

    fn eval(&self, z: &DataPoint, _context: Context<'_>) -> f64 {
        (z.y - self.regression.eval(z.x)).abs()
    }

    fn point_prediction(&self, x: f64, _context: Context<'_>) -> Option<f64> {
        Some(self.regression.eval(x))
    }
}

/// `s(z) = Σ_k k·1{z = z_k}`: atom `z_k` scores `k`, anything else scores zero.
#[derive(Clone, Debug)]
pub struct RankScore {
    ranks: HashMap<(u64, u64), usize>,
}

impl RankScore {
    pub fn new(atoms: &[DataPoint]) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(atoms.len());
        for (k, p) in atoms.iter().enumerate() {
            if ranks.insert(key(p), k).is_some() {
                return Err(invalid(format!("duplicate atom at rank {k}")));
            }
        }
        Ok(Self { ranks })
    }
}

fn key(p: &DataPoint) -> (u64, u64) {
    // +0.0 and −0.0 are the same point
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

impl ScoreFunction for RankScore {
    fn memory(&self) -> usize {
        0
    }

    fn eval(&self, z: &DataPoint, _context: Context<'_>) -> f64 {
        self.ranks.get(&key(z)).map_or(0.0, |&k| k as f64)
    }
}

/// Linear autoregressive residual `|y − (c + b·x + Σ_j φ_j·y_{−j})|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArResidualScore {
    pub intercept: f64,
    pub slope: f64,
    /// `φ_1, …, φ_L`, coefficient of `y_{−j}` at index `j − 1`.
    pub lag_coefficients: Vec<f64>,
}

impl ArResidualScore {
    fn predict(&self, x: f64, context: Context<'_>) -> f64 {
        self.intercept
            + self.slope * x
            + self
                .lag_coefficients
                .iter()
                .zip(context.iter())
                .map(|(phi, z)| phi * z.y)
                .sum::<f64>()
    }
}

impl ScoreFunction for ArResidualScore {
    fn memory(&self) -> usize {
        self.lag_coefficients.len()
    }

    fn eval(&self, z: &DataPoint, context: Context<'_>) -> f64 {
        (z.y - self.predict(z.x, context)).abs()
    }

    fn point_prediction(&self, x: f64, context: Context<'_>) -> Option<f64> {
        Some(self.predict(x, context))
    }
}

/// Least-squares fit of [`ArResidualScore`] on the training block.
///
/// Regresses `Y_i` on `(1, X_i, Y_{i−1}, …, Y_{i−L})` for `i = L+1..=n0`.
/// Rank-deficient designs get the minimum-norm solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeastSquaresAr {
    pub memory: usize,
}

impl LeastSquaresAr {
    pub fn new(memory: usize) -> Self {
        Self { memory }
    }

    pub fn fit_ar(&self, training: &[DataPoint]) -> Result<ArResidualScore> {
        let memory = self.memory;
        let needed = memory + 2;
        if training.len() < needed {
            return Err(Error::TrainingBlockTooShort {
                needed,
                got: training.len(),
            });
        }
        let p = memory + 2;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut moment = DVector::<f64>::zeros(p);
        let mut row = vec![0.0; p];
        for i in memory..training.len() {
            row[0] = 1.0;
            row[1] = training[i].x;
            for j in 1..=memory {
                row[1 + j] = training[i - j].y;
            }
            let target = training[i].y;
            for a in 0..p {
                moment[a] += row[a] * target;
                for b in a..p {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let coef = min_norm_solve(gram, moment);
        Ok(ArResidualScore {
            intercept: coef[0],
            slope: coef[1],
            lag_coefficients: coef.iter().skip(2).copied().collect(),
        })
    }
}

/// Minimum-norm solution of the normal equations `G β = m` through the
/// eigendecomposition of the symmetric Gram matrix.
fn min_norm_solve(gram: DMatrix<f64>, moment: DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(gram);
    let largest = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = largest * 1e-12 * eig.eigenvalues.len() as f64;
    let projected = eig.eigenvectors.transpose() * moment;
    let scaled = DVector::from_iterator(
        projected.len(),
        projected
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(v, &lambda)| if lambda > cutoff { v / lambda } else { 0.0 }),
    );
    eig.eigenvectors * scaled
}

impl TrainingAlgorithm for LeastSquaresAr {
    fn memory(&self) -> usize {
        self.memory
    }

    fn fit(&self, training: &[DataPoint]) -> Result<Arc<dyn ScoreFunction>> {
        Ok(Arc::new(self.fit_ar(training)?))
    }
}

type ScoreClosure = dyn Fn(&DataPoint, Context<'_>) -> f64 + Send + Sync;

/// A score defined by a closure; the plug-in point for custom scores.
#[derive(Clone)]
pub struct FnScore {
    memory: usize,
    name: &'static str,
    f: Arc<ScoreClosure>,
}

impl FnScore {
    pub fn new<F>(name: &'static str, memory: usize, f: F) -> Self
    where
        F: Fn(&DataPoint, Context<'_>) -> f64 + Send + Sync + 'static,
    {
        Self {
            memory,
            name,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnScore")
            .field("name", &self.name)
            .field("memory", &self.memory)
            .finish()
    }
}

impl ScoreFunction for FnScore {
    fn memory(&self) -> usize {
        self.memory
    }

    fn eval(&self, z: &DataPoint, context: Context<'_>) -> f64 {
        (self.f)(z, context)
    }
}

type FitClosure = dyn Fn(&[DataPoint]) -> Result<Arc<dyn ScoreFunction>> + Send + Sync;

/// A training algorithm defined by a closure.
#[derive(Clone)]
pub struct FnTraining {
    memory: usize,
    name: &'static str,
    fit: Arc<FitClosure>,
}

impl FnTraining {
    pub fn new<F>(name: &'static str, memory: usize, fit: F) -> Self
    where
        F: Fn(&[DataPoint]) -> Result<Arc<dyn ScoreFunction>> + Send + Sync + 'static,
    {
        Self {
            memory,
            name,
            fit: Arc::new(fit),
        }
    }
}

impl fmt::Debug for FnTraining {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnTraining")
            .field("name", &self.name)
            .field("memory", &self.memory)
            .finish()
    }
}

impl TrainingAlgorithm for FnTraining {
    fn memory(&self) -> usize {
        self.memory
    }

    fn fit(&self, training: &[DataPoint]) -> Result<Arc<dyn ScoreFunction>> {
        let score = (self.fit)(training)?;
        if score.memory() != self.memory {
            return Err(invalid(format!(
                "training algorithm declared memory {} but returned a score with memory {}",
                self.memory,
                score.memory()
            )));
        }
        Ok(score)
    }
}

/// `s(z) = y`, injective on embedded finite states.
pub fn state_value_score() -> FnScore {
    FnScore::new("state_value", 0, |z, _| z.y)
}

/// `s(z; z_{−1}, …, z_{−L}) = |y − mean(y_{−1}, …, y_{−L})|`; plain `|y|` when `L = 0`.
pub fn lag_mean_residual_score(memory: usize) -> FnScore {
    FnScore::new("lag_mean_residual", memory, move |z, ctx| {
        if ctx.is_empty() {
            return z.y.abs();
        }
        let mean = ctx.iter().map(|p| p.y).sum::<f64>() / ctx.len() as f64;
        (z.y - mean).abs()
    })
}

/// Finite-valued training algorithm for state sequences.
///
/// Fits the most frequent response in the training block (smallest on ties)
/// and scores `1{y ≠ mode} + 2·#{j ≤ L : y ≠ y_{−j}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeMatch {
    pub memory: usize,
}

impl ModeMatch {
    pub fn new(memory: usize) -> Self {
        Self { memory }
    }

    /// Most frequent `y` value, smallest on ties.
    pub fn mode_of(training: &[DataPoint]) -> f64 {
        let mut values: Vec<f64> = training.iter().map(|p| p.y).collect();
        values.sort_by(f64::total_cmp);
        let mut best = (0usize, f64::NAN);
        let mut i = 0;
        while i < values.len() {
            let j = values[i..].iter().take_while(|&&v| v == values[i]).count();
            if j > best.0 {
                best = (j, values[i]);
            }
            i += j;
        }
        best.1
    }
}

impl TrainingAlgorithm for ModeMatch {
    fn memory(&self) -> usize {
        self.memory
    }

    fn fit(&self, training: &[DataPoint]) -> Result<Arc<dyn ScoreFunction>> {
        if training.is_empty() {
            return Err(Error::TrainingBlockTooShort { needed: 1, got: 0 });
        }
        let mode = Self::mode_of(training);
        Ok(Arc::new(FnScore::new(
            "mode_match",
            self.memory,
            move |z, ctx| {
                let misses = ctx.iter().filter(|p| p.y != z.y).count();
                f64::from(u8::from(z.y != mode)) + 2.0 * misses as f64
            },
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{MaProcess, TimeSeries};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pts(ys: &[f64]) -> Vec<DataPoint> {
        ys.iter()
            .enumerate()
            .map(|(i, &y)| DataPoint::new(i as f64, y))
            .collect()
    }

    #[test]
    fn memoryless_residuals_in_order() {
        let s = ResidualScore::new(RegressionFn::Zero);
        let points = pts(&[1.0, -2.0, 3.5]);
        let v = score_series(&s, &points, 1).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.5]);
    }

    #[test]
    fn residual_score_examples() {
        let f = RegressionFn::Linear {
            intercept: 1.0,
            slope: 2.0,
        };
        let s = ResidualScore::new(f);
        let x = 0.7;
        assert_eq!(s.eval(&DataPoint::new(x, f.eval(x)), Context::empty()), 0.0);
        assert!(
            (s.eval(&DataPoint::new(x, f.eval(x) + 2.0), Context::empty()) - 2.0).abs() < 1e-12
        );
        let up = s.eval(&DataPoint::new(x, f.eval(x) + 0.3), Context::empty());
        let down = s.eval(&DataPoint::new(x, f.eval(x) - 0.3), Context::empty());
        assert!((up - down).abs() < 1e-12);
    }

    #[test]
    fn memory_one_scores_read_previous_point() {
        // s(z; z_{-1}) = y − y_{−1}, n = 3
        let s = FnScore::new("diff", 1, |z, ctx| z.y - ctx.lag(1).y);
        let points = pts(&[1.0, 4.0, 9.0, 16.0]);
        let v = score_series(&s, &points, 2).unwrap();
        assert_eq!(v.as_slice(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn context_is_most_recent_first() {
        let s = FnScore::new("order", 3, |_, ctx| {
            let lags: Vec<f64> = ctx.iter().map(|p| p.y).collect();
            assert_eq!(lags.len(), 3);
            lags[0] * 100.0 + lags[1] * 10.0 + lags[2]
        });
        let points = pts(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(score_series(&s, &points, 4).unwrap().as_slice(), &[321.0]);
    }

    #[test]
    fn full_memory_single_score() {
        let n = 5;
        let s = lag_mean_residual_score(n);
        let points = pts(&[1.0, 1.0, 1.0, 1.0, 1.0, 4.0]);
        let v = score_series(&s, &points, n + 1).unwrap();
        assert_eq!(v.as_slice(), &[3.0]);
    }

    #[test]
    fn insufficient_context_rejected() {
        let s = lag_mean_residual_score(2);
        let err = score_series(&s, &pts(&[1.0, 2.0, 3.0]), 2).unwrap_err();
        assert!(err.to_string().starts_with("insufficient context"));
    }

    #[test]
    fn output_length() {
        let points = pts(&[0.0; 12]);
        for memory in 0..4 {
            let s = lag_mean_residual_score(memory);
            for from in memory + 1..=12 {
                assert_eq!(
                    score_series(&s, &points, from).unwrap().len(),
                    12 - from + 1
                );
            }
        }
    }

    #[test]
    fn rank_score_examples() {
        let atoms: Vec<DataPoint> = (0..5)
            .map(|k| DataPoint::new(k as f64, -(k as f64)))
            .collect();
        let s = RankScore::new(&atoms).unwrap();
        assert_eq!(s.eval(&atoms[0], Context::empty()), 0.0);
        assert_eq!(s.eval(&atoms[4], Context::empty()), 4.0);
        assert_eq!(s.eval(&DataPoint::new(0.5, 0.5), Context::empty()), 0.0);
        let dup = vec![atoms[1], atoms[2], atoms[1]];
        assert!(RankScore::new(&dup).is_err());
    }

    #[test]
    fn least_squares_recovers_noiseless_linear_ar() {
        // y_i = 0.5 + 2 x_i − 0.3 y_{i−1}
        let mut points = vec![DataPoint::new(0.1, 1.0)];
        for i in 1..40 {
            let x = ((i * 37) % 11) as f64 / 11.0;
            let y = 0.5 + 2.0 * x - 0.3 * points[i - 1].y;
            points.push(DataPoint::new(x, y));
        }
        let algo = LeastSquaresAr::new(1);
        let fitted = algo.fit_ar(&points).unwrap();
        assert!((fitted.intercept - 0.5).abs() < 1e-9);
        assert!((fitted.slope - 2.0).abs() < 1e-9);
        assert!((fitted.lag_coefficients[0] + 0.3).abs() < 1e-9);
        let scores = score_series(&fitted, &points, 2).unwrap();
        assert!(scores.as_slice().iter().all(|&s| s < 1e-9));
    }

    #[test]
    fn memory_zero_is_simple_regression() {
        let points: Vec<DataPoint> = [(0.0, 1.0), (1.0, 2.0), (2.0, 2.0), (3.0, 5.0)]
            .iter()
            .map(|&(x, y)| DataPoint::new(x, y))
            .collect();
        let fitted = LeastSquaresAr::new(0).fit_ar(&points).unwrap();
        // closed-form OLS: slope = Sxy/Sxx = 5/5, intercept = ȳ − slope·x̄ = 2.5 − 1.5
        assert!((fitted.slope - 1.2).abs() < 1e-12, "slope {}", fitted.slope);
        assert!((fitted.intercept - 0.7).abs() < 1e-12);
        assert!(fitted.lag_coefficients.is_empty());
    }

    #[test]
    fn rank_deficient_design_uses_min_norm() {
        // constant x: intercept and slope are collinear, min-norm splits the level
        let points: Vec<DataPoint> = (0..6).map(|_| DataPoint::new(1.0, 3.0)).collect();
        let fitted = LeastSquaresAr::new(0).fit_ar(&points).unwrap();
        assert!((fitted.intercept - 1.5).abs() < 1e-9);
        assert!((fitted.slope - 1.5).abs() < 1e-9);
        // two rows, four unknowns
        let short: Vec<DataPoint> = [(0.2, 1.0), (0.5, 2.0), (0.9, 0.5), (0.4, 1.5)]
            .iter()
            .map(|&(x, y)| DataPoint::new(x, y))
            .collect();
        let fitted = LeastSquaresAr::new(2).fit_ar(&short).unwrap();
        let scores = score_series(&fitted, &short, 3).unwrap();
        assert!(scores.as_slice().iter().all(|&s| s < 1e-9));
    }

    #[test]
    fn training_block_too_short() {
        let err = LeastSquaresAr::new(2)
            .fit_ar(&pts(&[1.0, 2.0, 3.0]))
            .unwrap_err();
        assert!(err.to_string().starts_with("training block too short"));
    }

    #[test]
    fn refit_is_bitwise_deterministic() {
        let ts: TimeSeries = MaProcess::new(2).sample(120, &mut ChaCha8Rng::seed_from_u64(9));
        let algo = LeastSquaresAr::new(2);
        let a = algo.fit_ar(&ts.points()[..60]).unwrap();
        let copy = ts.points()[..60].to_vec();
        let b = algo.fit_ar(&copy).unwrap();
        assert_eq!(a, b);
        let sa = score_series(&a, ts.points(), 3).unwrap();
        let sb = score_series(&b, ts.points(), 3).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn fit_ignores_data_past_the_block() {
        let mut points = MaProcess::new(1)
            .sample(80, &mut ChaCha8Rng::seed_from_u64(10))
            .into_points();
        let algo = LeastSquaresAr::new(1);
        let before = algo.fit_ar(&points[..40]).unwrap();
        for p in points[40..].iter_mut() {
            p.y += 100.0;
        }
        let after = algo.fit_ar(&points[..40]).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn fn_training_checks_declared_memory() {
        let algo = FnTraining::new("bad", 1, |_| {
            Ok(Arc::new(state_value_score()) as Arc<dyn ScoreFunction>)
        });
        assert!(algo.fit(&pts(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn jitter_is_small_and_deterministic() {
        for i in 0..1000 {
            let j = jitter(42, i);
            assert!((0.0..JITTER_SCALE).contains(&j));
            assert_eq!(j, jitter(42, i));
        }
        let mean: f64 = (0..100_000).map(|i| jitter_unit(7, i)).sum::<f64>() / 100_000.0;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn mode_match_scores() {
        let training = pts(&[2.0, 1.0, 2.0, 1.0, 0.0]);
        assert_eq!(ModeMatch::mode_of(&training), 1.0);
        let s = ModeMatch::new(1).fit(&training).unwrap();
        let ctx = [DataPoint::new(0.0, 1.0)];
        assert_eq!(
            s.eval(&DataPoint::new(0.0, 1.0), Context::from_chronological(&ctx)),
            0.0
        );
        assert_eq!(
            s.eval(&DataPoint::new(0.0, 2.0), Context::from_chronological(&ctx)),
            3.0
        );
        assert!(ModeMatch::new(0).fit(&[]).is_err());
    }
}

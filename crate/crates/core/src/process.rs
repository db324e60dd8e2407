//! Synthetic time-series generators and exact joint laws for finite processes.
//!
//! Three families are provided:
//!
//! * [`MaProcess`]: `Y_i = f(X_i) + ε_i` with `ε_i = W_{i−t} + … + W_i` and
//!   `W_j` iid standard Gaussian. The noise uses exactly `W_{1−t}, …, W_{n+1}`.
//! * [`CyclicMixture`]: with probability `b/4` a deterministic walk
//!   `J_{i+1} = J_i + 1 mod K` from a uniform start, otherwise `n+1` iid uniform
//!   draws from `K` atoms.
//! * [`FiniteMarkov`]: a finite-state chain.
//!
//! Finite-state processes embed state `a` as the data point `(a, a)`.

use std::f64::consts::TAU;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest number of cells a dense [`FiniteDistribution`] may hold.
pub const MAX_CELLS: usize = 10_000_000;

const STOCHASTIC_TOL: f64 = 1e-12;

/// One observation `Z_i = (X_i, Y_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
}

impl DataPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Embedding of a finite state.
    pub fn state(a: usize) -> Self {
        Self::new(a as f64, a as f64)
    }
}

/// `Z_1, …, Z_{n+1}`; the last point is the test point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    points: Vec<DataPoint>,
}

impl TimeSeries {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("a time series needs at least one point"));
        }
        Ok(Self { points })
    }

    /// Sample-size parameter: the series holds `n + 1` points.
    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    /// `Z_1, …, Z_n`.
    pub fn history(&self) -> &[DataPoint] {
        &self.points[..self.points.len() - 1]
    }

    /// `Z_{n+1}`.
    pub fn test_point(&self) -> DataPoint {
        self.points[self.points.len() - 1]
    }

    pub fn into_points(self) -> Vec<DataPoint> {
        self.points
    }
}

/// Known regression function `f` in `Y = f(X) + ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressionFn {
    /// `sin(2πx)`
    #[default]
    Sin2Pi,
    Linear {
        intercept: f64,
        slope: f64,
    },
    Zero,
}

impl RegressionFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Sin2Pi => (TAU * x).sin(),
            Self::Linear { intercept, slope } => intercept + slope * x,
            Self::Zero => 0.0,
        }
    }
}

/// Law of the iid covariates `X_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateLaw {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, sd: f64 },
    Constant { value: f64 },
}

impl Default for CovariateLaw {
    fn default() -> Self {
        Self::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

impl CovariateLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                Err(invalid(format!(
                    "uniform covariate needs low < high, got [{low}, {high}]"
                )))
            }
            Self::Gaussian { mean, sd } if !(mean.is_finite() && sd.is_finite() && sd > 0.0) => {
                Err(invalid(format!(
                    "gaussian covariate needs sd > 0, got {sd}"
                )))
            }
            Self::Constant { value } if !value.is_finite() => {
                Err(invalid("constant covariate must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Self::Gaussian { mean, sd } => {
                let w: f64 = StandardNormal.sample(rng);
                mean + sd * w
            }
            Self::Constant { value } => value,
        }
    }
}

/// Regression model with `MA(t)` noise with unit coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaProcess {
    pub order: usize,
    #[serde(default)]
    pub regression: RegressionFn,
    #[serde(default)]
    pub covariate: CovariateLaw,
}

impl MaProcess {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            regression: RegressionFn::default(),
            covariate: CovariateLaw::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.covariate.validate()
    }

    /// Draws `n + 1` points.
    ///
    /// Draw order: `W_{1−t}, …, W_{n+1}`, then `X_1, …, X_{n+1}`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> TimeSeries {
        let mut out = Vec::with_capacity(n + 1);
        let mut noise = Vec::with_capacity(n + 1 + self.order);
        self.sample_into(n, rng, &mut out, &mut noise);
        TimeSeries { points: out }
    }

    /// Allocation-free variant of [`MaProcess::sample`] for hot loops.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        out: &mut Vec<DataPoint>,
        noise: &mut Vec<f64>,
    ) {
        let t = self.order;
        noise.clear();
        noise.extend((0..n + 1 + t).map(|_| -> f64 { StandardNormal.sample(rng) }));
        out.clear();
        // noise[j] holds W_{j+1−t}; ε_i sums noise[i−1 ..= i−1+t]
        let mut window: f64 = noise[..t].iter().sum();
        for i in 0..=n {
            window += noise[i + t];
            let x = self.covariate.sample(rng);
            out.push(DataPoint::new(x, self.regression.eval(x) + window));
            window -= noise[i];
        }
    }

    /// Exact `β(τ)` bound for `τ = 0..=max_lag`.
    ///
    /// Blocks `(Z_1..Z_k)` and `(Z_{k+τ+1}..)` read disjoint noise once `τ ≥ t`,
    /// so `β(τ) = 0` there. Shorter lags get the trivial bound `1`.
    pub fn beta_table(&self, max_lag: usize) -> Vec<(f64, Provenance)> {
        (0..=max_lag)
            .map(|tau| {
                if tau >= self.order {
                    (0.0, Provenance::Analytic)
                } else {
                    (1.0, Provenance::UpperBound)
                }
            })
            .collect()
    }
}

/// Where a dependence coefficient came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Computed by exact enumeration of a finite joint law.
    Exact,
    /// Closed-form value.
    Analytic,
    /// A valid upper bound, not the value itself.
    UpperBound,
}

/// Shared behaviour of finite-alphabet processes.
pub trait FiniteProcess: Send + Sync {
    fn alphabet_size(&self) -> usize;

    /// Exact joint law of `(Z_1, …, Z_len)` as state indices.
    fn joint_pmf(&self, len: usize) -> Result<FiniteDistribution>;

    /// Draws `len` states.
    fn sample_states(&self, len: usize, rng: &mut dyn RngCore, out: &mut Vec<usize>);

    /// Whether `joint_pmf` is shift-invariant for every length.
    fn is_stationary(&self) -> bool;
}

/// Mixture `(b/4)·P_cyclic + (1 − b/4)·Q^{n+1}` over `K` atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicMixture {
    pub k: usize,
    pub b: f64,
    /// Atoms `z_0, …, z_{K−1}`; `None` uses the state embedding `z_j = (j, j)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<DataPoint>>,
}

impl CyclicMixture {
    pub fn new(k: usize, b: f64) -> Result<Self> {
        let spec = Self { k, b, atoms: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_atoms(atoms: Vec<DataPoint>, b: f64) -> Result<Self> {
        let spec = Self {
            k: atoms.len(),
            b,
            atoms: Some(atoms),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("cyclic mixture needs K >= 1"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(invalid(format!(
                "mixture parameter b must lie in [0, 1], got {}",
                self.b
            )));
        }
        if let Some(atoms) = &self.atoms {
            if atoms.len() != self.k {
                return Err(invalid("atom list length must equal K"));
            }
            let mut keys: Vec<(u64, u64)> = atoms
                .iter()
                .map(|p| (p.x.to_bits(), p.y.to_bits()))
                .collect();
            keys.sort_unstable();
            if keys.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid("cyclic mixture atoms must be pairwise distinct"));
            }
        }
        Ok(())
    }

    /// The atom `z_j`.
    pub fn atom(&self, j: usize) -> DataPoint {
        match &self.atoms {
            Some(atoms) => atoms[j],
            None => DataPoint::state(j),
        }
    }

    pub fn atoms(&self) -> Vec<DataPoint> {
        (0..self.k).map(|j| self.atom(j)).collect()
    }

    /// Upper bound `1 − (1 − b/4)²` on every `β(τ)`.
    pub fn beta_upper_bound(&self) -> f64 {
        let keep = 1.0 - self.b / 4.0;
        1.0 - keep * keep
    }

    /// Draws `n + 1` points; returns whether the cyclic branch was taken.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (TimeSeries, bool) {
        let mut states = Vec::with_capacity(n + 1);
        let cyclic = self.sample_branch(n + 1, rng, &mut states);
        let points = states.into_iter().map(|j| self.atom(j)).collect();
        (TimeSeries { points }, cyclic)
    }

    fn sample_branch<R: Rng + ?Sized>(
        &self,
        len: usize,
        rng: &mut R,
        out: &mut Vec<usize>,
    ) -> bool {
        out.clear();
        let cyclic = rng.random::<f64>() < self.b / 4.0;
        if cyclic {
            let start = rng.random_range(0..self.k);
            out.extend((0..len).map(|i| (start + i) % self.k));
        } else {
            out.extend((0..len).map(|_| rng.random_range(0..self.k)));
        }
        cyclic
    }
}

impl FiniteProcess for CyclicMixture {
    fn alphabet_size(&self) -> usize {
        self.k
    }

    fn joint_pmf(&self, len: usize) -> Result<FiniteDistribution> {
        let k = self.k;
        let cells = checked_cells(k, len)?;
        let weight = self.b / 4.0;
        let iid_mass = (1.0 - weight) / cells as f64;
        let mut pmf = vec![iid_mass; cells];
        let cyclic_mass = weight / k as f64;
        let mut seq = vec![0usize; len];
        for start in 0..k {
            for (i, s) in seq.iter_mut().enumerate() {
                *s = (start + i) % k;
            }
            pmf[encode(&seq, k)] += cyclic_mass;
        }
        FiniteDistribution::new(k, len, pmf)
    }

    fn sample_states(&self, len: usize, rng: &mut dyn RngCore, out: &mut Vec<usize>) {
        self.sample_branch(len, rng, out);
    }

    fn is_stationary(&self) -> bool {
        true
    }
}

/// Finite-state Markov chain with an explicit initial law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMarkov {
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

impl FiniteMarkov {
    pub fn new(transition: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let chain = Self {
            transition,
            initial,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Chain started from its stationary law.
    pub fn stationary(transition: Vec<Vec<f64>>) -> Result<Self> {
        let a = transition.len();
        let mut chain = Self {
            transition,
            initial: vec![1.0 / a.max(1) as f64; a],
        };
        chain.validate()?;
        chain.initial = chain.stationary_distribution()?;
        Ok(chain)
    }

    /// iid draws from `marginal`.
    pub fn iid(marginal: Vec<f64>) -> Result<Self> {
        let rows = vec![marginal.clone(); marginal.len()];
        Self::new(rows, marginal)
    }

    /// Two states that stay put with probability `stay`, uniform start.
    pub fn two_state(stay: f64) -> Result<Self> {
        Self::new(
            vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
            vec![0.5, 0.5],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.transition.len();
        if a < 2 {
            return Err(invalid("a finite chain needs at least two states"));
        }
        check_probability_vector(&self.initial, a, "initial distribution")?;
        for (i, row) in self.transition.iter().enumerate() {
            check_probability_vector(row, a, &format!("transition row {i}"))?;
        }
        Ok(())
    }

    /// Solves `πP = π`, `Σπ = 1` by Gaussian elimination.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let a = self.transition.len();
        // rows 0..a-1 of (Pᵀ − I)π = 0, last row replaced by Σπ = 1
        let mut m = vec![vec![0.0; a + 1]; a];
        for (i, row) in m.iter_mut().enumerate().take(a - 1) {
            for (j, cell) in row.iter_mut().enumerate().take(a) {
                *cell = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        m[a - 1] = vec![1.0; a + 1];
        for col in 0..a {
            let pivot = (col..a)
                .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
                .expect("non-empty range");
            if m[pivot][col].abs() < 1e-14 {
                return Err(invalid("chain has no unique stationary distribution"));
            }
            m.swap(col, pivot);
            for r in 0..a {
                if r != col {
                    let factor = m[r][col] / m[col][col];
                    for c in col..=a {
                        m[r][c] -= factor * m[col][c];
                    }
                }
            }
        }
        let pi: Vec<f64> = (0..a).map(|i| (m[i][a] / m[i][i]).max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        Ok(pi.into_iter().map(|p| p / total).collect())
    }

    fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the last partial sum
        probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(probs.len() - 1)
    }

    /// Draws `n + 1` states embedded as data points.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> TimeSeries {
        let mut states = Vec::with_capacity(n + 1);
        self.sample_states(n + 1, rng, &mut states);
        TimeSeries {
            points: states.into_iter().map(DataPoint::state).collect(),
        }
    }
}

impl FiniteProcess for FiniteMarkov {
    fn alphabet_size(&self) -> usize {
        self.transition.len()
    }

    fn joint_pmf(&self, len: usize) -> Result<FiniteDistribution> {
        let a = self.alphabet_size();
        let cells = checked_cells(a, len)?;
        if len == 0 {
            return FiniteDistribution::new(a, 0, vec![1.0]);
        }
        // extend one position at a time: index(seq·s) = index(seq)·A + s
        let mut pmf = self.initial.clone();
        for _ in 1..len {
            let mut next = Vec::with_capacity(pmf.len() * a);
            for (idx, &p) in pmf.iter().enumerate() {
                let last = idx % a;
                next.extend(self.transition[last].iter().map(|&q| p * q));
            }
            pmf = next;
        }
        debug_assert_eq!(pmf.len(), cells);
        FiniteDistribution::new(a, len, pmf)
    }

    fn sample_states(&self, len: usize, rng: &mut dyn RngCore, out: &mut Vec<usize>) {
        out.clear();
        if len == 0 {
            return;
        }
        let mut state = Self::draw(&self.initial, rng);
        out.push(state);
        for _ in 1..len {
            state = Self::draw(&self.transition[state], rng);
            out.push(state);
        }
    }

    fn is_stationary(&self) -> bool {
        match self.stationary_distribution() {
            Ok(pi) => pi
                .iter()
                .zip(&self.initial)
                .all(|(a, b)| (a - b).abs() < 1e-12),
            Err(_) => false,
        }
    }
}

fn check_probability_vector(v: &[f64], len: usize, what: &str) -> Result<()> {
    if v.len() != len {
        return Err(invalid(format!(
            "{what} has length {}, expected {len}",
            v.len()
        )));
    }
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// `A^len`, refusing anything above [`MAX_CELLS`].
pub fn checked_cells(alphabet: usize, len: usize) -> Result<usize> {
    let cells = (alphabet as u128)
        .checked_pow(len as u32)
        .unwrap_or(u128::MAX);
    if cells > MAX_CELLS as u128 {
        return Err(Error::StateSpaceTooLarge {
            cells,
            cap: MAX_CELLS,
        });
    }
    Ok(cells as usize)
}

/// Dense index of `seq`, first symbol most significant.
pub fn encode(seq: &[usize], alphabet: usize) -> usize {
    seq.iter().fold(0, |acc, &s| acc * alphabet + s)
}

/// Inverse of [`encode`].
pub fn decode_into(mut index: usize, alphabet: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % alphabet;
        index /= alphabet;
    }
}

/// Explicit joint pmf over `{0, …, A−1}^len`, stored densely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    alphabet: usize,
    len: usize,
    pmf: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(alphabet: usize, len: usize, pmf: Vec<f64>) -> Result<Self> {
        if alphabet == 0 {
            return Err(invalid("alphabet must be non-empty"));
        }
        let cells = checked_cells(alphabet, len)?;
        if pmf.len() != cells {
            return Err(Error::ShapeMismatch(format!(
                "pmf has {} cells, expected {alphabet}^{len} = {cells}",
                pmf.len()
            )));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { alphabet, len, pmf })
    }

    /// Point mass on `seq`.
    pub fn point_mass(alphabet: usize, seq: &[usize]) -> Result<Self> {
        let cells = checked_cells(alphabet, seq.len())?;
        if seq.iter().any(|&s| s >= alphabet) {
            return Err(invalid("symbol outside alphabet"));
        }
        let mut pmf = vec![0.0; cells];
        pmf[encode(seq, alphabet)] = 1.0;
        Self::new(alphabet, seq.len(), pmf)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn probability(&self, seq: &[usize]) -> f64 {
        if seq.len() != self.len || seq.iter().any(|&s| s >= self.alphabet) {
            return 0.0;
        }
        self.pmf[encode(seq, self.alphabet)]
    }

    /// Visits every cell with positive mass.
    pub fn for_each_support<F: FnMut(&[usize], f64)>(&self, mut visit: F) {
        let mut seq = vec![0usize; self.len];
        for (idx, &p) in self.pmf.iter().enumerate() {
            if p > 0.0 {
                decode_into(idx, self.alphabet, &mut seq);
                visit(&seq, p);
            }
        }
    }

    /// Law of `(Z_{p_1}, …, Z_{p_r})` for 0-based `positions`, in the given order.
    pub fn marginal(&self, positions: &[usize]) -> Result<Self> {
        if let Some(&p) = positions.iter().find(|&&p| p >= self.len) {
            return Err(invalid(format!(
                "position {p} outside sequence of length {}",
                self.len
            )));
        }
        let a = self.alphabet;
        let cells = checked_cells(a, positions.len())?;
        let mut out = vec![0.0; cells];
        let mut seq = vec![0usize; self.len];
        for (idx, &p) in self.pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode_into(idx, a, &mut seq);
            let target = positions.iter().fold(0, |acc, &pos| acc * a + seq[pos]);
            out[target] += p;
        }
        Ok(Self {
            alphabet: a,
            len: positions.len(),
            pmf: out,
        })
    }

    /// Law of the concatenation of independent draws from `self` and `other`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.alphabet != other.alphabet {
            return Err(Error::ShapeMismatch(
                "product needs a common alphabet".into(),
            ));
        }
        let cells = checked_cells(self.alphabet, self.len + other.len)?;
        let mut pmf = Vec::with_capacity(cells);
        for &p in &self.pmf {
            pmf.extend(other.pmf.iter().map(|&q| p * q));
        }
        Ok(Self {
            alphabet: self.alphabet,
            len: self.len + other.len,
            pmf,
        })
    }

    /// Pushforward under `map`, which writes a sequence over `target_alphabet`
    /// of length `target_len` for every supported input sequence.
    pub fn pushforward<F>(
        &self,
        target_alphabet: usize,
        target_len: usize,
        mut map: F,
    ) -> Result<Self>
    where
        F: FnMut(&[usize], &mut [usize]),
    {
        if target_alphabet == 0 {
            return Err(invalid("target alphabet must be non-empty"));
        }
        let cells = checked_cells(target_alphabet, target_len)?;
        let mut out = vec![0.0; cells];
        let mut image = vec![0usize; target_len];
        let mut bad = false;
        self.for_each_support(|seq, p| {
            map(seq, &mut image);
            if image.iter().any(|&s| s >= target_alphabet) {
                bad = true;
                return;
            }
            out[encode(&image, target_alphabet)] += p;
        });
        if bad {
            return Err(invalid(
                "pushforward map produced a symbol outside the target alphabet",
            ));
        }
        Ok(Self {
            alphabet: target_alphabet,
            len: target_len,
            pmf: out,
        })
    }
}

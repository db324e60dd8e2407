//! Deletion operators, switch coefficients and β-mixing coefficients.
//!
//! Everything here is exact: laws are explicit [`FiniteDistribution`]s and
//! total variation is a finite sum. Positions are 1-based in the public
//! deletion API to match the usual `w_1, …, w_m` indexing; the returned index
//! vectors are 0-based so they can be fed to [`FiniteDistribution::marginal`].

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::{DataPoint, FiniteDistribution, Provenance};
use crate::scoring::{score_series_into, ScoreFunction, TrainingAlgorithm};

/// Which of the two subvectors a deletion produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `Δ⁰`: the last entry stays last.
    KeepEnd,
    /// `Δ¹`: `w_k` ends up last.
    EndAtK,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::KeepEnd, Variant::EndAtK];

    pub fn from_index(j: u8) -> Result<Self> {
        match j {
            0 => Ok(Variant::KeepEnd),
            1 => Ok(Variant::EndAtK),
            _ => Err(invalid(format!("deletion variant must be 0 or 1, got {j}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Variant::KeepEnd => 0,
            Variant::EndAtK => 1,
        }
    }
}

/// Deletion of `tau` entries around position `k` of a length-`m` vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionSpec {
    pub k: usize,
    pub tau: usize,
    pub variant: Variant,
}

impl DeletionSpec {
    pub fn new(k: usize, tau: usize, variant: Variant) -> Self {
        Self { k, tau, variant }
    }
}

/// 0-based positions kept by the deletion, in output order. Length `m − tau`.
pub fn deletion_indices(m: usize, spec: DeletionSpec) -> Result<Vec<usize>> {
    let DeletionSpec { k, tau, variant } = spec;
    if m == 0 || k == 0 || k > m {
        return Err(invalid(format!("k = {k} outside [1, {m}]")));
    }
    if tau >= m {
        return Err(invalid(format!("tau = {tau} outside [0, {}]", m - 1)));
    }
    // 1-based inclusive ranges, shifted to 0-based at the end
    let ranges: [(usize, usize); 2] = if k + tau < m {
        match variant {
            Variant::KeepEnd => [(1, m - tau - k), (m - k + 1, m)],
            Variant::EndAtK => [(k + tau + 1, m), (1, k)],
        }
    } else {
        match variant {
            Variant::KeepEnd => [(tau + 1, m), (1, 0)],
            Variant::EndAtK => [(k + tau + 1 - m, k), (1, 0)],
        }
    };
    let out: Vec<usize> = ranges
        .iter()
        .flat_map(|&(a, b)| (a..=b).map(|i| i - 1))
        .collect();
    debug_assert_eq!(out.len(), m - tau);
    Ok(out)
}

/// Applies a deletion to a generic vector.
pub fn delete<T: Clone>(w: &[T], spec: DeletionSpec) -> Result<Vec<T>> {
    Ok(deletion_indices(w.len(), spec)?
        .into_iter()
        .map(|i| w[i].clone())
        .collect())
}

/// Deletion acting on the calibration part of a length `n0 + n1 + 1` series:
/// the training block is kept, the first `tau_star` calibration entries are
/// dropped and the remainder is deleted as in [`deletion_indices`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDeletionSpec {
    pub n0: usize,
    pub n1: usize,
    pub k: usize,
    pub tau: usize,
    pub tau_star: usize,
    pub variant: Variant,
}

impl SplitDeletionSpec {
    /// Whether `k` falls in the lower range `1 ≤ k ≤ n1 − tau − tau_star`.
    pub fn is_lower_range(&self) -> bool {
        self.k + self.tau + self.tau_star <= self.n1
    }
}

/// 0-based positions kept by a split deletion, in output order.
pub fn split_deletion_indices(spec: SplitDeletionSpec) -> Result<Vec<usize>> {
    let SplitDeletionSpec {
        n0,
        n1,
        k,
        tau,
        tau_star,
        variant,
    } = spec;
    if tau + tau_star > n1 {
        return Err(invalid(format!(
            "tau + tau_star = {} exceeds n1 = {n1}",
            tau + tau_star
        )));
    }
    if k == 0 || k > n1 + 1 - tau_star {
        return Err(invalid(format!(
            "k = {k} outside [1, {}]",
            n1 + 1 - tau_star
        )));
    }
    let tail_start = n0 + tau_star;
    let tail_len = n1 + 1 - tau_star;
    let inner = deletion_indices(tail_len, DeletionSpec { k, tau, variant })?;
    Ok((0..n0)
        .chain(inner.into_iter().map(|i| tail_start + i))
        .collect())
}

/// Applies a split deletion to a generic vector of length `n0 + n1 + 1`.
pub fn delete_split<T: Clone>(w: &[T], spec: SplitDeletionSpec) -> Result<Vec<T>> {
    if w.len() != spec.n0 + spec.n1 + 1 {
        return Err(Error::ShapeMismatch(format!(
            "vector has length {}, expected n0 + n1 + 1 = {}",
            w.len(),
            spec.n0 + spec.n1 + 1
        )));
    }
    Ok(split_deletion_indices(spec)?
        .into_iter()
        .map(|i| w[i].clone())
        .collect())
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    if p.alphabet() != q.alphabet() || p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "cannot compare laws over {}^{} and {}^{}",
            p.alphabet(),
            p.len(),
            q.alphabet(),
            q.len()
        )));
    }
    let half: f64 = p
        .pmf()
        .iter()
        .zip(q.pmf())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / 2.0;
    Ok(half.min(1.0))
}

/// Law of a real-valued map of the sequence, with distinct values interned as
/// symbols `0..V` in increasing order. Returns the law and the sorted values.
pub fn pushforward_values<F>(
    joint: &FiniteDistribution,
    out_len: usize,
    mut map: F,
) -> Result<(FiniteDistribution, Vec<f64>)>
where
    F: FnMut(&[usize], &mut Vec<f64>) -> Result<()>,
{
    let mut images: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut err = None;
    let mut buf = Vec::with_capacity(out_len);
    joint.for_each_support(|seq, p| {
        if err.is_some() {
            return;
        }
        buf.clear();
        if let Err(e) = map(seq, &mut buf) {
            err = Some(e);
            return;
        }
        images.push((buf.clone(), p));
    });
    if let Some(e) = err {
        return Err(e);
    }
    if let Some((bad, _)) = images.iter().find(|(v, _)| v.len() != out_len) {
        return Err(Error::ShapeMismatch(format!(
            "map produced {} values, expected {out_len}",
            bad.len()
        )));
    }
    let mut values: Vec<f64> = images.iter().flat_map(|(v, _)| v.iter().copied()).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("score map produced a non-finite value"));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let alphabet = values.len().max(1);
    let cells = crate::process::checked_cells(alphabet, out_len)?;
    let mut pmf = vec![0.0; cells];
    for (image, p) in &images {
        let idx = image.iter().fold(0usize, |acc, v| {
            let sym = values
                .binary_search_by(|probe| probe.total_cmp(v))
                .expect("value was interned");
            acc * alphabet + sym
        });
        pmf[idx] += p;
    }
    Ok((FiniteDistribution::new(alphabet, out_len, pmf)?, values))
}

fn embed(seq: &[usize], points: &mut Vec<DataPoint>) {
    points.clear();
    points.extend(seq.iter().map(|&a| DataPoint::state(a)));
}

/// Law of `S = (S_{L+1}, …, S_{n+1})` for a pretrained score on the state
/// embedding `a ↦ (a, a)`.
pub fn score_law(
    joint: &FiniteDistribution,
    score: &dyn ScoreFunction,
) -> Result<(FiniteDistribution, Vec<f64>)> {
    let memory = score.memory();
    if joint.len() <= memory {
        return Err(Error::NoCalibrationScores {
            n: joint.len().saturating_sub(1),
            memory,
        });
    }
    let mut points = Vec::with_capacity(joint.len());
    pushforward_values(joint, joint.len() - memory, |seq, out| {
        embed(seq, &mut points);
        score_series_into(score, &points, memory + 1, out)
    })
}

/// Law of `(S_{n0+L+tau_star+1}, …, S_{n+1})` where the score is fitted on
/// the first `n0` states of each sequence.
pub fn split_score_law(
    joint: &FiniteDistribution,
    algorithm: &dyn TrainingAlgorithm,
    n0: usize,
    tau_star: usize,
) -> Result<(FiniteDistribution, Vec<f64>)> {
    let memory = algorithm.memory();
    let total = joint.len();
    if n0 == 0 || n0 + 1 >= total {
        return Err(invalid(format!(
            "split point n0 = {n0} must satisfy 1 <= n0 < n = {}",
            total.saturating_sub(1)
        )));
    }
    let n1 = total - 1 - n0;
    if n1 < memory + tau_star {
        return Err(Error::CalibrationBlockTooShort {
            n1,
            needed: memory + tau_star,
        });
    }
    let from = n0 + memory + tau_star + 1;
    let mut points = Vec::with_capacity(total);
    pushforward_values(joint, total - from + 1, |seq, out| {
        embed(seq, &mut points);
        let score = algorithm.fit(&points[..n0])?;
        score_series_into(score.as_ref(), &points, from, out)
    })
}

/// `Ψ_{k,τ} = d_TV(law Δ⁰_{k,τ}, law Δ¹_{k,τ})` for the full-length vector.
pub fn psi_k_tau(joint: &FiniteDistribution, k: usize, tau: usize) -> Result<f64> {
    let m = joint.len();
    let keep = joint.marginal(&deletion_indices(
        m,
        DeletionSpec::new(k, tau, Variant::KeepEnd),
    )?)?;
    let rotate = joint.marginal(&deletion_indices(
        m,
        DeletionSpec::new(k, tau, Variant::EndAtK),
    )?)?;
    tv_distance(&keep, &rotate)
}

/// `d_TV` between the two split-deletion laws of a length `n0 + n1 + 1` series.
pub fn split_psi(
    joint: &FiniteDistribution,
    n0: usize,
    k: usize,
    tau: usize,
    tau_star: usize,
) -> Result<f64> {
    let total = joint.len();
    if total < n0 + 2 {
        return Err(invalid("series too short for the split point"));
    }
    let n1 = total - 1 - n0;
    let spec = |variant| SplitDeletionSpec {
        n0,
        n1,
        k,
        tau,
        tau_star,
        variant,
    };
    let a = joint.marginal(&split_deletion_indices(spec(Variant::KeepEnd))?)?;
    let b = joint.marginal(&split_deletion_indices(spec(Variant::EndAtK))?)?;
    tv_distance(&a, &b)
}

/// `(Ψ_{1,τ}, …, Ψ_{m,τ})`.
pub fn psi_column(joint: &FiniteDistribution, tau: usize) -> Result<Vec<f64>> {
    (1..=joint.len())
        .into_par_iter()
        .map(|k| psi_k_tau(joint, k, tau))
        .collect()
}

/// Mean of a complete column `(Ψ_{1,τ}, …, Ψ_{m,τ})`.
pub fn psi_bar(column: &[f64], m: usize) -> Result<f64> {
    if column.len() != m || m == 0 {
        return Err(Error::IncompleteTable(format!(
            "switch coefficient column has {} of {m} entries",
            column.len()
        )));
    }
    Ok(column.iter().sum::<f64>() / m as f64)
}

/// `Ψ̄_τ` straight from the joint law.
pub fn psi_bar_of(joint: &FiniteDistribution, tau: usize) -> Result<f64> {
    psi_bar(&psi_column(joint, tau)?, joint.len())
}

/// `β(τ)` for a law of length `n + 1`; `β(n) = 0` as no split point exists.
pub fn beta_mixing(joint: &FiniteDistribution, tau: usize) -> Result<f64> {
    let total = joint.len();
    if total == 0 || tau >= total {
        return Err(invalid(format!(
            "lag {tau} outside [0, {}]",
            total.saturating_sub(1)
        )));
    }
    let n = total - 1;
    if tau == n {
        return Ok(0.0);
    }
    (1..=n - tau)
        .into_par_iter()
        .map(|k| {
            let head: Vec<usize> = (0..k).collect();
            let tail: Vec<usize> = (k + tau..total).collect();
            let both: Vec<usize> = head.iter().chain(&tail).copied().collect();
            let joint_blocks = joint.marginal(&both)?;
            let independent = joint.marginal(&head)?.product(&joint.marginal(&tail)?)?;
            tv_distance(&joint_blocks, &independent)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiEntry {
    pub k: usize,
    pub tau: usize,
    pub psi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiBarEntry {
    pub tau: usize,
    pub psi_bar: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub tau: usize,
    pub beta: f64,
    pub provenance: Provenance,
}

/// Switch and mixing coefficients for one law of length `len`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub len: usize,
    pub psi: Vec<PsiEntry>,
    pub psi_bar: Vec<PsiBarEntry>,
    pub beta: Vec<BetaEntry>,
}

impl CoefficientTable {
    /// Exact `Ψ_{k,τ}` for every `k` and every `τ` in `taus`, plus exact `β(τ)`
    /// for the same lags.
    pub fn exact(joint: &FiniteDistribution, taus: &[usize], with_beta: bool) -> Result<Self> {
        let m = joint.len();
        let cells: Vec<(usize, usize)> = taus
            .iter()
            .flat_map(|&t| (1..=m).map(move |k| (k, t)))
            .collect();
        let psi = cells
            .par_iter()
            .map(|&(k, tau)| {
                Ok(PsiEntry {
                    k,
                    tau,
                    psi: psi_k_tau(joint, k, tau)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Self {
            len: m,
            psi,
            ..Self::default()
        };
        table.psi_bar = taus
            .iter()
            .map(|&tau| {
                let column: Vec<f64> = table
                    .psi
                    .iter()
                    .filter(|e| e.tau == tau)
                    .map(|e| e.psi)
                    .collect();
                Ok(PsiBarEntry {
                    tau,
                    psi_bar: psi_bar(&column, m)?,
                })
            })
            .collect::<Result<_>>()?;
        if with_beta {
            table.beta = taus
                .iter()
                .map(|&tau| {
                    Ok(BetaEntry {
                        tau,
                        beta: beta_mixing(joint, tau)?,
                        provenance: Provenance::Exact,
                    })
                })
                .collect::<Result<_>>()?;
        }
        Ok(table)
    }

    /// Only β entries, e.g. from an analytic formula.
    pub fn from_beta(len: usize, beta: impl IntoIterator<Item = (usize, f64, Provenance)>) -> Self {
        Self {
            len,
            beta: beta
                .into_iter()
                .map(|(tau, beta, provenance)| BetaEntry {
                    tau,
                    beta,
                    provenance,
                })
                .collect(),
            ..Self::default()
        }
    }

    /// `Ψ̄_τ` values indexed by `τ = 0, 1, …` as long as they are contiguous.
    pub fn psi_bar_by_tau(&self) -> Vec<f64> {
        let mut out = Vec::new();
        while let Some(e) = self.psi_bar.iter().find(|e| e.tau == out.len()) {
            out.push(e.psi_bar);
        }
        out
    }

    /// `β(τ)` for `τ = 0, 1, …` as long as they are contiguous, taking the
    /// smallest value when several provenances are stored for one lag.
    pub fn beta_by_tau(&self) -> Vec<f64> {
        let mut out = Vec::new();
        loop {
            let tau = out.len();
            let best = self
                .beta
                .iter()
                .filter(|e| e.tau == tau)
                .map(|e| e.beta)
                .fold(None, |acc: Option<f64>, b| {
                    Some(acc.map_or(b, |a| a.min(b)))
                });
            match best {
                Some(b) => out.push(b),
                None => return out,
            }
        }
    }

    pub fn write_psi_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "tau", "psi"])?;
        for e in &self.psi {
            wtr.serialize((e.k, e.tau, e.psi))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_beta_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["tau", "beta", "provenance"])?;
        for e in &self.beta {
            wtr.serialize((e.tau, e.beta, e.provenance))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{CyclicMixture, FiniteMarkov, FiniteProcess};
    use crate::scoring::FnScore;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_based(v: Vec<usize>) -> Vec<usize> {
        v.into_iter().map(|i| i + 1).collect()
    }

    fn del(m: usize, k: usize, tau: usize, j: u8) -> Vec<usize> {
        one_based(
            deletion_indices(
                m,
                DeletionSpec::new(k, tau, Variant::from_index(j).unwrap()),
            )
            .unwrap(),
        )
    }

    #[test]
    fn golden_deletions() {
        assert_eq!(del(10, 3, 5, 0), vec![1, 2, 8, 9, 10]);
        assert_eq!(del(10, 3, 5, 1), vec![9, 10, 1, 2, 3]);
        assert_eq!(del(10, 8, 5, 0), vec![6, 7, 8, 9, 10]);
        assert_eq!(del(10, 8, 5, 1), vec![4, 5, 6, 7, 8]);
    }

    #[test]
    fn no_deletion() {
        for m in 1..8 {
            for k in 1..=m {
                assert_eq!(del(m, k, 0, 0), (1..=m).collect::<Vec<_>>());
                let mut rotated: Vec<usize> = (1..=m).collect();
                rotated.rotate_left(k % m);
                assert_eq!(del(m, k, 0, 1), rotated);
            }
        }
    }

    #[test]
    fn length_and_anchor_laws_exhaustive() {
        for m in 1..=12 {
            for k in 1..=m {
                for tau in 0..m {
                    let d0 = del(m, k, tau, 0);
                    let d1 = del(m, k, tau, 1);
                    assert_eq!(d0.len(), m - tau);
                    assert_eq!(d1.len(), m - tau);
                    assert_eq!(*d0.last().unwrap(), m);
                    assert_eq!(*d1.last().unwrap(), k);
                }
            }
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(deletion_indices(5, DeletionSpec::new(0, 1, Variant::KeepEnd)).is_err());
        assert!(deletion_indices(5, DeletionSpec::new(6, 1, Variant::KeepEnd)).is_err());
        assert!(deletion_indices(5, DeletionSpec::new(2, 5, Variant::KeepEnd)).is_err());
        assert!(Variant::from_index(2).is_err());
    }

    #[test]
    fn generic_delete() {
        let w: Vec<char> = "abcdefghij".chars().collect();
        let out = delete(&w, DeletionSpec::new(3, 5, Variant::EndAtK)).unwrap();
        assert_eq!(out.into_iter().collect::<String>(), "ijabc");
    }

    fn split(k: usize, j: u8) -> Vec<usize> {
        let spec = SplitDeletionSpec {
            n0: 3,
            n1: 3,
            k,
            tau: 1,
            tau_star: 1,
            variant: Variant::from_index(j).unwrap(),
        };
        one_based(split_deletion_indices(spec).unwrap())
    }

    #[test]
    fn split_worked_example() {
        assert_eq!(split(1, 0), vec![1, 2, 3, 5, 7]);
        assert_eq!(split(1, 1), vec![1, 2, 3, 7, 5]);
        assert_eq!(split(2, 0), vec![1, 2, 3, 6, 7]);
        assert_eq!(split(2, 1), vec![1, 2, 3, 5, 6]);
    }

    #[test]
    fn split_ranges_checked() {
        let mut spec = SplitDeletionSpec {
            n0: 3,
            n1: 3,
            k: 4,
            tau: 1,
            tau_star: 1,
            variant: Variant::KeepEnd,
        };
        assert!(split_deletion_indices(spec).is_err());
        spec.k = 3;
        assert!(split_deletion_indices(spec).is_ok());
        spec.tau = 3;
        assert!(split_deletion_indices(spec).is_err());
        let w = [1, 2, 3];
        assert!(delete_split(&w, spec).is_err());
    }

    fn bernoulli(p: f64) -> FiniteDistribution {
        FiniteDistribution::new(2, 1, vec![1.0 - p, p]).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = bernoulli(0.5);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&bernoulli(0.0), &bernoulli(1.0)).unwrap(), 1.0);
        assert!((tv_distance(&p, &bernoulli(0.9)).unwrap() - 0.4).abs() < 1e-15);
        let q = FiniteDistribution::new(3, 1, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(tv_distance(&p, &q).is_err());
    }

    #[test]
    fn pushforward_identity_and_constant() {
        let chain = FiniteMarkov::two_state(0.9).unwrap();
        let joint = chain.joint_pmf(3).unwrap();
        let same = joint
            .pushforward(2, 3, |s, out| out.copy_from_slice(s))
            .unwrap();
        assert_eq!(same, joint);
        let constant = joint.pushforward(2, 3, |_, out| out.fill(1)).unwrap();
        assert_eq!(constant.probability(&[1, 1, 1]), 1.0);
    }

    #[test]
    fn memory_one_indicator_score_law() {
        let joint = FiniteMarkov::two_state(0.9).unwrap().joint_pmf(3).unwrap();
        let same = FnScore::new("same", 1, |z, c| f64::from(u8::from(z.y == c.lag(1).y)));
        let (law, values) = score_law(&joint, &same).unwrap();
        assert_eq!(values, vec![0.0, 1.0]);
        // hand sum: P(S2 = a, S3 = b) over the 8 cells
        let mut expect = [0.0; 4];
        joint.for_each_support(|s, p| {
            let a = usize::from(s[1] == s[0]);
            let b = usize::from(s[2] == s[1]);
            expect[a * 2 + b] += p;
        });
        for (got, want) in law.pmf().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        // stay = 0.9: both steps stay with probability 0.81
        assert!((law.probability(&[1, 1]) - 0.81).abs() < 1e-12);
    }

    #[test]
    fn iid_switch_coefficients_vanish() {
        let joint = FiniteMarkov::iid(vec![0.2, 0.5, 0.3])
            .unwrap()
            .joint_pmf(5)
            .unwrap();
        for tau in 0..5 {
            for k in 1..=5 {
                assert!(psi_k_tau(&joint, k, tau).unwrap() < 1e-15);
            }
            assert!(beta_mixing(&joint, tau).unwrap() < 1e-15);
        }
    }

    #[test]
    fn stationary_chain_upper_range_is_zero() {
        let joint = FiniteMarkov::two_state(0.8).unwrap().joint_pmf(6).unwrap();
        let n = 5;
        for tau in 0..n {
            for k in n - tau + 1..=n + 1 {
                assert!(
                    psi_k_tau(&joint, k, tau).unwrap() < 1e-12,
                    "k={k} tau={tau}"
                );
            }
        }
    }

    #[test]
    fn psi_bar_examples() {
        assert_eq!(psi_bar(&[0.0; 4], 4).unwrap(), 0.0);
        assert!((psi_bar(&[0.2, 0.4, 0.0], 3).unwrap() - 0.2).abs() < 1e-15);
        assert!(psi_bar(&[0.2, 0.4], 3).is_err());
    }

    #[test]
    fn beta_at_full_lag_is_zero() {
        let joint = FiniteMarkov::two_state(0.9).unwrap().joint_pmf(4).unwrap();
        assert_eq!(beta_mixing(&joint, 3).unwrap(), 0.0);
        assert!(beta_mixing(&joint, 4).is_err());
    }

    #[test]
    fn beta_decays_with_lag_for_markov() {
        let joint = FiniteMarkov::two_state(0.9).unwrap().joint_pmf(6).unwrap();
        let betas: Vec<f64> = (0..6).map(|t| beta_mixing(&joint, t).unwrap()).collect();
        for w in betas.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(betas[0] > 0.3);
    }

    #[test]
    fn cyclic_exact_beta_below_bound() {
        let mix = CyclicMixture::new(3, 1.0).unwrap();
        let joint = mix.joint_pmf(4).unwrap();
        for tau in 0..4 {
            assert!(beta_mixing(&joint, tau).unwrap() <= mix.beta_upper_bound() + 1e-12);
        }
    }

    #[test]
    fn table_means_match_columns() {
        let joint = FiniteMarkov::two_state(0.7).unwrap().joint_pmf(5).unwrap();
        let table = CoefficientTable::exact(&joint, &[0, 1, 2], true).unwrap();
        assert_eq!(table.psi.len(), 15);
        for e in &table.psi_bar {
            let mean: f64 = table
                .psi
                .iter()
                .filter(|p| p.tau == e.tau)
                .map(|p| p.psi)
                .sum::<f64>()
                / 5.0;
            assert!((mean - e.psi_bar).abs() < 1e-12);
        }
        assert!(table.psi.iter().all(|e| (0.0..=1.0).contains(&e.psi)));
        assert_eq!(table.psi_bar_by_tau().len(), 3);
        assert_eq!(table.beta_by_tau().len(), 3);
        let mut buf = Vec::new();
        table.write_psi_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,tau,psi\n1,0,"));
        let mut buf = Vec::new();
        table.write_beta_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",exact"));
    }

    fn random_law(r: &mut ChaCha8Rng, alphabet: usize, len: usize) -> FiniteDistribution {
        let cells = alphabet.pow(len as u32);
        let raw: Vec<f64> = (0..cells).map(|_| r.random::<f64>().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        FiniteDistribution::new(alphabet, len, raw.into_iter().map(|v| v / total).collect())
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tv_is_a_metric(seed in any::<u64>()) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let (p, q, s) = (random_law(&mut r, 2, 3), random_law(&mut r, 2, 3), random_law(&mut r, 2, 3));
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
            prop_assert!(pq <= tv_distance(&p, &s).unwrap() + tv_distance(&s, &q).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0).contains(&pq));
        }

        #[test]
        fn data_processing(seed in any::<u64>()) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let (p, q) = (random_law(&mut r, 3, 3), random_law(&mut r, 3, 3));
            let table: Vec<usize> = (0..27).map(|_| r.random_range(0..4)).collect();
            let g = |s: &[usize], out: &mut [usize]| {
                out[0] = table[s[0] * 9 + s[1] * 3 + s[2]];
                out[1] = (s[0] + s[2]) % 4;
            };
            let gp = p.pushforward(4, 2, g).unwrap();
            let gq = q.pushforward(4, 2, g).unwrap();
            prop_assert!(tv_distance(&gp, &gq).unwrap() <= tv_distance(&p, &q).unwrap() + 1e-12);
        }

        #[test]
        fn split_deletion_lengths(n0 in 1usize..5, n1 in 1usize..7, seed in any::<u64>()) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let tau_star = r.random_range(0..=n1);
            let tau = r.random_range(0..=n1 - tau_star);
            let k = r.random_range(1..=n1 + 1 - tau_star);
            for variant in Variant::BOTH {
                let spec = SplitDeletionSpec { n0, n1, k, tau, tau_star, variant };
                let idx = split_deletion_indices(spec).unwrap();
                prop_assert_eq!(idx.len(), n0 + n1 + 1 - tau - tau_star);
                prop_assert_eq!(&idx[..n0], &(0..n0).collect::<Vec<_>>()[..]);
            }
        }
    }
}

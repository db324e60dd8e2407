//! Brute-force reference computations over explicit `(sequence, mass)` lists.
//!
//! Nothing here calls the marginalisation, deletion, quantile or coverage code
//! it is compared against; laws are hash maps keyed by the observed tuple.

use std::collections::HashMap;
use std::hash::Hash;

use crate::process::FiniteDistribution;

/// Support of a finite law, listed sequence by sequence.
#[derive(Clone, Debug)]
pub struct Enumerated {
    pub alphabet: usize,
    pub len: usize,
    pub atoms: Vec<(Vec<usize>, f64)>,
}

impl Enumerated {
    /// Decodes every cell of the pmf (first position most significant).
    pub fn from_distribution(d: &FiniteDistribution) -> Self {
        let (a, len) = (d.alphabet(), d.len());
        let mut atoms = Vec::new();
        for (cell, &p) in d.pmf().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut seq = vec![0; len];
            let mut rest = cell;
            for slot in seq.iter_mut().rev() {
                *slot = rest % a;
                rest /= a;
            }
            atoms.push((seq, p));
        }
        Self {
            alphabet: a,
            len,
            atoms,
        }
    }

    /// Law of `f(Z)`.
    pub fn law<K: Hash + Eq>(&self, mut f: impl FnMut(&[usize]) -> K) -> HashMap<K, f64> {
        let mut out = HashMap::new();
        for (seq, p) in &self.atoms {
            *out.entry(f(seq)).or_insert(0.0) += p;
        }
        out
    }

    /// Law of the states at 1-based `positions`.
    pub fn positions_law(&self, positions: &[usize]) -> HashMap<Vec<usize>, f64> {
        self.law(|seq| positions.iter().map(|&i| seq[i - 1]).collect())
    }
}

/// `½ Σ |p − q|` over the union of supports.
pub fn tv<K: Hash + Eq + Clone>(p: &HashMap<K, f64>, q: &HashMap<K, f64>) -> f64 {
    let mut total = 0.0;
    for (k, a) in p {
        total += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            total += b.abs();
        }
    }
    total / 2.0
}

/// 1-based positions kept by the two deletions of a length-`m` vector.
///
/// `variant` 1 rotates the vector so `w_k` is last and drops the first `τ`
/// entries; `variant` 0 drops `τ` entries ending just before the final `k`,
/// or the first `τ` when that block would start before `w_1`.
pub fn deletion_positions(m: usize, k: usize, tau: usize, variant: u8) -> Vec<usize> {
    let all: Vec<usize> = (1..=m).collect();
    if variant == 1 {
        let rotated: Vec<usize> = all[k..].iter().chain(&all[..k]).copied().collect();
        return rotated[tau..].to_vec();
    }
    if k + tau < m {
        let (lo, hi) = (m - k - tau + 1, m - k);
        all.into_iter().filter(|&i| i < lo || i > hi).collect()
    } else {
        all.into_iter().filter(|&i| i > tau).collect()
    }
}

/// `Ψ_{k,τ}` of the full sequence law.
pub fn psi(e: &Enumerated, k: usize, tau: usize) -> f64 {
    let a = e.positions_law(&deletion_positions(e.len, k, tau, 0));
    let b = e.positions_law(&deletion_positions(e.len, k, tau, 1));
    tv(&a, &b)
}

pub fn psi_bar(e: &Enumerated, tau: usize) -> f64 {
    (1..=e.len).map(|k| psi(e, k, tau)).sum::<f64>() / e.len as f64
}

/// `β(τ)` for a length `n + 1` law: the largest distance between a head/tail
/// pair separated by `τ` states and its product of marginals.
pub fn beta(e: &Enumerated, tau: usize) -> f64 {
    let total = e.len;
    let mut best: f64 = 0.0;
    for k in 1..total {
        if k + tau >= total {
            break;
        }
        let head: Vec<usize> = (1..=k).collect();
        let tail: Vec<usize> = (k + tau + 1..=total).collect();
        let both: Vec<usize> = head.iter().chain(&tail).copied().collect();
        let joint = e.positions_law(&both);
        let ph = e.positions_law(&head);
        let pt = e.positions_law(&tail);
        let mut product = HashMap::new();
        for (h, a) in &ph {
            for (t, b) in &pt {
                let key: Vec<usize> = h.iter().chain(t).copied().collect();
                product.insert(key, a * b);
            }
        }
        best = best.max(tv(&joint, &product));
    }
    best
}

/// Where the conformal threshold sits among `m` sorted values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threshold {
    MinusInfinity,
    PlusInfinity,
    /// 0-based position in the sorted calibration values.
    Sorted(usize),
}

/// Smallest count `c` with `c ≥ level · m`, found by counting up.
pub fn threshold_position(level: f64, m: usize) -> Threshold {
    if level > 1.0 + 1e-12 {
        return Threshold::PlusInfinity;
    }
    if level <= 0.0 {
        return Threshold::MinusInfinity;
    }
    let target = level * m as f64;
    let mut c = 1;
    while (c as f64) < target - 1e-9 {
        c += 1;
    }
    Threshold::Sorted(c.min(m) - 1)
}

/// `⌈level·m⌉`-th smallest value via a full sort.
pub fn naive_quantile(values: &[f64], level: f64) -> f64 {
    match threshold_position(level, values.len()) {
        Threshold::MinusInfinity => f64::NEG_INFINITY,
        Threshold::PlusInfinity => f64::INFINITY,
        Threshold::Sorted(i) => {
            let mut v = values.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            v[i]
        }
    }
}

/// Probability that the test score is covered, ties broken by every equally
/// likely placement of the test score among its ties.
///
/// Each score carries a secondary key: calibration scores their position, the
/// test score a half-integer slot between them. Covered means the test pair
/// is at most the threshold pair in lexicographic order.
pub fn covered_fraction(calibration: &[f64], test: f64, alpha: f64, random_ties: bool) -> f64 {
    let m = calibration.len();
    let level = (1.0 - alpha) * (m as f64 + 1.0) / m as f64;
    let idx = match threshold_position(level, m) {
        Threshold::PlusInfinity => return 1.0,
        Threshold::MinusInfinity => return 0.0,
        Threshold::Sorted(i) => i,
    };
    let tied = calibration.iter().filter(|&&s| s == test).count();
    let slots: Vec<f64> = if random_ties {
        (0..=tied).map(|r| r as f64 - 0.5).collect()
    } else {
        // without jitter a tie counts as covered: put the test first
        vec![-0.5]
    };
    let mut hits = 0;
    for &slot in &slots {
        let mut tie_rank = 0;
        let mut keyed: Vec<(f64, f64)> = calibration
            .iter()
            .map(|&s| {
                if s == test {
                    tie_rank += 1;
                    (s, (tie_rank - 1) as f64)
                } else {
                    (s, 0.0)
                }
            })
            .collect();
        keyed.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if (test, slot) <= keyed[idx] {
            hits += 1;
        }
    }
    hits as f64 / slots.len() as f64
}

/// Exact coverage: `Σ_z P(z) · covered_fraction(scores(z))`, where `scores`
/// returns the calibration scores and the test score of a sequence.
pub fn exact_coverage(
    e: &Enumerated,
    alpha: f64,
    random_ties: bool,
    mut scores: impl FnMut(&[usize]) -> (Vec<f64>, f64),
) -> f64 {
    e.atoms
        .iter()
        .map(|(seq, p)| {
            let (cal, test) = scores(seq);
            p * covered_fraction(&cal, test, alpha, random_ties)
        })
        .sum()
}

/// Exact coverage computed from the rank of the test score among all scores
/// instead of the threshold event; `random_ties` only.
///
/// Covered iff fewer than `⌈(1−α)(m+1)⌉` calibration scores rank strictly
/// below the test, where a tie ranks below with probability `r/(c+1)` averaged
/// over the test's slot `r`.
pub fn exact_coverage_by_rank(
    e: &Enumerated,
    alpha: f64,
    mut scores: impl FnMut(&[usize]) -> (Vec<f64>, f64),
) -> f64 {
    let mut total = 0.0;
    for (seq, p) in &e.atoms {
        let (cal, test) = scores(seq);
        let m = cal.len();
        let target = ((1.0 - alpha) * (m as f64 + 1.0) - 1e-9).ceil();
        let below = cal.iter().filter(|&&s| s < test).count();
        let tied = cal.iter().filter(|&&s| s == test).count();
        let mut good = 0;
        for r in 0..=tied {
            // covered iff the test's 1-based rank among all m + 1 scores is ≤ target
            if ((below + r + 1) as f64) <= target {
                good += 1;
            }
        }
        total += p * good as f64 / (tied + 1) as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deletion_pictures() {
        assert_eq!(deletion_positions(10, 3, 5, 0), vec![1, 2, 8, 9, 10]);
        assert_eq!(deletion_positions(10, 3, 5, 1), vec![9, 10, 1, 2, 3]);
        assert_eq!(deletion_positions(10, 8, 5, 0), vec![6, 7, 8, 9, 10]);
        assert_eq!(deletion_positions(10, 8, 5, 1), vec![4, 5, 6, 7, 8]);
    }

    #[test]
    fn threshold_counts() {
        assert_eq!(threshold_position(0.5, 4), Threshold::Sorted(1));
        assert_eq!(threshold_position(0.51, 4), Threshold::Sorted(2));
        assert_eq!(threshold_position(1.0, 4), Threshold::Sorted(3));
        assert_eq!(threshold_position(1.2, 4), Threshold::PlusInfinity);
        assert_eq!(naive_quantile(&[3.0, 1.0, 2.0], 0.6), 2.0);
    }

    #[test]
    fn covered_fraction_on_ties() {
        // m = 3, α = 0.25: level 1, threshold is the largest score
        assert_eq!(covered_fraction(&[1.0, 1.0, 1.0], 1.0, 0.25, true), 0.75);
        assert_eq!(covered_fraction(&[1.0, 1.0, 1.0], 1.0, 0.25, false), 1.0);
        assert_eq!(covered_fraction(&[0.0, 1.0, 2.0], 1.0, 0.5, true), 0.5);
    }

    #[test]
    fn independent_pair_has_zero_beta() {
        let d = FiniteDistribution::new(2, 3, vec![0.125; 8]).unwrap();
        let e = Enumerated::from_distribution(&d);
        assert_eq!(beta(&e, 0), 0.0);
        assert_eq!(psi(&e, 1, 1), 0.0);
    }
}

//! Order-statistic quantiles and the conformal level correction.
//!
//! `quantile(v, b)` is the `⌈b·m⌉`-th smallest entry of `v` (no interpolation,
//! ties kept as-is). Levels above one give `+∞` and levels at or below zero give
//! `−∞`, so a threshold of `+∞` covers everything and `−∞` covers nothing.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative slack used when `b·m` should be an integer but picked up rounding
/// error, e.g. `0.9 · (1 + 1/9) · 9`.
const RANK_SNAP: f64 = 1e-12;

/// A non-empty list of finite scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyScores);
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteScore { position, value });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Shorthand for [`quantile`].
    pub fn quantile(&self, level: f64) -> f64 {
        let mut scratch = self.0.clone();
        quantile_in_place(&mut scratch, level)
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(v: ScoreVector) -> Self {
        v.0
    }
}

/// Rank `⌈b·m⌉` as used by [`quantile`], or `None` when `b ≤ 0`.
///
/// Products within `RANK_SNAP` (relative) of an integer are treated as that
/// integer before the ceiling is taken. Ranks above `m` mean the quantile is `+∞`.
pub fn order_statistic_rank(level: f64, m: usize) -> Option<usize> {
    if level.is_nan() || level <= 0.0 {
        return None;
    }
    if level.is_infinite() {
        return Some(usize::MAX);
    }
    let x = level * m as f64;
    let nearest = x.round();
    let r = if (x - nearest).abs() <= RANK_SNAP * x.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    // level > 0 so the rank is at least one
    Some((r as usize).max(1))
}

/// The `⌈level·m⌉`-th order statistic of `v`, with `±∞` outside `(0, 1]`.
pub fn quantile(v: &ScoreVector, level: f64) -> f64 {
    v.quantile(level)
}

/// Same as [`quantile`] but reorders `values` instead of copying them.
///
/// `values` must be non-empty and NaN-free; [`ScoreVector`] guarantees both.
pub fn quantile_in_place(values: &mut [f64], level: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let m = values.len();
    match order_statistic_rank(level, m) {
        None => f64::NEG_INFINITY,
        Some(r) if r > m => f64::INFINITY,
        Some(r) => {
            let (_, nth, _) = values.select_nth_unstable_by(r - 1, f64::total_cmp);
            *nth
        }
    }
}

/// Corrected quantile level `(1 − alpha)(1 + 1/m_cal)`.
pub fn conformal_level(alpha: f64, m_cal: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if m_cal == 0 {
        return Err(invalid("m_cal must be at least 1"));
    }
    // (1 − α)(m + 1)/m keeps integer cases like α = 0.1, m = 9 exact
    let m = m_cal as f64;
    Ok((1.0 - alpha) * (m + 1.0) / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(quantile(&sv(&[3.0, 1.0, 2.0]), 0.5), 2.0);
        assert_eq!(quantile(&sv(&[3.0, 1.0, 2.0]), 1.2), f64::INFINITY);
        assert_eq!(quantile(&sv(&[3.0, 1.0, 2.0]), 0.0), f64::NEG_INFINITY);
        assert_eq!(quantile(&sv(&[3.0, 1.0, 2.0]), -0.3), f64::NEG_INFINITY);
        assert_eq!(quantile(&sv(&[5.0]), 1.0), 5.0);
    }

    #[test]
    fn level_one_is_maximum() {
        assert_eq!(quantile(&sv(&[4.0, 9.0, -1.0, 2.0]), 1.0), 9.0);
    }

    #[test]
    fn ties_are_kept() {
        let v = sv(&[2.0, 2.0, 2.0, 7.0]);
        assert_eq!(quantile(&v, 0.75), 2.0);
        assert_eq!(quantile(&v, 0.76), 7.0);
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(matches!(ScoreVector::new(vec![]), Err(Error::EmptyScores)));
        assert_eq!(
            ScoreVector::new(vec![]).unwrap_err().to_string(),
            "empty score list"
        );
        assert!(matches!(
            ScoreVector::new(vec![1.0, f64::INFINITY]),
            Err(Error::NonFiniteScore { position: 1, .. })
        ));
        assert!(ScoreVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn conformal_level_examples() {
        assert_eq!(conformal_level(0.1, 9).unwrap(), 1.0);
        assert!((conformal_level(0.1, 19).unwrap() - 18.0 / 19.0).abs() < 1e-15);
        assert_eq!(conformal_level(0.5, 1).unwrap(), 1.0);
        assert!(conformal_level(0.1, 0).is_err());
        assert!(conformal_level(0.0, 5).is_err());
        assert!(conformal_level(1.0, 5).is_err());
    }

    #[test]
    fn integer_products_are_snapped() {
        // 0.9 · 10/9 · 9 must select the 9th order statistic, not overflow to +∞
        let level = conformal_level(0.1, 9).unwrap();
        let v = sv(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(quantile(&v, level), 9.0);
        assert_eq!(order_statistic_rank(0.3, 10), Some(3));
        assert_eq!(order_statistic_rank(0.7, 10), Some(7));
        assert_eq!(order_statistic_rank(0.918, 50), Some(46));
    }

    /// Every way of deleting `tau` entries from `0..m`.
    fn subsets(m: usize, size: usize) -> Vec<Vec<usize>> {
        (0u32..(1 << m))
            .filter(|mask| mask.count_ones() as usize == size)
            .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
            .collect()
    }

    #[test]
    fn stable_to_insertion_and_deletion_exhaustive() {
        let grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
        let mut violations = 0;
        for m in 1..=8usize {
            // include ties by drawing values from a small set
            let bases: [Vec<f64>; 2] = [
                (0..m).map(|i| ((i * 7 + 3) % 11) as f64).collect(),
                (0..m).map(|i| (i % 3) as f64).collect(),
            ];
            for v in &bases {
                let full = sv(v);
                for tau in 0..m {
                    for deleted in subsets(m, tau) {
                        let kept: Vec<f64> = (0..m)
                            .filter(|i| !deleted.contains(i))
                            .map(|i| v[i])
                            .collect();
                        let sub = sv(&kept);
                        let ratio = (m - tau) as f64 / m as f64;
                        for &a in &grid {
                            let mid = quantile(&sub, 1.0 - a);
                            let lo = quantile(&full, (1.0 - a) * ratio);
                            let hi = quantile(&full, 1.0 - a * ratio);
                            if !(lo <= mid && mid <= hi) {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(violations, 0);
    }

    proptest! {
        #[test]
        fn monotone_in_level(v in prop::collection::vec(-1e3f64..1e3, 1..40), a in -0.2f64..1.3, b in -0.2f64..1.3) {
            let v = sv(&v);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantile(&v, lo) <= quantile(&v, hi));
        }

        #[test]
        fn rank_identity_for_distinct_entries(raw in prop::collection::btree_set(-10_000i32..10_000, 1..40), b in 0.001f64..=1.0) {
            let values: Vec<f64> = raw.into_iter().map(f64::from).collect();
            let m = values.len();
            let q = quantile(&sv(&values), b);
            let count = values.iter().filter(|&&x| x <= q).count();
            prop_assert_eq!(count, order_statistic_rank(b, m).unwrap());
            prop_assert_eq!(count, (b * m as f64 - 1e-9).ceil() as usize);
        }

        #[test]
        fn lower_count_bound(v in prop::collection::vec(0i32..6, 1..30), a in 0.0f64..=1.0) {
            let values: Vec<f64> = v.into_iter().map(f64::from).collect();
            let q = quantile(&sv(&values), 1.0 - a);
            let frac = values.iter().filter(|&&x| x <= q).count() as f64 / values.len() as f64;
            prop_assert!(frac >= 1.0 - a - 1e-12);
        }

        #[test]
        fn upper_count_bound(raw in prop::collection::btree_set(-500i32..500, 1..30), a in 0.0f64..=1.0) {
            let values: Vec<f64> = raw.into_iter().map(f64::from).collect();
            let m = values.len();
            let q = quantile(&sv(&values), 1.0 - a);
            let count = values.iter().filter(|&&x| x <= q).count();
            let cap = order_statistic_rank(1.0 - a, m).unwrap_or(0).min(m);
            prop_assert!(count <= cap);
        }
    }
}

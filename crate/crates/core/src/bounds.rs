//! Coverage bounds as pure functions of `(α, n, L)` and coefficient tables.
//!
//! Each bound is `base ∓ min over a lag grid of (gap + coefficient)`. The
//! result keeps every candidate so the minimiser can be audited.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Candidates closer than this to the running minimum do not replace it, so
/// ties resolve to the smallest `tau`, then the smallest `tau_star`.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// One grid point of a bound's minimisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tau: usize,
    /// `−1` for bounds without a second lag.
    pub tau_star: i64,
    pub gap: f64,
    pub coefficient: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub name: String,
    pub direction: Direction,
    pub value: f64,
    /// `1 − α` for lower bounds, the rounded nominal level for upper bounds.
    pub base: f64,
    pub minimizing_tau: usize,
    /// `−1` when the bound has no second lag.
    pub minimizing_tau_star: i64,
    pub candidates: Vec<Candidate>,
    /// Lower bound `≤ 0` or upper bound `≥ 1`.
    pub vacuous: bool,
}

impl BoundResult {
    pub fn minimizer(&self) -> &Candidate {
        self.candidates
            .iter()
            .find(|c| c.tau == self.minimizing_tau && c.tau_star == self.minimizing_tau_star)
            .expect("minimizer is one of the candidates")
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn require(table: &[f64], needed: usize, what: &str) -> Result<()> {
    if table.len() < needed {
        return Err(Error::IncompleteTable(format!(
            "{what} covers lags 0..{}, need 0..={}",
            table.len(),
            needed - 1
        )));
    }
    if let Some((tau, v)) = table[..needed]
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite())
    {
        return Err(invalid(format!(
            "{what} has non-finite entry {v} at lag {tau}"
        )));
    }
    Ok(())
}

fn assemble(
    name: &str,
    direction: Direction,
    base: f64,
    candidates: Vec<Candidate>,
) -> BoundResult {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.total < candidates[best].total - TIE_TOLERANCE {
            best = i;
        }
    }
    let chosen = candidates[best];
    let value = match direction {
        Direction::Lower => base - chosen.total,
        Direction::Upper => base + chosen.total,
    };
    BoundResult {
        name: name.to_owned(),
        direction,
        value,
        base,
        minimizing_tau: chosen.tau,
        minimizing_tau_star: chosen.tau_star,
        candidates,
        vacuous: match direction {
            Direction::Lower => value <= 0.0,
            Direction::Upper => value >= 1.0,
        },
    }
}

fn single_lag(
    taus: impl Iterator<Item = usize>,
    mut term: impl FnMut(usize) -> (f64, f64),
) -> Vec<Candidate> {
    taus.map(|tau| {
        let (gap, coefficient) = term(tau);
        Candidate {
            tau,
            tau_star: -1,
            gap,
            coefficient,
            total: gap + coefficient,
        }
    })
    .collect()
}

fn effective_len(n: usize, memory: usize) -> Result<usize> {
    if n < memory || n == 0 {
        return Err(invalid(format!(
            "need n >= max(L, 1), got n = {n}, L = {memory}"
        )));
    }
    Ok(n - memory + 1)
}

/// `1 − α − min_{τ ≤ n−L} { τ/(n−L+1) + Ψ̄_τ(S) }`.
///
/// `psi_bar_scores[τ]` is the averaged switch coefficient of the score vector.
pub fn switch_lower_bound(
    alpha: f64,
    n: usize,
    memory: usize,
    psi_bar_scores: &[f64],
) -> Result<BoundResult> {
    check_alpha(alpha)?;
    let m = effective_len(n, memory)?;
    require(psi_bar_scores, m, "score switch table")?;
    let denom = m as f64;
    let candidates = single_lag(0..m, |tau| (tau as f64 / denom, psi_bar_scores[tau]));
    Ok(assemble(
        "switch_lower",
        Direction::Lower,
        1.0 - alpha,
        candidates,
    ))
}

/// `1 − α − min_{τ ≤ n−2L} { (τ+L)/(n−L+1) + 2β(τ) }`.
pub fn mixing_lower_bound(
    alpha: f64,
    n: usize,
    memory: usize,
    beta: &[f64],
) -> Result<BoundResult> {
    check_alpha(alpha)?;
    let candidates = mixing_candidates(n, memory, beta)?;
    Ok(assemble(
        "mixing_lower",
        Direction::Lower,
        1.0 - alpha,
        candidates,
    ))
}

/// `1 − α − min_{τ ≤ n−2L} { (τ+L)/(n−L+1) + (n+1)/(n−L+1) · Ψ̄_τ(Z) }`.
pub fn data_switch_lower_bound(
    alpha: f64,
    n: usize,
    memory: usize,
    psi_bar_data: &[f64],
) -> Result<BoundResult> {
    check_alpha(alpha)?;
    let m = effective_len(n, memory)?;
    let taus = grid_2l(n, memory)?;
    require(psi_bar_data, taus, "data switch table")?;
    let denom = m as f64;
    let scale = (n + 1) as f64 / denom;
    let candidates = single_lag(0..taus, |tau| {
        ((tau + memory) as f64 / denom, scale * psi_bar_data[tau])
    });
    Ok(assemble(
        "data_switch_lower",
        Direction::Lower,
        1.0 - alpha,
        candidates,
    ))
}

fn grid_2l(n: usize, memory: usize) -> Result<usize> {
    if n < 2 * memory {
        return Err(invalid(format!("need n >= 2L, got n = {n}, L = {memory}")));
    }
    Ok(n - 2 * memory + 1)
}

fn mixing_candidates(n: usize, memory: usize, beta: &[f64]) -> Result<Vec<Candidate>> {
    let m = effective_len(n, memory)?;
    let taus = grid_2l(n, memory)?;
    require(beta, taus, "beta table")?;
    let denom = m as f64;
    Ok(single_lag(0..taus, |tau| {
        ((tau + memory) as f64 / denom, 2.0 * beta[tau])
    }))
}

/// `⌈(1−α)m⌉/m` with `m = n − L + 1`.
pub fn rounded_nominal(alpha: f64, n: usize, memory: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let m = effective_len(n, memory)?;
    let rank = crate::quantile::order_statistic_rank(1.0 - alpha, m).unwrap_or(0);
    Ok(rank as f64 / m as f64)
}

/// `⌈(1−α)(n−L+1)⌉/(n−L+1) + min_{τ ≤ n−L} { τ/(n−L+1) + Ψ̄_τ(S) }`.
///
/// Valid when the scores are almost surely distinct.
pub fn switch_upper_bound(
    alpha: f64,
    n: usize,
    memory: usize,
    psi_bar_scores: &[f64],
) -> Result<BoundResult> {
    let base = rounded_nominal(alpha, n, memory)?;
    let m = effective_len(n, memory)?;
    require(psi_bar_scores, m, "score switch table")?;
    let denom = m as f64;
    let candidates = single_lag(0..m, |tau| (tau as f64 / denom, psi_bar_scores[tau]));
    Ok(assemble("switch_upper", Direction::Upper, base, candidates))
}

/// Upper bound through the same `β` route as [`mixing_lower_bound`]:
/// `⌈(1−α)(n−L+1)⌉/(n−L+1) + min_{τ ≤ n−2L} { (τ+L)/(n−L+1) + 2β(τ) }`.
pub fn mixing_upper_bound(
    alpha: f64,
    n: usize,
    memory: usize,
    beta: &[f64],
) -> Result<BoundResult> {
    let base = rounded_nominal(alpha, n, memory)?;
    let candidates = mixing_candidates(n, memory, beta)?;
    Ok(assemble("mixing_upper", Direction::Upper, base, candidates))
}

/// `1 − α − min_{τ+τ* ≤ n1−L} { (τ + α τ*)/(n1−τ*−L+1) + Ψ̄_τ(S_split,τ*) }`.
///
/// `rows[τ*][τ]` holds `Ψ̄_τ` of the score vector with its first `τ*`
/// calibration scores removed. Each supplied row must cover `τ ≤ n1 − L − τ*`;
/// omitted trailing rows shrink the grid, which keeps the bound valid.
pub fn split_switch_lower_bound(
    alpha: f64,
    n1: usize,
    memory: usize,
    rows: &[Vec<f64>],
) -> Result<BoundResult> {
    check_alpha(alpha)?;
    if n1 < memory || n1 == 0 {
        return Err(invalid(format!(
            "need n1 >= max(L, 1), got n1 = {n1}, L = {memory}"
        )));
    }
    if rows.is_empty() {
        return Err(Error::IncompleteTable(
            "split switch table has no rows".into(),
        ));
    }
    let max_star = n1 - memory;
    if rows.len() > max_star + 1 {
        return Err(invalid(format!(
            "split switch table has {} rows, at most {} allowed",
            rows.len(),
            max_star + 1
        )));
    }
    for (star, row) in rows.iter().enumerate() {
        require(
            row,
            n1 - memory - star + 1,
            &format!("split switch row {star}"),
        )?;
    }
    let mut candidates = Vec::new();
    for tau in 0..=max_star {
        for (star, row) in rows.iter().enumerate().take(max_star - tau + 1) {
            let gap = (tau as f64 + alpha * star as f64) / (n1 - star - memory + 1) as f64;
            candidates.push(Candidate {
                tau,
                tau_star: star as i64,
                gap,
                coefficient: row[tau],
                total: gap + row[tau],
            });
        }
    }
    Ok(assemble(
        "split_switch_lower",
        Direction::Lower,
        1.0 - alpha,
        candidates,
    ))
}

/// `1 − α − min_{τ+τ* ≤ n1−2L} { (τ + α τ* + L)/(n1−τ*−L+1) + 2β(τ) + 2β(τ*) }`.
pub fn split_mixing_lower_bound(
    alpha: f64,
    n1: usize,
    memory: usize,
    beta: &[f64],
) -> Result<BoundResult> {
    check_alpha(alpha)?;
    if n1 < 2 * memory || n1 == 0 {
        return Err(invalid(format!(
            "need n1 >= max(2L, 1), got n1 = {n1}, L = {memory}"
        )));
    }
    let max_lag = n1 - 2 * memory;
    require(beta, max_lag + 1, "beta table")?;
    let mut candidates = Vec::new();
    for tau in 0..=max_lag {
        for star in 0..=max_lag - tau {
            let gap = (tau as f64 + alpha * star as f64 + memory as f64)
                / (n1 - star - memory + 1) as f64;
            let coefficient = 2.0 * beta[tau] + 2.0 * beta[star];
            candidates.push(Candidate {
                tau,
                tau_star: star as i64,
                gap,
                coefficient,
                total: gap + coefficient,
            });
        }
    }
    Ok(assemble(
        "split_mixing_lower",
        Direction::Lower,
        1.0 - alpha,
        candidates,
    ))
}

/// Coverage ceiling `(1 − b/4)(1 − α) + n(n+1)/(2K)` of the cyclic mixture
/// with `K` atoms and mixing weight `b`.
pub fn cyclic_coverage_ceiling(alpha: f64, n: usize, b: f64, k: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&b) {
        return Err(invalid(format!("b must lie in [0, 1], got {b}")));
    }
    if k == 0 {
        return Err(invalid("K must be at least 1"));
    }
    let target = (1.0 - alpha) * (n + 1) as f64;
    if (target - target.round()).abs() > 1e-9 * target.max(1.0) {
        return Err(invalid(format!(
            "(1 - alpha)(n + 1) = {target} is not an integer"
        )));
    }
    Ok((1.0 - b / 4.0) * (1.0 - alpha) + (n * (n + 1)) as f64 / (2.0 * k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exchangeable_scores_give_nominal() {
        let b = switch_lower_bound(0.1, 20, 0, &[0.0; 21]).unwrap();
        assert_abs_diff_eq!(b.value, 0.9, epsilon = 1e-15);
        assert_eq!(b.minimizing_tau, 0);
        assert_eq!(b.minimizing_tau_star, -1);
    }

    #[test]
    fn ties_go_to_smaller_tau() {
        let mut psi = vec![0.0; 10];
        psi[0] = 0.3;
        psi[1] = 0.1;
        let b = switch_lower_bound(0.1, 9, 0, &psi).unwrap();
        let totals: Vec<f64> = b.candidates.iter().take(3).map(|c| c.total).collect();
        assert_abs_diff_eq!(totals[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(totals[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(totals[2], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.value, 0.7, epsilon = 1e-12);
        assert_eq!(b.minimizing_tau, 1);
    }

    #[test]
    fn memory_with_iid_data() {
        let (n, l) = (30, 3);
        let b = mixing_lower_bound(0.1, n, l, &vec![0.0; n - 2 * l + 1]).unwrap();
        assert_abs_diff_eq!(b.value, 0.9 - 3.0 / 28.0, epsilon = 1e-15);
        assert_eq!(b.minimizing_tau, 0);
    }

    #[test]
    fn first_zero_beta_minimizes() {
        let (n, t) = (50, 4);
        let beta: Vec<f64> = (0..=n)
            .map(|tau| if tau <= t { 1.0 } else { 0.0 })
            .collect();
        let b = mixing_lower_bound(0.1, n, 0, &beta).unwrap();
        assert_eq!(b.minimizing_tau, t + 1);
        assert_abs_diff_eq!(
            b.value,
            0.9 - (t + 1) as f64 / (n + 1) as f64,
            epsilon = 1e-12
        );
        let iid = mixing_lower_bound(0.1, n, 0, &vec![0.0; n + 1]).unwrap();
        assert_abs_diff_eq!(iid.value, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn worst_case_beta_is_reported_as_vacuous() {
        let b = mixing_lower_bound(0.1, 10, 0, &[1.0; 11]).unwrap();
        assert!(b.value <= 0.0);
        assert!(b.vacuous);
        assert_abs_diff_eq!(b.value, 0.9 - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn upper_bound_examples() {
        let b = switch_upper_bound(0.1, 9, 0, &[0.0; 10]).unwrap();
        assert_abs_diff_eq!(b.value, 0.9, epsilon = 1e-15);
        let b = switch_upper_bound(0.1, 10, 0, &[0.0; 11]).unwrap();
        assert_abs_diff_eq!(b.value, 10.0 / 11.0, epsilon = 1e-15);
        let (n, t) = (100, 2);
        let beta: Vec<f64> = (0..=n)
            .map(|tau| if tau <= t { 1.0 } else { 0.0 })
            .collect();
        let b = mixing_upper_bound(0.1, n, 0, &beta).unwrap();
        assert_abs_diff_eq!(b.value, 91.0 / 101.0 + 3.0 / 101.0, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_tables_rejected() {
        assert!(matches!(
            switch_lower_bound(0.1, 9, 0, &[0.0; 9]),
            Err(Error::IncompleteTable(_))
        ));
        assert!(mixing_lower_bound(0.1, 9, 2, &[0.0; 5]).is_err());
        assert!(mixing_lower_bound(0.1, 9, 2, &[0.0; 6]).is_ok());
        assert!(split_mixing_lower_bound(0.1, 8, 1, &[0.0; 6]).is_err());
        assert!(split_switch_lower_bound(0.1, 8, 1, &[vec![0.0; 7]]).is_err());
        assert!(split_switch_lower_bound(0.1, 8, 1, &[]).is_err());
    }

    #[test]
    fn split_without_burn_in_matches_pretrained_form() {
        let psi: Vec<f64> = [0.4, 0.25, 0.1, 0.05, 0.0, 0.0, 0.0, 0.0].to_vec();
        for l in 0..3 {
            let n1 = 7;
            let row = psi[..n1 - l + 1].to_vec();
            let split = split_switch_lower_bound(0.1, n1, l, std::slice::from_ref(&row)).unwrap();
            let plain = switch_lower_bound(0.1, n1, l, &row).unwrap();
            assert_eq!(split.value, plain.value);
            assert_eq!(split.minimizing_tau, plain.minimizing_tau);
        }
    }

    #[test]
    fn split_all_zero_and_toy_minimizer() {
        let rows: Vec<Vec<f64>> = (0..=6).map(|s| vec![0.0; 7 - s]).collect();
        let b = split_switch_lower_bound(0.1, 6, 0, &rows).unwrap();
        assert_abs_diff_eq!(b.value, 0.9, epsilon = 1e-15);
        assert_eq!((b.minimizing_tau, b.minimizing_tau_star), (0, 0));

        // only the (tau = 0, tau* = 2) cell has a small coefficient
        let mut rows: Vec<Vec<f64>> = (0..=6).map(|s| vec![0.5; 7 - s]).collect();
        rows[2][0] = 0.0;
        let b = split_switch_lower_bound(0.1, 6, 0, &rows).unwrap();
        assert_eq!((b.minimizing_tau, b.minimizing_tau_star), (0, 2));
        assert_abs_diff_eq!(b.value, 0.9 - 0.2 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn split_mixing_examples() {
        let b = split_mixing_lower_bound(0.1, 20, 0, &[0.0; 21]).unwrap();
        assert_abs_diff_eq!(b.value, 0.9, epsilon = 1e-15);
        assert_eq!((b.minimizing_tau, b.minimizing_tau_star), (0, 0));

        let (n1, t) = (200usize, 2usize);
        let beta: Vec<f64> = (0..=n1)
            .map(|tau| if tau <= t { 1.0 } else { 0.0 })
            .collect();
        let b = split_mixing_lower_bound(0.1, n1, 0, &beta).unwrap();
        assert_eq!(
            (b.minimizing_tau, b.minimizing_tau_star),
            (t + 1, (t + 1) as i64)
        );
        let expect = 0.9 - ((t + 1) as f64 + 0.1 * (t + 1) as f64) / (n1 - (t + 1) + 1) as f64;
        assert_abs_diff_eq!(b.value, expect, epsilon = 1e-12);

        let b = split_mixing_lower_bound(0.1, 30, 2, &[0.0; 27]).unwrap();
        assert_abs_diff_eq!(b.value, 0.9 - 2.0 / 29.0, epsilon = 1e-15);
        assert_eq!((b.minimizing_tau, b.minimizing_tau_star), (0, 0));
    }

    #[test]
    fn cyclic_ceiling_examples() {
        assert_abs_diff_eq!(
            cyclic_coverage_ceiling(0.1, 9, 1.0, 10_000).unwrap(),
            0.6795,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            cyclic_coverage_ceiling(0.1, 9, 0.0, 10_000).unwrap(),
            0.9 + 90.0 / 20_000.0,
            epsilon = 1e-12
        );
        for n in [9, 19, 99, 399] {
            let v = cyclic_coverage_ceiling(0.1, n, 0.5, 100_000_000).unwrap();
            assert!(v - 0.875 * 0.9 < 1e-3);
        }
        assert!(cyclic_coverage_ceiling(0.1, 10, 1.0, 100).is_err());
        assert!(cyclic_coverage_ceiling(0.1, 9, 1.5, 100).is_err());
    }

    proptest! {
        #[test]
        fn minimizer_is_exhaustive_argmin(raw in prop::collection::vec(0.0f64..1.0, 12), l in 0usize..3, alpha in 0.01f64..0.5) {
            let n = 11;
            let b = switch_lower_bound(alpha, n, l, &raw).unwrap();
            let min = b.candidates.iter().map(|c| c.total).fold(f64::INFINITY, f64::min);
            let chosen = b.minimizer();
            prop_assert!((chosen.total - min).abs() <= TIE_TOLERANCE);
            prop_assert!((b.value - (1.0 - alpha - chosen.gap - chosen.coefficient)).abs() < 1e-12);
            prop_assert!(b.value <= 1.0 - alpha);
            prop_assert!(b.candidates.iter().filter(|c| c.tau < chosen.tau).all(|c| c.total > min + TIE_TOLERANCE));
            let up = switch_upper_bound(alpha, n, l, &raw).unwrap();
            prop_assert!(up.value >= up.base);
        }

        #[test]
        fn split_minimizer_scan(raw in prop::collection::vec(0.0f64..0.3, 9), alpha in 0.05f64..0.3) {
            let n1 = 8;
            let b = split_mixing_lower_bound(alpha, n1, 0, &raw).unwrap();
            let mut best = (f64::INFINITY, 0, 0);
            for tau in 0..=n1 {
                for star in 0..=n1 - tau {
                    let total = (tau as f64 + alpha * star as f64) / (n1 - star + 1) as f64 + 2.0 * raw[tau] + 2.0 * raw[star];
                    if total < best.0 - TIE_TOLERANCE {
                        best = (total, tau, star);
                    }
                }
            }
            prop_assert_eq!(b.minimizing_tau, best.1);
            prop_assert_eq!(b.minimizing_tau_star, best.2 as i64);
            prop_assert!((b.value - (1.0 - alpha - best.0)).abs() < 1e-12);
        }
    }
}

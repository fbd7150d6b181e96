//! Dispersion index D = Σ(x - x̄)²/x̄ and its two reference distributions:
//! the large-sample χ²(n-1) approximation and the exact distribution
//! conditional on the observed total (Fisher's exact variance test).

mod enumerate;
mod exact;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::{chi2_cdf, chi2_sf};

pub use enumerate::{exact_oracle, ORACLE_MAX_N, ORACLE_MAX_TOTAL};
pub use exact::{
    conditional_u_distribution, exact_tail_masses, TailMasses, EXACT_MAX_N, EXACT_MAX_TOTAL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    /// Overdispersion: large D is extreme.
    #[default]
    Upper,
    /// Underdispersion: small D is extreme.
    Lower,
    TwoSided,
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tail::Upper => "upper",
            Tail::Lower => "lower",
            Tail::TwoSided => "two-sided",
        })
    }
}

impl FromStr for Tail {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "upper" => Ok(Tail::Upper),
            "lower" => Ok(Tail::Lower),
            "two-sided" => Ok(Tail::TwoSided),
            other => Err(format!(
                "unknown tail {other:?} (expected upper, lower or two-sided)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub d: f64,
    pub n: usize,
    /// Observed total the exact test conditions on.
    pub total: u64,
    pub df: usize,
    pub p_asymptotic: Option<f64>,
    pub p_exact: Option<f64>,
    pub tail: Tail,
    /// False when an exact p-value was requested but the problem exceeded
    /// the exact-test limits and only the χ² approximation is reported.
    pub exact_flag: bool,
}

/// Σ(x - x̄)² / x̄
pub fn dispersion_index(counts: &[u32]) -> Result<f64> {
    if counts.is_empty() {
        return Err(StatsError::Empty);
    }
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(StatsError::Degenerate(
            "dispersion index needs a positive mean".into(),
        ));
    }
    let n = counts.len() as f64;
    let mean = total as f64 / n;
    // Σ(x - x̄)² = Σx² - T²/n, exact in integers up to the final division.
    let sum_sq: u64 = counts.iter().map(|&c| (c as u64) * (c as u64)).sum();
    let ss = sum_sq as f64 - (total as f64) * (total as f64) / n;
    Ok(ss.max(0.0) / mean)
}

/// χ²(df) tail probability of an observed dispersion index.
pub fn asymptotic_p(d: f64, df: usize, tail: Tail) -> f64 {
    let df = df as f64;
    match tail {
        Tail::Upper => chi2_sf(d, df),
        Tail::Lower => chi2_cdf(d, df),
        Tail::TwoSided => (2.0 * chi2_sf(d, df).min(chi2_cdf(d, df))).min(1.0),
    }
}

pub(crate) fn tail_p(masses: TailMasses, tail: Tail) -> f64 {
    let upper = (masses.equal + masses.greater).min(1.0);
    let lower = (masses.less + masses.equal).min(1.0);
    match tail {
        Tail::Upper => upper,
        Tail::Lower => lower,
        Tail::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

fn check_exact_input(counts: &[u32]) -> Result<u64> {
    if counts.len() < 2 {
        return Err(StatsError::Domain(
            "exact variance test needs at least two counts".into(),
        ));
    }
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(StatsError::Degenerate(
            "exact variance test needs a positive total".into(),
        ));
    }
    Ok(total)
}

/// Fisher's exact variance test, conditional on the observed total.
///
/// Fails with [`StatsError::Infeasible`] beyond `n <= 64`, `total <= 160`;
/// [`dispersion_test`] falls back to the χ² approximation in that case.
pub fn exact_variance_test(counts: &[u32], tail: Tail) -> Result<DispersionResult> {
    let total = check_exact_input(counts)?;
    let d = dispersion_index(counts)?;
    let masses = exact_tail_masses(counts)?;
    let df = counts.len() - 1;
    Ok(DispersionResult {
        d,
        n: counts.len(),
        total,
        df,
        p_asymptotic: Some(asymptotic_p(d, df, tail)),
        p_exact: Some(tail_p(masses, tail)),
        tail,
        exact_flag: true,
    })
}

/// Dispersion index with its χ² p-value and, when `exact` is set, the exact
/// conditional p-value (falling back to χ² only, flagged, when infeasible).
pub fn dispersion_test(counts: &[u32], tail: Tail, exact: bool) -> Result<DispersionResult> {
    if exact {
        match exact_variance_test(counts, tail) {
            Err(StatsError::Infeasible { .. }) => {}
            other => return other,
        }
    }
    let d = dispersion_index(counts)?;
    let df = counts.len().saturating_sub(1).max(1);
    Ok(DispersionResult {
        d,
        n: counts.len(),
        total: counts.iter().map(|&c| c as u64).sum(),
        df,
        p_asymptotic: Some(asymptotic_p(d, df, tail)),
        p_exact: None,
        tail,
        exact_flag: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_values() {
        let d = dispersion_index(&[0, 0, 0, 0, 1, 1, 2, 3]).unwrap();
        assert!((d - 8.875 / 0.875).abs() < 1e-12);
        assert_eq!(dispersion_index(&[3, 3, 3]).unwrap(), 0.0);
        assert!(dispersion_index(&[0, 0]).is_err());
        assert!(dispersion_index(&[]).is_err());
    }

    #[test]
    fn asymptotic_tails() {
        assert_eq!(asymptotic_p(0.0, 7, Tail::Upper), 1.0);
        assert_eq!(asymptotic_p(0.0, 7, Tail::Lower), 0.0);
        let up = asymptotic_p(50.0, 50, Tail::Upper);
        let lo = asymptotic_p(50.0, 50, Tail::Lower);
        assert!((up + lo - 1.0).abs() < 1e-14);
        assert!((asymptotic_p(50.0, 50, Tail::TwoSided) - 2.0 * up.min(lo)).abs() < 1e-15);
    }

    #[test]
    fn two_counts_hand_enumeration() {
        let r = exact_variance_test(&[0, 2], Tail::Upper).unwrap();
        assert!((r.p_exact.unwrap() - 0.5).abs() < 1e-14);
        assert!(r.exact_flag);
        assert_eq!((r.n, r.total, r.df), (2, 2, 1));
    }

    #[test]
    fn equal_split_lower_tail() {
        let r = exact_variance_test(&[1, 1, 1], Tail::Lower).unwrap();
        assert!((r.p_exact.unwrap() - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn single_goal_is_degenerate_in_u() {
        for tail in [Tail::Upper, Tail::Lower, Tail::TwoSided] {
            let p = exact_variance_test(&[0, 1, 0], tail)
                .unwrap()
                .p_exact
                .unwrap();
            assert!((p - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_input_errors() {
        assert!(exact_variance_test(&[3], Tail::Upper).is_err());
        assert!(matches!(
            exact_variance_test(&[0, 0, 0], Tail::Upper),
            Err(StatsError::Degenerate(_))
        ));
        let big = vec![3u32; 65];
        assert!(matches!(
            exact_variance_test(&big, Tail::Upper),
            Err(StatsError::Infeasible { .. })
        ));
    }

    #[test]
    fn fallback_is_flagged() {
        let big = vec![3u32; 65];
        let r = dispersion_test(&big, Tail::Upper, true).unwrap();
        assert!(!r.exact_flag);
        assert!(r.p_exact.is_none());
        assert!(r.p_asymptotic.is_some());
    }

    #[test]
    fn tail_parse() {
        assert_eq!("two-sided".parse::<Tail>().unwrap(), Tail::TwoSided);
        assert!("left".parse::<Tail>().is_err());
    }
}

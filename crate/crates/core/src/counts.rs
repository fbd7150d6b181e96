//! Goal-count summaries, Poisson expected frequencies and the chi-square
//! goodness-of-fit test.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::{chi2_sf, gamma_p, gamma_q, ln_factorial};

/// Sample mean and sample variance (denominator n - 1; zero for n = 1).
pub fn mean_variance(counts: &[u32]) -> Result<(f64, f64)> {
    if counts.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let ss: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
    let var = if counts.len() > 1 {
        ss / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, var))
}

pub(crate) fn ln_poisson_pmf(k: u64, mu: f64) -> f64 {
    if k == 0 {
        return -mu;
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

/// e^{-μ} μ^k / k!, evaluated in log space.
pub fn poisson_pmf(k: u64, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(StatsError::Domain(format!(
            "Poisson mean must be positive, got {mu}"
        )));
    }
    Ok(ln_poisson_pmf(k, mu).exp())
}

/// P(X ≥ k) for X ~ Poisson(μ).
fn poisson_upper_tail(k: u64, mu: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        gamma_p(k as f64, mu)
    }
}

/// P(X ≤ k) for X ~ Poisson(μ).
fn poisson_lower_tail(k: u64, mu: f64) -> f64 {
    gamma_q(k as f64 + 1.0, mu)
}

/// How the count support is grouped into cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingRule {
    /// Cells 0, 1, …, k-1 and a pooled tail "≥k".
    PoolStart(u32),
    /// Merge cells (tails first) until every expected frequency is at least x.
    MinExpected(f64),
}

impl Default for PoolingRule {
    fn default() -> Self {
        PoolingRule::PoolStart(6)
    }
}

/// Inclusive count range covered by one cell; `hi = None` is an open tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLabel {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl CellLabel {
    fn contains(&self, x: u32) -> bool {
        x >= self.lo && self.hi.is_none_or(|hi| x <= hi)
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            None => write!(f, ">={}", self.lo),
            Some(hi) if hi == self.lo => write!(f, "{}", self.lo),
            Some(hi) if self.lo == 0 => write!(f, "<={hi}"),
            Some(hi) => write!(f, "{}-{}", self.lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: CellLabel,
    pub observed: u32,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub cells: Vec<Cell>,
    /// First count merged into the upper tail.
    pub pooled_from: u32,
    pub n: usize,
    /// Mean used for the expected frequencies (goals/match); for the
    /// exposure mixture this is the average of rate·exposure.
    pub mu_hat: f64,
    /// Parameters estimated from the data, for the degrees of freedom.
    pub params_estimated: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

const MIN_CELLS: usize = 3;

// Expected mass of the Poisson mixture Σ_i Poisson(μ_i) on [lo, hi].
fn mixture_mass(mus: &[f64], label: CellLabel) -> f64 {
    mus.iter()
        .map(|&mu| match label.hi {
            None => poisson_upper_tail(label.lo as u64, mu),
            Some(hi) if hi == label.lo => ln_poisson_pmf(hi as u64, mu).exp(),
            Some(hi) if label.lo == 0 => poisson_lower_tail(hi as u64, mu),
            Some(hi) => (label.lo..=hi)
                .map(|k| ln_poisson_pmf(k as u64, mu).exp())
                .sum(),
        })
        .sum()
}

fn build_table(counts: &[u32], mus: &[f64], rule: PoolingRule) -> Result<FrequencyTable> {
    if counts.is_empty() {
        return Err(StatsError::Empty);
    }
    if mus.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(StatsError::Degenerate(
            "expected counts need a positive mean".into(),
        ));
    }
    let n = counts.len();
    let labels = match rule {
        PoolingRule::PoolStart(k) => {
            let mut labels: Vec<CellLabel> =
                (0..k).map(|i| CellLabel { lo: i, hi: Some(i) }).collect();
            labels.push(CellLabel { lo: k, hi: None });
            labels
        }
        PoolingRule::MinExpected(min) => pool_min_expected(mus, min)?,
    };
    if labels.len() < MIN_CELLS {
        return Err(StatsError::Degenerate(format!(
            "pooling leaves {} cells, need at least {MIN_CELLS}",
            labels.len()
        )));
    }
    let cells = labels
        .iter()
        .map(|&label| Cell {
            label,
            observed: counts.iter().filter(|&&x| label.contains(x)).count() as u32,
            expected: mixture_mass(mus, label),
        })
        .collect::<Vec<_>>();
    if cells.iter().any(|c| c.expected.is_nan() || c.expected <= 0.0) {
        return Err(StatsError::Degenerate(
            "an expected frequency is zero".into(),
        ));
    }
    Ok(FrequencyTable {
        pooled_from: labels.last().map_or(0, |l| l.lo),
        cells,
        n,
        mu_hat: mus.iter().sum::<f64>() / n as f64,
        params_estimated: 1,
    })
}

fn pool_min_expected(mus: &[f64], min: f64) -> Result<Vec<CellLabel>> {
    if min.is_nan() || min <= 0.0 {
        return Err(StatsError::Domain(format!(
            "minimum expected must be positive, got {min}"
        )));
    }
    let max_mu = mus.iter().cloned().fold(0.0, f64::max);
    let top = (max_mu + 12.0 * max_mu.sqrt() + 12.0).ceil() as u32;
    let mut labels: Vec<CellLabel> = (0..top).map(|i| CellLabel { lo: i, hi: Some(i) }).collect();
    labels.push(CellLabel { lo: top, hi: None });
    let mut expected: Vec<f64> = labels.iter().map(|&l| mixture_mass(mus, l)).collect();
    // Repeatedly fold the smallest cell into its smaller neighbour.
    while labels.len() > 1 {
        let (i, &e) = expected
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if e >= min {
            break;
        }
        let j = if i == 0 {
            1
        } else if i == labels.len() - 1 || expected[i - 1] <= expected[i + 1] {
            i - 1
        } else {
            i + 1
        };
        let (a, b) = (i.min(j), i.max(j));
        labels[a] = CellLabel {
            lo: labels[a].lo,
            hi: labels[b].hi,
        };
        expected[a] += expected[b];
        labels.remove(b);
        expected.remove(b);
    }
    Ok(labels)
}

/// Frequency table against Poisson(x̄) for identically distributed counts.
pub fn expected_frequencies(counts: &[u32], rule: PoolingRule) -> Result<FrequencyTable> {
    let (mean, _) = mean_variance(counts)?;
    if mean <= 0.0 {
        return Err(StatsError::Degenerate("all counts are zero".into()));
    }
    build_table(counts, &vec![mean; counts.len()], rule)
}

/// Frequency table against a Poisson mixture where match i has mean
/// `rate * exposures[i]`.
pub fn expected_frequencies_exposure(
    counts: &[u32],
    exposures: &[u32],
    rate: f64,
    rule: PoolingRule,
) -> Result<FrequencyTable> {
    if counts.len() != exposures.len() {
        return Err(StatsError::Domain(format!(
            "{} counts but {} exposures",
            counts.len(),
            exposures.len()
        )));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(StatsError::Domain(format!(
            "rate must be positive, got {rate}"
        )));
    }
    let mus: Vec<f64> = exposures.iter().map(|&t| rate * t as f64).collect();
    build_table(counts, &mus, rule)
}

/// Pearson statistic Σ (O - E)² / E with df = cells - 1 - estimated params.
pub fn chi_square_gof(table: &FrequencyTable) -> Result<GofResult> {
    if let Some(c) = table.cells.iter().find(|c| c.expected.is_nan() || c.expected <= 0.0) {
        return Err(StatsError::Domain(format!(
            "non-positive expected frequency in cell {}",
            c.label
        )));
    }
    let used = 1 + table.params_estimated as usize;
    if table.cells.len() <= used {
        return Err(StatsError::Degenerate("no degrees of freedom left".into()));
    }
    let statistic: f64 = table
        .cells
        .iter()
        .map(|c| (c.observed as f64 - c.expected).powi(2) / c.expected)
        .sum();
    let df = (table.cells.len() - used) as u32;
    Ok(GofResult {
        statistic,
        df,
        p_value: chi2_sf(statistic, df as f64),
    })
}

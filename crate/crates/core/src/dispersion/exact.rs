//! Exact conditional distribution of U = Σx² given the total T.
//!
//! Under the Poisson null the counts given T are multinomial(T; 1/n, …, 1/n).
//! The multinomial is generated one cell at a time: with m cells left and r
//! goals still to place, the next cell receives k ~ Binomial(r, 1/m). The
//! state after each cell is (r, accumulated U). Every transition weight is a
//! proper probability, so a state whose final U is already known relative
//! to the observed value can be retired into a tail bucket immediately.

use std::collections::BTreeMap;

use crate::error::{Result, StatsError};
use crate::special::ln_factorial;

pub const EXACT_MAX_N: usize = 64;
pub const EXACT_MAX_TOTAL: u64 = 160;

/// Null probability of U below, equal to and above the observed value.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TailMasses {
    pub less: f64,
    pub equal: f64,
    pub greater: f64,
}

impl TailMasses {
    fn add(&mut self, u: u64, observed: u64, w: f64) {
        match u.cmp(&observed) {
            std::cmp::Ordering::Less => self.less += w,
            std::cmp::Ordering::Equal => self.equal += w,
            std::cmp::Ordering::Greater => self.greater += w,
        }
    }
}

/// Smallest Σx² over splits of `r` into `m` cells.
fn min_sum_sq(r: u64, m: u64) -> u64 {
    let q = r / m;
    let rem = r % m;
    rem * (q + 1) * (q + 1) + (m - rem) * q * q
}

/// Binomial(r, p) probabilities, anchored at the mode so nothing underflows
/// before the recurrence reaches it.
fn binomial_row(r: u64, p: f64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(r as usize + 1, 0.0);
    if p >= 1.0 {
        out[r as usize] = 1.0;
        return;
    }
    let odds = p / (1.0 - p);
    let mode = (((r + 1) as f64 * p).floor() as u64).min(r);
    out[mode as usize] = (ln_factorial(r) - ln_factorial(mode) - ln_factorial(r - mode)
        + mode as f64 * p.ln()
        + (r - mode) as f64 * (1.0 - p).ln())
    .exp();
    for k in mode..r {
        out[k as usize + 1] = out[k as usize] * (r - k) as f64 / (k + 1) as f64 * odds;
    }
    for k in (1..=mode).rev() {
        out[k as usize - 1] = out[k as usize] * k as f64 / (r - k + 1) as f64 / odds;
    }
}

// Dense (r, u) weights with u capped at the observed U.
struct Layer {
    width: usize,
    weights: Vec<f64>,
    span: Vec<Option<(usize, usize)>>,
}

impl Layer {
    fn new(total: u64, cap: u64) -> Self {
        let width = cap as usize + 1;
        Layer {
            width,
            weights: vec![0.0; (total as usize + 1) * width],
            span: vec![None; total as usize + 1],
        }
    }

    fn add(&mut self, r: u64, u: u64, w: f64) {
        self.weights[r as usize * self.width + u as usize] += w;
        self.widen(r, u as usize, u as usize);
    }

    fn widen(&mut self, r: u64, lo: usize, hi: usize) {
        let r = r as usize;
        self.span[r] = Some(match self.span[r] {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }

    fn clear(&mut self) {
        for r in 0..self.span.len() {
            if let Some((lo, hi)) = self.span[r].take() {
                self.weights[r * self.width + lo..=r * self.width + hi].fill(0.0);
            }
        }
    }
}

fn check_bounds(n: usize, total: u64) -> Result<()> {
    if n > EXACT_MAX_N || total > EXACT_MAX_TOTAL {
        return Err(StatsError::Infeasible {
            n,
            total,
            max_n: EXACT_MAX_N,
            max_total: EXACT_MAX_TOTAL,
        });
    }
    Ok(())
}

/// Null masses of U below / at / above its observed value, conditional on
/// the observed total.
pub fn exact_tail_masses(counts: &[u32]) -> Result<TailMasses> {
    let n = counts.len();
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    check_bounds(n, total)?;
    if n < 2 || total == 0 {
        return Err(StatsError::Domain(
            "exact test needs n >= 2 and a positive total".into(),
        ));
    }
    let observed: u64 = counts.iter().map(|&c| (c as u64).pow(2)).sum();
    Ok(sequential_masses(n as u64, total, observed))
}

fn sequential_masses(n: u64, total: u64, observed: u64) -> TailMasses {
    let mut masses = TailMasses::default();
    let mut cur = Layer::new(total, observed);
    let mut next = Layer::new(total, observed);
    let mut row = Vec::new();
    let mut prefix = Vec::new();
    let obs = observed as i64;

    if total <= 1 {
        masses.add(total * total, observed, 1.0);
        return masses;
    }
    cur.add(total, 0, 1.0);

    // For a cell receiving k of the r remaining goals, the successor
    // (r - k, u + k²) is retired as "less" when even piling every remaining
    // goal into one cell cannot reach the observed U, as "greater" when even
    // the most balanced split exceeds it, and is kept otherwise. Both cut
    // points are thresholds on u, so each (r, k) pair touches contiguous runs.
    for m in (2..=n).rev() {
        let p = 1.0 / m as f64;
        let remaining = m - 1;
        for r in 0..=total {
            let Some((lo, hi)) = cur.span[r as usize] else {
                continue;
            };
            binomial_row(r, p, &mut row);
            let base = r as usize * cur.width;
            let weights = &cur.weights[base + lo..=base + hi];
            prefix.clear();
            prefix.push(0.0);
            let mut acc = 0.0;
            for &w in weights {
                acc += w;
                prefix.push(acc);
            }
            // Sum of weights with u in [a, b].
            let seg = |a: i64, b: i64| -> f64 {
                let a = a.max(lo as i64);
                let b = b.min(hi as i64);
                if a > b {
                    0.0
                } else {
                    prefix[(b - lo as i64 + 1) as usize] - prefix[(a - lo as i64) as usize]
                }
            };
            // Smallest U this cell choice can still lead to; convex in k.
            let floor_u = |k: u64| k * k + min_sum_sq(r - k, remaining);
            let budget = observed - lo as u64;
            let mut k_min = (r / m).min(r);
            while k_min < r && floor_u(k_min + 1) < floor_u(k_min) {
                k_min += 1;
            }
            while k_min > 0 && floor_u(k_min - 1) < floor_u(k_min) {
                k_min -= 1;
            }
            let row_total = prefix[prefix.len() - 1];
            if floor_u(k_min) > budget {
                masses.greater += row_total;
                continue;
            }
            let mut k_lo = k_min;
            while k_lo > 0 && floor_u(k_lo - 1) <= budget {
                k_lo -= 1;
            }
            let mut k_hi = k_min;
            while k_hi < r && floor_u(k_hi + 1) <= budget {
                k_hi += 1;
            }
            let mut inside = 0.0;
            for k in k_lo..=k_hi {
                let pk = row[k as usize];
                inside += pk;
                if pk == 0.0 {
                    continue;
                }
                let sq = (k * k) as i64;
                let r2 = r - k;
                if remaining == 1 || r2 <= 1 {
                    let at = obs - sq - (r2 * r2) as i64;
                    masses.less += pk * seg(lo as i64, at - 1);
                    masses.equal += pk * seg(at, at);
                    masses.greater += pk * seg(at + 1, hi as i64);
                    continue;
                }
                let less_to = obs - sq - (r2 * r2) as i64 - 1;
                let keep_to = obs - sq - min_sum_sq(r2, remaining) as i64;
                masses.less += pk * seg(lo as i64, less_to);
                masses.greater += pk * seg(keep_to + 1, hi as i64);
                let a = (less_to + 1).max(lo as i64);
                let b = keep_to.min(hi as i64);
                if a > b {
                    continue;
                }
                let (a, b) = (a as usize, b as usize);
                let dst = r2 as usize * next.width + sq as usize;
                for (slot, &w) in next.weights[dst + a..=dst + b]
                    .iter_mut()
                    .zip(&cur.weights[base + a..=base + b])
                {
                    *slot += pk * w;
                }
                next.widen(r2, a + sq as usize, b + sq as usize);
            }
            masses.greater += row_total * (1.0 - inside).max(0.0);
        }
        cur.clear();
        std::mem::swap(&mut cur, &mut next);
    }
    masses
}

/// Full null distribution of U given (n, total) as sorted (u, probability)
/// pairs. Intended for small problems and diagnostics.
pub fn conditional_u_distribution(n: usize, total: u64) -> Result<Vec<(u64, f64)>> {
    check_bounds(n, total)?;
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let mut states: BTreeMap<(u64, u64), f64> = BTreeMap::from([((total, 0), 1.0)]);
    let mut row = Vec::new();
    for m in (1..=n as u64).rev() {
        let p = 1.0 / m as f64;
        let mut next = BTreeMap::new();
        for ((r, u), w) in states {
            binomial_row(r, p, &mut row);
            for k in 0..=r {
                *next.entry((r - k, u + k * k)).or_insert(0.0) += w * row[k as usize];
            }
        }
        states = next;
    }
    let mut dist: BTreeMap<u64, f64> = BTreeMap::new();
    for ((r, u), w) in states {
        if w > 0.0 {
            debug_assert_eq!(r, 0);
            *dist.entry(u).or_insert(0.0) += w;
        }
    }
    Ok(dist.into_iter().collect())
}

//! Brute-force reference for the exact variance test: walks every
//! composition of the total into n cells and sums multinomial
//! probabilities directly.

use super::{tail_p, Tail, TailMasses};
use crate::error::{Result, StatsError};
use crate::special::ln_factorial;

pub const ORACLE_MAX_N: usize = 6;
pub const ORACLE_MAX_TOTAL: u64 = 10;

fn walk(cells: &mut Vec<u64>, left: u64, n: usize, visit: &mut impl FnMut(&[u64])) {
    if cells.len() + 1 == n {
        cells.push(left);
        visit(cells);
        cells.pop();
        return;
    }
    for k in 0..=left {
        cells.push(k);
        walk(cells, left - k, n, visit);
        cells.pop();
    }
}

/// Exact conditional p-value of U = Σx² by full enumeration (n ≤ 6, T ≤ 10).
pub fn exact_oracle(counts: &[u32], tail: Tail) -> Result<f64> {
    let n = counts.len();
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if n > ORACLE_MAX_N || total > ORACLE_MAX_TOTAL {
        return Err(StatsError::Infeasible {
            n,
            total,
            max_n: ORACLE_MAX_N,
            max_total: ORACLE_MAX_TOTAL,
        });
    }
    if n < 2 || total == 0 {
        return Err(StatsError::Domain(
            "oracle needs n >= 2 and a positive total".into(),
        ));
    }
    let observed: u64 = counts.iter().map(|&c| (c as u64).pow(2)).sum();
    let ln_norm = ln_factorial(total) - total as f64 * (n as f64).ln();
    let mut masses = TailMasses::default();
    walk(&mut Vec::with_capacity(n), total, n, &mut |cells| {
        let u: u64 = cells.iter().map(|c| c * c).sum();
        let ln_p = ln_norm - cells.iter().map(|&c| ln_factorial(c)).sum::<f64>();
        let p = ln_p.exp();
        match u.cmp(&observed) {
            std::cmp::Ordering::Less => masses.less += p,
            std::cmp::Ordering::Equal => masses.equal += p,
            std::cmp::Ordering::Greater => masses.greater += p,
        }
    });
    Ok(tail_p(masses, tail))
}

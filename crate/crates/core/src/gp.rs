//! Generalized Poisson distribution (Consul–Jain form) and its maximum
//! likelihood fit with Wald inference on the dispersion parameter.
//!
//! The pmf is P(k) = θ(θ + kδ)^{k-1} e^{-θ-kδ} / k!, with mean θ/(1-δ) and
//! variance θ/(1-δ)³. δ > 0 is overdispersion, δ < 0 underdispersion, and
//! δ = 0 is Poisson(θ). For δ < 0 the support stops at the last k with
//! θ + kδ > 0 and the remaining mass is not renormalized.
//!
//! In the generalized Poisson regression parameterization the mean is μ and
//! the dispersion is α with δ = αμ/(1 + αμ) and θ = μ/(1 + αμ).

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::{ln_factorial, normal_cdf};

const Z_975: f64 = 1.96;
const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub theta: f64,
    pub delta: f64,
}

impl GpParams {
    pub fn new(theta: f64, delta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(StatsError::Domain(format!(
                "theta must be positive, got {theta}"
            )));
        }
        if !(delta > -1.0 && delta < 1.0) {
            return Err(StatsError::Domain(format!(
                "delta must lie in (-1, 1), got {delta}"
            )));
        }
        Ok(GpParams { theta, delta })
    }

    pub fn mean(&self) -> f64 {
        self.theta / (1.0 - self.delta)
    }

    pub fn variance(&self) -> f64 {
        self.theta / (1.0 - self.delta).powi(3)
    }

    /// Largest k with positive mass, or `None` when the support is unbounded.
    pub fn support_max(&self) -> Option<u64> {
        if self.delta >= 0.0 {
            return None;
        }
        let m = (-self.theta / self.delta).floor();
        // θ + mδ must be strictly positive.
        let m = if self.theta + m * self.delta > 0.0 {
            m
        } else {
            m - 1.0
        };
        Some(m.max(0.0) as u64)
    }
}

fn ln_gp_term(k: u64, theta: f64, delta: f64) -> f64 {
    if k == 0 {
        return -theta;
    }
    let kf = k as f64;
    let inner = theta + kf * delta;
    if inner <= 0.0 {
        return f64::NEG_INFINITY;
    }
    theta.ln() + (kf - 1.0) * inner.ln() - inner - ln_factorial(k)
}

pub fn gp_pmf(k: u64, params: GpParams) -> f64 {
    ln_gp_term(k, params.theta, params.delta).exp()
}

/// Variance-to-mean ratio 1/(1-δ)².
pub fn dispersion_factor(params: GpParams) -> f64 {
    (1.0 - params.delta).powi(-2)
}

/// 1 - Σ P(k) over the truncated support when δ < 0 (zero otherwise). The
/// truncated pmf is not renormalized, so this can have either sign.
pub fn normalization_deficit(params: GpParams) -> f64 {
    match params.support_max() {
        None => 0.0,
        Some(m) => 1.0 - (0..=m).map(|k| gp_pmf(k, params)).sum::<f64>(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpFitResult {
    #[serde(flatten)]
    pub params: GpParams,
    pub se_theta: f64,
    pub se_delta: f64,
    #[serde(rename = "ci95")]
    pub ci95_delta: (f64, f64),
    #[serde(rename = "p_one_sided")]
    pub p_delta_one_sided: f64,
    #[serde(rename = "p_two_sided")]
    pub p_delta_two_sided: f64,
    pub loglik: f64,
    /// Log-likelihood of the nested Poisson fit (δ = 0, θ = x̄).
    pub poisson_loglik: f64,
    pub converged: bool,
    /// The optimum sits on the edge of the feasible region.
    pub boundary: bool,
    pub iterations: usize,
    pub normalization_deficit: f64,
    pub n: usize,
}

/// Counts with per-observation exposure scales: observation i has
/// θ_i = θ·scale_i and a common δ.
#[derive(Debug, Clone)]
pub struct GpData<'a> {
    counts: &'a [u32],
    scales: Vec<f64>,
}

impl<'a> GpData<'a> {
    pub fn new(counts: &'a [u32]) -> Self {
        GpData {
            counts,
            scales: vec![1.0; counts.len()],
        }
    }

    pub fn with_scales(counts: &'a [u32], scales: &[f64]) -> Result<Self> {
        if scales.len() != counts.len() {
            return Err(StatsError::Domain(format!(
                "{} counts but {} scales",
                counts.len(),
                scales.len()
            )));
        }
        if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(StatsError::Domain("scales must be positive".into()));
        }
        Ok(GpData {
            counts,
            scales: scales.to_vec(),
        })
    }

    fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.counts
            .iter()
            .zip(&self.scales)
            .map(|(&x, &s)| (x as f64, s))
    }

    /// Σx / Σscale, the rate estimate under δ = 0.
    fn rate(&self) -> f64 {
        let sx: f64 = self.iter().map(|(x, _)| x).sum();
        let ss: f64 = self.scales.iter().sum();
        sx / ss
    }

    pub fn feasible(&self, theta: f64, delta: f64) -> bool {
        theta > 0.0
            && delta > -1.0
            && delta < 1.0
            && self
                .iter()
                .all(|(x, s)| x == 0.0 || theta * s + delta * x > 0.0)
    }

    pub fn loglik(&self, theta: f64, delta: f64) -> f64 {
        if !self.feasible(theta, delta) {
            return f64::NEG_INFINITY;
        }
        self.counts
            .iter()
            .zip(&self.scales)
            .map(|(&x, &s)| ln_gp_term(x as u64, theta * s, delta))
            .sum()
    }

    /// Analytic gradient (∂θ, ∂δ).
    pub fn gradient(&self, theta: f64, delta: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (x, s) in self.iter() {
            let ti = theta * s;
            if x == 0.0 {
                g[0] -= s;
                continue;
            }
            let inner = ti + delta * x;
            g[0] += s * (1.0 / ti + (x - 1.0) / inner - 1.0);
            g[1] += x * (x - 1.0) / inner - x;
        }
        g
    }

    /// Analytic Hessian [[θθ, θδ], [θδ, δδ]].
    pub fn hessian(&self, theta: f64, delta: f64) -> [[f64; 2]; 2] {
        let (mut tt, mut td, mut dd) = (0.0, 0.0, 0.0);
        for (x, s) in self.iter() {
            if x == 0.0 {
                continue;
            }
            let ti = theta * s;
            let inner2 = (ti + delta * x).powi(2);
            tt -= s * s * (1.0 / (ti * ti) + (x - 1.0) / inner2);
            td -= s * x * (x - 1.0) / inner2;
            dd -= x * x * (x - 1.0) / inner2;
        }
        [[tt, td], [td, dd]]
    }

    // Profile log-likelihood along θ = rate·(1 - δ), which contains the MLE.
    fn profile(&self, delta: f64) -> f64 {
        self.loglik(self.rate() * (1.0 - delta), delta)
    }

    // Lower end of the feasible δ interval along the profile.
    fn profile_lower_bound(&self) -> f64 {
        let rate = self.rate();
        self.iter()
            .filter(|&(x, s)| x > rate * s)
            .map(|(x, s)| -rate * s / (x - rate * s))
            .fold(-1.0, f64::max)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn profile_start(data: &GpData<'_>) -> f64 {
    let lo = data.profile_lower_bound();
    let hi = 1.0;
    let span = hi - lo;
    let grid = 400;
    let at = |i: usize| lo + span * (i as f64 + 0.5) / grid as f64;
    let best = (0..grid)
        .max_by(|&i, &j| data.profile(at(i)).total_cmp(&data.profile(at(j))))
        .expect("non-empty grid");
    let a = if best == 0 {
        lo + span * 1e-9
    } else {
        at(best - 1)
    };
    let b = if best + 1 == grid {
        hi - span * 1e-9
    } else {
        at(best + 1)
    };
    golden_max(|d| data.profile(d), a, b)
}

fn invert_2x2(h: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        [h[1][1] / det, -h[0][1] / det],
        [-h[1][0] / det, h[0][0] / det],
    ])
}

/// Maximum likelihood fit of the generalized Poisson to i.i.d. counts.
pub fn gp_fit_mle(counts: &[u32]) -> Result<GpFitResult> {
    fit(&GpData::new(counts))
}

/// As [`gp_fit_mle`], with observation i having θ_i = θ·scales[i]
/// (e.g. match duration relative to 90 minutes).
pub fn gp_fit_mle_scaled(counts: &[u32], scales: &[f64]) -> Result<GpFitResult> {
    fit(&GpData::with_scales(counts, scales)?)
}

fn fit(data: &GpData<'_>) -> Result<GpFitResult> {
    let n = data.counts.len();
    if n < 3 {
        return Err(StatsError::Domain(format!(
            "generalized Poisson fit needs n >= 3, got {n}"
        )));
    }
    let rate = data.rate();
    if rate <= 0.0 {
        return Err(StatsError::Degenerate("all counts are zero".into()));
    }

    let delta0 = profile_start(data);
    let mut theta = rate * (1.0 - delta0);
    let mut delta = delta0;
    let mut ll = data.loglik(theta, delta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_NEWTON {
        let g = data.gradient(theta, delta);
        if g[0].hypot(g[1]) < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let h = data.hessian(theta, delta);
        let neg_def = h[0][0] < 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0;
        let step = match invert_2x2(h).filter(|_| neg_def) {
            Some(inv) => [
                -(inv[0][0] * g[0] + inv[0][1] * g[1]),
                -(inv[1][0] * g[0] + inv[1][1] * g[1]),
            ],
            None => [g[0] * 1e-3, g[1] * 1e-3],
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let (nt, nd) = (theta + t * step[0], delta + t * step[1]);
            let nll = data.loglik(nt, nd);
            if nll.is_finite() && nll >= ll - 1e-12 * ll.abs().max(1.0) {
                moved = (nt, nd) != (theta, delta);
                theta = nt;
                delta = nd;
                ll = nll;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }

    let lower = data.profile_lower_bound();
    let boundary = delta - lower < 1e-6 || 1.0 - delta < 1e-6;
    let cov = invert_2x2(data.hessian(theta, delta)).map(|inv| [-inv[0][0], -inv[1][1]]);
    let (var_theta, var_delta) = match cov {
        Some([vt, vd]) if vt > 0.0 && vd > 0.0 => (vt, vd),
        _ => (f64::NAN, f64::NAN),
    };
    let se_delta = var_delta.sqrt();
    let z = delta / se_delta;
    let p_one = normal_cdf(-z.abs());
    let params = GpParams { theta, delta };
    Ok(GpFitResult {
        params,
        se_theta: var_theta.sqrt(),
        se_delta,
        ci95_delta: (delta - Z_975 * se_delta, delta + Z_975 * se_delta),
        p_delta_one_sided: p_one,
        p_delta_two_sided: (2.0 * p_one).min(1.0),
        loglik: ll,
        poisson_loglik: data.loglik(rate, 0.0),
        converged: converged && !boundary && se_delta.is_finite(),
        boundary,
        iterations,
        normalization_deficit: if theta > 0.0 && delta > -1.0 && delta < 1.0 {
            normalization_deficit(params)
        } else {
            f64::NAN
        },
        n,
    })
}

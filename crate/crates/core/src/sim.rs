//! Monte Carlo tournaments under a homogeneous Poisson scoring process.
//!
//! Replicate `r` draws from ChaCha8 seeded with the study seed on stream
//! `r`, so every replicate is reproducible on its own and the report does
//! not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{
    chi_square_gof, expected_frequencies, expected_frequencies_exposure, PoolingRule,
};
use crate::dataset::{CountScope, GoalEvent, Match, Side, Stage, Tournament, NORMAL_TIME};
use crate::dispersion::{dispersion_test, Tail};
use crate::error::{Result, StatsError};
use crate::gp::gp_fit_mle;
use crate::survival::{exp_fit, extract_intervals, km_estimate, km_median};

pub const DEFAULT_SEED: u64 = 20_200_611;
pub const RNG_ALGORITHM: &str = "ChaCha8 (seed_from_u64(seed), stream = replicate index)";
pub const ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Goals per minute.
    pub rate: f64,
    /// Match durations in minutes, one entry per simulated match.
    pub durations: Vec<u32>,
    pub replicates: usize,
    pub seed: u64,
}

impl SimConfig {
    /// Null model shaped like the bundled tournament: 43 matches of 90
    /// minutes and 8 of 120 at 142 goals per 4830 minutes.
    pub fn euro2020_null(replicates: usize) -> Self {
        let mut durations = vec![90; 43];
        durations.extend([120; 8]);
        SimConfig {
            rate: 142.0 / 4830.0,
            durations,
            replicates,
            seed: DEFAULT_SEED,
        }
    }

    /// Durations taken from an observed tournament.
    pub fn like(t: &Tournament, rate: f64, replicates: usize, seed: u64) -> Self {
        SimConfig {
            rate,
            durations: t.matches.iter().map(|m| m.duration).collect(),
            replicates,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(StatsError::Domain(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if self.replicates == 0 {
            return Err(StatsError::Domain(
                "at least one replicate is required".into(),
            ));
        }
        if self.durations.is_empty() {
            return Err(StatsError::Empty);
        }
        if self.durations.contains(&0) {
            return Err(StatsError::Domain(
                "match durations must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// One match: Poisson(rate·duration) goals at i.i.d. uniform minutes.
pub fn simulate_match<R: Rng + ?Sized>(id: String, rate: f64, duration: u32, rng: &mut R) -> Match {
    let mean = rate * duration as f64;
    let n = match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as usize,
        Err(_) => 0,
    };
    let mut goals: Vec<GoalEvent> = (0..n)
        .map(|_| GoalEvent {
            minute: rng.random_range(1..=duration),
            side: if rng.random_bool(0.5) {
                Side::A
            } else {
                Side::B
            },
        })
        .collect();
    goals.sort_by_key(|g| g.minute);
    Match {
        id,
        stage: if duration > NORMAL_TIME {
            Stage::RoundOf16
        } else {
            Stage::Group
        },
        team_a: "A".into(),
        team_b: "B".into(),
        duration,
        goals,
    }
}

pub fn simulate_tournament(config: &SimConfig, replicate: u64) -> Tournament {
    let mut rng = replicate_rng(config.seed, replicate);
    Tournament {
        matches: config
            .durations
            .iter()
            .enumerate()
            .map(|(i, &d)| simulate_match(format!("S{i:03}"), config.rate, d, &mut rng))
            .collect(),
    }
}

/// Statistics from one simulated tournament; `None` marks a failed analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub replicate: u64,
    pub total_goals: u64,
    /// Dispersion index of the normal-time counts.
    pub d: Option<f64>,
    pub p_d_asymptotic: Option<f64>,
    pub p_d_exact: Option<f64>,
    /// Normal-time χ² goodness of fit against Poisson(x̄).
    pub gof_statistic: Option<f64>,
    pub gof_p: Option<f64>,
    /// Full-match χ² goodness of fit against the exposure mixture.
    pub gof_exposure_p: Option<f64>,
    /// Generalized Poisson δ̂ on the normal-time counts.
    pub delta_hat: Option<f64>,
    pub km_median: Option<u32>,
    pub lambda_hat: Option<f64>,
}

pub fn run_replicate(config: &SimConfig, replicate: u64) -> ReplicateStats {
    let t = simulate_tournament(config, replicate);
    let normal = t.count_view(CountScope::NormalTime).ok();
    let normal = normal.as_ref().map(|v| v.counts.as_slice()).unwrap_or(&[]);

    let disp = dispersion_test(normal, Tail::Upper, true).ok();
    let gof = expected_frequencies(normal, PoolingRule::default())
        .and_then(|tab| chi_square_gof(&tab))
        .ok();
    let gof_exposure_p = t.count_view(CountScope::Full).ok().and_then(|full| {
        let exposure = t.total_exposure() as f64;
        let rate = full.total() as f64 / exposure;
        expected_frequencies_exposure(&full.counts, &full.exposures, rate, PoolingRule::default())
            .and_then(|tab| chi_square_gof(&tab))
            .ok()
            .map(|g| g.p_value)
    });
    let gp = gp_fit_mle(normal).ok().filter(|f| f.converged);
    let intervals = extract_intervals(&t);
    let km = km_estimate(&intervals).ok();

    ReplicateStats {
        replicate,
        total_goals: t.total_goals(),
        d: disp.as_ref().map(|r| r.d),
        p_d_asymptotic: disp.as_ref().and_then(|r| r.p_asymptotic),
        p_d_exact: disp.as_ref().and_then(|r| r.p_exact),
        gof_statistic: gof.map(|g| g.statistic),
        gof_p: gof.map(|g| g.p_value),
        gof_exposure_p,
        delta_hat: gp.map(|f| f.params.delta),
        km_median: km.as_ref().and_then(km_median),
        lambda_hat: exp_fit(&intervals).ok().map(|f| f.lambda),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub alpha: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSummary {
    pub name: String,
    /// Replicates with a usable p-value.
    pub available: usize,
    pub rejection: Vec<Rejection>,
    /// Kolmogorov–Smirnov distance from Uniform(0, 1).
    pub ks_uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub name: String,
    pub available: usize,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub rng: String,
    pub p_values: Vec<PValueSummary>,
    pub quantiles: Vec<Quantiles>,
    /// Replicates where the exact test fell back to the χ² approximation.
    pub exact_fallbacks: usize,
    pub replicates: Vec<ReplicateStats>,
}

impl SimReport {
    pub fn p_summary(&self, name: &str) -> Option<&PValueSummary> {
        self.p_values.iter().find(|p| p.name == name)
    }

    pub fn quantile(&self, name: &str) -> Option<&Quantiles> {
        self.quantiles.iter().find(|q| q.name == name)
    }

    /// Per-replicate statistics as CSV (empty fields for failed analyses).
    pub fn replicates_csv(&self) -> std::result::Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.replicates {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
    }
}

/// KS distance of a sample from Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn summarize_p(name: &str, ps: Vec<f64>) -> PValueSummary {
    let n = ps.len().max(1) as f64;
    PValueSummary {
        name: name.into(),
        available: ps.len(),
        rejection: ALPHAS
            .iter()
            .map(|&alpha| Rejection {
                alpha,
                rate: ps.iter().filter(|&&p| p <= alpha).count() as f64 / n,
            })
            .collect(),
        ks_uniform: if ps.is_empty() {
            f64::NAN
        } else {
            ks_uniform(&ps)
        },
    }
}

fn summarize_q(name: &str, mut v: Vec<f64>) -> Quantiles {
    v.sort_by(f64::total_cmp);
    Quantiles {
        name: name.into(),
        available: v.len(),
        q025: quantile_sorted(&v, 0.025),
        q500: quantile_sorted(&v, 0.5),
        q975: quantile_sorted(&v, 0.975),
    }
}

/// Runs every analysis on `config.replicates` simulated tournaments.
pub fn calibration_study(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let replicates: Vec<ReplicateStats> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect();

    let pick = |f: fn(&ReplicateStats) -> Option<f64>| -> Vec<f64> {
        replicates.iter().filter_map(f).collect()
    };
    let p_values = vec![
        summarize_p("dispersion_exact", pick(|r| r.p_d_exact)),
        summarize_p("dispersion_asymptotic", pick(|r| r.p_d_asymptotic)),
        summarize_p("gof", pick(|r| r.gof_p)),
        summarize_p("gof_exposure", pick(|r| r.gof_exposure_p)),
    ];
    let quantiles = vec![
        summarize_q("d", pick(|r| r.d)),
        summarize_q("delta_hat", pick(|r| r.delta_hat)),
        summarize_q("km_median", pick(|r| r.km_median.map(f64::from))),
        summarize_q("lambda_hat", pick(|r| r.lambda_hat)),
    ];
    let exact_fallbacks = replicates
        .iter()
        .filter(|r| r.p_d_asymptotic.is_some() && r.p_d_exact.is_none())
        .count();
    Ok(SimReport {
        config: config.clone(),
        rng: RNG_ALGORITHM.into(),
        p_values,
        quantiles,
        exact_fallbacks,
        replicates,
    })
}

use std::path::Path;

use anyhow::{bail, Context, Result};
use goalflow::dispersion::{EXACT_MAX_N, EXACT_MAX_TOTAL};
use goalflow::gp::dispersion_factor;
use goalflow::survival::{extract, survival_svg};
use goalflow::{
    calibration_study, chi_square_gof, compare_curves, dispersion_test, exp_fit, exp_survival,
    expected_frequencies, expected_frequencies_exposure, gp_fit_mle, gp_fit_mle_scaled,
    km_estimate, mean_variance, CountScope, CountView, PoolingRule, SimConfig, Tail, Tournament,
};
use serde_json::json;

use crate::output::{Report, Table};
use crate::{DispersionScope, FitScope, GofScope};

pub fn load(path: &Path) -> Result<Tournament> {
    Tournament::from_path(path).with_context(|| format!("dataset {}", path.display()))
}

pub fn pooling(start: Option<u32>, min_expected: Option<f64>) -> Result<PoolingRule> {
    Ok(match (start, min_expected) {
        (Some(k), _) if k < 2 => bail!("--pool-start must be at least 2"),
        (Some(k), _) => PoolingRule::PoolStart(k),
        (None, Some(x)) if x.is_nan() || x <= 0.0 => bail!("--pool-min-expected must be positive"),
        (None, Some(x)) => PoolingRule::MinExpected(x),
        (None, None) => PoolingRule::default(),
    })
}

fn view(t: &Tournament, scope: CountScope) -> Result<CountView> {
    Ok(t.count_view(scope)?)
}

pub fn summary(t: &Tournament) -> Result<Report> {
    let mut r = Report::default();
    let normal = view(t, CountScope::NormalTime)?;
    let (mean, var) = mean_variance(&normal.counts)?;
    let extra = t.count_view(CountScope::ExtraTime).ok();
    let extra_goals = extra.as_ref().map_or(0, |v| v.total());
    let extra_matches = extra.as_ref().map_or(0, |v| v.len());

    r.line(format!(
        "matches: {}, goals: {}, mean {mean:.2}/match (normal time)",
        t.len(),
        t.total_goals()
    ));
    r.line(format!(
        "normal-time goals: {}, variance {var:.2}",
        normal.total()
    ));
    r.line(format!(
        "extra-time goals: {extra_goals} in {extra_matches} matches"
    ));
    r.line(format!("exposure: {} minutes", t.total_exposure()));

    let mut durations: Vec<(u32, usize)> = Vec::new();
    for m in &t.matches {
        match durations.iter_mut().find(|(d, _)| *d == m.duration) {
            Some(entry) => entry.1 += 1,
            None => durations.push((m.duration, 1)),
        }
    }
    durations.sort_unstable();
    for (minutes, count) in &durations {
        r.line(format!("  {count} matches of {minutes} minutes"));
    }

    r.set("matches", t.len())?;
    r.set("goals", t.total_goals())?;
    r.set("normal_time_goals", normal.total())?;
    r.set("normal_time_mean", mean)?;
    r.set("normal_time_variance", var)?;
    r.set("extra_time_goals", extra_goals)?;
    r.set("extra_time_matches", extra_matches)?;
    r.set("exposure_minutes", t.total_exposure())?;
    r.set(
        "durations",
        durations
            .iter()
            .map(|(minutes, matches)| json!({ "minutes": minutes, "matches": matches }))
            .collect::<Vec<_>>(),
    )?;

    let mut table = Table::new([
        "match_id",
        "stage",
        "team_a",
        "team_b",
        "duration_min",
        "normal_time",
        "extra_time",
        "total",
    ]);
    for m in &t.matches {
        table.push(vec![
            m.id.clone(),
            m.stage.label().to_string(),
            m.team_a.clone(),
            m.team_b.clone(),
            m.duration.to_string(),
            m.normal_time_goals().to_string(),
            m.extra_time_goals().to_string(),
            m.total_goals().to_string(),
        ]);
    }
    r.table = table;
    Ok(r)
}

pub fn gof(t: &Tournament, scope: GofScope, rule: PoolingRule) -> Result<Report> {
    let (table, what) = match scope {
        GofScope::Normal => {
            let v = view(t, CountScope::NormalTime)?;
            (
                expected_frequencies(&v.counts, rule)?,
                "normal-time counts vs Poisson",
            )
        }
        GofScope::Full => {
            let v = view(t, CountScope::Full)?;
            let rate = v.total() as f64 / t.total_exposure() as f64;
            (
                expected_frequencies_exposure(&v.counts, &v.exposures, rate, rule)?,
                "full-match counts vs exposure-weighted Poisson mixture",
            )
        }
    };
    let res = chi_square_gof(&table)?;
    let mut r = Report::default();
    r.line(format!("chi-square goodness of fit: {what}"));
    r.line(format!("n {}, mean {:.4}", table.n, table.mu_hat));
    r.line(format!("{:>6} {:>9} {:>9}", "cell", "observed", "expected"));
    let mut cells = Table::new(["cell", "lo", "hi", "observed", "expected"]);
    let mut json_cells = Vec::new();
    for c in &table.cells {
        r.line(format!(
            "{:>6} {:>9} {:>9.3}",
            c.label.to_string(),
            c.observed,
            c.expected
        ));
        cells.push(vec![
            c.label.to_string(),
            c.label.lo.to_string(),
            c.label.hi.map(|h| h.to_string()).unwrap_or_default(),
            c.observed.to_string(),
            c.expected.to_string(),
        ]);
        json_cells.push(json!({
            "cell": c.label.to_string(),
            "lo": c.label.lo,
            "hi": c.label.hi,
            "observed": c.observed,
            "expected": c.expected,
        }));
    }
    r.line(format!(
        "statistic {:.4}, df {}, p {:.4}",
        res.statistic, res.df, res.p_value
    ));

    r.set(
        "scope",
        match scope {
            GofScope::Normal => "normal",
            GofScope::Full => "full",
        },
    )?;
    r.set("pooling", rule)?;
    r.set("n", table.n)?;
    r.set("mean", table.mu_hat)?;
    r.set("cells", json_cells)?;
    r.set("statistic", res.statistic)?;
    r.set("df", res.df)?;
    r.set("p_value", res.p_value)?;
    r.table = cells;
    Ok(r)
}

fn count_scope(scope: DispersionScope) -> CountScope {
    match scope {
        DispersionScope::Normal => CountScope::NormalTime,
        DispersionScope::ExtraTime => CountScope::ExtraTime,
        DispersionScope::Full90 => CountScope::Full90,
        DispersionScope::Full120 => CountScope::Full120,
        DispersionScope::Full => CountScope::Full,
    }
}

pub fn dispersion(
    t: &Tournament,
    scope: DispersionScope,
    exact: bool,
    tail: Tail,
) -> Result<Report> {
    let scope = count_scope(scope);
    let v = view(t, scope)?;
    let res = dispersion_test(&v.counts, tail, exact)?;
    let mut r = Report::default();
    r.line(format!("dispersion test ({scope} counts, {tail} tail)"));
    r.line(format!(
        "D = {:.6}, n {}, df {}, total {}",
        res.d, res.n, res.df, res.total
    ));
    if let Some(p) = res.p_asymptotic {
        r.line(format!("asymptotic p = {p:.4}"));
    }
    match res.p_exact {
        Some(p) => r.line(format!("exact p = {p:.4}")),
        None if exact => r.line(format!(
            "exact p unavailable beyond n {EXACT_MAX_N} or total {EXACT_MAX_TOTAL}; asymptotic only"
        )),
        None => {}
    }
    r.set("scope", scope)?;
    r.set("d", res.d)?;
    r.set("n", res.n)?;
    r.set("df", res.df)?;
    r.set("total", res.total)?;
    r.set("tail", tail.to_string())?;
    r.set("p_asymptotic", res.p_asymptotic)?;
    r.set("p_exact", res.p_exact)?;
    r.set("exact_requested", exact)?;
    r.set("exact_flag", res.exact_flag)?;
    r.set(
        "exact_limits",
        json!({ "n": EXACT_MAX_N, "total": EXACT_MAX_TOTAL }),
    )?;
    Ok(r)
}

pub fn gpfit(t: &Tournament, scope: FitScope, exposure: bool) -> Result<Report> {
    let v = view(
        t,
        match scope {
            FitScope::Normal => CountScope::NormalTime,
            FitScope::Full => CountScope::Full,
        },
    )?;
    let fit = if exposure {
        let scales: Vec<f64> = v.exposures.iter().map(|&e| e as f64 / 90.0).collect();
        gp_fit_mle_scaled(&v.counts, &scales)?
    } else {
        gp_fit_mle(&v.counts)?
    };
    let factor = dispersion_factor(fit.params);
    let mut r = Report::default();
    let adj = if exposure {
        ", theta scaled by duration/90"
    } else {
        ""
    };
    r.line(format!("generalized Poisson fit ({} counts{adj})", v.scope));
    r.line(format!(
        "theta = {:.4} (se {:.4})",
        fit.params.theta, fit.se_theta
    ));
    r.line(format!(
        "delta = {:.4} (se {:.4})",
        fit.params.delta, fit.se_delta
    ));
    r.line(format!(
        "0.95 CI for delta: [{:.4}, {:.4}]",
        fit.ci95_delta.0, fit.ci95_delta.1
    ));
    r.line(format!(
        "Wald test of delta = 0: one-sided p {:.4}, two-sided p {:.4}",
        fit.p_delta_one_sided, fit.p_delta_two_sided
    ));
    r.line(format!("variance/mean factor {factor:.4}"));
    r.line(format!(
        "log-likelihood {:.4} (Poisson {:.4})",
        fit.loglik, fit.poisson_loglik
    ));
    if !fit.converged {
        r.line("warning: optimizer did not converge");
    }
    if fit.boundary {
        r.line("warning: estimate on the boundary of the parameter space");
    }
    let mut json = serde_json::to_value(&fit)?;
    if let Some(obj) = json.as_object_mut() {
        obj.insert("scope".into(), json!(v.scope));
        obj.insert("exposure_adjusted".into(), json!(exposure));
        obj.insert("dispersion_factor".into(), json!(factor));
        obj.insert("ci_level".into(), json!(0.95));
        if exposure {
            obj.insert("exposure_unit_minutes".into(), json!(90));
        }
        r.json = obj.clone();
    }
    Ok(r)
}

pub fn survival(t: &Tournament, plot: Option<&Path>) -> Result<Report> {
    let ex = extract(t);
    let intervals = &ex.intervals;
    let km = km_estimate(intervals)?;
    let fit = exp_fit(intervals)?;
    let cmp = compare_curves(&km, &fit);
    let mut r = Report::default();
    r.line(format!(
        "observations: {} ({} events, {} censored)",
        km.n_obs, km.n_events, km.n_censored
    ));
    r.line(format!(
        "matches ending on a goal: {}",
        ex.final_minute_matches.len()
    ));
    r.line(format!(
        "exponential: lambda {:.4}/min, mean wait {:.2} min, median {:.2} min",
        fit.lambda,
        fit.mean_wait(),
        fit.median
    ));
    match km.median() {
        Some(m) => r.line(format!("Kaplan-Meier median: {m} min")),
        None => r.line("Kaplan-Meier median: not reached"),
    }
    r.line(format!(
        "max |KM - exponential| = {:.4} at {} min",
        cmp.max_abs_diff, cmp.max_diff_time
    ));
    if let Some(d) = cmp.diff_at_median {
        r.line(format!("KM median - exponential median = {d:.2} min"));
    }
    if let Some(path) = plot {
        std::fs::write(path, survival_svg(&km, &fit, 120))
            .with_context(|| format!("cannot write plot {}", path.display()))?;
        r.line(format!("plot written to {}", path.display()));
        r.set("plot", path.display().to_string())?;
    }

    r.set("observations", km.n_obs)?;
    r.set("events", km.n_events)?;
    r.set("censored", km.n_censored)?;
    r.set("final_minute_matches", &ex.final_minute_matches)?;
    r.set("final_minute_match_count", ex.final_minute_matches.len())?;
    r.set("floored_gaps", ex.floored_gaps)?;
    r.set(
        "exponential",
        json!({
            "lambda": fit.lambda,
            "mean_wait": fit.mean_wait(),
            "median": fit.median,
            "total_events": fit.total_events,
            "total_time": fit.total_time,
        }),
    )?;
    r.set("km_median", km.median())?;
    r.set("comparison", cmp)?;
    r.set("km_steps", &km.steps)?;

    let mut table = Table::new([
        "time",
        "at_risk",
        "events",
        "censored",
        "survival",
        "std_err",
        "exp_survival",
    ]);
    for s in &km.steps {
        table.push(vec![
            s.time.to_string(),
            s.at_risk.to_string(),
            s.events.to_string(),
            s.censored.to_string(),
            s.survival.to_string(),
            s.std_err.to_string(),
            exp_survival(s.time as f64, fit.lambda).to_string(),
        ]);
    }
    r.table = table;
    Ok(r)
}

pub fn simulate(t: &Tournament, rate: Option<f64>, replicates: usize, seed: u64) -> Result<Report> {
    let rate = rate.unwrap_or(t.total_goals() as f64 / t.total_exposure() as f64);
    let config = SimConfig::like(t, rate, replicates, seed);
    let study = calibration_study(&config)?;
    let mut r = Report::default();
    r.line(format!(
        "{replicates} null tournaments of {} matches at {rate:.6} goals/min, seed {seed}",
        config.durations.len()
    ));
    r.line(format!("rng: {}", study.rng));
    r.line("rejection rates at alpha 0.01 / 0.05 / 0.1, KS distance from uniform:");
    for p in &study.p_values {
        let rates: Vec<String> = p
            .rejection
            .iter()
            .map(|x| format!("{:.4}", x.rate))
            .collect();
        r.line(format!(
            "  {:<22} {} (KS {:.4}, {} replicates)",
            p.name,
            rates.join(" / "),
            p.ks_uniform,
            p.available
        ));
    }
    r.line("quantiles at 0.025 / 0.5 / 0.975:");
    for q in &study.quantiles {
        r.line(format!(
            "  {:<22} {:.4} / {:.4} / {:.4}",
            q.name, q.q025, q.q500, q.q975
        ));
    }
    r.line(format!(
        "exact-test fallbacks to asymptotic: {}",
        study.exact_fallbacks
    ));

    r.set("rate", rate)?;
    r.set("replicates", replicates)?;
    r.set("seed", seed)?;
    r.set("matches", config.durations.len())?;
    r.set("rng", &study.rng)?;
    r.set("alphas", goalflow::sim::ALPHAS)?;
    r.set("p_values", &study.p_values)?;
    r.set("quantiles", &study.quantiles)?;
    r.set("quantile_levels", [0.025, 0.5, 0.975])?;
    r.set("exact_fallbacks", study.exact_fallbacks)?;
    r.raw_csv = Some(study.replicates_csv()?);
    Ok(r)
}

pub fn report(t: &Tournament, replicates: usize, seed: u64) -> Result<Report> {
    let mut r = Report::default();
    r.absorb("summary", summary(t)?);
    r.absorb(
        "gof_normal",
        gof(t, GofScope::Normal, PoolingRule::default())?,
    );
    r.absorb(
        "gof_full_exposure",
        gof(t, GofScope::Full, PoolingRule::default())?,
    );
    r.absorb(
        "dispersion_normal",
        dispersion(t, DispersionScope::Normal, false, Tail::Upper)?,
    );
    for (key, scope) in [
        ("dispersion_extra_time", DispersionScope::ExtraTime),
        ("dispersion_full_90", DispersionScope::Full90),
        ("dispersion_full_120", DispersionScope::Full120),
    ] {
        if t.count_view(count_scope(scope)).is_ok() {
            r.absorb(key, dispersion(t, scope, true, Tail::Upper)?);
        }
    }
    r.absorb("gpfit", gpfit(t, FitScope::Normal, false)?);
    r.absorb("survival", survival(t, None)?);
    if replicates > 0 {
        r.absorb("simulate", simulate(t, None, replicates, seed)?);
    }
    Ok(r)
}

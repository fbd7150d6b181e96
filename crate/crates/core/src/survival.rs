//! Censored waiting times between goals, the product-limit (Kaplan–Meier)
//! estimator and the censored exponential fit.
//!
//! Each match contributes the wait from kick-off to the first goal, the gaps
//! between successive goals, and a right-censored residual from the last
//! goal (or kick-off) to the final whistle. Timing runs continuously through
//! extra time. All intervals are pooled as independent observations.

use serde::{Deserialize, Serialize};

use crate::dataset::Tournament;
use crate::error::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    /// Minutes, at least 1.
    pub duration: u32,
    /// True when the interval ends with a goal, false when censored.
    pub event: bool,
    pub match_id: String,
}

/// Extracted intervals plus notes on adjustments made at minute resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub intervals: Vec<Interval>,
    /// Goal pairs sharing a minute whose gap was floored to 1.
    pub floored_gaps: usize,
    /// Matches whose last goal came in the final minute (no censored residual).
    pub final_minute_matches: Vec<String>,
}

pub fn extract(t: &Tournament) -> Extraction {
    let mut out = Extraction::default();
    for m in &t.matches {
        let mut prev = 0;
        for g in &m.goals {
            let gap = g.minute - prev;
            if gap == 0 {
                out.floored_gaps += 1;
            }
            out.intervals.push(Interval {
                duration: gap.max(1),
                event: true,
                match_id: m.id.clone(),
            });
            prev = g.minute;
        }
        if m.duration > prev {
            out.intervals.push(Interval {
                duration: m.duration - prev,
                event: false,
                match_id: m.id.clone(),
            });
        } else {
            out.final_minute_matches.push(m.id.clone());
        }
    }
    out
}

pub fn extract_intervals(t: &Tournament) -> Vec<Interval> {
    extract(t).intervals
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: u32,
    pub at_risk: u32,
    pub events: u32,
    /// Censored observations at this time (kept after the events).
    pub censored: u32,
    pub survival: f64,
    /// Greenwood standard error of the survival estimate.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    /// One entry per distinct event time, in increasing order.
    pub steps: Vec<KmStep>,
    pub n_obs: usize,
    pub n_events: usize,
    pub n_censored: usize,
}

impl KmCurve {
    /// Ŝ(t), right-continuous.
    pub fn survival_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.time as f64 <= t)
            .last()
            .map_or(1.0, |s| s.survival)
    }

    /// Smallest event time with Ŝ(t) ≤ 1/2; `None` if never reached.
    pub fn median(&self) -> Option<u32> {
        km_median(self)
    }
}

/// Product-limit estimate; at tied times events are counted before
/// censorings.
pub fn km_estimate(intervals: &[Interval]) -> Result<KmCurve> {
    if intervals.is_empty() {
        return Err(StatsError::Empty);
    }
    let n_events = intervals.iter().filter(|i| i.event).count();
    if n_events == 0 {
        return Err(StatsError::Degenerate("no event intervals".into()));
    }
    let mut sorted: Vec<(u32, bool)> = intervals.iter().map(|i| (i.duration, i.event)).collect();
    sorted.sort_unstable();

    let mut at_risk = sorted.len() as u32;
    let mut survival = 1.0;
    let mut greenwood = 0.0;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let time = sorted[i].0;
        let mut events = 0;
        let mut censored = 0;
        while i < sorted.len() && sorted[i].0 == time {
            if sorted[i].1 {
                events += 1;
            } else {
                censored += 1;
            }
            i += 1;
        }
        if events > 0 {
            let (d, n) = (events as f64, at_risk as f64);
            survival *= 1.0 - d / n;
            if at_risk > events {
                greenwood += d / (n * (n - d));
            }
            steps.push(KmStep {
                time,
                at_risk,
                events,
                censored,
                survival,
                std_err: survival * greenwood.sqrt(),
            });
        }
        at_risk -= events + censored;
    }
    Ok(KmCurve {
        steps,
        n_obs: intervals.len(),
        n_events,
        n_censored: intervals.len() - n_events,
    })
}

pub fn km_median(curve: &KmCurve) -> Option<u32> {
    curve
        .steps
        .iter()
        .find(|s| s.survival <= 0.5)
        .map(|s| s.time)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    /// Goals per minute.
    pub lambda: f64,
    /// ln 2 / λ, in minutes.
    pub median: f64,
    pub total_events: usize,
    pub total_time: u64,
}

impl ExpFit {
    /// Mean waiting time 1/λ in minutes.
    pub fn mean_wait(&self) -> f64 {
        1.0 / self.lambda
    }
}

/// Censored exponential MLE: events / total time at risk.
pub fn exp_fit(intervals: &[Interval]) -> Result<ExpFit> {
    let total_events = intervals.iter().filter(|i| i.event).count();
    let total_time: u64 = intervals.iter().map(|i| i.duration as u64).sum();
    if total_events == 0 {
        return Err(StatsError::Degenerate(
            "no events to estimate a rate".into(),
        ));
    }
    let lambda = total_events as f64 / total_time as f64;
    Ok(ExpFit {
        lambda,
        median: std::f64::consts::LN_2 / lambda,
        total_events,
        total_time,
    })
}

/// e^{-λt}
pub fn exp_survival(t: f64, lambda: f64) -> f64 {
    (-lambda * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveComparison {
    /// max over KM step times of |Ŝ(t) - e^{-λt}|.
    pub max_abs_diff: f64,
    pub max_diff_time: u32,
    /// KM median minus exponential median, in minutes; `None` if the KM
    /// curve never reaches 1/2.
    pub diff_at_median: Option<f64>,
}

pub fn compare_curves(km: &KmCurve, fit: &ExpFit) -> CurveComparison {
    let (max_abs_diff, max_diff_time) = km
        .steps
        .iter()
        .map(|s| {
            (
                (s.survival - exp_survival(s.time as f64, fit.lambda)).abs(),
                s.time,
            )
        })
        .fold(
            (0.0, 0),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        );
    CurveComparison {
        max_abs_diff,
        max_diff_time,
        diff_at_median: km_median(km).map(|m| m as f64 - fit.median),
    }
}

/// Static SVG overlaying the KM step function and the fitted exponential
/// survival curve on 0–`max_minutes`.
pub fn survival_svg(km: &KmCurve, fit: &ExpFit, max_minutes: u32) -> String {
    use std::fmt::Write;

    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x = |t: f64| left + pw * t / max_minutes as f64;
    let y = |s: f64| top + ph * (1.0 - s);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = left,
        t = top,
        b = top + ph,
        r = left + pw
    );
    for tick in (0..=max_minutes).step_by(15) {
        let tx = x(tick as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{tx:.1}" y1="{y0:.1}" x2="{tx:.1}" y2="{y1:.1}" stroke="black"/><text x="{tx:.1}" y="{ty:.1}" text-anchor="middle">{tick}</text>"#,
            y0 = top + ph,
            y1 = top + ph + 5.0,
            ty = top + ph + 18.0
        );
    }
    for i in 0..=5 {
        let s = i as f64 / 5.0;
        let sy = y(s);
        let _ = writeln!(
            svg,
            r#"<line x1="{x0:.1}" y1="{sy:.1}" x2="{left}" y2="{sy:.1}" stroke="black"/><text x="{tx:.1}" y="{ty:.1}" text-anchor="end">{s:.1}</text>"#,
            x0 = left - 5.0,
            tx = left - 8.0,
            ty = sy + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{cx:.1}" y="{by:.1}" text-anchor="middle">minutes</text>"#,
        cx = left + pw / 2.0,
        by = h - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {cy:.1}) rotate(-90)" text-anchor="middle">survival probability</text>"#,
        cy = top + ph / 2.0
    );

    let mut path = format!("M{:.2} {:.2}", x(0.0), y(1.0));
    for s in km.steps.iter().filter(|s| s.time <= max_minutes) {
        let _ = write!(path, " H{:.2} V{:.2}", x(s.time as f64), y(s.survival));
    }
    let _ = write!(path, " H{:.2}", x(max_minutes as f64));
    let _ = writeln!(
        svg,
        r#"<path d="{path}" fill="none" stroke="steelblue" stroke-width="2"/>"#
    );

    let mut curve = String::new();
    for t in 0..=max_minutes {
        let cmd = if t == 0 { 'M' } else { 'L' };
        let _ = write!(
            curve,
            "{cmd}{:.2} {:.2} ",
            x(t as f64),
            y(exp_survival(t as f64, fit.lambda))
        );
    }
    let _ = writeln!(
        svg,
        r#"<path d="{}" fill="none" stroke="firebrick" stroke-width="1.5" stroke-dasharray="6 3"/>"#,
        curve.trim_end()
    );
    let _ = writeln!(
        svg,
        r#"<text x="{lx:.1}" y="{ly:.1}" fill="steelblue">Kaplan-Meier</text><text x="{lx:.1}" y="{ly2:.1}" fill="firebrick">exponential, rate {rate:.4}/min</text>"#,
        lx = left + pw - 200.0,
        ly = top + 20.0,
        ly2 = top + 38.0,
        rate = fit.lambda
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset;

    fn iv(duration: u32, event: bool) -> Interval {
        Interval {
            duration,
            event,
            match_id: String::new(),
        }
    }

    fn tournament(rows: &str) -> Tournament {
        parse_dataset(&format!(
            "match_id,stage,team_a,team_b,duration_min,goal_timeline\n{rows}"
        ))
        .unwrap()
    }

    #[test]
    fn goalless_match_is_one_censored_interval() {
        let ivs = extract_intervals(&tournament("M,Group,A,B,90,\n"));
        assert_eq!(
            ivs,
            vec![Interval {
                duration: 90,
                event: false,
                match_id: "M".into()
            }]
        );
    }

    #[test]
    fn one_minute_gap() {
        let ext = extract(&tournament("M,QuarterFinal,A,B,90,\"31:B;44:B;45:A\"\n"));
        let d: Vec<_> = ext
            .intervals
            .iter()
            .map(|i| (i.duration, i.event))
            .collect();
        assert_eq!(d, [(31, true), (13, true), (1, true), (45, false)]);
    }

    #[test]
    fn same_minute_goals_floor_to_one() {
        let ext = extract(&tournament("M,Group,A,B,90,\"45+1:A;45+3:B\"\n"));
        assert_eq!(ext.floored_gaps, 1);
        assert_eq!(ext.intervals[1].duration, 1);
    }

    #[test]
    fn final_minute_goal_drops_residual() {
        let ext = extract(&tournament("M,RoundOf16,A,B,120,\"27:B;43:A;120+1:B\"\n"));
        assert!(ext.intervals.iter().all(|i| i.event));
        assert_eq!(ext.final_minute_matches, ["M"]);
    }

    #[test]
    fn km_all_events_at_one_time() {
        let km = km_estimate(&[iv(5, true), iv(5, true)]).unwrap();
        assert_eq!(km.survival_at(4.99), 1.0);
        assert_eq!(km.survival_at(5.0), 0.0);
    }

    #[test]
    fn km_hand_example() {
        let km = km_estimate(&[
            iv(3, false),
            iv(5, true),
            iv(5, true),
            iv(8, false),
            iv(10, true),
        ])
        .unwrap();
        assert_eq!(km.steps.len(), 2);
        assert_eq!((km.steps[0].at_risk, km.steps[0].events), (4, 2));
        assert_eq!(km.survival_at(5.0), 0.5);
        assert_eq!(km.survival_at(9.0), 0.5);
        assert_eq!(km.survival_at(10.0), 0.0);
        assert_eq!(km_median(&km), Some(5));
        assert_eq!((km.n_events, km.n_censored), (3, 2));
    }

    #[test]
    fn tie_events_precede_censorings() {
        let km = km_estimate(&[iv(4, false), iv(4, true), iv(6, true)]).unwrap();
        assert_eq!(km.steps[0].at_risk, 3);
        assert!((km.steps[0].survival - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.steps[1].at_risk, 1);
    }

    #[test]
    fn medians() {
        assert_eq!(km_median(&km_estimate(&[iv(7, true)]).unwrap()), Some(7));
        let mut ivs = vec![iv(3, true)];
        ivs.extend((0..9).map(|_| iv(20, false)));
        let km = km_estimate(&ivs).unwrap();
        assert!((km.steps[0].survival - 0.9).abs() < 1e-15);
        assert_eq!(km_median(&km), None);
    }

    #[test]
    fn km_errors() {
        assert!(km_estimate(&[]).is_err());
        assert!(km_estimate(&[iv(3, false)]).is_err());
    }

    #[test]
    fn exponential() {
        let f = exp_fit(&[iv(10, true)]).unwrap();
        assert_eq!(f.lambda, 0.1);
        assert!(exp_fit(&[iv(10, false)]).is_err());
        assert_eq!(exp_survival(0.0, 0.3), 1.0);
        assert!((exp_survival(34.0, 0.0294) - 0.368).abs() < 1e-3);
        assert!((exp_survival(23.6, 0.0294) - 0.5).abs() < 2e-3);
    }

    #[test]
    fn identical_single_step() {
        // Ŝ(1) = 1/2 and e^{-ln2·1} = 1/2.
        let km = km_estimate(&[iv(1, true), iv(2, false)]).unwrap();
        let fit = ExpFit {
            lambda: -(0.5f64).ln(),
            median: 1.0,
            total_events: 1,
            total_time: 3,
        };
        let c = compare_curves(&km, &fit);
        assert!(c.max_abs_diff < 1e-15);
        assert_eq!(c.diff_at_median, Some(0.0));
    }

    #[test]
    fn svg_mentions_both_curves() {
        let ivs = [iv(3, true), iv(10, true), iv(20, false)];
        let svg = survival_svg(&km_estimate(&ivs).unwrap(), &exp_fit(&ivs).unwrap(), 120);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("Kaplan-Meier"));
        assert_eq!(svg.matches("<path").count(), 3);
    }
}

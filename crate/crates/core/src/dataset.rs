//! Match-event data: parsing, validation, and the per-match count views the
//! analyses consume.
//!
//! The on-disk format is a CSV file with the header
//! `match_id,stage,team_a,team_b,duration_min,goal_timeline`, where the
//! timeline is a `;`-separated list of `minute:side` tokens. Stoppage-time
//! minutes written as `45+2` or `90+4` are clamped to the end of their
//! period (45, 90, 105 or 120).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DataError;

pub const HEADER: [&str; 6] = [
    "match_id",
    "stage",
    "team_a",
    "team_b",
    "duration_min",
    "goal_timeline",
];

/// Length of normal playing time in minutes.
pub const NORMAL_TIME: u32 = 90;
/// Length of a match that went to extra time.
pub const EXTRA_TIME_DURATION: u32 = 120;
const PERIOD_ENDS: [u32; 4] = [45, 90, 105, 120];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Group,
    RoundOf16,
    QuarterFinal,
    SemiFinal,
    Final,
}

impl Stage {
    pub fn is_knockout(self) -> bool {
        self != Stage::Group
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::Group => "Group",
            Stage::RoundOf16 => "RoundOf16",
            Stage::QuarterFinal => "QuarterFinal",
            Stage::SemiFinal => "SemiFinal",
            Stage::Final => "Final",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Stage {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Group" => Stage::Group,
            "RoundOf16" => Stage::RoundOf16,
            "QuarterFinal" => Stage::QuarterFinal,
            "SemiFinal" => Stage::SemiFinal,
            "Final" => Stage::Final,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalEvent {
    pub minute: u32,
    /// Informational only; no statistic depends on it.
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub id: String,
    pub stage: Stage,
    pub team_a: String,
    pub team_b: String,
    pub duration: u32,
    /// Sorted by minute.
    pub goals: Vec<GoalEvent>,
}

impl Match {
    pub fn normal_time_goals(&self) -> u32 {
        self.goals
            .iter()
            .filter(|g| g.minute <= NORMAL_TIME)
            .count() as u32
    }

    pub fn extra_time_goals(&self) -> u32 {
        self.goals.iter().filter(|g| g.minute > NORMAL_TIME).count() as u32
    }

    pub fn total_goals(&self) -> u32 {
        self.goals.len() as u32
    }

    /// True when the last goal came in the final minute of the match.
    pub fn scored_at_final_minute(&self) -> bool {
        self.goals.last().is_some_and(|g| g.minute == self.duration)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tournament {
    pub matches: Vec<Match>,
}

/// Which slice of each match is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountScope {
    /// Goals in the first 90 minutes of every match.
    NormalTime,
    /// Goals after minute 90, for matches that went to extra time.
    ExtraTime,
    /// All goals of the matches that lasted 90 minutes.
    Full90,
    /// All goals of the matches that lasted 120 minutes.
    Full120,
    /// All goals of every match, irrespective of duration.
    Full,
}

impl CountScope {
    pub fn name(self) -> &'static str {
        match self {
            CountScope::NormalTime => "normal",
            CountScope::ExtraTime => "extra-time",
            CountScope::Full90 => "full-90",
            CountScope::Full120 => "full-120",
            CountScope::Full => "full",
        }
    }
}

impl fmt::Display for CountScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-match goal counts with the exposure (minutes at risk) of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountView {
    pub scope: CountScope,
    pub counts: Vec<u32>,
    pub exposures: Vec<u32>,
    pub match_ids: Vec<String>,
}

impl CountView {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

impl Tournament {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn total_goals(&self) -> u64 {
        self.matches.iter().map(|m| m.total_goals() as u64).sum()
    }

    /// Sum of match durations in minutes.
    pub fn total_exposure(&self) -> u64 {
        self.matches.iter().map(|m| m.duration as u64).sum()
    }

    pub fn count_view(&self, scope: CountScope) -> Result<CountView, DataError> {
        let mut view = CountView {
            scope,
            counts: Vec::new(),
            exposures: Vec::new(),
            match_ids: Vec::new(),
        };
        for m in &self.matches {
            let entry = match scope {
                CountScope::NormalTime => Some((m.normal_time_goals(), NORMAL_TIME)),
                CountScope::ExtraTime => (m.duration > NORMAL_TIME)
                    .then(|| (m.extra_time_goals(), m.duration - NORMAL_TIME)),
                CountScope::Full90 => {
                    (m.duration == NORMAL_TIME).then(|| (m.total_goals(), m.duration))
                }
                CountScope::Full120 => {
                    (m.duration == EXTRA_TIME_DURATION).then(|| (m.total_goals(), m.duration))
                }
                CountScope::Full => Some((m.total_goals(), m.duration)),
            };
            if let Some((count, exposure)) = entry {
                view.counts.push(count);
                view.exposures.push(exposure);
                view.match_ids.push(m.id.clone());
            }
        }
        let needs_matches = !matches!(scope, CountScope::NormalTime | CountScope::Full);
        if needs_matches && view.is_empty() {
            return Err(DataError::EmptyView(scope.name()));
        }
        Ok(view)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        parse_dataset(&text)
    }

    /// Writes the tournament back out in the CSV schema accepted by
    /// [`parse_dataset`].
    pub fn to_csv(&self) -> Result<String, DataError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for m in &self.matches {
            let timeline = m
                .goals
                .iter()
                .map(|g| {
                    let side = match g.side {
                        Side::A => 'A',
                        Side::B => 'B',
                    };
                    format!("{}:{}", g.minute, side)
                })
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                m.id.as_str(),
                m.stage.label(),
                m.team_a.as_str(),
                m.team_b.as_str(),
                &m.duration.to_string(),
                &timeline,
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse_minute(token: &str, line: usize) -> Result<u32, DataError> {
    let bad = || malformed(line, format!("bad goal minute {token:?}"));
    match token.split_once('+') {
        None => token.trim().parse::<u32>().map_err(|_| bad()),
        Some((base, extra)) => {
            let base: u32 = base.trim().parse().map_err(|_| bad())?;
            let _: u32 = extra.trim().parse().map_err(|_| bad())?;
            if !PERIOD_ENDS.contains(&base) {
                return Err(bad());
            }
            Ok(base)
        }
    }
}

fn parse_timeline(field: &str, line: usize) -> Result<Vec<GoalEvent>, DataError> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    let mut goals = field
        .split(';')
        .map(|tok| {
            let (minute, side) = tok
                .split_once(':')
                .ok_or_else(|| malformed(line, format!("goal token {tok:?} is not minute:side")))?;
            let side = match side.trim() {
                "A" => Side::A,
                "B" => Side::B,
                other => return Err(malformed(line, format!("unknown side {other:?}"))),
            };
            Ok(GoalEvent {
                minute: parse_minute(minute, line)?,
                side,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    goals.sort_by_key(|g| g.minute);
    Ok(goals)
}

/// Parses and validates a dataset in the CSV schema.
pub fn parse_dataset(text: &str) -> Result<Tournament, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(malformed(
            1,
            format!("expected header {}", HEADER.join(",")),
        ));
    }

    let mut seen = HashSet::new();
    let mut matches = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != HEADER.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", HEADER.len(), record.len()),
            ));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(malformed(line, "empty match id"));
        }
        let stage: Stage = record[1]
            .trim()
            .parse()
            .map_err(|_| DataError::UnknownStage {
                line,
                label: record[1].to_string(),
            })?;
        let duration: u32 = record[4]
            .trim()
            .parse()
            .map_err(|_| malformed(line, format!("bad duration {:?}", &record[4])))?;
        let valid_duration =
            duration == NORMAL_TIME || (duration == EXTRA_TIME_DURATION && stage.is_knockout());
        if !valid_duration {
            return Err(DataError::InvalidDuration {
                line,
                stage: stage.to_string(),
                duration,
            });
        }
        let goals = parse_timeline(&record[5], line)?;
        if let Some(g) = goals.iter().find(|g| g.minute == 0 || g.minute > duration) {
            return Err(DataError::MinuteOutOfRange {
                line,
                minute: g.minute,
                duration,
            });
        }
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId { line, id });
        }
        matches.push(Match {
            id,
            stage,
            team_a: record[2].trim().to_string(),
            team_b: record[3].trim().to_string(),
            duration,
            goals,
        });
    }
    Ok(Tournament { matches })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(row: &str) -> Result<Tournament, DataError> {
        parse_dataset(&format!("{}\n{row}\n", HEADER.join(",")))
    }

    #[test]
    fn final_row() {
        let t = one(r#"M51,Final,Italy,England,120,"2:B;67:A""#).unwrap();
        let m = &t.matches[0];
        assert_eq!(m.duration, 120);
        assert_eq!(m.goals.len(), 2);
        assert_eq!(
            m.goals[0],
            GoalEvent {
                minute: 2,
                side: Side::B
            }
        );
        assert_eq!(m.stage, Stage::Final);
    }

    #[test]
    fn empty_timeline_is_goalless() {
        let t = one("M10,Group,Spain,Sweden,90,").unwrap();
        assert!(t.matches[0].goals.is_empty());
    }

    #[test]
    fn minute_beyond_duration_is_rejected() {
        let err = one("X,Final,A,B,120,125:A").unwrap_err();
        assert!(matches!(
            err,
            DataError::MinuteOutOfRange {
                line: 2,
                minute: 125,
                duration: 120
            }
        ));
    }

    #[test]
    fn stoppage_time_is_clamped() {
        let t = one(r#"X,Group,A,B,90,"45+2:A;90+4:B;12:A""#).unwrap();
        let minutes: Vec<_> = t.matches[0].goals.iter().map(|g| g.minute).collect();
        assert_eq!(minutes, [12, 45, 90]);
        assert!(one("X,Group,A,B,90,60+2:A").is_err());
    }

    #[test]
    fn unknown_stage_reports_line() {
        let err = parse_dataset(&format!(
            "{}\nM1,Group,A,B,90,\nM2,Playoff,A,B,90,\n",
            HEADER.join(",")
        ))
        .unwrap_err();
        assert!(matches!(err, DataError::UnknownStage { line: 3, .. }));
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse_dataset(&format!(
            "{}\nM1,Group,A,B,90,\nM1,Group,C,D,90,\n",
            HEADER.join(",")
        ))
        .unwrap_err();
        assert!(matches!(err, DataError::DuplicateId { line: 3, .. }));
    }

    #[test]
    fn group_match_cannot_go_to_extra_time() {
        assert!(matches!(
            one("M1,Group,A,B,120,").unwrap_err(),
            DataError::InvalidDuration { .. }
        ));
        assert!(one("M1,Final,A,B,100,").is_err());
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            one("M1,Group,A,B,90").unwrap_err(),
            DataError::Malformed { line: 2, .. }
        ));
        assert!(one("M1,Group,A,B,ninety,").is_err());
        assert!(one("M1,Group,A,B,90,12").is_err());
        assert!(one("M1,Group,A,B,90,12:C").is_err());
        assert!(one("M1,Group,A,B,90,0:A").is_err());
        assert!(parse_dataset("id,stage\nM1,Group\n").is_err());
    }

    #[test]
    fn views_on_empty_tournament() {
        let t = Tournament::default();
        assert!(t.count_view(CountScope::NormalTime).unwrap().is_empty());
        assert!(t.count_view(CountScope::ExtraTime).is_err());
        assert_eq!(t.total_exposure(), 0);
    }

    #[test]
    fn extra_time_exposure_is_thirty_minutes() {
        let t = one(r#"M1,SemiFinal,A,B,120,"30:B;39:A;104:A""#).unwrap();
        let v = t.count_view(CountScope::ExtraTime).unwrap();
        assert_eq!(v.counts, [1]);
        assert_eq!(v.exposures, [30]);
        let v = t.count_view(CountScope::NormalTime).unwrap();
        assert_eq!((v.counts[0], v.exposures[0]), (2, 90));
    }
}

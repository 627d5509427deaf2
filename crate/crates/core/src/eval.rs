//! Rating, accuracy, win-rate and retrieval-audit aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::screenplay::{AuditField, RetrievalAudit};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("score {score} for item {item:?} is outside 0..=10")]
    ScoreOutOfRange { item: String, score: f64 },
    #[error("no records")]
    Empty,
    #[error("ranking by {evaluator:?} on {item:?} is not a permutation of the method set")]
    NotPermutation { evaluator: String, item: String },
}

/// Parses line-delimited JSON records, skipping blank lines.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

/// Rounds to `decimals` places with ties away from zero.
pub fn round_half_up(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    // The nudge absorbs binary representation error at exact ties such as 57.45.
    let scaled = x * scale;
    (scaled.abs() + 0.5 + 1e-9).floor().copysign(scaled) / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub evaluator_id: String,
    pub item_id: String,
    pub method_id: String,
    pub metric_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub n: usize,
    pub mean: f64,
    /// Zero when `n == 1`.
    pub sample_sd: f64,
    pub population_sd: f64,
    pub sample_variance: f64,
    pub population_variance: f64,
    pub min: f64,
    pub max: f64,
}

impl RatingSummary {
    pub fn of(scores: &[f64]) -> Result<Self, EvalError> {
        if scores.is_empty() {
            return Err(EvalError::Empty);
        }
        let n = scores.len();
        let mean = scores.iter().sum::<f64>() / n as f64;
        let ss: f64 = scores.iter().map(|s| (s - mean).powi(2)).sum();
        let population_variance = ss / n as f64;
        let sample_variance = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        Ok(Self {
            n,
            mean,
            sample_sd: sample_variance.sqrt(),
            population_sd: population_variance.sqrt(),
            sample_variance,
            population_variance,
            min: scores.iter().copied().fold(f64::INFINITY, f64::min),
            max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingCell {
    pub method_id: String,
    pub metric_id: String,
    pub summary: RatingSummary,
}

/// Mean and dispersion per (method, metric), sorted by method then metric.
pub fn aggregate_ratings(records: &[RatingRecord]) -> Result<Vec<RatingCell>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in records {
        if !(0.0..=10.0).contains(&r.score) {
            return Err(EvalError::ScoreOutOfRange { item: r.item_id.clone(), score: r.score });
        }
        cells.entry((&r.method_id, &r.metric_id)).or_default().push(r.score);
    }
    cells
        .into_iter()
        .map(|((method, metric), scores)| {
            Ok(RatingCell {
                method_id: method.to_string(),
                metric_id: metric.to_string(),
                summary: RatingSummary::of(&scores)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryLabel {
    pub item_id: String,
    pub field: String,
    pub correct: bool,
}

/// Percentage of correct labels per field.
pub fn binary_accuracy(labels: &[BinaryLabel]) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for l in labels {
        let e = tally.entry(&l.field).or_default();
        e.0 += l.correct as usize;
        e.1 += 1;
    }
    tally.into_iter().map(|(f, (c, n))| (f.to_string(), 100.0 * c as f64 / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub evaluator_id: String,
    pub item_id: String,
    /// Methods ordered best to worst.
    pub ranking: Vec<String>,
}

/// Percentage of rankings that place each method first. The method set is
/// taken from the first record; every ranking must be a permutation of it.
pub fn win_rate(rankings: &[RankingRecord]) -> Result<BTreeMap<String, f64>, EvalError> {
    let first = rankings.first().ok_or(EvalError::Empty)?;
    let methods: BTreeSet<&str> = first.ranking.iter().map(String::as_str).collect();
    let mut wins: BTreeMap<String, usize> = methods.iter().map(|m| (m.to_string(), 0)).collect();
    for r in rankings {
        let set: BTreeSet<&str> = r.ranking.iter().map(String::as_str).collect();
        if set != methods || r.ranking.len() != methods.len() || r.ranking.is_empty() {
            return Err(EvalError::NotPermutation { evaluator: r.evaluator_id.clone(), item: r.item_id.clone() });
        }
        *wins.get_mut(&r.ranking[0]).expect("member of method set") += 1;
    }
    let n = rankings.len() as f64;
    Ok(wins.into_iter().map(|(m, w)| (m, 100.0 * w as f64 / n)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPercent {
    /// Accuracy in percent.
    pub accuracy: f64,
    /// Population variance of per-judge accuracies, in percent squared.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub model: String,
    pub fields: BTreeMap<AuditField, FieldPercent>,
    /// Unweighted mean of the field accuracies, unrounded.
    pub average: f64,
    /// `average` rounded half-up to one decimal.
    pub average_display: f64,
}

/// One row per storyteller model with per-field accuracy and the row average.
pub fn summarize_llm_audit(audits: &[(String, RetrievalAudit)]) -> Result<Vec<AuditRow>, EvalError> {
    if audits.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(audits
        .iter()
        .map(|(model, audit)| {
            let fields: BTreeMap<AuditField, FieldPercent> = AuditField::ALL
                .into_iter()
                .map(|f| {
                    let s = audit
                        .per_field
                        .get(&f)
                        .copied()
                        .unwrap_or(crate::screenplay::FieldScore { accuracy: 0.0, variance: 0.0 });
                    (f, FieldPercent { accuracy: 100.0 * s.accuracy, variance: 1e4 * s.variance })
                })
                .collect();
            let average = fields.values().map(|f| f.accuracy).sum::<f64>() / AuditField::ALL.len() as f64;
            AuditRow { model: model.clone(), fields, average, average_display: round_half_up(average, 1) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screenplay::{FieldLabels, SampleVotes};

    fn rating(method: &str, metric: &str, score: f64) -> RatingRecord {
        RatingRecord {
            evaluator_id: "e".into(),
            item_id: "i".into(),
            method_id: method.into(),
            metric_id: metric.into(),
            score,
        }
    }

    #[test]
    fn constant_scores_have_no_spread() {
        let cells = aggregate_ratings(&[rating("m", "q", 8.0), rating("m", "q", 8.0), rating("m", "q", 8.0)]).unwrap();
        assert_eq!(cells[0].summary.mean, 8.0);
        assert_eq!(cells[0].summary.sample_sd, 0.0);
    }

    #[test]
    fn single_score() {
        let cells = aggregate_ratings(&[rating("m", "q", 7.0)]).unwrap();
        assert_eq!(cells[0].summary.mean, 7.0);
        assert_eq!(cells[0].summary.n, 1);
    }

    #[test]
    fn sample_and_population_dispersion() {
        let s = RatingSummary::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.population_sd, 2.0);
        assert!((s.sample_variance - 32.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_scale_rejected() {
        assert!(matches!(aggregate_ratings(&[rating("m", "q", 10.5)]), Err(EvalError::ScoreOutOfRange { .. })));
        assert_eq!(aggregate_ratings(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn adherence_means_replay() {
        // Screenplay adherence 7.6 and camera adherence 8.3 for one method.
        let mut records = vec![];
        for s in [6.0, 7.0, 8.0, 9.0, 8.0] {
            records.push(rating("ours", "screenplay", s));
        }
        for s in [7.0, 9.0, 9.0, 8.5, 8.0, 9.0, 7.6, 8.3, 8.3, 8.3] {
            records.push(rating("ours", "camera", s));
        }
        let cells = aggregate_ratings(&records).unwrap();
        let get = |m: &str| cells.iter().find(|c| c.metric_id == m).unwrap().summary.mean;
        assert_eq!(round_half_up(get("screenplay"), 1), 7.6);
        assert_eq!(round_half_up(get("camera"), 1), 8.3);
    }

    fn labels(field: &str, correct: usize, total: usize) -> Vec<BinaryLabel> {
        (0..total)
            .map(|i| BinaryLabel { item_id: format!("{field}{i}"), field: field.into(), correct: i < correct })
            .collect()
    }

    #[test]
    fn accuracy_percentages() {
        assert_eq!(binary_accuracy(&labels("f", 9, 10))["f"], 90.0);
        assert_eq!(binary_accuracy(&labels("f", 4, 4))["f"], 100.0);
        let mut all = labels("one", 31, 34);
        all.extend(labels("two", 21, 58));
        all.extend(labels("three", 19, 46));
        let acc = binary_accuracy(&all);
        assert_eq!(round_half_up(acc["one"], 1), 91.2);
        assert_eq!(round_half_up(acc["two"], 1), 36.2);
        assert_eq!(round_half_up(acc["three"], 1), 41.3);
    }

    fn ranking(evaluator: &str, order: &[&str]) -> RankingRecord {
        RankingRecord {
            evaluator_id: evaluator.into(),
            item_id: "v".into(),
            ranking: order.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn single_ranking_wins_all() {
        let w = win_rate(&[ranking("e", &["A", "B", "C"])]).unwrap();
        assert_eq!((w["A"], w["B"], w["C"]), (100.0, 0.0, 0.0));
    }

    #[test]
    fn split_first_place() {
        let w = win_rate(&[ranking("e1", &["A", "B"]), ranking("e2", &["B", "A"])]).unwrap();
        assert_eq!((w["A"], w["B"]), (50.0, 50.0));
    }

    #[test]
    fn malformed_rankings_rejected() {
        let base = ranking("e1", &["A", "B", "C"]);
        for bad in [&["A", "A", "C"][..], &["A", "B"], &["A", "B", "D"], &["A", "B", "C", "C"]] {
            let err = win_rate(&[base.clone(), ranking("e2", bad)]).unwrap_err();
            assert!(matches!(err, EvalError::NotPermutation { .. }), "{bad:?}");
        }
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(round_half_up(57.45, 1), 57.5);
        assert_eq!(round_half_up(57.449, 1), 57.4);
        assert_eq!(round_half_up(-0.25, 1), -0.3);
        assert_eq!(round_half_up(100.0, 1), 100.0);
    }

    fn audit_with(correct: [usize; 4], total: usize) -> RetrievalAudit {
        let truth: FieldLabels = AuditField::ALL.into_iter().map(|f| (f, "t".to_string())).collect();
        let samples: Vec<SampleVotes> = (0..total)
            .map(|i| {
                let vote: FieldLabels = AuditField::ALL
                    .into_iter()
                    .zip(correct)
                    .map(|(f, c)| (f, if i < c { "t" } else { "x" }.to_string()))
                    .collect();
                SampleVotes { sample_id: i.to_string(), truth: truth.clone(), votes: vec![Some(vote.clone()); 3] }
            })
            .collect();
        RetrievalAudit::from_votes(&samples).unwrap()
    }

    #[test]
    fn zero_accuracy_row() {
        let rows = summarize_llm_audit(&[("m".into(), audit_with([0; 4], 5))]).unwrap();
        assert_eq!(rows[0].average, 0.0);
    }

    #[test]
    fn row_average_matches_field_mean() {
        let rows = summarize_llm_audit(&[("m".into(), audit_with([54, 34, 55, 57], 57))]).unwrap();
        let f = &rows[0].fields;
        assert_eq!(round_half_up(f[&AuditField::Genre].accuracy, 1), 94.7);
        assert_eq!(round_half_up(f[&AuditField::SubjectCount].accuracy, 1), 59.6);
        assert_eq!(round_half_up(f[&AuditField::Dynamicity].accuracy, 1), 96.5);
        assert_eq!(f[&AuditField::ShotCount].accuracy, 100.0);
        assert_eq!(rows[0].average_display, 87.7);
    }

    #[test]
    fn jsonl_records() {
        let text = "{\"evaluator_id\":\"e\",\"item_id\":\"i\",\"ranking\":[\"A\",\"B\"]}\n\n";
        let r: Vec<RankingRecord> = parse_jsonl(text).unwrap();
        assert_eq!(r.len(), 1);
        assert!(matches!(parse_jsonl::<RankingRecord>("{}"), Err(EvalError::Parse { line: 1, .. })));
    }
}

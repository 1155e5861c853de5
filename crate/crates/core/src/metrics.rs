//! Answer selection (MAP, MRR) and answer triggering (F1) metrics.
//!
//! Selection metrics only consider questions with at least one correct
//! candidate. Triggering considers every question: the system answers when
//! its best candidate scores at or above a threshold, and an answer counts
//! as correct only if that best candidate is labeled correct.
//!
//! Score ties are broken by candidate order everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroup {
    pub question_id: String,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ScoredGroup {
    pub fn new(
        question_id: impl Into<String>,
        scores: Vec<f64>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        let question_id = question_id.into();
        if scores.is_empty() || scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "question {question_id}: {} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("score in question {question_id}")));
        }
        Ok(ScoredGroup {
            question_id,
            scores,
            labels,
        })
    }

    pub fn has_positive(&self) -> bool {
        self.labels.iter().any(|&l| l)
    }

    /// Candidate indices by descending score, stable on ties.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx
    }

    /// Index of the highest score; the first one on ties.
    pub fn top(&self) -> usize {
        self.ranking()[0]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: Option<f64>,
    pub mrr: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub threshold: Option<f64>,
    pub n_questions_selection: usize,
    pub n_questions_triggering: usize,
}

pub fn average_precision(group: &ScoredGroup) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in group.ranking().iter().enumerate() {
        if group.labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::NoPositive("average precision"));
    }
    Ok(sum / hits as f64)
}

pub fn reciprocal_rank(group: &ScoredGroup) -> Result<f64> {
    group
        .ranking()
        .iter()
        .position(|&i| group.labels[i])
        .map(|r| 1.0 / (r + 1) as f64)
        .ok_or(Error::NoPositive("reciprocal rank"))
}

/// Mean average precision and mean reciprocal rank over the groups that
/// have a correct candidate. Returns `(map, mrr, n_groups_used)`.
pub fn map_mrr(groups: &[ScoredGroup]) -> Result<(f64, f64, usize)> {
    let mut n = 0usize;
    let (mut ap, mut rr) = (0.0, 0.0);
    for g in groups.iter().filter(|g| g.has_positive()) {
        ap += average_precision(g)?;
        rr += reciprocal_rank(g)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoPositive("MAP"));
    }
    Ok((ap / n as f64, rr / n as f64, n))
}

/// Precision, recall and F1 of answer triggering at `threshold`.
pub fn triggering_f1(groups: &[ScoredGroup], threshold: f64) -> Result<EvalReport> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no groups to evaluate".into()));
    }
    let answerable = groups.iter().filter(|g| g.has_positive()).count();
    if answerable == 0 {
        return Err(Error::NoPositive("triggering recall"));
    }
    let mut predicted = 0usize;
    let mut correct = 0usize;
    for g in groups {
        let top = g.top();
        if g.scores[top] >= threshold {
            predicted += 1;
            if g.labels[top] {
                correct += 1;
            }
        }
    }
    let precision = if predicted == 0 {
        0.0
    } else {
        correct as f64 / predicted as f64
    };
    let recall = correct as f64 / answerable as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        f1: Some(f1),
        precision: Some(precision),
        recall: Some(recall),
        threshold: Some(threshold),
        n_questions_triggering: groups.len(),
        ..EvalReport::default()
    })
}

/// `0.05, 0.10, …, 0.95`
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub f1: f64,
    /// `(threshold, f1)` for every grid value, in grid order.
    pub table: Vec<(f64, f64)>,
}

/// Grid value with the highest F1; the smallest threshold on ties.
pub fn select_threshold(groups: &[ScoredGroup], grid: &[f64]) -> Result<ThresholdSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".into()));
    }
    let mut table = Vec::with_capacity(grid.len());
    for &t in grid {
        let f1 = triggering_f1(groups, t)?.f1.unwrap_or(0.0);
        table.push((t, f1));
    }
    let (threshold, f1) = table
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .expect("grid is non-empty");
    Ok(ThresholdSelection {
        threshold,
        f1,
        table,
    })
}

/// Full report: MAP/MRR when some question is answerable, plus triggering
/// metrics when a threshold is given.
pub fn evaluate(groups: &[ScoredGroup], threshold: Option<f64>) -> Result<EvalReport> {
    let mut report = match threshold {
        Some(t) if groups.iter().any(ScoredGroup::has_positive) => triggering_f1(groups, t)?,
        _ => EvalReport::default(),
    };
    if let Ok((map, mrr, n)) = map_mrr(groups) {
        report.map = Some(map);
        report.mrr = Some(mrr);
        report.n_questions_selection = n;
    }
    Ok(report)
}

//! Result tables: experiment rows by training corpus, and λ search tables.
//!
//! Text tables show metrics as percentages with two decimals; the TSV forms
//! carry the stored values at full precision.

use std::fmt::Write as _;

use serde::Serialize;
use xferqa_core::train::LambdaSearch;
use xferqa_core::EvalReport;

use crate::config::Strategy;
use crate::error::{CliError, CliResult};
use crate::experiment::EvalSummary;

pub const MISSING: &str = "—";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Source corpus, or `—` for the baseline.
    pub trained_on: String,
    pub strategy: String,
    pub lambda: Option<String>,
    pub map: Option<f64>,
    pub mrr: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub target: String,
    pub split: String,
    pub rows: Vec<ReportRow>,
}

/// Test-split table over several runs on one target corpus.
pub fn build_table(summaries: &[EvalSummary]) -> CliResult<ReportTable> {
    let first = summaries
        .first()
        .ok_or_else(|| CliError::Config("report needs at least one result directory".into()))?;
    if let Some(other) = summaries.iter().find(|s| s.target != first.target) {
        return Err(xferqa_core::Error::InvalidArgument(format!(
            "results evaluate different target corpora: {} and {}",
            first.target, other.target
        ))
        .into());
    }
    let rows = summaries
        .iter()
        .map(|s| {
            let EvalReport { map, mrr, f1, .. } = s.test;
            ReportRow {
                trained_on: match (s.strategy, &s.source) {
                    (Strategy::Base, _) | (_, None) => MISSING.into(),
                    (_, Some(src)) => src.clone(),
                },
                strategy: s.strategy.to_string(),
                lambda: s.lambda.zip(s.lambda_applies_to).map(|(l, side)| {
                    format!(
                        "{l}@{}",
                        serde_json::to_value(side)
                            .expect("plain enum")
                            .as_str()
                            .unwrap_or("?")
                    )
                }),
                map,
                mrr,
                f1,
            }
        })
        .collect();
    Ok(ReportTable {
        target: first.target.clone(),
        split: "test".into(),
        rows,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| format!("{:.2}", 100.0 * x))
}

fn full(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| x.to_string())
}

fn align(rows: &[Vec<String>]) -> String {
    let n = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

impl ReportTable {
    pub fn to_text(&self) -> String {
        let mut rows = vec![vec![
            "Trained On".to_string(),
            "Strategy".into(),
            "Lambda".into(),
            format!("{} MAP", self.target),
            "MRR".into(),
            "F1".into(),
        ]];
        rows.extend(self.rows.iter().map(|r| {
            vec![
                r.trained_on.clone(),
                r.strategy.clone(),
                r.lambda.clone().unwrap_or_else(|| MISSING.into()),
                pct(r.map),
                pct(r.mrr),
                pct(r.f1),
            ]
        }));
        let mut out = format!("Evaluation on {} ({})\n", self.target, self.split);
        out.push_str(&align(&rows));
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("trained_on\tstrategy\tlambda\ttarget\tsplit\tmap\tmrr\tf1\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.trained_on,
                r.strategy,
                r.lambda.as_deref().unwrap_or(MISSING),
                self.target,
                self.split,
                full(r.map),
                full(r.mrr),
                full(r.f1)
            );
        }
        out
    }
}

fn parse_cell(s: &str) -> CliResult<Option<f64>> {
    if s == MISSING {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| xferqa_core::Error::InvalidArgument(format!("bad metric cell `{s}`")).into())
}

/// Inverse of [`ReportTable::to_tsv`].
pub fn parse_report_tsv(text: &str) -> CliResult<ReportTable> {
    let bad = |m: String| CliError::from(xferqa_core::Error::InvalidArgument(m));
    let mut lines = text.lines();
    if lines.next() != Some("trained_on\tstrategy\tlambda\ttarget\tsplit\tmap\tmrr\tf1") {
        return Err(bad("missing report header".into()));
    }
    let mut table = ReportTable {
        target: String::new(),
        split: String::new(),
        rows: Vec::new(),
    };
    for line in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", f.len())));
        }
        table.target = f[3].into();
        table.split = f[4].into();
        table.rows.push(ReportRow {
            trained_on: f[0].into(),
            strategy: f[1].into(),
            lambda: (f[2] != MISSING).then(|| f[2].to_string()),
            map: parse_cell(f[5])?,
            mrr: parse_cell(f[6])?,
            f1: parse_cell(f[7])?,
        });
    }
    Ok(table)
}

/// λ search results, ascending by λ, best row marked with `*`.
pub struct LambdaTable {
    pub text: String,
    pub tsv: String,
}

pub fn lambda_table(search: &LambdaSearch) -> LambdaTable {
    let mut rows = search.rows.clone();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let metric = serde_json::to_value(search.metric)
        .ok()
        .and_then(|v| v.as_str().map(str::to_uppercase))
        .unwrap_or_default();
    let mut grid = vec![vec![
        "".to_string(),
        "lambda".into(),
        format!("dev {metric}"),
        "best epoch".into(),
    ]];
    let mut tsv = String::from("lambda\tdev_metric\tbest_epoch\tbest\n");
    for r in &rows {
        let best = r.lambda == search.best_lambda;
        grid.push(vec![
            if best { "*" } else { "" }.into(),
            r.lambda.to_string(),
            format!("{:.2}", 100.0 * r.dev_metric),
            r.best_epoch.to_string(),
        ]);
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}",
            r.lambda,
            r.dev_metric,
            r.best_epoch,
            u8::from(best)
        );
    }
    LambdaTable {
        text: align(&grid),
        tsv,
    }
}

/// `(lambda, dev_metric, marked)` rows of a λ TSV.
pub fn parse_lambda_tsv(text: &str) -> CliResult<Vec<(f64, f64, bool)>> {
    let bad = |m: String| CliError::from(xferqa_core::Error::InvalidArgument(m));
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 columns in `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad number `{s}`")))
            };
            Ok((num(f[0])?, num(f[1])?, f[3] == "1"))
        })
        .collect()
}

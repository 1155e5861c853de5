//! Training strategies: plain SGD on one corpus, INIT (source pretraining
//! then fine-tuning), MULT (λ-mixed sampling from source and target), and
//! a grid search over λ.
//!
//! All strategies share one loop. An epoch is as many steps as the target
//! train split has instances; each step draws one instance. Without a source
//! corpus every draw comes from the target. With one, a Bernoulli(λ) draw
//! picks the corpus named by [`TrainConfig::lambda_applies_to`] on success
//! and the other corpus otherwise. Each corpus is visited in a seeded
//! shuffled order that is reshuffled whenever it wraps around.
//!
//! Random streams are independent per role (init, target order, source
//! order, mixing), so MULT with λ = 1 on the target side replays plain
//! training step for step.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, QuestionGroup, Split};
use crate::embeddings::{embed_sentence, EmbeddingTable, SentenceMatrix};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalReport, ScoredGroup};
use crate::model::{self, init_params, Example, ModelDims, ModelParams};
use crate::rng::{self, streams, Rng};

/// Which corpus a successful λ draw selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSide {
    Source,
    #[default]
    Target,
}

impl LambdaSide {
    pub fn other(self) -> Self {
        match self {
            LambdaSide::Source => LambdaSide::Target,
            LambdaSide::Target => LambdaSide::Source,
        }
    }
}

/// Dev metric used to pick the best epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointMetric {
    #[default]
    Map,
    /// Best triggering F1 over the threshold grid.
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub lambda_applies_to: LambdaSide,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_metric: CheckpointMetric,
    /// Update only the output layer.
    pub freeze_lower_layers: bool,
    /// Candidate triggering thresholds.
    pub threshold_grid: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.9,
            lambda_applies_to: LambdaSide::Target,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 1,
            seed: 0,
            checkpoint_metric: CheckpointMetric::Map,
            freeze_lower_layers: false,
            threshold_grid: metrics::default_threshold_grid(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.threshold_grid.is_empty() {
            return bad("threshold_grid must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawCounts {
    pub source: usize,
    pub target: usize,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_metric: f64,
    pub draws: DrawCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Parameters after the best epoch.
    pub params: ModelParams,
    /// 1-based epoch with the highest dev metric (the first on ties).
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Total draws per corpus over the whole run.
    pub draws: DrawCounts,
    pub config_echo: TrainConfig,
}

impl TrainedModel {
    pub fn dev_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.dev_metric).collect()
    }

    pub fn best_dev_metric(&self) -> f64 {
        self.history[self.best_epoch - 1].dev_metric
    }
}

struct GroupSpan {
    question_id: String,
    start: usize,
    end: usize,
}

struct Sample {
    group: usize,
    answer: SentenceMatrix,
    label: bool,
}

/// Question groups embedded once for repeated scoring and training.
pub struct EncodedSplit {
    questions: Vec<SentenceMatrix>,
    samples: Vec<Sample>,
    groups: Vec<GroupSpan>,
}

impl EncodedSplit {
    pub fn new(groups: &[QuestionGroup], table: &EmbeddingTable, max_len: usize) -> Result<Self> {
        let mut out = EncodedSplit {
            questions: Vec::with_capacity(groups.len()),
            samples: Vec::new(),
            groups: Vec::with_capacity(groups.len()),
        };
        for (gi, g) in groups.iter().enumerate() {
            out.questions
                .push(embed_sentence(g.question_tokens(), table, max_len)?);
            let start = out.samples.len();
            for c in &g.candidates {
                out.samples.push(Sample {
                    group: gi,
                    answer: embed_sentence(&c.answer_tokens, table, max_len)?,
                    label: c.label,
                });
            }
            out.groups.push(GroupSpan {
                question_id: g.question_id.clone(),
                start,
                end: out.samples.len(),
            });
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn example(&self, i: usize) -> Example<'_> {
        let s = &self.samples[i];
        Example {
            question: &self.questions[s.group],
            answer: &s.answer,
            label: s.label,
            question_id: &self.groups[s.group].question_id,
        }
    }

    pub fn examples(&self) -> Vec<Example<'_>> {
        (0..self.len()).map(|i| self.example(i)).collect()
    }

    /// Scores every candidate, one [`ScoredGroup`] per question.
    pub fn score(&self, params: &ModelParams) -> Result<Vec<ScoredGroup>> {
        self.groups
            .iter()
            .enumerate()
            .map(|(gi, span)| {
                let eq = model::encode(params, &self.questions[gi])?;
                let mut scores = Vec::with_capacity(span.end - span.start);
                let mut labels = Vec::with_capacity(span.end - span.start);
                for s in &self.samples[span.start..span.end] {
                    let ea = model::encode(params, &s.answer)?;
                    scores.push(model::score_encoded(params, &eq, &ea));
                    labels.push(s.label);
                }
                ScoredGroup::new(span.question_id.clone(), scores, labels)
            })
            .collect()
    }
}

fn check_table(table: &EmbeddingTable, dims: &ModelDims) -> Result<()> {
    dims.validate()?;
    if table.dim() != dims.embed_dim {
        return Err(Error::DimMismatch {
            expected: dims.embed_dim,
            found: table.dim(),
        });
    }
    Ok(())
}

fn encode_split(
    corpus: &Corpus,
    split: Split,
    table: &EmbeddingTable,
    dims: &ModelDims,
) -> Result<EncodedSplit> {
    EncodedSplit::new(corpus.require(split)?, table, dims.max_len)
}

/// Dev metric named by `metric`.
pub fn dev_metric(groups: &[ScoredGroup], metric: CheckpointMetric, grid: &[f64]) -> Result<f64> {
    match metric {
        CheckpointMetric::Map => Ok(metrics::map_mrr(groups)?.0),
        CheckpointMetric::F1 => Ok(metrics::select_threshold(groups, grid)?.f1),
    }
}

/// Seeded order over `0..n`, reshuffled every time it is exhausted.
struct CyclicOrder {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl CyclicOrder {
    fn new(n: usize, rng: Rng) -> Self {
        CyclicOrder {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

fn run(
    target: &EncodedSplit,
    source: Option<&EncodedSplit>,
    dev: &EncodedSplit,
    cfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    let mut target_order =
        CyclicOrder::new(target.len(), rng::stream(cfg.seed, streams::TARGET_ORDER));
    let mut source_order = source
        .filter(|s| !s.is_empty())
        .map(|s| CyclicOrder::new(s.len(), rng::stream(cfg.seed, streams::SOURCE_ORDER)));
    if source.is_some() && source_order.is_none() {
        return Err(Error::EmptySplit("source train"));
    }
    let mut mixing = rng::stream(cfg.seed, streams::MIXING);

    let steps = target.len();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut total = DrawCounts::default();
    let mut batch: Vec<Example<'_>> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        let mut draws = DrawCounts::default();
        let mut loss_sum = 0.0;
        let mut step = 0;
        while step < steps {
            batch.clear();
            for _ in 0..cfg.batch_size.min(steps - step) {
                let side = match &mut source_order {
                    None => LambdaSide::Target,
                    Some(_) if mixing.random::<f64>() < cfg.lambda => cfg.lambda_applies_to,
                    Some(_) => cfg.lambda_applies_to.other(),
                };
                let ex = match (side, &mut source_order, source) {
                    (LambdaSide::Source, Some(order), Some(src)) => {
                        draws.source += 1;
                        src.example(order.next())
                    }
                    _ => {
                        draws.target += 1;
                        target.example(target_order.next())
                    }
                };
                batch.push(ex);
            }
            let (loss, grads) = model::loss_and_grad(&params, &batch).map_err(|e| match e {
                Error::NonFinite(reason) => Error::Diverged {
                    epoch,
                    step,
                    reason,
                },
                other => other,
            })?;
            loss_sum += loss * batch.len() as f64;
            params.add_scaled(-cfg.learning_rate, &grads, cfg.freeze_lower_layers);
            if !params.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    reason: "non-finite parameters after update".into(),
                });
            }
            step += batch.len();
        }

        let metric = dev_metric(
            &dev.score(&params)?,
            cfg.checkpoint_metric,
            &cfg.threshold_grid,
        )?;
        if best.as_ref().is_none_or(|(m, _, _)| metric > *m) {
            best = Some((metric, epoch, params.clone()));
        }
        total.source += draws.source;
        total.target += draws.target;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / steps as f64,
            dev_metric: metric,
            draws,
        });
    }

    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainedModel {
        params,
        best_epoch,
        history,
        draws: total,
        config_echo: cfg.clone(),
    })
}

fn start_params(
    dims: &ModelDims,
    cfg: &TrainConfig,
    init: Option<&ModelParams>,
) -> Result<ModelParams> {
    match init {
        Some(p) if !p.fits(dims) => Err(Error::Shape(
            "initial parameters do not match model dims".into(),
        )),
        Some(p) => Ok(p.clone()),
        None => init_params(dims, cfg.seed),
    }
}

/// SGD on the corpus's train split, keeping the best epoch on dev.
pub fn train_base(
    corpus: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    cfg: &TrainConfig,
    init: Option<&ModelParams>,
) -> Result<TrainedModel> {
    check_table(table, dims)?;
    let train = encode_split(corpus, Split::Train, table, dims)?;
    let dev = encode_split(corpus, Split::Dev, table, dims)?;
    run(&train, None, &dev, cfg, start_params(dims, cfg, init)?)
}

/// INIT: train on the source, then fine-tune its best-dev weights on the
/// target.
pub fn train_init(
    source: &Corpus,
    target: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    cfg_source: &TrainConfig,
    cfg_target: &TrainConfig,
) -> Result<TrainedModel> {
    let pretrained = train_base(source, table, dims, cfg_source, None)?;
    train_base(target, table, dims, cfg_target, Some(&pretrained.params))
}

/// `λ·cost_s + (1 − λ)·cost_t`
pub fn mixed_cost(cost_s: f64, cost_t: f64, lambda: f64) -> f64 {
    lambda * cost_s + (1.0 - lambda) * cost_t
}

/// Full-batch MULT objective on the two train splits: the corpus named by
/// `cfg.lambda_applies_to` gets weight λ. This is the quantity the sampled
/// training steps estimate.
pub fn mixed_objective(
    params: &ModelParams,
    source: &Corpus,
    target: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    cfg: &TrainConfig,
) -> Result<f64> {
    check_table(table, dims)?;
    let s = encode_split(source, Split::Train, table, dims)?;
    let t = encode_split(target, Split::Train, table, dims)?;
    let cost_s = model::loss(params, &s.examples())?;
    let cost_t = model::loss(params, &t.examples())?;
    Ok(match cfg.lambda_applies_to {
        LambdaSide::Source => mixed_cost(cost_s, cost_t, cfg.lambda),
        LambdaSide::Target => mixed_cost(cost_t, cost_s, cfg.lambda),
    })
}

/// MULT: joint training with λ-mixed sampling, checkpointed on target dev.
pub fn train_mult(
    source: &Corpus,
    target: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    check_table(table, dims)?;
    let src = encode_split(source, Split::Train, table, dims)?;
    let train = encode_split(target, Split::Train, table, dims)?;
    let dev = encode_split(target, Split::Dev, table, dims)?;
    run(&train, Some(&src), &dev, cfg, init_params(dims, cfg.seed)?)
}

pub fn default_lambda_grid() -> Vec<f64> {
    vec![0.85, 0.875, 0.90, 0.925, 0.95, 0.975]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub dev_metric: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub best_lambda: f64,
    pub metric: CheckpointMetric,
    /// One row per grid value, ascending λ.
    pub rows: Vec<LambdaRow>,
}

impl LambdaSearch {
    pub fn best_row(&self) -> &LambdaRow {
        self.rows
            .iter()
            .find(|r| r.lambda == self.best_lambda)
            .expect("best lambda comes from the rows")
    }
}

/// Runs MULT for each λ in `grid` (same seed each time) and keeps the λ with
/// the best target dev metric, preferring the larger λ on ties. Grid cells
/// run on the current rayon pool.
pub fn search_lambda(
    source: &Corpus,
    target: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    cfg: &TrainConfig,
    grid: &[f64],
) -> Result<LambdaSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidArgument(format!(
            "lambda {bad} outside [0, 1]"
        )));
    }
    check_table(table, dims)?;
    let src = encode_split(source, Split::Train, table, dims)?;
    let train = encode_split(target, Split::Train, table, dims)?;
    let dev = encode_split(target, Split::Dev, table, dims)?;
    let start = init_params(dims, cfg.seed)?;

    let mut rows = grid
        .par_iter()
        .map(|&lambda| {
            let cell = TrainConfig {
                lambda,
                ..cfg.clone()
            };
            let m = run(&train, Some(&src), &dev, &cell, start.clone())?;
            Ok(LambdaRow {
                lambda,
                dev_metric: m.best_dev_metric(),
                best_epoch: m.best_epoch,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let best_lambda = rows
        .iter()
        .fold(None::<&LambdaRow>, |best, r| match best {
            Some(b) if b.dev_metric > r.dev_metric => Some(b),
            _ => Some(r),
        })
        .expect("grid is non-empty")
        .lambda;
    Ok(LambdaSearch {
        best_lambda,
        metric: cfg.checkpoint_metric,
        rows,
    })
}

/// Scores a split with `params`.
pub fn score_split(
    params: &ModelParams,
    corpus: &Corpus,
    split: Split,
    table: &EmbeddingTable,
    dims: &ModelDims,
) -> Result<Vec<ScoredGroup>> {
    check_table(table, dims)?;
    encode_split(corpus, split, table, dims)?.score(params)
}

/// Dev and test reports for a trained model. The triggering threshold is
/// chosen on dev and reused for test.
pub fn evaluate_dev_test(
    params: &ModelParams,
    corpus: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    grid: &[f64],
) -> Result<(EvalReport, EvalReport)> {
    let dev = score_split(params, corpus, Split::Dev, table, dims)?;
    let threshold = if dev.iter().any(ScoredGroup::has_positive) {
        Some(metrics::select_threshold(&dev, grid)?.threshold)
    } else {
        None
    };
    let dev_report = metrics::evaluate(&dev, threshold)?;
    let test = score_split(params, corpus, Split::Test, table, dims)?;
    Ok((dev_report, metrics::evaluate(&test, threshold)?))
}

//! Strategy dispatch and on-disk artifacts of a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xferqa_core::corpus::load_corpus;
use xferqa_core::embeddings::load_embeddings;
use xferqa_core::iss::{train_iss_mult, Selection};
use xferqa_core::model::save_checkpoint;
use xferqa_core::train::{evaluate_dev_test, train_base, train_mult, EpochRecord};
use xferqa_core::{Corpus, EmbeddingTable, EvalReport, LambdaSide, ModelDims, Role, TrainedModel};

use crate::config::{ExperimentConfig, Manifest, Strategy};
use crate::error::{io_err, CliResult};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";
pub const EVAL_FILE: &str = "eval.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FILTER_FILE: &str = "filter.tsv";

pub struct Inputs {
    pub source: Option<Corpus>,
    pub target: Corpus,
    pub table: EmbeddingTable,
    pub dims: ModelDims,
}

/// File stem, used as the corpus name in reports.
pub fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_inputs(config: &ExperimentConfig) -> CliResult<Inputs> {
    let dims = config.dims.resolve();
    let table = load_embeddings(config.embeddings_path()?, Some(dims.embed_dim))?;
    let target_path = config.target_path()?;
    let target = load_corpus(target_path, &corpus_name(target_path))?.with_role(Role::Target);
    let source = match &config.source_corpus {
        Some(p) if config.strategy.needs_source() => {
            Some(load_corpus(p, &corpus_name(p))?.with_role(Role::Source))
        }
        _ => None,
    };
    Ok(Inputs {
        source,
        target,
        table,
        dims,
    })
}

/// Contents of `eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub strategy: Strategy,
    pub source: Option<String>,
    pub target: String,
    pub lambda: Option<f64>,
    pub lambda_applies_to: Option<LambdaSide>,
    pub best_epoch: usize,
    pub dev: EvalReport,
    pub test: EvalReport,
}

#[derive(Debug, Serialize)]
struct LogLine<'a> {
    phase: &'a str,
    #[serde(flatten)]
    record: &'a EpochRecord,
}

pub struct RunOutcome {
    pub model: TrainedModel,
    /// Source pre-training run of `init`.
    pub pretrained: Option<TrainedModel>,
    pub selection: Option<Selection>,
    pub summary: EvalSummary,
}

/// Trains and evaluates without touching the filesystem beyond the inputs.
pub fn execute(config: &ExperimentConfig, inputs: &Inputs) -> CliResult<RunOutcome> {
    let Inputs {
        source,
        target,
        table,
        dims,
    } = inputs;
    let cfg = &config.train;
    let source_of = || {
        source.as_ref().ok_or_else(|| {
            crate::error::CliError::Config("missing required field `source_corpus`".into())
        })
    };

    let (model, pretrained, selection) = match config.strategy {
        Strategy::Base => (train_base(target, table, dims, cfg, None)?, None, None),
        Strategy::Init => {
            let pre = train_base(
                source_of()?,
                table,
                dims,
                config.source_train_config(),
                None,
            )?;
            let model = train_base(target, table, dims, cfg, Some(&pre.params))?;
            (model, Some(pre), None)
        }
        Strategy::Mult => (
            train_mult(source_of()?, target, table, dims, cfg)?,
            None,
            None,
        ),
        Strategy::IssMult => {
            let run = train_iss_mult(source_of()?, target, table, dims, cfg, &config.iss)?;
            (run.model, None, Some(run.selection))
        }
    };
    let (dev, test) = evaluate_dev_test(&model.params, target, table, dims, &cfg.threshold_grid)?;
    let mixes = config.strategy.mixes();
    let summary = EvalSummary {
        strategy: config.strategy,
        source: source.as_ref().map(|s| s.name.clone()),
        target: target.name.clone(),
        lambda: mixes.then_some(cfg.lambda),
        lambda_applies_to: mixes.then_some(cfg.lambda_applies_to),
        best_epoch: model.best_epoch,
        dev,
        test,
    };
    Ok(RunOutcome {
        model,
        pretrained,
        selection,
        summary,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(xferqa_core::Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes checkpoint, epoch log, eval summary and manifest (plus the
/// filter audit for `iss-mult`) into the output directory.
pub fn write_artifacts(
    config: &ExperimentConfig,
    manifest: &Manifest,
    outcome: &RunOutcome,
) -> CliResult<Vec<PathBuf>> {
    let dir = config.out_dir()?;
    create_dir(dir)?;
    let dims = config.dims.resolve();
    let mut written = Vec::new();

    let path = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&outcome.model.params, &dims, &path)?;
    written.push(path);

    let path = dir.join(EPOCH_LOG_FILE);
    let mut log = Vec::new();
    let phases = outcome
        .pretrained
        .iter()
        .map(|m| ("source", m))
        .chain([("target", &outcome.model)]);
    for (phase, model) in phases {
        for record in &model.history {
            serde_json::to_writer(&mut log, &LogLine { phase, record })
                .map_err(xferqa_core::Error::from)?;
            log.push(b'\n');
        }
    }
    fs::File::create(&path)
        .and_then(|mut f| f.write_all(&log))
        .map_err(io_err(&path))?;
    written.push(path);

    let path = dir.join(EVAL_FILE);
    write_json(&path, &outcome.summary)?;
    written.push(path);

    if let Some(sel) = &outcome.selection {
        let path = dir.join(FILTER_FILE);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        sel.decision.write_tsv(file).map_err(io_err(&path))?;
        written.push(path);
    }

    let path = dir.join(MANIFEST_FILE);
    write_json(&path, manifest)?;
    written.push(path);
    Ok(written)
}

/// Full `train` pipeline: load, train, evaluate, write.
pub fn run(config: &ExperimentConfig) -> CliResult<RunOutcome> {
    config.validate()?;
    let manifest = Manifest::for_config(config)?;
    let inputs = load_inputs(config)?;
    let outcome = execute(config, &inputs)?;
    write_artifacts(config, &manifest, &outcome)?;
    Ok(outcome)
}

pub fn read_summary(dir: &Path) -> CliResult<EvalSummary> {
    let path = dir.join(EVAL_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_str(&text).map_err(xferqa_core::Error::from)?)
}

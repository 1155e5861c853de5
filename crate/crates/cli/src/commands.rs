//! One function per subcommand. Each returns the text printed on stdout.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use xferqa_core::corpus::{hit_rate, save_corpus};
use xferqa_core::embeddings::save_embeddings;
use xferqa_core::iss::select_for_target;
use xferqa_core::model::load_checkpoint_for;
use xferqa_core::synth::{transfer_world, WorldSpec};
use xferqa_core::train::{evaluate_dev_test, search_lambda as core_search_lambda};
use xferqa_core::{ClusterSet, Corpus, EmbeddingTable, EvalReport, Split, TrainConfig};

use crate::config::{ExperimentConfig, Strategy};
use crate::error::{io_err, CliError, CliResult};
use crate::experiment::{
    self, create_dir, load_inputs, read_summary, write_json, CHECKPOINT_FILE, FILTER_FILE,
};
use crate::report::{build_table, lambda_table};

fn corpus_stats(out: &mut String, corpus: &Corpus, table: &EmbeddingTable) {
    let _ = writeln!(out, "corpus {} ({:?})", corpus.name, corpus.role);
    for split in Split::ALL {
        let groups = corpus.split(split);
        let positives = corpus.instances(split).filter(|i| i.label).count();
        let hits = hit_rate(corpus, split).map_or_else(|_| "—".to_string(), |h| format!("{h:.4}"));
        let _ = writeln!(
            out,
            "  {split:<5} groups {:>6}  instances {:>7}  positives {:>6}  hit rate {hits}",
            groups.len(),
            corpus.n_instances(split),
            positives
        );
    }
    let mut types = HashSet::new();
    let (mut tokens, mut known) = (0usize, 0usize);
    for inst in Split::ALL.into_iter().flat_map(|s| corpus.instances(s)) {
        for t in inst.question_tokens.iter().chain(&inst.answer_tokens) {
            tokens += 1;
            known += usize::from(table.contains(t));
            types.insert(t.as_str());
        }
    }
    let known_types = types.iter().filter(|t| table.contains(t)).count();
    let _ = writeln!(
        out,
        "  embedding coverage: {known}/{tokens} tokens, {known_types}/{} types",
        types.len()
    );
}

pub fn ingest_check(config: &ExperimentConfig) -> CliResult<String> {
    let mut config = config.clone();
    if config.source_corpus.is_some() && config.strategy == Strategy::Base {
        // load the source too when one is configured
        config.strategy = Strategy::Mult;
    }
    let inputs = load_inputs(&config)?;
    let mut out = format!(
        "embeddings: {} vectors, dim {}\n",
        inputs.table.len(),
        inputs.table.dim()
    );
    if let Some(src) = &inputs.source {
        corpus_stats(&mut out, src, &inputs.table);
    }
    corpus_stats(&mut out, &inputs.target, &inputs.table);
    inputs.target.require(Split::Train)?;
    inputs.target.require(Split::Dev)?;
    Ok(out)
}

fn metrics_line(name: &str, r: &EvalReport) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "—".to_string(), |x| format!("{x:.4}"));
    let threshold = r
        .threshold
        .map_or_else(|| "—".to_string(), |t| t.to_string());
    format!(
        "{name:<5} MAP {}  MRR {}  F1 {}  (P {} R {} @ {threshold})",
        f(r.map),
        f(r.mrr),
        f(r.f1),
        f(r.precision),
        f(r.recall)
    )
}

pub fn train(config: &ExperimentConfig) -> CliResult<String> {
    let outcome = experiment::run(config)?;
    let s = &outcome.summary;
    let mut out = format!("strategy {} on {}", s.strategy, s.target);
    if let Some(src) = &s.source {
        let _ = write!(out, " with source {src}");
    }
    if let (Some(l), Some(side)) = (s.lambda, s.lambda_applies_to) {
        let _ = write!(out, ", lambda {l} applied to {side:?}");
    }
    let _ = writeln!(out, "\nbest epoch {}", s.best_epoch);
    let _ = writeln!(out, "{}", metrics_line("dev", &s.dev));
    let _ = writeln!(out, "{}", metrics_line("test", &s.test));
    let _ = writeln!(out, "artifacts in {}", config.out_dir()?.display());
    Ok(out)
}

pub fn search_lambda(config: &ExperimentConfig) -> CliResult<String> {
    config.source_path()?;
    let mut cfg = config.clone();
    cfg.strategy = Strategy::Mult;
    let inputs = load_inputs(&cfg)?;
    let source = inputs.source.as_ref().expect("mult loads the source");
    let search = core_search_lambda(
        source,
        &inputs.target,
        &inputs.table,
        &inputs.dims,
        &cfg.train,
        &cfg.lambda_grid,
    )?;
    let table = lambda_table(&search);
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write_json(&dir.join("lambda.json"), &search)?;
        let path = dir.join("lambda.tsv");
        fs::write(&path, &table.tsv).map_err(io_err(&path))?;
    }
    Ok(format!(
        "lambda search ({} applied to {:?})\n{}best lambda {}\n",
        source.name, cfg.train.lambda_applies_to, table.text, search.best_lambda
    ))
}

#[derive(Serialize)]
struct ClusterAudit<'a> {
    k: usize,
    sizes: Vec<usize>,
    clusters: &'a ClusterSet,
    keep_fraction: f64,
    threshold: f64,
    kept: usize,
    total: usize,
}

pub fn cluster_audit(config: &ExperimentConfig) -> CliResult<String> {
    config.source_path()?;
    let mut cfg = config.clone();
    cfg.strategy = Strategy::IssMult;
    let inputs = load_inputs(&cfg)?;
    let source = inputs.source.as_ref().expect("iss-mult loads the source");
    let sel = select_for_target(source, &inputs.target, &inputs.table, &cfg.iss)?;
    let sizes: Vec<usize> = (0..sel.clusters.k)
        .map(|c| sel.clusters.members(c).len())
        .collect();
    let audit = ClusterAudit {
        k: sel.clusters.k,
        sizes: sizes.clone(),
        clusters: &sel.clusters,
        keep_fraction: sel.decision.keep_fraction,
        threshold: sel.decision.threshold,
        kept: sel.decision.n_kept(),
        total: sel.decision.keep_mask.len(),
    };
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write_json(&dir.join("clusters.json"), &audit)?;
        let path = dir.join(FILTER_FILE);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        sel.decision.write_tsv(file).map_err(io_err(&path))?;
    }
    let mut out = format!(
        "{} target dev instances in {} clusters; sizes {:?}\n",
        sel.clusters.assignments.len(),
        sel.clusters.k,
        sizes
    );
    let _ = writeln!(
        out,
        "kept {}/{} source train instances ({:.4}, requested {}) at similarity >= {}",
        audit.kept,
        audit.total,
        audit.keep_fraction,
        sel.decision.requested_fraction,
        audit.threshold
    );
    let _ = writeln!(
        out,
        "source train groups {} -> {}",
        source.train.len(),
        sel.filtered.train.len()
    );
    Ok(out)
}

#[derive(Serialize)]
struct Evaluation<'a> {
    checkpoint: &'a Path,
    target: &'a str,
    dev: EvalReport,
    test: EvalReport,
}

pub fn evaluate(config: &ExperimentConfig, checkpoint: Option<&Path>) -> CliResult<String> {
    let path: PathBuf = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => config
            .out_dir()
            .map_err(|_| {
                CliError::Config("evaluate needs --checkpoint or an output directory".into())
            })?
            .join(CHECKPOINT_FILE),
    };
    let mut cfg = config.clone();
    cfg.strategy = Strategy::Base;
    let inputs = load_inputs(&cfg)?;
    let params = load_checkpoint_for(&path, &inputs.dims)?;
    let (dev, test) = evaluate_dev_test(
        &params,
        &inputs.target,
        &inputs.table,
        &inputs.dims,
        &cfg.train.threshold_grid,
    )?;
    let mut out = format!(
        "{}\n{}\n",
        metrics_line("dev", &dev),
        metrics_line("test", &test)
    );
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write_json(
            &dir.join("evaluate.json"),
            &Evaluation {
                checkpoint: &path,
                target: &inputs.target.name,
                dev,
                test,
            },
        )?;
        let _ = writeln!(out, "written {}", dir.join("evaluate.json").display());
    }
    Ok(out)
}

pub fn report(dirs: &[PathBuf], out: Option<&Path>) -> CliResult<String> {
    let summaries = dirs
        .iter()
        .map(|d| read_summary(d))
        .collect::<CliResult<Vec<_>>>()?;
    let table = build_table(&summaries)?;
    let text = table.to_text();
    if let Some(dir) = out {
        create_dir(dir)?;
        for (name, body) in [("report.txt", &text), ("report.tsv", &table.to_tsv())] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
    }
    Ok(text)
}

/// Writes a synthetic source/target pair, word vectors and a ready-to-run
/// config into `out`.
pub fn synth(out: &Path, seed: u64, noise_fraction: f64) -> CliResult<String> {
    let spec = WorldSpec {
        noise_fraction,
        ..WorldSpec::default()
    };
    let world = transfer_world(seed, &spec)?;
    create_dir(out)?;
    save_corpus(&world.source, out.join("source.tsv"))?;
    save_corpus(&world.target, out.join("target.tsv"))?;
    save_embeddings(&world.table, out.join("embeddings.txt"))?;
    let config = ExperimentConfig {
        source_corpus: Some("source.tsv".into()),
        target_corpus: Some("target.tsv".into()),
        embeddings: Some("embeddings.txt".into()),
        strategy: Strategy::Mult,
        train: TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
        out: Some("runs/mult".into()),
        ..ExperimentConfig::default()
    };
    write_json(&out.join("config.json"), &config)?;
    Ok(format!(
        "wrote source ({} train groups, {} noisy), target ({} train groups) and {} vectors to {}\n",
        world.source.train.len(),
        world.noise_groups.len(),
        world.target.train.len(),
        world.table.len(),
        out.display()
    ))
}

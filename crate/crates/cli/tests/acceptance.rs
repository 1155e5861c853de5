//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use xferqa_cli::commands;
use xferqa_cli::config::{load_config, Overrides, Strategy};
use xferqa_cli::experiment::{self, CHECKPOINT_FILE, EVAL_FILE, MANIFEST_FILE};
use xferqa_cli::report::{build_table, parse_report_tsv};
use xferqa_core::corpus::{read_corpus, write_corpus};
use xferqa_core::iss::{
    agglomerative_cluster, select_for_target, select_source, train_iss_mult, IssConfig,
};
use xferqa_core::metrics::{map_mrr, triggering_f1};
use xferqa_core::model::{
    init_params, loss, loss_and_grad, read_checkpoint, write_checkpoint, Example,
};
use xferqa_core::numkernel::finite_diff_check;
use xferqa_core::synth::{synth_corpus, transfer_world, WorldSpec};
use xferqa_core::train::{train_base, train_init, train_mult};
use xferqa_core::{
    CheckpointMetric, EmbeddingTable, LambdaSide, ModelDims, ModelParams, ScoredGroup,
    SentenceMatrix, Split, TrainConfig,
};

/// splitmix64; keeps the suite free of RNG crates.
struct Mix(u64);

impl Mix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

type Outcome = Result<String, String>;

/// Name, check, optional time budget.
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 ------------------------------------------------------------------------

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut r = Mix(seed);
        let dims = ModelDims {
            embed_dim: 3 + r.below(6),
            n_filters_1: 2 + r.below(7),
            n_filters_2: 2 + r.below(7),
            max_len: 4 + r.below(9),
        };
        let words: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
        let table = EmbeddingTable::from_entries(
            dims.embed_dim,
            words.iter().map(|w| {
                (
                    w.clone(),
                    (0..dims.embed_dim).map(|_| r.range(-1.0, 1.0)).collect(),
                )
            }),
        )
        .map_err(e2s)?;
        let sentence = |r: &mut Mix| -> Result<SentenceMatrix, String> {
            let n = 1 + r.below(dims.max_len);
            let toks: Vec<String> = (0..n)
                .map(|_| words[r.below(words.len())].clone())
                .collect();
            xferqa_core::embeddings::embed_sentence(&toks, &table, dims.max_len).map_err(e2s)
        };
        let sents: Vec<(SentenceMatrix, SentenceMatrix, bool)> = (0..3)
            .map(|i| Ok((sentence(&mut r)?, sentence(&mut r)?, i % 2 == 0)))
            .collect::<Result<_, String>>()?;
        let batch: Vec<Example> = sents
            .iter()
            .map(|(q, a, l)| Example {
                question: q,
                answer: a,
                label: *l,
                question_id: "q",
            })
            .collect();
        let mut p = init_params(&dims, seed).map_err(e2s)?;
        p.conv1_bias
            .iter_mut()
            .for_each(|b| *b = r.range(-0.1, 0.1));
        p.conv2_bias
            .iter_mut()
            .for_each(|b| *b = r.range(-0.1, 0.1));
        p.lr_bias = r.range(-0.1, 0.1);
        let (_, g) = loss_and_grad(&p, &batch).map_err(e2s)?;
        let rep = finite_diff_check(
            |theta| loss(&ModelParams::from_flat(&dims, theta).unwrap(), &batch).unwrap(),
            &g.to_flat(),
            &p.to_flat(),
            1e-5,
            1e-4,
        )
        .map_err(e2s)?;
        check(rep.passed, || format!("seed {seed} dims {dims:?}: {rep:?}"))?;
        worst = worst.max(rep.max_rel_err);
    }
    Ok(format!("20 seeds, worst relative error {worst:.2e}"))
}

// 2 ------------------------------------------------------------------------

fn random_groups(r: &mut Mix) -> Vec<ScoredGroup> {
    (0..1 + r.below(10))
        .map(|_| {
            let n = 1 + r.below(8);
            let scores = (0..n).map(|_| r.below(5) as f64 / 4.0).collect();
            let labels = (0..n).map(|_| r.below(3) == 0).collect();
            ScoredGroup::new("g", scores, labels).unwrap()
        })
        .collect()
}

/// Candidate indices by descending score, earlier index first on ties,
/// via selection of the maximum each round.
fn brute_order(g: &ScoredGroup) -> Vec<usize> {
    let mut left: Vec<usize> = (0..g.scores.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for k in 1..left.len() {
            if g.scores[left[k]] > g.scores[left[best]] {
                best = k;
            }
        }
        out.push(left.remove(best));
    }
    out
}

fn brute_ap_rr(g: &ScoredGroup) -> (f64, f64) {
    let order = brute_order(g);
    let (mut hits, mut sum, mut first) = (0usize, 0.0, None);
    for (pos, &i) in order.iter().enumerate() {
        if g.labels[i] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
            first.get_or_insert(pos + 1);
        }
    }
    (sum / hits as f64, 1.0 / first.unwrap() as f64)
}

fn metric_oracles() -> Outcome {
    let mut r = Mix(2024);
    let (mut n_sel, mut n_trig) = (0, 0);
    for case in 0..100 {
        let groups = random_groups(&mut r);
        let answerable: Vec<&ScoredGroup> = groups
            .iter()
            .filter(|g| g.labels.iter().any(|&l| l))
            .collect();
        match map_mrr(&groups) {
            Ok((map, mrr, _)) => {
                let (ap, rr) = answerable
                    .iter()
                    .map(|g| brute_ap_rr(g))
                    .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
                let n = answerable.len() as f64;
                check(
                    (map - ap / n).abs() <= 1e-12 && (mrr - rr / n).abs() <= 1e-12,
                    || {
                        format!(
                            "case {case}: MAP {map} vs {}, MRR {mrr} vs {}",
                            ap / n,
                            rr / n
                        )
                    },
                )?;
                n_sel += 1;
            }
            Err(_) => check(answerable.is_empty(), || {
                format!("case {case}: MAP refused")
            })?,
        }
        let threshold = r.below(5) as f64 / 4.0;
        match triggering_f1(&groups, threshold) {
            Ok(rep) => {
                let (mut tp, mut fire) = (0.0, 0.0);
                for g in &groups {
                    let top = brute_order(g)[0];
                    if g.scores[top] >= threshold {
                        fire += 1.0;
                        if g.labels[top] {
                            tp += 1.0;
                        }
                    }
                }
                let p = if fire > 0.0 { tp / fire } else { 0.0 };
                let rc = tp / answerable.len() as f64;
                let f = if p + rc > 0.0 {
                    2.0 * p * rc / (p + rc)
                } else {
                    0.0
                };
                let got = rep.f1.unwrap_or(f64::NAN);
                check((got - f).abs() <= 1e-12, || {
                    format!("case {case}: F1 {got} vs {f}")
                })?;
                n_trig += 1;
            }
            Err(_) => check(answerable.is_empty(), || format!("case {case}: F1 refused"))?,
        }
    }
    Ok(format!(
        "100 instances ({n_sel} with MAP/MRR, {n_trig} with F1), exact to 1e-12"
    ))
}

// 3 ------------------------------------------------------------------------

fn small_world(seed: u64) -> Result<xferqa_core::synth::TransferWorld, String> {
    let spec = WorldSpec {
        target_questions: 200,
        target_train: 20,
        ..WorldSpec::default()
    };
    transfer_world(seed, &spec).map_err(e2s)
}

fn bits(p: &ModelParams) -> Vec<u64> {
    p.to_flat().iter().map(|x| x.to_bits()).collect()
}

fn lambda_degeneracy() -> Outcome {
    let dims = ModelDims::desk();
    let mut source_draws = 0;
    for seed in 0..3u64 {
        let w = small_world(seed)?;
        let cfg = TrainConfig {
            seed,
            epochs: 4,
            lambda: 1.0,
            lambda_applies_to: LambdaSide::Target,
            ..TrainConfig::default()
        };
        let mult = train_mult(&w.source, &w.target, &w.table, &dims, &cfg).map_err(e2s)?;
        let base = train_base(&w.target, &w.table, &dims, &cfg, None).map_err(e2s)?;
        check(
            bits(&mult.params) == bits(&base.params) && mult.history.len() == base.history.len(),
            || format!("seed {seed}: lambda=1 differs from base"),
        )?;
        for (a, b) in mult.history.iter().zip(&base.history) {
            check(
                a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.dev_metric.to_bits() == b.dev_metric.to_bits(),
                || format!("seed {seed}: epoch {} log differs", a.epoch),
            )?;
        }
        check(mult.draws.source == 0, || {
            format!("seed {seed}: lambda=1 drew source")
        })?;

        let zero = TrainConfig { lambda: 0.0, ..cfg };
        let m0 = train_mult(&w.source, &w.target, &w.table, &dims, &zero).map_err(e2s)?;
        check(m0.draws.target == 0 && m0.draws.source > 0, || {
            format!("seed {seed}: lambda=0 draws {:?}", m0.draws)
        })?;
        source_draws += m0.draws.source;
    }
    Ok(format!("3 seeds bit-identical at lambda=1; lambda=0 drew {source_draws} source and 0 target samples"))
}

// 4 ------------------------------------------------------------------------

fn iss_noop() -> Outcome {
    let dims = ModelDims::desk();
    for seed in 0..3u64 {
        let w = small_world(seed)?;
        let cfg = TrainConfig {
            seed,
            epochs: 4,
            ..TrainConfig::default()
        };
        let iss = IssConfig {
            keep_fraction: 1.0,
            ..IssConfig::default()
        };
        let a = train_iss_mult(&w.source, &w.target, &w.table, &dims, &cfg, &iss).map_err(e2s)?;
        let b = train_mult(&w.source, &w.target, &w.table, &dims, &cfg).map_err(e2s)?;
        check(a.selection.filtered == w.source, || {
            format!("seed {seed}: filter changed the source")
        })?;
        check(
            bits(&a.model.params) == bits(&b.params) && a.model.history == b.history,
            || format!("seed {seed}: ISS-MULT at keep 1.0 differs from MULT"),
        )?;
    }
    Ok("3 seeds bit-identical".into())
}

// 5 ------------------------------------------------------------------------

fn filter_oracle() -> Outcome {
    let mut checked = 0;
    for seed in 0..5u64 {
        let mut w = small_world(seed)?;
        w.source.train.truncate(40); // 200 instances
        let sel = select_for_target(&w.source, &w.target, &w.table, &IssConfig::default())
            .map_err(e2s)?;
        let centers = &sel.clusters.centers;
        // similarity recomputed from raw vectors
        let sims: Vec<f64> = w
            .source
            .instances(Split::Train)
            .map(|inst| {
                let toks: Vec<&String> = inst
                    .question_tokens
                    .iter()
                    .chain(&inst.answer_tokens)
                    .collect();
                let mut v = vec![0.0; w.table.dim()];
                for t in &toks {
                    for (acc, x) in v.iter_mut().zip(w.table.lookup(t)) {
                        *acc += x;
                    }
                }
                v.iter_mut().for_each(|x| *x *= 1.0 / toks.len() as f64);
                centers
                    .iter()
                    .map(|c| {
                        let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                        let nc = c.iter().map(|a| a * a).sum::<f64>().sqrt();
                        (dot / (nv * nc)).clamp(-1.0, 1.0)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let n = sims.len();
        check(n == 200, || format!("expected 200 samples, got {n}"))?;
        for f in [0.05, 0.1, 0.25, 0.5, 0.7, 0.8, 0.9, 1.0] {
            let (_, d) = select_source(&w.source, centers, &w.table, f).map_err(e2s)?;
            let m = ((f * n as f64) - 1e-9).ceil().max(1.0) as usize;
            let mut sorted = sims.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let cut = sorted[m - 1];
            let expected: Vec<bool> = sims.iter().map(|&s| s >= cut).collect();
            check(d.keep_mask == expected, || {
                format!("seed {seed} fraction {f}: keep set differs")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} (seed, fraction) cases on 200 samples match"
    ))
}

// 6 ------------------------------------------------------------------------

fn clustering() -> Outcome {
    let mut r = Mix(6);
    let random_vectors = |r: &mut Mix, n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..4).map(|_| r.range(-1.0, 1.0)).collect())
            .collect()
    };
    let vs = random_vectors(&mut r, 12);
    let c = agglomerative_cluster(&vs, vs.len()).map_err(e2s)?;
    check(
        c.assignments == (0..12).collect::<Vec<_>>() && c.centers == vs,
        || "k=n is not the identity".into(),
    )?;

    let c = agglomerative_cluster(&vs, 1).map_err(e2s)?;
    for d in 0..4 {
        let mean = vs.iter().map(|v| v[d]).sum::<f64>() / vs.len() as f64;
        check((c.centers[0][d] - mean).abs() <= 1e-12, || {
            format!("k=1 center off in dim {d}")
        })?;
    }

    let three = vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]];
    let c = agglomerative_cluster(&three, 2).map_err(e2s)?;
    check(
        c.members(0) == vec![0, 1] && c.members(1) == vec![2],
        || format!("3-vector example gave {:?}", c.assignments),
    )?;

    for case in 0..20 {
        let n = 3 + r.below(20);
        let vs = random_vectors(&mut r, n);
        let c = agglomerative_cluster(&vs, 1).map_err(e2s)?;
        check(
            c.merge_similarities.windows(2).all(|w| w[1] <= w[0]),
            || {
                format!(
                    "case {case}: merge similarities increase: {:?}",
                    c.merge_similarities
                )
            },
        )?;
    }
    Ok("singletons, global mean, 3-vector example, 20 monotone merge sequences".into())
}

// 7 ------------------------------------------------------------------------

/// Related pair: small target train split, source with four times as many
/// train questions, both from the same generator.
fn transfer_spec(noise_fraction: f64) -> WorldSpec {
    WorldSpec {
        source_multiple: 4,
        noise_fraction,
        ..WorldSpec::default()
    }
}

fn transfer_config(seed: u64, side: LambdaSide) -> TrainConfig {
    TrainConfig {
        seed,
        epochs: 40,
        lambda: 0.9,
        lambda_applies_to: side,
        ..TrainConfig::default()
    }
}

struct TransferTally {
    wins: [usize; 4],
    lines: Vec<String>,
}

fn transfer_runs(side: LambdaSide) -> Result<TransferTally, String> {
    let dims = ModelDims::desk();
    let mut wins = [0usize; 4];
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let w = transfer_world(seed, &transfer_spec(0.0)).map_err(e2s)?;
        let cfg = transfer_config(seed, side);
        let base = train_base(&w.target, &w.table, &dims, &cfg, None)
            .map_err(e2s)?
            .best_dev_metric();
        let init = train_init(&w.source, &w.target, &w.table, &dims, &cfg, &cfg)
            .map_err(e2s)?
            .best_dev_metric();
        let mult = train_mult(&w.source, &w.target, &w.table, &dims, &cfg)
            .map_err(e2s)?
            .best_dev_metric();
        let iss = train_iss_mult(
            &w.source,
            &w.target,
            &w.table,
            &dims,
            &cfg,
            &IssConfig::default(),
        )
        .map_err(e2s)?
        .model
        .best_dev_metric();

        let noisy = transfer_world(seed, &transfer_spec(0.3)).map_err(e2s)?;
        let f1_cfg = TrainConfig {
            checkpoint_metric: CheckpointMetric::F1,
            ..cfg
        };
        let keep = IssConfig {
            keep_fraction: 0.7,
            ..IssConfig::default()
        };
        let mult_f1 = train_mult(&noisy.source, &noisy.target, &noisy.table, &dims, &f1_cfg)
            .map_err(e2s)?
            .best_dev_metric();
        let iss_f1 = train_iss_mult(
            &noisy.source,
            &noisy.target,
            &noisy.table,
            &dims,
            &f1_cfg,
            &keep,
        )
        .map_err(e2s)?
        .model
        .best_dev_metric();

        for (slot, won) in [init > base, mult > base, iss > base, iss_f1 > mult_f1]
            .into_iter()
            .enumerate()
        {
            wins[slot] += usize::from(won);
        }
        lines.push(format!(
            "    seed {seed}: MAP base {base:.4} init {init:.4} mult {mult:.4} iss-mult {iss:.4} | noisy F1 mult {mult_f1:.4} iss-mult {iss_f1:.4}"
        ));
    }
    Ok(TransferTally { wins, lines })
}

fn directional_transfer() -> Outcome {
    let t = transfer_runs(LambdaSide::Target)?;
    for l in &t.lines {
        println!("{l}");
    }
    let [init, mult, iss, noise] = t.wins;
    let summary = format!(
        "dev MAP wins over base: init {init}/5 mult {mult}/5 iss-mult {iss}/5; noisy dev F1 iss-mult over mult {noise}/5"
    );
    // informational: the same runs with lambda weighting the source
    let s = transfer_runs(LambdaSide::Source)?;
    let [si, sm, ss, sn] = s.wins;
    println!(
        "    (info) lambda on source: init {si}/5 mult {sm}/5 iss-mult {ss}/5; noisy F1 {sn}/5"
    );
    check(t.wins.iter().all(|&w| w >= 4), || summary.clone())?;
    Ok(summary)
}

// 8 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(e2s)?;
    let world = tmp.path().join("world");
    commands::synth(&world, 4, 0.3).map_err(e2s)?;
    let cfg_path = world.join("config.json");
    let mut done = Vec::new();
    for s in Strategy::ALL {
        let first = tmp.path().join(format!("{s}-0"));
        let overrides = Overrides {
            strategy: Some(s),
            out: Some(first.clone()),
            ..Overrides::default()
        };
        let mut cfg = load_config(&cfg_path, &overrides).map_err(e2s)?;
        cfg.train.epochs = 3;
        cfg.iss.keep_fraction = 0.7;
        experiment::run(&cfg).map_err(e2s)?;
        let manifest = first.join(MANIFEST_FILE);
        let mut outputs = Vec::new();
        for rep in 1..=2 {
            let dir = tmp.path().join(format!("{s}-{rep}"));
            let o = Overrides {
                out: Some(dir.clone()),
                ..Overrides::default()
            };
            experiment::run(&load_config(&manifest, &o).map_err(e2s)?).map_err(e2s)?;
            outputs.push(dir);
        }
        for f in [EVAL_FILE, CHECKPOINT_FILE] {
            let read = |d: &Path| fs::read(d.join(f)).map_err(e2s);
            let (a, b, c) = (read(&first)?, read(&outputs[0])?, read(&outputs[1])?);
            check(a == b && b == c, || {
                format!("{s}: {f} differs between runs")
            })?;
        }
        done.push(s.as_str());
    }
    Ok(format!(
        "manifest reruns byte-identical for {}",
        done.join(", ")
    ))
}

// 9 ------------------------------------------------------------------------

fn round_trips() -> Outcome {
    let corpus = synth_corpus(9, 120, 5, 60, 0.6).map_err(e2s)?;
    let mut buf = Vec::new();
    write_corpus(&corpus, &mut buf).map_err(e2s)?;
    let back = read_corpus(buf.as_slice(), &corpus.name).map_err(e2s)?;
    check(back == corpus, || {
        "corpus TSV round-trip changed the corpus".into()
    })?;

    let dims = ModelDims {
        embed_dim: 5,
        n_filters_1: 4,
        n_filters_2: 3,
        max_len: 9,
    };
    let mut p = init_params(&dims, 3).map_err(e2s)?;
    p.lr_bias = 1.0 / 3.0;
    p.conv2_bias = vec![1e-300, -2.5e-17, std::f64::consts::PI];
    let mut json = Vec::new();
    write_checkpoint(&p, &dims, &mut json).map_err(e2s)?;
    let (q, d2) = read_checkpoint(std::str::from_utf8(&json).map_err(e2s)?).map_err(e2s)?;
    check(d2 == dims && bits(&q) == bits(&p), || {
        "checkpoint JSON round-trip is not bit-exact".into()
    })?;

    let tmp = tempfile::TempDir::new().map_err(e2s)?;
    let world = tmp.path().join("world");
    commands::synth(&world, 2, 0.0).map_err(e2s)?;
    let mut summaries = Vec::new();
    for s in [Strategy::Base, Strategy::Mult] {
        let out = tmp.path().join(s.as_str());
        let overrides = Overrides {
            strategy: Some(s),
            out: Some(out.clone()),
            ..Overrides::default()
        };
        let mut cfg = load_config(&world.join("config.json"), &overrides).map_err(e2s)?;
        cfg.train.epochs = 2;
        experiment::run(&cfg).map_err(e2s)?;
        summaries.push(experiment::read_summary(&out).map_err(e2s)?);
    }
    let table = build_table(&summaries).map_err(e2s)?;
    let parsed = parse_report_tsv(&table.to_tsv()).map_err(e2s)?;
    check(parsed == table, || "report TSV round-trip differs".into())?;
    let text = table.to_text();
    for row in &parsed.rows {
        for v in [row.map, row.mrr, row.f1].into_iter().flatten() {
            let shown = format!("{:.2}", 100.0 * v);
            check(text.contains(&shown), || {
                format!("text table lacks {shown}")
            })?;
        }
    }
    Ok("corpus TSV, checkpoint JSON (bit-exact) and report TSV".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "gradient correctness",
            gradients,
            Some(Duration::from_secs(30)),
        ),
        (
            "metric oracles",
            metric_oracles,
            Some(Duration::from_secs(5)),
        ),
        (
            "lambda degeneracy",
            lambda_degeneracy,
            Some(Duration::from_secs(120)),
        ),
        ("ISS no-op equivalence", iss_noop, None),
        ("filter oracle", filter_oracle, None),
        ("clustering properties", clustering, None),
        (
            "directional transfer",
            directional_transfer,
            Some(Duration::from_secs(600)),
        ),
        ("determinism", determinism, None),
        ("round-trips", round_trips, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, budget) {
            if took > limit {
                outcome = Err(format!("{detail}; took {took:.1?}, budget {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("[PASS] criterion {}: {name}: {detail} ({took:.1?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name}: {why} ({took:.1?})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Intelligent sample selection.
//!
//! The target dev set is clustered bottom-up under cosine similarity with
//! average linkage. Each source train instance is then scored by its best
//! cosine similarity to any cluster center, and only the most similar
//! fraction takes part in MULT training.

use std::io::{BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::embeddings::{sentence_vector_of, EmbeddingTable, SampleText};
use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::train::{train_mult, TrainConfig, TrainedModel};

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSet {
    /// Cluster id of each input vector. Ids are numbered by first member.
    pub assignments: Vec<usize>,
    /// Mean of each cluster's members.
    pub centers: Vec<Vec<f64>>,
    pub k: usize,
    /// Average-linkage similarity of each merge, in merge order.
    pub merge_similarities: Vec<f64>,
}

impl ClusterSet {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == cluster)
            .collect()
    }
}

/// `⌈√n⌉`, at least 1.
pub fn default_k(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

/// Average-linkage agglomerative clustering down to `k` clusters.
///
/// Starts from singletons and repeatedly merges the two clusters whose
/// members have the highest mean pairwise cosine similarity. Ties go to the
/// lexicographically smallest pair of cluster slots, a slot being named by
/// its smallest member index.
pub fn agglomerative_cluster(vectors: &[Vec<f64>], k: usize) -> Result<ClusterSet> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} vectors"
        )));
    }
    let dim = vectors[0].len();
    let mut unit = Vec::with_capacity(n);
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let nv = norm(v);
        if nv == 0.0 {
            return Err(Error::ZeroVector);
        }
        unit.push(v.iter().map(|x| x / nv).collect::<Vec<f64>>());
    }

    // Full similarity matrix; row/column i tracks the cluster in slot i.
    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = dot(&unit[i], &unit[j]).clamp(-1.0, 1.0);
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }
    let mut size = vec![1usize; n];
    let mut slot_of: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - k);

    while active.len() > k {
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                let s = sim[i * n + j];
                if s > best.0 {
                    best = (s, i, j);
                }
            }
        }
        let (s, a, b) = best;
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for &m in &active {
            if m != a && m != b {
                let v = (sa * sim[a * n + m] + sb * sim[b * n + m]) / (sa + sb);
                sim[a * n + m] = v;
                sim[m * n + a] = v;
            }
        }
        size[a] += size[b];
        for s in slot_of.iter_mut().filter(|s| **s == b) {
            *s = a;
        }
        active.retain(|&m| m != b);
        merges.push(s);
    }

    let assignments: Vec<usize> = slot_of
        .iter()
        .map(|slot| active.binary_search(slot).expect("slot is active"))
        .collect();
    let mut centers = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &c) in vectors.iter().zip(&assignments) {
        counts[c] += 1;
        for (acc, x) in centers[c].iter_mut().zip(v) {
            *acc += x;
        }
    }
    for (center, &cnt) in centers.iter_mut().zip(&counts) {
        center.iter_mut().for_each(|x| *x /= cnt as f64);
    }
    Ok(ClusterSet {
        assignments,
        centers,
        k,
        merge_similarities: merges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterDecision {
    /// One entry per source train instance, in corpus order.
    pub keep_mask: Vec<bool>,
    /// Best cosine similarity to any center.
    pub similarity: Vec<f64>,
    /// Similarity of the last instance inside the requested fraction.
    pub threshold: f64,
    pub requested_fraction: f64,
    /// Share actually kept; above the request when the threshold is tied.
    pub keep_fraction: f64,
}

impl FilterDecision {
    pub fn n_kept(&self) -> usize {
        self.keep_mask.iter().filter(|&&k| k).count()
    }

    /// Audit dump: `sample_index<TAB>similarity<TAB>kept`, one row per
    /// instance after a header row.
    pub fn write_tsv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "sample_index\tsimilarity\tkept")?;
        for (i, (s, k)) in self.similarity.iter().zip(&self.keep_mask).enumerate() {
            writeln!(w, "{i}\t{s}\t{}", u8::from(*k))?;
        }
        w.flush()
    }
}

/// Number of items kept for `fraction` of `n`: `⌈fraction·n⌉` with a small
/// tolerance so that e.g. 0.7·10 counts as 7, clamped to `1..=n`.
pub fn kept_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Filters the source train split to the instances closest to `centers`.
/// Dev and test pass through unchanged; train groups left without
/// candidates are dropped.
pub fn select_source(
    source: &Corpus,
    centers: &[Vec<f64>],
    table: &EmbeddingTable,
    keep_fraction: f64,
) -> Result<(Corpus, FilterDecision)> {
    select_source_with(source, centers, table, keep_fraction, SampleText::Pair)
}

pub fn select_source_with(
    source: &Corpus,
    centers: &[Vec<f64>],
    table: &EmbeddingTable,
    keep_fraction: f64,
    text: SampleText,
) -> Result<(Corpus, FilterDecision)> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction {keep_fraction} outside (0, 1]"
        )));
    }
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no cluster centers".into()));
    }
    source.require(Split::Train)?;
    let similarity = source
        .instances(Split::Train)
        .map(|inst| {
            let v = sentence_vector_of(inst, table, text);
            centers
                .iter()
                .map(|c| cosine_similarity(&v, c))
                .try_fold(f64::NEG_INFINITY, |best, s| s.map(|s| best.max(s)))
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = similarity.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| similarity[b].total_cmp(&similarity[a]));
    let threshold = similarity[order[kept_count(keep_fraction, n) - 1]];
    let keep_mask: Vec<bool> = similarity.iter().map(|&s| s >= threshold).collect();

    let mut filtered = source.clone();
    let mut flags = keep_mask.iter();
    filtered.train = source
        .train
        .iter()
        .filter_map(|g| {
            let mut g = g.clone();
            g.candidates
                .retain(|_| *flags.next().expect("one flag per instance"));
            (!g.candidates.is_empty()).then_some(g)
        })
        .collect();

    let kept = keep_mask.iter().filter(|&&k| k).count();
    Ok((
        filtered,
        FilterDecision {
            keep_mask,
            similarity,
            threshold,
            requested_fraction: keep_fraction,
            keep_fraction: kept as f64 / n as f64,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IssConfig {
    /// Cluster count; `⌈√(dev instances)⌉` when absent.
    pub k: Option<usize>,
    pub keep_fraction: f64,
    pub sample_text: SampleText,
}

impl Default for IssConfig {
    fn default() -> Self {
        IssConfig {
            k: None,
            keep_fraction: 0.8,
            sample_text: SampleText::Pair,
        }
    }
}

/// Clusters of the target dev set and the resulting source filter.
#[derive(Debug, Clone)]
pub struct Selection {
    pub clusters: ClusterSet,
    pub filtered: Corpus,
    pub decision: FilterDecision,
}

pub fn select_for_target(
    source: &Corpus,
    target: &Corpus,
    table: &EmbeddingTable,
    iss: &IssConfig,
) -> Result<Selection> {
    let vectors: Vec<Vec<f64>> = target
        .require(Split::Dev)?
        .iter()
        .flat_map(|g| g.candidates.iter())
        .map(|inst| sentence_vector_of(inst, table, iss.sample_text))
        .collect();
    let k = iss.k.unwrap_or_else(|| default_k(vectors.len()));
    let clusters = agglomerative_cluster(&vectors, k)?;
    let (filtered, decision) = select_source_with(
        source,
        &clusters.centers,
        table,
        iss.keep_fraction,
        iss.sample_text,
    )?;
    Ok(Selection {
        clusters,
        filtered,
        decision,
    })
}

#[derive(Debug, Clone)]
pub struct IssMultRun {
    pub model: TrainedModel,
    pub selection: Selection,
}

/// ISS-MULT: MULT on the source filtered against target dev clusters.
pub fn train_iss_mult(
    source: &Corpus,
    target: &Corpus,
    table: &EmbeddingTable,
    dims: &ModelDims,
    cfg: &TrainConfig,
    iss: &IssConfig,
) -> Result<IssMultRun> {
    let selection = select_for_target(source, target, table, iss)?;
    let model = train_mult(&selection.filtered, target, table, dims, cfg)?;
    Ok(IssMultRun { model, selection })
}

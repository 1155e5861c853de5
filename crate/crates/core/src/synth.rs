//! Synthetic QA corpora and word vectors for desk-scale experiments.
//!
//! The vocabulary is cut into topics of `TOPIC_SIZE` consecutive tokens whose
//! vectors cluster together. A question and its correct answer come from one
//! topic and share one or two tokens; an incorrect answer shares none and
//! usually comes from another topic, so the task is learnable from
//! embeddings alone. Tokens are `w0 … w{vocab-1}`; noise injection adds tokens `z*`
//! and reverses the labeling rule, giving samples that are off-distribution
//! both in embedding space and in what they teach.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::corpus::{Corpus, QAInstance, QuestionGroup, Role};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const QUESTION_LEN: (usize, usize) = (3, 5);
const ANSWER_LEN: (usize, usize) = (4, 6);
const NOISE_PREFIX: &str = "z";
const NOISE_TOKENS_PER_SENTENCE: (usize, usize) = (3, 5);
/// Tokens per topic block.
pub const TOPIC_SIZE: usize = 12;
/// Chance that a negative is drawn from its question's own topic.
const SAME_TOPIC_NEGATIVE: f64 = 0.25;
const TOPIC_SPREAD: f64 = 1.0;
const TOKEN_SPREAD: f64 = 0.35;

/// Smallest vocabulary that lets every negative avoid its question's tokens.
pub const MIN_VOCAB: usize = QUESTION_LEN.1 + ANSWER_LEN.1 + 1;

pub fn vocab_token(i: usize) -> String {
    format!("w{i}")
}

pub fn noise_token(i: usize) -> String {
    format!("{NOISE_PREFIX}{i}")
}

fn sample_distinct(r: &mut Rng, pool: &[usize], n: usize) -> Vec<usize> {
    pool.choose_multiple(r, n).copied().collect()
}

fn topic_pool(topic: usize, vocab_size: usize) -> Vec<usize> {
    (topic * TOPIC_SIZE..((topic + 1) * TOPIC_SIZE).min(vocab_size)).collect()
}

fn tokens(ids: &[usize]) -> Vec<String> {
    ids.iter().map(|&i| vocab_token(i)).collect()
}

/// Deterministic synthetic corpus, split 80/10/10 by question.
///
/// `positive_rate` is the probability that a question has a (single) correct
/// candidate, so it is also the expected hit rate.
pub fn synth_corpus(
    seed: u64,
    n_questions: usize,
    candidates_per_q: usize,
    vocab_size: usize,
    positive_rate: f64,
) -> Result<Corpus> {
    if n_questions == 0 || candidates_per_q == 0 || vocab_size == 0 {
        return Err(Error::InvalidArgument(
            "synthetic corpus sizes must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&positive_rate) {
        return Err(Error::InvalidArgument(format!(
            "positive_rate {positive_rate} outside [0, 1]"
        )));
    }
    if vocab_size < MIN_VOCAB {
        return Err(Error::InvalidArgument(format!(
            "vocabulary of {vocab_size} tokens cannot keep negatives disjoint from questions; need at least {MIN_VOCAB}"
        )));
    }
    let mut r = rng::stream(seed, rng::streams::SYNTH);
    let vocab: Vec<usize> = (0..vocab_size).collect();
    // Topics big enough to hold a question plus a fresh answer.
    let topics: Vec<Vec<usize>> = (0..vocab_size.div_ceil(TOPIC_SIZE))
        .map(|t| topic_pool(t, vocab_size))
        .filter(|p| p.len() >= QUESTION_LEN.1 + ANSWER_LEN.1)
        .collect();

    let mut groups = Vec::with_capacity(n_questions);
    for qi in 0..n_questions {
        let question_id = format!("s{seed}-q{qi}");
        let topic = (!topics.is_empty()).then(|| r.random_range(0..topics.len()));
        let home = topic.map_or(&vocab, |t| &topics[t]);
        let q_len = r.random_range(QUESTION_LEN.0..=QUESTION_LEN.1);
        let question = sample_distinct(&mut r, home, q_len);
        let home_rest: Vec<usize> = home
            .iter()
            .copied()
            .filter(|t| !question.contains(t))
            .collect();
        let others: Vec<usize> = vocab
            .iter()
            .copied()
            .filter(|t| !question.contains(t))
            .collect();

        let positive_at = r
            .random_bool(positive_rate)
            .then(|| r.random_range(0..candidates_per_q));
        let candidates = (0..candidates_per_q)
            .map(|ci| {
                let a_len = r.random_range(ANSWER_LEN.0..=ANSWER_LEN.1);
                let label = positive_at == Some(ci);
                let answer = if label {
                    let shared = r.random_range(1..=2).min(q_len);
                    let mut a = sample_distinct(&mut r, &question, shared);
                    a.extend(sample_distinct(&mut r, &home_rest, a_len - shared));
                    a.shuffle(&mut r);
                    a
                } else {
                    let pool = match topic {
                        Some(t) if topics.len() > 1 && !r.random_bool(SAME_TOPIC_NEGATIVE) => {
                            let u = (t + r.random_range(1..topics.len())) % topics.len();
                            &topics[u]
                        }
                        Some(_) => &home_rest,
                        None => &others,
                    };
                    sample_distinct(&mut r, pool, a_len)
                };
                QAInstance {
                    question_id: question_id.clone(),
                    question_tokens: tokens(&question),
                    answer_tokens: tokens(&answer),
                    label,
                }
            })
            .collect();
        groups.push(QuestionGroup {
            question_id,
            candidates,
        });
    }

    let n_held = n_questions / 10;
    let n_train = n_questions - 2 * n_held;
    let mut corpus = Corpus::new(format!("synth-{seed}"));
    corpus.test = groups.split_off(n_train + n_held);
    corpus.dev = groups.split_off(n_train);
    corpus.train = groups;
    Ok(corpus)
}

/// Keeps only the first `n` train groups.
pub fn truncate_train(mut corpus: Corpus, n: usize) -> Corpus {
    corpus.train.truncate(n);
    corpus
}

/// Replaces `round(fraction · n_train)` randomly chosen train groups with
/// off-distribution groups: every sentence gets extra `z*` tokens, and the
/// labeling rule is reversed (the candidate that overlaps the question is
/// wrong, one disjoint candidate is right).
///
/// Returns the new corpus and the indices of the replaced train groups.
pub fn inject_noise(
    corpus: &Corpus,
    fraction: f64,
    noise_vocab: usize,
    seed: u64,
) -> Result<(Corpus, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "noise fraction {fraction} outside [0, 1]"
        )));
    }
    if noise_vocab == 0 {
        return Err(Error::InvalidArgument(
            "noise vocabulary must be non-empty".into(),
        ));
    }
    let mut r = rng::stream(seed, rng::streams::SYNTH + 100);
    let n = corpus.train.len();
    let n_noise = (fraction * n as f64).round() as usize;
    let mut picked: Vec<usize> = (0..n)
        .collect::<Vec<_>>()
        .choose_multiple(&mut r, n_noise)
        .copied()
        .collect();
    picked.sort_unstable();

    let mut out = corpus.clone();
    for &gi in &picked {
        let group = &mut out.train[gi];
        let noisy = |r: &mut Rng, toks: &[String]| {
            let mut t = toks.to_vec();
            let extra = r.random_range(NOISE_TOKENS_PER_SENTENCE.0..=NOISE_TOKENS_PER_SENTENCE.1);
            t.extend((0..extra).map(|_| noise_token(r.random_range(0..noise_vocab))));
            t.shuffle(r);
            t
        };
        let question_tokens = noisy(&mut r, group.question_tokens());
        let overlapping = group.candidates.iter().position(|c| c.label);
        let flipped_positive = group
            .candidates
            .iter()
            .position(|c| !c.label)
            .filter(|_| overlapping.is_some() || group.candidates.len() > 1);
        for (ci, cand) in group.candidates.iter_mut().enumerate() {
            cand.question_tokens = question_tokens.clone();
            cand.answer_tokens = noisy(&mut r, &cand.answer_tokens);
            cand.label = Some(ci) == flipped_positive;
        }
    }
    out.name = format!("{}+noise", corpus.name);
    Ok((out, picked))
}

/// Vectors `center + U(-spread, spread)^dim` for each token.
pub fn random_vectors(
    seed: u64,
    dim: usize,
    tokens: impl IntoIterator<Item = String>,
    center: &[f64],
    spread: f64,
) -> Vec<(String, Vec<f64>)> {
    let mut r = rng::stream(seed, rng::streams::SYNTH + 200);
    tokens
        .into_iter()
        .map(|t| {
            let v = (0..dim)
                .map(|d| center.get(d).copied().unwrap_or(0.0) + r.random_range(-spread..=spread))
                .collect();
            (t, v)
        })
        .collect()
}

/// Embeddings for `w*` and `z*` tokens. Regular tokens sit around `+offset`
/// on the first axis plus a per-topic center; noise tokens sit around
/// `-offset`.
pub fn synth_embeddings(
    seed: u64,
    dim: usize,
    vocab_size: usize,
    noise_vocab: usize,
    offset: f64,
) -> Result<EmbeddingTable> {
    let mut minus = vec![0.0; dim];
    if dim > 0 {
        minus[0] = -offset;
    }
    let n_topics = vocab_size.div_ceil(TOPIC_SIZE);
    let mut entries = Vec::with_capacity(vocab_size + noise_vocab);
    for (t, (_, mut center)) in random_vectors(
        seed,
        dim,
        (0..n_topics).map(|t| t.to_string()),
        &[],
        TOPIC_SPREAD,
    )
    .into_iter()
    .enumerate()
    {
        if dim > 0 {
            center[0] += offset;
        }
        let members = topic_pool(t, vocab_size).into_iter().map(vocab_token);
        entries.extend(random_vectors(
            seed.wrapping_add(2 + t as u64),
            dim,
            members,
            &center,
            TOKEN_SPREAD,
        ));
    }
    entries.extend(random_vectors(
        seed.wrapping_add(1),
        dim,
        (0..noise_vocab).map(noise_token),
        &minus,
        1.0,
    ));
    EmbeddingTable::from_entries(dim, entries)
}

/// Knobs of a related source/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub dim: usize,
    pub vocab_size: usize,
    pub noise_vocab: usize,
    pub embedding_offset: f64,
    pub candidates_per_q: usize,
    pub positive_rate: f64,
    /// Questions generated for the target (train/dev/test before truncation).
    pub target_questions: usize,
    /// Target train groups kept after generation.
    pub target_train: usize,
    /// Source train groups, as a multiple of `target_train`.
    pub source_multiple: usize,
    pub noise_fraction: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            dim: 8,
            vocab_size: 120,
            noise_vocab: 40,
            embedding_offset: 1.5,
            candidates_per_q: 5,
            positive_rate: 0.6,
            target_questions: 2000,
            target_train: 15,
            source_multiple: 4,
            noise_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferWorld {
    pub target: Corpus,
    pub source: Corpus,
    pub table: EmbeddingTable,
    /// Train groups of `source` replaced by noise.
    pub noise_groups: Vec<usize>,
}

/// Target and source drawn from the same generator (different seeds), the
/// source holding `source_multiple` times the target's train questions.
pub fn transfer_world(seed: u64, spec: &WorldSpec) -> Result<TransferWorld> {
    let target = synth_corpus(
        seed.wrapping_mul(2).wrapping_add(1_000),
        spec.target_questions,
        spec.candidates_per_q,
        spec.vocab_size,
        spec.positive_rate,
    )?;
    let mut target = truncate_train(target, spec.target_train);
    target.name = "target".into();
    target.role = Role::Target;

    // Generated with held-out splits so the train part is 80% of the total.
    let source_train = spec.target_train * spec.source_multiple;
    let source_total = (source_train * 10).div_ceil(8);
    let source = synth_corpus(
        seed.wrapping_mul(2).wrapping_add(2_001),
        source_total,
        spec.candidates_per_q,
        spec.vocab_size,
        spec.positive_rate,
    )?;
    let mut source = truncate_train(source, source_train);
    let noise_groups = if spec.noise_fraction > 0.0 {
        let (noisy, picked) = inject_noise(&source, spec.noise_fraction, spec.noise_vocab, seed)?;
        source = noisy;
        picked
    } else {
        Vec::new()
    };
    source.name = "source".into();
    source.role = Role::Source;

    let table = synth_embeddings(
        seed.wrapping_add(77),
        spec.dim,
        spec.vocab_size,
        spec.noise_vocab,
        spec.embedding_offset,
    )?;
    Ok(TransferWorld {
        target,
        source,
        table,
        noise_groups,
    })
}

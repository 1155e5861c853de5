//! Inputs shared by the benchmarks, built from the synthetic generator so
//! the suite needs no data files.

use xferqa_core::embeddings::{embed_sentence, sentence_vector};
use xferqa_core::synth::{synth_corpus, synth_embeddings};
use xferqa_core::{
    Corpus, EmbeddingTable, ModelDims, QuestionGroup, ScoredGroup, SentenceMatrix, Split,
};

pub const VOCAB: usize = 240;

pub struct Workload {
    pub corpus: Corpus,
    pub table: EmbeddingTable,
    pub dims: ModelDims,
}

impl Workload {
    pub fn new(dims: ModelDims, n_questions: usize) -> Self {
        let corpus = synth_corpus(1, n_questions, 5, VOCAB, 0.7).expect("valid synthetic sizes");
        let table =
            synth_embeddings(2, dims.embed_dim, VOCAB, 20, 1.5).expect("valid synthetic table");
        Workload {
            corpus,
            table,
            dims,
        }
    }

    /// Embedded (question, answer, label) triples of the train split.
    pub fn pairs(&self) -> Vec<(SentenceMatrix, SentenceMatrix, bool)> {
        self.corpus
            .instances(Split::Train)
            .map(|i| {
                (
                    embed_sentence(&i.question_tokens, &self.table, self.dims.max_len)
                        .expect("non-empty"),
                    embed_sentence(&i.answer_tokens, &self.table, self.dims.max_len)
                        .expect("non-empty"),
                    i.label,
                )
            })
            .collect()
    }

    /// Pair-mean vectors of the first `n` train instances.
    pub fn sample_vectors(&self, n: usize) -> Vec<Vec<f64>> {
        self.corpus
            .instances(Split::Train)
            .take(n)
            .map(|i| sentence_vector(i, &self.table))
            .collect()
    }
}

/// Deterministic pseudo-scores for metric benchmarks.
pub fn scored(groups: &[QuestionGroup]) -> Vec<ScoredGroup> {
    groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let scores = (0..g.candidates.len())
                .map(|ci| (((gi * 31 + ci * 17) % 97) as f64) / 97.0)
                .collect();
            let labels = g.candidates.iter().map(|c| c.label).collect();
            ScoredGroup::new(g.question_id.clone(), scores, labels).expect("matching lengths")
        })
        .collect()
}

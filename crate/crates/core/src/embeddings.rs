//! Pretrained word vectors and the sentence representations built on them.
//!
//! The text format is one entry per line, `token v_1 v_2 … v_dim`, with an
//! optional `count dim` header line (the word2vec text export).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::QAInstance;
use crate::error::{Error, Result};
use crate::numkernel::Dense2;
use crate::rng;

const OOV_RANGE: f64 = 0.25;
const OOV_SEED: u64 = 0;

/// Word vector lookup with one shared vector for unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    oov: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut r = rng::stream(OOV_SEED, rng::streams::OOV);
        let oov = (0..dim)
            .map(|_| r.random_range(-OOV_RANGE..=OOV_RANGE))
            .collect();
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            oov,
        })
    }

    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut table = EmbeddingTable::new(dim)?;
        for (token, v) in entries {
            table.insert(token, v)?;
        }
        Ok(table)
    }

    /// Adds or replaces a vector.
    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding of {token:?}")));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn oov_vector(&self) -> &[f64] {
        &self.oov
    }

    /// Vector of `token`, or the shared OOV vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.vectors.get(token).map_or(&self.oov, Vec::as_slice)
    }

    /// Tokens in lexicographic order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        t.sort_unstable();
        t
    }
}

pub fn load_embeddings(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), expected_dim)
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

pub fn read_embeddings<R: BufRead>(
    reader: R,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut header_count = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            reason: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 1 && is_header(&fields) {
            let dim: usize = fields[1].parse().unwrap_or(0);
            if let Some(expected) = expected_dim.filter(|&e| e != dim) {
                return Err(Error::DimMismatch {
                    expected,
                    found: dim,
                });
            }
            header_count = Some(fields[0].parse::<usize>().unwrap_or(0));
            table = Some(EmbeddingTable::new(dim)?);
            continue;
        }
        let token = fields[0];
        let vector = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Malformed {
                line: lineno,
                reason: format!("bad vector component: {e}"),
            })?;
        if table.is_none() {
            if let Some(expected) = expected_dim.filter(|&e| e != vector.len()) {
                return Err(Error::DimMismatch {
                    expected,
                    found: vector.len(),
                });
            }
            table = Some(
                EmbeddingTable::new(vector.len()).map_err(|_| Error::Malformed {
                    line: lineno,
                    reason: "entry has no vector components".into(),
                })?,
            );
        }
        let table = table.as_mut().expect("initialized above");
        if vector.len() != table.dim {
            return Err(Error::Malformed {
                line: lineno,
                reason: format!(
                    "vector has {} components, expected {}",
                    vector.len(),
                    table.dim
                ),
            });
        }
        if table.contains(token) {
            return Err(Error::Malformed {
                line: lineno,
                reason: format!("duplicate token {token:?}"),
            });
        }
        table
            .insert(token.to_owned(), vector)
            .map_err(|e| Error::Malformed {
                line: lineno,
                reason: e.to_string(),
            })?;
    }
    let table = table.ok_or(Error::Malformed {
        line: 0,
        reason: "embedding file has no entries".into(),
    })?;
    if let Some(count) = header_count.filter(|&c| c != table.len()) {
        return Err(Error::Malformed {
            line: 1,
            reason: format!("header announces {count} entries, file has {}", table.len()),
        });
    }
    Ok(table)
}

/// Writes the table with a `count dim` header, tokens sorted.
pub fn write_embeddings<W: Write>(table: &EmbeddingTable, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", table.len(), table.dim)?;
    for token in table.tokens() {
        write!(w, "{token}")?;
        for v in table.lookup(token) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn save_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(table, file).map_err(|e| Error::io(path, e))
}

/// A sentence as a zero-padded `max_len × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    data: Dense2,
    true_len: usize,
}

impl SentenceMatrix {
    pub fn max_len(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn true_len(&self) -> usize {
        self.true_len
    }

    pub fn data(&self) -> &Dense2 {
        &self.data
    }
}

pub fn embed_sentence(
    tokens: &[String],
    table: &EmbeddingTable,
    max_len: usize,
) -> Result<SentenceMatrix> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot embed an empty sentence".into(),
        ));
    }
    if max_len < 2 {
        return Err(Error::InvalidArgument(format!(
            "max_len must be at least 2, got {max_len}"
        )));
    }
    let true_len = tokens.len().min(max_len);
    let mut data = Dense2::zeros(max_len, table.dim());
    for (i, tok) in tokens.iter().take(true_len).enumerate() {
        data.row_mut(i).copy_from_slice(table.lookup(tok));
    }
    Ok(SentenceMatrix { data, true_len })
}

/// Which text of a QA pair represents it for sample selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleText {
    #[default]
    Pair,
    QuestionOnly,
    AnswerOnly,
}

/// Mean word vector of question followed by answer.
pub fn sentence_vector(instance: &QAInstance, table: &EmbeddingTable) -> Vec<f64> {
    sentence_vector_of(instance, table, SampleText::Pair)
}

pub fn sentence_vector_of(
    instance: &QAInstance,
    table: &EmbeddingTable,
    text: SampleText,
) -> Vec<f64> {
    let question = instance.question_tokens.iter();
    let answer = instance.answer_tokens.iter();
    match text {
        SampleText::Pair => mean_vector(question.chain(answer), table),
        SampleText::QuestionOnly => mean_vector(question, table),
        SampleText::AnswerOnly => mean_vector(answer, table),
    }
}

fn mean_vector<'a>(tokens: impl Iterator<Item = &'a String>, table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for tok in tokens {
        for (acc, v) in sum.iter_mut().zip(table.lookup(tok)) {
            *acc += v;
        }
        n += 1;
    }
    if n > 0 {
        let scale = 1.0 / n as f64;
        sum.iter_mut().for_each(|v| *v *= scale);
    }
    sum
}

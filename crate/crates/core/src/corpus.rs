//! QA corpora: loading, validation, grouping and statistics.
//!
//! The on-disk format is a UTF-8 TSV with one candidate answer per line:
//!
//! ```text
//! question_id<TAB>question_text<TAB>answer_text<TAB>label<TAB>split
//! ```
//!
//! `label` is `0` or `1`, `split` is one of `train`, `dev`, `test`. Lines
//! starting with `#` are comments and blank lines are skipped.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STRIPPED: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

/// Which side of a transfer experiment a corpus plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    #[default]
    Target,
}

/// One question paired with one candidate answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QAInstance {
    pub question_id: String,
    pub question_tokens: Vec<String>,
    pub answer_tokens: Vec<String>,
    pub label: bool,
}

/// All candidates of one question, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionGroup {
    pub question_id: String,
    pub candidates: Vec<QAInstance>,
}

impl QuestionGroup {
    pub fn has_positive(&self) -> bool {
        self.candidates.iter().any(|c| c.label)
    }

    pub fn question_tokens(&self) -> &[String] {
        &self.candidates[0].question_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub role: Role,
    pub train: Vec<QuestionGroup>,
    pub dev: Vec<QuestionGroup>,
    pub test: Vec<QuestionGroup>,
}

impl Corpus {
    pub fn new(name: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            role: Role::Target,
            train: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn split(&self, split: Split) -> &[QuestionGroup] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut Vec<QuestionGroup> {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }

    /// Like [`Corpus::split`] but fails when the split has no groups.
    pub fn require(&self, split: Split) -> Result<&[QuestionGroup]> {
        let groups = self.split(split);
        if groups.is_empty() {
            return Err(Error::EmptySplit(split.as_str()));
        }
        Ok(groups)
    }

    /// Instances of a split, flattened in group order.
    pub fn instances(&self, split: Split) -> impl Iterator<Item = &QAInstance> {
        self.split(split).iter().flat_map(|g| g.candidates.iter())
    }

    pub fn n_instances(&self, split: Split) -> usize {
        self.split(split).iter().map(|g| g.candidates.len()).sum()
    }
}

/// Lowercases, removes the characters `.,;:!?"'()[]` and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| !STRIPPED.contains(c))
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

pub fn load_corpus(path: impl AsRef<Path>, name: &str) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), name)
}

pub fn read_corpus<R: BufRead>(reader: R, name: &str) -> Result<Corpus> {
    let mut corpus = Corpus::new(name);
    // question_id -> (split, index of its group within the split)
    let mut index: HashMap<String, (Split, usize)> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            reason: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Malformed {
                line: lineno,
                reason: format!("expected 5 tab-separated columns, found {}", fields.len()),
            });
        }
        let question_id = fields[0].trim();
        if question_id.is_empty() {
            return Err(Error::Malformed {
                line: lineno,
                reason: "empty question_id".into(),
            });
        }
        let label = match fields[3].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Malformed {
                    line: lineno,
                    reason: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        };
        let split: Split = fields[4]
            .trim()
            .parse()
            .map_err(|reason| Error::Malformed {
                line: lineno,
                reason,
            })?;
        let question_tokens = tokenize(fields[1]);
        if question_tokens.is_empty() {
            return Err(Error::EmptyText {
                question_id: question_id.to_owned(),
                field: "question",
            });
        }
        let answer_tokens = tokenize(fields[2]);
        if answer_tokens.is_empty() {
            return Err(Error::EmptyText {
                question_id: question_id.to_owned(),
                field: "answer",
            });
        }

        let instance = QAInstance {
            question_id: question_id.to_owned(),
            question_tokens,
            answer_tokens,
            label,
        };
        match index.get(question_id) {
            Some(&(seen, _)) if seen != split => {
                return Err(Error::SplitOverlap {
                    question_id: question_id.to_owned(),
                    first: seen.as_str(),
                    second: split.as_str(),
                });
            }
            Some(&(_, pos)) => {
                let group = &mut corpus.split_mut(split)[pos];
                if group.question_tokens() != instance.question_tokens.as_slice() {
                    return Err(Error::Malformed {
                        line: lineno,
                        reason: format!("question {question_id} has differing question text"),
                    });
                }
                group.candidates.push(instance);
            }
            None => {
                let groups = corpus.split_mut(split);
                index.insert(question_id.to_owned(), (split, groups.len()));
                groups.push(QuestionGroup {
                    question_id: question_id.to_owned(),
                    candidates: vec![instance],
                });
            }
        }
    }
    Ok(corpus)
}

/// Writes the corpus in the TSV schema, using the joined tokens as text.
pub fn write_corpus<W: Write>(corpus: &Corpus, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "# {}", corpus.name)?;
    for split in Split::ALL {
        for c in corpus.instances(split) {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                c.question_id,
                c.question_tokens.join(" "),
                c.answer_tokens.join(" "),
                u8::from(c.label),
                split
            )?;
        }
    }
    w.flush()
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, file).map_err(|e| Error::io(path, e))
}

/// Fraction of question groups in `split` with at least one correct candidate.
pub fn hit_rate(corpus: &Corpus, split: Split) -> Result<f64> {
    let groups = corpus.require(split)?;
    let hits = groups.iter().filter(|g| g.has_positive()).count();
    Ok(hits as f64 / groups.len() as f64)
}

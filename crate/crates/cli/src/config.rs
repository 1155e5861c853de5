//! Experiment configuration and reproducibility manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xferqa_core::train::default_lambda_grid;
use xferqa_core::{IssConfig, ModelDims, TrainConfig};

use crate::error::{io_err, CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Base,
    Init,
    Mult,
    IssMult,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Base,
        Strategy::Init,
        Strategy::Mult,
        Strategy::IssMult,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Base => "base",
            Strategy::Init => "init",
            Strategy::Mult => "mult",
            Strategy::IssMult => "iss-mult",
        }
    }

    pub fn needs_source(self) -> bool {
        self != Strategy::Base
    }

    pub fn mixes(self) -> bool {
        matches!(self, Strategy::Mult | Strategy::IssMult)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| {
                format!("unknown strategy `{s}` (expected base, init, mult or iss-mult)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimsPreset {
    Desk,
    #[serde(rename = "paper")]
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimsSpec {
    Preset(DimsPreset),
    Explicit(ModelDims),
}

impl Default for DimsSpec {
    fn default() -> Self {
        DimsSpec::Preset(DimsPreset::Desk)
    }
}

impl DimsSpec {
    pub fn resolve(self) -> ModelDims {
        match self {
            DimsSpec::Preset(DimsPreset::Desk) => ModelDims::desk(),
            DimsSpec::Preset(DimsPreset::Full) => ModelDims::full(),
            DimsSpec::Explicit(d) => d,
        }
    }
}

/// One experiment. Relative paths are resolved against the config file's
/// directory when loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source_corpus: Option<PathBuf>,
    pub target_corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub dims: DimsSpec,
    pub strategy: Strategy,
    pub train: TrainConfig,
    /// Source pre-training settings for `init`; `train` when absent.
    pub source_train: Option<TrainConfig>,
    pub iss: IssConfig,
    pub lambda_grid: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source_corpus: None,
            target_corpus: None,
            embeddings: None,
            dims: DimsSpec::default(),
            strategy: Strategy::Base,
            train: TrainConfig::default(),
            source_train: None,
            iss: IssConfig::default(),
            lambda_grid: default_lambda_grid(),
            out: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strategy: Option<Strategy>,
    pub lambda: Option<f64>,
    pub out: Option<PathBuf>,
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing required field `{field}`"))
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
            if let Some(st) = &mut self.source_train {
                st.seed = seed;
            }
        }
        if let Some(s) = o.strategy {
            self.strategy = s;
        }
        if let Some(l) = o.lambda {
            self.train.lambda = l;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn source_train_config(&self) -> &TrainConfig {
        self.source_train.as_ref().unwrap_or(&self.train)
    }

    pub fn target_path(&self) -> CliResult<&Path> {
        self.target_corpus
            .as_deref()
            .ok_or_else(|| missing("target_corpus"))
    }

    pub fn source_path(&self) -> CliResult<&Path> {
        self.source_corpus
            .as_deref()
            .ok_or_else(|| missing("source_corpus"))
    }

    pub fn embeddings_path(&self) -> CliResult<&Path> {
        self.embeddings
            .as_deref()
            .ok_or_else(|| missing("embeddings"))
    }

    pub fn out_dir(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| missing("out"))
    }

    /// Checks field presence and ranges for the configured strategy.
    pub fn validate(&self) -> CliResult<()> {
        self.target_path()?;
        self.embeddings_path()?;
        if self.strategy.needs_source() {
            self.source_path()?;
        }
        let field = |name: &str, e: xferqa_core::Error| CliError::Config(format!("{name}: {e}"));
        self.train.validate().map_err(|e| field("train", e))?;
        if let Some(st) = &self.source_train {
            st.validate().map_err(|e| field("source_train", e))?;
        }
        self.dims
            .resolve()
            .validate()
            .map_err(|e| field("dims", e))?;
        if !(self.iss.keep_fraction > 0.0 && self.iss.keep_fraction <= 1.0) {
            return Err(CliError::Config(format!(
                "iss.keep_fraction {} outside (0, 1]",
                self.iss.keep_fraction
            )));
        }
        if self.iss.k == Some(0) {
            return Err(CliError::Config("iss.k must be at least 1".into()));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l))
        {
            return Err(CliError::Config(
                "lambda_grid must be non-empty with values in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.source_corpus,
            &mut self.target_corpus,
            &mut self.embeddings,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun an experiment: the effective config, the
/// seed and checksums of every input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub inputs: Vec<InputDigest>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    /// Input paths are recorded in absolute form so the manifest works from
    /// any directory.
    pub fn for_config(config: &ExperimentConfig) -> CliResult<Self> {
        let mut config = config.clone();
        for p in [
            &mut config.source_corpus,
            &mut config.target_corpus,
            &mut config.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            *p = fs::canonicalize(&*p).map_err(io_err(&*p))?;
        }
        if let Some(out) = &mut config.out {
            *out = std::path::absolute(&*out).map_err(io_err(&*out))?;
        }
        let mut inputs = Vec::new();
        let mut add = |role: &str, path: &Path| -> CliResult<()> {
            inputs.push(InputDigest {
                role: role.into(),
                path: path.to_path_buf(),
                sha256: sha256_file(path)?,
            });
            Ok(())
        };
        if let Some(p) = &config.source_corpus {
            add("source_corpus", p)?;
        }
        add("target_corpus", config.target_path()?)?;
        add("embeddings", config.embeddings_path()?)?;
        Ok(Manifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.train.seed,
            config,
            inputs,
        })
    }

    /// Fails when an input changed since the manifest was written.
    pub fn verify_inputs(&self) -> CliResult<()> {
        for input in &self.inputs {
            let now = sha256_file(&input.path)?;
            if now != input.sha256 {
                return Err(xferqa_core::Error::Checkpoint(format!(
                    "{} ({}) changed since the manifest was written",
                    input.role,
                    input.path.display()
                ))
                .into());
            }
        }
        Ok(())
    }
}

/// Parses a config or manifest from JSON text. A manifest yields its
/// recorded config after the input checksums are verified.
pub fn parse_config(text: &str, base: &Path) -> CliResult<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    if value.get("manifest_version").is_some() {
        let manifest: Manifest = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        if manifest.manifest_version != MANIFEST_VERSION {
            return Err(CliError::Config(format!(
                "unsupported manifest version {}",
                manifest.manifest_version
            )));
        }
        manifest.verify_inputs()?;
        let mut config = manifest.config;
        config.resolve_paths(base);
        return Ok(config);
    }
    let mut config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    config.resolve_paths(base);
    Ok(config)
}

pub fn load_config(path: &Path, overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut config = parse_config(&text, base)?;
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}

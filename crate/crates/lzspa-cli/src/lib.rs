//! File formats and config parsing for the command-line tool: token files,
//! channel/loss/source JSON, and class manifests. Kept in a library so the
//! parsers can be exercised directly (tests, fuzzing).

use std::path::Path;

use serde::{Deserialize, Serialize};

use lzspa::evaluation::SourceSpec;
use lzspa::filtering::{Channel, LossMatrix};
use lzspa::types::{Alphabet, Pmf, Sequence, Symbol};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] lzspa::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit code: 3 for I/O, 4 for model/alphabet mismatches,
    /// 1 otherwise. (Usage errors exit 2 via the argument parser.)
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                lzspa::Error::AlphabetMismatch { .. }
                | lzspa::Error::SymbolOutOfRange { .. }
                | lzspa::Error::ModelHashMismatch
                | lzspa::Error::BadMagic
                | lzspa::Error::UnsupportedVersion(_)
                | lzspa::Error::ChecksumMismatch => 4,
                _ => 1,
            },
            CliError::Parse(_) => 1,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// On-disk token representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenFormat {
    /// Every byte is a symbol; the alphabet is fixed at 256.
    Raw,
    /// ASCII decimal integers, one per line, preceded by a header line
    /// holding the alphabet size.
    Ints,
}

impl TokenFormat {
    pub fn from_flag(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(TokenFormat::Raw),
            "ints" => Ok(TokenFormat::Ints),
            other => Err(CliError::Parse(format!(
                "unknown token format {other:?} (expected raw|ints)"
            ))),
        }
    }
}

/// Parses the newline-delimited integer format: first line is the alphabet
/// size, each following non-empty line one symbol.
pub fn parse_int_tokens(data: &[u8]) -> Result<Sequence> {
    let text = std::str::from_utf8(data)
        .map_err(|e| CliError::Parse(format!("token file is not UTF-8: {e}")))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty token file".into()))?;
    let size: u32 = header
        .trim()
        .parse()
        .map_err(|e| CliError::Parse(format!("bad alphabet header {header:?}: {e}")))?;
    let alphabet = Alphabet::new(size)?;
    let mut tokens = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let sym: Symbol = line
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: bad token {line:?}: {e}", lineno + 2)))?;
        alphabet.check(sym)?;
        tokens.push(sym);
    }
    Ok(Sequence::new(alphabet, tokens)?)
}

pub fn format_int_tokens(seq: &Sequence) -> String {
    let mut out = String::with_capacity(seq.len() * 3 + 8);
    out.push_str(&seq.alphabet().size().to_string());
    out.push('\n');
    for &t in seq.tokens() {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

pub fn read_token_file(path: &Path, format: TokenFormat) -> Result<Sequence> {
    let data = std::fs::read(path).map_err(|e| io_err(path, e))?;
    match format {
        TokenFormat::Raw => Ok(Sequence::from_bytes(&data)),
        TokenFormat::Ints => parse_int_tokens(&data),
    }
}

pub fn write_token_file(path: &Path, seq: &Sequence, format: TokenFormat) -> Result<()> {
    match format {
        TokenFormat::Raw => {
            if seq.alphabet().size() != 256 {
                return Err(CliError::Parse(format!(
                    "raw format requires a byte alphabet, model uses {}",
                    seq.alphabet().size()
                )));
            }
            let bytes: Vec<u8> = seq.tokens().iter().map(|&t| t as u8).collect();
            std::fs::write(path, bytes).map_err(|e| io_err(path, e))
        }
        TokenFormat::Ints => {
            std::fs::write(path, format_int_tokens(seq)).map_err(|e| io_err(path, e))
        }
    }
}

/// JSON description of a channel matrix: `{"pi": [[...], ...]}` with rows
/// `P(Z = z | X = x)`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub pi: Vec<Vec<f64>>,
}

pub fn parse_channel_json(data: &[u8]) -> Result<Channel> {
    let spec: ChannelSpec =
        serde_json::from_slice(data).map_err(|e| CliError::Parse(format!("channel json: {e}")))?;
    Ok(Channel::new(&spec.pi)?)
}

/// JSON description of a loss matrix: `{"lambda": [[...], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct LossSpec {
    pub lambda: Vec<Vec<f64>>,
}

/// Builds a loss matrix from the `--loss` flag: `hamming`, `squared`, or a
/// path to a JSON matrix. The named forms need the channel's input count;
/// `squared` embeds a square alphabet at integer points.
pub fn resolve_loss(flag: &str, num_inputs: usize) -> Result<LossMatrix> {
    match flag {
        "hamming" => Ok(LossMatrix::hamming(num_inputs)),
        "squared" => {
            let values: Vec<f64> = (0..num_inputs).map(|i| i as f64).collect();
            Ok(LossMatrix::squared(&values, &values)?)
        }
        path => {
            let p = Path::new(path);
            let data = std::fs::read(p).map_err(|e| io_err(p, e))?;
            let spec: LossSpec = serde_json::from_slice(&data)
                .map_err(|e| CliError::Parse(format!("loss json: {e}")))?;
            Ok(LossMatrix::new(spec.lambda)?)
        }
    }
}

/// JSON description of a source law:
/// `{"kind": "iid", "pmf": [...]}` or
/// `{"kind": "markov1", "transition": [[...]], "initial": [...]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceSpecJson {
    Iid {
        pmf: Vec<f64>,
    },
    Markov1 {
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
}

pub fn parse_source_json(data: &[u8]) -> Result<SourceSpec> {
    let spec: SourceSpecJson =
        serde_json::from_slice(data).map_err(|e| CliError::Parse(format!("source json: {e}")))?;
    let source = match spec {
        SourceSpecJson::Iid { pmf } => SourceSpec::Iid {
            pmf: Pmf::new(pmf)?,
        },
        SourceSpecJson::Markov1 {
            transition,
            initial,
        } => SourceSpec::Markov1 {
            transition: transition
                .into_iter()
                .map(Pmf::new)
                .collect::<lzspa::Result<Vec<_>>>()?,
            initial: Pmf::new(initial)?,
        },
    };
    source.validate()?;
    source.alphabet()?;
    Ok(source)
}

/// A class manifest: one `label<TAB>path` line per training file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub label: String,
    pub path: String,
}

pub fn parse_manifest(data: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (lineno, line) in data.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, path) = line.split_once('\t').ok_or_else(|| {
            CliError::Parse(format!("manifest line {}: expected label<TAB>path", lineno + 1))
        })?;
        if label.is_empty() || path.is_empty() {
            return Err(CliError::Parse(format!(
                "manifest line {}: empty label or path",
                lineno + 1
            )));
        }
        entries.push(ManifestEntry {
            label: label.to_string(),
            path: path.to_string(),
        });
    }
    if entries.is_empty() {
        return Err(CliError::Parse("manifest has no entries".into()));
    }
    Ok(entries)
}

/// Bundle metadata written next to the per-class models.
#[derive(Debug, Serialize, Deserialize)]
pub struct BundleManifest {
    pub labels: Vec<String>,
    pub gamma: f64,
    pub epochs: u32,
    pub alphabet_size: u32,
}

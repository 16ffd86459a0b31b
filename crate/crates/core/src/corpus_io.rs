//! Corpus ingestion, tokenization, the built-in hashing embedder and the
//! embedding file formats.
//!
//! Binary embedding files are `"EMBV"`, a version byte `0x01`, the row count
//! and dimension as little-endian `u32`, then `rows * dim` little-endian
//! `f32` values in row-major order. The CSV fallback starts with a `dim=D`
//! line followed by one comma-separated row per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::splitmix64;

/// An ordered collection of sentences together with their tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    id: String,
    sentences: Vec<String>,
    tokens: Vec<Vec<String>>,
}

impl Corpus {
    /// Build a corpus, rejecting empty input and sentences without tokens.
    pub fn new(id: impl Into<String>, sentences: Vec<String>) -> Result<Self> {
        let id = id.into();
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus(id));
        }
        let tokens: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s)).collect();
        if let Some(index) = tokens.iter().position(Vec::is_empty) {
            return Err(Error::EmptySentence { index });
        }
        Ok(Corpus {
            id,
            sentences,
            tokens,
        })
    }

    /// Build a corpus from raw lines, dropping lines that yield no tokens.
    pub fn from_lines<I, S>(id: impl Into<String>, lines: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sentences = lines
            .into_iter()
            .map(Into::into)
            .filter(|s: &String| !tokenize(s).is_empty())
            .collect();
        Corpus::new(id, sentences)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn tokens(&self) -> &[Vec<String>] {
        &self.tokens
    }

    pub fn token_count(&self) -> usize {
        self.tokens.iter().map(Vec::len).sum()
    }

    pub fn iter_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().flatten().map(String::as_str)
    }

    /// Rows `indices` (in that order) as a new corpus.
    ///
    /// Panics if an index is out of bounds or `indices` is empty.
    pub fn subset(&self, id: impl Into<String>, indices: &[usize]) -> Corpus {
        assert!(!indices.is_empty(), "empty corpus subset");
        Corpus {
            id: id.into(),
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            tokens: indices.iter().map(|&i| self.tokens[i].clone()).collect(),
        }
    }

    /// Concatenate corpora in order.
    pub fn concat(id: impl Into<String>, parts: &[&Corpus]) -> Result<Corpus> {
        let id = id.into();
        let mut sentences = Vec::new();
        let mut tokens = Vec::new();
        for part in parts {
            sentences.extend_from_slice(&part.sentences);
            tokens.extend_from_slice(&part.tokens);
        }
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus(id));
        }
        Ok(Corpus {
            id,
            sentences,
            tokens,
        })
    }
}

/// Lowercase `text`, split on whitespace and strip leading and trailing
/// non-alphanumeric characters from each piece. Pieces that become empty are
/// dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Txt,
    Csv,
}

impl CorpusFormat {
    /// Guess the format from the file extension; anything unknown is text.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("jsonl") | Some("ndjson") => CorpusFormat::Jsonl,
            Some("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Txt,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "txt" => Ok(CorpusFormat::Txt),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidParameter(format!(
                "unknown corpus format {other:?}"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct TextRecord {
    text: String,
}

/// Read a corpus in file order. The corpus id is the file stem.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_owned());
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();

    match format {
        CorpusFormat::Txt => {
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                sentences.push(line);
            }
        }
        CorpusFormat::Jsonl => {
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: TextRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    path: path.to_owned(),
                    line: lineno + 1,
                    reason: e.to_string(),
                })?;
                sentences.push(record.text);
            }
        }
        CorpusFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            let column = reader
                .headers()
                .map_err(|e| Error::MalformedRecord {
                    path: path.to_owned(),
                    line: 1,
                    reason: e.to_string(),
                })?
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case("text"))
                .ok_or_else(|| Error::MalformedRecord {
                    path: path.to_owned(),
                    line: 1,
                    reason: "header has no \"text\" column".into(),
                })?;
            for record in reader.records() {
                let record = record.map_err(|e| Error::MalformedRecord {
                    path: path.to_owned(),
                    line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                    reason: e.to_string(),
                })?;
                let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
                let text = record.get(column).ok_or_else(|| Error::MalformedRecord {
                    path: path.to_owned(),
                    line,
                    reason: "missing text field".into(),
                })?;
                sentences.push(text.to_owned());
            }
        }
    }

    Corpus::from_lines(id, sentences)
}

/// A row-per-sentence embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCorpus {
    source_id: String,
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddedCorpus {
    /// Wrap a row-major matrix. Requires at least one row, `dim >= 2`,
    /// finite entries and no all-zero row.
    pub fn new(source_id: impl Into<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidMatrix(format!("dimension {dim} < 2")));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidMatrix(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        let rows = data.len() / dim;
        if let Some(r) = data
            .chunks_exact(dim)
            .position(|row| row.iter().all(|&v| v == 0.0))
        {
            return Err(Error::InvalidMatrix(format!("row {r} is all zero")));
        }
        Ok(EmbeddedCorpus {
            source_id: source_id.into(),
            rows,
            dim,
            data,
        })
    }

    pub fn from_rows(source_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        EmbeddedCorpus::new(source_id, dim, rows.concat())
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `indices` (in that order) as a new matrix.
    pub fn select(&self, source_id: impl Into<String>, indices: &[usize]) -> EmbeddedCorpus {
        assert!(!indices.is_empty(), "empty row selection");
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        EmbeddedCorpus {
            source_id: source_id.into(),
            rows: indices.len(),
            dim: self.dim,
            data,
        }
    }

    /// Stack matrices of equal dimension.
    pub fn concat(source_id: impl Into<String>, parts: &[&EmbeddedCorpus]) -> Result<Self> {
        let dim = parts.first().map(|p| p.dim).unwrap_or(0);
        if parts.iter().any(|p| p.dim != dim) {
            return Err(Error::InvalidMatrix("dimension mismatch in concat".into()));
        }
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        EmbeddedCorpus::new(source_id, dim, data)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Signed feature hashing of tokens into `dims` buckets, then L2
/// normalization of every row.
///
/// If the signed counts of a sentence cancel to the zero vector, that row
/// falls back to unsigned counts.
pub fn hash_embed(corpus: &Corpus, dims: usize, seed: u64) -> Result<EmbeddedCorpus> {
    if dims < 2 {
        return Err(Error::InvalidParameter(format!("dims must be >= 2, got {dims}")));
    }
    let seed_mix = splitmix64(seed);
    let mut data = Vec::with_capacity(corpus.len() * dims);
    let mut signed = vec![0.0f64; dims];
    let mut unsigned = vec![0.0f64; dims];

    for (index, tokens) in corpus.tokens().iter().enumerate() {
        if tokens.is_empty() {
            return Err(Error::EmptySentence { index });
        }
        signed.iter_mut().for_each(|v| *v = 0.0);
        unsigned.iter_mut().for_each(|v| *v = 0.0);
        for token in tokens {
            let h = splitmix64(fnv1a64(token.as_bytes()) ^ seed_mix);
            let bucket = (h % dims as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            signed[bucket] += sign;
            unsigned[bucket] += 1.0;
        }
        let row = if signed.iter().any(|&v| v != 0.0) {
            &signed
        } else {
            &unsigned
        };
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        data.extend(row.iter().map(|v| v / norm));
    }

    EmbeddedCorpus::new(corpus.id(), dims, data)
}

const MAGIC: &[u8; 4] = b"EMBV";
const VERSION: u8 = 0x01;

/// Write the binary format. Values are stored as `f32`.
pub fn save_embeddings(ec: &EmbeddedCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows =
        u32::try_from(ec.rows()).map_err(|_| Error::Format(format!("too many rows: {}", ec.rows())))?;
    let dim = u32::try_from(ec.dim()).map_err(|_| Error::Format(format!("dim too large: {}", ec.dim())))?;
    let mut buf = Vec::with_capacity(13 + ec.as_slice().len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    for &v in ec.as_slice() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::Format(format!("{v} does not fit in f32")));
        }
        buf.extend_from_slice(&f.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Write the CSV fallback. Values are written with round-trip precision.
pub fn save_embeddings_csv(ec: &EmbeddedCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "dim={}", ec.dim())?;
        for row in ec.iter_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Read either embedding format, detected from the leading bytes.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddedCorpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "embeddings".to_owned());
    if bytes.starts_with(b"dim=") {
        parse_csv_embeddings(id, &bytes)
    } else {
        parse_binary_embeddings(id, &bytes)
    }
}

fn parse_binary_embeddings(id: String, bytes: &[u8]) -> Result<EmbeddedCorpus> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes.len() < 13 {
        return Err(Error::Format("truncated header".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let payload = &bytes[13..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite value in payload".into()));
    }
    EmbeddedCorpus::new(id, dim, data)
}

fn parse_csv_embeddings(id: String, bytes: &[u8]) -> Result<EmbeddedCorpus> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad csv header {header:?}")))?;
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad number {field:?}", lineno + 2)))?;
            if !v.is_finite() {
                return Err(Error::Format(format!("line {}: non-finite value", lineno + 2)));
            }
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(Error::Format(format!(
                "line {}: expected {dim} values, found {}",
                lineno + 2,
                data.len() - before
            )));
        }
    }
    EmbeddedCorpus::new(id, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::new("t", lines.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Book a flight."), vec!["book", "a", "flight"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A a A"), vec!["a", "a", "a"]);
        assert_eq!(tokenize("  (hello),  world!! "), vec!["hello", "world"]);
        assert_eq!(tokenize("don't stop"), vec!["don't", "stop"]);
    }

    #[test]
    fn corpus_rejects_tokenless_sentence() {
        let err = Corpus::new("x", vec!["ok".into(), "?!".into()]).unwrap_err();
        assert!(matches!(err, Error::EmptySentence { index: 1 }));
        assert!(matches!(Corpus::new("x", vec![]), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn load_jsonl_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(
            &path,
            "{\"text\": \"first one\"}\n{\"text\": \"second\", \"label\": 3}\n\n{\"text\": \"third\"}\n",
        )
        .unwrap();
        let c = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.sentences(), ["first one", "second", "third"]);
        assert_eq!(c.id(), "c");
    }

    #[test]
    fn load_jsonl_reports_line_of_bad_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "{\"text\": \"ok\"}\n{\"body\": \"no text\"}\n").unwrap();
        match load_corpus(&path, CorpusFormat::Jsonl) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_txt_skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        fs::write(&path, "show me flights\n\n   \nto boston\n").unwrap();
        let c = load_corpus(&path, CorpusFormat::Txt).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn load_csv_uses_text_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "label,text\n1,\"hello, world\"\n2,bye\n").unwrap();
        let c = load_corpus(&path, CorpusFormat::Csv).unwrap();
        assert_eq!(c.sentences(), ["hello, world", "bye"]);
        fs::write(&path, "label,body\n1,x\n").unwrap();
        assert!(matches!(
            load_corpus(&path, CorpusFormat::Csv),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(dir.path().join("missing.txt"), CorpusFormat::Txt),
            Err(Error::Io { .. })
        ));
        let path = dir.path().join("blank.txt");
        fs::write(&path, "\n\n").unwrap();
        assert!(matches!(
            load_corpus(&path, CorpusFormat::Txt),
            Err(Error::EmptyCorpus(_))
        ));
    }

    #[test]
    fn load_atis_sized_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atis.txt");
        let body: String = (0..4978).map(|i| format!("flight number {i}\n")).collect();
        fs::write(&path, body).unwrap();
        assert_eq!(load_corpus(&path, CorpusFormat::Txt).unwrap().len(), 4978);
    }

    #[test]
    fn hash_embed_is_deterministic_and_seed_dependent() {
        let c = corpus(&[
            "book a flight",
            "cheapest fare to denver",
            "show ground transport",
        ]);
        let a = hash_embed(&c, 16, 1).unwrap();
        assert_eq!(a, hash_embed(&c, 16, 1).unwrap());
        let b = hash_embed(&c, 16, 2).unwrap();
        assert_ne!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn single_token_is_signed_one_hot() {
        let ec = hash_embed(&corpus(&["hello"]), 8, 3).unwrap();
        let nonzero: Vec<f64> = ec.row(0).iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].abs(), 1.0);
    }

    #[test]
    fn hash_embed_rejects_small_dims() {
        assert!(hash_embed(&corpus(&["a"]), 1, 0).is_err());
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        fs::write(&path, b"XXXX\x01\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_and_non_finite_payloads_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let ec = EmbeddedCorpus::from_rows("e", &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        save_embeddings(&ec, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Format(_))));

        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(13);
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 12]);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Format(_))));
    }

    #[test]
    fn binary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let ec = EmbeddedCorpus::from_rows("e", &[vec![1.0, -0.5]]).unwrap();
        save_embeddings(&ec, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"EMBV\x01");
        assert_eq!(&bytes[5..9], &1u32.to_le_bytes());
        assert_eq!(&bytes[9..13], &2u32.to_le_bytes());
        assert_eq!(&bytes[13..17], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[17..21], &(-0.5f32).to_le_bytes());
    }

    #[test]
    fn csv_round_trip_2x3() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let ec = EmbeddedCorpus::from_rows(
            "e",
            &[vec![0.1, -2.5, 1e-7], vec![3.0, 0.333_333_333_333_333_3, -4.25]],
        )
        .unwrap();
        save_embeddings_csv(&ec, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("dim=3\n"));
        let back = load_embeddings(&path).unwrap();
        assert_eq!(back.as_slice(), ec.as_slice());
        assert_eq!(back.rows(), 2);
    }

    #[test]
    fn matrix_validation() {
        assert!(EmbeddedCorpus::new("e", 1, vec![1.0]).is_err());
        assert!(EmbeddedCorpus::new("e", 2, vec![0.0, 0.0]).is_err());
        assert!(EmbeddedCorpus::new("e", 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(EmbeddedCorpus::new("e", 2, vec![1.0, 0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "\\PC{0,40}") {
            let once = tokenize(&s);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }

        #[test]
        fn hash_embed_rows_are_unit_norm(
            sentences in prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,8}", 1..12),
            dims in 2usize..40,
            seed in any::<u64>(),
        ) {
            let c = Corpus::new("p", sentences).unwrap();
            let ec = hash_embed(&c, dims, seed).unwrap();
            for row in ec.iter_rows() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn binary_round_trip_is_bit_exact(
            rows in 1usize..6,
            dim in 2usize..6,
            raw in prop::collection::vec(-1e6f32..1e6f32, 36),
        ) {
            let mut data: Vec<f64> = raw[..rows * dim].iter().map(|&v| f64::from(v)).collect();
            for r in 0..rows {
                data[r * dim] = 1.0 + data[r * dim].abs();
            }
            let ec = EmbeddedCorpus::new("p", dim, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("e.bin");
            save_embeddings(&ec, &path).unwrap();
            let back = load_embeddings(&path).unwrap();
            let a: Vec<u64> = ec.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}

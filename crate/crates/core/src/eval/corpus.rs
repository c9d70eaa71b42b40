//! JSON-lines corpora: one `{"id", "text", "label", "generator"?, "domain"?}`
//! object per line, label `human` or `machine`.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Human,
    Machine,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassLabel::Human => "human",
            ClassLabel::Machine => "machine",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub label: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown label {label:?} (expected human or machine)")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: record {id:?} has empty text")]
    EmptyText { line: usize, id: String },
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    label: String,
    #[serde(default)]
    generator: Option<String>,
    #[serde(default)]
    domain: Option<String>,
}

pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        let label = match raw.label.as_str() {
            "human" => ClassLabel::Human,
            "machine" => ClassLabel::Machine,
            _ => return Err(CorpusError::UnknownLabel { line: line_no, label: raw.label }),
        };
        if raw.text.is_empty() {
            return Err(CorpusError::EmptyText { line: line_no, id: raw.id });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: raw.id });
        }
        records.push(CorpusRecord {
            id: raw.id,
            text: raw.text,
            label,
            generator: raw.generator,
            domain: raw.domain,
        });
    }
    Ok(records)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let file = std::fs::File::open(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_corpus(std::io::BufReader::new(file))
}

pub fn write_corpus(records: &[CorpusRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_valid_lines() {
        let src = r#"{"id":"a","text":"hello there","label":"human"}
{"id":"b","text":"hi","label":"machine","generator":"gpt","domain":"wiki"}
"#;
        let recs = parse_corpus(src.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].label, ClassLabel::Machine);
        assert_eq!(recs[1].generator.as_deref(), Some("gpt"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_label = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n{\"id\":\"b\",\"text\":\"x\",\"label\":\"robot\"}";
        assert!(matches!(
            parse_corpus(bad_label.as_bytes()),
            Err(CorpusError::UnknownLabel { line: 2, ref label }) if label == "robot"
        ));
        let dup = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"machine\"}";
        assert!(matches!(parse_corpus(dup.as_bytes()), Err(CorpusError::DuplicateId { line: 3, .. })));
        assert!(matches!(parse_corpus("{not json".as_bytes()), Err(CorpusError::Parse { line: 1, .. })));
        let missing = "{\"id\":\"a\",\"label\":\"human\"}";
        assert!(matches!(parse_corpus(missing.as_bytes()), Err(CorpusError::Parse { line: 1, .. })));
        let empty = "{\"id\":\"a\",\"text\":\"\",\"label\":\"human\"}";
        assert!(matches!(parse_corpus(empty.as_bytes()), Err(CorpusError::EmptyText { line: 1, .. })));
    }
}

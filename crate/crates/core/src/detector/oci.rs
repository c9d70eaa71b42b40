use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Placed between an off-topic piece and the input text.
pub const OFF_TOPIC_SEPARATOR: &str = "\n";

const BUILTIN: &str = include_str!("../../assets/off_topic.txt");

/// Ordered, non-empty list of off-topic text pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffTopicSet {
    pieces: Vec<String>,
    source_label: String,
}

impl OffTopicSet {
    pub fn new(pieces: Vec<String>, source_label: impl Into<String>) -> Result<Self, DetectorError> {
        if pieces.is_empty() {
            return Err(DetectorError::InvalidOffTopicSet("at least one piece is required".into()));
        }
        if let Some(i) = pieces.iter().position(|p| p.trim().is_empty()) {
            return Err(DetectorError::InvalidOffTopicSet(format!("piece {i} is empty or whitespace")));
        }
        Ok(Self { pieces, source_label: source_label.into() })
    }

    /// The twelve tips on spotting machine-generated text shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN, "builtin").expect("bundled off-topic set is valid")
    }

    /// Parses blank-line separated blocks; lines inside a block are joined
    /// with `\n`.
    pub fn parse(content: &str, source_label: impl Into<String>) -> Result<Self, DetectorError> {
        let mut pieces = Vec::new();
        let mut block: Vec<&str> = Vec::new();
        for line in content.lines() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                if !block.is_empty() {
                    pieces.push(block.join("\n"));
                    block.clear();
                }
            } else {
                block.push(line);
            }
        }
        if !block.is_empty() {
            pieces.push(block.join("\n"));
        }
        Self::new(pieces, source_label)
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| DetectorError::InvalidOffTopicSet(format!("{}: {e}", path.display())))?;
        Self::parse(&content, path.display().to_string())
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    /// The first `k` pieces, for ablations over the set size.
    pub fn truncated(&self, k: usize) -> Result<Self, DetectorError> {
        Self::new(self.pieces.iter().take(k).cloned().collect(), format!("{}[..{k}]", self.source_label))
    }
}

/// `piece`, a newline, then `input` byte for byte.
pub fn insert_off_topic(piece: &str, input: &str) -> Result<String, DetectorError> {
    if piece.is_empty() || input.is_empty() {
        return Err(DetectorError::EmptyText);
    }
    let mut out = String::with_capacity(piece.len() + OFF_TOPIC_SEPARATOR.len() + input.len());
    out.push_str(piece);
    out.push_str(OFF_TOPIC_SEPARATOR);
    out.push_str(input);
    Ok(out)
}

//! Decoherence perturbation: in every sentence longer than 20 words, one
//! randomly chosen pair of adjacent words trades places.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Sentences with more words than this are perturbed.
pub const DECOHERENCE_MIN_WORDS: usize = 20;

const TERMINATORS: [char; 3] = ['.', '!', '?'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    Decoherence,
}

impl std::str::FromStr for Attack {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "decoherence" => Ok(Attack::Decoherence),
            other => Err(format!("unknown attack {other:?} (expected decoherence)")),
        }
    }
}

/// Byte ranges of sentences. A sentence ends after a `.`, `!` or `?` that is
/// followed by whitespace or the end of the text; any trailing text without a
/// terminator forms a final sentence.
pub fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if TERMINATORS.contains(&c) {
            let at_break = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if at_break {
                let end = i + c.len_utf8();
                if !text[start..end].trim().is_empty() {
                    spans.push((start, end));
                }
                start = end;
            }
        }
    }
    if !text[start..].trim().is_empty() {
        spans.push((start, text.len()));
    }
    spans
}

pub fn sentence_count(text: &str) -> usize {
    sentence_spans(text).len()
}

/// Byte ranges of whitespace-delimited words.
fn word_spans(sentence: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in sentence.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, sentence.len()));
    }
    spans
}

fn perturb_sentence(sentence: &str, rng: &mut impl Rng) -> String {
    let words = word_spans(sentence);
    if words.len() <= DECOHERENCE_MIN_WORDS {
        return sentence.to_string();
    }
    // The final word keeps its place when it carries the terminator, so the
    // sentence boundary survives.
    let last = &sentence[words[words.len() - 1].0..words[words.len() - 1].1];
    let swappable = if last.ends_with(TERMINATORS) { words.len() - 2 } else { words.len() - 1 };
    let i = rng.random_range(0..swappable);
    let (a, b) = (words[i], words[i + 1]);
    let mut out = String::with_capacity(sentence.len());
    out.push_str(&sentence[..a.0]);
    out.push_str(&sentence[b.0..b.1]);
    out.push_str(&sentence[a.1..b.0]);
    out.push_str(&sentence[a.0..a.1]);
    out.push_str(&sentence[b.1..]);
    out
}

/// Applies the decoherence perturbation; whitespace and sentence boundaries
/// are kept byte for byte.
pub fn decoherence(text: &str, rng: &mut impl Rng) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (start, end) in sentence_spans(text) {
        out.push_str(&text[cursor..start]);
        out.push_str(&perturb_sentence(&text[start..end], rng));
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn numbered(n: usize, end: &str) -> String {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        format!("{}{end}", words.join(" "))
    }

    #[test]
    fn segmentation() {
        assert_eq!(sentence_count("One. Two! Three? Four"), 4);
        assert_eq!(sentence_count("Pi is 3.14 roughly. Yes."), 2);
        assert_eq!(sentence_count("Wait... what?!  "), 2);
        assert_eq!(sentence_count("   "), 0);
    }

    #[test]
    fn short_sentences_untouched() {
        let text = format!("{} {}", numbered(20, "."), numbered(5, "!"));
        assert_eq!(decoherence(&text, &mut rng::stream(1, 0)), text);
    }

    #[test]
    fn long_sentence_swaps_one_pair() {
        let text = numbered(21, ".");
        for seed in 0..50 {
            let out = decoherence(&text, &mut rng::stream(seed, 0));
            let before: Vec<&str> = text.split(' ').collect();
            let after: Vec<&str> = out.split(' ').collect();
            let diffs: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
            assert_eq!(diffs.len(), 2);
            assert_eq!(diffs[1], diffs[0] + 1);
            assert_eq!(before[diffs[0]], after[diffs[1]]);
            assert!(diffs[1] < before.len() - 1, "terminated final word moved");
            assert_eq!(sentence_count(&out), 1);
        }
    }

    #[test]
    fn whitespace_preserved() {
        let text = format!("Intro.\n\n{}  tail", numbered(30, "?"));
        let out = decoherence(&text, &mut rng::stream(3, 0));
        assert_eq!(out.len(), text.len());
        let ws = |s: &str| s.char_indices().filter(|(_, c)| c.is_whitespace()).count();
        assert_eq!(ws(&out), ws(&text));
        assert_eq!(sentence_count(&out), sentence_count(&text));
    }
}

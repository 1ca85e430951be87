//! Sampling corpus: frequent words minus a blocklist, surnames, and number
//! and phone templates.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::alphabet;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{path}:{line}: invalid UTF-8")]
    MalformedUtf8 { path: String, line: usize },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid corpus config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Russian,
    English,
    Surname,
    Number,
    Phone,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub token: String,
    pub kind: TokenKind,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub word_weight: f64,
    pub surname_weight: f64,
    /// Weight of the digit-string template; `None` disables it.
    pub number_weight: Option<f64>,
    /// Weight of the phone template; `None` disables it.
    pub phone_weight: Option<f64>,
    /// Inclusive digit-string length range.
    pub digits_len: (usize, usize),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { word_weight: 1.0, surname_weight: 1.0, number_weight: Some(1.0), phone_weight: Some(1.0), digits_len: (1, 6) }
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    weights: WeightedIndex<f64>,
    digits_len: (usize, usize),
    /// Tokens dropped because they contain characters outside the alphabet.
    pub skipped: usize,
}

/// A sampled token. `text` is what gets rendered; annotations drop the
/// ignored symbols (`+`, `(`, `)`).
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextSample {
    pub lines: Vec<Vec<Token>>,
}

impl TextSample {
    pub fn from_words(lines: &[&[&str]]) -> Self {
        let lines = lines
            .iter()
            .map(|l| l.iter().map(|w| Token { text: (*w).to_string(), kind: TokenKind::Russian }).collect())
            .collect();
        Self { lines }
    }

    /// Rendered text: single spaces inside lines, `\n` between lines.
    pub fn rendered(&self) -> String {
        self.lines
            .iter()
            .map(|l| l.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Annotation text: the rendered text without ignored symbols.
    pub fn text(&self) -> String {
        self.rendered().chars().filter(|&c| c == '\n' || alphabet::is_allowed(c)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleLayout {
    pub max_lines: usize,
    /// Inclusive token count range per line.
    pub words_per_line: (usize, usize),
    pub punctuation_prob: f64,
}

impl Default for SampleLayout {
    fn default() -> Self {
        Self { max_lines: 3, words_per_line: (1, 3), punctuation_prob: 0.15 }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_lines(&bytes, &path.display().to_string())
}

/// Splits newline-delimited UTF-8 into trimmed, non-empty lines.
pub fn parse_lines(bytes: &[u8], origin: &str) -> Result<Vec<String>, CorpusError> {
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| CorpusError::MalformedUtf8 { path: origin.to_string(), line: i + 1 })?;
        let line = line.trim();
        if !line.is_empty() && !line.starts_with('#') {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

fn word_kind(token: &str) -> Option<TokenKind> {
    if !token.chars().all(|c| alphabet::is_allowed(c) && c != ' ') {
        return None;
    }
    if token.chars().any(alphabet::is_cyrillic_letter) {
        Some(TokenKind::Russian)
    } else if token.chars().any(alphabet::is_latin_letter) {
        Some(TokenKind::English)
    } else {
        None
    }
}

impl Corpus {
    /// Builds a corpus from in-memory lists. Blocklist matching is
    /// case-insensitive.
    pub fn from_lists(words: &[String], blocklist: &[String], surnames: &[String], cfg: &CorpusConfig) -> Result<Self, CorpusError> {
        let (lo, hi) = cfg.digits_len;
        if lo == 0 || lo > hi {
            return Err(CorpusError::Config(format!("digit length range {lo}..={hi}")));
        }
        let blocked: HashSet<String> = blocklist.iter().map(|w| w.to_lowercase()).collect();
        let mut entries = Vec::new();
        let mut skipped = 0;
        let mut seen = HashSet::new();
        let lists = [(words, cfg.word_weight, false), (surnames, cfg.surname_weight, true)];
        for (list, weight, surname) in lists {
            for w in list {
                if blocked.contains(&w.to_lowercase()) || !seen.insert(w.clone()) {
                    continue;
                }
                match word_kind(w) {
                    Some(kind) => entries.push(CorpusEntry {
                        token: w.clone(),
                        kind: if surname { TokenKind::Surname } else { kind },
                        weight,
                    }),
                    None => skipped += 1,
                }
            }
        }
        if let Some(wt) = cfg.number_weight {
            entries.push(CorpusEntry { token: "<number>".into(), kind: TokenKind::Number, weight: wt });
        }
        if let Some(wt) = cfg.phone_weight {
            entries.push(CorpusEntry { token: "<phone>".into(), kind: TokenKind::Phone, weight: wt });
        }
        if entries.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        if let Some(e) = entries.iter().find(|e| !(e.weight > 0.0) || !e.weight.is_finite()) {
            return Err(CorpusError::Config(format!("weight {} of {:?} must be positive", e.weight, e.token)));
        }
        let weights = WeightedIndex::new(entries.iter().map(|e| e.weight)).map_err(|e| CorpusError::Config(e.to_string()))?;
        if skipped > 0 {
            log::warn!("skipped {skipped} corpus tokens with unsupported characters");
        }
        Ok(Self { entries, weights, digits_len: cfg.digits_len, skipped })
    }

    pub fn build(words: &Path, blocklist: Option<&Path>, surnames: Option<&Path>, cfg: &CorpusConfig) -> Result<Self, CorpusError> {
        let words = read_lines(words)?;
        let blocklist = blocklist.map(read_lines).transpose()?.unwrap_or_default();
        let surnames = surnames.map(read_lines).transpose()?.unwrap_or_default();
        Self::from_lists(&words, &blocklist, &surnames, cfg)
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    fn draw_token<R: Rng + ?Sized>(&self, rng: &mut R) -> Token {
        let e = &self.entries[self.weights.sample(rng)];
        let text = match e.kind {
            TokenKind::Number => {
                let n = rng.gen_range(self.digits_len.0..=self.digits_len.1);
                (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
            }
            TokenKind::Phone => {
                let mut d = || char::from(b'0' + rng.gen_range(0..10u8));
                format!(
                    "+7 ({}{}{}) {}{}{}-{}{}-{}{}",
                    d(), d(), d(), d(), d(), d(), d(), d(), d(), d()
                )
            }
            _ => e.token.clone(),
        };
        Token { text, kind: e.kind }
    }

    pub fn sample_text<R: Rng + ?Sized>(&self, rng: &mut R, layout: &SampleLayout) -> TextSample {
        let n_lines = rng.gen_range(1..=layout.max_lines.max(1));
        let (wlo, whi) = layout.words_per_line;
        let lines = (0..n_lines)
            .map(|_| {
                let n = rng.gen_range(wlo.max(1)..=whi.max(wlo.max(1)));
                (0..n)
                    .map(|_| {
                        let mut t = self.draw_token(rng);
                        if layout.punctuation_prob > 0.0 && rng.gen_bool(layout.punctuation_prob.min(1.0)) {
                            let marks: Vec<char> = alphabet::PUNCTUATION.chars().collect();
                            t.text.push(marks[rng.gen_range(0..marks.len())]);
                        }
                        t
                    })
                    .collect()
            })
            .collect();
        TextSample { lines }
    }
}

//! Statistical phrase table: Moses-style text loading and the phrase matching
//! that yields per-span translation options.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocab::{BOS, EOS};

#[derive(Debug, Clone, PartialEq)]
pub struct PhrasePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    /// ln p(f̃|ẽ)
    pub log_p_src_given_tgt: f64,
    /// ln p(ẽ|f̃)
    pub log_p_tgt_given_src: f64,
}

#[derive(Debug, Default)]
pub struct PhraseTable {
    entries: HashMap<Vec<String>, Vec<PhrasePair>>,
    /// Entries whose target side carried a reserved token, dropped at load.
    pub dropped_reserved: usize,
}

impl PhraseTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self, source_phrase: &[String]) -> Option<&[PhrasePair]> {
        self.entries.get(source_phrase).map(Vec::as_slice)
    }

    pub fn insert(&mut self, pair: PhrasePair) {
        let list = self.entries.entry(pair.source.clone()).or_default();
        list.push(pair);
        // ranked by p(e|f) descending, ties by target phrase lexicographic
        list.sort_by(|a, b| {
            b.log_p_tgt_given_src
                .total_cmp(&a.log_p_tgt_given_src)
                .then_with(|| a.target.cmp(&b.target))
        });
    }

    /// True if `pair` is present verbatim (used by derivation audits).
    pub fn contains(&self, pair: &PhrasePair) -> bool {
        self.entries
            .get(&pair.source)
            .is_some_and(|list| list.iter().any(|p| p == pair))
    }

    pub fn max_source_len(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }
}

/// Translation options per source span: key is (start, length), 0-based.
#[derive(Debug, Default, Clone)]
pub struct TranslationOptions {
    spans: HashMap<(usize, usize), Vec<PhrasePair>>,
}

impl TranslationOptions {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, start: usize, len: usize) -> &[PhrasePair] {
        self.spans
            .get(&(start, len))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn spans(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<PhrasePair>)> {
        self.spans.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatchParams {
    pub min_src_len: usize,
    pub max_src_len: usize,
    pub k_max: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            min_src_len: 1,
            max_src_len: 7,
            k_max: 100,
        }
    }
}

/// Exact positional phrase matching: every sentence span whose tokens equal a
/// table source phrase contributes its ranked candidates, truncated to k_max.
pub fn match_source(
    sentence: &[String],
    table: &PhraseTable,
    params: &MatchParams,
) -> TranslationOptions {
    assert!(!sentence.is_empty());
    assert!(params.max_src_len >= 1 && params.k_max >= 1);
    let mut out = TranslationOptions::default();
    let limit = params.max_src_len.min(table.max_source_len());
    for start in 0..sentence.len() {
        for len in params.min_src_len.max(1)..=limit.min(sentence.len() - start) {
            let span = &sentence[start..start + len];
            if let Some(cands) = table.candidates(span) {
                let kept: Vec<PhrasePair> =
                    cands.iter().take(params.k_max).cloned().collect();
                out.spans.insert((start, len), kept);
            }
        }
    }
    out
}

/// Loads the text format `src ||| tgt ||| p(f̃|ẽ) p(ẽ|f̃)`, one entry per line.
pub fn load_table(path: impl AsRef<Path>) -> Result<PhraseTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = PhraseTable::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, lineno, "expected 3 `|||`-separated fields"));
        }
        let source: Vec<String> = fields[0].split_whitespace().map(String::from).collect();
        let target: Vec<String> = fields[1].split_whitespace().map(String::from).collect();
        if source.is_empty() || target.is_empty() {
            return Err(Error::parse(path, lineno, "empty source or target phrase"));
        }
        let probs: Vec<&str> = fields[2].split_whitespace().collect();
        if probs.len() != 2 {
            return Err(Error::parse(path, lineno, "expected 2 probabilities"));
        }
        let p_src_given_tgt: f64 = probs[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, "bad probability"))?;
        let p_tgt_given_src: f64 = probs[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, "bad probability"))?;
        for (name, p) in [("p(f|e)", p_src_given_tgt), ("p(e|f)", p_tgt_given_src)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("{name} must be in (0, 1], got {p}"),
                ));
            }
        }
        if target.iter().any(|t| t == BOS || t == EOS) {
            table.dropped_reserved += 1;
            continue;
        }
        table.insert(PhrasePair {
            source,
            target,
            log_p_src_given_tgt: p_src_given_tgt.ln(),
            log_p_tgt_given_src: p_tgt_given_src.ln(),
        });
    }
    Ok(table)
}

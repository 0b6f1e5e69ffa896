//! Backoff n-gram language model with ARPA loading. Probabilities are stored
//! as log10 verbatim and converted to natural log at query time so every
//! log-linear feature shares base e.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocab::UNK;

pub const LN_10: f64 = std::f64::consts::LN_10;

/// Floor applied when a word has no unigram entry at all, in log10.
const OOV_FLOOR_LOG10: f64 = -99.0;

#[derive(Debug, Clone, Copy)]
struct Entry {
    log10_prob: f64,
    log10_backoff: f64,
}

#[derive(Debug)]
pub struct ArpaModel {
    order: usize,
    words: Vec<String>,
    ids: HashMap<String, u32>,
    // tables[m-1]: m-gram -> entry; missing backoff weight is 0
    tables: Vec<HashMap<Vec<u32>, Entry>>,
    unk_id: Option<u32>,
}

/// Last (n-1) target tokens of a hypothesis, as LM-internal word ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LmHistory(Vec<u32>);

impl LmHistory {
    pub fn empty() -> Self {
        LmHistory(Vec::new())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Appends a word, keeping only the last `order - 1` tokens.
    pub fn extended(&self, word: u32, order: usize) -> Self {
        let mut v = self.0.clone();
        v.push(word);
        let keep = order.saturating_sub(1);
        if v.len() > keep {
            v.drain(..v.len() - keep);
        }
        LmHistory(v)
    }
}

impl ArpaModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn table_size(&self, order: usize) -> usize {
        self.tables[order - 1].len()
    }

    /// LM-internal id of a word; unknown words map to the UNK entry's id when
    /// present, otherwise to a sentinel past the vocabulary.
    pub fn id_of(&self, word: &str) -> u32 {
        match self.ids.get(word) {
            Some(&id) => id,
            None => self.unk_id.unwrap_or(self.words.len() as u32),
        }
    }

    pub fn vocab_words(&self) -> &[String] {
        &self.words
    }

    fn lookup(&self, ngram: &[u32]) -> Option<Entry> {
        self.tables
            .get(ngram.len() - 1)
            .and_then(|t| t.get(ngram))
            .copied()
    }

    fn score_log10(&self, history: &[u32], word: u32) -> f64 {
        let ctx_len = history.len().min(self.order - 1);
        let mut ctx = &history[history.len() - ctx_len..];
        let mut penalty = 0.0;
        loop {
            let mut ngram = ctx.to_vec();
            ngram.push(word);
            if let Some(e) = self.lookup(&ngram) {
                return penalty + e.log10_prob;
            }
            if ctx.is_empty() {
                // unigram miss: UNK entry, or the floor if the model has none
                if let Some(unk) = self.unk_id {
                    if let Some(e) = self.lookup(&[unk]) {
                        return penalty + e.log10_prob;
                    }
                }
                return penalty + OOV_FLOOR_LOG10;
            }
            if let Some(e) = self.lookup(ctx) {
                penalty += e.log10_backoff;
            }
            ctx = &ctx[1..];
        }
    }

    /// Backoff score of `word` given `history`, in natural log.
    pub fn score_word(&self, history: &LmHistory, word: u32) -> f64 {
        LN_10 * self.score_log10(history.as_slice(), word)
    }

    /// Sum of `score_word` applied left to right with a sliding history.
    pub fn score_phrase(&self, history: &LmHistory, phrase: &[u32]) -> f64 {
        assert!(!phrase.is_empty());
        let mut h = history.clone();
        let mut total = 0.0;
        for &word in phrase {
            total += self.score_word(&h, word);
            h = h.extended(word, self.order);
        }
        total
    }

    pub fn score_word_str(&self, history: &LmHistory, word: &str) -> f64 {
        self.score_word(history, self.id_of(word))
    }
}

enum Section {
    Preamble,
    Data,
    Ngrams(usize),
    Done,
}

/// Loads an ARPA text file. Section counts from the `\data\` header must
/// match the loaded table sizes.
pub fn load_arpa(path: impl AsRef<Path>) -> Result<ArpaModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_arpa(BufReader::new(file), path)
}

/// Parses ARPA text from memory; diagnostics report `<arpa>` as the path.
pub fn parse_arpa_str(text: &str) -> Result<ArpaModel> {
    parse_arpa(BufReader::new(text.as_bytes()), Path::new("<arpa>"))
}

fn parse_arpa<R: BufRead>(reader: R, path: &Path) -> Result<ArpaModel> {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut words: Vec<String> = Vec::new();
    let mut intern = |w: &str| -> u32 {
        if let Some(&id) = ids.get(w) {
            return id;
        }
        let id = words.len() as u32;
        words.push(w.to_string());
        ids.insert(w.to_string(), id);
        id
    };
    let mut declared: Vec<usize> = Vec::new();
    let mut tables: Vec<HashMap<Vec<u32>, Entry>> = Vec::new();
    let mut section = Section::Preamble;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "\\end\\" {
            section = Section::Done;
            continue;
        }
        if line == "\\data\\" {
            section = Section::Data;
            continue;
        }
        if let Some(rest) = line.strip_prefix('\\') {
            if let Some(order_str) = rest.strip_suffix("-grams:") {
                let order: usize = order_str
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad section header"))?;
                if order == 0 || order > declared.len() {
                    return Err(Error::parse(path, lineno, "section order out of range"));
                }
                section = Section::Ngrams(order);
                continue;
            }
            return Err(Error::parse(path, lineno, "unknown directive"));
        }
        match section {
            Section::Preamble => continue,
            Section::Done => {
                return Err(Error::parse(path, lineno, "content after \\end\\"));
            }
            Section::Data => {
                let rest = line
                    .strip_prefix("ngram ")
                    .ok_or_else(|| Error::parse(path, lineno, "expected `ngram N=count`"))?;
                let (order_s, count_s) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(path, lineno, "expected `ngram N=count`"))?;
                let order: usize = order_s
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad ngram order"))?;
                let count: usize = count_s
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad ngram count"))?;
                if order != declared.len() + 1 {
                    return Err(Error::parse(path, lineno, "ngram counts out of order"));
                }
                declared.push(count);
                tables.push(HashMap::with_capacity(count));
            }
            Section::Ngrams(order) => {
                let mut fields = line.split_whitespace();
                let prob: f64 = fields
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "missing log10 probability"))?;
                let toks: Vec<&str> = fields.collect();
                let (gram_toks, backoff) = if toks.len() == order {
                    (&toks[..], 0.0)
                } else if toks.len() == order + 1 {
                    let bo: f64 = toks[order]
                        .parse()
                        .map_err(|_| Error::parse(path, lineno, "bad backoff weight"))?;
                    (&toks[..order], bo)
                } else {
                    return Err(Error::parse(path, lineno, "wrong field count for order"));
                };
                if prob > 0.0 || !prob.is_finite() {
                    return Err(Error::parse(path, lineno, "log10 probability must be <= 0"));
                }
                let gram: Vec<u32> = gram_toks.iter().map(|t| intern(t)).collect();
                tables[order - 1].insert(
                    gram,
                    Entry {
                        log10_prob: prob,
                        log10_backoff: backoff,
                    },
                );
            }
        }
    }
    if !matches!(section, Section::Done) {
        return Err(Error::Arpa(format!(
            "{}: missing \\end\\ marker",
            path.display()
        )));
    }
    if declared.is_empty() {
        return Err(Error::Arpa(format!("{}: no \\data\\ section", path.display())));
    }
    for (i, (&decl, table)) in declared.iter().zip(&tables).enumerate() {
        if decl != table.len() {
            return Err(Error::Arpa(format!(
                "{}: declared {} {}-grams, loaded {}",
                path.display(),
                decl,
                i + 1,
                table.len()
            )));
        }
    }
    let unk_id = ids.get(UNK).copied();
    Ok(ArpaModel {
        order: declared.len(),
        words,
        ids,
        tables,
        unk_id,
    })
}

//! Text interchange: the n-best list format and the weight config format.
//!
//! n-best lines: `sentence_id ||| target tokens ||| name=value ... ||| total_score`
//! weight config: one `feature_name value` per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::loglinear::{FeatureVector, FeatureWeights};
use crate::search::NBestEntry;

pub fn format_entry(sentence_id: usize, entry: &NBestEntry) -> String {
    let f = &entry.features;
    format!(
        "{} ||| {} ||| nmt={} lm={} wp_word={} wp_phrase={} pp={} swc={} phr={} iphr={} ||| {}",
        sentence_id,
        entry.surface().join(" "),
        f.nmt,
        f.lm,
        f.wp_word,
        f.wp_phrase,
        f.pp,
        f.swc,
        f.phr,
        f.iphr,
        entry.score
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBestLine {
    pub sentence_id: usize,
    pub tokens: Vec<String>,
    pub features: FeatureVector,
    pub total_score: f64,
}

pub fn parse_line(line: &str, path: &Path, lineno: usize) -> Result<NBestLine> {
    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::parse(path, lineno, "expected 4 `|||`-separated fields"));
    }
    let sentence_id: usize = fields[0]
        .parse()
        .map_err(|_| Error::parse(path, lineno, "bad sentence id"))?;
    let tokens: Vec<String> = fields[1].split_whitespace().map(String::from).collect();
    let mut features = FeatureVector::default();
    for kv in fields[2].split_whitespace() {
        let (key, val) = kv
            .split_once('=')
            .ok_or_else(|| Error::parse(path, lineno, format!("bad feature `{kv}`")))?;
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad value for `{key}`")))?;
        match key {
            "nmt" => features.nmt = val,
            "lm" => features.lm = val,
            "wp_word" => features.wp_word = val,
            "wp_phrase" => features.wp_phrase = val,
            "pp" => features.pp = val,
            "swc" => features.swc = val,
            "phr" => features.phr = val,
            "iphr" => features.iphr = val,
            other => {
                return Err(Error::parse(path, lineno, format!("unknown feature `{other}`")))
            }
        }
    }
    let total_score: f64 = fields[3]
        .parse()
        .map_err(|_| Error::parse(path, lineno, "bad total score"))?;
    Ok(NBestLine {
        sentence_id,
        tokens,
        features,
        total_score,
    })
}

pub fn load_nbest(path: impl AsRef<Path>) -> Result<Vec<NBestLine>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, path, lineno + 1)?);
    }
    Ok(out)
}

pub fn save_weights_config(w: &FeatureWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = format!(
        "nmt {}\nlm {}\npp {}\nswc {}\nphr {}\niphr {}\n",
        w.nmt, w.lm, w.pp, w.swc, w.phr, w.iphr
    );
    match w.wp_split {
        Some((word, phrase)) => {
            text.push_str(&format!("wp_word {word}\nwp_phrase {phrase}\n"));
        }
        None => text.push_str(&format!("wp {}\n", w.wp)),
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_weights_config(path: impl AsRef<Path>) -> Result<FeatureWeights> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut w = FeatureWeights::zeros();
    let mut wp_word: Option<f64> = None;
    let mut wp_phrase: Option<f64> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::parse(path, lineno, "expected `feature_name value`"))?;
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad value for `{key}`")))?;
        if !val.is_finite() {
            return Err(Error::parse(path, lineno, "weight must be finite"));
        }
        match key {
            "nmt" => w.nmt = val,
            "lm" => w.lm = val,
            "wp" => w.wp = val,
            "pp" => w.pp = val,
            "swc" => w.swc = val,
            "phr" => w.phr = val,
            "iphr" => w.iphr = val,
            "wp_word" => wp_word = Some(val),
            "wp_phrase" => wp_phrase = Some(val),
            other => {
                return Err(Error::parse(path, lineno, format!("unknown feature `{other}`")))
            }
        }
    }
    if wp_word.is_some() || wp_phrase.is_some() {
        w.wp_split = Some((wp_word.unwrap_or(w.wp), wp_phrase.unwrap_or(w.wp)));
    }
    let v = w.to_vec();
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::Config("all feature weights are zero".into()));
    }
    Ok(w)
}

pub fn write_nbest_file(
    path: impl AsRef<Path>,
    entries: &[(usize, Vec<NBestEntry>)],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for (sentence_id, list) in entries {
        for entry in list {
            writeln!(out, "{}", format_entry(*sentence_id, entry))
                .map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

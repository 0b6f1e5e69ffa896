//! Deterministic toy-data generation: a small exactly-normalized backoff
//! language model, and a full on-disk fixture set (vocabularies, model
//! weights, language model, phrase table, parallel text, feature weights)
//! suitable for exercising every CLI subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loglinear::FeatureWeights;
use crate::ngram_lm::{parse_arpa_str, ArpaModel};
use crate::vocab::Vocabulary;
use crate::weights::ModelWeights;

/// Builds the ARPA text of a bigram backoff model over `tokens`.
///
/// Every conditional distribution sums to one by construction: each history h
/// gets explicit bigrams with total mass m < 1, and its backoff weight is
/// (1 - m) / (1 - sum of unigram mass of the explicit successors).
pub fn toy_lm_text(tokens: &[&str], seed: u64) -> String {
    assert!(!tokens.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // predicted events: every regular token, plus sentence end and unknown
    let mut events: Vec<&str> = tokens.to_vec();
    events.push("</s>");
    events.push("<unk>");

    let raw: Vec<f64> = events.iter().map(|_| 0.2 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let p_uni: Vec<f64> = raw.iter().map(|w| w / total).collect();

    // histories: sentence start plus every regular token
    let mut histories: Vec<&str> = vec!["<s>"];
    histories.extend_from_slice(tokens);

    let mut bigrams: Vec<(String, f64)> = Vec::new();
    let mut backoff: Vec<f64> = Vec::new();
    let max_succ = events.len().saturating_sub(1).min(3);
    let idx: Vec<usize> = (0..events.len()).collect();
    for h in &histories {
        let k = rng.gen_range(1..=max_succ);
        let chosen: Vec<usize> = idx.choose_multiple(&mut rng, k).copied().collect();
        let mass = 0.3 + 0.4 * rng.gen::<f64>();
        let weights: Vec<f64> = chosen.iter().map(|_| 0.2 + rng.gen::<f64>()).collect();
        let wsum: f64 = weights.iter().sum();
        let mut seen_uni = 0.0;
        for (&e, w) in chosen.iter().zip(&weights) {
            bigrams.push((format!("{h} {}", events[e]), mass * w / wsum));
            seen_uni += p_uni[e];
        }
        backoff.push((1.0 - mass) / (1.0 - seen_uni));
    }

    let mut out = String::new();
    out.push_str("\\data\\\n");
    let _ = writeln!(out, "ngram 1={}", events.len() + 1);
    let _ = writeln!(out, "ngram 2={}", bigrams.len());
    out.push_str("\n\\1-grams:\n");
    let _ = writeln!(out, "-99\t<s>\t{:.10}", backoff[0].log10());
    for (i, e) in events.iter().enumerate() {
        // only regular tokens act as bigram histories, so only they carry
        // backoff weights
        if let Some(pos) = tokens.iter().position(|t| t == e) {
            let _ = writeln!(
                out,
                "{:.10}\t{e}\t{:.10}",
                p_uni[i].log10(),
                backoff[pos + 1].log10()
            );
        } else {
            let _ = writeln!(out, "{:.10}\t{e}", p_uni[i].log10());
        }
    }
    out.push_str("\n\\2-grams:\n");
    for (gram, p) in &bigrams {
        let _ = writeln!(out, "{:.10}\t{gram}", p.log10());
    }
    out.push_str("\n\\end\\\n");
    out
}

/// Parsed form of [`toy_lm_text`].
pub fn toy_lm(tokens: &[&str], seed: u64) -> ArpaModel {
    parse_arpa_str(&toy_lm_text(tokens, seed)).expect("generated model must parse")
}

#[derive(Debug, Clone)]
pub struct FixtureConfig {
    pub seed: u64,
    pub sentences: usize,
    pub src_words: usize,
    pub tgt_words: usize,
    pub phrase_entries: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            seed: 1,
            sentences: 50,
            src_words: 18,
            tgt_words: 22,
            phrase_entries: 30,
            embed: 4,
            hidden: 6,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a complete fixture directory and returns the paths created:
/// `src.vocab`, `tgt.vocab`, `model.hywt`, `lm.arpa`, `phrase_table.txt`,
/// `source.txt`, `ref0.txt`, `ref1.txt`, `weights.cfg`.
pub fn generate(dir: impl AsRef<Path>, cfg: &FixtureConfig) -> Result<Vec<PathBuf>> {
    if cfg.sentences == 0 || cfg.src_words < 4 || cfg.tgt_words < 4 {
        return Err(Error::Config(
            "fixture needs at least one sentence and four words per side".into(),
        ));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut written = Vec::new();

    let src_tokens: Vec<String> = (0..cfg.src_words).map(|i| format!("f{i:02}")).collect();
    let tgt_tokens: Vec<String> = (0..cfg.tgt_words).map(|i| format!("e{i:02}")).collect();
    let src_vocab = Vocabulary::new(&src_tokens)?;
    let tgt_vocab = Vocabulary::new(&tgt_tokens)?;
    let src_vocab_path = dir.join("src.vocab");
    let tgt_vocab_path = dir.join("tgt.vocab");
    src_vocab.save(&src_vocab_path)?;
    tgt_vocab.save(&tgt_vocab_path)?;
    written.push(src_vocab_path);
    written.push(tgt_vocab_path);

    let model = ModelWeights::seeded(
        cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(17),
        cfg.embed,
        cfg.hidden,
        src_vocab.len(),
        tgt_vocab.len(),
    );
    let model_path = dir.join("model.hywt");
    model.save(&model_path)?;
    written.push(model_path);

    let tgt_refs: Vec<&str> = tgt_tokens.iter().map(String::as_str).collect();
    let lm_path = dir.join("lm.arpa");
    write_text(&lm_path, &toy_lm_text(&tgt_refs, cfg.seed.wrapping_add(101)))?;
    written.push(lm_path);

    // each source word i loosely corresponds to target word i; the phrase
    // table mixes literal correspondences with multi-word entries
    let lex = |i: usize| tgt_tokens[i % cfg.tgt_words].clone();
    let mut table = String::new();
    for _ in 0..cfg.phrase_entries {
        let src_len = rng.gen_range(1..=2usize.min(cfg.src_words));
        let start = rng.gen_range(0..cfg.src_words - (src_len - 1));
        let src: Vec<String> = (start..start + src_len).map(|i| src_tokens[i].clone()).collect();
        let tgt_len = rng.gen_range(1..=3usize);
        let mut tgt: Vec<String> = vec![lex(start)];
        while tgt.len() < tgt_len {
            tgt.push(tgt_tokens[rng.gen_range(0..cfg.tgt_words)].clone());
        }
        let p1 = 0.05 + 0.95 * rng.gen::<f64>();
        let p2 = 0.05 + 0.95 * rng.gen::<f64>();
        let _ = writeln!(
            table,
            "{} ||| {} ||| {p1:.6} {p2:.6}",
            src.join(" "),
            tgt.join(" ")
        );
    }
    let table_path = dir.join("phrase_table.txt");
    write_text(&table_path, &table)?;
    written.push(table_path);

    let mut source = String::new();
    let mut ref0 = String::new();
    let mut ref1 = String::new();
    for _ in 0..cfg.sentences {
        let len = rng.gen_range(3..=8usize);
        let sent: Vec<usize> = (0..len).map(|_| rng.gen_range(0..cfg.src_words)).collect();
        let words: Vec<&str> = sent.iter().map(|&i| src_tokens[i].as_str()).collect();
        let _ = writeln!(source, "{}", words.join(" "));
        for (text, jitter) in [(&mut ref0, 0.15), (&mut ref1, 0.35)] {
            let mut out: Vec<String> = Vec::new();
            for &i in &sent {
                if rng.gen::<f64>() < jitter {
                    out.push(tgt_tokens[rng.gen_range(0..cfg.tgt_words)].clone());
                } else {
                    out.push(lex(i));
                }
            }
            if rng.gen::<f64>() < jitter {
                out.push(tgt_tokens[rng.gen_range(0..cfg.tgt_words)].clone());
            }
            let _ = writeln!(text, "{}", out.join(" "));
        }
    }
    let source_path = dir.join("source.txt");
    let ref0_path = dir.join("ref0.txt");
    let ref1_path = dir.join("ref1.txt");
    write_text(&source_path, &source)?;
    write_text(&ref0_path, &ref0)?;
    write_text(&ref1_path, &ref1)?;
    written.push(source_path);
    written.push(ref0_path);
    written.push(ref1_path);

    let weights_path = dir.join("weights.cfg");
    // a positive word penalty weight offsets the per-word model cost, so the
    // untuned system prefers non-empty output
    let weights = FeatureWeights {
        wp: 3.5,
        ..FeatureWeights::default()
    };
    crate::nbest::save_weights_config(&weights, &weights_path)?;
    written.push(weights_path);

    Ok(written)
}

//! Browser bindings around a small built-in translation world: a seeded
//! model, a toy language model, and a hand-written phrase table with a few
//! idiomatic multi-word entries. Compile with `wasm-pack build --target web`.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

use hybridmt::align::{export_svg, phrase_boxes};
use hybridmt::eval::{accumulate, corpus_bleu, BleuStats};
use hybridmt::fixture::toy_lm;
use hybridmt::loglinear::FeatureWeights;
use hybridmt::ngram_lm::ArpaModel;
use hybridmt::phrase_table::{match_source, MatchParams, PhrasePair, PhraseTable};
use hybridmt::scorer::NmtScorer;
use hybridmt::search::{decode, NBestEntry, SearchParams};
use hybridmt::vocab::Vocabulary;
use hybridmt::weights::ModelWeights;

const SRC_WORDS: &[&str] = &[
    "wir", "muessen", "den", "stier", "bei", "hoernern", "packen", "das", "problem", "heute",
    "loesen", "er", "hat", "ein", "neues", "haus", "gekauft", "sie", "liest", "buch", "morgen",
    "nicht",
];

const TGT_WORDS: &[&str] = &[
    "we", "must", "take", "the", "bull", "by", "horns", "solve", "problem", "today", "he", "has",
    "bought", "a", "new", "house", "she", "reads", "book", "tomorrow", "not", "grasp", "nettle",
    "it",
];

const PHRASES: &[(&str, &str, f64, f64)] = &[
    ("den stier bei hoernern packen", "take the bull by the horns", 0.81, 0.74),
    ("den stier bei hoernern packen", "grasp the nettle", 0.12, 0.36),
    ("das problem", "the problem", 0.88, 0.92),
    ("loesen", "solve", 0.85, 0.80),
    ("wir muessen", "we must", 0.90, 0.90),
    ("ein neues haus", "a new house", 0.86, 0.83),
    ("gekauft", "bought", 0.79, 0.77),
    ("sie liest", "she reads", 0.84, 0.88),
    ("heute", "today", 0.91, 0.89),
    ("morgen", "tomorrow", 0.90, 0.90),
    ("nicht", "not", 0.93, 0.94),
    ("buch", "a book", 0.55, 0.61),
];

struct World {
    scorer: NmtScorer,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    lm: ArpaModel,
    table: PhraseTable,
}

fn world() -> &'static World {
    static WORLD: OnceLock<World> = OnceLock::new();
    WORLD.get_or_init(|| {
        let src_vocab = Vocabulary::new(SRC_WORDS).expect("static vocab");
        let tgt_vocab = Vocabulary::new(TGT_WORDS).expect("static vocab");
        let model = ModelWeights::seeded(2024, 6, 10, src_vocab.len(), tgt_vocab.len());
        let lm = toy_lm(TGT_WORDS, 11);
        let mut table = PhraseTable::empty();
        for (src, tgt, p1, p2) in PHRASES {
            table.insert(PhrasePair {
                source: src.split(' ').map(str::to_string).collect(),
                target: tgt.split(' ').map(str::to_string).collect(),
                log_p_src_given_tgt: p1.ln(),
                log_p_tgt_given_src: p2.ln(),
            });
        }
        World {
            scorer: NmtScorer::new(Arc::new(model)),
            src_vocab,
            tgt_vocab,
            lm,
            table,
        }
    })
}

#[derive(Deserialize)]
#[serde(default)]
struct DemoOptions {
    beam_word: usize,
    beam_phrase: usize,
    tau_focus: f64,
    /// Soft-coverage threshold; 0 or negative disables the check.
    tau_cov: f64,
    max_step_factor: f64,
    nmt_weight: f64,
    lm_weight: f64,
    phrase_weight: f64,
    word_reward: f64,
    pp_weight: f64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            beam_word: 32,
            beam_phrase: 96,
            tau_focus: 0.3,
            tau_cov: 0.7,
            max_step_factor: 2.0,
            nmt_weight: 1.0,
            lm_weight: 0.2,
            phrase_weight: 0.1,
            word_reward: 3.5,
            pp_weight: 0.0,
        }
    }
}

impl DemoOptions {
    fn search_params(&self, pure_nmt: bool, record_attention: bool) -> SearchParams {
        SearchParams {
            beam_word: self.beam_word.clamp(1, 256),
            beam_phrase: if pure_nmt { 0 } else { self.beam_phrase.min(512) },
            tau_focus: self.tau_focus,
            tau_cov: if self.tau_cov > 0.0 { self.tau_cov } else { f64::INFINITY },
            max_step_factor: self.max_step_factor.clamp(1.0, 4.0),
            length_normalization: pure_nmt,
            record_attention,
            ..SearchParams::default()
        }
    }

    fn weights(&self, pure_nmt: bool) -> FeatureWeights {
        if pure_nmt {
            return FeatureWeights::nmt_only();
        }
        FeatureWeights {
            nmt: self.nmt_weight,
            lm: self.lm_weight,
            phr: self.phrase_weight,
            iphr: self.phrase_weight,
            wp: self.word_reward,
            pp: self.pp_weight,
            ..FeatureWeights::default()
        }
    }
}

#[derive(Serialize)]
struct Hypothesis {
    tokens: Vec<String>,
    score: f64,
    phrase_boxes: Vec<[usize; 4]>,
}

#[derive(Serialize)]
struct DecodeReply {
    source: Vec<String>,
    hybrid: Option<Hypothesis>,
    pure_nmt: Option<Hypothesis>,
    error: Option<String>,
}

fn best_of(entries: &[NBestEntry]) -> Option<Hypothesis> {
    entries.first().map(|e| Hypothesis {
        tokens: e.surface(),
        score: e.score,
        phrase_boxes: phrase_boxes(e)
            .into_iter()
            .map(|b| [b.src_start, b.src_len, b.tgt_start, b.tgt_len])
            .collect(),
    })
}

fn run(source: &str, opts: &DemoOptions, pure_nmt: bool, attention: bool) -> Result<Vec<NBestEntry>, String> {
    let w = world();
    let tokens: Vec<String> = source.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err("enter at least one source word".into());
    }
    let ids = w
        .src_vocab
        .encode(&tokens.iter().map(String::as_str).collect::<Vec<_>>());
    let options = if pure_nmt {
        hybridmt::phrase_table::TranslationOptions::empty()
    } else {
        match_source(&tokens, &w.table, &MatchParams::default())
    };
    decode(
        &ids,
        &w.scorer,
        &options,
        &w.lm,
        &opts.weights(pure_nmt),
        &opts.search_params(pure_nmt, attention),
        &w.tgt_vocab,
    )
    .map_err(|e| e.to_string())
}

fn parse_opts(opts_json: &str) -> Result<DemoOptions, String> {
    if opts_json.trim().is_empty() {
        return Ok(DemoOptions::default());
    }
    serde_json::from_str(opts_json).map_err(|e| format!("bad options: {e}"))
}

/// Decodes `source` both with the hybrid search and with the pure word-beam
/// reduction, returning a JSON comparison.
#[wasm_bindgen]
pub fn decode_compare(source: &str, opts_json: &str) -> String {
    let reply = (|| -> Result<DecodeReply, String> {
        let opts = parse_opts(opts_json)?;
        let hybrid = run(source, &opts, false, false)?;
        let pure = run(source, &opts, true, false)?;
        Ok(DecodeReply {
            source: source.split_whitespace().map(str::to_string).collect(),
            hybrid: best_of(&hybrid),
            pure_nmt: best_of(&pure),
            error: None,
        })
    })();
    let reply = reply.unwrap_or_else(|e| DecodeReply {
        source: Vec::new(),
        hybrid: None,
        pure_nmt: None,
        error: Some(e),
    });
    serde_json::to_string(&reply).expect("serializable reply")
}

/// SVG attention heat map of the best hybrid hypothesis, with phrase spans
/// outlined.
#[wasm_bindgen]
pub fn attention_svg(source: &str, opts_json: &str) -> String {
    let result = (|| -> Result<String, String> {
        let opts = parse_opts(opts_json)?;
        let entries = run(source, &opts, false, true)?;
        let best = entries.first().ok_or("no hypothesis produced")?;
        let tokens: Vec<String> = source.split_whitespace().map(str::to_string).collect();
        export_svg(best, &tokens).map_err(|e| e.to_string())
    })();
    result.unwrap_or_else(|e| {
        format!("<svg xmlns=\"http://www.w3.org/2000/svg\"><text x=\"4\" y=\"16\">{e}</text></svg>")
    })
}

/// Corpus BLEU of one hypothesis line against newline-separated references.
#[wasm_bindgen]
pub fn bleu_score(hyp: &str, refs: &str) -> f64 {
    let hyp: Vec<&str> = hyp.split_whitespace().collect();
    let refs: Vec<Vec<&str>> = refs
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().collect())
        .collect();
    if hyp.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let mut total = BleuStats::default();
    total = total.add(&accumulate(&hyp, &refs));
    corpus_bleu(&total)
}

/// Space-separated list of source words the built-in model knows.
#[wasm_bindgen]
pub fn known_source_words() -> String {
    SRC_WORDS.join(" ")
}

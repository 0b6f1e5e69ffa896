//! The log-linear feature system: named feature weights, per-derivation
//! feature accumulation, and an independent re-scoring path for audits.

use crate::error::{Error, Result};
use crate::ngram_lm::{ArpaModel, LmHistory};
use crate::phrase_table::{PhrasePair, PhraseTable};
use crate::scorer::Scorer;
use crate::vocab::{Vocabulary, BOS, BOS_ID};

/// Scaling factors λ of the log-linear model. When `wp_split` is set, words
/// emitted by word hypotheses and by phrase hypotheses carry separate word
/// penalties; otherwise `wp` applies to both.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWeights {
    pub nmt: f64,
    pub lm: f64,
    pub wp: f64,
    pub pp: f64,
    pub swc: f64,
    pub phr: f64,
    pub iphr: f64,
    pub wp_split: Option<(f64, f64)>,
}

impl Default for FeatureWeights {
    fn default() -> Self {
        FeatureWeights {
            nmt: 1.0,
            lm: 0.2,
            wp: 0.0,
            pp: 0.0,
            swc: 0.0,
            phr: 0.1,
            iphr: 0.1,
            wp_split: None,
        }
    }
}

impl FeatureWeights {
    /// Pure-NMT preset: only the NMT feature is active.
    pub fn nmt_only() -> Self {
        FeatureWeights {
            nmt: 1.0,
            lm: 0.0,
            wp: 0.0,
            pp: 0.0,
            swc: 0.0,
            phr: 0.0,
            iphr: 0.0,
            wp_split: None,
        }
    }

    pub fn zeros() -> Self {
        FeatureWeights {
            nmt: 0.0,
            lm: 0.0,
            wp: 0.0,
            pp: 0.0,
            swc: 0.0,
            phr: 0.0,
            iphr: 0.0,
            wp_split: None,
        }
    }

    pub fn wp_word(&self) -> f64 {
        self.wp_split.map_or(self.wp, |(w, _)| w)
    }

    pub fn wp_phrase(&self) -> f64 {
        self.wp_split.map_or(self.wp, |(_, p)| p)
    }

    /// Weight-space vector layout used by MERT. The word penalty occupies one
    /// slot without the split, two with it.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.nmt, self.lm];
        match self.wp_split {
            Some((w, p)) => v.extend([w, p]),
            None => v.push(self.wp),
        }
        v.extend([self.pp, self.swc, self.phr, self.iphr]);
        v
    }

    pub fn from_vec(v: &[f64], split: bool) -> Self {
        if split {
            assert_eq!(v.len(), 8);
            FeatureWeights {
                nmt: v[0],
                lm: v[1],
                wp: 0.0,
                pp: v[4],
                swc: v[5],
                phr: v[6],
                iphr: v[7],
                wp_split: Some((v[2], v[3])),
            }
        } else {
            assert_eq!(v.len(), 7);
            FeatureWeights {
                nmt: v[0],
                lm: v[1],
                wp: v[2],
                pp: v[3],
                swc: v[4],
                phr: v[5],
                iphr: v[6],
                wp_split: None,
            }
        }
    }
}

/// Feature values h accumulated along one derivation. Word-penalty counts are
/// kept separately per move kind; the plain word penalty is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub nmt: f64,
    pub lm: f64,
    pub wp_word: f64,
    pub wp_phrase: f64,
    pub pp: f64,
    pub swc: f64,
    pub phr: f64,
    pub iphr: f64,
}

impl FeatureVector {
    /// Target word count, the h_WP of the unsplit model.
    pub fn wp(&self) -> f64 {
        self.wp_word + self.wp_phrase
    }

    pub fn add(&self, other: &FeatureVector) -> FeatureVector {
        FeatureVector {
            nmt: self.nmt + other.nmt,
            lm: self.lm + other.lm,
            wp_word: self.wp_word + other.wp_word,
            wp_phrase: self.wp_phrase + other.wp_phrase,
            pp: self.pp + other.pp,
            swc: self.swc + other.swc,
            phr: self.phr + other.phr,
            iphr: self.iphr + other.iphr,
        }
    }

    pub fn to_vec(&self, split: bool) -> Vec<f64> {
        if split {
            vec![
                self.nmt,
                self.lm,
                self.wp_word,
                self.wp_phrase,
                self.pp,
                self.swc,
                self.phr,
                self.iphr,
            ]
        } else {
            vec![
                self.nmt,
                self.lm,
                self.wp(),
                self.pp,
                self.swc,
                self.phr,
                self.iphr,
            ]
        }
    }
}

/// Σ_m λ_m · h_m
pub fn combine(w: &FeatureWeights, v: &FeatureVector) -> f64 {
    w.nmt * v.nmt
        + w.lm * v.lm
        + w.wp_word() * v.wp_word
        + w.wp_phrase() * v.wp_phrase
        + w.pp * v.pp
        + w.swc * v.swc
        + w.phr * v.phr
        + w.iphr * v.iphr
}

/// One derivation move: a single NMT word, or a phrase pair anchored at a
/// source span.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    Word(String),
    Phrase { pair: PhrasePair, start: usize },
}

impl Move {
    pub fn target_tokens(&self) -> &[String] {
        match self {
            Move::Word(w) => std::slice::from_ref(w),
            Move::Phrase { pair, .. } => &pair.target,
        }
    }
}

/// Ordered moves of one derivation; concatenated target sides reproduce the
/// hypothesis target sequence.
pub type DerivationRecord = Vec<Move>;

pub fn derivation_target(record: &DerivationRecord) -> Vec<String> {
    record
        .iter()
        .flat_map(|m| m.target_tokens().iter().cloned())
        .collect()
}

/// Recomputes every feature of a derivation from scratch by replaying the
/// scorer, LM, and phrase table, independent of the search's bookkeeping.
pub fn audit_derivation<S: Scorer>(
    record: &DerivationRecord,
    source: &[u32],
    scorer: &S,
    lm: &ArpaModel,
    table: &PhraseTable,
    vocab: &Vocabulary,
    w: &FeatureWeights,
) -> Result<(FeatureVector, f64)> {
    let mut v = FeatureVector::default();
    let mut state = scorer.begin(source)?;
    let mut prev_word: u32 = BOS_ID;
    let mut history = LmHistory::empty().extended(lm.id_of(BOS), lm.order());
    for mv in record {
        match mv {
            Move::Word(word) => {
                let out = scorer.step(&state, prev_word);
                let id = vocab.index_or_unk(word);
                v.nmt += out.log_prob(id);
                v.lm += lm.score_word(&history, lm.id_of(word));
                v.wp_word += 1.0;
                history = history.extended(lm.id_of(word), lm.order());
                state = out.next_state;
                prev_word = id;
            }
            Move::Phrase { pair, .. } => {
                if !table.contains(pair) {
                    return Err(Error::Audit(format!(
                        "phrase pair `{} ||| {}` not in table",
                        pair.source.join(" "),
                        pair.target.join(" ")
                    )));
                }
                let lm_ids: Vec<u32> = pair.target.iter().map(|t| lm.id_of(t)).collect();
                v.lm += lm.score_phrase(&history, &lm_ids);
                for id in &lm_ids {
                    history = history.extended(*id, lm.order());
                }
                for word in &pair.target {
                    let out = scorer.step(&state, prev_word);
                    let id = vocab.index_or_unk(word);
                    v.nmt += out.log_prob(id);
                    state = out.next_state;
                    prev_word = id;
                }
                v.wp_phrase += pair.target.len() as f64;
                v.pp += 1.0;
                v.swc += pair.source.len() as f64;
                v.phr += pair.log_p_src_given_tgt;
                v.iphr += pair.log_p_tgt_given_src;
            }
        }
    }
    let score = combine(w, &v);
    Ok((v, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_zero_vector() {
        let w = FeatureWeights::default();
        assert_eq!(combine(&w, &FeatureVector::default()), 0.0);
    }

    #[test]
    fn combine_unit_weights_hand_value() {
        let w = FeatureWeights {
            nmt: 1.0,
            lm: 1.0,
            wp: 1.0,
            pp: 1.0,
            swc: 1.0,
            phr: 1.0,
            iphr: 1.0,
            wp_split: None,
        };
        let v = FeatureVector {
            nmt: -0.5,
            lm: -1.2,
            wp_word: 2.0,
            wp_phrase: 0.0,
            pp: 1.0,
            swc: 1.0,
            phr: 0.0,
            iphr: 0.0,
        };
        assert!((combine(&w, &v) - 2.3).abs() < 1e-12);
    }

    #[test]
    fn doubling_weights_doubles_score() {
        let w = FeatureWeights::default();
        let w2 = FeatureWeights {
            nmt: 2.0 * w.nmt,
            lm: 2.0 * w.lm,
            wp: 2.0 * w.wp,
            pp: 2.0 * w.pp,
            swc: 2.0 * w.swc,
            phr: 2.0 * w.phr,
            iphr: 2.0 * w.iphr,
            wp_split: None,
        };
        let v = FeatureVector {
            nmt: -3.0,
            lm: -1.0,
            wp_word: 4.0,
            wp_phrase: 1.0,
            pp: 1.0,
            swc: 2.0,
            phr: -0.7,
            iphr: -0.3,
        };
        assert!((combine(&w2, &v) - 2.0 * combine(&w, &v)).abs() < 1e-12);
    }

    #[test]
    fn weight_vec_roundtrip() {
        let w = FeatureWeights {
            wp_split: Some((0.5, -0.5)),
            ..FeatureWeights::default()
        };
        assert_eq!(FeatureWeights::from_vec(&w.to_vec(), true), w);
        let w2 = FeatureWeights::default();
        assert_eq!(FeatureWeights::from_vec(&w2.to_vec(), false), w2);
    }

    #[test]
    fn derivation_target_concatenation() {
        let pair = PhrasePair {
            source: vec!["a".into(), "b".into()],
            target: vec!["X".into(), "Y".into()],
            log_p_src_given_tgt: -0.1,
            log_p_tgt_given_src: -0.2,
        };
        let rec: DerivationRecord = vec![
            Move::Word("w".into()),
            Move::Phrase { pair, start: 0 },
            Move::Word("</s>".into()),
        ];
        assert_eq!(derivation_target(&rec), vec!["w", "X", "Y", "</s>"]);
    }
}

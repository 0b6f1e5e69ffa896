//! Hybrid beam search: dual word/phrase beams, attention-driven phrase
//! hypothesis generation, soft-coverage tracking, recombination, pruning.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::loglinear::{DerivationRecord, FeatureVector, FeatureWeights, Move};
use crate::ngram_lm::{ArpaModel, LmHistory};
use crate::phrase_table::{PhrasePair, TranslationOptions};
use crate::scorer::Scorer;
use crate::vocab::{Vocabulary, BOS, BOS_ID, EOS};

#[derive(Debug, Clone)]
pub struct SearchParams {
    /// N_w, the word beam size.
    pub beam_word: usize,
    /// N_p, the phrase beam size. 0 disables phrase hypotheses entirely.
    pub beam_phrase: usize,
    /// Minimum current attention on a source position to anchor a phrase there.
    pub tau_focus: f64,
    /// Accumulated attention at which a source position counts as covered.
    /// `f64::INFINITY` disables the coverage check.
    pub tau_cov: f64,
    /// Step limit is ceil(factor * J).
    pub max_step_factor: f64,
    /// Rank finished hypotheses by Q divided by target length (pure-NMT mode).
    pub length_normalization: bool,
    pub nbest_size: usize,
    /// Keep every finished hypothesis instead of pruning the finished set.
    pub bf_unbounded: bool,
    /// Optional cap on phrase candidates generated per word hypothesis.
    pub phrase_candidate_cap: Option<usize>,
    /// Record per-step attention rows for alignment export.
    pub record_attention: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            beam_word: 32,
            beam_phrase: 96,
            tau_focus: 0.3,
            tau_cov: 0.7,
            max_step_factor: 2.0,
            length_normalization: false,
            nbest_size: 1,
            bf_unbounded: false,
            phrase_candidate_cap: None,
            record_attention: false,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.beam_word < 1 {
            return Err(Error::Search("beam_word must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau_focus) {
            return Err(Error::Search("tau_focus must be in [0, 1]".into()));
        }
        if !(self.tau_cov > 0.0) {
            return Err(Error::Search("tau_cov must be positive or inf".into()));
        }
        if !(self.max_step_factor > 0.0) {
            return Err(Error::Search("max_step_factor must be positive".into()));
        }
        if self.nbest_size < 1 {
            return Err(Error::Search("nbest_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// A hypothesis mid-way through emitting target phrase `pair.target`, with
/// `scored` words already scored by the NMT model.
#[derive(Debug, Clone)]
pub struct PhraseState {
    pub pair: PhrasePair,
    pub start: usize,
    pub scored: usize,
}

#[derive(Debug, Clone)]
pub struct Hypothesis<S> {
    pub emitted: Vec<String>,
    pub q: f64,
    pub soft_coverage: Vec<f64>,
    pub lm_history: LmHistory,
    pub phrase_state: Option<PhraseState>,
    pub state: S,
    pub features: FeatureVector,
    pub derivation: DerivationRecord,
    pub attention_rows: Vec<Vec<f64>>,
    pub steps: usize,
}

type RecombinationKey = (Vec<String>, Option<(Vec<String>, usize)>);

impl<S> Hypothesis<S> {
    fn key(&self) -> RecombinationKey {
        (
            self.emitted.clone(),
            self.phrase_state
                .as_ref()
                .map(|ps| (ps.pair.target.clone(), ps.scored)),
        )
    }

    fn finished(&self) -> bool {
        self.emitted.last().map(String::as_str) == Some(EOS)
    }
}

/// Deterministic hypothesis order: Q descending, then target sequence, then
/// pending phrase state.
fn hyp_cmp<S>(a: &Hypothesis<S>, b: &Hypothesis<S>) -> std::cmp::Ordering {
    b.q.total_cmp(&a.q)
        .then_with(|| a.emitted.cmp(&b.emitted))
        .then_with(|| {
            let ka = a.phrase_state.as_ref().map(|p| (&p.pair.target, p.scored));
            let kb = b.phrase_state.as_ref().map(|p| (&p.pair.target, p.scored));
            ka.cmp(&kb)
        })
}

/// Recombines candidates sharing (target sequence, phrase state), keeping the
/// max-Q one, then truncates to `cap` by Q with deterministic tie-break.
pub fn prune_and_recombine<S>(candidates: Vec<Hypothesis<S>>, cap: usize) -> Vec<Hypothesis<S>> {
    let mut by_key: HashMap<RecombinationKey, Hypothesis<S>> = HashMap::new();
    for cand in candidates {
        match by_key.entry(cand.key()) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(cand);
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if hyp_cmp(&cand, e.get()).is_lt() {
                    e.insert(cand);
                }
            }
        }
    }
    let mut survivors: Vec<Hypothesis<S>> = by_key.into_values().collect();
    survivors.sort_by(hyp_cmp);
    survivors.truncate(cap);
    survivors
}

/// Focus position: argmax attention among positions above the threshold,
/// smallest index on ties. Positions are 0-based.
pub fn find_focus(attention: &[f64], tau_focus: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &a) in attention.iter().enumerate() {
        if a > tau_focus && best.map_or(true, |(_, b)| a > b) {
            best = Some((j, a));
        }
    }
    best.map(|(j, _)| j)
}

#[derive(Debug, Clone)]
pub struct NBestEntry {
    pub rank: usize,
    /// Emitted target tokens, including the trailing sentence-end token when
    /// the hypothesis finished.
    pub tokens: Vec<String>,
    /// Raw accumulated log-linear score Q.
    pub score: f64,
    /// Ranking score: Q, or Q / length under length normalization.
    pub ranking_score: f64,
    pub features: FeatureVector,
    pub derivation: DerivationRecord,
    pub attention: Option<Vec<Vec<f64>>>,
    pub unfinished: bool,
}

impl NBestEntry {
    /// Target tokens without the sentence-end marker.
    pub fn surface(&self) -> Vec<String> {
        self.tokens
            .iter()
            .filter(|t| t.as_str() != EOS)
            .cloned()
            .collect()
    }
}

fn effective_score<S>(h: &Hypothesis<S>, params: &SearchParams) -> f64 {
    if params.length_normalization && !h.emitted.is_empty() {
        h.q / h.emitted.len() as f64
    } else {
        h.q
    }
}

struct Models<'a, S: Scorer> {
    scorer: &'a S,
    lm: &'a ArpaModel,
    vocab: &'a Vocabulary,
    weights: &'a FeatureWeights,
}

impl<'a, S: Scorer> Models<'a, S> {
    fn prev_word_id(&self, h: &Hypothesis<S::State>) -> u32 {
        match h.emitted.last() {
            Some(tok) => self.vocab.index_or_unk(tok),
            None => BOS_ID,
        }
    }
}

type StepOut<S> = crate::scorer::StepOutput<S>;

/// Step 3: top-N_w (h, e) pairs by Q(h) + λ_NMT·log p̂_h(e); LM and word
/// penalty are added only after selection.
fn generate_word_hypotheses<S: Scorer>(
    beam: &[Hypothesis<S::State>],
    outs: &[StepOut<S::State>],
    m: &Models<S>,
    params: &SearchParams,
) -> Vec<Hypothesis<S::State>> {
    let w = m.weights;
    let vocab_size = m.scorer.target_vocab_size();
    let mut pairs: Vec<(f64, usize, u32)> = Vec::with_capacity(beam.len() * vocab_size);
    for (i, h) in beam.iter().enumerate() {
        for e in 0..vocab_size as u32 {
            let sel = h.q + w.nmt * outs[i].log_probs[e as usize];
            pairs.push((sel, i, e));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            let (ha, ea) = (&beam[a.1], a.2);
            let (hb, eb) = (&beam[b.1], b.2);
            let ta = m.vocab.token(ea).unwrap_or("");
            let tb = m.vocab.token(eb).unwrap_or("");
            (ha.emitted.as_slice(), ta).cmp(&(hb.emitted.as_slice(), tb))
        })
    });
    pairs.truncate(params.beam_word);
    pairs
        .into_iter()
        .map(|(sel, i, e)| {
            let h = &beam[i];
            let out = &outs[i];
            let token = m.vocab.token(e).expect("id in range").to_string();
            let lm_id = m.lm.id_of(&token);
            let lm_lp = m.lm.score_word(&h.lm_history, lm_id);
            let mut h2 = extend_common(h, out, std::slice::from_ref(&token), params);
            h2.q = sel + w.lm * lm_lp + w.wp_word();
            h2.features.nmt += out.log_probs[e as usize];
            h2.features.lm += lm_lp;
            h2.features.wp_word += 1.0;
            h2.lm_history = h.lm_history.extended(lm_id, m.lm.order());
            h2.derivation.push(Move::Word(token));
            h2
        })
        .collect()
}

/// Shared bookkeeping for any one-scorer-step extension: coverage update,
/// emitted tokens, successor scorer state.
fn extend_common<St: Clone>(
    h: &Hypothesis<St>,
    out: &StepOut<St>,
    new_tokens: &[String],
    params: &SearchParams,
) -> Hypothesis<St> {
    let mut cov = h.soft_coverage.clone();
    for (c, a) in cov.iter_mut().zip(&out.attention) {
        *c += a;
    }
    let mut emitted = h.emitted.clone();
    emitted.extend(new_tokens.iter().cloned());
    let mut attention_rows = h.attention_rows.clone();
    if params.record_attention {
        attention_rows.push(out.attention.clone());
    }
    Hypothesis {
        emitted,
        q: h.q,
        soft_coverage: cov,
        lm_history: h.lm_history.clone(),
        phrase_state: None,
        state: out.next_state.clone(),
        features: h.features,
        derivation: h.derivation.clone(),
        attention_rows,
        steps: h.steps + 1,
    }
}

/// Step 4: phrase hypotheses anchored at the attention focus. The full target
/// phrase is scored by the LM and the phrase features at creation; only the
/// first target word is scored by the NMT model here.
fn generate_phrase_hypotheses<S: Scorer>(
    beam: &[Hypothesis<S::State>],
    outs: &[StepOut<S::State>],
    options: &TranslationOptions,
    m: &Models<S>,
    params: &SearchParams,
) -> Vec<Hypothesis<S::State>> {
    let w = m.weights;
    let source_len = beam
        .first()
        .map(|h| h.soft_coverage.len())
        .unwrap_or(0);
    let mut all = Vec::new();
    for (i, h) in beam.iter().enumerate() {
        let out = &outs[i];
        let Some(focus) = find_focus(&out.attention, params.tau_focus) else {
            continue;
        };
        let covered: Vec<bool> = h
            .soft_coverage
            .iter()
            .map(|&c| c > params.tau_cov)
            .collect();
        let mut per_hyp = Vec::new();
        for len in 1..=(source_len - focus) {
            if covered[focus + len - 1] {
                break;
            }
            for pair in options.get(focus, len) {
                let first_id = m.vocab.index_or_unk(&pair.target[0]);
                let lm_ids: Vec<u32> = pair.target.iter().map(|t| m.lm.id_of(t)).collect();
                let lm_lp = m.lm.score_phrase(&h.lm_history, &lm_ids);
                let nmt_lp = out.log_prob(first_id);
                let mut h2 = extend_common(
                    h,
                    out,
                    std::slice::from_ref(&pair.target[0]),
                    params,
                );
                h2.q = h.q
                    + w.nmt * nmt_lp
                    + w.lm * lm_lp
                    + pair.target.len() as f64 * w.wp_phrase()
                    + w.pp
                    + len as f64 * w.swc
                    + w.phr * pair.log_p_src_given_tgt
                    + w.iphr * pair.log_p_tgt_given_src;
                h2.features.nmt += nmt_lp;
                h2.features.lm += lm_lp;
                h2.features.wp_phrase += pair.target.len() as f64;
                h2.features.pp += 1.0;
                h2.features.swc += len as f64;
                h2.features.phr += pair.log_p_src_given_tgt;
                h2.features.iphr += pair.log_p_tgt_given_src;
                let mut hist = h.lm_history.clone();
                for id in &lm_ids {
                    hist = hist.extended(*id, m.lm.order());
                }
                h2.lm_history = hist;
                h2.derivation.push(Move::Phrase {
                    pair: pair.clone(),
                    start: focus,
                });
                if pair.target.len() > 1 {
                    h2.phrase_state = Some(PhraseState {
                        pair: pair.clone(),
                        start: focus,
                        scored: 1,
                    });
                }
                per_hyp.push(h2);
            }
        }
        if let Some(cap) = params.phrase_candidate_cap {
            per_hyp.sort_by(hyp_cmp);
            per_hyp.truncate(cap);
        }
        all.extend(per_hyp);
    }
    all
}

/// Step 5: advance pending phrase hypotheses by one NMT-scored word. LM,
/// penalties, and phrase scores were already added in full at creation.
fn advance_phrase_hypotheses<S: Scorer>(
    beam: &[Hypothesis<S::State>],
    outs: &[StepOut<S::State>],
    m: &Models<S>,
    params: &SearchParams,
) -> Vec<Hypothesis<S::State>> {
    let w = m.weights;
    beam.iter()
        .zip(outs)
        .map(|(h, out)| {
            let ps = h.phrase_state.as_ref().expect("phrase beam entry");
            let next_word = &ps.pair.target[ps.scored];
            let id = m.vocab.index_or_unk(next_word);
            let nmt_lp = out.log_prob(id);
            let mut h2 = extend_common(h, out, std::slice::from_ref(next_word), params);
            h2.q = h.q + w.nmt * nmt_lp;
            h2.features.nmt += nmt_lp;
            if ps.scored + 1 < ps.pair.target.len() {
                h2.phrase_state = Some(PhraseState {
                    pair: ps.pair.clone(),
                    start: ps.start,
                    scored: ps.scored + 1,
                });
            }
            h2
        })
        .collect()
}

/// Full hybrid decode of one source sentence.
pub fn decode<S: Scorer>(
    source: &[u32],
    scorer: &S,
    options: &TranslationOptions,
    lm: &ArpaModel,
    weights: &FeatureWeights,
    params: &SearchParams,
    vocab: &Vocabulary,
) -> Result<Vec<NBestEntry>> {
    params.validate()?;
    if source.is_empty() {
        return Err(Error::Search("empty source sentence".into()));
    }
    let m = Models {
        scorer,
        lm,
        vocab,
        weights,
    };
    let source_len = source.len();
    let step_limit = (params.max_step_factor * source_len as f64).ceil() as usize;
    let init = Hypothesis {
        emitted: Vec::new(),
        q: 0.0,
        soft_coverage: vec![0.0; source_len],
        lm_history: LmHistory::empty().extended(lm.id_of(BOS), lm.order()),
        phrase_state: None,
        state: scorer.begin(source)?,
        features: FeatureVector::default(),
        derivation: Vec::new(),
        attention_rows: Vec::new(),
        steps: 0,
    };
    let mut beam_w: Vec<Hypothesis<S::State>> = vec![init];
    let mut beam_p: Vec<Hypothesis<S::State>> = Vec::new();
    let mut finished: Vec<Hypothesis<S::State>> = Vec::new();

    for _ in 0..step_limit {
        if beam_w.is_empty() && beam_p.is_empty() {
            break;
        }
        let outs_w: Vec<StepOut<S::State>> = beam_w
            .iter()
            .map(|h| scorer.step(&h.state, m.prev_word_id(h)))
            .collect();
        let outs_p: Vec<StepOut<S::State>> = beam_p
            .iter()
            .map(|h| scorer.step(&h.state, m.prev_word_id(h)))
            .collect();

        let mut cand_w = generate_word_hypotheses(&beam_w, &outs_w, &m, params);
        let mut cand_p = Vec::new();
        if params.beam_phrase > 0 {
            for h2 in generate_phrase_hypotheses(&beam_w, &outs_w, options, &m, params) {
                if h2.phrase_state.is_some() {
                    cand_p.push(h2);
                } else {
                    cand_w.push(h2);
                }
            }
        }
        for h2 in advance_phrase_hypotheses(&beam_p, &outs_p, &m, params) {
            if h2.phrase_state.is_some() {
                cand_p.push(h2);
            } else {
                cand_w.push(h2);
            }
        }

        beam_w = prune_and_recombine(cand_w, params.beam_word);
        beam_p = prune_and_recombine(cand_p, params.beam_phrase);

        let (done, carry): (Vec<_>, Vec<_>) = beam_w.into_iter().partition(|h| h.finished());
        finished.extend(done);
        beam_w = carry;

        if !params.bf_unbounded && finished.len() > params.nbest_size * 4 {
            finished.sort_by(|a, b| {
                effective_score(b, params)
                    .total_cmp(&effective_score(a, params))
                    .then_with(|| a.emitted.cmp(&b.emitted))
            });
            finished.truncate(params.nbest_size * 4);
        }
    }

    let mut unfinished = false;
    if finished.is_empty() {
        // fall back to the best unfinished hypothesis
        let mut rest: Vec<Hypothesis<S::State>> = beam_w;
        rest.extend(beam_p);
        if rest.is_empty() {
            return Err(Error::Search("no hypotheses produced".into()));
        }
        rest.sort_by(|a, b| {
            effective_score(b, params)
                .total_cmp(&effective_score(a, params))
                .then_with(|| a.emitted.cmp(&b.emitted))
        });
        finished.push(rest.into_iter().next().unwrap());
        unfinished = true;
    }

    finished.sort_by(|a, b| {
        effective_score(b, params)
            .total_cmp(&effective_score(a, params))
            .then_with(|| a.emitted.cmp(&b.emitted))
    });
    finished.truncate(params.nbest_size);
    Ok(finished
        .into_iter()
        .enumerate()
        .map(|(rank, h)| {
            let ranking_score = effective_score(&h, params);
            NBestEntry {
                rank,
                tokens: h.emitted,
                score: h.q,
                ranking_score,
                features: h.features,
                derivation: h.derivation,
                attention: params.record_attention.then_some(h.attention_rows),
                unfinished,
            }
        })
        .collect())
}

/// Replays a derivation's coverage bookkeeping: checks that no phrase was
/// created over a binary-covered source position and that the soft-coverage
/// mass equals the number of scorer steps.
pub fn replay_coverage_checks<S: Scorer>(
    entry: &NBestEntry,
    source: &[u32],
    scorer: &S,
    vocab: &Vocabulary,
    tau_cov: f64,
) -> Result<()> {
    let mut state = scorer.begin(source)?;
    let mut prev: u32 = BOS_ID;
    let mut coverage = vec![0.0f64; source.len()];
    let mut steps = 0usize;
    for mv in &entry.derivation {
        if let Move::Phrase { pair, start } = mv {
            for j in *start..*start + pair.source.len() {
                if coverage[j] > tau_cov {
                    return Err(Error::Search(format!(
                        "phrase `{}` created over covered source position {}",
                        pair.target.join(" "),
                        j
                    )));
                }
            }
        }
        for tok in mv.target_tokens() {
            let out = scorer.step(&state, prev);
            for (c, a) in coverage.iter_mut().zip(&out.attention) {
                *c += a;
            }
            steps += 1;
            state = out.next_state;
            prev = vocab.index_or_unk(tok);
        }
    }
    let mass: f64 = coverage.iter().sum();
    if (mass - steps as f64).abs() > 1e-6 * steps.max(1) as f64 {
        return Err(Error::Search(format!(
            "coverage mass {mass} != scorer steps {steps}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::SyntheticScorer;

    #[test]
    fn focus_basic() {
        assert_eq!(find_focus(&[0.1, 0.6, 0.3], 0.3), Some(1));
        assert_eq!(find_focus(&[0.25, 0.25, 0.25, 0.25], 0.3), None);
        assert_eq!(find_focus(&[0.4, 0.4, 0.2], 0.3), Some(0));
    }

    fn hyp(emitted: &[&str], q: f64) -> Hypothesis<()> {
        Hypothesis {
            emitted: emitted.iter().map(|s| s.to_string()).collect(),
            q,
            soft_coverage: vec![],
            lm_history: LmHistory::empty(),
            phrase_state: None,
            state: (),
            features: FeatureVector::default(),
            derivation: Vec::new(),
            attention_rows: Vec::new(),
            steps: emitted.len(),
        }
    }

    #[test]
    fn recombination_keeps_higher_score() {
        let out = prune_and_recombine(vec![hyp(&["x"], -2.0), hyp(&["x"], -1.0)], 10);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].q, -1.0);
    }

    #[test]
    fn pruning_keeps_top_by_q() {
        let cands: Vec<_> = (0..40).map(|i| hyp(&[&format!("t{i:02}")], -(i as f64))).collect();
        let out = prune_and_recombine(cands, 32);
        assert_eq!(out.len(), 32);
        assert_eq!(out[0].q, 0.0);
        assert_eq!(out[31].q, -31.0);
    }

    #[test]
    fn recombination_before_truncation() {
        // 33 candidates, two share a target; the survivor set has room for the
        // hypothesis that a duplicate would otherwise displace
        let mut cands: Vec<_> = (0..31).map(|i| hyp(&[&format!("t{i:02}")], -(i as f64))).collect();
        cands.push(hyp(&["t00"], -0.5)); // duplicate of the best target
        cands.push(hyp(&["zz"], -40.0)); // worst, survives only if recombined first
        let out = prune_and_recombine(cands, 32);
        assert_eq!(out.len(), 32);
        assert!(out.iter().any(|h| h.emitted == ["zz"]));
        let t00: Vec<_> = out.iter().filter(|h| h.emitted == ["t00"]).collect();
        assert_eq!(t00.len(), 1);
        assert_eq!(t00[0].q, 0.0);
    }

    #[test]
    fn mid_phrase_states_do_not_merge() {
        let pair_a = PhrasePair {
            source: vec!["s".into()],
            target: vec!["x".into(), "a".into()],
            log_p_src_given_tgt: -0.1,
            log_p_tgt_given_src: -0.1,
        };
        let pair_b = PhrasePair {
            source: vec!["s".into()],
            target: vec!["x".into(), "b".into()],
            log_p_src_given_tgt: -0.1,
            log_p_tgt_given_src: -0.1,
        };
        let mut h1 = hyp(&["x"], -1.0);
        h1.phrase_state = Some(PhraseState {
            pair: pair_a,
            start: 0,
            scored: 1,
        });
        let mut h2 = hyp(&["x"], -2.0);
        h2.phrase_state = Some(PhraseState {
            pair: pair_b,
            start: 0,
            scored: 1,
        });
        let out = prune_and_recombine(vec![h1, h2], 10);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn decode_is_deterministic() {
        let vocab = Vocabulary::new(&["a", "b", "c"]).unwrap();
        let scorer = SyntheticScorer::new(11, vocab.len(), 4.0);
        let lm = crate::fixture::toy_lm(&["a", "b", "c"], 17);
        let params = SearchParams {
            beam_word: 4,
            beam_phrase: 4,
            nbest_size: 4,
            ..Default::default()
        };
        let w = FeatureWeights::default();
        let opts = TranslationOptions::empty();
        let a = decode(&[5, 6, 7], &scorer, &opts, &lm, &w, &params, &vocab).unwrap();
        let b = decode(&[5, 6, 7], &scorer, &opts, &lm, &w, &params, &vocab).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tokens, y.tokens);
            assert_eq!(x.score, y.score);
        }
    }

    #[test]
    fn step_limit_respected() {
        let vocab = Vocabulary::new(&["a"]).unwrap();
        // peaking 0 with uniform distributions rarely emits EOS early
        let scorer = SyntheticScorer::new(2, vocab.len(), 0.0);
        let lm = crate::fixture::toy_lm(&["a"], 3);
        let params = SearchParams {
            beam_word: 2,
            beam_phrase: 0,
            max_step_factor: 1.5,
            ..Default::default()
        };
        let w = FeatureWeights::nmt_only();
        let out = decode(
            &[1, 2, 3],
            &scorer,
            &TranslationOptions::empty(),
            &lm,
            &w,
            &params,
            &vocab,
        )
        .unwrap();
        // ceil(1.5 * 3) = 5 scorer steps max
        assert!(out[0].tokens.len() <= 5);
    }
}

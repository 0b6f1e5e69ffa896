//! Shared helpers for the integration suites: an independent neural forward
//! pass, an independent plain beam search, an exhaustive derivation
//! enumerator, and a fully programmable table-driven scorer.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use hybridmt::linalg::Matrix;
use hybridmt::loglinear::FeatureWeights;
use hybridmt::ngram_lm::{ArpaModel, LmHistory};
use hybridmt::phrase_table::TranslationOptions;
use hybridmt::scorer::{NmtScorer, Scorer, StepOutput};
use hybridmt::search::{find_focus, SearchParams};
use hybridmt::vocab::Vocabulary;
use hybridmt::weights::{DecoderGruParams, GruParams, ModelWeights};

pub const EOS: &str = "</s>";

pub fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Uniform in [0, 1) from a hash.
pub fn unit(x: u64) -> f64 {
    (splitmix(x) >> 11) as f64 / (1u64 << 53) as f64
}

// ---------------------------------------------------------------------------
// independent forward pass with compensated summation

fn kdot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 0..a.len() {
        let y = a[i] * b[i] - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn matvec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols, x.len());
    (0..m.rows)
        .map(|r| kdot(&m.data[r * m.cols..(r + 1) * m.cols], x))
        .collect()
}

fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gru(p: &GruParams, x: &[f64], h: &[f64], dec: Option<(&DecoderGruParams, &[f64])>) -> Vec<f64> {
    let mut z = vadd(&vadd(&matvec(&p.wz, x), &matvec(&p.uz, h)), &p.bz);
    let mut r = vadd(&vadd(&matvec(&p.wr, x), &matvec(&p.ur, h)), &p.br);
    if let Some((d, c)) = dec {
        z = vadd(&z, &matvec(&d.cz, c));
        r = vadd(&r, &matvec(&d.cr, c));
    }
    let z: Vec<f64> = z.into_iter().map(sigmoid).collect();
    let r: Vec<f64> = r.into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(ri, hi)| ri * hi).collect();
    let mut cand = vadd(&vadd(&matvec(&p.wh, x), &matvec(&p.uh, &rh)), &p.bh);
    if let Some((d, c)) = dec {
        cand = vadd(&cand, &matvec(&d.ch, c));
    }
    let cand: Vec<f64> = cand.into_iter().map(f64::tanh).collect();
    (0..h.len())
        .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
        .collect()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
    let mut z = 0.0;
    let mut comp = 0.0;
    for e in &exps {
        let y = e - comp;
        let t = z + y;
        comp = (t - z) - y;
        z = t;
    }
    exps.into_iter().map(|e| e / z).collect()
}

pub struct OracleState {
    pub annotations: Vec<Vec<f64>>,
    pub hidden: Vec<f64>,
}

pub fn oracle_begin(source: &[u32], w: &ModelWeights) -> OracleState {
    let h = w.hidden;
    let mut fwd = Vec::new();
    let mut s = vec![0.0; h];
    for &tok in source {
        s = gru(&w.enc_fwd, w.src_embed.row(tok as usize), &s, None);
        fwd.push(s.clone());
    }
    let mut bwd = vec![Vec::new(); source.len()];
    let mut s = vec![0.0; h];
    for (j, &tok) in source.iter().enumerate().rev() {
        s = gru(&w.enc_bwd, w.src_embed.row(tok as usize), &s, None);
        bwd[j] = s.clone();
    }
    let annotations: Vec<Vec<f64>> = fwd
        .into_iter()
        .zip(bwd)
        .map(|(f, b)| {
            let mut v = f;
            v.extend(b);
            v
        })
        .collect();
    let init: Vec<f64> = vadd(&matvec(&w.init_w, &annotations[0][h..2 * h]), &w.init_b)
        .into_iter()
        .map(f64::tanh)
        .collect();
    OracleState {
        annotations,
        hidden: init,
    }
}

pub fn oracle_step(st: &OracleState, prev: u32, w: &ModelWeights) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let proj_s = matvec(&w.att_w, &st.hidden);
    let energies: Vec<f64> = st
        .annotations
        .iter()
        .map(|hj| {
            let e: Vec<f64> = vadd(&vadd(&matvec(&w.att_u, hj), &proj_s), &w.att_b)
                .into_iter()
                .map(f64::tanh)
                .collect();
            kdot(&w.att_v, &e)
        })
        .collect();
    let attention = softmax(&energies);
    let mut context = vec![0.0; 2 * w.hidden];
    for (a, hj) in attention.iter().zip(&st.annotations) {
        for (c, x) in context.iter_mut().zip(hj) {
            *c += a * x;
        }
    }
    let y = w.tgt_embed.row(prev as usize);
    let next = gru(&w.dec.gru, y, &st.hidden, Some((&w.dec, &context)));
    let readout: Vec<f64> = vadd(
        &vadd(
            &vadd(&matvec(&w.ro_s, &next), &matvec(&w.ro_y, y)),
            &matvec(&w.ro_c, &context),
        ),
        &w.ro_b,
    )
    .into_iter()
    .map(f64::tanh)
    .collect();
    let logits = vadd(&matvec(&w.out_w, &readout), &w.out_b);
    let probs = softmax(&logits);
    let log_probs: Vec<f64> = probs.into_iter().map(f64::ln).collect();
    (log_probs, attention, next)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= tol * scale
}

/// Compares the production scorer against the oracle over `configs` random
/// model configurations; returns the number of steps compared. Panics on any
/// disagreement beyond the relative tolerance.
pub fn run_scorer_oracle(configs: u64, tol: f64) -> usize {
    let mut checked = 0usize;
    for cfg in 0..configs {
        let r0 = splitmix(cfg.wrapping_mul(77) + 3);
        let hidden = if r0 % 2 == 0 { 4 } else { 8 };
        let embed = if (r0 >> 8) % 2 == 0 { 3 } else { 5 };
        let src_vocab = 5 + (splitmix(r0) % 6) as usize;
        let tgt_vocab = 5 + (splitmix(r0 + 1) % 6) as usize;
        let w = Arc::new(ModelWeights::seeded(
            cfg * 1331 + 7,
            embed,
            hidden,
            src_vocab,
            tgt_vocab,
        ));
        let j = 1 + (splitmix(r0 + 2) % 6) as usize;
        let source: Vec<u32> = (0..j)
            .map(|i| (splitmix(r0 + 10 + i as u64) % src_vocab as u64) as u32)
            .collect();
        let steps = 1 + (splitmix(r0 + 3) % 4) as usize;

        let scorer = NmtScorer::new(Arc::clone(&w));
        let mut state = scorer.begin(&source).unwrap();
        let mut oracle = oracle_begin(&source, &w);
        let mut prev = 0u32;
        for step in 0..steps {
            let out = scorer.step(&state, prev);
            let (lp, att, next) = oracle_step(&oracle, prev, &w);
            assert_eq!(out.log_probs.len(), lp.len());
            assert_eq!(out.attention.len(), att.len());
            for (k, (&a, &b)) in out.log_probs.iter().zip(&lp).enumerate() {
                assert!(rel_close(a, b, tol), "cfg {cfg} step {step}: log_prob[{k}] {a} vs {b}");
            }
            for (k, (&a, &b)) in out.attention.iter().zip(&att).enumerate() {
                assert!(rel_close(a, b, tol), "cfg {cfg} step {step}: attention[{k}] {a} vs {b}");
            }
            prev = (splitmix(r0 + 100 + step as u64) % tgt_vocab as u64) as u32;
            state = out.next_state;
            oracle.hidden = next;
            checked += 1;
        }
    }
    checked
}

// ---------------------------------------------------------------------------
// independent plain beam search (word hypotheses only, NMT feature only)

/// Reference word-beam decoder: keeps the `beam` best prefixes by summed
/// model log probability, finishes on the sentence-end token, and ranks
/// finished hypotheses by score over length. Returns (tokens, raw score).
pub fn reference_pure_decode<S: Scorer>(
    source: &[u32],
    scorer: &S,
    vocab: &Vocabulary,
    beam: usize,
    nbest: usize,
    max_step_factor: f64,
) -> (Vec<String>, f64) {
    #[derive(Clone)]
    struct Hyp<St> {
        tokens: Vec<String>,
        q: f64,
        state: St,
    }
    let norm = |h: &Hyp<S::State>| -> f64 {
        if h.tokens.is_empty() {
            h.q
        } else {
            h.q / h.tokens.len() as f64
        }
    };
    let step_limit = (max_step_factor * source.len() as f64).ceil() as usize;
    let mut live = vec![Hyp::<S::State> {
        tokens: Vec::new(),
        q: 0.0,
        state: scorer.begin(source).unwrap(),
    }];
    let mut done: Vec<Hyp<S::State>> = Vec::new();
    for _ in 0..step_limit {
        if live.is_empty() {
            break;
        }
        let mut cands: Vec<Hyp<S::State>> = Vec::new();
        for h in &live {
            let prev = match h.tokens.last() {
                Some(t) => vocab.index_or_unk(t),
                None => 0,
            };
            let out = scorer.step(&h.state, prev);
            for e in 0..scorer.target_vocab_size() as u32 {
                let mut tokens = h.tokens.clone();
                tokens.push(vocab.token(e).unwrap().to_string());
                cands.push(Hyp {
                    tokens,
                    q: h.q + out.log_probs[e as usize],
                    state: out.next_state.clone(),
                });
            }
        }
        cands.sort_by(|a, b| b.q.total_cmp(&a.q).then_with(|| a.tokens.cmp(&b.tokens)));
        cands.truncate(beam);
        live = Vec::new();
        for h in cands {
            if h.tokens.last().map(String::as_str) == Some(EOS) {
                done.push(h);
            } else {
                live.push(h);
            }
        }
        if done.len() > nbest * 4 {
            done.sort_by(|a, b| norm(b).total_cmp(&norm(a)).then_with(|| a.tokens.cmp(&b.tokens)));
            done.truncate(nbest * 4);
        }
    }
    if done.is_empty() {
        live.sort_by(|a, b| norm(b).total_cmp(&norm(a)).then_with(|| a.tokens.cmp(&b.tokens)));
        let h = live.into_iter().next().expect("no hypotheses");
        return (h.tokens, h.q);
    }
    done.sort_by(|a, b| norm(b).total_cmp(&norm(a)).then_with(|| a.tokens.cmp(&b.tokens)));
    let h = &done[0];
    (h.tokens.clone(), h.q)
}

// ---------------------------------------------------------------------------
// exhaustive derivation enumerator

struct EnumNode<St> {
    state: St,
    prev: u32,
    emitted: Vec<String>,
    q: f64,
    coverage: Vec<f64>,
    lm_history: LmHistory,
    pending: Option<(hybridmt::phrase_table::PhrasePair, usize)>, // (pair, scored)
    steps: usize,
}

/// Enumerates every derivation reachable under the hybrid move rules (word
/// emission, focus-anchored phrase creation over uncovered spans, forced
/// phrase advancement) up to the step limit, and returns the best finished
/// (score, tokens) with deterministic tie-breaking on the token sequence.
pub fn enumerate_best<S: Scorer>(
    source: &[u32],
    scorer: &S,
    options: &TranslationOptions,
    lm: &ArpaModel,
    w: &FeatureWeights,
    params: &SearchParams,
    vocab: &Vocabulary,
) -> Option<(f64, Vec<String>)> {
    let step_limit = (params.max_step_factor * source.len() as f64).ceil() as usize;
    let mut best: Option<(f64, Vec<String>)> = None;
    let root = EnumNode {
        state: scorer.begin(source).unwrap(),
        prev: 0,
        emitted: Vec::new(),
        q: 0.0,
        coverage: vec![0.0; source.len()],
        lm_history: LmHistory::empty().extended(lm.id_of("<s>"), lm.order()),
        pending: None,
        steps: 0,
    };
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.steps >= step_limit {
            continue;
        }
        let out: StepOutput<S::State> = scorer.step(&node.state, node.prev);
        let covered_after = |cov: &[f64]| -> Vec<f64> {
            cov.iter().zip(&out.attention).map(|(c, a)| c + a).collect()
        };
        if let Some((pair, scored)) = &node.pending {
            let word = pair.target[*scored].clone();
            let id = vocab.index_or_unk(&word);
            let mut emitted = node.emitted.clone();
            emitted.push(word);
            let next_pending = if scored + 1 < pair.target.len() {
                Some((pair.clone(), scored + 1))
            } else {
                None
            };
            stack.push(EnumNode {
                state: out.next_state.clone(),
                prev: id,
                emitted,
                q: node.q + w.nmt * out.log_prob(id),
                coverage: covered_after(&node.coverage),
                lm_history: node.lm_history.clone(),
                pending: next_pending,
                steps: node.steps + 1,
            });
            continue;
        }
        // word moves over the full vocabulary
        for e in 0..scorer.target_vocab_size() as u32 {
            let token = vocab.token(e).unwrap().to_string();
            let lm_id = lm.id_of(&token);
            let q = node.q
                + w.nmt * out.log_probs[e as usize]
                + w.lm * lm.score_word(&node.lm_history, lm_id)
                + w.wp_word();
            let mut emitted = node.emitted.clone();
            emitted.push(token.clone());
            if token == EOS {
                match &best {
                    Some((bq, bt)) if (*bq > q) || (*bq == q && *bt <= emitted) => {}
                    _ => best = Some((q, emitted)),
                }
                continue;
            }
            stack.push(EnumNode {
                state: out.next_state.clone(),
                prev: e,
                emitted,
                q,
                coverage: covered_after(&node.coverage),
                lm_history: node.lm_history.extended(lm_id, lm.order()),
                pending: None,
                steps: node.steps + 1,
            });
        }
        // phrase moves anchored at the attention focus
        if params.beam_phrase == 0 {
            continue;
        }
        let Some(focus) = find_focus(&out.attention, params.tau_focus) else {
            continue;
        };
        let covered: Vec<bool> = node.coverage.iter().map(|&c| c > params.tau_cov).collect();
        for len in 1..=(source.len() - focus) {
            if covered[focus + len - 1] {
                break;
            }
            for pair in options.get(focus, len) {
                let first_id = vocab.index_or_unk(&pair.target[0]);
                let lm_ids: Vec<u32> = pair.target.iter().map(|t| lm.id_of(t)).collect();
                let q = node.q
                    + w.nmt * out.log_prob(first_id)
                    + w.lm * lm.score_phrase(&node.lm_history, &lm_ids)
                    + pair.target.len() as f64 * w.wp_phrase()
                    + w.pp
                    + len as f64 * w.swc
                    + w.phr * pair.log_p_src_given_tgt
                    + w.iphr * pair.log_p_tgt_given_src;
                let mut emitted = node.emitted.clone();
                emitted.push(pair.target[0].clone());
                let mut hist = node.lm_history.clone();
                for id in &lm_ids {
                    hist = hist.extended(*id, lm.order());
                }
                let pending = if pair.target.len() > 1 {
                    Some((pair.clone(), 1usize))
                } else {
                    None
                };
                stack.push(EnumNode {
                    state: out.next_state.clone(),
                    prev: first_id,
                    emitted,
                    q,
                    coverage: covered_after(&node.coverage),
                    lm_history: hist,
                    pending,
                    steps: node.steps + 1,
                });
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// programmable scorer

/// Scorer driven entirely by hand-written tables. Rows are keyed by the
/// sequence of previous words fed to `step`; missing keys fall back to the
/// default row. Attention rows are indexed by step with the last repeated.
#[derive(Clone)]
pub struct TableScorer {
    pub vocab_size: usize,
    pub rows: HashMap<Vec<u32>, Vec<f64>>,
    pub default_row: Vec<f64>,
    pub attention: Vec<Vec<f64>>,
    pub source_len: usize,
}

#[derive(Clone)]
pub struct TableState {
    pub history: Vec<u32>,
}

impl Scorer for TableScorer {
    type State = TableState;

    fn begin(&self, _source: &[u32]) -> hybridmt::error::Result<TableState> {
        Ok(TableState { history: Vec::new() })
    }

    fn step(&self, state: &TableState, prev_word: u32) -> StepOutput<TableState> {
        let mut history = state.history.clone();
        history.push(prev_word);
        let log_probs = self
            .rows
            .get(&history)
            .cloned()
            .unwrap_or_else(|| self.default_row.clone());
        assert_eq!(log_probs.len(), self.vocab_size);
        let idx = (history.len() - 1).min(self.attention.len() - 1);
        let attention = self.attention[idx].clone();
        assert_eq!(attention.len(), self.source_len);
        StepOutput {
            log_probs,
            attention,
            next_state: TableState { history },
        }
    }

    fn target_vocab_size(&self) -> usize {
        self.vocab_size
    }
}

impl TableScorer {
    /// Uniform fallback row for a vocabulary of `n` entries.
    pub fn uniform_row(n: usize) -> Vec<f64> {
        vec![-(n as f64).ln(); n]
    }
}

//! Scoring backends for the search: an inference-only attention
//! encoder-decoder, and a deterministic synthetic scorer for tests.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{add_assign, dot, log_softmax_inplace, sigmoid, softmax_inplace, Matrix};
use crate::vocab::UNK_ID;
use crate::weights::{DecoderGruParams, GruParams, ModelWeights};

/// Source-side annotation vectors h_1..h_J, each of dimension 2*hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotations {
    pub vectors: Vec<Vec<f64>>,
}

impl Annotations {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// One decoder step: log-distribution over the target vocabulary, attention
/// over source positions, and the successor state.
#[derive(Debug, Clone)]
pub struct StepOutput<S> {
    pub log_probs: Vec<f64>,
    pub attention: Vec<f64>,
    pub next_state: S,
}

impl<S> StepOutput<S> {
    /// Log-probability of `word`; words outside the vocabulary score as UNK.
    pub fn log_prob(&self, word: u32) -> f64 {
        let idx = if (word as usize) < self.log_probs.len() {
            word as usize
        } else {
            UNK_ID as usize
        };
        self.log_probs[idx]
    }
}

/// A per-hypothesis scoring backend. `begin` consumes the source sentence and
/// returns the state before the first target word; `step` never mutates its
/// input state.
pub trait Scorer {
    type State: Clone;
    fn begin(&self, source: &[u32]) -> Result<Self::State>;
    fn step(&self, state: &Self::State, prev_word: u32) -> StepOutput<Self::State>;
    fn target_vocab_size(&self) -> usize;
}

fn gru_cell(p: &GruParams, x: &[f64], h: &[f64], extra: Option<(&DecoderGruParams, &[f64])>) -> Vec<f64> {
    let n = h.len();
    let mut z = p.wz.matvec(x);
    add_assign(&mut z, &p.uz.matvec(h));
    add_assign(&mut z, &p.bz);
    let mut r = p.wr.matvec(x);
    add_assign(&mut r, &p.ur.matvec(h));
    add_assign(&mut r, &p.br);
    if let Some((dec, ctx)) = extra {
        add_assign(&mut z, &dec.cz.matvec(ctx));
        add_assign(&mut r, &dec.cr.matvec(ctx));
    }
    for v in z.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in r.iter_mut() {
        *v = sigmoid(*v);
    }
    let gated: Vec<f64> = (0..n).map(|i| r[i] * h[i]).collect();
    let mut cand = p.wh.matvec(x);
    add_assign(&mut cand, &p.uh.matvec(&gated));
    add_assign(&mut cand, &p.bh);
    if let Some((dec, ctx)) = extra {
        add_assign(&mut cand, &dec.ch.matvec(ctx));
    }
    for v in cand.iter_mut() {
        *v = v.tanh();
    }
    (0..n)
        .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
        .collect()
}

fn embedding_row(table: &Matrix, word: u32) -> Result<&[f64]> {
    if (word as usize) >= table.rows {
        return Err(Error::IndexOutOfRange(word, table.rows));
    }
    Ok(table.row(word as usize))
}

/// Bidirectional GRU encoder: annotation j is the concatenation of the
/// forward state after reading f_1..f_j and the backward state after reading
/// f_J..f_j.
pub fn encode(source: &[u32], w: &ModelWeights) -> Result<Annotations> {
    if source.is_empty() {
        return Err(Error::Search("empty source sentence".into()));
    }
    let h = w.hidden;
    let mut fwd_states = Vec::with_capacity(source.len());
    let mut state = vec![0.0; h];
    for &tok in source {
        let x = embedding_row(&w.src_embed, tok)?;
        state = gru_cell(&w.enc_fwd, x, &state, None);
        fwd_states.push(state.clone());
    }
    let mut bwd_states = vec![Vec::new(); source.len()];
    let mut state = vec![0.0; h];
    for (j, &tok) in source.iter().enumerate().rev() {
        let x = embedding_row(&w.src_embed, tok)?;
        state = gru_cell(&w.enc_bwd, x, &state, None);
        bwd_states[j] = state.clone();
    }
    let vectors = fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(f, b)| {
            let mut v = f;
            v.extend(b);
            v
        })
        .collect();
    Ok(Annotations { vectors })
}

/// Decoder start state from the backward encoder's first state.
pub fn initial_state(ann: &Annotations, w: &ModelWeights) -> Vec<f64> {
    assert!(!ann.is_empty());
    let h = w.hidden;
    let bwd_first = &ann.vectors[0][h..2 * h];
    let mut s = w.init_w.matvec(bwd_first);
    add_assign(&mut s, &w.init_b);
    for v in s.iter_mut() {
        *v = v.tanh();
    }
    s
}

/// One decoder step: additive attention over the annotations from the
/// previous state, context as the attention-weighted annotation sum, GRU
/// update, then a tanh readout into the output softmax.
pub fn decoder_step(
    state: &[f64],
    prev_word: u32,
    ann: &Annotations,
    w: &ModelWeights,
) -> Result<StepOutput<Vec<f64>>> {
    let proj_s = w.att_w.matvec(state);
    let mut attention: Vec<f64> = ann
        .vectors
        .iter()
        .map(|hj| {
            let mut e = w.att_u.matvec(hj);
            add_assign(&mut e, &proj_s);
            add_assign(&mut e, &w.att_b);
            for v in e.iter_mut() {
                *v = v.tanh();
            }
            dot(&w.att_v, &e)
        })
        .collect();
    softmax_inplace(&mut attention);
    let mut context = vec![0.0; 2 * w.hidden];
    for (alpha, hj) in attention.iter().zip(&ann.vectors) {
        for (c, x) in context.iter_mut().zip(hj) {
            *c += alpha * x;
        }
    }
    let prev = if (prev_word as usize) < w.tgt_embed.rows {
        prev_word
    } else {
        UNK_ID
    };
    let y = embedding_row(&w.tgt_embed, prev)?;
    let next_state = gru_cell(&w.dec.gru, y, state, Some((&w.dec, &context)));
    let mut readout = w.ro_s.matvec(&next_state);
    add_assign(&mut readout, &w.ro_y.matvec(y));
    add_assign(&mut readout, &w.ro_c.matvec(&context));
    add_assign(&mut readout, &w.ro_b);
    for v in readout.iter_mut() {
        *v = v.tanh();
    }
    let mut log_probs = w.out_w.matvec(&readout);
    add_assign(&mut log_probs, &w.out_b);
    log_softmax_inplace(&mut log_probs);
    Ok(StepOutput {
        log_probs,
        attention,
        next_state,
    })
}

/// The neural scorer: immutable weights shared across decodes, per-hypothesis
/// state owned by the hypothesis.
#[derive(Clone)]
pub struct NmtScorer {
    pub weights: Arc<ModelWeights>,
}

#[derive(Clone)]
pub struct NmtState {
    pub hidden: Vec<f64>,
    pub annotations: Arc<Annotations>,
}

impl NmtScorer {
    pub fn new(weights: Arc<ModelWeights>) -> Self {
        NmtScorer { weights }
    }
}

impl Scorer for NmtScorer {
    type State = NmtState;

    fn begin(&self, source: &[u32]) -> Result<NmtState> {
        let ann = encode(source, &self.weights)?;
        let hidden = initial_state(&ann, &self.weights);
        Ok(NmtState {
            hidden,
            annotations: Arc::new(ann),
        })
    }

    fn step(&self, state: &NmtState, prev_word: u32) -> StepOutput<NmtState> {
        let out = decoder_step(&state.hidden, prev_word, &state.annotations, &self.weights)
            .expect("consistent state dimensions");
        StepOutput {
            log_probs: out.log_probs,
            attention: out.attention,
            next_state: NmtState {
                hidden: out.next_state,
                annotations: Arc::clone(&state.annotations),
            },
        }
    }

    fn target_vocab_size(&self) -> usize {
        self.weights.tgt_vocab
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn hash_unit(x: u64) -> f64 {
    // 53 mantissa bits -> [0, 1)
    (splitmix64(x) >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic scorer whose outputs depend only on (seed, source, target
/// prefix). Attention mass drifts left to right across steps so coverage
/// logic gets exercised.
#[derive(Clone)]
pub struct SyntheticScorer {
    seed: u64,
    vocab_size: usize,
    peaking: f64,
}

#[derive(Clone)]
pub struct SyntheticState {
    source_hash: u64,
    prefix_hash: u64,
    steps: usize,
    source_len: usize,
}

impl SyntheticScorer {
    pub fn new(seed: u64, vocab_size: usize, peaking: f64) -> Self {
        assert!(vocab_size >= 3);
        SyntheticScorer {
            seed,
            vocab_size,
            peaking,
        }
    }
}

impl Scorer for SyntheticScorer {
    type State = SyntheticState;

    fn begin(&self, source: &[u32]) -> Result<SyntheticState> {
        if source.is_empty() {
            return Err(Error::Search("empty source sentence".into()));
        }
        let mut h = splitmix64(self.seed ^ 0x5eed_0001);
        for &tok in source {
            h = splitmix64(h ^ u64::from(tok));
        }
        Ok(SyntheticState {
            source_hash: h,
            prefix_hash: splitmix64(self.seed ^ 0x5eed_0002),
            steps: 0,
            source_len: source.len(),
        })
    }

    fn step(&self, state: &SyntheticState, prev_word: u32) -> StepOutput<SyntheticState> {
        let prefix_hash = splitmix64(state.prefix_hash ^ u64::from(prev_word).wrapping_mul(0x100_0193));
        let base = splitmix64(state.source_hash ^ prefix_hash);
        let j = state.source_len;
        let mut log_probs: Vec<f64> = (0..self.vocab_size)
            .map(|w| self.peaking * hash_unit(base ^ (w as u64).wrapping_mul(0xabcd_ef01)))
            .collect();
        // push the end token up as the derivation approaches source length
        let progress = state.steps as f64 / j as f64;
        log_probs[crate::vocab::EOS_ID as usize] += self.peaking * 1.5 * (progress - 0.6);
        log_softmax_inplace(&mut log_probs);
        let center = state.steps.min(j - 1) as f64;
        let mut attention: Vec<f64> = (0..j)
            .map(|pos| {
                let d = pos as f64 - center;
                -1.5 * d * d + hash_unit(base ^ 0xa77e ^ (pos as u64).wrapping_mul(0x9731))
            })
            .collect();
        softmax_inplace(&mut attention);
        StepOutput {
            log_probs,
            attention,
            next_state: SyntheticState {
                source_hash: state.source_hash,
                prefix_hash,
                steps: state.steps + 1,
                source_len: j,
            },
        }
    }

    fn target_vocab_size(&self) -> usize {
        self.vocab_size
    }
}

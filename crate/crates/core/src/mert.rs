//! Minimum error rate training: exact line search along weight directions
//! using the piecewise-linear upper envelope of candidate scores, iterated
//! over coordinate and random directions to maximize corpus BLEU.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{accumulate, corpus_bleu, BleuStats};
use crate::loglinear::{combine, FeatureVector, FeatureWeights};

#[derive(Debug, Clone)]
pub struct Candidate {
    pub tokens: Vec<String>,
    pub features: FeatureVector,
    stats: BleuStats,
}

/// Per-sentence candidate lists merged across tuning iterations, with
/// duplicate (target, features) entries removed. BLEU statistics are
/// precomputed against the references at insertion.
#[derive(Debug, Clone, Default)]
pub struct NBestPool {
    sentences: Vec<Vec<Candidate>>,
}

fn features_bits(f: &FeatureVector) -> [u64; 8] {
    [
        f.nmt.to_bits(),
        f.lm.to_bits(),
        f.wp_word.to_bits(),
        f.wp_phrase.to_bits(),
        f.pp.to_bits(),
        f.swc.to_bits(),
        f.phr.to_bits(),
        f.iphr.to_bits(),
    ]
}

impl NBestPool {
    pub fn new(num_sentences: usize) -> Self {
        NBestPool {
            sentences: vec![Vec::new(); num_sentences],
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.iter().all(Vec::is_empty)
    }

    pub fn candidates(&self, sentence: usize) -> &[Candidate] {
        &self.sentences[sentence]
    }

    /// Adds a candidate unless an identical (target, features) entry exists.
    pub fn add<R: AsRef<str>>(
        &mut self,
        sentence: usize,
        tokens: Vec<String>,
        features: FeatureVector,
        refs: &[Vec<R>],
    ) {
        let dup = self.sentences[sentence].iter().any(|c| {
            c.tokens == tokens && features_bits(&c.features) == features_bits(&features)
        });
        if dup {
            return;
        }
        let stats = accumulate(&tokens, refs);
        self.sentences[sentence].push(Candidate {
            tokens,
            features,
            stats,
        });
    }

    /// Argmax candidate index per sentence under `w`; ties keep the earliest
    /// pooled candidate. Sentences without candidates yield None.
    pub fn select(&self, w: &FeatureWeights) -> Vec<Option<usize>> {
        self.sentences
            .iter()
            .map(|cands| {
                let mut best: Option<(usize, f64)> = None;
                for (i, c) in cands.iter().enumerate() {
                    let s = combine(w, &c.features);
                    if best.map_or(true, |(_, b)| s > b) {
                        best = Some((i, s));
                    }
                }
                best.map(|(i, _)| i)
            })
            .collect()
    }

    /// Corpus BLEU of the per-sentence argmax selection under `w`.
    pub fn selection_bleu(&self, w: &FeatureWeights) -> f64 {
        let sel = self.select(w);
        let mut total = BleuStats::default();
        for (cands, pick) in self.sentences.iter().zip(sel) {
            if let Some(i) = pick {
                total = total.add(&cands[i].stats);
            }
        }
        corpus_bleu(&total)
    }

    /// Best achievable corpus BLEU by free per-sentence candidate choice,
    /// greedily refined; upper-bound oracle used in tests.
    pub fn oracle_bleu(&self) -> f64 {
        // greedy coordinate ascent over sentences until stable
        let mut picks: Vec<usize> = self.sentences.iter().map(|_| 0).collect();
        let mut total = BleuStats::default();
        for (s, cands) in self.sentences.iter().enumerate() {
            if !cands.is_empty() {
                total = total.add(&cands[picks[s]].stats);
            }
        }
        let mut best = corpus_bleu(&total);
        loop {
            let mut improved = false;
            for (s, cands) in self.sentences.iter().enumerate() {
                if cands.is_empty() {
                    continue;
                }
                for i in 0..cands.len() {
                    if i == picks[s] {
                        continue;
                    }
                    let mut t = BleuStats::default();
                    for (s2, cands2) in self.sentences.iter().enumerate() {
                        if cands2.is_empty() {
                            continue;
                        }
                        let pick = if s2 == s { i } else { picks[s2] };
                        t = t.add(&cands2[pick].stats);
                    }
                    let b = corpus_bleu(&t);
                    if b > best + 1e-15 {
                        best = b;
                        picks[s] = i;
                        improved = true;
                    }
                }
            }
            if !improved {
                return best;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    /// Optimal step along the direction.
    pub gamma: f64,
    /// Corpus BLEU at the optimum.
    pub metric: f64,
    /// Interval of equivalent optima around gamma.
    pub interval: (f64, f64),
}

/// Upper envelope of lines y = a + gamma*b: returns (line index, start gamma)
/// segments, the first starting at -inf.
fn upper_envelope(lines: &[(f64, f64)]) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    // slope ascending; within a slope, intercept descending so the dedup
    // below keeps the only line that can reach the envelope
    order.sort_by(|&i, &j| {
        lines[i]
            .1
            .total_cmp(&lines[j].1)
            .then(lines[j].0.total_cmp(&lines[i].0))
            .then(i.cmp(&j))
    });
    order.dedup_by(|next, prev| lines[*next].1 == lines[*prev].1);
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &i in &order {
        let (a, b) = lines[i];
        loop {
            match hull.last() {
                None => {
                    hull.push((i, f64::NEG_INFINITY));
                    break;
                }
                Some(&(top, top_start)) => {
                    let (ta, tb) = lines[top];
                    if (b - tb).abs() == 0.0 {
                        // same slope survives dedup only if intercept equal; skip
                        if a <= ta {
                            break;
                        }
                        hull.pop();
                        continue;
                    }
                    let x = (ta - a) / (b - tb);
                    if x <= top_start {
                        hull.pop();
                        continue;
                    }
                    hull.push((i, x));
                    break;
                }
            }
        }
    }
    hull
}

/// Exact line search: computes, per sentence, the upper envelope of candidate
/// scores as a function of the step gamma along `direction`, then evaluates
/// corpus BLEU on every inter-breakpoint interval and returns the midpoint of
/// the best one.
pub fn line_search(
    pool: &NBestPool,
    w: &FeatureWeights,
    direction: &FeatureWeights,
    ) -> Result<LineSearchResult> {
    let dvec = direction.to_vec();
    if dvec.iter().all(|&x| x == 0.0) {
        return Err(Error::Mert("zero direction".into()));
    }
    // per-sentence envelopes and switch events (gamma, sentence, candidate)
    struct Sentence<'a> {
        cands: &'a [Candidate],
        env: Vec<(usize, f64)>,
    }
    let mut sents = Vec::new();
    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    for cands in (0..pool.len()).map(|s| pool.candidates(s)) {
        if cands.is_empty() {
            continue;
        }
        let lines: Vec<(f64, f64)> = cands
            .iter()
            .map(|c| (combine(w, &c.features), combine(direction, &c.features)))
            .collect();
        let env = upper_envelope(&lines);
        for &(idx, start) in env.iter().skip(1) {
            events.push((start, sents.len(), idx));
        }
        sents.push(Sentence { cands, env });
    }
    if sents.is_empty() {
        return Err(Error::Mert("empty pool".into()));
    }
    let mut picks: Vec<usize> = sents.iter().map(|s| s.env[0].0).collect();
    let mut total = BleuStats::default();
    for (s, pick) in sents.iter().zip(&picks) {
        total = total.add(&s.cands[*pick].stats);
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut boundaries: Vec<f64> = events.iter().map(|e| e.0).collect();
    boundaries.dedup();
    let mut best_bleu = corpus_bleu(&total);
    let mut best_interval = (
        f64::NEG_INFINITY,
        boundaries.first().copied().unwrap_or(f64::INFINITY),
    );
    let mut ev = 0usize;
    for (bi, &boundary) in boundaries.iter().enumerate() {
        while ev < events.len() && events[ev].0 <= boundary {
            let (_, s, idx) = events[ev];
            // swap this sentence's pick
            let mut t = BleuStats::default();
            picks[s] = idx;
            for (sd, pick) in sents.iter().zip(&picks) {
                t = t.add(&sd.cands[*pick].stats);
            }
            total = t;
            ev += 1;
        }
        let left = boundary;
        let right = boundaries.get(bi + 1).copied().unwrap_or(f64::INFINITY);
        let bleu = corpus_bleu(&total);
        if bleu > best_bleu {
            best_bleu = bleu;
            best_interval = (left, right);
        }
    }
    let gamma = match best_interval {
        (l, r) if l.is_infinite() && r.is_infinite() => 0.0,
        (l, r) if l.is_infinite() => r - 1.0,
        (l, r) if r.is_infinite() => l + 1.0,
        (l, r) => 0.5 * (l + r),
    };
    // a gamma-0 interval always exists, so the optimum never degrades; keep
    // gamma at 0 when nothing beats the current selection
    let at_zero = pool.selection_bleu(w);
    if best_bleu <= at_zero {
        return Ok(LineSearchResult {
            gamma: 0.0,
            metric: at_zero,
            interval: best_interval,
        });
    }
    Ok(LineSearchResult {
        gamma,
        metric: best_bleu,
        interval: best_interval,
    })
}

fn add_scaled(w: &FeatureWeights, d: &FeatureWeights, gamma: f64) -> FeatureWeights {
    let split = w.wp_split.is_some();
    let wv = w.to_vec();
    let dv = d.to_vec();
    let v: Vec<f64> = wv.iter().zip(&dv).map(|(a, b)| a + gamma * b).collect();
    // rescale so the largest weight magnitude is 1; argmax-invariant
    let maxabs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let v = if maxabs > 0.0 {
        v.iter().map(|x| x / maxabs).collect()
    } else {
        v
    };
    FeatureWeights::from_vec(&v, split)
}

const MIN_GAIN: f64 = 1e-7;

/// Iterates exact line search over coordinate directions plus seeded random
/// directions until no improvement, across `restarts` starting points.
/// Never returns weights whose pool-selection BLEU is below the initial one.
pub fn optimize(
    pool: &NBestPool,
    init: &FeatureWeights,
    restarts: usize,
    seed: u64,
) -> Result<FeatureWeights> {
    if pool.is_empty() {
        return Err(Error::Mert("empty pool".into()));
    }
    let split = init.wp_split.is_some();
    let dims = init.to_vec().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_w = init.clone();
    let mut best_bleu = pool.selection_bleu(init);
    for restart in 0..restarts.max(1) {
        let mut w = if restart == 0 {
            init.clone()
        } else {
            let v: Vec<f64> = init
                .to_vec()
                .iter()
                .map(|x| x + rng.gen_range(-1.0..1.0))
                .collect();
            FeatureWeights::from_vec(&v, split)
        };
        let mut cur = pool.selection_bleu(&w);
        loop {
            let mut improved = false;
            let mut directions: Vec<Vec<f64>> = (0..dims)
                .map(|i| {
                    let mut v = vec![0.0; dims];
                    v[i] = 1.0;
                    v
                })
                .collect();
            for _ in 0..4 {
                directions.push((0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect());
            }
            for dv in directions {
                if dv.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let d = FeatureWeights::from_vec(&dv, split);
                let res = line_search(pool, &w, &d)?;
                if res.metric > cur + MIN_GAIN {
                    let w2 = add_scaled(&w, &d, res.gamma);
                    let b2 = pool.selection_bleu(&w2);
                    if b2 > cur + MIN_GAIN {
                        w = w2;
                        cur = b2;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if cur > best_bleu {
            best_bleu = cur;
            best_w = w;
        }
    }
    Ok(best_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(nmt: f64, lm: f64) -> FeatureVector {
        FeatureVector {
            nmt,
            lm,
            ..Default::default()
        }
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn refs(s: &str) -> Vec<Vec<String>> {
        vec![toks(s)]
    }

    #[test]
    fn single_candidate_constant_metric() {
        let mut pool = NBestPool::new(1);
        pool.add(0, toks("a b c d"), fv(-1.0, -2.0), &refs("a b c d"));
        let w = FeatureWeights::nmt_only();
        let d = FeatureWeights::from_vec(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], false);
        let r = line_search(&pool, &w, &d).unwrap();
        assert_eq!(r.gamma, 0.0);
        assert_eq!(r.metric, 1.0);
    }

    #[test]
    fn zero_direction_rejected() {
        let mut pool = NBestPool::new(1);
        pool.add(0, toks("a b c d"), fv(-1.0, -2.0), &refs("a b c d"));
        let w = FeatureWeights::nmt_only();
        let d = FeatureWeights::zeros();
        assert!(line_search(&pool, &w, &d).is_err());
    }

    #[test]
    fn line_search_matches_grid_scan() {
        // 2 sentences x 2 candidates, hand-chosen features
        let mut pool = NBestPool::new(2);
        pool.add(0, toks("good one here now"), fv(-1.0, -3.0), &refs("good one here now"));
        pool.add(0, toks("bad guess here now"), fv(-0.5, -1.0), &refs("good one here now"));
        pool.add(1, toks("fine other text too"), fv(-2.0, -1.0), &refs("fine other text too"));
        pool.add(1, toks("poor other text too"), fv(-1.0, -4.0), &refs("fine other text too"));
        let w = FeatureWeights::nmt_only();
        let d = FeatureWeights::from_vec(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], false);
        let r = line_search(&pool, &w, &d).unwrap();
        let mut grid_best = f64::MIN;
        for i in 0..100_000 {
            let gamma = -10.0 + 20.0 * (i as f64) / 100_000.0;
            let wg = add_scaled(&w, &d, gamma);
            grid_best = grid_best.max(pool.selection_bleu(&wg));
        }
        assert!(
            (r.metric - grid_best).abs() < 1e-9,
            "line search {} vs grid {}",
            r.metric,
            grid_best
        );
        assert!(pool.selection_bleu(&add_scaled(&w, &d, r.gamma)) >= grid_best - 1e-9);
    }

    #[test]
    fn optimize_reaches_oracle_on_separable_pool() {
        // the LM feature separates the matching candidate in every sentence
        let mut pool = NBestPool::new(3);
        for (s, r) in ["a b c d", "e f g h", "i j k l"].iter().enumerate() {
            pool.add(s, toks(r), fv(-2.0, -1.0), &refs(r));
            pool.add(s, toks("x x x x"), fv(-1.0, -5.0), &refs(r));
        }
        let init = FeatureWeights::nmt_only();
        let tuned = optimize(&pool, &init, 2, 7).unwrap();
        let achieved = pool.selection_bleu(&tuned);
        assert!((achieved - pool.oracle_bleu()).abs() < 1e-12);
        assert_eq!(achieved, 1.0);
    }

    #[test]
    fn optimize_deterministic_and_non_degrading() {
        let mut pool = NBestPool::new(2);
        pool.add(0, toks("a b c d"), fv(-1.0, -2.0), &refs("a b c d"));
        pool.add(0, toks("a b c x"), fv(-0.9, -2.5), &refs("a b c d"));
        pool.add(1, toks("p q r s"), fv(-1.5, -0.5), &refs("p q r s"));
        let init = FeatureWeights::default();
        let w1 = optimize(&pool, &init, 1, 42).unwrap();
        let w2 = optimize(&pool, &init, 1, 42).unwrap();
        assert_eq!(w1, w2);
        assert!(pool.selection_bleu(&w1) >= pool.selection_bleu(&init));
    }

    #[test]
    fn already_optimal_init_is_kept() {
        let mut pool = NBestPool::new(1);
        pool.add(0, toks("a b c d"), fv(-1.0, 0.0), &refs("a b c d"));
        pool.add(0, toks("x y z w"), fv(-2.0, 0.0), &refs("a b c d"));
        let init = FeatureWeights::nmt_only();
        let before = pool.selection_bleu(&init);
        assert_eq!(before, 1.0);
        let tuned = optimize(&pool, &init, 3, 1).unwrap();
        assert_eq!(pool.selection_bleu(&tuned), 1.0);
    }

    #[test]
    fn duplicate_candidates_not_pooled_twice() {
        let mut pool = NBestPool::new(1);
        pool.add(0, toks("a b"), fv(-1.0, 0.0), &refs("a b"));
        pool.add(0, toks("a b"), fv(-1.0, 0.0), &refs("a b"));
        pool.add(0, toks("a b"), fv(-1.0, -0.5), &refs("a b"));
        assert_eq!(pool.candidates(0).len(), 2);
    }

    #[test]
    fn scale_invariance_of_selection() {
        let mut pool = NBestPool::new(1);
        pool.add(0, toks("a b c d"), fv(-1.0, -2.0), &refs("a b c d"));
        pool.add(0, toks("a x c d"), fv(-0.8, -3.0), &refs("a b c d"));
        let w = FeatureWeights::default();
        let sel = pool.select(&w);
        let scaled = FeatureWeights::from_vec(
            &w.to_vec().iter().map(|x| 3.5 * x).collect::<Vec<_>>(),
            false,
        );
        assert_eq!(pool.select(&scaled), sel);
    }
}

//! Pairwise model over the event types of two related trigger candidates.
//!
//! The score of a label pair `(t, t′)` is
//! `w_A[t]·f_i + w_A[t′]·f_i′ + w_B{t, t′}·g_rel`, where `f_i`, `f_i′` are the
//! trigger features of each side and `g_rel` the relational features of the
//! pair (plus a bias). `w_B` is indexed by the unordered label pair through a
//! second hashing step, so identical sides give a symmetric table.

use crate::corpus::{Document, Span};
use crate::error::{Error, Result};
use crate::features::{conjoin, coreferent, subjects_and_objects, FeatureVector, Featurizer};
use crate::scalar::{dot_sparse, log_sum_exp, Real};
use crate::schema::{LabelSchema, NONE_INDEX};

/// `[w_A: nt × 2^bits | w_B: 2^bits]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairLayout {
    pub nt: usize,
    pub hash_bits: u32,
}

impl PairLayout {
    pub fn new(nt: usize, hash_bits: u32) -> Self {
        Self { nt, hash_bits }
    }

    pub fn dim(&self) -> usize {
        1usize << self.hash_bits
    }

    pub fn pair_block(&self) -> usize {
        self.nt * self.dim()
    }

    pub fn len(&self) -> usize {
        self.pair_block() + self.dim()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn pair_code(&self, t: usize, u: usize) -> u32 {
        let (lo, hi) = if t <= u { (t, u) } else { (u, t) };
        (lo * self.nt + hi) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub first: FeatureVector,
    pub second: FeatureVector,
    pub relational: FeatureVector,
}

impl PairFeatures {
    pub fn extract(featurizer: &Featurizer, doc: &Document, first: &Span, second: &Span) -> Self {
        let mut rel = featurizer.pair_relational_features(doc, first, second).entries().to_vec();
        rel.push((crate::features::feature_index("pair_bias", "1", featurizer.hash_bits()), 1.0));
        Self {
            first: featurizer.trigger_features(doc, first),
            second: featurizer.trigger_features(doc, second),
            relational: FeatureVector::from_raw(rel),
        }
    }
}

/// Trigger pairs that share a sentence, or whose subjects/objects corefer.
/// Pairs are `(i, i′)` with `i < i′`, in lexicographic order.
pub fn select_pairs(doc: &Document, triggers: &[Span]) -> Vec<(usize, usize)> {
    let args: Vec<Vec<(usize, usize)>> = triggers.iter().map(|t| subjects_and_objects(doc, t)).collect();
    let mut out = Vec::new();
    for i in 0..triggers.len() {
        for k in i + 1..triggers.len() {
            let linked = triggers[i].sentence == triggers[k].sentence
                || args[i].iter().any(|&x| args[k].iter().any(|&y| coreferent(doc, x, y)));
            if linked {
                out.push((i, k));
            }
        }
    }
    out
}

/// Raw pair scores, row-major `nt × nt`.
pub fn pair_scores<S: Real>(layout: &PairLayout, params: &[S], f: &PairFeatures) -> Vec<S> {
    let (nt, d) = (layout.nt, layout.dim());
    let bits = layout.hash_bits;
    let sa: Vec<S> = (0..nt).map(|t| dot_sparse(params, t * d, &f.first)).collect();
    let sb: Vec<S> = (0..nt).map(|t| dot_sparse(params, t * d, &f.second)).collect();
    let mut rel = vec![S::zero(); nt * nt];
    let off = layout.pair_block();
    for t in 0..nt {
        for u in t..nt {
            let code = layout.pair_code(t, u);
            let mut s = S::zero();
            for &(idx, v) in f.relational.entries() {
                s += params[off + conjoin(idx, code, bits) as usize] * S::lit(v);
            }
            rel[t * nt + u] = s;
            rel[u * nt + t] = s;
        }
    }
    (0..nt * nt).map(|i| sa[i / nt] + sb[i % nt] + rel[i]).collect()
}

/// `log p(t, t′ | pair)`: a log-softmax over all `nt²` cells.
pub fn pair_log_table<S: Real>(layout: &PairLayout, params: &[S], f: &PairFeatures) -> Vec<S> {
    let scores = pair_scores(layout, params, f);
    let z = log_sum_exp(&scores);
    scores.into_iter().map(|s| s - z).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairInstance {
    pub features: PairFeatures,
    pub gold: (usize, usize),
}

/// Gold event types of two trigger candidates by exact span match.
pub fn project_pair_gold(doc: &Document, schema: &LabelSchema, first: &Span, second: &Span) -> (usize, usize) {
    let label = |s: &Span| {
        doc.gold_events
            .iter()
            .find(|e| e.trigger.offsets() == s.offsets())
            .and_then(|e| schema.event_types.get(&e.event_type))
            .unwrap_or(NONE_INDEX)
    };
    (label(first), label(second))
}

pub fn objective_into<S: Real>(layout: &PairLayout, params: &[S], data: &[PairInstance], lambda: S, grad: &mut [S]) -> S {
    let (nt, d, bits) = (layout.nt, layout.dim(), layout.hash_bits);
    let off = layout.pair_block();
    grad.iter_mut().for_each(|g| *g = S::zero());
    let mut value = S::zero();
    let mut row = vec![S::zero(); nt];
    let mut col = vec![S::zero(); nt];
    for inst in data {
        let f = &inst.features;
        let table = pair_log_table(layout, params, f);
        let (g1, g2) = inst.gold;
        value -= table[g1 * nt + g2];
        row.iter_mut().for_each(|x| *x = S::zero());
        col.iter_mut().for_each(|x| *x = S::zero());
        let probs: Vec<S> = table.iter().map(|x| x.exp()).collect();
        for t in 0..nt {
            for u in 0..nt {
                row[t] += probs[t * nt + u];
                col[u] += probs[t * nt + u];
            }
        }
        row[g1] -= S::one();
        col[g2] -= S::one();
        for t in 0..nt {
            for &(idx, v) in f.first.entries() {
                grad[t * d + idx as usize] += row[t] * S::lit(v);
            }
            for &(idx, v) in f.second.entries() {
                grad[t * d + idx as usize] += col[t] * S::lit(v);
            }
        }
        for t in 0..nt {
            for u in t..nt {
                let mut coef = probs[t * nt + u];
                if u != t {
                    coef += probs[u * nt + t];
                }
                if (t, u) == (g1, g2) || (u, t) == (g1, g2) {
                    coef -= S::one();
                }
                if coef == S::zero() {
                    continue;
                }
                let code = layout.pair_code(t, u);
                for &(idx, v) in f.relational.entries() {
                    grad[off + conjoin(idx, code, bits) as usize] += coef * S::lit(v);
                }
            }
        }
    }
    if lambda != S::zero() {
        let two = S::lit(2.0);
        for (g, &w) in grad.iter_mut().zip(params) {
            if w != S::zero() {
                value += lambda * w * w;
                *g += two * lambda * w;
            }
        }
    }
    value
}

pub fn objective_and_gradient<S: Real>(
    layout: &PairLayout,
    params: &[S],
    data: &[PairInstance],
    lambda: S,
) -> Result<(S, Vec<S>)> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet("event-pair"));
    }
    let mut grad = vec![S::zero(); params.len()];
    let v = objective_into(layout, params, data, lambda, &mut grad);
    Ok((v, grad))
}

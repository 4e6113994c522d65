//! Linear-chain CRF over BIO tags, used both for entity mentions and for
//! trigger candidates.
//!
//! Parameters are one flat vector: a `2^hash_bits` block of emission weights
//! per tag, followed by the `tags × tags` transition matrix. Transitions are
//! unconstrained; a stray `I-ℓ` that does not continue a segment is ignored
//! when paths are read back as spans.

mod lattice;

use crate::corpus::{Document, EntityCandidate, Span, TriggerCandidate};
use crate::features::{FeatureVector, Featurizer};
use crate::scalar::{add_sparse, dot_sparse, Real};
use crate::schema::LabelSet;

pub use lattice::{Lattice, Posterior};

pub const OUTSIDE: usize = 0;

/// `O` followed by `B-ℓ, I-ℓ` for each non-NONE label, in label order, so
/// label index `l ≥ 1` owns tags `2l - 1` and `2l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioTags {
    labels: Vec<String>,
}

impl BioTags {
    pub fn new(labels: &[String]) -> Self {
        Self {
            labels: labels.to_vec(),
        }
    }

    pub fn from_label_set(set: &LabelSet) -> Self {
        Self::new(set.non_none())
    }

    pub fn len(&self) -> usize {
        2 * self.labels.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Label names without NONE; label index `l` is `labels()[l - 1]`.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, l: usize) -> &str {
        &self.labels[l - 1]
    }

    pub fn begin(&self, l: usize) -> usize {
        2 * l - 1
    }

    pub fn inside(&self, l: usize) -> usize {
        2 * l
    }

    pub fn label_of(&self, tag: usize) -> Option<usize> {
        (tag != OUTSIDE).then_some(tag.div_ceil(2))
    }

    pub fn is_begin(&self, tag: usize) -> bool {
        tag % 2 == 1
    }

    pub fn tag_name(&self, tag: usize) -> String {
        match self.label_of(tag) {
            None => "O".into(),
            Some(l) if self.is_begin(tag) => format!("B-{}", self.label_name(l)),
            Some(l) => format!("I-{}", self.label_name(l)),
        }
    }

    /// Maximal `B-ℓ I-ℓ*` segments of a path as `(start, end, label)`.
    pub fn segments(&self, path: &[usize]) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut t = 0;
        while t < path.len() {
            if self.is_begin(path[t]) {
                let l = self.label_of(path[t]).unwrap();
                let inside = self.inside(l);
                let mut end = t + 1;
                while end < path.len() && path[end] == inside {
                    end += 1;
                }
                out.push((t, end, l));
                t = end;
            } else {
                t += 1;
            }
        }
        out
    }

    /// Gold tag sequence. Overlapping spans keep the longer one (the earlier
    /// one on equal length).
    pub fn encode(&self, len: usize, spans: &[(usize, usize, usize)]) -> Vec<usize> {
        let mut order: Vec<&(usize, usize, usize)> = spans.iter().collect();
        order.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        let mut taken = vec![false; len];
        let mut tags = vec![OUTSIDE; len];
        for &&(s, e, l) in &order {
            if s >= e || e > len || taken[s..e].iter().any(|&x| x) {
                continue;
            }
            tags[s] = self.begin(l);
            for t in s + 1..e {
                tags[t] = self.inside(l);
            }
            taken[s..e].iter_mut().for_each(|x| *x = true);
        }
        tags
    }
}

/// One training sentence: per-token features and gold tag sequence.
#[derive(Debug, Clone)]
pub struct CrfInstance {
    pub features: Vec<FeatureVector>,
    pub gold: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<S> {
    pub tags: BioTags,
    pub hash_bits: u32,
    pub params: Vec<S>,
}

/// Labeled span proposed by the k-best paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanProposal {
    pub span: Span,
    pub label: usize,
    pub score: f64,
}

pub fn num_params(tags: usize, hash_bits: u32) -> usize {
    tags * (1usize << hash_bits) + tags * tags
}

impl<S: Real> ChainModel<S> {
    pub fn zeros(tags: BioTags, hash_bits: u32) -> Self {
        let n = num_params(tags.len(), hash_bits);
        Self {
            tags,
            hash_bits,
            params: vec![S::zero(); n],
        }
    }

    pub fn from_params(tags: BioTags, hash_bits: u32, params: Vec<S>) -> Self {
        assert_eq!(params.len(), num_params(tags.len(), hash_bits), "parameter length");
        Self {
            tags,
            hash_bits,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        1usize << self.hash_bits
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn transition_offset(&self) -> usize {
        self.num_tags() * self.dim()
    }

    pub fn lattice(&self, features: &[FeatureVector]) -> Lattice<S> {
        build_lattice(&self.params, self.num_tags(), self.hash_bits, features)
    }

    pub fn marginals(&self, features: &[FeatureVector]) -> Posterior<S> {
        self.lattice(features).posterior()
    }

    pub fn viterbi(&self, features: &[FeatureVector]) -> (Vec<usize>, S) {
        self.lattice(features).viterbi()
    }

    pub fn kbest(&self, features: &[FeatureVector], k: usize) -> Vec<(Vec<usize>, S)> {
        self.lattice(features).kbest(k)
    }

    /// `label = None` asks for the NONE span: one minus every labeled
    /// segment probability, floored at 1e-12.
    pub fn span_type_log_marginal(
        &self,
        features: &[FeatureVector],
        start: usize,
        end: usize,
        label: Option<usize>,
    ) -> S {
        let lattice = self.lattice(features);
        let post = lattice.posterior();
        span_log_marginal(&self.tags, &lattice, &post, start, end, label)
    }

    pub fn objective_and_gradient(&self, data: &[CrfInstance], lambda: S) -> (S, Vec<S>) {
        let mut grad = vec![S::zero(); self.params.len()];
        let v = objective_into(self.num_tags(), self.hash_bits, &self.params, data, lambda, &mut grad);
        (v, grad)
    }

    /// Segments from the `k` best paths of every sentence, deduplicated by
    /// span (the best-ranked path decides the label), scored by their span
    /// marginal and ordered by position.
    pub fn generate_candidates(&self, featurizer: &Featurizer, doc: &Document, k: usize) -> Vec<SpanProposal> {
        let mut out = Vec::new();
        for s in 0..doc.sentences.len() {
            if doc.sentences[s].is_empty() {
                continue;
            }
            let feats = featurizer.sentence_features(doc, s);
            let lattice = self.lattice(&feats);
            let mut seen: Vec<(usize, usize, usize)> = Vec::new();
            for (path, _) in lattice.kbest(k) {
                for seg in self.tags.segments(&path) {
                    if !seen.iter().any(|x| (x.0, x.1) == (seg.0, seg.1)) {
                        seen.push(seg);
                    }
                }
            }
            if seen.is_empty() {
                continue;
            }
            let post = lattice.posterior();
            seen.sort();
            for (start, end, label) in seen {
                let score = span_log_marginal(&self.tags, &lattice, &post, start, end, Some(label));
                out.push(SpanProposal {
                    span: Span::new(s, start, end),
                    label,
                    score: score.as_f64(),
                });
            }
        }
        out
    }

    /// Entity candidates with a log-probability for every label (NONE first).
    pub fn entity_candidates(&self, featurizer: &Featurizer, doc: &Document, k: usize) -> Vec<EntityCandidate> {
        let proposals = self.generate_candidates(featurizer, doc, k);
        let mut out = Vec::with_capacity(proposals.len());
        let mut cache: Option<(usize, Lattice<S>, Posterior<S>)> = None;
        for p in proposals {
            if cache.as_ref().map(|c| c.0) != Some(p.span.sentence) {
                let feats = featurizer.sentence_features(doc, p.span.sentence);
                let lattice = self.lattice(&feats);
                let post = lattice.posterior();
                cache = Some((p.span.sentence, lattice, post));
            }
            let (_, lattice, post) = cache.as_ref().unwrap();
            let mut scores = vec![0.0; self.tags.num_labels() + 1];
            scores[0] = span_log_marginal(&self.tags, lattice, post, p.span.start, p.span.end, None).as_f64();
            for (l, slot) in scores.iter_mut().enumerate().skip(1) {
                *slot = span_log_marginal(&self.tags, lattice, post, p.span.start, p.span.end, Some(l)).as_f64();
            }
            out.push(EntityCandidate { span: p.span, scores });
        }
        out
    }

    pub fn trigger_candidates(&self, featurizer: &Featurizer, doc: &Document, k: usize) -> Vec<TriggerCandidate> {
        self.generate_candidates(featurizer, doc, k)
            .into_iter()
            .map(|p| TriggerCandidate {
                span: p.span,
                label: self.tags.label_name(p.label).to_string(),
                score: p.score,
            })
            .collect()
    }

    /// Viterbi segments of every sentence as `(span, label index)`.
    pub fn predict_spans(&self, featurizer: &Featurizer, doc: &Document) -> Vec<(Span, usize)> {
        let mut out = Vec::new();
        for s in 0..doc.sentences.len() {
            if doc.sentences[s].is_empty() {
                continue;
            }
            let (path, _) = self.viterbi(&featurizer.sentence_features(doc, s));
            for (start, end, l) in self.tags.segments(&path) {
                out.push((Span::new(s, start, end), l));
            }
        }
        out
    }
}

pub fn build_lattice<S: Real>(params: &[S], tags: usize, hash_bits: u32, features: &[FeatureVector]) -> Lattice<S> {
    let dim = 1usize << hash_bits;
    let n = features.len();
    let mut emit = vec![S::zero(); n * tags];
    for (t, f) in features.iter().enumerate() {
        for y in 0..tags {
            emit[t * tags + y] = dot_sparse(params, y * dim, f);
        }
    }
    let off = tags * dim;
    Lattice::new(n, tags, emit, params[off..off + tags * tags].to_vec())
}

pub fn span_log_marginal<S: Real>(
    tags: &BioTags,
    lattice: &Lattice<S>,
    post: &Posterior<S>,
    start: usize,
    end: usize,
    label: Option<usize>,
) -> S {
    match label {
        Some(l) => lattice.segment_log_marginal(post, start, end, tags.begin(l), tags.inside(l)),
        None => {
            let total: S = (1..=tags.num_labels())
                .map(|l| lattice.segment_log_marginal(post, start, end, tags.begin(l), tags.inside(l)).exp())
                .sum();
            (S::one() - total).max(S::lit(1e-12)).ln()
        }
    }
}

/// Negative L2-regularized conditional log-likelihood; writes the gradient
/// (expected minus empirical counts plus `2λψ`) into `grad`.
/// Sentences are accumulated strictly in input order.
pub fn objective_into<S: Real>(
    tags: usize,
    hash_bits: u32,
    params: &[S],
    data: &[CrfInstance],
    lambda: S,
    grad: &mut [S],
) -> S {
    let dim = 1usize << hash_bits;
    let off = tags * dim;
    grad.iter_mut().for_each(|g| *g = S::zero());
    let mut value = S::zero();
    for inst in data {
        if inst.features.is_empty() {
            continue;
        }
        let lattice = build_lattice(params, tags, hash_bits, &inst.features);
        let post = lattice.posterior();
        value += post.log_z - lattice.path_score(&inst.gold);
        for (t, f) in inst.features.iter().enumerate() {
            for y in 0..tags {
                let p = post.node(t, y);
                if p != S::zero() {
                    add_sparse(grad, y * dim, f, p);
                }
            }
            add_sparse(grad, inst.gold[t] * dim, f, -S::one());
            if t > 0 {
                for i in 0..tags {
                    for j in 0..tags {
                        grad[off + i * tags + j] += post.edge(t - 1, i, j);
                    }
                }
                grad[off + inst.gold[t - 1] * tags + inst.gold[t]] -= S::one();
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

pub fn entity_gold(doc: &Document, labels: &LabelSet) -> Vec<Vec<(usize, usize, usize)>> {
    let mut per_sentence = vec![Vec::new(); doc.sentences.len()];
    for e in &doc.gold_entities {
        if let Some(l) = labels.get(&e.entity_type).filter(|&l| l != 0) {
            per_sentence[e.span.sentence].push((e.span.start, e.span.end, l));
        }
    }
    per_sentence
}

pub fn trigger_gold(doc: &Document, labels: &LabelSet) -> Vec<Vec<(usize, usize, usize)>> {
    let mut per_sentence = vec![Vec::new(); doc.sentences.len()];
    for e in &doc.gold_events {
        if let Some(l) = labels.get(&e.event_type).filter(|&l| l != 0) {
            per_sentence[e.trigger.sentence].push((e.trigger.start, e.trigger.end, l));
        }
    }
    per_sentence
}

/// Sentence-level training instances from per-sentence gold segments.
pub fn build_instances(
    docs: &[&Document],
    featurizer: &Featurizer,
    tags: &BioTags,
    gold: impl Fn(&Document) -> Vec<Vec<(usize, usize, usize)>>,
) -> Vec<CrfInstance> {
    let mut out = Vec::new();
    for doc in docs {
        let spans = gold(doc);
        for (s, sent) in doc.sentences.iter().enumerate() {
            if sent.is_empty() {
                continue;
            }
            out.push(CrfInstance {
                features: featurizer.sentence_features(doc, s),
                gold: tags.encode(sent.len(), &spans[s]),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(n: usize) -> BioTags {
        BioTags::new(&(0..n).map(|i| format!("L{i}")).collect::<Vec<_>>())
    }

    #[test]
    fn tag_layout() {
        let t = tags(2);
        assert_eq!(t.len(), 5);
        assert_eq!(t.tag_name(3), "B-L1");
        assert_eq!(t.label_of(4), Some(2));
        assert_eq!(t.label_of(0), None);
        // O B-L0 I-L0 I-L1 B-L1 I-L1 stray I-L0
        let path = [0, 1, 2, 4, 3, 4, 2];
        assert_eq!(t.segments(&path), vec![(1, 3, 1), (4, 6, 2)]);
    }

    #[test]
    fn overlapping_gold_keeps_longer() {
        let t = tags(2);
        let enc = t.encode(5, &[(1, 2, 1), (0, 3, 2), (3, 5, 1)]);
        assert_eq!(enc, vec![3, 4, 4, 1, 2]);
    }

    #[test]
    fn zero_weight_single_token_span_marginal() {
        let model: ChainModel<f64> = ChainModel::zeros(tags(1), 8);
        let feats = vec![FeatureVector::from_raw(vec![(3, 1.0)])];
        let v = model.span_type_log_marginal(&feats, 0, 1, Some(1));
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        let none = model.span_type_log_marginal(&feats, 0, 1, None);
        assert!((none - (2.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_value_is_log_two() {
        // 2 tags would need half a label; use the raw objective with 2 tags.
        let params = vec![0.0f64; num_params(2, 8)];
        let data = vec![CrfInstance {
            features: vec![FeatureVector::from_raw(vec![(1, 1.0)])],
            gold: vec![1],
        }];
        let mut g = vec![0.0; params.len()];
        let v = objective_into(2, 8, &params, &data, 0.0, &mut g);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }
}

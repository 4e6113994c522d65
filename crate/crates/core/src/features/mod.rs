//! Sparse hashed feature extraction for triggers, arguments, entities,
//! trigger pairs and tokens.
//!
//! External resources (trigger seeds, frames, gazetteers, gender or animacy
//! lists) all enter through one generic [`Lexicon`]; word vectors enter
//! through [`Embeddings`] as real-valued features.

mod hash;
mod resources;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span, Token};
use crate::error::{Error, Result};

pub use hash::{conjoin, feature_index, fnv1a64, HASH_SCHEME};
pub use resources::{Embeddings, Lexicon};

pub const SENTENCE_START: &str = "<S>";
pub const SENTENCE_END: &str = "</S>";

/// Dependency labels treated as clause boundaries by the same-clause feature.
const CLAUSE_BOUNDARY_LABELS: &[&str] = &["mark", "cc", "advcl", "ccomp", "parataxis", "relcl"];
const SUBJECT_LABELS: &[&str] = &["nsubj", "nsubjpass", "csubj"];
const OBJECT_LABELS: &[&str] = &["dobj", "obj", "iobj"];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "this",
    "that", "these", "those", "who", "which", "what",
];
const MAX_PATH_EDGES: usize = 4;

/// Sparse vector with strictly increasing indices and no zero entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, index: u32) -> bool {
        self.value(index) != 0.0
    }

    /// Builds a vector from unsorted raw pairs, summing duplicates.
    pub fn from_raw(mut raw: Vec<(u32, f64)>) -> Self {
        raw.retain(|(_, v)| v.is_finite() && *v != 0.0);
        raw.sort_by_key(|e| e.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
        for (i, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|(_, v)| *v != 0.0 && v.is_finite());
        Self { entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Bias,
    Lemma,
    Pos,
    Context,
    Shape,
    Lexicon,
    Gazetteer,
    Dependency,
    Pronoun,
    Embedding,
    Between,
    RelativePosition,
    Clause,
    DependencyPath,
    Prediction,
    Relational,
}

impl Provider {
    pub const ALL: [Provider; 16] = [
        Provider::Bias,
        Provider::Lemma,
        Provider::Pos,
        Provider::Context,
        Provider::Shape,
        Provider::Lexicon,
        Provider::Gazetteer,
        Provider::Dependency,
        Provider::Pronoun,
        Provider::Embedding,
        Provider::Between,
        Provider::RelativePosition,
        Provider::Clause,
        Provider::DependencyPath,
        Provider::Prediction,
        Provider::Relational,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub hash_bits: u32,
    pub providers: BTreeSet<Provider>,
    pub lexicons: Vec<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hash_bits: 20,
            providers: Provider::ALL.into_iter().collect(),
            lexicons: Vec::new(),
            embeddings: None,
            window: 2,
        }
    }
}

impl FeatureConfig {
    pub fn with_bits(mut self, bits: u32) -> Self {
        self.hash_bits = bits;
        self
    }

    pub fn without(mut self, provider: Provider) -> Self {
        self.providers.remove(&provider);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(8..=30).contains(&self.hash_bits) {
            return Err(Error::Config(format!(
                "hash_bits must lie in [8, 30], got {}",
                self.hash_bits
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1usize << self.hash_bits
    }
}

/// Collects hashed features before normalization into a [`FeatureVector`].
pub struct FeatureBuilder {
    bits: u32,
    raw: Vec<(u32, f64)>,
}

impl FeatureBuilder {
    pub fn new(bits: u32) -> Self {
        Self {
            bits,
            raw: Vec::with_capacity(32),
        }
    }

    #[inline]
    pub fn add(&mut self, family: &str, value: &str) {
        self.raw.push((feature_index(family, value, self.bits), 1.0));
    }

    #[inline]
    pub fn add_real(&mut self, family: &str, value: &str, x: f64) {
        if x != 0.0 && x.is_finite() {
            self.raw.push((feature_index(family, value, self.bits), x));
        }
    }

    pub fn finish(self) -> FeatureVector {
        FeatureVector::from_raw(self.raw)
    }
}

/// Relative position of an entity mention with respect to a trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativePosition {
    Before,
    After,
    Contain,
}

impl RelativePosition {
    pub fn of(trigger: &Span, entity: &Span) -> Self {
        if entity.end <= trigger.start {
            RelativePosition::Before
        } else if entity.start >= trigger.end {
            RelativePosition::After
        } else {
            RelativePosition::Contain
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelativePosition::Before => "before",
            RelativePosition::After => "after",
            RelativePosition::Contain => "contain",
        }
    }
}

/// Feature configuration together with its loaded resources.
#[derive(Debug, Clone)]
pub struct Featurizer {
    cfg: FeatureConfig,
    lexicon: Lexicon,
    embeddings: Option<Embeddings>,
}

fn word(tok: &Token) -> String {
    tok.surface.to_lowercase()
}

pub fn shape_of(surface: &str) -> Option<&'static str> {
    if surface.is_empty() {
        return None;
    }
    if surface.chars().all(|c| c.is_ascii_digit()) {
        return Some("all_digits");
    }
    let letters = surface.chars().filter(|c| c.is_alphabetic()).count();
    if letters > 0 && surface.chars().all(|c| c.is_alphabetic() && c.is_uppercase()) {
        return Some("all_caps");
    }
    if surface.chars().next().is_some_and(char::is_uppercase) {
        return Some("is_cap");
    }
    if letters > 0 && surface.chars().all(|c| !c.is_alphabetic() || c.is_lowercase()) {
        return Some("lower");
    }
    Some("other")
}

fn confidence_bin(p: f64) -> String {
    let bin = (p.clamp(0.0, 1.0) * 10.0 + 1e-9).floor() / 10.0;
    format!("{bin:.1}")
}

impl Featurizer {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let mut lexicon = Lexicon::new();
        for path in &cfg.lexicons {
            lexicon.load_into(path)?;
        }
        let embeddings = match &cfg.embeddings {
            Some(p) => Some(Embeddings::load(p)?),
            None => None,
        };
        Ok(Self {
            cfg,
            lexicon,
            embeddings,
        })
    }

    pub fn with_resources(
        cfg: FeatureConfig,
        lexicon: Lexicon,
        embeddings: Option<Embeddings>,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            lexicon,
            embeddings,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn hash_bits(&self) -> u32 {
        self.cfg.hash_bits
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    /// Same resources, different provider selection.
    pub fn restricted(&self, without: Provider) -> Self {
        Self {
            cfg: self.cfg.clone().without(without),
            lexicon: self.lexicon.clone(),
            embeddings: self.embeddings.clone(),
        }
    }

    #[inline]
    fn on(&self, p: Provider) -> bool {
        self.cfg.providers.contains(&p)
    }

    fn context_word(sent: &[Token], pos: isize) -> String {
        if pos < 0 {
            SENTENCE_START.to_string()
        } else if pos as usize >= sent.len() {
            SENTENCE_END.to_string()
        } else {
            word(&sent[pos as usize])
        }
    }

    fn add_embedding(&self, b: &mut FeatureBuilder, family: &str, tok: &Token) {
        if !self.on(Provider::Embedding) {
            return;
        }
        if let Some(emb) = &self.embeddings {
            if let Some(v) = emb.get(&tok.surface, &tok.lemma_or_lower()) {
                for (d, &x) in v.iter().enumerate() {
                    b.add_real(family, &d.to_string(), x);
                }
            }
        }
    }

    pub fn trigger_features(&self, doc: &Document, trigger: &Span) -> FeatureVector {
        let mut b = FeatureBuilder::new(self.cfg.hash_bits);
        let sent = &doc.sentences[trigger.sentence];
        let head = &sent[trigger.head_token()];
        let head_lemma = head.lemma_or_lower();
        if self.on(Provider::Bias) {
            b.add("trig_bias", "1");
        }
        if self.on(Provider::Lemma) {
            b.add("trig_head", &head_lemma);
            let lemmas: Vec<String> = sent[trigger.start..trigger.end]
                .iter()
                .map(Token::lemma_or_lower)
                .collect();
            for l in &lemmas {
                b.add("trig_lemma", l);
            }
            if lemmas.len() > 1 {
                b.add("trig_phrase", &lemmas.join("_"));
            }
        }
        if self.on(Provider::Pos) {
            if let Some(pos) = &head.pos {
                b.add("trig_pos", pos);
            }
        }
        if self.on(Provider::Context) {
            for d in 1..=self.cfg.window as isize {
                let left = Self::context_word(sent, trigger.start as isize - d);
                let right = Self::context_word(sent, trigger.end as isize - 1 + d);
                b.add(&format!("trig_ctx-{d}"), &left);
                b.add(&format!("trig_ctx+{d}"), &right);
            }
        }
        if self.on(Provider::Lexicon) {
            for tag in self.lexicon.lookup(&head.surface, &head_lemma) {
                b.add("trig_lex", tag);
                if let Some(pos) = &head.pos {
                    b.add("trig_lex_pos", &format!("{tag}|{pos}"));
                }
            }
        }
        if self.on(Provider::Dependency) {
            let h = trigger.head_token();
            if let (Some(gov), Some(label)) = (head.governor(), &head.dep_label) {
                b.add("trig_dep_up", label);
                b.add("trig_dep_up_lex", &format!("{label}|{}", sent[gov].lemma_or_lower()));
            }
            for child in sent.iter().filter(|t| t.governor() == Some(h)) {
                if let Some(label) = &child.dep_label {
                    b.add("trig_dep_down", label);
                    b.add("trig_dep_down_lex", &format!("{label}|{}", child.lemma_or_lower()));
                }
            }
        }
        if self.on(Provider::Pronoun) && is_pronoun(head) {
            b.add("trig_pronoun", "1");
        }
        self.add_embedding(&mut b, "trig_emb", head);
        b.finish()
    }

    pub fn argument_features(&self, doc: &Document, trigger: &Span, entity: &Span) -> Result<FeatureVector> {
        if trigger.sentence != entity.sentence {
            return Err(Error::Span(format!(
                "argument features need co-sentential spans, got sentences {} and {}",
                trigger.sentence, entity.sentence
            )));
        }
        let mut b = FeatureBuilder::new(self.cfg.hash_bits);
        let sent = &doc.sentences[trigger.sentence];
        let ent_head = sent[entity.head_token()].lemma_or_lower();
        let trig_head = sent[trigger.head_token()].lemma_or_lower();
        let relpos = RelativePosition::of(trigger, entity);
        let (gap_start, gap_end) = match relpos {
            RelativePosition::Before => (entity.end, trigger.start),
            RelativePosition::After => (trigger.end, entity.start),
            RelativePosition::Contain => (0, 0),
        };
        let between = &sent[gap_start..gap_end];
        // Word adjacent to the entity on the trigger side.
        let near_entity = match relpos {
            RelativePosition::Before => between.first(),
            RelativePosition::After => between.last(),
            RelativePosition::Contain => None,
        }
        .map(Token::lemma_or_lower);

        if self.on(Provider::Bias) {
            b.add("arg_bias", "1");
        }
        if self.on(Provider::Lemma) {
            for t in &sent[entity.start..entity.end] {
                b.add("arg_ent_lemma", &t.lemma_or_lower());
            }
            b.add("arg_ent_head", &ent_head);
            for t in &sent[trigger.start..trigger.end] {
                b.add("arg_trig_lemma", &t.lemma_or_lower());
            }
        }
        if self.on(Provider::Between) && !between.is_empty() {
            for t in between {
                b.add("arg_between", &t.lemma_or_lower());
            }
            if let Some(w) = &near_entity {
                b.add("arg_between_near", w);
            }
            let n = between.len().min(5);
            b.add("arg_between_count", &n.to_string());
        }
        if self.on(Provider::RelativePosition) {
            b.add("relpos", relpos.as_str());
            b.add("arg_relpos_trig", &format!("{}|{trig_head}", relpos.as_str()));
            let near = near_entity.as_deref().unwrap_or("<adjacent>");
            b.add("arg_relpos_near", &format!("{}|{near}", relpos.as_str()));
        }
        if self.on(Provider::Clause) && sent.iter().any(|t| t.dep_label.is_some()) {
            let crosses = between.iter().any(|t| {
                t.dep_label
                    .as_deref()
                    .is_some_and(|l| CLAUSE_BOUNDARY_LABELS.contains(&l))
            });
            b.add("arg_same_clause", if crosses { "0" } else { "1" });
        }
        if self.on(Provider::DependencyPath) {
            if let Some((path, lex)) = dependency_path(sent, trigger.head_token(), entity.head_token()) {
                b.add("arg_path", &path);
                b.add("arg_path_lex", &lex);
            }
        }
        Ok(b.finish())
    }

    /// `prediction` is the entity extractor's (type label, probability), if any.
    pub fn entity_features(&self, doc: &Document, entity: &Span, prediction: Option<(&str, f64)>) -> FeatureVector {
        let mut b = FeatureBuilder::new(self.cfg.hash_bits);
        let sent = &doc.sentences[entity.sentence];
        let head = &sent[entity.head_token()];
        let tokens = &sent[entity.start..entity.end];
        if self.on(Provider::Bias) {
            b.add("ent_bias", "1");
        }
        if self.on(Provider::Lemma) {
            for t in tokens {
                b.add("ent_lemma", &t.lemma_or_lower());
            }
            b.add("ent_head", &head.lemma_or_lower());
        }
        if self.on(Provider::Pos) {
            if let Some(pos) = &head.pos {
                b.add("ent_pos", pos);
            }
        }
        if self.on(Provider::Shape) {
            if let Some(s) = shape_of(&head.surface) {
                b.add("ent_shape", s);
            }
        }
        if self.on(Provider::Lexicon) {
            let mut tags: Vec<&str> = Vec::new();
            let phrase: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
            let phrase = phrase.join(" ");
            for tag in self.lexicon.tags(&phrase) {
                tags.push(tag);
            }
            for t in tokens {
                for tag in self.lexicon.lookup(&t.surface, &t.lemma_or_lower()) {
                    if !tags.contains(&tag) {
                        tags.push(tag);
                    }
                }
            }
            for tag in tags {
                b.add("ent_lex", tag);
            }
        }
        if self.on(Provider::Pronoun) && is_pronoun(head) {
            b.add("ent_pronoun", "1");
        }
        if self.on(Provider::Prediction) {
            if let Some((label, p)) = prediction {
                b.add("crf_type", label);
                b.add("crf_conf_bin", &confidence_bin(p));
            }
        }
        self.add_embedding(&mut b, "ent_emb", head);
        b.finish()
    }

    pub fn pair_relational_features(&self, doc: &Document, first: &Span, second: &Span) -> FeatureVector {
        let mut b = FeatureBuilder::new(self.cfg.hash_bits);
        let ht = doc.token(first.sentence, first.head_token());
        let hs = doc.token(second.sentence, second.head_token());
        if ht.lemma_or_lower() == hs.lemma_or_lower() {
            b.add("pair_same_lemma", "1");
        }
        if self.on(Provider::Relational) {
            if first.sentence == second.sentence {
                let conj = |a: &Token, b_head: usize| {
                    a.governor() == Some(b_head) && a.dep_label.as_deref() == Some("conj")
                };
                if conj(ht, second.head_token()) || conj(hs, first.head_token()) {
                    b.add("pair_conj", "1");
                }
            }
            let subj_a = dependents(doc, first, SUBJECT_LABELS);
            let subj_b = dependents(doc, second, SUBJECT_LABELS);
            if shares_referent(doc, &subj_a, &subj_b) {
                b.add("pair_shared_subj", "1");
            }
            let obj_a = dependents(doc, first, OBJECT_LABELS);
            let obj_b = dependents(doc, second, OBJECT_LABELS);
            if shares_referent(doc, &obj_a, &obj_b) {
                b.add("pair_shared_obj", "1");
            }
            let frames_a = self.lexicon.lookup(&ht.surface, &ht.lemma_or_lower());
            let frames_b = self.lexicon.lookup(&hs.surface, &hs.lemma_or_lower());
            if frames_a.iter().any(|f| frames_b.contains(f)) {
                b.add("pair_shared_frame", "1");
            }
        }
        b.finish()
    }

    pub fn token_features(&self, doc: &Document, sentence: usize, tok: usize) -> FeatureVector {
        let mut b = FeatureBuilder::new(self.cfg.hash_bits);
        let sent = &doc.sentences[sentence];
        let t = &sent[tok];
        if self.on(Provider::Bias) {
            b.add("bias", "1");
        }
        if self.on(Provider::Lemma) {
            let w = word(t);
            b.add("w", &w);
            let lemma = t.lemma_or_lower();
            if lemma != w {
                b.add("lemma", &lemma);
            }
            let chars: Vec<char> = w.chars().collect();
            if chars.len() > 3 {
                let suffix: String = chars[chars.len() - 3..].iter().collect();
                b.add("suf3", &suffix);
            }
        }
        if self.on(Provider::Pos) {
            if let Some(pos) = &t.pos {
                b.add("pos", pos);
            }
        }
        if self.on(Provider::Context) {
            for d in 1..=self.cfg.window as isize {
                b.add(&format!("w-{d}"), &Self::context_word(sent, tok as isize - d));
                b.add(&format!("w+{d}"), &Self::context_word(sent, tok as isize + d));
            }
        }
        if self.on(Provider::Shape) {
            if let Some(s) = shape_of(&t.surface) {
                b.add("shape", s);
            }
        }
        if self.on(Provider::Gazetteer) {
            for tag in self.lexicon.lookup(&t.surface, &t.lemma_or_lower()) {
                b.add("gaz", tag);
            }
        }
        self.add_embedding(&mut b, "emb", t);
        b.finish()
    }

    /// Token features for every token of a sentence.
    pub fn sentence_features(&self, doc: &Document, sentence: usize) -> Vec<FeatureVector> {
        (0..doc.sentences[sentence].len())
            .map(|i| self.token_features(doc, sentence, i))
            .collect()
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

fn is_pronoun(tok: &Token) -> bool {
    tok.pos.as_deref().is_some_and(|p| p.starts_with("PRP"))
        || PRONOUNS.contains(&tok.surface.to_lowercase().as_str())
}

/// Tokens attached to the span's head with one of `labels`.
pub fn dependents(doc: &Document, span: &Span, labels: &[&str]) -> Vec<(usize, usize)> {
    let head = span.head_token();
    doc.sentences[span.sentence]
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            t.governor() == Some(head) && t.dep_label.as_deref().is_some_and(|l| labels.contains(&l))
        })
        .map(|(i, _)| (span.sentence, i))
        .collect()
}

pub fn subjects_and_objects(doc: &Document, span: &Span) -> Vec<(usize, usize)> {
    let mut out = dependents(doc, span, SUBJECT_LABELS);
    out.extend(dependents(doc, span, OBJECT_LABELS));
    out
}

/// Coreference of two tokens: identical position, same provided chain, or
/// identical lemma when the document carries no chains.
pub fn coreferent(doc: &Document, a: (usize, usize), b: (usize, usize)) -> bool {
    if a == b {
        return true;
    }
    match &doc.coref_chains {
        Some(chains) => chains.iter().any(|chain| {
            chain.iter().any(|s| s.contains_token(a.0, a.1))
                && chain.iter().any(|s| s.contains_token(b.0, b.1))
        }),
        None => doc.token(a.0, a.1).lemma_or_lower() == doc.token(b.0, b.1).lemma_or_lower(),
    }
}

pub fn shares_referent(doc: &Document, xs: &[(usize, usize)], ys: &[(usize, usize)]) -> bool {
    xs.iter().any(|&x| ys.iter().any(|&y| coreferent(doc, x, y)))
}

/// Shortest path in the (undirected) dependency tree, at most
/// `MAX_PATH_EDGES` edges. Returns the unlexicalized and lexicalized strings.
fn dependency_path(sent: &[Token], from: usize, to: usize) -> Option<(String, String)> {
    if sent[from].dep_head.is_none() || sent[to].dep_head.is_none() {
        return None;
    }
    if from == to {
        return Some(("=".into(), "=".into()));
    }
    let n = sent.len();
    let mut prev = vec![usize::MAX; n];
    let mut depth = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    depth[from] = 0;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        if u == to || depth[u] >= MAX_PATH_EDGES {
            continue;
        }
        let mut neighbors: Vec<usize> = Vec::new();
        if let Some(g) = sent[u].governor() {
            neighbors.push(g);
        }
        neighbors.extend((0..n).filter(|&v| sent[v].governor() == Some(u)));
        for v in neighbors {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    if depth[to] == usize::MAX {
        return None;
    }
    let mut nodes = vec![to];
    while *nodes.last().unwrap() != from {
        nodes.push(prev[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    let label = |i: usize| sent[i].dep_label.clone().unwrap_or_else(|| "dep".into());
    let mut path = String::new();
    let mut lex = String::new();
    for w in nodes.windows(2) {
        let (u, v) = (w[0], w[1]);
        let step = if sent[u].governor() == Some(v) {
            format!("<{}", label(u))
        } else {
            format!(">{}", label(v))
        };
        path.push_str(&step);
        lex.push_str(&step);
        if v != to {
            lex.push('[');
            lex.push_str(&sent[v].lemma_or_lower());
            lex.push(']');
        }
    }
    Some((path, lex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn tok(surface: &str, lemma: &str, pos: &str, head: i64, label: &str) -> Token {
        Token {
            surface: surface.into(),
            lemma: Some(lemma.into()),
            pos: Some(pos.into()),
            dep_head: Some(head),
            dep_label: Some(label.into()),
        }
    }

    fn doc(sentences: Vec<Vec<Token>>) -> Document {
        Document {
            doc_id: "t".into(),
            sentences,
            coref_chains: None,
            gold_entities: vec![],
            gold_events: vec![],
        }
    }

    fn plain(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(*w)).collect()
    }

    fn featurizer(bits: u32) -> Featurizer {
        Featurizer::with_resources(FeatureConfig::default().with_bits(bits), Lexicon::new(), None).unwrap()
    }

    #[test]
    fn vector_invariants() {
        let v = FeatureVector::from_raw(vec![(5, 1.0), (2, 0.5), (5, 1.0), (3, 0.0), (7, 1.0), (7, -1.0)]);
        assert_eq!(v.entries(), &[(2, 0.5), (5, 2.0)]);
    }

    #[test]
    fn trigger_lexicon_feature() {
        let mut lex = Lexicon::new();
        lex.insert("bombardment", &["ATTACK_SEED"]);
        let f = Featurizer::with_resources(FeatureConfig::default(), lex, None).unwrap();
        let d = doc(vec![plain(&["a", "massive", "bombardment", "hit"])]);
        let span = Span::new(0, 2, 3);
        let v = f.trigger_features(&d, &span);
        assert!(v.contains(feature_index("trig_lex", "ATTACK_SEED", 20)));
        assert_eq!(v, f.trigger_features(&d, &span));
    }

    #[test]
    fn embedding_zero_components_dropped() {
        let emb = Embeddings::parse("bombardment 0.1 -0.2 0.0\n", "e").unwrap();
        let only_emb = FeatureConfig {
            providers: [Provider::Embedding].into_iter().collect(),
            ..FeatureConfig::default()
        };
        let f = Featurizer::with_resources(only_emb, Lexicon::new(), Some(emb)).unwrap();
        let d = doc(vec![plain(&["bombardment"])]);
        let v = f.trigger_features(&d, &Span::new(0, 0, 1));
        assert_eq!(v.len(), 2);
        assert_eq!(v.value(feature_index("trig_emb", "1", 20)), -0.2);
    }

    #[test]
    fn trigger_dependency_and_pronoun() {
        let d = doc(vec![vec![
            tok("He", "he", "PRP", 1, "nsubj"),
            tok("attacked", "attack", "VBD", -1, "root"),
            tok("it", "it", "PRP", 1, "dobj"),
        ]]);
        let f = featurizer(20);
        let v = f.trigger_features(&d, &Span::new(0, 1, 2));
        assert!(v.contains(feature_index("trig_dep_down", "nsubj", 20)));
        assert!(v.contains(feature_index("trig_dep_down_lex", "dobj|it", 20)));
        assert!(!v.contains(feature_index("trig_pronoun", "1", 20)));
        let p = f.trigger_features(&d, &Span::new(0, 0, 1));
        assert!(p.contains(feature_index("trig_pronoun", "1", 20)));
        assert!(p.contains(feature_index("trig_dep_up_lex", "nsubj|attack", 20)));
    }

    #[test]
    fn relative_positions_and_between_words() {
        let d = doc(vec![plain(&["Smith", "attacked", "the", "city", "of", "Baghdad"])]);
        let f = featurizer(20);
        let trig = Span::new(0, 1, 2);
        let before = f.argument_features(&d, &trig, &Span::new(0, 0, 1)).unwrap();
        assert!(before.contains(feature_index("relpos", "before", 20)));
        let after = f.argument_features(&d, &trig, &Span::new(0, 5, 6)).unwrap();
        assert!(after.contains(feature_index("relpos", "after", 20)));
        assert!(after.contains(feature_index("arg_between_near", "of", 20)));
        let contain = f.argument_features(&d, &Span::new(0, 3, 4), &Span::new(0, 2, 6)).unwrap();
        assert!(contain.contains(feature_index("relpos", "contain", 20)));

        let between_families = ["arg_between", "arg_between_near", "arg_between_count"];
        let adjacent = f.argument_features(&d, &trig, &Span::new(0, 2, 4)).unwrap();
        let full = f.argument_features(&d, &trig, &Span::new(0, 5, 6)).unwrap();
        let between_hits = |v: &FeatureVector| {
            d.sentences[0]
                .iter()
                .flat_map(|t| between_families.iter().map(move |fam| (fam, t.lemma_or_lower())))
                .filter(|(fam, w)| v.contains(feature_index(fam, w, 20)))
                .count()
        };
        assert_eq!(between_hits(&adjacent), 0);
        assert!(between_hits(&full) > 0);
        assert!(!adjacent.contains(feature_index("arg_between_count", "0", 20)));
    }

    #[test]
    fn argument_features_reject_cross_sentence() {
        let d = doc(vec![plain(&["a"]), plain(&["b"])]);
        assert!(featurizer(12)
            .argument_features(&d, &Span::new(0, 0, 1), &Span::new(1, 0, 1))
            .is_err());
    }

    #[test]
    fn clause_and_path_features() {
        // Smith attacked Baghdad and Jones died
        let d = doc(vec![vec![
            tok("Smith", "smith", "NNP", 1, "nsubj"),
            tok("attacked", "attack", "VBD", -1, "root"),
            tok("Baghdad", "baghdad", "NNP", 1, "dobj"),
            tok("and", "and", "CC", 5, "cc"),
            tok("Jones", "jones", "NNP", 5, "nsubj"),
            tok("died", "die", "VBD", 1, "conj"),
        ]]);
        let f = featurizer(20);
        let same = f.argument_features(&d, &Span::new(0, 1, 2), &Span::new(0, 2, 3)).unwrap();
        assert!(same.contains(feature_index("arg_same_clause", "1", 20)));
        assert!(same.contains(feature_index("arg_path", ">dobj", 20)));
        let cross = f.argument_features(&d, &Span::new(0, 5, 6), &Span::new(0, 2, 3)).unwrap();
        assert!(cross.contains(feature_index("arg_same_clause", "0", 20)));
        assert!(cross.contains(feature_index("arg_path", "<conj>dobj", 20)));
        assert!(cross.contains(feature_index("arg_path_lex", "<conj[attack]>dobj", 20)));
        let no_dep = doc(vec![plain(&["Smith", "attacked", "Baghdad"])]);
        let v = f.argument_features(&no_dep, &Span::new(0, 1, 2), &Span::new(0, 2, 3)).unwrap();
        assert!(!v.contains(feature_index("arg_same_clause", "1", 20)));
        assert!(!v.contains(feature_index("arg_same_clause", "0", 20)));
    }

    #[test]
    fn entity_prediction_and_lexicon_features() {
        let mut lex = Lexicon::new();
        lex.insert("Baghdad", &["GPE_GAZ"]);
        let f = Featurizer::with_resources(FeatureConfig::default(), lex, None).unwrap();
        let d = doc(vec![plain(&["Smith", "visited", "Baghdad"])]);
        let v = f.entity_features(&d, &Span::new(0, 0, 1), Some(("PER", 0.93)));
        assert!(v.contains(feature_index("crf_type", "PER", 20)));
        assert!(v.contains(feature_index("crf_conf_bin", "0.9", 20)));
        let bare = f.entity_features(&d, &Span::new(0, 0, 1), None);
        assert!(!bare.contains(feature_index("crf_type", "PER", 20)));
        assert!(!bare.contains(feature_index("crf_conf_bin", "0.9", 20)));
        let g = f.entity_features(&d, &Span::new(0, 2, 3), None);
        assert!(g.contains(feature_index("ent_lex", "GPE_GAZ", 20)));
        assert_eq!(confidence_bin(1.0), "1.0");
        assert_eq!(confidence_bin(0.3), "0.3");
        assert_eq!(confidence_bin(0.0), "0.0");
    }

    #[test]
    fn pair_features() {
        let f = featurizer(20);
        let d = doc(vec![plain(&["attack", "and", "attack"])]);
        let v = f.pair_relational_features(&d, &Span::new(0, 0, 1), &Span::new(0, 2, 3));
        assert_eq!(v.entries(), &[(feature_index("pair_same_lemma", "1", 20), 1.0)]);
        let none = f.pair_relational_features(&doc(vec![plain(&["a", "b"])]), &Span::new(0, 0, 1), &Span::new(0, 1, 2));
        assert!(none.is_empty());

        let d = doc(vec![vec![
            tok("Smith", "smith", "NNP", 1, "nsubj"),
            tok("attacked", "attack", "VBD", -1, "root"),
            tok("and", "and", "CC", 3, "cc"),
            tok("fled", "flee", "VBD", 1, "conj"),
        ]]);
        let mut d2 = d.clone();
        d2.sentences[0][0].dep_head = Some(1);
        let v = f.pair_relational_features(&d2, &Span::new(0, 1, 2), &Span::new(0, 3, 4));
        assert!(v.contains(feature_index("pair_conj", "1", 20)));
        // Both verbs governing the same subject token.
        let mut d3 = doc(vec![vec![
            tok("Smith", "smith", "NNP", 1, "nsubj"),
            tok("attacked", "attack", "VBD", -1, "root"),
        ], vec![
            tok("Smith", "smith", "NNP", 1, "nsubj"),
            tok("fled", "flee", "VBD", -1, "root"),
        ]]);
        let v = f.pair_relational_features(&d3, &Span::new(0, 1, 2), &Span::new(1, 1, 2));
        assert!(v.contains(feature_index("pair_shared_subj", "1", 20)));
        d3.coref_chains = Some(vec![]);
        let v = f.pair_relational_features(&d3, &Span::new(0, 1, 2), &Span::new(1, 1, 2));
        assert!(!v.contains(feature_index("pair_shared_subj", "1", 20)));
    }

    #[test]
    fn token_shapes_and_sentinels() {
        let f = featurizer(20);
        let d = doc(vec![plain(&["IBM", "bought", "2003", "Lotus"])]);
        assert!(f.token_features(&d, 0, 0).contains(feature_index("shape", "all_caps", 20)));
        assert!(f.token_features(&d, 0, 2).contains(feature_index("shape", "all_digits", 20)));
        assert!(f.token_features(&d, 0, 3).contains(feature_index("shape", "is_cap", 20)));
        let first = f.token_features(&d, 0, 0);
        assert!(first.contains(feature_index("w-1", SENTENCE_START, 20)));
        assert!(first.contains(feature_index("w-2", SENTENCE_START, 20)));
        let last = f.token_features(&d, 0, 3);
        assert!(last.contains(feature_index("w+1", SENTENCE_END, 20)));
    }

    #[test]
    fn gazetteer_can_be_disabled() {
        let mut lex = Lexicon::new();
        lex.insert("Baghdad", &["GPE_GAZ"]);
        let f = Featurizer::with_resources(FeatureConfig::default(), lex, None).unwrap();
        let d = doc(vec![plain(&["Baghdad"])]);
        let gaz = feature_index("gaz", "GPE_GAZ", 20);
        assert!(f.token_features(&d, 0, 0).contains(gaz));
        assert!(!f.restricted(Provider::Gazetteer).token_features(&d, 0, 0).contains(gaz));
    }

    #[test]
    fn config_bounds() {
        assert!(FeatureConfig::default().with_bits(7).validate().is_err());
        assert!(FeatureConfig::default().with_bits(31).validate().is_err());
        assert!(FeatureConfig::default().with_bits(8).validate().is_ok());
    }
}

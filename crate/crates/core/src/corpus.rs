//! Document data model, JSONL corpus I/O and candidate scoping.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::LabelSchema;

/// A token range `[start, end)` inside one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
}

impl Span {
    pub fn new(sentence: usize, start: usize, end: usize) -> Self {
        Self {
            sentence,
            start,
            end,
            head: None,
        }
    }

    pub fn with_head(mut self, head: usize) -> Self {
        self.head = Some(head);
        self
    }

    /// Head token; the last token of the span when not annotated.
    #[inline]
    pub fn head_token(&self) -> usize {
        self.head.unwrap_or(self.end - 1)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// (sentence, start, end) without the head, the key used for offset matching.
    pub fn offsets(&self) -> (usize, usize, usize) {
        (self.sentence, self.start, self.end)
    }

    pub fn contains_token(&self, sentence: usize, tok: usize) -> bool {
        self.sentence == sentence && self.start <= tok && tok < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.sentence == other.sentence && self.start < other.end && other.start < self.end
    }

    fn validate(&self, sentence_lengths: &[usize]) -> std::result::Result<(), String> {
        let len = *sentence_lengths
            .get(self.sentence)
            .ok_or_else(|| format!("span sentence {} out of range", self.sentence))?;
        if self.start >= self.end {
            return Err(format!("span [{}, {}) is empty", self.start, self.end));
        }
        if self.end > len {
            return Err(format!(
                "span [{}, {}) exceeds sentence {} of length {len}",
                self.start, self.end, self.sentence
            ));
        }
        if let Some(h) = self.head {
            if h < self.start || h >= self.end {
                return Err(format!("head {h} outside span [{}, {})", self.start, self.end));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
    /// Governor index within the sentence, `-1` for the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep_head: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep_label: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            lemma: None,
            pos: None,
            dep_head: None,
            dep_label: None,
        }
    }

    /// Lemma, or the lowercased surface when no lemma is annotated.
    pub fn lemma_or_lower(&self) -> String {
        match &self.lemma {
            Some(l) => l.clone(),
            None => self.surface.to_lowercase(),
        }
    }

    pub fn governor(&self) -> Option<usize> {
        match self.dep_head {
            Some(h) if h >= 0 => Some(h as usize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub span: Span,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    /// Index into the document's `gold_entities`.
    pub entity: usize,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMention {
    pub trigger: Span,
    pub event_type: String,
    #[serde(default)]
    pub arguments: Vec<Argument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Vec<Token>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coref_chains: Option<Vec<Vec<Span>>>,
    #[serde(default)]
    pub gold_entities: Vec<EntityMention>,
    #[serde(default)]
    pub gold_events: Vec<EventMention>,
}

impl Document {
    pub fn token(&self, sentence: usize, tok: usize) -> &Token {
        &self.sentences[sentence][tok]
    }

    pub fn sentence_lengths(&self) -> Vec<usize> {
        self.sentences.iter().map(Vec::len).collect()
    }

    /// Copy of the document with its text and annotations but no gold mentions.
    pub fn unlabeled(&self) -> Document {
        Document {
            doc_id: self.doc_id.clone(),
            sentences: self.sentences.clone(),
            coref_chains: self.coref_chains.clone(),
            gold_entities: Vec::new(),
            gold_events: Vec::new(),
        }
    }

    /// Checks spans, label membership and argument locality.
    pub fn validate(&self, schema: &LabelSchema) -> Result<()> {
        let fail = |message: String| Error::Document {
            doc_id: self.doc_id.clone(),
            message,
        };
        let lens = self.sentence_lengths();
        for (si, sent) in self.sentences.iter().enumerate() {
            for (ti, tok) in sent.iter().enumerate() {
                if let Some(h) = tok.dep_head {
                    if h < -1 || h >= sent.len() as i64 {
                        return Err(fail(format!(
                            "sentence {si} token {ti}: dep_head {h} out of range"
                        )));
                    }
                }
            }
        }
        for (i, ent) in self.gold_entities.iter().enumerate() {
            ent.span
                .validate(&lens)
                .map_err(|m| fail(format!("gold entity {i}: {m}")))?;
            schema.entity_index(&ent.entity_type)?;
            if ent.entity_type == crate::schema::NONE {
                return Err(fail(format!("gold entity {i} has type NONE")));
            }
        }
        for (i, ev) in self.gold_events.iter().enumerate() {
            ev.trigger
                .validate(&lens)
                .map_err(|m| fail(format!("gold event {i}: {m}")))?;
            schema.event_index(&ev.event_type)?;
            if ev.event_type == crate::schema::NONE {
                return Err(fail(format!("gold event {i} has type NONE")));
            }
            for arg in &ev.arguments {
                schema.role_index(&arg.role)?;
                let ent = self.gold_entities.get(arg.entity).ok_or_else(|| {
                    fail(format!("gold event {i}: argument entity {} missing", arg.entity))
                })?;
                if ent.span.sentence != ev.trigger.sentence {
                    return Err(fail(format!(
                        "gold event {i}: argument entity {} is in sentence {}, trigger in sentence {}",
                        arg.entity, ent.span.sentence, ev.trigger.sentence
                    )));
                }
            }
        }
        if let Some(chains) = &self.coref_chains {
            for (c, chain) in chains.iter().enumerate() {
                for span in chain {
                    span.validate(&lens)
                        .map_err(|m| fail(format!("coref chain {c}: {m}")))?;
                }
            }
        }
        Ok(())
    }
}

pub fn parse_corpus<R: BufRead>(reader: R, schema: &LabelSchema, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |message: String| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let doc: Document = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        doc.validate(schema).map_err(|e| at(e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), schema, path)
}

pub fn write_corpus<W: Write>(mut w: W, docs: &[Document]) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut w, doc)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(BufWriter::new(file), docs).map_err(|e| Error::io(path, e))
}

/// Indices of the entity spans lying in the trigger's sentence, in input order.
pub fn argument_scope(trigger: &Span, entities: &[Span]) -> Vec<usize> {
    entities
        .iter()
        .enumerate()
        .filter(|(_, e)| e.sentence == trigger.sentence)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerCandidate {
    pub span: Span,
    /// Label of the highest-ranked path that produced the span.
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub span: Span,
    /// Log-probability per schema entity type, `NONE` first.
    pub scores: Vec<f64>,
}

impl EntityCandidate {
    /// Most probable non-NONE type and its probability.
    pub fn predicted(&self) -> Option<(usize, f64)> {
        let (best, &score) = self
            .scores
            .iter()
            .enumerate()
            .skip(1)
            .fold(None, |acc: Option<(usize, &f64)>, (i, s)| match acc {
                Some((_, b)) if *b >= *s => acc,
                _ => Some((i, s)),
            })?;
        Some((best, score.exp()))
    }
}

/// Machine-generated trigger and entity candidates of one document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub triggers: Vec<TriggerCandidate>,
    pub entities: Vec<EntityCandidate>,
    pub per_trigger_args: Vec<Vec<usize>>,
}

impl CandidateSet {
    /// Deduplicates spans (first occurrence wins) and derives argument scopes.
    pub fn new(triggers: Vec<TriggerCandidate>, entities: Vec<EntityCandidate>) -> Self {
        let mut seen = HashSet::new();
        let triggers: Vec<_> = triggers
            .into_iter()
            .filter(|t| seen.insert(t.span.offsets()))
            .collect();
        seen.clear();
        let entities: Vec<_> = entities
            .into_iter()
            .filter(|e| seen.insert(e.span.offsets()))
            .collect();
        let spans: Vec<Span> = entities.iter().map(|e| e.span).collect();
        let per_trigger_args = triggers
            .iter()
            .map(|t| argument_scope(&t.span, &spans))
            .collect();
        Self {
            triggers,
            entities,
            per_trigger_args,
        }
    }

    pub fn entity_spans(&self) -> Vec<Span> {
        self.entities.iter().map(|e| e.span).collect()
    }
}

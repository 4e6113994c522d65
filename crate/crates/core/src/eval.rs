//! Micro-averaged scoring of predicted documents against gold.
//!
//! Triggers match on `(sentence, start, end)`; classification also needs the
//! event type. A predicted argument is identified when some gold argument of
//! the same event type anywhere in the document has the same entity offsets;
//! role classification also needs the role. Entities match on head token and
//! type. Precision counts predictions that match; recall counts gold
//! mentions that are matched.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    /// Predictions that match gold.
    pub matched_predicted: usize,
    /// Gold mentions matched by a prediction.
    pub matched_gold: usize,
    /// Set when there were no predictions; precision is then reported as 0.
    pub precision_undefined: bool,
}

impl Prf {
    pub fn from_counts(matched_predicted: usize, predicted: usize, matched_gold: usize, gold: usize) -> Self {
        let precision = if predicted == 0 { 0.0 } else { matched_predicted as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { matched_gold as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { precision, recall, f1, predicted, gold, matched_predicted, matched_gold, precision_undefined: predicted == 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    /// Gold mentions with no prediction at the same offsets.
    pub missing: usize,
    /// Predictions at offsets with no gold mention.
    pub spurious: usize,
    /// Predictions at gold offsets with the wrong label.
    pub misclassified: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventScores {
    pub trigger_identification: Prf,
    pub trigger_classification: Prf,
    pub argument_identification: Prf,
    pub argument_role_classification: Prf,
    pub trigger_errors: ErrorCounts,
    pub argument_errors: ErrorCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityScores {
    pub entity_extraction: Prf,
    pub per_type: BTreeMap<String, Prf>,
    pub entity_errors: ErrorCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    #[serde(flatten)]
    pub events: EventScores,
    #[serde(flatten)]
    pub entities: EntityScores,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Pairs gold and predicted documents by id.
fn align<'a>(gold: &'a [Document], pred: &'a [Document]) -> Result<Vec<(&'a Document, &'a Document)>> {
    let mut by_id: HashMap<&str, &Document> = HashMap::new();
    for p in pred {
        if by_id.insert(&p.doc_id, p).is_some() {
            return Err(Error::Evaluation(format!("duplicate predicted document `{}`", p.doc_id)));
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(gold.len());
    for g in gold {
        if !seen.insert(g.doc_id.as_str()) {
            return Err(Error::Evaluation(format!("duplicate gold document `{}`", g.doc_id)));
        }
        let p = by_id
            .get(g.doc_id.as_str())
            .ok_or_else(|| Error::Evaluation(format!("no prediction for document `{}`", g.doc_id)))?;
        out.push((g, *p));
    }
    if let Some(extra) = pred.iter().find(|p| !seen.contains(p.doc_id.as_str())) {
        return Err(Error::Evaluation(format!("predicted document `{}` has no gold counterpart", extra.doc_id)));
    }
    Ok(out)
}

/// Counts for one task given `(offsets key, label)` mentions per document.
#[derive(Default)]
struct Tally {
    predicted: usize,
    gold: usize,
    id_pred: usize,
    id_gold: usize,
    cls_pred: usize,
    cls_gold: usize,
    errors: ErrorCounts,
}

impl Tally {
    fn add<K: std::hash::Hash + Eq + Clone, L: PartialEq + Clone + std::hash::Hash + Eq>(&mut self, gold: &[(K, L)], pred: &[(K, L)]) {
        let gold_keys: HashSet<&K> = gold.iter().map(|(k, _)| k).collect();
        let gold_full: HashSet<(&K, &L)> = gold.iter().map(|(k, l)| (k, l)).collect();
        let pred_keys: HashSet<&K> = pred.iter().map(|(k, _)| k).collect();
        let pred_full: HashSet<(&K, &L)> = pred.iter().map(|(k, l)| (k, l)).collect();
        self.predicted += pred.len();
        self.gold += gold.len();
        for (k, l) in pred {
            if gold_keys.contains(k) {
                self.id_pred += 1;
                if gold_full.contains(&(k, l)) {
                    self.cls_pred += 1;
                } else {
                    self.errors.misclassified += 1;
                }
            } else {
                self.errors.spurious += 1;
            }
        }
        for (k, l) in gold {
            if pred_keys.contains(k) {
                self.id_gold += 1;
                if pred_full.contains(&(k, l)) {
                    self.cls_gold += 1;
                }
            } else {
                self.errors.missing += 1;
            }
        }
    }

    fn identification(&self) -> Prf {
        Prf::from_counts(self.id_pred, self.predicted, self.id_gold, self.gold)
    }

    fn classification(&self) -> Prf {
        Prf::from_counts(self.cls_pred, self.predicted, self.cls_gold, self.gold)
    }
}

type TriggerKey = (usize, usize, usize);
/// Event type and entity offsets.
type ArgumentKey = (String, (usize, usize, usize));

fn triggers(doc: &Document) -> Vec<(TriggerKey, String)> {
    doc.gold_events.iter().map(|e| (e.trigger.offsets(), e.event_type.clone())).collect()
}

fn arguments(doc: &Document) -> Vec<(ArgumentKey, String)> {
    doc.gold_events
        .iter()
        .flat_map(|e| {
            e.arguments.iter().map(move |a| ((e.event_type.clone(), doc.gold_entities[a.entity].span.offsets()), a.role.clone()))
        })
        .collect()
}

fn head_key(span: &Span) -> (usize, usize) {
    (span.sentence, span.head_token())
}

pub fn score_events(gold: &[Document], pred: &[Document]) -> Result<EventScores> {
    let mut trig = Tally::default();
    let mut args = Tally::default();
    for (g, p) in align(gold, pred)? {
        trig.add(&triggers(g), &triggers(p));
        args.add(&arguments(g), &arguments(p));
    }
    Ok(EventScores {
        trigger_identification: trig.identification(),
        trigger_classification: trig.classification(),
        argument_identification: args.identification(),
        argument_role_classification: args.classification(),
        trigger_errors: trig.errors,
        argument_errors: args.errors,
    })
}

pub fn score_entities(gold: &[Document], pred: &[Document]) -> Result<EntityScores> {
    let mut all = Tally::default();
    let mut per: BTreeMap<String, (usize, usize, usize, usize)> = BTreeMap::new();
    for (g, p) in align(gold, pred)? {
        let gm: Vec<((usize, usize), String)> = g.gold_entities.iter().map(|e| (head_key(&e.span), e.entity_type.clone())).collect();
        let pm: Vec<((usize, usize), String)> = p.gold_entities.iter().map(|e| (head_key(&e.span), e.entity_type.clone())).collect();
        all.add(&gm, &pm);
        let gold_full: HashSet<(&(usize, usize), &String)> = gm.iter().map(|(k, l)| (k, l)).collect();
        let pred_full: HashSet<(&(usize, usize), &String)> = pm.iter().map(|(k, l)| (k, l)).collect();
        for (k, l) in &pm {
            let e = per.entry(l.clone()).or_default();
            e.1 += 1;
            e.0 += gold_full.contains(&(k, l)) as usize;
        }
        for (k, l) in &gm {
            let e = per.entry(l.clone()).or_default();
            e.3 += 1;
            e.2 += pred_full.contains(&(k, l)) as usize;
        }
    }
    Ok(EntityScores {
        entity_extraction: all.classification(),
        per_type: per.into_iter().map(|(t, (mp, p, mg, g))| (t, Prf::from_counts(mp, p, mg, g))).collect(),
        entity_errors: all.errors,
    })
}

pub fn evaluate(gold: &[Document], pred: &[Document]) -> Result<EvalReport> {
    Ok(EvalReport { documents: gold.len(), events: score_events(gold, pred)?, entities: score_entities(gold, pred)? })
}

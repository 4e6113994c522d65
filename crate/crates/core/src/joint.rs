//! Assembles the document-level joint problem from the three local models
//! and turns decoded assignments back into annotated documents.

use crate::ad3::{ad3_solve, Ad3Config, JointProblem, JointSolution, Status};
use crate::corpus::{Argument, CandidateSet, Document, EntityCandidate, EntityMention, EventMention, Span};
use crate::error::{Error, Result};
use crate::event_pair::{pair_log_table, select_pairs, PairFeatures, PairLayout};
use crate::features::Featurizer;
use crate::scalar::Real;
use crate::schema::{LabelSchema, NONE_INDEX};
use crate::within_event::{build_graph, exact_inference, export_tables, map_config, Compat, JointTables, WeFeatures, WeLayout};

/// Everything the decoders need besides the document and its candidates.
#[derive(Debug, Clone, Copy)]
pub struct DecodeModels<'a, S> {
    pub schema: &'a LabelSchema,
    pub compat: &'a Compat,
    pub featurizer: &'a Featurizer,
    pub we_layout: &'a WeLayout,
    pub we_params: &'a [S],
    pub pair_layout: &'a PairLayout,
    pub pair_params: &'a [S],
}

impl<S: Real> DecodeModels<'_, S> {
    fn check(&self) -> Result<()> {
        let (nt, nr, na) = (self.schema.num_events(), self.schema.num_roles(), self.schema.num_entities());
        let we = self.we_layout;
        if (self.compat.nt, self.compat.nr, self.compat.na) != (nt, nr, na)
            || (we.nt, we.nr, we.na) != (nt, nr, na)
            || self.pair_layout.nt != nt
        {
            return Err(Error::Config("schema label counts differ between models".into()));
        }
        if self.we_params.len() != we.len() || self.pair_params.len() != self.pair_layout.len() {
            return Err(Error::Config("parameter vector length does not match its layout".into()));
        }
        Ok(())
    }

    /// Within-event features and exported log-marginal tables of trigger `i`.
    pub fn event_tables(&self, doc: &Document, cands: &CandidateSet, i: usize) -> Result<(WeFeatures, JointTables<S>)> {
        let scope: Vec<&EntityCandidate> = cands.per_trigger_args[i].iter().map(|&j| &cands.entities[j]).collect();
        let feats = WeFeatures::extract(self.featurizer, doc, &cands.triggers[i].span, &scope, &self.schema.entity_types)?;
        let graph = build_graph(self.we_layout, self.we_params, self.compat, &feats);
        let marg = exact_inference(&graph, self.compat);
        Ok((feats, export_tables(&marg, self.compat)))
    }
}

/// A joint problem plus the maps from candidates to its variables.
#[derive(Debug, Clone)]
pub struct BuiltProblem<S> {
    pub problem: JointProblem<S>,
    pub trigger_vars: Vec<usize>,
    pub entity_vars: Vec<usize>,
    /// `(trigger candidate, entity candidate, role variable)`.
    pub role_vars: Vec<(usize, usize, usize)>,
    pub pairs: Vec<(usize, usize)>,
}

pub fn build_problem<S: Real>(doc: &Document, cands: &CandidateSet, models: &DecodeModels<'_, S>) -> Result<BuiltProblem<S>> {
    models.check()?;
    let na = models.schema.num_entities();
    let nr = models.schema.num_roles();
    let mut problem = JointProblem::new();
    let mut entity_vars = Vec::with_capacity(cands.entities.len());
    for (j, e) in cands.entities.iter().enumerate() {
        if e.scores.len() != na {
            return Err(Error::Config(format!("entity candidate {j} scores {} types, schema has {na}", e.scores.len())));
        }
        entity_vars.push(problem.add_entity(e.scores.iter().map(|&x| S::lit(x)).collect())?);
    }
    let mut trigger_vars = Vec::with_capacity(cands.triggers.len());
    let mut role_vars = Vec::new();
    for i in 0..cands.triggers.len() {
        let (_, tables) = models.event_tables(doc, cands, i)?;
        let tv = problem.add_trigger(tables.log_t)?;
        trigger_vars.push(tv);
        for (slot, &j) in cands.per_trigger_args[i].iter().enumerate() {
            let rv = problem.add_role(
                tv,
                entity_vars[j],
                vec![S::zero(); nr],
                tables.log_tr[slot].clone(),
                tables.log_ra[slot].clone(),
            )?;
            role_vars.push((i, j, rv));
        }
    }
    let spans: Vec<Span> = cands.triggers.iter().map(|t| t.span).collect();
    let pairs = select_pairs(doc, &spans);
    for &(i, k) in &pairs {
        let f = PairFeatures::extract(models.featurizer, doc, &spans[i], &spans[k]);
        let table = pair_log_table(models.pair_layout, models.pair_params, &f);
        problem.add_trigger_pair(trigger_vars[i], trigger_vars[k], table)?;
    }
    Ok(BuiltProblem { problem, trigger_vars, entity_vars, role_vars, pairs })
}

/// Labels chosen for each candidate, by candidate index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateLabels {
    pub triggers: Vec<usize>,
    pub entities: Vec<usize>,
    /// `(trigger candidate, entity candidate, role)` for non-NONE roles.
    pub roles: Vec<(usize, usize, usize)>,
}

impl<S: Real> BuiltProblem<S> {
    pub fn labels(&self, assignment: &[usize]) -> CandidateLabels {
        CandidateLabels {
            triggers: self.trigger_vars.iter().map(|&v| assignment[v]).collect(),
            entities: self.entity_vars.iter().map(|&v| assignment[v]).collect(),
            roles: self
                .role_vars
                .iter()
                .filter(|&&(_, _, v)| assignment[v] != NONE_INDEX)
                .map(|&(i, j, v)| (i, j, assignment[v]))
                .collect(),
        }
    }
}

/// Writes labelled candidates into a copy of `doc` with fresh annotations.
/// Entities listed in `entities` come first; argument fillers absent from it
/// are appended with the type in `filler_types`, which also overrides a
/// listed type the role does not admit.
fn materialize(
    doc: &Document,
    schema: &LabelSchema,
    cands: &CandidateSet,
    triggers: &[usize],
    entities: Vec<(Span, usize)>,
    roles: &[(usize, usize, usize)],
    filler_types: impl Fn(usize, usize) -> usize,
) -> Document {
    let mut out = doc.unlabeled();
    out.gold_entities = entities
        .into_iter()
        .map(|(span, a)| EntityMention { span, entity_type: schema.entity_types.name(a).to_string() })
        .collect();
    let mut event_of = vec![None; triggers.len()];
    for (i, &t) in triggers.iter().enumerate() {
        if t != NONE_INDEX {
            event_of[i] = Some(out.gold_events.len());
            out.gold_events.push(EventMention {
                trigger: cands.triggers[i].span,
                event_type: schema.event_types.name(t).to_string(),
                arguments: Vec::new(),
            });
        }
    }
    for &(i, j, r) in roles {
        let Some(ev) = event_of[i] else { continue };
        let span = cands.entities[j].span;
        let entity = match out.gold_entities.iter().position(|e| e.span.offsets() == span.offsets()) {
            Some(k) => {
                let a = schema.entity_types.get(&out.gold_entities[k].entity_type).unwrap_or(NONE_INDEX);
                if !schema.role_entity_allowed(r, a) {
                    out.gold_entities[k].entity_type = schema.entity_types.name(filler_types(i, j)).to_string();
                }
                k
            }
            None => {
                let a = filler_types(i, j);
                out.gold_entities.push(EntityMention { span, entity_type: schema.entity_types.name(a).to_string() });
                out.gold_entities.len() - 1
            }
        };
        out.gold_events[ev].arguments.push(Argument { entity, role: schema.role_types.name(r).to_string() });
    }
    // A later override may have retyped an earlier filler.
    let types: Vec<usize> = out.gold_entities.iter().map(|e| schema.entity_types.get(&e.entity_type).unwrap_or(NONE_INDEX)).collect();
    for ev in &mut out.gold_events {
        ev.arguments.retain(|arg| {
            let r = schema.role_types.get(&arg.role).unwrap_or(NONE_INDEX);
            schema.role_entity_allowed(r, types[arg.entity])
        });
    }
    out
}

#[derive(Debug, Clone)]
pub struct JointDecode<S> {
    pub document: Document,
    pub labels: CandidateLabels,
    pub solution: JointSolution<S>,
}

impl<S> JointDecode<S> {
    pub fn status(&self) -> Status {
        self.solution.status
    }
}

/// Joint decoding of one document with AD³.
pub fn decode_joint<S: Real>(
    doc: &Document,
    cands: &CandidateSet,
    models: &DecodeModels<'_, S>,
    cfg: &Ad3Config,
) -> Result<JointDecode<S>> {
    let built = build_problem(doc, cands, models)?;
    let solution = ad3_solve(&built.problem, cfg)?;
    let labels = built.labels(&solution.assignment);
    let entities = cands
        .entities
        .iter()
        .zip(&labels.entities)
        .filter(|(_, &a)| a != NONE_INDEX)
        .map(|(e, &a)| (e.span, a))
        .collect();
    let document = materialize(doc, models.schema, cands, &labels.triggers, entities, &labels.roles, |_, j| labels.entities[j]);
    Ok(JointDecode { document, labels, solution })
}

/// Baseline without the pair and entity terms: each trigger takes the MAP
/// configuration of its own event graph, and entities come from the
/// standalone CRF (`crf_entities`). Argument fillers the CRF missed are
/// added with the type chosen by their event graph.
pub fn decode_within_only<S: Real>(
    doc: &Document,
    cands: &CandidateSet,
    models: &DecodeModels<'_, S>,
    crf_entities: &[(Span, usize)],
) -> Result<Document> {
    models.check()?;
    let mut triggers = Vec::with_capacity(cands.triggers.len());
    let mut roles = Vec::new();
    let mut filler = std::collections::HashMap::new();
    for i in 0..cands.triggers.len() {
        let scope: Vec<&EntityCandidate> = cands.per_trigger_args[i].iter().map(|&j| &cands.entities[j]).collect();
        let feats = WeFeatures::extract(models.featurizer, doc, &cands.triggers[i].span, &scope, &models.schema.entity_types)?;
        let graph = build_graph(models.we_layout, models.we_params, models.compat, &feats);
        let (config, _) = map_config(&graph, models.compat);
        triggers.push(config.t);
        for (slot, &j) in cands.per_trigger_args[i].iter().enumerate() {
            if config.r[slot] != NONE_INDEX {
                roles.push((i, j, config.r[slot]));
                filler.insert((i, j), config.a[slot]);
            }
        }
    }
    Ok(materialize(doc, models.schema, cands, &triggers, crf_entities.to_vec(), &roles, |i, j| filler[&(i, j)]))
}

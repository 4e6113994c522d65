//! Seeded synthetic corpus with planted, learnable structure.
//!
//! Every event type has two trigger words of its own. Role fillers sit in a
//! slot determined by the role (subject, object, or after a role-specific
//! preposition). Entity mentions are drawn from type-indicative name lists,
//! and a second event in the same sentence follows a fixed co-occurrence table.
//! Dependency heads, POS tags, lemmas and surface-identity coreference chains
//! are emitted alongside.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Argument, Document, EntityMention, EventMention, Span, Token};
use crate::error::{Error, Result};
use crate::schema::{LabelSchema, NONE};

const TRIGGERS: &[(&str, [&str; 2])] = &[
    ("Be-Born", ["born", "birth"]),
    ("Marry", ["married", "wed"]),
    ("Divorce", ["divorced", "separated"]),
    ("Injure", ["injured", "wounded"]),
    ("Die", ["killed", "died"]),
    ("Transport", ["moved", "shipped"]),
    ("Transfer-Ownership", ["bought", "sold"]),
    ("Transfer-Money", ["paid", "donated"]),
    ("Start-Org", ["founded", "launched"]),
    ("Merge-Org", ["merged", "combined"]),
    ("Declare-Bankruptcy", ["bankrupt", "insolvent"]),
    ("End-Org", ["dissolved", "closed"]),
    ("Attack", ["attacked", "bombed"]),
    ("Demonstrate", ["protested", "rallied"]),
    ("Meet", ["met", "summit"]),
    ("Phone-Write", ["called", "wrote"]),
    ("Start-Position", ["hired", "appointed"]),
    ("End-Position", ["fired", "resigned"]),
    ("Nominate", ["nominated", "named"]),
    ("Elect", ["elected", "voted"]),
    ("Arrest-Jail", ["arrested", "jailed"]),
    ("Release-Parole", ["released", "freed"]),
    ("Trial-Hearing", ["tried", "hearing"]),
    ("Charge-Indict", ["charged", "indicted"]),
    ("Sue", ["sued", "suing"]),
    ("Convict", ["convicted", "guilty"]),
    ("Sentence", ["sentenced", "sentencing"]),
    ("Fine", ["fined", "penalized"]),
    ("Execute", ["executed", "hanged"]),
    ("Extradite", ["extradited", "deported"]),
    ("Acquit", ["acquitted", "cleared"]),
    ("Appeal", ["appealed", "appeal"]),
    ("Pardon", ["pardoned", "pardon"]),
];

const NOMINAL_TRIGGERS: &[&str] = &["birth", "summit", "hearing", "sentencing", "appeal", "pardon", "bankrupt", "insolvent", "guilty"];

const CO_OCCURRENCE: &[(&str, &[&str])] = &[
    ("Attack", &["Die", "Injure"]),
    ("Die", &["Attack"]),
    ("Injure", &["Attack"]),
    ("Transport", &["Attack"]),
    ("Be-Born", &["Marry"]),
    ("Marry", &["Be-Born"]),
    ("Divorce", &["Marry"]),
    ("Transfer-Ownership", &["Transfer-Money"]),
    ("Transfer-Money", &["Transfer-Ownership"]),
    ("Start-Org", &["Merge-Org"]),
    ("Merge-Org", &["Start-Org"]),
    ("Declare-Bankruptcy", &["End-Org"]),
    ("End-Org", &["Declare-Bankruptcy"]),
    ("Demonstrate", &["Arrest-Jail"]),
    ("Meet", &["Phone-Write"]),
    ("Phone-Write", &["Meet"]),
    ("Start-Position", &["End-Position"]),
    ("End-Position", &["Start-Position"]),
    ("Nominate", &["Elect"]),
    ("Elect", &["Start-Position"]),
    ("Arrest-Jail", &["Charge-Indict"]),
    ("Release-Parole", &["Arrest-Jail"]),
    ("Trial-Hearing", &["Convict"]),
    ("Charge-Indict", &["Trial-Hearing"]),
    ("Sue", &["Trial-Hearing"]),
    ("Convict", &["Sentence"]),
    ("Sentence", &["Convict"]),
    ("Fine", &["Convict"]),
    ("Execute", &["Convict"]),
    ("Extradite", &["Arrest-Jail"]),
    ("Acquit", &["Trial-Hearing"]),
    ("Appeal", &["Convict"]),
    ("Pardon", &["Release-Parole"]),
];

/// Preposition introducing a role that is neither subject nor object.
const ROLE_PREPOSITION: &[(&str, &str)] = &[
    ("Person", "with"),
    ("Place", "in"),
    ("Time", "on"),
    ("Buyer", "by"),
    ("Seller", "from"),
    ("Beneficiary", "for"),
    ("Price", "for"),
    ("Artifact", "of"),
    ("Origin", "from"),
    ("Destination", "to"),
    ("Giver", "from"),
    ("Recipient", "to"),
    ("Money", "of"),
    ("Org", "of"),
    ("Agent", "by"),
    ("Victim", "against"),
    ("Instrument", "with"),
    ("Entity", "with"),
    ("Attacker", "by"),
    ("Target", "against"),
    ("Defendant", "against"),
    ("Adjudicator", "before"),
    ("Prosecutor", "by"),
    ("Plaintiff", "by"),
    ("Crime", "for"),
    ("Position", "as"),
    ("Sentence", "to"),
    ("Vehicle", "via"),
];

const FIRST_NAMES: &[&str] = &["John", "Mary", "Ahmed", "Li", "Maria", "David", "Sara", "Omar", "Elena", "Kofi"];
const SURNAMES: &[&str] = &[
    "Smith", "Jones", "Brown", "Garcia", "Miller", "Davis", "Wilson", "Moore", "Taylor", "Anderson", "Thomas", "Jackson",
    "White", "Harris", "Martin", "Clark", "Lewis", "Walker", "Hall", "Young",
];
const ORG_NAMES: &[&str] = &["Acme", "Globex", "Initech", "Umbrella", "Stark", "Wayne", "Tyrell", "Cyberdyne", "Soylent", "Vandelay"];
const ORG_SUFFIXES: &[&str] = &["Corp", "Inc", "Group", "Bank", "Party"];
const GPE_NAMES: &[&str] = &["Baghdad", "France", "Texas", "Cairo", "Berlin", "Ohio", "Kenya", "Lima", "Tokyo", "Madrid", "Peru", "Chile"];
const LOC_NAMES: &[&str] = &["Nile", "Jordan", "Sahara", "Rhine", "Andes", "Gobi"];
const LOC_SUFFIXES: &[&str] = &["River", "Valley", "Mountains", "Desert"];
const FAC_SUFFIXES: &[&str] = &["Airport", "Bridge", "Prison", "Base", "Stadium"];
const VEHICLES: &[&str] = &["truck", "tank", "helicopter", "jet", "boat", "bus"];
const WEAPONS: &[&str] = &["rifle", "missile", "bomb", "grenade", "knife", "pistol"];
const NUMBERS: &[&str] = &["3", "5", "10", "20", "500", "1000"];
const CRIMES: &[&str] = &["fraud", "murder", "theft", "bribery", "treason"];
const POSITIONS: &[&str] = &["president", "minister", "director", "chairman"];
const TIMES: &[&str] = &["Monday", "Tuesday", "Friday", "March", "June", "yesterday"];
const FILLER_VERBS: &[&str] = &["said", "visited", "praised", "mentioned", "remained"];
const ADVERBS: &[&str] = &["reportedly", "later", "also", "quickly"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Share of sentences with entities but no event.
    pub entity_only_rate: f64,
    /// Probability that an event sentence carries a co-occurring second event.
    pub second_event_rate: f64,
    /// Probability that each optional (prepositional) role is realised.
    pub prep_role_rate: f64,
    /// Probability of appending a non-argument "according to X" mention.
    pub distractor_rate: f64,
    /// Probability of reusing an earlier mention of the document as a subject.
    pub reuse_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_train: 200,
            n_dev: 40,
            n_test: 30,
            min_sentences: 3,
            max_sentences: 6,
            entity_only_rate: 0.1,
            second_event_rate: 0.35,
            prep_role_rate: 0.35,
            distractor_rate: 0.2,
            reuse_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

struct EventSpec {
    name: String,
    triggers: [&'static str; 2],
    subject: Option<String>,
    object: Option<String>,
    /// `(role, preposition)`.
    extras: Vec<(String, &'static str)>,
    partners: Vec<String>,
}

struct Generator<'a> {
    schema: &'a LabelSchema,
    events: Vec<EventSpec>,
    by_name: BTreeMap<String, usize>,
    cfg: &'a SynthConfig,
}

/// Token under construction: surface, POS, head (sentence-local, `None` for root), label.
struct Tok {
    surface: String,
    pos: &'static str,
    head: Option<usize>,
    label: &'static str,
}

struct SentenceBuilder {
    toks: Vec<Tok>,
    entities: Vec<(usize, usize, String)>,
    events: Vec<(usize, String, Vec<(usize, String)>)>,
}

impl SentenceBuilder {
    fn new() -> Self {
        SentenceBuilder { toks: Vec::new(), entities: Vec::new(), events: Vec::new() }
    }

    fn push(&mut self, surface: &str, pos: &'static str, head: Option<usize>, label: &'static str) -> usize {
        self.toks.push(Tok { surface: surface.to_string(), pos, head, label });
        self.toks.len() - 1
    }

    /// Appends a head-final mention attached to `head`; returns the entity index.
    fn mention(&mut self, words: &[String], etype: &str, head: Option<usize>, label: &'static str) -> usize {
        let start = self.toks.len();
        let last = start + words.len() - 1;
        for (k, w) in words.iter().enumerate() {
            let pos = mention_pos(w, etype);
            if start + k == last {
                self.push(w, pos, head, label);
            } else {
                self.push(w, pos, Some(last), "compound");
            }
        }
        self.entities.push((start, last + 1, etype.to_string()));
        self.entities.len() - 1
    }

    fn attach(&mut self, tok: usize, head: usize, label: &'static str) {
        self.toks[tok].head = Some(head);
        self.toks[tok].label = label;
    }
}

fn mention_pos(word: &str, etype: &str) -> &'static str {
    if word == "$" {
        "$"
    } else if word.chars().all(|c| c.is_ascii_digit()) {
        "CD"
    } else if word.chars().next().is_some_and(char::is_uppercase) || matches!(etype, "PER" | "ORG" | "GPE") {
        "NNP"
    } else {
        "NN"
    }
}

impl<'a> Generator<'a> {
    fn new(schema: &'a LabelSchema, cfg: &'a SynthConfig) -> Result<Self> {
        let mut events = Vec::new();
        for &(name, triggers) in TRIGGERS {
            let Some(t) = schema.event_types.get(name) else { continue };
            let roles: Vec<String> = schema.roles_of(t).map(|r| schema.role_types.name(r).to_string()).collect();
            let usable = |r: &String| {
                let ri = schema.role_types.get(r).unwrap();
                schema.entities_of(ri).any(|a| a != 0)
            };
            let roles: Vec<String> = roles.into_iter().filter(usable).collect();
            let bound = |r: &str| matches!(r, "Time" | "Place");
            let subject = roles.first().filter(|r| !bound(r)).cloned();
            let object = roles.get(1).filter(|r| !bound(r) && subject.is_some()).cloned();
            let skip = subject.iter().count() + object.iter().count();
            let extras = roles
                .iter()
                .skip(skip)
                .map(|r| {
                    let prep = ROLE_PREPOSITION.iter().find(|(n, _)| n == r).map_or("with", |(_, p)| *p);
                    (r.clone(), prep)
                })
                .collect();
            let partners = CO_OCCURRENCE
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, ps)| ps.iter().filter(|p| schema.event_types.get(p).is_some()).map(|p| p.to_string()).collect())
                .unwrap_or_default();
            events.push(EventSpec { name: name.to_string(), triggers, subject, object, extras, partners });
        }
        if events.is_empty() {
            return Err(Error::Config("schema shares no event type with the synthetic generator".into()));
        }
        let by_name = events.iter().enumerate().map(|(i, e)| (e.name.clone(), i)).collect();
        Ok(Generator { schema, events, by_name, cfg })
    }

    fn entity_words(&self, rng: &mut ChaCha8Rng, etype: &str, role: Option<&str>) -> Vec<String> {
        let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs.choose(rng).unwrap().to_string();
        match etype {
            "PER" => {
                if rng.gen_bool(0.5) {
                    vec![pick(rng, FIRST_NAMES), pick(rng, SURNAMES)]
                } else {
                    vec![pick(rng, SURNAMES)]
                }
            }
            "ORG" => vec![pick(rng, ORG_NAMES), pick(rng, ORG_SUFFIXES)],
            "GPE" => vec![pick(rng, GPE_NAMES)],
            "LOC" => vec![pick(rng, LOC_NAMES), pick(rng, LOC_SUFFIXES)],
            "FAC" => vec![pick(rng, GPE_NAMES), pick(rng, FAC_SUFFIXES)],
            "VEH" => vec![pick(rng, VEHICLES)],
            "WEA" => vec![pick(rng, WEAPONS)],
            "TIME" => vec![pick(rng, TIMES)],
            _ => match role {
                Some("Crime") => vec![pick(rng, CRIMES)],
                Some("Position") => vec![pick(rng, POSITIONS)],
                Some("Sentence") => vec![pick(rng, NUMBERS), "years".to_string()],
                _ => vec!["$".to_string(), pick(rng, NUMBERS)],
            },
        }
    }

    fn entity_type(&self, rng: &mut ChaCha8Rng, role: &str) -> String {
        let r = self.schema.role_types.get(role).unwrap();
        let types: Vec<usize> = self.schema.entities_of(r).filter(|&a| a != 0).collect();
        self.schema.entity_types.name(*types.choose(rng).unwrap()).to_string()
    }

    /// Fills one clause around trigger token `trig`; returns `(entity index, role)` pairs.
    fn clause_arguments(
        &self,
        rng: &mut ChaCha8Rng,
        sb: &mut SentenceBuilder,
        spec: &EventSpec,
        trig: usize,
        extras_budget: usize,
    ) -> Vec<(usize, String)> {
        let mut args = Vec::new();
        if let Some(obj) = &spec.object {
            if rng.gen_bool(0.8) {
                let et = self.entity_type(rng, obj);
                let words = self.entity_words(rng, &et, Some(obj));
                let e = sb.mention(&words, &et, Some(trig), "dobj");
                args.push((e, obj.clone()));
            }
        }
        let mut extras: Vec<&(String, &'static str)> = spec.extras.iter().filter(|_| rng.gen_bool(self.cfg.prep_role_rate)).collect();
        extras.truncate(extras_budget);
        for (role, prep) in extras {
            let p = sb.push(prep, "IN", Some(trig), "prep");
            let et = self.entity_type(rng, role);
            let words = self.entity_words(rng, &et, Some(role));
            let e = sb.mention(&words, &et, Some(p), "pobj");
            args.push((e, role.clone()));
        }
        args
    }

    fn subject(
        &self,
        rng: &mut ChaCha8Rng,
        sb: &mut SentenceBuilder,
        role: &str,
        history: &[(Vec<String>, String)],
    ) -> usize {
        let et = self.entity_type(rng, role);
        let reuse: Vec<&(Vec<String>, String)> = history.iter().filter(|(_, t)| *t == et).collect();
        let words = if !reuse.is_empty() && rng.gen_bool(self.cfg.reuse_rate) {
            reuse.choose(rng).unwrap().0.clone()
        } else {
            self.entity_words(rng, &et, Some(role))
        };
        sb.mention(&words, &et, None, "nsubj")
    }

    fn event_sentence(&self, rng: &mut ChaCha8Rng, history: &[(Vec<String>, String)]) -> SentenceBuilder {
        let mut sb = SentenceBuilder::new();
        let spec = self.events.choose(rng).unwrap();
        let second = if !spec.partners.is_empty() && rng.gen_bool(self.cfg.second_event_rate) {
            spec.partners.choose(rng).map(|p| &self.events[self.by_name[p]])
        } else {
            None
        };
        let budget = if second.is_some() { 1 } else { 3 };
        let trig = self.clause(rng, &mut sb, spec, None, budget, history);
        if let Some(spec2) = second {
            sb.push(",", ",", Some(trig), "punct");
            sb.push("and", "CC", Some(trig), "cc");
            self.clause(rng, &mut sb, spec2, Some(trig), 1, history);
        }
        if rng.gen_bool(self.cfg.distractor_rate) {
            sb.push(",", ",", Some(trig), "punct");
            let acc = sb.push("according", "VBG", Some(trig), "advcl");
            let to = sb.push("to", "TO", Some(acc), "prep");
            let et = if rng.gen_bool(0.5) { "ORG" } else { "PER" };
            if self.schema.entity_types.get(et).is_some() {
                let words = self.entity_words(rng, et, None);
                sb.mention(&words, et, Some(to), "pobj");
            }
        }
        sb.push(".", ".", Some(trig), "punct");
        sb
    }

    /// One `subject trigger object preps` clause; returns the trigger token.
    fn clause(
        &self,
        rng: &mut ChaCha8Rng,
        sb: &mut SentenceBuilder,
        spec: &EventSpec,
        governor: Option<usize>,
        budget: usize,
        history: &[(Vec<String>, String)],
    ) -> usize {
        let mut args = Vec::new();
        let subj = match &spec.subject {
            Some(role) if rng.gen_bool(0.9) => {
                let e = self.subject(rng, sb, role, history);
                args.push((e, role.clone()));
                Some(e)
            }
            _ => None,
        };
        let adverb = if rng.gen_bool(0.15) { Some(sb.push(ADVERBS.choose(rng).unwrap(), "RB", None, "advmod")) } else { None };
        let word = spec.triggers[rng.gen_range(0..2)];
        let pos = if NOMINAL_TRIGGERS.contains(&word) { "NN" } else { "VBD" };
        let (head, label) = match governor {
            Some(g) => (Some(g), "conj"),
            None => (None, "root"),
        };
        let trig = sb.push(word, pos, head, label);
        if let Some(e) = subj {
            let h = sb.entities[e].1 - 1;
            sb.attach(h, trig, "nsubj");
        }
        if let Some(a) = adverb {
            sb.attach(a, trig, "advmod");
        }
        args.extend(self.clause_arguments(rng, sb, spec, trig, budget));
        sb.events.push((trig, spec.name.clone(), args));
        trig
    }

    fn entity_only_sentence(&self, rng: &mut ChaCha8Rng) -> SentenceBuilder {
        let mut sb = SentenceBuilder::new();
        let available = |t: &str| self.schema.entity_types.get(t).is_some();
        let subj_type = if available("PER") { "PER" } else { "ORG" };
        if available(subj_type) {
            let words = self.entity_words(rng, subj_type, None);
            sb.mention(&words, subj_type, None, "nsubj");
        }
        let verb = sb.push(FILLER_VERBS.choose(rng).unwrap(), "VBD", None, "root");
        if let Some(&(_, end, _)) = sb.entities.first() {
            sb.attach(end - 1, verb, "nsubj");
        }
        if available("GPE") {
            let words = self.entity_words(rng, "GPE", None);
            sb.mention(&words, "GPE", Some(verb), "dobj");
        }
        if available("TIME") && rng.gen_bool(0.5) {
            let p = sb.push("on", "IN", Some(verb), "prep");
            let words = self.entity_words(rng, "TIME", None);
            sb.mention(&words, "TIME", Some(p), "pobj");
        }
        sb.push(".", ".", Some(verb), "punct");
        sb
    }

    fn document(&self, rng: &mut ChaCha8Rng, doc_id: String) -> Document {
        let n = rng.gen_range(self.cfg.min_sentences..=self.cfg.max_sentences.max(self.cfg.min_sentences));
        let mut doc = Document {
            doc_id,
            sentences: Vec::new(),
            coref_chains: None,
            gold_entities: Vec::new(),
            gold_events: Vec::new(),
        };
        let mut history: Vec<(Vec<String>, String)> = Vec::new();
        let mut surfaces: BTreeMap<Vec<String>, Vec<Span>> = BTreeMap::new();
        for s in 0..n {
            let sb = if rng.gen_bool(self.cfg.entity_only_rate) {
                self.entity_only_sentence(rng)
            } else {
                self.event_sentence(rng, &history)
            };
            let base = doc.gold_entities.len();
            for (start, end, et) in &sb.entities {
                let span = Span::new(s, *start, *end);
                let words: Vec<String> = sb.toks[*start..*end].iter().map(|t| t.surface.clone()).collect();
                surfaces.entry(words.clone()).or_default().push(span);
                history.push((words, et.clone()));
                doc.gold_entities.push(EntityMention { span, entity_type: et.clone() });
            }
            for (trig, name, args) in &sb.events {
                doc.gold_events.push(EventMention {
                    trigger: Span::new(s, *trig, trig + 1),
                    event_type: name.clone(),
                    arguments: args.iter().map(|(e, role)| Argument { entity: base + e, role: role.clone() }).collect(),
                });
            }
            doc.sentences.push(
                sb.toks
                    .into_iter()
                    .map(|t| Token {
                        lemma: Some(t.surface.to_lowercase()),
                        pos: Some(t.pos.to_string()),
                        dep_head: Some(t.head.map_or(-1, |h| h as i64)),
                        dep_label: Some(t.label.to_string()),
                        surface: t.surface,
                    })
                    .collect(),
            );
        }
        let chains: Vec<Vec<Span>> = surfaces.into_values().filter(|c| c.len() > 1).collect();
        if !chains.is_empty() {
            doc.coref_chains = Some(chains);
        }
        doc
    }

    fn split(&self, stream: u64, prefix: &str, n: usize) -> Vec<Document> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        (0..n).map(|i| self.document(&mut rng, format!("{prefix}-{i:04}"))).collect()
    }
}

/// Generates train/dev/test splits from independent streams of one seed.
pub fn gen_synth(cfg: &SynthConfig, schema: &LabelSchema) -> Result<SynthCorpus> {
    if cfg.min_sentences == 0 || cfg.max_sentences < cfg.min_sentences {
        return Err(Error::Config("need 1 <= min_sentences <= max_sentences".into()));
    }
    for (name, p) in [
        ("entity_only_rate", cfg.entity_only_rate),
        ("second_event_rate", cfg.second_event_rate),
        ("prep_role_rate", cfg.prep_role_rate),
        ("distractor_rate", cfg.distractor_rate),
        ("reuse_rate", cfg.reuse_rate),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} must be a probability, got {p}")));
        }
    }
    if schema.num_entities() <= 1 || schema.entity_types.get(NONE) != Some(0) {
        return Err(Error::Config("schema needs entity types".into()));
    }
    let g = Generator::new(schema, cfg)?;
    Ok(SynthCorpus {
        train: g.split(0, "train", cfg.n_train),
        dev: g.split(1, "dev", cfg.n_dev),
        test: g.split(2, "test", cfg.n_test),
    })
}

//! Tree-structured model of a single event: trigger type `t`, one role
//! `r_j` and one entity type `a_j` per argument candidate, arranged as a
//! star `t — r_j — a_j`. Inference is exact sum-product (max-product for
//! MAP) and only ever visits schema-valid cells.

use log::warn;

use crate::corpus::{Document, EntityCandidate, Span};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Featurizer};
use crate::scalar::{add_sparse, dot_sparse, log_sum_exp, neg_sentinel, Real};
use crate::schema::{LabelSchema, LabelSet, NONE_INDEX};

/// Log of the smallest probability kept in exported tables.
pub const LOG_FLOOR: f64 = -690.7755278982137; // ln(1e-300)

/// Valid (t, r) and (r, a) cells of a schema, as dense masks and lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Compat {
    pub nt: usize,
    pub nr: usize,
    pub na: usize,
    tr: Vec<bool>,
    ra: Vec<bool>,
    /// Roles allowed for each event type, NONE included, ascending.
    pub roles_of: Vec<Vec<usize>>,
    /// Entity types allowed for each role, ascending.
    pub entities_of: Vec<Vec<usize>>,
}

impl Compat {
    pub fn from_schema(schema: &LabelSchema) -> Self {
        let (nt, nr, na) = (schema.num_events(), schema.num_roles(), schema.num_entities());
        let tr: Vec<bool> = (0..nt * nr).map(|i| schema.event_role_allowed(i / nr, i % nr)).collect();
        let ra: Vec<bool> = (0..nr * na).map(|i| schema.role_entity_allowed(i / na, i % na)).collect();
        Self::from_masks(nt, nr, na, tr, ra)
    }

    pub fn from_masks(nt: usize, nr: usize, na: usize, tr: Vec<bool>, ra: Vec<bool>) -> Self {
        let roles_of = (0..nt).map(|t| (0..nr).filter(|&r| tr[t * nr + r]).collect()).collect();
        let entities_of = (0..nr).map(|r| (0..na).filter(|&a| ra[r * na + a]).collect()).collect();
        Self {
            nt,
            nr,
            na,
            tr,
            ra,
            roles_of,
            entities_of,
        }
    }

    #[inline]
    pub fn tr_ok(&self, t: usize, r: usize) -> bool {
        self.tr[t * self.nr + r]
    }

    #[inline]
    pub fn ra_ok(&self, r: usize, a: usize) -> bool {
        self.ra[r * self.na + a]
    }

    pub fn valid(&self, cfg: &Config) -> bool {
        cfg.t < self.nt
            && cfg.r.len() == cfg.a.len()
            && cfg
                .r
                .iter()
                .zip(&cfg.a)
                .all(|(&r, &a)| r < self.nr && a < self.na && self.tr_ok(cfg.t, r) && self.ra_ok(r, a))
    }

    /// Number of table cells one argument candidate costs in inference.
    pub fn cells_per_argument(&self) -> usize {
        self.roles_of.iter().map(Vec::len).sum::<usize>() + self.entities_of.iter().map(Vec::len).sum::<usize>()
    }
}

/// Layout of θ₁…θ₅ inside one flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeLayout {
    pub nt: usize,
    pub nr: usize,
    pub na: usize,
    pub hash_bits: u32,
}

impl WeLayout {
    pub fn new(compat: &Compat, hash_bits: u32) -> Self {
        Self {
            nt: compat.nt,
            nr: compat.nr,
            na: compat.na,
            hash_bits,
        }
    }

    pub fn dim(&self) -> usize {
        1usize << self.hash_bits
    }

    pub fn theta1(&self) -> usize {
        0
    }

    pub fn theta2(&self) -> usize {
        self.nt * self.dim()
    }

    pub fn theta3(&self) -> usize {
        self.theta2() + self.nr * self.dim()
    }

    pub fn theta4(&self) -> usize {
        self.theta3() + self.nt * self.nr
    }

    pub fn theta5(&self) -> usize {
        self.theta4() + self.na * self.dim()
    }

    pub fn len(&self) -> usize {
        self.theta5() + self.nr * self.na
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Named blocks `(name, offset, length)` in storage order.
    pub fn blocks(&self) -> [(&'static str, usize, usize); 5] {
        [
            ("theta1", self.theta1(), self.nt * self.dim()),
            ("theta2", self.theta2(), self.nr * self.dim()),
            ("theta3", self.theta3(), self.nt * self.nr),
            ("theta4", self.theta4(), self.na * self.dim()),
            ("theta5", self.theta5(), self.nr * self.na),
        ]
    }
}

/// Feature vectors of one trigger candidate and its argument candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeFeatures {
    pub trigger: FeatureVector,
    pub arguments: Vec<FeatureVector>,
    pub entities: Vec<FeatureVector>,
}

impl WeFeatures {
    pub fn extract(
        featurizer: &Featurizer,
        doc: &Document,
        trigger: &Span,
        candidates: &[&EntityCandidate],
        entity_labels: &LabelSet,
    ) -> Result<Self> {
        let mut arguments = Vec::with_capacity(candidates.len());
        let mut entities = Vec::with_capacity(candidates.len());
        for c in candidates {
            arguments.push(featurizer.argument_features(doc, trigger, &c.span)?);
            let pred = c.predicted().map(|(l, p)| (entity_labels.name(l), p));
            entities.push(featurizer.entity_features(doc, &c.span, pred));
        }
        Ok(Self {
            trigger: featurizer.trigger_features(doc, trigger),
            arguments,
            entities,
        })
    }

    pub fn num_arguments(&self) -> usize {
        self.arguments.len()
    }
}

/// Full assignment of one event graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    pub t: usize,
    pub r: Vec<usize>,
    pub a: Vec<usize>,
}

impl Config {
    pub fn none(m: usize) -> Self {
        Self {
            t: NONE_INDEX,
            r: vec![NONE_INDEX; m],
            a: vec![NONE_INDEX; m],
        }
    }
}

/// Log-potentials of one event graph. The pairwise tables come from label
/// indicators only, so they are shared by every argument candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct EventGraph<S> {
    pub ut: Vec<S>,
    pub ur: Vec<Vec<S>>,
    pub ua: Vec<Vec<S>>,
    /// `nt × nr`, sentinel at invalid cells.
    pub ptr: Vec<S>,
    /// `nr × na`, sentinel at invalid cells.
    pub pra: Vec<S>,
}

impl<S: Real> EventGraph<S> {
    pub fn num_arguments(&self) -> usize {
        self.ur.len()
    }

    /// Exponent of the model for a configuration, `None` if invalid.
    pub fn score(&self, compat: &Compat, cfg: &Config) -> Option<S> {
        if !compat.valid(cfg) || cfg.r.len() != self.num_arguments() {
            return None;
        }
        let (nr, na) = (compat.nr, compat.na);
        let mut s = self.ut[cfg.t];
        for j in 0..cfg.r.len() {
            let (r, a) = (cfg.r[j], cfg.a[j]);
            s += self.ptr[cfg.t * nr + r] + self.ur[j][r] + self.pra[r * na + a] + self.ua[j][a];
        }
        Some(s)
    }
}

pub fn build_graph<S: Real>(layout: &WeLayout, params: &[S], compat: &Compat, feats: &WeFeatures) -> EventGraph<S> {
    let d = layout.dim();
    let ut = (0..layout.nt)
        .map(|t| dot_sparse(params, layout.theta1() + t * d, &feats.trigger))
        .collect();
    let ur = feats
        .arguments
        .iter()
        .map(|f| (0..layout.nr).map(|r| dot_sparse(params, layout.theta2() + r * d, f)).collect())
        .collect();
    let ua = feats
        .entities
        .iter()
        .map(|f| (0..layout.na).map(|a| dot_sparse(params, layout.theta4() + a * d, f)).collect())
        .collect();
    let ptr = (0..layout.nt * layout.nr)
        .map(|i| {
            if compat.tr_ok(i / layout.nr, i % layout.nr) {
                params[layout.theta3() + i]
            } else {
                neg_sentinel()
            }
        })
        .collect();
    let pra = (0..layout.nr * layout.na)
        .map(|i| {
            if compat.ra_ok(i / layout.na, i % layout.na) {
                params[layout.theta5() + i]
            } else {
                neg_sentinel()
            }
        })
        .collect();
    EventGraph { ut, ur, ua, ptr, pra }
}

/// Exact marginals of an event graph.
#[derive(Debug, Clone, PartialEq)]
pub struct WeMarginals<S> {
    pub log_z: S,
    pub t: Vec<S>,
    pub r: Vec<Vec<S>>,
    pub a: Vec<Vec<S>>,
    /// Per argument, `nt × nr`.
    pub tr: Vec<Vec<S>>,
    /// Per argument, `nr × na`.
    pub ra: Vec<Vec<S>>,
    /// Table cells visited by the two message passes.
    pub cells_evaluated: usize,
}

pub fn exact_inference<S: Real>(g: &EventGraph<S>, compat: &Compat) -> WeMarginals<S> {
    let (nt, nr, na) = (compat.nt, compat.nr, compat.na);
    let m = g.num_arguments();
    let mut cells = 0usize;
    let mut buf: Vec<S> = Vec::with_capacity(nr.max(na));
    // b[j][r]: entity-side message into r_j; msg[j][t]: message from r_j into t.
    let mut b = vec![vec![S::neg_infinity(); nr]; m];
    let mut msg = vec![vec![S::neg_infinity(); nt]; m];
    for j in 0..m {
        for r in 0..nr {
            buf.clear();
            for &a in &compat.entities_of[r] {
                buf.push(g.pra[r * na + a] + g.ua[j][a]);
            }
            cells += buf.len();
            b[j][r] = log_sum_exp(&buf);
        }
        for t in 0..nt {
            buf.clear();
            for &r in &compat.roles_of[t] {
                buf.push(g.ptr[t * nr + r] + g.ur[j][r] + b[j][r]);
            }
            cells += buf.len();
            msg[j][t] = log_sum_exp(&buf);
        }
    }
    let lt: Vec<S> = (0..nt)
        .map(|t| g.ut[t] + (0..m).map(|j| msg[j][t]).fold(S::zero(), |x, y| x + y))
        .collect();
    let log_z = log_sum_exp(&lt);
    let pt: Vec<S> = lt.iter().map(|&x| (x - log_z).exp()).collect();

    let mut tr = Vec::with_capacity(m);
    let mut ra = Vec::with_capacity(m);
    let mut pr = Vec::with_capacity(m);
    let mut pa = Vec::with_capacity(m);
    for j in 0..m {
        let mut ptr_j = vec![S::zero(); nt * nr];
        let mut pr_j = vec![S::zero(); nr];
        for t in 0..nt {
            let base = lt[t] - msg[j][t] - log_z;
            for &r in &compat.roles_of[t] {
                let p = (base + g.ptr[t * nr + r] + g.ur[j][r] + b[j][r]).exp();
                ptr_j[t * nr + r] = p;
                pr_j[r] += p;
            }
        }
        let mut pra_j = vec![S::zero(); nr * na];
        let mut pa_j = vec![S::zero(); na];
        for r in 0..nr {
            if pr_j[r] == S::zero() {
                continue;
            }
            for &a in &compat.entities_of[r] {
                let p = pr_j[r] * (g.pra[r * na + a] + g.ua[j][a] - b[j][r]).exp();
                pra_j[r * na + a] = p;
                pa_j[a] += p;
            }
        }
        tr.push(ptr_j);
        ra.push(pra_j);
        pr.push(pr_j);
        pa.push(pa_j);
    }
    WeMarginals {
        log_z,
        t: pt,
        r: pr,
        a: pa,
        tr,
        ra,
        cells_evaluated: cells,
    }
}

/// Highest-scoring valid configuration. Ties resolve lexicographically over
/// `(t, r_1, a_1, r_2, a_2, …)` with lower label indices first.
pub fn map_config<S: Real>(g: &EventGraph<S>, compat: &Compat) -> (Config, S) {
    let (nt, nr, na) = (compat.nt, compat.nr, compat.na);
    let m = g.num_arguments();
    let mut best_a = vec![vec![0usize; nr]; m];
    let mut best_r = vec![vec![0usize; nt]; m];
    let mut val_r = vec![vec![S::zero(); nt]; m];
    for j in 0..m {
        let mut val_a = vec![S::zero(); nr];
        for r in 0..nr {
            let mut best = None;
            for &a in &compat.entities_of[r] {
                let s = g.pra[r * na + a] + g.ua[j][a];
                if best.is_none_or(|(_, v)| s > v) {
                    best = Some((a, s));
                }
            }
            let (a, v) = best.unwrap_or((0, neg_sentinel()));
            best_a[j][r] = a;
            val_a[r] = v;
        }
        for t in 0..nt {
            let mut best = None;
            for &r in &compat.roles_of[t] {
                let s = g.ptr[t * nr + r] + g.ur[j][r] + val_a[r];
                if best.is_none_or(|(_, v)| s > v) {
                    best = Some((r, s));
                }
            }
            let (r, v) = best.unwrap_or((0, neg_sentinel()));
            best_r[j][t] = r;
            val_r[j][t] = v;
        }
    }
    let mut t_best = 0;
    let mut v_best = S::neg_infinity();
    for t in 0..nt {
        let v = g.ut[t] + (0..m).map(|j| val_r[j][t]).fold(S::zero(), |x, y| x + y);
        if v > v_best {
            t_best = t;
            v_best = v;
        }
    }
    let r: Vec<usize> = (0..m).map(|j| best_r[j][t_best]).collect();
    let a: Vec<usize> = (0..m).map(|j| best_a[j][r[j]]).collect();
    (Config { t: t_best, r, a }, v_best)
}

/// One training instance: a trigger candidate with projected gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeInstance {
    pub features: WeFeatures,
    pub gold: Config,
}

/// Negative L2-regularized log-likelihood; gradient written into `grad`.
pub fn objective_into<S: Real>(
    layout: &WeLayout,
    compat: &Compat,
    params: &[S],
    data: &[WeInstance],
    lambda: S,
    grad: &mut [S],
) -> S {
    let d = layout.dim();
    let (nr, na) = (layout.nr, layout.na);
    grad.iter_mut().for_each(|g| *g = S::zero());
    let mut value = S::zero();
    let one = S::one();
    for inst in data {
        let f = &inst.features;
        let g = build_graph(layout, params, compat, f);
        let marg = exact_inference(&g, compat);
        let gold_score = g
            .score(compat, &inst.gold)
            .expect("training instance with an invalid gold configuration");
        value += marg.log_z - gold_score;

        for t in 0..layout.nt {
            add_sparse(grad, layout.theta1() + t * d, &f.trigger, marg.t[t]);
        }
        add_sparse(grad, layout.theta1() + inst.gold.t * d, &f.trigger, -one);
        for j in 0..f.num_arguments() {
            let (gr, ga) = (inst.gold.r[j], inst.gold.a[j]);
            for r in 0..nr {
                if marg.r[j][r] != S::zero() {
                    add_sparse(grad, layout.theta2() + r * d, &f.arguments[j], marg.r[j][r]);
                }
            }
            add_sparse(grad, layout.theta2() + gr * d, &f.arguments[j], -one);
            for a in 0..na {
                if marg.a[j][a] != S::zero() {
                    add_sparse(grad, layout.theta4() + a * d, &f.entities[j], marg.a[j][a]);
                }
            }
            add_sparse(grad, layout.theta4() + ga * d, &f.entities[j], -one);
            let off3 = layout.theta3();
            for (i, &p) in marg.tr[j].iter().enumerate() {
                grad[off3 + i] += p;
            }
            grad[off3 + inst.gold.t * nr + gr] -= one;
            let off5 = layout.theta5();
            for (i, &p) in marg.ra[j].iter().enumerate() {
                grad[off5 + i] += p;
            }
            grad[off5 + gr * na + ga] -= one;
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
    layout: &WeLayout,
    compat: &Compat,
    params: &[S],
    data: &[WeInstance],
    lambda: S,
) -> Result<(S, Vec<S>)> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet("within-event"));
    }
    let mut grad = vec![S::zero(); params.len()];
    let v = objective_into(layout, compat, params, data, lambda, &mut grad);
    Ok((v, grad))
}

/// Log-marginal tables used by the joint decoder: `log p(t)`, and per
/// argument `log p(t, r_j)` and `log p(r_j, a_j)`. Valid cells are clamped
/// below at `ln 1e-300`; invalid cells hold the sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTables<S> {
    pub log_t: Vec<S>,
    pub log_tr: Vec<Vec<S>>,
    pub log_ra: Vec<Vec<S>>,
}

pub fn export_tables<S: Real>(marg: &WeMarginals<S>, compat: &Compat) -> JointTables<S> {
    let floor = S::lit(LOG_FLOOR);
    let clamp = |p: S| p.ln().max(floor);
    let log_t = marg.t.iter().map(|&p| clamp(p)).collect();
    let log_tr = marg
        .tr
        .iter()
        .map(|tab| {
            (0..tab.len())
                .map(|i| {
                    if compat.tr_ok(i / compat.nr, i % compat.nr) {
                        clamp(tab[i])
                    } else {
                        neg_sentinel()
                    }
                })
                .collect()
        })
        .collect();
    let log_ra = marg
        .ra
        .iter()
        .map(|tab| {
            (0..tab.len())
                .map(|i| {
                    if compat.ra_ok(i / compat.na, i % compat.na) {
                        clamp(tab[i])
                    } else {
                        neg_sentinel()
                    }
                })
                .collect()
        })
        .collect();
    JointTables { log_t, log_tr, log_ra }
}

impl<S: Real> JointTables<S> {
    /// `log p(t) + Σ_j log p(t, r_j) + Σ_j log p(r_j, a_j)`.
    pub fn energy(&self, compat: &Compat, cfg: &Config) -> S {
        let mut e = self.log_t[cfg.t];
        for j in 0..cfg.r.len() {
            e += self.log_tr[j][cfg.t * compat.nr + cfg.r[j]];
            e += self.log_ra[j][cfg.r[j] * compat.na + cfg.a[j]];
        }
        e
    }
}

/// Projects gold annotation onto a trigger candidate and its argument
/// candidates by exact span match. Returns `None` when the projection is
/// not a schema-valid configuration.
pub fn project_gold(doc: &Document, schema: &LabelSchema, trigger: &Span, arguments: &[Span]) -> Option<Config> {
    let event = doc
        .gold_events
        .iter()
        .find(|e| e.trigger.offsets() == trigger.offsets());
    let t = event
        .and_then(|e| schema.event_types.get(&e.event_type))
        .unwrap_or(NONE_INDEX);
    let mut r = Vec::with_capacity(arguments.len());
    let mut a = Vec::with_capacity(arguments.len());
    for span in arguments {
        let role = event
            .and_then(|e| {
                e.arguments
                    .iter()
                    .find(|arg| doc.gold_entities.get(arg.entity).is_some_and(|m| m.span.offsets() == span.offsets()))
            })
            .and_then(|arg| schema.role_types.get(&arg.role))
            .unwrap_or(NONE_INDEX);
        let ent = doc
            .gold_entities
            .iter()
            .find(|m| m.span.offsets() == span.offsets())
            .and_then(|m| schema.entity_types.get(&m.entity_type))
            .unwrap_or(NONE_INDEX);
        r.push(role);
        a.push(ent);
    }
    let cfg = Config { t, r, a };
    let compat_ok = cfg
        .r
        .iter()
        .zip(&cfg.a)
        .all(|(&rr, &aa)| schema.valid_triple(cfg.t, rr, aa));
    if compat_ok {
        Some(cfg)
    } else {
        warn!(
            "{}: gold projection onto trigger {:?} is not schema-valid; instance skipped",
            doc.doc_id,
            trigger.offsets()
        );
        None
    }
}

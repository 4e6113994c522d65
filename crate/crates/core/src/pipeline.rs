//! Staged training (entity CRF, trigger CRF, cross-fold candidates,
//! within-event model, event-pair model), the model bundle, and prediction.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ad3::{Ad3Config, Status, TraceRow};
use crate::container::Container;
use crate::corpus::{CandidateSet, Document, EntityCandidate, EntityMention, Span};
use crate::crf::{build_instances, entity_gold, objective_into as crf_objective, trigger_gold, BioTags, ChainModel, CrfInstance};
use crate::error::{Error, Result};
use crate::event_pair::{objective_into as pair_objective, project_pair_gold, select_pairs, PairFeatures, PairInstance, PairLayout};
use crate::features::{fnv1a64, HASH_SCHEME};
use crate::features::{FeatureConfig, Featurizer, Provider};
use crate::joint::{decode_joint, decode_within_only, DecodeModels, JointDecode};
use crate::optim::{check_gradient, lbfgs_minimize, LbfgsConfig, LbfgsTrace, StopReason};
use crate::schema::{LabelSchema, NONE_INDEX};
use crate::within_event::{objective_into as we_objective, project_gold, Compat, WeFeatures, WeInstance, WeLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub features: FeatureConfig,
    /// L2 coefficient shared by every model unless overridden below.
    pub lambda: f64,
    pub lambda_entity: Option<f64>,
    pub lambda_trigger: Option<f64>,
    pub lambda_within: Option<f64>,
    pub lambda_pair: Option<f64>,
    pub lbfgs: LbfgsConfig,
    /// Iteration cap for the per-fold CRFs that produce training candidates.
    pub fold_max_iters: usize,
    pub folds: usize,
    pub k_entities: usize,
    pub k_triggers: usize,
    /// Fraction of NONE trigger candidates kept as within-event instances.
    pub negative_rate: f64,
    pub include_none_pairs: bool,
    pub seed: u64,
    pub ad3: Ad3Config,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            features: FeatureConfig::default().with_bits(14),
            lambda: 1.0,
            lambda_entity: None,
            lambda_trigger: None,
            lambda_within: None,
            lambda_pair: None,
            lbfgs: LbfgsConfig::default(),
            fold_max_iters: 50,
            folds: 10,
            k_entities: 50,
            k_triggers: 10,
            negative_rate: 1.0,
            include_none_pairs: true,
            seed: 42,
            ad3: Ad3Config::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.lbfgs.validate()?;
        self.ad3.validate()?;
        let lambdas = [Some(self.lambda), self.lambda_entity, self.lambda_trigger, self.lambda_within, self.lambda_pair];
        if lambdas.iter().flatten().any(|&l| !(l >= 0.0)) {
            return Err(Error::Config("L2 coefficients must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.negative_rate) {
            return Err(Error::Config(format!("negative_rate must lie in [0, 1], got {}", self.negative_rate)));
        }
        if self.k_entities == 0 || self.k_triggers == 0 || self.fold_max_iters == 0 {
            return Err(Error::Config("k_entities, k_triggers and fold_max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub instances: usize,
    pub params: usize,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub final_value: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub stages: Vec<StageReport>,
    /// Share of gold triggers matched by cross-fold trigger candidates.
    pub trigger_coverage: f64,
    /// Share of gold entities matched by cross-fold entity candidates.
    pub entity_coverage: f64,
}

/// All trained parameters plus the configuration and schema they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: TrainConfig,
    pub schema: LabelSchema,
    pub entity_crf: ChainModel<f64>,
    pub trigger_crf: ChainModel<f64>,
    pub we_params: Vec<f64>,
    pub pair_params: Vec<f64>,
}

fn in_stage<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage { stage, source: Box::new(e) })
}

fn lbfgs_report(stage: &str, instances: usize, params: usize, trace: &LbfgsTrace, started: Instant) -> StageReport {
    StageReport {
        stage: stage.to_string(),
        instances,
        params,
        iterations: trace.steps.len(),
        stop: Some(trace.stop),
        final_value: trace.final_value(),
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn train_crf(
    data: &[CrfInstance],
    tags: BioTags,
    bits: u32,
    lambda: f64,
    lbfgs: &LbfgsConfig,
    what: &'static str,
) -> Result<(ChainModel<f64>, LbfgsTrace)> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet(what));
    }
    let k = tags.len();
    let init = vec![0.0; crate::crf::num_params(k, bits)];
    let (params, trace) = lbfgs_minimize(|w: &[f64], g: &mut [f64]| crf_objective(k, bits, w, data, lambda, g), init, lbfgs)?;
    Ok((ChainModel::from_params(tags, bits, params), trace))
}

/// The three feature views used by the models: entity CRF, trigger CRF
/// (gazetteer off), and the within-event and pair models.
#[derive(Debug, Clone)]
pub struct Featurizers {
    pub entity: Featurizer,
    pub trigger: Featurizer,
    pub event: Featurizer,
}

impl Featurizers {
    pub fn new(cfg: &FeatureConfig) -> Result<Self> {
        let event = Featurizer::new(cfg.clone())?;
        Ok(Featurizers { entity: event.clone(), trigger: event.restricted(Provider::Gazetteer), event })
    }
}

pub fn generate_candidates(
    entity: &ChainModel<f64>,
    trigger: &ChainModel<f64>,
    feats: &Featurizers,
    doc: &Document,
    k_entities: usize,
    k_triggers: usize,
) -> CandidateSet {
    CandidateSet::new(
        trigger.trigger_candidates(&feats.trigger, doc, k_triggers),
        entity.entity_candidates(&feats.entity, doc, k_entities),
    )
}

/// Fraction of gold `(triggers, entities)` whose exact span is among the candidates.
pub fn coverage(docs: &[Document], cands: &[CandidateSet]) -> (f64, f64) {
    let (mut t_hit, mut t_all, mut e_hit, mut e_all) = (0usize, 0usize, 0usize, 0usize);
    for (doc, c) in docs.iter().zip(cands) {
        for ev in &doc.gold_events {
            t_all += 1;
            t_hit += c.triggers.iter().any(|t| t.span.offsets() == ev.trigger.offsets()) as usize;
        }
        for e in &doc.gold_entities {
            e_all += 1;
            e_hit += c.entities.iter().any(|x| x.span.offsets() == e.span.offsets()) as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    (ratio(t_hit, t_all), ratio(e_hit, e_all))
}

/// Within-event training instances for every candidate trigger whose gold
/// configuration fits its argument scope; NONE triggers are kept with
/// probability `negative_rate`.
pub fn within_instances(
    docs: &[Document],
    candidates: &[CandidateSet],
    schema: &LabelSchema,
    featurizer: &Featurizer,
    cfg: &TrainConfig,
) -> Result<Vec<WeInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = Vec::new();
    for (doc, c) in docs.iter().zip(candidates) {
        for (i, trig) in c.triggers.iter().enumerate() {
            let scope: Vec<&EntityCandidate> = c.per_trigger_args[i].iter().map(|&j| &c.entities[j]).collect();
            let spans: Vec<Span> = scope.iter().map(|e| e.span).collect();
            let Some(gold) = project_gold(doc, schema, &trig.span, &spans) else { continue };
            if gold.t == NONE_INDEX && cfg.negative_rate < 1.0 && rng.gen::<f64>() >= cfg.negative_rate {
                continue;
            }
            let features = WeFeatures::extract(featurizer, doc, &trig.span, &scope, &schema.entity_types)?;
            data.push(WeInstance { features, gold });
        }
    }
    Ok(data)
}

/// Event-pair training instances over the selected candidate trigger pairs.
pub fn pair_instances(
    docs: &[Document],
    candidates: &[CandidateSet],
    schema: &LabelSchema,
    featurizer: &Featurizer,
    cfg: &TrainConfig,
) -> Vec<PairInstance> {
    let mut data = Vec::new();
    for (doc, c) in docs.iter().zip(candidates) {
        let spans: Vec<Span> = c.triggers.iter().map(|t| t.span).collect();
        for (i, k) in select_pairs(doc, &spans) {
            let gold = project_pair_gold(doc, schema, &spans[i], &spans[k]);
            if !cfg.include_none_pairs && gold == (NONE_INDEX, NONE_INDEX) {
                continue;
            }
            data.push(PairInstance { features: PairFeatures::extract(featurizer, doc, &spans[i], &spans[k]), gold });
        }
    }
    data
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradModel {
    Crf,
    Within,
    Pair,
}

/// Largest relative gradient error of one training objective at random
/// parameters in [-0.5, 0.5]. `Crf` checks both the entity and trigger
/// CRFs; the other two build their instances from candidates of CRFs
/// trained with `cfg`.
pub fn gradient_check(
    docs: &[Document],
    schema: &LabelSchema,
    cfg: &TrainConfig,
    model: GradModel,
    eps: f64,
    n_coords: usize,
    seed: u64,
) -> Result<f64> {
    cfg.validate()?;
    let feats = Featurizers::new(&cfg.features)?;
    let bits = cfg.features.hash_bits;
    let lam = |o: Option<f64>| o.unwrap_or(cfg.lambda);
    let all: Vec<&Document> = docs.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect() };
    let etags = BioTags::from_label_set(&schema.entity_types);
    let ttags = BioTags::from_label_set(&schema.event_types);
    let edata = build_instances(&all, &feats.entity, &etags, |d| entity_gold(d, &schema.entity_types));
    let tdata = build_instances(&all, &feats.trigger, &ttags, |d| trigger_gold(d, &schema.event_types));
    if model == GradModel::Crf {
        let mut worst = 0.0f64;
        for (tags, data, l) in [(&etags, &edata, lam(cfg.lambda_entity)), (&ttags, &tdata, lam(cfg.lambda_trigger))] {
            let w = random(crate::crf::num_params(tags.len(), bits));
            let err = check_gradient(|w: &[f64], g: &mut [f64]| crf_objective(tags.len(), bits, w, data, l, g), &w, eps, n_coords, seed);
            worst = worst.max(err);
        }
        return Ok(worst);
    }
    let (em, _) = train_crf(&edata, etags.clone(), bits, lam(cfg.lambda_entity), &cfg.lbfgs, "entity CRF")?;
    let (tm, _) = train_crf(&tdata, ttags.clone(), bits, lam(cfg.lambda_trigger), &cfg.lbfgs, "trigger CRF")?;
    let cands: Vec<CandidateSet> =
        docs.iter().map(|d| generate_candidates(&em, &tm, &feats, d, cfg.k_entities, cfg.k_triggers)).collect();
    match model {
        GradModel::Within => {
            let compat = Compat::from_schema(schema);
            let layout = WeLayout::new(&compat, bits);
            let data = within_instances(docs, &cands, schema, &feats.event, cfg)?;
            if data.is_empty() {
                return Err(Error::EmptyTrainingSet("within-event"));
            }
            let w = random(layout.len());
            let l = lam(cfg.lambda_within);
            Ok(check_gradient(|w: &[f64], g: &mut [f64]| we_objective(&layout, &compat, w, &data, l, g), &w, eps, n_coords, seed))
        }
        _ => {
            let layout = PairLayout::new(schema.num_events(), bits);
            let data = pair_instances(docs, &cands, schema, &feats.event, cfg);
            if data.is_empty() {
                return Err(Error::EmptyTrainingSet("event-pair"));
            }
            let w = random(layout.len());
            let l = lam(cfg.lambda_pair);
            Ok(check_gradient(|w: &[f64], g: &mut [f64]| pair_objective(&layout, w, &data, l, g), &w, eps, n_coords, seed))
        }
    }
}

/// Trains every stage in order and returns the bundle with a per-stage report.
pub fn train_pipeline(docs: &[Document], schema: &LabelSchema, cfg: &TrainConfig) -> Result<(ModelBundle, TrainReport)> {
    cfg.validate()?;
    for d in docs {
        d.validate(schema)?;
    }
    let feats = Featurizers::new(&cfg.features)?;
    let bits = cfg.features.hash_bits;
    let lam = |o: Option<f64>| o.unwrap_or(cfg.lambda);
    let all: Vec<&Document> = docs.iter().collect();
    let mut report = TrainReport::default();

    let started = Instant::now();
    let (entity_crf, trace) = in_stage("entity_crf", || {
        let data = build_instances(&all, &feats.entity, &BioTags::from_label_set(&schema.entity_types), |d| entity_gold(d, &schema.entity_types));
        let out = train_crf(&data, BioTags::from_label_set(&schema.entity_types), bits, lam(cfg.lambda_entity), &cfg.lbfgs, "entity CRF")?;
        report.stages.push(lbfgs_report("entity_crf", data.len(), out.0.params.len(), &out.1, started));
        Ok(out)
    })?;
    log::info!("entity CRF: {} iterations, stop {:?}", trace.steps.len(), trace.stop);

    let started = Instant::now();
    let (trigger_crf, trace) = in_stage("trigger_crf", || {
        let tags = BioTags::from_label_set(&schema.event_types);
        let data = build_instances(&all, &feats.trigger, &tags, |d| trigger_gold(d, &schema.event_types));
        let out = train_crf(&data, tags, bits, lam(cfg.lambda_trigger), &cfg.lbfgs, "trigger CRF")?;
        report.stages.push(lbfgs_report("trigger_crf", data.len(), out.0.params.len(), &out.1, started));
        Ok(out)
    })?;
    log::info!("trigger CRF: {} iterations, stop {:?}", trace.steps.len(), trace.stop);

    let started = Instant::now();
    let candidates = in_stage("candidates", || {
        let mut cands: Vec<Option<CandidateSet>> = vec![None; docs.len()];
        let folds = cfg.folds;
        if folds < 2 || docs.len() < folds {
            for (i, d) in docs.iter().enumerate() {
                cands[i] = Some(generate_candidates(&entity_crf, &trigger_crf, &feats, d, cfg.k_entities, cfg.k_triggers));
            }
        } else {
            let fold_lbfgs = LbfgsConfig { max_iters: cfg.fold_max_iters, ..cfg.lbfgs.clone() };
            for f in 0..folds {
                let rest: Vec<&Document> = all.iter().enumerate().filter(|(i, _)| i % folds != f).map(|(_, d)| *d).collect();
                let etags = BioTags::from_label_set(&schema.entity_types);
                let edata = build_instances(&rest, &feats.entity, &etags, |d| entity_gold(d, &schema.entity_types));
                let (em, _) = train_crf(&edata, etags, bits, lam(cfg.lambda_entity), &fold_lbfgs, "entity CRF fold")?;
                let ttags = BioTags::from_label_set(&schema.event_types);
                let tdata = build_instances(&rest, &feats.trigger, &ttags, |d| trigger_gold(d, &schema.event_types));
                let (tm, _) = train_crf(&tdata, ttags, bits, lam(cfg.lambda_trigger), &fold_lbfgs, "trigger CRF fold")?;
                for (i, d) in docs.iter().enumerate().filter(|(i, _)| i % folds == f) {
                    cands[i] = Some(generate_candidates(&em, &tm, &feats, d, cfg.k_entities, cfg.k_triggers));
                }
                log::info!("candidate fold {f} done");
            }
        }
        Ok(cands.into_iter().map(Option::unwrap).collect::<Vec<_>>())
    })?;
    let (tc, ec) = coverage(docs, &candidates);
    report.trigger_coverage = tc;
    report.entity_coverage = ec;
    report.stages.push(StageReport {
        stage: "candidates".into(),
        instances: docs.len(),
        params: 0,
        iterations: 0,
        stop: None,
        final_value: tc,
        seconds: started.elapsed().as_secs_f64(),
    });
    log::info!("training candidates cover {:.3} of gold triggers, {:.3} of gold entities", tc, ec);

    let compat = Compat::from_schema(schema);
    let started = Instant::now();
    let we_params = in_stage("within_event", || {
        let data = within_instances(docs, &candidates, schema, &feats.event, cfg)?;
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet("within-event"));
        }
        let layout = WeLayout::new(&compat, bits);
        let lambda = lam(cfg.lambda_within);
        let (params, trace) = lbfgs_minimize(
            |w: &[f64], g: &mut [f64]| we_objective(&layout, &compat, w, &data, lambda, g),
            vec![0.0; layout.len()],
            &cfg.lbfgs,
        )?;
        report.stages.push(lbfgs_report("within_event", data.len(), params.len(), &trace, started));
        log::info!("within-event: {} instances, {} iterations", data.len(), trace.steps.len());
        Ok(params)
    })?;

    let started = Instant::now();
    let pair_params = in_stage("event_pair", || {
        let layout = PairLayout::new(schema.num_events(), bits);
        let data = pair_instances(docs, &candidates, schema, &feats.event, cfg);
        if data.is_empty() {
            log::warn!("no trigger pairs in the training candidates; the pair model stays at zero");
            report.stages.push(StageReport {
                stage: "event_pair".into(),
                instances: 0,
                params: layout.len(),
                iterations: 0,
                stop: None,
                final_value: 0.0,
                seconds: 0.0,
            });
            return Ok(vec![0.0; layout.len()]);
        }
        let lambda = lam(cfg.lambda_pair);
        let (params, trace) = lbfgs_minimize(
            |w: &[f64], g: &mut [f64]| pair_objective(&layout, w, &data, lambda, g),
            vec![0.0; layout.len()],
            &cfg.lbfgs,
        )?;
        report.stages.push(lbfgs_report("event_pair", data.len(), params.len(), &trace, started));
        log::info!("event-pair: {} instances, {} iterations", data.len(), trace.steps.len());
        Ok(params)
    })?;

    let bundle = ModelBundle { config: cfg.clone(), schema: schema.clone(), entity_crf, trigger_crf, we_params, pair_params };
    Ok((bundle, report))
}

const CRF_BLOCKS: [&str; 2] = ["entity_crf", "trigger_crf"];

impl ModelBundle {
    pub fn compat(&self) -> Compat {
        Compat::from_schema(&self.schema)
    }

    pub fn we_layout(&self) -> WeLayout {
        WeLayout::new(&self.compat(), self.config.features.hash_bits)
    }

    pub fn pair_layout(&self) -> PairLayout {
        PairLayout::new(self.schema.num_events(), self.config.features.hash_bits)
    }

    pub fn schema_fingerprint(&self) -> String {
        format!("{:016x}", fnv1a64(self.schema.to_json().as_bytes()))
    }

    pub fn feature_fingerprint(&self) -> String {
        let cfg = serde_json::to_string(&self.config.features).expect("feature config serializes");
        format!("{:016x}", fnv1a64(format!("{HASH_SCHEME}|{cfg}").as_bytes()))
    }

    pub fn to_container(&self) -> Result<Container> {
        let schema: serde_json::Value =
            serde_json::from_str(&self.schema.to_json()).map_err(|e| Error::Container(e.to_string()))?;
        let meta = json!({
            "config": self.config,
            "schema": schema,
            "schema_fingerprint": self.schema_fingerprint(),
            "feature_fingerprint": self.feature_fingerprint(),
            "hash_scheme": HASH_SCHEME,
        });
        let layout = self.we_layout();
        let mut blocks = vec![
            (CRF_BLOCKS[0].to_string(), self.entity_crf.params.clone()),
            (CRF_BLOCKS[1].to_string(), self.trigger_crf.params.clone()),
        ];
        for (name, off, len) in layout.blocks() {
            blocks.push((name.to_string(), self.we_params[off..off + len].to_vec()));
        }
        blocks.push(("phi".to_string(), self.pair_params.clone()));
        Ok(Container { meta, blocks })
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let bad = |m: String| Error::Container(m);
        let config: TrainConfig =
            serde_json::from_value(c.meta["config"].clone()).map_err(|e| bad(format!("config: {e}")))?;
        let schema = LabelSchema::from_json(&c.meta["schema"].to_string())?;
        let bundle_hash = c.meta["hash_scheme"].as_str().unwrap_or_default();
        if bundle_hash != HASH_SCHEME {
            return Err(bad(format!("feature hashing `{bundle_hash}` differs from this build's `{HASH_SCHEME}`")));
        }
        let bits = config.features.hash_bits;
        let entity_crf = ChainModel::from_params(BioTags::from_label_set(&schema.entity_types), bits, c.block(CRF_BLOCKS[0])?.to_vec());
        let trigger_crf = ChainModel::from_params(BioTags::from_label_set(&schema.event_types), bits, c.block(CRF_BLOCKS[1])?.to_vec());
        let layout = WeLayout::new(&Compat::from_schema(&schema), bits);
        let mut we_params = vec![0.0; layout.len()];
        for (name, off, len) in layout.blocks() {
            let b = c.block(name)?;
            if b.len() != len {
                return Err(bad(format!("block `{name}` has length {}, expected {len}", b.len())));
            }
            we_params[off..off + len].copy_from_slice(b);
        }
        let pair_params = c.block("phi")?.to_vec();
        let bundle = ModelBundle { config, schema, entity_crf, trigger_crf, we_params, pair_params };
        let crf_len = |m: &ChainModel<f64>| crate::crf::num_params(m.num_tags(), bits);
        if bundle.entity_crf.params.len() != crf_len(&bundle.entity_crf)
            || bundle.trigger_crf.params.len() != crf_len(&bundle.trigger_crf)
            || bundle.pair_params.len() != bundle.pair_layout().len()
        {
            return Err(bad("parameter block lengths do not match the schema and hash size".into()));
        }
        for (key, want) in [("schema_fingerprint", bundle.schema_fingerprint()), ("feature_fingerprint", bundle.feature_fingerprint())] {
            if c.meta[key].as_str() != Some(want.as_str()) {
                return Err(bad(format!("{key} mismatch")));
            }
        }
        Ok(bundle)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_container()?.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(&Container::read_from(bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocPrediction {
    pub document: Document,
    pub status: Status,
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
    pub trace: Vec<TraceRow>,
}

/// A loaded bundle with its derived layouts and featurizers.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub bundle: ModelBundle,
    pub feats: Featurizers,
    compat: Compat,
    we_layout: WeLayout,
    pair_layout: PairLayout,
}

impl Predictor {
    pub fn new(bundle: ModelBundle) -> Result<Self> {
        let feats = Featurizers::new(&bundle.config.features)?;
        Ok(Predictor {
            compat: bundle.compat(),
            we_layout: bundle.we_layout(),
            pair_layout: bundle.pair_layout(),
            feats,
            bundle,
        })
    }

    pub fn models(&self) -> DecodeModels<'_, f64> {
        DecodeModels {
            schema: &self.bundle.schema,
            compat: &self.compat,
            featurizer: &self.feats.event,
            we_layout: &self.we_layout,
            we_params: &self.bundle.we_params,
            pair_layout: &self.pair_layout,
            pair_params: &self.bundle.pair_params,
        }
    }

    pub fn candidates(&self, doc: &Document) -> CandidateSet {
        let cfg = &self.bundle.config;
        generate_candidates(&self.bundle.entity_crf, &self.bundle.trigger_crf, &self.feats, doc, cfg.k_entities, cfg.k_triggers)
    }

    pub fn decode(&self, doc: &Document, cands: &CandidateSet) -> Result<JointDecode<f64>> {
        decode_joint(doc, cands, &self.models(), &self.bundle.config.ad3)
    }

    pub fn predict(&self, doc: &Document) -> Result<DocPrediction> {
        let cands = self.candidates(doc);
        let out = self.decode(doc, &cands)?;
        Ok(DocPrediction {
            document: out.document,
            status: out.solution.status,
            iterations: out.solution.iterations,
            primal: out.solution.primal,
            dual: out.solution.dual,
            trace: out.solution.trace,
        })
    }

    /// `predict` over a corpus, split into contiguous chunks across the
    /// available cores; results keep the input order.
    pub fn predict_all(&self, docs: &[Document]) -> Result<Vec<DocPrediction>> {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(docs.len().max(1));
        if threads <= 1 {
            return docs.iter().map(|d| self.predict(d)).collect();
        }
        let chunk = docs.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = docs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|d| self.predict(d)).collect::<Result<Vec<_>>>()))
                .collect();
            let mut out = Vec::with_capacity(docs.len());
            for h in handles {
                out.extend(h.join().expect("prediction thread panicked")?);
            }
            Ok(out)
        })
    }

    /// Viterbi entity mentions of the standalone entity CRF.
    pub fn crf_entity_spans(&self, doc: &Document) -> Vec<(Span, usize)> {
        self.bundle.entity_crf.predict_spans(&self.feats.entity, doc)
    }

    /// The document annotated with the standalone entity CRF's mentions only.
    pub fn predict_crf_entities(&self, doc: &Document) -> Document {
        let mut out = doc.unlabeled();
        out.gold_entities = self
            .crf_entity_spans(doc)
            .into_iter()
            .map(|(span, l)| EntityMention { span, entity_type: self.bundle.schema.entity_types.name(l).to_string() })
            .collect();
        out
    }

    pub fn predict_within_only(&self, doc: &Document) -> Result<Document> {
        let cands = self.candidates(doc);
        decode_within_only(doc, &cands, &self.models(), &self.crf_entity_spans(doc))
    }
}

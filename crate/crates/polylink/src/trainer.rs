//! Sampled-softmax training of the product of experts, plus the logistic
//! baseline. Gradients are exact analytic derivatives of the sampled
//! objective; updates are applied serially per batch so a fixed seed gives a
//! bitwise-identical trajectory at any thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{Label, Splits};
use crate::error::{Error, Result};
use crate::eval;
use crate::features::{PairFeaturizer, RelationalFeatureSpace};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph, RelationKind, Triple};
use crate::model::{
    baseline_featurize, poe_logit, BaselineParams, BaselineVocab, Mode, ModelParams,
};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Optimizer {
    Sgd,
    AdaGrad,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::AdaGrad => "adagrad",
        }
    }

    pub fn parse(s: &str) -> Result<Optimizer> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adagrad" => Ok(Optimizer::AdaGrad),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub mode: Mode,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            negatives_per_positive: 10,
            batch_size: 128,
            learning_rate: 0.1,
            optimizer: Optimizer::AdaGrad,
            max_epochs: 60,
            patience: 5,
            seed: 17,
            mode: Mode::Combined,
            l2: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("negatives_per_positive", self.negatives_per_positive),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        if self.l2 < 0.0 || !self.l2.is_finite() {
            return Err(Error::Config("l2 must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub valid_auroc: Option<f64>,
    pub valid_aupr: Option<f64>,
    pub elapsed_s: f64,
}

/// `epoch loss valid_auroc valid_aupr elapsed_s` per line; deterministic mode
/// redacts wall time so reruns are byte-identical.
pub fn render_log(log: &[EpochLog], redact_time: bool) -> String {
    let mut out = String::from("epoch loss valid_auroc valid_aupr elapsed_s\n");
    for e in log {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "NA".to_string(),
        };
        let elapsed = if redact_time { "-".to_string() } else { format!("{:.3}", e.elapsed_s) };
        out.push_str(&format!(
            "{} {:.6} {} {} {}\n",
            e.epoch,
            e.loss,
            fmt_opt(e.valid_auroc),
            fmt_opt(e.valid_aupr),
            elapsed
        ));
    }
    out
}

/// Uniform corruption sampling over one drug endpoint. The pool is every
/// drug incident to at least one triple of the graph, so drugs removed by a
/// regime never appear as corruption candidates.
pub struct CorruptionSampler<'a> {
    g: &'a KnowledgeGraph,
    pool: Vec<EntityId>,
}

impl<'a> CorruptionSampler<'a> {
    pub fn new(g: &'a KnowledgeGraph) -> CorruptionSampler<'a> {
        let mut incident = vec![false; g.entity_count()];
        for t in g.triples() {
            incident[t.head.index as usize] = true;
            incident[t.tail.index as usize] = true;
        }
        let pool = g
            .entities_of_kind(EntityKind::Drug)
            .into_iter()
            .filter(|e| incident[e.index as usize])
            .collect();
        CorruptionSampler { g, pool }
    }

    pub fn pool(&self) -> &[EntityId] {
        &self.pool
    }

    /// Draw n corruptions of `d`, each replacing one endpoint (side uniform,
    /// replacement drug uniform, invalid draws rejected by restarting the
    /// whole draw — which makes the distribution uniform over all valid
    /// corruptions). Duplicates among the n draws are allowed; triples in g
    /// and self-pairs never appear.
    pub fn sample(&self, d: &Triple, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Triple>> {
        debug_assert_eq!(d.relation.kind, RelationKind::PolypharmacySideEffect);
        let deg_h = self.g.neighbors(d.head, d.relation).len();
        let deg_t = self.g.neighbors(d.tail, d.relation).len();
        let m = self.pool.len();
        let valid = (m - 1 - deg_t) + (m - 1 - deg_h);
        if valid == 0 {
            return Err(Error::Exhausted {
                relation: self.g.relation_key(d.relation).to_string(),
                needed: n,
                available: 0,
            });
        }
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            if attempts > 1_000_000 {
                // pathological acceptance rate: fall back to exact enumeration
                out.extend(self.enumerate_and_draw(d, n - out.len(), rng));
                break;
            }
            let replace_head = rng.gen_bool(0.5);
            let x = self.pool[rng.gen_range(0..m)];
            let c = if replace_head {
                Triple::new(x, d.relation, d.tail)
            } else {
                Triple::new(d.head, d.relation, x)
            };
            if c.head.index == c.tail.index || self.g.contains(&c) {
                continue;
            }
            out.push(c);
        }
        Ok(out)
    }

    fn enumerate_and_draw(&self, d: &Triple, n: usize, rng: &mut ChaCha8Rng) -> Vec<Triple> {
        let mut valid = Vec::new();
        for &x in &self.pool {
            for c in [Triple::new(x, d.relation, d.tail), Triple::new(d.head, d.relation, x)] {
                if c.head.index != c.tail.index && !self.g.contains(&c) {
                    valid.push(c);
                }
            }
        }
        (0..n).map(|_| valid[rng.gen_range(0..valid.len())]).collect()
    }
}

/// Gradients for exactly the parameters a batch touches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrads {
    /// entity index → dense k-vector
    pub embeddings: BTreeMap<u32, Vec<f64>>,
    /// relation index → dense k-vector
    pub embed_weights: BTreeMap<u32, Vec<f64>>,
    /// (relation index, feature index) → scalar
    pub rel_weights: BTreeMap<(u32, u32), f64>,
}

impl SparseGrads {
    fn merge(&mut self, other: SparseGrads, dim: usize) {
        for (e, g) in other.embeddings {
            let acc = self.embeddings.entry(e).or_insert_with(|| vec![0.0; dim]);
            for i in 0..dim {
                acc[i] += g[i];
            }
        }
        for (r, g) in other.embed_weights {
            let acc = self.embed_weights.entry(r).or_insert_with(|| vec![0.0; dim]);
            for i in 0..dim {
                acc[i] += g[i];
            }
        }
        for (k, g) in other.rel_weights {
            *self.rel_weights.entry(k).or_insert(0.0) += g;
        }
    }

    fn all_finite(&self) -> bool {
        self.embeddings.values().flatten().all(|g| g.is_finite())
            && self.embed_weights.values().flatten().all(|g| g.is_finite())
            && self.rel_weights.values().all(|g| g.is_finite())
    }
}

/// Permutation-invariant log-sum-exp: exponentials are summed in ascending
/// value order, so reordering the corruptions cannot change the loss.
fn log_sum_exp(logits: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let mut sorted = exps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sum: f64 = sorted.iter().sum();
    let probs = exps.iter().map(|e| e / sum).collect();
    (max + sum.ln(), probs)
}

fn example_loss_and_grads(
    params: &ModelParams,
    featurizer: &PairFeaturizer<'_>,
    positive: &Triple,
    corruptions: &[Triple],
    mode: Mode,
) -> Result<(f64, SparseGrads)> {
    let r = positive.relation;
    let w = params.embed_weight(r)?;
    let dim = params.dim;

    let mut logits = Vec::with_capacity(1 + corruptions.len());
    let mut fvs = Vec::with_capacity(1 + corruptions.len());
    for c in std::iter::once(positive).chain(corruptions.iter()) {
        let z = match mode {
            Mode::EmbeddingOnly => {
                fvs.push(None);
                params.distmult_score(c.head, r, c.tail)?
            }
            Mode::Combined => {
                let fv = featurizer.features(c.head, c.tail);
                let z = params.distmult_score(c.head, r, c.tail)?
                    + params.relational_score(r, &fv)?;
                fvs.push(Some(fv));
                z
            }
        };
        logits.push(z);
    }

    let (lse, probs) = log_sum_exp(&logits);
    let loss = lse - logits[0];

    let mut grads = SparseGrads::default();
    let w_acc = grads.embed_weights.entry(r.index).or_insert_with(|| vec![0.0; dim]);
    let mut emb: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (c_idx, c) in std::iter::once(positive).chain(corruptions.iter()).enumerate() {
        let coef = probs[c_idx] - if c_idx == 0 { 1.0 } else { 0.0 };
        let eh = params.embedding(c.head)?;
        let et = params.embedding(c.tail)?;
        let gh = emb.entry(c.head.index).or_insert_with(|| vec![0.0; dim]);
        for i in 0..dim {
            gh[i] += coef * et[i] * w[i];
        }
        let gt = emb.entry(c.tail.index).or_insert_with(|| vec![0.0; dim]);
        for i in 0..dim {
            gt[i] += coef * eh[i] * w[i];
        }
        for i in 0..dim {
            w_acc[i] += coef * eh[i] * et[i];
        }
        if let Some(fv) = &fvs[c_idx] {
            for &f in &fv.indices {
                *grads.rel_weights.entry((r.index, f)).or_insert(0.0) += coef;
            }
        }
    }
    grads.embeddings = emb;
    Ok((loss, grads))
}

/// Sampled-softmax loss over a batch of positives with attached corruptions,
/// plus l2 on every touched parameter; gradients are the exact analytic
/// derivatives of that objective.
pub fn batch_loss_and_grads(
    params: &ModelParams,
    featurizer: &PairFeaturizer<'_>,
    batch: &[(Triple, Vec<Triple>)],
    mode: Mode,
    l2: f64,
) -> Result<(f64, SparseGrads)> {
    let parts: Vec<(f64, SparseGrads)> = batch
        .par_iter()
        .map(|(pos, corr)| example_loss_and_grads(params, featurizer, pos, corr, mode))
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut grads = SparseGrads::default();
    for (l, g) in parts {
        loss += l;
        grads.merge(g, params.dim);
    }

    if l2 > 0.0 {
        let dim = params.dim;
        for (&e, g) in grads.embeddings.iter_mut() {
            let row = params
                .entity_row(EntityId { index: e, kind: EntityKind::Drug })
                .expect("gradient entity has a row");
            for i in 0..dim {
                let theta = params.embeddings[row * dim + i];
                loss += l2 * theta * theta;
                g[i] += 2.0 * l2 * theta;
            }
        }
        for (&r, g) in grads.embed_weights.iter_mut() {
            let row = params
                .relation_row(crate::kg::RelationId {
                    index: r,
                    kind: RelationKind::PolypharmacySideEffect,
                })
                .expect("gradient relation has a row");
            for i in 0..dim {
                let theta = params.embed_weights[row * dim + i];
                loss += l2 * theta * theta;
                g[i] += 2.0 * l2 * theta;
            }
        }
        for ((r, f), g) in grads.rel_weights.iter_mut() {
            let row = params
                .relation_row(crate::kg::RelationId {
                    index: *r,
                    kind: RelationKind::PolypharmacySideEffect,
                })
                .expect("gradient relation has a row");
            let theta = params.rel_weights[row * params.feature_dim + *f as usize];
            loss += l2 * theta * theta;
            *g += 2.0 * l2 * theta;
        }
    }

    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::NonFinite("batch loss or gradient".into()));
    }
    Ok((loss, grads))
}

struct PoeOptState {
    embeddings: Vec<f64>,
    embed_weights: Vec<f64>,
    rel_weights: Vec<f64>,
}

impl PoeOptState {
    fn new(params: &ModelParams) -> PoeOptState {
        PoeOptState {
            embeddings: vec![0.0; params.embeddings.len()],
            embed_weights: vec![0.0; params.embed_weights.len()],
            rel_weights: vec![0.0; params.rel_weights.len()],
        }
    }
}

const ADAGRAD_EPS: f64 = 1e-8;

fn step(theta: &mut f64, accum: &mut f64, g: f64, cfg: &TrainConfig) {
    match cfg.optimizer {
        Optimizer::Sgd => *theta -= cfg.learning_rate * g,
        Optimizer::AdaGrad => {
            *accum += g * g;
            *theta -= cfg.learning_rate * g / (accum.sqrt() + ADAGRAD_EPS);
        }
    }
}

fn apply_update(
    params: &mut ModelParams,
    state: &mut PoeOptState,
    grads: &SparseGrads,
    cfg: &TrainConfig,
) {
    let dim = params.dim;
    for (&e, g) in &grads.embeddings {
        let row = params
            .entity_row(EntityId { index: e, kind: EntityKind::Drug })
            .expect("updated entity has a row");
        for i in 0..dim {
            let off = row * dim + i;
            step(&mut params.embeddings[off], &mut state.embeddings[off], g[i], cfg);
        }
    }
    for (&r, g) in &grads.embed_weights {
        let row = params
            .relation_row(crate::kg::RelationId {
                index: r,
                kind: RelationKind::PolypharmacySideEffect,
            })
            .expect("updated relation has a row");
        for i in 0..dim {
            let off = row * dim + i;
            step(&mut params.embed_weights[off], &mut state.embed_weights[off], g[i], cfg);
        }
    }
    for (&(r, f), &g) in &grads.rel_weights {
        let row = params
            .relation_row(crate::kg::RelationId {
                index: r,
                kind: RelationKind::PolypharmacySideEffect,
            })
            .expect("updated relation has a row");
        let off = row * params.feature_dim + f as usize;
        step(&mut params.rel_weights[off], &mut state.rel_weights[off], g, cfg);
    }
}

fn valid_metrics(
    params: &ModelParams,
    featurizer: &PairFeaturizer<'_>,
    splits: &Splits,
    mode: Mode,
) -> Result<Option<(f64, f64)>> {
    if splits.valid.is_empty() {
        return Ok(None);
    }
    let report = eval::evaluate(
        |e| poe_logit(params, featurizer, e.drug_a, e.side_effect, e.drug_b, mode),
        &splits.valid,
        50,
    );
    match report {
        Ok(r) => Ok(Some((r.aggregate.0, r.aggregate.1))),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Train the PoE on the training graph's polypharmacy triples, early-stopping
/// on validation AuPR; returns the best-validation parameters. The epoch log
/// is appended to `log` as it happens, so a divergence abort leaves the
/// partial log with the caller.
pub fn train(
    g_train: &KnowledgeGraph,
    splits: &Splits,
    space: &RelationalFeatureSpace,
    cfg: &TrainConfig,
    log: &mut Vec<EpochLog>,
) -> Result<ModelParams> {
    cfg.validate()?;
    let featurizer = PairFeaturizer::new(space, g_train);
    let mut params = ModelParams::init(
        g_train,
        cfg.dim,
        space.len(),
        space.content_hash(g_train),
        cfg.seed,
    )?;
    let positives: Vec<Triple> = splits
        .train
        .iter()
        .filter(|e| e.label == Label::Positive)
        .map(|e| e.as_triple())
        .collect();
    if positives.is_empty() {
        return Err(Error::Config("no training positives".into()));
    }
    let sampler = CorruptionSampler::new(g_train);
    let mut state = PoeOptState::new(&params);
    let n = positives.len() as u64;

    let mut best_params = params.clone();
    let mut best_aupr = f64::NEG_INFINITY;
    let mut evaluated = false;
    let mut since_improvement = 0usize;

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..positives.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut stream(cfg.seed, Stream::EpochShuffle(epoch as u64)));

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let d = positives[idx];
                let mut rng =
                    stream(cfg.seed, Stream::Corruption(epoch as u64 * n + idx as u64));
                let corr = sampler.sample(&d, cfg.negatives_per_positive, &mut rng)?;
                batch.push((d, corr));
            }
            let (loss, grads) =
                batch_loss_and_grads(&params, &featurizer, &batch, cfg.mode, cfg.l2)?;
            epoch_loss += loss;
            apply_update(&mut params, &mut state, &grads, cfg);
        }

        let vm = valid_metrics(&params, &featurizer, splits, cfg.mode)?;
        log.push(EpochLog {
            epoch,
            loss: epoch_loss,
            valid_auroc: vm.map(|m| m.0),
            valid_aupr: vm.map(|m| m.1),
            elapsed_s: started.elapsed().as_secs_f64(),
        });

        if let Some((_, aupr)) = vm {
            evaluated = true;
            if aupr > best_aupr {
                best_aupr = aupr;
                best_params = params.clone();
                since_improvement = 0;
            } else {
                since_improvement += 1;
                if since_improvement >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok(if evaluated { best_params } else { params })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable −[y·ln σ(z) + (1−y)·ln(1−σ(z))].
fn logistic_loss(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Gradients of the logistic objective for one baseline batch: x-indexed
/// weight entries and the bias of each touched relation, plus l2 on touched.
pub fn baseline_batch_loss_and_grads(
    bp: &BaselineParams,
    batch: &[(Vec<u32>, crate::kg::RelationId, f64)],
    l2: f64,
) -> Result<(f64, BTreeMap<(u32, u32), f64>, BTreeMap<u32, f64>)> {
    let mut loss = 0.0;
    let mut w_grads: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut b_grads: BTreeMap<u32, f64> = BTreeMap::new();
    for (x, r, y) in batch {
        let z = bp.score(x, *r)?;
        loss += logistic_loss(z, *y);
        let coef = sigmoid(z) - y;
        for &i in x {
            *w_grads.entry((r.index, i)).or_insert(0.0) += coef;
        }
        *b_grads.entry(r.index).or_insert(0.0) += coef;
    }
    if l2 > 0.0 {
        for ((r, i), g) in w_grads.iter_mut() {
            let row = bp.relation_row(crate::kg::RelationId {
                index: *r,
                kind: RelationKind::PolypharmacySideEffect,
            })?;
            let theta = bp.weights[row * bp.dim + *i as usize];
            loss += l2 * theta * theta;
            *g += 2.0 * l2 * theta;
        }
        for (r, g) in b_grads.iter_mut() {
            let row = bp.relation_row(crate::kg::RelationId {
                index: *r,
                kind: RelationKind::PolypharmacySideEffect,
            })?;
            let theta = bp.bias[row];
            loss += l2 * theta * theta;
            *g += 2.0 * l2 * theta;
        }
    }
    if !loss.is_finite()
        || w_grads.values().any(|g| !g.is_finite())
        || b_grads.values().any(|g| !g.is_finite())
    {
        return Err(Error::NonFinite("baseline batch loss or gradient".into()));
    }
    Ok((loss, w_grads, b_grads))
}

/// Per-side-effect logistic regression over concatenated indicator vectors,
/// trained with the same optimizer machinery and early stopping.
pub fn train_baseline(
    g_train: &KnowledgeGraph,
    splits: &Splits,
    cfg: &TrainConfig,
    log: &mut Vec<EpochLog>,
) -> Result<(BaselineParams, BaselineVocab)> {
    cfg.validate()?;
    let vocab = BaselineVocab::from_graph(g_train);
    let mut bp = BaselineParams::init(g_train, &vocab);
    let mut w_accum = vec![0.0; bp.weights.len()];
    let mut b_accum = vec![0.0; bp.bias.len()];

    let train_set: Vec<(Vec<u32>, crate::kg::RelationId, f64)> = splits
        .train
        .iter()
        .map(|e| {
            let x = baseline_featurize(g_train, &vocab, e.drug_a, e.drug_b);
            let y = if e.label == Label::Positive { 1.0 } else { 0.0 };
            (x, e.side_effect, y)
        })
        .collect();
    if train_set.is_empty() {
        return Err(Error::Config("no baseline training examples".into()));
    }

    let valid_features: Vec<(Vec<u32>, crate::kg::RelationId)> = splits
        .valid
        .iter()
        .map(|e| (baseline_featurize(g_train, &vocab, e.drug_a, e.drug_b), e.side_effect))
        .collect();

    let mut best = bp.clone();
    let mut best_aupr = f64::NEG_INFINITY;
    let mut evaluated = false;
    let mut since_improvement = 0usize;

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut stream(cfg.seed, Stream::EpochShuffle(epoch as u64)));

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, w_grads, b_grads) = baseline_batch_loss_and_grads(&bp, &batch, cfg.l2)?;
            epoch_loss += loss;
            for ((r, i), g) in w_grads {
                let row = bp.relation_row(crate::kg::RelationId {
                    index: r,
                    kind: RelationKind::PolypharmacySideEffect,
                })?;
                let off = row * bp.dim + i as usize;
                step(&mut bp.weights[off], &mut w_accum[off], g, cfg);
            }
            for (r, g) in b_grads {
                let row = bp.relation_row(crate::kg::RelationId {
                    index: r,
                    kind: RelationKind::PolypharmacySideEffect,
                })?;
                step(&mut bp.bias[row], &mut b_accum[row], g, cfg);
            }
        }

        let vm = if splits.valid.is_empty() {
            None
        } else {
            let report = eval::evaluate(
                |e| {
                    let i = splits
                        .valid
                        .iter()
                        .position(|v| v == e)
                        .expect("valid example belongs to the valid split");
                    bp.score(&valid_features[i].0, valid_features[i].1)
                },
                &splits.valid,
                50,
            );
            match report {
                Ok(r) => Some((r.aggregate.0, r.aggregate.1)),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e),
            }
        };

        log.push(EpochLog {
            epoch,
            loss: epoch_loss,
            valid_auroc: vm.map(|m| m.0),
            valid_aupr: vm.map(|m| m.1),
            elapsed_s: started.elapsed().as_secs_f64(),
        });

        if let Some((_, aupr)) = vm {
            evaluated = true;
            if aupr > best_aupr {
                best_aupr = aupr;
                best = bp.clone();
                since_improvement = 0;
            } else {
                since_improvement += 1;
                if since_improvement >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok((if evaluated { best } else { bp }, vocab))
}

//! Scoring: the DistMult embedding expert, the relational-feature expert,
//! their product-of-experts combination, and the concatenated-indicator
//! baseline. Parameter storage is flat row-major arrays over drugs and
//! polypharmacy relations in id order, which makes checkpoints and sparse
//! optimizer state straightforward.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, PairFeaturizer};
use crate::ingest::{HAS_TARGET_KEY, MONO_SIDE_EFFECT_KEY};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph, RelationId, RelationKind, Triple};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    EmbeddingOnly,
    Combined,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::EmbeddingOnly => "embedding_only",
            Mode::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "embedding_only" => Ok(Mode::EmbeddingOnly),
            "combined" => Ok(Mode::Combined),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected embedding_only or combined)"
            ))),
        }
    }
}

/// Embeddings for drugs, plus per-polypharmacy-relation weight vectors for
/// both experts. Row order is entity/relation id order, fixed at init.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub feature_dim: usize,
    pub feature_hash: [u8; 32],
    entity_ids: Vec<u32>,
    entity_rows: HashMap<u32, usize>,
    relation_ids: Vec<u32>,
    relation_rows: HashMap<u32, usize>,
    pub embeddings: Vec<f64>,
    pub embed_weights: Vec<f64>,
    pub rel_weights: Vec<f64>,
}

impl ModelParams {
    /// Fresh parameters for every drug and polypharmacy relation of `g`.
    /// Embeddings and w^r are uniform on [−6/√k, 6/√k]; relational weights
    /// start at zero so the combined model begins exactly at the embedding
    /// expert.
    pub fn init(
        g: &KnowledgeGraph,
        dim: usize,
        feature_dim: usize,
        feature_hash: [u8; 32],
        seed: u64,
    ) -> Result<ModelParams> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let entity_ids: Vec<u32> = g
            .entities_of_kind(EntityKind::Drug)
            .into_iter()
            .map(|e| e.index)
            .collect();
        let relation_ids: Vec<u32> = g
            .relations_of_kind(RelationKind::PolypharmacySideEffect)
            .into_iter()
            .map(|r| r.index)
            .collect();
        let entity_rows = entity_ids.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let relation_rows = relation_ids.iter().enumerate().map(|(i, &r)| (r, i)).collect();

        let bound = 6.0 / (dim as f64).sqrt();
        let mut rng = stream(seed, Stream::ParamInit);
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let embeddings = uniform(entity_ids.len() * dim);
        let embed_weights = uniform(relation_ids.len() * dim);
        let rel_weights = vec![0.0; relation_ids.len() * feature_dim];
        Ok(ModelParams {
            dim,
            feature_dim,
            feature_hash,
            entity_ids,
            entity_rows,
            relation_ids,
            relation_rows,
            embeddings,
            embed_weights,
            rel_weights,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_ids.len()
    }

    pub fn entity_row(&self, e: EntityId) -> Result<usize> {
        self.entity_rows
            .get(&e.index)
            .copied()
            .ok_or_else(|| Error::MissingEmbedding(format!("entity #{}", e.index)))
    }

    pub fn relation_row(&self, r: RelationId) -> Result<usize> {
        self.relation_rows
            .get(&r.index)
            .copied()
            .ok_or_else(|| Error::MissingRelation(format!("relation #{}", r.index)))
    }

    pub fn embedding(&self, e: EntityId) -> Result<&[f64]> {
        let row = self.entity_row(e)?;
        Ok(&self.embeddings[row * self.dim..(row + 1) * self.dim])
    }

    pub fn embed_weight(&self, r: RelationId) -> Result<&[f64]> {
        let row = self.relation_row(r)?;
        Ok(&self.embed_weights[row * self.dim..(row + 1) * self.dim])
    }

    pub fn rel_weight(&self, r: RelationId) -> Result<&[f64]> {
        let row = self.relation_row(r)?;
        Ok(&self.rel_weights[row * self.feature_dim..(row + 1) * self.feature_dim])
    }

    /// Σ_i e_h[i]·e_t[i]·w^r[i]. Exactly symmetric in h and t: elementwise
    /// multiplication commutes and the accumulation order is index order
    /// either way.
    pub fn distmult_score(&self, h: EntityId, r: RelationId, t: EntityId) -> Result<f64> {
        let eh = self.embedding(h)?;
        let et = self.embedding(t)?;
        let w = self.embed_weight(r)?;
        let mut s = 0.0;
        for i in 0..self.dim {
            s += eh[i] * et[i] * w[i];
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("distmult score".into()));
        }
        Ok(s)
    }

    /// Dot product of w^r_rel with a binary feature vector: the sum of the
    /// active features' weights, accumulated in ascending index order.
    pub fn relational_score(&self, r: RelationId, fv: &FeatureVector) -> Result<f64> {
        let w = self.rel_weight(r)?;
        let mut s = 0.0;
        for &i in &fv.indices {
            let i = i as usize;
            if i >= self.feature_dim {
                return Err(Error::IndexOutOfRange { index: i, dim: self.feature_dim });
            }
            s += w[i];
        }
        Ok(s)
    }
}

/// Log of the unnormalized PoE numerator for one triple; experts of other
/// relations contribute factor 1 and vanish.
pub fn poe_logit(
    params: &ModelParams,
    featurizer: &PairFeaturizer<'_>,
    h: EntityId,
    r: RelationId,
    t: EntityId,
    mode: Mode,
) -> Result<f64> {
    let d = params.distmult_score(h, r, t)?;
    match mode {
        Mode::EmbeddingOnly => Ok(d),
        Mode::Combined => {
            let fv = featurizer.features(h, t);
            Ok(d + params.relational_score(r, &fv)?)
        }
    }
}

/// Max-subtracted softmax; overflow-safe over any finite logit range.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax probability of `d` among `candidates` under the PoE logit.
pub fn poe_probability(
    params: &ModelParams,
    featurizer: &PairFeaturizer<'_>,
    candidates: &[Triple],
    d: &Triple,
    mode: Mode,
) -> Result<f64> {
    let dc = d.canonical();
    let pos = candidates
        .iter()
        .position(|c| c.canonical() == dc)
        .ok_or_else(|| Error::Config("probability query triple not among candidates".into()))?;
    let mut logits = Vec::with_capacity(candidates.len());
    for c in candidates {
        logits.push(poe_logit(params, featurizer, c.head, c.relation, c.tail, mode)?);
    }
    Ok(softmax(&logits)[pos])
}

/// Fixed indicator vocabulary for the baseline, taken from the training
/// graph: mono side-effect terms and targeted proteins, each in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineVocab {
    mono_rows: HashMap<u32, usize>,
    protein_rows: HashMap<u32, usize>,
    n_mono: usize,
    n_proteins: usize,
}

impl BaselineVocab {
    pub fn from_graph(g: &KnowledgeGraph) -> BaselineVocab {
        let mono_rel = g.relation_id(MONO_SIDE_EFFECT_KEY);
        let ht = g.relation_id(HAS_TARGET_KEY);
        let mono: Vec<u32> = g
            .entities_of_kind(EntityKind::MonoTerm)
            .into_iter()
            .filter(|&m| mono_rel.map_or(false, |r| !g.incoming(m, r).is_empty()))
            .map(|m| m.index)
            .collect();
        let proteins: Vec<u32> = g
            .entities_of_kind(EntityKind::Protein)
            .into_iter()
            .filter(|&p| ht.map_or(false, |r| !g.incoming(p, r).is_empty()))
            .map(|p| p.index)
            .collect();
        BaselineVocab {
            n_mono: mono.len(),
            n_proteins: proteins.len(),
            mono_rows: mono.into_iter().enumerate().map(|(i, m)| (m, i)).collect(),
            protein_rows: proteins.into_iter().enumerate().map(|(i, p)| (p, i)).collect(),
        }
    }

    /// Indicator slots per drug: monos first, then proteins.
    pub fn width(&self) -> usize {
        self.n_mono + self.n_proteins
    }

    /// Full concatenated dimension (two drugs).
    pub fn dim(&self) -> usize {
        2 * self.width()
    }
}

/// Sparse active indices of [indicators(first); indicators(second)], the
/// drugs taken in canonical (id) order so the encoding is symmetric.
pub fn baseline_featurize(
    g: &KnowledgeGraph,
    vocab: &BaselineVocab,
    a: EntityId,
    b: EntityId,
) -> Vec<u32> {
    let (first, second) = if a.index <= b.index { (a, b) } else { (b, a) };
    let mut out = Vec::new();
    let mut emit_drug = |d: EntityId, offset: usize| {
        if let Some(r) = g.relation_id(MONO_SIDE_EFFECT_KEY) {
            for m in g.neighbors(d, r) {
                if let Some(&row) = vocab.mono_rows.get(&m.index) {
                    out.push((offset + row) as u32);
                }
            }
        }
        if let Some(r) = g.relation_id(HAS_TARGET_KEY) {
            for p in g.neighbors(d, r) {
                if let Some(&row) = vocab.protein_rows.get(&p.index) {
                    out.push((offset + vocab.n_mono + row) as u32);
                }
            }
        }
    };
    emit_drug(first, 0);
    emit_drug(second, vocab.width());
    out.sort_unstable();
    out
}

/// Per-side-effect logistic weights over the concatenated indicator vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub dim: usize,
    relation_ids: Vec<u32>,
    relation_rows: HashMap<u32, usize>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl BaselineParams {
    pub fn init(g: &KnowledgeGraph, vocab: &BaselineVocab) -> BaselineParams {
        let relation_ids: Vec<u32> = g
            .relations_of_kind(RelationKind::PolypharmacySideEffect)
            .into_iter()
            .map(|r| r.index)
            .collect();
        let relation_rows = relation_ids.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let dim = vocab.dim();
        BaselineParams {
            dim,
            weights: vec![0.0; relation_ids.len() * dim],
            bias: vec![0.0; relation_ids.len()],
            relation_ids,
            relation_rows,
        }
    }

    pub fn relation_row(&self, r: RelationId) -> Result<usize> {
        self.relation_rows
            .get(&r.index)
            .copied()
            .ok_or_else(|| Error::MissingRelation(format!("relation #{}", r.index)))
    }

    /// Relation indices in row order.
    pub fn relation_ids(&self) -> &[u32] {
        &self.relation_ids
    }

    /// Logistic-linear logit w_r · x + b_r over sparse active indices.
    pub fn score(&self, x: &[u32], r: RelationId) -> Result<f64> {
        let row = self.relation_row(r)?;
        let w = &self.weights[row * self.dim..(row + 1) * self.dim];
        let mut s = self.bias[row];
        for &i in x {
            let i = i as usize;
            if i >= self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: i + 1 });
            }
            s += w[i];
        }
        Ok(s)
    }
}

const MAGIC: &[u8; 8] = b"PLNKCKPT";
const VERSION: u32 = 1;

/// Versioned binary checkpoint: header (magic, version, k, entity count,
/// relation count, feature dim, feature-space hash), id arrays, then raw
/// little-endian f64 arrays in id order.
pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f.write_all(MAGIC).map_err(io)?;
    for v in [
        VERSION,
        params.dim as u32,
        params.entity_ids.len() as u32,
        params.relation_ids.len() as u32,
        params.feature_dim as u32,
    ] {
        f.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    f.write_all(&params.feature_hash).map_err(io)?;
    for &id in params.entity_ids.iter().chain(params.relation_ids.iter()) {
        f.write_all(&id.to_le_bytes()).map_err(io)?;
    }
    for arr in [&params.embeddings, &params.embed_weights, &params.rel_weights] {
        for &x in arr.iter() {
            f.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    f.flush().map_err(io)
}

struct Cursor<'a> {
    buf: &'a [u8],
    off: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.off + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "{}: truncated (wanted {} bytes at offset {})",
                self.path.display(),
                n,
                self.off
            )));
        }
        let s = &self.buf[self.off..self.off + n];
        self.off += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u32_vec(&mut self, n: usize) -> Result<Vec<u32>> {
        let raw = self.take(4 * n)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Load a checkpoint. When `expected_feature_hash` is given (i.e. the caller
/// holds a feature space), a mismatch is refused rather than silently
/// producing misaligned relational weights.
pub fn load_checkpoint(path: &Path, expected_feature_hash: Option<&[u8; 32]>) -> Result<ModelParams> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { buf: &buf, off: 0, path };
    if c.take(8)? != MAGIC {
        return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported format version {version}",
            path.display()
        )));
    }
    let dim = c.u32()? as usize;
    let n_entities = c.u32()? as usize;
    let n_relations = c.u32()? as usize;
    let feature_dim = c.u32()? as usize;
    let feature_hash: [u8; 32] = c.take(32)?.try_into().unwrap();
    if let Some(expected) = expected_feature_hash {
        if *expected != feature_hash {
            return Err(Error::Checkpoint(format!(
                "{}: feature-space hash mismatch (checkpoint {}, current space {})",
                path.display(),
                hex::encode(feature_hash),
                hex::encode(expected)
            )));
        }
    }
    let entity_ids = c.u32_vec(n_entities)?;
    let relation_ids = c.u32_vec(n_relations)?;
    let embeddings = c.f64_vec(n_entities * dim)?;
    let embed_weights = c.f64_vec(n_relations * dim)?;
    let rel_weights = c.f64_vec(n_relations * feature_dim)?;
    if c.off != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{}: {} trailing bytes",
            path.display(),
            buf.len() - c.off
        )));
    }
    for arr in [&embeddings, &embed_weights, &rel_weights] {
        if arr.iter().any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint(format!(
                "{}: non-finite parameter value",
                path.display()
            )));
        }
    }
    Ok(ModelParams {
        dim,
        feature_dim,
        feature_hash,
        entity_rows: entity_ids.iter().enumerate().map(|(i, &e)| (e, i)).collect(),
        relation_rows: relation_ids.iter().enumerate().map(|(i, &r)| (r, i)).collect(),
        entity_ids,
        relation_ids,
        embeddings,
        embed_weights,
        rel_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{enumerate_templates, RelationalFeatureSpace};
    use crate::kg::GraphBuilder;

    fn drug_graph(n: usize, n_rel: usize) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        let drugs: Vec<_> = (0..n)
            .map(|i| b.intern_entity(&format!("D{i}"), EntityKind::Drug).unwrap())
            .collect();
        for r in 0..n_rel {
            let rel =
                b.intern_relation(&format!("se{r}"), RelationKind::PolypharmacySideEffect).unwrap();
            // a ring of edges so every relation has triples
            for i in 0..n.min(4) {
                b.add_triple(Triple::new(drugs[i], rel, drugs[(i + 1) % n])).unwrap();
            }
        }
        b.freeze()
    }

    fn toy_params(g: &KnowledgeGraph, dim: usize, feature_dim: usize) -> ModelParams {
        ModelParams::init(g, dim, feature_dim, [0u8; 32], 11).unwrap()
    }

    #[test]
    fn distmult_zero_embedding_scores_zero() {
        let g = drug_graph(3, 1);
        let mut p = toy_params(&g, 4, 0);
        let h = g.entity_id("D0").unwrap();
        let t = g.entity_id("D1").unwrap();
        let r = g.relation_id("se0").unwrap();
        let row = p.entity_row(h).unwrap();
        for i in 0..4 {
            p.embeddings[row * 4 + i] = 0.0;
        }
        assert_eq!(p.distmult_score(h, r, t).unwrap(), 0.0);
    }

    #[test]
    fn distmult_hand_example() {
        let g = drug_graph(2, 1);
        let mut p = toy_params(&g, 2, 0);
        let h = g.entity_id("D0").unwrap();
        let t = g.entity_id("D1").unwrap();
        let r = g.relation_id("se0").unwrap();
        let (rh, rt, rr) = (p.entity_row(h).unwrap(), p.entity_row(t).unwrap(), 0);
        p.embeddings[rh * 2..rh * 2 + 2].copy_from_slice(&[1.0, 2.0]);
        p.embeddings[rt * 2..rt * 2 + 2].copy_from_slice(&[3.0, 4.0]);
        p.embed_weights[rr * 2..rr * 2 + 2].copy_from_slice(&[1.0, 1.0]);
        assert_eq!(p.distmult_score(h, r, t).unwrap(), 11.0);
    }

    #[test]
    fn distmult_symmetry_is_exact_on_random_params() {
        let g = drug_graph(20, 3);
        let p = toy_params(&g, 16, 0);
        let drugs = g.entities_of_kind(EntityKind::Drug);
        let rels = g.relations_of_kind(RelationKind::PolypharmacySideEffect);
        let mut rng = stream(5, Stream::Synthetic(3));
        for _ in 0..500 {
            let h = drugs[rng.gen_range(0..drugs.len())];
            let t = drugs[rng.gen_range(0..drugs.len())];
            let r = rels[rng.gen_range(0..rels.len())];
            let a = p.distmult_score(h, r, t).unwrap();
            let b = p.distmult_score(t, r, h).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "symmetry must be bitwise exact");
        }
    }

    #[test]
    fn missing_embedding_is_reported() {
        let g = drug_graph(2, 1);
        let p = toy_params(&g, 2, 0);
        let ghost = EntityId { index: 999, kind: EntityKind::Drug };
        let r = g.relation_id("se0").unwrap();
        let t = g.entity_id("D0").unwrap();
        assert!(matches!(p.distmult_score(ghost, r, t), Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn relational_score_examples() {
        let g = drug_graph(2, 1);
        let mut p = toy_params(&g, 2, 4);
        let r = g.relation_id("se0").unwrap();
        p.rel_weights.copy_from_slice(&[0.5, 9.0, -0.25, 3.0]);

        let empty = FeatureVector::default();
        assert_eq!(p.relational_score(r, &empty).unwrap(), 0.0);

        let fv = FeatureVector { indices: vec![0, 2] };
        assert_eq!(p.relational_score(r, &fv).unwrap(), 0.25);

        let all = FeatureVector { indices: vec![0, 1, 2, 3] };
        assert_eq!(p.relational_score(r, &all).unwrap(), 0.5 + 9.0 - 0.25 + 3.0);

        let bad = FeatureVector { indices: vec![4] };
        assert!(matches!(
            p.relational_score(r, &bad),
            Err(Error::IndexOutOfRange { index: 4, dim: 4 })
        ));
    }

    fn combined_fixture() -> (KnowledgeGraph, RelationalFeatureSpace) {
        let mut b = GraphBuilder::new();
        let drugs: Vec<_> = (0..4)
            .map(|i| b.intern_entity(&format!("D{i}"), EntityKind::Drug).unwrap())
            .collect();
        let p0 = b.intern_entity("P0", EntityKind::Protein).unwrap();
        let p1 = b.intern_entity("P1", EntityKind::Protein).unwrap();
        let se = b.intern_relation("se0", RelationKind::PolypharmacySideEffect).unwrap();
        let ht = b.intern_relation(HAS_TARGET_KEY, RelationKind::HasTarget).unwrap();
        let iw = b
            .intern_relation(crate::ingest::INTERACTS_WITH_KEY, RelationKind::InteractsWith)
            .unwrap();
        for &d in &drugs {
            b.add_triple(Triple::new(d, ht, p0)).unwrap();
        }
        b.add_triple(Triple::new(drugs[0], ht, p1)).unwrap();
        b.add_triple(Triple::new(p0, iw, p1)).unwrap();
        b.add_triple(Triple::new(drugs[0], se, drugs[1])).unwrap();
        b.add_triple(Triple::new(drugs[2], se, drugs[3])).unwrap();
        let g = b.freeze();
        let pairs: Vec<(EntityId, EntityId)> =
            (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).map(|(i, j)| {
                (g.entity_id(&format!("D{i}")).unwrap(), g.entity_id(&format!("D{j}")).unwrap())
            }).collect();
        let space = enumerate_templates(&g, &pairs, 1).unwrap();
        (g, space)
    }

    #[test]
    fn poe_logit_modes_and_product_oracle() {
        let (g, space) = combined_fixture();
        let featurizer = PairFeaturizer::new(&space, &g);
        let mut p = ModelParams::init(&g, 3, space.len(), space.content_hash(&g), 2).unwrap();
        let h = g.entity_id("D0").unwrap();
        let t = g.entity_id("D1").unwrap();
        let r = g.relation_id("se0").unwrap();

        // zero rel_weights: Combined == EmbeddingOnly
        let z_e = poe_logit(&p, &featurizer, h, r, t, Mode::EmbeddingOnly).unwrap();
        let z_c = poe_logit(&p, &featurizer, h, r, t, Mode::Combined).unwrap();
        assert_eq!(z_e, z_c);
        assert_eq!(z_e, p.distmult_score(h, r, t).unwrap());

        // nonzero rel_weights: logit equals log of the product of experts
        for (i, w) in p.rel_weights.iter_mut().enumerate() {
            *w = 0.3 * (i as f64 + 1.0);
        }
        let z_c = poe_logit(&p, &featurizer, h, r, t, Mode::Combined).unwrap();
        let fv = featurizer.features(h, t);
        assert!(!fv.is_empty(), "fixture pair should have features");
        let product =
            p.distmult_score(h, r, t).unwrap().exp() * p.relational_score(r, &fv).unwrap().exp();
        assert!((z_c - product.ln()).abs() < 1e-12);
        // the combined logit is exactly the embedding logit plus the relational score
        let z_e = poe_logit(&p, &featurizer, h, r, t, Mode::EmbeddingOnly).unwrap();
        assert_eq!(z_c, z_e + p.relational_score(r, &fv).unwrap());
    }

    #[test]
    fn poe_probability_cases() {
        let (g, space) = combined_fixture();
        let featurizer = PairFeaturizer::new(&space, &g);
        let p = ModelParams::init(&g, 3, space.len(), space.content_hash(&g), 2).unwrap();
        let r = g.relation_id("se0").unwrap();
        let d = |i: usize, j: usize| {
            Triple::new(
                g.entity_id(&format!("D{i}")).unwrap(),
                r,
                g.entity_id(&format!("D{j}")).unwrap(),
            )
        };

        // singleton candidate set
        let single = [d(0, 1)];
        let pr =
            poe_probability(&p, &featurizer, &single, &single[0], Mode::EmbeddingOnly).unwrap();
        assert_eq!(pr, 1.0);

        // candidates over several triples: sums to 1, matches naive oracle
        let cands = [d(0, 1), d(0, 2), d(0, 3), d(1, 2), d(1, 3)];
        let mut total = 0.0;
        for c in &cands {
            total += poe_probability(&p, &featurizer, &cands, c, Mode::Combined).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-9);

        let logits: Vec<f64> = cands
            .iter()
            .map(|c| poe_logit(&p, &featurizer, c.head, c.relation, c.tail, Mode::Combined).unwrap())
            .collect();
        let naive: f64 =
            logits[2].exp() / logits.iter().map(|z| z.exp()).sum::<f64>();
        let got = poe_probability(&p, &featurizer, &cands, &cands[2], Mode::Combined).unwrap();
        assert!((got - naive).abs() < 1e-12);

        // query triple outside candidates is an error
        assert!(poe_probability(&p, &featurizer, &cands[..2], &d(1, 3), Mode::Combined).is_err());
    }

    #[test]
    fn softmax_handles_extreme_logits() {
        let probs = softmax(&[-500.0, 0.0, 500.0]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(probs.iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!(probs[2] > 0.999);

        let equal = softmax(&[3.0, 3.0]);
        assert_eq!(equal, vec![0.5, 0.5]);
    }

    #[test]
    fn baseline_featurize_manual_fixture() {
        // 2 mono terms, 2 proteins → width 4, dim 8.
        let mut b = GraphBuilder::new();
        let da = b.intern_entity("DA", EntityKind::Drug).unwrap();
        let db = b.intern_entity("DB", EntityKind::Drug).unwrap();
        let m0 = b.intern_entity("M0", EntityKind::MonoTerm).unwrap();
        let m1 = b.intern_entity("M1", EntityKind::MonoTerm).unwrap();
        let p0 = b.intern_entity("P0", EntityKind::Protein).unwrap();
        let p1 = b.intern_entity("P1", EntityKind::Protein).unwrap();
        let mono = b
            .intern_relation(MONO_SIDE_EFFECT_KEY, RelationKind::MonoSideEffect)
            .unwrap();
        let ht = b.intern_relation(HAS_TARGET_KEY, RelationKind::HasTarget).unwrap();
        b.add_triple(Triple::new(da, mono, m0)).unwrap();
        b.add_triple(Triple::new(db, mono, m0)).unwrap();
        b.add_triple(Triple::new(db, mono, m1)).unwrap();
        b.add_triple(Triple::new(da, ht, p0)).unwrap();
        b.add_triple(Triple::new(db, ht, p1)).unwrap();
        let g = b.freeze();
        let vocab = BaselineVocab::from_graph(&g);
        assert_eq!(vocab.dim(), 8);

        // DA: mono {M0}, target {P0} → slots {0, 2}; DB: {M0, M1}, {P1} → {4, 5, 7}
        let x = baseline_featurize(&g, &vocab, da, db);
        assert_eq!(x, vec![0, 2, 4, 5, 7]);
        // canonical order makes the encoding argument-order invariant
        assert_eq!(x, baseline_featurize(&g, &vocab, db, da));

        // drug with nothing: zero half
        let dc = {
            // rebuild with an extra bare drug
            let mut b = GraphBuilder::new();
            let da = b.intern_entity("DA", EntityKind::Drug).unwrap();
            let dc = b.intern_entity("DC", EntityKind::Drug).unwrap();
            let m0 = b.intern_entity("M0", EntityKind::MonoTerm).unwrap();
            let mono = b
                .intern_relation(MONO_SIDE_EFFECT_KEY, RelationKind::MonoSideEffect)
                .unwrap();
            b.add_triple(Triple::new(da, mono, m0)).unwrap();
            let g = b.freeze();
            let vocab = BaselineVocab::from_graph(&g);
            let x = baseline_featurize(&g, &vocab, da, dc);
            assert_eq!(x, vec![0]); // DC half entirely zero
            dc
        };
        let _ = dc;
    }

    #[test]
    fn baseline_score_examples() {
        let g = drug_graph(2, 2);
        let vocab = BaselineVocab::from_graph(&g); // empty vocab: dim 0
        assert_eq!(vocab.dim(), 0);
        let mut bp = BaselineParams::init(&g, &vocab);
        let r = g.relation_id("se1").unwrap();
        let row = bp.relation_row(r).unwrap();
        bp.bias[row] = -0.75;
        assert_eq!(bp.score(&[], r).unwrap(), -0.75);

        // toy weights over a fake 3-dim space
        let mut bp = BaselineParams {
            dim: 3,
            relation_ids: vec![r.index],
            relation_rows: [(r.index, 0)].into_iter().collect(),
            weights: vec![0.5, -1.0, 2.0],
            bias: vec![0.25],
        };
        assert_eq!(bp.score(&[0, 2], r).unwrap(), 0.25 + 0.5 + 2.0);
        assert_eq!(bp.score(&[], r).unwrap(), 0.25);
        assert!(matches!(bp.score(&[3], r), Err(Error::DimensionMismatch { .. })));
        bp.weights[1] = 0.0;
        assert_eq!(bp.score(&[1], r).unwrap(), 0.25);
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let (g, space) = combined_fixture();
        let mut p = ModelParams::init(&g, 5, space.len(), space.content_hash(&g), 3).unwrap();
        for (i, w) in p.rel_weights.iter_mut().enumerate() {
            *w = (i as f64) * -0.125;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &p).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let q = load_checkpoint(&path, Some(&space.content_hash(&g))).unwrap();
        assert_eq!(p, q);

        save_checkpoint(&path, &q).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());

        // wrong feature hash refused
        let err = load_checkpoint(&path, Some(&[1u8; 32])).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");

        // corrupted magic refused
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(load_checkpoint(&path, None).is_err());

        // truncation refused
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path, None).is_err());
    }

    #[test]
    fn scores_invariant_under_feature_index_permutation() {
        let (g, space) = combined_fixture();
        let featurizer = PairFeaturizer::new(&space, &g);
        let mut p = ModelParams::init(&g, 3, space.len(), [0; 32], 4).unwrap();
        for (i, w) in p.rel_weights.iter_mut().enumerate() {
            *w = (i as f64 + 1.0) * 0.11;
        }
        let r = g.relation_id("se0").unwrap();
        let h = g.entity_id("D0").unwrap();
        let t = g.entity_id("D1").unwrap();
        let fv = featurizer.features(h, t);
        let base = p.relational_score(r, &fv).unwrap();

        // reverse the index space consistently in fv and weights
        let n = space.len();
        let perm = |i: u32| (n as u32 - 1) - i;
        let mut fv2: Vec<u32> = fv.indices.iter().map(|&i| perm(i)).collect();
        fv2.sort_unstable();
        let mut p2 = p.clone();
        let row = p.relation_row(r).unwrap();
        for i in 0..n {
            p2.rel_weights[row * n + perm(i as u32) as usize] = p.rel_weights[row * n + i];
        }
        let permuted = p2.relational_score(r, &FeatureVector { indices: fv2 }).unwrap();
        assert!((base - permuted).abs() < 1e-15);
    }
}

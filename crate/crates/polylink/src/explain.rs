//! Candidate ranking for a side effect and additive attribution of combined
//! logits to the relational features that fired.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::dataset::{Label, Splits};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureTemplate, PairFeaturizer, RelationalFeatureSpace};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph, RelationId};
use crate::model::{poe_logit, Mode, ModelParams};

/// Candidates for one side effect, sorted by descending logit. Ties keep
/// canonical pair order (ascending id pairs), which also makes the ranking
/// independent of the caller's candidate order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub side_effect: RelationId,
    /// (drug_a, drug_b, logit) with drug_a.index < drug_b.index; rank of the
    /// i-th entry is i + 1.
    pub candidates: Vec<(EntityId, EntityId, f64)>,
}

impl RankingResult {
    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// 1-based rank of a pair, in either endpoint order.
    pub fn rank_of(&self, a: EntityId, b: EntityId, g: &KnowledgeGraph) -> Result<usize> {
        let key = canonical_pair(a, b);
        self.candidates
            .iter()
            .position(|&(x, y, _)| (x, y) == key)
            .map(|i| i + 1)
            .ok_or_else(|| {
                Error::UnknownPair(g.entity_key(a).to_string(), g.entity_key(b).to_string())
            })
    }
}

fn canonical_pair(a: EntityId, b: EntityId) -> (EntityId, EntityId) {
    if a.index <= b.index {
        (a, b)
    } else {
        (b, a)
    }
}

/// All unordered drug pairs that are not positive for `side_effect` in any
/// split — the "not a known side effect of this combination" universe.
pub fn default_candidates(
    g: &KnowledgeGraph,
    splits: &Splits,
    side_effect: RelationId,
) -> Vec<(EntityId, EntityId)> {
    let known: BTreeSet<(u32, u32)> = splits
        .all()
        .filter(|e| e.label == Label::Positive && e.side_effect == side_effect)
        .map(|e| (e.drug_a.index, e.drug_b.index))
        .collect();
    let drugs = g.entities_of_kind(EntityKind::Drug);
    let mut out = Vec::new();
    for i in 0..drugs.len() {
        for j in (i + 1)..drugs.len() {
            if !known.contains(&(drugs[i].index, drugs[j].index)) {
                out.push((drugs[i], drugs[j]));
            }
        }
    }
    out
}

/// Score and rank candidate pairs under one mode. Duplicate and swapped
/// candidates collapse to one canonical entry.
pub fn rank_candidates(
    params: &ModelParams,
    featurizer: &PairFeaturizer<'_>,
    side_effect: RelationId,
    candidates: &[(EntityId, EntityId)],
    mode: Mode,
) -> Result<RankingResult> {
    if candidates.is_empty() {
        return Err(Error::Config("empty candidate set".into()));
    }
    let unique: BTreeSet<(u32, u32)> = candidates
        .iter()
        .map(|&(a, b)| {
            let (x, y) = canonical_pair(a, b);
            (x.index, y.index)
        })
        .collect();
    let pairs: Vec<(EntityId, EntityId)> = unique
        .into_iter()
        .map(|(i, j)| {
            (
                EntityId { index: i, kind: EntityKind::Drug },
                EntityId { index: j, kind: EntityKind::Drug },
            )
        })
        .collect();
    let mut scored: Vec<(EntityId, EntityId, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| Ok((a, b, poe_logit(params, featurizer, a, side_effect, b, mode)?)))
        .collect::<Result<_>>()?;
    scored.sort_by(|x, y| y.2.total_cmp(&x.2));
    Ok(RankingResult { side_effect, candidates: scored })
}

/// Exact additive decomposition of one combined logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub drug_a: EntityId,
    pub drug_b: EntityId,
    pub side_effect: RelationId,
    pub embedding_contribution: f64,
    /// active features only, sorted by |contribution| descending (ties by
    /// template order)
    pub feature_contributions: Vec<(u32, FeatureTemplate, f64)>,
}

impl Attribution {
    /// Re-adds the parts in the same order the scorer used, so the result is
    /// bitwise equal to the combined logit.
    pub fn reconstructed_logit(&self) -> f64 {
        let mut by_index: Vec<(u32, f64)> = self
            .feature_contributions
            .iter()
            .map(|&(i, _, c)| (i, c))
            .collect();
        by_index.sort_unstable_by_key(|&(i, _)| i);
        let relational = by_index.iter().fold(0.0, |acc, &(_, c)| acc + c);
        self.embedding_contribution + relational
    }
}

pub fn attribute(
    params: &ModelParams,
    space: &RelationalFeatureSpace,
    g: &KnowledgeGraph,
    a: EntityId,
    b: EntityId,
    side_effect: RelationId,
) -> Result<Attribution> {
    if space.len() != params.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: params.feature_dim,
            got: space.len(),
        });
    }
    let (a, b) = canonical_pair(a, b);
    let embedding_contribution = params.distmult_score(a, side_effect, b)?;
    let fv = featurize(space, g, a, b);
    let row = params.rel_weight(side_effect)?;
    let mut feature_contributions = Vec::with_capacity(fv.indices.len());
    for &f in &fv.indices {
        feature_contributions.push((f, space.template(f), row[f as usize]));
    }
    feature_contributions
        .sort_by(|x, y| y.2.abs().total_cmp(&x.2.abs()).then(x.0.cmp(&y.0)));
    Ok(Attribution {
        drug_a: a,
        drug_b: b,
        side_effect,
        embedding_contribution,
        feature_contributions,
    })
}

fn render_template(g: &KnowledgeGraph, t: &FeatureTemplate) -> String {
    match t {
        FeatureTemplate::SharedTarget(p) => format!("shared_target {}", g.entity_key(*p)),
        FeatureTemplate::InteractingTargets(p, q) => {
            format!("interacting_targets {},{}", g.entity_key(*p), g.entity_key(*q))
        }
    }
}

/// Text block for one queried pair: logits and ranks under both modes, then
/// the strongest feature contributions.
pub fn explanation_block(
    g: &KnowledgeGraph,
    space: &RelationalFeatureSpace,
    embedding_ranking: &RankingResult,
    combined_ranking: &RankingResult,
    attribution: &Attribution,
    top_n: usize,
) -> Result<String> {
    let (a, b) = (attribution.drug_a, attribution.drug_b);
    let r = attribution.side_effect;
    let rank_e = embedding_ranking.rank_of(a, b, g)?;
    let rank_c = combined_ranking.rank_of(a, b, g)?;
    let logit_of = |rr: &RankingResult, rank: usize| rr.candidates[rank - 1].2;
    let mut out = String::new();
    out.push_str(&format!("pair: {} {}\n", g.entity_key(a), g.entity_key(b)));
    out.push_str(&format!(
        "side_effect: {} ({})\n",
        g.relation_key(r),
        g.relation_display(r)
    ));
    out.push_str(&format!(
        "embedding_only: logit {:.6} rank {} of {}\n",
        logit_of(embedding_ranking, rank_e),
        rank_e,
        embedding_ranking.n_candidates()
    ));
    out.push_str(&format!(
        "combined: logit {:.6} rank {} of {}\n",
        logit_of(combined_ranking, rank_c),
        rank_c,
        combined_ranking.n_candidates()
    ));
    out.push_str(&format!(
        "embedding_contribution: {:.6}\n",
        attribution.embedding_contribution
    ));
    let shown = top_n.min(attribution.feature_contributions.len());
    out.push_str(&format!(
        "feature_contributions (top {shown} of {} active):\n",
        attribution.feature_contributions.len()
    ));
    for (i, t, c) in attribution.feature_contributions.iter().take(top_n) {
        out.push_str(&format!(
            "  {} (support {}): {:+.6}\n",
            render_template(g, t),
            space.support(*i),
            c
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{self, SplitSpec};
    use crate::features::enumerate_templates;
    use crate::ingest::{HAS_TARGET_KEY, INTERACTS_WITH_KEY};
    use crate::kg::{GraphBuilder, RelationKind, Triple};
    use rand::seq::SliceRandom;
    use rand::Rng;

    struct Toy {
        g: KnowledgeGraph,
        drugs: Vec<EntityId>,
        se: RelationId,
    }

    fn toy() -> Toy {
        let mut b = GraphBuilder::new();
        let drugs: Vec<_> = (0..5)
            .map(|i| b.intern_entity(&format!("D{i}"), EntityKind::Drug).unwrap())
            .collect();
        let prots: Vec<_> = (0..3)
            .map(|i| b.intern_entity(&format!("P{i}"), EntityKind::Protein).unwrap())
            .collect();
        let se = b.intern_relation("se0", RelationKind::PolypharmacySideEffect).unwrap();
        b.set_relation_display(se, "pain");
        let ht = b.intern_relation(HAS_TARGET_KEY, RelationKind::HasTarget).unwrap();
        let iw = b.intern_relation(INTERACTS_WITH_KEY, RelationKind::InteractsWith).unwrap();
        for (i, &d) in drugs.iter().enumerate() {
            b.add_triple(Triple::new(d, ht, prots[i % 3])).unwrap();
            b.add_triple(Triple::new(d, ht, prots[(i + 1) % 3])).unwrap();
        }
        b.add_triple(Triple::new(prots[0], iw, prots[1])).unwrap();
        b.add_triple(Triple::new(drugs[0], se, drugs[1])).unwrap();
        b.add_triple(Triple::new(drugs[1], se, drugs[2])).unwrap();
        Toy { g: b.freeze(), drugs, se }
    }

    fn toy_space(t: &Toy) -> RelationalFeatureSpace {
        let mut pairs = Vec::new();
        for i in 0..t.drugs.len() {
            for j in (i + 1)..t.drugs.len() {
                pairs.push((t.drugs[i], t.drugs[j]));
            }
        }
        enumerate_templates(&t.g, &pairs, 1).unwrap()
    }

    #[test]
    fn single_candidate_gets_rank_one() {
        let t = toy();
        let space = toy_space(&t);
        let featurizer = PairFeaturizer::new(&space, &t.g);
        let params =
            ModelParams::init(&t.g, 3, space.len(), space.content_hash(&t.g), 1).unwrap();
        let rr = rank_candidates(
            &params,
            &featurizer,
            t.se,
            &[(t.drugs[0], t.drugs[1])],
            Mode::EmbeddingOnly,
        )
        .unwrap();
        assert_eq!(rr.n_candidates(), 1);
        assert_eq!(rr.rank_of(t.drugs[0], t.drugs[1], &t.g).unwrap(), 1);
        // swapped query finds the same canonical pair
        assert_eq!(rr.rank_of(t.drugs[1], t.drugs[0], &t.g).unwrap(), 1);
    }

    #[test]
    fn order_matches_hand_computed_logits() {
        let t = toy();
        let space = toy_space(&t);
        let featurizer = PairFeaturizer::new(&space, &t.g);
        let mut params =
            ModelParams::init(&t.g, 2, space.len(), space.content_hash(&t.g), 2).unwrap();
        // hand-set: e_Di = (i+1, 0), w = (1, 1), rel weights zero
        // → logit(Di, Dj) = (i+1)(j+1)
        for (row, x) in params.embeddings.chunks_mut(2).enumerate() {
            x[0] = (row + 1) as f64;
            x[1] = 0.0;
        }
        for w in params.embed_weights.iter_mut() {
            *w = 1.0;
        }
        let cands = [
            (t.drugs[0], t.drugs[1]), // 2
            (t.drugs[2], t.drugs[3]), // 12
            (t.drugs[0], t.drugs[4]), // 5
        ];
        let rr =
            rank_candidates(&params, &featurizer, t.se, &cands, Mode::EmbeddingOnly).unwrap();
        assert_eq!(rr.rank_of(t.drugs[2], t.drugs[3], &t.g).unwrap(), 1);
        assert_eq!(rr.rank_of(t.drugs[0], t.drugs[4], &t.g).unwrap(), 2);
        assert_eq!(rr.rank_of(t.drugs[0], t.drugs[1], &t.g).unwrap(), 3);
        assert_eq!(rr.candidates[0].2, 12.0);
    }

    #[test]
    fn ranking_is_invariant_under_input_order_and_duplicates() {
        let t = toy();
        let space = toy_space(&t);
        let featurizer = PairFeaturizer::new(&space, &t.g);
        let params =
            ModelParams::init(&t.g, 3, space.len(), space.content_hash(&t.g), 3).unwrap();
        let mut cands = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                cands.push((t.drugs[i], t.drugs[j]));
            }
        }
        let base =
            rank_candidates(&params, &featurizer, t.se, &cands, Mode::Combined).unwrap();
        let mut rng = crate::rng::stream(4, crate::rng::Stream::Synthetic(0));
        for _ in 0..10 {
            let mut shuffled = cands.clone();
            shuffled.shuffle(&mut rng);
            // swap some endpoint orders and duplicate a few entries
            for c in shuffled.iter_mut() {
                if rng.gen_bool(0.5) {
                    *c = (c.1, c.0);
                }
            }
            shuffled.push(shuffled[0]);
            let rr = rank_candidates(&params, &featurizer, t.se, &shuffled, Mode::Combined)
                .unwrap();
            assert_eq!(rr, base);
        }
    }

    #[test]
    fn ties_fall_back_to_canonical_pair_order() {
        let t = toy();
        let space = toy_space(&t);
        let featurizer = PairFeaturizer::new(&space, &t.g);
        let mut params =
            ModelParams::init(&t.g, 3, space.len(), space.content_hash(&t.g), 5).unwrap();
        for x in params.embeddings.iter_mut() {
            *x = 0.0; // every logit 0 → all tied
        }
        let cands = [
            (t.drugs[3], t.drugs[4]),
            (t.drugs[0], t.drugs[2]),
            (t.drugs[0], t.drugs[1]),
        ];
        let rr =
            rank_candidates(&params, &featurizer, t.se, &cands, Mode::EmbeddingOnly).unwrap();
        assert_eq!(rr.rank_of(t.drugs[0], t.drugs[1], &t.g).unwrap(), 1);
        assert_eq!(rr.rank_of(t.drugs[0], t.drugs[2], &t.g).unwrap(), 2);
        assert_eq!(rr.rank_of(t.drugs[3], t.drugs[4], &t.g).unwrap(), 3);
    }

    #[test]
    fn unknown_pair_is_an_error() {
        let t = toy();
        let space = toy_space(&t);
        let featurizer = PairFeaturizer::new(&space, &t.g);
        let params =
            ModelParams::init(&t.g, 3, space.len(), space.content_hash(&t.g), 6).unwrap();
        let rr = rank_candidates(
            &params,
            &featurizer,
            t.se,
            &[(t.drugs[0], t.drugs[1])],
            Mode::Combined,
        )
        .unwrap();
        assert!(matches!(
            rr.rank_of(t.drugs[2], t.drugs[3], &t.g),
            Err(Error::UnknownPair(..))
        ));
    }

    #[test]
    fn default_candidates_exclude_positexamples_of_this_relation_only() {
        let t = toy();
        let mut examples = dataset::positives(&t.g);
        examples.extend(dataset::sample_negatives(&t.g, 7).unwrap());
        let splits =
            dataset::stratified_split(&examples, &SplitSpec { seed: 7, ..SplitSpec::default() })
                .unwrap();
        let cands = default_candidates(&t.g, &splits, t.se);
        let positives: BTreeSet<(u32, u32)> = splits
            .all()
            .filter(|e| e.label == Label::Positive && e.side_effect == t.se)
            .map(|e| (e.drug_a.index, e.drug_b.index))
            .collect();
        assert_eq!(cands.len(), 10 - positives.len());
        for (a, b) in &cands {
            assert!(!positives.contains(&(a.index, b.index)));
        }
        // negative examples stay in the universe
        let neg = splits.all().find(|e| e.label == Label::Negative).copied();
        if let Some(neg) = neg {
            assert!(cands
                .iter()
                .any(|&(a, b)| (a.index, b.index) == (neg.drug_a.index, neg.drug_b.index)));
        }
    }

    #[test]
    fn attribution_reconstructs_the_combined_logit_bitwise() {
        let t = toy();
        let space = toy_space(&t);
        assert!(space.len() >= 2, "fixture needs several templates");
        let featurizer = PairFeaturizer::new(&space, &t.g);
        for seed in 0..100 {
            let mut params =
                ModelParams::init(&t.g, 4, space.len(), space.content_hash(&t.g), seed).unwrap();
            let mut rng = crate::rng::stream(seed, crate::rng::Stream::Synthetic(9));
            for w in params.rel_weights.iter_mut() {
                *w = rng.gen_range(-2.0..2.0);
            }
            for i in 0..5 {
                for j in (i + 1)..5 {
                    let (a, b) = (t.drugs[i], t.drugs[j]);
                    let att = attribute(&params, &space, &t.g, a, b, t.se).unwrap();
                    let z = poe_logit(&params, &featurizer, a, t.se, b, Mode::Combined).unwrap();
                    assert_eq!(att.reconstructed_logit().to_bits(), z.to_bits());
                }
            }
        }
    }

    #[test]
    fn attribution_lists_active_features_by_absolute_weight() {
        let t = toy();
        let space = toy_space(&t);
        let mut params =
            ModelParams::init(&t.g, 3, space.len(), space.content_hash(&t.g), 8).unwrap();
        let row = params.relation_row(t.se).unwrap();
        for f in 0..space.len() {
            params.rel_weights[row * space.len() + f] =
                if f % 2 == 0 { -(f as f64 + 1.0) } else { f as f64 + 1.0 };
        }
        // pick a pair with ≥2 active features
        let mut found = false;
        for i in 0..5 {
            for j in (i + 1)..5 {
                let att =
                    attribute(&params, &space, &t.g, t.drugs[i], t.drugs[j], t.se).unwrap();
                let fv = featurize(&space, &t.g, t.drugs[i], t.drugs[j]);
                assert_eq!(att.feature_contributions.len(), fv.indices.len());
                for w in att.feature_contributions.windows(2) {
                    assert!(w[0].2.abs() >= w[1].2.abs());
                }
                if att.feature_contributions.len() >= 2 {
                    found = true;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn explanation_block_reports_both_modes() {
        let t = toy();
        let space = toy_space(&t);
        let featurizer = PairFeaturizer::new(&space, &t.g);
        let mut params =
            ModelParams::init(&t.g, 3, space.len(), space.content_hash(&t.g), 9).unwrap();
        for w in params.rel_weights.iter_mut() {
            *w = 0.5;
        }
        let mut cands = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                cands.push((t.drugs[i], t.drugs[j]));
            }
        }
        let re = rank_candidates(&params, &featurizer, t.se, &cands, Mode::EmbeddingOnly).unwrap();
        let rc = rank_candidates(&params, &featurizer, t.se, &cands, Mode::Combined).unwrap();
        let att = attribute(&params, &space, &t.g, t.drugs[0], t.drugs[3], t.se).unwrap();
        let block = explanation_block(&t.g, &space, &re, &rc, &att, 5).unwrap();
        assert!(block.contains("pair: D0 D3"));
        assert!(block.contains("side_effect: se0 (pain)"));
        assert!(block.contains("embedding_only: logit"));
        assert!(block.contains("combined: logit"));
        assert!(block.contains("of 10\n"));
    }
}

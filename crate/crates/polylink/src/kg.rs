//! Entity/relation interning and an immutable, index-backed multi-relational
//! graph.
//!
//! Construction is single-writer through [`GraphBuilder`]; [`GraphBuilder::freeze`]
//! produces an immutable [`KnowledgeGraph`] that is safe for unrestricted
//! concurrent reads.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Drug,
    Protein,
    /// Mono side-effect vocabulary term. Used as a drug descriptor only;
    /// these entities never receive embeddings.
    MonoTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    PolypharmacySideEffect,
    HasTarget,
    InteractsWith,
    MonoSideEffect,
}

impl RelationKind {
    /// Symmetric relations are stored canonically once with head id <= tail id.
    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            RelationKind::PolypharmacySideEffect | RelationKind::InteractsWith
        )
    }

    /// HasTarget, InteractsWith and MonoSideEffect each have exactly one
    /// RelationId; only polypharmacy side effects form a family.
    fn is_singleton(self) -> bool {
        !matches!(self, RelationKind::PolypharmacySideEffect)
    }
}

/// Dense entity index plus its fixed kind. Ids are contiguous per
/// construction run, across kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    pub index: u32,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId {
    pub index: u32,
    pub kind: RelationKind,
}

/// One typed edge. Symmetric relations are canonicalized on insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }

    /// Canonical form: (min id, max id) endpoints for symmetric relations.
    pub fn canonical(&self) -> Triple {
        if self.relation.kind.is_symmetric() && self.tail.index < self.head.index {
            Triple { head: self.tail, relation: self.relation, tail: self.head }
        } else {
            *self
        }
    }
}

#[derive(Debug, Clone, Default)]
struct EntityTable {
    by_key: HashMap<String, u32>,
    keys: Vec<String>,
    kinds: Vec<EntityKind>,
    display: Vec<Option<String>>,
}

#[derive(Debug, Clone, Default)]
struct RelationTable {
    by_key: HashMap<String, u32>,
    keys: Vec<String>,
    kinds: Vec<RelationKind>,
    display: Vec<Option<String>>,
}

/// Single-writer construction side of the graph.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: EntityTable,
    relations: RelationTable,
    triples: Vec<Triple>,
    // (head, relation) -> tails, with both directions inserted for symmetric
    // relations; (tail, relation) -> heads for directed relations.
    fwd: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    rev: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    seen: HashSet<(u32, u32, u32)>,
    counts: Vec<usize>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern an external key. Idempotent: the same key always returns the
    /// same id; re-interning under a different kind is a [`Error::KindConflict`].
    pub fn intern_entity(&mut self, key: &str, kind: EntityKind) -> Result<EntityId> {
        if key.is_empty() {
            return Err(Error::SchemaViolation("empty entity key".into()));
        }
        if let Some(&index) = self.entities.by_key.get(key) {
            let existing = self.entities.kinds[index as usize];
            if existing != kind {
                return Err(Error::KindConflict { key: key.to_string(), existing, requested: kind });
            }
            return Ok(EntityId { index, kind });
        }
        let index = self.entities.keys.len() as u32;
        self.entities.by_key.insert(key.to_string(), index);
        self.entities.keys.push(key.to_string());
        self.entities.kinds.push(kind);
        self.entities.display.push(None);
        Ok(EntityId { index, kind })
    }

    pub fn intern_relation(&mut self, key: &str, kind: RelationKind) -> Result<RelationId> {
        if key.is_empty() {
            return Err(Error::SchemaViolation("empty relation key".into()));
        }
        if let Some(&index) = self.relations.by_key.get(key) {
            let existing = self.relations.kinds[index as usize];
            if existing != kind {
                return Err(Error::SchemaViolation(format!(
                    "relation '{key}' already interned as {existing:?}, requested {kind:?}"
                )));
            }
            return Ok(RelationId { index, kind });
        }
        if kind.is_singleton() && self.relations.kinds.iter().any(|&k| k == kind) {
            return Err(Error::SchemaViolation(format!(
                "relation kind {kind:?} admits exactly one relation; '{key}' would be a second"
            )));
        }
        let index = self.relations.keys.len() as u32;
        self.relations.by_key.insert(key.to_string(), index);
        self.relations.keys.push(key.to_string());
        self.relations.kinds.push(kind);
        self.relations.display.push(None);
        self.counts.push(0);
        Ok(RelationId { index, kind })
    }

    /// Human-readable name for reports; the interned key stays the lookup key.
    pub fn set_relation_display(&mut self, r: RelationId, name: &str) {
        let slot = &mut self.relations.display[r.index as usize];
        if slot.is_none() {
            *slot = Some(name.to_string());
        }
    }

    pub fn set_entity_display(&mut self, e: EntityId, name: &str) {
        let slot = &mut self.entities.display[e.index as usize];
        if slot.is_none() {
            *slot = Some(name.to_string());
        }
    }

    /// Insert a triple. Endpoint kinds must match the relation schema;
    /// duplicate insertions (after canonicalization) are no-ops; self-loops
    /// are rejected.
    pub fn add_triple(&mut self, t: Triple) -> Result<()> {
        self.check_schema(&t)?;
        let c = t.canonical();
        if !self.seen.insert((c.head.index, c.relation.index, c.tail.index)) {
            return Ok(());
        }
        self.counts[c.relation.index as usize] += 1;
        if c.relation.kind.is_symmetric() {
            self.fwd.entry((c.head, c.relation)).or_default().push(c.tail);
            self.fwd.entry((c.tail, c.relation)).or_default().push(c.head);
        } else {
            self.fwd.entry((c.head, c.relation)).or_default().push(c.tail);
            self.rev.entry((c.tail, c.relation)).or_default().push(c.head);
        }
        self.triples.push(c);
        Ok(())
    }

    fn check_schema(&self, t: &Triple) -> Result<()> {
        let (h, r, tl) = (t.head, t.relation, t.tail);
        let ok = match r.kind {
            RelationKind::PolypharmacySideEffect => {
                h.kind == EntityKind::Drug && tl.kind == EntityKind::Drug
            }
            RelationKind::HasTarget => h.kind == EntityKind::Drug && tl.kind == EntityKind::Protein,
            RelationKind::InteractsWith => {
                h.kind == EntityKind::Protein && tl.kind == EntityKind::Protein
            }
            RelationKind::MonoSideEffect => {
                h.kind == EntityKind::Drug && tl.kind == EntityKind::MonoTerm
            }
        };
        if !ok {
            return Err(Error::SchemaViolation(format!(
                "relation {:?} cannot connect {:?} to {:?}",
                r.kind, h.kind, tl.kind
            )));
        }
        if h.index == tl.index {
            return Err(Error::SchemaViolation(format!(
                "self-loop on entity '{}' under {:?}",
                self.entities.keys[h.index as usize], r.kind
            )));
        }
        Ok(())
    }

    /// Freeze into the immutable, read-optimized graph.
    pub fn freeze(mut self) -> KnowledgeGraph {
        for v in self.fwd.values_mut() {
            v.sort_unstable();
        }
        for v in self.rev.values_mut() {
            v.sort_unstable();
        }
        let mut by_relation: Vec<Vec<u32>> = vec![Vec::new(); self.relations.keys.len()];
        for (i, t) in self.triples.iter().enumerate() {
            by_relation[t.relation.index as usize].push(i as u32);
        }
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            fwd: self.fwd,
            rev: self.rev,
            counts: self.counts,
            by_relation,
        }
    }
}

/// Immutable indexed store of entities, relation types, and triples.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: EntityTable,
    relations: RelationTable,
    triples: Vec<Triple>,
    fwd: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    rev: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    counts: Vec<usize>,
    by_relation: Vec<Vec<u32>>,
}

const EMPTY: &[EntityId] = &[];

impl KnowledgeGraph {
    pub fn entity_count(&self) -> usize {
        self.entities.keys.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.keys.len()
    }

    pub fn entity_id(&self, key: &str) -> Option<EntityId> {
        self.entities.by_key.get(key).map(|&index| EntityId {
            index,
            kind: self.entities.kinds[index as usize],
        })
    }

    pub fn entity_key(&self, e: EntityId) -> &str {
        &self.entities.keys[e.index as usize]
    }

    pub fn entity_display(&self, e: EntityId) -> &str {
        self.entities.display[e.index as usize]
            .as_deref()
            .unwrap_or(&self.entities.keys[e.index as usize])
    }

    pub fn relation_id(&self, key: &str) -> Option<RelationId> {
        self.relations.by_key.get(key).map(|&index| RelationId {
            index,
            kind: self.relations.kinds[index as usize],
        })
    }

    pub fn relation_key(&self, r: RelationId) -> &str {
        &self.relations.keys[r.index as usize]
    }

    pub fn relation_display(&self, r: RelationId) -> &str {
        self.relations.display[r.index as usize]
            .as_deref()
            .unwrap_or(&self.relations.keys[r.index as usize])
    }

    /// All entities of one kind, in id order.
    pub fn entities_of_kind(&self, kind: EntityKind) -> Vec<EntityId> {
        self.entities
            .kinds
            .iter()
            .enumerate()
            .filter(|&(_, &k)| k == kind)
            .map(|(i, &k)| EntityId { index: i as u32, kind: k })
            .collect()
    }

    /// All relations of one kind, in id order.
    pub fn relations_of_kind(&self, kind: RelationKind) -> Vec<RelationId> {
        self.relations
            .kinds
            .iter()
            .enumerate()
            .filter(|&(_, &k)| k == kind)
            .map(|(i, &k)| RelationId { index: i as u32, kind: k })
            .collect()
    }

    /// Canonical triples in insertion order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Canonical triples of one relation, in insertion order.
    pub fn triples_of(&self, r: RelationId) -> impl Iterator<Item = &Triple> + '_ {
        self.by_relation[r.index as usize]
            .iter()
            .map(move |&i| &self.triples[i as usize])
    }

    /// Sorted neighbors of `e` under `r`: tails of (e, r, .) plus, for
    /// symmetric relations, heads of (., r, e).
    pub fn neighbors(&self, e: EntityId, r: RelationId) -> &[EntityId] {
        self.fwd.get(&(e, r)).map_or(EMPTY, Vec::as_slice)
    }

    /// Sorted heads u with (u, r, e). Equals `neighbors` for symmetric
    /// relations.
    pub fn incoming(&self, e: EntityId, r: RelationId) -> &[EntityId] {
        if r.kind.is_symmetric() {
            self.neighbors(e, r)
        } else {
            self.rev.get(&(e, r)).map_or(EMPTY, Vec::as_slice)
        }
    }

    /// True iff the canonicalized triple was added.
    pub fn contains(&self, t: &Triple) -> bool {
        let c = t.canonical();
        self.fwd
            .get(&(c.head, c.relation))
            .map_or(false, |v| v.binary_search(&c.tail).is_ok())
    }

    /// Canonical triple count for one relation.
    pub fn triple_count(&self, r: RelationId) -> usize {
        self.counts[r.index as usize]
    }

    pub fn total_triples(&self) -> usize {
        self.triples.len()
    }

    /// Copy with only the triples accepted by `keep`, preserving every
    /// interning table (entity and relation ids are stable across filtering).
    pub fn filtered(&self, mut keep: impl FnMut(&Triple) -> bool) -> KnowledgeGraph {
        let mut b = GraphBuilder {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            counts: vec![0; self.relations.keys.len()],
            ..GraphBuilder::default()
        };
        for t in &self.triples {
            if keep(t) {
                b.add_triple(*t).expect("re-adding a stored triple cannot violate schema");
            }
        }
        b.freeze()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn toy() -> (GraphBuilder, EntityId, EntityId, EntityId, RelationId, RelationId) {
        let mut b = GraphBuilder::new();
        let a = b.intern_entity("CID000000271", EntityKind::Drug).unwrap();
        let d = b.intern_entity("CID000115237", EntityKind::Drug).unwrap();
        let p = b.intern_entity("9606.ENSP00000353915", EntityKind::Protein).unwrap();
        let se = b.intern_relation("C0000729", RelationKind::PolypharmacySideEffect).unwrap();
        let ht = b.intern_relation("hasTarget", RelationKind::HasTarget).unwrap();
        (b, a, d, p, se, ht)
    }

    #[test]
    fn interning_is_idempotent_and_contiguous() {
        let mut b = GraphBuilder::new();
        let first = b.intern_entity("CID000000271", EntityKind::Drug).unwrap();
        assert_eq!(first, EntityId { index: 0, kind: EntityKind::Drug });
        let again = b.intern_entity("CID000000271", EntityKind::Drug).unwrap();
        assert_eq!(first, again);
        let p = b.intern_entity("9606.ENSP00000353915", EntityKind::Protein).unwrap();
        assert_eq!(p.index, 1);
    }

    #[test]
    fn kind_conflict_is_rejected() {
        let mut b = GraphBuilder::new();
        b.intern_entity("CID000000271", EntityKind::Drug).unwrap();
        let err = b.intern_entity("CID000000271", EntityKind::Protein).unwrap_err();
        assert!(matches!(err, Error::KindConflict { .. }), "{err}");
    }

    #[test]
    fn singleton_relation_kinds_admit_one_key() {
        let mut b = GraphBuilder::new();
        b.intern_relation("hasTarget", RelationKind::HasTarget).unwrap();
        // Same key again is fine.
        b.intern_relation("hasTarget", RelationKind::HasTarget).unwrap();
        assert!(b.intern_relation("targets", RelationKind::HasTarget).is_err());
        // The polypharmacy family is open-ended.
        b.intern_relation("C0000729", RelationKind::PolypharmacySideEffect).unwrap();
        b.intern_relation("C0000737", RelationKind::PolypharmacySideEffect).unwrap();
    }

    #[test]
    fn symmetric_insertion_is_canonicalized() {
        let (mut b, a, d, _, se, _) = toy();
        b.add_triple(Triple::new(a, se, d)).unwrap();
        b.add_triple(Triple::new(d, se, a)).unwrap();
        let g = b.freeze();
        assert_eq!(g.triple_count(se), 1);
        assert!(g.contains(&Triple::new(a, se, d)));
        assert!(g.contains(&Triple::new(d, se, a)));
    }

    #[test]
    fn directed_index_is_consistent() {
        let (mut b, a, _, p, _, ht) = toy();
        b.add_triple(Triple::new(a, ht, p)).unwrap();
        let g = b.freeze();
        assert_eq!(g.neighbors(a, ht), &[p]);
        assert_eq!(g.incoming(p, ht), &[a]);
        assert!(g.neighbors(p, ht).is_empty());
    }

    #[test]
    fn schema_violations_are_rejected() {
        let (mut b, a, d, p, se, ht) = toy();
        assert!(b.add_triple(Triple::new(p, ht, a)).is_err());
        assert!(b.add_triple(Triple::new(a, se, p)).is_err());
        // self-loop
        assert!(b.add_triple(Triple::new(a, se, a)).is_err());
        let _ = d;
    }

    #[test]
    fn empty_graph_has_no_neighbors() {
        let (b, a, _, _, se, _) = toy();
        let g = b.freeze();
        assert!(g.neighbors(a, se).is_empty());
        assert_eq!(g.triple_count(se), 0);
    }

    #[test]
    fn ppi_symmetry() {
        let mut b = GraphBuilder::new();
        let p1 = b.intern_entity("p1", EntityKind::Protein).unwrap();
        let p2 = b.intern_entity("p2", EntityKind::Protein).unwrap();
        let iw = b.intern_relation("interactsWith", RelationKind::InteractsWith).unwrap();
        b.add_triple(Triple::new(p1, iw, p2)).unwrap();
        let g = b.freeze();
        assert_eq!(g.neighbors(p2, iw), &[p1]);
        assert_eq!(g.incoming(p2, iw), &[p1]);
    }

    /// neighbors on a small random graph must match a linear scan over the
    /// triple list, and contains must match a hash-set oracle.
    #[test]
    fn neighbors_and_contains_match_oracles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);

        let mut b = GraphBuilder::new();
        let drugs: Vec<_> = (0..6)
            .map(|i| b.intern_entity(&format!("d{i}"), EntityKind::Drug).unwrap())
            .collect();
        let prots: Vec<_> = (0..5)
            .map(|i| b.intern_entity(&format!("p{i}"), EntityKind::Protein).unwrap())
            .collect();
        let se = b.intern_relation("se0", RelationKind::PolypharmacySideEffect).unwrap();
        let ht = b.intern_relation("hasTarget", RelationKind::HasTarget).unwrap();
        let iw = b.intern_relation("interactsWith", RelationKind::InteractsWith).unwrap();

        let mut added = Vec::new();
        for _ in 0..40 {
            let t = match rng.gen_range(0..3) {
                0 => {
                    let (i, j) = (rng.gen_range(0..6), rng.gen_range(0..6));
                    if i == j {
                        continue;
                    }
                    Triple::new(drugs[i], se, drugs[j])
                }
                1 => Triple::new(drugs[rng.gen_range(0..6)], ht, prots[rng.gen_range(0..5)]),
                _ => {
                    let (i, j) = (rng.gen_range(0..5), rng.gen_range(0..5));
                    if i == j {
                        continue;
                    }
                    Triple::new(prots[i], iw, prots[j])
                }
            };
            b.add_triple(t).unwrap();
            added.push(t.canonical());
        }
        let g = b.freeze();

        let oracle: HashSet<Triple> = added.iter().copied().collect();
        let all: Vec<EntityId> = drugs.iter().chain(prots.iter()).copied().collect();

        for &e in &all {
            for &r in &[se, ht, iw] {
                // brute-force scan of the triple list
                let mut expect: Vec<EntityId> = added
                    .iter()
                    .flat_map(|t| {
                        let mut out = Vec::new();
                        if t.relation == r {
                            if t.head == e {
                                out.push(t.tail);
                            }
                            if r.kind.is_symmetric() && t.tail == e {
                                out.push(t.head);
                            }
                        }
                        out
                    })
                    .collect();
                expect.sort_unstable();
                expect.dedup();
                assert_eq!(g.neighbors(e, r), expect.as_slice(), "entity {e:?} relation {r:?}");
            }
        }

        // 1000 random probes against the set oracle
        for _ in 0..1000 {
            let (i, j) = (rng.gen_range(0..6), rng.gen_range(0..6));
            if i == j {
                continue;
            }
            let probe = Triple::new(drugs[i], se, drugs[j]);
            assert_eq!(g.contains(&probe), oracle.contains(&probe.canonical()));
        }

        // counts equal index sizes
        let total: usize =
            [se, ht, iw].iter().map(|&r| g.triple_count(r)).sum();
        assert_eq!(total, oracle.len());
    }

    #[test]
    fn filtered_preserves_interning() {
        let (mut b, a, d, p, se, ht) = toy();
        b.add_triple(Triple::new(a, se, d)).unwrap();
        b.add_triple(Triple::new(a, ht, p)).unwrap();
        let g = b.freeze();
        let only_se = g.filtered(|t| t.relation.kind == RelationKind::PolypharmacySideEffect);
        assert_eq!(only_se.entity_id("CID000000271"), Some(a));
        assert_eq!(only_se.total_triples(), 1);
        assert!(only_se.contains(&Triple::new(d, se, a)));
        assert!(!only_se.contains(&Triple::new(a, ht, p)));
    }
}

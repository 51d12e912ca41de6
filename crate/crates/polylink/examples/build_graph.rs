//! Build a small multi-relational knowledge graph by hand and query it.
//!
//! Shows the four relation kinds, symmetric-edge canonicalization, adjacency
//! queries, and regime-style filtering with stable entity ids.

use polylink::ingest::{HAS_TARGET_KEY, INTERACTS_WITH_KEY};
use polylink::kg::{EntityKind, GraphBuilder, RelationKind, Triple};

fn main() -> polylink::Result<()> {
    let mut b = GraphBuilder::new();

    let aspirin = b.intern_entity("CID2244", EntityKind::Drug)?;
    let warfarin = b.intern_entity("CID54678486", EntityKind::Drug)?;
    let ptgs1 = b.intern_entity("5742", EntityKind::Protein)?;
    let vkorc1 = b.intern_entity("79001", EntityKind::Protein)?;

    let bleeding = b.intern_relation("C0005779", RelationKind::PolypharmacySideEffect)?;
    b.set_relation_display(bleeding, "bleeding");
    let has_target = b.intern_relation(HAS_TARGET_KEY, RelationKind::HasTarget)?;
    let interacts = b.intern_relation(INTERACTS_WITH_KEY, RelationKind::InteractsWith)?;

    b.add_triple(Triple::new(aspirin, has_target, ptgs1))?;
    b.add_triple(Triple::new(warfarin, has_target, vkorc1))?;
    b.add_triple(Triple::new(ptgs1, interacts, vkorc1))?;
    // symmetric relations are canonicalized: inserting either direction of a
    // drug-drug edge stores the same triple
    b.add_triple(Triple::new(warfarin, bleeding, aspirin))?;

    let g = b.freeze();
    println!("entities: {}  triples: {}", g.entity_count(), g.total_triples());
    println!(
        "{} is a side effect of ({}, {}): {}",
        g.relation_display(bleeding),
        g.entity_key(aspirin),
        g.entity_key(warfarin),
        g.contains(&Triple::new(aspirin, bleeding, warfarin)),
    );
    for p in g.neighbors(aspirin, has_target) {
        println!("{} targets protein {}", g.entity_key(aspirin), g.entity_key(*p));
    }

    // dropping structural triples keeps ids stable (the DrugDrugOnly regime)
    let drug_drug = g.filtered(|t| t.relation.kind == RelationKind::PolypharmacySideEffect);
    println!(
        "after filtering: {} triples, aspirin still interned: {}",
        drug_drug.total_triples(),
        drug_drug.entity_id("CID2244") == Some(aspirin),
    );
    Ok(())
}

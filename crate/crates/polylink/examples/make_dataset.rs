//! Generate a synthetic dataset, ingest it, and build stratified splits.
//!
//! The generator plants each side effect on drug pairs whose targets bridge a
//! protein pair that interacts, writes the four standard input files, and the
//! normal ingest/split machinery takes it from there.

use polylink::dataset::{self, Regime, SplitSpec};
use polylink::ingest::{ingest_dataset, stats_report, IngestSchema, PUBLISHED_STATS};
use polylink::synth::{synthetic_paths, write_synthetic_dataset, SynthConfig};

fn main() -> polylink::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let paths = synthetic_paths(dir.path());
    let synth = SynthConfig { n_drugs: 80, n_side_effects: 12, seed: 7, ..SynthConfig::default() };
    write_synthetic_dataset(&paths, &synth)?;

    let (g, stats) = ingest_dataset(&paths, &IngestSchema::default())?;
    println!("--- statistics vs the published reference counts ---");
    print!("{}", stats_report(&stats, &PUBLISHED_STATS));

    // examples: every positive pair plus an equal number of sampled negatives
    let mut examples = dataset::positives(&g);
    let n_pos = examples.len();
    examples.extend(dataset::sample_negatives(&g, 7)?);
    println!("\n{} positives, {} negatives", n_pos, examples.len() - n_pos);

    let splits = dataset::stratified_split(&examples, &SplitSpec { seed: 7, ..SplitSpec::default() })?;
    println!(
        "split sizes: train {} / valid {} / test {}",
        splits.train.len(),
        splits.valid.len(),
        splits.test.len()
    );

    for regime in [Regime::Full, Regime::DrugDrugOnly, Regime::TargetedDrugsOnly] {
        let (g_r, s_r) = dataset::apply_regime(&g, &splits, regime);
        println!(
            "{:>20}: {} triples, {} examples",
            regime.as_str(),
            g_r.total_triples(),
            s_r.len()
        );
    }
    Ok(())
}

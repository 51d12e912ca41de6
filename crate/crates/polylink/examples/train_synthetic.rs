//! Train the product of experts on a small synthetic dataset.
//!
//! Training minimizes a sampled-softmax loss: each train-split positive is
//! scored against corruptions that replace one drug endpoint, validation AuPR
//! drives early stopping, and a fixed seed reproduces the run bitwise.

use polylink::dataset::{self, training_graph, SplitSpec};
use polylink::features::enumerate_templates;
use polylink::ingest::{ingest_dataset, IngestSchema};
use polylink::kg::EntityId;
use polylink::model::Mode;
use polylink::synth::{synthetic_paths, write_synthetic_dataset, SynthConfig};
use polylink::trainer::{render_log, train, TrainConfig};

fn main() -> polylink::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let paths = synthetic_paths(dir.path());
    let synth = SynthConfig { n_drugs: 60, n_side_effects: 10, seed: 21, ..SynthConfig::default() };
    write_synthetic_dataset(&paths, &synth)?;
    let (g, _) = ingest_dataset(&paths, &IngestSchema::default())?;

    let mut examples = dataset::positives(&g);
    examples.extend(dataset::sample_negatives(&g, 21)?);
    let splits =
        dataset::stratified_split(&examples, &SplitSpec { seed: 21, ..SplitSpec::default() })?;

    // the model may only see train-split positives
    let g_train = training_graph(&g, &splits.train);
    let pairs: Vec<(EntityId, EntityId)> = splits
        .train
        .iter()
        .filter(|e| e.label == dataset::Label::Positive)
        .map(|e| (e.drug_a, e.drug_b))
        .collect();
    let space = enumerate_templates(&g_train, &pairs, 5)?;
    println!("feature space: {} templates", space.len());

    let cfg = TrainConfig {
        dim: 12,
        max_epochs: 8,
        patience: 3,
        seed: 21,
        mode: Mode::Combined,
        ..TrainConfig::default()
    };
    let mut log = Vec::new();
    let params = train(&g_train, &splits, &space, &cfg, &mut log)?;

    println!("\n{}", render_log(&log, false).trim_end());
    println!(
        "\ntrained {} drug embeddings of dimension {}, {} relation weight rows",
        params.n_entities(),
        params.dim,
        params.n_relations()
    );
    Ok(())
}

//! The seven experiment commands. Each one rebuilds state from the source
//! files (the graph is never persisted), writes its artifacts plus a manifest
//! of config and input hashes under `out_dir`, and is byte-deterministic for
//! a fixed config in deterministic mode.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SupportCounting};
use crate::dataset::{
    self, apply_regime, read_splits, training_graph, write_splits, SplitManifest, Splits,
};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::explain::{attribute, default_candidates, explanation_block, rank_candidates};
use crate::features::{
    enumerate_templates, write_feature_manifest, PairFeaturizer, RelationalFeatureSpace,
};
use crate::ingest::{ingest_dataset, stats_report, GraphStats, PUBLISHED_STATS};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph};
use crate::model::{
    baseline_featurize, load_checkpoint, poe_logit, save_checkpoint, BaselineParams,
    BaselineVocab, Mode, ModelParams,
};
use crate::trainer::{render_log, train, train_baseline, EpochLog};

pub const STATS_FILE: &str = "stats.txt";
pub const SPLITS_FILE: &str = "splits.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.txt";
pub const BASELINE_FILE: &str = "baseline.json";
pub const BASELINE_LOG_FILE: &str = "baseline_log.txt";
pub const EVAL_REPORT_FILE: &str = "eval_report.txt";
pub const EVAL_SUMMARY_FILE: &str = "eval_summary.json";
pub const BASELINE_REPORT_FILE: &str = "baseline_report.txt";
pub const EXPLANATION_FILE: &str = "explanation.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective.toml";

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Joint hash of the four source files, in ingest order.
fn dataset_hash(cfg: &RunConfig) -> Result<String> {
    let p = cfg.ingest_paths();
    let mut h = Sha256::new();
    for path in [&p.ppi, &p.targets, &p.combo, &p.mono] {
        h.update(sha256_file(path)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write_text(&cfg.out_dir.join(EFFECTIVE_CONFIG_FILE), &cfg.render())
}

/// `manifest_<command>.json`: config hash, input hashes, output names. No
/// timestamps, so identical runs write identical manifests.
fn write_manifest(
    cfg: &RunConfig,
    command: &str,
    inputs: &[&Path],
    outputs: &[&str],
) -> Result<()> {
    let mut input_hashes = BTreeMap::new();
    for p in inputs {
        input_hashes.insert(p.display().to_string(), sha256_file(p)?);
    }
    let manifest = serde_json::json!({
        "command": command,
        "config_hash": cfg.hash(),
        "inputs": input_hashes,
        "outputs": outputs,
    });
    let path = cfg.out_dir.join(format!("manifest_{command}.json"));
    write_text(&path, &format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap()))
}

fn load_graph(cfg: &RunConfig) -> Result<(KnowledgeGraph, GraphStats)> {
    ingest_dataset(&cfg.ingest_paths(), &cfg.ingest_schema())
}

fn input_paths(cfg: &RunConfig) -> [PathBuf; 4] {
    let p = cfg.ingest_paths();
    [p.ppi, p.targets, p.combo, p.mono]
}

/// Parse the sources and report each statistic against the published counts.
/// Mismatches are reported, never corrected.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(cfg)?;
    let (_, stats) = load_graph(cfg)?;
    let report = stats_report(&stats, &PUBLISHED_STATS);
    write_text(&cfg.out_dir.join(STATS_FILE), &report)?;
    let inputs = input_paths(cfg);
    write_manifest(cfg, "ingest", &inputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(), &[STATS_FILE])?;
    Ok(report)
}

/// Build positive + sampled-negative examples and the stratified split file.
/// Splits are regime-independent; regimes filter them downstream.
pub fn cmd_split(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_out_dir(cfg)?;
    let (g, _) = load_graph(cfg)?;
    let mut examples = dataset::positives(&g);
    examples.extend(dataset::sample_negatives(&g, cfg.seed)?);
    let splits = dataset::stratified_split(&examples, &cfg.split_spec())?;
    let manifest = SplitManifest {
        dataset_hash: dataset_hash(cfg)?,
        seed: cfg.seed,
        fractions: (cfg.train_fraction, cfg.valid_fraction, cfg.test_fraction),
    };
    let path = cfg.out_dir.join(SPLITS_FILE);
    write_splits(&path, &g, &splits, &manifest)?;
    let inputs = input_paths(cfg);
    write_manifest(cfg, "split", &inputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(), &[SPLITS_FILE])?;
    Ok(path)
}

/// Read the split file back, refusing one built from different inputs.
fn load_splits(cfg: &RunConfig, g: &KnowledgeGraph) -> Result<Splits> {
    let path = cfg.out_dir.join(SPLITS_FILE);
    if !path.exists() {
        return Err(Error::MissingArtifact { artifact: path, produced_by: "split".into() });
    }
    let (splits, manifest) = read_splits(&path, g)?;
    if manifest.dataset_hash != dataset_hash(cfg)? {
        return Err(Error::Config(format!(
            "{} was built from different inputs; re-run split",
            path.display()
        )));
    }
    Ok(splits)
}

/// Pairs over which template support is counted.
fn support_pairs(
    cfg: &RunConfig,
    g: &KnowledgeGraph,
    splits: &Splits,
) -> Vec<(EntityId, EntityId)> {
    match cfg.support_counting() {
        SupportCounting::TrainPositives => splits
            .train
            .iter()
            .filter(|e| e.label == dataset::Label::Positive)
            .map(|e| (e.drug_a, e.drug_b))
            .collect(),
        SupportCounting::AllPairs => {
            let drugs = g.entities_of_kind(EntityKind::Drug);
            let mut out = Vec::new();
            for i in 0..drugs.len() {
                for j in (i + 1)..drugs.len() {
                    out.push((drugs[i], drugs[j]));
                }
            }
            out
        }
    }
}

/// The regime graph, its splits, the training graph, and the relational
/// feature space — the state every downstream command needs.
struct Prepared {
    g_train: KnowledgeGraph,
    splits: Splits,
    space: RelationalFeatureSpace,
}

fn prepare(cfg: &RunConfig, g_full: &KnowledgeGraph) -> Result<Prepared> {
    let splits_full = load_splits(cfg, g_full)?;
    let (g_regime, splits) = apply_regime(g_full, &splits_full, cfg.regime());
    let g_train = training_graph(&g_regime, &splits.train);
    let pairs = support_pairs(cfg, &g_regime, &splits);
    let space = enumerate_templates(&g_train, &pairs, cfg.min_support)?;
    Ok(Prepared { g_train, splits, space })
}

/// Enumerate and prune relational feature templates; write the manifest.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_out_dir(cfg)?;
    let (g_full, _) = load_graph(cfg)?;
    let prepared = prepare(cfg, &g_full)?;
    let path = cfg.out_dir.join(FEATURES_FILE);
    write_feature_manifest(&path, &prepared.space, &prepared.g_train)?;
    let inputs = input_paths(cfg);
    let mut all_inputs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let splits_path = cfg.out_dir.join(SPLITS_FILE);
    all_inputs.push(&splits_path);
    write_manifest(cfg, "featurize", &all_inputs, &[FEATURES_FILE])?;
    Ok(path)
}

/// The feature space a model of this config trains/evaluates against:
/// Combined mode uses the enumerated space (whose manifest artifact must
/// exist and match), EmbeddingOnly an empty one.
fn model_space(cfg: &RunConfig, prepared: &Prepared) -> Result<RelationalFeatureSpace> {
    match cfg.mode() {
        Mode::EmbeddingOnly => Ok(RelationalFeatureSpace::empty()),
        Mode::Combined => {
            let path = cfg.out_dir.join(FEATURES_FILE);
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    artifact: path,
                    produced_by: "featurize".into(),
                });
            }
            let file_hash: [u8; 32] =
                Sha256::digest(std::fs::read(&path).map_err(|e| Error::io(&path, e))?).into();
            if file_hash != prepared.space.content_hash(&prepared.g_train) {
                return Err(Error::Config(format!(
                    "{} is stale for this config; re-run featurize",
                    path.display()
                )));
            }
            Ok(prepared.space.clone())
        }
    }
}

fn baseline_to_json(g: &KnowledgeGraph, bp: &BaselineParams) -> String {
    let relations: Vec<String> = bp
        .relation_ids()
        .iter()
        .map(|&r| {
            g.relation_key(crate::kg::RelationId {
                index: r,
                kind: crate::kg::RelationKind::PolypharmacySideEffect,
            })
            .to_string()
        })
        .collect();
    let value = serde_json::json!({
        "dim": bp.dim,
        "relations": relations,
        "weights": bp.weights,
        "bias": bp.bias,
    });
    serde_json::to_string(&value).unwrap()
}

fn baseline_from_json(
    g: &KnowledgeGraph,
    vocab: &BaselineVocab,
    text: &str,
) -> Result<BaselineParams> {
    #[derive(serde::Deserialize)]
    struct Stored {
        dim: usize,
        relations: Vec<String>,
        weights: Vec<f64>,
        bias: Vec<f64>,
    }
    let stored: Stored =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("baseline: {e}")))?;
    let mut bp = BaselineParams::init(g, vocab);
    if stored.dim != bp.dim {
        return Err(Error::Checkpoint(format!(
            "baseline dimension {} does not match vocabulary dimension {}",
            stored.dim, bp.dim
        )));
    }
    let expected: Vec<String> = bp
        .relation_ids()
        .iter()
        .map(|&r| {
            g.relation_key(crate::kg::RelationId {
                index: r,
                kind: crate::kg::RelationKind::PolypharmacySideEffect,
            })
            .to_string()
        })
        .collect();
    if stored.relations != expected {
        return Err(Error::Checkpoint("baseline relation order mismatch".into()));
    }
    if stored.weights.len() != bp.weights.len() || stored.bias.len() != bp.bias.len() {
        return Err(Error::Checkpoint("baseline parameter count mismatch".into()));
    }
    if stored.weights.iter().chain(stored.bias.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint("baseline contains non-finite values".into()));
    }
    bp.weights = stored.weights;
    bp.bias = stored.bias;
    Ok(bp)
}

/// Train the configured model; write the checkpoint and epoch log (and the
/// baseline artifacts when enabled).
pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_out_dir(cfg)?;
    let (g_full, _) = load_graph(cfg)?;
    let prepared = prepare(cfg, &g_full)?;
    let space = model_space(cfg, &prepared)?;

    let mut log: Vec<EpochLog> = Vec::new();
    let outcome = train(&prepared.g_train, &prepared.splits, &space, &cfg.train_config(), &mut log);
    // the log is written even when training aborts on divergence
    write_text(
        &cfg.out_dir.join(TRAIN_LOG_FILE),
        &render_log(&log, cfg.deterministic),
    )?;
    let params = outcome?;
    let ckpt = cfg.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, &params)?;

    let mut outputs = vec![CHECKPOINT_FILE, TRAIN_LOG_FILE];
    if cfg.include_baseline {
        let mut blog: Vec<EpochLog> = Vec::new();
        let result = train_baseline(&prepared.g_train, &prepared.splits, &cfg.train_config(), &mut blog);
        write_text(&cfg.out_dir.join(BASELINE_LOG_FILE), &render_log(&blog, cfg.deterministic))?;
        let (bp, _) = result?;
        write_text(&cfg.out_dir.join(BASELINE_FILE), &baseline_to_json(&prepared.g_train, &bp))?;
        outputs.push(BASELINE_FILE);
        outputs.push(BASELINE_LOG_FILE);
    }

    let inputs = input_paths(cfg);
    let mut all_inputs: Vec<PathBuf> = inputs.to_vec();
    all_inputs.push(cfg.out_dir.join(SPLITS_FILE));
    if cfg.mode() == Mode::Combined {
        all_inputs.push(cfg.out_dir.join(FEATURES_FILE));
    }
    write_manifest(
        cfg,
        "train",
        &all_inputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
        &outputs,
    )?;
    Ok(ckpt)
}

fn load_model(cfg: &RunConfig, prepared: &Prepared) -> Result<(ModelParams, RelationalFeatureSpace)> {
    let ckpt = cfg.out_dir.join(CHECKPOINT_FILE);
    if !ckpt.exists() {
        return Err(Error::MissingArtifact { artifact: ckpt, produced_by: "train".into() });
    }
    let space = model_space(cfg, prepared)?;
    let expected = space.content_hash(&prepared.g_train);
    let params = load_checkpoint(&ckpt, Some(&expected))?;
    Ok((params, space))
}

fn eval_report_for(
    cfg: &RunConfig,
    prepared: &Prepared,
    params: &ModelParams,
    space: &RelationalFeatureSpace,
) -> Result<EvalReport> {
    let featurizer = PairFeaturizer::new(space, &prepared.g_train);
    let mode = cfg.mode();
    eval::evaluate(
        |e| poe_logit(params, &featurizer, e.drug_a, e.side_effect, e.drug_b, mode),
        &prepared.splits.test,
        cfg.ap_k,
    )
}

/// Score the test split with the trained checkpoint; write the per-side-
/// effect report and the JSON summary.
pub fn cmd_eval(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(cfg)?;
    let (g_full, _) = load_graph(cfg)?;
    let prepared = prepare(cfg, &g_full)?;
    let (params, space) = load_model(cfg, &prepared)?;
    let report = eval_report_for(cfg, &prepared, &params, &space)?;
    let text = eval::render_report(&report, &prepared.g_train);
    write_text(&cfg.out_dir.join(EVAL_REPORT_FILE), &text)?;
    write_text(
        &cfg.out_dir.join(EVAL_SUMMARY_FILE),
        &format!("{}\n", eval::summary_json(&report)),
    )?;
    let mut outputs = vec![EVAL_REPORT_FILE, EVAL_SUMMARY_FILE];

    let baseline_path = cfg.out_dir.join(BASELINE_FILE);
    if cfg.include_baseline && baseline_path.exists() {
        let vocab = BaselineVocab::from_graph(&prepared.g_train);
        let text = std::fs::read_to_string(&baseline_path)
            .map_err(|e| Error::io(&baseline_path, e))?;
        let bp = baseline_from_json(&prepared.g_train, &vocab, &text)?;
        let report = eval::evaluate(
            |e| {
                let x = baseline_featurize(&prepared.g_train, &vocab, e.drug_a, e.drug_b);
                bp.score(&x, e.side_effect)
            },
            &prepared.splits.test,
            cfg.ap_k,
        )?;
        write_text(
            &cfg.out_dir.join(BASELINE_REPORT_FILE),
            &eval::render_report(&report, &prepared.g_train),
        )?;
        outputs.push(BASELINE_REPORT_FILE);
    }

    let inputs = input_paths(cfg);
    let mut all_inputs: Vec<PathBuf> = inputs.to_vec();
    all_inputs.push(cfg.out_dir.join(SPLITS_FILE));
    all_inputs.push(cfg.out_dir.join(CHECKPOINT_FILE));
    if cfg.mode() == Mode::Combined {
        all_inputs.push(cfg.out_dir.join(FEATURES_FILE));
    }
    write_manifest(
        cfg,
        "eval",
        &all_inputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
        &outputs,
    )?;
    Ok(text)
}

/// Rank a queried pair for a side effect under both modes and attribute the
/// combined logit to its active features.
pub fn cmd_explain(
    cfg: &RunConfig,
    drug_a_key: &str,
    drug_b_key: &str,
    side_effect_key: &str,
) -> Result<String> {
    ensure_out_dir(cfg)?;
    let (g_full, _) = load_graph(cfg)?;
    let prepared = prepare(cfg, &g_full)?;
    if cfg.mode() != Mode::Combined {
        return Err(Error::Config("explain requires mode = \"combined\"".into()));
    }
    let (params, space) = load_model(cfg, &prepared)?;
    let g = &prepared.g_train;
    let a = g
        .entity_id(drug_a_key)
        .ok_or_else(|| Error::UnknownEntity(drug_a_key.to_string()))?;
    let b = g
        .entity_id(drug_b_key)
        .ok_or_else(|| Error::UnknownEntity(drug_b_key.to_string()))?;
    let r = g
        .relation_id(side_effect_key)
        .ok_or_else(|| Error::UnknownRelation(side_effect_key.to_string()))?;

    let candidates = default_candidates(g, &prepared.splits, r);
    let featurizer = PairFeaturizer::new(&space, g);
    let ranking_e = rank_candidates(&params, &featurizer, r, &candidates, Mode::EmbeddingOnly)?;
    let ranking_c = rank_candidates(&params, &featurizer, r, &candidates, Mode::Combined)?;
    let att = attribute(&params, &space, g, a, b, r)?;
    let block = explanation_block(g, &space, &ranking_e, &ranking_c, &att, cfg.explain_top_n)?;
    write_text(&cfg.out_dir.join(EXPLANATION_FILE), &block)?;

    let inputs = input_paths(cfg);
    let mut all_inputs: Vec<PathBuf> = inputs.to_vec();
    all_inputs.push(cfg.out_dir.join(SPLITS_FILE));
    all_inputs.push(cfg.out_dir.join(CHECKPOINT_FILE));
    all_inputs.push(cfg.out_dir.join(FEATURES_FILE));
    write_manifest(
        cfg,
        "explain",
        &all_inputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
        &[EXPLANATION_FILE],
    )?;
    Ok(block)
}

/// One summary line per (regime, model).
fn summary_line(regime: &str, model: &str, report: &EvalReport) -> String {
    format!(
        "{regime} {model} {:.6} {:.6} {:.6}\n",
        report.aggregate.0, report.aggregate.1, report.aggregate.2
    )
}

/// Run split → featurize → train → eval for every regime and both modes,
/// each in its own subdirectory, and write a combined summary. Composes the
/// single commands, so artifacts match running them by hand.
pub fn cmd_reproduce(cfg: &RunConfig) -> Result<String> {
    ensure_out_dir(cfg)?;
    let mut summary = String::from("regime model auroc aupr ap_k\n");
    for regime in ["full", "drug_drug_only", "targeted_drugs_only"] {
        for mode in ["embedding_only", "combined"] {
            let mut sub = cfg.clone();
            sub.regime = regime.to_string();
            sub.mode = mode.to_string();
            sub.out_dir = cfg.out_dir.join(format!("{regime}_{mode}"));
            // the baseline is mode-independent; train it once per regime
            sub.include_baseline = cfg.include_baseline && mode == "combined";
            cmd_split(&sub)?;
            cmd_featurize(&sub)?;
            cmd_train(&sub)?;
            cmd_eval(&sub)?;

            let (g_full, _) = load_graph(&sub)?;
            let prepared = prepare(&sub, &g_full)?;
            let (params, space) = load_model(&sub, &prepared)?;
            let report = eval_report_for(&sub, &prepared, &params, &space)?;
            summary.push_str(&summary_line(regime, mode, &report));
            if sub.include_baseline {
                let vocab = BaselineVocab::from_graph(&prepared.g_train);
                let text = std::fs::read_to_string(sub.out_dir.join(BASELINE_FILE))
                    .map_err(|e| Error::io(&sub.out_dir.join(BASELINE_FILE), e))?;
                let bp = baseline_from_json(&prepared.g_train, &vocab, &text)?;
                let report = eval::evaluate(
                    |e| {
                        let x =
                            baseline_featurize(&prepared.g_train, &vocab, e.drug_a, e.drug_b);
                        bp.score(&x, e.side_effect)
                    },
                    &prepared.splits.test,
                    sub.ap_k,
                )?;
                summary.push_str(&summary_line(regime, "baseline", &report));
            }
        }
    }
    write_text(&cfg.out_dir.join(SUMMARY_FILE), &summary)?;
    let inputs = input_paths(cfg);
    write_manifest(
        cfg,
        "reproduce",
        &inputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
        &[SUMMARY_FILE],
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthetic_paths, write_synthetic_dataset, SynthConfig};

    /// Small synthetic dataset + config pointing at a temp workspace.
    fn workspace() -> (tempfile::TempDir, RunConfig) {
        let dir = tempfile::tempdir().unwrap();
        let data_dir = dir.path().join("data");
        let paths = synthetic_paths(&data_dir);
        let synth = SynthConfig {
            n_drugs: 30,
            n_proteins: 40,
            n_side_effects: 6,
            background_ppi: 15,
            mono_vocab: 10,
            seed: 11,
            ..SynthConfig::default()
        };
        write_synthetic_dataset(&paths, &synth).unwrap();
        let cfg = RunConfig {
            ppi_file: paths.ppi,
            targets_file: paths.targets,
            combo_file: paths.combo,
            mono_file: paths.mono,
            out_dir: dir.path().join("out"),
            dim: 6,
            max_epochs: 2,
            min_support: 2,
            seed: 11,
            deterministic: true,
            ..RunConfig::default()
        };
        cfg.validate().unwrap();
        (dir, cfg)
    }

    #[test]
    fn ingest_writes_stats_and_manifest() {
        let (_dir, cfg) = workspace();
        let report = cmd_ingest(&cfg).unwrap();
        assert_eq!(report.lines().count(), 8);
        assert!(report.lines().any(|l| l.starts_with("drugs 645 30")));
        assert!(cfg.out_dir.join(STATS_FILE).exists());
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(cfg.out_dir.join("manifest_ingest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest["command"], "ingest");
        assert_eq!(manifest["config_hash"], cfg.hash());
        assert_eq!(manifest["inputs"].as_object().unwrap().len(), 4);
    }

    #[test]
    fn artifacts_are_ordered_and_stale_checked() {
        let (_dir, cfg) = workspace();
        // featurize before split: missing artifact names the producer
        let err = cmd_featurize(&cfg).unwrap_err();
        match err {
            Error::MissingArtifact { produced_by, .. } => assert_eq!(produced_by, "split"),
            other => panic!("expected MissingArtifact, got {other}"),
        }
        cmd_split(&cfg).unwrap();
        // train in combined mode needs the feature manifest
        let err = cmd_train(&cfg).unwrap_err();
        match err {
            Error::MissingArtifact { produced_by, .. } => assert_eq!(produced_by, "featurize"),
            other => panic!("expected MissingArtifact, got {other}"),
        }
        cmd_featurize(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        // a different min_support invalidates the manifest
        let mut stale = cfg.clone();
        stale.min_support = 3;
        let err = stale.validate().and_then(|_| cmd_train(&stale)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn full_pipeline_runs_and_is_deterministic() {
        let (_dir, cfg) = workspace();
        cmd_split(&cfg).unwrap();
        cmd_featurize(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        let report = cmd_eval(&cfg).unwrap();
        assert!(report.contains("aggregate "));
        assert!(report.contains("pooled "));

        let read = |name: &str| std::fs::read(cfg.out_dir.join(name)).unwrap();
        let first: Vec<Vec<u8>> = [
            SPLITS_FILE,
            FEATURES_FILE,
            CHECKPOINT_FILE,
            TRAIN_LOG_FILE,
            EVAL_REPORT_FILE,
            EVAL_SUMMARY_FILE,
        ]
        .iter()
        .map(|n| read(n))
        .collect();

        cmd_split(&cfg).unwrap();
        cmd_featurize(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        cmd_eval(&cfg).unwrap();
        let second: Vec<Vec<u8>> = [
            SPLITS_FILE,
            FEATURES_FILE,
            CHECKPOINT_FILE,
            TRAIN_LOG_FILE,
            EVAL_REPORT_FILE,
            EVAL_SUMMARY_FILE,
        ]
        .iter()
        .map(|n| read(n))
        .collect();
        assert_eq!(first, second, "deterministic rerun must be byte-identical");
    }

    #[test]
    fn explain_produces_a_block_for_a_candidate_pair() {
        let (_dir, mut cfg) = workspace();
        cfg.explain_top_n = 3;
        cmd_split(&cfg).unwrap();
        cmd_featurize(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        // pick a pair that is not positive anywhere: D0000 with the last drug
        // is unlikely to be positive; search the splits to be sure
        let (g, _) = load_graph(&cfg).unwrap();
        let prepared = prepare(&cfg, &g).unwrap();
        let cands = default_candidates(&prepared.g_train, &prepared.splits,
            prepared.g_train.relations_of_kind(crate::kg::RelationKind::PolypharmacySideEffect)[0]);
        let (a, b) = cands[0];
        let se = prepared.g_train.relations_of_kind(crate::kg::RelationKind::PolypharmacySideEffect)[0];
        let block = cmd_explain(
            &cfg,
            prepared.g_train.entity_key(a),
            prepared.g_train.entity_key(b),
            prepared.g_train.relation_key(se),
        )
        .unwrap();
        assert!(block.contains("embedding_only: logit"));
        assert!(block.contains("combined: logit"));
        assert!(cfg.out_dir.join(EXPLANATION_FILE).exists());
    }

    #[test]
    fn eval_reports_baseline_when_enabled() {
        let (_dir, mut cfg) = workspace();
        cfg.include_baseline = true;
        cmd_split(&cfg).unwrap();
        cmd_featurize(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        assert!(cfg.out_dir.join(BASELINE_FILE).exists());
        cmd_eval(&cfg).unwrap();
        assert!(cfg.out_dir.join(BASELINE_REPORT_FILE).exists());
    }

    #[test]
    fn reproduce_composes_the_pipeline() {
        let (_dir, mut cfg) = workspace();
        cfg.max_epochs = 1;
        let summary = cmd_reproduce(&cfg).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], "regime model auroc aupr ap_k");
        assert_eq!(lines.len(), 1 + 6, "3 regimes x 2 modes");
        for regime in ["full", "drug_drug_only", "targeted_drugs_only"] {
            for mode in ["embedding_only", "combined"] {
                assert!(lines.iter().any(|l| l.starts_with(&format!("{regime} {mode} "))));
                let sub = cfg.out_dir.join(format!("{regime}_{mode}"));
                assert!(sub.join(CHECKPOINT_FILE).exists());
                assert!(sub.join(EVAL_SUMMARY_FILE).exists());
            }
        }
        // composition: manual sequence into the same subdirectory layout is
        // byte-identical
        let mut manual = cfg.clone();
        manual.regime = "full".into();
        manual.mode = "combined".into();
        manual.out_dir = cfg.out_dir.join("full_combined_manual");
        cmd_split(&manual).unwrap();
        cmd_featurize(&manual).unwrap();
        cmd_train(&manual).unwrap();
        cmd_eval(&manual).unwrap();
        for name in [SPLITS_FILE, FEATURES_FILE, CHECKPOINT_FILE, EVAL_REPORT_FILE] {
            let auto = std::fs::read(cfg.out_dir.join("full_combined").join(name)).unwrap();
            let hand = std::fs::read(manual.out_dir.join(name)).unwrap();
            assert_eq!(auto, hand, "{name} differs between reproduce and manual run");
        }
    }
}

//! Synthetic dataset generator with planted relational rules. Each side
//! effect gets its own disjoint pair of "hub" proteins, and drug pairs whose
//! targets bridge that hub pair are planted as positives; a low embedding
//! dimension cannot absorb that many disjoint bicliques, so the relational
//! expert has something real to add. Output is the standard four-file format,
//! byte-identical for a fixed config.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::IngestPaths;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub n_drugs: usize,
    pub n_proteins: usize,
    pub n_side_effects: usize,
    /// hub proteins targeted per drug (hubs = 2 × n_side_effects)
    pub hub_targets_per_drug: usize,
    /// additional non-hub targets per drug
    pub background_targets_per_drug: usize,
    /// probability a rule-matching pair becomes a positive
    pub plant_prob: f64,
    /// noise positives as a fraction of planted positives
    pub noise_fraction: f64,
    /// random PPI edges among non-hub proteins
    pub background_ppi: usize,
    pub mono_vocab: usize,
    pub mono_per_drug: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_drugs: 200,
            n_proteins: 300,
            n_side_effects: 40,
            hub_targets_per_drug: 3,
            background_targets_per_drug: 1,
            plant_prob: 0.9,
            noise_fraction: 0.15,
            background_ppi: 150,
            mono_vocab: 30,
            mono_per_drug: 2,
            seed: 17,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let hubs = 2 * self.n_side_effects;
        if self.n_proteins < hubs + self.background_targets_per_drug {
            return Err(Error::Config(format!(
                "n_proteins {} too small for {} hubs plus background targets",
                self.n_proteins, hubs
            )));
        }
        if self.hub_targets_per_drug > hubs {
            return Err(Error::Config("hub_targets_per_drug exceeds hub count".into()));
        }
        if self.mono_per_drug > self.mono_vocab {
            return Err(Error::Config("mono_per_drug exceeds mono_vocab".into()));
        }
        if self.n_drugs < 2 || self.n_side_effects == 0 {
            return Err(Error::Config("need at least 2 drugs and 1 side effect".into()));
        }
        if !(0.0..=1.0).contains(&self.plant_prob) || self.noise_fraction < 0.0 {
            return Err(Error::Config("plant_prob in [0,1], noise_fraction >= 0".into()));
        }
        Ok(())
    }
}

fn drug_key(i: usize) -> String {
    format!("D{i:04}")
}

fn protein_key(i: usize) -> String {
    format!("P{i:04}")
}

fn effect_key(i: usize) -> String {
    format!("SE{i:03}")
}

struct Generated {
    /// per drug, sorted distinct protein indices
    targets: Vec<Vec<usize>>,
    /// symmetric edges (p < q), hub pairs first
    ppi: Vec<(usize, usize)>,
    /// (drug_a, drug_b, effect) with a < b
    combos: Vec<(usize, usize, usize)>,
    /// per drug, sorted distinct mono indices
    mono: Vec<Vec<usize>>,
}

fn generate(cfg: &SynthConfig) -> Generated {
    let hubs = 2 * cfg.n_side_effects;

    // hub pair for effect i is (2i, 2i+1); drugs draw hub targets uniformly
    let mut rng = stream(cfg.seed, Stream::Synthetic(0));
    let hub_ids: Vec<usize> = (0..hubs).collect();
    let background_ids: Vec<usize> = (hubs..cfg.n_proteins).collect();
    let mut targets = Vec::with_capacity(cfg.n_drugs);
    for _ in 0..cfg.n_drugs {
        let mut t: Vec<usize> = hub_ids
            .choose_multiple(&mut rng, cfg.hub_targets_per_drug)
            .copied()
            .collect();
        t.extend(
            background_ids
                .choose_multiple(&mut rng, cfg.background_targets_per_drug)
                .copied(),
        );
        t.sort_unstable();
        targets.push(t);
    }

    // PPI: every causal hub pair, plus random background edges
    let mut ppi: BTreeSet<(usize, usize)> =
        (0..cfg.n_side_effects).map(|i| (2 * i, 2 * i + 1)).collect();
    let mut rng = stream(cfg.seed, Stream::Synthetic(1));
    if background_ids.len() >= 2 {
        let mut added = 0;
        while added < cfg.background_ppi {
            let p = *background_ids.choose(&mut rng).unwrap();
            let q = *background_ids.choose(&mut rng).unwrap();
            if p == q {
                continue;
            }
            if ppi.insert((p.min(q), p.max(q))) {
                added += 1;
            }
        }
    }

    // planted positives: pair matches effect i iff one drug targets hub 2i
    // and the other targets hub 2i+1
    let mut rng = stream(cfg.seed, Stream::Synthetic(2));
    let mut combos: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let has = |d: usize, p: usize| targets[d].binary_search(&p).is_ok();
    for e in 0..cfg.n_side_effects {
        let (p, q) = (2 * e, 2 * e + 1);
        for a in 0..cfg.n_drugs {
            for b in (a + 1)..cfg.n_drugs {
                let matches = (has(a, p) && has(b, q)) || (has(a, q) && has(b, p));
                if matches && rng.gen_bool(cfg.plant_prob) {
                    combos.insert((a, b, e));
                }
            }
        }
    }

    // noise positives on non-matching pairs
    let n_noise = (combos.len() as f64 * cfg.noise_fraction).round() as usize;
    let mut rng = stream(cfg.seed, Stream::Synthetic(3));
    let mut added = 0;
    let mut attempts = 0;
    while added < n_noise && attempts < 100 * n_noise.max(1) {
        attempts += 1;
        let a = rng.gen_range(0..cfg.n_drugs);
        let b = rng.gen_range(0..cfg.n_drugs);
        if a == b {
            continue;
        }
        let (a, b) = (a.min(b), a.max(b));
        let e = rng.gen_range(0..cfg.n_side_effects);
        let (p, q) = (2 * e, 2 * e + 1);
        if (has(a, p) && has(b, q)) || (has(a, q) && has(b, p)) {
            continue;
        }
        if combos.insert((a, b, e)) {
            added += 1;
        }
    }

    let mut rng = stream(cfg.seed, Stream::Synthetic(4));
    let mono_ids: Vec<usize> = (0..cfg.mono_vocab).collect();
    let mono = (0..cfg.n_drugs)
        .map(|_| {
            let mut m: Vec<usize> =
                mono_ids.choose_multiple(&mut rng, cfg.mono_per_drug).copied().collect();
            m.sort_unstable();
            m
        })
        .collect();

    Generated { targets, ppi: ppi.into_iter().collect(), combos: combos.into_iter().collect(), mono }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    };
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Conventional file layout for a generated dataset directory.
pub fn synthetic_paths(dir: &Path) -> IngestPaths {
    IngestPaths {
        ppi: dir.join("ppi.csv"),
        targets: dir.join("targets.csv"),
        combo: dir.join("combo.csv"),
        mono: dir.join("mono.csv"),
    }
}

/// Generate the dataset and write the four input files at the given paths.
pub fn write_synthetic_dataset(paths: &IngestPaths, cfg: &SynthConfig) -> Result<()> {
    cfg.validate()?;
    for p in [&paths.ppi, &paths.targets, &paths.combo, &paths.mono] {
        if let Some(parent) = p.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
    }
    let data = generate(cfg);

    write_csv(
        &paths.ppi,
        &["Gene 1", "Gene 2"],
        data.ppi.iter().map(|&(p, q)| vec![protein_key(p), protein_key(q)]),
    )?;
    write_csv(
        &paths.targets,
        &["STITCH", "Gene"],
        data.targets.iter().enumerate().flat_map(|(d, ts)| {
            ts.iter().map(move |&p| vec![drug_key(d), protein_key(p)]).collect::<Vec<_>>()
        }),
    )?;
    write_csv(
        &paths.combo,
        &["STITCH 1", "STITCH 2", "Polypharmacy Side Effect", "Side Effect Name"],
        data.combos.iter().map(|&(a, b, e)| {
            vec![drug_key(a), drug_key(b), effect_key(e), format!("synthetic effect {e}")]
        }),
    )?;
    write_csv(
        &paths.mono,
        &["STITCH", "Individual Side Effect", "Side Effect Name"],
        data.mono.iter().enumerate().flat_map(|(d, ms)| {
            ms.iter()
                .map(move |&m| {
                    vec![drug_key(d), format!("M{m:03}"), format!("mono effect {m}")]
                })
                .collect::<Vec<_>>()
        }),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ingest_dataset, IngestSchema};
    use sha2::{Digest, Sha256};

    fn small() -> SynthConfig {
        SynthConfig {
            n_drugs: 40,
            n_proteins: 60,
            n_side_effects: 8,
            background_ppi: 20,
            seed: 5,
            ..SynthConfig::default()
        }
    }

    fn file_hash(p: &Path) -> [u8; 32] {
        let bytes = std::fs::read(p).unwrap();
        Sha256::digest(bytes).into()
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let p1 = synthetic_paths(d1.path());
        let p2 = synthetic_paths(d2.path());
        write_synthetic_dataset(&p1, &small()).unwrap();
        write_synthetic_dataset(&p2, &small()).unwrap();
        for (a, b) in [
            (&p1.ppi, &p2.ppi),
            (&p1.targets, &p2.targets),
            (&p1.combo, &p2.combo),
            (&p1.mono, &p2.mono),
        ] {
            assert_eq!(file_hash(a), file_hash(b));
        }
    }

    #[test]
    fn output_ingests_cleanly_with_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let paths = synthetic_paths(dir.path());
        write_synthetic_dataset(&paths, &cfg).unwrap();
        let (g, stats) = ingest_dataset(&paths, &IngestSchema::default()).unwrap();
        assert_eq!(stats.n_drugs, cfg.n_drugs);
        assert!(stats.n_distinct_mono <= cfg.mono_vocab);
        assert_eq!(stats.n_drug_target, cfg.n_drugs * 4); // 3 hubs + 1 background each
        assert!(stats.n_distinct_poly <= cfg.n_side_effects);
        assert!(stats.n_drug_drug > 0);
        // hub PPI edges present: effect 0's pair is P0000–P0001
        let p0 = g.entity_id("P0000").unwrap();
        let p1 = g.entity_id("P0001").unwrap();
        let iw = g.relation_id(crate::ingest::INTERACTS_WITH_KEY).unwrap();
        assert!(g.neighbors(p0, iw).contains(&p1));
    }

    #[test]
    fn planted_rule_dominates_noise() {
        let cfg = SynthConfig::default();
        let data = generate(&cfg);
        let has =
            |d: usize, p: usize| data.targets[d].binary_search(&p).is_ok();
        let mut matching = 0usize;
        for &(a, b, e) in &data.combos {
            let (p, q) = (2 * e, 2 * e + 1);
            if (has(a, p) && has(b, q)) || (has(a, q) && has(b, p)) {
                matching += 1;
            }
        }
        let frac = matching as f64 / data.combos.len() as f64;
        assert!(frac > 0.75, "planted fraction {frac:.3} too low");
        assert!(frac < 1.0, "noise positives missing");
        // enough signal per effect for feature pruning to keep causal templates
        for e in 0..cfg.n_side_effects {
            let n = data.combos.iter().filter(|&&(_, _, x)| x == e).count();
            assert!(n >= 15, "effect {e} has only {n} positives");
        }
    }

    #[test]
    fn hub_pairs_are_disjoint_across_effects() {
        let cfg = SynthConfig::default();
        // construction: effect i uses proteins {2i, 2i+1}; assert the PPI
        // hub edges don't collide
        let data = generate(&cfg);
        let hub_edges: Vec<(usize, usize)> = data
            .ppi
            .iter()
            .copied()
            .filter(|&(p, q)| p < 2 * cfg.n_side_effects && q < 2 * cfg.n_side_effects)
            .collect();
        assert_eq!(hub_edges.len(), cfg.n_side_effects);
        let mut seen = BTreeSet::new();
        for (p, q) in hub_edges {
            assert!(seen.insert(p));
            assert!(seen.insert(q));
        }
    }
}

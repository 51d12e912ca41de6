//! Labeled example sets: positives from the KG, sampled negatives matched
//! per side effect, stratified splits, and the three experimental regimes.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph, RelationId, RelationKind, Triple};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

/// One labeled drug pair for one side effect. `drug_a < drug_b` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Example {
    pub drug_a: EntityId,
    pub drug_b: EntityId,
    pub side_effect: RelationId,
    pub label: Label,
}

impl Example {
    pub fn new(a: EntityId, b: EntityId, side_effect: RelationId, label: Label) -> Example {
        let (drug_a, drug_b) = if a.index <= b.index { (a, b) } else { (b, a) };
        Example { drug_a, drug_b, side_effect, label }
    }

    pub fn as_triple(&self) -> Triple {
        Triple::new(self.drug_a, self.side_effect, self.drug_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.8, valid: 0.1, test: 0.1, seed: 17 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train", self.train), ("valid", self.valid), ("test", self.test)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("split fraction {name}={f} outside (0,1)")));
            }
        }
        if ((self.train + self.valid + self.test) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Regime {
    Full,
    DrugDrugOnly,
    TargetedDrugsOnly,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::DrugDrugOnly => "drug_drug_only",
            Regime::TargetedDrugsOnly => "targeted_drugs_only",
        }
    }

    pub fn parse(s: &str) -> Result<Regime> {
        match s {
            "full" => Ok(Regime::Full),
            "drug_drug_only" => Ok(Regime::DrugDrugOnly),
            "targeted_drugs_only" => Ok(Regime::TargetedDrugsOnly),
            other => Err(Error::Config(format!(
                "unknown regime '{other}' (expected full, drug_drug_only, targeted_drugs_only)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
}

impl Splits {
    pub fn all(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(self.valid.iter()).chain(self.test.iter())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All positive examples, one per canonical polypharmacy triple, in relation
/// id order then insertion order.
pub fn positives(g: &KnowledgeGraph) -> Vec<Example> {
    let mut out = Vec::new();
    for r in g.relations_of_kind(RelationKind::PolypharmacySideEffect) {
        for t in g.triples_of(r) {
            out.push(Example::new(t.head, t.tail, r, Label::Positive));
        }
    }
    out
}

/// For every polypharmacy relation, draw exactly as many negatives as there
/// are positives: unordered drug pairs absent from the graph under that
/// relation. Deterministic per seed; each relation uses its own stream.
pub fn sample_negatives(g: &KnowledgeGraph, seed: u64) -> Result<Vec<Example>> {
    let drugs = g.entities_of_kind(EntityKind::Drug);
    let n = drugs.len();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let mut out = Vec::new();
    for r in g.relations_of_kind(RelationKind::PolypharmacySideEffect) {
        let needed = g.triple_count(r);
        let available = total_pairs - needed;
        if available < needed {
            return Err(Error::Exhausted {
                relation: g.relation_key(r).to_string(),
                needed,
                available,
            });
        }
        let mut rng = stream(seed, Stream::NegativeSampling(r.index as u64));
        if needed * 2 > available {
            // Dense relation: rejection would thrash, so enumerate the free
            // pairs and take a random subset.
            let mut free: Vec<(EntityId, EntityId)> = Vec::with_capacity(available);
            for i in 0..n {
                for j in (i + 1)..n {
                    if !g.contains(&Triple::new(drugs[i], r, drugs[j])) {
                        free.push((drugs[i], drugs[j]));
                    }
                }
            }
            let (chosen, _) = free.partial_shuffle(&mut rng, needed);
            for &(a, b) in chosen.iter() {
                out.push(Example::new(a, b, r, Label::Negative));
            }
        } else {
            let mut drawn: HashSet<(u32, u32)> = HashSet::with_capacity(needed);
            while drawn.len() < needed {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i == j {
                    continue;
                }
                let (a, b) = if drugs[i].index < drugs[j].index {
                    (drugs[i], drugs[j])
                } else {
                    (drugs[j], drugs[i])
                };
                if g.contains(&Triple::new(a, r, b)) || !drawn.insert((a.index, b.index)) {
                    continue;
                }
                out.push(Example::new(a, b, r, Label::Negative));
            }
        }
    }
    Ok(out)
}

fn stratum_key(e: &Example) -> (u32, u8) {
    (e.side_effect.index, if e.label == Label::Positive { 0 } else { 1 })
}

/// Per-(side effect, label) stratified split. valid/test sizes are floored;
/// the remainder — in particular any stratum of size one — goes to train.
pub fn stratified_split(examples: &[Example], spec: &SplitSpec) -> Result<Splits> {
    if examples.is_empty() {
        return Err(Error::Config("cannot split an empty example set".into()));
    }
    spec.validate()?;
    let mut strata: BTreeMap<(u32, u8), Vec<Example>> = BTreeMap::new();
    for e in examples {
        strata.entry(stratum_key(e)).or_default().push(*e);
    }
    let mut splits = Splits::default();
    for ((rel, label), mut members) in strata {
        let tag = (rel as u64) << 1 | label as u64;
        members.shuffle(&mut stream(spec.seed, Stream::SplitShuffle(tag)));
        let m = members.len();
        let n_valid = (m as f64 * spec.valid).floor() as usize;
        let n_test = (m as f64 * spec.test).floor() as usize;
        let n_train = m - n_valid - n_test;
        splits.train.extend_from_slice(&members[..n_train]);
        splits.valid.extend_from_slice(&members[n_train..n_train + n_valid]);
        splits.test.extend_from_slice(&members[n_train + n_valid..]);
    }
    Ok(splits)
}

/// Apply one of the three regimes to a graph and its splits.
///
/// Full is the identity. DrugDrugOnly drops HasTarget and InteractsWith
/// triples from the graph (examples untouched). TargetedDrugsOnly removes
/// every drug with no targets: its triples leave the graph and every example
/// touching it leaves all three splits.
pub fn apply_regime(
    g: &KnowledgeGraph,
    splits: &Splits,
    regime: Regime,
) -> (KnowledgeGraph, Splits) {
    match regime {
        Regime::Full => (g.clone(), splits.clone()),
        Regime::DrugDrugOnly => {
            let filtered = g.filtered(|t| {
                !matches!(t.relation.kind, RelationKind::HasTarget | RelationKind::InteractsWith)
            });
            (filtered, splits.clone())
        }
        Regime::TargetedDrugsOnly => {
            let ht = g.relation_id(crate::ingest::HAS_TARGET_KEY);
            let untargeted: HashSet<u32> = g
                .entities_of_kind(EntityKind::Drug)
                .into_iter()
                .filter(|&d| ht.map_or(true, |ht| g.neighbors(d, ht).is_empty()))
                .map(|d| d.index)
                .collect();
            let touches = |e: EntityId| e.kind == EntityKind::Drug && untargeted.contains(&e.index);
            let filtered = g.filtered(|t| !touches(t.head) && !touches(t.tail));
            let keep = |v: &[Example]| {
                v.iter()
                    .filter(|e| !touches(e.drug_a) && !touches(e.drug_b))
                    .copied()
                    .collect()
            };
            let splits = Splits {
                train: keep(&splits.train),
                valid: keep(&splits.valid),
                test: keep(&splits.test),
            };
            (filtered, splits)
        }
    }
}

/// The graph a model may see while training: all structural triples plus
/// polypharmacy edges for train-split positives only. Validation and test
/// positives are held out entirely.
pub fn training_graph(g: &KnowledgeGraph, train: &[Example]) -> KnowledgeGraph {
    let keep: HashSet<(u32, u32, u32)> = train
        .iter()
        .filter(|e| e.label == Label::Positive)
        .map(|e| (e.drug_a.index, e.side_effect.index, e.drug_b.index))
        .collect();
    g.filtered(|t| {
        if t.relation.kind == RelationKind::PolypharmacySideEffect {
            keep.contains(&(t.head.index, t.relation.index, t.tail.index))
        } else {
            true
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub dataset_hash: String,
    pub seed: u64,
    pub fractions: (f64, f64, f64),
}

/// Write splits as tab-separated `drug_a drug_b side_effect label split`
/// rows under a manifest header line. Byte-identical across reruns.
pub fn write_splits(
    path: &Path,
    g: &KnowledgeGraph,
    splits: &Splits,
    manifest: &SplitManifest,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let io = |e| Error::io(path, e);
    writeln!(
        f,
        "# dataset_hash={} seed={} fractions={},{},{}",
        manifest.dataset_hash,
        manifest.seed,
        manifest.fractions.0,
        manifest.fractions.1,
        manifest.fractions.2
    )
    .map_err(io)?;
    writeln!(f, "drug_a\tdrug_b\tside_effect\tlabel\tsplit").map_err(io)?;
    for (name, part) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)]
    {
        for e in part.iter() {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}",
                g.entity_key(e.drug_a),
                g.entity_key(e.drug_b),
                g.relation_key(e.side_effect),
                e.label.as_str(),
                name
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_splits(path: &Path, g: &KnowledgeGraph) -> Result<(Splits, SplitManifest)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let parse_err = |line: u64, msg: String| Error::Parse {
        file: path.display().to_string(),
        line,
        msg,
    };

    let header = match lines.next() {
        Some(Ok(l)) => l,
        _ => return Err(parse_err(1, "missing manifest header".into())),
    };
    let manifest = parse_manifest(&header).ok_or_else(|| {
        parse_err(1, format!("malformed manifest header: {header}"))
    })?;

    let mut splits = Splits::default();
    for (i, line) in lines.enumerate() {
        let lineno = i as u64 + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno == 2 && line.starts_with("drug_a\t") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(lineno, format!("expected 5 fields, got {}", fields.len())));
        }
        let a = g
            .entity_id(fields[0])
            .ok_or_else(|| Error::UnknownEntity(fields[0].to_string()))?;
        let b = g
            .entity_id(fields[1])
            .ok_or_else(|| Error::UnknownEntity(fields[1].to_string()))?;
        let r = g
            .relation_id(fields[2])
            .ok_or_else(|| Error::UnknownRelation(fields[2].to_string()))?;
        let label = match fields[3] {
            "positive" => Label::Positive,
            "negative" => Label::Negative,
            other => return Err(parse_err(lineno, format!("unknown label '{other}'"))),
        };
        let e = Example::new(a, b, r, label);
        match fields[4] {
            "train" => splits.train.push(e),
            "valid" => splits.valid.push(e),
            "test" => splits.test.push(e),
            other => return Err(parse_err(lineno, format!("unknown split '{other}'"))),
        }
    }
    Ok((splits, manifest))
}

fn parse_manifest(header: &str) -> Option<SplitManifest> {
    let rest = header.strip_prefix("# ")?;
    let mut dataset_hash = None;
    let mut seed = None;
    let mut fractions = None;
    for part in rest.split(' ') {
        let (k, v) = part.split_once('=')?;
        match k {
            "dataset_hash" => dataset_hash = Some(v.to_string()),
            "seed" => seed = v.parse().ok(),
            "fractions" => {
                let fs: Vec<f64> = v.split(',').filter_map(|x| x.parse().ok()).collect();
                if fs.len() == 3 {
                    fractions = Some((fs[0], fs[1], fs[2]));
                }
            }
            _ => return None,
        }
    }
    Some(SplitManifest { dataset_hash: dataset_hash?, seed: seed?, fractions: fractions? })
}

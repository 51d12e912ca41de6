//! Relational feature templates over drug pairs: shared targets and targets
//! connected by a protein–protein interaction. Templates are enumerated from
//! the training graph, pruned by support, and frozen into a dense index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{HAS_TARGET_KEY, INTERACTS_WITH_KEY};
use crate::kg::{EntityId, KnowledgeGraph, RelationId};

/// A template is identified by its protein(s); `InteractingTargets` holds an
/// unordered pair (p < q by id) whose interactsWith edge exists in the
/// training graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureTemplate {
    SharedTarget(EntityId),
    InteractingTargets(EntityId, EntityId),
}

impl FeatureTemplate {
    fn interacting(p: EntityId, q: EntityId) -> FeatureTemplate {
        if p.index <= q.index {
            FeatureTemplate::InteractingTargets(p, q)
        } else {
            FeatureTemplate::InteractingTargets(q, p)
        }
    }
}

/// Catalog of surviving templates with stable dense indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalFeatureSpace {
    templates: Vec<FeatureTemplate>,
    support: Vec<usize>,
    index: HashMap<FeatureTemplate, u32>,
    pub min_support: usize,
}

/// Sorted, deduplicated active template indices of one drug pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl RelationalFeatureSpace {
    pub fn empty() -> RelationalFeatureSpace {
        RelationalFeatureSpace {
            templates: Vec::new(),
            support: Vec::new(),
            index: HashMap::new(),
            min_support: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn support(&self, i: u32) -> usize {
        self.support[i as usize]
    }

    pub fn template(&self, i: u32) -> FeatureTemplate {
        self.templates[i as usize]
    }

    pub fn index_of(&self, t: &FeatureTemplate) -> Option<u32> {
        self.index.get(t).copied()
    }

    fn from_parts(templates: Vec<FeatureTemplate>, support: Vec<usize>, min_support: usize) -> Self {
        let index = templates
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, i as u32))
            .collect();
        RelationalFeatureSpace { templates, support, index, min_support }
    }

    /// SHA-256 of the manifest rendering; checkpoints embed it so a model is
    /// never applied to a feature space it was not trained against.
    pub fn content_hash(&self, g: &KnowledgeGraph) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(render_manifest(self, g).as_bytes());
        h.finalize().into()
    }
}

/// The active templates of pair (h, t), as a brute-force rule evaluation.
/// Shared code path for both support counting and featurization, so support
/// counts and feature activations can never disagree.
fn active_templates(
    g: &KnowledgeGraph,
    ht: RelationId,
    iw: RelationId,
    a: EntityId,
    b: EntityId,
    mut emit: impl FnMut(FeatureTemplate),
) {
    let ta = g.neighbors(a, ht);
    let tb = g.neighbors(b, ht);
    // sorted-list intersection: shared targets
    let (mut i, mut j) = (0, 0);
    while i < ta.len() && j < tb.len() {
        match ta[i].index.cmp(&tb[j].index) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                emit(FeatureTemplate::SharedTarget(ta[i]));
                i += 1;
                j += 1;
            }
        }
    }
    // interacting targets: p targeted by a, q targeted by b, interactsWith(p,q).
    // Scanning only a's side still covers the mirrored direction because the
    // template is unordered.
    for &p in ta {
        for &q in g.neighbors(p, iw) {
            if tb.binary_search(&q).is_ok() {
                emit(FeatureTemplate::interacting(p, q));
            }
        }
    }
}

/// Enumerate both template kinds over `pairs`, keeping templates whose rule
/// holds for at least `min_support` distinct pairs. Template order (and thus
/// index assignment) is SharedTarget by protein id, then InteractingTargets
/// by id pair.
pub fn enumerate_templates(
    g: &KnowledgeGraph,
    pairs: &[(EntityId, EntityId)],
    min_support: usize,
) -> Result<RelationalFeatureSpace> {
    if min_support < 1 {
        return Err(Error::Config("min_support must be at least 1".into()));
    }
    let (ht, iw) = match (g.relation_id(HAS_TARGET_KEY), g.relation_id(INTERACTS_WITH_KEY)) {
        (Some(ht), Some(iw)) => (ht, iw),
        // A graph with no target or interaction relation admits no templates.
        _ => return Ok(RelationalFeatureSpace::empty()),
    };

    let mut counts: BTreeMap<FeatureTemplate, usize> = BTreeMap::new();
    let mut dedup: BTreeSet<(u32, u32)> = BTreeSet::new();
    for &(a, b) in pairs {
        let key = if a.index <= b.index { (a.index, b.index) } else { (b.index, a.index) };
        if !dedup.insert(key) {
            continue;
        }
        // a template counts once per pair, however many paths realize it
        let mut seen: BTreeSet<FeatureTemplate> = BTreeSet::new();
        active_templates(g, ht, iw, a, b, |t| {
            seen.insert(t);
        });
        for t in seen {
            *counts.entry(t).or_insert(0) += 1;
        }
    }

    let mut templates = Vec::new();
    let mut support = Vec::new();
    for (t, c) in counts {
        if c >= min_support {
            templates.push(t);
            support.push(c);
        }
    }
    Ok(RelationalFeatureSpace::from_parts(templates, support, min_support))
}

/// Evaluate every retained template's rule for (h, t). Symmetric in its
/// arguments; result indices are sorted and deduplicated.
pub fn featurize(
    space: &RelationalFeatureSpace,
    g: &KnowledgeGraph,
    h: EntityId,
    t: EntityId,
) -> FeatureVector {
    if space.is_empty() {
        return FeatureVector::default();
    }
    let (ht, iw) = match (g.relation_id(HAS_TARGET_KEY), g.relation_id(INTERACTS_WITH_KEY)) {
        (Some(ht), Some(iw)) => (ht, iw),
        _ => return FeatureVector::default(),
    };
    let mut indices = Vec::new();
    active_templates(g, ht, iw, h, t, |tmpl| {
        if let Some(i) = space.index_of(&tmpl) {
            indices.push(i);
        }
    });
    indices.sort_unstable();
    indices.dedup();
    FeatureVector { indices }
}

/// Memoizing wrapper around [`featurize`], keyed by unordered pair. Behaves
/// as pure: concurrent callers may race to fill an entry but always observe
/// the same value.
pub struct PairFeaturizer<'a> {
    pub space: &'a RelationalFeatureSpace,
    pub graph: &'a KnowledgeGraph,
    cache: RwLock<HashMap<(u32, u32), std::sync::Arc<FeatureVector>>>,
}

impl<'a> PairFeaturizer<'a> {
    pub fn new(space: &'a RelationalFeatureSpace, graph: &'a KnowledgeGraph) -> Self {
        PairFeaturizer { space, graph, cache: RwLock::new(HashMap::new()) }
    }

    pub fn features(&self, a: EntityId, b: EntityId) -> std::sync::Arc<FeatureVector> {
        let key = if a.index <= b.index { (a.index, b.index) } else { (b.index, a.index) };
        if let Some(fv) = self.cache.read().expect("featurizer cache poisoned").get(&key) {
            return fv.clone();
        }
        let fv = std::sync::Arc::new(featurize(self.space, self.graph, a, b));
        let mut w = self.cache.write().expect("featurizer cache poisoned");
        w.entry(key).or_insert(fv).clone()
    }
}

fn template_fields(t: &FeatureTemplate, g: &KnowledgeGraph) -> (&'static str, String) {
    match t {
        FeatureTemplate::SharedTarget(p) => ("shared_target", g.entity_key(*p).to_string()),
        FeatureTemplate::InteractingTargets(p, q) => (
            "interacting_targets",
            format!("{},{}", g.entity_key(*p), g.entity_key(*q)),
        ),
    }
}

fn render_manifest(space: &RelationalFeatureSpace, g: &KnowledgeGraph) -> String {
    let mut out = format!("# min_support={}\n", space.min_support);
    for (i, t) in space.templates.iter().enumerate() {
        let (kind, proteins) = template_fields(t, g);
        out.push_str(&format!("{i}\t{kind}\t{proteins}\t{}\n", space.support[i]));
    }
    out
}

/// One line per template: `index kind protein[,protein] support`.
pub fn write_feature_manifest(
    path: &Path,
    space: &RelationalFeatureSpace,
    g: &KnowledgeGraph,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    f.write_all(render_manifest(space, g).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_feature_manifest(path: &Path, g: &KnowledgeGraph) -> Result<RelationalFeatureSpace> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: u64, msg: String| Error::Parse {
        file: path.display().to_string(),
        line,
        msg,
    };
    let mut templates = Vec::new();
    let mut support = Vec::new();
    let mut min_support = 0;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno == 1 {
            min_support = line
                .strip_prefix("# min_support=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(1, "missing min_support header".into()))?;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let idx: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad index '{}'", fields[0])))?;
        if idx != templates.len() {
            return Err(parse_err(lineno, format!("non-dense index {idx}")));
        }
        let lookup = |key: &str| {
            g.entity_id(key).ok_or_else(|| Error::UnknownEntity(key.to_string()))
        };
        let template = match fields[1] {
            "shared_target" => FeatureTemplate::SharedTarget(lookup(fields[2])?),
            "interacting_targets" => {
                let (p, q) = fields[2]
                    .split_once(',')
                    .ok_or_else(|| parse_err(lineno, "expected two proteins".into()))?;
                FeatureTemplate::interacting(lookup(p)?, lookup(q)?)
            }
            other => return Err(parse_err(lineno, format!("unknown template kind '{other}'"))),
        };
        let sup: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad support '{}'", fields[3])))?;
        templates.push(template);
        support.push(sup);
    }
    Ok(RelationalFeatureSpace::from_parts(templates, support, min_support))
}

//! Parse the four source files into a [`KnowledgeGraph`] and validate the
//! result against published statistics.
//!
//! Files are ingested in a fixed order (ppi, targets, combo, mono) so that
//! entity-id assignment is deterministic across runs. Unparseable rows are
//! hard errors, never skips.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityKind, GraphBuilder, KnowledgeGraph, RelationKind, Triple};

pub const HAS_TARGET_KEY: &str = "hasTarget";
pub const INTERACTS_WITH_KEY: &str = "interactsWith";
pub const MONO_SIDE_EFFECT_KEY: &str = "monoSideEffect";

/// Column mapping for the four input files. Defaults match the public
/// Decagon release headers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct IngestSchema {
    pub delimiter: char,
    pub ppi_col_a: String,
    pub ppi_col_b: String,
    pub targets_col_drug: String,
    pub targets_col_protein: String,
    pub combo_col_drug_a: String,
    pub combo_col_drug_b: String,
    pub combo_col_effect: String,
    pub combo_col_effect_name: String,
    pub mono_col_drug: String,
    pub mono_col_effect: String,
    pub mono_col_effect_name: String,
}

impl Default for IngestSchema {
    fn default() -> Self {
        IngestSchema {
            delimiter: ',',
            ppi_col_a: "Gene 1".into(),
            ppi_col_b: "Gene 2".into(),
            targets_col_drug: "STITCH".into(),
            targets_col_protein: "Gene".into(),
            combo_col_drug_a: "STITCH 1".into(),
            combo_col_drug_b: "STITCH 2".into(),
            combo_col_effect: "Polypharmacy Side Effect".into(),
            combo_col_effect_name: "Side Effect Name".into(),
            mono_col_drug: "STITCH".into(),
            mono_col_effect: "Individual Side Effect".into(),
            mono_col_effect_name: "Side Effect Name".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestPaths {
    pub ppi: PathBuf,
    pub targets: PathBuf,
    pub combo: PathBuf,
    pub mono: PathBuf,
}

/// The eight Table-1 size statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_proteins: usize,
    pub n_drugs: usize,
    pub n_ppi: usize,
    pub n_drug_drug: usize,
    pub n_drug_target: usize,
    pub n_mono_assoc: usize,
    pub n_distinct_mono: usize,
    pub n_distinct_poly: usize,
}

/// Published reference counts (unordered drug pairs; see `validate_stats`,
/// which reports rather than asserts, so a directed-count reading of the
/// source files surfaces as a mismatch instead of a crash).
pub const PUBLISHED_STATS: GraphStats = GraphStats {
    n_proteins: 19089,
    n_drugs: 645,
    n_ppi: 715_612,
    n_drug_drug: 4_649_441,
    n_drug_target: 11_501,
    n_mono_assoc: 174_977,
    n_distinct_mono: 10_184,
    n_distinct_poly: 963,
};

impl GraphStats {
    pub fn of(g: &KnowledgeGraph) -> GraphStats {
        let poly = g.relations_of_kind(RelationKind::PolypharmacySideEffect);
        let n_drug_drug = poly.iter().map(|&r| g.triple_count(r)).sum();
        GraphStats {
            n_proteins: g.entities_of_kind(EntityKind::Protein).len(),
            n_drugs: g.entities_of_kind(EntityKind::Drug).len(),
            n_ppi: g
                .relation_id(INTERACTS_WITH_KEY)
                .map_or(0, |r| g.triple_count(r)),
            n_drug_drug,
            n_drug_target: g.relation_id(HAS_TARGET_KEY).map_or(0, |r| g.triple_count(r)),
            n_mono_assoc: g
                .relation_id(MONO_SIDE_EFFECT_KEY)
                .map_or(0, |r| g.triple_count(r)),
            n_distinct_mono: g.entities_of_kind(EntityKind::MonoTerm).len(),
            n_distinct_poly: poly.len(),
        }
    }

    fn fields(&self) -> [(&'static str, usize); 8] {
        [
            ("proteins", self.n_proteins),
            ("drugs", self.n_drugs),
            ("ppi", self.n_ppi),
            ("drug_drug", self.n_drug_drug),
            ("drug_target", self.n_drug_target),
            ("mono_assoc", self.n_mono_assoc),
            ("distinct_mono", self.n_distinct_mono),
            ("distinct_poly", self.n_distinct_poly),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatMismatch {
    pub name: &'static str,
    pub expected: usize,
    pub actual: usize,
}

impl fmt::Display for StatMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.name, self.expected, self.actual)
    }
}

/// Empty iff all eight counts match; otherwise one entry per differing field.
pub fn validate_stats(actual: &GraphStats, expected: &GraphStats) -> Vec<StatMismatch> {
    expected
        .fields()
        .iter()
        .zip(actual.fields().iter())
        .filter(|((_, e), (_, a))| e != a)
        .map(|(&(name, expected), &(_, actual))| StatMismatch { name, expected, actual })
        .collect()
}

/// Full report: one `name expected actual` line per field.
pub fn stats_report(actual: &GraphStats, expected: &GraphStats) -> String {
    let mut out = String::new();
    for ((name, e), (_, a)) in expected.fields().iter().zip(actual.fields().iter()) {
        out.push_str(&format!("{name} {e} {a}\n"));
    }
    out
}

struct FileReader {
    path: PathBuf,
    reader: csv::Reader<std::fs::File>,
    // resolved column indices, in caller-requested order
    cols: Vec<usize>,
}

impl FileReader {
    fn open(path: &Path, delimiter: char, columns: &[&str]) -> Result<FileReader> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter as u8)
            .has_headers(true)
            .flexible(false)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .clone();
        let mut cols = Vec::with_capacity(columns.len());
        for want in columns {
            match headers.iter().position(|h| h == *want) {
                Some(i) => cols.push(i),
                None => {
                    return Err(Error::SchemaViolation(format!(
                        "{}: missing column '{}' (found: {})",
                        path.display(),
                        want,
                        headers.iter().collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
        Ok(FileReader { path: path.to_path_buf(), reader, cols })
    }

    /// Calls `row` with the requested fields of each record, failing on the
    /// first unparseable or empty-field row.
    fn for_each(&mut self, mut row: impl FnMut(&[&str], u64) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {}
                Err(e) => return Err(csv_error(&self.path, e)),
            }
            let line = record.position().map_or(0, |p| p.line());
            let mut fields: Vec<&str> = Vec::with_capacity(self.cols.len());
            for &c in &self.cols {
                let f = record.get(c).unwrap_or("");
                if f.is_empty() {
                    return Err(Error::Parse {
                        file: self.path.display().to_string(),
                        line,
                        msg: format!("empty field in column {c}"),
                    });
                }
                fields.push(f);
            }
            row(&fields, line)?;
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::Parse { file: path.display().to_string(), line, msg: e.to_string() }
}

/// Attaches file/line context to schema violations raised while inserting a
/// row's triple.
fn at_row(path: &Path, line: u64, e: Error) -> Error {
    match e {
        Error::SchemaViolation(msg) => Error::Parse {
            file: path.display().to_string(),
            line,
            msg,
        },
        other => other,
    }
}

/// Parse all four files (ppi, targets, combo, mono — in that order) into a
/// frozen graph plus its computed statistics.
pub fn ingest_dataset(
    paths: &IngestPaths,
    schema: &IngestSchema,
) -> Result<(KnowledgeGraph, GraphStats)> {
    let mut b = GraphBuilder::new();
    let iw = b.intern_relation(INTERACTS_WITH_KEY, RelationKind::InteractsWith)?;
    let ht = b.intern_relation(HAS_TARGET_KEY, RelationKind::HasTarget)?;
    let mono = b.intern_relation(MONO_SIDE_EFFECT_KEY, RelationKind::MonoSideEffect)?;

    let d = schema.delimiter;

    let mut ppi = FileReader::open(&paths.ppi, d, &[&schema.ppi_col_a, &schema.ppi_col_b])?;
    ppi.for_each(|f, line| {
        let p = b.intern_entity(f[0], EntityKind::Protein)?;
        let q = b.intern_entity(f[1], EntityKind::Protein)?;
        b.add_triple(Triple::new(p, iw, q))
            .map_err(|e| at_row(&paths.ppi, line, e))
    })?;

    let mut targets =
        FileReader::open(&paths.targets, d, &[&schema.targets_col_drug, &schema.targets_col_protein])?;
    targets.for_each(|f, line| {
        let drug = b.intern_entity(f[0], EntityKind::Drug)?;
        let protein = b.intern_entity(f[1], EntityKind::Protein)?;
        b.add_triple(Triple::new(drug, ht, protein))
            .map_err(|e| at_row(&paths.targets, line, e))
    })?;

    let mut combo = FileReader::open(
        &paths.combo,
        d,
        &[
            &schema.combo_col_drug_a,
            &schema.combo_col_drug_b,
            &schema.combo_col_effect,
            &schema.combo_col_effect_name,
        ],
    )?;
    combo.for_each(|f, line| {
        let a = b.intern_entity(f[0], EntityKind::Drug)?;
        let c = b.intern_entity(f[1], EntityKind::Drug)?;
        let r = b.intern_relation(f[2], RelationKind::PolypharmacySideEffect)?;
        b.set_relation_display(r, f[3]);
        b.add_triple(Triple::new(a, r, c))
            .map_err(|e| at_row(&paths.combo, line, e))
    })?;

    let mut mono_rd = FileReader::open(
        &paths.mono,
        d,
        &[&schema.mono_col_drug, &schema.mono_col_effect, &schema.mono_col_effect_name],
    )?;
    mono_rd.for_each(|f, line| {
        let drug = b.intern_entity(f[0], EntityKind::Drug)?;
        let term = b.intern_entity(f[1], EntityKind::MonoTerm)?;
        b.set_entity_display(term, f[2]);
        b.add_triple(Triple::new(drug, mono, term))
            .map_err(|e| at_row(&paths.mono, line, e))
    })?;

    let g = b.freeze();
    let stats = GraphStats::of(&g);
    Ok((g, stats))
}

//! Ranking metrics (AuROC, AuPR, AP@50) and per-side-effect evaluation
//! reports.
//!
//! Tie handling is fixed and documented: AuROC uses the rank-sum formulation
//! with tied ranks averaged (each tied positive–negative pair counts ½);
//! the average-precision metrics use a stable descending-score sort, so
//! equal scores keep their input (insertion) order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::{Example, Label};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, RelationId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    pub positive: bool,
}

fn check_finite(scored: &[ScoredExample]) -> Result<()> {
    if scored.iter().any(|s| !s.score.is_finite()) {
        return Err(Error::NonFinite("metric input score".into()));
    }
    Ok(())
}

/// Probability that a uniformly chosen positive outranks a uniformly chosen
/// negative, ties ½. Computed by rank sums with tied ranks averaged.
pub fn auroc(scored: &[ScoredExample]) -> Result<f64> {
    check_finite(scored)?;
    let n_pos = scored.iter().filter(|s| s.positive).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(format!(
            "auroc needs both classes (n_pos={n_pos}, n_neg={n_neg})"
        )));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].score.partial_cmp(&scored[b].score).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].score == scored[order[i]].score {
            j += 1;
        }
        // 1-based ranks i+1..=j share the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if scored[idx].positive {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Stable descending-score order: equal scores keep insertion order.
fn descending(scored: &[ScoredExample]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].score.partial_cmp(&scored[a].score).unwrap());
    order
}

/// Average precision: mean over positives, taken in descending-score order,
/// of the precision at that positive's rank.
pub fn aupr(scored: &[ScoredExample]) -> Result<f64> {
    check_finite(scored)?;
    let n_pos = scored.iter().filter(|s| s.positive).count();
    if n_pos == 0 {
        return Err(Error::Degenerate("aupr needs at least one positive".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in descending(scored).iter().enumerate() {
        if scored[idx].positive {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Average precision over only the top-k predictions:
/// Σ_{i ≤ k, label_i = +} precision@i / min(k, n_pos).
pub fn ap_at_k(scored: &[ScoredExample], k: usize) -> Result<f64> {
    check_finite(scored)?;
    if k == 0 {
        return Err(Error::Config("ap_at_k needs k >= 1".into()));
    }
    let n_pos = scored.iter().filter(|s| s.positive).count();
    if n_pos == 0 {
        return Err(Error::Degenerate("ap_at_k needs at least one positive".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in descending(scored).iter().take(k).enumerate() {
        if scored[idx].positive {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / n_pos.min(k) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SideEffectOutcome {
    Metrics { auroc: f64, aupr: f64, ap_k: f64 },
    /// One class missing in the test split; excluded from the aggregate.
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideEffectEval {
    pub relation: RelationId,
    pub n_pos: usize,
    pub n_neg: usize,
    /// More than half of this side effect's scores tie with another score.
    pub tie_heavy: bool,
    pub outcome: SideEffectOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_side_effect: Vec<SideEffectEval>,
    /// Unweighted mean over non-degenerate side effects.
    pub aggregate: (f64, f64, f64),
    /// All examples evaluated as one pool, a secondary view that weights
    /// frequent side effects more heavily than the aggregate row.
    pub pooled: (f64, f64, f64),
    pub ap_k: usize,
}

/// Group test examples by side effect, score them, and compute the three
/// metrics per side effect plus the aggregate and pooled summaries.
pub fn evaluate(
    scorer: impl Fn(&Example) -> Result<f64>,
    test: &[Example],
    ap_k: usize,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Degenerate("empty test split".into()));
    }
    let mut groups: BTreeMap<u32, (RelationId, Vec<ScoredExample>)> = BTreeMap::new();
    let mut pooled: Vec<ScoredExample> = Vec::with_capacity(test.len());
    for e in test {
        let score = scorer(e)?;
        let s = ScoredExample { score, positive: e.label == Label::Positive };
        groups
            .entry(e.side_effect.index)
            .or_insert_with(|| (e.side_effect, Vec::new()))
            .1
            .push(s);
        pooled.push(s);
    }

    let mut per_side_effect = Vec::with_capacity(groups.len());
    let mut sums = (0.0, 0.0, 0.0);
    let mut n_ok = 0usize;
    for (_, (relation, scored)) in groups {
        let n_pos = scored.iter().filter(|s| s.positive).count();
        let n_neg = scored.len() - n_pos;
        let distinct = {
            let mut v: Vec<u64> = scored.iter().map(|s| s.score.to_bits()).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        let tie_heavy = distinct * 2 < scored.len();
        let outcome = if n_pos == 0 || n_neg == 0 {
            SideEffectOutcome::Degenerate(format!("n_pos={n_pos}, n_neg={n_neg}"))
        } else {
            let a = auroc(&scored)?;
            let p = aupr(&scored)?;
            let k = ap_at_k(&scored, ap_k)?;
            sums.0 += a;
            sums.1 += p;
            sums.2 += k;
            n_ok += 1;
            SideEffectOutcome::Metrics { auroc: a, aupr: p, ap_k: k }
        };
        per_side_effect.push(SideEffectEval { relation, n_pos, n_neg, tie_heavy, outcome });
    }
    if n_ok == 0 {
        return Err(Error::Degenerate("every side effect is degenerate".into()));
    }
    let aggregate = (sums.0 / n_ok as f64, sums.1 / n_ok as f64, sums.2 / n_ok as f64);
    let pooled = (auroc(&pooled)?, aupr(&pooled)?, ap_at_k(&pooled, ap_k)?);
    Ok(EvalReport { per_side_effect, aggregate, pooled, ap_k })
}

/// One `relation auroc aupr ap50 n_pos n_neg` line per side effect
/// (degenerate entries print NA), then the aggregate line, then the pooled
/// line as a secondary reading.
pub fn render_report(report: &EvalReport, g: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for e in &report.per_side_effect {
        let flag = if e.tie_heavy { " ties" } else { "" };
        match &e.outcome {
            SideEffectOutcome::Metrics { auroc, aupr, ap_k } => {
                let _ = writeln!(
                    out,
                    "{} {auroc:.6} {aupr:.6} {ap_k:.6} {} {}{flag}",
                    g.relation_key(e.relation),
                    e.n_pos,
                    e.n_neg
                );
            }
            SideEffectOutcome::Degenerate(_) => {
                let _ = writeln!(
                    out,
                    "{} NA NA NA {} {}{flag}",
                    g.relation_key(e.relation),
                    e.n_pos,
                    e.n_neg
                );
            }
        }
    }
    let (a, p, k) = report.aggregate;
    let _ = writeln!(out, "aggregate {a:.6} {p:.6} {k:.6}");
    let (a, p, k) = report.pooled;
    let _ = writeln!(out, "pooled {a:.6} {p:.6} {k:.6}");
    out
}

/// Machine-readable summary of the aggregate (and pooled) numbers.
pub fn summary_json(report: &EvalReport) -> String {
    let n_degenerate = report
        .per_side_effect
        .iter()
        .filter(|e| matches!(e.outcome, SideEffectOutcome::Degenerate(_)))
        .count();
    let summary = serde_json::json!({
        "auroc": report.aggregate.0,
        "aupr": report.aggregate.1,
        "ap_at_k": report.aggregate.2,
        "k": report.ap_k,
        "pooled_auroc": report.pooled.0,
        "pooled_aupr": report.pooled.1,
        "pooled_ap_at_k": report.pooled.2,
        "n_side_effects": report.per_side_effect.len(),
        "n_degenerate": n_degenerate,
    });
    serde_json::to_string_pretty(&summary).expect("summary serializes")
}

// ---------------------------------------------------------------------------
// Reference oracles. Quadratic/naive re-implementations used by the test and
// acceptance suites; kept in the crate so both can share them.
// ---------------------------------------------------------------------------

/// O(n²) pairwise-comparison AuROC.
pub fn auroc_oracle(scored: &[ScoredExample]) -> Option<f64> {
    let pos: Vec<f64> = scored.iter().filter(|s| s.positive).map(|s| s.score).collect();
    let neg: Vec<f64> = scored.iter().filter(|s| !s.positive).map(|s| s.score).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &p in &pos {
        for &n in &neg {
            total += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(total / (pos.len() * neg.len()) as f64)
}

/// Naive truncated average precision; `k = None` means the full list.
pub fn ap_oracle(scored: &[ScoredExample], k: Option<usize>) -> Option<f64> {
    let n_pos = scored.iter().filter(|s| s.positive).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].score.partial_cmp(&scored[a].score).unwrap());
    let cut = k.unwrap_or(scored.len());
    let mut sum = 0.0;
    let mut hits = 0;
    for (i, &idx) in order.iter().enumerate().take(cut) {
        if scored[idx].positive {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    let denom = match k {
        Some(k) => n_pos.min(k),
        None => n_pos,
    };
    Some(sum / denom as f64)
}

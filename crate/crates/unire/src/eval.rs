//! Strict-criterion scoring, span F1, the five-way relation error
//! taxonomy, and the distance/threshold analyses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::decode::{adjacent_distances, joint_decode, DecodeConfig, ExtractionResult};
use crate::error::{Result, UnireError};
use crate::label::{Entity, LabelSpace, ProbTensor, SentenceAnnotation, Span};

/// Micro-averaged precision/recall/F1 with raw counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl PrfCounts {
    pub fn add(&mut self, other: &PrfCounts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.correct += other.correct;
    }

    pub fn precision(&self) -> f64 {
        if self.predicted == 0 { 0.0 } else { self.correct as f64 / self.predicted as f64 }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 { 0.0 } else { self.correct as f64 / self.gold as f64 }
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
    }
}

/// Evaluation summary for one sentence or an aggregated corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entity: PrfCounts,
    pub relation: PrfCounts,
}

impl EvalReport {
    pub fn add(&mut self, other: &EvalReport) {
        self.entity.add(&other.entity);
        self.relation.add(&other.relation);
    }
}

/// A relation in matchable form: endpoint spans with their entity types
/// plus the relation type. Undirected relations are canonicalized with
/// the lower-starting span first so each mirrored pair counts once.
type RelationKey = ((Span, usize), (Span, usize), usize);

fn canonical_relation_set(
    entities: &[Entity],
    relations: &[crate::label::Relation],
    ls: &LabelSpace,
) -> BTreeSet<RelationKey> {
    let mut set = BTreeSet::new();
    for r in relations {
        let head = entities[r.head];
        let tail = entities[r.tail];
        let mut a = (head.span, head.entity_type);
        let mut b = (tail.span, tail.entity_type);
        if ls.is_symmetric_relation(r.relation_type) && b < a {
            std::mem::swap(&mut a, &mut b);
        }
        set.insert((a, b, r.relation_type));
    }
    set
}

fn entity_set(entities: &[Entity]) -> BTreeSet<(Span, usize)> {
    entities.iter().map(|e| (e.span, e.entity_type)).collect()
}

/// Strict evaluation of one sentence: an entity counts only with exact
/// span and type; a relation only with exact type and both argument
/// entities exactly correct.
pub fn strict_eval(
    pred: &ExtractionResult,
    gold: &SentenceAnnotation,
    ls: &LabelSpace,
) -> Result<EvalReport> {
    let n = gold.len();
    if pred.entities.iter().any(|e| e.span.end > n || e.span.is_empty()) {
        return Err(UnireError::InvalidArgument("predicted span out of range".into()));
    }
    let gold_entities = entity_set(&gold.entities);
    let pred_entities = entity_set(&pred.entities);
    let gold_rels = canonical_relation_set(&gold.entities, &gold.relations, ls);
    let pred_rels = canonical_relation_set(&pred.entities, &pred.relations, ls);
    Ok(EvalReport {
        entity: PrfCounts {
            gold: gold_entities.len(),
            predicted: pred_entities.len(),
            correct: gold_entities.intersection(&pred_entities).count(),
        },
        relation: PrfCounts {
            gold: gold_rels.len(),
            predicted: pred_rels.len(),
            correct: gold_rels.intersection(&pred_rels).count(),
        },
    })
}

/// Micro-averages strict evaluation over a corpus by summing counts.
pub fn strict_eval_corpus(
    preds: &[ExtractionResult],
    golds: &[SentenceAnnotation],
    ls: &LabelSpace,
) -> Result<EvalReport> {
    if preds.len() != golds.len() {
        return Err(UnireError::InvalidArgument(format!(
            "{} predictions vs {} gold sentences",
            preds.len(),
            golds.len()
        )));
    }
    let mut total = EvalReport::default();
    for (pred, gold) in preds.iter().zip(golds) {
        total.add(&strict_eval(pred, gold, ls)?);
    }
    Ok(total)
}

/// Gold split positions: the interior boundaries of every gold entity
/// span (start and end, excluding sentence edges).
pub fn gold_splits(gold: &SentenceAnnotation) -> BTreeSet<usize> {
    let n = gold.len();
    let mut splits = BTreeSet::new();
    for e in &gold.entities {
        for k in [e.span.start, e.span.end] {
            if k > 0 && k < n {
                splits.insert(k);
            }
        }
    }
    splits
}

/// Micro P/R/F1 over split positions, each treated as one item. Both
/// empty counts as a perfect match.
pub fn span_f1_counts(pred: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> PrfCounts {
    PrfCounts {
        gold: gold.len(),
        predicted: pred.len(),
        correct: pred.intersection(gold).count(),
    }
}

pub fn span_f1(pred: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    span_f1_counts(pred, gold).f1()
}

/// The five relation error categories, assigned in priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationError {
    /// A predicted boundary cuts through an argument's gold span.
    SpanSplitting,
    /// An argument's gold span is not any predicted entity span.
    EntityNotFound,
    /// Argument span found but with the wrong entity type.
    EntityTypeError,
    /// Both arguments correct but no relation predicted between them.
    RelationNotFound,
    /// A relation was predicted between the arguments with the wrong type.
    RelationTypeError,
}

/// Counts per category over all unrecovered gold relations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub sse: usize,
    pub enf: usize,
    pub ete: usize,
    pub rnf: usize,
    pub rte: usize,
}

impl ErrorBreakdown {
    pub fn total(&self) -> usize {
        self.sse + self.enf + self.ete + self.rnf + self.rte
    }

    pub fn add(&mut self, other: &ErrorBreakdown) {
        self.sse += other.sse;
        self.enf += other.enf;
        self.ete += other.ete;
        self.rnf += other.rnf;
        self.rte += other.rte;
    }

    /// Fractions in SSE, ENF, ETE, RNF, RTE order; all zero when there
    /// are no errors.
    pub fn fractions(&self) -> [f64; 5] {
        let total = self.total();
        if total == 0 {
            return [0.0; 5];
        }
        let t = total as f64;
        [
            self.sse as f64 / t,
            self.enf as f64 / t,
            self.ete as f64 / t,
            self.rnf as f64 / t,
            self.rte as f64 / t,
        ]
    }
}

/// Classifies every unrecovered gold relation into exactly one category,
/// checked in the order SSE, ENF, ETE, RNF, RTE.
pub fn error_taxonomy(
    pred: &ExtractionResult,
    gold: &SentenceAnnotation,
    ls: &LabelSpace,
) -> ErrorBreakdown {
    let n = gold.len();
    // Boundaries the decoder produced: explicit split positions when the
    // joint decoder ran, else the predicted entities' edges.
    let pred_boundaries: BTreeSet<usize> = if pred.split_positions.is_empty() {
        pred.entities
            .iter()
            .flat_map(|e| [e.span.start, e.span.end])
            .filter(|&k| k > 0 && k < n)
            .collect()
    } else {
        pred.interior_splits(n).into_iter().collect()
    };
    let pred_spans: BTreeSet<Span> = pred.entities.iter().map(|e| e.span).collect();
    let pred_entities = entity_set(&pred.entities);
    let gold_rels = canonical_relation_set(&gold.entities, &gold.relations, ls);
    let pred_rels = canonical_relation_set(&pred.entities, &pred.relations, ls);

    let mut breakdown = ErrorBreakdown::default();
    for rel in gold_rels.difference(&pred_rels) {
        let ((span_a, type_a), (span_b, type_b), _) = *rel;
        let cut = |span: Span| {
            pred_boundaries.iter().any(|&k| k > span.start && k < span.end)
        };
        let category = if cut(span_a) || cut(span_b) {
            RelationError::SpanSplitting
        } else if !pred_spans.contains(&span_a) || !pred_spans.contains(&span_b) {
            RelationError::EntityNotFound
        } else if !pred_entities.contains(&(span_a, type_a))
            || !pred_entities.contains(&(span_b, type_b))
        {
            RelationError::EntityTypeError
        } else {
            // Both arguments fully recovered: did any relation (of any
            // type) get predicted between this pair?
            let between = pred_rels.iter().any(|&(a, b, _)| {
                (a == (span_a, type_a) && b == (span_b, type_b))
                    || (a == (span_b, type_b) && b == (span_a, type_a))
            });
            if between {
                RelationError::RelationTypeError
            } else {
                RelationError::RelationNotFound
            }
        };
        match category {
            RelationError::SpanSplitting => breakdown.sse += 1,
            RelationError::EntityNotFound => breakdown.enf += 1,
            RelationError::EntityTypeError => breakdown.ete += 1,
            RelationError::RelationNotFound => breakdown.rnf += 1,
            RelationError::RelationTypeError => breakdown.rte += 1,
        }
    }
    breakdown
}

/// Histogram of adjacent-row/column distances split by whether the
/// boundary is a gold entity boundary. Fixed bins of width 0.1 on
/// `[0, 5)` plus one overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub bin_width: f64,
    /// 50 regular bins plus the overflow bin at the end.
    pub ent_bound: Vec<usize>,
    pub non_ent_bound: Vec<usize>,
}

pub const HIST_BINS: usize = 50;
pub const HIST_BIN_WIDTH: f64 = 0.1;

pub fn distance_histogram(
    tensors: &[ProbTensor],
    golds: &[SentenceAnnotation],
    ls: &LabelSpace,
    cfg: &DecodeConfig,
) -> Result<DistanceHistogram> {
    if tensors.len() != golds.len() {
        return Err(UnireError::InvalidArgument("tensor/gold count mismatch".into()));
    }
    let mut hist = DistanceHistogram {
        bin_width: HIST_BIN_WIDTH,
        ent_bound: vec![0; HIST_BINS + 1],
        non_ent_bound: vec![0; HIST_BINS + 1],
    };
    for (p, gold) in tensors.iter().zip(golds) {
        let sym = crate::label::symmetrize(p, ls);
        let splits = gold_splits(gold);
        for (idx, d) in adjacent_distances(&sym, cfg.distance_mode).into_iter().enumerate() {
            let boundary = idx + 1;
            let bin = ((d / HIST_BIN_WIDTH) as usize).min(HIST_BINS);
            if splits.contains(&boundary) {
                hist.ent_bound[bin] += 1;
            } else {
                hist.non_ent_bound[bin] += 1;
            }
        }
    }
    Ok(hist)
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub span_f1: f64,
    pub entity_f1: f64,
    pub relation_f1: f64,
}

/// Default sweep grid: 0.6 to 2.0 in steps of 0.1.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..15).map(|k| 0.6 + 0.1 * k as f64).collect()
}

/// Re-decodes every tensor at each threshold and scores the results.
pub fn threshold_sweep(
    tensors: &[ProbTensor],
    golds: &[SentenceAnnotation],
    ls: &LabelSpace,
    base: &DecodeConfig,
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    if tensors.len() != golds.len() {
        return Err(UnireError::InvalidArgument("tensor/gold count mismatch".into()));
    }
    if alphas.is_empty() {
        return Err(UnireError::InvalidArgument("empty alpha grid".into()));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let cfg = DecodeConfig { alpha, ..*base };
        let mut report = EvalReport::default();
        let mut splits = PrfCounts::default();
        for (p, gold) in tensors.iter().zip(golds) {
            let pred = joint_decode(p, ls, &cfg);
            report.add(&strict_eval(&pred, gold, ls)?);
            let pred_splits: BTreeSet<usize> = pred.interior_splits(gold.len()).into_iter().collect();
            splits.add(&span_f1_counts(&pred_splits, &gold_splits(gold)));
        }
        // Mutually empty split sets count as perfect, mirroring span_f1.
        let span = if splits.gold == 0 && splits.predicted == 0 { 1.0 } else { splits.f1() };
        rows.push(SweepRow {
            alpha,
            span_f1: span,
            entity_f1: report.entity.f1(),
            relation_f1: report.relation.f1(),
        });
    }
    Ok(rows)
}

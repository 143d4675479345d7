//! Decoders that turn a probability tensor into entities and relations.
//!
//! Three variants share one output type: the approximate three-step joint
//! decoder (span, entity type, relation type), the per-cell argmax "hard"
//! baseline, and an exact enumeration oracle for short sentences.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UnireError};
use crate::label::{argmax, symmetrize, Entity, LabelSpace, ProbTensor, Relation, Span, NULL_LABEL};

/// How adjacent row/column distances are combined in span decoding. The
/// formal algorithm averages squared L2 norms; the prose describes plain
/// L2 distances. Both are available; squared is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMode {
    SquaredL2Averaged,
    L2Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Split threshold on the adjacent-row/column distance.
    pub alpha: f64,
    pub distance_mode: DistanceMode,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { alpha: 1.4, distance_mode: DistanceMode::SquaredL2Averaged }
    }
}

/// Which decoder produced an extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderTag {
    Joint,
    Hard,
    Oracle,
}

/// Decoded entity and relation sets, with the split positions that the
/// joint decoder derived (interior boundaries plus `|s|`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub decoder: DecoderTag,
    pub split_positions: Vec<usize>,
}

impl ExtractionResult {
    /// Interior split positions (excluding the always-present `|s|`).
    pub fn interior_splits(&self, sentence_len: usize) -> Vec<usize> {
        self.split_positions.iter().copied().filter(|&k| k > 0 && k < sentence_len).collect()
    }
}

/// Distance between adjacent flattened rows and columns for every boundary
/// index `k` in `1..|s|`; `out[k-1]` compares rows/cols `k-1` and `k`.
pub fn adjacent_distances(p: &ProbTensor, mode: DistanceMode) -> Vec<f64> {
    let n = p.size();
    let y = p.labels();
    if n < 2 {
        return Vec::new();
    }
    let values = p.values();
    let stride = n * y;
    // Both passes scan the backing buffer sequentially; comparing columns
    // cell-by-cell within each row avoids strided access at large n.
    let mut row_sq = vec![0.0; n - 1];
    for k in 1..n {
        let prev = &values[(k - 1) * stride..k * stride];
        let cur = &values[k * stride..(k + 1) * stride];
        let mut acc = 0.0;
        for (a, b) in prev.iter().zip(cur) {
            let d = a - b;
            acc += d * d;
        }
        row_sq[k - 1] = acc;
    }
    let mut col_sq = vec![0.0; n - 1];
    for i in 0..n {
        let row = &values[i * stride..(i + 1) * stride];
        for b in 1..n {
            let prev = &row[(b - 1) * y..b * y];
            let cur = &row[b * y..(b + 1) * y];
            let mut acc = 0.0;
            for (a, c) in prev.iter().zip(cur) {
                let d = a - c;
                acc += d * d;
            }
            col_sq[b - 1] += acc;
        }
    }
    row_sq
        .into_iter()
        .zip(col_sq)
        .map(|(r, c)| match mode {
            DistanceMode::SquaredL2Averaged => 0.5 * (r + c),
            DistanceMode::L2Averaged => 0.5 * (r.sqrt() + c.sqrt()),
        })
        .collect()
}

/// Span decoding: thresholds adjacent distances to find split positions,
/// then cuts the sentence into maximal segments. The returned split list
/// contains interior boundaries in increasing order followed by `|s|`.
/// Expects a symmetrized tensor.
pub fn span_decode(p: &ProbTensor, cfg: &DecodeConfig) -> (Vec<usize>, Vec<Span>) {
    let n = p.size();
    let mut splits = Vec::new();
    if n > 1 {
        for (idx, d) in adjacent_distances(p, cfg.distance_mode).into_iter().enumerate() {
            if d > cfg.alpha {
                splits.push(idx + 1);
            }
        }
    }
    splits.push(n);
    let mut spans = Vec::with_capacity(splits.len());
    let mut start = 0;
    for &end in &splits {
        spans.push(Span::new(start, end));
        start = end;
    }
    (splits, spans)
}

/// Mean probability of `label` over the rectangle `rows x cols`.
fn rect_mean(p: &ProbTensor, rows: Span, cols: Span, label: usize) -> f64 {
    let mut sum = 0.0;
    for i in rows.start..rows.end {
        for j in cols.start..cols.end {
            sum += p.get(i, j, label);
        }
    }
    sum / (rows.len() * cols.len()) as f64
}

/// Entity-type step: argmax over `Y_e ∪ {⊥}` of the mean probability on the
/// span's diagonal square. Ties go to the smallest label id, so `⊥` wins.
pub fn entity_type_decode(p: &ProbTensor, ls: &LabelSpace, span: Span) -> usize {
    let mut scores = Vec::with_capacity(1 + ls.num_entity_types());
    scores.push(rect_mean(p, span, span, NULL_LABEL));
    for e in 0..ls.num_entity_types() {
        scores.push(rect_mean(p, span, span, ls.entity_label(e)));
    }
    argmax(&scores) // 0 = ⊥, k = entity label k
}

/// Relation-type step: argmax over `Y_r ∪ {⊥}` of the mean probability on
/// the rectangle spanned by the two entities (row span = head).
pub fn relation_type_decode(p: &ProbTensor, ls: &LabelSpace, head: Span, tail: Span) -> usize {
    let mut scores = Vec::with_capacity(1 + ls.num_relation_types());
    scores.push(rect_mean(p, head, tail, NULL_LABEL));
    for r in 0..ls.num_relation_types() {
        scores.push(rect_mean(p, head, tail, ls.relation_label(r)));
    }
    let best = argmax(&scores);
    if best == 0 {
        NULL_LABEL
    } else {
        ls.relation_label(best - 1)
    }
}

/// The three-step joint decoder: symmetrize, split into spans, type each
/// span, then type every ordered pair of decoded entities.
pub fn joint_decode(p: &ProbTensor, ls: &LabelSpace, cfg: &DecodeConfig) -> ExtractionResult {
    let p = symmetrize(p, ls);
    let (splits, spans) = span_decode(&p, cfg);
    let mut entities = Vec::new();
    for &span in &spans {
        let label = entity_type_decode(&p, ls, span);
        if label != NULL_LABEL {
            entities.push(Entity { span, entity_type: label - 1 });
        }
    }
    let relations = decode_pairwise_relations(&p, ls, &entities);
    ExtractionResult { entities, relations, decoder: DecoderTag::Joint, split_positions: splits }
}

fn decode_pairwise_relations(
    p: &ProbTensor,
    ls: &LabelSpace,
    entities: &[Entity],
) -> Vec<Relation> {
    let mut relations = Vec::new();
    for (a, e1) in entities.iter().enumerate() {
        for (b, e2) in entities.iter().enumerate() {
            if a == b {
                continue;
            }
            let label = relation_type_decode(p, ls, e1.span, e2.span);
            if let Some(r) = ls.relation_type_of(label) {
                relations.push(Relation { head: a, tail: b, relation_type: r });
            }
        }
    }
    relations
}

/// Hard-decoding baseline: per-cell argmax, then a greedy diagonal square
/// scan from size `|s|` down to 1 (most-frequent entity-or-⊥ label decides;
/// `⊥` wins ties, then the smallest label id), then most-frequent relation
/// label per ordered entity pair.
pub fn hard_decode(p: &ProbTensor, ls: &LabelSpace) -> ExtractionResult {
    let table = p.argmax_table();
    let n = p.size();
    let num_ent = ls.num_entity_types();
    let mut accepted: Vec<Entity> = Vec::new();

    // counts[l] = occurrences of entity label l (index 0 = ⊥) in the
    // current square; maintained incrementally while sliding.
    for size in (1..=n).rev() {
        let mut counts = vec![0usize; num_ent + 1];
        for start in 0..=(n - size) {
            if start == 0 {
                for i in 0..size {
                    for j in 0..size {
                        bump(&mut counts, table.get(i, j), ls, 1);
                    }
                }
            } else {
                // Slide right/down by one: drop old top row + left column,
                // add new bottom row + right column.
                let old = start - 1;
                let new = start + size - 1;
                for j in old..old + size {
                    bump(&mut counts, table.get(old, j), ls, -1);
                }
                for i in start..new {
                    bump(&mut counts, table.get(i, old), ls, -1);
                }
                for j in start..=new {
                    bump(&mut counts, table.get(new, j), ls, 1);
                }
                for i in start..new {
                    bump(&mut counts, table.get(i, new), ls, 1);
                }
            }
            let candidate = Span::new(start, start + size);
            if accepted.iter().any(|e| e.span.overlaps(&candidate)) {
                continue;
            }
            if let Some(best) = most_frequent(&counts) {
                accepted.push(Entity { span: candidate, entity_type: best - 1 });
            }
        }
    }
    accepted.sort();

    let mut relations = Vec::new();
    for (a, e1) in accepted.iter().enumerate() {
        for (b, e2) in accepted.iter().enumerate() {
            if a == b {
                continue;
            }
            let mut rel_counts = vec![0usize; ls.num_relation_types() + 1];
            for i in e1.span.start..e1.span.end {
                for j in e2.span.start..e2.span.end {
                    let label = table.get(i, j);
                    if label == NULL_LABEL {
                        rel_counts[0] += 1;
                    } else if let Some(r) = ls.relation_type_of(label) {
                        rel_counts[r + 1] += 1;
                    }
                }
            }
            if let Some(best) = most_frequent(&rel_counts) {
                relations.push(Relation { head: a, tail: b, relation_type: best - 1 });
            }
        }
    }
    ExtractionResult {
        entities: accepted,
        relations,
        decoder: DecoderTag::Hard,
        split_positions: Vec::new(),
    }
}

fn bump(counts: &mut [usize], label: usize, ls: &LabelSpace, delta: isize) {
    let slot = if label == NULL_LABEL {
        Some(0)
    } else {
        ls.entity_type_of(label).map(|e| e + 1)
    };
    if let Some(s) = slot {
        counts[s] = (counts[s] as isize + delta) as usize;
    }
}

/// Most frequent non-⊥ slot, or `None` when `⊥` (slot 0) wins or ties, or
/// when no tracked label occurs at all.
fn most_frequent(counts: &[usize]) -> Option<usize> {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = k;
        }
    }
    (best != 0 && counts[best] > 0).then_some(best)
}

/// Maximum sentence length accepted by the enumeration oracle.
pub const ORACLE_MAX_LEN: usize = 8;

/// Exact reference decoder: enumerates all `2^(|s|-1)` segmentations,
/// types each segment and ordered entity-segment pair greedily, and keeps
/// the structure whose rendered table has the highest total log
/// probability. Ties break toward fewer entities, then lexicographically
/// smaller split lists.
pub fn oracle_decode(p: &ProbTensor, ls: &LabelSpace) -> Result<ExtractionResult> {
    let n = p.size();
    if n > ORACLE_MAX_LEN {
        return Err(UnireError::InvalidArgument(format!(
            "oracle decoding limited to |s| <= {ORACLE_MAX_LEN}, got {n}"
        )));
    }
    let p = symmetrize(p, ls);
    let mut best: Option<(f64, Vec<usize>, ExtractionResult)> = None;
    for mask in 0..(1u32 << (n - 1)) {
        let mut splits: Vec<usize> = (1..n).filter(|&k| mask >> (k - 1) & 1 == 1).collect();
        splits.push(n);
        let mut spans = Vec::new();
        let mut start = 0;
        for &end in &splits {
            spans.push(Span::new(start, end));
            start = end;
        }
        let mut entities = Vec::new();
        for &span in &spans {
            let label = entity_type_decode(&p, ls, span);
            if label != NULL_LABEL {
                entities.push(Entity { span, entity_type: label - 1 });
            }
        }
        let relations = decode_pairwise_relations(&p, ls, &entities);
        let score = structure_log_prob(&p, ls, &entities, &relations);
        let candidate = ExtractionResult {
            entities,
            relations,
            decoder: DecoderTag::Oracle,
            split_positions: splits.clone(),
        };
        let better = match &best {
            None => true,
            Some((s, sp, res)) => {
                score > *s + 1e-12
                    || ((score - *s).abs() <= 1e-12
                        && (candidate.entities.len() < res.entities.len()
                            || (candidate.entities.len() == res.entities.len() && splits < *sp)))
            }
        };
        if better {
            best = Some((score, splits, candidate));
        }
    }
    Ok(best.expect("at least one segmentation").2)
}

/// Total log probability of the table implied by a candidate structure.
fn structure_log_prob(
    p: &ProbTensor,
    ls: &LabelSpace,
    entities: &[Entity],
    relations: &[Relation],
) -> f64 {
    let n = p.size();
    let mut implied = vec![NULL_LABEL; n * n];
    for e in entities {
        let label = ls.entity_label(e.entity_type);
        for i in e.span.start..e.span.end {
            for j in e.span.start..e.span.end {
                implied[i * n + j] = label;
            }
        }
    }
    for r in relations {
        let label = ls.relation_label(r.relation_type);
        let head = entities[r.head].span;
        let tail = entities[r.tail].span;
        for i in head.start..head.end {
            for j in tail.start..tail.end {
                implied[i * n + j] = label;
            }
        }
    }
    let mut score = 0.0;
    for i in 0..n {
        for j in 0..n {
            score += p.get(i, j, implied[i * n + j]).max(1e-300).ln();
        }
    }
    score
}

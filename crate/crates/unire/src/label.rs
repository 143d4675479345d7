//! Unified label space and the table representation of a sentence.
//!
//! Every cell of the `|s| x |s|` table carries one label from
//! `Y = Y_e ∪ Y_r ∪ {⊥}`: entity squares sit on the diagonal, relation
//! rectangles off it, and `⊥` fills everything else.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UnireError};

/// Null label `⊥`, pinned to id 0 in every serialized form.
pub const NULL_LABEL: usize = 0;

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// The unified label space: entity types, relation types and `⊥`, with a
/// distinguished symmetric subset. Entity types are always symmetric
/// (entity squares straddle the diagonal); relation types are symmetric
/// only when declared undirected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    entity_types: Vec<String>,
    relation_types: Vec<String>,
    /// Relation type names declared undirected.
    symmetric_relations: Vec<String>,
}

impl LabelSpace {
    pub fn new(
        entity_types: Vec<String>,
        relation_types: Vec<String>,
        symmetric_relations: Vec<String>,
    ) -> Result<Self> {
        if entity_types.iter().any(|t| t.is_empty()) || relation_types.iter().any(|t| t.is_empty())
        {
            return Err(UnireError::InvalidArgument("empty type name".into()));
        }
        for e in &entity_types {
            if relation_types.contains(e) {
                return Err(UnireError::InvalidArgument(format!(
                    "type name `{e}` used as both entity and relation type"
                )));
            }
        }
        for (i, t) in entity_types.iter().enumerate() {
            if entity_types[..i].contains(t) {
                return Err(UnireError::InvalidArgument(format!("duplicate entity type `{t}`")));
            }
        }
        for (i, t) in relation_types.iter().enumerate() {
            if relation_types[..i].contains(t) {
                return Err(UnireError::InvalidArgument(format!("duplicate relation type `{t}`")));
            }
        }
        for s in &symmetric_relations {
            if !relation_types.contains(s) {
                return Err(UnireError::InvalidArgument(format!(
                    "symmetric label `{s}` is not a declared relation type"
                )));
            }
        }
        Ok(LabelSpace { entity_types, relation_types, symmetric_relations })
    }

    /// Total number of labels `|Y|`, including `⊥`.
    pub fn num_labels(&self) -> usize {
        1 + self.entity_types.len() + self.relation_types.len()
    }

    pub fn num_entity_types(&self) -> usize {
        self.entity_types.len()
    }

    pub fn num_relation_types(&self) -> usize {
        self.relation_types.len()
    }

    pub fn entity_type_names(&self) -> &[String] {
        &self.entity_types
    }

    pub fn relation_type_names(&self) -> &[String] {
        &self.relation_types
    }

    pub fn symmetric_relation_names(&self) -> &[String] {
        &self.symmetric_relations
    }

    /// Label id of the `k`-th entity type (ids `1..=|Y_e|`).
    pub fn entity_label(&self, entity_type: usize) -> usize {
        debug_assert!(entity_type < self.entity_types.len());
        1 + entity_type
    }

    /// Label id of the `k`-th relation type (ids `|Y_e|+1..|Y|`).
    pub fn relation_label(&self, relation_type: usize) -> usize {
        debug_assert!(relation_type < self.relation_types.len());
        1 + self.entity_types.len() + relation_type
    }

    pub fn is_entity_label(&self, label: usize) -> bool {
        (1..=self.entity_types.len()).contains(&label)
    }

    pub fn is_relation_label(&self, label: usize) -> bool {
        label > self.entity_types.len() && label < self.num_labels()
    }

    /// Entity type index of an entity label id.
    pub fn entity_type_of(&self, label: usize) -> Option<usize> {
        self.is_entity_label(label).then(|| label - 1)
    }

    /// Relation type index of a relation label id.
    pub fn relation_type_of(&self, label: usize) -> Option<usize> {
        self.is_relation_label(label).then(|| label - 1 - self.entity_types.len())
    }

    pub fn is_symmetric_relation(&self, relation_type: usize) -> bool {
        self.symmetric_relations.contains(&self.relation_types[relation_type])
    }

    /// True for every label whose probability slice must be symmetric about
    /// the diagonal: all entity labels plus undirected relation labels.
    pub fn is_symmetric_label(&self, label: usize) -> bool {
        if self.is_entity_label(label) {
            return true;
        }
        match self.relation_type_of(label) {
            Some(r) => self.is_symmetric_relation(r),
            None => false,
        }
    }

    pub fn label_name(&self, label: usize) -> &str {
        if label == NULL_LABEL {
            "⊥"
        } else if let Some(e) = self.entity_type_of(label) {
            &self.entity_types[e]
        } else {
            &self.relation_types[label - 1 - self.entity_types.len()]
        }
    }

    pub fn entity_type_id(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == name)
    }

    pub fn relation_type_id(&self, name: &str) -> Option<usize> {
        self.relation_types.iter().position(|t| t == name)
    }
}

/// An annotated entity: half-open span plus entity type index into the
/// label space's entity type list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub span: Span,
    pub entity_type: usize,
}

/// An annotated relation between two entities (indices into the sentence's
/// entity list), with a relation type index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub head: usize,
    pub tail: usize,
    pub relation_type: usize,
}

/// A sentence with gold entities and relations. Undirected relations are
/// stored as two mirrored triplets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceAnnotation {
    pub tokens: Vec<String>,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
}

impl SentenceAnnotation {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks every structural invariant against a label space: non-empty
    /// sentence, in-range non-overlapping spans, head != tail, and mirrored
    /// triplets for undirected relation types.
    pub fn validate(&self, ls: &LabelSpace) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(UnireError::InvalidAnnotation("empty sentence".into()));
        }
        for (k, e) in self.entities.iter().enumerate() {
            if e.span.is_empty() || e.span.end > n {
                return Err(UnireError::InvalidAnnotation(format!(
                    "entity {k} span [{}, {}) out of range for |s|={n}",
                    e.span.start, e.span.end
                )));
            }
            if e.entity_type >= ls.num_entity_types() {
                return Err(UnireError::InvalidAnnotation(format!(
                    "entity {k} has unknown type id {}",
                    e.entity_type
                )));
            }
            for other in &self.entities[..k] {
                if e.span.overlaps(&other.span) {
                    return Err(UnireError::InvalidAnnotation(format!(
                        "overlapping entity spans [{}, {}) and [{}, {})",
                        other.span.start, other.span.end, e.span.start, e.span.end
                    )));
                }
            }
        }
        for (k, r) in self.relations.iter().enumerate() {
            if r.head >= self.entities.len() || r.tail >= self.entities.len() {
                return Err(UnireError::InvalidAnnotation(format!(
                    "relation {k} references missing entity"
                )));
            }
            if r.head == r.tail {
                return Err(UnireError::InvalidAnnotation(format!(
                    "relation {k} has identical head and tail"
                )));
            }
            if r.relation_type >= ls.num_relation_types() {
                return Err(UnireError::InvalidAnnotation(format!(
                    "relation {k} has unknown type id {}",
                    r.relation_type
                )));
            }
            if ls.is_symmetric_relation(r.relation_type) {
                let mirrored = Relation {
                    head: r.tail,
                    tail: r.head,
                    relation_type: r.relation_type,
                };
                if !self.relations.contains(&mirrored) {
                    return Err(UnireError::InvalidAnnotation(format!(
                        "undirected relation {k} lacks its mirrored triplet"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `|s| x |s|` matrix of gold label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTable {
    size: usize,
    cells: Vec<usize>,
}

impl GoldTable {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.cells[i * self.size + j]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }
}

/// Renders an annotation into its gold table: entity squares on the
/// diagonal, relation rectangles off it, `⊥` elsewhere.
pub fn render_gold_table(ann: &SentenceAnnotation, ls: &LabelSpace) -> Result<GoldTable> {
    ann.validate(ls)?;
    let n = ann.len();
    let mut cells = vec![NULL_LABEL; n * n];
    for e in &ann.entities {
        let label = ls.entity_label(e.entity_type);
        for i in e.span.start..e.span.end {
            for j in e.span.start..e.span.end {
                cells[i * n + j] = label;
            }
        }
    }
    for r in &ann.relations {
        let label = ls.relation_label(r.relation_type);
        let head = ann.entities[r.head].span;
        let tail = ann.entities[r.tail].span;
        for i in head.start..head.end {
            for j in tail.start..tail.end {
                let cell = &mut cells[i * n + j];
                if ls.is_entity_label(*cell) {
                    return Err(UnireError::Internal(format!(
                        "relation label would overwrite entity cell ({i}, {j})"
                    )));
                }
                *cell = label;
            }
        }
    }
    Ok(GoldTable { size: n, cells })
}

/// `|s| x |s| x |Y|` tensor of per-cell label probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTensor {
    size: usize,
    labels: usize,
    values: Vec<f64>,
}

impl ProbTensor {
    pub fn from_values(size: usize, labels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size * labels {
            return Err(UnireError::InvalidArgument(format!(
                "tensor value count {} does not match {size}x{size}x{labels}",
                values.len()
            )));
        }
        Ok(ProbTensor { size, labels, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        self.values[(i * self.size + j) * self.labels + t]
    }

    pub fn set(&mut self, i: usize, j: usize, t: usize, v: f64) {
        self.values[(i * self.size + j) * self.labels + t] = v;
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let base = (i * self.size + j) * self.labels;
        &self.values[base..base + self.labels]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks that every cell is a probability distribution: entries in
    /// `[0, 1]` and rows summing to one within `1e-6`.
    pub fn check_distribution(&self) -> Result<()> {
        for i in 0..self.size {
            for j in 0..self.size {
                let cell = self.cell(i, j);
                let sum: f64 = cell.iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(UnireError::Numeric {
                        location: format!("cell ({i}, {j})"),
                        message: format!("probabilities sum to {sum}"),
                    });
                }
                if cell.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                    return Err(UnireError::Numeric {
                        location: format!("cell ({i}, {j})"),
                        message: "probability outside [0, 1]".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Per-cell argmax table; ties go to the smallest label id.
    pub fn argmax_table(&self) -> GoldTable {
        let mut cells = Vec::with_capacity(self.size * self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                cells.push(argmax(self.cell(i, j)));
            }
        }
        GoldTable { size: self.size, cells }
    }
}

/// Index of the maximum value; ties break toward the smallest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Expands a gold table into a probability tensor: `1 - eps*(|Y|-1)` at the
/// gold label, `eps` elsewhere. Used as a decoder test fixture.
pub fn one_hot_tensor(table: &GoldTable, labels: usize, eps: f64) -> Result<ProbTensor> {
    if eps < 0.0 || eps * labels as f64 >= 1.0 {
        return Err(UnireError::InvalidArgument(format!(
            "smoothing eps={eps} infeasible for {labels} labels"
        )));
    }
    let n = table.size;
    let gold_mass = 1.0 - eps * (labels as f64 - 1.0);
    let mut values = vec![eps; n * n * labels];
    for i in 0..n {
        for j in 0..n {
            values[(i * n + j) * labels + table.get(i, j)] = gold_mass;
        }
    }
    Ok(ProbTensor { size: n, labels, values })
}

/// Averages each symmetric label's slice with its transpose, leaving the
/// other labels untouched. Rows may deviate from sum-1 afterwards; decoding
/// consumes per-label scores only, so no renormalization is applied.
pub fn symmetrize(p: &ProbTensor, ls: &LabelSpace) -> ProbTensor {
    let mut out = p.clone();
    let n = p.size;
    for t in 0..p.labels {
        if !ls.is_symmetric_label(t) {
            continue;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (p.get(i, j, t) + p.get(j, i, t));
                out.set(i, j, t, avg);
                out.set(j, i, t, avg);
            }
        }
    }
    out
}

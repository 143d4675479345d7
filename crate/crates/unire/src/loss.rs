//! The three training objectives: per-cell cross entropy, the symmetry
//! penalty on undirected label slices, and the hinge-style implication
//! penalty tying relation probabilities to their argument entities.
//!
//! Each loss returns its value together with its (sub)gradient; the entry
//! loss differentiates w.r.t. logits directly (softmax cross entropy),
//! the structural losses w.r.t. the clean probability tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UnireError};
use crate::label::{GoldTable, LabelSpace, ProbTensor};

/// Value of one loss evaluation plus its component breakdown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_entry: f64,
    pub l_sym: f64,
    pub l_imp: f64,
    pub total: f64,
}

impl LossReport {
    pub fn add(&mut self, other: &LossReport) {
        self.l_entry += other.l_entry;
        self.l_sym += other.l_sym;
        self.l_imp += other.l_imp;
        self.total += other.total;
    }

    pub fn scale(&mut self, f: f64) {
        self.l_entry *= f;
        self.l_sym *= f;
        self.l_imp *= f;
        self.total *= f;
    }
}

/// Cross-entropy over all cells, normalized by `|s|^2`. Returns the loss
/// and its gradient w.r.t. the (possibly dropped) logits that produced
/// `p`: `(p - onehot) / |s|^2`. Probabilities at the gold label are
/// clamped at `1e-12`; the number of clamped cells is returned for
/// diagnostics.
pub fn loss_entry(p: &ProbTensor, gold: &GoldTable) -> Result<(f64, Vec<f64>, usize)> {
    if p.size() != gold.size() {
        return Err(UnireError::InvalidArgument(format!(
            "tensor size {} does not match table size {}",
            p.size(),
            gold.size()
        )));
    }
    let n = p.size();
    let y = p.labels();
    let norm = 1.0 / (n * n) as f64;
    let mut loss = 0.0;
    let mut clamped = 0;
    let mut grad = vec![0.0; n * n * y];
    for i in 0..n {
        for j in 0..n {
            let gold_label = gold.get(i, j);
            let pg = p.get(i, j, gold_label);
            if pg < 1e-12 {
                clamped += 1;
            }
            loss -= pg.max(1e-12).ln();
            for t in 0..y {
                let target = if t == gold_label { 1.0 } else { 0.0 };
                grad[(i * n + j) * y + t] = (p.get(i, j, t) - target) * norm;
            }
        }
    }
    Ok((loss * norm, grad, clamped))
}

/// Symmetry loss: mean absolute asymmetry of every symmetric label slice,
/// summed over all ordered cell pairs. Returns the loss and its gradient
/// w.r.t. the clean probability tensor (subgradient 0 at exact equality).
pub fn loss_sym(p: &ProbTensor, ls: &LabelSpace) -> (f64, Vec<f64>) {
    let n = p.size();
    let y = p.labels();
    let norm = 1.0 / (n * n) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * n * y];
    for t in 0..y {
        if !ls.is_symmetric_label(t) {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let diff = p.get(i, j, t) - p.get(j, i, t);
                loss += diff.abs();
                // The ordered pairs (i, j) and (j, i) both contain a term
                // in P[i][j][t], so the derivative is twice the sign; at
                // diff == 0 the subgradient is 0.
                if diff != 0.0 {
                    grad[(i * n + j) * y + t] += 2.0 * diff.signum() * norm;
                }
            }
        }
    }
    (loss * norm, grad)
}

/// Implication loss: for each diagonal position, the best relation
/// probability anywhere in its row or column must not exceed its best
/// diagonal entity probability; violations are penalized linearly, with
/// no margin. The subgradient routes +1 to the unique relation argmax
/// cell and -1 to the entity argmax cell, ties broken toward the smallest
/// (row, column, label) triple.
pub fn loss_imp(p: &ProbTensor, ls: &LabelSpace) -> (f64, Vec<f64>) {
    let n = p.size();
    let y = p.labels();
    let norm = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * n * y];
    for i in 0..n {
        // Best relation probability over row i and column i.
        let mut rel_best = f64::NEG_INFINITY;
        let mut rel_arg = (0, 0, 0);
        for r in 0..n {
            // Cells (i, r, l) and (r, i, l); scan in (row, col, label)
            // order for deterministic ties.
            for &(row, col) in &[(i, r), (r, i)] {
                for l in 0..ls.num_relation_types() {
                    let label = ls.relation_label(l);
                    let v = p.get(row, col, label);
                    if v > rel_best
                        || (v == rel_best && (row, col, label) < rel_arg)
                    {
                        rel_best = v;
                        rel_arg = (row, col, label);
                    }
                }
            }
        }
        // Best entity probability on the diagonal cell.
        let mut ent_best = f64::NEG_INFINITY;
        let mut ent_label = 0;
        for e in 0..ls.num_entity_types() {
            let label = ls.entity_label(e);
            let v = p.get(i, i, label);
            if v > ent_best {
                ent_best = v;
                ent_label = label;
            }
        }
        if ls.num_relation_types() == 0 || ls.num_entity_types() == 0 {
            continue;
        }
        let hinge = rel_best - ent_best;
        if hinge > 0.0 {
            loss += hinge;
            let (row, col, label) = rel_arg;
            grad[(row * n + col) * y + label] += norm;
            grad[(i * n + i) * y + ent_label] -= norm;
        }
    }
    (loss * norm, grad)
}

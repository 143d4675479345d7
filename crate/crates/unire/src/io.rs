//! File formats: JSON-lines corpora with a label-space sidecar, the
//! binary tensor container, prediction files, training logs and CSV
//! reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decode::{DecoderTag, ExtractionResult};
use crate::error::{Result, UnireError};
use crate::eval::{DistanceHistogram, SweepRow, HIST_BINS, HIST_BIN_WIDTH};
use crate::label::{Entity, LabelSpace, ProbTensor, Relation, SentenceAnnotation, Span};

// --- corpus (JSON lines, one sentence per line) ---

#[derive(Serialize, Deserialize)]
struct JsonEntity {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    entity_type: String,
}

#[derive(Serialize, Deserialize)]
struct JsonRelation {
    head: usize,
    tail: usize,
    #[serde(rename = "type")]
    relation_type: String,
}

#[derive(Serialize, Deserialize)]
struct JsonSentence {
    tokens: Vec<String>,
    entities: Vec<JsonEntity>,
    relations: Vec<JsonRelation>,
}

pub fn write_corpus(path: &Path, corpus: &[SentenceAnnotation], ls: &LabelSpace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ann in corpus {
        let line = JsonSentence {
            tokens: ann.tokens.clone(),
            entities: ann
                .entities
                .iter()
                .map(|e| JsonEntity {
                    start: e.span.start,
                    end: e.span.end,
                    entity_type: ls.entity_type_names()[e.entity_type].clone(),
                })
                .collect(),
            relations: ann
                .relations
                .iter()
                .map(|r| JsonRelation {
                    head: r.head,
                    tail: r.tail,
                    relation_type: ls.relation_type_names()[r.relation_type].clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus(path: &Path, ls: &LabelSpace) -> Result<Vec<SentenceAnnotation>> {
    let reader = BufReader::new(File::open(path)?);
    let mut corpus = Vec::new();
    for (num, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonSentence = serde_json::from_str(&line).map_err(|e| UnireError::Format {
            path: path.display().to_string(),
            message: format!("line {}: {e}", num + 1),
        })?;
        let mut entities = Vec::with_capacity(parsed.entities.len());
        for e in parsed.entities {
            let entity_type = ls.entity_type_id(&e.entity_type).ok_or_else(|| {
                UnireError::Format {
                    path: path.display().to_string(),
                    message: format!("line {}: unknown entity type `{}`", num + 1, e.entity_type),
                }
            })?;
            entities.push(Entity { span: Span::new(e.start, e.end), entity_type });
        }
        let mut relations = Vec::with_capacity(parsed.relations.len());
        for r in parsed.relations {
            let relation_type = ls.relation_type_id(&r.relation_type).ok_or_else(|| {
                UnireError::Format {
                    path: path.display().to_string(),
                    message: format!(
                        "line {}: unknown relation type `{}`",
                        num + 1,
                        r.relation_type
                    ),
                }
            })?;
            relations.push(Relation { head: r.head, tail: r.tail, relation_type });
        }
        let ann = SentenceAnnotation { tokens: parsed.tokens, entities, relations };
        ann.validate(ls)?;
        corpus.push(ann);
    }
    Ok(corpus)
}

// --- label space sidecar ---

#[derive(Serialize, Deserialize)]
struct JsonLabelSpace {
    entity_types: Vec<String>,
    relation_types: Vec<String>,
    symmetric: Vec<String>,
}

pub fn write_label_space(path: &Path, ls: &LabelSpace) -> Result<()> {
    let sidecar = JsonLabelSpace {
        entity_types: ls.entity_type_names().to_vec(),
        relation_types: ls.relation_type_names().to_vec(),
        symmetric: ls.symmetric_relation_names().to_vec(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &sidecar)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_label_space(path: &Path) -> Result<LabelSpace> {
    let parsed: JsonLabelSpace = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    LabelSpace::new(parsed.entity_types, parsed.relation_types, parsed.symmetric)
}

// --- binary tensor container ---

const TENSOR_MAGIC: &[u8; 5] = b"URTN1";

/// Writes a tensor: magic `URTN1`, little-endian u32 `|s|` and `|Y|`, a
/// label-name table (u32 count, then u32-length-prefixed UTF-8 names in
/// label-id order), then row-major little-endian f32 values.
pub fn write_tensor<W: Write>(p: &ProbTensor, ls: &LabelSpace, mut w: W) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(p.size() as u32).to_le_bytes())?;
    w.write_all(&(p.labels() as u32).to_le_bytes())?;
    w.write_all(&(ls.num_labels() as u32).to_le_bytes())?;
    for label in 0..ls.num_labels() {
        let name = ls.label_name(label).as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
    }
    for &v in p.values() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<(ProbTensor, Vec<String>)> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(UnireError::Format {
            path: "<tensor>".into(),
            message: "bad magic bytes".into(),
        });
    }
    let mut u32_buf = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u32_buf)?;
        Ok(u32::from_le_bytes(u32_buf))
    };
    let size = read_u32(&mut r)? as usize;
    let labels = read_u32(&mut r)? as usize;
    let name_count = read_u32(&mut r)? as usize;
    let mut names = Vec::with_capacity(name_count);
    for _ in 0..name_count {
        let len = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|_| UnireError::Format {
            path: "<tensor>".into(),
            message: "label name is not valid UTF-8".into(),
        })?);
    }
    let mut values = vec![0.0f64; size * size * labels];
    let mut f32_buf = [0u8; 4];
    for v in &mut values {
        r.read_exact(&mut f32_buf)?;
        *v = f32::from_le_bytes(f32_buf) as f64;
    }
    Ok((ProbTensor::from_values(size, labels, values)?, names))
}

pub fn write_tensor_file(path: &Path, p: &ProbTensor, ls: &LabelSpace) -> Result<()> {
    write_tensor(p, ls, BufWriter::new(File::create(path)?))
}

pub fn read_tensor_file(path: &Path) -> Result<(ProbTensor, Vec<String>)> {
    read_tensor(BufReader::new(File::open(path)?)).map_err(|e| match e {
        UnireError::Format { message, .. } => UnireError::Format {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

// --- predictions ---

#[derive(Serialize, Deserialize)]
struct JsonPrediction {
    entities: Vec<JsonEntity>,
    relations: Vec<JsonPredRelation>,
    decoder: DecoderTag,
    splits: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct JsonPredRelation {
    head: usize,
    tail: usize,
    #[serde(rename = "type")]
    relation_type: String,
}

pub fn write_predictions(
    path: &Path,
    preds: &[ExtractionResult],
    ls: &LabelSpace,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for pred in preds {
        let line = JsonPrediction {
            entities: pred
                .entities
                .iter()
                .map(|e| JsonEntity {
                    start: e.span.start,
                    end: e.span.end,
                    entity_type: ls.entity_type_names()[e.entity_type].clone(),
                })
                .collect(),
            relations: pred
                .relations
                .iter()
                .map(|r| JsonPredRelation {
                    head: r.head,
                    tail: r.tail,
                    relation_type: ls.relation_type_names()[r.relation_type].clone(),
                })
                .collect(),
            decoder: pred.decoder,
            splits: pred.split_positions.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions(path: &Path, ls: &LabelSpace) -> Result<Vec<ExtractionResult>> {
    let reader = BufReader::new(File::open(path)?);
    let mut preds = Vec::new();
    for (num, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonPrediction =
            serde_json::from_str(&line).map_err(|e| UnireError::Format {
                path: path.display().to_string(),
                message: format!("line {}: {e}", num + 1),
            })?;
        let entities = parsed
            .entities
            .iter()
            .map(|e| {
                ls.entity_type_id(&e.entity_type)
                    .map(|entity_type| Entity { span: Span::new(e.start, e.end), entity_type })
                    .ok_or_else(|| UnireError::Format {
                        path: path.display().to_string(),
                        message: format!("line {}: unknown entity type `{}`", num + 1, e.entity_type),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let relations = parsed
            .relations
            .iter()
            .map(|r| {
                ls.relation_type_id(&r.relation_type)
                    .map(|relation_type| Relation { head: r.head, tail: r.tail, relation_type })
                    .ok_or_else(|| UnireError::Format {
                        path: path.display().to_string(),
                        message: format!(
                            "line {}: unknown relation type `{}`",
                            num + 1,
                            r.relation_type
                        ),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        preds.push(ExtractionResult {
            entities,
            relations,
            decoder: parsed.decoder,
            split_positions: parsed.splits,
        });
    }
    Ok(preds)
}

// --- CSV reports ---

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "alpha,span_f1,entity_f1,relation_f1")?;
    for row in rows {
        writeln!(
            w,
            "{:.3},{:.6},{:.6},{:.6}",
            row.alpha, row.span_f1, row.entity_f1, row.relation_f1
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(hist: &DistanceHistogram, mut w: W) -> Result<()> {
    writeln!(w, "bin_lo,bin_hi,ent_bound,non_ent_bound")?;
    for bin in 0..=HIST_BINS {
        let lo = bin as f64 * HIST_BIN_WIDTH;
        let hi = if bin == HIST_BINS { f64::INFINITY } else { lo + HIST_BIN_WIDTH };
        writeln!(w, "{lo:.1},{hi:.1},{},{}", hist.ent_bound[bin], hist.non_ent_bound[bin])?;
    }
    Ok(())
}

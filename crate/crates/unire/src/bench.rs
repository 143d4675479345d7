//! Wall-clock comparison of the decoders and a scaling probe for the
//! span-splitting stage.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decode::{
    hard_decode, joint_decode, oracle_decode, DecodeConfig, DecoderTag, ORACLE_MAX_LEN,
};
use crate::error::{Result, UnireError};
use crate::label::{LabelSpace, ProbTensor};

/// Throughput of one decoder over a fixed tensor set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub decoder: DecoderTag,
    pub sentences: usize,
    pub median_secs: f64,
    pub sentences_per_sec: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

fn time_runs<F: FnMut()>(runs: usize, mut f: F) -> f64 {
    f(); // warmup, excluded
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        f();
        times.push(t.elapsed().as_secs_f64());
    }
    median(times)
}

/// Times each requested decoder over the whole tensor set, `runs` timed
/// passes after one warmup pass, reporting the median.
pub fn bench_decoders(
    tensors: &[ProbTensor],
    ls: &LabelSpace,
    cfg: &DecodeConfig,
    decoders: &[DecoderTag],
    runs: usize,
) -> Result<Vec<BenchRow>> {
    if tensors.is_empty() {
        return Err(UnireError::InvalidArgument("no tensors to benchmark".into()));
    }
    if runs == 0 {
        return Err(UnireError::InvalidArgument("runs must be positive".into()));
    }
    if decoders.contains(&DecoderTag::Oracle)
        && tensors.iter().any(|p| p.size() > ORACLE_MAX_LEN)
    {
        return Err(UnireError::InvalidArgument(format!(
            "oracle decoding is limited to sentences of length {ORACLE_MAX_LEN}"
        )));
    }
    let mut rows = Vec::new();
    for &tag in decoders {
        let secs = time_runs(runs, || {
            for p in tensors {
                match tag {
                    DecoderTag::Joint => {
                        std::hint::black_box(joint_decode(p, ls, cfg));
                    }
                    DecoderTag::Hard => {
                        std::hint::black_box(hard_decode(p, ls));
                    }
                    DecoderTag::Oracle => {
                        std::hint::black_box(oracle_decode(p, ls).unwrap());
                    }
                }
            }
        });
        rows.push(BenchRow {
            decoder: tag,
            sentences: tensors.len(),
            median_secs: secs,
            sentences_per_sec: tensors.len() as f64 / secs,
        });
    }
    Ok(rows)
}

/// Median time of the full joint decode for a single tensor; used by the
/// scaling check, which fits time against |s|^2 * |Y|.
pub fn time_joint_decode(p: &ProbTensor, ls: &LabelSpace, cfg: &DecodeConfig, runs: usize) -> f64 {
    time_runs(runs, || {
        std::hint::black_box(joint_decode(p, ls, cfg));
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusGenerator, GenConfig};
    use crate::label::{one_hot_tensor, render_gold_table};

    #[test]
    fn bench_reports_all_requested_decoders() {
        let mut g = CorpusGenerator::new(GenConfig {
            seed: 7,
            sentence_len: (4, 7),
            ..GenConfig::default()
        })
        .unwrap();
        let ls = g.label_space().clone();
        let tensors: Vec<ProbTensor> = g
            .generate_corpus(5)
            .unwrap()
            .iter()
            .map(|ann| {
                one_hot_tensor(&render_gold_table(ann, &ls).unwrap(), ls.num_labels(), 0.01)
                    .unwrap()
            })
            .collect();
        let rows = bench_decoders(
            &tensors,
            &ls,
            &DecodeConfig::default(),
            &[DecoderTag::Joint, DecoderTag::Hard, DecoderTag::Oracle],
            5,
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.median_secs > 0.0 && r.sentences_per_sec > 0.0));
    }

    #[test]
    fn median_of_even_and_odd_counts() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

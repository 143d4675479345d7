//! Sweep the span-split threshold over noisy tensors and print the
//! resulting F1 curve.

use unire::corpus::{corrupt_tensor, CorpusGenerator, GenConfig, NoiseConfig, NoiseMode};
use unire::eval::{default_alpha_grid, threshold_sweep};
use unire::label::one_hot_tensor;
use unire::{render_gold_table, DecodeConfig};

fn main() {
    let mut gen = CorpusGenerator::new(GenConfig { seed: 5, ..GenConfig::default() }).unwrap();
    let ls = gen.label_space().clone();
    let corpus = gen.generate_corpus(100).unwrap();
    let tensors: Vec<_> = corpus
        .iter()
        .enumerate()
        .map(|(k, ann)| {
            let table = render_gold_table(ann, &ls).unwrap();
            let p = one_hot_tensor(&table, ls.num_labels(), 0.01).unwrap();
            let noise =
                NoiseConfig { mode: NoiseMode::DirichletJitter, sigma: 0.3, seed: k as u64 };
            corrupt_tensor(&p, &noise).unwrap()
        })
        .collect();

    let rows = threshold_sweep(
        &tensors,
        &corpus,
        &ls,
        &DecodeConfig::default(),
        &default_alpha_grid(),
    )
    .unwrap();
    println!("alpha  span-F1  entity-F1  relation-F1");
    for r in rows {
        println!(
            "{:>5.2}  {:>7.4}  {:>9.4}  {:>11.4}",
            r.alpha, r.span_f1, r.entity_f1, r.relation_f1
        );
    }
}

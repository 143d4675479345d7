//! Measure how often joint decoding corrects cell-level label flips:
//! the fraction of sentences recovered exactly as noise increases.

use unire::corpus::{corrupt_tensor, CorpusGenerator, GenConfig, NoiseConfig, NoiseMode};
use unire::label::one_hot_tensor;
use unire::{joint_decode, render_gold_table, DecodeConfig};

fn main() {
    let mut gen = CorpusGenerator::new(GenConfig { seed: 2, ..GenConfig::default() }).unwrap();
    let ls = gen.label_space().clone();
    let corpus = gen.generate_corpus(200).unwrap();
    let cfg = DecodeConfig::default();

    println!("sigma  exact-recovery");
    for sigma in [0.0, 0.05, 0.1, 0.2, 0.3, 0.5] {
        let mut exact = 0;
        for (k, ann) in corpus.iter().enumerate() {
            let table = render_gold_table(ann, &ls).unwrap();
            let p = one_hot_tensor(&table, ls.num_labels(), 0.01).unwrap();
            let noise = NoiseConfig { mode: NoiseMode::LabelFlip, sigma, seed: k as u64 };
            let noisy = corrupt_tensor(&p, &noise).unwrap();
            if joint_decode(&noisy, &ls, &cfg).entities == ann.entities {
                exact += 1;
            }
        }
        println!("{sigma:>5.2}  {:>7.1}%", 100.0 * exact as f64 / corpus.len() as f64);
    }
}

//! Train the biaffine table scorer on a synthetic separable corpus and
//! print the learning curve.

use unire::corpus::{CorpusGenerator, GenConfig};
use unire::{train, DecodeConfig, TrainConfig};

fn main() {
    let mut gen = CorpusGenerator::new(GenConfig {
        seed: 7,
        vocab: 120,
        num_entity_types: 2,
        num_relation_types: 1,
        num_symmetric_relations: 0,
        relation_density: 1.0,
        ..GenConfig::default()
    })
    .unwrap();
    let ls = gen.label_space().clone();
    let train_set = gen.generate_corpus(120).unwrap();
    let dev_set = gen.generate_corpus(40).unwrap();

    let cfg = TrainConfig {
        d: 16,
        d_emb: 16,
        learning_rate: 0.03,
        batch_size: 16,
        max_epochs: 80,
        patience: 15,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&train_set, &dev_set, &ls, &cfg, &DecodeConfig::default()).unwrap();

    println!("epoch  entry-loss  dev-ent-F1  dev-rel-F1");
    for r in out.log.iter().filter(|r| r.epoch % 5 == 0 || r.epoch + 1 == out.log.len()) {
        println!(
            "{:>5}  {:>10.4}  {:>10.4}  {:>10.4}",
            r.epoch, r.l_entry, r.dev_ent_f1, r.dev_rel_f1
        );
    }
    println!(
        "\nbest epoch {} with mean dev F1 {:.4}",
        out.best_epoch, out.best_dev_f1
    );
}

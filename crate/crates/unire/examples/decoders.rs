//! Compare the three decoders on noisy renderings of the same corpus.

use unire::corpus::{corrupt_tensor, CorpusGenerator, GenConfig, NoiseConfig, NoiseMode};
use unire::eval::strict_eval_corpus;
use unire::label::one_hot_tensor;
use unire::{hard_decode, joint_decode, oracle_decode, render_gold_table, DecodeConfig};

fn main() {
    let mut gen = CorpusGenerator::new(GenConfig {
        seed: 13,
        sentence_len: (3, 6),
        num_entity_types: 2,
        num_relation_types: 2,
        num_symmetric_relations: 1,
        relation_density: 0.8,
        entity_len: (1, 2),
        entities_per_sentence: (0, 2),
        ..GenConfig::default()
    })
    .unwrap();
    let ls = gen.label_space().clone();
    let corpus = gen.generate_corpus(150).unwrap();
    let cfg = DecodeConfig::default();

    println!("sigma  decoder  entity-F1  relation-F1");
    for sigma in [0.0, 0.2, 0.4] {
        let tensors: Vec<_> = corpus
            .iter()
            .enumerate()
            .map(|(k, ann)| {
                let table = render_gold_table(ann, &ls).unwrap();
                let p = one_hot_tensor(&table, ls.num_labels(), 0.02).unwrap();
                let noise =
                    NoiseConfig { mode: NoiseMode::LabelFlip, sigma, seed: 40 + k as u64 };
                corrupt_tensor(&p, &noise).unwrap()
            })
            .collect();
        for (name, decode) in [
            ("joint", Box::new(|p: &_| joint_decode(p, &ls, &cfg)) as Box<dyn Fn(&_) -> _>),
            ("hard", Box::new(|p: &_| hard_decode(p, &ls))),
            ("oracle", Box::new(|p: &_| oracle_decode(p, &ls).unwrap())),
        ] {
            let preds: Vec<_> = tensors.iter().map(|p| decode(p)).collect();
            let report = strict_eval_corpus(&preds, &corpus, &ls).unwrap();
            println!(
                "{sigma:>5}  {name:<7}  {:>9.4}  {:>11.4}",
                report.entity.f1(),
                report.relation.f1()
            );
        }
    }
}

//! Render a small annotated sentence into its label table and decode it
//! back, printing the table along the way.

use unire::label::one_hot_tensor;
use unire::{
    joint_decode, render_gold_table, DecodeConfig, Entity, LabelSpace, Relation,
    SentenceAnnotation, Span,
};

fn main() {
    let ls = LabelSpace::new(
        vec!["PER".into(), "GPE".into()],
        vec!["PHYS".into(), "SOC".into()],
        vec!["SOC".into()],
    )
    .unwrap();

    let ann = SentenceAnnotation {
        tokens: ["David", "Perkins", "and", "his", "wife", "live", "in", "Oakland"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        entities: vec![
            Entity { span: Span::new(0, 2), entity_type: 0 },
            Entity { span: Span::new(3, 5), entity_type: 0 },
            Entity { span: Span::new(7, 8), entity_type: 1 },
        ],
        relations: vec![
            Relation { head: 0, tail: 1, relation_type: 1 },
            Relation { head: 1, tail: 0, relation_type: 1 },
            Relation { head: 1, tail: 2, relation_type: 0 },
        ],
    };
    ann.validate(&ls).unwrap();

    let table = render_gold_table(&ann, &ls).unwrap();
    println!("label table ({} = no entity/relation):", ls.label_name(0));
    for i in 0..table.size() {
        let row: Vec<&str> = (0..table.size()).map(|j| ls.label_name(table.get(i, j))).collect();
        println!("  {row:?}");
    }

    let p = one_hot_tensor(&table, ls.num_labels(), 0.01).unwrap();
    let result = joint_decode(&p, &ls, &DecodeConfig::default());
    println!("\ndecoded entities:");
    for e in &result.entities {
        println!(
            "  {:?} -> {}",
            &ann.tokens[e.span.start..e.span.end],
            ls.entity_type_names()[e.entity_type]
        );
    }
    println!("decoded relations:");
    for r in &result.relations {
        println!(
            "  {} --{}--> {}",
            ann.tokens[result.entities[r.head].span.start],
            ls.relation_type_names()[r.relation_type],
            ann.tokens[result.entities[r.tail].span.start]
        );
    }
}

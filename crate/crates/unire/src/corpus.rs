//! Synthetic corpus generation and tensor noise injection.
//!
//! Sentences are built over a vocabulary partitioned into one token pool
//! per entity type plus a background pool. At signal strength 1 the pools
//! are used exclusively, so cell labels become a function of the token
//! pair and a lookup model can reach perfect accuracy. Relations follow a
//! seeded type-pair mapping: a pair of entity types either always yields
//! the same relation (in a fixed direction, or mirrored when undirected)
//! or never does. Each sentence contains at most one entity per type,
//! with at least one background token between entities, so distinct
//! entities are always separable in the rendered table.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UnireError};
use crate::label::{
    Entity, LabelSpace, ProbTensor, Relation, SentenceAnnotation, Span,
};
use crate::model::{PAD_ID, UNK_ID};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub sentence_len: (usize, usize),
    pub vocab: usize,
    pub num_entity_types: usize,
    pub num_relation_types: usize,
    /// How many of the relation types are undirected.
    pub num_symmetric_relations: usize,
    pub entities_per_sentence: (usize, usize),
    pub entity_len: (usize, usize),
    /// Probability that an entity-type pair carries a relation in the
    /// generating mapping.
    pub relation_density: f64,
    /// Cap on relation triplets per sentence; mirrored pairs are dropped
    /// or kept atomically.
    pub max_relations: usize,
    /// 1.0 = tokens drawn strictly from their type's pool.
    pub signal_strength: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            sentence_len: (6, 14),
            vocab: 200,
            num_entity_types: 3,
            num_relation_types: 2,
            num_symmetric_relations: 1,
            entities_per_sentence: (0, 3),
            entity_len: (1, 3),
            relation_density: 0.6,
            max_relations: usize::MAX,
            signal_strength: 1.0,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.sentence_len.0 == 0 || self.sentence_len.0 > self.sentence_len.1 {
            return Err(UnireError::InvalidArgument("degenerate sentence length range".into()));
        }
        if self.entity_len.0 == 0 || self.entity_len.0 > self.entity_len.1 {
            return Err(UnireError::InvalidArgument("degenerate entity length range".into()));
        }
        if self.entities_per_sentence.0 > self.entities_per_sentence.1 {
            return Err(UnireError::InvalidArgument("degenerate entity count range".into()));
        }
        if !(0.0..=1.0).contains(&self.relation_density)
            || !(0.0..=1.0).contains(&self.signal_strength)
        {
            return Err(UnireError::InvalidArgument("densities must be in [0, 1]".into()));
        }
        if self.num_symmetric_relations > self.num_relation_types {
            return Err(UnireError::InvalidArgument(
                "more symmetric relations than relation types".into(),
            ));
        }
        if self.vocab < 2 + 2 * (self.num_entity_types + 1) {
            return Err(UnireError::InvalidArgument(format!(
                "vocab {} too small for {} token pools",
                self.vocab,
                self.num_entity_types + 1
            )));
        }
        Ok(())
    }
}

/// What a pair of entity types generates: nothing, a directed relation
/// from the first to the second listed type, or a mirrored pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairRule {
    None,
    Directed { from: usize, to: usize, relation_type: usize },
    Symmetric { relation_type: usize },
}

/// Fully deterministic generator over a seeded RNG.
pub struct CorpusGenerator {
    cfg: GenConfig,
    label_space: LabelSpace,
    /// `rules[a * k + b]` for unordered type pairs `a <= b`.
    rules: Vec<PairRule>,
    /// Token-id pools: one per entity type, then the background pool.
    pools: Vec<Vec<usize>>,
    rng: ChaCha8Rng,
}

impl CorpusGenerator {
    pub fn new(cfg: GenConfig) -> Result<Self> {
        cfg.validate()?;
        let entity_types: Vec<String> =
            (0..cfg.num_entity_types).map(|k| format!("ENT{k}")).collect();
        let relation_types: Vec<String> =
            (0..cfg.num_relation_types).map(|k| format!("REL{k}")).collect();
        let symmetric: Vec<String> =
            relation_types.iter().take(cfg.num_symmetric_relations).cloned().collect();
        let label_space = LabelSpace::new(entity_types, relation_types, symmetric)?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let k = cfg.num_entity_types;
        let mut rules = vec![PairRule::None; k * k];
        if cfg.num_relation_types > 0 {
            for a in 0..k {
                for b in (a + 1)..k {
                    if rng.gen::<f64>() >= cfg.relation_density {
                        continue;
                    }
                    let relation_type = rng.gen_range(0..cfg.num_relation_types);
                    let rule = if label_space.is_symmetric_relation(relation_type) {
                        PairRule::Symmetric { relation_type }
                    } else if rng.gen::<bool>() {
                        PairRule::Directed { from: a, to: b, relation_type }
                    } else {
                        PairRule::Directed { from: b, to: a, relation_type }
                    };
                    rules[a * k + b] = rule;
                }
            }
        }

        // Partition the non-reserved vocabulary into equal pools.
        let usable: Vec<usize> = (2..cfg.vocab).collect();
        let num_pools = k + 1;
        let pool_size = usable.len() / num_pools;
        let pools: Vec<Vec<usize>> = (0..num_pools)
            .map(|p| {
                let start = p * pool_size;
                let end = if p + 1 == num_pools { usable.len() } else { start + pool_size };
                usable[start..end].to_vec()
            })
            .collect();

        Ok(CorpusGenerator { cfg, label_space, rules, pools, rng })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    /// Entity type a token id belongs to at full signal, or `None` for
    /// background/reserved ids.
    pub fn pool_of(&self, token_id: usize) -> Option<usize> {
        self.pools
            .iter()
            .take(self.cfg.num_entity_types)
            .position(|pool| pool.contains(&token_id))
    }

    fn draw_token(&mut self, pool: usize) -> usize {
        if self.rng.gen::<f64>() < self.cfg.signal_strength {
            *self.pools[pool].choose(&mut self.rng).unwrap()
        } else {
            let all = self.rng.gen_range(2..self.cfg.vocab);
            all
        }
    }

    /// Generates one sentence; retries placement a bounded number of
    /// times before giving up on an infeasible configuration.
    pub fn generate_sentence(&mut self) -> Result<SentenceAnnotation> {
        for _ in 0..64 {
            if let Some(ann) = self.try_generate()? {
                debug_assert!(ann.validate(&self.label_space).is_ok());
                return Ok(ann);
            }
        }
        Err(UnireError::InvalidArgument(
            "could not place entities within the configured sentence length".into(),
        ))
    }

    fn try_generate(&mut self) -> Result<Option<SentenceAnnotation>> {
        let cfg = self.cfg.clone();
        let len = self.rng.gen_range(cfg.sentence_len.0..=cfg.sentence_len.1);
        let max_count = cfg.entities_per_sentence.1.min(cfg.num_entity_types);
        let min_count = cfg.entities_per_sentence.0.min(max_count);
        let count = self.rng.gen_range(min_count..=max_count);

        // One entity per type: sample distinct types.
        let mut types: Vec<usize> = (0..cfg.num_entity_types).collect();
        types.shuffle(&mut self.rng);
        types.truncate(count);

        let lengths: Vec<usize> = (0..count)
            .map(|_| self.rng.gen_range(cfg.entity_len.0..=cfg.entity_len.1))
            .collect();
        let used: usize = lengths.iter().sum::<usize>() + count.saturating_sub(1);
        if used > len {
            return Ok(None);
        }

        // Distribute the free tokens over the count + 1 gaps; interior
        // gaps already reserve one separator token.
        let mut gaps = vec![0usize; count + 1];
        for k in 1..count {
            gaps[k] = 1;
        }
        for _ in 0..(len - used) {
            let slot = self.rng.gen_range(0..gaps.len());
            gaps[slot] += 1;
        }

        let background = cfg.num_entity_types; // index of the ⊥ pool
        let mut tokens = Vec::with_capacity(len);
        let mut entities = Vec::with_capacity(count);
        for (k, (&entity_type, &elen)) in types.iter().zip(&lengths).enumerate() {
            for _ in 0..gaps[k] {
                let t = self.draw_token(background);
                tokens.push(t);
            }
            let start = tokens.len();
            for _ in 0..elen {
                let t = self.draw_token(entity_type);
                tokens.push(t);
            }
            entities.push(Entity { span: Span::new(start, start + elen), entity_type });
        }
        for _ in 0..gaps[count] {
            let t = self.draw_token(background);
            tokens.push(t);
        }
        debug_assert_eq!(tokens.len(), len);

        // Relations from the type-pair mapping, capped atomically.
        let k = cfg.num_entity_types;
        let mut relations = Vec::new();
        for i in 0..entities.len() {
            for j in (i + 1)..entities.len() {
                let (a, b) = {
                    let (ta, tb) = (entities[i].entity_type, entities[j].entity_type);
                    if ta <= tb { (ta, tb) } else { (tb, ta) }
                };
                let group: Vec<Relation> = match self.rules[a * k + b] {
                    PairRule::None => continue,
                    PairRule::Symmetric { relation_type } => vec![
                        Relation { head: i, tail: j, relation_type },
                        Relation { head: j, tail: i, relation_type },
                    ],
                    PairRule::Directed { from, to, relation_type } => {
                        let (head, tail) = if entities[i].entity_type == from {
                            (i, j)
                        } else {
                            debug_assert_eq!(entities[i].entity_type, to);
                            (j, i)
                        };
                        vec![Relation { head, tail, relation_type }]
                    }
                };
                if relations.len() + group.len() <= cfg.max_relations {
                    relations.extend(group);
                }
            }
        }

        Ok(Some(SentenceAnnotation {
            tokens: tokens.iter().map(|id| format!("t{id}")).collect(),
            entities,
            relations,
        }))
    }

    pub fn generate_corpus(&mut self, n: usize) -> Result<Vec<SentenceAnnotation>> {
        if n == 0 {
            return Err(UnireError::InvalidArgument("corpus size must be at least 1".into()));
        }
        (0..n).map(|_| self.generate_sentence()).collect()
    }
}

/// Noise applied to probability tensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Mix each cell with a random Dirichlet(1) draw at weight sigma.
    DirichletJitter,
    /// Replace each cell with a one-hot at a random wrong label with
    /// probability sigma.
    LabelFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub sigma: f64,
    pub seed: u64,
}

/// Applies noise to a tensor; the output remains a valid distribution
/// per cell.
pub fn corrupt_tensor(p: &ProbTensor, cfg: &NoiseConfig) -> Result<ProbTensor> {
    if !(0.0..=1.0).contains(&cfg.sigma) {
        return Err(UnireError::InvalidArgument(format!("sigma {} outside [0, 1]", cfg.sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = p.size();
    let y = p.labels();
    let mut out = p.clone();
    if cfg.sigma == 0.0 {
        return Ok(out);
    }
    for i in 0..n {
        for j in 0..n {
            match cfg.mode {
                NoiseMode::DirichletJitter => {
                    // Dirichlet(1) via normalized exponentials.
                    let mut noise: Vec<f64> =
                        (0..y).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                    let sum: f64 = noise.iter().sum();
                    for v in &mut noise {
                        *v /= sum;
                    }
                    for t in 0..y {
                        let mixed = (1.0 - cfg.sigma) * p.get(i, j, t) + cfg.sigma * noise[t];
                        out.set(i, j, t, mixed);
                    }
                }
                NoiseMode::LabelFlip => {
                    if rng.gen::<f64>() < cfg.sigma {
                        let current = crate::label::argmax(p.cell(i, j));
                        let wrong = if y > 1 {
                            let mut w = rng.gen_range(0..y - 1);
                            if w >= current {
                                w += 1;
                            }
                            w
                        } else {
                            current
                        };
                        for t in 0..y {
                            out.set(i, j, t, if t == wrong { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Maps corpus token strings of the form `t<id>` (as produced by the
/// generator) straight to ids; anything else becomes `UNK_ID`.
pub fn generated_token_id(token: &str, vocab: usize) -> usize {
    token
        .strip_prefix('t')
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&id| id >= 2 && id < vocab)
        .unwrap_or(UNK_ID)
}

/// Keeps reserved ids meaningful for generated corpora.
pub const RESERVED_TOKENS: [usize; 2] = [PAD_ID, UNK_ID];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::one_hot_tensor;
    use crate::label::render_gold_table;

    #[test]
    fn generation_is_deterministic() {
        let run = || {
            let mut g = CorpusGenerator::new(GenConfig { seed: 7, ..GenConfig::default() }).unwrap();
            g.generate_corpus(5).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_relation_density_yields_no_relations() {
        let cfg = GenConfig { relation_density: 0.0, seed: 3, ..GenConfig::default() };
        let mut g = CorpusGenerator::new(cfg).unwrap();
        for ann in g.generate_corpus(50).unwrap() {
            assert!(ann.relations.is_empty());
        }
    }

    #[test]
    fn generated_sentences_satisfy_invariants() {
        let cfg = GenConfig {
            seed: 11,
            num_entity_types: 5,
            num_relation_types: 3,
            num_symmetric_relations: 1,
            entities_per_sentence: (1, 5),
            sentence_len: (8, 20),
            ..GenConfig::default()
        };
        let mut g = CorpusGenerator::new(cfg).unwrap();
        let ls = g.label_space().clone();
        for ann in g.generate_corpus(100).unwrap() {
            ann.validate(&ls).unwrap();
            // Entities separated by at least one background token.
            let mut spans: Vec<Span> = ann.entities.iter().map(|e| e.span).collect();
            spans.sort();
            for pair in spans.windows(2) {
                assert!(pair[0].end < pair[1].start);
            }
        }
    }

    #[test]
    fn full_signal_tokens_identify_entity_types() {
        // With disjoint pools a token-lookup classifier is exact.
        let cfg = GenConfig {
            seed: 5,
            signal_strength: 1.0,
            entities_per_sentence: (1, 3),
            ..GenConfig::default()
        };
        let mut g = CorpusGenerator::new(cfg.clone()).unwrap();
        for ann in g.generate_corpus(100).unwrap() {
            let mut inside = vec![None; ann.len()];
            for e in &ann.entities {
                for k in e.span.start..e.span.end {
                    inside[k] = Some(e.entity_type);
                }
            }
            for (tok, gold_type) in ann.tokens.iter().zip(inside) {
                let id = generated_token_id(tok, cfg.vocab);
                assert_eq!(g.pool_of(id), gold_type);
            }
        }
    }

    #[test]
    fn corrupt_identity_and_adversarial_floor() {
        let cfg = GenConfig { seed: 9, ..GenConfig::default() };
        let mut g = CorpusGenerator::new(cfg).unwrap();
        let ls = g.label_space().clone();
        let ann = g.generate_sentence().unwrap();
        let table = render_gold_table(&ann, &ls).unwrap();
        let p = one_hot_tensor(&table, ls.num_labels(), 0.0).unwrap();

        let same = corrupt_tensor(
            &p,
            &NoiseConfig { mode: NoiseMode::DirichletJitter, sigma: 0.0, seed: 1 },
        )
        .unwrap();
        assert_eq!(same, p);

        let flipped = corrupt_tensor(
            &p,
            &NoiseConfig { mode: NoiseMode::LabelFlip, sigma: 1.0, seed: 1 },
        )
        .unwrap();
        let flipped_table = flipped.argmax_table();
        for i in 0..table.size() {
            for j in 0..table.size() {
                assert_ne!(flipped_table.get(i, j), table.get(i, j));
            }
        }
        flipped.check_distribution().unwrap();

        let jittered = corrupt_tensor(
            &p,
            &NoiseConfig { mode: NoiseMode::DirichletJitter, sigma: 0.3, seed: 2 },
        )
        .unwrap();
        jittered.check_distribution().unwrap();
    }

    #[test]
    fn decoding_corrects_most_label_flips() {
        // At sigma=0.05 most sentences contain flipped cells, yet joint
        // decoding recovers far more sentences exactly than stayed
        // flip-free, so decoding is correcting cell-level errors.
        let mut g = CorpusGenerator::new(GenConfig { seed: 2, ..GenConfig::default() }).unwrap();
        let ls = g.label_space().clone();
        let corpus = g.generate_corpus(200).unwrap();
        let cfg = crate::decode::DecodeConfig::default();
        let mut exact = 0;
        let mut flip_free = 0;
        for (k, ann) in corpus.iter().enumerate() {
            let table = render_gold_table(ann, &ls).unwrap();
            let p = one_hot_tensor(&table, ls.num_labels(), 0.01).unwrap();
            let noisy = corrupt_tensor(
                &p,
                &NoiseConfig { mode: NoiseMode::LabelFlip, sigma: 0.05, seed: k as u64 },
            )
            .unwrap();
            if noisy.argmax_table() == p.argmax_table() {
                flip_free += 1;
            }
            if crate::decode::joint_decode(&noisy, &ls, &cfg).entities == ann.entities {
                exact += 1;
            }
        }
        assert!(
            exact > 2 * flip_free,
            "expected decoding to correct flips: {exact} exact vs {flip_free} flip-free"
        );
    }

    #[test]
    fn infeasible_config_errors_out() {
        let cfg = GenConfig {
            sentence_len: (2, 2),
            entities_per_sentence: (3, 3),
            entity_len: (2, 2),
            ..GenConfig::default()
        };
        let mut g = CorpusGenerator::new(cfg).unwrap();
        assert!(g.generate_sentence().is_err());
    }
}

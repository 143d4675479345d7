//! Joint entity and relation extraction over a unified label table.
//!
//! A sentence of length n is scored as an n x n table whose cell (i, j)
//! holds a distribution over entity labels, relation labels, and a null
//! label. Entities are squares on the diagonal, relations are rectangles
//! off it, and decoding reads both out of the table in one pass.

pub mod bench;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod io;
pub mod label;
pub mod loss;
pub mod model;
pub mod optim;
pub mod train;

pub use decode::{
    hard_decode, joint_decode, oracle_decode, DecodeConfig, DecoderTag, DistanceMode,
    ExtractionResult,
};
pub use error::{Result, UnireError};
pub use label::{
    render_gold_table, symmetrize, Entity, GoldTable, LabelSpace, ProbTensor, Relation,
    SentenceAnnotation, Span, NULL_LABEL,
};
pub use model::{forward, softmax_cells, Dropout, ModelParams, TrainConfig};
pub use train::{train, TrainOutput, Vocab};

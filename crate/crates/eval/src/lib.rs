//! Evaluation tooling: synthetic gazettes with exact ground truth,
//! extraction scoring, a simulated supervisor and the repeated-split
//! label accuracy protocol.

pub mod protocol;
pub mod score;
pub mod supervisor;
pub mod synth;

pub use protocol::{run_on_samples, run_protocol, EvalReport, ProtocolError, ProtocolParams, RepeatLog, Summary};
pub use score::{match_blocks, score_document, ExtractionScore, IOU_THRESHOLD};
pub use supervisor::{review_document, Review};
pub use synth::{generate_corpus, generate_document, load_truth, SynthTemplate, TruthBlock, TruthDoc};

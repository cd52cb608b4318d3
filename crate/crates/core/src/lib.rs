//! Grounded semantic parsing over an in-memory knowledge base.
//!
//! A symbolic agent proposes every valid (grammatical and executable)
//! extension of the current plans, a pluggable scorer ranks
//! them, and beam search keeps the top plans until the best score stops
//! improving. See the crate `examples/` directory for one runnable program
//! per capability.

pub mod enumerate;
pub mod eval;
pub mod exec;
pub mod fixtures;
pub mod kb;
pub mod literal;
pub mod manifest;
pub mod plan;
pub mod scorer;
pub mod search;
pub mod synthetic;
pub mod train;

pub use enumerate::{candidate_plans, Constraints};
pub use exec::{execute, Denotation};
pub use kb::{Direction, KnowledgeBase};
pub use literal::{Literal, LiteralKind};
pub use plan::{parse_plan, type_check, Function, GoldDecomposition, Plan, ResultType};
pub use eval::{denotation_f1, evaluate, exact_match, load_dataset, DatasetExample, EvalReport};
pub use scorer::{LexicalScorer, LinearScorer, RankingModel, RemoteScorer, Scorer};
pub use search::{search, OracleScorer, SearchConfig, SearchTrace};
pub use train::{train, training_step, TrainConfig, TrainReport};

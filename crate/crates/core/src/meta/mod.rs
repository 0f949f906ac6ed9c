//! Inner-loop optimization, Reptile meta-training and few-shot adaptation.

mod adapt;
pub mod checkpoint;
mod optim;
mod reptile;
mod train;

pub use adapt::{adapt_and_score, fewshot_support, AdaptSettings, Adapted};
pub use optim::{InnerOptState, OptimizerConfig, OptimizerKind};
pub use reptile::{reptile_meta_update, MetaSchedule};
pub use train::{step_gradients, train, InnerLoop, OeConfig, OuterStepLog, TrainOutcome, TrainSettings};

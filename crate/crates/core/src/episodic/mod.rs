//! Episodic prototype training: tasks, episodes, prototypes and the
//! distance-softmax loss.

mod encoder;
mod episode;
mod loss;
mod task;

pub use encoder::{embed, DenseEncoder, Encoder, IdentityEncoder, InputNorm};
pub use episode::{sample_episode, sample_episode_seeded, Episode, EpisodeBatch, EpisodeSizes};
pub use loss::{
    class_likelihood, compute_prototypes, distance_softmax, episode_loss, forward_episode, prior_weighted_assignment,
    query_loss, Distance, EpisodeForward, PrototypeSet,
};
pub use task::TaskSpec;

//! Seeded random-stream plumbing.
//!
//! Every stochastic component draws from its own counter-mode stream derived
//! from the experiment seed. Keeping streams separate means adding a draw in
//! one component never shifts the numbers seen by any other, which is what
//! makes single-worker runs reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag for a random stream. The discriminant is the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamId {
    /// Start-pose jitter on environment reset.
    EnvReset = 0,
    /// Exploration noise for an actor's stochastic policy.
    ActorPolicy = 1,
    /// Observation randomization applied on the actor side.
    ActorObs = 2,
    /// Fresh action samples for the critic bootstrap target.
    LearnerBootstrap = 3,
    /// Reparameterized action samples for the policy objective.
    LearnerPolicy = 4,
    /// Perturbation draws for the spatial smoothness term.
    LearnerPhi = 5,
    /// Replay buffer sampling.
    LearnerSample = 6,
    /// Network weight initialization.
    NetInit = 7,
    /// Evaluation episodes.
    Eval = 8,
}

/// Stream for a singleton consumer (the learner, initialization, evaluation).
pub fn stream(seed: u64, id: StreamId) -> ChaCha8Rng {
    worker_stream(seed, id, 0)
}

/// Stream for a per-worker consumer. Workers get disjoint streams for the
/// same purpose so they can run concurrently without sharing state.
pub fn worker_stream(seed: u64, id: StreamId, worker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((id as u64) << 8 | worker);
    rng
}

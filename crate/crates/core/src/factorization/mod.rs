//! Feature-based matrix factorization with pairwise ranking losses.
//!
//! A user vector is the weighted sum of the latent vectors of its features,
//! and likewise for items. The raw score of a user-item pair is the dot
//! product of the two plus the item bias, and its sigmoid is the interaction
//! probability. Item features may include a dense document embedding, which
//! enters the bias through a learned linear map and optionally the item
//! vector through a learned projection.

mod checkpoint;
mod model;
mod train;
mod warp;

pub use checkpoint::{MfCheckpoint, MfRun, MF_FORMAT};
pub use model::{BoundModel, DenseChannel, FactorizationModel, FeatureSet, MetadataMode, PairLoss, TripletGradient};
pub use train::{bpr_step, train, warp_step, EpochLog, LossKind, StepOutcome, TrainConfig};
pub use warp::{estimated_rank, WarpWeights};

//! Flow models on the linear path: velocity fields, the flow ODE, the
//! marginal-preserving stochastic sampler used for fine-tuning, and the
//! velocity-to-score transform.

mod field;
mod sampler;
mod schedule;

pub use field::{ConstantField, Field, GaussianPathField, LinearField, VelocityField, ZeroField};
pub(crate) use sampler::rollout_with;
pub use sampler::{
    integrate_ode, sample_memoryless, sample_ode, score_from_velocity, write_samples_csv, TrajectoryBatch,
    SCORE_MIN_GAP,
};
pub use schedule::NoiseSchedule;

//! Advantage estimation, losses, the natural-gradient optimizer and the
//! synchronous training loop.

pub mod gae;
pub mod kfac;
pub mod loss;
pub mod trainer;

pub use gae::{gae, kstep_advantage, td_residuals, GaeConfig};
pub use kfac::{Kfac, KfacConfig, KfacError, KfacStep};
pub use loss::{a2c_loss, fisher_sample_grads, LossConfig, LossOut};
pub use trainer::{
    param_hash, run_episode, update, EpisodeSummary, Iteration, TrainError, Trainer, TrainerConfig,
    UpdateStats, Worker, WorkerRollout,
};

//! The self-play training loop: game generation, the bounded frame window,
//! and shuffled mini-batch optimization of the policy/value loss.

mod frame;
mod train;

pub use frame::{
    frames_from_game, load_window, save_window, update_window, FrameError, FrameWindow,
    ReplayFrame,
};
pub use train::{
    frame_loss, generate_selfplay, run_training, train_iteration, IterationMetrics, RunPaths,
    TrainConfig, TrainError,
};

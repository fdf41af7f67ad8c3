//! Value-based agents: replay buffer with protected demonstrations, target
//! rules, the four-term loss, pre-training, and the training loop.

pub mod buffer;
pub mod loss;
pub mod persist;
pub mod train;

pub use buffer::ReplayBuffer;
pub use loss::{
    double_td_target, global_loss, margin_loss, n_step_loss, n_step_target, td_target, Algo,
    LossBreakdown, LossConfig,
};
pub use persist::{load_run_state, save_run_state};
pub use train::{
    act, eps_schedule, evaluate_greedy, init_train_state, pretrain, train, EpisodeRow,
    TrainConfig, TrainState,
};

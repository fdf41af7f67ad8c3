//! Epsilon-greedy acting, the pre-training phase over demonstrations, and the
//! main training loop: one gradient update per environment step from a
//! uniformly sampled batch, epsilon decaying per episode, and the target
//! network synced on a fixed episode cadence.

use std::path::Path;

use super::buffer::ReplayBuffer;
use super::loss::{global_loss, Algo, LossConfig};
use crate::env::{fill_n_step_fields, Env, EnvState, Transition};
use crate::error::{Error, Result};
use crate::firesim::{average_burned, run_batch};
use crate::nn::qnet::argmax_row;
use crate::nn::{Adam, Arch, QNetwork, Tensor};
use crate::rng::{hash2, Rng};

/// Full training configuration.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub algo: Algo,
    pub arch: Arch,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Target-network sync cadence: episodes during training, steps during
    /// pre-training.
    pub sync_every: usize,
    pub episodes: usize,
    pub lr: f64,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
    pub n_step: usize,
    pub pretrain_steps: usize,
    pub demo_episodes: usize,
    /// Simulations per demonstrator decision.
    pub sims_per_step: usize,
    pub seed: u64,
    /// Episodes between in-training evaluations (0 = never).
    pub eval_interval: usize,
    pub eval_fires: usize,
    pub eval_seed: u64,
    /// Episodes between run-state snapshots (0 = never).
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Dqn,
            arch: Arch::Small,
            buffer_capacity: 100_000,
            batch_size: 64,
            sync_every: 200,
            episodes: 20_000,
            lr: 5e-5,
            gamma: 1.0,
            eps_start: 1.0,
            eps_decay: 0.005,
            eps_min: 0.001,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1e-5,
            margin: 0.8,
            n_step: 10,
            pretrain_steps: 2000,
            demo_episodes: 1000,
            sims_per_step: 32,
            seed: 0,
            eval_interval: 0,
            eval_fires: 500,
            eval_seed: 0xF1BE,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must be in [0,1]"));
        }
        for (name, v) in [
            ("eps_start", self.eps_start),
            ("eps_decay", self.eps_decay),
            ("eps_min", self.eps_min),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must be in [0,1]")));
            }
        }
        if self.n_step == 0 {
            return Err(Error::config("n_step must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.sync_every == 0 {
            return Err(Error::config("sync_every must be at least 1"));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::config("lr must be positive"));
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            algo: self.algo,
            gamma: self.gamma,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            margin: self.margin,
            n_step: self.n_step,
        }
    }
}

/// One row of the learning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub ret: f64,
    pub epsilon: f64,
    pub mean_loss: Option<f64>,
    pub eval_burned_pct: Option<f64>,
}

/// Everything the training loop carries between episodes. Serializable in
/// full, so interrupted runs resume with an identical continuation.
pub struct TrainState {
    pub online: QNetwork,
    pub target: QNetwork,
    pub adam: Adam,
    pub buffer: ReplayBuffer,
    pub epsilon: f64,
    pub episode: usize,
    pub update_count: u64,
    pub rng_act: Rng,
    pub rng_env: Rng,
    pub rng_sample: Rng,
    pub curve: Vec<EpisodeRow>,
}

/// Builds networks, optimizer, and buffer for an environment; demonstrations
/// (possibly empty) seed the protected region.
pub fn init_train_state(env: &Env, cfg: &TrainConfig, demos: Vec<Transition>) -> Result<TrainState> {
    cfg.validate()?;
    let online = QNetwork::new(
        cfg.arch,
        cfg.algo.head(),
        env.base().rows(),
        env.base().cols(),
        env.channels(),
        hash2(cfg.seed, 0x1217),
    )?;
    let mut target = online.clone();
    target.sync_from(&online)?;
    let adam = Adam::new(&online);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    if !demos.is_empty() {
        buffer.load_demos(demos)?;
    }
    Ok(TrainState {
        online,
        target,
        adam,
        buffer,
        epsilon: cfg.eps_start,
        episode: 0,
        update_count: 0,
        rng_act: Rng::derived(cfg.seed, 0xAC7),
        rng_env: Rng::derived(cfg.seed, 0xE2F),
        rng_sample: Rng::derived(cfg.seed, 0x5A3),
        curve: Vec::new(),
    })
}

/// Epsilon-greedy action over the available set.
pub fn act(
    env: &Env,
    net: &QNetwork,
    state: &EnvState,
    eps: f64,
    rng: &mut Rng,
) -> Result<usize> {
    let mask = state.action_mask();
    let available: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i)
        .collect();
    if available.is_empty() {
        return Err(Error::state("no available action"));
    }
    if rng.next_f64() < eps {
        return Ok(available[rng.next_below(available.len())]);
    }
    let enc = env.encode_state(state);
    let batched = Tensor::from_vec(
        vec![1, enc.shape()[0], enc.shape()[1], enc.shape()[2]],
        enc.data().to_vec(),
    );
    let q = net.infer(&batched, &mask)?;
    Ok(argmax_row(q.data()))
}

/// Multiplicative epsilon decay with a floor, applied once per episode.
pub fn eps_schedule(eps: f64, cfg: &TrainConfig) -> f64 {
    (eps * (1.0 - cfg.eps_decay)).max(cfg.eps_min)
}

fn one_update(env: &Env, state: &mut TrainState, cfg: &TrainConfig) -> Result<f64> {
    let indices = state.buffer.sample_batch(cfg.batch_size, &mut state.rng_sample)?;
    let batch: Vec<&Transition> = indices.iter().map(|&i| state.buffer.get(i)).collect();
    let dropout_seed = hash2(cfg.seed, 0xD20_0000 ^ state.update_count);
    let (loss, grads) = global_loss(
        env,
        &state.online,
        &state.target,
        &batch,
        &cfg.loss_config(),
        dropout_seed,
    )?;
    state.adam.step(&mut state.online, &grads, cfg.lr)?;
    state.update_count += 1;
    Ok(loss.total)
}

/// Pre-training over a demonstrations-only buffer: `steps` sampled-batch
/// updates with a target sync every `sync_every` steps. Returns the loss
/// curve.
pub fn pretrain(env: &Env, state: &mut TrainState, cfg: &TrainConfig, steps: usize) -> Result<Vec<f64>> {
    if state.buffer.agent_len() > 0 {
        return Err(Error::state("pre-training requires a demonstrations-only buffer"));
    }
    if steps > 0 && state.buffer.demo_len() == 0 {
        return Err(Error::state("pre-training requires demonstrations"));
    }
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        losses.push(one_update(env, state, cfg)?);
        if (step + 1).is_multiple_of(cfg.sync_every) {
            state.target.sync_from(&state.online)?;
        }
    }
    if steps > 0 {
        state.target.sync_from(&state.online)?;
    }
    Ok(losses)
}

/// Greedy-policy evaluation: rolls out with epsilon 0, then measures the mean
/// burned percentage over `eval_fires` fires with the fixed seed.
pub fn evaluate_greedy(env: &Env, net: &QNetwork, eval_fires: usize, eval_seed: u64) -> Result<f64> {
    let mut state = env.reset();
    let mut rng = Rng::derived(eval_seed, 0x9E);
    for _ in 0..env.budget() {
        let action = act(env, net, &state, 0.0, &mut rng)?;
        let (next, _, _) = env.step(&state, action, &mut rng)?;
        state = next;
    }
    let cfg = env.config();
    let outcomes = run_batch(
        &state.grid,
        &cfg.spread,
        &cfg.weather,
        &cfg.zone,
        eval_fires,
        eval_seed,
    )?;
    Ok(100.0 * average_burned(&outcomes)? / env.n_cells() as f64)
}

/// Runs training episodes `state.episode .. cfg.episodes`, appending one
/// curve row per episode. When `snapshot_dir` is set and
/// `cfg.checkpoint_interval > 0`, the full run state is written there every
/// interval (file `run_state.bin`), enabling exact resume.
pub fn train(
    env: &Env,
    state: &mut TrainState,
    cfg: &TrainConfig,
    snapshot_dir: Option<&Path>,
) -> Result<()> {
    cfg.validate()?;
    while state.episode < cfg.episodes {
        let mut env_state = env.reset();
        let mut staged: Vec<Transition> = Vec::with_capacity(env.budget());
        let mut ret = 0.0;
        let mut losses = Vec::new();
        let mut done = false;
        while !done {
            let action = act(env, &state.online, &env_state, state.epsilon, &mut state.rng_act)?;
            let (next, reward, finished) = env.step(&env_state, action, &mut state.rng_env)?;
            staged.push(Transition {
                placed: env_state.placed.clone(),
                action: action as u32,
                reward,
                done: finished,
                is_demo: false,
                n_return: 0.0,
                n_bootstrap: None,
            });
            ret += reward;
            env_state = next;
            done = finished;

            if !state.buffer.is_empty() {
                losses.push(one_update(env, state, cfg)?);
            }
        }
        fill_n_step_fields(&mut staged, cfg.gamma, cfg.n_step);
        for t in staged {
            state.buffer.push(t);
        }

        state.epsilon = eps_schedule(state.epsilon, cfg);
        state.episode += 1;
        if state.episode.is_multiple_of(cfg.sync_every) {
            state.target.sync_from(&state.online)?;
        }

        let eval = if cfg.eval_interval > 0 && state.episode.is_multiple_of(cfg.eval_interval) {
            Some(evaluate_greedy(env, &state.online, cfg.eval_fires, cfg.eval_seed)?)
        } else {
            None
        };
        let mean_loss = if losses.is_empty() {
            None
        } else {
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        };
        state.curve.push(EpisodeRow {
            episode: state.episode,
            ret,
            epsilon: state.epsilon,
            mean_loss,
            eval_burned_pct: eval,
        });

        if cfg.checkpoint_interval > 0 && state.episode.is_multiple_of(cfg.checkpoint_interval) {
            if let Some(dir) = snapshot_dir {
                super::persist::save_run_state(&dir.join("run_state.bin"), state)?;
            }
        }
    }
    Ok(())
}

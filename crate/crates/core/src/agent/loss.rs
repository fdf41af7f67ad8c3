//! Target rules and the four-term training loss.
//!
//! The temporal-difference term regresses q(s, a) onto a bootstrap target
//! built from the target network (optionally with decoupled action selection
//! through the online network), the n-step term regresses the same entry onto
//! the forward n-step return, the margin term pushes demonstrated actions
//! above all alternatives by a fixed margin, and an L2 penalty sums squared
//! parameters. Bootstrap targets are computed numerically and never carry
//! gradients.

use crate::env::{Env, Transition};
use crate::error::{Error, Result};
use crate::nn::qnet::{argmax_row, Gradients, Mode, QNetwork};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Dqn,
    DoubleDqn,
    DuelingDoubleDqn,
}

impl Algo {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Algo::Dqn),
            "2dqn" => Ok(Algo::DoubleDqn),
            "ddqn" => Ok(Algo::DuelingDoubleDqn),
            other => Err(Error::config(format!(
                "unknown algorithm '{other}' (expected dqn, 2dqn, or ddqn)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Dqn => "dqn",
            Algo::DoubleDqn => "2dqn",
            Algo::DuelingDoubleDqn => "ddqn",
        }
    }

    /// Double algorithms select the bootstrap action with the online network.
    pub fn decoupled_selection(&self) -> bool {
        matches!(self, Algo::DoubleDqn | Algo::DuelingDoubleDqn)
    }

    pub fn head(&self) -> crate::nn::HeadKind {
        match self {
            Algo::DuelingDoubleDqn => crate::nn::HeadKind::Dueling,
            _ => crate::nn::HeadKind::Single,
        }
    }
}

/// Largest finite entry of a masked q-row.
fn max_finite(row: &[f64]) -> f64 {
    row.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max)
}

/// One-step bootstrap target: `r` when done, otherwise
/// `r + gamma * max_a q_target(s', a)` over available actions (masked
/// entries are -inf and never win).
pub fn td_target(reward: f64, done: bool, gamma: f64, next_q_target: &[f64]) -> f64 {
    if done || gamma == 0.0 {
        return reward;
    }
    reward + gamma * max_finite(next_q_target)
}

/// Decoupled target: the action is chosen by the online row, its value read
/// from the target row.
pub fn double_td_target(
    reward: f64,
    done: bool,
    gamma: f64,
    next_q_online: &[f64],
    next_q_target: &[f64],
) -> f64 {
    if done || gamma == 0.0 {
        return reward;
    }
    let chosen = argmax_row(next_q_online);
    reward + gamma * next_q_target[chosen]
}

/// Large-margin classification term for a demonstrated action:
/// `max_a [q(a) + margin * 1{a != a_e}] - q(a_e)` over unmasked actions.
/// Returns the term and the attaining action (for the subgradient).
pub fn margin_term(q_row: &[f64], a_e: usize, margin: f64, mask: &[bool]) -> Result<(f64, usize)> {
    if a_e >= q_row.len() || !mask[a_e] {
        return Err(Error::argument("demonstrated action is masked"));
    }
    let mut best = a_e;
    let mut best_v = q_row[a_e];
    for (a, (&q, &m)) in q_row.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        let v = q + if a == a_e { 0.0 } else { margin };
        if v > best_v {
            best_v = v;
            best = a;
        }
    }
    Ok((best_v - q_row[a_e], best))
}

/// Margin term value alone.
pub fn margin_loss(q_row: &[f64], a_e: usize, margin: f64, mask: &[bool]) -> Result<f64> {
    margin_term(q_row, a_e, margin, mask).map(|(v, _)| v)
}

/// Validates that `window` is a chain of consecutive same-episode
/// transitions.
fn check_window(window: &[Transition]) -> Result<()> {
    if window.is_empty() {
        return Err(Error::argument("empty n-step window"));
    }
    for pair in window.windows(2) {
        if pair[0].done || pair[1].placed != pair[0].next_placed() {
            return Err(Error::argument("window mixes transitions from different episodes"));
        }
    }
    Ok(())
}

/// Forward n-step return target from an explicit window:
/// `r_t + gamma r_{t+1} + ... + gamma^{n-1} r_{t+n-1} + gamma^n max_a
/// q_target(s_{t+n}, a)`, truncated without bootstrap when the episode ends
/// inside the window.
pub fn n_step_target(
    env: &Env,
    window: &[Transition],
    target_net: &QNetwork,
    gamma: f64,
    n: usize,
) -> Result<f64> {
    check_window(window)?;
    if n == 0 {
        return Err(Error::argument("n must be at least 1"));
    }
    let take = n.min(window.len());
    let mut ret = 0.0;
    let mut discount = 1.0;
    for t in &window[..take] {
        ret += discount * t.reward;
        discount *= gamma;
    }
    let last = &window[take - 1];
    if last.done {
        return Ok(ret);
    }
    if take < n {
        return Err(Error::argument(
            "window too short: episode continues past its end before n steps",
        ));
    }
    let boot_placed = last.next_placed();
    let enc = env.encode_placed(&boot_placed);
    let batched = Tensor::from_vec(
        vec![1, enc.shape()[0], enc.shape()[1], enc.shape()[2]],
        enc.data().to_vec(),
    );
    let mask = env.mask_from_placed(&boot_placed);
    let q = target_net.infer(&batched, &mask)?;
    Ok(ret + discount * max_finite(q.data()))
}

/// Squared n-step error for the window head.
pub fn n_step_loss(
    env: &Env,
    window: &[Transition],
    online: &QNetwork,
    target_net: &QNetwork,
    gamma: f64,
    n: usize,
) -> Result<f64> {
    let target = n_step_target(env, window, target_net, gamma, n)?;
    let head = &window[0];
    let enc = env.encode_placed(&head.placed);
    let batched = Tensor::from_vec(
        vec![1, enc.shape()[0], enc.shape()[1], enc.shape()[2]],
        enc.data().to_vec(),
    );
    let mask = env.mask_from_placed(&head.placed);
    let q = online.infer(&batched, &mask)?;
    let q_sa = q.data()[head.action as usize];
    Ok((q_sa - target).powi(2))
}

/// Loss weights and horizons; a projection of the full training config.
#[derive(Clone, Copy, Debug)]
pub struct LossConfig {
    pub algo: Algo,
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
    pub n_step: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub j_dq: f64,
    pub j_n: f64,
    pub j_e: f64,
    pub j_l2: f64,
}

/// Encodes a batch of placement prefixes into one (B, C, R, Cc) tensor plus
/// the concatenated action masks.
pub fn encode_batch(env: &Env, placed: &[&[u32]]) -> (Tensor, Vec<bool>) {
    let b = placed.len();
    let channels = env.channels();
    let rows = env.base().rows();
    let cols = env.base().cols();
    let plane = channels * rows * cols;
    let mut x = Tensor::zeros(vec![b, channels, rows, cols]);
    let mut mask = Vec::with_capacity(b * rows * cols);
    for (i, p) in placed.iter().enumerate() {
        env.encode_into(p, &mut x.data_mut()[i * plane..(i + 1) * plane]);
        mask.extend(env.mask_from_placed(p));
    }
    (x, mask)
}

/// Evaluates the four-term loss on a batch and returns its value together
/// with exact gradients for the online network. The forward pass runs in
/// training mode with the given dropout seed; target computations run in
/// evaluation mode and contribute no gradient.
pub fn global_loss(
    env: &Env,
    online: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &LossConfig,
    dropout_seed: u64,
) -> Result<(LossBreakdown, Gradients)> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::argument("empty batch"));
    }
    let actions = online.actions();

    // online forward on the batch states (training mode: dropout active)
    let placed_refs: Vec<&[u32]> = batch.iter().map(|t| t.placed.as_slice()).collect();
    let (x, mask) = encode_batch(env, &placed_refs);
    let (q, trace) = online.forward(&x, &mask, Mode::Train { dropout_seed })?;

    // bootstrap rows for non-terminal transitions
    let nd_idx: Vec<usize> = (0..b).filter(|&i| !batch[i].done).collect();
    let (next_q_target, next_q_online) = if nd_idx.is_empty() {
        (None, None)
    } else {
        let next_placed: Vec<Vec<u32>> = nd_idx.iter().map(|&i| batch[i].next_placed()).collect();
        let next_refs: Vec<&[u32]> = next_placed.iter().map(|p| p.as_slice()).collect();
        let (nx, nmask) = encode_batch(env, &next_refs);
        let qt = target_net.infer(&nx, &nmask)?;
        let qo = if cfg.algo.decoupled_selection() {
            Some(online.infer(&nx, &nmask)?)
        } else {
            None
        };
        (Some(qt), qo)
    };

    // bootstrap rows for n-step windows that did not reach the terminal
    let boot_idx: Vec<usize> = (0..b).filter(|&i| batch[i].n_bootstrap.is_some()).collect();
    let boot_q_target = if boot_idx.is_empty() {
        None
    } else {
        let boot_refs: Vec<&[u32]> = boot_idx
            .iter()
            .map(|&i| batch[i].n_bootstrap.as_deref().unwrap())
            .collect();
        let (bx, bmask) = encode_batch(env, &boot_refs);
        Some(target_net.infer(&bx, &bmask)?)
    };

    fn row_of(t: &Option<Tensor>, pos: usize, actions: usize) -> &[f64] {
        let q = t.as_ref().unwrap();
        &q.data()[pos * actions..(pos + 1) * actions]
    }

    let mut grad_q = Tensor::zeros(vec![b, actions]);
    let mut j_dq = 0.0;
    let mut j_n = 0.0;
    let mut j_e = 0.0;
    let gamma_n = cfg.gamma.powi(cfg.n_step as i32);
    let inv_b = 1.0 / b as f64;

    for (i, t) in batch.iter().enumerate() {
        let a = t.action as usize;
        let q_row = &q.data()[i * actions..(i + 1) * actions];
        let q_sa = q_row[a];
        if !q_sa.is_finite() {
            return Err(Error::state("taken action is masked in its own state"));
        }

        // one-step TD term with the algorithm's target rule
        let target = if t.done {
            t.reward
        } else {
            let pos = nd_idx.iter().position(|&j| j == i).unwrap();
            let qt_row = row_of(&next_q_target, pos, actions);
            if cfg.algo.decoupled_selection() {
                let qo_row = row_of(&next_q_online, pos, actions);
                double_td_target(t.reward, false, cfg.gamma, qo_row, qt_row)
            } else {
                td_target(t.reward, false, cfg.gamma, qt_row)
            }
        };
        let diff = q_sa - target;
        j_dq += diff * diff;
        grad_q.data_mut()[i * actions + a] += 2.0 * diff * inv_b;

        // n-step term
        let n_target = match &t.n_bootstrap {
            None => t.n_return,
            Some(_) => {
                let pos = boot_idx.iter().position(|&j| j == i).unwrap();
                t.n_return + gamma_n * max_finite(row_of(&boot_q_target, pos, actions))
            }
        };
        let n_diff = q_sa - n_target;
        j_n += n_diff * n_diff;
        grad_q.data_mut()[i * actions + a] += 2.0 * cfg.lambda1 * n_diff * inv_b;

        // margin term, demonstrations only
        if t.is_demo {
            let row_mask = &mask[i * actions..(i + 1) * actions];
            let (term, attained) = margin_term(q_row, a, cfg.margin, row_mask)?;
            j_e += term;
            if attained != a {
                grad_q.data_mut()[i * actions + attained] += cfg.lambda2 * inv_b;
                grad_q.data_mut()[i * actions + a] -= cfg.lambda2 * inv_b;
            }
        }
    }

    j_dq *= inv_b;
    j_n *= inv_b;
    j_e *= inv_b;
    let j_l2 = online.sq_param_sum();

    let (mut grads, _) = online.backward(&trace, &grad_q);
    grads.add_scaled_params(online, 2.0 * cfg.lambda3);

    let breakdown = LossBreakdown {
        total: j_dq + cfg.lambda1 * j_n + cfg.lambda2 * j_e + cfg.lambda3 * j_l2,
        j_dq,
        j_n,
        j_e,
        j_l2,
    };
    Ok((breakdown, grads))
}

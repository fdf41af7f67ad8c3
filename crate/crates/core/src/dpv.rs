//! Downstream protection value (DPV) and the heuristic demonstrator built on
//! it.
//!
//! For one simulated fire, each burned cell's score is the total value at
//! risk in the subtree hanging below it in the propagation tree; averaging
//! over a batch of fires gives the DPV field. The demonstrator greedily
//! places a firebreak on the highest-DPV available cell, re-simulating on the
//! current grid each step, and records the resulting transitions as
//! demonstrations.

use std::fs;
use std::path::Path;

use crate::env::{fill_n_step_fields, Env, EnvState, Transition};
use crate::error::{Error, Result};
use crate::files::write_atomic;
use crate::firesim::{run_batch, FireOutcome};
use crate::nn::checkpoint::{put_f64, put_u32, put_u64, Reader};
use crate::rng::{hash2, hash3, Rng};

/// Per-cell nonnegative protection scores.
#[derive(Clone, Debug, PartialEq)]
pub struct DpvScores {
    pub scores: Vec<f64>,
}

/// Sum of `values` over the propagation subtree rooted at each burned cell
/// (including the cell itself); zero for unburned cells.
pub fn subtree_values(outcome: &FireOutcome, values: &[f64]) -> Result<Vec<f64>> {
    let n = outcome.rows * outcome.cols;
    if values.len() != n {
        return Err(Error::argument(format!(
            "values length {} does not match {} cells",
            values.len(),
            n
        )));
    }
    let mut out = vec![0.0; n];
    for &cell in &outcome.burned {
        out[cell] = values[cell];
    }
    // edges are in discovery order, so children accumulate before parents
    // when walked in reverse
    for &(parent, child) in outcome.edges.iter().rev() {
        out[parent] += out[child];
    }
    Ok(out)
}

/// Mean of [`subtree_values`] over a batch of outcomes.
pub fn dpv_scores(outcomes: &[FireOutcome], values: &[f64]) -> Result<DpvScores> {
    if outcomes.is_empty() {
        return Err(Error::argument("no outcomes for DPV"));
    }
    let n = outcomes[0].rows * outcomes[0].cols;
    let mut acc = vec![0.0; n];
    for o in outcomes {
        let sub = subtree_values(o, values)?;
        for (a, s) in acc.iter_mut().zip(&sub) {
            *a += s;
        }
    }
    let count = outcomes.len() as f64;
    for a in acc.iter_mut() {
        *a /= count;
    }
    Ok(DpvScores { scores: acc })
}

/// One greedy demonstrator decision: simulate `sims_per_step` fires on the
/// current grid, score cells by DPV, and return the best available cell
/// (smallest index on ties; smallest-index available cell when every score
/// is zero).
pub fn baseline_step(
    env: &Env,
    state: &EnvState,
    sims_per_step: usize,
    values: &[f64],
    master_seed: u64,
) -> Result<usize> {
    let mask = state.action_mask();
    if !mask.iter().any(|&m| m) {
        return Err(Error::state("no available cell for the demonstrator"));
    }
    let cfg = env.config();
    let outcomes = run_batch(
        &state.grid,
        &cfg.spread,
        &cfg.weather,
        &cfg.zone,
        sims_per_step,
        master_seed,
    )?;
    let dpv = dpv_scores(&outcomes, values)?;
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (&score, &avail)) in dpv.scores.iter().zip(&mask).enumerate() {
        if avail && score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// Plays the demonstrator for `episodes` full episodes and returns every
/// transition flagged as a demonstration, with n-step fields filled.
pub fn generate_demonstrations(
    env: &Env,
    episodes: usize,
    sims_per_step: usize,
    seed: u64,
    gamma: f64,
    n_step: usize,
) -> Result<Vec<Transition>> {
    if episodes == 0 {
        return Err(Error::argument("episode count must be at least 1"));
    }
    let values = vec![1.0; env.n_cells()];
    let mut out = Vec::with_capacity(episodes * env.budget());
    for ep in 0..episodes {
        let ep_seed = hash2(seed, ep as u64);
        let mut env_rng = Rng::derived(ep_seed, 0xE5D);
        let mut state = env.reset();
        let mut staged: Vec<Transition> = Vec::with_capacity(env.budget());
        let mut done = false;
        let mut t = 0u64;
        while !done {
            let sim_seed = hash3(ep_seed, 0x51A5, t);
            let action = baseline_step(env, &state, sims_per_step, &values, sim_seed)?;
            let (next, reward, finished) = env.step(&state, action, &mut env_rng)?;
            staged.push(Transition {
                placed: state.placed.clone(),
                action: action as u32,
                reward,
                done: finished,
                is_demo: true,
                n_return: 0.0,
                n_bootstrap: None,
            });
            state = next;
            done = finished;
            t += 1;
        }
        fill_n_step_fields(&mut staged, gamma, n_step);
        out.extend(staged);
    }
    Ok(out)
}

const DEMO_MAGIC: &[u8; 8] = b"FBDEMO1\n";

/// Writes demonstrations as per-episode action/reward sequences. States are
/// not stored; they replay exactly from the action order.
///
/// Layout: magic, rows u32, cols u32, landscape fingerprint u64,
/// episode count u32, then per episode: step count u32 and per step
/// (action u32, reward f64).
pub fn save_demonstrations(
    path: &Path,
    base_fingerprint: u64,
    rows: usize,
    cols: usize,
    transitions: &[Transition],
) -> Result<()> {
    let episodes = split_episodes(transitions)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(DEMO_MAGIC);
    put_u32(&mut buf, rows as u32);
    put_u32(&mut buf, cols as u32);
    put_u64(&mut buf, base_fingerprint);
    put_u32(&mut buf, episodes.len() as u32);
    for ep in &episodes {
        put_u32(&mut buf, ep.len() as u32);
        for t in *ep {
            put_u32(&mut buf, t.action);
            put_f64(&mut buf, t.reward);
        }
    }
    write_atomic(path, &buf)
}

/// Reads a demonstration file back into transitions, recomputing n-step
/// fields for the given horizon. Fails if the file was generated for a
/// different landscape than `expect_fingerprint`.
pub fn load_demonstrations(
    path: &Path,
    expect_fingerprint: Option<u64>,
    gamma: f64,
    n_step: usize,
) -> Result<Vec<Transition>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(DEMO_MAGIC)?;
    let _rows = r.u32()?;
    let _cols = r.u32()?;
    let fingerprint = r.u64()?;
    if let Some(expected) = expect_fingerprint {
        if fingerprint != expected {
            return Err(Error::parse(
                path,
                0,
                "demonstrations were generated for a different landscape",
            ));
        }
    }
    let n_episodes = r.u32()? as usize;
    let mut out = Vec::new();
    for _ in 0..n_episodes {
        let len = r.u32()? as usize;
        if len == 0 {
            return Err(Error::parse(path, 0, "empty episode in demonstration file"));
        }
        let mut placed: Vec<u32> = Vec::new();
        let mut staged = Vec::with_capacity(len);
        for t in 0..len {
            let action = r.u32()?;
            let reward = r.f64()?;
            staged.push(Transition {
                placed: placed.clone(),
                action,
                reward,
                done: t == len - 1,
                is_demo: true,
                n_return: 0.0,
                n_bootstrap: None,
            });
            placed.push(action);
        }
        fill_n_step_fields(&mut staged, gamma, n_step);
        out.extend(staged);
    }
    r.done()?;
    Ok(out)
}

/// Groups a flat transition sequence into complete episodes, validating the
/// placement-prefix chain.
fn split_episodes(transitions: &[Transition]) -> Result<Vec<&[Transition]>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in transitions.iter().enumerate() {
        let expected_len = i - start;
        if t.placed.len() != expected_len {
            return Err(Error::argument(
                "transition sequence is not a chain of complete episodes",
            ));
        }
        if t.done {
            out.push(&transitions[start..=i]);
            start = i + 1;
        }
    }
    if start != transitions.len() {
        return Err(Error::argument("trailing incomplete episode"));
    }
    Ok(out)
}

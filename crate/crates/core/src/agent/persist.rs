//! Full run-state snapshots: networks, optimizer moments, replay buffer,
//! random streams, epsilon, and the curve so far. Restoring one continues a
//! run with byte-identical results.

use std::fs;
use std::path::Path;

use super::buffer::ReplayBuffer;
use super::train::{EpisodeRow, TrainState};
use crate::env::Transition;
use crate::error::{Error, Result};
use crate::files::write_atomic;
use crate::nn::checkpoint::{put_f64, put_network, put_u32, put_u64, read_network, Reader};
use crate::nn::Adam;
use crate::rng::Rng;

const MAGIC: &[u8; 8] = b"FBSTAT1\n";

fn put_transition(buf: &mut Vec<u8>, t: &Transition) {
    put_u32(buf, t.placed.len() as u32);
    for &c in &t.placed {
        put_u32(buf, c);
    }
    put_u32(buf, t.action);
    put_f64(buf, t.reward);
    buf.push(t.done as u8);
    buf.push(t.is_demo as u8);
    put_f64(buf, t.n_return);
    match &t.n_bootstrap {
        None => buf.push(0),
        Some(p) => {
            buf.push(1);
            put_u32(buf, p.len() as u32);
            for &c in p {
                put_u32(buf, c);
            }
        }
    }
}

fn read_transition(r: &mut Reader) -> Result<Transition> {
    let n = r.u32()? as usize;
    let mut placed = Vec::with_capacity(n);
    for _ in 0..n {
        placed.push(r.u32()?);
    }
    let action = r.u32()?;
    let reward = r.f64()?;
    let done = r.u8()? != 0;
    let is_demo = r.u8()? != 0;
    let n_return = r.f64()?;
    let n_bootstrap = if r.u8()? != 0 {
        let m = r.u32()? as usize;
        let mut p = Vec::with_capacity(m);
        for _ in 0..m {
            p.push(r.u32()?);
        }
        Some(p)
    } else {
        None
    };
    Ok(Transition {
        placed,
        action,
        reward,
        done,
        is_demo,
        n_return,
        n_bootstrap,
    })
}

pub fn save_run_state(path: &Path, state: &TrainState) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_network(&mut buf, &state.online);
    put_network(&mut buf, &state.target);

    put_u64(&mut buf, state.adam.t);
    put_u32(&mut buf, state.adam.m.len() as u32);
    for (m, v) in state.adam.m.iter().zip(&state.adam.v) {
        put_u64(&mut buf, m.len() as u64);
        for &x in m {
            put_f64(&mut buf, x);
        }
        for &x in v {
            put_f64(&mut buf, x);
        }
    }

    let (capacity, demos, agent, next_slot) = state.buffer.parts();
    put_u64(&mut buf, capacity as u64);
    put_u32(&mut buf, demos.len() as u32);
    for t in demos {
        put_transition(&mut buf, t);
    }
    put_u32(&mut buf, agent.len() as u32);
    for t in agent {
        put_transition(&mut buf, t);
    }
    put_u64(&mut buf, next_slot as u64);

    put_f64(&mut buf, state.epsilon);
    put_u64(&mut buf, state.episode as u64);
    put_u64(&mut buf, state.update_count);
    put_u64(&mut buf, state.rng_act.state());
    put_u64(&mut buf, state.rng_env.state());
    put_u64(&mut buf, state.rng_sample.state());

    put_u32(&mut buf, state.curve.len() as u32);
    for row in &state.curve {
        put_u64(&mut buf, row.episode as u64);
        put_f64(&mut buf, row.ret);
        put_f64(&mut buf, row.epsilon);
        match row.mean_loss {
            Some(v) => {
                buf.push(1);
                put_f64(&mut buf, v);
            }
            None => buf.push(0),
        }
        match row.eval_burned_pct {
            Some(v) => {
                buf.push(1);
                put_f64(&mut buf, v);
            }
            None => buf.push(0),
        }
    }

    write_atomic(path, &buf)
}

pub fn load_run_state(path: &Path) -> Result<TrainState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(MAGIC)?;
    let online = read_network(&mut r, path)?;
    let target = read_network(&mut r, path)?;

    let adam_t = r.u64()?;
    let n_params = r.u32()? as usize;
    let mut m = Vec::with_capacity(n_params);
    let mut v = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let len = r.u64()? as usize;
        let mut mi = Vec::with_capacity(len);
        for _ in 0..len {
            mi.push(r.f64()?);
        }
        let mut vi = Vec::with_capacity(len);
        for _ in 0..len {
            vi.push(r.f64()?);
        }
        m.push(mi);
        v.push(vi);
    }
    let mut adam = Adam::new(&online);
    if adam.m.len() != m.len() {
        return Err(Error::parse(path, 0, "optimizer state does not match network"));
    }
    adam.t = adam_t;
    adam.m = m;
    adam.v = v;

    let capacity = r.u64()? as usize;
    let n_demos = r.u32()? as usize;
    let mut demos = Vec::with_capacity(n_demos);
    for _ in 0..n_demos {
        demos.push(read_transition(&mut r)?);
    }
    let n_agent = r.u32()? as usize;
    let mut agent = Vec::with_capacity(n_agent);
    for _ in 0..n_agent {
        agent.push(read_transition(&mut r)?);
    }
    let next_slot = r.u64()? as usize;
    let buffer = ReplayBuffer::from_parts(capacity, demos, agent, next_slot);

    let epsilon = r.f64()?;
    let episode = r.u64()? as usize;
    let update_count = r.u64()?;
    let rng_act = Rng::restore(r.u64()?);
    let rng_env = Rng::restore(r.u64()?);
    let rng_sample = Rng::restore(r.u64()?);

    let n_rows = r.u32()? as usize;
    let mut curve = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let episode = r.u64()? as usize;
        let ret = r.f64()?;
        let epsilon = r.f64()?;
        let mean_loss = if r.u8()? != 0 { Some(r.f64()?) } else { None };
        let eval_burned_pct = if r.u8()? != 0 { Some(r.f64()?) } else { None };
        curve.push(EpisodeRow {
            episode,
            ret,
            epsilon,
            mean_loss,
            eval_burned_pct,
        });
    }
    r.done()?;

    Ok(TrainState {
        online,
        target,
        adam,
        buffer,
        epsilon,
        episode,
        update_count,
        rng_act,
        rng_env,
        rng_sample,
        curve,
    })
}

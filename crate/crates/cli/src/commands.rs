//! Command implementations. Each command is deterministic given
//! (spec, seed), writes its artifacts atomically under the output directory,
//! and returns a short human-readable summary.

use std::fmt::Write as _;
use std::path::Path;

use firebreak_core::agent::{
    self, init_train_state, load_run_state, pretrain, save_run_state, train, TrainState,
};
use firebreak_core::dpv::{baseline_step, generate_demonstrations, load_demonstrations, save_demonstrations};
use firebreak_core::env::{Env, EnvState};
use firebreak_core::error::{Error, Result};
use firebreak_core::files::{write_atomic, write_pgm, write_value_grid};
use firebreak_core::firesim::{average_burned, burn_probability_map, run_batch, FireOutcome};
use firebreak_core::landscape::{shrink_nearest, Landscape};
use firebreak_core::nn::{grad_cam, load_network, save_network, QNetwork};
use firebreak_core::rng::{hash2, hash3, Rng};

use crate::config::ExperimentSpec;
use crate::report::EvalReport;

/// Simulates untreated fires and writes the burn-probability map plus a
/// summary. A landscape whose ignition zone holds no fuel burns nothing.
pub fn cmd_simulate(spec: &ExperimentSpec, fires: Option<usize>) -> Result<String> {
    let world = spec.load_world()?;
    let n = fires.unwrap_or(spec.train.eval_fires);
    let zone_flammable = world
        .zone
        .cells(world.landscape.cols())
        .iter()
        .any(|&i| world.landscape.is_flammable(i));
    let outcomes = if zone_flammable {
        run_batch(
            &world.landscape,
            &world.spread,
            &world.weather,
            &world.zone,
            n,
            hash2(spec.seed, 0x51),
        )?
    } else {
        let center = world.landscape.index(world.zone.center.0, world.zone.center.1);
        vec![
            FireOutcome {
                rows: world.landscape.rows(),
                cols: world.landscape.cols(),
                ignition: center,
                burned: Vec::new(),
                edges: Vec::new(),
            };
            n
        ]
    };
    let map = burn_probability_map(&outcomes)?;
    map.write_grid(&spec.out_dir.join("burn_map.grid"))?;
    map.write_pgm(&spec.out_dir.join("burn_map.pgm"))?;

    let mean = average_burned(&outcomes)?;
    let pct = 100.0 * mean / world.landscape.n_cells() as f64;
    let mut csv = String::from("fires,mean_burned_cells,mean_burned_pct\n");
    let _ = writeln!(csv, "{},{},{}", n, mean, pct);
    write_atomic(&spec.out_dir.join("simulate_summary.csv"), csv.as_bytes())?;
    Ok(format!(
        "simulated {} untreated fires: mean burned {:.2} cells ({:.2}%)",
        n, mean, pct
    ))
}

/// Generates demonstrator episodes and writes the demonstration file.
pub fn cmd_demo_gen(spec: &ExperimentSpec) -> Result<String> {
    let env = spec.build_env()?;
    let t = &spec.train;
    let demos = generate_demonstrations(
        &env,
        t.demo_episodes,
        t.sims_per_step,
        hash2(spec.seed, 0xDE30),
        t.gamma,
        t.n_step,
    )?;
    save_demonstrations(
        &spec.demo_file(),
        env.base().fingerprint(),
        env.base().rows(),
        env.base().cols(),
        &demos,
    )?;
    let episodes = t.demo_episodes;
    let mean_return: f64 =
        demos.iter().map(|d| d.reward).sum::<f64>() / episodes as f64;
    let mut csv = String::from("episodes,transitions,mean_return\n");
    let _ = writeln!(csv, "{},{},{}", episodes, demos.len(), mean_return);
    write_atomic(&spec.out_dir.join("demo_summary.csv"), csv.as_bytes())?;
    Ok(format!(
        "wrote {} demonstration transitions from {} episodes to {}",
        demos.len(),
        episodes,
        spec.demo_file().display()
    ))
}

fn curve_csv(state: &TrainState) -> String {
    let mut csv = String::from("episode,return,epsilon,loss_mean,eval_burned_pct\n");
    for row in &state.curve {
        let loss = row.mean_loss.map(|v| v.to_string()).unwrap_or_default();
        let eval = row
            .eval_burned_pct
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", row.episode, row.ret, row.epsilon, loss, eval);
    }
    csv
}

fn pretrain_csv(losses: &[f64]) -> String {
    let mut csv = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, l);
    }
    csv
}

/// Pre-trains on the demonstration file alone and writes a checkpoint plus
/// the loss curve.
pub fn cmd_pretrain(spec: &ExperimentSpec) -> Result<String> {
    let env = spec.build_env()?;
    let demos = load_demonstrations(
        &spec.demo_file(),
        Some(env.base().fingerprint()),
        spec.train.gamma,
        spec.train.n_step,
    )?;
    let mut state = init_train_state(&env, &spec.train, demos)?;
    let losses = pretrain(&env, &mut state, &spec.train, spec.train.pretrain_steps)?;
    write_atomic(
        &spec.out_dir.join("pretrain_loss.csv"),
        pretrain_csv(&losses).as_bytes(),
    )?;
    let ckpt = spec.out_dir.join("pretrain_checkpoint.fbq");
    save_network(&ckpt, &state.online)?;
    Ok(format!(
        "pre-trained {} steps on {} demonstrations; checkpoint at {}",
        losses.len(),
        state.buffer.demo_len(),
        ckpt.display()
    ))
}

/// Pre-trains (unless `no_demos`) and runs the main training loop, writing
/// the learning curve and the final checkpoint. With `resume`, continues
/// from the latest run-state snapshot in the output directory.
pub fn cmd_train(spec: &ExperimentSpec, no_demos: bool, resume: bool) -> Result<String> {
    let env = spec.build_env()?;
    let run_state_path = spec.out_dir.join("run_state.bin");

    let mut state = if resume {
        if !run_state_path.is_file() {
            return Err(Error::state(format!(
                "no run state to resume at {}",
                run_state_path.display()
            )));
        }
        load_run_state(&run_state_path)?
    } else if no_demos {
        init_train_state(&env, &spec.train, Vec::new())?
    } else {
        let demos = load_demonstrations(
            &spec.demo_file(),
            Some(env.base().fingerprint()),
            spec.train.gamma,
            spec.train.n_step,
        )?;
        let mut state = init_train_state(&env, &spec.train, demos)?;
        let losses = pretrain(&env, &mut state, &spec.train, spec.train.pretrain_steps)?;
        write_atomic(
            &spec.out_dir.join("pretrain_loss.csv"),
            pretrain_csv(&losses).as_bytes(),
        )?;
        state
    };

    train(&env, &mut state, &spec.train, Some(&spec.out_dir))?;

    write_atomic(&spec.out_dir.join("curve.csv"), curve_csv(&state).as_bytes())?;
    save_network(&spec.checkpoint(), &state.online)?;
    save_run_state(&run_state_path, &state)?;
    let last = state.curve.last();
    Ok(format!(
        "trained {} episodes ({}); final return {:.4}; checkpoint at {}",
        state.episode,
        spec.train.algo.name(),
        last.map(|r| r.ret).unwrap_or(f64::NAN),
        spec.checkpoint().display()
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Trained,
    Baseline,
    Random,
}

impl Policy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trained" => Ok(Policy::Trained),
            "baseline" => Ok(Policy::Baseline),
            "random" => Ok(Policy::Random),
            other => Err(Error::config(format!(
                "unknown policy '{other}' (expected trained, baseline, or random); \
                 every policy must place the full firebreak budget"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Trained => "trained",
            Policy::Baseline => "baseline",
            Policy::Random => "random",
        }
    }
}

/// Rolls a policy out for one full episode and returns the terminal state.
fn rollout(
    env: &Env,
    policy: Policy,
    net: Option<&QNetwork>,
    spec: &ExperimentSpec,
) -> Result<EnvState> {
    let mut state = env.reset();
    let mut env_rng = Rng::derived(spec.seed, 0xE0);
    let mut policy_rng = Rng::derived(spec.seed, 0xA0);
    let values = vec![1.0; env.n_cells()];
    for t in 0..env.budget() {
        let action = match policy {
            Policy::Trained => agent::act(env, net.unwrap(), &state, 0.0, &mut policy_rng)?,
            Policy::Baseline => baseline_step(
                env,
                &state,
                spec.train.sims_per_step,
                &values,
                hash3(spec.seed, 0xBA5E, t as u64),
            )?,
            Policy::Random => {
                let mask = state.action_mask();
                let available: Vec<usize> = mask
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(|(i, _)| i)
                    .collect();
                available[policy_rng.next_below(available.len())]
            }
        };
        let (next, _, _) = env.step(&state, action, &mut env_rng)?;
        state = next;
    }
    Ok(state)
}

/// Evaluates a policy: one full rollout, then the shared fixed-seed fire
/// batch on the treated landscape.
pub fn cmd_evaluate(spec: &ExperimentSpec, policy: Policy) -> Result<String> {
    let env = spec.build_env()?;
    let net = match policy {
        Policy::Trained => Some(load_network(&spec.checkpoint())?),
        _ => None,
    };
    if let Some(n) = &net {
        if n.rows != env.base().rows() || n.cols != env.base().cols() {
            return Err(Error::config("checkpoint grid size does not match landscape"));
        }
    }
    let terminal = rollout(&env, policy, net.as_ref(), spec)?;

    let cfg = env.config();
    let outcomes = run_batch(
        &terminal.grid,
        &cfg.spread,
        &cfg.weather,
        &cfg.zone,
        spec.train.eval_fires,
        spec.train.eval_seed,
    )?;
    let report = EvalReport::from_outcomes(
        policy.name(),
        env.n_cells(),
        &terminal.placed,
        &outcomes,
    );
    let report_path = spec
        .out_dir
        .join(format!("eval_report_{}.csv", policy.name()));
    write_atomic(&report_path, report.to_csv().as_bytes())?;
    let fires_path = spec
        .out_dir
        .join(format!("eval_fires_{}.csv", policy.name()));
    write_atomic(&fires_path, report.fires_csv().as_bytes())?;
    Ok(format!(
        "{}: mean burned {:.2}% (std {:.2}) over {} fires; report at {}",
        policy.name(),
        report.mean_burned_pct,
        report.std_burned_pct,
        report.burned_counts.len(),
        report_path.display()
    ))
}

/// Greedy rollout with one attention map per decision.
pub fn cmd_gradcam(spec: &ExperimentSpec, episode_seed: u64) -> Result<String> {
    let env = spec.build_env()?;
    let net = load_network(&spec.checkpoint())?;
    if net.rows != env.base().rows() || net.cols != env.base().cols() {
        return Err(Error::config("checkpoint grid size does not match landscape"));
    }
    let mut state = env.reset();
    let mut rng = Rng::derived(episode_seed, 0x6C);
    let mut decisions = String::from("step,row,col\n");
    let cols = env.base().cols();
    for t in 0..env.budget() {
        let action = agent::act(&env, &net, &state, 0.0, &mut rng)?;
        let enc = env.encode_state(&state);
        let mask = state.action_mask();
        let map = grad_cam(&net, &enc, &mask, action)?;
        let grid_path = spec.out_dir.join(format!("attention_step{t}.grid"));
        let pgm_path = spec.out_dir.join(format!("attention_step{t}.pgm"));
        write_value_grid(&grid_path, net.rows, net.cols, map.data())?;
        write_pgm(&pgm_path, net.rows, net.cols, map.data())?;
        let _ = writeln!(decisions, "{},{},{}", t, action / cols, action % cols);
        let (next, _, _) = env.step(&state, action, &mut rng)?;
        state = next;
    }
    write_atomic(
        &spec.out_dir.join("gradcam_decisions.csv"),
        decisions.as_bytes(),
    )?;
    Ok(format!(
        "wrote {} attention maps to {}",
        env.budget(),
        spec.out_dir.display()
    ))
}

/// Nearest-neighbor downscale of the landscape file.
pub fn cmd_shrink(spec: &ExperimentSpec, rows: usize, cols: usize, to: &Path) -> Result<String> {
    let world = spec.load_world()?;
    let small = shrink_nearest(&world.landscape, rows, cols)?;
    small.save(to)?;
    Ok(format!("wrote {}x{} landscape to {}", rows, cols, to.display()))
}

/// Replays a batch of untreated outcomes for tests and tools.
pub fn untreated_outcomes(spec: &ExperimentSpec, n: usize, seed_tag: u64) -> Result<Vec<FireOutcome>> {
    let world = spec.load_world()?;
    run_batch(
        &world.landscape,
        &world.spread,
        &world.weather,
        &world.zone,
        n,
        hash2(spec.seed, seed_tag),
    )
}

/// Loads just the landscape named by a spec (for tools).
pub fn load_spec_landscape(spec: &ExperimentSpec) -> Result<Landscape> {
    Ok(spec.load_world()?.landscape)
}

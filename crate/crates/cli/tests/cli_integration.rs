//! End-to-end checks of the command surfaces: exit codes, artifact files,
//! fixture calibration, and the demonstration file lifecycle.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use firebreak_cli::commands::{self, Policy};
use firebreak_cli::config::ExperimentSpec;
use firebreak_core::dpv::load_demonstrations;
use firebreak_core::firesim::average_burned;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fb_cli_{tag}"));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_firebreak"))
}

#[test]
fn exit_codes_follow_the_contract() {
    // no arguments: usage, code 2
    let st = bin().status().unwrap();
    assert_eq!(st.code(), Some(2));

    // unknown flag: 2
    let st = bin().args(["simulate", "--bogus"]).status().unwrap();
    assert_eq!(st.code(), Some(2));

    // missing config file: 2
    let st = bin()
        .args(["simulate", "--config", "/nonexistent.conf"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    // unknown policy: 2
    let conf = fixtures_dir().join("fixture10.conf");
    let st = bin()
        .args(["evaluate", "--config"])
        .arg(&conf)
        .args(["--policy", "untreated", "--out"])
        .arg(out_dir("exit_pol"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2), "policies that skip the budget are rejected");

    // evaluate trained without a checkpoint: runtime error 3
    let st = bin()
        .args(["evaluate", "--config"])
        .arg(&conf)
        .args(["--policy", "trained", "--out"])
        .arg(out_dir("exit_ckpt"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));

    // happy path: 0
    let st = bin()
        .args(["simulate", "--config"])
        .arg(&conf)
        .args(["--fires", "50", "--out"])
        .arg(out_dir("exit_ok"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn simulate_writes_map_and_summary() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture10.conf")).unwrap();
    let out = out_dir("sim_files");
    spec.override_out(out.clone());
    commands::cmd_simulate(&spec, Some(200)).unwrap();
    for name in ["burn_map.grid", "burn_map.pgm", "simulate_summary.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let text = fs::read_to_string(out.join("burn_map.grid")).unwrap();
    assert!(text.starts_with("rows 10\ncols 10\n"));
    let pgm = fs::read(out.join("burn_map.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n10 10\n255\n"));
    assert_eq!(pgm.len(), b"P5\n10 10\n255\n".len() + 100);
}

#[test]
fn simulate_all_non_fuel_is_zero_burn() {
    let dir = out_dir("sim_zero");
    let mut grid = String::from("rows 6\ncols 6\n");
    for _ in 0..6 {
        grid.push_str("0 0 0 0 0 0\n");
    }
    fs::write(dir.join("z.grid"), grid).unwrap();
    fs::write(dir.join("z.fuels"), "0 firebreak 0.0\n1 grass 0.5\n").unwrap();
    fs::write(dir.join("z.csv"), "id,wind_dir_deg,wind_speed\n0,0,1.0\n").unwrap();
    fs::write(
        dir.join("z.conf"),
        "landscape = z.grid\nfuels = z.fuels\nweather = z.csv\n\
         ignition_row = 3\nignition_col = 3\nignition_radius = 1\n",
    )
    .unwrap();
    let mut spec = ExperimentSpec::from_file(&dir.join("z.conf")).unwrap();
    spec.override_out(dir.clone());
    let summary = commands::cmd_simulate(&spec, Some(40)).unwrap();
    assert!(summary.contains("(0.00%)"), "{summary}");
    let text = fs::read_to_string(dir.join("simulate_summary.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("40,0,0"));
}

#[test]
fn fixture20_untreated_burn_matches_calibration() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture20.conf")).unwrap();
    spec.override_out(out_dir("cal20"));
    let outcomes = commands::untreated_outcomes(&spec, 500, 0x51).unwrap();
    let pct = 100.0 * average_burned(&outcomes).unwrap() / 400.0;
    assert!(
        (15.0..=21.0).contains(&pct),
        "20x20 untreated burn {pct:.2}% outside 18% +/- 3"
    );
}

#[test]
fn fixture40_untreated_burn_matches_calibration() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture40.conf")).unwrap();
    spec.override_out(out_dir("cal40"));
    let outcomes = commands::untreated_outcomes(&spec, 500, 0x51).unwrap();
    let pct = 100.0 * average_burned(&outcomes).unwrap() / 1600.0;
    assert!(
        (27.0..=35.0).contains(&pct),
        "40x40 untreated burn {pct:.2}% outside 31% +/- 4"
    );
}

#[test]
fn fixture10_batch_mean_near_frozen_calibration() {
    // frozen once from a 10,000-run estimate of the shipped fixture
    const CALIBRATED_BURNED_FRACTION: f64 = 0.1750;
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture10.conf")).unwrap();
    spec.override_out(out_dir("cal10"));
    let outcomes = commands::untreated_outcomes(&spec, 50, 0x51).unwrap();
    let frac = average_burned(&outcomes).unwrap() / 100.0;
    assert!(
        (frac - CALIBRATED_BURNED_FRACTION).abs() <= 0.05,
        "50-run mean {frac:.4} vs calibrated {CALIBRATED_BURNED_FRACTION}"
    );
}

#[test]
fn demo_gen_writes_loadable_file() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture10.conf")).unwrap();
    spec.override_out(out_dir("demo_cycle"));
    spec.train.demo_episodes = 4;
    spec.train.sims_per_step = 8;
    commands::cmd_demo_gen(&spec).unwrap();

    let env = spec.build_env().unwrap();
    let demos = load_demonstrations(
        &spec.demo_file(),
        Some(env.base().fingerprint()),
        spec.train.gamma,
        spec.train.n_step,
    )
    .unwrap();
    assert_eq!(demos.len(), 4 * env.budget());
    assert!(demos.iter().all(|t| t.is_demo));
    // one terminal per episode
    assert_eq!(demos.iter().filter(|t| t.done).count(), 4);
}

#[test]
fn thousand_demo_episodes_round_trip_into_protected_region() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture10.conf")).unwrap();
    spec.override_out(out_dir("demo_1000"));
    spec.train.demo_episodes = 1000;
    spec.train.sims_per_step = 4; // keep generation quick; fidelity is irrelevant here
    commands::cmd_demo_gen(&spec).unwrap();

    let env = spec.build_env().unwrap();
    let demos = load_demonstrations(
        &spec.demo_file(),
        Some(env.base().fingerprint()),
        spec.train.gamma,
        spec.train.n_step,
    )
    .unwrap();
    assert_eq!(demos.len(), 5000, "1000 episodes x budget 5");

    let mut buffer = firebreak_core::agent::ReplayBuffer::new(spec.train.buffer_capacity).unwrap();
    buffer.load_demos(demos.clone()).unwrap();
    assert_eq!(buffer.demo_len(), 5000);

    // lossless: regenerate and compare
    let again = firebreak_core::dpv::generate_demonstrations(
        &env,
        1000,
        4,
        firebreak_core::rng::hash2(spec.seed, 0xDE30),
        spec.train.gamma,
        spec.train.n_step,
    )
    .unwrap();
    assert_eq!(demos, again);
}

#[test]
fn gradcam_writes_one_map_per_decision() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture10.conf")).unwrap();
    let out = out_dir("gradcam_cmd");
    spec.override_out(out.clone());
    // untrained checkpoint is fine for the artifact contract
    let env = spec.build_env().unwrap();
    let net = firebreak_core::nn::QNetwork::new(
        spec.train.arch,
        spec.train.algo.head(),
        env.base().rows(),
        env.base().cols(),
        env.channels(),
        9,
    )
    .unwrap();
    firebreak_core::nn::save_network(&spec.checkpoint(), &net).unwrap();

    commands::cmd_gradcam(&spec, 11).unwrap();
    for t in 0..env.budget() {
        assert!(out.join(format!("attention_step{t}.grid")).is_file());
        assert!(out.join(format!("attention_step{t}.pgm")).is_file());
    }
    let decisions = fs::read_to_string(out.join("gradcam_decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), env.budget() + 1);
}

#[test]
fn shrink_produces_requested_dims() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture20.conf")).unwrap();
    let out = out_dir("shrink_cmd");
    spec.override_out(out.clone());
    let to = out.join("small.grid");
    commands::cmd_shrink(&spec, 10, 10, &to).unwrap();
    let text = fs::read_to_string(&to).unwrap();
    assert!(text.starts_with("rows 10\ncols 10\n"));
}

#[test]
fn train_resume_reproduces_uninterrupted_curve() {
    let conf = fixtures_dir().join("fixture10.conf");
    let mut full = ExperimentSpec::from_file(&conf).unwrap();
    full.override_out(out_dir("resume_full"));
    full.override_seed(31);
    full.train.episodes = 16;
    full.train.pretrain_steps = 6;
    full.train.demo_episodes = 2;
    full.train.sims_per_step = 4;
    full.train.checkpoint_interval = 1000; // no mid-run snapshots
    commands::cmd_demo_gen(&full).unwrap();
    commands::cmd_train(&full, false, false).unwrap();
    let reference = fs::read(full.out_dir.join("curve.csv")).unwrap();

    // interrupted: stop at 9 episodes, then resume to 16 in the same out dir
    let mut half = ExperimentSpec::from_file(&conf).unwrap();
    half.override_out(out_dir("resume_half"));
    half.override_seed(31);
    half.train.episodes = 9;
    half.train.pretrain_steps = 6;
    half.train.demo_episodes = 2;
    half.train.sims_per_step = 4;
    half.train.checkpoint_interval = 1000;
    commands::cmd_demo_gen(&half).unwrap();
    commands::cmd_train(&half, false, false).unwrap();

    let mut rest = ExperimentSpec::from_file(&conf).unwrap();
    rest.override_out(half.out_dir.clone());
    rest.override_seed(31);
    rest.train.episodes = 16;
    rest.train.pretrain_steps = 6;
    rest.train.demo_episodes = 2;
    rest.train.sims_per_step = 4;
    rest.train.checkpoint_interval = 1000;
    commands::cmd_train(&rest, false, true).unwrap();

    let resumed = fs::read(rest.out_dir.join("curve.csv")).unwrap();
    assert_eq!(reference, resumed, "resumed curve differs from uninterrupted run");
}

#[test]
fn evaluate_rejects_mismatched_checkpoint() {
    let mut spec = ExperimentSpec::from_file(&fixtures_dir().join("fixture10.conf")).unwrap();
    let out = out_dir("bad_ckpt");
    spec.override_out(out.clone());
    let net =
        firebreak_core::nn::QNetwork::new(firebreak_core::nn::Arch::Small, firebreak_core::nn::HeadKind::Single, 8, 8, 5, 1)
            .unwrap();
    firebreak_core::nn::save_network(&spec.checkpoint(), &net).unwrap();
    let err = commands::cmd_evaluate(&spec, Policy::Trained).unwrap_err();
    assert!(err.to_string().contains("grid size"), "{err}");
}

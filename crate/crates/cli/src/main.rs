use std::path::PathBuf;
use std::process::ExitCode;

use firebreak_cli::commands::{self, Policy};
use firebreak_cli::config::ExperimentSpec;
use firebreak_core::error::Error;

const USAGE: &str = "\
firebreak — firebreak placement laboratory

USAGE:
    firebreak <COMMAND> --config <PATH> [--seed <INT>] [--out <DIR>] [flags]

COMMANDS:
    simulate    run untreated fires, write burn map and summary
                  [--fires <N>]
    demo-gen    generate demonstrator episodes into the demo file
    pretrain    pre-train on demonstrations only, write a checkpoint
    train       pre-train (unless --no-demos) then train
                  [--algo dqn|2dqn|ddqn] [--no-demos] [--resume]
    evaluate    roll out a policy and measure burned percent
                  --policy trained|baseline|random
    gradcam     greedy rollout with one attention map per step
                  [--episode-seed <INT>]
    shrink      nearest-neighbor downscale of the landscape
                  --rows <R> --cols <C> --to <PATH>

EXIT CODES: 0 success, 2 configuration error, 3 runtime error
";

struct Args {
    command: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    fires: Option<usize>,
    algo: Option<String>,
    no_demos: bool,
    resume: bool,
    policy: Option<String>,
    episode_seed: Option<u64>,
    rows: Option<usize>,
    cols: Option<usize>,
    to: Option<PathBuf>,
}

fn parse_args(argv: &[String]) -> Result<Args, String> {
    let mut it = argv.iter();
    let command = it
        .next()
        .ok_or_else(|| "missing command".to_string())?
        .clone();
    let mut args = Args {
        command,
        config: None,
        seed: None,
        out: None,
        fires: None,
        algo: None,
        no_demos: false,
        resume: false,
        policy: None,
        episode_seed: None,
        rows: None,
        cols: None,
        to: None,
    };
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("flag {name} requires a value"))
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                args.seed = Some(
                    value("--seed")?
                        .parse()
                        .map_err(|_| "--seed must be an integer".to_string())?,
                )
            }
            "--out" => args.out = Some(PathBuf::from(value("--out")?)),
            "--fires" => {
                args.fires = Some(
                    value("--fires")?
                        .parse()
                        .map_err(|_| "--fires must be an integer".to_string())?,
                )
            }
            "--algo" => args.algo = Some(value("--algo")?),
            "--no-demos" => args.no_demos = true,
            "--resume" => args.resume = true,
            "--policy" => args.policy = Some(value("--policy")?),
            "--episode-seed" => {
                args.episode_seed = Some(
                    value("--episode-seed")?
                        .parse()
                        .map_err(|_| "--episode-seed must be an integer".to_string())?,
                )
            }
            "--rows" => {
                args.rows = Some(
                    value("--rows")?
                        .parse()
                        .map_err(|_| "--rows must be an integer".to_string())?,
                )
            }
            "--cols" => {
                args.cols = Some(
                    value("--cols")?
                        .parse()
                        .map_err(|_| "--cols must be an integer".to_string())?,
                )
            }
            "--to" => args.to = Some(PathBuf::from(value("--to")?)),
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(args)
}

fn run(args: Args) -> Result<String, Error> {
    let config_path = args
        .config
        .ok_or_else(|| Error::config("--config is required"))?;
    // an unreadable config file is a configuration error, not a runtime one
    let mut spec = ExperimentSpec::from_file(&config_path).map_err(|e| match e {
        Error::Io { path, source } => {
            Error::config(format!("cannot read config {}: {}", path.display(), source))
        }
        other => other,
    })?;
    if let Some(seed) = args.seed {
        spec.override_seed(seed);
    }
    if let Some(out) = args.out {
        spec.override_out(out);
    }
    if let Some(algo) = &args.algo {
        spec.train.algo = firebreak_core::agent::Algo::parse(algo)?;
    }

    match args.command.as_str() {
        "simulate" => commands::cmd_simulate(&spec, args.fires),
        "demo-gen" => commands::cmd_demo_gen(&spec),
        "pretrain" => commands::cmd_pretrain(&spec),
        "train" => commands::cmd_train(&spec, args.no_demos, args.resume),
        "evaluate" => {
            let policy = args
                .policy
                .ok_or_else(|| Error::config("evaluate requires --policy"))?;
            commands::cmd_evaluate(&spec, Policy::parse(&policy)?)
        }
        "gradcam" => commands::cmd_gradcam(&spec, args.episode_seed.unwrap_or(spec.seed)),
        "shrink" => {
            let rows = args.rows.ok_or_else(|| Error::config("shrink requires --rows"))?;
            let cols = args.cols.ok_or_else(|| Error::config("shrink requires --cols"))?;
            let to = args.to.ok_or_else(|| Error::config("shrink requires --to"))?;
            commands::cmd_shrink(&spec, rows, cols, &to)
        }
        other => Err(Error::config(format!("unknown command '{other}'"))),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if argv.is_empty() || argv[0] == "--help" || argv[0] == "-h" || argv[0] == "help" {
        print!("{USAGE}");
        return ExitCode::from(if argv.is_empty() { 2 } else { 0 });
    }
    let args = match parse_args(&argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };
    match run(args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } | Error::InvalidArgument(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

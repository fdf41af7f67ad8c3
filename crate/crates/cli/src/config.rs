//! Experiment configuration: a flat `key = value` text format whose keys
//! mirror the environment and training config fields. Relative paths resolve
//! against the config file's directory. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use firebreak_core::agent::{Algo, TrainConfig};
use firebreak_core::env::{Env, EnvConfig};
use firebreak_core::error::{Error, Result};
use firebreak_core::firesim::SpreadModel;
use firebreak_core::landscape::{FuelCatalog, IgnitionZone, Landscape, WeatherScenario};
use firebreak_core::nn::Arch;

/// Everything a command needs: input files, environment parameters, training
/// parameters, output directory, and the master seed.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub landscape_path: PathBuf,
    pub fuels_path: PathBuf,
    pub weather_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,

    pub alpha: f64,
    /// Terminal reward scale; `None` means the default -1/|cells|.
    pub k: Option<f64>,
    pub sims_per_eval: usize,
    pub ignition: Option<(usize, usize)>,
    pub ignition_radius: usize,
    pub wind_gain: f64,
    pub speed_ref: f64,
    pub initial_forbidden: Vec<usize>,

    pub train: TrainConfig,

    /// Explicit demo-file path; `None` derives `<out>/demos.fbd`.
    pub demo_file: Option<PathBuf>,
    /// Explicit checkpoint path; `None` derives `<out>/checkpoint_final.fbq`.
    pub checkpoint: Option<PathBuf>,
}

fn parse_kv(path: &Path) -> Result<BTreeMap<String, (usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line_no, "expected 'key = value'"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), (line_no, value)).is_some() {
            return Err(Error::parse(path, line_no, format!("duplicate key '{key}'")));
        }
    }
    Ok(map)
}

struct KvReader<'a> {
    path: &'a Path,
    map: BTreeMap<String, (usize, String)>,
    used: Vec<String>,
}

impl<'a> KvReader<'a> {
    fn get(&mut self, key: &str) -> Option<(usize, String)> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.push(key.to_string());
        }
        v
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some((line, raw)) => raw.parse::<T>().map_err(|_| {
                Error::parse(self.path, line, format!("cannot parse value for '{key}'"))
            }),
        }
    }

    fn required_path(&mut self, key: &str, base: &Path) -> Result<PathBuf> {
        match self.get(key) {
            Some((_, raw)) => Ok(resolve(base, &raw)),
            None => Err(Error::config(format!(
                "{}: missing required key '{key}'",
                self.path.display()
            ))),
        }
    }

    fn optional_path(&mut self, key: &str, base: &Path, default: PathBuf) -> Result<PathBuf> {
        match self.get(key) {
            Some((_, raw)) => Ok(resolve(base, &raw)),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.used.contains(key) {
                return Err(Error::config(format!(
                    "{}: unknown key '{key}'",
                    self.path.display()
                )));
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let mut kv = KvReader {
            path,
            map: parse_kv(path)?,
            used: Vec::new(),
        };

        let landscape_path = kv.required_path("landscape", &base)?;
        let fuels_path = kv.required_path("fuels", &base)?;
        let weather_path = kv.required_path("weather", &base)?;
        let out_dir = kv.optional_path("out", &base, base.join("out"))?;

        let seed = kv.parse("seed", 0u64)?;
        let alpha = kv.parse("alpha", 0.05f64)?;
        let k = match kv.get("k") {
            None => None,
            Some((line, raw)) if raw != "auto" => Some(raw.parse::<f64>().map_err(|_| {
                Error::parse(path, line, "k must be a number or 'auto'")
            })?),
            Some(_) => None,
        };
        let sims_per_eval = kv.parse("sims_per_eval", 32usize)?;
        let ignition_row = kv.parse("ignition_row", usize::MAX)?;
        let ignition_col = kv.parse("ignition_col", usize::MAX)?;
        let ignition = if ignition_row == usize::MAX && ignition_col == usize::MAX {
            None
        } else if ignition_row != usize::MAX && ignition_col != usize::MAX {
            Some((ignition_row, ignition_col))
        } else {
            return Err(Error::config(
                "ignition_row and ignition_col must be given together",
            ));
        };
        let ignition_radius = kv.parse("ignition_radius", 2usize)?;
        let wind_gain = kv.parse("wind_gain", 1.0f64)?;
        let speed_ref = kv.parse("speed_ref", 1.0f64)?;
        let initial_forbidden = match kv.get("initial_forbidden") {
            None => Vec::new(),
            Some((line, raw)) => raw
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| {
                        Error::parse(path, line, "initial_forbidden must be a comma list of cells")
                    })
                })
                .collect::<Result<Vec<usize>>>()?,
        };

        let algo = match kv.get("algo") {
            None => Algo::Dqn,
            Some((line, raw)) => {
                Algo::parse(&raw).map_err(|e| Error::parse(path, line, e.to_string()))?
            }
        };
        let arch = match kv.get("arch") {
            None => Arch::Small,
            Some((line, raw)) => {
                Arch::parse(&raw).map_err(|e| Error::parse(path, line, e.to_string()))?
            }
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            algo,
            arch,
            buffer_capacity: kv.parse("buffer_capacity", defaults.buffer_capacity)?,
            batch_size: kv.parse("batch_size", defaults.batch_size)?,
            sync_every: kv.parse("sync_every", defaults.sync_every)?,
            episodes: kv.parse("episodes", defaults.episodes)?,
            lr: kv.parse("lr", defaults.lr)?,
            gamma: kv.parse("gamma", defaults.gamma)?,
            eps_start: kv.parse("eps_start", defaults.eps_start)?,
            eps_decay: kv.parse("eps_decay", defaults.eps_decay)?,
            eps_min: kv.parse("eps_min", defaults.eps_min)?,
            lambda1: kv.parse("lambda1", defaults.lambda1)?,
            lambda2: kv.parse("lambda2", defaults.lambda2)?,
            lambda3: kv.parse("lambda3", defaults.lambda3)?,
            margin: kv.parse("margin", defaults.margin)?,
            n_step: kv.parse("n_step", defaults.n_step)?,
            pretrain_steps: kv.parse("pretrain_steps", defaults.pretrain_steps)?,
            demo_episodes: kv.parse("demo_episodes", defaults.demo_episodes)?,
            sims_per_step: kv.parse("sims_per_step", defaults.sims_per_step)?,
            seed,
            eval_interval: kv.parse("eval_interval", defaults.eval_interval)?,
            eval_fires: kv.parse("eval_fires", defaults.eval_fires)?,
            eval_seed: kv.parse("eval_seed", defaults.eval_seed)?,
            checkpoint_interval: kv.parse("checkpoint_interval", 500usize)?,
        };

        let demo_file = kv.get("demo_file").map(|(_, raw)| resolve(&base, &raw));
        let checkpoint = kv.get("checkpoint").map(|(_, raw)| resolve(&base, &raw));

        kv.finish()?;

        let spec = ExperimentSpec {
            landscape_path,
            fuels_path,
            weather_path,
            out_dir,
            seed,
            alpha,
            k,
            sims_per_eval,
            ignition,
            ignition_radius,
            wind_gain,
            speed_ref,
            initial_forbidden,
            train,
            demo_file,
            checkpoint,
        };
        spec.validate_files()?;
        Ok(spec)
    }

    fn validate_files(&self) -> Result<()> {
        for p in [&self.landscape_path, &self.fuels_path, &self.weather_path] {
            if !p.is_file() {
                return Err(Error::config(format!("referenced file missing: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Overrides applied after parsing (CLI flags win over file values).
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn override_out(&mut self, out: PathBuf) {
        self.out_dir = out;
    }

    pub fn demo_file(&self) -> PathBuf {
        self.demo_file
            .clone()
            .unwrap_or_else(|| self.out_dir.join("demos.fbd"))
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("checkpoint_final.fbq"))
    }

    /// Loads just the world files: landscape, weather set, spread model, and
    /// ignition zone. Commands that do not need a decision environment (pure
    /// simulation, shrinking) use this directly.
    pub fn load_world(&self) -> Result<World> {
        let catalog = FuelCatalog::load(&self.fuels_path)?;
        let landscape = Landscape::load(&self.landscape_path, catalog)?;
        let weather = WeatherScenario::load_set(&self.weather_path)?;
        let (rows, cols) = (landscape.rows(), landscape.cols());
        let center = self.ignition.unwrap_or((rows / 2, cols / 2));
        let zone = IgnitionZone::new(center, self.ignition_radius);
        zone.validate(rows, cols).map_err(|e| Error::config(e.to_string()))?;
        let spread = SpreadModel::new(self.wind_gain, self.speed_ref)
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(World {
            landscape,
            weather,
            spread,
            zone,
        })
    }

    /// Loads the world files and assembles the environment.
    pub fn build_env(&self) -> Result<Env> {
        let world = self.load_world()?;
        let k = self.k.unwrap_or(-1.0 / world.landscape.n_cells() as f64);
        let config = EnvConfig {
            alpha: self.alpha,
            k,
            sims_per_eval: self.sims_per_eval,
            zone: world.zone,
            weather: world.weather,
            spread: world.spread,
            initial_forbidden: self.initial_forbidden.clone(),
        };
        Env::new(world.landscape, config)
    }
}

/// The loaded input files of an experiment.
pub struct World {
    pub landscape: Landscape,
    pub weather: Vec<WeatherScenario>,
    pub spread: SpreadModel,
    pub zone: IgnitionZone,
}

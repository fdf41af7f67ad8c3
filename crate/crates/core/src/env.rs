//! The firebreak-placement decision environment.
//!
//! An episode edits a pristine landscape one firebreak per step until the
//! budget `floor(alpha * |cells|)` is exhausted. Intermediate rewards are
//! zero; the terminal reward is the batch-averaged burned-cell count on the
//! treated landscape, scaled by the penalty `k`.

use crate::error::{Error, Result};
use crate::firesim::{average_burned, run_batch, SpreadModel};
use crate::landscape::{IgnitionZone, Landscape, WeatherScenario, NON_FUEL};
use crate::nn::Tensor;
use crate::rng::Rng;

/// Environment parameters. `k` is the terminal-reward scale (normally
/// negative, e.g. -1/|cells| for a burned-fraction penalty).
#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub alpha: f64,
    pub k: f64,
    pub sims_per_eval: usize,
    pub zone: IgnitionZone,
    pub weather: Vec<WeatherScenario>,
    pub spread: SpreadModel,
    pub initial_forbidden: Vec<usize>,
}

/// Budget of firebreak placements for a landscape of `n_cells` cells.
pub fn max_firebreaks(n_cells: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must be in (0,1), got {alpha}")));
    }
    let budget = (alpha * n_cells as f64).floor() as usize;
    if budget == 0 {
        return Err(Error::config(format!(
            "budget floor({alpha} * {n_cells}) is zero: degenerate episode"
        )));
    }
    Ok(budget)
}

/// Mutable episode state: the edited grid, the forbidden set, and the ordered
/// list of placements so far.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub grid: Landscape,
    pub forbidden: Vec<bool>,
    pub placed: Vec<u32>,
    pub t: usize,
}

impl EnvState {
    pub fn available_count(&self) -> usize {
        self.forbidden.iter().filter(|&&f| !f).count()
    }

    /// True exactly on cells that may still be chosen.
    pub fn action_mask(&self) -> Vec<bool> {
        self.grid
            .cells()
            .iter()
            .zip(&self.forbidden)
            .map(|(&code, &f)| !f && code != NON_FUEL)
            .collect()
    }

    pub fn is_available(&self, cell: usize) -> bool {
        cell < self.forbidden.len() && !self.forbidden[cell] && self.grid.code_at(cell) != NON_FUEL
    }
}

/// One (state, action, reward, next state) record in compact form: states are
/// reconstructed from the pristine base landscape plus the ordered placement
/// prefix, so records stay a few dozen bytes each.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// Cells placed before this step, in order.
    pub placed: Vec<u32>,
    pub action: u32,
    pub reward: f64,
    pub done: bool,
    pub is_demo: bool,
    /// Discounted reward sum over the forward n-step window.
    pub n_return: f64,
    /// Placement prefix at the bootstrap state `n` steps ahead; `None` when
    /// the episode terminated inside the window.
    pub n_bootstrap: Option<Vec<u32>>,
}

impl Transition {
    /// Placement prefix of the successor state.
    pub fn next_placed(&self) -> Vec<u32> {
        let mut p = self.placed.clone();
        p.push(self.action);
        p
    }
}

/// The environment: an immutable base landscape plus configuration. Episode
/// state lives outside in [`EnvState`] values.
#[derive(Clone, Debug)]
pub struct Env {
    base: Landscape,
    config: EnvConfig,
    budget: usize,
}

impl Env {
    pub fn new(base: Landscape, config: EnvConfig) -> Result<Self> {
        let budget = max_firebreaks(base.n_cells(), config.alpha)?;
        if config.sims_per_eval == 0 {
            return Err(Error::config("sims_per_eval must be at least 1"));
        }
        if config.weather.is_empty() {
            return Err(Error::config("weather scenario set is empty"));
        }
        config
            .zone
            .validate(base.rows(), base.cols())
            .map_err(|e| Error::config(e.to_string()))?;
        if config.initial_forbidden.iter().any(|&i| i >= base.n_cells()) {
            return Err(Error::config("initial_forbidden cell outside grid"));
        }
        let env = Env {
            base,
            config,
            budget,
        };
        let available = env.reset_forbidden().iter().filter(|&&f| !f).count();
        if available < env.budget {
            return Err(Error::config(format!(
                "budget {} exceeds {} available cells",
                env.budget, available
            )));
        }
        Ok(env)
    }

    pub fn base(&self) -> &Landscape {
        &self.base
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Episode length; every completed episode places exactly this many cells.
    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn n_cells(&self) -> usize {
        self.base.n_cells()
    }

    /// Channels of the state encoding: one per catalog fuel code plus the
    /// placed-firebreak channel.
    pub fn channels(&self) -> usize {
        self.base.catalog().len() + 1
    }

    fn reset_forbidden(&self) -> Vec<bool> {
        let mut forbidden: Vec<bool> = self
            .base
            .cells()
            .iter()
            .map(|&code| code == NON_FUEL)
            .collect();
        for &i in &self.config.initial_forbidden {
            forbidden[i] = true;
        }
        forbidden
    }

    /// Fresh episode state over the pristine base landscape.
    pub fn reset(&self) -> EnvState {
        EnvState {
            grid: self.base.clone(),
            forbidden: self.reset_forbidden(),
            placed: Vec::new(),
            t: 0,
        }
    }

    /// Applies one placement. Non-terminal steps return reward 0; the final
    /// placement runs the evaluation batch on the treated grid and returns
    /// `average_burned * k`.
    pub fn step(
        &self,
        state: &EnvState,
        action: usize,
        rng: &mut Rng,
    ) -> Result<(EnvState, f64, bool)> {
        if action >= self.base.n_cells() {
            return Err(Error::argument(format!(
                "action {} outside grid of {} cells",
                action,
                self.base.n_cells()
            )));
        }
        if !state.is_available(action) {
            return Err(Error::argument(format!(
                "illegal action {}: cell is forbidden or non-fuel",
                action
            )));
        }
        let mut next = state.clone();
        next.grid.set_non_fuel(action);
        next.forbidden[action] = true;
        next.placed.push(action as u32);
        next.t += 1;

        if next.t < self.budget {
            return Ok((next, 0.0, false));
        }
        let master_seed = rng.next_u64();
        let reward = self.terminal_reward(&next.grid, master_seed)?;
        Ok((next, reward, true))
    }

    /// Terminal reward on an arbitrary treated grid with an explicit
    /// simulation seed; `step` draws the seed from its stream, evaluation
    /// protocols pass a fixed one.
    pub fn terminal_reward(&self, grid: &Landscape, master_seed: u64) -> Result<f64> {
        let outcomes = run_batch(
            grid,
            &self.config.spread,
            &self.config.weather,
            &self.config.zone,
            self.config.sims_per_eval,
            master_seed,
        )?;
        Ok(average_burned(&outcomes)? * self.config.k)
    }

    /// Rebuilds the state reached by placing `placed` in order on the base.
    pub fn state_from_placed(&self, placed: &[u32]) -> EnvState {
        let mut state = self.reset();
        for &cell in placed {
            let cell = cell as usize;
            state.grid.set_non_fuel(cell);
            state.forbidden[cell] = true;
            state.placed.push(cell as u32);
            state.t += 1;
        }
        state
    }

    /// Action mask for the state reached by `placed`, without cloning grids.
    pub fn mask_from_placed(&self, placed: &[u32]) -> Vec<bool> {
        let mut mask: Vec<bool> = self
            .base
            .cells()
            .iter()
            .map(|&code| code != NON_FUEL)
            .collect();
        for &i in &self.config.initial_forbidden {
            mask[i] = false;
        }
        for &i in placed {
            mask[i as usize] = false;
        }
        mask
    }

    /// One-hot fuel-code channels plus a placed-firebreak channel, shape
    /// `(channels, rows, cols)`.
    pub fn encode_state(&self, state: &EnvState) -> Tensor {
        let mut t = Tensor::zeros(vec![
            self.channels(),
            self.base.rows(),
            self.base.cols(),
        ]);
        self.encode_into(&state.placed, t.data_mut());
        t
    }

    /// Encoding of the state reached by `placed`.
    pub fn encode_placed(&self, placed: &[u32]) -> Tensor {
        let mut t = Tensor::zeros(vec![
            self.channels(),
            self.base.rows(),
            self.base.cols(),
        ]);
        self.encode_into(placed, t.data_mut());
        t
    }

    /// Writes the encoding of `placed` into a plane of `channels * rows *
    /// cols` scalars. Used for batch assembly.
    pub fn encode_into(&self, placed: &[u32], out: &mut [f64]) {
        let n = self.base.n_cells();
        let channels = self.channels();
        debug_assert_eq!(out.len(), channels * n);
        out.fill(0.0);
        let catalog = self.base.catalog();
        for (idx, &code) in self.base.cells().iter().enumerate() {
            let ch = catalog.channel_of(code).expect("code validated in catalog");
            out[ch * n + idx] = 1.0;
        }
        let zero_ch = catalog.channel_of(NON_FUEL).expect("code 0 in catalog");
        let placed_ch = channels - 1;
        for &cell in placed {
            let cell = cell as usize;
            let code = self.base.code_at(cell);
            let ch = catalog.channel_of(code).expect("code in catalog");
            out[ch * n + cell] = 0.0;
            out[zero_ch * n + cell] = 1.0;
            out[placed_ch * n + cell] = 1.0;
        }
    }
}

/// Fills forward n-step returns and bootstrap prefixes over one complete
/// episode of transitions, in place.
pub fn fill_n_step_fields(episode: &mut [Transition], gamma: f64, n: usize) {
    assert!(n >= 1);
    let len = episode.len();
    for t in 0..len {
        let mut ret = 0.0;
        let mut discount = 1.0;
        let end = (t + n).min(len);
        for step in episode.iter().take(end).skip(t) {
            ret += discount * step.reward;
            discount *= gamma;
        }
        episode[t].n_return = ret;
        episode[t].n_bootstrap = if t + n < len {
            Some(episode[t + n].placed.clone())
        } else {
            // window reached the terminal step: no bootstrap
            None
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::test_catalog;

    fn small_env(rows: usize, cols: usize) -> Env {
        let l = Landscape::filled(rows, cols, 1, test_catalog()).unwrap();
        Env::new(
            l,
            EnvConfig {
                alpha: 0.05,
                k: -1.0,
                sims_per_eval: 8,
                zone: IgnitionZone::new((rows / 2, cols / 2), 1),
                weather: vec![WeatherScenario::new(0.0, 0.5).unwrap()],
                spread: SpreadModel::new(1.0, 1.0).unwrap(),
                initial_forbidden: Vec::new(),
            },
        )
        .unwrap()
    }

    #[test]
    fn budget_arithmetic() {
        assert_eq!(max_firebreaks(400, 0.05).unwrap(), 20);
        assert_eq!(max_firebreaks(1600, 0.05).unwrap(), 80);
        assert_eq!(max_firebreaks(100, 0.05).unwrap(), 5);
        assert!(max_firebreaks(10, 0.05).is_err()); // floor = 0
        assert!(max_firebreaks(100, 0.0).is_err());
        assert!(max_firebreaks(100, 1.0).is_err());
    }

    #[test]
    fn reset_pristine_all_available() {
        let env = small_env(10, 10);
        let s = env.reset();
        assert_eq!(s.available_count(), 100);
        assert_eq!(s.t, 0);
        assert!(s.placed.is_empty());
    }

    #[test]
    fn native_non_fuel_starts_forbidden() {
        let mut cells = vec![1u16; 100];
        for i in 0..10 {
            cells[i * 7 % 100] = 0;
        }
        let zeros = cells.iter().filter(|&&c| c == 0).count();
        let l = Landscape::new(10, 10, cells, test_catalog()).unwrap();
        let env = Env::new(
            l,
            EnvConfig {
                alpha: 0.05,
                k: -1.0,
                sims_per_eval: 4,
                zone: IgnitionZone::new((5, 5), 1),
                weather: vec![WeatherScenario::new(0.0, 0.0).unwrap()],
                spread: SpreadModel::calm(),
                initial_forbidden: Vec::new(),
            },
        )
        .unwrap();
        let s = env.reset();
        assert_eq!(s.available_count(), 100 - zeros);
    }

    #[test]
    fn resets_are_identical() {
        let env = small_env(10, 10);
        assert_eq!(env.reset(), env.reset());
    }

    #[test]
    fn non_terminal_steps_reward_zero() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(7);
        let mut state = env.reset();
        for t in 0..env.budget() - 1 {
            let (next, r, done) = env.step(&state, t * 11, &mut rng).unwrap();
            assert_eq!(r, 0.0);
            assert!(!done);
            state = next;
        }
        let (final_state, r, done) = env.step(&state, 99, &mut rng).unwrap();
        assert!(done);
        assert!(r < 0.0, "terminal reward should be negative, got {r}");
        assert_eq!(final_state.t, env.budget());
        assert_eq!(final_state.placed.len(), env.budget());
    }

    #[test]
    fn terminal_reward_is_scaled_average() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(3);
        // only the terminal step draws from the stream, exactly one u64
        let mut probe = rng;
        let mut state = env.reset();
        let mut terminal_reward = 0.0;
        for _ in 0..env.budget() {
            let action = (0..100).find(|&a| state.is_available(a)).unwrap();
            let (next, reward, _) = env.step(&state, action, &mut rng).unwrap();
            terminal_reward = reward;
            state = next;
        }
        let recomputed = env.terminal_reward(&state.grid, probe.next_u64()).unwrap();
        assert_eq!(terminal_reward, recomputed);
    }

    #[test]
    fn illegal_actions_error() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(1);
        let state = env.reset();
        let (next, _, _) = env.step(&state, 42, &mut rng).unwrap();
        assert!(env.step(&next, 42, &mut rng).is_err(), "placed cell is forbidden");
        assert!(env.step(&next, 10_000, &mut rng).is_err(), "out of bounds");
    }

    #[test]
    fn mask_tracks_placements() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(2);
        let state = env.reset();
        assert!(state.action_mask().iter().all(|&m| m));
        let (next, _, _) = env.step(&state, 17, &mut rng).unwrap();
        let mask = next.action_mask();
        assert!(!mask[17]);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 99);
    }

    #[test]
    fn encoding_uniform_grid() {
        let env = small_env(10, 10);
        let enc = env.encode_state(&env.reset());
        assert_eq!(enc.shape(), &[5, 10, 10]); // 4 catalog codes + placed
        let n = 100;
        assert!(enc.data()[n..2 * n].iter().all(|&v| v == 1.0)); // channel 1 = code 1
        assert!(enc.data()[..n].iter().all(|&v| v == 0.0));
        assert!(enc.data()[2 * n..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoding_marks_placed_cells() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(4);
        let (next, _, _) = env.step(&env.reset(), 23, &mut rng).unwrap();
        let enc = env.encode_state(&next);
        let n = 100;
        let channels = env.channels();
        assert_eq!(enc.data()[23], 1.0, "non-fuel channel set at placement");
        assert_eq!(enc.data()[n + 23], 0.0, "original fuel channel cleared");
        assert_eq!(enc.data()[(channels - 1) * n + 23], 1.0, "placed channel set");
    }

    #[test]
    fn encode_state_matches_encode_placed() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(5);
        let mut state = env.reset();
        for a in [3usize, 50, 77] {
            let (next, _, _) = env.step(&state, a, &mut rng).unwrap();
            state = next;
        }
        assert_eq!(
            env.encode_state(&state).data(),
            env.encode_placed(&state.placed).data()
        );
        assert_eq!(state.action_mask(), env.mask_from_placed(&state.placed));
    }

    #[test]
    fn state_from_placed_replays_episode() {
        let env = small_env(10, 10);
        let mut rng = Rng::seeded(6);
        let mut state = env.reset();
        for a in [9usize, 18, 27] {
            state = env.step(&state, a, &mut rng).unwrap().0;
        }
        assert_eq!(env.state_from_placed(&[9, 18, 27]), state);
    }

    #[test]
    fn initial_forbidden_respected() {
        let l = Landscape::filled(10, 10, 1, test_catalog()).unwrap();
        let env = Env::new(
            l,
            EnvConfig {
                alpha: 0.05,
                k: -1.0,
                sims_per_eval: 4,
                zone: IgnitionZone::new((5, 5), 1),
                weather: vec![WeatherScenario::new(0.0, 0.0).unwrap()],
                spread: SpreadModel::calm(),
                initial_forbidden: vec![0, 1, 2],
            },
        )
        .unwrap();
        let s = env.reset();
        assert_eq!(s.available_count(), 97);
        assert!(!s.is_available(0));
        let mut rng = Rng::seeded(1);
        assert!(env.step(&s, 0, &mut rng).is_err());
    }

    #[test]
    fn budget_exceeding_available_is_config_error() {
        // 6x6 all non-fuel except 1 cell: budget 1 > 1 available? budget =
        // floor(0.05*36) = 1, available = 1 -> fine; with 0 available -> error.
        let mut cells = vec![0u16; 36];
        cells[0] = 1;
        let l = Landscape::new(6, 6, cells, test_catalog()).unwrap();
        let cfg = EnvConfig {
            alpha: 0.05,
            k: -1.0,
            sims_per_eval: 1,
            zone: IgnitionZone::new((3, 3), 0),
            weather: vec![WeatherScenario::new(0.0, 0.0).unwrap()],
            spread: SpreadModel::calm(),
            initial_forbidden: vec![0],
        };
        assert!(Env::new(l, cfg).is_err());
    }

    #[test]
    fn n_step_fields_truncate_at_terminal() {
        let mk = |placed: Vec<u32>, action: u32, reward: f64, done: bool| Transition {
            placed,
            action,
            reward,
            done,
            is_demo: false,
            n_return: 0.0,
            n_bootstrap: None,
        };
        let mut ep = vec![
            mk(vec![], 1, 0.0, false),
            mk(vec![1], 2, 0.0, false),
            mk(vec![1, 2], 3, -15.0, true),
        ];
        fill_n_step_fields(&mut ep, 1.0, 10);
        assert_eq!(ep[0].n_return, -15.0);
        assert_eq!(ep[1].n_return, -15.0);
        assert_eq!(ep[2].n_return, -15.0);
        assert!(ep.iter().all(|t| t.n_bootstrap.is_none()));

        // n = 1 bootstraps at the immediate successor
        fill_n_step_fields(&mut ep, 1.0, 1);
        assert_eq!(ep[0].n_return, 0.0);
        assert_eq!(ep[0].n_bootstrap, Some(vec![1]));
        assert_eq!(ep[1].n_bootstrap, Some(vec![1, 2]));
        assert_eq!(ep[2].n_bootstrap, None);

        // gamma = 0 collapses to the immediate reward
        fill_n_step_fields(&mut ep, 0.0, 10);
        assert_eq!(ep[0].n_return, 0.0);
        assert_eq!(ep[2].n_return, -15.0);
    }
}

//! Stochastic cellular-automata fire spread.
//!
//! Randomness is quenched: every directed neighbor pair (i -> j) owns a fixed
//! threshold drawn from a hash of (seed, i, j), and the edge is active exactly
//! when its spread probability exceeds that threshold. A fire is then a pure
//! reachability computation over active edges, which makes outcomes
//! deterministic, order-independent, and monotone under fuel removal.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landscape::{
    sample_ignition, sample_weather, IgnitionZone, Landscape, WeatherScenario,
};
use crate::rng::{hash3, unit_f64, Rng};

/// The 8-neighborhood as (row delta, col delta) plus the compass bearing of
/// each step in degrees (0 = north, clockwise).
pub const NEIGHBORS: [(isize, isize, f64); 8] = [
    (-1, 0, 0.0),
    (-1, 1, 45.0),
    (0, 1, 90.0),
    (1, 1, 135.0),
    (1, 0, 180.0),
    (1, -1, 225.0),
    (0, -1, 270.0),
    (-1, -1, 315.0),
];

/// Parameters of the spread model: how strongly wind tilts per-edge
/// probabilities, and the wind speed at which the tilt reaches `wind_gain`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpreadModel {
    pub wind_gain: f64,
    pub speed_ref: f64,
}

impl SpreadModel {
    pub fn new(wind_gain: f64, speed_ref: f64) -> Result<Self> {
        if !wind_gain.is_finite() || wind_gain < 0.0 {
            return Err(Error::argument("wind_gain must be nonnegative"));
        }
        if !speed_ref.is_finite() || speed_ref <= 0.0 {
            return Err(Error::argument("speed_ref must be positive"));
        }
        Ok(SpreadModel {
            wind_gain,
            speed_ref,
        })
    }

    /// Windless model.
    pub fn calm() -> Self {
        SpreadModel {
            wind_gain: 0.0,
            speed_ref: 1.0,
        }
    }

    /// Directional multiplier for each of the 8 neighbor bearings under `w`.
    fn direction_factors(&self, w: &WeatherScenario) -> [f64; 8] {
        let mut out = [1.0; 8];
        for (k, (_, _, bearing)) in NEIGHBORS.iter().enumerate() {
            let delta = (bearing - w.wind_dir_deg).to_radians();
            out[k] = (1.0 + self.wind_gain * (w.wind_speed / self.speed_ref) * delta.cos()).max(0.0);
        }
        out
    }
}

/// One simulated fire: the ignition, the burned set (sorted), and the
/// breadth-first propagation tree in discovery order.
#[derive(Clone, Debug, PartialEq)]
pub struct FireOutcome {
    pub rows: usize,
    pub cols: usize,
    pub ignition: usize,
    pub burned: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl FireOutcome {
    pub fn burned_count(&self) -> usize {
        self.burned.len()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.burned.binary_search(&cell).is_ok()
    }
}

/// Per-cell empirical burn frequency over a batch of outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct BurnProbabilityMap {
    pub rows: usize,
    pub cols: usize,
    pub probs: Vec<f64>,
}

impl BurnProbabilityMap {
    pub fn write_grid(&self, path: &std::path::Path) -> Result<()> {
        crate::files::write_value_grid(path, self.rows, self.cols, &self.probs)
    }

    pub fn write_pgm(&self, path: &std::path::Path) -> Result<()> {
        crate::files::write_pgm(path, self.rows, self.cols, &self.probs)
    }
}

fn neighbor_direction(l: &Landscape, from: usize, to: usize) -> Option<usize> {
    let (fr, fc) = l.coords(from);
    let (tr, tc) = l.coords(to);
    let dr = tr as isize - fr as isize;
    let dc = tc as isize - fc as isize;
    NEIGHBORS.iter().position(|&(r, c, _)| r == dr && c == dc)
}

/// Probability that fire transmits from `from` to its 8-neighbor `to`:
/// the target fuel's base probability scaled by the wind alignment factor,
/// clamped to [0, 1].
pub fn edge_prob(
    l: &Landscape,
    m: &SpreadModel,
    w: &WeatherScenario,
    from: usize,
    to: usize,
) -> Result<f64> {
    let dir = neighbor_direction(l, from, to)
        .ok_or_else(|| Error::argument(format!("cells {} and {} are not 8-neighbors", from, to)))?;
    let factors = m.direction_factors(w);
    Ok((l.spread_prob_at(to) * factors[dir]).clamp(0.0, 1.0))
}

/// Threshold of the directed edge (i -> j) under `seed`, in [0, 1).
#[inline]
fn edge_threshold(seed: u64, from: usize, to: usize) -> f64 {
    unit_f64(hash3(seed, from as u64, to as u64))
}

/// Simulates one fire from `ignition` with quenched randomness keyed by
/// `seed`. Burned cells are exactly those reachable from the ignition through
/// active edges over flammable cells; edges form the BFS spanning tree with
/// smallest-index parents on ties.
pub fn simulate_fire(
    l: &Landscape,
    m: &SpreadModel,
    w: &WeatherScenario,
    ignition: usize,
    seed: u64,
) -> Result<FireOutcome> {
    if ignition >= l.n_cells() {
        return Err(Error::argument(format!(
            "ignition {} out of bounds for {} cells",
            ignition,
            l.n_cells()
        )));
    }
    let rows = l.rows();
    let cols = l.cols();
    if !l.is_flammable(ignition) {
        return Ok(FireOutcome {
            rows,
            cols,
            ignition,
            burned: Vec::new(),
            edges: Vec::new(),
        });
    }

    let factors = m.direction_factors(w);
    let mut visited = vec![false; l.n_cells()];
    visited[ignition] = true;
    let mut burned = vec![ignition];
    let mut edges = Vec::new();
    let mut frontier = vec![ignition];
    let mut next = Vec::new();

    while !frontier.is_empty() {
        // Ascending scan makes the smallest eligible parent claim each cell.
        frontier.sort_unstable();
        next.clear();
        for &i in &frontier {
            let (r, c) = (i / cols, i % cols);
            for (k, &(dr, dc, _)) in NEIGHBORS.iter().enumerate() {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                let j = nr as usize * cols + nc as usize;
                if visited[j] || !l.is_flammable(j) {
                    continue;
                }
                let p = (l.spread_prob_at(j) * factors[k]).clamp(0.0, 1.0);
                if p > edge_threshold(seed, i, j) {
                    visited[j] = true;
                    burned.push(j);
                    edges.push((i, j));
                    next.push(j);
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }

    burned.sort_unstable();
    Ok(FireOutcome {
        rows,
        cols,
        ignition,
        burned,
        edges,
    })
}

/// Runs `n` independent fires. Run `r` derives its weather draw, ignition
/// draw, and simulation seed from (master_seed, r) alone, so results are
/// identical no matter how the batch is scheduled.
pub fn run_batch(
    l: &Landscape,
    m: &SpreadModel,
    weather_set: &[WeatherScenario],
    zone: &IgnitionZone,
    n: usize,
    master_seed: u64,
) -> Result<Vec<FireOutcome>> {
    if n == 0 {
        return Err(Error::argument("batch size must be at least 1"));
    }
    zone.validate(l.rows(), l.cols())?;
    (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = Rng::derived(master_seed, r as u64);
            let w = sample_weather(weather_set, &mut rng)?;
            let ignition = sample_ignition(l, zone, &mut rng)?;
            let sim_seed = rng.next_u64();
            simulate_fire(l, m, &w, ignition, sim_seed)
        })
        .collect()
}

/// Arithmetic mean of burned-cell counts.
pub fn average_burned(outcomes: &[FireOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::argument("no outcomes to average"));
    }
    Ok(outcomes.iter().map(|o| o.burned.len() as f64).sum::<f64>() / outcomes.len() as f64)
}

/// Per-cell burn frequency across a batch.
pub fn burn_probability_map(outcomes: &[FireOutcome]) -> Result<BurnProbabilityMap> {
    let first = outcomes
        .first()
        .ok_or_else(|| Error::argument("no outcomes for burn map"))?;
    let (rows, cols) = (first.rows, first.cols);
    if outcomes.iter().any(|o| o.rows != rows || o.cols != cols) {
        return Err(Error::argument("outcomes come from mixed grid sizes"));
    }
    let mut counts = vec![0usize; rows * cols];
    for o in outcomes {
        for &cell in &o.burned {
            counts[cell] += 1;
        }
    }
    let n = outcomes.len() as f64;
    Ok(BurnProbabilityMap {
        rows,
        cols,
        probs: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

//! Evaluation reports: burned percentages over the shared fire batch.

use std::fmt::Write as _;

use firebreak_core::firesim::FireOutcome;

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub policy: String,
    pub n_cells: usize,
    pub placed: Vec<u32>,
    pub burned_counts: Vec<usize>,
    pub mean_burned_pct: f64,
    pub std_burned_pct: f64,
}

impl EvalReport {
    pub fn from_outcomes(
        policy: &str,
        n_cells: usize,
        placed: &[u32],
        outcomes: &[FireOutcome],
    ) -> Self {
        let counts: Vec<usize> = outcomes.iter().map(|o| o.burned_count()).collect();
        let pcts: Vec<f64> = counts
            .iter()
            .map(|&c| 100.0 * c as f64 / n_cells as f64)
            .collect();
        let mean = pcts.iter().sum::<f64>() / pcts.len().max(1) as f64;
        let var = pcts.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
            / pcts.len().max(1) as f64;
        EvalReport {
            policy: policy.to_string(),
            n_cells,
            placed: placed.to_vec(),
            burned_counts: counts,
            mean_burned_pct: mean,
            std_burned_pct: var.sqrt(),
        }
    }

    pub fn to_csv(&self) -> String {
        let placed = self
            .placed
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let mut csv = String::from("policy,mean_burned_pct,std_burned_pct,fires,placed_cells\n");
        let _ = writeln!(
            csv,
            "{},{},{},{},\"{}\"",
            self.policy,
            self.mean_burned_pct,
            self.std_burned_pct,
            self.burned_counts.len(),
            placed
        );
        csv
    }

    pub fn fires_csv(&self) -> String {
        let mut csv = String::from("fire,burned_cells\n");
        for (i, c) in self.burned_counts.iter().enumerate() {
            let _ = writeln!(csv, "{},{}", i, c);
        }
        csv
    }
}

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{quick_outcome, ScenarioConfig};
use super::SimError;
use crate::ledger::ThresholdPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub deposits: Vec<u64>,
    pub rewards: Vec<u64>,
    pub phis: Vec<f64>,
    pub runs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub deposit: u64,
    pub reward: u64,
    pub phi: f64,
    pub success_rate: f64,
    pub runs: u64,
}

/// Threshold-success frequency per grid cell. Run `r` of every cell uses
/// substream `r` of `seed`, so cells are compared on matched draws.
pub fn sweep(base: &ScenarioConfig, grid: &SweepGrid, seed: u64) -> Result<Vec<SweepCell>, SimError> {
    if grid.deposits.is_empty() || grid.rewards.is_empty() || grid.phis.is_empty() {
        return Err(SimError::Config("sweep grid is empty".into()));
    }
    if grid.runs == 0 {
        return Err(SimError::Config("runs must be >= 1".into()));
    }
    let mut cells = Vec::new();
    for &deposit in &grid.deposits {
        for &reward in &grid.rewards {
            for &phi in &grid.phis {
                let config = ScenarioConfig {
                    deposit,
                    reward,
                    threshold_policy: ThresholdPolicy::Fraction(phi),
                    ..base.clone()
                };
                config.validate()?;
                let successes = (0..grid.runs)
                    .into_par_iter()
                    .filter(|&run| quick_outcome(&config, seed, run).threshold_met)
                    .count();
                cells.push(SweepCell {
                    deposit,
                    reward,
                    phi,
                    success_rate: successes as f64 / grid.runs as f64,
                    runs: grid.runs,
                });
            }
        }
    }
    Ok(cells)
}

/// Writes `deposit,reward,phi,success_rate,runs` rows.
pub fn write_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<(), SimError> {
    let mut writer = csv::Writer::from_writer(out);
    for cell in cells {
        writer.serialize(cell).map_err(|e| SimError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| SimError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rewards: Vec<u64>, phis: Vec<f64>, runs: u64) -> SweepGrid {
        SweepGrid { deposits: vec![10], rewards, phis, runs }
    }

    fn dropout_base() -> ScenarioConfig {
        let mut base = ScenarioConfig::default();
        base.profiles.release_reliability = 0.8;
        base
    }

    #[test]
    fn empty_grid_rejected() {
        let g = grid(vec![], vec![0.5], 10);
        assert!(matches!(sweep(&ScenarioConfig::default(), &g, 1), Err(SimError::Config(_))));
    }

    #[test]
    fn degenerate_grid_is_a_frequency() {
        let cells = sweep(&dropout_base(), &grid(vec![10], vec![0.5], 200), 4).unwrap();
        assert_eq!(cells.len(), 1);
        assert!((0.0..=1.0).contains(&cells[0].success_rate));
        let direct = (0..200).filter(|&r| quick_outcome(&dropout_base(), 4, r).threshold_met).count();
        assert_eq!(cells[0].success_rate, direct as f64 / 200.0);
    }

    #[test]
    fn success_non_decreasing_in_reward() {
        let mut base = dropout_base();
        base.population = 12;
        base.model.intercept = -1.5;
        let runs = 4000;
        let cells = sweep(&base, &grid(vec![0, 5, 20, 80], vec![0.75], runs), 21).unwrap();
        for pair in cells.windows(2) {
            let (a, b) = (pair[0].success_rate, pair[1].success_rate);
            let sigma = ((a * (1.0 - a) + b * (1.0 - b)) / runs as f64).sqrt();
            assert!(b >= a - 3.0 * sigma, "reward {} -> {}: {a} > {b}", pair[0].reward, pair[1].reward);
        }
    }

    #[test]
    fn unanimity_fails_more_under_dropout() {
        let cells = sweep(&dropout_base(), &grid(vec![10], vec![0.5, 1.0], 500), 8).unwrap();
        assert!(cells[1].success_rate < cells[0].success_rate);
    }

    #[test]
    fn csv_header_and_rows() {
        let cells = sweep(&dropout_base(), &grid(vec![0, 10], vec![0.5], 20), 2).unwrap();
        let mut out = Vec::new();
        write_csv(&cells, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("deposit,reward,phi,success_rate,runs"));
        assert_eq!(lines.count(), 2);
    }
}

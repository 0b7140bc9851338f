//! Horizon sweep: repeat a scenario across planning horizons and seeds and
//! tabulate the post-convergence tracking error.

use serde::Serialize;

use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::run_scenario;
use crate::runlog::RunLog;

/// One row of the sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// Planning horizon.
    pub horizon: usize,
    /// Mean over seeds of the per-run post-convergence tracking error.
    pub mean_error: f64,
    /// Per-seed errors, in seed order.
    pub per_seed: Vec<f64>,
}

/// Time-averaged tracking error over live agents in the trailing 75% of
/// rounds (the leading quarter is the convergence transient).
pub fn post_convergence_error(log: &RunLog) -> f64 {
    let skip = log.rounds.len() / 4;
    let mut sum = 0.0;
    let mut count = 0usize;
    for rec in log.rounds.iter().skip(skip) {
        for a in &rec.agents {
            if a.alive {
                if let Some(e) = a.tracking_error {
                    sum += e;
                    count += 1;
                }
            }
        }
    }
    if count > 0 {
        sum / count as f64
    } else {
        f64::INFINITY
    }
}

/// Run the scenario once per (horizon, seed) pair. Seeds are
/// `base_seed..base_seed + seeds`; each run is otherwise identical.
pub fn horizon_sweep(
    cfg: &ScenarioConfig,
    horizons: &[usize],
    seeds: usize,
) -> Result<Vec<SweepRow>, ConfigError> {
    if seeds == 0 {
        return Err(ConfigError::msg("sweep needs at least one seed"));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut per_seed = Vec::with_capacity(seeds);
        for s in 0..seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.planner.horizon = h;
            run_cfg.seed = cfg.seed + s as u64;
            let log = run_scenario(&run_cfg)?;
            per_seed.push(post_convergence_error(&log));
        }
        let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        rows.push(SweepRow {
            horizon: h,
            mean_error: mean,
            per_seed,
        });
    }
    Ok(rows)
}

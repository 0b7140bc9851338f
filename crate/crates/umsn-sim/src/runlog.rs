//! Per-round run records, tidy CSV output, and the JSON run summary.
//!
//! One record is appended per TDMA round. The CSV is long-format (one row
//! per round and agent, team-level columns repeated) so any plotting tool
//! can consume it directly. Formatting uses Rust's shortest-round-trip
//! float printing, so identical runs serialize to identical bytes.

use serde::Serialize;
use std::fmt::Write as _;

/// Per-agent slice of one round record.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRound {
    /// Pose at the end of the round: x, y, heading.
    pub pose: (f64, f64, f64),
    /// False once the agent has failed.
    pub alive: bool,
    /// Latest target estimate propagated to the record time.
    pub estimate: Option<(f64, f64, f64, f64)>,
    /// Trace of the estimate covariance.
    pub covariance_trace: Option<f64>,
    /// Position error of the estimate against ground truth, meters.
    pub tracking_error: Option<f64>,
    /// Geometry cost of the agent's current true configuration.
    pub cost_geometry: f64,
    /// Normalized true range to the target.
    pub cost_distance: f64,
    /// Connectivity cost over the true communication graph.
    pub cost_connectivity: f64,
    /// Objective value of the policy chosen this round (infinite when the
    /// agent had no target estimate to plan against).
    pub planned_cost: f64,
    /// First heading increment of the chosen policy, radians.
    pub chosen_increment: f64,
    /// Complete action sequences evaluated by this round's search.
    pub evaluations: u64,
}

/// One TDMA round of simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Round index, starting at zero.
    pub round: u64,
    /// Time at the end of the round, seconds.
    pub time: f64,
    /// True target state: x, y, vx, vy.
    pub target: (f64, f64, f64, f64),
    /// Per-agent slices, indexed by agent id.
    pub agents: Vec<AgentRound>,
    /// Algebraic connectivity of the true graph over live agents.
    pub fiedler: f64,
    /// Geometry cost of the live team against the true target.
    pub team_geometry_cost: f64,
    /// Mean pairwise distance between live agents, meters.
    pub mean_pairwise_distance: f64,
    /// Link-level delivery attempts this round.
    pub packets_sent: u32,
    /// Successful deliveries this round.
    pub packets_delivered: u32,
    /// Physical broadcasts this round (at most one per slot).
    pub broadcasts: u32,
}

/// Complete log of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    /// Scenario name from the config.
    pub scenario: String,
    /// Master seed of the run.
    pub seed: u64,
    /// One record per TDMA round.
    pub rounds: Vec<RoundRecord>,
}

fn push_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
    out.push(',');
}

impl RunLog {
    /// Long-format CSV: one row per round and agent.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "round,time,agent,alive,x,y,heading,target_x,target_y,target_vx,target_vy,\
             est_x,est_y,est_vx,est_vy,cov_trace,tracking_error,j_geometry,j_distance,\
             j_connectivity,planned_cost,chosen_increment,evaluations,fiedler,\
             team_j_geometry,mean_pairwise_distance,packets_sent,packets_delivered,broadcasts\n",
        );
        for rec in &self.rounds {
            for (id, a) in rec.agents.iter().enumerate() {
                let _ = write!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},",
                    rec.round,
                    rec.time,
                    id,
                    a.alive as u8,
                    a.pose.0,
                    a.pose.1,
                    a.pose.2,
                    rec.target.0,
                    rec.target.1,
                    rec.target.2,
                    rec.target.3,
                );
                match a.estimate {
                    Some((x, y, vx, vy)) => {
                        let _ = write!(out, "{x},{y},{vx},{vy},");
                    }
                    None => out.push_str(",,,,"),
                }
                push_opt(&mut out, a.covariance_trace);
                push_opt(&mut out, a.tracking_error);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    a.cost_geometry,
                    a.cost_distance,
                    a.cost_connectivity,
                    a.planned_cost,
                    a.chosen_increment,
                    a.evaluations,
                    rec.fiedler,
                    rec.team_geometry_cost,
                    rec.mean_pairwise_distance,
                    rec.packets_sent,
                    rec.packets_delivered,
                    rec.broadcasts,
                );
            }
        }
        out
    }

    /// Aggregate summary of the run.
    pub fn summary(&self) -> RunSummary {
        let rounds = self.rounds.len();
        let agents = self.rounds.first().map_or(0, |r| r.agents.len());
        let mut sent = 0u64;
        let mut delivered = 0u64;
        let mut evaluations = 0u64;
        for r in &self.rounds {
            sent += r.packets_sent as u64;
            delivered += r.packets_delivered as u64;
            evaluations += r.agents.iter().map(|a| a.evaluations).sum::<u64>();
        }

        // Post-convergence window: the trailing 75% of rounds.
        let skip = rounds / 4;
        let mut err_sum = 0.0;
        let mut err_count = 0usize;
        for r in &self.rounds[skip.min(rounds)..] {
            for a in &r.agents {
                if a.alive {
                    if let Some(e) = a.tracking_error {
                        err_sum += e;
                        err_count += 1;
                    }
                }
            }
        }

        let last = self.rounds.last();
        RunSummary {
            scenario: self.scenario.clone(),
            seed: self.seed,
            rounds,
            agents,
            packets_sent: sent,
            packets_delivered: delivered,
            delivery_ratio: if sent > 0 {
                delivered as f64 / sent as f64
            } else {
                0.0
            },
            planner_evaluations: evaluations,
            mean_post_convergence_error: if err_count > 0 {
                Some(err_sum / err_count as f64)
            } else {
                None
            },
            final_team_geometry_cost: last.map(|r| r.team_geometry_cost),
            final_fiedler: last.map(|r| r.fiedler),
            mean_pairwise_distance: {
                let live: Vec<f64> = self
                    .rounds
                    .iter()
                    .map(|r| r.mean_pairwise_distance)
                    .collect();
                if live.is_empty() {
                    0.0
                } else {
                    live.iter().sum::<f64>() / live.len() as f64
                }
            },
        }
    }
}

/// JSON-serializable run summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// Scenario name.
    pub scenario: String,
    /// Master seed.
    pub seed: u64,
    /// Rounds simulated.
    pub rounds: usize,
    /// Team size.
    pub agents: usize,
    /// Total link-level delivery attempts.
    pub packets_sent: u64,
    /// Total successful deliveries.
    pub packets_delivered: u64,
    /// Delivered / sent.
    pub delivery_ratio: f64,
    /// Total planner leaf evaluations.
    pub planner_evaluations: u64,
    /// Mean tracking error over live agents in the trailing 75% of rounds.
    pub mean_post_convergence_error: Option<f64>,
    /// Team geometry cost at the final round.
    pub final_team_geometry_cost: Option<f64>,
    /// Fiedler value at the final round.
    pub final_fiedler: Option<f64>,
    /// Time-mean of the per-round mean pairwise inter-agent distance.
    pub mean_pairwise_distance: f64,
}

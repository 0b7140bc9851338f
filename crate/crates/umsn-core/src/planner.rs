//! Receding-horizon multi-objective planner.
//!
//! Each agent searches the tree of discrete heading-increment sequences
//! over a lookahead horizon, scoring candidate futures against sigma-point
//! samples of its target belief. The stage cost blends three terms:
//! estimation geometry (inverse least singular value of the bearing
//! regressor), normalized distance to the target, and communication-graph
//! connectivity (inverse Fiedler value of the predicted SNR Laplacian).
//! Range-band and inter-agent safety constraints enter as fixed additive
//! penalties so the search is total.
//!
//! Coordination is sequential: agents plan one at a time in TDMA slot
//! order, each conditioning on the fresh policies of its predecessors and
//! the previously received policies of intent of its successors. Between
//! updates, a neighbor is predicted by replaying its last known policy,
//! extended with a repeat-last base policy.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Vector2, Vector4};
#[allow(unused_imports)] // f64 math methods; unused when tests link std
use num_traits::Float;

use crate::channel::{snr, ModemConfig};
use crate::estimator::TargetEstimate;
use crate::graph::{fiedler, link_gain, CommGraph, CONNECTIVITY_EPS};
use crate::world::{step_agent, AgentState, Control};
use crate::AgentId;

/// Finite stand-in cost for a singular geometry or a disconnected graph.
pub const COST_SENTINEL: f64 = 1e9;

/// Additive penalty per violated constraint per step.
pub const CONSTRAINT_PENALTY: f64 = 1e6;

/// Decisions remembered when adapting the heading-increment granularity.
pub const GRANULARITY_WINDOW: usize = 5;

/// Predicted ranges are floored at this distance (m) when evaluating the
/// acoustic model, since rollouts may drive hypothetical poses together.
const MIN_PREDICTED_RANGE: f64 = 1.0;

/// Singular values below this make the geometry cost saturate.
const GEOMETRY_EPS: f64 = 1e-9;

/// Errors from planner configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum PlannerError {
    /// A parameter violated its documented range.
    InvalidParams(&'static str),
}

impl core::fmt::Display for PlannerError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PlannerError::InvalidParams(what) => write!(f, "invalid planner parameters: {what}"),
        }
    }
}

impl core::error::Error for PlannerError {}

/// Objective composition used by [`plan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    /// Minimize `alpha J_g + (1 - alpha) J_d + gamma J_c`.
    Weighted,
    /// Minimize `J_d + gamma J_c` subject to the geometry cost staying at
    /// or below the epsilon threshold; falls back to [`PlanMode::Weighted`]
    /// when no candidate satisfies the constraint.
    EpsilonConstrained,
}

/// Static tuning of the receding-horizon optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerParams {
    /// Lookahead horizon, steps.
    pub horizon: usize,
    /// Cardinality of the heading-increment set (odd, so zero is available).
    pub action_count: usize,
    /// Current half-range of heading increments, radians.
    pub delta_theta_max: f64,
    /// Floor for [`Self::delta_theta_max`] under granularity adaptation.
    pub delta_theta_min: f64,
    /// Amount removed from the half-range per adaptation, radians.
    pub granularity_step: f64,
    /// Geometry/distance trade-off in `[0, 1]`.
    pub alpha: f64,
    /// Connectivity penalty weight in `[0, 1]`.
    pub gamma: f64,
    /// Desired range to the target, m.
    pub desired_range: f64,
    /// Maximum allowed range to the target, m.
    pub max_range: f64,
    /// Minimum inter-agent distance, m.
    pub safety_range: f64,
    /// Weight of the central sigma point, `< 1`.
    pub center_weight: f64,
    /// Geometry-cost threshold for the epsilon-constrained mode; `None`
    /// derives it from 70% of the best attainable singular value.
    pub geometry_epsilon: Option<f64>,
}

impl PlannerParams {
    /// Check the documented parameter ranges.
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.horizon == 0 {
            return Err(PlannerError::InvalidParams("horizon must be positive"));
        }
        if self.action_count == 0 || self.action_count % 2 == 0 {
            return Err(PlannerError::InvalidParams("action count must be odd"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(PlannerError::InvalidParams("alpha must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(PlannerError::InvalidParams("gamma must be in [0, 1]"));
        }
        if !(self.desired_range > 0.0) || self.desired_range >= self.max_range {
            return Err(PlannerError::InvalidParams(
                "need 0 < desired range < max range",
            ));
        }
        if self.safety_range < 0.0 {
            return Err(PlannerError::InvalidParams("safety range must be >= 0"));
        }
        if !(self.center_weight < 1.0) {
            return Err(PlannerError::InvalidParams("center weight must be < 1"));
        }
        if !(self.delta_theta_min > 0.0)
            || self.delta_theta_max < self.delta_theta_min
            || self.granularity_step < 0.0
        {
            return Err(PlannerError::InvalidParams(
                "need 0 < delta_theta_min <= delta_theta_max and granularity_step >= 0",
            ));
        }
        Ok(())
    }

    /// The discrete heading-increment set: `action_count` values equally
    /// dividing `[-half_range, +half_range]`, symmetric around an exact zero.
    pub fn action_set(&self, half_range: f64) -> Vec<f64> {
        if self.action_count == 1 {
            return vec![0.0];
        }
        let half = (self.action_count / 2) as i32;
        (-half..=half)
            .map(|k| k as f64 * (half_range / half as f64))
            .collect()
    }
}

/// Sigma-point representation of the target-state belief.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    /// `2 * 4 + 1` target states; the first is the mean.
    pub points: Vec<Vector4<f64>>,
    /// Weights summing to one, aligned with `points`.
    pub weights: Vec<f64>,
}

/// Deterministic samples matching the estimate's mean and covariance.
///
/// The center point carries `center_weight`; the 8 wing points sit at
/// `mean +- sqrt(4 / (1 - w0)) k_j` where `k_j` are the columns of a square
/// root of the covariance (Cholesky when positive definite, otherwise an
/// eigenvalue square root with negative eigenvalues clipped to zero).
pub fn sigma_points(est: &TargetEstimate, center_weight: f64) -> Result<SigmaSet, PlannerError> {
    if !(center_weight < 1.0) {
        return Err(PlannerError::InvalidParams("center weight must be < 1"));
    }
    let n_xi = 4.0;
    let scale = (n_xi / (1.0 - center_weight)).sqrt();

    let p = est.covariance;
    let root = match p.cholesky() {
        Some(chol) => chol.l(),
        None => {
            log::debug!("covariance not positive definite, using clipped eigenvalue square root");
            let eig = p.symmetric_eigen();
            let mut root = eig.eigenvectors;
            for j in 0..4 {
                let s = eig.eigenvalues[j].max(0.0).sqrt();
                for i in 0..4 {
                    root[(i, j)] *= s;
                }
            }
            root
        }
    };

    let mut points = Vec::with_capacity(9);
    let mut weights = Vec::with_capacity(9);
    points.push(est.state);
    weights.push(center_weight);
    let wing = (1.0 - center_weight) / (2.0 * n_xi);
    for j in 0..4 {
        let offset: Vector4<f64> = root.column(j) * scale;
        points.push(est.state + offset);
        weights.push(wing);
        points.push(est.state - offset);
        weights.push(wing);
    }
    Ok(SigmaSet { points, weights })
}

/// Geometry cost: inverse of the least singular value of the bearing
/// regressor with rows `(sin b, -cos b)`. Returns [`COST_SENTINEL`] when
/// the regressor is singular (fewer than two distinct bearing directions).
pub fn geometry_cost(bearings: &[f64]) -> f64 {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &beta in bearings {
        let (s, co) = (beta.sin(), beta.cos());
        a += s * s;
        b -= s * co;
        c += co * co;
    }
    // Least eigenvalue of the 2x2 Gram matrix [[a, b], [b, c]]. The
    // subtraction cancels catastrophically for rank-one bearing sets, so a
    // relative guard backs up the absolute singular-value floor.
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lambda_min = (mean - radius).max(0.0);
    let sigma_min = lambda_min.sqrt();
    if sigma_min < GEOMETRY_EPS || lambda_min <= (mean + radius) * 1e-12 {
        COST_SENTINEL
    } else {
        1.0 / sigma_min
    }
}

/// Distance cost: predicted range normalized by the desired range.
pub fn distance_cost(distance: f64, desired_range: f64) -> f64 {
    distance / desired_range
}

/// Connectivity cost: one `1 / sigma_2` term per neighbor, evaluated on
/// the predicted normalized Laplacian over the agent and its known
/// neighbors. A disconnected prediction contributes [`COST_SENTINEL`] per
/// term.
pub fn connectivity_cost(predicted: &CommGraph) -> f64 {
    let n = predicted.node_count();
    if n < 2 {
        return 0.0;
    }
    let sigma2 = fiedler(&predicted.laplacian()).expect("constructed laplacian is valid");
    let term = if sigma2 <= CONNECTIVITY_EPS {
        COST_SENTINEL
    } else {
        1.0 / sigma2
    };
    (n - 1) as f64 * term
}

/// Surge assignment: pursue at full speed when far beyond the desired
/// range, match the estimated target speed at the desired range, and back
/// off inside it.
pub fn surge_heuristic(distance: f64, target_speed: f64, desired_range: f64, max_surge: f64) -> f64 {
    let k_v = max_surge / desired_range;
    (target_speed + k_v * (distance - desired_range)).clamp(0.0, max_surge)
}

/// Residual control sequence an agent broadcasts so neighbors can predict
/// its motion: `horizon` heading increments plus the surge they assume.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentPolicy {
    /// Heading increments per planning step, radians.
    pub headings: Vec<f64>,
    /// Surge assumed constant over the horizon, m/s.
    pub surge: f64,
    /// Round at which the policy was produced.
    pub issued_round: u64,
}

impl IntentPolicy {
    /// All-zero increments at the given surge.
    pub fn zero(horizon: usize, surge: f64) -> Self {
        Self {
            headings: vec![0.0; horizon],
            surge,
            issued_round: 0,
        }
    }

    /// Heading increment to assume at step `h` (0-based), repeating the
    /// last known increment beyond the stored horizon.
    pub fn action_at(&self, h: usize) -> f64 {
        self.headings
            .get(h)
            .or(self.headings.last())
            .copied()
            .unwrap_or(0.0)
    }

    /// Policy of intent after one step is consumed: drop the first action
    /// and append the repeat-last base policy, preserving the length.
    pub fn extended(&self) -> Self {
        if self.headings.is_empty() {
            return self.clone();
        }
        let mut headings: Vec<f64> = self.headings[1..].to_vec();
        headings.push(*self.headings.last().expect("nonempty"));
        Self {
            headings,
            surge: self.surge,
            issued_round: self.issued_round,
        }
    }
}

/// What an agent knows about one neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTrack {
    /// Last known (or predicted) state.
    pub state: AgentState,
    /// Last received policy of intent, shifted as rounds pass.
    pub intent: IntentPolicy,
    /// Rounds elapsed since the last packet from this neighbor.
    pub age_rounds: u32,
}

/// Roll a silent neighbor forward by one planning step using its policy of
/// intent, and shift the policy by the consumed action.
pub fn advance_neighbor(track: &mut NeighborTrack, plan_step: f64) {
    let yaw = track.intent.action_at(0) / plan_step;
    if let Ok(next) = step_agent(
        &track.state,
        Control::new(track.intent.surge, yaw),
        plan_step,
    ) {
        track.state = next;
    }
    track.intent = track.intent.extended();
    track.age_rounds += 1;
}

/// Everything one agent knows when it plans: its own state, neighbor
/// tracks, and the current target estimate (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    /// Own ground-truth state (vehicles know their own pose).
    pub own: AgentState,
    /// Neighbor tracks keyed by agent id.
    pub neighbors: BTreeMap<AgentId, NeighborTrack>,
    /// Target estimate propagated to the planning instant.
    pub target: Option<TargetEstimate>,
}

impl Belief {
    /// Belief with no neighbors and no target estimate.
    pub fn new(own: AgentState) -> Self {
        Self {
            own,
            neighbors: BTreeMap::new(),
            target: None,
        }
    }
}

/// Per-invocation planning context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanContext {
    /// Objective tuning.
    pub params: PlannerParams,
    /// Modem model used to predict link SNRs.
    pub modem: ModemConfig,
    /// Planning step, seconds (one TDMA round).
    pub plan_step: f64,
    /// Current heading-increment half-range (granularity state).
    pub delta_max: f64,
    /// Round index stamped onto produced policies.
    pub round: u64,
}

/// Result of one planning invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    /// The optimal policy found.
    pub policy: IntentPolicy,
    /// Its objective value (infinite for the no-estimate default policy).
    pub cost: f64,
    /// Complete action sequences evaluated during the search.
    pub leaf_evaluations: u64,
    /// True when epsilon-constrained planning found no feasible leaf and
    /// the weighted objective was used instead.
    pub used_fallback: bool,
}

/// Evaluation of one fixed action sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvaluation {
    /// Accumulated stage costs plus terminal cost.
    pub cost: f64,
    /// False when an epsilon-constrained geometry check failed somewhere
    /// along the sequence (`cost` is then infinite).
    pub feasible: bool,
}

/// Precomputed quantities shared by every node of one search.
struct Rollout {
    horizon: usize,
    plan_step: f64,
    surge: f64,
    alpha: f64,
    gamma: f64,
    desired_range: f64,
    max_range: f64,
    safety_range: f64,
    epsilon: f64,
    mode: PlanMode,
    modem: ModemConfig,
    weights: Vec<f64>,
    /// `[h][l]`: sigma-point target positions after `h + 1` steps.
    target_pos: Vec<Vec<Vector2<f64>>>,
    /// `[j][h]`: predicted neighbor positions after `h + 1` steps.
    neighbor_pos: Vec<Vec<Vector2<f64>>>,
    /// `[h][l][j]`: bearing from neighbor `j` to sigma point `l` at step `h + 1`.
    neighbor_bearings: Vec<Vec<Vec<f64>>>,
    /// `[h][j][k]` for `j < k`: thresholded gains between neighbors.
    neighbor_pair_gains: Vec<Vec<f64>>,
    needs_geometry: bool,
    needs_distance: bool,
    needs_connectivity: bool,
}

fn bearing_to(from: Vector2<f64>, to: Vector2<f64>) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

fn predicted_gain(modem: &ModemConfig, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let d = (b - a).norm().max(MIN_PREDICTED_RANGE);
    let rho = snr(modem, d).expect("distance floored positive");
    link_gain(rho, modem.detection_threshold_db)
}

impl Rollout {
    fn new(belief: &Belief, ctx: &PlanContext, mode: PlanMode) -> Option<Self> {
        let est = belief.target.as_ref()?;
        let params = &ctx.params;
        let horizon = params.horizon;
        let sigma = sigma_points(est, params.center_weight).ok()?;
        let l_count = sigma.points.len();

        let mut target_pos: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(horizon);
        for h in 1..=horizon {
            let dt = h as f64 * ctx.plan_step;
            target_pos.push(
                sigma
                    .points
                    .iter()
                    .map(|xi| Vector2::new(xi[0] + xi[2] * dt, xi[1] + xi[3] * dt))
                    .collect(),
            );
        }

        let neighbors: Vec<&NeighborTrack> = belief.neighbors.values().collect();
        let mut neighbor_pos: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(neighbors.len());
        for track in &neighbors {
            let mut states = Vec::with_capacity(horizon);
            let mut s = track.state;
            for h in 0..horizon {
                let yaw = track.intent.action_at(h) / ctx.plan_step;
                s = step_agent(&s, Control::new(track.intent.surge, yaw), ctx.plan_step)
                    .unwrap_or(s);
                states.push(s.position);
            }
            neighbor_pos.push(states);
        }

        let mut neighbor_bearings = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let mut per_sigma = Vec::with_capacity(l_count);
            for l in 0..l_count {
                per_sigma.push(
                    neighbor_pos
                        .iter()
                        .map(|states| bearing_to(states[h], target_pos[h][l]))
                        .collect::<Vec<f64>>(),
                );
            }
            neighbor_bearings.push(per_sigma);
        }

        let mut neighbor_pair_gains = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let mut gains = Vec::new();
            for j in 0..neighbor_pos.len() {
                for k in (j + 1)..neighbor_pos.len() {
                    gains.push(predicted_gain(
                        &ctx.modem,
                        neighbor_pos[j][h],
                        neighbor_pos[k][h],
                    ));
                }
            }
            neighbor_pair_gains.push(gains);
        }

        // Surge is assigned once per replan from the current belief.
        let own_pos = belief.own.position;
        let distance = (est.position() - own_pos).norm();
        let surge = surge_heuristic(
            distance,
            est.velocity().norm(),
            params.desired_range,
            belief.own.max_surge,
        );

        // Default epsilon: geometry cost at 70% of the best attainable
        // least singular value, sqrt(M/2) for M bearings.
        let m = neighbors.len() + 1;
        let epsilon = params
            .geometry_epsilon
            .unwrap_or(1.0 / (0.7 * ((m as f64) / 2.0).sqrt()));

        let eps_mode = mode == PlanMode::EpsilonConstrained;
        Some(Self {
            horizon,
            plan_step: ctx.plan_step,
            surge,
            alpha: params.alpha,
            gamma: params.gamma,
            desired_range: params.desired_range,
            max_range: params.max_range,
            safety_range: params.safety_range,
            epsilon,
            mode,
            modem: ctx.modem,
            weights: sigma.weights,
            target_pos,
            neighbor_pos,
            neighbor_bearings,
            neighbor_pair_gains,
            needs_geometry: params.alpha > 0.0 || eps_mode,
            needs_distance: params.alpha < 1.0 || eps_mode,
            needs_connectivity: params.gamma > 0.0,
        })
    }

    fn neighbor_count(&self) -> usize {
        self.neighbor_pos.len()
    }

    /// Stage cost after the own vehicle reached `own_pos` at step index
    /// `h` (0-based). Returns the mode-selected cost (penalties included)
    /// and the sigma-weighted geometry cost for feasibility checks.
    fn stage(&self, own_pos: Vector2<f64>, h: usize) -> (f64, f64) {
        let n_j = self.neighbor_count();
        let mut ut_geometry = 0.0;
        let mut ut_distance = 0.0;
        let mut bearings = Vec::with_capacity(n_j + 1);

        for (l, weight) in self.weights.iter().enumerate() {
            let target = self.target_pos[h][l];
            if self.needs_geometry {
                bearings.clear();
                bearings.push(bearing_to(own_pos, target));
                bearings.extend_from_slice(&self.neighbor_bearings[h][l]);
                ut_geometry += weight * geometry_cost(&bearings);
            }
            if self.needs_distance {
                ut_distance += weight * distance_cost((target - own_pos).norm(), self.desired_range);
            }
        }

        let connectivity = if self.needs_connectivity && n_j > 0 {
            let mut graph = CommGraph::new(n_j + 1, self.modem.ideal_snr_db);
            let mut pair = 0;
            for j in 0..n_j {
                graph.set_gain(
                    0,
                    j + 1,
                    predicted_gain(&self.modem, own_pos, self.neighbor_pos[j][h]),
                );
                for k in (j + 1)..n_j {
                    graph.set_gain(j + 1, k + 1, self.neighbor_pair_gains[h][pair]);
                    pair += 1;
                }
            }
            connectivity_cost(&graph)
        } else {
            0.0
        };

        // Soft constraints: range band to the mean target and inter-agent
        // safety distance, one fixed penalty per violation.
        let mut violations = 0u32;
        let mean_target = self.target_pos[h][0];
        let mean_distance = (mean_target - own_pos).norm();
        if mean_distance <= self.desired_range || mean_distance >= self.max_range {
            violations += 1;
        }
        for states in &self.neighbor_pos {
            if (states[h] - own_pos).norm() < self.safety_range {
                violations += 1;
            }
        }
        let penalty = violations as f64 * CONSTRAINT_PENALTY;

        let cost = match self.mode {
            PlanMode::Weighted => {
                self.alpha * ut_geometry + (1.0 - self.alpha) * ut_distance
                    + self.gamma * connectivity
                    + penalty
            }
            PlanMode::EpsilonConstrained => ut_distance + self.gamma * connectivity + penalty,
        };
        (cost, ut_geometry)
    }
}

/// Candidate ranking: cost, then smallest total heading change, then
/// lexicographic action order.
fn better(candidate: &(f64, f64, Vec<usize>), best: &(f64, f64, Vec<usize>)) -> bool {
    match candidate.0.partial_cmp(&best.0).expect("finite costs") {
        core::cmp::Ordering::Less => true,
        core::cmp::Ordering::Greater => false,
        core::cmp::Ordering::Equal => match candidate.1.partial_cmp(&best.1).expect("finite") {
            core::cmp::Ordering::Less => true,
            core::cmp::Ordering::Greater => false,
            core::cmp::Ordering::Equal => candidate.2 < best.2,
        },
    }
}

struct Search<'a> {
    rollout: &'a Rollout,
    actions: &'a [f64],
    own_limits: AgentState,
    best: Option<(f64, f64, Vec<usize>)>,
    leaves: u64,
}

impl Search<'_> {
    fn descend(&mut self, state: AgentState, depth: usize, acc: f64, sum_abs: f64, path: &mut Vec<usize>) {
        for (idx, &action) in self.actions.iter().enumerate() {
            let yaw = action / self.rollout.plan_step;
            let next = step_agent(
                &state,
                Control::new(self.rollout.surge, yaw),
                self.rollout.plan_step,
            )
            .expect("rollout states stay finite");

            let (stage, ut_geometry) = self.rollout.stage(next.position, depth);
            if self.rollout.mode == PlanMode::EpsilonConstrained
                && ut_geometry > self.rollout.epsilon
            {
                continue; // infeasible subtree
            }
            let acc = acc + stage;
            let sum_abs = sum_abs + action.abs();

            if depth + 1 == self.rollout.horizon {
                let total = acc + stage; // terminal cost: stage cost at the final state
                self.leaves += 1;
                path.push(idx);
                let candidate = (total, sum_abs, path.clone());
                if self.best.as_ref().is_none_or(|b| better(&candidate, b)) {
                    self.best = Some(candidate);
                }
                path.pop();
            } else {
                // Stage costs are nonnegative, so the accumulated cost is an
                // admissible bound; equal-cost subtrees stay open for the
                // tie-break.
                if self.best.as_ref().is_some_and(|b| acc > b.0) {
                    continue;
                }
                path.push(idx);
                self.descend(next, depth + 1, acc, sum_abs, path);
                path.pop();
            }
        }
    }
}

/// Cap the increment half-range so rollout yaw rates stay within the
/// vehicle's limit and execution matches prediction.
fn effective_half_range(ctx: &PlanContext, own: &AgentState) -> f64 {
    ctx.delta_max.min(own.max_yaw_rate * ctx.plan_step)
}

/// Receding-horizon search for the best heading-increment sequence.
///
/// Runs depth-first branch and bound over the `U^H` sequence tree. Without
/// a target estimate the planner returns the zero-increment policy at full
/// surge (`cost` infinite, nothing evaluated).
pub fn plan(belief: &Belief, ctx: &PlanContext, mode: PlanMode) -> PlanOutcome {
    let Some(rollout) = Rollout::new(belief, ctx, mode) else {
        return PlanOutcome {
            policy: IntentPolicy {
                issued_round: ctx.round,
                ..IntentPolicy::zero(ctx.params.horizon, belief.own.max_surge)
            },
            cost: f64::INFINITY,
            leaf_evaluations: 0,
            used_fallback: false,
        };
    };

    let actions = ctx.params.action_set(effective_half_range(ctx, &belief.own));
    let mut search = Search {
        rollout: &rollout,
        actions: &actions,
        own_limits: belief.own,
        best: None,
        leaves: 0,
    };
    let mut path = Vec::with_capacity(rollout.horizon);
    search.descend(search.own_limits, 0, 0.0, 0.0, &mut path);

    match search.best {
        Some((cost, _, path)) => PlanOutcome {
            policy: IntentPolicy {
                headings: path.iter().map(|&i| actions[i]).collect(),
                surge: rollout.surge,
                issued_round: ctx.round,
            },
            cost,
            leaf_evaluations: search.leaves,
            used_fallback: false,
        },
        None => {
            // Every leaf failed the epsilon feasibility check.
            let mut out = plan(belief, ctx, PlanMode::Weighted);
            out.used_fallback = true;
            out
        }
    }
}

/// Cost of one fixed heading-increment sequence, using the same rollout
/// and accumulation as [`plan`].
pub fn evaluate_policy(
    belief: &Belief,
    ctx: &PlanContext,
    mode: PlanMode,
    headings: &[f64],
) -> PolicyEvaluation {
    let Some(rollout) = Rollout::new(belief, ctx, mode) else {
        return PolicyEvaluation {
            cost: f64::INFINITY,
            feasible: false,
        };
    };
    let mut state = belief.own;
    let mut acc = 0.0;
    for (h, &action) in headings.iter().enumerate() {
        let yaw = action / rollout.plan_step;
        state = step_agent(&state, Control::new(rollout.surge, yaw), rollout.plan_step)
            .expect("rollout states stay finite");
        let (stage, ut_geometry) = rollout.stage(state.position, h);
        if mode == PlanMode::EpsilonConstrained && ut_geometry > rollout.epsilon {
            return PolicyEvaluation {
                cost: f64::INFINITY,
                feasible: false,
            };
        }
        acc += stage;
        if h + 1 == rollout.horizon {
            acc += stage;
        }
    }
    PolicyEvaluation {
        cost: acc,
        feasible: true,
    }
}

/// One agent's inputs to a sequential planning round.
#[derive(Debug, Clone)]
pub struct SmaAgent {
    /// Agent id (keys neighbor tracks of the others).
    pub id: AgentId,
    /// The agent's belief at this round.
    pub belief: Belief,
    /// The agent's planning context.
    pub ctx: PlanContext,
}

/// Sequential multi-agent planning over one decision epoch.
///
/// Agents plan in slot order: each conditions on the fresh policies of the
/// agents before it (their broadcasts reach it within the round) and on
/// the stored policies of intent of the agents after it. The fresh policy
/// of agent `i` is written into the beliefs of agents `i+1..n`, modelling
/// in-round broadcast; lossy delivery is the harness's concern.
pub fn sma_round(agents: &mut [SmaAgent], mode: PlanMode) -> Vec<PlanOutcome> {
    let mut outcomes = Vec::with_capacity(agents.len());
    for i in 0..agents.len() {
        let outcome = plan(&agents[i].belief, &agents[i].ctx, mode);
        let sender = agents[i].id;
        let state = agents[i].belief.own;
        for follower in agents[i + 1..].iter_mut() {
            follower.belief.neighbors.insert(
                sender,
                NeighborTrack {
                    state,
                    intent: outcome.policy.clone(),
                    age_rounds: 0,
                },
            );
        }
        outcomes.push(outcome);
    }
    outcomes
}

/// Shrink the heading-increment half-range when the optimizer keeps
/// choosing small increments.
///
/// When all of the last [`GRANULARITY_WINDOW`] chosen first increments
/// have magnitude at most `half_range / (action_count - 1)`, the half
/// range decreases by `granularity_step`, floored at `delta_theta_min`.
pub fn adapt_granularity(recent_first_increments: &[f64], half_range: f64, params: &PlannerParams) -> f64 {
    if params.action_count < 2 || recent_first_increments.len() < GRANULARITY_WINDOW {
        return half_range;
    }
    let threshold = half_range / (params.action_count - 1) as f64;
    let tail = &recent_first_increments[recent_first_increments.len() - GRANULARITY_WINDOW..];
    if tail.iter().all(|d| d.abs() <= threshold) {
        (half_range - params.granularity_step).max(params.delta_theta_min)
    } else {
        half_range
    }
}

//! Slot-stepped discrete-event simulation of the full tracking stack.
//!
//! Time advances one TDMA slot at a time. At each slot boundary, in order:
//! the packet sent in the previous slot is delivered (or lost) per
//! receiver; boundary-aligned sensing fires; the slot owner prunes its
//! window, re-estimates the target, ages and prunes neighbor tracks, adapts
//! its increment granularity, replans, applies the first action of the new
//! policy as its control, and broadcasts its intent packet with the newest
//! pending measurements that fit the byte budget. The slot interior then
//! plays out: every live vehicle integrates its current control exactly,
//! pausing at sensing instants. One record is logged per TDMA round.
//!
//! Randomness is split into independent ChaCha streams per purpose
//! (placement, sensing noise, packet loss) so ablations perturb only their
//! own stream, and identical (config, seed) pairs replay byte-identically.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use umsn_core::channel::{
    transmit, AcousticPacket, ModemConfig, MAX_MEASUREMENTS_PER_PACKET,
    MEASUREMENT_BLOCK_BYTES,
};
use umsn_core::estimator::{estimate, propagate, MeasurementBuffer, TargetEstimate};
use umsn_core::graph::{fiedler, link_gain, CommGraph};
use umsn_core::planner::{
    adapt_granularity, advance_neighbor, geometry_cost, plan, surge_heuristic, Belief,
    IntentPolicy, NeighborTrack, PlanContext, COST_SENTINEL, GRANULARITY_WINDOW,
};
use umsn_core::world::{
    measure_bearing, step_agent, target_truth, true_bearing, AgentState, Control, Measurement,
};
use umsn_core::AgentId;

use crate::config::{
    ConfigError, InitialPlacement, ResolvedScenario, ScenarioConfig, FAILURE_TIMEOUT_ROUNDS,
};
use crate::runlog::{AgentRound, RoundRecord, RunLog};

/// Slack for aligning sensing instants with slot boundaries.
const TIME_EPS: f64 = 1e-9;

struct AgentSim {
    id: AgentId,
    state: AgentState,
    modem: ModemConfig,
    fail_at: Option<f64>,
    control: Control,
    policy: IntentPolicy,
    buffer: MeasurementBuffer,
    pending: Vec<Measurement>,
    belief: Belief,
    track_round: BTreeMap<AgentId, u64>,
    last_estimate: Option<TargetEstimate>,
    delta_max: f64,
    history: Vec<f64>,
    // Per-round log fields, overwritten by the agent's planning slot.
    planned_cost: f64,
    chosen_increment: f64,
    evaluations: u64,
}

impl AgentSim {
    fn alive(&self, t: f64) -> bool {
        self.fail_at.is_none_or(|f| t < f)
    }
}

struct InFlight {
    packet: AcousticPacket,
    sender_pos: Vector2<f64>,
    sent_round: u64,
    sent_slot_end: f64,
}

/// The running simulation.
pub struct Simulation {
    scenario: ResolvedScenario,
    agents: Vec<AgentSim>,
    in_flight: Option<InFlight>,
    sensing_rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    motion_time: f64,
    next_sense_index: u64,
    round_sent: u32,
    round_delivered: u32,
    round_broadcasts: u32,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_initial_states(
    scenario: &ResolvedScenario,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AgentState>, ConfigError> {
    match &scenario.placement {
        InitialPlacement::Explicit(states) => Ok(states.clone()),
        InitialPlacement::Random {
            count,
            center,
            size,
        } => {
            let half = Vector2::new(size.x / 2.0, size.y / 2.0);
            'attempt: for _ in 0..1000 {
                let mut states = Vec::with_capacity(*count);
                for i in 0..*count {
                    let p = Vector2::new(
                        center.x + rng.gen_range(-half.x..=half.x),
                        center.y + rng.gen_range(-half.y..=half.y),
                    );
                    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let (surge, yaw) = scenario.limits[i];
                    states.push(AgentState::new(p, heading, surge, yaw));
                }
                for i in 0..states.len() {
                    for j in (i + 1)..states.len() {
                        let d = (states[i].position - states[j].position).norm();
                        if d < scenario.planner.safety_range {
                            continue 'attempt;
                        }
                    }
                }
                return Ok(states);
            }
            Err(ConfigError::msg(
                "could not sample initial positions satisfying the safety distance",
            ))
        }
    }
}

impl Simulation {
    /// Build the simulation, sampling initial placement if required.
    pub fn new(scenario: ResolvedScenario) -> Result<Self, ConfigError> {
        let mut placement_rng = stream_rng(scenario.seed, 0);
        let states = sample_initial_states(&scenario, &mut placement_rng)?;
        let horizon = scenario.planner.horizon;

        let agents = states
            .into_iter()
            .enumerate()
            .map(|(i, state)| AgentSim {
                id: i as AgentId,
                state,
                modem: scenario.modems[i],
                fail_at: scenario
                    .failures
                    .iter()
                    .filter(|(id, _)| *id as usize == i)
                    .map(|(_, t)| *t)
                    .fold(None, |acc: Option<f64>, t| {
                        Some(acc.map_or(t, |a| a.min(t)))
                    }),
                control: Control::new(0.0, 0.0),
                policy: IntentPolicy::zero(horizon, 0.0),
                buffer: MeasurementBuffer::new(
                    scenario.estimator_window,
                    scenario.estimator_capacity,
                ),
                pending: Vec::new(),
                belief: Belief::new(state),
                track_round: BTreeMap::new(),
                last_estimate: None,
                delta_max: scenario.planner.delta_theta_max,
                history: Vec::new(),
                planned_cost: f64::INFINITY,
                chosen_increment: 0.0,
                evaluations: 0,
            })
            .collect();

        Ok(Self {
            sensing_rng: stream_rng(scenario.seed, 1),
            loss_rng: stream_rng(scenario.seed, 2),
            scenario,
            agents,
            in_flight: None,
            motion_time: 0.0,
            next_sense_index: 0,
            round_sent: 0,
            round_delivered: 0,
            round_broadcasts: 0,
        })
    }

    /// Run to completion, producing one record per TDMA round.
    pub fn run(mut self) -> RunLog {
        let slots_per_round = self.scenario.tdma.slots();
        let slot = self.scenario.tdma.slot_duration;
        let total_slots = (self.scenario.duration / slot).round() as u64;

        let mut rounds = Vec::with_capacity((total_slots as usize) / slots_per_round + 1);
        for k in 0..total_slots {
            let t = k as f64 * slot;
            let round = k / slots_per_round as u64;
            self.deliver_in_flight(t);
            self.boundary_sensing(t);
            let owner = self.scenario.tdma.slot_owner(t + TIME_EPS);
            if self.agents[owner as usize].alive(t) {
                self.owner_step(owner as usize, t, round);
            }
            self.slot_interior(t, slot);
            if (k + 1) % slots_per_round as u64 == 0 {
                rounds.push(self.log_round(round, t + slot));
                self.round_sent = 0;
                self.round_delivered = 0;
                self.round_broadcasts = 0;
            }
        }

        RunLog {
            scenario: self.scenario.name.clone(),
            seed: self.scenario.seed,
            rounds,
        }
    }

    /// Advance every live vehicle to `to` under its current control,
    /// freezing any vehicle at its failure time.
    fn advance_all(&mut self, to: f64) {
        let from = self.motion_time;
        if to <= from + TIME_EPS {
            self.motion_time = self.motion_time.max(to);
            return;
        }
        for a in &mut self.agents {
            let stop = a.fail_at.map_or(to, |f| f.clamp(from, to));
            let dt = stop - from;
            if dt > TIME_EPS {
                a.state = step_agent(&a.state, a.control, dt).expect("finite simulation state");
            }
        }
        self.motion_time = to;
    }

    /// Sensing instants that coincide with the slot boundary at `t`.
    fn boundary_sensing(&mut self, t: f64) {
        while self.next_sense_index as f64 * self.scenario.sensing_period <= t + TIME_EPS {
            let ts = self.next_sense_index as f64 * self.scenario.sensing_period;
            self.sense_all(ts);
            self.next_sense_index += 1;
        }
    }

    /// Sensing instants strictly inside the slot, then motion to its end.
    fn slot_interior(&mut self, t: f64, slot: f64) {
        let end = t + slot;
        while (self.next_sense_index as f64) * self.scenario.sensing_period < end - TIME_EPS {
            let ts = self.next_sense_index as f64 * self.scenario.sensing_period;
            self.advance_all(ts);
            self.sense_all(ts);
            self.next_sense_index += 1;
        }
        self.advance_all(end);
    }

    /// Every live agent takes one bearing of the target.
    fn sense_all(&mut self, ts: f64) {
        let target = target_truth(&self.scenario.trajectory, ts).position;
        for a in &mut self.agents {
            if !a.alive(ts) {
                continue;
            }
            match measure_bearing(
                target,
                a.state.position,
                self.scenario.noise_bound,
                &mut self.sensing_rng,
            ) {
                Ok(bearing) => {
                    let m = Measurement {
                        time: ts,
                        bearing,
                        observer: a.state.position,
                        source: a.id,
                    };
                    if let Err(e) = a.buffer.push(m) {
                        log::debug!("agent {} dropped own measurement: {e}", a.id);
                    }
                    a.pending.push(m);
                }
                Err(e) => log::warn!("agent {} cannot sense: {e}", a.id),
            }
        }
    }

    /// Deliver (or lose) the packet transmitted during the previous slot.
    fn deliver_in_flight(&mut self, t: f64) {
        let Some(flight) = self.in_flight.take() else {
            return;
        };
        let sender = flight.packet.sender as usize;
        if !self.agents[sender].alive(flight.sent_slot_end) {
            // The sender died mid-transmission; nothing completes.
            return;
        }
        for j in 0..self.agents.len() {
            if j == sender || !self.agents[j].alive(t) {
                continue;
            }
            self.round_sent += 1;
            let delivered = transmit(
                &flight.packet,
                flight.sender_pos,
                self.agents[j].state.position,
                &self.agents[j].modem,
                self.scenario.tdma.slot_duration,
                self.scenario.pdr,
                &mut self.loss_rng,
            )
            .unwrap_or(false);
            if delivered {
                self.round_delivered += 1;
                self.receive(j, &flight);
            }
        }
    }

    /// Apply a delivered packet to receiver `j`'s buffer and belief.
    fn receive(&mut self, j: usize, flight: &InFlight) {
        let pkt = &flight.packet;
        let receiver = &mut self.agents[j];
        for block in &pkt.measurements {
            let m = Measurement {
                time: block[0] as f64,
                bearing: block[1] as f64,
                observer: Vector2::new(block[2] as f64, block[3] as f64),
                source: pkt.sender,
            };
            if let Err(e) = receiver.buffer.push(m) {
                log::debug!("agent {j} dropped relayed measurement: {e}");
            }
        }

        let (sender_surge_cap, sender_yaw_cap) = self.scenario.limits[pkt.sender as usize];
        let pose = AgentState::new(
            Vector2::new(pkt.pose[0] as f64, pkt.pose[1] as f64),
            pkt.pose[2] as f64,
            sender_surge_cap,
            sender_yaw_cap,
        );
        // Surge is not on the wire; reconstruct it with the shared
        // heuristic against the receiver's own target estimate.
        let surge = match &receiver.last_estimate {
            Some(est) => surge_heuristic(
                (est.position() - pose.position).norm(),
                est.velocity().norm(),
                self.scenario.planner.desired_range,
                sender_surge_cap,
            ),
            None => sender_surge_cap,
        };
        receiver.belief.neighbors.insert(
            pkt.sender,
            NeighborTrack {
                state: pose,
                intent: IntentPolicy {
                    headings: pkt.headings.iter().map(|&h| h as f64).collect(),
                    surge,
                    issued_round: flight.sent_round,
                },
                age_rounds: 0,
            },
        );
        receiver.track_round.insert(pkt.sender, flight.sent_round);
    }

    /// Estimate, maintain the belief, replan, and broadcast.
    fn owner_step(&mut self, i: usize, t: f64, round: u64) {
        let plan_step = self.scenario.tdma.round_duration();
        let a = &mut self.agents[i];

        a.buffer.prune(t);
        match estimate(&a.buffer, t, self.scenario.noise_bound) {
            Ok(est) => a.last_estimate = Some(est),
            Err(e) => {
                log::debug!("agent {i} keeps prior estimate: {e}");
                if let Some(prev) = &a.last_estimate {
                    a.last_estimate = Some(propagate(prev, t).expect("time is monotone"));
                }
            }
        }
        a.belief.own = a.state;
        a.belief.target = a.last_estimate;

        // Age neighbor tracks up to this round; prune long-silent peers.
        let mut stale = Vec::new();
        for (&id, track) in a.belief.neighbors.iter_mut() {
            let as_of = a.track_round.entry(id).or_insert(round);
            while *as_of < round {
                advance_neighbor(track, plan_step);
                *as_of += 1;
            }
            if track.age_rounds >= FAILURE_TIMEOUT_ROUNDS {
                stale.push(id);
            }
        }
        for id in stale {
            log::debug!("agent {i} prunes silent neighbor {id}");
            a.belief.neighbors.remove(&id);
            a.track_round.remove(&id);
        }

        a.delta_max = adapt_granularity(&a.history, a.delta_max, &self.scenario.planner);
        let ctx = PlanContext {
            params: self.scenario.planner,
            modem: a.modem,
            plan_step,
            delta_max: a.delta_max,
            round,
        };
        let outcome = plan(&a.belief, &ctx, self.scenario.mode);
        a.policy = outcome.policy;
        a.planned_cost = outcome.cost;
        a.chosen_increment = a.policy.headings[0];
        a.evaluations = outcome.leaf_evaluations;
        // Increment choices feed granularity adaptation only while the
        // vehicle is actually maneuvering; a parked vehicle's zero-turn
        // ties say nothing about the needed resolution, and the shrink
        // rule has no inverse.
        if outcome.leaf_evaluations > 0 && a.policy.surge > 0.1 * a.state.max_surge {
            a.history.push(a.policy.headings[0].abs());
            let extra = a.history.len().saturating_sub(GRANULARITY_WINDOW);
            if extra > 0 {
                a.history.drain(..extra);
            }
        }
        a.control = Control::new(a.policy.surge, a.policy.headings[0] / plan_step);

        // Pack the freshest pending measurements that fit the budget.
        let budget = a.modem.payload_budget(self.scenario.tdma.slot_duration);
        let intent_bytes = AcousticPacket::intent_block_bytes(a.policy.headings.len());
        let room = budget.saturating_sub(intent_bytes) / MEASUREMENT_BLOCK_BYTES;
        let take = room.min(MAX_MEASUREMENTS_PER_PACKET).min(a.pending.len());
        let split = a.pending.len() - take;
        let mut blocks: Vec<[f32; 4]> = a
            .pending
            .split_off(split)
            .iter()
            .rev() // newest first
            .map(|m| {
                [
                    m.time as f32,
                    m.bearing as f32,
                    m.observer.x as f32,
                    m.observer.y as f32,
                ]
            })
            .collect();
        blocks.truncate(MAX_MEASUREMENTS_PER_PACKET);
        let window_cutoff = t - self.scenario.estimator_window;
        a.pending.retain(|m| m.time >= window_cutoff);

        let packet = AcousticPacket {
            sender: a.id,
            flags: 0,
            pose: [
                a.state.position.x as f32,
                a.state.position.y as f32,
                a.state.heading as f32,
            ],
            headings: a.policy.headings.iter().map(|&h| h as f32).collect(),
            measurements: blocks,
        };
        match packet.encode(budget) {
            Ok(_) => {
                self.round_broadcasts += 1;
                self.in_flight = Some(InFlight {
                    packet,
                    sender_pos: a.state.position,
                    sent_round: round,
                    sent_slot_end: t + self.scenario.tdma.slot_duration,
                });
            }
            Err(e) => log::warn!("agent {i} cannot transmit: {e}"),
        }
    }

    /// Index pairs `(i, j)` of live agents, `i < j`.
    fn live_indices(&self, t: f64) -> Vec<usize> {
        (0..self.agents.len())
            .filter(|&i| self.agents[i].alive(t))
            .collect()
    }

    fn log_round(&mut self, round: u64, t_end: f64) -> RoundRecord {
        let truth = target_truth(&self.scenario.trajectory, t_end);
        let live = self.live_indices(t_end);

        // True communication graph over live agents.
        let mut graph = CommGraph::new(live.len(), self.scenario.modems[0].ideal_snr_db);
        for (gi, &i) in live.iter().enumerate() {
            for (gj, &j) in live.iter().enumerate().skip(gi + 1) {
                let d = (self.agents[i].state.position - self.agents[j].state.position).norm();
                let rho = umsn_core::channel::snr(&self.agents[i].modem, d.max(1e-6))
                    .unwrap_or(f64::NEG_INFINITY);
                graph.set_gain(
                    gi,
                    gj,
                    link_gain(rho, self.agents[i].modem.detection_threshold_db),
                );
            }
        }
        let fiedler_value = if live.len() >= 2 {
            fiedler(&graph.laplacian()).unwrap_or(0.0)
        } else {
            0.0
        };

        let team_bearings: Vec<f64> = live
            .iter()
            .filter_map(|&i| {
                true_bearing(truth.position, self.agents[i].state.position).ok()
            })
            .collect();
        let team_geometry = geometry_cost(&team_bearings);

        let mut pair_sum = 0.0;
        let mut pair_count = 0usize;
        for (gi, &i) in live.iter().enumerate() {
            for &j in live.iter().skip(gi + 1) {
                pair_sum +=
                    (self.agents[i].state.position - self.agents[j].state.position).norm();
                pair_count += 1;
            }
        }
        let mean_pairwise = if pair_count > 0 {
            pair_sum / pair_count as f64
        } else {
            0.0
        };

        let mut agents_out = Vec::with_capacity(self.agents.len());
        for (idx, a) in self.agents.iter().enumerate() {
            let alive = a.alive(t_end);
            let gi = live.iter().position(|&l| l == idx);

            let (est, cov_trace, err) = if alive {
                match &a.last_estimate {
                    Some(e) => {
                        let prop = propagate(e, t_end).expect("time is monotone");
                        let err = (prop.position() - truth.position).norm();
                        (
                            Some((prop.state[0], prop.state[1], prop.state[2], prop.state[3])),
                            Some(prop.covariance.trace()),
                            Some(err),
                        )
                    }
                    None => (None, None, None),
                }
            } else {
                (None, None, None)
            };

            let (jg, jd, jc) = if let Some(gi) = gi {
                let neighbors = graph.neighbors(gi);
                let mut bearings = Vec::with_capacity(neighbors.len() + 1);
                if let Ok(b) = true_bearing(truth.position, a.state.position) {
                    bearings.push(b);
                }
                for &gj in &neighbors {
                    let other = live[gj];
                    if let Ok(b) =
                        true_bearing(truth.position, self.agents[other].state.position)
                    {
                        bearings.push(b);
                    }
                }
                let jg = geometry_cost(&bearings);
                let jd = (truth.position - a.state.position).norm()
                    / self.scenario.planner.desired_range;
                let jc = if neighbors.is_empty() {
                    0.0
                } else if fiedler_value > umsn_core::graph::CONNECTIVITY_EPS {
                    neighbors.len() as f64 / fiedler_value
                } else {
                    neighbors.len() as f64 * COST_SENTINEL
                };
                (jg, jd, jc)
            } else {
                (0.0, 0.0, 0.0)
            };

            agents_out.push(AgentRound {
                pose: (a.state.position.x, a.state.position.y, a.state.heading),
                alive,
                estimate: est,
                covariance_trace: cov_trace,
                tracking_error: err,
                cost_geometry: jg,
                cost_distance: jd,
                cost_connectivity: jc,
                planned_cost: a.planned_cost,
                chosen_increment: a.chosen_increment,
                evaluations: a.evaluations,
            });
        }

        RoundRecord {
            round,
            time: t_end,
            target: (
                truth.position.x,
                truth.position.y,
                truth.velocity.x,
                truth.velocity.y,
            ),
            agents: agents_out,
            fiedler: fiedler_value,
            team_geometry_cost: team_geometry,
            mean_pairwise_distance: mean_pairwise,
            packets_sent: self.round_sent,
            packets_delivered: self.round_delivered,
            broadcasts: self.round_broadcasts,
        }
    }
}

/// Validate a configuration and run it to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog, ConfigError> {
    run_resolved(cfg.resolve()?)
}

/// Run an already-resolved scenario.
pub fn run_resolved(scenario: ResolvedScenario) -> Result<RunLog, ConfigError> {
    Ok(Simulation::new(scenario)?.run())
}

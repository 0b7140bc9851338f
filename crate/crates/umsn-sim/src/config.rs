//! Scenario configuration: TOML schema, validation, and resolution into
//! the core types the engine consumes.
//!
//! Validation enumerates every violated invariant instead of stopping at
//! the first, so a rejected config comes back with the full repair list.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use umsn_core::channel::{AcousticPacket, ModemConfig, TdmaConfig};
use umsn_core::planner::{PlanMode, PlannerParams};
use umsn_core::world::{AgentState, TrajectorySpec};
use umsn_core::AgentId;

/// Rounds a neighbor may stay silent before it is pruned as failed.
pub const FAILURE_TIMEOUT_ROUNDS: u32 = 3;

/// A rejected configuration, carrying every violation found.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Human-readable violations.
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid scenario configuration:")?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    /// Single-message error.
    pub fn msg(s: impl Into<String>) -> Self {
        Self {
            violations: vec![s.into()],
        }
    }
}

fn default_seed() -> u64 {
    0
}
fn default_frequency() -> f64 {
    25.0
}
fn default_detection_threshold() -> f64 {
    20.0
}
fn default_bitrate() -> u32 {
    120
}
fn default_angular_rate() -> f64 {
    0.01
}
fn default_center_weight() -> f64 {
    1.0 / 3.0
}
fn default_window_periods() -> f64 {
    20.0
}
fn default_capacity() -> usize {
    40
}
fn default_delta_theta_min() -> f64 {
    0.05
}
fn default_granularity_step() -> f64 {
    0.05
}

/// Root of the scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario name (used for output file names).
    pub name: String,
    /// Simulated duration, seconds; a whole number of TDMA rounds.
    pub duration: f64,
    /// Master seed; the CLI may override it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Target trajectory.
    pub target: TargetSection,
    /// TDMA schedule.
    pub tdma: TdmaSection,
    /// Modem defaults for every agent.
    pub modem: ModemSection,
    /// Bearing sensor settings.
    pub sensing: SensingSection,
    /// Packet-loss settings.
    pub channel: ChannelSection,
    /// Planner tuning.
    pub planner: PlannerSection,
    /// Vehicle actuation limits (team-wide defaults).
    pub vehicle: VehicleSection,
    /// Explicit initial agent states; mutually exclusive with `placement`.
    #[serde(default)]
    pub agents: Vec<AgentSection>,
    /// Random initial placement; mutually exclusive with `agents`.
    #[serde(default)]
    pub placement: Option<PlacementSection>,
    /// Failure injections.
    #[serde(default)]
    pub failures: Vec<FailureSection>,
    /// Estimator window settings.
    #[serde(default)]
    pub estimator: EstimatorSection,
}

/// Target trajectory section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSection {
    /// Stationary target.
    Fixed {
        /// Position, meters.
        position: [f64; 2],
    },
    /// Constant-velocity target; give either `velocity` or `speed` plus
    /// `heading`.
    ConstantVelocity {
        /// Initial position, meters.
        position: [f64; 2],
        /// Velocity vector, m/s.
        #[serde(default)]
        velocity: Option<[f64; 2]>,
        /// Speed along `heading`, m/s.
        #[serde(default)]
        speed: Option<f64>,
        /// Course, radians.
        #[serde(default)]
        heading: Option<f64>,
    },
    /// Weaving advance along a rotated track axis.
    Sinusoid {
        /// Initial position, meters.
        position: [f64; 2],
        /// Along-track speed, m/s (also the lateral amplitude in meters).
        track_speed: f64,
        /// Lateral oscillation rate, rad/s.
        #[serde(default = "default_angular_rate")]
        angular_rate: f64,
        /// Track orientation, radians.
        #[serde(default)]
        heading: f64,
    },
}

/// TDMA schedule section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdmaSection {
    /// Slot duration, seconds.
    pub slot_duration: f64,
    /// Transmission order; defaults to ascending agent id.
    #[serde(default)]
    pub slot_order: Option<Vec<AgentId>>,
}

/// Modem section (applies to every agent unless overridden per agent).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModemSection {
    /// Source level, dB.
    pub source_level: f64,
    /// Noise level, dB.
    pub noise_level: f64,
    /// Directivity index, dB.
    #[serde(default)]
    pub directivity: f64,
    /// Center frequency, kHz.
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    /// Detection threshold, dB.
    #[serde(default = "default_detection_threshold")]
    pub detection_threshold: f64,
    /// Bitrate, bits per second.
    #[serde(default = "default_bitrate")]
    pub bitrate: u32,
    /// Ideal SNR for Laplacian normalization; defaults to the zero-loss
    /// SNR `SL - NL + DI`.
    #[serde(default)]
    pub ideal_snr: Option<f64>,
}

impl ModemSection {
    fn resolve(&self) -> ModemConfig {
        ModemConfig {
            source_level_db: self.source_level,
            noise_level_db: self.noise_level,
            directivity_db: self.directivity,
            frequency_khz: self.frequency,
            detection_threshold_db: self.detection_threshold,
            bitrate_bps: self.bitrate,
            ideal_snr_db: self
                .ideal_snr
                .unwrap_or(self.source_level - self.noise_level + self.directivity),
        }
    }
}

/// Bearing sensor section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    /// Measurement period, seconds.
    pub period: f64,
    /// Uniform noise bound, degrees.
    pub noise_bound_deg: f64,
}

/// Packet-loss section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Packet delivery ratio in `[0, 1]`.
    pub pdr: f64,
}

/// Planner section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    /// Lookahead horizon, steps.
    pub horizon: usize,
    /// Heading-increment set cardinality (odd).
    pub action_count: usize,
    /// Initial heading-increment half-range, radians.
    pub delta_theta_max: f64,
    /// Half-range floor under granularity adaptation.
    #[serde(default = "default_delta_theta_min")]
    pub delta_theta_min: f64,
    /// Half-range decrement per adaptation.
    #[serde(default = "default_granularity_step")]
    pub granularity_step: f64,
    /// Geometry/distance trade-off in `[0, 1]`.
    pub alpha: f64,
    /// Connectivity weight in `[0, 1]`.
    pub gamma: f64,
    /// Desired range to the target, m.
    pub desired_range: f64,
    /// Maximum range to the target, m.
    pub max_range: f64,
    /// Inter-agent safety distance, m.
    pub safety_range: f64,
    /// Central sigma-point weight.
    #[serde(default = "default_center_weight")]
    pub center_weight: f64,
    /// Epsilon threshold for the constrained mode.
    #[serde(default)]
    pub geometry_epsilon: Option<f64>,
    /// Objective mode.
    #[serde(default)]
    pub mode: PlanModeSection,
}

/// Objective mode names accepted in configs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanModeSection {
    /// Weighted-sum objective.
    #[default]
    Weighted,
    /// Epsilon-constrained objective.
    EpsilonConstrained,
}

impl From<PlanModeSection> for PlanMode {
    fn from(m: PlanModeSection) -> Self {
        match m {
            PlanModeSection::Weighted => PlanMode::Weighted,
            PlanModeSection::EpsilonConstrained => PlanMode::EpsilonConstrained,
        }
    }
}

/// Vehicle limits section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    /// Maximum surge speed, m/s.
    pub max_surge: f64,
    /// Maximum yaw rate, rad/s.
    pub max_yaw_rate: f64,
}

/// One explicitly placed agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    /// Initial position, meters.
    pub position: [f64; 2],
    /// Initial heading, radians.
    #[serde(default)]
    pub heading: f64,
    /// Per-agent surge limit override.
    #[serde(default)]
    pub max_surge: Option<f64>,
    /// Per-agent yaw-rate limit override.
    #[serde(default)]
    pub max_yaw_rate: Option<f64>,
    /// Per-agent modem override.
    #[serde(default)]
    pub modem: Option<ModemSection>,
}

/// Random initial placement in an axis-aligned box.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    /// Number of agents to place.
    pub count: usize,
    /// Box center, meters.
    pub center: [f64; 2],
    /// Box side lengths, meters.
    pub size: [f64; 2],
}

/// Scheduled agent failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSection {
    /// Agent that fails.
    pub agent: AgentId,
    /// Failure time, seconds.
    pub time: f64,
}

/// Estimator window section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// Window length in measurement periods.
    #[serde(default = "default_window_periods")]
    pub window_periods: f64,
    /// Maximum buffered measurements.
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            window_periods: default_window_periods(),
            capacity: default_capacity(),
        }
    }
}

/// How initial agent states are produced.
#[derive(Debug, Clone)]
pub enum InitialPlacement {
    /// Fully specified states.
    Explicit(Vec<AgentState>),
    /// Sampled by the engine from its placement stream.
    Random {
        /// Number of agents.
        count: usize,
        /// Box center.
        center: Vector2<f64>,
        /// Box side lengths.
        size: Vector2<f64>,
    },
}

impl InitialPlacement {
    /// Team size.
    pub fn count(&self) -> usize {
        match self {
            InitialPlacement::Explicit(v) => v.len(),
            InitialPlacement::Random { count, .. } => *count,
        }
    }
}

/// Validated, engine-ready form of a scenario.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    /// Scenario name.
    pub name: String,
    /// Master seed.
    pub seed: u64,
    /// Duration, seconds.
    pub duration: f64,
    /// Target trajectory.
    pub trajectory: TrajectorySpec,
    /// TDMA schedule.
    pub tdma: TdmaConfig,
    /// Per-agent modem configs.
    pub modems: Vec<ModemConfig>,
    /// Per-agent vehicle limits (surge, yaw rate).
    pub limits: Vec<(f64, f64)>,
    /// Measurement period, seconds.
    pub sensing_period: f64,
    /// Uniform bearing-noise bound, radians.
    pub noise_bound: f64,
    /// Packet delivery ratio.
    pub pdr: f64,
    /// Planner tuning.
    pub planner: PlannerParams,
    /// Objective mode.
    pub mode: PlanMode,
    /// Initial states or placement box.
    pub placement: InitialPlacement,
    /// Failure injections as (agent, time).
    pub failures: Vec<(AgentId, f64)>,
    /// Estimator window, seconds.
    pub estimator_window: f64,
    /// Estimator capacity, measurements.
    pub estimator_capacity: usize,
}

impl ScenarioConfig {
    /// Parse a TOML scenario file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::msg(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError::msg(format!("parse error: {e}")))
    }

    /// Validate every invariant and resolve into engine-ready form.
    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        let mut violations = Vec::new();

        let n = if !self.agents.is_empty() {
            if self.placement.is_some() {
                violations.push("give either [agents] or [placement], not both".into());
            }
            self.agents.len()
        } else if let Some(p) = &self.placement {
            if p.count == 0 {
                violations.push("placement.count must be positive".into());
            }
            if p.size[0] <= 0.0 || p.size[1] <= 0.0 {
                violations.push("placement.size must be positive".into());
            }
            p.count
        } else {
            violations.push("no agents configured".into());
            0
        };
        if n > 16 {
            violations.push(format!("team size {n} exceeds the 4-bit wire limit of 16"));
        }

        // TDMA.
        if !(self.tdma.slot_duration > 0.0) {
            violations.push("tdma.slot_duration must be positive".into());
        }
        let round = self.tdma.slot_duration * n as f64;
        if self.duration <= 0.0 {
            violations.push("duration must be positive".into());
        } else if round > 0.0 {
            let rounds = self.duration / round;
            if (rounds - rounds.round()).abs() > 1e-9 {
                violations.push(format!(
                    "duration {} is not a whole number of TDMA rounds ({round} s each)",
                    self.duration
                ));
            }
        }
        if let Some(order) = &self.tdma.slot_order {
            let mut sorted: Vec<AgentId> = order.clone();
            sorted.sort_unstable();
            let expect: Vec<AgentId> = (0..n as AgentId).collect();
            if sorted != expect {
                violations.push("tdma.slot_order must be a permutation of the agent ids".into());
            }
        }

        // Modem invariants: f > 0, bitrate > 0, ideal SNR > DT > 0.
        let mut check_modem = |label: &str, m: &ModemSection| {
            if !(m.frequency > 0.0) {
                violations.push(format!("{label}: frequency must be positive"));
            }
            if m.bitrate == 0 {
                violations.push(format!("{label}: bitrate must be positive"));
            }
            let resolved = m.resolve();
            if !(m.detection_threshold > 0.0) {
                violations.push(format!("{label}: detection threshold must be positive"));
            }
            if !(resolved.ideal_snr_db > m.detection_threshold) {
                violations.push(format!(
                    "{label}: ideal SNR must exceed the detection threshold"
                ));
            }
        };
        check_modem("modem", &self.modem);
        for (i, a) in self.agents.iter().enumerate() {
            if let Some(m) = &a.modem {
                check_modem(&format!("agents[{i}].modem"), m);
            }
        }

        // Sensing and channel.
        if !(self.sensing.period > 0.0) {
            violations.push("sensing.period must be positive".into());
        }
        if !(self.sensing.noise_bound_deg >= 0.0) {
            violations.push("sensing.noise_bound_deg must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.channel.pdr) {
            violations.push("channel.pdr must be in [0, 1]".into());
        }

        // Planner.
        let planner = PlannerParams {
            horizon: self.planner.horizon,
            action_count: self.planner.action_count,
            delta_theta_max: self.planner.delta_theta_max,
            delta_theta_min: self.planner.delta_theta_min,
            granularity_step: self.planner.granularity_step,
            alpha: self.planner.alpha,
            gamma: self.planner.gamma,
            desired_range: self.planner.desired_range,
            max_range: self.planner.max_range,
            safety_range: self.planner.safety_range,
            center_weight: self.planner.center_weight,
            geometry_epsilon: self.planner.geometry_epsilon,
        };
        if let Err(e) = planner.validate() {
            violations.push(e.to_string());
        }

        // The intent block must fit the slot budget.
        let budget = self.modem.resolve().payload_budget(self.tdma.slot_duration);
        let intent = AcousticPacket::intent_block_bytes(self.planner.horizon);
        if intent > budget {
            violations.push(format!(
                "intent block of {intent} bytes exceeds the {budget}-byte slot budget"
            ));
        }

        // Vehicle limits.
        if !(self.vehicle.max_surge > 0.0) {
            violations.push("vehicle.max_surge must be positive".into());
        }
        if !(self.vehicle.max_yaw_rate > 0.0) {
            violations.push("vehicle.max_yaw_rate must be positive".into());
        }

        // Explicit agents: finiteness and initial separation.
        for (i, a) in self.agents.iter().enumerate() {
            if !a.position.iter().all(|v| v.is_finite()) || !a.heading.is_finite() {
                violations.push(format!("agents[{i}]: non-finite initial state"));
            }
        }
        for i in 0..self.agents.len() {
            for j in (i + 1)..self.agents.len() {
                let pi = self.agents[i].position;
                let pj = self.agents[j].position;
                let d = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                if d < self.planner.safety_range {
                    violations.push(format!(
                        "agents {i} and {j} start {d:.1} m apart, closer than the safety \
                         distance {}",
                        self.planner.safety_range
                    ));
                }
            }
        }

        // Failures reference known agents.
        for f in &self.failures {
            if (f.agent as usize) >= n {
                violations.push(format!("failure references unknown agent {}", f.agent));
            }
            if !(f.time >= 0.0) {
                violations.push(format!("failure time {} must be nonnegative", f.time));
            }
        }

        // Target.
        let trajectory = match &self.target {
            TargetSection::Fixed { position } => TrajectorySpec::Fixed {
                position: Vector2::new(position[0], position[1]),
            },
            TargetSection::ConstantVelocity {
                position,
                velocity,
                speed,
                heading,
            } => {
                let v = match (velocity, speed, heading) {
                    (Some(v), None, None) => Vector2::new(v[0], v[1]),
                    (None, Some(s), Some(h)) => Vector2::new(s * h.cos(), s * h.sin()),
                    _ => {
                        violations.push(
                            "constant-velocity target needs either velocity or speed + heading"
                                .into(),
                        );
                        Vector2::zeros()
                    }
                };
                TrajectorySpec::ConstantVelocity {
                    position: Vector2::new(position[0], position[1]),
                    velocity: v,
                }
            }
            TargetSection::Sinusoid {
                position,
                track_speed,
                angular_rate,
                heading,
            } => TrajectorySpec::Sinusoid {
                position: Vector2::new(position[0], position[1]),
                track_speed: *track_speed,
                angular_rate: *angular_rate,
                heading: *heading,
            },
        };

        if !violations.is_empty() {
            return Err(ConfigError { violations });
        }

        let tdma = TdmaConfig {
            slot_duration: self.tdma.slot_duration,
            slot_order: self
                .tdma
                .slot_order
                .clone()
                .unwrap_or_else(|| (0..n as AgentId).collect()),
        };

        let default_modem = self.modem.resolve();
        let mut modems = vec![default_modem; n];
        let mut limits = vec![(self.vehicle.max_surge, self.vehicle.max_yaw_rate); n];
        let placement = if !self.agents.is_empty() {
            let mut states = Vec::with_capacity(n);
            for (i, a) in self.agents.iter().enumerate() {
                if let Some(m) = &a.modem {
                    modems[i] = m.resolve();
                }
                let surge = a.max_surge.unwrap_or(self.vehicle.max_surge);
                let yaw = a.max_yaw_rate.unwrap_or(self.vehicle.max_yaw_rate);
                limits[i] = (surge, yaw);
                states.push(AgentState::new(
                    Vector2::new(a.position[0], a.position[1]),
                    a.heading,
                    surge,
                    yaw,
                ));
            }
            InitialPlacement::Explicit(states)
        } else {
            let p = self.placement.as_ref().expect("checked above");
            InitialPlacement::Random {
                count: p.count,
                center: Vector2::new(p.center[0], p.center[1]),
                size: Vector2::new(p.size[0], p.size[1]),
            }
        };

        Ok(ResolvedScenario {
            name: self.name.clone(),
            seed: self.seed,
            duration: self.duration,
            trajectory,
            tdma,
            modems,
            limits,
            sensing_period: self.sensing.period,
            noise_bound: self.sensing.noise_bound_deg.to_radians(),
            pdr: self.channel.pdr,
            planner,
            mode: self.planner.mode.into(),
            placement,
            failures: self.failures.iter().map(|f| (f.agent, f.time)).collect(),
            estimator_window: self.estimator.window_periods * self.sensing.period,
            estimator_capacity: self.estimator.capacity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
            name = "unit"
            duration = 60.0
            seed = 7

            [target]
            kind = "fixed"
            position = [-30.0, -100.0]

            [tdma]
            slot_duration = 2.0

            [modem]
            source_level = 186.0
            noise_level = 20.0

            [sensing]
            period = 1.0
            noise_bound_deg = 3.5

            [channel]
            pdr = 0.95

            [planner]
            horizon = 2
            action_count = 5
            delta_theta_max = 0.3
            alpha = 0.8
            gamma = 0.3
            desired_range = 50.0
            max_range = 400.0
            safety_range = 25.0

            [vehicle]
            max_surge = 1.0
            max_yaw_rate = 0.05

            [[agents]]
            position = [-17.0, -23.0]

            [[agents]]
            position = [-10.0, 5.0]

            [[agents]]
            position = [20.0, -3.0]
        "#
        .to_string()
    }

    #[test]
    fn minimal_config_resolves() {
        let cfg: ScenarioConfig = toml::from_str(&minimal_toml()).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.tdma.slots(), 3);
        assert_eq!(resolved.tdma.round_duration(), 6.0);
        assert_eq!(resolved.modems[0].ideal_snr_db, 166.0);
        assert!((resolved.noise_bound - 3.5f64.to_radians()).abs() < 1e-12);
        assert_eq!(resolved.estimator_capacity, 40);
        assert_eq!(resolved.estimator_window, 20.0);
    }

    #[test]
    fn violations_are_all_enumerated() {
        let mut cfg: ScenarioConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.duration = 61.0; // not a whole number of rounds
        cfg.channel.pdr = 1.5;
        cfg.planner.action_count = 4;
        cfg.failures.push(FailureSection {
            agent: 9,
            time: 10.0,
        });
        let err = cfg.resolve().unwrap_err();
        assert!(err.violations.len() >= 4, "{err}");
        assert!(err.violations.iter().any(|v| v.contains("rounds")));
        assert!(err.violations.iter().any(|v| v.contains("pdr")));
        assert!(err.violations.iter().any(|v| v.contains("odd")));
        assert!(err.violations.iter().any(|v| v.contains("unknown agent")));
    }

    #[test]
    fn initial_separation_is_enforced() {
        let mut cfg: ScenarioConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.agents[1].position = cfg.agents[0].position;
        let err = cfg.resolve().unwrap_err();
        assert!(err.violations.iter().any(|v| v.contains("safety")));
    }

    #[test]
    fn constant_velocity_accepts_speed_heading() {
        let mut cfg: ScenarioConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.target = TargetSection::ConstantVelocity {
            position: [0.0, 0.0],
            velocity: None,
            speed: Some(0.5),
            heading: Some(std::f64::consts::FRAC_PI_4),
        };
        let resolved = cfg.resolve().unwrap();
        match resolved.trajectory {
            TrajectorySpec::ConstantVelocity { velocity, .. } => {
                assert!((velocity.x - velocity.y).abs() < 1e-12);
                assert!((velocity.norm() - 0.5).abs() < 1e-12);
            }
            _ => panic!("wrong trajectory kind"),
        }
    }

    #[test]
    fn intent_block_must_fit_budget() {
        let mut cfg: ScenarioConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.planner.horizon = 100;
        let err = cfg.resolve().unwrap_err();
        assert!(err.violations.iter().any(|v| v.contains("intent block")));
    }

    #[test]
    fn oversized_team_is_rejected() {
        let mut cfg: ScenarioConfig = toml::from_str(&minimal_toml()).unwrap();
        cfg.agents.clear();
        cfg.placement = Some(PlacementSection {
            count: 17,
            center: [0.0, 0.0],
            size: [1000.0, 1000.0],
        });
        let err = cfg.resolve().unwrap_err();
        assert!(err.violations.iter().any(|v| v.contains("wire limit")));
    }
}

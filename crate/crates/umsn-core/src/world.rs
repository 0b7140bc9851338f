//! Ground-truth dynamics of the target and the vehicles, plus noisy
//! bearing sensing.
//!
//! Vehicles follow planar unicycle kinematics with zero sway; integration
//! uses the exact circular-arc solution so results do not depend on the
//! timestep (the simulator steps in TDMA-slot increments of seconds).

use core::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector4};
#[allow(unused_imports)] // f64 math methods; unused when tests link std
use num_traits::Float;
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::AgentId;

/// Yaw rates below this are integrated as straight-line motion.
const STRAIGHT_YAW_EPS: f64 = 1e-12;

/// Errors from world-model operations.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldError {
    /// A state, control, or timestep contained NaN or infinity.
    NonFinite,
    /// The integration timestep was zero or negative.
    NonPositiveDt,
    /// Bearing requested between coincident positions.
    CoincidentPositions,
    /// Negative noise bound passed to the bearing sensor.
    NegativeNoiseBound,
}

impl core::fmt::Display for WorldError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            WorldError::NonFinite => write!(f, "non-finite state or control"),
            WorldError::NonPositiveDt => write!(f, "timestep must be positive"),
            WorldError::CoincidentPositions => {
                write!(f, "bearing undefined for coincident positions")
            }
            WorldError::NegativeNoiseBound => write!(f, "noise bound must be nonnegative"),
        }
    }
}

impl core::error::Error for WorldError {}

/// Wrap an angle to the interval `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = angle % two_pi;
    if a <= -PI {
        a += two_pi;
    } else if a > PI {
        a -= two_pi;
    }
    a
}

/// Rotation matrix from a frame rotated by `theta` to the inertial frame.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = (theta.sin(), theta.cos());
    Matrix2::new(c, -s, s, c)
}

/// State of the acoustic source: inertial position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    /// Position in meters.
    pub position: Vector2<f64>,
    /// Velocity in m/s.
    pub velocity: Vector2<f64>,
}

impl TargetState {
    /// Pack into the `[x, y, vx, vy]` state vector used by the estimator.
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
        )
    }

    /// Unpack from a `[x, y, vx, vy]` state vector.
    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            position: Vector2::new(v[0], v[1]),
            velocity: Vector2::new(v[2], v[3]),
        }
    }

    /// True when every component is finite.
    pub fn is_finite(&self) -> bool {
        self.position.x.is_finite()
            && self.position.y.is_finite()
            && self.velocity.x.is_finite()
            && self.velocity.y.is_finite()
    }
}

/// Planar pose and actuation limits of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Position in meters.
    pub position: Vector2<f64>,
    /// Heading in radians, wrapped to `(-pi, pi]`.
    pub heading: f64,
    /// Maximum surge speed magnitude, m/s.
    pub max_surge: f64,
    /// Maximum yaw rate magnitude, rad/s.
    pub max_yaw_rate: f64,
}

impl AgentState {
    /// New agent state with the heading wrapped.
    pub fn new(position: Vector2<f64>, heading: f64, max_surge: f64, max_yaw_rate: f64) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
            max_surge,
            max_yaw_rate,
        }
    }

    /// True when pose and limits are all finite.
    pub fn is_finite(&self) -> bool {
        self.position.x.is_finite()
            && self.position.y.is_finite()
            && self.heading.is_finite()
            && self.max_surge.is_finite()
            && self.max_yaw_rate.is_finite()
    }
}

/// Control input: surge speed and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    /// Surge speed, m/s.
    pub surge: f64,
    /// Yaw rate, rad/s.
    pub yaw_rate: f64,
}

impl Control {
    /// Convenience constructor.
    pub fn new(surge: f64, yaw_rate: f64) -> Self {
        Self { surge, yaw_rate }
    }
}

/// Target trajectory models available to the scenario harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectorySpec {
    /// Stationary source.
    Fixed {
        /// Source position.
        position: Vector2<f64>,
    },
    /// Straight-line motion at constant velocity.
    ConstantVelocity {
        /// Initial position.
        position: Vector2<f64>,
        /// Constant velocity vector.
        velocity: Vector2<f64>,
    },
    /// Weaving advance: in a track frame rotated by `heading`, the source
    /// moves along the track axis at `track_speed` while oscillating
    /// laterally with amplitude `track_speed` and the given angular rate.
    Sinusoid {
        /// Initial position.
        position: Vector2<f64>,
        /// Along-track speed (m/s) and lateral amplitude (m).
        track_speed: f64,
        /// Angular rate of the lateral oscillation, rad/s.
        angular_rate: f64,
        /// Orientation of the track axis, radians.
        heading: f64,
    },
}

/// Evaluate the true target state at time `t` (seconds, `t >= 0`).
pub fn target_truth(traj: &TrajectorySpec, t: f64) -> TargetState {
    match *traj {
        TrajectorySpec::Fixed { position } => TargetState {
            position,
            velocity: Vector2::zeros(),
        },
        TrajectorySpec::ConstantVelocity { position, velocity } => TargetState {
            position: position + velocity * t,
            velocity,
        },
        TrajectorySpec::Sinusoid {
            position,
            track_speed,
            angular_rate,
            heading,
        } => {
            let rot = rotation(heading);
            let phase = angular_rate * t + PI;
            let local_p = Vector2::new(track_speed * phase.sin(), track_speed * t);
            let local_v = Vector2::new(track_speed * angular_rate * phase.cos(), track_speed);
            TargetState {
                position: position + rot * local_p,
                velocity: rot * local_v,
            }
        }
    }
}

/// Integrate the unicycle exactly over `dt` seconds.
///
/// Controls beyond the vehicle limits are clamped (with a warning) rather
/// than rejected; the planner only emits feasible controls, so a clamp
/// indicates a harness bug. Non-finite inputs are rejected.
pub fn step_agent(state: &AgentState, control: Control, dt: f64) -> Result<AgentState, WorldError> {
    if !state.is_finite() || !control.surge.is_finite() || !control.yaw_rate.is_finite() {
        return Err(WorldError::NonFinite);
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(WorldError::NonPositiveDt);
    }

    let mut surge = control.surge;
    let mut yaw = control.yaw_rate;
    if surge.abs() > state.max_surge {
        log::warn!("surge {} exceeds limit {}, clamping", surge, state.max_surge);
        surge = surge.clamp(-state.max_surge, state.max_surge);
    }
    if yaw.abs() > state.max_yaw_rate {
        log::warn!(
            "yaw rate {} exceeds limit {}, clamping",
            yaw,
            state.max_yaw_rate
        );
        yaw = yaw.clamp(-state.max_yaw_rate, state.max_yaw_rate);
    }

    let theta = state.heading;
    let displacement = if yaw.abs() < STRAIGHT_YAW_EPS {
        Vector2::new(surge * dt * theta.cos(), surge * dt * theta.sin())
    } else {
        // Circular arc of radius surge/yaw.
        let radius = surge / yaw;
        let theta1 = theta + yaw * dt;
        Vector2::new(
            radius * (theta1.sin() - theta.sin()),
            -radius * (theta1.cos() - theta.cos()),
        )
    };

    Ok(AgentState {
        position: state.position + displacement,
        heading: wrap_angle(theta + yaw * dt),
        max_surge: state.max_surge,
        max_yaw_rate: state.max_yaw_rate,
    })
}

/// True bearing from `sensor` to `target`, in `(-pi, pi]`.
pub fn true_bearing(target: Vector2<f64>, sensor: Vector2<f64>) -> Result<f64, WorldError> {
    let d = target - sensor;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(WorldError::CoincidentPositions);
    }
    Ok(wrap_angle(d.y.atan2(d.x)))
}

/// Bearing measurement corrupted by uniform noise on `[-noise_bound, +noise_bound]`.
pub fn measure_bearing<R: Rng + ?Sized>(
    target: Vector2<f64>,
    sensor: Vector2<f64>,
    noise_bound: f64,
    rng: &mut R,
) -> Result<f64, WorldError> {
    if noise_bound < 0.0 || !noise_bound.is_finite() {
        return Err(WorldError::NegativeNoiseBound);
    }
    let beta = true_bearing(target, sensor)?;
    let noise = Uniform::new_inclusive(-noise_bound, noise_bound).sample(rng);
    Ok(wrap_angle(beta + noise))
}

/// One timestamped bearing observation, as taken or as received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Observation time, seconds.
    pub time: f64,
    /// Measured bearing, radians in `(-pi, pi]`.
    pub bearing: f64,
    /// Observer position at the observation time, meters.
    pub observer: Vector2<f64>,
    /// Agent that took the measurement.
    pub source: AgentId,
}

//! Per-agent target tracker: pseudolinear transform of bearings and
//! moving-window batch weighted least squares.
//!
//! Following the share-and-estimate paradigm, each agent stacks its own and
//! received bearing measurements into a regressor, solves for the target
//! state at the oldest measurement time, and propagates the solution (and
//! its covariance) forward under the constant-velocity model. The batch is
//! recomputed from scratch each cycle; at these window sizes that is
//! equivalent to the recursive update and considerably simpler.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix4, Vector2, Vector4};
#[allow(unused_imports)] // f64 math methods; unused when tests link std
use num_traits::Float;

use crate::world::Measurement;

/// Minimum measurement count for a solvable four-state batch.
pub const MIN_MEASUREMENTS: usize = 4;

/// Regressors with a smaller least singular value are rejected as
/// ill-conditioned; the caller keeps its previous estimate.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-6;

/// Errors from the estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    /// Fewer than [`MIN_MEASUREMENTS`] measurements in the window.
    InsufficientData {
        /// Measurements currently buffered.
        have: usize,
    },
    /// Regressor is numerically singular; the solve was refused.
    IllConditioned {
        /// Least singular value found.
        sigma_min: f64,
    },
    /// A duplicate (same source, same timestamp) measurement was pushed.
    DuplicateMeasurement,
    /// Measurement fields must be finite and the timestamp nonnegative.
    InvalidMeasurement,
    /// Requested a propagation backwards in time.
    TimeBackwards,
    /// Operation requires a nonempty buffer.
    EmptyBuffer,
}

impl core::fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EstimatorError::InsufficientData { have } => {
                write!(f, "need {MIN_MEASUREMENTS} measurements, have {have}")
            }
            EstimatorError::IllConditioned { sigma_min } => {
                write!(f, "regressor ill-conditioned (sigma_min = {sigma_min:e})")
            }
            EstimatorError::DuplicateMeasurement => write!(f, "duplicate measurement"),
            EstimatorError::InvalidMeasurement => write!(f, "invalid measurement"),
            EstimatorError::TimeBackwards => write!(f, "cannot propagate backwards in time"),
            EstimatorError::EmptyBuffer => write!(f, "measurement buffer is empty"),
        }
    }
}

impl core::error::Error for EstimatorError {}

/// Moving time window of bearing measurements, ordered by timestamp.
#[derive(Debug, Clone)]
pub struct MeasurementBuffer {
    window: f64,
    capacity: usize,
    entries: Vec<Measurement>,
}

impl MeasurementBuffer {
    /// Buffer keeping at most `capacity` measurements within the trailing
    /// `window` seconds.
    pub fn new(window: f64, capacity: usize) -> Self {
        Self {
            window,
            capacity,
            entries: Vec::new(),
        }
    }

    /// Window length, seconds.
    pub fn window(&self) -> f64 {
        self.window
    }

    /// Buffered measurements, oldest first.
    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    /// Measurement count.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when no measurements are buffered.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert a measurement, keeping the buffer sorted by time.
    ///
    /// Duplicates (same source and timestamp) are rejected. When the buffer
    /// is full the oldest entry is evicted.
    pub fn push(&mut self, m: Measurement) -> Result<(), EstimatorError> {
        if !(m.time >= 0.0)
            || !m.bearing.is_finite()
            || !m.observer.x.is_finite()
            || !m.observer.y.is_finite()
        {
            return Err(EstimatorError::InvalidMeasurement);
        }
        if self
            .entries
            .iter()
            .any(|e| e.source == m.source && e.time == m.time)
        {
            return Err(EstimatorError::DuplicateMeasurement);
        }
        let idx = self.entries.partition_point(|e| e.time <= m.time);
        self.entries.insert(idx, m);
        if self.entries.len() > self.capacity {
            self.entries.remove(0);
        }
        Ok(())
    }

    /// Drop measurements older than `t_now - window`.
    pub fn prune(&mut self, t_now: f64) {
        let cutoff = t_now - self.window;
        self.entries.retain(|e| e.time >= cutoff);
    }
}

/// Batch least-squares estimate of the target state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    /// State `[x, y, vx, vy]` valid at `time`.
    pub state: Vector4<f64>,
    /// Covariance of the state, symmetric PSD.
    pub covariance: Matrix4<f64>,
    /// Validity timestamp, seconds.
    pub time: f64,
    /// Measurements that entered the solve.
    pub measurements_used: usize,
}

impl TargetEstimate {
    /// Position block of the state.
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.state[0], self.state[1])
    }

    /// Velocity block of the state.
    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.state[2], self.state[3])
    }
}

/// Constant-velocity state transition over `dt` seconds.
pub fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Pseudolinear form of one bearing: scalar output
/// `z = sin(b) x_obs - cos(b) y_obs` and the position row `(sin b, -cos b)`
/// of the output matrix. For the true bearing, `c . p - z = 0` at the true
/// target position.
pub fn pseudo_measurement(m: &Measurement) -> (f64, Vector2<f64>) {
    let (s, c) = (m.bearing.sin(), m.bearing.cos());
    let z = s * m.observer.x - c * m.observer.y;
    (z, Vector2::new(s, -c))
}

/// Stack the buffer into the batch regressor and output vector.
///
/// Row `m` is `[sin b, -cos b, dt sin b, -dt cos b]` with `dt` the offset
/// from the oldest measurement time `t0`, which is returned alongside.
pub fn build_regressor(
    buf: &MeasurementBuffer,
) -> Result<(DMatrix<f64>, DVector<f64>, f64), EstimatorError> {
    if buf.is_empty() {
        return Err(EstimatorError::EmptyBuffer);
    }
    let t0 = buf.entries()[0].time;
    let m = buf.len();
    let mut phi = DMatrix::zeros(m, 4);
    let mut z = DVector::zeros(m);
    for (row, meas) in buf.entries().iter().enumerate() {
        let (zi, c) = pseudo_measurement(meas);
        let dt = meas.time - t0;
        phi[(row, 0)] = c.x;
        phi[(row, 1)] = c.y;
        phi[(row, 2)] = dt * c.x;
        phi[(row, 3)] = dt * c.y;
        z[row] = zi;
    }
    Ok((phi, z, t0))
}

/// Weighted least-squares solve over the buffered window, propagated to
/// `t_now`.
///
/// With measurement covariance `R = noise_bound^2 I` the weighting cancels
/// from the state solution, leaving the normal equations
/// `(Phi^T Phi) x = Phi^T z`; the noise variance scales the covariance
/// `P = noise_bound^2 (Phi^T Phi)^-1` which is then mapped through the
/// constant-velocity transition.
pub fn estimate(
    buf: &MeasurementBuffer,
    t_now: f64,
    noise_bound: f64,
) -> Result<TargetEstimate, EstimatorError> {
    if buf.len() < MIN_MEASUREMENTS {
        return Err(EstimatorError::InsufficientData { have: buf.len() });
    }
    let (phi, z, t0) = build_regressor(buf)?;
    if t_now < t0 {
        return Err(EstimatorError::TimeBackwards);
    }

    let singular_values = phi.clone().svd(false, false).singular_values;
    let sigma_min = singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if sigma_min < SINGULAR_VALUE_FLOOR {
        return Err(EstimatorError::IllConditioned { sigma_min });
    }

    let gram = Matrix4::from_iterator((phi.transpose() * &phi).iter().copied());
    let rhs = phi.transpose() * &z;
    let chol = gram
        .cholesky()
        .ok_or(EstimatorError::IllConditioned { sigma_min })?;
    let x0 = chol.solve(&Vector4::from_iterator(rhs.iter().copied()));
    let p0 = chol.inverse() * (noise_bound * noise_bound);

    let f = transition(t_now - t0);
    Ok(TargetEstimate {
        state: f * x0,
        covariance: f * p0 * f.transpose(),
        time: t_now,
        measurements_used: buf.len(),
    })
}

/// Advance an estimate to time `t >= time` under the constant-velocity
/// model; the covariance is mapped by the same transition congruence.
pub fn propagate(est: &TargetEstimate, t: f64) -> Result<TargetEstimate, EstimatorError> {
    if t < est.time {
        return Err(EstimatorError::TimeBackwards);
    }
    let f = transition(t - est.time);
    Ok(TargetEstimate {
        state: f * est.state,
        covariance: f * est.covariance * f.transpose(),
        time: t,
        measurements_used: est.measurements_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{target_truth, true_bearing, wrap_angle, TrajectorySpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::vec::Vec;

    fn meas(time: f64, bearing: f64, x: f64, y: f64, source: u8) -> Measurement {
        Measurement {
            time,
            bearing,
            observer: Vector2::new(x, y),
            source,
        }
    }

    /// Noise-free bearings of a constant-velocity target seen from the
    /// given (time, observer) samples.
    fn synthetic_buffer(
        traj: &TrajectorySpec,
        samples: &[(f64, Vector2<f64>)],
    ) -> MeasurementBuffer {
        let mut buf = MeasurementBuffer::new(1e9, 1000);
        for (k, &(t, obs)) in samples.iter().enumerate() {
            let target = target_truth(traj, t).position;
            let bearing = true_bearing(target, obs).unwrap();
            buf.push(meas(t, bearing, obs.x, obs.y, (k % 3) as u8))
                .unwrap();
        }
        buf
    }

    #[test]
    fn pseudo_measurement_axis_cases() {
        let (z, c) = pseudo_measurement(&meas(0.0, 0.0, 3.0, 7.0, 0));
        assert_relative_eq!(z, -7.0, epsilon = 1e-15);
        assert_relative_eq!(c.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(c.y, -1.0, epsilon = 1e-15);

        let (z, c) = pseudo_measurement(&meas(0.0, core::f64::consts::FRAC_PI_2, 3.0, 7.0, 0));
        assert_relative_eq!(z, 3.0, epsilon = 1e-15);
        assert_relative_eq!(c.x, 1.0, epsilon = 1e-15);
        assert!(c.y.abs() < 1e-15);
    }

    #[test]
    fn pseudolinear_residual_vanishes_for_true_bearing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let target = Vector2::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0));
            let sensor = target
                + Vector2::new(rng.gen_range(1.0..300.0), rng.gen_range(1.0..300.0));
            let b = true_bearing(target, sensor).unwrap();
            let (z, c) = pseudo_measurement(&meas(0.0, b, sensor.x, sensor.y, 0));
            assert!((c.dot(&target) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn regressor_single_measurement_row() {
        let mut buf = MeasurementBuffer::new(100.0, 10);
        buf.push(meas(5.0, 0.3, 1.0, 2.0, 0)).unwrap();
        let (phi, _, t0) = build_regressor(&buf).unwrap();
        assert_eq!(t0, 5.0);
        assert_relative_eq!(phi[(0, 0)], 0.3f64.sin(), epsilon = 1e-15);
        assert_relative_eq!(phi[(0, 1)], -(0.3f64.cos()), epsilon = 1e-15);
        assert_eq!(phi[(0, 2)], 0.0);
        assert_eq!(phi[(0, 3)], 0.0);
    }

    #[test]
    fn regressor_annihilates_true_state() {
        let traj = TrajectorySpec::ConstantVelocity {
            position: Vector2::new(40.0, -10.0),
            velocity: Vector2::new(0.4, -0.7),
        };
        let samples: Vec<(f64, Vector2<f64>)> = (0..8)
            .map(|k| {
                let t = 3.0 * k as f64;
                (t, Vector2::new(-60.0 + 5.0 * k as f64, 25.0 - 2.0 * k as f64))
            })
            .collect();
        let buf = synthetic_buffer(&traj, &samples);
        let (phi, z, t0) = build_regressor(&buf).unwrap();
        let xi0 = target_truth(&traj, t0).as_vector();
        let residual = (&phi * xi0 - z).amax();
        assert!(residual < 1e-9, "residual {residual}");
    }

    #[test]
    fn identical_simultaneous_bearings_are_rank_one() {
        let mut buf = MeasurementBuffer::new(100.0, 10);
        for k in 0..4 {
            buf.push(meas(1.0, 0.8, 10.0, -4.0, k)).unwrap();
        }
        let (phi, _, _) = build_regressor(&buf).unwrap();
        let svals = phi.svd(false, false).singular_values;
        let mut sorted: Vec<f64> = svals.iter().copied().collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(sorted[0] > 0.1);
        assert!(sorted[1] < 1e-12);
    }

    #[test]
    fn noise_free_recovery_is_exact() {
        let traj = TrajectorySpec::ConstantVelocity {
            position: Vector2::new(120.0, -40.0),
            velocity: Vector2::new(-0.3, 0.5),
        };
        // Two moving sensors, three sampling times each.
        let samples: Vec<(f64, Vector2<f64>)> = (0..3)
            .flat_map(|k| {
                let t = 10.0 * k as f64;
                [
                    (t, Vector2::new(-20.0 + 2.0 * t, 30.0)),
                    (t + 1.0, Vector2::new(80.0, -90.0 + 1.5 * t)),
                ]
            })
            .collect();
        let buf = synthetic_buffer(&traj, &samples);
        let t_now = 25.0;
        let est = estimate(&buf, t_now, 0.0).unwrap();
        let truth = target_truth(&traj, t_now).as_vector();
        assert!((est.state - truth).amax() < 1e-6);
        assert_eq!(est.measurements_used, 6);
    }

    #[test]
    fn stationary_target_velocity_is_zero() {
        let traj = TrajectorySpec::Fixed {
            position: Vector2::new(-30.0, -100.0),
        };
        let samples = [
            (0.0, Vector2::new(0.0, 0.0)),
            (1.0, Vector2::new(50.0, 10.0)),
            (2.0, Vector2::new(-80.0, 40.0)),
            (3.0, Vector2::new(20.0, -60.0)),
        ];
        let buf = synthetic_buffer(&traj, &samples);
        let est = estimate(&buf, 3.0, 0.0).unwrap();
        assert!(est.velocity().norm() < 1e-9);
        assert!((est.position() - Vector2::new(-30.0, -100.0)).norm() < 1e-9);
    }

    #[test]
    fn wls_matches_pseudoinverse_route() {
        // Independent oracle: unweighted SVD pseudoinverse, per the
        // scale-invariance of WLS under scalar R.
        let traj = TrajectorySpec::ConstantVelocity {
            position: Vector2::new(15.0, 70.0),
            velocity: Vector2::new(0.2, -0.1),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<(f64, Vector2<f64>)> = (0..12)
            .map(|k| {
                (
                    2.0 * k as f64,
                    Vector2::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0)),
                )
            })
            .collect();
        let buf = synthetic_buffer(&traj, &samples);
        let (phi, z, t0) = build_regressor(&buf).unwrap();
        let pinv_solution = phi.pseudo_inverse(1e-12).unwrap() * z;

        let est = estimate(&buf, t0, 0.035).unwrap();
        assert!((est.state - Vector4::from_iterator(pinv_solution.iter().copied())).amax() < 1e-9);
    }

    #[test]
    fn insufficient_and_ill_conditioned_are_typed_errors() {
        let mut buf = MeasurementBuffer::new(100.0, 10);
        for k in 0..3 {
            buf.push(meas(k as f64, 0.1 * k as f64, k as f64, 0.0, 0))
                .unwrap();
        }
        assert_eq!(
            estimate(&buf, 3.0, 0.1),
            Err(EstimatorError::InsufficientData { have: 3 })
        );

        // Four identical rows: singular regressor.
        let mut degenerate = MeasurementBuffer::new(100.0, 10);
        for k in 0..4 {
            degenerate.push(meas(1.0, 0.8, 10.0, -4.0, k)).unwrap();
        }
        assert!(matches!(
            estimate(&degenerate, 2.0, 0.1),
            Err(EstimatorError::IllConditioned { .. })
        ));
    }

    #[test]
    fn buffer_rejects_duplicates_and_prunes() {
        let mut buf = MeasurementBuffer::new(10.0, 3);
        buf.push(meas(1.0, 0.0, 0.0, 0.0, 0)).unwrap();
        assert_eq!(
            buf.push(meas(1.0, 0.5, 3.0, 0.0, 0)),
            Err(EstimatorError::DuplicateMeasurement)
        );
        // Same time, different source is fine.
        buf.push(meas(1.0, 0.5, 3.0, 0.0, 1)).unwrap();
        buf.push(meas(5.0, 0.1, 1.0, 0.0, 0)).unwrap();
        buf.push(meas(4.0, 0.1, 1.0, 0.0, 1)).unwrap(); // evicts oldest (capacity 3)
        assert_eq!(buf.len(), 3);
        assert!(buf.entries().windows(2).all(|w| w[0].time <= w[1].time));

        buf.prune(15.0); // cutoff 5.0
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.entries()[0].time, 5.0);

        assert_eq!(
            buf.push(meas(-1.0, 0.0, 0.0, 0.0, 0)),
            Err(EstimatorError::InvalidMeasurement)
        );
    }

    #[test]
    fn propagate_identity_and_shift() {
        let est = TargetEstimate {
            state: Vector4::new(0.0, 0.0, 1.0, 0.0),
            covariance: Matrix4::identity(),
            time: 2.0,
            measurements_used: 5,
        };
        let same = propagate(&est, 2.0).unwrap();
        assert_eq!(same.state, est.state);

        let later = propagate(&est, 7.0).unwrap();
        assert_eq!(later.state, Vector4::new(5.0, 0.0, 1.0, 0.0));
        assert_eq!(propagate(&est, 1.0), Err(EstimatorError::TimeBackwards));
    }

    #[test]
    fn propagation_preserves_symmetry_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let m = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let p = m * m.transpose();
            let est = TargetEstimate {
                state: Vector4::zeros(),
                covariance: p,
                time: 0.0,
                measurements_used: 4,
            };
            let out = propagate(&est, rng.gen_range(0.0..20.0)).unwrap();
            let pc = out.covariance;
            assert!((pc - pc.transpose()).amax() < 1e-9);
            let eig = pc.symmetric_eigen().eigenvalues;
            assert!(eig.iter().all(|&l| l > -1e-9));
        }
    }

    #[test]
    fn new_bearing_never_hurts_position_conditioning() {
        // Oracle: least eigenvalue of the 2x2 Gram of the position block.
        let sigma_min_sq = |bearings: &[f64]| -> f64 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for &beta in bearings {
                let (s, co) = (beta.sin(), beta.cos());
                a += s * s;
                b += -s * co;
                c += co * co;
            }
            let mean = 0.5 * (a + c);
            let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            mean - r
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = rng.gen_range(1..6);
            let mut bearings: Vec<f64> =
                (0..n).map(|_| rng.gen_range(-3.14..3.14)).collect();
            let before = sigma_min_sq(&bearings);
            bearings.push(rng.gen_range(-3.14..3.14));
            let after = sigma_min_sq(&bearings);
            assert!(after >= before - 1e-12);
        }
    }

    #[test]
    fn appending_a_measurement_shrinks_covariance() {
        let traj = TrajectorySpec::ConstantVelocity {
            position: Vector2::new(50.0, 20.0),
            velocity: Vector2::new(0.1, 0.3),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let samples: Vec<(f64, Vector2<f64>)> = (0..6)
                .map(|k| {
                    (
                        4.0 * k as f64,
                        Vector2::new(rng.gen_range(-150.0..150.0), rng.gen_range(-150.0..150.0)),
                    )
                })
                .collect();
            let mut buf = synthetic_buffer(&traj, &samples);
            let t_last = 20.0;
            let before = estimate(&buf, t_last, 0.05).unwrap();
            // Append another observation at an existing time from a new spot.
            let extra_obs = Vector2::new(rng.gen_range(-150.0..150.0), 200.0);
            let target = target_truth(&traj, t_last).position;
            let b = true_bearing(target, extra_obs).unwrap();
            buf.push(meas(t_last, wrap_angle(b), extra_obs.x, extra_obs.y, 9))
                .unwrap();
            let after = estimate(&buf, t_last, 0.05).unwrap();
            assert!(after.covariance.trace() <= before.covariance.trace() + 1e-12);
        }
    }

    #[test]
    fn monte_carlo_rmse_improves_with_more_measurements() {
        let rmse = |m_count: usize, trials: usize| -> f64 {
            let traj = TrajectorySpec::ConstantVelocity {
                position: Vector2::new(60.0, 80.0),
                velocity: Vector2::new(0.3, -0.2),
            };
            let bound = 3.5f64.to_radians();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut total = 0.0;
            for _ in 0..trials {
                let mut buf = MeasurementBuffer::new(1e9, 1000);
                for k in 0..m_count {
                    let t = k as f64;
                    let obs = if k % 2 == 0 {
                        Vector2::new(-40.0 + 3.0 * t, -20.0)
                    } else {
                        Vector2::new(150.0, 40.0 - 2.0 * t)
                    };
                    let target = target_truth(&traj, t).position;
                    let b = crate::world::measure_bearing(target, obs, bound, &mut rng).unwrap();
                    buf.push(meas(t, b, obs.x, obs.y, (k % 2) as u8)).unwrap();
                }
                let t_now = (m_count - 1) as f64;
                let est = estimate(&buf, t_now, bound).unwrap();
                let truth = target_truth(&traj, t_now).position;
                total += (est.position() - truth).norm_squared();
            }
            (total / trials as f64).sqrt()
        };
        let coarse = rmse(4, 50);
        let fine = rmse(20, 50);
        assert!(fine < coarse, "rmse {fine} !< {coarse}");
    }
}

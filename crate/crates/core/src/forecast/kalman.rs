//! Constant-acceleration Kalman filter on longitudinal arc length.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::physics::CA_SPEED_CLAMP;

/// Noise settings, all diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    /// Process noise per step for (arc, speed, accel).
    pub q: [f64; 3],
    /// Measurement noise for (arc, speed, accel).
    pub r: [f64; 3],
    /// Initial covariance.
    pub p0: [f64; 3],
    /// Step, seconds.
    pub ts: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self { q: [1e-3, 1e-2, 1e-1], r: [10.0, 1.0, 0.5], p0: [10.0, 1.0, 0.5], ts: 0.1 }
    }
}

/// Filter state `x_hat = (arc, speed, accel)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x_hat: Vector3<f64>,
    pub p: Matrix3<f64>,
    pub q: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub ts: f64,
}

impl KalmanState {
    pub fn new(x0: Vector3<f64>, cfg: &KalmanConfig) -> Self {
        Self {
            x_hat: x0,
            p: Matrix3::from_diagonal(&Vector3::from(cfg.p0)),
            q: Matrix3::from_diagonal(&Vector3::from(cfg.q)),
            r: Matrix3::from_diagonal(&Vector3::from(cfg.r)),
            ts: cfg.ts,
        }
    }

    pub fn transition(&self) -> Matrix3<f64> {
        let t = self.ts;
        Matrix3::new(1.0, t, 0.5 * t * t, 0.0, 1.0, t, 0.0, 0.0, 1.0)
    }

    /// Time update only.
    pub fn predict(&self) -> Self {
        let f = self.transition();
        let (s, v, a) = (self.x_hat[0], self.x_hat[1].max(CA_SPEED_CLAMP), self.x_hat[2]);
        let dt = self.ts;
        let v1 = v + a * dt;
        let (s1, v1) = if v1 >= CA_SPEED_CLAMP {
            (s + (v * dt + 0.5 * a * dt * dt), v1)
        } else if a < 0.0 {
            (s + v * v / (-2.0 * a), CA_SPEED_CLAMP)
        } else {
            (s, CA_SPEED_CLAMP)
        };
        Self { x_hat: Vector3::new(s1, v1, a), p: f * self.p * f.transpose() + self.q, ..*self }
    }
}

/// One filter step: time update, then a measurement update with `H = I`
/// when a measurement is present. The flag reports that the posterior
/// covariance had to be repaired.
pub fn kalman_step(state: &KalmanState, measurement: Option<Vector3<f64>>) -> (KalmanState, bool) {
    let mut next = state.predict();
    let Some(z) = measurement else {
        return (next, false);
    };
    let s = next.p + next.r;
    let Some(s_inv) = s.try_inverse() else {
        return (next, true);
    };
    let gain = next.p * s_inv;
    next.x_hat += gain * (z - next.x_hat);
    next.x_hat[1] = next.x_hat[1].max(CA_SPEED_CLAMP);
    let i_k = Matrix3::identity() - gain;
    // Joseph form keeps P symmetric positive semi-definite.
    let p = i_k * next.p * i_k.transpose() + gain * next.r * gain.transpose();
    let (p, repaired) = repair_psd(p);
    next.p = p;
    (next, repaired)
}

fn repair_psd(p: Matrix3<f64>) -> (Matrix3<f64>, bool) {
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return (sym, false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let fixed = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    (fixed, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::constant_accel;
    use crate::trajectory::VehicleState;

    #[test]
    fn zero_noise_measurement_wins() {
        let cfg = KalmanConfig { r: [1e-14; 3], ..Default::default() };
        let st = KalmanState::new(Vector3::new(0.0, 10.0, 0.0), &cfg);
        let z = Vector3::new(3.0, 12.0, -1.0);
        let (next, _) = kalman_step(&st, Some(z));
        assert!((next.x_hat - z).norm() < 1e-9);
    }

    #[test]
    fn time_update_matches_ca() {
        let cfg = KalmanConfig::default();
        let mut st = KalmanState::new(Vector3::new(0.0, 4.0, -2.5), &cfg);
        let last = VehicleState { t: 0.0, x: 0.0, y: 0.0, speed: 4.0, heading: 0.0, accel: -2.5 };
        for p in constant_accel(&last, 30) {
            st = kalman_step(&st, None).0;
            assert_eq!(st.x_hat[0], p.x);
            assert_eq!(st.x_hat[1], p.speed_mean);
        }
    }

    #[test]
    fn covariance_stays_symmetric() {
        let cfg = KalmanConfig::default();
        let mut st = KalmanState::new(Vector3::zeros(), &cfg);
        for k in 0..50 {
            st = kalman_step(&st, Some(Vector3::new(k as f64, 1.0, 0.0))).0;
            assert!((st.p - st.p.transpose()).norm() < 1e-12);
        }
    }
}

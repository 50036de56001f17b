use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::TrackError;

/// Constant-velocity state `(x, y, vx, vy)` in pixels and pixels per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

impl KalmanState {
    pub fn new(x: Vector4<f64>, p: Matrix4<f64>) -> Self {
        Self { x, p }
    }

    /// Zero-velocity state at `pos` with diagonal covariance.
    pub fn at_rest(pos: [f64; 2], pos_var: f64, vel_var: f64) -> Self {
        Self {
            x: Vector4::new(pos[0], pos[1], 0.0, 0.0),
            p: Matrix4::from_diagonal(&Vector4::new(pos_var, pos_var, vel_var, vel_var)),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x[0], self.x[1]]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.x[2], self.x[3]]
    }
}

/// Transition, process noise, measurement and measurement noise matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub f: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub h: Matrix2x4<f64>,
    pub r: Matrix2<f64>,
    pub dt: f64,
}

/// Tunable noise parameters; see [`NoiseModel::constant_velocity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub dt: f64,
    /// White-acceleration intensity in px²/frame³.
    pub q_intensity: f64,
    /// Measurement standard deviation in pixels.
    pub r_sigma: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            dt: 1.0,
            q_intensity: 0.5,
            r_sigma: 2.0,
        }
    }
}

pub fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Continuous white-acceleration process noise integrated over `dt`.
pub fn white_acceleration_q(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0 * q, dt.powi(2) / 2.0 * q, dt * q);
    Matrix4::new(
        a, 0.0, b, 0.0, //
        0.0, a, 0.0, b, //
        b, 0.0, c, 0.0, //
        0.0, b, 0.0, c,
    )
}

pub fn position_measurement() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

impl NoiseModel {
    pub fn constant_velocity(params: NoiseParams) -> Result<Self, TrackError> {
        let NoiseParams {
            dt,
            q_intensity,
            r_sigma,
        } = params;
        if !(dt >= 0.0 && q_intensity >= 0.0 && r_sigma > 0.0) {
            return Err(TrackError::InvalidConfig(format!(
                "need dt >= 0, q >= 0, r_sigma > 0 (got {dt}, {q_intensity}, {r_sigma})"
            )));
        }
        Ok(Self {
            f: transition(dt),
            q: white_acceleration_q(dt, q_intensity),
            h: position_measurement(),
            r: Matrix2::identity() * (r_sigma * r_sigma),
            dt,
        })
    }
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Prior `x = F x`, `P = F P F^T + Q`.
pub fn kf_predict(s: &KalmanState, m: &NoiseModel) -> KalmanState {
    KalmanState {
        x: m.f * s.x,
        p: symmetrize(m.f * s.p * m.f.transpose() + m.q),
    }
}

/// Posterior after measuring position `z`:
/// `K = P H^T (H P H^T + R)^-1`, `x += K (z - H x)`, `P = (I - K H) P`.
pub fn kf_update(s: &KalmanState, z: [f64; 2], m: &NoiseModel) -> Result<KalmanState, TrackError> {
    if !(z[0].is_finite() && z[1].is_finite()) {
        return Err(TrackError::NonFiniteMeasurement);
    }
    let innovation_cov = m.h * s.p * m.h.transpose() + m.r;
    let scale = innovation_cov.abs().max();
    if !(innovation_cov.determinant().abs() > 1e-300 && scale > 0.0) {
        return Err(TrackError::SingularInnovation);
    }
    let s_inv = innovation_cov
        .try_inverse()
        .ok_or(TrackError::SingularInnovation)?;
    let k = s.p * m.h.transpose() * s_inv;
    let residual = Vector2::new(z[0], z[1]) - m.h * s.x;
    Ok(KalmanState {
        x: s.x + k * residual,
        p: symmetrize((Matrix4::identity() - k * m.h) * s.p),
    })
}

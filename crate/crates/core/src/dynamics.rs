//! Vehicle motion model.
//!
//! A kinematic bicycle with first-order lag on both actuators. Commands
//! arrive normalized in `[-1, 1]`: steering maps linearly to the physical
//! steering range and the speed command to `[v_min, v_max]`. The lag pulls
//! the actual actuator values toward the commanded ones with time constants
//! `steering_tau_s` and `speed_tau_s`; a non-positive time constant means
//! the actuator follows instantly.

use crate::config::{SpeedConfig, VehicleConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarState {
    pub position: [f64; 2],
    pub heading: f64,
    /// Actual forward speed in m/s, after actuator lag.
    pub speed: f64,
    /// Actual steering angle in rad, after actuator lag.
    pub steering: f64,
}

impl CarState {
    pub fn at_rest(position: [f64; 2], heading: f64, speed: f64) -> CarState {
        CarState { position, heading, speed, steering: 0.0 }
    }
}

/// Fraction of the remaining gap an actuator closes in one step.
fn lag_coefficient(dt: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        1.0
    } else {
        1.0 - (-dt / tau).exp()
    }
}

/// Physical speed for a normalized command in `[-1, 1]`.
pub fn command_speed(cmd: f64, speed: &SpeedConfig) -> f64 {
    speed.v_min + (cmd.clamp(-1.0, 1.0) + 1.0) / 2.0 * (speed.v_max - speed.v_min)
}

/// Physical steering angle for a normalized command in `[-1, 1]`.
pub fn command_steering(cmd: f64, vehicle: &VehicleConfig) -> f64 {
    cmd.clamp(-1.0, 1.0) * vehicle.steering_limit_rad()
}

/// Advance the car by one step under the given normalized action.
///
/// Actuators settle first, then the pose integrates with the new values,
/// turning about the rear axle.
pub fn step(
    state: &CarState,
    action: [f64; 2],
    vehicle: &VehicleConfig,
    speed: &SpeedConfig,
    dt: f64,
) -> CarState {
    let steer_target = command_steering(action[0], vehicle);
    let speed_target = command_speed(action[1], speed);

    let steering = state.steering
        + lag_coefficient(dt, vehicle.steering_tau_s) * (steer_target - state.steering);
    let v = state.speed + lag_coefficient(dt, vehicle.speed_tau_s) * (speed_target - state.speed);

    let heading = state.heading + v / vehicle.wheelbase_m * steering.tan() * dt;
    let position = [
        state.position[0] + v * state.heading.cos() * dt,
        state.position[1] + v * state.heading.sin() * dt,
    ];
    CarState { position, heading, speed: v, steering }
}

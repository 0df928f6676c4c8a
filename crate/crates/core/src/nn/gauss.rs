//! Tanh-squashed Gaussian action distribution.
//!
//! Actions live in `(-1, 1)^2` as `a = tanh(u)` with `u ~ N(mean, sigma)`.
//! Sampling uses the reparameterized form `u = mean + sigma * eps`, and the
//! log density carries the tanh change-of-variables correction in a form
//! that stays finite for saturated pre-activations. The closed-form
//! derivatives below are the reparameterized gradients with `eps` held
//! fixed.

use rand::Rng;
use rand_distr::StandardNormal;

pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_TAU: f64 = 0.918938533204672742; // 0.5 * ln(2 pi)

#[derive(Clone, Copy, Debug)]
pub struct GaussSample {
    pub action: [f64; ACTION_DIM],
    pub u: [f64; ACTION_DIM],
    pub eps: [f64; ACTION_DIM],
    pub log_prob: f64,
}

pub fn squash(u: f64) -> f64 {
    u.tanh()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (1.0 + (-x.abs()).exp()).ln()
}

/// `ln(1 - tanh(u)^2)`, stable for large `|u|`.
pub fn log1m_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Log density of the squashed sample identified by its pre-squash value.
pub fn log_prob_from_u(mean: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM], u: &[f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for d in 0..ACTION_DIM {
        let sigma = log_std[d].exp();
        let eps = (u[d] - mean[d]) / sigma;
        lp += -HALF_LN_TAU - log_std[d] - 0.5 * eps * eps - log1m_tanh_sq(u[d]);
    }
    lp
}

pub fn sample(mean: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM], rng: &mut impl Rng) -> GaussSample {
    let mut action = [0.0; ACTION_DIM];
    let mut u = [0.0; ACTION_DIM];
    let mut eps = [0.0; ACTION_DIM];
    for d in 0..ACTION_DIM {
        let e: f64 = rng.sample(StandardNormal);
        eps[d] = e;
        u[d] = mean[d] + log_std[d].exp() * e;
        action[d] = squash(u[d]);
    }
    GaussSample { action, u, eps, log_prob: log_prob_from_u(mean, log_std, &u) }
}

/// `d log_prob / d mean_d` at fixed `eps`.
pub fn dlogp_dmean(u_d: f64) -> f64 {
    2.0 * u_d.tanh()
}

/// `d log_prob / d log_std_d` at fixed `eps`.
pub fn dlogp_dlogstd(u_d: f64, sigma_d: f64, eps_d: f64) -> f64 {
    -1.0 + 2.0 * u_d.tanh() * sigma_d * eps_d
}

/// `d action_d / d mean_d` at fixed `eps`.
pub fn daction_dmean(action_d: f64) -> f64 {
    1.0 - action_d * action_d
}

/// `d action_d / d log_std_d` at fixed `eps`.
pub fn daction_dlogstd(action_d: f64, sigma_d: f64, eps_d: f64) -> f64 {
    (1.0 - action_d * action_d) * sigma_d * eps_d
}

//! Small neural network toolkit.
//!
//! Exactly what the agent needs and nothing more: strided valid
//! convolutions, dense layers, relu, a squashed-Gaussian policy head, Adam,
//! and parameter serialization. All math runs in `f64` with hand-written
//! backward passes; layers accumulate parameter gradients internally and
//! add into caller-provided input gradients, so multi-branch objectives can
//! merge naturally. Everything is sequential and allocation order is
//! fixed, which makes whole-training determinism a property rather than an
//! aspiration.

mod adam;
mod critic;
mod dense;
mod conv;
mod gauss;
mod io;
mod policy;
mod trunk;

pub use adam::{Adam, ScalarAdam};
pub use conv::Conv;
pub use critic::{CriticCache, CriticDenseCache, CriticNet};
pub use dense::Dense;
pub use gauss::{
    daction_dlogstd, daction_dmean, dlogp_dlogstd, dlogp_dmean, log1m_tanh_sq, log_prob_from_u,
    sample, squash, GaussSample, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN,
};
pub use io::{load_params, save_params};
pub use policy::{PolicyCache, PolicyNet, PolicyOut};
pub use trunk::{Trunk, TrunkCache};

/// Networks expose their parameters as named flat slices in a fixed order.
pub trait ParamNet {
    /// Tensor names and shapes, in storage order.
    fn param_specs(&self) -> Vec<(String, Vec<usize>)>;
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
    fn grads(&self) -> Vec<&[f64]>;
    fn zero_grads(&mut self);
    /// Structural description used to reject mismatched parameter files.
    fn arch(&self) -> serde_json::Value;
}

/// Polyak-average `source` into `target`: `t = (1 - tau) t + tau s`.
pub fn soft_update<N: ParamNet>(target: &mut N, source: &N, tau: f64) {
    let src: Vec<Vec<f64>> = source.params().iter().map(|p| p.to_vec()).collect();
    for (t, s) in target.params_mut().into_iter().zip(src.iter()) {
        for (tv, sv) in t.iter_mut().zip(s.iter()) {
            *tv = (1.0 - tau) * *tv + tau * *sv;
        }
    }
}

/// Copy all parameters from `source` into `target`.
pub fn copy_params<N: ParamNet>(target: &mut N, source: &N) {
    soft_update(target, source, 1.0);
}

pub(crate) fn relu_forward(y: &mut [f64]) {
    for v in y.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Mask `dy` by the relu activation pattern, using the post-relu values.
pub(crate) fn relu_backward(post: &[f64], dy: &mut [f64]) {
    for (d, p) in dy.iter_mut().zip(post.iter()) {
        if *p <= 0.0 {
            *d = 0.0;
        }
    }
}

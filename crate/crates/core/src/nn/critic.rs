//! Action-value network: conv trunk, action concatenated after flatten.

use rand::Rng;

use crate::config::NetConfig;
use crate::error::Result;
use crate::nn::gauss::ACTION_DIM;
use crate::nn::{relu_backward, relu_forward, Dense, ParamNet, Trunk, TrunkCache};

#[derive(Clone, Debug)]
pub struct CriticNet {
    pub trunk: Trunk,
    pub fc: Dense,
    pub head: Dense,
}

pub struct CriticCache {
    trunk: TrunkCache,
    pub flat: Vec<f64>,
    dense: CriticDenseCache,
}

/// Cache for the layers above the trunk, enough to backpropagate to the
/// action alone. Lets the policy update reuse trunk features computed
/// during the critic update.
pub struct CriticDenseCache {
    fc_in: Vec<f64>,
    hidden: Vec<f64>,
    pub q: f64,
}

impl CriticNet {
    pub fn new(cfg: &NetConfig, in_c: usize, in_h: usize, in_w: usize, rng: &mut impl Rng) -> Result<CriticNet> {
        let trunk = Trunk::new(cfg, in_c, in_h, in_w, rng)?;
        let fc = Dense::new(trunk.out_dim + ACTION_DIM, cfg.hidden, rng);
        let head = Dense::new(cfg.hidden, 1, rng);
        Ok(CriticNet { trunk, fc, head })
    }

    pub fn forward(&self, x: &[f64], action: &[f64; ACTION_DIM]) -> (f64, CriticCache) {
        let (flat, trunk_cache) = self.trunk.forward(x);
        let dense = self.forward_from_flat(&flat, action);
        (dense.q, CriticCache { trunk: trunk_cache, flat, dense })
    }

    /// Dense layers only, starting from precomputed trunk features.
    pub fn forward_from_flat(&self, flat: &[f64], action: &[f64; ACTION_DIM]) -> CriticDenseCache {
        let mut fc_in = Vec::with_capacity(flat.len() + ACTION_DIM);
        fc_in.extend_from_slice(flat);
        fc_in.extend_from_slice(action);
        let mut hidden = Vec::new();
        self.fc.forward(&fc_in, &mut hidden);
        relu_forward(&mut hidden);
        let mut q = Vec::new();
        self.head.forward(&hidden, &mut q);
        CriticDenseCache { fc_in, hidden, q: q[0] }
    }

    /// Full backward pass accumulating parameter gradients. Returns the
    /// gradient with respect to the action inputs.
    pub fn backward(&mut self, cache: &CriticCache, dq: f64) -> [f64; ACTION_DIM] {
        let mut dfc_in = vec![0.0; self.fc.in_dim];
        let mut dhidden = vec![0.0; self.fc.out_dim];
        self.head.backward(&cache.dense.hidden, &[dq], Some(&mut dhidden));
        relu_backward(&cache.dense.hidden, &mut dhidden);
        self.fc.backward(&cache.dense.fc_in, &dhidden, Some(&mut dfc_in));
        let split = self.trunk.out_dim;
        self.trunk.backward(&cache.trunk, &dfc_in[..split]);
        [dfc_in[split], dfc_in[split + 1]]
    }

    /// Gradient with respect to the action only; parameters stay frozen.
    pub fn backward_action_only(&self, dense: &CriticDenseCache, dq: f64) -> [f64; ACTION_DIM] {
        let mut dhidden = vec![0.0; self.fc.out_dim];
        self.head.backward_input_only(&[dq], &mut dhidden);
        relu_backward(&dense.hidden, &mut dhidden);
        let mut dfc_in = vec![0.0; self.fc.in_dim];
        self.fc.backward_input_only(&dhidden, &mut dfc_in);
        let split = self.trunk.out_dim;
        [dfc_in[split], dfc_in[split + 1]]
    }

    pub fn input_len(&self) -> usize {
        self.trunk.in_c * self.trunk.in_h * self.trunk.in_w
    }
}

impl ParamNet for CriticNet {
    fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut specs = self.trunk.param_specs("trunk");
        specs.push(("fc.w".into(), vec![self.fc.out_dim, self.fc.in_dim]));
        specs.push(("fc.b".into(), vec![self.fc.out_dim]));
        specs.push(("head.w".into(), vec![1, self.head.in_dim]));
        specs.push(("head.b".into(), vec![1]));
        specs
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.trunk.params();
        p.extend([&self.fc.w[..], &self.fc.b[..], &self.head.w[..], &self.head.b[..]]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let CriticNet { trunk, fc, head } = self;
        let mut p = trunk.params_mut();
        p.extend([
            fc.w.as_mut_slice(),
            fc.b.as_mut_slice(),
            head.w.as_mut_slice(),
            head.b.as_mut_slice(),
        ]);
        p
    }

    fn grads(&self) -> Vec<&[f64]> {
        let mut g = self.trunk.grads();
        g.extend([&self.fc.gw[..], &self.fc.gb[..], &self.head.gw[..], &self.head.gb[..]]);
        g
    }

    fn zero_grads(&mut self) {
        self.trunk.zero_grads();
        self.fc.zero_grads();
        self.head.zero_grads();
    }

    fn arch(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "critic",
            "trunk": self.trunk.arch(),
            "hidden": self.fc.out_dim,
            "actions": ACTION_DIM,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ConvSpec, NetConfig};
    use crate::rng::{stream, StreamId};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn tiny() -> (CriticNet, Vec<f64>, [f64; 2]) {
        let cfg = NetConfig {
            conv: vec![ConvSpec { kernel: 3, stride: 2, channels: 3 }],
            hidden: 6,
        };
        let mut rng = stream(51, StreamId::NetInit);
        let net = CriticNet::new(&cfg, 2, 7, 8, &mut rng).unwrap();
        let x: Vec<f64> = (0..2 * 7 * 8).map(|_| rng.random_range(-1.0..=1.0)).collect();
        (net, x, [0.3, -0.6])
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let (mut net, x, a) = tiny();
        let (_, cache) = net.forward(&x, &a);
        net.zero_grads();
        net.backward(&cache, 1.0);
        let grads: Vec<Vec<f64>> = net.grads().iter().map(|g| g.to_vec()).collect();

        let h = 1e-6;
        for pi in 0..net.params().len() {
            let len = net.params()[pi].len();
            for j in (0..len).step_by(13) {
                let mut plus = net.clone();
                plus.params_mut()[pi][j] += h;
                let mut minus = net.clone();
                minus.params_mut()[pi][j] -= h;
                let fd = (plus.forward(&x, &a).0 - minus.forward(&x, &a).0) / (2.0 * h);
                assert_relative_eq!(grads[pi][j], fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn action_gradient_matches_finite_differences() {
        let (mut net, x, a) = tiny();
        let (_, cache) = net.forward(&x, &a);
        let da_full = net.backward(&cache, 1.0);
        let da_frozen = net.backward_action_only(&cache.dense, 1.0);
        assert_eq!(da_full, da_frozen);

        let h = 1e-6;
        for d in 0..2 {
            let mut ap = a;
            ap[d] += h;
            let mut am = a;
            am[d] -= h;
            let fd = (net.forward(&x, &ap).0 - net.forward(&x, &am).0) / (2.0 * h);
            assert_relative_eq!(da_full[d], fd, max_relative = 1e-6, epsilon = 1e-10);
        }
    }

    #[test]
    fn flat_reuse_reproduces_the_full_forward() {
        let (net, x, a) = tiny();
        let (q, cache) = net.forward(&x, &a);
        let redo = net.forward_from_flat(&cache.flat, &[0.9, 0.1]);
        let direct = net.forward(&x, &[0.9, 0.1]).0;
        assert_eq!(redo.q, direct);
        assert_ne!(q, direct);
    }

    #[test]
    fn frozen_backward_does_not_touch_gradients() {
        let (mut net, x, a) = tiny();
        let (_, cache) = net.forward(&x, &a);
        net.zero_grads();
        let _ = net.backward_action_only(&cache.dense, 2.0);
        assert!(net.grads().iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }
}

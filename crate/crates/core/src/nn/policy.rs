//! Policy network: conv trunk, hidden layer, Gaussian heads.

use rand::Rng;

use crate::config::NetConfig;
use crate::error::Result;
use crate::nn::gauss::{ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN};
use crate::nn::{relu_backward, relu_forward, Dense, ParamNet, Trunk, TrunkCache};

#[derive(Clone, Debug)]
pub struct PolicyNet {
    pub trunk: Trunk,
    pub fc: Dense,
    pub mean_head: Dense,
    pub log_std_head: Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct PolicyOut {
    pub mean: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
    /// Dimensions where the raw log-std left the allowed band and was
    /// clamped; their log-std gradient is zero.
    pub clamped: [bool; ACTION_DIM],
}

pub struct PolicyCache {
    trunk: TrunkCache,
    flat: Vec<f64>,
    hidden: Vec<f64>,
    out: PolicyOut,
}

impl PolicyNet {
    pub fn new(cfg: &NetConfig, in_c: usize, in_h: usize, in_w: usize, rng: &mut impl Rng) -> Result<PolicyNet> {
        let trunk = Trunk::new(cfg, in_c, in_h, in_w, rng)?;
        let fc = Dense::new(trunk.out_dim, cfg.hidden, rng);
        let mut mean_head = Dense::new(cfg.hidden, ACTION_DIM, rng);
        mean_head.scale_weights(0.01);
        let mut log_std_head = Dense::new(cfg.hidden, ACTION_DIM, rng);
        log_std_head.scale_weights(0.01);
        Ok(PolicyNet { trunk, fc, mean_head, log_std_head })
    }

    pub fn forward(&self, x: &[f64]) -> (PolicyOut, PolicyCache) {
        let (flat, trunk_cache) = self.trunk.forward(x);
        let mut hidden = Vec::new();
        self.fc.forward(&flat, &mut hidden);
        relu_forward(&mut hidden);
        let mut mean_v = Vec::new();
        self.mean_head.forward(&hidden, &mut mean_v);
        let mut ls_v = Vec::new();
        self.log_std_head.forward(&hidden, &mut ls_v);
        let mut out = PolicyOut {
            mean: [mean_v[0], mean_v[1]],
            log_std: [0.0; ACTION_DIM],
            clamped: [false; ACTION_DIM],
        };
        for d in 0..ACTION_DIM {
            if ls_v[d] < LOG_STD_MIN {
                out.log_std[d] = LOG_STD_MIN;
                out.clamped[d] = true;
            } else if ls_v[d] > LOG_STD_MAX {
                out.log_std[d] = LOG_STD_MAX;
                out.clamped[d] = true;
            } else {
                out.log_std[d] = ls_v[d];
            }
        }
        (out, PolicyCache { trunk: trunk_cache, flat, hidden, out })
    }

    /// Greedy action: the squashed mean.
    pub fn det_action(out: &PolicyOut) -> [f64; ACTION_DIM] {
        [out.mean[0].tanh(), out.mean[1].tanh()]
    }

    /// Accumulate gradients for one sample given head output gradients.
    pub fn backward(&mut self, cache: &PolicyCache, dmean: [f64; ACTION_DIM], dlog_std: [f64; ACTION_DIM]) {
        let mut dls = dlog_std;
        for d in 0..ACTION_DIM {
            if cache.out.clamped[d] {
                dls[d] = 0.0;
            }
        }
        let mut dhidden = vec![0.0; self.fc.out_dim];
        self.mean_head.backward(&cache.hidden, &dmean, Some(&mut dhidden));
        self.log_std_head.backward(&cache.hidden, &dls, Some(&mut dhidden));
        relu_backward(&cache.hidden, &mut dhidden);
        let mut dflat = vec![0.0; self.trunk.out_dim];
        self.fc.backward(&cache.flat, &dhidden, Some(&mut dflat));
        self.trunk.backward(&cache.trunk, &dflat);
    }

    pub fn input_len(&self) -> usize {
        self.trunk.in_c * self.trunk.in_h * self.trunk.in_w
    }
}

impl ParamNet for PolicyNet {
    fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut specs = self.trunk.param_specs("trunk");
        specs.push(("fc.w".into(), vec![self.fc.out_dim, self.fc.in_dim]));
        specs.push(("fc.b".into(), vec![self.fc.out_dim]));
        specs.push(("mean.w".into(), vec![ACTION_DIM, self.mean_head.in_dim]));
        specs.push(("mean.b".into(), vec![ACTION_DIM]));
        specs.push(("log_std.w".into(), vec![ACTION_DIM, self.log_std_head.in_dim]));
        specs.push(("log_std.b".into(), vec![ACTION_DIM]));
        specs
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.trunk.params();
        p.extend([
            &self.fc.w[..],
            &self.fc.b[..],
            &self.mean_head.w[..],
            &self.mean_head.b[..],
            &self.log_std_head.w[..],
            &self.log_std_head.b[..],
        ]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let PolicyNet { trunk, fc, mean_head, log_std_head } = self;
        let mut p = trunk.params_mut();
        p.extend([
            fc.w.as_mut_slice(),
            fc.b.as_mut_slice(),
            mean_head.w.as_mut_slice(),
            mean_head.b.as_mut_slice(),
            log_std_head.w.as_mut_slice(),
            log_std_head.b.as_mut_slice(),
        ]);
        p
    }

    fn grads(&self) -> Vec<&[f64]> {
        let mut g = self.trunk.grads();
        g.extend([
            &self.fc.gw[..],
            &self.fc.gb[..],
            &self.mean_head.gw[..],
            &self.mean_head.gb[..],
            &self.log_std_head.gw[..],
            &self.log_std_head.gb[..],
        ]);
        g
    }

    fn zero_grads(&mut self) {
        self.trunk.zero_grads();
        self.fc.zero_grads();
        self.mean_head.zero_grads();
        self.log_std_head.zero_grads();
    }

    fn arch(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "policy",
            "trunk": self.trunk.arch(),
            "hidden": self.fc.out_dim,
            "actions": ACTION_DIM,
        })
    }
}

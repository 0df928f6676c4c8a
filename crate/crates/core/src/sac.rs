//! Soft actor-critic learner with action smoothness regularization.
//!
//! Twin critics with target copies, a tanh-Gaussian policy, automatic
//! entropy temperature, and n-step bootstrapped targets. On top of the
//! usual objective the policy pays for roughness: a temporal term charges
//! the distance between its actions at consecutive observations, and a
//! spatial term charges the distance between its actions at an observation
//! and a perturbed rendering of the same observation. Both terms enter the
//! minimized objective linearly through their weights, so the reported
//! decomposition is exact.
//!
//! One update is fully synchronized: every gradient is evaluated at the
//! parameters the update started with, then all networks, the temperature,
//! and the targets move together. Random draws are consumed in a fixed
//! order (bootstrap actions, then per-sample policy actions, then
//! perturbation draws), which keeps whole runs bit-reproducible.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::sample_phi_stack;
use crate::config::{CapsConfig, ExperimentConfig, PerturbationConfig, SacConfig};
use crate::error::Result;
use crate::nn::{
    self, daction_dlogstd, daction_dmean, dlogp_dlogstd, dlogp_dmean, soft_update, Adam,
    CriticNet, ParamNet, PolicyNet, PolicyOut, ScalarAdam, ACTION_DIM,
};
use crate::obs::FrameStack;
use crate::replay::SampleBatch;
use crate::rng::{stream, StreamId};

/// Euclidean distance between two actions.
pub fn action_distance(a: &[f64; ACTION_DIM], b: &[f64; ACTION_DIM]) -> f64 {
    let mut acc = 0.0;
    for d in 0..ACTION_DIM {
        let diff = a[d] - b[d];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Mean distance over action pairs.
pub fn mean_action_distance(pairs: &[([f64; ACTION_DIM], [f64; ACTION_DIM])]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|(a, b)| action_distance(a, b)).sum::<f64>() / pairs.len() as f64
}

/// Monte-Carlo estimate of the expected action distance under observation
/// perturbations, for analysis against closed forms.
pub fn expected_phi_action_distance(
    policy: impl Fn(&FrameStack) -> [f64; ACTION_DIM],
    stack: &FrameStack,
    phi: &PerturbationConfig,
    rng: &mut ChaCha8Rng,
    draws: usize,
) -> Result<f64> {
    let base = policy(stack);
    let mut acc = 0.0;
    for _ in 0..draws {
        let perturbed = sample_phi_stack(phi, stack, rng)?;
        acc += action_distance(&base, &policy(&perturbed));
    }
    Ok(acc / draws as f64)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossReport {
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub l_temporal: f64,
    pub l_spatial: f64,
    /// Temperature used by this update (before its own adjustment).
    pub alpha: f64,
    /// `policy_loss + lambda_t * l_temporal + lambda_s * l_spatial`.
    pub total_policy_objective: f64,
}

#[derive(Clone)]
pub struct Learner {
    pub policy: PolicyNet,
    pub q1: CriticNet,
    pub q2: CriticNet,
    pub target_q1: CriticNet,
    pub target_q2: CriticNet,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    pub log_alpha: f64,
    opt_alpha: ScalarAdam,
    pub sac: SacConfig,
    pub caps: CapsConfig,
    phi: PerturbationConfig,
    rng_bootstrap: ChaCha8Rng,
    rng_policy: ChaCha8Rng,
    rng_phi: ChaCha8Rng,
    pub updates: u64,
}

impl Learner {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Learner> {
        let (h, w) = (cfg.observation.height, cfg.observation.width);
        let in_c = 6;
        let mut init = stream(seed, StreamId::NetInit);
        let policy = PolicyNet::new(&cfg.net, in_c, h, w, &mut init)?;
        let q1 = CriticNet::new(&cfg.net, in_c, h, w, &mut init)?;
        let q2 = CriticNet::new(&cfg.net, in_c, h, w, &mut init)?;
        let target_q1 = q1.clone();
        let target_q2 = q2.clone();
        let lr = cfg.sac.lr;
        Ok(Learner {
            opt_policy: Adam::for_net(lr, &policy),
            opt_q1: Adam::for_net(lr, &q1),
            opt_q2: Adam::for_net(lr, &q2),
            policy,
            q1,
            q2,
            target_q1,
            target_q2,
            log_alpha: cfg.sac.alpha_init.ln(),
            opt_alpha: ScalarAdam::new(lr),
            sac: cfg.sac.clone(),
            caps: cfg.caps.clone(),
            phi: cfg.phi.clone(),
            rng_bootstrap: stream(seed, StreamId::LearnerBootstrap),
            rng_policy: stream(seed, StreamId::LearnerPolicy),
            rng_phi: stream(seed, StreamId::LearnerPhi),
            updates: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Bootstrapped n-step targets for a batch, consuming bootstrap draws
    /// in batch order.
    fn targets(&mut self, batch: &SampleBatch) -> Vec<f64> {
        let alpha = self.alpha();
        let mut ys = Vec::with_capacity(batch.transitions.len());
        for t in &batch.transitions {
            let x_next = t.next_obs.to_input_f64();
            let (out, _) = self.policy.forward(&x_next);
            let s = nn::sample(&out.mean, &out.log_std, &mut self.rng_bootstrap);
            let q1 = self.target_q1.forward(&x_next, &s.action).0;
            let q2 = self.target_q2.forward(&x_next, &s.action).0;
            let boot = q1.min(q2) - alpha * s.log_prob;
            let discount = if t.terminal { 0.0 } else { self.sac.gamma.powi(t.steps as i32) };
            ys.push(t.n_return + discount * boot);
        }
        ys
    }

    /// One synchronized update. Returns the loss report and the per-sample
    /// TD errors for priority refresh.
    pub fn update(&mut self, batch: &SampleBatch) -> (LossReport, Vec<f64>) {
        let b = batch.transitions.len();
        assert!(b > 0, "empty batch");
        let inv_b = 1.0 / b as f64;
        let alpha = self.alpha();

        let ys = self.targets(batch);

        // Critic pass: gradients at current parameters, trunk features kept
        // for the policy pass.
        self.q1.zero_grads();
        self.q2.zero_grads();
        let mut critic_loss = 0.0;
        let mut tds = Vec::with_capacity(b);
        let mut flats1 = Vec::with_capacity(b);
        let mut flats2 = Vec::with_capacity(b);
        for (i, t) in batch.transitions.iter().enumerate() {
            let x = t.obs.to_input_f64();
            let w = batch.weights[i];
            let (q1v, cache1) = self.q1.forward(&x, &t.action);
            let (q2v, cache2) = self.q2.forward(&x, &t.action);
            let d1 = q1v - ys[i];
            let d2 = q2v - ys[i];
            critic_loss += w * 0.5 * (d1 * d1 + d2 * d2);
            tds.push(0.5 * (d1.abs() + d2.abs()));
            self.q1.backward(&cache1, w * d1 * inv_b);
            self.q2.backward(&cache2, w * d2 * inv_b);
            flats1.push(cache1.flat);
            flats2.push(cache2.flat);
        }
        critic_loss *= inv_b;

        // Policy pass: entropy, value, and smoothness terms share the same
        // forward caches; gradients of all branches are merged per sample.
        self.policy.zero_grads();
        let mut policy_loss = 0.0;
        let mut l_temporal = 0.0;
        let mut l_spatial = 0.0;
        let mut log_probs = Vec::with_capacity(b);
        for (i, t) in batch.transitions.iter().enumerate() {
            let x = t.obs.to_input_f64();
            let (out, cache) = self.policy.forward(&x);
            let gs = nn::sample(&out.mean, &out.log_std, &mut self.rng_policy);
            log_probs.push(gs.log_prob);
            let sigma = [out.log_std[0].exp(), out.log_std[1].exp()];

            let qd1 = self.q1.forward_from_flat(&flats1[i], &gs.action);
            let qd2 = self.q2.forward_from_flat(&flats2[i], &gs.action);
            let (qmin, use_q1) = if qd1.q <= qd2.q { (qd1.q, true) } else { (qd2.q, false) };
            policy_loss += alpha * gs.log_prob - qmin;

            let mut dmean = [0.0; ACTION_DIM];
            let mut dlog_std = [0.0; ACTION_DIM];
            for d in 0..ACTION_DIM {
                dmean[d] += alpha * inv_b * dlogp_dmean(gs.u[d]);
                dlog_std[d] += alpha * inv_b * dlogp_dlogstd(gs.u[d], sigma[d], gs.eps[d]);
            }
            let da = if use_q1 {
                self.q1.backward_action_only(&qd1, -inv_b)
            } else {
                self.q2.backward_action_only(&qd2, -inv_b)
            };
            for d in 0..ACTION_DIM {
                dmean[d] += da[d] * daction_dmean(gs.action[d]);
                dlog_std[d] += da[d] * daction_dlogstd(gs.action[d], sigma[d], gs.eps[d]);
            }

            if self.caps.lambda_t > 0.0 {
                let x_next = t.next_obs.to_input_f64();
                let (lt, grads) = self.smoothness_branch(&out, &gs, &x_next, self.caps.lambda_t * inv_b);
                l_temporal += lt;
                for d in 0..ACTION_DIM {
                    dmean[d] += grads.dmean[d];
                    dlog_std[d] += grads.dlog_std[d];
                }
            }
            if self.caps.lambda_s > 0.0 {
                let perturbed = sample_phi_stack(&self.phi, &t.obs, &mut self.rng_phi)
                    .expect("perturbation config validated at startup");
                let x_phi = perturbed.to_input_f64();
                let (ls, grads) = self.smoothness_branch(&out, &gs, &x_phi, self.caps.lambda_s * inv_b);
                l_spatial += ls;
                for d in 0..ACTION_DIM {
                    dmean[d] += grads.dmean[d];
                    dlog_std[d] += grads.dlog_std[d];
                }
            }

            self.policy.backward(&cache, dmean, dlog_std);
        }
        policy_loss *= inv_b;
        l_temporal *= inv_b;
        l_spatial *= inv_b;
        let total_policy_objective =
            policy_loss + self.caps.lambda_t * l_temporal + self.caps.lambda_s * l_spatial;

        // Temperature gradient from this batch's fresh log probabilities.
        let alpha_grad = if self.sac.alpha_auto {
            let mean_lp =
                log_probs.iter().sum::<f64>() / b as f64 + self.sac.target_entropy;
            -alpha * mean_lp
        } else {
            0.0
        };

        // Apply everything together.
        apply_adam(&mut self.opt_q1, &mut self.q1);
        apply_adam(&mut self.opt_q2, &mut self.q2);
        apply_adam(&mut self.opt_policy, &mut self.policy);
        if self.sac.alpha_auto {
            self.opt_alpha.step(&mut self.log_alpha, alpha_grad);
        }
        soft_update(&mut self.target_q1, &self.q1, self.sac.tau);
        soft_update(&mut self.target_q2, &self.q2, self.sac.tau);
        self.updates += 1;

        (
            LossReport {
                critic_loss,
                policy_loss,
                l_temporal,
                l_spatial,
                alpha,
                total_policy_objective,
            },
            tds,
        )
    }

    /// Distance between this sample's action and the policy's action at a
    /// companion observation, with gradients for both branches. The
    /// companion branch's parameter gradients are accumulated here; the
    /// main branch's are returned for merging.
    fn smoothness_branch(
        &mut self,
        out_main: &PolicyOut,
        gs_main: &nn::GaussSample,
        x_other: &[f64],
        weight: f64,
    ) -> (f64, BranchGrads) {
        let (out_other, cache_other) = self.policy.forward(x_other);
        let sigma_other = [out_other.log_std[0].exp(), out_other.log_std[1].exp()];
        let (a_main, a_other, eps_other) = if self.caps.sampled_actions {
            let s = nn::sample(&out_other.mean, &out_other.log_std, &mut self.rng_policy);
            (gs_main.action, s.action, Some(s.eps))
        } else {
            (
                PolicyNet::det_action(out_main),
                PolicyNet::det_action(&out_other),
                None,
            )
        };
        let dist = action_distance(&a_main, &a_other);
        let mut grads = BranchGrads::default();
        if dist > 1e-12 {
            let mut dmean_other = [0.0; ACTION_DIM];
            let mut dls_other = [0.0; ACTION_DIM];
            for d in 0..ACTION_DIM {
                let dd = weight * (a_main[d] - a_other[d]) / dist;
                match eps_other {
                    Some(eps) => {
                        // Sampled branches move through mean and spread.
                        let sigma_main = [out_main.log_std[0].exp(), out_main.log_std[1].exp()];
                        grads.dmean[d] += dd * daction_dmean(a_main[d]);
                        grads.dlog_std[d] +=
                            dd * daction_dlogstd(a_main[d], sigma_main[d], gs_main.eps[d]);
                        dmean_other[d] = -dd * daction_dmean(a_other[d]);
                        dls_other[d] = -dd * daction_dlogstd(a_other[d], sigma_other[d], eps[d]);
                    }
                    None => {
                        // Deterministic branches move through the mean only.
                        grads.dmean[d] += dd * daction_dmean(a_main[d]);
                        dmean_other[d] = -dd * daction_dmean(a_other[d]);
                    }
                }
            }
            self.policy.backward(&cache_other, dmean_other, dls_other);
        }
        (dist, grads)
    }

    /// The policy objective alone, evaluated without touching any state.
    /// Callers pass clones of the learner's draw streams so the evaluation
    /// sees exactly the draws an update would.
    pub fn policy_objective(
        &self,
        batch: &SampleBatch,
        rng_policy: &mut ChaCha8Rng,
        rng_phi: &mut ChaCha8Rng,
    ) -> f64 {
        let b = batch.transitions.len();
        let inv_b = 1.0 / b as f64;
        let alpha = self.alpha();
        let mut policy_loss = 0.0;
        let mut l_temporal = 0.0;
        let mut l_spatial = 0.0;
        for t in &batch.transitions {
            let x = t.obs.to_input_f64();
            let (out, _) = self.policy.forward(&x);
            let gs = nn::sample(&out.mean, &out.log_std, rng_policy);
            let q1 = self.q1.forward(&x, &gs.action).0;
            let q2 = self.q2.forward(&x, &gs.action).0;
            policy_loss += alpha * gs.log_prob - q1.min(q2);
            if self.caps.lambda_t > 0.0 {
                let x_next = t.next_obs.to_input_f64();
                l_temporal += self.branch_distance(&out, &gs, &x_next, rng_policy);
            }
            if self.caps.lambda_s > 0.0 {
                let perturbed = sample_phi_stack(&self.phi, &t.obs, rng_phi)
                    .expect("perturbation config validated at startup");
                l_spatial += self.branch_distance(&out, &gs, &perturbed.to_input_f64(), rng_policy);
            }
        }
        (policy_loss + self.caps.lambda_t * l_temporal + self.caps.lambda_s * l_spatial) * inv_b
    }

    fn branch_distance(
        &self,
        out_main: &PolicyOut,
        gs_main: &nn::GaussSample,
        x_other: &[f64],
        rng_policy: &mut ChaCha8Rng,
    ) -> f64 {
        let (out_other, _) = self.policy.forward(x_other);
        let (a_main, a_other) = if self.caps.sampled_actions {
            let s = nn::sample(&out_other.mean, &out_other.log_std, rng_policy);
            (gs_main.action, s.action)
        } else {
            (PolicyNet::det_action(out_main), PolicyNet::det_action(&out_other))
        };
        action_distance(&a_main, &a_other)
    }

    /// Loss report for the same batch under different smoothness weights,
    /// leaving this learner untouched.
    pub fn report_at_lambdas(&self, batch: &SampleBatch, lambda_t: f64, lambda_s: f64) -> LossReport {
        let mut probe = self.clone();
        probe.caps.lambda_t = lambda_t;
        probe.caps.lambda_s = lambda_s;
        probe.update(batch).0
    }

    pub fn clone_rng_policy(&self) -> ChaCha8Rng {
        self.rng_policy.clone()
    }

    pub fn clone_rng_phi(&self) -> ChaCha8Rng {
        self.rng_phi.clone()
    }
}

#[derive(Default)]
struct BranchGrads {
    dmean: [f64; ACTION_DIM],
    dlog_std: [f64; ACTION_DIM],
}

fn apply_adam(opt: &mut Adam, net: &mut impl ParamNet) {
    let grads: Vec<Vec<f64>> = net.grads().iter().map(|g| g.to_vec()).collect();
    let refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
    opt.step(&mut net.params_mut(), &refs);
}

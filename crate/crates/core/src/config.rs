//! Experiment configuration.
//!
//! One [`ExperimentConfig`] describes a full run: track, observation and
//! camera geometry, vehicle and reward parameters, learner settings,
//! perturbation ranges, replay layout, and the run budget. Every section has
//! usable defaults, so a config file only needs to state what it changes.
//! Unknown keys are rejected rather than ignored, which catches typos before
//! they silently run a different experiment than intended.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::augment::PerturbationKind;
use crate::error::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub height: usize,
    pub width: usize,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig { height: 40, width: 56 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Height of the lens above the ground plane.
    pub height_m: f64,
    /// Downward tilt from the horizon.
    pub pitch_deg: f64,
    /// Horizontal field of view.
    pub hfov_deg: f64,
    /// Ground beyond this range renders as background.
    pub far_clip_m: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig { height_m: 0.14, pitch_deg: 22.0, hfov_deg: 110.0, far_clip_m: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub wheelbase_m: f64,
    /// Full-lock wheel angle; steering actions scale onto [-limit, limit].
    pub steering_limit_deg: f64,
    /// First-order lag time constant for speed tracking. Zero disables lag.
    pub speed_tau_s: f64,
    /// First-order lag time constant for wheel angle tracking.
    pub steering_tau_s: f64,
}

impl VehicleConfig {
    pub fn steering_limit_rad(&self) -> f64 {
        self.steering_limit_deg.to_radians()
    }
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            wheelbase_m: 0.26,
            steering_limit_deg: 25.8,
            speed_tau_s: 0.20,
            steering_tau_s: 0.08,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Reward per full lap of centerline progress.
    pub progress_scale: f64,
    /// Bonus proportional to speed / v_max, per step.
    pub speed_bonus: f64,
    /// One-off penalty on wall contact.
    pub collision_penalty: f64,
    /// Penalty per degree of commanded steering, per step.
    pub steering_penalty_per_deg: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            progress_scale: 100.0,
            speed_bonus: 0.0,
            collision_penalty: 1.0,
            steering_penalty_per_deg: 0.0,
        }
    }
}

/// Range the speed action maps onto: action -1 commands `v_min`, +1 `v_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedConfig {
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        SpeedPreset::C1.config()
    }
}

/// Named speed ranges used by the evaluation protocol, slowest to fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedPreset {
    C1,
    C2,
    C3,
}

impl SpeedPreset {
    pub fn config(self) -> SpeedConfig {
        match self {
            SpeedPreset::C1 => SpeedConfig { v_min: 0.35, v_max: 2.5 },
            SpeedPreset::C2 => SpeedConfig { v_min: 0.35, v_max: 2.8 },
            SpeedPreset::C3 => SpeedConfig { v_min: 1.0, v_max: 2.9 },
        }
    }

    pub fn all() -> [SpeedPreset; 3] {
        [SpeedPreset::C1, SpeedPreset::C2, SpeedPreset::C3]
    }

    pub fn name(self) -> &'static str {
        match self {
            SpeedPreset::C1 => "c1",
            SpeedPreset::C2 => "c2",
            SpeedPreset::C3 => "c3",
        }
    }
}

impl std::str::FromStr for SpeedPreset {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c1" => Ok(SpeedPreset::C1),
            "c2" => Ok(SpeedPreset::C2),
            "c3" => Ok(SpeedPreset::C3),
            other => Err(CoreError::Config(format!(
                "unknown speed preset `{other}` (expected c1, c2, or c3)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Simulation and camera rate; the control step is 1/fps seconds.
    pub fps: f64,
    pub max_steps: u64,
    /// Laps to drive before the episode counts as complete; 0 defers to the
    /// track file.
    pub lap_count: u32,
    /// Uniform longitudinal and lateral jitter of the start position, in
    /// meters.
    pub start_jitter_m: f64,
    /// Uniform jitter of the start heading, in radians.
    pub start_jitter_rad: f64,
}

impl EpisodeConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            fps: 30.0,
            max_steps: 1800,
            lap_count: 0,
            start_jitter_m: 0.05,
            start_jitter_rad: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub n_step: usize,
    pub alpha_init: f64,
    /// Tune the entropy coefficient towards `target_entropy` when set;
    /// otherwise alpha stays at `alpha_init`.
    pub alpha_auto: bool,
    pub target_entropy: f64,
    pub batch_size: usize,
    pub lr: f64,
    /// Target network smoothing rate per update.
    pub tau: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.98,
            n_step: 4,
            alpha_init: 0.3,
            alpha_auto: true,
            target_entropy: -2.0,
            batch_size: 512,
            lr: 3e-4,
            tau: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapsConfig {
    /// Weight of the temporal smoothness penalty.
    pub lambda_t: f64,
    /// Weight of the spatial smoothness penalty.
    pub lambda_s: f64,
    /// Measure action distances on stochastic samples instead of the
    /// deterministic policy mean.
    pub sampled_actions: bool,
}

impl Default for CapsConfig {
    fn default() -> Self {
        CapsConfig { lambda_t: 0.0, lambda_s: 0.0, sampled_actions: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Multiplicative brightness factor range.
    pub brightness: [f64; 2],
    /// Multiplicative contrast factor range, about the mid-gray pivot.
    pub contrast: [f64; 2],
    /// Rotation angle range in degrees.
    pub rotation_deg: [f64; 2],
    /// Per-pixel corruption probability range.
    pub salt_pepper_prob: [f64; 2],
    /// Fraction of corrupted pixels set to white rather than black.
    pub salt_ratio: f64,
    /// Gaussian blur sigma range, in pixels.
    pub blur_sigma: [f64; 2],
    /// Largest occluding rectangle, as a fraction of image area.
    pub cutoff_max_area: f64,
    /// Additive glare band intensity range, in channel units.
    pub reflection_intensity: [f64; 2],
    /// Glare band height range, as a fraction of image height.
    pub reflection_width: [f64; 2],
    /// Hue rotation range in degrees.
    pub hsv_hue_deg: [f64; 2],
    /// Saturation factor range.
    pub hsv_sat: [f64; 2],
    /// Value factor range.
    pub hsv_val: [f64; 2],
    /// Kinds the similar-state distribution draws from.
    pub phi_enabled: Vec<PerturbationKind>,
    /// Kinds the training-time randomization pipeline applies, in its fixed
    /// order (hsv_shift, then reflection, then salt_pepper).
    pub sim2real_enabled: Vec<PerturbationKind>,
    /// Compose every enabled kind per draw instead of picking one.
    pub compose: bool,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            brightness: [0.6, 1.4],
            contrast: [0.6, 1.4],
            rotation_deg: [-5.0, 5.0],
            salt_pepper_prob: [0.0, 0.02],
            salt_ratio: 0.5,
            blur_sigma: [0.0, 1.5],
            cutoff_max_area: 0.10,
            reflection_intensity: [0.0, 90.0],
            reflection_width: [0.05, 0.30],
            hsv_hue_deg: [-12.0, 12.0],
            hsv_sat: [0.7, 1.3],
            hsv_val: [0.7, 1.3],
            phi_enabled: PerturbationKind::similarity_set().to_vec(),
            sim2real_enabled: vec![],
            compose: false,
        }
    }
}

/// Stand-in for a learned sim-to-real observation translator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorKind {
    /// Seam bypassed entirely.
    None,
    /// Seam engaged with the identity mapping.
    Identity,
    /// Channel inversion, for exercising the seam in tests.
    Invert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub local_capacity: usize,
    pub global_capacity: usize,
    /// Local transitions move to the global buffer in batches of this size
    /// (and at episode end).
    pub flush_threshold: usize,
    pub prioritized: bool,
    pub priority_alpha: f64,
    pub priority_beta: f64,
    pub priority_eps: f64,
    /// Global buffer fill level before the first learner update.
    pub warmup: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            local_capacity: 2000,
            global_capacity: 45000,
            flush_threshold: 200,
            prioritized: true,
            priority_alpha: 0.6,
            priority_beta: 0.4,
            priority_eps: 1e-6,
            warmup: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub workers: usize,
    /// Total environment steps to collect across all workers.
    pub step_budget: u64,
    /// Learner updates per collected environment step. Actors are throttled
    /// to keep this ratio once the warmup fill is reached.
    pub updates_per_step: f64,
    /// Publish a fresh policy snapshot to actors every this many updates.
    pub snapshot_every: u64,
    /// Write a checkpoint every this many updates (the initial and final
    /// parameters are always written).
    pub checkpoint_every: u64,
    /// Single-threaded strict alternation of collection and updates; runs
    /// are reproducible bit for bit. Requires workers = 1.
    pub deterministic: bool,
    pub seed: u64,
    /// Episodes per evaluation.
    pub eval_runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            workers: 3,
            step_budget: 300_000,
            updates_per_step: 1.0 / 16.0,
            snapshot_every: 50,
            checkpoint_every: 2000,
            deterministic: false,
            seed: 0,
            eval_runs: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub conv: Vec<ConvSpec>,
    pub hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            conv: vec![
                ConvSpec { kernel: 8, stride: 4, channels: 16 },
                ConvSpec { kernel: 4, stride: 2, channels: 32 },
                ConvSpec { kernel: 3, stride: 1, channels: 32 },
            ],
            hidden: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Track file path, resolved relative to the config file's directory
    /// when loaded from disk.
    pub track: PathBuf,
    pub observation: ObservationConfig,
    pub camera: CameraConfig,
    pub vehicle: VehicleConfig,
    pub reward: RewardConfig,
    pub speed: SpeedConfig,
    pub episode: EpisodeConfig,
    pub sac: SacConfig,
    pub caps: CapsConfig,
    pub phi: PerturbationConfig,
    pub translator: TranslatorKind,
    pub replay: ReplayConfig,
    pub run: RunConfig,
    pub net: NetConfig,
    /// Default output directory; command-line `--out` takes precedence.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            track: PathBuf::from("tracks/default_track.json"),
            observation: ObservationConfig::default(),
            camera: CameraConfig::default(),
            vehicle: VehicleConfig::default(),
            reward: RewardConfig::default(),
            speed: SpeedConfig::default(),
            episode: EpisodeConfig::default(),
            sac: SacConfig::default(),
            caps: CapsConfig::default(),
            phi: PerturbationConfig::default(),
            translator: TranslatorKind::None,
            replay: ReplayConfig::default(),
            run: RunConfig::default(),
            net: NetConfig::default(),
            out_dir: None,
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(CoreError::Config(msg.to_string()))
    }
}

fn check_range(r: [f64; 2], name: &str) -> Result<()> {
    check(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1], &format!("{name}: range must be ordered lo <= hi"))
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check(self.observation.height >= 8 && self.observation.width >= 8, "observation: height and width must be at least 8")?;
        check(self.camera.height_m > 0.0, "camera.height_m: must be positive")?;
        check(self.camera.pitch_deg > 0.0 && self.camera.pitch_deg < 90.0, "camera.pitch_deg: must be in (0, 90)")?;
        check(self.camera.hfov_deg > 0.0 && self.camera.hfov_deg < 180.0, "camera.hfov_deg: must be in (0, 180)")?;
        check(self.camera.far_clip_m > 0.0, "camera.far_clip_m: must be positive")?;
        check(self.vehicle.wheelbase_m > 0.0, "vehicle.wheelbase_m: must be positive")?;
        check(self.vehicle.steering_limit_deg > 0.0 && self.vehicle.steering_limit_deg < 90.0, "vehicle.steering_limit_deg: must be in (0, 90)")?;
        check(self.vehicle.speed_tau_s >= 0.0, "vehicle.speed_tau_s: must be non-negative")?;
        check(self.vehicle.steering_tau_s >= 0.0, "vehicle.steering_tau_s: must be non-negative")?;
        check(0.0 < self.speed.v_min && self.speed.v_min < self.speed.v_max, "speed: need 0 < v_min < v_max")?;
        check(self.episode.fps > 0.0, "episode.fps: must be positive")?;
        check(self.episode.max_steps > 0, "episode.max_steps: must be positive")?;
        check(self.episode.start_jitter_m >= 0.0, "episode.start_jitter_m: must be non-negative")?;
        check(self.sac.gamma > 0.0 && self.sac.gamma < 1.0, "sac.gamma: must be in (0, 1)")?;
        check(self.sac.n_step >= 1, "sac.n_step: must be at least 1")?;
        check(self.sac.batch_size >= 1, "sac.batch_size: must be at least 1")?;
        check(self.sac.lr > 0.0, "sac.lr: must be positive")?;
        check(self.sac.alpha_init > 0.0, "sac.alpha_init: must be positive")?;
        check((0.0..=1.0).contains(&self.sac.tau), "sac.tau: must be in [0, 1]")?;
        check(self.caps.lambda_t.is_finite() && self.caps.lambda_t >= 0.0, "caps.lambda_t: must be finite and non-negative")?;
        check(self.caps.lambda_s.is_finite() && self.caps.lambda_s >= 0.0, "caps.lambda_s: must be finite and non-negative")?;
        self.validate_phi()?;
        check(self.replay.local_capacity >= 1, "replay.local_capacity: must be at least 1")?;
        check(self.replay.global_capacity >= self.sac.batch_size, "replay.global_capacity: must hold at least one batch")?;
        check(self.replay.flush_threshold >= 1, "replay.flush_threshold: must be at least 1")?;
        check(self.replay.priority_alpha >= 0.0, "replay.priority_alpha: must be non-negative")?;
        check((0.0..=1.0).contains(&self.replay.priority_beta), "replay.priority_beta: must be in [0, 1]")?;
        check(self.replay.priority_eps > 0.0, "replay.priority_eps: must be positive")?;
        check(self.replay.warmup >= self.sac.batch_size, "replay.warmup: must be at least sac.batch_size")?;
        check(self.run.workers >= 1, "run.workers: must be at least 1")?;
        check(self.run.updates_per_step > 0.0, "run.updates_per_step: must be positive")?;
        check(self.run.snapshot_every >= 1, "run.snapshot_every: must be at least 1")?;
        check(self.run.checkpoint_every >= 1, "run.checkpoint_every: must be at least 1")?;
        check(!self.run.deterministic || self.run.workers == 1, "run.deterministic: requires run.workers = 1")?;
        check(self.run.eval_runs >= 1, "run.eval_runs: must be at least 1")?;
        check(!self.net.conv.is_empty(), "net.conv: need at least one conv layer")?;
        for (i, c) in self.net.conv.iter().enumerate() {
            check(c.kernel >= 1 && c.stride >= 1 && c.channels >= 1, &format!("net.conv[{i}]: kernel, stride, channels must be at least 1"))?;
        }
        check(self.net.hidden >= 1, "net.hidden: must be at least 1")?;
        Ok(())
    }

    fn validate_phi(&self) -> Result<()> {
        let p = &self.phi;
        check_range(p.brightness, "phi.brightness")?;
        check(p.brightness[0] >= 0.0, "phi.brightness: factors must be non-negative")?;
        check_range(p.contrast, "phi.contrast")?;
        check(p.contrast[0] >= 0.0, "phi.contrast: factors must be non-negative")?;
        check_range(p.rotation_deg, "phi.rotation_deg")?;
        check_range(p.salt_pepper_prob, "phi.salt_pepper_prob")?;
        check((0.0..=1.0).contains(&p.salt_pepper_prob[0]) && p.salt_pepper_prob[1] <= 1.0, "phi.salt_pepper_prob: probabilities must be in [0, 1]")?;
        check((0.0..=1.0).contains(&p.salt_ratio), "phi.salt_ratio: must be in [0, 1]")?;
        check_range(p.blur_sigma, "phi.blur_sigma")?;
        check(p.blur_sigma[0] >= 0.0, "phi.blur_sigma: sigma must be non-negative")?;
        check((0.0..=1.0).contains(&p.cutoff_max_area), "phi.cutoff_max_area: must be in [0, 1]")?;
        check_range(p.reflection_intensity, "phi.reflection_intensity")?;
        check(p.reflection_intensity[0] >= 0.0, "phi.reflection_intensity: must be non-negative")?;
        check_range(p.reflection_width, "phi.reflection_width")?;
        check(p.reflection_width[0] >= 0.0 && p.reflection_width[1] <= 1.0, "phi.reflection_width: must be within [0, 1]")?;
        check_range(p.hsv_hue_deg, "phi.hsv_hue_deg")?;
        check_range(p.hsv_sat, "phi.hsv_sat")?;
        check(p.hsv_sat[0] >= 0.0, "phi.hsv_sat: factors must be non-negative")?;
        check_range(p.hsv_val, "phi.hsv_val")?;
        check(p.hsv_val[0] >= 0.0, "phi.hsv_val: factors must be non-negative")?;
        Ok(())
    }
}

/// Apply a `key=value` override onto a config serialized as JSON. The key is
/// a dot-separated path; the value is parsed as a JSON literal, falling back
/// to a string. New keys cannot be invented, only existing ones changed.
pub fn apply_override(root: &mut serde_json::Value, key: &str, value_text: &str) -> Result<()> {
    let mut cursor = &mut *root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            CoreError::Config(format!("override `{key}`: `{}` is not a section", parts[..depth].join(".")))
        })?;
        cursor = map.get_mut(*part).ok_or_else(|| {
            CoreError::Config(format!("override `{key}`: no such field `{part}`"))
        })?;
    }
    let parsed: serde_json::Value = match serde_json::from_str(value_text) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(value_text.to_string()),
    };
    *cursor = parsed;
    Ok(())
}

//! Named experiment configurations.
//!
//! Each preset expands to a complete [`ExperimentConfig`] built from the
//! shared defaults, so two presets differ only on the axes they are named
//! for. The comparison tooling leans on that: benchmark tables stay honest
//! because everything except the advertised knob is held fixed.

use clap::ValueEnum;
use smoothrace_core::augment::PerturbationKind;
use smoothrace_core::config::{ExperimentConfig, TranslatorKind};

/// Steering penalty used by the reward-shaping baseline, per degree of
/// commanded change between consecutive steps.
const STEERING_PENALTY_PER_DEG: f64 = 0.003;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum Preset {
    /// Plain SAC, no smoothness terms.
    SacOnly,
    /// SAC with a reward penalty on steering changes instead of loss terms.
    SacSteeringPenalty,
    /// Temporal smoothness term only.
    SacTemporal,
    /// Spatial smoothness term only.
    SacSpatial,
    /// Both smoothness terms.
    SacCaps,
    /// Domain randomization on training observations.
    SacDr,
    /// Domain randomization plus both smoothness terms.
    SacDrCaps,
    /// Observation translator seam engaged (identity stand-in).
    SacTranslator,
    /// Translator seam plus both smoothness terms.
    SacTranslatorCaps,
    /// Base for the temporal-weight sweep: spatial term off.
    LambdaSweep,
    /// Base for the perturbation ablation: full similarity set enabled.
    SpatialAblation,
}

impl Preset {
    pub fn all() -> [Preset; 11] {
        [
            Preset::SacOnly,
            Preset::SacSteeringPenalty,
            Preset::SacTemporal,
            Preset::SacSpatial,
            Preset::SacCaps,
            Preset::SacDr,
            Preset::SacDrCaps,
            Preset::SacTranslator,
            Preset::SacTranslatorCaps,
            Preset::LambdaSweep,
            Preset::SpatialAblation,
        ]
    }

    /// The benchmark matrix: plain, domain-randomized, and translator-seamed
    /// observation paths, each with and without smoothness conditioning.
    pub const MODEL_SET: [Preset; 6] = [
        Preset::SacOnly,
        Preset::SacCaps,
        Preset::SacDr,
        Preset::SacDrCaps,
        Preset::SacTranslator,
        Preset::SacTranslatorCaps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SacOnly => "sac_only",
            Preset::SacSteeringPenalty => "sac_steering_penalty",
            Preset::SacTemporal => "sac_temporal",
            Preset::SacSpatial => "sac_spatial",
            Preset::SacCaps => "sac_caps",
            Preset::SacDr => "sac_dr",
            Preset::SacDrCaps => "sac_dr_caps",
            Preset::SacTranslator => "sac_translator",
            Preset::SacTranslatorCaps => "sac_translator_caps",
            Preset::LambdaSweep => "lambda_sweep",
            Preset::SpatialAblation => "spatial_ablation",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::all().into_iter().find(|p| p.name() == name)
    }

    pub fn config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.track = "bundled:default".into();
        let caps_on = |cfg: &mut ExperimentConfig| {
            cfg.caps.lambda_t = 1.0;
            cfg.caps.lambda_s = 1.0;
        };
        match self {
            Preset::SacOnly => {}
            Preset::SacSteeringPenalty => {
                cfg.reward.steering_penalty_per_deg = STEERING_PENALTY_PER_DEG;
            }
            Preset::SacTemporal => cfg.caps.lambda_t = 1.0,
            Preset::SacSpatial => cfg.caps.lambda_s = 1.0,
            Preset::SacCaps => caps_on(&mut cfg),
            Preset::SacDr => {
                cfg.phi.sim2real_enabled = PerturbationKind::transfer_set().to_vec();
            }
            Preset::SacDrCaps => {
                cfg.phi.sim2real_enabled = PerturbationKind::transfer_set().to_vec();
                caps_on(&mut cfg);
            }
            Preset::SacTranslator => cfg.translator = TranslatorKind::Identity,
            Preset::SacTranslatorCaps => {
                cfg.translator = TranslatorKind::Identity;
                caps_on(&mut cfg);
            }
            Preset::LambdaSweep => cfg.caps.lambda_t = 1.0,
            Preset::SpatialAblation => caps_on(&mut cfg),
        }
        cfg
    }
}

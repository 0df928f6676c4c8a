//! The racing environment.
//!
//! Ties the track, vehicle model, and renderer into an episodic control
//! loop: normalized `[steering, speed]` actions in, camera frames and
//! rewards out. Reward is dominated by progress along the track
//! centerline, with optional speed bonus and steering magnitude penalty
//! terms, and a one-off penalty when the car touches a wall, which also
//! ends the episode. Completing the configured number of laps ends the
//! episode successfully, and running out of steps times it out.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{sim2real_pipeline, ObsTranslator};
use crate::config::{ExperimentConfig, PerturbationConfig};
use crate::dynamics::{self, CarState};
use crate::obs::{FrameStack, Image};
use crate::render::Renderer;
use crate::track::Track;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Collision,
    LapComplete,
    Timeout,
}

#[derive(Clone, Debug)]
pub struct EnvStep {
    pub image: Image,
    pub reward: f64,
    pub done: Option<DoneReason>,
}

pub struct RacingEnv {
    track: Arc<Track>,
    renderer: Renderer,
    vehicle: crate::config::VehicleConfig,
    speed: crate::config::SpeedConfig,
    reward: crate::config::RewardConfig,
    episode: crate::config::EpisodeConfig,
    laps_target: u32,
    state: CarState,
    steps: u64,
    s_prev: f64,
    /// Signed distance traveled along the centerline this episode.
    travel: f64,
    /// Travel within the current lap, for arming the lap line.
    lap_travel: f64,
    laps: u32,
    finished: bool,
}

impl RacingEnv {
    pub fn new(track: Arc<Track>, cfg: &ExperimentConfig) -> RacingEnv {
        let laps_target = if cfg.episode.lap_count > 0 { cfg.episode.lap_count } else { track.lap_count };
        RacingEnv {
            renderer: Renderer::new(&cfg.observation, &cfg.camera),
            vehicle: cfg.vehicle.clone(),
            speed: cfg.speed.clone(),
            reward: cfg.reward.clone(),
            episode: cfg.episode.clone(),
            laps_target,
            state: CarState::at_rest(track.start_pose.position, track.start_pose.heading, cfg.speed.v_min),
            steps: 0,
            s_prev: 0.0,
            travel: 0.0,
            lap_travel: 0.0,
            laps: 0,
            finished: true,
            track,
        }
    }

    /// Place the car near the start line with uniform jitter and render the
    /// first frame. Draw order is longitudinal, lateral, heading.
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Image {
        let jm = self.episode.start_jitter_m;
        let jr = self.episode.start_jitter_rad;
        let along = rng.random_range(-jm..=jm);
        let lateral = rng.random_range(-jm..=jm);
        let dh = rng.random_range(-jr..=jr);
        let base = self.track.point_at(self.track.start_offset + along);
        let n = [-base.heading.sin(), base.heading.cos()];
        let position = [base.position[0] + lateral * n[0], base.position[1] + lateral * n[1]];
        self.state = CarState::at_rest(position, base.heading + dh, self.speed.v_min);
        self.steps = 0;
        self.s_prev = self.track.project(position).0;
        self.travel = 0.0;
        self.lap_travel = 0.0;
        self.laps = 0;
        self.finished = false;
        self.renderer.render(&self.track, &self.pose())
    }

    pub fn step(&mut self, action: [f64; 2]) -> EnvStep {
        assert!(!self.finished, "step called on a finished episode; reset first");
        let prev = self.state.position;
        self.state = dynamics::step(&self.state, action, &self.vehicle, &self.speed, self.episode.dt());
        self.steps += 1;

        let (s_new, _) = self.track.project(self.state.position);
        let half_lap = self.track.total_len / 2.0;
        let mut delta = s_new - self.s_prev;
        if delta > half_lap {
            delta -= self.track.total_len;
        } else if delta < -half_lap {
            delta += self.track.total_len;
        }
        self.s_prev = s_new;
        self.travel += delta;
        self.lap_travel += delta;

        let mut reward = self.reward.progress_scale * delta / self.track.total_len
            + self.reward.speed_bonus * self.state.speed / self.speed.v_max
            - self.reward.steering_penalty_per_deg * self.state.steering.to_degrees().abs();

        let mut done = None;
        if self.track.motion_hits_wall(prev, self.state.position) {
            reward -= self.reward.collision_penalty;
            done = Some(DoneReason::Collision);
        } else {
            if let Some(dir) = self.track.lap_line_crossing(prev, self.state.position) {
                let armed = self.lap_travel >= half_lap;
                if dir > 0.0 && armed {
                    self.laps += 1;
                    self.lap_travel -= self.track.total_len;
                    if self.laps >= self.laps_target {
                        done = Some(DoneReason::LapComplete);
                    }
                }
            }
            if done.is_none() && self.steps >= self.episode.max_steps {
                done = Some(DoneReason::Timeout);
            }
        }
        if done.is_some() {
            self.finished = true;
        }
        EnvStep { image: self.renderer.render(&self.track, &self.pose()), reward, done }
    }

    fn pose(&self) -> crate::track::Pose {
        crate::track::Pose { position: self.state.position, heading: self.state.heading }
    }

    pub fn state(&self) -> &CarState {
        &self.state
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn travel(&self) -> f64 {
        self.travel
    }

    pub fn laps_completed(&self) -> u32 {
        self.laps
    }

    pub fn elapsed_s(&self) -> f64 {
        self.steps as f64 * self.episode.dt()
    }
}

/// Observation shaping applied during training, on top of the raw render.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainAugment {
    /// Frames pass through untouched.
    None,
    /// Each frame runs the camera-variation pipeline with fresh draws.
    DomainRandomization,
}

/// Turns raw frames into the stacked observations the policy consumes.
///
/// Augmentation runs first (when enabled), then the translator maps the
/// frame into the policy's expected visual domain. The generator is only
/// consumed when augmentation is on, so plain runs are unaffected by it.
pub struct ObsPipeline {
    translator: Option<Box<dyn ObsTranslator>>,
    augment: TrainAugment,
    phi: PerturbationConfig,
    rng: ChaCha8Rng,
    stack: Option<FrameStack>,
}

impl ObsPipeline {
    pub fn new(
        translator: Option<Box<dyn ObsTranslator>>,
        augment: TrainAugment,
        phi: PerturbationConfig,
        rng: ChaCha8Rng,
    ) -> ObsPipeline {
        ObsPipeline { translator, augment, phi, rng, stack: None }
    }

    fn process(&mut self, img: Image) -> Image {
        let img = match self.augment {
            TrainAugment::None => img,
            TrainAugment::DomainRandomization => sim2real_pipeline(&self.phi, &img, &mut self.rng),
        };
        match &self.translator {
            Some(t) => t.translate(&img),
            None => img,
        }
    }

    pub fn reset(&mut self, img: Image) -> FrameStack {
        let frame = Arc::new(self.process(img));
        let stack = FrameStack::first(frame);
        self.stack = Some(stack.clone());
        stack
    }

    pub fn push(&mut self, img: Image) -> FrameStack {
        let frame = Arc::new(self.process(img));
        let stack = self.stack.as_ref().expect("push before reset").advance(frame);
        self.stack = Some(stack.clone());
        stack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::rng::{stream, StreamId};
    use approx::assert_relative_eq;

    fn make_env(cfg: &ExperimentConfig) -> RacingEnv {
        let track = Arc::new(Track::bundled_default());
        RacingEnv::new(track, cfg)
    }

    /// Follows the centerline by steering at a point a fixed distance ahead.
    fn pursuit_action(env: &RacingEnv, lookahead: f64, speed_cmd: f64) -> [f64; 2] {
        let (s, _) = env.track().project(env.state().position);
        let target = env.track().point_at(s + lookahead).position;
        let dx = target[0] - env.state().position[0];
        let dy = target[1] - env.state().position[1];
        let (sin_h, cos_h) = env.state().heading.sin_cos();
        let local_x = dx * cos_h + dy * sin_h;
        let local_y = -dx * sin_h + dy * cos_h;
        let dist = (local_x * local_x + local_y * local_y).sqrt().max(1e-6);
        let alpha = local_y.atan2(local_x);
        let wheelbase = 0.26;
        let steer = (2.0 * wheelbase * alpha.sin() / dist).atan();
        let limit = 25.8_f64.to_radians();
        [(steer / limit).clamp(-1.0, 1.0), speed_cmd]
    }

    #[test]
    fn scripted_follower_completes_a_lap() {
        let mut cfg = ExperimentConfig::default();
        cfg.episode.max_steps = 3000;
        let mut env = make_env(&cfg);
        let mut rng = stream(11, StreamId::EnvReset);
        env.reset(&mut rng);
        let mut total_progress_reward = 0.0;
        let mut outcome = None;
        for _ in 0..3000 {
            let action = pursuit_action(&env, 0.5, 0.0);
            let step = env.step(action);
            total_progress_reward += step.reward;
            if let Some(reason) = step.done {
                outcome = Some(reason);
                break;
            }
        }
        assert_eq!(outcome, Some(DoneReason::LapComplete));
        assert_eq!(env.laps_completed(), 1);
        let lap_len = env.track().total_len;
        assert!((env.travel() - lap_len).abs() < 0.2, "travel {}", env.travel());
        // Only the progress term is active, so the return telescopes.
        assert_relative_eq!(
            total_progress_reward,
            100.0 * env.travel() / lap_len,
            max_relative = 1e-9
        );
        assert!(env.elapsed_s() > 0.0);
    }

    #[test]
    fn driving_straight_into_the_corner_wall_collides() {
        let cfg = ExperimentConfig::default();
        let mut env = make_env(&cfg);
        let mut rng = stream(3, StreamId::EnvReset);
        env.reset(&mut rng);
        let mut last = None;
        for _ in 0..400 {
            let step = env.step([0.0, 1.0]);
            if step.done.is_some() {
                last = Some((step.reward, step.done.unwrap()));
                break;
            }
        }
        let (reward, reason) = last.expect("the wall is less than 400 steps away");
        assert_eq!(reason, DoneReason::Collision);
        assert!(reward < 0.0, "collision step reward {reward}");
    }

    #[test]
    fn slow_driving_times_out() {
        let mut cfg = ExperimentConfig::default();
        cfg.episode.max_steps = 10;
        let mut env = make_env(&cfg);
        let mut rng = stream(5, StreamId::EnvReset);
        env.reset(&mut rng);
        let mut reason = None;
        for _ in 0..10 {
            let step = env.step([0.0, -1.0]);
            reason = step.done;
        }
        assert_eq!(reason, Some(DoneReason::Timeout));
    }

    #[test]
    fn reset_jitter_stays_in_bounds_and_varies() {
        let cfg = ExperimentConfig::default();
        let mut env = make_env(&cfg);
        let mut rng = stream(7, StreamId::EnvReset);
        let start = env.track().start_pose;
        let mut positions = Vec::new();
        for _ in 0..100 {
            env.reset(&mut rng);
            let p = env.state().position;
            let d = ((p[0] - start.position[0]).powi(2) + (p[1] - start.position[1]).powi(2)).sqrt();
            assert!(d <= 0.05 * 2.0_f64.sqrt() + 1e-9, "offset {d}");
            assert!((env.state().heading - start.heading).abs() <= 0.05 + 1e-12);
            assert!(env.track().contains(p));
            positions.push(p);
        }
        positions.dedup();
        assert!(positions.len() > 90);
    }

    #[test]
    fn crossing_the_line_right_after_reset_counts_no_lap() {
        let mut cfg = ExperimentConfig::default();
        cfg.episode.start_jitter_m = 0.05;
        let mut env = make_env(&cfg);
        let mut rng = stream(2, StreamId::EnvReset);
        for _ in 0..20 {
            env.reset(&mut rng);
            for _ in 0..5 {
                let step = env.step([0.0, 0.0]);
                assert!(step.done.is_none());
            }
            assert_eq!(env.laps_completed(), 0);
        }
    }

    #[test]
    fn episodes_replay_identically_for_the_same_seed() {
        let cfg = ExperimentConfig::default();
        let run = |seed: u64| {
            let mut env = make_env(&cfg);
            let mut rng = stream(seed, StreamId::EnvReset);
            env.reset(&mut rng);
            let mut states = Vec::new();
            for i in 0..200 {
                let a = [(i as f64 * 0.1).sin() * 0.3, 0.0];
                let step = env.step(a);
                states.push((env.state().position, env.state().heading, step.reward));
                if step.done.is_some() {
                    break;
                }
            }
            states
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn reward_terms_follow_the_configuration() {
        let mut cfg = ExperimentConfig::default();
        cfg.reward.progress_scale = 0.0;
        cfg.reward.speed_bonus = 1.0;
        cfg.reward.steering_penalty_per_deg = 0.1;
        let mut env = make_env(&cfg);
        let mut rng = stream(9, StreamId::EnvReset);
        env.reset(&mut rng);
        let step = env.step([0.4, 0.2]);
        let expected = env.state().speed / cfg.speed.v_max
            - 0.1 * env.state().steering.to_degrees().abs();
        assert_relative_eq!(step.reward, expected, epsilon = 1e-12);
    }

    #[test]
    fn pipeline_translator_and_augment_compose() {
        let cfg = ExperimentConfig::default();
        let img = Image::filled(4, 4, [10, 200, 30]);
        let mut plain = ObsPipeline::new(None, TrainAugment::None, cfg.phi.clone(), stream(1, StreamId::ActorObs));
        let stack = plain.reset(img.clone());
        assert_eq!(stack.cur.data, img.data);

        let inv = crate::augment::make_translator(crate::config::TranslatorKind::Invert);
        let mut inverted =
            ObsPipeline::new(inv, TrainAugment::None, cfg.phi.clone(), stream(1, StreamId::ActorObs));
        let stack = inverted.reset(img.clone());
        assert_eq!(stack.cur.pixel(0, 0), [245, 55, 225]);

        let mut dr = ObsPipeline::new(
            None,
            TrainAugment::DomainRandomization,
            cfg.phi.clone(),
            stream(1, StreamId::ActorObs),
        );
        let a = dr.reset(img.clone());
        let b = dr.push(img.clone());
        assert_eq!(a.cur.data.len(), b.cur.data.len());
    }
}

//! Training and evaluation drivers.
//!
//! Training wires actors, replay, and the learner together in one of two
//! modes. Deterministic mode runs a single actor and the learner in strict
//! alternation on one thread, so a seed pins the entire run bit for bit;
//! logged wall-clock values are zeroed there because elapsed time is the one
//! quantity that cannot be reproduced. Threaded mode runs several actors
//! against a shared replay buffer while the learner updates concurrently,
//! throttling both sides to hold the configured update-to-step ratio.
//!
//! Both modes leave the same artifacts in the output directory: the resolved
//! config, an episode log and a training log (one JSON record per line), and
//! policy checkpoints at the start, on a fixed update cadence, and at the
//! end.

use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::make_translator;
use crate::config::ExperimentConfig;
use crate::env::{DoneReason, ObsPipeline, RacingEnv, TrainAugment};
use crate::error::{CoreError, Result};
use crate::nn::{self, save_params, PolicyNet};
use crate::obs::FrameStack;
use crate::replay::{GlobalBuffer, LocalBuffer};
use crate::rng::{stream, worker_stream, StreamId};
use crate::sac::Learner;
use crate::smoothness::EpisodeRecord;
use crate::track::Track;

/// One learner update.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainRecord {
    pub update: u64,
    /// Environment steps collected when the update ran.
    pub step: u64,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub l_temporal: f64,
    pub l_spatial: f64,
    pub alpha: f64,
    pub total_policy_objective: f64,
    /// Zero in deterministic mode.
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub out_dir: PathBuf,
}

fn training_augment(cfg: &ExperimentConfig) -> TrainAugment {
    if cfg.phi.sim2real_enabled.is_empty() {
        TrainAugment::None
    } else {
        TrainAugment::DomainRandomization
    }
}

/// One environment worker: env, observation pipeline, and n-step assembly.
struct Actor {
    id: usize,
    env: RacingEnv,
    pipeline: ObsPipeline,
    local: LocalBuffer,
    rng_reset: ChaCha8Rng,
    rng_policy: ChaCha8Rng,
    stack: FrameStack,
    episode_return: f64,
    episodes_done: u64,
}

/// What one actor step produced, beyond transitions in the local buffer.
struct StepOutcome {
    finished: Option<EpisodeRecord>,
}

impl Actor {
    fn new(cfg: &ExperimentConfig, track: Arc<Track>, worker: usize) -> Actor {
        let mut env = RacingEnv::new(track, cfg);
        let mut pipeline = ObsPipeline::new(
            make_translator(cfg.translator),
            training_augment(cfg),
            cfg.phi.clone(),
            worker_stream(cfg.run.seed, StreamId::ActorObs, worker as u64),
        );
        let mut rng_reset = worker_stream(cfg.run.seed, StreamId::EnvReset, worker as u64);
        let first = env.reset(&mut rng_reset);
        let stack = pipeline.reset(first);
        Actor {
            id: worker,
            env,
            pipeline,
            local: LocalBuffer::new(cfg.sac.n_step, cfg.sac.gamma, &cfg.replay),
            rng_reset,
            rng_policy: worker_stream(cfg.run.seed, StreamId::ActorPolicy, worker as u64),
            stack,
            episode_return: 0.0,
            episodes_done: 0,
        }
    }

    /// Act once with the given policy snapshot and advance the episode.
    fn step_once(&mut self, policy: &PolicyNet) -> StepOutcome {
        let x = self.stack.to_input_f64();
        let (out, _) = policy.forward(&x);
        let action = nn::sample(&out.mean, &out.log_std, &mut self.rng_policy).action;
        let step = self.env.step(action);
        self.episode_return += step.reward;
        self.local.push_step(self.stack.clone(), action, step.reward);

        match step.done {
            None => {
                self.stack = self.pipeline.push(step.image);
                StepOutcome { finished: None }
            }
            Some(reason) => {
                let final_stack = self.pipeline.push(step.image);
                self.local.finish_episode(final_stack, reason);
                let laps = self.env.laps_completed();
                let record = EpisodeRecord {
                    actor_id: self.id,
                    episode_index: self.episodes_done,
                    steps: self.env.steps(),
                    ret: self.episode_return,
                    done_reason: reason,
                    lap_time_s: (reason == DoneReason::LapComplete && laps > 0)
                        .then(|| self.env.elapsed_s() / laps as f64),
                };
                self.episodes_done += 1;
                self.episode_return = 0.0;
                let first = self.env.reset(&mut self.rng_reset);
                self.stack = self.pipeline.reset(first);
                StepOutcome { finished: Some(record) }
            }
        }
    }
}

struct RunPaths {
    out: PathBuf,
}

impl RunPaths {
    fn prepare(out: &Path) -> Result<RunPaths> {
        fs::create_dir_all(out.join("checkpoints"))?;
        Ok(RunPaths { out: out.to_path_buf() })
    }

    fn config(&self) -> PathBuf {
        self.out.join("config.json")
    }

    fn episodes(&self) -> PathBuf {
        self.out.join("episodes.jsonl")
    }

    fn training(&self) -> PathBuf {
        self.out.join("training.jsonl")
    }

    fn checkpoint(&self, name: &str) -> PathBuf {
        self.out.join("checkpoints").join(format!("policy_{name}.bin"))
    }
}

fn jsonl_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_record<T: Serialize>(w: &mut impl IoWrite, record: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn load_track(cfg: &ExperimentConfig) -> Result<Track> {
    Track::load_spec(&cfg.track.to_string_lossy())
}

/// Run training as configured, writing all artifacts under `out`.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let paths = RunPaths::prepare(out)?;
    fs::write(paths.config(), cfg.to_json_pretty())?;
    let track = Arc::new(load_track(cfg)?);
    let learner = Learner::new(cfg, cfg.run.seed)?;
    save_params(&paths.checkpoint("initial"), &learner.policy)?;

    let outcome = if cfg.run.deterministic {
        train_deterministic(cfg, track, learner, &paths)?
    } else {
        train_threaded(cfg, track, learner, &paths)?
    };
    Ok(outcome)
}

fn train_deterministic(
    cfg: &ExperimentConfig,
    track: Arc<Track>,
    mut learner: Learner,
    paths: &RunPaths,
) -> Result<TrainOutcome> {
    let mut episodes_log = jsonl_writer(&paths.episodes())?;
    let mut training_log = jsonl_writer(&paths.training())?;
    let mut actor = Actor::new(cfg, track, 0);
    let mut global = GlobalBuffer::new(&cfg.replay);
    let mut rng_sample = stream(cfg.run.seed, StreamId::LearnerSample);
    let mut credit = 0.0;
    let mut episodes = 0;

    for step in 1..=cfg.run.step_budget {
        let outcome = actor.step_once(&learner.policy);
        let episode_ended = outcome.finished.is_some();
        if let Some(record) = outcome.finished {
            write_record(&mut episodes_log, &record)?;
            episodes += 1;
        }
        if episode_ended || actor.local.should_flush() {
            global.insert_batch(actor.local.drain());
        }
        if global.len() >= cfg.replay.warmup {
            credit += cfg.run.updates_per_step;
            while credit >= 1.0 {
                credit -= 1.0;
                let batch =
                    global.sample(cfg.sac.batch_size, cfg.replay.priority_beta, &mut rng_sample);
                let (report, tds) = learner.update(&batch);
                global.update_priorities(&batch.slots, &batch.ids, &tds);
                write_record(
                    &mut training_log,
                    &TrainRecord {
                        update: learner.updates,
                        step,
                        critic_loss: report.critic_loss,
                        policy_loss: report.policy_loss,
                        l_temporal: report.l_temporal,
                        l_spatial: report.l_spatial,
                        alpha: report.alpha,
                        total_policy_objective: report.total_policy_objective,
                        wall_clock_s: 0.0,
                    },
                )?;
                if learner.updates % cfg.run.checkpoint_every == 0 {
                    save_params(&paths.checkpoint(&format!("{:06}", learner.updates)), &learner.policy)?;
                }
            }
        }
    }
    episodes_log.flush()?;
    training_log.flush()?;
    save_params(&paths.checkpoint("final"), &learner.policy)?;
    Ok(TrainOutcome {
        steps: cfg.run.step_budget,
        updates: learner.updates,
        episodes,
        out_dir: paths.out.clone(),
    })
}

fn train_threaded(
    cfg: &ExperimentConfig,
    track: Arc<Track>,
    mut learner: Learner,
    paths: &RunPaths,
) -> Result<TrainOutcome> {
    let mut episodes_log = jsonl_writer(&paths.episodes())?;
    let mut training_log = jsonl_writer(&paths.training())?;
    let global = Arc::new(Mutex::new(GlobalBuffer::new(&cfg.replay)));
    let snapshot = Arc::new(RwLock::new(learner.policy.clone()));
    let snapshot_version = Arc::new(AtomicU64::new(0));
    let steps_taken = Arc::new(AtomicU64::new(0));
    let updates_done = Arc::new(AtomicU64::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let (episode_tx, episode_rx) = mpsc::channel::<EpisodeRecord>();
    let started = Instant::now();

    let warmup_steps = cfg.replay.warmup as u64;
    let ups = cfg.run.updates_per_step;
    let target_updates = |steps: u64| -> u64 {
        (steps.saturating_sub(warmup_steps) as f64 * ups).floor() as u64
    };
    // How far collection may run ahead of the update schedule before actors
    // pause to let the learner catch up.
    let max_ahead = (cfg.replay.flush_threshold as u64).max(500);

    let mut episodes = 0u64;
    let mut rng_sample = stream(cfg.run.seed, StreamId::LearnerSample);

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for worker in 0..cfg.run.workers {
            let track = track.clone();
            let global = global.clone();
            let snapshot = snapshot.clone();
            let snapshot_version = snapshot_version.clone();
            let steps_taken = steps_taken.clone();
            let updates_done = updates_done.clone();
            let stop = stop.clone();
            let episode_tx = episode_tx.clone();
            handles.push(scope.spawn(move || {
                let mut actor = Actor::new(cfg, track, worker);
                let mut policy = snapshot.read().expect("snapshot lock").clone();
                let mut seen_version = snapshot_version.load(Ordering::Acquire);
                loop {
                    if stop.load(Ordering::Acquire) {
                        break;
                    }
                    let step_index = steps_taken.fetch_add(1, Ordering::AcqRel) + 1;
                    if step_index > cfg.run.step_budget {
                        stop.store(true, Ordering::Release);
                        break;
                    }
                    let behind = target_updates(step_index)
                        .saturating_sub(updates_done.load(Ordering::Acquire));
                    if behind as f64 / ups > max_ahead as f64 {
                        std::thread::sleep(std::time::Duration::from_micros(200));
                    }
                    let version = snapshot_version.load(Ordering::Acquire);
                    if version != seen_version {
                        policy = snapshot.read().expect("snapshot lock").clone();
                        seen_version = version;
                    }
                    let outcome = actor.step_once(&policy);
                    let ended = outcome.finished.is_some();
                    if let Some(record) = outcome.finished {
                        let _ = episode_tx.send(record);
                    }
                    if ended || actor.local.should_flush() {
                        let drained = actor.local.drain();
                        global.lock().expect("replay lock").insert_batch(drained);
                    }
                }
            }));
        }
        drop(episode_tx);

        loop {
            for record in episode_rx.try_iter() {
                write_record(&mut episodes_log, &record)?;
                episodes += 1;
            }
            let steps = steps_taken.load(Ordering::Acquire).min(cfg.run.step_budget);
            let stopped = stop.load(Ordering::Acquire);
            let target = target_updates(steps);
            let done = updates_done.load(Ordering::Acquire);
            if done >= target {
                if stopped && handles.iter().all(|h| h.is_finished()) {
                    break;
                }
                std::thread::sleep(std::time::Duration::from_micros(200));
                continue;
            }
            let batch = {
                let buffer = global.lock().expect("replay lock");
                if buffer.len() < cfg.sac.batch_size {
                    drop(buffer);
                    if stopped && handles.iter().all(|h| h.is_finished()) {
                        break;
                    }
                    std::thread::sleep(std::time::Duration::from_micros(200));
                    continue;
                }
                buffer.sample(cfg.sac.batch_size, cfg.replay.priority_beta, &mut rng_sample)
            };
            let (report, tds) = learner.update(&batch);
            global
                .lock()
                .expect("replay lock")
                .update_priorities(&batch.slots, &batch.ids, &tds);
            let update = learner.updates;
            updates_done.store(update, Ordering::Release);
            write_record(
                &mut training_log,
                &TrainRecord {
                    update,
                    step: steps,
                    critic_loss: report.critic_loss,
                    policy_loss: report.policy_loss,
                    l_temporal: report.l_temporal,
                    l_spatial: report.l_spatial,
                    alpha: report.alpha,
                    total_policy_objective: report.total_policy_objective,
                    wall_clock_s: started.elapsed().as_secs_f64(),
                },
            )?;
            if update % cfg.run.snapshot_every == 0 {
                *snapshot.write().expect("snapshot lock") = learner.policy.clone();
                snapshot_version.fetch_add(1, Ordering::AcqRel);
            }
            if update % cfg.run.checkpoint_every == 0 {
                save_params(&paths.checkpoint(&format!("{update:06}")), &learner.policy)?;
            }
        }

        for handle in handles {
            if let Err(panic) = handle.join() {
                std::panic::resume_unwind(panic);
            }
        }
        Ok(())
    })?;

    for record in episode_rx.try_iter() {
        write_record(&mut episodes_log, &record)?;
        episodes += 1;
    }
    episodes_log.flush()?;
    training_log.flush()?;
    save_params(&paths.checkpoint("final"), &learner.policy)?;
    Ok(TrainOutcome {
        steps: steps_taken.load(Ordering::Acquire).min(cfg.run.step_budget),
        updates: learner.updates,
        episodes,
        out_dir: paths.out.clone(),
    })
}

/// One evaluation episode driven by the deterministic policy.
#[derive(Clone, Debug, Serialize)]
pub struct EvalEpisode {
    pub index: usize,
    pub steps: u64,
    #[serde(rename = "return")]
    pub ep_return: f64,
    pub done_reason: DoneReason,
    pub lap_time_s: Option<f64>,
    /// Commanded normalized steering per step.
    #[serde(skip)]
    pub steering: Vec<f64>,
    /// Commanded normalized speed per step.
    #[serde(skip)]
    pub speed_cmd: Vec<f64>,
}

/// Drive evaluation episodes with greedy actions and record the command
/// traces. Observation randomization is off; the translator stays as
/// configured since it is part of the deployed observation path.
pub fn evaluate(
    cfg: &ExperimentConfig,
    policy: &PolicyNet,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EvalEpisode>> {
    let track = Arc::new(load_track(cfg)?);
    let mut env = RacingEnv::new(track, cfg);
    let mut pipeline = ObsPipeline::new(
        make_translator(cfg.translator),
        TrainAugment::None,
        cfg.phi.clone(),
        stream(seed, StreamId::Eval),
    );
    let mut rng_reset = stream(seed, StreamId::Eval);
    let mut out = Vec::with_capacity(episodes);
    for index in 0..episodes {
        let mut stack = pipeline.reset(env.reset(&mut rng_reset));
        let mut steering = Vec::new();
        let mut speed_cmd = Vec::new();
        let mut ep_return = 0.0;
        let reason = loop {
            let (pol_out, _) = policy.forward(&stack.to_input_f64());
            let action = PolicyNet::det_action(&pol_out);
            steering.push(action[0]);
            speed_cmd.push(action[1]);
            let step = env.step(action);
            ep_return += step.reward;
            if let Some(reason) = step.done {
                break reason;
            }
            stack = pipeline.push(step.image);
        };
        let laps = env.laps_completed();
        out.push(EvalEpisode {
            index,
            steps: env.steps(),
            ep_return,
            done_reason: reason,
            lap_time_s: (reason == DoneReason::LapComplete && laps > 0)
                .then(|| env.elapsed_s() / laps as f64),
            steering,
            speed_cmd,
        });
    }
    Ok(out)
}

/// Write one episode's command trace as `t,steering,speed` rows.
pub fn write_trace_csv(path: &Path, ep: &EvalEpisode, dt: f64) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,steering,speed")?;
    for (i, (s, v)) in ep.steering.iter().zip(ep.speed_cmd.iter()).enumerate() {
        writeln!(w, "{},{s},{v}", i as f64 * dt)?;
    }
    w.flush()?;
    Ok(())
}

/// Load a policy checkpoint with the architecture the config describes.
pub fn load_policy(cfg: &ExperimentConfig, path: &Path) -> Result<PolicyNet> {
    let mut init = stream(cfg.run.seed, StreamId::NetInit);
    let mut policy =
        PolicyNet::new(&cfg.net, 6, cfg.observation.height, cfg.observation.width, &mut init)?;
    nn::load_params(path, &mut policy)?;
    Ok(policy)
}

/// Parse a JSONL file into records, naming the offending line on failure.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| CoreError::LogParse {
            line: i + 1,
            reason: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ConvSpec, NetConfig};

    fn tiny_cfg(seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.track = PathBuf::from("bundled:default");
        cfg.observation.height = 8;
        cfg.observation.width = 10;
        cfg.net = NetConfig {
            conv: vec![ConvSpec { kernel: 3, stride: 2, channels: 3 }],
            hidden: 8,
        };
        cfg.sac.batch_size = 8;
        cfg.replay.warmup = 16;
        cfg.replay.flush_threshold = 8;
        cfg.episode.max_steps = 25;
        cfg.run.seed = seed;
        cfg.run.workers = 1;
        cfg.run.deterministic = true;
        cfg.run.step_budget = 140;
        cfg.run.updates_per_step = 0.25;
        cfg.run.checkpoint_every = 8;
        cfg.run.snapshot_every = 4;
        cfg
    }

    fn temp_out(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "smoothrace-runner-{tag}-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn deterministic_runs_repeat_bit_for_bit() {
        let cfg = tiny_cfg(5);
        let out_a = temp_out("det-a");
        let out_b = temp_out("det-b");
        let a = train(&cfg, &out_a).unwrap();
        let b = train(&cfg, &out_b).unwrap();
        assert!(a.updates > 0, "no updates ran");
        assert!(a.episodes > 0, "no episodes finished");
        assert_eq!(a.updates, b.updates);
        for name in ["episodes.jsonl", "training.jsonl", "checkpoints/policy_final.bin"] {
            let fa = fs::read(out_a.join(name)).unwrap();
            let fb = fs::read(out_b.join(name)).unwrap();
            assert_eq!(fa, fb, "{name} differs between identical runs");
        }
        let records: Vec<TrainRecord> = read_jsonl(&out_a.join("training.jsonl")).unwrap();
        assert_eq!(records.len() as u64, a.updates);
        assert!(records.iter().all(|r| r.wall_clock_s == 0.0));
        let _ = fs::remove_dir_all(out_a);
        let _ = fs::remove_dir_all(out_b);
    }

    #[test]
    fn threaded_run_collects_from_every_worker() {
        let mut cfg = tiny_cfg(9);
        cfg.run.deterministic = false;
        cfg.run.workers = 3;
        cfg.run.step_budget = 600;
        cfg.episode.max_steps = 20;
        let out = temp_out("threaded");
        let outcome = train(&cfg, &out).unwrap();
        assert!(outcome.updates > 0, "no updates ran");
        let episodes: Vec<EpisodeRecord> = read_jsonl(&out.join("episodes.jsonl")).unwrap();
        let mut actors: Vec<usize> = episodes.iter().map(|e| e.actor_id).collect();
        actors.sort_unstable();
        actors.dedup();
        assert_eq!(actors, vec![0, 1, 2], "all workers should finish episodes");
        let records: Vec<TrainRecord> = read_jsonl(&out.join("training.jsonl")).unwrap();
        assert_eq!(records.len() as u64, outcome.updates);
        assert!(records.iter().any(|r| r.wall_clock_s > 0.0));
        let _ = fs::remove_dir_all(out);
    }

    #[test]
    fn zero_budget_still_writes_checkpoints_and_empty_logs() {
        let mut cfg = tiny_cfg(2);
        cfg.run.step_budget = 0;
        let out = temp_out("zero");
        let outcome = train(&cfg, &out).unwrap();
        assert_eq!(outcome.updates, 0);
        assert_eq!(outcome.episodes, 0);
        assert!(out.join("checkpoints/policy_initial.bin").exists());
        assert!(out.join("checkpoints/policy_final.bin").exists());
        assert_eq!(fs::read_to_string(out.join("training.jsonl")).unwrap(), "");
        // Nothing trained, so initial and final parameters agree.
        let initial = fs::read(out.join("checkpoints/policy_initial.bin")).unwrap();
        let fin = fs::read(out.join("checkpoints/policy_final.bin")).unwrap();
        assert_eq!(initial, fin);
        let _ = fs::remove_dir_all(out);
    }

    #[test]
    fn evaluation_traces_match_step_counts_and_rerun_identically() {
        let cfg = tiny_cfg(4);
        let mut init = stream(cfg.run.seed, StreamId::NetInit);
        let policy =
            PolicyNet::new(&cfg.net, 6, cfg.observation.height, cfg.observation.width, &mut init)
                .unwrap();
        let a = evaluate(&cfg, &policy, 2, 31).unwrap();
        let b = evaluate(&cfg, &policy, 2, 31).unwrap();
        assert_eq!(a.len(), 2);
        for (ea, eb) in a.iter().zip(b.iter()) {
            assert_eq!(ea.steps as usize, ea.steering.len());
            assert_eq!(ea.steering, eb.steering);
            assert_eq!(ea.ep_return, eb.ep_return);
        }

        let path = temp_out("trace").with_extension("csv");
        write_trace_csv(&path, &a[0], 1.0 / 30.0).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,steering,speed"));
        assert_eq!(lines.count() as u64, a[0].steps);
        let _ = fs::remove_file(path);
    }

    #[test]
    fn checkpoints_reload_into_the_evaluator() {
        let cfg = tiny_cfg(6);
        let out = temp_out("reload");
        train(&cfg, &out).unwrap();
        let policy = load_policy(&cfg, &out.join("checkpoints/policy_final.bin")).unwrap();
        let eps = evaluate(&cfg, &policy, 1, 7).unwrap();
        assert_eq!(eps.len(), 1);
        let _ = fs::remove_dir_all(out);
    }
}

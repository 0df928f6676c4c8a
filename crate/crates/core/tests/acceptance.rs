//! Release gate for the numeric core.
//!
//! Each test covers one item of the acceptance checklist and prints a
//! single `acceptance NN <label>: PASS|FAIL` line (visible with
//! `--nocapture`, or on failure). The checks pin analytic gradients to
//! central differences, the fast spectrum to a naive DFT, the training
//! objective to its reported loss terms, and the replay and aggregation
//! arithmetic to hand-computable cases. Tolerances are part of the
//! contract; loosening one is a behavior change, not a cleanup.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use smoothrace_core::augment::{sample_params, Perturbation, PerturbationKind};
use smoothrace_core::config::{ConvSpec, ExperimentConfig, PerturbationConfig, ReplayConfig};
use smoothrace_core::env::DoneReason;
use smoothrace_core::nn::{
    daction_dlogstd, daction_dmean, dlogp_dlogstd, dlogp_dmean, log_prob_from_u, CriticNet,
    ParamNet, PolicyNet, ACTION_DIM,
};
use smoothrace_core::obs::{FrameStack, Image};
use smoothrace_core::replay::{GlobalBuffer, LocalBuffer, SampleBatch, Transition};
use smoothrace_core::rng::{stream, StreamId};
use smoothrace_core::sac::{action_distance, mean_action_distance, Learner};
use smoothrace_core::smoothness::{
    aggregate_runs, amplitude_spectrum, smoothness_value, EpisodeRecord,
};

fn verdict(tag: &str, pass: bool) {
    println!("acceptance {tag}: {}", if pass { "PASS" } else { "FAIL" });
}

/// Relative error with a floor on the denominator, so finite-difference
/// roundoff on near-zero gradients is not mistaken for relative error.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

// ---------------------------------------------------------------- gradients

fn random_image_input(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn policy_fd_max_err(net: &PolicyNet, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let c_mean: [f64; ACTION_DIM] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
    let c_ls: [f64; ACTION_DIM] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
    let loss = |n: &PolicyNet| -> f64 {
        let (out, _) = n.forward(x);
        (0..ACTION_DIM).map(|d| c_mean[d] * out.mean[d] + c_ls[d] * out.log_std[d]).sum()
    };

    let mut net = net.clone();
    let (_, cache) = net.forward(x);
    net.zero_grads();
    net.backward(&cache, c_mean, c_ls);
    let grads: Vec<Vec<f64>> = net.grads().iter().map(|g| g.to_vec()).collect();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for pi in 0..grads.len() {
        for j in 0..grads[pi].len() {
            let mut plus = net.clone();
            plus.params_mut()[pi][j] += h;
            let mut minus = net.clone();
            minus.params_mut()[pi][j] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(grads[pi][j], fd));
        }
    }
    worst
}

fn critic_fd_max_err(net: &CriticNet, x: &[f64], a: &[f64; ACTION_DIM]) -> f64 {
    let mut net = net.clone();
    let (_, cache) = net.forward(x, a);
    net.zero_grads();
    let da = net.backward(&cache, 1.0);
    let grads: Vec<Vec<f64>> = net.grads().iter().map(|g| g.to_vec()).collect();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for pi in 0..grads.len() {
        for j in 0..grads[pi].len() {
            let mut plus = net.clone();
            plus.params_mut()[pi][j] += h;
            let mut minus = net.clone();
            minus.params_mut()[pi][j] -= h;
            let fd = (plus.forward(x, a).0 - minus.forward(x, a).0) / (2.0 * h);
            worst = worst.max(rel_err(grads[pi][j], fd));
        }
    }
    for d in 0..ACTION_DIM {
        let mut ap = *a;
        ap[d] += h;
        let mut am = *a;
        am[d] -= h;
        let fd = (net.forward(x, &ap).0 - net.forward(x, &am).0) / (2.0 * h);
        worst = worst.max(rel_err(da[d], fd));
    }
    worst
}

fn gauss_fd_max_err(rng: &mut ChaCha8Rng) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mean: [f64; 2] = [rng.random_range(-1.5..=1.5), rng.random_range(-1.5..=1.5)];
        let log_std: [f64; 2] = [rng.random_range(-2.0..=0.5), rng.random_range(-2.0..=0.5)];
        let eps: [f64; 2] = [rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0)];
        let lp = |m: &[f64; 2], ls: &[f64; 2]| -> f64 {
            let u = [m[0] + ls[0].exp() * eps[0], m[1] + ls[1].exp() * eps[1]];
            log_prob_from_u(m, ls, &u)
        };
        let act = |m: f64, ls: f64| (m + ls.exp() * eps[0]).tanh();
        for d in 0..2 {
            let u_d = mean[d] + log_std[d].exp() * eps[d];
            let mut mp = mean;
            mp[d] += h;
            let mut mm = mean;
            mm[d] -= h;
            let fd = (lp(&mp, &log_std) - lp(&mm, &log_std)) / (2.0 * h);
            worst = worst.max(rel_err(dlogp_dmean(u_d), fd));

            let mut lsp = log_std;
            lsp[d] += h;
            let mut lsm = log_std;
            lsm[d] -= h;
            let fd = (lp(&mean, &lsp) - lp(&mean, &lsm)) / (2.0 * h);
            worst = worst.max(rel_err(dlogp_dlogstd(u_d, log_std[d].exp(), eps[d]), fd));
        }
        let a = act(mean[0], log_std[0]);
        let fd = (act(mean[0] + h, log_std[0]) - act(mean[0] - h, log_std[0])) / (2.0 * h);
        worst = worst.max(rel_err(daction_dmean(a), fd));
        let fd = (act(mean[0], log_std[0] + h) - act(mean[0], log_std[0] - h)) / (2.0 * h);
        worst = worst.max(rel_err(daction_dlogstd(a, log_std[0].exp(), eps[0]), fd));
    }
    worst
}

#[test]
fn a01_analytic_gradients_match_central_differences() {
    let shapes = [
        (2usize, 7usize, 9usize, vec![ConvSpec { kernel: 3, stride: 2, channels: 3 }], 5usize),
        (
            3,
            9,
            11,
            vec![
                ConvSpec { kernel: 3, stride: 2, channels: 3 },
                ConvSpec { kernel: 2, stride: 1, channels: 2 },
            ],
            6,
        ),
        (6, 8, 10, vec![ConvSpec { kernel: 4, stride: 2, channels: 4 }], 8),
    ];
    let mut worst = 0.0f64;
    for (case, (in_c, h, w, conv, hidden)) in shapes.into_iter().enumerate() {
        let cfg = smoothrace_core::config::NetConfig { conv, hidden };
        let mut rng = stream(1000 + case as u64, StreamId::NetInit);
        let policy = PolicyNet::new(&cfg, in_c, h, w, &mut rng).unwrap();
        let critic = CriticNet::new(&cfg, in_c, h, w, &mut rng).unwrap();
        let x = random_image_input(in_c * h * w, &mut rng);
        let a = [rng.random_range(-0.9..=0.9), rng.random_range(-0.9..=0.9)];
        worst = worst.max(policy_fd_max_err(&policy, &x, &mut rng));
        worst = worst.max(critic_fd_max_err(&critic, &x, &a));
    }
    let mut rng = stream(1099, StreamId::NetInit);
    worst = worst.max(gauss_fd_max_err(&mut rng));

    let pass = worst <= 1e-4;
    verdict("01 analytic gradients vs central differences", pass);
    assert!(pass, "max relative gradient error {worst:.3e} exceeds 1e-4");
}

// ----------------------------------------------------------------- spectrum

/// O(n^2) reference transform with the exact angle reduced modulo one
/// turn, sharing only the bin layout convention with the fast path.
fn naive_amplitude_spectrum(series: &[f64], fs: f64) -> Vec<(f64, f64)> {
    let n = series.len();
    let nb = n / 2;
    let mut out = Vec::with_capacity(nb);
    for k in 1..=nb {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &x) in series.iter().enumerate() {
            let phase = ((k * t) % n) as f64 / n as f64;
            let angle = -2.0 * std::f64::consts::PI * phase;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        let f = k as f64 * fs / n as f64;
        let scale = if n % 2 == 0 && k == nb { 1.0 } else { 2.0 };
        out.push((f, scale * (re * re + im * im).sqrt() / n as f64));
    }
    out
}

#[test]
fn a02_amplitude_spectrum_matches_naive_dft() {
    let mut rng = stream(2, StreamId::Eval);
    let fs = 30.0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(16..=1024);
        let series: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let fast = amplitude_spectrum(&series, fs).unwrap();
        let naive = naive_amplitude_spectrum(&series, fs);
        assert_eq!(fast.len(), naive.len());
        for ((ff, fm), (nf, nm)) in fast.iter().zip(naive.iter()) {
            assert_eq!(ff, nf);
            worst = worst.max((fm - nm).abs());
        }
    }

    let mut const_worst = 0.0f64;
    for c in [0.0, 1.0, -3.25, 0.7] {
        let series = vec![c; 256];
        const_worst = const_worst.max(smoothness_value(&series, fs).unwrap().abs());
    }

    // A sinusoid landing exactly on bin k should read back its amplitude.
    let (n, k, amp) = (64usize, 7usize, 1.3f64);
    let tone: Vec<f64> = (0..n)
        .map(|t| amp * (2.0 * std::f64::consts::PI * k as f64 * t as f64 / n as f64 + 0.4).sin())
        .collect();
    let spec = amplitude_spectrum(&tone, fs).unwrap();
    let tone_err = (spec[k - 1].1 - amp).abs();

    let pass = worst <= 1e-9 && const_worst <= 1e-12 && tone_err <= 1e-9;
    verdict("02 amplitude spectrum vs naive DFT", pass);
    assert!(
        pass,
        "dft err {worst:.3e} (limit 1e-9), constant S {const_worst:.3e} (limit 1e-12), \
         tone amplitude err {tone_err:.3e} (limit 1e-9)"
    );
}

// ---------------------------------------------------------------- objective

fn noise_stack(h: usize, w: usize, rng: &mut ChaCha8Rng) -> FrameStack {
    let mut mk = |_| {
        let mut img = Image::new(h, w);
        for v in &mut img.data {
            *v = rng.random_range(0..=255u32) as u8;
        }
        Arc::new(img)
    };
    FrameStack { prev: mk(0), cur: mk(1) }
}

fn synthetic_batch(cfg: &ExperimentConfig, size: usize, seed: u64) -> SampleBatch {
    let mut rng = stream(seed, StreamId::Eval);
    let (h, w) = (cfg.observation.height, cfg.observation.width);
    let mut transitions = Vec::with_capacity(size);
    for _ in 0..size {
        transitions.push(Transition {
            obs: noise_stack(h, w, &mut rng),
            action: [rng.random_range(-0.9..=0.9), rng.random_range(-0.9..=0.9)],
            n_return: rng.random_range(-2.0..=2.0),
            next_obs: noise_stack(h, w, &mut rng),
            terminal: false,
            steps: cfg.sac.n_step as u32,
        });
    }
    SampleBatch {
        slots: (0..size).collect(),
        ids: (1..=size as u64).collect(),
        weights: vec![1.0; size],
        transitions,
    }
}

#[test]
fn a03_policy_objective_is_affine_in_the_smoothness_weights() {
    let mut cfg = ExperimentConfig::default();
    cfg.observation.height = 8;
    cfg.observation.width = 10;
    cfg.net.conv = vec![ConvSpec { kernel: 3, stride: 2, channels: 3 }];
    cfg.net.hidden = 8;
    cfg.sac.batch_size = 16;
    cfg.caps.sampled_actions = false;

    let learner = Learner::new(&cfg, 3).unwrap();
    let batch = synthetic_batch(&cfg, 16, 30);

    // Probes clone the learner, so every corner of the weight grid sees
    // the same parameters and the same frozen draw streams.
    let r00 = learner.report_at_lambdas(&batch, 0.0, 0.0);
    let r10 = learner.report_at_lambdas(&batch, 1.0, 0.0);
    let r01 = learner.report_at_lambdas(&batch, 0.0, 1.0);
    let r11 = learner.report_at_lambdas(&batch, 1.0, 1.0);

    let slope_t = r10.total_policy_objective - r00.total_policy_objective;
    let slope_s = r01.total_policy_objective - r00.total_policy_objective;
    let errs = [
        (r00.total_policy_objective - r00.policy_loss).abs(),
        (slope_t - r11.l_temporal).abs(),
        (slope_s - r11.l_spatial).abs(),
        (slope_t - r10.l_temporal).abs(),
        (slope_s - r01.l_spatial).abs(),
        (r11.total_policy_objective
            - (r00.total_policy_objective + r11.l_temporal + r11.l_spatial))
            .abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0f64, f64::max);
    let nontrivial = r11.l_temporal > 0.0 && r11.l_spatial > 0.0;

    let pass = worst <= 1e-6 && nontrivial;
    verdict("03 objective affine in the smoothness weights", pass);
    assert!(
        pass,
        "worst affinity error {worst:.3e} (limit 1e-6), l_temporal {}, l_spatial {}",
        r11.l_temporal, r11.l_spatial
    );
}

// ----------------------------------------------------------- action distance

#[test]
fn a04_action_distance_arithmetic_is_exact() {
    let d = action_distance(&[0.0, 0.0], &[3.0, 4.0]);
    let exact_345 = d == 5.0;

    let pairs = [([0.0, 0.0], [3.0, 4.0]), ([0.0, 0.0], [5.0, 12.0])];
    let exact_mean = mean_action_distance(&pairs) == 9.0;

    let same = [([0.25, -0.5], [0.25, -0.5]); 4];
    let exact_zero = mean_action_distance(&same) == 0.0;
    let empty_zero = mean_action_distance(&[]) == 0.0;

    let pass = exact_345 && exact_mean && exact_zero && empty_zero;
    verdict("04 action distance arithmetic", pass);
    assert!(pass, "3-4-5: {d}, mean: {}", mean_action_distance(&pairs));
}

// ------------------------------------------------------------------- replay

fn tiny_transition(stack: &FrameStack, rng: &mut ChaCha8Rng) -> Transition {
    Transition {
        obs: stack.clone(),
        action: [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
        n_return: rng.random_range(-1.0..=1.0),
        next_obs: stack.clone(),
        terminal: false,
        steps: 4,
    }
}

#[test]
fn a05_replay_stress_holds_capacity_and_priority_mass() {
    let cfg = ReplayConfig::default();
    let mut buf = GlobalBuffer::new(&cfg);
    let mut rng = stream(5, StreamId::Eval);
    let stack = noise_stack(2, 3, &mut rng);

    let mut over_capacity = false;
    for op in 0..1_000_000u32 {
        if buf.is_empty() || op % 20 < 17 {
            buf.insert(tiny_transition(&stack, &mut rng));
        } else {
            let batch = buf.sample(16, cfg.priority_beta, &mut rng);
            let tds: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..=3.0)).collect();
            buf.update_priorities(&batch.slots, &batch.ids, &tds);
        }
        if buf.len() > buf.capacity() {
            over_capacity = true;
            break;
        }
    }
    let capacity_ok = !over_capacity && buf.len() == cfg.global_capacity;
    let root = buf.total_priority();
    let rescan = buf.rescan_total_priority();
    let drift = (root - rescan).abs() / rescan;
    let mass_ok = drift <= 1e-6;

    // Raw priorities 3 and 1 with alpha = 1 give sampling odds 3:1.
    let mut cfg1 = ReplayConfig::default();
    cfg1.priority_alpha = 1.0;
    let mut pair = GlobalBuffer::new(&cfg1);
    let a = pair.insert(tiny_transition(&stack, &mut rng));
    let b = pair.insert(tiny_transition(&stack, &mut rng));
    pair.update_priorities(&[0, 1], &[a, b], &[3.0 - cfg1.priority_eps, 1.0 - cfg1.priority_eps]);
    let draws = 100_000;
    let mut hits = 0usize;
    for _ in 0..draws {
        if pair.sample(1, 0.4, &mut rng).slots[0] == 0 {
            hits += 1;
        }
    }
    let frac = hits as f64 / draws as f64;
    let odds_ok = (frac - 0.75).abs() <= 0.02;

    let pass = capacity_ok && mass_ok && odds_ok;
    verdict("05 replay capacity, priority mass, sampling odds", pass);
    assert!(
        pass,
        "capacity ok: {capacity_ok} (len {}), mass drift {drift:.3e} (limit 1e-6), \
         3:1 fraction {frac:.4} (want 0.75 +- 0.02)",
        buf.len()
    );
}

// ------------------------------------------------------------ n-step returns

/// Independent rendering of the pinned accumulation order: front-to-back
/// terms, discount built by repeated multiplication.
fn pinned_order_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        acc += discount * r;
        discount *= gamma;
    }
    acc
}

#[test]
fn a06_n_step_windows_match_direct_summation() {
    let mut rng = stream(6, StreamId::Eval);
    let stack = noise_stack(2, 3, &mut rng);
    let mut replay_cfg = ReplayConfig::default();
    replay_cfg.local_capacity = 200;

    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let len = rng.random_range(1..=40);
        let gamma = rng.random_range(0.9..=0.999);
        let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let reason =
            if rng.random_range(0..2) == 0 { DoneReason::Collision } else { DoneReason::Timeout };

        let mut local = LocalBuffer::new(n, gamma, &replay_cfg);
        for &r in &rewards {
            local.push_step(stack.clone(), [0.0, 0.0], r);
        }
        local.finish_episode(stack.clone(), reason);
        let transitions = local.drain();

        assert_eq!(transitions.len(), len);
        for (t, tr) in transitions.iter().enumerate() {
            checked += 1;
            let window = &rewards[t..(t + n).min(len)];
            let expect = pinned_order_return(window, gamma);
            // Windows reaching the last step bootstrap from the final
            // observation, so they carry the episode's terminal flag.
            let ends_at_boundary = t + n >= len;
            let expect_terminal = ends_at_boundary && reason != DoneReason::Timeout;
            if tr.n_return.to_bits() != expect.to_bits()
                || tr.steps as usize != window.len()
                || tr.terminal != expect_terminal
            {
                mismatches += 1;
            }
        }
    }

    let known = smoothrace_core::replay::n_step_return(&[1.0, 1.0, 1.0, 1.0], 0.98);
    let known_err = (known - 3.881592).abs();

    let pass = mismatches == 0 && checked > 0 && known_err <= 1e-9;
    verdict("06 n-step returns vs direct summation", pass);
    assert!(
        pass,
        "{mismatches} of {checked} windows off, all-ones case {known} (err {known_err:.3e})"
    );
}

// ------------------------------------------------------------- perturbations

fn random_image(rng: &mut ChaCha8Rng) -> Image {
    let h = rng.random_range(6..=20);
    let w = rng.random_range(6..=24);
    let mut img = Image::new(h, w);
    for v in &mut img.data {
        *v = rng.random_range(0..=255u32) as u8;
    }
    img
}

fn identity_cases(rng: &mut ChaCha8Rng) -> [Perturbation; 7] {
    [
        Perturbation::Brightness { factor: 1.0 },
        Perturbation::Contrast { factor: 1.0 },
        Perturbation::Rotation { angle_deg: 0.0 },
        Perturbation::SaltPepper { prob: 0.0, salt_ratio: 0.5, seed: rng.random() },
        Perturbation::GaussianBlur { sigma: 0.0 },
        Perturbation::Cutoff { x_frac: 0.3, y_frac: 0.3, w_frac: 0.0, h_frac: 0.5 },
        Perturbation::Reflection { intensity: 0.0, center_frac: 0.5, width_frac: 0.2 },
    ]
}

#[test]
fn a08_perturbation_identities_purity_and_range() {
    let mut rng = stream(8, StreamId::Eval);
    let cfg = PerturbationConfig::default();
    let mut exact_failures = 0usize;
    let mut hsv_failures = 0usize;
    let mut purity_failures = 0usize;
    for _ in 0..1000 {
        let img = random_image(&mut rng);
        let pristine = img.clone();

        for p in identity_cases(&mut rng) {
            if p.apply(&img) != img {
                exact_failures += 1;
            }
        }
        let neutral = Perturbation::HsvShift { hue_deg: 0.0, sat: 1.0, val: 1.0 };
        let out = neutral.apply(&img);
        let off = img
            .data
            .iter()
            .zip(out.data.iter())
            .any(|(&a, &b)| (a as i16 - b as i16).abs() > 1);
        if off {
            hsv_failures += 1;
        }

        // Random-parameter applications: the input stays untouched and the
        // output keeps the frame geometry. Channel range is structural,
        // every pixel is stored as a byte.
        for kind in PerturbationKind::ALL {
            let out = sample_params(kind, &cfg, &mut rng).apply(&img);
            if out.h != img.h || out.w != img.w || out.data.len() != img.data.len() {
                purity_failures += 1;
            }
        }
        if img != pristine {
            purity_failures += 1;
        }
    }

    let pass = exact_failures == 0 && hsv_failures == 0 && purity_failures == 0;
    verdict("08 perturbation identities, purity, range", pass);
    assert!(
        pass,
        "exact identity failures: {exact_failures}, hsv off-by-more-than-1: {hsv_failures}, \
         purity/shape failures: {purity_failures}"
    );
}

// -------------------------------------------------------------- aggregation

fn record(i: u64, reason: DoneReason, lap: Option<f64>) -> EpisodeRecord {
    EpisodeRecord {
        actor_id: 0,
        episode_index: i,
        steps: 100,
        ret: 1.0,
        done_reason: reason,
        lap_time_s: lap,
    }
}

#[test]
fn a11_aggregation_matches_hand_arithmetic() {
    let mut records = Vec::new();
    for i in 0..15u64 {
        if i < 11 {
            records.push(record(i, DoneReason::LapComplete, Some(20.0 + i as f64)));
        } else {
            records.push(record(i, DoneReason::Collision, None));
        }
    }
    let stats = aggregate_runs(&records).unwrap();
    let rate_ok = (stats.completion_rate_pct - 73.33).abs() <= 0.01;
    let lap_ok = stats.avg_lap_time_s == Some(25.0);

    let none: Vec<EpisodeRecord> =
        (0..5).map(|i| record(i, DoneReason::Collision, None)).collect();
    let empty = aggregate_runs(&none).unwrap();
    let nan_ok = empty.avg_lap_time_s.is_none()
        && empty.avg_lap_time_or_nan().is_nan()
        && empty.avg_lap_time_display() == "NaN"
        && empty.completion_rate_pct == 0.0;

    let pass = rate_ok && lap_ok && nan_ok;
    verdict("11 aggregation arithmetic", pass);
    assert!(
        pass,
        "11/15 -> {}%, avg lap {:?}, zero-completion display {}",
        stats.completion_rate_pct,
        stats.avg_lap_time_s,
        empty.avg_lap_time_display()
    );
}

//! Seeded image perturbations.
//!
//! Two consumers share this module. The spatial smoothness regularizer draws
//! a perturbed copy of an observation from the similarity distribution
//! (called phi throughout the project): one enabled kind picked uniformly,
//! its parameters sampled from the configured ranges. The training-time
//! randomization pipeline instead applies its enabled kinds in a fixed order
//! to every observation an actor collects, widening the visual distribution
//! the policy trains on.
//!
//! Every perturbation is a pure function of its parameters: stochastic kinds
//! carry an explicit seed in their parameter record, so applying the same
//! [`Perturbation`] twice yields identical bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PerturbationConfig;
use crate::error::{CoreError, Result};
use crate::obs::{FrameStack, Image};

/// The closed set of perturbation kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Brightness,
    Contrast,
    Rotation,
    SaltPepper,
    GaussianBlur,
    Cutoff,
    Reflection,
    HsvShift,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 8] = [
        PerturbationKind::Brightness,
        PerturbationKind::Contrast,
        PerturbationKind::Rotation,
        PerturbationKind::SaltPepper,
        PerturbationKind::GaussianBlur,
        PerturbationKind::Cutoff,
        PerturbationKind::Reflection,
        PerturbationKind::HsvShift,
    ];

    /// Default draw set for the similarity distribution.
    pub fn similarity_set() -> [PerturbationKind; 6] {
        [
            PerturbationKind::Brightness,
            PerturbationKind::Contrast,
            PerturbationKind::Rotation,
            PerturbationKind::SaltPepper,
            PerturbationKind::GaussianBlur,
            PerturbationKind::Cutoff,
        ]
    }

    /// Default kinds for the training-time randomization pipeline.
    pub fn transfer_set() -> [PerturbationKind; 3] {
        [PerturbationKind::HsvShift, PerturbationKind::Reflection, PerturbationKind::SaltPepper]
    }

    /// Application order of the randomization pipeline: color shift first,
    /// then glare, then sensor noise; any remaining kinds follow.
    pub fn pipeline_order() -> [PerturbationKind; 8] {
        [
            PerturbationKind::HsvShift,
            PerturbationKind::Reflection,
            PerturbationKind::SaltPepper,
            PerturbationKind::Brightness,
            PerturbationKind::Contrast,
            PerturbationKind::Rotation,
            PerturbationKind::GaussianBlur,
            PerturbationKind::Cutoff,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::Brightness => "brightness",
            PerturbationKind::Contrast => "contrast",
            PerturbationKind::Rotation => "rotation",
            PerturbationKind::SaltPepper => "salt_pepper",
            PerturbationKind::GaussianBlur => "gaussian_blur",
            PerturbationKind::Cutoff => "cutoff",
            PerturbationKind::Reflection => "reflection",
            PerturbationKind::HsvShift => "hsv_shift",
        }
    }
}

/// A perturbation with concrete sampled parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Perturbation {
    Brightness { factor: f64 },
    Contrast { factor: f64 },
    /// Rotation about the image center, bilinear resampling, black fill for
    /// exposed corners. Positive angles rotate content clockwise on screen.
    Rotation { angle_deg: f64 },
    /// Each pixel is independently corrupted with probability `prob`; a
    /// corrupted pixel turns white with probability `salt_ratio`, else black.
    SaltPepper { prob: f64, salt_ratio: f64, seed: u64 },
    GaussianBlur { sigma: f64 },
    /// Black rectangle; fractions are relative to image dimensions, the
    /// position fractions place the rectangle within the space it leaves.
    Cutoff { x_frac: f64, y_frac: f64, w_frac: f64, h_frac: f64 },
    /// Additive white horizontal band simulating glare.
    Reflection { intensity: f64, center_frac: f64, width_frac: f64 },
    /// Hue rotation plus multiplicative saturation/value factors.
    HsvShift { hue_deg: f64, sat: f64, val: f64 },
}

impl Perturbation {
    pub fn kind(&self) -> PerturbationKind {
        match self {
            Perturbation::Brightness { .. } => PerturbationKind::Brightness,
            Perturbation::Contrast { .. } => PerturbationKind::Contrast,
            Perturbation::Rotation { .. } => PerturbationKind::Rotation,
            Perturbation::SaltPepper { .. } => PerturbationKind::SaltPepper,
            Perturbation::GaussianBlur { .. } => PerturbationKind::GaussianBlur,
            Perturbation::Cutoff { .. } => PerturbationKind::Cutoff,
            Perturbation::Reflection { .. } => PerturbationKind::Reflection,
            Perturbation::HsvShift { .. } => PerturbationKind::HsvShift,
        }
    }

    /// Apply to one frame. Pure: the input is untouched, the output has the
    /// same dimensions and all channels in range by construction.
    pub fn apply(&self, img: &Image) -> Image {
        match *self {
            Perturbation::Brightness { factor } => map_channels(img, |v| v * factor as f32),
            Perturbation::Contrast { factor } => {
                map_channels(img, |v| (v - 127.5) * factor as f32 + 127.5)
            }
            Perturbation::Rotation { angle_deg } => rotate(img, angle_deg),
            Perturbation::SaltPepper { prob, salt_ratio, seed } => {
                salt_pepper(img, prob, salt_ratio, seed)
            }
            Perturbation::GaussianBlur { sigma } => gaussian_blur(img, sigma),
            Perturbation::Cutoff { x_frac, y_frac, w_frac, h_frac } => {
                cutoff(img, x_frac, y_frac, w_frac, h_frac)
            }
            Perturbation::Reflection { intensity, center_frac, width_frac } => {
                reflection(img, intensity, center_frac, width_frac)
            }
            Perturbation::HsvShift { hue_deg, sat, val } => hsv_shift(img, hue_deg, sat, val),
        }
    }

    /// Apply to both frames of a stack. Deterministic kinds hit both frames
    /// identically; pixel-noise kinds re-seed for the second frame so the
    /// noise pattern is not frozen across time.
    pub fn apply_stack(&self, stack: &FrameStack) -> FrameStack {
        let prev = self.apply(&stack.prev);
        let cur = self.reseeded(1).apply(&stack.cur);
        FrameStack { prev: std::sync::Arc::new(prev), cur: std::sync::Arc::new(cur) }
    }

    fn reseeded(&self, bump: u64) -> Perturbation {
        match *self {
            Perturbation::SaltPepper { prob, salt_ratio, seed } => {
                Perturbation::SaltPepper { prob, salt_ratio, seed: seed.wrapping_add(bump) }
            }
            ref other => other.clone(),
        }
    }
}

fn in_range(v: f64, r: [f64; 2]) -> bool {
    v >= r[0] && v <= r[1]
}

/// Validate sampled parameters against the configured ranges and apply.
pub fn apply_checked(cfg: &PerturbationConfig, p: &Perturbation, img: &Image) -> Result<Image> {
    let bad = |what: &str| Err(CoreError::PerturbationRange(format!("{}: {what}", p.kind().name())));
    match *p {
        Perturbation::Brightness { factor } if !in_range(factor, cfg.brightness) => {
            return bad("factor outside configured range")
        }
        Perturbation::Contrast { factor } if !in_range(factor, cfg.contrast) => {
            return bad("factor outside configured range")
        }
        Perturbation::Rotation { angle_deg } if !in_range(angle_deg, cfg.rotation_deg) => {
            return bad("angle outside configured range")
        }
        Perturbation::SaltPepper { prob, salt_ratio, .. }
            if !in_range(prob, cfg.salt_pepper_prob) || !(0.0..=1.0).contains(&salt_ratio) =>
        {
            return bad("probability outside configured range")
        }
        Perturbation::GaussianBlur { sigma } if !in_range(sigma, cfg.blur_sigma) => {
            return bad("sigma outside configured range")
        }
        Perturbation::Cutoff { x_frac, y_frac, w_frac, h_frac }
            if w_frac * h_frac > cfg.cutoff_max_area + 1e-12
                || !(0.0..=1.0).contains(&x_frac)
                || !(0.0..=1.0).contains(&y_frac)
                || w_frac < 0.0
                || h_frac < 0.0 =>
        {
            return bad("rectangle outside configured bounds")
        }
        Perturbation::Reflection { intensity, center_frac, width_frac }
            if !in_range(intensity, cfg.reflection_intensity)
                || !(0.0..=1.0).contains(&center_frac)
                || !in_range(width_frac, cfg.reflection_width) =>
        {
            return bad("band outside configured bounds")
        }
        Perturbation::HsvShift { hue_deg, sat, val }
            if !in_range(hue_deg, cfg.hsv_hue_deg)
                || !in_range(sat, cfg.hsv_sat)
                || !in_range(val, cfg.hsv_val) =>
        {
            return bad("shift outside configured range")
        }
        _ => {}
    }
    Ok(p.apply(img))
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    rng.random_range(r[0]..=r[1])
}

/// Sample concrete parameters for one kind from the configured ranges.
pub fn sample_params(
    kind: PerturbationKind,
    cfg: &PerturbationConfig,
    rng: &mut impl Rng,
) -> Perturbation {
    match kind {
        PerturbationKind::Brightness => Perturbation::Brightness { factor: uniform(rng, cfg.brightness) },
        PerturbationKind::Contrast => Perturbation::Contrast { factor: uniform(rng, cfg.contrast) },
        PerturbationKind::Rotation => Perturbation::Rotation { angle_deg: uniform(rng, cfg.rotation_deg) },
        PerturbationKind::SaltPepper => Perturbation::SaltPepper {
            prob: uniform(rng, cfg.salt_pepper_prob),
            salt_ratio: cfg.salt_ratio,
            seed: rng.random(),
        },
        PerturbationKind::GaussianBlur => Perturbation::GaussianBlur { sigma: uniform(rng, cfg.blur_sigma) },
        PerturbationKind::Cutoff => {
            let side = cfg.cutoff_max_area.sqrt();
            Perturbation::Cutoff {
                w_frac: uniform(rng, [0.0, side]),
                h_frac: uniform(rng, [0.0, side]),
                x_frac: uniform(rng, [0.0, 1.0]),
                y_frac: uniform(rng, [0.0, 1.0]),
            }
        }
        PerturbationKind::Reflection => Perturbation::Reflection {
            intensity: uniform(rng, cfg.reflection_intensity),
            center_frac: uniform(rng, [0.0, 1.0]),
            width_frac: uniform(rng, cfg.reflection_width),
        },
        PerturbationKind::HsvShift => Perturbation::HsvShift {
            hue_deg: uniform(rng, cfg.hsv_hue_deg),
            sat: uniform(rng, cfg.hsv_sat),
            val: uniform(rng, cfg.hsv_val),
        },
    }
}

/// Draw from the similarity distribution: one enabled kind picked uniformly
/// with parameters from the configured ranges. In compose mode every enabled
/// kind is drawn instead, to be applied in the returned order.
pub fn sample_phi(cfg: &PerturbationConfig, rng: &mut impl Rng) -> Result<Vec<Perturbation>> {
    if cfg.phi_enabled.is_empty() {
        return Err(CoreError::Config("phi_enabled: no perturbation kinds enabled".into()));
    }
    if cfg.compose {
        Ok(cfg.phi_enabled.iter().map(|&k| sample_params(k, cfg, rng)).collect())
    } else {
        let kind = cfg.phi_enabled[rng.random_range(0..cfg.phi_enabled.len())];
        Ok(vec![sample_params(kind, cfg, rng)])
    }
}

/// Draw from the similarity distribution and apply to a single frame.
pub fn sample_phi_image(cfg: &PerturbationConfig, img: &Image, rng: &mut impl Rng) -> Result<Image> {
    let ps = sample_phi(cfg, rng)?;
    let mut out = ps[0].apply(img);
    for p in &ps[1..] {
        out = p.apply(&out);
    }
    Ok(out)
}

/// Draw from the similarity distribution and apply to a stacked observation.
pub fn sample_phi_stack(cfg: &PerturbationConfig, stack: &FrameStack, rng: &mut impl Rng) -> Result<FrameStack> {
    let ps = sample_phi(cfg, rng)?;
    let mut out = ps[0].apply_stack(stack);
    for p in &ps[1..] {
        out = p.apply_stack(&out);
    }
    Ok(out)
}

/// Training-time randomization: apply each pipeline-enabled kind in the
/// fixed pipeline order, each with independently sampled parameters.
pub fn sim2real_pipeline(cfg: &PerturbationConfig, img: &Image, rng: &mut impl Rng) -> Image {
    let mut out: Option<Image> = None;
    for kind in PerturbationKind::pipeline_order() {
        if !cfg.sim2real_enabled.contains(&kind) {
            continue;
        }
        let p = sample_params(kind, cfg, rng);
        let src = out.as_ref().unwrap_or(img);
        out = Some(p.apply(src));
    }
    out.unwrap_or_else(|| img.clone())
}

/// Seam for a learned sim-to-real observation translator. The default
/// installation is the identity; a real translator would be trained outside
/// this crate and plugged in here.
pub trait ObsTranslator: Send + Sync {
    fn translate(&self, img: &Image) -> Image;
    fn name(&self) -> &'static str;
}

pub struct IdentityTranslator;

impl ObsTranslator for IdentityTranslator {
    fn translate(&self, img: &Image) -> Image {
        img.clone()
    }

    fn name(&self) -> &'static str {
        "identity"
    }
}

/// Inverts every channel. Exists so tests can observe the seam doing work.
pub struct InvertTranslator;

impl ObsTranslator for InvertTranslator {
    fn translate(&self, img: &Image) -> Image {
        let mut out = img.clone();
        for v in &mut out.data {
            *v = 255 - *v;
        }
        out
    }

    fn name(&self) -> &'static str {
        "invert"
    }
}

pub fn make_translator(kind: crate::config::TranslatorKind) -> Option<Box<dyn ObsTranslator>> {
    match kind {
        crate::config::TranslatorKind::None => None,
        crate::config::TranslatorKind::Identity => Some(Box::new(IdentityTranslator)),
        crate::config::TranslatorKind::Invert => Some(Box::new(InvertTranslator)),
    }
}

#[inline]
fn quantize(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn map_channels(img: &Image, f: impl Fn(f32) -> f32) -> Image {
    let mut out = img.clone();
    for v in &mut out.data {
        *v = quantize(f(*v as f32));
    }
    out
}

fn rotate(img: &Image, angle_deg: f64) -> Image {
    let (h, w) = (img.h, img.w);
    let mut out = Image::new(h, w);
    let a = angle_deg.to_radians();
    let (sin, cos) = (a.sin(), a.cos());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    for y in 0..h {
        let dy = y as f64 - cy;
        for x in 0..w {
            let dx = x as f64 - cx;
            let sx = cx + cos * dx - sin * dy;
            let sy = cy + sin * dx + cos * dy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = (sx - x0) as f32;
            let fy = (sy - y0) as f32;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let weights = [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x0 + 1, y0, fx * (1.0 - fy)),
                (x0, y0 + 1, (1.0 - fx) * fy),
                (x0 + 1, y0 + 1, fx * fy),
            ];
            for c in 0..3 {
                let mut acc = 0.0f32;
                for &(px, py, wt) in &weights {
                    if wt > 0.0 && px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                        acc += wt * img.get(py as usize, px as usize, c) as f32;
                    }
                }
                out.set(y, x, c, quantize(acc));
            }
        }
    }
    out
}

fn salt_pepper(img: &Image, prob: f64, salt_ratio: f64, seed: u64) -> Image {
    let mut out = img.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in 0..img.h * img.w {
        let u: f64 = rng.random();
        if u < prob {
            let v = if u < prob * salt_ratio { 255 } else { 0 };
            out.data[p * 3..p * 3 + 3].fill(v);
        }
    }
    out
}

fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let radius = (3.0 * sigma).ceil() as i64;
    if radius == 0 {
        return img.clone();
    }
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for i in -radius..=radius {
        kernel.push((-(i * i) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let (h, w) = (img.h, img.w);
    let reflect = |i: i64, n: i64| -> usize {
        let mut i = i;
        if i < 0 {
            i = -i - 1;
        }
        if i >= n {
            i = 2 * n - 1 - i;
        }
        i.clamp(0, n - 1) as usize
    };

    // Horizontal pass into a float buffer, vertical pass back to bytes.
    let mut tmp = vec![0.0f64; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = reflect(x as i64 + ki as i64 - radius, w as i64);
                    acc += k * img.get(y, sx, c) as f64;
                }
                tmp[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    let mut out = Image::new(h, w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = reflect(y as i64 + ki as i64 - radius, h as i64);
                    acc += k * tmp[(sy * w + x) * 3 + c];
                }
                out.set(y, x, c, quantize(acc as f32));
            }
        }
    }
    out
}

fn cutoff(img: &Image, x_frac: f64, y_frac: f64, w_frac: f64, h_frac: f64) -> Image {
    let mut out = img.clone();
    let rw = (w_frac * img.w as f64).round() as usize;
    let rh = (h_frac * img.h as f64).round() as usize;
    if rw == 0 || rh == 0 {
        return out;
    }
    let x0 = (x_frac * (img.w - rw.min(img.w)) as f64).round() as usize;
    let y0 = (y_frac * (img.h - rh.min(img.h)) as f64).round() as usize;
    for y in y0..(y0 + rh).min(img.h) {
        for x in x0..(x0 + rw).min(img.w) {
            out.set_pixel(y, x, [0, 0, 0]);
        }
    }
    out
}

fn reflection(img: &Image, intensity: f64, center_frac: f64, width_frac: f64) -> Image {
    let mut out = img.clone();
    let cy = center_frac * (img.h as f64 - 1.0);
    let half = width_frac * img.h as f64 / 2.0;
    for y in 0..img.h {
        if (y as f64 - cy).abs() <= half {
            for x in 0..img.w {
                for c in 0..3 {
                    let v = out.get(y, x, c) as f32 + intensity as f32;
                    out.set(y, x, c, quantize(v));
                }
            }
        }
    }
    out
}

/// RGB in [0,1] to (hue degrees in [0,360), saturation, value).
fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

fn hsv_shift(img: &Image, hue_deg: f64, sat: f64, val: f64) -> Image {
    let mut out = Image::new(img.h, img.w);
    for p in 0..img.h * img.w {
        let i = p * 3;
        let r = img.data[i] as f64 / 255.0;
        let g = img.data[i + 1] as f64 / 255.0;
        let b = img.data[i + 2] as f64 / 255.0;
        let (h, s, v) = rgb_to_hsv(r, g, b);
        let (r, g, b) = hsv_to_rgb(
            (h + hue_deg).rem_euclid(360.0),
            (s * sat).clamp(0.0, 1.0),
            (v * val).clamp(0.0, 1.0),
        );
        out.data[i] = quantize((r * 255.0) as f32);
        out.data[i + 1] = quantize((g * 255.0) as f32);
        out.data[i + 2] = quantize((b * 255.0) as f32);
    }
    out
}

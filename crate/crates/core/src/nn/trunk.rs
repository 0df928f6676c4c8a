//! Convolutional feature extractor shared by policy and critics.

use rand::Rng;

use crate::config::NetConfig;
use crate::error::Result;
use crate::nn::{relu_backward, relu_forward, Conv};

#[derive(Clone, Debug)]
pub struct Trunk {
    pub convs: Vec<Conv>,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    /// Per-layer output sizes, input first.
    dims: Vec<(usize, usize)>,
    pub out_dim: usize,
}

/// Forward-pass intermediates needed by the backward pass.
pub struct TrunkCache {
    cols: Vec<Vec<f64>>,
    posts: Vec<Vec<f64>>,
}

impl Trunk {
    pub fn new(cfg: &NetConfig, in_c: usize, in_h: usize, in_w: usize, rng: &mut impl Rng) -> Result<Trunk> {
        let mut convs = Vec::with_capacity(cfg.conv.len());
        let mut dims = vec![(in_h, in_w)];
        let mut c = in_c;
        let (mut h, mut w) = (in_h, in_w);
        for spec in &cfg.conv {
            let conv = Conv::new(c, spec.channels, spec.kernel, spec.stride, rng);
            let (oh, ow) = conv.out_hw(h, w)?;
            dims.push((oh, ow));
            c = spec.channels;
            h = oh;
            w = ow;
            convs.push(conv);
        }
        Ok(Trunk { convs, in_c, in_h, in_w, dims, out_dim: c * h * w })
    }

    /// Flattened feature vector plus the cache for [`Trunk::backward`].
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, TrunkCache) {
        debug_assert_eq!(x.len(), self.in_c * self.in_h * self.in_w);
        let mut cache = TrunkCache { cols: Vec::new(), posts: Vec::new() };
        let mut cur = x.to_vec();
        for (i, conv) in self.convs.iter().enumerate() {
            let (ih, iw) = self.dims[i];
            let (oh, ow) = self.dims[i + 1];
            let cols = conv.im2col(&cur, ih, iw);
            let mut y = Vec::new();
            conv.forward_cols(&cols, oh * ow, &mut y);
            relu_forward(&mut y);
            cache.cols.push(cols);
            cache.posts.push(y.clone());
            cur = y;
        }
        (cur, cache)
    }

    /// Accumulate parameter gradients for a given output gradient. The
    /// gradient with respect to the input image is not needed anywhere, so
    /// it is not produced.
    pub fn backward(&mut self, cache: &TrunkCache, d_flat: &[f64]) {
        let mut dy = d_flat.to_vec();
        for i in (0..self.convs.len()).rev() {
            relu_backward(&cache.posts[i], &mut dy);
            let (oh, ow) = self.dims[i + 1];
            let np = oh * ow;
            if i == 0 {
                self.convs[0].backward(&cache.cols[0], np, &dy, None);
            } else {
                let (ih, iw) = self.dims[i];
                let mut dx = vec![0.0; self.convs[i].in_c * ih * iw];
                let conv = &mut self.convs[i];
                conv.backward(&cache.cols[i], np, &dy, Some((&mut dx, ih, iw)));
                dy = dx;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for c in &mut self.convs {
            c.zero_grads();
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.convs.iter().flat_map(|c| [&c.w[..], &c.b[..]]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.convs
            .iter_mut()
            .flat_map(|c| {
                let Conv { w, b, .. } = c;
                [w.as_mut_slice(), b.as_mut_slice()]
            })
            .collect()
    }

    pub fn grads(&self) -> Vec<&[f64]> {
        self.convs.iter().flat_map(|c| [&c.gw[..], &c.gb[..]]).collect()
    }

    pub fn param_specs(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        self.convs
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                [
                    (format!("{prefix}.conv{i}.w"), vec![c.out_c, c.in_c, c.k, c.k]),
                    (format!("{prefix}.conv{i}.b"), vec![c.out_c]),
                ]
            })
            .collect()
    }

    pub fn arch(&self) -> serde_json::Value {
        serde_json::json!({
            "input": [self.in_c, self.in_h, self.in_w],
            "conv": self.convs.iter().map(|c| {
                serde_json::json!({"kernel": c.k, "stride": c.stride, "channels": c.out_c})
            }).collect::<Vec<_>>(),
        })
    }
}

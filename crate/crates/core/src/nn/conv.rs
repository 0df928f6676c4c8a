//! Strided valid convolution.

use rand::Rng;

use crate::error::{CoreError, Result};

/// 2D convolution, valid padding, square kernel, shared stride.
///
/// Input and output are channel-major flat slices (`[c][h][w]`). The
/// forward pass goes through an explicit patch matrix so the hot loops are
/// contiguous dot products; the same matrix is reused by the backward pass.
#[derive(Clone, Debug)]
pub struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    /// `[out_c][in_c * k * k]`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Conv {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, rng: &mut impl Rng) -> Conv {
        let fan_in = in_c * k * k;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = (0..out_c * fan_in).map(|_| rng.random_range(-bound..=bound)).collect();
        Conv {
            in_c,
            out_c,
            k,
            stride,
            w,
            b: vec![0.0; out_c],
            gw: vec![0.0; out_c * fan_in],
            gb: vec![0.0; out_c],
        }
    }

    pub fn out_hw(&self, in_h: usize, in_w: usize) -> Result<(usize, usize)> {
        if in_h < self.k || in_w < self.k {
            return Err(CoreError::Shape(format!(
                "{}x{} kernel does not fit a {in_h}x{in_w} input",
                self.k, self.k
            )));
        }
        Ok(((in_h - self.k) / self.stride + 1, (in_w - self.k) / self.stride + 1))
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.k * self.k
    }

    /// Gather input patches into a `[out_h * out_w][in_c * k * k]` matrix.
    pub fn im2col(&self, x: &[f64], in_h: usize, in_w: usize) -> Vec<f64> {
        let (oh, ow) = self.out_hw(in_h, in_w).expect("shape checked at construction");
        let plen = self.patch_len();
        let mut cols = vec![0.0; oh * ow * plen];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (oy * ow + ox) * plen;
                let iy0 = oy * self.stride;
                let ix0 = ox * self.stride;
                for c in 0..self.in_c {
                    let ch = c * in_h * in_w;
                    for ky in 0..self.k {
                        let src = ch + (iy0 + ky) * in_w + ix0;
                        let dst = row + (c * self.k + ky) * self.k;
                        cols[dst..dst + self.k].copy_from_slice(&x[src..src + self.k]);
                    }
                }
            }
        }
        cols
    }

    /// `cols` -> output `[out_c][np]` where `np = out_h * out_w`.
    pub fn forward_cols(&self, cols: &[f64], np: usize, y: &mut Vec<f64>) {
        let plen = self.patch_len();
        y.clear();
        y.resize(self.out_c * np, 0.0);
        for oc in 0..self.out_c {
            let wrow = &self.w[oc * plen..(oc + 1) * plen];
            let yrow = &mut y[oc * np..(oc + 1) * np];
            for p in 0..np {
                let col = &cols[p * plen..(p + 1) * plen];
                let mut acc = self.b[oc];
                for i in 0..plen {
                    acc += wrow[i] * col[i];
                }
                yrow[p] = acc;
            }
        }
    }

    /// Accumulate parameter gradients and, when requested, add the input
    /// gradient into `dx` (`[in_c][in_h][in_w]`).
    pub fn backward(
        &mut self,
        cols: &[f64],
        np: usize,
        dy: &[f64],
        dx: Option<(&mut [f64], usize, usize)>,
    ) {
        let plen = self.patch_len();
        for oc in 0..self.out_c {
            let gwrow = &mut self.gw[oc * plen..(oc + 1) * plen];
            let dyrow = &dy[oc * np..(oc + 1) * np];
            let mut gbsum = 0.0;
            for p in 0..np {
                let g = dyrow[p];
                gbsum += g;
                if g != 0.0 {
                    let col = &cols[p * plen..(p + 1) * plen];
                    for i in 0..plen {
                        gwrow[i] += g * col[i];
                    }
                }
            }
            self.gb[oc] += gbsum;
        }
        if let Some((dx, in_h, in_w)) = dx {
            let (oh, ow) = self.out_hw(in_h, in_w).expect("shape checked at construction");
            let mut dcol = vec![0.0; plen];
            for oy in 0..oh {
                for ox in 0..ow {
                    let p = oy * ow + ox;
                    dcol.iter_mut().for_each(|v| *v = 0.0);
                    for oc in 0..self.out_c {
                        let g = dy[oc * np + p];
                        if g != 0.0 {
                            let wrow = &self.w[oc * plen..(oc + 1) * plen];
                            for i in 0..plen {
                                dcol[i] += g * wrow[i];
                            }
                        }
                    }
                    let iy0 = oy * self.stride;
                    let ix0 = ox * self.stride;
                    for c in 0..self.in_c {
                        let ch = c * in_h * in_w;
                        for ky in 0..self.k {
                            let dst = ch + (iy0 + ky) * in_w + ix0;
                            let src = (c * self.k + ky) * self.k;
                            for kx in 0..self.k {
                                dx[dst + kx] += dcol[src + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.gw.iter_mut().for_each(|v| *v = 0.0);
        self.gb.iter_mut().for_each(|v| *v = 0.0);
    }
}

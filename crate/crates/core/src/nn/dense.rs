//! Fully connected layer.

use rand::Rng;

#[derive(Clone, Debug)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim][in_dim]`
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Dense {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = (0..out_dim * in_dim).map(|_| rng.random_range(-bound..=bound)).collect();
        Dense {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
            gw: vec![0.0; out_dim * in_dim],
            gb: vec![0.0; out_dim],
        }
    }

    /// Shrink the initial weights, for output heads that should start
    /// near zero.
    pub fn scale_weights(&mut self, factor: f64) {
        for w in self.w.iter_mut() {
            *w *= factor;
        }
    }

    pub fn forward(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.reserve(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for i in 0..self.in_dim {
                acc += row[i] * x[i];
            }
            y.push(acc);
        }
    }

    /// Accumulate parameter gradients; add the input gradient into `dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        for o in 0..self.out_dim {
            let g = dy[o];
            self.gb[o] += g;
            if g != 0.0 {
                let grow = &mut self.gw[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    grow[i] += g * x[i];
                }
            }
        }
        if let Some(dx) = dx {
            for o in 0..self.out_dim {
                let g = dy[o];
                if g != 0.0 {
                    let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                    for i in 0..self.in_dim {
                        dx[i] += g * row[i];
                    }
                }
            }
        }
    }

    /// Input gradient only, leaving parameter gradients untouched. Used
    /// when a frozen network sits inside another network's objective.
    pub fn backward_input_only(&self, dy: &[f64], dx: &mut [f64]) {
        for o in 0..self.out_dim {
            let g = dy[o];
            if g != 0.0 {
                let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    dx[i] += g * row[i];
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.gw.iter_mut().for_each(|v| *v = 0.0);
        self.gb.iter_mut().for_each(|v| *v = 0.0);
    }
}

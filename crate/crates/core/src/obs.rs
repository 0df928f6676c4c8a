//! Camera observation types.
//!
//! The policy never sees a single frame: the current frame is stacked with
//! the previous one into a six-channel input, which gives the network enough
//! temporal context to infer motion. Frames are reference-counted because
//! the same frame appears in several replay transitions (as current,
//! successor, and bootstrap observation).

use std::sync::Arc;

/// 8-bit RGB frame, row-major, channels interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(h: usize, w: usize) -> Self {
        Image { h, w, data: vec![0; h * w * 3] }
    }

    pub fn filled(h: usize, w: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(h * w * 3);
        for _ in 0..h * w {
            data.extend_from_slice(&rgb);
        }
        Image { h, w, data }
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.w + x) * 3 + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.w + x) * 3 + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: u8) {
        self.data[(y * self.w + x) * 3 + c] = v;
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.w + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * self.w + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Two consecutive frames forming the six-channel policy input.
#[derive(Clone, Debug)]
pub struct FrameStack {
    pub prev: Arc<Image>,
    pub cur: Arc<Image>,
}

impl FrameStack {
    /// Stack at episode start: the first frame duplicated.
    pub fn first(frame: Arc<Image>) -> Self {
        FrameStack { prev: frame.clone(), cur: frame }
    }

    /// Stack after observing one more frame.
    pub fn advance(&self, next: Arc<Image>) -> Self {
        FrameStack { prev: self.cur.clone(), cur: next }
    }

    pub fn h(&self) -> usize {
        self.cur.h
    }

    pub fn w(&self) -> usize {
        self.cur.w
    }

    /// Network input: six planes (previous RGB then current RGB), values
    /// scaled to [0,1], written into `out` which must hold `6*h*w` entries.
    pub fn write_input_f32(&self, out: &mut [f32]) {
        let (h, w) = (self.h(), self.w());
        assert_eq!(out.len(), 6 * h * w);
        let plane = h * w;
        for (fi, frame) in [&self.prev, &self.cur].into_iter().enumerate() {
            for c in 0..3 {
                let base = (fi * 3 + c) * plane;
                for p in 0..plane {
                    out[base + p] = frame.data[p * 3 + c] as f32 / 255.0;
                }
            }
        }
    }

    pub fn to_input_f32(&self) -> Vec<f32> {
        let mut out = vec![0.0; 6 * self.h() * self.w()];
        self.write_input_f32(&mut out);
        out
    }

    /// Same layout at f64, for the gradient-check suite.
    pub fn to_input_f64(&self) -> Vec<f64> {
        self.to_input_f32().iter().map(|&v| v as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_input_layout_is_planar_prev_then_cur() {
        let mut a = Image::new(2, 2);
        a.set(0, 0, 0, 255);
        let mut b = Image::new(2, 2);
        b.set(1, 1, 2, 51);
        let stack = FrameStack { prev: Arc::new(a), cur: Arc::new(b) };
        let input = stack.to_input_f32();
        assert_eq!(input.len(), 6 * 4);
        assert_eq!(input[0], 1.0);
        assert_eq!(input[5 * 4 + 3], 0.2);
        assert_eq!(input.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn first_stack_duplicates_frame() {
        let f = Arc::new(Image::filled(2, 3, [10, 20, 30]));
        let s = FrameStack::first(f);
        assert!(Arc::ptr_eq(&s.prev, &s.cur));
    }

    #[test]
    fn advance_shifts_frames() {
        let a = Arc::new(Image::filled(2, 2, [1, 1, 1]));
        let b = Arc::new(Image::filled(2, 2, [2, 2, 2]));
        let s = FrameStack::first(a.clone()).advance(b.clone());
        assert!(Arc::ptr_eq(&s.prev, &a));
        assert!(Arc::ptr_eq(&s.cur, &b));
    }
}

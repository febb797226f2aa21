//! Single-channel image plane used throughout the pipeline.

/// A row-major luma plane with real-valued pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width, "frame buffer size");
        Frame { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Frame { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Frame { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Pixel lookup with coordinates clamped to the frame border.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }

    /// Bilinear sample at fractional coordinates, edge-clamped outside the frame.
    pub fn sample_bilinear(&self, y: f64, x: f64) -> f64 {
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y0 = y.floor();
        let x0 = x.floor();
        let fy = y - y0;
        let fx = x - x0;
        let (r0, c0) = (y0 as isize, x0 as isize);
        let p00 = self.get_clamped(r0, c0);
        let p01 = self.get_clamped(r0, c0 + 1);
        let p10 = self.get_clamped(r0 + 1, c0);
        let p11 = self.get_clamped(r0 + 1, c0 + 1);
        let top = lerp(p00, p01, fx);
        let bottom = lerp(p10, p11, fx);
        lerp(top, bottom, fy)
    }

    /// Bilinear resize using pixel-center alignment.
    pub fn resize(&self, height: usize, width: usize) -> Frame {
        if (height, width) == self.dims() {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Frame::from_fn(height, width, |r, c| {
            self.sample_bilinear((r as f64 + 0.5) * sy - 0.5, (c as f64 + 0.5) * sx - 0.5)
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Largest absolute pixel difference between two frames of equal size.
    pub fn max_abs_diff(&self, other: &Frame) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `a + (b - a) * t`; returns `a` exactly when `a == b` or `t == 0`.
#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

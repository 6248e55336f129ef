//! Image containers and sampling helpers shared by the rendering,
//! odometry and stereo code.

/// 12-bit grayscale image stored in 16-bit words, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u16>,
}

/// Intensity ceiling of the 12-bit range.
pub const GRAY_MAX: u16 = 4095;

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn at(&self, u: u32, v: u32) -> u16 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, value: u16) {
        self.values[v as usize * self.width as usize + u as usize] = value;
    }

    /// Converts to floating point normalized to [0, 1].
    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .map(|&v| f32::from(v) / f32::from(GRAY_MAX))
                .collect(),
        }
    }
}

/// Single-channel f32 image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn at(&self, u: u32, v: u32) -> f32 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, value: f32) {
        self.values[v as usize * self.width as usize + u as usize] = value;
    }

    /// Bilinear sample at continuous coordinates; pixel centers sit at
    /// integer coordinates. Returns `None` outside the valid rectangle.
    #[inline]
    pub fn sample(&self, u: f64, v: f64) -> Option<f32> {
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let max_u = (self.width - 1) as f64;
        let max_v = (self.height - 1) as f64;
        if u > max_u || v > max_v {
            return None;
        }
        let u0 = (u.floor() as u32).min(self.width.saturating_sub(2));
        let v0 = (v.floor() as u32).min(self.height.saturating_sub(2));
        let fu = (u - f64::from(u0)) as f32;
        let fv = (v - f64::from(v0)) as f32;
        let w = self.width as usize;
        let idx = v0 as usize * w + u0 as usize;
        let i00 = self.values[idx];
        let i10 = self.values[idx + 1];
        let i01 = self.values[idx + w];
        let i11 = self.values[idx + w + 1];
        Some(
            i00 * (1.0 - fu) * (1.0 - fv)
                + i10 * fu * (1.0 - fv)
                + i01 * (1.0 - fu) * fv
                + i11 * fu * fv,
        )
    }

    /// Bilinear sample together with the image gradient (du, dv).
    #[inline]
    pub fn sample_with_gradient(&self, u: f64, v: f64) -> Option<(f32, f32, f32)> {
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        if u > (self.width - 1) as f64 || v > (self.height - 1) as f64 {
            return None;
        }
        let u0 = (u.floor() as u32).min(self.width.saturating_sub(2));
        let v0 = (v.floor() as u32).min(self.height.saturating_sub(2));
        let fu = (u - f64::from(u0)) as f32;
        let fv = (v - f64::from(v0)) as f32;
        let w = self.width as usize;
        let idx = v0 as usize * w + u0 as usize;
        let i00 = self.values[idx];
        let i10 = self.values[idx + 1];
        let i01 = self.values[idx + w];
        let i11 = self.values[idx + w + 1];
        let value = i00 * (1.0 - fu) * (1.0 - fv)
            + i10 * fu * (1.0 - fv)
            + i01 * (1.0 - fu) * fv
            + i11 * fu * fv;
        let gu = (i10 - i00) * (1.0 - fv) + (i11 - i01) * fv;
        let gv = (i01 - i00) * (1.0 - fu) + (i11 - i10) * fu;
        Some((value, gu, gv))
    }

    /// Central-difference gradient magnitude at an integer pixel.
    #[inline]
    pub fn gradient_magnitude(&self, u: u32, v: u32) -> f32 {
        if u == 0 || v == 0 || u + 1 >= self.width || v + 1 >= self.height {
            return 0.0;
        }
        let gu = 0.5 * (self.at(u + 1, v) - self.at(u - 1, v));
        let gv = 0.5 * (self.at(u, v + 1) - self.at(u, v - 1));
        (gu * gu + gv * gv).sqrt()
    }

    /// 2x downsampling by 2x2 box averaging.
    pub fn half(&self) -> FloatImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let mut out = FloatImage::new(w, h);
        for v in 0..h {
            for u in 0..w {
                let (u2, v2) = (2 * u, 2 * v);
                let u3 = (u2 + 1).min(self.width - 1);
                let v3 = (v2 + 1).min(self.height - 1);
                let s = self.at(u2, v2) + self.at(u3, v2) + self.at(u2, v3) + self.at(u3, v3);
                out.set(u, v, s * 0.25);
            }
        }
        out
    }

    /// Image pyramid; level 0 is this image.
    pub fn pyramid(&self, levels: u32) -> Vec<FloatImage> {
        let mut out = Vec::with_capacity(levels as usize);
        out.push(self.clone());
        for _ in 1..levels {
            let next = out.last().unwrap().half();
            out.push(next);
        }
        out
    }
}

/// Summed-area table over f64 for windowed statistics. The table has one
/// extra row/column of zeros so `sum` needs no edge cases.
pub struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    pub fn build(width: u32, height: u32, values: impl Iterator<Item = f64>) -> Self {
        let w = width as usize + 1;
        let h = height as usize + 1;
        let mut sums = vec![0.0; w * h];
        let mut it = values;
        for v in 1..h {
            let mut row_acc = 0.0;
            for u in 1..w {
                let x = it.next().expect("iterator must cover the image");
                row_acc += x;
                sums[v * w + u] = sums[(v - 1) * w + u] + row_acc;
            }
        }
        Self { width: w, sums }
    }

    /// Sum over the inclusive pixel rectangle [u0, u1] x [v0, v1].
    #[inline]
    pub fn sum(&self, u0: u32, v0: u32, u1: u32, v1: u32) -> f64 {
        let (u0, v0, u1, v1) = (u0 as usize, v0 as usize, u1 as usize + 1, v1 as usize + 1);
        let w = self.width;
        self.sums[v1 * w + u1] - self.sums[v0 * w + u1] - self.sums[v1 * w + u0]
            + self.sums[v0 * w + u0]
    }
}


/// Per-pixel metric depth with validity mask and a best-cost confidence
/// channel (lower is better for cost-derived confidences).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
    pub confidence: Vec<f32>,
}

impl DepthImage {
    pub fn new_invalid(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: vec![0.0; n],
            valid: vec![false; n],
            confidence: vec![0.0; n],
        }
    }

    #[inline]
    pub fn idx(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    #[inline]
    pub fn depth_at(&self, u: u32, v: u32) -> Option<f32> {
        let i = self.idx(u, v);
        self.valid[i].then(|| self.depth[i])
    }

    #[inline]
    pub fn set_depth(&mut self, u: u32, v: u32, depth: f32, confidence: f32) {
        let i = self.idx(u, v);
        self.depth[i] = depth;
        self.valid[i] = true;
        self.confidence[i] = confidence;
    }

    #[inline]
    pub fn invalidate(&mut self, u: u32, v: u32) {
        let i = self.idx(u, v);
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

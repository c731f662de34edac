//! Difference-of-Gaussians feature detection on grayscale frames.

mod pgm;

pub use pgm::{read_pgm, write_pgm};

use crate::error::{Error, Result};
use crate::geometry::Detection;
use crate::scalar::Scalar;

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> ImageGrid<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width * height != values.len() {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} image needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![T::zero(); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.values[y * self.width + x] = v;
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite pixel at ({}, {})",
                i % self.width.max(1),
                i / self.width.max(1)
            )));
        }
        Ok(())
    }

    /// Population mean and standard deviation of all pixels.
    pub fn mean_std(&self) -> (T, T) {
        if self.values.is_empty() {
            return (T::zero(), T::zero());
        }
        let n = T::from_usize_lossy(self.values.len());
        let mean = self.values.iter().fold(T::zero(), |a, &v| a + v) / n;
        let var = self
            .values
            .iter()
            .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
            / n;
        (mean, var.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig<T> {
    /// Inner Gaussian sigma in pixels.
    pub sigma1: T,
    /// Outer over inner sigma.
    pub ratio: T,
    /// Threshold in standard deviations above the filtered mean.
    pub k_thresh: T,
}

impl<T: Scalar> Default for DetectorConfig<T> {
    fn default() -> Self {
        Self { sigma1: T::lit(2.0), ratio: T::lit(1.1), k_thresh: T::lit(3.0) }
    }
}

impl<T: Scalar> DetectorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 >= T::lit(0.5)) {
            return Err(Error::InvalidConfig(format!("sigma1 = {} is below 0.5 px", self.sigma1)));
        }
        if !(self.ratio > T::one()) || !self.ratio.is_finite() {
            return Err(Error::InvalidConfig(format!("ratio = {} must be > 1", self.ratio)));
        }
        if !self.k_thresh.is_finite() {
            return Err(Error::InvalidConfig("k_thresh must be finite".into()));
        }
        Ok(())
    }
}

/// Sampled Gaussian truncated at 4 sigma and renormalized to unit sum.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Vec<T> {
    let radius = (sigma * T::lit(4.0)).ceil().to_usize().unwrap_or(0);
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let mut k: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = T::from_usize_lossy(i) - T::from_usize_lossy(radius);
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let sum = k.iter().fold(T::zero(), |a, &v| a + v);
    for v in &mut k {
        *v = *v / sum;
    }
    k
}

/// Mirror index (edge pixel not repeated) into `0..n`.
fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

fn convolve_separable<T: Scalar>(img: &ImageGrid<T>, kernel: &[T]) -> ImageGrid<T> {
    let (w, h) = (img.width, img.height);
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &img.values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * row[mirror(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = mirror(y as isize + k as isize - r, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + kv * s;
            }
        }
    }
    ImageGrid { width: w, height: h, values: out }
}

/// `G(sigma1) * img - G(sigma1 * ratio) * img`, same size, mirrored borders.
pub fn dog_filter<T: Scalar>(img: &ImageGrid<T>, cfg: &DetectorConfig<T>) -> Result<ImageGrid<T>> {
    cfg.validate()?;
    img.check_finite()?;
    let narrow = convolve_separable(img, &gaussian_kernel(cfg.sigma1));
    let wide = convolve_separable(img, &gaussian_kernel(cfg.sigma1 * cfg.ratio));
    let values = narrow.values.iter().zip(&wide.values).map(|(&a, &b)| a - b).collect();
    Ok(ImageGrid { width: img.width, height: img.height, values })
}

/// Vertex offset of the parabola through `(-1, l)`, `(0, c)`, `(1, r)`.
fn parabola_offset<T: Scalar>(l: T, c: T, r: T) -> T {
    let denom = l - c - c + r;
    if denom >= T::zero() {
        return T::zero();
    }
    let half = T::lit(0.5);
    (half * (l - r) / denom).max(-half).min(half)
}

/// Strict 8-neighbourhood maxima above `mean + k_thresh * std`, refined to
/// sub-pixel precision. Border pixels never qualify.
pub fn detect_features<T: Scalar>(
    filtered: &ImageGrid<T>,
    cfg: &DetectorConfig<T>,
    frame: usize,
) -> Vec<Detection<T>> {
    let (w, h) = (filtered.width, filtered.height);
    let mut out = Vec::new();
    if w < 3 || h < 3 {
        return out;
    }
    let (mean, std) = filtered.mean_std();
    let thresh = mean + cfg.k_thresh * std;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = filtered.get(x, y);
            if !(c > thresh) {
                continue;
            }
            let strict = (y - 1..=y + 1)
                .flat_map(|yy| (x - 1..=x + 1).map(move |xx| (xx, yy)))
                .filter(|&(xx, yy)| xx != x || yy != y)
                .all(|(xx, yy)| filtered.get(xx, yy) < c);
            if !strict {
                continue;
            }
            let dx = parabola_offset(filtered.get(x - 1, y), c, filtered.get(x + 1, y));
            let dy = parabola_offset(filtered.get(x, y - 1), c, filtered.get(x, y + 1));
            out.push(Detection::new(
                frame,
                T::from_usize_lossy(x) + dx,
                T::from_usize_lossy(y) + dy,
                c,
            ));
        }
    }
    out
}

/// Filter and detect in one call.
pub fn detect_frame<T: Scalar>(
    img: &ImageGrid<T>,
    cfg: &DetectorConfig<T>,
    frame: usize,
) -> Result<Vec<Detection<T>>> {
    let filtered = dog_filter(img, cfg)?;
    Ok(detect_features(&filtered, cfg, frame))
}

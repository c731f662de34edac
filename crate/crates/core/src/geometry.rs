//! Geometric and circular-statistics primitives shared by every stage.
//!
//! Positions are image coordinates in pixels: `x` grows to the right and `y`
//! grows downward (row index). Angles are `atan2(dy, dx)` in that frame, kept
//! in the canonical range `(-pi, pi]`. All wrapping goes through [`wrap_angle`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Resultant lengths below this are treated as having no mean direction.
pub const DEGENERATE_RBAR: f64 = 1e-9;

/// Wraps any finite angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r < T::zero() {
        r = r + two_pi;
    }
    // r in [0, 2pi)
    if r > T::PI() {
        r - two_pi
    } else {
        r
    }
}

/// Signed shortest rotation from `b` to `a`, in `(-pi, pi]`.
pub fn angular_diff<T: Scalar>(a: T, b: T) -> T {
    wrap_angle(a - b)
}

/// Mean direction and mean resultant length of a weighted angle sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanResultant<T> {
    pub mean: T,
    pub rbar: T,
    /// `rbar` below [`DEGENERATE_RBAR`]: `mean` carries no information.
    pub degenerate: bool,
}

/// Weighted circular mean. Fails when the weights carry no mass.
pub fn mean_resultant<T: Scalar>(angles: &[T], weights: &[T]) -> Result<MeanResultant<T>> {
    if angles.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} angles but {} weights",
            angles.len(),
            weights.len()
        )));
    }
    let mut s = T::zero();
    let mut c = T::zero();
    let mut total = T::zero();
    for (&a, &w) in angles.iter().zip(weights) {
        if w < T::zero() || !w.is_finite() {
            return Err(Error::InvalidInput("weights must be finite and >= 0".into()));
        }
        s = s + w * a.sin();
        c = c + w * a.cos();
        total = total + w;
    }
    if total <= T::zero() {
        return Err(Error::Degenerate("all weights are zero"));
    }
    let rbar = (s.hypot(c) / total).min(T::one());
    Ok(MeanResultant {
        mean: wrap_angle(s.atan2(c)),
        rbar,
        degenerate: rbar < T::lit(DEGENERATE_RBAR),
    })
}

/// Unweighted convenience wrapper around [`mean_resultant`].
pub fn mean_resultant_unweighted<T: Scalar>(angles: &[T]) -> Result<MeanResultant<T>> {
    let w = vec![T::one(); angles.len()];
    mean_resultant(angles, &w)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn rotate(self, a: T) -> Self {
        let (s, c) = a.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// A localized point feature in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    pub frame: usize,
    pub x: T,
    pub y: T,
    pub score: T,
}

impl<T: Scalar> Detection<T> {
    pub fn new(frame: usize, x: T, y: T, score: T) -> Self {
        Self { frame, x, y, score }
    }

    pub fn pos(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

/// An accepted link from frame `frame` to `frame + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector<T> {
    pub frame: usize,
    pub origin: Vec2<T>,
    pub disp: Vec2<T>,
}

impl<T: Scalar> FlowVector<T> {
    pub fn new(frame: usize, origin: Vec2<T>, disp: Vec2<T>) -> Self {
        Self { frame, origin, disp }
    }

    pub fn angle(&self) -> T {
        self.disp.angle()
    }

    pub fn speed(&self) -> T {
        self.disp.norm()
    }

    pub fn end(&self) -> Vec2<T> {
        self.origin.add(self.disp)
    }
}

/// Ties pixel geometry to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig<T> {
    pub meters_per_pixel: T,
    pub fps: T,
    /// Physical speed cap in m/s.
    pub v_max: T,
}

/// 44.7 km/h expressed in m/s.
pub const DEFAULT_V_MAX: f64 = 44.7 / 3.6;

impl<T: Scalar> Default for CalibrationConfig<T> {
    fn default() -> Self {
        Self {
            meters_per_pixel: T::lit(0.05),
            fps: T::lit(20.0),
            v_max: T::lit(DEFAULT_V_MAX),
        }
    }
}

impl<T: Scalar> CalibrationConfig<T> {
    /// Largest plausible displacement between consecutive frames, in pixels.
    pub fn max_disp_px(&self) -> T {
        self.v_max / self.meters_per_pixel / self.fps
    }

    /// Converts a px/frame speed to m/s.
    pub fn px_per_frame_to_mps(&self, v: T) -> T {
        v * self.meters_per_pixel * self.fps
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if !ok(self.meters_per_pixel) || !ok(self.fps) || !ok(self.v_max) {
            return Err(Error::InvalidConfig(
                "calibration values must be finite and > 0".into(),
            ));
        }
        let d = self.max_disp_px();
        if !ok(d) {
            return Err(Error::InvalidConfig(format!("max displacement {d} px is not usable")));
        }
        Ok(())
    }
}

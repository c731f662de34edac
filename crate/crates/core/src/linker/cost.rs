//! Triplet link cost: equidistance, turn and cohort-conformity penalties,
//! each scaled by its variance over accepted links.

use crate::geometry::Vec2;
use crate::scalar::Scalar;

/// Displacements shorter than this (px) have no usable direction.
pub const STATIONARY_PX: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown<T> {
    pub c_eq: T,
    pub c_turn: T,
    pub c_cohort: T,
    pub total: T,
}

/// Component weights (summing to 1) and component variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<T> {
    pub w_eq: T,
    pub w_turn: T,
    pub w_cohort: T,
    pub var_eq: T,
    pub var_turn: T,
    pub var_cohort: T,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            w_eq: third,
            w_turn: third,
            w_cohort: third,
            var_eq: T::one(),
            var_turn: T::one(),
            var_cohort: T::one(),
        }
    }
}

impl<T: Scalar> Weights<T> {
    pub fn combine(&self, c_eq: T, c_turn: T, c_cohort: T) -> T {
        self.w_eq * c_eq / self.var_eq
            + self.w_turn * c_turn / self.var_turn
            + self.w_cohort * c_cohort / self.var_cohort
    }

    /// Re-estimates variances from the accepted links and sets each weight
    /// proportional to the inverse variance. A component that is zero on every
    /// accepted link (no cohort model yet, or no predecessors) says nothing
    /// about link quality, so it gets weight zero instead of the floor's
    /// near-infinite precision.
    pub fn reestimate(&self, accepted: &[CostBreakdown<T>], var_floor: T, eps: T) -> Self {
        if accepted.is_empty() {
            return *self;
        }
        let n = T::from_usize_lossy(accepted.len());
        let var = |f: fn(&CostBreakdown<T>) -> T| {
            let mean = accepted.iter().map(f).fold(T::zero(), |a, v| a + v) / n;
            let v = accepted
                .iter()
                .map(f)
                .fold(T::zero(), |a, v| a + (v - mean) * (v - mean))
                / n;
            v.max(var_floor)
        };
        let var_eq = var(|c| c.c_eq);
        let var_turn = var(|c| c.c_turn);
        let var_cohort = var(|c| c.c_cohort);
        let silent = |f: fn(&CostBreakdown<T>) -> T| accepted.iter().all(|c| f(c) == T::zero());
        let quiet = [silent(|c| c.c_eq), silent(|c| c.c_turn), silent(|c| c.c_cohort)];
        if quiet.iter().all(|&q| q) {
            return *self;
        }
        let mut p = [var_eq, var_turn, var_cohort].map(|v| T::one() / (v + eps));
        for (pi, &q) in p.iter_mut().zip(&quiet) {
            if q {
                *pi = T::zero();
            }
        }
        let s = p[0] + p[1] + p[2];
        Self {
            w_eq: p[0] / s,
            w_turn: p[1] / s,
            w_cohort: p[2] / s,
            var_eq,
            var_turn,
            var_cohort,
        }
    }
}

/// `1 - 2 sqrt(d1 d2) / (d1 + d2)`; zero when both steps vanish.
pub fn equidistance_penalty<T: Scalar>(d1: T, d2: T) -> T {
    let s = d1 + d2;
    if s <= T::zero() {
        return T::zero();
    }
    (T::one() - (T::lit(2.0) * (d1 * d2).sqrt()) / s).max(T::zero()).min(T::one())
}

/// `(1 - cos(theta)) / 2` between two steps; zero if either is stationary.
pub fn turn_penalty<T: Scalar>(a: Vec2<T>, b: Vec2<T>) -> T {
    let (na, nb) = (a.norm(), b.norm());
    let still = T::lit(STATIONARY_PX);
    if na < still || nb < still {
        return T::zero();
    }
    let cos = (a.dot(b) / (na * nb)).max(-T::one()).min(T::one());
    (T::one() - cos) / T::lit(2.0)
}

/// Smallest `(1 - cos(theta - mu)) / 2` over the cohort mean directions.
pub fn cohort_penalty<T: Scalar>(disp: Vec2<T>, cohort_means: Option<&[T]>) -> T {
    let Some(means) = cohort_means.filter(|m| !m.is_empty()) else {
        return T::zero();
    };
    if disp.norm() < T::lit(STATIONARY_PX) {
        return T::zero();
    }
    let theta = disp.angle();
    means
        .iter()
        .map(|&mu| (T::one() - (theta - mu).cos()) / T::lit(2.0))
        .fold(T::one(), |a, v| a.min(v))
        .max(T::zero())
}

/// Cost of a link given the adjacent step of its triplet (`pred_disp`), the
/// cohort mean directions and the current weights. Without an adjacent step
/// only the cohort term applies.
pub fn link_cost<T: Scalar>(
    pred_disp: Option<Vec2<T>>,
    link_disp: Vec2<T>,
    cohort_means: Option<&[T]>,
    w: &Weights<T>,
) -> CostBreakdown<T> {
    let (c_eq, c_turn) = match pred_disp {
        Some(p) => (equidistance_penalty(p.norm(), link_disp.norm()), turn_penalty(p, link_disp)),
        None => (T::zero(), T::zero()),
    };
    let c_cohort = cohort_penalty(link_disp, cohort_means);
    CostBreakdown { c_eq, c_turn, c_cohort, total: w.combine(c_eq, c_turn, c_cohort) }
}

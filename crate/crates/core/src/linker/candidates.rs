use std::collections::HashMap;

use crate::geometry::{Detection, Vec2};
use crate::scalar::Scalar;

/// A gated tentative link from detection `from` in frame t to `to` in t+1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateLink<T> {
    pub from: usize,
    pub to: usize,
    pub disp: Vec2<T>,
    /// Index of the selected t-1 -> t link ending at `from`, when one exists.
    pub best_pred: Option<usize>,
}

/// Uniform grid over detection positions with cell side `cell`.
pub(crate) struct GridIndex {
    cell: f64,
    bins: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    pub(crate) fn new<T: Scalar>(points: impl Iterator<Item = Vec2<T>>, cell: T) -> Self {
        let cell = cell.to_f64_lossy();
        let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.enumerate() {
            bins.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, bins }
    }

    fn key<T: Scalar>(p: Vec2<T>, cell: f64) -> (i64, i64) {
        (
            (p.x.to_f64_lossy() / cell).floor() as i64,
            (p.y.to_f64_lossy() / cell).floor() as i64,
        )
    }

    /// Indices in the 3x3 block of cells around `p`; callers filter by distance.
    pub(crate) fn around<T: Scalar>(&self, p: Vec2<T>) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = Self::key(p, self.cell);
        (cy - 1..=cy + 1)
            .flat_map(move |y| (cx - 1..=cx + 1).map(move |x| (x, y)))
            .filter_map(move |k| self.bins.get(&k))
            .flatten()
            .copied()
    }
}

/// All pairs closer than `max_disp`, sorted by `(from, to)`.
pub fn gen_candidates<T: Scalar>(
    frame_t: &[Detection<T>],
    frame_t1: &[Detection<T>],
    max_disp: T,
) -> Vec<CandidateLink<T>> {
    if frame_t.is_empty() || frame_t1.is_empty() || !(max_disp > T::zero()) {
        return Vec::new();
    }
    let grid = GridIndex::new(frame_t1.iter().map(|d| d.pos()), max_disp);
    let mut out = Vec::new();
    let mut near = Vec::new();
    for (i, a) in frame_t.iter().enumerate() {
        near.clear();
        near.extend(grid.around(a.pos()).filter(|&j| {
            frame_t1[j].pos().sub(a.pos()).norm() <= max_disp
        }));
        near.sort_unstable();
        out.extend(near.iter().map(|&j| CandidateLink {
            from: i,
            to: j,
            disp: frame_t1[j].pos().sub(a.pos()),
            best_pred: None,
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64) -> Detection<f64> {
        Detection::new(0, x, y, 1.0)
    }

    #[test]
    fn gate_examples() {
        assert_eq!(gen_candidates(&[det(0.0, 0.0)], &[det(3.0, 4.0)], 12.4).len(), 1);
        assert!(gen_candidates(&[det(0.0, 0.0)], &[det(12.0, 16.0)], 12.4).is_empty());
        assert!(gen_candidates::<f64>(&[], &[det(0.0, 0.0)], 12.4).is_empty());
    }

    #[test]
    fn matches_brute_force() {
        let mut s = 12345u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) * 200.0 - 50.0
        };
        let a: Vec<_> = (0..300).map(|_| det(rnd(), rnd())).collect();
        let b: Vec<_> = (0..300).map(|_| det(rnd(), rnd())).collect();
        let got: Vec<_> = gen_candidates(&a, &b, 9.5).iter().map(|c| (c.from, c.to)).collect();
        let mut want = Vec::new();
        for (i, p) in a.iter().enumerate() {
            for (j, q) in b.iter().enumerate() {
                if q.pos().sub(p.pos()).norm() <= 9.5 {
                    want.push((i, j));
                }
            }
        }
        assert_eq!(got, want);
    }
}

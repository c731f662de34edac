//! Link-count versus cost trade-off, resolved at the point nearest the
//! utopia corner (all links, zero cost) after normalizing both axes.

use super::assign::{solve_assignment, AssignmentSolution};
use super::candidates::CandidateLink;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint<T> {
    pub link_count: usize,
    pub total_cost: T,
    pub lambda: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFrontier<T> {
    /// One point per grid value, in ascending lambda.
    pub points: Vec<FrontierPoint<T>>,
    pub chosen: usize,
    /// Every point identical; `chosen` is then the only distinct answer.
    pub degenerate: bool,
}

/// `n` log-spaced rewards over `[lo_mult, hi_mult] * median(cost)`. Falls back
/// to the mean positive cost, then to 1, when the median is zero.
pub fn default_lambda_grid<T: Scalar>(costs: &[T], n: usize, lo_mult: T, hi_mult: T) -> Vec<T> {
    let mut sorted: Vec<T> = costs.iter().copied().filter(|c| c.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut scale = if sorted.is_empty() {
        T::zero()
    } else {
        let m = sorted.len();
        if m % 2 == 1 {
            sorted[m / 2]
        } else {
            (sorted[m / 2 - 1] + sorted[m / 2]) / T::lit(2.0)
        }
    };
    if !(scale > T::lit(1e-12)) {
        let pos: Vec<T> = sorted.iter().copied().filter(|&c| c > T::lit(1e-12)).collect();
        scale = if pos.is_empty() {
            T::one()
        } else {
            pos.iter().fold(T::zero(), |a, &c| a + c) / T::from_usize_lossy(pos.len())
        };
    }
    let n = n.max(2);
    let (lo, hi) = ((scale * lo_mult).ln(), (scale * hi_mult).ln());
    (0..n)
        .map(|i| {
            let t = T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
            (lo + (hi - lo) * t).exp()
        })
        .collect()
}

/// Solves one assignment per grid value and picks the utopia-nearest point.
/// Ties go to the larger link count, then to the smaller lambda.
///
/// Link counts are normalized over the frontier's extremes. Costs are
/// normalized against `lambda_max * n_max`, the most any point on this grid
/// could cost (a selected link never costs more than its reward), so the
/// cost axis is measured in reward units.
pub fn pareto_select<T: Scalar>(
    candidates: &[CandidateLink<T>],
    costs: &[T],
    lambda_grid: &[T],
) -> Result<(ParetoFrontier<T>, AssignmentSolution<T>)> {
    if lambda_grid.len() < 2 || lambda_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "lambda grid needs at least two strictly increasing values".into(),
        ));
    }
    let solutions: Vec<AssignmentSolution<T>> = lambda_grid
        .iter()
        .map(|&l| solve_assignment(candidates, costs, l))
        .collect();
    let points: Vec<FrontierPoint<T>> = solutions
        .iter()
        .map(|s| FrontierPoint { link_count: s.link_count(), total_cost: s.total_cost, lambda: s.lambda })
        .collect();

    let n_min = points.iter().map(|p| p.link_count).min().unwrap();
    let n_max = points.iter().map(|p| p.link_count).max().unwrap();
    let c_min = points.iter().map(|p| p.total_cost).fold(T::infinity(), T::min);
    let degenerate = points.iter().all(|p| p.link_count == points[0].link_count && p.total_cost == points[0].total_cost);
    let lambda_max = lambda_grid[lambda_grid.len() - 1];
    let c_max = (lambda_max * T::from_usize_lossy(n_max)).max(points.iter().map(|p| p.total_cost).fold(c_min, T::max));

    let span_n = T::from_usize_lossy(n_max - n_min);
    let span_c = c_max - c_min;
    let mut chosen = 0;
    let mut best = T::infinity();
    for (k, p) in points.iter().enumerate() {
        let x = if n_max == n_min {
            T::one()
        } else {
            T::from_usize_lossy(p.link_count - n_min) / span_n
        };
        let y = if span_c > T::zero() { (p.total_cost - c_min) / span_c } else { T::zero() };
        let d = (T::one() - x) * (T::one() - x) + y * y;
        let better = d < best || (d == best && p.link_count > points[chosen].link_count);
        if better {
            best = d;
            chosen = k;
        }
    }
    let solution = solutions.into_iter().nth(chosen).unwrap();
    Ok((ParetoFrontier { points, chosen, degenerate }, solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    fn link(from: usize, to: usize) -> CandidateLink<f64> {
        CandidateLink { from, to, disp: Vec2::default(), best_pred: None }
    }

    #[test]
    fn single_candidate_hand_oracle() {
        let (f, s) = pareto_select(&[link(0, 0)], &[0.1], &[0.05, 0.5, 1.0]).unwrap();
        let pts: Vec<_> = f.points.iter().map(|p| (p.link_count, p.total_cost)).collect();
        assert_eq!(pts, vec![(0, 0.0), (1, 0.1), (1, 0.1)]);
        assert_eq!(f.points[f.chosen].link_count, 1);
        assert_eq!(s.link_count(), 1);
        assert!(!f.degenerate);
    }

    #[test]
    fn identical_costs_step_at_threshold() {
        let cands: Vec<_> = (0..4).map(|i| link(i, i)).collect();
        let costs = [0.3; 4];
        let grid = [0.1, 0.2, 0.29, 0.31, 0.5, 1.0];
        let (f, _) = pareto_select(&cands, &costs, &grid).unwrap();
        let counts: Vec<_> = f.points.iter().map(|p| p.link_count).collect();
        assert_eq!(counts, vec![0, 0, 0, 4, 4, 4]);
    }

    #[test]
    fn degenerate_frontier_flagged() {
        let (f, s) = pareto_select(&[link(0, 0)], &[0.0], &[1.0, 2.0]).unwrap();
        assert!(f.degenerate);
        assert_eq!(s.link_count(), 1);
        let (f, _) = pareto_select::<f64>(&[], &[], &[1.0, 2.0]).unwrap();
        assert!(f.degenerate);
    }

    #[test]
    fn grid_validation_and_shape() {
        assert!(pareto_select(&[link(0, 0)], &[0.1], &[1.0]).is_err());
        assert!(pareto_select(&[link(0, 0)], &[0.1], &[1.0, 1.0]).is_err());
        let g = default_lambda_grid(&[1.0f64, 2.0, 3.0], 16, 0.1, 10.0);
        assert_eq!(g.len(), 16);
        assert!((g[0] - 0.2).abs() < 1e-12 && (g[15] - 20.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let g = default_lambda_grid(&[0.0f64, 0.0, 0.0], 16, 0.1, 10.0);
        assert!((g[0] - 0.1).abs() < 1e-12);
    }
}

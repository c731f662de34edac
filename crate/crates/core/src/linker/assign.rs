//! Exact one-to-one link selection.
//!
//! Maximizes `sum(lambda - cost)` over matchings of the candidate graph. Each
//! source row gets a private zero-cost "unmatched" column, turning the problem
//! into a rectangular assignment that is solved row by row with shortest
//! augmenting paths (Dijkstra on reduced costs, dual potentials kept feasible).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::candidates::CandidateLink;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSolution<T> {
    /// Indices into the candidate list, ascending.
    pub selected: Vec<usize>,
    pub total_cost: T,
    pub lambda: T,
}

impl<T: Scalar> AssignmentSolution<T> {
    pub fn empty(lambda: T) -> Self {
        Self { selected: Vec::new(), total_cost: T::zero(), lambda }
    }

    pub fn link_count(&self) -> usize {
        self.selected.len()
    }

    /// `sum(lambda - cost)` accumulated in selection order.
    pub fn objective(&self, costs: &[T]) -> T {
        self.selected
            .iter()
            .fold(T::zero(), |a, &k| a + (self.lambda - costs[k]))
    }
}

#[derive(Clone, Copy)]
struct HeapItem<T> {
    dist: T,
    col: usize,
}

impl<T: Scalar> PartialEq for HeapItem<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for HeapItem<T> {}
impl<T: Scalar> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for HeapItem<T> {
    // min-heap on (dist, col)
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| o.col.cmp(&self.col))
    }
}

struct Edge<T> {
    col: usize,
    cost: T,
    cand: usize,
}

/// Selects the maximum-reward one-to-one link set. Links whose reward
/// `lambda - cost` is not strictly positive are never selected.
pub fn solve_assignment<T: Scalar>(
    candidates: &[CandidateLink<T>],
    costs: &[T],
    lambda: T,
) -> AssignmentSolution<T> {
    assert_eq!(candidates.len(), costs.len(), "one cost per candidate");
    let n_rows = candidates.iter().map(|c| c.from + 1).max().unwrap_or(0);
    let n_real = candidates.iter().map(|c| c.to + 1).max().unwrap_or(0);

    let mut adj: Vec<Vec<Edge<T>>> = (0..n_rows).map(|_| Vec::new()).collect();
    for (k, c) in candidates.iter().enumerate() {
        let r = lambda - costs[k];
        if r > T::zero() {
            adj[c.from].push(Edge { col: c.to, cost: -r, cand: k });
        }
    }
    for (row, edges) in adj.iter_mut().enumerate() {
        edges.sort_by_key(|e| e.col);
        if !edges.is_empty() {
            edges.push(Edge { col: n_real + row, cost: T::zero(), cand: usize::MAX });
        }
    }
    let n_cols = n_real + n_rows;

    let mut u: Vec<T> = adj
        .iter()
        .map(|es| es.iter().fold(T::zero(), |m, e| m.min(e.cost)))
        .collect();
    let mut v = vec![T::zero(); n_cols];
    let mut row_of_col: Vec<Option<usize>> = vec![None; n_cols];
    let mut col_of_row: Vec<Option<usize>> = vec![None; n_rows];

    let mut dist = vec![T::infinity(); n_cols];
    let mut pred_row = vec![usize::MAX; n_cols];
    let mut done = vec![false; n_cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();

    for s in 0..n_rows {
        if adj[s].is_empty() {
            continue;
        }
        for &j in &touched {
            dist[j] = T::infinity();
            done[j] = false;
        }
        touched.clear();
        finalized.clear();
        heap.clear();

        let relax = |i: usize,
                         base: T,
                         u: &[T],
                         v: &[T],
                         dist: &mut [T],
                         pred_row: &mut [usize],
                         done: &[bool],
                         touched: &mut Vec<usize>,
                         heap: &mut BinaryHeap<HeapItem<T>>| {
            for e in &adj[i] {
                if done[e.col] {
                    continue;
                }
                let nd = base + (e.cost - u[i] - v[e.col]).max(T::zero());
                if nd < dist[e.col] {
                    if dist[e.col] == T::infinity() {
                        touched.push(e.col);
                    }
                    dist[e.col] = nd;
                    pred_row[e.col] = i;
                    heap.push(HeapItem { dist: nd, col: e.col });
                }
            }
        };

        relax(s, T::zero(), &u, &v, &mut dist, &mut pred_row, &done, &mut touched, &mut heap);
        let sink = loop {
            let Some(HeapItem { dist: d, col: j }) = heap.pop() else {
                unreachable!("own unmatched column is always reachable");
            };
            if done[j] || d > dist[j] {
                continue;
            }
            done[j] = true;
            finalized.push(j);
            match row_of_col[j] {
                None => break j,
                Some(i) => relax(i, d, &u, &v, &mut dist, &mut pred_row, &done, &mut touched, &mut heap),
            }
        };

        let total = dist[sink];
        u[s] = u[s] + total;
        for &j in &finalized {
            if j == sink {
                continue;
            }
            let slack = total - dist[j];
            v[j] = v[j] - slack;
            if let Some(i) = row_of_col[j] {
                u[i] = u[i] + slack;
            }
        }

        let mut j = sink;
        loop {
            let i = pred_row[j];
            let prev = col_of_row[i];
            row_of_col[j] = Some(i);
            col_of_row[i] = Some(j);
            if i == s {
                break;
            }
            j = prev.expect("rows on an augmenting path are matched");
        }
    }

    let mut selected: Vec<usize> = col_of_row
        .iter()
        .enumerate()
        .filter_map(|(row, c)| {
            let c = (*c)?;
            if c >= n_real {
                return None;
            }
            adj[row].iter().find(|e| e.col == c).map(|e| e.cand)
        })
        .collect();
    selected.sort_unstable();
    let total_cost = selected.iter().fold(T::zero(), |a, &k| a + costs[k]);
    AssignmentSolution { selected, total_cost, lambda }
}

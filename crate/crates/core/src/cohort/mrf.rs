//! Potts-regularized relabeling of flow vectors by label-expansion moves.
//!
//! Energy: `sum_i D_i(l_i) + beta * sum_{(i,j)} [l_i != l_j]` with the data
//! term `D_i(l) = -ln w_l - kappa_l cos(theta_i - mu_l) + ln I0(kappa_l)`.
//! Each expansion move is a submodular binary problem solved exactly by a
//! minimum cut; a move is kept only when it lowers the energy.

use super::graph::NeighborGraph;
use super::maxflow::FlowGraph;
use super::mixture::VonMisesComponent;
use super::vonmises::log_i0;
use crate::scalar::Scalar;

pub const MRF_MAX_SWEEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MrfResult<T> {
    pub labels: Vec<usize>,
    pub energy_before: T,
    pub energy_after: T,
    /// Energy after each accepted move, starting with the initial energy.
    pub energy_trace: Vec<T>,
    pub moves_accepted: usize,
}

/// `n x k` data costs, row-major.
pub fn data_costs<T: Scalar>(angles: &[T], comps: &[VonMisesComponent<T>]) -> Vec<T> {
    let k = comps.len();
    let consts: Vec<T> = comps
        .iter()
        .map(|c| {
            let lw = if c.weight > T::zero() { c.weight.ln() } else { T::lit(-700.0) };
            -lw + log_i0(c.kappa)
        })
        .collect();
    let mut out = Vec::with_capacity(angles.len() * k);
    for &a in angles {
        for (c, comp) in comps.iter().enumerate() {
            out.push(consts[c] - comp.kappa * (a - comp.mu).cos());
        }
    }
    out
}

pub fn energy<T: Scalar>(data: &[T], k: usize, graph: &NeighborGraph, beta: T, labels: &[usize]) -> T {
    let unary = labels
        .iter()
        .enumerate()
        .fold(T::zero(), |a, (i, &l)| a + data[i * k + l]);
    let cuts = graph.edges.iter().filter(|&&(i, j)| labels[i] != labels[j]).count();
    unary + beta * T::from_usize_lossy(cuts)
}

fn argmin_labels<T: Scalar>(data: &[T], k: usize) -> Vec<usize> {
    data.chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::infinity()), |b, (i, &v)| if v < b.1 { (i, v) } else { b })
                .0
        })
        .collect()
}

/// Best labeling reachable from `labels` by switching any subset to `alpha`.
fn expansion_move<T: Scalar>(
    data: &[T],
    k: usize,
    graph: &NeighborGraph,
    beta: T,
    labels: &[usize],
    alpha: usize,
) -> Vec<usize> {
    let n = labels.len();
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);
    // linear coefficient of x_i (x_i = 1 means "switch to alpha")
    let mut lin: Vec<T> = (0..n).map(|i| data[i * k + alpha] - data[i * k + labels[i]]).collect();
    let ind = |b: bool| if b { beta } else { T::zero() };
    for &(i, j) in &graph.edges {
        let a = ind(labels[i] != labels[j]);
        let b = ind(labels[i] != alpha);
        let c = ind(alpha != labels[j]);
        // E = A + (C - A) x_i + (D - C) x_j + (B + C - A - D)(1 - x_i) x_j, D = 0
        lin[i] = lin[i] + (c - a);
        lin[j] = lin[j] - c;
        let pair = b + c - a;
        if pair > T::zero() {
            g.add_edge(i, j, pair, T::zero());
        }
    }
    for (i, &l) in lin.iter().enumerate() {
        if l > T::zero() {
            g.add_edge(s, i, l, T::zero());
        } else if l < T::zero() {
            g.add_edge(i, t, -l, T::zero());
        }
    }
    let (_, source_side) = g.min_cut(s, t);
    (0..n)
        .map(|i| if source_side[i] { labels[i] } else { alpha })
        .collect()
}

/// Relabels vectors starting from the posterior argmax. With `beta = 0` the
/// starting labels are already optimal and are returned unchanged.
pub fn mrf_relabel<T: Scalar>(
    angles: &[T],
    comps: &[VonMisesComponent<T>],
    graph: &NeighborGraph,
    beta: T,
) -> MrfResult<T> {
    let k = comps.len();
    if k == 0 || angles.is_empty() {
        return MrfResult {
            labels: vec![0; angles.len()],
            energy_before: T::zero(),
            energy_after: T::zero(),
            energy_trace: vec![T::zero()],
            moves_accepted: 0,
        };
    }
    let data = data_costs(angles, comps);
    relabel_with_costs(&data, k, graph, beta, argmin_labels(&data, k))
}

/// Expansion-move minimization over explicit data costs (`n x k`).
pub fn relabel_with_costs<T: Scalar>(
    data: &[T],
    k: usize,
    graph: &NeighborGraph,
    beta: T,
    init: Vec<usize>,
) -> MrfResult<T> {
    let mut labels = init;
    let e0 = energy(data, k, graph, beta, &labels);
    let mut current = e0;
    let mut trace = vec![e0];
    let mut accepted = 0;
    if beta > T::zero() && k > 1 {
        for _ in 0..MRF_MAX_SWEEPS {
            let mut improved = false;
            for alpha in 0..k {
                let cand = expansion_move(data, k, graph, beta, &labels, alpha);
                let e = energy(data, k, graph, beta, &cand);
                let tol = T::lit(1e-12) * current.abs().max(T::one());
                if e < current - tol {
                    labels = cand;
                    current = e;
                    trace.push(e);
                    accepted += 1;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }
    MrfResult { labels, energy_before: e0, energy_after: current, energy_trace: trace, moves_accepted: accepted }
}

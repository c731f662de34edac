//! Dinic max-flow with real capacities, used for binary graph-cut moves.

use std::collections::VecDeque;

use crate::scalar::Scalar;

struct Arc<T> {
    to: usize,
    cap: T,
}

pub(crate) struct FlowGraph<T> {
    arcs: Vec<Arc<T>>,
    head: Vec<Vec<usize>>,
    eps: T,
}

impl<T: Scalar> FlowGraph<T> {
    pub(crate) fn new(n: usize) -> Self {
        Self { arcs: Vec::new(), head: vec![Vec::new(); n], eps: T::lit(1e-12) }
    }

    /// Adds `u -> v` with capacity `cap` and `v -> u` with `rev_cap`.
    pub(crate) fn add_edge(&mut self, u: usize, v: usize, cap: T, rev_cap: T) {
        self.head[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap });
        self.head[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: rev_cap });
    }

    fn bfs(&self, s: usize, t: usize, level: &mut [i64]) -> bool {
        level.iter_mut().for_each(|l| *l = -1);
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.head[u] {
                let arc = &self.arcs[a];
                if arc.cap > self.eps && level[arc.to] < 0 {
                    level[arc.to] = level[u] + 1;
                    q.push_back(arc.to);
                }
            }
        }
        level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: T, level: &[i64], it: &mut [usize]) -> T {
        if u == t {
            return pushed;
        }
        while it[u] < self.head[u].len() {
            let a = self.head[u][it[u]];
            let (to, cap) = (self.arcs[a].to, self.arcs[a].cap);
            if cap > self.eps && level[to] == level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap), level, it);
                if got > T::zero() {
                    self.arcs[a].cap = self.arcs[a].cap - got;
                    self.arcs[a ^ 1].cap = self.arcs[a ^ 1].cap + got;
                    return got;
                }
            }
            it[u] += 1;
        }
        T::zero()
    }

    /// Runs max-flow and returns the flow value plus, per node, whether it
    /// stays on the source side of the minimum cut.
    pub(crate) fn min_cut(&mut self, s: usize, t: usize) -> (T, Vec<bool>) {
        let n = self.head.len();
        let mut level = vec![-1i64; n];
        let mut flow = T::zero();
        while self.bfs(s, t, &mut level) {
            let mut it = vec![0usize; n];
            loop {
                let f = self.dfs(s, t, T::infinity(), &level, &mut it);
                if !(f > T::zero()) {
                    break;
                }
                flow = flow + f;
            }
        }
        // residual reachability from s
        let mut side = vec![false; n];
        side[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.head[u] {
                let arc = &self.arcs[a];
                if arc.cap > self.eps && !side[arc.to] {
                    side[arc.to] = true;
                    q.push_back(arc.to);
                }
            }
        }
        (flow, side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS example, max flow 23
        let mut g = FlowGraph::new(6);
        for &(u, v, c) in &[(0, 1, 16.0), (0, 2, 13.0), (1, 3, 12.0), (2, 1, 4.0), (2, 4, 14.0), (3, 2, 9.0), (3, 5, 20.0), (4, 3, 7.0), (4, 5, 4.0)] {
            g.add_edge(u, v, c, 0.0);
        }
        let (f, side) = g.min_cut(0, 5);
        assert!((f - 23.0f64).abs() < 1e-12);
        assert!(side[0] && !side[5]);
    }
}

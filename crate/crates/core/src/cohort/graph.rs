use crate::geometry::Vec2;
use crate::linker::GridIndex;
use crate::scalar::Scalar;

/// Undirected spatial neighbourhood over flow-vector origins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    pub n: usize,
    /// Each edge once, as `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl NeighborGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// Connects each point to its `k_nn` nearest neighbours within `radius`
/// (ties by index), then symmetrizes.
pub fn build_neighbor_graph<T: Scalar>(points: &[Vec2<T>], k_nn: usize, radius: T) -> NeighborGraph {
    let n = points.len();
    let mut edges = Vec::new();
    if n > 1 && k_nn > 0 && radius > T::zero() {
        let grid = GridIndex::new(points.iter().copied(), radius);
        let mut near: Vec<(T, usize)> = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            near.clear();
            near.extend(grid.around(p).filter(|&j| j != i).filter_map(|j| {
                let d = points[j].sub(p).norm();
                (d <= radius).then_some((d, j))
            }));
            near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(_, j) in near.iter().take(k_nn) {
                edges.push((i.min(j), i.max(j)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
    }
    NeighborGraph { n, edges }
}

/// Median distance from each point to its nearest other point.
pub fn median_nn_distance<T: Scalar>(points: &[Vec2<T>]) -> Option<T> {
    if points.len() < 2 {
        return None;
    }
    // grow the search cell until every point finds a neighbour
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y).max(T::lit(1e-9));
    let mut cell = extent / T::from_usize_lossy(points.len()).sqrt().max(T::one());
    let mut nn = vec![T::infinity(); points.len()];
    loop {
        let grid = GridIndex::new(points.iter().copied(), cell);
        for (i, &p) in points.iter().enumerate() {
            if nn[i] <= cell {
                continue;
            }
            for j in grid.around(p) {
                if j != i {
                    nn[i] = nn[i].min(points[j].sub(p).norm());
                }
            }
        }
        // a neighbour found within `cell` is guaranteed to be the nearest
        if nn.iter().all(|&d| d <= cell) {
            break;
        }
        cell = cell * T::lit(2.0);
    }
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = nn.len();
    Some(if m % 2 == 1 { nn[m / 2] } else { (nn[m / 2 - 1] + nn[m / 2]) / T::lit(2.0) })
}

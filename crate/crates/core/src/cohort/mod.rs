//! Cohort discovery over flow-vector directions.
//!
//! A frame's vectors are clustered by direction with a von Mises mixture, then
//! relabeled with a spatial Potts prior. Vectors that are too slow to carry a
//! direction, or that sit in the tail of their component, are left
//! unorganized and do not contribute to cohort aggregates.

mod graph;
mod kmeans;
mod maxflow;
mod mixture;
mod mrf;
mod vonmises;
mod window;

pub use graph::{build_neighbor_graph, median_nn_distance, NeighborGraph};
pub use kmeans::{circular_kmeans, KMeansResult};
pub use mixture::{
    message_length, mixture_loglik, posterior_labels, refine_mixture, responsibilities,
    vm_mixture_em, EmConfig, MixtureFit, VonMisesComponent,
};
pub use mrf::{data_costs, energy, mrf_relabel, relabel_with_costs, MrfResult};
pub use vonmises::{kappa_from_rbar, log_density, log_i0, KappaEstimate, KAPPA_CAP};
pub use window::{sliding_window_aggregate, vector_density, TaggedVector, WINDOW_TRIPLETS};

use crate::geometry::{mean_resultant_unweighted, FlowVector, Vec2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortConfig {
    pub k_max: usize,
    pub w_min: f64,
    /// Potts smoothness weight.
    pub beta: f64,
    pub k_nn: usize,
    /// Neighbour radius in px; `None` means 3x the median nearest-neighbour distance.
    pub radius: Option<f64>,
    /// Vectors slower than this (px/frame) carry no usable direction.
    pub min_speed: f64,
    /// Components with lower concentration are treated as unorganized.
    pub kappa_min: f64,
    /// A vector is unorganized when its component density is below this
    /// multiple of the uniform density.
    pub density_floor: f64,
    /// Pool triplets when fewer vectors than this fall in a 100 x 100 px cell.
    pub sparse_density: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            k_max: 5,
            w_min: 0.02,
            beta: 1.0,
            k_nn: 8,
            radius: None,
            min_speed: 2.0,
            kappa_min: 2.0,
            density_floor: 1.0,
            sparse_density: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortComponent<T> {
    pub vm: VonMisesComponent<T>,
    pub organized: bool,
    pub count: usize,
    pub centroid: Vec2<T>,
    /// px/frame over members.
    pub mean_speed: T,
    /// Circular mean of member directions.
    pub mean_dir: T,
    /// Mean resultant length of member directions.
    pub rbar: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortModel<T> {
    pub components: Vec<CohortComponent<T>>,
    /// Per input vector: component index, or `None` when unorganized.
    pub labels: Vec<Option<usize>>,
    /// The mixture was fitted on a pooled multi-triplet window.
    pub pooled: bool,
    pub mrf_energy_before: T,
    pub mrf_energy_after: T,
}

impl<T: Scalar> CohortModel<T> {
    pub fn empty(n: usize) -> Self {
        Self {
            components: Vec::new(),
            labels: vec![None; n],
            pooled: false,
            mrf_energy_before: T::zero(),
            mrf_energy_after: T::zero(),
        }
    }

    pub fn mixture(&self) -> Vec<VonMisesComponent<T>> {
        self.components.iter().map(|c| c.vm).collect()
    }

    /// Mean directions of organized components.
    pub fn organized_means(&self) -> Vec<T> {
        self.components.iter().filter(|c| c.organized).map(|c| c.vm.mu).collect()
    }
}

/// Recomputes per-component aggregates from labeled member vectors.
pub fn aggregate_components<T: Scalar>(
    mixture: &[VonMisesComponent<T>],
    organized: &[bool],
    vectors: &[FlowVector<T>],
    labels: &[Option<usize>],
) -> Vec<CohortComponent<T>> {
    mixture
        .iter()
        .enumerate()
        .map(|(c, &vm)| {
            let members: Vec<&FlowVector<T>> = vectors
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == Some(c))
                .map(|(v, _)| v)
                .collect();
            let count = members.len();
            let (centroid, mean_speed, mean_dir, rbar) = if count == 0 {
                (Vec2::default(), T::zero(), vm.mu, T::zero())
            } else {
                let nf = T::from_usize_lossy(count);
                let sum = members.iter().fold(Vec2::default(), |a: Vec2<T>, v| a.add(v.origin));
                let speed = members.iter().fold(T::zero(), |a, v| a + v.speed()) / nf;
                let angles: Vec<T> = members.iter().map(|v| v.angle()).collect();
                let mr = mean_resultant_unweighted(&angles).expect("non-empty");
                (Vec2::new(sum.x / nf, sum.y / nf), speed, mr.mean, mr.rbar)
            };
            CohortComponent {
                vm,
                organized: organized[c],
                count,
                centroid,
                mean_speed,
                mean_dir,
                rbar,
            }
        })
        .collect()
}

/// Inputs for one cohort fit.
pub struct CohortInput<'a, T> {
    /// Vectors of the current triplet; labels refer to these.
    pub vectors: &'a [FlowVector<T>],
    /// Older triplets, oldest first (at most four are used).
    pub history: &'a [&'a [FlowVector<T>]],
    /// Warm-start mixture; `None` runs full discovery.
    pub warm: Option<&'a [VonMisesComponent<T>]>,
    /// Scene area in px^2 for the sparsity test; defaults to the vectors' bounding box.
    pub area: Option<T>,
}

fn bbox_area<T: Scalar>(vectors: &[FlowVector<T>]) -> T {
    if vectors.is_empty() {
        return T::zero();
    }
    let (mut lo, mut hi) = (vectors[0].origin, vectors[0].origin);
    for v in vectors {
        lo = Vec2::new(lo.x.min(v.origin.x), lo.y.min(v.origin.y));
        hi = Vec2::new(hi.x.max(v.origin.x), hi.y.max(v.origin.y));
    }
    ((hi.x - lo.x) * (hi.y - lo.y)).max(T::lit(10_000.0))
}

/// Fits the mixture, relabels with the Potts prior and aggregates members.
pub fn fit_cohort_model<T: Scalar>(input: &CohortInput<'_, T>, cfg: &CohortConfig) -> CohortModel<T> {
    let vectors = input.vectors;
    let min_speed = T::lit(cfg.min_speed);
    let moving: Vec<usize> = (0..vectors.len()).filter(|&i| vectors[i].speed() >= min_speed).collect();

    let area = input.area.unwrap_or_else(|| bbox_area(vectors));
    let density = vector_density(vectors.len(), area);
    let keep = WINDOW_TRIPLETS - 1;
    let hist = &input.history[input.history.len().saturating_sub(keep)..];
    let mut sets: Vec<&[FlowVector<T>]> = hist.to_vec();
    sets.push(vectors);
    let pooled = sliding_window_aggregate(&sets, density, T::lit(cfg.sparse_density))
        .expect("window size bounded above");
    let is_pooled = sets.len() > 1 && density < T::lit(cfg.sparse_density);
    let fit_angles: Vec<T> = pooled
        .iter()
        .filter(|t| t.vector.speed() >= min_speed)
        .map(|t| t.vector.angle())
        .collect();

    if fit_angles.len() < 2 || moving.is_empty() {
        let mut m = CohortModel::empty(vectors.len());
        m.pooled = is_pooled;
        return m;
    }
    let em_cfg = EmConfig {
        k_max: cfg.k_max.min(fit_angles.len() / 2).max(1),
        w_min: cfg.w_min,
        seed: cfg.seed,
        background_kappa: cfg.kappa_min,
        ..EmConfig::default()
    };
    let fit = match input.warm.filter(|w| !w.is_empty() && w.len() <= fit_angles.len() / 2) {
        Some(w) => refine_mixture(&fit_angles, w, &em_cfg),
        None => vm_mixture_em(&fit_angles, &em_cfg),
    };
    let mixture = match fit {
        Ok(f) => f.components,
        Err(_) => return CohortModel::empty(vectors.len()),
    };

    let angles: Vec<T> = moving.iter().map(|&i| vectors[i].angle()).collect();
    let origins: Vec<Vec2<T>> = moving.iter().map(|&i| vectors[i].origin).collect();
    let radius = match cfg.radius {
        Some(r) => T::lit(r),
        None => median_nn_distance(&origins).map_or(T::zero(), |d| d * T::lit(3.0)),
    };
    let graph = build_neighbor_graph(&origins, cfg.k_nn, radius);
    let mrf = mrf_relabel(&angles, &mixture, &graph, T::lit(cfg.beta));

    let organized: Vec<bool> = mixture.iter().map(|c| c.kappa >= T::lit(cfg.kappa_min)).collect();
    let floor = T::lit(cfg.density_floor);
    let two_pi = T::PI() + T::PI();
    let mut labels = vec![None; vectors.len()];
    for (slot, (&i, &l)) in moving.iter().zip(&mrf.labels).enumerate() {
        let c = &mixture[l];
        let supported = (c.log_density(angles[slot]) + two_pi.ln()).exp() >= floor;
        if organized[l] && supported {
            labels[i] = Some(l);
        }
    }
    CohortModel {
        components: aggregate_components(&mixture, &organized, vectors, &labels),
        labels,
        pooled: is_pooled,
        mrf_energy_before: mrf.energy_before,
        mrf_energy_after: mrf.energy_after,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_from_members() {
        let vs: Vec<FlowVector<f64>> = (0..20)
            .map(|i| FlowVector::new(0, Vec2::new(i as f64, 10.0), Vec2::new(2.0, 0.0)))
            .collect();
        let labels = vec![Some(0); 20];
        let mix = [VonMisesComponent { mu: 0.0, kappa: 50.0, weight: 1.0 }];
        let agg = aggregate_components(&mix, &[true], &vs, &labels);
        assert_eq!(agg[0].count, 20);
        assert!((agg[0].mean_speed - 2.0).abs() < 1e-12);
        assert!(agg[0].mean_dir.abs() < 1e-12);
        assert!((agg[0].centroid.x - 9.5).abs() < 1e-12);
        assert!((agg[0].rbar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slow_vectors_stay_unorganized() {
        let vs: Vec<FlowVector<f64>> = (0..10)
            .map(|i| FlowVector::new(0, Vec2::new(i as f64 * 5.0, 0.0), Vec2::new(0.2, 0.1)))
            .collect();
        let m = fit_cohort_model(&CohortInput { vectors: &vs, history: &[], warm: None, area: None }, &CohortConfig::default());
        assert!(m.labels.iter().all(|l| l.is_none()));
    }

    #[test]
    fn two_groups_found() {
        let mut vs = Vec::new();
        for i in 0..30 {
            let jitter = ((i * 7) % 11) as f64 * 0.01 - 0.05;
            vs.push(FlowVector::new(0, Vec2::new(i as f64 * 3.0, 0.0), Vec2::new(4.0, 0.0).rotate(jitter)));
            vs.push(FlowVector::new(0, Vec2::new(i as f64 * 3.0, 50.0), Vec2::new(-4.0, 0.0).rotate(jitter)));
        }
        let m = fit_cohort_model(&CohortInput { vectors: &vs, history: &[], warm: None, area: Some(1e6) }, &CohortConfig::default());
        assert_eq!(m.components.iter().filter(|c| c.organized).count(), 2);
        assert!(m.labels.iter().all(|l| l.is_some()));
        assert_ne!(m.labels[0], m.labels[1]);
    }
}

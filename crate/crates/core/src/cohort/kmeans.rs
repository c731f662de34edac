//! Lloyd-style k-means on the circle with `1 - cos` dispersion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::mean_resultant_unweighted;
use crate::scalar::Scalar;

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_RESTARTS: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub means: Vec<T>,
    pub labels: Vec<usize>,
    /// `sum(1 - cos(theta - mu_label))`.
    pub dispersion: T,
    /// Dispersion after each assignment step of the winning restart.
    pub trace: Vec<T>,
}

fn assign<T: Scalar>(angles: &[T], means: &[T], labels: &mut [usize]) -> T {
    let mut disp = T::zero();
    for (l, &a) in labels.iter_mut().zip(angles) {
        let mut best = 0;
        let mut best_cos = -T::infinity();
        for (c, &m) in means.iter().enumerate() {
            let v = (a - m).cos();
            if v > best_cos {
                best_cos = v;
                best = c;
            }
        }
        *l = best;
        disp = disp + (T::one() - best_cos);
    }
    disp
}

/// k-means++ seeding on `1 - cos` distance.
fn seed_means<T: Scalar>(angles: &[T], k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut means = vec![angles[rng.gen_range(0..angles.len())]];
    while means.len() < k {
        let d: Vec<f64> = angles
            .iter()
            .map(|&a| {
                means
                    .iter()
                    .map(|&m| (T::one() - (a - m).cos()).to_f64_lossy())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = d.len() - 1;
            for (i, &di) in d.iter().enumerate() {
                if r < di {
                    idx = i;
                    break;
                }
                r -= di;
            }
            idx
        } else {
            rng.gen_range(0..angles.len())
        };
        means.push(angles[pick]);
    }
    means
}

fn lloyd<T: Scalar>(angles: &[T], mut means: Vec<T>) -> KMeansResult<T> {
    let k = means.len();
    let mut labels = vec![usize::MAX; angles.len()];
    let mut prev = labels.clone();
    let mut trace = Vec::new();
    let mut dispersion = assign(angles, &means, &mut labels);
    trace.push(dispersion);
    for _ in 0..KMEANS_MAX_ITER {
        // re-seed empty clusters at the currently worst-fit angle
        for _ in 0..k {
            let mut counts = vec![0usize; k];
            for &l in &labels {
                counts[l] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let worst = angles
                .iter()
                .zip(&labels)
                .enumerate()
                .filter(|(_, (_, &l))| counts[l] > 1)
                .map(|(i, (&a, &l))| (i, T::one() - (a - means[l]).cos()))
                .fold(None::<(usize, T)>, |acc, (i, d)| match acc {
                    Some((_, bd)) if bd >= d => acc,
                    _ => Some((i, d)),
                });
            let Some((wi, wd)) = worst else { break };
            if !(wd > T::zero()) {
                break;
            }
            means[empty] = angles[wi];
            dispersion = assign(angles, &means, &mut labels);
            trace.push(dispersion);
        }
        for (c, m) in means.iter_mut().enumerate() {
            let members: Vec<T> = angles
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(&a, _)| a)
                .collect();
            if let Ok(r) = mean_resultant_unweighted(&members) {
                if !r.degenerate {
                    *m = r.mean;
                }
            }
        }
        prev.copy_from_slice(&labels);
        dispersion = assign(angles, &means, &mut labels);
        trace.push(dispersion);
        if labels == prev {
            break;
        }
    }
    KMeansResult { means, labels, dispersion, trace }
}

/// Best of [`KMEANS_RESTARTS`] seeded restarts by total dispersion.
pub fn circular_kmeans<T: Scalar>(angles: &[T], k: usize, seed: u64) -> Result<KMeansResult<T>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    if angles.len() < k {
        return Err(Error::SampleTooSmall { needed: k, got: angles.len() });
    }
    let mut best: Option<KMeansResult<T>> = None;
    for r in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r));
        let res = lloyd(angles, seed_means(angles, k, &mut rng));
        if best.as_ref().map_or(true, |b| res.dispersion < b.dispersion) {
            best = Some(res);
        }
    }
    Ok(best.unwrap())
}

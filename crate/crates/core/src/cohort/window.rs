//! Pooling of flow vectors over consecutive triplets for sparse scenes.

use crate::error::{Error, Result};
use crate::geometry::FlowVector;
use crate::scalar::Scalar;

/// Maximum number of triplets pooled together.
pub const WINDOW_TRIPLETS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedVector<T> {
    /// Position of the source triplet within the window, oldest first.
    pub source: usize,
    pub vector: FlowVector<T>,
}

/// Flow vectors per 100 x 100 px cell over `area_px` square pixels.
pub fn vector_density<T: Scalar>(count: usize, area_px: T) -> T {
    if !(area_px > T::zero()) {
        return T::infinity();
    }
    T::from_usize_lossy(count) / (area_px / T::lit(10_000.0))
}

/// Concatenates up to [`WINDOW_TRIPLETS`] vector sets (oldest first) when the
/// newest set is sparser than `threshold`; otherwise passes the newest through.
pub fn sliding_window_aggregate<T: Scalar>(
    sets: &[&[FlowVector<T>]],
    newest_density: T,
    threshold: T,
) -> Result<Vec<TaggedVector<T>>> {
    if sets.is_empty() || sets.len() > WINDOW_TRIPLETS {
        return Err(Error::InvalidInput(format!(
            "window takes 1..={WINDOW_TRIPLETS} vector sets, got {}",
            sets.len()
        )));
    }
    let newest = sets.len() - 1;
    let tag = |source: usize, set: &[FlowVector<T>]| -> Vec<TaggedVector<T>> {
        set.iter().map(|&vector| TaggedVector { source, vector }).collect()
    };
    if newest_density >= threshold {
        return Ok(tag(newest, sets[newest]));
    }
    Ok(sets.iter().enumerate().flat_map(|(s, set)| tag(s, set)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    fn set(n: usize, frame: usize) -> Vec<FlowVector<f64>> {
        (0..n).map(|i| FlowVector::new(frame, Vec2::new(i as f64, 0.0), Vec2::new(1.0, 0.0))).collect()
    }

    #[test]
    fn pools_when_sparse() {
        let sets: Vec<Vec<FlowVector<f64>>> = [3, 4, 0, 2, 1].iter().enumerate().map(|(f, &n)| set(n, f)).collect();
        let refs: Vec<&[FlowVector<f64>]> = sets.iter().map(|s| s.as_slice()).collect();
        let pooled = sliding_window_aggregate(&refs, 0.1, 1.0).unwrap();
        assert_eq!(pooled.len(), 10);
        assert_eq!(pooled.iter().filter(|t| t.source == 1).count(), 4);
        let dense = sliding_window_aggregate(&refs, 5.0, 1.0).unwrap();
        assert_eq!(dense.len(), 1);
        assert_eq!(dense[0].source, 4);
    }

    #[test]
    fn rejects_bad_window() {
        assert!(sliding_window_aggregate::<f64>(&[], 0.0, 1.0).is_err());
        let s = set(1, 0);
        let refs = vec![s.as_slice(); 6];
        assert!(sliding_window_aggregate(&refs, 0.0, 1.0).is_err());
    }

    #[test]
    fn density_units() {
        assert!((vector_density(50, 800.0f64 * 800.0) - 50.0 / 64.0).abs() < 1e-12);
    }
}

//! von Mises density helpers.

use crate::scalar::Scalar;

/// Concentration ceiling; beyond it a component is effectively a point mass.
pub const KAPPA_CAP: f64 = 500.0;

/// `ln I0(kappa)` for `kappa >= 0`.
///
/// Sums the power series `sum_k (kappa/2)^(2k) / (k!)^2` in the log domain,
/// scaled by its largest term, so it stays finite up to and beyond the cap.
pub fn log_i0<T: Scalar>(kappa: T) -> T {
    let k = kappa.abs();
    if k < T::lit(1e-300) {
        return T::zero();
    }
    if k >= T::lit(25.0) {
        return log_i0_asymptotic(k);
    }
    let half = k / T::lit(2.0);
    let log_q = T::lit(2.0) * half.ln();
    // term index with the largest contribution is near kappa / 2
    let peak = half.floor().to_usize().unwrap_or(0);
    let mut log_terms: Vec<T> = Vec::with_capacity(peak + 64);
    let mut lt = T::zero();
    log_terms.push(lt);
    let mut i = 1usize;
    let cutoff = T::lit(40.0);
    let mut lmax = T::zero();
    loop {
        let fi = T::from_usize_lossy(i);
        lt = lt + log_q - T::lit(2.0) * fi.ln();
        log_terms.push(lt);
        if lt > lmax {
            lmax = lt;
        }
        if i > peak && lt < lmax - cutoff {
            break;
        }
        i += 1;
    }
    let s = log_terms.iter().fold(T::zero(), |a, &t| a + (t - lmax).exp());
    lmax + s.ln()
}

/// `I0(x) ~ e^x / sqrt(2 pi x) * sum_j ((2j-1)!!)^2 / (j! (8x)^j)`, summed
/// until the terms stop shrinking or fall below f64 resolution.
fn log_i0_asymptotic<T: Scalar>(x: T) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    for j in 1..40usize {
        let odd = T::from_usize_lossy(2 * j - 1);
        let next = term * odd * odd / (T::from_usize_lossy(j) * T::lit(8.0) * x);
        if next >= term || next < T::lit(1e-18) {
            break;
        }
        term = next;
        sum = sum + term;
    }
    x - T::lit(0.5) * ((T::PI() + T::PI()) * x).ln() + sum.ln()
}

/// `ln f(theta; mu, kappa)` for the von Mises density on the circle.
pub fn log_density<T: Scalar>(theta: T, mu: T, kappa: T) -> T {
    kappa * (theta - mu).cos() - (T::PI() + T::PI()).ln() - log_i0(kappa)
}

/// Closed-form concentration estimate from a mean resultant length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaEstimate<T> {
    pub kappa: T,
    /// The estimate hit [`KAPPA_CAP`] (always the case for `rbar >= 1`).
    pub capped: bool,
}

/// `rbar (2 - rbar^2) / (1 - rbar^2)`, capped at [`KAPPA_CAP`].
pub fn kappa_from_rbar<T: Scalar>(rbar: T) -> KappaEstimate<T> {
    let cap = T::lit(KAPPA_CAP);
    if !(rbar < T::one()) {
        return KappaEstimate { kappa: cap, capped: true };
    }
    let r = rbar.max(T::zero());
    let r2 = r * r;
    let k = r * (T::lit(2.0) - r2) / (T::one() - r2);
    if k >= cap {
        KappaEstimate { kappa: cap, capped: true }
    } else {
        KappaEstimate { kappa: k, capped: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: plain series for modest arguments.
    fn i0_direct(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= (x / 2.0) * (x / 2.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn log_i0_matches_direct_series() {
        for &x in &[0.0, 1e-8, 0.3, 1.0, 2.5, 8.0, 20.0, 24.999, 25.0, 31.0, 45.0, 60.0, 90.0] {
            let want = i0_direct(x).ln();
            assert!((log_i0(x) - want).abs() < 1e-12 * want.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn log_i0_large_argument_asymptotics() {
        // ln I0(x) ~ x - ln(2 pi x)/2 + ln(1 + 1/(8x) + 9/(128x^2))
        for &x in &[200.0, 500.0, 2000.0] {
            let asym = x - 0.5 * (2.0 * std::f64::consts::PI * x).ln()
                + (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x)).ln();
            assert!((log_i0(x) - asym).abs() < 1e-8, "x={x}");
            assert!(log_i0(x).is_finite());
        }
        assert!(log_i0(500.0f32).is_finite());
    }

    #[test]
    fn density_integrates_to_one() {
        for &k in &[0.0, 0.7, 8.0, 120.0] {
            let n = 20000;
            let h = 2.0 * std::f64::consts::PI / n as f64;
            let s: f64 = (0..n).map(|i| log_density(-std::f64::consts::PI + i as f64 * h, 0.4, k).exp() * h).sum();
            assert!((s - 1.0).abs() < 1e-9, "kappa={k}: {s}");
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_from_rbar(0.0).kappa, 0.0);
        assert!((kappa_from_rbar(0.5f64).kappa - 1.166_666_666_666_666_7).abs() < 1e-12);
        let e = kappa_from_rbar(1.0);
        assert!(e.capped && e.kappa == 500.0);
        assert!(kappa_from_rbar(0.9999).capped);
        assert!(!kappa_from_rbar(0.99).capped);
    }
}

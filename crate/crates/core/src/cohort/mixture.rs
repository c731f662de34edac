//! von Mises mixture fitted by EM, with the number of components chosen by
//! annihilating weak components and scoring each model order by message
//! length plus the entropy of the soft assignment. The entropy term charges
//! for components that overlap heavily, so one broad cohort is not split in two.

use super::kmeans::circular_kmeans;
use super::vonmises::{kappa_from_rbar, log_i0};
use crate::error::{Error, Result};
use crate::geometry::{mean_resultant_unweighted, wrap_angle, DEGENERATE_RBAR};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesComponent<T> {
    pub mu: T,
    pub kappa: T,
    pub weight: T,
}

impl<T: Scalar> VonMisesComponent<T> {
    pub fn log_density(&self, theta: T) -> T {
        self.kappa * (theta - self.mu).cos() - (T::PI() + T::PI()).ln() - log_i0(self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub k_max: usize,
    /// Components lighter than this are removed.
    pub w_min: f64,
    pub max_iter: usize,
    /// Stop when the log-likelihood gains less than this fraction of its magnitude.
    pub tol: f64,
    pub seed: u64,
    /// Components below this concentration count as one background class
    /// when scoring assignment entropy.
    pub background_kappa: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { k_max: 5, w_min: 0.02, max_iter: 500, tol: 1e-7, seed: 0, background_kappa: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit<T> {
    pub components: Vec<VonMisesComponent<T>>,
    pub loglik: T,
    pub message_length: T,
    /// Classification entropy of the chosen fit (nats).
    pub entropy: T,
    /// Log-likelihood after every EM iteration, across all model orders tried.
    pub trace: Vec<T>,
    /// Trace positions that follow a component removal (discontinuities).
    pub annihilations: Vec<usize>,
    /// Every component vanished; a single uniform component was returned.
    pub fallback: bool,
}

/// Per-sample cached trigonometry.
struct Sample<T> {
    cos: T,
    sin: T,
}

fn samples<T: Scalar>(angles: &[T]) -> Vec<Sample<T>> {
    angles.iter().map(|a| Sample { cos: a.cos(), sin: a.sin() }).collect()
}

/// Per-component constants: (ln w - ln 2pi - ln I0(kappa), kappa cos mu, kappa sin mu).
fn component_terms<T: Scalar>(comps: &[VonMisesComponent<T>]) -> Vec<(T, T, T)> {
    let ln2pi = (T::PI() + T::PI()).ln();
    comps
        .iter()
        .map(|c| {
            let lw = if c.weight > T::zero() { c.weight.ln() } else { T::neg_infinity() };
            (lw - ln2pi - log_i0(c.kappa), c.kappa * c.mu.cos(), c.kappa * c.mu.sin())
        })
        .collect()
}

fn log_sum_exp<T: Scalar>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + v.iter().fold(T::zero(), |a, &x| a + (x - m).exp()).ln()
}

/// Total log-likelihood of `angles` under the mixture.
pub fn mixture_loglik<T: Scalar>(angles: &[T], comps: &[VonMisesComponent<T>]) -> T {
    loglik_cached(&samples(angles), comps)
}

fn loglik_cached<T: Scalar>(s: &[Sample<T>], comps: &[VonMisesComponent<T>]) -> T {
    let terms = component_terms(comps);
    let mut buf = vec![T::zero(); comps.len()];
    s.iter().fold(T::zero(), |acc, x| {
        for (b, t) in buf.iter_mut().zip(&terms) {
            *b = t.0 + t.1 * x.cos + t.2 * x.sin;
        }
        acc + log_sum_exp(&buf)
    })
}

/// Posterior responsibilities, row-major `n x k`.
pub fn responsibilities<T: Scalar>(angles: &[T], comps: &[VonMisesComponent<T>]) -> Vec<T> {
    resp_cached(&samples(angles), comps)
}

fn resp_cached<T: Scalar>(s: &[Sample<T>], comps: &[VonMisesComponent<T>]) -> Vec<T> {
    let mut out = Vec::new();
    e_step(s, comps, &mut out);
    out
}

/// Fills `resp` (row-major `n x k`) and returns the log-likelihood, with one
/// exponential per sample and component.
fn e_step<T: Scalar>(s: &[Sample<T>], comps: &[VonMisesComponent<T>], resp: &mut Vec<T>) -> T {
    let k = comps.len();
    let terms = component_terms(comps);
    resp.clear();
    resp.resize(s.len() * k, T::zero());
    let mut ll = T::zero();
    for (row, x) in resp.chunks_mut(k).zip(s) {
        let mut m = T::neg_infinity();
        for (r, t) in row.iter_mut().zip(&terms) {
            *r = t.0 + t.1 * x.cos + t.2 * x.sin;
            m = m.max(*r);
        }
        if m == T::neg_infinity() {
            ll = ll + m;
            continue;
        }
        let mut total = T::zero();
        for r in row.iter_mut() {
            *r = (*r - m).exp();
            total = total + *r;
        }
        for r in row.iter_mut() {
            *r = *r / total;
        }
        ll = ll + m + total.ln();
    }
    ll
}

/// Index of the component with the largest posterior for each angle.
pub fn posterior_labels<T: Scalar>(angles: &[T], comps: &[VonMisesComponent<T>]) -> Vec<usize> {
    let k = comps.len();
    responsibilities(angles, comps)
        .chunks(k.max(1))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, -T::infinity()), |b, (i, &r)| if r > b.1 { (i, r) } else { b })
                .0
        })
        .collect()
}

/// Message length of a fitted mixture (two free parameters per component).
pub fn message_length<T: Scalar>(n: usize, comps: &[VonMisesComponent<T>], loglik: T) -> T {
    let nf = T::from_usize_lossy(n);
    let twelve = T::lit(12.0);
    let k = T::from_usize_lossy(comps.len());
    let per_comp = comps
        .iter()
        .fold(T::zero(), |a, c| a + (nf * c.weight / twelve).max(T::lit(1e-300)).ln());
    per_comp + k / T::lit(2.0) * (nf / twelve).ln() + k * T::lit(1.5) - loglik
}

/// Entropy of the posterior assignment among concentrated components,
/// summed over samples and weighted by their share of each sample. Confusion
/// with broad background components is not charged: a cohort standing on a
/// uniform floor is exactly what the mixture is meant to find.
fn assignment_entropy<T: Scalar>(s: &[Sample<T>], comps: &[VonMisesComponent<T>], background_kappa: T) -> T {
    let k = comps.len();
    let conc: Vec<bool> = comps.iter().map(|c| c.kappa >= background_kappa).collect();
    if conc.iter().filter(|&&c| c).count() < 2 {
        return T::zero();
    }
    resp_cached(s, comps).chunks(k).fold(T::zero(), |acc, row| {
        let mass = row.iter().zip(&conc).filter(|(_, &c)| c).fold(T::zero(), |a, (&r, _)| a + r);
        if mass <= T::zero() {
            return acc;
        }
        let h = row.iter().zip(&conc).filter(|(&r, &c)| c && r > T::zero()).fold(T::zero(), |a, (&r, _)| {
            let p = r / mass;
            a - p * p.ln()
        });
        acc + mass * h
    })
}

fn uniform_fallback<T: Scalar>() -> VonMisesComponent<T> {
    VonMisesComponent { mu: T::zero(), kappa: T::zero(), weight: T::one() }
}

fn renormalize<T: Scalar>(comps: &mut [VonMisesComponent<T>]) {
    let s = comps.iter().fold(T::zero(), |a, c| a + c.weight);
    if s > T::zero() {
        for c in comps.iter_mut() {
            c.weight = c.weight / s;
        }
    }
}

struct EmState<T> {
    trace: Vec<T>,
    annihilations: Vec<usize>,
    fallback: bool,
}

/// Plain EM from `comps` (a generalized M-step for kappa keeps every
/// iteration non-decreasing in likelihood). Returns the final log-likelihood.
fn run_em<T: Scalar>(
    angles: &[T],
    s: &[Sample<T>],
    comps: &mut Vec<VonMisesComponent<T>>,
    cfg: &EmConfig,
    st: &mut EmState<T>,
) -> T {
    let n = T::from_usize_lossy(angles.len());
    let w_min = T::lit(cfg.w_min);
    let tol = T::lit(cfg.tol);
    let mut resp = Vec::new();
    let mut ll = e_step(s, comps, &mut resp);
    st.trace.push(ll);
    for _ in 0..cfg.max_iter {
        let k = comps.len();
        // weighted resultant sums per component: (mass, sum r cos, sum r sin)
        let mut acc = vec![(T::zero(), T::zero(), T::zero()); k];
        for (row, x) in resp.chunks(k).zip(s) {
            for (a, &r) in acc.iter_mut().zip(row) {
                *a = (a.0 + r, a.1 + r * x.cos, a.2 + r * x.sin);
            }
        }
        for (comp, &(mass, c, sn)) in comps.iter_mut().zip(&acc) {
            comp.weight = mass / n;
            if !(mass > T::lit(1e-12)) {
                continue;
            }
            let rbar = (sn.hypot(c) / mass).min(T::one());
            if rbar >= T::lit(DEGENERATE_RBAR) {
                comp.mu = wrap_angle(sn.atan2(c));
            }
            // Q(kappa) = mass * (kappa * rbar - ln I0(kappa)) at the updated mean
            let q = |kappa: T| kappa * rbar - log_i0(kappa);
            let proposal = kappa_from_rbar(rbar).kappa;
            if q(proposal) >= q(comp.kappa) {
                comp.kappa = proposal;
            }
        }
        let before = comps.len();
        comps.retain(|c| c.weight >= w_min);
        let removed = comps.len() != before;
        if comps.is_empty() {
            comps.push(uniform_fallback());
            st.fallback = true;
        }
        renormalize(comps);
        let next = e_step(s, comps, &mut resp);
        st.trace.push(next);
        if removed {
            st.annihilations.push(st.trace.len() - 1);
        }
        let gain = next - ll;
        ll = next;
        if !removed && gain < tol * ll.abs().max(T::one()) {
            break;
        }
    }
    ll
}

/// Starting mixture from circular k-means with `k` clusters.
fn kmeans_init<T: Scalar>(angles: &[T], k: usize, seed: u64) -> Option<Vec<VonMisesComponent<T>>> {
    let km = circular_kmeans(angles, k, seed).ok()?;
    let n = T::from_usize_lossy(angles.len());
    let comps: Vec<VonMisesComponent<T>> = (0..k)
        .filter_map(|c| {
            let members: Vec<T> = angles
                .iter()
                .zip(&km.labels)
                .filter(|(_, &l)| l == c)
                .map(|(&a, _)| a)
                .collect();
            let mr = mean_resultant_unweighted(&members).ok()?;
            Some(VonMisesComponent {
                mu: wrap_angle(km.means[c]),
                kappa: kappa_from_rbar(mr.rbar).kappa,
                weight: T::from_usize_lossy(members.len()) / n,
            })
        })
        .collect();
    (!comps.is_empty()).then_some(comps)
}

/// Walks the model order down by annihilating the weakest component and
/// keeps the order with the shortest message length. With `reseed`, each
/// order also gets a fresh k-means start, since the annihilation path can
/// leave EM in a poor local optimum.
fn select_order<T: Scalar>(
    angles: &[T],
    mut comps: Vec<VonMisesComponent<T>>,
    cfg: &EmConfig,
    reseed: bool,
) -> MixtureFit<T> {
    let s = samples(angles);
    let n = angles.len();
    let mut st = EmState { trace: Vec::new(), annihilations: Vec::new(), fallback: false };
    let bg_kappa = T::lit(cfg.background_kappa);
    let score = |c: &[VonMisesComponent<T>], ll: T| message_length(n, c, ll) + assignment_entropy(&s, c, bg_kappa);
    let ll = run_em(angles, &s, &mut comps, cfg, &mut st);
    let mut best = (score(&comps, ll), comps.clone(), ll, st.fallback);
    while comps.len() > 1 {
        let weakest = comps
            .iter()
            .enumerate()
            .fold(0, |b, (i, c)| if c.weight <= comps[b].weight { i } else { b });
        comps.remove(weakest);
        renormalize(&mut comps);
        st.annihilations.push(st.trace.len());
        st.fallback = false;
        let mut ll = run_em(angles, &s, &mut comps, cfg, &mut st);
        if reseed {
            if let Some(mut alt) = kmeans_init(angles, comps.len(), cfg.seed) {
                // the restart begins a new likelihood trace segment
                st.annihilations.push(st.trace.len());
                let ll_alt = run_em(angles, &s, &mut alt, cfg, &mut st);
                if score(&alt, ll_alt) < score(&comps, ll) {
                    comps = alt;
                    ll = ll_alt;
                }
            }
        }
        let sc = score(&comps, ll);
        if sc < best.0 {
            best = (sc, comps.clone(), ll, st.fallback);
        }
    }
    let (_, components, loglik, fallback) = best;
    MixtureFit {
        message_length: message_length(n, &components, loglik),
        entropy: assignment_entropy(&s, &components, bg_kappa),
        components,
        loglik,
        trace: st.trace,
        annihilations: st.annihilations,
        fallback,
    }
}

fn validate(angles_len: usize, cfg: &EmConfig) -> Result<()> {
    if cfg.k_max == 0 {
        return Err(Error::InvalidInput("k_max must be >= 1".into()));
    }
    if angles_len < 2 * cfg.k_max {
        return Err(Error::SampleTooSmall { needed: 2 * cfg.k_max, got: angles_len });
    }
    if !(0.0..1.0).contains(&cfg.w_min) {
        return Err(Error::InvalidConfig("w_min must lie in [0, 1)".into()));
    }
    Ok(())
}

/// Fits a mixture starting from `k_max` circular k-means clusters.
pub fn vm_mixture_em<T: Scalar>(angles: &[T], cfg: &EmConfig) -> Result<MixtureFit<T>> {
    validate(angles.len(), cfg)?;
    let comps = kmeans_init(angles, cfg.k_max, cfg.seed).expect("sample size validated");
    Ok(select_order(angles, comps, cfg, true))
}

/// Refits starting from an existing mixture (no k-means seeding).
pub fn refine_mixture<T: Scalar>(
    angles: &[T],
    init: &[VonMisesComponent<T>],
    cfg: &EmConfig,
) -> Result<MixtureFit<T>> {
    validate(angles.len(), &EmConfig { k_max: init.len().max(1), ..*cfg })?;
    let mut comps = init.to_vec();
    if comps.is_empty() {
        comps.push(uniform_fallback());
    }
    renormalize(&mut comps);
    Ok(select_order(angles, comps, cfg, false))
}

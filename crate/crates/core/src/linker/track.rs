//! Frame-by-frame linking with cohort-aware reweighting.
//!
//! Each step links frame t to t+1. A candidate's equidistance and turn terms
//! come from the triplet it would extend: the selected link that ended at its
//! origin, or, when its origin has no selected predecessor (first frame,
//! re-appearing object), the cheapest gated continuation into frame t+2.

use std::collections::VecDeque;

use super::assign::AssignmentSolution;
use super::candidates::{gen_candidates, CandidateLink};
use super::cost::{link_cost, CostBreakdown, Weights};
use super::pareto::{default_lambda_grid, pareto_select, ParetoFrontier};
use crate::cohort::{fit_cohort_model, CohortConfig, CohortInput, CohortModel, WINDOW_TRIPLETS};
use crate::error::{Error, Result};
use crate::geometry::{CalibrationConfig, Detection, FlowVector, Vec2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig<T> {
    pub calib: CalibrationConfig<T>,
    /// Cap on reweighting iterations per frame step.
    pub max_iters: usize,
    /// Converged once fewer than this fraction of selected links change.
    pub converge_frac: f64,
    pub lambda_points: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub var_floor: f64,
    pub weight_eps: f64,
    /// Score origins without a selected predecessor against frame t+2.
    pub lookahead: bool,
    /// Scene size in px, used for the sparse-window test.
    pub arena: Option<(T, T)>,
    pub cohort: CohortConfig,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            calib: CalibrationConfig::default(),
            max_iters: 10,
            converge_frac: 0.05,
            lambda_points: 16,
            lambda_lo: 0.1,
            lambda_hi: 10.0,
            var_floor: 1e-6,
            weight_eps: 1e-6,
            lookahead: true,
            arena: None,
            cohort: CohortConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRecord<T> {
    pub candidate: usize,
    pub from: usize,
    pub to: usize,
    pub from_pos: Vec2<T>,
    pub to_pos: Vec2<T>,
    pub cost: CostBreakdown<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    pub frame: usize,
    pub iter: usize,
    pub links: usize,
    pub total_cost: T,
    pub frac_changed: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStep<T> {
    /// Origin frame t of this step's links.
    pub frame: usize,
    pub candidates: Vec<CandidateLink<T>>,
    pub costs: Vec<CostBreakdown<T>>,
    pub frontier: ParetoFrontier<T>,
    pub solution: AssignmentSolution<T>,
    /// Selected links in candidate order; `vectors[k]` and `model.labels[k]` match `links[k]`.
    pub links: Vec<LinkRecord<T>>,
    pub vectors: Vec<FlowVector<T>>,
    pub model: CohortModel<T>,
    pub iterations: Vec<IterationRecord<T>>,
    /// Reweighting re-solves performed (0 when the step had no candidates).
    pub iters_used: usize,
    pub converged: bool,
    /// The iteration cap ended the loop before convergence.
    pub cap_hit: bool,
    pub weights: Weights<T>,
}

impl<T: Scalar> FrameStep<T> {
    pub fn label_of(&self, k: usize) -> Option<usize> {
        self.model.labels[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult<T> {
    pub steps: Vec<FrameStep<T>>,
}

impl<T: Scalar> TrackResult<T> {
    pub fn final_model(&self) -> Option<&CohortModel<T>> {
        self.steps.last().map(|s| &s.model)
    }

    pub fn iteration_log(&self) -> impl Iterator<Item = &IterationRecord<T>> {
        self.steps.iter().flat_map(|s| s.iterations.iter())
    }
}

/// Symmetric-difference fraction between two sorted selections.
fn frac_changed<T: Scalar>(a: &[(usize, usize)], b: &[(usize, usize)]) -> T {
    if a.is_empty() && b.is_empty() {
        return T::zero();
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let diff = a.len() + b.len() - 2 * common;
    T::from_usize_lossy(diff) / T::from_usize_lossy(a.len() + b.len())
}

/// Stateful sequential linker; feed it frame triples in order.
pub struct Tracker<T> {
    cfg: TrackerConfig<T>,
    weights: Weights<T>,
    model: Option<CohortModel<T>>,
    /// For each detection of the current origin frame: the displacement of
    /// the selected link that ended there, and that link's index.
    pred: Vec<Option<(usize, Vec2<T>)>>,
    history: VecDeque<Vec<FlowVector<T>>>,
    cached_next: Option<(usize, Vec<CandidateLink<T>>)>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(cfg: TrackerConfig<T>) -> Result<Self> {
        cfg.calib.validate()?;
        if !(cfg.converge_frac > 0.0) || cfg.lambda_points < 2 || !(cfg.lambda_lo < cfg.lambda_hi) {
            return Err(Error::InvalidConfig("bad linker settings".into()));
        }
        Ok(Self {
            cfg,
            weights: Weights::default(),
            model: None,
            pred: Vec::new(),
            history: VecDeque::new(),
            cached_next: None,
        })
    }

    pub fn weights(&self) -> Weights<T> {
        self.weights
    }

    fn candidate_costs(
        &self,
        cands: &[CandidateLink<T>],
        succ: &[Vec<Vec2<T>>],
        means: Option<&[T]>,
    ) -> Vec<CostBreakdown<T>> {
        let w = &self.weights;
        cands
            .iter()
            .map(|c| {
                if let Some((_, p)) = self.pred.get(c.from).copied().flatten() {
                    return link_cost(Some(p), c.disp, means, w);
                }
                let nexts = succ.get(c.to).map(|v| v.as_slice()).unwrap_or(&[]);
                if nexts.is_empty() {
                    return link_cost(None, c.disp, means, w);
                }
                nexts
                    .iter()
                    .map(|&s| link_cost(Some(s), c.disp, means, w))
                    .fold(None::<CostBreakdown<T>>, |best, cb| match best {
                        Some(b) if b.total <= cb.total => Some(b),
                        _ => Some(cb),
                    })
                    .unwrap()
            })
            .collect()
    }

    /// Links `frame_t` (index `t`) to `frame_t1`; `frame_t2` is only read
    /// for look-ahead scoring.
    pub fn step(
        &mut self,
        t: usize,
        frame_t: &[Detection<T>],
        frame_t1: &[Detection<T>],
        frame_t2: Option<&[Detection<T>]>,
    ) -> Result<FrameStep<T>> {
        let max_disp = self.cfg.calib.max_disp_px();
        let mut cands = match self.cached_next.take() {
            Some((ct, c)) if ct == t => c,
            _ => gen_candidates(frame_t, frame_t1, max_disp),
        };
        if self.pred.len() != frame_t.len() {
            self.pred = vec![None; frame_t.len()];
        }
        for c in &mut cands {
            c.best_pred = self.pred[c.from].map(|(k, _)| k);
        }
        // also reused as the next frame's candidate set
        let next = frame_t2.map(|f2| gen_candidates(frame_t1, f2, max_disp)).unwrap_or_default();
        let mut succ: Vec<Vec<Vec2<T>>> = vec![Vec::new(); frame_t1.len()];
        if self.cfg.lookahead {
            for s in &next {
                succ[s.from].push(s.disp);
            }
        }

        let area = self.cfg.arena.map(|(w, h)| w * h);
        let hist: Vec<&[FlowVector<T>]> = self.history.iter().map(|v| v.as_slice()).collect();
        let mut prev_sel: Vec<(usize, usize)> = Vec::new();
        let mut iterations = Vec::new();
        let mut converged = false;
        let mut cap_hit = false;
        let mut iters_used = 0;
        let mut result = None;

        for iter in 0..=self.cfg.max_iters {
            let means_vec = self.model.as_ref().map(|m| m.organized_means());
            let costs = self.candidate_costs(&cands, &succ, means_vec.as_deref());
            let totals: Vec<T> = costs.iter().map(|c| c.total).collect();
            let grid = default_lambda_grid(
                &totals,
                self.cfg.lambda_points,
                T::lit(self.cfg.lambda_lo),
                T::lit(self.cfg.lambda_hi),
            );
            let (frontier, solution) = pareto_select(&cands, &totals, &grid)?;
            let sel: Vec<(usize, usize)> =
                solution.selected.iter().map(|&k| (cands[k].from, cands[k].to)).collect();
            let frac: T = if iter == 0 {
                if sel.is_empty() { T::zero() } else { T::one() }
            } else {
                frac_changed(&prev_sel, &sel)
            };
            iterations.push(IterationRecord {
                frame: t,
                iter,
                links: sel.len(),
                total_cost: solution.total_cost,
                frac_changed: frac,
            });

            let vectors: Vec<FlowVector<T>> = solution
                .selected
                .iter()
                .map(|&k| FlowVector::new(t, frame_t[cands[k].from].pos(), cands[k].disp))
                .collect();
            let warm = if iter > 0 { self.model.as_ref().map(|m| m.mixture()) } else { None };
            let model = fit_cohort_model(
                &CohortInput { vectors: &vectors, history: &hist, warm: warm.as_deref(), area },
                &self.cfg.cohort,
            );
            self.model = Some(model);
            iters_used = iter;

            let done = if iter >= 1 && frac < T::lit(self.cfg.converge_frac) {
                converged = true;
                true
            } else if iter == self.cfg.max_iters {
                cap_hit = !sel.is_empty();
                converged = sel.is_empty();
                true
            } else if sel.is_empty() && cands.is_empty() {
                converged = true;
                true
            } else {
                false
            };
            if done {
                result = Some((costs, frontier, solution, vectors));
                break;
            }
            let means = self.model.as_ref().map(|m| m.organized_means()).unwrap_or_default();
            let accepted: Vec<CostBreakdown<T>> = solution
                .selected
                .iter()
                .map(|&k| {
                    let c = &cands[k];
                    let base = costs[k];
                    let cc = super::cost::cohort_penalty(c.disp, Some(&means));
                    CostBreakdown { c_cohort: cc, ..base }
                })
                .collect();
            self.weights = self.weights.reestimate(
                &accepted,
                T::lit(self.cfg.var_floor),
                T::lit(self.cfg.weight_eps),
            );
            prev_sel = sel;
        }

        let (costs, frontier, solution, vectors) = result.expect("loop always finishes");
        let links: Vec<LinkRecord<T>> = solution
            .selected
            .iter()
            .map(|&k| {
                let c = &cands[k];
                LinkRecord {
                    candidate: k,
                    from: c.from,
                    to: c.to,
                    from_pos: frame_t[c.from].pos(),
                    to_pos: frame_t1[c.to].pos(),
                    cost: costs[k],
                }
            })
            .collect();

        let mut pred = vec![None; frame_t1.len()];
        for (k, l) in links.iter().enumerate() {
            pred[l.to] = Some((k, cands[l.candidate].disp));
        }
        self.pred = pred;
        self.history.push_back(vectors.clone());
        while self.history.len() > WINDOW_TRIPLETS - 1 {
            self.history.pop_front();
        }
        self.cached_next = frame_t2.map(|_| (t + 1, next));

        Ok(FrameStep {
            frame: t,
            candidates: cands,
            costs,
            frontier,
            solution,
            links,
            vectors,
            model: self.model.clone().unwrap(),
            iterations,
            iters_used,
            converged,
            cap_hit,
            weights: self.weights,
        })
    }
}

/// Runs the tracker over a whole sequence (at least three frames).
pub fn track_sequence<T: Scalar>(
    frames: &[Vec<Detection<T>>],
    cfg: &TrackerConfig<T>,
) -> Result<TrackResult<T>> {
    if frames.len() < 3 {
        return Err(Error::SampleTooSmall { needed: 3, got: frames.len() });
    }
    let mut tracker = Tracker::new(*cfg)?;
    let mut steps = Vec::with_capacity(frames.len() - 1);
    for t in 0..frames.len() - 1 {
        let f2 = frames.get(t + 2).map(|f| f.as_slice());
        steps.push(tracker.step(t, &frames[t], &frames[t + 1], f2)?);
    }
    Ok(TrackResult { steps })
}

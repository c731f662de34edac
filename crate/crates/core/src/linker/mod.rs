//! Frame-to-frame data association.

mod assign;
mod candidates;
mod cost;
mod pareto;
mod track;

pub use assign::{solve_assignment, AssignmentSolution};
pub(crate) use candidates::GridIndex;
pub use candidates::{gen_candidates, CandidateLink};
pub use cost::{
    cohort_penalty, equidistance_penalty, link_cost, turn_penalty, CostBreakdown, Weights, STATIONARY_PX,
};
pub use pareto::{default_lambda_grid, pareto_select, FrontierPoint, ParetoFrontier};
pub use track::{
    track_sequence, FrameStep, IterationRecord, LinkRecord, TrackResult, Tracker, TrackerConfig,
};

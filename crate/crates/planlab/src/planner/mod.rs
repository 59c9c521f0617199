//! Optimal plan search and bounds for block-stacking tasks.
//!
//! Three modes: `ExactBfs` is the slow, trustworthy reference (breadth-first
//! directly over the semantic applicability/transition functions, any
//! domain); `AStar` is the production path over a packed state encoding with
//! an admissible lower bound; `BoundsOnly` skips search and pairs the lower
//! bound with the deconstruct-rebuild strategy plan as upper bound.

mod heuristic;
mod search;
mod space;
mod strategy;

pub use strategy::strategy_plan;

use std::time::Duration;

use thiserror::Error;

use crate::strips::{validate_plan, Block, GroundAction, Task};
use space::SearchSpace;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PlanMode {
    ExactBfs,
    AStar,
    BoundsOnly,
}

#[derive(Clone, Copy, Debug)]
pub struct PlanSearchLimits {
    pub max_expansions: u64,
    pub max_seconds: Duration,
    pub mode: PlanMode,
}

impl PlanSearchLimits {
    pub fn new(mode: PlanMode) -> PlanSearchLimits {
        PlanSearchLimits {
            max_expansions: 5_000_000,
            max_seconds: Duration::from_secs(60),
            mode,
        }
    }
}

/// What a search run established about a task's optimal length.
#[derive(Clone, Debug)]
pub struct PlanLengthResult {
    pub lower_bound: u32,
    pub upper_bound: Option<u32>,
    pub plan: Option<Vec<GroundAction>>,
    pub certified_optimal: bool,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PlannerError {
    #[error("too many blocks for the packed encoding ({0})")]
    TooManyBlocks(usize),
    #[error("goal mentions block {0} absent from the initial state")]
    UnknownGoalBlock(Block),
    #[error("unsolvable goal: {0}")]
    ContradictoryGoal(String),
    #[error("goal is not a set of towers: {0}")]
    NonTowerGoal(String),
    #[error("packed search supports only the standard four-operator domain")]
    UnsupportedDomain,
    #[error("search space exhausted without reaching the goal")]
    GoalUnreachable,
    #[error("max_expansions must be positive")]
    BadLimits,
}

/// Admissible lower bound on the optimal plan length: twice the blocks that
/// provably must move, plus twice the blocks that provably must move twice,
/// with held blocks counted once. Errors on contradictory goals.
pub fn lower_bound(task: &Task) -> Result<u32, PlannerError> {
    let space = SearchSpace::new(task)?;
    Ok(heuristic::lower_bound(&space, &space.initial()))
}

/// Searches for an optimal plan (or bounds) under `limits`. Resource
/// exhaustion is not an error: it yields `certified_optimal = false` and the
/// best bounds established so far.
pub fn optimal_plan(task: &Task, limits: &PlanSearchLimits) -> Result<PlanLengthResult, PlannerError> {
    if limits.max_expansions == 0 {
        return Err(PlannerError::BadLimits);
    }
    match limits.mode {
        PlanMode::ExactBfs => search::exact_bfs(task, limits),
        PlanMode::AStar => {
            let space = SearchSpace::new(task)?;
            search::astar(task, &space, limits)
        }
        PlanMode::BoundsOnly => {
            let space = SearchSpace::new(task)?;
            let lb = heuristic::lower_bound(&space, &space.initial());
            let (upper, plan) = match strategy_plan(task) {
                Ok(plan) => {
                    debug_assert!(validate_plan(task, &plan).goal_satisfied);
                    (Some(plan.len() as u32), Some(plan))
                }
                Err(_) => (None, None),
            };
            Ok(PlanLengthResult {
                lower_bound: lb,
                certified_optimal: upper == Some(lb),
                upper_bound: upper,
                plan,
            })
        }
    }
}

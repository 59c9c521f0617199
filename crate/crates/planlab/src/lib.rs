//! planlab: generate, solve and validate block-stacking planning tasks and
//! algebraic growth puzzles, drive LLMs over them, and account for the cost.
//!
//! The crate is organised around the experiment pipeline:
//!
//! * [`strips`] - task representation, plan execution and validation
//! * [`planner`] - optimal search, admissible lower bounds, strategy plans
//! * [`bwgen`] - seeded generation of block-stacking datasets
//! * [`crt`] - growth-puzzle tasks, ground truth and answer parsing
//! * [`prompting`] - prompt assembly from shipped templates
//! * [`gateway`] - chat-completion backends, retries, caching, pricing
//! * [`extraction`] - pulling plans and formulas out of model replies
//! * [`harness`] - multi-round experiment runner, transcripts, reports

pub mod bwgen;
pub mod crt;
pub mod extraction;
pub mod gateway;
pub mod harness;
pub mod planner;
pub mod prompting;
pub mod strips;

mod par;

//! Plan execution: applicability, transition and whole-plan validation.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{ActionSchema, Atom, Block, DomainModel, GroundAction, State, StateError, Task};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("action {0:?} takes {1} argument(s), got {2}")]
    WrongArity(String, usize, usize),
    #[error("precondition {0} does not hold")]
    PreconditionViolated(Atom),
    #[error("resulting state is inconsistent: {0}")]
    InvalidResult(#[from] StateError),
}

fn ground_all(patterns: &[super::PatternAtom], args: &[Block]) -> Vec<Atom> {
    patterns.iter().map(|p| p.ground(args)).collect()
}

fn resolve<'d>(domain: &'d DomainModel, action: &GroundAction) -> Result<&'d ActionSchema, ApplyError> {
    let schema = domain
        .schema(&action.name)
        .ok_or_else(|| ApplyError::UnknownAction(action.name.clone()))?;
    if schema.params.len() != action.args.len() {
        return Err(ApplyError::WrongArity(
            action.name.clone(),
            schema.params.len(),
            action.args.len(),
        ));
    }
    Ok(schema)
}

/// True when every precondition of `action` holds in `state`.
pub fn is_applicable(state: &State, action: &GroundAction, domain: &DomainModel) -> bool {
    match resolve(domain, action) {
        Ok(schema) => ground_all(&schema.preconds, &action.args)
            .iter()
            .all(|a| state.contains(a)),
        Err(_) => false,
    }
}

/// All ground actions applicable in `state`, sorted by name then arguments.
/// Groundings draw from the blocks mentioned in the state.
pub fn applicable_actions(state: &State, domain: &DomainModel) -> Vec<GroundAction> {
    let blocks: Vec<Block> = state.blocks().into_iter().collect();
    let mut out = Vec::new();
    let mut schemas: Vec<&ActionSchema> = domain.schemas.iter().collect();
    schemas.sort_by(|a, b| a.name.cmp(&b.name));
    for schema in schemas {
        if !schema.params.is_empty() && blocks.is_empty() {
            continue;
        }
        let mut args = vec![0usize; schema.params.len()];
        loop {
            let ground: Vec<Block> = args.iter().map(|&i| blocks[i].clone()).collect();
            let action = GroundAction {
                name: schema.name.clone(),
                args: ground,
            };
            if is_applicable(state, &action, domain) {
                out.push(action);
            }
            // Odometer over block tuples, most significant digit first so the
            // emitted order is lexicographic.
            let mut pos = args.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                args[pos] += 1;
                if args[pos] < blocks.len() {
                    break;
                }
                args[pos] = 0;
            }
            if args.iter().all(|&i| i == 0) || schema.params.is_empty() || blocks.is_empty() {
                break;
            }
        }
    }
    out
}

/// Applies one action, or says why it cannot be applied: deletes, then adds,
/// then a re-check of the state invariants.
pub fn apply(state: &State, action: &GroundAction, domain: &DomainModel) -> Result<State, ApplyError> {
    let schema = resolve(domain, action)?;
    for pre in ground_all(&schema.preconds, &action.args) {
        if !state.contains(&pre) {
            return Err(ApplyError::PreconditionViolated(pre));
        }
    }
    let mut atoms: BTreeSet<Atom> = state.atoms().clone();
    for d in ground_all(&schema.del, &action.args) {
        atoms.remove(&d);
    }
    for a in ground_all(&schema.add, &action.args) {
        atoms.insert(a);
    }
    Ok(State::new(atoms)?)
}

/// Why and where a plan stopped executing. `step` is 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFailure {
    pub step: usize,
    pub action: GroundAction,
    pub reason: String,
}

/// The state sequence visited by a plan prefix. `states[0]` is the initial
/// state; `states.len() - 1` actions were executed.
#[derive(Clone, Debug)]
pub struct ExecutionTrace {
    pub states: Vec<State>,
    pub failure: Option<StepFailure>,
}

impl ExecutionTrace {
    pub fn executed(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &State {
        self.states.last().unwrap()
    }
}

/// Runs `plan` from `init` until it ends or an action fails. Never errors:
/// unknown actions and violated preconditions become the recorded failure.
pub fn execute_plan(init: &State, plan: &[GroundAction], domain: &DomainModel) -> ExecutionTrace {
    let mut states = vec![init.clone()];
    for (i, action) in plan.iter().enumerate() {
        match apply(states.last().unwrap(), action, domain) {
            Ok(next) => states.push(next),
            Err(e) => {
                return ExecutionTrace {
                    states,
                    failure: Some(StepFailure {
                        step: i + 1,
                        action: action.clone(),
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    ExecutionTrace { states, failure: None }
}

/// First failing step of an invalid plan, with the full state the action was
/// attempted in.
#[derive(Clone, Debug)]
pub struct FailureDetail {
    pub step: usize,
    pub action: GroundAction,
    pub reason: String,
    pub state_before: State,
}

/// Validator output: executability, goal satisfaction and failure detail.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub executable: bool,
    pub goal_satisfied: bool,
    pub failure: Option<FailureDetail>,
    pub final_state: State,
}

impl ValidationReport {
    pub fn valid(&self) -> bool {
        self.executable && self.goal_satisfied
    }
}

/// Executes `plan` on `task` and reports the verdict. A plan is valid when it
/// executes fully and the final state satisfies every goal atom.
pub fn validate_plan(task: &Task, plan: &[GroundAction]) -> ValidationReport {
    let trace = execute_plan(&task.init, plan, &task.domain);
    let final_state = trace.final_state().clone();
    match trace.failure {
        Some(f) => ValidationReport {
            executable: false,
            goal_satisfied: false,
            failure: Some(FailureDetail {
                step: f.step,
                action: f.action,
                reason: f.reason,
                state_before: final_state.clone(),
            }),
            final_state,
        },
        None => ValidationReport {
            executable: true,
            goal_satisfied: final_state.satisfies(&task.goal),
            failure: None,
            final_state,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::{bw_domain, parse_plan, parse_state};

    fn state(text: &str) -> State {
        State::new(parse_state(text).unwrap()).unwrap()
    }

    fn act(text: &str) -> GroundAction {
        parse_plan(text).unwrap().remove(0)
    }

    #[test]
    fn empty_block_state_has_no_actions() {
        let s = state("(handempty)");
        assert!(applicable_actions(&s, bw_domain()).is_empty());
    }

    #[test]
    fn single_clear_table_block_allows_only_pickup() {
        let s = state("(handempty) (ontable a) (clear a)");
        let acts = applicable_actions(&s, bw_domain());
        assert_eq!(acts, vec![act("(pickup a)")]);
    }

    #[test]
    fn held_block_allows_putdown_and_stacks() {
        let s = state("(holding a) (ontable b) (clear b)");
        let acts: Vec<String> = applicable_actions(&s, bw_domain())
            .iter()
            .map(|a| a.to_string())
            .collect();
        assert_eq!(acts, ["(putdown a)", "(stack a b)"]);
    }

    #[test]
    fn apply_moves_atoms_both_ways() {
        let s = state("(handempty) (ontable a) (clear a)");
        let held = apply(&s, &act("(pickup a)"), bw_domain()).unwrap();
        assert_eq!(held, state("(holding a)"));
        let back = apply(&held, &act("(putdown a)"), bw_domain()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn apply_reports_the_violated_precondition() {
        let s = state("(handempty) (ontable a) (on b a) (clear b)");
        let e = apply(&s, &act("(pickup a)"), bw_domain()).unwrap_err();
        assert_eq!(
            e,
            ApplyError::PreconditionViolated(parse_state("(clear a)").unwrap().pop_first().unwrap())
        );
    }

    #[test]
    fn unknown_action_is_a_step_failure_not_a_panic() {
        let s = state("(handempty) (ontable a) (clear a)");
        let trace = execute_plan(&s, &[act("(teleport a)")], bw_domain());
        let f = trace.failure.unwrap();
        assert_eq!(f.step, 1);
        assert!(f.reason.contains("unknown action"));
    }

    #[test]
    fn wrong_arity_is_a_step_failure() {
        let s = state("(handempty) (ontable a) (clear a)");
        let trace = execute_plan(&s, &[act("(pickup a a)")], bw_domain());
        assert!(trace.failure.unwrap().reason.contains("argument"));
    }

    #[test]
    fn trace_keeps_states_up_to_the_failure() {
        let s = state("(handempty) (ontable a) (clear a) (ontable b) (clear b)");
        let plan = parse_plan("(pickup a)\n(pickup b)\n").unwrap();
        let trace = execute_plan(&s, &plan, bw_domain());
        assert_eq!(trace.executed(), 1);
        assert_eq!(trace.failure.as_ref().unwrap().step, 2);
        assert!(trace.final_state().contains(&parse_state("(holding a)").unwrap().pop_first().unwrap()));
    }
}

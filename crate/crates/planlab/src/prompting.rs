//! Deterministic prompt assembly for every exchange the harness sends.
//!
//! Four families: task prompts (optionally carrying a strategy), strategy
//! generation prompts, error-correction prompts, and repeat prompts. All
//! builders are pure string substitution into templates shipped with the
//! crate, so identical inputs always produce identical bytes; the harness
//! relies on that for caching and resumption.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crt::CrtTask;
use crate::strips::{render_state, render_task, Task, ValidationReport};

pub const BW_TASK_TEMPLATE_VERSION: &str = "bw-task-v1";
pub const CRT_TASK_TEMPLATE_VERSION: &str = "crt-task-v1";
pub const ERROR_WRAPPER_VERSION: &str = "ec-v1";
pub const STRATEGY_GEN_VERSION: &str = "strat-gen-v1";
pub const PLAN_SUMMARY_VERSION: &str = "plan-summ-v1";
pub const CRT_SUMMARY_VERSION: &str = "crt-summ-v1";

pub const BW_TASK_PROMPT: &str = include_str!("../assets/templates/bw_task_prompt.txt");
pub const CRT_TASK_PROMPT: &str = include_str!("../assets/templates/crt_task_prompt.txt");
pub const BW_STRATEGY_GEN: &str = include_str!("../assets/templates/bw_strategy_gen.txt");
pub const CRT_STRATEGY_GEN: &str = include_str!("../assets/templates/crt_strategy_gen.txt");
pub const PLAN_SUMMARY_PROMPT: &str = include_str!("../assets/templates/plan_summary.txt");
pub const CRT_SUMMARY_PROMPT: &str = include_str!("../assets/templates/crt_summary.txt");
const WRAPPER_NOT_EXECUTABLE: &str =
    include_str!("../assets/templates/error_wrapper_not_executable.txt");
const WRAPPER_GOAL_UNSATISFIED: &str =
    include_str!("../assets/templates/error_wrapper_goal_unsatisfied.txt");

const STRATEGY_SLOT_BW: &str = "[STRATEGY GOES HERE]";
const STRATEGY_SLOT_CRT: &str = "[STRATEGY HERE]";
const TASK_SLOT: &str = "[TASK GOES HERE]";
const QUESTION_SLOT: &str = "[QUESTION GOES HERE]";
const CRT_STRATEGY_SENTENCE: &str = "\n\nA general strategy for this problem type";

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Blocksworld,
    Crt,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Blocksworld => "blocksworld",
            DomainKind::Crt => "crt",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySource {
    Handwritten,
    Generated,
}

/// A reusable domain guide injected into task prompts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Strategy {
    pub id: String,
    pub source: StrategySource,
    pub body: String,
    /// Rough size gauge (four bytes per token); not used for billing.
    pub token_estimate: usize,
}

impl Strategy {
    pub fn new(id: &str, source: StrategySource, body: &str) -> Result<Strategy, PromptError> {
        if body.trim().is_empty() {
            return Err(PromptError::EmptyStrategy(id.to_string()));
        }
        Ok(Strategy {
            id: id.to_string(),
            source,
            body: body.to_string(),
            token_estimate: body.len().div_ceil(4),
        })
    }
}

/// The strategies shipped with the crate, keyed by short names the CLI uses.
pub fn builtin_strategy(name: &str) -> Option<Strategy> {
    let (source, body) = match name {
        "bw-handwritten" => (
            StrategySource::Handwritten,
            include_str!("../assets/strategies/bw_handwritten.txt"),
        ),
        "bw-generated-1" => (
            StrategySource::Generated,
            include_str!("../assets/strategies/bw_generated_1.txt"),
        ),
        "crt-handwritten" => (
            StrategySource::Handwritten,
            include_str!("../assets/strategies/crt_handwritten.txt"),
        ),
        "crt-generated-1" => (
            StrategySource::Generated,
            include_str!("../assets/strategies/crt_generated_1.txt"),
        ),
        _ => return None,
    };
    Some(Strategy::new(name, source, body).expect("embedded strategies are non-empty"))
}

pub const BUILTIN_STRATEGY_NAMES: [&str; 4] = [
    "bw-handwritten",
    "bw-generated-1",
    "crt-handwritten",
    "crt-generated-1",
];

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFamily {
    Task,
    StrategyGen,
    ErrorCorrection,
    Repeat,
}

/// One fully assembled prompt, ready for the gateway.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: Option<String>,
    pub user: String,
    pub family: PromptFamily,
    pub task_ref: String,
}

#[derive(Error, Debug)]
pub enum PromptError {
    #[error("strategy {0} has an empty body")]
    EmptyStrategy(String),
    #[error("refusing to build an error prompt for a correct solution")]
    SolutionWasCorrect,
}

/// Domain text, optional strategy, the fixed worked example, then the task.
/// Without a strategy the slot and its blank line disappear entirely.
pub fn build_bw_task_prompt(task: &Task, strategy: Option<&Strategy>) -> PromptBundle {
    let with_strategy = match strategy {
        Some(s) => BW_TASK_PROMPT.replace(STRATEGY_SLOT_BW, s.body.trim_end()),
        None => BW_TASK_PROMPT.replace(concat!("[STRATEGY GOES HERE]", "\n\n"), ""),
    };
    let user = with_strategy.replace(TASK_SLOT, render_task(task).trim_end());
    PromptBundle {
        system: None,
        user,
        family: PromptFamily::Task,
        task_ref: task.id.clone(),
    }
}

/// Answer-format instruction, the question, and optionally the strategy
/// paragraph. Without a strategy the prompt ends right after the question.
pub fn build_crt_task_prompt(task: &CrtTask, strategy: Option<&Strategy>) -> PromptBundle {
    let user = match strategy {
        Some(s) => CRT_TASK_PROMPT
            .replace(QUESTION_SLOT, &task.question)
            .replace(STRATEGY_SLOT_CRT, s.body.trim_end()),
        None => {
            let base = CRT_TASK_PROMPT
                .split(CRT_STRATEGY_SENTENCE)
                .next()
                .expect("split yields at least one piece");
            let mut user = base.replace(QUESTION_SLOT, &task.question);
            user.push('\n');
            user
        }
    };
    PromptBundle {
        system: None,
        user,
        family: PromptFamily::Task,
        task_ref: task.id.clone(),
    }
}

/// The verbatim ask-for-a-strategy template for one domain.
pub fn build_strategy_gen_prompt(kind: DomainKind) -> PromptBundle {
    let user = match kind {
        DomainKind::Blocksworld => BW_STRATEGY_GEN,
        DomainKind::Crt => CRT_STRATEGY_GEN,
    };
    PromptBundle {
        system: None,
        user: user.to_string(),
        family: PromptFamily::StrategyGen,
        task_ref: format!("strategy-gen-{kind}"),
    }
}

/// Fills the error wrapper for a failed validation: the non-executable
/// branch names the first failing action, its step, and the state before
/// it; the executable-but-wrong branch shows the final state instead.
pub fn render_error_message(bad_solution: &str, report: &ValidationReport) -> Result<String, PromptError> {
    if report.valid() {
        return Err(PromptError::SolutionWasCorrect);
    }
    let filled = if let Some(failure) = &report.failure {
        WRAPPER_NOT_EXECUTABLE
            .replace("[ACTION GOES HERE]", &failure.action.to_string())
            .replace("[STEP GOES HERE]", &failure.step.to_string())
            .replace("[STATE GOES HERE]", render_state(&failure.state_before).trim_end())
    } else {
        WRAPPER_GOAL_UNSATISFIED
            .replace("[STATE GOES HERE]", render_state(&report.final_state).trim_end())
    };
    Ok(filled.replace("[BAD SOLUTION GOES HERE]", bad_solution.trim_end()))
}

/// Original prompt, a blank line, then the filled error wrapper.
pub fn build_error_prompt(
    original: &PromptBundle,
    bad_solution: &str,
    report: &ValidationReport,
) -> Result<PromptBundle, PromptError> {
    let message = render_error_message(bad_solution, report)?;
    Ok(PromptBundle {
        system: None,
        user: format!("{}\n{}", original.user, message),
        family: PromptFamily::ErrorCorrection,
        task_ref: original.task_ref.clone(),
    })
}

/// The unchanged original prompt, retagged.
pub fn build_repeat_prompt(original: &PromptBundle) -> PromptBundle {
    PromptBundle {
        family: PromptFamily::Repeat,
        ..original.clone()
    }
}

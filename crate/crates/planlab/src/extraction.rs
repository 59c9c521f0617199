//! Pulling machine-checkable answers out of free-form model text.
//!
//! Plans: prefer the last fenced code block that consists solely of
//! well-formed actions; otherwise scan the whole text for well-formed
//! parenthesized actions in order. Growth puzzles: take the last
//! `@@...@@` span. Both rules are pure; the optional LLM summarizers ask a
//! cheap model to do the same job and parse its reply strictly.

use std::sync::OnceLock;

use regex::Regex;

use crate::crt::LinearForm;
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::prompting::{CRT_SUMMARY_PROMPT, PLAN_SUMMARY_PROMPT};
use crate::strips::{bw_domain, parse_plan, Block, GroundAction};

fn action_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*([a-z][a-z0-9-]*)((?:\s+[a-z][a-z0-9-]*)*)\s*\)").unwrap())
}

/// Parses one parenthesized group as a domain action: the name must be a
/// schema name and the argument count must match its arity.
fn well_formed_action(name: &str, args_text: &str) -> Option<GroundAction> {
    let schema = bw_domain().schema(name)?;
    let args: Vec<Block> = args_text
        .split_whitespace()
        .map(Block::new)
        .collect::<Result<_, _>>()
        .ok()?;
    if args.len() != schema.params.len() {
        return None;
    }
    Some(GroundAction {
        name: schema.name.clone(),
        args,
    })
}

/// All well-formed actions in `text`, in order of appearance. Atoms such as
/// `(on a b)` never match: `on` is a predicate, not an operator.
fn scan_actions(text: &str) -> Vec<GroundAction> {
    action_regex()
        .captures_iter(text)
        .filter_map(|c| well_formed_action(&c[1], &c[2]))
        .collect()
}

/// A fenced block qualifies when, after stripping list markers, bold and
/// backticks, every non-empty line is exactly one well-formed action.
fn block_as_plan(lines: &[&str]) -> Option<Vec<GroundAction>> {
    static LINE: OnceLock<Regex> = OnceLock::new();
    let line_re = LINE.get_or_init(|| {
        Regex::new(r"^(?:\d+[.)]\s*)?\(\s*([a-z][a-z0-9-]*)((?:\s+[a-z][a-z0-9-]*)*)\s*\)$").unwrap()
    });
    let mut plan = Vec::new();
    for raw in lines {
        let cleaned: String = raw.chars().filter(|c| !"`*".contains(*c)).collect();
        let cleaned = cleaned.trim().trim_start_matches("- ").trim();
        if cleaned.is_empty() {
            continue;
        }
        let caps = line_re.captures(cleaned)?;
        plan.push(well_formed_action(&caps[1], &caps[2])?);
    }
    if plan.is_empty() {
        None
    } else {
        Some(plan)
    }
}

fn fenced_blocks(text: &str) -> Vec<Vec<&str>> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => current = Some(Vec::new()),
            }
            continue;
        }
        if let Some(block) = &mut current {
            block.push(line);
        }
    }
    blocks
}

/// Recovers the proposed plan from model output. Returns an empty plan when
/// nothing actionable is found; the validator then judges it incorrect.
pub fn extract_plan(text: &str) -> Vec<GroundAction> {
    let fenced: Vec<Vec<GroundAction>> = fenced_blocks(text)
        .iter()
        .filter_map(|b| block_as_plan(b))
        .collect();
    match fenced.into_iter().last() {
        Some(plan) => plan,
        None => scan_actions(text),
    }
}

/// Content of the last `@@...@@` span, trimmed; empty when there is none.
pub fn extract_crt_answer(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?s)@@(.*?)@@").unwrap());
    re.captures_iter(text)
        .last()
        .map(|c| c[1].trim().to_string())
        .unwrap_or_default()
}

/// Asks a summarizer model to restate the plan as bare actions, then parses
/// its reply strictly (one action per line). Anything else is an empty plan.
pub fn summarize_plan_llm(
    text: &str,
    gateway: &Gateway,
    model: &str,
) -> Result<Vec<GroundAction>, GatewayError> {
    let prompt = PLAN_SUMMARY_PROMPT.replace("[OUTPUT GOES HERE]", text);
    let request = ChatRequest::new(model, vec![ChatMessage::user(&prompt)]);
    let exchange = gateway.complete(&request)?;
    Ok(parse_plan(&exchange.response_text).unwrap_or_default())
}

/// Asks a summarizer model to canonicalize one formula (never the task) and
/// parses the two-field reply. Malformed replies yield the absent form.
pub fn summarize_crt_llm(
    formula: &str,
    gateway: &Gateway,
    model: &str,
) -> Result<LinearForm, GatewayError> {
    let prompt = CRT_SUMMARY_PROMPT.replace("[FORMULA GOES HERE]", formula);
    let request = ChatRequest::new(model, vec![ChatMessage::user(&prompt)]);
    let exchange = gateway.complete(&request)?;
    Ok(parse_summary_reply(&exchange.response_text))
}

/// Accepts `{'A': 7, 'B': 10}` and friends: single or double quotes, json
/// null or Python None, prose around the structure.
fn parse_summary_reply(reply: &str) -> LinearForm {
    static RE_A: OnceLock<Regex> = OnceLock::new();
    static RE_B: OnceLock<Regex> = OnceLock::new();
    let re_a = RE_A.get_or_init(|| Regex::new(r#"['"]A['"]\s*:\s*(-?\d+|null|None)"#).unwrap());
    let re_b = RE_B.get_or_init(|| Regex::new(r#"['"]B['"]\s*:\s*(-?\d+|null|None)"#).unwrap());
    let field = |re: &Regex| -> Option<i64> { re.captures(reply)?[1].parse().ok() };
    match (field(re_a), field(re_b)) {
        (Some(a), Some(b)) => LinearForm::present(a, b),
        _ => LinearForm::absent(),
    }
}

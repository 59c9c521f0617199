//! Canonical text rendering. States render one atom per line in the fixed
//! predicate order (handempty, clear, on, ontable, holding), alphabetical
//! within a predicate; that order is the derived `Ord` on [`Atom`].

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{Atom, DomainModel, GroundAction, PatternAtom, State, Task};

pub fn render_atoms(atoms: &BTreeSet<Atom>) -> String {
    let mut out = String::new();
    for atom in atoms {
        let _ = writeln!(out, "{atom}");
    }
    out
}

pub fn render_state(state: &State) -> String {
    render_atoms(state.atoms())
}

/// Task file shape: init section, blank line, goal section, `Solution:`.
pub fn render_task(task: &Task) -> String {
    let mut out = String::from("Initial State:\n");
    out.push_str(&render_state(&task.init));
    out.push_str("\nGoal:\n");
    out.push_str(&render_atoms(&task.goal));
    out.push_str("Solution:\n");
    out
}

pub fn render_plan(plan: &[GroundAction]) -> String {
    let mut out = String::new();
    for action in plan {
        let _ = writeln!(out, "{action}");
    }
    out
}

fn render_pattern(pat: &PatternAtom, params: &[String], negated: bool) -> String {
    let mut s = String::new();
    if negated {
        s.push_str("not");
    }
    s.push('(');
    s.push_str(pat.pred.name());
    for &i in &pat.args {
        s.push(' ');
        s.push_str(&params[i]);
    }
    s.push(')');
    s
}

/// Renders a domain back into the prompt syntax, preserving source order.
pub fn render_domain(domain: &DomainModel) -> String {
    let mut blocks = Vec::new();
    for schema in &domain.schemas {
        let mut b = format!("action : {} ({})\n", schema.name, schema.params.join(" "));
        let pre: Vec<String> = schema
            .preconds
            .iter()
            .map(|p| render_pattern(p, &schema.params, false))
            .collect();
        if !pre.is_empty() {
            let _ = writeln!(b, "preconds : {}", pre.join(", "));
        }
        let mut eff: Vec<String> = schema
            .add
            .iter()
            .map(|p| render_pattern(p, &schema.params, false))
            .collect();
        eff.extend(
            schema
                .del
                .iter()
                .map(|p| render_pattern(p, &schema.params, true)),
        );
        let _ = writeln!(b, "effects : {}", eff.join(", "));
        blocks.push(b);
    }
    blocks.join("\n")
}

//! The deconstruct-rebuild plan: put every stacked block on the table, then
//! assemble each goal tower bottom-up. Deliberately wasteful on towers that
//! already stand correct; that is what the written-out strategy prescribes.

use std::collections::BTreeMap;

use crate::strips::{Atom, Block, GroundAction, Task};

use super::space::SearchSpace;
use super::PlannerError;

fn action(name: &str, args: &[&Block]) -> GroundAction {
    GroundAction {
        name: name.to_string(),
        args: args.iter().map(|b| (*b).clone()).collect(),
    }
}

/// Emits the strategy plan for a tower-shaped goal. The result always
/// satisfies the goal; its length is optimal only by accident.
pub fn strategy_plan(task: &Task) -> Result<Vec<GroundAction>, PlannerError> {
    // Reuse the goal consistency checks; tower shape falls out of them.
    let space = SearchSpace::new(task)?;
    if space.goal_holding.is_some() {
        return Err(PlannerError::NonTowerGoal(
            "the goal wants a block left in hand".to_string(),
        ));
    }

    let mut child: BTreeMap<&Block, &Block> = BTreeMap::new();
    let mut bottoms: Vec<&Block> = Vec::new();
    let mut held: Option<&Block> = None;
    for atom in task.init.atoms() {
        match atom {
            Atom::On(x, y) => {
                child.insert(y, x);
            }
            Atom::Ontable(b) => bottoms.push(b),
            Atom::Holding(b) => held = Some(b),
            _ => {}
        }
    }

    let mut plan = Vec::new();
    if let Some(h) = held {
        plan.push(action("putdown", &[h]));
    }
    // bottoms came from a BTreeSet-backed state, already sorted.
    for bottom in bottoms {
        let mut column = vec![bottom];
        while let Some(&up) = child.get(*column.last().unwrap()) {
            column.push(up);
        }
        for i in (1..column.len()).rev() {
            plan.push(action("unstack", &[column[i], column[i - 1]]));
            plan.push(action("putdown", &[column[i]]));
        }
    }

    let mut goal_child: BTreeMap<&Block, &Block> = BTreeMap::new();
    let mut has_parent: BTreeMap<&Block, bool> = BTreeMap::new();
    for atom in &task.goal {
        if let Atom::On(x, y) = atom {
            goal_child.insert(y, x);
            has_parent.insert(x, true);
            has_parent.entry(y).or_insert(false);
        }
    }
    for (root, _) in has_parent.iter().filter(|(_, &p)| !p) {
        let mut below = *root;
        while let Some(&above) = goal_child.get(below) {
            plan.push(action("pickup", &[above]));
            plan.push(action("stack", &[above, below]));
            below = above;
        }
    }
    Ok(plan)
}

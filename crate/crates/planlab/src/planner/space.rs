//! Packed state encoding for the four-operator domain: one byte per block
//! giving its place (table, hand, or the block beneath it). Goal constraints
//! are pre-resolved to block indices, with contradiction checks up front.

#[cfg(test)]
use std::collections::BTreeSet;

#[cfg(test)]
use crate::strips::State;
use crate::strips::{bw_domain, Atom, Block, GroundAction, Task};

use super::PlannerError;

pub(crate) const TABLE: u8 = 0xFE;
pub(crate) const HAND: u8 = 0xFF;
const MAX_BLOCKS: usize = 250;

/// A world state as a place byte per block index.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct Packed {
    pub place: Box<[u8]>,
}

impl Packed {
    /// Who sits directly on each block (`HAND` sentinel means nobody).
    pub fn children(&self) -> Vec<u8> {
        let mut child = vec![HAND; self.place.len()];
        for (i, &p) in self.place.iter().enumerate() {
            if p < TABLE {
                child[p as usize] = i as u8;
            }
        }
        child
    }

    pub fn held(&self) -> Option<u8> {
        self.place.iter().position(|&p| p == HAND).map(|i| i as u8)
    }
}

/// Per-block goal place, if the goal constrains it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum GoalPos {
    Free,
    Table,
    On(u8),
}

/// One compact action: op code plus argument indices.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Act {
    Pickup(u8),
    Putdown(u8),
    Stack(u8, u8),
    Unstack(u8, u8),
}

pub(crate) struct SearchSpace {
    pub names: Vec<Block>,
    init: Packed,
    pub goal_pos: Vec<GoalPos>,
    pub goal_clear: Vec<bool>,
    pub goal_handempty: bool,
    pub goal_holding: Option<u8>,
}

impl SearchSpace {
    pub fn new(task: &Task) -> Result<SearchSpace, PlannerError> {
        if task.domain != *bw_domain() {
            return Err(PlannerError::UnsupportedDomain);
        }
        let names: Vec<Block> = task.init.blocks().into_iter().collect();
        if names.len() > MAX_BLOCKS {
            return Err(PlannerError::TooManyBlocks(names.len()));
        }
        let id = |b: &Block| -> Result<u8, PlannerError> {
            names
                .binary_search(b)
                .map(|i| i as u8)
                .map_err(|_| PlannerError::UnknownGoalBlock(b.clone()))
        };

        let mut place = vec![TABLE; names.len()];
        for atom in task.init.atoms() {
            match atom {
                Atom::On(x, y) => place[id(x)? as usize] = id(y)?,
                Atom::Holding(x) => place[id(x)? as usize] = HAND,
                _ => {}
            }
        }
        let init = Packed {
            place: place.into_boxed_slice(),
        };

        let n = names.len();
        let mut goal_pos = vec![GoalPos::Free; n];
        let mut goal_clear = vec![false; n];
        let mut goal_handempty = false;
        let mut goal_holding: Option<u8> = None;
        let mut goal_child: Vec<Option<u8>> = vec![None; n];
        let contra = |msg: &str| PlannerError::ContradictoryGoal(msg.to_string());

        let set_pos = |i: u8, pos: GoalPos, goal_pos: &mut Vec<GoalPos>| {
            if goal_pos[i as usize] != GoalPos::Free && goal_pos[i as usize] != pos {
                return Err(contra("a block is given two different positions"));
            }
            goal_pos[i as usize] = pos;
            Ok(())
        };

        for atom in &task.goal {
            match atom {
                Atom::On(x, y) => {
                    if x == y {
                        return Err(contra("a block cannot rest on itself"));
                    }
                    let (xi, yi) = (id(x)?, id(y)?);
                    set_pos(xi, GoalPos::On(yi), &mut goal_pos)?;
                    match goal_child[yi as usize] {
                        Some(c) if c != xi => {
                            return Err(contra("two blocks on the same support"))
                        }
                        _ => goal_child[yi as usize] = Some(xi),
                    }
                }
                Atom::Ontable(x) => set_pos(id(x)?, GoalPos::Table, &mut goal_pos)?,
                Atom::Clear(x) => goal_clear[id(x)? as usize] = true,
                Atom::Handempty => goal_handempty = true,
                Atom::Holding(x) => {
                    let xi = id(x)?;
                    if goal_holding.is_some() {
                        return Err(contra("two blocks held at once"));
                    }
                    goal_holding = Some(xi);
                }
            }
        }
        if let Some(h) = goal_holding {
            if goal_handempty {
                return Err(contra("handempty while holding a block"));
            }
            if goal_pos[h as usize] != GoalPos::Free {
                return Err(contra("a held block cannot also be placed"));
            }
            if goal_child[h as usize].is_some() {
                return Err(contra("a held block cannot support another"));
            }
            if goal_clear[h as usize] {
                return Err(contra("a held block cannot be clear"));
            }
        }
        for i in 0..n {
            if goal_clear[i] && goal_child[i].is_some() {
                return Err(contra("a clear block cannot support another"));
            }
        }
        // Support chains must be acyclic.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let GoalPos::On(next) = goal_pos[cur] {
                cur = next as usize;
                steps += 1;
                if steps > n {
                    return Err(contra("the goal stacking order is cyclic"));
                }
            }
        }

        Ok(SearchSpace {
            names,
            init,
            goal_pos,
            goal_clear,
            goal_handempty,
            goal_holding,
        })
    }

    pub fn initial(&self) -> Packed {
        self.init.clone()
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn is_goal(&self, s: &Packed) -> bool {
        let child = s.children();
        let held = s.held();
        if self.goal_handempty && held.is_some() {
            return false;
        }
        if let Some(h) = self.goal_holding {
            if held != Some(h) {
                return false;
            }
        }
        for i in 0..self.n() {
            match self.goal_pos[i] {
                GoalPos::Free => {}
                GoalPos::Table => {
                    if s.place[i] != TABLE {
                        return false;
                    }
                }
                GoalPos::On(y) => {
                    if s.place[i] != y {
                        return false;
                    }
                }
            }
            if self.goal_clear[i] && (child[i] != HAND || s.place[i] == HAND) {
                return false;
            }
        }
        true
    }

    /// Successors in the canonical action order: pickup, putdown, stack,
    /// unstack, each sorted by argument indices.
    pub fn successors(&self, s: &Packed) -> Vec<(Act, Packed)> {
        let n = self.n();
        let child = s.children();
        let held = s.held();
        let mut out = Vec::new();
        let step = |i: usize, to: u8| -> Packed {
            let mut p = s.place.clone();
            p[i] = to;
            Packed { place: p }
        };
        if held.is_none() {
            for i in 0..n {
                if s.place[i] == TABLE && child[i] == HAND {
                    out.push((Act::Pickup(i as u8), step(i, HAND)));
                }
            }
        }
        if let Some(h) = held {
            let hi = h as usize;
            out.push((Act::Putdown(h), step(hi, TABLE)));
            for y in 0..n {
                if y != hi && s.place[y] != HAND && child[y] == HAND {
                    out.push((Act::Stack(h, y as u8), step(hi, y as u8)));
                }
            }
        }
        if held.is_none() {
            for i in 0..n {
                let p = s.place[i];
                if p < TABLE && child[i] == HAND {
                    out.push((Act::Unstack(i as u8, p), step(i, HAND)));
                }
            }
        }
        out
    }

    pub fn action(&self, act: Act) -> GroundAction {
        let b = |i: u8| self.names[i as usize].clone();
        match act {
            Act::Pickup(x) => GroundAction {
                name: "pickup".into(),
                args: vec![b(x)],
            },
            Act::Putdown(x) => GroundAction {
                name: "putdown".into(),
                args: vec![b(x)],
            },
            Act::Stack(x, y) => GroundAction {
                name: "stack".into(),
                args: vec![b(x), b(y)],
            },
            Act::Unstack(x, y) => GroundAction {
                name: "unstack".into(),
                args: vec![b(x), b(y)],
            },
        }
    }

    /// The packed state as semantic atoms, for cross-checks in tests.
    #[cfg(test)]
    pub fn unpack(&self, s: &Packed) -> State {
        let mut atoms = BTreeSet::new();
        let child = s.children();
        let mut any_held = false;
        for i in 0..self.n() {
            let b = self.names[i].clone();
            match s.place[i] {
                TABLE => {
                    atoms.insert(Atom::Ontable(b.clone()));
                }
                HAND => {
                    atoms.insert(Atom::Holding(b.clone()));
                    any_held = true;
                }
                y => {
                    atoms.insert(Atom::On(b.clone(), self.names[y as usize].clone()));
                }
            }
            if s.place[i] != HAND && child[i] == HAND {
                atoms.insert(Atom::Clear(b));
            }
        }
        if !any_held {
            atoms.insert(Atom::Handempty);
        }
        State::new(atoms).expect("packed states stay physically consistent")
    }
}

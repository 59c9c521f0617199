//! Task representation for the block-stacking domain: atoms, states, action
//! schemas, grounded actions and whole tasks.
//!
//! The schema machinery (parameters, preconditions, add/delete effects) is
//! generic, but the atom vocabulary is fixed to the five block predicates and
//! state validation knows their physics. Everything here is immutable after
//! construction; all operations are pure.

mod exec;
mod parse;
mod render;

pub use exec::{applicable_actions, apply, execute_plan, validate_plan};
pub use exec::{ApplyError, ExecutionTrace, FailureDetail, StepFailure, ValidationReport};
pub use parse::{parse_domain, parse_plan, parse_state, parse_task, ParseError, ParseErrorKind};
pub use render::{render_domain, render_plan, render_state, render_task};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// A block name: a non-empty lowercase identifier such as `a` or `b12`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Block(String);

impl Block {
    pub fn new(name: &str) -> Result<Block, StateError> {
        if is_ident(name) {
            Ok(Block(name.to_string()))
        } else {
            Err(StateError::BadBlockName(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_lowercase()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

/// The fixed predicate vocabulary.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Predicate {
    Handempty,
    Clear,
    On,
    Ontable,
    Holding,
}

impl Predicate {
    pub fn from_name(name: &str) -> Option<Predicate> {
        match name {
            "handempty" => Some(Predicate::Handempty),
            "clear" => Some(Predicate::Clear),
            "on" => Some(Predicate::On),
            "ontable" => Some(Predicate::Ontable),
            "holding" => Some(Predicate::Holding),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::Handempty => "handempty",
            Predicate::Clear => "clear",
            Predicate::On => "on",
            Predicate::Ontable => "ontable",
            Predicate::Holding => "holding",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Predicate::Handempty => 0,
            Predicate::On => 2,
            _ => 1,
        }
    }
}

/// A ground atom. Variant order defines the canonical rendering order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Atom {
    Handempty,
    Clear(Block),
    On(Block, Block),
    Ontable(Block),
    Holding(Block),
}

impl Atom {
    pub fn predicate(&self) -> Predicate {
        match self {
            Atom::Handempty => Predicate::Handempty,
            Atom::Clear(_) => Predicate::Clear,
            Atom::On(_, _) => Predicate::On,
            Atom::Ontable(_) => Predicate::Ontable,
            Atom::Holding(_) => Predicate::Holding,
        }
    }

    pub fn from_parts(pred: Predicate, args: &[Block]) -> Option<Atom> {
        match (pred, args) {
            (Predicate::Handempty, []) => Some(Atom::Handempty),
            (Predicate::Clear, [b]) => Some(Atom::Clear(b.clone())),
            (Predicate::On, [a, b]) => Some(Atom::On(a.clone(), b.clone())),
            (Predicate::Ontable, [b]) => Some(Atom::Ontable(b.clone())),
            (Predicate::Holding, [b]) => Some(Atom::Holding(b.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Handempty => write!(f, "(handempty)"),
            Atom::Clear(b) => write!(f, "(clear {b})"),
            Atom::On(a, b) => write!(f, "(on {a} {b})"),
            Atom::Ontable(b) => write!(f, "(ontable {b})"),
            Atom::Holding(b) => write!(f, "(holding {b})"),
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("bad block name {0:?}")]
    BadBlockName(String),
    #[error("more than one block is being held")]
    MultipleHolding,
    #[error("(handempty) must hold exactly when no block is held")]
    HandemptyMismatch,
    #[error("block {0} has no position (needs ontable, on or holding)")]
    NoPosition(Block),
    #[error("block {0} has more than one position")]
    MultiplePositions(Block),
    #[error("block {0} supports more than one block")]
    MultipleChildren(Block),
    #[error("block {0} is held but supports another block")]
    HeldSupport(Block),
    #[error("the clear flag on block {0} contradicts its occupancy")]
    ClearMismatch(Block, bool),
    #[error("the on-relation contains a cycle through {0}")]
    OnCycle(Block),
}

/// A physically consistent world state: a set of atoms where every block has
/// exactly one position, supports at most one block, `clear`/`handempty`
/// agree with the rest, and nothing rests on itself.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct State {
    atoms: BTreeSet<Atom>,
}

impl State {
    pub fn new(atoms: BTreeSet<Atom>) -> Result<State, StateError> {
        validate_physics(&atoms)?;
        Ok(State { atoms })
    }

    /// Skips the block-physics checks. Intended for vocabularies or domains
    /// whose consistency rules differ from the block world.
    pub fn new_unvalidated(atoms: BTreeSet<Atom>) -> State {
        State { atoms }
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn satisfies(&self, goal: &BTreeSet<Atom>) -> bool {
        goal.is_subset(&self.atoms)
    }

    /// Every block mentioned by any atom, in sorted order.
    pub fn blocks(&self) -> BTreeSet<Block> {
        blocks_of(&self.atoms)
    }
}

pub(crate) fn blocks_of(atoms: &BTreeSet<Atom>) -> BTreeSet<Block> {
    let mut out = BTreeSet::new();
    for atom in atoms {
        match atom {
            Atom::Handempty => {}
            Atom::Clear(b) | Atom::Ontable(b) | Atom::Holding(b) => {
                out.insert(b.clone());
            }
            Atom::On(a, b) => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
        }
    }
    out
}

fn validate_physics(atoms: &BTreeSet<Atom>) -> Result<(), StateError> {
    let blocks = blocks_of(atoms);
    let mut held: Option<&Block> = None;
    let mut position: BTreeMap<&Block, u32> = BTreeMap::new();
    let mut support: BTreeMap<&Block, &Block> = BTreeMap::new();
    let mut children: BTreeMap<&Block, u32> = BTreeMap::new();

    for atom in atoms {
        match atom {
            Atom::Holding(b) => {
                if held.is_some() {
                    return Err(StateError::MultipleHolding);
                }
                held = Some(b);
                *position.entry(b).or_insert(0) += 1;
            }
            Atom::Ontable(b) => *position.entry(b).or_insert(0) += 1,
            Atom::On(a, b) => {
                *position.entry(a).or_insert(0) += 1;
                support.insert(a, b);
                *children.entry(b).or_insert(0) += 1;
            }
            _ => {}
        }
    }

    if atoms.contains(&Atom::Handempty) == held.is_some() {
        return Err(StateError::HandemptyMismatch);
    }
    // Walk the support chain from every block; a chain longer than the block
    // count has revisited something. Checked before the per-block flags so a
    // cyclic state is reported as the cycle it is.
    for b in &blocks {
        let mut cur = b;
        let mut steps = 0usize;
        while let Some(next) = support.get(cur) {
            cur = next;
            steps += 1;
            if steps > blocks.len() {
                return Err(StateError::OnCycle(b.clone()));
            }
        }
    }
    for b in &blocks {
        match position.get(b).copied().unwrap_or(0) {
            0 => return Err(StateError::NoPosition(b.clone())),
            1 => {}
            _ => return Err(StateError::MultiplePositions(b.clone())),
        }
        if children.get(b).copied().unwrap_or(0) > 1 {
            return Err(StateError::MultipleChildren(b.clone()));
        }
        if held == Some(b) && children.contains_key(b) {
            return Err(StateError::HeldSupport(b.clone()));
        }
        let expect_clear = held != Some(b) && !children.contains_key(b);
        if atoms.contains(&Atom::Clear(b.clone())) != expect_clear {
            return Err(StateError::ClearMismatch(b.clone(), expect_clear));
        }
    }
    Ok(())
}

/// An atom pattern inside a schema: predicate plus parameter indices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PatternAtom {
    pub pred: Predicate,
    pub args: Vec<usize>,
}

impl PatternAtom {
    pub fn ground(&self, args: &[Block]) -> Atom {
        let bound: Vec<Block> = self.args.iter().map(|&i| args[i].clone()).collect();
        Atom::from_parts(self.pred, &bound).expect("pattern arity checked at parse time")
    }
}

/// A lifted operator: name, parameters, preconditions and effects.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub preconds: Vec<PatternAtom>,
    pub add: Vec<PatternAtom>,
    pub del: Vec<PatternAtom>,
}

/// A parsed domain: the operator set, in source order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DomainModel {
    pub schemas: Vec<ActionSchema>,
}

impl DomainModel {
    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.schemas.iter().find(|s| s.name == name)
    }
}

/// An action instance, e.g. `(stack a b)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<Block>,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Optional bookkeeping attached to generated tasks.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TaskMeta {
    pub n_blocks: u32,
    pub optimal_len: u32,
}

/// A planning task: initial state plus goal atoms, under a domain.
#[derive(Clone, Debug)]
pub struct Task {
    pub id: String,
    pub domain: DomainModel,
    pub init: State,
    pub goal: BTreeSet<Atom>,
    pub meta: Option<TaskMeta>,
}

impl Task {
    /// Builds a block-world task over the standard four-operator domain.
    pub fn bw(id: &str, init: State, goal: BTreeSet<Atom>) -> Task {
        Task {
            id: id.to_string(),
            domain: bw_domain().clone(),
            init,
            goal,
            meta: None,
        }
    }
}

/// The embedded task prompt template; also the source of [`bw_domain`].
pub(crate) const BW_TASK_TEMPLATE: &str =
    include_str!("../../assets/templates/bw_task_prompt.txt");

/// The standard four-operator block-stacking domain, parsed once from the
/// same template text that prompts print.
///
/// The template's unstack line reads `not(clear bottom-block)`: it deletes
/// the very flag it adds and leaves the picked-up block marked clear, which
/// no consistent state can represent. The physical operator every worked
/// example assumes un-clears the *top* block instead, so that one delete is
/// retargeted here. Prompts still print the template text untouched.
pub fn bw_domain() -> &'static DomainModel {
    static DOMAIN: OnceLock<DomainModel> = OnceLock::new();
    DOMAIN.get_or_init(|| {
        let mut domain =
            parse_domain(BW_TASK_TEMPLATE).expect("embedded domain text must parse");
        let unstack = domain
            .schemas
            .iter_mut()
            .find(|s| s.name == "unstack")
            .expect("embedded domain has unstack");
        for del in &mut unstack.del {
            if del.pred == Predicate::Clear && del.args == [1] {
                del.args = vec![0];
            }
        }
        for schema in &domain.schemas {
            for add in &schema.add {
                assert!(
                    !schema.del.contains(add),
                    "{}: add and delete effects must be disjoint",
                    schema.name
                );
            }
        }
        domain
    })
}

//! Parsers for the prompt-facing text formats: domain blocks, atom lists,
//! task files and plans. All errors carry 1-based line numbers.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{
    is_ident, ActionSchema, Atom, Block, DomainModel, GroundAction, PatternAtom, Predicate,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("malformed atom {0:?}")]
    MalformedAtom(String),
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
    #[error("predicate {0:?} takes {1} argument(s), got {2}")]
    WrongArity(String, usize, usize),
    #[error("bad identifier {0:?}")]
    BadIdent(String),
    #[error("malformed action header {0:?}")]
    MalformedHeader(String),
    #[error("duplicate action name {0:?}")]
    DuplicateAction(String),
    #[error("duplicate parameter {0:?}")]
    DuplicateParam(String),
    #[error("variable {0:?} is not a parameter of this action")]
    UnknownVariable(String),
    #[error("{0} clause outside an action block")]
    ClauseOutsideAction(&'static str),
    #[error("action {0:?} has no effects")]
    EmptyEffects(String),
    #[error("negated atom is not allowed here")]
    UnexpectedNegation,
    #[error("no action blocks found")]
    NoActions,
    #[error("expected exactly one action per line, got {0:?}")]
    NotAnAction(String),
    #[error("missing {0:?} section")]
    MissingSection(&'static str),
    #[error("duplicate {0:?} section")]
    DuplicateSection(&'static str),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

/// One parenthesised group scanned out of a line, possibly negated.
struct RawAtom {
    negated: bool,
    parts: Vec<String>,
}

/// Scans `(a b)`, `not(a b)` groups from a line; text between groups must be
/// only whitespace and commas.
fn scan_groups(line: &str, lineno: usize) -> Result<Vec<RawAtom>, ParseError> {
    let mut out = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() || c == ',' {
            i += 1;
        } else if line[i..].starts_with("not(") || c == '(' {
            let negated = c != '(';
            let open = if negated { i + 3 } else { i };
            let close = line[open..]
                .find(')')
                .map(|p| open + p)
                .ok_or_else(|| err(lineno, ParseErrorKind::MalformedAtom(line[i..].into())))?;
            let inner = &line[open + 1..close];
            if inner.contains('(') {
                return Err(err(lineno, ParseErrorKind::MalformedAtom(line[i..].into())));
            }
            out.push(RawAtom {
                negated,
                parts: inner.split_whitespace().map(str::to_string).collect(),
            });
            i = close + 1;
        } else {
            let word: String = line[i..].chars().take_while(|c| !c.is_whitespace()).collect();
            return Err(err(lineno, ParseErrorKind::MalformedAtom(word)));
        }
    }
    Ok(out)
}

fn raw_to_atom(raw: &RawAtom, lineno: usize) -> Result<Atom, ParseError> {
    let name = raw
        .parts
        .first()
        .ok_or_else(|| err(lineno, ParseErrorKind::MalformedAtom("()".into())))?;
    let pred = Predicate::from_name(name)
        .ok_or_else(|| err(lineno, ParseErrorKind::UnknownPredicate(name.clone())))?;
    let args = &raw.parts[1..];
    if args.len() != pred.arity() {
        return Err(err(
            lineno,
            ParseErrorKind::WrongArity(name.clone(), pred.arity(), args.len()),
        ));
    }
    let mut blocks = Vec::new();
    for a in args {
        blocks.push(
            Block::new(a).map_err(|_| err(lineno, ParseErrorKind::BadIdent(a.clone())))?,
        );
    }
    Ok(Atom::from_parts(pred, &blocks).unwrap())
}

/// Parses a set of ground atoms from free-form text, one or more atoms per
/// line. Duplicates collapse. This checks vocabulary and arity only; state
/// physics is [`super::State::new`]'s job.
pub fn parse_state(text: &str) -> Result<BTreeSet<Atom>, ParseError> {
    let mut out = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        for raw in scan_groups(line, idx + 1)? {
            if raw.negated {
                return Err(err(idx + 1, ParseErrorKind::UnexpectedNegation));
            }
            out.insert(raw_to_atom(&raw, idx + 1)?);
        }
    }
    Ok(out)
}

/// Parses a plan: one action per line, `(name arg ...)`. Empty lines are
/// skipped. Action names are not resolved against a domain here; execution
/// reports unknown names as step failures.
pub fn parse_plan(text: &str) -> Result<Vec<GroundAction>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let groups = scan_groups(line, idx + 1)?;
        if groups.len() != 1 || groups[0].negated {
            return Err(err(idx + 1, ParseErrorKind::NotAnAction(line.trim().into())));
        }
        out.push(group_to_action(&groups[0], idx + 1)?);
    }
    Ok(out)
}

fn group_to_action(raw: &RawAtom, lineno: usize) -> Result<GroundAction, ParseError> {
    let name = raw
        .parts
        .first()
        .ok_or_else(|| err(lineno, ParseErrorKind::NotAnAction("()".into())))?;
    if !is_ident(name) {
        return Err(err(lineno, ParseErrorKind::BadIdent(name.clone())));
    }
    let mut args = Vec::new();
    for a in &raw.parts[1..] {
        args.push(Block::new(a).map_err(|_| err(lineno, ParseErrorKind::BadIdent(a.clone())))?);
    }
    Ok(GroundAction {
        name: name.clone(),
        args,
    })
}

/// Parses a task file: an `Initial State:` section, a `Goal:` section, and an
/// optional trailing `Solution:` marker. Returns (init atoms, goal atoms).
pub fn parse_task(text: &str) -> Result<(BTreeSet<Atom>, BTreeSet<Atom>), ParseError> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Init,
        Goal,
        Done,
    }
    let mut section = Section::Preamble;
    let mut init = BTreeSet::new();
    let mut goal = BTreeSet::new();
    let mut seen_init = false;
    let mut seen_goal = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let t = line.trim();
        if t == "Initial State:" {
            if seen_init {
                return Err(err(lineno, ParseErrorKind::DuplicateSection("Initial State:")));
            }
            seen_init = true;
            section = Section::Init;
        } else if t == "Goal:" {
            if seen_goal {
                return Err(err(lineno, ParseErrorKind::DuplicateSection("Goal:")));
            }
            if !seen_init {
                return Err(err(lineno, ParseErrorKind::MissingSection("Initial State:")));
            }
            seen_goal = true;
            section = Section::Goal;
        } else if t == "Solution:" {
            section = Section::Done;
        } else if !t.is_empty() {
            let target = match section {
                Section::Init => &mut init,
                Section::Goal => &mut goal,
                Section::Preamble | Section::Done => continue,
            };
            for raw in scan_groups(line, lineno)? {
                if raw.negated {
                    return Err(err(lineno, ParseErrorKind::UnexpectedNegation));
                }
                target.insert(raw_to_atom(&raw, lineno)?);
            }
        }
    }
    if !seen_init {
        return Err(err(1, ParseErrorKind::MissingSection("Initial State:")));
    }
    if !seen_goal {
        return Err(err(1, ParseErrorKind::MissingSection("Goal:")));
    }
    Ok((init, goal))
}

/// Parses a domain description in the prompt syntax:
///
/// ```text
/// action : stack (top-block bottom-block)
/// preconds : (holding top-block), (clear bottom-block)
/// effects : (on top-block bottom-block), ..., not(holding top-block)
/// ```
///
/// Lines that do not start one of the three clauses are ignored, so the text
/// may be a whole prompt.
pub fn parse_domain(text: &str) -> Result<DomainModel, ParseError> {
    struct Open {
        schema: ActionSchema,
        line: usize,
    }
    let mut done: Vec<ActionSchema> = Vec::new();
    let mut open: Option<Open> = None;

    fn close(done: &mut Vec<ActionSchema>, open: Option<Open>) -> Result<(), ParseError> {
        if let Some(o) = open {
            if o.schema.add.is_empty() && o.schema.del.is_empty() {
                return Err(err(o.line, ParseErrorKind::EmptyEffects(o.schema.name)));
            }
            done.push(o.schema);
        }
        Ok(())
    }

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(rest) = clause(line, "action") {
            close(&mut done, open.take())?;
            let schema = parse_header(rest, lineno)?;
            if done.iter().any(|s| s.name == schema.name) {
                return Err(err(lineno, ParseErrorKind::DuplicateAction(schema.name)));
            }
            open = Some(Open { schema, line: lineno });
        } else if let Some(rest) = clause(line, "preconds") {
            let o = open
                .as_mut()
                .ok_or_else(|| err(lineno, ParseErrorKind::ClauseOutsideAction("preconds")))?;
            for raw in scan_groups(rest, lineno)? {
                if raw.negated {
                    return Err(err(lineno, ParseErrorKind::UnexpectedNegation));
                }
                let pat = raw_to_pattern(&raw, &o.schema.params, lineno)?;
                o.schema.preconds.push(pat);
            }
        } else if let Some(rest) = clause(line, "effects") {
            let o = open
                .as_mut()
                .ok_or_else(|| err(lineno, ParseErrorKind::ClauseOutsideAction("effects")))?;
            for raw in scan_groups(rest, lineno)? {
                let pat = raw_to_pattern(&raw, &o.schema.params, lineno)?;
                if raw.negated {
                    o.schema.del.push(pat);
                } else {
                    o.schema.add.push(pat);
                }
            }
        }
    }
    close(&mut done, open.take())?;
    if done.is_empty() {
        return Err(err(1, ParseErrorKind::NoActions));
    }
    Ok(DomainModel { schemas: done })
}

fn clause<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let t = line.trim_start();
    let rest = t.strip_prefix(key)?;
    let rest = rest.trim_start();
    rest.strip_prefix(':')
}

fn parse_header(rest: &str, lineno: usize) -> Result<ActionSchema, ParseError> {
    let t = rest.trim();
    let open = t
        .find('(')
        .ok_or_else(|| err(lineno, ParseErrorKind::MalformedHeader(t.into())))?;
    let close = t
        .rfind(')')
        .filter(|&c| c > open && t[c + 1..].trim().is_empty())
        .ok_or_else(|| err(lineno, ParseErrorKind::MalformedHeader(t.into())))?;
    let name = t[..open].trim();
    if !is_ident(name) {
        return Err(err(lineno, ParseErrorKind::BadIdent(name.into())));
    }
    let mut params = Vec::new();
    for p in t[open + 1..close].split_whitespace() {
        if !is_ident(p) {
            return Err(err(lineno, ParseErrorKind::BadIdent(p.into())));
        }
        if params.iter().any(|q| q == p) {
            return Err(err(lineno, ParseErrorKind::DuplicateParam(p.into())));
        }
        params.push(p.to_string());
    }
    Ok(ActionSchema {
        name: name.to_string(),
        params,
        preconds: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
    })
}

fn raw_to_pattern(
    raw: &RawAtom,
    params: &[String],
    lineno: usize,
) -> Result<PatternAtom, ParseError> {
    let name = raw
        .parts
        .first()
        .ok_or_else(|| err(lineno, ParseErrorKind::MalformedAtom("()".into())))?;
    let pred = Predicate::from_name(name)
        .ok_or_else(|| err(lineno, ParseErrorKind::UnknownPredicate(name.clone())))?;
    let args = &raw.parts[1..];
    if args.len() != pred.arity() {
        return Err(err(
            lineno,
            ParseErrorKind::WrongArity(name.clone(), pred.arity(), args.len()),
        ));
    }
    let mut indices = Vec::new();
    for a in args {
        let i = params
            .iter()
            .position(|p| p == a)
            .ok_or_else(|| err(lineno, ParseErrorKind::UnknownVariable(a.clone())))?;
        indices.push(i);
    }
    Ok(PatternAtom { pred, args: indices })
}

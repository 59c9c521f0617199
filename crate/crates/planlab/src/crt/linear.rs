//! Deterministic parser for model answers in the `AY - BX` family.
//!
//! Accepts sums and differences of integer multiples of X and Y (plus bare
//! numbers), with constant multiplication and division folded exactly over
//! rationals. Anything outside that small language - unknown functions,
//! symbol-by-symbol products, decimals - yields the absent form, which the
//! caller treats as "route to the fallback summarizer", never as correct.

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Zero};

use super::LinearForm;

type Q = Ratio<i64>;

/// A linear expression `x*X + y*Y + c` with exact rational coefficients.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct LinExpr {
    x: Q,
    y: Q,
    c: Q,
}

impl LinExpr {
    fn constant(c: Q) -> LinExpr {
        LinExpr {
            x: Q::zero(),
            y: Q::zero(),
            c,
        }
    }

    fn is_constant(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    fn add(&self, other: &LinExpr) -> Option<LinExpr> {
        Some(LinExpr {
            x: self.x.checked_add(&other.x)?,
            y: self.y.checked_add(&other.y)?,
            c: self.c.checked_add(&other.c)?,
        })
    }

    fn sub(&self, other: &LinExpr) -> Option<LinExpr> {
        Some(LinExpr {
            x: self.x.checked_sub(&other.x)?,
            y: self.y.checked_sub(&other.y)?,
            c: self.c.checked_sub(&other.c)?,
        })
    }

    fn neg(&self) -> Option<LinExpr> {
        LinExpr::constant(Q::zero()).sub(self)
    }

    /// Multiplication stays linear only when one side is a constant.
    fn mul(&self, other: &LinExpr) -> Option<LinExpr> {
        let (k, e) = if self.is_constant() {
            (self.c, other)
        } else if other.is_constant() {
            (other.c, self)
        } else {
            return None;
        };
        Some(LinExpr {
            x: e.x.checked_mul(&k)?,
            y: e.y.checked_mul(&k)?,
            c: e.c.checked_mul(&k)?,
        })
    }

    fn div(&self, other: &LinExpr) -> Option<LinExpr> {
        if !other.is_constant() || other.c.is_zero() {
            return None;
        }
        Some(LinExpr {
            x: self.x.checked_div(&other.c)?,
            y: self.y.checked_div(&other.c)?,
            c: self.c.checked_div(&other.c)?,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Token {
    Num(i64),
    X,
    Y,
    Plus,
    Minus,
    Star,
    Slash,
    Open,
    Close,
}

fn lex(text: &str) -> Option<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            b'-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            b'*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            b'/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            b'(' => {
                tokens.push(Token::Open);
                i += 1;
            }
            b')' => {
                tokens.push(Token::Close);
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                // A decimal point means a non-integer literal: bail out.
                if i < bytes.len() && bytes[i] == b'.' {
                    return None;
                }
                tokens.push(Token::Num(text[start..i].parse().ok()?));
            }
            _ if b.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                match &text[start..i] {
                    "X" | "x" => tokens.push(Token::X),
                    "Y" | "y" => tokens.push(Token::Y),
                    _ => return None,
                }
            }
            _ => return None,
        }
    }
    Some(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.peek()?;
        self.pos += 1;
        Some(t)
    }

    fn expr(&mut self) -> Option<LinExpr> {
        let mut acc = self.term()?;
        while let Some(op @ (Token::Plus | Token::Minus)) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = match op {
                Token::Plus => acc.add(&rhs)?,
                _ => acc.sub(&rhs)?,
            };
        }
        Some(acc)
    }

    fn term(&mut self) -> Option<LinExpr> {
        let mut acc = self.factor()?;
        while let Some(op @ (Token::Star | Token::Slash)) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = match op {
                Token::Star => acc.mul(&rhs)?,
                _ => acc.div(&rhs)?,
            };
        }
        Some(acc)
    }

    fn factor(&mut self) -> Option<LinExpr> {
        match self.peek()? {
            Token::Plus => {
                self.pos += 1;
                self.factor()
            }
            Token::Minus => {
                self.pos += 1;
                self.factor()?.neg()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Option<LinExpr> {
        match self.bump()? {
            Token::Num(n) => {
                let k = Q::from_integer(n);
                // Juxtaposition: "7X" and "7 Y" mean multiplication.
                match self.peek() {
                    Some(Token::X) => {
                        self.pos += 1;
                        Some(LinExpr {
                            x: k,
                            y: Q::zero(),
                            c: Q::zero(),
                        })
                    }
                    Some(Token::Y) => {
                        self.pos += 1;
                        Some(LinExpr {
                            x: Q::zero(),
                            y: k,
                            c: Q::zero(),
                        })
                    }
                    _ => Some(LinExpr::constant(k)),
                }
            }
            Token::X => Some(LinExpr {
                x: Q::from_integer(1),
                y: Q::zero(),
                c: Q::zero(),
            }),
            Token::Y => Some(LinExpr {
                x: Q::zero(),
                y: Q::from_integer(1),
                c: Q::zero(),
            }),
            Token::Open => {
                let inner = self.expr()?;
                match self.bump()? {
                    Token::Close => Some(inner),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

/// Strips one leading `name =` prefix so answers like `t = 7Y - 10X` parse.
fn strip_assignment(text: &str) -> &str {
    let trimmed = text.trim_start();
    if !trimmed.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return text;
    }
    let end = trimmed
        .char_indices()
        .find(|&(_, c)| !c.is_ascii_alphanumeric() && c != '_')
        .map_or(trimmed.len(), |(i, _)| i);
    match trimmed[end..].trim_start().strip_prefix('=') {
        Some(after) => after,
        None => text,
    }
}

/// Parses free text into the canonical `AY - BX` form. The result is
/// present only when the expression simplifies to exactly `A*Y - B*X` with
/// integer `A >= 0` and `B >= 0` and no constant term.
pub fn parse_linear_answer(text: &str) -> LinearForm {
    let tokens = match lex(strip_assignment(text)) {
        Some(t) if !t.is_empty() => t,
        _ => return LinearForm::absent(),
    };
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
    };
    let expr = match parser.expr() {
        Some(e) if parser.pos == tokens.len() => e,
        _ => return LinearForm::absent(),
    };
    if !expr.c.is_zero() || !expr.y.is_integer() || !expr.x.is_integer() {
        return LinearForm::absent();
    }
    let a = expr.y.to_integer();
    let b = match expr.x.to_integer().checked_neg() {
        Some(b) => b,
        None => return LinearForm::absent(),
    };
    if a < 0 || b < 0 {
        return LinearForm::absent();
    }
    LinearForm::present(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_difference_parses() {
        assert_eq!(parse_linear_answer("7Y - 10X"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("8Y - 6X"), LinearForm::present(8, 6));
        assert_eq!(parse_linear_answer("7y-10x"), LinearForm::present(7, 10));
    }

    #[test]
    fn unknown_functions_are_absent() {
        assert_eq!(parse_linear_answer("t = 5 * log3(1/9)"), LinearForm::absent());
        assert_eq!(parse_linear_answer("7Y - 10X nanoseconds"), LinearForm::absent());
        assert_eq!(parse_linear_answer(""), LinearForm::absent());
        assert_eq!(parse_linear_answer("the answer is above"), LinearForm::absent());
    }

    #[test]
    fn commuted_and_signed_forms_normalize() {
        assert_eq!(parse_linear_answer("-10X + 7Y"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("- 10X + 7Y"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("7Y + 10X"), LinearForm::absent());
        assert_eq!(parse_linear_answer("7Y - 10X + 1"), LinearForm::absent());
    }

    #[test]
    fn constant_products_and_quotients_fold() {
        assert_eq!(parse_linear_answer("7Y - 2*5X"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("7Y - 2 * 5 * X"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("14Y/2 - 10X"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("(7Y) - (10X)"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("7Y/2 - 10X"), LinearForm::absent());
    }

    #[test]
    fn nonlinear_shapes_are_absent() {
        assert_eq!(parse_linear_answer("X*Y"), LinearForm::absent());
        assert_eq!(parse_linear_answer("7Y / X"), LinearForm::absent());
        assert_eq!(parse_linear_answer("7Y / 0"), LinearForm::absent());
        assert_eq!(parse_linear_answer("5X*(7Y/(5X) - 2)"), LinearForm::absent());
        assert_eq!(parse_linear_answer("3.5Y - 10X"), LinearForm::absent());
    }

    #[test]
    fn assignment_prefix_is_stripped_once() {
        assert_eq!(parse_linear_answer("t = 7Y - 10X"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("answer = 7Y - 10X"), LinearForm::present(7, 10));
        assert_eq!(parse_linear_answer("t = u = 7Y"), LinearForm::absent());
    }

    proptest! {
        #[test]
        fn never_panics(text in ".{0,64}") {
            let _ = parse_linear_answer(&text);
        }

        #[test]
        fn rendered_truths_round_trip(a in 0i64..100_000, b in 0i64..100_000) {
            let rendered = format!("{a}Y - {b}X");
            prop_assert_eq!(parse_linear_answer(&rendered), LinearForm::present(a, b));
            let commuted = format!("-{b}X + {a}Y");
            prop_assert_eq!(parse_linear_answer(&commuted), LinearForm::present(a, b));
        }

        #[test]
        fn sign_flips_never_yield_negative_coefficients(a in 1i64..1000, b in 1i64..1000) {
            let wrong = format!("{a}Y + {b}X");
            prop_assert_eq!(parse_linear_answer(&wrong), LinearForm::absent());
            let negated = format!("-{a}Y - {b}X");
            prop_assert_eq!(parse_linear_answer(&negated), LinearForm::absent());
        }
    }
}

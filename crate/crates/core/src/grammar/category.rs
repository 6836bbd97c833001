use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Slash direction of a complex category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slash {
    Forward,
    Backward,
}

impl Slash {
    pub fn as_char(self) -> char {
        match self {
            Slash::Forward => '/',
            Slash::Backward => '\\',
        }
    }
}

/// A categorial-grammar category: either an atom (optionally carrying a
/// feature annotation, e.g. `S[dcl]`) or a slashed function category.
///
/// Equality is structural and features compare exactly. Sub-categories are
/// shared via `Arc`, so cloning is cheap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Atomic {
        name: String,
        feature: Option<String>,
    },
    Complex {
        result: Arc<Category>,
        slash: Slash,
        argument: Arc<Category>,
    },
}

impl Category {
    pub fn atom(name: &str) -> Category {
        Category::Atomic {
            name: name.to_string(),
            feature: None,
        }
    }

    pub fn atom_feat(name: &str, feature: &str) -> Category {
        Category::Atomic {
            name: name.to_string(),
            feature: Some(feature.to_string()),
        }
    }

    pub fn complex(result: Category, slash: Slash, argument: Category) -> Category {
        Category::Complex {
            result: Arc::new(result),
            slash,
            argument: Arc::new(argument),
        }
    }

    pub fn forward(result: Category, argument: Category) -> Category {
        Category::complex(result, Slash::Forward, argument)
    }

    pub fn backward(result: Category, argument: Category) -> Category {
        Category::complex(result, Slash::Backward, argument)
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Category::Atomic { .. })
    }

    /// Nesting depth: atoms have depth 0, each slash adds one level.
    pub fn depth(&self) -> usize {
        match self {
            Category::Atomic { .. } => 0,
            Category::Complex {
                result, argument, ..
            } => 1 + result.depth().max(argument.depth()),
        }
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Atomic { name, feature } => {
                write!(f, "{name}")?;
                if let Some(feat) = feature {
                    write!(f, "[{feat}]")?;
                }
                Ok(())
            }
            Category::Complex {
                result,
                slash,
                argument,
            } => {
                if result.is_atomic() {
                    result.fmt_inner(f)?;
                } else {
                    write!(f, "(")?;
                    result.fmt_inner(f)?;
                    write!(f, ")")?;
                }
                write!(f, "{}", slash.as_char())?;
                if argument.is_atomic() {
                    argument.fmt_inner(f)
                } else {
                    write!(f, "(")?;
                    argument.fmt_inner(f)?;
                    write!(f, ")")
                }
            }
        }
    }
}

impl fmt::Display for Category {
    /// Canonical printing: every complex sub-category is parenthesized, so
    /// `parse(print(c)) == c` and printing canonical strings is injective.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_inner(f)
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Category> {
        parse_category(s)
    }
}

/// Parses a category string such as `(S\NP)/NP` or `S[dcl]`.
///
/// Slashes are left-associative, so `S\NP/NP` means `(S\NP)/NP`. Errors
/// carry the byte offset of the offending character.
pub fn parse_category(text: &str) -> Result<Category> {
    let mut p = Parser {
        input: text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let cat = p.parse_cat()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("trailing input after category"));
    }
    Ok(cat)
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::CategoryParse {
            input: self.input.to_string(),
            offset: self.pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
    }

    fn parse_cat(&mut self) -> Result<Category> {
        let mut left = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'/') => {
                    self.pos += 1;
                    let right = self.parse_term()?;
                    left = Category::complex(left, Slash::Forward, right);
                }
                Some(b'\\') => {
                    self.pos += 1;
                    let right = self.parse_term()?;
                    left = Category::complex(left, Slash::Backward, right);
                }
                _ => return Ok(left),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Category> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_cat()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => self.parse_atom(),
            None => Err(self.err("unexpected end of category")),
        }
    }

    fn parse_atom(&mut self) -> Result<Category> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if is_atom_char(c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected an atomic category name"));
        }
        let name = self.input[start..self.pos].to_string();
        let feature = if self.peek() == Some(b'[') {
            self.pos += 1;
            let fstart = self.pos;
            while let Some(c) = self.peek() {
                if is_atom_char(c) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if self.pos == fstart {
                return Err(self.err("empty feature annotation"));
            }
            let feat = self.input[fstart..self.pos].to_string();
            if self.peek() != Some(b']') {
                return Err(self.err("expected ']' closing feature"));
            }
            self.pos += 1;
            Some(feat)
        } else {
            None
        };
        Ok(Category::Atomic { name, feature })
    }
}

fn is_atom_char(c: u8) -> bool {
    !matches!(
        c,
        b'(' | b')' | b'[' | b']' | b'/' | b'\\' | b' ' | b'\t' | b'\n' | b'\r'
    )
}

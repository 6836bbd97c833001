use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grammar::category::{Category, Slash};

/// The kind of production that creates a parse node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Lex,
    Unary,
    ForwardApply,
    BackwardApply,
    ForwardCompose,
    BackwardCompose,
}

impl RuleKind {
    /// Number of child nodes this kind of production takes.
    pub fn arity(self) -> usize {
        match self {
            RuleKind::Lex => 0,
            RuleKind::Unary => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Lex => "LEX",
            RuleKind::Unary => "UNARY",
            RuleKind::ForwardApply => "FORWARD_APPLY",
            RuleKind::BackwardApply => "BACKWARD_APPLY",
            RuleKind::ForwardCompose => "FORWARD_COMPOSE",
            RuleKind::BackwardCompose => "BACKWARD_COMPOSE",
        }
    }

    pub const ALL: [RuleKind; 6] = [
        RuleKind::Lex,
        RuleKind::Unary,
        RuleKind::ForwardApply,
        RuleKind::BackwardApply,
        RuleKind::ForwardCompose,
        RuleKind::BackwardCompose,
    ];
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<RuleKind> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::data(format!("unknown rule kind {s:?}")))
    }
}

/// A concrete rule instance: the kind plus the category it produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleApplication {
    pub kind: RuleKind,
    pub produces: Category,
}

/// A unary rule table, e.g. `N -> NP`. Loaded from a tab-separated file.
#[derive(Debug, Clone, Default)]
pub struct UnaryTable {
    entries: Vec<(Category, Category)>,
}

impl UnaryTable {
    pub fn new(entries: Vec<(Category, Category)>) -> UnaryTable {
        UnaryTable { entries }
    }

    pub fn parse(text: &str, path: &str) -> Result<UnaryTable> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (from, to) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::data_at(
                        path,
                        i + 1,
                        "expected `from_category<TAB>to_category`",
                    ))
                }
            };
            let from: Category = from
                .trim()
                .parse()
                .map_err(|e| Error::data_at(path, i + 1, e))?;
            let to: Category = to
                .trim()
                .parse()
                .map_err(|e| Error::data_at(path, i + 1, e))?;
            if from == to {
                return Err(Error::data_at(path, i + 1, "unary rule maps a category to itself"));
            }
            entries.push((from, to));
        }
        Ok(UnaryTable { entries })
    }

    pub fn results<'a>(&'a self, c: &'a Category) -> impl Iterator<Item = &'a Category> + 'a {
        self.entries
            .iter()
            .filter(move |(from, _)| from == c)
            .map(|(_, to)| to)
    }

    pub fn entries(&self) -> &[(Category, Category)] {
        &self.entries
    }
}

/// The rule component of the grammar: which combinators are enabled, plus the
/// unary rule table.
#[derive(Debug, Clone, Default)]
pub struct Grammar {
    /// Enables forward and backward composition. Off by default; plain
    /// application is enough for the bundled fixtures.
    pub composition: bool,
    pub unary: UnaryTable,
}

impl Grammar {
    pub fn with_unary(unary: UnaryTable) -> Grammar {
        Grammar {
            composition: false,
            unary,
        }
    }

    /// All ways of combining two adjacent categories. Output order is
    /// canonical: application before composition, forward before backward.
    pub fn combine(&self, left: &Category, right: &Category) -> Vec<RuleApplication> {
        let mut out = Vec::new();
        // X/Y + Y -> X
        if let Category::Complex {
            result,
            slash: Slash::Forward,
            argument,
        } = left
        {
            if argument.as_ref() == right {
                out.push(RuleApplication {
                    kind: RuleKind::ForwardApply,
                    produces: result.as_ref().clone(),
                });
            }
        }
        // Y + X\Y -> X
        if let Category::Complex {
            result,
            slash: Slash::Backward,
            argument,
        } = right
        {
            if argument.as_ref() == left {
                out.push(RuleApplication {
                    kind: RuleKind::BackwardApply,
                    produces: result.as_ref().clone(),
                });
            }
        }
        if self.composition {
            // X/Y + Y/Z -> X/Z
            if let (
                Category::Complex {
                    result: x,
                    slash: Slash::Forward,
                    argument: y1,
                },
                Category::Complex {
                    result: y2,
                    slash: Slash::Forward,
                    argument: z,
                },
            ) = (left, right)
            {
                if y1 == y2 {
                    out.push(RuleApplication {
                        kind: RuleKind::ForwardCompose,
                        produces: Category::Complex {
                            result: Arc::clone(x),
                            slash: Slash::Forward,
                            argument: Arc::clone(z),
                        },
                    });
                }
            }
            // Y\Z + X\Y -> X\Z
            if let (
                Category::Complex {
                    result: y1,
                    slash: Slash::Backward,
                    argument: z,
                },
                Category::Complex {
                    result: x,
                    slash: Slash::Backward,
                    argument: y2,
                },
            ) = (left, right)
            {
                if y1 == y2 {
                    out.push(RuleApplication {
                        kind: RuleKind::BackwardCompose,
                        produces: Category::Complex {
                            result: Arc::clone(x),
                            slash: Slash::Backward,
                            argument: Arc::clone(z),
                        },
                    });
                }
            }
        }
        out
    }

    /// Unary rewrites of a category per the table. The engine never applies
    /// these to a node that was itself produced by a unary rule.
    pub fn unary(&self, c: &Category) -> Vec<RuleApplication> {
        self.unary
            .results(c)
            .map(|to| RuleApplication {
                kind: RuleKind::Unary,
                produces: to.clone(),
            })
            .collect()
    }
}

/// The set of categories accepted as the root of a complete parse.
///
/// An atomic pattern without a feature matches any feature variant of the
/// same atom (`S` accepts `S[dcl]`); everything else matches exactly.
#[derive(Debug, Clone)]
pub struct RootSet {
    patterns: Vec<Category>,
}

impl RootSet {
    pub fn new(patterns: Vec<Category>) -> RootSet {
        RootSet { patterns }
    }

    pub fn parse(spec: &str) -> Result<RootSet> {
        let mut patterns = Vec::new();
        for part in spec.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            patterns.push(part.parse()?);
        }
        if patterns.is_empty() {
            return Err(Error::Config("empty root category set".into()));
        }
        Ok(RootSet { patterns })
    }

    pub fn matches(&self, c: &Category) -> bool {
        self.patterns.iter().any(|p| match (p, c) {
            (
                Category::Atomic {
                    name: pn,
                    feature: None,
                },
                Category::Atomic { name: cn, .. },
            ) => pn == cn,
            _ => p == c,
        })
    }
}

impl Default for RootSet {
    fn default() -> RootSet {
        RootSet::new(vec![Category::atom("S"), Category::atom("NP")])
    }
}

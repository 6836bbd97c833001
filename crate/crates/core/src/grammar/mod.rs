//! Category algebra, combinators, unary rules, and the lexicon.

mod category;
mod lexicon;
mod rules;

pub use category::{parse_category, Category, Slash};
pub use lexicon::{Lexicon, OovPolicy};
pub use rules::{Grammar, RootSet, RuleApplication, RuleKind, UnaryTable};

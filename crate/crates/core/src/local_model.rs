//! The supertag-factored local model: per-token category scores, the leaf
//! local score, and the outside-sum heuristic that guides A*.

use crate::error::{Error, Result};
use crate::grammar::{Category, Lexicon};
use crate::hypergraph::{ParseNode, Span};

/// Per-sentence supertag scores. Local scores attach to leaves only; every
/// other production scores zero under this model. The per-token maxima and
/// their prefix sums back the O(1) outside heuristic.
#[derive(Debug, Clone)]
pub struct SupertagTable {
    words: Vec<String>,
    candidates: Vec<Vec<(Category, f64)>>,
    maxima: Vec<f64>,
    /// prefix[k] = sum of maxima over tokens t < k.
    prefix: Vec<f64>,
}

impl SupertagTable {
    pub fn new(words: Vec<String>, candidates: Vec<Vec<(Category, f64)>>) -> Result<SupertagTable> {
        if words.len() != candidates.len() {
            return Err(Error::Internal(
                "token count and candidate rows disagree".into(),
            ));
        }
        if words.is_empty() {
            return Err(Error::Decode("empty sentence".into()));
        }
        let mut maxima = Vec::with_capacity(words.len());
        for (i, row) in candidates.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Decode(format!(
                    "token {} ({:?}) has no supertag candidates",
                    i, words[i]
                )));
            }
            let mut best = f64::NEG_INFINITY;
            for (cat, score) in row {
                if !score.is_finite() || *score > 0.0 {
                    return Err(Error::Data(format!(
                        "supertag score for token {} category {} must be finite and <= 0, got {}",
                        i, cat, score
                    )));
                }
                best = best.max(*score);
            }
            maxima.push(best);
        }
        let mut prefix = Vec::with_capacity(words.len() + 1);
        prefix.push(0.0);
        for (k, m) in maxima.iter().enumerate() {
            prefix.push(prefix[k] + m);
        }
        Ok(SupertagTable {
            words,
            candidates,
            maxima,
            prefix,
        })
    }

    /// Builds the table for a sentence by looking every token up in the
    /// lexicon (the `tag` function of the search loop).
    pub fn from_lexicon(words: &[String], lexicon: &Lexicon) -> Result<SupertagTable> {
        let mut candidates = Vec::with_capacity(words.len());
        for w in words {
            candidates.push(lexicon.lexical_categories(w)?);
        }
        SupertagTable::new(words.to_vec(), candidates)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn candidates(&self, token: usize) -> &[(Category, f64)] {
        &self.candidates[token]
    }

    pub fn max_at(&self, token: usize) -> f64 {
        self.maxima[token]
    }

    /// Score of assigning `category` to `token`, if the pair is in the table.
    pub fn score_of(&self, token: usize, category: &Category) -> Option<f64> {
        self.candidates[token]
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, s)| *s)
    }

    /// Local score of a hyperedge head: the supertag score if the head is a
    /// leaf and exactly zero otherwise.
    pub fn score_local(&self, head: &ParseNode) -> Result<f64> {
        if !head.is_leaf() {
            return Ok(0.0);
        }
        let token = head.span.start;
        if token >= self.len() {
            return Err(Error::Internal(format!(
                "leaf token {token} out of range for a {}-token sentence",
                self.len()
            )));
        }
        self.score_of(token, &head.category).ok_or_else(|| {
            Error::Decode(format!(
                "leaf category {} for token {} ({:?}) is not in the supertag table",
                head.category, token, self.words[token]
            ))
        })
    }

    /// Outside heuristic: the sum over tokens outside `span` of that token's
    /// maximum supertag score, via prefix sums.
    pub fn heuristic(&self, span: Span) -> f64 {
        debug_assert!(span.end <= self.len());
        self.prefix[span.start] + (self.prefix[self.len()] - self.prefix[span.end])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::ParseNode;
    use proptest::prelude::*;

    fn cat(s: &str) -> Category {
        s.parse().unwrap()
    }

    fn table(rows: Vec<Vec<(&str, f64)>>) -> SupertagTable {
        let words: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
        let candidates = rows
            .into_iter()
            .map(|row| row.into_iter().map(|(c, s)| (cat(c), s)).collect())
            .collect();
        SupertagTable::new(words, candidates).unwrap()
    }

    #[test]
    fn leaf_score_reads_table() {
        let t = table(vec![vec![("NP", -0.4), ("N", -1.0)]]);
        let leaf = ParseNode::leaf(0, cat("NP"));
        assert_eq!(t.score_local(&leaf).unwrap(), -0.4);
    }

    #[test]
    fn non_leaf_scores_zero() {
        let t = table(vec![vec![("NP/NP", -0.2)], vec![("NP", -0.4)]]);
        let left = ParseNode::leaf(0, cat("NP/NP"));
        let right = ParseNode::leaf(1, cat("NP"));
        let binary = ParseNode::binary(
            cat("NP"),
            crate::grammar::RuleKind::ForwardApply,
            left,
            Arc::clone(&right),
        );
        assert_eq!(t.score_local(&binary).unwrap(), 0.0);
        let unary = ParseNode::unary(cat("S"), right);
        assert_eq!(t.score_local(&unary).unwrap(), 0.0);
    }

    use std::sync::Arc;

    #[test]
    fn missing_leaf_category_is_a_decode_error() {
        let t = table(vec![vec![("NP", -0.4)]]);
        let leaf = ParseNode::leaf(0, cat("S"));
        assert!(matches!(t.score_local(&leaf), Err(Error::Decode(_))));
    }

    #[test]
    fn heuristic_sums_outside_maxima() {
        let t = table(vec![
            vec![("A", -0.1)],
            vec![("B", -0.2)],
            vec![("C", -0.3)],
        ]);
        assert!((t.heuristic(Span::new(1, 2)) - (-0.4)).abs() < 1e-15);
        assert_eq!(t.heuristic(Span::new(0, 3)), 0.0);
        assert!((t.heuristic(Span::new(0, 1)) - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn positive_scores_rejected() {
        let words = vec!["w".to_string()];
        assert!(SupertagTable::new(words.clone(), vec![vec![(cat("NP"), 0.5)]]).is_err());
        assert!(SupertagTable::new(words, vec![vec![(cat("NP"), f64::NEG_INFINITY)]]).is_err());
    }

    proptest! {
        #[test]
        fn heuristic_matches_naive_loop(
            rows in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..0.0, 1..4), 1..8),
            raw_span in (0usize..8, 0usize..8),
        ) {
            let n = rows.len();
            let rows: Vec<Vec<(&str, f64)>> = rows
                .iter()
                .map(|r| r.iter().map(|s| ("X", *s)).collect())
                .collect();
            let t = table(rows);
            let (a, b) = raw_span;
            let start = a.min(n.saturating_sub(1));
            let end = (b % (n - start)) + start + 1;
            let span = Span::new(start, end);
            let naive: f64 = (0..n)
                .filter(|tok| !span.contains(*tok))
                .map(|tok| t.max_at(tok))
                .sum();
            prop_assert!((t.heuristic(span) - naive).abs() < 1e-12);
        }

        #[test]
        fn heuristic_is_monotone_in_span(
            maxima in proptest::collection::vec(-10.0f64..0.0, 2..8),
        ) {
            let rows: Vec<Vec<(&str, f64)>> =
                maxima.iter().map(|s| vec![("X", *s)]).collect();
            let n = rows.len();
            let t = table(rows);
            for start in 0..n {
                for end in start + 1..=n {
                    let h = t.heuristic(Span::new(start, end));
                    if end < n {
                        prop_assert!(t.heuristic(Span::new(start, end + 1)) >= h - 1e-12);
                    }
                    if start > 0 {
                        prop_assert!(t.heuristic(Span::new(start - 1, end)) >= h - 1e-12);
                    }
                }
            }
        }
    }
}

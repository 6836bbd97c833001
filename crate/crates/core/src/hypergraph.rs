//! The search space: nodes are entire subtrees, hyperedges are rule
//! productions, and each node is reachable from the start node along exactly
//! one path. The agenda and forest containers used by the decoders live here.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grammar::{Category, Grammar, RuleKind};

/// A contiguous token span, start inclusive and end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, token: usize) -> bool {
        token >= self.start && token < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// An entire partial parse. Identity is the full subtree: two nodes are equal
/// iff their categories, rules, spans, and children agree recursively.
///
/// Nodes are immutable and shared via `Arc`; the structural fingerprint is
/// computed once at construction and hash collisions fall back to a deep
/// comparison.
#[derive(Debug)]
pub struct ParseNode {
    pub span: Span,
    pub category: Category,
    pub rule: RuleKind,
    pub children: Vec<Arc<ParseNode>>,
    subtree_hash: u64,
    size: u32,
}

impl ParseNode {
    /// The distinguished start node with the empty-span convention; it is the
    /// implicit tail of every leaf edge and never enters combination lookup.
    pub fn start() -> Arc<ParseNode> {
        Arc::new(ParseNode::build(
            Span::new(0, 0),
            Category::atom("<start>"),
            RuleKind::Lex,
            Vec::new(),
        ))
    }

    pub fn leaf(token: usize, category: Category) -> Arc<ParseNode> {
        Arc::new(ParseNode::build(
            Span::new(token, token + 1),
            category,
            RuleKind::Lex,
            Vec::new(),
        ))
    }

    pub fn unary(category: Category, child: Arc<ParseNode>) -> Arc<ParseNode> {
        let span = child.span;
        Arc::new(ParseNode::build(
            span,
            category,
            RuleKind::Unary,
            vec![child],
        ))
    }

    pub fn binary(
        category: Category,
        rule: RuleKind,
        left: Arc<ParseNode>,
        right: Arc<ParseNode>,
    ) -> Arc<ParseNode> {
        debug_assert_eq!(rule.arity(), 2);
        debug_assert_eq!(left.span.end, right.span.start, "children must be adjacent");
        let span = Span::new(left.span.start, right.span.end);
        Arc::new(ParseNode::build(span, category, rule, vec![left, right]))
    }

    fn build(
        span: Span,
        category: Category,
        rule: RuleKind,
        children: Vec<Arc<ParseNode>>,
    ) -> ParseNode {
        let mut hasher = DefaultHasher::new();
        span.hash(&mut hasher);
        category.hash(&mut hasher);
        rule.hash(&mut hasher);
        for c in &children {
            hasher.write_u64(c.subtree_hash);
        }
        let subtree_hash = hasher.finish();
        let size = 1 + children.iter().map(|c| c.size).sum::<u32>();
        ParseNode {
            span,
            category,
            rule,
            children,
            subtree_hash,
            size,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.rule == RuleKind::Lex
    }

    /// Canonical structural fingerprint of the whole subtree.
    pub fn fingerprint(&self) -> u64 {
        self.subtree_hash
    }

    /// Total number of nodes in the subtree.
    pub fn size(&self) -> u32 {
        self.size
    }

    /// Pre-order traversal of the subtree, parents before children.
    pub fn nodes(self: &Arc<ParseNode>) -> Vec<Arc<ParseNode>> {
        let mut out = Vec::with_capacity(self.size as usize);
        let mut stack = vec![Arc::clone(self)];
        while let Some(n) = stack.pop() {
            for c in n.children.iter().rev() {
                stack.push(Arc::clone(c));
            }
            out.push(n);
        }
        out
    }

    /// Leaf nodes left to right.
    pub fn leaves(self: &Arc<ParseNode>) -> Vec<Arc<ParseNode>> {
        let mut out: Vec<Arc<ParseNode>> = self
            .nodes()
            .into_iter()
            .filter(|n| n.is_leaf())
            .collect();
        out.sort_by_key(|n| n.span.start);
        out
    }

    fn structural_eq(&self, other: &ParseNode) -> bool {
        if self.span != other.span
            || self.rule != other.rule
            || self.category != other.category
            || self.children.len() != other.children.len()
        {
            return false;
        }
        self.children
            .iter()
            .zip(&other.children)
            .all(|(a, b)| Arc::ptr_eq(a, b) || a.as_ref() == b.as_ref())
    }
}

impl PartialEq for ParseNode {
    fn eq(&self, other: &ParseNode) -> bool {
        self.subtree_hash == other.subtree_hash && self.structural_eq(other)
    }
}

impl Eq for ParseNode {}

impl Hash for ParseNode {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.subtree_hash);
    }
}

impl fmt::Display for ParseNode {
    /// Bracketed serialization: `(<category> <rule> child child)`, leaves as
    /// `(<category> LEX <token-index>)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}", self.category, self.rule)?;
        if self.is_leaf() {
            write!(f, " {}", self.span.start)?;
        } else {
            for c in &self.children {
                write!(f, " {c}")?;
            }
        }
        write!(f, ")")
    }
}

/// Resolution stage of a hyperedge on the agenda.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Local and global scores both attached (eager scoring).
    Fused,
    /// Only the local half has been scored; the global score is pending.
    LocalHalf,
    /// The global half: both scores attached, head not yet explored.
    GlobalHalf,
}

/// A scored rule production from tail nodes to a head node. Leaf edges leave
/// `tails` empty; their implicit tail is the start node.
#[derive(Debug, Clone)]
pub struct Hyperedge {
    pub head: Arc<ParseNode>,
    pub tails: Vec<Arc<ParseNode>>,
    pub local_score: f64,
    /// `None` while the global score is pending (lazy LOCAL_HALF stage).
    pub global_score: Option<f64>,
    pub stage: Stage,
}

impl Hyperedge {
    /// Total edge score with the scores attached so far.
    pub fn score(&self) -> f64 {
        self.local_score + self.global_score.unwrap_or(0.0)
    }
}

/// Inside score of the path deriving a head: the edge score plus the memoized
/// path scores of all tails. The start node contributes zero.
pub fn path_score(edge_score: f64, tail_scores: &[f64]) -> f64 {
    edge_score + tail_scores.iter().sum::<f64>()
}

/// An agenda entry: a hyperedge plus its priority bookkeeping.
#[derive(Debug, Clone)]
pub struct AgendaItem {
    pub edge: Hyperedge,
    /// Sum of memoized path scores over the edge's tails.
    pub g_tails: f64,
    /// Outside heuristic for the head span.
    pub heuristic: f64,
    /// `g(path(e)) + h(e)` with all scores attached so far.
    pub priority: f64,
    seq: u64,
}

struct HeapEntry(AgendaItem);

impl HeapEntry {
    fn key(&self) -> (f64, u32, u64) {
        (self.0.priority, self.0.edge.head.size(), self.0.seq)
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        let (p1, s1, q1) = self.key();
        let (p2, s2, q2) = other.key();
        // Max priority first; ties prefer fewer subtree nodes, then earlier
        // insertion. Priorities are finite by the push contract.
        p1.partial_cmp(&p2)
            .expect("agenda priorities are finite")
            .then(s2.cmp(&s1))
            .then(q2.cmp(&q1))
    }
}

/// Max-priority queue of hyperedges keyed by inside score plus heuristic.
/// Priorities are immutable once pushed; no decrease-key exists.
#[derive(Default)]
pub struct Agenda {
    heap: BinaryHeap<HeapEntry>,
    next_seq: u64,
}

impl Agenda {
    pub fn new() -> Agenda {
        Agenda::default()
    }

    /// Pushes an edge at the given priority. Non-finite priorities are
    /// rejected; they would poison the heap ordering.
    pub fn push(&mut self, edge: Hyperedge, g_tails: f64, heuristic: f64) -> Result<()> {
        let priority = g_tails + edge.score() + heuristic;
        if !priority.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite agenda priority {priority} for head {}",
                edge.head
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(HeapEntry(AgendaItem {
            edge,
            g_tails,
            heuristic,
            priority,
            seq,
        }));
        Ok(())
    }

    /// Removes and returns the maximal-priority item; `None` signals an
    /// exhausted search (no parse exists under the grammar).
    pub fn pop_max(&mut self) -> Option<AgendaItem> {
        self.heap.pop().map(|e| e.0)
    }

    pub fn peek_priority(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.0.priority)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Unordered view of the live entries; used by violation bookkeeping and
    /// by test oracles that re-derive the maximum with a linear scan.
    pub fn iter(&self) -> impl Iterator<Item = &AgendaItem> {
        self.heap.iter().map(|e| &e.0)
    }
}

/// An explored node together with its fixed inside score.
#[derive(Debug, Clone)]
pub struct ForestEntry {
    pub node: Arc<ParseNode>,
    pub g: f64,
}

/// The set of explored nodes, indexed for adjacency lookup. Contains the
/// start node from birth; every later entry was the head of exactly one
/// popped hyperedge.
pub struct Forest {
    start: Arc<ParseNode>,
    entries: Vec<ForestEntry>,
    by_fingerprint: HashMap<u64, Vec<usize>>,
    starting_at: Vec<Vec<usize>>,
    ending_at: Vec<Vec<usize>>,
    duplicates_dropped: usize,
}

impl Forest {
    pub fn new(sentence_len: usize) -> Forest {
        Forest {
            start: ParseNode::start(),
            entries: Vec::new(),
            by_fingerprint: HashMap::new(),
            starting_at: vec![Vec::new(); sentence_len + 1],
            ending_at: vec![Vec::new(); sentence_len + 1],
            duplicates_dropped: 0,
        }
    }

    pub fn start_node(&self) -> &Arc<ParseNode> {
        &self.start
    }

    /// Number of explored nodes including the start node.
    pub fn len(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, node: &ParseNode) -> bool {
        self.by_fingerprint
            .get(&node.fingerprint())
            .is_some_and(|ids| ids.iter().any(|&i| self.entries[i].node.as_ref() == node))
    }

    pub fn g_of(&self, node: &ParseNode) -> Option<f64> {
        let ids = self.by_fingerprint.get(&node.fingerprint())?;
        ids.iter()
            .find(|&&i| self.entries[i].node.as_ref() == node)
            .map(|&i| self.entries[i].g)
    }

    /// Number of insertion attempts dropped because the subtree was already
    /// explored. Stays zero on well-formed searches.
    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    fn insert(&mut self, node: Arc<ParseNode>, g: f64) -> bool {
        if self.contains(&node) {
            self.duplicates_dropped += 1;
            return false;
        }
        let idx = self.entries.len();
        self.by_fingerprint
            .entry(node.fingerprint())
            .or_default()
            .push(idx);
        self.starting_at[node.span.start].push(idx);
        self.ending_at[node.span.end].push(idx);
        self.entries.push(ForestEntry { node, g });
        true
    }

    pub fn entries(&self) -> &[ForestEntry] {
        &self.entries
    }

    /// Explored subtrees with exactly this span and category.
    pub fn lookup(&self, span: Span, category: &Category) -> Vec<&ForestEntry> {
        self.starting_at
            .get(span.start)
            .map(|ids| {
                ids.iter()
                    .map(|&i| &self.entries[i])
                    .filter(|e| e.node.span == span && &e.node.category == category)
                    .collect()
            })
            .unwrap_or_default()
    }

    fn partners_ending_at(&self, pos: usize) -> impl Iterator<Item = &ForestEntry> {
        self.ending_at
            .get(pos)
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }

    fn partners_starting_at(&self, pos: usize) -> impl Iterator<Item = &ForestEntry> {
        self.starting_at
            .get(pos)
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }
}

/// An unscored rule production proposed by `expand`: the head subtree plus
/// the summed path scores of its tails.
#[derive(Debug, Clone)]
pub struct Production {
    pub head: Arc<ParseNode>,
    pub tails: Vec<Arc<ParseNode>>,
    pub g_tails: f64,
}

/// Adds `y` to the forest and returns every hyperedge it licenses: unary
/// rules on `y`, then binary combinations with adjacent forest entries in
/// both orders. A duplicate `y` is dropped and licenses nothing.
pub fn expand(forest: &mut Forest, y: Arc<ParseNode>, g_y: f64, grammar: &Grammar) -> Vec<Production> {
    if !forest.insert(Arc::clone(&y), g_y) {
        return Vec::new();
    }
    let mut out = Vec::new();
    // Unary results are excluded from further unary application to keep the
    // rewrite chain finite.
    if y.rule != RuleKind::Unary {
        for app in grammar.unary(&y.category) {
            out.push(Production {
                head: ParseNode::unary(app.produces, Arc::clone(&y)),
                tails: vec![Arc::clone(&y)],
                g_tails: g_y,
            });
        }
    }
    let binary = |left: &ForestEntry, right: &ForestEntry, out: &mut Vec<Production>| {
        for app in grammar.combine(&left.node.category, &right.node.category) {
            out.push(Production {
                head: ParseNode::binary(
                    app.produces,
                    app.kind,
                    Arc::clone(&left.node),
                    Arc::clone(&right.node),
                ),
                tails: vec![Arc::clone(&left.node), Arc::clone(&right.node)],
                g_tails: left.g + right.g,
            });
        }
    };
    let y_entry = ForestEntry {
        node: Arc::clone(&y),
        g: g_y,
    };
    let mut productions = Vec::new();
    for partner in forest.partners_ending_at(y.span.start) {
        if partner.node.span.is_empty() || Arc::ptr_eq(&partner.node, &y) {
            continue;
        }
        binary(partner, &y_entry, &mut productions);
    }
    for partner in forest.partners_starting_at(y.span.end) {
        if partner.node.span.is_empty() || Arc::ptr_eq(&partner.node, &y) {
            continue;
        }
        binary(&y_entry, partner, &mut productions);
    }
    out.extend(productions);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::UnaryTable;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cat(s: &str) -> Category {
        s.parse().unwrap()
    }

    fn leaf_edge(head: Arc<ParseNode>, local: f64) -> Hyperedge {
        Hyperedge {
            head,
            tails: Vec::new(),
            local_score: local,
            global_score: Some(0.0),
            stage: Stage::Fused,
        }
    }

    #[test]
    fn path_score_sums_edges() {
        assert_eq!(path_score(-0.2, &[-1.0, -0.5]), -1.7);
        assert_eq!(path_score(0.0, &[]), 0.0);
    }

    #[test]
    fn singleton_push_pop() {
        let mut agenda = Agenda::new();
        let n = ParseNode::leaf(0, cat("NP"));
        agenda.push(leaf_edge(Arc::clone(&n), -0.5), 0.0, 0.0).unwrap();
        let item = agenda.pop_max().unwrap();
        assert!(Arc::ptr_eq(&item.edge.head, &n));
        assert_eq!(item.priority, -0.5);
        assert!(agenda.pop_max().is_none());
    }

    #[test]
    fn pop_order_with_ties() {
        let mut agenda = Agenda::new();
        let a = ParseNode::leaf(0, cat("A"));
        let b = ParseNode::leaf(0, cat("B"));
        let c = ParseNode::leaf(0, cat("C"));
        agenda.push(leaf_edge(a, 3.5), 0.0, 0.0).unwrap();
        agenda.push(leaf_edge(Arc::clone(&b), 2.0), 0.0, 0.0).unwrap();
        agenda.push(leaf_edge(Arc::clone(&c), 2.0), 0.0, 0.0).unwrap();
        assert_eq!(agenda.pop_max().unwrap().priority, 3.5);
        // Equal priority and size: earlier insertion wins.
        let second = agenda.pop_max().unwrap();
        assert!(Arc::ptr_eq(&second.edge.head, &b));
        let third = agenda.pop_max().unwrap();
        assert!(Arc::ptr_eq(&third.edge.head, &c));
    }

    #[test]
    fn random_pushes_pop_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agenda = Agenda::new();
        let mut priorities = Vec::new();
        for _ in 0..10_000 {
            let p: f64 = rng.gen_range(-50.0..0.0);
            priorities.push(p);
            agenda
                .push(leaf_edge(ParseNode::leaf(0, cat("X")), p), 0.0, 0.0)
                .unwrap();
        }
        priorities.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut popped = Vec::new();
        while let Some(item) = agenda.pop_max() {
            popped.push(item.priority);
        }
        assert_eq!(popped, priorities);
    }

    #[test]
    fn non_finite_priority_rejected() {
        let mut agenda = Agenda::new();
        let err = agenda
            .push(leaf_edge(ParseNode::leaf(0, cat("X")), f64::NAN), 0.0, 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        let err = agenda
            .push(
                leaf_edge(ParseNode::leaf(0, cat("X")), f64::NEG_INFINITY),
                0.0,
                0.0,
            )
            .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(agenda.is_empty());
    }

    #[test]
    fn expand_combines_with_adjacent_forest_entry() {
        let grammar = Grammar::default();
        let mut forest = Forest::new(4);
        let like = ParseNode::leaf(2, cat("(S\\NP)/NP"));
        let productions = expand(&mut forest, Arc::clone(&like), -0.2, &grammar);
        assert!(productions.is_empty());
        let bananas = ParseNode::leaf(3, cat("NP"));
        let productions = expand(&mut forest, bananas, -0.1, &grammar);
        assert_eq!(productions.len(), 1);
        let head = &productions[0].head;
        assert_eq!(head.category, cat("S\\NP"));
        assert_eq!(head.rule, RuleKind::ForwardApply);
        assert_eq!(head.span, Span::new(2, 4));
        assert!((productions[0].g_tails - (-0.3)).abs() < 1e-12);
    }

    #[test]
    fn expand_with_no_candidates_is_empty() {
        let grammar = Grammar::default();
        let mut forest = Forest::new(3);
        let lone = ParseNode::leaf(1, cat("NP"));
        assert!(expand(&mut forest, lone, -0.5, &grammar).is_empty());
    }

    #[test]
    fn expand_drops_duplicates() {
        let grammar = Grammar::default();
        let mut forest = Forest::new(2);
        let n = ParseNode::leaf(0, cat("NP"));
        let same = ParseNode::leaf(0, cat("NP"));
        assert!(expand(&mut forest, n, -0.5, &grammar).is_empty());
        assert_eq!(forest.len(), 2);
        assert!(expand(&mut forest, same, -0.5, &grammar).is_empty());
        assert_eq!(forest.len(), 2);
        assert_eq!(forest.duplicates_dropped(), 1);
    }

    #[test]
    fn expand_applies_unary_rules_once() {
        let table = UnaryTable::parse("N\tNP\n", "t").unwrap();
        let grammar = Grammar::with_unary(table);
        let mut forest = Forest::new(1);
        let n = ParseNode::leaf(0, cat("N"));
        let productions = expand(&mut forest, n, -0.3, &grammar);
        assert_eq!(productions.len(), 1);
        let np = Arc::clone(&productions[0].head);
        assert_eq!(np.rule, RuleKind::Unary);
        // The unary result itself licenses no further unary rewrites.
        let further = expand(&mut forest, np, -0.3, &grammar);
        assert!(further.is_empty());
    }

    #[test]
    fn forest_lookup_matches_linear_scan() {
        let grammar = Grammar::default();
        let mut forest = Forest::new(4);
        let nodes = [
            ParseNode::leaf(0, cat("NP")),
            ParseNode::leaf(0, cat("NP/NP")),
            ParseNode::leaf(1, cat("NP")),
            ParseNode::leaf(2, cat("S\\NP")),
        ];
        for n in nodes {
            expand(&mut forest, n, -1.0, &grammar);
        }
        for span in [Span::new(0, 1), Span::new(1, 2), Span::new(0, 2)] {
            for c in [cat("NP"), cat("NP/NP"), cat("S")] {
                let via_index: Vec<_> = forest
                    .lookup(span, &c)
                    .into_iter()
                    .map(|e| Arc::clone(&e.node))
                    .collect();
                let via_scan: Vec<_> = forest
                    .entries()
                    .iter()
                    .filter(|e| e.node.span == span && e.node.category == c)
                    .map(|e| Arc::clone(&e.node))
                    .collect();
                assert_eq!(via_index.len(), via_scan.len());
                assert!(via_index
                    .iter()
                    .zip(&via_scan)
                    .all(|(a, b)| Arc::ptr_eq(a, b)));
            }
        }
    }

    #[test]
    fn structural_equality_matches_serialization() {
        let a = ParseNode::binary(
            cat("NP"),
            RuleKind::ForwardApply,
            ParseNode::leaf(0, cat("NP/NP")),
            ParseNode::leaf(1, cat("NP")),
        );
        let b = ParseNode::binary(
            cat("NP"),
            RuleKind::ForwardApply,
            ParseNode::leaf(0, cat("NP/NP")),
            ParseNode::leaf(1, cat("NP")),
        );
        let c = ParseNode::binary(
            cat("NP"),
            RuleKind::BackwardApply,
            ParseNode::leaf(0, cat("NP")),
            ParseNode::leaf(1, cat("NP\\NP")),
        );
        assert_eq!(a.as_ref(), b.as_ref());
        assert_eq!(a.to_string(), b.to_string());
        assert_ne!(a.as_ref(), c.as_ref());
        assert_ne!(a.to_string(), c.to_string());
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.size(), 3);
        assert_eq!(
            a.to_string(),
            "(NP FORWARD_APPLY (NP/NP LEX 0) (NP LEX 1))"
        );
    }

    #[test]
    fn random_tree_equality_is_consistent_with_strings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cats = [cat("NP"), cat("S"), cat("N")];
        let mut make = |rng: &mut ChaCha8Rng, depth: usize, start: usize| -> Arc<ParseNode> {
            fn rec(
                rng: &mut ChaCha8Rng,
                cats: &[Category],
                depth: usize,
                start: usize,
            ) -> Arc<ParseNode> {
                if depth == 0 || rng.gen_bool(0.4) {
                    ParseNode::leaf(start, cats[rng.gen_range(0..cats.len())].clone())
                } else {
                    let left = rec(rng, cats, depth - 1, start);
                    let right = rec(rng, cats, depth - 1, left.span.end);
                    ParseNode::binary(
                        cats[rng.gen_range(0..cats.len())].clone(),
                        RuleKind::ForwardApply,
                        left,
                        right,
                    )
                }
            }
            rec(rng, &cats, depth, start)
        };
        let trees: Vec<_> = (0..60).map(|_| make(&mut rng, 3, 0)).collect();
        for a in &trees {
            for b in &trees {
                assert_eq!(
                    a.as_ref() == b.as_ref(),
                    a.to_string() == b.to_string(),
                    "equality must agree with serialized form"
                );
            }
        }
    }
}

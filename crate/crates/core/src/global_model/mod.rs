//! The recursive global score: a bidirectional chain encoder over words
//! feeding per-rule recursive units, with a log-sigmoid score head that keeps
//! every global score non-positive. The computation graph grown during search
//! supports reverse-mode differentiation over the explored DAG.

mod graph;
mod params;

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

pub use graph::{
    encode_sentence, log_sigmoid, ChainDir, ComputationGraph, EncodedSentence, LatentState,
    ScoreId, StateId,
};
pub use params::{ModelDims, ParameterStore, Vocab, MODEL_FORMAT_VERSION, UNK};

use crate::error::{Error, Result};
use crate::grammar::RuleKind;
use crate::hypergraph::ParseNode;

/// Result of scoring one parse node: where its latent state lives in the
/// graph, which score head it got, and the (non-positive) score itself.
#[derive(Debug, Clone, Copy)]
pub struct ScoredNode {
    pub state: StateId,
    pub score_id: ScoreId,
    pub score: f64,
}

/// Per-sentence scoring context: the encoded chains plus the growing graph.
/// Each decode or training pass owns exactly one of these.
pub struct IncrementalScorer<'p> {
    params: &'p ParameterStore,
    graph: ComputationGraph,
    enc: EncodedSentence,
}

impl<'p> IncrementalScorer<'p> {
    pub fn new(
        params: &'p ParameterStore,
        words: &[String],
        dropout: Option<(&mut ChaCha8Rng, f64)>,
    ) -> IncrementalScorer<'p> {
        let mut graph = ComputationGraph::new(params);
        let enc = encode_sentence(&mut graph, params, words, dropout);
        IncrementalScorer { params, graph, enc }
    }

    pub fn graph(&self) -> &ComputationGraph {
        &self.graph
    }

    pub fn encoding(&self) -> &EncodedSentence {
        &self.enc
    }

    pub fn tree_units(&self) -> usize {
        self.graph.tree_units()
    }

    /// Runs one recursive unit plus a score head for `node`, reusing the
    /// latent states of already-scored children.
    pub fn score_node(&mut self, node: &ParseNode, children: &[StateId]) -> Result<ScoredNode> {
        let (left, right) = match node.rule {
            RuleKind::Lex => self.enc.leaf_state(node.span.start)?,
            RuleKind::Unary => {
                let &[child] = children else {
                    return Err(Error::Internal("unary node expects one child state".into()));
                };
                (self.graph.unary_left_state(), child)
            }
            _ => {
                let &[left, right] = children else {
                    return Err(Error::Internal(
                        "binary node expects two child states".into(),
                    ));
                };
                (left, right)
            }
        };
        let cat = self.params.cat_id(&node.category.to_string());
        let state = self.graph.tree_unit(self.params, node.rule, left, right, cat)?;
        let (score_id, score) = self.graph.score_head(self.params, state);
        Ok(ScoredNode {
            state,
            score_id,
            score,
        })
    }

    /// Scores a whole subtree in one recursive pass, bottom-up, returning
    /// every node's result in post-order plus the summed global score.
    pub fn score_tree(
        &mut self,
        root: &Arc<ParseNode>,
    ) -> Result<(Vec<(Arc<ParseNode>, ScoredNode)>, f64)> {
        let mut out = Vec::new();
        self.score_tree_rec(root, &mut out)?;
        let total = out.iter().map(|(_, s)| s.score).sum();
        Ok((out, total))
    }

    fn score_tree_rec(
        &mut self,
        node: &Arc<ParseNode>,
        out: &mut Vec<(Arc<ParseNode>, ScoredNode)>,
    ) -> Result<StateId> {
        let mut child_states = Vec::with_capacity(node.children.len());
        for child in &node.children {
            child_states.push(self.score_tree_rec(child, out)?);
        }
        let scored = self.score_node(node, &child_states)?;
        out.push((Arc::clone(node), scored));
        Ok(scored.state)
    }

    /// Reverse sweep over the graph; see [`ComputationGraph::backward`].
    pub fn backward(&self, seeds: &[(ScoreId, f64)]) -> Result<ParameterStore> {
        self.graph.backward(self.params, seeds)
    }
}

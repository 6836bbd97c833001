use ndarray::{concatenate, Array1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::global_model::params::{ChainParams, ParameterStore, TreeParams};
use crate::grammar::RuleKind;

pub type StateId = usize;
pub type ScoreId = usize;

/// A (cell, hidden) vector pair attached to a parse node or chain position.
#[derive(Debug, Clone)]
pub struct LatentState {
    pub c: Array1<f64>,
    pub h: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainDir {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy)]
enum BoundaryKind {
    ForwardStart,
    BackwardStart,
    UnaryLeft,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sigmoid_v(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(sigmoid)
}

/// Numerically stable `log(sigmoid(z))`, computed as `-softplus(-z)`.
/// Non-positive for every finite input and free of overflow for large `|z|`.
pub fn log_sigmoid(z: f64) -> f64 {
    -(((-z).max(0.0)) + (-z.abs()).exp().ln_1p())
}

struct ChainRecord {
    dir: ChainDir,
    prev: StateId,
    word: usize,
    /// Input embedding after dropout.
    x: Array1<f64>,
    /// Scaled dropout mask (includes the 1/(1-p) factor); `None` when
    /// dropout is off.
    mask: Option<Array1<f64>>,
    i: Array1<f64>,
    o: Array1<f64>,
    c_tilde: Array1<f64>,
    out: StateId,
}

struct TreeRecord {
    rule: RuleKind,
    left: StateId,
    right: StateId,
    cat: usize,
    i: Array1<f64>,
    f: Array1<f64>,
    o: Array1<f64>,
    c_tilde: Array1<f64>,
    out: StateId,
}

struct ScoreRecord {
    input: StateId,
    z: f64,
    score: f64,
}

enum Record {
    Boundary(BoundaryKind, StateId),
    ChainStep(Box<ChainRecord>),
    TreeUnit(Box<TreeRecord>),
    ScoreHead(ScoreId),
}

/// Append-only record of executed network units. Children are always
/// recorded before their parents, so the backward pass is a single reverse
/// sweep with gradient accumulation at shared states (DAG semantics).
pub struct ComputationGraph {
    states: Vec<LatentState>,
    records: Vec<Record>,
    scores: Vec<ScoreRecord>,
    fwd_boundary: StateId,
    bwd_boundary: StateId,
    unary_left: StateId,
    tree_units: usize,
}

impl ComputationGraph {
    pub fn new(params: &ParameterStore) -> ComputationGraph {
        let mut graph = ComputationGraph {
            states: Vec::new(),
            records: Vec::new(),
            scores: Vec::new(),
            fwd_boundary: 0,
            bwd_boundary: 0,
            unary_left: 0,
            tree_units: 0,
        };
        graph.fwd_boundary = graph.push_boundary(
            BoundaryKind::ForwardStart,
            params.fwd.c0.clone(),
            params.fwd.h0.clone(),
        );
        graph.bwd_boundary = graph.push_boundary(
            BoundaryKind::BackwardStart,
            params.bwd.c0.clone(),
            params.bwd.h0.clone(),
        );
        graph.unary_left = graph.push_boundary(
            BoundaryKind::UnaryLeft,
            params.unary_left_c.clone(),
            params.unary_left_h.clone(),
        );
        graph
    }

    fn push_boundary(&mut self, kind: BoundaryKind, c: Array1<f64>, h: Array1<f64>) -> StateId {
        let id = self.states.len();
        self.states.push(LatentState { c, h });
        self.records.push(Record::Boundary(kind, id));
        id
    }

    pub fn state(&self, id: StateId) -> &LatentState {
        &self.states[id]
    }

    pub fn unary_left_state(&self) -> StateId {
        self.unary_left
    }

    pub fn score(&self, id: ScoreId) -> f64 {
        self.scores[id].score
    }

    /// Number of recursive (tree) units executed so far; this is what the
    /// decode limit on units counts.
    pub fn tree_units(&self) -> usize {
        self.tree_units
    }

    /// One step of a linear chain. `x` inputs are word embeddings, possibly
    /// dropped out; the same mask must be reused for the token's appearance
    /// in both chains, which `encode_sentence` arranges.
    pub fn chain_step(
        &mut self,
        params: &ParameterStore,
        dir: ChainDir,
        prev: StateId,
        word: usize,
        mask: Option<&Array1<f64>>,
    ) -> StateId {
        let chain: &ChainParams = match dir {
            ChainDir::Forward => &params.fwd,
            ChainDir::Backward => &params.bwd,
        };
        let x_raw = params.word_emb.row(word).to_owned();
        let x = match mask {
            Some(m) => &x_raw * m,
            None => x_raw,
        };
        let (c_prev, h_prev) = {
            let s = &self.states[prev];
            (s.c.clone(), s.h.clone())
        };
        let u1 = concatenate(Axis(0), &[c_prev.view(), h_prev.view(), x.view()]).unwrap();
        let i = sigmoid_v(&(chain.w_i.dot(&u1) + &chain.b_i));
        let u2 = concatenate(Axis(0), &[h_prev.view(), x.view()]).unwrap();
        let c_tilde = (chain.w_c.dot(&u2) + &chain.b_c).mapv(f64::tanh);
        let u3 = concatenate(Axis(0), &[c_tilde.view(), h_prev.view(), x.view()]).unwrap();
        let o = sigmoid_v(&(chain.w_o.dot(&u3) + &chain.b_o));
        let c = &i * &c_tilde + (1.0 - &i) * &c_prev;
        let h = &o * &c.mapv(f64::tanh);
        let out = self.states.len();
        self.states.push(LatentState { c, h });
        self.records.push(Record::ChainStep(Box::new(ChainRecord {
            dir,
            prev,
            word,
            x,
            mask: mask.cloned(),
            i,
            o,
            c_tilde,
            out,
        })));
        out
    }

    /// One recursive unit, parametrized by the rule that produces the node.
    /// Child states are referenced, never recomputed.
    pub fn tree_unit(
        &mut self,
        params: &ParameterStore,
        rule: RuleKind,
        left: StateId,
        right: StateId,
        cat: usize,
    ) -> Result<StateId> {
        if left >= self.states.len() || right >= self.states.len() {
            return Err(Error::Internal(format!(
                "tree unit references unknown states {left}/{right}"
            )));
        }
        let tp: &TreeParams = params.tree_params(rule);
        let x_y = params.cat_emb.row(cat).to_owned();
        let (c_l, h_l) = {
            let s = &self.states[left];
            (s.c.clone(), s.h.clone())
        };
        let (c_r, h_r) = {
            let s = &self.states[right];
            (s.c.clone(), s.h.clone())
        };
        let u1 = concatenate(
            Axis(0),
            &[c_l.view(), h_l.view(), c_r.view(), h_r.view(), x_y.view()],
        )
        .unwrap();
        let i = sigmoid_v(&(tp.w_i.dot(&u1) + &tp.b_i));
        let f = sigmoid_v(&(tp.w_f.dot(&u1) + &tp.b_f));
        let u2 = concatenate(Axis(0), &[h_l.view(), h_r.view(), x_y.view()]).unwrap();
        let c_tilde = (tp.w_c.dot(&u2) + &tp.b_c).mapv(f64::tanh);
        let u3 = concatenate(Axis(0), &[c_tilde.view(), h_l.view(), h_r.view(), x_y.view()])
            .unwrap();
        let o = sigmoid_v(&(tp.w_o.dot(&u3) + &tp.b_o));
        let c_lr = &f * &c_l + (1.0 - &f) * &c_r;
        let c = &i * &c_tilde + (1.0 - &i) * &c_lr;
        let h = &o * &c.mapv(f64::tanh);
        let out = self.states.len();
        self.states.push(LatentState { c, h });
        self.records.push(Record::TreeUnit(Box::new(TreeRecord {
            rule,
            left,
            right,
            cat,
            i,
            f,
            o,
            c_tilde,
            out,
        })));
        self.tree_units += 1;
        Ok(out)
    }

    /// Scores a hidden state: `log(sigmoid(w . h))`, strictly negative for
    /// finite inputs.
    pub fn score_head(&mut self, params: &ParameterStore, input: StateId) -> (ScoreId, f64) {
        let z = params.score_w.dot(&self.states[input].h);
        let score = log_sigmoid(z);
        let id = self.scores.len();
        self.scores.push(ScoreRecord { input, z, score });
        self.records.push(Record::ScoreHead(id));
        (id, score)
    }

    /// Reverse sweep: accumulates the gradient of `sum_e w_e * score_e` over
    /// every parameter, summing at shared children.
    pub fn backward(
        &self,
        params: &ParameterStore,
        seeds: &[(ScoreId, f64)],
    ) -> Result<ParameterStore> {
        let mut grads = params.zeros_like();
        let mut seed_weights = vec![0.0; self.scores.len()];
        for (id, w) in seeds {
            if *id >= self.scores.len() {
                return Err(Error::Internal(format!(
                    "gradient seed references unrecorded score head {id}"
                )));
            }
            seed_weights[*id] += w;
        }
        let d = params.dims.hidden_dim;
        let mut dstates: Vec<Option<(Array1<f64>, Array1<f64>)>> = vec![None; self.states.len()];
        let add_state =
            |dstates: &mut Vec<Option<(Array1<f64>, Array1<f64>)>>, id: StateId, dc: &Array1<f64>, dh: &Array1<f64>| {
                match &mut dstates[id] {
                    Some((c, h)) => {
                        *c += dc;
                        *h += dh;
                    }
                    slot @ None => *slot = Some((dc.clone(), dh.clone())),
                }
            };
        for record in self.records.iter().rev() {
            match record {
                Record::ScoreHead(id) => {
                    let w = seed_weights[*id];
                    if w == 0.0 {
                        continue;
                    }
                    let sr = &self.scores[*id];
                    // d/dz log(sigmoid(z)) = sigmoid(-z)
                    let dz = w * sigmoid(-sr.z);
                    grads
                        .score_w
                        .scaled_add(dz, &self.states[sr.input].h);
                    let dh = params.score_w.mapv(|v| v * dz);
                    let dc = Array1::zeros(d);
                    add_state(&mut dstates, sr.input, &dc, &dh);
                }
                Record::TreeUnit(tr) => {
                    let Some((dc_acc, dh_acc)) = dstates[tr.out].take() else {
                        continue;
                    };
                    let tp = params.tree_params(tr.rule);
                    let tg = tree_grads_mut(&mut grads, tr.rule);
                    let x_y = params.cat_emb.row(tr.cat).to_owned();
                    let (c_l, h_l) = {
                        let s = &self.states[tr.left];
                        (s.c.clone(), s.h.clone())
                    };
                    let (c_r, h_r) = {
                        let s = &self.states[tr.right];
                        (s.c.clone(), s.h.clone())
                    };
                    let c_out = &self.states[tr.out].c;
                    let th = c_out.mapv(f64::tanh);
                    let d_o = &dh_acc * &th;
                    let dc_total = &dc_acc + &(&dh_acc * &tr.o * th.mapv(|t| 1.0 - t * t));
                    let c_lr = &tr.f * &c_l + (1.0 - &tr.f) * &c_r;
                    let d_a_o = &d_o * &tr.o * &(1.0 - &tr.o);
                    let u3 = concatenate(
                        Axis(0),
                        &[tr.c_tilde.view(), h_l.view(), h_r.view(), x_y.view()],
                    )
                    .unwrap();
                    outer_add(&mut tg.w_o, &d_a_o, &u3);
                    tg.b_o += &d_a_o;
                    let du3 = tp.w_o.t().dot(&d_a_o);
                    let mut d_c_tilde = du3.slice(ndarray::s![0..d]).to_owned();
                    let mut dh_l = du3.slice(ndarray::s![d..2 * d]).to_owned();
                    let mut dh_r = du3.slice(ndarray::s![2 * d..3 * d]).to_owned();
                    let mut dx_y = du3.slice(ndarray::s![3 * d..]).to_owned();

                    let d_i = &dc_total * &(&tr.c_tilde - &c_lr);
                    d_c_tilde += &(&dc_total * &tr.i);
                    let d_c_lr = &dc_total * &(1.0 - &tr.i);
                    let d_f = &d_c_lr * &(&c_l - &c_r);
                    let mut dc_l = &d_c_lr * &tr.f;
                    let mut dc_r = &d_c_lr * &(1.0 - &tr.f);

                    let u1 = concatenate(
                        Axis(0),
                        &[c_l.view(), h_l.view(), c_r.view(), h_r.view(), x_y.view()],
                    )
                    .unwrap();
                    let d_a_i = &d_i * &tr.i * &(1.0 - &tr.i);
                    outer_add(&mut tg.w_i, &d_a_i, &u1);
                    tg.b_i += &d_a_i;
                    let d_a_f = &d_f * &tr.f * &(1.0 - &tr.f);
                    outer_add(&mut tg.w_f, &d_a_f, &u1);
                    tg.b_f += &d_a_f;
                    let du1 = tp.w_i.t().dot(&d_a_i) + tp.w_f.t().dot(&d_a_f);
                    dc_l += &du1.slice(ndarray::s![0..d]);
                    dh_l += &du1.slice(ndarray::s![d..2 * d]);
                    dc_r += &du1.slice(ndarray::s![2 * d..3 * d]);
                    dh_r += &du1.slice(ndarray::s![3 * d..4 * d]);
                    dx_y += &du1.slice(ndarray::s![4 * d..]);

                    let d_a_c = &d_c_tilde * &tr.c_tilde.mapv(|t| 1.0 - t * t);
                    let u2 =
                        concatenate(Axis(0), &[h_l.view(), h_r.view(), x_y.view()]).unwrap();
                    outer_add(&mut tg.w_c, &d_a_c, &u2);
                    tg.b_c += &d_a_c;
                    let du2 = tp.w_c.t().dot(&d_a_c);
                    dh_l += &du2.slice(ndarray::s![0..d]);
                    dh_r += &du2.slice(ndarray::s![d..2 * d]);
                    dx_y += &du2.slice(ndarray::s![2 * d..]);

                    grads.cat_emb.row_mut(tr.cat).scaled_add(1.0, &dx_y);
                    add_state(&mut dstates, tr.left, &dc_l, &dh_l);
                    add_state(&mut dstates, tr.right, &dc_r, &dh_r);
                }
                Record::ChainStep(cr) => {
                    let Some((dc_acc, dh_acc)) = dstates[cr.out].take() else {
                        continue;
                    };
                    let chain = match cr.dir {
                        ChainDir::Forward => &params.fwd,
                        ChainDir::Backward => &params.bwd,
                    };
                    let cg = chain_grads_mut(&mut grads, cr.dir);
                    let (c_prev, h_prev) = {
                        let s = &self.states[cr.prev];
                        (s.c.clone(), s.h.clone())
                    };
                    let c_out = &self.states[cr.out].c;
                    let th = c_out.mapv(f64::tanh);
                    let d_o = &dh_acc * &th;
                    let dc_total = &dc_acc + &(&dh_acc * &cr.o * th.mapv(|t| 1.0 - t * t));
                    let d_a_o = &d_o * &cr.o * &(1.0 - &cr.o);
                    let u3 = concatenate(
                        Axis(0),
                        &[cr.c_tilde.view(), h_prev.view(), cr.x.view()],
                    )
                    .unwrap();
                    outer_add(&mut cg.w_o, &d_a_o, &u3);
                    cg.b_o += &d_a_o;
                    let du3 = chain.w_o.t().dot(&d_a_o);
                    let mut d_c_tilde = du3.slice(ndarray::s![0..d]).to_owned();
                    let mut dh_prev = du3.slice(ndarray::s![d..2 * d]).to_owned();
                    let mut dx = du3.slice(ndarray::s![2 * d..]).to_owned();

                    let d_i = &dc_total * &(&cr.c_tilde - &c_prev);
                    d_c_tilde += &(&dc_total * &cr.i);
                    let mut dc_prev = &dc_total * &(1.0 - &cr.i);

                    let u1 = concatenate(
                        Axis(0),
                        &[c_prev.view(), h_prev.view(), cr.x.view()],
                    )
                    .unwrap();
                    let d_a_i = &d_i * &cr.i * &(1.0 - &cr.i);
                    outer_add(&mut cg.w_i, &d_a_i, &u1);
                    cg.b_i += &d_a_i;
                    let du1 = chain.w_i.t().dot(&d_a_i);
                    dc_prev += &du1.slice(ndarray::s![0..d]);
                    dh_prev += &du1.slice(ndarray::s![d..2 * d]);
                    dx += &du1.slice(ndarray::s![2 * d..]);

                    let d_a_c = &d_c_tilde * &cr.c_tilde.mapv(|t| 1.0 - t * t);
                    let u2 = concatenate(Axis(0), &[h_prev.view(), cr.x.view()]).unwrap();
                    outer_add(&mut cg.w_c, &d_a_c, &u2);
                    cg.b_c += &d_a_c;
                    let du2 = chain.w_c.t().dot(&d_a_c);
                    dh_prev += &du2.slice(ndarray::s![0..d]);
                    dx += &du2.slice(ndarray::s![d..]);

                    let d_emb = match &cr.mask {
                        Some(m) => &dx * m,
                        None => dx,
                    };
                    grads.word_emb.row_mut(cr.word).scaled_add(1.0, &d_emb);
                    add_state(&mut dstates, cr.prev, &dc_prev, &dh_prev);
                }
                Record::Boundary(kind, id) => {
                    let Some((dc, dh)) = dstates[*id].take() else {
                        continue;
                    };
                    match kind {
                        BoundaryKind::ForwardStart => {
                            grads.fwd.c0 += &dc;
                            grads.fwd.h0 += &dh;
                        }
                        BoundaryKind::BackwardStart => {
                            grads.bwd.c0 += &dc;
                            grads.bwd.h0 += &dh;
                        }
                        BoundaryKind::UnaryLeft => {
                            grads.unary_left_c += &dc;
                            grads.unary_left_h += &dh;
                        }
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn outer_add(w: &mut ndarray::Array2<f64>, delta: &Array1<f64>, u: &Array1<f64>) {
    for (mut row, dv) in w.rows_mut().into_iter().zip(delta.iter()) {
        row.scaled_add(*dv, u);
    }
}

fn tree_grads_mut(grads: &mut ParameterStore, rule: RuleKind) -> &mut TreeParams {
    let idx = RuleKind::ALL.iter().position(|k| *k == rule).unwrap();
    &mut grads.tree[idx]
}

fn chain_grads_mut(grads: &mut ParameterStore, dir: ChainDir) -> &mut ChainParams {
    match dir {
        ChainDir::Forward => &mut grads.fwd,
        ChainDir::Backward => &mut grads.bwd,
    }
}

/// Chain states for every token of a sentence, both directions.
pub struct EncodedSentence {
    pub fwd: Vec<StateId>,
    pub bwd: Vec<StateId>,
}

impl EncodedSentence {
    /// Latent state ids a leaf at `token` plugs into its recursive unit:
    /// the forward-chain state on the left slot, the backward-chain state on
    /// the right slot.
    pub fn leaf_state(&self, token: usize) -> Result<(StateId, StateId)> {
        if token >= self.fwd.len() {
            return Err(Error::Internal(format!(
                "leaf token {token} out of range for a {}-token encoding",
                self.fwd.len()
            )));
        }
        Ok((self.fwd[token], self.bwd[token]))
    }
}

/// Runs both chain directions over the sentence, recording every step in the
/// graph. With dropout enabled, one mask per token is sampled up front and
/// shared by the two chains, so scores stay coherent for the whole search.
pub fn encode_sentence(
    graph: &mut ComputationGraph,
    params: &ParameterStore,
    words: &[String],
    dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> EncodedSentence {
    let n = words.len();
    let ids: Vec<usize> = words.iter().map(|w| params.word_id(w)).collect();
    let masks: Vec<Option<Array1<f64>>> = match dropout {
        Some((rng, p)) if p > 0.0 => {
            let keep = 1.0 - p;
            (0..n)
                .map(|_| {
                    Some(Array1::from_shape_fn(params.dims.word_dim, |_| {
                        if rng.gen_bool(p) {
                            0.0
                        } else {
                            1.0 / keep
                        }
                    }))
                })
                .collect()
        }
        _ => vec![None; n],
    };
    let mut fwd = Vec::with_capacity(n);
    let mut prev = graph.fwd_boundary;
    for t in 0..n {
        prev = graph.chain_step(params, ChainDir::Forward, prev, ids[t], masks[t].as_ref());
        fwd.push(prev);
    }
    let mut bwd = vec![0; n];
    let mut prev = graph.bwd_boundary;
    for t in (0..n).rev() {
        prev = graph.chain_step(params, ChainDir::Backward, prev, ids[t], masks[t].as_ref());
        bwd[t] = prev;
    }
    EncodedSentence { fwd, bwd }
}

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::RuleKind;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Vector dimensions of the model. Hidden and cell states share one size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub word_dim: usize,
    pub category_dim: usize,
    pub hidden_dim: usize,
}

impl Default for ModelDims {
    fn default() -> ModelDims {
        ModelDims {
            word_dim: 50,
            category_dim: 16,
            hidden_dim: 64,
        }
    }
}

/// String-to-index mapping with index 0 reserved for the unknown symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

pub const UNK: &str = "<unk>";

impl Vocab {
    /// Builds a vocabulary from an iterator of symbols; duplicates collapse
    /// and entries are sorted so construction order does not matter.
    pub fn build<I: IntoIterator<Item = String>>(symbols: I) -> Vocab {
        let mut uniq: Vec<String> = symbols
            .into_iter()
            .filter(|s| s != UNK)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut names = vec![UNK.to_string()];
        names.append(&mut uniq);
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Vocab { names, index }
    }

    pub fn from_names(names: Vec<String>) -> Result<Vocab> {
        if names.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Config(format!(
                "vocabulary must start with the {UNK} entry"
            )));
        }
        let index: BTreeMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        if index.len() != names.len() {
            return Err(Error::Config("vocabulary contains duplicates".into()));
        }
        Ok(Vocab { names, index })
    }

    pub fn id(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Weights of one linear-chain direction, boundary state included.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub w_i: Array2<f64>,
    pub b_i: Array1<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
    pub w_c: Array2<f64>,
    pub b_c: Array1<f64>,
    pub c0: Array1<f64>,
    pub h0: Array1<f64>,
}

/// Weights of the recursive unit for one rule kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub w_i: Array2<f64>,
    pub b_i: Array1<f64>,
    pub w_f: Array2<f64>,
    pub b_f: Array1<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
    pub w_c: Array2<f64>,
    pub b_c: Array1<f64>,
}

/// Every trainable tensor of the global model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    pub dims: ModelDims,
    pub word_vocab: Vocab,
    pub cat_vocab: Vocab,
    /// One row per word vocabulary entry.
    pub word_emb: Array2<f64>,
    /// One row per category vocabulary entry, keyed by the full category string.
    pub cat_emb: Array2<f64>,
    pub fwd: ChainParams,
    pub bwd: ChainParams,
    /// Indexed by `RuleKind::ALL` order.
    pub tree: Vec<TreeParams>,
    /// Learned left-slot (cell, hidden) pair shared by all unary productions.
    pub unary_left_c: Array1<f64>,
    pub unary_left_h: Array1<f64>,
    /// Scoring vector applied to a node's hidden state.
    pub score_w: Array1<f64>,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

fn chain_init(rng: &mut ChaCha8Rng, d: usize, w: usize) -> ChainParams {
    ChainParams {
        w_i: xavier(rng, d, 2 * d + w),
        b_i: Array1::zeros(d),
        w_o: xavier(rng, d, 2 * d + w),
        b_o: Array1::zeros(d),
        w_c: xavier(rng, d, d + w),
        b_c: Array1::zeros(d),
        c0: Array1::zeros(d),
        h0: Array1::zeros(d),
    }
}

fn tree_init(rng: &mut ChaCha8Rng, d: usize, c: usize) -> TreeParams {
    TreeParams {
        w_i: xavier(rng, d, 4 * d + c),
        b_i: Array1::zeros(d),
        w_f: xavier(rng, d, 4 * d + c),
        b_f: Array1::zeros(d),
        w_o: xavier(rng, d, 3 * d + c),
        b_o: Array1::zeros(d),
        w_c: xavier(rng, d, 2 * d + c),
        b_c: Array1::zeros(d),
    }
}

impl ParameterStore {
    /// Random initialization: Xavier-uniform weight matrices, zero biases and
    /// boundary embeddings, uniform(-0.1, 0.1) word and category embeddings.
    pub fn init(dims: ModelDims, word_vocab: Vocab, cat_vocab: Vocab, seed: u64) -> ParameterStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = dims.hidden_dim;
        let word_emb =
            Array2::from_shape_fn((word_vocab.len(), dims.word_dim), |_| {
                rng.gen_range(-0.1..0.1)
            });
        let cat_emb = Array2::from_shape_fn((cat_vocab.len(), dims.category_dim), |_| {
            rng.gen_range(-0.1..0.1)
        });
        let fwd = chain_init(&mut rng, d, dims.word_dim);
        let bwd = chain_init(&mut rng, d, dims.word_dim);
        let tree = RuleKind::ALL
            .iter()
            .map(|_| tree_init(&mut rng, d, dims.category_dim))
            .collect();
        ParameterStore {
            dims,
            word_vocab,
            cat_vocab,
            word_emb,
            cat_emb,
            fwd,
            bwd,
            tree,
            unary_left_c: Array1::zeros(d),
            unary_left_h: Array1::zeros(d),
            score_w: xavier(&mut rng, 1, d).row(0).to_owned(),
        }
    }

    /// Same shapes and vocabularies, all tensors zero. Gradient and optimizer
    /// moment buffers are built this way.
    pub fn zeros_like(&self) -> ParameterStore {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.word_vocab.id(word)
    }

    pub fn cat_id(&self, category: &str) -> usize {
        self.cat_vocab.id(category)
    }

    pub fn tree_params(&self, rule: RuleKind) -> &TreeParams {
        let idx = RuleKind::ALL.iter().position(|k| *k == rule).unwrap();
        &self.tree[idx]
    }

    /// Named views of every tensor, in a fixed deterministic order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        out.push(("embeddings.word".into(), self.word_emb.as_slice().unwrap()));
        out.push((
            "embeddings.category".into(),
            self.cat_emb.as_slice().unwrap(),
        ));
        for (prefix, chain) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            out.push((format!("{prefix}.w_i"), chain.w_i.as_slice().unwrap()));
            out.push((format!("{prefix}.b_i"), chain.b_i.as_slice().unwrap()));
            out.push((format!("{prefix}.w_o"), chain.w_o.as_slice().unwrap()));
            out.push((format!("{prefix}.b_o"), chain.b_o.as_slice().unwrap()));
            out.push((format!("{prefix}.w_c"), chain.w_c.as_slice().unwrap()));
            out.push((format!("{prefix}.b_c"), chain.b_c.as_slice().unwrap()));
            out.push((format!("{prefix}.c0"), chain.c0.as_slice().unwrap()));
            out.push((format!("{prefix}.h0"), chain.h0.as_slice().unwrap()));
        }
        for (kind, tp) in RuleKind::ALL.iter().zip(&self.tree) {
            let p = format!("rule.{}", kind.name());
            out.push((format!("{p}.w_i"), tp.w_i.as_slice().unwrap()));
            out.push((format!("{p}.b_i"), tp.b_i.as_slice().unwrap()));
            out.push((format!("{p}.w_f"), tp.w_f.as_slice().unwrap()));
            out.push((format!("{p}.b_f"), tp.b_f.as_slice().unwrap()));
            out.push((format!("{p}.w_o"), tp.w_o.as_slice().unwrap()));
            out.push((format!("{p}.b_o"), tp.b_o.as_slice().unwrap()));
            out.push((format!("{p}.w_c"), tp.w_c.as_slice().unwrap()));
            out.push((format!("{p}.b_c"), tp.b_c.as_slice().unwrap()));
        }
        out.push(("unary_left.c".into(), self.unary_left_c.as_slice().unwrap()));
        out.push(("unary_left.h".into(), self.unary_left_h.as_slice().unwrap()));
        out.push(("score.w".into(), self.score_w.as_slice().unwrap()));
        out
    }

    /// Mutable variant of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        out.push((
            "embeddings.word".into(),
            self.word_emb.as_slice_mut().unwrap(),
        ));
        out.push((
            "embeddings.category".into(),
            self.cat_emb.as_slice_mut().unwrap(),
        ));
        for (prefix, chain) in [("fwd", &mut self.fwd), ("bwd", &mut self.bwd)] {
            out.push((format!("{prefix}.w_i"), chain.w_i.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.b_i"), chain.b_i.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.w_o"), chain.w_o.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.b_o"), chain.b_o.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.w_c"), chain.w_c.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.b_c"), chain.b_c.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.c0"), chain.c0.as_slice_mut().unwrap()));
            out.push((format!("{prefix}.h0"), chain.h0.as_slice_mut().unwrap()));
        }
        for (kind, tp) in RuleKind::ALL.iter().zip(&mut self.tree) {
            let p = format!("rule.{}", kind.name());
            out.push((format!("{p}.w_i"), tp.w_i.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_i"), tp.b_i.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_f"), tp.w_f.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_f"), tp.b_f.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_o"), tp.w_o.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_o"), tp.b_o.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_c"), tp.w_c.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_c"), tp.b_c.as_slice_mut().unwrap()));
        }
        out.push((
            "unary_left.c".into(),
            self.unary_left_c.as_slice_mut().unwrap(),
        ));
        out.push((
            "unary_left.h".into(),
            self.unary_left_h.as_slice_mut().unwrap(),
        ));
        out.push(("score.w".into(), self.score_w.as_slice_mut().unwrap()));
        out
    }

    /// Checks that every tensor is finite; training aborts an epoch on a
    /// violation rather than writing a poisoned model.
    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Reads one scalar by (block index, flat offset); block indices follow
    /// the order of [`tensors`](Self::tensors). Finite-difference probes and
    /// the gradient checks are built on these two accessors.
    pub fn tensor_value(&self, block: usize, k: usize) -> f64 {
        self.tensors()[block].1[k]
    }

    pub fn set_tensor_value(&mut self, block: usize, k: usize, value: f64) {
        let mut ts = self.tensors_mut();
        ts[block].1[k] = value;
    }

    pub fn to_json(&self) -> String {
        let mut tensors: BTreeMap<String, TensorData> = BTreeMap::new();
        tensors.insert("embeddings.word".into(), TensorData::from_mat(&self.word_emb));
        tensors.insert(
            "embeddings.category".into(),
            TensorData::from_mat(&self.cat_emb),
        );
        for (prefix, chain) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            tensors.insert(format!("{prefix}.w_i"), TensorData::from_mat(&chain.w_i));
            tensors.insert(format!("{prefix}.b_i"), TensorData::from_vec(&chain.b_i));
            tensors.insert(format!("{prefix}.w_o"), TensorData::from_mat(&chain.w_o));
            tensors.insert(format!("{prefix}.b_o"), TensorData::from_vec(&chain.b_o));
            tensors.insert(format!("{prefix}.w_c"), TensorData::from_mat(&chain.w_c));
            tensors.insert(format!("{prefix}.b_c"), TensorData::from_vec(&chain.b_c));
            tensors.insert(format!("{prefix}.c0"), TensorData::from_vec(&chain.c0));
            tensors.insert(format!("{prefix}.h0"), TensorData::from_vec(&chain.h0));
        }
        for (kind, tp) in RuleKind::ALL.iter().zip(&self.tree) {
            let p = format!("rule.{}", kind.name());
            tensors.insert(format!("{p}.w_i"), TensorData::from_mat(&tp.w_i));
            tensors.insert(format!("{p}.b_i"), TensorData::from_vec(&tp.b_i));
            tensors.insert(format!("{p}.w_f"), TensorData::from_mat(&tp.w_f));
            tensors.insert(format!("{p}.b_f"), TensorData::from_vec(&tp.b_f));
            tensors.insert(format!("{p}.w_o"), TensorData::from_mat(&tp.w_o));
            tensors.insert(format!("{p}.b_o"), TensorData::from_vec(&tp.b_o));
            tensors.insert(format!("{p}.w_c"), TensorData::from_mat(&tp.w_c));
            tensors.insert(format!("{p}.b_c"), TensorData::from_vec(&tp.b_c));
        }
        tensors.insert("unary_left.c".into(), TensorData::from_vec(&self.unary_left_c));
        tensors.insert("unary_left.h".into(), TensorData::from_vec(&self.unary_left_h));
        tensors.insert("score.w".into(), TensorData::from_vec(&self.score_w));
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            dims: self.dims,
            word_vocab: self.word_vocab.names().to_vec(),
            category_vocab: self.cat_vocab.names().to_vec(),
            tensors,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<ParameterStore> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("unreadable model file: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {} (expected {})",
                file.format_version, MODEL_FORMAT_VERSION
            )));
        }
        let dims = file.dims;
        let d = dims.hidden_dim;
        let word_vocab = Vocab::from_names(file.word_vocab)?;
        let cat_vocab = Vocab::from_names(file.category_vocab)?;
        let get_mat = |name: &str, rows: usize, cols: usize| -> Result<Array2<f64>> {
            file.tensors
                .get(name)
                .ok_or_else(|| Error::Config(format!("model file is missing tensor {name}")))?
                .to_mat(name, rows, cols)
        };
        let get_vec = |name: &str, len: usize| -> Result<Array1<f64>> {
            file.tensors
                .get(name)
                .ok_or_else(|| Error::Config(format!("model file is missing tensor {name}")))?
                .to_vec(name, len)
        };
        let load_chain = |prefix: &str| -> Result<ChainParams> {
            Ok(ChainParams {
                w_i: get_mat(&format!("{prefix}.w_i"), d, 2 * d + dims.word_dim)?,
                b_i: get_vec(&format!("{prefix}.b_i"), d)?,
                w_o: get_mat(&format!("{prefix}.w_o"), d, 2 * d + dims.word_dim)?,
                b_o: get_vec(&format!("{prefix}.b_o"), d)?,
                w_c: get_mat(&format!("{prefix}.w_c"), d, d + dims.word_dim)?,
                b_c: get_vec(&format!("{prefix}.b_c"), d)?,
                c0: get_vec(&format!("{prefix}.c0"), d)?,
                h0: get_vec(&format!("{prefix}.h0"), d)?,
            })
        };
        let mut tree = Vec::new();
        for kind in RuleKind::ALL {
            let p = format!("rule.{}", kind.name());
            tree.push(TreeParams {
                w_i: get_mat(&format!("{p}.w_i"), d, 4 * d + dims.category_dim)?,
                b_i: get_vec(&format!("{p}.b_i"), d)?,
                w_f: get_mat(&format!("{p}.w_f"), d, 4 * d + dims.category_dim)?,
                b_f: get_vec(&format!("{p}.b_f"), d)?,
                w_o: get_mat(&format!("{p}.w_o"), d, 3 * d + dims.category_dim)?,
                b_o: get_vec(&format!("{p}.b_o"), d)?,
                w_c: get_mat(&format!("{p}.w_c"), d, 2 * d + dims.category_dim)?,
                b_c: get_vec(&format!("{p}.b_c"), d)?,
            });
        }
        let store = ParameterStore {
            word_emb: get_mat("embeddings.word", word_vocab.len(), dims.word_dim)?,
            cat_emb: get_mat("embeddings.category", cat_vocab.len(), dims.category_dim)?,
            fwd: load_chain("fwd")?,
            bwd: load_chain("bwd")?,
            tree,
            unary_left_c: get_vec("unary_left.c", d)?,
            unary_left_h: get_vec("unary_left.h", d)?,
            score_w: get_vec("score.w", d)?,
            dims,
            word_vocab,
            cat_vocab,
        };
        if !store.all_finite() {
            return Err(Error::Config("model file contains non-finite values".into()));
        }
        Ok(store)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    dims: ModelDims,
    word_vocab: Vec<String>,
    category_vocab: Vec<String>,
    tensors: BTreeMap<String, TensorData>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TensorData {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl TensorData {
    fn from_mat(m: &Array2<f64>) -> TensorData {
        TensorData::Matrix(m.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    fn from_vec(v: &Array1<f64>) -> TensorData {
        TensorData::Vector(v.to_vec())
    }

    fn to_mat(&self, name: &str, rows: usize, cols: usize) -> Result<Array2<f64>> {
        match self {
            TensorData::Matrix(data) => {
                if data.len() != rows || data.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config(format!(
                        "tensor {name} has the wrong shape (expected {rows}x{cols})"
                    )));
                }
                let flat: Vec<f64> = data.iter().flatten().copied().collect();
                Ok(Array2::from_shape_vec((rows, cols), flat).unwrap())
            }
            TensorData::Vector(_) => Err(Error::Config(format!(
                "tensor {name} should be a matrix"
            ))),
        }
    }

    fn to_vec(&self, name: &str, len: usize) -> Result<Array1<f64>> {
        match self {
            TensorData::Vector(data) => {
                if data.len() != len {
                    return Err(Error::Config(format!(
                        "tensor {name} has the wrong length (expected {len})"
                    )));
                }
                Ok(Array1::from_vec(data.clone()))
            }
            TensorData::Matrix(_) => Err(Error::Config(format!(
                "tensor {name} should be a vector"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_store() -> ParameterStore {
        let dims = ModelDims {
            word_dim: 3,
            category_dim: 2,
            hidden_dim: 4,
        };
        let words = Vocab::build(["alba".to_string(), "vex".to_string()]);
        let cats = Vocab::build(["NP".to_string(), "S".to_string()]);
        ParameterStore::init(dims, words, cats, 42)
    }

    #[test]
    fn vocab_reserves_unknown() {
        let v = Vocab::build(["b".to_string(), "a".to_string(), "b".to_string()]);
        assert_eq!(v.names(), &[UNK, "a", "b"]);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("zzz"), 0);
    }

    #[test]
    fn init_is_deterministic_and_finite() {
        let a = tiny_store();
        let b = tiny_store();
        assert_eq!(a, b);
        assert!(a.all_finite());
        assert!(a.fwd.b_i.iter().all(|x| *x == 0.0));
        assert!(a.unary_left_c.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn serialization_round_trip_is_bit_stable() {
        let store = tiny_store();
        let json = store.to_json();
        let loaded = ParameterStore::from_json(&json).unwrap();
        for ((n1, t1), (n2, t2)) in store.tensors().iter().zip(loaded.tensors().iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.len(), t2.len());
            for (a, b) in t1.iter().zip(t2.iter()) {
                assert_eq!(a.to_bits(), b.to_bits(), "tensor {n1} drifted");
            }
        }
        assert_eq!(json, loaded.to_json());
    }

    #[test]
    fn load_rejects_wrong_dims() {
        let store = tiny_store();
        let json = store.to_json();
        let tampered = json.replace("\"hidden_dim\": 4", "\"hidden_dim\": 5");
        assert!(matches!(
            ParameterStore::from_json(&tampered),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn load_reports_missing_rule_block() {
        let store = tiny_store();
        let mut value: serde_json::Value = serde_json::from_str(&store.to_json()).unwrap();
        value
            .get_mut("tensors")
            .unwrap()
            .as_object_mut()
            .unwrap()
            .remove("rule.FORWARD_COMPOSE.w_i");
        let err = ParameterStore::from_json(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("rule.FORWARD_COMPOSE.w_i"));
    }

    #[test]
    fn zeros_like_preserves_shapes() {
        let store = tiny_store();
        let z = store.zeros_like();
        for ((n1, t1), (_, t2)) in store.tensors().iter().zip(z.tensors().iter()) {
            assert_eq!(t1.len(), t2.len(), "{n1}");
            assert!(t2.iter().all(|x| *x == 0.0));
        }
    }
}

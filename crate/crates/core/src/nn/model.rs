//! The model's parameter catalog: vocabulary, dimensions, and every named
//! tensor the encoder, decoder, attention, and scoring heads read.
//!
//! All tensors are registered in one fixed order at construction, so two
//! models built from the same grammar, vocabulary, dimensions, and seed are
//! value-identical, and checkpoints written from the store round-trip
//! byte-exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::params::{ParamId, ParameterStore};
use crate::ast::Action;
use crate::grammar::{Grammar, NodeKind};
use crate::rng::DetRng;

/// Reserved vocabulary index for out-of-vocabulary tokens.
pub const UNK: usize = 0;

/// Question-token vocabulary.  Index 0 is the `<unk>` token; the rest keep
/// first-appearance order, so a vocabulary built from a corpus is
/// deterministic in the corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from an iterator of tokens, deduplicating while
    /// keeping first-appearance order.
    pub fn build<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocab { tokens: Vec::new(), index: BTreeMap::new() };
        v.push("<unk>");
        for t in tokens {
            v.push(t.as_ref());
        }
        v
    }

    fn push(&mut self, tok: &str) {
        if !self.index.contains_key(tok) {
            self.index.insert(String::from(tok), self.tokens.len());
            self.tokens.push(String::from(tok));
        }
    }

    /// Index of a token, or [`UNK`] when unknown.
    pub fn id(&self, tok: &str) -> usize {
        self.index.get(tok).copied().unwrap_or(UNK)
    }

    /// True when the token is present (not mapped to `<unk>`).
    pub fn contains(&self, tok: &str) -> bool {
        self.index.contains_key(tok)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in index order (for serialization).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Embedding and hidden sizes.  The decoder input width is the sum
/// `action + node + kind + 2·enc_hidden + dec_hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Question-token and schema-item embedding size.
    pub word: usize,
    /// Previous-action embedding size.
    pub action: usize,
    /// Frontier-node embedding size.
    pub node: usize,
    /// Frontier-node-kind embedding size.
    pub kind: usize,
    /// Encoder LSTM hidden size per direction.
    pub enc_hidden: usize,
    /// Decoder LSTM hidden size.
    pub dec_hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims { word: 32, action: 32, node: 32, kind: 16, enc_hidden: 64, dec_hidden: 64 }
    }
}

impl Dims {
    /// Width of one encoded question token (both LSTM directions).
    pub fn enc_out(&self) -> usize {
        2 * self.enc_hidden
    }

    /// Width of the decoder LSTM input vector.
    pub fn dec_input(&self) -> usize {
        self.action + self.node + self.kind + self.enc_out() + self.dec_hidden
    }

    /// Width of the `[h; z]` readout the scoring heads consume.
    pub fn hz(&self) -> usize {
        self.dec_hidden + self.enc_out()
    }
}

/// Handles to every named tensor of the model.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Question-token embeddings, `[vocab, word]`.
    pub enc_word: ParamId,
    /// Forward encoder LSTM.
    pub enc_fwd_wx: ParamId,
    pub enc_fwd_wh: ParamId,
    pub enc_fwd_b: ParamId,
    /// Backward encoder LSTM.
    pub enc_bwd_wx: ParamId,
    pub enc_bwd_wh: ParamId,
    pub enc_bwd_b: ParamId,
    /// Schema-item kind embedding, rows = {column, table}.
    pub enc_item_kind: ParamId,
    /// Schema-item linking-feature embedding, rows = {unlinked, linked}.
    pub enc_item_link: ParamId,
    /// Previous-action embeddings, `[rule_count + 4, action]`.
    pub dec_action: ParamId,
    /// Frontier-node-type embeddings, `[node_types, node]`.
    pub dec_node: ParamId,
    /// Frontier-node-kind embeddings, `[4, kind]`.
    pub dec_kind: ParamId,
    /// Decoder LSTM.
    pub dec_wx: ParamId,
    pub dec_wh: ParamId,
    pub dec_b: ParamId,
    /// Attention bilinear map, `[enc_out, dec_hidden]`.
    pub dec_attn: ParamId,
    /// Learned initial decoder state.
    pub dec_c0: ParamId,
    pub dec_h0: ParamId,
    /// Rule scoring head: affine over `[h; z]` restricted to candidates.
    pub head_rule_w: ParamId,
    pub head_rule_b: ParamId,
    /// Column / table / value bilinear heads over `[h; z]`.
    pub head_col: ParamId,
    pub head_tab: ParamId,
    pub head_val: ParamId,
}

/// Row indices in the schema-item kind embedding.
pub const ITEM_KIND_COLUMN: usize = 0;
pub const ITEM_KIND_TABLE: usize = 1;

/// A model's architecture: dimensions, vocabulary, and tensor handles.
///
/// The parameter *values* live in a separate [`ParameterStore`], returned
/// alongside the model by [`Model::new`].  Keeping them apart lets training
/// and finite-difference probes mutate the store while the model metadata
/// stays immutably borrowed.
pub struct Model {
    pub dims: Dims,
    pub vocab: Vocab,
    pub p: ModelParams,
    /// Fingerprint of the grammar the model was built for; checkpoints
    /// refuse to load into a model for a different grammar.
    pub grammar_fingerprint: u64,
    rule_count: usize,
}

impl Model {
    /// Builds a model for a grammar and vocabulary together with a fresh
    /// store, all weights uniform in `[-0.1, 0.1)` from the given seed.
    pub fn new(g: &Grammar, vocab: Vocab, dims: Dims, seed: u64) -> (Self, ParameterStore) {
        assert!(vocab.len() > 1, "vocabulary must contain at least one real token");
        let mut rng = DetRng::new(seed);
        let mut s = ParameterStore::new();
        let rule_count = g.rule_count();
        let node_types = g.node_types().len();
        let eh4 = 4 * dims.enc_hidden;
        let dh4 = 4 * dims.dec_hidden;
        let p = ModelParams {
            enc_word: s.add_uniform("enc.word", &[vocab.len(), dims.word], &mut rng),
            enc_fwd_wx: s.add_uniform("enc.fwd.wx", &[eh4, dims.word], &mut rng),
            enc_fwd_wh: s.add_uniform("enc.fwd.wh", &[eh4, dims.enc_hidden], &mut rng),
            enc_fwd_b: s.add_uniform("enc.fwd.b", &[eh4], &mut rng),
            enc_bwd_wx: s.add_uniform("enc.bwd.wx", &[eh4, dims.word], &mut rng),
            enc_bwd_wh: s.add_uniform("enc.bwd.wh", &[eh4, dims.enc_hidden], &mut rng),
            enc_bwd_b: s.add_uniform("enc.bwd.b", &[eh4], &mut rng),
            enc_item_kind: s.add_uniform("enc.item_kind", &[2, dims.word], &mut rng),
            enc_item_link: s.add_uniform("enc.item_link", &[2, dims.word], &mut rng),
            dec_action: s.add_uniform("dec.action", &[rule_count + 4, dims.action], &mut rng),
            dec_node: s.add_uniform("dec.node", &[node_types, dims.node], &mut rng),
            dec_kind: s.add_uniform("dec.kind", &[NodeKind::COUNT, dims.kind], &mut rng),
            dec_wx: s.add_uniform("dec.wx", &[dh4, dims.dec_input()], &mut rng),
            dec_wh: s.add_uniform("dec.wh", &[dh4, dims.dec_hidden], &mut rng),
            dec_b: s.add_uniform("dec.b", &[dh4], &mut rng),
            dec_attn: s.add_uniform("dec.attn", &[dims.enc_out(), dims.dec_hidden], &mut rng),
            dec_c0: s.add_uniform("dec.c0", &[dims.dec_hidden], &mut rng),
            dec_h0: s.add_uniform("dec.h0", &[dims.dec_hidden], &mut rng),
            head_rule_w: s.add_uniform("head.rule.w", &[rule_count, dims.hz()], &mut rng),
            head_rule_b: s.add_uniform("head.rule.b", &[rule_count], &mut rng),
            head_col: s.add_uniform("head.col", &[dims.word, dims.hz()], &mut rng),
            head_tab: s.add_uniform("head.tab", &[dims.word, dims.hz()], &mut rng),
            head_val: s.add_uniform("head.val", &[dims.enc_out(), dims.hz()], &mut rng),
        };
        (Model { dims, vocab, p, grammar_fingerprint: g.fingerprint(), rule_count }, s)
    }

    /// Rules in the grammar this model was sized for.
    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    /// Embedding row for a previous action.  Rules map to their own rows;
    /// the three selection actions share one row per action kind (the
    /// selected item itself is not part of the feedback embedding).
    pub fn action_row(&self, a: Action) -> usize {
        match a {
            Action::ApplyRule(r) => r.0,
            Action::SelectColumn(_) => self.rule_count,
            Action::SelectTable(_) => self.rule_count + 1,
            Action::SelectValue(_) => self.rule_count + 2,
        }
    }

    /// Embedding row of the start-of-decoding marker used when there is no
    /// previous action.
    pub fn start_row(&self) -> usize {
        self.rule_count + 3
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{self, RuleId};
    use crate::schema::ColumnId;

    #[test]
    fn vocab_dedups_and_keeps_order() {
        let v = Vocab::build(["how", "many", "cars", "many"]);
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(0), "<unk>");
        assert_eq!(v.id("how"), 1);
        assert_eq!(v.id("cars"), 3);
        assert_eq!(v.id("planes"), UNK);
        assert!(!v.contains("planes"));
        assert!(v.contains("many"));
    }

    #[test]
    fn dims_compose() {
        let d = Dims::default();
        assert_eq!(d.enc_out(), 128);
        assert_eq!(d.dec_input(), 32 + 32 + 16 + 128 + 64);
        assert_eq!(d.dec_input(), 272);
        assert_eq!(d.hz(), 192);
    }

    #[test]
    fn model_catalog_shapes() {
        let g = grammar::load_default();
        let v = Vocab::build(["which", "model"]);
        let (m, d) = Model::new(&g, v, Dims::default(), 1);
        assert_eq!(d.tensor(m.p.enc_word).dims, &[3, 32]);
        assert_eq!(d.tensor(m.p.dec_wx).dims, &[256, 272]);
        assert_eq!(d.tensor(m.p.dec_action).dims, &[g.rule_count() + 4, 32]);
        assert_eq!(d.tensor(m.p.dec_node).dims, &[g.node_types().len(), 32]);
        assert_eq!(d.tensor(m.p.dec_kind).dims, &[4, 16]);
        assert_eq!(d.tensor(m.p.dec_attn).dims, &[128, 64]);
        assert_eq!(d.tensor(m.p.head_rule_w).dims, &[g.rule_count(), 192]);
        assert_eq!(m.grammar_fingerprint, g.fingerprint());
    }

    #[test]
    fn same_seed_same_weights() {
        let g = grammar::load_default();
        let build = |seed| {
            let (m, store) = Model::new(&g, Vocab::build(["a"]), Dims::default(), seed);
            store.data(m.p.dec_wx).to_vec()
        };
        assert_eq!(build(9), build(9));
        assert_ne!(build(9), build(10));
    }

    #[test]
    fn action_rows_are_distinct() {
        let g = grammar::load_default();
        let (m, store) = Model::new(&g, Vocab::build(["a"]), Dims::default(), 2);
        let r = g.rule_count();
        assert_eq!(m.action_row(Action::ApplyRule(RuleId(5))), 5);
        assert_eq!(m.action_row(Action::SelectColumn(ColumnId(3))), r);
        assert_eq!(m.action_row(Action::SelectValue(7)), r + 2);
        assert_eq!(m.start_row(), r + 3);
        assert_eq!(store.tensor(m.p.dec_action).rows(), r + 4);
    }
}

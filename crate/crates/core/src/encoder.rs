//! Question and schema encoding.
//!
//! Question tokens are embedded and run through a single-layer BiLSTM; the
//! encoding of token `i` concatenates the forward state after reading
//! tokens `0..=i` with the backward state after reading tokens `i..`.
//! Schema items (every column including `*`, and every table) are encoded
//! order-independently as the mean of their name-word embeddings plus a
//! kind embedding (column vs table) plus a linking-feature embedding that
//! records whether the item's name matches the question under the same
//! string matcher the alignment module uses.
//!
//! There is exactly one implementation, built on the autodiff tape.
//! Training keeps the returned nodes on its tape; inference uses
//! [`encode_values`], which runs a throwaway tape and copies the values
//! out.  Both paths therefore produce identical encodings by construction.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::align::link_ngram;
use crate::nn::model::{Model, ITEM_KIND_COLUMN, ITEM_KIND_TABLE};
use crate::nn::tape::{NodeRef, Tape};
use crate::schema::{mention_words, Schema};

/// Encoder results as tape nodes (training path).
pub struct EncoderOutput {
    /// One node per question token, width `dims.enc_out()`.
    pub tokens: Vec<NodeRef>,
    /// One node per schema column (index = `ColumnId`), width `dims.word`.
    pub columns: Vec<NodeRef>,
    /// One node per schema table (index = `TableId`), width `dims.word`.
    pub tables: Vec<NodeRef>,
}

/// Encoder results as plain vectors (inference path).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderValues {
    pub tokens: Vec<Vec<f64>>,
    pub columns: Vec<Vec<f64>>,
    pub tables: Vec<Vec<f64>>,
}

/// Encodes a question and schema onto the given tape.
///
/// `question` must be non-empty (a query without a question has nothing to
/// attend to or copy values from).
pub fn encode(
    tape: &mut Tape<'_>,
    model: &Model,
    question: &[String],
    schema: &Schema,
) -> EncoderOutput {
    assert!(!question.is_empty(), "cannot encode an empty question");
    let d = model.dims;
    let p = &model.p;

    // Token embeddings.
    let embeds: Vec<NodeRef> = question
        .iter()
        .map(|tok| tape.param_row(p.enc_word, model.vocab.id(tok)))
        .collect();

    // Forward pass.
    let mut h = tape.input(vec![0.0; d.enc_hidden]);
    let mut c = tape.input(vec![0.0; d.enc_hidden]);
    let mut fwd = Vec::with_capacity(question.len());
    for &x in &embeds {
        let (c2, h2) = tape.lstm(p.enc_fwd_wx, p.enc_fwd_wh, p.enc_fwd_b, x, h, c);
        c = c2;
        h = h2;
        fwd.push(h);
    }

    // Backward pass.
    let mut h = tape.input(vec![0.0; d.enc_hidden]);
    let mut c = tape.input(vec![0.0; d.enc_hidden]);
    let mut bwd = vec![NodeRef(0); question.len()];
    for i in (0..question.len()).rev() {
        let (c2, h2) = tape.lstm(p.enc_bwd_wx, p.enc_bwd_wh, p.enc_bwd_b, embeds[i], h, c);
        c = c2;
        h = h2;
        bwd[i] = h;
    }

    let tokens: Vec<NodeRef> =
        (0..question.len()).map(|i| tape.concat(&[fwd[i], bwd[i]])).collect();

    let columns: Vec<NodeRef> = schema
        .columns()
        .iter()
        .map(|col| encode_item(tape, model, question, &col.name, ITEM_KIND_COLUMN))
        .collect();
    let tables: Vec<NodeRef> = schema
        .tables()
        .iter()
        .map(|tbl| encode_item(tape, model, question, &tbl.name, ITEM_KIND_TABLE))
        .collect();

    EncoderOutput { tokens, columns, tables }
}

/// One schema item: mean of name-word embeddings + kind + linking feature.
/// Depends only on the item itself and the question, never on other items,
/// so schema encodings are equivariant under column/table reordering.
fn encode_item(
    tape: &mut Tape<'_>,
    model: &Model,
    question: &[String],
    name: &str,
    kind_row: usize,
) -> NodeRef {
    let p = &model.p;
    let words = mention_words(name);
    debug_assert!(!words.is_empty(), "schema item {name:?} has no name words");
    let mut acc = tape.param_row(p.enc_word, model.vocab.id(words[0]));
    for w in &words[1..] {
        let e = tape.param_row(p.enc_word, model.vocab.id(w));
        acc = tape.add(acc, e);
    }
    let mean = tape.scale(acc, 1.0 / words.len() as f64);
    let kind = tape.param_row(p.enc_item_kind, kind_row);
    let linked = link_ngram(question, &words).is_some();
    let link = tape.param_row(p.enc_item_link, usize::from(linked));
    let with_kind = tape.add(mean, kind);
    tape.add(with_kind, link)
}

/// Runs the encoder on a private tape and extracts plain values.
pub fn encode_values(
    model: &Model,
    store: &crate::nn::params::ParameterStore,
    question: &[String],
    schema: &Schema,
) -> EncoderValues {
    let mut tape = Tape::new(store);
    let out = encode(&mut tape, model, question, schema);
    let grab = |ns: &[NodeRef]| ns.iter().map(|&n| tape.value(n).to_vec()).collect();
    EncoderValues {
        tokens: grab(&out.tokens),
        columns: grab(&out.columns),
        tables: grab(&out.tables),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar;
    use crate::nn::gradcheck::grad_check;
    use crate::nn::model::{Dims, Vocab};
    use crate::nn::params::ParameterStore;
    use crate::schema::ColumnId;

    fn toks(s: &str) -> Vec<String> {
        crate::align::tokenize_question(s)
    }

    fn cars_schema() -> Schema {
        let mut s = Schema::new("cars_db");
        let cars = s.add_table("cars");
        s.add_column(cars, "model");
        s.add_column(cars, "year");
        s.add_column(cars, "max_speed");
        s
    }

    fn demo_model(seed: u64) -> (Model, ParameterStore) {
        let g = grammar::load_default();
        let vocab = Vocab::build(
            ["which", "model", "year", "max", "speed", "cars", "fastest", "list"].iter(),
        );
        Model::new(&g, vocab, Dims::default(), seed)
    }

    #[test]
    fn output_shapes_match_question_and_schema() {
        let (m, store) = demo_model(1);
        let s = cars_schema();
        let v = encode_values(&m, &store, &toks("which model is fastest"), &s);
        assert_eq!(v.tokens.len(), 4);
        assert!(v.tokens.iter().all(|t| t.len() == 128));
        assert_eq!(v.columns.len(), s.column_count()); // includes *
        assert!(v.columns.iter().all(|c| c.len() == 32));
        assert_eq!(v.tables.len(), 1);
        assert_eq!(v.tables[0].len(), 32);
    }

    #[test]
    fn column_encodings_are_order_equivariant() {
        let (m, store) = demo_model(2);
        let q = toks("which model");
        let mut a = Schema::new("db");
        let t = a.add_table("cars");
        let a_model = a.add_column(t, "model");
        let _a_year = a.add_column(t, "year");
        let mut b = Schema::new("db");
        let t = b.add_table("cars");
        let _b_year = b.add_column(t, "year");
        let b_model = b.add_column(t, "model");

        let va = encode_values(&m, &store, &q, &a);
        let vb = encode_values(&m, &store, &q, &b);
        assert_eq!(va.columns[a_model.0], vb.columns[b_model.0]);
        assert_ne!(va.columns[a_model.0], va.columns[2]);
    }

    #[test]
    fn token_encodings_are_direction_sensitive() {
        let (m, store) = demo_model(3);
        let s = cars_schema();
        let fwd = encode_values(&m, &store, &toks("which model year"), &s);
        let rev = encode_values(&m, &store, &toks("year model which"), &s);
        // The middle token has the same embedding in both questions but
        // different left/right contexts, so a BiLSTM must encode it
        // differently; a bag-of-words encoder would not.
        assert_ne!(fwd.tokens[1], rev.tokens[1]);
    }

    #[test]
    fn linking_feature_reacts_to_question_mentions() {
        let (m, store) = demo_model(4);
        let s = cars_schema();
        let year = ColumnId(2);
        assert_eq!(s.column(year).name, "year");
        let mentioned = encode_values(&m, &store, &toks("which year"), &s);
        let absent = encode_values(&m, &store, &toks("list everything"), &s);
        assert_ne!(mentioned.columns[year.0], absent.columns[year.0]);
        // A multi-word name links through any of its words.
        let speed_col = ColumnId(3);
        assert_eq!(s.column(speed_col).name, "max_speed");
        let partial = encode_values(&m, &store, &toks("top speed please"), &s);
        assert_ne!(partial.columns[speed_col.0], absent.columns[speed_col.0]);
    }

    #[test]
    fn unknown_tokens_share_the_unk_embedding() {
        let (m, store) = demo_model(5);
        let s = cars_schema();
        let a = encode_values(&m, &store, &toks("zzz model"), &s);
        let b = encode_values(&m, &store, &toks("qqq model"), &s);
        assert_eq!(a.tokens, b.tokens);
    }

    #[test]
    fn encoding_is_deterministic_bitwise() {
        let (m, store) = demo_model(6);
        let s = cars_schema();
        let q = toks("which model is fastest");
        let a = encode_values(&m, &store, &q, &s);
        let b = encode_values(&m, &store, &q, &s);
        for (x, y) in a.tokens.iter().zip(&b.tokens) {
            for (u, v) in x.iter().zip(y) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let (m, mut store) = demo_model(7);
        let s = cars_schema();
        let q = toks("which model");
        let target_tok = alloc::vec![0.05; 128];
        let target_col = alloc::vec![-0.02; 32];
        let report = grad_check(&mut store, 1e-4, 6, 42, |tape| {
            let out = encode(tape, &m, &q, &s);
            let l1 = tape.sq_diff_const(out.tokens[1], target_tok.clone());
            let l2 = tape.sq_diff_const(out.columns[1], target_col.clone());
            tape.sum_scalars(&[l1, l2])
        });
        assert!(
            report.max_rel_err < 1e-4,
            "max {} at {}[{}]",
            report.max_rel_err,
            report.worst_param,
            report.worst_index
        );
        assert!(report.checked > 0);
    }
}

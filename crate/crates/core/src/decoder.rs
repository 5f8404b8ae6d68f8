//! Clause-level LSTM decoding: greedy inference and teacher forcing.
//!
//! # Step semantics
//!
//! At every step the decoder holds a recurrent state `(c, h)` and a focus
//! node supplied by the tree builder.  The step computes, in order:
//!
//! 1. attention over the encoded question tokens from the *incoming* hidden
//!    state `h`: `P_att(i) ∝ exp(mᵢ · (W·h))`, and the context
//!    `z = Σᵢ P_att(i)·mᵢ`;
//! 2. the input vector `[e_action; e_node; e_kind; z; h_parent]`, where
//!    `e_action` embeds the previous action (or the start marker),
//!    `e_node`/`e_kind` embed the focus node's type and kind, and
//!    `h_parent` is the hidden state of the step that expanded the focus
//!    node's father — for a clause-run root, the run's initial hidden state;
//! 3. one LSTM cell update producing `(c', h')`;
//! 4. action scores from `[h'; z]`, restricted to the legal candidates for
//!    the focus node (rules of its type, all columns, all tables, or all
//!    question tokens) — illegal actions are simply absent, which is the
//!    masking; ties in greedy selection break toward the lowest index.
//!
//! # Modes
//!
//! A query decomposes into clause runs (six top-level, plus five more for a
//! compound-operator body).  **Sequential** mode rolls the runs one after
//! another in splice order, each run inheriting the previous run's final
//! `(c, h)` and previous-action feedback; only the very first step sees the
//! start marker.  **Parallel** mode starts every run from the shared
//! learned `(c₀, h₀)` and the start marker, which removes all inter-run
//! data dependencies: the six top-level runs advance together as one
//! batched wave (body runs, if any, form a second wave).
//!
//! Batching never changes results.  The wave loop applies the same per-row
//! arithmetic as a single-row roll — the shared-kernel contract — so
//! decoding a clause inside a six-row wave is bitwise identical to decoding
//! it alone.
//!
//! Training uses [`teacher_force`], which replays an oracle trace on the
//! autodiff tape with the same step semantics and returns per-step loss and
//! attention nodes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::{self, Action, ActionTrace, Ast, TreeBuilder};
use crate::encoder::{EncoderOutput, EncoderValues};
use crate::grammar::{ClauseKind, Grammar, NodeKind, NodeTypeId};
use crate::nn::kernels::{self, LstmWeights};
use crate::nn::model::Model;
use crate::nn::params::ParameterStore;
use crate::nn::tape::{NodeRef, Tape};
use crate::schema::{ColumnId, Schema, TableId};

/// Hard per-run step budget; a clause that has not completed after this
/// many actions fails the decode.
pub const STEP_BUDGET: usize = 100;

/// Decoding order of the recurrent state across clause runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Runs chain: each inherits the previous run's final state.
    Sequential,
    /// Runs are independent: all start from the learned initial state.
    Parallel,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sequential => "sequential",
            Mode::Parallel => "parallel",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        match s {
            "sequential" => Some(Mode::Sequential),
            "parallel" => Some(Mode::Parallel),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Decoding failure.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    EmptyQuestion,
    /// A clause run hit the step budget before completing.
    Budget { clause: String, budget: usize },
    /// A selection step had nothing to select from.
    NoCandidates { what: &'static str },
    Tree(ast::AstError),
    Grammar(crate::grammar::GrammarError),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::EmptyQuestion => write!(f, "cannot decode against an empty question"),
            DecodeError::Budget { clause, budget } => {
                write!(f, "clause {clause} exceeded the step budget of {budget}")
            }
            DecodeError::NoCandidates { what } => {
                write!(f, "no candidates available for {what} selection")
            }
            DecodeError::Tree(e) => write!(f, "tree construction failed: {e}"),
            DecodeError::Grammar(e) => write!(f, "grammar lookup failed: {e}"),
        }
    }
}

impl core::error::Error for DecodeError {}

impl From<ast::AstError> for DecodeError {
    fn from(e: ast::AstError) -> Self {
        DecodeError::Tree(e)
    }
}

impl From<crate::grammar::GrammarError> for DecodeError {
    fn from(e: crate::grammar::GrammarError) -> Self {
        DecodeError::Grammar(e)
    }
}

/// Recurrent state entering a clause run.
#[derive(Debug, Clone, PartialEq)]
pub struct RollInit {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    /// Previous-action embedding row (the start marker at a fresh start).
    pub prev_row: usize,
}

/// The shared learned initial state with the start marker.
pub fn initial_state(model: &Model, store: &ParameterStore) -> RollInit {
    RollInit {
        c: store.data(model.p.dec_c0).to_vec(),
        h: store.data(model.p.dec_h0).to_vec(),
        prev_row: model.start_row(),
    }
}

/// One decoded clause run.
#[derive(Debug, Clone)]
pub struct ClauseRoll {
    /// Root node type of the run.
    pub root: NodeTypeId,
    pub actions: Vec<Action>,
    /// Attention distribution used at each step, in step order.
    pub p_att: Vec<Vec<f64>>,
    /// Nested clause roots this run exposed (a compound body), in
    /// left-to-right order; they need runs of their own.
    pub deferred: Vec<NodeTypeId>,
    /// State after the run's last step, for sequential chaining.
    pub final_state: RollInit,
}

impl ClauseRoll {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

/// Per-step record of a full query decode, in splice (trace) order.
#[derive(Debug, Clone)]
pub struct StepLog {
    /// Owning top-level clause (body steps report the compound clause).
    pub clause: ClauseKind,
    pub action: Action,
    pub p_att: Vec<f64>,
}

/// Step accounting of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStat {
    pub clause: ClauseKind,
    /// 0 for top-level runs, 1 for compound-body runs.
    pub depth: usize,
    pub steps: usize,
}

/// Step accounting of a full query decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeStats {
    pub runs: Vec<RunStat>,
    /// Total actions across all runs.
    pub total_steps: usize,
    /// Longest dependency chain of wave steps: in parallel mode the longest
    /// run per wave, summed over waves; in sequential mode the total.
    pub wall_steps: usize,
}

impl DecodeStats {
    /// The step-count ceiling on any parallel-over-sequential speedup:
    /// sequential work divided by the longest chain that parallel decoding
    /// cannot avoid.
    pub fn speedup_upper_bound(&self) -> f64 {
        if self.wall_steps == 0 {
            1.0
        } else {
            self.total_steps as f64 / self.wall_steps as f64
        }
    }
}

/// A fully decoded query.
pub struct Decoded {
    pub ast: Ast,
    pub steps: Vec<StepLog>,
    pub stats: DecodeStats,
}

// ---------------------------------------------------------------------------
// Raw (inference) path.
// ---------------------------------------------------------------------------

/// Everything a greedy decode reads: grammar, weights, encoded question,
/// and the schema/question the tree builder grounds selections in.
#[derive(Clone, Copy)]
pub struct DecodeCtx<'a> {
    pub g: &'a Grammar,
    pub model: &'a Model,
    pub store: &'a ParameterStore,
    pub enc: &'a EncoderValues,
    pub schema: &'a Schema,
    pub question: &'a [String],
}

struct RowState<'a> {
    root: NodeTypeId,
    builder: TreeBuilder<'a>,
    c: Vec<f64>,
    h: Vec<f64>,
    prev_row: usize,
    /// Hidden state entering the run (the run root's parent feed).
    entry_h: Vec<f64>,
    /// `h` after each local step, for parent feeds within the run.
    h_log: Vec<Vec<f64>>,
    actions: Vec<Action>,
    p_att: Vec<Vec<f64>>,
}

/// Everything computed for one live row before the batched LSTM update.
struct PendingStep {
    row: usize,
    p_att: Vec<f64>,
    z: Vec<f64>,
    x: Vec<f64>,
    focus_kind: NodeKind,
    focus_ty: NodeTypeId,
}

/// Decodes a set of clause runs as one batched wave.
///
/// Every row advances by one action per iteration until it completes; a row
/// that reaches `budget` steps first aborts the decode.  Per-row arithmetic
/// is independent of which other rows are present, so a single-run wave is
/// the unbatched case and larger waves reproduce it bitwise.
pub fn decode_wave<'a>(
    ctx: &DecodeCtx<'a>,
    inits: Vec<(NodeTypeId, RollInit)>,
    budget: usize,
) -> Result<Vec<ClauseRoll>, DecodeError> {
    let DecodeCtx { g, model, store, enc, schema, question } = *ctx;
    let d = model.dims;
    let p = &model.p;
    let attn = store.tensor(p.dec_attn);
    let lstm = LstmWeights {
        wx: store.data(p.dec_wx),
        wh: store.data(p.dec_wh),
        b: store.data(p.dec_b),
        input_dim: d.dec_input(),
        hidden: d.dec_hidden,
    };

    let mut rows: Vec<RowState<'a>> = Vec::with_capacity(inits.len());
    for (root, init) in inits {
        rows.push(RowState {
            root,
            builder: TreeBuilder::for_subtree(g, schema, question, root),
            entry_h: init.h.clone(),
            c: init.c,
            h: init.h,
            prev_row: init.prev_row,
            h_log: Vec::new(),
            actions: Vec::new(),
            p_att: Vec::new(),
        });
    }

    loop {
        let live: Vec<usize> =
            (0..rows.len()).filter(|&k| !rows[k].builder.is_complete()).collect();
        if live.is_empty() {
            break;
        }
        for &k in &live {
            if rows[k].actions.len() >= budget {
                return Err(DecodeError::Budget {
                    clause: g.node_type(rows[k].root).name.clone(),
                    budget,
                });
            }
        }

        // Phase 1: per-row attention, context, and input assembly.
        let mut pending: Vec<PendingStep> = Vec::with_capacity(live.len());
        for &k in &live {
            let row = &rows[k];
            let mut u = vec![0.0; d.enc_out()];
            kernels::matvec_into(&mut u, &attn.data, d.enc_out(), d.dec_hidden, &row.h);
            let scores: Vec<f64> =
                enc.tokens.iter().map(|m| kernels::dot(m, &u)).collect();
            let mut p_att = vec![0.0; scores.len()];
            kernels::softmax_into(&mut p_att, &scores);
            let mut z = vec![0.0; d.enc_out()];
            for (i, m) in enc.tokens.iter().enumerate() {
                let w = p_att[i];
                for j in 0..d.enc_out() {
                    z[j] += w * m[j];
                }
            }

            let focus = row.builder.focus().expect("live row has a focus");
            let focus_ty = row.builder.node(focus).ty;
            let focus_kind = g.node_type(focus_ty).kind;
            let parent_h: &[f64] = match row.builder.parent_of(focus) {
                None => &row.entry_h,
                Some(f) => {
                    let born = row.builder.node(f).born_at.expect("father already expanded");
                    &row.h_log[born]
                }
            };

            let mut x = Vec::with_capacity(d.dec_input());
            x.extend_from_slice(store.row(p.dec_action, row.prev_row));
            x.extend_from_slice(store.row(p.dec_node, focus_ty.0));
            x.extend_from_slice(store.row(p.dec_kind, focus_kind.index()));
            x.extend_from_slice(&z);
            x.extend_from_slice(parent_h);
            debug_assert_eq!(x.len(), d.dec_input());

            pending.push(PendingStep { row: k, p_att, z, x, focus_kind, focus_ty });
        }

        // Phase 2: one batched LSTM update over the live rows.
        let mut c_new = vec![vec![0.0; d.dec_hidden]; pending.len()];
        let mut h_new = vec![vec![0.0; d.dec_hidden]; pending.len()];
        {
            let xs: Vec<&[f64]> = pending.iter().map(|s| s.x.as_slice()).collect();
            let hs: Vec<&[f64]> = pending.iter().map(|s| rows[s.row].h.as_slice()).collect();
            let cs: Vec<&[f64]> = pending.iter().map(|s| rows[s.row].c.as_slice()).collect();
            kernels::lstm_cell_batched(&lstm, &xs, &hs, &cs, &mut c_new, &mut h_new);
        }

        // Phase 3: score, pick greedily, and apply per row.
        for (i, step) in pending.into_iter().enumerate() {
            let h = &h_new[i];
            let mut hz = Vec::with_capacity(d.hz());
            hz.extend_from_slice(h);
            hz.extend_from_slice(&step.z);

            let action = match step.focus_kind {
                NodeKind::Nonterminal => {
                    let cands = g.rules_for(step.focus_ty).map_err(|_| {
                        DecodeError::NoCandidates { what: "rule" }
                    })?;
                    let rule_w = store.tensor(p.head_rule_w);
                    let rule_b = store.data(p.head_rule_b);
                    let logits: Vec<f64> = cands
                        .iter()
                        .map(|r| kernels::dot(rule_w.row(r.0), &hz) + rule_b[r.0])
                        .collect();
                    Action::ApplyRule(cands[kernels::argmax(&logits)])
                }
                NodeKind::ColumnSlot => {
                    if enc.columns.is_empty() {
                        return Err(DecodeError::NoCandidates { what: "column" });
                    }
                    let proj = head_proj(store.tensor(p.head_col), &hz);
                    let logits: Vec<f64> =
                        enc.columns.iter().map(|cv| kernels::dot(cv, &proj)).collect();
                    Action::SelectColumn(ColumnId(kernels::argmax(&logits)))
                }
                NodeKind::TableSlot => {
                    if enc.tables.is_empty() {
                        return Err(DecodeError::NoCandidates { what: "table" });
                    }
                    let proj = head_proj(store.tensor(p.head_tab), &hz);
                    let logits: Vec<f64> =
                        enc.tables.iter().map(|tv| kernels::dot(tv, &proj)).collect();
                    Action::SelectTable(TableId(kernels::argmax(&logits)))
                }
                NodeKind::ValueSlot => {
                    if enc.tokens.is_empty() {
                        return Err(DecodeError::NoCandidates { what: "value" });
                    }
                    let proj = head_proj(store.tensor(p.head_val), &hz);
                    let logits: Vec<f64> =
                        enc.tokens.iter().map(|mv| kernels::dot(mv, &proj)).collect();
                    Action::SelectValue(kernels::argmax(&logits))
                }
            };

            let row = &mut rows[step.row];
            row.builder.apply(action)?;
            row.c = core::mem::take(&mut c_new[i]);
            row.h = h_new[i].clone();
            row.h_log.push(row.h.clone());
            row.prev_row = model.action_row(action);
            row.actions.push(action);
            row.p_att.push(step.p_att);
        }
    }

    Ok(rows
        .into_iter()
        .map(|row| {
            let deferred =
                row.builder.deferred().iter().map(|id| row.builder.node(*id).ty).collect();
            ClauseRoll {
                root: row.root,
                actions: row.actions,
                p_att: row.p_att,
                deferred,
                final_state: RollInit { c: row.c, h: row.h, prev_row: row.prev_row },
            }
        })
        .collect())
}

fn head_proj(head: &crate::nn::params::Tensor, hz: &[f64]) -> Vec<f64> {
    let mut proj = vec![0.0; head.rows()];
    kernels::matvec_into(&mut proj, &head.data, head.rows(), head.cols(), hz);
    proj
}

/// Decodes one clause run on its own (a wave of one row).
pub fn decode_clause<'a>(
    ctx: &DecodeCtx<'a>,
    root: NodeTypeId,
    init: RollInit,
    budget: usize,
) -> Result<ClauseRoll, DecodeError> {
    let rolls = decode_wave(ctx, vec![(root, init)], budget)?;
    let [roll] = <[ClauseRoll; 1]>::try_from(rolls).expect("one init produces one roll");
    Ok(roll)
}

/// Greedily decodes a complete query for a question against a schema.
pub fn decode_query(
    g: &Grammar,
    model: &Model,
    store: &ParameterStore,
    schema: &Schema,
    question: &[String],
    mode: Mode,
) -> Result<Decoded, DecodeError> {
    if question.is_empty() {
        return Err(DecodeError::EmptyQuestion);
    }
    let enc = crate::encoder::encode_values(model, store, question, schema);
    decode_query_with(&DecodeCtx { g, model, store, enc: &enc, schema, question }, mode)
}

/// [`decode_query`] with a precomputed encoding (shared by benchmarks so
/// both modes pay the identical encoder cost).
pub fn decode_query_with(ctx: &DecodeCtx<'_>, mode: Mode) -> Result<Decoded, DecodeError> {
    decode_query_driven(ctx, mode, &mut |c, inits, budget| decode_wave(c, inits, budget))
}

/// A wave executor for [`decode_query_driven`]: receives one wave's
/// `(root, init)` rows plus the step budget and returns the per-row rolls in
/// input order, exactly as [`decode_wave`] would.
pub type WaveDriver<'d> = dyn FnMut(
        &DecodeCtx<'_>,
        Vec<(NodeTypeId, RollInit)>,
        usize,
    ) -> Result<Vec<ClauseRoll>, DecodeError>
    + 'd;

/// [`decode_query_with`] with parallel-mode waves delegated to `driver`.
/// Because per-row arithmetic is independent of how a wave is grouped, a
/// driver may fan rows out — e.g. one OS thread per clause, each running
/// [`decode_clause`] — and still produce bitwise-identical rolls. Sequential
/// mode never batches, so the driver is not consulted there.
pub fn decode_query_driven(
    ctx: &DecodeCtx<'_>,
    mode: Mode,
    driver: &mut WaveDriver<'_>,
) -> Result<Decoded, DecodeError> {
    let DecodeCtx { g, model, store, schema, question, .. } = *ctx;
    if question.is_empty() {
        return Err(DecodeError::EmptyQuestion);
    }
    // Runs accumulate in splice order: the six top-level clauses with any
    // body runs right after the compound clause, before FROM.
    let mut ordered: Vec<(ClauseKind, usize, ClauseRoll)> = Vec::new();
    let mut wall_steps = 0usize;

    match mode {
        Mode::Parallel => {
            let inits: Vec<(NodeTypeId, RollInit)> = ClauseKind::ALL
                .into_iter()
                .map(|k| (g.clause_root(k), initial_state(model, store)))
                .collect();
            let rolls = driver(ctx, inits, STEP_BUDGET)?;
            wall_steps += rolls.iter().map(ClauseRoll::steps).max().unwrap_or(0);
            let mut body: Vec<ClauseRoll> = Vec::new();
            let ieu = &rolls[ClauseKind::Ieu.index()];
            let deferred = ieu.deferred.clone();
            if !deferred.is_empty() {
                // Body runs inherit the compound clause's final state, the
                // way sequential runs inherit their predecessor's: the body
                // cannot start before the operator choice anyway, so the
                // dependency costs no extra wall steps.
                let inits: Vec<(NodeTypeId, RollInit)> = deferred
                    .into_iter()
                    .map(|ty| (ty, ieu.final_state.clone()))
                    .collect();
                body = driver(ctx, inits, STEP_BUDGET)?;
                wall_steps += body.iter().map(ClauseRoll::steps).max().unwrap_or(0);
            }
            for (kind, roll) in ClauseKind::ALL.into_iter().zip(rolls) {
                ordered.push((kind, 0, roll));
                if kind == ClauseKind::Ieu {
                    for b in body.drain(..) {
                        let bk = clause_kind_of_root(g, b.root);
                        ordered.push((bk, 1, b));
                    }
                }
            }
        }
        Mode::Sequential => {
            let mut state = initial_state(model, store);
            for kind in ClauseKind::ALL {
                let roll = decode_clause(ctx, g.clause_root(kind), state, STEP_BUDGET)?;
                state = roll.final_state.clone();
                let deferred = roll.deferred.clone();
                ordered.push((kind, 0, roll));
                if kind == ClauseKind::Ieu {
                    for ty in deferred {
                        let b = decode_clause(ctx, ty, state, STEP_BUDGET)?;
                        state = b.final_state.clone();
                        ordered.push((clause_kind_of_root(g, ty), 1, b));
                    }
                }
            }
            wall_steps = ordered.iter().map(|(_, _, r)| r.steps()).sum();
        }
    }

    let mut actions = Vec::new();
    let mut steps = Vec::new();
    let mut runs = Vec::new();
    for (kind, depth, roll) in &ordered {
        runs.push(RunStat { clause: *kind, depth: *depth, steps: roll.steps() });
        // Body steps belong to the compound clause in the trace taxonomy.
        let owner = if *depth == 0 { *kind } else { ClauseKind::Ieu };
        for (a, p) in roll.actions.iter().zip(&roll.p_att) {
            actions.push(*a);
            steps.push(StepLog { clause: owner, action: *a, p_att: p.clone() });
        }
    }
    let total_steps = actions.len();
    let ast = ast::replay(g, schema, question, &actions)?;
    Ok(Decoded { ast, steps, stats: DecodeStats { runs, total_steps, wall_steps } })
}

fn clause_kind_of_root(g: &Grammar, ty: NodeTypeId) -> ClauseKind {
    ClauseKind::ALL
        .into_iter()
        .find(|k| g.clause_root(*k) == ty)
        .expect("run root is a clause root")
}

/// Renders per-step attention as CSV: one row per `ApplyRule` step labeled
/// with its clause and rule, one column per question token.
pub fn attention_csv(g: &Grammar, question: &[String], steps: &[StepLog]) -> String {
    let mut out = String::from("clause,rule");
    for tok in question {
        out.push(',');
        out.push_str(&csv_field(tok));
    }
    out.push('\n');
    for s in steps {
        if let Action::ApplyRule(r) = s.action {
            out.push_str(s.clause.name());
            out.push(',');
            out.push_str(&csv_field(&g.rule_text(r)));
            for v in &s.p_att {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------------
// Teacher-forced (training) path.
// ---------------------------------------------------------------------------

/// One teacher-forced step: its oracle action, the negative log-likelihood
/// node of that action, and the attention distribution node of the step.
pub struct ForcedStep {
    pub clause: ClauseKind,
    pub action: Action,
    /// Scalar node: −log P(oracle action | candidates).
    pub nll: NodeRef,
    /// Vector node: the attention distribution over question tokens.
    pub p_att: NodeRef,
}

/// Replays an oracle trace through the decoder on the tape, in the step
/// semantics of `mode`, and returns per-step loss and attention nodes.
///
/// `ast` must be the tree the trace derives (its `born_at` bookkeeping maps
/// trace steps to nodes); `enc` must be encoded on the same tape.
pub fn teacher_force(
    tape: &mut Tape<'_>,
    model: &Model,
    g: &Grammar,
    enc: &EncoderOutput,
    ast: &Ast,
    trace: &ActionTrace,
    mode: Mode,
) -> Result<Vec<ForcedStep>, DecodeError> {
    let p = &model.p;
    let runs = ast::clause_runs(ast, g)?;
    let c0 = tape.param(p.dec_c0);
    let h0 = tape.param(p.dec_h0);

    // Hidden state after each global trace step, for parent feeds.
    let mut h_of: Vec<Option<NodeRef>> = vec![None; trace.actions.len()];
    let mut out = Vec::with_capacity(trace.actions.len());

    // Sequential chaining state.
    let mut chain = (c0, h0, model.start_row());
    // Exit state of the compound clause's run; parallel-mode body runs
    // inherit it, exactly as greedy decoding hands the compound roll's
    // final state to the body wave.
    let mut ieu_exit = None;

    for run in &runs {
        let (mut c, mut h, mut prev_row) = match mode {
            Mode::Parallel if run.depth == 1 => {
                ieu_exit.expect("body run follows its compound clause")
            }
            Mode::Parallel => (c0, h0, model.start_row()),
            Mode::Sequential => chain,
        };
        let entry_h = h;

        for t in run.span.start..run.span.end {
            let action = trace.actions[t];
            let focus = trace.focus[t];
            let node = ast.node(focus.node);
            debug_assert_eq!(node.born_at, Some(t), "trace and tree disagree on step order");
            let kind = g.node_type(node.ty).kind;

            let parent_h = match focus.father {
                None => entry_h,
                Some(f) => {
                    let born = ast.node(f).born_at.expect("father already expanded");
                    h_of[born].expect("father step precedes child step")
                }
            };

            // Attention from the incoming hidden state.
            let u = tape.matvec(p.dec_attn, h);
            let scores = tape.dot_stack(&enc.tokens, u);
            let p_att = tape.softmax(scores);
            let z = tape.weighted_sum(p_att, &enc.tokens);

            let e_a = tape.param_row(p.dec_action, prev_row);
            let e_n = tape.param_row(p.dec_node, node.ty.0);
            let e_k = tape.param_row(p.dec_kind, kind.index());
            let x = tape.concat(&[e_a, e_n, e_k, z, parent_h]);
            let (c2, h2) = tape.lstm(p.dec_wx, p.dec_wh, p.dec_b, x, h, c);
            let hz = tape.concat(&[h2, z]);

            let nll = match action {
                Action::ApplyRule(r) => {
                    let cands = g.rules_for(node.ty)?;
                    let pick = cands
                        .iter()
                        .position(|c| *c == r)
                        .expect("oracle rule is a candidate of its focus type");
                    let rows: Vec<usize> = cands.iter().map(|c| c.0).collect();
                    let logits = tape.rows_affine(p.head_rule_w, p.head_rule_b, rows, hz);
                    tape.nll_pick(logits, pick)
                }
                Action::SelectColumn(cid) => {
                    let proj = tape.matvec(p.head_col, hz);
                    let logits = tape.dot_stack(&enc.columns, proj);
                    tape.nll_pick(logits, cid.0)
                }
                Action::SelectTable(tid) => {
                    let proj = tape.matvec(p.head_tab, hz);
                    let logits = tape.dot_stack(&enc.tables, proj);
                    tape.nll_pick(logits, tid.0)
                }
                Action::SelectValue(i) => {
                    let proj = tape.matvec(p.head_val, hz);
                    let logits = tape.dot_stack(&enc.tokens, proj);
                    tape.nll_pick(logits, i)
                }
            };

            out.push(ForcedStep { clause: trace.clause_at(t), action, nll, p_att });
            h_of[t] = Some(h2);
            c = c2;
            h = h2;
            prev_row = model.action_row(action);
        }

        if mode == Mode::Sequential {
            chain = (c, h, prev_row);
        } else if run.depth == 0 && run.kind == ClauseKind::Ieu {
            ieu_exit = Some((c, h, prev_row));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::tokenize_question;
    use crate::encoder::{encode, encode_values};
    use crate::grammar;
    use crate::nn::gradcheck::grad_check;
    use crate::nn::model::{Dims, Vocab};
    use crate::sql;
    use alloc::vec;

    fn cars_schema() -> Schema {
        let mut s = Schema::new("cars_db");
        let cars = s.add_table("cars");
        s.add_column(cars, "model");
        s.add_column(cars, "year");
        s.add_column(cars, "max_speed");
        let makers = s.add_table("makers");
        s.add_column(makers, "name");
        s
    }

    fn demo_model(seed: u64) -> (Model, ParameterStore) {
        let g = grammar::load_default();
        let vocab = Vocab::build(
            ["which", "model", "year", "than", "newer", "1980", "max", "speed", "cars", "list"]
                .iter(),
        );
        Model::new(&g, vocab, Dims::default(), seed)
    }

    #[test]
    fn zero_weight_decoder_is_uniform_everywhere() {
        // Zero all weights: the hidden state stays zero, attention is
        // uniform, every candidate scores zero, and teacher forcing reports
        // exactly ln(k) per step with k candidates.
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("which model is newer than 1980");
        let (model, mut store) = demo_model(1);
        for i in 0..store.len() {
            for v in store.tensor_mut(crate::nn::params::ParamId(i)).data.iter_mut() {
                *v = 0.0;
            }
        }
        let sqlg = sql::SqlGrammar::resolve(&g).unwrap();
        let spec = sql::parse_spec("select T1.model from cars as T1 where T1.year > 1980", &schema)
            .unwrap();
        let ast = sql::build_ast(&spec, &sqlg, &g, &schema).unwrap();
        let trace = ast::oracle_actions(&ast, &g, &question).unwrap();

        let mut tape = Tape::new(&store);
        let enc = encode(&mut tape, &model, &question, &schema);
        let steps =
            teacher_force(&mut tape, &model, &g, &enc, &ast, &trace, Mode::Parallel).unwrap();
        assert_eq!(steps.len(), trace.actions.len());
        for (t, step) in steps.iter().enumerate() {
            // Uniform attention over every token.
            let p = tape.value(step.p_att);
            for &v in p {
                assert_eq!(v, 1.0 / question.len() as f64);
            }
            let k = match trace.actions[t] {
                Action::ApplyRule(_) => {
                    let ty = ast.node(trace.focus[t].node).ty;
                    g.rules_for(ty).unwrap().len()
                }
                Action::SelectColumn(_) => schema.column_count(),
                Action::SelectTable(_) => schema.table_count(),
                Action::SelectValue(_) => question.len(),
            };
            let nll = tape.scalar(step.nll);
            assert!(
                (nll - libm::log(k as f64)).abs() < 1e-12,
                "step {t}: nll {nll} vs ln({k})"
            );
        }
    }

    #[test]
    fn greedy_decode_completes_and_replays_in_both_modes() {
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("which model is newer than 1980");
        let (model, store) = demo_model(3);
        for mode in [Mode::Sequential, Mode::Parallel] {
            let out = decode_query(&g, &model, &store, &schema, &question, mode)
                .unwrap_or_else(|e| panic!("{mode} decode failed: {e}"));
            assert!(out.ast.is_complete());
            assert_eq!(out.stats.total_steps, out.steps.len());
            assert!(out.stats.wall_steps <= out.stats.total_steps);
            assert!(out.stats.speedup_upper_bound() >= 1.0);
            // Six top-level runs, each with at least the clause-root action.
            assert!(out.stats.runs.len() >= 6);
            assert!(out.stats.runs.iter().all(|r| r.steps >= 1));
            // The decoded tree converts to a well-formed query spec.
            let sqlg = sql::SqlGrammar::resolve(&g).unwrap();
            sql::ast_to_spec(&out.ast, &sqlg, &g).unwrap();
        }
    }

    #[test]
    fn batched_wave_is_bitwise_equal_to_unbatched_clauses() {
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("list model year and max speed of cars");
        let (model, store) = demo_model(4);
        let enc = encode_values(&model, &store, &question, &schema);
        let ctx = DecodeCtx {
            g: &g,
            model: &model,
            store: &store,
            enc: &enc,
            schema: &schema,
            question: &question,
        };

        let inits: Vec<(NodeTypeId, RollInit)> = ClauseKind::ALL
            .into_iter()
            .map(|k| (g.clause_root(k), initial_state(&model, &store)))
            .collect();
        let batched = decode_wave(&ctx, inits, STEP_BUDGET).unwrap();

        for kind in ClauseKind::ALL {
            let single = decode_clause(
                &ctx,
                g.clause_root(kind),
                initial_state(&model, &store),
                STEP_BUDGET,
            )
            .unwrap();
            let b = &batched[kind.index()];
            assert_eq!(b.actions, single.actions, "{kind} actions diverge");
            assert_eq!(b.p_att.len(), single.p_att.len());
            for (bp, sp) in b.p_att.iter().zip(&single.p_att) {
                for (x, y) in bp.iter().zip(sp) {
                    assert_eq!(x.to_bits(), y.to_bits(), "{kind} attention diverges");
                }
            }
            for (x, y) in b.final_state.h.iter().zip(&single.final_state.h) {
                assert_eq!(x.to_bits(), y.to_bits(), "{kind} final hidden diverges");
            }
            for (x, y) in b.final_state.c.iter().zip(&single.final_state.c) {
                assert_eq!(x.to_bits(), y.to_bits(), "{kind} final cell diverges");
            }
        }
    }

    #[test]
    fn step_budget_aborts_oversized_runs() {
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("which model");
        let (model, store) = demo_model(9);
        let enc = encode_values(&model, &store, &question, &schema);
        let ctx = DecodeCtx {
            g: &g,
            model: &model,
            store: &store,
            enc: &enc,
            schema: &schema,
            question: &question,
        };
        // A SELECT clause needs at least seven actions; a budget of three
        // must fail and name the clause.
        let err = decode_clause(
            &ctx,
            g.clause_root(ClauseKind::Select),
            initial_state(&model, &store),
            3,
        )
        .unwrap_err();
        match err {
            DecodeError::Budget { clause, budget } => {
                assert_eq!(clause, "select_clause");
                assert_eq!(budget, 3);
            }
            other => panic!("expected budget error, got {other}"),
        }
    }

    #[test]
    fn decode_is_deterministic_bitwise() {
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("which model is newer than 1980");
        let (model, store) = demo_model(11);
        let a = decode_query(&g, &model, &store, &schema, &question, Mode::Parallel).unwrap();
        let b = decode_query(&g, &model, &store, &schema, &question, Mode::Parallel).unwrap();
        assert!(a.ast.structurally_eq(&b.ast));
        assert_eq!(a.steps.len(), b.steps.len());
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.action, y.action);
            for (u, v) in x.p_att.iter().zip(&y.p_att) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn teacher_forced_gradients_match_finite_differences() {
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("which model is newer than 1980");
        let (model, mut store) = demo_model(13);
        let sqlg = sql::SqlGrammar::resolve(&g).unwrap();
        let spec = sql::parse_spec("select T1.model from cars as T1 where T1.year > 1980", &schema)
            .unwrap();
        let ast = sql::build_ast(&spec, &sqlg, &g, &schema).unwrap();
        let trace = ast::oracle_actions(&ast, &g, &question).unwrap();

        let uniform = vec![1.0 / question.len() as f64; question.len()];
        let report = grad_check(&mut store, 1e-4, 4, 17, |tape| {
            let enc = encode(tape, &model, &question, &schema);
            let steps =
                teacher_force(tape, &model, &g, &enc, &ast, &trace, Mode::Parallel).unwrap();
            // Action likelihood plus a squared attention penalty so the
            // check exercises every head and the attention path.
            let mut terms: Vec<NodeRef> = steps.iter().map(|s| s.nll).collect();
            for s in &steps {
                if matches!(s.action, Action::ApplyRule(_)) {
                    terms.push(tape.sq_diff_const(s.p_att, uniform.clone()));
                }
            }
            tape.sum_scalars(&terms)
        });
        assert!(
            report.max_rel_err < 1e-4,
            "max {} at {}[{}] ({} checked, {} skipped)",
            report.max_rel_err,
            report.worst_param,
            report.worst_index,
            report.checked,
            report.skipped
        );
        assert!(report.checked > 0);
    }

    #[test]
    fn sequential_and_parallel_traces_have_equal_oracle_shape() {
        // Teacher forcing must walk the same steps in both modes; only the
        // recurrent wiring differs.
        let g = grammar::load_default();
        let schema = cars_schema();
        let question = tokenize_question("which model is newer than 1980");
        let (model, store) = demo_model(15);
        let sqlg = sql::SqlGrammar::resolve(&g).unwrap();
        let spec = sql::parse_spec(
            "select T1.model from cars as T1 union select T1.model from cars as T1",
            &schema,
        )
        .unwrap();
        let ast = sql::build_ast(&spec, &sqlg, &g, &schema).unwrap();
        let trace = ast::oracle_actions(&ast, &g, &question).unwrap();

        let mut tape = Tape::new(&store);
        let enc = encode(&mut tape, &model, &question, &schema);
        let seq =
            teacher_force(&mut tape, &model, &g, &enc, &ast, &trace, Mode::Sequential).unwrap();
        let par =
            teacher_force(&mut tape, &model, &g, &enc, &ast, &trace, Mode::Parallel).unwrap();
        assert_eq!(seq.len(), trace.actions.len());
        assert_eq!(par.len(), seq.len());
        for (s, p) in seq.iter().zip(&par) {
            assert_eq!(s.action, p.action);
            assert_eq!(s.clause, p.clause);
        }
        // The wirings genuinely differ: at least one step's loss value must
        // disagree between the modes on a compound query.
        let diverges = seq
            .iter()
            .zip(&par)
            .any(|(s, p)| tape.scalar(s.nll).to_bits() != tape.scalar(p.nll).to_bits());
        assert!(diverges);
    }

    #[test]
    fn attention_csv_lists_apply_rule_steps() {
        let g = grammar::load_default();
        let question = tokenize_question("which model");
        let steps = vec![
            StepLog {
                clause: ClauseKind::Select,
                action: Action::ApplyRule(crate::grammar::RuleId(0)),
                p_att: vec![0.25, 0.75],
            },
            StepLog {
                clause: ClauseKind::Select,
                action: Action::SelectColumn(ColumnId(1)),
                p_att: vec![0.5, 0.5],
            },
        ];
        let csv = attention_csv(&g, &question, &steps);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2); // header + one ApplyRule row
        assert_eq!(lines[0], "clause,rule,which,model");
        assert!(lines[1].starts_with("SELECT,"));
        assert!(lines[1].ends_with("0.250000,0.750000"));
    }
}

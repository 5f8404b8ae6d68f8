//! SQL ASTs built by the three-action transition system, oracle action
//! extraction, and clause-level trace decomposition.
//!
//! A derivation expands frontier nodes depth-first in pre-order. The query
//! root's expansion is structural (the root has exactly one rule), so action
//! traces consist purely of the six clause subsequences in the predefined
//! order SELECT, WHERE, GROUP, ORDER, IEU, FROM. When the IEU clause selects
//! an operator, the body's five clause subsequences sit inside the IEU span.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use crate::grammar::{ClauseKind, Grammar, NodeKind, NodeTypeId, RuleId};
use crate::schema::{ColumnId, Schema, TableId};

/// Index of a node within its [`Ast`] arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// One decoding action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    ApplyRule(RuleId),
    SelectColumn(ColumnId),
    SelectTable(TableId),
    /// Copy the question token at this index as a condition value.
    SelectValue(usize),
}

impl Action {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Action::ApplyRule(_) => "ApplyRule",
            Action::SelectColumn(_) => "SelectColumn",
            Action::SelectTable(_) => "SelectTable",
            Action::SelectValue(_) => "SelectValue",
        }
    }

    /// Human-readable form for trace dumps, e.g.
    /// `ApplyRule(agg -> agg_id val_unit)` or `SelectColumn(cars.model)`.
    pub fn describe(&self, g: &Grammar, schema: &Schema, question: &[String]) -> String {
        match self {
            Action::ApplyRule(r) => format!("ApplyRule({})", g.rule_text(*r)),
            Action::SelectColumn(c) => format!("SelectColumn({})", schema.qualified_column(*c)),
            Action::SelectTable(t) => format!("SelectTable({})", schema.table(*t).name),
            Action::SelectValue(i) => match question.get(*i) {
                Some(tok) => format!("SelectValue({i}:{tok})"),
                None => format!("SelectValue({i})"),
            },
        }
    }
}

/// Payload of an AST node once its action has been taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeContent {
    /// Not yet expanded/filled (frontier or deferred boundary node).
    Pending,
    Rule { rule: RuleId, children: Vec<NodeId> },
    Column(ColumnId),
    Table(TableId),
    /// Copied question token, stored as text so the tree stands alone.
    Value(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub ty: NodeTypeId,
    pub parent: Option<NodeId>,
    pub content: NodeContent,
    /// Step index of the action that expanded or filled this node. `None`
    /// for pending nodes and for structurally expanded roots.
    pub born_at: Option<usize>,
}

/// An arena-allocated derivation tree. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    nodes: Vec<AstNode>,
    root: NodeId,
}

impl Ast {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True when no node is pending.
    pub fn is_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.content != NodeContent::Pending)
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        match &self.node(id).content {
            NodeContent::Rule { children, .. } => children,
            _ => &[],
        }
    }

    /// The child of the root that roots `kind`'s clause subtree.
    pub fn clause_root_node(&self, g: &Grammar, kind: ClauseKind) -> Option<NodeId> {
        let want = g.clause_root(kind);
        self.children(self.root).iter().copied().find(|id| self.node(*id).ty == want)
    }

    /// Pre-order traversal of the subtree under `start` (inclusive).
    pub fn pre_order(&self, start: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            out.push(id);
            for child in self.children(id).iter().rev() {
                stack.push(*child);
            }
        }
        out
    }

    /// Structural equality ignoring arena numbering and timestamps.
    pub fn structurally_eq(&self, other: &Ast) -> bool {
        fn eq(a: &Ast, an: NodeId, b: &Ast, bn: NodeId) -> bool {
            let (x, y) = (a.node(an), b.node(bn));
            if x.ty != y.ty {
                return false;
            }
            match (&x.content, &y.content) {
                (NodeContent::Pending, NodeContent::Pending) => true,
                (NodeContent::Column(c), NodeContent::Column(d)) => c == d,
                (NodeContent::Table(c), NodeContent::Table(d)) => c == d,
                (NodeContent::Value(c), NodeContent::Value(d)) => c == d,
                (
                    NodeContent::Rule { rule: r1, children: c1 },
                    NodeContent::Rule { rule: r2, children: c2 },
                ) => {
                    r1 == r2
                        && c1.len() == c2.len()
                        && c1.iter().zip(c2).all(|(m, n)| eq(a, *m, b, *n))
                }
                _ => false,
            }
        }
        eq(self, self.root, other, other.root)
    }
}

/// A contiguous half-open range of trace steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, step: usize) -> bool {
        self.start <= step && step < self.end
    }
}

/// Per-step frontier bookkeeping recorded by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepFocus {
    /// The node receiving this step's action.
    pub node: NodeId,
    /// Its father, `None` for clause roots (absorbed into initialization).
    pub father: Option<NodeId>,
}

/// A complete derivation trace with its clause decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionTrace {
    pub actions: Vec<Action>,
    pub focus: Vec<StepFocus>,
    /// Contiguous per-clause ranges partitioning `0..actions.len()`, in
    /// predefined clause order. The IEU range covers any body actions.
    pub clause_spans: [Span; 6],
}

impl ActionTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn span(&self, kind: ClauseKind) -> Span {
        self.clause_spans[kind.index()]
    }

    /// The top-level clause owning a step.
    pub fn clause_at(&self, step: usize) -> ClauseKind {
        for kind in ClauseKind::ALL {
            if self.span(kind).contains(step) {
                return kind;
            }
        }
        unreachable!("clause spans partition the trace")
    }

    /// The six per-clause action subsequences, in predefined order.
    /// Concatenating them reproduces the trace.
    pub fn split_by_clause(&self) -> [&[Action]; 6] {
        let mut out: [&[Action]; 6] = [&[]; 6];
        for kind in ClauseKind::ALL {
            let s = self.span(kind);
            out[kind.index()] = &self.actions[s.start..s.end];
        }
        out
    }

    /// One action per line: `step<TAB>clause<TAB>action`.
    pub fn dump(&self, g: &Grammar, schema: &Schema, question: &[String]) -> String {
        let mut out = String::new();
        for (step, action) in self.actions.iter().enumerate() {
            out.push_str(&format!(
                "{step}\t{}\t{}\n",
                self.clause_at(step).name(),
                action.describe(g, schema, question)
            ));
        }
        out
    }
}

/// One decoder roll: a clause subtree decoded from a single init state.
/// Top-level runs have depth 0; runs for the clauses of an IEU body have
/// depth 1 and sit between the IEU run and the FROM run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClauseRun {
    pub kind: ClauseKind,
    pub depth: usize,
    /// Root node of the run's subtree within the gold AST.
    pub root: NodeId,
    /// The run's contiguous range of trace steps.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstError {
    /// Action applied to a completed derivation.
    NoFocus,
    KindMismatch { focus_kind: &'static str, action_kind: &'static str },
    RuleLhsMismatch { focus: String, rule: String },
    UnknownColumn(usize),
    UnknownTable(usize),
    TokenOutOfRange { index: usize, len: usize },
    /// The query root must have exactly one expansion rule.
    RootRuleNotUnique(usize),
    Incomplete { pending: usize },
    ValueNotInQuestion { text: String },
    /// The AST references a rule outside the bound grammar.
    ForeignRule(usize),
    /// The AST is not rooted at the query root (missing clause subtrees).
    NotAQuery,
}

impl fmt::Display for AstError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AstError::NoFocus => write!(f, "no frontier node: derivation is complete"),
            AstError::KindMismatch { focus_kind, action_kind } => {
                write!(f, "kind mismatch: focus node is a {focus_kind}, action is {action_kind}")
            }
            AstError::RuleLhsMismatch { focus, rule } => {
                write!(f, "rule `{rule}` does not expand focus node type `{focus}`")
            }
            AstError::UnknownColumn(c) => write!(f, "column id {c} outside schema"),
            AstError::UnknownTable(t) => write!(f, "table id {t} outside schema"),
            AstError::TokenOutOfRange { index, len } => {
                write!(f, "question token index {index} outside question of length {len}")
            }
            AstError::RootRuleNotUnique(n) => {
                write!(f, "query root must have exactly one rule, found {n}")
            }
            AstError::Incomplete { pending } => {
                write!(f, "derivation incomplete: {pending} pending node(s)")
            }
            AstError::ValueNotInQuestion { text } => {
                write!(f, "condition value `{text}` does not occur in the question")
            }
            AstError::ForeignRule(r) => write!(f, "AST rule id {r} is not in the grammar"),
            AstError::NotAQuery => write!(f, "AST is not rooted at a full query"),
        }
    }
}

impl core::error::Error for AstError {}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Nonterminal => "nonterminal",
        NodeKind::ColumnSlot => "column slot",
        NodeKind::TableSlot => "table slot",
        NodeKind::ValueSlot => "value slot",
    }
}

/// Incremental AST construction via actions, expanding depth-first in
/// pre-order.
///
/// Two shapes: [`TreeBuilder::for_query`] roots the full query (the root
/// rule is applied structurally; the frontier starts with the six clause
/// roots), and [`TreeBuilder::for_subtree`] roots a single clause. Subtree
/// builders treat nested clause roots (an IEU body's clauses) as boundaries:
/// such children are deferred rather than expanded, so each decoder roll
/// stays within one clause.
pub struct TreeBuilder<'a> {
    g: &'a Grammar,
    schema: &'a Schema,
    question: &'a [String],
    nodes: Vec<AstNode>,
    frontier: Vec<NodeId>,
    deferred: Vec<NodeId>,
    clause_mode: bool,
    root: NodeId,
    step: usize,
}

impl<'a> TreeBuilder<'a> {
    pub fn for_query(
        g: &'a Grammar,
        schema: &'a Schema,
        question: &'a [String],
    ) -> Result<TreeBuilder<'a>, AstError> {
        let root_rules = g.rules_for(g.root()).map_err(|_| AstError::RootRuleNotUnique(0))?;
        if root_rules.len() != 1 {
            return Err(AstError::RootRuleNotUnique(root_rules.len()));
        }
        let rule_id = root_rules[0];
        let mut b = TreeBuilder {
            g,
            schema,
            question,
            nodes: Vec::new(),
            frontier: Vec::new(),
            deferred: Vec::new(),
            clause_mode: false,
            root: NodeId(0),
            step: 0,
        };
        b.nodes.push(AstNode {
            ty: g.root(),
            parent: None,
            content: NodeContent::Pending,
            born_at: None,
        });
        // Structural expansion: the root rule is forced, not predicted.
        let children: Vec<NodeId> = g
            .rule(rule_id)
            .child_types()
            .map(|ty| {
                let id = NodeId(b.nodes.len());
                b.nodes.push(AstNode {
                    ty,
                    parent: Some(b.root),
                    content: NodeContent::Pending,
                    born_at: None,
                });
                id
            })
            .collect();
        for child in children.iter().rev() {
            b.frontier.push(*child);
        }
        b.nodes[0].content = NodeContent::Rule { rule: rule_id, children };
        Ok(b)
    }

    pub fn for_subtree(
        g: &'a Grammar,
        schema: &'a Schema,
        question: &'a [String],
        ty: NodeTypeId,
    ) -> TreeBuilder<'a> {
        let nodes = vec![AstNode { ty, parent: None, content: NodeContent::Pending, born_at: None }];
        TreeBuilder {
            g,
            schema,
            question,
            nodes,
            frontier: vec![NodeId(0)],
            deferred: Vec::new(),
            clause_mode: true,
            root: NodeId(0),
            step: 0,
        }
    }

    /// The current focus node (frontier top), if any.
    pub fn focus(&self) -> Option<NodeId> {
        self.frontier.last().copied()
    }

    pub fn focus_type(&self) -> Option<NodeTypeId> {
        self.focus().map(|id| self.nodes[id.0].ty)
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id.0]
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    /// Steps applied so far (equals the next action's step index).
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn is_complete(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Boundary clause roots awaiting their own runs, in creation order.
    pub fn deferred(&self) -> &[NodeId] {
        &self.deferred
    }

    fn take_focus(&mut self) -> Result<NodeId, AstError> {
        self.frontier.pop().ok_or(AstError::NoFocus)
    }

    pub fn apply(&mut self, action: Action) -> Result<NodeId, AstError> {
        match action {
            Action::ApplyRule(r) => self.apply_rule(r),
            Action::SelectColumn(c) => self.fill_column(c),
            Action::SelectTable(t) => self.fill_table(t),
            Action::SelectValue(i) => {
                let len = self.question.len();
                let text = self
                    .question
                    .get(i)
                    .ok_or(AstError::TokenOutOfRange { index: i, len })?
                    .clone();
                self.fill_value(text)
            }
        }
    }

    pub fn apply_rule(&mut self, rule_id: RuleId) -> Result<NodeId, AstError> {
        let focus = self.focus().ok_or(AstError::NoFocus)?;
        let focus_ty = self.nodes[focus.0].ty;
        let focus_kind = self.g.node_type(focus_ty).kind;
        if focus_kind != NodeKind::Nonterminal {
            return Err(AstError::KindMismatch {
                focus_kind: kind_name(focus_kind),
                action_kind: "ApplyRule",
            });
        }
        if self.g.rules().len() <= rule_id.0 {
            return Err(AstError::ForeignRule(rule_id.0));
        }
        if self.g.rule(rule_id).lhs != focus_ty {
            return Err(AstError::RuleLhsMismatch {
                focus: self.g.node_type(focus_ty).name.clone(),
                rule: self.g.rule_text(rule_id),
            });
        }
        self.take_focus()?;
        let child_types: Vec<NodeTypeId> = self.g.rule(rule_id).child_types().collect();
        let mut children = Vec::with_capacity(child_types.len());
        for ty in child_types {
            let id = NodeId(self.nodes.len());
            self.nodes.push(AstNode {
                ty,
                parent: Some(focus),
                content: NodeContent::Pending,
                born_at: None,
            });
            children.push(id);
        }
        // Frontier is a stack: push in reverse so the leftmost child is
        // expanded next. Nested clause roots are boundaries in clause mode.
        let boundary = |b: &TreeBuilder<'_>, id: NodeId| {
            b.clause_mode && ClauseKind::ALL.iter().any(|k| b.g.clause_root(*k) == b.nodes[id.0].ty)
        };
        for child in children.iter().rev() {
            if !boundary(self, *child) {
                self.frontier.push(*child);
            }
        }
        for child in children.iter() {
            if boundary(self, *child) {
                self.deferred.push(*child);
            }
        }
        self.nodes[focus.0].content = NodeContent::Rule { rule: rule_id, children };
        self.nodes[focus.0].born_at = Some(self.step);
        self.step += 1;
        Ok(focus)
    }

    pub fn fill_column(&mut self, c: ColumnId) -> Result<NodeId, AstError> {
        if c.0 >= self.schema.column_count() {
            return Err(AstError::UnknownColumn(c.0));
        }
        self.fill_slot(NodeKind::ColumnSlot, "SelectColumn", NodeContent::Column(c))
    }

    pub fn fill_table(&mut self, t: TableId) -> Result<NodeId, AstError> {
        if t.0 >= self.schema.table_count() {
            return Err(AstError::UnknownTable(t.0));
        }
        self.fill_slot(NodeKind::TableSlot, "SelectTable", NodeContent::Table(t))
    }

    pub fn fill_value(&mut self, text: String) -> Result<NodeId, AstError> {
        self.fill_slot(NodeKind::ValueSlot, "SelectValue", NodeContent::Value(text))
    }

    fn fill_slot(
        &mut self,
        want: NodeKind,
        action_kind: &'static str,
        content: NodeContent,
    ) -> Result<NodeId, AstError> {
        let focus = self.focus().ok_or(AstError::NoFocus)?;
        let focus_kind = self.g.node_type(self.nodes[focus.0].ty).kind;
        if focus_kind != want {
            return Err(AstError::KindMismatch { focus_kind: kind_name(focus_kind), action_kind });
        }
        self.take_focus()?;
        self.nodes[focus.0].content = content;
        self.nodes[focus.0].born_at = Some(self.step);
        self.step += 1;
        Ok(focus)
    }

    pub fn finish(self) -> Result<Ast, AstError> {
        let pending =
            self.nodes.iter().filter(|n| n.content == NodeContent::Pending).count();
        if pending > 0 {
            return Err(AstError::Incomplete { pending });
        }
        Ok(Ast { nodes: self.nodes, root: self.root })
    }
}

/// Rebuild an AST by applying `actions` to a fresh query builder.
pub fn replay(
    g: &Grammar,
    schema: &Schema,
    question: &[String],
    actions: &[Action],
) -> Result<Ast, AstError> {
    let mut b = TreeBuilder::for_query(g, schema, question)?;
    for action in actions {
        b.apply(*action)?;
    }
    b.finish()
}

/// Extract the oracle action trace from a complete gold AST: per clause in
/// predefined order, the depth-first pre-order action sequence of the clause
/// subtree, with IEU body clauses spliced inside the IEU span. Replaying the
/// trace reconstructs the AST, including `born_at` order.
pub fn oracle_actions(
    ast: &Ast,
    g: &Grammar,
    question: &[String],
) -> Result<ActionTrace, AstError> {
    let mut actions = Vec::new();
    let mut focus = Vec::new();
    let mut clause_spans = [Span { start: 0, end: 0 }; 6];
    for run in clause_runs(ast, g)? {
        let start = actions.len();
        emit_run(ast, g, question, run.root, &mut actions, &mut focus)?;
        let end = actions.len();
        debug_assert_eq!(run.span, Span { start, end });
        let span = &mut clause_spans[run.kind.index()];
        if run.depth == 0 {
            *span = Span { start, end };
        }
    }
    // Body runs extend the IEU span up to where FROM begins.
    let from_start = clause_spans[ClauseKind::From.index()].start;
    let ieu = &mut clause_spans[ClauseKind::Ieu.index()];
    ieu.end = from_start;
    Ok(ActionTrace { actions, focus, clause_spans })
}

/// The decoder rolls of a gold AST, in trace order: six top-level runs, with
/// an IEU body's five runs (depth 1) spliced after the IEU run.
pub fn clause_runs(ast: &Ast, g: &Grammar) -> Result<Vec<ClauseRun>, AstError> {
    let mut runs = Vec::new();
    let mut step = 0usize;
    for kind in ClauseKind::ALL {
        let root = ast.clause_root_node(g, kind).ok_or(AstError::NotAQuery)?;
        let (count, deferred) = run_size(ast, g, root);
        runs.push(ClauseRun { kind, depth: 0, root, span: Span { start: step, end: step + count } });
        step += count;
        for sub in deferred {
            let sub_kind = ClauseKind::ALL
                .into_iter()
                .find(|k| g.clause_root(*k) == ast.node(sub).ty)
                .expect("deferred node is a clause root");
            let (sub_count, sub_deferred) = run_size(ast, g, sub);
            debug_assert!(sub_deferred.is_empty(), "body clauses nest no further");
            runs.push(ClauseRun {
                kind: sub_kind,
                depth: 1,
                root: sub,
                span: Span { start: step, end: step + sub_count },
            });
            step += sub_count;
        }
    }
    Ok(runs)
}

/// Count the actions of a clause run and collect its boundary children
/// (nested clause roots), in left-to-right order.
fn run_size(ast: &Ast, g: &Grammar, root: NodeId) -> (usize, Vec<NodeId>) {
    let mut count = 0usize;
    let mut deferred = Vec::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if id != root {
            let ty = ast.node(id).ty;
            if ClauseKind::ALL.iter().any(|k| g.clause_root(*k) == ty) {
                deferred.push(id);
                continue;
            }
        }
        count += 1;
        for child in ast.children(id).iter().rev() {
            stack.push(*child);
        }
    }
    // Arena ids follow creation order, so this guarantees left-to-right
    // sibling order regardless of traversal bookkeeping.
    deferred.sort();
    (count, deferred)
}

fn emit_run(
    ast: &Ast,
    g: &Grammar,
    question: &[String],
    root: NodeId,
    actions: &mut Vec<Action>,
    focus: &mut Vec<StepFocus>,
) -> Result<(), AstError> {
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if id != root {
            let ty = ast.node(id).ty;
            if ClauseKind::ALL.iter().any(|k| g.clause_root(*k) == ty) {
                continue; // boundary: its own run emits it
            }
        }
        let node = ast.node(id);
        let action = match &node.content {
            NodeContent::Rule { rule, .. } => Action::ApplyRule(*rule),
            NodeContent::Column(c) => Action::SelectColumn(*c),
            NodeContent::Table(t) => Action::SelectTable(*t),
            NodeContent::Value(text) => {
                let idx = question
                    .iter()
                    .position(|tok| tok == text)
                    .ok_or_else(|| AstError::ValueNotInQuestion { text: text.clone() })?;
                Action::SelectValue(idx)
            }
            NodeContent::Pending => return Err(AstError::Incomplete { pending: 1 }),
        };
        actions.push(action);
        // Clause roots of runs have their father absorbed into the init
        // state; `root` covers both top-level and body clause roots here.
        let father = if id == root { None } else { node.parent };
        focus.push(StepFocus { node: id, father });
        for child in ast.children(id).iter().rev() {
            stack.push(*child);
        }
    }
    Ok(())
}

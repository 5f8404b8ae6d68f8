//! SQL text for the supported subset: rendering an AST to a canonical
//! string, parsing text back into an AST, and an order-insensitive
//! canonical key for exact-match comparison.
//!
//! This module binds to grammars with the shipped SQL shape (the rule
//! inventory of [`crate::DEFAULT_GRAMMAR`]); [`SqlGrammar::resolve`] checks
//! the shape once and fails with the first missing rule. The rest of the
//! toolkit (decoding, alignment, training) is grammar-generic.
//!
//! Canonical form: lowercase keywords, single spaces, tables aliased
//! `T1..Tn` in FROM order, columns rendered through their alias, values as
//! bare copied tokens. Example:
//! `select T1.model from cars as T1 where T1.year > 1980 order by T1.year asc`.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::{Ast, AstError, NodeContent, NodeId, TreeBuilder};
use crate::grammar::{ClauseKind, Grammar, RuleId};
use crate::schema::{ColumnId, Schema, TableId};

/// Aggregation applied to a column reference. `NONE` means the bare column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggKind {
    None,
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl AggKind {
    pub const ALL: [AggKind; 6] =
        [AggKind::None, AggKind::Max, AggKind::Min, AggKind::Count, AggKind::Sum, AggKind::Avg];

    pub fn index(self) -> usize {
        match self {
            AggKind::None => 0,
            AggKind::Max => 1,
            AggKind::Min => 2,
            AggKind::Count => 3,
            AggKind::Sum => 4,
            AggKind::Avg => 5,
        }
    }

    /// SQL function name; `None` has no surface form.
    pub fn sql_name(self) -> Option<&'static str> {
        match self {
            AggKind::None => None,
            AggKind::Max => Some("max"),
            AggKind::Min => Some("min"),
            AggKind::Count => Some("count"),
            AggKind::Sum => Some("sum"),
            AggKind::Avg => Some("avg"),
        }
    }

    fn from_sql_name(s: &str) -> Option<AggKind> {
        AggKind::ALL.iter().copied().find(|a| a.sql_name() == Some(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Gt,
    Lt,
    Ge,
    Le,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Gt, CmpOp::Lt, CmpOp::Ge, CmpOp::Le, CmpOp::Ne];

    pub fn index(self) -> usize {
        match self {
            CmpOp::Eq => 0,
            CmpOp::Gt => 1,
            CmpOp::Lt => 2,
            CmpOp::Ge => 3,
            CmpOp::Le => 4,
            CmpOp::Ne => 5,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Ne => "!=",
        }
    }

    fn from_symbol(s: &str) -> Option<CmpOp> {
        CmpOp::ALL.iter().copied().find(|o| o.symbol() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IeuOp {
    Intersect,
    Except,
    Union,
}

impl IeuOp {
    pub const ALL: [IeuOp; 3] = [IeuOp::Intersect, IeuOp::Except, IeuOp::Union];

    pub fn index(self) -> usize {
        match self {
            IeuOp::Intersect => 0,
            IeuOp::Except => 1,
            IeuOp::Union => 2,
        }
    }

    pub fn sql_name(self) -> &'static str {
        match self {
            IeuOp::Intersect => "intersect",
            IeuOp::Except => "except",
            IeuOp::Union => "union",
        }
    }
}

/// One projected item of the SELECT clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectItem {
    pub agg: AggKind,
    pub distinct: bool,
    pub col: ColumnId,
}

/// One WHERE conjunct: `col op value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pred {
    pub col: ColumnId,
    pub op: CmpOp,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Having {
    pub agg: AggKind,
    pub col: ColumnId,
    pub op: CmpOp,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupBy {
    pub col: ColumnId,
    pub having: Option<Having>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBy {
    pub agg: AggKind,
    pub col: ColumnId,
    pub desc: bool,
    pub limit: Option<String>,
}

/// Structured form of a supported query; the bridge between SQL text and
/// derivation trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    /// 1..=4 items.
    pub select: Vec<SelectItem>,
    /// Conjuncts; empty means no WHERE clause.
    pub where_: Vec<Pred>,
    pub group: Option<GroupBy>,
    pub order: Option<OrderBy>,
    /// Set operation and its flat body (the body never nests further).
    pub ieu: Option<(IeuOp, Box<QuerySpec>)>,
    /// 1..=3 tables, in first-appearance order.
    pub from: Vec<TableId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SqlError {
    /// The grammar lacks a rule the SQL shape requires.
    GrammarShape(String),
    /// Construct outside the supported subset.
    Unsupported(String),
    UnknownColumn(String),
    UnknownTable(String),
    AmbiguousColumn { name: String, candidates: Vec<String> },
    Expected { what: String, got: String },
    TrailingTokens(String),
    /// The AST does not follow the SQL shape (wrong grammar).
    ForeignShape(String),
    /// The AST has dangling (pending) nodes.
    Incomplete,
    Ast(AstError),
}

impl fmt::Display for SqlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlError::GrammarShape(rule) => {
                write!(f, "grammar does not provide required rule `{rule}`")
            }
            SqlError::Unsupported(what) => write!(f, "unsupported construct: {what}"),
            SqlError::UnknownColumn(name) => write!(f, "unknown column `{name}`"),
            SqlError::UnknownTable(name) => write!(f, "unknown table `{name}`"),
            SqlError::AmbiguousColumn { name, candidates } => {
                write!(f, "ambiguous column `{name}`; candidates: {}", candidates.join(", "))
            }
            SqlError::Expected { what, got } => write!(f, "expected {what}, got `{got}`"),
            SqlError::TrailingTokens(tok) => write!(f, "unexpected trailing input at `{tok}`"),
            SqlError::ForeignShape(what) => write!(f, "AST outside the SQL shape: {what}"),
            SqlError::Incomplete => write!(f, "AST has dangling slots"),
            SqlError::Ast(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SqlError {}

impl From<AstError> for SqlError {
    fn from(e: AstError) -> SqlError {
        SqlError::Ast(e)
    }
}

/// Rule ids of the SQL shape, resolved once per grammar.
#[derive(Debug, Clone)]
pub struct SqlGrammar {
    pub select_arity: [RuleId; 4],
    pub agg: RuleId,
    pub agg_id: [RuleId; 6],
    pub val_unit: RuleId,
    pub col_unit: RuleId,
    /// `[plain, distinct]`
    pub dist: [RuleId; 2],
    pub where_some: RuleId,
    pub where_none: RuleId,
    pub cond_single: RuleId,
    pub cond_and: RuleId,
    pub pred: RuleId,
    pub cmp: [RuleId; 6],
    pub group_plain: RuleId,
    pub group_having: RuleId,
    pub group_none: RuleId,
    pub having: RuleId,
    pub h_agg: [RuleId; 6],
    pub h_op: [RuleId; 6],
    pub order_plain: RuleId,
    pub order_limit: RuleId,
    pub order_none: RuleId,
    pub order_item: RuleId,
    pub o_agg: [RuleId; 6],
    /// `[asc, desc]`
    pub o_dir: [RuleId; 2],
    pub ieu: [RuleId; 3],
    pub ieu_none: RuleId,
    pub body: RuleId,
    pub from_arity: [RuleId; 3],
}

impl SqlGrammar {
    pub fn resolve(g: &Grammar) -> Result<SqlGrammar, SqlError> {
        let r = |text: &str| -> Result<RuleId, SqlError> {
            g.find_rule(text).ok_or_else(|| SqlError::GrammarShape(text.to_owned()))
        };
        let six = |lhs: &str| -> Result<[RuleId; 6], SqlError> {
            let mut out = [RuleId(0); 6];
            for (i, kw) in ["NONE", "MAX", "MIN", "COUNT", "SUM", "AVG"].iter().enumerate() {
                out[i] = r(&format!("{lhs} -> {kw}"))?;
            }
            Ok(out)
        };
        let six_ops = |lhs: &str| -> Result<[RuleId; 6], SqlError> {
            let mut out = [RuleId(0); 6];
            for (i, kw) in ["EQ", "GT", "LT", "GE", "LE", "NE"].iter().enumerate() {
                out[i] = r(&format!("{lhs} -> {kw}"))?;
            }
            Ok(out)
        };
        Ok(SqlGrammar {
            select_arity: [
                r("select_clause -> SELECT agg")?,
                r("select_clause -> SELECT agg agg")?,
                r("select_clause -> SELECT agg agg agg")?,
                r("select_clause -> SELECT agg agg agg agg")?,
            ],
            agg: r("agg -> agg_id val_unit")?,
            agg_id: six("agg_id")?,
            val_unit: r("val_unit -> col_unit")?,
            col_unit: r("col_unit -> dist_flag col_ref")?,
            dist: [r("dist_flag -> NONE")?, r("dist_flag -> DISTINCT")?],
            where_some: r("where_clause -> cond")?,
            where_none: r("where_clause ->")?,
            cond_single: r("cond -> pred")?,
            cond_and: r("cond -> pred AND cond")?,
            pred: r("pred -> w_col cmp_op w_val")?,
            cmp: six_ops("cmp_op")?,
            group_plain: r("group_clause -> GROUP_BY g_col")?,
            group_having: r("group_clause -> GROUP_BY g_col HAVING having")?,
            group_none: r("group_clause ->")?,
            having: r("having -> h_agg_id h_col h_op h_val")?,
            h_agg: six("h_agg_id")?,
            h_op: six_ops("h_op")?,
            order_plain: r("order_clause -> ORDER_BY order_item")?,
            order_limit: r("order_clause -> ORDER_BY order_item LIMIT o_limit")?,
            order_none: r("order_clause ->")?,
            order_item: r("order_item -> o_agg_id o_col o_dir")?,
            o_agg: six("o_agg_id")?,
            o_dir: [r("o_dir -> ASC")?, r("o_dir -> DESC")?],
            ieu: [
                r("ieu_clause -> INTERSECT body")?,
                r("ieu_clause -> EXCEPT body")?,
                r("ieu_clause -> UNION body")?,
            ],
            ieu_none: r("ieu_clause ->")?,
            body: r("body -> select_clause where_clause group_clause order_clause from_clause")?,
            from_arity: [
                r("from_clause -> FROM tbl")?,
                r("from_clause -> FROM tbl tbl")?,
                r("from_clause -> FROM tbl tbl tbl")?,
            ],
        })
    }
}

// ---------------------------------------------------------------------------
// QuerySpec -> Ast
// ---------------------------------------------------------------------------

/// Build the derivation tree of a query, applying actions in depth-first
/// pre-order. Inverse of [`ast_to_spec`].
pub fn build_ast(
    spec: &QuerySpec,
    sg: &SqlGrammar,
    g: &Grammar,
    schema: &Schema,
) -> Result<Ast, SqlError> {
    validate_spec(spec, true)?;
    let mut b = TreeBuilder::for_query(g, schema, &[])?;
    apply_clauses(&mut b, spec, sg, true)?;
    Ok(b.finish()?)
}

fn validate_spec(spec: &QuerySpec, allow_ieu: bool) -> Result<(), SqlError> {
    if spec.select.is_empty() || spec.select.len() > 4 {
        return Err(SqlError::Unsupported(format!("select arity {}", spec.select.len())));
    }
    if spec.from.is_empty() || spec.from.len() > 3 {
        return Err(SqlError::Unsupported(format!("from arity {}", spec.from.len())));
    }
    match &spec.ieu {
        Some(_) if !allow_ieu => {
            Err(SqlError::Unsupported("set operation nesting beyond depth 1".to_owned()))
        }
        Some((_, body)) => validate_spec(body, false),
        None => Ok(()),
    }
}

fn apply_clauses(
    b: &mut TreeBuilder<'_>,
    spec: &QuerySpec,
    sg: &SqlGrammar,
    with_ieu: bool,
) -> Result<(), SqlError> {
    // SELECT
    b.apply_rule(sg.select_arity[spec.select.len() - 1])?;
    for item in &spec.select {
        b.apply_rule(sg.agg)?;
        b.apply_rule(sg.agg_id[item.agg.index()])?;
        b.apply_rule(sg.val_unit)?;
        b.apply_rule(sg.col_unit)?;
        b.apply_rule(sg.dist[usize::from(item.distinct)])?;
        b.fill_column(item.col)?;
    }
    // WHERE
    if spec.where_.is_empty() {
        b.apply_rule(sg.where_none)?;
    } else {
        b.apply_rule(sg.where_some)?;
        for (i, pred) in spec.where_.iter().enumerate() {
            let last = i + 1 == spec.where_.len();
            b.apply_rule(if last { sg.cond_single } else { sg.cond_and })?;
            b.apply_rule(sg.pred)?;
            b.fill_column(pred.col)?;
            b.apply_rule(sg.cmp[pred.op.index()])?;
            b.fill_value(pred.value.clone())?;
        }
    }
    // GROUP
    match &spec.group {
        None => {
            b.apply_rule(sg.group_none)?;
        }
        Some(gb) => match &gb.having {
            None => {
                b.apply_rule(sg.group_plain)?;
                b.fill_column(gb.col)?;
            }
            Some(h) => {
                b.apply_rule(sg.group_having)?;
                b.fill_column(gb.col)?;
                b.apply_rule(sg.having)?;
                b.apply_rule(sg.h_agg[h.agg.index()])?;
                b.fill_column(h.col)?;
                b.apply_rule(sg.h_op[h.op.index()])?;
                b.fill_value(h.value.clone())?;
            }
        },
    }
    // ORDER
    match &spec.order {
        None => {
            b.apply_rule(sg.order_none)?;
        }
        Some(ob) => {
            b.apply_rule(if ob.limit.is_some() { sg.order_limit } else { sg.order_plain })?;
            b.apply_rule(sg.order_item)?;
            b.apply_rule(sg.o_agg[ob.agg.index()])?;
            b.fill_column(ob.col)?;
            b.apply_rule(sg.o_dir[usize::from(ob.desc)])?;
            if let Some(limit) = &ob.limit {
                b.fill_value(limit.clone())?;
            }
        }
    }
    if with_ieu {
        // IEU (the body's clauses are demanded by the frontier right here)
        match &spec.ieu {
            None => {
                b.apply_rule(sg.ieu_none)?;
            }
            Some((op, body)) => {
                b.apply_rule(sg.ieu[op.index()])?;
                b.apply_rule(sg.body)?;
                apply_clauses(b, body, sg, false)?;
            }
        }
    }
    // FROM
    b.apply_rule(sg.from_arity[spec.from.len() - 1])?;
    for table in &spec.from {
        b.fill_table(*table)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ast -> QuerySpec
// ---------------------------------------------------------------------------

fn shape<T>(what: &str) -> Result<T, SqlError> {
    Err(SqlError::ForeignShape(what.to_owned()))
}

fn node_rule(ast: &Ast, id: NodeId) -> Result<RuleId, SqlError> {
    match &ast.node(id).content {
        NodeContent::Rule { rule, .. } => Ok(*rule),
        _ => shape("expected a rule node"),
    }
}

fn node_column(ast: &Ast, id: NodeId) -> Result<ColumnId, SqlError> {
    match &ast.node(id).content {
        NodeContent::Column(c) => Ok(*c),
        _ => shape("expected a column leaf"),
    }
}

fn node_table(ast: &Ast, id: NodeId) -> Result<TableId, SqlError> {
    match &ast.node(id).content {
        NodeContent::Table(t) => Ok(*t),
        _ => shape("expected a table leaf"),
    }
}

fn node_value(ast: &Ast, id: NodeId) -> Result<String, SqlError> {
    match &ast.node(id).content {
        NodeContent::Value(s) => Ok(s.clone()),
        _ => shape("expected a value leaf"),
    }
}

fn position_in(rules: &[RuleId], r: RuleId, what: &str) -> Result<usize, SqlError> {
    match rules.iter().position(|x| *x == r) {
        Some(i) => Ok(i),
        None => shape(what),
    }
}

/// Interpret a complete AST as a [`QuerySpec`]. Inverse of [`build_ast`].
pub fn ast_to_spec(ast: &Ast, sg: &SqlGrammar, g: &Grammar) -> Result<QuerySpec, SqlError> {
    if !ast.is_complete() {
        return Err(SqlError::Incomplete);
    }
    let clause = |kind: ClauseKind| -> Result<NodeId, SqlError> {
        ast.clause_root_node(g, kind).ok_or(SqlError::Ast(AstError::NotAQuery))
    };
    spec_from_clause_nodes(
        ast,
        sg,
        clause(ClauseKind::Select)?,
        clause(ClauseKind::Where)?,
        clause(ClauseKind::Group)?,
        clause(ClauseKind::Order)?,
        Some(clause(ClauseKind::Ieu)?),
        clause(ClauseKind::From)?,
    )
}

#[allow(clippy::too_many_arguments)]
fn spec_from_clause_nodes(
    ast: &Ast,
    sg: &SqlGrammar,
    select: NodeId,
    where_: NodeId,
    group: NodeId,
    order: NodeId,
    ieu: Option<NodeId>,
    from: NodeId,
) -> Result<QuerySpec, SqlError> {
    Ok(QuerySpec {
        select: parse_select_node(ast, sg, select)?,
        where_: parse_where_node(ast, sg, where_)?,
        group: parse_group_node(ast, sg, group)?,
        order: parse_order_node(ast, sg, order)?,
        ieu: match ieu {
            Some(node) => parse_ieu_node(ast, sg, node)?,
            None => None,
        },
        from: parse_from_node(ast, sg, from)?,
    })
}

fn parse_select_node(ast: &Ast, sg: &SqlGrammar, node: NodeId) -> Result<Vec<SelectItem>, SqlError> {
    let rule = node_rule(ast, node)?;
    let arity = position_in(&sg.select_arity, rule, "select clause rule")? + 1;
    let aggs = ast.children(node);
    if aggs.len() != arity {
        return shape("select arity");
    }
    let mut items = Vec::with_capacity(arity);
    for agg_node in aggs {
        if node_rule(ast, *agg_node)? != sg.agg {
            return shape("agg rule");
        }
        let [agg_id, val_unit] = ast.children(*agg_node) else { return shape("agg children") };
        let agg_kind =
            AggKind::ALL[position_in(&sg.agg_id, node_rule(ast, *agg_id)?, "agg_id rule")?];
        if node_rule(ast, *val_unit)? != sg.val_unit {
            return shape("val_unit rule");
        }
        let [col_unit] = ast.children(*val_unit) else { return shape("val_unit children") };
        if node_rule(ast, *col_unit)? != sg.col_unit {
            return shape("col_unit rule");
        }
        let [dist, col_ref] = ast.children(*col_unit) else { return shape("col_unit children") };
        let distinct = position_in(&sg.dist, node_rule(ast, *dist)?, "dist_flag rule")? == 1;
        items.push(SelectItem { agg: agg_kind, distinct, col: node_column(ast, *col_ref)? });
    }
    Ok(items)
}

fn parse_where_node(ast: &Ast, sg: &SqlGrammar, node: NodeId) -> Result<Vec<Pred>, SqlError> {
    let rule = node_rule(ast, node)?;
    if rule == sg.where_none {
        return Ok(Vec::new());
    }
    if rule != sg.where_some {
        return shape("where clause rule");
    }
    let mut preds = Vec::new();
    let [first] = ast.children(node) else { return shape("where children") };
    let mut cond = *first;
    loop {
        let cond_rule = node_rule(ast, cond)?;
        let children = ast.children(cond);
        let pred_node = *children.first().ok_or(SqlError::ForeignShape("cond children".into()))?;
        if node_rule(ast, pred_node)? != sg.pred {
            return shape("pred rule");
        }
        let [col, op, val] = ast.children(pred_node) else { return shape("pred children") };
        preds.push(Pred {
            col: node_column(ast, *col)?,
            op: CmpOp::ALL[position_in(&sg.cmp, node_rule(ast, *op)?, "cmp_op rule")?],
            value: node_value(ast, *val)?,
        });
        if cond_rule == sg.cond_single {
            break;
        }
        if cond_rule != sg.cond_and {
            return shape("cond rule");
        }
        cond = children[1];
    }
    Ok(preds)
}

fn parse_group_node(ast: &Ast, sg: &SqlGrammar, node: NodeId) -> Result<Option<GroupBy>, SqlError> {
    let rule = node_rule(ast, node)?;
    if rule == sg.group_none {
        return Ok(None);
    }
    if rule == sg.group_plain {
        let [col] = ast.children(node) else { return shape("group children") };
        return Ok(Some(GroupBy { col: node_column(ast, *col)?, having: None }));
    }
    if rule != sg.group_having {
        return shape("group clause rule");
    }
    let [col, having] = ast.children(node) else { return shape("group children") };
    if node_rule(ast, *having)? != sg.having {
        return shape("having rule");
    }
    let [h_agg, h_col, h_op, h_val] = ast.children(*having) else {
        return shape("having children");
    };
    Ok(Some(GroupBy {
        col: node_column(ast, *col)?,
        having: Some(Having {
            agg: AggKind::ALL[position_in(&sg.h_agg, node_rule(ast, *h_agg)?, "h_agg_id rule")?],
            col: node_column(ast, *h_col)?,
            op: CmpOp::ALL[position_in(&sg.h_op, node_rule(ast, *h_op)?, "h_op rule")?],
            value: node_value(ast, *h_val)?,
        }),
    }))
}

fn parse_order_node(ast: &Ast, sg: &SqlGrammar, node: NodeId) -> Result<Option<OrderBy>, SqlError> {
    let rule = node_rule(ast, node)?;
    if rule == sg.order_none {
        return Ok(None);
    }
    let (item_node, limit) = if rule == sg.order_plain {
        let [item] = ast.children(node) else { return shape("order children") };
        (*item, None)
    } else if rule == sg.order_limit {
        let [item, limit] = ast.children(node) else { return shape("order children") };
        (*item, Some(node_value(ast, *limit)?))
    } else {
        return shape("order clause rule");
    };
    if node_rule(ast, item_node)? != sg.order_item {
        return shape("order_item rule");
    }
    let [o_agg, o_col, o_dir] = ast.children(item_node) else { return shape("order_item children") };
    Ok(Some(OrderBy {
        agg: AggKind::ALL[position_in(&sg.o_agg, node_rule(ast, *o_agg)?, "o_agg_id rule")?],
        col: node_column(ast, *o_col)?,
        desc: position_in(&sg.o_dir, node_rule(ast, *o_dir)?, "o_dir rule")? == 1,
        limit,
    }))
}

fn parse_ieu_node(
    ast: &Ast,
    sg: &SqlGrammar,
    node: NodeId,
) -> Result<Option<(IeuOp, Box<QuerySpec>)>, SqlError> {
    let rule = node_rule(ast, node)?;
    if rule == sg.ieu_none {
        return Ok(None);
    }
    let op = IeuOp::ALL[position_in(&sg.ieu, rule, "ieu clause rule")?];
    let [body] = ast.children(node) else { return shape("ieu children") };
    if node_rule(ast, *body)? != sg.body {
        return shape("body rule");
    }
    let [s, w, g2, o, f] = ast.children(*body) else { return shape("body children") };
    let spec = spec_from_clause_nodes(ast, sg, *s, *w, *g2, *o, None, *f)?;
    Ok(Some((op, Box::new(spec))))
}

fn parse_from_node(ast: &Ast, sg: &SqlGrammar, node: NodeId) -> Result<Vec<TableId>, SqlError> {
    let rule = node_rule(ast, node)?;
    let arity = position_in(&sg.from_arity, rule, "from clause rule")? + 1;
    let tbls = ast.children(node);
    if tbls.len() != arity {
        return shape("from arity");
    }
    tbls.iter().map(|t| node_table(ast, *t)).collect()
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Render a complete AST to canonical SQL text.
pub fn render_sql(ast: &Ast, sg: &SqlGrammar, g: &Grammar, schema: &Schema) -> Result<String, SqlError> {
    Ok(render_spec(&ast_to_spec(ast, sg, g)?, schema))
}

/// Render a query spec to canonical SQL text.
pub fn render_spec(spec: &QuerySpec, schema: &Schema) -> String {
    let mut out = String::new();
    render_into(spec, schema, &mut out);
    out
}

fn render_into(spec: &QuerySpec, schema: &Schema, out: &mut String) {
    // Aliases T1..Tn in FROM order, first occurrence wins.
    let mut aliases: BTreeMap<TableId, usize> = BTreeMap::new();
    for (i, t) in spec.from.iter().enumerate() {
        aliases.entry(*t).or_insert(i + 1);
    }
    let col = |c: ColumnId| -> String {
        let column = schema.column(c);
        match column.table {
            None => "*".to_string(),
            Some(t) => match aliases.get(&t) {
                Some(k) => format!("T{k}.{}", column.name),
                // Table absent from FROM: qualify by name so the reference
                // stays unambiguous.
                None => format!("{}.{}", schema.table(t).name, column.name),
            },
        }
    };
    let agg_col = |agg: AggKind, distinct: bool, c: ColumnId| -> String {
        let inner =
            if distinct { format!("distinct {}", col(c)) } else { col(c) };
        match agg.sql_name() {
            Some(f) => format!("{f}({inner})"),
            None => inner,
        }
    };

    out.push_str("select ");
    for (i, item) in spec.select.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&agg_col(item.agg, item.distinct, item.col));
    }
    out.push_str(" from ");
    for (i, t) in spec.from.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{} as T{}", schema.table(*t).name, i + 1));
    }
    if !spec.where_.is_empty() {
        out.push_str(" where ");
        for (i, p) in spec.where_.iter().enumerate() {
            if i > 0 {
                out.push_str(" and ");
            }
            out.push_str(&format!("{} {} {}", col(p.col), p.op.symbol(), p.value));
        }
    }
    if let Some(gb) = &spec.group {
        out.push_str(&format!(" group by {}", col(gb.col)));
        if let Some(h) = &gb.having {
            out.push_str(&format!(
                " having {} {} {}",
                agg_col(h.agg, false, h.col),
                h.op.symbol(),
                h.value
            ));
        }
    }
    if let Some(ob) = &spec.order {
        out.push_str(&format!(
            " order by {} {}",
            agg_col(ob.agg, false, ob.col),
            if ob.desc { "desc" } else { "asc" }
        ));
        if let Some(limit) = &ob.limit {
            out.push_str(&format!(" limit {limit}"));
        }
    }
    if let Some((op, body)) = &spec.ieu {
        out.push(' ');
        out.push_str(op.sql_name());
        out.push(' ');
        render_into(body, schema, out);
    }
}

/// Order-insensitive canonical key. Two complete queries are an exact match
/// iff their keys are equal: SELECT items, WHERE conjuncts, and FROM tables
/// compare as multisets; everything else positionally.
pub fn canonical_key(spec: &QuerySpec, schema: &Schema) -> String {
    let col = |c: ColumnId| schema.qualified_column(c);
    let agg_col = |agg: AggKind, distinct: bool, c: ColumnId| -> String {
        let inner = if distinct { format!("distinct {}", col(c)) } else { col(c) };
        match agg.sql_name() {
            Some(f) => format!("{f}({inner})"),
            None => inner,
        }
    };
    let mut sel: Vec<String> =
        spec.select.iter().map(|i| agg_col(i.agg, i.distinct, i.col)).collect();
    sel.sort();
    let mut whr: Vec<String> = spec
        .where_
        .iter()
        .map(|p| format!("{}{}{}", col(p.col), p.op.symbol(), p.value))
        .collect();
    whr.sort();
    let grp = match &spec.group {
        None => "-".to_string(),
        Some(gb) => {
            let h = match &gb.having {
                None => "-".to_string(),
                Some(h) => {
                    format!("{}{}{}", agg_col(h.agg, false, h.col), h.op.symbol(), h.value)
                }
            };
            format!("{}#{}", col(gb.col), h)
        }
    };
    let ord = match &spec.order {
        None => "-".to_string(),
        Some(ob) => format!(
            "{}#{}#{}",
            agg_col(ob.agg, false, ob.col),
            if ob.desc { "desc" } else { "asc" },
            ob.limit.as_deref().unwrap_or("-")
        ),
    };
    let ieu = match &spec.ieu {
        None => "-".to_string(),
        Some((op, body)) => format!("{}{{{}}}", op.sql_name(), canonical_key(body, schema)),
    };
    let mut frm: Vec<&str> = spec.from.iter().map(|t| schema.table(*t).name.as_str()).collect();
    frm.sort();
    format!(
        "sel[{}] whr[{}] grp[{}] ord[{}] ieu[{}] frm[{}]",
        sel.join("|"),
        whr.join("|"),
        grp,
        ord,
        ieu,
        frm.join("|")
    )
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Lowercasing SQL tokenizer: words, numbers, and the symbols
/// `( ) , . * = > < >= <= !=` as separate tokens.
pub fn tokenize_sql(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if matches!(c, '(' | ')' | ',' | '.' | '*' | '=') {
            out.push(c.to_string());
            i += 1;
        } else if matches!(c, '>' | '<' | '!') {
            if i + 1 < chars.len() && chars[i + 1] == '=' {
                out.push(format!("{c}="));
                i += 2;
            } else {
                out.push(c.to_string());
                i += 1;
            }
        } else {
            let start = i;
            while i < chars.len()
                && !chars[i].is_whitespace()
                && !matches!(chars[i], '(' | ')' | ',' | '.' | '*' | '=' | '>' | '<' | '!')
            {
                i += 1;
            }
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
        }
    }
    out
}

const RESERVED: &[&str] = &[
    "select", "from", "where", "and", "group", "order", "by", "having", "limit", "asc", "desc",
    "intersect", "except", "union", "distinct", "as", "max", "min", "count", "sum", "avg",
];

#[derive(Debug, Clone)]
struct RawCol {
    qual: Option<String>,
    name: String,
}

#[derive(Debug)]
struct RawItem {
    agg: AggKind,
    distinct: bool,
    col: RawCol,
}

#[derive(Debug)]
struct RawPred {
    col: RawCol,
    op: CmpOp,
    value: String,
}

#[derive(Debug)]
struct RawHaving {
    agg: AggKind,
    col: RawCol,
    op: CmpOp,
    value: String,
}

#[derive(Debug)]
struct RawQuery {
    select: Vec<RawItem>,
    from: Vec<(String, Option<String>)>,
    where_: Vec<RawPred>,
    group: Option<(RawCol, Option<RawHaving>)>,
    order: Option<(AggKind, RawCol, bool, Option<String>)>,
    ieu: Option<(IeuOp, Box<RawQuery>)>,
}

struct Parser {
    toks: Vec<String>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|s| s.as_str())
    }

    fn next(&mut self) -> Result<&str, SqlError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.as_str())
            }
            None => Err(SqlError::Expected { what: "more input".into(), got: "end of input".into() }),
        }
    }

    fn eat(&mut self, kw: &str) -> bool {
        if self.peek() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kw: &str) -> Result<(), SqlError> {
        let got = self.next()?.to_owned();
        if got == kw {
            Ok(())
        } else {
            Err(SqlError::Expected { what: format!("`{kw}`"), got })
        }
    }

    fn word(&mut self, what: &str) -> Result<String, SqlError> {
        let got = self.next()?.to_owned();
        if RESERVED.contains(&got.as_str()) || !got.chars().next().is_some_and(char::is_alphanumeric)
        {
            return Err(SqlError::Expected { what: what.to_owned(), got });
        }
        Ok(got)
    }

    fn value(&mut self) -> Result<String, SqlError> {
        let got = self.next()?.to_owned();
        if RESERVED.contains(&got.as_str()) {
            return Err(SqlError::Expected { what: "value token".into(), got });
        }
        Ok(got)
    }

    fn colref(&mut self) -> Result<RawCol, SqlError> {
        if self.eat("*") {
            return Ok(RawCol { qual: None, name: "*".into() });
        }
        let first = self.word("column reference")?;
        if self.eat(".") {
            let name = self.word("column name")?;
            Ok(RawCol { qual: Some(first), name })
        } else {
            Ok(RawCol { qual: None, name: first })
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp, SqlError> {
        let got = self.next()?.to_owned();
        CmpOp::from_symbol(&got)
            .ok_or(SqlError::Expected { what: "comparison operator".into(), got })
    }

    /// `aggfn ( [distinct] colref )` or `[distinct] colref`.
    fn agg_col(&mut self, allow_distinct: bool) -> Result<(AggKind, bool, RawCol), SqlError> {
        if let Some(tok) = self.peek() {
            if let Some(agg) = AggKind::from_sql_name(tok) {
                self.pos += 1;
                self.expect("(")?;
                let distinct = allow_distinct && self.eat("distinct");
                let col = self.colref()?;
                self.expect(")")?;
                return Ok((agg, distinct, col));
            }
        }
        let distinct = allow_distinct && self.eat("distinct");
        let col = self.colref()?;
        Ok((AggKind::None, distinct, col))
    }

    fn query(&mut self, depth: usize) -> Result<RawQuery, SqlError> {
        self.expect("select")?;
        let mut select = Vec::new();
        loop {
            let (agg, distinct, col) = self.agg_col(true)?;
            select.push(RawItem { agg, distinct, col });
            if !self.eat(",") {
                break;
            }
        }
        self.expect("from")?;
        let mut from = Vec::new();
        loop {
            let name = self.word("table name")?;
            let alias = if self.eat("as") { Some(self.word("table alias")?) } else { None };
            from.push((name, alias));
            if !self.eat(",") {
                break;
            }
        }
        let mut where_ = Vec::new();
        if self.eat("where") {
            loop {
                let col = self.colref()?;
                let op = self.cmp_op()?;
                let value = self.value()?;
                where_.push(RawPred { col, op, value });
                if !self.eat("and") {
                    break;
                }
            }
        }
        let group = if self.eat("group") {
            self.expect("by")?;
            let col = self.colref()?;
            let having = if self.eat("having") {
                let (agg, _, hcol) = self.agg_col(false)?;
                let op = self.cmp_op()?;
                let value = self.value()?;
                Some(RawHaving { agg, col: hcol, op, value })
            } else {
                None
            };
            Some((col, having))
        } else {
            None
        };
        let order = if self.eat("order") {
            self.expect("by")?;
            let (agg, _, col) = self.agg_col(false)?;
            let desc = if self.eat("desc") {
                true
            } else {
                self.eat("asc");
                false
            };
            let limit = if self.eat("limit") { Some(self.value()?) } else { None };
            Some((agg, col, desc, limit))
        } else {
            None
        };
        let ieu_op = match self.peek() {
            Some("intersect") => Some(IeuOp::Intersect),
            Some("except") => Some(IeuOp::Except),
            Some("union") => Some(IeuOp::Union),
            _ => None,
        };
        let ieu = match ieu_op {
            Some(op) => {
                if depth > 0 {
                    return Err(SqlError::Unsupported(
                        "set operation nesting beyond depth 1".to_owned(),
                    ));
                }
                self.pos += 1;
                Some((op, Box::new(self.query(depth + 1)?)))
            }
            None => None,
        };
        Ok(RawQuery { select, from, where_, group, order, ieu })
    }
}

struct Scope<'a> {
    schema: &'a Schema,
    tables: Vec<TableId>,
    aliases: BTreeMap<String, TableId>,
}

impl<'a> Scope<'a> {
    fn new(schema: &'a Schema, from: &[(String, Option<String>)]) -> Result<Scope<'a>, SqlError> {
        let mut tables = Vec::new();
        let mut aliases = BTreeMap::new();
        for (i, (name, alias)) in from.iter().enumerate() {
            let tid = schema
                .find_table(name)
                .ok_or_else(|| SqlError::UnknownTable(name.clone()))?;
            tables.push(tid);
            aliases.insert(format!("t{}", i + 1), tid);
            if let Some(a) = alias {
                aliases.insert(a.clone(), tid);
            }
        }
        Ok(Scope { schema, tables, aliases })
    }

    fn resolve(&self, raw: &RawCol) -> Result<ColumnId, SqlError> {
        if raw.name == "*" {
            return Ok(Schema::STAR);
        }
        if let Some(qual) = &raw.qual {
            let tid = match self.aliases.get(qual) {
                Some(t) => *t,
                None => self
                    .schema
                    .find_table(qual)
                    .ok_or_else(|| SqlError::UnknownTable(qual.clone()))?,
            };
            return self
                .schema
                .columns()
                .iter()
                .position(|c| c.table == Some(tid) && c.name == raw.name)
                .map(ColumnId)
                .ok_or_else(|| SqlError::UnknownColumn(format!("{qual}.{}", raw.name)));
        }
        let mut candidates: Vec<ColumnId> = Vec::new();
        for tid in &self.tables {
            for (i, c) in self.schema.columns().iter().enumerate() {
                if c.table == Some(*tid) && c.name == raw.name && !candidates.contains(&ColumnId(i))
                {
                    candidates.push(ColumnId(i));
                }
            }
        }
        match candidates.len() {
            0 => Err(SqlError::UnknownColumn(raw.name.clone())),
            1 => Ok(candidates[0]),
            _ => Err(SqlError::AmbiguousColumn {
                name: raw.name.clone(),
                candidates: candidates
                    .into_iter()
                    .map(|c| self.schema.qualified_column(c))
                    .collect(),
            }),
        }
    }
}

fn resolve_query(raw: &RawQuery, schema: &Schema) -> Result<QuerySpec, SqlError> {
    let scope = Scope::new(schema, &raw.from)?;
    Ok(QuerySpec {
        select: raw
            .select
            .iter()
            .map(|item| {
                Ok(SelectItem {
                    agg: item.agg,
                    distinct: item.distinct,
                    col: scope.resolve(&item.col)?,
                })
            })
            .collect::<Result<_, SqlError>>()?,
        where_: raw
            .where_
            .iter()
            .map(|p| Ok(Pred { col: scope.resolve(&p.col)?, op: p.op, value: p.value.clone() }))
            .collect::<Result<_, SqlError>>()?,
        group: match &raw.group {
            None => None,
            Some((col, having)) => Some(GroupBy {
                col: scope.resolve(col)?,
                having: match having {
                    None => None,
                    Some(h) => Some(Having {
                        agg: h.agg,
                        col: scope.resolve(&h.col)?,
                        op: h.op,
                        value: h.value.clone(),
                    }),
                },
            }),
        },
        order: match &raw.order {
            None => None,
            Some((agg, col, desc, limit)) => Some(OrderBy {
                agg: *agg,
                col: scope.resolve(col)?,
                desc: *desc,
                limit: limit.clone(),
            }),
        },
        ieu: match &raw.ieu {
            None => None,
            Some((op, body)) => Some((*op, Box::new(resolve_query(body, schema)?))),
        },
        from: scope.tables,
    })
}

/// Parse SQL text in the supported subset into a query spec.
pub fn parse_spec(sql: &str, schema: &Schema) -> Result<QuerySpec, SqlError> {
    let mut p = Parser { toks: tokenize_sql(sql), pos: 0 };
    let raw = p.query(0)?;
    if let Some(tok) = p.peek() {
        return Err(SqlError::TrailingTokens(tok.to_owned()));
    }
    let spec = resolve_query(&raw, schema)?;
    validate_spec(&spec, true)?;
    Ok(spec)
}

/// Parse SQL text into a derivation tree over `g`.
pub fn parse_sql(
    sql: &str,
    schema: &Schema,
    sg: &SqlGrammar,
    g: &Grammar,
) -> Result<Ast, SqlError> {
    build_ast(&parse_spec(sql, schema)?, sg, g, schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{oracle_actions, replay};
    use crate::grammar::load_default;

    fn toy_schema() -> Schema {
        let mut s = Schema::new("toy");
        let cars = s.add_table("cars");
        let makers = s.add_table("makers");
        let t = s.add_table("t");
        s.add_column(cars, "model");
        s.add_column(cars, "year");
        s.add_column(cars, "name");
        s.add_column(makers, "name");
        s.add_column(makers, "country");
        s.add_column(t, "c");
        s
    }

    fn setup() -> (Grammar, SqlGrammar, Schema) {
        let g = load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        (g, sg, toy_schema())
    }

    #[test]
    fn minimal_query_has_four_none_clauses() {
        let (g, sg, schema) = setup();
        let ast = parse_sql("select model from cars", &schema, &sg, &g).unwrap();
        let spec = ast_to_spec(&ast, &sg, &g).unwrap();
        assert_eq!(spec.select.len(), 1);
        assert!(spec.where_.is_empty());
        assert!(spec.group.is_none());
        assert!(spec.order.is_none());
        assert!(spec.ieu.is_none());
        assert_eq!(spec.from.len(), 1);
        assert_eq!(render_spec(&spec, &schema), "select T1.model from cars as T1");
    }

    #[test]
    fn group_having_uses_combined_rule() {
        let (g, sg, schema) = setup();
        let sql = "select count(*) from t group by c having count(*) > 2";
        let ast = parse_sql(sql, &schema, &sg, &g).unwrap();
        let group = ast.clause_root_node(&g, ClauseKind::Group).unwrap();
        match &ast.node(group).content {
            NodeContent::Rule { rule, .. } => assert_eq!(*rule, sg.group_having),
            other => panic!("unexpected content {other:?}"),
        }
        assert_eq!(
            render_sql(&ast, &sg, &g, &schema).unwrap(),
            "select count(*) from t as T1 group by T1.c having count(*) > 2"
        );
    }

    #[test]
    fn render_parse_round_trip_is_canonical_fixed_point() {
        let (g, sg, schema) = setup();
        let inputs = [
            "select model from cars",
            "select distinct model, count(*) from cars where year >= 1980 and name != emma",
            "select max(year) from cars group by model having count(*) > 2 order by max(year) desc limit 3",
            "select model from cars union select name from makers",
            "select cars.name, makers.name from cars, makers where country = japan",
        ];
        for sql in inputs {
            let canon = render_sql(&parse_sql(sql, &schema, &sg, &g).unwrap(), &sg, &g, &schema)
                .unwrap();
            let again =
                render_sql(&parse_sql(&canon, &schema, &sg, &g).unwrap(), &sg, &g, &schema)
                    .unwrap();
            assert_eq!(canon, again, "not a fixed point for `{sql}`");
        }
    }

    #[test]
    fn oracle_round_trip_through_actions() {
        let (g, sg, schema) = setup();
        let sql = "select model from cars where year > 1980 group by model \
                   order by count(*) desc limit 2 intersect \
                   select name from makers where country = japan";
        let ast = parse_sql(sql, &schema, &sg, &g).unwrap();
        let question: Vec<String> =
            ["what", "1980", "japan", "2"].iter().map(|s| s.to_string()).collect();
        let trace = oracle_actions(&ast, &g, &question).unwrap();
        let rebuilt = replay(&g, &schema, &question, &trace.actions).unwrap();
        assert!(ast.structurally_eq(&rebuilt));
        assert_eq!(
            render_sql(&rebuilt, &sg, &g, &schema).unwrap(),
            render_sql(&ast, &sg, &g, &schema).unwrap()
        );
    }

    #[test]
    fn nesting_depth_two_unsupported() {
        let (g, sg, schema) = setup();
        let sql = "select model from cars union select name from makers union select c from t";
        match parse_sql(sql, &schema, &sg, &g) {
            Err(SqlError::Unsupported(what)) => assert!(what.contains("nesting")),
            other => panic!("expected unsupported construct, got {other:?}"),
        }
    }

    #[test]
    fn ambiguous_bare_column_reports_candidates() {
        let (g, sg, schema) = setup();
        let sql = "select name from cars, makers";
        match parse_sql(sql, &schema, &sg, &g) {
            Err(SqlError::AmbiguousColumn { name, candidates }) => {
                assert_eq!(name, "name");
                assert_eq!(candidates, ["cars.name", "makers.name"]);
            }
            other => panic!("expected ambiguity error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_names_rejected() {
        let (g, sg, schema) = setup();
        assert!(matches!(
            parse_sql("select zzz from cars", &schema, &sg, &g),
            Err(SqlError::UnknownColumn(_))
        ));
        assert!(matches!(
            parse_sql("select model from nowhere", &schema, &sg, &g),
            Err(SqlError::UnknownTable(_))
        ));
    }

    #[test]
    fn canonical_key_is_order_insensitive_where_it_should_be() {
        let (g, sg, schema) = setup();
        let key = |sql: &str| {
            let ast = parse_sql(sql, &schema, &sg, &g).unwrap();
            canonical_key(&ast_to_spec(&ast, &sg, &g).unwrap(), &schema)
        };
        // WHERE conjuncts as a multiset.
        assert_eq!(
            key("select model from cars where year > 1980 and name = emma"),
            key("select model from cars where name = emma and year > 1980"),
        );
        // SELECT items as a multiset.
        assert_eq!(
            key("select model, year from cars"),
            key("select year, model from cars"),
        );
        // LIMIT presence matters.
        assert_ne!(
            key("select model from cars order by year asc"),
            key("select model from cars order by year asc limit 1"),
        );
        // Direction matters.
        assert_ne!(
            key("select model from cars order by year asc"),
            key("select model from cars order by year desc"),
        );
        // Values matter.
        assert_ne!(
            key("select model from cars where year > 1980"),
            key("select model from cars where year > 1981"),
        );
    }

    #[test]
    fn aliased_and_bare_references_agree() {
        let (g, sg, schema) = setup();
        let a = parse_sql("select t1.model from cars as t1", &schema, &sg, &g).unwrap();
        let b = parse_sql("select model from cars", &schema, &sg, &g).unwrap();
        assert!(a.structurally_eq(&b));
    }
}

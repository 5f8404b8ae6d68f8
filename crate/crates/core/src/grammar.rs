//! SQL production-rule grammar: node types, rules, and the six-clause taxonomy.
//!
//! A grammar is loaded from a small text format (see [`Grammar::load`]) and is
//! immutable afterwards, so it can be shared read-only across any number of
//! concurrent decoders.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

/// Index of a [`NodeType`] within its [`Grammar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeTypeId(pub usize);

/// Index of a [`Rule`] within its [`Grammar`]. Ids are dense in `0..rule_count`
/// and assigned in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub usize);

/// What kind of action a node of this type receives during decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Expanded by `ApplyRule`.
    Nonterminal,
    /// Filled by `SelectColumn`.
    ColumnSlot,
    /// Filled by `SelectTable`.
    TableSlot,
    /// Filled by `SelectValue` (a copied question token).
    ValueSlot,
}

impl NodeKind {
    /// Number of kinds; the valid range of [`NodeKind::index`].
    pub const COUNT: usize = 4;

    /// Dense index, stable across runs (used as an embedding row).
    pub fn index(self) -> usize {
        match self {
            NodeKind::Nonterminal => 0,
            NodeKind::ColumnSlot => 1,
            NodeKind::TableSlot => 2,
            NodeKind::ValueSlot => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeType {
    pub name: String,
    pub kind: NodeKind,
}

/// One symbol on a rule's right-hand side. Keywords are terminals carried on
/// the rule; they never receive actions and never become tree nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Symbol {
    Node(NodeTypeId),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: NodeTypeId,
    pub rhs: Vec<Symbol>,
}

impl Rule {
    /// Node-type symbols of the right-hand side, in order. These become the
    /// children pushed onto the frontier when the rule is applied.
    pub fn child_types(&self) -> impl Iterator<Item = NodeTypeId> + '_ {
        self.rhs.iter().filter_map(|s| match s {
            Symbol::Node(id) => Some(*id),
            Symbol::Keyword(_) => None,
        })
    }

    /// True for the empty-rhs rule that makes an optional clause absent.
    pub fn is_none_rule(&self) -> bool {
        self.rhs.is_empty()
    }
}

/// The six top-level clause kinds, in predefined decoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClauseKind {
    Select,
    Where,
    Group,
    Order,
    Ieu,
    From,
}

impl ClauseKind {
    /// All six kinds in the predefined order (SELECT first, FROM last).
    pub const ALL: [ClauseKind; 6] = [
        ClauseKind::Select,
        ClauseKind::Where,
        ClauseKind::Group,
        ClauseKind::Order,
        ClauseKind::Ieu,
        ClauseKind::From,
    ];

    pub fn index(self) -> usize {
        match self {
            ClauseKind::Select => 0,
            ClauseKind::Where => 1,
            ClauseKind::Group => 2,
            ClauseKind::Order => 3,
            ClauseKind::Ieu => 4,
            ClauseKind::From => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClauseKind::Select => "SELECT",
            ClauseKind::Where => "WHERE",
            ClauseKind::Group => "GROUP",
            ClauseKind::Order => "ORDER",
            ClauseKind::Ieu => "IEU",
            ClauseKind::From => "FROM",
        }
    }

    pub fn from_name(s: &str) -> Option<ClauseKind> {
        ClauseKind::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// Clauses that must provide a None rule (SELECT and FROM are mandatory).
    pub fn is_optional(self) -> bool {
        !matches!(self, ClauseKind::Select | ClauseKind::From)
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarError {
    MissingRoot,
    MissingClauseRoot(ClauseKind),
    MissingNoneRule(ClauseKind),
    DuplicateRule { line: usize, rule: String },
    DuplicateDeclaration { name: String },
    UnreachableNode { name: String },
    UndeclaredSymbol { line: usize, name: String },
    SlotHasRules { name: String },
    UnknownNode { name: String },
    NotANonterminal { name: String },
    ClauseRootNotUnderRoot(ClauseKind),
    AmbiguousClause { name: String, first: ClauseKind, second: ClauseKind },
    BadLine { line: usize, text: String },
}

impl fmt::Display for GrammarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarError::MissingRoot => write!(f, "missing root"),
            GrammarError::MissingClauseRoot(k) => write!(f, "missing clause root for {k}"),
            GrammarError::MissingNoneRule(k) => {
                write!(f, "optional clause {k} has no None rule (empty right-hand side)")
            }
            GrammarError::DuplicateRule { line, rule } => {
                write!(f, "line {line}: duplicate rule `{rule}`")
            }
            GrammarError::DuplicateDeclaration { name } => {
                write!(f, "symbol `{name}` declared more than once")
            }
            GrammarError::UnreachableNode { name } => {
                write!(f, "node type `{name}` is unreachable from the root")
            }
            GrammarError::UndeclaredSymbol { line, name } => {
                write!(f, "line {line}: symbol `{name}` is neither a nonterminal, a declared slot, nor an ALL-CAPS keyword")
            }
            GrammarError::SlotHasRules { name } => {
                write!(f, "slot node type `{name}` must not have expansion rules")
            }
            GrammarError::UnknownNode { name } => write!(f, "unknown node type `{name}`"),
            GrammarError::NotANonterminal { name } => {
                write!(f, "node type `{name}` is not a nonterminal")
            }
            GrammarError::ClauseRootNotUnderRoot(k) => {
                write!(f, "clause root for {k} is not reachable from the root in one step")
            }
            GrammarError::AmbiguousClause { name, first, second } => {
                write!(f, "node type `{name}` is reachable from both {first} and {second}")
            }
            GrammarError::BadLine { line, text } => write!(f, "line {line}: cannot parse `{text}`"),
        }
    }
}

impl core::error::Error for GrammarError {}

/// A validated, immutable production-rule grammar.
#[derive(Debug, Clone)]
pub struct Grammar {
    node_types: Vec<NodeType>,
    rules: Vec<Rule>,
    root: NodeTypeId,
    clause_roots: [NodeTypeId; 6],
    by_name: BTreeMap<String, NodeTypeId>,
    rules_by_lhs: Vec<Vec<RuleId>>,
    clause_map: Vec<Option<ClauseKind>>,
}

impl Grammar {
    /// Parse and validate a grammar description.
    ///
    /// Format: `#` starts a comment; `@root name` and `@clause KIND name`
    /// declare the root and the six clause roots; `@columns`/`@tables`/
    /// `@values` declare slot node types; every other non-blank line is a
    /// rule `LHS -> SYM SYM ...` (empty right-hand side = None rule).
    /// ALL-CAPS symbols that never appear as a left-hand side are keywords.
    pub fn load(text: &str) -> Result<Grammar, GrammarError> {
        let mut root_name: Option<String> = None;
        let mut clause_decls: Vec<(ClauseKind, String)> = Vec::new();
        let mut slot_decls: Vec<(String, NodeKind)> = Vec::new();
        let mut rule_lines: Vec<(usize, String, Vec<String>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('@') {
                let mut parts = rest.split_whitespace();
                let directive = parts.next().unwrap_or("");
                match directive {
                    "root" => match parts.next() {
                        Some(name) if parts.next().is_none() => root_name = Some(name.to_string()),
                        _ => {
                            return Err(GrammarError::BadLine { line: line_no, text: line.to_string() })
                        }
                    },
                    "clause" => {
                        let kind = parts.next().and_then(ClauseKind::from_name);
                        let name = parts.next();
                        match (kind, name) {
                            (Some(kind), Some(name)) if parts.next().is_none() => {
                                clause_decls.push((kind, name.to_string()));
                            }
                            _ => {
                                return Err(GrammarError::BadLine {
                                    line: line_no,
                                    text: line.to_string(),
                                })
                            }
                        }
                    }
                    "columns" | "tables" | "values" => {
                        let kind = match directive {
                            "columns" => NodeKind::ColumnSlot,
                            "tables" => NodeKind::TableSlot,
                            _ => NodeKind::ValueSlot,
                        };
                        for name in parts {
                            slot_decls.push((name.to_string(), kind));
                        }
                    }
                    _ => {
                        return Err(GrammarError::BadLine { line: line_no, text: line.to_string() })
                    }
                }
                continue;
            }
            let (lhs, rhs) = match line.split_once("->") {
                Some((l, r)) => (l.trim(), r.trim()),
                None => {
                    return Err(GrammarError::BadLine { line: line_no, text: line.to_string() })
                }
            };
            if lhs.is_empty() || lhs.split_whitespace().count() != 1 {
                return Err(GrammarError::BadLine { line: line_no, text: line.to_string() });
            }
            let rhs_syms: Vec<String> = rhs.split_whitespace().map(|s| s.to_string()).collect();
            rule_lines.push((line_no, lhs.to_string(), rhs_syms));
        }

        let root_name = root_name.ok_or(GrammarError::MissingRoot)?;

        // Nonterminals in order of first appearance as a left-hand side,
        // then the declared slot types. This makes ids stable under
        // serialize-then-load.
        let mut node_types: Vec<NodeType> = Vec::new();
        let mut by_name: BTreeMap<String, NodeTypeId> = BTreeMap::new();
        for (_, lhs, _) in &rule_lines {
            if !by_name.contains_key(lhs) {
                let id = NodeTypeId(node_types.len());
                node_types.push(NodeType { name: lhs.clone(), kind: NodeKind::Nonterminal });
                by_name.insert(lhs.clone(), id);
            }
        }
        for (name, kind) in &slot_decls {
            if let Some(existing) = by_name.get(name) {
                if node_types[existing.0].kind == NodeKind::Nonterminal {
                    return Err(GrammarError::SlotHasRules { name: name.clone() });
                }
                return Err(GrammarError::DuplicateDeclaration { name: name.clone() });
            }
            let id = NodeTypeId(node_types.len());
            node_types.push(NodeType { name: name.clone(), kind: *kind });
            by_name.insert(name.clone(), id);
        }

        let mut rules: Vec<Rule> = Vec::new();
        let mut seen_rules: BTreeMap<(usize, Vec<String>), ()> = BTreeMap::new();
        for (line_no, lhs, rhs_names) in &rule_lines {
            let lhs_id = by_name[lhs];
            let key = (lhs_id.0, rhs_names.clone());
            if seen_rules.insert(key, ()).is_some() {
                return Err(GrammarError::DuplicateRule {
                    line: *line_no,
                    rule: format!("{} -> {}", lhs, rhs_names.join(" ")),
                });
            }
            let mut rhs = Vec::with_capacity(rhs_names.len());
            for name in rhs_names {
                if let Some(id) = by_name.get(name) {
                    rhs.push(Symbol::Node(*id));
                } else if is_keyword_name(name) {
                    rhs.push(Symbol::Keyword(name.clone()));
                } else {
                    return Err(GrammarError::UndeclaredSymbol {
                        line: *line_no,
                        name: name.clone(),
                    });
                }
            }
            rules.push(Rule { id: RuleId(rules.len()), lhs: lhs_id, rhs });
        }

        let root = *by_name.get(&root_name).ok_or(GrammarError::MissingRoot)?;

        let mut clause_roots: [Option<NodeTypeId>; 6] = [None; 6];
        for (kind, name) in &clause_decls {
            let id = *by_name
                .get(name)
                .ok_or(GrammarError::MissingClauseRoot(*kind))?;
            if clause_roots[kind.index()].is_some() {
                return Err(GrammarError::DuplicateDeclaration { name: name.clone() });
            }
            clause_roots[kind.index()] = Some(id);
        }
        let mut roots = [NodeTypeId(0); 6];
        for kind in ClauseKind::ALL {
            roots[kind.index()] =
                clause_roots[kind.index()].ok_or(GrammarError::MissingClauseRoot(kind))?;
        }

        let mut rules_by_lhs: Vec<Vec<RuleId>> = vec![Vec::new(); node_types.len()];
        for rule in &rules {
            rules_by_lhs[rule.lhs.0].push(rule.id);
        }

        let g = Grammar {
            node_types,
            rules,
            root,
            clause_roots: roots,
            by_name,
            rules_by_lhs,
            clause_map: Vec::new(),
        };
        g.validate()
    }

    fn validate(mut self) -> Result<Grammar, GrammarError> {
        // Clause roots sit directly under the root.
        for kind in ClauseKind::ALL {
            let root_children: Vec<NodeTypeId> = self.rules_by_lhs[self.root.0]
                .iter()
                .flat_map(|rid| self.rules[rid.0].child_types().collect::<Vec<_>>())
                .collect();
            if !root_children.contains(&self.clause_root(kind)) {
                return Err(GrammarError::ClauseRootNotUnderRoot(kind));
            }
        }

        // Optional clauses carry a None rule.
        for kind in ClauseKind::ALL {
            if kind.is_optional() {
                let has_none = self.rules_by_lhs[self.clause_root(kind).0]
                    .iter()
                    .any(|rid| self.rules[rid.0].is_none_rule());
                if !has_none {
                    return Err(GrammarError::MissingNoneRule(kind));
                }
            }
        }

        // Reachability from the root.
        let mut reached = vec![false; self.node_types.len()];
        let mut stack = vec![self.root];
        reached[self.root.0] = true;
        while let Some(id) = stack.pop() {
            for rid in &self.rules_by_lhs[id.0] {
                for child in self.rules[rid.0].child_types() {
                    if !reached[child.0] {
                        reached[child.0] = true;
                        stack.push(child);
                    }
                }
            }
        }
        if let Some(pos) = reached.iter().position(|r| !r) {
            return Err(GrammarError::UnreachableNode {
                name: self.node_types[pos].name.clone(),
            });
        }

        // Assign each non-root node type to the unique clause root that
        // dominates it, walking from each clause root without passing
        // through another clause root.
        let mut clause_map: Vec<Option<ClauseKind>> = vec![None; self.node_types.len()];
        for kind in ClauseKind::ALL {
            clause_map[self.clause_root(kind).0] = Some(kind);
        }
        for kind in ClauseKind::ALL {
            let mut stack = vec![self.clause_root(kind)];
            while let Some(id) = stack.pop() {
                for rid in &self.rules_by_lhs[id.0] {
                    for child in self.rules[rid.0].child_types() {
                        if self.clause_roots.contains(&child) || child == self.root {
                            continue;
                        }
                        match clause_map[child.0] {
                            None => {
                                clause_map[child.0] = Some(kind);
                                stack.push(child);
                            }
                            Some(existing) if existing == kind => {}
                            Some(existing) => {
                                return Err(GrammarError::AmbiguousClause {
                                    name: self.node_types[child.0].name.clone(),
                                    first: existing,
                                    second: kind,
                                });
                            }
                        }
                    }
                }
            }
        }
        self.clause_map = clause_map;
        Ok(self)
    }

    pub fn root(&self) -> NodeTypeId {
        self.root
    }

    pub fn clause_root(&self, kind: ClauseKind) -> NodeTypeId {
        self.clause_roots[kind.index()]
    }

    pub fn node_type(&self, id: NodeTypeId) -> &NodeType {
        &self.node_types[id.0]
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0]
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn lookup(&self, name: &str) -> Option<NodeTypeId> {
        self.by_name.get(name).copied()
    }

    /// Look up a node type by name, failing loudly for callers that require it.
    pub fn expect(&self, name: &str) -> Result<NodeTypeId, GrammarError> {
        self.lookup(name).ok_or_else(|| GrammarError::UnknownNode { name: name.to_string() })
    }

    /// All rules expanding `nt`, in rule-id order.
    pub fn rules_for(&self, nt: NodeTypeId) -> Result<&[RuleId], GrammarError> {
        let ty = self
            .node_types
            .get(nt.0)
            .ok_or_else(|| GrammarError::UnknownNode { name: format!("#{}", nt.0) })?;
        if ty.kind != NodeKind::Nonterminal {
            return Err(GrammarError::NotANonterminal { name: ty.name.clone() });
        }
        Ok(&self.rules_by_lhs[nt.0])
    }

    /// The clause root dominating `node`, or `None` for the query root.
    pub fn clause_of(&self, node: NodeTypeId) -> Option<ClauseKind> {
        self.clause_map.get(node.0).copied().flatten()
    }

    /// The empty-rhs rule of an optional clause.
    pub fn none_rule(&self, kind: ClauseKind) -> Option<RuleId> {
        self.rules_by_lhs[self.clause_root(kind).0]
            .iter()
            .copied()
            .find(|rid| self.rules[rid.0].is_none_rule())
    }

    /// Render the grammar back to its file format. Loading the result yields
    /// identical rule ids and right-hand sides.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("@root {}\n", self.node_types[self.root.0].name));
        for kind in ClauseKind::ALL {
            out.push_str(&format!(
                "@clause {} {}\n",
                kind.name(),
                self.node_types[self.clause_root(kind).0].name
            ));
        }
        for (directive, kind) in [
            ("columns", NodeKind::ColumnSlot),
            ("tables", NodeKind::TableSlot),
            ("values", NodeKind::ValueSlot),
        ] {
            let names: Vec<&str> = self
                .node_types
                .iter()
                .filter(|t| t.kind == kind)
                .map(|t| t.name.as_str())
                .collect();
            if !names.is_empty() {
                out.push_str(&format!("@{} {}\n", directive, names.join(" ")));
            }
        }
        for rule in &self.rules {
            out.push_str(&self.rule_text(rule.id));
            out.push('\n');
        }
        out
    }

    /// Find a rule by its human-readable form, e.g. `agg -> agg_id val_unit`.
    /// The comparison is whitespace-normalized.
    pub fn find_rule(&self, text: &str) -> Option<RuleId> {
        let wanted: Vec<&str> = text.split_whitespace().collect();
        self.rules.iter().map(|r| r.id).find(|id| {
            let t = self.rule_text(*id);
            t.split_whitespace().collect::<Vec<&str>>() == wanted
        })
    }

    /// Human-readable rule form, e.g. `agg -> agg_id val_unit`.
    pub fn rule_text(&self, id: RuleId) -> String {
        let rule = &self.rules[id.0];
        let mut s = self.node_types[rule.lhs.0].name.clone();
        s.push_str(" ->");
        for sym in &rule.rhs {
            s.push(' ');
            match sym {
                Symbol::Node(id) => s.push_str(&self.node_types[id.0].name),
                Symbol::Keyword(k) => s.push_str(k),
            }
        }
        s
    }

    /// Stable FNV-1a fingerprint of the serialized grammar, used to pair
    /// checkpoints and cached oracles with the grammar they were built from.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.serialize().bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }
}

/// Load the grammar shipped with the crate. Panics only if the embedded file
/// is broken, which the test suite rules out.
pub fn load_default() -> Grammar {
    Grammar::load(crate::DEFAULT_GRAMMAR).expect("embedded grammar is valid")
}

fn is_keyword_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grammar_loads() {
        let g = load_default();
        assert_eq!(g.rule_count(), 63);
        assert_eq!(g.node_types().len(), 31);
    }

    #[test]
    fn where_row_has_cond_and_none() {
        let g = load_default();
        let where_root = g.clause_root(ClauseKind::Where);
        let rules = g.rules_for(where_root).unwrap();
        assert_eq!(rules.len(), 2);
        assert!(!g.rule(rules[0]).is_none_rule());
        assert!(g.rule(rules[1]).is_none_rule());
    }

    #[test]
    fn ieu_row_has_four_rules() {
        let g = load_default();
        let rules = g.rules_for(g.clause_root(ClauseKind::Ieu)).unwrap();
        assert_eq!(rules.len(), 4);
        let texts: Vec<String> = rules.iter().map(|r| g.rule_text(*r)).collect();
        assert_eq!(
            texts,
            [
                "ieu_clause -> INTERSECT body",
                "ieu_clause -> EXCEPT body",
                "ieu_clause -> UNION body",
                "ieu_clause ->",
            ]
        );
    }

    #[test]
    fn empty_spec_is_missing_root() {
        assert!(matches!(Grammar::load(""), Err(GrammarError::MissingRoot)));
    }

    #[test]
    fn rules_for_agg_includes_cited_rule() {
        let g = load_default();
        let agg = g.lookup("agg").unwrap();
        let texts: Vec<String> =
            g.rules_for(agg).unwrap().iter().map(|r| g.rule_text(*r)).collect();
        assert!(texts.contains(&"agg -> agg_id val_unit".to_string()));
    }

    #[test]
    fn rules_for_unknown_node_errors() {
        let g = load_default();
        assert!(g.rules_for(NodeTypeId(999)).is_err());
        let col_ref = g.lookup("col_ref").unwrap();
        assert!(matches!(g.rules_for(col_ref), Err(GrammarError::NotANonterminal { .. })));
    }

    #[test]
    fn clause_partition() {
        let g = load_default();
        assert_eq!(g.clause_of(g.lookup("agg").unwrap()), Some(ClauseKind::Select));
        assert_eq!(g.clause_of(g.lookup("order_item").unwrap()), Some(ClauseKind::Order));
        assert_eq!(g.clause_of(g.lookup("body").unwrap()), Some(ClauseKind::Ieu));
        assert_eq!(g.clause_of(g.root()), None);
        for (idx, _) in g.node_types().iter().enumerate() {
            let id = NodeTypeId(idx);
            if id != g.root() {
                assert!(g.clause_of(id).is_some(), "node {idx} has no clause");
            }
        }
    }

    #[test]
    fn every_nonterminal_has_rules_and_optionals_have_none() {
        let g = load_default();
        for (idx, ty) in g.node_types().iter().enumerate() {
            if ty.kind == NodeKind::Nonterminal {
                assert!(!g.rules_for(NodeTypeId(idx)).unwrap().is_empty(), "{}", ty.name);
            }
        }
        for kind in ClauseKind::ALL {
            if kind.is_optional() {
                assert!(g.none_rule(kind).is_some());
            }
        }
    }

    #[test]
    fn serialize_round_trip_is_identity() {
        let g = load_default();
        let g2 = Grammar::load(&g.serialize()).unwrap();
        assert_eq!(g.rule_count(), g2.rule_count());
        for (a, b) in g.rules().iter().zip(g2.rules()) {
            assert_eq!(a.id, b.id);
            assert_eq!(g.rule_text(a.id), g2.rule_text(b.id));
        }
        assert_eq!(g.fingerprint(), g2.fingerprint());
    }

    #[test]
    fn duplicate_rule_rejected() {
        let text = "@root q\n@clause SELECT s\n@clause WHERE w\n@clause GROUP g\n\
                    @clause ORDER o\n@clause IEU i\n@clause FROM f\n\
                    q -> s w g o i f\ns -> A\ns -> A\nw ->\ng ->\no ->\ni ->\nf -> B\n";
        assert!(matches!(Grammar::load(text), Err(GrammarError::DuplicateRule { .. })));
    }

    #[test]
    fn missing_none_rule_rejected() {
        let text = "@root q\n@clause SELECT s\n@clause WHERE w\n@clause GROUP g\n\
                    @clause ORDER o\n@clause IEU i\n@clause FROM f\n\
                    q -> s w g o i f\ns -> A\nw -> C\ng ->\no ->\ni ->\nf -> B\nC -> D\n";
        // `w` has a rule but no empty alternative.
        let r = Grammar::load(text);
        assert!(
            matches!(r, Err(GrammarError::MissingNoneRule(ClauseKind::Where)))
                || matches!(r, Err(GrammarError::BadLine { .. })),
            "{r:?}"
        );
    }

    #[test]
    fn unreachable_node_rejected() {
        let text = "@root q\n@clause SELECT s\n@clause WHERE w\n@clause GROUP g\n\
                    @clause ORDER o\n@clause IEU i\n@clause FROM f\n\
                    q -> s w g o i f\ns -> A\nw ->\ng ->\no ->\ni ->\nf -> B\nzzz -> A\n";
        assert!(matches!(Grammar::load(text), Err(GrammarError::UnreachableNode { .. })));
    }

    #[test]
    fn missing_clause_root_rejected() {
        let text = "@root q\nq -> A\n";
        assert!(matches!(
            Grammar::load(text),
            Err(GrammarError::MissingClauseRoot(ClauseKind::Select))
        ));
    }
}

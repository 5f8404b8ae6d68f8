//! Clause-level alignment acquisition: string-match token linking, minimal
//! question segments per clause, and the alignment prior P_align.
//!
//! The matcher is deliberately simple and fully deterministic: lowercase
//! tokens, underscore-split element names, longest n-gram match first,
//! leftmost occurrence on ties. A clause's segment is the shortest
//! contiguous token span containing every linked token of the clause's
//! schema elements and condition values; clauses with nothing linked — and
//! all clauses of a pair with no links at all — fall back to the whole
//! question.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use crate::ast::{Ast, NodeContent, Span};
use crate::grammar::{ClauseKind, Grammar};
use crate::schema::{mention_words, ColumnId, Schema, TableId};

/// Shared question tokenizer: lowercase, whitespace-separated words, with
/// punctuation characters split off as single-character tokens.
pub fn tokenize_question(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
        } else if c.is_alphanumeric() || c == '_' {
            for lc in c.to_lowercase() {
                word.push(lc);
            }
        } else {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// A schema element or condition value occurring in a clause.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElementRef {
    Column(ColumnId),
    Table(TableId),
    Value(String),
}

impl ElementRef {
    pub fn describe(&self, schema: &Schema) -> String {
        match self {
            ElementRef::Column(c) => schema.qualified_column(*c),
            ElementRef::Table(t) => schema.table(*t).name.clone(),
            ElementRef::Value(v) => v.clone(),
        }
    }
}

/// One element of one clause with its linked question-token span, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementLink {
    pub clause: ClauseKind,
    pub element: ElementRef,
    pub span: Option<Span>,
}

/// Token-level alignment of a question/AST pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenAlignment {
    pub links: Vec<ElementLink>,
}

impl TokenAlignment {
    pub fn has_any_link(&self) -> bool {
        self.links.iter().any(|l| l.span.is_some())
    }

    /// Flat (token index, link) view of all linked tokens.
    pub fn token_links(&self) -> Vec<(usize, &ElementLink)> {
        let mut out = Vec::new();
        for link in &self.links {
            if let Some(span) = link.span {
                for tok in span.start..span.end {
                    out.push((tok, link));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Span(Span),
    /// No linked element; the clause aligns to the whole question.
    WholeQuestion,
}

/// The question segment a clause aligns to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClauseSegment {
    pub clause: ClauseKind,
    pub kind: SegmentKind,
}

impl ClauseSegment {
    pub fn is_whole(&self) -> bool {
        matches!(self.kind, SegmentKind::WholeQuestion)
    }

    /// The concrete token span, resolving the whole-question marker.
    pub fn span(&self, question_len: usize) -> Span {
        match self.kind {
            SegmentKind::Span(s) => s,
            SegmentKind::WholeQuestion => Span { start: 0, end: question_len },
        }
    }

    pub fn len(&self, question_len: usize) -> usize {
        self.span(question_len).len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignError {
    EmptyQuestion,
    EmptyCorpus,
}

impl fmt::Display for AlignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlignError::EmptyQuestion => write!(f, "question has no tokens"),
            AlignError::EmptyCorpus => write!(f, "no pairs to analyze"),
        }
    }
}

impl core::error::Error for AlignError {}

/// Longest-n-gram-first, leftmost-on-tie match of an element's name words
/// against the question.
///
/// This is the single string matcher of the toolkit: clause alignment and
/// the encoder's schema-linking feature both call it, so a column counts as
/// "mentioned" the same way everywhere.
pub fn link_ngram(question: &[String], name_words: &[&str]) -> Option<Span> {
    if name_words.is_empty() || question.is_empty() {
        return None;
    }
    let max_n = name_words.len().min(question.len());
    for n in (1..=max_n).rev() {
        let mut best: Option<usize> = None;
        for gram_start in 0..=(name_words.len() - n) {
            let gram = &name_words[gram_start..gram_start + n];
            for qpos in 0..=(question.len() - n) {
                if question[qpos..qpos + n].iter().map(String::as_str).eq(gram.iter().copied()) {
                    best = Some(best.map_or(qpos, |b: usize| b.min(qpos)));
                    break; // leftmost for this gram; keep scanning other grams
                }
            }
        }
        if let Some(start) = best {
            return Some(Span { start, end: start + n });
        }
    }
    None
}

/// The distinct elements of each top-level clause subtree, in first-
/// appearance order. IEU body elements belong to the IEU clause.
fn clause_elements(ast: &Ast, g: &Grammar) -> [Vec<ElementRef>; 6] {
    let mut out: [Vec<ElementRef>; 6] = Default::default();
    for kind in ClauseKind::ALL {
        let Some(root) = ast.clause_root_node(g, kind) else { continue };
        let elems = &mut out[kind.index()];
        for id in ast.pre_order(root) {
            let element = match &ast.node(id).content {
                NodeContent::Column(c) => ElementRef::Column(*c),
                NodeContent::Table(t) => ElementRef::Table(*t),
                NodeContent::Value(v) => ElementRef::Value(v.clone()),
                _ => continue,
            };
            if !elems.contains(&element) {
                elems.push(element);
            }
        }
    }
    out
}

/// String-match token-level alignment between a question and a gold AST.
pub fn token_align(question: &[String], ast: &Ast, g: &Grammar, schema: &Schema) -> TokenAlignment {
    let mut links = Vec::new();
    for (idx, elements) in clause_elements(ast, g).iter().enumerate() {
        let clause = ClauseKind::ALL[idx];
        for element in elements {
            let span = match element {
                ElementRef::Column(c) => {
                    let col = schema.column(*c);
                    match col.table {
                        // `*` has no surface mention.
                        None => None,
                        Some(_) => link_ngram(question, &mention_words(&col.name)),
                    }
                }
                ElementRef::Table(t) => link_ngram(question, &mention_words(&schema.table(*t).name)),
                ElementRef::Value(v) => question
                    .iter()
                    .position(|tok| tok == v)
                    .map(|p| Span { start: p, end: p + 1 }),
            };
            links.push(ElementLink { clause, element: element.clone(), span });
        }
    }
    TokenAlignment { links }
}

/// Minimal per-clause segments. See the module docs for the fallback rules.
pub fn clause_segments(ta: &TokenAlignment) -> [ClauseSegment; 6] {
    let pair_has_links = ta.has_any_link();
    let mut out = [ClauseSegment { clause: ClauseKind::Select, kind: SegmentKind::WholeQuestion }; 6];
    for kind in ClauseKind::ALL {
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        for link in ta.links.iter().filter(|l| l.clause == kind) {
            if let Some(span) = link.span {
                lo = lo.min(span.start);
                hi = hi.max(span.end);
            }
        }
        let seg = if !pair_has_links || lo == usize::MAX {
            SegmentKind::WholeQuestion
        } else {
            SegmentKind::Span(Span { start: lo, end: hi })
        };
        out[kind.index()] = ClauseSegment { clause: kind, kind: seg };
    }
    out
}

/// The alignment prior row for one clause: `1/len(S)` inside the segment,
/// zero outside.
pub fn prior_distribution(seg: &ClauseSegment, question_len: usize) -> Vec<f64> {
    let span = seg.span(question_len);
    let mut row = vec![0.0; question_len];
    if !span.is_empty() {
        let p = 1.0 / span.len() as f64;
        for cell in &mut row[span.start..span.end] {
            *cell = p;
        }
    }
    row
}

/// Everything alignment-related for one question/AST pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAlignment {
    pub alignment: TokenAlignment,
    pub segments: [ClauseSegment; 6],
    pub question_len: usize,
}

impl PairAlignment {
    /// True when no element of the pair linked to any token (the pair-level
    /// whole-question fallback).
    pub fn is_fallback(&self) -> bool {
        !self.alignment.has_any_link()
    }

    pub fn segment(&self, kind: ClauseKind) -> &ClauseSegment {
        &self.segments[kind.index()]
    }

    /// The six prior rows, in predefined clause order.
    pub fn prior_rows(&self) -> [Vec<f64>; 6] {
        let mut out: [Vec<f64>; 6] = Default::default();
        for kind in ClauseKind::ALL {
            out[kind.index()] = prior_distribution(self.segment(kind), self.question_len);
        }
        out
    }
}

/// Compute alignment, segments, and priors for one pair.
pub fn align_pair(
    question: &[String],
    ast: &Ast,
    g: &Grammar,
    schema: &Schema,
) -> Result<PairAlignment, AlignError> {
    if question.is_empty() {
        return Err(AlignError::EmptyQuestion);
    }
    let alignment = token_align(question, ast, g, schema);
    let segments = clause_segments(&alignment);
    Ok(PairAlignment { alignment, segments, question_len: question.len() })
}

/// Per-clause segment statistics across a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClauseSegStats {
    /// Pairs where this clause got a proper (non-whole) segment.
    pub proper: usize,
    /// Pairs where this clause fell back to the whole question.
    pub whole: usize,
    /// Histogram of proper-segment lengths.
    pub len_hist: BTreeMap<usize, usize>,
}

/// Corpus-level alignment coverage report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentStats {
    pub pairs: usize,
    /// Pairs with no links at all (every clause whole-question).
    pub fallback_pairs: usize,
    pub per_clause: [ClauseSegStats; 6],
}

impl AlignmentStats {
    pub fn fallback_fraction(&self) -> f64 {
        self.fallback_pairs as f64 / self.pairs as f64
    }
}

pub fn alignment_stats(pairs: &[PairAlignment]) -> Result<AlignmentStats, AlignError> {
    if pairs.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    let mut stats = AlignmentStats {
        pairs: pairs.len(),
        fallback_pairs: 0,
        per_clause: Default::default(),
    };
    for pair in pairs {
        if pair.is_fallback() {
            stats.fallback_pairs += 1;
        }
        for kind in ClauseKind::ALL {
            let seg = pair.segment(kind);
            let slot = &mut stats.per_clause[kind.index()];
            if seg.is_whole() {
                slot.whole += 1;
            } else {
                slot.proper += 1;
                *slot.len_hist.entry(seg.len(pair.question_len)).or_insert(0) += 1;
            }
        }
    }
    Ok(stats)
}

/// Per-example alignment export: six prior rows (clause name then one
/// probability per token, comma-separated), a `links` marker line, then one
/// `token_index,clause,element` line per linked token.
pub fn export_alignment(pair: &PairAlignment, schema: &Schema) -> String {
    let mut out = String::new();
    let rows = pair.prior_rows();
    for kind in ClauseKind::ALL {
        out.push_str(kind.name());
        for p in &rows[kind.index()] {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out.push_str("links\n");
    for (tok, link) in pair.alignment.token_links() {
        out.push_str(&format!(
            "{tok},{},{}\n",
            link.clause.name(),
            link.element.describe(schema)
        ));
    }
    out
}

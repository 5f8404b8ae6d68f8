//! Seeded toy-corpus generator: synthetic schemas, questions, and gold SQL.
//!
//! The generator samples complete query specs over a small pool of generated
//! schemas, renders each spec to canonical SQL, and writes a templated
//! question that mentions every referenced schema element by name and quotes
//! every condition value verbatim as its own token. Prepared downstream, such
//! a corpus round-trips through the oracle with exact match 1.0 by
//! construction: the parse recovers the spec that was sampled, and every
//! copied value has a question token to point at.
//!
//! Sampling is driven entirely by a [`crate::rng::DetRng`] seeded from the
//! config, so equal configs produce byte-identical corpora. The clause
//! probabilities are tuned so that at corpus sizes in the hundreds every
//! grammar rule appears in at least 1% of examples (see
//! [`rule_presence`]); sizes of 1000 are used by the coverage tests.
//!
//! Two profiles are built in. `Mixed` draws from the full clause inventory,
//! set operations included. `Bench` is shaped for decode throughput
//! comparisons: set operations are off and WHERE is always present, so every
//! query carries at least three non-empty clauses.
//!
//! A configured fraction of examples is *paraphrased*: every schema mention
//! in the question is replaced by a synonym drawn from a vocabulary disjoint
//! from all schema names, so no element links and the pair falls back to
//! whole-question alignment. Because condition values always appear verbatim
//! in the question — and would link — paraphrased examples are sampled
//! value-free (no WHERE, no HAVING, no LIMIT). The paraphrased fraction is a
//! per-example coin flip at the configured rate: rate 0.0 yields exactly zero
//! fallback pairs, and at a few hundred examples the realized fallback
//! fraction lands within a few percent of the rate.
//!
//! Multi-table FROM clauses are only ever sampled along foreign-key paths:
//! each table after the first is joinable (via [`Schema::joinable`]) to a
//! table already chosen.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{Corpus, CorpusError, RawExample};
use crate::grammar::Grammar;
use crate::rng::DetRng;
use crate::schema::{ColumnId, Schema, TableId, ValueDomain};
use crate::sql::{
    render_spec, AggKind, CmpOp, GroupBy, Having, IeuOp, OrderBy, Pred, QuerySpec, SelectItem,
    SqlGrammar,
};

// ---------------------------------------------------------------------------
// Word inventories
//
// Three disjoint vocabularies: schema names, their question paraphrases, and
// the fixed template filler words. Disjointness is what makes paraphrased
// questions link-free and plain questions link-bearing, and the fallback
// tests below assert the consequence on every generated example.
// ---------------------------------------------------------------------------

struct ColEntry {
    name: &'static str,
    /// Question phrase for the column, name words space-joined.
    phrase: &'static str,
    /// Paraphrase phrase; shares no word with any schema name.
    para: &'static str,
    domain: ValueDomain,
}

struct TblEntry {
    name: &'static str,
    para: &'static str,
}

const COLS: &[ColEntry] = &[
    ColEntry { name: "year", phrase: "year", para: "vintage", domain: ValueDomain::Number },
    ColEntry { name: "price", phrase: "price", para: "fee", domain: ValueDomain::Number },
    ColEntry { name: "weight", phrase: "weight", para: "heft", domain: ValueDomain::Number },
    ColEntry { name: "speed", phrase: "speed", para: "pace", domain: ValueDomain::Number },
    ColEntry { name: "age", phrase: "age", para: "maturity", domain: ValueDomain::Number },
    ColEntry { name: "capacity", phrase: "capacity", para: "volume", domain: ValueDomain::Number },
    ColEntry { name: "rating", phrase: "rating", para: "acclaim", domain: ValueDomain::Number },
    ColEntry { name: "salary", phrase: "salary", para: "pay", domain: ValueDomain::Number },
    ColEntry {
        name: "population",
        phrase: "population",
        para: "headcount",
        domain: ValueDomain::Number,
    },
    ColEntry {
        name: "birth_year",
        phrase: "birth year",
        para: "origin era",
        domain: ValueDomain::Number,
    },
    ColEntry { name: "city", phrase: "city", para: "metropolis", domain: ValueDomain::Text },
    ColEntry { name: "color", phrase: "color", para: "shade", domain: ValueDomain::Text },
    ColEntry { name: "country", phrase: "country", para: "homeland", domain: ValueDomain::Text },
    ColEntry { name: "status", phrase: "status", para: "standing", domain: ValueDomain::Text },
    ColEntry { name: "category", phrase: "category", para: "genre", domain: ValueDomain::Text },
    ColEntry { name: "brand", phrase: "brand", para: "marque", domain: ValueDomain::Text },
];

const TABLES: &[TblEntry] = &[
    TblEntry { name: "cars", para: "automobiles" },
    TblEntry { name: "makers", para: "manufacturers" },
    TblEntry { name: "shops", para: "boutiques" },
    TblEntry { name: "people", para: "folks" },
    TblEntry { name: "orders", para: "purchases" },
    TblEntry { name: "films", para: "movies" },
    TblEntry { name: "teams", para: "squads" },
    TblEntry { name: "artists", para: "performers" },
];

const NUM_VALUES: &[&str] = &["10", "25", "77", "120", "350", "1980", "1995", "2004", "64000"];
const TEXT_VALUES: &[&str] =
    &["berlin", "paris", "tokyo", "lisbon", "red", "blue", "silver", "jazz", "rookie", "veteran"];
const LIMIT_VALUES: &[&str] = &["1", "2", "3", "5", "8"];

const AGGS: [AggKind; 6] =
    [AggKind::None, AggKind::Max, AggKind::Min, AggKind::Count, AggKind::Sum, AggKind::Avg];
const OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Gt, CmpOp::Lt, CmpOp::Ge, CmpOp::Le, CmpOp::Ne];
const IEU_OPS: [IeuOp; 3] = [IeuOp::Intersect, IeuOp::Except, IeuOp::Union];

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// Corpus shape preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenProfile {
    /// Full clause inventory, set operations included.
    Mixed,
    /// Throughput-benchmark shape: WHERE always present (so at least three
    /// clauses are non-empty in every query) and set operations off.
    Bench,
}

/// Generator configuration. Equal configs generate byte-identical corpora.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    /// Number of examples to generate.
    pub n: usize,
    /// Number of synthetic databases in the pool.
    pub num_dbs: usize,
    /// Fraction of examples whose schema mentions are paraphrased away,
    /// forcing whole-question fallback alignment. Must lie in `[0, 1]`.
    pub paraphrase_rate: f64,
    /// Largest SELECT arity to sample; must not exceed what the grammar
    /// offers.
    pub max_select_items: usize,
    /// Largest FROM table count to sample; must not exceed what the grammar
    /// offers.
    pub max_from_tables: usize,
    pub profile: GenProfile,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n: 100,
            num_dbs: 4,
            paraphrase_rate: 0.0,
            max_select_items: 4,
            max_from_tables: 3,
            profile: GenProfile::Mixed,
        }
    }
}

/// Generation failure.
#[derive(Debug, Clone, PartialEq)]
pub enum GenError {
    /// `n`, `num_dbs`, or a variant cap was zero.
    EmptyRequest { what: &'static str },
    /// The paraphrase rate is outside `[0, 1]`.
    BadRate { rate: f64 },
    /// The config asks for a clause variant the grammar does not offer
    /// (e.g. a SELECT arity beyond the largest arity rule).
    UnsupportedVariant { what: &'static str, requested: usize, available: usize },
    /// A generated example failed corpus preparation. Indicates a generator
    /// bug; generated corpora are constructed to prepare cleanly.
    Corpus(CorpusError),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::EmptyRequest { what } => write!(f, "{what} must be at least 1"),
            GenError::BadRate { rate } => {
                write!(f, "paraphrase rate {rate} is outside [0, 1]")
            }
            GenError::UnsupportedVariant { what, requested, available } => write!(
                f,
                "config requests {what} up to {requested}, but the grammar offers only {available}"
            ),
            GenError::Corpus(e) => write!(f, "generated example failed preparation: {e}"),
        }
    }
}

impl core::error::Error for GenError {}

impl From<CorpusError> for GenError {
    fn from(e: CorpusError) -> Self {
        GenError::Corpus(e)
    }
}

/// Raw generator output: the schema pool, the examples, and the per-example
/// ground truth of which ones were paraphrased (and will therefore fall back
/// to whole-question alignment once prepared).
#[derive(Debug, Clone)]
pub struct Generated {
    pub schemas: BTreeMap<String, Schema>,
    pub raws: Vec<RawExample>,
    pub paraphrased: Vec<bool>,
}

// ---------------------------------------------------------------------------
// Clause probabilities
// ---------------------------------------------------------------------------

struct Dist {
    select_arity: [f64; 4],
    /// Probability that a single-item SELECT is a bare `*` / `count(*)`.
    star_plain: f64,
    star_count: f64,
    /// Aggregate choice for SELECT items.
    agg: [f64; 6],
    distinct_p: f64,
    where_p: f64,
    conj: [f64; 3],
    group_p: f64,
    having_given_group: f64,
    /// Aggregate choice for HAVING and ORDER items.
    tail_agg: [f64; 6],
    order_p: f64,
    limit_given_order: f64,
    ieu_p: f64,
    from_arity: [f64; 3],
}

impl Dist {
    fn mixed() -> Dist {
        Dist {
            select_arity: [0.38, 0.30, 0.18, 0.14],
            star_plain: 0.06,
            star_count: 0.08,
            agg: [0.45, 0.11, 0.11, 0.11, 0.11, 0.11],
            distinct_p: 0.12,
            where_p: 0.62,
            conj: [0.55, 0.33, 0.12],
            group_p: 0.32,
            having_given_group: 0.45,
            tail_agg: [0.35, 0.13, 0.13, 0.13, 0.13, 0.13],
            order_p: 0.40,
            limit_given_order: 0.40,
            ieu_p: 0.20,
            from_arity: [0.70, 0.21, 0.09],
        }
    }

    fn bench() -> Dist {
        Dist {
            where_p: 1.0,
            conj: [0.50, 0.35, 0.15],
            group_p: 0.55,
            order_p: 0.75,
            ieu_p: 0.0,
            from_arity: [0.55, 0.30, 0.15],
            ..Dist::mixed()
        }
    }
}

/// Draws an index from unnormalized weights.
fn wpick(rng: &mut DetRng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.unit() * total;
    for (i, w) in weights.iter().enumerate() {
        r -= w;
        if r < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// Schema pool
// ---------------------------------------------------------------------------

fn build_schema(rng: &mut DetRng, name: &str) -> Schema {
    let mut schema = Schema::new(name);

    let mut table_order: Vec<usize> = (0..TABLES.len()).collect();
    rng.shuffle(&mut table_order);
    let mut col_order: Vec<usize> = (0..COLS.len()).collect();
    rng.shuffle(&mut col_order);
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    let draw = |taken: &mut BTreeSet<usize>, num_only: bool| -> usize {
        let pick = col_order
            .iter()
            .copied()
            .find(|i| {
                !taken.contains(i) && (!num_only || COLS[*i].domain == ValueDomain::Number)
            })
            .expect("column inventory is large enough for one database");
        taken.insert(pick);
        pick
    };

    // Three tables in a foreign-key chain: each table after the first holds
    // a reference column to its predecessor's id.
    let mut prev: Option<(usize, ColumnId)> = None;
    for k in 0..3 {
        let entry = &TABLES[table_order[k]];
        let t = schema.add_table(entry.name);
        let id = schema.add_column_tagged(t, "id", ValueDomain::Number);
        if let Some((prev_idx, prev_id)) = prev {
            let fk_name = format!("{}_id", TABLES[prev_idx].name);
            let fk = schema.add_column_tagged(t, &fk_name, ValueDomain::Number);
            schema.add_foreign_key(fk, prev_id);
        }
        // Content columns: one numeric plus one or two of any domain, all
        // distinct within the database.
        let first = draw(&mut taken, true);
        schema.add_column_tagged(t, COLS[first].name, COLS[first].domain);
        for _ in 0..1 + rng.below(2) {
            let c = draw(&mut taken, false);
            schema.add_column_tagged(t, COLS[c].name, COLS[c].domain);
        }
        prev = Some((table_order[k], id));
    }
    schema
}

/// Columns that carry real data: everything except `id` and the foreign-key
/// reference columns, which exist only to make joins well-founded.
fn content_columns(schema: &Schema, t: TableId) -> Vec<ColumnId> {
    schema
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.table == Some(t) && c.name != "id" && !c.name.ends_with("_id"))
        .map(|(i, _)| ColumnId(i))
        .collect()
}

/// Grows a FROM set of the desired size, admitting only tables joinable to
/// one already chosen. Stops short if no joinable table remains.
fn sample_from(rng: &mut DetRng, schema: &Schema, want: usize) -> Vec<TableId> {
    let all: Vec<TableId> = (0..schema.tables().len()).map(TableId).collect();
    let mut chosen = alloc::vec![*rng.pick(&all)];
    while chosen.len() < want {
        let cands: Vec<TableId> = all
            .iter()
            .copied()
            .filter(|t| {
                !chosen.contains(t) && chosen.iter().any(|c| schema.joinable(*c, *t))
            })
            .collect();
        if cands.is_empty() {
            break;
        }
        chosen.push(*rng.pick(&cands));
    }
    chosen
}

// ---------------------------------------------------------------------------
// Spec sampling
// ---------------------------------------------------------------------------

fn numeric_subset(schema: &Schema, pool: &[ColumnId]) -> Vec<ColumnId> {
    pool.iter().copied().filter(|c| schema.column(*c).domain == ValueDomain::Number).collect()
}

fn sample_spec(
    rng: &mut DetRng,
    schema: &Schema,
    dist: &Dist,
    cfg: &GenConfig,
    value_free: bool,
    allow_ieu: bool,
) -> QuerySpec {
    let want = wpick(rng, &dist.from_arity[..cfg.max_from_tables]) + 1;
    let from = sample_from(rng, schema, want);
    let pool: Vec<ColumnId> = from.iter().flat_map(|t| content_columns(schema, *t)).collect();
    let nums = numeric_subset(schema, &pool);

    // SELECT
    let mut arity = wpick(rng, &dist.select_arity[..cfg.max_select_items]) + 1;
    arity = arity.min(pool.len());
    let r = rng.unit();
    let select: Vec<SelectItem> = if arity == 1 && r < dist.star_plain {
        alloc::vec![SelectItem { agg: AggKind::None, distinct: false, col: Schema::STAR }]
    } else if arity == 1 && r < dist.star_plain + dist.star_count {
        alloc::vec![SelectItem { agg: AggKind::Count, distinct: false, col: Schema::STAR }]
    } else {
        let mut cols = pool.clone();
        rng.shuffle(&mut cols);
        cols.truncate(arity);
        cols.into_iter()
            .map(|col| {
                let numeric = schema.column(col).domain == ValueDomain::Number;
                let agg = match AGGS[wpick(rng, &dist.agg)] {
                    a @ (AggKind::None | AggKind::Count) => a,
                    a if numeric => a,
                    // Sum/avg/max/min of a text column makes no sense; keep
                    // the item but drop to a count or a plain projection.
                    _ if rng.chance(0.5) => AggKind::Count,
                    _ => AggKind::None,
                };
                SelectItem { agg, distinct: rng.chance(dist.distinct_p), col }
            })
            .collect()
    };

    // WHERE. Conjuncts constrain distinct columns so a question never
    // contradicts itself ("city equal to rome and city not equal to rome").
    let mut where_ = Vec::new();
    if !value_free && rng.chance(dist.where_p) {
        let conjuncts = (wpick(rng, &dist.conj) + 1).min(pool.len());
        let mut cols = pool.clone();
        rng.shuffle(&mut cols);
        for col in cols.into_iter().take(conjuncts) {
            let (op, value) = match schema.column(col).domain {
                ValueDomain::Number => (OPS[rng.below(OPS.len())], *rng.pick(NUM_VALUES)),
                ValueDomain::Text => {
                    (if rng.chance(0.5) { CmpOp::Eq } else { CmpOp::Ne }, *rng.pick(TEXT_VALUES))
                }
            };
            where_.push(Pred { col, op, value: value.to_string() });
        }
    }

    // GROUP (+ optional HAVING). Non-count HAVING aggregates, and a raw
    // HAVING column, compare against numeric values, so they need a numeric
    // column in scope.
    let group = if rng.chance(dist.group_p) {
        let col = *rng.pick(&pool);
        let having = if !value_free && !nums.is_empty() && rng.chance(dist.having_given_group) {
            let agg = AGGS[wpick(rng, &dist.tail_agg)];
            let hcol = if agg == AggKind::Count { *rng.pick(&pool) } else { *rng.pick(&nums) };
            Some(Having {
                agg,
                col: hcol,
                op: OPS[rng.below(OPS.len())],
                value: (*rng.pick(NUM_VALUES)).to_string(),
            })
        } else {
            None
        };
        Some(GroupBy { col, having })
    } else {
        None
    };

    // ORDER (+ optional LIMIT). Same numeric constraint as HAVING, except
    // that there is no compared value, so a raw (no-aggregate) sort column
    // may be of any domain.
    let order = if rng.chance(dist.order_p) {
        let mut agg = AGGS[wpick(rng, &dist.tail_agg)];
        if nums.is_empty() && !matches!(agg, AggKind::None | AggKind::Count) {
            agg = AggKind::None;
        }
        let ocol = match agg {
            AggKind::None | AggKind::Count => *rng.pick(&pool),
            _ => *rng.pick(&nums),
        };
        let limit = if !value_free && rng.chance(dist.limit_given_order) {
            Some((*rng.pick(LIMIT_VALUES)).to_string())
        } else {
            None
        };
        Some(OrderBy { agg, col: ocol, desc: rng.chance(0.5), limit })
    } else {
        None
    };

    // IEU: one flat body, never nested further.
    let ieu = if allow_ieu && !value_free && rng.chance(dist.ieu_p) {
        let op = IEU_OPS[rng.below(IEU_OPS.len())];
        let body = sample_spec(rng, schema, dist, cfg, false, false);
        Some((op, Box::new(body)))
    } else {
        None
    };

    QuerySpec { select, where_, group, order, ieu, from }
}

// ---------------------------------------------------------------------------
// Question rendering
// ---------------------------------------------------------------------------

fn col_phrase(schema: &Schema, col: ColumnId, paraphrase: bool) -> String {
    let name = &schema.column(col).name;
    match COLS.iter().find(|e| e.name == name) {
        Some(e) => (if paraphrase { e.para } else { e.phrase }).to_string(),
        None => name.replace('_', " "),
    }
}

fn table_phrase(schema: &Schema, t: TableId, paraphrase: bool) -> String {
    let name = &schema.table(t).name;
    match TABLES.iter().find(|e| e.name == name) {
        Some(e) => (if paraphrase { e.para } else { e.name }).to_string(),
        None => name.clone(),
    }
}

fn agg_words(agg: AggKind) -> &'static str {
    match agg {
        AggKind::None => "",
        AggKind::Max => "maximum ",
        AggKind::Min => "minimum ",
        AggKind::Count => "number of ",
        AggKind::Sum => "total ",
        AggKind::Avg => "average ",
    }
}

fn op_words(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "equal to",
        CmpOp::Gt => "above",
        CmpOp::Lt => "below",
        CmpOp::Ge => "at least",
        CmpOp::Le => "at most",
        CmpOp::Ne => "not equal to",
    }
}

fn item_phrase(schema: &Schema, item: &SelectItem, paraphrase: bool) -> String {
    if item.col == Schema::STAR {
        return match item.agg {
            AggKind::Count => "number of rows".to_string(),
            _ => "full details".to_string(),
        };
    }
    let distinct = if item.distinct { "distinct " } else { "" };
    format!("{}{}{}", agg_words(item.agg), distinct, col_phrase(schema, item.col, paraphrase))
}

fn question_for(spec: &QuerySpec, schema: &Schema, paraphrase: bool) -> String {
    let mut parts: Vec<String> = Vec::new();
    parts.push("show".to_string());
    let items: Vec<String> =
        spec.select.iter().map(|i| item_phrase(schema, i, paraphrase)).collect();
    parts.push(items.join(" and "));
    parts.push("of".to_string());
    let tables: Vec<String> =
        spec.from.iter().map(|t| table_phrase(schema, *t, paraphrase)).collect();
    parts.push(tables.join(" and "));

    if !spec.where_.is_empty() {
        parts.push("with".to_string());
        let preds: Vec<String> = spec
            .where_
            .iter()
            .map(|p| {
                format!("{} {} {}", col_phrase(schema, p.col, paraphrase), op_words(p.op), p.value)
            })
            .collect();
        parts.push(preds.join(" and "));
    }

    if let Some(gb) = &spec.group {
        parts.push(format!("for each {}", col_phrase(schema, gb.col, paraphrase)));
        if let Some(h) = &gb.having {
            parts.push(format!(
                "having {}{} {} {}",
                agg_words(h.agg),
                col_phrase(schema, h.col, paraphrase),
                op_words(h.op),
                h.value
            ));
        }
    }

    if let Some(ob) = &spec.order {
        parts.push(format!(
            "sorted by {}{} {}",
            agg_words(ob.agg),
            col_phrase(schema, ob.col, paraphrase),
            if ob.desc { "descending" } else { "ascending" }
        ));
        if let Some(limit) = &ob.limit {
            parts.push(format!("top {limit}"));
        }
    }

    if let Some((op, body)) = &spec.ieu {
        let marker = match op {
            IeuOp::Intersect => "and also",
            IeuOp::Except => "but not",
            IeuOp::Union => "or else",
        };
        parts.push(marker.to_string());
        parts.push(question_for(body, schema, paraphrase));
    }

    parts.join(" ")
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Generates a schema pool and `cfg.n` raw examples, deterministically in
/// `cfg.seed`.
pub fn generate(sg: &SqlGrammar, cfg: &GenConfig) -> Result<Generated, GenError> {
    if cfg.n == 0 {
        return Err(GenError::EmptyRequest { what: "example count" });
    }
    if cfg.num_dbs == 0 {
        return Err(GenError::EmptyRequest { what: "database count" });
    }
    if cfg.max_select_items == 0 {
        return Err(GenError::EmptyRequest { what: "select item cap" });
    }
    if cfg.max_from_tables == 0 {
        return Err(GenError::EmptyRequest { what: "from table cap" });
    }
    if !(0.0..=1.0).contains(&cfg.paraphrase_rate) || !cfg.paraphrase_rate.is_finite() {
        return Err(GenError::BadRate { rate: cfg.paraphrase_rate });
    }
    if cfg.max_select_items > sg.select_arity.len() {
        return Err(GenError::UnsupportedVariant {
            what: "select items",
            requested: cfg.max_select_items,
            available: sg.select_arity.len(),
        });
    }
    if cfg.max_from_tables > sg.from_arity.len() {
        return Err(GenError::UnsupportedVariant {
            what: "from tables",
            requested: cfg.max_from_tables,
            available: sg.from_arity.len(),
        });
    }

    let dist = match cfg.profile {
        GenProfile::Mixed => Dist::mixed(),
        GenProfile::Bench => Dist::bench(),
    };
    let mut rng = DetRng::new(cfg.seed);

    let mut schemas = BTreeMap::new();
    let mut names = Vec::with_capacity(cfg.num_dbs);
    for d in 0..cfg.num_dbs {
        let name = format!("gen_db{d}");
        schemas.insert(name.clone(), build_schema(&mut rng, &name));
        names.push(name);
    }

    let mut raws = Vec::with_capacity(cfg.n);
    let mut paraphrased = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let db_id = names[rng.below(names.len())].clone();
        let schema = &schemas[&db_id];
        let para = rng.chance(cfg.paraphrase_rate);
        let allow_ieu = cfg.profile == GenProfile::Mixed && !para;
        let spec = sample_spec(&mut rng, schema, &dist, cfg, para, allow_ieu);
        let question = question_for(&spec, schema, para);
        let sql = render_spec(&spec, schema);
        raws.push(RawExample { db_id, question, sql });
        paraphrased.push(para);
    }

    Ok(Generated { schemas, raws, paraphrased })
}

/// Generates and prepares a corpus in one step. The boolean vector is the
/// per-example paraphrase ground truth, index-aligned with the examples.
pub fn generate_corpus(
    g: &Grammar,
    sg: &SqlGrammar,
    cfg: &GenConfig,
) -> Result<(Corpus, Vec<bool>), GenError> {
    let gen = generate(sg, cfg)?;
    let corpus = Corpus::prepare(g, sg, gen.schemas, &gen.raws)?;
    Ok((corpus, gen.paraphrased))
}

/// For each grammar rule, the number of examples whose AST uses it at least
/// once. Index by `RuleId.0`.
pub fn rule_presence(corpus: &Corpus, g: &Grammar) -> Vec<usize> {
    let mut counts = alloc::vec![0usize; g.rule_count()];
    for ex in &corpus.examples {
        let mut seen = BTreeSet::new();
        for i in 0..ex.ast.len() {
            if let crate::ast::NodeContent::Rule { rule, .. } =
                &ex.ast.node(crate::ast::NodeId(i)).content
            {
                seen.insert(*rule);
            }
        }
        for r in seen {
            counts[r.0] += 1;
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

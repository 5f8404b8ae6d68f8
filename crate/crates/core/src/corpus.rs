//! Example corpora: text formats, preparation, matching, and hardness.
//!
//! A dataset is tab-separated text, one example per line:
//!
//! ```text
//! db_id<TAB>question<TAB>sql
//! ```
//!
//! and a schema catalog is tab-separated text with a record kind in the
//! first field:
//!
//! ```text
//! table<TAB>db_id<TAB>table_name
//! col<TAB>db_id<TAB>table_name<TAB>column_name<TAB>num|text
//! fk<TAB>db_id<TAB>table.column<TAB>table.column
//! ```
//!
//! Blank lines and lines starting with `#` are skipped in both formats.
//! Order matters: tables and columns get their identities from first
//! appearance, and `col`/`fk` lines may only reference what earlier lines
//! declared.  The `*` pseudo-column exists implicitly and never appears in
//! the file.
//!
//! [`prepare_example`] turns one raw line into everything training and
//! evaluation read repeatedly: question tokens, the parsed query spec, the
//! gold derivation tree, its oracle action trace, the clause alignment with
//! its per-clause prior rows, and the canonical key used for exact-match
//! scoring.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::align::{self, AlignError, PairAlignment};
use crate::ast::{self, ActionTrace, Ast, AstError};
use crate::grammar::Grammar;
use crate::schema::{ColumnId, Schema, ValueDomain};
use crate::sql::{self, QuerySpec, SqlError, SqlGrammar};

/// Query difficulty bucket, ordered from easiest to hardest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Hardness {
    pub const ALL: [Hardness; 4] =
        [Hardness::Easy, Hardness::Medium, Hardness::Hard, Hardness::Extra];

    pub fn name(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Extra => "extra",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Hardness::Easy => 0,
            Hardness::Medium => 1,
            Hardness::Hard => 2,
            Hardness::Extra => 3,
        }
    }
}

impl fmt::Display for Hardness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two counts the hardness rubric reads: how many of the six clauses
/// are present (SELECT and FROM always are), and how many components the
/// present clauses carry — SELECT items, FROM tables, WHERE conjuncts, one
/// for GROUP plus one for HAVING, one for ORDER plus one for LIMIT.
fn shape(spec: &QuerySpec) -> (usize, usize) {
    let mut clauses = 2;
    let mut components = spec.select.len() + spec.from.len();
    if !spec.where_.is_empty() {
        clauses += 1;
        components += spec.where_.len();
    }
    if let Some(g) = &spec.group {
        clauses += 1;
        components += 1 + usize::from(g.having.is_some());
    }
    if let Some(o) = &spec.order {
        clauses += 1;
        components += 1 + usize::from(o.limit.is_some());
    }
    if spec.ieu.is_some() {
        clauses += 1;
    }
    (clauses, components)
}

/// Buckets a query by structure.  The rubric is this toolkit's own and
/// frozen for tests:
///
/// - **extra**: a set operation is present, or four or more clauses are;
/// - **easy**: only SELECT and FROM, with at most two components;
/// - **medium**: at most three components (and not extra or easy);
/// - **hard**: everything else.
///
/// Adding a clause or a component never lowers the bucket.
pub fn hardness(spec: &QuerySpec) -> Hardness {
    let (clauses, components) = shape(spec);
    if spec.ieu.is_some() || clauses >= 4 {
        Hardness::Extra
    } else if clauses <= 2 && components <= 2 {
        Hardness::Easy
    } else if components <= 3 {
        Hardness::Medium
    } else {
        Hardness::Hard
    }
}

/// One dataset line, before any parsing of its SQL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExample {
    pub db_id: String,
    pub question: String,
    pub sql: String,
}

/// Corpus construction failure.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusError {
    /// A malformed dataset or schema line (1-based line number).
    BadLine { line: usize, reason: String },
    UnknownDb { db_id: String },
    EmptyQuestion,
    Sql(SqlError),
    Ast(AstError),
    Align(AlignError),
    /// Failure while preparing the example at `index`, with the underlying
    /// error rendered into the message.
    AtExample { index: usize, reason: String },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::BadLine { line, reason } => write!(f, "line {line}: {reason}"),
            CorpusError::UnknownDb { db_id } => {
                write!(f, "example references unknown database {db_id:?}")
            }
            CorpusError::EmptyQuestion => write!(f, "question has no tokens"),
            CorpusError::Sql(e) => write!(f, "sql: {e}"),
            CorpusError::Ast(e) => write!(f, "derivation: {e}"),
            CorpusError::Align(e) => write!(f, "alignment: {e}"),
            CorpusError::AtExample { index, reason } => {
                write!(f, "example {index}: {reason}")
            }
        }
    }
}

impl core::error::Error for CorpusError {}

impl From<SqlError> for CorpusError {
    fn from(e: SqlError) -> Self {
        CorpusError::Sql(e)
    }
}

impl From<AstError> for CorpusError {
    fn from(e: AstError) -> Self {
        CorpusError::Ast(e)
    }
}

impl From<AlignError> for CorpusError {
    fn from(e: AlignError) -> Self {
        CorpusError::Align(e)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Parses dataset text (`db_id \t question \t sql` per line).
pub fn parse_dataset(text: &str) -> Result<Vec<RawExample>, CorpusError> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split('\t').collect();
        let [db_id, question, sql] = fields.as_slice() else {
            return Err(CorpusError::BadLine {
                line,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        if db_id.is_empty() || question.is_empty() || sql.is_empty() {
            return Err(CorpusError::BadLine { line, reason: "empty field".to_owned() });
        }
        out.push(RawExample {
            db_id: (*db_id).to_owned(),
            question: (*question).to_owned(),
            sql: (*sql).to_owned(),
        });
    }
    Ok(out)
}

/// Renders examples back to dataset text.  Fields must not contain tabs or
/// newlines (the formats' separators).
pub fn format_dataset(examples: &[RawExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        for field in [&ex.db_id, &ex.question, &ex.sql] {
            assert!(
                !field.contains('\t') && !field.contains('\n'),
                "dataset field contains a separator: {field:?}"
            );
        }
        out.push_str(&format!("{}\t{}\t{}\n", ex.db_id, ex.question, ex.sql));
    }
    out
}

/// Parses a schema catalog (see the module docs for the line forms).
pub fn parse_schemas(text: &str) -> Result<BTreeMap<String, Schema>, CorpusError> {
    let mut out: BTreeMap<String, Schema> = BTreeMap::new();
    let bad = |line: usize, reason: String| CorpusError::BadLine { line, reason };
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split('\t').collect();
        match fields.as_slice() {
            ["table", db_id, table] if !db_id.is_empty() && !table.is_empty() => {
                let schema =
                    out.entry((*db_id).to_owned()).or_insert_with(|| Schema::new(db_id));
                if schema.find_table(table).is_some() {
                    return Err(bad(line, format!("duplicate table {table:?}")));
                }
                schema.add_table(table);
            }
            ["col", db_id, table, column, domain]
                if !db_id.is_empty() && !column.is_empty() =>
            {
                let schema = out
                    .get_mut(*db_id)
                    .ok_or_else(|| bad(line, format!("unknown database {db_id:?}")))?;
                let tid = schema
                    .find_table(table)
                    .ok_or_else(|| bad(line, format!("unknown table {table:?}")))?;
                let domain = ValueDomain::from_name(domain)
                    .ok_or_else(|| bad(line, format!("unknown value domain {domain:?}")))?;
                let dup = schema
                    .columns()
                    .iter()
                    .any(|c| c.table == Some(tid) && c.name == *column);
                if dup {
                    return Err(bad(
                        line,
                        format!("duplicate column {column:?} in table {table:?}"),
                    ));
                }
                schema.add_column_tagged(tid, column, domain);
            }
            ["fk", db_id, from, to] => {
                let schema = out
                    .get_mut(*db_id)
                    .ok_or_else(|| bad(line, format!("unknown database {db_id:?}")))?;
                let resolve = |schema: &Schema, spec: &str| -> Option<ColumnId> {
                    let (table, column) = spec.split_once('.')?;
                    let tid = schema.find_table(table)?;
                    schema
                        .columns()
                        .iter()
                        .position(|c| c.table == Some(tid) && c.name == column)
                        .map(ColumnId)
                };
                let from = resolve(schema, from)
                    .ok_or_else(|| bad(line, format!("unknown column {from:?}")))?;
                let to = resolve(schema, to)
                    .ok_or_else(|| bad(line, format!("unknown column {to:?}")))?;
                schema.add_foreign_key(from, to);
            }
            _ => {
                return Err(bad(line, format!("unrecognized schema line {l:?}")));
            }
        }
    }
    Ok(out)
}

/// Renders a schema catalog back to text: per database, its `table` lines
/// in identity order, then `col` lines in column identity order, then `fk`
/// lines in declaration order.
pub fn format_schemas(schemas: &BTreeMap<String, Schema>) -> String {
    let mut out = String::new();
    for (db_id, schema) in schemas {
        for table in schema.tables() {
            out.push_str(&format!("table\t{}\t{}\n", db_id, table.name));
        }
        for col in schema.columns() {
            if let Some(t) = col.table {
                out.push_str(&format!(
                    "col\t{}\t{}\t{}\t{}\n",
                    db_id,
                    schema.table(t).name,
                    col.name,
                    col.domain.name()
                ));
            }
        }
        for (from, to) in schema.foreign_keys() {
            out.push_str(&format!(
                "fk\t{}\t{}\t{}\n",
                db_id,
                schema.qualified_column(*from),
                schema.qualified_column(*to)
            ));
        }
    }
    out
}

/// One fully prepared example: everything derived from a raw line that
/// training and evaluation would otherwise recompute every epoch.
#[derive(Debug, Clone)]
pub struct Example {
    pub db_id: String,
    pub question_text: String,
    /// Question tokens (the attention/copy targets).
    pub question: Vec<String>,
    pub sql: String,
    pub spec: QuerySpec,
    /// Gold derivation tree; its `born_at` order matches `trace`.
    pub ast: Ast,
    pub trace: ActionTrace,
    pub align: PairAlignment,
    /// Per-clause attention prior rows over question tokens.
    pub priors: [Vec<f64>; 6],
    /// Canonical form used for exact-match scoring.
    pub key: String,
    pub hardness: Hardness,
}

/// Prepares one raw example against its schema.
pub fn prepare_example(
    g: &Grammar,
    sg: &SqlGrammar,
    schema: &Schema,
    raw: &RawExample,
) -> Result<Example, CorpusError> {
    let question = align::tokenize_question(&raw.question);
    if question.is_empty() {
        return Err(CorpusError::EmptyQuestion);
    }
    let spec = sql::parse_spec(&raw.sql, schema)?;
    let ast = sql::build_ast(&spec, sg, g, schema)?;
    let trace = ast::oracle_actions(&ast, g, &question)?;
    let align = align::align_pair(&question, &ast, g, schema)?;
    let priors = align.prior_rows();
    let key = sql::canonical_key(&spec, schema);
    let hardness = hardness(&spec);
    Ok(Example {
        db_id: raw.db_id.clone(),
        question_text: raw.question.clone(),
        question,
        sql: raw.sql.clone(),
        spec,
        ast,
        trace,
        align,
        priors,
        key,
        hardness,
    })
}

/// A prepared corpus: schemas by database id plus prepared examples.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub schemas: BTreeMap<String, Schema>,
    pub examples: Vec<Example>,
}

impl Corpus {
    /// Prepares every raw example; the first failure is reported with its
    /// example index (0-based, in input order).
    pub fn prepare(
        g: &Grammar,
        sg: &SqlGrammar,
        schemas: BTreeMap<String, Schema>,
        raws: &[RawExample],
    ) -> Result<Corpus, CorpusError> {
        let mut examples = Vec::with_capacity(raws.len());
        for (index, raw) in raws.iter().enumerate() {
            let schema = schemas
                .get(&raw.db_id)
                .ok_or_else(|| CorpusError::UnknownDb { db_id: raw.db_id.clone() })
                .and_then(|schema| prepare_example(g, sg, schema, raw));
            match schema {
                Ok(ex) => examples.push(ex),
                Err(e) => {
                    return Err(CorpusError::AtExample { index, reason: e.to_string() });
                }
            }
        }
        Ok(Corpus { schemas, examples })
    }

    pub fn schema_of(&self, ex: &Example) -> &Schema {
        self.schemas.get(&ex.db_id).expect("prepared example references a known database")
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Example counts per hardness bucket, easiest first.
    pub fn hardness_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for ex in &self.examples {
            counts[ex.hardness.index()] += 1;
        }
        counts
    }

    /// Every distinct word the model should know: question tokens plus
    /// schema name words, in first-appearance order (examples first).
    pub fn vocab_words(&self) -> Vec<String> {
        let mut words = Vec::new();
        let mut seen = alloc::collections::BTreeSet::new();
        let mut add = |w: &str, words: &mut Vec<String>| {
            if seen.insert(w.to_owned()) {
                words.push(w.to_owned());
            }
        };
        for ex in &self.examples {
            for tok in &ex.question {
                add(tok, &mut words);
            }
        }
        for schema in self.schemas.values() {
            for table in schema.tables() {
                for w in crate::schema::mention_words(&table.name) {
                    add(w, &mut words);
                }
            }
            for col in schema.columns() {
                for w in crate::schema::mention_words(&col.name) {
                    add(w, &mut words);
                }
            }
        }
        words
    }
}

/// Exact match: the predicted spec canonicalizes to the gold key.
pub fn exact_match(pred: &QuerySpec, gold: &Example, schema: &Schema) -> bool {
    sql::canonical_key(pred, schema) == gold.key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar;
    use alloc::vec;

    const SCHEMA_TEXT: &str = "\
# demo catalog
table\tcars_db\tcars
table\tcars_db\tmakers
col\tcars_db\tcars\tmodel\ttext
col\tcars_db\tcars\tyear\tnum
col\tcars_db\tcars\tmax_speed\tnum
col\tcars_db\tcars\tmaker\tnum
col\tcars_db\tmakers\tid\tnum
col\tcars_db\tmakers\tname\ttext
fk\tcars_db\tcars.maker\tmakers.id
table\tshops_db\tshops
col\tshops_db\tshops\tcity\ttext
";

    fn demo_setup() -> (Grammar, SqlGrammar, BTreeMap<String, Schema>) {
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let schemas = parse_schemas(SCHEMA_TEXT).unwrap();
        (g, sg, schemas)
    }

    #[test]
    fn schema_catalog_round_trips() {
        let schemas = parse_schemas(SCHEMA_TEXT).unwrap();
        assert_eq!(schemas.len(), 2);
        let cars = &schemas["cars_db"];
        assert_eq!(cars.table_count(), 2);
        // Star plus six declared columns.
        assert_eq!(cars.column_count(), 7);
        assert_eq!(cars.foreign_keys().len(), 1);
        assert_eq!(
            cars.column(cars.find_column("year").unwrap()).domain,
            ValueDomain::Number
        );
        let text = format_schemas(&schemas);
        let again = parse_schemas(&text).unwrap();
        assert_eq!(format_schemas(&again), text);
        // The star column never appears in the file.
        assert!(!text.contains('*'));
    }

    #[test]
    fn schema_parse_rejects_bad_lines() {
        for (bad, which) in [
            ("table\tcars_db", "missing field"),
            ("col\tcars_db\tcars\tmodel\ttext", "column before its table"),
            ("table\tdb\tt\ntable\tdb\tt", "duplicate table"),
            ("table\tdb\tt\ncol\tdb\tt\tc\tmaybe", "bad domain"),
            ("table\tdb\tt\ncol\tdb\tt\tc\tnum\ncol\tdb\tt\tc\tnum", "duplicate column"),
            ("table\tdb\tt\nfk\tdb\tt.a\tt.b", "fk to unknown column"),
            ("index\tdb\tt", "unknown record kind"),
        ] {
            assert!(
                matches!(parse_schemas(bad), Err(CorpusError::BadLine { .. })),
                "accepted {which}: {bad:?}"
            );
        }
    }

    #[test]
    fn dataset_lines_round_trip_and_report_errors() {
        let text = "# comment\n\ncars_db\thow many cars\tselect count(*) from cars as T1\n";
        let raws = parse_dataset(text).unwrap();
        assert_eq!(raws.len(), 1);
        assert_eq!(raws[0].db_id, "cars_db");
        assert_eq!(format_dataset(&raws), text.lines().last().unwrap().to_owned() + "\n");

        let err = parse_dataset("only_two\tfields").unwrap_err();
        assert!(matches!(err, CorpusError::BadLine { line: 1, .. }));
        let err = parse_dataset("a\t\tb").unwrap_err();
        assert!(matches!(err, CorpusError::BadLine { line: 1, .. }));
    }

    #[test]
    fn prepared_example_caches_are_mutually_consistent() {
        let (g, sg, schemas) = demo_setup();
        let raw = RawExample {
            db_id: "cars_db".to_owned(),
            question: "which model is newer than 1980".to_owned(),
            sql: "select T1.model from cars as T1 where T1.year > 1980".to_owned(),
        };
        let corpus = Corpus::prepare(&g, &sg, schemas, &[raw]).unwrap();
        let ex = &corpus.examples[0];
        let schema = corpus.schema_of(ex);

        // The trace replays to the cached tree.
        let replayed = ast::replay(&g, schema, &ex.question, &ex.trace.actions).unwrap();
        assert!(replayed.structurally_eq(&ex.ast));
        // Each prior row is a distribution over the question tokens.
        for row in &ex.priors {
            assert_eq!(row.len(), ex.question.len());
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        // The key matches the spec's canonical form.
        assert_eq!(ex.key, sql::canonical_key(&ex.spec, schema));
        assert_eq!(ex.hardness, Hardness::Medium);
        // Vocabulary covers question words and schema names.
        let words = corpus.vocab_words();
        assert!(words.iter().any(|w| w == "which"));
        assert!(words.iter().any(|w| w == "speed")); // from max_speed
    }

    #[test]
    fn preparation_errors_carry_the_example_index() {
        let (g, sg, schemas) = demo_setup();
        let good = RawExample {
            db_id: "cars_db".to_owned(),
            question: "how many cars".to_owned(),
            sql: "select count(*) from cars as T1".to_owned(),
        };
        // The value 2000 never appears in the question, so the oracle trace
        // cannot copy it.
        let bad = RawExample {
            db_id: "cars_db".to_owned(),
            question: "which model is recent".to_owned(),
            sql: "select T1.model from cars as T1 where T1.year > 2000".to_owned(),
        };
        let err = Corpus::prepare(&g, &sg, schemas.clone(), &[good.clone(), bad]).unwrap_err();
        match err {
            CorpusError::AtExample { index, reason } => {
                assert_eq!(index, 1);
                assert!(reason.contains("2000"), "reason: {reason}");
            }
            other => panic!("unexpected error {other}"),
        }

        let unknown = RawExample { db_id: "nope".to_owned(), ..good };
        let err = Corpus::prepare(&g, &sg, schemas, &[unknown]).unwrap_err();
        assert!(matches!(err, CorpusError::AtExample { index: 0, .. }));
    }

    #[test]
    fn hardness_buckets_follow_the_frozen_rubric() {
        let (_, _, schemas) = demo_setup();
        let schema = &schemas["cars_db"];
        let spec = |sql: &str| sql::parse_spec(sql, schema).unwrap();

        // Only SELECT and FROM, two components.
        let easy = spec("select T1.model from cars as T1");
        // Three components: two projected items plus the table.
        let medium_items = spec("select T1.model, T1.year from cars as T1");
        // Three clauses, three components.
        let medium_where = spec("select T1.model from cars as T1 where T1.year > 1980");
        // Four components under three clauses.
        let hard = spec(
            "select T1.model from cars as T1 where T1.year > 1980 and T1.max_speed > 120",
        );
        let hard_having = spec(
            "select count(*) from cars as T1 group by T1.model having count(T1.model) > 2",
        );
        // A set operation is always extra.
        let extra_ieu = spec(
            "select T1.model from cars as T1 union select T1.model from cars as T1",
        );
        // As is a fourth clause.
        let extra_clauses = spec(
            "select T1.model from cars as T1 where T1.year > 1980 \
             group by T1.model order by T1.year desc",
        );
        assert_eq!(hardness(&easy), Hardness::Easy);
        assert_eq!(hardness(&medium_items), Hardness::Medium);
        assert_eq!(hardness(&medium_where), Hardness::Medium);
        assert_eq!(hardness(&hard), Hardness::Hard);
        assert_eq!(hardness(&hard_having), Hardness::Hard);
        assert_eq!(hardness(&extra_ieu), Hardness::Extra);
        assert_eq!(hardness(&extra_clauses), Hardness::Extra);

        // Adding a component or clause can only raise the bucket.
        let mut with_order = medium_where.clone();
        with_order.order = Some(crate::sql::OrderBy {
            agg: crate::sql::AggKind::None,
            col: ColumnId(1),
            desc: true,
            limit: None,
        });
        assert!(hardness(&with_order) >= hardness(&medium_where));
        let mut widened = easy.clone();
        widened.select.push(easy.select[0].clone());
        assert!(hardness(&widened) >= hardness(&easy));
    }

    #[test]
    fn exact_match_ignores_conjunct_and_item_order() {
        let (g, sg, schemas) = demo_setup();
        let raw = RawExample {
            db_id: "cars_db".to_owned(),
            question: "models newer than 1980 faster than 120".to_owned(),
            sql: "select T1.model from cars as T1 where T1.year > 1980 and T1.max_speed > 120"
                .to_owned(),
        };
        let corpus = Corpus::prepare(&g, &sg, schemas, &[raw]).unwrap();
        let ex = &corpus.examples[0];
        let schema = corpus.schema_of(ex);
        let swapped = sql::parse_spec(
            "select T1.model from cars as T1 where T1.max_speed > 120 and T1.year > 1980",
            schema,
        )
        .unwrap();
        assert!(exact_match(&swapped, ex, schema));
        let different = sql::parse_spec(
            "select T1.model from cars as T1 where T1.max_speed > 120",
            schema,
        )
        .unwrap();
        assert!(!exact_match(&different, ex, schema));
    }

    #[test]
    fn hardness_counts_tally_buckets() {
        let (g, sg, schemas) = demo_setup();
        let raws = vec![
            RawExample {
                db_id: "cars_db".to_owned(),
                question: "all models".to_owned(),
                sql: "select T1.model from cars as T1".to_owned(),
            },
            RawExample {
                db_id: "cars_db".to_owned(),
                question: "models newer than 1980 faster than 120".to_owned(),
                sql: "select T1.model from cars as T1 where T1.year > 1980 \
                      and T1.max_speed > 120"
                    .to_owned(),
            },
        ];
        let corpus = Corpus::prepare(&g, &sg, schemas, &raws).unwrap();
        assert_eq!(corpus.hardness_counts(), [1, 0, 1, 0]);
        assert_eq!(corpus.len(), 2);
    }
}

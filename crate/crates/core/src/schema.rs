//! Database schemas: named tables and columns that `SelectColumn` /
//! `SelectTable` actions point into.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Index of a table within its [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TableId(pub usize);

/// Index of a column within its [`Schema`]. Column 0 is always `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
}

/// What kind of literal a column's values look like; steers condition-value
/// generation and question phrasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueDomain {
    Number,
    Text,
}

impl ValueDomain {
    pub fn name(self) -> &'static str {
        match self {
            ValueDomain::Number => "num",
            ValueDomain::Text => "text",
        }
    }

    pub fn from_name(s: &str) -> Option<ValueDomain> {
        match s {
            "num" => Some(ValueDomain::Number),
            "text" => Some(ValueDomain::Text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    /// `None` only for the `*` pseudo-column.
    pub table: Option<TableId>,
    pub domain: ValueDomain,
}

/// A database schema. Construction starts empty except for the `*`
/// pseudo-column, which every schema exposes as [`Schema::STAR`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub name: String,
    tables: Vec<Table>,
    columns: Vec<Column>,
    foreign_keys: Vec<(ColumnId, ColumnId)>,
}

impl Schema {
    /// The `*` pseudo-column present in every schema.
    pub const STAR: ColumnId = ColumnId(0);

    pub fn new(name: &str) -> Schema {
        Schema {
            name: name.to_string(),
            tables: Vec::new(),
            columns: alloc::vec![Column {
                name: "*".to_string(),
                table: None,
                domain: ValueDomain::Text,
            }],
            foreign_keys: Vec::new(),
        }
    }

    pub fn add_table(&mut self, name: &str) -> TableId {
        let id = TableId(self.tables.len());
        self.tables.push(Table { name: name.to_string() });
        id
    }

    /// Adds a text-domain column; see [`Schema::add_column_tagged`].
    pub fn add_column(&mut self, table: TableId, name: &str) -> ColumnId {
        self.add_column_tagged(table, name, ValueDomain::Text)
    }

    /// Panics if `table` was not returned by [`Schema::add_table`] on this schema.
    pub fn add_column_tagged(
        &mut self,
        table: TableId,
        name: &str,
        domain: ValueDomain,
    ) -> ColumnId {
        assert!(table.0 < self.tables.len(), "column added to unknown table");
        let id = ColumnId(self.columns.len());
        self.columns.push(Column { name: name.to_string(), table: Some(table), domain });
        id
    }

    /// Declares that `from`'s values reference `to`.  Panics unless both
    /// endpoints are existing table columns (never `*`).
    pub fn add_foreign_key(&mut self, from: ColumnId, to: ColumnId) {
        for end in [from, to] {
            assert!(end.0 < self.columns.len(), "foreign key endpoint does not exist");
            assert!(self.columns[end.0].table.is_some(), "foreign key endpoint is `*`");
        }
        self.foreign_keys.push((from, to));
    }

    pub fn foreign_keys(&self) -> &[(ColumnId, ColumnId)] {
        &self.foreign_keys
    }

    /// True when a foreign key (in either direction) connects the tables.
    pub fn joinable(&self, a: TableId, b: TableId) -> bool {
        self.foreign_keys.iter().any(|(f, t)| {
            let ft = self.columns[f.0].table;
            let tt = self.columns[t.0].table;
            (ft == Some(a) && tt == Some(b)) || (ft == Some(b) && tt == Some(a))
        })
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    /// All columns including `*` at index 0.
    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn table(&self, id: TableId) -> &Table {
        &self.tables[id.0]
    }

    pub fn column(&self, id: ColumnId) -> &Column {
        &self.columns[id.0]
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    /// Leftmost column with this name.
    pub fn find_column(&self, name: &str) -> Option<ColumnId> {
        self.columns.iter().position(|c| c.name == name).map(ColumnId)
    }

    pub fn find_table(&self, name: &str) -> Option<TableId> {
        self.tables.iter().position(|t| t.name == name).map(TableId)
    }

    /// `table.column` for ordinary columns, `*` for the star column.
    pub fn qualified_column(&self, id: ColumnId) -> String {
        let col = self.column(id);
        match col.table {
            Some(t) => alloc::format!("{}.{}", self.table(t).name, col.name),
            None => col.name.clone(),
        }
    }
}

/// Split a schema identifier into the words used to mention it in natural
/// language: `max_speed` -> `["max", "speed"]`.
pub fn mention_words(name: &str) -> Vec<&str> {
    name.split('_').filter(|w| !w.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_is_column_zero() {
        let s = Schema::new("db");
        assert_eq!(s.column_count(), 1);
        assert_eq!(s.column(Schema::STAR).name, "*");
        assert_eq!(s.qualified_column(Schema::STAR), "*");
    }

    #[test]
    fn lookup_is_leftmost() {
        let mut s = Schema::new("db");
        let cars = s.add_table("cars");
        let makers = s.add_table("makers");
        let c1 = s.add_column(cars, "name");
        let _c2 = s.add_column(makers, "name");
        assert_eq!(s.find_column("name"), Some(c1));
        assert_eq!(s.find_table("makers"), Some(makers));
        assert_eq!(s.qualified_column(c1), "cars.name");
    }

    #[test]
    fn mention_words_split() {
        assert_eq!(mention_words("max_speed"), ["max", "speed"]);
        assert_eq!(mention_words("year"), ["year"]);
    }

    #[test]
    fn foreign_keys_connect_tables() {
        let mut s = Schema::new("db");
        let cars = s.add_table("cars");
        let makers = s.add_table("makers");
        let shops = s.add_table("shops");
        let maker_col = s.add_column_tagged(cars, "maker", ValueDomain::Number);
        let maker_id = s.add_column_tagged(makers, "id", ValueDomain::Number);
        let _city = s.add_column(shops, "city");
        s.add_foreign_key(maker_col, maker_id);
        assert_eq!(s.foreign_keys(), &[(maker_col, maker_id)]);
        assert!(s.joinable(cars, makers));
        assert!(s.joinable(makers, cars));
        assert!(!s.joinable(cars, shops));
        assert_eq!(s.column(maker_col).domain, ValueDomain::Number);
        assert_eq!(s.column(Schema::STAR).domain, ValueDomain::Text);
    }

    #[test]
    #[should_panic(expected = "foreign key endpoint is `*`")]
    fn foreign_key_to_star_is_rejected() {
        let mut s = Schema::new("db");
        let cars = s.add_table("cars");
        let id = s.add_column(cars, "id");
        s.add_foreign_key(id, Schema::STAR);
    }
}

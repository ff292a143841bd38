// Copyright 2026 The joinsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! In-memory relations, string interning, alias slots and the global column
//! layout.
//!
//! Every cell is stored as an `i64`: integer columns hold their value,
//! string columns hold an id issued by the catalog's [`Interner`]. Filter
//! literals are resolved through the same interner, so all predicate
//! evaluation reduces to integer comparison.
//!
//! A base table referenced several times by one query occupies several
//! [`AliasSlot`]s. Slots share the base relation's rows; only the global
//! indexing differs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sql::SqlQuery;

pub type Value = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Int,
    Str,
}

impl Domain {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "int" => Ok(Domain::Int),
            "str" => Ok(Domain::Str),
            other => Err(Error::UnknownDomain(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Int => "int",
            Domain::Str => "str",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub domain: Domain,
}

/// A named table. Values are stored column-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    name: String,
    columns: Vec<Column>,
    data: Vec<Vec<Value>>,
    row_count: usize,
}

impl Relation {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        let data = vec![Vec::new(); columns.len()];
        Self {
            name: name.into(),
            columns,
            data,
            row_count: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_values(&self, column: usize) -> &[Value] {
        &self.data[column]
    }

    pub fn value(&self, row: usize, column: usize) -> Value {
        self.data[column][row]
    }

    pub fn row(&self, row: usize) -> Vec<Value> {
        self.data.iter().map(|col| col[row]).collect()
    }

    /// Appends one tuple. Fails if its arity differs from the column count.
    pub fn push_row(&mut self, row: &[Value]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidQuery(format!(
                "row of arity {} pushed into `{}` with {} columns",
                row.len(),
                self.name,
                self.columns.len()
            )));
        }
        for (col, &v) in self.data.iter_mut().zip(row) {
            col.push(v);
        }
        self.row_count += 1;
        Ok(())
    }
}

/// Bidirectional string ↔ id table shared by every string column.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    ids: HashMap<String, Value>,
    strings: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> Value {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as Value;
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<Value> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, id: Value) -> Option<&str> {
        usize::try_from(id)
            .ok()
            .and_then(|i| self.strings.get(i))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// The database: relations by name plus the shared interner. Immutable once
/// built.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    relations: BTreeMap<String, Relation>,
    interner: Interner,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_relation(&mut self, relation: Relation) {
        self.relations.insert(relation.name.clone(), relation);
    }

    pub fn relation(&self, name: &str) -> Result<&Relation> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn interner_mut(&mut self) -> &mut Interner {
        &mut self.interner
    }

    /// Renders a stored cell back to its textual form.
    pub fn display_value(&self, domain: Domain, value: Value) -> String {
        match domain {
            Domain::Int => value.to_string(),
            Domain::Str => self.interner.resolve(value).unwrap_or("").to_string(),
        }
    }
}

const SCHEMA_HEADER: [&str; 3] = ["relation", "column", "domain"];

/// Loads a catalog from a schema descriptor (`relation,column,domain` rows)
/// and one `<relation>.csv` per relation in `data_dir`.
pub fn load_catalog(schema_path: &Path, data_dir: &Path) -> Result<Catalog> {
    let mut reader = csv_reader(schema_path)?;
    let header = reader
        .headers()
        .map_err(|e| csv_error(schema_path, e))?
        .clone();
    if header.iter().map(str::trim).ne(SCHEMA_HEADER) {
        return Err(Error::format(
            schema_path,
            1,
            "schema header must be `relation,column,domain`",
        ));
    }

    let mut declared: Vec<(String, Vec<Column>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(schema_path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::ArityMismatch {
                path: schema_path.to_path_buf(),
                line,
                expected: 3,
                found: record.len(),
            });
        }
        let relation = record[0].trim().to_string();
        let column = Column {
            name: record[1].trim().to_string(),
            domain: Domain::parse(&record[2])?,
        };
        match declared.iter_mut().find(|(r, _)| *r == relation) {
            Some((_, cols)) => cols.push(column),
            None => declared.push((relation, vec![column])),
        }
    }

    let mut catalog = Catalog::new();
    for (name, columns) in declared {
        let path = data_dir.join(format!("{name}.csv"));
        let relation = load_relation(&path, name, columns, &mut catalog.interner)?;
        catalog.add_relation(relation);
    }
    Ok(catalog)
}

fn load_relation(
    path: &Path,
    name: String,
    columns: Vec<Column>,
    interner: &mut Interner,
) -> Result<Relation> {
    let mut relation = Relation::new(name, columns);
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        // Empty file: a declared relation with no rows.
        return Ok(relation);
    }
    let names: Vec<&str> = relation.columns.iter().map(|c| c.name.as_str()).collect();
    if header.iter().map(str::trim).ne(names.iter().copied()) {
        return Err(Error::format(
            path,
            1,
            format!("header does not match declared columns {names:?}"),
        ));
    }

    let mut row = Vec::with_capacity(names.len());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != relation.columns.len() {
            return Err(Error::ArityMismatch {
                path: path.to_path_buf(),
                line,
                expected: relation.columns.len(),
                found: record.len(),
            });
        }
        row.clear();
        for (field, column) in record.iter().zip(&relation.columns) {
            let v = match column.domain {
                Domain::Int => field.trim().parse::<Value>().map_err(|_| {
                    Error::format(
                        path,
                        line,
                        format!("`{field}` is not an integer (column `{}`)", column.name),
                    )
                })?,
                Domain::Str => interner.intern(field),
            };
            row.push(v);
        }
        relation.push_row(&row)?;
    }
    Ok(relation)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::format(path, line, err.to_string())
}

/// Writes `schema.csv` plus one data file per relation into `dir`.
pub fn write_catalog(catalog: &Catalog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema_path = dir.join("schema.csv");
    let mut schema = csv::Writer::from_path(&schema_path).map_err(|e| csv_error(&schema_path, e))?;
    schema
        .write_record(SCHEMA_HEADER)
        .map_err(|e| csv_error(&schema_path, e))?;
    for rel in catalog.relations() {
        for col in rel.columns() {
            schema
                .write_record([rel.name(), col.name.as_str(), col.domain.as_str()])
                .map_err(|e| csv_error(&schema_path, e))?;
        }
    }
    schema.flush().map_err(|e| Error::io(&schema_path, e))?;

    for rel in catalog.relations() {
        let path = dir.join(format!("{}.csv", rel.name()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(rel.columns().iter().map(|c| c.name.as_str()))
            .map_err(|e| csv_error(&path, e))?;
        for r in 0..rel.row_count() {
            let fields: Vec<String> = rel
                .columns()
                .iter()
                .enumerate()
                .map(|(c, col)| catalog.display_value(col.domain, rel.value(r, c)))
                .collect();
            w.write_record(&fields).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Recipe for a synthetic database.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub tables: Vec<SyntheticTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTable {
    pub name: String,
    pub rows: usize,
    /// Zipf exponent shared by the table's random columns; 0 is uniform.
    #[serde(default)]
    pub skew: f64,
    pub columns: Vec<SyntheticColumn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticColumn {
    pub name: String,
    /// `serial` columns hold 0..rows in order (a key); `random` columns draw
    /// from 0..domain.
    #[serde(default)]
    pub kind: ColumnKind,
    #[serde(default = "default_domain_size")]
    pub domain: u64,
    #[serde(default = "default_value_domain")]
    pub values: Domain,
}

fn default_domain_size() -> u64 {
    1
}

fn default_value_domain() -> Domain {
    Domain::Int
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Serial,
    #[default]
    Random,
}

/// Text form of the `rank`-th value of a synthetic string column.
pub fn synthetic_string(column: &str, rank: u64) -> String {
    format!("{column}_{rank}")
}

/// Builds a catalog from `spec`. Identical `(spec, seed)` pairs give
/// identical catalogs.
pub fn generate_synthetic_db(spec: &SyntheticSpec, seed: u64) -> Result<Catalog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut catalog = Catalog::new();
    for table in &spec.tables {
        if !(table.skew >= 0.0 && table.skew.is_finite()) {
            return Err(Error::Config(format!(
                "table `{}`: skew must be a finite value >= 0",
                table.name
            )));
        }
        let columns = table
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                domain: c.values,
            })
            .collect();
        let mut relation = Relation::new(table.name.clone(), columns);
        let mut data: Vec<Vec<Value>> = Vec::with_capacity(table.columns.len());
        for col in &table.columns {
            if col.domain == 0 {
                return Err(Error::Config(format!(
                    "column `{}.{}`: domain size must be >= 1",
                    table.name, col.name
                )));
            }
            let ranks: Vec<u64> = match col.kind {
                ColumnKind::Serial => (0..table.rows as u64).collect(),
                ColumnKind::Random => sample_ranks(&mut rng, table.rows, col.domain, table.skew)?,
            };
            let values = ranks
                .into_iter()
                .map(|rank| match col.values {
                    Domain::Int => rank as Value,
                    Domain::Str => catalog
                        .interner
                        .intern(&synthetic_string(&col.name, rank)),
                })
                .collect();
            data.push(values);
        }
        let mut row = vec![0; data.len()];
        for r in 0..table.rows {
            for (slot, col) in row.iter_mut().zip(&data) {
                *slot = col[r];
            }
            relation.push_row(&row)?;
        }
        catalog.add_relation(relation);
    }
    Ok(catalog)
}

fn sample_ranks(rng: &mut ChaCha8Rng, rows: usize, domain: u64, skew: f64) -> Result<Vec<u64>> {
    if skew == 0.0 {
        return Ok((0..rows).map(|_| rng.gen_range(0..domain)).collect());
    }
    let weights = (0..domain).map(|k| ((k + 1) as f64).powf(-skew));
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::Config(format!("zipf weights: {e}")))?;
    Ok((0..rows).map(|_| dist.sample(rng) as u64).collect())
}

/// Global index of one column of one alias slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnId(pub usize);

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// One positional occurrence of a base table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AliasSlot {
    pub index: usize,
    pub base_table: String,
    /// 1-based.
    pub occurrence: usize,
}

/// Assigns alias slots for a workload: each base table gets as many slots as
/// its largest occurrence count in any single query, ordered by
/// `(table name, occurrence)`.
pub fn build_alias_registry(catalog: &Catalog, workload: &[SqlQuery]) -> Result<Vec<AliasSlot>> {
    let mut max_occ: BTreeMap<&str, usize> = BTreeMap::new();
    for query in workload {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &query.from {
            catalog.relation(&t.table)?;
            *counts.entry(t.table.as_str()).or_default() += 1;
        }
        for (table, n) in counts {
            let entry = max_occ.entry(table).or_default();
            *entry = (*entry).max(n);
        }
    }
    let mut slots = Vec::new();
    for (table, n) in max_occ {
        for occurrence in 1..=n {
            slots.push(AliasSlot {
                index: slots.len(),
                base_table: table.to_string(),
                occurrence,
            });
        }
    }
    Ok(slots)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutColumn {
    pub slot: usize,
    /// Position of the column inside its base relation.
    pub position: usize,
    pub name: String,
    pub domain: Domain,
}

/// The column registry: fixes the global numbering of alias slots and of
/// every column of every slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    slots: Vec<AliasSlot>,
    columns: Vec<LayoutColumn>,
    offsets: Vec<usize>,
}

pub const MAX_SLOTS: usize = 64;

impl Layout {
    pub fn new(catalog: &Catalog, slots: Vec<AliasSlot>) -> Result<Self> {
        if slots.len() > MAX_SLOTS {
            return Err(Error::OutOfRange {
                what: "alias slot count",
                detail: format!("{} slots, at most {MAX_SLOTS} supported", slots.len()),
            });
        }
        let mut columns = Vec::new();
        let mut offsets = Vec::with_capacity(slots.len() + 1);
        for (i, slot) in slots.iter().enumerate() {
            if slot.index != i {
                return Err(Error::Config(format!(
                    "alias slot {} stored at position {i}",
                    slot.index
                )));
            }
            offsets.push(columns.len());
            let rel = catalog.relation(&slot.base_table)?;
            for (position, col) in rel.columns().iter().enumerate() {
                columns.push(LayoutColumn {
                    slot: i,
                    position,
                    name: col.name.clone(),
                    domain: col.domain,
                });
            }
        }
        offsets.push(columns.len());
        Ok(Self {
            slots,
            columns,
            offsets,
        })
    }

    pub fn n_tables(&self) -> usize {
        self.slots.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn slots(&self) -> &[AliasSlot] {
        &self.slots
    }

    pub fn slot(&self, index: usize) -> &AliasSlot {
        &self.slots[index]
    }

    pub fn slot_columns(&self, slot: usize) -> Range<usize> {
        self.offsets[slot]..self.offsets[slot + 1]
    }

    pub fn column(&self, id: ColumnId) -> &LayoutColumn {
        &self.columns[id.0]
    }

    pub fn columns(&self) -> &[LayoutColumn] {
        &self.columns
    }

    pub fn find_slot(&self, table: &str, occurrence: usize) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.base_table == table && s.occurrence == occurrence)
    }

    pub fn column_id(&self, slot: usize, name: &str) -> Option<ColumnId> {
        self.slot_columns(slot)
            .find(|&c| self.columns[c].name == name)
            .map(ColumnId)
    }

    /// `table.column#occurrence` label for diagnostics.
    pub fn column_label(&self, id: ColumnId) -> String {
        let col = self.column(id);
        let slot = &self.slots[col.slot];
        format!("{}#{}.{}", slot.base_table, slot.occurrence, col.name)
    }
}

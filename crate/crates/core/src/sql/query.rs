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

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::{CmpOp, ColRef, Literal, SqlPredicate, SqlQuery};
use super::parser::parse_sql;
use crate::catalog::{ColumnId, Domain, Layout};
use crate::error::{Error, Result};

/// Unary filter over the columns of one alias slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPredicate {
    Equals(ColumnId, Literal),
    InSet(ColumnId, Vec<Literal>),
    Less(ColumnId, i64),
    Greater(ColumnId, i64),
    And(Vec<FilterPredicate>),
}

impl FilterPredicate {
    pub fn columns(&self) -> Vec<ColumnId> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut Vec<ColumnId>) {
        match self {
            FilterPredicate::Equals(c, _)
            | FilterPredicate::InSet(c, _)
            | FilterPredicate::Less(c, _)
            | FilterPredicate::Greater(c, _) => out.push(*c),
            FilterPredicate::And(children) => {
                for child in children {
                    child.collect_columns(out);
                }
            }
        }
    }

    fn and(self, other: FilterPredicate) -> FilterPredicate {
        match self {
            FilterPredicate::And(mut children) => {
                children.push(other);
                FilterPredicate::And(children)
            }
            first => FilterPredicate::And(vec![first, other]),
        }
    }
}

/// Equality join predicate, stored with the smaller slot on the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JoinPredicate {
    pub left: ColumnId,
    pub right: ColumnId,
}

impl JoinPredicate {
    /// Orients `(a, b)` so that the column of the smaller slot comes first.
    pub fn canonical(layout: &Layout, a: ColumnId, b: ColumnId) -> Result<Self> {
        let (sa, sb) = (layout.column(a).slot, layout.column(b).slot);
        if sa == sb {
            return Err(Error::SelfJoin(format!(
                "{} = {}",
                layout.column_label(a),
                layout.column_label(b)
            )));
        }
        Ok(if sa < sb {
            JoinPredicate { left: a, right: b }
        } else {
            JoinPredicate { left: b, right: a }
        })
    }
}

/// A query in `(I, U, J)` form over global slot and column indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub sql: String,
    /// Alias slots in `I`, ascending.
    pub tables: Vec<usize>,
    pub filters: BTreeMap<usize, FilterPredicate>,
    pub joins: BTreeSet<JoinPredicate>,
}

impl Query {
    /// Bitmask of `I`.
    pub fn table_mask(&self) -> u64 {
        self.tables.iter().fold(0, |m, &s| m | (1u64 << s))
    }

    /// Checks the structural invariants against `layout`.
    pub fn validate(&self, layout: &Layout) -> Result<()> {
        if self.tables.len() < 2 {
            return Err(Error::InvalidQuery(format!(
                "`{}` references {} table(s); at least 2 are required",
                self.id,
                self.tables.len()
            )));
        }
        if self.tables.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidQuery(format!("`{}`: table set not sorted", self.id)));
        }
        if let Some(&s) = self.tables.iter().find(|&&s| s >= layout.n_tables()) {
            return Err(Error::InvalidQuery(format!("`{}`: slot {s} outside layout", self.id)));
        }
        let mask = self.table_mask();
        for j in &self.joins {
            for c in [j.left, j.right] {
                if c.0 >= layout.n_cols() || mask & (1 << layout.column(c).slot) == 0 {
                    return Err(Error::InvalidQuery(format!(
                        "`{}`: join column {c} outside the table set",
                        self.id
                    )));
                }
            }
            if layout.column(j.left).slot >= layout.column(j.right).slot {
                return Err(Error::InvalidQuery(format!(
                    "`{}`: join predicate not canonical",
                    self.id
                )));
            }
        }
        for (&slot, f) in &self.filters {
            if mask & (1 << slot) == 0 {
                return Err(Error::InvalidQuery(format!(
                    "`{}`: filter on slot {slot} outside the table set",
                    self.id
                )));
            }
            for c in f.columns() {
                if c.0 >= layout.n_cols() || layout.column(c).slot != slot {
                    return Err(Error::InvalidQuery(format!(
                        "`{}`: filter column {c} not in slot {slot}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Maps the aliases of one parsed query onto alias slots: the k-th FROM
/// entry naming base table `T` takes slot `(T, k)`.
pub fn alias_slots(ast: &SqlQuery, layout: &Layout) -> Result<HashMap<String, usize>> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut aliases = HashMap::new();
    for t in &ast.from {
        let occ = seen.entry(t.table.as_str()).or_default();
        *occ += 1;
        let slot = layout.find_slot(&t.table, *occ).ok_or_else(|| {
            Error::Config(format!(
                "no alias slot for occurrence {} of `{}`",
                *occ, t.table
            ))
        })?;
        if aliases.insert(t.alias.clone(), slot).is_some() {
            return Err(Error::DuplicateAlias(t.alias.clone()));
        }
    }
    Ok(aliases)
}

fn resolve_column(
    col: &ColRef,
    aliases: &HashMap<String, usize>,
    layout: &Layout,
) -> Result<ColumnId> {
    let slot = *aliases
        .get(&col.alias)
        .ok_or_else(|| Error::UnknownAlias(col.alias.clone()))?;
    layout
        .column_id(slot, &col.column)
        .ok_or_else(|| Error::UnknownColumn {
            relation: layout.slot(slot).base_table.clone(),
            column: col.column.clone(),
        })
}

fn check_literal(layout: &Layout, c: ColumnId, lit: &Literal) -> Result<()> {
    let ok = matches!(
        (layout.column(c).domain, lit),
        (Domain::Int, Literal::Int(_)) | (Domain::Str, Literal::Str(_))
    );
    if ok {
        Ok(())
    } else {
        Err(Error::TypeMismatch(format!(
            "literal {lit} compared with {} column {}",
            layout.column(c).domain.as_str(),
            layout.column_label(c)
        )))
    }
}

/// Resolves a parsed query against the global layout.
pub fn resolve(id: &str, ast: &SqlQuery, layout: &Layout) -> Result<Query> {
    let aliases = alias_slots(ast, layout)?;
    let mut filters: BTreeMap<usize, FilterPredicate> = BTreeMap::new();
    let mut joins = BTreeSet::new();
    for pred in &ast.predicates {
        match pred {
            SqlPredicate::Join(l, r) => {
                let (a, b) = (
                    resolve_column(l, &aliases, layout)?,
                    resolve_column(r, &aliases, layout)?,
                );
                if layout.column(a).slot == layout.column(b).slot {
                    return Err(Error::SelfJoin(pred.to_string()));
                }
                if layout.column(a).domain != layout.column(b).domain {
                    return Err(Error::TypeMismatch(format!(
                        "join `{pred}` compares int and str columns"
                    )));
                }
                joins.insert(JoinPredicate::canonical(layout, a, b)?);
            }
            SqlPredicate::Compare { column, op, value } => {
                let c = resolve_column(column, &aliases, layout)?;
                check_literal(layout, c, value)?;
                let f = match (op, value) {
                    (CmpOp::Eq, v) => FilterPredicate::Equals(c, v.clone()),
                    (CmpOp::Lt, Literal::Int(v)) => FilterPredicate::Less(c, *v),
                    (CmpOp::Gt, Literal::Int(v)) => FilterPredicate::Greater(c, *v),
                    (_, Literal::Str(_)) => {
                        return Err(Error::TypeMismatch(format!(
                            "`{pred}`: ordering comparisons need an integer literal"
                        )))
                    }
                };
                add_filter(&mut filters, layout.column(c).slot, f);
            }
            SqlPredicate::In { column, values } => {
                let c = resolve_column(column, &aliases, layout)?;
                for v in values {
                    check_literal(layout, c, v)?;
                }
                add_filter(&mut filters, layout.column(c).slot, FilterPredicate::InSet(c, values.clone()));
            }
        }
    }
    let mut tables: Vec<usize> = aliases.values().copied().collect();
    tables.sort_unstable();
    let query = Query {
        id: id.to_string(),
        sql: ast.to_string(),
        tables,
        filters,
        joins,
    };
    query.validate(layout)?;
    Ok(query)
}

fn add_filter(filters: &mut BTreeMap<usize, FilterPredicate>, slot: usize, f: FilterPredicate) {
    let merged = match filters.remove(&slot) {
        Some(existing) => existing.and(f),
        None => f,
    };
    filters.insert(slot, merged);
}

/// Parses and resolves in one step.
pub fn parse_query(id: &str, text: &str, layout: &Layout) -> Result<Query> {
    let mut query = resolve(id, &parse_sql(text)?, layout)?;
    query.sql = text.trim().to_string();
    Ok(query)
}

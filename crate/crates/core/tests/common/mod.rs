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

//! Shared fixtures and brute-force oracles for the integration tests.

#![allow(dead_code)]

use std::path::Path;

use joinsim::catalog::{generate_synthetic_db, Catalog, Column, Domain, Layout, Relation, SyntheticSpec};
use joinsim::engine::{build_full_trace, CardinalityOracle, DEFAULT_TRACE_LIMIT};
use joinsim::graph::QueryGraph;
use joinsim::planner::fill_optimal_costs;
use joinsim::sql::{parse_sql, FilterPredicate, Literal, Query, QuerySet, QueryText};
use joinsim::trace::TraceStore;
use rand::seq::SliceRandom;
use rand::Rng;

/// Column spec: `(name, domain)`.
pub type Cols<'a> = &'a [(&'a str, Domain)];

/// Adds a relation from literal rows; string cells are interned.
pub fn add_table(catalog: &mut Catalog, name: &str, cols: Cols<'_>, rows: &[Vec<Literal>]) {
    let columns = cols
        .iter()
        .map(|&(n, d)| Column {
            name: n.to_string(),
            domain: d,
        })
        .collect();
    let mut rel = Relation::new(name, columns);
    for row in rows {
        let values: Vec<i64> = row
            .iter()
            .map(|v| match v {
                Literal::Int(i) => *i,
                Literal::Str(s) => catalog.interner_mut().intern(s),
            })
            .collect();
        rel.push_row(&values).unwrap();
    }
    catalog.add_relation(rel);
}

/// Integer-only table from rows of numbers.
pub fn int_table(catalog: &mut Catalog, name: &str, cols: &[&str], rows: &[Vec<i64>]) {
    let spec: Vec<(&str, Domain)> = cols.iter().map(|&c| (c, Domain::Int)).collect();
    let rows: Vec<Vec<Literal>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| Literal::Int(v)).collect())
        .collect();
    add_table(catalog, name, &spec, &rows);
}

/// Parses `(id, sql)` pairs into one query set.
pub fn query_set(catalog: &Catalog, queries: &[(&str, &str)]) -> QuerySet {
    let texts: Vec<QueryText> = queries
        .iter()
        .map(|(id, sql)| QueryText {
            id: id.to_string(),
            ast: parse_sql(sql).unwrap_or_else(|e| panic!("{id}: {e}\n{sql}")),
        })
        .collect();
    QuerySet::build(catalog, &texts).unwrap()
}

/// Builds complete traces with optimal costs filled in.
pub fn traced_store(catalog: &Catalog, set: QuerySet) -> TraceStore {
    let traces = set
        .queries
        .iter()
        .map(|q| {
            let oracle = CardinalityOracle::new(catalog, &set.layout, q).unwrap();
            let mut trace = build_full_trace(&oracle, DEFAULT_TRACE_LIMIT).unwrap();
            fill_optimal_costs(&mut trace, &QueryGraph::new(q, &set.layout)).unwrap();
            trace
        })
        .collect();
    TraceStore::new(set, traces).unwrap()
}

pub fn store_from_sql(catalog: &Catalog, queries: &[(&str, &str)]) -> TraceStore {
    traced_store(catalog, query_set(catalog, queries))
}

/// Random catalog: tables `r0..`, integer columns `a`, `b` over small
/// domains, a string column `s`, and 1..=`max_rows` rows.
pub fn random_catalog(rng: &mut impl Rng, tables: usize, max_rows: usize) -> Catalog {
    let mut catalog = Catalog::new();
    for t in 0..tables {
        let rows = rng.gen_range(1..=max_rows);
        let data: Vec<Vec<Literal>> = (0..rows)
            .map(|_| {
                vec![
                    Literal::Int(rng.gen_range(0..4)),
                    Literal::Int(rng.gen_range(0..3)),
                    Literal::Str(format!("v{}", rng.gen_range(0..3))),
                ]
            })
            .collect();
        add_table(
            &mut catalog,
            &format!("r{t}"),
            &[("a", Domain::Int), ("b", Domain::Int), ("s", Domain::Str)],
            &data,
        );
    }
    catalog
}

/// Random conjunctive query over `aliases` occurrences of the catalog's
/// tables (repeats allowed). Graphs may be disconnected, may hold several
/// predicates per pair, and may join a table with itself.
pub fn random_sql(rng: &mut impl Rng, tables: usize, aliases: usize, connect_p: f64) -> String {
    let from: Vec<String> = (0..aliases).map(|i| format!("r{} AS x{i}", rng.gen_range(0..tables))).collect();
    let mut preds = Vec::new();
    let int_col = |rng: &mut dyn rand::RngCore| ["a", "b"][rng.gen_range(0..2)];
    for i in 1..aliases {
        if rng.gen_bool(connect_p) {
            let j = rng.gen_range(0..i);
            preds.push(format!("x{j}.{} = x{i}.{}", int_col(rng), int_col(rng)));
        }
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (i, j) = (rng.gen_range(0..aliases), rng.gen_range(0..aliases));
        if i != j {
            preds.push(format!("x{i}.{} = x{j}.{}", int_col(rng), int_col(rng)));
        }
    }
    if aliases > 1 && rng.gen_bool(0.2) {
        let (i, j) = (rng.gen_range(0..aliases), rng.gen_range(0..aliases));
        if i != j {
            preds.push(format!("x{i}.s = x{j}.s"));
        }
    }
    for i in 0..aliases {
        if !rng.gen_bool(0.4) {
            continue;
        }
        let p = match rng.gen_range(0..6) {
            0 => format!("x{i}.a = {}", rng.gen_range(0..4)),
            1 => format!("x{i}.a < {}", rng.gen_range(0..5)),
            2 => format!("x{i}.b > {}", rng.gen_range(-1..3)),
            3 => format!("x{i}.a IN ({}, {})", rng.gen_range(0..4), rng.gen_range(0..6)),
            4 => format!("x{i}.s = 'v{}'", rng.gen_range(0..4)),
            _ => format!("x{i}.s IN ('v{}', 'v{}') AND x{i}.b < 2", rng.gen_range(0..3), rng.gen_range(0..3)),
        };
        preds.push(p);
    }
    preds.shuffle(rng);
    let mut sql = format!("SELECT COUNT(*) FROM {}", from.join(", "));
    if !preds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&preds.join(" AND "));
    }
    sql
}

fn literal_matches(catalog: &Catalog, value: i64, lit: &Literal) -> bool {
    match lit {
        Literal::Int(i) => value == *i,
        Literal::Str(s) => catalog.interner().get(s) == Some(value),
    }
}

fn filter_holds(catalog: &Catalog, layout: &Layout, rel: &Relation, row: usize, f: &FilterPredicate) -> bool {
    let cell = |c: joinsim::ColumnId| rel.value(row, layout.column(c).position);
    match f {
        FilterPredicate::Equals(c, lit) => literal_matches(catalog, cell(*c), lit),
        FilterPredicate::InSet(c, lits) => lits.iter().any(|l| literal_matches(catalog, cell(*c), l)),
        FilterPredicate::Less(c, v) => cell(*c) < *v,
        FilterPredicate::Greater(c, v) => cell(*c) > *v,
        FilterPredicate::And(parts) => parts.iter().all(|p| filter_holds(catalog, layout, rel, row, p)),
    }
}

/// Rows of `slot` passing its filter, by direct evaluation.
pub fn brute_filtered_rows(catalog: &Catalog, layout: &Layout, query: &Query, slot: usize) -> Vec<usize> {
    let rel = catalog.relation(&layout.slot(slot).base_table).unwrap();
    (0..rel.row_count())
        .filter(|&r| query.filters.get(&slot).is_none_or(|f| filter_holds(catalog, layout, rel, r, f)))
        .collect()
}

/// Nested-loop count of the join of the slots in `mask`, applying every
/// predicate whose two sides lie in `mask`.
pub fn brute_force_count(catalog: &Catalog, layout: &Layout, query: &Query, mask: u64) -> u128 {
    let slots: Vec<usize> = query.tables.iter().copied().filter(|&s| mask & (1 << s) != 0).collect();
    let rels: Vec<&Relation> = slots
        .iter()
        .map(|&s| catalog.relation(&layout.slot(s).base_table).unwrap())
        .collect();
    let rows: Vec<Vec<usize>> = slots.iter().map(|&s| brute_filtered_rows(catalog, layout, query, s)).collect();
    let preds: Vec<(usize, usize, usize, usize)> = query
        .joins
        .iter()
        .filter_map(|j| {
            let (l, r) = (layout.column(j.left), layout.column(j.right));
            let li = slots.iter().position(|&s| s == l.slot)?;
            let ri = slots.iter().position(|&s| s == r.slot)?;
            Some((li, l.position, ri, r.position))
        })
        .collect();
    let mut chosen = vec![0usize; slots.len()];
    fn go(
        k: usize,
        rels: &[&Relation],
        rows: &[Vec<usize>],
        preds: &[(usize, usize, usize, usize)],
        chosen: &mut Vec<usize>,
    ) -> u128 {
        if k == rows.len() {
            let ok = preds
                .iter()
                .all(|&(li, lc, ri, rc)| rels[li].value(chosen[li], lc) == rels[ri].value(chosen[ri], rc));
            return ok as u128;
        }
        let mut total = 0;
        for &r in &rows[k] {
            chosen[k] = r;
            total += go(k + 1, rels, rows, preds, chosen);
        }
        total
    }
    go(0, &rels, &rows, &preds, &mut chosen)
}

/// The mini movie database used by the CLI fixtures.
pub fn movie_db(seed: u64) -> Catalog {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/imdb_mini.toml");
    let text = std::fs::read_to_string(path).unwrap();
    let spec: SyntheticSpec = toml::from_str(&text).unwrap();
    generate_synthetic_db(&spec, seed).unwrap()
}

pub fn fixture_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Instances of every fixture template over the movie database, traced,
/// plus a 6/2/2 split per template.
pub fn movie_workload(per_template: usize, seed: u64) -> (Catalog, TraceStore, joinsim::sql::Split) {
    let catalog = movie_db(seed);
    let templates = joinsim::sql::load_templates(&fixture_dir().join("templates"), &catalog).unwrap();
    let mut texts = Vec::new();
    let mut groups = Vec::new();
    for (k, t) in templates.iter().enumerate() {
        let inst = joinsim::sql::generate_instances(t, per_template, seed + k as u64).unwrap();
        groups.push((t.name.clone(), inst.iter().map(|q| q.id.clone()).collect::<Vec<_>>()));
        texts.extend(inst);
    }
    let set = QuerySet::build(&catalog, &texts).unwrap();
    let n = per_template;
    let split = joinsim::sql::split_workload(&groups, (n - 2 * (n / 5), n / 5, n / 5), seed).unwrap();
    let store = traced_store(&catalog, set);
    (catalog, store, split)
}

/// Queries whose optimum under `regime` is positive and finite.
pub fn usable_ids(store: &TraceStore, regime: joinsim::Regime) -> Vec<String> {
    store
        .ids()
        .iter()
        .filter(|id| {
            let c = store.trace(id).unwrap().optimal.get(regime).unwrap();
            c.value() > 0 && !c.is_saturated()
        })
        .cloned()
        .collect()
}

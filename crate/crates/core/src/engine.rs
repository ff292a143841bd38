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

//! Exact intermediate-result cardinalities.
//!
//! The cardinality of joining a set of tables depends only on the set: every
//! merge applies all predicates between its operands, so any merge order
//! ends with the same rows under the same predicate closure. Results are
//! therefore keyed by slot bitmask.
//!
//! A subset whose induced join graph splits into several components is the
//! product of its components. A connected subset is counted by joining its
//! tables one at a time while keeping only `(projection, multiplicity)`
//! pairs over the columns that later predicates still need, so no result
//! rows are materialized and cross-component products never are.

use std::collections::{HashMap, HashSet};
use std::fmt;

use parking_lot::RwLock;

use crate::catalog::{Catalog, Domain, Layout, Relation, Value};
use crate::error::{Error, Result};
use crate::graph::{bits, QueryGraph};
use crate::sql::{FilterPredicate, Literal, Query};
use crate::trace::Trace;

/// Row count with saturating 128-bit arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cardinality {
    value: u128,
    saturated: bool,
}

impl Cardinality {
    pub const ZERO: Cardinality = Cardinality {
        value: 0,
        saturated: false,
    };
    pub const SATURATED: Cardinality = Cardinality {
        value: u128::MAX,
        saturated: true,
    };

    pub const fn exact(value: u128) -> Self {
        Self {
            value,
            saturated: false,
        }
    }

    /// Rebuilds a value read back from storage. A set `saturated` flag
    /// forces the maximum value.
    pub fn from_parts(value: u128, saturated: bool) -> Self {
        if saturated {
            Self::SATURATED
        } else {
            Self::exact(value)
        }
    }

    pub fn value(self) -> u128 {
        self.value
    }

    pub fn is_saturated(self) -> bool {
        self.saturated
    }

    pub fn saturating_add(self, other: Self) -> Self {
        match self.value.checked_add(other.value) {
            Some(v) if !(self.saturated || other.saturated) => Self::exact(v),
            _ => Self::SATURATED,
        }
    }

    pub fn saturating_mul(self, other: Self) -> Self {
        if self.value == 0 && !self.saturated || other.value == 0 && !other.saturated {
            return Self::ZERO;
        }
        match self.value.checked_mul(other.value) {
            Some(v) if !(self.saturated || other.saturated) => Self::exact(v),
            _ => Self::SATURATED,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value as f64
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.saturated {
            f.write_str("saturated")
        } else {
            write!(f, "{}", self.value)
        }
    }
}

impl std::str::FromStr for Cardinality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "saturated" {
            return Ok(Self::SATURATED);
        }
        s.parse().map(Self::exact).map_err(|_| Error::OutOfRange {
            what: "cardinality",
            detail: format!("`{s}` is not a count"),
        })
    }
}

/// Serialized as a decimal string (or `saturated`): JSON numbers cannot
/// hold every `u128`.
impl serde::Serialize for Cardinality {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Cardinality {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::iter::Sum for Cardinality {
    fn sum<I: Iterator<Item = Cardinality>>(iter: I) -> Self {
        iter.fold(Cardinality::ZERO, Cardinality::saturating_add)
    }
}

/// One alias slot after its unary filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredTable {
    pub slot: usize,
    /// Indices into the base relation, ascending.
    pub rows: Vec<u32>,
    pub selectivity: f64,
}

impl FilteredTable {
    pub fn cardinality(&self) -> Cardinality {
        Cardinality::exact(self.rows.len() as u128)
    }
}

enum CompiledFilter {
    /// `None`: the literal never occurs in the data.
    Eq(usize, Option<Value>),
    In(usize, HashSet<Value>),
    Lt(usize, Value),
    Gt(usize, Value),
    And(Vec<CompiledFilter>),
}

impl CompiledFilter {
    fn matches(&self, rel: &Relation, row: usize) -> bool {
        match self {
            CompiledFilter::Eq(c, v) => v.is_some_and(|v| rel.value(row, *c) == v),
            CompiledFilter::In(c, set) => set.contains(&rel.value(row, *c)),
            CompiledFilter::Lt(c, v) => rel.value(row, *c) < *v,
            CompiledFilter::Gt(c, v) => rel.value(row, *c) > *v,
            CompiledFilter::And(children) => children.iter().all(|f| f.matches(rel, row)),
        }
    }
}

fn compile(
    pred: &FilterPredicate,
    slot: usize,
    layout: &Layout,
    catalog: &Catalog,
) -> Result<CompiledFilter> {
    let column = |c: crate::catalog::ColumnId| -> Result<(usize, Domain)> {
        if c.0 >= layout.n_cols() || layout.column(c).slot != slot {
            return Err(Error::InvalidQuery(format!(
                "filter column {c} does not belong to slot {slot}"
            )));
        }
        let col = layout.column(c);
        Ok((col.position, col.domain))
    };
    let literal = |lit: &Literal, domain: Domain, label: String| -> Result<Option<Value>> {
        match (lit, domain) {
            (Literal::Int(v), Domain::Int) => Ok(Some(*v)),
            (Literal::Str(s), Domain::Str) => Ok(catalog.interner().get(s)),
            _ => Err(Error::TypeMismatch(format!(
                "literal {lit} against {} column {label}",
                domain.as_str()
            ))),
        }
    };
    Ok(match pred {
        FilterPredicate::Equals(c, lit) => {
            let (pos, dom) = column(*c)?;
            CompiledFilter::Eq(pos, literal(lit, dom, layout.column_label(*c))?)
        }
        FilterPredicate::InSet(c, lits) => {
            let (pos, dom) = column(*c)?;
            let mut set = HashSet::new();
            for lit in lits {
                if let Some(v) = literal(lit, dom, layout.column_label(*c))? {
                    set.insert(v);
                }
            }
            CompiledFilter::In(pos, set)
        }
        FilterPredicate::Less(c, v) | FilterPredicate::Greater(c, v) => {
            let (pos, dom) = column(*c)?;
            if dom != Domain::Int {
                return Err(Error::TypeMismatch(format!(
                    "ordering comparison on str column {}",
                    layout.column_label(*c)
                )));
            }
            if matches!(pred, FilterPredicate::Less(..)) {
                CompiledFilter::Lt(pos, *v)
            } else {
                CompiledFilter::Gt(pos, *v)
            }
        }
        FilterPredicate::And(children) => CompiledFilter::And(
            children
                .iter()
                .map(|c| compile(c, slot, layout, catalog))
                .collect::<Result<_>>()?,
        ),
    })
}

/// Applies the unary filter of `slot` (if any) to its base relation.
pub fn apply_filter(
    catalog: &Catalog,
    layout: &Layout,
    slot: usize,
    predicate: Option<&FilterPredicate>,
) -> Result<FilteredTable> {
    let rel = catalog.relation(&layout.slot(slot).base_table)?;
    let rows: Vec<u32> = match predicate {
        None => (0..rel.row_count() as u32).collect(),
        Some(p) => {
            let f = compile(p, slot, layout, catalog)?;
            (0..rel.row_count())
                .filter(|&r| f.matches(rel, r))
                .map(|r| r as u32)
                .collect()
        }
    };
    let selectivity = if rel.row_count() == 0 {
        1.0
    } else {
        rows.len() as f64 / rel.row_count() as f64
    };
    Ok(FilteredTable {
        slot,
        rows,
        selectivity,
    })
}

/// Join predicate between two slots, as column positions in the base
/// relations.
#[derive(Clone, Copy, Debug)]
struct Edge {
    a: usize,
    a_pos: usize,
    b: usize,
    b_pos: usize,
}

/// Memoized exact cardinalities for one query.
pub struct CardinalityOracle<'a> {
    query: &'a Query,
    catalog: &'a Catalog,
    layout: &'a Layout,
    graph: QueryGraph,
    filtered: HashMap<usize, FilteredTable>,
    edges: Vec<Edge>,
    memo: RwLock<HashMap<u64, Cardinality>>,
}

impl<'a> CardinalityOracle<'a> {
    pub fn new(catalog: &'a Catalog, layout: &'a Layout, query: &'a Query) -> Result<Self> {
        query.validate(layout)?;
        let mut filtered = HashMap::new();
        for &slot in &query.tables {
            filtered.insert(
                slot,
                apply_filter(catalog, layout, slot, query.filters.get(&slot))?,
            );
        }
        let edges = query
            .joins
            .iter()
            .map(|j| {
                let (l, r) = (layout.column(j.left), layout.column(j.right));
                Edge {
                    a: l.slot,
                    a_pos: l.position,
                    b: r.slot,
                    b_pos: r.position,
                }
            })
            .collect();
        Ok(Self {
            query,
            catalog,
            layout,
            graph: QueryGraph::new(query, layout),
            filtered,
            edges,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn query(&self) -> &Query {
        self.query
    }

    pub fn graph(&self) -> &QueryGraph {
        &self.graph
    }

    pub fn filtered(&self, slot: usize) -> Option<&FilteredTable> {
        self.filtered.get(&slot)
    }

    fn relation(&self, slot: usize) -> &Relation {
        self.catalog
            .relation(&self.layout.slot(slot).base_table)
            .expect("validated at construction")
    }

    /// Cardinality of the join of all tables in `subset`.
    pub fn subset_cardinality(&self, subset: u64) -> Result<Cardinality> {
        if subset == 0 || subset & !self.graph.full_mask() != 0 {
            return Err(Error::InvalidSubset(subset));
        }
        if let Some(&c) = self.memo.read().get(&subset) {
            return Ok(c);
        }
        let components = self.graph.components(subset);
        let card = if components.len() > 1 {
            let mut product = Cardinality::exact(1);
            for comp in components {
                product = product.saturating_mul(self.subset_cardinality(comp)?);
            }
            product
        } else if subset.count_ones() == 1 {
            self.filtered[&(subset.trailing_zeros() as usize)].cardinality()
        } else {
            self.count_connected(subset)
        };
        self.memo.write().entry(subset).or_insert(card);
        Ok(card)
    }

    fn count_connected(&self, mask: u64) -> Cardinality {
        let size = |s: usize| self.filtered[&s].rows.len();
        if bits(mask).any(|s| size(s) == 0) {
            return Cardinality::ZERO;
        }
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| mask & (1 << e.a) != 0 && mask & (1 << e.b) != 0)
            .copied()
            .collect();

        // Connected join order: smallest table first, then the smallest
        // neighbour of what has been joined so far.
        let mut order = Vec::with_capacity(mask.count_ones() as usize);
        let start = bits(mask).min_by_key(|&s| (size(s), s)).expect("non-empty");
        order.push(start);
        let mut joined = 1u64 << start;
        while joined != mask {
            let frontier = self.graph.neighborhood(joined) & mask & !joined;
            let next = bits(frontier)
                .min_by_key(|&s| (size(s), s))
                .expect("mask is connected");
            order.push(next);
            joined |= 1 << next;
        }

        // Columns of the joined prefix still referenced by edges leaving it.
        let live_after = |joined: u64| -> Vec<(usize, usize)> {
            let mut cols: Vec<(usize, usize)> = Vec::new();
            for e in &edges {
                for (s, pos, other) in [(e.a, e.a_pos, e.b), (e.b, e.b_pos, e.a)] {
                    if joined & (1 << s) != 0 && joined & (1 << other) == 0 && !cols.contains(&(s, pos)) {
                        cols.push((s, pos));
                    }
                }
            }
            cols.sort_unstable();
            cols
        };

        let mut saturated = false;
        let mut joined = 1u64 << start;
        let mut live = live_after(joined);
        let rel = self.relation(start);
        let mut state: HashMap<Vec<Value>, u128> = HashMap::new();
        for &r in &self.filtered[&start].rows {
            let key = live.iter().map(|&(_, p)| rel.value(r as usize, p)).collect();
            *state.entry(key).or_default() += 1;
        }

        for &t in &order[1..] {
            // (index into `live`, column position in t) per connecting edge
            let mut probe: Vec<(usize, usize)> = Vec::new();
            for e in &edges {
                let (inner, t_pos) = if e.b == t && joined & (1 << e.a) != 0 {
                    ((e.a, e.a_pos), e.b_pos)
                } else if e.a == t && joined & (1 << e.b) != 0 {
                    ((e.b, e.b_pos), e.a_pos)
                } else {
                    continue;
                };
                let idx = live.iter().position(|&c| c == inner).expect("edge column is live");
                probe.push((idx, t_pos));
            }
            let next_joined = joined | (1 << t);
            let next_live = live_after(next_joined);
            // Where each next-live column comes from: the old state or t.
            let sources: Vec<Result<usize, usize>> = next_live
                .iter()
                .map(|&(s, pos)| {
                    if s == t {
                        Err(pos)
                    } else {
                        Ok(live.iter().position(|&c| c == (s, pos)).expect("still live"))
                    }
                })
                .collect();
            let t_cols: Vec<usize> = sources.iter().filter_map(|s| s.err()).collect();

            let t_rel = self.relation(t);
            let mut t_index: HashMap<Vec<Value>, HashMap<Vec<Value>, u128>> = HashMap::new();
            for &r in &self.filtered[&t].rows {
                let r = r as usize;
                let key = probe.iter().map(|&(_, p)| t_rel.value(r, p)).collect();
                let proj = t_cols.iter().map(|&p| t_rel.value(r, p)).collect();
                *t_index.entry(key).or_default().entry(proj).or_default() += 1;
            }

            let mut next: HashMap<Vec<Value>, u128> = HashMap::new();
            let mut key = Vec::with_capacity(probe.len());
            for (tuple, &count) in &state {
                key.clear();
                key.extend(probe.iter().map(|&(i, _)| tuple[i]));
                let Some(matches) = t_index.get(&key) else { continue };
                for (proj, &t_count) in matches {
                    let mut t_iter = proj.iter();
                    let out: Vec<Value> = sources
                        .iter()
                        .map(|s| match s {
                            Ok(i) => tuple[*i],
                            Err(_) => *t_iter.next().expect("projection arity"),
                        })
                        .collect();
                    let add = count.checked_mul(t_count).unwrap_or_else(|| {
                        saturated = true;
                        u128::MAX
                    });
                    let slot = next.entry(out).or_default();
                    *slot = slot.checked_add(add).unwrap_or_else(|| {
                        saturated = true;
                        u128::MAX
                    });
                }
            }
            state = next;
            live = next_live;
            joined = next_joined;
        }

        if saturated {
            return Cardinality::SATURATED;
        }
        let mut total = Cardinality::ZERO;
        for &c in state.values() {
            total = total.saturating_add(Cardinality::exact(c));
        }
        total
    }
}

pub const DEFAULT_TRACE_LIMIT: usize = 14;

/// Computes every non-empty subset of the query's tables.
pub fn build_full_trace(oracle: &CardinalityOracle<'_>, limit: usize) -> Result<Trace> {
    let query = oracle.query();
    if query.tables.len() > limit {
        return Err(Error::TooManyTables {
            query: query.id.clone(),
            tables: query.tables.len(),
            limit,
        });
    }
    let full = query.table_mask();
    let mut trace = Trace::new(
        query.id.clone(),
        query
            .tables
            .iter()
            .map(|&s| (s, oracle.filtered[&s].selectivity))
            .collect(),
    );
    // Ascending popcount keeps the component products memo-hot.
    let mut subsets: Vec<u64> = Vec::with_capacity((1usize << query.tables.len()) - 1);
    let mut sub = full;
    while sub != 0 {
        subsets.push(sub);
        sub = (sub - 1) & full;
    }
    subsets.sort_by_key(|&m| (m.count_ones(), m));
    for mask in subsets {
        trace.insert(mask, oracle.subset_cardinality(mask)?);
    }
    trace.mark_complete();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{AliasSlot, Column};
    use crate::sql::parse_query;

    fn int_rel(name: &str, cols: &[&str], rows: &[&[i64]]) -> Relation {
        let mut r = Relation::new(
            name,
            cols.iter()
                .map(|c| Column { name: c.to_string(), domain: Domain::Int })
                .collect(),
        );
        for row in rows {
            r.push_row(row).unwrap();
        }
        r
    }

    fn setup(rels: Vec<Relation>) -> (Catalog, Layout) {
        let mut cat = Catalog::new();
        let names: Vec<String> = rels.iter().map(|r| r.name().to_string()).collect();
        for r in rels {
            cat.add_relation(r);
        }
        let slots = names
            .iter()
            .enumerate()
            .map(|(i, n)| AliasSlot { index: i, base_table: n.clone(), occurrence: 1 })
            .collect();
        let layout = Layout::new(&cat, slots).unwrap();
        (cat, layout)
    }

    #[test]
    fn cardinality_saturates() {
        let big = Cardinality::exact(u128::MAX / 2 + 1);
        assert!(big.saturating_mul(Cardinality::exact(2)).is_saturated());
        assert!(big.saturating_add(big).is_saturated());
        assert_eq!(Cardinality::SATURATED.saturating_mul(Cardinality::ZERO), Cardinality::ZERO);
        assert!(Cardinality::SATURATED.saturating_add(Cardinality::ZERO).is_saturated());
    }

    #[test]
    fn filter_selectivities() {
        let rows: Vec<[i64; 2]> = (0..10).map(|i| [i, i % 4]).collect();
        let row_refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (cat, layout) = setup(vec![
            int_rel("a", &["id", "k"], &row_refs),
            int_rel("b", &["id"], &[&[1]]),
        ]);
        let f = apply_filter(&cat, &layout, 0, None).unwrap();
        assert_eq!(f.selectivity, 1.0);

        let q = parse_query("q", "SELECT * FROM a, b WHERE a.id = b.id AND a.k IN (0, 17)", &layout).unwrap();
        let f = apply_filter(&cat, &layout, 0, q.filters.get(&0)).unwrap();
        // rows with k == 0: ids 0, 4, 8
        assert_eq!(f.rows, vec![0, 4, 8]);
        assert!((f.selectivity - 0.3).abs() < 1e-12);

        let q = parse_query("q", "SELECT * FROM a, b WHERE a.id = b.id AND a.k = 99", &layout).unwrap();
        let f = apply_filter(&cat, &layout, 0, q.filters.get(&0)).unwrap();
        assert!(f.rows.is_empty());
        assert_eq!(f.selectivity, 0.0);
    }

    #[test]
    fn empty_base_table_has_selectivity_one() {
        let (cat, layout) = setup(vec![int_rel("a", &["id"], &[]), int_rel("b", &["id"], &[&[1]])]);
        let f = apply_filter(&cat, &layout, 0, None).unwrap();
        assert_eq!(f.selectivity, 1.0);
        let q = parse_query("q", "SELECT * FROM a, b WHERE a.id = b.id", &layout).unwrap();
        let o = CardinalityOracle::new(&cat, &layout, &q).unwrap();
        assert_eq!(o.subset_cardinality(0b11).unwrap(), Cardinality::ZERO);
    }

    #[test]
    fn product_rule_and_key_join() {
        let (cat, layout) = setup(vec![
            int_rel("r", &["id"], &[&[1], &[2], &[3]]),
            int_rel("s", &["id"], &[&[1], &[2], &[3], &[4]]),
            int_rel("t", &["rid"], &[&[1], &[2], &[3], &[1], &[2]]),
        ]);
        let q = parse_query("cp", "SELECT * FROM r, s, t WHERE r.id = t.rid", &layout).unwrap();
        let o = CardinalityOracle::new(&cat, &layout, &q).unwrap();
        assert_eq!(o.subset_cardinality(0b011).unwrap().value(), 12);
        // each t row matches exactly one r row
        assert_eq!(o.subset_cardinality(0b101).unwrap().value(), 5);
        assert_eq!(o.subset_cardinality(0b111).unwrap().value(), 20);
        assert!(matches!(o.subset_cardinality(0), Err(Error::InvalidSubset(0))));
        assert!(o.subset_cardinality(0b1000).is_err());
    }

    #[test]
    fn full_trace_has_all_subsets() {
        let (cat, layout) = setup(vec![
            int_rel("r", &["id"], &[&[1], &[2]]),
            int_rel("s", &["id"], &[&[1], &[1]]),
            int_rel("t", &["id"], &[&[7]]),
        ]);
        let q = parse_query("q", "SELECT * FROM r, s, t WHERE r.id = s.id", &layout).unwrap();
        let o = CardinalityOracle::new(&cat, &layout, &q).unwrap();
        let trace = build_full_trace(&o, DEFAULT_TRACE_LIMIT).unwrap();
        assert_eq!(trace.len(), 7);
        assert!(trace.is_complete());
        assert_eq!(trace.lookup(0b111).unwrap().value(), 2);
        assert!(matches!(build_full_trace(&o, 2), Err(Error::TooManyTables { .. })));
    }
}

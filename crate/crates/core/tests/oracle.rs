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

//! The exact cardinality engine against a nested-loop count.

mod common;

use common::*;
use joinsim::engine::{apply_filter, build_full_trace, Cardinality, CardinalityOracle};
use joinsim::graph::bits;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_all_subsets(seed: u64, tables: usize, aliases: usize, max_rows: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng, tables, max_rows);
    let sql = random_sql(&mut rng, tables, aliases, 0.7);
    let set = query_set(&catalog, &[("q", &sql)]);
    let query = &set.queries[0];
    let oracle = CardinalityOracle::new(&catalog, &set.layout, query).unwrap();
    let trace = build_full_trace(&oracle, 14).unwrap();
    let full = query.table_mask();
    let mut sub = full;
    while sub != 0 {
        let expect = brute_force_count(&catalog, &set.layout, query, sub);
        assert_eq!(
            trace.lookup(sub).unwrap(),
            Cardinality::exact(expect),
            "seed {seed}, subset {sub:#x}, query {sql}"
        );
        sub = (sub - 1) & full;
    }
}

#[test]
fn matches_nested_loops_on_random_queries() {
    for seed in 0..60 {
        check_all_subsets(seed, 3, 2 + (seed as usize % 4), 7);
    }
}

#[test]
fn self_joins_use_distinct_slots() {
    let mut catalog = joinsim::Catalog::new();
    int_table(&mut catalog, "e", &["id", "boss"], &[vec![0, 0], vec![1, 0], vec![2, 1], vec![3, 1]]);
    let set = query_set(
        &catalog,
        &[("q", "SELECT * FROM e AS w, e AS m, e AS mm WHERE w.boss = m.id AND m.boss = mm.id AND w.id > 0")],
    );
    let q = &set.queries[0];
    assert_eq!(q.tables.len(), 3);
    let oracle = CardinalityOracle::new(&catalog, &set.layout, q).unwrap();
    let trace = build_full_trace(&oracle, 14).unwrap();
    // w in {1,2,3}; each has one boss and one grand-boss
    assert_eq!(trace.lookup(q.table_mask()).unwrap(), Cardinality::exact(3));
    for s in bits(q.table_mask()) {
        let expect = brute_force_count(&catalog, &set.layout, q, 1 << s);
        assert_eq!(trace.lookup(1 << s).unwrap().value(), expect);
    }
}

#[test]
fn filters_agree_with_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let catalog = random_catalog(&mut rng, 2, 20);
        let sql = random_sql(&mut rng, 2, 3, 0.5);
        let set = query_set(&catalog, &[("q", &sql)]);
        let q = &set.queries[0];
        for &slot in &q.tables {
            let got = apply_filter(&catalog, &set.layout, slot, q.filters.get(&slot)).unwrap();
            let expect: Vec<u32> = brute_filtered_rows(&catalog, &set.layout, q, slot)
                .into_iter()
                .map(|r| r as u32)
                .collect();
            assert_eq!(got.rows, expect, "{sql}");
        }
    }
}

#[test]
fn unknown_string_literal_matches_nothing() {
    let mut catalog = joinsim::Catalog::new();
    add_table(
        &mut catalog,
        "t",
        &[("k", joinsim::catalog::Domain::Int), ("name", joinsim::catalog::Domain::Str)],
        &[vec![joinsim::sql::Literal::Int(1), joinsim::sql::Literal::Str("x".into())]],
    );
    int_table(&mut catalog, "u", &["k"], &[vec![1]]);
    let set = query_set(&catalog, &[("q", "SELECT * FROM t, u WHERE t.k = u.k AND t.name = 'never seen'")]);
    let q = &set.queries[0];
    let oracle = CardinalityOracle::new(&catalog, &set.layout, q).unwrap();
    assert_eq!(oracle.subset_cardinality(q.table_mask()).unwrap(), Cardinality::ZERO);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_matches_brute_force(seed in any::<u64>(), aliases in 2usize..=4) {
        check_all_subsets(seed, 3, aliases, 6);
    }

    /// Cardinality of a subset does not depend on the order in which the
    /// engine is asked about its sub-subsets.
    #[test]
    fn memo_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let catalog = random_catalog(&mut rng, 3, 6);
        let sql = random_sql(&mut rng, 3, 4, 0.8);
        let set = query_set(&catalog, &[("q", &sql)]);
        let q = &set.queries[0];
        let full = q.table_mask();
        let cold = CardinalityOracle::new(&catalog, &set.layout, q).unwrap();
        let top_first = cold.subset_cardinality(full).unwrap();
        let warm = CardinalityOracle::new(&catalog, &set.layout, q).unwrap();
        let mut sub = full;
        while sub != 0 {
            warm.subset_cardinality(sub).unwrap();
            sub = (sub - 1) & full;
        }
        prop_assert_eq!(top_first, warm.subset_cardinality(full).unwrap());
    }

    /// A disconnected subset's size is the product of its components'.
    #[test]
    fn disconnected_subsets_multiply(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let catalog = random_catalog(&mut rng, 3, 6);
        let sql = random_sql(&mut rng, 3, 4, 0.4);
        let set = query_set(&catalog, &[("q", &sql)]);
        let q = &set.queries[0];
        let oracle = CardinalityOracle::new(&catalog, &set.layout, q).unwrap();
        let graph = oracle.graph().clone();
        let mut sub = q.table_mask();
        while sub != 0 {
            let comps = graph.components(sub);
            let product = comps
                .iter()
                .map(|&c| oracle.subset_cardinality(c).unwrap())
                .fold(Cardinality::exact(1), Cardinality::saturating_mul);
            prop_assert_eq!(oracle.subset_cardinality(sub).unwrap(), product);
            sub = (sub - 1) & q.table_mask();
        }
    }
}

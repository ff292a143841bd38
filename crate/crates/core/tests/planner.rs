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

//! Optimal planners against exhaustive search.

mod common;

use common::*;
use joinsim::engine::Cardinality;
use joinsim::env::{EnvConfig, JoinEnv};
use joinsim::graph::QueryGraph;
use joinsim::planner::{
    count_plans, enumerate_all_plan_costs, estimate_selectivities, heuristic_dp_plan, optimal,
    read_plan_file, write_plan_file, PlanTree, PlanType, Regime,
};
use joinsim::trace::TraceStore;
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum cumulative cost over every trajectory the environment allows.
fn env_minimum(env: &mut JoinEnv, mask: joinsim::env::ActionMask, cost: Cardinality, best: &mut Option<Cardinality>) {
    for a in mask.actions() {
        let mut next = env.clone();
        let step = next.step(a).unwrap();
        let c = cost.saturating_add(step.info.ir_cardinality);
        if step.done {
            if best.is_none_or(|b| c < b) {
                *best = Some(c);
            }
        } else {
            env_minimum(&mut next, step.info.action_mask, c, best);
        }
    }
}

fn random_store(seed: u64, aliases: usize, connect_p: f64) -> TraceStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng, 4, 5);
    let sql = random_sql(&mut rng, 4, aliases, connect_p);
    store_from_sql(&catalog, &[("q", &sql)])
}

fn check_store(store: &TraceStore, with_env: bool) {
    let q = store.query("q").unwrap();
    let trace = store.trace("q").unwrap();
    let graph = QueryGraph::new(q, &store.queries().layout);
    let n = q.tables.len();
    for regime in Regime::ALL {
        let plan = optimal(trace, &graph, regime).unwrap();
        plan.tree.check_covers(q.table_mask()).unwrap();
        assert_eq!(plan.tree.cost(trace).unwrap(), plan.cost);
        if regime.plan == PlanType::LeftDeep {
            assert!(plan.tree.is_left_deep());
        }
        let all = enumerate_all_plan_costs(trace, &graph, regime).unwrap();
        assert_eq!(all[0], plan.cost.total, "{regime} on {}", q.sql);
        if regime.allow_cp {
            let (l, b) = count_plans(n).unwrap();
            let expect = if regime.plan == PlanType::LeftDeep { l } else { b };
            assert_eq!(BigUint::from(all.len()), expect);
        }
        let c_star = plan.cost.total;
        if with_env && c_star.value() > 0 && !c_star.is_saturated() {
            let config = EnvConfig {
                plan_type: regime.plan,
                disable_cp: !regime.allow_cp,
                ..EnvConfig::default()
            };
            let mut env = JoinEnv::new(store, config).unwrap();
            let (_, info) = env.reset(Some("q"), None).unwrap();
            let mut best = None;
            env_minimum(&mut env, info.action_mask, Cardinality::ZERO, &mut best);
            assert_eq!(best, Some(c_star), "{regime} on {}", q.sql);
        }
    }
    assert!(trace.optimal.is_consistent(graph.is_connected(graph.full_mask())), "{}", q.sql);
}

#[test]
fn dp_equals_exhaustive_search() {
    for seed in 0..40 {
        let aliases = 2 + (seed as usize % 5);
        let p = [0.9, 0.6, 0.3][seed as usize % 3];
        check_store(&random_store(seed, aliases, p), aliases <= 5);
    }
}

#[test]
fn seven_table_plan_spaces() {
    for seed in 100..103 {
        check_store(&random_store(seed, 7, 0.7), false);
    }
}

#[test]
fn plan_counts_match_closed_forms() {
    let expect_left = [2u64, 6, 24, 120, 720, 5040];
    let expect_bushy = [2u64, 12, 120, 1680, 30240, 665280];
    for n in 2..=7 {
        let (l, b) = count_plans(n).unwrap();
        assert_eq!(l, BigUint::from(expect_left[n - 2]));
        assert_eq!(b, BigUint::from(expect_bushy[n - 2]));
    }
    assert_eq!(count_plans(17).unwrap().0.to_string(), "355687428096000");
}

#[test]
fn enumeration_refuses_large_queries() {
    let store = random_store(5, 9, 0.9);
    let q = store.query("q").unwrap();
    let graph = QueryGraph::new(q, &store.queries().layout);
    let err = enumerate_all_plan_costs(store.trace("q").unwrap(), &graph, Regime::ALL[0]);
    assert!(err.is_err());
}

#[test]
fn plan_file_round_trip() {
    let store = random_store(3, 4, 0.9);
    let q = store.query("q").unwrap();
    let graph = QueryGraph::new(q, &store.queries().layout);
    let plans: Vec<_> = Regime::ALL
        .iter()
        .map(|&r| (r, optimal(store.trace("q").unwrap(), &graph, r).unwrap()))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.plan");
    write_plan_file(&path, "q", &plans).unwrap();
    let (id, back) = read_plan_file(&path).unwrap();
    assert_eq!(id, "q");
    let trees: Vec<(Regime, PlanTree)> = plans.into_iter().map(|(r, p)| (r, p.tree)).collect();
    assert_eq!(back, trees);
}

#[test]
fn heuristic_never_beats_the_optimum() {
    let (_, store, split) = movie_workload(5, 11);
    let layout = &store.queries().layout;
    let samples: Vec<_> = split
        .train
        .iter()
        .map(|id| (store.query(id).unwrap(), store.trace(id).unwrap().as_ref()))
        .collect();
    let model = estimate_selectivities(&samples, layout).unwrap();
    assert!(!model.is_empty());
    for id in store.ids() {
        let q = store.query(id).unwrap();
        let trace = store.trace(id).unwrap();
        let graph = QueryGraph::new(q, layout);
        for regime in Regime::ALL {
            let tree = heuristic_dp_plan(q, trace, &graph, layout, &model, regime).unwrap();
            tree.check_covers(q.table_mask()).unwrap();
            let cost = tree.cost(trace).unwrap().total;
            assert!(cost >= trace.optimal.get(regime).unwrap(), "{id} {regime}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_optimum_is_minimal(seed in any::<u64>(), aliases in 2usize..=5, p in 0.2f64..1.0) {
        check_store(&random_store(seed, aliases, p), aliases <= 4);
    }

    #[test]
    fn plan_text_round_trips(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fn build(rng: &mut ChaCha8Rng, leaves: &mut Vec<usize>) -> PlanTree {
            use rand::Rng;
            if leaves.len() == 1 {
                return PlanTree::Leaf(leaves[0]);
            }
            let cut = rng.gen_range(1..leaves.len());
            let mut right = leaves.split_off(cut);
            PlanTree::join(build(rng, leaves), build(rng, &mut right))
        }
        let mut leaves: Vec<usize> = (0..n).map(|i| i * 3).collect();
        let tree = build(&mut rng, &mut leaves);
        prop_assert_eq!(tree.to_string().parse::<PlanTree>().unwrap(), tree);
    }
}

#[test]
fn disconnected_graph_can_favour_left_deep_without_cps() {
    let mut catalog = joinsim::Catalog::new();
    int_table(&mut catalog, "a", &["k"], &[vec![0]]);
    int_table(&mut catalog, "b", &["k"], &vec![vec![0]; 100]);
    int_table(&mut catalog, "c", &["k"], &[vec![7]]);
    let store = store_from_sql(&catalog, &[("q", "SELECT * FROM a, b, c WHERE a.k = b.k")]);
    let opt = &store.trace("q").unwrap().optimal;
    let get = |p, cp| opt.get(Regime::new(p, cp)).unwrap().value();
    // left-deep may start c x a (1 row); bushy must join a-b (100 rows) first
    assert_eq!(get(PlanType::LeftDeep, false), 101);
    assert_eq!(get(PlanType::Bushy, false), 200);
    assert_eq!(get(PlanType::Bushy, true), 101);
    assert!(opt.is_consistent(false));
    assert!(!opt.is_consistent(true));
}

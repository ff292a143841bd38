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

//! Optimal join plans by subset dynamic programming.
//!
//! The cost of a plan is the sum of the cardinalities of its internal nodes.
//! Four regimes are supported: left-deep or bushy trees, with or without
//! Cartesian products. Without CPs, a join must connect its operands through
//! at least one predicate unless no such join is possible at all, in which
//! case a CP is taken; this mirrors the action masks of [`crate::env`], so
//! every optimum here is reachable there.
//!
//! DP runs over local masks (bit `k` is the `k`-th slot of `I`). Ties go to
//! the smaller table index (left-deep) or to the lexicographically smaller
//! `(left, right)` split (bushy).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::catalog::Layout;
use crate::engine::Cardinality;
use crate::error::{Error, Result};
use crate::graph::{bits, QueryGraph};
use crate::sql::{JoinPredicate, Query};
use crate::trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanType {
    LeftDeep,
    Bushy,
}

impl fmt::Display for PlanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanType::LeftDeep => "left-deep",
            PlanType::Bushy => "bushy",
        })
    }
}

impl FromStr for PlanType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left-deep" | "left" => Ok(PlanType::LeftDeep),
            "bushy" => Ok(PlanType::Bushy),
            other => Err(Error::Config(format!("unknown plan type `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regime {
    pub plan: PlanType,
    pub allow_cp: bool,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::new(PlanType::LeftDeep, true),
        Regime::new(PlanType::LeftDeep, false),
        Regime::new(PlanType::Bushy, true),
        Regime::new(PlanType::Bushy, false),
    ];

    pub const fn new(plan: PlanType, allow_cp: bool) -> Self {
        Self { plan, allow_cp }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.plan, if self.allow_cp { "cp" } else { "no-cp" })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (plan, cp) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("regime `{s}` is not `<plan>/<cp|no-cp>`")))?;
        let allow_cp = match cp {
            "cp" => true,
            "no-cp" => false,
            other => return Err(Error::Config(format!("unknown CP setting `{other}`"))),
        };
        Ok(Regime::new(plan.parse()?, allow_cp))
    }
}

/// Binary join tree over alias slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PlanTree {
    Leaf(usize),
    Join(Box<PlanTree>, Box<PlanTree>),
}

impl PlanTree {
    pub fn join(left: PlanTree, right: PlanTree) -> Self {
        PlanTree::Join(Box::new(left), Box::new(right))
    }

    pub fn mask(&self) -> u64 {
        match self {
            PlanTree::Leaf(s) => 1 << s,
            PlanTree::Join(l, r) => l.mask() | r.mask(),
        }
    }

    /// Leaves from left to right. For a left-deep tree this is the join
    /// order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            PlanTree::Leaf(s) => out.push(*s),
            PlanTree::Join(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Every join's right child is a leaf.
    pub fn is_left_deep(&self) -> bool {
        match self {
            PlanTree::Leaf(_) => true,
            PlanTree::Join(l, r) => matches!(**r, PlanTree::Leaf(_)) && l.is_left_deep(),
        }
    }

    /// Internal nodes in post-order as `(left mask, right mask)`.
    pub fn merges(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        self.collect_merges(&mut out);
        out
    }

    fn collect_merges(&self, out: &mut Vec<(u64, u64)>) {
        if let PlanTree::Join(l, r) = self {
            l.collect_merges(out);
            r.collect_merges(out);
            out.push((l.mask(), r.mask()));
        }
    }

    /// Leaves distinct and covering exactly `mask`.
    pub fn check_covers(&self, mask: u64) -> Result<()> {
        let leaves = self.leaves();
        let union = leaves.iter().try_fold(0u64, |m, &s| {
            (s < 64 && m & (1 << s) == 0).then_some(m | (1 << s))
        });
        match union {
            Some(m) if m == mask => Ok(()),
            _ => Err(Error::InvalidPlan(format!(
                "tree {self} does not cover the query's tables exactly once"
            ))),
        }
    }

    /// True cost of executing this tree, from exact cardinalities.
    pub fn cost(&self, trace: &Trace) -> Result<PlanCost> {
        let per_step = self
            .merges()
            .into_iter()
            .map(|(l, r)| trace.lookup(l | r))
            .collect::<Result<Vec<_>>>()?;
        Ok(PlanCost {
            total: per_step.iter().copied().sum(),
            per_step,
        })
    }
}

impl fmt::Display for PlanTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanTree::Leaf(s) => write!(f, "{s}"),
            PlanTree::Join(l, r) => write!(f, "({l} {r})"),
        }
    }
}

impl FromStr for PlanTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        fn parse(chars: &[u8], pos: &mut usize) -> Option<PlanTree> {
            while chars.get(*pos) == Some(&b' ') {
                *pos += 1;
            }
            if chars.get(*pos) == Some(&b'(') {
                *pos += 1;
                let l = parse(chars, pos)?;
                let r = parse(chars, pos)?;
                while chars.get(*pos) == Some(&b' ') {
                    *pos += 1;
                }
                (chars.get(*pos) == Some(&b')')).then(|| *pos += 1)?;
                Some(PlanTree::join(l, r))
            } else {
                let start = *pos;
                while chars.get(*pos).is_some_and(u8::is_ascii_digit) {
                    *pos += 1;
                }
                std::str::from_utf8(&chars[start..*pos]).ok()?.parse().ok().map(PlanTree::Leaf)
            }
        }
        let bytes = s.trim().as_bytes();
        let mut pos = 0;
        match parse(bytes, &mut pos) {
            Some(tree) if pos == bytes.len() => Ok(tree),
            _ => Err(Error::InvalidPlan(format!("cannot parse plan `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanCost {
    pub total: Cardinality,
    /// One entry per internal node, in execution (post-)order.
    pub per_step: Vec<Cardinality>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub cost: PlanCost,
    pub tree: PlanTree,
}

/// Additive cost used by the DP: exact saturating integers or estimates.
trait DpCost: Copy {
    fn zero() -> Self;
    fn plus(self, other: Self) -> Self;
    fn less(self, other: Self) -> bool;
}

impl DpCost for u128 {
    fn zero() -> Self {
        0
    }
    fn plus(self, other: Self) -> Self {
        self.saturating_add(other)
    }
    fn less(self, other: Self) -> bool {
        self < other
    }
}

impl DpCost for f64 {
    fn zero() -> Self {
        0.0
    }
    fn plus(self, other: Self) -> Self {
        self + other
    }
    fn less(self, other: Self) -> bool {
        self < other
    }
}

struct LocalGraph {
    n: usize,
    adj: Vec<u32>,
    full: u32,
}

impl LocalGraph {
    fn new(graph: &QueryGraph) -> Result<Self> {
        let n = graph.len();
        if n > 24 {
            return Err(Error::OutOfRange {
                what: "planner table count",
                detail: format!("{n} tables, at most 24 supported"),
            });
        }
        Ok(Self {
            n,
            adj: graph.local_adjacency(),
            full: ((1u64 << n) - 1) as u32,
        })
    }

    fn neighborhood(&self, mask: u32) -> u32 {
        let mut out = 0;
        let mut m = mask;
        while m != 0 {
            out |= self.adj[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        out
    }

    /// Left-deep CP rule: `t` may extend `prefix` if they share a predicate
    /// or if nothing outside the prefix does.
    fn may_extend(&self, prefix: u32, t: usize) -> bool {
        self.adj[t] & prefix != 0 || self.neighborhood(prefix) & self.full & !prefix == 0
    }

    fn is_connected(&self, mask: u32) -> bool {
        if mask == 0 {
            return false;
        }
        let mut comp = mask & mask.wrapping_neg();
        loop {
            let grown = comp | (self.neighborhood(comp) & mask);
            if grown == comp {
                return comp == mask;
            }
            comp = grown;
        }
    }

    /// Sets that a CP-free bushy execution can produce: connected sets, and
    /// unions of whole connected components of the query graph (built once
    /// no predicate-connected join remains).
    fn bushy_reachable(&self) -> Vec<bool> {
        let comps: Vec<u32> = {
            let mut out = Vec::new();
            let mut rest = self.full;
            while rest != 0 {
                let mut comp = rest & rest.wrapping_neg();
                loop {
                    let grown = comp | (self.neighborhood(comp) & self.full);
                    if grown == comp {
                        break;
                    }
                    comp = grown;
                }
                out.push(comp);
                rest &= !comp;
            }
            out
        };
        (0..=self.full)
            .map(|s| {
                s != 0
                    && (self.is_connected(s)
                        || comps.iter().all(|&c| c & s == 0 || c & s == c))
            })
            .collect()
    }
}

fn left_deep_dp<C: DpCost>(g: &LocalGraph, card: &[C], allow_cp: bool) -> Option<(C, Vec<usize>)> {
    let size = 1usize << g.n;
    let mut best: Vec<Option<C>> = vec![None; size];
    let mut choice = vec![0u8; size];
    for s in 1..size as u32 {
        if s.count_ones() == 1 {
            best[s as usize] = Some(C::zero());
            continue;
        }
        let mut m = s;
        while m != 0 {
            let t = m.trailing_zeros() as usize;
            m &= m - 1;
            let prefix = s & !(1 << t);
            let Some(prev) = best[prefix as usize] else { continue };
            if !allow_cp && !g.may_extend(prefix, t) {
                continue;
            }
            let cand = prev.plus(card[s as usize]);
            if best[s as usize].is_none_or(|b| cand.less(b)) {
                best[s as usize] = Some(cand);
                choice[s as usize] = t as u8;
            }
        }
    }
    let total = best[g.full as usize]?;
    let mut order = Vec::with_capacity(g.n);
    let mut s = g.full;
    while s.count_ones() > 1 {
        let t = choice[s as usize] as usize;
        order.push(t);
        s &= !(1 << t);
    }
    order.push(s.trailing_zeros() as usize);
    order.reverse();
    Some((total, order))
}

fn bushy_dp<C: DpCost>(g: &LocalGraph, card: &[C], allow_cp: bool) -> Option<(C, LocalTree)> {
    let size = 1usize << g.n;
    let reachable = if allow_cp { Vec::new() } else { g.bushy_reachable() };
    let mut best: Vec<Option<C>> = vec![None; size];
    let mut choice = vec![0u32; size];
    for s in 1..size as u32 {
        if s.count_ones() == 1 {
            best[s as usize] = Some(C::zero());
            continue;
        }
        if !allow_cp && !reachable[s as usize] {
            continue;
        }
        // Ascending submasks; (left, right) with left < right.
        let mut left = 0u32;
        loop {
            left = left.wrapping_sub(s) & s;
            if left == 0 {
                break;
            }
            let right = s & !left;
            if left >= right {
                continue;
            }
            let (Some(a), Some(b)) = (best[left as usize], best[right as usize]) else {
                continue;
            };
            let cand = a.plus(b).plus(card[s as usize]);
            if best[s as usize].is_none_or(|cur| cand.less(cur)) {
                best[s as usize] = Some(cand);
                choice[s as usize] = left;
            }
        }
    }
    let total = best[g.full as usize]?;
    Some((total, LocalTree::rebuild(g.full, &choice)))
}

enum LocalTree {
    Leaf(usize),
    Join(Box<LocalTree>, Box<LocalTree>),
}

impl LocalTree {
    fn rebuild(s: u32, choice: &[u32]) -> Self {
        if s.count_ones() == 1 {
            return LocalTree::Leaf(s.trailing_zeros() as usize);
        }
        let left = choice[s as usize];
        LocalTree::Join(
            Box::new(Self::rebuild(left, choice)),
            Box::new(Self::rebuild(s & !left, choice)),
        )
    }

    fn to_plan(&self, slots: &[usize]) -> PlanTree {
        match self {
            LocalTree::Leaf(k) => PlanTree::Leaf(slots[*k]),
            LocalTree::Join(l, r) => PlanTree::join(l.to_plan(slots), r.to_plan(slots)),
        }
    }
}

fn left_deep_tree(order: &[usize], slots: &[usize]) -> PlanTree {
    let mut tree = PlanTree::Leaf(slots[order[0]]);
    for &k in &order[1..] {
        tree = PlanTree::join(tree, PlanTree::Leaf(slots[k]));
    }
    tree
}

/// `card[m]` for every local mask `m` (index 0 unused).
fn exact_cards(trace: &Trace, graph: &QueryGraph) -> Result<Vec<u128>> {
    trace.ensure_complete()?;
    if trace.table_mask() != graph.full_mask() {
        return Err(Error::Config(format!(
            "trace `{}` covers a different table set than its query",
            trace.query_id()
        )));
    }
    let size = 1usize << graph.len();
    let mut card = vec![0u128; size];
    for (m, slot) in card.iter_mut().enumerate().skip(1) {
        *slot = trace.lookup(graph.to_global(m as u32))?.value();
    }
    Ok(card)
}

/// Cheapest left-deep plan.
pub fn optimal_left_deep(trace: &Trace, graph: &QueryGraph, allow_cp: bool) -> Result<Plan> {
    let g = LocalGraph::new(graph)?;
    let card = exact_cards(trace, graph)?;
    let (_, order) = left_deep_dp(&g, &card, allow_cp)
        .ok_or_else(|| Error::InvalidPlan("no left-deep plan satisfies the CP rule".into()))?;
    let tree = left_deep_tree(&order, graph.slots());
    Ok(Plan {
        cost: tree.cost(trace)?,
        tree,
    })
}

/// Cheapest bushy plan.
pub fn optimal_bushy(trace: &Trace, graph: &QueryGraph, allow_cp: bool) -> Result<Plan> {
    let g = LocalGraph::new(graph)?;
    let card = exact_cards(trace, graph)?;
    let (_, local) = bushy_dp(&g, &card, allow_cp)
        .ok_or_else(|| Error::InvalidPlan("no bushy plan satisfies the CP rule".into()))?;
    let tree = local.to_plan(graph.slots());
    Ok(Plan {
        cost: tree.cost(trace)?,
        tree,
    })
}

pub fn optimal(trace: &Trace, graph: &QueryGraph, regime: Regime) -> Result<Plan> {
    match regime.plan {
        PlanType::LeftDeep => optimal_left_deep(trace, graph, regime.allow_cp),
        PlanType::Bushy => optimal_bushy(trace, graph, regime.allow_cp),
    }
}

/// Fills all four optimal costs of `trace`. Returns the plans in
/// [`Regime::ALL`] order.
pub fn fill_optimal_costs(trace: &mut Trace, graph: &QueryGraph) -> Result<Vec<(Regime, Plan)>> {
    let mut plans = Vec::with_capacity(4);
    for regime in Regime::ALL {
        let plan = optimal(trace, graph, regime)?;
        trace.optimal.set(regime, plan.cost.total);
        plans.push((regime, plan));
    }
    Ok(plans)
}

pub const ENUMERATION_LIMIT: usize = 8;

/// Cost of every distinct plan of the regime, ascending. Plans are counted
/// with child order (so `n!` left-deep and `n!·Catalan(n−1)` bushy plans
/// when CPs are allowed). Without CPs, a plan is kept only if some
/// execution order of its joins respects the CP rule at every step.
pub fn enumerate_all_plan_costs(trace: &Trace, graph: &QueryGraph, regime: Regime) -> Result<Vec<Cardinality>> {
    let n = graph.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::OutOfRange {
            what: "plan enumeration",
            detail: format!("{n} tables, at most {ENUMERATION_LIMIT}"),
        });
    }
    let g = LocalGraph::new(graph)?;
    let card = exact_cards(trace, graph)?;
    let mut costs = Vec::new();
    match regime.plan {
        PlanType::LeftDeep => {
            let mut order = Vec::with_capacity(n);
            permutations(&g, &card, regime.allow_cp, 0, 0, &mut order, &mut costs);
        }
        PlanType::Bushy => {
            let mut e = TreeEnumerator {
                g: &g,
                card: &card,
                allow_cp: regime.allow_cp,
                pending: vec![g.full],
                merges: Vec::with_capacity(n),
                costs: &mut costs,
            };
            e.visit(0);
        }
    }
    let mut out: Vec<Cardinality> = costs
        .into_iter()
        .map(|c| if c == u128::MAX { Cardinality::SATURATED } else { Cardinality::exact(c) })
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn permutations(
    g: &LocalGraph,
    card: &[u128],
    allow_cp: bool,
    prefix: u32,
    cost: u128,
    order: &mut Vec<usize>,
    out: &mut Vec<u128>,
) {
    if prefix == g.full {
        out.push(cost);
        return;
    }
    for t in 0..g.n {
        if prefix & (1 << t) != 0 {
            continue;
        }
        // Replays the environment's mask rule step by step.
        if prefix != 0 && !allow_cp {
            let remaining = g.full & !prefix;
            let connected: Vec<usize> = (0..g.n)
                .filter(|&u| remaining & (1 << u) != 0 && g.adj[u] & prefix != 0)
                .collect();
            if !connected.is_empty() && !connected.contains(&t) {
                continue;
            }
        }
        let next = prefix | (1 << t);
        let step = if prefix == 0 { 0 } else { card[next as usize] };
        order.push(t);
        permutations(g, card, allow_cp, next, cost.saturating_add(step), order, out);
        order.pop();
    }
}

struct TreeEnumerator<'a> {
    g: &'a LocalGraph,
    card: &'a [u128],
    allow_cp: bool,
    pending: Vec<u32>,
    merges: Vec<(u32, u32)>,
    costs: &'a mut Vec<u128>,
}

impl TreeEnumerator<'_> {
    fn visit(&mut self, cost: u128) {
        let Some(s) = self.pending.pop() else {
            if self.allow_cp || self.schedulable() {
                self.costs.push(cost);
            }
            return;
        };
        if s.count_ones() == 1 {
            self.visit(cost);
        } else {
            let mut left = s & (s - 1);
            // every ordered split (left, right) of s
            while left != 0 {
                let right = s & !left;
                self.pending.push(left);
                self.pending.push(right);
                self.merges.push((left, right));
                self.visit(cost.saturating_add(self.card[s as usize]));
                self.merges.pop();
                self.pending.pop();
                self.pending.pop();
                left = (left - 1) & s;
            }
        }
        self.pending.push(s);
    }

    /// Simulates the environment: predicate-connected joins whenever one is
    /// ready, CP joins only once no two current components are connected.
    fn schedulable(&self) -> bool {
        let mut comps: Vec<u32> = (0..self.g.n).map(|k| 1 << k).collect();
        let mut todo: Vec<(u32, u32)> = self.merges.clone();
        while !todo.is_empty() {
            let ready: Vec<usize> = (0..todo.len())
                .filter(|&i| comps.contains(&todo[i].0) && comps.contains(&todo[i].1))
                .collect();
            let connected = ready
                .iter()
                .copied()
                .find(|&i| self.g.neighborhood(todo[i].0) & todo[i].1 != 0);
            let pick = match connected {
                Some(i) => i,
                None => {
                    let any_edge = comps
                        .iter()
                        .any(|&c| self.g.neighborhood(c) & !c != 0);
                    match ready.first() {
                        Some(&i) if !any_edge => i,
                        _ => return false,
                    }
                }
            };
            let (l, r) = todo.swap_remove(pick);
            comps.retain(|&c| c != l && c != r);
            comps.push(l | r);
        }
        true
    }
}

/// `(n!, n!·Catalan(n−1))`: left-deep and bushy plan counts.
pub fn count_plans(n: usize) -> Result<(BigUint, BigUint)> {
    if !(2..=20).contains(&n) {
        return Err(Error::OutOfRange {
            what: "table count",
            detail: format!("{n} (expected 2..=20)"),
        });
    }
    let factorial = |k: usize| (1..=k).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(i));
    let left = factorial(n);
    let m = n - 1;
    let catalan = factorial(2 * m) / (factorial(m + 1) * factorial(m));
    let bushy = &left * catalan;
    Ok((left, bushy))
}

/// Averaged pairwise join selectivities, keyed by the canonical predicate
/// set between two slots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectivityModel {
    estimates: BTreeMap<Vec<JoinPredicate>, f64>,
}

impl SelectivityModel {
    /// Selectivity for a predicate set; 1.0 (a CP) when never observed.
    pub fn get(&self, key: &[JoinPredicate]) -> f64 {
        self.estimates.get(key).copied().unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[JoinPredicate], f64)> {
        self.estimates.iter().map(|(k, &v)| (k.as_slice(), v))
    }
}

/// Join predicates grouped by the (ascending) slot pair they connect.
pub fn predicate_groups(query: &Query, layout: &Layout) -> BTreeMap<(usize, usize), Vec<JoinPredicate>> {
    let mut groups: BTreeMap<(usize, usize), Vec<JoinPredicate>> = BTreeMap::new();
    for j in &query.joins {
        let key = (layout.column(j.left).slot, layout.column(j.right).slot);
        groups.entry(key).or_default().push(*j);
    }
    groups
}

/// Averages `|R ⋈ S| / (|R|·|S|)` over every adjacent pair of every
/// training query.
pub fn estimate_selectivities(samples: &[(&Query, &Trace)], layout: &Layout) -> Result<SelectivityModel> {
    let mut sums: BTreeMap<Vec<JoinPredicate>, (f64, usize)> = BTreeMap::new();
    for (query, trace) in samples {
        trace.ensure_complete()?;
        trace.matches_query(query)?;
        for ((a, b), preds) in predicate_groups(query, layout) {
            let ra = trace.lookup(1 << a)?;
            let rb = trace.lookup(1 << b)?;
            let joined = trace.lookup((1 << a) | (1 << b))?;
            let denom = ra.as_f64() * rb.as_f64();
            if denom == 0.0 || ra.is_saturated() || rb.is_saturated() {
                log::debug!("{}: skipping pair ({a}, {b}) with empty side", query.id);
                continue;
            }
            let entry = sums.entry(preds).or_insert((0.0, 0));
            entry.0 += joined.as_f64() / denom;
            entry.1 += 1;
        }
    }
    Ok(SelectivityModel {
        estimates: sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect(),
    })
}

/// Plans with estimated cardinalities: singleton sizes are exact, and a
/// set's size is the product of its singletons times the estimated
/// selectivity of every predicate-connected pair inside it. The same DP as
/// the exact planners then picks the tree; score it with
/// [`PlanTree::cost`].
pub fn heuristic_dp_plan(
    query: &Query,
    trace: &Trace,
    graph: &QueryGraph,
    layout: &Layout,
    model: &SelectivityModel,
    regime: Regime,
) -> Result<PlanTree> {
    let g = LocalGraph::new(graph)?;
    let slots = graph.slots();
    let local: HashMap<usize, usize> = slots.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let mut pair_sel = vec![vec![1.0f64; g.n]; g.n];
    for ((a, b), preds) in predicate_groups(query, layout) {
        let (ka, kb) = (local[&a], local[&b]);
        let sel = model.get(&preds);
        pair_sel[ka][kb] = sel;
        pair_sel[kb][ka] = sel;
    }
    let singles = slots
        .iter()
        .map(|&s| trace.lookup(1 << s).map(Cardinality::as_f64))
        .collect::<Result<Vec<_>>>()?;

    let size = 1usize << g.n;
    let mut est = vec![0.0f64; size];
    for s in 1..size {
        let t = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        let mut v = singles[t];
        if rest != 0 {
            v *= est[rest];
            for u in bits(rest as u64) {
                v *= pair_sel[t][u];
            }
        }
        est[s] = v;
    }

    Ok(match regime.plan {
        PlanType::LeftDeep => {
            let (_, order) = left_deep_dp(&g, &est, regime.allow_cp)
                .ok_or_else(|| Error::InvalidPlan("no left-deep plan satisfies the CP rule".into()))?;
            left_deep_tree(&order, slots)
        }
        PlanType::Bushy => {
            let (_, tree) = bushy_dp(&g, &est, regime.allow_cp)
                .ok_or_else(|| Error::InvalidPlan("no bushy plan satisfies the CP rule".into()))?;
            tree.to_plan(slots)
        }
    })
}

/// Writes one plan file: a comment header naming the query, then one
/// tab-separated line per regime: regime, tree, total, comma-separated
/// per-step costs.
pub fn write_plan_file(path: &Path, query_id: &str, plans: &[(Regime, Plan)]) -> Result<()> {
    let mut out = format!("# joinsim-plan {query_id}\n");
    for (regime, plan) in plans {
        let steps: Vec<String> = plan.cost.per_step.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!(
            "{regime}\t{}\t{}\t{}\n",
            plan.tree,
            plan.cost.total,
            steps.join(",")
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a plan file back as `(query id, [(regime, tree)])`.
pub fn read_plan_file(path: &Path) -> Result<(String, Vec<(Regime, PlanTree)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let id = lines
        .next()
        .and_then(|l| l.strip_prefix("# joinsim-plan "))
        .ok_or_else(|| Error::format(path, 1, "expected `# joinsim-plan <query id>`"))?
        .to_string();
    let mut plans = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split('\t');
        let (Some(regime), Some(tree)) = (fields.next(), fields.next()) else {
            return Err(Error::format(path, i as u64 + 2, "expected regime and tree"));
        };
        plans.push((regime.parse()?, tree.parse()?));
    }
    Ok((id, plans))
}

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

//! Step-wise join-ordering environments.
//!
//! A left-deep episode picks one table per step: the first pick stages a
//! table at no cost and every later pick joins it to the running result.
//! A bushy episode picks a pair of slots per step and merges the two
//! components holding them. Each step's cost is the exact cardinality of
//! the new intermediate result, looked up in the query's trace.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Layout;
use crate::engine::Cardinality;
use crate::error::{Error, Result};
use crate::graph::{bits, QueryGraph};
use crate::planner::{optimal, PlanType, Regime};
use crate::trace::{Trace, TraceStore};

pub const DEFAULT_CLIP_FACTOR: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub plan_type: PlanType,
    pub disable_cp: bool,
    /// Queries to sample from; empty means every query with a trace.
    pub query_ids: Vec<String>,
    pub clip_factor: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            plan_type: PlanType::LeftDeep,
            disable_cp: false,
            query_ids: Vec::new(),
            clip_factor: DEFAULT_CLIP_FACTOR,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn regime(&self) -> Regime {
        Regime::new(self.plan_type, !self.disable_cp)
    }
}

/// One bit per action of the full action space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionMask(Vec<bool>);

impl ActionMask {
    pub fn new(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_set(&self, action: usize) -> bool {
        self.0.get(action).copied().unwrap_or(false)
    }

    pub fn set(&mut self, action: usize) {
        self.0[action] = true;
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Set actions, ascending.
    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

pub type Observation = Vec<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub action_mask: ActionMask,
    pub ir_cardinality: Cardinality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Rank of `(i, j)`, `i < j < n`, among all such pairs in lexicographic
/// order.
pub fn pair_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j || j >= n {
        return Err(Error::OutOfRange {
            what: "slot pair",
            detail: format!("({i}, {j}) with {n} slots"),
        });
    }
    Ok(i * n - i * (i + 1) / 2 + (j - i - 1))
}

/// Inverse of [`pair_index`].
pub fn pair_decode(index: usize, n: usize) -> Result<(usize, usize)> {
    let mut rest = index;
    for i in 0..n.saturating_sub(1) {
        let row = n - i - 1;
        if rest < row {
            return Ok((i, i + 1 + rest));
        }
        rest -= row;
    }
    Err(Error::OutOfRange {
        what: "pair index",
        detail: format!("{index} with {n} slots"),
    })
}

/// `(C_min − min(c, C_max)) / C_max` with `C_max = clip·C*` and
/// `C_min = C*/num_joins`. Saturated costs count as `C_max`.
pub fn reward_from_cost(cost: Cardinality, c_star: Cardinality, num_joins: usize, clip_factor: f64) -> Result<f64> {
    if c_star.value() == 0 || c_star.is_saturated() {
        return Err(Error::Config(format!("optimal cost {c_star} cannot normalize rewards")));
    }
    if num_joins == 0 || clip_factor.is_nan() || clip_factor <= 0.0 {
        return Err(Error::Config(format!(
            "num_joins {num_joins} and clip factor {clip_factor} must be positive"
        )));
    }
    let c_star = c_star.as_f64();
    let c_max = clip_factor * c_star;
    let c_min = c_star / num_joins as f64;
    let c = if cost.is_saturated() { c_max } else { cost.as_f64().min(c_max) };
    Ok((c_min - c) / c_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub query_id: String,
    pub h: usize,
    pub action: usize,
    pub cost: Cardinality,
    pub reward: f64,
}

/// Per-query data fixed for the lifetime of an environment.
#[derive(Debug)]
struct QueryContext {
    id: String,
    graph: QueryGraph,
    trace: Arc<Trace>,
    c_star: Cardinality,
    /// `(left slot, right slot, left column, right column)`.
    joins: Vec<(usize, usize, usize, usize)>,
    context: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Episode {
    query: usize,
    h: usize,
    /// Left-deep: the running result (empty before staging). Bushy: the
    /// partition of `I`, sorted by lowest slot.
    components: Vec<u64>,
    joined_columns: Vec<bool>,
    costs: Vec<Cardinality>,
    actions: Vec<usize>,
    done: bool,
}

/// Merged subset, plus the two component positions for a bushy merge.
type Target = (u64, Option<(usize, usize)>);

/// A join-ordering environment over a shared trace store.
#[derive(Clone, Debug)]
pub struct JoinEnv {
    config: EnvConfig,
    layout: Arc<Layout>,
    queries: Arc<Vec<QueryContext>>,
    by_id: Arc<HashMap<String, usize>>,
    rng: ChaCha8Rng,
    episode: Option<Episode>,
    log: Vec<StepRecord>,
}

impl JoinEnv {
    pub fn new(store: &TraceStore, config: EnvConfig) -> Result<Self> {
        let layout = store.queries().layout.clone();
        let ids: Vec<String> = if config.query_ids.is_empty() {
            store.ids().to_vec()
        } else {
            config.query_ids.clone()
        };
        if ids.is_empty() {
            return Err(Error::Config("environment has no queries".into()));
        }
        if config.clip_factor.is_nan() || config.clip_factor < 1.0 {
            return Err(Error::Config(format!(
                "clip factor {} must be at least 1",
                config.clip_factor
            )));
        }
        let regime = config.regime();
        let mut queries = Vec::with_capacity(ids.len());
        let mut by_id = HashMap::new();
        for id in ids {
            let query = store.query(&id)?;
            let trace = Arc::clone(store.trace(&id)?);
            trace.ensure_complete()?;
            let graph = QueryGraph::new(query, &layout);
            let c_star = match trace.optimal.get(regime) {
                Some(c) => c,
                None => optimal(&trace, &graph, regime)?.cost.total,
            };
            if c_star.value() == 0 || c_star.is_saturated() {
                return Err(Error::Config(format!(
                    "query `{id}` has optimal cost {c_star} under {regime}; rewards need a finite positive cost"
                )));
            }
            let mut context = vec![0.0; layout.n_tables() + layout.n_cols()];
            for (&slot, &sel) in trace.selectivities() {
                context[slot] = sel;
            }
            let joins = query
                .joins
                .iter()
                .map(|j| {
                    context[layout.n_tables() + j.left.0] = 1.0;
                    context[layout.n_tables() + j.right.0] = 1.0;
                    (layout.column(j.left).slot, layout.column(j.right).slot, j.left.0, j.right.0)
                })
                .collect();
            if by_id.insert(id.clone(), queries.len()).is_some() {
                return Err(Error::Config(format!("query `{id}` listed twice")));
            }
            queries.push(QueryContext {
                id,
                graph,
                trace,
                c_star,
                joins,
                context,
            });
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            layout: Arc::new(layout),
            queries: Arc::new(queries),
            by_id: Arc::new(by_id),
            episode: None,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.iter().map(|q| q.id.as_str())
    }

    pub fn action_space_size(&self) -> usize {
        let n = self.layout.n_tables();
        match self.config.plan_type {
            PlanType::LeftDeep => n,
            PlanType::Bushy => n * n.saturating_sub(1) / 2,
        }
    }

    pub fn observation_len(&self) -> usize {
        self.layout.n_tables() + 2 * self.layout.n_cols()
    }

    /// Optimal cost used to normalize rewards for `query_id`.
    pub fn c_star(&self, query_id: &str) -> Result<Cardinality> {
        Ok(self.queries[self.index_of(query_id)?].c_star)
    }

    pub fn graph(&self, query_id: &str) -> Result<&QueryGraph> {
        Ok(&self.queries[self.index_of(query_id)?].graph)
    }

    pub fn trace(&self, query_id: &str) -> Result<&Arc<Trace>> {
        Ok(&self.queries[self.index_of(query_id)?].trace)
    }

    fn index_of(&self, query_id: &str) -> Result<usize> {
        self.by_id
            .get(query_id)
            .copied()
            .ok_or_else(|| Error::UnknownQuery(query_id.to_string()))
    }

    /// Starts an episode. Without a query id, one is drawn uniformly with
    /// the environment's RNG (reseeded first when `seed` is given).
    pub fn reset(&mut self, query_id: Option<&str>, seed: Option<u64>) -> Result<(Observation, StepInfo)> {
        if let Some(s) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(s);
        }
        let query = match query_id {
            Some(id) => self.index_of(id)?,
            None => self.rng.gen_range(0..self.queries.len()),
        };
        let ctx = &self.queries[query];
        let components = match self.config.plan_type {
            PlanType::LeftDeep => Vec::new(),
            PlanType::Bushy => bits(ctx.graph.full_mask()).map(|s| 1u64 << s).collect(),
        };
        self.episode = Some(Episode {
            query,
            h: 0,
            components,
            joined_columns: vec![false; self.layout.n_cols()],
            costs: Vec::new(),
            actions: Vec::new(),
            done: false,
        });
        let info = StepInfo {
            action_mask: self.action_mask()?,
            ir_cardinality: Cardinality::ZERO,
        };
        Ok((self.observation()?, info))
    }

    fn episode(&self) -> Result<&Episode> {
        self.episode.as_ref().ok_or(Error::NoEpisode)
    }

    fn context(&self) -> Result<&QueryContext> {
        Ok(&self.queries[self.episode()?.query])
    }

    pub fn current_query_id(&self) -> Result<&str> {
        Ok(&self.context()?.id)
    }

    /// Steps taken so far in the current episode.
    pub fn steps_taken(&self) -> Result<usize> {
        Ok(self.episode()?.h)
    }

    /// Episode length: `|I|` left-deep, `|I|−1` bushy.
    pub fn horizon(&self) -> Result<usize> {
        let n = self.context()?.graph.len();
        Ok(match self.config.plan_type {
            PlanType::LeftDeep => n,
            PlanType::Bushy => n - 1,
        })
    }

    pub fn is_done(&self) -> Result<bool> {
        Ok(self.episode()?.done)
    }

    /// Current components as slot masks. Left-deep has at most one.
    pub fn components(&self) -> Result<&[u64]> {
        Ok(&self.episode()?.components)
    }

    pub fn actions_taken(&self) -> Result<&[usize]> {
        Ok(&self.episode()?.actions)
    }

    /// True per-step costs so far (the staging step included, as 0).
    pub fn step_costs(&self) -> Result<&[Cardinality]> {
        Ok(&self.episode()?.costs)
    }

    /// Query id plus the current partition, enough to identify the state.
    pub fn state_key(&self) -> Result<(String, Vec<u64>)> {
        let ep = self.episode()?;
        let mut parts = ep.components.clone();
        parts.sort_unstable();
        Ok((self.queries[ep.query].id.clone(), parts))
    }

    pub fn action_mask(&self) -> Result<ActionMask> {
        let ep = self.episode()?;
        let ctx = &self.queries[ep.query];
        let mut mask = ActionMask::new(self.action_space_size());
        if ep.done {
            return Ok(mask);
        }
        let full = ctx.graph.full_mask();
        match self.config.plan_type {
            PlanType::LeftDeep => {
                let joined = ep.components.first().copied().unwrap_or(0);
                let remaining = full & !joined;
                let mut allowed = remaining;
                if joined != 0 && self.config.disable_cp {
                    let connected = remaining & ctx.graph.neighborhood(joined);
                    if connected != 0 {
                        allowed = connected;
                    }
                }
                for s in bits(allowed) {
                    mask.set(s);
                }
            }
            PlanType::Bushy => {
                let n = self.layout.n_tables();
                let comp_of = |s: usize| ep.components.iter().position(|&c| c & (1 << s) != 0);
                let mut cross = Vec::new();
                let mut connected = Vec::new();
                for i in bits(full) {
                    for j in bits(full & !((2u64 << i) - 1)) {
                        let (ci, cj) = (comp_of(i), comp_of(j));
                        if ci == cj {
                            continue;
                        }
                        let action = pair_index(i, j, n)?;
                        cross.push(action);
                        let (a, b) = (ep.components[ci.unwrap()], ep.components[cj.unwrap()]);
                        if ctx.graph.connects(a, b) {
                            connected.push(action);
                        }
                    }
                }
                let allowed = if self.config.disable_cp && !connected.is_empty() {
                    connected
                } else {
                    cross
                };
                for a in allowed {
                    mask.set(a);
                }
            }
        }
        Ok(mask)
    }

    /// The joined subset an action would produce, or `None` for the
    /// left-deep staging step. Fails on masked-out actions.
    fn target(&self, action: usize) -> Result<Option<Target>> {
        let ep = self.episode()?;
        if ep.done {
            return Err(Error::InvalidAction {
                action,
                reason: "episode is finished".into(),
            });
        }
        if !self.action_mask()?.is_set(action) {
            return Err(Error::InvalidAction {
                action,
                reason: "masked out".into(),
            });
        }
        Ok(match self.config.plan_type {
            PlanType::LeftDeep => ep
                .components
                .first()
                .map(|&joined| (joined | (1 << action), None)),
            PlanType::Bushy => {
                let (i, j) = pair_decode(action, self.layout.n_tables())?;
                let ci = ep.components.iter().position(|&c| c & (1 << i) != 0).unwrap();
                let cj = ep.components.iter().position(|&c| c & (1 << j) != 0).unwrap();
                Some((ep.components[ci] | ep.components[cj], Some((ci, cj))))
            }
        })
    }

    /// Cost the action would incur, without taking it.
    pub fn peek_cost(&self, action: usize) -> Result<Cardinality> {
        match self.target(action)? {
            None => Ok(Cardinality::ZERO),
            Some((subset, _)) => self.context()?.trace.lookup(subset),
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let target = self.target(action)?;
        let queries = Arc::clone(&self.queries);
        let ep = self.episode.as_mut().ok_or(Error::NoEpisode)?;
        let ctx = &queries[ep.query];
        let num_joins = ctx.graph.len() - 1;
        let (cost, reward, before, merged) = match target {
            None => {
                ep.components.push(1 << action);
                (Cardinality::ZERO, 0.0, 0u64, 1u64 << action)
            }
            Some((subset, parts)) => {
                let cost = ctx.trace.lookup(subset)?;
                let reward = reward_from_cost(cost, ctx.c_star, num_joins, self.config.clip_factor)?;
                let before = match parts {
                    None => ep.components[0],
                    Some((ci, _)) => ep.components[ci],
                };
                if parts.is_none() {
                    ep.components[0] = subset;
                } else {
                    ep.components.retain(|&c| c & subset == 0);
                    let at = ep
                        .components
                        .partition_point(|&c| c.trailing_zeros() < subset.trailing_zeros());
                    ep.components.insert(at, subset);
                }
                (cost, reward, before, subset)
            }
        };
        // Applies every predicate running between the two merged parts.
        let other = merged & !before;
        for &(ls, rs, lc, rc) in &ctx.joins {
            let (l, r) = (1u64 << ls, 1u64 << rs);
            if (before & l != 0 && other & r != 0) || (before & r != 0 && other & l != 0) {
                ep.joined_columns[lc] = true;
                ep.joined_columns[rc] = true;
            }
        }
        ep.h += 1;
        ep.costs.push(cost);
        ep.actions.push(action);
        ep.done = match self.config.plan_type {
            PlanType::LeftDeep => ep.h == ctx.graph.len(),
            PlanType::Bushy => ep.components.len() == 1,
        };
        self.log.push(StepRecord {
            query_id: ctx.id.clone(),
            h: ep.h,
            action,
            cost,
            reward,
        });
        let done = ep.done;
        Ok(StepResult {
            observation: self.observation()?,
            reward,
            done,
            info: StepInfo {
                action_mask: self.action_mask()?,
                ir_cardinality: cost,
            },
        })
    }

    /// `[selectivities ‖ join columns ‖ partial plan]`.
    pub fn observation(&self) -> Result<Observation> {
        let ep = self.episode()?;
        let ctx = &self.queries[ep.query];
        let mut obs = ctx.context.clone();
        obs.resize(self.observation_len(), 0.0);
        let base = self.layout.n_tables() + self.layout.n_cols();
        let mut index = 0.0;
        for &comp in &ep.components {
            let value = match self.config.plan_type {
                PlanType::LeftDeep => 1.0,
                PlanType::Bushy if comp.count_ones() == 1 => continue,
                // Components are ranked among those holding a joined
                // column; a pure-CP component shows only -1 entries.
                PlanType::Bushy => {
                    let joined = bits(comp)
                        .any(|s| self.layout.slot_columns(s).any(|c| ep.joined_columns[c]));
                    if joined {
                        index += 1.0;
                    }
                    index
                }
            };
            for s in bits(comp) {
                for c in self.layout.slot_columns(s) {
                    obs[base + c] = if ep.joined_columns[c] { value } else { -1.0 };
                }
            }
        }
        Ok(obs)
    }

    /// Steps of every episode since construction or the last clear.
    pub fn episode_log(&self) -> &[StepRecord] {
        &self.log
    }

    pub fn clear_log(&mut self) {
        self.log.clear();
    }

    /// One JSON object per step.
    pub fn write_episode_log(&self, out: &mut dyn Write) -> Result<()> {
        for rec in &self.log {
            let line = serde_json::to_string(rec).map_err(|e| Error::Serde(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io("episode log", e))?;
        }
        Ok(())
    }
}

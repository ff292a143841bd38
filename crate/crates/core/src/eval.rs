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

//! Baseline agents, the episode runner, and CCM statistics.
//!
//! CCM is the cumulative true cost of an episode's plan divided by the
//! optimal cost for the environment's regime, so it is at least 1.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::Cardinality;
use crate::env::{pair_index, ActionMask, JoinEnv};
use crate::error::{Error, Result};
use crate::planner::{optimal, PlanTree, PlanType};

/// One step's worth of experience.
#[derive(Clone, Debug)]
pub struct Transition {
    pub state: StateKey,
    pub action: usize,
    pub reward: f64,
    pub next_state: StateKey,
    pub next_mask: ActionMask,
    pub done: bool,
}

pub type StateKey = (String, Vec<u64>);

pub trait Agent {
    fn name(&self) -> &str;

    /// Picks an action whose mask bit is set. `env` is read-only and lets
    /// oracle baselines inspect the current state.
    fn select_action(&mut self, env: &JoinEnv, observation: &[f64], mask: &ActionMask) -> Result<usize>;

    fn learn(&mut self, _transition: &Transition) {}
}

/// Uniform over the valid actions.
#[derive(Debug)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn select_action(&mut self, _env: &JoinEnv, _observation: &[f64], mask: &ActionMask) -> Result<usize> {
        mask.actions().choose(&mut self.rng).ok_or_else(|| Error::AgentProtocol {
            agent: self.name().into(),
            reason: "empty action mask".into(),
        })
    }
}

/// Takes the valid action with the smallest immediate cost; ties go to
/// the lowest action index.
#[derive(Debug, Default)]
pub struct GreedyMinIrAgent;

impl Agent for GreedyMinIrAgent {
    fn name(&self) -> &str {
        "greedy"
    }

    fn select_action(&mut self, env: &JoinEnv, _observation: &[f64], mask: &ActionMask) -> Result<usize> {
        let mut best: Option<(Cardinality, usize)> = None;
        for a in mask.actions() {
            let cost = env.peek_cost(a)?;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, a));
            }
        }
        best.map(|(_, a)| a).ok_or_else(|| Error::AgentProtocol {
            agent: self.name().into(),
            reason: "empty action mask".into(),
        })
    }
}

/// Replays a fixed plan per query.
#[derive(Debug, Default)]
pub struct OptimalReplayAgent {
    plans: HashMap<String, PlanTree>,
}

impl OptimalReplayAgent {
    pub fn new(plans: HashMap<String, PlanTree>) -> Self {
        Self { plans }
    }

    /// Optimal plans for every query of `env` under its regime.
    pub fn for_env(env: &JoinEnv) -> Result<Self> {
        let regime = env.config().regime();
        let mut plans = HashMap::new();
        for id in env.query_ids() {
            let plan = optimal(env.trace(id)?, env.graph(id)?, regime)?;
            plans.insert(id.to_string(), plan.tree);
        }
        Ok(Self { plans })
    }

    fn protocol(&self, reason: String) -> Error {
        Error::AgentProtocol {
            agent: self.name().into(),
            reason,
        }
    }
}

impl Agent for OptimalReplayAgent {
    fn name(&self) -> &str {
        "optimal"
    }

    fn select_action(&mut self, env: &JoinEnv, _observation: &[f64], mask: &ActionMask) -> Result<usize> {
        let id = env.current_query_id()?;
        let tree = self
            .plans
            .get(id)
            .ok_or_else(|| self.protocol(format!("no plan for query `{id}`")))?;
        if tree.mask() != env.graph(id)?.full_mask() {
            return Err(self.protocol(format!("plan {tree} does not cover query `{id}`")));
        }
        let action = match env.config().plan_type {
            PlanType::LeftDeep => {
                if !tree.is_left_deep() {
                    return Err(self.protocol(format!("plan {tree} is not left-deep")));
                }
                tree.leaves()[env.steps_taken()?]
            }
            PlanType::Bushy => {
                let comps = env.components()?;
                let n = env.layout().n_tables();
                tree.merges()
                    .into_iter()
                    .filter(|(l, r)| comps.contains(l) && comps.contains(r))
                    .map(|(l, r)| {
                        let (a, b) = (l.trailing_zeros() as usize, r.trailing_zeros() as usize);
                        pair_index(a.min(b), a.max(b), n)
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .find(|&a| mask.is_set(a))
                    .ok_or_else(|| self.protocol(format!("no step of plan {tree} is currently allowed")))?
            }
        };
        if !mask.is_set(action) {
            return Err(self.protocol(format!("plan {tree} needs masked-out action {action}")));
        }
        Ok(action)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularQConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly.
    pub decay_episodes: usize,
}

impl Default for TabularQConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            decay_episodes: 10_000,
        }
    }
}

/// Epsilon-greedy Q-learning over `(query id, partition)` states.
#[derive(Debug)]
pub struct TabularQAgent {
    config: TabularQConfig,
    q: HashMap<StateKey, HashMap<usize, f64>>,
    rng: ChaCha8Rng,
    episodes: usize,
    training: bool,
}

impl TabularQAgent {
    pub fn new(config: TabularQConfig, seed: u64) -> Self {
        Self {
            config,
            q: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            episodes: 0,
            training: true,
        }
    }

    /// Greedy, non-learning behaviour when false.
    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    pub fn epsilon(&self) -> f64 {
        let c = &self.config;
        if c.decay_episodes == 0 {
            return c.epsilon_end;
        }
        let t = (self.episodes as f64 / c.decay_episodes as f64).min(1.0);
        c.epsilon_start + (c.epsilon_end - c.epsilon_start) * t
    }

    pub fn end_episode(&mut self) {
        if self.training {
            self.episodes += 1;
        }
    }

    /// Query ids that appear in the Q-table.
    pub fn known_queries(&self) -> HashSet<&str> {
        self.q.keys().map(|(id, _)| id.as_str()).collect()
    }

    pub fn states(&self) -> usize {
        self.q.len()
    }

    fn value(&self, state: &StateKey, action: usize) -> f64 {
        self.q.get(state).and_then(|m| m.get(&action)).copied().unwrap_or(0.0)
    }

    fn best(&self, state: &StateKey, mask: &ActionMask) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for a in mask.actions() {
            let v = self.value(state, a);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best
    }
}

impl Agent for TabularQAgent {
    fn name(&self) -> &str {
        "tabular-q"
    }

    fn select_action(&mut self, env: &JoinEnv, _observation: &[f64], mask: &ActionMask) -> Result<usize> {
        let empty = || Error::AgentProtocol {
            agent: "tabular-q".into(),
            reason: "empty action mask".into(),
        };
        if self.training && self.rng.gen::<f64>() < self.epsilon() {
            return mask.actions().choose(&mut self.rng).ok_or_else(empty);
        }
        let state = env.state_key()?;
        self.best(&state, mask).map(|(a, _)| a).ok_or_else(empty)
    }

    fn learn(&mut self, t: &Transition) {
        if !self.training {
            return;
        }
        let future = if t.done {
            0.0
        } else {
            self.best(&t.next_state, &t.next_mask).map_or(0.0, |(_, v)| v)
        };
        let target = t.reward + self.config.gamma * future;
        let alpha = self.config.alpha;
        let q = self.q.entry(t.state.clone()).or_default().entry(t.action).or_insert(0.0);
        *q += alpha * (target - *q);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub query_id: String,
    pub actions: Vec<usize>,
    pub costs: Vec<Cardinality>,
    pub cumulative_cost: Cardinality,
    pub c_star: Cardinality,
    pub ccm: f64,
    pub total_reward: f64,
}

fn episode(env: &mut JoinEnv, agent: &mut dyn Agent, query_id: Option<&str>, learn: bool) -> Result<EpisodeRecord> {
    let (mut obs, info) = env.reset(query_id, None)?;
    let mut mask = info.action_mask;
    let mut total_reward = 0.0;
    loop {
        let action = agent.select_action(env, &obs, &mask)?;
        if !mask.is_set(action) {
            return Err(Error::AgentProtocol {
                agent: agent.name().into(),
                reason: format!("chose masked-out action {action}"),
            });
        }
        let state = if learn { Some(env.state_key()?) } else { None };
        let step = env.step(action)?;
        total_reward += step.reward;
        if let Some(state) = state {
            agent.learn(&Transition {
                state,
                action,
                reward: step.reward,
                next_state: env.state_key()?,
                next_mask: step.info.action_mask.clone(),
                done: step.done,
            });
        }
        if step.done {
            break;
        }
        obs = step.observation;
        mask = step.info.action_mask;
    }
    let id = env.current_query_id()?.to_string();
    let costs = env.step_costs()?.to_vec();
    let cumulative_cost: Cardinality = costs.iter().copied().sum();
    let c_star = env.c_star(&id)?;
    Ok(EpisodeRecord {
        ccm: ccm(cumulative_cost, c_star),
        query_id: id,
        actions: env.actions_taken()?.to_vec(),
        costs,
        cumulative_cost,
        c_star,
        total_reward,
    })
}

/// Cumulative cost over the optimum; a saturated cost gives infinity.
pub fn ccm(cumulative: Cardinality, c_star: Cardinality) -> f64 {
    if cumulative.is_saturated() {
        f64::INFINITY
    } else if cumulative == c_star {
        1.0
    } else {
        cumulative.as_f64() / c_star.as_f64()
    }
}

/// Runs one full episode without learning.
pub fn run_episode(env: &mut JoinEnv, agent: &mut dyn Agent, query_id: &str) -> Result<EpisodeRecord> {
    episode(env, agent, Some(query_id), false)
}

/// Trains on `episodes` episodes, queries drawn by the environment.
/// Returns each episode's CCM.
pub fn train_tabular_q(env: &mut JoinEnv, agent: &mut TabularQAgent, episodes: usize) -> Result<Vec<f64>> {
    agent.set_training(true);
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        out.push(episode(env, agent, None, true)?.ccm);
        agent.end_episode();
    }
    agent.set_training(false);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcmStats {
    pub mean: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub count: usize,
}

/// The `ceil(percent/100 · n)`-th smallest value.
pub fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let n = sorted.len();
    let rank = (percent * n).div_ceil(100).clamp(1, n);
    sorted[rank - 1]
}

impl CcmStats {
    pub fn from_records(records: &[EpisodeRecord]) -> Result<Self> {
        let values: Vec<f64> = records.iter().map(|r| r.ccm).collect();
        Self::from_values(&values)
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("no episodes to summarize".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p90: nearest_rank(&sorted, 90),
            p95: nearest_rank(&sorted, 95),
            p99: nearest_rank(&sorted, 99),
            count: sorted.len(),
        })
    }
}

/// One episode per query, in the given order.
pub fn evaluate_agent(env: &mut JoinEnv, agent: &mut dyn Agent, query_ids: &[String]) -> Result<(CcmStats, Vec<EpisodeRecord>)> {
    if query_ids.is_empty() {
        return Err(Error::Config("evaluation needs at least one query".into()));
    }
    let records = query_ids
        .iter()
        .map(|id| run_episode(env, agent, id))
        .collect::<Result<Vec<_>>>()?;
    Ok((CcmStats::from_records(&records)?, records))
}

/// `(threshold, share of records with ccm ≥ threshold)` at each distinct
/// CCM, ascending.
pub fn ccdf_points(records: &[EpisodeRecord]) -> Vec<(f64, f64)> {
    let mut values: Vec<f64> = records.iter().map(|r| r.ccm).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut out = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if i == 0 || values[i - 1] != v {
            out.push((v, (values.len() - i) as f64 / n));
        }
    }
    out
}

/// Writes the CCDF as `threshold fraction` lines.
pub fn export_ccdf(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to export".into()));
    }
    let text: String = ccdf_points(records)
        .into_iter()
        .map(|(t, f)| format!("{t} {f}\n"))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ResultLine {
    Record {
        query_id: String,
        ccm: f64,
        cumulative_cost: Cardinality,
        c_star: Cardinality,
    },
    Summary(CcmStats),
}

/// JSON lines: one `record` per query, then one `summary`.
pub fn write_results(path: &Path, records: &[EpisodeRecord], stats: &CcmStats) -> Result<()> {
    let mut out = String::new();
    let lines = records
        .iter()
        .map(|r| ResultLine::Record {
            query_id: r.query_id.clone(),
            ccm: r.ccm,
            cumulative_cost: r.cumulative_cost,
            c_star: r.c_star,
        })
        .chain(std::iter::once(ResultLine::Summary(stats.clone())));
    for line in lines {
        out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Serde(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads back the records of a results file (the summary is recomputed).
pub fn read_results(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ResultLine =
            serde_json::from_str(line).map_err(|e| Error::format(path, i as u64 + 1, e.to_string()))?;
        if let ResultLine::Record {
            query_id,
            ccm,
            cumulative_cost,
            c_star,
        } = parsed
        {
            out.push(EpisodeRecord {
                query_id,
                actions: Vec::new(),
                costs: Vec::new(),
                cumulative_cost,
                c_star,
                ccm,
                total_reward: 0.0,
            });
        }
    }
    Ok(out)
}

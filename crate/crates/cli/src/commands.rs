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

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use joinsim::catalog::{generate_synthetic_db, load_catalog, write_catalog, Catalog, SyntheticSpec};
use joinsim::engine::{build_full_trace, CardinalityOracle};
use joinsim::env::{pair_index, EnvConfig, JoinEnv};
use joinsim::eval::{
    evaluate_agent, export_ccdf, read_results, train_tabular_q, write_results, Agent, CcmStats,
    GreedyMinIrAgent, OptimalReplayAgent, RandomAgent, TabularQAgent, TabularQConfig,
};
use joinsim::graph::QueryGraph;
use joinsim::planner::{
    count_plans, enumerate_all_plan_costs, estimate_selectivities, fill_optimal_costs,
    heuristic_dp_plan, read_plan_file, write_plan_file, PlanType, Regime,
};
use joinsim::sql::{generate_instances, load_templates, parse_sql, split_workload, QuerySet, Split};
use joinsim::trace::{load_trace, read_manifest, save_trace, write_manifest, TraceStore};
use rayon::prelude::*;
use serde_json::json;

use crate::args::{
    AgentKind, BuildTraceArgs, Command, EvaluateArgs, ExportCcdfArgs, Format, GenDbArgs,
    GenQueriesArgs, OptimalArgs, PlayArgs, RunConfig, StatsArgs,
};

/// Prints either the text line or the JSON record.
struct Out {
    format: Format,
}

impl Out {
    fn emit(&self, text: impl FnOnce() -> String, record: impl FnOnce() -> serde_json::Value) {
        let line = match self.format {
            Format::Text => text(),
            Format::Records => record().to_string(),
        };
        // A closed stdout (e.g. piped into `head`) is not an error.
        let _ = writeln!(std::io::stdout().lock(), "{line}");
    }
}

pub fn run(config: &RunConfig) -> Result<()> {
    let out = Out {
        format: config.format,
    };
    let seed = config.seed;
    match &config.command {
        Command::GenDb(a) => gen_db(a, seed, &out),
        Command::GenQueries(a) => gen_queries(a, seed, &out),
        Command::BuildTrace(a) => build_trace(a, &out),
        Command::Optimal(a) => optimal(a, &out),
        Command::Stats(a) => stats(a, &out),
        Command::Play(a) => play(a, seed, &out),
        Command::Evaluate(a) => evaluate(a, seed, &out),
        Command::ExportCcdf(a) => ccdf(a, &out),
        Command::Run(_) => run(&config.clone().resolve()?),
    }
}

fn load_db(dir: &Path) -> Result<Catalog> {
    Ok(load_catalog(&dir.join("schema.csv"), dir)?)
}

fn gen_db(a: &GenDbArgs, seed: u64, out: &Out) -> Result<()> {
    let text = fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec: SyntheticSpec = toml::from_str(&text)
        .map_err(|e| anyhow!("{}: {}", a.spec.display(), e.message()))?;
    let catalog = generate_synthetic_db(&spec, seed)?;
    write_catalog(&catalog, &a.out)?;
    for rel in catalog.relations() {
        out.emit(
            || format!("{:<20} {:>8} rows", rel.name(), rel.row_count()),
            || json!({"relation": rel.name(), "rows": rel.row_count()}),
        );
    }
    Ok(())
}

fn parse_split(text: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .with_context(|| format!("split `{text}` is not three counts"))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => bail!("split `{text}` is not `train,val,test`"),
    }
}

fn gen_queries(a: &GenQueriesArgs, seed: u64, out: &Out) -> Result<()> {
    let catalog = load_db(&a.db)?;
    let templates = load_templates(&a.templates, &catalog)?;
    ensure!(!templates.is_empty(), "no templates in {}", a.templates.display());
    let mut texts = Vec::new();
    let mut groups = Vec::new();
    for (k, template) in templates.iter().enumerate() {
        let instances = generate_instances(template, a.per_template, seed.wrapping_add(k as u64))?;
        groups.push((
            template.name.clone(),
            instances.iter().map(|q| q.id.clone()).collect::<Vec<_>>(),
        ));
        texts.extend(instances);
    }
    let set = QuerySet::build(&catalog, &texts)?;
    set.save(&a.out)?;
    for q in &set.queries {
        out.emit(
            || format!("{:<12} {:>3} tables {:>3} joins {:>3} filters", q.id, q.tables.len(), q.joins.len(), q.filters.len()),
            || json!({"query": q.id, "tables": q.tables.len(), "joins": q.joins.len(), "filters": q.filters.len()}),
        );
    }
    if let Some(path) = &a.split_out {
        let ratios = match &a.split {
            Some(s) => parse_split(s)?,
            None => {
                let n = a.per_template;
                (n - 2 * (n / 5), n / 5, n / 5)
            }
        };
        let split = split_workload(&groups, ratios, seed)?;
        fs::write(path, serde_json::to_string_pretty(&split)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn build_trace(a: &BuildTraceArgs, out: &Out) -> Result<()> {
    let set = QuerySet::load(&a.queries)?;
    let catalog = load_db(&a.db)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    let results: Vec<Result<(String, PathBuf, usize)>> = pool.install(|| {
        set.queries
            .par_iter()
            .map(|q| {
                let oracle = CardinalityOracle::new(&catalog, &set.layout, q)?;
                let trace = build_full_trace(&oracle, a.limit)?;
                let name = PathBuf::from(format!("{}.trace", q.id));
                save_trace(&trace, &a.out.join(&name))?;
                log::info!("{}: {} subsets", q.id, trace.len());
                Ok((q.id.clone(), name, trace.len()))
            })
            .collect()
    });
    let mut entries = Vec::new();
    for r in results {
        let (id, name, len) = r?;
        out.emit(
            || format!("{id:<12} {len:>8} subsets"),
            || json!({"query": id, "subsets": len}),
        );
        entries.push((id, name));
    }
    let queries_copy = Path::new("queries.jsonl");
    set.save(&a.out.join(queries_copy))?;
    write_manifest(&a.out.join("manifest.txt"), queries_copy, &entries)?;
    Ok(())
}

fn optimal(a: &OptimalArgs, out: &Out) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?;
    let set = QuerySet::load(&manifest.queries)?;
    if let Some(dir) = &a.plans {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for (id, path) in &manifest.traces {
        let query = set.get(id).ok_or_else(|| anyhow!("query `{id}` missing from the query set"))?;
        let mut trace = load_trace(path)?;
        let graph = QueryGraph::new(query, &set.layout);
        let plans = fill_optimal_costs(&mut trace, &graph)?;
        ensure!(trace.optimal.is_consistent(graph.is_connected(graph.full_mask())), "{id}: optimal costs violate the regime ordering");
        save_trace(&trace, path)?;
        if let Some(dir) = &a.plans {
            write_plan_file(&dir.join(format!("{id}.plan")), id, &plans)?;
        }
        out.emit(
            || {
                let cols: Vec<String> = plans.iter().map(|(r, p)| format!("{r}={}", p.cost.total)).collect();
                format!("{id:<12} {}", cols.join(" "))
            },
            || {
                let costs: serde_json::Map<String, serde_json::Value> = plans
                    .iter()
                    .map(|(r, p)| (r.to_string(), json!({"cost": p.cost.total.to_string(), "plan": p.tree.to_string()})))
                    .collect();
                json!({"query": id, "optimal": costs})
            },
        );
    }
    Ok(())
}

fn stats(a: &StatsArgs, out: &Out) -> Result<()> {
    let mut rows: Vec<(String, usize)> = Vec::new();
    let mut store = None;
    if let Some(m) = &a.manifest {
        let s = TraceStore::load_manifest(m)?;
        for id in s.ids() {
            rows.push((id.clone(), s.query(id)?.tables.len()));
        }
        store = Some(s);
    }
    for path in &a.sql {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let ast = parse_sql(&text).with_context(|| path.display().to_string())?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        rows.push((name, ast.from.len()));
    }
    ensure!(!rows.is_empty(), "stats needs --manifest or --sql");
    for (id, n) in &rows {
        let (left, bushy) = count_plans(*n)?;
        out.emit(
            || format!("{id:<12} tables={n:<3} left-deep plans={left} bushy plans={bushy}"),
            || json!({"query": id, "tables": n, "left_deep_plans": left.to_string(), "bushy_plans": bushy.to_string()}),
        );
    }
    if let (Some(path), Some(store)) = (&a.costs_out, &store) {
        let mut text = String::from("# query regime plans min_ratio median_ratio max_ratio\n");
        for id in store.ids() {
            let query = store.query(id)?;
            if query.tables.len() > 7 {
                continue;
            }
            let graph = QueryGraph::new(query, &store.queries().layout);
            let trace = store.trace(id)?;
            for regime in Regime::ALL {
                let costs = enumerate_all_plan_costs(trace, &graph, regime)?;
                let best = costs[0].as_f64();
                let ratio = |c: joinsim::Cardinality| c.as_f64() / best;
                text.push_str(&format!(
                    "{id} {regime} {} {} {} {}\n",
                    costs.len(),
                    ratio(costs[0]),
                    ratio(costs[(costs.len() - 1) / 2]),
                    ratio(costs[costs.len() - 1])
                ));
            }
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Drops queries whose optimal cost cannot normalize rewards (an empty or
/// saturated result), with a warning.
fn usable_ids(store: &TraceStore, regime: Regime, ids: Vec<String>) -> Result<Vec<String>> {
    let mut keep = Vec::with_capacity(ids.len());
    for id in ids {
        let trace = store.trace(&id)?;
        let c_star = match trace.optimal.get(regime) {
            Some(c) => c,
            None => {
                let graph = QueryGraph::new(store.query(&id)?, &store.queries().layout);
                joinsim::planner::optimal(trace, &graph, regime)?.cost.total
            }
        };
        if c_star.value() == 0 || c_star.is_saturated() {
            log::warn!("skipping `{id}`: optimal cost {c_star} under {regime}");
        } else {
            keep.push(id);
        }
    }
    Ok(keep)
}

fn env_for(store: &TraceStore, regime: &crate::args::RegimeArgs, ids: Vec<String>, seed: u64) -> Result<JoinEnv> {
    Ok(JoinEnv::new(
        store,
        EnvConfig {
            plan_type: regime.plan_type,
            disable_cp: regime.disable_cp,
            query_ids: ids,
            clip_factor: regime.clip_factor,
            seed,
        },
    )?)
}

fn parse_action(token: &str, env: &JoinEnv) -> Result<usize> {
    let token = token.trim();
    if let Some((i, j)) = token.split_once('-') {
        ensure!(env.config().plan_type == PlanType::Bushy, "pair action `{token}` in a left-deep episode");
        let (i, j): (usize, usize) = (i.parse()?, j.parse()?);
        return Ok(pair_index(i.min(j), i.max(j), env.layout().n_tables())?);
    }
    token.parse().with_context(|| format!("action `{token}` is not an integer"))
}

fn play(a: &PlayArgs, seed: u64, out: &Out) -> Result<()> {
    let store = TraceStore::load_manifest(&a.manifest)?;
    let mut env = env_for(&store, &a.regime, vec![a.query.clone()], seed)?;
    let (_, info) = env.reset(Some(&a.query), None)?;
    let mut mask = info.action_mask;
    let mut replay = match &a.plan {
        Some(path) => {
            let (id, plans) = read_plan_file(path)?;
            ensure!(id == a.query, "plan file is for `{id}`, not `{}`", a.query);
            let regime = a.regime.regime();
            let tree = plans
                .into_iter()
                .find(|(r, _)| *r == regime)
                .map(|(_, t)| t)
                .ok_or_else(|| anyhow!("plan file has no {regime} plan"))?;
            Some(OptimalReplayAgent::new(HashMap::from([(id, tree)])))
        }
        None => None,
    };
    let scripted: Vec<usize> = match &a.actions {
        Some(list) => list.split(',').map(|t| parse_action(t, &env)).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let mut total = 0.0;
    let mut h = 0;
    loop {
        let obs = env.observation()?;
        let action = match &mut replay {
            Some(agent) => agent.select_action(&env, &obs, &mask)?,
            None => *scripted
                .get(h)
                .ok_or_else(|| anyhow!("episode not finished after {h} scripted actions"))?,
        };
        let step = env.step(action)?;
        h += 1;
        total += step.reward;
        out.emit(
            || format!("h={h} action={action} cost={} reward={:.6}", step.info.ir_cardinality, step.reward),
            || json!({"h": h, "action": action, "cost": step.info.ir_cardinality.to_string(), "reward": step.reward}),
        );
        if step.done {
            break;
        }
        mask = step.info.action_mask;
    }
    ensure!(h == scripted.len() || replay.is_some(), "{} scripted actions left after the episode finished", scripted.len() - h);
    let cost: joinsim::Cardinality = env.step_costs()?.iter().copied().sum();
    let c_star = env.c_star(&a.query)?;
    let ccm = joinsim::eval::ccm(cost, c_star);
    out.emit(
        || format!("cumulative reward: {total:.6}\ncumulative cost: {cost}\noptimal cost: {c_star}\nccm: {ccm:.6}"),
        || json!({"cumulative_reward": total, "cumulative_cost": cost.to_string(), "optimal_cost": c_star.to_string(), "ccm": ccm}),
    );
    Ok(())
}

fn evaluate(a: &EvaluateArgs, seed: u64, out: &Out) -> Result<()> {
    let store = TraceStore::load_manifest(&a.manifest)?;
    let (train, eval_ids): (Vec<String>, Vec<String>) = match &a.split {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let split: Split = serde_json::from_str(&text).with_context(|| path.display().to_string())?;
            (split.train.clone(), split.get(&a.split_name)?.to_vec())
        }
        None => (store.ids().to_vec(), store.ids().to_vec()),
    };
    let regime = a.regime.regime();
    let train = usable_ids(&store, regime, train)?;
    let eval_ids = usable_ids(&store, regime, eval_ids)?;
    ensure!(!eval_ids.is_empty(), "split `{}` has no usable queries", a.split_name);
    let mut env = env_for(&store, &a.regime, eval_ids.clone(), seed)?;
    let mut agent: Box<dyn Agent> = match a.agent {
        AgentKind::Random => Box::new(RandomAgent::new(seed)),
        AgentKind::Greedy => Box::new(GreedyMinIrAgent),
        AgentKind::Optimal => Box::new(OptimalReplayAgent::for_env(&env)?),
        AgentKind::TabularQ => {
            ensure!(!train.is_empty(), "tabular-q needs training queries");
            let mut train_env = env_for(&store, &a.regime, train.clone(), seed)?;
            let mut q = TabularQAgent::new(TabularQConfig::default(), seed);
            let history = train_tabular_q(&mut train_env, &mut q, a.episodes)?;
            let tail = &history[history.len().saturating_sub(1000)..];
            if !tail.is_empty() {
                log::info!("training ccm over the last {} episodes: {:.4}", tail.len(), CcmStats::from_values(tail)?.mean);
            }
            Box::new(q)
        }
        AgentKind::Heuristic => {
            let layout = &store.queries().layout;
            let samples = train
                .iter()
                .map(|id| Ok((store.query(id)?, store.trace(id)?.as_ref())))
                .collect::<Result<Vec<_>>>()?;
            let model = estimate_selectivities(&samples, layout)?;
            let mut plans = HashMap::new();
            for id in &eval_ids {
                let query = store.query(id)?;
                let graph = QueryGraph::new(query, layout);
                let tree = heuristic_dp_plan(query, store.trace(id)?, &graph, layout, &model, regime)?;
                plans.insert(id.clone(), tree);
            }
            Box::new(OptimalReplayAgent::new(plans))
        }
    };
    let (stats, records) = evaluate_agent(&mut env, agent.as_mut(), &eval_ids)?;
    for r in &records {
        out.emit(
            || format!("{:<12} ccm={:.6} cost={} optimal={}", r.query_id, r.ccm, r.cumulative_cost, r.c_star),
            || json!({"query": r.query_id, "ccm": r.ccm, "cumulative_cost": r.cumulative_cost.to_string(), "c_star": r.c_star.to_string()}),
        );
    }
    out.emit(
        || format!("mean={:.6} p90={:.6} p95={:.6} p99={:.6} count={}", stats.mean, stats.p90, stats.p95, stats.p99, stats.count),
        || json!({"summary": stats}),
    );
    if let Some(path) = &a.results {
        write_results(path, &records, &stats)?;
    }
    Ok(())
}

fn ccdf(a: &ExportCcdfArgs, out: &Out) -> Result<()> {
    let records = read_results(&a.results)?;
    export_ccdf(&records, &a.out)?;
    out.emit(
        || format!("wrote {} records to {}", records.len(), a.out.display()),
        || json!({"records": records.len(), "out": a.out}),
    );
    Ok(())
}

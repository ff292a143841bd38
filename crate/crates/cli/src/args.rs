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

//! Command-line flags and the TOML run-config they round-trip through.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use joinsim::planner::{PlanType, Regime};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "joinsim", version, about = "Join-order selection simulator")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write this invocation as a run config and exit without running it.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// Aligned human-readable text.
    #[default]
    Text,
    /// One JSON object per line.
    Records,
}

/// Everything needed to replay one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub command: Command,
}

impl RunConfig {
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Replaces a `run` command with the config file it names.
    pub fn resolve(self) -> anyhow::Result<Self> {
        let Command::Run(a) = &self.command else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&a.config)
            .with_context(|| format!("reading {}", a.config.display()))?;
        let inner = Self::from_toml(&text).with_context(|| format!("parsing {}", a.config.display()))?;
        anyhow::ensure!(!matches!(inner.command, Command::Run(_)), "a run config cannot run another config");
        Ok(inner)
    }
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic database from a TOML spec.
    GenDb(GenDbArgs),
    /// Instantiate query templates and split the workload.
    GenQueries(GenQueriesArgs),
    /// Compute exact cardinalities of every joined subset of every query.
    BuildTrace(BuildTraceArgs),
    /// Compute optimal plans; store their costs in the traces.
    Optimal(OptimalArgs),
    /// Table counts and plan-space sizes.
    Stats(StatsArgs),
    /// Play one scripted episode.
    Play(PlayArgs),
    /// Evaluate a baseline agent over a split.
    Evaluate(EvaluateArgs),
    /// Turn a results file into a CCDF table.
    ExportCcdf(ExportCcdfArgs),
    /// Run a saved config.
    Run(RunArgs),
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenDbArgs {
    /// Synthetic database spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory for schema.csv and one CSV per relation.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenQueriesArgs {
    /// Directory of `<name>.sql` templates with `.filters` sidecars.
    #[arg(long)]
    pub templates: PathBuf,
    /// Database directory (holding schema.csv).
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub per_template: usize,
    /// Query-set output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Split output file (JSON).
    #[arg(long)]
    pub split_out: Option<PathBuf>,
    /// Instances per template as `train,val,test`; defaults to 60/20/20.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildTraceArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub db: PathBuf,
    /// Output directory; receives the traces, a copy of the query set, and
    /// manifest.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Largest table count to trace.
    #[arg(long, default_value_t = joinsim::engine::DEFAULT_TRACE_LIMIT)]
    pub limit: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for one plan file per query.
    #[arg(long)]
    pub plans: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsArgs {
    #[arg(long, conflicts_with = "sql")]
    pub manifest: Option<PathBuf>,
    /// SQL files to count tables of, without a database.
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub sql: Vec<PathBuf>,
    /// Per-query plan-cost distribution (queries of at most 7 tables);
    /// needs --manifest.
    #[arg(long, requires = "manifest")]
    pub costs_out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeArgs {
    #[arg(long, default_value = "left-deep", value_parser = parse_plan_type)]
    pub plan_type: PlanType,
    #[arg(long)]
    pub disable_cp: bool,
    #[arg(long, default_value_t = joinsim::env::DEFAULT_CLIP_FACTOR)]
    pub clip_factor: f64,
}

impl RegimeArgs {
    pub fn regime(&self) -> Regime {
        Regime::new(self.plan_type, !self.disable_cp)
    }
}

fn parse_plan_type(s: &str) -> Result<PlanType, String> {
    s.parse().map_err(|e: joinsim::Error| e.to_string())
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub query: String,
    #[command(flatten)]
    pub regime: RegimeArgs,
    /// Comma-separated actions; bushy pairs may be written `i-j`.
    #[arg(long, conflicts_with = "plan", required_unless_present = "plan")]
    pub actions: Option<String>,
    /// Plan file written by `optimal`; the line for the chosen regime is
    /// replayed.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Random,
    Greedy,
    Optimal,
    TabularQ,
    /// DP over estimated cardinalities, selectivities learned on the
    /// training split.
    Heuristic,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub agent: AgentKind,
    #[command(flatten)]
    pub regime: RegimeArgs,
    /// Split file from gen-queries; without it every query is evaluated
    /// and also used for training.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split_name: String,
    /// Training episodes for tabular-q.
    #[arg(long, default_value_t = 5000)]
    pub episodes: usize,
    /// Results file (JSON lines).
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportCcdfArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

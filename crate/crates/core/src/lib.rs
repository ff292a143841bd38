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

//! Join-order selection simulator.
//!
//! Loads or synthesizes a small relational database, resolves conjunctive
//! SQL queries against it, precomputes the exact size of every join
//! intermediate result, and exposes optimal planners and a step-wise
//! join-ordering environment driven by those sizes.

pub mod catalog;
pub mod engine;
pub mod env;
pub mod error;
pub mod eval;
pub mod graph;
pub mod planner;
pub mod sql;
pub mod trace;

pub use catalog::{Catalog, ColumnId, Layout};
pub use engine::{build_full_trace, Cardinality, CardinalityOracle};
pub use env::{EnvConfig, JoinEnv};
pub use error::{Error, Result};
pub use graph::QueryGraph;
pub use planner::{Plan, PlanCost, PlanTree, PlanType, Regime};
pub use sql::{Query, QuerySet};
pub use trace::{Trace, TraceStore};

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

//! The SQL subset, the resolved `(I, U, J)` query model, and workload
//! generation.

mod ast;
mod generate;
mod parser;
mod query;
mod queryset;

pub use ast::{CmpOp, ColRef, Literal, SelectExpr, SelectItem, SqlPredicate, SqlQuery, TableRef};
pub use generate::{
    generate_instances, load_templates, read_top_values, split_workload, CandidateColumn,
    QueryTemplate, QueryText, Split, MAX_IN_VALUES,
};
pub use parser::parse_sql;
pub use query::{alias_slots, parse_query, resolve, FilterPredicate, JoinPredicate, Query};
pub use queryset::QuerySet;

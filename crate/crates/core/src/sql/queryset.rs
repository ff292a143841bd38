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

//! Query-set files: JSON lines. The first line carries the global layout,
//! every following line one query with its id, raw SQL and resolved
//! `(I, U, J)`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::QueryText;
use super::query::{parse_query, resolve, Query};
use crate::catalog::{build_alias_registry, Catalog, Layout};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuerySet {
    pub layout: Layout,
    pub queries: Vec<Query>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRecord {
    layout: Layout,
}

impl QuerySet {
    /// Resolves a workload over one layout sized for all of it.
    pub fn build(catalog: &Catalog, texts: &[QueryText]) -> Result<Self> {
        let asts: Vec<_> = texts.iter().map(|t| t.ast.clone()).collect();
        let layout = Layout::new(catalog, build_alias_registry(catalog, &asts)?)?;
        let mut seen = std::collections::HashSet::new();
        let queries = texts
            .iter()
            .map(|t| {
                if !seen.insert(t.id.as_str()) {
                    return Err(Error::Config(format!("duplicate query id `{}`", t.id)));
                }
                resolve(&t.id, &t.ast, &layout)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layout, queries })
    }

    pub fn get(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = |value: String| -> Result<()> {
            writeln!(w, "{value}").map_err(|e| Error::io(path, e))
        };
        line(to_json(&LayoutRecord {
            layout: self.layout.clone(),
        })?)?;
        for q in &self.queries {
            line(to_json(q)?)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads a query set, re-parsing each query's SQL and checking that it
    /// resolves to the stored `(I, U, J)`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::format(path, 1, "empty query-set file"))?;
        let first = first.map_err(|e| Error::io(path, e))?;
        let LayoutRecord { layout } = serde_json::from_str(&first)
            .map_err(|e| Error::format(path, 1, format!("layout record: {e}")))?;

        let mut queries = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i as u64 + 1;
            let q: Query = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, lineno, e.to_string()))?;
            let reparsed = parse_query(&q.id, &q.sql, &layout)?;
            if (reparsed.tables != q.tables)
                || (reparsed.filters != q.filters)
                || (reparsed.joins != q.joins)
            {
                return Err(Error::format(
                    path,
                    lineno,
                    format!("stored (I, U, J) of `{}` disagrees with its SQL", q.id),
                ));
            }
            queries.push(q);
        }
        Ok(Self { layout, queries })
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Serde(e.to_string()))
}

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

//! Random query instances from templates, and train/validation/test splits.
//!
//! For every instance and every candidate filter column, a fair coin decides
//! whether the column gets a predicate. If it does, `n ~ Unif{1..5}` (capped
//! at the list size) distinct values are sampled from the column's top-value
//! list and appended as an `IN` filter. All draws come from one ChaCha8
//! stream, consumed in candidate order.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ast::{ColRef, Literal, SqlPredicate, SqlQuery};
use super::parser::parse_sql;
use crate::catalog::{Catalog, Domain};
use crate::error::{Error, Result};

pub const MAX_IN_VALUES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateColumn {
    pub column: ColRef,
    /// Distinct values, in list order.
    pub values: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryTemplate {
    pub name: String,
    pub skeleton: SqlQuery,
    pub candidates: Vec<CandidateColumn>,
}

/// A generated instance before slot resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryText {
    pub id: String,
    pub ast: SqlQuery,
}

impl QueryTemplate {
    pub fn new(name: impl Into<String>, skeleton: SqlQuery, candidates: Vec<CandidateColumn>) -> Result<Self> {
        let name = name.into();
        let aliases: HashSet<&str> = skeleton.from.iter().map(|t| t.alias.as_str()).collect();
        let mut deduped = Vec::with_capacity(candidates.len());
        for mut cand in candidates {
            if !aliases.contains(cand.column.alias.as_str()) {
                return Err(Error::UnknownAlias(cand.column.alias.clone()));
            }
            let mut seen = HashSet::new();
            cand.values.retain(|v| seen.insert(v.clone()));
            if cand.values.is_empty() {
                return Err(Error::Config(format!(
                    "template `{name}`: candidate column {} has an empty top-value list",
                    cand.column
                )));
            }
            deduped.push(cand);
        }
        Ok(Self {
            name,
            skeleton,
            candidates: deduped,
        })
    }

    /// Builds instance `index` from explicit draws: for each candidate
    /// column, `None` skips it and `Some(picks)` adds an `IN` filter with the
    /// listed value positions.
    pub fn instantiate(&self, index: usize, draws: &[Option<Vec<usize>>]) -> Result<QueryText> {
        if draws.len() != self.candidates.len() {
            return Err(Error::Config(format!(
                "template `{}` has {} candidate columns, {} draws given",
                self.name,
                self.candidates.len(),
                draws.len()
            )));
        }
        let mut ast = self.skeleton.clone();
        for (cand, draw) in self.candidates.iter().zip(draws) {
            let Some(picks) = draw else { continue };
            if picks.is_empty() || picks.len() > MAX_IN_VALUES {
                return Err(Error::Config(format!(
                    "IN list for {} must hold 1..={MAX_IN_VALUES} values",
                    cand.column
                )));
            }
            let values = picks
                .iter()
                .map(|&p| {
                    cand.values.get(p).cloned().ok_or_else(|| Error::OutOfRange {
                        what: "top-value index",
                        detail: format!("{p} for {}", cand.column),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ast.predicates.push(SqlPredicate::In {
                column: cand.column.clone(),
                values,
            });
        }
        Ok(QueryText {
            id: format!("{}_{index}", self.name),
            ast,
        })
    }
}

/// Draws `count` instances `name_0 .. name_{count-1}`.
pub fn generate_instances(template: &QueryTemplate, count: usize, seed: u64) -> Result<Vec<QueryText>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let draws: Vec<Option<Vec<usize>>> = template
                .candidates
                .iter()
                .map(|cand| {
                    if !rng.gen_bool(0.5) {
                        return None;
                    }
                    let n = rng.gen_range(1..=MAX_IN_VALUES).min(cand.values.len());
                    Some(index::sample(&mut rng, cand.values.len(), n).into_vec())
                })
                .collect();
            template.instantiate(i, &draws)
        })
        .collect()
}

/// Loads every `<name>.sql` in `dir`. An optional `<name>.filters` lists
/// candidate columns (`alias.column`, one per line); each column's top
/// values come from `dir/topvalues/<table>.<column>.txt`, one per line.
pub fn load_templates(dir: &Path, catalog: &Catalog) -> Result<Vec<QueryTemplate>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            (path.extension()? == "sql").then(|| path.file_stem()?.to_str().map(str::to_string))?
        })
        .collect();
    names.sort();

    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let sql_path = dir.join(format!("{name}.sql"));
        let text = fs::read_to_string(&sql_path).map_err(|e| Error::io(&sql_path, e))?;
        let skeleton = parse_sql(&text)?;
        let filters_path = dir.join(format!("{name}.filters"));
        let mut candidates = Vec::new();
        if filters_path.exists() {
            let body = fs::read_to_string(&filters_path).map_err(|e| Error::io(&filters_path, e))?;
            for (lineno, line) in body.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (alias, column) = line.split_once('.').ok_or_else(|| {
                    Error::format(&filters_path, lineno as u64 + 1, "expected alias.column")
                })?;
                let table = skeleton
                    .from
                    .iter()
                    .find(|t| t.alias == alias)
                    .ok_or_else(|| Error::UnknownAlias(alias.to_string()))?
                    .table
                    .clone();
                let rel = catalog.relation(&table)?;
                let domain = rel
                    .column_index(column)
                    .map(|i| rel.columns()[i].domain)
                    .ok_or_else(|| Error::UnknownColumn {
                        relation: table.clone(),
                        column: column.to_string(),
                    })?;
                let sidecar = dir.join("topvalues").join(format!("{table}.{column}.txt"));
                let values = read_top_values(&sidecar, domain)?;
                candidates.push(CandidateColumn {
                    column: ColRef {
                        alias: alias.to_string(),
                        column: column.to_string(),
                    },
                    values,
                });
            }
        }
        out.push(QueryTemplate::new(name, skeleton, candidates)?);
    }
    Ok(out)
}

/// Reads a top-value sidecar: one value per line, blank lines ignored.
pub fn read_top_values(path: &Path, domain: Domain) -> Result<Vec<Literal>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    body.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match domain {
            Domain::Str => Ok(Literal::Str(l.trim_end_matches('\r').to_string())),
            Domain::Int => l
                .trim()
                .parse()
                .map(Literal::Int)
                .map_err(|_| Error::format(path, i as u64 + 1, format!("`{l}` is not an integer"))),
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn get(&self, name: &str) -> Result<&[String]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::Config(format!("unknown split `{other}` (train, val or test)"))),
        }
    }
}

/// Shuffles each template's instances and cuts them into train/val/test of
/// the requested sizes.
pub fn split_workload(
    groups: &[(String, Vec<String>)],
    ratios: (usize, usize, usize),
    seed: u64,
) -> Result<Split> {
    let (train, val, test) = ratios;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    for (template, ids) in groups {
        if train + val + test != ids.len() {
            return Err(Error::Config(format!(
                "template `{template}` has {} instances but the split asks for {train}+{val}+{test}",
                ids.len()
            )));
        }
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut rng);
        let mut it = shuffled.into_iter();
        split.train.extend(it.by_ref().take(train));
        split.val.extend(it.by_ref().take(val));
        split.test.extend(it);
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(candidates: usize) -> QueryTemplate {
        let skeleton = parse_sql("SELECT * FROM a AS x, b AS y WHERE x.id = y.a_id").unwrap();
        let cands = (0..candidates)
            .map(|i| CandidateColumn {
                column: ColRef { alias: "x".into(), column: format!("c{i}") },
                values: (0..8).map(Literal::Int).collect(),
            })
            .collect();
        QueryTemplate::new("t", skeleton, cands).unwrap()
    }

    #[test]
    fn no_candidates_gives_skeleton_copies() {
        let t = template(0);
        let qs = generate_instances(&t, 3, 1).unwrap();
        assert_eq!(qs.len(), 3);
        assert!(qs.iter().all(|q| q.ast == t.skeleton));
        assert_eq!(qs[2].id, "t_2");
    }

    #[test]
    fn instances_are_deterministic_and_bounded() {
        let t = template(4);
        let a = generate_instances(&t, 50, 9).unwrap();
        assert_eq!(a, generate_instances(&t, 50, 9).unwrap());
        let mut with_filters = 0;
        for q in &a {
            for p in &q.ast.predicates[1..] {
                let SqlPredicate::In { values, .. } = p else { panic!() };
                assert!((1..=5).contains(&values.len()));
                let distinct: HashSet<_> = values.iter().collect();
                assert_eq!(distinct.len(), values.len());
                with_filters += 1;
            }
        }
        // 200 fair coins
        assert!((60..=140).contains(&with_filters), "{with_filters}");
    }

    #[test]
    fn duplicates_in_top_list_are_collapsed() {
        let skeleton = parse_sql("SELECT * FROM a AS x, b AS y WHERE x.id = y.a_id").unwrap();
        let cand = CandidateColumn {
            column: ColRef { alias: "x".into(), column: "k".into() },
            values: vec![Literal::Int(1), Literal::Int(1), Literal::Int(2)],
        };
        let t = QueryTemplate::new("t", skeleton, vec![cand]).unwrap();
        assert_eq!(t.candidates[0].values, vec![Literal::Int(1), Literal::Int(2)]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let groups: Vec<(String, Vec<String>)> = ["q1", "q2"]
            .iter()
            .map(|t| (t.to_string(), (0..100).map(|i| format!("{t}_{i}")).collect()))
            .collect();
        let s = split_workload(&groups, (60, 20, 20), 4).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (120, 40, 40));
        assert_eq!(s.train.iter().filter(|id| id.starts_with("q1_")).count(), 60);
        assert_eq!(s, split_workload(&groups, (60, 20, 20), 4).unwrap());
        let all: HashSet<_> = s.train.iter().chain(&s.val).chain(&s.test).collect();
        assert_eq!(all.len(), 200);

        let s = split_workload(&groups, (100, 0, 0), 4).unwrap();
        assert_eq!(s.train.len(), 200);
        assert!(split_workload(&groups, (60, 20, 10), 4).is_err());
    }
}

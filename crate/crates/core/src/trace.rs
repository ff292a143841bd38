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

//! Per-query cardinality traces and their on-disk form.
//!
//! A trace file is line oriented and canonical:
//!
//! ```text
//! joinsim-trace v1
//! <query_id>,<slot>:<selectivity>;<slot>:<selectivity>...
//! meta,<complete|partial>,<entry count>,<C* left/cp>,<C* left/no-cp>,<C* bushy/cp>,<C* bushy/no-cp>
//! <subset mask hex>,<cardinality decimal>,<saturated 0|1>
//! ...
//! checksum,<FNV-1a 64 of every preceding byte, 16 hex digits>
//! ```
//!
//! Entries are sorted by mask. Each `C*` field is `-` when unknown, else
//! `<decimal>:<saturated bit>`. Selectivities use the shortest decimal that
//! round-trips.
//!
//! A manifest ties a workload together:
//!
//! ```text
//! joinsim-manifest v1
//! queries,<query-set path>
//! <query_id>,<trace path>
//! ```
//!
//! with paths relative to the manifest's directory.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::engine::Cardinality;
use crate::error::{Error, Result};
use crate::planner::{PlanType, Regime};
use crate::sql::{Query, QuerySet};

const TRACE_HEADER: &str = "joinsim-trace";
const TRACE_VERSION: &str = "v1";
const MANIFEST_HEADER: &str = "joinsim-manifest v1";

/// Optimal cumulative costs for the four regimes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OptimalCosts {
    pub left_cp: Option<Cardinality>,
    pub left_no_cp: Option<Cardinality>,
    pub bushy_cp: Option<Cardinality>,
    pub bushy_no_cp: Option<Cardinality>,
}

impl OptimalCosts {
    pub fn get(&self, regime: Regime) -> Option<Cardinality> {
        *self.slot(regime)
    }

    pub fn set(&mut self, regime: Regime, cost: Cardinality) {
        *self.slot_mut(regime) = Some(cost);
    }

    fn slot(&self, regime: Regime) -> &Option<Cardinality> {
        match (regime.plan, regime.allow_cp) {
            (PlanType::LeftDeep, true) => &self.left_cp,
            (PlanType::LeftDeep, false) => &self.left_no_cp,
            (PlanType::Bushy, true) => &self.bushy_cp,
            (PlanType::Bushy, false) => &self.bushy_no_cp,
        }
    }

    fn slot_mut(&mut self, regime: Regime) -> &mut Option<Cardinality> {
        match (regime.plan, regime.allow_cp) {
            (PlanType::LeftDeep, true) => &mut self.left_cp,
            (PlanType::LeftDeep, false) => &mut self.left_no_cp,
            (PlanType::Bushy, true) => &mut self.bushy_cp,
            (PlanType::Bushy, false) => &mut self.bushy_no_cp,
        }
    }

    /// Bushy never exceeds left-deep, and allowing CPs never hurts. With
    /// CPs disabled the bushy bound only holds for a connected query graph:
    /// the bushy rule postpones every CP until no predicate-connected join
    /// is left, while left-deep may take one as soon as its prefix has no
    /// neighbour.
    pub fn is_consistent(&self, connected: bool) -> bool {
        let le = |a: Option<Cardinality>, b: Option<Cardinality>| match (a, b) {
            (Some(a), Some(b)) => a.value() <= b.value(),
            _ => true,
        };
        le(self.bushy_cp, self.left_cp)
            && (!connected || le(self.bushy_no_cp, self.left_no_cp))
            && le(self.left_cp, self.left_no_cp)
            && le(self.bushy_cp, self.bushy_no_cp)
    }
}

/// Exact cardinalities of every joined subset of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    query_id: String,
    selectivities: BTreeMap<usize, f64>,
    entries: HashMap<u64, Cardinality>,
    complete: bool,
    pub optimal: OptimalCosts,
}

impl Trace {
    pub fn new(query_id: String, selectivities: BTreeMap<usize, f64>) -> Self {
        Self {
            query_id,
            selectivities,
            entries: HashMap::new(),
            complete: false,
            optimal: OptimalCosts::default(),
        }
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn selectivities(&self) -> &BTreeMap<usize, f64> {
        &self.selectivities
    }

    pub fn table_mask(&self) -> u64 {
        self.selectivities.keys().fold(0, |m, &s| m | (1 << s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn insert(&mut self, mask: u64, card: Cardinality) {
        self.entries.insert(mask, card);
    }

    /// Marks the trace complete if it covers every non-empty subset.
    pub fn mark_complete(&mut self) -> bool {
        let n = self.selectivities.len() as u32;
        self.complete = n < 64 && self.entries.len() as u64 == (1u64 << n) - 1;
        self.complete
    }

    pub fn ensure_complete(&self) -> Result<()> {
        if self.complete {
            Ok(())
        } else {
            Err(Error::PartialTrace(self.query_id.clone()))
        }
    }

    pub fn lookup(&self, mask: u64) -> Result<Cardinality> {
        if mask == 0 || mask & !self.table_mask() != 0 {
            return Err(Error::InvalidSubset(mask));
        }
        self.entries.get(&mask).copied().ok_or_else(|| Error::MissingEntry {
            query: self.query_id.clone(),
            mask,
        })
    }

    /// Entries sorted by mask.
    pub fn sorted_entries(&self) -> Vec<(u64, Cardinality)> {
        let mut v: Vec<_> = self.entries.iter().map(|(&m, &c)| (m, c)).collect();
        v.sort_unstable_by_key(|&(m, _)| m);
        v
    }

    /// Checks that this trace belongs to `query`.
    pub fn matches_query(&self, query: &Query) -> Result<()> {
        if self.query_id != query.id || self.table_mask() != query.table_mask() {
            return Err(Error::Config(format!(
                "trace `{}` does not match query `{}`",
                self.query_id, query.id
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        if self.query_id.is_empty() || self.query_id.contains([',', '\n', '\r']) {
            return Err(Error::Config(format!(
                "query id `{}` cannot be stored in a trace file",
                self.query_id
            )));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{TRACE_HEADER} {TRACE_VERSION}");
        let sels: Vec<String> = self
            .selectivities
            .iter()
            .map(|(s, v)| format!("{s}:{v}"))
            .collect();
        let _ = writeln!(out, "{},{}", self.query_id, sels.join(";"));
        let opt = |c: Option<Cardinality>| match c {
            None => "-".to_string(),
            Some(c) => format!("{}:{}", c.value(), u8::from(c.is_saturated())),
        };
        let _ = writeln!(
            out,
            "meta,{},{},{},{},{},{}",
            if self.complete { "complete" } else { "partial" },
            self.entries.len(),
            opt(self.optimal.left_cp),
            opt(self.optimal.left_no_cp),
            opt(self.optimal.bushy_cp),
            opt(self.optimal.bushy_no_cp),
        );
        for (mask, card) in self.sorted_entries() {
            let _ = writeln!(out, "{mask:x},{},{}", card.value(), u8::from(card.is_saturated()));
        }
        let sum = fnv1a64(out.as_bytes());
        let _ = writeln!(out, "checksum,{sum:016x}");
        Ok(out)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let body_end = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| Error::Checksum { path: path.to_path_buf() })?;
        let (body, footer) = text.split_at(body_end);
        let stored = footer
            .trim_end()
            .strip_prefix("checksum,")
            .and_then(|h| u64::from_str_radix(h, 16).ok())
            .ok_or_else(|| Error::Checksum { path: path.to_path_buf() })?;

        let mut lines = body.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format(path, 1, "empty trace file"))?;
        match header.split_once(' ') {
            Some((TRACE_HEADER, TRACE_VERSION)) => {}
            Some((TRACE_HEADER, other)) => {
                return Err(Error::Version {
                    path: path.to_path_buf(),
                    found: other.to_string(),
                })
            }
            _ => return Err(Error::format(path, 1, "not a trace file")),
        }
        if fnv1a64(body.as_bytes()) != stored {
            return Err(Error::Checksum { path: path.to_path_buf() });
        }

        let (ln, id_line) = lines
            .next()
            .ok_or_else(|| Error::format(path, 2, "missing query line"))?;
        let (query_id, sel_text) = id_line
            .split_once(',')
            .ok_or_else(|| Error::format(path, ln, "expected `query_id,selectivities`"))?;
        let mut selectivities = BTreeMap::new();
        for item in sel_text.split(';').filter(|s| !s.is_empty()) {
            let parsed = item
                .split_once(':')
                .and_then(|(s, v)| Some((s.parse::<usize>().ok()?, v.parse::<f64>().ok()?)));
            let (slot, v) =
                parsed.ok_or_else(|| Error::format(path, ln, format!("bad selectivity `{item}`")))?;
            selectivities.insert(slot, v);
        }

        let (ln, meta) = lines
            .next()
            .ok_or_else(|| Error::format(path, 3, "missing meta line"))?;
        let fields: Vec<&str> = meta.split(',').collect();
        if fields.len() != 7 || fields[0] != "meta" {
            return Err(Error::format(path, ln, "malformed meta line"));
        }
        let complete = match fields[1] {
            "complete" => true,
            "partial" => false,
            other => return Err(Error::format(path, ln, format!("unknown completeness `{other}`"))),
        };
        let count: usize = fields[2]
            .parse()
            .map_err(|_| Error::format(path, ln, "bad entry count"))?;
        let opt = |f: &str| -> Result<Option<Cardinality>> {
            if f == "-" {
                return Ok(None);
            }
            let (v, s) = f
                .split_once(':')
                .ok_or_else(|| Error::format(path, ln, format!("bad optimal cost `{f}`")))?;
            Ok(Some(parse_cardinality(v, s).ok_or_else(|| {
                Error::format(path, ln, format!("bad optimal cost `{f}`"))
            })?))
        };
        let optimal = OptimalCosts {
            left_cp: opt(fields[3])?,
            left_no_cp: opt(fields[4])?,
            bushy_cp: opt(fields[5])?,
            bushy_no_cp: opt(fields[6])?,
        };

        let mut trace = Trace::new(query_id.to_string(), selectivities);
        trace.optimal = optimal;
        let mut prev: Option<u64> = None;
        for (ln, line) in lines {
            let parsed = (|| {
                let mut it = line.split(',');
                let mask = u64::from_str_radix(it.next()?, 16).ok()?;
                let card = parse_cardinality(it.next()?, it.next()?)?;
                it.next().is_none().then_some((mask, card))
            })();
            let (mask, card) =
                parsed.ok_or_else(|| Error::format(path, ln, format!("malformed entry `{line}`")))?;
            if prev.is_some_and(|p| p >= mask) {
                return Err(Error::format(path, ln, "entries not sorted by mask"));
            }
            prev = Some(mask);
            trace.insert(mask, card);
        }
        if trace.len() != count {
            return Err(Error::format(
                path,
                ln,
                format!("meta declares {count} entries, found {}", trace.len()),
            ));
        }
        if complete && !trace.mark_complete() {
            return Err(Error::format(path, ln, "trace marked complete but subsets are missing"));
        }
        Ok(trace)
    }
}

fn parse_cardinality(value: &str, bit: &str) -> Option<Cardinality> {
    let v = value.parse::<u128>().ok()?;
    match bit {
        "0" => Some(Cardinality::exact(v)),
        "1" if v == u128::MAX => Some(Cardinality::SATURATED),
        _ => None,
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    fs::write(path, trace.to_text()?).map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Trace::from_text(&text, path)
}

pub fn lookup(trace: &Trace, subset: u64) -> Result<Cardinality> {
    trace.lookup(subset)
}

/// Writes a manifest. Paths are stored as given (relative to the
/// manifest's directory).
pub fn write_manifest(path: &Path, queries_file: &Path, traces: &[(String, PathBuf)]) -> Result<()> {
    let mut out = format!("{MANIFEST_HEADER}\nqueries,{}\n", queries_file.display());
    for (id, p) in traces {
        let _ = writeln!(out, "{id},{}", p.display());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A manifest with its paths resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub queries: PathBuf,
    pub traces: Vec<(String, PathBuf)>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    if lines.next().map(|(_, l)| l) != Some(MANIFEST_HEADER) {
        return Err(Error::format(path, 1, format!("expected `{MANIFEST_HEADER}`")));
    }
    let queries_rel = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix("queries,"))
        .ok_or_else(|| Error::format(path, 2, "expected `queries,<path>`"))?;
    let mut traces = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (id, rel) = line
            .split_once(',')
            .ok_or_else(|| Error::format(path, ln, "expected `query_id,path`"))?;
        traces.push((id.to_string(), base.join(rel)));
    }
    Ok(Manifest {
        queries: base.join(queries_rel),
        traces,
    })
}

/// Queries plus their loaded traces, shared read-only by environments and
/// evaluation.
#[derive(Debug)]
pub struct TraceStore {
    queries: QuerySet,
    traces: HashMap<String, Arc<Trace>>,
    order: Vec<String>,
}

impl TraceStore {
    pub fn new(queries: QuerySet, traces: Vec<Trace>) -> Result<Self> {
        let mut map = HashMap::new();
        let mut order = Vec::new();
        for trace in traces {
            let query = queries
                .get(trace.query_id())
                .ok_or_else(|| Error::UnknownQuery(trace.query_id().to_string()))?;
            trace.matches_query(query)?;
            order.push(trace.query_id().to_string());
            map.insert(trace.query_id().to_string(), Arc::new(trace));
        }
        Ok(Self {
            queries,
            traces: map,
            order,
        })
    }

    pub fn load_manifest(path: &Path) -> Result<Self> {
        let manifest = read_manifest(path)?;
        let queries = QuerySet::load(&manifest.queries)?;
        let mut traces = Vec::with_capacity(manifest.traces.len());
        for (id, trace_path) in &manifest.traces {
            let trace = load_trace(trace_path)?;
            if trace.query_id() != id {
                return Err(Error::Config(format!(
                    "{} holds trace `{}`, manifest says `{id}`",
                    trace_path.display(),
                    trace.query_id()
                )));
            }
            traces.push(trace);
        }
        Self::new(queries, traces)
    }

    pub fn queries(&self) -> &QuerySet {
        &self.queries
    }

    pub fn query(&self, id: &str) -> Result<&Query> {
        self.queries
            .get(id)
            .ok_or_else(|| Error::UnknownQuery(id.to_string()))
    }

    pub fn trace(&self, id: &str) -> Result<&Arc<Trace>> {
        self.traces
            .get(id)
            .ok_or_else(|| Error::UnknownQuery(id.to_string()))
    }

    /// Query ids with a trace, in manifest order.
    pub fn ids(&self) -> &[String] {
        &self.order
    }
}

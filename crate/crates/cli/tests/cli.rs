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

//! End-to-end runs of the `joinsim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn joinsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_joinsim")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = joinsim(args);
    assert!(
        out.status.success(),
        "joinsim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_from_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (db, queries, split, traces, plans) =
        (d.join("db"), d.join("queries.jsonl"), d.join("split.json"), d.join("traces"), d.join("plans"));
    let spec = fixtures().join("imdb_mini.toml");
    let templates = fixtures().join("templates");

    let out = ok(&["--seed", "1", "gen-db", "--spec", s(&spec), "--out", s(&db)]);
    assert!(out.contains("title"));
    assert!(db.join("schema.csv").exists());
    ok(&[
        "--seed", "1", "gen-queries", "--templates", s(&templates), "--db", s(&db), "--per-template", "5",
        "--out", s(&queries), "--split-out", s(&split),
    ]);
    let out = ok(&["build-trace", "--queries", s(&queries), "--db", s(&db), "--out", s(&traces), "--jobs", "2"]);
    assert_eq!(out.lines().count(), 30);
    let manifest = traces.join("manifest.txt");
    assert!(std::fs::read_to_string(&manifest).unwrap().starts_with("joinsim-manifest v1\n"));
    let out = ok(&["optimal", "--manifest", s(&manifest), "--plans", s(&plans)]);
    assert!(out.contains("bushy/no-cp="));

    let play = ok(&[
        "play", "--manifest", s(&manifest), "--query", "q3_0", "--plan-type", "bushy", "--plan",
        s(&plans.join("q3_0.plan")),
    ]);
    assert!(play.contains("cumulative reward: 0.000000"), "{play}");
    assert!(play.contains("ccm: 1.000000"), "{play}");

    let results = d.join("results.jsonl");
    let out = ok(&[
        "evaluate", "--manifest", s(&manifest), "--agent", "optimal", "--split", s(&split), "--plan-type",
        "bushy", "--disable-cp", "--results", s(&results),
    ]);
    let summary = out.lines().last().unwrap();
    assert!(summary.starts_with("mean=1.000000 p90=1.000000 p95=1.000000 p99=1.000000"), "{summary}");
    for agent in ["random", "greedy", "heuristic", "tabular-q"] {
        let out = ok(&[
            "--format", "records", "evaluate", "--manifest", s(&manifest), "--agent", agent, "--split", s(&split),
            "--episodes", "200",
        ]);
        let last: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
        assert!(last["summary"]["mean"].as_f64().unwrap() >= 1.0, "{agent}");
    }
    let ccdf = d.join("ccdf.txt");
    ok(&["export-ccdf", "--results", s(&results), "--out", s(&ccdf)]);
    assert_eq!(std::fs::read_to_string(&ccdf).unwrap(), "1 1\n");
}

#[test]
fn stats_counts_large_query_plans() {
    let out = ok(&["stats", "--sql", s(&fixtures().join("large/q29.sql"))]);
    assert!(out.contains("tables=17"), "{out}");
    assert!(out.contains("left-deep plans=355687428096000"), "{out}");
}

#[test]
fn failures_exit_one_with_a_single_line() {
    let out = joinsim(&["stats", "--sql", "/nonexistent/q.sql"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.contains("/nonexistent/q.sql"));
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sql");
    std::fs::write(&bad, "SELECT * FROM").unwrap();
    let out = joinsim(&["stats", "--sql", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8(out.stderr).unwrap().trim_end().lines().count(), 1);
}

#[test]
fn saved_config_replays_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let q29 = fixtures().join("large/q29.sql");
    let saved = ok(&["--seed", "7", "--save-config", s(&cfg), "stats", "--sql", s(&q29)]);
    assert!(saved.is_empty() || !saved.contains("plans="));
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("seed = 7"), "{text}");
    assert_eq!(ok(&["run", "--config", s(&cfg)]), ok(&["--seed", "7", "stats", "--sql", s(&q29)]));

    let again = dir.path().join("again.toml");
    ok(&["run", "--config", s(&cfg), "--save-config", s(&again)]);
    assert_eq!(std::fs::read_to_string(&again).unwrap(), text);
}

#[test]
fn three_table_query_traces_every_subset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let db = d.join("db");
    ok(&["gen-db", "--spec", s(&fixtures().join("imdb_mini.toml")), "--out", s(&db)]);
    let templates = d.join("templates");
    std::fs::create_dir_all(&templates).unwrap();
    std::fs::write(
        templates.join("tri.sql"),
        "SELECT COUNT(*) FROM title AS t, movie_companies AS mc, company_type AS ct \
         WHERE t.id = mc.movie_id AND ct.id = mc.company_type_id",
    )
    .unwrap();
    let queries = d.join("q.jsonl");
    ok(&["gen-queries", "--templates", s(&templates), "--db", s(&db), "--per-template", "1", "--out", s(&queries)]);
    let traces = d.join("traces");
    let out = ok(&["build-trace", "--queries", s(&queries), "--db", s(&db), "--out", s(&traces)]);
    assert_eq!(out.trim(), "tri_0               7 subsets");
    let text = std::fs::read_to_string(traces.join("tri_0.trace")).unwrap();
    assert_eq!(text.lines().count(), 3 + 7 + 1);
}

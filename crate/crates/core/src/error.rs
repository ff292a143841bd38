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

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: expected {expected} fields, found {found}", path.display())]
    ArityMismatch {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("unknown value domain `{0}` (expected `int` or `str`)")]
    UnknownDomain(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("relation `{relation}` has no column `{column}`")]
    UnknownColumn { relation: String, column: String },

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("predicate references undeclared alias `{0}`")]
    UnknownAlias(String),

    #[error("alias `{0}` declared twice")]
    DuplicateAlias(String),

    #[error("join predicate `{0}` relates an alias to itself")]
    SelfJoin(String),

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("subset {0:#x} is empty or not contained in the query's table set")]
    InvalidSubset(u64),

    #[error("query `{query}` has {tables} tables, above the limit of {limit}")]
    TooManyTables {
        query: String,
        tables: usize,
        limit: usize,
    },

    #[error("{}: checksum mismatch", path.display())]
    Checksum { path: PathBuf },

    #[error("{}: unsupported version `{found}`", path.display())]
    Version { path: PathBuf, found: String },

    #[error("trace for `{0}` is partial")]
    PartialTrace(String),

    #[error("trace for `{query}` has no entry for subset {mask:#x}")]
    MissingEntry { query: String, mask: u64 },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("unknown query id `{0}`")]
    UnknownQuery(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid action {action}: {reason}")]
    InvalidAction { action: usize, reason: String },

    #[error("environment has no active episode; call reset first")]
    NoEpisode,

    #[error("agent `{agent}` violated the protocol: {reason}")]
    AgentProtocol { agent: String, reason: String },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("{0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

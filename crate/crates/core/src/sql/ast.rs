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

use std::fmt;

use serde::{Deserialize, Serialize};

/// Parsed but unresolved query: names only, no slot or column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqlQuery {
    pub select: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub predicates: Vec<SqlPredicate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectItem {
    Star,
    Expr {
        expr: SelectExpr,
        alias: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectExpr {
    Column(ColRef),
    /// `func(arg)`; `None` stands for `func(*)`.
    Call {
        func: String,
        arg: Option<Box<SelectExpr>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRef {
    pub table: String,
    pub alias: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColRef {
    pub alias: String,
    pub column: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Str(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SqlPredicate {
    Join(ColRef, ColRef),
    Compare {
        column: ColRef,
        op: CmpOp,
        value: Literal,
    },
    In {
        column: ColRef,
        values: Vec<Literal>,
    },
}

impl fmt::Display for ColRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.column)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        })
    }
}

impl fmt::Display for SelectExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectExpr::Column(c) => write!(f, "{c}"),
            SelectExpr::Call { func, arg: None } => write!(f, "{func}(*)"),
            SelectExpr::Call { func, arg: Some(a) } => write!(f, "{func}({a})"),
        }
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Star => f.write_str("*"),
            SelectItem::Expr { expr, alias: None } => write!(f, "{expr}"),
            SelectItem::Expr {
                expr,
                alias: Some(a),
            } => write!(f, "{expr} AS {a}"),
        }
    }
}

impl fmt::Display for SqlPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlPredicate::Join(l, r) => write!(f, "{l} = {r}"),
            SqlPredicate::Compare { column, op, value } => write!(f, "{column} {op} {value}"),
            SqlPredicate::In { column, values } => {
                write!(f, "{column} IN (")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Multi-line rendering in the JOB listing style. Parsing the output yields
/// the same AST.
impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, item) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(",\n       ")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str("\nFROM ")?;
        for (i, t) in self.from.iter().enumerate() {
            if i > 0 {
                f.write_str(",\n     ")?;
            }
            write!(f, "{} AS {}", t.table, t.alias)?;
        }
        for (i, p) in self.predicates.iter().enumerate() {
            f.write_str(if i == 0 { "\nWHERE " } else { "\n  AND " })?;
            write!(f, "{p}")?;
        }
        f.write_str(";")
    }
}

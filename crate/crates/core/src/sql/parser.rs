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

//! Recursive-descent parser for the supported subset:
//!
//! ```text
//! SELECT item {, item} FROM table [AS] alias {, table [AS] alias}
//! [WHERE pred {AND pred}] [;]
//! pred := col = col | col (= | < | >) literal | col IN (literal {, literal})
//! ```
//!
//! Anything else (OR, NOT, LIKE, BETWEEN, subqueries, explicit JOIN syntax)
//! is rejected with the byte offset of the offending token.

use super::ast::{CmpOp, ColRef, Literal, SelectExpr, SelectItem, SqlPredicate, SqlQuery, TableRef};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Semi,
    Eq,
    Lt,
    Gt,
    Other(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let tok = match c {
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '*' => Tok::Star,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    let Some(ch) = text[i..].chars().next() else {
                        return Err(syntax(start, "unterminated string literal"));
                    };
                    i += ch.len_utf8();
                    if ch == '\'' {
                        if bytes.get(i) == Some(&b'\'') {
                            s.push('\'');
                            i += 1;
                        } else {
                            break;
                        }
                    } else {
                        s.push(ch);
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    offset: start,
                });
                continue;
            }
            '-' | '0'..='9' => {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let lit = &text[start..i];
                let v = lit
                    .parse::<i64>()
                    .map_err(|_| syntax(start, format!("invalid integer literal `{lit}`")))?;
                out.push(Token {
                    tok: Tok::Int(v),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => Tok::Other(text[i..].chars().next().unwrap_or('?')),
        };
        i += match tok {
            Tok::Other(ch) => ch.len_utf8(),
            _ => 1,
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

const RESERVED: &[&str] = &[
    "select", "from", "where", "and", "as", "in", "or", "not", "like", "between", "join", "on",
    "is", "null", "exists", "union", "group", "order", "having", "limit",
];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {}", kw.to_uppercase())))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {what}")))
        }
    }

    fn unexpected(&self, context: &str) -> Error {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Int(v) => v.to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("{other:?}"),
        };
        let unsupported = match &t.tok {
            Tok::Ident(s) => {
                let l = s.to_ascii_lowercase();
                ["or", "not", "like", "between", "join", "on", "is", "exists", "union"]
                    .contains(&l.as_str())
                    || (l == "select" && self.pos > 0)
            }
            _ => false,
        };
        if unsupported {
            syntax(t.offset, format!("unsupported construct {found}"))
        } else {
            syntax(t.offset, format!("{context}, found {found}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) if !RESERVED.contains(&s.to_ascii_lowercase().as_str()) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected(&format!("expected {what}"))),
        }
    }

    fn query(&mut self) -> Result<SqlQuery> {
        self.expect_keyword("select")?;
        let mut select = vec![self.select_item()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            select.push(self.select_item()?);
        }

        self.expect_keyword("from")?;
        let mut from = vec![self.table_ref()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            from.push(self.table_ref()?);
        }

        let mut predicates = Vec::new();
        if self.eat_keyword("where") {
            predicates.push(self.predicate()?);
            while self.eat_keyword("and") {
                predicates.push(self.predicate()?);
            }
        }
        if self.peek().tok == Tok::Semi {
            self.next();
        }
        if self.peek().tok != Tok::Eof {
            return Err(self.unexpected("expected AND or end of query"));
        }
        Ok(SqlQuery {
            select,
            from,
            predicates,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem> {
        if self.peek().tok == Tok::Star {
            self.next();
            return Ok(SelectItem::Star);
        }
        let expr = self.select_expr()?;
        let alias = if self.eat_keyword("as") {
            Some(self.ident("output alias")?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    fn select_expr(&mut self) -> Result<SelectExpr> {
        let first = self.ident("select expression")?;
        match self.peek().tok {
            Tok::LParen => {
                self.next();
                let arg = if self.peek().tok == Tok::Star {
                    self.next();
                    None
                } else {
                    Some(Box::new(self.select_expr()?))
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(SelectExpr::Call {
                    func: first.to_ascii_uppercase(),
                    arg,
                })
            }
            Tok::Dot => {
                self.next();
                let column = self.ident("column name")?;
                Ok(SelectExpr::Column(ColRef {
                    alias: first,
                    column,
                }))
            }
            _ => Err(self.unexpected("expected `(` or `.`")),
        }
    }

    fn table_ref(&mut self) -> Result<TableRef> {
        if self.peek().tok == Tok::LParen {
            return Err(syntax(self.peek().offset, "unsupported construct: subquery"));
        }
        let table = self.ident("table name")?;
        let alias = if self.eat_keyword("as")
            || matches!(self.peek().tok, Tok::Ident(_)) && !self.is_keyword("where")
        {
            self.ident("table alias")?
        } else {
            table.clone()
        };
        Ok(TableRef { table, alias })
    }

    fn col_ref(&mut self) -> Result<ColRef> {
        let alias = self.ident("qualified column")?;
        self.expect(Tok::Dot, "`.` (columns must be qualified as alias.column)")?;
        let column = self.ident("column name")?;
        Ok(ColRef { alias, column })
    }

    fn literal(&mut self) -> Result<Literal> {
        match self.peek().tok.clone() {
            Tok::Int(v) => {
                self.next();
                Ok(Literal::Int(v))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Literal::Str(s))
            }
            Tok::LParen => Err(syntax(self.peek().offset, "unsupported construct: subquery")),
            _ => Err(self.unexpected("expected literal")),
        }
    }

    fn predicate(&mut self) -> Result<SqlPredicate> {
        if self.peek().tok == Tok::LParen {
            return Err(syntax(
                self.peek().offset,
                "unsupported construct: parenthesized predicate",
            ));
        }
        let column = self.col_ref()?;
        if self.eat_keyword("in") {
            self.expect(Tok::LParen, "`(`")?;
            if self.is_keyword("select") {
                return Err(syntax(self.peek().offset, "unsupported construct: subquery"));
            }
            let mut values = vec![self.literal()?];
            while self.peek().tok == Tok::Comma {
                self.next();
                values.push(self.literal()?);
            }
            self.expect(Tok::RParen, "`)`")?;
            return Ok(SqlPredicate::In { column, values });
        }
        let op = match self.peek().tok {
            Tok::Eq => CmpOp::Eq,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            _ => return Err(self.unexpected("expected `=`, `<`, `>` or IN")),
        };
        let op_offset = self.next().offset;
        if matches!(self.peek().tok, Tok::Ident(_)) && !RESERVED.contains(&self.peek_ident_lower().as_str()) {
            if op != CmpOp::Eq {
                return Err(syntax(op_offset, "only equality join predicates are supported"));
            }
            let right = self.col_ref()?;
            return Ok(SqlPredicate::Join(column, right));
        }
        if matches!(self.peek().tok, Tok::Lt | Tok::Gt | Tok::Eq) {
            return Err(syntax(self.peek().offset, "unsupported comparison operator"));
        }
        let value = self.literal()?;
        Ok(SqlPredicate::Compare { column, op, value })
    }

    fn peek_ident_lower(&self) -> String {
        match &self.peek().tok {
            Tok::Ident(s) => s.to_ascii_lowercase(),
            _ => String::new(),
        }
    }
}

/// Parses SQL text into an unresolved [`SqlQuery`].
pub fn parse_sql(text: &str) -> Result<SqlQuery> {
    let tokens = lex(text)?;
    if let Some(t) = tokens.iter().find(|t| matches!(t.tok, Tok::Other(_))) {
        if let Tok::Other(c) = t.tok {
            return Err(syntax(t.offset, format!("unexpected character `{c}`")));
        }
    }
    Parser { tokens, pos: 0 }.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_aggregates_aliases_and_filters() {
        let q = parse_sql(
            "select min(t.title) as movie_title, count(*) from title t, movie_info AS mi \
             where t.id = mi.movie_id and mi.info in ('a', 'b''c') and t.year > -3;",
        )
        .unwrap();
        assert_eq!(q.select.len(), 2);
        assert_eq!(q.from[0], TableRef { table: "title".into(), alias: "t".into() });
        assert_eq!(q.predicates.len(), 3);
        assert_eq!(
            q.predicates[1],
            SqlPredicate::In {
                column: ColRef { alias: "mi".into(), column: "info".into() },
                values: vec![Literal::Str("a".into()), Literal::Str("b'c".into())],
            }
        );
        assert!(matches!(
            q.predicates[2],
            SqlPredicate::Compare { op: CmpOp::Gt, value: Literal::Int(-3), .. }
        ));
    }

    #[test]
    fn table_without_alias_uses_its_name() {
        let q = parse_sql("SELECT * FROM a, b WHERE a.x = b.y").unwrap();
        assert_eq!(q.from[1].alias, "b");
    }

    #[test]
    fn rejects_unsupported_constructs() {
        for sql in [
            "SELECT * FROM a, b WHERE a.x = b.y OR a.z = 1",
            "SELECT * FROM a, b WHERE a.x LIKE '%x%'",
            "SELECT * FROM a JOIN b ON a.x = b.y",
            "SELECT * FROM a, b WHERE a.x IN (SELECT b.y FROM b)",
            "SELECT * FROM a, b WHERE NOT a.x = 1",
            "SELECT * FROM a, b WHERE a.x < b.y",
        ] {
            let err = parse_sql(sql).unwrap_err();
            assert!(matches!(err, Error::Syntax { .. }), "{sql}: {err}");
        }
    }

    #[test]
    fn syntax_error_reports_offset() {
        match parse_sql("SELECT * FROM a WHERE a.x = ").unwrap_err() {
            Error::Syntax { offset, .. } => assert_eq!(offset, 28),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pretty_print_is_a_fixed_point() {
        let text = "SELECT MIN(mc.note) AS n, COUNT(*) FROM company_type AS ct, movie_companies mc \
                    WHERE ct.id = mc.company_type_id AND ct.kind IN ('x', 'it''s') AND mc.id < 5";
        let q = parse_sql(text).unwrap();
        let again = parse_sql(&q.to_string()).unwrap();
        assert_eq!(q, again);
        assert_eq!(q.to_string(), again.to_string());
    }
}

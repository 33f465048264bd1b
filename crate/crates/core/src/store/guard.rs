//! Read-only SQL guard.
//!
//! Statements are tokenized (string literals, quoted identifiers and
//! comments are recognised so their contents never count as keywords),
//! split on top-level semicolons and classified by their leading keyword. A
//! `WITH` chain is classified by the statement that follows its CTEs.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Select,
    WithSelect,
    Write,
    Ddl,
    Transaction,
    Multiple,
    Other,
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuardError {
    #[error("write statement rejected: '{token}' at offset {offset}")]
    WriteStatement { token: String, offset: usize },
    #[error("multiple statements rejected: '{token}' at offset {offset}")]
    MultipleStatements { token: String, offset: usize },
    #[error("engine-control statement rejected: '{token}' at offset {offset}")]
    EngineControl { token: String, offset: usize },
    #[error("empty query")]
    Empty,
    #[error("unsupported statement: '{token}' at offset {offset}")]
    Unsupported { token: String, offset: usize },
}

/// A statement the guard accepted. Only [`validate_readonly`] builds one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedQuery {
    sql: String,
    kind: StatementKind,
}

impl ValidatedQuery {
    pub fn sql(&self) -> &str {
        &self.sql
    }

    /// Either [`StatementKind::Select`] or [`StatementKind::WithSelect`].
    pub fn statement_kind(&self) -> StatementKind {
        self.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Word,
    QuotedIdent,
    Str,
    Number,
    Semicolon,
    Symbol,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub offset: usize,
}

impl Token<'_> {
    fn is_word(&self, upper: &str) -> bool {
        self.kind == TokenKind::Word && self.text.eq_ignore_ascii_case(upper)
    }

    fn is_symbol(&self, c: &str) -> bool {
        self.kind == TokenKind::Symbol && self.text == c
    }
}

const WRITE_KEYWORDS: &[&str] = &["INSERT", "UPDATE", "DELETE", "REPLACE", "UPSERT", "MERGE"];
const DDL_KEYWORDS: &[&str] = &["CREATE", "DROP", "ALTER", "TRUNCATE", "RENAME"];
const TRANSACTION_KEYWORDS: &[&str] =
    &["BEGIN", "COMMIT", "END", "ROLLBACK", "SAVEPOINT", "RELEASE", "START"];
const ENGINE_CONTROL_KEYWORDS: &[&str] = &[
    "ATTACH",
    "DETACH",
    "PRAGMA",
    "VACUUM",
    "REINDEX",
    "ANALYZE",
    "LOAD_EXTENSION",
];

fn is_one_of(tok: &Token<'_>, words: &[&str]) -> bool {
    tok.kind == TokenKind::Word && words.iter().any(|w| tok.text.eq_ignore_ascii_case(w))
}

/// Splits `sql` into tokens, dropping whitespace and comments.
pub(crate) fn tokenize(sql: &str) -> Vec<Token<'_>> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            continue;
        }
        let kind = match c {
            b'\'' | b'"' | b'`' => {
                i = skip_quoted(bytes, i, c);
                if c == b'\'' {
                    TokenKind::Str
                } else {
                    TokenKind::QuotedIdent
                }
            }
            b'[' => {
                while i < bytes.len() && bytes[i] != b']' {
                    i += 1;
                }
                i = (i + 1).min(bytes.len());
                TokenKind::QuotedIdent
            }
            b';' => {
                i += 1;
                TokenKind::Semicolon
            }
            b'0'..=b'9' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                    i += 1;
                }
                TokenKind::Number
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric()
                        || bytes[i] == b'_'
                        || bytes[i] == b'$'
                        || bytes[i] >= 0x80)
                {
                    i += 1;
                }
                TokenKind::Word
            }
            _ => {
                i += 1;
                TokenKind::Symbol
            }
        };
        tokens.push(Token { kind, text: &sql[start..i], offset: start });
    }
    tokens
}

/// Index one past the closing quote; a doubled quote is an escape.
fn skip_quoted(bytes: &[u8], start: usize, quote: u8) -> usize {
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == quote {
            if bytes.get(i + 1) == Some(&quote) {
                i += 2;
                continue;
            }
            return i + 1;
        }
        i += 1;
    }
    bytes.len()
}

/// Non-empty statements, each with the index of the semicolon ending it.
fn split_statements<'t, 'a>(tokens: &'t [Token<'a>]) -> Vec<(&'t [Token<'a>], Option<usize>)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Semicolon {
            if i > start {
                out.push((&tokens[start..i], Some(i)));
            }
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push((&tokens[start..], None));
    }
    out
}

/// Kind of a single statement plus the token that decided it.
fn classify_single<'a>(tokens: &[Token<'a>]) -> (StatementKind, Option<Token<'a>>) {
    let body: Vec<Token<'a>> = tokens.iter().copied().skip_while(|t| t.is_symbol("(")).collect();
    let Some(first) = body.first().copied() else {
        return (StatementKind::Other, tokens.first().copied());
    };
    if first.is_word("WITH") {
        return match skip_cte_chain(&body[1..]) {
            Some(rest) => match rest.first() {
                Some(t) if t.is_word("SELECT") || t.is_word("VALUES") => (StatementKind::WithSelect, Some(*t)),
                Some(t) if is_one_of(t, WRITE_KEYWORDS) => (StatementKind::Write, Some(*t)),
                Some(t) => (StatementKind::Other, Some(*t)),
                None => (StatementKind::Other, Some(first)),
            },
            None => (StatementKind::Other, Some(first)),
        };
    }
    let kind = if first.is_word("SELECT") || first.is_word("VALUES") {
        StatementKind::Select
    } else if is_one_of(&first, WRITE_KEYWORDS) {
        StatementKind::Write
    } else if is_one_of(&first, DDL_KEYWORDS) {
        StatementKind::Ddl
    } else if is_one_of(&first, TRANSACTION_KEYWORDS) {
        StatementKind::Transaction
    } else {
        StatementKind::Other
    };
    (kind, Some(first))
}

/// Consumes `[RECURSIVE] name [(cols)] AS [NOT] [MATERIALIZED] (...)`,
/// comma-separated; returns the tokens after the chain.
fn skip_cte_chain<'t, 'a>(mut rest: &'t [Token<'a>]) -> Option<&'t [Token<'a>]> {
    if rest.first()?.is_word("RECURSIVE") {
        rest = &rest[1..];
    }
    loop {
        let name = rest.first()?;
        if !matches!(name.kind, TokenKind::Word | TokenKind::QuotedIdent) {
            return None;
        }
        rest = &rest[1..];
        if rest.first()?.is_symbol("(") {
            rest = skip_parens(rest)?;
        }
        if !rest.first()?.is_word("AS") {
            return None;
        }
        rest = &rest[1..];
        if rest.first()?.is_word("NOT") {
            rest = &rest[1..];
        }
        if rest.first()?.is_word("MATERIALIZED") {
            rest = &rest[1..];
        }
        if !rest.first()?.is_symbol("(") {
            return None;
        }
        rest = skip_parens(rest)?;
        match rest.first() {
            Some(t) if t.is_symbol(",") => rest = &rest[1..],
            _ => return Some(rest),
        }
    }
}

/// `tokens` starts at `(`; returns what follows the matching `)`.
fn skip_parens<'t, 'a>(tokens: &'t [Token<'a>]) -> Option<&'t [Token<'a>]> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_symbol("(") {
            depth += 1;
        } else if t.is_symbol(")") {
            depth = depth.checked_sub(1)?;
            if depth == 0 {
                return Some(&tokens[i + 1..]);
            }
        }
    }
    None
}

/// Classifies `sql`. Total: every input gets a kind.
pub fn classify_statement(sql: &str) -> StatementKind {
    let tokens = tokenize(sql);
    let statements = split_statements(&tokens);
    match statements.as_slice() {
        [] => StatementKind::Empty,
        [(single, _)] => classify_single(single).0,
        _ => StatementKind::Multiple,
    }
}

/// Accepts single `SELECT` / `WITH ... SELECT` statements with no `INTO`
/// and no engine-control keywords; the SQL is kept byte-identical.
pub fn validate_readonly(sql: &str) -> Result<ValidatedQuery, GuardError> {
    let tokens = tokenize(sql);
    let statements = split_statements(&tokens);
    let (stmt, _) = match statements.as_slice() {
        [] => return Err(GuardError::Empty),
        [single] => *single,
        [(_, Some(semi)), ..] => {
            let t = tokens[*semi];
            return Err(GuardError::MultipleStatements { token: t.text.into(), offset: t.offset });
        }
        [(_, None), ..] => unreachable!("only the last statement lacks a terminator"),
    };
    let (kind, decider) = classify_single(stmt);
    let at = |t: Option<Token<'_>>| t.map_or((String::new(), 0), |t| (t.text.to_string(), t.offset));
    match kind {
        StatementKind::Select | StatementKind::WithSelect => {}
        StatementKind::Write | StatementKind::Ddl => {
            let (token, offset) = at(decider);
            return Err(GuardError::WriteStatement { token, offset });
        }
        StatementKind::Other if decider.is_some_and(|t| is_one_of(&t, ENGINE_CONTROL_KEYWORDS)) => {
            let (token, offset) = at(decider);
            return Err(GuardError::EngineControl { token, offset });
        }
        _ => {
            let (token, offset) = at(decider);
            return Err(GuardError::Unsupported { token, offset });
        }
    }
    for t in stmt {
        if t.is_word("INTO") {
            return Err(GuardError::WriteStatement { token: t.text.into(), offset: t.offset });
        }
        if is_one_of(t, ENGINE_CONTROL_KEYWORDS) {
            return Err(GuardError::EngineControl { token: t.text.into(), offset: t.offset });
        }
    }
    Ok(ValidatedQuery { sql: sql.to_string(), kind })
}

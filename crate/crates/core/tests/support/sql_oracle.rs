//! Reference statement-kind checker for the SQL guard tests.
//!
//! Written separately from the production guard: a character-level
//! recursive-descent reader with its own grammar for statements, CTE chains
//! and parenthesized groups. Kinds use the same snake_case names as the
//! guard's serialized `StatementKind`.

#![allow(dead_code)]

const WRITES: [&str; 6] = ["insert", "update", "delete", "replace", "upsert", "merge"];
const DDL: [&str; 5] = ["create", "drop", "alter", "truncate", "rename"];
const TRANSACTION: [&str; 7] = ["begin", "commit", "end", "rollback", "savepoint", "release", "start"];
const ENGINE: [&str; 7] = ["attach", "detach", "pragma", "vacuum", "reindex", "analyze", "load_extension"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme {
    Word(String),
    Quoted,
    Literal,
    Number,
    Open,
    Close,
    Comma,
    Semi,
    Other,
}

struct Reader<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn trivia(&mut self) {
        loop {
            match (self.at(0), self.at(1)) {
                (Some(c), _) if c.is_whitespace() => self.pos += 1,
                (Some('-'), Some('-')) => {
                    while let Some(c) = self.at(0) {
                        self.pos += 1;
                        if c == '\n' {
                            break;
                        }
                    }
                }
                (Some('/'), Some('*')) => {
                    self.pos += 2;
                    while self.at(0).is_some() && !(self.at(0) == Some('*') && self.at(1) == Some('/')) {
                        self.pos += 1;
                    }
                    self.pos = (self.pos + 2).min(self.chars.len());
                }
                _ => return,
            }
        }
    }

    fn quoted(&mut self, close: char, doubled_escape: bool) {
        self.pos += 1;
        while let Some(c) = self.at(0) {
            self.pos += 1;
            if c == close {
                if doubled_escape && self.at(0) == Some(close) {
                    self.pos += 1;
                    continue;
                }
                return;
            }
        }
    }

    /// Next lexeme after trivia, or None at end of input.
    fn next(&mut self) -> Option<Lexeme> {
        self.trivia();
        let c = self.at(0)?;
        Some(match c {
            '\'' => {
                self.quoted('\'', true);
                Lexeme::Literal
            }
            '"' | '`' => {
                self.quoted(c, true);
                Lexeme::Quoted
            }
            '[' => {
                self.quoted(']', false);
                Lexeme::Quoted
            }
            '(' => {
                self.pos += 1;
                Lexeme::Open
            }
            ')' => {
                self.pos += 1;
                Lexeme::Close
            }
            ',' => {
                self.pos += 1;
                Lexeme::Comma
            }
            ';' => {
                self.pos += 1;
                Lexeme::Semi
            }
            c if c.is_ascii_digit() => {
                while self.at(0).is_some_and(|d| d.is_ascii_alphanumeric() || d == '.') {
                    self.pos += 1;
                }
                Lexeme::Number
            }
            c if c.is_alphabetic() || c == '_' || !c.is_ascii() => {
                let start = self.pos;
                while self
                    .at(0)
                    .is_some_and(|d| d.is_alphanumeric() || d == '_' || d == '$' || !d.is_ascii())
                {
                    self.pos += 1;
                }
                Lexeme::Word(self.chars[start..self.pos].iter().collect::<String>().to_lowercase())
            }
            _ => {
                self.pos += 1;
                Lexeme::Other
            }
        })
    }

    fn peek(&mut self) -> Option<Lexeme> {
        let save = self.pos;
        let l = self.next();
        self.pos = save;
        l
    }
}

/// Facts gathered about one statement.
#[derive(Debug, Default)]
struct Statement {
    kind: &'static str,
    has_into: bool,
    has_engine_word: bool,
}

fn is_word(l: &Option<Lexeme>, w: &str) -> bool {
    matches!(l, Some(Lexeme::Word(x)) if x == w)
}

struct Parser<'a> {
    r: Reader<'a>,
    has_into: bool,
    has_engine_word: bool,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Option<Lexeme> {
        let l = self.r.next();
        if let Some(Lexeme::Word(w)) = &l {
            if w == "into" {
                self.has_into = true;
            }
            if ENGINE.contains(&w.as_str()) {
                self.has_engine_word = true;
            }
        }
        l
    }

    /// After an `(` has been consumed: reads through the matching `)`.
    /// Returns false if input ends first.
    fn group(&mut self) -> bool {
        loop {
            match self.bump() {
                None => return false,
                Some(Lexeme::Close) => return true,
                Some(Lexeme::Open) => {
                    if !self.group() {
                        return false;
                    }
                }
                Some(_) => {}
            }
        }
    }

    /// cte := name [ '(' ... ')' ] AS [NOT] [MATERIALIZED] '(' ... ')'
    fn cte(&mut self) -> bool {
        match self.bump() {
            Some(Lexeme::Word(_)) | Some(Lexeme::Quoted) => {}
            _ => return false,
        }
        if self.r.peek() == Some(Lexeme::Open) {
            self.bump();
            if !self.group() {
                return false;
            }
        }
        if !is_word(&self.bump(), "as") {
            return false;
        }
        if is_word(&self.r.peek(), "not") {
            self.bump();
        }
        if is_word(&self.r.peek(), "materialized") {
            self.bump();
        }
        if self.bump() != Some(Lexeme::Open) {
            return false;
        }
        self.group()
    }

    /// with_clause := WITH [RECURSIVE] cte { ',' cte }
    fn with_clause(&mut self) -> bool {
        if is_word(&self.r.peek(), "recursive") {
            self.bump();
        }
        loop {
            if !self.cte() {
                return false;
            }
            if self.r.peek() == Some(Lexeme::Comma) {
                self.bump();
            } else {
                return true;
            }
        }
    }

    fn keyword_kind(word: &str) -> &'static str {
        if word == "select" || word == "values" {
            "select"
        } else if WRITES.contains(&word) {
            "write"
        } else if DDL.contains(&word) {
            "ddl"
        } else if TRANSACTION.contains(&word) {
            "transaction"
        } else {
            "other"
        }
    }

    /// Reads one statement up to (not including) a top-level `;` or the
    /// end. Returns None when the statement is empty.
    fn statement(&mut self) -> Option<Statement> {
        self.has_into = false;
        self.has_engine_word = false;
        let first = self.r.peek();
        if first.is_none() || first == Some(Lexeme::Semi) {
            return None;
        }
        while self.r.peek() == Some(Lexeme::Open) {
            self.bump();
        }
        let lead = self.bump();
        let kind = match &lead {
            Some(Lexeme::Word(w)) if w == "with" => {
                if self.with_clause() {
                    match self.bump() {
                        Some(Lexeme::Word(w)) if w == "select" || w == "values" => "with_select",
                        Some(Lexeme::Word(w)) if WRITES.contains(&w.as_str()) => "write",
                        _ => "other",
                    }
                } else {
                    "other"
                }
            }
            Some(Lexeme::Word(w)) => Self::keyword_kind(w),
            _ => "other",
        };
        while !matches!(self.r.peek(), None | Some(Lexeme::Semi)) {
            self.bump();
        }
        Some(Statement { kind, has_into: self.has_into, has_engine_word: self.has_engine_word })
    }

    fn program(&mut self) -> Vec<Statement> {
        let mut out = Vec::new();
        loop {
            if let Some(s) = self.statement() {
                out.push(s);
            }
            match self.r.next() {
                Some(Lexeme::Semi) => continue,
                None => return out,
                Some(_) => continue,
            }
        }
    }
}

fn parse(sql: &str) -> Vec<Statement> {
    Parser { r: Reader::new(sql), has_into: false, has_engine_word: false }.program()
}

/// Statement kind of `sql`.
pub fn oracle_kind(sql: &str) -> &'static str {
    let stmts = parse(sql);
    match stmts.len() {
        0 => "empty",
        1 => stmts[0].kind,
        _ => "multiple",
    }
}

/// Whether a read-only guard should accept `sql`.
pub fn oracle_accepts(sql: &str) -> bool {
    let stmts = parse(sql);
    stmts.len() == 1
        && matches!(stmts[0].kind, "select" | "with_select")
        && !stmts[0].has_into
        && !stmts[0].has_engine_word
}

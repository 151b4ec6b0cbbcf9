//! Pacpal, the small scripting language for comparing fitted curves.
//!
//! A script loads equation files, binds them to names, asserts pairwise
//! `better` relationships, collects curves into named groups, and ranks
//! groups. One statement per line; `#` starts a comment.
//!
//! ```text
//! load linkedin-basic16-proportional.json as li_b16
//! assert li_2w16 better li_b16
//! group linkedin_ranking
//! add li_b16 to linkedin_ranking as basic16
//! rank linkedin_ranking
//! ```
//!
//! Failed assertions are reported and execution continues; runtime errors
//! (missing files, unbound names) halt the script.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use crate::powerlaw::{compare_uniformity, read_equation_file, FittedCurve};

#[derive(Debug, thiserror::Error)]
pub enum PacpalError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("runtime error at line {line}: {message}")]
    Runtime { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Load { path: String, binding: String },
    Assert { lhs: String, rhs: String },
    Group { name: String },
    Add { binding: String, group: String, display: String },
    Rank { group: String },
}

/// A statement tagged with the source line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub statement: Statement,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    statements: Vec<Stmt>,
}

#[derive(Debug)]
struct Token {
    text: String,
    column: usize,
    quoted: bool,
}

fn lex_line(line_number: usize, line: &str) -> Result<(Vec<Token>, usize), PacpalError> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let column = i + 1;
        if c == '"' {
            i += 1;
            let mut text = String::new();
            let mut closed = false;
            while i < chars.len() {
                match chars[i] {
                    '"' => {
                        closed = true;
                        i += 1;
                        break;
                    }
                    '\\' if i + 1 < chars.len() && matches!(chars[i + 1], '"' | '\\') => {
                        text.push(chars[i + 1]);
                        i += 2;
                    }
                    other => {
                        text.push(other);
                        i += 1;
                    }
                }
            }
            if !closed {
                return Err(PacpalError::Parse {
                    line: line_number,
                    column,
                    message: "unterminated string".to_string(),
                });
            }
            tokens.push(Token { text, column, quoted: true });
        } else {
            let mut text = String::new();
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '#' && chars[i] != '"'
            {
                text.push(chars[i]);
                i += 1;
            }
            tokens.push(Token { text, column, quoted: false });
        }
    }
    Ok((tokens, chars.len() + 1))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct LineParser<'a> {
    tokens: &'a [Token],
    position: usize,
    line: usize,
    end_column: usize,
}

impl<'a> LineParser<'a> {
    fn fail(&self, column: usize, message: String) -> PacpalError {
        PacpalError::Parse { line: self.line, column, message }
    }

    fn next(&mut self, expectation: &str) -> Result<&'a Token, PacpalError> {
        match self.tokens.get(self.position) {
            Some(token) => {
                self.position += 1;
                Ok(token)
            }
            None => Err(self.fail(self.end_column, format!("expected {expectation}"))),
        }
    }

    fn keyword(&mut self, keyword: &str) -> Result<(), PacpalError> {
        let token = self.next(&format!("keyword {keyword:?}"))?;
        if token.quoted || token.text != keyword {
            return Err(PacpalError::Parse {
                line: self.line,
                column: token.column,
                message: format!("expected keyword {keyword:?}, got {:?}", token.text),
            });
        }
        Ok(())
    }

    fn identifier(&mut self, role: &str) -> Result<String, PacpalError> {
        let token = self.next(&format!("{role} identifier"))?;
        if token.quoted || !is_identifier(&token.text) {
            return Err(PacpalError::Parse {
                line: self.line,
                column: token.column,
                message: format!("{role} must be an identifier, got {:?}", token.text),
            });
        }
        Ok(token.text.clone())
    }

    /// Any single token: a bare word or a quoted string.
    fn word(&mut self, role: &str) -> Result<String, PacpalError> {
        Ok(self.next(role)?.text.clone())
    }

    fn finish(&self) -> Result<(), PacpalError> {
        match self.tokens.get(self.position) {
            Some(extra) => Err(self.fail(
                extra.column,
                format!("unexpected trailing token {:?}", extra.text),
            )),
            None => Ok(()),
        }
    }
}

impl Program {
    pub fn parse(source: &str) -> Result<Program, PacpalError> {
        let mut statements = Vec::new();
        for (index, text) in source.lines().enumerate() {
            let line = index + 1;
            let (tokens, end_column) = lex_line(line, text)?;
            let Some(first) = tokens.first() else { continue };
            let mut parser = LineParser { tokens: &tokens, position: 1, line, end_column };
            if first.quoted {
                return Err(parser.fail(first.column, "expected a statement keyword".to_string()));
            }
            let statement = match first.text.as_str() {
                "load" => {
                    let path = parser.word("path")?;
                    parser.keyword("as")?;
                    let binding = parser.identifier("binding")?;
                    Statement::Load { path, binding }
                }
                "assert" => {
                    let lhs = parser.identifier("left-hand")?;
                    parser.keyword("better")?;
                    let rhs = parser.identifier("right-hand")?;
                    Statement::Assert { lhs, rhs }
                }
                "group" => Statement::Group { name: parser.identifier("group")? },
                "add" => {
                    let binding = parser.identifier("binding")?;
                    parser.keyword("to")?;
                    let group = parser.identifier("group")?;
                    parser.keyword("as")?;
                    let display = parser.word("display name")?;
                    Statement::Add { binding, group, display }
                }
                "rank" => Statement::Rank { group: parser.identifier("group")? },
                other => {
                    return Err(parser.fail(first.column, format!("unknown keyword {other:?}")))
                }
            };
            parser.finish()?;
            statements.push(Stmt { statement, line });
        }
        Ok(Program { statements })
    }

    pub fn statements(&self) -> &[Stmt] {
        &self.statements
    }
}

fn quote_token(s: &str) -> String {
    let needs_quoting =
        s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '#' || c == '"');
    if !needs_quoting {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Load { path, binding } => {
                write!(f, "load {} as {binding}", quote_token(path))
            }
            Statement::Assert { lhs, rhs } => write!(f, "assert {lhs} better {rhs}"),
            Statement::Group { name } => write!(f, "group {name}"),
            Statement::Add { binding, group, display } => {
                write!(f, "add {binding} to {group} as {}", quote_token(display))
            }
            Statement::Rank { group } => write!(f, "rank {group}"),
        }
    }
}

impl fmt::Display for Program {
    /// Canonical form: one statement per line, comments and blank lines
    /// dropped. Reparsing the output yields the same statements.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for stmt in &self.statements {
            writeln!(f, "{}", stmt.statement)?;
        }
        Ok(())
    }
}

/// Turns a `load` path into a curve. Scripts are resolver-agnostic so
/// tests can interpret against in-memory curves.
pub trait CurveResolver {
    fn resolve(&self, path: &str) -> Result<FittedCurve, String>;
}

/// Resolves paths against a base directory using equation files on disk.
pub struct FileResolver {
    base: PathBuf,
}

impl FileResolver {
    pub fn new(base: impl Into<PathBuf>) -> FileResolver {
        FileResolver { base: base.into() }
    }
}

impl CurveResolver for FileResolver {
    fn resolve(&self, path: &str) -> Result<FittedCurve, String> {
        read_equation_file(self.base.join(path)).map_err(|error| error.to_string())
    }
}

impl CurveResolver for HashMap<String, FittedCurve> {
    fn resolve(&self, path: &str) -> Result<FittedCurve, String> {
        self.get(path).cloned().ok_or_else(|| format!("no curve registered for {path:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionOutcome {
    pub line: usize,
    pub lhs: String,
    pub rhs: String,
    pub lhs_alpha: f64,
    pub rhs_alpha: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub display: String,
    pub alpha: f64,
}

/// A group listing in rank order, worst first (alpha farthest from zero),
/// best last. Ties order by display name ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingOutput {
    pub line: usize,
    pub group: String,
    pub entries: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportItem {
    Assertion(AssertionOutcome),
    Ranking(RankingOutput),
}

/// Everything a script run produced, in statement order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterpretReport {
    pub items: Vec<ReportItem>,
}

impl InterpretReport {
    pub fn failed_assertions(&self) -> usize {
        self.items
            .iter()
            .filter(|item| matches!(item, ReportItem::Assertion(a) if !a.passed))
            .count()
    }

    pub fn all_assertions_passed(&self) -> bool {
        self.failed_assertions() == 0
    }
}

/// Runs a parsed program. Statements execute strictly in order; a binding
/// or group must be defined before use and may not be redefined.
pub fn interpret(
    program: &Program,
    resolver: &dyn CurveResolver,
) -> Result<InterpretReport, PacpalError> {
    let mut bindings: HashMap<String, FittedCurve> = HashMap::new();
    let mut groups: HashMap<String, Vec<(String, FittedCurve)>> = HashMap::new();
    let mut report = InterpretReport::default();
    for stmt in &program.statements {
        let line = stmt.line;
        let fail = |message: String| PacpalError::Runtime { line, message };
        match &stmt.statement {
            Statement::Load { path, binding } => {
                if bindings.contains_key(binding) {
                    return Err(fail(format!("name {binding} is already bound")));
                }
                let curve = resolver
                    .resolve(path)
                    .map_err(|error| fail(format!("cannot load {path}: {error}")))?;
                bindings.insert(binding.clone(), curve);
            }
            Statement::Assert { lhs, rhs } => {
                let resolve = |name: &str| {
                    bindings.get(name).ok_or_else(|| fail(format!("no curve bound to {name}")))
                };
                let left = resolve(lhs)?;
                let right = resolve(rhs)?;
                report.items.push(ReportItem::Assertion(AssertionOutcome {
                    line,
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                    lhs_alpha: left.alpha,
                    rhs_alpha: right.alpha,
                    passed: compare_uniformity(left, right) == std::cmp::Ordering::Less,
                }));
            }
            Statement::Group { name } => {
                if groups.contains_key(name) {
                    return Err(fail(format!("group {name} is already defined")));
                }
                groups.insert(name.clone(), Vec::new());
            }
            Statement::Add { binding, group, display } => {
                let curve = bindings
                    .get(binding)
                    .ok_or_else(|| fail(format!("no curve bound to {binding}")))?
                    .clone();
                let members = groups
                    .get_mut(group)
                    .ok_or_else(|| fail(format!("group {group} is not defined")))?;
                members.push((display.clone(), curve));
            }
            Statement::Rank { group } => {
                let members = groups
                    .get(group)
                    .ok_or_else(|| fail(format!("group {group} is not defined")))?;
                let mut entries: Vec<RankEntry> = members
                    .iter()
                    .map(|(display, curve)| RankEntry {
                        display: display.clone(),
                        alpha: curve.alpha,
                    })
                    .collect();
                entries.sort_by(|a, b| {
                    b.alpha
                        .abs()
                        .total_cmp(&a.alpha.abs())
                        .then_with(|| a.display.cmp(&b.display))
                });
                report.items.push(ReportItem::Ranking(RankingOutput {
                    line,
                    group: group.clone(),
                    entries,
                }));
            }
        }
    }
    Ok(report)
}

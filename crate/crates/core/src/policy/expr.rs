//! Infix expression grammar for ad-hoc policies.
//!
//! ```text
//! expr   := term { "|" term }
//! term   := factor { "&" factor }
//! factor := "!" factor | "(" expr ")" | atom
//! atom   := minlen(N) | digits(N) | classes(N) | words(N)
//!         | upper | lower | digit | symbol | dict
//!         | <catalog or previously defined name>
//! ```
//!
//! `dict` is the dictionary check against the catalog's configured
//! wordlist. Precedence: `!` binds tighter than `&`, which binds tighter
//! than `|`.

use std::collections::HashMap;

use super::{CharClass, PolicyCatalog, PolicyError, PolicyPredicate};

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Word(String),
    Number(usize),
    LParen,
    RParen,
    Amp,
    Pipe,
    Bang,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn syntax(column: usize, message: impl Into<String>) -> PolicyError {
    PolicyError::ExpressionSyntax { column, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<Token>, PolicyError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let column = i + 1;
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '(' => {
                tokens.push(Token { kind: TokenKind::LParen, column });
                i += 1;
            }
            ')' => {
                tokens.push(Token { kind: TokenKind::RParen, column });
                i += 1;
            }
            '&' => {
                tokens.push(Token { kind: TokenKind::Amp, column });
                i += 1;
            }
            '|' => {
                tokens.push(Token { kind: TokenKind::Pipe, column });
                i += 1;
            }
            '!' => {
                tokens.push(Token { kind: TokenKind::Bang, column });
                i += 1;
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if word.bytes().all(|b| b.is_ascii_digit()) {
                    let value = word
                        .parse()
                        .map_err(|_| syntax(column, format!("number {word:?} out of range")))?;
                    tokens.push(Token { kind: TokenKind::Number(value), column });
                } else {
                    tokens.push(Token { kind: TokenKind::Word(word), column });
                }
            }
            other => return Err(syntax(column, format!("unexpected character {other:?}"))),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    position: usize,
    end_column: usize,
    catalog: &'a PolicyCatalog,
    defined: &'a HashMap<String, PolicyPredicate>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.position)
    }

    fn next_column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    fn advance(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.position).cloned();
        if token.is_some() {
            self.position += 1;
        }
        token
    }

    fn eat(&mut self, kind: &TokenKind, describe: &str) -> Result<(), PolicyError> {
        match self.peek() {
            Some(t) if t.kind == *kind => {
                self.position += 1;
                Ok(())
            }
            _ => Err(syntax(self.next_column(), format!("expected {describe}"))),
        }
    }

    fn parse_or(&mut self) -> Result<PolicyPredicate, PolicyError> {
        let mut left = self.parse_and()?;
        while matches!(self.peek(), Some(t) if t.kind == TokenKind::Pipe) {
            self.position += 1;
            left = left.or(self.parse_and()?);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<PolicyPredicate, PolicyError> {
        let mut left = self.parse_factor()?;
        while matches!(self.peek(), Some(t) if t.kind == TokenKind::Amp) {
            self.position += 1;
            left = left.and(self.parse_factor()?);
        }
        Ok(left)
    }

    fn parse_factor(&mut self) -> Result<PolicyPredicate, PolicyError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Bang) => {
                self.position += 1;
                Ok(self.parse_factor()?.not())
            }
            Some(TokenKind::LParen) => {
                self.position += 1;
                let inner = self.parse_or()?;
                self.eat(&TokenKind::RParen, "\")\"")?;
                Ok(inner)
            }
            Some(TokenKind::Word(_)) => self.parse_atom(),
            _ => Err(syntax(self.next_column(), "expected a policy atom")),
        }
    }

    fn numeric_argument(&mut self, atom: &str) -> Result<usize, PolicyError> {
        self.eat(&TokenKind::LParen, &format!("\"(\" after {atom}"))?;
        let value = match self.advance() {
            Some(Token { kind: TokenKind::Number(n), .. }) => n,
            other => {
                let column = other.map_or(self.end_column, |t| t.column);
                return Err(syntax(column, format!("expected a number argument for {atom}")));
            }
        };
        self.eat(&TokenKind::RParen, "\")\"")?;
        Ok(value)
    }

    fn parse_atom(&mut self) -> Result<PolicyPredicate, PolicyError> {
        let token = self.advance().expect("caller checked for a word");
        let TokenKind::Word(word) = token.kind else { unreachable!() };
        match word.as_str() {
            "minlen" => Ok(PolicyPredicate::MinLength(self.numeric_argument("minlen")?)),
            "digits" => Ok(PolicyPredicate::MinDigits(self.numeric_argument("digits")?)),
            "classes" => Ok(PolicyPredicate::MinClassCount(self.numeric_argument("classes")?)),
            "words" => Ok(PolicyPredicate::MinWordCount(self.numeric_argument("words")?)),
            "upper" => Ok(PolicyPredicate::RequiresClass(CharClass::Upper)),
            "lower" => Ok(PolicyPredicate::RequiresClass(CharClass::Lower)),
            "digit" => Ok(PolicyPredicate::RequiresClass(CharClass::Digit)),
            "symbol" => Ok(PolicyPredicate::RequiresClass(CharClass::Symbol)),
            "dict" => self.catalog.dictionary_check("dict"),
            name => {
                if let Some(predicate) = self.defined.get(name) {
                    Ok(predicate.clone())
                } else {
                    self.catalog.builtin(name)
                }
            }
        }
    }
}

/// Parses one policy expression against a catalog and any previously
/// defined named policies.
pub fn parse_expression(
    src: &str,
    catalog: &PolicyCatalog,
    defined: &HashMap<String, PolicyPredicate>,
) -> Result<PolicyPredicate, PolicyError> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(syntax(1, "empty policy expression"));
    }
    let end_column = src.chars().count() + 1;
    let mut parser = Parser { tokens, position: 0, end_column, catalog, defined };
    let predicate = parser.parse_or()?;
    if let Some(extra) = parser.peek() {
        return Err(syntax(extra.column, "unexpected trailing input"));
    }
    Ok(predicate)
}

/// Parses a policy spec file: one `name = <expression>` per line, with `#`
/// comments. Later lines may reference earlier names. Redefining a name —
/// catalog names included — is an error.
pub fn parse_policy_file(
    src: &str,
    catalog: &PolicyCatalog,
) -> Result<Vec<(String, PolicyPredicate)>, PolicyError> {
    let mut defined: HashMap<String, PolicyPredicate> = HashMap::new();
    let mut ordered = Vec::new();
    for (index, raw_line) in src.lines().enumerate() {
        let line_number = index + 1;
        let line = match raw_line.find('#') {
            Some(at) => &raw_line[..at],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (name, expression) = line.split_once('=').ok_or_else(|| {
            PolicyError::PolicyFileFormat {
                line: line_number,
                message: "expected <name> = <expression>".to_string(),
            }
        })?;
        let name = name.trim();
        let valid_name = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid_name {
            return Err(PolicyError::PolicyFileFormat {
                line: line_number,
                message: format!("invalid policy name {name:?}"),
            });
        }
        if defined.contains_key(name) || PolicyCatalog::NAMES.contains(&name) {
            return Err(PolicyError::DuplicateDefinition { name: name.to_string() });
        }
        let predicate = parse_expression(expression, catalog, &defined).map_err(|e| match e {
            PolicyError::ExpressionSyntax { column, message } => PolicyError::PolicyFileFormat {
                line: line_number,
                message: format!("column {column}: {message}"),
            },
            other => other,
        })?;
        defined.insert(name.to_string(), predicate.clone());
        ordered.push((name.to_string(), predicate));
    }
    Ok(ordered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Wordlist;
    use std::sync::Arc;

    fn empty() -> HashMap<String, PolicyPredicate> {
        HashMap::new()
    }

    #[test]
    fn atoms_and_conjunction() {
        let catalog = PolicyCatalog::new();
        let phi = parse_expression("minlen(8) & classes(3)", &catalog, &empty()).unwrap();
        assert_eq!(
            phi,
            PolicyPredicate::MinLength(8).and(PolicyPredicate::MinClassCount(3))
        );
        assert!(phi.evaluate("Abcdef7!"));
        assert!(!phi.evaluate("abcdefgh"));
    }

    #[test]
    fn catalog_names_are_atoms() {
        let catalog = PolicyCatalog::new();
        let phi = parse_expression("2word12 | minlen(20)", &catalog, &empty()).unwrap();
        assert!(phi.evaluate("correct horse!"));
        assert!(phi.evaluate("aaaaaaaaaaaaaaaaaaaa"));
        assert!(!phi.evaluate("correcthorse"));
    }

    #[test]
    fn or_binds_looser_than_and() {
        let catalog = PolicyCatalog::new();
        let phi = parse_expression("minlen(3) | minlen(1) & minlen(30)", &catalog, &empty()).unwrap();
        assert!(phi.evaluate("abcd"));
        assert!(!phi.evaluate("a"));
    }

    #[test]
    fn negation_and_parentheses() {
        let catalog = PolicyCatalog::new();
        let phi = parse_expression("!(upper | digit)", &catalog, &empty()).unwrap();
        assert!(phi.evaluate("lower only"));
        assert!(!phi.evaluate("Upper"));
        assert!(!phi.evaluate("digit1"));
        let double = parse_expression("!!lower", &catalog, &empty()).unwrap();
        assert!(double.evaluate("x"));
    }

    #[test]
    fn dict_atom_uses_the_catalog_wordlist() {
        let catalog =
            PolicyCatalog::with_wordlist(Arc::new(Wordlist::from_words(["password"])));
        let phi = parse_expression("minlen(8) & dict", &catalog, &empty()).unwrap();
        assert_eq!(phi, catalog.builtin("dictionary8").unwrap());
        assert!(matches!(
            parse_expression("dict", &PolicyCatalog::new(), &empty()),
            Err(PolicyError::WordlistRequired { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_columns() {
        let catalog = PolicyCatalog::new();
        match parse_expression("minlen(8) &", &catalog, &empty()) {
            Err(PolicyError::ExpressionSyntax { column: 12, .. }) => {}
            other => panic!("unexpected result: {other:?}"),
        }
        match parse_expression("minlen 8", &catalog, &empty()) {
            Err(PolicyError::ExpressionSyntax { column: 8, .. }) => {}
            other => panic!("unexpected result: {other:?}"),
        }
        assert!(parse_expression("", &catalog, &empty()).is_err());
        assert!(parse_expression("minlen(8) extra", &catalog, &empty()).is_err());
        assert!(matches!(
            parse_expression("nosuchpolicy", &catalog, &empty()),
            Err(PolicyError::UnknownPolicy { .. })
        ));
    }

    #[test]
    fn policy_file_definitions_build_on_each_other() {
        let catalog = PolicyCatalog::new();
        let src = "\
# local policy definitions
strong = minlen(12) & classes(3)
stronger = strong & words(2)   # reuses the line above
";
        let parsed = parse_policy_file(src, &catalog).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].0, "strong");
        assert!(parsed[1].1.evaluate("Abcdef 7ghijk!"));
        // One letter run only: "words(2)" fails even though "strong" holds.
        assert!(!parsed[1].1.evaluate("Abcdefghij77"));
    }

    #[test]
    fn policy_file_rejects_redefinition_and_bad_lines() {
        let catalog = PolicyCatalog::new();
        assert!(matches!(
            parse_policy_file("x = minlen(1)\nx = minlen(2)\n", &catalog),
            Err(PolicyError::DuplicateDefinition { .. })
        ));
        assert!(matches!(
            parse_policy_file("basic12 = minlen(12)\n", &catalog),
            Err(PolicyError::DuplicateDefinition { .. })
        ));
        assert!(matches!(
            parse_policy_file("just some text\n", &catalog),
            Err(PolicyError::PolicyFileFormat { line: 1, .. })
        ));
        assert!(matches!(
            parse_policy_file("y = minlen(\n", &catalog),
            Err(PolicyError::PolicyFileFormat { line: 1, .. })
        ));
    }
}

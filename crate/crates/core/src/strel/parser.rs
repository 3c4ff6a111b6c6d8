//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! implies  := or ( "->" implies )?
//! or       := and ( "|" and )*
//! and      := prefix ( "&" prefix )*
//! prefix   := ("F" | "G") "[" int "," int "]" prefix
//!           | spatial
//! spatial  := unary ( "reach" "[" int "]" unary )*
//! unary    := "!" unary
//!           | "somewhere" "[" int "]" unary
//!           | "escape" "[" int "," int "]" unary
//!           | ("F" | "G") "[" int "," int "]" unary
//!           | primary
//! primary  := "(" implies ")" | "true" | "y" (">" | "<") number | "label" "(" ident ")"
//! ```
//!
//! Binding strength: unary > reach > temporal > `&` > `|` > `->`.

use crate::error::{Error, Result};
use crate::spatial::StaticLabels;

use super::ast::{Direction, Formula};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64, String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Gt,
    Lt,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, column: tc });
        if c == '\n' {
            line += 1;
            col = 1;
            k += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            k += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '!' => Some(Tok::Bang),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '>' => Some(Tok::Gt),
            '<' => Some(Tok::Lt),
            _ => None,
        };
        if let Some(tok) = single {
            push(&mut out, tok);
            k += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(k + 1) == Some(&'>') {
            push(&mut out, Tok::Arrow);
            k += 2;
            col += 2;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || c == '.'
            || ((c == '-' || c == '+') && chars.get(k + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            let begin = k;
            k += 1;
            while k < chars.len() {
                let n = chars[k];
                let exp_sign = (n == '-' || n == '+') && matches!(chars[k - 1], 'e' | 'E');
                if n.is_ascii_digit() || n == '.' || n == 'e' || n == 'E' || exp_sign {
                    k += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[begin..k].iter().collect();
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                line: tl,
                column: tc,
                message: format!("malformed number `{text}`"),
            })?;
            col += k - begin;
            push(&mut out, Tok::Number(value, text));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let begin = k;
            while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '_' || chars[k] == '-') {
                // `-` inside identifiers only when not starting an arrow
                if chars[k] == '-' && chars.get(k + 1) == Some(&'>') {
                    break;
                }
                k += 1;
            }
            let text: String = chars[begin..k].iter().collect();
            col += k - begin;
            push(&mut out, Tok::Ident(text));
            continue;
        }
        return Err(Error::Syntax {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    labels: Option<&'a StaticLabels>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = &self.tokens[self.pos];
        Err(Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn integer(&mut self) -> Result<usize> {
        match self.peek().clone() {
            Tok::Number(v, text) => {
                if v < 0.0 || v.fract() != 0.0 || text.contains(['.', 'e', 'E']) {
                    return self.error(format!("malformed interval: bound `{text}` is not a nonnegative integer"));
                }
                self.bump();
                Ok(v as usize)
            }
            other => self.error(format!("malformed interval: expected integer, found {}", describe(&other))),
        }
    }

    fn interval(&mut self) -> Result<(usize, usize)> {
        self.expect(Tok::LBracket, "`[`")?;
        let (line, column) = (self.tokens[self.pos].line, self.tokens[self.pos].column);
        let lo = self.integer()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.integer()?;
        self.expect(Tok::RBracket, "`]`")?;
        if lo > hi {
            return Err(Error::Syntax {
                line,
                column,
                message: format!("malformed interval: [{lo},{hi}] has lower bound above upper bound"),
            });
        }
        Ok((lo, hi))
    }

    fn radius(&mut self) -> Result<usize> {
        self.expect(Tok::LBracket, "`[`")?;
        let d = self.integer()?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(d)
    }

    fn implies(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.prefix()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = Formula::and(lhs, self.prefix()?);
        }
        Ok(lhs)
    }

    /// Temporal operators at statement level take a whole reach chain.
    fn prefix(&mut self) -> Result<Formula> {
        if self.peek_ident("F") || self.peek_ident("G") {
            let eventually = self.peek_ident("F");
            self.bump();
            let (lo, hi) = self.interval()?;
            let body = self.prefix()?;
            return Ok(temporal(eventually, lo, hi, body));
        }
        self.spatial()
    }

    fn spatial(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.peek_ident("reach") {
            self.bump();
            let d = self.radius()?;
            let rhs = self.unary()?;
            lhs = Formula::reach(lhs, d, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(name) if name == "somewhere" => {
                self.bump();
                let d = self.radius()?;
                Ok(Formula::somewhere(d, self.unary()?))
            }
            Tok::Ident(name) if name == "escape" => {
                self.bump();
                let (lo, hi) = self.interval()?;
                Ok(Formula::escape(lo, hi, self.unary()?))
            }
            Tok::Ident(name) if name == "F" || name == "G" => {
                self.bump();
                let (lo, hi) = self.interval()?;
                Ok(temporal(name == "F", lo, hi, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.implies()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) if name == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(name) if name == "y" => {
                self.bump();
                let direction = match self.bump() {
                    Tok::Gt => Direction::Greater,
                    Tok::Lt => Direction::Less,
                    _ => {
                        self.pos -= 1;
                        return self.error("expected `>` or `<` after `y`");
                    }
                };
                match self.peek().clone() {
                    Tok::Number(threshold, _) => {
                        self.bump();
                        Ok(Formula::Compare { direction, threshold })
                    }
                    other => self.error(format!("expected threshold, found {}", describe(&other))),
                }
            }
            Tok::Ident(name) if name == "label" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let label = match self.peek().clone() {
                    Tok::Ident(l) => l,
                    other => return self.error(format!("expected label name, found {}", describe(&other))),
                };
                if let Some(known) = self.labels {
                    if !known.contains_label(&label) {
                        return Err(Error::UnknownLabel(label));
                    }
                }
                self.bump();
                self.expect(Tok::RParen, "`)`")?;
                Ok(Formula::Label(label))
            }
            other => self.error(format!("expected a formula, found {}", describe(&other))),
        }
    }
}

fn temporal(eventually: bool, lo: usize, hi: usize, body: Formula) -> Formula {
    if eventually {
        Formula::eventually(lo, hi, body)
    } else {
        Formula::always(lo, hi, body)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(_, s) => format!("`{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Amp => "`&`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Arrow => "`->`".into(),
        Tok::Gt => "`>`".into(),
        Tok::Lt => "`<`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn parse_inner(text: &str, labels: Option<&StaticLabels>) -> Result<Formula> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            line: 1,
            column: 1,
            message: "empty formula".into(),
        });
    }
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
        labels,
    };
    let f = p.implies()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after formula", describe(p.peek())));
    }
    Ok(f)
}

/// Parses a formula; any label name is accepted.
pub fn parse(text: &str) -> Result<Formula> {
    parse_inner(text, None)
}

/// Parses a formula, rejecting labels not present in `labels`.
pub fn parse_with_labels(text: &str, labels: &StaticLabels) -> Result<Formula> {
    parse_inner(text, Some(labels))
}

/// A named formula from a property script.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFormula {
    pub name: String,
    pub formula: Formula,
}

/// Parses a property script: one `name := formula` per line, `#` comments.
pub fn parse_script(text: &str, labels: Option<&StaticLabels>) -> Result<Vec<NamedFormula>> {
    let mut out: Vec<NamedFormula> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let Some((name, body)) = line.split_once(":=") else {
            return Err(Error::Syntax {
                line: line_no,
                column: 1,
                message: "expected `name := formula`".into(),
            });
        };
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.' || c == '-') {
            return Err(Error::Syntax {
                line: line_no,
                column: 1,
                message: format!("invalid property name `{name}`"),
            });
        }
        if out.iter().any(|nf| nf.name == name) {
            return Err(Error::Syntax {
                line: line_no,
                column: 1,
                message: format!("duplicate property name `{name}`"),
            });
        }
        let offset = line.find(":=").unwrap_or(0) + 2;
        let formula = parse_inner(body, labels).map_err(|e| match e {
            Error::Syntax { column, message, .. } => Error::Syntax {
                line: line_no,
                column: column + offset,
                message,
            },
            other => other,
        })?;
        out.push(NamedFormula {
            name: name.to_string(),
            formula,
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn atom() {
        assert_eq!(parse("y > 500").unwrap(), Formula::gt(500.0));
        assert_eq!(parse("y<-2.5e1").unwrap(), Formula::lt(-25.0));
    }

    #[test]
    fn implication_with_eventually() {
        let f = parse("(y > 500) -> F[1,3] !(y > 500)").unwrap();
        assert_eq!(
            f,
            Formula::implies(Formula::gt(500.0), Formula::eventually(1, 3, Formula::not(Formula::gt(500.0))))
        );
    }

    #[test]
    fn somewhere_not() {
        assert_eq!(
            parse("somewhere[1] !(y>500)").unwrap(),
            Formula::somewhere(1, Formula::not(Formula::gt(500.0)))
        );
    }

    #[test]
    fn precedence() {
        let (a, b, c) = (Formula::gt(1.0), Formula::gt(2.0), Formula::gt(3.0));
        assert_eq!(
            parse("y>1 & y>2 | y>3").unwrap(),
            Formula::or(Formula::and(a.clone(), b.clone()), c.clone())
        );
        assert_eq!(
            parse("y>1 | y>2 -> y>3").unwrap(),
            Formula::implies(Formula::or(a.clone(), b.clone()), c.clone())
        );
        assert_eq!(
            parse("F[0,2] y>1 reach[1] y>2 & y>3").unwrap(),
            Formula::and(Formula::eventually(0, 2, Formula::reach(a.clone(), 1, b.clone())), c.clone())
        );
        assert_eq!(
            parse("!y>1 reach[2] y>2").unwrap(),
            Formula::reach(Formula::not(a.clone()), 2, b.clone())
        );
        assert_eq!(
            parse("y>1 -> y>2 -> y>3").unwrap(),
            Formula::implies(a.clone(), Formula::implies(b, c))
        );
        assert_eq!(parse("((y>1))").unwrap(), a);
    }

    #[test]
    fn errors_carry_position() {
        match parse("y > 1 &\n  & y > 2") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("F[3,1] y > 1"), Err(Error::Syntax { message, .. }) if message.contains("malformed interval")));
        assert!(matches!(parse("F[1.5,2] y > 1"), Err(Error::Syntax { message, .. }) if message.contains("malformed interval")));
        assert!(parse("").is_err());
        assert!(parse("y > 1 )").is_err());
        assert!(parse("y = 1").is_err());
    }

    #[test]
    fn unknown_label() {
        let mut labels = StaticLabels::new();
        labels.insert("hospital", [0]);
        assert!(parse_with_labels("label(hospital)", &labels).is_ok());
        assert!(matches!(parse_with_labels("label(school)", &labels), Err(Error::UnknownLabel(l)) if l == "school"));
    }

    #[test]
    fn script() {
        let text = "# properties\np1 := (y > 500) -> F[1,3] !(y > 500)\n\np3 := G[1,3] somewhere[1] !(y > 500) # trailing\n";
        let props = parse_script(text, None).unwrap();
        assert_eq!(props.len(), 2);
        assert_eq!(props[1].name, "p3");
        assert!(parse_script("p := y > 1\np := y > 2", None).is_err());
        match parse_script("ok := y > 1\nbad := y >", None) {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    pub(crate) fn arb_formula(depth: u32) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            (-1000i32..1000).prop_map(|c| Formula::gt(c as f64 / 4.0)),
            (-1000i32..1000).prop_map(|c| Formula::lt(c as f64 / 4.0)),
            prop_oneof![Just("hospital"), Just("school")].prop_map(Formula::label),
        ];
        leaf.prop_recursive(depth, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                (0usize..3, 0usize..3, inner.clone()).prop_map(|(lo, w, f)| Formula::eventually(lo, lo + w, f)),
                (0usize..3, 0usize..3, inner.clone()).prop_map(|(lo, w, f)| Formula::always(lo, lo + w, f)),
                (inner.clone(), 0usize..4, inner.clone()).prop_map(|(a, d, b)| Formula::reach(a, d, b)),
                (0usize..3, 0usize..3, inner.clone()).prop_map(|(lo, w, f)| Formula::escape(lo, lo + w, f)),
                (0usize..4, inner).prop_map(|(d, f)| Formula::somewhere(d, f)),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(f in arb_formula(6)) {
            let text = f.to_string();
            prop_assert_eq!(parse(&text).unwrap(), f);
        }

        #[test]
        fn expand_is_idempotent_and_core(f in arb_formula(6)) {
            let once = f.expand_derived();
            prop_assert!(once.is_core());
            prop_assert_eq!(once.expand_derived(), once.clone());
            prop_assert_eq!(once.temporal_depth(), f.temporal_depth());
        }
    }
}

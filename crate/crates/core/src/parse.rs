//! Infix expression language for potentials and form components.
//!
//! Grammar (whitespace insignificant, `#` starts a comment to end of line):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?
//! exponent:= ['-'] INTEGER | '(' ['-'] INTEGER ')'
//! atom    := NUMBER | 'pi' | IDENT | FUNC '(' expr ')' | '(' expr ')'
//! FUNC    := sqrt | exp | log | ln | sin | cos
//! ```
//!
//! Identifiers must be coordinate names of the chart. Only integer powers are
//! supported; `-x^2` parses as `-(x^2)`.

use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Spanned {
                    tok: Tok::End,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() || c == '.' {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() || c == '.' {
                        s.push(c);
                        self.bump();
                    } else if (c == 'e' || c == 'E') && !s.is_empty() {
                        // exponent part, optionally signed
                        let save = (self.pos, self.line, self.col);
                        let mut t = String::from(c);
                        self.bump();
                        if let Some(sign @ ('+' | '-')) = self.peek() {
                            t.push(sign);
                            self.bump();
                        }
                        if self.peek().is_some_and(|d| d.is_ascii_digit()) {
                            s.push_str(&t);
                        } else {
                            (self.pos, self.line, self.col) = save;
                            break;
                        }
                    } else {
                        break;
                    }
                }
                let v: f64 = s.parse().map_err(|_| ParseError {
                    line,
                    column,
                    message: format!("invalid number `{s}`"),
                })?;
                Tok::Num(v)
            } else if c.is_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            } else if "+-*/^()".contains(c) {
                self.bump();
                Tok::Op(c)
            } else {
                return Err(ParseError {
                    line,
                    column,
                    message: format!("unexpected character `{c}`"),
                });
            };
            out.push(Spanned { tok, line, column });
        }
    }
}

struct Parser<'n> {
    toks: Vec<Spanned>,
    pos: usize,
    names: &'n [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: &Spanned, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: at.line,
            column: at.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == Tok::Op(c) {
            Ok(())
        } else {
            self.error(&t, format!("expected `{c}`, found {}", describe(&t.tok)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.next();
                    lhs = &lhs + &self.term()?;
                }
                Tok::Op('-') => {
                    self.next();
                    lhs = &lhs - &self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.next();
                    lhs = &lhs * &self.unary()?;
                }
                Tok::Op('/') => {
                    self.next();
                    lhs = &lhs / &self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Op('-') {
            self.next();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Op('^') {
            return Ok(base);
        }
        self.next();
        let paren = self.peek().tok == Tok::Op('(');
        if paren {
            self.next();
        }
        let negative = self.peek().tok == Tok::Op('-');
        if negative {
            self.next();
        }
        let t = self.next();
        let n = match t.tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            Tok::Num(_) => return self.error(&t, "only integer powers are supported"),
            ref other => {
                return self.error(&t, format!("expected integer exponent, found {}", describe(other)))
            }
        };
        if paren {
            self.expect(')')?;
        }
        Ok(base.powi(if negative { -n } else { n }))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::constant(*v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func: Option<fn(&Expr) -> Expr> = match name.as_str() {
                    "sqrt" => Some(Expr::sqrt),
                    "exp" => Some(Expr::exp),
                    "log" | "ln" => Some(Expr::ln),
                    "sin" => Some(Expr::sin),
                    "cos" => Some(Expr::cos),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(f(&arg));
                }
                if let Some(i) = self.names.iter().position(|n| n == name) {
                    return Ok(Expr::var(i));
                }
                if name == "pi" {
                    return Ok(Expr::constant(std::f64::consts::PI));
                }
                self.error(&t, format!("unknown identifier `{name}`"))
            }
            other => self.error(&t, format!("expected expression, found {}", describe(other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".to_string(),
    }
}

/// Parses `src` into an expression over the coordinates named `names`.
pub fn parse_expr(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        names,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.error(&t, format!("unexpected {}", describe(&t.tok)));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        ["u", "v", "x", "y"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_hopf_potential() {
        let e = parse_expr("0.5*log(1 + u^2 + v^2)", &names()).unwrap();
        let v = e.eval(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.5 * 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("-u^2 + 2*v/4 - (x - y)", &names()).unwrap();
        let v = e.eval(&[3.0, 2.0, 1.0, 5.0]).unwrap();
        assert_eq!(v, -9.0 + 1.0 + 4.0);
        let e = parse_expr("u^-2 + v^(-1)", &names()).unwrap();
        assert_eq!(e.eval(&[2.0, 4.0, 0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn scientific_literals_and_pi() {
        let e = parse_expr("1.5e-3 * pi", &names()).unwrap();
        assert!((e.eval(&[0.0; 4]).unwrap() - 1.5e-3 * std::f64::consts::PI).abs() < 1e-18);
    }

    #[test]
    fn malformed_input_reports_position() {
        let err = parse_expr("log(", &names()).unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
        let err = parse_expr("u +\n  w", &names()).unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        assert!(err.message.contains("unknown identifier"));
        let err = parse_expr("u^0.5", &names()).unwrap_err();
        assert!(err.message.contains("integer"));
        assert!(parse_expr("u v", &names()).is_err());
        assert!(parse_expr("u $ v", &names()).is_err());
    }
}

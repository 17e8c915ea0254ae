//! Recursive-descent parser for the potential expression language.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" [ "-" ] integer ] ;
//! atom    = number | param | coord | call | sitesum | "(" expr ")" ;
//! coord   = "q" "[" ( integer | "i" [ ("+" | "-") integer ] ) "]" ;
//! call    = ( "sin" | "cos" | "exp" | "log" | "sqrt" ) "(" expr ")" ;
//! sitesum = "sum_i" [ "[" ( "periodic" | "open" ) "]" ] "(" expr ")" ;
//! param   = identifier ;
//! ```
//!
//! `q[i±k]` may only appear inside a `sum_i`, and site sums do not nest.
//! A bare `sum_i(...)` is periodic.

use super::ast::{BinOp, Boundary, Expr, ExpressionAst, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
    text: String,
}

fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut column) = (1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(x) => Tok::Num(x),
                Err(_) => {
                    return Err(Error::Syntax {
                        line,
                        column,
                        message: format!("malformed number `{text}`"),
                    })
                }
            }
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                other => {
                    return Err(Error::Syntax {
                        line,
                        column,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        let text: String = chars[start..i].iter().collect();
        out.push(Token { tok, line, column, text });
        column += i - start;
    }
    out.push(Token { tok: Tok::End, line, column, text: String::new() });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    params: &'a [&'a str],
    in_site_sum: bool,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, message: impl Into<String>) -> Error {
        Error::Syntax { line: t.line, column: t.column, message: message.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            let found = if t.tok == Tok::End { "end of input".to_string() } else { format!("`{}`", t.text) };
            Err(self.error_at(&t, format!("expected {what}, found {found}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn integer(&mut self) -> Result<i64> {
        let t = self.next();
        match t.tok {
            Tok::Num(x) if x.fract() == 0.0 && x.abs() < 1e15 && !t.text.contains(['.', 'e', 'E']) => Ok(x as i64),
            _ => Err(self.error_at(&t, format!("expected an integer, found `{}`", t.text))),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let negative = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let at = self.peek().clone();
        let n = self.integer()?;
        let n = if negative { -n } else { n };
        let n = i32::try_from(n).map_err(|_| self.error_at(&at, "exponent out of range"))?;
        Ok(Expr::Pow(Box::new(base), n))
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(x) => Ok(Expr::Num(*x)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "q" => self.coord(&t),
            Tok::Ident(name) if name == "sum_i" => self.site_sum(&t),
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if self.params.contains(&name.as_str()) {
                    Ok(Expr::Param(name.clone()))
                } else {
                    Err(Error::UnknownIdentifier { name: name.clone(), line: t.line, column: t.column })
                }
            }
            Tok::End => Err(self.error_at(&t, "unexpected end of input")),
            _ => Err(self.error_at(&t, format!("unexpected `{}`", t.text))),
        }
    }

    fn coord(&mut self, q: &Token) -> Result<Expr> {
        self.expect(Tok::LBracket, "`[` after `q`")?;
        let t = self.peek().clone();
        let expr = match &t.tok {
            Tok::Ident(i) if i == "i" => {
                self.next();
                if !self.in_site_sum {
                    return Err(self.error_at(&t, "site index `i` used outside sum_i(...)"));
                }
                let offset = match self.peek().tok {
                    Tok::Plus => {
                        self.next();
                        self.integer()?
                    }
                    Tok::Minus => {
                        self.next();
                        -self.integer()?
                    }
                    _ => 0,
                };
                Expr::SiteCoord(offset)
            }
            _ => {
                let k = self.integer()?;
                if k < 0 || k as usize >= self.dim {
                    return Err(Error::Index {
                        index: k.max(0) as usize,
                        dim: self.dim,
                        line: q.line,
                        column: q.column,
                    });
                }
                Expr::Coord(k as usize)
            }
        };
        self.expect(Tok::RBracket, "`]`")?;
        Ok(expr)
    }

    fn site_sum(&mut self, at: &Token) -> Result<Expr> {
        if self.in_site_sum {
            return Err(self.error_at(at, "nested sum_i is not supported"));
        }
        let mut boundary = Boundary::Periodic;
        if self.peek().tok == Tok::LBracket {
            self.next();
            let t = self.next();
            boundary = match &t.tok {
                Tok::Ident(b) if b == "periodic" => Boundary::Periodic,
                Tok::Ident(b) if b == "open" => Boundary::Open,
                _ => return Err(self.error_at(&t, "boundary must be `periodic` or `open`")),
            };
            self.expect(Tok::RBracket, "`]`")?;
        }
        self.expect(Tok::LParen, "`(` after sum_i")?;
        self.in_site_sum = true;
        let body = self.expr();
        self.in_site_sum = false;
        let body = body?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::SiteSum { boundary, body: Box::new(body) })
    }
}

/// Parses `source` as a potential over `dim` coordinates with no named parameters.
pub fn parse_potential_dsl(source: &str, dim: usize) -> Result<ExpressionAst> {
    parse_with_params(source, dim, &[])
}

/// Parses `source`, accepting the identifiers in `params` as named parameters.
pub fn parse_with_params(source: &str, dim: usize, params: &[&str]) -> Result<ExpressionAst> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension N must be positive".into()));
    }
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0, dim, params, in_site_sum: false };
    let root = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return Err(p.error_at(&t, format!("unexpected `{}` after expression", t.text)));
    }
    Ok(ExpressionAst { dim, root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn eval(src: &str, dim: usize, q: &[f64]) -> f64 {
        parse_potential_dsl(src, dim).unwrap().eval(q, &BTreeMap::new())
    }

    #[test]
    fn site_sum_over_three_sites() {
        let ast = parse_potential_dsl("sum_i(0.25*q[i]^4 - 0.5*q[i]^2)", 3).unwrap();
        assert_eq!(ast.site_sum_count(), 1);
        assert!(matches!(ast.root, Expr::SiteSum { boundary: Boundary::Periodic, .. }));
        assert!((ast.eval(&[1.0, -1.0, 1.0], &BTreeMap::new()) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn identity_case() {
        assert_eq!(eval("q[0]^2 + q[1]^2", 2, &[1.0, 1.0]), 2.0);
    }

    #[test]
    fn index_error_position() {
        match parse_potential_dsl("q[5]", 3) {
            Err(Error::Index { index: 5, dim: 3, line: 1, column: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_potential_dsl("q[0] +\n  2*q[3]", 3) {
            Err(Error::Index { line: 2, column: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier() {
        match parse_potential_dsl("J*q[0]", 1) {
            Err(Error::UnknownIdentifier { name, line: 1, column: 1 }) => assert_eq!(name, "J"),
            other => panic!("unexpected {other:?}"),
        }
        let ast = parse_with_params("J*q[0]", 1, &["J"]).unwrap();
        let params = BTreeMap::from([("J".to_string(), 3.0)]);
        assert_eq!(ast.eval(&[2.0], &params), 6.0);
    }

    #[test]
    fn syntax_errors() {
        for bad in ["q[0] +", "(q[0]", "q[0]^1.5", "sum_i(sum_i(q[i]))", "q[i]", "2 $ 3", "sin q[0]"] {
            let err = parse_potential_dsl(bad, 2).unwrap_err();
            assert_eq!(err.kind(), "SyntaxError", "{bad}: {err}");
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(eval("-q[0]^2", 1, &[3.0]), -9.0);
        assert_eq!(eval("1 - 2 - 3", 1, &[0.0]), -4.0);
        assert_eq!(eval("8 / 2 / 2", 1, &[0.0]), 2.0);
        assert_eq!(eval("2*q[0]^-1", 1, &[4.0]), 0.5);
    }

    #[test]
    fn periodic_and_open_neighbors() {
        let q = [1.0, 2.0, 4.0];
        // periodic: (2-1)^2 + (4-2)^2 + (1-4)^2
        assert_eq!(eval("sum_i((q[i+1]-q[i])^2)", 3, &q), 14.0);
        assert_eq!(eval("sum_i[open]((q[i+1]-q[i])^2)", 3, &q), 5.0);
        assert_eq!(eval("sum_i[open](q[i-1]*q[i+1])", 3, &q), 4.0);
    }

    #[test]
    fn functions() {
        let v = eval("sin(q[0]) + cos(q[0]) + exp(q[0]) + log(q[1]) + sqrt(q[1])", 2, &[0.0, 4.0]);
        assert!((v - (0.0 + 1.0 + 1.0 + 4f64.ln() + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn display_round_trip() {
        let src = "sum_i[open](0.25*q[i]^4 - J*(q[i+1]-q[i-2])^2) + exp(-q[0]/3) + 1e-20";
        let ast = parse_with_params(src, 4, &["J"]).unwrap();
        let again = parse_with_params(&ast.to_string(), 4, &["J"]).unwrap();
        assert_eq!(ast, again);
    }
}

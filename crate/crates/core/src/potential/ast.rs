use std::collections::BTreeMap;
use std::fmt;

use super::dual::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// How `q[i+k]` is resolved when `i+k` leaves `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Indices wrap modulo N.
    Periodic,
    /// Sites whose neighbor references fall outside the chain are skipped.
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(String),
    /// `q[k]` with a fixed index.
    Coord(usize),
    /// `q[i+k]` inside a site sum.
    SiteCoord(i64),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    SiteSum { boundary: Boundary, body: Box<Expr> },
}

/// Parsed potential expression over `N` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionAst {
    pub dim: usize,
    pub root: Expr,
}

impl Expr {
    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.walk(visit),
            Expr::Bin(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::SiteSum { body, .. } => body.walk(visit),
            Expr::Num(_) | Expr::Param(_) | Expr::Coord(_) | Expr::SiteCoord(_) => {}
        }
    }

    fn offset_range(&self) -> (i64, i64) {
        let mut lo = 0;
        let mut hi = 0;
        self.walk(&mut |e| {
            if let Expr::SiteCoord(k) = e {
                lo = lo.min(*k);
                hi = hi.max(*k);
            }
        });
        (lo, hi)
    }

    pub(crate) fn eval<T: Scalar>(&self, q: &[T], params: &BTreeMap<String, f64>, site: Option<usize>) -> T {
        match self {
            Expr::Num(x) => T::cst(*x),
            Expr::Param(name) => T::cst(params.get(name).copied().unwrap_or(f64::NAN)),
            Expr::Coord(k) => q[*k],
            Expr::SiteCoord(off) => {
                let n = q.len() as i64;
                let i = site.expect("site coordinate outside a site sum") as i64;
                q[(i + off).rem_euclid(n) as usize]
            }
            Expr::Neg(e) => -e.eval(q, params, site),
            Expr::Bin(op, a, b) => {
                let a = a.eval(q, params, site);
                let b = b.eval(q, params, site);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(e, n) => e.eval(q, params, site).powi(*n),
            Expr::Call(f, e) => {
                let x = e.eval(q, params, site);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                }
            }
            Expr::SiteSum { boundary, body } => {
                let n = q.len() as i64;
                let (first, end) = match boundary {
                    Boundary::Periodic => (0, n),
                    Boundary::Open => {
                        let (lo, hi) = body.offset_range();
                        (-lo, n - hi)
                    }
                };
                let mut acc = T::cst(0.0);
                for i in first.max(0)..end {
                    acc = acc + body.eval(q, params, Some(i as usize));
                }
                acc
            }
        }
    }
}

impl ExpressionAst {
    pub fn eval<T: Scalar>(&self, q: &[T], params: &BTreeMap<String, f64>) -> T {
        self.root.eval(q, params, None)
    }

    /// Names of all parameters referenced by the expression.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.root.walk(&mut |e| {
            if let Expr::Param(p) = e {
                if !names.contains(p) {
                    names.push(p.clone());
                }
            }
        });
        names
    }

    pub fn site_sum_count(&self) -> usize {
        let mut count = 0;
        self.root.walk(&mut |e| {
            if matches!(e, Expr::SiteSum { .. }) {
                count += 1;
            }
        });
        count
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; parsing it back yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Coord(k) => write!(f, "q[{k}]"),
            Expr::SiteCoord(0) => write!(f, "q[i]"),
            Expr::SiteCoord(k) if *k > 0 => write!(f, "q[i+{k}]"),
            Expr::SiteCoord(k) => write!(f, "q[i-{}]", -k),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Expr::Pow(e, n) => write!(f, "({e}^{n})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::SiteSum { boundary: Boundary::Periodic, body } => write!(f, "sum_i({body})"),
            Expr::SiteSum { boundary: Boundary::Open, body } => write!(f, "sum_i[open]({body})"),
        }
    }
}

impl fmt::Display for ExpressionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

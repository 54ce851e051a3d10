use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::{SissoError, TwoPointFeature};

/// A `+`/`−` combination of two-point features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Leaf(TwoPointFeature),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn leaf(i: usize, j: usize) -> Self {
        Expr::Leaf(TwoPointFeature::new(i, j))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Expr::Leaf(f) => f.value(y),
            Expr::Add(a, b) => a.eval(y) + b.eval(y),
            Expr::Sub(a, b) => a.eval(y) - b.eval(y),
        }
    }

    /// Distinct primitive features appearing anywhere in the tree.
    pub fn leaves(&self) -> BTreeSet<TwoPointFeature> {
        let mut out = BTreeSet::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut BTreeSet<TwoPointFeature>) {
        match self {
            Expr::Leaf(f) => {
                out.insert(*f);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    /// Signed multiset of leaves; algebraically identical expressions share it.
    pub fn canonical(&self) -> Vec<(TwoPointFeature, i64)> {
        let mut terms = BTreeMap::new();
        self.accumulate(1, &mut terms);
        terms.into_iter().filter(|(_, c)| *c != 0).collect()
    }

    fn accumulate(&self, sign: i64, terms: &mut BTreeMap<TwoPointFeature, i64>) {
        match self {
            Expr::Leaf(f) => *terms.entry(*f).or_insert(0) += sign,
            Expr::Add(a, b) => {
                a.accumulate(sign, terms);
                b.accumulate(sign, terms);
            }
            Expr::Sub(a, b) => {
                a.accumulate(sign, terms);
                b.accumulate(-sign, terms);
            }
        }
    }

    fn max_index(&self) -> usize {
        self.leaves().iter().map(|f| f.j).max().unwrap_or(0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rhs = |f: &mut fmt::Formatter<'_>, e: &Expr| match e {
            Expr::Leaf(_) => write!(f, "{e}"),
            _ => write!(f, "({e})"),
        };
        match self {
            Expr::Leaf(t) => write!(f, "|y[{}]-y[{}]|", t.i, t.j),
            Expr::Add(a, b) => {
                write!(f, "{a} + ")?;
                rhs(f, b)
            }
            Expr::Sub(a, b) => {
                write!(f, "{a} - ")?;
                rhs(f, b)
            }
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> SissoError {
        SissoError::Parse(format!("{what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), SissoError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn index(&mut self) -> Result<usize, SissoError> {
        self.expect(b'y')?;
        self.expect(b'[')?;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
        let v = digits.parse().map_err(|_| self.err("expected index"))?;
        self.expect(b']')?;
        Ok(v)
    }

    fn term(&mut self) -> Result<Expr, SissoError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'|') => {
                self.pos += 1;
                let i = self.index()?;
                self.expect(b'-')?;
                let j = self.index()?;
                self.expect(b'|')?;
                if i >= j {
                    return Err(self.err("feature indices must satisfy i < j"));
                }
                Ok(Expr::leaf(i, j))
            }
            _ => Err(self.err("expected '|' or '('")),
        }
    }

    fn expr(&mut self) -> Result<Expr, SissoError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }
}

impl FromStr for Expr {
    type Err = SissoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { s: s.as_bytes(), pos: 0 };
        let e = p.expr()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }
}

/// Checks every leaf index fits a grid of `n` points.
pub(crate) fn fits_grid(e: &Expr, n: usize) -> bool {
    e.max_index() < n
}

//! Small arithmetic expression language evaluated over jets.
//!
//! Variables are `x0, x1, …` (with `x, y, z` as aliases for the first three). Supported
//! functions: `sin cos exp ln log sqrt sinh cosh tanh`; constants `pi` and `e`.

use std::fmt;
use std::sync::Arc;

use hamflow_core::jets::{Jet, ScalarField};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, a: &Jet) -> Jet {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Ln => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Tanh => a.tanh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: &[Jet]) -> Jet {
        match self {
            Node::Num(v) => Jet::constant(*v),
            Node::Var(i) => x[*i].clone(),
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => {
                let base = a.eval(x);
                match **b {
                    Node::Num(p) if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 => base.powi(p as i32),
                    Node::Num(p) => base.powf(p),
                    _ => (b.eval(x) * base.ln()).exp(),
                }
            }
            Node::Call(f, a) => f.apply(&a.eval(x)),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part
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
            let v = text.parse().map_err(|_| Error::expr(src, start, "malformed number"))?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Token::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(Error::expr(src, i, "unexpected character"));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.src.len(), |(o, _)| *o)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let mut exp = self.unary()?;
            // constant exponents (`x^-2`, `2^3^2`) take the powi/powf path
            if exp.max_var().is_none() {
                exp = Node::Num(exp.eval(&[]).value());
            }
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let at = self.offset();
        match self.tokens.get(self.pos).map(|(_, t)| t.clone()) {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::expr(self.src, self.offset(), "expected ')'"));
                }
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::lookup(&name) {
                    if !self.eat('(') {
                        return Err(Error::expr(self.src, self.offset(), "expected '(' after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(Error::expr(self.src, self.offset(), "expected ')'"));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    "x" => Ok(Node::Var(0)),
                    "y" => Ok(Node::Var(1)),
                    "z" => Ok(Node::Var(2)),
                    _ => match name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        Some(i) => Ok(Node::Var(i)),
                        None => Err(Error::expr(self.src, at, "unknown identifier")),
                    },
                }
            }
            Some(Token::Op(_)) => Err(Error::expr(self.src, at, "unexpected operator")),
            None => Err(Error::expr(self.src, at, "unexpected end of expression")),
        }
    }
}

/// Parsed expression in `dim` variables.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    dim: usize,
    root: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?}, dim={})", self.source, self.dim)
    }
}

impl Expr {
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser { src: source, tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::expr(source, p.offset(), "trailing input"));
        }
        if let Some(i) = root.max_var() {
            if i >= dim {
                return Err(Error::expr(source, 0, &format!("variable x{i} exceeds dimension {dim}")));
            }
        }
        Ok(Expr { source: source.to_string(), dim, root: Arc::new(root) })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Jet {
        self.root.eval(x)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let seeds: Vec<Jet> = x.iter().map(|v| Jet::constant(*v)).collect();
        self.root.eval(&seeds).value()
    }

    pub fn to_field(&self) -> ScalarField {
        let root = Arc::clone(&self.root);
        ScalarField::new(self.dim, move |x| root.eval(x))
    }
}

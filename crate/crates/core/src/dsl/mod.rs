//! Closed-form immersion definitions.
//!
//! An [`ImmersionDef`] is a named map `R^n -> R^m` whose components are
//! small expression trees over the declared variables. The textual form is
//!
//! ```text
//! # comment
//! immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }
//! ```
//!
//! Printing is canonical (fully parenthesized, shortest round-trip
//! constants) and reparses to an identical tree.

mod build;
mod lexer;
mod parser;
mod print;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use build::{build_scaled_embedding, Block, BlockWeight};
pub use parser::{parse_file, parse_immersion};
pub use print::{format_number, print_expr, print_file, print_immersion};

/// Errors raised while parsing or assembling immersion definitions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("undeclared variable {name} (line {line}, column {column})")]
    UndeclaredVariable { name: String, line: usize, column: usize },
    #[error("dimension mismatch: declared {declared} components, found {found}")]
    DimensionMismatch { declared: usize, found: usize },
    #[error("invalid definition: {0}")]
    Invalid(String),
    #[error("variable renaming budget exhausted for '{0}'")]
    RenameBudgetExhausted(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Sinh,
    Cosh,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
        }
    }
}

/// Expression tree. Constants are kept non-negative; negation is a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Var(String),
    Const(f64),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    /// Numeric literal; negative values become `Neg(Const(|c|))` so the
    /// printed form reparses to the same tree.
    pub fn num(c: f64) -> Expr {
        if c < 0.0 {
            Expr::Neg(Box::new(Expr::Const(-c)))
        } else {
            // folds -0.0 into 0.0
            Expr::Const(c + 0.0)
        }
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Div, a, b)
    }

    /// `base ^ exponent` with a non-negative constant exponent.
    pub fn pow(base: Expr, exponent: f64) -> Expr {
        assert!(exponent >= 0.0, "exponent must be a non-negative constant");
        Expr::binary(BinOp::Pow, base, Expr::Const(exponent + 0.0))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::call(Func::Exp, a)
    }

    /// Evaluate with variable values looked up by name.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        Some(match self {
            Expr::Var(name) => lookup(name)?,
            Expr::Const(c) => *c,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Binary(op, a, b) => {
                let x = a.eval_with(lookup)?;
                let y = b.eval_with(lookup)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => {
                        if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
                            x.powi(y as i32)
                        } else {
                            x.powf(y)
                        }
                    }
                }
            }
            Expr::Call(f, a) => f.apply(a.eval_with(lookup)?),
        })
    }

    /// Collect every variable name referenced by the tree.
    pub fn variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Const(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.variables(out),
            Expr::Binary(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }

    /// Replace variables according to `map`; unmapped variables are kept.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Var(name) => map.get(name).cloned().unwrap_or_else(|| self.clone()),
            Expr::Const(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.substitute(map)),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(map)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(map), b.substitute(map)),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKind {
    Point,
    Pair,
}

/// Construction metadata attached to Calabi products.
///
/// Variables of a product are laid out as `[axis] ++ factor1 vars (n2) ++
/// factor2 vars (n3)`, components as `n2 + 1` first-block entries followed by
/// `n3 + 1` second-block entries (a single constant entry for the point case).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProductKind,
    pub n2: usize,
    pub n3: usize,
    pub axis: String,
    pub factors: Vec<String>,
}

impl Provenance {
    /// Component count of the first and second block.
    pub fn block_sizes(&self) -> (usize, usize) {
        match self.kind {
            ProductKind::Point => (self.n2 + 1, 1),
            ProductKind::Pair => (self.n2 + 1, self.n3 + 1),
        }
    }
}

/// A validated immersion `R^n -> R^m`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionDef {
    name: String,
    vars: Vec<String>,
    components: Vec<Expr>,
    provenance: Option<Provenance>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn validate_expr(e: &Expr) -> Result<(), DslError> {
    match e {
        Expr::Var(_) => Ok(()),
        Expr::Const(c) => {
            if c.is_finite() && *c >= 0.0 {
                Ok(())
            } else {
                Err(DslError::Invalid(format!("constant {c} is not a finite non-negative literal")))
            }
        }
        Expr::Neg(a) | Expr::Call(_, a) => validate_expr(a),
        Expr::Binary(op, a, b) => {
            if *op == BinOp::Pow && !matches!(**b, Expr::Const(_)) {
                return Err(DslError::Invalid("exponent of '^' must be a constant".into()));
            }
            validate_expr(a)?;
            validate_expr(b)
        }
    }
}

impl ImmersionDef {
    pub fn new(
        name: impl Into<String>,
        vars: Vec<String>,
        components: Vec<Expr>,
    ) -> Result<Self, DslError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(DslError::Invalid(format!("'{name}' is not an identifier")));
        }
        if vars.is_empty() {
            return Err(DslError::Invalid("at least one variable is required".into()));
        }
        if components.is_empty() {
            return Err(DslError::Invalid("at least one component is required".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !is_identifier(v) || Func::from_name(v).is_some() {
                return Err(DslError::Invalid(format!("'{v}' is not a valid variable name")));
            }
            if !seen.insert(v.clone()) {
                return Err(DslError::Invalid(format!("duplicate variable '{v}'")));
            }
        }
        for c in &components {
            validate_expr(c)?;
            let mut used = BTreeSet::new();
            c.variables(&mut used);
            if let Some(bad) = used.difference(&seen).next() {
                return Err(DslError::UndeclaredVariable { name: bad.clone(), line: 0, column: 0 });
            }
        }
        Ok(Self { name, vars, components, provenance: None })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Result<Self, DslError> {
        let (b1, b2) = provenance.block_sizes();
        let expected_vars = 1 + provenance.n2 + provenance.n3;
        if b1 + b2 != self.components.len() || expected_vars != self.vars.len() {
            return Err(DslError::Invalid(format!(
                "provenance ({:?}, n2={}, n3={}) does not match {} vars / {} components",
                provenance.kind,
                provenance.n2,
                provenance.n3,
                self.vars.len(),
                self.components.len()
            )));
        }
        if self.vars[0] != provenance.axis {
            return Err(DslError::Invalid(format!(
                "provenance axis '{}' is not the first variable",
                provenance.axis
            )));
        }
        self.provenance = Some(provenance);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Domain dimension `n`.
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// Number of components `m`.
    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Evaluate all components at `point`.
    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        assert_eq!(point.len(), self.vars.len(), "point dimension mismatch");
        let lookup = |name: &str| self.var_index(name).map(|i| point[i]);
        self.components
            .iter()
            .map(|c| c.eval_with(&lookup).expect("validated definitions reference declared variables"))
            .collect()
    }

    /// Same definition with a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Result<Self, DslError> {
        let mut out = ImmersionDef::new(name, self.vars.clone(), self.components.clone())?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// `c * phi`. Block structure (and provenance) is preserved.
    pub fn scaled(&self, c: f64) -> Self {
        let components = self
            .components
            .iter()
            .map(|e| Expr::mul(Expr::num(c), e.clone()))
            .collect();
        Self {
            name: self.name.clone(),
            vars: self.vars.clone(),
            components,
            provenance: self.provenance.clone(),
        }
    }

    /// Multiply each block of a product by its own constant. Used to move
    /// along the gauge family of equivalent products.
    pub fn block_scaled(&self, first: f64, second: f64) -> Result<Self, DslError> {
        let prov = self
            .provenance
            .as_ref()
            .ok_or_else(|| DslError::Invalid("block scaling needs product provenance".into()))?;
        let (b1, _) = prov.block_sizes();
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(k, e)| Expr::mul(Expr::num(if k < b1 { first } else { second }), e.clone()))
            .collect();
        Ok(Self {
            name: self.name.clone(),
            vars: self.vars.clone(),
            components,
            provenance: self.provenance.clone(),
        })
    }

    /// Ambient linear image `A * phi` (row-major `m x m` matrix). Product
    /// provenance is dropped since blocks are no longer coordinate-aligned.
    pub fn linear_image(&self, matrix: &[Vec<f64>]) -> Result<Self, DslError> {
        let m = self.components.len();
        if matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
            return Err(DslError::Invalid(format!("linear map must be {m}x{m}")));
        }
        let components = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.components)
                    .filter(|(a, _)| **a != 0.0)
                    .map(|(a, e)| Expr::mul(Expr::num(*a), e.clone()))
                    .reduce(Expr::add)
                    .unwrap_or(Expr::Const(0.0))
            })
            .collect();
        ImmersionDef::new(self.name.clone(), self.vars.clone(), components)
    }

    /// Multiply every component by the scalar expression `factor`.
    pub fn multiplied_by(&self, factor: &Expr) -> Result<Self, DslError> {
        let components = self
            .components
            .iter()
            .map(|e| Expr::mul(e.clone(), factor.clone()))
            .collect();
        ImmersionDef::new(self.name.clone(), self.vars.clone(), components)
    }
}

impl fmt::Display for ImmersionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_immersion(self))
    }
}

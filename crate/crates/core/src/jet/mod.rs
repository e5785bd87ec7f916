//! Truncated multivariate Taylor expansions.
//!
//! A [`Jet`] of order `k` in `n` variables stores the Taylor coefficients
//! `c_α = ∂^α f / α!` for every multi-index with `|α| ≤ k`, in graded
//! lexicographic order. Because the enumeration is graded, the coefficients
//! of a lower-order truncation are a prefix of the full vector.

mod eval;
pub(crate) mod linalg;

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

pub use eval::{eval_jets, eval_jets_expr};

pub const MAX_VARS: usize = 8;
pub const MAX_ORDER: usize = 4;

pub type MultiIndex = [u8; MAX_VARS];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("division by a jet with zero constant term")]
    DivisionByZero,
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("jets support 1..={MAX_VARS} variables, got {0}")]
    TooManyVariables(usize),
    #[error("jets support orders up to {MAX_ORDER}, got {0}")]
    OrderTooHigh(usize),
    #[error("point has {got} coordinates, definition has {expected} variables")]
    PointDimension { expected: usize, got: usize },
    #[error("variable {0} is not declared")]
    UnknownVariable(String),
}

/// Monomial tables shared by every jet in `nvars` variables.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    monomials: Vec<MultiIndex>,
    /// `len_by_order[k]` = number of monomials with degree ≤ k.
    len_by_order: [usize; MAX_ORDER + 1],
    /// For each output index, every `(i, j)` with `mono[i] + mono[j] = mono[out]`.
    products: Vec<Vec<(u16, u16)>>,
    /// `raise[v][r]` = index of `mono[r] + e_v` (only for degree < MAX_ORDER).
    raise: Vec<Vec<u16>>,
}

fn enumerate_degree(nvars: usize, degree: usize, out: &mut Vec<MultiIndex>) {
    fn rec(var: usize, nvars: usize, left: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if var + 1 == nvars {
            cur[var] = left as u8;
            out.push(*cur);
            cur[var] = 0;
            return;
        }
        for e in (0..=left).rev() {
            cur[var] = e as u8;
            rec(var + 1, nvars, left - e, cur, out);
        }
        cur[var] = 0;
    }
    let mut cur = [0u8; MAX_VARS];
    rec(0, nvars, degree, &mut cur, out);
}

impl JetSpace {
    fn build(nvars: usize) -> JetSpace {
        let mut monomials = Vec::new();
        let mut len_by_order = [0usize; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            enumerate_degree(nvars, d, &mut monomials);
            len_by_order[d] = monomials.len();
        }
        let index = |m: &MultiIndex| -> Option<usize> { monomials.iter().position(|x| x == m) };
        let mut products = vec![Vec::new(); monomials.len()];
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                let deg: usize = (0..nvars).map(|v| (a[v] + b[v]) as usize).sum();
                if deg > MAX_ORDER {
                    continue;
                }
                let mut s = [0u8; MAX_VARS];
                for v in 0..nvars {
                    s[v] = a[v] + b[v];
                }
                let r = index(&s).expect("sum of monomials is enumerated");
                products[r].push((i as u16, j as u16));
            }
        }
        let raise = (0..nvars)
            .map(|v| {
                monomials[..len_by_order[MAX_ORDER - 1]]
                    .iter()
                    .map(|m| {
                        let mut up = *m;
                        up[v] += 1;
                        index(&up).expect("raised monomial is enumerated") as u16
                    })
                    .collect()
            })
            .collect();
        JetSpace { nvars, monomials, len_by_order, products, raise }
    }

    pub fn get(nvars: usize) -> Result<&'static JetSpace, JetError> {
        static SPACES: [OnceLock<JetSpace>; MAX_VARS + 1] = [const { OnceLock::new() }; MAX_VARS + 1];
        if nvars == 0 || nvars > MAX_VARS {
            return Err(JetError::TooManyVariables(nvars));
        }
        Ok(SPACES[nvars].get_or_init(|| JetSpace::build(nvars)))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self, order: usize) -> usize {
        self.len_by_order[order]
    }

    pub fn monomial(&self, index: usize) -> &MultiIndex {
        &self.monomials[index]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.monomials
            .iter()
            .position(|m| m[..self.nvars] == alpha[..self.nvars] && m[self.nvars..].iter().all(|&x| x == 0))
    }
}

/// Truncated Taylor expansion of a scalar quantity at a point.
#[derive(Debug, Clone)]
pub struct Jet {
    space: &'static JetSpace,
    order: usize,
    coeffs: Vec<f64>,
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.nvars == other.space.nvars && self.order == other.order && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(space: &'static JetSpace, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER);
        let mut coeffs = vec![0.0; space.len(order)];
        coeffs[0] = value;
        Jet { space, order, coeffs }
    }

    /// Jet of the coordinate function `x_var` at `value`.
    pub fn variable(space: &'static JetSpace, order: usize, var: usize, value: f64) -> Jet {
        let mut j = Jet::constant(space, order, value);
        if order >= 1 {
            j.coeffs[1 + var] = 1.0;
        }
        j
    }

    pub fn from_coeffs(space: &'static JetSpace, order: usize, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.len(order), "coefficient count does not match order");
        Jet { space, order, coeffs }
    }

    pub fn space(&self) -> &'static JetSpace {
        self.space
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient for `alpha` (zero beyond the stored order).
    pub fn coeff(&self, alpha: &[u8]) -> f64 {
        match self.space.index_of(alpha) {
            Some(i) if i < self.coeffs.len() => self.coeffs[i],
            _ => 0.0,
        }
    }

    /// Raw partial derivative `∂^α f` at the expansion point.
    pub fn derivative(&self, alpha: &[u8]) -> f64 {
        let fact: f64 = alpha.iter().map(|&a| (1..=a as u32).product::<u32>() as f64).product();
        self.coeff(alpha) * fact
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet { space: self.space, order, coeffs: self.coeffs[..self.space.len(order)].to_vec() }
    }

    /// `∂f/∂x_var` as a jet of one lower order.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let n = self.space.len(order);
        let raise = &self.space.raise[var];
        let coeffs = (0..n)
            .map(|r| {
                let up = raise[r] as usize;
                (self.space.monomials[r][var] as f64 + 1.0) * self.coeffs[up]
            })
            .collect();
        Jet { space: self.space, order, coeffs }
    }

    fn check_same_space(&self, other: &Jet) {
        assert!(std::ptr::eq(self.space, other.space), "jets live in different variable spaces");
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        self.check_same_space(other);
        let order = self.order.min(other.order);
        let n = self.space.len(order);
        let coeffs = (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect();
        Jet { space: self.space, order, coeffs }
    }

    /// Truncated Cauchy product.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_same_space(other);
        let order = self.order.min(other.order);
        let n = self.space.len(order);
        let mut coeffs = vec![0.0; n];
        for (r, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(i, j) in &self.space.products[r] {
                acc += self.coeffs[i as usize] * other.coeffs[j as usize];
            }
            *c = acc;
        }
        Jet { space: self.space, order, coeffs }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { space: self.space, order: self.order, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `Σ t_k (self - self_0)^k` for univariate Taylor coefficients `t`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        debug_assert_eq!(taylor.len(), self.order + 1);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.space, self.order, taylor[self.order]);
        for k in (0..self.order).rev() {
            acc = acc.mul_jet(&delta).add_scalar(taylor[k]);
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let t: Vec<f64> = (0..=self.order).map(|k| (-1f64).powi(k as i32) / a0.powi(k as i32 + 1)).collect();
        Ok(self.compose(&t))
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn apply(&self, f: Elementary) -> Result<Jet, JetError> {
        let a0 = self.value();
        let k = self.order;
        let t: Vec<f64> = match f {
            Elementary::Exp => {
                let e = a0.exp();
                (0..=k).map(|i| e / factorial(i)).collect()
            }
            Elementary::Log => {
                if a0 <= 0.0 {
                    return Err(JetError::Domain { func: "log", value: a0 });
                }
                (0..=k)
                    .map(|i| {
                        if i == 0 {
                            a0.ln()
                        } else {
                            (-1f64).powi(i as i32 + 1) / (i as f64 * a0.powi(i as i32))
                        }
                    })
                    .collect()
            }
            Elementary::Sqrt => {
                if a0 <= 0.0 {
                    return Err(JetError::Domain { func: "sqrt", value: a0 });
                }
                power_series(a0, 0.5, k)
            }
            Elementary::Sin | Elementary::Cos => {
                let (s, c) = a0.sin_cos();
                let cycle = if f == Elementary::Sin { [s, c, -s, -c] } else { [c, -s, -c, s] };
                (0..=k).map(|i| cycle[i % 4] / factorial(i)).collect()
            }
            Elementary::Sinh | Elementary::Cosh => {
                let (s, c) = (a0.sinh(), a0.cosh());
                let cycle = if f == Elementary::Sinh { [s, c] } else { [c, s] };
                (0..=k).map(|i| cycle[i % 2] / factorial(i)).collect()
            }
            Elementary::PowConst(p) => {
                if p.fract() == 0.0 && (0.0..=16.0).contains(&p) {
                    return Ok(self.powi(p as u32));
                }
                if p.fract() == 0.0 && (-16.0..0.0).contains(&p) {
                    return self.powi((-p) as u32).recip();
                }
                if a0 <= 0.0 {
                    return Err(JetError::Domain { func: "pow", value: a0 });
                }
                power_series(a0, p, k)
            }
        };
        Ok(self.compose(&t))
    }

    pub fn powi(&self, e: u32) -> Jet {
        let mut acc = Jet::constant(self.space, self.order, 1.0);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Taylor coefficients of `x^p` about `a0 > 0`.
fn power_series(a0: f64, p: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = 1.0;
    for k in 0..=order {
        out.push(binom * a0.powf(p - k as f64));
        binom *= (p - k as f64) / (k as f64 + 1.0);
    }
    out
}

/// Elementary functions with Taylor rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Sinh,
    Cosh,
    PowConst(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Binary truncated Taylor arithmetic; the result has the smaller order.
pub fn jet_arith(a: &Jet, b: &Jet, op: ArithOp) -> Result<Jet, JetError> {
    Ok(match op {
        ArithOp::Add => a.zip_with(b, |x, y| x + y),
        ArithOp::Sub => a.zip_with(b, |x, y| x - y),
        ArithOp::Mul => a.mul_jet(b),
        ArithOp::Div => a.div_jet(b)?,
    })
}

pub fn jet_elementary(a: &Jet, f: Elementary) -> Result<Jet, JetError> {
    a.apply(f)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |x, y| x + y)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |x, y| x - y)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div for &Jet {
    type Output = Result<Jet, JetError>;
    fn div(self, rhs: &Jet) -> Result<Jet, JetError> {
        self.div_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident, $out:ty) => {
        impl $tr for Jet {
            type Output = $out;
            fn $m(self, rhs: Jet) -> $out {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add, Jet);
forward_owned!(Sub, sub, Jet);
forward_owned!(Mul, mul, Jet);

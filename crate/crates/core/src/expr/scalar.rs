//! Scalar types the expression evaluator is generic over.
//!
//! `f64` evaluates plain values. [`Dual`] carries a gradient and [`Dual2`]
//! additionally carries a dense symmetric Hessian, both in forward mode. An
//! empty derivative vector stands for "all zeros", so constants never need to
//! know how many active variables the computation has.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate an [`Expression`](super::Expression).
pub trait Scalar:
    Clone + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(value: f64) -> Self;
    fn value(&self) -> f64;
    /// True when every derivative part is zero.
    fn is_constant(&self) -> bool;
    fn scale(&self, factor: f64) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, exponent: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, exponent: f64) -> Self {
        f64::powf(*self, exponent)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
}

/// `alpha * x + beta * y`, where an empty slice is the zero vector.
fn axpby(alpha: f64, x: &[f64], beta: f64, y: &[f64]) -> Vec<f64> {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => x.iter().map(|a| alpha * a).collect(),
        (true, false) => y.iter().map(|b| beta * b).collect(),
        (false, false) => {
            debug_assert_eq!(x.len(), y.len(), "dual dimension mismatch");
            x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect()
        }
    }
}

/// Symmetrised outer product `x yᵀ + y xᵀ`, row-major.
fn sym_outer(x: &[f64], y: &[f64]) -> Vec<f64> {
    if x.is_empty() || y.is_empty() {
        return Vec::new();
    }
    let n = x.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = x[i] * y[j] + y[i] * x[j];
        }
    }
    out
}

fn outer_self(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = x[i] * x[j];
        }
    }
    out
}

/// First-order forward-mode dual number.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub d1: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64) -> Self {
        Dual { value, d1: Vec::new() }
    }

    /// Independent variable `index` out of `n` active variables.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut d1 = vec![0.0; n];
        d1[index] = 1.0;
        Dual { value, d1 }
    }

    /// Seeds every coordinate of `point` as an active variable.
    pub fn seed(point: &[f64]) -> Vec<Dual> {
        let n = point.len();
        point.iter().enumerate().map(|(i, &v)| Dual::variable(v, i, n)).collect()
    }

    /// Gradient padded to `n` entries.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        if self.d1.is_empty() {
            vec![0.0; n]
        } else {
            self.d1.clone()
        }
    }

    fn chain(&self, f0: f64, f1: f64) -> Self {
        Dual { value: f0, d1: self.d1.iter().map(|d| f1 * d).collect() }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual { value: self.value + rhs.value, d1: axpby(1.0, &self.d1, 1.0, &rhs.d1) }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual { value: self.value - rhs.value, d1: axpby(1.0, &self.d1, -1.0, &rhs.d1) }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual { value: self.value * rhs.value, d1: axpby(rhs.value, &self.d1, self.value, &rhs.d1) }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.value;
        let value = self.value * inv;
        Dual { value, d1: axpby(inv, &self.d1, -value * inv, &rhs.d1) }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { value: -self.value, d1: self.d1.iter().map(|d| -d).collect() }
    }
}

impl Scalar for Dual {
    fn from_f64(value: f64) -> Self {
        Dual::constant(value)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn is_constant(&self) -> bool {
        self.d1.iter().all(|d| *d == 0.0)
    }
    fn scale(&self, factor: f64) -> Self {
        Dual { value: self.value * factor, d1: self.d1.iter().map(|d| d * factor).collect() }
    }
    fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let f1 = if n == 0 { 0.0 } else { n as f64 * v.powi(n - 1) };
        self.chain(v.powi(n), f1)
    }
    fn powf(&self, c: f64) -> Self {
        let v = self.value;
        self.chain(v.powf(c), c * v.powf(c - 1.0))
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn tan(&self) -> Self {
        let t = self.value.tan();
        self.chain(t, 1.0 + t * t)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(&self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn sinh(&self) -> Self {
        self.chain(self.value.sinh(), self.value.cosh())
    }
    fn cosh(&self) -> Self {
        self.chain(self.value.cosh(), self.value.sinh())
    }
}

/// Second-order forward-mode dual number with a dense row-major Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64) -> Self {
        Dual2 { value, d1: Vec::new(), d2: Vec::new() }
    }

    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut d1 = vec![0.0; n];
        d1[index] = 1.0;
        Dual2 { value, d1, d2: vec![0.0; n * n] }
    }

    pub fn seed(point: &[f64]) -> Vec<Dual2> {
        let n = point.len();
        point.iter().enumerate().map(|(i, &v)| Dual2::variable(v, i, n)).collect()
    }

    pub fn gradient(&self, n: usize) -> Vec<f64> {
        if self.d1.is_empty() {
            vec![0.0; n]
        } else {
            self.d1.clone()
        }
    }

    /// Hessian as nested rows, padded to `n × n`.
    pub fn hessian(&self, n: usize) -> Vec<Vec<f64>> {
        if self.d2.is_empty() {
            return vec![vec![0.0; n]; n];
        }
        self.d2.chunks(n).map(|row| row.to_vec()).collect()
    }

    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let d1 = self.d1.iter().map(|d| f1 * d).collect();
        let d2 = axpby(f1, &self.d2, f2, &outer_self(&self.d1));
        Dual2 { value: f0, d1, d2 }
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, rhs: Dual2) -> Dual2 {
        Dual2 {
            value: self.value + rhs.value,
            d1: axpby(1.0, &self.d1, 1.0, &rhs.d1),
            d2: axpby(1.0, &self.d2, 1.0, &rhs.d2),
        }
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, rhs: Dual2) -> Dual2 {
        Dual2 {
            value: self.value - rhs.value,
            d1: axpby(1.0, &self.d1, -1.0, &rhs.d1),
            d2: axpby(1.0, &self.d2, -1.0, &rhs.d2),
        }
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, rhs: Dual2) -> Dual2 {
        let d2 = axpby(rhs.value, &self.d2, self.value, &rhs.d2);
        let d2 = axpby(1.0, &d2, 1.0, &sym_outer(&self.d1, &rhs.d1));
        Dual2 { value: self.value * rhs.value, d1: axpby(rhs.value, &self.d1, self.value, &rhs.d1), d2 }
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    fn div(self, rhs: Dual2) -> Dual2 {
        let v = rhs.value;
        let recip = rhs.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
        self * recip
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2 { value: -self.value, d1: self.d1.iter().map(|d| -d).collect(), d2: self.d2.iter().map(|d| -d).collect() }
    }
}

impl Scalar for Dual2 {
    fn from_f64(value: f64) -> Self {
        Dual2::constant(value)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn is_constant(&self) -> bool {
        self.d1.iter().all(|d| *d == 0.0) && self.d2.iter().all(|d| *d == 0.0)
    }
    fn scale(&self, factor: f64) -> Self {
        Dual2 {
            value: self.value * factor,
            d1: self.d1.iter().map(|d| d * factor).collect(),
            d2: self.d2.iter().map(|d| d * factor).collect(),
        }
    }
    fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let nf = n as f64;
        let f1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let f2 = if n == 0 || n == 1 { 0.0 } else { nf * (nf - 1.0) * v.powi(n - 2) };
        self.chain(v.powi(n), f1, f2)
    }
    fn powf(&self, c: f64) -> Self {
        let v = self.value;
        self.chain(v.powf(c), c * v.powf(c - 1.0), c * (c - 1.0) * v.powf(c - 2.0))
    }
    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tan(&self) -> Self {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }
    fn sinh(&self) -> Self {
        let (sh, ch) = (self.value.sinh(), self.value.cosh());
        self.chain(sh, ch, sh)
    }
    fn cosh(&self) -> Self {
        let (sh, ch) = (self.value.sinh(), self.value.cosh());
        self.chain(ch, sh, ch)
    }
}

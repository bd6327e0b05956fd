//! Darboux-coordinate phase spaces, their Hamiltonian and evolution fields,
//! and the Poisson and Jacobi brackets.
//!
//! Chart ordering is fixed per geometry:
//!
//! | kind         | chart                          | dimension |
//! |--------------|--------------------------------|-----------|
//! | symplectic   | `q1..qn, p1..pn`               | 2n        |
//! | cosymplectic | `q1..qn, p1..pn, t`            | 2n + 1    |
//! | contact      | `q1..qn, p1..pn, z`            | 2n + 1    |
//! | cocontact    | `t, q1..qn, p1..pn, z`         | 2n + 2    |
//!
//! Two-forms are stored as antisymmetric matrices with the convention
//! `(dq∧dp)(X, Y) = dq(X) dp(Y) − dq(Y) dp(X)`, so `ω(e_q, e_p) = 1`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Dual, Expression, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Symplectic,
    Cosymplectic,
    Contact,
    Cocontact,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryKind::Symplectic => "symplectic",
            GeometryKind::Cosymplectic => "cosymplectic",
            GeometryKind::Contact => "contact",
            GeometryKind::Cocontact => "cocontact",
        })
    }
}

/// A phase-space structure together with its number of degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub n: usize,
}

impl Geometry {
    pub fn new(kind: GeometryKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("degrees of freedom must be positive".into()));
        }
        Ok(Geometry { kind, n })
    }

    pub fn symplectic(n: usize) -> Self {
        Geometry { kind: GeometryKind::Symplectic, n }
    }

    pub fn cosymplectic(n: usize) -> Self {
        Geometry { kind: GeometryKind::Cosymplectic, n }
    }

    pub fn contact(n: usize) -> Self {
        Geometry { kind: GeometryKind::Contact, n }
    }

    pub fn cocontact(n: usize) -> Self {
        Geometry { kind: GeometryKind::Cocontact, n }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            GeometryKind::Symplectic => 2 * self.n,
            GeometryKind::Cosymplectic | GeometryKind::Contact => 2 * self.n + 1,
            GeometryKind::Cocontact => 2 * self.n + 2,
        }
    }

    fn offset(&self) -> usize {
        usize::from(self.kind == GeometryKind::Cocontact)
    }

    /// Chart index of `q^(i+1)`.
    pub fn q(&self, i: usize) -> usize {
        self.offset() + i
    }

    /// Chart index of `p_(i+1)`.
    pub fn p(&self, i: usize) -> usize {
        self.offset() + self.n + i
    }

    pub fn t(&self) -> Option<usize> {
        match self.kind {
            GeometryKind::Cosymplectic => Some(2 * self.n),
            GeometryKind::Cocontact => Some(0),
            _ => None,
        }
    }

    pub fn z(&self) -> Option<usize> {
        match self.kind {
            GeometryKind::Contact => Some(2 * self.n),
            GeometryKind::Cocontact => Some(2 * self.n + 1),
            _ => None,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.t().is_some()
    }

    pub fn is_contact_like(&self) -> bool {
        self.z().is_some()
    }

    /// Chart indices of the `(q, p)` block in the order `q1..qn, p1..pn`.
    pub fn x_indices(&self) -> Vec<usize> {
        (0..2 * self.n).map(|a| self.offset() + a).collect()
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        self.names(|c| c.to_string(), "q", "p")
    }

    /// Names of the components of a transformation, `Q1.., P1.., T, Z` in chart order.
    pub fn target_names(&self) -> Vec<String> {
        self.names(|c| c.to_ascii_uppercase().to_string(), "Q", "P")
    }

    fn names(&self, single: impl Fn(char) -> String, q: &str, p: &str) -> Vec<String> {
        let mut out = vec![String::new(); self.dim()];
        for i in 0..self.n {
            out[self.q(i)] = format!("{q}{}", i + 1);
            out[self.p(i)] = format!("{p}{}", i + 1);
        }
        if let Some(t) = self.t() {
            out[t] = single('t');
        }
        if let Some(z) = self.z() {
            out[z] = single('z');
        }
        out
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// The structure forms and Reeb fields evaluated at `x`.
    pub fn structure_at(&self, x: &[f64]) -> Result<StructureAtPoint> {
        self.check_point(x)?;
        let d = self.dim();
        let mut two_form = DMatrix::zeros(d, d);
        for i in 0..self.n {
            two_form[(self.q(i), self.p(i))] = 1.0;
            two_form[(self.p(i), self.q(i))] = -1.0;
        }
        let unit = |k: usize| {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            v
        };
        let theta = self.z().map(|z| {
            let mut th = unit(z);
            for i in 0..self.n {
                th[self.q(i)] = -x[self.p(i)];
            }
            th
        });
        let eta = self.t().map(unit);
        let (reeb, time_reeb) = match self.kind {
            GeometryKind::Symplectic => (None, None),
            GeometryKind::Cosymplectic => (self.t().map(unit), None),
            GeometryKind::Contact => (self.z().map(unit), None),
            GeometryKind::Cocontact => (self.z().map(unit), self.t().map(unit)),
        };
        Ok(StructureAtPoint { two_form, theta, eta, reeb, time_reeb })
    }
}

/// Structure forms at a point in Darboux coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureAtPoint {
    /// ω, Ω or dθ as an antisymmetric matrix.
    pub two_form: DMatrix<f64>,
    /// θ = dz − p_i dq^i (contact kinds).
    pub theta: Option<Vec<f64>>,
    /// η = dt (time-dependent kinds).
    pub eta: Option<Vec<f64>>,
    /// R (cosymplectic, contact) or R_z (cocontact).
    pub reeb: Option<Vec<f64>>,
    /// R_t (cocontact).
    pub time_reeb: Option<Vec<f64>>,
}

/// Hamiltonian vector field components given the value, gradient and chart point.
pub(crate) fn field_from_gradient(geom: &Geometry, h: f64, grad: &[f64], x: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; geom.dim()];
    let hz = geom.z().map_or(0.0, |z| grad[z]);
    for i in 0..geom.n {
        let (qi, pi) = (geom.q(i), geom.p(i));
        v[qi] = grad[pi];
        v[pi] = -(grad[qi] + x[pi] * hz);
    }
    if let Some(z) = geom.z() {
        v[z] = (0..geom.n).map(|i| x[geom.p(i)] * grad[geom.p(i)]).sum::<f64>() - h;
    }
    v
}

/// Jacobian `∂V^A/∂x^C` of the Hamiltonian vector field, row `A`, column `C`.
pub(crate) fn field_jacobian(geom: &Geometry, grad: &[f64], hess: &[Vec<f64>], x: &[f64]) -> DMatrix<f64> {
    let d = geom.dim();
    let mut dv = DMatrix::zeros(d, d);
    let hz = geom.z().map_or(0.0, |z| grad[z]);
    for i in 0..geom.n {
        let (qi, pi) = (geom.q(i), geom.p(i));
        for c in 0..d {
            dv[(qi, c)] = hess[pi][c];
            let hzc = geom.z().map_or(0.0, |z| hess[z][c]);
            dv[(pi, c)] = -(hess[qi][c] + x[pi] * hzc);
        }
        dv[(pi, pi)] -= hz;
    }
    if let Some(z) = geom.z() {
        for c in 0..d {
            let mut s = -grad[c];
            for i in 0..geom.n {
                let pi = geom.p(i);
                s += x[pi] * hess[pi][c];
                if c == pi {
                    s += grad[pi];
                }
            }
            dv[(z, c)] = s;
        }
    }
    dv
}

/// X_H at `x`.
pub fn hamiltonian_vf(geom: &Geometry, h: &Expression, x: &[f64]) -> Result<Vec<f64>> {
    geom.check_point(x)?;
    let d = h.eval(&Dual::seed(x))?;
    Ok(field_from_gradient(geom, d.value, &d.gradient(x.len()), x))
}

/// E_H = X_H + ∂/∂t on time-dependent geometries, X_H otherwise.
pub fn evolution_vf(geom: &Geometry, h: &Expression, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = hamiltonian_vf(geom, h, x)?;
    if let Some(t) = geom.t() {
        v[t] = 1.0;
    }
    Ok(v)
}

/// The dynamical field (E_H or X_H, as for [`evolution_vf`]) together with its Jacobian.
pub fn dynamical_vf_jacobian(geom: &Geometry, h: &Expression, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    geom.check_point(x)?;
    let jet = h.jet(x)?;
    let mut v = field_from_gradient(geom, jet.value, &jet.gradient, x);
    if let Some(t) = geom.t() {
        v[t] = 1.0;
    }
    Ok((v, field_jacobian(geom, &jet.gradient, &jet.hessian, x)))
}

/// Bracket of two functions given their values and gradients (first-order
/// jets). Poisson formula on symplectic kinds, Jacobi formula on contact kinds.
pub fn bracket_of_jets<T: Scalar>(geom: &Geometry, f: &T, df: &[T], g: &T, dg: &[T], x: &[T]) -> T {
    let mut acc = T::from_f64(0.0);
    for i in 0..geom.n {
        let (qi, pi) = (geom.q(i), geom.p(i));
        acc = acc + df[qi].clone() * dg[pi].clone() - df[pi].clone() * dg[qi].clone();
    }
    if let Some(z) = geom.z() {
        let euler = |dh: &[T], h: &T| {
            let mut s = -h.clone();
            for i in 0..geom.n {
                let pi = geom.p(i);
                s = s + x[pi].clone() * dh[pi].clone();
            }
            s
        };
        acc = acc + df[z].clone() * euler(dg, g) - dg[z].clone() * euler(df, f);
    }
    acc
}

/// Value and gradient of a bracket `{f, g}` at `x`, from second-order jets of `f` and `g`.
pub fn bracket_with_gradient(geom: &Geometry, f: &Expression, g: &Expression, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    geom.check_point(x)?;
    let d = x.len();
    let (jf, jg) = (f.jet(x)?, g.jet(x)?);
    let lift = |value: f64, grad: &[f64]| Dual { value, d1: grad.to_vec() };
    let fd = lift(jf.value, &jf.gradient);
    let gd = lift(jg.value, &jg.gradient);
    let dfd: Vec<Dual> = (0..d).map(|a| lift(jf.gradient[a], &jf.hessian[a])).collect();
    let dgd: Vec<Dual> = (0..d).map(|a| lift(jg.gradient[a], &jg.hessian[a])).collect();
    let b = bracket_of_jets(geom, &fd, &dfd, &gd, &dgd, &Dual::seed(x));
    Ok((b.value, b.gradient(d)))
}

fn bracket(geom: &Geometry, f: &Expression, g: &Expression, x: &[f64]) -> Result<f64> {
    geom.check_point(x)?;
    let df = f.eval(&Dual::seed(x))?;
    let dg = g.eval(&Dual::seed(x))?;
    let n = x.len();
    Ok(bracket_of_jets(geom, &df.value, &df.gradient(n), &dg.value, &dg.gradient(n), x))
}

/// Poisson bracket `{f, h}`; t-derivatives do not enter on cosymplectic charts.
pub fn poisson_bracket(geom: &Geometry, f: &Expression, h: &Expression, x: &[f64]) -> Result<f64> {
    match geom.kind {
        GeometryKind::Symplectic | GeometryKind::Cosymplectic => bracket(geom, f, h, x),
        kind => Err(Error::WrongGeometry { op: "poisson_bracket", kind }),
    }
}

pub fn jacobi_bracket(geom: &Geometry, f: &Expression, h: &Expression, x: &[f64]) -> Result<f64> {
    match geom.kind {
        GeometryKind::Contact | GeometryKind::Cocontact => bracket(geom, f, h, x),
        kind => Err(Error::WrongGeometry { op: "jacobi_bracket", kind }),
    }
}

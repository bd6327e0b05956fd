//! Candidate transformations, their Lagrange brackets, and the canonical and
//! canonoid tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Dual, Dual2, Expression, Node, Scalar};
use crate::geometry::{field_from_gradient, field_jacobian, Geometry, GeometryKind};

/// A diffeomorphism candidate `F`, one expression per target coordinate in
/// chart order (`Q1.., P1.., T, Z` laid out like the source chart).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMap {
    geometry: Geometry,
    components: Vec<Expression>,
}

/// Values, Jacobian and per-component Hessians of a map at a point.
#[derive(Debug, Clone)]
pub struct MapJets {
    pub values: Vec<f64>,
    /// Row = target component, column = source coordinate.
    pub jacobian: DMatrix<f64>,
    pub hessians: Vec<DMatrix<f64>>,
}

/// Antisymmetric matrix of Lagrange brackets `[x^μ, x^ν]` over the full chart.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeMatrix {
    pub entries: DMatrix<f64>,
}

impl TransformMap {
    pub fn new(geometry: Geometry, components: Vec<Expression>) -> Result<Self> {
        if components.len() != geometry.dim() {
            return Err(Error::InvalidTransform(format!(
                "expected {} components for {} n={}, got {}",
                geometry.dim(),
                geometry.kind,
                geometry.n,
                components.len()
            )));
        }
        let names = geometry.coordinate_names();
        for (c, target) in components.iter().zip(geometry.target_names()) {
            if c.chart() != names.as_slice() {
                return Err(Error::InvalidTransform(format!(
                    "component {target} is not parsed on the {} chart",
                    geometry.kind
                )));
            }
        }
        if let Some(t) = geometry.t() {
            if *components[t].root() != Node::Var(t) {
                return Err(Error::InvalidTransform(format!("the T component must be `t`, got `{}`", components[t])));
            }
        }
        Ok(TransformMap { geometry, components })
    }

    /// Parses one source string per target coordinate, in chart order.
    pub fn parse(geometry: Geometry, sources: &[&str]) -> Result<Self> {
        let chart = geometry.coordinate_names();
        let components =
            sources.iter().map(|s| Expression::parse(s, &chart)).collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(geometry, components)
    }

    pub fn identity(geometry: Geometry) -> Self {
        let chart = geometry.coordinate_names();
        let components = (0..geometry.dim()).map(|i| Expression::from_node(Node::Var(i), chart.clone())).collect();
        TransformMap { geometry, components }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.geometry.check_point(x)?;
        Ok(self.components.iter().map(|c| c.value(x)).collect::<std::result::Result<_, _>>()?)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.geometry.check_point(x)?;
        let d = x.len();
        let seeds = Dual::seed(x);
        let mut jac = DMatrix::zeros(d, d);
        for (r, c) in self.components.iter().enumerate() {
            let g = c.eval(&seeds)?.gradient(d);
            for (k, v) in g.into_iter().enumerate() {
                jac[(r, k)] = v;
            }
        }
        check_nonsingular(&jac, x)?;
        Ok(jac)
    }

    pub fn jets(&self, x: &[f64]) -> Result<MapJets> {
        self.geometry.check_point(x)?;
        let d = x.len();
        let seeds = Dual2::seed(x);
        let mut values = Vec::with_capacity(d);
        let mut jacobian = DMatrix::zeros(d, d);
        let mut hessians = Vec::with_capacity(d);
        for (r, c) in self.components.iter().enumerate() {
            let v = c.eval(&seeds)?;
            for (k, g) in v.gradient(d).into_iter().enumerate() {
                jacobian[(r, k)] = g;
            }
            let h = v.hessian(d);
            hessians.push(DMatrix::from_fn(d, d, |i, j| h[i][j]));
            values.push(v.value);
        }
        check_nonsingular(&jacobian, x)?;
        Ok(MapJets { values, jacobian, hessians })
    }

    pub fn lagrange_brackets(&self, x: &[f64]) -> Result<LagrangeMatrix> {
        let jac = self.jacobian(x)?;
        Ok(LagrangeMatrix { entries: lagrange_from_jacobian(&self.geometry, &jac) })
    }

    /// θ̄ = F*θ = dZ − P_i dQ^i (contact kinds).
    pub fn pulled_back_theta(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.contact_z("pulled_back_theta")?;
        let jac = self.jacobian(x)?;
        let values = self.apply(x)?;
        Ok(theta_bar(&self.geometry, z, &values, &jac))
    }

    fn contact_z(&self, op: &'static str) -> Result<usize> {
        self.geometry.z().ok_or(Error::WrongGeometry { op, kind: self.geometry.kind })
    }
}

fn check_nonsingular(jac: &DMatrix<f64>, x: &[f64]) -> Result<()> {
    let bound: f64 = jac.row_iter().map(|r| r.norm()).product();
    let det = jac.clone().lu().determinant();
    if bound == 0.0 || det.abs() <= 1e-12 * bound {
        return Err(Error::SingularJacobian { point: x.to_vec() });
    }
    Ok(())
}

/// `[x^μ, x^ν] = Σ_i ∂Q^i/∂x^μ ∂P_i/∂x^ν − ∂Q^i/∂x^ν ∂P_i/∂x^μ`; T and Z do not enter.
pub(crate) fn lagrange_from_jacobian(geom: &Geometry, jac: &DMatrix<f64>) -> DMatrix<f64> {
    let d = geom.dim();
    let mut l = DMatrix::zeros(d, d);
    for mu in 0..d {
        for nu in (mu + 1)..d {
            let mut s = 0.0;
            for i in 0..geom.n {
                let (qi, pi) = (geom.q(i), geom.p(i));
                s += jac[(qi, mu)] * jac[(pi, nu)] - jac[(qi, nu)] * jac[(pi, mu)];
            }
            l[(mu, nu)] = s;
            l[(nu, mu)] = -s;
        }
    }
    l
}

/// Lagrange brackets over a generic scalar; `jac[target][source]`.
pub(crate) fn lagrange_generic<T: Scalar>(geom: &Geometry, jac: &[Vec<T>]) -> Vec<Vec<T>> {
    let d = geom.dim();
    let mut l = vec![vec![T::from_f64(0.0); d]; d];
    for mu in 0..d {
        for nu in (mu + 1)..d {
            let mut s = T::from_f64(0.0);
            for i in 0..geom.n {
                let (qi, pi) = (geom.q(i), geom.p(i));
                s = s + jac[qi][mu].clone() * jac[pi][nu].clone() - jac[qi][nu].clone() * jac[pi][mu].clone();
            }
            l[nu][mu] = -s.clone();
            l[mu][nu] = s;
        }
    }
    l
}

impl MapJets {
    /// `out[λ][(μ, ν)] = ∂[x^μ, x^ν]/∂x^λ`.
    pub fn lagrange_derivative(&self, geom: &Geometry) -> Vec<DMatrix<f64>> {
        let d = geom.dim();
        let j = &self.jacobian;
        (0..d)
            .map(|lam| {
                DMatrix::from_fn(d, d, |mu, nu| {
                    let mut s = 0.0;
                    for i in 0..geom.n {
                        let (hq, hp) = (&self.hessians[geom.q(i)], &self.hessians[geom.p(i)]);
                        let (qi, pi) = (geom.q(i), geom.p(i));
                        s += hq[(mu, lam)] * j[(pi, nu)] + j[(qi, mu)] * hp[(nu, lam)]
                            - hq[(nu, lam)] * j[(pi, mu)]
                            - j[(qi, nu)] * hp[(mu, lam)];
                    }
                    s
                })
            })
            .collect()
    }

    /// Jacobian entries lifted to first-order duals carrying their own gradients.
    pub(crate) fn jacobian_duals(&self) -> Vec<Vec<Dual>> {
        let d = self.jacobian.nrows();
        (0..d)
            .map(|r| {
                (0..d)
                    .map(|c| Dual {
                        value: self.jacobian[(r, c)],
                        d1: self.hessians[r].row(c).iter().copied().collect(),
                    })
                    .collect()
            })
            .collect()
    }
}

fn theta_bar(geom: &Geometry, z: usize, values: &[f64], jac: &DMatrix<f64>) -> Vec<f64> {
    (0..geom.dim())
        .map(|b| {
            let mut s = jac[(z, b)];
            for i in 0..geom.n {
                s -= values[geom.p(i)] * jac[(geom.q(i), b)];
            }
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalVerdict {
    pub canonical: bool,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Residual of `F*structure − structure` at one point, sup norm.
pub fn canonical_residual(f: &TransformMap, x: &[f64]) -> Result<f64> {
    let geom = f.geometry;
    let structure = geom.structure_at(x)?;
    let jac = f.jacobian(x)?;
    let mut res = 0.0_f64;
    match geom.z() {
        None => {
            let l = lagrange_from_jacobian(&geom, &jac);
            res = res.max((l - &structure.two_form).amax());
        }
        Some(z) => {
            let values = f.apply(x)?;
            let th = theta_bar(&geom, z, &values, &jac);
            res = res.max(max_abs_diff(&th, structure.theta.as_ref().expect("contact kinds carry θ")));
        }
    }
    if let (Some(t), Some(eta)) = (geom.t(), structure.eta.as_ref()) {
        let eta_bar: Vec<f64> = jac.row(t).iter().copied().collect();
        res = res.max(max_abs_diff(&eta_bar, eta));
    }
    Ok(res)
}

pub fn check_canonical(f: &TransformMap, samples: &[Vec<f64>], tol: f64) -> Result<CanonicalVerdict> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let mut worst = (f64::NEG_INFINITY, samples[0].clone());
    for x in samples {
        let r = canonical_residual(f, x)?;
        if r > worst.0 {
            worst = (r, x.clone());
        }
    }
    Ok(CanonicalVerdict { canonical: worst.0 <= tol, max_residual: worst.0, worst_point: worst.1 })
}

/// The one-form `X_H ⌟ ω̄` (components `g_ν = X_H^μ [x^μ, x^ν]`) and its Jacobian.
struct KForm {
    g: Vec<f64>,
    /// `dg[(ν, λ)] = ∂g_ν/∂x^λ`.
    dg: DMatrix<f64>,
}

fn k_form(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<KForm> {
    let geom = f.geometry;
    let d = geom.dim();
    let jets = f.jets(x)?;
    let hj = h.jet(x)?;
    let v = field_from_gradient(&geom, hj.value, &hj.gradient, x);
    let dv = field_jacobian(&geom, &hj.gradient, &hj.hessian, x);
    let l = lagrange_from_jacobian(&geom, &jets.jacobian);
    let dl = jets.lagrange_derivative(&geom);
    let g: Vec<f64> = (0..d).map(|nu| (0..d).map(|mu| v[mu] * l[(mu, nu)]).sum()).collect();
    let dg = DMatrix::from_fn(d, d, |nu, lam| {
        (0..d).map(|mu| dv[(mu, lam)] * l[(mu, nu)] + v[mu] * dl[lam][(mu, nu)]).sum()
    });
    Ok(KForm { g, dg })
}

/// Gradient of the new Hamiltonian K implied by `dK = X_H ⌟ ω̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct KGradient {
    /// `∂K/∂x^α` over the `(q, p)` block, ordered `q1..qn, p1..pn`.
    pub spatial: Vec<f64>,
    /// `∂²K/∂x^α∂t` (cosymplectic only). The t-partial of K itself is gauge
    /// dependent and is fixed by [`recover_k`].
    pub time_mixed: Option<Vec<f64>>,
}

pub fn candidate_k_gradient(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<KGradient> {
    let geom = f.geometry;
    if geom.is_contact_like() {
        return Err(Error::WrongGeometry { op: "candidate_k_gradient", kind: geom.kind });
    }
    let form = k_form(f, h, x)?;
    let xs = geom.x_indices();
    let spatial = xs.iter().map(|&a| form.g[a]).collect();
    let time_mixed = geom.t().map(|t| xs.iter().map(|&a| form.dg[(a, t)]).collect());
    Ok(KGradient { spatial, time_mixed })
}

fn closedness_residual(geom: &Geometry, form: &KForm) -> f64 {
    let xs = geom.x_indices();
    let mut r = 0.0_f64;
    for &a in &xs {
        for &b in &xs {
            r = r.max((form.dg[(a, b)] - form.dg[(b, a)]).abs());
        }
    }
    r
}

/// Residual of the contact canonoid conditions at `x`, and the value of
/// `K = −θ̄(X_H)` there.
fn contact_residual(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<(f64, f64)> {
    let geom = f.geometry;
    let z = f.contact_z("contact canonoid residual")?;
    let d = geom.dim();
    let jets = f.jets(x)?;
    let j = &jets.jacobian;
    let hj = h.jet(x)?;
    let v = field_from_gradient(&geom, hj.value, &hj.gradient, x);
    let dv = field_jacobian(&geom, &hj.gradient, &hj.hessian, x);
    let theta = theta_bar(&geom, z, &jets.values, j);
    // ∂θ̄_B/∂x^C
    let dtheta = DMatrix::from_fn(d, d, |b, c| {
        let mut s = jets.hessians[z][(b, c)];
        for i in 0..geom.n {
            let (qi, pi) = (geom.q(i), geom.p(i));
            s -= j[(pi, c)] * j[(qi, b)] + jets.values[pi] * jets.hessians[qi][(b, c)];
        }
        s
    });
    let l = lagrange_from_jacobian(&geom, j);
    let k = -(0..d).map(|b| theta[b] * v[b]).sum::<f64>();
    let dk: Vec<f64> =
        (0..d).map(|c| -(0..d).map(|b| dtheta[(b, c)] * v[b] + theta[b] * dv[(b, c)]).sum::<f64>()).collect();

    let eta_row = geom.t().map(|t| {
        let mut e = vec![0.0; d];
        e[t] = 1.0;
        e
    });
    let mut rows = Vec::new();
    if let Some(e) = &eta_row {
        rows.push(e.clone());
    }
    rows.push(theta.clone());
    for b in 0..d {
        rows.push((0..d).map(|c| l[(c, b)]).collect());
    }
    let a = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
    let offset = usize::from(eta_row.is_some());
    let solve = |rhs_index: usize| -> Result<Vec<f64>> {
        let mut rhs = DVector::zeros(rows.len());
        rhs[rhs_index] = 1.0;
        reeb_solve(&a, &rhs, x)
    };
    let reeb_z = solve(offset)?;
    let rz_k: f64 = (0..d).map(|c| reeb_z[c] * dk[c]).sum();
    let rt_k = if eta_row.is_some() {
        let reeb_t = solve(0)?;
        (0..d).map(|c| reeb_t[c] * dk[c]).sum()
    } else {
        0.0
    };

    let mut res = 0.0_f64;
    for c in 0..d {
        let contraction: f64 = (0..d).map(|b| v[b] * l[(b, c)]).sum();
        let mut r = contraction - dk[c] + rz_k * theta[c];
        if let Some(e) = &eta_row {
            r += rt_k * e[c];
        }
        res = res.max(r.abs());
    }
    if let Some(t) = geom.t() {
        // X_H ⌟ η̄ with η̄ = dT
        let xe: f64 = (0..d).map(|b| j[(t, b)] * v[b]).sum();
        res = res.max(xe.abs());
    }
    Ok((res, k))
}

/// Least-squares solve of the stacked Reeb system; singular or inconsistent
/// systems mean the pulled-back form is not a contact form at `x`.
fn reeb_solve(a: &DMatrix<f64>, rhs: &DVector<f64>, x: &[f64]) -> Result<Vec<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-12 * smax {
        return Err(Error::SingularReeb { point: x.to_vec() });
    }
    let sol = svd.solve(rhs, 0.0).map_err(|_| Error::SingularReeb { point: x.to_vec() })?;
    let defect = (a * &sol - rhs).amax();
    if defect > 1e-8 * (1.0 + smax * sol.amax()) {
        return Err(Error::SingularReeb { point: x.to_vec() });
    }
    Ok(sol.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSample {
    pub point: Vec<f64>,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonoidVerdict {
    pub canonoid: bool,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    /// K at the sample points: exact for contact kinds, recovered relative to
    /// the first sample for symplectic kinds. Empty when not canonoid.
    pub k_probe: Vec<KSample>,
    /// `max |[t, x^λ]|` over the samples for time-dependent kinds. Non-zero
    /// values mean the pulled-back Reeb field differs from ∂/∂t.
    pub time_mixing: Option<f64>,
}

/// Canonoid residual at one point.
pub fn canonoid_residual(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<f64> {
    let geom = f.geometry;
    if geom.is_contact_like() {
        return Ok(contact_residual(f, h, x)?.0);
    }
    let form = k_form(f, h, x)?;
    let mut r = closedness_residual(&geom, &form);
    if let Some(t) = geom.t() {
        // X_H ⌟ η̄ vanishes identically because T = t and X_H has no t-component.
        let v = crate::geometry::hamiltonian_vf(&geom, h, x)?;
        let jac = f.jacobian(x)?;
        let xe: f64 = (0..geom.dim()).map(|b| jac[(t, b)] * v[b]).sum();
        r = r.max(xe.abs());
    }
    Ok(r)
}

pub fn check_canonoid(f: &TransformMap, h: &Expression, samples: &[Vec<f64>], tol: f64) -> Result<CanonoidVerdict> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let geom = f.geometry;
    let mut worst = (f64::NEG_INFINITY, samples[0].clone());
    let mut time_mixing = geom.t().map(|_| 0.0_f64);
    for x in samples {
        let r = canonoid_residual(f, h, x)?;
        if r > worst.0 {
            worst = (r, x.clone());
        }
        if let (Some(t), Some(tm)) = (geom.t(), time_mixing.as_mut()) {
            let l = f.lagrange_brackets(x)?.entries;
            for a in geom.x_indices() {
                *tm = tm.max(l[(t, a)].abs());
            }
        }
    }
    let canonoid = worst.0 <= tol;
    let mut k_probe = Vec::new();
    if canonoid {
        for x in samples {
            if let Ok(k) = recover_k(f, h, x, &samples[0], tol) {
                k_probe.push(KSample { point: x.clone(), k });
            }
        }
    }
    Ok(CanonoidVerdict { canonoid, max_residual: worst.0, worst_point: worst.1, k_probe, time_mixing })
}

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

const GL_NODES: usize = 8;
const PANELS_PER_UNIT: f64 = 4.0;

/// Recovers the new Hamiltonian K at `x`.
///
/// Contact kinds: `K = −θ̄(X_H)` exactly. Symplectic kinds: line integral of
/// the K-gradient along the straight `(q, p)` segment from `base` (32
/// Gauss–Legendre nodes per unit length), normalised so that `K(base) = 0`.
/// On cosymplectic charts the segment lies in the t-slice of `x`, which fixes
/// the gauge `K(base, t) = 0` for every t. The chart is assumed star-shaped
/// around `base`.
pub fn recover_k(f: &TransformMap, h: &Expression, x: &[f64], base: &[f64], tol: f64) -> Result<f64> {
    let geom = f.geometry;
    geom.check_point(x)?;
    geom.check_point(base)?;
    if geom.is_contact_like() {
        return Ok(contact_residual(f, h, x)?.1);
    }
    let xs = geom.x_indices();
    let delta: Vec<f64> = xs.iter().map(|&a| x[a] - base[a]).collect();
    let len = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len == 0.0 {
        return Ok(0.0);
    }
    let panels = (len * PANELS_PER_UNIT).ceil().max(1.0) as usize;
    let point_at = |s: f64| {
        let mut y = x.to_vec();
        for (k, &a) in xs.iter().enumerate() {
            y[a] = base[a] + s * delta[k];
        }
        y
    };
    let nodes = gauss_legendre(GL_NODES);
    let mut total = 0.0;
    for panel in 0..panels {
        let (s0, s1) = (panel as f64 / panels as f64, (panel + 1) as f64 / panels as f64);
        let mid = point_at(0.5 * (s0 + s1));
        let residual = closedness_residual(&geom, &k_form(f, h, &mid)?);
        if residual > tol {
            return Err(Error::NonCanonoid { residual, tol });
        }
        for &(node, weight) in &nodes {
            let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * node;
            let form = k_form(f, h, &point_at(s))?;
            let dot: f64 = xs.iter().enumerate().map(|(k, &a)| form.g[a] * delta[k]).sum();
            total += 0.5 * (s1 - s0) * weight * dot;
        }
    }
    Ok(total)
}

/// `ω̄` contracted with X_H, the one-form whose exactness is the canonoid
/// condition on symplectic kinds. Exposed for diagnostics.
pub fn k_one_form(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<Vec<f64>> {
    if f.geometry.kind == GeometryKind::Contact || f.geometry.kind == GeometryKind::Cocontact {
        return Err(Error::WrongGeometry { op: "k_one_form", kind: f.geometry.kind });
    }
    Ok(k_form(f, h, x)?.g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(sources: &[&str]) -> TransformMap {
        TransformMap::parse(Geometry::symplectic(sources.len() / 2), sources).unwrap()
    }

    fn h_on(geom: &Geometry, s: &str) -> Expression {
        Expression::parse(s, &geom.coordinate_names()).unwrap()
    }

    #[test]
    fn construction_checks() {
        let g = Geometry::cosymplectic(1);
        assert!(matches!(TransformMap::parse(g, &["q1", "p1"]), Err(Error::InvalidTransform(_))));
        assert!(matches!(TransformMap::parse(g, &["q1", "p1", "2*t"]), Err(Error::InvalidTransform(_))));
        assert!(TransformMap::parse(g, &["q1", "p1*t", "t"]).is_ok());
        let wrong_chart = Expression::parse("q1", &["q1".to_string(), "p1".to_string()]).unwrap();
        assert!(TransformMap::new(Geometry::contact(1), vec![wrong_chart.clone(), wrong_chart.clone(), wrong_chart])
            .is_err());
    }

    #[test]
    fn jacobian_examples() {
        let id = TransformMap::identity(Geometry::contact(2));
        assert_eq!(id.jacobian(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap(), DMatrix::identity(5, 5));
        let f = sym(&["q1", "p1^3/3"]);
        assert_eq!(f.jacobian(&[1.0, 2.0]).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        let phi: f64 = 0.4;
        let rot = sym(&["cos(0.4)*q1 + sin(0.4)*p1", "-sin(0.4)*q1 + cos(0.4)*p1"]);
        let j = rot.jacobian(&[3.0, -1.0]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[phi.cos(), phi.sin(), -phi.sin(), phi.cos()]);
        assert!((j - expected).amax() < 1e-15);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let f = sym(&["q1", "p1^3/3"]);
        assert!(matches!(f.jacobian(&[1.0, 0.0]), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn lagrange_examples() {
        let id = TransformMap::identity(Geometry::symplectic(1));
        let l = id.lagrange_brackets(&[0.5, 0.5]).unwrap().entries;
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));

        let f = sym(&["q1", "p1^3/3"]);
        let l = f.lagrange_brackets(&[0.2, 1.5]).unwrap().entries;
        assert_eq!(l[(0, 1)], 2.25);
        assert_eq!(l[(1, 0)], -2.25);

        let c = TransformMap::parse(Geometry::contact(1), &["q1", "3*p1", "3*z"]).unwrap();
        let l = c.lagrange_brackets(&[0.2, 1.5, -0.4]).unwrap().entries;
        assert_eq!(l[(0, 1)], 3.0);
        for k in 0..3 {
            assert_eq!(l[(2, k)], 0.0);
            assert_eq!(l[(k, 2)], 0.0);
        }
    }

    #[test]
    fn canonical_examples() {
        let rot = sym(&["cos(0.4)*q1 + sin(0.4)*p1", "-sin(0.4)*q1 + cos(0.4)*p1"]);
        let samples = vec![vec![0.1, 0.2], vec![-3.0, 1.0], vec![2.0, 2.0]];
        let v = check_canonical(&rot, &samples, 1e-12).unwrap();
        assert!(v.canonical && v.max_residual < 1e-14);

        let f = sym(&["q1", "p1^3/3"]);
        let v = check_canonical(&f, &[vec![0.0, 3.0]], 1e-8).unwrap();
        assert!(!v.canonical);
        assert_eq!(v.max_residual, 8.0);

        let c = TransformMap::parse(Geometry::contact(1), &["q1", "2*p1", "2*z"]).unwrap();
        let v = check_canonical(&c, &[vec![0.3, 0.0, 1.0]], 1e-8).unwrap();
        assert!(!v.canonical);
        assert_eq!(v.max_residual, 1.0);
        let v = check_canonical(&c, &[vec![0.3, -1.7, 1.0]], 1e-8).unwrap();
        assert_eq!(v.max_residual, 1.7);
        assert!(check_canonical(&c, &[], 1e-8).is_err());
    }

    #[test]
    fn k_gradient_matches_derivation() {
        let g = Geometry::symplectic(1);
        let h = h_on(&g, "p1^2/2");
        let id = TransformMap::identity(g);
        let x = [0.7, -1.3];
        assert_eq!(candidate_k_gradient(&id, &h, &x).unwrap().spatial, h.gradient(&x).unwrap());

        let f = sym(&["q1", "p1^3/3"]);
        let kg = candidate_k_gradient(&f, &h, &[0.4, 1.5]).unwrap();
        assert_eq!(kg.spatial, vec![0.0, 1.5f64.powi(3)]);
        assert!(kg.time_mixed.is_none());

        let c = Geometry::contact(1);
        let cf = TransformMap::identity(c);
        assert!(matches!(candidate_k_gradient(&cf, &h_on(&c, "p1"), &[0.0; 3]), Err(Error::WrongGeometry { .. })));
    }

    #[test]
    fn non_canonoid_curl() {
        // X_H ⌟ ω̄ = qp dp, d(qp dp) = p dq∧dp
        let g = Geometry::symplectic(1);
        let f = sym(&["q1", "q1*p1"]);
        let h = h_on(&g, "p1^2/2");
        let x = [1.0, 1.0];
        assert_eq!(candidate_k_gradient(&f, &h, &x).unwrap().spatial, vec![0.0, 1.0]);
        assert_eq!(canonoid_residual(&f, &h, &[1.3, 0.6]).unwrap(), 0.6);
        let v = check_canonoid(&f, &h, &[vec![1.0, 1.0], vec![2.0, -0.5]], 1e-8).unwrap();
        assert!(!v.canonoid && v.k_probe.is_empty());
        assert_eq!(v.max_residual, 1.0);
    }

    #[test]
    fn canonoid_examples() {
        let g = Geometry::symplectic(1);
        let h = h_on(&g, "p1^2/2");
        let f = sym(&["q1", "p1^3/3"]);
        let samples = vec![vec![0.1, 0.5], vec![-1.0, 1.2], vec![0.4, 2.0]];
        let v = check_canonoid(&f, &h, &samples, 1e-8).unwrap();
        assert!(v.canonoid && v.max_residual < 1e-10);
        assert_eq!(v.k_probe.len(), 3);
        for ks in &v.k_probe {
            let expected = (ks.point[1].powi(4) - 0.5f64.powi(4)) / 4.0;
            assert!((ks.k - expected).abs() < 1e-10);
        }

        let c = Geometry::contact(1);
        let hc = h_on(&c, "p1^2/2 + q1^2/2 + 0.3*z*q1");
        let cf = TransformMap::parse(c, &["q1", "2.5*p1", "2.5*z"]).unwrap();
        let samples = vec![vec![0.1, 0.5, 0.2], vec![-1.0, 1.2, -0.3]];
        let v = check_canonoid(&cf, &hc, &samples, 1e-8).unwrap();
        assert!(v.canonoid && v.max_residual < 1e-10, "{v:?}");
        for ks in &v.k_probe {
            assert!((ks.k - 2.5 * hc.value(&ks.point).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn contact_non_canonoid_detected() {
        let c = Geometry::contact(1);
        let hc = h_on(&c, "p1^2/2 + q1^2/2");
        let cf = TransformMap::parse(c, &["q1 + p1^2", "p1", "z + q1*p1"]).unwrap();
        let r = canonoid_residual(&cf, &hc, &[0.3, 0.8, 0.1]).unwrap();
        assert!(r > 1e-3, "{r}");
    }

    #[test]
    fn singular_reeb_reported() {
        // rank-deficient stacked system: θ̄ = dq, dθ̄ = 0
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let rhs = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(reeb_solve(&a, &rhs, &[0.0; 3]), Err(Error::SingularReeb { .. })));
        // inconsistent: two rows demanding different values along the same direction
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let rhs = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(matches!(reeb_solve(&a, &rhs, &[0.0; 2]), Err(Error::SingularReeb { .. })));
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(reeb_solve(&ok, &DVector::from_vec(vec![1.0, 0.0]), &[0.0; 2]).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn recover_k_examples() {
        let g = Geometry::symplectic(1);
        let h = h_on(&g, "p1^2/2 + q1^2/2");
        let id = TransformMap::identity(g);
        let (x, base) = ([1.3, -0.4], [0.2, 0.9]);
        let k = recover_k(&id, &h, &x, &base, 1e-8).unwrap();
        assert!((k - (h.value(&x).unwrap() - h.value(&base).unwrap())).abs() < 1e-12);

        let hf = h_on(&g, "p1^2/2");
        let f = sym(&["q1", "p1^3/3"]);
        let k = recover_k(&f, &hf, &[0.7, 1.6], &[0.0, 0.0], 1e-8);
        // the segment passes through p = 0 where the Jacobian is singular
        assert!(matches!(k, Err(Error::SingularJacobian { .. })) || (k.unwrap() - 1.6f64.powi(4) / 4.0).abs() < 1e-10);

        let c = Geometry::contact(1);
        let hc = h_on(&c, "p1^2/2 + q1^2/2");
        let cf = TransformMap::parse(c, &["q1", "2*p1", "2*z"]).unwrap();
        let k = recover_k(&cf, &hc, &[1.0, 1.0, 0.0], &[0.0; 3], 1e-8).unwrap();
        assert_eq!(k, 2.0);

        let bad = sym(&["q1", "q1*p1"]);
        assert!(matches!(recover_k(&bad, &hf, &[1.0, 1.0], &[2.0, 2.0], 1e-8), Err(Error::NonCanonoid { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre(8);
        let w: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let m14: f64 = nodes.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
    }
}

//! The mixed tensor S linking the canonical and pulled-back two-forms, traces
//! of its powers, its Nijenhuis torsion, the Lenard trace identity and the
//! involution of the trace functions.
//!
//! Components follow `S^α_B = ε^{λα} [x^B, x^λ]` on the `(q, p)` rows, which
//! gives `S^{q_i}_B = [x^B, p_i]` and `S^{p_i}_B = −[x^B, q^i]`. The t-row is
//! zero and the z-row is `S^z_B = p_i S^{q_i}_B`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Dual, Scalar};
use crate::geometry::Geometry;
use crate::transform::{lagrange_from_jacobian, lagrange_generic, MapJets, TransformMap};

/// Largest power accepted by the trace routines.
pub const MAX_KMAX: usize = 10;

/// How a row of S is determined by the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowConstraint {
    Free,
    /// Identically zero (the t-row).
    Zero,
    /// `Σ p_i` times the `q^i` rows (the z-row).
    PWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct STensorSample {
    /// `S^A_B`, row A, column B, over the full chart.
    pub matrix: DMatrix<f64>,
    pub row_constraints: Vec<RowConstraint>,
}

impl STensorSample {
    /// The `(q, p)` block.
    pub fn x_block(&self, geom: &Geometry) -> DMatrix<f64> {
        let xs = geom.x_indices();
        DMatrix::from_fn(xs.len(), xs.len(), |a, b| self.matrix[(xs[a], xs[b])])
    }
}

fn row_constraints(geom: &Geometry) -> Vec<RowConstraint> {
    let mut rc = vec![RowConstraint::Free; geom.dim()];
    if let Some(t) = geom.t() {
        rc[t] = RowConstraint::Zero;
    }
    if let Some(z) = geom.z() {
        rc[z] = RowConstraint::PWeighted;
    }
    rc
}

/// Assembles S from Lagrange brackets `l[μ][ν]` over any scalar type.
fn assemble<T: Scalar>(geom: &Geometry, l: &[Vec<T>], x: &[T]) -> Vec<Vec<T>> {
    let d = geom.dim();
    let zero = T::from_f64(0.0);
    let mut s = vec![vec![zero.clone(); d]; d];
    for b in 0..d {
        for i in 0..geom.n {
            s[geom.q(i)][b] = l[b][geom.p(i)].clone();
            s[geom.p(i)][b] = -l[b][geom.q(i)].clone();
        }
        if let Some(z) = geom.z() {
            let mut acc = zero.clone();
            for i in 0..geom.n {
                acc = acc + x[geom.p(i)].clone() * s[geom.q(i)][b].clone();
            }
            s[z][b] = acc;
        }
    }
    s
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |r, c| rows[r][c])
}

fn s_from_jacobian(geom: &Geometry, jac: &DMatrix<f64>, x: &[f64]) -> STensorSample {
    let l = to_rows(&lagrange_from_jacobian(geom, jac));
    STensorSample { matrix: from_rows(&assemble(geom, &l, x)), row_constraints: row_constraints(geom) }
}

pub fn s_tensor(f: &TransformMap, x: &[f64]) -> Result<STensorSample> {
    let jac = f.jacobian(x)?;
    Ok(s_from_jacobian(f.geometry(), &jac, x))
}

/// S together with `ds[ν] = ∂S/∂x^ν`, assembled by the product rule from the
/// second derivatives of F.
pub fn s_tensor_with_derivative(f: &TransformMap, x: &[f64]) -> Result<(STensorSample, Vec<DMatrix<f64>>)> {
    let geom = f.geometry();
    let jets = f.jets(x)?;
    let s = s_from_jacobian(geom, &jets.jacobian, x);
    let dl = jets.lagrange_derivative(geom);
    let d = geom.dim();
    let ds = (0..d)
        .map(|nu| {
            let mut m = DMatrix::zeros(d, d);
            for b in 0..d {
                for i in 0..geom.n {
                    m[(geom.q(i), b)] = dl[nu][(b, geom.p(i))];
                    m[(geom.p(i), b)] = -dl[nu][(b, geom.q(i))];
                }
                if let Some(z) = geom.z() {
                    let mut acc = 0.0;
                    for i in 0..geom.n {
                        acc += x[geom.p(i)] * m[(geom.q(i), b)];
                        if nu == geom.p(i) {
                            acc += s.matrix[(geom.q(i), b)];
                        }
                    }
                    m[(z, b)] = acc;
                }
            }
            m
        })
        .collect();
    Ok((s, ds))
}

fn check_kmax(kmax: usize) -> Result<()> {
    if kmax == 0 || kmax > MAX_KMAX {
        return Err(Error::InvalidArgument(format!("kmax must be in 1..={MAX_KMAX}, got {kmax}")));
    }
    Ok(())
}

/// `tr(M^k)` for k = 1..=kmax by repeated multiplication.
pub fn matrix_trace_powers(m: &DMatrix<f64>, kmax: usize) -> Vec<f64> {
    let mut power = m.clone();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if k > 1 {
            power = &power * m;
        }
        out.push(power.trace());
    }
    out
}

/// `tr(S^k)`, k = 1..=kmax, of the full S.
pub fn trace_powers(f: &TransformMap, x: &[f64], kmax: usize) -> Result<Vec<f64>> {
    check_kmax(kmax)?;
    Ok(matrix_trace_powers(&s_tensor(f, x)?.matrix, kmax))
}

/// Traces of powers of the `(q, p)` block of S.
pub fn leaf_trace_powers(f: &TransformMap, x: &[f64], kmax: usize) -> Result<Vec<f64>> {
    check_kmax(kmax)?;
    Ok(matrix_trace_powers(&s_tensor(f, x)?.x_block(f.geometry()), kmax))
}

fn matmul<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let m = a.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    let mut acc = T::from_f64(0.0);
                    for k in 0..m {
                        acc = acc + a[r][k].clone() * b[k][c].clone();
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Leaf traces `tr(S_x^k)`, k = 1..=kmax, with their gradients over the full
/// chart, obtained by carrying duals through the Lagrange brackets.
fn leaf_trace_jets(geom: &Geometry, jets: &MapJets, x: &[f64], kmax: usize) -> Vec<(f64, Vec<f64>)> {
    let d = geom.dim();
    let l = lagrange_generic(geom, &jets.jacobian_duals());
    let s = assemble(geom, &l, &Dual::seed(x));
    let xs = geom.x_indices();
    let sx: Vec<Vec<Dual>> = xs.iter().map(|&a| xs.iter().map(|&b| s[a][b].clone()).collect()).collect();
    let mut power = sx.clone();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if k > 1 {
            power = matmul(&power, &sx);
        }
        let mut tr = Dual::constant(0.0);
        for (a, row) in power.iter().enumerate() {
            tr = tr + row[a].clone();
        }
        out.push((tr.value, tr.gradient(d)));
    }
    out
}

/// Nijenhuis torsion `N^λ_{βγ}` on the `(q, p)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionSample {
    /// Size of the block (2n).
    pub m: usize,
    /// Row-major `[λ][β][γ]`.
    pub components: Vec<f64>,
}

impl TorsionSample {
    pub fn get(&self, lambda: usize, beta: usize, gamma: usize) -> f64 {
        self.components[(lambda * self.m + beta) * self.m + gamma]
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn torsion_from(geom: &Geometry, s: &DMatrix<f64>, ds: &[DMatrix<f64>]) -> TorsionSample {
    let xs = geom.x_indices();
    let m = xs.len();
    let mut components = vec![0.0; m * m * m];
    for l in 0..m {
        for b in 0..m {
            for g in 0..m {
                let (xl, xb, xg) = (xs[l], xs[b], xs[g]);
                let mut acc = 0.0;
                for &xn in &xs {
                    acc += ds[xn][(xl, xg)] * s[(xn, xb)] - ds[xn][(xl, xb)] * s[(xn, xg)]
                        + (ds[xg][(xn, xb)] - ds[xb][(xn, xg)]) * s[(xl, xn)];
                }
                components[(l * m + b) * m + g] = acc;
            }
        }
    }
    TorsionSample { m, components }
}

pub fn nijenhuis_torsion(f: &TransformMap, x: &[f64]) -> Result<TorsionSample> {
    let (s, ds) = s_tensor_with_derivative(f, x)?;
    Ok(torsion_from(f.geometry(), &s.matrix, &ds))
}

/// `‖LHS − RHS‖∞` of the trace identity on the `(q, p)` block,
///
/// `N^λ_{βγ} (S^{k−1})^γ_λ = (1/k) S^α_β ∂_α tr(S^k) − (1/(k+1)) ∂_β tr(S^{k+1})`.
///
/// The left side uses the torsion and explicit matrix powers, the right side
/// dual-number gradients of the traces.
pub fn lenard_identity_residual(f: &TransformMap, x: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k + 1 > MAX_KMAX {
        return Err(Error::InvalidArgument(format!("k must be in 1..{MAX_KMAX}, got {k}")));
    }
    let geom = f.geometry();
    let jets = f.jets(x)?;
    let s = s_from_jacobian(geom, &jets.jacobian, x).matrix;
    let d = geom.dim();
    let dl = jets.lagrange_derivative(geom);
    let mut ds = Vec::with_capacity(d);
    for layer in dl.iter() {
        let mut m = DMatrix::zeros(d, d);
        for b in 0..d {
            for i in 0..geom.n {
                m[(geom.q(i), b)] = layer[(b, geom.p(i))];
                m[(geom.p(i), b)] = -layer[(b, geom.q(i))];
            }
        }
        ds.push(m);
    }
    let torsion = torsion_from(geom, &s, &ds);
    let xs = geom.x_indices();
    let m = xs.len();
    let sx = DMatrix::from_fn(m, m, |a, b| s[(xs[a], xs[b])]);
    let mut power = DMatrix::identity(m, m);
    for _ in 1..k {
        power = &power * &sx;
    }
    let traces = leaf_trace_jets(geom, &jets, x, k + 1);
    let (gk, gk1) = (&traces[k - 1].1, &traces[k].1);
    let mut worst = 0.0_f64;
    for b in 0..m {
        let mut lhs = 0.0;
        for l in 0..m {
            for g in 0..m {
                lhs += torsion.get(l, b, g) * power[(g, l)];
            }
        }
        let contracted: f64 = (0..m).map(|a| sx[(a, b)] * gk[xs[a]]).sum();
        let rhs = contracted / k as f64 - gk1[xs[b]] / (k + 1) as f64;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Pairwise brackets of the leaf traces over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct InvolutionReport {
    /// `max |{tr S^i, tr S^j}|` with the canonical Poisson matrix.
    pub unbarred: DMatrix<f64>,
    /// Same with the pulled-back Poisson matrix; `None` if every sample was singular.
    pub barred: Option<DMatrix<f64>>,
    /// Samples skipped for the barred variant because the Lagrange block was singular.
    pub skipped: usize,
    /// Largest 2-norm condition number of the Lagrange block over the used samples.
    pub max_condition: f64,
    /// Largest numerical rank of the trace gradients (informational).
    pub trace_gradient_rank: usize,
}

const SINGULAR_CONDITION: f64 = 1e12;

/// `{f, g} = ε^{μν} ∂_μ g ∂_ν f` with a given Poisson matrix on the block.
fn bracket_with(p: &DMatrix<f64>, df: &[f64], dg: &[f64]) -> f64 {
    let m = df.len();
    let mut acc = 0.0;
    for mu in 0..m {
        for nu in 0..m {
            acc += p[(mu, nu)] * dg[mu] * df[nu];
        }
    }
    acc
}

/// Canonical Poisson matrix `ε^{μν}` on the block: `ε^{q p} = −1`.
pub fn canonical_poisson(n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        e[(i, n + i)] = -1.0;
        e[(n + i, i)] = 1.0;
    }
    e
}

pub fn involution_matrix(f: &TransformMap, samples: &[Vec<f64>], kmax: usize) -> Result<InvolutionReport> {
    check_kmax(kmax)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let geom = f.geometry();
    let xs = geom.x_indices();
    let eps = canonical_poisson(geom.n);
    let mut unbarred = DMatrix::zeros(kmax, kmax);
    let mut barred = DMatrix::zeros(kmax, kmax);
    let (mut skipped, mut max_condition, mut rank) = (0, 0.0_f64, 0);
    for x in samples {
        let jets = f.jets(x)?;
        let grads: Vec<Vec<f64>> = leaf_trace_jets(geom, &jets, x, kmax)
            .into_iter()
            .map(|(_, g)| xs.iter().map(|&a| g[a]).collect())
            .collect();
        let gm = DMatrix::from_fn(kmax, xs.len(), |r, c| grads[r][c]);
        let scale = gm.amax().max(1.0);
        rank = rank.max(gm.rank(1e-9 * scale));

        let l = lagrange_from_jacobian(geom, &jets.jacobian);
        let lx = DMatrix::from_fn(xs.len(), xs.len(), |a, b| l[(xs[a], xs[b])]);
        let pulled = pulled_back_poisson(&lx);
        if let Some((_, cond)) = &pulled {
            max_condition = max_condition.max(*cond);
        } else {
            skipped += 1;
        }
        for i in 0..kmax {
            for j in 0..kmax {
                let u = bracket_with(&eps, &grads[i], &grads[j]).abs();
                unbarred[(i, j)] = f64::max(unbarred[(i, j)], u);
                if let Some((p, _)) = &pulled {
                    let b = bracket_with(p, &grads[i], &grads[j]).abs();
                    barred[(i, j)] = f64::max(barred[(i, j)], b);
                }
            }
        }
    }
    let barred = (skipped < samples.len()).then_some(barred);
    Ok(InvolutionReport { unbarred, barred, skipped, max_condition, trace_gradient_rank: rank })
}

/// Inverse of the Lagrange block and its condition number, or `None` when singular.
fn pulled_back_poisson(lx: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let sv = lx.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin == 0.0 || smax / smin > SINGULAR_CONDITION {
        return None;
    }
    let inv = lx.clone().lu().try_inverse()?;
    Some((inv, smax / smin))
}

/// The pulled-back Poisson matrix `ε̄` on the block at `x`.
pub fn barred_poisson(f: &TransformMap, x: &[f64]) -> Result<DMatrix<f64>> {
    let geom = f.geometry();
    let xs = geom.x_indices();
    let l = f.lagrange_brackets(x)?.entries;
    let lx = DMatrix::from_fn(xs.len(), xs.len(), |a, b| l[(xs[a], xs[b])]);
    pulled_back_poisson(&lx).map(|(p, _)| p).ok_or(Error::SingularPullback { point: x.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(geom: Geometry, sources: &[&str]) -> TransformMap {
        TransformMap::parse(geom, sources).unwrap()
    }

    /// Central-difference derivative of S along coordinate `nu`.
    fn fd_ds(f: &TransformMap, x: &[f64], nu: usize) -> DMatrix<f64> {
        let h = 1e-5;
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[nu] += h;
        xm[nu] -= h;
        (s_tensor(f, &xp).unwrap().matrix - s_tensor(f, &xm).unwrap().matrix) / (2.0 * h)
    }

    #[test]
    fn identity_examples() {
        let s = s_tensor(&TransformMap::identity(Geometry::symplectic(2)), &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(s.matrix, DMatrix::identity(4, 4));
        let t = trace_powers(&TransformMap::identity(Geometry::symplectic(2)), &[0.0; 4], 5).unwrap();
        assert_eq!(t, vec![4.0; 5]);

        let g = Geometry::cosymplectic(1);
        let s = s_tensor(&TransformMap::identity(g), &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(s.matrix, DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 0.0]));
        assert_eq!(s.row_constraints, vec![RowConstraint::Free, RowConstraint::Free, RowConstraint::Zero]);

        let g = Geometry::contact(1);
        let s = s_tensor(&TransformMap::identity(g), &[0.1, 0.7, 0.3]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.7, 0.0, 0.0]);
        assert_eq!(s.matrix, expected);
    }

    #[test]
    fn cubic_and_scaling_examples() {
        let f = map(Geometry::symplectic(1), &["q1", "p1^3/3"]);
        let s = s_tensor(&f, &[0.3, 2.0]).unwrap();
        assert_eq!(s.matrix, DMatrix::identity(2, 2) * 4.0);
        assert_eq!(trace_powers(&f, &[0.3, 2.0], 2).unwrap(), vec![8.0, 32.0]);

        let c = map(Geometry::contact(1), &["q1", "2*p1", "2*z"]);
        let p = -0.8;
        let s = s_tensor(&c, &[0.5, p, 1.1]).unwrap().matrix;
        assert_eq!(s.fixed_view::<2, 2>(0, 0), nalgebra::Matrix2::identity() * 2.0);
        assert_eq!((s[(2, 0)], s[(2, 1)], s[(2, 2)]), (2.0 * p, 0.0, 0.0));
        assert_eq!((s[(0, 2)], s[(1, 2)]), (0.0, 0.0));
        assert_eq!(s.trace(), 4.0);
    }

    #[test]
    fn trace_inequality_for_2x2() {
        let f = map(Geometry::symplectic(1), &["q1", "p1^3/3"]);
        let t = trace_powers(&f, &[0.1, 1.7], 2).unwrap();
        assert!((t[1] - t[0] * t[0] / 2.0).abs() < 1e-12);
        let g = map(Geometry::symplectic(1), &["q1 + p1^2", "p1 + q1^3/3"]);
        let t = trace_powers(&g, &[0.4, 0.9], 2).unwrap();
        assert!(t[1] >= t[0] * t[0] / 2.0 - 1e-12);
    }

    #[test]
    fn kmax_bounds() {
        let f = TransformMap::identity(Geometry::symplectic(1));
        assert!(trace_powers(&f, &[0.0; 2], 0).is_err());
        assert!(trace_powers(&f, &[0.0; 2], 11).is_err());
        assert!(trace_powers(&f, &[0.0; 2], 10).is_ok());
        assert!(lenard_identity_residual(&f, &[0.0; 2], 10).is_err());
    }

    #[test]
    fn reconstruction_round_trip() {
        for (geom, src) in [
            (Geometry::symplectic(1), vec!["q1 + 0.3*p1^2", "p1*exp(0.2*q1)"]),
            (Geometry::cosymplectic(1), vec!["q1*(1 + t^2)", "p1 + sin(t)", "t"]),
            (Geometry::contact(1), vec!["q1 + z^2", "p1*(2 + q1^2)", "z*3 + q1"]),
            (Geometry::cocontact(1), vec!["t", "q1 + 0.1*t*z", "p1 + z", "2*z + p1"]),
        ] {
            let f = map(geom, &src);
            let x: Vec<f64> = (0..geom.dim()).map(|i| 0.3 + 0.17 * i as f64).collect();
            let s = s_tensor(&f, &x).unwrap().matrix;
            let l = f.lagrange_brackets(&x).unwrap().entries;
            let omega = geom.structure_at(&x).unwrap().two_form;
            for b in 0..geom.dim() {
                for c in geom.x_indices() {
                    let recon: f64 = geom.x_indices().iter().map(|&a| omega[(a, c)] * s[(a, b)]).sum();
                    assert!((recon - l[(b, c)]).abs() < 1e-12, "{geom:?} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let g = Geometry::cocontact(1);
        let f = map(g, &["t", "q1 + 0.1*t*z + p1^2", "p1 + z*q1", "2*z + p1*q1"]);
        let x = [0.2, 0.5, -0.3, 0.7];
        let (_, ds) = s_tensor_with_derivative(&f, &x).unwrap();
        for (nu, d) in ds.iter().enumerate() {
            assert!((d - fd_ds(&f, &x, nu)).amax() < 1e-7, "nu = {nu}");
        }
    }

    #[test]
    fn torsion_vanishes_for_conformal_and_linear_maps() {
        let f = map(Geometry::symplectic(1), &["q1", "p1^3/3"]);
        assert!(nijenhuis_torsion(&f, &[0.4, 1.3]).unwrap().max_abs() < 1e-14);
        let lin = map(Geometry::symplectic(2), &["q1 + 2*p2", "q2 - p1", "3*p1 + q2", "p2 + q1"]);
        assert_eq!(nijenhuis_torsion(&lin, &[0.1, 0.2, 0.3, 0.4]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn torsion_matches_finite_difference_oracle() {
        let g = Geometry::symplectic(2);
        let f = map(g, &["q1 + p2^2", "q2*exp(0.3*p1)", "p1 + q2^2/2", "p2 + sin(q1)"]);
        let x = [0.3, -0.4, 0.6, 0.2];
        let s = s_tensor(&f, &x).unwrap().matrix;
        let ds: Vec<_> = (0..4).map(|nu| fd_ds(&f, &x, nu)).collect();
        let mut max_oracle = 0.0_f64;
        let t = nijenhuis_torsion(&f, &x).unwrap();
        for l in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let mut v = 0.0;
                    for nu in 0..4 {
                        v += ds[nu][(l, c)] * s[(nu, b)] - ds[nu][(l, b)] * s[(nu, c)]
                            + (ds[c][(nu, b)] - ds[b][(nu, c)]) * s[(l, nu)];
                    }
                    max_oracle = max_oracle.max(v.abs());
                    assert!((t.get(l, b, c) - v).abs() < 1e-6);
                    assert_eq!(t.get(l, b, c), -t.get(l, c, b));
                }
            }
        }
        assert!(max_oracle > 1e-3);
    }

    #[test]
    fn lenard_identity_holds() {
        let g = Geometry::symplectic(2);
        let f = map(g, &["q1 + p2^2", "q2*exp(0.3*p1)", "p1 + q2^2/2", "p2 + sin(q1)"]);
        for k in 1..=4 {
            assert!(lenard_identity_residual(&f, &[0.3, -0.4, 0.6, 0.2], k).unwrap() < 1e-10);
        }
        let id = TransformMap::identity(Geometry::contact(1));
        assert_eq!(lenard_identity_residual(&id, &[0.3, -0.4, 0.6], 2).unwrap(), 0.0);
    }

    #[test]
    fn trace_jets_match_finite_differences() {
        let g = Geometry::contact(1);
        let f = map(g, &["q1 + z^2", "p1*(2 + q1^2)", "z*3 + q1"]);
        let x = [0.3, 0.8, -0.2];
        let jets = f.jets(&x).unwrap();
        let tj = leaf_trace_jets(&g, &jets, &x, 3);
        for nu in 0..3 {
            let h = 1e-6;
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[nu] += h;
            xm[nu] -= h;
            let (tp, tm) = (leaf_trace_powers(&f, &xp, 3).unwrap(), leaf_trace_powers(&f, &xm, 3).unwrap());
            for k in 0..3 {
                assert!(((tp[k] - tm[k]) / (2.0 * h) - tj[k].1[nu]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn involution_examples() {
        let g = Geometry::symplectic(1);
        let samples = vec![vec![0.2, 0.7], vec![-1.0, 1.5], vec![0.5, -2.0]];
        let f = map(g, &["q1", "p1^3/3"]);
        let r = involution_matrix(&f, &samples, 3).unwrap();
        assert_eq!(r.unbarred.amax(), 0.0);
        assert_eq!(r.barred.unwrap().amax(), 0.0);
        assert_eq!((r.skipped, r.trace_gradient_rank), (0, 1));

        let lin = map(g, &["2*q1 + p1", "q1 + p1"]);
        let r = involution_matrix(&lin, &samples, 2).unwrap();
        assert!(r.unbarred.amax() < 1e-10);
        assert_eq!(r.trace_gradient_rank, 0);
    }

    #[test]
    fn barred_poisson_identity_is_canonical() {
        let f = TransformMap::identity(Geometry::cosymplectic(2));
        assert_eq!(barred_poisson(&f, &[0.0; 5]).unwrap(), canonical_poisson(2));
        // the t-dependent factor makes the q-p block singular at t = 0
        let s = map(Geometry::cosymplectic(1), &["q1", "t*p1 + q1", "t"]);
        assert!(matches!(
            barred_poisson(&s, &[1.0, 1.0, 0.0]),
            Err(Error::SingularJacobian { .. } | Error::SingularPullback { .. })
        ));
    }
}

//! Integration of the equations of motion, conservation drift statistics and
//! the Lie derivative of S along the dynamics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{dynamical_vf_jacobian, evolution_vf, Geometry};
use crate::stensor::{canonical_poisson, s_tensor_with_derivative};
use crate::transform::{candidate_k_gradient, TransformMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step Runge–Kutta.
    #[default]
    Rk4,
    /// Dormand–Prince 5(4) with adaptive sub-steps between the output times.
    Rk45,
}

pub const RK45_RTOL: f64 = 1e-10;
const RK45_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub geometry: Geometry,
    pub hamiltonian: Expression,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Integrates the dynamical field (E_H on time-dependent kinds, X_H otherwise)
/// over `t_span` with `steps` uniform output steps.
///
/// On time-dependent kinds the t-coordinate of `x0` is replaced by `t_span.0`
/// and every stored state carries its exact output time.
pub fn integrate(
    geom: &Geometry,
    h: &Expression,
    x0: &[f64],
    t_span: (f64, f64),
    steps: usize,
    method: Method,
) -> Result<Trajectory> {
    geom.check_point(x0)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidArgument(format!("invalid t_span [{t0}, {t1}]")));
    }
    let dt = (t1 - t0) / steps as f64;
    let field = |y: &[f64]| evolution_vf(geom, h, y);
    let mut y = x0.to_vec();
    if let Some(t) = geom.t() {
        y[t] = t0;
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(y.clone());
    for i in 1..=steps {
        let (ta, tb) = (t0 + (i - 1) as f64 * dt, t0 + i as f64 * dt);
        y = match method {
            Method::Rk4 => rk4_step(&field, &y, tb - ta)?,
            Method::Rk45 => dopri_advance(&field, &y, ta, tb)?,
        };
        if let Some(t) = geom.t() {
            y[t] = tb;
        }
        times.push(tb);
        states.push(y.clone());
    }
    Ok(Trajectory { geometry: *geom, hamiltonian: h.clone(), times, states })
}

fn axpy(y: &[f64], h: f64, k: &[&[f64]], c: &[f64]) -> Vec<f64> {
    (0..y.len()).map(|i| y[i] + h * k.iter().zip(c).map(|(ki, ci)| ci * ki[i]).sum::<f64>()).collect()
}

fn rk4_step<F: Fn(&[f64]) -> Result<Vec<f64>>>(field: &F, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = field(y)?;
    let k2 = field(&axpy(y, h / 2.0, &[&k1], &[1.0]))?;
    let k3 = field(&axpy(y, h / 2.0, &[&k2], &[1.0]))?;
    let k4 = field(&axpy(y, h, &[&k3], &[1.0]))?;
    Ok(axpy(y, h / 6.0, &[&k1, &k2, &k3, &k4], &[1.0, 2.0, 2.0, 1.0]))
}

const DP_A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Advances from `ta` to exactly `tb` with adaptive Dormand–Prince steps.
fn dopri_advance<F: Fn(&[f64]) -> Result<Vec<f64>>>(field: &F, y0: &[f64], ta: f64, tb: f64) -> Result<Vec<f64>> {
    let mut y = y0.to_vec();
    let mut t = ta;
    let mut h = tb - ta;
    let min_step = 1e-14 * tb.abs().max(1.0);
    while t < tb {
        h = h.min(tb - t);
        if h < min_step && tb - t > min_step {
            return Err(Error::StepFailure { t });
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for a in DP_A.iter() {
            let ks: Vec<&[f64]> = k.iter().map(Vec::as_slice).collect();
            let ys = axpy(&y, h, &ks, a);
            k.push(field(&ys)?);
        }
        let ks: Vec<&[f64]> = k.iter().map(Vec::as_slice).collect();
        let y5 = axpy(&y, h, &ks, &DP_B5);
        let y4 = axpy(&y, h, &ks, &DP_B4);
        let err = (0..y.len())
            .map(|i| (y5[i] - y4[i]).abs() / (RK45_ATOL + RK45_RTOL * y[i].abs().max(y5[i].abs())))
            .fold(0.0, f64::max);
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t = if tb - t <= h { tb } else { t + h };
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(y)
}

/// Conservation statistics of one observable along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDrift {
    pub name: String,
    pub initial: f64,
    /// `max |f(t) − f(0)|`.
    pub max_abs_drift: f64,
    /// `max_abs_drift / max(|f(0)|, 1)`.
    pub max_rel_drift: f64,
    /// Least-squares slope of `f(t)` against t.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub observables: Vec<ObservableDrift>,
}

/// A named function of a chart point.
pub type Observable<'a> = (String, Box<dyn Fn(&[f64]) -> Result<f64> + 'a>);

/// Values of each observable at every stored state, in observable order.
pub fn observe(traj: &Trajectory, observables: &[Observable<'_>]) -> Result<Vec<Vec<f64>>> {
    observables.iter().map(|(_, f)| traj.states.iter().map(|x| f(x)).collect()).collect()
}

pub fn drift_report(traj: &Trajectory, observables: &[Observable<'_>]) -> Result<DriftReport> {
    if traj.states.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let series = observe(traj, observables)?;
    Ok(DriftReport {
        observables: observables
            .iter()
            .zip(&series)
            .map(|((name, _), values)| drift_of(name, &traj.times, values))
            .collect(),
    })
}

pub(crate) fn drift_of(name: &str, times: &[f64], values: &[f64]) -> ObservableDrift {
    let initial = values[0];
    let max_abs_drift = values.iter().map(|v| (v - initial).abs()).fold(0.0, f64::max);
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let vm = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in times.iter().zip(values) {
        sxy += (t - tm) * (v - vm);
        sxx += (t - tm) * (t - tm);
    }
    ObservableDrift {
        name: name.to_string(),
        initial,
        max_abs_drift,
        max_rel_drift: max_abs_drift / initial.abs().max(1.0),
        slope: if sxx > 0.0 { sxy / sxx } else { 0.0 },
    }
}

/// `(L_V S)^A_B = V^ν ∂_ν S^A_B − S^ν_B ∂_ν V^A + S^A_ν ∂_B V^ν` with V the
/// dynamical field (E_H or X_H).
pub fn lie_derivative_s(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<DMatrix<f64>> {
    let geom = f.geometry();
    let (s, ds) = s_tensor_with_derivative(f, x)?;
    let (v, dv) = dynamical_vf_jacobian(geom, h, x)?;
    let s = s.matrix;
    let d = geom.dim();
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut acc = 0.0;
            for nu in 0..d {
                acc += v[nu] * ds[nu][(a, b)] - s[(nu, b)] * dv[(a, nu)] + s[(a, nu)] * dv[(nu, b)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// The cosymplectic form of `L_{E_H} S` for a canonoid pair: only the dt column
/// is non-zero, with `A^α_t = ε^{να} ∂²K/∂x^ν∂t`.
pub fn expected_cosymplectic_lie_derivative(f: &TransformMap, h: &Expression, x: &[f64]) -> Result<DMatrix<f64>> {
    let geom = f.geometry();
    let t = geom
        .t()
        .filter(|_| !geom.is_contact_like())
        .ok_or(Error::WrongGeometry { op: "expected_cosymplectic_lie_derivative", kind: geom.kind })?;
    let mixed = candidate_k_gradient(f, h, x)?.time_mixed.expect("cosymplectic has a t-coordinate");
    let eps = canonical_poisson(geom.n);
    let xs = geom.x_indices();
    let mut out = DMatrix::zeros(geom.dim(), geom.dim());
    for (a, &xa) in xs.iter().enumerate() {
        out[(xa, t)] = (0..xs.len()).map(|nu| eps[(nu, a)] * mixed[nu]).sum();
    }
    Ok(out)
}

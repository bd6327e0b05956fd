//! Experiment configuration files (JSON, `"schema": 1`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::Method;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Geometry, GeometryKind};
use crate::stensor::MAX_KMAX;
use crate::transform::TransformMap;

pub const SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_SAMPLE_COUNT: usize = 200;
pub const DEFAULT_KMAX: usize = 4;

/// Checks in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Canonical,
    Canonoid,
    Traces,
    Torsion,
    Lenard,
    Involution,
    LieDerivative,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Canonical,
        Check::Canonoid,
        Check::Traces,
        Check::Torsion,
        Check::Lenard,
        Check::Involution,
        Check::LieDerivative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Canonical => "canonical",
            Check::Canonoid => "canonoid",
            Check::Traces => "traces",
            Check::Torsion => "torsion",
            Check::Lenard => "lenard",
            Check::Involution => "involution",
            Check::LieDerivative => "lie_derivative",
        }
    }

    fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Pointwise checks that need no trajectory.
    pub fn is_structural(self) -> bool {
        self != Check::Traces
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub canonical: f64,
    pub canonoid: f64,
    pub drift: f64,
    pub torsion: f64,
    pub lenard: f64,
    pub involution: f64,
    pub lie_derivative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            canonical: 1e-8,
            canonoid: 1e-8,
            drift: 1e-7,
            torsion: 1e-10,
            lenard: 1e-8,
            involution: 1e-8,
            lie_derivative: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub x0: Vec<f64>,
    pub t_span: (f64, f64),
    pub steps: usize,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub geometry: Geometry,
    pub hamiltonian: Expression,
    pub transform: TransformMap,
    /// Per chart coordinate, in chart order.
    pub sample_box: Vec<(f64, f64)>,
    pub sample_count: usize,
    pub seed: u64,
    /// Requested checks, deduplicated and in execution order.
    pub checks: Vec<Check>,
    pub kmax: usize,
    pub trajectory: Option<TrajectoryConfig>,
    pub tolerances: Tolerances,
}

fn err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| err(join(path, key), "missing required field"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| err(path, "expected a finite number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| err(path, "expected a string"))
}

fn reject_unknown(obj: &Map<String, Value>, path: &str, known: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(err(join(path, k), "unknown field")),
        None => Ok(()),
    }
}

fn pair(v: &Value, path: &str) -> Result<(f64, f64)> {
    match v.as_array().map(Vec::as_slice) {
        Some([a, b]) => Ok((as_f64(a, &format!("{path}[0]"))?, as_f64(b, &format!("{path}[1]"))?)),
        _ => Err(err(path, "expected a two-element array")),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let root = as_object(value, "")?;
        reject_unknown(
            root,
            "",
            &[
                "schema",
                "name",
                "geometry",
                "hamiltonian",
                "transform",
                "sample_box",
                "sample_count",
                "seed",
                "checks",
                "kmax",
                "trajectory",
                "tolerances",
            ],
        )?;
        let schema = field(root, "", "schema")?.as_u64().ok_or_else(|| err("schema", "expected an integer"))?;
        if schema != SCHEMA_VERSION {
            return Err(err("schema", format!("unsupported schema {schema}, expected {SCHEMA_VERSION}")));
        }
        let name = root.get("name").map(|v| as_str(v, "name").map(str::to_string)).transpose()?;

        let g = as_object(field(root, "", "geometry")?, "geometry")?;
        reject_unknown(g, "geometry", &["kind", "n"])?;
        let kind: GeometryKind = serde_json::from_value(field(g, "geometry", "kind")?.clone())
            .map_err(|_| err("geometry.kind", "expected symplectic, cosymplectic, contact or cocontact"))?;
        let n = as_usize(field(g, "geometry", "n")?, "geometry.n")?;
        let geometry = Geometry::new(kind, n).map_err(|e| err("geometry.n", e.to_string()))?;
        let chart = geometry.coordinate_names();

        let hamiltonian = Expression::parse(as_str(field(root, "", "hamiltonian")?, "hamiltonian")?, &chart)
            .map_err(|e| err("hamiltonian", e.to_string()))?;

        let tmap = as_object(field(root, "", "transform")?, "transform")?;
        let targets = geometry.target_names();
        reject_unknown(tmap, "transform", &targets.iter().map(String::as_str).collect::<Vec<_>>())?;
        let mut components = Vec::with_capacity(targets.len());
        for target in &targets {
            let path = format!("transform.{target}");
            let src = as_str(field(tmap, "transform", target)?, &path)?;
            components.push(Expression::parse(src, &chart).map_err(|e| err(&path, e.to_string()))?);
        }
        let transform = TransformMap::new(geometry, components).map_err(|e| err("transform", e.to_string()))?;

        let sb = as_object(field(root, "", "sample_box")?, "sample_box")?;
        reject_unknown(sb, "sample_box", &chart.iter().map(String::as_str).collect::<Vec<_>>())?;
        let mut sample_box = Vec::with_capacity(chart.len());
        for c in &chart {
            let path = format!("sample_box.{c}");
            let (lo, hi) = pair(field(sb, "sample_box", c)?, &path)?;
            if lo > hi {
                return Err(err(path, "lower bound exceeds upper bound"));
            }
            sample_box.push((lo, hi));
        }

        let sample_count = match root.get("sample_count") {
            Some(v) => as_usize(v, "sample_count")?,
            None => DEFAULT_SAMPLE_COUNT,
        };
        if sample_count == 0 {
            return Err(err("sample_count", "must be positive"));
        }
        let seed = field(root, "", "seed")?.as_u64().ok_or_else(|| err("seed", "expected a non-negative integer"))?;

        let checks = match root.get("checks") {
            None => Check::ALL.to_vec(),
            Some(v) => {
                let arr = v.as_array().ok_or_else(|| err("checks", "expected an array"))?;
                let mut set = BTreeSet::new();
                for (i, c) in arr.iter().enumerate() {
                    let path = format!("checks[{i}]");
                    let name = as_str(c, &path)?;
                    set.insert(Check::from_name(name).ok_or_else(|| err(&path, format!("unknown check `{name}`")))?);
                }
                set.into_iter().collect()
            }
        };

        let kmax = match root.get("kmax") {
            Some(v) => as_usize(v, "kmax")?,
            None => DEFAULT_KMAX,
        };
        if kmax == 0 || kmax > MAX_KMAX {
            return Err(err("kmax", format!("must be in 1..={MAX_KMAX}")));
        }

        let trajectory = root.get("trajectory").map(|v| trajectory(v, &geometry)).transpose()?;
        if trajectory.is_none() && checks.contains(&Check::Traces) {
            return Err(err("trajectory", "required by the traces check"));
        }

        let mut tolerances = Tolerances::default();
        if let Some(v) = root.get("tolerances") {
            let t = as_object(v, "tolerances")?;
            let known = ["canonical", "canonoid", "drift", "torsion", "lenard", "involution", "lie_derivative"];
            reject_unknown(t, "tolerances", &known)?;
            for (k, v) in t {
                let path = format!("tolerances.{k}");
                let x = as_f64(v, &path)?;
                if x <= 0.0 {
                    return Err(err(path, "must be positive"));
                }
                *tolerances.slot(k) = x;
            }
        }

        Ok(ExperimentConfig {
            name,
            geometry,
            hamiltonian,
            transform,
            sample_box,
            sample_count,
            seed,
            checks,
            kmax,
            trajectory,
            tolerances,
        })
    }
}

impl Tolerances {
    fn slot(&mut self, key: &str) -> &mut f64 {
        match key {
            "canonical" => &mut self.canonical,
            "canonoid" => &mut self.canonoid,
            "drift" => &mut self.drift,
            "torsion" => &mut self.torsion,
            "lenard" => &mut self.lenard,
            "involution" => &mut self.involution,
            _ => &mut self.lie_derivative,
        }
    }

    /// Replaces the pointwise residual tolerances (canonical, canonoid,
    /// lenard, lie_derivative) by `tol`.
    pub fn override_residual(&mut self, tol: f64) {
        self.canonical = tol;
        self.canonoid = tol;
        self.lenard = tol;
        self.lie_derivative = tol;
    }
}

fn trajectory(v: &Value, geometry: &Geometry) -> Result<TrajectoryConfig> {
    let obj = as_object(v, "trajectory")?;
    reject_unknown(obj, "trajectory", &["x0", "t_span", "steps", "method"])?;
    let chart = geometry.coordinate_names();
    let x0map = as_object(field(obj, "trajectory", "x0")?, "trajectory.x0")?;
    reject_unknown(x0map, "trajectory.x0", &chart.iter().map(String::as_str).collect::<Vec<_>>())?;
    let mut x0 = vec![0.0; chart.len()];
    for (i, c) in chart.iter().enumerate() {
        let path = format!("trajectory.x0.{c}");
        match x0map.get(c) {
            Some(v) => x0[i] = as_f64(v, &path)?,
            // t is taken from t_span
            None if Some(i) == geometry.t() => {}
            None => return Err(err(path, "missing required field")),
        }
    }
    let t_span = pair(field(obj, "trajectory", "t_span")?, "trajectory.t_span")?;
    if t_span.1 <= t_span.0 {
        return Err(err("trajectory.t_span", "end must exceed start"));
    }
    let steps = as_usize(field(obj, "trajectory", "steps")?, "trajectory.steps")?;
    if steps == 0 {
        return Err(err("trajectory.steps", "must be positive"));
    }
    let method = match obj.get("method") {
        None => Method::default(),
        Some(v) => match as_str(v, "trajectory.method")? {
            "rk4" => Method::Rk4,
            "rk45" | "rk45-adaptive" => Method::Rk45,
            other => return Err(err("trajectory.method", format!("unknown method `{other}`"))),
        },
    };
    Ok(TrajectoryConfig { x0, t_span, steps, method })
}

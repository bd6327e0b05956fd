//! Batch front end: load an experiment configuration, run the requested
//! checks and integrations, and write JSON reports and CSV time series.
//!
//! Output files in the output directory:
//!
//! | command      | files                                                  |
//! |--------------|--------------------------------------------------------|
//! | `check`      | `check.json`                                           |
//! | `integrate`  | `integrate.json`, `trajectory.csv`                     |
//! | `invariants` | `invariants.json`, `invariants.csv`                    |
//! | `report`     | `report.json` merged from the three above              |
//! | `run`        | `report.json`, `trajectory.csv`, `invariants.csv`      |
//!
//! Every JSON file has a `.meta.json` sidecar holding the wall-clock time, so
//! the reports themselves are byte-identical across repeated runs.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use serde_json::{json, Value};

use crate::dynamics::{drift_of, expected_cosymplectic_lie_derivative, integrate, lie_derivative_s, Trajectory};
use crate::geometry::GeometryKind;
use crate::sampling::sample_box;
use crate::stensor::{
    involution_matrix, lenard_identity_residual, matrix_trace_powers, nijenhuis_torsion, s_tensor, MAX_KMAX,
};
use crate::transform::{check_canonical, check_canonoid, CanonoidVerdict};
use config::{Check, ExperimentConfig, SCHEMA_VERSION};
use report::{csv, sha256_hex, CheckResult, Provenance, Report, Verdict};

pub const TOOL: &str = "canonoid";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line values that take precedence over the configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub kmax: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Integrate,
    Invariants,
    Report,
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Integrate => "integrate",
            Command::Invariants => "invariants",
            Command::Report => "report",
            Command::Run => "run",
        }
    }
}

/// A validated configuration with its sample points.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub samples: Vec<Vec<f64>>,
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl Experiment {
    pub fn from_json(text: &str, overrides: Overrides) -> crate::Result<Self> {
        let mut config = ExperimentConfig::from_json(text)?;
        if let Some(k) = overrides.kmax {
            if k == 0 || k > MAX_KMAX {
                return Err(crate::Error::Config {
                    path: "--kmax".into(),
                    message: format!("must be in 1..={MAX_KMAX}"),
                });
            }
            config.kmax = k;
        }
        if let Some(tol) = overrides.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(crate::Error::Config { path: "--tol".into(), message: "must be positive".into() });
            }
            config.tolerances.override_residual(tol);
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        let samples = sample_box(&config.sample_box, config.sample_count, config.seed);
        Ok(Experiment { config, config_sha256: sha256_hex(text.as_bytes()), samples })
    }

    pub fn load(path: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::from_json(&text, overrides)?)
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            tool: TOOL.into(),
            version: VERSION.into(),
            schema: SCHEMA_VERSION,
            config_sha256: self.config_sha256.clone(),
            seed: self.config.seed,
            sample_count: self.config.sample_count,
            kmax: self.config.kmax,
        }
    }

    fn summary(&self) -> Value {
        let c = &self.config;
        let g = c.geometry;
        let transform: serde_json::Map<String, Value> = g
            .target_names()
            .into_iter()
            .zip(c.transform.components())
            .map(|(t, e)| (t, Value::String(e.to_string())))
            .collect();
        json!({
            "name": c.name,
            "geometry": {"kind": g.kind, "n": g.n},
            "chart": g.coordinate_names(),
            "hamiltonian": c.hamiltonian.to_string(),
            "transform": transform,
            "checks": c.checks,
            "tolerances": c.tolerances,
            "trajectory": c.trajectory.as_ref().map(|t| json!({
                "x0": t.x0, "t_span": [t.t_span.0, t.t_span.1], "steps": t.steps, "method": t.method,
            })),
        })
    }

    fn report(
        &self,
        command: Command,
        checks: Vec<CheckResult>,
        drift: Vec<crate::dynamics::ObservableDrift>,
    ) -> Report {
        Report {
            provenance: self.provenance(),
            command: command.name().into(),
            experiment: self.summary(),
            verdict: Report::overall(&checks),
            checks,
            drift,
            notes: self.notes(),
        }
    }

    fn notes(&self) -> Vec<String> {
        let g = self.config.geometry;
        let mut notes = vec!["verdicts hold on the sampled region only".to_string()];
        if !g.is_contact_like() {
            notes.push(
                "K is recovered by line integrals from the first sample; the chart is assumed star-shaped around it"
                    .into(),
            );
        }
        if g.kind == GeometryKind::Cosymplectic {
            notes.push("K is fixed up to a function of t by the gauge K(base, t) = 0".into());
        }
        if g.is_time_dependent() {
            notes.push("torsion, Lenard and involution checks use the (q, p) block of S".into());
        }
        if g.kind == GeometryKind::Cocontact {
            notes.push("the lie_derivative check excludes the dt column".into());
        }
        notes
    }

    fn canonoid(&self) -> anyhow::Result<CanonoidVerdict> {
        let c = &self.config;
        check_canonoid(&c.transform, &c.hamiltonian, &self.samples, c.tolerances.canonoid).context("check `canonoid`")
    }

    fn torsion_max(&self) -> anyhow::Result<f64> {
        let mut worst = 0.0_f64;
        for x in &self.samples {
            worst = worst.max(nijenhuis_torsion(&self.config.transform, x).context("check `torsion`")?.max_abs());
        }
        Ok(worst)
    }

    /// All requested pointwise checks, in execution order.
    pub fn structural_checks(&self) -> anyhow::Result<Vec<CheckResult>> {
        let c = &self.config;
        let tol = c.tolerances;
        let (f, h) = (&c.transform, &c.hamiltonian);
        let needs_canonoid = c.checks.iter().any(|k| matches!(k, Check::Canonoid | Check::LieDerivative));
        let canonoid = if needs_canonoid { Some(self.canonoid()?) } else { None };
        let needs_torsion = c.checks.iter().any(|k| matches!(k, Check::Torsion | Check::Involution));
        let torsion = if needs_torsion { Some(self.torsion_max()?) } else { None };
        let mut out = Vec::new();
        for &check in c.checks.iter().filter(|k| k.is_structural()) {
            let result = match check {
                Check::Canonical => {
                    let v = check_canonical(f, &self.samples, tol.canonical).context("check `canonical`")?;
                    CheckResult {
                        check,
                        verdict: verdict(v.canonical),
                        residual: v.max_residual,
                        tolerance: tol.canonical,
                        details: json!({"worst_point": v.worst_point}),
                    }
                }
                Check::Canonoid => {
                    let v = canonoid.as_ref().expect("computed above");
                    let probe: Vec<Value> = v
                        .k_probe
                        .iter()
                        .take(10)
                        .map(|s| {
                            let hv = h.value(&s.point).ok();
                            json!({"point": s.point, "K": s.k, "H": hv})
                        })
                        .collect();
                    CheckResult {
                        check,
                        verdict: verdict(v.canonoid),
                        residual: v.max_residual,
                        tolerance: tol.canonoid,
                        details: json!({
                            "worst_point": v.worst_point,
                            "k_probe": probe,
                            "k_base_point": (!c.geometry.is_contact_like()).then(|| self.samples[0].clone()),
                            "time_mixing": v.time_mixing,
                        }),
                    }
                }
                Check::Traces => unreachable!("filtered out"),
                Check::Torsion => {
                    let t = torsion.expect("computed above");
                    CheckResult {
                        check,
                        verdict: verdict(t < tol.torsion),
                        residual: t,
                        tolerance: tol.torsion,
                        details: json!({}),
                    }
                }
                Check::Lenard => {
                    let kmax = c.kmax.min(MAX_KMAX - 1);
                    let mut per_k = vec![0.0_f64; kmax];
                    for x in &self.samples {
                        for (k, slot) in per_k.iter_mut().enumerate() {
                            let r = lenard_identity_residual(f, x, k + 1).context("check `lenard`")?;
                            *slot = slot.max(r);
                        }
                    }
                    let worst = per_k.iter().copied().fold(0.0, f64::max);
                    CheckResult {
                        check,
                        verdict: verdict(worst < tol.lenard),
                        residual: worst,
                        tolerance: tol.lenard,
                        details: json!({"per_k": per_k}),
                    }
                }
                Check::Involution => {
                    let r = involution_matrix(f, &self.samples, c.kmax).context("check `involution`")?;
                    let ub = r.unbarred.amax();
                    let bb = r.barred.as_ref().map_or(0.0, |m| m.amax());
                    let residual = ub.max(bb);
                    let torsion_max = torsion.expect("computed above");
                    let torsion_free = torsion_max < tol.torsion;
                    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
                        m.row_iter().map(|r| r.iter().copied().collect()).collect()
                    };
                    CheckResult {
                        check,
                        verdict: if torsion_free { verdict(residual < tol.involution) } else { Verdict::NotApplicable },
                        residual,
                        tolerance: tol.involution,
                        details: json!({
                            "unbarred": rows(&r.unbarred),
                            "barred": r.barred.as_ref().map(rows),
                            "skipped_points": r.skipped,
                            "max_condition": r.max_condition,
                            "trace_gradient_rank": r.trace_gradient_rank,
                            "torsion_max": torsion_max,
                        }),
                    }
                }
                Check::LieDerivative => {
                    let mut worst = 0.0_f64;
                    for x in &self.samples {
                        let lie = lie_derivative_s(f, h, x).context("check `lie_derivative`")?;
                        let diff = match c.geometry.kind {
                            GeometryKind::Cosymplectic => {
                                lie - expected_cosymplectic_lie_derivative(f, h, x).context("check `lie_derivative`")?
                            }
                            GeometryKind::Cocontact => {
                                let mut m = lie;
                                m.column_mut(c.geometry.t().expect("cocontact has t")).fill(0.0);
                                m
                            }
                            _ => lie,
                        };
                        worst = worst.max(diff.amax());
                    }
                    let is_canonoid = canonoid.as_ref().expect("computed above").canonoid;
                    CheckResult {
                        check,
                        verdict: if is_canonoid { verdict(worst < tol.lie_derivative) } else { Verdict::NotApplicable },
                        residual: worst,
                        tolerance: tol.lie_derivative,
                        details: json!({}),
                    }
                }
            };
            out.push(result);
        }
        Ok(out)
    }

    pub fn trajectory(&self) -> anyhow::Result<Trajectory> {
        let c = &self.config;
        let Some(t) = &c.trajectory else {
            bail!(crate::Error::Config { path: "trajectory".into(), message: "missing required field".into() });
        };
        integrate(&c.geometry, &c.hamiltonian, &t.x0, t.t_span, t.steps, t.method).context("integration")
    }

    /// Columns `trS1..trSk` of the full S along the trajectory.
    pub fn trace_series(&self, traj: &Trajectory) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
        let k = self.config.kmax;
        let mut cols = vec![Vec::with_capacity(traj.states.len()); k];
        for x in &traj.states {
            let s = s_tensor(&self.config.transform, x).context("check `traces`")?;
            for (col, v) in cols.iter_mut().zip(matrix_trace_powers(&s.matrix, k)) {
                col.push(v);
            }
        }
        Ok(((1..=k).map(|i| format!("trS{i}")).collect(), cols))
    }

    fn h_series(&self, traj: &Trajectory) -> anyhow::Result<Vec<f64>> {
        let h = &self.config.hamiltonian;
        traj.states.iter().map(|x| Ok(h.value(x)?)).collect()
    }

    /// Largest `|R(H)|` over the samples for the Reeb field(s); zero means H is good.
    fn reeb_derivative_of_h(&self) -> anyhow::Result<Option<f64>> {
        let g = self.config.geometry;
        let Some(z) = g.z() else { return Ok(None) };
        let mut worst = 0.0_f64;
        for x in &self.samples {
            let grad = self.config.hamiltonian.gradient(x)?;
            worst = worst.max(grad[z].abs());
            if let Some(t) = g.t() {
                worst = worst.max(grad[t].abs());
            }
        }
        Ok(Some(worst))
    }

    fn traces_check(
        &self,
        traj: &Trajectory,
        columns: &[String],
        series: &[Vec<f64>],
        canonoid: Option<bool>,
    ) -> anyhow::Result<(CheckResult, Vec<crate::dynamics::ObservableDrift>)> {
        let tol = self.config.tolerances;
        let mut drift: Vec<_> = columns.iter().zip(series).map(|(n, v)| drift_of(n, &traj.times, v)).collect();
        let mut residual = drift.iter().map(|d| d.max_rel_drift).fold(0.0, f64::max);
        let h = drift_of("H", &traj.times, &self.h_series(traj)?);
        let reeb_h = self.reeb_derivative_of_h()?;
        let good = reeb_h.map(|r| r < tol.canonoid);
        if good == Some(true) {
            residual = residual.max(h.max_rel_drift);
        }
        drift.push(h);
        let verdict = match canonoid {
            Some(false) => Verdict::NotApplicable,
            _ => verdict(residual < tol.drift),
        };
        let result = CheckResult {
            check: Check::Traces,
            verdict,
            residual,
            tolerance: tol.drift,
            details: json!({"good_hamiltonian": good, "max_reeb_derivative_of_h": reeb_h}),
        };
        Ok((result, drift))
    }
}

fn write_json(out: &Path, name: &str, report: &Report) -> anyhow::Result<()> {
    let path = out.join(format!("{name}.json"));
    std::fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let meta = json!({"generated_unix_seconds": secs, "report": format!("{name}.json")});
    std::fs::write(out.join(format!("{name}.meta.json")), format!("{meta:#}\n"))?;
    Ok(())
}

fn write_text(out: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = out.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Executes one command and writes its outputs into `out`.
pub fn execute(command: Command, config: Option<&Path>, out: &Path, overrides: Overrides) -> anyhow::Result<Report> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if command == Command::Report {
        let report = merge_reports(out)?;
        write_json(out, "report", &report)?;
        return Ok(report);
    }
    let Some(config) = config else { bail!("--config is required for `{}`", command.name()) };
    let exp = Experiment::load(config, overrides)?;
    let report = match command {
        Command::Check => {
            let r = exp.report(command, exp.structural_checks()?, vec![]);
            write_json(out, "check", &r)?;
            r
        }
        Command::Integrate => {
            let traj = exp.trajectory()?;
            let mut cols: Vec<String> = exp.config.geometry.coordinate_names();
            let mut values: Vec<Vec<f64>> =
                (0..cols.len()).map(|i| traj.states.iter().map(|x| x[i]).collect()).collect();
            let h = exp.h_series(&traj)?;
            let drift = vec![drift_of("H", &traj.times, &h)];
            cols.push("H".into());
            values.push(h);
            write_text(out, "trajectory.csv", &csv(&cols, &traj.times, &values))?;
            let r = exp.report(command, vec![], drift);
            write_json(out, "integrate", &r)?;
            r
        }
        Command::Invariants => {
            let traj = exp.trajectory()?;
            let (cols, series) = exp.trace_series(&traj)?;
            write_text(out, "invariants.csv", &csv(&cols, &traj.times, &series))?;
            let canonoid = exp.config.checks.contains(&Check::Canonoid).then(|| exp.canonoid()).transpose()?;
            let (check, drift) = exp.traces_check(&traj, &cols, &series, canonoid.map(|v| v.canonoid))?;
            let r = exp.report(command, vec![check], drift);
            write_json(out, "invariants", &r)?;
            r
        }
        Command::Run => {
            let mut checks = exp.structural_checks()?;
            let mut drift = vec![];
            if exp.config.trajectory.is_some() {
                let traj = exp.trajectory()?;
                let coords = exp.config.geometry.coordinate_names();
                let mut values: Vec<Vec<f64>> =
                    (0..coords.len()).map(|i| traj.states.iter().map(|x| x[i]).collect()).collect();
                let mut cols = coords;
                cols.push("H".into());
                values.push(exp.h_series(&traj)?);
                write_text(out, "trajectory.csv", &csv(&cols, &traj.times, &values))?;
                let (tcols, series) = exp.trace_series(&traj)?;
                write_text(out, "invariants.csv", &csv(&tcols, &traj.times, &series))?;
                if exp.config.checks.contains(&Check::Traces) {
                    let canonoid =
                        checks.iter().find(|c| c.check == Check::Canonoid).map(|c| c.verdict == Verdict::Pass);
                    let (check, d) = exp.traces_check(&traj, &tcols, &series, canonoid)?;
                    checks.push(check);
                    checks.sort_by_key(|c| c.check);
                    drift = d;
                } else {
                    drift = vec![drift_of("H", &traj.times, &values[values.len() - 1])];
                }
            }
            let r = exp.report(command, checks, drift);
            write_json(out, "report", &r)?;
            r
        }
        Command::Report => unreachable!("handled above"),
    };
    Ok(report)
}

/// The `run` operation: every requested check plus the trajectory outputs.
pub fn run(config: &Path, out: &Path) -> anyhow::Result<Report> {
    execute(Command::Run, Some(config), out, Overrides::default())
}

/// Merges `check.json`, `integrate.json` and `invariants.json` from `out`.
pub fn merge_reports(out: &Path) -> anyhow::Result<Report> {
    let mut parts = Vec::new();
    for name in ["check", "integrate", "invariants"] {
        let path: PathBuf = out.join(format!("{name}.json"));
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let r: Report = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            parts.push(r);
        }
    }
    let Some(first) = parts.first().cloned() else {
        bail!("no check.json, integrate.json or invariants.json in {}", out.display());
    };
    let mut checks: Vec<CheckResult> = Vec::new();
    let mut drift = Vec::new();
    for p in &parts {
        if p.provenance != first.provenance {
            bail!("`{}` output was produced from a different configuration or seed", p.command);
        }
        for c in &p.checks {
            if !checks.iter().any(|e| e.check == c.check) {
                checks.push(c.clone());
            }
        }
        for d in &p.drift {
            if !drift.iter().any(|e: &crate::dynamics::ObservableDrift| e.name == d.name) {
                drift.push(d.clone());
            }
        }
    }
    checks.sort_by_key(|c| c.check);
    Ok(Report {
        provenance: first.provenance.clone(),
        command: Command::Report.name().into(),
        experiment: first.experiment.clone(),
        verdict: Report::overall(&checks),
        checks,
        drift,
        notes: first.notes.clone(),
    })
}

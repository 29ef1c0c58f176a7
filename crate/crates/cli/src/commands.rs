//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use l1h_core::approx::{approximate_normalized, Approximant, Approximation, PipelineOptions};
use l1h_core::functions::{normalize, NormalizedProblem};
use l1h_core::hobbyrice::{solve_canonical_points_with, verify_uniqueness, SolverOptions};
use l1h_core::verify::{default_oracle_grid, l1_error, verify, VerifyOptions};
use l1h_core::Error;
use serde_json::{json, Map, Value};

use crate::job::{Action, JobSpec};
use crate::output::{to_csv, Row};

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub oracle_grid: Option<usize>,
    pub perturb: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub approximant: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Exit code of a finished command.
pub const OK: i32 = 0;
pub const SOLVER: i32 = 2;
pub const PIPELINE: i32 = 3;
pub const OPTIMALITY: i32 = 4;

pub struct Outcome {
    pub value: Value,
    pub code: i32,
}

pub fn error_json(e: &Error) -> Value {
    json!({
        "error": {
            "code": e.code(),
            "kind": if e.is_solver_error() { "solver" } else { "pipeline" },
            "message": e.to_string(),
        }
    })
}

pub fn error_code(e: &Error) -> i32 {
    if e.is_solver_error() {
        SOLVER
    } else {
        PIPELINE
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

struct Job<'a> {
    spec: &'a JobSpec,
    settings: &'a Settings,
    problem: NormalizedProblem,
    approximation: Option<Approximation>,
}

impl<'a> Job<'a> {
    fn new(spec: &'a JobSpec, settings: &'a Settings) -> Result<Self, Failure> {
        let f = spec.function.build()?;
        Ok(Self {
            spec,
            settings,
            problem: normalize(&f)?,
            approximation: None,
        })
    }

    fn solver_options(&self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Some(seed) = self.settings.seed.or(self.spec.seed) {
            opts.seed = seed;
        }
        opts
    }

    fn approximation(&mut self) -> Result<&Approximation, Failure> {
        if self.approximation.is_none() {
            let space = Arc::new(self.spec.space.build()?);
            let opts = PipelineOptions {
                solver: self.solver_options(),
                ..PipelineOptions::default()
            };
            self.approximation = Some(approximate_normalized(self.problem.clone(), space, &opts)?);
        }
        Ok(self.approximation.as_ref().expect("set above"))
    }

    fn canonical(&self) -> Result<Value, Failure> {
        let space = self.spec.space.build()?;
        let measure = self.problem.measure();
        let solution = solve_canonical_points_with(&space, measure, None, &self.solver_options())?;
        let transform = self.problem.transform();
        let full = solution.points.full_points();
        let mut out = json!({
            "space": to_value(&self.spec.space),
            "measure": measure.label(),
            "points": full,
            "points_original": full.iter().map(|t| transform.to_original(*t)).collect::<Vec<_>>(),
            "residual_inf_norm": solution.residual_inf_norm,
            "iterations": solution.iterations,
            "attempts": solution.attempts,
        });
        if let Some(trials) = self.settings.trials {
            let seed = self.settings.seed.or(self.spec.seed).unwrap_or(0);
            let report = verify_uniqueness(&space, measure, &solution.points, trials, seed)?;
            out["uniqueness"] = to_value(&report);
        }
        Ok(out)
    }

    fn approximate(&mut self) -> Result<Value, Failure> {
        let function = to_value(&self.spec.function);
        let space_spec = to_value(&self.spec.space);
        let a = self.approximation()?;
        let l1 = l1_error(&a.problem, &a.approximant)?;
        let transform = a.problem.transform();
        let points = a
            .approximant
            .canonical_points()
            .map(|p| p.full_points())
            .unwrap_or_default();
        Ok(json!({
            "function": function,
            "space": space_spec,
            "labels": a.approximant.space().labels(),
            "coefficients": a.approximant.coefficients(),
            "canonical_points": points,
            "canonical_points_original": points.iter().map(|t| transform.to_original(*t)).collect::<Vec<_>>(),
            "sign_changes": a.diagnostics.sign_changes,
            "flags": to_value(&a.diagnostics.flags),
            "l1_error": l1,
            "l1_error_original": l1 * a.problem.original_l1_factor(),
            "diagnostics": to_value(&a.diagnostics),
        }))
    }

    /// Candidate for `verify`: a saved approximant or a fresh pipeline run.
    fn candidate(&mut self) -> Result<Approximant, Failure> {
        match &self.settings.approximant {
            Some(path) => load_approximant(path, self.spec, &self.problem),
            None => Ok(self.approximation()?.approximant.clone()),
        }
    }

    fn verify(&mut self) -> Result<Outcome, Failure> {
        let mut g = self.candidate()?;
        if let Some(eps) = self.settings.perturb {
            let shifted = g.coefficients().iter().map(|c| c + eps).collect();
            g = g.with_coefficients(&self.problem, shifted)?;
        }
        let n = g.space().dimension();
        let oracle_grid = self
            .settings
            .oracle_grid
            .or(self.spec.oracle_grid)
            .or(self.settings.perturb.map(|_| default_oracle_grid(n)));
        let opts = VerifyOptions {
            oracle_grid,
            ..VerifyOptions::default()
        };
        let report = verify(&self.problem, &g, &opts)?;
        let code = if report.is_failure() { OPTIMALITY } else { OK };
        let mut value = to_value(&report);
        if let Value::Object(map) = &mut value {
            map.insert("coefficients".into(), json!(g.coefficients()));
            map.insert("perturb".into(), json!(self.settings.perturb));
        }
        Ok(Outcome { value, code })
    }

    fn sample(&mut self, path: &Path) -> Result<Value, Failure> {
        let resolution = self.spec.sample_resolution;
        let a = self.approximation()?;
        let rows = sample_rows(a, resolution);
        fs::write(path, to_csv(&rows))
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(json!({ "csv": path.display().to_string(), "rows": rows.len() }))
    }
}

/// Uniform samples of the original domain plus canonical points, knots and
/// the jump, in original coordinates.
fn sample_rows(a: &Approximation, resolution: usize) -> Vec<Row> {
    let problem = &a.problem;
    let original = problem.original();
    let transform = problem.transform();
    let (lo, hi) = original.domain();
    let mut xs: Vec<f64> = (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
        .collect();
    if let Some(p) = a.approximant.canonical_points() {
        xs.extend(p.full_points().iter().map(|t| transform.to_original(*t)));
    }
    xs.extend(a.approximant.space().breakpoints().iter().map(|t| transform.to_original(*t)));
    xs.push(original.jump_location());
    xs.retain(|x| *x >= lo && *x <= hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| Row {
            x,
            f: original.eval(x).unwrap_or(f64::NAN),
            g: a.approximant.eval_original(problem, x),
        })
        .collect()
}

fn load_approximant(path: &Path, spec: &JobSpec, problem: &NormalizedProblem) -> Result<Approximant, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid approximant {}: {e}", path.display())))?;
    // a `run` output nests the approximation under its action name
    let value = value.get("approximate").cloned().unwrap_or(value);
    if let Some(space) = value.get("space") {
        if *space != to_value(&spec.space) {
            return Err(Failure::Usage(format!("approximant {} was computed in a different space", path.display())));
        }
    }
    let coefficients: Vec<f64> = value
        .get("coefficients")
        .and_then(|c| serde_json::from_value(c.clone()).ok())
        .ok_or_else(|| Failure::Usage(format!("approximant {} has no coefficient array", path.display())))?;
    let space = Arc::new(spec.space.build()?);
    Ok(Approximant::from_coefficients(problem, space, coefficients, None)?)
}

fn csv_path(spec: &JobSpec, settings: &Settings) -> Option<PathBuf> {
    settings.csv.clone().or_else(|| spec.outputs.csv.clone())
}

pub fn canonical(spec: &JobSpec, settings: &Settings) -> Result<Outcome, Failure> {
    let job = Job::new(spec, settings)?;
    Ok(Outcome {
        value: job.canonical()?,
        code: OK,
    })
}

pub fn approximate(spec: &JobSpec, settings: &Settings) -> Result<Outcome, Failure> {
    let mut job = Job::new(spec, settings)?;
    let mut value = job.approximate()?;
    if let Some(path) = csv_path(spec, settings) {
        value["sample"] = job.sample(&path)?;
    }
    Ok(Outcome { value, code: OK })
}

pub fn verify_cmd(spec: &JobSpec, settings: &Settings) -> Result<Outcome, Failure> {
    Job::new(spec, settings)?.verify()
}

/// Runs the job's actions in order; the first error aborts the run.
pub fn run(spec: &JobSpec, settings: &Settings) -> Result<Outcome, Failure> {
    let mut job = Job::new(spec, settings)?;
    let mut map = Map::new();
    let mut code = OK;
    for action in &spec.actions {
        let (key, value) = match action {
            Action::Canonical => ("canonical", job.canonical()?),
            Action::Approximate => ("approximate", job.approximate()?),
            Action::Verify => {
                let outcome = job.verify()?;
                code = code.max(outcome.code);
                ("verify", outcome.value)
            }
            Action::Sample => {
                let path = csv_path(spec, settings)
                    .ok_or_else(|| Failure::Usage("the sample action needs a CSV path (--csv or outputs.csv)".into()))?;
                ("sample", job.sample(&path)?)
            }
        };
        map.insert(key.into(), value);
    }
    Ok(Outcome {
        value: Value::Object(map),
        code,
    })
}

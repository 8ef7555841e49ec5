use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::expectation::{build_backend, probe_states, unit_pairs, mean_and_error, BackendConfig, BackendKind};
use crate::mesh::{MeshKind, Partition};
use crate::problem::{DriverKind, FbsdeProblem};
use crate::schemes::{error_metric, run_scheme, IndexError, SchemeKind, SchemeOptions};

use super::report::{ConvergenceReport, ReportRow};

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `Y_0` at `x0` for drivers with a closed reduction: `f ≡ 0` gives
/// `E[Φ(X_T)]`, `f = κ y` gives `e^{κT} E[Φ(X_T)]`. Paths are simulated with
/// exact transitions along `partition`.
pub fn nested_mc_oracle(problem: &FbsdeProblem, partition: &Partition, paths: usize, seed: u64) -> Result<McEstimate> {
    let discount = match problem.driver_kind() {
        DriverKind::Zero => 1.0,
        DriverKind::LinearInY { kappa } => (kappa * problem.horizon).exp(),
        DriverKind::General => {
            return Err(BsdeError::UnsupportedProblem(format!(
                "{}: Monte Carlo oracle handles zero and linear-in-y drivers only",
                problem.name
            )))
        }
    };
    if paths < 10_000 {
        return Err(BsdeError::InvalidArgument(format!("at least 10000 paths required, got {paths}")));
    }
    let n = partition.n();
    let streams: Vec<Vec<(f64, f64)>> = (0..n).map(|i| unit_pairs(seed, i as u64, paths)).collect();
    let (value, std_error) = mean_and_error((0..paths).map(|k| {
        let mut x = problem.x0;
        for (i, draws) in streams.iter().enumerate() {
            let delta = partition.step(i + 1);
            x = problem.exact_transition(x, delta, delta.sqrt() * draws[k].0);
        }
        discount * problem.terminal(x)
    }));
    Ok(McEstimate { value, std_error })
}

/// Least-squares slope of `ln e` against `ln n`; needs at least 3 points.
pub fn fit_slope(ns: &[usize], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0 && e.is_finite())
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scheme: SchemeKind,
    pub backend: BackendKind,
    pub mesh: MeshKind,
    pub n_list: Vec<usize>,
    pub backend_config: BackendConfig,
    pub options: SchemeOptions,
    pub probes: usize,
    /// Probe band half-width in units of the terminal axis scale.
    pub probe_band: f64,
}

impl StudyConfig {
    pub fn new(scheme: SchemeKind, backend: BackendKind, mesh: MeshKind, n_list: Vec<usize>) -> Self {
        Self {
            scheme,
            backend,
            mesh,
            n_list,
            backend_config: BackendConfig::default(),
            options: SchemeOptions::default(),
            probes: 21,
            probe_band: 1.0,
        }
    }
}

/// Runs the scheme for every `n`, measures the error against the closed-form
/// reference and fits the rate of `sqrt(metric)`. Rows within 10x of the
/// backend floor are left out of the fit and listed in the report.
pub fn convergence_study(problem: &FbsdeProblem, config: &StudyConfig) -> Result<ConvergenceReport> {
    let mut ns = config.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(BsdeError::InvalidArgument("a convergence study needs at least 3 distinct n".into()));
    }
    if !problem.has_reference() {
        return Err(BsdeError::UnsupportedProblem(format!("{} has no closed-form reference", problem.name)));
    }
    let reference = |t: f64, x: f64| problem.reference(t, x).unwrap();
    let probes = probe_states(problem, config.probes, config.probe_band);
    let mut rows = Vec::with_capacity(ns.len());
    let mut per_index: Vec<(usize, Vec<IndexError>)> = Vec::with_capacity(ns.len());
    let mut floor = 0.0;
    for &n in &ns {
        let start = Instant::now();
        let partition = config.mesh.build(n, problem.horizon)?;
        let backend = build_backend(config.backend, problem, &partition, &config.backend_config)?;
        floor = backend.floor();
        let fields = run_scheme(config.scheme, problem, backend.as_ref(), &config.options)?;
        let summary = error_metric(&fields, backend.as_ref(), &reference, &probes);
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(ReportRow {
            problem: problem.name.clone(),
            scheme: config.scheme.label().to_string(),
            backend: config.backend.label().to_string(),
            mesh: config.mesh.label().to_string(),
            beta: config.mesh.beta().unwrap_or(1.0),
            n,
            err_y: summary.err_y,
            err_z: summary.err_z,
            metric_t2: summary.metric_t2,
            runtime_ms,
        });
        per_index.push((n, summary.per_index));
    }
    let (kept, excluded): (Vec<&ReportRow>, Vec<&ReportRow>) =
        rows.iter().partition(|r| r.metric_t2.sqrt() > 10.0 * floor);
    let fitted_slope = fit_slope(
        &kept.iter().map(|r| r.n).collect::<Vec<_>>(),
        &kept.iter().map(|r| r.metric_t2.sqrt()).collect::<Vec<_>>(),
    );
    let excluded_n = excluded.iter().map(|r| r.n).collect();
    Ok(ConvergenceReport {
        rows,
        fitted_slope,
        excluded_n,
        per_index,
        config_echo: serde_json::json!({
            "problem": problem.name,
            "params": problem.params.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect::<serde_json::Map<_, _>>(),
            "study": config,
        }),
    })
}

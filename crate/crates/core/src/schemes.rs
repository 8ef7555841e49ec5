//! Backward Euler and the Crank–Nicolson/𝒵-weight second-order scheme.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::expectation::{grid_quadrature_step, integrate, BackendKind, ConditionalExpectation, NextSlice, NormalRule};
use crate::mesh::Partition;
use crate::problem::{FbsdeProblem, Smoothness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Euler,
    Cn2,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Cn2 => "cn2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchemeKind {
    type Err = BsdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(SchemeKind::Euler),
            "cn2" => Ok(SchemeKind::Cn2),
            other => Err(BsdeError::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalMode {
    /// Follow the problem's smoothness class.
    Auto,
    C1,
    C2,
}

impl FromStr for TerminalMode {
    type Err = BsdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(TerminalMode::Auto),
            "c1" => Ok(TerminalMode::C1),
            "c2" => Ok(TerminalMode::C2),
            other => Err(BsdeError::InvalidArgument(format!("unknown terminal mode '{other}'"))),
        }
    }
}

impl TerminalMode {
    pub fn label(self) -> &'static str {
        match self {
            TerminalMode::Auto => "auto",
            TerminalMode::C1 => "c1",
            TerminalMode::C2 => "c2",
        }
    }

    pub fn resolve(self, problem: &FbsdeProblem) -> TerminalMode {
        match self {
            TerminalMode::Auto => match problem.smoothness() {
                Smoothness::C1Lipschitz => TerminalMode::C1,
                Smoothness::C2Smooth => TerminalMode::C2,
            },
            m => m,
        }
    }
}

/// Time weight of the driver inside `Ψ_{i+1} = y_{i+1} + w f_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiWeight {
    /// `w = δ/2`, the scheme as stated.
    Half,
    /// `w = δ`, which cancels the first-order term of the trapezoid remainder against `𝒵`.
    Full,
}

impl PsiWeight {
    pub fn factor(self) -> f64 {
        match self {
            PsiWeight::Half => 0.5,
            PsiWeight::Full => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PsiWeight::Half => "half",
            PsiWeight::Full => "full",
        }
    }
}

impl FromStr for PsiWeight {
    type Err = BsdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(PsiWeight::Half),
            "full" => Ok(PsiWeight::Full),
            other => Err(BsdeError::InvalidArgument(format!("unknown psi weight '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub terminal_mode: TerminalMode,
    pub psi_weight: PsiWeight,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self { fp_tol: 1e-12, fp_max_iter: 50, terminal_mode: TerminalMode::Auto, psi_weight: PsiWeight::Half }
    }
}

/// `y_i`, `z_i` on the backend's representative states at every level.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFields {
    pub scheme: SchemeKind,
    pub backend: BackendKind,
    pub terminal_mode: TerminalMode,
    pub partition: Partition,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

type Driver<'a> = dyn Fn(f64, f64, f64, f64) -> f64 + 'a;

/// Picard iteration for `y = c + θδ f(t, x, y, z)` started at `c`.
#[allow(clippy::too_many_arguments)]
pub fn implicit_solve(
    c: f64,
    z: f64,
    t: f64,
    x: f64,
    f: &Driver<'_>,
    theta_delta: f64,
    lipschitz: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let contraction = theta_delta * lipschitz;
    if contraction >= 1.0 {
        return Err(BsdeError::StepSize { index: 0, contraction });
    }
    let mut y = c;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = c + theta_delta * f(t, x, y, z);
        if !next.is_finite() {
            return Err(BsdeError::NumericalDomain(format!("implicit step diverged at x = {x}")));
        }
        residual = (next - y).abs();
        y = next;
        if residual <= tol * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    Err(BsdeError::NoConvergence { iterations: max_iter, residual })
}

fn guard(partition: &Partition, level: usize, theta: f64, lipschitz: f64) -> Result<()> {
    let contraction = theta * partition.step(level + 1) * lipschitz;
    if contraction >= 1.0 {
        return Err(BsdeError::StepSize { index: level + 1, contraction });
    }
    Ok(())
}

fn terminal_fields(problem: &FbsdeProblem, backend: &dyn ConditionalExpectation, mode: TerminalMode) -> (Vec<f64>, Vec<f64>) {
    let n = backend.partition().n();
    let xs = backend.states(n);
    let y = xs.iter().map(|&x| problem.terminal(x)).collect();
    let z = xs
        .iter()
        .map(|&x| if mode == TerminalMode::C2 { problem.terminal_z(x).unwrap_or(0.0) } else { 0.0 })
        .collect();
    (y, z)
}

/// One Euler slice: `z = E[y' ΔW]/δ`, `y = E[y'] + δ f(t_i, x, y, z)`.
fn euler_slice(
    problem: &FbsdeProblem,
    backend: &dyn ConditionalExpectation,
    level: usize,
    next_y: &[f64],
    opts: &SchemeOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let part = backend.partition();
    let n = part.n();
    guard(part, level, 1.0, problem.lipschitz())?;
    let delta = part.step(level + 1);
    let t = part.time(level);
    let phi = |x: f64| problem.terminal(x);
    let data = if level + 1 == n { NextSlice::Exact(&phi) } else { NextSlice::Values(next_y) };
    let e = backend.step(level, &[data])?;
    let drv = |t: f64, x: f64, y: f64, z: f64| problem.driver(t, x, y, z);
    let mut ys = Vec::with_capacity(e[0].len());
    let mut zs = Vec::with_capacity(e[0].len());
    for (ex, &x) in e[0].iter().zip(backend.states(level)) {
        let z = ex.euler_weighted;
        let y = implicit_solve(ex.plain, z, t, x, &drv, delta, problem.lipschitz(), opts.fp_tol, opts.fp_max_iter)?;
        ys.push(y);
        zs.push(z);
    }
    Ok((ys, zs))
}

pub fn euler_backward(
    problem: &FbsdeProblem,
    backend: &dyn ConditionalExpectation,
    opts: &SchemeOptions,
) -> Result<ValueFields> {
    let part = backend.partition().clone();
    let n = part.n();
    let mode = if problem.has_terminal_gradient() { TerminalMode::C2 } else { TerminalMode::C1 };
    let (yn, zn) = terminal_fields(problem, backend, mode);
    let mut y = vec![Vec::new(); n + 1];
    let mut z = vec![Vec::new(); n + 1];
    y[n] = yn;
    z[n] = zn;
    for i in (0..n).rev() {
        let (yi, zi) = euler_slice(problem, backend, i, &y[i + 1], opts)?;
        y[i] = yi;
        z[i] = zi;
    }
    Ok(ValueFields { scheme: SchemeKind::Euler, backend: backend.kind(), terminal_mode: mode, partition: part, y, z })
}

pub fn second_order_backward(
    problem: &FbsdeProblem,
    backend: &dyn ConditionalExpectation,
    opts: &SchemeOptions,
) -> Result<ValueFields> {
    let part = backend.partition().clone();
    let n = part.n();
    let mode = opts.terminal_mode.resolve(problem);
    match mode {
        TerminalMode::C2 if !problem.has_terminal_gradient() => {
            return Err(BsdeError::InvalidArgument("C2 initialisation needs a terminal gradient".into()));
        }
        TerminalMode::C1 if n < 2 => {
            return Err(BsdeError::InvalidArgument("C1 initialisation needs n >= 2".into()));
        }
        _ => {}
    }
    let (yn, zn) = terminal_fields(problem, backend, mode);
    let mut y = vec![Vec::new(); n + 1];
    let mut z = vec![Vec::new(); n + 1];
    y[n] = yn;
    z[n] = zn;
    let mut top = n;
    if mode == TerminalMode::C1 {
        let (yi, zi) = euler_slice(problem, backend, n - 1, &y[n], opts)?;
        y[n - 1] = yi;
        z[n - 1] = zi;
        top = n - 1;
    }
    let w = opts.psi_weight.factor();
    let drv = |t: f64, x: f64, y: f64, z: f64| problem.driver(t, x, y, z);
    let t_n = part.time(n);
    for i in (0..top).rev() {
        guard(&part, i, 0.5, problem.lipschitz())?;
        let delta = part.step(i + 1);
        let (t_i, t_next) = (part.time(i), part.time(i + 1));
        let exps = if i + 1 == n {
            let y_fn = |x: f64| problem.terminal(x);
            let f_fn = |x: f64| problem.driver(t_n, x, problem.terminal(x), problem.terminal_z(x).unwrap_or(0.0));
            let psi_fn = |x: f64| y_fn(x) + w * delta * f_fn(x);
            backend.step(i, &[NextSlice::Exact(&y_fn), NextSlice::Exact(&f_fn), NextSlice::Exact(&psi_fn)])?
        } else {
            let xs = backend.states(i + 1);
            let f_vals: Vec<f64> = xs
                .iter()
                .zip(&y[i + 1])
                .zip(&z[i + 1])
                .map(|((&x, &yv), &zv)| problem.driver(t_next, x, yv, zv))
                .collect();
            let psi: Vec<f64> = y[i + 1].iter().zip(&f_vals).map(|(&yv, &fv)| yv + w * delta * fv).collect();
            backend.step(i, &[NextSlice::Values(&y[i + 1]), NextSlice::Values(&f_vals), NextSlice::Values(&psi)])?
        };
        let xs = backend.states(i);
        let mut ys = Vec::with_capacity(xs.len());
        let mut zs = Vec::with_capacity(xs.len());
        for (k, &x) in xs.iter().enumerate() {
            let zv = exps[2][k].second_order_weighted;
            let c = exps[0][k].plain + 0.5 * delta * exps[1][k].plain;
            let yv = implicit_solve(c, zv, t_i, x, &drv, 0.5 * delta, problem.lipschitz(), opts.fp_tol, opts.fp_max_iter)?;
            ys.push(yv);
            zs.push(zv);
        }
        y[i] = ys;
        z[i] = zs;
    }
    Ok(ValueFields { scheme: SchemeKind::Cn2, backend: backend.kind(), terminal_mode: mode, partition: part, y, z })
}

pub fn run_scheme(
    scheme: SchemeKind,
    problem: &FbsdeProblem,
    backend: &dyn ConditionalExpectation,
    opts: &SchemeOptions,
) -> Result<ValueFields> {
    match scheme {
        SchemeKind::Euler => euler_backward(problem, backend, opts),
        SchemeKind::Cn2 => second_order_backward(problem, backend, opts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexError {
    pub index: usize,
    pub time: f64,
    pub err_y: f64,
    pub err_z: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// Every level `0..=n`, including those the maximum leaves out.
    pub per_index: Vec<IndexError>,
    /// Sup-norm errors and metric over levels `i <= n - 2`.
    pub err_y: f64,
    pub err_z: f64,
    pub metric_t2: f64,
}

/// `max_{i <= n-2} max_x [|ΔY|² + (δ_{i+1}/4d) |ΔZ|²]` against a reference `(u, ∇uV)`.
pub fn error_metric(
    fields: &ValueFields,
    backend: &dyn ConditionalExpectation,
    reference: &dyn Fn(f64, f64) -> (f64, f64),
    probes: &[f64],
) -> ErrorSummary {
    let part = &fields.partition;
    let n = part.n();
    let d = 1.0;
    let last = n.saturating_sub(2);
    let mut per_index = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = part.time(i);
        let delta = part.step((i + 1).min(n));
        let ys = backend.sample_field(i, &fields.y[i], probes);
        let zs = backend.sample_field(i, &fields.z[i], probes);
        let (mut ey, mut ez, mut m) = (0.0f64, 0.0f64, 0.0f64);
        for ((x, yv), (_, zv)) in ys.into_iter().zip(zs) {
            let (u, g) = reference(t, x);
            let dy = (yv - u).abs();
            let dz = (zv - g).abs();
            ey = ey.max(dy);
            ez = ez.max(dz);
            m = m.max(dy * dy + delta / (4.0 * d) * dz * dz);
        }
        per_index.push(IndexError { index: i, time: t, err_y: ey, err_z: ez, metric: m });
    }
    let head = &per_index[..=last];
    ErrorSummary {
        err_y: head.iter().map(|e| e.err_y).fold(0.0, f64::max),
        err_z: head.iter().map(|e| e.err_z).fold(0.0, f64::max),
        metric_t2: head.iter().map(|e| e.metric).fold(0.0, f64::max),
        per_index,
    }
}

fn reference_driver(problem: &FbsdeProblem) -> Result<impl Fn(f64, f64) -> f64 + '_> {
    if !problem.has_reference() {
        return Err(BsdeError::UnsupportedProblem(format!("{} has no closed-form reference", problem.name)));
    }
    Ok(move |t: f64, x: f64| {
        let (u, g) = problem.reference(t, x).unwrap();
        problem.driver(t, x, u, g)
    })
}

/// One-interval trapezoid defect `|E[∫_0^δ f̄ ds] - δ/2 (f̄(0, x0) + E[f̄(δ, X_δ)])|`
/// along the reference solution, from `x0` at time 0.
pub fn crank_nicolson_defect(problem: &FbsdeProblem, delta: f64, quad_order: usize) -> Result<f64> {
    let fbar = reference_driver(problem)?;
    let rule = NormalRule::new(quad_order)?;
    let x0 = problem.x0;
    let mean_at = |s: f64| -> f64 {
        if s == 0.0 {
            return fbar(0.0, x0);
        }
        let sd = s.sqrt();
        rule.expect(|xi| fbar(s, problem.exact_transition(x0, s, sd * xi)))
    };
    let exact = integrate(quad_order, 0.0, delta, mean_at)?;
    let trap = 0.5 * delta * (mean_at(0.0) + mean_at(delta));
    Ok((exact - trap).abs())
}

/// `|∇uV(0, x0) - E[Ψ_1 𝒵]|` with `Ψ_1 = u(δ, X_δ) + w f̄(δ, X_δ)`.
pub fn z_weight_defect(problem: &FbsdeProblem, delta: f64, psi: PsiWeight, quad_order: usize) -> Result<f64> {
    let fbar = reference_driver(problem)?;
    let w = psi.factor() * delta;
    let psi_fn = |x: f64| problem.reference(delta, x).unwrap().0 + w * fbar(delta, x);
    let e = grid_quadrature_step(problem, psi_fn, problem.x0, delta, quad_order)?;
    let (_, z_ref) = problem.reference(0.0, problem.x0).unwrap();
    Ok((z_ref - e.second_order_weighted).abs())
}

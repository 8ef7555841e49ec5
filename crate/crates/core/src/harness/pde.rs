use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::expectation::{GridFunction, NodeSet};
use crate::problem::{DriftSign, FbsdeProblem, Transition};

/// Sign of the `½ ∇V V` term selected by [`calibrate_drift_sign`].
pub const CALIBRATED_DRIFT_SIGN: DriftSign = DriftSign::Plus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    pub nodes: usize,
    pub steps: usize,
    /// Domain half-width in units of the terminal axis scale.
    pub padding: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self { nodes: 2001, steps: 4000, padding: 8.0, fp_tol: 1e-12, fp_max_iter: 50 }
    }
}

/// `u(0, ·)` and `∇u(0, ·) V` on a uniform grid in the state variable.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub u: GridFunction,
    pub z: GridFunction,
}

impl PdeSolution {
    pub fn at(&self, x: f64) -> (f64, f64) {
        (self.u.eval(x), self.z.eval(x))
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

struct Operator {
    /// Row coefficients of `A u_j = l_j u_{j-1} + c_j u_j + r_j u_{j+1}` for all nodes.
    l: Vec<f64>,
    c: Vec<f64>,
    r: Vec<f64>,
}

/// Crank–Nicolson solve of `u_t + Ṽ u_x + ½ V² u_xx + f(t, x, u, u_x V) = 0`,
/// `u(T) = Φ`, backward to `t = 0`.
///
/// The first two steps are replaced by four implicit Euler half steps to damp
/// the terminal kink. Boundary rows impose `u_xx = 0`. The semilinear term is
/// iterated to a fixed point in every step.
pub fn pde_fd_oracle(problem: &FbsdeProblem, config: &PdeConfig, sign: DriftSign) -> Result<PdeSolution> {
    let m = config.nodes;
    if m < 5 || config.steps < 2 {
        return Err(BsdeError::InvalidArgument("PDE oracle needs at least 5 nodes and 2 steps".into()));
    }
    let tr = problem.transition();
    let s = tr.axis_scale(problem.horizon);
    let a0 = tr.to_axis(problem.x0);
    let (lo, hi) = (tr.from_axis(a0 - config.padding * s), tr.from_axis(a0 + config.padding * s));
    let grid = NodeSet::uniform(lo, hi, m)?;
    let xs = grid.nodes().to_vec();
    let h = xs[1] - xs[0];
    let mut op = Operator { l: vec![0.0; m], c: vec![0.0; m], r: vec![0.0; m] };
    for j in 0..m {
        let b = 0.5 * problem.diffusion(xs[j]).powi(2);
        let a = problem.ito_drift(xs[j], sign);
        op.l[j] = b / (h * h) - a / (2.0 * h);
        op.c[j] = -2.0 * b / (h * h);
        op.r[j] = b / (h * h) + a / (2.0 * h);
    }
    let vs: Vec<f64> = xs.iter().map(|&x| problem.diffusion(x)).collect();
    let horizon = problem.horizon;
    let dt = horizon / config.steps as f64;

    let driver_terms = |t: f64, u: &[f64], out: &mut [f64]| {
        for j in 1..m - 1 {
            let zx = (u[j + 1] - u[j - 1]) / (2.0 * h) * vs[j];
            out[j] = problem.driver(t, xs[j], u[j], zx);
        }
    };

    let mut u: Vec<f64> = xs.iter().map(|&x| problem.terminal(x)).collect();
    let mut f_old = vec![0.0; m];
    let mut f_new = vec![0.0; m];
    let interior = m - 2;
    let mut lower = vec![0.0; interior];
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    let mut scratch = vec![0.0; interior];
    let mut base = vec![0.0; interior];
    let mut next = u.clone();

    // (dt, theta): implicit Euler half steps first, then Crank–Nicolson.
    let mut schedule: Vec<(f64, f64)> = vec![(0.5 * dt, 1.0); 4];
    schedule.extend(std::iter::repeat_n((dt, 0.5), config.steps - 2));
    let mut t = horizon;
    for (step_dt, theta) in schedule {
        let t_new = t - step_dt;
        driver_terms(t, &u, &mut f_old);
        // system matrix: I - θ dt A on interior rows, with u_0 = 2u_1 - u_2 and
        // u_{m-1} = 2u_{m-2} - u_{m-3} folded into the end rows
        for k in 0..interior {
            let j = k + 1;
            lower[k] = -theta * step_dt * op.l[j];
            diag[k] = 1.0 - theta * step_dt * op.c[j];
            upper[k] = -theta * step_dt * op.r[j];
            let au = op.l[j] * u[j - 1] + op.c[j] * u[j] + op.r[j] * u[j + 1];
            base[k] = u[j] + (1.0 - theta) * step_dt * (au + f_old[j]);
        }
        let l0 = lower[0];
        diag[0] += 2.0 * l0;
        upper[0] -= l0;
        lower[0] = 0.0;
        let rl = upper[interior - 1];
        diag[interior - 1] += 2.0 * rl;
        lower[interior - 1] -= rl;
        upper[interior - 1] = 0.0;

        next.copy_from_slice(&u);
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..config.fp_max_iter {
            driver_terms(t_new, &next, &mut f_new);
            for k in 0..interior {
                rhs[k] = base[k] + theta * step_dt * f_new[k + 1];
            }
            thomas(&lower, &diag, &upper, &mut rhs, &mut scratch);
            residual = 0.0;
            for k in 0..interior {
                residual = f64::max(residual, (rhs[k] - next[k + 1]).abs());
                next[k + 1] = rhs[k];
            }
            next[0] = 2.0 * next[1] - next[2];
            next[m - 1] = 2.0 * next[m - 2] - next[m - 3];
            if !residual.is_finite() {
                return Err(BsdeError::NumericalDomain("PDE oracle produced non-finite values".into()));
            }
            if residual <= config.fp_tol * (1.0 + next[1..m - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
                converged = true;
                break;
            }
            if problem.lipschitz() == 0.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(BsdeError::NoConvergence { iterations: config.fp_max_iter, residual });
        }
        std::mem::swap(&mut u, &mut next);
        t = t_new;
    }

    let mut z = vec![0.0; m];
    for j in 0..m {
        let du = if j == 0 {
            (u[1] - u[0]) / h
        } else if j == m - 1 {
            (u[m - 1] - u[m - 2]) / h
        } else {
            (u[j + 1] - u[j - 1]) / (2.0 * h)
        };
        z[j] = du * vs[j];
    }
    Ok(PdeSolution { u: GridFunction::new(grid.clone(), u)?, z: GridFunction::new(grid, z)? })
}

/// Outcome of the drift-sign calibration on driftless geometric dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCalibration {
    pub mc_value: f64,
    pub mc_std_error: f64,
    pub tolerance: f64,
    pub pde_plus: f64,
    pub pde_minus: f64,
    /// Signs whose PDE value agrees with the Monte Carlo value.
    pub accepted_plus: bool,
    pub accepted_minus: bool,
}

impl DriftCalibration {
    /// The single accepted sign, if exactly one was accepted.
    pub fn selected(&self) -> Option<DriftSign> {
        match (self.accepted_plus, self.accepted_minus) {
            (true, false) => Some(DriftSign::Plus),
            (false, true) => Some(DriftSign::Minus),
            _ => None,
        }
    }
}

/// Solves the zero-driver call problem with both candidate drifts and keeps
/// the sign matching a Monte Carlo estimate of `E[Φ(X_T)]` under the exact
/// lognormal transition, within `max(3σ, 1e-3 |mc|)`.
pub fn calibrate_drift_sign(samples: usize, seed: u64, config: &PdeConfig) -> Result<DriftCalibration> {
    let problem = crate::problem::builtin("call_lipschitz", &[("r".into(), 0.0)])?;
    let Transition::Geometric { sigma } = problem.transition() else {
        unreachable!("call_lipschitz is geometric")
    };
    let sd = problem.horizon.sqrt();
    let draws = crate::expectation::unit_pairs(seed, 0, samples);
    let (mc_value, mc_std_error) = crate::expectation::mean_and_error(
        draws.iter().map(|&(w, _)| problem.terminal(problem.x0 * (sigma * sd * w).exp())),
    );
    let tolerance = f64::max(3.0 * mc_std_error, 1e-3 * mc_value.abs());
    let pde_plus = pde_fd_oracle(&problem, config, DriftSign::Plus)?.u.eval(problem.x0);
    let pde_minus = pde_fd_oracle(&problem, config, DriftSign::Minus)?.u.eval(problem.x0);
    Ok(DriftCalibration {
        mc_value,
        mc_std_error,
        tolerance,
        pde_plus,
        pde_minus,
        accepted_plus: (pde_plus - mc_value).abs() <= tolerance,
        accepted_minus: (pde_minus - mc_value).abs() <= tolerance,
    })
}

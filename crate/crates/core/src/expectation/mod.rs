//! Conditional expectations `E_i[F]`, `E_i[F ΔW]/δ` and `E_i[F 𝒵]` over one step.
//!
//! Grid backends hold values on a fixed node set in the transition's axis
//! coordinate and integrate over the increment with Gauss–Hermite or Monte
//! Carlo points. Tree backends hold values on cubature tree nodes.

mod grid;
mod mc;
mod quadrature;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grid::{axis_nodes, probe_states, GridFunction, GridSpec, NodeSet, Stencil};
pub use mc::{mean_and_error, moment_match, unit_pairs};
pub use quadrature::{integrate, NormalRule};
pub use tree::{
    branching, cubature_paths, Branch, CubatureNode, CubaturePath, CubatureTree, DEFAULT_NODE_BUDGET,
};

use crate::error::{BsdeError, Result};
use crate::mesh::Partition;
use crate::problem::{FbsdeProblem, Transition};
use crate::strat::{pathwise_integral, MultiIndex};

/// `(E_i[F], E_i[F ΔW]/δ, E_i[F 𝒵])` for one functional at one state (`d = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepExpectations {
    pub plain: f64,
    pub euler_weighted: f64,
    pub second_order_weighted: f64,
}

/// A functional of the next-level state.
pub enum NextSlice<'a> {
    /// Values at the next level's representative states.
    Values(&'a [f64]),
    /// Closed form in the next state.
    Exact(&'a dyn Fn(f64) -> f64),
}

pub trait ConditionalExpectation {
    fn kind(&self) -> BackendKind;
    fn partition(&self) -> &Partition;
    /// Representative states at `level`.
    fn states(&self, level: usize) -> &[f64];
    /// `result[f][k]`: expectations of functional `f` from state `k` at `level`.
    fn step(&self, level: usize, functionals: &[NextSlice<'_>]) -> Result<Vec<Vec<StepExpectations>>>;
    /// `(state, value)` pairs on which a level's field is compared with a reference.
    fn sample_field(&self, level: usize, values: &[f64], probes: &[f64]) -> Vec<(f64, f64)>;
    /// Error level below which this backend's own approximations dominate.
    fn floor(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Grid,
    Cubature3,
    Cubature5,
    Mc,
}

impl BackendKind {
    pub const ALL: [BackendKind; 4] = [BackendKind::Grid, BackendKind::Cubature3, BackendKind::Cubature5, BackendKind::Mc];

    pub fn label(self) -> &'static str {
        match self {
            BackendKind::Grid => "grid",
            BackendKind::Cubature3 => "cubature3",
            BackendKind::Cubature5 => "cubature5",
            BackendKind::Mc => "mc",
        }
    }

    pub fn is_tree(self) -> bool {
        matches!(self, BackendKind::Cubature3 | BackendKind::Cubature5)
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BackendKind {
    type Err = BsdeError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| BsdeError::InvalidArgument(format!("unknown backend '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub grid: GridSpec,
    pub quad_order: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Recentre and whiten Monte Carlo increments to the exact law.
    pub moment_matching: bool,
    pub node_budget: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            quad_order: 20,
            mc_samples: 10_000,
            seed: 2024,
            moment_matching: true,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

pub fn build_backend(
    kind: BackendKind,
    problem: &FbsdeProblem,
    partition: &Partition,
    config: &BackendConfig,
) -> Result<Box<dyn ConditionalExpectation>> {
    Ok(match kind {
        BackendKind::Grid => Box::new(GridBackend::new(
            problem,
            partition,
            &config.grid,
            RuleSource::Quadrature(NormalRule::new(config.quad_order)?),
        )?),
        BackendKind::Mc => {
            if config.mc_samples < 2 {
                return Err(BsdeError::InvalidArgument("Monte Carlo backend needs at least 2 samples".into()));
            }
            Box::new(GridBackend::new(
                problem,
                partition,
                &config.grid,
                RuleSource::MonteCarlo {
                    samples: config.mc_samples,
                    seed: config.seed,
                    moment_matching: config.moment_matching,
                },
            )?)
        }
        BackendKind::Cubature3 => Box::new(TreeBackend::new(problem, partition, 3, config.node_budget)?),
        BackendKind::Cubature5 => Box::new(TreeBackend::new(problem, partition, 5, config.node_budget)?),
    })
}

#[derive(Debug, Clone, Copy)]
struct RulePoint {
    dw: f64,
    weight: f64,
    euler: f64,
    second: f64,
}

#[derive(Debug, Clone)]
pub enum RuleSource {
    Quadrature(NormalRule),
    MonteCarlo { samples: usize, seed: u64, moment_matching: bool },
}

impl RuleSource {
    fn points(&self, level: usize, delta: f64) -> Vec<RulePoint> {
        let sd = delta.sqrt();
        match self {
            // E[J | ΔW] = δ ΔW / 2, so 𝒵 collapses to ΔW / δ for endpoint functionals.
            RuleSource::Quadrature(rule) => rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&xi, &w)| {
                    let dw = sd * xi;
                    RulePoint { dw, weight: w, euler: dw / delta, second: dw / delta }
                })
                .collect(),
            RuleSource::MonteCarlo { samples, seed, moment_matching } => {
                let mut pairs = unit_pairs(*seed, level as u64, *samples);
                if *moment_matching {
                    moment_match(&mut pairs);
                }
                let w = 1.0 / *samples as f64;
                let j_scale = delta * sd;
                pairs
                    .into_iter()
                    .map(|(u, v)| {
                        let dw = sd * u;
                        let j = j_scale * v;
                        RulePoint {
                            dw,
                            weight: w,
                            euler: dw / delta,
                            second: 4.0 * dw / delta - 6.0 * j / (delta * delta),
                        }
                    })
                    .collect()
            }
        }
    }
}

fn axis_shift(tr: Transition) -> f64 {
    match tr {
        Transition::Additive => 1.0,
        Transition::Geometric { sigma } => sigma,
    }
}

/// Fixed node set shared by every level, integrated with a quadrature or sample rule.
pub struct GridBackend {
    transition: Transition,
    shift: f64,
    nodes: NodeSet,
    states: Vec<f64>,
    partition: Partition,
    rule: RuleSource,
}

impl GridBackend {
    pub fn new(problem: &FbsdeProblem, partition: &Partition, spec: &GridSpec, rule: RuleSource) -> Result<Self> {
        let nodes = axis_nodes(problem, spec)?;
        let tr = problem.transition();
        let states = nodes.nodes().iter().map(|&a| tr.from_axis(a)).collect();
        Ok(Self { transition: tr, shift: axis_shift(tr), nodes, states, partition: partition.clone(), rule })
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn grid_function(&self, values: &[f64]) -> Result<GridFunction> {
        GridFunction::new(self.nodes.clone(), values.to_vec())
    }
}

impl ConditionalExpectation for GridBackend {
    fn kind(&self) -> BackendKind {
        match self.rule {
            RuleSource::Quadrature(_) => BackendKind::Grid,
            RuleSource::MonteCarlo { .. } => BackendKind::Mc,
        }
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn states(&self, _level: usize) -> &[f64] {
        &self.states
    }

    fn step(&self, level: usize, functionals: &[NextSlice<'_>]) -> Result<Vec<Vec<StepExpectations>>> {
        let delta = self.partition.step(level + 1);
        let points = self.rule.points(level, delta);
        let need_stencil = functionals.iter().any(|f| matches!(f, NextSlice::Values(_)));
        let need_state = functionals.iter().any(|f| matches!(f, NextSlice::Exact(_)));
        let mut out = vec![vec![StepExpectations::default(); self.states.len()]; functionals.len()];
        for (k, &a) in self.nodes.nodes().iter().enumerate() {
            for pt in &points {
                let a1 = a + self.shift * pt.dw;
                let stencil = need_stencil.then(|| self.nodes.stencil(a1));
                let x1 = if need_state { self.transition.from_axis(a1) } else { 0.0 };
                for (f, slot) in functionals.iter().zip(out.iter_mut()) {
                    let v = match f {
                        NextSlice::Values(vals) => stencil.as_ref().unwrap().apply(vals),
                        NextSlice::Exact(g) => g(x1),
                    };
                    let e = &mut slot[k];
                    let wv = pt.weight * v;
                    e.plain += wv;
                    e.euler_weighted += wv * pt.euler;
                    e.second_order_weighted += wv * pt.second;
                }
            }
        }
        check_finite(&out)?;
        Ok(out)
    }

    fn sample_field(&self, _level: usize, values: &[f64], probes: &[f64]) -> Vec<(f64, f64)> {
        probes.iter().map(|&x| (x, self.nodes.eval(values, self.transition.to_axis(x)))).collect()
    }

    fn floor(&self) -> f64 {
        1e-9
    }
}

fn check_finite(out: &[Vec<StepExpectations>]) -> Result<()> {
    for e in out.iter().flatten() {
        if !(e.plain.is_finite() && e.euler_weighted.is_finite() && e.second_order_weighted.is_finite()) {
            return Err(BsdeError::NumericalDomain("non-finite conditional expectation".into()));
        }
    }
    Ok(())
}

pub struct TreeBackend {
    tree: CubatureTree,
    partition: Partition,
}

impl TreeBackend {
    pub fn new(problem: &FbsdeProblem, partition: &Partition, degree: u8, budget: usize) -> Result<Self> {
        Ok(Self { tree: CubatureTree::build(problem, partition, degree, budget)?, partition: partition.clone() })
    }

    pub fn tree(&self) -> &CubatureTree {
        &self.tree
    }
}

impl ConditionalExpectation for TreeBackend {
    fn kind(&self) -> BackendKind {
        if self.tree.degree() == 3 {
            BackendKind::Cubature3
        } else {
            BackendKind::Cubature5
        }
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn states(&self, level: usize) -> &[f64] {
        self.tree.states(level)
    }

    fn step(&self, level: usize, functionals: &[NextSlice<'_>]) -> Result<Vec<Vec<StepExpectations>>> {
        let b = self.tree.branching();
        let branches = self.tree.branches(level);
        let next = self.tree.states(level + 1);
        let count = self.tree.states(level).len();
        let mut out = vec![vec![StepExpectations::default(); count]; functionals.len()];
        for (f, slot) in functionals.iter().zip(out.iter_mut()) {
            for (k, e) in slot.iter_mut().enumerate() {
                for (j, br) in branches.iter().enumerate() {
                    let c = k * b + j;
                    let v = match f {
                        NextSlice::Values(vals) => vals[c],
                        NextSlice::Exact(g) => g(next[c]),
                    };
                    let wv = br.probability * v;
                    e.plain += wv;
                    e.euler_weighted += wv * br.euler;
                    e.second_order_weighted += wv * br.second;
                }
            }
        }
        check_finite(&out)?;
        Ok(out)
    }

    fn sample_field(&self, level: usize, values: &[f64], _probes: &[f64]) -> Vec<(f64, f64)> {
        self.tree.states(level).iter().copied().zip(values.iter().copied()).collect()
    }

    fn floor(&self) -> f64 {
        1e-12
    }
}

/// Gauss–Hermite expectations of `F(x')` from state `x` over a step `δ`.
pub fn grid_quadrature_step(
    problem: &FbsdeProblem,
    f: impl Fn(f64) -> f64,
    x: f64,
    delta: f64,
    quad_order: usize,
) -> Result<StepExpectations> {
    if !(delta > 0.0) {
        return Err(BsdeError::InvalidArgument("step must be positive".into()));
    }
    let rule = NormalRule::new(quad_order)?;
    let sd = delta.sqrt();
    let mut e = StepExpectations::default();
    for (&xi, &w) in rule.nodes.iter().zip(&rule.weights) {
        let dw = sd * xi;
        let v = f(problem.exact_transition(x, delta, dw));
        if !v.is_finite() {
            return Err(BsdeError::NumericalDomain(format!("functional is not finite at increment {dw}")));
        }
        e.plain += w * v;
        e.euler_weighted += w * v * dw / delta;
    }
    e.second_order_weighted = e.euler_weighted;
    Ok(e)
}

/// Monte Carlo step estimate with standard errors, using the full `(ΔW, J)` sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStepEstimate {
    pub mean: StepExpectations,
    pub std_error: StepExpectations,
}

pub fn mc_step_expectations(
    problem: &FbsdeProblem,
    f: impl Fn(f64) -> f64,
    x: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<McStepEstimate> {
    if samples < 1000 {
        return Err(BsdeError::InvalidArgument(format!("at least 1000 samples required, got {samples}")));
    }
    if !(delta > 0.0) {
        return Err(BsdeError::InvalidArgument("step must be positive".into()));
    }
    let sd = delta.sqrt();
    let draws: Vec<(f64, f64, f64)> = unit_pairs(seed, 0, samples)
        .into_iter()
        .map(|(u, v)| {
            let dw = sd * u;
            let j = delta * sd * v;
            (f(problem.exact_transition(x, delta, dw)), dw, j)
        })
        .collect();
    let (p, pe) = mean_and_error(draws.iter().map(|d| d.0));
    let (e, ee) = mean_and_error(draws.iter().map(|d| d.0 * d.1 / delta));
    let (s, se) = mean_and_error(draws.iter().map(|d| d.0 * (4.0 * d.1 / delta - 6.0 * d.2 / (delta * delta))));
    Ok(McStepEstimate {
        mean: StepExpectations { plain: p, euler_weighted: e, second_order_weighted: s },
        std_error: StepExpectations { plain: pe, euler_weighted: ee, second_order_weighted: se },
    })
}

/// `E[𝒵 ΔW]` and `E[𝒵 J]` over one step, with standard errors for sampled backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMoments {
    pub z_dw: f64,
    pub z_j: f64,
    pub se_dw: f64,
    pub se_j: f64,
}

/// Weight identities as seen by a backend's one-step rule.
///
/// The grid backend's `𝒵` is the endpoint projection `ΔW/δ`; `E[𝒵 ΔW]` is
/// evaluated with that rule. `J` is not an endpoint functional, so `E[𝒵 J]`
/// is evaluated with the tensor rule in `(ΔW, J - δΔW/2)` at the same order.
pub fn weight_moments(kind: BackendKind, delta: f64, config: &BackendConfig) -> Result<WeightMoments> {
    if !(delta > 0.0) {
        return Err(BsdeError::InvalidArgument("step must be positive".into()));
    }
    let sd = delta.sqrt();
    let zw = |dw: f64, j: f64| 4.0 * dw / delta - 6.0 * j / (delta * delta);
    match kind {
        BackendKind::Grid => {
            let rule = NormalRule::new(config.quad_order)?;
            let z_dw = rule.expect(|xi| (sd * xi / delta) * sd * xi);
            let r_scale = delta * sd / 12f64.sqrt();
            let mut z_j = 0.0;
            for (&x1, &w1) in rule.nodes.iter().zip(&rule.weights) {
                for (&x2, &w2) in rule.nodes.iter().zip(&rule.weights) {
                    let dw = sd * x1;
                    let j = 0.5 * delta * dw + r_scale * x2;
                    z_j += w1 * w2 * zw(dw, j) * j;
                }
            }
            Ok(WeightMoments { z_dw, z_j, se_dw: 0.0, se_j: 0.0 })
        }
        BackendKind::Cubature3 | BackendKind::Cubature5 => {
            let degree = if kind == BackendKind::Cubature3 { 3 } else { 5 };
            let (mut z_dw, mut z_j) = (0.0, 0.0);
            for cp in cubature_paths(degree, 0.0, delta)? {
                let dw = pathwise_integral(&MultiIndex::new(vec![1]), &cp.path, 0.0, delta)?;
                let j = pathwise_integral(&MultiIndex::new(vec![0, 1]), &cp.path, 0.0, delta)?;
                z_dw += cp.weight * zw(dw, j) * dw;
                z_j += cp.weight * zw(dw, j) * j;
            }
            Ok(WeightMoments { z_dw, z_j, se_dw: 0.0, se_j: 0.0 })
        }
        BackendKind::Mc => {
            let draws: Vec<(f64, f64)> = unit_pairs(config.seed, 0, config.mc_samples)
                .into_iter()
                .map(|(u, v)| (sd * u, delta * sd * v))
                .collect();
            let (z_dw, se_dw) = mean_and_error(draws.iter().map(|&(dw, j)| zw(dw, j) * dw));
            let (z_j, se_j) = mean_and_error(draws.iter().map(|&(dw, j)| zw(dw, j) * j));
            Ok(WeightMoments { z_dw, z_j, se_dw, se_j })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin;

    #[test]
    fn constant_functional() {
        let p = builtin("manufactured_sin", &[]).unwrap();
        let e = grid_quadrature_step(&p, |_| 2.5, 0.3, 0.1, 20).unwrap();
        assert!((e.plain - 2.5).abs() < 1e-14);
        assert!(e.euler_weighted.abs() < 1e-13 && e.second_order_weighted.abs() < 1e-13);
    }

    #[test]
    fn bm_linear_gaussian_moments() {
        let p = builtin("bm_linear", &[]).unwrap();
        let d = 0.2;
        let e = grid_quadrature_step(&p, |x| x, 0.0, d, 20).unwrap();
        assert!(e.plain.abs() < 1e-15);
        assert!((e.euler_weighted - 1.0).abs() < 1e-13);
        assert!((e.second_order_weighted - 1.0).abs() < 1e-13);
        let e = grid_quadrature_step(&p, |x| x * x, 0.0, d, 20).unwrap();
        assert!((e.plain - d).abs() < 1e-14);
        assert!(e.euler_weighted.abs() < 1e-14 && e.second_order_weighted.abs() < 1e-14);
    }

    #[test]
    fn non_finite_functional_rejected() {
        let p = builtin("bm_linear", &[]).unwrap();
        let r = grid_quadrature_step(&p, |x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 20);
        assert!(matches!(r, Err(BsdeError::NumericalDomain(_))));
    }

    #[test]
    fn mc_matches_grid_on_sine() {
        let p = builtin("bm_linear", &[]).unwrap();
        let (x, d) = (0.4, 0.25);
        let g = grid_quadrature_step(&p, f64::sin, x, d, 20).unwrap();
        let m = mc_step_expectations(&p, f64::sin, x, d, 100_000, 9).unwrap();
        assert!((g.plain - m.mean.plain).abs() < 3.0 * m.std_error.plain);
        assert!((g.euler_weighted - m.mean.euler_weighted).abs() < 3.0 * m.std_error.euler_weighted);
        assert!((g.second_order_weighted - m.mean.second_order_weighted).abs() < 3.0 * m.std_error.second_order_weighted);
        let c = mc_step_expectations(&p, |_| 1.0, x, d, 10_000, 9).unwrap();
        assert_eq!(c.mean.plain, 1.0);
        assert!(c.mean.euler_weighted.abs() < 3.0 * 0.02);
        assert_eq!(m, mc_step_expectations(&p, f64::sin, x, d, 100_000, 9).unwrap());
        assert!(mc_step_expectations(&p, f64::sin, x, d, 999, 9).is_err());
    }

    #[test]
    fn deterministic_weight_identities() {
        let cfg = BackendConfig::default();
        for kind in [BackendKind::Grid, BackendKind::Cubature3, BackendKind::Cubature5] {
            for &d in &[1.0, 0.1, 1.0 / 64.0] {
                let w = weight_moments(kind, d, &cfg).unwrap();
                assert!((w.z_dw - 1.0).abs() < 1e-10, "{kind} δ={d}: {}", w.z_dw);
                assert!(w.z_j.abs() < 1e-10, "{kind} δ={d}: {}", w.z_j);
            }
        }
    }

    #[test]
    fn tree_and_grid_agree_on_smooth_step() {
        let p = builtin("manufactured_sin", &[]).unwrap();
        let part = Partition::uniform(1, 0.05).unwrap();
        let t = TreeBackend::new(&p, &part, 5, DEFAULT_NODE_BUDGET).unwrap();
        let f = |x: f64| x.sin();
        let e = t.step(0, &[NextSlice::Exact(&f)]).unwrap()[0][0];
        let g = grid_quadrature_step(&p, f, p.x0, 0.05, 20).unwrap();
        // degree-5 rule: error O(δ³)
        assert!((e.plain - g.plain).abs() < 1e-5);
        assert!((e.euler_weighted - g.euler_weighted).abs() < 1e-4);
    }

    #[test]
    fn backend_kind_round_trip() {
        for k in BackendKind::ALL {
            assert_eq!(k.label().parse::<BackendKind>().unwrap(), k);
        }
        assert!("gridx".parse::<BackendKind>().is_err());
    }
}

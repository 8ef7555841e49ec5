use crate::error::{BsdeError, Result};
use crate::mesh::Partition;
use crate::problem::FbsdeProblem;
use crate::strat::{pathwise_integral, MultiIndex, PiecewiseLinearPath};

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// One path of a one-step cubature formula on `[start, start + δ]`.
#[derive(Debug, Clone)]
pub struct CubaturePath {
    /// Index of the endpoint class the path belongs to.
    pub branch: usize,
    pub weight: f64,
    pub path: PiecewiseLinearPath,
}

/// Paths of the degree-3 or degree-5 formula over one step (`d = 1`).
///
/// Degree 5: endpoints `∓√(3δ)` reached linearly (weight 1/6 each) and four
/// zero-endpoint tent paths (weight 1/6 each). Degree 3: endpoints `±√δ`, each
/// reached by a pair of two-segment paths (weight 1/4 each).
pub fn cubature_paths(degree: u8, start: f64, delta: f64) -> Result<Vec<CubaturePath>> {
    if !(delta > 0.0) {
        return Err(BsdeError::InvalidArgument("cubature step must be positive".into()));
    }
    let sd = delta.sqrt();
    let mut out = Vec::new();
    match degree {
        5 => {
            let e = (3.0 * delta).sqrt();
            out.push(CubaturePath {
                branch: 0,
                weight: 1.0 / 6.0,
                path: PiecewiseLinearPath::linear(start, delta, vec![-e])?,
            });
            let b = 3.0 * std::f64::consts::SQRT_2 / 4.0 * sd;
            let h = [delta / 3.0; 3];
            for inc in [[0.0, b, -b], [0.0, -b, b], [-b, b, 0.0], [b, -b, 0.0]] {
                out.push(CubaturePath {
                    branch: 1,
                    weight: 1.0 / 6.0,
                    path: PiecewiseLinearPath::new(start, &h, inc.iter().map(|&v| vec![v]).collect())?,
                });
            }
            out.push(CubaturePath {
                branch: 2,
                weight: 1.0 / 6.0,
                path: PiecewiseLinearPath::linear(start, delta, vec![e])?,
            });
        }
        3 => {
            let c = 1.0 / 3f64.sqrt();
            let h = [delta / 2.0; 2];
            for (branch, sign) in [(0usize, -1.0), (1, 1.0)] {
                for (p, q) in [(0.5 + c, 0.5 - c), (0.5 - c, 0.5 + c)] {
                    out.push(CubaturePath {
                        branch,
                        weight: 0.25,
                        path: PiecewiseLinearPath::new(start, &h, vec![vec![sign * p * sd], vec![sign * q * sd]])?,
                    });
                }
            }
        }
        other => return Err(BsdeError::InvalidArgument(format!("cubature degree must be 3 or 5, got {other}"))),
    }
    Ok(out)
}

pub fn branching(degree: u8) -> Result<usize> {
    match degree {
        3 => Ok(2),
        5 => Ok(3),
        other => Err(BsdeError::InvalidArgument(format!("cubature degree must be 3 or 5, got {other}"))),
    }
}

/// Weight functionals of one endpoint class over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub increment: f64,
    pub probability: f64,
    /// `E[ΔW | branch] / δ`
    pub euler: f64,
    /// `E[𝒵 | branch]`
    pub second: f64,
}

fn branches(degree: u8, start: f64, delta: f64) -> Result<Vec<Branch>> {
    let paths = cubature_paths(degree, start, delta)?;
    let b = branching(degree)?;
    let w1 = MultiIndex::new(vec![1]);
    let w01 = MultiIndex::new(vec![0, 1]);
    let mut out = Vec::with_capacity(b);
    for k in 0..b {
        let (mut p, mut inc, mut zw) = (0.0, 0.0, 0.0);
        for cp in paths.iter().filter(|cp| cp.branch == k) {
            let end = start + delta;
            let dw = pathwise_integral(&w1, &cp.path, start, end)?;
            let j = pathwise_integral(&w01, &cp.path, start, end)?;
            p += cp.weight;
            inc = dw;
            zw += cp.weight * (4.0 * dw / delta - 6.0 * j / (delta * delta));
        }
        out.push(Branch { increment: inc, probability: p, euler: inc / delta, second: zw / p });
    }
    Ok(out)
}

/// Read-only view of one tree node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureNode {
    pub level: usize,
    pub index: usize,
    pub state: f64,
    pub weight: f64,
}

/// Full (non-recombining) cubature tree along a partition. Node `k` at level
/// `i` has children `k·b + j` at level `i + 1`, `j` the branch index.
#[derive(Debug, Clone)]
pub struct CubatureTree {
    degree: u8,
    branching: usize,
    states: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    branches: Vec<Vec<Branch>>,
}

impl CubatureTree {
    pub fn build(problem: &FbsdeProblem, partition: &Partition, degree: u8, budget: usize) -> Result<Self> {
        if problem.driving_dim() != 1 {
            return Err(BsdeError::InvalidArgument("cubature trees support d = 1 only".into()));
        }
        let b = branching(degree)?;
        let n = partition.n();
        let mut required: usize = 0;
        let mut level_size: usize = 1;
        for _ in 0..=n {
            required = required.saturating_add(level_size);
            level_size = level_size.saturating_mul(b);
        }
        if required > budget {
            return Err(BsdeError::Resource { n, required, budget });
        }
        let mut states = vec![vec![problem.x0]];
        let mut weights = vec![vec![1.0]];
        let mut all_branches = Vec::with_capacity(n);
        for i in 0..n {
            let delta = partition.step(i + 1);
            let br = branches(degree, partition.time(i), delta)?;
            let prev_s = &states[i];
            let prev_w = &weights[i];
            let mut s = Vec::with_capacity(prev_s.len() * b);
            let mut w = Vec::with_capacity(prev_s.len() * b);
            for (&x, &p) in prev_s.iter().zip(prev_w) {
                for branch in &br {
                    s.push(problem.exact_transition(x, delta, branch.increment));
                    w.push(p * branch.probability);
                }
            }
            states.push(s);
            weights.push(w);
            all_branches.push(br);
        }
        Ok(Self { degree, branching: b, states, weights, branches: all_branches })
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn levels(&self) -> usize {
        self.states.len()
    }

    pub fn node_count(&self) -> usize {
        self.states.iter().map(Vec::len).sum()
    }

    pub fn states(&self, level: usize) -> &[f64] {
        &self.states[level]
    }

    pub fn weights(&self, level: usize) -> &[f64] {
        &self.weights[level]
    }

    /// Branch functionals of the step from `level` to `level + 1`.
    pub fn branches(&self, level: usize) -> &[Branch] {
        &self.branches[level]
    }

    pub fn node(&self, level: usize, index: usize) -> CubatureNode {
        CubatureNode { level, index, state: self.states[level][index], weight: self.weights[level][index] }
    }

    pub fn children(&self, node: &CubatureNode) -> Vec<CubatureNode> {
        if node.level + 1 >= self.states.len() {
            return Vec::new();
        }
        (0..self.branching).map(|j| self.node(node.level + 1, node.index * self.branching + j)).collect()
    }
}

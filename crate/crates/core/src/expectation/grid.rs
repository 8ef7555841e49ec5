use crate::error::{BsdeError, Result};
use crate::problem::FbsdeProblem;

/// Four-point Lagrange stencil: `value = Σ w[k] * values[start + k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub w: [f64; 4],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let v = &values[self.start..self.start + 4];
        self.w[0] * v[0] + self.w[1] * v[1] + self.w[2] * v[2] + self.w[3] * v[3]
    }
}

/// Sorted node set with local cubic interpolation and linear extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<f64>,
}

impl NodeSet {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(BsdeError::InvalidArgument("at least 4 grid nodes required".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|v| !v.is_finite()) {
            return Err(BsdeError::InvalidArgument("grid nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 4 || !(hi > lo) {
            return Err(BsdeError::InvalidArgument("uniform grid needs lo < hi and 4+ nodes".into()));
        }
        let h = (hi - lo) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|k| lo + k as f64 * h).collect();
        nodes[count - 1] = hi;
        Self::new(nodes)
    }

    /// Nodes `c + α sinh(u)` with `u` uniform, so spacing near `c` is about `α Δu`.
    pub fn clustered(lo: f64, hi: f64, count: usize, center: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || center <= lo || center >= hi {
            return Self::uniform(lo, hi, count);
        }
        let u0 = ((lo - center) / scale).asinh();
        let u1 = ((hi - center) / scale).asinh();
        let du = (u1 - u0) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|k| center + scale * (u0 + k as f64 * du).sinh()).collect();
        nodes[0] = lo;
        nodes[count - 1] = hi;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn lagrange(&self, start: usize, a: f64) -> [f64; 4] {
        let x = &self.nodes[start..start + 4];
        let mut w = [0.0; 4];
        for j in 0..4 {
            let mut p = 1.0;
            for m in 0..4 {
                if m != j {
                    p *= (a - x[m]) / (x[j] - x[m]);
                }
            }
            w[j] = p;
        }
        w
    }

    fn lagrange_derivative(&self, start: usize, a: f64) -> [f64; 4] {
        let x = &self.nodes[start..start + 4];
        let mut w = [0.0; 4];
        for j in 0..4 {
            let mut denom = 1.0;
            for m in 0..4 {
                if m != j {
                    denom *= x[j] - x[m];
                }
            }
            let mut s = 0.0;
            for skip in 0..4 {
                if skip == j {
                    continue;
                }
                let mut p = 1.0;
                for m in 0..4 {
                    if m != j && m != skip {
                        p *= a - x[m];
                    }
                }
                s += p;
            }
            w[j] = s / denom;
        }
        w
    }

    pub fn stencil(&self, a: f64) -> Stencil {
        let n = self.nodes.len();
        let (lo, hi) = (self.nodes[0], self.nodes[n - 1]);
        if a < lo || a > hi {
            let (start, b) = if a < lo { (0, lo) } else { (n - 4, hi) };
            let v = self.lagrange(start, b);
            let d = self.lagrange_derivative(start, b);
            let mut w = [0.0; 4];
            for k in 0..4 {
                w[k] = v[k] + d[k] * (a - b);
            }
            return Stencil { start, w };
        }
        let k = self.nodes.partition_point(|&x| x <= a).saturating_sub(1);
        let start = k.saturating_sub(1).min(n - 4);
        Stencil { start, w: self.lagrange(start, a) }
    }

    pub fn eval(&self, values: &[f64], a: f64) -> f64 {
        self.stencil(a).apply(values)
    }
}

/// Values on a node set; evaluation reproduces stored values at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub nodes: NodeSet,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(nodes: NodeSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != nodes.len() {
            return Err(BsdeError::InvalidArgument("one value per node required".into()));
        }
        Ok(Self { nodes, values })
    }

    pub fn from_fn(nodes: NodeSet, f: impl Fn(f64) -> f64) -> Self {
        let values = nodes.nodes().iter().map(|&a| f(a)).collect();
        Self { nodes, values }
    }

    pub fn eval(&self, a: f64) -> f64 {
        self.nodes.eval(&self.values, a)
    }
}

/// Spatial discretisation parameters for the grid-type backends.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    /// Half-width of the domain in units of the terminal axis scale.
    pub width: f64,
    /// Node clustering scale at a declared kink, in units of the terminal axis scale.
    pub kink_scale: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nodes: 401, width: 6.0, kink_scale: 0.01 }
    }
}

/// Axis-coordinate node set for a problem: `x0 ± width·s_T`, clustered at the kink if any.
pub fn axis_nodes(problem: &FbsdeProblem, spec: &GridSpec) -> Result<NodeSet> {
    let tr = problem.transition();
    let center = tr.to_axis(problem.x0);
    let s = tr.axis_scale(problem.horizon);
    let (lo, hi) = (center - spec.width * s, center + spec.width * s);
    match problem.kink() {
        Some(k) if spec.kink_scale > 0.0 => NodeSet::clustered(lo, hi, spec.nodes, tr.to_axis(k), spec.kink_scale * s),
        _ => NodeSet::uniform(lo, hi, spec.nodes),
    }
}

/// `count` equally spaced states over `x0 ± band·s_T` in the axis coordinate.
pub fn probe_states(problem: &FbsdeProblem, count: usize, band: f64) -> Vec<f64> {
    let tr = problem.transition();
    let center = tr.to_axis(problem.x0);
    let s = tr.axis_scale(problem.horizon);
    if count <= 1 {
        return vec![problem.x0];
    }
    (0..count)
        .map(|k| {
            let a = center - band * s + 2.0 * band * s * k as f64 / (count - 1) as f64;
            tr.from_axis(a)
        })
        .collect()
}

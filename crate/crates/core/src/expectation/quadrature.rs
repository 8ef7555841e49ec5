use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{BsdeError, Result};

/// Gauss–Hermite rule for the standard normal, symmetrised so odd moments
/// vanish exactly and weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(order: usize) -> Result<Self> {
        let gh = GaussHermite::new(order)
            .map_err(|_| BsdeError::InvalidArgument(format!("quadrature order must be >= 2, got {order}")))?;
        let mut pairs: Vec<(f64, f64)> = gh
            .iter()
            .map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / std::f64::consts::PI.sqrt()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..n {
            let m = n - 1 - k;
            nodes[k] = 0.5 * (pairs[k].0 - pairs[m].0);
            weights[k] = 0.5 * (pairs[k].1 + pairs[m].1);
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[g(ξ)]`, `ξ ~ N(0, 1)`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// `∫_a^b g` by Gauss–Legendre.
pub fn integrate(order: usize, a: f64, b: f64, g: impl FnMut(f64) -> f64) -> Result<f64> {
    let gl = GaussLegendre::new(order)
        .map_err(|_| BsdeError::InvalidArgument(format!("quadrature order must be >= 2, got {order}")))?;
    Ok(gl.integrate(a, b, g))
}

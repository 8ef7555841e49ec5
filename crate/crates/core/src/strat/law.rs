use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BsdeError, Result};

/// Joint Gaussian law of `(ΔW^l, J^(0,l))` over one step of length `δ`, where
/// `J^(0,l) = ∫ (s - t_i) dW^l_s`. Dimensions are independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementLaw {
    delta: f64,
    dim: usize,
}

/// Draws stored row-major: draw `k`, dimension `l` at `k * dim + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSamples {
    pub dim: usize,
    pub dw: Vec<f64>,
    pub j: Vec<f64>,
}

impl IncrementSamples {
    pub fn len(&self) -> usize {
        self.dw.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dw.is_empty()
    }

    pub fn draw(&self, k: usize, l: usize) -> (f64, f64) {
        (self.dw[k * self.dim + l], self.j[k * self.dim + l])
    }
}

impl IncrementLaw {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(BsdeError::InvalidArgument(format!("step must be positive, got {delta}")));
        }
        if dim == 0 {
            return Err(BsdeError::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Self { delta, dim })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Covariance of one `(ΔW^l, J^(0,l))` pair.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let d = self.delta;
        [[d, d * d / 2.0], [d * d / 2.0, d * d * d / 3.0]]
    }

    pub fn correlation(&self) -> f64 {
        let c = self.covariance();
        c[0][1] / (c[0][0] * c[1][1]).sqrt()
    }

    /// Maps a draw of the unit-step law to this step.
    pub fn scale(&self, w: f64, j: f64) -> (f64, f64) {
        (self.delta.sqrt() * w, self.delta.powf(1.5) * j)
    }

    /// Unit-step pair from two independent standard normals.
    pub fn unit_pair(z1: f64, z2: f64) -> (f64, f64) {
        (z1, 0.5 * z1 + z2 / 12f64.sqrt())
    }

    pub fn sample(&self, seed: u64, count: usize) -> IncrementSamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = count * self.dim;
        let mut dw = Vec::with_capacity(n);
        let mut j = Vec::with_capacity(n);
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let (w1, j1) = Self::unit_pair(z1, z2);
            let (w, jj) = self.scale(w1, j1);
            dw.push(w);
            j.push(jj);
        }
        IncrementSamples { dim: self.dim, dw, j }
    }
}

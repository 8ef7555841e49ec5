//! Time partitions `0 = t_0 < t_1 < ... < t_n = T`.
//!
//! Two families are provided: the uniform grid and the graded grid
//! `t_i = T (1 - (1 - i/n)^beta)`, which piles points up near the terminal
//! time to compensate for the derivative blow-up of the value function when
//! the terminal condition is only Lipschitz.

use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};

/// Grading exponent used when none is given.
pub const DEFAULT_BETA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeshKind {
    Uniform,
    Graded { beta: f64 },
}

impl MeshKind {
    pub fn beta(&self) -> Option<f64> {
        match self {
            MeshKind::Uniform => None,
            MeshKind::Graded { beta } => Some(*beta),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MeshKind::Uniform => "uniform",
            MeshKind::Graded { .. } => "graded",
        }
    }

    pub fn build(&self, n: usize, horizon: f64) -> Result<Partition> {
        match *self {
            MeshKind::Uniform => Partition::uniform(n, horizon),
            MeshKind::Graded { beta } => Partition::graded(n, horizon, beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<f64>,
    horizon: f64,
    kind: MeshKind,
}

impl Partition {
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        check_common(n, horizon)?;
        let mut points: Vec<f64> = (0..=n).map(|i| i as f64 * horizon / n as f64).collect();
        points[n] = horizon;
        Ok(Self { points, horizon, kind: MeshKind::Uniform })
    }

    pub fn graded(n: usize, horizon: f64, beta: f64) -> Result<Self> {
        check_common(n, horizon)?;
        if n < 2 {
            return Err(BsdeError::InvalidArgument(format!("graded mesh needs n >= 2, got {n}")));
        }
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(BsdeError::InvalidArgument(format!("grading exponent must be >= 1, got {beta}")));
        }
        let nf = n as f64;
        let mut points: Vec<f64> = (0..=n)
            .map(|i| horizon * (1.0 - (1.0 - i as f64 / nf).powf(beta)))
            .collect();
        points[0] = 0.0;
        points[n] = horizon;
        let partition = Self { points, horizon, kind: MeshKind::Graded { beta } };
        // Extreme exponents can collapse the last steps to zero in f64.
        if partition.steps().any(|d| d <= 0.0) {
            return Err(BsdeError::InvalidArgument(format!(
                "graded mesh with n = {n}, beta = {beta} is not strictly increasing in f64"
            )));
        }
        Ok(partition)
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn time(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Step `delta_i = t_i - t_{i-1}` for `i` in `1..=n`.
    pub fn step(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.n(), "step index {i} out of range 1..={}", self.n());
        self.points[i] - self.points[i - 1]
    }

    /// `delta_1, ..., delta_n` in order.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }

    pub fn max_step(&self) -> f64 {
        self.steps().fold(0.0, f64::max)
    }
}

fn check_common(n: usize, horizon: f64) -> Result<()> {
    if n == 0 {
        return Err(BsdeError::InvalidArgument("partition needs at least one interval".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(BsdeError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

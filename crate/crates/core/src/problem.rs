//! Decoupled FBSDE instances with exact one-step transitions.

use std::fmt;
use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{BsdeError, Result};
use crate::strat::VectorFields;

pub type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type DriverFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
/// `(t, x) -> (u, ∇u V)`
pub type ReferenceFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Smoothness {
    C1Lipschitz,
    C2Smooth,
}

/// Sign in front of `½ Σ ∇V_j V_j` in the backward PDE drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSign {
    Plus,
    Minus,
}

impl DriftSign {
    pub fn value(self) -> f64 {
        match self {
            DriftSign::Plus => 1.0,
            DriftSign::Minus => -1.0,
        }
    }
}

/// Exact one-step maps available for zero-drift forward dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    /// `dX = ∘dW`: `x' = x + ΔW`
    Additive,
    /// `dX = σ X ∘ dW`: `x' = x e^{σ ΔW}`
    Geometric { sigma: f64 },
}

impl Transition {
    pub fn apply(&self, x: f64, delta: f64, dw: f64) -> f64 {
        if delta == 0.0 {
            return x;
        }
        match *self {
            Transition::Additive => x + dw,
            Transition::Geometric { sigma } => x * (sigma * dw).exp(),
        }
    }

    /// Every builtin transition depends on the Brownian endpoint only.
    pub fn depends_on_increment_only(&self) -> bool {
        true
    }

    /// State coordinate in which the transition is a shift.
    pub fn to_axis(&self, x: f64) -> f64 {
        match self {
            Transition::Additive => x,
            Transition::Geometric { .. } => x.ln(),
        }
    }

    pub fn from_axis(&self, a: f64) -> f64 {
        match self {
            Transition::Additive => a,
            Transition::Geometric { .. } => a.exp(),
        }
    }

    /// Standard deviation of the axis coordinate after time `t`.
    pub fn axis_scale(&self, t: f64) -> f64 {
        match *self {
            Transition::Additive => t.sqrt(),
            Transition::Geometric { sigma } => sigma * t.sqrt(),
        }
    }
}

/// Driver classes the nested Monte Carlo oracle can reduce in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriverKind {
    Zero,
    /// `f = κ y`
    LinearInY { kappa: f64 },
    General,
}

#[derive(Clone)]
pub struct FbsdeProblem {
    pub name: String,
    pub params: Vec<(String, f64)>,
    pub x0: f64,
    pub horizon: f64,
    drift: StateFn,
    diffusion: StateFn,
    diffusion_jacobian: Option<StateFn>,
    driver: DriverFn,
    driver_kind: DriverKind,
    lipschitz: f64,
    terminal: StateFn,
    terminal_gradient: Option<StateFn>,
    smoothness: Smoothness,
    transition: Transition,
    reference: Option<ReferenceFn>,
    kink: Option<f64>,
}

impl fmt::Debug for FbsdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbsdeProblem")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("x0", &self.x0)
            .field("horizon", &self.horizon)
            .field("smoothness", &self.smoothness)
            .field("transition", &self.transition)
            .finish_non_exhaustive()
    }
}

/// Builder for problems with zero forward drift and a known exact transition.
pub struct ProblemBuilder {
    p: FbsdeProblem,
}

impl ProblemBuilder {
    pub fn new(name: &str, transition: Transition, terminal: StateFn) -> Self {
        let diffusion: StateFn = match transition {
            Transition::Additive => Arc::new(|_| 1.0),
            Transition::Geometric { sigma } => Arc::new(move |x| sigma * x),
        };
        let jac: StateFn = match transition {
            Transition::Additive => Arc::new(|_| 0.0),
            Transition::Geometric { sigma } => Arc::new(move |_| sigma),
        };
        Self {
            p: FbsdeProblem {
                name: name.to_string(),
                params: Vec::new(),
                x0: 0.0,
                horizon: 1.0,
                drift: Arc::new(|_| 0.0),
                diffusion,
                diffusion_jacobian: Some(jac),
                driver: Arc::new(|_, _, _, _| 0.0),
                driver_kind: DriverKind::Zero,
                lipschitz: 0.0,
                terminal,
                terminal_gradient: None,
                smoothness: Smoothness::C1Lipschitz,
                transition,
                reference: None,
                kink: None,
            },
        }
    }

    pub fn x0(mut self, x0: f64) -> Self {
        self.p.x0 = x0;
        self
    }

    pub fn horizon(mut self, t: f64) -> Self {
        self.p.horizon = t;
        self
    }

    pub fn params(mut self, params: Vec<(String, f64)>) -> Self {
        self.p.params = params;
        self
    }

    pub fn driver(mut self, f: DriverFn, kind: DriverKind, lipschitz: f64) -> Self {
        self.p.driver = f;
        self.p.driver_kind = kind;
        self.p.lipschitz = lipschitz;
        self
    }

    /// Declares C2 smoothness with the given terminal gradient.
    pub fn smooth(mut self, gradient: StateFn) -> Self {
        self.p.terminal_gradient = Some(gradient);
        self.p.smoothness = Smoothness::C2Smooth;
        self
    }

    pub fn reference(mut self, r: ReferenceFn) -> Self {
        self.p.reference = Some(r);
        self
    }

    pub fn kink(mut self, at: f64) -> Self {
        self.p.kink = Some(at);
        self
    }

    pub fn build(self) -> Result<FbsdeProblem> {
        let p = self.p;
        if !(p.horizon > 0.0) || !p.x0.is_finite() {
            return Err(BsdeError::InvalidArgument("horizon must be positive and x0 finite".into()));
        }
        if p.smoothness == Smoothness::C2Smooth && p.terminal_gradient.is_none() {
            return Err(BsdeError::InvalidArgument("C2 smoothness requires a terminal gradient".into()));
        }
        if let Transition::Geometric { sigma } = p.transition {
            if !(sigma > 0.0) || !(p.x0 > 0.0) {
                return Err(BsdeError::InvalidArgument("geometric dynamics need sigma > 0 and x0 > 0".into()));
            }
        }
        Ok(p)
    }
}

impl FbsdeProblem {
    pub fn driving_dim(&self) -> usize {
        1
    }

    pub fn state_dim(&self) -> usize {
        1
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn driver_kind(&self) -> DriverKind {
        self.driver_kind
    }

    pub fn kink(&self) -> Option<f64> {
        self.kink
    }

    pub fn has_reference(&self) -> bool {
        self.reference.is_some()
    }

    pub fn has_terminal_gradient(&self) -> bool {
        self.terminal_gradient.is_some()
    }

    pub fn driver(&self, t: f64, x: f64, y: f64, z: f64) -> f64 {
        (self.driver)(t, x, y, z)
    }

    pub fn terminal(&self, x: f64) -> f64 {
        (self.terminal)(x)
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    /// `∇Φ(x) V(x)`, when the terminal gradient is declared.
    pub fn terminal_z(&self, x: f64) -> Option<f64> {
        self.terminal_gradient.as_ref().map(|g| g(x) * self.diffusion(x))
    }

    pub fn reference(&self, t: f64, x: f64) -> Option<(f64, f64)> {
        self.reference.as_ref().map(|r| r(t, x))
    }

    pub fn exact_transition(&self, x: f64, delta: f64, dw: f64) -> f64 {
        self.transition.apply(x, delta, dw)
    }

    fn diffusion_derivative(&self, x: f64) -> f64 {
        match &self.diffusion_jacobian {
            Some(j) => j(x),
            None => {
                let h = f64::EPSILON.cbrt() * (1.0 + x.abs());
                (self.diffusion(x + h) - self.diffusion(x - h)) / (2.0 * h)
            }
        }
    }

    /// `V_0 ± ½ ∇V_1 V_1`.
    pub fn ito_drift(&self, x: f64, sign: DriftSign) -> f64 {
        self.drift(x) + sign.value() * 0.5 * self.diffusion_derivative(x) * self.diffusion(x)
    }
}

impl VectorFields for FbsdeProblem {
    fn driving_dim(&self) -> usize {
        1
    }

    fn field(&self, j: usize, x: f64) -> f64 {
        if j == 0 {
            self.drift(x)
        } else {
            self.diffusion(x)
        }
    }
}

fn take_params(name: &str, given: &[(String, f64)], defaults: &[(&str, f64)]) -> Result<Vec<f64>> {
    for (k, _) in given {
        if !defaults.iter().any(|(d, _)| d == k) {
            return Err(BsdeError::InvalidArgument(format!("unknown parameter '{k}' for {name}")));
        }
    }
    Ok(defaults
        .iter()
        .map(|(d, v)| given.iter().rev().find(|(k, _)| k == d).map_or(*v, |(_, g)| *g))
        .collect())
}

pub const BUILTIN_NAMES: [&str; 3] = ["bm_linear", "manufactured_sin", "call_lipschitz"];

/// Builtin problems; unspecified parameters take their defaults.
pub fn builtin(name: &str, params: &[(String, f64)]) -> Result<FbsdeProblem> {
    match name {
        "bm_linear" => {
            let v = take_params(name, params, &[("x0", 0.0), ("T", 1.0)])?;
            ProblemBuilder::new(name, Transition::Additive, Arc::new(|x| x))
                .x0(v[0])
                .horizon(v[1])
                .params(vec![("x0".into(), v[0]), ("T".into(), v[1])])
                .smooth(Arc::new(|_| 1.0))
                .reference(Arc::new(|_, x| (x, 1.0)))
                .build()
        }
        "manufactured_sin" => {
            let v = take_params(name, params, &[("a", 1.0), ("b", 1.0), ("x0", 1.0), ("T", 1.0)])?;
            let (a, b, horizon) = (v[0], v[1], v[3]);
            let driver: DriverFn = Arc::new(move |t, x, y, z| {
                let h = -(t - horizon).exp() * ((0.5 + a) * x.sin() + b * x.cos());
                a * y + b * z + h
            });
            ProblemBuilder::new(name, Transition::Additive, Arc::new(f64::sin))
                .x0(v[2])
                .horizon(horizon)
                .params(vec![("a".into(), a), ("b".into(), b), ("x0".into(), v[2]), ("T".into(), horizon)])
                .driver(driver, DriverKind::General, a.abs() + b.abs())
                .smooth(Arc::new(f64::cos))
                .reference(Arc::new(move |t, x| {
                    let e = (t - horizon).exp();
                    (e * x.sin(), e * x.cos())
                }))
                .build()
        }
        "call_lipschitz" => {
            let v = take_params(
                name,
                params,
                &[("sigma", 0.2), ("r", 0.05), ("K", 1.0), ("x0", 1.0), ("T", 1.0)],
            )?;
            let (sigma, r, strike, x0, horizon) = (v[0], v[1], v[2], v[3], v[4]);
            if !(strike > 0.0) {
                return Err(BsdeError::InvalidArgument("strike must be positive".into()));
            }
            ProblemBuilder::new(name, Transition::Geometric { sigma }, Arc::new(move |x| (x - strike).max(0.0)))
                .x0(x0)
                .horizon(horizon)
                .params(vec![
                    ("sigma".into(), sigma),
                    ("r".into(), r),
                    ("K".into(), strike),
                    ("x0".into(), x0),
                    ("T".into(), horizon),
                ])
                .driver(Arc::new(move |_, _, y, _| -r * y), DriverKind::LinearInY { kappa: -r }, r.abs())
                .reference(Arc::new(move |t, x| call_reference(sigma, r, strike, horizon - t, x)))
                .kink(strike)
                .build()
        }
        other => Err(BsdeError::InvalidArgument(format!(
            "unknown problem '{other}'; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// `u` and `σ x ∂_x u` for `u(t,x) = e^{-rτ} E[(x e^{σ W_τ} - K)^+]`.
pub fn call_reference(sigma: f64, r: f64, strike: f64, tau: f64, x: f64) -> (f64, f64) {
    if tau <= 0.0 {
        let itm = if x > strike { 1.0 } else { 0.0 };
        return ((x - strike).max(0.0), sigma * x * itm);
    }
    let n = Normal::new(0.0, 1.0).unwrap();
    let s = sigma * tau.sqrt();
    let d2 = (x / strike).ln() / s;
    let d1 = d2 + s;
    let disc = (-r * tau).exp();
    let growth = (0.5 * s * s).exp();
    let u = disc * (x * growth * n.cdf(d1) - strike * n.cdf(d2));
    let z = sigma * x * disc * growth * n.cdf(d1);
    (u, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strat::{apply_l_operator, MultiIndex};

    fn p(name: &str) -> FbsdeProblem {
        builtin(name, &[]).unwrap()
    }

    #[test]
    fn drift_corrections() {
        let bm = p("bm_linear");
        assert_eq!(bm.ito_drift(0.7, DriftSign::Plus), 0.0);
        assert_eq!(bm.ito_drift(0.7, DriftSign::Minus), 0.0);
        let call = p("call_lipschitz");
        let x = 1.3;
        assert!((call.ito_drift(x, DriftSign::Plus) - 0.02 * x).abs() < 1e-15);
        assert!((call.ito_drift(x, DriftSign::Minus) + 0.02 * x).abs() < 1e-15);
    }

    #[test]
    fn geometric_drift_with_nonzero_v0() {
        // V0 = μx, V1 = σx: candidates (μ ± σ²/2) x
        let (mu, sigma) = (0.1, 0.3);
        let mut q = ProblemBuilder::new("gbm", Transition::Geometric { sigma }, Arc::new(|x| x))
            .x0(1.0)
            .build()
            .unwrap();
        q.drift = Arc::new(move |x| mu * x);
        q.diffusion_jacobian = None;
        let x = 2.0;
        assert!((q.ito_drift(x, DriftSign::Minus) - (mu - sigma * sigma / 2.0) * x).abs() < 1e-9);
        assert!((q.ito_drift(x, DriftSign::Plus) - (mu + sigma * sigma / 2.0) * x).abs() < 1e-9);
    }

    #[test]
    fn builtin_examples() {
        let bm = p("bm_linear");
        assert_eq!(bm.reference(0.3, 0.25), Some((0.25, 1.0)));
        assert_eq!(bm.exact_transition(0.3, 0.1, 0.1), 0.3 + 0.1);
        let call = p("call_lipschitz");
        assert_eq!(call.exact_transition(1.0, 0.5, 0.0), 1.0);
        for q in BUILTIN_NAMES.iter().map(|n| p(n)) {
            assert_eq!(q.exact_transition(0.8, 0.0, 0.37), 0.8);
            assert!(q.transition().depends_on_increment_only());
        }
        assert!(matches!(builtin("heston", &[]), Err(BsdeError::InvalidArgument(_))));
        assert!(builtin("bm_linear", &[("zz".into(), 1.0)]).is_err());
        assert_eq!(call.smoothness(), Smoothness::C1Lipschitz);
        assert_eq!(call.kink(), Some(1.0));
    }

    #[test]
    fn parameters_override_defaults() {
        let q = builtin("manufactured_sin", &[("a".into(), 0.5), ("x0".into(), 0.2)]).unwrap();
        assert_eq!(q.x0, 0.2);
        assert_eq!(q.lipschitz(), 1.5);
    }

    #[test]
    fn terminal_consistency() {
        for q in BUILTIN_NAMES.iter().map(|n| p(n)) {
            for k in 0..21 {
                let x = q.x0 + (k as f64 - 10.0) * 0.07;
                let (u, _) = q.reference(q.horizon, x).unwrap();
                assert!((u - q.terminal(x)).abs() < 1e-14, "{} at {x}", q.name);
            }
        }
    }

    #[test]
    fn manufactured_sin_pde_residual_vanishes() {
        let q = p("manufactured_sin");
        let horizon = q.horizon;
        let u = move |t: f64, x: f64| (t - horizon).exp() * x.sin();
        let lu0 = apply_l_operator(&MultiIndex::new(vec![0]), Box::new(u), &q);
        let lu11 = apply_l_operator(&MultiIndex::new(vec![1, 1]), Box::new(u), &q);
        let lu1 = apply_l_operator(&MultiIndex::new(vec![1]), Box::new(u), &q);
        for &(t, x) in &[(0.1, -0.4), (0.5, 1.2), (0.9, 2.7)] {
            // ∂_t u + ½ u_xx + f(t, x, u, u_x); additive noise has no drift correction
            let res = lu0(t, x) + 0.5 * lu11(t, x) + q.driver(t, x, u(t, x), lu1(t, x));
            assert!(res.abs() < 1e-5, "residual {res} at ({t},{x})");
        }
    }

    #[test]
    fn call_reference_matches_numeric_derivative() {
        let (sigma, r, k) = (0.2, 0.05, 1.0);
        for &(tau, x) in &[(1.0, 1.0), (0.3, 0.8), (0.05, 1.1)] {
            let (_, z) = call_reference(sigma, r, k, tau, x);
            let h = 1e-5;
            let du = (call_reference(sigma, r, k, tau, x + h).0 - call_reference(sigma, r, k, tau, x - h).0) / (2.0 * h);
            assert!((z - sigma * x * du).abs() < 1e-7);
        }
    }

    #[test]
    fn c2_requires_gradient() {
        let mut b = ProblemBuilder::new("x", Transition::Additive, Arc::new(|x| x));
        b.p.smoothness = Smoothness::C2Smooth;
        assert!(b.build().is_err());
    }
}

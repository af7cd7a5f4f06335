//! The generalized momentum method
//!
//! ```text
//! y_k     = x_k + ν (x_k − x_{k−1})
//! x_{k+1} = x_k − α (∇f(y_k) + w_{k+1}) + β (x_k − x_{k−1})
//! ```
//!
//! with the convention `x_{−1} = x_0`. GD is `β = ν = 0`, heavy ball is
//! `ν = 0`, Nesterov is `β = ν`. This module holds the parameter type, the
//! named parameterizations, the iteration itself, and the noiseless
//! convergence rate on quadratics computed from the 2×2 per-eigenvalue blocks.

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius_from_trace_det, M2};
use std::fmt;
use std::str::FromStr;

/// Step size `alpha`, momentum `beta`, gradient extrapolation `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmParams {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
}

impl GmmParams {
    pub fn new(alpha: f64, beta: f64, nu: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Range(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Range(format!("beta must be non-negative, got {beta}")));
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::Range(format!("nu must be non-negative, got {nu}")));
        }
        Ok(GmmParams { alpha, beta, nu })
    }

    pub fn gd(alpha: f64) -> Result<Self> {
        GmmParams::new(alpha, 0.0, 0.0)
    }

    /// State-space matrices `(Ã, B̃, C̃)` of the scalar system:
    /// `Ã = [[1+β, −β], [1, 0]]`, `B̃ = (−α, 0)ᵀ`, `C̃ = (1+ν, −ν)`.
    pub fn system_matrices(&self) -> (M2, [f64; 2], [f64; 2]) {
        (
            [[1.0 + self.beta, -self.beta], [1.0, 0.0]],
            [-self.alpha, 0.0],
            [1.0 + self.nu, -self.nu],
        )
    }
}

/// Named parameterizations as functions of `(μ, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetId {
    GdPop,
    GdFastest,
    RsGd,
    NagPop,
    NagFastest,
    /// Nesterov with the rate-optimal momentum for a given `α ∈ (0, 1/L]`;
    /// `None` means the default `α = 1/(2L)`.
    NagBetaOpt { alpha: Option<f64> },
    Tmm,
    Hb,
    /// Robustly stable heavy ball, `α = a²/L`, `β = (1 − a/√κ)²`;
    /// `None` means the default `a = √2`.
    RsHb { a: Option<f64> },
}

impl PresetId {
    pub const ALL: [PresetId; 9] = [
        PresetId::GdPop,
        PresetId::GdFastest,
        PresetId::RsGd,
        PresetId::NagPop,
        PresetId::NagFastest,
        PresetId::NagBetaOpt { alpha: None },
        PresetId::Tmm,
        PresetId::Hb,
        PresetId::RsHb { a: None },
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PresetId::GdPop => "GD-pop",
            PresetId::GdFastest => "GD-fastest",
            PresetId::RsGd => "RS-GD",
            PresetId::NagPop => "NAG-pop",
            PresetId::NagFastest => "NAG-fastest",
            PresetId::NagBetaOpt { .. } => "NAG-beta-opt",
            PresetId::Tmm => "TMM",
            PresetId::Hb => "HB",
            PresetId::RsHb { .. } => "RS-HB",
        }
    }

    /// Convergence rate listed for the preset, when one is stated in closed
    /// form (RS-HB has none).
    pub fn nominal_rate(&self, mu: f64, l: f64) -> Option<f64> {
        let k = l / mu;
        let sk = k.sqrt();
        Some(match self {
            PresetId::GdPop => 1.0 - 1.0 / k,
            PresetId::GdFastest => 1.0 - 2.0 / (k + 1.0),
            PresetId::RsGd => 1.0 - 2.0 / (k + sk),
            PresetId::NagPop | PresetId::Tmm => 1.0 - 1.0 / sk,
            PresetId::NagFastest => 1.0 - 2.0 / (3.0 * k + 1.0).sqrt(),
            PresetId::NagBetaOpt { alpha } => {
                let a = alpha.unwrap_or(0.5 / l);
                1.0 - (a * mu).sqrt()
            }
            PresetId::Hb => 1.0 - 2.0 / (sk + 1.0),
            PresetId::RsHb { .. } => return None,
        })
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .copied()
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown preset {s:?}; expected one of {}",
                    PresetId::ALL.map(|p| p.name()).join(", ")
                ))
            })
    }
}

/// Default `a` for RS-HB.
pub const RS_HB_DEFAULT_A: f64 = std::f64::consts::SQRT_2;

/// Resolves a preset to concrete parameters for `0 < μ < L`.
pub fn resolve_preset(id: PresetId, mu: f64, l: f64) -> Result<GmmParams> {
    if !(mu > 0.0 && mu < l && l.is_finite()) {
        return Err(Error::Domain(format!("presets need 0 < mu < L, got mu={mu}, L={l}")));
    }
    let k = l / mu;
    let sk = k.sqrt();
    let (alpha, beta, nu) = match id {
        PresetId::GdPop => (1.0 / l, 0.0, 0.0),
        PresetId::GdFastest => (2.0 / (l + mu), 0.0, 0.0),
        PresetId::RsGd => (2.0 / (l + (l * mu).sqrt()), 0.0, 0.0),
        PresetId::NagPop => {
            let b = (1.0 - 1.0 / sk) / (1.0 + 1.0 / sk);
            (1.0 / l, b, b)
        }
        PresetId::NagFastest => {
            let s = (3.0 * k + 1.0).sqrt();
            let b = (s - 2.0) / (s + 2.0);
            (4.0 / (3.0 * l + mu), b, b)
        }
        PresetId::NagBetaOpt { alpha } => {
            let a = alpha.unwrap_or(0.5 / l);
            if !(a > 0.0 && a <= 1.0 / l) {
                return Err(Error::Range(format!(
                    "NAG-beta-opt needs alpha in (0, 1/L] = (0, {}], got {a}",
                    1.0 / l
                )));
            }
            let e = (a * mu).sqrt();
            let b = (1.0 - e) / (1.0 + e);
            (a, b, b)
        }
        PresetId::Tmm => {
            let rb = 1.0 - 1.0 / sk;
            (
                (1.0 + rb) / l,
                rb * rb / (2.0 - rb),
                rb * rb / ((1.0 + rb) * (2.0 - rb)),
            )
        }
        PresetId::Hb => {
            let s = l.sqrt() + mu.sqrt();
            (4.0 / (s * s), ((sk - 1.0) / (sk + 1.0)).powi(2), 0.0)
        }
        PresetId::RsHb { a } => {
            let a = a.unwrap_or(RS_HB_DEFAULT_A);
            if !(a > 0.0 && a < sk) {
                return Err(Error::Range(format!(
                    "RS-HB needs 0 < a < sqrt(kappa) = {sk}, got {a}"
                )));
            }
            (a * a / l, (1.0 - a / sk).powi(2), 0.0)
        }
    };
    GmmParams::new(alpha, beta, nu)
}

/// Iterate pair `(x_k, x_{k−1})` and counter.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub x_curr: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub k: usize,
}

impl GmmState {
    /// Initial state with `x_{−1} = x_0`.
    pub fn new(x0: Vec<f64>) -> Self {
        GmmState {
            x_prev: x0.clone(),
            x_curr: x0,
            k: 0,
        }
    }
}

/// `y_k = x_k + ν(x_k − x_{k−1})`.
pub fn query_point(params: &GmmParams, state: &GmmState) -> Vec<f64> {
    let mut y = vec![0.0; state.x_curr.len()];
    query_point_into(params, &state.x_curr, &state.x_prev, &mut y);
    y
}

pub(crate) fn query_point_into(params: &GmmParams, x: &[f64], x_prev: &[f64], y: &mut [f64]) {
    for i in 0..x.len() {
        y[i] = x[i] + params.nu * (x[i] - x_prev[i]);
    }
}

/// One iteration given the noisy gradient evaluated at the query point.
pub fn step(params: &GmmParams, state: &GmmState, grad_noisy: &[f64]) -> Result<GmmState> {
    let d = state.x_curr.len();
    if grad_noisy.len() != d || state.x_prev.len() != d {
        return Err(Error::Validation(format!(
            "gradient has length {} but the state dimension is {d}",
            grad_noisy.len()
        )));
    }
    let mut next = vec![0.0; d];
    step_into(params, &state.x_curr, &state.x_prev, grad_noisy, &mut next);
    Ok(GmmState {
        x_prev: state.x_curr.clone(),
        x_curr: next,
        k: state.k + 1,
    })
}

pub(crate) fn step_into(params: &GmmParams, x: &[f64], x_prev: &[f64], grad: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = x[i] - params.alpha * grad[i] + params.beta * (x[i] - x_prev[i]);
    }
}

/// Per-eigenvalue block `Ã^{(λ)} = [[1+β−α(1+ν)λ, −β+ανλ], [1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCompanion {
    pub lambda: f64,
    pub a: M2,
}

impl BlockCompanion {
    pub fn new(params: &GmmParams, lambda: f64) -> Self {
        let GmmParams { alpha, beta, nu } = *params;
        BlockCompanion {
            lambda,
            a: [
                [1.0 + beta - alpha * (1.0 + nu) * lambda, -beta + alpha * nu * lambda],
                [1.0, 0.0],
            ],
        }
    }

    pub fn trace(&self) -> f64 {
        self.a[0][0]
    }

    /// `β − ανλ`.
    pub fn determinant(&self) -> f64 {
        -self.a[0][1]
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius_from_trace_det(self.trace(), self.determinant())
    }
}

/// Noiseless rate on a quadratic: `max_i ρ(Ã^{(λ_i)})`.
pub fn quadratic_rate(params: &GmmParams, eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("eigenvalues must be positive".into()));
    }
    Ok(eigenvalues
        .iter()
        .map(|&l| BlockCompanion::new(params, l).spectral_radius())
        .fold(0.0, f64::max))
}

//! Exact risk analytics on strongly convex quadratics with isotropic Gaussian
//! noise: H∞ gains, the risk-sensitive index through the per-mode Riccati
//! equations or through the frequency integral, and the large-deviation rate
//! function obtained as a convex conjugate of the index.
//!
//! Everything factorizes over the eigenvalues `λ_i` of `Q`; per mode the
//! squared transfer gain is
//!
//! ```text
//! h_ω(λ) = α²λ / (2·|1 + b̃ e^{iω} + c̃ e^{2iω}|²),
//! b̃ = αλ(1+ν) − (1+β),   c̃ = β − αλν.
//! ```

use crate::dare::{lyapunov_2x2, solve_dare_2x2, DareInstance, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::gmm::{quadratic_rate, BlockCompanion, GmmParams};
use crate::numeric::{golden_section_max, simpson_doubling, Quadrature};
use crate::problems::QuadraticProblem;
use std::f64::consts::PI;
use std::fmt;

/// Per-eigenvalue gain data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGain {
    pub lambda: f64,
    pub b_tilde: f64,
    pub c_tilde: f64,
    /// `min_ω |1 + b̃e^{iω} + c̃e^{2iω}|`.
    pub s_tilde: f64,
    /// `(α/√2)·√λ/s̃`, i.e. `max_ω √h_ω(λ)`.
    pub gain: f64,
}

fn b_c(params: &GmmParams, lambda: f64) -> (f64, f64) {
    let GmmParams { alpha, beta, nu } = *params;
    (alpha * lambda * (1.0 + nu) - (1.0 + beta), beta - alpha * lambda * nu)
}

/// Interior-minimum predicate of the two-case `s̃` formula (strict; ties go
/// to the boundary case).
fn interior_case(b: f64, c: f64) -> bool {
    c > 0.0 && b.abs() * (1.0 + c) / (4.0 * c) < 1.0
}

pub fn mode_gain(params: &GmmParams, lambda: f64) -> ModeGain {
    let (b, c) = b_c(params, lambda);
    let s = if interior_case(b, c) {
        (1.0 - c).abs() * (1.0 - b * b / (4.0 * c)).sqrt()
    } else {
        ((1.0 + c).abs() - b.abs()).abs()
    };
    ModeGain {
        lambda,
        b_tilde: b,
        c_tilde: c,
        s_tilde: s,
        gain: params.alpha / 2f64.sqrt() * lambda.sqrt() / s,
    }
}

/// Frequency in `[0, π]` at which `h_ω(λ)` peaks.
pub fn peak_frequency(params: &GmmParams, lambda: f64) -> f64 {
    let (b, c) = b_c(params, lambda);
    if interior_case(b, c) {
        (-b * (1.0 + c) / (4.0 * c)).clamp(-1.0, 1.0).acos()
    } else if b * (1.0 + c) > 0.0 {
        // The quadratic in cos ω is minimized at cos ω = −1.
        PI
    } else {
        0.0
    }
}

fn ensure_stable(params: &GmmParams, eigenvalues: &[f64]) -> Result<()> {
    let rho = quadratic_rate(params, eigenvalues)?;
    if rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "parameters (alpha={}, beta={}, nu={}) are not linearly convergent on this spectrum (rho = {rho})",
            params.alpha, params.beta, params.nu
        )))
    }
}

/// H∞ norm over the spectrum `{μ, L}` (the extreme modes dominate).
pub fn h_infinity_quadratic(params: &GmmParams, mu: f64, l: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::Domain(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    ensure_stable(params, &[mu, l])?;
    Ok(mode_gain(params, mu).gain.max(mode_gain(params, l).gain))
}

/// Per-mode gains for every supplied eigenvalue and their maximum.
pub fn mode_gains(params: &GmmParams, eigenvalues: &[f64]) -> Result<(Vec<ModeGain>, f64)> {
    ensure_stable(params, eigenvalues)?;
    let gains: Vec<ModeGain> = eigenvalues.iter().map(|&l| mode_gain(params, l)).collect();
    let h = gains.iter().map(|g| g.gain).fold(0.0, f64::max);
    Ok((gains, h))
}

/// `h_ω(λ)`; a non-positive denominator (a pole on the unit circle) is an
/// error.
pub fn transfer_gain(params: &GmmParams, lambda: f64, omega: f64) -> Result<f64> {
    let (b, c) = b_c(params, lambda);
    let den = transfer_denominator(b, c, omega);
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "transfer function has a pole on the unit circle at lambda={lambda}, omega={omega}"
        )));
    }
    Ok(params.alpha * params.alpha * lambda / (2.0 * den))
}

#[inline]
fn transfer_denominator(b: f64, c: f64, omega: f64) -> f64 {
    1.0 + b * b + c * c + 2.0 * (b * (1.0 + c) * omega.cos() + c * (2.0 * omega).cos())
}

/// Finiteness boundary `θ* = d/H∞²` of a quadratic problem.
pub fn theta_star(problem: &QuadraticProblem, params: &GmmParams) -> Result<f64> {
    let (_, h) = mode_gains(params, problem.eigenvalues())?;
    Ok(problem.dim() as f64 / (h * h))
}

/// Relative band below `θ*` treated as the boundary itself: `θ*` is only
/// known to a few ulps, and on the boundary the index is infinite.
const BOUNDARY_BAND: f64 = 1e-12;

fn past_boundary(theta: f64, t_star: f64) -> bool {
    theta >= t_star * (1.0 - BOUNDARY_BAND)
}

/// Distinct eigenvalues with multiplicities (exact equality).
fn distinct_modes(eigenvalues: &[f64]) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &l in eigenvalues {
        match out.iter_mut().find(|(v, _)| *v == l) {
            Some((_, m)) => *m += 1,
            None => out.push((l, 1)),
        }
    }
    out
}

/// Risk index through the Riccati route (`θ > 0`):
/// `R(θ) = −(σ²/θ)·Σ_i log(1 − (θ/d)·α²·X̃₁₁^{(λ_i)})`, `+∞` when
/// `√θ·H∞ ≥ √d`.
pub fn risk_index_riccati(
    problem: &QuadraticProblem,
    params: &GmmParams,
    theta: f64,
    sigma2: f64,
) -> Result<ExtReal> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Range(format!(
            "the Riccati route needs theta > 0, got {theta}"
        )));
    }
    check_sigma2(sigma2)?;
    let d = problem.dim();
    let t_star = theta_star(problem, params)?;
    if past_boundary(theta, t_star) {
        return Ok(ExtReal::PosInf);
    }
    let alpha2 = params.alpha * params.alpha;
    let mut total = 0.0;
    for (lambda, mult) in distinct_modes(problem.eigenvalues()) {
        let inst = DareInstance::for_theta(params, lambda, theta, d)?;
        let sol = solve_dare_2x2(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| match e {
            Error::Convergence {
                what,
                iterations,
                residual,
                hint,
            } => Error::Convergence {
                what,
                iterations,
                residual,
                hint: format!("{hint} (theta = {theta}, theta* = {t_star})"),
            },
            other => other,
        })?;
        let arg = 1.0 - theta / d as f64 * alpha2 * sol.x_tilde[0][0];
        if !(arg > 0.0) {
            return Err(Error::Numerical(format!(
                "log argument {arg} is not positive for lambda={lambda} (theta* = {t_star})"
            )));
        }
        total += mult as f64 * arg.ln();
    }
    Ok(ExtReal::Finite(-sigma2 / theta * total))
}

/// `θ → 0` limit of the index from the Lyapunov solutions:
/// `R(0) = (σ²/d)·Σ_i α²·X̃₁₁^{(λ_i)}`, the long-run mean suboptimality.
pub fn risk_index_zero(problem: &QuadraticProblem, params: &GmmParams, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    ensure_stable(params, problem.eigenvalues())?;
    let alpha2 = params.alpha * params.alpha;
    let mut total = 0.0;
    for (lambda, mult) in distinct_modes(problem.eigenvalues()) {
        total += mult as f64 * alpha2 * lyapunov_2x2(params, lambda)?[0][0];
    }
    Ok(sigma2 / problem.dim() as f64 * total)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Range(format!("sigma2 must be positive, got {sigma2}")))
    }
}

/// `(1/2π)·∫_{−π}^{π} log(1 − (θ/d)·h_ω(λ)) dω` for one mode, split at the
/// peak frequency so any near-singularity sits on a panel boundary.
fn mode_log_integral(params: &GmmParams, lambda: f64, theta_over_d: f64, q: &Quadrature) -> Result<f64> {
    let (b, c) = b_c(params, lambda);
    let scale = params.alpha * params.alpha * lambda / 2.0;
    let f = |w: f64| (-theta_over_d * scale / transfer_denominator(b, c, w)).ln_1p();
    let w_peak = peak_frequency(params, lambda);
    let left = simpson_doubling(f, 0.0, w_peak, q)?;
    let right = simpson_doubling(f, w_peak, PI, q)?;
    Ok((left + right) / PI)
}

/// `(1/2π)·∫ h_ω(λ) dω` for one mode.
fn mode_gain_integral(params: &GmmParams, lambda: f64, q: &Quadrature) -> Result<f64> {
    let (b, c) = b_c(params, lambda);
    let scale = params.alpha * params.alpha * lambda / 2.0;
    let f = |w: f64| scale / transfer_denominator(b, c, w);
    let w_peak = peak_frequency(params, lambda);
    Ok((simpson_doubling(f, 0.0, w_peak, q)? + simpson_doubling(f, w_peak, PI, q)?) / PI)
}

/// Scaled cumulant `Λ(θ) = −Σ_i (1/2π)∫ log(1 − (θ/d)h_ω(λ_i)) dω`, so that
/// `θ·R(θ) = σ²·Λ(θ)`. Only valid for `θ < θ*`.
fn cumulant(problem: &QuadraticProblem, params: &GmmParams, theta: f64, q: &Quadrature) -> Result<f64> {
    let d = problem.dim() as f64;
    let mut total = 0.0;
    for (lambda, mult) in distinct_modes(problem.eigenvalues()) {
        total += mult as f64 * mode_log_integral(params, lambda, theta / d, q)?;
    }
    Ok(-total)
}

/// Risk index through the frequency integral; any sign of `θ`, with the
/// continuity value at `θ = 0`.
pub fn risk_index_integral(
    problem: &QuadraticProblem,
    params: &GmmParams,
    theta: f64,
    sigma2: f64,
    quadrature: &Quadrature,
) -> Result<ExtReal> {
    check_sigma2(sigma2)?;
    if !theta.is_finite() {
        return Err(Error::Range("theta must be finite".into()));
    }
    let t_star = theta_star(problem, params)?;
    if past_boundary(theta, t_star) {
        return Ok(ExtReal::PosInf);
    }
    if theta == 0.0 {
        let d = problem.dim() as f64;
        let mut total = 0.0;
        for (lambda, mult) in distinct_modes(problem.eigenvalues()) {
            total += mult as f64 * mode_gain_integral(params, lambda, quadrature)?;
        }
        return Ok(ExtReal::Finite(sigma2 / d * total));
    }
    Ok(ExtReal::Finite(
        sigma2 * cumulant(problem, params, theta, quadrature)? / theta,
    ))
}

/// Which computation produced a [`RiskProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskRoute {
    Riccati,
    Integral,
    MonteCarlo,
    Bound,
}

impl fmt::Display for RiskRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskRoute::Riccati => "riccati",
            RiskRoute::Integral => "integral",
            RiskRoute::MonteCarlo => "montecarlo",
            RiskRoute::Bound => "bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskProfile {
    pub theta_grid: Vec<f64>,
    pub values: Vec<ExtReal>,
    pub theta_star: f64,
    pub route: RiskRoute,
    pub sigma2: f64,
    pub d: usize,
}

/// Evaluates the index on a θ grid through one of the exact routes. The
/// Riccati route maps `θ ≤ 0` requests to the integral route.
pub fn risk_profile(
    problem: &QuadraticProblem,
    params: &GmmParams,
    sigma2: f64,
    thetas: &[f64],
    route: RiskRoute,
) -> Result<RiskProfile> {
    let q = Quadrature::default();
    let values = thetas
        .iter()
        .map(|&t| match route {
            RiskRoute::Riccati if t > 0.0 => risk_index_riccati(problem, params, t, sigma2),
            RiskRoute::Riccati | RiskRoute::Integral => {
                risk_index_integral(problem, params, t, sigma2, &q)
            }
            _ => Err(Error::Validation(format!(
                "route {route} is not an exact route"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskProfile {
        theta_grid: thetas.to_vec(),
        values,
        theta_star: theta_star(problem, params)?,
        route,
        sigma2,
        d: problem.dim(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    pub s_grid: Vec<f64>,
    pub i_values: Vec<ExtReal>,
    /// Zero of the rate function, the long-run mean `R(0)`.
    pub argmin_s: f64,
    pub h_inf: f64,
}

/// Lower end of the θ search, in units of `σ²`.
pub const THETA_FLOOR_PER_SIGMA2: f64 = -1e6;

/// Conjugate value at one `s` (see [`rate_function`]).
fn rate_at(
    problem: &QuadraticProblem,
    params: &GmmParams,
    sigma2: f64,
    s: f64,
    t_star: f64,
    q: &Quadrature,
) -> Result<ExtReal> {
    // g(θ) = (θ/2σ²)(s − R(θ)) = θs/(2σ²) − Λ(θ)/2, concave, g(0) = 0.
    let mut err = None;
    let mut g = |theta: f64| -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        match cumulant(problem, params, theta, q) {
            Ok(l) => theta * s / (2.0 * sigma2) - 0.5 * l,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    };
    let hi = t_star * (1.0 - 1e-9);
    let floor = THETA_FLOOR_PER_SIGMA2 * sigma2;
    let tol = 1e-10;
    let probe = 1e-6 * t_star;
    // Decide on which side of 0 the maximizer lies from the sign of g near 0.
    let (lo, up) = if g(probe) > 0.0 {
        (0.0, hi)
    } else if g(-probe) > 0.0 {
        // Expand the lower bracket geometrically until g turns down.
        let mut step = -probe;
        let mut prev = g(step);
        loop {
            let next = 2.0 * step;
            if next < floor {
                if let Some(e) = err {
                    return Err(e);
                }
                return Ok(ExtReal::PosInf);
            }
            let val = g(next);
            if val < prev {
                break (next, step / 2.0);
            }
            prev = val;
            step = next;
        }
    } else {
        return Ok(ExtReal::Finite(0.0));
    };
    let (_, best) = golden_section_max(&mut g, lo, up, tol);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ExtReal::Finite(best.max(0.0)))
}

/// Rate function `I(s) = sup_{θ < θ*} (θ/2σ²)(s − R(θ))` on a grid of `s`.
///
/// Each supremum is a golden-section search on the concave objective; the
/// bracket below zero is expanded geometrically down to `−10⁶σ²`, beyond
/// which `s` is reported as below the essential infimum (`+∞`).
pub fn rate_function(
    problem: &QuadraticProblem,
    params: &GmmParams,
    sigma2: f64,
    s_grid: &[f64],
) -> Result<RateFunction> {
    check_sigma2(sigma2)?;
    let (_, h_inf) = mode_gains(params, problem.eigenvalues())?;
    let t_star = problem.dim() as f64 / (h_inf * h_inf);
    let q = Quadrature::default();
    let i_values = s_grid
        .iter()
        .map(|&s| {
            if s <= 0.0 {
                // Suboptimality is non-negative; the sup is unbounded.
                Ok(ExtReal::PosInf)
            } else {
                rate_at(problem, params, sigma2, s, t_star, &q)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateFunction {
        s_grid: s_grid.to_vec(),
        i_values,
        argmin_s: risk_index_zero(problem, params, sigma2)?,
        h_inf,
    })
}

/// Asymptotic tail exponent `inf_{s ≥ t} I(s)` for the running-average
/// suboptimality. By convexity this is `0` for `t` at or below the mean and
/// `I(t)` above it.
pub fn tail_bound(problem: &QuadraticProblem, params: &GmmParams, sigma2: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Range(format!("t must be positive, got {t}")));
    }
    let rf = rate_function(problem, params, sigma2, &[t])?;
    if t <= rf.argmin_s {
        return Ok(0.0);
    }
    Ok(rf.i_values[0].to_f64())
}

/// Convenience: mode gain and companion radius for reporting.
pub fn mode_report(params: &GmmParams, lambda: f64) -> (ModeGain, f64) {
    (
        mode_gain(params, lambda),
        BlockCompanion::new(params, lambda).spectral_radius(),
    )
}

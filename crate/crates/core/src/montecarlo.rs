//! Sample-path simulation of noisy generalized momentum methods, empirical
//! risk-sensitive costs, tail frequencies and Pareto sweeps.
//!
//! Paths are independent work items. Path `ℓ` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `ℓ`, so an ensemble is a pure
//! function of the configuration whatever the number of worker threads.

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::gmm::{quadratic_rate, query_point_into, step_into, GmmParams};
use crate::linalg::norm2;
use crate::noise::{sample_noise_into, NoiseContext, NoiseModel};
use crate::problems::{Problem, QuadraticProblem};
use crate::risk_bounds::BoundCoefficients;
use crate::risk_exact::{risk_index_integral, risk_index_riccati};
use crate::numeric::{linspace, Quadrature};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;

/// Iterates with a norm above this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e30;

/// Effective sample sizes below this make risk estimates unreliable.
pub const ESS_WARN: f64 = 100.0;

/// Simulation settings beyond the problem, method and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Horizon `K`; iterates `x_0..=x_K` are produced.
    pub k: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Record every `record_stride`-th iterate (plus `k = K`). Running sums
    /// always accumulate every iterate.
    pub record_stride: usize,
    /// Starting point (`x_{−1} = x_0`); `None` means the origin.
    pub x0: Option<Vec<f64>>,
}

impl SimOptions {
    pub fn new(k: usize, n_paths: usize, seed: u64) -> Self {
        SimOptions {
            k,
            n_paths,
            seed,
            record_stride: 1,
            x0: None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    /// The recorded iteration indices.
    pub fn record_ks(&self) -> Vec<usize> {
        let stride = self.record_stride.max(1);
        let mut ks: Vec<usize> = (0..=self.k).step_by(stride).collect();
        if *ks.last().unwrap() != self.k {
            ks.push(self.k);
        }
        ks
    }
}

/// Simulated paths. Per-path rows are stored contiguously: entry
/// `(path, j)` belongs to iteration `record_ks[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub k: usize,
    pub seed: u64,
    pub record_ks: Vec<usize>,
    /// `f(x_k) − f*`; NaN after divergence.
    pub subopt: Vec<f64>,
    /// Running sums `S_k = Σ_{j≤k} (f(x_j) − f*)`; NaN after divergence.
    pub running_sum: Vec<f64>,
    /// `f(x̄_K) − f*` for the averaged iterate `x̄_K = (K+1)⁻¹ Σ_{k≤K} x_k`.
    pub averaged_subopt: Vec<f64>,
    /// First iteration at which the path exceeded [`DIVERGENCE_NORM`].
    pub diverged_at: Vec<Option<usize>>,
    /// Per path, the largest relative excess of the Lyapunov decay
    /// inequality; present when a certificate was supplied.
    pub lyapunov_excess: Option<Vec<f64>>,
}

impl PathEnsemble {
    fn n_rec(&self) -> usize {
        self.record_ks.len()
    }

    pub fn subopt_row(&self, path: usize) -> &[f64] {
        let n = self.n_rec();
        &self.subopt[path * n..(path + 1) * n]
    }

    pub fn running_sum_row(&self, path: usize) -> &[f64] {
        let n = self.n_rec();
        &self.running_sum[path * n..(path + 1) * n]
    }

    pub fn n_diverged(&self) -> usize {
        self.diverged_at.iter().filter(|d| d.is_some()).count()
    }

    /// Indices of paths that never diverged.
    pub fn finite_paths(&self) -> Vec<usize> {
        (0..self.n_paths).filter(|&p| self.diverged_at[p].is_none()).collect()
    }

    /// Largest Lyapunov excess over all paths.
    pub fn max_lyapunov_excess(&self) -> Option<f64> {
        self.lyapunov_excess
            .as_ref()
            .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

struct PathResult {
    subopt: Vec<f64>,
    running_sum: Vec<f64>,
    averaged_subopt: f64,
    diverged_at: Option<usize>,
    lyapunov_excess: f64,
}

/// Simulates `n_paths` noisy trajectories of `K` steps from the origin.
pub fn simulate(
    problem: &Problem,
    params: &GmmParams,
    noise: &NoiseModel,
    k: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_with(problem, params, noise, &SimOptions::new(k, n_paths, seed), None)
}

/// Simulation with explicit options and an optional certificate whose
/// decay inequality `V_{k+1} ≤ pV_k + qV_{k−1} + r‖w_{k+1}‖²` is checked at
/// every step `k ≥ 1`.
pub fn simulate_with(
    problem: &Problem,
    params: &GmmParams,
    noise: &NoiseModel,
    opts: &SimOptions,
    certificate: Option<&BoundCoefficients>,
) -> Result<PathEnsemble> {
    noise.validate()?;
    if opts.n_paths == 0 {
        return Err(Error::Validation("at least one path is required".into()));
    }
    if opts.record_stride == 0 {
        return Err(Error::Validation("the record stride must be at least 1".into()));
    }
    let d = problem.dim();
    let x0 = opts.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    if x0.len() != d {
        return Err(Error::Validation(format!(
            "x0 has length {} but the problem dimension is {d}",
            x0.len()
        )));
    }
    if let Some(c) = certificate {
        if c.params != *params {
            return Err(Error::Validation(
                "the certificate was built for different method parameters".into(),
            ));
        }
    }
    let record_ks = opts.record_ks();
    let n_rec = record_ks.len();
    let cells = opts.n_paths.saturating_mul(n_rec);
    if cells > 1 << 25 {
        return Err(Error::Validation(format!(
            "{} paths x {n_rec} recorded iterates is too large; increase the record stride",
            opts.n_paths
        )));
    }

    let results: Vec<Result<PathResult>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|path| run_path(problem, params, noise, opts, &x0, &record_ks, certificate, path))
        .collect();

    let mut ens = PathEnsemble {
        n_paths: opts.n_paths,
        k: opts.k,
        seed: opts.seed,
        record_ks,
        subopt: Vec::with_capacity(cells),
        running_sum: Vec::with_capacity(cells),
        averaged_subopt: Vec::with_capacity(opts.n_paths),
        diverged_at: Vec::with_capacity(opts.n_paths),
        lyapunov_excess: certificate.map(|_| Vec::with_capacity(opts.n_paths)),
    };
    for r in results {
        let r = r?;
        ens.subopt.extend_from_slice(&r.subopt);
        ens.running_sum.extend_from_slice(&r.running_sum);
        ens.averaged_subopt.push(r.averaged_subopt);
        ens.diverged_at.push(r.diverged_at);
        if let Some(v) = ens.lyapunov_excess.as_mut() {
            v.push(r.lyapunov_excess);
        }
    }
    Ok(ens)
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    problem: &Problem,
    params: &GmmParams,
    noise: &NoiseModel,
    opts: &SimOptions,
    x0: &[f64],
    record_ks: &[usize],
    cert: Option<&BoundCoefficients>,
    path: usize,
) -> Result<PathResult> {
    let d = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(path as u64);
    let needs_eval = noise.needs_evaluator();

    let mut x = x0.to_vec();
    let mut x_prev = x0.to_vec();
    let mut next = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut x_sum = x0.to_vec();

    let n_rec = record_ks.len();
    let mut subopt = Vec::with_capacity(n_rec);
    let mut running_sum = Vec::with_capacity(n_rec);
    let mut next_rec = 0;

    let mut f = problem.suboptimality_unchecked(&x);
    let mut s = f;
    let x_star = problem.x_star();
    let lyap = |f: f64, x: &[f64], xp: &[f64]| cert.map(|c| c.c1 * f + c.quadratic_part(x_star, x, xp));
    let mut v_prev: Option<f64> = None;
    let mut v_curr = lyap(f, &x, &x_prev);
    let mut excess = f64::NEG_INFINITY;
    let mut diverged_at = None;

    for k in 0..=opts.k {
        if next_rec < n_rec && record_ks[next_rec] == k {
            subopt.push(f);
            running_sum.push(s);
            next_rec += 1;
        }
        if k == opts.k {
            break;
        }
        query_point_into(params, &x, &x_prev, &mut y);
        problem.gradient_into(&y, &mut grad);
        if needs_eval {
            let (xr, xpr, gr) = (&x, &x_prev, &grad);
            let eval = move |w: &[f64]| {
                let g: Vec<f64> = gr.iter().zip(w).map(|(a, b)| a + b).collect();
                let mut out = vec![0.0; d];
                step_into(params, xr, xpr, &g, &mut out);
                problem.suboptimality_unchecked(&out)
            };
            let ctx = NoiseContext { problem, y: &y, k, evaluator: Some(&eval) };
            sample_noise_into(noise, &mut rng, &ctx, &mut w)?;
        } else {
            let ctx = NoiseContext { problem, y: &y, k, evaluator: None };
            sample_noise_into(noise, &mut rng, &ctx, &mut w)?;
        }
        for i in 0..d {
            grad[i] += w[i];
        }
        step_into(params, &x, &x_prev, &grad, &mut next);
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut next);

        let norm = norm2(&x);
        if !(norm <= DIVERGENCE_NORM) {
            diverged_at = Some(k + 1);
            break;
        }
        f = problem.suboptimality_unchecked(&x);
        s += f;
        for i in 0..d {
            x_sum[i] += x[i];
        }
        if let Some(c) = cert {
            let v_next = lyap(f, &x, &x_prev);
            if let (Some(vp), Some(vc), Some(vn)) = (v_prev, v_curr, v_next) {
                let w2: f64 = w.iter().map(|v| v * v).sum();
                let rhs = c.p * vc + c.q * vp + c.r * w2;
                let scale = vn.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
                excess = excess.max((vn - rhs) / scale);
            }
            v_prev = v_curr;
            v_curr = v_next;
        }
    }

    let averaged_subopt = if diverged_at.is_some() {
        subopt.resize(n_rec, f64::NAN);
        running_sum.resize(n_rec, f64::NAN);
        f64::NAN
    } else {
        let inv = 1.0 / (opts.k + 1) as f64;
        x_sum.iter_mut().for_each(|v| *v *= inv);
        problem.suboptimality_unchecked(&x_sum)
    };
    Ok(PathResult {
        subopt,
        running_sum,
        averaged_subopt,
        diverged_at,
        lyapunov_excess: excess,
    })
}

/// Empirical risk-sensitive cost `R̂_k(θ)` at the recorded iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRisk {
    pub theta: f64,
    pub ks: Vec<usize>,
    pub values_by_k: Vec<f64>,
    /// Delta-method standard error of each value.
    pub std_errors: Vec<f64>,
    /// Effective sample size `(Σe)²/Σe²` of the exponential tilt.
    pub ess: Vec<f64>,
    pub sigma2_hat: f64,
    pub n_used: usize,
    pub n_diverged: usize,
    /// Risk-seeking estimates (`θ < 0`) with excluded divergent paths are
    /// biased toward optimism.
    pub biased_by_exclusion: bool,
}

impl EmpiricalRisk {
    pub fn final_value(&self) -> f64 {
        *self.values_by_k.last().unwrap()
    }

    pub fn final_std_error(&self) -> f64 {
        *self.std_errors.last().unwrap()
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `R̂_k(θ) = (2σ̂²/(θ(k+1)))·[log Σ_ℓ exp((θ/2σ̂²)S_k^{(ℓ)}) − log n]`, and
/// the plain mean of `S_k/(k+1)` at `θ = 0`.
pub fn empirical_risk(ensemble: &PathEnsemble, theta: f64, sigma2_hat: f64) -> Result<EmpiricalRisk> {
    if !theta.is_finite() {
        return Err(Error::Range(format!("theta must be finite, got {theta}")));
    }
    if !(sigma2_hat > 0.0) {
        return Err(Error::Range(format!("sigma2_hat must be positive, got {sigma2_hat}")));
    }
    let paths = ensemble.finite_paths();
    if paths.is_empty() {
        return Err(Error::Numerical("every simulated path diverged".into()));
    }
    let n = paths.len() as f64;
    let n_rec = ensemble.record_ks.len();
    let mut values = Vec::with_capacity(n_rec);
    let mut ses = Vec::with_capacity(n_rec);
    let mut ess = Vec::with_capacity(n_rec);
    let mut z = vec![0.0; paths.len()];
    for (j, &k) in ensemble.record_ks.iter().enumerate() {
        let kp1 = (k + 1) as f64;
        for (i, &p) in paths.iter().enumerate() {
            z[i] = ensemble.running_sum[p * n_rec + j];
        }
        if theta == 0.0 {
            let mean = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            values.push(mean / kp1);
            ses.push((var / n).sqrt() / kp1);
            ess.push(n);
            continue;
        }
        let tilt = theta / (2.0 * sigma2_hat);
        let m = z.iter().map(|s| tilt * s).fold(f64::NEG_INFINITY, f64::max);
        let (mut s1, mut s2) = (0.0, 0.0);
        for s in &z {
            let e = (tilt * s - m).exp();
            s1 += e;
            s2 += e * e;
        }
        let log_mean = m + (s1 / n).ln();
        let scale = 2.0 * sigma2_hat / (theta * kp1);
        values.push(scale * log_mean);
        // Var(ē)/ē² with ē the tilt mean, propagated through the log.
        let mean_e = s1 / n;
        let var_e = (s2 / n - mean_e * mean_e).max(0.0) * n / (n - 1.0).max(1.0);
        ses.push(scale.abs() * (var_e / n).sqrt() / mean_e);
        ess.push(s1 * s1 / s2);
    }
    let n_diverged = ensemble.n_diverged();
    Ok(EmpiricalRisk {
        theta,
        ks: ensemble.record_ks.clone(),
        values_by_k: values,
        std_errors: ses,
        ess,
        sigma2_hat,
        n_used: paths.len(),
        n_diverged,
        biased_by_exclusion: theta < 0.0 && n_diverged > 0,
    })
}

/// Empirical tail frequencies at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFrequencies {
    /// Fraction of paths with `S_K/(K+1) ≥ t`.
    pub running_average: f64,
    /// Fraction of paths with `f(x̄_K) − f* ≥ t`.
    pub averaged_iterate: f64,
    pub n_used: usize,
}

impl TailFrequencies {
    /// Binomial standard error of the running-average fraction.
    pub fn running_average_se(&self) -> f64 {
        let p = self.running_average;
        (p * (1.0 - p) / self.n_used as f64).sqrt()
    }
}

pub fn empirical_tail(ensemble: &PathEnsemble, t: f64) -> Result<TailFrequencies> {
    if !(t >= 0.0) {
        return Err(Error::Range(format!("t must be >= 0, got {t}")));
    }
    let paths = ensemble.finite_paths();
    if paths.is_empty() {
        return Err(Error::Numerical("every simulated path diverged".into()));
    }
    let n_rec = ensemble.record_ks.len();
    let kp1 = (ensemble.k + 1) as f64;
    let (mut run, mut avg) = (0usize, 0usize);
    for &p in &paths {
        if ensemble.running_sum[p * n_rec + n_rec - 1] / kp1 >= t {
            run += 1;
        }
        if ensemble.averaged_subopt[p] >= t {
            avg += 1;
        }
    }
    let n = paths.len() as f64;
    Ok(TailFrequencies {
        running_average: run as f64 / n,
        averaged_iterate: avg as f64 / n,
        n_used: paths.len(),
    })
}

/// Method families for Pareto sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `β = ν = 0`, one-dimensional grid over `α`.
    Gd,
    /// `ν = 0`.
    Hb,
    /// `ν = β`.
    Nag,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gd => "gd",
            Method::Hb => "hb",
            Method::Nag => "nag",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Method::Gd),
            "hb" => Ok(Method::Hb),
            "nag" => Ok(Method::Nag),
            _ => Err(Error::Validation(format!("unknown method {s:?} (expected gd, hb or nag)"))),
        }
    }
}

/// Open-interval grid: `n` interior points of `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn points(&self) -> Vec<f64> {
        let v = linspace(self.lo, self.hi, self.n + 2);
        v[1..=self.n].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub alpha: AxisSpec,
    /// Ignored for gradient descent.
    pub beta: AxisSpec,
}

impl GridSpec {
    /// Desk-scale defaults: `(0, 2/L) × (0, 2)` at 300×300 for momentum
    /// methods, 500 step sizes on `(0, 2/L)` for gradient descent;
    /// `paper_scale` raises these to 3000×3000 and 5000.
    pub fn default_for(method: Method, l: f64, paper_scale: bool) -> Self {
        let (n2, n1) = if paper_scale { (3000, 5000) } else { (300, 500) };
        let n = if method == Method::Gd { n1 } else { n2 };
        GridSpec {
            alpha: AxisSpec { lo: 0.0, hi: 2.0 / l, n },
            beta: AxisSpec {
                lo: 0.0,
                hi: 2.0,
                n: if method == Method::Gd { 1 } else { n2 },
            },
        }
    }

    pub fn params(&self, method: Method) -> Vec<GmmParams> {
        let alphas = self.alpha.points();
        match method {
            Method::Gd => alphas.iter().filter_map(|&a| GmmParams::gd(a).ok()).collect(),
            Method::Hb | Method::Nag => {
                let betas = self.beta.points();
                let mut out = Vec::with_capacity(alphas.len() * betas.len());
                for &a in &alphas {
                    for &b in &betas {
                        let nu = if method == Method::Nag { b } else { 0.0 };
                        if let Ok(p) = GmmParams::new(a, b, nu) {
                            out.push(p);
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoPoint {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub rho: f64,
    pub risk: ExtReal,
}

impl ParetoPoint {
    pub fn finite(&self) -> bool {
        self.rho < 1.0 && self.risk.is_finite()
    }
}

/// Rate and risk index at one parameter point; unstable points get `+∞`.
pub fn evaluate_point(problem: &QuadraticProblem, params: &GmmParams, theta: f64, sigma2: f64) -> Result<ParetoPoint> {
    let rho = quadratic_rate(params, problem.eigenvalues())?;
    let risk = if rho >= 1.0 {
        ExtReal::PosInf
    } else {
        match risk_index_riccati(problem, params, theta, sigma2) {
            Ok(v) => v,
            // Very slow value iteration near the boundary: use the integral.
            Err(Error::Convergence { .. }) => {
                risk_index_integral(problem, params, theta, sigma2, &Quadrature::default())?
            }
            Err(e) => return Err(e),
        }
    };
    Ok(ParetoPoint {
        alpha: params.alpha,
        beta: params.beta,
        nu: params.nu,
        rho,
        risk,
    })
}

/// Evaluates `(ρ, R(θ))` over a parameter grid.
pub fn pareto_sweep(
    problem: &QuadraticProblem,
    method: Method,
    grid: &GridSpec,
    theta: f64,
    sigma2: f64,
) -> Result<Vec<ParetoPoint>> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Range(format!("theta must be positive, got {theta}")));
    }
    grid.params(method)
        .par_iter()
        .map(|p| evaluate_point(problem, p, theta, sigma2))
        .collect()
}

/// Pareto frontier: sort stable finite points by `ρ` ascending and keep the
/// ones that strictly improve the running minimum of `R`.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut pts: Vec<ParetoPoint> = points.iter().copied().filter(|p| p.finite()).collect();
    pts.sort_by(|a, b| {
        a.rho
            .total_cmp(&b.rho)
            .then(a.risk.to_f64().total_cmp(&b.risk.to_f64()))
    });
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for p in pts {
        let r = p.risk.to_f64();
        if r < best {
            best = r;
            out.push(p);
        }
    }
    out
}

/// Lowest frontier risk among points with rate at most `rho`.
pub fn frontier_risk_at(frontier: &[ParetoPoint], rho: f64) -> ExtReal {
    frontier
        .iter()
        .take_while(|p| p.rho <= rho)
        .last()
        .map(|p| p.risk)
        .unwrap_or(ExtReal::PosInf)
}

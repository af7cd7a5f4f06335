//! Turns command-line arguments into problems, parameters, noise models,
//! grids and certificates.

use crate::args::{ParamArgs, ProblemArgs, ThetaArgs};
use crate::error::CliError;
use momentum_risk::gmm::{query_point, step};
use momentum_risk::noise::estimate_variance_proxy;
use momentum_risk::numeric::{linspace, logspace};
use momentum_risk::problems::parse_list;
use momentum_risk::risk_bounds::{
    certificate_gd, certificate_gd_best, certificate_nag, coefficients_from_certificate, BoundCoefficients,
    GdVariant, MiCertificate, Provenance,
};
use momentum_risk::{
    resolve_preset, GmmParams, GmmState, NoiseModel, PresetId, Problem, ProblemSpec, QuadraticProblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;

/// Number of log-spaced points in the default θ grid.
pub const DEFAULT_THETA_POINTS: usize = 50;
/// Upper end of the default θ grid relative to the finiteness boundary.
pub const THETA_GRID_TOP: f64 = 0.98;
/// Lower end of the default θ grid relative to its upper end.
const THETA_GRID_SPAN: f64 = 1e-3;
/// Noisy gradients drawn per query point when estimating σ̂².
pub const PROXY_SAMPLES: usize = 100;
/// Query points used for σ̂² at desk scale (every iterate at paper scale).
const PROXY_POINTS: usize = 20;

pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

/// Builds the objective. Returns the problem and the text of the
/// specification file, if one was read.
pub fn load_problem(args: &ProblemArgs) -> Result<(Problem, Option<String>), CliError> {
    if let Some(path) = &args.problem {
        let text = read_input(path)?;
        let problem = ProblemSpec::parse(&text)?.build()?;
        return Ok((problem, Some(text)));
    }
    let mut eigenvalues = match &args.eigenvalues {
        Some(list) => parse_list(list)?,
        None => {
            if !(args.mu > 0.0 && args.mu <= args.l && args.l.is_finite()) {
                return Err(CliError::Validation(format!(
                    "need 0 < mu <= L, got mu={} L={}",
                    args.mu, args.l
                )));
            }
            vec![args.mu, args.l]
        }
    };
    eigenvalues.sort_by(f64::total_cmp);
    Ok((Problem::Quadratic(QuadraticProblem::diagonal(&eigenvalues)?), None))
}

pub fn quadratic<'a>(problem: &'a Problem, command: &str) -> Result<&'a QuadraticProblem, CliError> {
    match problem {
        Problem::Quadratic(q) => Ok(q),
        Problem::Huber(_) => Err(CliError::Validation(format!(
            "{command} needs a quadratic objective; the Huber problem has no exact index"
        ))),
    }
}

/// Resolved method parameters with a display label.
#[derive(Debug, Clone)]
pub struct Method {
    pub params: GmmParams,
    pub label: String,
}

pub fn resolve_params(args: &ParamArgs, mu: f64, l: f64) -> Result<Method, CliError> {
    let preset = match (&args.preset, args.alpha) {
        (Some(name), _) => Some(name.parse::<PresetId>()?),
        (None, None) => Some(PresetId::GdPop),
        (None, Some(_)) => None,
    };
    if args.rs_hb_a.is_some() && !matches!(preset, Some(PresetId::RsHb { .. })) {
        return Err(CliError::Validation("--rs-hb-a only applies to --preset RS-HB".into()));
    }
    let (params, label, alpha_override) = match preset {
        None => {
            let alpha = args.alpha.unwrap_or_default();
            let p = GmmParams::new(alpha, args.beta.unwrap_or(0.0), args.nu.unwrap_or(0.0))?;
            return Ok(Method {
                params: p,
                label: "custom".into(),
            });
        }
        Some(PresetId::NagBetaOpt { .. }) => {
            let id = PresetId::NagBetaOpt { alpha: args.alpha };
            (resolve_preset(id, mu, l)?, id.name(), None)
        }
        Some(PresetId::RsHb { .. }) => {
            let id = PresetId::RsHb { a: args.rs_hb_a };
            (resolve_preset(id, mu, l)?, id.name(), args.alpha)
        }
        Some(id) => (resolve_preset(id, mu, l)?, id.name(), args.alpha),
    };
    if alpha_override.is_none() && args.beta.is_none() && args.nu.is_none() {
        return Ok(Method {
            params,
            label: label.into(),
        });
    }
    let p = GmmParams::new(
        alpha_override.unwrap_or(params.alpha),
        args.beta.unwrap_or(params.beta),
        args.nu.unwrap_or(params.nu),
    )?;
    Ok(Method {
        params: p,
        label: format!("{label} (modified)"),
    })
}

pub fn parse_noise(text: &str) -> Result<NoiseModel, CliError> {
    let model: NoiseModel = text.parse()?;
    model.validate()?;
    Ok(model)
}

/// Variance proxy of a noise model that has one a priori.
pub fn nominal_sigma2(noise: &NoiseModel) -> Result<f64, CliError> {
    noise.nominal_sigma2(1.0).ok_or_else(|| {
        CliError::Validation(format!(
            "noise model {noise} has no a-priori variance proxy; exact indices need \
             zero, gaussian, biased or adversarial noise"
        ))
    })
}

/// How σ² was obtained.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma2Source {
    Nominal,
    Estimated,
}

/// Variance proxy for a run: the a-priori value where the model has one;
/// otherwise a quarter of the largest empirical variance of noisy gradient
/// norms at query points along the noiseless trajectory from `x0`, plus the
/// a-priori part of any remaining components.
pub fn variance_proxy(
    problem: &Problem,
    params: &GmmParams,
    noise: &NoiseModel,
    x0: &[f64],
    k: usize,
    seed: u64,
    every_iterate: bool,
) -> Result<(f64, Sigma2Source), CliError> {
    if let Some(s) = noise.nominal_sigma2(1.0) {
        return Ok((s, Sigma2Source::Nominal));
    }
    let parts = match noise {
        NoiseModel::Sum(parts) => parts.clone(),
        other => vec![other.clone()],
    };
    let known: f64 = parts.iter().filter_map(|p| p.nominal_sigma2(1.0)).sum();
    let unknown: Vec<NoiseModel> = parts.into_iter().filter(|p| p.nominal_sigma2(1.0).is_none()).collect();
    let model = if unknown.len() == 1 {
        unknown.into_iter().next().unwrap()
    } else {
        NoiseModel::Sum(unknown)
    };

    let n_points = if every_iterate { k.max(1) } else { PROXY_POINTS.min(k.max(1)) };
    let stride = (k / n_points).max(1);
    let mut points = Vec::with_capacity(n_points + 1);
    let mut state = GmmState::new(x0.to_vec());
    let mut grad = vec![0.0; problem.dim()];
    for i in 0..=k {
        let y = query_point(params, &state);
        if i % stride == 0 && points.len() < n_points {
            points.push(y.clone());
        }
        if points.len() == n_points {
            break;
        }
        problem.gradient_into(&y, &mut grad);
        state = step(params, &state, &grad)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let est = estimate_variance_proxy(problem, &model, &points, PROXY_SAMPLES, &mut rng)?;
    Ok((known + est.sigma2_hat, Sigma2Source::Estimated))
}

fn parse_grid(text: &str, what: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Validation(format!("{what} must be lo:hi:n, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) || n < 2 {
        return Err(CliError::Validation(format!(
            "{what} needs lo < hi (finite) and n >= 2, got {text:?}"
        )));
    }
    Ok((lo, hi, n))
}

/// θ values for a run. The default is [`DEFAULT_THETA_POINTS`] log-spaced
/// points on `(0, 0.98·θ*]`; without a known `θ*` an explicit grid is
/// required.
pub fn theta_grid(args: &ThetaArgs, theta_star: Option<f64>) -> Result<Vec<f64>, CliError> {
    let thetas = if let Some(list) = &args.theta {
        parse_list(list)?
    } else {
        let default_range = |n: usize| -> Result<Vec<f64>, CliError> {
            let ts = theta_star.ok_or_else(|| {
                CliError::Validation(
                    "no finiteness boundary is known for this problem; pass --theta or --theta-grid lo:hi:n".into(),
                )
            })?;
            if !(ts.is_finite() && ts > 0.0) {
                return Err(CliError::Numerical(format!("finiteness boundary theta* = {ts} is not usable")));
            }
            let hi = THETA_GRID_TOP * ts;
            Ok(logspace(THETA_GRID_SPAN * hi, hi, n))
        };
        match &args.theta_grid {
            None => default_range(DEFAULT_THETA_POINTS)?,
            Some(g) if !g.contains(':') => {
                let n: usize = g
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Validation(format!("--theta-grid must be lo:hi:n or n, got {g:?}")))?;
                if n < 1 {
                    return Err(CliError::Validation("--theta-grid needs at least one point".into()));
                }
                default_range(n)?
            }
            Some(g) => {
                let (lo, hi, n) = parse_grid(g, "--theta-grid")?;
                if lo <= 0.0 {
                    return Err(CliError::Validation("--theta-grid is log-spaced and needs lo > 0".into()));
                }
                logspace(lo, hi, n)
            }
        }
    };
    if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Validation("theta values must be finite".into()));
    }
    Ok(thetas)
}

/// Linear grid `lo:hi:n`.
pub fn linear_grid(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let (lo, hi, n) = parse_grid(text, what)?;
    Ok(linspace(lo, hi, n))
}

/// Starting point; the origin when not given.
pub fn starting_point(text: Option<&str>, d: usize) -> Result<Vec<f64>, CliError> {
    match text {
        None => Ok(vec![0.0; d]),
        Some(t) => {
            let x = parse_list(t)?;
            if x.len() != d {
                return Err(CliError::Validation(format!(
                    "--x0 has {} entries but the problem dimension is {d}",
                    x.len()
                )));
            }
            Ok(x)
        }
    }
}

/// Certificate named on the command line (`auto`, `gd-distance`,
/// `gd-function`, `nag`) or read from a file. Returns the coefficients and
/// the file text when one was read.
pub fn certificate(
    spec: &str,
    params: &GmmParams,
    mu: f64,
    l: f64,
) -> Result<(BoundCoefficients, Option<String>), CliError> {
    let is_gd = params.beta == 0.0 && params.nu == 0.0;
    let need_gd = || {
        if is_gd {
            Ok(())
        } else {
            Err(CliError::Validation(format!(
                "the gradient-descent certificates need beta = nu = 0, got beta={} nu={}",
                params.beta, params.nu
            )))
        }
    };
    let nag = || -> Result<BoundCoefficients, CliError> {
        let c = certificate_nag(params.alpha, mu, l)?;
        let tol = 1e-12 * c.params.beta.abs().max(1.0);
        if (c.params.beta - params.beta).abs() > tol || (c.params.nu - params.nu).abs() > tol {
            return Err(CliError::Validation(format!(
                "the Nesterov certificate covers beta = nu = (1 - sqrt(alpha mu))/(1 + sqrt(alpha mu)) = {} \
                 at alpha = {}; got beta={} nu={} (use --preset NAG-beta-opt)",
                c.params.beta, params.alpha, params.beta, params.nu
            )));
        }
        Ok(c)
    };
    let coeffs = match spec {
        "auto" => {
            if is_gd {
                certificate_gd_best(params.alpha, mu, l)?
            } else if params.beta == params.nu {
                nag()?
            } else {
                return Err(CliError::Validation(
                    "no built-in certificate for these parameters; pass --certificate FILE".into(),
                ));
            }
        }
        "gd-distance" => {
            need_gd()?;
            certificate_gd(params.alpha, mu, l, GdVariant::Distance)?
        }
        "gd-function" => {
            need_gd()?;
            certificate_gd(params.alpha, mu, l, GdVariant::Function)?
        }
        "nag" => nag()?,
        path => {
            let text = read_input(Path::new(path))?;
            let cert = MiCertificate::parse(&text)?;
            let c = coefficients_from_certificate(params, mu, l, &cert, Provenance::Custom)?;
            return Ok((c, Some(text)));
        }
    };
    Ok((coeffs, None))
}

//! Gradient-error models.
//!
//! Every model produces the error `w_{k+1}` added to the exact gradient at the
//! query point. Models compose additively through [`NoiseModel::Sum`], which
//! is how minibatch noise plus an adversarial perturbation is expressed.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::problems::Problem;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Zero,
    /// `w ~ N(0, (σ²/d) I)`, so that `‖w‖` has variance proxy `σ²`.
    IsotropicGaussian { sigma2: f64 },
    /// Gaussian part with proxy `sigma2_tilde` plus a deterministic bias
    /// cycling through `bias` (each of norm at most `m`).
    BiasedGaussian {
        sigma2_tilde: f64,
        bias: Vec<Vec<f64>>,
        m: f64,
    },
    /// The worst of `n_candidates` uniform points in the `delta`-ball, as
    /// judged by the suboptimality of the resulting next iterate.
    AdversarialBall { delta: f64, n_candidates: usize },
    /// Minibatch gradient error for the Huber objective (indices drawn with
    /// replacement).
    Minibatch { batch_size: usize },
    Sum(Vec<NoiseModel>),
}

/// Maps a total gradient error `w` to `f(x_{k+1}) − f*`.
pub type Evaluator<'a> = &'a dyn Fn(&[f64]) -> f64;

/// What a noise draw may look at.
pub struct NoiseContext<'a> {
    pub problem: &'a Problem,
    /// Query point `y_k`.
    pub y: &'a [f64],
    /// Iteration index, used by deterministic bias sequences.
    pub k: usize,
    /// Maps a total gradient error `w` to `f(x_{k+1}) − f*`; required by
    /// [`NoiseModel::AdversarialBall`].
    pub evaluator: Option<Evaluator<'a>>,
}

impl NoiseModel {
    /// Checks parameters without drawing.
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::IsotropicGaussian { sigma2 } if *sigma2 >= 0.0 => Ok(()),
            NoiseModel::IsotropicGaussian { sigma2 } => {
                Err(Error::Range(format!("sigma2 must be >= 0, got {sigma2}")))
            }
            NoiseModel::BiasedGaussian {
                sigma2_tilde,
                bias,
                m,
            } => {
                if *sigma2_tilde < 0.0 {
                    return Err(Error::Range("sigma2_tilde must be >= 0".into()));
                }
                if bias.is_empty() {
                    return Err(Error::Validation("bias sequence is empty".into()));
                }
                if bias.iter().any(|b| norm2(b) > *m * (1.0 + 1e-12)) {
                    return Err(Error::Validation(format!(
                        "a bias vector exceeds the declared bound M = {m}"
                    )));
                }
                Ok(())
            }
            NoiseModel::AdversarialBall {
                delta,
                n_candidates,
            } => {
                if *delta < 0.0 || *n_candidates == 0 {
                    return Err(Error::Range(
                        "adversarial noise needs delta >= 0 and n >= 1".into(),
                    ));
                }
                Ok(())
            }
            NoiseModel::Minibatch { batch_size } => {
                if *batch_size == 0 {
                    return Err(Error::Range("batch size must be >= 1".into()));
                }
                Ok(())
            }
            NoiseModel::Sum(parts) => parts.iter().try_for_each(NoiseModel::validate),
        }
    }

    /// Whether any component needs the adversarial evaluator.
    pub fn needs_evaluator(&self) -> bool {
        match self {
            NoiseModel::AdversarialBall { .. } => true,
            NoiseModel::Sum(parts) => parts.iter().any(NoiseModel::needs_evaluator),
            _ => false,
        }
    }

    /// Variance proxy implied by the model, if it is known a priori.
    ///
    /// Biased and adversarial parts follow the "stochastic part plus bias
    /// bound" combination `σ² = c̄₀(σ̃² + M²)`, a heuristic (the constant `c̄₀`
    /// is a configuration value). Minibatch noise has no a-priori proxy and
    /// returns `None`; estimate it with [`estimate_variance_proxy`].
    pub fn nominal_sigma2(&self, c0_bar: f64) -> Option<f64> {
        match self {
            NoiseModel::Zero => Some(0.0),
            NoiseModel::IsotropicGaussian { sigma2 } => Some(*sigma2),
            NoiseModel::BiasedGaussian { sigma2_tilde, m, .. } => {
                Some(c0_bar * (sigma2_tilde + m * m))
            }
            NoiseModel::AdversarialBall { delta, .. } => Some(c0_bar * delta * delta),
            NoiseModel::Minibatch { .. } => None,
            NoiseModel::Sum(parts) => parts.iter().map(|p| p.nominal_sigma2(c0_bar)).sum(),
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Zero => write!(f, "zero"),
            NoiseModel::IsotropicGaussian { sigma2 } => write!(f, "gaussian:sigma2={sigma2}"),
            NoiseModel::BiasedGaussian { sigma2_tilde, m, .. } => {
                write!(f, "biased:sigma2={sigma2_tilde},M={m}")
            }
            NoiseModel::AdversarialBall {
                delta,
                n_candidates,
            } => write!(f, "adversarial:delta={delta},n={n_candidates}"),
            NoiseModel::Minibatch { batch_size } => write!(f, "minibatch:b={batch_size}"),
            NoiseModel::Sum(parts) => {
                write!(f, "sum(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Accepts `zero`, `gaussian:sigma2=2`, `adversarial:delta=2.5,n=50`,
    /// `minibatch:b=64`, `biased:sigma2=1,M=0.5` (constant bias `M·e₁`), and
    /// `sum(a,b,...)` of those.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("sum(").and_then(|r| r.strip_suffix(')')) {
            let parts = split_top_level(inner)
                .into_iter()
                .map(|p| p.parse())
                .collect::<Result<Vec<_>>>()?;
            if parts.is_empty() {
                return Err(Error::Validation("sum() needs at least one model".into()));
            }
            return Ok(NoiseModel::Sum(parts));
        }
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for item in args.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Error::Validation(format!("noise argument {item:?} is not key=value"))
            })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Validation(format!("noise argument {k}: {e}")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::Validation(format!("noise model {kind:?} needs {k}=...")))
        };
        let model = match kind.trim() {
            "zero" | "none" => NoiseModel::Zero,
            "gaussian" => NoiseModel::IsotropicGaussian {
                sigma2: get("sigma2")?,
            },
            "adversarial" => NoiseModel::AdversarialBall {
                delta: get("delta")?,
                n_candidates: kv.get("n").copied().unwrap_or(50.0) as usize,
            },
            "minibatch" => NoiseModel::Minibatch {
                batch_size: get("b")? as usize,
            },
            "biased" => {
                let m = get("M")?;
                NoiseModel::BiasedGaussian {
                    sigma2_tilde: get("sigma2")?,
                    bias: vec![vec![m]],
                    m,
                }
            }
            other => {
                return Err(Error::Validation(format!("unknown noise model {other:?}")));
            }
        };
        model.validate()?;
        Ok(model)
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    // A comma at depth 0 starts a new model unless the following token is a
    // `key=value` continuation of the current one (no `:` before the `=`).
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                let token = s[i + 1..].split(',').next().unwrap_or("");
                let continuation = token.contains('=') && !token.contains(':');
                if !continuation {
                    out.push(s[start..i].trim());
                    start = i + 1;
                }
            }
            _ => {}
        }
    }
    if start < s.len() {
        out.push(s[start..].trim());
    }
    out
}

/// Draws one error vector into `out` (length `d`).
pub fn sample_noise_into<R: Rng + ?Sized>(
    model: &NoiseModel,
    rng: &mut R,
    ctx: &NoiseContext<'_>,
    out: &mut [f64],
) -> Result<()> {
    out.iter_mut().for_each(|v| *v = 0.0);
    add_noise(model, rng, ctx, out)
}

/// Allocating convenience wrapper around [`sample_noise_into`].
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R, ctx: &NoiseContext<'_>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ctx.problem.dim()];
    sample_noise_into(model, rng, ctx, &mut out)?;
    Ok(out)
}

/// Adds a draw of `model` to `acc`. Components of a sum are drawn in order, so
/// an adversarial component sees the errors drawn before it.
fn add_noise<R: Rng + ?Sized>(
    model: &NoiseModel,
    rng: &mut R,
    ctx: &NoiseContext<'_>,
    acc: &mut [f64],
) -> Result<()> {
    let d = acc.len();
    match model {
        NoiseModel::Zero => {}
        NoiseModel::IsotropicGaussian { sigma2 } => {
            let s = (sigma2 / d as f64).sqrt();
            for a in acc.iter_mut() {
                *a += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        NoiseModel::BiasedGaussian {
            sigma2_tilde, bias, ..
        } => {
            let s = (sigma2_tilde / d as f64).sqrt();
            let b = &bias[ctx.k % bias.len()];
            for (i, a) in acc.iter_mut().enumerate() {
                *a += s * rng.sample::<f64, _>(StandardNormal) + b.get(i).copied().unwrap_or(0.0);
            }
        }
        NoiseModel::AdversarialBall {
            delta,
            n_candidates,
        } => {
            let eval = ctx.evaluator.ok_or_else(|| {
                Error::Validation("adversarial noise needs a suboptimality evaluator".into())
            })?;
            let mut best = vec![0.0; d];
            let mut best_val = f64::NEG_INFINITY;
            let mut cand = vec![0.0; d];
            let mut total = vec![0.0; d];
            for _ in 0..*n_candidates {
                uniform_in_ball(rng, *delta, &mut cand);
                for i in 0..d {
                    total[i] = acc[i] + cand[i];
                }
                let v = eval(&total);
                if v > best_val {
                    best_val = v;
                    best.copy_from_slice(&cand);
                }
            }
            for (a, b) in acc.iter_mut().zip(&best) {
                *a += b;
            }
        }
        NoiseModel::Minibatch { batch_size } => {
            let Problem::Huber(h) = ctx.problem else {
                return Err(Error::Validation(
                    "minibatch noise is only defined for the Huber objective".into(),
                ));
            };
            let p = h.n_data();
            let scale = p as f64 / *batch_size as f64;
            // estimate − full gradient; the regularizer cancels exactly.
            let mut est = vec![0.0; d];
            for _ in 0..*batch_size {
                let i = rng.random_range(0..p);
                h.add_datum_gradient(i, ctx.y, scale, &mut est);
            }
            let mut full = vec![0.0; d];
            for i in 0..p {
                h.add_datum_gradient(i, ctx.y, 1.0, &mut full);
            }
            for ((a, e), f) in acc.iter_mut().zip(&est).zip(&full) {
                *a += e - f;
            }
        }
        NoiseModel::Sum(parts) => {
            for part in parts {
                add_noise(part, rng, ctx, acc)?;
            }
        }
    }
    Ok(())
}

/// Uniform point in the Euclidean ball of radius `delta`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, delta: f64, out: &mut [f64]) {
    let d = out.len();
    loop {
        for v in out.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        let n = norm2(out);
        if n > 0.0 {
            let u: f64 = rng.random();
            let r = delta * u.powf(1.0 / d as f64) / n;
            out.iter_mut().for_each(|v| *v *= r);
            return;
        }
    }
}

/// `σ̂² = ¼·max_k empvar_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceProxyEstimate {
    pub sigma2_hat: f64,
    pub samples_per_point: usize,
    pub points_used: usize,
}

/// At each query point, draws `samples_per_point` noisy gradients
/// `∇f(y) + w`, takes the empirical variance of their norms, and returns a
/// quarter of the largest such variance.
pub fn estimate_variance_proxy<R: Rng + ?Sized>(
    problem: &Problem,
    model: &NoiseModel,
    points: &[Vec<f64>],
    samples_per_point: usize,
    rng: &mut R,
) -> Result<VarianceProxyEstimate> {
    if points.is_empty() {
        return Err(Error::Validation("variance proxy needs at least one point".into()));
    }
    if samples_per_point < 2 {
        return Err(Error::Validation("variance proxy needs >= 2 samples per point".into()));
    }
    if model.needs_evaluator() {
        return Err(Error::Validation(
            "variance proxy estimation does not support adversarial components".into(),
        ));
    }
    let d = problem.dim();
    let mut grad = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut noisy = vec![0.0; d];
    let mut max_var: f64 = 0.0;
    for y in points {
        if y.len() != d {
            return Err(Error::Validation("point dimension mismatch".into()));
        }
        problem.gradient_into(y, &mut grad);
        let ctx = NoiseContext {
            problem,
            y,
            k: 0,
            evaluator: None,
        };
        let norms: Vec<f64> = (0..samples_per_point)
            .map(|_| {
                sample_noise_into(model, rng, &ctx, &mut w)?;
                for i in 0..d {
                    noisy[i] = grad[i] + w[i];
                }
                Ok(norm2(&noisy))
            })
            .collect::<Result<_>>()?;
        max_var = max_var.max(sample_variance(&norms));
    }
    Ok(VarianceProxyEstimate {
        sigma2_hat: 0.25 * max_var,
        samples_per_point,
        points_used: points.len(),
    })
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Outcome of comparing `E exp(t‖w‖²/(2σ²))` with `(1+t)/(1−t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfCheck {
    pub empirical_mgf: f64,
    /// Standard error of the empirical mean.
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Monte Carlo check of the sub-Gaussian moment bound for the noise model at
/// the query point `y`, with variance proxy `sigma2`.
pub fn mgf_bound_check<R: Rng + ?Sized>(
    problem: &Problem,
    model: &NoiseModel,
    y: &[f64],
    sigma2: f64,
    t: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<MgfCheck> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Range(format!("t must lie in [0, 1), got {t}")));
    }
    if sigma2 <= 0.0 || n_samples == 0 {
        return Err(Error::Range("need sigma2 > 0 and n_samples >= 1".into()));
    }
    let ctx = NoiseContext {
        problem,
        y,
        k: 0,
        evaluator: None,
    };
    let mut w = vec![0.0; problem.dim()];
    let mut vals = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let ctx_k = NoiseContext { k, ..ctx };
        sample_noise_into(model, rng, &ctx_k, &mut w)?;
        vals.push((t * dot(&w, &w) / (2.0 * sigma2)).exp());
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = (sample_variance(&vals) / n).sqrt();
    let bound = (1.0 + t) / (1.0 - t);
    Ok(MgfCheck {
        empirical_mgf: mean,
        std_error: se,
        bound,
        pass: mean <= bound * (1.0 + 3.0 * se / mean.max(f64::MIN_POSITIVE)),
    })
}

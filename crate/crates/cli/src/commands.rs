//! One function per subcommand. Each writes its CSV files through the run's
//! [`RunOutput`] and records resolved values and warnings in a [`Report`].

use crate::args::*;
use crate::error::CliError;
use crate::output::{fmt, RunOutput};
use crate::setup::*;
use momentum_risk::montecarlo::{
    empirical_risk, pareto_frontier, pareto_sweep, simulate_with, GridSpec, PathEnsemble, SimOptions, ESS_WARN,
};
use momentum_risk::numeric::{linspace, Quadrature};
use momentum_risk::problems::{parse_list, HUBER_DEFAULT_L, HUBER_DEFAULT_LAMBDA, HUBER_DEFAULT_MU};
use momentum_risk::risk_bounds::{
    ldp_bound_asymptotic, ldp_bound_finite, risk_bound_asymptotic, risk_bound_asymptotic_zero, risk_bound_finite,
};
use momentum_risk::risk_exact::{
    mode_gains, peak_frequency, rate_function, risk_index_integral, risk_index_riccati, risk_index_zero, theta_star,
};
use momentum_risk::{gmm::quadratic_rate, resolve_preset, HuberProblem, NoiseModel, PresetId, Problem};
use serde_json::{json, Map, Value};
use std::collections::HashSet;

/// Side information of a run, written to `meta.json`.
#[derive(Debug, Default)]
pub struct Report {
    pub seed: Option<u64>,
    /// Contents of input files, part of the configuration hash.
    pub inputs: Vec<String>,
    pub resolved: Map<String, Value>,
    pub warnings: Vec<String>,
    /// Lines echoed to standard output.
    pub summary: Vec<String>,
}

impl Report {
    fn input(&mut self, text: Option<String>) {
        if let Some(t) = text {
            self.inputs.push(t);
        }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.into(), value);
    }

    fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }
}

fn params_json(m: &Method) -> Value {
    json!({
        "label": m.label,
        "alpha": m.params.alpha,
        "beta": m.params.beta,
        "nu": m.params.nu,
    })
}

pub fn hinf(a: &HinfArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    let (problem, text) = load_problem(&a.problem)?;
    rep.input(text);
    let q = quadratic(&problem, "hinf")?;
    let m = resolve_params(&a.params, q.mu(), q.l())?;
    let (gains, h) = mode_gains(&m.params, q.eigenvalues())?;
    let rate = quadratic_rate(&m.params, q.eigenvalues())?;
    let t_star = q.dim() as f64 / (h * h);

    let mut w = out.csv("modes.csv", &["lambda", "b_tilde", "c_tilde", "s_tilde", "gain", "peak_omega"])?;
    for g in &gains {
        w.write_record([
            fmt(g.lambda),
            fmt(g.b_tilde),
            fmt(g.c_tilde),
            fmt(g.s_tilde),
            fmt(g.gain),
            fmt(peak_frequency(&m.params, g.lambda)),
        ])?;
    }
    w.flush()?;
    let mut w = out.csv(
        "hinf.csv",
        &["method", "alpha", "beta", "nu", "mu", "L", "d", "rate", "H_inf", "theta_star"],
    )?;
    w.write_record([
        m.label.clone(),
        fmt(m.params.alpha),
        fmt(m.params.beta),
        fmt(m.params.nu),
        fmt(q.mu()),
        fmt(q.l()),
        q.dim().to_string(),
        fmt(rate),
        fmt(h),
        fmt(t_star),
    ])?;
    w.flush()?;
    rep.set("params", params_json(&m));
    rep.set("H_inf", json!(h));
    rep.summary.push(format!("{}: H_inf = {h}, rate = {rate}, theta* = {t_star}", m.label));
    Ok(())
}

pub fn risk_index(a: &RiskIndexArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    let (problem, text) = load_problem(&a.problem)?;
    rep.input(text);
    let q = quadratic(&problem, "risk-index")?;
    let m = resolve_params(&a.params, q.mu(), q.l())?;
    let noise = parse_noise(&a.noise)?;
    let sigma2 = nominal_sigma2(&noise)?;
    let t_star = theta_star(q, &m.params)?;
    let thetas = theta_grid(&a.theta, Some(t_star))?;
    let quad = Quadrature::default();

    let mut w = out.csv("risk_index.csv", &["theta", "R_riccati", "R_integral", "finite_flag"])?;
    let mut n_inf = 0;
    for &theta in &thetas {
        let riccati = if theta > 0.0 {
            risk_index_riccati(q, &m.params, theta, sigma2)?.to_string()
        } else {
            // The Riccati route covers θ > 0 only.
            String::new()
        };
        let integral = risk_index_integral(q, &m.params, theta, sigma2, &quad)?;
        if !integral.is_finite() {
            n_inf += 1;
        }
        w.write_record([
            fmt(theta),
            riccati,
            integral.to_string(),
            if integral.is_finite() { "finite" } else { "inf" }.to_string(),
        ])?;
    }
    w.flush()?;
    rep.set("params", params_json(&m));
    rep.set("sigma2", json!(sigma2));
    rep.set("theta_star", json!(t_star));
    rep.summary.push(format!(
        "{}: {} theta values, theta* = {t_star}, {n_inf} at or past the boundary",
        m.label,
        thetas.len()
    ));
    Ok(())
}

pub fn rate(a: &RateFunctionArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    let (problem, text) = load_problem(&a.problem)?;
    rep.input(text);
    let q = quadratic(&problem, "rate-function")?;
    let m = resolve_params(&a.params, q.mu(), q.l())?;
    let noise = parse_noise(&a.noise)?;
    let sigma2 = nominal_sigma2(&noise)?;
    if !(sigma2 > 0.0) {
        return Err(CliError::Validation("the rate function needs a positive variance proxy".into()));
    }
    let mean = risk_index_zero(q, &m.params, sigma2)?;
    let s_grid = match &a.s_grid {
        Some(g) => linear_grid(g, "--s-grid")?,
        None => linspace(0.25 * mean, 20.0 * mean, 50),
    };
    let rf = rate_function(q, &m.params, sigma2, &s_grid)?;
    let mut w = out.csv("rate_function.csv", &["s", "I"])?;
    for (s, i) in rf.s_grid.iter().zip(&rf.i_values) {
        w.write_record([fmt(*s), i.to_string()])?;
    }
    w.flush()?;
    rep.set("params", params_json(&m));
    rep.set("sigma2", json!(sigma2));
    rep.set("argmin_s", json!(rf.argmin_s));
    rep.set("H_inf", json!(rf.h_inf));
    rep.summary
        .push(format!("{}: I vanishes at s = {} (long-run mean suboptimality)", m.label, rf.argmin_s));
    Ok(())
}

pub fn bound(a: &BoundArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    if a.k == 0 {
        return Err(CliError::Validation("--K must be at least 1".into()));
    }
    let (problem, text) = load_problem(&a.problem)?;
    rep.input(text);
    let (mu, l) = (problem.mu(), problem.l());
    let m = resolve_params(&a.params, mu, l)?;
    let noise = parse_noise(&a.noise)?;
    let x0 = starting_point(a.x0.as_deref(), problem.dim())?;
    let (sigma2, source) = variance_proxy(&problem, &m.params, &noise, &x0, a.k, a.seed, a.output.paper_scale)?;
    if !(sigma2 > 0.0) {
        return Err(CliError::Validation("the bounds need a positive variance proxy".into()));
    }
    let (coeffs, cert_text) = certificate(&a.certificate, &m.params, mu, l)?;
    rep.input(cert_text);
    let coeffs = coeffs.with_initial_state(&problem, &x0)?;
    let h2 = coeffs.h_bar_inf * coeffs.h_bar_inf;
    let thetas = theta_grid(&a.theta, Some(1.0 / h2))?;
    if thetas.iter().any(|&t| t < 0.0) {
        return Err(CliError::Validation("the bounds cover theta >= 0 only".into()));
    }
    let t = a.t.unwrap_or(2.0 * risk_bound_asymptotic_zero(&coeffs, sigma2));
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::Validation(format!("--t must be finite and >= 0, got {t}")));
    }
    let i_bar = ldp_bound_asymptotic(&coeffs, t, sigma2)?;
    let i_bar_k = ldp_bound_finite(&coeffs, a.k, t, sigma2, None)?.i_bar_k;
    let provenance = coeffs.provenance.to_string();

    let mut w = out.csv(
        "bound.csv",
        &["K", "theta", "R_bar_K", "R_bar_inf", "I_bar_K(t)", "I_bar(t)", "H_bar_inf", "provenance"],
    )?;
    for &theta in &thetas {
        let rk = risk_bound_finite(&coeffs, theta, a.k, sigma2)?;
        let rinf = risk_bound_asymptotic(&coeffs, theta, sigma2)?;
        w.write_record([
            a.k.to_string(),
            fmt(theta),
            rk.to_string(),
            rinf.to_string(),
            fmt(i_bar_k),
            fmt(i_bar),
            fmt(coeffs.h_bar_inf),
            provenance.clone(),
        ])?;
    }
    w.flush()?;
    let cert = &coeffs.certificate;
    rep.seed = Some(a.seed);
    rep.set("params", params_json(&m));
    rep.set("sigma2", json!(sigma2));
    rep.set("sigma2_source", json!(source));
    rep.set("t", json!(t));
    rep.set(
        "certificate",
        json!({
            "provenance": provenance,
            "p": coeffs.p, "q": coeffs.q, "r": coeffs.r,
            "lambda_plus": coeffs.lambda_plus, "J": coeffs.j_pq,
            "H_bar_inf": coeffs.h_bar_inf, "V0": coeffs.v0,
            "mi_min_eigenvalue": coeffs.mi_min_eig,
            "rho": [cert.rho0, cert.rho1, cert.rho2, cert.rho3],
            "a": cert.a, "b": cert.b, "c0": cert.c0, "c1": cert.c1,
            "P_tilde": cert.p_tilde,
        }),
    );
    rep.summary.push(format!(
        "{} with {provenance} certificate: H_bar = {}, finite for theta < {}",
        m.label,
        coeffs.h_bar_inf,
        1.0 / h2
    ));
    Ok(())
}

/// Writes the empirical risk rows of one ensemble and collects ESS warnings.
#[allow(clippy::too_many_arguments)]
fn write_risk_rows(
    w: &mut csv::Writer<std::fs::File>,
    prefix: &[String],
    ens: &PathEnsemble,
    thetas: &[f64],
    sigma2: f64,
    label: &str,
    rep: &mut Report,
) -> Result<(), CliError> {
    if (ens.n_paths as f64) < ESS_WARN {
        rep.warn(format!(
            "{label}: only {} paths; the effective sample size of the risk estimate cannot reach {ESS_WARN}",
            ens.n_paths
        ));
    }
    for &theta in thetas {
        let r = empirical_risk(ens, theta, sigma2)?;
        let min_ess = r.min_ess();
        // With fewer paths than the threshold the caller is warned once.
        if min_ess < ESS_WARN && r.n_used as f64 >= ESS_WARN {
            rep.warn(format!(
                "{label}, theta = {theta}: effective sample size of the exponential tilt drops to {min_ess:.1} \
                 (< {ESS_WARN}); the estimate is dominated by a few paths"
            ));
        }
        if r.biased_by_exclusion {
            rep.warn(format!(
                "{label}, theta = {theta}: divergent paths were excluded; the risk-seeking estimate is optimistic"
            ));
        }
        for (j, &k) in r.ks.iter().enumerate() {
            let mut row = prefix.to_vec();
            row.extend([
                k.to_string(),
                fmt(theta),
                fmt(r.values_by_k[j]),
                fmt(r.std_errors[j]),
                fmt(r.ess[j]),
            ]);
            w.write_record(&row)?;
        }
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    let (problem, text) = load_problem(&a.problem)?;
    rep.input(text);
    let m = resolve_params(&a.params, problem.mu(), problem.l())?;
    let noise = parse_noise(&a.noise)?;
    let x0 = starting_point(a.x0.as_deref(), problem.dim())?;
    let t_star = match &problem {
        Problem::Quadratic(q) => Some(theta_star(q, &m.params)?),
        Problem::Huber(_) => None,
    };
    let thetas = theta_grid(&a.theta, t_star)?;
    if a.stride == 0 {
        return Err(CliError::Validation("--stride must be at least 1".into()));
    }
    let (sigma2, source) = variance_proxy(&problem, &m.params, &noise, &x0, a.k, a.seed, a.output.paper_scale)?;
    let opts = SimOptions::new(a.k, a.paths, a.seed).with_stride(a.stride).with_x0(x0);
    let ens = simulate_with(&problem, &m.params, &noise, &opts, None)?;

    let mut w = out.csv("paths.csv", &["k", "path", "subopt"])?;
    for (j, k) in ens.record_ks.iter().enumerate() {
        for path in 0..ens.n_paths {
            w.write_record([k.to_string(), path.to_string(), fmt(ens.subopt_row(path)[j])])?;
        }
    }
    w.flush()?;
    let mut w = out.csv("risk_hat.csv", &["k", "theta", "R_hat", "std_error", "ess"])?;
    if sigma2 > 0.0 {
        write_risk_rows(&mut w, &[], &ens, &thetas, sigma2, &m.label, rep)?;
    } else {
        rep.warn("the variance proxy is zero; the risk estimate is undefined and risk_hat.csv is empty".into());
    }
    w.flush()?;
    if ens.n_diverged() > 0 {
        rep.warn(format!("{} of {} paths diverged", ens.n_diverged(), ens.n_paths));
    }
    rep.seed = Some(a.seed);
    rep.set("params", params_json(&m));
    rep.set("sigma2_hat", json!(sigma2));
    rep.set("sigma2_source", json!(source));
    rep.set("n_diverged", json!(ens.n_diverged()));
    rep.summary.push(format!(
        "{}: {} paths of {} steps, sigma2_hat = {sigma2}",
        m.label, ens.n_paths, ens.k
    ));
    Ok(())
}

pub fn pareto(a: &ParetoArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    let (problem, text) = load_problem(&a.problem)?;
    rep.input(text);
    let q = quadratic(&problem, "pareto")?;
    let noise = parse_noise(&a.noise)?;
    let sigma2 = nominal_sigma2(&noise)?;
    let methods = a
        .methods
        .split(',')
        .map(|s| s.trim().parse::<momentum_risk::montecarlo::Method>())
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(CliError::Validation("--methods is empty".into()));
    }
    let mut w = out.csv("pareto.csv", &["method", "alpha", "beta", "nu", "rho", "R", "frontier"])?;
    let mut grids = Map::new();
    for method in methods {
        let mut grid = GridSpec::default_for(method, q.l(), a.output.paper_scale);
        if let Some(n) = a.grid_points {
            if n == 0 {
                return Err(CliError::Validation("--grid-points must be positive".into()));
            }
            grid.alpha.n = n;
            if grid.beta.n > 1 {
                grid.beta.n = n;
            }
        }
        let points = pareto_sweep(q, method, &grid, a.theta, sigma2)?;
        let frontier = pareto_frontier(&points);
        let on_front: HashSet<(u64, u64)> =
            frontier.iter().map(|p| (p.alpha.to_bits(), p.beta.to_bits())).collect();
        for p in &points {
            let front = on_front.contains(&(p.alpha.to_bits(), p.beta.to_bits()));
            w.write_record([
                method.to_string(),
                fmt(p.alpha),
                fmt(p.beta),
                fmt(p.nu),
                fmt(p.rho),
                p.risk.to_string(),
                u8::from(front).to_string(),
            ])?;
        }
        grids.insert(
            method.to_string(),
            json!({"alpha": [grid.alpha.lo, grid.alpha.hi, grid.alpha.n],
                   "beta": [grid.beta.lo, grid.beta.hi, grid.beta.n],
                   "points": points.len(), "frontier": frontier.len()}),
        );
        rep.summary.push(format!(
            "{method}: {} grid points, {} on the frontier",
            points.len(),
            frontier.len()
        ));
    }
    w.flush()?;
    rep.set("sigma2", json!(sigma2));
    rep.set("grids", Value::Object(grids));
    Ok(())
}

/// Methods compared in the Huber regression experiment.
const EXPERIMENT_PRESETS: [PresetId; 5] = [
    PresetId::Hb,
    PresetId::RsHb { a: None },
    PresetId::GdPop,
    PresetId::NagBetaOpt { alpha: None },
    PresetId::Tmm,
];

pub fn experiment6(a: &ExperimentArgs, out: &mut RunOutput, rep: &mut Report) -> Result<(), CliError> {
    let problem = match &a.problem {
        Some(path) => {
            let text = read_input(path)?;
            let p = momentum_risk::ProblemSpec::parse(&text)?.build()?;
            rep.input(Some(text));
            p
        }
        None => Problem::Huber(HuberProblem::generate(
            10,
            1000,
            HUBER_DEFAULT_MU,
            HUBER_DEFAULT_L,
            HUBER_DEFAULT_LAMBDA,
            0,
        )?),
    };
    let Problem::Huber(huber) = &problem else {
        return Err(CliError::Validation("experiment-6 needs a Huber problem (huber.* keys)".into()));
    };
    if a.stride == 0 {
        return Err(CliError::Validation("--stride must be at least 1".into()));
    }
    let thetas = parse_list(&a.theta)?;
    let minibatch = NoiseModel::Minibatch { batch_size: a.batch };
    let adversarial = NoiseModel::Sum(vec![
        minibatch.clone(),
        NoiseModel::AdversarialBall {
            delta: a.delta,
            n_candidates: a.candidates,
        },
    ]);
    let noises = [("minibatch", minibatch), ("minibatch+adversarial", adversarial)];
    let x0 = vec![0.0; problem.dim()];
    let (mu, l) = (problem.mu(), problem.l());

    let mut data = Vec::new();
    huber.write_data_csv(&mut data)?;
    out.write("huber_data.csv", &data)?;

    let mut w = out.csv("experiment6.csv", &["noise", "method", "sigma2_hat", "k", "theta", "R_hat", "std_error", "ess"])?;
    let mut proxies = Map::new();
    for (noise_name, noise) in &noises {
        noise.validate()?;
        for id in EXPERIMENT_PRESETS {
            let params = resolve_preset(id, mu, l)?;
            let (sigma2, _) = variance_proxy(&problem, &params, noise, &x0, a.k, a.seed, a.output.paper_scale)?;
            let opts = SimOptions::new(a.k, a.paths, a.seed).with_stride(a.stride).with_x0(x0.clone());
            let ens = simulate_with(&problem, &params, noise, &opts, None)?;
            let label = format!("{} / {noise_name}", id.name());
            if ens.n_diverged() > 0 {
                rep.warn(format!("{label}: {} of {} paths diverged", ens.n_diverged(), ens.n_paths));
            }
            let prefix = [noise_name.to_string(), id.name().to_string(), fmt(sigma2)];
            write_risk_rows(&mut w, &prefix, &ens, &thetas, sigma2, &label, rep)?;
            proxies.insert(label, json!(sigma2));
        }
    }
    w.flush()?;
    rep.seed = Some(a.seed);
    rep.set("mu", json!(mu));
    rep.set("L", json!(l));
    rep.set("sigma2_hat", Value::Object(proxies));
    rep.summary.push(format!(
        "{} methods x {} noise settings x {} theta values, K = {}, {} paths",
        EXPERIMENT_PRESETS.len(),
        noises.len(),
        thetas.len(),
        a.k,
        a.paths
    ));
    Ok(())
}

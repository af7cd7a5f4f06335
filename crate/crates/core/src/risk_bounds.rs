//! Risk bounds for smooth strongly convex objectives.
//!
//! A matrix-inequality certificate `(ρ₀..ρ₃, a, b, c₀, c₁, P̃)` yields the
//! Lyapunov decay `V(ξ_{k+1}) ≤ pV(ξ_k) + qV(ξ_{k−1}) + r‖w_{k+1}‖²` for
//! `V(ξ) = c₁(f(x)−f*) + ξᵀ(P̃⊗I)ξ`, and from it an upper bound `H̄∞` on the
//! H∞ norm, finite-horizon and asymptotic risk bounds, and Chernoff-type
//! large-deviation bounds for the averaged iterate.

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::gmm::GmmParams;
use crate::linalg::{min_eigenvalue, Mat, M2};
use crate::numeric::golden_section_max;
use crate::problems::Problem;
use std::fmt;

/// Slack allowed on the minimum eigenvalue of the assembled inequality.
pub const MI_SLACK: f64 = 1e-8;

/// Free scalars and the 2×2 weight of a matrix-inequality certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiCertificate {
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
    pub p_tilde: M2,
}

impl MiCertificate {
    /// `r̃(P̃)`: the Schur complement `P̃₁₁ − P̃₁₂²/P̃₂₂`, or `P̃₁₁` when
    /// `P̃₂₂ = 0`.
    pub fn r_tilde(&self) -> f64 {
        let p = &self.p_tilde;
        if p[1][1] != 0.0 {
            p[0][0] - p[0][1] * p[0][1] / p[1][1]
        } else {
            p[0][0]
        }
    }

    /// `(p, q, r)` of the decay property.
    pub fn pqr(&self, params: &GmmParams, mu: f64, l: f64) -> (f64, f64, f64) {
        let nu = params.nu;
        let kb = 4.0 * self.b * l * l / mu * self.c1;
        let p = self.rho0 * self.rho0
            + self.c1 * self.rho1 * self.rho1
            + self.rho2 * self.rho2
            + kb * (1.0 + nu) * (1.0 + nu);
        let q = self.rho3 * self.rho3 + kb * nu * nu;
        let r = self.a + params.alpha * params.alpha * (self.c1 * l / 2.0 + self.p_tilde[0][0]);
        (p, q, r)
    }

    /// Parses a `key = value` certificate file with keys `rho0..rho3`, `a`,
    /// `b`, `c0`, `c1`, `p11`, `p12`, `p22` (missing keys default to 0).
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = MiCertificate {
            rho0: 0.0,
            rho1: 0.0,
            rho2: 0.0,
            rho3: 0.0,
            a: 0.0,
            b: 0.0,
            c0: 0.0,
            c1: 0.0,
            p_tilde: [[0.0; 2]; 2],
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Validation(format!("certificate line {}: expected key = value", n + 1))
            })?;
            let v: f64 = v.trim().parse().map_err(|e| {
                Error::Validation(format!("certificate line {}: {e}", n + 1))
            })?;
            match k.trim() {
                "rho0" => c.rho0 = v,
                "rho1" => c.rho1 = v,
                "rho2" => c.rho2 = v,
                "rho3" => c.rho3 = v,
                "a" => c.a = v,
                "b" => c.b = v,
                "c0" => c.c0 = v,
                "c1" => c.c1 = v,
                "p11" => c.p_tilde[0][0] = v,
                "p12" => {
                    c.p_tilde[0][1] = v;
                    c.p_tilde[1][0] = v;
                }
                "p22" => c.p_tilde[1][1] = v,
                other => {
                    return Err(Error::Validation(format!(
                        "certificate line {}: unknown key {other:?}",
                        n + 1
                    )))
                }
            }
        }
        Ok(c)
    }
}

/// The three 4×4 blocks of the inequality `M̃₂(P̃,a) + c₁M̃₁ + c₀M̃₀ ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrices {
    pub m0: Mat,
    pub m1: Mat,
    pub m2: Mat,
}

impl MiMatrices {
    pub fn combination(&self, c0: f64, c1: f64) -> Mat {
        self.m2.add(&self.m1.scale(c1)).add(&self.m0.scale(c0))
    }
}

/// Assembles `M̃₀` (sector condition), `M̃₁` (descent and strong convexity
/// along the iterates, with `Δ̃ = β − ν`) and `M̃₂(P̃, a)` in the variables
/// `(x_k, x_{k−1}, ∇f(y_k), w_{k+1})`.
pub fn build_mi_matrices(params: &GmmParams, mu: f64, l: f64, cert: &MiCertificate) -> MiMatrices {
    let GmmParams { alpha, beta, nu } = *params;
    let (a_t, b_t, c_t) = params.system_matrices();

    let mut m0 = Mat::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            m0[(i, j)] = 2.0 * mu * l * c_t[i] * c_t[j];
        }
        m0[(i, 2)] = -(mu + l) * c_t[i];
        m0[(2, i)] = -(mu + l) * c_t[i];
    }
    m0[(2, 2)] = 2.0;

    let dl = beta - nu;
    let r0s = cert.rho0 * cert.rho0;
    let x1 = [
        [-l * dl * dl, l * dl * dl, -(1.0 - alpha * l) * dl],
        [l * dl * dl, -l * dl * dl, (1.0 - alpha * l) * dl],
        [-(1.0 - alpha * l) * dl, (1.0 - alpha * l) * dl, alpha * (2.0 - l * alpha)],
    ];
    let x2 = [
        [nu * nu * mu, -nu * nu * mu, -nu],
        [-nu * nu * mu, nu * nu * mu, nu],
        [-nu, nu, 0.0],
    ];
    let x3 = [
        [(1.0 + nu) * (1.0 + nu) * mu, -nu * (1.0 + nu) * mu, -(1.0 + nu)],
        [-nu * (1.0 + nu) * mu, nu * nu * mu, nu],
        [-(1.0 + nu), nu, 0.0],
    ];
    let p = &cert.p_tilde;
    let r1s = cert.rho1 * cert.rho1;
    let z = [
        [r1s * p[0][0] + mu / 2.0 * cert.rho2 * cert.rho2, r1s * p[0][1], 0.0],
        [r1s * p[0][1], r1s * p[1][1] + mu / 2.0 * cert.rho3 * cert.rho3, 0.0],
        [0.0, 0.0, 0.0],
    ];
    let mut m1 = Mat::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            m1[(i, j)] = 0.5 * (x1[i][j] + r0s * x2[i][j] + (1.0 - r0s) * x3[i][j]) + z[i][j];
        }
    }
    let col = [l * alpha * dl / 2.0, -l * alpha * dl / 2.0, alpha * (1.0 - l * alpha) / 2.0];
    for i in 0..3 {
        m1[(i, 3)] = col[i];
        m1[(3, i)] = col[i];
    }

    // Quadratic forms of P̃ against Ã and B̃.
    let mut atpa = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for m in 0..2 {
                    atpa[i][j] += a_t[k][i] * p[k][m] * a_t[m][j];
                }
            }
        }
    }
    let mut atpb = [0.0; 2];
    for i in 0..2 {
        for k in 0..2 {
            for m in 0..2 {
                atpb[i] += a_t[k][i] * p[k][m] * b_t[m];
            }
        }
    }
    let mut btpb = 0.0;
    for k in 0..2 {
        for m in 0..2 {
            btpb += b_t[k] * p[k][m] * b_t[m];
        }
    }
    let mut m2 = Mat::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            m2[(i, j)] = -atpa[i][j] + r0s * p[i][j];
        }
        for j in 2..4 {
            m2[(i, j)] = -atpb[i];
            m2[(j, i)] = -atpb[i];
        }
    }
    m2[(2, 2)] = -btpb + cert.b * cert.c1;
    m2[(2, 3)] = -btpb;
    m2[(3, 2)] = -btpb;
    m2[(3, 3)] = cert.a;
    MiMatrices { m0, m1, m2 }
}

/// Minimum eigenvalue of the assembled combination.
pub fn mi_min_eigenvalue(params: &GmmParams, mu: f64, l: f64, cert: &MiCertificate) -> Result<f64> {
    let m = build_mi_matrices(params, mu, l, cert);
    min_eigenvalue(&m.combination(cert.c0, cert.c1))
}

/// Chooses the sector multiplier `c₀ ≥ 0` maximizing the minimum eigenvalue
/// (a concave function of `c₀`), searching `[0, c0_max]`.
pub fn optimize_c0(params: &GmmParams, mu: f64, l: f64, cert: &MiCertificate, c0_max: f64) -> Result<(f64, f64)> {
    let m = build_mi_matrices(params, mu, l, cert);
    let mut err = None;
    let (c0, val) = golden_section_max(
        |c0| match min_eigenvalue(&m.combination(c0, cert.c1)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        0.0,
        c0_max,
        1e-12,
    );
    match err {
        Some(e) => Err(e),
        None => Ok((c0, val)),
    }
}

/// Where a set of bound coefficients came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    GdDistance,
    GdFunction,
    Nag,
    Custom,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::GdDistance => "gd-distance",
            Provenance::GdFunction => "gd-function",
            Provenance::Nag => "nag",
            Provenance::Custom => "custom",
        })
    }
}

/// Everything the bounds need from a verified certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCoefficients {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub lambda_plus: f64,
    pub j_pq: f64,
    pub h_bar_inf: f64,
    pub c1: f64,
    pub r_tilde: f64,
    /// `V(ξ₀)`; zero until [`BoundCoefficients::with_initial_state`].
    pub v0: f64,
    pub l: f64,
    pub mu: f64,
    pub params: GmmParams,
    pub certificate: MiCertificate,
    /// Minimum eigenvalue of the assembled inequality at the stored `c₀`.
    pub mi_min_eig: f64,
    pub provenance: Provenance,
}

impl BoundCoefficients {
    /// `c₁ + (2/L)·r̃(P̃)`, the constant converting `V` into suboptimality.
    pub fn c_const(&self) -> f64 {
        self.c1 + 2.0 / self.l * self.r_tilde
    }

    /// `V(x, x_prev) = c₁(f(x)−f*) + (x−x*, x_prev−x*)ᵀ(P̃⊗I)(x−x*, x_prev−x*)`.
    pub fn lyapunov_value(&self, problem: &Problem, x: &[f64], x_prev: &[f64]) -> Result<f64> {
        let sub = problem.suboptimality(x)?;
        Ok(self.c1 * sub + self.quadratic_part(problem.x_star(), x, x_prev))
    }

    pub(crate) fn quadratic_part(&self, x_star: &[f64], x: &[f64], x_prev: &[f64]) -> f64 {
        let p = &self.certificate.p_tilde;
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for i in 0..x_star.len() {
            let e1 = x[i] - x_star[i];
            let e2 = x_prev[i] - x_star[i];
            s11 += e1 * e1;
            s12 += e1 * e2;
            s22 += e2 * e2;
        }
        p[0][0] * s11 + 2.0 * p[0][1] * s12 + p[1][1] * s22
    }

    /// Sets `V(ξ₀)` for the start `x₀ = x₋₁`.
    pub fn with_initial_state(mut self, problem: &Problem, x0: &[f64]) -> Result<Self> {
        if problem.mu() < self.mu * (1.0 - 1e-12) || problem.l() > self.l * (1.0 + 1e-12) {
            return Err(Error::Validation(format!(
                "certificate built for mu={}, L={} does not cover the problem (mu={}, L={})",
                self.mu,
                self.l,
                problem.mu(),
                problem.l()
            )));
        }
        self.v0 = self.lyapunov_value(problem, x0, x0)?;
        Ok(self)
    }
}

/// Verifies a certificate and derives its coefficients.
pub fn coefficients_from_certificate(
    params: &GmmParams,
    mu: f64,
    l: f64,
    cert: &MiCertificate,
    provenance: Provenance,
) -> Result<BoundCoefficients> {
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::Domain(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    for (name, v) in [("rho0", cert.rho0), ("rho1", cert.rho1), ("rho2", cert.rho2), ("rho3", cert.rho3)] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Range(format!("{name} must lie in [0, 1), got {v}")));
        }
    }
    for (name, v) in [("a", cert.a), ("b", cert.b), ("c0", cert.c0), ("c1", cert.c1)] {
        if !(v >= 0.0) {
            return Err(Error::Range(format!("{name} must be non-negative, got {v}")));
        }
    }
    let pt = &cert.p_tilde;
    let tr = pt[0][0] + pt[1][1];
    let det = pt[0][0] * pt[1][1] - pt[0][1] * pt[1][0];
    if pt[0][1] != pt[1][0] || pt[0][0] < 0.0 || pt[1][1] < 0.0 || det < -1e-12 * tr * tr {
        return Err(Error::Validation("P-tilde must be symmetric positive semi-definite".into()));
    }
    let (p, q, r) = cert.pqr(params, mu, l);
    if !(p + q < 1.0) {
        return Err(Error::Domain(format!("certificate has p + q = {} >= 1", p + q)));
    }
    let r_tilde = cert.r_tilde();
    let c_const = cert.c1 + 2.0 / l * r_tilde;
    if !(c_const > 0.0 && cert.c1 + pt[0][0] > 0.0) {
        return Err(Error::Domain(
            "certificate needs c1 + (2/L) r~(P) > 0 and c1 + P11 > 0".into(),
        ));
    }
    let mi_min_eig = mi_min_eigenvalue(params, mu, l, cert)?;
    if mi_min_eig < -MI_SLACK {
        return Err(Error::Domain(format!(
            "matrix inequality fails: minimum eigenvalue {mi_min_eig:e}"
        )));
    }
    let lambda_plus = (p + (p * p + 4.0 * q).sqrt()) / 2.0;
    Ok(BoundCoefficients {
        p,
        q,
        r,
        lambda_plus,
        j_pq: 1.0 / (1.0 + lambda_plus - p),
        h_bar_inf: (r / ((1.0 - (p + q)) * c_const)).sqrt(),
        c1: cert.c1,
        r_tilde,
        v0: 0.0,
        l,
        mu,
        params: *params,
        certificate: *cert,
        mi_min_eig,
        provenance,
    })
}

/// The two constructive gradient-descent certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdVariant {
    /// `V = ‖x − x*‖²`, `p = ρ_GD(α)`, `r = α²/(1 − ρ_GD)`.
    Distance,
    /// `V = f − f*`, `p = 1 − 2μα(1 − Lα/2) + αμ|1 − αL|s_GD`.
    Function,
}

fn gd_rate(alpha: f64, mu: f64, l: f64) -> f64 {
    (1.0 - alpha * mu).abs().max((1.0 - alpha * l).abs())
}

/// Certificate for gradient descent with `α ∈ (0, 2/L)`.
pub fn certificate_gd(alpha: f64, mu: f64, l: f64, variant: GdVariant) -> Result<BoundCoefficients> {
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::Domain(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    if !(alpha > 0.0 && alpha < 2.0 / l) {
        return Err(Error::Range(format!(
            "gradient descent certificates need alpha in (0, 2/L) = (0, {}), got {alpha}",
            2.0 / l
        )));
    }
    let params = GmmParams::gd(alpha)?;
    let (cert, provenance) = match variant {
        GdVariant::Distance => {
            let rho = gd_rate(alpha, mu, l);
            // P̃ = diag(1, 0): V is the squared distance of the current iterate.
            let mut cert = MiCertificate {
                rho0: rho.sqrt(),
                rho1: 0.0,
                rho2: 0.0,
                rho3: 0.0,
                a: alpha * alpha * rho / (1.0 - rho),
                b: 0.0,
                c0: alpha / 2.0,
                c1: 0.0,
                p_tilde: [[1.0, 0.0], [0.0, 0.0]],
            };
            if mi_min_eigenvalue(&params, mu, l, &cert)? < -MI_SLACK {
                cert.c0 = optimize_c0(&params, mu, l, &cert, 10.0 * (1.0 + alpha))?.0;
            }
            (cert, Provenance::GdDistance)
        }
        GdVariant::Function => {
            let s = if alpha * l <= 1.0 { 1.0 } else { (2.0 - alpha * l) / (alpha * l) };
            let m = (1.0 - alpha * l).abs();
            let p = 1.0 - 2.0 * mu * alpha * (1.0 - l * alpha / 2.0) + alpha * mu * m * s;
            let r = alpha * (l * alpha / 2.0 + m / (2.0 * s));
            let cert = MiCertificate {
                rho0: p.max(0.0).sqrt(),
                rho1: 0.0,
                rho2: 0.0,
                rho3: 0.0,
                // zero for α ≤ 1/L up to rounding
                a: (r - alpha * alpha * l / 2.0).max(0.0),
                b: 0.0,
                c0: 0.0,
                c1: 1.0,
                p_tilde: [[0.0; 2]; 2],
            };
            (cert, Provenance::GdFunction)
        }
    };
    coefficients_from_certificate(&params, mu, l, &cert, provenance)
}

/// The gradient-descent certificate with the smaller `H̄∞`.
pub fn certificate_gd_best(alpha: f64, mu: f64, l: f64) -> Result<BoundCoefficients> {
    let d = certificate_gd(alpha, mu, l, GdVariant::Distance);
    let f = certificate_gd(alpha, mu, l, GdVariant::Function);
    match (d, f) {
        (Ok(d), Ok(f)) => Ok(if f.h_bar_inf <= d.h_bar_inf { f } else { d }),
        (Ok(d), Err(_)) => Ok(d),
        (Err(_), Ok(f)) => Ok(f),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Piecewise closed form of the gradient-descent `H̄∞` (four step-size
/// regimes), used to cross-check [`certificate_gd_best`].
pub fn gd_h_bar_table(alpha: f64, mu: f64, l: f64) -> f64 {
    let base = 1.0 / (2.0 * mu).sqrt();
    if alpha <= 1.0 / l {
        base
    } else if alpha <= 2.0 / (l + (l * mu).sqrt()) {
        base * alpha * l / (2.0 - alpha * l)
    } else if alpha <= 2.0 / (l + mu) {
        base * (l / mu).sqrt()
    } else {
        alpha * l.sqrt() / (2f64.sqrt() * (2.0 - alpha * l))
    }
}

/// Nesterov certificate for `α ∈ (0, 1/L]` and `β = ν = (1−√(αμ))/(1+√(αμ))`.
///
/// `P̃ = vvᵀ/(2α)` with `v = (1, −(1−√(αμ)))`, `c₁ = 1`; the multipliers `ρ₀`
/// and `ρ₃` are backed out of the stated `p` and `q` after removing the
/// `b`-terms, and `c₀` is chosen to maximize the inequality margin.
pub fn certificate_nag(alpha: f64, mu: f64, l: f64) -> Result<BoundCoefficients> {
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::Domain(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0 / l) {
        return Err(Error::Range(format!(
            "the Nesterov certificate needs alpha in (0, 1/L] = (0, {}], got {alpha}",
            1.0 / l
        )));
    }
    let e = (alpha * mu).sqrt();
    let beta = (1.0 - e) / (1.0 + e);
    let params = GmmParams::new(alpha, beta, beta)?;
    let sa = alpha.sqrt();
    let sm = mu.sqrt();
    let op = (1.0 + e) * (1.0 + e);
    let s1 = 2.0 * (5.0 - 2.0 * e + e * e) / (sm * op);
    let s2 = 8.0 * l.powi(3) * alpha / (mu * sm * op) * (4.0 + (1.0 - e) * (1.0 - e));
    let p = 1.0 - e + 8.0 * alpha * sa * l.powi(3) / (mu * op * s2) + sa * (4.0 - e + e * e) / (2.0 * s1 * op);
    let q = sa * (1.0 - e) / (2.0 * s1 * op) + 2.0 * alpha * sa * l.powi(3) * beta * beta / (s2 * mu);
    let r = alpha * (1.0 + alpha * l) / 2.0 + sa * s1 + alpha * alpha * sa * l / 2.0 * s2;
    let v = [1.0, -(1.0 - e)];
    let p_tilde = [
        [v[0] * v[0] / (2.0 * alpha), v[0] * v[1] / (2.0 * alpha)],
        [v[1] * v[0] / (2.0 * alpha), v[1] * v[1] / (2.0 * alpha)],
    ];
    let b = alpha * sa * l / (2.0 * s2);
    let rho3_sq = q - 4.0 * b * beta * beta * l * l / mu;
    let rho0_sq = p - 4.0 * b * (1.0 + beta) * (1.0 + beta) * l * l / mu;
    let mut cert = MiCertificate {
        rho0: rho0_sq.max(0.0).sqrt(),
        rho1: 0.0,
        rho2: 0.0,
        rho3: rho3_sq.max(0.0).sqrt(),
        a: (r - alpha * alpha * (l / 2.0 + p_tilde[0][0])).max(0.0),
        b,
        c0: 0.0,
        c1: 1.0,
        p_tilde,
    };
    cert.c0 = optimize_c0(&params, mu, l, &cert, 100.0 * alpha + 10.0)?.0;
    coefficients_from_certificate(&params, mu, l, &cert, Provenance::Nag)
}

/// Closed-form `H̄∞` of the Nesterov certificate.
pub fn nag_h_bar_formula(alpha: f64, mu: f64, l: f64) -> f64 {
    let e = (alpha * mu).sqrt();
    let op = (1.0 + e) * (1.0 + e);
    (4.0 * (5.0 - 2.0 * e + e * e) / (mu * op)
        + alpha.sqrt() * (1.0 + alpha * l) / mu.sqrt()
        + 8.0 * alpha.powi(3) * l.powi(4) * (4.0 + (1.0 - e) * (1.0 - e)) / (mu * mu * op))
        .sqrt()
}

/// Weights `a_{k,K}`, `b_{k,K}` (`k = 0..=K`) of the modified Lyapunov sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda_plus: f64,
    pub j_pq: f64,
}

fn check_pq(p: f64, q: f64) -> Result<(f64, f64)> {
    if !(p >= 0.0 && q >= 0.0 && p + q < 1.0) {
        return Err(Error::Domain(format!("need p, q >= 0 and p + q < 1, got p={p}, q={q}")));
    }
    let lp = (p + (p * p + 4.0 * q).sqrt()) / 2.0;
    Ok((lp, 1.0 / (1.0 + lp - p)))
}

/// Closed form `a_{k,K} = (1−λ₊^{K−k+1})/(1−(p+q))`, `b_{k,K} = (λ₊−p)a_{k,K}`.
pub fn recurrence_coeffs(p: f64, q: f64, k_max: usize) -> Result<Recurrence> {
    let (lp, j) = check_pq(p, q)?;
    let a: Vec<f64> = (0..=k_max)
        .map(|k| (1.0 - lp.powi((k_max - k + 1) as i32)) / (1.0 - (p + q)))
        .collect();
    let b = a.iter().map(|x| (lp - p) * x).collect();
    Ok(Recurrence { a, b, lambda_plus: lp, j_pq: j })
}

/// Backward recursion `a_k = J + p·a_{k+1} + b_{k+1}`, `b_k = (1−J) + q·a_{k+1}`
/// from `a_K = J`, `b_K = 1 − J`.
pub fn recurrence_direct(p: f64, q: f64, k_max: usize) -> Result<Recurrence> {
    let (lp, j) = check_pq(p, q)?;
    let mut a = vec![0.0; k_max + 1];
    let mut b = vec![0.0; k_max + 1];
    a[k_max] = j;
    b[k_max] = 1.0 - j;
    for k in (0..k_max).rev() {
        a[k] = j + p * a[k + 1] + b[k + 1];
        b[k] = (1.0 - j) + q * a[k + 1];
    }
    Ok(Recurrence { a, b, lambda_plus: lp, j_pq: j })
}

/// `ĉ(K, θ)`; `None` when the guard `√θ·H̄∞ < 1` fails.
fn c_hat(c: &BoundCoefficients, k: usize, theta: f64, sigma2: f64) -> Option<f64> {
    if theta * c.h_bar_inf * c.h_bar_inf >= 1.0 {
        return None;
    }
    let cc = c.c_const();
    let denom = 1.0 - (c.p + c.q);
    let mut sum = 0.0;
    for j in 1..=k {
        let a = (1.0 - c.lambda_plus.powi((k - j + 1) as i32)) / denom;
        if theta == 0.0 {
            sum += 4.0 * sigma2 * c.r * a;
        } else {
            let x = c.r * theta * a / cc;
            sum += ((1.0 + x) / (1.0 - x)).ln();
        }
    }
    Some(if theta == 0.0 { sum } else { 2.0 * sigma2 * cc / theta * sum })
}

/// `c̄(K, θ) = ((1−λ₊^{K+1})/(1−λ₊) − 1 + J)·V(ξ₀) + ĉ(K, θ)`.
fn c_bar(c: &BoundCoefficients, k: usize, theta: f64, sigma2: f64) -> Option<f64> {
    let lp = c.lambda_plus;
    let geo = if lp == 0.0 {
        1.0
    } else {
        (1.0 - lp.powi((k + 1) as i32)) / (1.0 - lp)
    };
    c_hat(c, k, theta, sigma2).map(|h| (geo - 1.0 + c.j_pq) * c.v0 + h)
}

/// Finite-horizon bound `R̄_K(θ)`. `θ = 0` gives the right limit, a bound on
/// the mean running-average suboptimality. The `θ/J` branch is used only
/// when its own guard `√(θ/J)·H̄∞ < 1` holds.
pub fn risk_bound_finite(coeffs: &BoundCoefficients, theta: f64, k: usize, sigma2: f64) -> Result<ExtReal> {
    if k == 0 {
        return Err(Error::Range("the horizon K must be at least 1".into()));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Range(format!("theta must be >= 0, got {theta}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Range(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    if theta * coeffs.h_bar_inf * coeffs.h_bar_inf >= 1.0 {
        return Ok(ExtReal::PosInf);
    }
    let j = coeffs.j_pq;
    let second = c_bar(coeffs, k + 1, theta, sigma2);
    let first = c_bar(coeffs, k, theta / j, sigma2).map(|v| v / j);
    let best = match (first, second) {
        (Some(a), Some(b)) => a.min(b),
        (None, Some(b)) => b,
        (Some(a), None) => a,
        (None, None) => return Ok(ExtReal::PosInf),
    };
    Ok(ExtReal::Finite(best / (coeffs.c_const() * (k + 1) as f64)))
}

/// `R̄(θ) = (2σ²/θ)·log((1+θH̄∞²)/(1−θH̄∞²))`, `+∞` once `√θ·H̄∞ ≥ 1`, and
/// `4σ²H̄∞²` at `θ = 0`.
pub fn risk_bound_asymptotic(coeffs: &BoundCoefficients, theta: f64, sigma2: f64) -> Result<ExtReal> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Range(format!("theta must be >= 0, got {theta}")));
    }
    let h2 = coeffs.h_bar_inf * coeffs.h_bar_inf;
    let x = theta * h2;
    if x >= 1.0 {
        return Ok(ExtReal::PosInf);
    }
    if theta == 0.0 {
        return Ok(ExtReal::Finite(risk_bound_asymptotic_zero(coeffs, sigma2)));
    }
    // log((1+x)/(1−x)) = 2·atanh(x), accurate for small x.
    Ok(ExtReal::Finite(2.0 * sigma2 / theta * 2.0 * x.atanh()))
}

/// `lim_{θ↓0} R̄(θ) = 4σ²H̄∞²`, the bound on the asymptotic suboptimality bias.
pub fn risk_bound_asymptotic_zero(coeffs: &BoundCoefficients, sigma2: f64) -> f64 {
    4.0 * sigma2 * coeffs.h_bar_inf * coeffs.h_bar_inf
}

/// `φ(θ, ǎ, b̌) = ǎ + (2σ²/θ)·log((1+θb̌)/(1−θb̌))` for `θ ∈ (0, 1/b̌)`.
pub fn phi(theta: f64, a_check: f64, b_check: f64, sigma2: f64) -> f64 {
    if theta == 0.0 {
        return a_check + 4.0 * sigma2 * b_check;
    }
    a_check + 2.0 * sigma2 / theta * 2.0 * (theta * b_check).atanh()
}

/// `Ψ(t, ǎ, b̌) = sup_{0≤θ<1/b̌} (θ/2σ²)(t − φ(θ, ǎ, b̌))` in closed form.
pub fn psi(t: f64, a_check: f64, b_check: f64, sigma2: f64) -> Result<f64> {
    if !(b_check > 0.0 && sigma2 > 0.0) {
        return Err(Error::Range("psi needs b_check > 0 and sigma2 > 0".into()));
    }
    let u = t - a_check;
    let thr = 4.0 * sigma2 * b_check;
    if u < thr {
        return Ok(0.0);
    }
    let s = (1.0 - thr / u).sqrt();
    Ok(u / (2.0 * sigma2 * b_check) * s - 2.0 * s.atanh())
}

/// Large-deviation quantities at a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpFinite {
    /// `min(1, exp(−(K+1)(θ/2σ²)(t − R̄_K(θ))))` for the supplied θ.
    pub prob_bound: Option<f64>,
    /// Lower bound on `Ī_K(t)` from the two Ψ expressions.
    pub i_bar_k: f64,
}

/// The constants `(ǎ⁽¹⁾, b̌⁽¹⁾, č⁽¹⁾, ǎ⁽²⁾, b̌⁽²⁾)` at horizon `K ≥ 1`.
pub fn psi_constants(c: &BoundCoefficients, k: usize) -> Result<[f64; 5]> {
    if k == 0 {
        return Err(Error::Range("the horizon K must be at least 1".into()));
    }
    let lp = c.lambda_plus;
    let geo = |n: usize| {
        if lp == 0.0 {
            1.0
        } else {
            (1.0 - lp.powi(n as i32)) / (1.0 - lp)
        }
    };
    let h2 = c.h_bar_inf * c.h_bar_inf;
    let kf = k as f64;
    let a1 = (geo(k + 1) - 1.0 + c.j_pq) * c.v0 / (c.c_const() * kf);
    let b1 = (1.0 - lp.powi(k as i32)) * h2 / c.j_pq;
    let c1 = kf / ((kf + 1.0) * c.j_pq);
    let a2 = (geo(k + 2) - 1.0 + c.j_pq) * c.v0 / (c.c_const() * (kf + 1.0));
    let b2 = (1.0 - lp.powi((k + 1) as i32)) * h2;
    Ok([a1, b1, c1, a2, b2])
}

pub fn ldp_bound_finite(
    coeffs: &BoundCoefficients,
    k: usize,
    t: f64,
    sigma2: f64,
    theta: Option<f64>,
) -> Result<LdpFinite> {
    if !(t >= 0.0) {
        return Err(Error::Range(format!("t must be >= 0, got {t}")));
    }
    let [a1, b1, c1, a2, b2] = psi_constants(coeffs, k)?;
    let psi_or_zero = |t: f64, a: f64, b: f64| -> Result<f64> {
        if b > 0.0 {
            psi(t, a, b, sigma2)
        } else {
            Ok(0.0)
        }
    };
    let i1 = c1 * psi_or_zero(t / c1, a1, b1)?;
    let i2 = psi_or_zero(t, a2, b2)?;
    let prob_bound = match theta {
        None => None,
        Some(th) => {
            if !(th >= 0.0 && th * coeffs.h_bar_inf * coeffs.h_bar_inf < 1.0) {
                return Err(Error::Range(format!(
                    "theta must lie in [0, 1/H_bar^2) = [0, {}), got {th}",
                    1.0 / (coeffs.h_bar_inf * coeffs.h_bar_inf)
                )));
            }
            let rb = risk_bound_finite(coeffs, th, k, sigma2)?.to_f64();
            let expo = -((k + 1) as f64) * th / (2.0 * sigma2) * (t - rb);
            Some(expo.exp().min(1.0))
        }
    };
    Ok(LdpFinite {
        prob_bound,
        i_bar_k: i1.max(i2),
    })
}

/// Asymptotic rate bound `Ī(t) = Ψ(t, 0, H̄∞²)`.
pub fn ldp_bound_asymptotic(coeffs: &BoundCoefficients, t: f64, sigma2: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Range(format!("t must be >= 0, got {t}")));
    }
    psi(t, 0.0, coeffs.h_bar_inf * coeffs.h_bar_inf, sigma2)
}

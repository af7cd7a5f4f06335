//! Per-eigenvalue 2×2 discrete algebraic Riccati equations.
//!
//! For an eigenvalue `λ` of `Q` and `γ = 1/√(θ/d)` the equation is
//!
//! ```text
//! X = ÃᵀXÃ + ÃᵀXB̃ (γ² − B̃ᵀXB̃)⁻¹ B̃ᵀXÃ + Q̃,   Q̃ = diag(λ/2, 0)
//! ```
//!
//! and the risk index of a quadratic only needs `X̃₁₁` of its stabilizing
//! solution. The solver is a plain value iteration started at `Q̃`; it is
//! monotone and converges geometrically while `γ` exceeds the mode's gain.
//! The full `2d×2d` equation is only assembled to verify the block reduction.

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::gmm::{BlockCompanion, GmmParams};
use crate::linalg::{m2_frobenius, m2_mul, m2_transpose, spectral_radius, Mat, M2};
use crate::problems::QuadraticProblem;

pub const DEFAULT_TOL: f64 = 1e-13;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
const PSD_SLACK: f64 = 1e-10;

/// One 2×2 Riccati problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DareInstance {
    pub lambda: f64,
    pub params: GmmParams,
    pub gamma: f64,
    pub a_tilde: M2,
    pub b_tilde: [f64; 2],
    pub q_tilde: M2,
}

impl DareInstance {
    pub fn new(params: &GmmParams, lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("eigenvalue must be positive, got {lambda}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::Range(format!("gamma must be positive, got {gamma}")));
        }
        Ok(DareInstance {
            lambda,
            params: *params,
            gamma,
            a_tilde: BlockCompanion::new(params, lambda).a,
            b_tilde: [-params.alpha, 0.0],
            q_tilde: [[lambda / 2.0, 0.0], [0.0, 0.0]],
        })
    }

    /// Instance for risk parameter `θ > 0` in dimension `d`: `γ = 1/√(θ/d)`.
    pub fn for_theta(params: &GmmParams, lambda: f64, theta: f64, d: usize) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Range(format!(
                "the Riccati route needs theta > 0, got {theta}"
            )));
        }
        DareInstance::new(params, lambda, (d as f64 / theta).sqrt())
    }

    /// Right-hand side of the equation at `x`, or the gain-exceeded error.
    fn rhs(&self, x: &M2) -> Result<M2> {
        let a = &self.a_tilde;
        let alpha = self.params.alpha;
        let denom = self.gamma * self.gamma - alpha * alpha * x[0][0];
        if !(denom > 0.0) {
            return Err(Error::GainExceeded {
                lambda: self.lambda,
                margin: denom,
            });
        }
        let at = m2_transpose(a);
        let mut out = m2_mul(&m2_mul(&at, x), a);
        // B̃ = (−α, 0): ÃᵀXB̃ = −α·Ãᵀ x₁ with x₁ the first column of X.
        let x1 = [x[0][0], x[1][0]];
        let v = [at[0][0] * x1[0] + at[0][1] * x1[1], at[1][0] * x1[0] + at[1][1] * x1[1]];
        let s = alpha * alpha / denom;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += s * v[i] * v[j] + self.q_tilde[i][j];
            }
        }
        Ok(out)
    }

    /// Frobenius norm of the equation defect at `x`.
    pub fn residual(&self, x: &M2) -> Result<f64> {
        let r = self.rhs(x)?;
        let d = [
            [x[0][0] - r[0][0], x[0][1] - r[0][1]],
            [x[1][0] - r[1][0], x[1][1] - r[1][1]],
        ];
        Ok(m2_frobenius(&d))
    }

    /// `ρ(Ã + γ⁻²B̃B̃ᵀX)`, the spectral radius used by the stabilizing-solution
    /// test.
    pub fn closed_loop_radius(&self, x: &M2) -> f64 {
        let g2 = self.gamma * self.gamma;
        let b = self.b_tilde;
        let mut m = self.a_tilde;
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += (b[i] * (b[0] * x[0][j] + b[1] * x[1][j])) / g2;
            }
        }
        crate::linalg::m2_spectral_radius(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DareSolution {
    pub x_tilde: M2,
    pub residual: f64,
    pub closed_loop_radius: f64,
    pub iterations: usize,
}

/// Value iteration from `X₀ = Q̃` until the Frobenius change drops below
/// `tol·max(1, ‖X‖)` and the residual below [`RESIDUAL_TOL`].
pub fn solve_dare_2x2(instance: &DareInstance, tol: f64, max_iter: usize) -> Result<DareSolution> {
    let mut x = instance.q_tilde;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let next = instance.rhs(&x)?;
        change = m2_frobenius(&[
            [next[0][0] - x[0][0], next[0][1] - x[0][1]],
            [next[1][0] - x[1][0], next[1][1] - x[1][1]],
        ]);
        x = next;
        if !x[0][0].is_finite() {
            return Err(Error::Numerical("Riccati iterate overflowed".into()));
        }
        if change <= tol * m2_frobenius(&x).max(1.0) {
            let residual = instance.residual(&x)?;
            if residual < RESIDUAL_TOL * m2_frobenius(&x).max(1.0) {
                return finish(instance, x, residual, it);
            }
        }
    }
    Err(Error::Convergence {
        what: "2x2 Riccati value iteration".into(),
        iterations: max_iter,
        residual: change,
        hint: "; theta is probably very close to the finiteness boundary d/H_inf^2".into(),
    })
}

fn finish(instance: &DareInstance, mut x: M2, residual: f64, iterations: usize) -> Result<DareSolution> {
    // Symmetrize away round-off.
    let off = 0.5 * (x[0][1] + x[1][0]);
    x[0][1] = off;
    x[1][0] = off;
    let tr = x[0][0] + x[1][1];
    let det = x[0][0] * x[1][1] - off * off;
    let min_eig = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    if min_eig < -PSD_SLACK * tr.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "Riccati solution is not PSD (min eigenvalue {min_eig:e})"
        )));
    }
    let radius = instance.closed_loop_radius(&x);
    if !(radius < 1.0) {
        return Err(Error::Numerical(format!(
            "Riccati solution is not stabilizing (closed-loop radius {radius})"
        )));
    }
    Ok(DareSolution {
        x_tilde: x,
        residual,
        closed_loop_radius: radius,
        iterations,
    })
}

/// Solution of `X = ÃᵀXÃ + Q̃`, the `γ → ∞` limit, by series summation.
pub fn lyapunov_2x2(params: &GmmParams, lambda: f64) -> Result<M2> {
    let block = BlockCompanion::new(params, lambda);
    if !(block.spectral_radius() < 1.0) {
        return Err(Error::Domain(format!(
            "block for lambda={lambda} is not Schur stable"
        )));
    }
    let a = block.a;
    let at = m2_transpose(&a);
    let mut term: M2 = [[lambda / 2.0, 0.0], [0.0, 0.0]];
    let mut sum = term;
    for _ in 0..10_000_000 {
        term = m2_mul(&m2_mul(&at, &term), &a);
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
        if m2_frobenius(&term) < 1e-16 * m2_frobenius(&sum) {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        what: "Lyapunov series".into(),
        iterations: 10_000_000,
        residual: m2_frobenius(&term),
        hint: "; block spectral radius is too close to 1".into(),
    })
}

/// `X̃₁₁` for gradient descent from the explicit radical formula, or `+∞`
/// when the discriminant is negative (the mode's gain is not below `γ`).
pub fn gd_closed_form(lambda: f64, alpha: f64, theta: f64, d: usize) -> Result<ExtReal> {
    if !(lambda > 0.0) {
        return Err(Error::Domain("eigenvalue must be positive".into()));
    }
    if !(alpha > 0.0 && alpha * lambda < 2.0) {
        return Err(Error::Range(format!(
            "gradient descent needs 0 < alpha < 2/lambda, got alpha={alpha}, lambda={lambda}"
        )));
    }
    if !(theta > 0.0) {
        return Err(Error::Range(format!("theta must be positive, got {theta}")));
    }
    let r = 1.0 - alpha * lambda;
    if r == 0.0 {
        return Ok(ExtReal::Finite(lambda / 2.0));
    }
    let c = d as f64 / (alpha * alpha * theta);
    let b = lambda / 2.0 + c * (1.0 - r * r);
    let disc = b * b - 2.0 * c * lambda;
    if disc < 0.0 {
        return Ok(ExtReal::PosInf);
    }
    // Rationalized minus root: (b − √disc)/2 = c·λ / (b + √disc).
    Ok(ExtReal::Finite(c * lambda / (b + disc.sqrt())))
}

/// Outcome of assembling the full `2d×2d` equation from the 2×2 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionCheck {
    pub residual: f64,
    pub closed_loop_radius: f64,
    pub x_bar: Mat,
}

/// Builds `X̄ = Y·Diag(X̃^{(λ_i)})·Yᵀ` with `Y = V·Σ` (`V = diag(U, U)` and
/// `Σ` the interleaving permutation), then evaluates the full equation
/// residual for `A_Q`, `B = (−αI; 0)`, `TᵀT = diag(Q/2, 0)` and the radius
/// `ρ(A_Q + γ⁻²BBᵀX̄)`.
pub fn verify_dimension_reduction(
    problem: &QuadraticProblem,
    params: &GmmParams,
    theta: f64,
    tol: f64,
) -> Result<ReductionCheck> {
    let d = problem.dim();
    if d > 8 {
        return Err(Error::Validation(format!(
            "dimension-reduction check is meant for d <= 8, got {d}"
        )));
    }
    let spec = problem.spectral();
    let mut blocks = Mat::zeros(2 * d, 2 * d);
    let mut gamma = 0.0;
    for (i, &lambda) in spec.eigenvalues.iter().enumerate() {
        let inst = DareInstance::for_theta(params, lambda, theta, d)?;
        gamma = inst.gamma;
        let sol = solve_dare_2x2(&inst, tol, DEFAULT_MAX_ITER)?;
        for r in 0..2 {
            for c in 0..2 {
                blocks[(2 * i + r, 2 * i + c)] = sol.x_tilde[r][c];
            }
        }
    }
    // Σ maps interleaved coordinates (2i, 2i+1) to (i, d+i).
    let mut sigma = Mat::zeros(2 * d, 2 * d);
    for i in 0..d {
        sigma[(i, 2 * i)] = 1.0;
        sigma[(d + i, 2 * i + 1)] = 1.0;
    }
    let mut v = Mat::zeros(2 * d, 2 * d);
    v.set_block(0, 0, &spec.basis);
    v.set_block(d, d, &spec.basis);
    let y = v.matmul(&sigma);
    let x_bar = y.matmul(&blocks).matmul(&y.transpose());

    let q = problem.q();
    let GmmParams { alpha, beta, nu } = *params;
    let eye = Mat::identity(d);
    let mut a_q = Mat::zeros(2 * d, 2 * d);
    a_q.set_block(0, 0, &eye.scale(1.0 + beta).sub(&q.scale(alpha * (1.0 + nu))));
    a_q.set_block(0, d, &eye.scale(-beta).add(&q.scale(alpha * nu)));
    a_q.set_block(d, 0, &eye);
    let mut b = Mat::zeros(2 * d, d);
    b.set_block(0, 0, &eye.scale(-alpha));
    let mut tt = Mat::zeros(2 * d, 2 * d);
    tt.set_block(0, 0, &q.scale(0.5));

    let g2 = gamma * gamma;
    let btxb = b.transpose().matmul(&x_bar).matmul(&b);
    let inner = eye.scale(g2).sub(&btxb).inverse()?;
    let xa = x_bar.matmul(&a_q);
    let at = a_q.transpose();
    let rhs = at
        .matmul(&xa)
        .add(&at.matmul(&x_bar).matmul(&b).matmul(&inner).matmul(&b.transpose()).matmul(&xa))
        .add(&tt);
    let residual = x_bar.sub(&rhs).frobenius();
    let closed = a_q.add(&b.matmul(&b.transpose()).matmul(&x_bar).scale(1.0 / g2));
    let closed_loop_radius = spectral_radius(&closed);
    Ok(ReductionCheck {
        residual,
        closed_loop_radius,
        x_bar,
    })
}

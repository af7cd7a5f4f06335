//! Objective functions: strongly convex quadratics and ℓ₂-regularized Huber
//! regression, with exact gradients, curvature constants and minimizers.

use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen, norm2, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `Q = U·Diag(λ)·Uᵀ` with eigenvalues sorted non-decreasingly.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub basis: Mat,
}

impl SpectralDecomposition {
    /// `U·Diag(λ)·Uᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.eigenvalues.len();
        let mut ul = self.basis.clone();
        for i in 0..n {
            for j in 0..n {
                ul[(i, j)] *= self.eigenvalues[j];
            }
        }
        ul.matmul(&self.basis.transpose())
    }
}

/// Symmetric eigen-decomposition (cyclic Jacobi).
pub fn eig_sym(q: &Mat) -> Result<SpectralDecomposition> {
    if !q.is_square() {
        return Err(Error::Validation(format!(
            "expected a square matrix, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    if !q.is_symmetric(1e-12) {
        return Err(Error::Validation("matrix is not symmetric".into()));
    }
    let (eigenvalues, basis) = jacobi_eigen(q)?;
    Ok(SpectralDecomposition { eigenvalues, basis })
}

/// `f(x) = ½xᵀQx + gᵀx + h` with `Q` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    q: Mat,
    g: Vec<f64>,
    h: f64,
    spectral: SpectralDecomposition,
    x_star: Vec<f64>,
    f_star: f64,
}

impl QuadraticProblem {
    /// Builds the problem and precomputes the spectrum and minimizer.
    ///
    /// `μ = L` is accepted (the scalar case is a useful analytic oracle);
    /// `λ₁ ≤ 0` is a domain error.
    pub fn new(q: Mat, g: Vec<f64>, h: f64) -> Result<Self> {
        if g.len() != q.rows() {
            return Err(Error::Validation(format!(
                "linear term has length {} but Q is {}x{}",
                g.len(),
                q.rows(),
                q.cols()
            )));
        }
        let spectral = eig_sym(&q)?;
        let mu = spectral.eigenvalues[0];
        if mu <= 0.0 {
            return Err(Error::Domain(format!(
                "Q must be positive definite (smallest eigenvalue {mu:.3e})"
            )));
        }
        // x* = -U Λ⁻¹ Uᵀ g
        let ut_g = spectral.basis.tr_matvec(&g);
        let scaled: Vec<f64> = ut_g
            .iter()
            .zip(&spectral.eigenvalues)
            .map(|(c, l)| -c / l)
            .collect();
        let x_star = spectral.basis.matvec(&scaled);
        let mut p = QuadraticProblem {
            q,
            g,
            h,
            spectral,
            x_star,
            f_star: 0.0,
        };
        p.f_star = p.value(&p.x_star);
        Ok(p)
    }

    /// Diagonal `Q = Diag(eigenvalues)`, `g = 0`, `h = 0`.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return Err(Error::Validation("need at least one eigenvalue".into()));
        }
        QuadraticProblem::new(Mat::diag(eigenvalues), vec![0.0; d], 0.0)
    }

    /// `Q = U·Diag(eigenvalues)·Uᵀ` with a random orthogonal `U` drawn from
    /// `seed`, and a random linear term so that the minimizer is not zero.
    pub fn with_random_basis(eigenvalues: &[f64], seed: u64) -> Result<Self> {
        let d = eigenvalues.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthogonal(d, &mut rng);
        let spectral = SpectralDecomposition {
            eigenvalues: eigenvalues.to_vec(),
            basis: u,
        };
        let mut q = spectral.reconstruct();
        // Enforce exact symmetry against rounding.
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (q[(i, j)] + q[(j, i)]);
                q[(i, j)] = avg;
                q[(j, i)] = avg;
            }
        }
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        QuadraticProblem::new(q, g, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectral.eigenvalues
    }

    pub fn mu(&self) -> f64 {
        self.spectral.eigenvalues[0]
    }

    pub fn l(&self) -> f64 {
        *self.spectral.eigenvalues.last().unwrap()
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let qx = self.q.matvec(x);
        0.5 * dot(x, &qx) + dot(&self.g, x) + self.h
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = dot(self.q.row(i), x) + self.g[i];
        }
    }

    /// `½(x−x*)ᵀQ(x−x*)`, which equals `f(x) − f*` but without cancellation.
    #[allow(clippy::needless_range_loop)]
    pub fn suboptimality(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.q[(i, j)] * (x[j] - self.x_star[j]);
            }
            s += (x[i] - self.x_star[i]) * row;
        }
        0.5 * s
    }
}

/// `f(x) = Σᵢ g_λ(aᵢᵀx − bᵢ) + (μ/2)‖x‖²` with the Huber loss
/// `g_λ(z) = z²/2` for `|z| ≤ λ` and `λ(|z| − λ/2)` otherwise.
#[derive(Debug, Clone)]
pub struct HuberProblem {
    /// Data points `aᵢ` stored as rows (p×d), i.e. the transpose of `A`.
    data: Mat,
    b: Vec<f64>,
    mu_reg: f64,
    lambda: f64,
    l: f64,
    x_star: Vec<f64>,
    f_star: f64,
}

/// Defaults taken from the robust-regression experiment.
pub const HUBER_DEFAULT_LAMBDA: f64 = 0.1;
pub const HUBER_DEFAULT_MU: f64 = 0.005;
pub const HUBER_DEFAULT_L: f64 = 20.0;

impl HuberProblem {
    /// `a` is the d×p data matrix `A` (one column per datum).
    pub fn new(a: &Mat, b: Vec<f64>, mu_reg: f64, lambda: f64) -> Result<Self> {
        if a.cols() != b.len() {
            return Err(Error::Validation(format!(
                "A has {} columns but b has length {}",
                a.cols(),
                b.len()
            )));
        }
        if mu_reg <= 0.0 || lambda <= 0.0 {
            return Err(Error::Domain(
                "Huber problem needs mu_reg > 0 and lambda > 0".into(),
            ));
        }
        let l = spectral_norm_sq(a)? + mu_reg;
        let mut p = HuberProblem {
            data: a.transpose(),
            b,
            mu_reg,
            lambda,
            l,
            x_star: vec![0.0; a.rows()],
            f_star: 0.0,
        };
        let x_star = p.minimize()?;
        p.f_star = p.value(&x_star);
        p.x_star = x_star;
        Ok(p)
    }

    /// Random instance: `A` and `b` with i.i.d. U[−1,1] entries, then `A`
    /// rescaled so that `‖A‖ = √(L−μ)` (hence the smoothness constant is `L`).
    pub fn generate(d: usize, p: usize, mu: f64, l: f64, lambda: f64, seed: u64) -> Result<Self> {
        if d == 0 || p == 0 {
            return Err(Error::Validation("Huber instance needs d, p >= 1".into()));
        }
        if !(0.0 < mu && mu < l) {
            return Err(Error::Domain(format!("need 0 < mu < L, got mu={mu}, L={l}")));
        }
        let (a, b) = generate_huber_data(d, p, mu, l, seed)?;
        HuberProblem::new(&a, b, mu, lambda)
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn n_data(&self) -> usize {
        self.data.rows()
    }

    /// The d×p data matrix `A`.
    pub fn a_matrix(&self) -> Mat {
        self.data.transpose()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu_reg
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    /// Writes the data as CSV, one datum per row: `a1,…,ad,b`.
    pub fn write_data_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("a{j}")).collect();
        writeln!(w, "{},b", header.join(","))?;
        for (i, bi) in self.b.iter().enumerate() {
            let row: Vec<String> = self.data.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{bi}", row.join(","))?;
        }
        Ok(())
    }

    fn huber(&self, z: f64) -> f64 {
        if z.abs() <= self.lambda {
            0.5 * z * z
        } else {
            self.lambda * (z.abs() - 0.5 * self.lambda)
        }
    }

    fn huber_prime(&self, z: f64) -> f64 {
        z.clamp(-self.lambda, self.lambda)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut s = 0.5 * self.mu_reg * dot(x, x);
        for i in 0..self.n_data() {
            s += self.huber(dot(self.data.row(i), x) - self.b[i]);
        }
        s
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.mu_reg * xi;
        }
        for i in 0..self.n_data() {
            let row = self.data.row(i);
            let c = self.huber_prime(dot(row, x) - self.b[i]);
            if c != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += c * a;
                }
            }
        }
    }

    /// Adds `scale · g_λ'(aᵢᵀx − bᵢ) · aᵢ` to `out` (loss part of datum `i`
    /// only; the regularizer is not included).
    pub fn add_datum_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let row = self.data.row(i);
        let c = scale * self.huber_prime(dot(row, x) - self.b[i]);
        if c != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += c * a;
            }
        }
    }

    /// Damped Newton on the generalized Hessian `Σ_{|rᵢ|≤λ} aᵢaᵢᵀ + μI`,
    /// with a backtracking gradient step as fallback. Stops at
    /// `‖∇f‖ < 1e-10`.
    fn minimize(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut fx = self.value(&x);
        const MAX_ITER: usize = 500;
        for _ in 0..MAX_ITER {
            self.gradient_into(&x, &mut g);
            let gnorm = norm2(&g);
            if gnorm < 1e-10 {
                return Ok(x);
            }
            let mut dir = match self.newton_direction(&x, &g) {
                Some(dir) if dot(&dir, &g) < 0.0 => dir,
                _ => g.iter().map(|v| -v / self.l).collect(),
            };
            let mut accepted = false;
            for attempt in 0..2 {
                let slope = dot(&dir, &g);
                let mut t = 1.0;
                for _ in 0..60 {
                    let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                    let ft = self.value(&trial);
                    if ft <= fx + 1e-4 * t * slope {
                        x = trial;
                        fx = ft;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if accepted || attempt == 1 {
                    break;
                }
                dir = g.iter().map(|v| -v / self.l).collect();
            }
            if !accepted {
                // Function value stagnated at rounding level; accept if the
                // gradient is tiny relative to the data scale.
                self.gradient_into(&x, &mut g);
                if norm2(&g) < 1e-9 {
                    return Ok(x);
                }
                return Err(Error::Convergence {
                    what: "Huber minimizer".into(),
                    iterations: MAX_ITER,
                    residual: norm2(&g),
                    hint: ": line search failed".into(),
                });
            }
        }
        self.gradient_into(&x, &mut g);
        Err(Error::Convergence {
            what: "Huber minimizer".into(),
            iterations: MAX_ITER,
            residual: norm2(&g),
            hint: String::new(),
        })
    }

    fn newton_direction(&self, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim();
        let mut h = Mat::identity(d).scale(self.mu_reg);
        for i in 0..self.n_data() {
            let row = self.data.row(i);
            if (dot(row, x) - self.b[i]).abs() <= self.lambda {
                for r in 0..d {
                    for c in 0..d {
                        h[(r, c)] += row[r] * row[c];
                    }
                }
            }
        }
        let hinv = h.inverse().ok()?;
        Some(hinv.matvec(g).iter().map(|v| -v).collect())
    }
}

/// `‖A‖²` = largest eigenvalue of `AAᵀ`.
fn spectral_norm_sq(a: &Mat) -> Result<f64> {
    let aat = a.matmul(&a.transpose());
    let (vals, _) = jacobi_eigen(&aat)?;
    Ok(*vals.last().unwrap_or(&0.0))
}

/// Raw data for the robust-regression experiment (A is d×p).
pub fn generate_huber_data(d: usize, p: usize, mu: f64, l: f64, seed: u64) -> Result<(Mat, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..d * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let b: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut a = Mat::from_vec(d, p, entries)?;
    let norm = spectral_norm_sq(&a)?.sqrt();
    if norm == 0.0 {
        return Err(Error::Numerical("degenerate random data matrix".into()));
    }
    a = a.scale((l - mu).sqrt() / norm);
    Ok((a, b))
}

/// Haar-like random orthogonal matrix via Gram–Schmidt on Gaussian columns.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // Two passes of modified Gram–Schmidt for orthogonality to rounding.
        for _ in 0..2 {
            for c in &cols {
                let proj = dot(&v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let n = norm2(&v);
        if n > 1e-8 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut u = Mat::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            u[(i, j)] = c[i];
        }
    }
    u
}

/// Either objective; the simulation engine works with this type.
#[derive(Debug, Clone)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    Huber(HuberProblem),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim(),
            Problem::Huber(h) => h.dim(),
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            Problem::Quadratic(q) => q.mu(),
            Problem::Huber(h) => h.mu(),
        }
    }

    pub fn l(&self) -> f64 {
        match self {
            Problem::Quadratic(q) => q.l(),
            Problem::Huber(h) => h.l(),
        }
    }

    pub fn x_star(&self) -> &[f64] {
        match self {
            Problem::Quadratic(q) => q.x_star(),
            Problem::Huber(h) => h.x_star(),
        }
    }

    pub fn f_star(&self) -> f64 {
        match self {
            Problem::Quadratic(q) => q.f_star(),
            Problem::Huber(h) => h.f_star(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Quadratic(q) => q.value(x),
            Problem::Huber(h) => h.value(x),
        }
    }

    /// Exact gradient written into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Problem::Quadratic(q) => q.gradient_into(x, out),
            Problem::Huber(h) => h.gradient_into(x, out),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        self.gradient_into(x, &mut out);
        Ok(out)
    }

    /// `f(x) − f*`.
    pub fn suboptimality(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.suboptimality_unchecked(x))
    }

    pub(crate) fn suboptimality_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Quadratic(q) => q.suboptimality(x),
            Problem::Huber(h) => h.value(x) - h.f_star(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Validation(format!(
                "vector has length {} but the problem dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Problem description read from a `key = value` text file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        eigenvalues: Vec<f64>,
        basis_seed: Option<u64>,
    },
    Huber {
        d: usize,
        p: usize,
        mu: f64,
        l: f64,
        lambda: f64,
        seed: u64,
    },
}

impl ProblemSpec {
    /// Parses `quadratic.eigenvalues = 1,3` (+ optional `quadratic.basis_seed`)
    /// or `huber.{d,p,mu,L,lambda,seed}`. Blank lines and `#` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Validation(format!("line {}: expected key = value", lineno + 1))
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |k: &str| -> Result<f64> {
            kv.get(k)
                .ok_or_else(|| Error::Validation(format!("missing key {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("{k}: {e}")))
        };
        if let Some(eigs) = kv.get("quadratic.eigenvalues") {
            let eigenvalues = parse_list(eigs)?;
            let basis_seed = match kv.get("quadratic.basis_seed") {
                Some(s) => Some(
                    s.parse::<u64>()
                        .map_err(|e| Error::Validation(format!("quadratic.basis_seed: {e}")))?,
                ),
                None => None,
            };
            return Ok(ProblemSpec::Quadratic {
                eigenvalues,
                basis_seed,
            });
        }
        if kv.keys().any(|k| k.starts_with("huber.")) {
            let int = |k: &str| -> Result<usize> {
                let v = num(k)?;
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Validation(format!("{k} must be a positive integer")));
                }
                Ok(v as usize)
            };
            return Ok(ProblemSpec::Huber {
                d: int("huber.d")?,
                p: int("huber.p")?,
                mu: kv.get("huber.mu").map_or(Ok(HUBER_DEFAULT_MU), |_| num("huber.mu"))?,
                l: kv.get("huber.L").map_or(Ok(HUBER_DEFAULT_L), |_| num("huber.L"))?,
                lambda: kv
                    .get("huber.lambda")
                    .map_or(Ok(HUBER_DEFAULT_LAMBDA), |_| num("huber.lambda"))?,
                seed: kv.get("huber.seed").map_or(Ok(0.0), |_| num("huber.seed"))? as u64,
            });
        }
        Err(Error::Validation(
            "problem spec needs quadratic.eigenvalues or huber.* keys".into(),
        ))
    }

    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Quadratic {
                eigenvalues,
                basis_seed,
            } => {
                let mut sorted = eigenvalues.clone();
                sorted.sort_by(f64::total_cmp);
                Ok(Problem::Quadratic(match basis_seed {
                    Some(seed) => QuadraticProblem::with_random_basis(&sorted, *seed)?,
                    None => QuadraticProblem::diagonal(&sorted)?,
                }))
            }
            ProblemSpec::Huber {
                d,
                p,
                mu,
                l,
                lambda,
                seed,
            } => Ok(Problem::Huber(HuberProblem::generate(
                *d, *p, *mu, *l, *lambda, *seed,
            )?)),
        }
    }
}

/// Comma-separated list of floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

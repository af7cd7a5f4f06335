use momentum_risk::gmm::{resolve_preset, GmmParams, PresetId};
use momentum_risk::montecarlo::*;
use momentum_risk::noise::NoiseModel;
use momentum_risk::problems::{HuberProblem, Problem, QuadraticProblem};
use momentum_risk::risk_bounds::{certificate_gd, certificate_gd_best, certificate_nag, risk_bound_finite, GdVariant};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn scalar_problem() -> Problem {
    Problem::Quadratic(QuadraticProblem::diagonal(&[1.0]).unwrap())
}

fn gaussian(sigma2: f64) -> NoiseModel {
    NoiseModel::IsotropicGaussian { sigma2 }
}

#[test]
fn zero_noise_from_minimizer_stays_put() {
    let problem = Problem::Quadratic(QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap());
    let params = resolve_preset(PresetId::NagPop, 1.0, 3.0).unwrap();
    let ens = simulate(&problem, &params, &NoiseModel::Zero, 50, 3, 1).unwrap();
    assert!(ens.subopt.iter().all(|&v| v == 0.0));
    assert!(ens.averaged_subopt.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_noise_gd_decays_geometrically() {
    let problem = Problem::Quadratic(QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap());
    let params = resolve_preset(PresetId::GdPop, 1.0, 3.0).unwrap();
    let opts = SimOptions::new(40, 1, 0).with_x0(vec![1.0, -2.0]);
    let ens = simulate_with(&problem, &params, &NoiseModel::Zero, &opts, None).unwrap();
    let row = ens.subopt_row(0);
    let rho: f64 = 2.0 / 3.0;
    for (j, &k) in ens.record_ks.iter().enumerate() {
        assert!(row[j] <= rho.powi(2 * k as i32) * row[0] * (1.0 + 1e-12) + 1e-300);
    }
}

#[test]
fn scalar_case_is_half_chi_square() {
    // x_{k+1} = −w_{k+1}, so f(x_k) − f* = w²/2 for k ≥ 1.
    let params = GmmParams::gd(1.0).unwrap();
    let n = 100_000;
    let ens = simulate(&scalar_problem(), &params, &gaussian(1.0), 3, n, 11).unwrap();
    let mut v: Vec<f64> = (0..n).map(|p| ens.subopt_row(p)[3]).collect();
    v.sort_by(f64::total_cmp);
    let chi = ChiSquared::new(1.0).unwrap();
    let ks = v
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let c = chi.cdf(2.0 * s);
            (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn reproducible_across_runs_and_thread_counts() {
    let problem = Problem::Quadratic(QuadraticProblem::with_random_basis(&[1.0, 2.0, 3.0], 5).unwrap());
    let params = resolve_preset(PresetId::Tmm, 1.0, 3.0).unwrap();
    let noise = gaussian(0.5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&problem, &params, &noise, 100, 40, 99).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    assert_eq!(a, run(1));
    let c = simulate(&problem, &params, &noise, 100, 40, 100).unwrap();
    assert_ne!(a.subopt, c.subopt);
}

#[test]
fn stride_keeps_running_sums_exact() {
    let params = GmmParams::gd(0.5).unwrap();
    let full = simulate(&scalar_problem(), &params, &gaussian(1.0), 20, 4, 3).unwrap();
    let opts = SimOptions::new(20, 4, 3).with_stride(7);
    let strided = simulate_with(&scalar_problem(), &params, &gaussian(1.0), &opts, None).unwrap();
    assert_eq!(strided.record_ks, vec![0, 7, 14, 20]);
    for p in 0..4 {
        for (j, &k) in strided.record_ks.iter().enumerate() {
            assert_eq!(strided.running_sum_row(p)[j], full.running_sum_row(p)[k]);
        }
    }
}

#[test]
fn empirical_risk_limits_and_ordering() {
    let params = GmmParams::gd(1.0).unwrap();
    let one = simulate(&scalar_problem(), &params, &gaussian(1.0), 30, 1, 8).unwrap();
    let r0 = empirical_risk(&one, 0.0, 1.0).unwrap();
    let rs = empirical_risk(&one, 1e-9, 1.0).unwrap();
    let direct = one.running_sum_row(0)[30] / 31.0;
    assert!((r0.final_value() - direct).abs() < 1e-15);
    assert!((rs.final_value() - direct).abs() < 1e-9);

    let ens = simulate(&scalar_problem(), &params, &gaussian(1.0), 50, 500, 8).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for th in [-1.0, -0.1, 0.0, 0.1, 0.5, 1.0, 1.5] {
        let v = empirical_risk(&ens, th, 1.0).unwrap().final_value();
        assert!(v >= prev - 1e-12, "theta={th}");
        prev = v;
    }
}

#[test]
fn empirical_risk_matches_scalar_oracle() {
    // With x₀ = x*, S_K is half a χ²_K variable, so
    // R_K(θ) = (K/(K+1))·(−(1/θ)·log(1 − θ/2)).
    let params = GmmParams::gd(1.0).unwrap();
    let (k, theta) = (200, 0.2);
    let opts = SimOptions::new(k, 100_000, 2024).with_stride(k);
    let ens = simulate_with(&scalar_problem(), &params, &gaussian(1.0), &opts, None).unwrap();
    let r = empirical_risk(&ens, theta, 1.0).unwrap();
    let exact = k as f64 / (k + 1) as f64 * (-(1.0 - theta / 2.0f64).ln() / theta);
    let se = r.final_std_error();
    assert!((r.final_value() - exact).abs() < 4.0 * se, "{} vs {exact} (se {se})", r.final_value());
    assert!(r.min_ess() > ESS_WARN);
    // and the finite-horizon certificate bound dominates it; at μ = L and
    // α = 1/L the distance certificate degenerates (ρ = 0), the function one
    // gives the same H̄∞ = 1/√2
    assert!(certificate_gd(1.0, 1.0, 1.0, GdVariant::Distance).is_err());
    let c = certificate_gd(1.0, 1.0, 1.0, GdVariant::Function)
        .unwrap()
        .with_initial_state(&scalar_problem(), &[0.0])
        .unwrap();
    let bound = risk_bound_finite(&c, theta, k, 1.0).unwrap().to_f64();
    assert!(bound >= r.final_value() - 3.0 * se);
}

#[test]
fn tail_frequencies() {
    let params = GmmParams::gd(1.0).unwrap();
    let ens = simulate(&scalar_problem(), &params, &gaussian(1.0), 20, 2000, 4).unwrap();
    let t0 = empirical_tail(&ens, 0.0).unwrap();
    assert_eq!((t0.running_average, t0.averaged_iterate), (1.0, 1.0));
    for t in [0.1, 0.3, 0.5, 1.0] {
        let f = empirical_tail(&ens, t).unwrap();
        assert!(f.averaged_iterate <= f.running_average);
    }
}

#[test]
fn lyapunov_decay_holds_pathwise() {
    let quad = Problem::Quadratic(QuadraticProblem::with_random_basis(&[1.0, 1.7, 3.0], 3).unwrap());
    let huber = Problem::Huber(HuberProblem::generate(4, 60, 0.2, 3.0, 1.0, 17).unwrap());
    for problem in [&quad, &huber] {
        let (mu, l) = (problem.mu(), problem.l());
        let certs = [
            certificate_gd(0.9 / l, mu, l, GdVariant::Distance).unwrap(),
            certificate_gd(1.5 / l, mu, l, GdVariant::Function).unwrap(),
            certificate_nag(0.5 / l, mu, l).unwrap(),
        ];
        for c in &certs {
            let opts = SimOptions::new(200, 20, 6).with_x0(vec![1.0; problem.dim()]).with_stride(50);
            let ens = simulate_with(problem, &c.params, &gaussian(0.3), &opts, Some(c)).unwrap();
            let ex = ens.max_lyapunov_excess().unwrap();
            assert!(ex <= 1e-9, "{:?}: excess {ex}", c.provenance);
        }
    }
}

#[test]
fn bound_dominates_empirical_risk_on_huber() {
    let problem = Problem::Huber(HuberProblem::generate(3, 100, 0.1, 4.0, 1.0, 2).unwrap());
    let (mu, l) = (problem.mu(), problem.l());
    let noise = NoiseModel::Minibatch { batch_size: 10 };
    let sigma2 = 2.0;
    for c in [certificate_gd_best(1.0 / l, mu, l).unwrap(), certificate_nag(1.0 / l, mu, l).unwrap()] {
        let x0 = vec![0.0; 3];
        let c = c.with_initial_state(&problem, &x0).unwrap();
        let opts = SimOptions::new(100, 200, 1).with_stride(100);
        let ens = simulate_with(&problem, &c.params, &noise, &opts, None).unwrap();
        let r = empirical_risk(&ens, 0.01, sigma2).unwrap();
        let bound = risk_bound_finite(&c, 0.01, 100, sigma2).unwrap().to_f64();
        assert!(r.final_value() <= bound + 3.0 * r.final_std_error());
    }
}

#[test]
fn divergent_paths_are_flagged() {
    let params = GmmParams::gd(2.5).unwrap();
    let opts = SimOptions::new(200, 5, 0).with_x0(vec![1.0]);
    let ens = simulate_with(&scalar_problem(), &params, &NoiseModel::Zero, &opts, None).unwrap();
    assert_eq!(ens.n_diverged(), 5);
    assert!(empirical_risk(&ens, 0.1, 1.0).is_err());
}

#[test]
fn pareto_single_point_and_monotone_frontier() {
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let gd_pop = GridSpec {
        alpha: AxisSpec { lo: 0.0, hi: 2.0 / 3.0, n: 1 },
        beta: AxisSpec { lo: 0.0, hi: 1.0, n: 1 },
    };
    let pts = pareto_sweep(&q, Method::Gd, &gd_pop, 0.2, 2.0).unwrap();
    assert_eq!(pts.len(), 1);
    assert!((pts[0].alpha - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(pareto_frontier(&pts), pts);

    let grid = GridSpec {
        alpha: AxisSpec { lo: 0.0, hi: 2.0 / 3.0, n: 40 },
        beta: AxisSpec { lo: 0.0, hi: 2.0, n: 40 },
    };
    for m in [Method::Gd, Method::Hb, Method::Nag] {
        let pts = pareto_sweep(&q, m, &grid, 0.2, 2.0).unwrap();
        let f = pareto_frontier(&pts);
        assert!(!f.is_empty());
        for w in f.windows(2) {
            assert!(w[0].rho <= w[1].rho && w[1].risk.to_f64() < w[0].risk.to_f64());
        }
        assert!(pts.iter().any(|p| !p.finite()) || m == Method::Gd);
    }
}

#[test]
fn nag_frontier_below_gd_frontier() {
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let gd = pareto_frontier(&pareto_sweep(&q, Method::Gd, &GridSpec::default_for(Method::Gd, 3.0, false), 0.2, 2.0).unwrap());
    let grid = GridSpec {
        alpha: AxisSpec { lo: 0.0, hi: 2.0 / 3.0, n: 80 },
        beta: AxisSpec { lo: 0.0, hi: 2.0, n: 80 },
    };
    let nag = pareto_frontier(&pareto_sweep(&q, Method::Nag, &grid, 0.2, 2.0).unwrap());
    for rho in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let (a, b) = (frontier_risk_at(&nag, rho), frontier_risk_at(&gd, rho));
        assert!(a.le(&b), "rho={rho}: nag {a} vs gd {b}");
    }
}

use momentum_risk::numeric::Quadrature;
use momentum_risk::risk_exact::{
    h_infinity_quadratic, mode_gain, rate_function, risk_index_integral, risk_index_riccati,
    risk_index_zero, tail_bound, theta_star, transfer_gain,
};
use momentum_risk::{resolve_preset, ExtReal, GmmParams, PresetId, QuadraticProblem};
use std::f64::consts::PI;

fn analytic_r(theta: f64) -> f64 {
    -(1.0 - theta / 2.0).ln() / theta
}

fn scalar_case() -> (QuadraticProblem, GmmParams) {
    (QuadraticProblem::diagonal(&[1.0]).unwrap(), GmmParams::gd(1.0).unwrap())
}

#[test]
fn gd_hinf_small_step() {
    let p = GmmParams::gd(1.0 / 3.0).unwrap();
    assert!((h_infinity_quadratic(&p, 1.0, 3.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    let p = GmmParams::gd(1.0).unwrap();
    assert!((h_infinity_quadratic(&p, 1.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
}

#[test]
fn hinf_matches_dense_frequency_oracle() {
    // Maxima of |G(e^{iω})| over 2·10⁶ frequencies, computed independently.
    let table: [(f64, PresetId, f64); 9] = [
        (3.0, PresetId::GdFastest, 1.224744871391589),
        (3.0, PresetId::Tmm, 1.005965271909232),
        (3.0, PresetId::Hb, 1.224744871391589),
        (3.0, PresetId::RsHb { a: None }, 12.12372435695806),
        (10.0, PresetId::Tmm, 1.190606764623116),
        (10.0, PresetId::RsHb { a: None }, 0.8276401361869882),
        (100.0, PresetId::Tmm, 1.343502884254447),
        (100.0, PresetId::Hb, 7.071067811865428),
        (100.0, PresetId::NagPop, 0.7071067811865549),
    ];
    for (l, id, expected) in table {
        let p = resolve_preset(id, 1.0, l).unwrap();
        let h = h_infinity_quadratic(&p, 1.0, l).unwrap();
        assert!((h - expected).abs() < 1e-9 * expected, "{id} L={l}: {h} vs {expected}");
    }
}

#[test]
fn hinf_floor_holds_for_all_presets() {
    for l in [3.0, 10.0, 100.0] {
        for id in PresetId::ALL {
            let p = resolve_preset(id, 1.0, l).unwrap();
            assert!(h_infinity_quadratic(&p, 1.0, l).unwrap() >= 0.5f64.sqrt() - 1e-12);
        }
    }
}

#[test]
fn transfer_gain_examples() {
    let p = GmmParams::gd(1.0 / 3.0).unwrap();
    for w in [0.0, 0.4, 2.0, PI] {
        assert!((transfer_gain(&p, 3.0, w).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }
    let p = GmmParams::gd(1.0).unwrap();
    assert!((transfer_gain(&p, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
    let p = resolve_preset(PresetId::Hb, 1.0, 3.0).unwrap();
    assert_eq!(transfer_gain(&p, 2.0, PI).unwrap(), transfer_gain(&p, 2.0, -PI).unwrap());
    // Unstable GD (α·λ = 2) has a pole at ω = π.
    let p = GmmParams::gd(2.0).unwrap();
    assert!(transfer_gain(&p, 1.0, PI).is_err());
}

#[test]
fn peak_of_transfer_gain_is_mode_gain() {
    for id in PresetId::ALL {
        let p = resolve_preset(id, 1.0, 10.0).unwrap();
        for lambda in [1.0, 4.0, 10.0] {
            let g = mode_gain(&p, lambda);
            let grid_max = (0..=20000)
                .map(|i| transfer_gain(&p, lambda, PI * i as f64 / 20000.0).unwrap())
                .fold(0.0, f64::max);
            assert!(grid_max <= g.gain * g.gain * (1.0 + 1e-12));
            assert!(grid_max >= g.gain * g.gain * (1.0 - 1e-6));
        }
    }
}

#[test]
fn scalar_gaussian_case_both_routes() {
    let (q, p) = scalar_case();
    let quad = Quadrature::default();
    for theta in [0.5, 1.0, 1.5] {
        let r = risk_index_riccati(&q, &p, theta, 1.0).unwrap().finite().unwrap();
        let i = risk_index_integral(&q, &p, theta, 1.0, &quad).unwrap().finite().unwrap();
        assert!((r - analytic_r(theta)).abs() < 1e-8);
        assert!((i - analytic_r(theta)).abs() < 1e-8);
    }
    let neg = risk_index_integral(&q, &p, -1.0, 1.0, &quad).unwrap().finite().unwrap();
    // −(1/θ)·ln(1 − θ/2) at θ = −1 is +ln(3/2): below the mean ½, as a
    // risk-seeking value should be.
    assert!((neg - 1.5f64.ln()).abs() < 1e-8);
    assert_eq!(risk_index_riccati(&q, &p, 2.0, 1.0).unwrap(), ExtReal::PosInf);
    assert_eq!(risk_index_integral(&q, &p, 2.0, 1.0, &quad).unwrap(), ExtReal::PosInf);
    assert!(risk_index_riccati(&q, &p, -1.0, 1.0).is_err());
}

#[test]
fn integral_matches_independent_quadrature() {
    // scipy adaptive quadrature of the log-integrand, Q = diag(1, 3), σ² = 2.
    let table: [(PresetId, f64, f64); 8] = [
        (PresetId::GdPop, 2.708112526576793e-01, 2.767180983982241e-01),
        (PresetId::GdFastest, 7.055288598104592e-01, 7.769918950160747e-01),
        (PresetId::RsGd, 4.329467757090435e-01, 4.480312101833701e-01),
        (PresetId::NagPop, 2.897228408743588e-01, 2.967397790279179e-01),
        (PresetId::NagFastest, 4.070330068223196e-01, 4.205255803912863e-01),
        (PresetId::NagBetaOpt { alpha: None }, 1.370509036968416e-01, 1.402_770_224_195_21e-1),
        (PresetId::Tmm, 5.986080067809566e-01, 6.363_354_351_675_71e-1),
        (PresetId::Hb, 8.194064677460897e-01, 9.118760300097735e-01),
    ];
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let quad = Quadrature::default();
    for (id, r03, r07) in table {
        let p = resolve_preset(id, 1.0, 3.0).unwrap();
        for (theta, expected) in [(0.3, r03), (0.7, r07)] {
            let ric = risk_index_riccati(&q, &p, theta, 2.0).unwrap().finite().unwrap();
            let int = risk_index_integral(&q, &p, theta, 2.0, &quad).unwrap().finite().unwrap();
            assert!((ric - expected).abs() < 1e-9, "{id} θ={theta}: riccati {ric} vs {expected}");
            assert!((int - ric).abs() < 1e-8, "{id} θ={theta}: integral {int} vs riccati {ric}");
        }
    }
    // RS-HB (a = √2) at κ = 3 has θ* ≈ 0.0136, so both values are infinite.
    let p = resolve_preset(PresetId::RsHb { a: None }, 1.0, 3.0).unwrap();
    assert_eq!(risk_index_riccati(&q, &p, 0.3, 2.0).unwrap(), ExtReal::PosInf);
}

#[test]
fn zero_theta_continuity() {
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let quad = Quadrature::default();
    for id in PresetId::ALL {
        let p = resolve_preset(id, 1.0, 3.0).unwrap();
        let r0 = risk_index_integral(&q, &p, 0.0, 2.0, &quad).unwrap().finite().unwrap();
        let lyap = risk_index_zero(&q, &p, 2.0).unwrap();
        assert!((r0 - lyap).abs() < 1e-8 * (1.0 + lyap), "{id}");
        let ts = theta_star(&q, &p).unwrap();
        let eps = 1e-7 * ts;
        let up = risk_index_integral(&q, &p, eps, 2.0, &quad).unwrap().finite().unwrap();
        let down = risk_index_integral(&q, &p, -eps, 2.0, &quad).unwrap().finite().unwrap();
        assert!((up - r0).abs() < 1e-6 * (1.0 + r0) && (down - r0).abs() < 1e-6 * (1.0 + r0));
    }
}

#[test]
fn finiteness_boundary_and_monotonicity() {
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let quad = Quadrature::default();
    for id in PresetId::ALL {
        let p = resolve_preset(id, 1.0, 3.0).unwrap();
        let ts = theta_star(&q, &p).unwrap();
        assert!(risk_index_integral(&q, &p, 0.99 * ts, 2.0, &quad).unwrap().is_finite());
        assert_eq!(risk_index_integral(&q, &p, 1.01 * ts, 2.0, &quad).unwrap(), ExtReal::PosInf);
        let vals: Vec<f64> = (0..=19)
            .map(|i| 0.05 * i as f64 * ts)
            .map(|t| risk_index_integral(&q, &p, t, 2.0, &quad).unwrap().finite().unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{id}: R not monotone");
        }
    }
}

#[test]
fn scalar_rate_function_matches_chi_square_rate() {
    // For σ²χ²₁/2 increments, I(s) = s − ½ − ½·ln(2s) in closed form.
    let (q, p) = scalar_case();
    let s_grid = [0.1, 0.3, 0.5, 1.0, 2.0, 4.0];
    let rf = rate_function(&q, &p, 1.0, &s_grid).unwrap();
    assert!((rf.argmin_s - 0.5).abs() < 1e-12);
    for (s, i) in s_grid.iter().zip(&rf.i_values) {
        let expected = s - 0.5 - 0.5 * (2.0 * s).ln();
        let got = i.finite().unwrap();
        assert!((got - expected).abs() < 1e-6, "s={s}: {got} vs {expected}");
        assert!(got >= 0.0);
    }
    // Brute-force sup over θ ∈ [−50, 2 − 10⁻⁶] at s = 2.
    let brute = (0..=200_000)
        .map(|k| -50.0 + (52.0 - 1e-6) * k as f64 / 200_000.0)
        .map(|t| if t == 0.0 { 0.0 } else { t / 2.0 * (2.0 - analytic_r(t)) })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((rf.i_values[4].finite().unwrap() - brute).abs() < 1e-6);
    let neg = rate_function(&q, &p, 1.0, &[0.0, -1.0]).unwrap();
    assert!(neg.i_values.iter().all(|v| *v == ExtReal::PosInf));
}

#[test]
fn tail_exponent_is_monotone() {
    let (q, p) = scalar_case();
    assert_eq!(tail_bound(&q, &p, 1.0, 0.3).unwrap(), 0.0);
    let mut last = 0.0;
    for t in [0.6, 1.0, 2.0, 3.0, 5.0] {
        let e = tail_bound(&q, &p, 1.0, t).unwrap();
        assert!((e - (t - 0.5 - 0.5 * (2.0 * t).ln())).abs() < 1e-6);
        assert!(e >= last);
        last = e;
    }
}

#[test]
fn unstable_parameters_are_rejected() {
    let q = QuadraticProblem::diagonal(&[1.0, 3.0]).unwrap();
    let p = GmmParams::gd(0.7).unwrap();
    assert!(risk_index_riccati(&q, &p, 0.1, 1.0).unwrap_err().is_validation());
    assert!(h_infinity_quadratic(&p, 1.0, 3.0).is_err());
}

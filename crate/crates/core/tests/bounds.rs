use proptest::prelude::*;
use quenchlab_core::bounds::*;
use quenchlab_core::ode::{integrate_scalar_ode, ScalarRhs, Stop};
use quenchlab_core::{Coefficients, Profile};

fn partial_fraction_t0(rate: f64, c: f64, p: f64, psi0: f64) -> f64 {
    // q = 2: H(η) = a η² - rate η - cQ with a = c/2
    let a = c / 2.0;
    let cq = c * young_constant(p, 2.0);
    let disc = (rate * rate + 4.0 * a * cq).sqrt();
    let r1 = (rate - disc) / (2.0 * a);
    let r2 = (rate + disc) / (2.0 * a);
    ((psi0 - r1) / (psi0 - r2)).ln() / (a * (r2 - r1))
}

#[test]
fn t0_matches_partial_fractions() {
    let h = HFunction {
        rate: 1.0,
        c: 2.0,
        q: 2.0,
        q_const: young_constant(3.0, 2.0),
    };
    let t0 = upper_bound_t0(&h, 2.0).unwrap();
    let oracle = partial_fraction_t0(1.0, 2.0, 3.0, 2.0);
    assert!((t0 - oracle).abs() < 1e-8, "{t0} vs {oracle}");
    assert!((oracle - 0.7302).abs() < 1e-3);
    for (rate, c, p, psi0) in [
        (3.0, 1.0, 4.0, 9.0),
        (104.0, 0.3, 3.0, 800.0),
        (0.5, 5.0, 2.5, 1.5),
    ] {
        let h = HFunction {
            rate,
            c,
            q: 2.0,
            q_const: young_constant(p, 2.0),
        };
        let t0 = upper_bound_t0(&h, psi0).unwrap();
        let oracle = partial_fraction_t0(rate, c, p, psi0);
        assert!(
            (t0 - oracle).abs() < 1e-8 * oracle.max(1.0),
            "{t0} vs {oracle}"
        );
    }
}

#[test]
fn h_flow_reaches_infinity_at_t0() {
    for (rate, c, q, p, psi0) in [
        (1.0, 2.0, 2.0, 3.0, 2.0),
        (2.0, 1.0, 1.5, 2.5, 40.0),
        (10.0, 3.0, 3.0, 4.0, 5.0),
    ] {
        let h = HFunction {
            rate,
            c,
            q,
            q_const: young_constant(p, q),
        };
        let t0 = upper_bound_t0(&h, psi0).unwrap();
        let out = integrate_scalar_ode(h.as_rhs(), psi0, Stop::at_time(10.0 * t0));
        let tb = out.blowup_time.unwrap();
        assert!((tb - t0).abs() < 1e-6, "{tb} vs {t0}");
    }
}

#[test]
fn t0_is_withheld_left_of_the_stationary_point() {
    // H(η) > 0 at Ψ₀ = 0 is impossible, but a Ψ₀ with H(Ψ₀) < 0 must be refused
    let h = HFunction {
        rate: 4.0,
        c: 2.0,
        q: 2.0,
        q_const: young_constant(3.0, 2.0),
    };
    let root = h.upper_root();
    assert!(h.eval(root).abs() < 1e-9);
    assert!(upper_bound_t0(&h, 0.99 * root).is_err());
    assert!(upper_bound_t0(&h, 1.01 * root).is_ok());
}

fn scenario(h1: f64, k1: f64) -> BoundInputs {
    BoundInputs {
        p: 3.0,
        q: 2.0,
        phi0: 5.0,
        psi0: 1.0,
        lambda1: 104.0,
        measure: std::f64::consts::PI,
        s2p: 0.11,
        s2q: 0.1,
        coefficients: Coefficients {
            delta: [Profile::Constant(1.0), Profile::Constant(0.5)],
            h: [Profile::Constant(h1), Profile::Constant(2.0)],
            k: [Profile::Constant(k1), Profile::Constant(1.0)],
        },
        horizon: 1.0,
        is_ball: true,
    }
}

#[test]
fn optimized_split_beats_a_theta_scan() {
    let inputs = scenario(50.0, 0.1);
    let eq = compute_bounds(&inputs, EpsilonMode::EqualSplit)
        .unwrap()
        .t_lower
        .unwrap();
    let opt = compute_bounds(&inputs, EpsilonMode::Optimized)
        .unwrap()
        .t_lower
        .unwrap();
    let best_scan = (1..100)
        .map(|i| {
            let k =
                envelope_constants(&inputs, EpsilonSplit::with_theta(i as f64 / 100.0).unwrap());
            lower_bound_t(k.lead, k.b, inputs.p, inputs.phi0).unwrap()
        })
        .fold(0.0, f64::max);
    assert!(opt >= eq);
    assert!(opt >= best_scan * (1.0 - 1e-9), "{opt} < {best_scan}");
}

#[test]
fn table_profiles_use_envelope_extremes() {
    let mut inputs = scenario(0.0, 1.0);
    inputs.coefficients.k[0] = Profile::table(vec![(0.0, 1.0), (0.5, 3.0), (2.0, 0.5)]).unwrap();
    inputs.coefficients.h[1] = Profile::Constant(0.0);
    let k = envelope_constants(&inputs, EpsilonSplit::equal());
    // ε₁ = k₁/(2δ₁), so sup k₁ε₁ = sup k₁²/2 = 9/2 at t = 0.5
    assert!((k.a2 - 4.5 * 0.11f64.powi(6)).abs() < 1e-15);
    // inf k₁ over [0, 1] sits at t = 0 (value 1) versus t = 1 (value 8/3)
    assert!((k.c1 - std::f64::consts::PI.powf(-1.0)).abs() < 1e-15);
}

#[test]
fn equal_exponents_use_the_joint_constant() {
    let mut inputs = scenario(1.0, 1.0);
    inputs.p = 2.0;
    let k = envelope_constants(&inputs, EpsilonSplit::equal());
    let at = k.atilde.unwrap();
    assert_eq!(k.lead, at);
    assert_eq!(k.q_const, 0.0);
    assert!(at <= 2.0 * k.a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn majorant_ode_blows_up_at_t(a in 1e-2f64..10.0, b in 1e-2f64..10.0, p in 1.01f64..5.0, phi0 in 1e-2f64..1e2) {
        let t = lower_bound_t(2.0 * a, b, p, phi0).unwrap();
        let out = integrate_scalar_ode(ScalarRhs::Majorant { a: 2.0 * a, b, p }, phi0, Stop::at_time(10.0 * t));
        let tb = out.blowup_time.unwrap();
        prop_assert!((tb - t).abs() <= 1e-6 * t, "{} vs {}", tb, t);
    }

    #[test]
    fn minorant_ode_blows_up_at_tbar(rate in 1e-2f64..10.0, cbar in 1e-2f64..10.0, p in 1.01f64..5.0, excess in 1e-3f64..10.0) {
        let psi0 = corollary_threshold(rate, cbar, p) * (1.0 + excess);
        let t = upper_bound_tbar(rate, cbar, p, psi0).unwrap();
        let out = integrate_scalar_ode(ScalarRhs::Minorant { rate, cbar, p }, psi0, Stop::at_time(10.0 * t));
        let tb = out.blowup_time.unwrap();
        prop_assert!((tb - t).abs() <= 1e-6 * t, "{} vs {}", tb, t);
        let z = corollary_majorant_zero(rate, cbar, p, psi0).unwrap();
        prop_assert!((z - t).abs() <= 1e-9 * t);
    }

    #[test]
    fn remark_bound_is_weaker(lead in 1e-3f64..10.0, b in 0.0f64..10.0, p in 1.01f64..5.0, phi0 in 1e-2f64..1e2) {
        let t = lower_bound_t(lead, b, p, phi0).unwrap();
        let tt = lower_bound_t_tilde(lead, b, p, phi0).unwrap();
        prop_assert!(tt <= t * (1.0 + 1e-14));
        prop_assert!(lower_bound_t(lead, b, p, 2.0 * phi0).unwrap() < t);
    }

    #[test]
    fn upper_bounds_decrease_in_data(rate in 0.1f64..10.0, c in 0.1f64..10.0, p in 2.0f64..5.0, factor in 1.01f64..4.0) {
        let h = HFunction { rate, c, q: 2.0, q_const: young_constant(p, 2.0) };
        let psi0 = h.upper_root() * factor;
        prop_assert!(upper_bound_t0(&h, 2.0 * psi0).unwrap() < upper_bound_t0(&h, psi0).unwrap());
        let cbar = 0.5 * c;
        let th = corollary_threshold(rate, cbar, 2.0) * factor;
        prop_assert!(upper_bound_tbar(rate, cbar, 2.0, 2.0 * th).unwrap() < upper_bound_tbar(rate, cbar, 2.0, th).unwrap());
    }

    #[test]
    fn young_step(psi in 1e-6f64..1e3, q in 1.01f64..4.0, gap in 1e-3f64..3.0) {
        let p = q + gap;
        let lhs = psi.powf(p);
        let rhs = psi.powf(q) - young_constant(p, q);
        prop_assert!(lhs >= rhs - 1e-10 * lhs.max(1.0));
    }

    #[test]
    fn arithmetic_step(x in 0.0f64..1e3, y in 0.0f64..1e3, q in 1.0f64..6.0) {
        let lhs = x.powf(q) + y.powf(q);
        let rhs = 2f64.powf(1.0 - q) * (x + y).powf(q);
        prop_assert!(lhs >= rhs - 1e-10 * lhs.max(1.0));
    }

    #[test]
    fn vanishing_identity(d in 0.1f64..5.0, h in 0.0f64..5.0, k in 0.1f64..5.0, theta in 0.01f64..0.99) {
        let c = Coefficients::constant(d, h, k);
        let split = EpsilonSplit::with_theta(theta).unwrap();
        let r = split.vanishing_residuals(&c, 0.0);
        prop_assert!(r[0].abs() < 1e-12 * d && r[1].abs() < 1e-12 * d);
    }
}

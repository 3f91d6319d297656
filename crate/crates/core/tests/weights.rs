use glc_core::grid::*;
use glc_core::weights::*;
use proptest::prelude::*;

fn omega0() -> Interval {
    Interval::new(0.4, 0.6).unwrap()
}

fn params(tau: f64, lambda: f64) -> WeightParams {
    let (s, _) = build_meshes(7, 4, 1.0).unwrap();
    let psi = build_psi(s, omega0(), 0.05).unwrap();
    WeightParams {
        lambda,
        tau,
        delta: 0.25,
        k: WeightParams::k_from_margin(&psi, 0.1),
        c0: 0.05,
        epsilon0: 0.5,
        tau0: 1.0,
    }
}

#[test]
fn audit_ratios_do_not_grow_under_refinement() {
    let family = [(31, 256), (63, 1024), (127, 4096)];
    for (tau, lambda) in [(2.0, 1.0), (2.0, 2.0), (5.0, 2.0)] {
        let rows = audit_weight_lemmas(params(tau, lambda), omega0(), &family, 1.0).unwrap();
        assert_eq!(rows.len(), family.len() * WeightLemma::ALL.len());
        for lemma in WeightLemma::ALL {
            let r: Vec<f64> = rows
                .iter()
                .filter(|r| r.lemma == lemma)
                .map(|r| r.ratio)
                .collect();
            assert!(
                r.iter().all(|x| x.is_finite() && *x >= 0.0),
                "{}",
                lemma.name()
            );
            if lemma == WeightLemma::Identity {
                // r ρ = 1 exactly; only rounding is left.
                assert!(r.iter().all(|&x| x < 1e-10), "{r:?}");
                continue;
            }
            assert!(
                r[2] <= 2.0 * r[0],
                "tau={tau} lambda={lambda} {}: {r:?}",
                lemma.name()
            );
        }
    }
}

#[test]
fn audit_rows_carry_mesh_data() {
    let rows =
        audit_weight_lemmas(params(2.0, 1.0), omega0(), &[(15, 64), (31, 256)], 1.0).unwrap();
    assert!(rows
        .iter()
        .any(|r| r.dx == 1.0 / 16.0 && r.dt == 1.0 / 64.0));
    assert!(rows
        .iter()
        .any(|r| r.dx == 1.0 / 32.0 && r.dt == 1.0 / 256.0));
    assert!(rows.iter().all(|r| r.tau == 2.0 && r.lambda == 1.0));
}

#[test]
fn audit_refuses_out_of_lemma_regime() {
    // τΔx/(δT²) = 5 · 0.25 / 0.25 > 1
    assert!(audit_weight_lemmas(params(5.0, 1.0), omega0(), &[(3, 512)], 1.0).is_err());
}

#[test]
fn difference_quotients_approach_closed_forms() {
    // Errors against the closed forms shrink like Δx² on a fixed node.
    let p = params(2.0, 2.0);
    let mut errs = Vec::new();
    for m in [31, 63, 127] {
        let (s, t) = build_meshes(m, 64, 1.0).unwrap();
        let psi = build_psi(s, omega0(), 0.05).unwrap();
        let w = build_weights(p, &psi, t).unwrap();
        let xp = (m + 1) / 2; // x = 1/4, on every level
        let tp = 65;
        let e1 = (w.r_dx_rho(xp, tp) - w.r_dx_rho_exact(xp, tp)).abs();
        let e2 = (w.r_dxx_rho(2 * xp, tp) - w.r_dxx_rho_exact(2 * xp, tp)).abs();
        errs.push((e1, e2));
    }
    for k in 0..2 {
        let r1 = errs[k].0 / errs[k + 1].0;
        let r2 = errs[k].1 / errs[k + 1].1;
        assert!((r1 - 4.0).abs() < 0.5, "{errs:?}");
        assert!((r2 - 4.0).abs() < 0.5, "{errs:?}");
    }
}

#[test]
fn regime_report_matches_hand_computation() {
    let p = params(2.0, 2.0);
    let (s, t) = build_meshes(15, 8192, 1.0).unwrap();
    let r = validate_regime(&p, s, t);
    assert!((r.space_small.value - 2.0 / 16.0 / 0.25).abs() < 1e-15);
    assert!((r.time_small.value - 16.0 / 8192.0 / 0.25f64.powi(4)).abs() < 1e-12);
    assert!(r.carleman_ok());
    let (s, t) = build_meshes(15, 256, 1.0).unwrap();
    let r = validate_regime(&p, s, t);
    assert!(!r.carleman_ok());
    assert_eq!(r.failures(), vec!["tau^4 dt / (delta^4 T^6) <= epsilon0"]);
}

#[test]
fn build_weights_rejects_bad_settings() {
    let (s, t) = build_meshes(7, 16, 1.0).unwrap();
    let psi = build_psi(s, omega0(), 0.05).unwrap();
    let mut p = params(2.0, 1.0);
    p.delta = 0.7;
    let msg = build_weights(p, &psi, t).unwrap_err().to_string();
    assert!(msg.contains("delta must lie in (0, 1/2]"), "{msg}");
    let mut p = params(2.0, 1.0);
    p.k = psi.max();
    assert!(matches!(
        build_weights(p, &psi, t),
        Err(WeightError::KTooSmall { .. })
    ));
    let mut p = params(2.0, 1.0);
    p.delta = 0.01;
    let (_, coarse) = build_meshes(7, 2, 1.0).unwrap();
    assert!(matches!(
        build_weights(p, &psi, coarse),
        Err(WeightError::ThetaPole { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_matches_product_form(t in 0.0f64..1.0, tf in 0.2f64..4.0, delta in 0.01f64..0.5) {
        let t = t * tf;
        let direct = 1.0 / ((t + delta * tf) * (tf + delta * tf - t));
        let got = theta(t, tf, delta);
        prop_assert!((got - direct).abs() <= 1e-13 * direct);
        prop_assert!((theta(tf - t, tf, delta) - got).abs() <= 1e-14 * got);
    }

    #[test]
    fn theta_prime_matches_central_difference(t in 0.05f64..0.95, delta in 0.05f64..0.5) {
        let h = 1e-5;
        let fd = (theta(t + h, 1.0, delta) - theta(t - h, 1.0, delta)) / (2.0 * h);
        let exact = theta_prime(t, 1.0, delta);
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
    }

    #[test]
    fn weights_are_reciprocal_and_signed(m in 2usize..40, n in 4usize..64, tau in 1.0f64..6.0, lambda in 1.0f64..3.0) {
        let (s, t) = build_meshes(m, n, 1.0).unwrap();
        let psi = build_psi(s, omega0(), 0.05).unwrap();
        let p = WeightParams { lambda, tau, ..params(tau, lambda) };
        let w = build_weights(p, &psi, t).unwrap();
        for xp in 0..=s.last_position() {
            prop_assert!(w.phi(xp) > 0.0);
            prop_assert!(w.varphi(xp) < 0.0);
            for tp in [0, n, 2 * n + 1] {
                prop_assert!(w.s(tp) > 0.0);
                let prod = w.r(xp, tp) * w.rho(xp, tp);
                prop_assert!((prod - 1.0).abs() < 1e-12);
                prop_assert!(w.r(xp, tp) <= 1.0);
            }
        }
    }

    #[test]
    fn psi_gradient_bound_outside_window(m in 4usize..80) {
        let (s, _) = build_meshes(m, 2, 1.0).unwrap();
        let psi = build_psi(s, omega0(), 0.05).unwrap();
        for pos in 0..=s.last_position() {
            let x = s.coord(pos);
            prop_assert!(psi.psi(pos) > 0.0);
            if !omega0().closure_contains(x) {
                prop_assert!(psi.psi_x(pos).abs() >= 0.05);
            }
        }
        prop_assert!(psi.psi_x(0) > 0.0);
        prop_assert!(psi.psi_x(s.last_position()) < 0.0);
    }
}

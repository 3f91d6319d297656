use glc_core::grid::*;
use glc_core::{seeded_rng, Complex64};
use proptest::prelude::*;

const TOL: f64 = 1e-13;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn identities_hold_for_many_random_fields() {
    for m in [4, 17, 64] {
        for n in [5, 32] {
            let (smesh, tmesh) = build_meshes(m, n, 1.3).unwrap();
            let mut rng = seeded_rng(1000 + (m * 100 + n) as u64);
            let mut worst = (0.0, "");
            for _ in 0..100 {
                for r in check_identities_with(smesh, tmesh, &mut rng).unwrap() {
                    if r.relative() > worst.0 {
                        worst = (r.relative(), r.name);
                    }
                }
            }
            assert!(
                worst.0 <= TOL,
                "M={m} N={n}: {} at {:.3e}",
                worst.1,
                worst.0
            );
        }
    }
}

#[test]
fn every_identity_is_reported() {
    let names: Vec<_> = check_identities(6, 5, 1.0, 3)
        .unwrap()
        .into_iter()
        .map(|r| r.name)
        .collect();
    for want in [
        "dx_product_primal",
        "dx_product_dual",
        "ax_product_primal",
        "ax_product_dual",
        "ax_squared",
        "dx_summation_by_parts",
        "ax_summation_by_parts",
        "dt_product_lagged",
        "dt_product_led",
        "dt_modulus_lagged",
        "dt_modulus_led",
        "time_shift_pairing",
        "dt_summation_by_parts",
    ] {
        assert!(names.contains(&want), "missing {want}");
    }
}

#[test]
fn perturbed_product_is_detected() {
    // The checker must see a wrong identity: replace A_x(uv) by A_x u A_x v.
    let (smesh, _) = build_meshes(9, 4, 1.0).unwrap();
    let mut rng = seeded_rng(5);
    let u = GridFn::random_static(smesh, SpaceSet::Closure, &mut rng);
    let v = GridFn::random_static(smesh, SpaceSet::Closure, &mut rng);
    let lhs = u.mul(&v).unwrap().avg_x().unwrap();
    let rhs = u.avg_x().unwrap().mul(&v.avg_x().unwrap()).unwrap();
    assert!(lhs.sub(&rhs).unwrap().max_abs() > 1e-6);
}

// Raw-array oracle, independent of the GridFn index bookkeeping.

fn raw_diff(u: &[Complex64], h: f64) -> Vec<Complex64> {
    u.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

fn raw_avg(u: &[Complex64]) -> Vec<Complex64> {
    u.windows(2).map(|w| (w[1] + w[0]) * 0.5).collect()
}

#[test]
fn operators_match_raw_stencils() {
    let (smesh, _) = build_meshes(13, 4, 1.0).unwrap();
    let h = smesh.dx();
    let mut rng = seeded_rng(17);
    let u = GridFn::random_static(smesh, SpaceSet::Closure, &mut rng);
    let du = u.diff_x().unwrap();
    let au = u.avg_x().unwrap();
    assert_eq!(du.space_set(), SpaceSet::Dual);
    let (rd, ra) = (raw_diff(u.values(), h), raw_avg(u.values()));
    for i in 0..rd.len() {
        assert!((du.values()[i] - rd[i]).norm() <= 1e-15 * rd[i].norm().max(1.0) * 16.0);
        assert!((au.values()[i] - ra[i]).norm() <= 1e-15 * ra[i].norm().max(1.0) * 4.0);
    }
    let ddu = du.diff_x().unwrap();
    assert_eq!(ddu.space_set(), SpaceSet::Interior);
    let rdd = raw_diff(&rd, h);
    for i in 0..rdd.len() {
        assert!((ddu.values()[i] - rdd[i]).norm() <= 1e-13 * rdd[i].norm().max(1.0));
    }
}

#[test]
fn summation_by_parts_by_direct_summation() {
    // Σ_ℳ Δx u D_x w = −Σ_ℳ* Δx w D_x u + u_{M+1} w_{M+1/2} − u_0 w_{1/2}
    let m = 21;
    let (smesh, _) = build_meshes(m, 4, 1.0).unwrap();
    let h = smesh.dx();
    let mut rng = seeded_rng(23);
    let u: Vec<Complex64> = (0..m + 2).map(|_| complex_gaussian(&mut rng)).collect();
    let w: Vec<Complex64> = (0..m + 1).map(|_| complex_gaussian(&mut rng)).collect();
    let mut lhs = c(0.0, 0.0);
    for j in 1..=m {
        lhs += u[j] * (w[j] - w[j - 1]) / h * h;
    }
    let mut rhs = c(0.0, 0.0);
    for i in 0..=m {
        rhs -= w[i] * (u[i + 1] - u[i]) / h * h;
    }
    rhs += u[m + 1] * w[m] - u[0] * w[0];
    assert!((lhs - rhs).norm() < 1e-12);

    // Same quantity through the library.
    let uf = GridFn::from_values_static(smesh, SpaceSet::Closure, u.clone()).unwrap();
    let wf = GridFn::from_values_static(smesh, SpaceSet::Dual, w.clone()).unwrap();
    let lib = uf
        .restrict(SpaceSet::Interior, None)
        .unwrap()
        .mul(&wf.diff_x().unwrap())
        .unwrap()
        .integral();
    assert!((lib - lhs).norm() < 1e-12);
}

#[test]
fn integrals_by_direct_summation() {
    let (smesh, tmesh) = build_meshes(7, 6, 2.0).unwrap();
    let mut rng = seeded_rng(29);
    let f = GridFn::random(smesh, tmesh, SpaceSet::Interior, TimeSet::Dual, &mut rng);
    let mut acc = c(0.0, 0.0);
    for k in 0..f.time_len() {
        for z in f.slice(k) {
            acc += z * smesh.dx() * tmesh.dt();
        }
    }
    assert!((f.integral() - acc).norm() < 1e-13);
    let b = GridFn::random(smesh, tmesh, SpaceSet::Boundary, TimeSet::Dual, &mut rng);
    let acc: Complex64 = b.values().iter().map(|z| z * tmesh.dt()).sum();
    assert!((b.integral() - acc).norm() < 1e-13);
    let u: Vec<Complex64> = (0..9).map(|_| complex_gaussian(&mut rng)).collect();
    let uf = GridFn::from_values_static(smesh, SpaceSet::Closure, u.clone()).unwrap();
    assert!((uf.closure_norm_sq().unwrap() - closure_norm_sq(smesh.dx(), &u)).abs() < 1e-13);
}

#[test]
fn time_difference_of_linear_and_quadratic() {
    let (smesh, tmesh) = build_meshes(3, 8, 1.0).unwrap();
    let f = GridFn::from_fn(
        smesh,
        tmesh,
        SpaceSet::Closure,
        TimeSet::PrimalClosure,
        |_, t| c(3.0 * t, -t),
    );
    let d = f.diff_t().unwrap();
    for z in d.values() {
        assert!((z - c(3.0, -1.0)).norm() < 1e-12);
    }
    // D_t t² = 2 t at dual times, exactly.
    let g = GridFn::from_fn(
        smesh,
        tmesh,
        SpaceSet::Closure,
        TimeSet::PrimalClosure,
        |_, t| c(t * t, 0.0),
    );
    let dg = g.diff_t().unwrap();
    for k in 0..dg.time_len() {
        let t = dg.t_of(k);
        for z in dg.slice(k) {
            assert!((z.re - 2.0 * t).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identities_on_arbitrary_meshes(m in 2usize..40, n in 2usize..24, t in 0.1f64..3.0, seed in any::<u64>()) {
        for r in check_identities(m, n, t, seed).unwrap() {
            prop_assert!(r.relative() <= TOL, "{} {:.3e}", r.name, r.relative());
        }
    }

    #[test]
    fn shift_round_trip(m in 2usize..30, seed in any::<u64>()) {
        let (smesh, _) = build_meshes(m, 2, 1.0).unwrap();
        let mut rng = seeded_rng(seed);
        let u = GridFn::random_static(smesh, SpaceSet::Closure, &mut rng);
        let back = u.shift_x(Shift::Plus).unwrap().shift_x(Shift::Minus).unwrap();
        prop_assert_eq!(back.space_set(), SpaceSet::Interior);
        let inner = u.restrict(SpaceSet::Interior, None).unwrap();
        prop_assert_eq!(back.values(), inner.values());
    }

    #[test]
    fn operators_are_linear(m in 2usize..30, n in 2usize..12, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (smesh, tmesh) = build_meshes(m, n, 1.0).unwrap();
        let mut rng = seeded_rng(seed);
        let u = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::PrimalClosure, &mut rng);
        let v = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::PrimalClosure, &mut rng);
        let k = c(a, b);
        let comb = u.scale(k).add(&v).unwrap();
        let lhs = comb.diff_x().unwrap().diff_t().unwrap();
        let rhs = u.diff_x().unwrap().diff_t().unwrap().scale(k).add(&v.diff_x().unwrap().diff_t().unwrap()).unwrap();
        let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-13 * scale);
    }

    #[test]
    fn closure_inner_is_hermitian(m in 1usize..50, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let a: Vec<Complex64> = (0..m + 2).map(|_| complex_gaussian(&mut rng)).collect();
        let b: Vec<Complex64> = (0..m + 2).map(|_| complex_gaussian(&mut rng)).collect();
        let dx = 1.0 / (m as f64 + 1.0);
        let ab = closure_inner(dx, &a, &b);
        let ba = closure_inner(dx, &b, &a);
        prop_assert!((ab - ba.conj()).norm() <= 1e-14 * (1.0 + ab.norm()));
        prop_assert!(closure_norm_sq(dx, &a) >= 0.0);
    }
}

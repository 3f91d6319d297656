//! Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use glc_core::carleman::conjugation_residual;
use glc_core::control::{gramian_apply_with, hum_solve_with};
use glc_core::dynamics::{
    assemble_step_matrix, forward_solve, manufactured_exact, manufactured_source, random_closure,
    AdjointTrajectory, ControlField, Direction, Solver, SystemParams,
};
use glc_core::grid::{
    build_meshes, closure_inner, closure_norm_sq, GridFn, Interval, SpaceSet, TimeSet,
};
use glc_core::weights::{build_psi, build_weights, WeightParams};
use glc_core::{seeded_rng, Complex64};
use glc_lab::{load, run, RunReport, Subcommand};

const IDENTITY_TOL: f64 = 1e-13;
const CONJUGATION_TOL: f64 = 1e-11;
const RESIDUAL_TOL: f64 = 1e-12;
const RECURRENCE_TOL: f64 = 1e-13;
const ORDER_TOL: f64 = 0.2;
const DUALITY_TOL: f64 = 1e-12;
const TRANSPOSE_TOL: f64 = 1e-14;
const ENERGY_TOL: f64 = 1e-12;
const CARLEMAN_SPREAD: f64 = 2.0;
const HOMOGENEITY_TOL: f64 = 1e-12;
const GRAMIAN_TOL: f64 = 1e-12;
const CG_ORACLE_TOL: f64 = 1e-10;
const CERTIFICATE_TOL: f64 = 1e-10;
const TERMINAL_SPREAD: f64 = 4.0;
const CONTROL_SPREAD: f64 = 2.0;
const SUITE_BUDGET: Duration = Duration::from_secs(300);

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn system(c: f64, gamma: f64, t_final: f64) -> SystemParams {
    SystemParams {
        alpha: 1.0,
        beta: 0.8,
        c,
        gamma,
        t_final,
        omega: Interval::new(0.3, 0.7).unwrap(),
        omega0: Interval::new(0.4, 0.6).unwrap(),
    }
}

fn run_pipeline(sub: Subcommand, sets: &[&str]) -> Result<(RunReport, tempfile::TempDir), String> {
    let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    let cfg = load(None, &sets).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run(sub, &cfg, dir.path()).map_err(|e| e.to_string())?;
    Ok((report, dir))
}

/// Largest `value` among checks whose name starts with `prefix`.
fn check_max(r: &RunReport, prefix: &str) -> Result<f64, String> {
    let v: Vec<f64> = r
        .sections
        .iter()
        .flat_map(|s| &s.checks)
        .filter(|c| c.name.starts_with(prefix))
        .map(|c| c.value)
        .collect();
    ensure(!v.is_empty(), || format!("no check named {prefix}*"))?;
    Ok(v.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn check_min(r: &RunReport, prefix: &str) -> Result<f64, String> {
    let v: Vec<f64> = r
        .sections
        .iter()
        .flat_map(|s| &s.checks)
        .filter(|c| c.name.starts_with(prefix))
        .map(|c| c.value)
        .collect();
    ensure(!v.is_empty(), || format!("no check named {prefix}*"))?;
    Ok(v.into_iter().fold(f64::INFINITY, f64::min))
}

fn no_errors(r: &RunReport) -> Result<(), String> {
    for s in &r.sections {
        if let Some(e) = &s.error {
            return Err(e.clone());
        }
    }
    Ok(())
}

fn criterion_1() -> Outcome {
    let (r, _d) = run_pipeline(Subcommand::Identities, &["T=1", "identity_samples=100"])?;
    no_errors(&r)?;
    let worst = check_max(&r, "identities_")?;
    let meshes = r.sections[0].checks.len();
    ensure(meshes == 6, || format!("{meshes} meshes"))?;
    ensure(worst <= IDENTITY_TOL, || {
        format!("worst relative residual {worst:.3e} > {IDENTITY_TOL:.0e}")
    })?;
    Ok(format!(
        "100 samples at M in {{4,17,64}} x N in {{5,32}}, worst {worst:.2e} <= {IDENTITY_TOL:.0e}"
    ))
}

fn criterion_2() -> Outcome {
    let sys = system(0.5, -2.0, 1.0);
    let mut worst = 0.0f64;
    for (m, n) in [(5, 4), (31, 32)] {
        let (s, t) = build_meshes(m, n, 1.0).unwrap();
        let psi = build_psi(s, sys.omega0, 0.05).unwrap();
        for tau in [1.0, 5.0] {
            for lambda in [1.0, 2.0] {
                let p = WeightParams {
                    lambda,
                    tau,
                    delta: 0.25,
                    k: WeightParams::k_from_margin(&psi, 0.1),
                    c0: 0.05,
                    epsilon0: 0.5,
                    tau0: 1.0,
                };
                let w = build_weights(p, &psi, t).unwrap();
                let mut rng = seeded_rng(2000 + m as u64);
                for _ in 0..50 {
                    let q = AdjointTrajectory {
                        q: GridFn::random(s, t, SpaceSet::Closure, TimeSet::DualClosure, &mut rng),
                    };
                    worst = worst.max(conjugation_residual(&q, &w, &sys).unwrap().relative());
                }
            }
        }
    }
    ensure(worst <= CONJUGATION_TOL, || {
        format!("worst {worst:.3e} > {CONJUGATION_TOL:.0e}")
    })?;
    Ok(format!(
        "50 fields x 8 settings, worst {worst:.2e} <= {CONJUGATION_TOL:.0e}"
    ))
}

fn manufactured_terminal(sys: &SystemParams, m: usize, n: usize) -> Result<Vec<Complex64>, String> {
    let (s, t) = build_meshes(m, n, 1.0).unwrap();
    let g: Vec<Complex64> = (0..m + 2)
        .map(|j| manufactured_exact(s.x(j), 0.0))
        .collect();
    let f = manufactured_source(sys, s, t);
    let solver = Solver::new(sys, s, t).unwrap();
    let tr = solver.forward_with_source(&g, None, Some(&f)).unwrap();
    let r = solver.forward_residual(&tr, None, Some(&f)).unwrap();
    ensure(r.relative() <= RESIDUAL_TOL, || {
        format!("manufactured residual {:.3e}", r.relative())
    })?;
    Ok(tr.terminal().to_vec())
}

fn coarse_diff(coarse: &[Complex64], fine: &[Complex64]) -> f64 {
    let stride = (fine.len() - 1) / (coarse.len() - 1);
    (0..coarse.len())
        .map(|j| (coarse[j] - fine[j * stride]).norm())
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for (c, gamma) in [(0.0, 1.0), (0.5, -2.0), (-0.5, 3.0)] {
        let sys = system(c, gamma, 0.25);
        for (m, n) in [(5, 4), (31, 32), (63, 64)] {
            let (s, t) = build_meshes(m, n, sys.t_final).unwrap();
            let solver = Solver::new(&sys, s, t).unwrap();
            let mut rng = seeded_rng(3000 + (m * 7 + n) as u64);
            for _ in 0..5 {
                let g = random_closure(s, &mut rng);
                let v = ControlField::random(&sys.omega, &s, &t, &mut rng);
                let y = solver.forward(&g, &v).unwrap();
                worst = worst.max(
                    solver
                        .forward_residual(&y, Some(&v), None)
                        .unwrap()
                        .relative(),
                );
                let q_t = random_closure(s, &mut rng);
                let q = solver.adjoint(&q_t).unwrap();
                worst = worst.max(solver.adjoint_residual(&q, &q_t).unwrap().relative());
            }
        }
    }
    ensure(worst <= RESIDUAL_TOL, || {
        format!("scheme residual {worst:.3e}")
    })?;

    let mut rec = 0.0f64;
    for (c, gamma) in [(0.0, 1.0), (0.5, -2.0), (-0.5, 3.0)] {
        let sys = system(c, gamma, 1.0);
        let (s, t) = build_meshes(9, 20, 1.0).unwrap();
        let g = vec![Complex64::new(1.5, -0.5); 11];
        let y = forward_solve(&sys, s, t, &g, &ControlField::zeros(&sys.omega, &s, &t)).unwrap();
        let factor = Complex64::new(1.0, 0.0) / (1.0 + t.dt() * Complex64::new(c, gamma));
        let mut want = g[0];
        for k in 1..=t.n() {
            want *= factor;
            for z in y.y.slice(k) {
                rec = rec.max((z - want).norm() / want.norm());
            }
        }
    }
    ensure(rec <= RECURRENCE_TOL, || {
        format!("scalar recurrence {rec:.3e}")
    })?;

    let sys = system(0.5, -1.0, 1.0);
    let lv = [16usize, 32, 64]
        .iter()
        .map(|&p| manufactured_terminal(&sys, p - 1, 1 << 14))
        .collect::<Result<Vec<_>, _>>()?;
    let p_x = (coarse_diff(&lv[0], &lv[1]) / coarse_diff(&lv[1], &lv[2])).log2();
    let lv = [32usize, 64, 128]
        .iter()
        .map(|&n| manufactured_terminal(&sys, 127, n))
        .collect::<Result<Vec<_>, _>>()?;
    let p_t = (coarse_diff(&lv[0], &lv[1]) / coarse_diff(&lv[1], &lv[2])).log2();
    ensure(
        (p_x - 1.0).abs() <= ORDER_TOL && (p_t - 1.0).abs() <= ORDER_TOL,
        || format!("orders space {p_x:.3}, time {p_t:.3}"),
    )?;
    Ok(format!(
        "residual {worst:.2e} <= {RESIDUAL_TOL:.0e}, recurrence {rec:.2e} <= {RECURRENCE_TOL:.0e}, orders space {p_x:.3} time {p_t:.3} (1 +- {ORDER_TOL})"
    ))
}

fn criterion_4() -> Outcome {
    let sys = system(0.5, -1.0, 1.0);
    let mut worst = 0.0f64;
    for (m, n) in [(5, 4), (31, 32), (63, 64)] {
        let (s, t) = build_meshes(m, n, 1.0).unwrap();
        let solver = Solver::new(&sys, s, t).unwrap();
        let mut rng = seeded_rng(4000 + m as u64);
        for _ in 0..50 {
            let g = random_closure(s, &mut rng);
            let v = ControlField::random(&sys.omega, &s, &t, &mut rng);
            let q_t = random_closure(s, &mut rng);
            worst = worst.max(solver.duality_defect(&g, &v, &q_t).unwrap().relative());
        }
    }
    ensure(worst <= DUALITY_TOL, || {
        format!("duality defect {worst:.3e}")
    })?;

    // Adjoint step matrix against W^-1 A^H W, entry by entry, at M = 5.
    let (s, t) = build_meshes(5, 4, 1.0).unwrap();
    let fwd = assemble_step_matrix(&sys, s, t.dt(), Direction::Forward).to_dense();
    let adj = assemble_step_matrix(&sys, s, t.dt(), Direction::Adjoint).to_dense();
    let w = |i: usize| if i == 0 || i == 6 { 1.0 } else { s.dx() };
    let mut dense = 0.0f64;
    let scale = fwd.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..7 {
        for j in 0..7 {
            let want = fwd[j][i].conj() * w(j) / w(i);
            dense = dense.max((adj[i][j] - want).norm() / scale);
        }
    }
    ensure(dense <= TRANSPOSE_TOL, || {
        format!("dense transpose mismatch {dense:.3e}")
    })?;
    Ok(format!("50 triples x 3 meshes, defect {worst:.2e} <= {DUALITY_TOL:.0e}; dense oracle {dense:.2e} <= {TRANSPOSE_TOL:.0e}"))
}

fn criterion_5() -> Outcome {
    let mut worst = f64::INFINITY;
    for (c, gamma) in [("0", "1"), ("0.5", "-2"), ("-0.5", "3")] {
        let (r, _d) = run_pipeline(
            Subcommand::Energy,
            &[
                &format!("c={c}"),
                &format!("gamma={gamma}"),
                "energy_samples=100",
            ],
        )?;
        no_errors(&r)?;
        worst = worst.min(check_min(&r, "energy_")?);
    }
    ensure(worst >= -ENERGY_TOL, || format!("worst margin {worst:.3e}"))?;
    Ok(format!(
        "100 q_T x 3 (c, gamma), worst margin {worst:.2e} >= -{ENERGY_TOL:.0e}"
    ))
}

fn criterion_6() -> Outcome {
    let (r, _d) = run_pipeline(Subcommand::CarlemanAudit, &["lambda=2", "delta=0.25"])?;
    no_errors(&r)?;
    let sec = &r.sections[0];
    let in_regime = sec
        .checks
        .iter()
        .filter(|c| c.name.starts_with("carleman_in_regime"))
        .all(|c| c.pass);
    ensure(in_regime, || "a level fell outside the regime".into())?;
    let nonneg = check_min(&r, "carleman_terms_nonnegative")?;
    ensure(nonneg == 1.0, || "negative or non-finite term".into())?;
    let f = check_max(&r, "carleman_stability")?;
    let h = check_max(&r, "carleman_homogeneity")?;
    ensure(f < CARLEMAN_SPREAD, || {
        format!("max-ratio spread {f:.3} >= {CARLEMAN_SPREAD}")
    })?;
    ensure(h <= HOMOGENEITY_TOL, || format!("homogeneity {h:.3e}"))?;
    let maxes: Vec<String> = sec.results["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| format!("M={} {:.4}", c["m"], c["max_ratio"].as_f64().unwrap()))
        .collect();
    Ok(format!(
        "max ratio [{}], spread {f:.4} < {CARLEMAN_SPREAD}, homogeneity {h:.2e} <= {HOMOGENEITY_TOL:.0e}",
        maxes.join(", ")
    ))
}

/// Gaussian elimination with partial pivoting, used only as an oracle.
fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let akj = a[k][j];
                a[i][j] -= f * akj;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x
}

fn criterion_7() -> Outcome {
    let mut sys = system(0.5, -1.0, 1.0);
    sys.beta = 0.6;
    let (mut energy, mut symmetry) = (0.0f64, 0.0f64);
    for (m, n) in [(5, 4), (31, 32)] {
        let (s, t) = build_meshes(m, n, 1.0).unwrap();
        let solver = Solver::new(&sys, s, t).unwrap();
        let dx = s.dx();
        let mut rng = seeded_rng(7000 + m as u64);
        for _ in 0..20 {
            let a = random_closure(s, &mut rng);
            let b = random_closure(s, &mut rng);
            let la = gramian_apply_with(&solver, &a).unwrap();
            let lb = gramian_apply_with(&solver, &b).unwrap();
            let (win, _) = solver.adjoint_window(&a).unwrap();
            let direct = win.norm_sq(dx, t.dt());
            energy = energy.max((closure_inner(dx, &la, &a).re - direct).abs() / direct);
            let x = closure_inner(dx, &la, &b);
            let y = closure_inner(dx, &lb, &a).conj();
            let scale = closure_norm_sq(dx, &la).sqrt() * closure_norm_sq(dx, &b).sqrt();
            symmetry = symmetry.max((x - y).norm() / scale);
        }
    }
    ensure(energy <= GRAMIAN_TOL, || {
        format!("energy identity {energy:.3e}")
    })?;
    ensure(symmetry <= GRAMIAN_TOL, || {
        format!("conjugate symmetry {symmetry:.3e}")
    })?;

    let (s, t) = build_meshes(5, 4, 1.0).unwrap();
    let solver = Solver::new(&sys, s, t).unwrap();
    let eps = 1e-2;
    let dim = 7;
    let mut cols = Vec::new();
    for k in 0..dim {
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        e[k] = Complex64::new(1.0, 0.0);
        cols.push(gramian_apply_with(&solver, &e).unwrap());
    }
    let a: Vec<Vec<Complex64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| cols[j][i] + if i == j { eps } else { 0.0 })
                .collect()
        })
        .collect();
    let g = random_closure(s, &mut seeded_rng(77));
    let y_free = solver.forward_terminal(&g, None).unwrap();
    let want = dense_solve(a, y_free.iter().map(|z| -z).collect());
    let hum = hum_solve_with(&solver, &g, eps, 1e-14, 100).unwrap();
    let num = hum
        .minimizer
        .iter()
        .zip(&want)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let den = want.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cg = num / den;
    ensure(cg <= CG_ORACLE_TOL, || format!("CG vs dense {cg:.3e}"))?;
    Ok(format!(
        "energy identity {energy:.2e}, symmetry {symmetry:.2e} <= {GRAMIAN_TOL:.0e}; CG vs dense {cg:.2e} <= {CG_ORACLE_TOL:.0e}"
    ))
}

fn criterion_8() -> Outcome {
    let (r, _d) = run_pipeline(
        Subcommand::Control,
        &["initial=gaussian-bump", "c_pen=0.05", "vartheta=4"],
    )?;
    no_errors(&r)?;
    let y_mono = check_min(&r, "ladder_terminal_nonincreasing")?;
    let v_mono = check_min(&r, "ladder_control_nondecreasing")?;
    ensure(y_mono == 1.0 && v_mono == 1.0, || {
        "ladder not monotone".into()
    })?;
    let cert = check_min(&r, "certificate_")?;
    ensure(cert >= -CERTIFICATE_TOL, || {
        format!("certificate margin {cert:.3e}")
    })?;
    let cg = r.sections[0]
        .checks
        .iter()
        .filter(|c| c.name.starts_with("cg_residual"))
        .all(|c| c.pass);
    ensure(cg, || "CG residual above tolerance".into())?;
    let regime = r.sections[0]
        .checks
        .iter()
        .filter(|c| c.name.starts_with("control_dt_in_regime"))
        .all(|c| c.pass);
    ensure(regime, || {
        "refinement level outside the time-step regime".into()
    })?;
    let ft = check_max(&r, "terminal_constant_spread")?;
    let fc = check_max(&r, "control_constant_spread")?;
    let res = &r.sections[0].results;
    let terms: Vec<String> = res["ladder"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| format!("{:.2e}", h["terminal_norm"].as_f64().unwrap()))
        .collect();
    let detail = format!(
        "|y^N| down ladder [{}], certificate {cert:.2e}; terminal spread {ft:.3} (< {TERMINAL_SPREAD}), control spread {fc:.3} (< {CONTROL_SPREAD})",
        terms.join(", ")
    );
    ensure(ft < TERMINAL_SPREAD && fc < CONTROL_SPREAD, || {
        detail.clone()
    })?;
    Ok(detail)
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    for sets in [&[][..], &["c=0", "gamma=0"][..]] {
        let (r, d) = run_pipeline(Subcommand::Observability, sets)?;
        no_errors(&r)?;
        let sec = &r.sections[0];
        ensure(sec.passed, || {
            format!("failed checks: {:?}", r.failed_checks())
        })?;
        let h = check_max(&r, "observability_homogeneity")?;
        ensure(h <= HOMOGENEITY_TOL, || format!("homogeneity {h:.3e}"))?;
        let levels = sec.results["levels"].as_array().unwrap();
        ensure(levels.len() >= 2, || "fewer than two meshes".into())?;
        let c_obs: Vec<String> = levels
            .iter()
            .map(|l| format!("{:.3}", l["c_obs_empirical"].as_f64().unwrap()))
            .collect();
        let table = std::fs::read_to_string(d.path().join("observability_levels.csv")).unwrap();
        let zero = sets.len() == 2;
        if zero {
            let ok = table
                .lines()
                .skip(1)
                .all(|l| l.split(',').nth(7) == Some("inf"));
            ensure(ok, || {
                "zero reaction must give an infinite step bound".into()
            })?;
        }
        parts.push(format!(
            "{}C_obs [{}], homogeneity {h:.2e}",
            if zero { "rho = 0: " } else { "" },
            c_obs.join(", ")
        ));
    }
    Ok(parts.join("; "))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn criterion_10() -> Outcome {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let t0 = Instant::now();
        let o = Command::new(env!("CARGO_BIN_EXE_glc-lab"))
            .args(["full-suite", "--out"])
            .arg(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        let wall = t0.elapsed();
        ensure(o.status.success(), || {
            format!(
                "exit {:?}: {}",
                o.status.code(),
                String::from_utf8_lossy(&o.stderr)
            )
        })?;
        ensure(wall < SUITE_BUDGET, || format!("wall {wall:?}"))?;
        runs.push((wall, csv_files(dir.path())));
    }
    let (a, b) = (&runs[0].1, &runs[1].1);
    ensure(a.len() >= 10, || format!("only {} tables", a.len()))?;
    ensure(a == b, || "CSV content differs between runs".into())?;
    Ok(format!(
        "exit 0 twice, wall {:.1} s and {:.1} s (< {} s), {} CSV tables byte-identical",
        runs[0].0.as_secs_f64(),
        runs[1].0.as_secs_f64(),
        SUITE_BUDGET.as_secs(),
        a.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("discrete calculus identities", criterion_1),
        ("conjugation exactness", criterion_2),
        ("solver correctness", criterion_3),
        ("exact duality", criterion_4),
        ("energy estimate", criterion_5),
        ("weighted estimate stability", criterion_6),
        ("gramian structure", criterion_7),
        ("penalized HUM", criterion_8),
        ("observability", criterion_9),
        ("reproducibility and runtime", criterion_10),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS {title}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {title}: {d} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

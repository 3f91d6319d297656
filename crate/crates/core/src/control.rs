//! Energy estimate, observability quotient and penalized HUM controls.
//!
//! The Gramian `Λ` maps adjoint terminal data `a` to the terminal state of
//! the forward system started from rest and driven by `v = q_a|_{ω×𝒩*}`.
//! By exact discrete duality `⟨Λa, b⟩_w = ∬_{ω×𝒩*} q_a q_b*`, so `Λ` is
//! Hermitian positive semidefinite in `⟨·,·⟩_w`.
//!
//! For a penalty `ε > 0` the minimiser of
//! `J(a) = ½∬_ω|q_a|² + ε/2 ‖a‖²_w + Re⟨y_free^N, a⟩_w`
//! solves `(εI + Λ) â = −y_free^N`; the control `v = q_â|_ω` then steers `g`
//! to `y^N = y_free^N + Λâ = −ε â`. The reported cost is `−J(â)`, which equals
//! the primal cost `½‖v‖² + ‖y^N‖²/(2ε)`.

use crate::dynamics::{ControlField, Solver, StateTrajectory, SystemParams};
use crate::grid::{closure_inner, closure_norm_sq, SpaceMesh, TimeMesh};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("energy estimate needs 2|c| dt <= 1/2, got {0}")]
    EnergyRegime(f64),
    #[error("penalty epsilon = {0} must be positive")]
    BadEpsilon(f64),
    #[error("conjugate gradient stalled after {iterations} iterations at relative residual {residual:.3e}")]
    CgStagnation {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}

pub type Result<T> = std::result::Result<T, crate::Error>;

/// `e^{−C_pen / Δx^{min(ϑ/4, 1)}}`.
pub fn penalty_phi(dx: f64, vartheta: f64, c_pen: f64) -> f64 {
    (-c_pen / dx.powf((vartheta / 4.0).min(1.0))).exp()
}

/// Per-step and aggregate energy checks for one adjoint solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `‖q^{k+1/2}‖²_w`, `k = 0..=N`.
    pub energies: Vec<f64>,
    /// `(1 − 2|c|Δt)^{-1}`.
    pub step_factor: f64,
    /// Worst `(bound − lhs)/bound` over the per-step checks.
    pub worst_step_margin: f64,
    /// Worst margin of `E_0 ≤ e^{4|c|t^n} E_n` over `n`.
    pub worst_aggregate_margin: f64,
    /// Worst margin of `E_0 ≤ e^{4|c|T} E_n` over `n`.
    pub worst_uniform_margin: f64,
    pub uniform_constant: f64,
}

fn rel_margin(bound: f64, lhs: f64) -> f64 {
    if bound == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (bound - lhs) / bound
    }
}

pub fn energy_check_with(solver: &Solver, q_t: &[Complex64]) -> Result<EnergyReport> {
    let sys = solver.system();
    let tmesh = solver.time_mesh();
    let dt = tmesh.dt();
    let x = 2.0 * sys.c.abs() * dt;
    if x > 0.5 {
        return Err(ControlError::EnergyRegime(x).into());
    }
    let e = solver.adjoint_energies(q_t)?;
    let step_factor = 1.0 / (1.0 - x);
    let mut worst_step = f64::INFINITY;
    for k in 0..tmesh.n() {
        worst_step = worst_step.min(rel_margin(step_factor * e[k + 1], e[k]));
    }
    let uniform_constant = (4.0 * sys.c.abs() * tmesh.t_final()).exp();
    let mut worst_agg = f64::INFINITY;
    let mut worst_uni = f64::INFINITY;
    for n in 0..=tmesh.n() {
        let c_n = (4.0 * sys.c.abs() * tmesh.time(2 * n)).exp();
        worst_agg = worst_agg.min(rel_margin(c_n * e[n], e[0]));
        worst_uni = worst_uni.min(rel_margin(uniform_constant * e[n], e[0]));
    }
    Ok(EnergyReport {
        energies: e,
        step_factor,
        worst_step_margin: worst_step,
        worst_aggregate_margin: worst_agg,
        worst_uniform_margin: worst_uni,
        uniform_constant,
    })
}

pub fn energy_check(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    q_t: &[Complex64],
) -> Result<EnergyReport> {
    energy_check_with(&Solver::new(sys, smesh, tmesh)?, q_t)
}

/// Settings of the observability measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservabilitySettings {
    pub vartheta: f64,
    pub c_pen: f64,
    /// Mesh threshold of the weighted estimate (unknown; configured).
    pub dx_hat: f64,
    /// Constant in the second mesh threshold (unknown; configured).
    pub dx_tilde_const: f64,
    /// Weight parameters for the `K_0`, `k_0` diagnostics.
    pub lambda: f64,
    pub k_margin: f64,
    pub c0: f64,
}

impl ObservabilitySettings {
    pub fn validate(&self) -> std::result::Result<(), ControlError> {
        if !(self.vartheta >= 1.0) {
            return Err(ControlError::InvalidSetting("vartheta must be >= 1".into()));
        }
        if !(self.c_pen > 0.0) {
            return Err(ControlError::InvalidSetting(
                "C_pen must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Regime of the observability statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservabilityRegime {
    /// `T^{-2} Δx^ϑ`.
    pub dt_mesh_bound: f64,
    /// `(4 max(|c|, |γ|))^{-1}`, infinite when the bound is 0.
    pub dt_reaction_bound: f64,
    pub dt_ok: bool,
    /// `C (1 + 1/T + ρ^{2/3})^{-max(1, 4/ϑ)}`.
    pub dx_tilde: f64,
    pub dx_ok: bool,
}

pub fn observability_regime(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    settings: &ObservabilitySettings,
) -> ObservabilityRegime {
    let t = tmesh.t_final();
    let rho = sys.zeroth_order_bound();
    let dt_mesh_bound = smesh.dx().powf(settings.vartheta) / (t * t);
    let dt_reaction_bound = if rho == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (4.0 * rho)
    };
    let dx_tilde = settings.dx_tilde_const
        * (1.0 + 1.0 / t + rho.powf(2.0 / 3.0)).powf(-(1.0f64).max(4.0 / settings.vartheta));
    ObservabilityRegime {
        dt_mesh_bound,
        dt_reaction_bound,
        dt_ok: tmesh.dt() <= dt_mesh_bound.min(dt_reaction_bound),
        dx_tilde,
        dx_ok: smesh.dx() <= settings.dx_hat.min(dx_tilde),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub vartheta: f64,
    /// `‖q^{1/2}‖²_{L²(ℳ̄)}`.
    pub observed: f64,
    /// `∬_{ω×𝒩*}|q|²`.
    pub window_energy: f64,
    pub terminal_energy: f64,
    pub penalty_phi: f64,
    /// `observed / (window_energy + penalty_phi · terminal_energy)`; 0 when both vanish.
    pub quotient: f64,
    pub regime: ObservabilityRegime,
    /// `max(−varφ)` over the closed interval.
    pub k0_upper: f64,
    /// `min(−varφ)` over the closed interval.
    pub k0_lower: f64,
}

pub fn observability_quotient_with(
    solver: &Solver,
    q_t: &[Complex64],
    settings: &ObservabilitySettings,
) -> Result<ObservabilityReport> {
    settings.validate()?;
    let (smesh, tmesh) = (solver.space_mesh(), solver.time_mesh());
    let sys = solver.system();
    let dx = smesh.dx();
    let (win, first) = solver.adjoint_window(q_t)?;
    let observed = closure_norm_sq(dx, &first);
    let window_energy = win.norm_sq(dx, tmesh.dt());
    let terminal_energy = closure_norm_sq(dx, q_t);
    let phi = penalty_phi(dx, settings.vartheta, settings.c_pen);
    let denom = window_energy + phi * terminal_energy;
    let quotient = if observed == 0.0 && denom == 0.0 {
        0.0
    } else {
        observed / denom
    };
    let psi = crate::weights::build_psi(smesh, sys.omega0, settings.c0)?;
    let e_k = (settings.lambda * (psi.max() + settings.k_margin)).exp();
    let neg: Vec<f64> = (0..=smesh.last_position())
        .step_by(2)
        .map(|p| e_k - (settings.lambda * psi.psi(p)).exp())
        .collect();
    Ok(ObservabilityReport {
        vartheta: settings.vartheta,
        observed,
        window_energy,
        terminal_energy,
        penalty_phi: phi,
        quotient,
        regime: observability_regime(sys, smesh, tmesh, settings),
        k0_upper: neg.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        k0_lower: neg.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

pub fn observability_quotient(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    q_t: &[Complex64],
    settings: &ObservabilitySettings,
) -> Result<ObservabilityReport> {
    observability_quotient_with(&Solver::new(sys, smesh, tmesh)?, q_t, settings)
}

/// `Λa`: adjoint solve, restriction to the window, forward solve from rest.
pub fn gramian_apply_with(solver: &Solver, a: &[Complex64]) -> Result<Vec<Complex64>> {
    let (v, _) = solver.adjoint_window(a)?;
    let zero = vec![Complex64::new(0.0, 0.0); a.len()];
    Ok(solver.forward_terminal(&zero, Some(&v))?)
}

pub fn gramian_apply(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    a: &[Complex64],
) -> Result<Vec<Complex64>> {
    gramian_apply_with(&Solver::new(sys, smesh, tmesh)?, a)
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − A x‖_w / ‖b‖_w`, recomputed from scratch at exit.
    pub relative_residual: f64,
    /// Recursively updated residual at exit, for drift checks.
    pub recursive_residual: f64,
    pub history: Vec<f64>,
}

/// Conjugate gradient for a Hermitian positive definite `A` in `Re⟨·,·⟩_w`.
/// The residual is replaced by the true residual every `replace_every`
/// iterations and before declaring convergence.
pub fn conjugate_gradient(
    dx: f64,
    apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, CgOutcome)> {
    const REPLACE_EVERY: usize = 50;
    let n = b.len();
    let b_norm = closure_norm_sq(dx, b).sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    if b_norm == 0.0 {
        return Ok((
            x,
            CgOutcome {
                iterations: 0,
                relative_residual: 0.0,
                recursive_residual: 0.0,
                history: vec![0.0],
            },
        ));
    }
    let dot = |u: &[Complex64], v: &[Complex64]| closure_inner(dx, u, v).re;
    let true_residual = |x: &[Complex64]| -> Result<Vec<Complex64>> {
        let ax = apply(x)?;
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    };
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = vec![rr.sqrt() / b_norm];
    let mut it = 0;
    loop {
        let rel = rr.sqrt() / b_norm;
        if rel <= tol {
            let r_true = true_residual(&x)?;
            let true_rel = closure_norm_sq(dx, &r_true).sqrt() / b_norm;
            if true_rel <= tol {
                return Ok((
                    x,
                    CgOutcome {
                        iterations: it,
                        relative_residual: true_rel,
                        recursive_residual: rel,
                        history,
                    },
                ));
            }
            r = r_true;
            rr = dot(&r, &r);
            p = r.clone();
        }
        if it >= max_iter {
            let r_true = true_residual(&x)?;
            return Err(ControlError::CgStagnation {
                iterations: it,
                residual: closure_norm_sq(dx, &r_true).sqrt() / b_norm,
                history,
            }
            .into());
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(ControlError::CgStagnation {
                iterations: it,
                residual: rel,
                history,
            }
            .into());
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        if it % REPLACE_EVERY == 0 {
            r = true_residual(&x)?;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        history.push(rr.sqrt() / b_norm);
    }
}

/// Penalized HUM solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumResult {
    pub epsilon: f64,
    /// Minimiser `â` on the closure.
    #[serde(skip)]
    pub minimizer: Vec<Complex64>,
    /// `v = q_â|_{ω×𝒩*}`, recomputed from `â`.
    #[serde(skip)]
    pub control: ControlField,
    #[serde(skip)]
    pub trajectory: StateTrajectory,
    pub initial_norm: f64,
    pub free_terminal_norm: f64,
    pub terminal_norm: f64,
    pub control_norm: f64,
    pub cg_iterations: usize,
    pub cg_relative_residual: f64,
    pub cg_recursive_residual: f64,
    /// `‖εâ + Λâ + y_free^N‖_w / ‖y_free^N‖_w`, from a fresh Gramian application.
    pub optimality_residual: f64,
    /// `J(â)` of the dual functional (non-positive at the minimiser).
    pub dual_value: f64,
    /// `−J(â)`.
    pub cost: f64,
}

pub fn hum_solve_with(
    solver: &Solver,
    g: &[Complex64],
    epsilon: f64,
    cg_tol: f64,
    cg_maxiter: usize,
) -> Result<HumResult> {
    if !(epsilon > 0.0) {
        return Err(ControlError::BadEpsilon(epsilon).into());
    }
    let (smesh, tmesh) = (solver.space_mesh(), solver.time_mesh());
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let y_free = solver.forward_terminal(g, None)?;
    let rhs: Vec<Complex64> = y_free.iter().map(|z| -z).collect();
    let op = |a: &[Complex64]| -> Result<Vec<Complex64>> {
        let la = gramian_apply_with(solver, a)?;
        Ok(la.iter().zip(a).map(|(l, ai)| l + epsilon * ai).collect())
    };
    let (a_hat, cg) = conjugate_gradient(dx, op, &rhs, cg_tol, cg_maxiter)?;
    let (control, _) = solver.adjoint_window(&a_hat)?;
    let trajectory = solver.forward(g, &control)?;
    let la = gramian_apply_with(solver, &a_hat)?;
    let opt: Vec<Complex64> = (0..a_hat.len())
        .map(|i| epsilon * a_hat[i] + la[i] + y_free[i])
        .collect();
    let free_terminal_norm = closure_norm_sq(dx, &y_free).sqrt();
    let optimality_residual = if free_terminal_norm == 0.0 {
        closure_norm_sq(dx, &opt).sqrt()
    } else {
        closure_norm_sq(dx, &opt).sqrt() / free_terminal_norm
    };
    let control_sq = control.norm_sq(dx, dt);
    let dual_value = 0.5 * control_sq
        + 0.5 * epsilon * closure_norm_sq(dx, &a_hat)
        + closure_inner(dx, &y_free, &a_hat).re;
    Ok(HumResult {
        epsilon,
        initial_norm: closure_norm_sq(dx, g).sqrt(),
        free_terminal_norm,
        terminal_norm: closure_norm_sq(dx, trajectory.terminal()).sqrt(),
        control_norm: control_sq.sqrt(),
        cg_iterations: cg.iterations,
        cg_relative_residual: cg.relative_residual,
        cg_recursive_residual: cg.recursive_residual,
        optimality_residual,
        dual_value,
        cost: -dual_value,
        minimizer: a_hat,
        control,
        trajectory,
    })
}

pub fn hum_solve(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    g: &[Complex64],
    epsilon: f64,
    cg_tol: f64,
    cg_maxiter: usize,
) -> Result<HumResult> {
    hum_solve_with(
        &Solver::new(sys, smesh, tmesh)?,
        g,
        epsilon,
        cg_tol,
        cg_maxiter,
    )
}

/// Measured constants of the relaxed controllability statement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllabilityReport {
    pub epsilon: f64,
    pub dx: f64,
    pub dt: f64,
    /// `‖y^N‖ / (√ε ‖g‖)`; `None` when `g = 0`.
    pub terminal_constant: Option<f64>,
    /// `‖v‖ / ‖g‖`; `None` when `g = 0`.
    pub control_constant: Option<f64>,
    /// `‖y^N‖²`.
    pub certificate_lhs: f64,
    /// `2ε · cost`.
    pub certificate_rhs: f64,
    /// `certificate_rhs − certificate_lhs`.
    pub certificate_margin: f64,
    pub hum: HumResult,
}

pub fn certificate(hum: &HumResult) -> (f64, f64) {
    (
        hum.terminal_norm * hum.terminal_norm,
        2.0 * hum.epsilon * hum.cost,
    )
}

pub fn verify_relaxed_controllability_with(
    solver: &Solver,
    g: &[Complex64],
    vartheta: f64,
    c_pen: f64,
    cg_tol: f64,
    cg_maxiter: usize,
) -> Result<ControllabilityReport> {
    let dx = solver.space_mesh().dx();
    let epsilon = penalty_phi(dx, vartheta, c_pen);
    let hum = hum_solve_with(solver, g, epsilon, cg_tol, cg_maxiter)?;
    let (lhs, rhs) = certificate(&hum);
    let g_norm = hum.initial_norm;
    let (tc, cc) = if g_norm == 0.0 {
        (None, None)
    } else {
        (
            Some(hum.terminal_norm / (epsilon.sqrt() * g_norm)),
            Some(hum.control_norm / g_norm),
        )
    };
    Ok(ControllabilityReport {
        epsilon,
        dx,
        dt: solver.time_mesh().dt(),
        terminal_constant: tc,
        control_constant: cc,
        certificate_lhs: lhs,
        certificate_rhs: rhs,
        certificate_margin: rhs - lhs,
        hum,
    })
}

pub fn verify_relaxed_controllability(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    g: &[Complex64],
    vartheta: f64,
    c_pen: f64,
    cg_tol: f64,
    cg_maxiter: usize,
) -> Result<ControllabilityReport> {
    verify_relaxed_controllability_with(
        &Solver::new(sys, smesh, tmesh)?,
        g,
        vartheta,
        c_pen,
        cg_tol,
        cg_maxiter,
    )
}

/// Gaussian bump `exp(−((x − center)/width)²)` on the closure.
pub fn gaussian_bump(mesh: SpaceMesh, center: f64, width: f64) -> Vec<Complex64> {
    (0..mesh.m() + 2)
        .map(|j| {
            let u = (mesh.x(j) - center) / width;
            Complex64::new((-u * u).exp(), 0.0)
        })
        .collect()
}

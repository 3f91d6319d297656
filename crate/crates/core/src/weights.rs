//! Carleman weight family on the staggered mesh.
//!
//! The spatial profile is the concave quadratic
//! `ψ(x) = 1 + x*² − (x − x*)²` peaked at the midpoint `x*` of the inner
//! observation window. From it
//!
//! ```text
//! φ = e^{λψ},  varφ = e^{λψ} − e^{λK} < 0,
//! θ(t) = 1 / ((t + δT)(T + δT − t)),  s = τθ,
//! r = e^{s varφ},  ρ = 1/r.
//! ```
//!
//! `r` spans many orders of magnitude, so every product of `r` with a
//! stencil of `ρ` is evaluated as a sum of `exp(s·(varφ_p − varφ_q))`.

use crate::grid::{Interval, SpaceMesh, TimeMesh};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("invalid weight parameter: {0}")]
    InvalidParameter(String),
    #[error("profile condition violated: {condition} at x = {x}")]
    ProfileCondition { condition: &'static str, x: f64 },
    #[error("K = {k} must exceed max ψ = {psi_max}")]
    KTooSmall { k: f64, psi_max: f64 },
    #[error("exp(λK) = exp({0}) overflows a double; reduce λ·K")]
    Overflow(f64),
    #[error("Δt/2 = {half_dt} reaches the pole of θ at distance δT = {delta_t}")]
    ThetaPole { half_dt: f64, delta_t: f64 },
    #[error("mesh outside the lemma regime: {0}")]
    OutOfRegime(String),
}

pub type Result<T> = std::result::Result<T, WeightError>;

/// Scalar parameters of the weight family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightParams {
    pub lambda: f64,
    pub tau: f64,
    pub delta: f64,
    /// Level `K` with `K > max ψ`.
    pub k: f64,
    pub c0: f64,
    pub epsilon0: f64,
    pub tau0: f64,
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WeightError::InvalidParameter(m));
        if !(self.lambda >= 1.0) {
            return bad(format!("lambda = {} must be >= 1", self.lambda));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau = {} must be positive", self.tau));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return bad("delta must lie in (0, 1/2]".into());
        }
        if !(self.c0 > 0.0) {
            return bad(format!("c0 = {} must be positive", self.c0));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return bad(format!("epsilon0 = {} must lie in (0, 1)", self.epsilon0));
        }
        if !(self.tau0 >= 1.0) {
            return bad(format!("tau0 = {} must be >= 1", self.tau0));
        }
        if !self.k.is_finite() {
            return bad("K must be finite".into());
        }
        Ok(())
    }

    /// `K = max ψ + margin` for the quadratic profile.
    pub fn k_from_margin(psi: &PsiField, margin: f64) -> f64 {
        psi.max() + margin
    }
}

/// Samples of the spatial profile `ψ` and its derivative at every half-position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiField {
    mesh: SpaceMesh,
    x_star: f64,
    omega0: Interval,
    c0: f64,
    psi: Vec<f64>,
    psi_x: Vec<f64>,
    max_admissible_c0: f64,
}

impl PsiField {
    pub fn mesh(&self) -> SpaceMesh {
        self.mesh
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn omega0(&self) -> Interval {
        self.omega0
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `ψ` at half-position `pos`.
    pub fn psi(&self, pos: usize) -> f64 {
        self.psi[pos]
    }

    pub fn psi_x(&self, pos: usize) -> f64 {
        self.psi_x[pos]
    }

    /// Second derivative of the quadratic profile.
    pub fn psi_xx(&self) -> f64 {
        -2.0
    }

    pub fn max(&self) -> f64 {
        self.psi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest `|ψ_x|` over samples outside the closed window.
    pub fn max_admissible_c0(&self) -> f64 {
        self.max_admissible_c0
    }
}

/// Quadratic profile peaked at the midpoint of `omega0`, validated on every sample.
pub fn build_psi(mesh: SpaceMesh, omega0: Interval, c0: f64) -> Result<PsiField> {
    let x_star = omega0.midpoint();
    let psi = move |x: f64| 1.0 + x_star * x_star - (x - x_star) * (x - x_star);
    let psi_x = move |x: f64| 2.0 * (x_star - x);
    let (values, derivs, max_c0) = validate_profile(mesh, omega0, c0, psi, psi_x)?;
    Ok(PsiField {
        mesh,
        x_star,
        omega0,
        c0,
        psi: values,
        psi_x: derivs,
        max_admissible_c0: max_c0,
    })
}

/// Checks positivity, the gradient bound outside the closed window and the
/// boundary signs for an arbitrary candidate profile. Returns the samples and
/// the largest admissible `c0`.
pub fn validate_profile(
    mesh: SpaceMesh,
    omega0: Interval,
    c0: f64,
    psi: impl Fn(f64) -> f64,
    psi_x: impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if !(c0 > 0.0) {
        return Err(WeightError::InvalidParameter(format!(
            "c0 = {c0} must be positive"
        )));
    }
    let last = mesh.last_position();
    let xs: Vec<f64> = (0..=last).map(|p| mesh.coord(p)).collect();
    let values: Vec<f64> = xs.iter().map(|&x| psi(x)).collect();
    let derivs: Vec<f64> = xs.iter().map(|&x| psi_x(x)).collect();
    if !(derivs[0] > 0.0) {
        return Err(WeightError::ProfileCondition {
            condition: "psi_x(0) > 0",
            x: 0.0,
        });
    }
    if !(derivs[last] < 0.0) {
        return Err(WeightError::ProfileCondition {
            condition: "psi_x(1) < 0",
            x: 1.0,
        });
    }
    for (&x, &v) in xs.iter().zip(&values) {
        if !(v > 0.0) {
            return Err(WeightError::ProfileCondition {
                condition: "psi > 0",
                x,
            });
        }
    }
    let mut max_c0 = f64::INFINITY;
    for (&x, &d) in xs.iter().zip(&derivs) {
        if omega0.closure_contains(x) {
            continue;
        }
        max_c0 = max_c0.min(d.abs());
        if !(d.abs() > c0) {
            return Err(WeightError::ProfileCondition {
                condition: "|psi_x| > c0 outside the closed inner window",
                x,
            });
        }
    }
    Ok((values, derivs, max_c0))
}

/// `θ(t) = 1/((t + δT)(T + δT − t))`.
///
/// Evaluated as `1/((T/2 + δT)² − (t − T/2)²)`, which is symmetric about `T/2`.
pub fn theta(t: f64, t_final: f64, delta: f64) -> f64 {
    let half = 0.5 * t_final + delta * t_final;
    let u = t - 0.5 * t_final;
    1.0 / (half * half - u * u)
}

/// `θ'(t) = (2t − T) θ²`.
pub fn theta_prime(t: f64, t_final: f64, delta: f64) -> f64 {
    let th = theta(t, t_final, delta);
    (2.0 * t - t_final) * th * th
}

/// Weights sampled at every space half-position and time half-position `0..=2N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    params: WeightParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    theta: Vec<f64>,
    phi: Vec<f64>,
    varphi: Vec<f64>,
    psi_x: Vec<f64>,
    psi_xx: f64,
}

pub fn build_weights(params: WeightParams, psi: &PsiField, tmesh: TimeMesh) -> Result<WeightSet> {
    params.validate()?;
    let psi_max = psi.max();
    if !(params.k > psi_max) {
        return Err(WeightError::KTooSmall {
            k: params.k,
            psi_max,
        });
    }
    let lk = params.lambda * params.k;
    if lk >= f64::MAX_EXP as f64 * std::f64::consts::LN_2 {
        return Err(WeightError::Overflow(lk));
    }
    let t_final = tmesh.t_final();
    let half_dt = 0.5 * tmesh.dt();
    if !(half_dt < params.delta * t_final) {
        return Err(WeightError::ThetaPole {
            half_dt,
            delta_t: params.delta * t_final,
        });
    }
    let smesh = psi.mesh();
    let theta_v = (0..=2 * tmesh.n() + 1)
        .map(|p| theta(tmesh.time(p), t_final, params.delta))
        .collect();
    let e_k = lk.exp();
    let npos = smesh.last_position() + 1;
    let phi: Vec<f64> = (0..npos)
        .map(|p| (params.lambda * psi.psi(p)).exp())
        .collect();
    let varphi = phi.iter().map(|&f| f - e_k).collect();
    Ok(WeightSet {
        params,
        smesh,
        tmesh,
        theta: theta_v,
        phi,
        varphi,
        psi_x: (0..npos).map(|p| psi.psi_x(p)).collect(),
        psi_xx: psi.psi_xx(),
    })
}

impl WeightSet {
    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    pub fn space_mesh(&self) -> SpaceMesh {
        self.smesh
    }

    pub fn time_mesh(&self) -> TimeMesh {
        self.tmesh
    }

    /// `θ` at time half-position `tp` (0..=2N+1).
    pub fn theta(&self, tp: usize) -> f64 {
        self.theta[tp]
    }

    pub fn s(&self, tp: usize) -> f64 {
        self.params.tau * self.theta[tp]
    }

    pub fn phi(&self, xp: usize) -> f64 {
        self.phi[xp]
    }

    pub fn varphi(&self, xp: usize) -> f64 {
        self.varphi[xp]
    }

    pub fn psi_x(&self, xp: usize) -> f64 {
        self.psi_x[xp]
    }

    pub fn psi_xx(&self) -> f64 {
        self.psi_xx
    }

    pub fn log_r(&self, xp: usize, tp: usize) -> f64 {
        self.s(tp) * self.varphi[xp]
    }

    pub fn r(&self, xp: usize, tp: usize) -> f64 {
        self.log_r(xp, tp).exp()
    }

    pub fn rho(&self, xp: usize, tp: usize) -> f64 {
        (-self.log_r(xp, tp)).exp()
    }

    /// `r(p) · Σ w ρ(p + off)` in log space.
    pub fn r_times_rho_stencil(&self, xp: usize, tp: usize, taps: &[(i64, f64)]) -> f64 {
        let s = self.s(tp);
        let base = self.varphi[xp];
        taps.iter()
            .map(|&(off, w)| {
                let q = (xp as i64 + off) as usize;
                w * (s * (base - self.varphi[q])).exp()
            })
            .sum()
    }

    /// `r D_x ρ` at a node one half-step away from both neighbours.
    pub fn r_dx_rho(&self, xp: usize, tp: usize) -> f64 {
        let h = 1.0 / self.smesh.dx();
        self.r_times_rho_stencil(xp, tp, &[(1, h), (-1, -h)])
    }

    pub fn r_ax_rho(&self, xp: usize, tp: usize) -> f64 {
        self.r_times_rho_stencil(xp, tp, &[(1, 0.5), (-1, 0.5)])
    }

    /// `r A_x D_x ρ`.
    pub fn r_axdx_rho(&self, xp: usize, tp: usize) -> f64 {
        let h = 0.5 / self.smesh.dx();
        self.r_times_rho_stencil(xp, tp, &[(2, h), (-2, -h)])
    }

    /// `r D_x² ρ`.
    pub fn r_dxx_rho(&self, xp: usize, tp: usize) -> f64 {
        let h2 = 1.0 / (self.smesh.dx() * self.smesh.dx());
        self.r_times_rho_stencil(xp, tp, &[(2, h2), (0, -2.0 * h2), (-2, h2)])
    }

    /// `r A_x² ρ`.
    pub fn r_axx_rho(&self, xp: usize, tp: usize) -> f64 {
        self.r_times_rho_stencil(xp, tp, &[(2, 0.25), (0, 0.5), (-2, 0.25)])
    }

    /// `t^-(r) D_t ρ` at the primal time `tp = 2n`: `expm1((s^- − s^+) varφ) / Δt`.
    pub fn tminus_r_dt_rho(&self, xp: usize, tp: usize) -> f64 {
        let ds = self.s(tp - 1) - self.s(tp + 1);
        (ds * self.varphi[xp]).exp_m1() / self.tmesh.dt()
    }

    /// Closed form `r ∂_x ρ = −sλφψ_x`.
    pub fn r_dx_rho_exact(&self, xp: usize, tp: usize) -> f64 {
        -self.s(tp) * self.params.lambda * self.phi[xp] * self.psi_x[xp]
    }

    /// Closed form `r ∂_x² ρ = (sλφψ_x)² − sλφ(λψ_x² + ψ_xx)`.
    pub fn r_dxx_rho_exact(&self, xp: usize, tp: usize) -> f64 {
        let s = self.s(tp);
        let l = self.params.lambda;
        let f = self.phi[xp];
        let g = self.psi_x[xp];
        let a = s * l * f * g;
        a * a - s * l * f * (l * g * g + self.psi_xx)
    }

    /// `max(−varφ)` over the closed interval.
    pub fn k0_upper(&self) -> f64 {
        self.varphi
            .iter()
            .step_by(2)
            .map(|v| -v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min(−varφ)` over the closed interval.
    pub fn k0_lower(&self) -> f64 {
        self.varphi
            .iter()
            .step_by(2)
            .map(|v| -v)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One regime condition with its measured left-hand side and bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    /// `bound − value` (non-negative when satisfied).
    pub margin: f64,
}

impl RegimeCheck {
    fn at_most(value: f64, bound: f64) -> Self {
        Self {
            value,
            bound,
            pass: value <= bound,
            margin: bound - value,
        }
    }

    fn at_least(value: f64, bound: f64) -> Self {
        Self {
            value,
            bound,
            pass: value >= bound,
            margin: value - bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    /// `τ ≥ τ0 (T + T²)`.
    pub tau_large: RegimeCheck,
    /// `τΔx/(δT²) ≤ ε0`.
    pub space_small: RegimeCheck,
    /// `τ⁴Δt/(δ⁴T⁶) ≤ ε0`.
    pub time_small: RegimeCheck,
    /// `Δt ≤ 1`.
    pub dt_bounded: RegimeCheck,
    /// `τΔx/(δT²) ≤ 1`.
    pub lemma_space: RegimeCheck,
    /// `τΔt/(δ²T³) ≤ 1/2`.
    pub lemma_time_half: RegimeCheck,
    /// `τΔt/(δ²T³) ≤ 1`.
    pub lemma_time: RegimeCheck,
}

impl RegimeReport {
    /// All conditions under which the weighted estimate is claimed.
    pub fn carleman_ok(&self) -> bool {
        self.tau_large.pass && self.space_small.pass && self.time_small.pass && self.dt_bounded.pass
    }

    /// Conditions quoted by the weight-asymptotics lemmas.
    pub fn lemmas_ok(&self) -> bool {
        self.lemma_space.pass && self.lemma_time_half.pass
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, c) in [
            ("tau >= tau0 (T + T^2)", self.tau_large),
            ("tau dx / (delta T^2) <= epsilon0", self.space_small),
            ("tau^4 dt / (delta^4 T^6) <= epsilon0", self.time_small),
            ("dt <= 1", self.dt_bounded),
        ] {
            if !c.pass {
                out.push(name);
            }
        }
        out
    }
}

pub fn validate_regime(params: &WeightParams, smesh: SpaceMesh, tmesh: TimeMesh) -> RegimeReport {
    let t = tmesh.t_final();
    let (tau, d, dx, dt) = (params.tau, params.delta, smesh.dx(), tmesh.dt());
    let space = tau * dx / (d * t * t);
    let time4 = tau.powi(4) * dt / (d.powi(4) * t.powi(6));
    let time1 = tau * dt / (d * d * t.powi(3));
    RegimeReport {
        tau_large: RegimeCheck::at_least(tau, params.tau0 * (t + t * t)),
        space_small: RegimeCheck::at_most(space, params.epsilon0),
        time_small: RegimeCheck::at_most(time4, params.epsilon0),
        dt_bounded: RegimeCheck::at_most(dt, 1.0),
        lemma_space: RegimeCheck::at_most(space, 1.0),
        lemma_time_half: RegimeCheck::at_most(time1, 0.5),
        lemma_time: RegimeCheck::at_most(time1, 1.0),
    }
}

/// Asymptotic statement audited by [`audit_weight_lemmas`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum WeightLemma {
    /// `r ρ − 1`, remainder `(sΔx)²`.
    Identity,
    /// `r A_x ρ − 1`, remainder `(sΔx)²`.
    Average,
    /// `r D_x ρ − r∂_xρ`, remainder `s (sΔx)²`.
    Difference,
    /// `r A_x D_x ρ − r∂_xρ`, remainder `s (sΔx)²`.
    AverageDifference,
    /// `r D_x² ρ − r∂_x²ρ`, remainder `s² (sΔx)²`.
    SecondDifference,
    /// `t^-(r) D_t ρ + τ t^-(θ') varφ`, remainder `Δt(τ/(δ³T⁴) + τ²/(δ⁴T⁶))`.
    TimeConjugation,
    /// `|D_t θ| − T t^-(θ²)`, remainder `Δt/(δ³T⁴)`.
    ThetaDifference1,
    /// `|D_t θ²| − 2T t^-(θ³)`, remainder `Δt/(δ⁴T⁶)`.
    ThetaDifference2,
    /// `D_t θ' / (T² t^-(θ³) + Δt/(δ⁴T⁵))`.
    ThetaPrimeDifference,
    /// `|D_t(r D_x² ρ)|` over its stated envelope.
    TimeSecondDifference,
    /// `|D_t(r A_x² ρ)|` over its stated envelope.
    TimeSecondAverage,
    /// `|D_t(r A_x D_x ρ)|` over its stated envelope.
    TimeAverageDifference,
}

impl WeightLemma {
    pub const ALL: [WeightLemma; 12] = [
        WeightLemma::Identity,
        WeightLemma::Average,
        WeightLemma::Difference,
        WeightLemma::AverageDifference,
        WeightLemma::SecondDifference,
        WeightLemma::TimeConjugation,
        WeightLemma::ThetaDifference1,
        WeightLemma::ThetaDifference2,
        WeightLemma::ThetaPrimeDifference,
        WeightLemma::TimeSecondDifference,
        WeightLemma::TimeSecondAverage,
        WeightLemma::TimeAverageDifference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightLemma::Identity => "space_identity",
            WeightLemma::Average => "space_average",
            WeightLemma::Difference => "space_difference",
            WeightLemma::AverageDifference => "space_average_difference",
            WeightLemma::SecondDifference => "space_second_difference",
            WeightLemma::TimeConjugation => "time_conjugation",
            WeightLemma::ThetaDifference1 => "theta_difference_l1",
            WeightLemma::ThetaDifference2 => "theta_difference_l2",
            WeightLemma::ThetaPrimeDifference => "theta_prime_difference",
            WeightLemma::TimeSecondDifference => "time_second_difference",
            WeightLemma::TimeSecondAverage => "time_second_average",
            WeightLemma::TimeAverageDifference => "time_average_difference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub lemma: WeightLemma,
    pub dx: f64,
    pub dt: f64,
    pub tau: f64,
    pub lambda: f64,
    /// Max over the sampled nodes of `|remainder| / claimed bound`.
    pub ratio: f64,
}

/// Measures the remainder ratio of every weight lemma on one mesh.
pub fn audit_one_mesh(weights: &WeightSet) -> Result<Vec<AuditRow>> {
    let smesh = weights.space_mesh();
    let tmesh = weights.time_mesh();
    let p = *weights.params();
    let report = validate_regime(&p, smesh, tmesh);
    if !report.lemmas_ok() {
        return Err(WeightError::OutOfRegime(format!(
            "tau dx/(delta T^2) = {:.3e} (<= 1), tau dt/(delta^2 T^3) = {:.3e} (<= 1/2)",
            report.lemma_space.value, report.lemma_time_half.value
        )));
    }
    let (m, n) = (smesh.m(), tmesh.n());
    let (dx, dt, t_final, delta, tau) = (smesh.dx(), tmesh.dt(), tmesh.t_final(), p.delta, p.tau);
    let last = smesh.last_position();
    let dual_times: Vec<usize> = (0..n).map(|k| 2 * k + 1).collect();
    let primal_times: Vec<usize> = (1..=n).map(|k| 2 * k).collect();
    let mut rows = Vec::new();
    let mut push = |lemma, ratio: f64| {
        rows.push(AuditRow {
            lemma,
            dx,
            dt,
            tau,
            lambda: p.lambda,
            ratio,
        })
    };

    let mut r_id: f64 = 0.0;
    let mut r_avg: f64 = 0.0;
    let mut r_diff: f64 = 0.0;
    let mut r_avgdiff: f64 = 0.0;
    let mut r_diff2: f64 = 0.0;
    for &tp in &dual_times {
        let s = weights.s(tp);
        let sdx2 = (s * dx) * (s * dx);
        for xp in 0..=last {
            r_id = r_id.max((weights.r(xp, tp) * weights.rho(xp, tp) - 1.0).abs() / sdx2);
        }
        for xp in (1..last).step_by(2) {
            r_avg = r_avg.max((weights.r_ax_rho(xp, tp) - 1.0).abs() / sdx2);
            r_diff = r_diff.max(
                (weights.r_dx_rho(xp, tp) - weights.r_dx_rho_exact(xp, tp)).abs() / (s * sdx2),
            );
        }
        for j in 1..=m {
            let xp = 2 * j;
            r_avgdiff = r_avgdiff.max(
                (weights.r_axdx_rho(xp, tp) - weights.r_dx_rho_exact(xp, tp)).abs() / (s * sdx2),
            );
            r_diff2 = r_diff2.max(
                (weights.r_dxx_rho(xp, tp) - weights.r_dxx_rho_exact(xp, tp)).abs()
                    / (s * s * sdx2),
            );
        }
    }
    push(WeightLemma::Identity, r_id);
    push(WeightLemma::Average, r_avg);
    push(WeightLemma::Difference, r_diff);
    push(WeightLemma::AverageDifference, r_avgdiff);
    push(WeightLemma::SecondDifference, r_diff2);

    let env_conj = dt
        * (tau / (delta.powi(3) * t_final.powi(4)) + tau * tau / (delta.powi(4) * t_final.powi(6)));
    let mut r_conj: f64 = 0.0;
    for &tp in &primal_times {
        let lead = -tau * theta_prime(tmesh.time(tp - 1), t_final, delta);
        for xp in (0..=last).step_by(2) {
            let lhs = weights.tminus_r_dt_rho(xp, tp);
            r_conj = r_conj.max((lhs - lead * weights.varphi(xp)).abs() / env_conj);
        }
    }
    push(WeightLemma::TimeConjugation, r_conj);

    let th = |tp: usize| weights.theta(tp);
    let mut r_t1 = f64::NEG_INFINITY;
    let mut r_t2 = f64::NEG_INFINITY;
    let mut r_tp = f64::NEG_INFINITY;
    let env1 = dt / (delta.powi(3) * t_final.powi(4));
    let env2 = dt / (delta.powi(4) * t_final.powi(6));
    let env_p = dt / (delta.powi(4) * t_final.powi(5));
    for &tp in &primal_times {
        let (a, b) = (th(tp - 1), th(tp + 1));
        let d1 = (b - a) / dt;
        r_t1 = r_t1.max((d1.abs() - t_final * a * a) / env1);
        let d2 = (b * b - a * a) / dt;
        r_t2 = r_t2.max((d2.abs() - 2.0 * t_final * a.powi(3)) / env2);
        let dp = (theta_prime(tmesh.time(tp + 1), t_final, delta)
            - theta_prime(tmesh.time(tp - 1), t_final, delta))
            / dt;
        r_tp = r_tp.max(dp / (t_final * t_final * a.powi(3) + env_p));
    }
    push(WeightLemma::ThetaDifference1, r_t1);
    push(WeightLemma::ThetaDifference2, r_t2);
    push(WeightLemma::ThetaPrimeDifference, r_tp);

    let sp = tau * dx / (delta * t_final * t_final);
    let st = tau * dt / (delta.powi(3) * t_final.powi(4));
    let mut r_s1: f64 = 0.0;
    let mut r_s2: f64 = 0.0;
    let mut r_s3: f64 = 0.0;
    for &tp in &primal_times {
        let tm = tp - 1;
        let s = weights.s(tm);
        let thm = weights.theta(tm);
        let sdx = s * dx;
        let sigma1 = t_final * s * s * thm
            + tau * tau * dt / (delta.powi(4) * t_final.powi(6))
            + st * sp.powi(3);
        let sigma2 = t_final * sdx * sdx * thm + st * sp;
        let sigma3 = t_final * s * thm
            + t_final * s * sdx * sdx * thm
            + dt * t_final * t_final * s * thm * thm
            + dt * t_final * t_final * s * sdx * sdx * thm * thm;
        for j in 1..=m {
            let xp = 2 * j;
            let d1 = (weights.r_dxx_rho(xp, tp + 1) - weights.r_dxx_rho(xp, tm)) / dt;
            let d2 = (weights.r_axx_rho(xp, tp + 1) - weights.r_axx_rho(xp, tm)) / dt;
            let d3 = (weights.r_axdx_rho(xp, tp + 1) - weights.r_axdx_rho(xp, tm)) / dt;
            r_s1 = r_s1.max(d1.abs() / sigma1);
            r_s2 = r_s2.max(d2.abs() / sigma2);
            r_s3 = r_s3.max(d3.abs() / sigma3);
        }
    }
    push(WeightLemma::TimeSecondDifference, r_s1);
    push(WeightLemma::TimeSecondAverage, r_s2);
    push(WeightLemma::TimeAverageDifference, r_s3);
    Ok(rows)
}

/// Runs [`audit_one_mesh`] over a family of `(M, N)` meshes at fixed `T`.
pub fn audit_weight_lemmas(
    params: WeightParams,
    omega0: Interval,
    family: &[(usize, usize)],
    t_final: f64,
) -> std::result::Result<Vec<AuditRow>, crate::Error> {
    use rayon::prelude::*;
    let per_mesh: Vec<std::result::Result<Vec<AuditRow>, crate::Error>> = family
        .par_iter()
        .map(|&(m, n)| {
            let (smesh, tmesh) = crate::grid::build_meshes(m, n, t_final)?;
            let psi = build_psi(smesh, omega0, params.c0)?;
            let w = build_weights(params, &psi, tmesh)?;
            Ok(audit_one_mesh(&w)?)
        })
        .collect();
    let mut out = Vec::new();
    for rows in per_mesh {
        out.extend(rows?);
    }
    Ok(out)
}

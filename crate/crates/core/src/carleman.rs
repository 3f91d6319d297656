//! Term-by-term evaluation of the weighted (Carleman) estimate for the
//! adjoint operator, and the exact conjugation identity behind it.
//!
//! All right-hand constants are set to one, so the reported
//! `lhs_sum / rhs_sum` is the empirical constant of the estimate.

use crate::dynamics::{AdjointTrajectory, Solver, SystemParams};
use crate::grid::{SpaceSet, TimeSet};
use crate::weights::{
    build_psi, build_weights, validate_regime, RegimeReport, WeightParams, WeightSet,
};
use crate::{derive_seed, seeded_rng};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarlemanError {
    #[error("parameters outside the estimate's regime: {0}")]
    OutOfRegime(String),
    #[error("field does not live on the closure x extended dual time mesh")]
    BadField,
    #[error("weights and field use different meshes")]
    MeshMismatch,
}

pub type Result<T> = std::result::Result<T, CarlemanError>;

pub const LHS_LABELS: [&str; 8] = [
    "interior_second_difference",
    "interior_time_difference",
    "interior_average_difference",
    "dual_difference",
    "interior_zeroth_order",
    "boundary_time_difference",
    "boundary_trace_difference",
    "boundary_zeroth_order",
];

pub const RHS_LABELS: [&str; 5] = [
    "interior_operator",
    "left_boundary_operator",
    "right_boundary_operator",
    "local_window",
    "terminal_layers",
];

/// Every integral of both sides of the estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanBreakdown {
    pub lhs: [f64; 8],
    pub lhs_sum: f64,
    pub rhs: [f64; 5],
    pub rhs_sum: f64,
    /// `lhs_sum / rhs_sum`; 0 when both sides vanish.
    pub ratio: f64,
}

fn check_field(q: &AdjointTrajectory, w: &WeightSet) -> Result<()> {
    if q.q.space_set() != SpaceSet::Closure || q.q.time_set() != Some(TimeSet::DualClosure) {
        return Err(CarlemanError::BadField);
    }
    let tm = q.q.time_mesh().ok_or(CarlemanError::BadField)?;
    if q.q.space_mesh() != w.space_mesh() || tm != w.time_mesh() {
        return Err(CarlemanError::MeshMismatch);
    }
    Ok(())
}

/// `P(q) = −D_t q − (α − iβ) D_x² t^-(q)` on `ℳ × 𝒩`; row `n−1` holds time `t^n`.
pub fn apply_p(q: &AdjointTrajectory, sys: &SystemParams) -> Result<Vec<Vec<Complex64>>> {
    let (smesh, tmesh) = meshes_of(q)?;
    let a = sys.diffusion(crate::dynamics::Direction::Adjoint);
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let m = smesh.m();
    Ok((1..=tmesh.n())
        .map(|n| {
            let lo = q.q.slice(n - 1);
            let hi = q.q.slice(n);
            (1..=m)
                .map(|j| {
                    -(hi[j] - lo[j]) / dt - a * (lo[j + 1] - 2.0 * lo[j] + lo[j - 1]) / (dx * dx)
                })
                .collect()
        })
        .collect())
}

/// `(B_{Γ0}(q), B_{Γ1}(q))` on `𝒩`; entry `n−1` holds time `t^n`.
pub fn apply_boundary_ops(
    q: &AdjointTrajectory,
    sys: &SystemParams,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let (smesh, tmesh) = meshes_of(q)?;
    let a = sys.diffusion(crate::dynamics::Direction::Adjoint);
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let last = smesh.m() + 1;
    let mut b0 = Vec::with_capacity(tmesh.n());
    let mut b1 = Vec::with_capacity(tmesh.n());
    for n in 1..=tmesh.n() {
        let lo = q.q.slice(n - 1);
        let hi = q.q.slice(n);
        b0.push((hi[0] - lo[0]) / dt + a * (lo[1] - lo[0]) / dx);
        b1.push((hi[last] - lo[last]) / dt - a * (lo[last] - lo[last - 1]) / dx);
    }
    Ok((b0, b1))
}

fn meshes_of(q: &AdjointTrajectory) -> Result<(crate::grid::SpaceMesh, crate::grid::TimeMesh)> {
    if q.q.space_set() != SpaceSet::Closure || q.q.time_set() != Some(TimeSet::DualClosure) {
        return Err(CarlemanError::BadField);
    }
    Ok((
        q.q.space_mesh(),
        q.q.time_mesh().ok_or(CarlemanError::BadField)?,
    ))
}

/// Residual of the exact identity obtained by substituting `q = ρ z`, `z = r q`:
///
/// ```text
/// t^-(r) P(q) = −D_t z − t^-(r) D_t ρ · t^+(z)
///               − (α − iβ) t^-( r D_x²ρ · A_x² z + 2 r A_x D_x ρ · A_x D_x z + r A_x² ρ · D_x² z )
/// ```
///
/// evaluated on `ℳ × 𝒩`.
pub fn conjugation_residual(
    q: &AdjointTrajectory,
    weights: &WeightSet,
    sys: &SystemParams,
) -> Result<crate::dynamics::Residual> {
    check_field(q, weights)?;
    let (smesh, tmesh) = meshes_of(q)?;
    let a = sys.diffusion(crate::dynamics::Direction::Adjoint);
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let m = smesh.m();
    let p = apply_p(q, sys)?;
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let z_at = |j: usize, k: usize| q.q.slice(k)[j] * weights.r(2 * j, 2 * k + 1);
    for n in 1..=tmesh.n() {
        let tm = 2 * n - 1;
        for j in 1..=m {
            let xp = 2 * j;
            let lhs = weights.r(xp, tm) * p[n - 1][j - 1];
            let z_lo = [z_at(j - 1, n - 1), z_at(j, n - 1), z_at(j + 1, n - 1)];
            let z_hi = z_at(j, n);
            let dtz = (z_hi - z_lo[1]) / dt;
            let conj_t = weights.tminus_r_dt_rho(xp, 2 * n) * z_hi;
            let ax2z = (z_lo[2] + 2.0 * z_lo[1] + z_lo[0]) * 0.25;
            let axdxz = (z_lo[2] - z_lo[0]) / (2.0 * dx);
            let dx2z = (z_lo[2] - 2.0 * z_lo[1] + z_lo[0]) / (dx * dx);
            let s1 = weights.r_dxx_rho(xp, tm) * ax2z;
            let s2 = 2.0 * weights.r_axdx_rho(xp, tm) * axdxz;
            let s3 = weights.r_axx_rho(xp, tm) * dx2z;
            let rhs = -dtz - conj_t - a * (s1 + s2 + s3);
            max_abs = max_abs.max((lhs - rhs).norm());
            let term_scale = lhs.norm()
                + dtz.norm()
                + conj_t.norm()
                + a.norm() * (s1.norm() + s2.norm() + s3.norm());
            scale = scale.max(term_scale);
        }
    }
    Ok(crate::dynamics::Residual { max_abs, scale })
}

/// Evaluates both sides of the estimate; refuses parameters outside its regime.
pub fn evaluate_carleman(
    q: &AdjointTrajectory,
    weights: &WeightSet,
    sys: &SystemParams,
) -> Result<CarlemanBreakdown> {
    let report = validate_regime(weights.params(), weights.space_mesh(), weights.time_mesh());
    if !report.carleman_ok() {
        return Err(CarlemanError::OutOfRegime(report.failures().join("; ")));
    }
    evaluate_carleman_unchecked(q, weights, sys)
}

/// [`evaluate_carleman`] without the regime gate, for out-of-regime experiments.
pub fn evaluate_carleman_unchecked(
    q: &AdjointTrajectory,
    weights: &WeightSet,
    sys: &SystemParams,
) -> Result<CarlemanBreakdown> {
    check_field(q, weights)?;
    let (smesh, tmesh) = meshes_of(q)?;
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let (m, n_steps) = (smesh.m(), tmesh.n());
    let last = m + 1;
    let r2 = |xp: usize, tp: usize| (2.0 * weights.log_r(xp, tp)).exp();
    let mut lhs = [0.0f64; 8];

    for k in 0..n_steps {
        let tp = 2 * k + 1;
        let s = weights.s(tp);
        let qk = q.q.slice(k);
        for j in 1..=m {
            let w = r2(2 * j, tp);
            let d2 = (qk[j + 1] - 2.0 * qk[j] + qk[j - 1]) / (dx * dx);
            let ad = (qk[j + 1] - qk[j - 1]) / (2.0 * dx);
            lhs[0] += w / s * d2.norm_sqr();
            lhs[2] += w * s * ad.norm_sqr();
            lhs[4] += w * s.powi(3) * qk[j].norm_sqr();
        }
        for j in 0..=m {
            let d = (qk[j + 1] - qk[j]) / dx;
            lhs[3] += r2(2 * j + 1, tp) * s * d.norm_sqr();
        }
        let d_left = (qk[1] - qk[0]) / dx;
        let d_right = (qk[last] - qk[last - 1]) / dx;
        lhs[6] += s * (r2(0, tp) * d_left.norm_sqr() + r2(2 * last, tp) * d_right.norm_sqr());
        lhs[7] +=
            s.powi(3) * (r2(0, tp) * qk[0].norm_sqr() + r2(2 * last, tp) * qk[last].norm_sqr());
    }
    for n in 1..=n_steps {
        let tm = 2 * n - 1;
        let s = weights.s(tm);
        let lo = q.q.slice(n - 1);
        let hi = q.q.slice(n);
        for j in 1..=m {
            lhs[1] += r2(2 * j, tm) / s * ((hi[j] - lo[j]) / dt).norm_sqr();
        }
        for j in [0, last] {
            lhs[5] += r2(2 * j, tm) / s * ((hi[j] - lo[j]) / dt).norm_sqr();
        }
    }
    for (i, v) in lhs.iter_mut().enumerate() {
        *v *= match i {
            0..=4 => dx * dt,
            _ => dt,
        };
    }

    let mut rhs = [0.0f64; 5];
    let p = apply_p(q, sys)?;
    let (b0, b1) = apply_boundary_ops(q, sys)?;
    for n in 1..=n_steps {
        let tm = 2 * n - 1;
        for j in 1..=m {
            rhs[0] += r2(2 * j, tm) * p[n - 1][j - 1].norm_sqr();
        }
        rhs[1] += r2(0, tm) * b0[n - 1].norm_sqr();
        rhs[2] += r2(2 * last, tm) * b1[n - 1].norm_sqr();
    }
    rhs[0] *= dx * dt;
    rhs[1] *= dt;
    rhs[2] *= dt;
    let window = sys.omega.interior_nodes(&smesh);
    for k in 0..n_steps {
        let tp = 2 * k + 1;
        let s3 = weights.s(tp).powi(3);
        let qk = q.q.slice(k);
        for &j in &window {
            rhs[3] += s3 * r2(2 * j, tp) * qk[j].norm_sqr();
        }
    }
    rhs[3] *= dx * dt;
    let mut layer = 0.0;
    for k in [0, n_steps] {
        let tp = 2 * k + 1;
        let qk = q.q.slice(k);
        let mut interior = 0.0;
        for j in 1..=m {
            interior += r2(2 * j, tp) * qk[j].norm_sqr();
        }
        layer +=
            interior * dx + r2(0, tp) * qk[0].norm_sqr() + r2(2 * last, tp) * qk[last].norm_sqr();
    }
    rhs[4] = layer / (dx * dx);

    let lhs_sum: f64 = lhs.iter().sum();
    let rhs_sum: f64 = rhs.iter().sum();
    let ratio = if lhs_sum == 0.0 && rhs_sum == 0.0 {
        0.0
    } else {
        lhs_sum / rhs_sum
    };
    Ok(CarlemanBreakdown {
        lhs,
        lhs_sum,
        rhs,
        rhs_sum,
        ratio,
    })
}

/// Structured terminal data used to stress every term of the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SampleKind {
    /// Complex Gaussian entries.
    Random,
    /// Unit mass at the two boundary nodes.
    BoundaryMass,
    /// Opposite unit masses at the two boundary nodes.
    BoundaryDipole,
    /// Highest discrete mode `(−1)^j`.
    HighMode,
    /// Lowest non-constant mode `cos(πx)`.
    LowMode,
}

impl SampleKind {
    pub const SWEEP: [SampleKind; 5] = [
        SampleKind::Random,
        SampleKind::BoundaryMass,
        SampleKind::BoundaryDipole,
        SampleKind::HighMode,
        SampleKind::LowMode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SampleKind::Random => "random",
            SampleKind::BoundaryMass => "boundary_mass",
            SampleKind::BoundaryDipole => "boundary_dipole",
            SampleKind::HighMode => "high_mode",
            SampleKind::LowMode => "low_mode",
        }
    }

    pub fn build(self, mesh: crate::grid::SpaceMesh, seed: u64) -> Vec<Complex64> {
        let n = mesh.m() + 2;
        match self {
            SampleKind::Random => crate::dynamics::random_closure(mesh, &mut seeded_rng(seed)),
            SampleKind::BoundaryMass => (0..n)
                .map(|j| Complex64::new(if j == 0 || j == n - 1 { 1.0 } else { 0.0 }, 0.0))
                .collect(),
            SampleKind::BoundaryDipole => (0..n)
                .map(|j| {
                    let v = if j == 0 {
                        1.0
                    } else if j == n - 1 {
                        -1.0
                    } else {
                        0.0
                    };
                    Complex64::new(v, 0.0)
                })
                .collect(),
            SampleKind::HighMode => (0..n)
                .map(|j| Complex64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
                .collect(),
            SampleKind::LowMode => (0..n)
                .map(|j| Complex64::new((std::f64::consts::PI * mesh.x(j)).cos(), 0.0))
                .collect(),
        }
    }
}

/// One `(τ, λ, M, N)` cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub tau: f64,
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSample {
    pub cell: usize,
    pub sample_id: usize,
    pub kind: SampleKind,
    pub breakdown: CarlemanBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub dx: f64,
    pub dt: f64,
    pub regime: Option<RegimeReport>,
    /// Reason the cell was skipped, if it was.
    pub skipped: Option<String>,
    pub max_ratio: f64,
    pub samples: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub cells: Vec<CellSummary>,
    pub samples: Vec<SweepSample>,
}

/// Sweep configuration; `base` supplies every weight parameter except τ and λ.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sys: SystemParams,
    pub base: WeightParams,
    /// `K = max ψ + k_margin`.
    pub k_margin: f64,
    pub cells: Vec<SweepCell>,
    pub samples_per_cell: usize,
    pub seed: u64,
}

/// Evaluates each in-regime cell over `samples_per_cell` terminal data,
/// cycling through [`SampleKind::SWEEP`]. Cells run concurrently. Random
/// draws are seeded by `(seed, sample)` so every level sees the same family.
pub fn sweep_carleman(cfg: &SweepConfig) -> std::result::Result<SweepTable, crate::Error> {
    let results: Vec<std::result::Result<(CellSummary, Vec<SweepSample>), crate::Error>> = cfg
        .cells
        .par_iter()
        .enumerate()
        .map(|(ci, cell)| run_cell(cfg, ci, cell))
        .collect();
    let mut table = SweepTable {
        cells: Vec::new(),
        samples: Vec::new(),
    };
    for r in results {
        let (summary, samples) = r?;
        table.cells.push(summary);
        table.samples.extend(samples);
    }
    Ok(table)
}

fn run_cell(
    cfg: &SweepConfig,
    ci: usize,
    cell: &SweepCell,
) -> std::result::Result<(CellSummary, Vec<SweepSample>), crate::Error> {
    let start = std::time::Instant::now();
    let mut sys = cfg.sys;
    sys.t_final = cfg.sys.t_final;
    let (smesh, tmesh) = crate::grid::build_meshes(cell.m, cell.n, sys.t_final)?;
    let psi = build_psi(smesh, sys.omega0, cfg.base.c0)?;
    let mut params = cfg.base;
    params.tau = cell.tau;
    params.lambda = cell.lambda;
    params.k = psi.max() + cfg.k_margin;
    let regime = validate_regime(&params, smesh, tmesh);
    let mut summary = CellSummary {
        cell: *cell,
        dx: smesh.dx(),
        dt: tmesh.dt(),
        regime: Some(regime),
        skipped: None,
        max_ratio: 0.0,
        samples: 0,
        wall_seconds: 0.0,
    };
    if !regime.carleman_ok() {
        summary.skipped = Some(format!("out of regime: {}", regime.failures().join("; ")));
        return Ok((summary, Vec::new()));
    }
    let weights = build_weights(params, &psi, tmesh)?;
    let solver = Solver::new(&sys, smesh, tmesh)?;
    let mut samples = Vec::with_capacity(cfg.samples_per_cell);
    for sid in 0..cfg.samples_per_cell {
        let kind = SampleKind::SWEEP[sid % SampleKind::SWEEP.len()];
        let seed = derive_seed(cfg.seed, sid as u64);
        let q_t = kind.build(smesh, seed);
        let q = solver.adjoint(&q_t)?;
        let b = evaluate_carleman(&q, &weights, &sys)?;
        summary.max_ratio = summary.max_ratio.max(b.ratio);
        samples.push(SweepSample {
            cell: ci,
            sample_id: sid,
            kind,
            breakdown: b,
        });
    }
    summary.samples = samples.len();
    summary.wall_seconds = start.elapsed().as_secs_f64();
    Ok((summary, samples))
}

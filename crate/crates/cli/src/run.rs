//! Pipelines behind each subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use glc_core::carleman::{
    evaluate_carleman, sweep_carleman, SampleKind, SweepCell, SweepConfig, LHS_LABELS, RHS_LABELS,
};
use glc_core::control::{
    certificate, energy_check_with, gaussian_bump, hum_solve_with, observability_quotient_with,
    verify_relaxed_controllability_with,
};
use glc_core::dynamics::{random_closure, ControlField, Solver};
use glc_core::grid::{build_meshes, check_identities_with, SpaceMesh};
use glc_core::weights::{audit_weight_lemmas, build_psi, build_weights, WeightLemma};
use glc_core::{derive_seed, seeded_rng, Complex64};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ExperimentConfig, InitialPreset};
use crate::report::{Cell, Check, Csv, RunReport, Section};

/// Identity residual bound, relative to the field scale.
pub const IDENTITY_TOL: f64 = 1e-13;
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const DUALITY_TOL: f64 = 1e-12;
pub const ENERGY_TOL: f64 = 1e-12;
pub const HOMOGENEITY_TOL: f64 = 1e-12;
pub const CERTIFICATE_TOL: f64 = 1e-10;
/// Allowed spread of a measured constant across refinement levels.
pub const CARLEMAN_SPREAD: f64 = 2.0;
pub const TERMINAL_SPREAD: f64 = 4.0;
pub const CONTROL_SPREAD: f64 = 2.0;
/// Growth allowed for a lemma ratio from the coarsest to the finest audit mesh.
pub const AUDIT_SPREAD: f64 = 2.0;

/// Seed streams, one per pipeline, all derived from the configured seed.
mod stream {
    pub const IDENTITIES: u64 = 1 << 40;
    pub const SOLVE: u64 = 2 << 40;
    pub const ENERGY: u64 = 3 << 40;
    pub const OBSERVABILITY: u64 = 4 << 40;
    pub const INITIAL: u64 = 5 << 40;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Identities,
    WeightsAudit,
    Solve,
    CarlemanAudit,
    Energy,
    Observability,
    Control,
    FullSuite,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Identities => "identities",
            Subcommand::WeightsAudit => "weights-audit",
            Subcommand::Solve => "solve",
            Subcommand::CarlemanAudit => "carleman-audit",
            Subcommand::Energy => "energy",
            Subcommand::Observability => "observability",
            Subcommand::Control => "control",
            Subcommand::FullSuite => "full-suite",
        }
    }

    fn pipelines(self) -> Vec<Subcommand> {
        use Subcommand::*;
        match self {
            FullSuite => vec![
                Identities,
                WeightsAudit,
                Solve,
                CarlemanAudit,
                Energy,
                Observability,
                Control,
            ],
            other => vec![other],
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("output directory {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("GLC_LAB_WORKERS = `{0}` is not a positive integer")]
    Workers(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Name of the marker left next to partial artifacts of a failed run.
pub const FAILED_MARKER: &str = ".failed";
pub const WORKERS_ENV: &str = "GLC_LAB_WORKERS";

fn workers_from_env() -> Result<Option<usize>, RunError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Workers(v)),
        },
        Err(_) => Ok(None),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs `sub` and writes `report.json` plus its tables into `out`.
pub fn run(sub: Subcommand, cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, RunError> {
    let start = Instant::now();
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let marker = out.join(FAILED_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(io_err(&marker))?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers_from_env()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let sections: Vec<Section> = pool.install(|| {
        sub.pipelines()
            .into_iter()
            .map(|p| {
                let t0 = Instant::now();
                let mut s = Section::new(p.name());
                if let Err(e) = run_pipeline(p, cfg, out, &mut s) {
                    s.error = Some(e.to_string());
                }
                s.wall_seconds = t0.elapsed().as_secs_f64();
                s.finish();
                s
            })
            .collect()
    });
    let mut config = serde_json::Map::new();
    for (k, v) in &cfg.echo {
        config.insert(k.clone(), Value::String(v.clone()));
    }
    let artifacts = sections.iter().flat_map(|s| s.artifacts.clone()).collect();
    let mut report = RunReport {
        subcommand: sub.name().to_string(),
        passed: sections.iter().all(|s| s.passed),
        config,
        warnings: cfg.warnings.clone(),
        workers: pool.current_num_threads(),
        sections,
        artifacts,
        wall_seconds: 0.0,
    };
    report.wall_seconds = start.elapsed().as_secs_f64();
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    if !report.passed {
        let lines = report.failed_checks().join("\n");
        std::fs::write(&marker, lines + "\n").map_err(io_err(&marker))?;
    }
    Ok(report)
}

type PipeResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

fn run_pipeline(p: Subcommand, cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    match p {
        Subcommand::Identities => identities(cfg, out, s),
        Subcommand::WeightsAudit => weights_audit(cfg, out, s),
        Subcommand::Solve => solve(cfg, out, s),
        Subcommand::CarlemanAudit => carleman_audit(cfg, out, s),
        Subcommand::Energy => energy(cfg, out, s),
        Subcommand::Observability => observability(cfg, out, s),
        Subcommand::Control => control(cfg, out, s),
        Subcommand::FullSuite => unreachable!("expanded by pipelines()"),
    }
}

fn emit(s: &mut Section, out: &Path, name: &str, csv: &Csv) -> PipeResult {
    let p: PathBuf = out.join(name);
    csv.write(&p)?;
    s.artifacts.push(p);
    Ok(())
}

/// `max / min` of positive values; infinite when the minimum vanishes.
fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    if values.is_empty() {
        1.0
    } else if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Initial state of the configured preset, scaled by `initial_value`.
pub fn initial_data(cfg: &ExperimentConfig, mesh: SpaceMesh) -> Vec<Complex64> {
    let base = match cfg.initial {
        InitialPreset::Constant => vec![Complex64::new(1.0, 0.0); mesh.m() + 2],
        InitialPreset::GaussianBump => gaussian_bump(mesh, cfg.bump_center, cfg.bump_width),
        InitialPreset::Random => random_closure(
            mesh,
            &mut seeded_rng(derive_seed(cfg.seed, stream::INITIAL)),
        ),
    };
    base.into_iter().map(|z| z * cfg.initial_value).collect()
}

fn identities(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    let t = cfg.t_final();
    let per_mesh: Vec<Result<Vec<(&'static str, f64)>, glc_core::grid::GridError>> = cfg
        .identity_meshes
        .par_iter()
        .enumerate()
        .map(|(i, &(m, n))| {
            let (smesh, tmesh) = build_meshes(m, n, t)?;
            let mut rng = seeded_rng(derive_seed(cfg.seed, stream::IDENTITIES + i as u64));
            let mut worst: Vec<(&'static str, f64)> = Vec::new();
            for _ in 0..cfg.identity_samples {
                for r in check_identities_with(smesh, tmesh, &mut rng)? {
                    match worst.iter_mut().find(|(name, _)| *name == r.name) {
                        Some(w) => w.1 = w.1.max(r.relative()),
                        None => worst.push((r.name, r.relative())),
                    }
                }
            }
            Ok(worst)
        })
        .collect();
    let mut csv = Csv::new(&["m", "n", "identity", "samples", "max_relative_residual"]);
    let mut summary = Vec::new();
    for (&(m, n), res) in cfg.identity_meshes.iter().zip(per_mesh) {
        let worst = res?;
        let mut top = 0.0f64;
        for (name, r) in &worst {
            csv.row(vec![
                m.into(),
                n.into(),
                (*name).into(),
                cfg.identity_samples.into(),
                (*r).into(),
            ]);
            top = top.max(*r);
        }
        s.check(Check::at_most(
            format!("identities_{m}x{n}"),
            top,
            IDENTITY_TOL,
            "worst relative residual",
        ));
        summary.push(json!({"m": m, "n": n, "worst_relative_residual": top}));
    }
    emit(s, out, "identities.csv", &csv)?;
    s.results = json!({ "meshes": summary, "samples": cfg.identity_samples });
    Ok(())
}

fn weights_audit(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    let x_star = cfg.sys.omega0.midpoint();
    let k = 1.0 + x_star * x_star + cfg.k_margin;
    let mut csv = Csv::new(&["lemma", "dx", "dt", "tau", "lambda", "ratio"]);
    let mut summary = Vec::new();
    for &tau in &cfg.tau_ladder {
        for &lambda in &cfg.lambda_ladder {
            let rows = audit_weight_lemmas(
                cfg.weight_params(tau, lambda, k),
                cfg.sys.omega0,
                &cfg.audit_family,
                cfg.t_final(),
            )?;
            for r in &rows {
                csv.row(vec![
                    r.lemma.name().into(),
                    r.dx.into(),
                    r.dt.into(),
                    r.tau.into(),
                    r.lambda.into(),
                    r.ratio.into(),
                ]);
            }
            let all_ok = rows.iter().all(|r| r.ratio.is_finite() && r.ratio >= 0.0);
            s.check(Check::flag(
                format!("audit_finite_tau{tau}_lambda{lambda}"),
                all_ok,
                "every ratio finite and non-negative",
            ));
            for lemma in WeightLemma::ALL {
                let r: Vec<f64> = rows
                    .iter()
                    .filter(|x| x.lemma == lemma)
                    .map(|x| x.ratio)
                    .collect();
                let (first, last) = (r[0], r[r.len() - 1]);
                if lemma == WeightLemma::Identity {
                    let worst = r.iter().copied().fold(0.0, f64::max);
                    s.check(Check::at_most(
                        format!("audit_{}_tau{tau}_lambda{lambda}", lemma.name()),
                        worst,
                        1e-10,
                        "rounding only",
                    ));
                } else {
                    let growth = if first > 0.0 {
                        last / first
                    } else if last == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    s.check(Check::at_most(
                        format!("audit_{}_tau{tau}_lambda{lambda}", lemma.name()),
                        growth,
                        AUDIT_SPREAD,
                        "finest ratio / coarsest ratio",
                    ));
                }
                summary.push(
                    json!({"lemma": lemma.name(), "tau": tau, "lambda": lambda, "ratios": r}),
                );
            }
        }
    }
    emit(s, out, "weights_audit.csv", &csv)?;
    s.results = json!({ "K": k, "lemmas": summary });
    Ok(())
}

fn solve(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    let (smesh, tmesh) = cfg.base_mesh();
    let solver = Solver::new(&cfg.sys, smesh, tmesh)?;
    let g = initial_data(cfg, smesh);
    let zero = ControlField::zeros(&cfg.sys.omega, &smesh, &tmesh);
    let traj = solver.forward(&g, &zero)?;
    let res = solver.forward_residual(&traj, Some(&zero), None)?;
    s.check(Check::at_most(
        "forward_residual",
        res.relative(),
        RESIDUAL_TOL,
        "max scheme residual / scale",
    ));

    // One random triple exercises the adjoint solve and the duality identity.
    let mut rng = seeded_rng(derive_seed(cfg.seed, stream::SOLVE));
    let v = ControlField::random(&cfg.sys.omega, &smesh, &tmesh, &mut rng);
    let q_t = random_closure(smesh, &mut rng);
    let q = solver.adjoint(&q_t)?;
    let ares = solver.adjoint_residual(&q, &q_t)?;
    s.check(Check::at_most(
        "adjoint_residual",
        ares.relative(),
        RESIDUAL_TOL,
        "max scheme residual / scale",
    ));
    let defect = solver.duality_defect(&g, &v, &q_t)?;
    s.check(Check::at_most(
        "duality_defect",
        defect.relative(),
        DUALITY_TOL,
        "relative duality defect",
    ));

    let mut csv = Csv::new(&["n", "j", "x", "t", "re_y", "im_y"]);
    for n in 0..=tmesh.n() {
        let t = tmesh.time(2 * n);
        for (j, y) in traj.y.slice(n).iter().enumerate() {
            csv.row(vec![
                n.into(),
                j.into(),
                smesh.x(j).into(),
                t.into(),
                y.re.into(),
                y.im.into(),
            ]);
        }
    }
    emit(s, out, "trajectory.csv", &csv)?;
    let dx = smesh.dx();
    s.results = json!({
        "m": smesh.m(), "n": tmesh.n(), "dx": dx, "dt": tmesh.dt(),
        "initial": cfg.initial.name(),
        "initial_norm": glc_core::grid::closure_norm_sq(dx, traj.initial()).sqrt(),
        "terminal_norm": glc_core::grid::closure_norm_sq(dx, traj.terminal()).sqrt(),
        "forward_residual": res, "adjoint_residual": ares, "duality_defect": defect,
    });
    Ok(())
}

#[derive(Debug, Error)]
#[error("refused: {0}")]
struct Refused(String);

fn carleman_audit(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    let t = cfg.t_final();
    let tau_min = cfg.tau0 * (t + t * t);
    if let Some(tau) = cfg.tau_ladder.iter().find(|&&x| x < tau_min) {
        return Err(Box::new(Refused(format!(
            "tau = {tau} is below tau0 (T + T^2) = {tau_min}"
        ))));
    }
    let mut cells = Vec::new();
    for &tau in &cfg.tau_ladder {
        for &lambda in &cfg.lambda_ladder {
            for &m in &cfg.carleman_levels {
                let (_, tmesh) = cfg.carleman_mesh(m, tau);
                cells.push(SweepCell {
                    tau,
                    lambda,
                    m,
                    n: tmesh.n(),
                });
            }
        }
    }
    let sweep = SweepConfig {
        sys: cfg.sys,
        base: cfg.weight_params(cfg.tau, cfg.lambda, 0.0),
        k_margin: cfg.k_margin,
        cells: cells.clone(),
        samples_per_cell: cfg.carleman_samples,
        seed: cfg.seed,
    };
    let table = sweep_carleman(&sweep)?;

    let mut header: Vec<String> = ["tau", "lambda", "m", "n", "dx", "dt", "sample_id", "kind"]
        .map(String::from)
        .to_vec();
    header.extend(LHS_LABELS.iter().map(|l| format!("lhs_{l}")));
    header.extend(RHS_LABELS.iter().map(|l| format!("rhs_{l}")));
    header.extend(["lhs_sum", "rhs_sum", "ratio"].map(String::from));
    let mut csv = Csv::new(&header);
    let mut terms_ok = true;
    for smp in &table.samples {
        let c = &table.cells[smp.cell];
        let b = &smp.breakdown;
        terms_ok &= b
            .lhs
            .iter()
            .chain(&b.rhs)
            .all(|x| x.is_finite() && *x >= 0.0)
            && b.ratio.is_finite();
        let mut row: Vec<Cell> = vec![
            c.cell.tau.into(),
            c.cell.lambda.into(),
            c.cell.m.into(),
            c.cell.n.into(),
            c.dx.into(),
            c.dt.into(),
            smp.sample_id.into(),
            smp.kind.name().into(),
        ];
        row.extend(b.lhs.iter().map(|&x| Cell::F(x)));
        row.extend(b.rhs.iter().map(|&x| Cell::F(x)));
        row.extend([b.lhs_sum.into(), b.rhs_sum.into(), b.ratio.into()]);
        csv.row(row);
    }
    emit(s, out, "carleman.csv", &csv)?;
    s.check(Check::flag(
        "carleman_terms_nonnegative",
        terms_ok,
        "every term finite and >= 0",
    ));

    let mut cells_csv = Csv::new(&[
        "tau",
        "lambda",
        "m",
        "n",
        "dx",
        "dt",
        "samples",
        "max_ratio",
        "space_small_margin",
        "time_small_margin",
        "skipped",
    ]);
    let mut summary = Vec::new();
    let mut groups: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for c in &table.cells {
        let reg = c.regime.expect("regime always evaluated");
        cells_csv.row(vec![
            c.cell.tau.into(),
            c.cell.lambda.into(),
            c.cell.m.into(),
            c.cell.n.into(),
            c.dx.into(),
            c.dt.into(),
            c.samples.into(),
            c.max_ratio.into(),
            reg.space_small.margin.into(),
            reg.time_small.margin.into(),
            c.skipped.is_some().into(),
        ]);
        s.check(Check::flag(
            format!(
                "carleman_in_regime_tau{}_lambda{}_m{}",
                c.cell.tau, c.cell.lambda, c.cell.m
            ),
            c.skipped.is_none(),
            c.skipped.clone().unwrap_or_default(),
        ));
        groups
            .entry((c.cell.tau.to_bits(), c.cell.lambda.to_bits()))
            .or_default()
            .push(c.max_ratio);
        summary.push(json!({
            "tau": c.cell.tau, "lambda": c.cell.lambda, "m": c.cell.m, "n": c.cell.n,
            "dx": c.dx, "dt": c.dt, "max_ratio": c.max_ratio, "samples": c.samples,
            "regime": c.regime, "skipped": c.skipped, "wall_seconds": c.wall_seconds,
        }));
    }
    emit(s, out, "carleman_cells.csv", &cells_csv)?;
    let mut stability = Vec::new();
    for ((tau, lambda), maxes) in &groups {
        let (tau, lambda) = (f64::from_bits(*tau), f64::from_bits(*lambda));
        let f = spread(maxes);
        s.check(Check::below(
            format!("carleman_stability_tau{tau}_lambda{lambda}"),
            f,
            CARLEMAN_SPREAD,
            "max / min of the per-level max ratio",
        ));
        stability.push(json!({"tau": tau, "lambda": lambda, "max_ratios": maxes, "spread": f}));
    }

    // Homogeneity: rescaled terminal data on the coarsest cell reproduce the ratios.
    if let (Some(cell), Some(_)) = (
        cells.first(),
        table.cells.first().filter(|c| c.skipped.is_none()),
    ) {
        let (smesh, tmesh) = build_meshes(cell.m, cell.n, t)?;
        let psi = build_psi(smesh, cfg.sys.omega0, cfg.c0)?;
        let params = cfg.weight_params(cell.tau, cell.lambda, psi.max() + cfg.k_margin);
        let w = build_weights(params, &psi, tmesh)?;
        let solver = Solver::new(&cfg.sys, smesh, tmesh)?;
        let k = Complex64::new(1.5, -2.5);
        let mut worst = 0.0f64;
        for smp in table
            .samples
            .iter()
            .filter(|x| x.cell == 0)
            .take(SampleKind::SWEEP.len())
        {
            let q_t: Vec<Complex64> = smp
                .kind
                .build(smesh, derive_seed(cfg.seed, smp.sample_id as u64))
                .into_iter()
                .map(|z| z * k)
                .collect();
            let b = evaluate_carleman(&solver.adjoint(&q_t)?, &w, &cfg.sys)?;
            let base = smp.breakdown.ratio;
            worst = worst.max((b.ratio - base).abs() / base);
        }
        s.check(Check::at_most(
            "carleman_homogeneity",
            worst,
            HOMOGENEITY_TOL,
            "relative ratio change under q -> (1.5-2.5i) q",
        ));
    }
    s.results = json!({ "cells": summary, "stability": stability });
    Ok(())
}

fn energy(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    let (smesh, tmesh) = cfg.base_mesh();
    let solver = Solver::new(&cfg.sys, smesh, tmesh)?;
    let reports: Vec<_> = (0..cfg.energy_samples)
        .into_par_iter()
        .map(|i| {
            let q_t = random_closure(
                smesh,
                &mut seeded_rng(derive_seed(cfg.seed, stream::ENERGY + i as u64)),
            );
            energy_check_with(&solver, &q_t)
        })
        .collect();
    let mut csv = Csv::new(&[
        "sample_id",
        "worst_step_margin",
        "worst_aggregate_margin",
        "worst_uniform_margin",
        "uniform_constant",
    ]);
    let (mut step, mut agg, mut uni) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut constant = 0.0;
    for (i, r) in reports.into_iter().enumerate() {
        let r = r?;
        csv.row(vec![
            i.into(),
            r.worst_step_margin.into(),
            r.worst_aggregate_margin.into(),
            r.worst_uniform_margin.into(),
            r.uniform_constant.into(),
        ]);
        step = step.min(r.worst_step_margin);
        agg = agg.min(r.worst_aggregate_margin);
        uni = uni.min(r.worst_uniform_margin);
        constant = r.uniform_constant;
    }
    emit(s, out, "energy.csv", &csv)?;
    s.check(Check::at_least(
        "energy_step_margin",
        step,
        -ENERGY_TOL,
        "worst per-step margin",
    ));
    s.check(Check::at_least(
        "energy_aggregate_margin",
        agg,
        -ENERGY_TOL,
        "worst margin with e^{4|c|t^n}",
    ));
    s.check(Check::at_least(
        "energy_uniform_margin",
        uni,
        -ENERGY_TOL,
        "worst margin with e^{4|c|T}",
    ));
    s.results = json!({
        "m": smesh.m(), "n": tmesh.n(), "samples": cfg.energy_samples,
        "worst_step_margin": step, "worst_aggregate_margin": agg, "worst_uniform_margin": uni,
        "uniform_constant": constant,
    });
    Ok(())
}

fn observability(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    let settings = cfg.observability_settings();
    let kinds = SampleKind::SWEEP;
    let levels: Vec<_> = cfg
        .observability_levels
        .par_iter()
        .map(|&m| -> Result<_, glc_core::Error> {
            let (smesh, tmesh) = cfg.observability_mesh(m);
            let solver = Solver::new(&cfg.sys, smesh, tmesh)?;
            let mut reps = Vec::new();
            let mut homog = 0.0f64;
            for sid in 0..cfg.observability_samples {
                let kind = kinds[sid % kinds.len()];
                let q_t = kind.build(
                    smesh,
                    derive_seed(cfg.seed, stream::OBSERVABILITY + sid as u64),
                );
                let r = observability_quotient_with(&solver, &q_t, &settings)?;
                if sid < kinds.len() {
                    for k in [Complex64::new(2.0, 0.0), Complex64::new(1.5, -2.5)] {
                        let scaled: Vec<Complex64> = q_t.iter().map(|z| z * k).collect();
                        let rs = observability_quotient_with(&solver, &scaled, &settings)?;
                        if r.quotient > 0.0 {
                            homog = homog.max((rs.quotient - r.quotient).abs() / r.quotient);
                        }
                    }
                }
                reps.push((sid, kind, r));
            }
            Ok((smesh, tmesh, reps, homog))
        })
        .collect();

    let mut csv = Csv::new(&[
        "m",
        "n",
        "dx",
        "dt",
        "sample_id",
        "kind",
        "observed",
        "window_energy",
        "terminal_energy",
        "penalty_phi",
        "quotient",
    ]);
    let mut lv = Csv::new(&[
        "m",
        "n",
        "dx",
        "dt",
        "c_obs_empirical",
        "penalty_phi",
        "dt_mesh_bound",
        "dt_reaction_bound",
        "dt_ok",
        "dx_tilde",
        "dx_ok",
        "k0_upper",
        "k0_lower",
    ]);
    let mut summary = Vec::new();
    for level in levels {
        let (smesh, tmesh, reps, homog) = level?;
        let (m, n, dx, dt) = (smesh.m(), tmesh.n(), smesh.dx(), tmesh.dt());
        let mut c_obs = 0.0f64;
        let mut finite = true;
        for (sid, kind, r) in &reps {
            csv.row(vec![
                m.into(),
                n.into(),
                dx.into(),
                dt.into(),
                (*sid).into(),
                kind.name().into(),
                r.observed.into(),
                r.window_energy.into(),
                r.terminal_energy.into(),
                r.penalty_phi.into(),
                r.quotient.into(),
            ]);
            finite &= r.quotient.is_finite() && r.quotient >= 0.0;
            c_obs = c_obs.max(r.quotient);
        }
        let reg = reps[0].2.regime;
        let (k0u, k0l) = (reps[0].2.k0_upper, reps[0].2.k0_lower);
        lv.row(vec![
            m.into(),
            n.into(),
            dx.into(),
            dt.into(),
            c_obs.into(),
            reps[0].2.penalty_phi.into(),
            reg.dt_mesh_bound.into(),
            reg.dt_reaction_bound.into(),
            reg.dt_ok.into(),
            reg.dx_tilde.into(),
            reg.dx_ok.into(),
            k0u.into(),
            k0l.into(),
        ]);
        // Independent recomputation of the time-step flag.
        let t = cfg.t_final();
        let rho = cfg.sys.zeroth_order_bound();
        let react = if rho == 0.0 {
            f64::INFINITY
        } else {
            0.25 / rho
        };
        let expect = dt <= (dx.powf(cfg.vartheta) / (t * t)).min(react);
        s.check(Check::flag(
            format!("observability_finite_m{m}"),
            finite && c_obs.is_finite() && c_obs > 0.0,
            "C_obs finite and positive",
        ));
        s.check(Check::at_most(
            format!("observability_homogeneity_m{m}"),
            homog,
            HOMOGENEITY_TOL,
            "relative quotient change under scaling",
        ));
        s.check(Check::flag(
            format!("observability_flag_consistent_m{m}"),
            expect == reg.dt_ok,
            "dt flag matches direct evaluation",
        ));
        s.check(Check::flag(
            format!("observability_dt_in_regime_m{m}"),
            reg.dt_ok,
            "dt <= min(T^-2 dx^vartheta, 1/(4 rho))",
        ));
        summary.push(json!({
            "m": m, "n": n, "dx": dx, "dt": dt, "c_obs_empirical": c_obs, "regime": reg,
            "k0_upper": k0u, "k0_lower": k0l, "homogeneity": homog,
            "reports": reps.iter().map(|(_, k, r)| json!({"kind": k.name(), "report": r})).collect::<Vec<_>>(),
        }));
    }
    emit(s, out, "observability.csv", &csv)?;
    emit(s, out, "observability_levels.csv", &lv)?;
    let (smesh, tmesh) = cfg.base_mesh();
    let base = glc_core::control::observability_regime(&cfg.sys, smesh, tmesh, &settings);
    s.results = json!({ "levels": summary, "base_mesh_regime": base });
    Ok(())
}

fn control(cfg: &ExperimentConfig, out: &Path, s: &mut Section) -> PipeResult {
    // Penalty ladder on the base mesh.
    let (smesh, tmesh) = cfg.base_mesh();
    let solver = Solver::new(&cfg.sys, smesh, tmesh)?;
    let g = initial_data(cfg, smesh);
    let ladder: Vec<_> = cfg
        .epsilon_ladder
        .par_iter()
        .map(|&eps| hum_solve_with(&solver, &g, eps, cfg.cg_tol, cfg.cg_maxiter))
        .collect();
    let mut csv = Csv::new(&[
        "epsilon",
        "terminal_norm",
        "control_norm",
        "cost",
        "certificate_lhs",
        "certificate_rhs",
        "certificate_margin",
        "cg_iterations",
        "cg_relative_residual",
        "optimality_residual",
    ]);
    let mut hums = Vec::new();
    for h in ladder {
        let h = h?;
        let (lhs, rhs) = certificate(&h);
        csv.row(vec![
            h.epsilon.into(),
            h.terminal_norm.into(),
            h.control_norm.into(),
            h.cost.into(),
            lhs.into(),
            rhs.into(),
            (rhs - lhs).into(),
            h.cg_iterations.into(),
            h.cg_relative_residual.into(),
            h.optimality_residual.into(),
        ]);
        let scale = lhs.max(rhs).max(f64::MIN_POSITIVE);
        s.check(Check::at_least(
            format!("certificate_eps{}", h.epsilon),
            (rhs - lhs) / scale,
            -CERTIFICATE_TOL,
            "(2 eps J - |y^N|^2) / scale",
        ));
        s.check(Check::at_most(
            format!("cg_residual_eps{}", h.epsilon),
            h.cg_relative_residual,
            cfg.cg_tol,
            "relative CG residual",
        ));
        hums.push(h);
    }
    emit(s, out, "control_ladder.csv", &csv)?;
    let slack = 1.0 + 1e-12;
    let y_mono = hums
        .windows(2)
        .all(|w| w[1].terminal_norm <= w[0].terminal_norm * slack);
    let v_mono = hums
        .windows(2)
        .all(|w| w[1].control_norm * slack >= w[0].control_norm);
    s.check(Check::flag(
        "ladder_terminal_nonincreasing",
        y_mono,
        "|y^N| down the epsilon ladder",
    ));
    s.check(Check::flag(
        "ladder_control_nondecreasing",
        v_mono,
        "|v| down the epsilon ladder",
    ));

    // Refinement with epsilon = penalty_phi(dx).
    let settings = cfg.observability_settings();
    let levels: Vec<_> = cfg
        .control_levels
        .par_iter()
        .map(|&m| -> Result<_, glc_core::Error> {
            let (smesh, tmesh) = cfg.observability_mesh(m);
            let solver = Solver::new(&cfg.sys, smesh, tmesh)?;
            let g = initial_data(cfg, smesh);
            let rep = verify_relaxed_controllability_with(
                &solver,
                &g,
                cfg.vartheta,
                cfg.c_pen,
                cfg.cg_tol,
                cfg.cg_maxiter,
            )?;
            let reg = glc_core::control::observability_regime(&cfg.sys, smesh, tmesh, &settings);
            Ok((smesh.m(), tmesh.n(), rep, reg))
        })
        .collect();
    let mut rc = Csv::new(&[
        "m",
        "n",
        "dx",
        "dt",
        "epsilon",
        "terminal_norm",
        "control_norm",
        "terminal_constant",
        "control_constant",
        "certificate_margin",
        "cg_iterations",
    ]);
    let (mut tcs, mut ccs) = (Vec::new(), Vec::new());
    let mut refinement = Vec::new();
    for l in levels {
        let (m, n, rep, reg) = l?;
        let na = f64::NAN;
        rc.row(vec![
            m.into(),
            n.into(),
            rep.dx.into(),
            rep.dt.into(),
            rep.epsilon.into(),
            rep.hum.terminal_norm.into(),
            rep.hum.control_norm.into(),
            rep.terminal_constant.unwrap_or(na).into(),
            rep.control_constant.unwrap_or(na).into(),
            rep.certificate_margin.into(),
            rep.hum.cg_iterations.into(),
        ]);
        let scale = rep
            .certificate_lhs
            .max(rep.certificate_rhs)
            .max(f64::MIN_POSITIVE);
        s.check(Check::at_least(
            format!("certificate_m{m}"),
            rep.certificate_margin / scale,
            -CERTIFICATE_TOL,
            "(2 eps J - |y^N|^2) / scale",
        ));
        s.check(Check::flag(
            format!("control_dt_in_regime_m{m}"),
            reg.dt_ok,
            "dt <= min(T^-2 dx^vartheta, 1/(4 rho))",
        ));
        if let (Some(tc), Some(cc)) = (rep.terminal_constant, rep.control_constant) {
            tcs.push(tc);
            ccs.push(cc);
        }
        refinement.push(json!({"m": m, "n": n, "report": rep, "regime": reg}));
    }
    emit(s, out, "control_refinement.csv", &rc)?;
    if tcs.len() == cfg.control_levels.len() {
        let (ft, fc) = (spread(&tcs), spread(&ccs));
        s.check(Check::below(
            "terminal_constant_spread",
            ft,
            TERMINAL_SPREAD,
            "max / min of |y^N| / (sqrt(eps) |g|)",
        ));
        s.check(Check::below(
            "control_constant_spread",
            fc,
            CONTROL_SPREAD,
            "max / min of |v| / |g|",
        ));
    }
    s.results = json!({
        "ladder": hums,
        "refinement": refinement,
        "terminal_constants": tcs,
        "control_constants": ccs,
    });
    Ok(())
}

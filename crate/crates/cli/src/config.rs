//! Line-oriented `key = value` experiment configuration.
//!
//! Files hold one assignment per line; `#` starts a comment. Overrides given
//! with `--set key=value` are applied after the file. Unknown keys, repeated
//! keys and out-of-range values are rejected before any computation runs.

use std::collections::BTreeMap;
use std::path::Path;

use glc_core::control::ObservabilitySettings;
use glc_core::dynamics::SystemParams;
use glc_core::grid::{build_meshes, Interval, SpaceMesh, TimeMesh};
use glc_core::weights::{build_psi, validate_regime, WeightParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given more than once")]
    Duplicate(String),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Initial data presets shared by `solve` and `control`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPreset {
    Constant,
    GaussianBump,
    Random,
}

impl InitialPreset {
    pub fn name(self) -> &'static str {
        match self {
            InitialPreset::Constant => "constant",
            InitialPreset::GaussianBump => "gaussian-bump",
            InitialPreset::Random => "random",
        }
    }
}

/// Every recognised key with its default, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("alpha", "1"),
    ("beta", "1"),
    ("c", "-3"),
    ("gamma", "-2"),
    ("T", "0.5"),
    ("M", "31"),
    ("N", "64"),
    ("lambda", "2"),
    ("tau", ""),
    ("tau_ladder", ""),
    ("lambda_ladder", ""),
    ("delta", "0.25"),
    ("k_margin", "0.1"),
    ("c0", "0.05"),
    ("epsilon0", "0.5"),
    ("tau0", "1"),
    ("omega", "0.2,0.8"),
    ("omega0", "0.25,0.75"),
    ("vartheta", "4"),
    ("c_pen", "0.05"),
    ("dx_hat", "1"),
    ("dx_tilde_const", "1"),
    ("cg_tol", "1e-10"),
    ("cg_maxiter", "2000"),
    ("epsilon_ladder", "1e-4,1e-6,1e-8"),
    ("initial", "gaussian-bump"),
    ("initial_value", "1"),
    ("bump_center", "0.5"),
    ("bump_width", "0.1"),
    ("seed", "1"),
    ("identity_samples", "100"),
    ("identity_meshes", "4x5,4x32,17x5,17x32,64x5,64x32"),
    ("energy_samples", "100"),
    ("carleman_samples", "20"),
    ("observability_samples", "20"),
    ("audit_family", "31x256,63x1024,127x4096"),
    ("carleman_levels", "31,63,127"),
    ("observability_levels", "7,15"),
    ("control_levels", "7,15,31"),
];

/// Largest base mesh considered desk scale.
pub const DESK_M: usize = 128;
pub const DESK_N: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sys: SystemParams,
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub tau: f64,
    pub tau_ladder: Vec<f64>,
    pub lambda_ladder: Vec<f64>,
    pub delta: f64,
    pub k_margin: f64,
    pub c0: f64,
    pub epsilon0: f64,
    pub tau0: f64,
    pub vartheta: f64,
    pub c_pen: f64,
    pub dx_hat: f64,
    pub dx_tilde_const: f64,
    pub cg_tol: f64,
    pub cg_maxiter: usize,
    pub epsilon_ladder: Vec<f64>,
    pub initial: InitialPreset,
    pub initial_value: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub seed: u64,
    pub identity_samples: usize,
    pub identity_meshes: Vec<(usize, usize)>,
    pub energy_samples: usize,
    pub carleman_samples: usize,
    pub observability_samples: usize,
    pub audit_family: Vec<(usize, usize)>,
    pub carleman_levels: Vec<usize>,
    pub observability_levels: Vec<usize>,
    pub control_levels: Vec<usize>,
    /// Canonical `key = value` echo with defaults filled.
    pub echo: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Splits `text` into assignments.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: line.to_string(),
        })?;
        insert(&mut out, k.trim(), v.trim())?;
    }
    Ok(out)
}

fn insert(map: &mut BTreeMap<String, String>, k: &str, v: &str) -> Result<(), ConfigError> {
    if !KEYS.iter().any(|(name, _)| *name == k) {
        return Err(ConfigError::UnknownKey(k.to_string()));
    }
    if map.insert(k.to_string(), v.to_string()).is_some() {
        return Err(ConfigError::Duplicate(k.to_string()));
    }
    Ok(())
}

/// Reads the optional file, applies overrides and validates.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut map = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?;
            parse_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
        let k = k.trim();
        if !KEYS.iter().any(|(name, _)| *name == k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    from_map(&map)
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> &str {
        match self.map.get(key) {
            Some(v) => v.as_str(),
            None => KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, d)| *d)
                .unwrap_or(""),
        }
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self
            .raw(key)
            .parse()
            .map_err(|_| invalid(key, format!("`{}` is not a number", self.raw(key))))?;
        if !v.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
        Ok(v)
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.raw(key).parse().map_err(|_| {
            invalid(
                key,
                format!("`{}` is not a non-negative integer", self.raw(key)),
            )
        })
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        split_list(self.raw(key))
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid(key, format!("`{s}` is not a finite number")))
            })
            .collect()
    }

    fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        split_list(self.raw(key))
            .map(|s| {
                s.parse()
                    .map_err(|_| invalid(key, format!("`{s}` is not an integer")))
            })
            .collect()
    }

    fn mesh_list(&self, key: &str) -> Result<Vec<(usize, usize)>, ConfigError> {
        split_list(self.raw(key))
            .map(|s| {
                let (a, b) = s
                    .split_once('x')
                    .ok_or_else(|| invalid(key, format!("`{s}` is not MxN")))?;
                let m = a
                    .trim()
                    .parse()
                    .map_err(|_| invalid(key, format!("`{s}` is not MxN")))?;
                let n = b
                    .trim()
                    .parse()
                    .map_err(|_| invalid(key, format!("`{s}` is not MxN")))?;
                Ok((m, n))
            })
            .collect()
    }

    fn interval(&self, key: &str) -> Result<Interval, ConfigError> {
        let v = self.f64_list(key)?;
        if v.len() != 2 {
            return Err(invalid(key, "expected two endpoints `a,b`"));
        }
        Interval::new(v[0], v[1]).map_err(|e| invalid(key, e.to_string()))
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn fmt_meshes(v: &[(usize, usize)]) -> String {
    v.iter()
        .map(|(m, n)| format!("{m}x{n}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn from_map(map: &BTreeMap<String, String>) -> Result<ExperimentConfig, ConfigError> {
    let r = Reader { map };
    let t_final = r.f64("T")?;
    if !(t_final > 0.0) {
        return Err(invalid("T", "must be positive"));
    }
    let sys = SystemParams {
        alpha: r.f64("alpha")?,
        beta: r.f64("beta")?,
        c: r.f64("c")?,
        gamma: r.f64("gamma")?,
        t_final,
        omega: r.interval("omega")?,
        omega0: r.interval("omega0")?,
    };
    if !(sys.alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(sys.omega.a > 0.0 && sys.omega.b < 1.0) {
        return Err(invalid("omega", "must lie inside (0, 1)"));
    }
    if !sys.omega0.compactly_inside(&sys.omega) {
        return Err(invalid("omega0", "must be compactly contained in omega"));
    }

    let m = r.usize("M")?;
    let n = r.usize("N")?;
    if m < 2 {
        return Err(invalid("M", "must be at least 2"));
    }
    if n < 2 {
        return Err(invalid("N", "must be at least 2"));
    }
    let (smesh, tmesh) = build_meshes(m, n, t_final).map_err(|e| invalid("M", e.to_string()))?;
    if sys.check_step(tmesh.dt()).is_err() {
        return Err(invalid(
            "N",
            "dt max(|c|, |gamma|) <= 1/4 is violated on the base mesh",
        ));
    }

    let lambda = r.f64("lambda")?;
    let delta = r.f64("delta")?;
    let k_margin = r.f64("k_margin")?;
    let c0 = r.f64("c0")?;
    let epsilon0 = r.f64("epsilon0")?;
    let tau0 = r.f64("tau0")?;
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(invalid("delta", "delta must lie in (0, 1/2]"));
    }
    if !(lambda >= 1.0) {
        return Err(invalid("lambda", "must be >= 1"));
    }
    if !(k_margin > 0.0) {
        return Err(invalid("k_margin", "must be positive"));
    }
    if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
        return Err(invalid("epsilon0", "must lie in (0, 1)"));
    }
    if !(tau0 >= 1.0) {
        return Err(invalid("tau0", "must be >= 1"));
    }
    if !(c0 > 0.0) {
        return Err(invalid("c0", "must be positive"));
    }
    build_psi(smesh, sys.omega0, c0).map_err(|e| invalid("c0", e.to_string()))?;
    let tau_min = tau0 * (t_final + t_final * t_final);
    let tau = if r.raw("tau").is_empty() {
        tau_min
    } else {
        r.f64("tau")?
    };
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let mut tau_ladder = r.f64_list("tau_ladder")?;
    if tau_ladder.is_empty() {
        tau_ladder.push(tau);
    }
    let mut lambda_ladder = r.f64_list("lambda_ladder")?;
    if lambda_ladder.is_empty() {
        lambda_ladder.push(lambda);
    }
    if tau_ladder.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("tau_ladder", "entries must be positive"));
    }
    if lambda_ladder.iter().any(|&l| !(l >= 1.0)) {
        return Err(invalid("lambda_ladder", "entries must be >= 1"));
    }
    let mut warnings = Vec::new();
    for &t in &tau_ladder {
        if t < tau_min {
            warnings.push(format!(
                "tau = {t} is below tau0 (T + T^2) = {tau_min}; carleman-audit will refuse to run"
            ));
        }
    }

    let vartheta = r.f64("vartheta")?;
    let c_pen = r.f64("c_pen")?;
    let dx_hat = r.f64("dx_hat")?;
    let dx_tilde_const = r.f64("dx_tilde_const")?;
    if !(vartheta >= 1.0) {
        return Err(invalid("vartheta", "must be >= 1"));
    }
    if !(c_pen > 0.0) {
        return Err(invalid("c_pen", "must be positive"));
    }
    if !(dx_hat > 0.0) {
        return Err(invalid("dx_hat", "must be positive"));
    }
    if !(dx_tilde_const > 0.0) {
        return Err(invalid("dx_tilde_const", "must be positive"));
    }
    let cg_tol = r.f64("cg_tol")?;
    if !(cg_tol > 0.0 && cg_tol < 1.0) {
        return Err(invalid("cg_tol", "must lie in (0, 1)"));
    }
    let cg_maxiter = r.usize("cg_maxiter")?;
    if cg_maxiter == 0 {
        return Err(invalid("cg_maxiter", "must be at least 1"));
    }
    let epsilon_ladder = r.f64_list("epsilon_ladder")?;
    if epsilon_ladder.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("epsilon_ladder", "entries must be positive"));
    }
    if epsilon_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(
            "epsilon_ladder",
            "entries must be strictly decreasing",
        ));
    }

    let initial = match r.raw("initial") {
        "constant" => InitialPreset::Constant,
        "gaussian-bump" => InitialPreset::GaussianBump,
        "random" => InitialPreset::Random,
        other => {
            return Err(invalid(
                "initial",
                format!("`{other}` is not one of constant, gaussian-bump, random"),
            ))
        }
    };
    let initial_value = r.f64("initial_value")?;
    let bump_center = r.f64("bump_center")?;
    let bump_width = r.f64("bump_width")?;
    if !(bump_width > 0.0) {
        return Err(invalid("bump_width", "must be positive"));
    }
    let seed: u64 = r
        .raw("seed")
        .parse()
        .map_err(|_| invalid("seed", "must be a non-negative 64-bit integer"))?;

    let identity_samples = r.usize("identity_samples")?;
    let identity_meshes = r.mesh_list("identity_meshes")?;
    let energy_samples = r.usize("energy_samples")?;
    let carleman_samples = r.usize("carleman_samples")?;
    let observability_samples = r.usize("observability_samples")?;
    for (key, v) in [
        ("identity_samples", identity_samples),
        ("energy_samples", energy_samples),
        ("carleman_samples", carleman_samples),
        ("observability_samples", observability_samples),
    ] {
        if v == 0 {
            return Err(invalid(key, "must be at least 1"));
        }
    }
    for &(mm, nn) in &identity_meshes {
        if mm < 2 || nn < 2 {
            return Err(invalid(
                "identity_meshes",
                "every mesh needs M >= 2 and N >= 2",
            ));
        }
    }

    let audit_family = r.mesh_list("audit_family")?;
    let carleman_levels = r.usize_list("carleman_levels")?;
    let observability_levels = r.usize_list("observability_levels")?;
    let control_levels = r.usize_list("control_levels")?;
    for (key, levels) in [
        ("carleman_levels", &carleman_levels),
        ("observability_levels", &observability_levels),
        ("control_levels", &control_levels),
    ] {
        if levels.iter().any(|&l| l < 2) {
            return Err(invalid(key, "every level needs M >= 2"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(key, "levels must be strictly increasing"));
        }
    }
    if audit_family.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid(
            "audit_family",
            "meshes must refine (M strictly increasing)",
        ));
    }

    let mut cfg = ExperimentConfig {
        sys,
        m,
        n,
        lambda,
        tau,
        tau_ladder,
        lambda_ladder,
        delta,
        k_margin,
        c0,
        epsilon0,
        tau0,
        vartheta,
        c_pen,
        dx_hat,
        dx_tilde_const,
        cg_tol,
        cg_maxiter,
        epsilon_ladder,
        initial,
        initial_value,
        bump_center,
        bump_width,
        seed,
        identity_samples,
        identity_meshes,
        energy_samples,
        carleman_samples,
        observability_samples,
        audit_family,
        carleman_levels,
        observability_levels,
        control_levels,
        echo: Vec::new(),
        warnings,
    };

    // Refinement families must sit in the regimes their pipelines assume.
    for &(mm, nn) in &cfg.audit_family {
        let (s, t) =
            build_meshes(mm, nn, t_final).map_err(|e| invalid("audit_family", e.to_string()))?;
        for &tau in &cfg.tau_ladder {
            let rep = validate_regime(&cfg.weight_params(tau, cfg.lambda, 0.0), s, t);
            if !rep.lemmas_ok() {
                return Err(invalid(
                    "audit_family",
                    format!("{mm}x{nn} violates tau dx/(delta T^2) <= 1 or tau dt/(delta^2 T^3) <= 1/2 at tau = {tau}"),
                ));
            }
        }
    }
    for &lm in &cfg.carleman_levels {
        for &tau in &cfg.tau_ladder {
            let (s, _) = cfg.carleman_mesh(lm, tau);
            if tau * s.dx() / (delta * t_final * t_final) > epsilon0 {
                return Err(invalid(
                    "carleman_levels",
                    format!("M = {lm} violates tau dx/(delta T^2) <= epsilon0 at tau = {tau}"),
                ));
            }
        }
    }
    if m > DESK_M || n > DESK_N {
        cfg.warnings.push(format!(
            "base mesh {m}x{n} exceeds desk scale {DESK_M}x{DESK_N}"
        ));
    }
    cfg.echo = cfg.canonical_echo();
    Ok(cfg)
}

fn ceil_usize(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        x.ceil() as usize
    }
}

impl ExperimentConfig {
    pub fn t_final(&self) -> f64 {
        self.sys.t_final
    }

    pub fn base_mesh(&self) -> (SpaceMesh, TimeMesh) {
        build_meshes(self.m, self.n, self.t_final()).expect("validated at load")
    }

    /// `K` is filled per mesh from `k_margin`.
    pub fn weight_params(&self, tau: f64, lambda: f64, k: f64) -> WeightParams {
        WeightParams {
            lambda,
            tau,
            delta: self.delta,
            k,
            c0: self.c0,
            epsilon0: self.epsilon0,
            tau0: self.tau0,
        }
    }

    pub fn observability_settings(&self) -> ObservabilitySettings {
        ObservabilitySettings {
            vartheta: self.vartheta,
            c_pen: self.c_pen,
            dx_hat: self.dx_hat,
            dx_tilde_const: self.dx_tilde_const,
            lambda: self.lambda,
            k_margin: self.k_margin,
            c0: self.c0,
        }
    }

    fn min_steps_for_reaction(&self) -> usize {
        // Δt max(|c|, |γ|) ≤ 1/4.
        ceil_usize(4.0 * self.sys.zeroth_order_bound() * self.t_final()).max(2)
    }

    /// Smallest `N` with `τ⁴Δt/(δ⁴T⁶) ≤ ε0` and `Δt ≤ 1` at level `m`.
    pub fn carleman_mesh(&self, m: usize, tau: f64) -> (SpaceMesh, TimeMesh) {
        let t = self.t_final();
        let d = self.delta;
        let mut n = ceil_usize(tau.powi(4) / (self.epsilon0 * d.powi(4) * t.powi(5)))
            .max(ceil_usize(t))
            .max(self.min_steps_for_reaction());
        loop {
            let (s, tm) = build_meshes(m, n, t).expect("level validated");
            let rep = validate_regime(&self.weight_params(tau, self.lambda, 0.0), s, tm);
            if rep.time_small.pass && rep.dt_bounded.pass {
                return (s, tm);
            }
            n += 1;
        }
    }

    /// Smallest `N` with `Δt ≤ min(T⁻²Δx^ϑ, (4 max(|c|,|γ|))⁻¹)` at level `m`.
    pub fn observability_mesh(&self, m: usize) -> (SpaceMesh, TimeMesh) {
        let t = self.t_final();
        let dx = 1.0 / (m as f64 + 1.0);
        let mut n =
            ceil_usize(t.powi(3) / dx.powf(self.vartheta)).max(self.min_steps_for_reaction());
        let settings = self.observability_settings();
        loop {
            let (s, tm) = build_meshes(m, n, t).expect("level validated");
            let reg = glc_core::control::observability_regime(&self.sys, s, tm, &settings);
            if reg.dt_ok && self.sys.check_step(tm.dt()).is_ok() {
                return (s, tm);
            }
            n += 1;
        }
    }

    fn canonical_echo(&self) -> Vec<(String, String)> {
        let s = &self.sys;
        let v: Vec<(&str, String)> = vec![
            ("alpha", s.alpha.to_string()),
            ("beta", s.beta.to_string()),
            ("c", s.c.to_string()),
            ("gamma", s.gamma.to_string()),
            ("T", s.t_final.to_string()),
            ("M", self.m.to_string()),
            ("N", self.n.to_string()),
            ("lambda", self.lambda.to_string()),
            ("tau", self.tau.to_string()),
            ("tau_ladder", fmt_list(&self.tau_ladder)),
            ("lambda_ladder", fmt_list(&self.lambda_ladder)),
            ("delta", self.delta.to_string()),
            ("k_margin", self.k_margin.to_string()),
            ("c0", self.c0.to_string()),
            ("epsilon0", self.epsilon0.to_string()),
            ("tau0", self.tau0.to_string()),
            ("omega", format!("{},{}", s.omega.a, s.omega.b)),
            ("omega0", format!("{},{}", s.omega0.a, s.omega0.b)),
            ("vartheta", self.vartheta.to_string()),
            ("c_pen", self.c_pen.to_string()),
            ("dx_hat", self.dx_hat.to_string()),
            ("dx_tilde_const", self.dx_tilde_const.to_string()),
            ("cg_tol", self.cg_tol.to_string()),
            ("cg_maxiter", self.cg_maxiter.to_string()),
            ("epsilon_ladder", fmt_list(&self.epsilon_ladder)),
            ("initial", self.initial.name().to_string()),
            ("initial_value", self.initial_value.to_string()),
            ("bump_center", self.bump_center.to_string()),
            ("bump_width", self.bump_width.to_string()),
            ("seed", self.seed.to_string()),
            ("identity_samples", self.identity_samples.to_string()),
            ("identity_meshes", fmt_meshes(&self.identity_meshes)),
            ("energy_samples", self.energy_samples.to_string()),
            ("carleman_samples", self.carleman_samples.to_string()),
            (
                "observability_samples",
                self.observability_samples.to_string(),
            ),
            ("audit_family", fmt_meshes(&self.audit_family)),
            ("carleman_levels", fmt_list(&self.carleman_levels)),
            ("observability_levels", fmt_list(&self.observability_levels)),
            ("control_levels", fmt_list(&self.control_levels)),
        ];
        v.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        from_map(&parse_text(text)?)
    }

    #[test]
    fn defaults_fill_every_key() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.echo.len(), KEYS.len());
        for ((k, _), (e, _)) in KEYS.iter().zip(&cfg.echo) {
            assert_eq!(k, e);
        }
        assert_eq!(cfg.tau, 0.75);
        assert_eq!(cfg.tau_ladder, vec![0.75]);
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse("# header\n\nM = 15  # trailing\nseed=7\n").unwrap();
        assert_eq!((cfg.m, cfg.seed), (15, 7));
    }

    #[test]
    fn rejections_name_the_key() {
        let e = parse("delta = 0.7").unwrap_err().to_string();
        assert!(e.contains("delta must lie in (0, 1/2]"), "{e}");
        assert!(matches!(parse("bogus = 1"), Err(ConfigError::UnknownKey(k)) if k == "bogus"));
        assert!(matches!(
            parse("M = 3\nM = 4"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(
            parse("just text"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        let e = parse("N = 2\nc = -300").unwrap_err().to_string();
        assert!(e.starts_with("N:"), "{e}");
        let e = parse("omega0 = 0.1,0.9").unwrap_err().to_string();
        assert!(e.starts_with("omega0:"), "{e}");
        let e = parse("initial = zero").unwrap_err().to_string();
        assert!(e.starts_with("initial:"), "{e}");
        let e = parse("epsilon_ladder = 1e-6,1e-4").unwrap_err().to_string();
        assert!(e.starts_with("epsilon_ladder:"), "{e}");
        let e = parse("carleman_levels = 3").unwrap_err().to_string();
        assert!(e.starts_with("carleman_levels:"), "{e}");
    }

    #[test]
    fn small_tau_is_a_warning() {
        let cfg = parse("tau = 0.5").unwrap();
        assert_eq!(cfg.warnings.len(), 1);
        assert!(cfg.warnings[0].contains("below tau0"));
    }

    #[test]
    fn overrides_apply_after_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.cfg");
        std::fs::write(&p, "M = 15\n").unwrap();
        let cfg = load(Some(&p), &["M=63".into(), "seed = 3".into()]).unwrap();
        assert_eq!((cfg.m, cfg.seed), (63, 3));
        assert!(matches!(
            load(Some(&p), &["nope=1".into()]),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            load(Some(&p), &["M".into()]),
            Err(ConfigError::BadOverride(_))
        ));
    }

    #[test]
    fn auto_meshes_meet_their_regimes() {
        let cfg = parse("").unwrap();
        let (s, t) = cfg.carleman_mesh(31, cfg.tau);
        let rep = validate_regime(&cfg.weight_params(cfg.tau, 2.0, 0.0), s, t);
        assert!(rep.time_small.pass && rep.space_small.pass);
        let (_, t_less) = build_meshes(31, t.n() - 1, cfg.t_final()).unwrap();
        assert!(
            !validate_regime(&cfg.weight_params(cfg.tau, 2.0, 0.0), s, t_less)
                .time_small
                .pass
        );
        assert_eq!(t.n(), 5184);
        let (_, t) = cfg.observability_mesh(7);
        assert_eq!(t.n(), 512);
    }
}

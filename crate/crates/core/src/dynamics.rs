//! Implicit forward and adjoint solvers for the controlled system with
//! dynamic boundary conditions.
//!
//! With `a = α + iβ`, `b = c + iγ` and `h = Δx`, the spatial operator `L` on
//! the closure `ℳ̄` has rows
//!
//! ```text
//! j = 0      : b y_0     − a (y_1 − y_0) / h
//! 1 ≤ j ≤ M  : b y_j     − a (y_{j+1} − 2y_j + y_{j−1}) / h²
//! j = M + 1  : b y_{M+1} + a (y_{M+1} − y_M) / h
//! ```
//!
//! and one backward-Euler step reads `(I + ΔtL) y^{n+1} = y^n + Δt 1_ω v^{n+1/2}`.
//! Under the weight `W = diag(1, h, …, h, 1)` the product `W L` equals
//! `b W + (a/h) G` with `G` the symmetric path-graph Laplacian, so the adjoint
//! `L†` (conjugate coefficients) is the exact conjugate transpose of `L` in
//! `⟨·,·⟩_w` and the discrete duality identity holds to roundoff.

use crate::grid::{
    closure_inner, closure_norm_sq, complex_gaussian, GridFn, Interval, SpaceMesh, SpaceSet,
    TimeMesh, TimeSet,
};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid system parameter: {0}")]
    InvalidParameter(String),
    #[error("time step outside the solver regime: dt * max(|c|, |gamma|) = {value} > 1/4")]
    Regime { value: f64 },
    #[error("zero pivot in tridiagonal elimination at row {row}")]
    ZeroPivot { row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// Physical and geometric constants of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub gamma: f64,
    pub t_final: f64,
    /// Control window.
    pub omega: Interval,
    /// Inner observation window, compactly inside `omega`.
    pub omega0: Interval,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DynamicsError::InvalidParameter(m));
        if !(self.alpha > 0.0) {
            return bad(format!("alpha = {} must be positive", self.alpha));
        }
        for (name, v) in [("beta", self.beta), ("c", self.c), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.t_final > 0.0) {
            return bad(format!("T = {} must be positive", self.t_final));
        }
        if !(self.omega.a > 0.0 && self.omega.b < 1.0) {
            return bad("omega must lie inside (0, 1)".into());
        }
        if !self.omega0.compactly_inside(&self.omega) {
            return bad("omega0 must be compactly contained in omega".into());
        }
        Ok(())
    }

    /// `max(|c|, |γ|)`.
    pub fn zeroth_order_bound(&self) -> f64 {
        self.c.abs().max(self.gamma.abs())
    }

    pub fn diffusion(&self, dir: Direction) -> Complex64 {
        match dir {
            Direction::Forward => Complex64::new(self.alpha, self.beta),
            Direction::Adjoint => Complex64::new(self.alpha, -self.beta),
        }
    }

    pub fn reaction(&self, dir: Direction) -> Complex64 {
        match dir {
            Direction::Forward => Complex64::new(self.c, self.gamma),
            Direction::Adjoint => Complex64::new(self.c, -self.gamma),
        }
    }

    /// Rejects `Δt · max(|c|, |γ|) > 1/4`.
    pub fn check_step(&self, dt: f64) -> Result<()> {
        let value = dt * self.zeroth_order_bound();
        if value > 0.25 {
            return Err(DynamicsError::Regime { value });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// Complex tridiagonal matrix; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn identity(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            lower: vec![z; n],
            diag: vec![Complex64::new(1.0, 0.0); n],
            upper: vec![z; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.len();
        let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
            if i > 0 {
                a[i][i - 1] = self.lower[i];
            }
            if i + 1 < n {
                a[i][i + 1] = self.upper[i];
            }
        }
        a
    }

    /// Thomas elimination, stored for repeated solves.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        let n = self.len();
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.lower[i] * c_prime[i - 1];
            }
            if pivot.norm() == 0.0 || !pivot.is_finite() {
                return Err(DynamicsError::ZeroPivot { row: i });
            }
            inv_pivot[i] = pivot.inv();
            if i + 1 < n {
                c_prime[i] = self.upper[i] * inv_pivot[i];
            }
        }
        Ok(TridiagonalLu {
            lower: self.lower.clone(),
            c_prime,
            inv_pivot,
        })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = rhs.to_vec();
        self.factor()?.solve_in_place(&mut x)?;
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalLu {
    lower: Vec<Complex64>,
    c_prime: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl TridiagonalLu {
    pub fn solve_in_place(&self, x: &mut [Complex64]) -> Result<()> {
        let n = self.inv_pivot.len();
        if x.len() != n {
            return Err(DynamicsError::Dimension(format!(
                "rhs has {} entries, matrix {}",
                x.len(),
                n
            )));
        }
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            let prev = x[i - 1];
            x[i] = (x[i] - self.lower[i] * prev) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.c_prime[i] * next;
        }
        Ok(())
    }
}

/// The operator `L` (or `L†`) alone, without the identity.
pub fn assemble_operator(sys: &SystemParams, mesh: SpaceMesh, dir: Direction) -> Tridiagonal {
    let n = mesh.m() + 2;
    let h = mesh.dx();
    let a = sys.diffusion(dir);
    let b = sys.reaction(dir);
    let mut t = Tridiagonal {
        lower: vec![Complex64::new(0.0, 0.0); n],
        diag: vec![b; n],
        upper: vec![Complex64::new(0.0, 0.0); n],
    };
    let ah2 = a / (h * h);
    for j in 1..n - 1 {
        t.diag[j] += 2.0 * ah2;
        t.lower[j] = -ah2;
        t.upper[j] = -ah2;
    }
    t.diag[0] += a / h;
    t.upper[0] = -a / h;
    t.diag[n - 1] += a / h;
    t.lower[n - 1] = -a / h;
    t
}

/// `I + Δt L` (forward) or `I + Δt L†` (adjoint).
pub fn assemble_step_matrix(
    sys: &SystemParams,
    mesh: SpaceMesh,
    dt: f64,
    dir: Direction,
) -> Tridiagonal {
    let mut t = assemble_operator(sys, mesh, dir);
    for v in t.lower.iter_mut().chain(t.upper.iter_mut()) {
        *v *= dt;
    }
    for d in t.diag.iter_mut() {
        *d = 1.0 + *d * dt;
    }
    t
}

/// Solve `A x = rhs` for a tridiagonal `A`.
pub fn solve_tridiagonal(matrix: &Tridiagonal, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    matrix.solve(rhs)
}

/// Control values on `(ω ∩ ℳ) × 𝒩*`, time-major; slice `k` is `v^{k+1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    nodes: Vec<usize>,
    n_steps: usize,
    values: Vec<Complex64>,
}

impl ControlField {
    pub fn zeros(omega: &Interval, mesh: &SpaceMesh, tmesh: &TimeMesh) -> Self {
        let nodes = omega.interior_nodes(mesh);
        let len = nodes.len() * tmesh.n();
        Self {
            nodes,
            n_steps: tmesh.n(),
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn random<R: Rng + ?Sized>(
        omega: &Interval,
        mesh: &SpaceMesh,
        tmesh: &TimeMesh,
        rng: &mut R,
    ) -> Self {
        let mut v = Self::zeros(omega, mesh, tmesh);
        for z in v.values.iter_mut() {
            *z = complex_gaussian(rng);
        }
        v
    }

    /// Samples `f(x, t)` at `(x_j, t^{k+1/2})`.
    pub fn from_fn(
        omega: &Interval,
        mesh: &SpaceMesh,
        tmesh: &TimeMesh,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let mut v = Self::zeros(omega, mesh, tmesh);
        let w = v.nodes.len();
        for k in 0..v.n_steps {
            let t = tmesh.time(2 * k + 1);
            for (i, &j) in v.nodes.clone().iter().enumerate() {
                v.values[k * w + i] = f(mesh.x(j), t);
            }
        }
        v
    }

    pub fn from_parts(nodes: Vec<usize>, n_steps: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != nodes.len() * n_steps {
            return Err(DynamicsError::Dimension(format!(
                "{} control values for {} nodes x {} steps",
                values.len(),
                nodes.len(),
                n_steps
            )));
        }
        Ok(Self {
            nodes,
            n_steps,
            values,
        })
    }

    /// Closure indices `j` of the window nodes.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn step(&self, k: usize) -> &[Complex64] {
        let w = self.nodes.len();
        &self.values[k * w..(k + 1) * w]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            n_steps: self.n_steps,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// `∬_{ω×𝒩*} |v|²`.
    pub fn norm_sq(&self, dx: f64, dt: f64) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx * dt
    }

    /// `∬_{ω×𝒩*} u v*`.
    pub fn inner(&self, other: &ControlField, dx: f64, dt: f64) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * (dx * dt)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Forward trajectory `y` on `ℳ̄ × 𝒩̄`; slice `n` is `y^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub y: GridFn,
}

impl StateTrajectory {
    pub fn terminal(&self) -> &[Complex64] {
        let n = self.y.time_len() - 1;
        self.y.slice(n)
    }

    pub fn initial(&self) -> &[Complex64] {
        self.y.slice(0)
    }
}

/// Adjoint trajectory `q` on `ℳ̄ × 𝒩̄*`; slice `k` is `q^{k+1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub q: GridFn,
}

impl AdjointTrajectory {
    /// `q^{N+1/2} = q_T`.
    pub fn terminal(&self) -> &[Complex64] {
        let n = self.q.time_len() - 1;
        self.q.slice(n)
    }

    /// `q^{1/2} = t^+(q)(0)`.
    pub fn initial_layer(&self) -> &[Complex64] {
        self.q.slice(0)
    }

    /// Restriction to `(ω ∩ ℳ) × 𝒩*`.
    pub fn restrict_to_window(&self, omega: &Interval) -> ControlField {
        let mesh = self.q.space_mesh();
        let nodes = omega.interior_nodes(&mesh);
        let n = self.q.time_len() - 1;
        let mut values = Vec::with_capacity(nodes.len() * n);
        for k in 0..n {
            let s = self.q.slice(k);
            values.extend(nodes.iter().map(|&j| s[j]));
        }
        ControlField {
            nodes,
            n_steps: n,
            values,
        }
    }
}

/// Factored step matrices for one `(system, mesh, Δt)`; shared read-only.
#[derive(Debug, Clone)]
pub struct Solver {
    sys: SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    forward: TridiagonalLu,
    adjoint: TridiagonalLu,
    window: Vec<usize>,
}

impl Solver {
    pub fn new(sys: &SystemParams, smesh: SpaceMesh, tmesh: TimeMesh) -> Result<Self> {
        sys.validate()?;
        sys.check_step(tmesh.dt())?;
        let fwd = assemble_step_matrix(sys, smesh, tmesh.dt(), Direction::Forward).factor()?;
        let adj = assemble_step_matrix(sys, smesh, tmesh.dt(), Direction::Adjoint).factor()?;
        Ok(Self {
            sys: *sys,
            smesh,
            tmesh,
            forward: fwd,
            adjoint: adj,
            window: sys.omega.interior_nodes(&smesh),
        })
    }

    pub fn system(&self) -> &SystemParams {
        &self.sys
    }

    pub fn space_mesh(&self) -> SpaceMesh {
        self.smesh
    }

    pub fn time_mesh(&self) -> TimeMesh {
        self.tmesh
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    fn check_closure(&self, u: &[Complex64], what: &str) -> Result<()> {
        if u.len() != self.smesh.m() + 2 {
            return Err(DynamicsError::Dimension(format!(
                "{what} has {} values, closure has {}",
                u.len(),
                self.smesh.m() + 2
            )));
        }
        Ok(())
    }

    fn check_control(&self, v: &ControlField) -> Result<()> {
        if v.nodes != self.window || v.n_steps != self.tmesh.n() {
            return Err(DynamicsError::Dimension(
                "control field does not match the control window and time mesh".into(),
            ));
        }
        Ok(())
    }

    /// Calls `visit(n, y^n)` for `n = 0..=N`. `source(k, rhs)` may add
    /// `Δt f^{k+1/2}` to the right-hand side of step `k`.
    fn march_forward(
        &self,
        g: &[Complex64],
        v: Option<&ControlField>,
        mut source: impl FnMut(usize, &mut [Complex64]),
        mut visit: impl FnMut(usize, &[Complex64]),
    ) -> Result<()> {
        self.check_closure(g, "initial data")?;
        if let Some(v) = v {
            self.check_control(v)?;
        }
        let dt = self.tmesh.dt();
        let mut y = g.to_vec();
        visit(0, &y);
        for k in 0..self.tmesh.n() {
            if let Some(v) = v {
                for (i, &j) in self.window.iter().enumerate() {
                    y[j] += dt * v.step(k)[i];
                }
            }
            source(k, &mut y);
            self.forward.solve_in_place(&mut y)?;
            visit(k + 1, &y);
        }
        Ok(())
    }

    pub fn forward(&self, g: &[Complex64], v: &ControlField) -> Result<StateTrajectory> {
        self.forward_with_source(g, Some(v), None)
    }

    /// Forward solve with an optional full-closure source `f` on `ℳ̄ × 𝒩*`.
    pub fn forward_with_source(
        &self,
        g: &[Complex64],
        v: Option<&ControlField>,
        f: Option<&GridFn>,
    ) -> Result<StateTrajectory> {
        if let Some(f) = f {
            if f.space_set() != SpaceSet::Closure || f.time_set() != Some(TimeSet::Dual) {
                return Err(DynamicsError::Dimension(
                    "source must live on closure x dual times".into(),
                ));
            }
        }
        let dt = self.tmesh.dt();
        let mut out = GridFn::zeros(
            self.smesh,
            self.tmesh,
            SpaceSet::Closure,
            TimeSet::PrimalClosure,
        );
        self.march_forward(
            g,
            v,
            |k, rhs| {
                if let Some(f) = f {
                    for (r, s) in rhs.iter_mut().zip(f.slice(k)) {
                        *r += dt * s;
                    }
                }
            },
            |n, y| out.slice_mut(n).copy_from_slice(y),
        )?;
        Ok(StateTrajectory { y: out })
    }

    /// Terminal state `y^N` only.
    pub fn forward_terminal(
        &self,
        g: &[Complex64],
        v: Option<&ControlField>,
    ) -> Result<Vec<Complex64>> {
        let mut last = Vec::new();
        let n = self.tmesh.n();
        self.march_forward(
            g,
            v,
            |_, _| {},
            |k, y| {
                if k == n {
                    last = y.to_vec();
                }
            },
        )?;
        Ok(last)
    }

    /// Calls `visit(k, q^{k+1/2})` for `k = N, N−1, …, 0`.
    fn march_adjoint(
        &self,
        q_t: &[Complex64],
        mut visit: impl FnMut(usize, &[Complex64]),
    ) -> Result<()> {
        self.check_closure(q_t, "terminal data")?;
        let mut q = q_t.to_vec();
        let n = self.tmesh.n();
        visit(n, &q);
        for k in (0..n).rev() {
            self.adjoint.solve_in_place(&mut q)?;
            visit(k, &q);
        }
        Ok(())
    }

    pub fn adjoint(&self, q_t: &[Complex64]) -> Result<AdjointTrajectory> {
        let mut out = GridFn::zeros(
            self.smesh,
            self.tmesh,
            SpaceSet::Closure,
            TimeSet::DualClosure,
        );
        self.march_adjoint(q_t, |k, q| out.slice_mut(k).copy_from_slice(q))?;
        Ok(AdjointTrajectory { q: out })
    }

    /// Adjoint solution restricted to the control window, plus `q^{1/2}`.
    pub fn adjoint_window(&self, q_t: &[Complex64]) -> Result<(ControlField, Vec<Complex64>)> {
        let n = self.tmesh.n();
        let w = self.window.len();
        let mut values = vec![Complex64::new(0.0, 0.0); w * n];
        let mut first = Vec::new();
        self.march_adjoint(q_t, |k, q| {
            if k < n {
                for (i, &j) in self.window.iter().enumerate() {
                    values[k * w + i] = q[j];
                }
            }
            if k == 0 {
                first = q.to_vec();
            }
        })?;
        Ok((
            ControlField {
                nodes: self.window.clone(),
                n_steps: n,
                values,
            },
            first,
        ))
    }

    /// Per-slice weighted energies `‖q^{k+1/2}‖²_w`, `k = 0..=N`.
    pub fn adjoint_energies(&self, q_t: &[Complex64]) -> Result<Vec<f64>> {
        let n = self.tmesh.n();
        let dx = self.smesh.dx();
        let mut e = vec![0.0; n + 1];
        self.march_adjoint(q_t, |k, q| e[k] = closure_norm_sq(dx, q))?;
        Ok(e)
    }

    /// Scale used to normalise scheme residuals: `‖u‖∞ (1/Δt + ‖L‖∞)`.
    fn residual_scale(&self, max_state: f64, max_forcing: f64) -> f64 {
        let h = self.smesh.dx();
        let op = Complex64::new(self.sys.c, self.sys.gamma).norm()
            + 4.0 * Complex64::new(self.sys.alpha, self.sys.beta).norm() / (h * h);
        max_state * (1.0 / self.tmesh.dt() + op) + max_forcing
    }

    /// Max residual of every forward equation, in difference-quotient form.
    pub fn forward_residual(
        &self,
        traj: &StateTrajectory,
        v: Option<&ControlField>,
        f: Option<&GridFn>,
    ) -> Result<Residual> {
        let op = assemble_operator(&self.sys, self.smesh, Direction::Forward);
        let dt = self.tmesh.dt();
        let mut max_abs: f64 = 0.0;
        let mut forcing: f64 = 0.0;
        for k in 0..self.tmesh.n() {
            let prev = traj.y.slice(k);
            let next = traj.y.slice(k + 1);
            let ly = op.apply(next);
            let mut rhs = vec![Complex64::new(0.0, 0.0); next.len()];
            if let Some(v) = v {
                self.check_control(v)?;
                for (i, &j) in self.window.iter().enumerate() {
                    rhs[j] += v.step(k)[i];
                }
            }
            if let Some(f) = f {
                for (r, s) in rhs.iter_mut().zip(f.slice(k)) {
                    *r += s;
                }
            }
            for j in 0..next.len() {
                let res = (next[j] - prev[j]) / dt + ly[j] - rhs[j];
                max_abs = max_abs.max(res.norm());
                forcing = forcing.max(rhs[j].norm());
            }
        }
        Ok(Residual {
            max_abs,
            scale: self.residual_scale(traj.y.max_abs(), forcing),
        })
    }

    /// Max residual of every adjoint equation at `t^n ∈ 𝒩` plus the terminal condition.
    pub fn adjoint_residual(
        &self,
        traj: &AdjointTrajectory,
        q_t: &[Complex64],
    ) -> Result<Residual> {
        self.check_closure(q_t, "terminal data")?;
        let op = assemble_operator(&self.sys, self.smesh, Direction::Adjoint);
        let dt = self.tmesh.dt();
        let mut max_abs: f64 = traj
            .terminal()
            .iter()
            .zip(q_t)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        for n in 1..=self.tmesh.n() {
            let minus = traj.q.slice(n - 1);
            let plus = traj.q.slice(n);
            let lq = op.apply(minus);
            for j in 0..minus.len() {
                let res = -(plus[j] - minus[j]) / dt + lq[j];
                max_abs = max_abs.max(res.norm());
            }
        }
        Ok(Residual {
            max_abs,
            scale: self.residual_scale(traj.q.max_abs(), 0.0),
        })
    }

    /// `|⟨y^N, q_T⟩_w − ⟨g, q^{1/2}⟩_w − ∬_{ω×𝒩*} v q*|`.
    pub fn duality_defect(
        &self,
        g: &[Complex64],
        v: &ControlField,
        q_t: &[Complex64],
    ) -> Result<Defect> {
        let dx = self.smesh.dx();
        let dt = self.tmesh.dt();
        let y_n = self.forward_terminal(g, Some(v))?;
        let (q_win, q_half) = self.adjoint_window(q_t)?;
        let lhs = closure_inner(dx, &y_n, q_t);
        let init = closure_inner(dx, g, &q_half);
        let ctrl = v.inner(&q_win, dx, dt);
        let scale = closure_norm_sq(dx, &y_n).sqrt() * closure_norm_sq(dx, q_t).sqrt()
            + closure_norm_sq(dx, g).sqrt() * closure_norm_sq(dx, &q_half).sqrt()
            + v.norm_sq(dx, dt).sqrt() * q_win.norm_sq(dx, dt).sqrt();
        Ok(Defect {
            defect: (lhs - init - ctrl).norm(),
            scale,
        })
    }
}

/// Absolute residual and the scale it should be compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub max_abs: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_abs
        } else {
            self.max_abs / self.scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Defect {
    pub defect: f64,
    pub scale: f64,
}

impl Defect {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.defect
        } else {
            self.defect / self.scale
        }
    }
}

pub fn forward_solve(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    g: &[Complex64],
    v: &ControlField,
) -> Result<StateTrajectory> {
    Solver::new(sys, smesh, tmesh)?.forward(g, v)
}

pub fn adjoint_solve(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    q_t: &[Complex64],
) -> Result<AdjointTrajectory> {
    Solver::new(sys, smesh, tmesh)?.adjoint(q_t)
}

pub fn duality_defect(
    sys: &SystemParams,
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    g: &[Complex64],
    v: &ControlField,
    q_t: &[Complex64],
) -> Result<Defect> {
    Solver::new(sys, smesh, tmesh)?.duality_defect(g, v, q_t)
}

/// Exact solution `e^{−t} cos(πx)` of the forced problem built by [`manufactured_source`].
pub fn manufactured_exact(x: f64, t: f64) -> Complex64 {
    Complex64::new((-t).exp() * (std::f64::consts::PI * x).cos(), 0.0)
}

/// Source on `ℳ̄ × 𝒩*` for the manufactured solution, evaluated at the implicit time `t^{k+1}`.
pub fn manufactured_source(sys: &SystemParams, smesh: SpaceMesh, tmesh: TimeMesh) -> GridFn {
    let a = Complex64::new(sys.alpha, sys.beta);
    let b = Complex64::new(sys.c, sys.gamma);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut f = GridFn::zeros(smesh, tmesh, SpaceSet::Closure, TimeSet::Dual);
    let last = smesh.m() + 1;
    for k in 0..tmesh.n() {
        let t = tmesh.time(2 * k + 2);
        let e = (-t).exp();
        let slice = f.slice_mut(k);
        for (j, z) in slice.iter_mut().enumerate() {
            *z = if j == 0 {
                e * (b - 1.0)
            } else if j == last {
                -e * (b - 1.0)
            } else {
                e * (std::f64::consts::PI * smesh.x(j)).cos() * (a * pi2 + b - 1.0)
            };
        }
    }
    f
}

/// Random closure data with complex Gaussian entries.
pub fn random_closure<R: Rng + ?Sized>(mesh: SpaceMesh, rng: &mut R) -> Vec<Complex64> {
    (0..mesh.m() + 2).map(|_| complex_gaussian(rng)).collect()
}

//! Staggered space-time meshes and the discrete calculus built on them.
//!
//! Every node of the interval mesh is addressed by an integer *half-position*:
//! the primal node `x_j` sits at `2j` and the dual node `x_{j+1/2}` at `2j+1`.
//! The same convention is used in time (`t^n` at `2n`, `t^{n+1/2}` at `2n+1`).
//! A half-shift `s_±` is then a move of one position, so all operators are
//! pure index arithmetic on the staggered storage and the discrete
//! integration-by-parts identities hold to roundoff.
//!
//! Values of a [`GridFn`] are stored time-major: one time slice is a
//! contiguous run of `space_set.len()` values.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("node-set mismatch: {0}")]
    TagMismatch(String),
    #[error("shift leaves the mesh: {axis} node at half-position {position} has no neighbour at {missing}")]
    OutsideMesh {
        axis: &'static str,
        position: usize,
        missing: i64,
    },
    #[error("value count {got} does not match node-set cardinality {expected}")]
    BadLength { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, GridError>;

/// Uniform primal mesh `x_j = j Δx`, `j = 0..=M+1`, on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceMesh {
    m: usize,
    dx: f64,
}

impl SpaceMesh {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(GridError::InvalidMesh(format!(
                "M = {m}: at least two interior nodes are required"
            )));
        }
        Ok(Self {
            m,
            dx: 1.0 / (m as f64 + 1.0),
        })
    }

    /// Number of interior nodes `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Primal node `x_j`.
    pub fn x(&self, j: usize) -> f64 {
        if j == self.m + 1 {
            1.0
        } else {
            j as f64 * self.dx
        }
    }

    /// Coordinate of a half-position (`pos / 2 · Δx`).
    pub fn coord(&self, pos: usize) -> f64 {
        if pos == 2 * (self.m + 1) {
            1.0
        } else {
            pos as f64 * 0.5 * self.dx
        }
    }

    pub fn primal_nodes(&self) -> Vec<f64> {
        (0..=self.m + 1).map(|j| self.x(j)).collect()
    }

    /// Largest half-position (the node `x = 1`).
    pub fn last_position(&self) -> usize {
        2 * (self.m + 1)
    }
}

/// Uniform time mesh `t^n = n Δt`, `n = 0..=N`, plus its dual `t^{n+1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeMesh {
    n: usize,
    dt: f64,
    t_final: f64,
}

impl TimeMesh {
    pub fn new(n: usize, t_final: f64) -> Result<Self> {
        if n < 2 {
            return Err(GridError::InvalidMesh(format!(
                "N = {n}: at least two time steps are required"
            )));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(GridError::InvalidMesh(format!(
                "T = {t_final} must be a positive finite number"
            )));
        }
        Ok(Self {
            n,
            dt: t_final / n as f64,
            t_final,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Time of a half-position (`pos / 2 · Δt`); position `2N` is exactly `T`.
    pub fn time(&self, pos: usize) -> f64 {
        if pos == 2 * self.n {
            self.t_final
        } else {
            pos as f64 * 0.5 * self.dt
        }
    }

    pub fn primal_times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.time(2 * k)).collect()
    }

    /// Extended dual times `t^{n+1/2}`, `n = 0..=N` (the last one is `T + Δt/2`).
    pub fn dual_times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.time(2 * k + 1)).collect()
    }
}

pub fn build_meshes(m: usize, n: usize, t_final: f64) -> Result<(SpaceMesh, TimeMesh)> {
    Ok((SpaceMesh::new(m)?, TimeMesh::new(n, t_final)?))
}

/// Open subinterval `(a, b)` of `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(GridError::InvalidMesh(format!(
                "interval ({a}, {b}) must satisfy 0 <= a < b <= 1"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Mesh membership test `x ∈ [a, b)`; half-open so that dyadic refinement is monotone.
    pub fn contains_node(&self, x: f64) -> bool {
        x >= self.a && x < self.b
    }

    /// `x ∈ [a, b]`.
    pub fn closure_contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// `self ⊂⊂ other`: closure strictly inside.
    pub fn compactly_inside(&self, other: &Interval) -> bool {
        other.a < self.a && self.b < other.b
    }

    /// Interior-node indices `j` (1..=M) with `x_j` in the control window.
    pub fn interior_nodes(&self, mesh: &SpaceMesh) -> Vec<usize> {
        (1..=mesh.m())
            .filter(|&j| self.contains_node(mesh.x(j)))
            .collect()
    }
}

/// Spatial node sets: `ℳ`, `ℳ̄`, `ℳ*`, `∂ℳ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SpaceSet {
    Interior,
    Closure,
    Dual,
    Boundary,
}

impl SpaceSet {
    pub const ALL: [SpaceSet; 4] = [
        SpaceSet::Interior,
        SpaceSet::Closure,
        SpaceSet::Dual,
        SpaceSet::Boundary,
    ];

    pub fn len(self, m: usize) -> usize {
        match self {
            SpaceSet::Interior => m,
            SpaceSet::Closure => m + 2,
            SpaceSet::Dual => m + 1,
            SpaceSet::Boundary => 2,
        }
    }

    pub fn position(self, m: usize, idx: usize) -> usize {
        match self {
            SpaceSet::Interior => 2 * (idx + 1),
            SpaceSet::Closure => 2 * idx,
            SpaceSet::Dual => 2 * idx + 1,
            SpaceSet::Boundary => {
                if idx == 0 {
                    0
                } else {
                    2 * (m + 1)
                }
            }
        }
    }

    pub fn index_of(self, m: usize, pos: i64) -> Option<usize> {
        let last = 2 * (m as i64 + 1);
        if pos < 0 || pos > last {
            return None;
        }
        match self {
            SpaceSet::Interior => {
                (pos % 2 == 0 && pos > 0 && pos < last).then(|| pos as usize / 2 - 1)
            }
            SpaceSet::Closure => (pos % 2 == 0).then(|| pos as usize / 2),
            SpaceSet::Dual => (pos % 2 == 1).then(|| pos as usize / 2),
            SpaceSet::Boundary => match pos {
                0 => Some(0),
                p if p == last => Some(1),
                _ => None,
            },
        }
    }

    /// Boundary sums carry weight 1, every other set weight `Δx`.
    pub fn is_boundary(self) -> bool {
        matches!(self, SpaceSet::Boundary)
    }

    /// Target of a half-shift, average or difference under the node-set algebra.
    pub fn half_shift_target(self) -> Option<SpaceSet> {
        match self {
            SpaceSet::Closure => Some(SpaceSet::Dual),
            SpaceSet::Dual => Some(SpaceSet::Interior),
            SpaceSet::Interior | SpaceSet::Boundary => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SpaceSet::Interior => "M",
            SpaceSet::Closure => "M-bar",
            SpaceSet::Dual => "M*",
            SpaceSet::Boundary => "dM",
        }
    }
}

/// Temporal node sets: `𝒩`, `𝒩̄`, `𝒩*`, `𝒩̄*`, `∂𝒩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TimeSet {
    Primal,
    PrimalClosure,
    Dual,
    DualClosure,
    Boundary,
}

impl TimeSet {
    pub const ALL: [TimeSet; 5] = [
        TimeSet::Primal,
        TimeSet::PrimalClosure,
        TimeSet::Dual,
        TimeSet::DualClosure,
        TimeSet::Boundary,
    ];

    pub fn len(self, n: usize) -> usize {
        match self {
            TimeSet::Primal => n,
            TimeSet::PrimalClosure => n + 1,
            TimeSet::Dual => n,
            TimeSet::DualClosure => n + 1,
            TimeSet::Boundary => 2,
        }
    }

    pub fn position(self, n: usize, idx: usize) -> usize {
        match self {
            TimeSet::Primal => 2 * (idx + 1),
            TimeSet::PrimalClosure => 2 * idx,
            TimeSet::Dual | TimeSet::DualClosure => 2 * idx + 1,
            TimeSet::Boundary => {
                if idx == 0 {
                    0
                } else {
                    2 * n
                }
            }
        }
    }

    pub fn index_of(self, n: usize, pos: i64) -> Option<usize> {
        let n = n as i64;
        if pos < 0 {
            return None;
        }
        match self {
            TimeSet::Primal => {
                (pos % 2 == 0 && pos >= 2 && pos <= 2 * n).then(|| pos as usize / 2 - 1)
            }
            TimeSet::PrimalClosure => (pos % 2 == 0 && pos <= 2 * n).then(|| pos as usize / 2),
            TimeSet::Dual => (pos % 2 == 1 && pos < 2 * n).then(|| pos as usize / 2),
            TimeSet::DualClosure => (pos % 2 == 1 && pos <= 2 * n + 1).then(|| pos as usize / 2),
            TimeSet::Boundary => match pos {
                0 => Some(0),
                p if p == 2 * n => Some(1),
                _ => None,
            },
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, TimeSet::Boundary)
    }

    pub fn half_shift_target(self) -> Option<TimeSet> {
        match self {
            TimeSet::PrimalClosure => Some(TimeSet::Dual),
            TimeSet::DualClosure => Some(TimeSet::Primal),
            _ => None,
        }
    }
}

/// Direction of a half-shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Plus,
    Minus,
}

impl Shift {
    fn offset(self) -> i64 {
        match self {
            Shift::Plus => 1,
            Shift::Minus => -1,
        }
    }
}

/// Complex grid function tagged with the node sets it lives on.
///
/// `time == None` marks a static (purely spatial) field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    space_mesh: SpaceMesh,
    time_mesh: Option<TimeMesh>,
    space: SpaceSet,
    time: Option<TimeSet>,
    values: Vec<Complex64>,
}

impl GridFn {
    pub fn zeros_static(mesh: SpaceMesh, space: SpaceSet) -> Self {
        Self {
            space_mesh: mesh,
            time_mesh: None,
            space,
            time: None,
            values: vec![Complex64::new(0.0, 0.0); space.len(mesh.m())],
        }
    }

    pub fn zeros(mesh: SpaceMesh, tmesh: TimeMesh, space: SpaceSet, time: TimeSet) -> Self {
        let len = space.len(mesh.m()) * time.len(tmesh.n());
        Self {
            space_mesh: mesh,
            time_mesh: Some(tmesh),
            space,
            time: Some(time),
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_values_static(
        mesh: SpaceMesh,
        space: SpaceSet,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = space.len(mesh.m());
        if values.len() != expected {
            return Err(GridError::BadLength {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            space_mesh: mesh,
            time_mesh: None,
            space,
            time: None,
            values,
        })
    }

    pub fn from_values(
        mesh: SpaceMesh,
        tmesh: TimeMesh,
        space: SpaceSet,
        time: TimeSet,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = space.len(mesh.m()) * time.len(tmesh.n());
        if values.len() != expected {
            return Err(GridError::BadLength {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            space_mesh: mesh,
            time_mesh: Some(tmesh),
            space,
            time: Some(time),
            values,
        })
    }

    /// Samples `f(x)` at the nodes of `space`.
    pub fn from_fn_static(mesh: SpaceMesh, space: SpaceSet, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..space.len(mesh.m()))
            .map(|i| f(mesh.coord(space.position(mesh.m(), i))))
            .collect();
        Self {
            space_mesh: mesh,
            time_mesh: None,
            space,
            time: None,
            values,
        }
    }

    /// Samples `f(x, t)` on `space × time`.
    pub fn from_fn(
        mesh: SpaceMesh,
        tmesh: TimeMesh,
        space: SpaceSet,
        time: TimeSet,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let ns = space.len(mesh.m());
        let nt = time.len(tmesh.n());
        let mut values = Vec::with_capacity(ns * nt);
        for k in 0..nt {
            let t = tmesh.time(time.position(tmesh.n(), k));
            for i in 0..ns {
                values.push(f(mesh.coord(space.position(mesh.m(), i)), t));
            }
        }
        Self {
            space_mesh: mesh,
            time_mesh: Some(tmesh),
            space,
            time: Some(time),
            values,
        }
    }

    /// Complex Gaussian entries (independent standard normal real and imaginary parts).
    pub fn random_static<R: Rng + ?Sized>(mesh: SpaceMesh, space: SpaceSet, rng: &mut R) -> Self {
        let values = (0..space.len(mesh.m()))
            .map(|_| complex_gaussian(rng))
            .collect();
        Self {
            space_mesh: mesh,
            time_mesh: None,
            space,
            time: None,
            values,
        }
    }

    pub fn random<R: Rng + ?Sized>(
        mesh: SpaceMesh,
        tmesh: TimeMesh,
        space: SpaceSet,
        time: TimeSet,
        rng: &mut R,
    ) -> Self {
        let len = space.len(mesh.m()) * time.len(tmesh.n());
        let values = (0..len).map(|_| complex_gaussian(rng)).collect();
        Self {
            space_mesh: mesh,
            time_mesh: Some(tmesh),
            space,
            time: Some(time),
            values,
        }
    }

    pub fn space_mesh(&self) -> SpaceMesh {
        self.space_mesh
    }

    pub fn time_mesh(&self) -> Option<TimeMesh> {
        self.time_mesh
    }

    pub fn space_set(&self) -> SpaceSet {
        self.space
    }

    pub fn time_set(&self) -> Option<TimeSet> {
        self.time
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn space_len(&self) -> usize {
        self.space.len(self.space_mesh.m())
    }

    /// Number of time slices (1 for a static field).
    pub fn time_len(&self) -> usize {
        match (self.time, self.time_mesh) {
            (Some(ts), Some(tm)) => ts.len(tm.n()),
            _ => 1,
        }
    }

    pub fn slice(&self, k: usize) -> &[Complex64] {
        let ns = self.space_len();
        &self.values[k * ns..(k + 1) * ns]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [Complex64] {
        let ns = self.space_len();
        &mut self.values[k * ns..(k + 1) * ns]
    }

    /// Static copy of time slice `k`.
    pub fn slice_field(&self, k: usize) -> GridFn {
        GridFn {
            space_mesh: self.space_mesh,
            time_mesh: None,
            space: self.space,
            time: None,
            values: self.slice(k).to_vec(),
        }
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.values[k * self.space_len() + i]
    }

    /// Coordinate of spatial index `i`.
    pub fn x_of(&self, i: usize) -> f64 {
        self.space_mesh
            .coord(self.space.position(self.space_mesh.m(), i))
    }

    /// Time of slice `k` (0 for a static field).
    pub fn t_of(&self, k: usize) -> f64 {
        match (self.time, self.time_mesh) {
            (Some(ts), Some(tm)) => tm.time(ts.position(tm.n(), k)),
            _ => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn same_tags(&self, other: &GridFn) -> Result<()> {
        if self.space != other.space
            || self.time != other.time
            || self.space_mesh.m() != other.space_mesh.m()
            || self.time_mesh.map(|t| t.n()) != other.time_mesh.map(|t| t.n())
        {
            return Err(GridError::TagMismatch(format!(
                "({:?}, {:?}) vs ({:?}, {:?})",
                self.space, self.time, other.space, other.time
            )));
        }
        Ok(())
    }

    /// Pointwise combination of two fields living on the same node sets.
    pub fn zip_with(
        &self,
        other: &GridFn,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<GridFn> {
        self.same_tags(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridFn {
            values,
            ..self.clone_tags()
        })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> GridFn {
        GridFn {
            values: self.values.iter().map(|&z| f(z)).collect(),
            ..self.clone_tags()
        }
    }

    /// Pointwise map with access to the node coordinates `(x, t)`.
    pub fn map_with_coords(&self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> GridFn {
        let ns = self.space_len();
        let mut values = Vec::with_capacity(self.values.len());
        for k in 0..self.time_len() {
            let t = self.t_of(k);
            for i in 0..ns {
                values.push(f(self.x_of(i), t, self.values[k * ns + i]));
            }
        }
        GridFn {
            values,
            ..self.clone_tags()
        }
    }

    pub fn add(&self, other: &GridFn) -> Result<GridFn> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFn) -> Result<GridFn> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFn) -> Result<GridFn> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> GridFn {
        self.map(|z| z * c)
    }

    pub fn conj(&self) -> GridFn {
        self.map(|z| z.conj())
    }

    /// `|u|²` as a (real-valued) complex field.
    pub fn abs2(&self) -> GridFn {
        self.map(|z| Complex64::new(z.norm_sqr(), 0.0))
    }

    fn clone_tags(&self) -> GridFn {
        GridFn {
            space_mesh: self.space_mesh,
            time_mesh: self.time_mesh,
            space: self.space,
            time: self.time,
            values: Vec::new(),
        }
    }

    /// Restricts to a sub-set of the nodes in either axis (e.g. `ℳ̄ → ∂ℳ`, `𝒩̄* → 𝒩*`).
    pub fn restrict(&self, space: SpaceSet, time: Option<TimeSet>) -> Result<GridFn> {
        let m = self.space_mesh.m();
        let space_idx: Vec<usize> = (0..space.len(m))
            .map(|i| {
                let pos = space.position(m, i) as i64;
                self.space.index_of(m, pos).ok_or_else(|| {
                    GridError::TagMismatch(format!(
                        "{:?} is not contained in {:?}",
                        space, self.space
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let time_idx: Vec<usize> = match (self.time, time, self.time_mesh) {
            (None, None, _) => vec![0],
            (Some(src), Some(dst), Some(tm)) => (0..dst.len(tm.n()))
                .map(|k| {
                    let pos = dst.position(tm.n(), k) as i64;
                    src.index_of(tm.n(), pos).ok_or_else(|| {
                        GridError::TagMismatch(format!("{:?} is not contained in {:?}", dst, src))
                    })
                })
                .collect::<Result<_>>()?,
            _ => {
                return Err(GridError::TagMismatch(
                    "restriction must keep the field static or time-dependent".into(),
                ))
            }
        };
        let ns = self.space_len();
        let mut values = Vec::with_capacity(space_idx.len() * time_idx.len());
        for &k in &time_idx {
            for &i in &space_idx {
                values.push(self.values[k * ns + i]);
            }
        }
        Ok(GridFn {
            space_mesh: self.space_mesh,
            time_mesh: self.time_mesh,
            space,
            time,
            values,
        })
    }

    /// Spatial half-shift `s_±` onto `target`.
    pub fn shift_x_onto(&self, dir: Shift, target: SpaceSet) -> Result<GridFn> {
        self.space_stencil(target, &[(dir.offset(), 1.0)])
    }

    /// Spatial half-shift onto the node-set algebra target (`ℳ̄ → ℳ*`, `ℳ* → ℳ`).
    pub fn shift_x(&self, dir: Shift) -> Result<GridFn> {
        self.shift_x_onto(dir, self.default_space_target()?)
    }

    /// `A_x u = (s_+u + s_-u)/2`.
    pub fn avg_x(&self) -> Result<GridFn> {
        self.avg_x_onto(self.default_space_target()?)
    }

    pub fn avg_x_onto(&self, target: SpaceSet) -> Result<GridFn> {
        self.space_stencil(target, &[(1, 0.5), (-1, 0.5)])
    }

    /// `D_x u = (s_+u − s_-u)/Δx`.
    pub fn diff_x(&self) -> Result<GridFn> {
        self.diff_x_onto(self.default_space_target()?)
    }

    pub fn diff_x_onto(&self, target: SpaceSet) -> Result<GridFn> {
        let inv = 1.0 / self.space_mesh.dx();
        self.space_stencil(target, &[(1, inv), (-1, -inv)])
    }

    fn default_space_target(&self) -> Result<SpaceSet> {
        self.space.half_shift_target().ok_or_else(|| {
            GridError::TagMismatch(format!(
                "no half-shifted node set is defined for a field on {:?}",
                self.space
            ))
        })
    }

    fn space_stencil(&self, target: SpaceSet, taps: &[(i64, f64)]) -> Result<GridFn> {
        let m = self.space_mesh.m();
        let nt = target.len(m);
        let mut src_idx = Vec::with_capacity(nt * taps.len());
        for i in 0..nt {
            let pos = target.position(m, i) as i64;
            for &(off, _) in taps {
                let p = pos + off;
                let j = self.space.index_of(m, p).ok_or(GridError::OutsideMesh {
                    axis: "space",
                    position: pos as usize,
                    missing: p,
                })?;
                src_idx.push(j);
            }
        }
        let ns = self.space_len();
        let mut values = Vec::with_capacity(nt * self.time_len());
        for k in 0..self.time_len() {
            let slice = &self.values[k * ns..(k + 1) * ns];
            for i in 0..nt {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &(_, w)) in taps.iter().enumerate() {
                    acc += slice[src_idx[i * taps.len() + t]] * w;
                }
                values.push(acc);
            }
        }
        Ok(GridFn {
            space_mesh: self.space_mesh,
            time_mesh: self.time_mesh,
            space: target,
            time: self.time,
            values,
        })
    }

    /// Temporal half-shift `t^±` onto `target`.
    pub fn shift_t_onto(&self, dir: Shift, target: TimeSet) -> Result<GridFn> {
        self.time_stencil(target, &[(dir.offset(), 1.0)])
    }

    /// Temporal half-shift onto the node-set algebra target (`𝒩̄* → 𝒩`, `𝒩̄ → 𝒩*`).
    pub fn shift_t(&self, dir: Shift) -> Result<GridFn> {
        self.shift_t_onto(dir, self.default_time_target()?)
    }

    /// `D_t u = (t^+u − t^-u)/Δt`.
    pub fn diff_t(&self) -> Result<GridFn> {
        self.diff_t_onto(self.default_time_target()?)
    }

    pub fn diff_t_onto(&self, target: TimeSet) -> Result<GridFn> {
        let tm = self.time_mesh.ok_or_else(|| {
            GridError::TagMismatch("time operator applied to a static field".into())
        })?;
        let inv = 1.0 / tm.dt();
        self.time_stencil(target, &[(1, inv), (-1, -inv)])
    }

    fn default_time_target(&self) -> Result<TimeSet> {
        let ts = self.time.ok_or_else(|| {
            GridError::TagMismatch("time operator applied to a static field".into())
        })?;
        ts.half_shift_target().ok_or_else(|| {
            GridError::TagMismatch(format!("no half-shifted time set is defined for {:?}", ts))
        })
    }

    fn time_stencil(&self, target: TimeSet, taps: &[(i64, f64)]) -> Result<GridFn> {
        let (src, tm) = match (self.time, self.time_mesh) {
            (Some(s), Some(t)) => (s, t),
            _ => {
                return Err(GridError::TagMismatch(
                    "time operator applied to a static field".into(),
                ))
            }
        };
        let n = tm.n();
        let ns = self.space_len();
        let nt = target.len(n);
        let mut values = Vec::with_capacity(nt * ns);
        for k in 0..nt {
            let pos = target.position(n, k) as i64;
            let mut rows = Vec::with_capacity(taps.len());
            for &(off, w) in taps {
                let p = pos + off;
                let kk = src.index_of(n, p).ok_or(GridError::OutsideMesh {
                    axis: "time",
                    position: pos as usize,
                    missing: p,
                })?;
                rows.push((kk, w));
            }
            for i in 0..ns {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(kk, w) in &rows {
                    acc += self.values[kk * ns + i] * w;
                }
                values.push(acc);
            }
        }
        Ok(GridFn {
            space_mesh: self.space_mesh,
            time_mesh: self.time_mesh,
            space: self.space,
            time: Some(target),
            values,
        })
    }

    fn space_weight(&self) -> f64 {
        if self.space.is_boundary() {
            1.0
        } else {
            self.space_mesh.dx()
        }
    }

    fn time_weight(&self) -> f64 {
        match (self.time, self.time_mesh) {
            (Some(ts), Some(tm)) if !ts.is_boundary() => tm.dt(),
            _ => 1.0,
        }
    }

    /// Discrete integral over the field's own node sets: interior sums carry
    /// `Δx` (and `Δt`), boundary sums carry weight 1.
    pub fn integral(&self) -> Complex64 {
        let sum: Complex64 = self.values.iter().sum();
        sum * (self.space_weight() * self.time_weight())
    }

    /// Real part of [`GridFn::integral`] for fields known to be real.
    pub fn integral_re(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|z| z.re).sum();
        sum * self.space_weight() * self.time_weight()
    }

    /// Integral of `|u|²`.
    pub fn norm_sq(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        sum * self.space_weight() * self.time_weight()
    }

    /// `(u, v) = ∫ u v*` over the shared node sets.
    pub fn inner(&self, other: &GridFn) -> Result<Complex64> {
        self.same_tags(other)?;
        let sum: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(sum * (self.space_weight() * self.time_weight()))
    }

    /// `‖u‖²_{L²(ℳ̄)} = ‖u‖²_{L²(ℳ)} + ‖u‖²_{L²(∂ℳ)}` for a static field on `ℳ̄`.
    pub fn closure_norm_sq(&self) -> Result<f64> {
        if self.space != SpaceSet::Closure || self.time.is_some() {
            return Err(GridError::TagMismatch(
                "L²(M-bar) norm needs a static field on the closure".into(),
            ));
        }
        Ok(self.restrict(SpaceSet::Interior, None)?.norm_sq()
            + self.restrict(SpaceSet::Boundary, None)?.norm_sq())
    }

    /// Trace on `∂ℳ` of a field on `ℳ*` with the outward normals `n_x`.
    pub fn trace_normal(&self) -> Result<(GridFn, [f64; 2])> {
        if self.space != SpaceSet::Dual {
            return Err(GridError::TagMismatch(format!(
                "trace is defined for fields on M*, got {:?}",
                self.space
            )));
        }
        let m = self.space_mesh.m();
        let normals = [outward_normal(m, 0), outward_normal(m, 2 * (m + 1))];
        let ns = self.space_len();
        let mut values = Vec::with_capacity(2 * self.time_len());
        for k in 0..self.time_len() {
            let slice = &self.values[k * ns..(k + 1) * ns];
            for (b, &nx) in normals.iter().enumerate() {
                let pos = SpaceSet::Boundary.position(m, b) as i64;
                let v = if nx > 0.0 {
                    slice[SpaceSet::Dual.index_of(m, pos - 1).unwrap()]
                } else if nx < 0.0 {
                    slice[SpaceSet::Dual.index_of(m, pos + 1).unwrap()]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                values.push(v);
            }
        }
        Ok((
            GridFn {
                space_mesh: self.space_mesh,
                time_mesh: self.time_mesh,
                space: SpaceSet::Boundary,
                time: self.time,
                values,
            },
            normals,
        ))
    }
}

/// Outward normal at a boundary half-position of the interval mesh.
pub fn outward_normal(m: usize, pos: usize) -> f64 {
    let minus_in = SpaceSet::Dual.index_of(m, pos as i64 - 1).is_some();
    let plus_in = SpaceSet::Dual.index_of(m, pos as i64 + 1).is_some();
    match (minus_in, plus_in) {
        (true, false) => 1.0,
        (false, true) => -1.0,
        _ => 0.0,
    }
}

/// `⟨a, b⟩_w = Σ a b* w` with weight `Δx` at interior nodes and 1 at the
/// two boundary nodes: the `L²(ℳ̄)` pairing of raw closure slices.
pub fn closure_inner(dx: f64, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 1..n - 1 {
        acc += a[j] * b[j].conj();
    }
    acc * dx + a[0] * b[0].conj() + a[n - 1] * b[n - 1].conj()
}

/// `‖a‖²_w` for a raw closure slice.
pub fn closure_norm_sq(dx: f64, a: &[Complex64]) -> f64 {
    let n = a.len();
    let interior: f64 = a[1..n - 1].iter().map(|z| z.norm_sqr()).sum();
    interior * dx + a[0].norm_sqr() + a[n - 1].norm_sqr()
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Residual of one discrete-calculus identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub name: &'static str,
    /// Max absolute difference between the two sides.
    pub residual: f64,
    /// Magnitude of the individual terms, for relative comparison.
    pub scale: f64,
}

impl IdentityResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

fn pointwise(name: &'static str, lhs: &GridFn, terms: &[GridFn]) -> Result<IdentityResidual> {
    let mut rhs = terms[0].clone();
    for t in &terms[1..] {
        rhs = rhs.add(t)?;
    }
    let diff = lhs.sub(&rhs)?;
    let scale = std::iter::once(lhs)
        .chain(terms)
        .map(GridFn::max_abs)
        .fold(0.0, f64::max);
    Ok(IdentityResidual {
        name,
        residual: diff.max_abs(),
        scale,
    })
}

fn abs_integral(u: &GridFn) -> f64 {
    u.map(|z| Complex64::new(z.norm(), 0.0)).integral_re()
}

fn integral_identity(
    name: &'static str,
    lhs: &GridFn,
    terms: &[(f64, &GridFn)],
) -> IdentityResidual {
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut scale = abs_integral(lhs);
    for (c, t) in terms {
        rhs += t.integral() * *c;
        scale += c.abs() * abs_integral(t);
    }
    IdentityResidual {
        name,
        residual: (lhs.integral() - rhs).norm(),
        scale,
    }
}

/// Multiplies a boundary field by the outward normal at each end.
fn times_normal(u: &GridFn, normals: [f64; 2]) -> GridFn {
    let mut out = u.clone();
    for k in 0..out.time_len() {
        let s = out.slice_mut(k);
        s[0] *= normals[0];
        s[1] *= normals[1];
    }
    out
}

/// Evaluates every product rule and summation-by-parts identity of the
/// discrete calculus on the four pseudorandom fields `u, v` (space) and
/// `f, g` (time) drawn from `rng`.
pub fn check_identities_with<R: Rng + ?Sized>(
    smesh: SpaceMesh,
    tmesh: TimeMesh,
    rng: &mut R,
) -> Result<Vec<IdentityResidual>> {
    let u = GridFn::random_static(smesh, SpaceSet::Closure, rng);
    let v = GridFn::random_static(smesh, SpaceSet::Closure, rng);
    let f = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::DualClosure, rng);
    let g = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::DualClosure, rng);
    let fp = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::PrimalClosure, rng);
    let gp = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::PrimalClosure, rng);
    let fd = GridFn::random(smesh, tmesh, SpaceSet::Closure, TimeSet::Dual, rng);
    let gd = GridFn::random(smesh, tmesh, SpaceSet::Dual, TimeSet::DualClosure, rng);
    check_identities_on(&u, &v, &f, &g, &fp, &gp, &fd, &gd)
}

/// [`check_identities_with`] on explicit fields.
///
/// `u, v` static on `ℳ̄`; `f, g` on `ℳ̄ × 𝒩̄*`; `fp, gp` on `ℳ̄ × 𝒩̄`;
/// `fd` on `ℳ̄ × 𝒩*` and `gd` on `ℳ* × 𝒩̄*` (a dual-space field for the
/// mixed space-time summation by parts).
#[allow(clippy::too_many_arguments)]
pub fn check_identities_on(
    u: &GridFn,
    v: &GridFn,
    f: &GridFn,
    g: &GridFn,
    fp: &GridFn,
    gp: &GridFn,
    fd: &GridFn,
    gd: &GridFn,
) -> Result<Vec<IdentityResidual>> {
    let dx = u.space_mesh().dx();
    let q = 0.25 * dx * dx;
    let mut out = Vec::new();

    // Product rules on ℳ̄ → ℳ* and ℳ* → ℳ.
    let uv = u.mul(v)?;
    let (du, dv, au, av) = (u.diff_x()?, v.diff_x()?, u.avg_x()?, v.avg_x()?);
    out.push(pointwise(
        "dx_product_primal",
        &uv.diff_x()?,
        &[du.mul(&av)?, au.mul(&dv)?],
    )?);
    out.push(pointwise(
        "ax_product_primal",
        &uv.avg_x()?,
        &[au.mul(&av)?, du.mul(&dv)?.scale(Complex64::new(q, 0.0))],
    )?);
    let (ud, vd) = (du.clone(), av.clone());
    let udvd = ud.mul(&vd)?;
    let (dud, dvd, aud, avd) = (ud.diff_x()?, vd.diff_x()?, ud.avg_x()?, vd.avg_x()?);
    out.push(pointwise(
        "dx_product_dual",
        &udvd.diff_x()?,
        &[dud.mul(&avd)?, aud.mul(&dvd)?],
    )?);
    out.push(pointwise(
        "ax_product_dual",
        &udvd.avg_x()?,
        &[aud.mul(&avd)?, dud.mul(&dvd)?.scale(Complex64::new(q, 0.0))],
    )?);
    out.push(pointwise(
        "ax_squared",
        &au.avg_x()?,
        &[
            u.restrict(SpaceSet::Interior, None)?,
            du.diff_x()?.scale(Complex64::new(q, 0.0)),
        ],
    )?);

    // Summation by parts in space: u on ℳ̄, w on ℳ*.
    let w = av.clone();
    let (trw, normals) = w.trace_normal()?;
    let u_int = u.restrict(SpaceSet::Interior, None)?;
    let u_bd = u.restrict(SpaceSet::Boundary, None)?;
    out.push(integral_identity(
        "dx_summation_by_parts",
        &u_int.mul(&w.diff_x()?)?,
        &[
            (-1.0, &w.mul(&du)?),
            (1.0, &times_normal(&u_bd.mul(&trw)?, normals)),
        ],
    ));
    out.push(integral_identity(
        "ax_summation_by_parts",
        &u_int.mul(&w.avg_x()?)?,
        &[(1.0, &w.mul(&au)?), (-0.5 * dx, &u_bd.mul(&trw)?)],
    ));

    // Time product rules on 𝒩̄* → 𝒩 and 𝒩̄ → 𝒩*.
    let plus = |h: &GridFn| h.shift_t(Shift::Plus);
    let minus = |h: &GridFn| h.shift_t(Shift::Minus);
    let (dtf, dtg) = (f.diff_t()?, g.diff_t()?);
    let dtfg = f.mul(g)?.diff_t()?;
    out.push(pointwise(
        "dt_product_lagged",
        &dtfg,
        &[dtf.mul(&minus(g)?)?, plus(f)?.mul(&dtg)?],
    )?);
    out.push(pointwise(
        "dt_product_led",
        &dtfg,
        &[dtf.mul(&plus(g)?)?, minus(f)?.mul(&dtg)?],
    )?);
    let (dtfp, dtgp) = (fp.diff_t()?, gp.diff_t()?);
    let dtfgp = fp.mul(gp)?.diff_t()?;
    out.push(pointwise(
        "dt_product_lagged_primal",
        &dtfgp,
        &[dtfp.mul(&minus(gp)?)?, plus(fp)?.mul(&dtgp)?],
    )?);
    out.push(pointwise(
        "dt_product_led_primal",
        &dtfgp,
        &[dtfp.mul(&plus(gp)?)?, minus(fp)?.mul(&dtgp)?],
    )?);

    // Modulus forms: t^±(f) D_t f* + t^±(f*) D_t f = D_t|f|² ± Δt |D_t f|².
    let dt = f.time_mesh().map(|t| t.dt()).unwrap_or(1.0);
    let fc = f.conj();
    let dt_abs2 = f.abs2().diff_t()?;
    let dtf_abs2 = dtf.abs2();
    for (name, shifted, sign) in [
        ("dt_modulus_lagged", Shift::Minus, -1.0),
        ("dt_modulus_led", Shift::Plus, 1.0),
    ] {
        let lhs = f
            .shift_t(shifted)?
            .mul(&fc.diff_t()?)?
            .add(&fc.shift_t(shifted)?.mul(&dtf)?)?;
        out.push(pointwise(
            name,
            &lhs,
            &[
                dt_abs2.clone(),
                dtf_abs2.scale(Complex64::new(sign * dt, 0.0)),
            ],
        )?);
    }

    // ∫_𝒩 f t^-(g) = ∫_{𝒩*} t^+(f) g with f on 𝒩, g on 𝒩*.
    let f_n = fp.restrict(SpaceSet::Closure, Some(TimeSet::Primal))?;
    let g_star = fd;
    out.push(integral_identity(
        "time_shift_pairing",
        &f_n.mul(&g_star.shift_t_onto(Shift::Minus, TimeSet::Primal)?)?,
        &[(
            1.0,
            &f_n.shift_t_onto(Shift::Plus, TimeSet::Dual)?.mul(g_star)?,
        )],
    ));

    // Time summation by parts, f on 𝒩̄ and g on 𝒩̄*.
    let n_t = [-1.0, 1.0];
    let g_dual = g.restrict(SpaceSet::Closure, Some(TimeSet::Dual))?;
    let bd = fp
        .restrict(SpaceSet::Closure, Some(TimeSet::Boundary))?
        .mul(&g.shift_t_onto(Shift::Plus, TimeSet::Boundary)?)?;
    out.push(integral_identity(
        "dt_summation_by_parts",
        &f_n.mul(&dtg)?,
        &[
            (-1.0, &g_dual.mul(&dtfp)?),
            (1.0, &times_normal_t(&bd, n_t)),
        ],
    ));

    // f, g on 𝒩̄*: ∫_𝒩 t^-(f) D_t g = −∫_𝒩 D_t f t^+(g) + ∫_{∂𝒩} t^+(fg) n_t.
    let bd = f.mul(g)?.shift_t_onto(Shift::Plus, TimeSet::Boundary)?;
    out.push(integral_identity(
        "dt_summation_by_parts_dual",
        &minus(f)?.mul(&dtg)?,
        &[
            (-1.0, &dtf.mul(&plus(g)?)?),
            (1.0, &times_normal_t(&bd, n_t)),
        ],
    ));

    // f, g on 𝒩̄: ∫_{𝒩*} t^+(f) D_t g = −∫_{𝒩*} t^-(g) D_t f + ∫_{∂𝒩} f g n_t.
    let bd = fp
        .mul(gp)?
        .restrict(SpaceSet::Closure, Some(TimeSet::Boundary))?;
    out.push(integral_identity(
        "dt_summation_by_parts_primal",
        &plus(fp)?.mul(&dtgp)?,
        &[
            (-1.0, &minus(gp)?.mul(&dtfp)?),
            (1.0, &times_normal_t(&bd, n_t)),
        ],
    ));

    // Space-time: D_x of a dual-space field commutes with D_t.
    let dxt = gd.diff_x()?.diff_t()?;
    let dtx = gd.diff_t()?.diff_x()?;
    out.push(pointwise("dx_dt_commute", &dxt, &[dtx])?);

    Ok(out)
}

fn times_normal_t(u: &GridFn, normals: [f64; 2]) -> GridFn {
    let ns = u.space_len();
    let mut out = u.clone();
    for (k, &n) in normals.iter().enumerate() {
        for z in out.slice_mut(k).iter_mut().take(ns) {
            *z *= n;
        }
    }
    out
}

/// Identity residuals for pseudorandom complex fields on an `(M, N, T)` mesh.
pub fn check_identities(
    m: usize,
    n: usize,
    t_final: f64,
    seed: u64,
) -> Result<Vec<IdentityResidual>> {
    let (smesh, tmesh) = build_meshes(m, n, t_final)?;
    let mut rng = crate::seeded_rng(seed);
    check_identities_with(smesh, tmesh, &mut rng)
}

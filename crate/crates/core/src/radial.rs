//! The radial equation
//!
//! ```text
//! -ψ''(r) + Q/r² ψ(r) = ((E - V(r))² - m²) ψ(r),   Q = (2ℓ+d-1)(2ℓ+d-3)/4
//! ```
//!
//! and its fixed-energy integration. At a trial energy the equation is
//! linear, so it is integrated outward from the regular small-`r`
//! behaviour and inward from the decaying tail, and the two pieces are
//! compared at the outermost classical turning point.
//!
//! For `d = 1` the problem lives on the half line with even or odd parity
//! at the origin (`Q = 0`); the potential is assumed symmetric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::PotentialFamily;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("dimension d = {0} not allowed here (angular constant needs d >= 2)")]
    Dimension(u32),
    #[error("mass must be positive and finite, got {0}")]
    Mass(f64),
    #[error("trial energy {energy} outside the discrete window (-{mass}, {mass})")]
    EnergyWindow { energy: f64, mass: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("start radius must be positive for d > 1, got {0}")]
    StartRadius(f64),
    #[error("no regular solution: leading exponent {0} <= 0")]
    Irregular(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl std::str::FromStr for Parity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(format!("parity must be `even` or `odd`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

/// `Q = (2ℓ+d-1)(2ℓ+d-3)/4`, evaluated in integers so the result is exact.
pub fn angular_constant(d: u32, ell: u32) -> Result<f64, RadialError> {
    if d < 2 {
        return Err(RadialError::Dimension(d));
    }
    let a = 2 * i64::from(ell) + i64::from(d) - 1;
    Ok((a * (a - 2)) as f64 / 4.0)
}

/// `L = ℓ + (d-3)/2`, the equivalent three-dimensional angular momentum.
pub fn effective_l(d: u32, ell: u32) -> Result<f64, RadialError> {
    if d < 2 {
        return Err(RadialError::Dimension(d));
    }
    Ok(f64::from(ell) + (f64::from(d) - 3.0) / 2.0)
}

/// Everything defining one radial eigenproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProblem {
    dim: u32,
    ell: Option<u32>,
    parity: Option<Parity>,
    mass: f64,
    family: PotentialFamily,
}

impl RadialProblem {
    /// A `d >= 2` problem in angular channel `ell`.
    pub fn new(dim: u32, ell: u32, mass: f64, family: PotentialFamily) -> Result<Self, RadialError> {
        if dim < 2 {
            return Err(RadialError::Dimension(dim));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(RadialError::Mass(mass));
        }
        Ok(Self { dim, ell: Some(ell), parity: None, mass, family })
    }

    /// A `d = 1` problem of fixed parity.
    pub fn one_dimensional(parity: Parity, mass: f64, family: PotentialFamily) -> Result<Self, RadialError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(RadialError::Mass(mass));
        }
        Ok(Self { dim: 1, ell: None, parity: Some(parity), mass, family })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn ell(&self) -> Option<u32> {
        self.ell
    }

    pub fn parity(&self) -> Option<Parity> {
        self.parity
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn with_family(&self, family: PotentialFamily) -> Self {
        Self { family, ..self.clone() }
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self, RadialError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(RadialError::Mass(mass));
        }
        Ok(Self { mass, ..self.clone() })
    }

    /// `Q`; zero in one dimension.
    pub fn q(&self) -> f64 {
        match self.ell {
            Some(ell) => angular_constant(self.dim, ell).expect("d >= 2 checked on construction"),
            None => 0.0,
        }
    }

    /// `L = ℓ + (d-3)/2`, or `None` for `d = 1`.
    pub fn effective_l(&self) -> Option<f64> {
        self.ell.map(|ell| effective_l(self.dim, ell).expect("d >= 2 checked on construction"))
    }

    /// Exponent `s` of the regular solution `ψ ~ r^s` at the origin.
    ///
    /// For a `-v/r` singularity the `v²/r²` part of `(E - V)²` shifts the
    /// exponent to `1/2 + sqrt((L+1/2)² - v²)`.
    pub fn leading_exponent(&self) -> f64 {
        match (self.effective_l(), self.parity) {
            (Some(l), _) => match self.family.coulomb_singularity() {
                Some(v) => 0.5 + ((l + 0.5).powi(2) - v * v).max(0.0).sqrt(),
                None => l + 1.0,
            },
            (None, Some(Parity::Odd)) => 1.0,
            (None, _) => 0.0,
        }
    }

    /// `k(r)` in `ψ'' = k ψ`: positive where the state is classically forbidden.
    #[inline]
    pub fn k(&self, r: f64, energy: f64) -> f64 {
        let q = self.q();
        k_of(q, self.mass * self.mass, &self.family, r, energy)
    }

    /// Smallest length over which the potential changes appreciably near the
    /// origin; used to place the first grid node.
    fn length_scale(&self) -> f64 {
        let f = &self.family;
        let scale = f
            .param("a")
            .or_else(|| f.param("b"))
            .or_else(|| f.param("R"))
            .unwrap_or(1.0);
        match f.table() {
            Some(t) => {
                let r = t.samples().0;
                r.windows(2).map(|w| w[1] - w[0]).fold(scale, f64::min)
            }
            None => scale,
        }
    }
}

#[inline]
fn k_of(q: f64, m2: f64, family: &PotentialFamily, r: f64, energy: f64) -> f64 {
    let w = energy - family.value(r);
    let centrifugal = if q == 0.0 { 0.0 } else { q / (r * r) };
    centrifugal + m2 - w * w
}

/// Leading regular behaviour `(ψ(r0), ψ'(r0))`, up to overall scale.
///
/// `d > 1`: `ψ = r^s` with `s` from [`RadialProblem::leading_exponent`];
/// `d = 1` even: `(1, 0)`; `d = 1` odd: `(r0, 1)`.
pub fn series_start(problem: &RadialProblem, r0: f64) -> Result<(f64, f64), RadialError> {
    match problem.parity() {
        Some(Parity::Even) => Ok((1.0, 0.0)),
        Some(Parity::Odd) => Ok((r0, 1.0)),
        None => {
            if !(r0 > 0.0) {
                return Err(RadialError::StartRadius(r0));
            }
            let s = problem.leading_exponent();
            if s <= 0.0 {
                return Err(RadialError::Irregular(s));
            }
            Ok((r0.powf(s), s * r0.powf(s - 1.0)))
        }
    }
}

/// Start data including the first energy-dependent correction:
/// `r^s (1 + c r)` for `-v/r` potentials, `r^s (1 + β r²)` otherwise.
fn start_values(problem: &RadialProblem, r0: f64, energy: f64) -> Result<(f64, f64), RadialError> {
    let s = problem.leading_exponent();
    if problem.dim() > 1 && !(s > 0.0) {
        return Err(RadialError::Irregular(s));
    }
    if r0 == 0.0 {
        return match problem.parity() {
            Some(Parity::Even) => Ok((1.0, 0.0)),
            _ if s == 1.0 => Ok((0.0, 1.0)),
            _ if s > 1.0 => Ok((0.0, 0.0)),
            _ => Err(RadialError::StartRadius(r0)),
        };
    }
    let m2 = problem.mass() * problem.mass();
    let (psi, dpsi) = match problem.family().coulomb_singularity() {
        Some(v) => {
            let c = -energy * v / s;
            let base = r0.powf(s);
            (base * (1.0 + c * r0), base * (s / r0 + c * (s + 1.0)))
        }
        None => {
            let w = energy - problem.family().value(0.0);
            let beta = (m2 - w * w) / (4.0 * s + 2.0);
            let base = r0.powf(s);
            let (p, dp) = (1.0 + beta * r0 * r0, 2.0 * beta * r0);
            // d/dr [r^s p] = r^s (s p / r + p')
            let ds = if s == 0.0 { 0.0 } else { s * p / r0 };
            (base * p, base * (ds + dp))
        }
    };
    Ok((psi, dpsi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridLayout {
    Uniform,
    LogUniform,
}

/// A concrete radial grid, uniform either in `r` or in `ln r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub layout: GridLayout,
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
}

pub const MIN_GRID_POINTS: usize = 200;

impl RadialGrid {
    pub fn new(layout: GridLayout, r_min: f64, r_max: f64, n_points: usize) -> Result<Self, RadialError> {
        if n_points < MIN_GRID_POINTS {
            return Err(RadialError::Grid(format!("n_points = {n_points} < {MIN_GRID_POINTS}")));
        }
        if !(r_max.is_finite() && r_max > r_min) {
            return Err(RadialError::Grid(format!("need r_max > r_min, got [{r_min}, {r_max}]")));
        }
        match layout {
            GridLayout::Uniform if !(r_min >= 0.0) => {
                Err(RadialError::Grid(format!("uniform grid needs r_min >= 0, got {r_min}")))
            }
            GridLayout::LogUniform if !(r_min > 0.0) => {
                Err(RadialError::Grid(format!("log grid needs r_min > 0, got {r_min}")))
            }
            _ => Ok(Self { layout, r_min, r_max, n_points }),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Step in the grid variable (`r` or `ln r`).
    pub fn step(&self) -> f64 {
        let span = match self.layout {
            GridLayout::Uniform => self.r_max - self.r_min,
            GridLayout::LogUniform => (self.r_max / self.r_min).ln(),
        };
        span / (self.n_points - 1) as f64
    }

    fn x0(&self) -> f64 {
        match self.layout {
            GridLayout::Uniform => self.r_min,
            GridLayout::LogUniform => self.r_min.ln(),
        }
    }

    /// Grid variable (`r` or `ln r`) of a radius.
    pub fn x_of(&self, r: f64) -> f64 {
        match self.layout {
            GridLayout::Uniform => r,
            GridLayout::LogUniform => r.ln(),
        }
    }

    #[inline]
    fn r_of_x(&self, x: f64) -> f64 {
        match self.layout {
            GridLayout::Uniform => x,
            GridLayout::LogUniform => x.exp(),
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i == self.n_points - 1 {
            return self.r_max;
        }
        if i == 0 {
            return self.r_min;
        }
        self.r_of_x(self.x0() + i as f64 * self.step())
    }

    pub fn radii(&self) -> Vec<f64> {
        let (x0, h, last) = (self.x0(), self.step(), self.n_points - 1);
        (0..self.n_points)
            .map(|i| match i {
                0 => self.r_min,
                i if i == last => self.r_max,
                i => self.r_of_x(x0 + i as f64 * h),
            })
            .collect()
    }

    /// `dr/dx` at each node.
    pub fn jacobians(&self) -> Vec<f64> {
        match self.layout {
            GridLayout::Uniform => vec![1.0; self.n_points],
            GridLayout::LogUniform => self.radii(),
        }
    }

    /// Index of the node closest to `r`.
    pub fn nearest_index(&self, r: f64) -> usize {
        let x = match self.layout {
            GridLayout::Uniform => r,
            GridLayout::LogUniform => r.max(self.r_min).ln(),
        };
        let i = ((x - self.x0()) / self.step()).round();
        (i.max(0.0) as usize).min(self.n_points - 1)
    }

    /// Same range and layout with twice as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_points: (self.n_points - 1) * factor + 1, ..*self }
    }
}

/// Grid settings from which a [`RadialGrid`] is built per problem and trial
/// energy. Lengths are in units of `1/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// `None` picks log-uniform.
    pub layout: Option<GridLayout>,
    pub r_min: f64,
    /// `None` selects `max(40, 25/κ)` with `κ = sqrt(m² - E²)` at the trial energy.
    pub r_max: Option<f64>,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { layout: None, r_min: 1.0e-6, r_max: None, n_points: 4000 }
    }
}

/// Energy margin keeping scans away from the continuum thresholds `±m`.
pub const THRESHOLD_MARGIN: f64 = 1.0e-6;

impl GridSpec {
    pub fn validate(&self) -> Result<(), RadialError> {
        if self.n_points < MIN_GRID_POINTS {
            return Err(RadialError::Grid(format!("n_points = {} < {MIN_GRID_POINTS}", self.n_points)));
        }
        if !(self.r_min.is_finite() && self.r_min >= 0.0) {
            return Err(RadialError::Grid(format!("r_min = {}", self.r_min)));
        }
        if let Some(r_max) = self.r_max {
            if !(r_max.is_finite() && r_max > self.r_min) {
                return Err(RadialError::Grid(format!("r_max = {r_max}")));
            }
        }
        Ok(())
    }

    /// Truncation radius for a trial energy (physical units).
    pub fn r_max_for(&self, mass: f64, energy: f64) -> f64 {
        if let Some(r) = self.r_max {
            return r / mass;
        }
        let edge = mass - mass * THRESHOLD_MARGIN;
        let kappa_min = (mass * mass - edge * edge).sqrt();
        let kappa = (mass * mass - energy * energy).max(0.0).sqrt().max(kappa_min);
        (40.0 / mass).max(25.0 / kappa)
    }

    /// The grid used to shoot `problem` at `energy`.
    pub fn resolve(&self, problem: &RadialProblem, energy: f64) -> Result<RadialGrid, RadialError> {
        self.validate()?;
        let m = problem.mass();
        let layout = self.layout.unwrap_or(GridLayout::LogUniform);
        let r_max = self.r_max_for(m, energy);
        let r_min = match layout {
            GridLayout::LogUniform => (self.r_min / m).min(1.0e-3 * problem.length_scale()),
            GridLayout::Uniform => {
                let regular_at_origin =
                    problem.q() == 0.0 && problem.family().coulomb_singularity().is_none();
                if regular_at_origin {
                    0.0
                } else {
                    self.r_min / m
                }
            }
        };
        RadialGrid::new(layout, r_min, r_max, self.n_points)
    }
}

/// Result of one fixed-energy shoot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootResult {
    pub energy: f64,
    pub grid: RadialGrid,
    /// Joined solution: outward piece up to the match node, inward piece
    /// scaled to continuity beyond it. Not normalized.
    pub psi: Vec<f64>,
    /// Sturm count: interior sign changes of the joined solution plus one
    /// when the outward solution, continued past the match point, would
    /// cross zero before infinity. Jumps by one at each eigenvalue.
    pub nodes: usize,
    /// Interior sign changes of the joined solution itself.
    pub joined_nodes: usize,
    /// `(ψ'_out/ψ_out - ψ'_in/ψ_in) / κ` at the match node.
    pub mismatch: f64,
    /// Normalized Wronskian `(ψ'_out ψ_in - ψ_out ψ'_in) / (κ |u_out| |u_in|)`,
    /// `u = (ψ, ψ'/κ)`. Same sign as the joined mismatch, but continuous
    /// through zeros of `ψ_out`.
    pub wronskian: f64,
    pub match_index: usize,
    pub kappa: f64,
    pub diverged: bool,
}

const RESCALE_AT: f64 = 1.0e150;

/// `ψ'' = k ψ` sampled for RK4 in the grid variable `x`: `dψ/dx = J φ`,
/// `dφ/dx = J k ψ` with `J = dr/dx`. The equation is linear, so each step
/// only needs `J` and `J k` at the two nodes and the midpoint. Cells
/// containing a potential breakpoint are integrated in two sub-steps.
struct Coefficients<'a> {
    jac: Vec<f64>,
    jk: Vec<f64>,
    jac_mid: Vec<f64>,
    jk_mid: Vec<f64>,
    // (cell index, breakpoint radius)
    splits: Vec<(usize, f64)>,
    problem: &'a RadialProblem,
    energy: f64,
    grid: &'a RadialGrid,
    radii: &'a [f64],
}

impl<'a> Coefficients<'a> {
    fn new(problem: &'a RadialProblem, energy: f64, grid: &'a RadialGrid, radii: &'a [f64]) -> Self {
        let q = problem.q();
        let m2 = problem.mass() * problem.mass();
        let family = problem.family();
        let n = radii.len();
        let half = 0.5 * grid.step();
        let mid: Vec<f64> = match grid.layout {
            GridLayout::Uniform => radii.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            GridLayout::LogUniform => {
                let ratio = half.exp();
                radii[..n - 1].iter().map(|r| r * ratio).collect()
            }
        };
        let jac_of = |r: f64| match grid.layout {
            GridLayout::Uniform => 1.0,
            GridLayout::LogUniform => r,
        };
        let jac: Vec<f64> = radii.iter().map(|&r| jac_of(r)).collect();
        let jac_mid: Vec<f64> = mid.iter().map(|&r| jac_of(r)).collect();
        let jk = radii.iter().zip(&jac).map(|(&r, j)| j * k_of(q, m2, family, r, energy)).collect();
        let jk_mid = mid.iter().zip(&jac_mid).map(|(&r, j)| j * k_of(q, m2, family, r, energy)).collect();
        let splits = family
            .breakpoints()
            .into_iter()
            .filter_map(|b| {
                let hi = radii.partition_point(|&r| r <= b);
                (hi > 0 && hi < n && radii[hi - 1] < b).then_some((hi - 1, b))
            })
            .collect();
        Self { jac, jk, jac_mid, jk_mid, splits, problem, energy, grid, radii }
    }

    /// RK4 step from node `from` to the adjacent node `to`.
    #[inline]
    fn step(&self, from: usize, to: usize, h: f64, psi: f64, dpsi: f64) -> (f64, f64) {
        let cell = from.min(to);
        if let Some(&(_, b)) = self.splits.iter().find(|(c, _)| *c == cell) {
            return self.split_step(from, to, b, psi, dpsi);
        }
        let (j0, g0) = (self.jac[from], self.jk[from]);
        let (jm, gm) = (self.jac_mid[cell], self.jk_mid[cell]);
        let (j1, g1) = (self.jac[to], self.jk[to]);
        rk4_linear((j0, g0), (jm, gm), (j1, g1), h, psi, dpsi)
    }

    fn split_step(&self, from: usize, to: usize, b: f64, psi: f64, dpsi: f64) -> (f64, f64) {
        let (r_from, r_to) = (self.radii[from], self.radii[to]);
        let (mut p, mut d) = (psi, dpsi);
        for (ra, rb) in [(r_from, b), (b, r_to)] {
            // evaluate V on the side of `b` this sub-step lies on
            let left = ra.min(rb) < b;
            let coeff = |r: f64| {
                let rv = if left { r.min(b.next_down()) } else { r.max(b) };
                let w = self.energy - self.problem.family().value(rv);
                let q = self.problem.q();
                let centrifugal = if q == 0.0 { 0.0 } else { q / (r * r) };
                let k = centrifugal + self.problem.mass().powi(2) - w * w;
                let j = match self.grid.layout {
                    GridLayout::Uniform => 1.0,
                    GridLayout::LogUniform => r,
                };
                (j, j * k)
            };
            let (xa, xb, r_mid) = match self.grid.layout {
                GridLayout::Uniform => (ra, rb, 0.5 * (ra + rb)),
                GridLayout::LogUniform => (ra.ln(), rb.ln(), (ra * rb).sqrt()),
            };
            (p, d) = rk4_linear(coeff(ra), coeff(r_mid), coeff(rb), xb - xa, p, d);
        }
        (p, d)
    }
}

#[inline]
fn rk4_linear(c0: (f64, f64), cm: (f64, f64), c1: (f64, f64), h: f64, psi: f64, dpsi: f64) -> (f64, f64) {
    let ((j0, g0), (jm, gm), (j1, g1)) = (c0, cm, c1);
    let (a1, b1) = (j0 * dpsi, g0 * psi);
    let (p2, d2) = (psi + 0.5 * h * a1, dpsi + 0.5 * h * b1);
    let (a2, b2) = (jm * d2, gm * p2);
    let (p3, d3) = (psi + 0.5 * h * a2, dpsi + 0.5 * h * b2);
    let (a3, b3) = (jm * d3, gm * p3);
    let (p4, d4) = (psi + h * a3, dpsi + h * b3);
    let (a4, b4) = (j1 * d4, g1 * p4);
    (
        psi + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        dpsi + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
}

fn sign_changes(values: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0_f64;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

/// Match node: the outermost classical turning point, i.e. the first node
/// past the last classically allowed one (`k < 0`). Falls back to `r_max/2`
/// when no node is allowed.
fn match_index(coeffs: &Coefficients, grid: &RadialGrid) -> usize {
    let n = coeffs.jk.len();
    let last_allowed = (1..n).rev().find(|&i| coeffs.jk[i] < 0.0);
    let idx = match last_allowed {
        Some(i) => i + 1,
        None => grid.nearest_index(0.5 * grid.r_max),
    };
    idx.clamp(2, n - 3)
}

/// Integrates the radial equation at a fixed trial energy.
pub fn integrate_at_energy(
    problem: &RadialProblem,
    energy: f64,
    grid: &RadialGrid,
) -> Result<ShootResult, RadialError> {
    let m = problem.mass();
    if !(energy.is_finite() && energy.abs() < m) {
        return Err(RadialError::EnergyWindow { energy, mass: m });
    }
    if problem.dim() > 1 && grid.r_min == 0.0 && problem.q() != 0.0 {
        return Err(RadialError::StartRadius(0.0));
    }
    if grid.r_min == 0.0 && problem.family().coulomb_singularity().is_some() {
        return Err(RadialError::StartRadius(0.0));
    }
    let kappa = (m * m - energy * energy).sqrt();
    let radii = grid.radii();
    let n = radii.len();
    let h = grid.step();
    let coeffs = Coefficients::new(problem, energy, grid, &radii);

    let mut mi = match_index(&coeffs, grid);

    // outward
    let mut psi = vec![0.0; n];
    let mut dpsi = vec![0.0; n];
    let (p0, d0) = start_values(problem, grid.r_min, energy)?;
    psi[0] = p0;
    dpsi[0] = d0;
    let mut diverged = false;
    for i in 0..mi {
        let (p, d) = coeffs.step(i, i + 1, h, psi[i], dpsi[i]);
        psi[i + 1] = p;
        dpsi[i + 1] = d;
        if !(p.is_finite() && d.is_finite()) {
            diverged = true;
            break;
        }
        if p.abs() > RESCALE_AT || d.abs() > RESCALE_AT {
            for j in 0..=i + 1 {
                psi[j] /= RESCALE_AT;
                dpsi[j] /= RESCALE_AT;
            }
        }
    }
    if !diverged {
        let peak = psi[..=mi].iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if psi[mi].abs() < 1e-8 * peak && mi > 2 {
            mi -= 1;
        }
    }

    // inward, from exp(-κ(r_max - r))
    let mut psi_in = vec![0.0; n];
    let mut dpsi_in = vec![0.0; n];
    psi_in[n - 1] = 1.0;
    dpsi_in[n - 1] = -kappa;
    if !diverged {
        for i in (mi + 1..n).rev() {
            let (p, d) = coeffs.step(i, i - 1, -h, psi_in[i], dpsi_in[i]);
            psi_in[i - 1] = p;
            dpsi_in[i - 1] = d;
            if !(p.is_finite() && d.is_finite()) {
                diverged = true;
                break;
            }
            if p.abs() > RESCALE_AT || d.abs() > RESCALE_AT {
                for j in i - 1..n {
                    psi_in[j] /= RESCALE_AT;
                    dpsi_in[j] /= RESCALE_AT;
                }
            }
        }
    }

    if diverged {
        return Ok(ShootResult {
            energy,
            grid: *grid,
            psi,
            nodes: 0,
            joined_nodes: 0,
            mismatch: f64::NAN,
            wronskian: f64::NAN,
            match_index: mi,
            kappa,
            diverged,
        });
    }

    let (po, dout) = (psi[mi], dpsi[mi]);
    let (pi, din) = (psi_in[mi], dpsi_in[mi]);
    let mismatch = (dout / po - din / pi) / kappa;
    let norm_out = po.hypot(dout / kappa);
    let norm_in = pi.hypot(din / kappa);
    let wronskian = (dout * pi - po * din) / (kappa * norm_out * norm_in);

    let scale = po / pi;
    for j in mi + 1..n {
        psi[j] = psi_in[j] * scale;
    }
    let joined_nodes = sign_changes(&psi[1..n - 1]);
    // The outward solution continued past the match point picks up one more
    // zero iff its log-derivative lies below the decaying one.
    let extra = usize::from(mismatch < 0.0 || (po == 0.0 && wronskian < 0.0));
    let nodes = joined_nodes + extra;
    let diverged = !psi.iter().all(|v| v.is_finite());

    Ok(ShootResult {
        energy,
        grid: *grid,
        psi,
        nodes,
        joined_nodes,
        mismatch,
        wronskian,
        match_index: mi,
        kappa,
        diverged,
    })
}

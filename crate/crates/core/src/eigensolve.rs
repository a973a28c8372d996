//! Bound states by node-guided bracketing and bisection.
//!
//! The Sturm count returned by [`integrate_at_energy`] jumps by one at each
//! eigenvalue of the usual orientation, so the `n`-th level is the energy
//! where the count steps from `n` to `n + 1`. A uniform scan of the
//! discrete window brackets that step, bisection narrows it to `e_tol`, and
//! a short regula-falsi pass on the mismatch polishes the root.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{validate_admissible, PotentialError, Violation};
use crate::quadrature;
use crate::radial::{integrate_at_energy, GridSpec, RadialError, RadialGrid, RadialProblem, ShootResult, THRESHOLD_MARGIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("problem not admissible: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Inadmissible(Vec<Violation>),
    #[error("state n = {n} not bound at these parameters (no node-count step in the energy window)")]
    NotBound { n: usize },
    #[error("bisection did not converge within {iterations} steps; last bracket [{lo}, {hi}]")]
    NonConvergence { lo: f64, hi: f64, iterations: usize },
    #[error("integration diverged at E = {0}")]
    Diverged(f64),
    #[error("converged state has {got} nodes, expected {expected}")]
    NodeMismatch { expected: usize, got: usize },
    #[error("cannot normalize: {0}")]
    Normalization(String),
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub e_scan_points: usize,
    pub e_tol: f64,
    pub max_bisections: usize,
    pub grid: GridSpec,
    pub normalize_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            e_scan_points: 400,
            e_tol: 1.0e-10,
            max_bisections: 200,
            grid: GridSpec::default(),
            normalize_tol: 1.0e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.e_tol > 0.0) {
            return Err(SolveError::Config(format!("e_tol must be positive, got {}", self.e_tol)));
        }
        if self.e_scan_points < 10 {
            return Err(SolveError::Config(format!("e_scan_points must be >= 10, got {}", self.e_scan_points)));
        }
        if !(self.normalize_tol > 0.0) {
            return Err(SolveError::Config(format!("normalize_tol must be positive, got {}", self.normalize_tol)));
        }
        self.grid.validate()?;
        Ok(())
    }

    /// Same settings on a grid with twice the intervals.
    pub fn doubled_grid(&self) -> Self {
        let mut out = *self;
        out.grid.n_points = 2 * self.grid.n_points - 1;
        out
    }
}

/// A converged bound state.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub energy: f64,
    pub grid: RadialGrid,
    /// Normalized, positive on the first arch.
    pub psi: Vec<f64>,
    pub nodes: usize,
    pub mismatch_residual: f64,
    pub norm_error: f64,
    /// Set when more than one root with the requested node count was found
    /// in the window; the one with the smallest mismatch is returned.
    pub ambiguous: bool,
    pub problem: RadialProblem,
    pub config: SolverConfig,
}

impl EigenResult {
    pub fn radii(&self) -> Vec<f64> {
        self.grid.radii()
    }
}

/// Energy window `[-m + ε, m - ε]` scanned for bound states.
pub fn energy_window(mass: f64) -> (f64, f64) {
    let eps = THRESHOLD_MARGIN * mass;
    (-mass + eps, mass - eps)
}

pub fn shoot(problem: &RadialProblem, energy: f64, config: &SolverConfig) -> Result<ShootResult, SolveError> {
    let grid = config.grid.resolve(problem, energy)?;
    let shot = integrate_at_energy(problem, energy, &grid)?;
    if shot.diverged {
        return Err(SolveError::Diverged(energy));
    }
    Ok(shot)
}

fn check_admissible(problem: &RadialProblem) -> Result<(), SolveError> {
    let report = validate_admissible(problem);
    if report.accepted() {
        Ok(())
    } else {
        Err(SolveError::Inadmissible(report.violations))
    }
}

/// All energy intervals in `[lo, hi]` over which the Sturm count steps
/// across `n` (count `<= n` at the low end, `> n` at the high end).
fn brackets_in(
    problem: &RadialProblem,
    n: usize,
    lo: f64,
    hi: f64,
    points: usize,
    config: &SolverConfig,
) -> Result<Vec<(f64, f64)>, SolveError> {
    let energies: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 })
        .collect();
    let mut counts = Vec::with_capacity(points);
    for &e in &energies {
        counts.push(shoot(problem, e, config)?.nodes);
    }
    Ok((0..points - 1)
        .filter(|&i| counts[i] <= n && counts[i + 1] > n)
        .map(|i| (energies[i], energies[i + 1]))
        .collect())
}

/// Finds `[E_lo, E_hi]` enclosing the `n`-th level by a uniform scan of the
/// discrete window. Returns the lowest such interval.
pub fn bracket_scan(problem: &RadialProblem, n: usize, config: &SolverConfig) -> Result<(f64, f64), SolveError> {
    config.validate()?;
    check_admissible(problem)?;
    let (lo, hi) = energy_window(problem.mass());
    brackets_in(problem, n, lo, hi, config.e_scan_points, config)?
        .first()
        .copied()
        .ok_or(SolveError::NotBound { n })
}

struct Refined {
    energy: f64,
    shot: ShootResult,
}

fn refine(
    problem: &RadialProblem,
    n: usize,
    bracket: (f64, f64),
    config: &SolverConfig,
) -> Result<Refined, SolveError> {
    let (mut lo, mut hi) = bracket;
    let mut iterations = 0;
    while hi - lo > config.e_tol {
        if iterations == config.max_bisections {
            return Err(SolveError::NonConvergence { lo, hi, iterations });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot(problem, mid, config)?.nodes <= n {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    // regula falsi (Illinois) on the normalized Wronskian inside [lo, hi]
    let mut a = (lo, shoot(problem, lo, config)?);
    let mut b = (hi, shoot(problem, hi, config)?);
    let mut best = if a.1.wronskian.abs() <= b.1.wronskian.abs() { a.clone() } else { b.clone() };
    if a.1.wronskian.signum() != b.1.wronskian.signum() {
        let (mut fa, mut fb) = (a.1.wronskian, b.1.wronskian);
        let mut side = 0;
        for _ in 0..8 {
            let e = (a.0 * fb - b.0 * fa) / (fb - fa);
            if !(e > a.0 && e < b.0) {
                break;
            }
            let shot = shoot(problem, e, config)?;
            let fe = shot.wronskian;
            if fe.abs() < best.1.wronskian.abs() {
                best = (e, shot.clone());
            }
            if fe == 0.0 {
                break;
            }
            if fe.signum() == fa.signum() {
                a = (e, shot);
                fa = fe;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = (e, shot);
                fb = fe;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
    }
    Ok(Refined { energy: best.0, shot: best.1 })
}

fn assemble(
    problem: &RadialProblem,
    n: usize,
    refined: Refined,
    ambiguous: bool,
    config: &SolverConfig,
) -> Result<EigenResult, SolveError> {
    let Refined { energy, shot } = refined;
    if shot.joined_nodes != n {
        return Err(SolveError::NodeMismatch { expected: n, got: shot.joined_nodes });
    }
    let psi = normalize(&shot.psi, &shot.grid)?;
    let norm = quadrature::integrate(&psi.iter().map(|p| p * p).collect::<Vec<_>>(), &shot.grid);
    let norm_error = (norm - 1.0).abs();
    if !(norm_error <= config.normalize_tol) {
        return Err(SolveError::Normalization(format!("norm error {norm_error:e}")));
    }
    Ok(EigenResult {
        energy,
        grid: shot.grid,
        psi,
        nodes: shot.joined_nodes,
        mismatch_residual: shot.mismatch.abs(),
        norm_error,
        ambiguous,
        problem: problem.clone(),
        config: *config,
    })
}

fn pick(
    problem: &RadialProblem,
    n: usize,
    brackets: &[(f64, f64)],
    config: &SolverConfig,
) -> Result<EigenResult, SolveError> {
    let mut candidates = Vec::with_capacity(brackets.len());
    for &b in brackets {
        candidates.push(refine(problem, n, b, config)?);
    }
    let ambiguous = candidates.len() > 1;
    let best = candidates
        .into_iter()
        .min_by(|x, y| x.shot.mismatch.abs().total_cmp(&y.shot.mismatch.abs()))
        .ok_or(SolveError::NotBound { n })?;
    assemble(problem, n, best, ambiguous, config)
}

/// The `n`-th bound state (`n` interior nodes) of `problem`.
pub fn find_state(problem: &RadialProblem, n: usize, config: &SolverConfig) -> Result<EigenResult, SolveError> {
    config.validate()?;
    check_admissible(problem)?;
    let (lo, hi) = energy_window(problem.mass());
    let brackets = brackets_in(problem, n, lo, hi, config.e_scan_points, config)?;
    pick(problem, n, &brackets, config)
}

/// Like [`find_state`], but first looks for the level in a window growing
/// around `guess`. Used for warm starts along parameter sweeps.
pub fn find_state_near(
    problem: &RadialProblem,
    n: usize,
    guess: f64,
    config: &SolverConfig,
) -> Result<EigenResult, SolveError> {
    config.validate()?;
    check_admissible(problem)?;
    let m = problem.mass();
    let (lo, hi) = energy_window(m);
    let mut half_width = 1.0e-3 * m;
    while half_width < m {
        let a = (guess - half_width).max(lo);
        let b = (guess + half_width).min(hi);
        if a < b {
            let brackets = brackets_in(problem, n, a, b, 16, config)?;
            if let Some(nearest) = brackets.iter().min_by(|x, y| {
                let dx = (0.5 * (x.0 + x.1) - guess).abs();
                let dy = (0.5 * (y.0 + y.1) - guess).abs();
                dx.total_cmp(&dy)
            }) {
                let refined = refine(problem, n, *nearest, config)?;
                return assemble(problem, n, refined, false, config);
            }
        }
        half_width *= 4.0;
    }
    find_state(problem, n, config)
}

/// Builds a state from a single shoot at a known eigen-energy on `grid`,
/// e.g. to re-express a converged state on another grid or to complete a
/// point found by parameter inversion. `n` is checked against the joined
/// node count.
pub fn state_at_energy(
    problem: &RadialProblem,
    n: usize,
    energy: f64,
    grid: &RadialGrid,
    config: &SolverConfig,
) -> Result<EigenResult, SolveError> {
    let shot = integrate_at_energy(problem, energy, grid)?;
    if shot.diverged {
        return Err(SolveError::Diverged(energy));
    }
    assemble(problem, n, Refined { energy, shot }, false, config)
}

/// Scales `psi` to unit Simpson norm, positive on the first interior arch.
pub fn normalize(psi: &[f64], grid: &RadialGrid) -> Result<Vec<f64>, SolveError> {
    if psi.len() != grid.n_points() {
        return Err(SolveError::Normalization("sample count does not match the grid".into()));
    }
    if psi.iter().any(|p| !p.is_finite()) {
        return Err(SolveError::Normalization("non-finite sample".into()));
    }
    let squares: Vec<f64> = psi.iter().map(|p| p * p).collect();
    let norm = quadrature::integrate(&squares, grid);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(SolveError::Normalization(format!("norm {norm}")));
    }
    let first = psi.iter().skip(1).find(|p| **p != 0.0).copied().unwrap_or(psi[0]);
    let scale = first.signum() / norm.sqrt();
    Ok(psi.iter().map(|p| p * scale).collect())
}

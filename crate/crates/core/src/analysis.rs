//! Energy-ordering identity and parameter derivatives.
//!
//! Two exact consequences of the radial equation are evaluated on solved
//! states:
//!
//! ```text
//! (E2 - E1) ∫ W ψ1 ψ2 dr = ∫ (V2 - V1) W ψ1 ψ2 dr,     W = E1 + E2 - V1 - V2
//!
//! E'(a) = (E <V_a> - <V V_a>) / (E - <V>)
//! ```
//!
//! The first holds for any two states of the same channel. With `V1 <= V2 <= 0`,
//! non-negative energies and node-free states, `W >= 0` and `ψ1 ψ2 >= 0`, so
//! the energies are ordered like the potentials. The second gives the sign
//! of `E'(a)` from the sign of `∂V/∂a` whenever `E >= 0`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::eigensolve::{find_state, find_state_near, state_at_energy, EigenResult, SolveError, SolverConfig};
use crate::potentials::{PotentialError, PotentialFamily};
use crate::quadrature;
use crate::radial::{RadialGrid, RadialProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("states are not comparable: {0}")]
    Incompatible(String),
    #[error("state is not normalized (norm error {0:e})")]
    Unnormalized(f64),
    #[error("integrand is not finite on the grid (at r = {0})")]
    NonFinite(f64),
    #[error("E - <V> = {0:e} is too close to zero")]
    DegenerateDenominator(f64),
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("finite-difference stencil failed at a = {a}: {source}; near a fold, trace the curve in E instead")]
    Stencil { a: f64, source: SolveError },
    #[error("check aborted after {} points: {source}", .completed.len())]
    Partial { completed: Vec<ParameterPoint>, source: Box<AnalysisError> },
}

/// Energy `E1 + E2 - V1(r) - V2(r)`.
pub fn weight_function(e1: f64, e2: f64, v1: &PotentialFamily, v2: &PotentialFamily, r: f64) -> f64 {
    e1 + e2 - v1.value(r) - v2.value(r)
}

/// Both sides of the ordering identity for a pair of states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub e1: f64,
    pub e2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub w_min: f64,
    /// Observed ordering `E1 <= E2`.
    pub ordering_ok: bool,
    /// `V1 <= V2 <= 0` on the grid, `E1, E2 >= 0`, both states node-free.
    pub hypotheses_ok: bool,
    /// An energy within `1e-9` of zero; the hypotheses are treated inclusively.
    pub near_zero_energy: bool,
}

impl ComparisonReport {
    /// `Some(ordering_ok)` when the hypotheses hold, `None` otherwise.
    pub fn verdict(&self) -> Option<bool> {
        self.hypotheses_ok.then_some(self.ordering_ok)
    }

    /// Hypotheses verified and the ordering still fails.
    pub fn contradicts_theorem(&self) -> bool {
        self.verdict() == Some(false)
    }
}

const NORM_CHECK_TOL: f64 = 1e-6;
/// Relative slack in the sampled `V1 <= V2` test; absorbs rounding where
/// the potentials touch.
const ORDER_SLACK: f64 = 1e-12;
const ZERO_ENERGY_FLAG: f64 = 1e-9;

fn check_normalized(res: &EigenResult) -> Result<(), AnalysisError> {
    let norm = quadrature::integrate(&res.psi.iter().map(|p| p * p).collect::<Vec<_>>(), &res.grid);
    if (norm - 1.0).abs() > NORM_CHECK_TOL {
        return Err(AnalysisError::Unnormalized((norm - 1.0).abs()));
    }
    Ok(())
}

fn same_channel(a: &RadialProblem, b: &RadialProblem) -> Result<(), AnalysisError> {
    if a.dim() != b.dim() || a.ell() != b.ell() || a.parity() != b.parity() {
        return Err(AnalysisError::Incompatible("different (d, l, parity) channels".into()));
    }
    if a.mass() != b.mass() {
        return Err(AnalysisError::Incompatible("different masses".into()));
    }
    Ok(())
}

/// Re-expresses `res` on `grid` by integrating at its converged energy.
fn on_grid(res: &EigenResult, grid: &RadialGrid) -> Result<EigenResult, AnalysisError> {
    if res.grid == *grid {
        return Ok(res.clone());
    }
    Ok(state_at_energy(&res.problem, res.nodes, res.energy, grid, &res.config)?)
}

/// Evaluates both sides of the identity for two states of the same channel.
///
/// States on different grids are both re-integrated at their converged
/// energies on a common grid spanning both ranges with the larger point
/// count.
pub fn comparison_identity(res1: &EigenResult, res2: &EigenResult) -> Result<ComparisonReport, AnalysisError> {
    same_channel(&res1.problem, &res2.problem)?;
    check_normalized(res1)?;
    check_normalized(res2)?;
    let (s1, s2) = if res1.grid == res2.grid {
        (res1.clone(), res2.clone())
    } else {
        let (g1, g2) = (res1.grid, res2.grid);
        if g1.r_max <= g2.r_min || g2.r_max <= g1.r_min {
            return Err(AnalysisError::Incompatible("grids do not overlap".into()));
        }
        let common = RadialGrid::new(
            g1.layout,
            g1.r_min.min(g2.r_min),
            g1.r_max.max(g2.r_max),
            g1.n_points.max(g2.n_points),
        )
        .map_err(SolveError::from)?;
        (on_grid(res1, &common)?, on_grid(res2, &common)?)
    };

    let grid = s1.grid;
    let radii = grid.radii();
    let (e1, e2) = (s1.energy, s2.energy);
    let (f1, f2) = (s1.problem.family(), s2.problem.family());
    let mut weighted = Vec::with_capacity(radii.len());
    let mut gap_weighted = Vec::with_capacity(radii.len());
    let mut w_min = f64::INFINITY;
    let mut ordered_potentials = true;
    for (i, &r) in radii.iter().enumerate() {
        let (v1, v2) = (f1.value(r), f2.value(r));
        let w = e1 + e2 - v1 - v2;
        w_min = w_min.min(w);
        let slack = ORDER_SLACK * v1.abs().max(v2.abs());
        ordered_potentials &= v1 <= v2 + slack && v2 <= 0.0;
        let overlap = s1.psi[i] * s2.psi[i];
        weighted.push(w * overlap);
        gap_weighted.push((v2 - v1) * w * overlap);
    }
    if let Some(i) = weighted.iter().chain(&gap_weighted).position(|x| !x.is_finite()) {
        return Err(AnalysisError::NonFinite(radii[i % radii.len()]));
    }
    let mut breaks = f1.breakpoints();
    breaks.extend(f2.breakpoints());
    let lhs = (e2 - e1) * quadrature::integrate_piecewise(&weighted, &grid, &breaks);
    let rhs = quadrature::integrate_piecewise(&gap_weighted, &grid, &breaks);
    let residual = (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()));
    let hypotheses_ok = ordered_potentials && e1 >= 0.0 && e2 >= 0.0 && s1.nodes == 0 && s2.nodes == 0;
    Ok(ComparisonReport {
        e1,
        e2,
        lhs,
        rhs,
        residual,
        w_min,
        ordering_ok: e1 <= e2,
        hypotheses_ok,
        near_zero_energy: e1.abs() < ZERO_ENERGY_FLAG || e2.abs() < ZERO_ENERGY_FLAG,
    })
}

/// `∫ f(r) ψ(r)² dr`. `f` may jump where the state's potential does.
pub fn expectation(res: &EigenResult, f: impl Fn(f64) -> f64) -> Result<f64, AnalysisError> {
    let radii = res.grid.radii();
    let mut values = Vec::with_capacity(radii.len());
    for (&r, &p) in radii.iter().zip(&res.psi) {
        let fr = f(r);
        if !fr.is_finite() {
            return Err(AnalysisError::NonFinite(r));
        }
        values.push(fr * p * p);
    }
    Ok(quadrature::integrate_piecewise(&values, &res.grid, &res.problem.family().breakpoints()))
}

/// Right-hand side of the derivative formula from its three expectations.
pub fn hf_formula(energy: f64, v_mean: f64, va_mean: f64, vva_mean: f64) -> Result<f64, AnalysisError> {
    let denominator = energy - v_mean;
    if !(denominator.abs() >= 1e-12) {
        return Err(AnalysisError::DegenerateDenominator(denominator));
    }
    Ok((energy * va_mean - vva_mean) / denominator)
}

/// Expectation-value form of `E'(a)` with its finite-difference check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub a: f64,
    pub e: f64,
    pub v_mean: f64,
    pub va_mean: f64,
    pub vva_mean: f64,
    /// `E - <V>`.
    pub denominator: f64,
    pub de_hf: f64,
    pub de_fd: Option<f64>,
    /// `|dE_hf - dE_fd| / (1 + |dE_fd|)`.
    pub agreement: Option<f64>,
}

fn check_family(res: &EigenResult, family: &PotentialFamily) -> Result<(), AnalysisError> {
    if res.problem.family().to_string() != family.to_string() {
        return Err(AnalysisError::Incompatible(format!(
            "state solved for {} but derivative requested for {}",
            res.problem.family(),
            family
        )));
    }
    Ok(())
}

/// Expectation-value part of [`hf_derivative`], without the finite-difference
/// solves.
pub fn hf_terms(res: &EigenResult, family: &PotentialFamily) -> Result<DerivativeReport, AnalysisError> {
    check_family(res, family)?;
    check_normalized(res)?;
    let a = family.sweep_value()?;
    let name = family.sweep_param().expect("sweep value resolved");
    let dv = family.derivative_fn(name)?;
    let v_mean = expectation(res, |r| family.value(r))?;
    let va_mean = expectation(res, |r| dv(family, r))?;
    let vva_mean = expectation(res, |r| family.value(r) * dv(family, r))?;
    let de_hf = hf_formula(res.energy, v_mean, va_mean, vva_mean)?;
    Ok(DerivativeReport {
        a,
        e: res.energy,
        v_mean,
        va_mean,
        vva_mean,
        denominator: res.energy - v_mean,
        de_hf,
        de_fd: None,
        agreement: None,
    })
}

/// Relative stencil half-width used by [`hf_derivative`].
pub const FD_RELATIVE_STEP: f64 = 1e-4;

/// `E'(a)` from expectation values, completed with a central finite
/// difference of the eigenvalue in the same parameter.
pub fn hf_derivative(res: &EigenResult, family: &PotentialFamily) -> Result<DerivativeReport, AnalysisError> {
    let mut report = hf_terms(res, family)?;
    let h = FD_RELATIVE_STEP * report.a.abs();
    let problem = res.problem.with_family(family.clone());
    let fd = fd_derivative_near(&problem, res.nodes, h, res.energy, &res.config)?;
    report.de_fd = Some(fd);
    report.agreement = Some((report.de_hf - fd).abs() / (1.0 + fd.abs()));
    Ok(report)
}

/// `(E(a+h) - E(a-h)) / 2h` for the `n`-th level, `a` being the family's
/// sweep parameter.
pub fn fd_derivative(problem: &RadialProblem, n: usize, h: f64, config: &SolverConfig) -> Result<f64, AnalysisError> {
    stencil(problem, n, h, None, config)
}

fn fd_derivative_near(
    problem: &RadialProblem,
    n: usize,
    h: f64,
    guess: f64,
    config: &SolverConfig,
) -> Result<f64, AnalysisError> {
    stencil(problem, n, h, Some(guess), config)
}

fn stencil(
    problem: &RadialProblem,
    n: usize,
    h: f64,
    guess: Option<f64>,
    config: &SolverConfig,
) -> Result<f64, AnalysisError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(AnalysisError::InvalidStep(h));
    }
    let family = problem.family();
    let a = family.sweep_value()?;
    let solve = |value: f64, guess: Option<f64>| -> Result<EigenResult, AnalysisError> {
        let p = problem.with_family(family.at_sweep(value)?);
        let solved = match guess {
            Some(g) => find_state_near(&p, n, g, config),
            None => find_state(&p, n, config),
        };
        solved.map_err(|source| AnalysisError::Stencil { a: value, source })
    };
    let plus = solve(a + h, guess)?;
    let minus = solve(a - h, Some(guess.unwrap_or(plus.energy)))?;
    if plus.nodes != minus.nodes {
        return Err(AnalysisError::Stencil {
            a,
            source: SolveError::NodeMismatch { expected: plus.nodes, got: minus.nodes },
        });
    }
    Ok((plus.energy - minus.energy) / (2.0 * h))
}

/// Sign of `∂V/∂a` over a sample of radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

/// Classifies `∂V/∂a` on `radii` (which must avoid a Coulomb origin).
pub fn param_monotonicity(family: &PotentialFamily, radii: &[f64]) -> Result<Monotonicity, AnalysisError> {
    let name = family.sweep_param().ok_or(PotentialError::NoSweepParam)?;
    let dv = family.derivative_fn(name)?;
    let (mut pos, mut neg) = (false, false);
    for &r in radii {
        let d = dv(family, r);
        pos |= d > 0.0;
        neg |= d < 0.0;
    }
    Ok(match (pos, neg) {
        (true, false) => Monotonicity::Increasing,
        (false, true) => Monotonicity::Decreasing,
        (false, false) => Monotonicity::Constant,
        (true, true) => Monotonicity::Mixed,
    })
}

/// Solves the ground states of two potentials in the same channel and
/// compares them.
pub fn check_theorem1(
    spec1: &str,
    spec2: &str,
    template: &RadialProblem,
    config: &SolverConfig,
) -> Result<ComparisonReport, AnalysisError> {
    let f1 = PotentialFamily::parse(spec1)?;
    let f2 = PotentialFamily::parse(spec2)?;
    let r1 = find_state(&template.with_family(f1), 0, config)?;
    let r2 = find_state(&template.with_family(f2), 0, config)?;
    comparison_identity(&r1, &r2)
}

/// One parameter value of a monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterPoint {
    pub report: DerivativeReport,
    pub monotonicity: Monotonicity,
    /// `E < 0`: outside the positive-energy hypothesis, reported only.
    pub exempt: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub points: Vec<ParameterPoint>,
    pub verdict: bool,
}

/// Sign tolerance on `dE_hf`.
pub const SIGN_TOL: f64 = 1e-8;

fn sign_consistent(de: f64, monotonicity: Monotonicity) -> bool {
    match monotonicity {
        Monotonicity::Increasing => de >= -SIGN_TOL,
        Monotonicity::Decreasing => de <= SIGN_TOL,
        Monotonicity::Constant => de.abs() <= SIGN_TOL,
        Monotonicity::Mixed => true,
    }
}

/// Evaluates `E'(a)` at each parameter value for level `n` and checks its
/// sign against `∂V/∂a` wherever `E >= 0`. Points are reported sorted by
/// parameter value.
pub fn check_theorem2(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    a_values: &[f64],
    config: &SolverConfig,
) -> Result<Theorem2Report, AnalysisError> {
    let mut values = a_values.to_vec();
    values.sort_by(f64::total_cmp);
    let results: Vec<_> =
        values.par_iter().map(|&a| theorem2_point(family, template, n, a, config)).collect();
    let mut points = Vec::with_capacity(values.len());
    for result in results {
        match result {
            Ok(p) => points.push(p),
            Err(source) => {
                return Err(AnalysisError::Partial { completed: points, source: Box::new(source) })
            }
        }
    }
    let verdict = points.iter().all(|p| p.exempt || p.consistent);
    Ok(Theorem2Report { points, verdict })
}

fn theorem2_point(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    a: f64,
    config: &SolverConfig,
) -> Result<ParameterPoint, AnalysisError> {
    let fam = family.at_sweep(a)?;
    let res = find_state(&template.with_family(fam.clone()), n, config)?;
    let report = hf_terms(&res, &fam)?;
    let radii: Vec<f64> = res.grid.radii();
    let monotonicity = param_monotonicity(&fam, &radii)?;
    let exempt = report.e < 0.0;
    let consistent = sign_consistent(report.de_hf, monotonicity);
    Ok(ParameterPoint { report, monotonicity, exempt, consistent })
}

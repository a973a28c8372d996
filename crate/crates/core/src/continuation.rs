//! Eigenvalue branches over a potential parameter.
//!
//! Forward sweeps solve `E(a)` point by point. Near a turning point `E(a)`
//! is two-valued, so folded curves are traced the other way round: the
//! energy is fixed and the parameter values at which it is an eigenvalue
//! are found by inversion.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::eigensolve::{energy_window, shoot, state_at_energy, find_state, SolveError, SolverConfig};
use crate::potentials::{PotentialError, PotentialFamily};
use crate::radial::RadialProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("parameter grid must be non-empty and strictly monotone")]
    BadParameterGrid,
    #[error("energy {energy} lies outside the discrete window (-{mass}, {mass})")]
    EnergyOutsideWindow { energy: f64, mass: f64 },
    #[error("invalid parameter bracket [{0}, {1}]")]
    BadBracket(f64, f64),
    #[error("no eigenvalue crossing E = {energy} for parameter in [{lo}, {hi}]")]
    NoSignChange { energy: f64, lo: f64, hi: f64 },
    #[error("inverted state at a = {a} has {got} nodes, expected {expected}")]
    NodeMismatch { a: f64, expected: usize, got: usize },
    #[error("every point of the sweep failed; first failure: {0}")]
    AllPointsFailed(String),
    #[error("no parameter value in [{lo}, {hi}] has an eigenvalue on the energy grid")]
    NoRoots { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolvedBy {
    /// Energy found at a fixed parameter.
    #[serde(rename = "a-solve")]
    ASolve,
    /// Parameter found at a fixed energy.
    #[serde(rename = "E-solve")]
    ESolve,
}

impl SolvedBy {
    pub fn as_str(self) -> &'static str {
        match self {
            SolvedBy::ASolve => "a-solve",
            SolvedBy::ESolve => "E-solve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub a: f64,
    /// NaN at a gap.
    pub e: f64,
    pub de_hf: Option<f64>,
    pub de_fd: Option<f64>,
    pub nodes: usize,
    pub solved_by: SolvedBy,
    pub converged: bool,
}

impl CurvePoint {
    fn gap(a: f64, nodes: usize) -> Self {
        CurvePoint { a, e: f64::NAN, de_hf: None, de_fd: None, nodes, solved_by: SolvedBy::ASolve, converged: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCurve {
    /// In order along the branch.
    pub points: Vec<CurvePoint>,
    /// Turning point `(a*, E*)`.
    pub fold: Option<(f64, f64)>,
    #[serde(serialize_with = "serialize_spec")]
    pub family: PotentialFamily,
}

fn serialize_spec<S: serde::Serializer>(family: &PotentialFamily, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(family)
}

impl SpectralCurve {
    pub fn converged_points(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(|p| p.converged)
    }

    /// Sign changes of `da/dE` between consecutive converged points.
    pub fn turning_points(&self) -> usize {
        let pts: Vec<&CurvePoint> = self.converged_points().collect();
        let slopes: Vec<f64> = pts
            .windows(2)
            .filter_map(|w| {
                let (da, de) = (w[1].a - w[0].a, w[1].e - w[0].e);
                (de != 0.0 && da != 0.0).then(|| (da / de).signum())
            })
            .collect();
        slopes.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

fn strictly_monotone(values: &[f64]) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0])
}

/// Relative finite-difference half-width for sweep points.
pub const FD_RELATIVE_STEP: f64 = analysis::FD_RELATIVE_STEP;

fn sweep_point(family: &PotentialFamily, template: &RadialProblem, n: usize, a: f64, config: &SolverConfig) -> CurvePoint {
    let solve = || -> Result<CurvePoint, AnalysisError> {
        let fam = family.at_sweep(a)?;
        let problem = template.with_family(fam.clone());
        let res = find_state(&problem, n, config)?;
        let de_hf = analysis::hf_terms(&res, &fam).ok().map(|r| r.de_hf);
        let de_fd = analysis::fd_derivative(&problem, n, FD_RELATIVE_STEP * a.abs(), config).ok();
        Ok(CurvePoint { a, e: res.energy, de_hf, de_fd, nodes: res.nodes, solved_by: SolvedBy::ASolve, converged: true })
    };
    solve().unwrap_or_else(|_| CurvePoint::gap(a, n))
}

/// Solves level `n` independently at each parameter value. Failed points
/// stay in the curve as gaps with `converged = false`.
pub fn sweep_parameter(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    a_grid: &[f64],
    config: &SolverConfig,
) -> Result<SpectralCurve, ContinuationError> {
    if a_grid.is_empty() || !strictly_monotone(a_grid) {
        return Err(ContinuationError::BadParameterGrid);
    }
    family.sweep_value()?;
    config.validate()?;
    let points: Vec<CurvePoint> =
        a_grid.par_iter().map(|&a| sweep_point(family, template, n, a, config)).collect();
    if points.iter().all(|p| !p.converged) {
        let fam = family.at_sweep(a_grid[0])?;
        let reason = match find_state(&template.with_family(fam), n, config) {
            Err(e) => e.to_string(),
            Ok(_) => "derivative evaluation failed".to_string(),
        };
        return Err(ContinuationError::AllPointsFailed(reason));
    }
    Ok(SpectralCurve { points, fold: None, family: family.clone() })
}

/// Sturm count at a fixed energy; steps by one where a level crosses it.
fn count_at(
    family: &PotentialFamily,
    template: &RadialProblem,
    energy: f64,
    a: f64,
    config: &SolverConfig,
) -> Result<(usize, usize, f64), ContinuationError> {
    let problem = template.with_family(family.at_sweep(a)?);
    let shot = shoot(&problem, energy, config)?;
    Ok((shot.nodes, shot.joined_nodes, shot.wronskian))
}

/// Relative tolerance on the inverted parameter.
pub const A_TOL: f64 = 1e-12;

/// Parameter value in `a_bracket` at which `energy` is the `n`-th level.
///
/// Bisects on the Sturm count at fixed energy, or on the sign of the
/// matching Wronskian when the count is equal at both ends.
pub fn solve_for_parameter(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    energy: f64,
    a_bracket: (f64, f64),
    config: &SolverConfig,
) -> Result<f64, ContinuationError> {
    let m = template.mass();
    if !(energy.abs() < m) {
        return Err(ContinuationError::EnergyOutsideWindow { energy, mass: m });
    }
    let (mut lo, mut hi) = (a_bracket.0.min(a_bracket.1), a_bracket.0.max(a_bracket.1));
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ContinuationError::BadBracket(a_bracket.0, a_bracket.1));
    }
    family.sweep_value()?;
    let geometric = lo > 0.0;
    let mut f_lo = count_at(family, template, energy, lo, config)?;
    let f_hi = count_at(family, template, energy, hi, config)?;
    let by_count = f_lo.0 != f_hi.0;
    if !by_count && f_lo.2.signum() == f_hi.2.signum() {
        return Err(ContinuationError::NoSignChange { energy, lo, hi });
    }
    let same_side = |a: &(usize, usize, f64), b: &(usize, usize, f64)| {
        if by_count { a.0 == b.0 } else { a.2.signum() == b.2.signum() }
    };
    let mut f_hi = f_hi;
    while hi - lo > A_TOL * hi.abs().max(lo.abs()) {
        let mid = if geometric { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = count_at(family, template, energy, mid, config)?;
        if same_side(&f_mid, &f_lo) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let a = if geometric { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
    let joined = if f_lo.2.abs() <= f_hi.2.abs() { f_lo.1 } else { f_hi.1 };
    if joined != n {
        return Err(ContinuationError::NodeMismatch { a, expected: n, got: joined });
    }
    Ok(a)
}

/// Log-spaced parameter window scanned for roots at each energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootWindow {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for RootWindow {
    fn default() -> Self {
        RootWindow { lo: 1e-6, hi: 1e2, points: 400 }
    }
}

impl RootWindow {
    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.lo, self.hi, self.points)
    }

    /// Ratio between neighbouring scan values.
    pub fn step_ratio(&self) -> f64 {
        (self.hi / self.lo).powf(1.0 / (self.points.max(2) - 1) as f64)
    }
}

/// `points` values from `lo` to `hi` (inclusive) with a constant ratio.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (points - 1) as f64)
                }
            })
            .collect(),
    }
}

/// `points` values from `lo` to `hi` (inclusive), evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 })
            .collect(),
    }
}

/// All parameter values in `window` at which `energy` is the `n`-th level.
pub fn parameter_roots(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    energy: f64,
    window: &RootWindow,
    config: &SolverConfig,
) -> Result<Vec<f64>, ContinuationError> {
    let grid = window.grid();
    let mut samples = Vec::with_capacity(grid.len());
    for &a in &grid {
        samples.push(count_at(family, template, energy, a, config).ok());
    }
    let mut roots = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (Some(x), Some(y)) = (samples[i], samples[i + 1]) else { continue };
        if x.0 == y.0 {
            continue;
        }
        match solve_for_parameter(family, template, n, energy, (grid[i], grid[i + 1]), config) {
            Ok(a) => roots.push(a),
            Err(ContinuationError::NodeMismatch { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(roots)
}

fn traced_point(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    energy: f64,
    a: f64,
    config: &SolverConfig,
) -> Option<CurvePoint> {
    let fam = family.at_sweep(a).ok()?;
    let problem = template.with_family(fam.clone());
    let grid = config.grid.resolve(&problem, energy).ok()?;
    let res = state_at_energy(&problem, n, energy, &grid, config).ok()?;
    let de_hf = analysis::hf_terms(&res, &fam).ok().map(|r| r.de_hf);
    Some(CurvePoint { a, e: energy, de_hf, de_fd: None, nodes: n, solved_by: SolvedBy::ESolve, converged: true })
}

/// Orders points by greedy nearest-neighbour chaining in `(ln a, E)`,
/// each coordinate scaled by its range, starting from the highest energy.
pub fn chain_points(mut points: Vec<CurvePoint>) -> Vec<CurvePoint> {
    if points.len() < 3 {
        points.sort_by(|x, y| y.e.total_cmp(&x.e).then(x.a.total_cmp(&y.a)));
        return points;
    }
    let la: Vec<f64> = points.iter().map(|p| p.a.ln()).collect();
    let span = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        if hi > lo { hi - lo } else { 1.0 }
    };
    let es: Vec<f64> = points.iter().map(|p| p.e).collect();
    let (sa, se) = (span(&la), span(&es));
    let start = (0..points.len())
        .max_by(|&i, &j| es[i].total_cmp(&es[j]).then(la[j].total_cmp(&la[i])))
        .expect("non-empty");
    let mut used = vec![false; points.len()];
    let mut order = vec![start];
    used[start] = true;
    for _ in 1..points.len() {
        let last = *order.last().expect("non-empty");
        let next = (0..points.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| {
                let d = |k: usize| ((la[k] - la[last]) / sa).hypot((es[k] - es[last]) / se);
                d(i).total_cmp(&d(j)).then(i.cmp(&j))
            })
            .expect("unused point remains");
        used[next] = true;
        order.push(next);
    }
    let mut slots: Vec<Option<CurvePoint>> = points.drain(..).map(Some).collect();
    order.into_iter().map(|i| slots[i].take().expect("visited once")).collect()
}

/// Vertex `(a*, E*)` of the parabola `a(E)` through three points.
pub fn parabolic_vertex(p: [(f64, f64); 3]) -> Option<(f64, f64)> {
    let [(a0, e0), (a1, e1), (a2, e2)] = p;
    let d01 = (a1 - a0) / (e1 - e0);
    let d12 = (a2 - a1) / (e2 - e1);
    let c2 = (d12 - d01) / (e2 - e0);
    if !(c2.is_finite() && c2 > 0.0) {
        return None;
    }
    let c1 = d01 - c2 * (e0 + e1);
    let e_star = -c1 / (2.0 * c2);
    let a_star = a0 + d01 * (e_star - e0) + c2 * (e_star - e0) * (e_star - e1);
    (a_star.is_finite() && e_star.is_finite()).then_some((a_star, e_star))
}

/// Fold of a chained curve: parabolic vertex through the minimum-`a`
/// point and its two neighbours along the branch, when `da/dE` changes sign.
pub fn estimate_fold(points: &[CurvePoint]) -> Option<(f64, f64)> {
    let pts: Vec<&CurvePoint> = points.iter().filter(|p| p.converged).collect();
    if pts.len() < 3 {
        return None;
    }
    let i = (0..pts.len()).min_by(|&i, &j| pts[i].a.total_cmp(&pts[j].a))?;
    if i == 0 || i + 1 == pts.len() {
        return None;
    }
    let (p0, p1, p2) = (pts[i - 1], pts[i], pts[i + 1]);
    if (p1.a - p0.a).signum() == (p2.a - p1.a).signum() {
        return None;
    }
    let mut three = [(p0.a, p0.e), (p1.a, p1.e), (p2.a, p2.e)];
    three.sort_by(|x, y| x.1.total_cmp(&y.1));
    parabolic_vertex(three)
}

/// Traces level `n` as `a(E)` over `e_grid`: every root in `window` at each
/// energy, chained into a branch, with the fold fitted where `a(E)` has an
/// interior minimum.
pub fn trace_folded_curve(
    family: &PotentialFamily,
    template: &RadialProblem,
    n: usize,
    e_grid: &[f64],
    window: &RootWindow,
    config: &SolverConfig,
) -> Result<SpectralCurve, ContinuationError> {
    let m = template.mass();
    let (e_lo, e_hi) = energy_window(m);
    if let Some(&energy) = e_grid.iter().find(|e| !(**e > -m && **e < m)) {
        return Err(ContinuationError::EnergyOutsideWindow { energy, mass: m });
    }
    if !(window.lo > 0.0 && window.hi > window.lo && window.points >= 2) {
        return Err(ContinuationError::BadBracket(window.lo, window.hi));
    }
    family.sweep_value()?;
    config.validate()?;
    let per_energy: Vec<Result<Vec<CurvePoint>, ContinuationError>> = e_grid
        .par_iter()
        .map(|&e| {
            let e = e.clamp(e_lo, e_hi);
            let roots = parameter_roots(family, template, n, e, window, config)?;
            Ok(roots.into_iter().filter_map(|a| traced_point(family, template, n, e, a, config)).collect())
        })
        .collect();
    let mut points = Vec::new();
    for r in per_energy {
        points.extend(r?);
    }
    if points.is_empty() {
        return Err(ContinuationError::NoRoots { lo: window.lo, hi: window.hi });
    }
    let points = chain_points(points);
    let fold = estimate_fold(&points);
    Ok(SpectralCurve { points, fold, family: family.clone() })
}

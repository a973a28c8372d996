//! Attractive central potential families.
//!
//! Every family is written in units `m = c = ħ = 1`: couplings are
//! dimensionless and lengths are measured in units of `1/m`.
//!
//! ```text
//! coulomb               V = -v / r
//! cutoff-coulomb        V = -v / (r + a)
//! shell-cutoff-coulomb  V = -v / a   (r < a),   -v / r   (r >= a)
//! exponential           V = -v exp(-r / b)
//! square-well           V = -v       (r < R),   0        (r >= R)
//! rational4             V = -v / (1 + r + r^2/2 + r^3/6 + r^4/24)
//! tabulated             piecewise-linear (r, V) samples, 0 beyond the last one
//! ```
//!
//! Families are parsed from the compact text form `kind:key=value,...`
//! (see [`PotentialFamily::parse`]) and print back to the same form.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::radial::RadialProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("empty potential spec")]
    Empty,
    #[error("malformed potential spec `{0}`: expected `kind:key=value,...`")]
    Malformed(String),
    #[error("unknown potential kind `{0}`")]
    UnknownKind(String),
    #[error("unknown parameter `{key}` for {kind}")]
    UnknownParam { kind: &'static str, key: String },
    #[error("missing parameter `{key}` for {kind}")]
    MissingParam { kind: &'static str, key: &'static str },
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("parameter `{key}` must be positive, got `{value}`")]
    NonPositive { key: String, value: String },
    #[error("invalid key `{0}`: keys are ASCII identifiers")]
    BadKey(String),
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("the coulomb potential is singular at r = 0")]
    SingularOrigin,
    #[error("no sweep parameter designated")]
    NoSweepParam,
    #[error("`{param}` is not a parameter of {kind}")]
    NotAParam { kind: &'static str, param: String },
    #[error("{kind} has no analytic derivative in `{param}`")]
    NotDifferentiable { kind: &'static str, param: String },
    #[error("table {path}: {reason}")]
    Table { path: String, reason: String },
}

/// Family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Coulomb,
    CutoffCoulomb,
    ShellCutoffCoulomb,
    Exponential,
    SquareWell,
    Rational4,
    Tabulated,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Coulomb,
        Kind::CutoffCoulomb,
        Kind::ShellCutoffCoulomb,
        Kind::Exponential,
        Kind::SquareWell,
        Kind::Rational4,
        Kind::Tabulated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Coulomb => "coulomb",
            Kind::CutoffCoulomb => "cutoff-coulomb",
            Kind::ShellCutoffCoulomb => "shell-cutoff-coulomb",
            Kind::Exponential => "exponential",
            Kind::SquareWell => "square-well",
            Kind::Rational4 => "rational4",
            Kind::Tabulated => "tabulated",
        }
    }

    /// Parameter names in canonical (printing) order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Kind::Coulomb | Kind::Rational4 => &["v"],
            Kind::CutoffCoulomb | Kind::ShellCutoffCoulomb => &["v", "a"],
            Kind::Exponential => &["v", "b"],
            Kind::SquareWell => &["v", "R"],
            Kind::Tabulated => &[],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = PotentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PotentialError::UnknownKind(s.to_string()))
    }
}

/// Piecewise-linear potential samples loaded from a two-column `r,V` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    path: PathBuf,
    r: Vec<f64>,
    v: Vec<f64>,
}

impl Table {
    pub fn from_samples(
        path: impl Into<PathBuf>,
        r: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self, PotentialError> {
        let path = path.into();
        let err = |reason: &str| PotentialError::Table {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        if r.len() != v.len() {
            return Err(err("column lengths differ"));
        }
        if r.len() < 2 {
            return Err(err("need at least two samples"));
        }
        if r.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(err("non-finite sample"));
        }
        if r[0] < 0.0 {
            return Err(err("negative radius"));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err("radii must be strictly increasing"));
        }
        Ok(Self { path, r, v })
    }

    pub fn load(path: &Path) -> Result<Self, PotentialError> {
        let text = std::fs::read_to_string(path).map_err(|e| PotentialError::Table {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(PotentialError::Table {
                        path: path.display().to_string(),
                        reason: format!("line {}: expected two columns", lineno + 1),
                    })
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    r.push(x);
                    v.push(y);
                }
                // header row
                _ if r.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(PotentialError::Table {
                        path: path.display().to_string(),
                        reason: format!("line {}: malformed number", lineno + 1),
                    })
                }
            }
        }
        Self::from_samples(path, r, v)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.r, &self.v)
    }

    /// Linear interpolation; held at the first sample below its radius and
    /// zero beyond the last one.
    pub fn value(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r >= self.r[n - 1] {
            return if r == self.r[n - 1] { self.v[n - 1] } else { 0.0 };
        }
        if r <= self.r[0] {
            return self.v[0];
        }
        let hi = self.r.partition_point(|&x| x <= r);
        let lo = hi - 1;
        let t = (r - self.r[lo]) / (self.r[hi] - self.r[lo]);
        self.v[lo] + t * (self.v[hi] - self.v[lo])
    }
}

/// A parametrized attractive potential `V(r; p)`.
///
/// Immutable once built; [`PotentialFamily::with_param`] returns a modified
/// copy.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFamily {
    kind: Kind,
    // canonical order, see `Kind::param_names`
    params: Vec<f64>,
    table: Option<Arc<Table>>,
    sweep_param: Option<String>,
}

fn is_identifier(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl PotentialFamily {
    /// Builds a family from named parameter values.
    pub fn new(kind: Kind, params: &[(&str, f64)]) -> Result<Self, PotentialError> {
        if kind == Kind::Tabulated {
            return Err(PotentialError::MissingParam { kind: kind.name(), key: "file" });
        }
        let names = kind.param_names();
        let mut values = vec![None; names.len()];
        for &(key, value) in params {
            let slot = names.iter().position(|n| *n == key).ok_or_else(|| {
                PotentialError::UnknownParam { kind: kind.name(), key: key.to_string() }
            })?;
            if values[slot].is_some() {
                return Err(PotentialError::DuplicateParam(key.to_string()));
            }
            if !(value.is_finite() && value > 0.0) {
                return Err(PotentialError::NonPositive {
                    key: key.to_string(),
                    value: value.to_string(),
                });
            }
            values[slot] = Some(value);
        }
        let params = values
            .into_iter()
            .zip(names)
            .map(|(v, key)| v.ok_or(PotentialError::MissingParam { kind: kind.name(), key }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { kind, params, table: None, sweep_param: None })
    }

    pub fn tabulated(table: Table) -> Self {
        Self { kind: Kind::Tabulated, params: Vec::new(), table: Some(Arc::new(table)), sweep_param: None }
    }

    pub fn coulomb(v: f64) -> Result<Self, PotentialError> {
        Self::new(Kind::Coulomb, &[("v", v)])
    }

    pub fn cutoff_coulomb(v: f64, a: f64) -> Result<Self, PotentialError> {
        Self::new(Kind::CutoffCoulomb, &[("v", v), ("a", a)])
    }

    pub fn shell_cutoff_coulomb(v: f64, a: f64) -> Result<Self, PotentialError> {
        Self::new(Kind::ShellCutoffCoulomb, &[("v", v), ("a", a)])
    }

    pub fn exponential(v: f64, b: f64) -> Result<Self, PotentialError> {
        Self::new(Kind::Exponential, &[("v", v), ("b", b)])
    }

    pub fn square_well(v: f64, radius: f64) -> Result<Self, PotentialError> {
        Self::new(Kind::SquareWell, &[("v", v), ("R", radius)])
    }

    pub fn rational4(v: f64) -> Result<Self, PotentialError> {
        Self::new(Kind::Rational4, &[("v", v)])
    }

    /// Parses `kind:key=value,key=value,...` (no whitespace).
    ///
    /// Keys may appear in any order; every parameter of the kind is
    /// required. `tabulated:file=PATH` loads the table from disk.
    pub fn parse(text: &str) -> Result<Self, PotentialError> {
        if text.is_empty() {
            return Err(PotentialError::Empty);
        }
        if text.chars().any(char::is_whitespace) {
            return Err(PotentialError::Malformed(text.to_string()));
        }
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| PotentialError::Malformed(text.to_string()))?;
        let kind: Kind = kind.parse()?;
        let mut pairs = Vec::new();
        for item in rest.split(',') {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| PotentialError::Malformed(item.to_string()))?;
            if !is_identifier(key) {
                return Err(PotentialError::BadKey(key.to_string()));
            }
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(PotentialError::DuplicateParam(key.to_string()));
            }
            pairs.push((key, value));
        }

        if kind == Kind::Tabulated {
            let mut path = None;
            for (key, value) in pairs {
                if key != "file" {
                    return Err(PotentialError::UnknownParam { kind: kind.name(), key: key.to_string() });
                }
                path = Some(value);
            }
            let path = path.filter(|p| !p.is_empty()).ok_or(PotentialError::MissingParam {
                kind: kind.name(),
                key: "file",
            })?;
            return Ok(Self::tabulated(Table::load(Path::new(path))?));
        }

        let mut named = Vec::with_capacity(pairs.len());
        for (key, value) in pairs {
            if !kind.param_names().contains(&key) {
                return Err(PotentialError::UnknownParam { kind: kind.name(), key: key.to_string() });
            }
            let x: f64 = value
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| PotentialError::BadNumber(value.to_string()))?;
            if x <= 0.0 {
                return Err(PotentialError::NonPositive { key: key.to_string(), value: value.to_string() });
            }
            named.push((key, x));
        }
        Self::new(kind, &named)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn table(&self) -> Option<&Table> {
        self.table.as_deref()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        let idx = self.kind.param_names().iter().position(|n| *n == name)?;
        Some(self.params[idx])
    }

    /// Named parameters in canonical order.
    pub fn params(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.kind.param_names().iter().copied().zip(self.params.iter().copied())
    }

    pub fn sweep_param(&self) -> Option<&str> {
        self.sweep_param.as_deref()
    }

    /// Designates the parameter `a` used for parameter derivatives and sweeps.
    pub fn with_sweep(mut self, name: &str) -> Result<Self, PotentialError> {
        if self.param(name).is_none() {
            return Err(PotentialError::NotAParam { kind: self.kind.name(), param: name.to_string() });
        }
        self.sweep_param = Some(name.to_string());
        Ok(self)
    }

    /// Copy with one parameter replaced. The value must stay positive.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, PotentialError> {
        let idx = self
            .kind
            .param_names()
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| PotentialError::NotAParam { kind: self.kind.name(), param: name.to_string() })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(PotentialError::NonPositive { key: name.to_string(), value: value.to_string() });
        }
        let mut out = self.clone();
        out.params[idx] = value;
        Ok(out)
    }

    /// Current value of the sweep parameter.
    pub fn sweep_value(&self) -> Result<f64, PotentialError> {
        let name = self.sweep_param.as_deref().ok_or(PotentialError::NoSweepParam)?;
        Ok(self.param(name).expect("sweep parameter validated on construction"))
    }

    /// Copy with the sweep parameter set to `value`.
    pub fn at_sweep(&self, value: f64) -> Result<Self, PotentialError> {
        let name = self.sweep_param.as_deref().ok_or(PotentialError::NoSweepParam)?;
        self.with_param(name, value)
    }

    /// Coefficient `v` of a `-v/r` singularity at the origin, if any.
    pub fn coulomb_singularity(&self) -> Option<f64> {
        match self.kind {
            Kind::Coulomb => Some(self.params[0]),
            _ => None,
        }
    }

    /// Radii where `V` or its slope jumps; the integrator steps onto them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            Kind::SquareWell | Kind::ShellCutoffCoulomb => vec![self.params[1]],
            _ => Vec::new(),
        }
    }

    /// `V(r)` without argument checks. Used by the integrator.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            Kind::Coulomb => -p[0] / r,
            Kind::CutoffCoulomb => -p[0] / (r + p[1]),
            Kind::ShellCutoffCoulomb => -p[0] / r.max(p[1]),
            Kind::Exponential => -p[0] * (-r / p[1]).exp(),
            Kind::SquareWell => {
                if r < p[1] {
                    -p[0]
                } else {
                    0.0
                }
            }
            Kind::Rational4 => -p[0] / rational4_denominator(r),
            Kind::Tabulated => self.table.as_ref().map_or(0.0, |t| t.value(r)),
        }
    }

    /// `V(r)` with domain checks.
    pub fn eval(&self, r: f64) -> Result<f64, PotentialError> {
        if r.is_nan() || r < 0.0 {
            return Err(PotentialError::NegativeRadius(r));
        }
        if r == 0.0 && self.kind == Kind::Coulomb {
            return Err(PotentialError::SingularOrigin);
        }
        Ok(self.value(r))
    }

    /// `∂V/∂a` at `r` for the designated sweep parameter `a`.
    pub fn eval_param_derivative(&self, r: f64) -> Result<f64, PotentialError> {
        let name = self.sweep_param.as_deref().ok_or(PotentialError::NoSweepParam)?;
        if r.is_nan() || r < 0.0 {
            return Err(PotentialError::NegativeRadius(r));
        }
        if r == 0.0 && self.kind == Kind::Coulomb {
            return Err(PotentialError::SingularOrigin);
        }
        self.derivative_fn(name).map(|f| f(self, r))
    }

    /// Resolves the analytic derivative in `name` once, for use in loops.
    pub fn derivative_fn(&self, name: &str) -> Result<fn(&PotentialFamily, f64) -> f64, PotentialError> {
        let no_deriv = || PotentialError::NotDifferentiable {
            kind: self.kind.name(),
            param: name.to_string(),
        };
        if self.kind == Kind::Tabulated {
            return Err(no_deriv());
        }
        if self.param(name).is_none() {
            return Err(PotentialError::NotAParam { kind: self.kind.name(), param: name.to_string() });
        }
        // Coupling derivatives are the shape function f = V / v.
        if name == "v" {
            return Ok(|fam, r| {
                let v = fam.params[0];
                fam.value(r) / v
            });
        }
        let f: fn(&PotentialFamily, f64) -> f64 = match (self.kind, name) {
            (Kind::CutoffCoulomb, "a") => |fam, r| {
                let (v, a) = (fam.params[0], fam.params[1]);
                v / ((r + a) * (r + a))
            },
            (Kind::ShellCutoffCoulomb, "a") => |fam, r| {
                let (v, a) = (fam.params[0], fam.params[1]);
                if r < a {
                    v / (a * a)
                } else {
                    0.0
                }
            },
            (Kind::Exponential, "b") => |fam, r| {
                let (v, b) = (fam.params[0], fam.params[1]);
                -v * (-r / b).exp() * r / (b * b)
            },
            _ => return Err(no_deriv()),
        };
        Ok(f)
    }

    /// Canonical spec text; reparses to an equal family (the sweep
    /// designation is not part of the text form).
    pub fn to_spec(&self) -> String {
        self.to_string()
    }
}

#[inline]
fn rational4_denominator(r: f64) -> f64 {
    // 1 + r + r^2/2 + r^3/6 + r^4/24 in Horner form
    1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r / 24.0)))
}

impl fmt::Display for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.kind)?;
        if let Some(table) = &self.table {
            return write!(f, "file={}", table.path().display());
        }
        for (i, (key, value)) in self.params().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{key}={value}")?;
        }
        Ok(())
    }
}

impl FromStr for PotentialFamily {
    type Err = PotentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Outcome of [`validate_admissible`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub violations: Vec<Violation>,
}

impl AdmissibilityReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("V(r) = {value} > 0 at r = {r}: potential must be attractive")]
    Repulsive { r: f64, value: f64 },
    #[error("V(r) = {value} at r = {r} does not vanish at large r")]
    NoDecay { r: f64, value: f64 },
    #[error("coulomb coupling v = {v} must satisfy v < L + 1/2 = {limit}")]
    FallToCenter { v: f64, limit: f64 },
    #[error("-v/r potentials need d >= 2")]
    SingularInOneDimension,
    #[error("mass must be positive and finite, got {0}")]
    BadMass(f64),
}

/// Radius at which the decay condition is checked, in units of `1/m`.
const DECAY_RADIUS: f64 = 1.0e4;
const DECAY_TOL: f64 = 1.0e-3;

/// Checks the premises the solver relies on: `V <= 0` on a sample grid,
/// `V -> 0` far out, and `v < L + 1/2` for `-v/r` singular families.
pub fn validate_admissible(problem: &RadialProblem) -> AdmissibilityReport {
    let family = problem.family();
    let m = problem.mass();
    let mut violations = Vec::new();
    if !(m.is_finite() && m > 0.0) {
        violations.push(Violation::BadMass(m));
        return AdmissibilityReport { violations };
    }

    let samples = 2000;
    let (lo, hi) = ((1.0e-6 / m).ln(), (DECAY_RADIUS / m).ln());
    let mut radii: Vec<f64> = (0..samples)
        .map(|i| (lo + (hi - lo) * i as f64 / (samples - 1) as f64).exp())
        .collect();
    if family.kind() != Kind::Coulomb {
        radii.insert(0, 0.0);
    }
    if let Some(table) = family.table() {
        radii.extend_from_slice(table.samples().0);
    }
    if let Some((r, value)) = radii
        .iter()
        .map(|&r| (r, family.value(r)))
        .find(|&(_, value)| !(value <= 0.0))
    {
        violations.push(Violation::Repulsive { r, value });
    }

    let far = DECAY_RADIUS / m;
    let tail = family.value(far);
    if !(tail.abs() <= DECAY_TOL * m) {
        violations.push(Violation::NoDecay { r: far, value: tail });
    }

    if let Some(v) = family.coulomb_singularity() {
        match problem.effective_l() {
            Some(l) => {
                let limit = l + 0.5;
                if !(v < limit) {
                    violations.push(Violation::FallToCenter { v, limit });
                }
            }
            None => violations.push(Violation::SingularInOneDimension),
        }
    }
    AdmissibilityReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::Parity;

    #[test]
    fn parses_builtin_specs() {
        let c = PotentialFamily::parse("coulomb:v=0.4").unwrap();
        assert_eq!(c.kind(), Kind::Coulomb);
        assert_eq!(c.param("v"), Some(0.4));

        let r4 = PotentialFamily::parse("rational4:v=2").unwrap();
        assert_eq!(r4.kind(), Kind::Rational4);
        assert_eq!(r4.eval(0.0).unwrap(), -2.0);

        let e = PotentialFamily::parse("exponential:b=1,v=2").unwrap();
        assert_eq!(e, PotentialFamily::exponential(2.0, 1.0).unwrap());
        assert_eq!(e.to_string(), "exponential:v=2,b=1");
    }

    #[test]
    fn parse_errors_name_the_token() {
        assert!(matches!(
            PotentialFamily::parse("coulomb:v=-1"),
            Err(PotentialError::NonPositive { ref value, .. }) if value == "-1"
        ));
        assert!(matches!(
            PotentialFamily::parse("yukawa:v=1"),
            Err(PotentialError::UnknownKind(ref k)) if k == "yukawa"
        ));
        assert!(matches!(
            PotentialFamily::parse("cutoff-coulomb:v=1"),
            Err(PotentialError::MissingParam { key: "a", .. })
        ));
        assert!(matches!(
            PotentialFamily::parse("coulomb:v=1,v=2"),
            Err(PotentialError::DuplicateParam(ref k)) if k == "v"
        ));
        assert!(matches!(
            PotentialFamily::parse("coulomb:v=0.4x"),
            Err(PotentialError::BadNumber(ref t)) if t == "0.4x"
        ));
        assert!(matches!(PotentialFamily::parse(""), Err(PotentialError::Empty)));
        assert!(PotentialFamily::parse("coulomb: v=1").is_err());
        assert!(PotentialFamily::parse("coulomb").is_err());
        assert!(matches!(
            PotentialFamily::parse("coulomb:v=1,a=2"),
            Err(PotentialError::UnknownParam { .. })
        ));
        assert!(matches!(PotentialFamily::parse("coulomb:1v=2"), Err(PotentialError::BadKey(_))));
        assert!(matches!(PotentialFamily::parse("coulomb:v=inf"), Err(PotentialError::BadNumber(_))));
    }

    #[test]
    fn values_at_origin() {
        let alpha = 1.0 / 137.0;
        let a = 0.3;
        let cc = PotentialFamily::cutoff_coulomb(alpha, a).unwrap();
        assert_eq!(cc.eval(0.0).unwrap(), -alpha / a);
        assert_eq!(PotentialFamily::exponential(2.0, 1.0).unwrap().eval(0.0).unwrap(), -2.0);
        let c = PotentialFamily::coulomb(0.4).unwrap();
        assert_eq!(c.eval(0.0), Err(PotentialError::SingularOrigin));
        assert!(matches!(c.eval(-1.0), Err(PotentialError::NegativeRadius(_))));
        assert_eq!(c.eval(2.0).unwrap(), -0.2);
    }

    #[test]
    fn shell_cutoff_is_continuous_at_the_shell() {
        let f = PotentialFamily::shell_cutoff_coulomb(0.7, 1.3).unwrap();
        let left = f.value(1.3_f64.next_down());
        let right = f.value(1.3);
        assert_eq!(left, -0.7 / 1.3);
        assert_eq!(right, -0.7 / 1.3);
    }

    #[test]
    fn parameter_derivatives() {
        let cc = PotentialFamily::cutoff_coulomb(0.5, 1.0).unwrap().with_sweep("a").unwrap();
        for r in [0.0, 0.5, 3.0] {
            assert_eq!(cc.eval_param_derivative(r).unwrap(), 0.5 / ((r + 1.0) * (r + 1.0)));
        }
        let ccv = cc.clone().with_sweep("v").unwrap();
        assert_eq!(ccv.eval_param_derivative(1.0).unwrap(), -0.5);

        let c = PotentialFamily::coulomb(0.4).unwrap().with_sweep("v").unwrap();
        assert_eq!(c.eval_param_derivative(2.0).unwrap(), -0.5);

        let sw = PotentialFamily::square_well(1.5, 2.0).unwrap().with_sweep("v").unwrap();
        assert_eq!(sw.eval_param_derivative(1.0).unwrap(), -1.0);
        assert_eq!(sw.eval_param_derivative(3.0).unwrap(), 0.0);

        let swr = sw.with_sweep("R").unwrap();
        assert!(matches!(swr.eval_param_derivative(1.0), Err(PotentialError::NotDifferentiable { .. })));
        let unset = PotentialFamily::coulomb(0.4).unwrap();
        assert_eq!(unset.eval_param_derivative(1.0), Err(PotentialError::NoSweepParam));
        assert!(PotentialFamily::coulomb(0.4).unwrap().with_sweep("a").is_err());
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let t = Table::from_samples("mem", vec![0.0, 1.0, 2.0], vec![-2.0, -1.0, -0.5]).unwrap();
        let fam = PotentialFamily::tabulated(t);
        assert_eq!(fam.value(0.5), -1.5);
        assert_eq!(fam.value(2.0), -0.5);
        assert_eq!(fam.value(2.5), 0.0);
        let fam = fam.with_sweep("v");
        assert!(fam.is_err());
        assert!(Table::from_samples("x", vec![0.0, 0.0], vec![-1.0, -1.0]).is_err());
    }

    #[test]
    fn tabulated_loads_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pot.csv");
        std::fs::write(&path, "r,V\n0,-1\n1,-0.5\n4,0\n").unwrap();
        let spec = format!("tabulated:file={}", path.display());
        let fam = PotentialFamily::parse(&spec).unwrap();
        assert_eq!(fam.value(0.5), -0.75);
        assert_eq!(fam.to_string(), spec);
        assert_eq!(PotentialFamily::parse(&fam.to_string()).unwrap(), fam);

        std::fs::write(&path, "0,-1\n2,-0.5\n1,0\n").unwrap();
        assert!(matches!(PotentialFamily::parse(&spec), Err(PotentialError::Table { .. })));
    }

    #[test]
    fn admissibility() {
        let ok = RadialProblem::new(3, 0, 1.0, PotentialFamily::coulomb(0.4).unwrap()).unwrap();
        assert!(validate_admissible(&ok).accepted());
        let bad = RadialProblem::new(3, 0, 1.0, PotentialFamily::coulomb(0.6).unwrap()).unwrap();
        let report = validate_admissible(&bad);
        assert!(matches!(report.violations[..], [Violation::FallToCenter { .. }]));
        let exp = RadialProblem::new(3, 0, 1.0, PotentialFamily::exponential(2.0, 1.0).unwrap()).unwrap();
        assert!(validate_admissible(&exp).accepted());
        let one_d = RadialProblem::one_dimensional(Parity::Even, 1.0, PotentialFamily::coulomb(0.1).unwrap()).unwrap();
        assert!(matches!(
            validate_admissible(&one_d).violations[..],
            [Violation::SingularInOneDimension]
        ));
        let t = Table::from_samples("mem", vec![0.0, 1.0], vec![-1.0, 0.5]).unwrap();
        let rep = RadialProblem::new(3, 0, 1.0, PotentialFamily::tabulated(t)).unwrap();
        assert!(matches!(validate_admissible(&rep).violations[..], [Violation::Repulsive { .. }]));
    }
}

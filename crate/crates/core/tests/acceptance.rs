//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::coulomb_energy;
use kg_spectra::analysis::{check_theorem1, comparison_identity, hf_derivative};
use kg_spectra::continuation::{linear_grid, log_grid, sweep_parameter, trace_folded_curve, RootWindow};
use kg_spectra::eigensolve::{find_state, EigenResult, SolverConfig};
use kg_spectra::potentials::PotentialFamily;
use kg_spectra::radial::{Parity, RadialProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PAIR_TOL: f64 = 5e-4;
const PAIR_BUDGET: Duration = Duration::from_secs(5);
const COULOMB_TOL: f64 = 1e-6;
const COULOMB_BUDGET: Duration = Duration::from_secs(30);
const IDENTITY_TOL: f64 = 1e-6;
const HF_TOL: f64 = 1e-3;
const HF_BUDGET: Duration = Duration::from_secs(60);
const SIGN_TOL: f64 = 1e-8;
const DEGENERACY_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-8;
const DOUBLING_TOL: f64 = 1e-7;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Solved {
    label: String,
    n: usize,
    result: EigenResult,
}

struct Shared {
    pair: Vec<Solved>,
    /// Indexed by (v, l, n_r) in suite order.
    coulomb: Vec<((f64, u32, usize), Solved)>,
}

const COUPLINGS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

fn solve(label: String, problem: &RadialProblem, n: usize, cfg: &SolverConfig) -> Result<Solved, String> {
    find_state(problem, n, cfg).map(|result| Solved { label: label.clone(), n, result }).map_err(|e| format!("{label}: {e}"))
}

fn criterion1(cfg: &SolverConfig) -> (Verdict, Vec<Solved>) {
    let bin = env!("CARGO_BIN_EXE_kg-spectra");
    let start = Instant::now();
    let mut energies = Vec::new();
    for spec in ["rational4:v=2", "exponential:v=2,b=1"] {
        let out = Command::new(bin)
            .args(["solve", "--potential", spec, "--d", "3", "--l", "0", "--m", "1", "--state", "0"])
            .env_remove("KG_SPECTRA_CONFIG")
            .output()
            .expect("run solve");
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
        energies.push(doc["energy"].as_f64().unwrap_or(f64::NAN));
    }
    let elapsed = start.elapsed();
    let (e1, e2) = (energies[0], energies[1]);
    let pass = (e1 - 0.7464).abs() <= PAIR_TOL && (e2 - 0.7542).abs() <= PAIR_TOL && e1 <= e2 && elapsed < PAIR_BUDGET;

    let mut solved = Vec::new();
    for (label, fam) in [
        ("rational4(v=2)", PotentialFamily::rational4(2.0).unwrap()),
        ("exponential(v=2,b=1)", PotentialFamily::exponential(2.0, 1.0).unwrap()),
    ] {
        let p = RadialProblem::new(3, 0, 1.0, fam).unwrap();
        if let Ok(s) = solve(label.to_string(), &p, 0, cfg) {
            solved.push(s);
        }
    }
    let detail = format!("E1 = {e1:.6}, E2 = {e2:.6} (targets 0.7464, 0.7542 +/- {PAIR_TOL:e}), {:.2} s", elapsed.as_secs_f64());
    (verdict(pass, detail), solved)
}

fn criterion2(cfg: &SolverConfig) -> (Verdict, Vec<((f64, u32, usize), Solved)>) {
    let start = Instant::now();
    let mut solved = Vec::new();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for v in COUPLINGS {
        for ell in [0u32, 1] {
            for n in 0..3usize {
                let p = RadialProblem::new(3, ell, 1.0, PotentialFamily::coulomb(v).unwrap()).unwrap();
                match solve(format!("coulomb v={v} l={ell} n={n}"), &p, n, cfg) {
                    Ok(s) => {
                        let err = (s.result.energy - coulomb_energy(v, ell as f64, n, 1.0)).abs();
                        worst = worst.max(err);
                        if !(err <= COULOMB_TOL) {
                            failures.push(format!("v={v} l={ell} n={n}: error {err:.2e}"));
                        }
                        solved.push(((v, ell, n), s));
                    }
                    Err(e) => failures.push(e),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && solved.len() == 24 && elapsed < COULOMB_BUDGET;
    let mut detail = format!("{}/24 solved, max |E - E_exact| = {worst:.2e}, {:.2} s", solved.len(), elapsed.as_secs_f64());
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    (verdict(pass, detail), solved)
}

fn criterion3(shared: &Shared) -> Verdict {
    let mut pairs: Vec<(&Solved, &Solved)> = Vec::new();
    if let [a, b] = &shared.pair[..] {
        pairs.push((a, b));
    }
    for ell in [0u32, 1] {
        for n in 0..3usize {
            let chain: Vec<&Solved> = COUPLINGS
                .iter()
                .filter_map(|v| shared.coulomb.iter().find(|(k, _)| *k == (*v, ell, n)).map(|(_, s)| s))
                .collect();
            for w in chain.windows(2) {
                // stronger coupling first
                pairs.push((w[1], w[0]));
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (a, b) in &pairs {
        match comparison_identity(&a.result, &b.result) {
            Ok(rep) => {
                worst = worst.max(rep.residual);
                if !(rep.residual <= IDENTITY_TOL) {
                    failures.push(format!("{} / {}: residual {:.2e}", a.label, b.label, rep.residual));
                }
            }
            Err(e) => failures.push(format!("{} / {}: {e}", a.label, b.label)),
        }
    }
    let pass = failures.is_empty() && pairs.len() == 19;
    let mut detail = format!("{} pairs, max residual {worst:.2e} (tol {IDENTITY_TOL:e})", pairs.len());
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    verdict(pass, detail)
}

/// A random differentiable configuration with a chosen sweep parameter.
fn random_configuration(rng: &mut ChaCha8Rng) -> (String, RadialProblem, PotentialFamily) {
    match rng.gen_range(0..3) {
        0 => {
            let (v, a) = (rng.gen_range(0.2..0.8), rng.gen_range(0.3..3.0));
            let name = if rng.gen_bool(0.5) { "a" } else { "v" };
            let fam = PotentialFamily::cutoff_coulomb(v, a).unwrap().with_sweep(name).unwrap();
            let p = if rng.gen_bool(0.5) {
                RadialProblem::one_dimensional(Parity::Even, 1.0, fam.clone()).unwrap()
            } else {
                RadialProblem::new(3, 0, 1.0, fam.clone()).unwrap()
            };
            (format!("{fam} d={} sweep {name}", p.dim()), p, fam)
        }
        1 => {
            let (v, b) = (rng.gen_range(1.5..4.0), rng.gen_range(0.7..2.0));
            let name = if rng.gen_bool(0.5) { "b" } else { "v" };
            let fam = PotentialFamily::exponential(v, b).unwrap().with_sweep(name).unwrap();
            let p = RadialProblem::new(3, 0, 1.0, fam.clone()).unwrap();
            (format!("{fam} d=3 sweep {name}"), p, fam)
        }
        _ => {
            let (v, r) = (rng.gen_range(0.3..1.0), rng.gen_range(0.5..3.0));
            let fam = PotentialFamily::square_well(v, r).unwrap().with_sweep("v").unwrap();
            let p = RadialProblem::one_dimensional(Parity::Even, 1.0, fam.clone()).unwrap();
            (format!("{fam} d=1 sweep v"), p, fam)
        }
    }
}

fn criterion4(cfg: &SolverConfig) -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut done, mut attempts) = (0, 0);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    while done < 20 && attempts < 200 {
        attempts += 1;
        let (label, p, fam) = random_configuration(&mut rng);
        let Ok(res) = find_state(&p, 0, cfg) else { continue };
        if res.energy < 0.0 {
            continue;
        }
        done += 1;
        match hf_derivative(&res, &fam) {
            Ok(rep) => {
                let agreement = rep.agreement.unwrap_or(f64::INFINITY);
                worst = worst.max(agreement);
                if !(agreement <= HF_TOL) {
                    failures.push(format!("{label}: agreement {agreement:.2e}"));
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && done == 20 && elapsed < HF_BUDGET;
    let mut detail =
        format!("{done} configurations, max agreement {worst:.2e} (tol {HF_TOL:e}), {:.2} s", elapsed.as_secs_f64());
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    verdict(pass, detail)
}

fn criterion5(cfg: &SolverConfig) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let template = RadialProblem::new(3, 0, 1.0, PotentialFamily::coulomb(0.1).unwrap()).unwrap();
    let (mut done, mut attempts, mut violations) = (0, 0, Vec::new());
    while done < 20 && attempts < 200 {
        attempts += 1;
        let b: f64 = rng.gen_range(0.7..2.0);
        let v2: f64 = rng.gen_range(1.0..4.0);
        let v1 = v2 + rng.gen_range(0.05..1.5);
        let Ok(rep) = check_theorem1(&format!("exponential:v={v1},b={b}"), &format!("exponential:v={v2},b={b}"), &template, cfg)
        else {
            continue;
        };
        if !(rep.e1 >= 0.0 && rep.e1 < 1.0 && rep.e2 >= 0.0 && rep.e2 < 1.0) {
            continue;
        }
        done += 1;
        if !(rep.e1 <= rep.e2) || !rep.hypotheses_ok {
            violations.push(format!("v1={v1:.4} v2={v2:.4} b={b:.4}: E1={:.6} E2={:.6}", rep.e1, rep.e2));
        }
    }
    let pass = violations.is_empty() && done == 20;
    let mut detail = format!("{done} pairs, {} violations", violations.len());
    if !violations.is_empty() {
        detail += &format!("; {}", violations.join("; "));
    }
    verdict(pass, detail)
}

fn criterion6(cfg: &SolverConfig) -> Verdict {
    let cutoff = PotentialFamily::cutoff_coulomb(0.5, 1.0).unwrap().with_sweep("a").unwrap();
    let t = RadialProblem::one_dimensional(Parity::Even, 1.0, cutoff.clone()).unwrap();
    let a_curve = sweep_parameter(&cutoff, &t, 0, &log_grid(0.1, 10.0, 12), cfg);
    let coupling = PotentialFamily::coulomb(0.1).unwrap().with_sweep("v").unwrap();
    let t = RadialProblem::new(3, 0, 1.0, coupling.clone()).unwrap();
    let v_curve = sweep_parameter(&coupling, &t, 0, &linear_grid(0.05, 0.45, 9), cfg);
    let (Ok(a_curve), Ok(v_curve)) = (a_curve, v_curve) else {
        return verdict(false, "sweep failed");
    };
    let a_points: Vec<_> = a_curve.converged_points().filter(|p| p.e >= 0.0).collect();
    let a_min = a_points.iter().filter_map(|p| p.de_hf).fold(f64::INFINITY, f64::min);
    let a_ok = !a_points.is_empty() && a_points.iter().all(|p| p.de_hf.is_some_and(|d| d >= -SIGN_TOL));
    let v_points: Vec<_> = v_curve.converged_points().collect();
    let v_max = v_points.iter().filter_map(|p| p.de_hf).fold(f64::NEG_INFINITY, f64::max);
    let v_ok = v_points.len() == 9 && v_points.iter().all(|p| p.de_hf.is_some_and(|d| d <= SIGN_TOL));
    verdict(
        a_ok && v_ok,
        format!(
            "cutoff a-sweep: {} points with E >= 0, min dE_hf {a_min:.3e}; coulomb v-sweep: {} points, max dE_hf {v_max:.3e}",
            a_points.len(),
            v_points.len()
        ),
    )
}

/// Fold checks on a traced curve of the even ground state.
fn fold_checks(v: f64, cfg: &SolverConfig) -> Verdict {
    let fam = PotentialFamily::cutoff_coulomb(v, 0.01).unwrap().with_sweep("a").unwrap();
    let t = RadialProblem::one_dimensional(Parity::Even, 1.0, fam.clone()).unwrap();
    let window = RootWindow::default();
    let curve = match trace_folded_curve(&fam, &t, 0, &linear_grid(-0.9, 0.9, 37), &window, cfg) {
        Ok(c) => c,
        Err(e) => return verdict(false, format!("v={v}: trace failed: {e}")),
    };
    let turning = curve.turning_points();
    let upper: Vec<_> = curve.converged_points().filter(|p| p.e >= 0.0).collect();
    let upper_ok = upper.windows(2).all(|w| (w[1].a - w[0].a) * (w[1].e - w[0].e) > 0.0);
    let Some((a_fit, e_fit)) = curve.fold else {
        let (a_lo, e_lo) = curve
            .converged_points()
            .map(|p| (p.a, p.e))
            .fold((f64::INFINITY, f64::NAN), |acc, x| if x.0 < acc.0 { x } else { acc });
        return verdict(
            false,
            format!(
                "v={v}: no fold; {} points, {turning} turning points, upper branch monotone: {upper_ok}; \
                 minimum a = {a_lo:.4e} at the curve end E = {e_lo:.3} (level leaves the window instead of turning)",
                curve.points.len()
            ),
        );
    };
    let ratio = window.step_ratio();
    let dense = log_grid(a_fit / ratio.powi(2), a_fit * ratio.powi(2), 41);
    let a_scan = dense.iter().copied().find(|&a| find_state(&t.with_family(fam.at_sweep(a).unwrap()), 0, cfg).is_ok());
    let (scan_ok, scan_text) = match a_scan {
        Some(a_scan) if a_scan > dense[0] => {
            let step = a_scan * (ratio.powf(0.1) - 1.0);
            ((a_fit - a_scan).abs() <= 2.0 * step, format!("dense-scan a* = {a_scan:.6e}, step {step:.2e}"))
        }
        Some(_) => (false, "dense scan bound at its lower end".to_string()),
        None => (false, "dense scan found no bound state".to_string()),
    };
    let pass = turning == 1 && e_fit < 0.0 && upper_ok && scan_ok;
    verdict(
        pass,
        format!("v={v}: fold a* = {a_fit:.6e}, E* = {e_fit:.4}; {turning} turning points; upper monotone: {upper_ok}; {scan_text}"),
    )
}

fn criterion8(shared: &Shared, cfg: &SolverConfig) -> Verdict {
    let mut failures = Vec::new();
    let mut worst_degeneracy: f64 = 0.0;
    let mut all: Vec<&Solved> = shared.pair.iter().chain(shared.coulomb.iter().map(|(_, s)| s)).collect();
    let mut extra = Vec::new();
    for v in COUPLINGS {
        for n in 0..3usize {
            let p = RadialProblem::new(5, 0, 1.0, PotentialFamily::coulomb(v).unwrap()).unwrap();
            match solve(format!("coulomb d=5 v={v} l=0 n={n}"), &p, n, cfg) {
                Ok(s) => {
                    if let Some((_, partner)) = shared.coulomb.iter().find(|(k, _)| *k == (v, 1, n)) {
                        let gap = (s.result.energy - partner.result.energy).abs();
                        worst_degeneracy = worst_degeneracy.max(gap);
                        if !(gap <= DEGENERACY_TOL) {
                            failures.push(format!("E(5,0) - E(3,1) at v={v} n={n}: {gap:.2e}"));
                        }
                    }
                    extra.push(s);
                }
                Err(e) => failures.push(e),
            }
        }
    }
    all.extend(extra.iter());

    let mut worst_norm: f64 = 0.0;
    for s in &all {
        worst_norm = worst_norm.max(s.result.norm_error);
        if s.result.nodes != s.n {
            failures.push(format!("{}: {} nodes", s.label, s.result.nodes));
        }
        if !(s.result.norm_error <= NORM_TOL) {
            failures.push(format!("{}: norm error {:.2e}", s.label, s.result.norm_error));
        }
    }

    let fine = cfg.doubled_grid();
    let mut worst_doubling: f64 = 0.0;
    let acceptance_states = shared.pair.iter().chain(shared.coulomb.iter().map(|(_, s)| s));
    for s in acceptance_states {
        match find_state(&s.result.problem, s.n, &fine) {
            Ok(r) => {
                let shift = (r.energy - s.result.energy).abs();
                worst_doubling = worst_doubling.max(shift);
                if !(shift <= DOUBLING_TOL) {
                    failures.push(format!("{}: grid doubling moves E by {shift:.2e}", s.label));
                }
            }
            Err(e) => failures.push(format!("{} (doubled grid): {e}", s.label)),
        }
    }
    let pass = failures.is_empty() && extra.len() == 12;
    let mut detail = format!(
        "max |E(5,0) - E(3,1)| = {worst_degeneracy:.2e}, {} states node-checked, max norm error {worst_norm:.2e}, \
         max grid-doubling shift {worst_doubling:.2e}",
        all.len()
    );
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    verdict(pass, detail)
}

fn report(id: u32, name: &str, v: &Verdict) -> bool {
    println!("criterion {id} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v.pass
}

fn main() {
    let cfg = SolverConfig::default();
    let mut passed = Vec::new();

    let (v1, pair) = criterion1(&cfg);
    passed.push(report(1, "truncated-exponential pair energies", &v1));
    let (v2, coulomb) = criterion2(&cfg);
    passed.push(report(2, "Coulomb closed-form suite", &v2));
    let shared = Shared { pair, coulomb };
    passed.push(report(3, "integral identity residual", &criterion3(&shared)));
    passed.push(report(4, "derivative formula vs finite differences", &criterion4(&cfg)));
    passed.push(report(5, "ordering of node-free ground states", &criterion5(&cfg)));
    passed.push(report(6, "monotone spectra signs", &criterion6(&cfg)));
    passed.push(report(7, "folded cutoff-Coulomb curve at v=0.5", &fold_checks(0.5, &cfg)));
    let reference = fold_checks(0.1, &cfg);
    println!(
        "note: the same fold checks at v=0.1 (reference, not a criterion): {} {}",
        if reference.pass { "pass" } else { "fail" },
        reference.detail
    );
    passed.push(report(8, "structural invariants", &criterion8(&shared, &cfg)));

    let failed = passed.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", passed.len() - failed, passed.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

#![allow(dead_code)]

/// Klein-Gordon levels of `-v/r` with effective angular momentum `l_eff`.
pub fn coulomb_energy(v: f64, l_eff: f64, n_r: usize, m: f64) -> f64 {
    let n = n_r as f64 + 0.5 + ((l_eff + 0.5).powi(2) - v * v).sqrt();
    m / (1.0 + v * v / (n * n)).sqrt()
}

/// `d/dv` of [`coulomb_energy`], differentiated by hand.
pub fn coulomb_energy_dv(v: f64, l_eff: f64, n_r: usize, m: f64) -> f64 {
    let s = ((l_eff + 0.5).powi(2) - v * v).sqrt();
    let n = n_r as f64 + 0.5 + s;
    let x = v * v / (n * n);
    let dx = 2.0 * v / (n * n) + 2.0 * v.powi(3) / (s * n.powi(3));
    -0.5 * m * (1.0 + x).powf(-1.5) * dx
}

/// Composite trapezoid on an arbitrary ascending abscissa.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// Exact even-parity square-well level condition residual `k tan(kR) - κ`
/// for the Klein-Gordon equation in one dimension.
pub fn square_well_even_residual(v: f64, radius: f64, m: f64, e: f64) -> f64 {
    let k = ((e + v).powi(2) - m * m).sqrt();
    let kappa = (m * m - e * e).sqrt();
    k * (k * radius).tan() - kappa
}

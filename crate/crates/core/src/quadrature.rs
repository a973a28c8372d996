//! Composite Simpson quadrature on radial grids.

use crate::radial::RadialGrid;

/// `∫ f dr` over the grid by composite Simpson in the grid variable, with a
/// 3/8-rule panel closing an odd interval count.
///
/// When the grid starts at `r_min > 0`, the segment `[0, r_min]` is added
/// assuming power-law behaviour `f ~ r^p` estimated from the first two
/// samples. This matters for Coulomb-type integrands whose leading power
/// is not an integer.
pub fn integrate(f: &[f64], grid: &RadialGrid) -> f64 {
    let radii = grid.radii();
    assert_eq!(f.len(), radii.len(), "integrand length must match the grid");
    let g: Vec<f64> = f.iter().zip(grid.jacobians()).map(|(fi, j)| fi * j).collect();
    simpson_uniform(&g, grid.step()) + origin_segment(f, &radii)
}

/// Same as [`integrate`] for an integrand built from a closure over grid
/// indices.
pub fn integrate_with(grid: &RadialGrid, f: impl Fn(usize) -> f64) -> f64 {
    let values: Vec<f64> = (0..grid.n_points()).map(f).collect();
    integrate(&values, grid)
}

/// [`integrate`] for integrands with jumps at `breaks`.
///
/// Each smooth stretch is integrated on its own; the partial interval up to
/// a jump uses the quadratic through the three nearest nodes on the same
/// side.
pub fn integrate_piecewise(f: &[f64], grid: &RadialGrid, breaks: &[f64]) -> f64 {
    let radii = grid.radii();
    assert_eq!(f.len(), radii.len(), "integrand length must match the grid");
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > radii[0] && *b < radii[radii.len() - 1]).collect();
    if cuts.is_empty() {
        return integrate(f, grid);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g: Vec<f64> = f.iter().zip(grid.jacobians()).map(|(fi, j)| fi * j).collect();
    let h = grid.step();
    let x0 = grid.x_of(radii[0]);
    let x = |i: usize| x0 + i as f64 * h;

    // node ranges [lo, hi] of the smooth stretches, with the cut on each side
    let mut total = origin_segment(f, &radii);
    let mut lo = 0usize;
    let mut left_cut: Option<f64> = None;
    for k in 0..=cuts.len() {
        let right_cut = cuts.get(k).map(|&c| grid.x_of(c));
        let hi = match right_cut {
            Some(xc) => (((xc - x0) / h).floor() as usize).min(g.len() - 1),
            None => g.len() - 1,
        };
        if hi < lo {
            // two cuts inside one interval: linear across the sliver
            if let (Some(xl), Some(xr)) = (left_cut, right_cut) {
                let i = hi;
                let slope = (g[i + 1] - g[i]) / h;
                let at = |xq: f64| g[i] + slope * (xq - x(i));
                total += 0.5 * (xr - xl) * (at(xl) + at(xr));
            }
            left_cut = right_cut;
            continue;
        }
        total += simpson_uniform(&g[lo..=hi], h);
        if let Some(xl) = left_cut {
            total += edge(&g, lo, (lo + 2).min(hi), xl, x(lo), &x);
        }
        if let Some(xr) = right_cut {
            total += edge(&g, hi.saturating_sub(2).max(lo), hi, x(hi), xr, &x);
        }
        lo = hi + 1;
        left_cut = right_cut;
    }
    total
}

/// `∫ p dx` over `[a, b]` for the interpolant of `g` on nodes `i0..=i1`.
fn edge(g: &[f64], i0: usize, i1: usize, a: f64, b: f64, x: &impl Fn(usize) -> f64) -> f64 {
    let nodes: Vec<usize> = (i0..=i1).collect();
    let p = |xq: f64| {
        nodes
            .iter()
            .map(|&i| {
                let w: f64 = nodes.iter().filter(|&&j| j != i).map(|&j| (xq - x(j)) / (x(i) - x(j))).product();
                w * g[i]
            })
            .sum::<f64>()
    };
    (b - a) / 6.0 * (p(a) + 4.0 * p(0.5 * (a + b)) + p(b))
}

fn origin_segment(f: &[f64], radii: &[f64]) -> f64 {
    let (r0, r1) = (radii[0], radii[1]);
    if r0 <= 0.0 {
        return 0.0;
    }
    let (f0, f1) = (f[0], f[1]);
    if f0 == 0.0 || f0.signum() != f1.signum() {
        return 0.0;
    }
    let p = (f1 / f0).ln() / (r1 / r0).ln();
    if !(p.is_finite() && p > -1.0) {
        return 0.0;
    }
    f0 * r0 / (p + 1.0)
}

/// Composite Simpson for samples at unit-spaced abscissae scaled by `h`.
pub fn simpson_uniform(g: &[f64], h: f64) -> f64 {
    let n = g.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (g[0] + g[1]),
        3 => h / 3.0 * (g[0] + 4.0 * g[1] + g[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                (k, 3.0 * h / 8.0 * (g[k] + 3.0 * g[k + 1] + 3.0 * g[k + 2] + g[k + 3]))
            };
            let mut acc = g[0] + g[simpson_end];
            for (i, gi) in g.iter().enumerate().take(simpson_end).skip(1) {
                acc += if i % 2 == 1 { 4.0 * gi } else { 2.0 * gi };
            }
            h / 3.0 * acc + tail
        }
    }
}

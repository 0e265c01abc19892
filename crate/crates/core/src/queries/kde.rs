//! Gaussian kernel density estimate on a uniform grid.

use serde::Serialize;

use crate::par::{self, ExecMode};

pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, falling back to the standard deviation when
/// the IQR is zero and to 1 when all samples are equal.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (false, _) => return 1.0,
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Trapezoid integral of `ys` over the uniform grid `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0).sum()
}

/// Density over `[min - 3h, max + 3h]`, rescaled so the trapezoid integral
/// over the grid is exactly one. `samples` must be non-empty.
pub fn kde(samples: &[f64], grid_points: usize, mode: ExecMode) -> Density {
    assert!(!samples.is_empty(), "kde of an empty sample");
    let h = silverman_bandwidth(samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let k = grid_points.max(2);
    let step = (hi - lo) / (k - 1) as f64;
    let grid: Vec<f64> = (0..k).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut density = par::map(mode, &grid, |x| {
        samples.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm
    });
    let area = trapezoid(&grid, &density);
    if area > 0.0 {
        for d in density.iter_mut() {
            *d /= area;
        }
    }
    Density { bandwidth: h, grid, density }
}

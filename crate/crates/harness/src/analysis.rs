//! Post-processing of purity curves: power-law slopes, plateaus, deviations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Purity window used by the summary slope fit.
pub const SLOPE_WINDOW: (f64, f64) = (0.001, 0.1);

/// A sample belongs to the decay region until the purity first drops below
/// this multiple of the plateau mean.
pub const PRE_PLATEAU_FACTOR: f64 = 1.5;

const MIN_FIT_POINTS: usize = 4;
const MIN_FIT_SPAN: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits `ln I = c + s·ln x + b·x⁻²` and reports `s`.
///
/// The `x⁻²` term absorbs the leading approach to the power law of
/// `det(1 + x²u)^{-1/2}`, so the slope is not biased by the knee of the curve.
/// Returns `None` with fewer than four points, a span below 1.5 in either `x`
/// or `I`, or a rank-deficient design.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let (xmin, xmax) = pts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    let (ymin, ymax) = pts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    if xmax / xmin < MIN_FIT_SPAN || ymax / ymin < MIN_FIT_SPAN {
        return None;
    }
    // centre the log abscissa and scale the correction column for conditioning
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let centre = xs.iter().sum::<f64>() / xs.len() as f64;
    let scale = xmin * xmin;
    let a = DMatrix::from_fn(pts.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => xs[r] - centre,
        _ => scale / (pts[r].0 * pts[r].0),
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1.ln()));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return None;
    }
    let coef = svd.solve(&b, 0.0).ok()?;
    let slope = coef[1];
    Some(SlopeFit {
        slope,
        intercept: coef[0] - slope * centre,
        points: pts.len(),
    })
}

/// `(δt, I)` pairs with `lo < I < hi` among the samples where `keep` holds.
pub fn window_points(
    delta_t: &[f64],
    values: &[f64],
    (lo, hi): (f64, f64),
    keep: impl Fn(usize) -> bool,
) -> Vec<(f64, f64)> {
    delta_t
        .iter()
        .zip(values)
        .enumerate()
        .filter(|&(k, (_, &v))| v > lo && v < hi && keep(k))
        .map(|(_, (&x, &v))| (x, v))
        .collect()
}

/// Mean and population standard deviation of the trailing fraction.
pub fn plateau(values: &[f64], fraction: f64) -> Option<(f64, f64)> {
    let count = ((values.len() as f64) * fraction).round() as usize;
    if count < purity_core::entanglement::MIN_WINDOW || count > values.len() {
        return None;
    }
    let w = &values[values.len() - count..];
    let mean = w.iter().sum::<f64>() / count as f64;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    Some((mean, var.sqrt()))
}

/// Index of the first sample at or below `PRE_PLATEAU_FACTOR · plateau_mean`;
/// samples before it form the decay region.
pub fn plateau_onset(values: &[f64], plateau_mean: f64) -> usize {
    let level = PRE_PLATEAU_FACTOR * plateau_mean;
    values.iter().position(|&v| v <= level).unwrap_or(values.len())
}

/// `max |a − b| / |b|` over the samples where `keep` holds.
pub fn max_relative_deviation(a: &[f64], b: &[f64], keep: impl Fn(usize) -> bool) -> Option<f64> {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|&(k, _)| keep(k))
        .map(|(_, (x, y))| (x - y).abs() / y.abs())
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))))
}

/// All channels of one run on a shared grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curves {
    pub t: Vec<f64>,
    pub delta_t: Vec<f64>,
    pub quantum: Option<Vec<f64>>,
    pub echo: Option<Vec<f64>>,
    pub semiclassical: Option<Vec<f64>>,
    pub closed_form: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub label: String,
    pub slope_quantum: Option<f64>,
    pub slope_semiclassical: Option<f64>,
    pub plateau_mean: Option<f64>,
    pub plateau_std: Option<f64>,
    /// Quantum against semiclassical inside the validity window.
    pub max_rel_dev: Option<f64>,
    /// Echo against full quantum.
    pub echo_max_rel_dev: Option<f64>,
}

pub fn summarize(label: &str, c: &Curves, validity_t_max: f64, plateau_fraction: f64) -> Summary {
    let mut s = Summary {
        label: label.to_string(),
        ..Default::default()
    };
    let inside = |k: usize| c.t[k] < validity_t_max;
    if let Some(sc) = &c.semiclassical {
        s.slope_semiclassical =
            fit_slope(&window_points(&c.delta_t, sc, SLOPE_WINDOW, |_| true)).map(|f| f.slope);
    }
    if let Some(q) = &c.quantum {
        s.slope_quantum = fit_slope(&window_points(&c.delta_t, q, SLOPE_WINDOW, inside)).map(|f| f.slope);
        if let Some((m, sd)) = plateau(q, plateau_fraction) {
            s.plateau_mean = Some(m);
            s.plateau_std = Some(sd);
        }
        if let Some(sc) = &c.semiclassical {
            s.max_rel_dev = max_relative_deviation(q, sc, inside);
        }
        if let Some(e) = &c.echo {
            s.echo_max_rel_dev = max_relative_deviation(e, q, |_| true);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, x_max: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|k| x_max * k as f64 / (n - 1) as f64).collect();
        let ys = xs.iter().map(|&x| f(x)).collect();
        (xs, ys)
    }

    #[test]
    fn slopes_of_reference_curves() {
        let (x, y) = series(|x| 1.0 / (1.0 + x * x).sqrt(), 2000.0, 20_001);
        let fit = fit_slope(&window_points(&x, &y, SLOPE_WINDOW, |_| true)).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.02, "{fit:?}");

        let (x, y) = series(|x| 1.0 / (1.0 + x * x), 100.0, 10_001);
        let fit = fit_slope(&window_points(&x, &y, SLOPE_WINDOW, |_| true)).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn constant_series_has_no_slope() {
        let (x, y) = series(|_| 0.05, 10.0, 101);
        assert_eq!(fit_slope(&window_points(&x, &y, SLOPE_WINDOW, |_| true)), None);
        let (x, y) = series(|_| 0.5, 10.0, 101);
        assert!(window_points(&x, &y, SLOPE_WINDOW, |_| true).is_empty());
        assert_eq!(fit_slope(&[]), None);
    }

    #[test]
    fn exact_power_law_recovered() {
        let pts: Vec<(f64, f64)> = (1..20).map(|k| (k as f64, 3.0 * (k as f64).powf(-1.5))).collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-10);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn plateau_and_onset() {
        let mut v = vec![1.0, 0.8, 0.5, 0.35];
        v.extend(std::iter::repeat(0.2).take(16));
        let (m, sd) = plateau(&v, 0.5).unwrap();
        assert!((m - 0.2).abs() < 1e-15 && sd < 1e-15);
        assert_eq!(plateau_onset(&v, m), 4);
        assert_eq!(plateau(&v, 0.1), None);
    }

    #[test]
    fn deviation() {
        let a = [1.0, 1.1, 2.0];
        let b = [1.0, 1.0, 1.0];
        assert!((max_relative_deviation(&a, &b, |k| k < 2).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(max_relative_deviation(&a, &b, |_| false), None);
    }
}

//! Least-squares fits used by the rate and slope diagnostics.

/// Ordinary least squares y = slope·x + icept on (x, y) pairs.
/// Returns (slope, intercept, r²). Degenerate inputs give zeros.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, pts.first().map_or(0.0, |p| p.1), 0.0);
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, icept, r2)
}

/// Fitted exponential rate of a positive series d(t) ≈ C e^{-rate·t} over
/// the window where d ∈ (lo, hi). The first and last e-folding inside the
/// window are dropped (transient and floor).
pub struct RateFit {
    pub rate: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_exponential_rate(ts: &[f64], ds: &[f64], lo: f64, hi: f64) -> RateFit {
    assert_eq!(ts.len(), ds.len());
    let mut pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ds)
        .filter(|(_, &d)| d > lo && d < hi)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() > 8 {
        // drop one e-folding at each end of the window
        let y_max = pts.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        let y_min = pts.iter().map(|p| p.1).fold(f64::MAX, f64::min);
        if y_max - y_min > 3.0 {
            pts.retain(|p| p.1 < y_max - 1.0 && p.1 > y_min + 1.0);
        }
    }
    let (slope, _, r2) = linear_fit(&pts);
    RateFit {
        rate: -slope,
        r2,
        points: pts.len(),
    }
}

/// Log-log slope of y against x over positive samples.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let (slope, _, r2) = linear_fit(&pts);
    (slope, r2)
}

/// Number of e-foldings spanned by a positive series.
pub fn efoldings(ds: &[f64]) -> f64 {
    let max = ds.iter().copied().fold(0.0f64, f64::max);
    let min = ds
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::MAX, f64::min);
    if max > 0.0 && min < f64::MAX && min > 0.0 {
        (max / min).ln()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (s, b, r2) = linear_fit(&pts);
        assert!((s + 0.5).abs() < 1e-12);
        assert!((b - 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_exponential_rate() {
        let ts: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
        let ds: Vec<f64> = ts.iter().map(|&t| 2.0 * (-0.8 * t).exp()).collect();
        let fit = fit_exponential_rate(&ts, &ds, 1e-6, 1.0);
        assert!((fit.rate - 0.8).abs() < 1e-9, "rate {}", fit.rate);
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn loglog_slope_of_quadratic() {
        let xs: Vec<f64> = vec![1e-2, 5e-3, 2.5e-3];
        let ys: Vec<f64> = xs.iter().map(|&x| 7.0 * x * x).collect();
        let (s, r2) = loglog_slope(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-10);
        assert!(r2 > 0.999999);
    }
}

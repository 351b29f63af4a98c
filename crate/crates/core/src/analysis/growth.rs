//! `Ẑ(0; n) ≈ C₁ m^{-n} n^{η}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::weighted_least_squares;
use crate::percolation::{EstimatorTable, Window};

/// Fewest time points a growth fit accepts.
pub const MIN_GROWTH_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub m: f64,
    pub log_m: f64,
    pub log_m_se: f64,
    pub eta: f64,
    pub eta_se: f64,
    pub c1: f64,
    pub log_c1: f64,
    pub log_c1_se: f64,
    /// Weighted RMS residual of `log Ẑ`.
    pub residual: f64,
    pub window: (usize, usize),
    pub points: usize,
}

impl GrowthFit {
    pub fn model(&self, n: f64) -> f64 {
        self.c1 * (-n * self.log_m).exp() * n.powf(self.eta)
    }
}

/// Weighted regression of `log z` on `(-n, log n, 1)`. `se` gives inverse
/// variance weights `(z/se)²`; without it all points weigh the same.
pub fn fit_growth_series(n: &[f64], z: &[f64], se: Option<&[f64]>) -> Result<GrowthFit> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for i in 0..n.len() {
        let wi = match se {
            Some(s) if s[i] > 0.0 => (z[i] / s[i]).powi(2),
            Some(_) => continue,
            None => 1.0,
        };
        if !(z[i] > 0.0) || !(n[i] > 0.0) {
            continue;
        }
        rows.push(vec![-n[i], n[i].ln(), 1.0]);
        y.push(z[i].ln());
        w.push(wi);
    }
    if rows.len() < MIN_GROWTH_POINTS {
        return Err(Error::Fit(format!(
            "growth fit needs {MIN_GROWTH_POINTS} usable points, have {}",
            rows.len()
        )));
    }
    let (c, cov) =
        weighted_least_squares(&rows, &y, &w).ok_or_else(|| Error::Fit("singular growth design".into()))?;
    let mut rss = 0.0;
    let mut sw = 0.0;
    for ((r, yi), wi) in rows.iter().zip(&y).zip(&w) {
        let e = yi - (c[0] * r[0] + c[1] * r[1] + c[2]);
        rss += wi * e * e;
        sw += wi;
    }
    // unit weights carry no variance scale: estimate it from the residuals
    let scale = if se.is_none() && rows.len() > 3 {
        rss / (rows.len() - 3) as f64
    } else {
        1.0
    };
    let sd = |i: usize| (cov[i * 3 + i] * scale).max(0.0).sqrt();
    let first = n.iter().copied().fold(f64::INFINITY, f64::min);
    let last = n.iter().copied().fold(0.0, f64::max);
    Ok(GrowthFit {
        m: c[0].exp(),
        log_m: c[0],
        log_m_se: sd(0),
        eta: c[1],
        eta_se: sd(1),
        c1: c[2].exp(),
        log_c1: c[2],
        log_c1_se: sd(2),
        residual: (rss / sw).sqrt(),
        window: (first as usize, last as usize),
        points: rows.len(),
    })
}

/// [`fit_growth_series`] on the `k = 0` row of a table over `window`.
pub fn fit_growth(table: &EstimatorTable, window: Window) -> Result<GrowthFit> {
    let (lo, hi) = window.resolve(table.n_max)?;
    let z = table.zero_series();
    let sel: Vec<_> = z[lo.max(1)..=hi].iter().filter(|e| e.valid()).collect();
    let n: Vec<f64> = sel.iter().map(|e| e.n as f64).collect();
    let v: Vec<f64> = sel.iter().map(|e| e.mean_re).collect();
    let s: Vec<f64> = sel.iter().map(|e| e.stderr).collect();
    let mut f = fit_growth_series(&n, &v, Some(&s))?;
    f.window = (lo.max(1), hi);
    Ok(f)
}

/// The default fit plus a refit on the last third, for window sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub fit: GrowthFit,
    pub last_third: Option<GrowthFit>,
}

pub fn growth_report(table: &EstimatorTable, window: Window) -> Result<GrowthReport> {
    let fit = fit_growth(table, window)?;
    let n = table.n_max;
    let third = Window::new(n - n / 3, n);
    Ok(GrowthReport {
        fit,
        last_third: fit_growth(table, third).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_model() {
        let n: Vec<f64> = (1..=40).map(f64::from).collect();
        let z: Vec<f64> = n.iter().map(|n| 1.3 * 1.05f64.powf(-n)).collect();
        let f = fit_growth_series(&n, &z, None).unwrap();
        assert!((f.c1 - 1.3).abs() < 1e-10 && (f.m - 1.05).abs() < 1e-10 && f.eta.abs() < 1e-10);
    }

    #[test]
    fn recovers_power_correction() {
        let n: Vec<f64> = (10..=200).map(f64::from).collect();
        let z: Vec<f64> = n.iter().map(|n| 0.7 * 1.01f64.powf(-n) * n.powf(0.3)).collect();
        let f = fit_growth_series(&n, &z, None).unwrap();
        assert!((f.eta - 0.3).abs() < 1e-9);
    }

    #[test]
    fn short_window_rejected() {
        let n = [1.0, 2.0, 3.0];
        assert!(matches!(fit_growth_series(&n, &[1.0; 3], None), Err(Error::Fit(_))));
    }
}

//! Susceptibility and mass exponents from a subcritical sweep, and the
//! estimator-level sandwich checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fit_line;
use crate::percolation::{estimate_susceptibility, EstimatorTable, Window};

use super::growth::fit_growth;

/// One subcritical point: `χ̂` and the growth rate `m̂_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub chi: f64,
    pub chi_se: f64,
    pub m: f64,
    pub m_se: f64,
    /// Fitted tail ratio `r̂ < 1` (the point is usable).
    pub subcritical: bool,
}

/// Builds a sweep point from one table; `Error::Critical` marks the point
/// as not subcritical instead of failing.
pub fn sweep_point(table: &EstimatorTable, window: Window, margin: f64) -> Result<SweepPoint> {
    let g = fit_growth(table, window)?;
    match estimate_susceptibility(table, window, margin) {
        Ok(s) => Ok(SweepPoint {
            p: table.p,
            chi: s.chi,
            chi_se: s.chi_se,
            m: g.m,
            m_se: g.m * g.log_m_se,
            subcritical: true,
        }),
        Err(Error::Critical { .. }) => Ok(SweepPoint {
            p: table.p,
            chi: f64::NAN,
            chi_se: f64::NAN,
            m: g.m,
            m_se: g.m * g.log_m_se,
            subcritical: false,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub gamma: f64,
    pub gamma_se: f64,
    pub tau: f64,
    pub tau_se: f64,
    pub used: usize,
    pub warnings: Vec<String>,
}

struct Slopes {
    gamma: (f64, f64),
    tau: (f64, f64),
}

fn slopes(points: &[&SweepPoint], p_c: f64) -> Result<Slopes> {
    let x: Vec<f64> = points.iter().map(|s| (p_c - s.p).ln()).collect();
    let chi: Vec<f64> = points.iter().map(|s| s.chi.ln()).collect();
    let w_chi: Vec<f64> = points.iter().map(|s| weight(s.chi, s.chi_se)).collect();
    let g = fit_line(&x, &chi, Some(&w_chi)).ok_or_else(|| Error::Fit("gamma regression".into()))?;
    let tm: Vec<(f64, f64, f64)> = points
        .iter()
        .zip(&x)
        .filter(|(s, _)| s.m > 1.0)
        .map(|(s, &xi)| (xi, (s.m - 1.0).ln(), weight(s.m - 1.0, s.m_se)))
        .collect();
    let tx: Vec<f64> = tm.iter().map(|t| t.0).collect();
    let ty: Vec<f64> = tm.iter().map(|t| t.1).collect();
    let tw: Vec<f64> = tm.iter().map(|t| t.2).collect();
    let t = fit_line(&tx, &ty, Some(&tw)).ok_or_else(|| Error::Fit("tau regression".into()))?;
    Ok(Slopes {
        gamma: (-g.slope, g.slope_se),
        tau: (t.slope, t.slope_se),
    })
}

/// Inverse variance of `log y`.
fn weight(y: f64, se: f64) -> f64 {
    if se > 0.0 && y > 0.0 {
        (y / se).powi(2)
    } else {
        1.0
    }
}

/// `γ̂ = -d log χ̂ / d log(p̂_c - p)`, `τ̂ = d log(m̂_p - 1) / d log(p̂_c - p)`.
/// The error includes the shift of both slopes when `p̂_c` moves by one
/// standard error.
pub fn exponent_fits(sweep: &[SweepPoint], p_c: f64, p_c_se: f64) -> Result<ExponentFit> {
    let mut warnings = Vec::new();
    let mut used: Vec<&SweepPoint> = Vec::new();
    for s in sweep {
        if !s.subcritical || !(s.p < p_c) || !(s.chi > 0.0) {
            warnings.push(format!("p = {} excluded: not subcritical", s.p));
        } else {
            used.push(s);
        }
    }
    if used.len() < 5 {
        return Err(Error::Fit(format!("need 5 subcritical sweep points, have {}", used.len())));
    }
    let eps: Vec<f64> = used.iter().map(|s| (p_c - s.p) / p_c).collect();
    let span = eps.iter().copied().fold(0.0, f64::max) / eps.iter().copied().fold(f64::INFINITY, f64::min);
    if span < 4.0 {
        return Err(Error::Fit(format!("(p_c - p)/p_c spans only a factor {span:.2}; need 4")));
    }
    let base = slopes(&used, p_c)?;
    let (mut dg, mut dt) = (0.0f64, 0.0f64);
    if p_c_se > 0.0 {
        for shift in [-p_c_se, p_c_se] {
            let q = p_c + shift;
            if used.iter().all(|s| s.p < q) {
                let s = slopes(&used, q)?;
                dg = dg.max((s.gamma.0 - base.gamma.0).abs());
                dt = dt.max((s.tau.0 - base.tau.0).abs());
            }
        }
    }
    Ok(ExponentFit {
        gamma: base.gamma.0,
        gamma_se: base.gamma.1.hypot(dg),
        tau: base.tau.0,
        tau_se: base.tau.1.hypot(dt),
        used: used.len(),
        warnings,
    })
}

/// Lower half of the sandwich `m̂/χ̂ <= m̂ - 1`, as the margin
/// `(m̂ - 1 - m̂/χ̂)` in units of its propagated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub p: f64,
    pub margin: f64,
    pub sigma: f64,
    pub holds: bool,
    /// `m̂ p >= 1 - tol`.
    pub rate_bound: bool,
}

pub fn sandwich_check(s: &SweepPoint, tol: f64) -> SandwichCheck {
    let margin = s.m - 1.0 - s.m / s.chi;
    // ∂/∂m = 1 - 1/χ, ∂/∂χ = m/χ²
    let sigma = ((1.0 - 1.0 / s.chi) * s.m_se).hypot(s.m / (s.chi * s.chi) * s.chi_se);
    SandwichCheck {
        p: s.p,
        margin,
        sigma,
        holds: margin >= -3.0 * sigma,
        rate_bound: s.m * s.p >= 1.0 - tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(p_c: f64) -> Vec<SweepPoint> {
        [0.02, 0.03, 0.05, 0.08, 0.12]
            .iter()
            .map(|e| {
                let p = p_c - e;
                SweepPoint {
                    p,
                    chi: 1.0 / (p_c - p),
                    chi_se: 0.0,
                    m: 1.0 + (p_c - p),
                    m_se: 0.0,
                    subcritical: true,
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let f = exponent_fits(&synthetic(1.01), 1.01, 0.0).unwrap();
        assert!((f.gamma - 1.0).abs() < 1e-10 && (f.tau - 1.0).abs() < 1e-10);
    }

    #[test]
    fn needs_span_and_points() {
        let mut s = synthetic(1.0);
        s[0].subcritical = false;
        assert!(exponent_fits(&s, 1.0, 0.0).is_err());
        let narrow: Vec<SweepPoint> = synthetic(1.0).into_iter().map(|mut x| {
            x.p = 1.0 - 0.05 - (1.0 - x.p) * 1e-3;
            x
        }).collect();
        assert!(exponent_fits(&narrow, 1.0, 0.0).is_err());
    }

    #[test]
    fn sandwich_on_exact_point() {
        let s = SweepPoint { p: 0.9, chi: 10.0, chi_se: 0.0, m: 1.12, m_se: 0.0, subcritical: true };
        let c = sandwich_check(&s, 1e-9);
        assert!(c.holds && c.rate_bound);
    }
}

//! Bubble, triangle and the critical-point correction, each computed as a
//! real-space series of return probabilities and as a dual-grid quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::StepKernel;
use crate::numeric::{fit_line, gauss_legendre, hurwitz_zeta, weighted_least_squares, KahanSum};

use super::asymptotics::spectral_asymptotics;
use super::grid::{dual_values, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramOptions {
    /// Torus side; `None` picks [`default_grid`].
    pub m: Option<usize>,
    /// Cap on the number of explicit series terms.
    pub n_terms: usize,
    /// Explicit terms stop once the walk's scale `(n v)^{1/s}` reaches this
    /// fraction of `M`.
    pub reach: f64,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        Self {
            m: None,
            n_terms: 4096,
            reach: 1.0 / 16.0,
        }
    }
}

/// Default torus side per dimension (at most 2^24 nodes).
pub fn default_grid(d: usize) -> usize {
    match d {
        1 => 1 << 18,
        2 => 1 << 10,
        3 => 96,
        4 => 64,
        5 | 6 => 16,
        _ => 8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DiagramValue {
    Converged {
        method_a: f64,
        method_b: f64,
        /// `|A - B| / B`.
        discrepancy: f64,
        tolerance: f64,
        /// Extrapolated part of method A.
        tail_a: f64,
        /// Analytic `k = 0` cell of method B.
        cell_b: f64,
    },
    Divergent {
        partial_sums: Vec<(u64, f64)>,
        growth_exponent: f64,
        reason: String,
    },
    Degenerate {
        reason: String,
    },
}

impl DiagramValue {
    pub fn converged(&self) -> Option<(f64, f64)> {
        match self {
            DiagramValue::Converged { method_a, method_b, .. } => Some((*method_a, *method_b)),
            _ => None,
        }
    }

    pub fn discrepancy(&self) -> Option<f64> {
        match self {
            DiagramValue::Converged { discrepancy, .. } => Some(*discrepancy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramReport {
    pub bubble: DiagramValue,
    pub triangle: DiagramValue,
    pub pc_correction: DiagramValue,
    pub grid: TorusGrid,
    /// Explicit series terms used by method A.
    pub terms: u64,
    /// Small-`|k|` fit `1 - D̂ ≈ v |k|^s` used for the cell and the tail.
    pub v: f64,
    pub s: f64,
    /// Free decay exponent of `D^{*n}(o)` over the last explicit terms.
    pub return_exponent: f64,
}

/// `C` with `∫_{[-h,h]^d} |k|^{-β} dk = C h^{d-β}` (the cube split into
/// `2d` pyramids, the transverse integral done by Gauss-Legendre).
fn cell_constant(d: usize, beta: f64) -> f64 {
    let m = d - 1;
    let inner = if m == 0 {
        1.0
    } else {
        let n = match m {
            1 => 48,
            2 => 32,
            3 => 20,
            _ => 8,
        };
        let (x, w) = gauss_legendre(n);
        let mut idx = vec![0usize; m];
        let mut acc = KahanSum::new();
        'outer: loop {
            let mut r2 = 1.0;
            let mut wt = 1.0;
            for &i in &idx {
                r2 += x[i] * x[i];
                wt *= w[i];
            }
            acc.add(wt * r2.powf(-beta / 2.0));
            for j in (0..m).rev() {
                idx[j] += 1;
                if idx[j] < n {
                    continue 'outer;
                }
                idx[j] = 0;
            }
            break;
        }
        acc.value()
    };
    2.0 * d as f64 / (d as f64 - beta) * inner
}

fn effective_index(kernel: &StepKernel) -> f64 {
    kernel.spec().stable_index()
}

/// Return probabilities `D^{*n}(o)`, `n = 0..=n_max`, as node averages of
/// `D̂^n` (exact while `D^{*n}` does not wrap around the torus).
fn return_probabilities(vals: &[f64], n_max: usize) -> Vec<f64> {
    let mut pow = vals.to_vec();
    let inv = 1.0 / vals.len() as f64;
    let mut a = vec![1.0];
    for n in 1..=n_max {
        if n > 1 {
            for (p, v) in pow.iter_mut().zip(vals) {
                *p *= v;
            }
        }
        a.push(pow.iter().copied().collect::<KahanSum>().value() * inv);
    }
    a
}

/// Free power-law fit `a_n ≈ c n^{-e}` over `lo..=hi`; returns `e`.
fn free_exponent(a: &[f64], lo: usize, hi: usize) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = (lo..=hi)
        .filter(|&n| a[n] > 0.0)
        .map(|n| ((n as f64).ln(), a[n].ln()))
        .unzip();
    fit_line(&x, &y, None).map_or(f64::NAN, |f| -f.slope)
}

/// Tail model `a_n ≈ n^{-e} (c0 + c1 n^{-δ})`.
#[derive(Debug, Clone, Copy)]
struct TailModel {
    e: f64,
    delta: f64,
    c0: f64,
    c1: f64,
}

impl TailModel {
    /// Stable-scaling exponent `e = d/s` with the first correction
    /// `δ = min((2-s)/s, 1)`, amplitudes fitted on the last half of terms.
    fn fit(a: &[f64], d: usize, s: f64) -> Option<(Self, Self)> {
        let n_max = a.len() - 1;
        let e = d as f64 / s;
        let delta = ((2.0 - s) / s).clamp(1e-3, 1.0);
        let lo = (n_max / 2).max(2);
        let rows: Vec<Vec<f64>> = (lo..=n_max)
            .map(|n| {
                let nf = n as f64;
                vec![nf.powf(-e), nf.powf(-e - delta)]
            })
            .collect();
        let y: Vec<f64> = (lo..=n_max).map(|n| a[n]).collect();
        let w: Vec<f64> = y.iter().map(|v| 1.0 / (v * v)).collect();
        let two = weighted_least_squares(&rows, &y, &w).map(|(c, _)| Self {
            e,
            delta,
            c0: c[0],
            c1: c[1],
        });
        let one = Self {
            e,
            delta,
            c0: a[n_max] * (n_max as f64).powf(e),
            c1: 0.0,
        };
        Some((two.unwrap_or(one), one))
    }

    /// `Σ_{n>N} w(n) a_n` under the model.
    fn tail(&self, kind: Kind, n: usize) -> f64 {
        self.c0 * power_tail(kind, self.e, n) + self.c1 * power_tail(kind, self.e + self.delta, n)
    }
}

/// `Σ_{n>N} w(n) n^{-p}` for the three diagram weights.
fn power_tail(kind: Kind, p: f64, n: usize) -> f64 {
    if p <= kind.threshold() {
        return f64::INFINITY;
    }
    let a = n as f64 + 1.0;
    match kind {
        Kind::Bubble => hurwitz_zeta(p, a),
        Kind::Triangle => hurwitz_zeta(p - 1.0, a) - hurwitz_zeta(p, a),
        Kind::Pc => 0.5 * 2f64.powf(-p) * hurwitz_zeta(p, (n / 2) as f64 + 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Bubble,
    Triangle,
    Pc,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Bubble => "bubble",
            Kind::Triangle => "triangle",
            Kind::Pc => "pc_correction",
        }
    }

    /// Series weight of `D^{*n}(o)`.
    fn weight(self, n: usize) -> f64 {
        match self {
            Kind::Bubble => (n >= 2) as u8 as f64,
            Kind::Triangle => n.saturating_sub(1) as f64,
            Kind::Pc => {
                if n >= 4 && n.is_multiple_of(2) {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Integrand in terms of `D̂`.
    fn integrand(self, f: f64) -> f64 {
        match self {
            Kind::Bubble => f * f / (1.0 - f),
            Kind::Triangle => {
                let r = f / (1.0 - f);
                r * r
            }
            Kind::Pc => {
                let f2 = f * f;
                0.5 * f2 * f2 / (1.0 - f2)
            }
        }
    }

    /// Order at which the series weight grows: the sum converges iff the
    /// return exponent exceeds this.
    fn threshold(self) -> f64 {
        match self {
            Kind::Triangle => 2.0,
            _ => 1.0,
        }
    }

    /// `k = 0` cell integral from the local model `1 - D̂ = v|k|^s`, over
    /// `[-h,h]^d`, divided by `(2π)^d`.
    fn cell(self, d: usize, h: f64, v: f64, s: f64, vol: f64) -> f64 {
        let tp = (2.0 * std::f64::consts::PI).powi(d as i32);
        let sing = |beta: f64| cell_constant(d, beta) * h.powf(d as f64 - beta) / tp;
        match self {
            // D̂²/(1-D̂) = 1/(1-D̂) - (1 + D̂)
            Kind::Bubble => sing(s) / v - 2.0 * vol,
            // D̂²/(1-D̂)² = 1/(1-D̂)² - 2/(1-D̂) + 1
            Kind::Triangle => sing(2.0 * s) / (v * v) - 2.0 * sing(s) / v + vol,
            // ½D̂⁴/(1-D̂²) = ¼/(1-D̂) + ¼/(1+D̂) - ½(1 + D̂²)
            Kind::Pc => sing(s) / (4.0 * v) + (0.125 - 1.0) * vol,
        }
    }
}

/// Evaluates all three diagrams by both methods.
pub fn diagram_values(kernel: &StepKernel, opts: &DiagramOptions) -> Result<DiagramReport> {
    let d = kernel.d();
    let m = opts.m.unwrap_or_else(|| default_grid(d));
    let grid = TorusGrid::new(d, m)?;
    let (vals, _) = dual_values(kernel, &grid);
    let h = std::f64::consts::PI / m as f64;
    let fit = spectral_asymptotics(kernel, None)?;
    let (v, s) = (fit.power_v, fit.power_slope);

    let degenerate = vals
        .iter()
        .skip(1)
        .position(|&f| 1.0 - f <= 1e-12 || 1.0 + f <= 1e-12)
        .map(|i| {
            format!(
                "1 - D^ or 1 + D^ vanishes at k = {:?} (antiperiodic pole)",
                grid.wavevector(i + 1)
            )
        });
    if let Some(reason) = degenerate {
        let dv = DiagramValue::Degenerate { reason };
        return Ok(DiagramReport {
            bubble: dv.clone(),
            triangle: dv.clone(),
            pc_correction: dv,
            grid,
            terms: 0,
            v,
            s,
            return_exponent: f64::NAN,
        });
    }

    let reach = (opts.reach * m as f64).powf(s) / v;
    let n_a = (reach.floor() as usize).clamp(8, opts.n_terms.max(8));
    let a = return_probabilities(&vals, n_a);
    let lo = if n_a >= 20 { n_a / 10 } else { n_a / 2 }.max(2);
    let free_e = free_exponent(&a, lo, n_a);
    let (model, crude) =
        TailModel::fit(&a, d, s).ok_or_else(|| Error::Fit("return-probability tail".into()))?;

    let s_eff = effective_index(kernel);
    let vol = (m as f64).powi(-(d as i32));
    let eval = |kind: Kind| -> DiagramValue {
        let regime_ok = d as f64 > kind.threshold() * s_eff;
        let tail = model.tail(kind, n_a);
        if !regime_ok || !tail.is_finite() {
            let mut partial = Vec::new();
            let mut acc = KahanSum::new();
            for (n, an) in a.iter().enumerate() {
                acc.add(kind.weight(n) * an);
                if n.is_power_of_two() || n == n_a {
                    partial.push((n as u64, acc.value()));
                }
            }
            let reason = if regime_ok {
                format!("{}: return exponent d/s = {:.3} too small", kind.name(), model.e)
            } else {
                format!(
                    "{} needs d > {} min(alpha, 2) = {}",
                    kind.name(),
                    kind.threshold(),
                    kind.threshold() * s_eff
                )
            };
            return DiagramValue::Divergent {
                partial_sums: partial,
                growth_exponent: kind.threshold() - free_e,
                reason,
            };
        }
        let head: f64 = a
            .iter()
            .enumerate()
            .map(|(n, an)| kind.weight(n) * an)
            .collect::<KahanSum>()
            .value();
        let method_a = head + tail;
        let quad: f64 = vals
            .iter()
            .skip(1)
            .map(|&f| kind.integrand(f))
            .collect::<KahanSum>()
            .value()
            * vol;
        let cell_b = kind.cell(d, h, v, s, vol);
        let method_b = quad + cell_b;
        DiagramValue::Converged {
            method_a,
            method_b,
            discrepancy: (method_a - method_b).abs() / method_b.abs(),
            tolerance: cell_b.abs() + (crude.tail(kind, n_a) - tail).abs(),
            tail_a: tail,
            cell_b,
        }
    };
    Ok(DiagramReport {
        bubble: eval(Kind::Bubble),
        triangle: eval(Kind::Triangle),
        pc_correction: eval(Kind::Pc),
        grid,
        terms: n_a as u64,
        v,
        s,
        return_exponent: free_e,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcPrediction {
    /// `1 + ½ Σ_{n>=2} D^{*2n}(o)`.
    pub value: f64,
    pub correction: f64,
    /// Order of the omitted remainder, `correction²`, or the method gap if
    /// larger.
    pub uncertainty: f64,
    pub method_a: f64,
    pub method_b: f64,
    pub report: DiagramReport,
}

pub fn pc_prediction(kernel: &StepKernel, opts: &DiagramOptions) -> Result<PcPrediction> {
    let s = effective_index(kernel);
    let d = kernel.d() as f64;
    if d <= 2.0 * s {
        return Err(Error::Divergent(format!(
            "critical-point formula needs d > 2 min(alpha, 2) = {}",
            2.0 * s
        )));
    }
    let report = diagram_values(kernel, opts)?;
    match report.pc_correction.clone() {
        DiagramValue::Converged { method_a, method_b, .. } => Ok(PcPrediction {
            value: 1.0 + method_b,
            correction: method_b,
            uncertainty: (method_b * method_b).max((method_a - method_b).abs()),
            method_a,
            method_b,
            report,
        }),
        DiagramValue::Divergent { reason, .. } | DiagramValue::Degenerate { reason } => {
            Err(Error::Divergent(reason))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile};

    #[test]
    fn cell_constant_one_dimension() {
        assert!((cell_constant(1, 0.5) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn cell_constant_matches_polar_bound() {
        // β = 0 gives the cube volume 2^d
        for d in 1..=4 {
            assert!((cell_constant(d, 0.0) - 2f64.powi(d as i32)).abs() < 1e-10);
        }
    }

    #[test]
    fn nearest_neighbour_is_degenerate() {
        let k = StepKernel::build(KernelSpec {
            d: 1,
            alpha: 1.0,
            l: 1,
            profile: Profile::PuncturedBox,
            radius: 1,
            tail_tol: 0.5,
        })
        .unwrap();
        let r = diagram_values(&k, &DiagramOptions { m: Some(64), n_terms: 64, ..Default::default() }).unwrap();
        assert!(matches!(r.triangle, DiagramValue::Degenerate { .. }));
    }

    #[test]
    fn low_dimension_triangle_is_divergent() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.5, 2, 4000).with_tail_tol(0.05)).unwrap();
        let r = diagram_values(&k, &DiagramOptions { m: Some(4096), n_terms: 256, ..Default::default() }).unwrap();
        assert!(matches!(r.triangle, DiagramValue::Divergent { .. }));
        assert!(pc_prediction(&k, &DiagramOptions::default()).is_err());
    }
}

//! Small-`|k|` behaviour of `1 - D̂(k)` and the rescaled random-walk limit.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::kernel::StepKernel;
use crate::numeric::fit_line;

/// A range of `|k|` sampled log-uniformly along the first axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KWindow {
    pub k_lo: f64,
    pub k_hi: f64,
    pub points: usize,
}

impl KWindow {
    /// One decade of `|k|` below `1/(ℓL)`.
    ///
    /// For `α < 2` the decade is centred on `k* = R^{-α/2} L^{α/2-1}`, where
    /// the mass lost to truncation, relative size `(kR)^{-α}`, balances the
    /// next-order term `(Lk)^{2-α}`; it never extends past `0.1/(ℓL)`. For
    /// `α >= 2` it is `[10^{-3}, 10^{-2}] / (ℓL)`.
    pub fn default_for(kernel: &StepKernel) -> Self {
        let spec = kernel.spec();
        let l = spec.l as f64;
        let edge = 1.0 / (spec.profile.ell() * l);
        let hi = if spec.alpha < 2.0 {
            let a = spec.alpha;
            let kstar = (spec.radius as f64).powf(-a / 2.0) * l.powf(a / 2.0 - 1.0);
            (kstar * 10f64.sqrt()).min(0.1 * edge)
        } else {
            1e-2 * edge
        };
        Self {
            k_lo: hi / 10.0,
            k_hi: hi,
            points: 16,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.points;
        let (a, b) = (self.k_lo.ln(), self.k_hi.ln());
        (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// Slope of the model used for `v_α`: the pure power law for `α != 2`,
    /// the log-corrected one at `α = 2`.
    pub exponent: f64,
    pub exponent_se: f64,
    pub v: f64,
    /// Pure power law `log(1-D̂) = log v + s log|k|`.
    pub power_slope: f64,
    pub power_v: f64,
    pub power_residual: f64,
    /// `log(1-D̂) - log log(1/|k|) = log v + s log|k|`.
    pub log_slope: f64,
    pub log_v: f64,
    pub log_residual: f64,
    pub log_corrected: bool,
    pub window: KWindow,
    /// Sampled `(|k|, 1 - D̂)` pairs.
    pub samples: Vec<(f64, f64)>,
}

impl AsymptoticFit {
    /// `1 - D̂` predicted by the selected model.
    pub fn model(&self, k: f64) -> f64 {
        if self.log_corrected {
            self.v * k.powf(self.exponent) * (1.0 / k).ln()
        } else {
            self.v * k.powf(self.exponent)
        }
    }
}

fn is_two(alpha: f64) -> bool {
    (alpha - 2.0).abs() < 1e-12
}

/// Log-log regression of `1 - D̂(k)` against `|k|` over `window`.
pub fn spectral_asymptotics(kernel: &StepKernel, window: Option<KWindow>) -> Result<AsymptoticFit> {
    let w = window.unwrap_or_else(|| KWindow::default_for(kernel));
    let spec = kernel.spec();
    let edge = 1.0 / (spec.profile.ell() * spec.l as f64);
    if !(w.k_lo > 0.0 && w.k_lo < w.k_hi && w.k_hi <= edge && w.k_hi <= std::f64::consts::PI) {
        return Err(param(
            "k_window",
            format!("window [{}, {}] must lie inside (0, 1/(ell L)] = (0, {edge}]", w.k_lo, w.k_hi),
        ));
    }
    if w.points < 3 {
        return Err(param("k_window", "need at least 3 points"));
    }
    let marginal = kernel.axis_marginal();
    let samples: Vec<(f64, f64)> = w
        .nodes()
        .into_iter()
        .map(|k| (k, StepKernel::one_minus_fourier_axis(&marginal, k)))
        .collect();
    if samples.iter().any(|&(_, g)| !(g > 0.0)) {
        return Err(Error::Fit("1 - D^ not positive inside the window".into()));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let pure = fit_line(&x, &y, None).ok_or_else(|| Error::Fit("power-law fit".into()))?;
    let ylog: Vec<f64> = samples
        .iter()
        .zip(&y)
        .map(|(s, yi)| yi - (1.0 / s.0).ln().ln())
        .collect();
    let logfit = if samples.iter().all(|s| s.0 < 1.0) {
        fit_line(&x, &ylog, None)
    } else {
        None
    };
    let log_corrected = is_two(spec.alpha) && logfit.is_some();
    let (slope, se, v) = match (&logfit, log_corrected) {
        (Some(f), true) => (f.slope, f.slope_se, f.intercept.exp()),
        _ => (pure.slope, pure.slope_se, pure.intercept.exp()),
    };
    Ok(AsymptoticFit {
        exponent: slope,
        exponent_se: se,
        v,
        power_slope: pure.slope,
        power_v: pure.intercept.exp(),
        power_residual: pure.residual_rms,
        log_slope: logfit.as_ref().map_or(f64::NAN, |f| f.slope),
        log_v: logfit.as_ref().map_or(f64::NAN, |f| f.intercept.exp()),
        log_residual: logfit.as_ref().map_or(f64::NAN, |f| f.residual_rms),
        log_corrected,
        window: w,
        samples,
    })
}

/// The rescaled probe `k_n = k (v n)^{-1/(α∧2)}`, or
/// `k (v n log √n)^{-1/2}` at `α = 2`.
pub fn scaled_probe(alpha: f64, v: f64, k: &[f64], n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(param("n", "must be positive"));
    }
    let nf = n as f64;
    let scale = if is_two(alpha) {
        let lg = nf.sqrt().ln();
        if lg <= 0.0 {
            return Err(param("n", "alpha = 2 needs n >= 2 (log sqrt n = 0)"));
        }
        (v * nf * lg).powf(-0.5)
    } else {
        (v * nf).powf(-1.0 / alpha.min(2.0))
    };
    Ok(k.iter().map(|x| x * scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitShapeRow {
    pub n: u64,
    pub k_n: Vec<f64>,
    pub value: f64,
    pub target: f64,
    pub error: f64,
    /// `-log(value) / |k|^{α∧2}`: the shape constant this row implies.
    pub c_hat: f64,
}

/// `D̂(k_n)^n` for each `n`, against `exp(-|k|^{α∧2})`.
pub fn rw_limit_shape_oracle(
    kernel: &StepKernel,
    fit: &AsymptoticFit,
    k: &[f64],
    n_list: &[u64],
) -> Result<Vec<LimitShapeRow>> {
    let a = kernel.spec().stable_index();
    let kk = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = (-kk.powf(a)).exp();
    n_list
        .iter()
        .map(|&n| {
            let kn = scaled_probe(kernel.spec().alpha, fit.v, k, n)?;
            let (f, g) = kernel.fourier_pair(&kn);
            let value = if f > 0.5 {
                (n as f64 * (-g).ln_1p()).exp()
            } else {
                f.powi(n as i32)
            };
            let c_hat = if kk > 0.0 { -value.ln() / kk.powf(a) } else { f64::NAN };
            Ok(LimitShapeRow {
                n,
                k_n: kn,
                value,
                target,
                error: value - target,
                c_hat,
            })
        })
        .collect()
}

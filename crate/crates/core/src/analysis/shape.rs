//! Rescaled limit shape `Ẑ(k_n; n) / Ẑ(0; n) ≈ e^{-C|k|^{α∧2}}`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::kernel::StepKernel;
use crate::percolation::{estimate_two_point_transform, EstimatorTable, McOptions, ProbeSet};
use crate::spectral::{rw_limit_shape_oracle, scaled_probe, spectral_asymptotics, AsymptoticFit, KWindow};

/// `k_n` for the kernel's stable index and the fitted `v_α`.
pub fn compute_kn(kernel: &StepKernel, fit: &AsymptoticFit, k: &[f64], n: u64) -> Result<Vec<f64>> {
    scaled_probe(kernel.spec().alpha, fit.v, k, n)
}

fn norm(k: &[f64]) -> f64 {
    k.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub n: usize,
    pub k_index: usize,
    /// `|k|` before rescaling.
    pub absk: f64,
    pub ratio: f64,
    pub err: f64,
    /// Ratio consistent with zero: dropped from the fit.
    pub excluded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConstant {
    pub n: usize,
    pub c_hat: f64,
    pub c_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    /// `α ∧ 2`.
    pub index: f64,
    pub rows: Vec<ShapeRow>,
    /// Fit at each `n`.
    pub per_n: Vec<ShapeConstant>,
    /// Fit at the largest `n`.
    pub c_hat: f64,
    pub c_se: f64,
    /// Ratios non-increasing in `|k|` within three standard errors.
    pub monotone: bool,
    pub band: (f64, f64),
    pub in_band: bool,
}

impl ShapeFit {
    pub fn model_ratio(&self, absk: f64) -> f64 {
        (-self.c_hat * absk.powf(self.index)).exp()
    }
}

/// Weighted fit of `-log ratio = C |k|^a` through the origin.
fn fit_constant(rows: &[&ShapeRow], a: f64) -> (f64, f64) {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut exact = true;
    for r in rows.iter().filter(|r| !r.excluded) {
        let x = r.absk.powf(a);
        let w = if r.err > 0.0 {
            exact = false;
            (r.ratio / r.err).powi(2)
        } else {
            1.0
        };
        sxy += w * x * (-r.ratio.ln());
        sxx += w * x * x;
    }
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    (sxy / sxx, if exact { 0.0 } else { sxx.powf(-0.5) })
}

fn assemble(index: f64, rows: Vec<ShapeRow>, band: (f64, f64)) -> ShapeFit {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut per_n = Vec::new();
    let mut monotone = true;
    for &n in &ns {
        let mut at: Vec<&ShapeRow> = rows.iter().filter(|r| r.n == n).collect();
        let (c_hat, c_se) = fit_constant(&at, index);
        per_n.push(ShapeConstant { n, c_hat, c_se });
        at.sort_by(|a, b| a.absk.total_cmp(&b.absk));
        let mut prev = (1.0, 0.0);
        for r in at {
            if r.ratio > prev.0 + 3.0 * (r.err * r.err + prev.1 * prev.1).sqrt() {
                monotone = false;
            }
            prev = (r.ratio, r.err);
        }
    }
    let last = per_n.last().copied().unwrap_or(ShapeConstant {
        n: 0,
        c_hat: f64::NAN,
        c_se: f64::NAN,
    });
    ShapeFit {
        index,
        rows,
        per_n,
        c_hat: last.c_hat,
        c_se: last.c_se,
        monotone,
        band,
        in_band: last.c_hat >= band.0 && last.c_hat <= band.1,
    }
}

/// Ratios and fits from a table simulated with rescaled probes.
pub fn limit_shape_from_table(table: &EstimatorTable, index: f64, n_list: &[usize], band: (f64, f64)) -> Result<ShapeFit> {
    let zero = table.zero_probe();
    let mut rows = Vec::new();
    for &n in n_list {
        if n > table.n_max {
            return Err(param("n_list", format!("n = {n} exceeds n_max = {}", table.n_max)));
        }
        let z0 = table.cell(zero, n);
        for (i, k) in table.probes.base().iter().enumerate() {
            if i == zero {
                continue;
            }
            let zk = table.cell(i, n);
            let ratio = zk.mean_re / z0.mean_re;
            let err = ratio.abs() * ((zk.stderr / zk.mean_re).powi(2) + (z0.stderr / z0.mean_re).powi(2)).sqrt();
            let err = if err.is_finite() { err } else { f64::INFINITY };
            rows.push(ShapeRow {
                n,
                k_index: i,
                absk: norm(k),
                ratio,
                err,
                excluded: !(ratio - 2.0 * err > 0.0),
            });
        }
    }
    Ok(assemble(index, rows, band))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeRun {
    pub p: f64,
    pub replicas: u64,
    pub seed: u64,
    pub band: (f64, f64),
    /// Window for `v_α`; `None` uses the default.
    #[serde(default)]
    pub k_window: Option<KWindow>,
    pub mc: McOptions,
}

/// Simulates `Ẑ(k_n; n)` at `p` along the first axis for each `|k|` in
/// `k_list` and fits the shape constant.
pub fn fit_limit_shape(
    kernel: &StepKernel,
    k_list: &[f64],
    n_list: &[usize],
    run: &ShapeRun,
) -> Result<(ShapeFit, EstimatorTable)> {
    let fit = spectral_asymptotics(kernel, run.k_window)?;
    let d = kernel.d();
    let axis = |x: f64| {
        let mut v = vec![0.0; d];
        v[0] = x;
        v
    };
    let mut k: Vec<Vec<f64>> = vec![axis(0.0)];
    k.extend(k_list.iter().map(|&x| axis(x)));
    let probes = ProbeSet::Scaled {
        k,
        alpha: kernel.spec().alpha,
        v: fit.v,
    };
    let n_max = n_list.iter().copied().max().ok_or_else(|| param("n_list", "empty"))?;
    let table = estimate_two_point_transform(kernel, run.p, n_max, &probes, run.replicas, run.seed, &run.mc)?;
    let shape = limit_shape_from_table(&table, kernel.spec().stable_index(), n_list, run.band)?;
    Ok((shape, table))
}

/// The exact random-walk surrogate: ratios `D̂(k_n)^n`.
pub fn rw_shape_fit(kernel: &StepKernel, fit: &AsymptoticFit, k_list: &[f64], n_list: &[u64], band: (f64, f64)) -> Result<ShapeFit> {
    let d = kernel.d();
    let mut rows = Vec::new();
    for (i, &x) in k_list.iter().enumerate() {
        let mut k = vec![0.0; d];
        k[0] = x;
        for row in rw_limit_shape_oracle(kernel, fit, &k, n_list)? {
            rows.push(ShapeRow {
                n: row.n as usize,
                k_index: i + 1,
                absk: x.abs(),
                ratio: row.value,
                err: 0.0,
                excluded: !(row.value > 0.0),
            });
        }
    }
    Ok(assemble(kernel.spec().stable_index(), rows, band))
}

/// First `n` after which `|Ĉ_n - 1|` never increases.
pub fn convergence_onset(per_n: &[ShapeConstant]) -> Option<usize> {
    let dev: Vec<f64> = per_n.iter().map(|c| (c.c_hat - 1.0).abs()).collect();
    let mut start = dev.len().checked_sub(1)?;
    while start > 0 && dev[start - 1] >= dev[start] {
        start -= 1;
    }
    Some(per_n[start].n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;

    #[test]
    fn rw_surrogate_recovers_unit_constant() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.2, 4, 1 << 20).with_tail_tol(0.05)).unwrap();
        let fit = spectral_asymptotics(&k, None).unwrap();
        let s = rw_shape_fit(&k, &fit, &[0.5, 1.0, 1.5], &[64, 512, 4096], (0.98, 1.02)).unwrap();
        assert!(s.monotone);
        assert!((s.c_hat - 1.0).abs() < 0.05, "{}", s.c_hat);
    }

    #[test]
    fn kn_scaling() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.0, 2, 1000).with_tail_tol(0.5)).unwrap();
        let fit = spectral_asymptotics(&k, None).unwrap();
        let a = compute_kn(&k, &fit, &[0.8], 10).unwrap();
        let b = compute_kn(&k, &fit, &[0.8], 40).unwrap();
        assert!((a[0] / b[0] - 4.0).abs() < 1e-12);
        assert_eq!(compute_kn(&k, &fit, &[0.0], 10).unwrap(), vec![0.0]);
    }

    #[test]
    fn onset() {
        let c = |n, c_hat| ShapeConstant { n, c_hat, c_se: 0.0 };
        let v = [c(1, 0.95), c(2, 0.8), c(4, 0.9), c(8, 0.95), c(16, 0.99)];
        assert_eq!(convergence_onset(&v), Some(2));
    }
}

//! `D^{*n}` on a torus and the heat-kernel table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::kernel::StepKernel;
use crate::numeric::kahan_sum;

use super::grid::{dual_values, fft_nd, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldRole {
    Transform,
    Convolution { n: u64 },
    Green,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub grid: TorusGrid,
    pub role: FieldRole,
    pub values: Vec<f64>,
    /// Largest imaginary part discarded when the field was made real.
    pub max_imag: f64,
    /// Upper bound on the mass folded back by periodization.
    pub wrap_mass: f64,
    pub warning: Option<String>,
}

impl SpectralField {
    pub fn at(&self, site: &[i64]) -> f64 {
        self.values[self.grid.index_of(site)]
    }

    pub fn sum(&self) -> f64 {
        kahan_sum(self.values.iter().copied())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `D̂` sampled on the dual nodes.
pub fn transform_field(kernel: &StepKernel, grid: &TorusGrid) -> SpectralField {
    let (values, max_imag) = dual_values(kernel, grid);
    SpectralField {
        grid: *grid,
        role: FieldRole::Transform,
        values,
        max_imag,
        wrap_mass: 0.0,
        warning: None,
    }
}

/// Bound on the mass `D^{*n}` places outside `{|x|_inf < M/2}`: some step
/// must exceed `(M/2 - 1)/n` in sup norm.
pub fn wrap_mass_bound(kernel: &StepKernel, n: u64, grid: &TorusGrid) -> f64 {
    let half = (grid.m / 2) as u64;
    if n * kernel.radius() < half {
        return 0.0;
    }
    let r = (half - 1) / n;
    (n as f64 * kernel.sup_norm_tail(r)).min(1.0)
}

/// Default wrap mass above which a convolution field carries a warning.
pub const DEFAULT_WRAP_THRESHOLD: f64 = 1e-6;

/// `D^{*n}` by pointwise powers of `D̂` and one inverse transform.
pub fn convolution_power(
    kernel: &StepKernel,
    n: u64,
    grid: &TorusGrid,
    wrap_threshold: f64,
) -> Result<SpectralField> {
    let dhat = transform_field(kernel, grid);
    convolution_from_transform(kernel, &dhat, n, wrap_threshold)
}

/// As [`convolution_power`], reusing a transform field.
pub fn convolution_from_transform(
    kernel: &StepKernel,
    dhat: &SpectralField,
    n: u64,
    wrap_threshold: f64,
) -> Result<SpectralField> {
    let grid = dhat.grid;
    if n == 0 {
        return Err(param("n", "must be positive"));
    }
    if !grid.holds_kernel(kernel.radius()) {
        return Err(param(
            "M",
            format!("grid M={} must be >= 2R+2 = {}", grid.m, 2 * kernel.radius() + 2),
        ));
    }
    let mut data: Vec<Complex64> = dhat
        .values
        .iter()
        .map(|&v| Complex64::new(v.powi(n.min(i32::MAX as u64) as i32), 0.0))
        .collect();
    fft_nd(&mut data, &grid, true);
    let scale = 1.0 / grid.len() as f64;
    let max_imag = data.iter().fold(0.0f64, |a, z| a.max((z.im * scale).abs()));
    let values: Vec<f64> = data.into_iter().map(|z| z.re * scale).collect();
    let wrap_mass = wrap_mass_bound(kernel, n, &grid);
    let warning = (wrap_mass > wrap_threshold)
        .then(|| format!("wrap-around mass up to {wrap_mass:.3e} exceeds {wrap_threshold:.1e}"));
    Ok(SpectralField {
        grid,
        role: FieldRole::Convolution { n },
        values,
        max_imag,
        wrap_mass,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelRow {
    pub n: u64,
    pub sup: f64,
    /// `‖D^{*n}‖_∞ n^{d/(α∧2)} / λ`.
    pub scaled: f64,
    pub wrap_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelReport {
    pub rows: Vec<HeatKernelRow>,
    /// Largest scaled value.
    pub c_hat: f64,
    /// Max over min of the scaled column for `n >= 4`.
    pub spread: f64,
    pub grid: TorusGrid,
}

/// Powers of two up to `n_max` (and `n_max` itself).
pub fn doubling_list(n_max: u64) -> Vec<u64> {
    let mut v: Vec<u64> = std::iter::successors(Some(1u64), |&n| Some(n * 2))
        .take_while(|&n| n <= n_max)
        .collect();
    if v.last() != Some(&n_max) && n_max > 0 {
        v.push(n_max);
    }
    v
}

pub fn heat_kernel_bound_report(
    kernel: &StepKernel,
    n_list: &[u64],
    grid: &TorusGrid,
) -> Result<HeatKernelReport> {
    let dhat = transform_field(kernel, grid);
    let spec = kernel.spec();
    let expo = spec.d as f64 / spec.stable_index();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let f = convolution_from_transform(kernel, &dhat, n, f64::INFINITY)?;
        let sup = f.sup();
        rows.push(HeatKernelRow {
            n,
            sup,
            scaled: sup * (n as f64).powf(expo) / kernel.lambda(),
            wrap_mass: f.wrap_mass,
        });
    }
    let c_hat = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let tail: Vec<f64> = rows.iter().filter(|r| r.n >= 4).map(|r| r.scaled).collect();
    let spread = if tail.is_empty() {
        f64::NAN
    } else {
        tail.iter().copied().fold(0.0, f64::max) / tail.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(HeatKernelReport {
        rows,
        c_hat,
        spread,
        grid: *grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{self_overlap, KernelSpec};

    #[test]
    fn first_power_is_kernel() {
        let k = StepKernel::build(KernelSpec::power_law(2, 1.0, 2, 12).with_tail_tol(0.9)).unwrap();
        let g = TorusGrid::new(2, 64).unwrap();
        let f = convolution_power(&k, 1, &g, DEFAULT_WRAP_THRESHOLD).unwrap();
        assert!(f.max_imag < 1e-10);
        let mut c = vec![0i64; 2];
        for idx in 0..g.len() {
            g.coords(idx, &mut c);
            assert!((f.values[idx] - k.mass(&c)).abs() < 1e-12);
        }
        assert_eq!(f.wrap_mass, 0.0);
    }

    #[test]
    fn second_power_origin_is_overlap() {
        let k = StepKernel::build(KernelSpec::power_law(1, 0.7, 3, 300).with_tail_tol(0.9)).unwrap();
        let g = TorusGrid::new(1, 1024).unwrap();
        let f = convolution_power(&k, 2, &g, DEFAULT_WRAP_THRESHOLD).unwrap();
        assert!((f.at(&[0]) - self_overlap(&k)).abs() < 1e-12);
        assert!((f.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn small_grid_rejected_and_wrap_flagged() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.0, 2, 50).with_tail_tol(0.9)).unwrap();
        assert!(convolution_power(&k, 1, &TorusGrid::new(1, 100).unwrap(), 1e-6).is_err());
        let f = convolution_power(&k, 8, &TorusGrid::new(1, 102).unwrap(), 1e-6).unwrap();
        assert!(f.wrap_mass > 0.0 && f.warning.is_some());
    }

    #[test]
    fn doubling() {
        assert_eq!(doubling_list(8), vec![1, 2, 4, 8]);
        assert_eq!(doubling_list(10), vec![1, 2, 4, 8, 10]);
    }
}

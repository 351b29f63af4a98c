//! Periodized boxes `{-M/2, ..., M/2-1}^d` and their dual wavevector grids.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::kernel::orbit::{for_each_image, permutations, OrbitIter};
use crate::kernel::StepKernel;

/// Largest number of grid nodes we are willing to allocate (complex f64).
pub const MAX_NODES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub d: usize,
    /// Sites per axis (even).
    pub m: usize,
}

impl TorusGrid {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d == 0 {
            return Err(param("d", "must be positive"));
        }
        if m < 2 || !m.is_multiple_of(2) {
            return Err(param("M", "must be an even integer >= 2"));
        }
        let g = Self { d, m };
        if (m as f64).powi(d as i32) > MAX_NODES as f64 {
            return Err(Error::Resource(format!(
                "torus {m}^{d} exceeds the node budget {MAX_NODES}"
            )));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when a kernel of sup-radius `r` does not wrap onto itself.
    pub fn holds_kernel(&self, r: u64) -> bool {
        self.m as u64 >= 2 * r + 2
    }

    /// Flat index of a lattice site reduced modulo `M`.
    #[inline]
    pub fn index_of(&self, site: &[i64]) -> usize {
        let m = self.m as i64;
        site.iter().fold(0usize, |acc, &x| acc * self.m + x.rem_euclid(m) as usize)
    }

    /// Signed coordinate along one axis for a grid index in `0..M`.
    #[inline]
    pub fn signed(&self, j: usize) -> i64 {
        let j = j as i64;
        let m = self.m as i64;
        if j >= m / 2 {
            j - m
        } else {
            j
        }
    }

    /// Decodes a flat index into signed per-axis coordinates.
    pub fn coords(&self, mut idx: usize, out: &mut [i64]) {
        for o in out.iter_mut().rev() {
            *o = self.signed(idx % self.m);
            idx /= self.m;
        }
    }

    /// Wavevector of the dual node with the given flat index.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0i64; self.d];
        self.coords(idx, &mut c);
        let h = 2.0 * std::f64::consts::PI / self.m as f64;
        c.iter().map(|&j| j as f64 * h).collect()
    }
}

/// Kernel masses summed onto the torus (`D_per(x) = Σ_m D(x + mM)`).
///
/// Orbits are first pooled by their residue class `min(|x_i| mod M, M - ...)`;
/// the symmetry group acts equivariantly on residues, so each pooled weight
/// spreads uniformly over the distinct residue images.
pub fn fold_kernel(kernel: &StepKernel, grid: &TorusGrid) -> Vec<f64> {
    assert_eq!(kernel.d(), grid.d);
    let d = grid.d;
    let m = grid.m as u64;
    let half = grid.m / 2;
    let side = half + 1;
    let mut pooled = vec![0.0; side.pow(d as u32)];
    let mut u = vec![0u32; d];
    kernel.for_each_orbit(|t, mult, p| {
        for (ui, &ti) in u.iter_mut().zip(t) {
            let r = ti as u64 % m;
            *ui = r.min(m - r) as u32;
        }
        u.sort_unstable();
        let idx = u.iter().fold(0usize, |a, &x| a * side + x as usize);
        pooled[idx] += mult as f64 * p;
    });
    let perms = permutations(d);
    let mut out = vec![0.0; grid.len()];
    let mut images: Vec<usize> = Vec::new();
    OrbitIter::new(d, half as u32).for_each(|u| {
        let idx = u.iter().fold(0usize, |a, &x| a * side + x as usize);
        let w = pooled[idx];
        if w == 0.0 {
            return;
        }
        images.clear();
        for_each_image(u, &perms, |img| images.push(grid.index_of(img)));
        // +M/2 and -M/2 coincide on the torus
        images.sort_unstable();
        images.dedup();
        let share = w / images.len() as f64;
        for &i in &images {
            out[i] += share;
        }
    });
    out
}

/// In-place multidimensional FFT (unnormalized in both directions).
pub fn fft_nd(data: &mut [Complex64], grid: &TorusGrid, inverse: bool) {
    let m = grid.m;
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.d {
        let stride = m.pow((grid.d - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(m) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * m;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[base + j * stride] = *l;
                }
            }
        }
    }
}

/// `D̂` on all dual nodes, with the largest imaginary part observed.
///
/// The values are exact transforms of the lattice kernel at the nodes even
/// when the kernel is wider than the torus, since folding commutes with
/// sampling the transform on the dual grid.
pub fn dual_values(kernel: &StepKernel, grid: &TorusGrid) -> (Vec<f64>, f64) {
    let folded = fold_kernel(kernel, grid);
    let mut data: Vec<Complex64> = folded.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    fft_nd(&mut data, grid, false);
    let max_imag = data.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    (data.into_iter().map(|z| z.re).collect(), max_imag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;

    #[test]
    fn index_roundtrip() {
        let g = TorusGrid::new(3, 6).unwrap();
        let mut c = vec![0; 3];
        for idx in 0..g.len() {
            g.coords(idx, &mut c);
            assert!(c.iter().all(|&x| (-3..3).contains(&x)));
            assert_eq!(g.index_of(&c), idx);
        }
    }

    #[test]
    fn rejects_odd_and_huge() {
        assert!(TorusGrid::new(1, 7).is_err());
        assert!(matches!(TorusGrid::new(4, 1024), Err(Error::Resource(_))));
    }

    #[test]
    fn dual_values_match_direct_transform() {
        let k = StepKernel::build(KernelSpec::power_law(2, 0.8, 2, 9).with_tail_tol(0.9)).unwrap();
        for m in [8, 20, 32] {
            // m = 8 folds the kernel onto itself; node values stay exact
            let g = TorusGrid::new(2, m).unwrap();
            let (vals, imag) = dual_values(&k, &g);
            assert!(imag < 1e-12);
            for idx in [0, 1, 3, g.len() / 2 + 1, g.len() - 1] {
                let direct = k.fourier(&g.wavevector(idx));
                assert!((vals[idx] - direct).abs() < 1e-12, "{m} {idx}");
            }
        }
    }
}

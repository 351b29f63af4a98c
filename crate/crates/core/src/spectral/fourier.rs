//! Pointwise transforms: `D̂`, the three-shell split of `1 - D̂`, the
//! random-walk Green's function and the infrared scan.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::StepKernel;
use crate::numeric::KahanSum;

use super::grid::{dual_values, TorusGrid};

/// `D̂(k)`.
pub fn fourier_transform(kernel: &StepKernel, k: &[f64]) -> f64 {
    kernel.fourier(k)
}

fn norm(k: &[f64]) -> f64 {
    k.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shells {
    /// `|x| < ℓL`.
    pub s1: f64,
    /// `ℓL <= |x| < π/(2|k|)`.
    pub s2: f64,
    /// `|x| >= π/(2|k|)`.
    pub s3: f64,
    pub one_minus_dhat: f64,
    /// `S1 / (L|k|)^2`.
    pub ratio1: f64,
    /// `S2` over its order: `(L|k|)^{α∧2}`, with the factor
    /// `log(π/(2ℓL|k|))` at `α = 2`.
    pub ratio2: f64,
    /// `S3 / (L|k|)^α`.
    pub ratio3: f64,
}

impl Shells {
    pub fn partition_error(&self) -> f64 {
        (self.s1 + self.s2 + self.s3 - self.one_minus_dhat).abs()
    }
}

/// Splits `1 - D̂(k) = Σ_x D(x)(1 - cos k·x)` over three Euclidean shells.
pub fn shell_decomposition(kernel: &StepKernel, k: &[f64]) -> Shells {
    let spec = kernel.spec();
    let lk = spec.l as f64 * norm(k);
    let inner = spec.profile.ell() * spec.l as f64;
    let outer = if lk == 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::FRAC_PI_2 * spec.l as f64 / lk
    };
    let mut s = [KahanSum::new(), KahanSum::new(), KahanSum::new()];
    let mut total = KahanSum::new();
    kernel.orbit_cosines(k, |t, w, _, g| {
        let r = t.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let term = w * g;
        let shell = if r < inner {
            0
        } else if r < outer {
            1
        } else {
            2
        };
        s[shell].add(term);
        total.add(term);
    });
    let [s1, s2, s3] = s.map(|x| x.value());
    let alpha = spec.alpha;
    let a = spec.stable_index();
    let order2 = if (alpha - 2.0).abs() < 1e-12 {
        lk * lk * (std::f64::consts::FRAC_PI_2 / (spec.profile.ell() * lk)).ln()
    } else {
        lk.powf(a)
    };
    let div = |x: f64, y: f64| if y > 0.0 { x / y } else { 0.0 };
    Shells {
        s1,
        s2,
        s3,
        one_minus_dhat: total.value(),
        ratio1: div(s1, lk * lk),
        ratio2: div(s2, order2),
        ratio3: div(s3, lk.powf(alpha)),
    }
}

/// `1 / (1 - μ D̂(k))`.
pub fn greens_function(kernel: &StepKernel, mu: Complex64, k: &[f64]) -> Result<Complex64> {
    greens_from_value(mu, kernel.fourier(k), k)
}

fn greens_from_value(mu: Complex64, dhat: f64, k: &[f64]) -> Result<Complex64> {
    let z = mu * dhat;
    if z.norm() >= 1.0 {
        return Err(Error::Pole {
            k: k.to_vec(),
            modulus: z.norm(),
        });
    }
    Ok(1.0 / (1.0 - z))
}

/// Partial sum `Σ_{n<=N} (μ D̂)^n` and the bound `|z|^{N+1}/(1-|z|)` on
/// the remainder.
pub fn greens_series(kernel: &StepKernel, mu: Complex64, k: &[f64], n: usize) -> (Complex64, f64) {
    let z = mu * kernel.fourier(k);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for _ in 0..n {
        term *= z;
        sum += term;
    }
    let r = z.norm();
    let bound = if r < 1.0 {
        r.powi(n as i32 + 1) / (1.0 - r)
    } else {
        f64::INFINITY
    };
    (sum, bound)
}

/// The fixed scan set: `0` and `{0.5, 0.9, 0.99} × e^{iθ}`, `θ ∈ {0, ±0.1, ±1}`.
pub fn default_mu_set() -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    for r in [0.5, 0.9, 0.99] {
        for theta in [0.0, 0.1, -0.1, 1.0, -1.0] {
            out.push(Complex64::from_polar(r, theta));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraredReport {
    pub c_hat: f64,
    pub argmax_mu: (f64, f64),
    pub argmax_k: Vec<f64>,
    pub grid_m: usize,
    pub points: usize,
}

/// `max |Ĝ_μ(k)| ((1-|μ|) + |arg μ| + 1 - D̂(k))` over `mu_set` × the dual
/// nodes of `grid`.
pub fn infrared_scan(
    kernel: &StepKernel,
    mu_set: &[Complex64],
    grid: &TorusGrid,
) -> Result<InfraredReport> {
    let (vals, _) = dual_values(kernel, grid);
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for (j, &mu) in mu_set.iter().enumerate() {
        for (i, &dh) in vals.iter().enumerate() {
            let g = match greens_from_value(mu, dh, &[]) {
                Ok(g) => g,
                Err(_) => {
                    return Err(Error::Pole {
                        k: grid.wavevector(i),
                        modulus: (mu * dh).norm(),
                    })
                }
            };
            let weight = (1.0 - mu.norm()) + mu.arg().abs() + (1.0 - dh);
            let c = g.norm() * weight;
            if c > best.0 {
                best = (c, j, i);
            }
        }
    }
    let mu = mu_set[best.1];
    Ok(InfraredReport {
        c_hat: best.0,
        argmax_mu: (mu.re, mu.im),
        argmax_k: grid.wavevector(best.2),
        grid_m: grid.m,
        points: mu_set.len() * vals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile};

    fn nn() -> StepKernel {
        StepKernel::build(KernelSpec {
            d: 1,
            alpha: 1.0,
            l: 1,
            profile: Profile::PuncturedBox,
            radius: 1,
            tail_tol: 0.5,
        })
        .unwrap()
    }

    #[test]
    fn nearest_neighbour_transform_is_cosine() {
        let k = nn();
        for x in [0.0, 0.3, 1.0, std::f64::consts::PI] {
            assert!((fourier_transform(&k, &[x]) - x.cos()).abs() < 1e-15);
        }
        assert_eq!(fourier_transform(&k, &[std::f64::consts::PI]), -1.0);
    }

    #[test]
    fn shells_partition() {
        let k = StepKernel::build(KernelSpec::power_law(2, 1.0, 4, 200).with_tail_tol(0.1)).unwrap();
        let zero = shell_decomposition(&k, &[0.0, 0.0]);
        assert_eq!((zero.s1, zero.s2, zero.s3), (0.0, 0.0, 0.0));
        for kv in [[0.01, 0.02], [0.2, -0.05], [0.001, 0.0]] {
            let s = shell_decomposition(&k, &kv);
            assert!(s.partition_error() < 1e-12);
            assert!((s.one_minus_dhat - k.one_minus_fourier(&kv)).abs() < 1e-14);
        }
    }

    #[test]
    fn green_basics() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.0, 2, 400).with_tail_tol(0.1)).unwrap();
        let g = greens_function(&k, Complex64::new(0.0, 0.0), &[0.7]).unwrap();
        assert_eq!(g, Complex64::new(1.0, 0.0));
        let g = greens_function(&k, Complex64::new(0.5, 0.0), &[0.0]).unwrap();
        assert!((g - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!(matches!(
            greens_function(&k, Complex64::new(1.0, 0.0), &[0.0]),
            Err(Error::Pole { .. })
        ));
        let mu = Complex64::from_polar(0.9, 0.3);
        for kv in [0.1, 1.3, 2.9] {
            let exact = greens_function(&k, mu, &[kv]).unwrap();
            let (series, bound) = greens_series(&k, mu, &[kv], 200);
            assert!((exact - series).norm() <= bound + 1e-13);
        }
    }

    #[test]
    fn infrared_at_least_one() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.0, 2, 400).with_tail_tol(0.1)).unwrap();
        let g = TorusGrid::new(1, 256).unwrap();
        let r = infrared_scan(&k, &default_mu_set(), &g).unwrap();
        assert!(r.c_hat >= 1.0 && r.c_hat.is_finite());
        let only_zero = infrared_scan(&k, &[Complex64::new(0.0, 0.0)], &g).unwrap();
        assert!(only_zero.c_hat <= 3.0);
    }
}

//! Exact Poissonized sampling of the occupied bonds out of one site.
//!
//! The bond to `x + y` is occupied with probability `pD(y)`. With intensity
//! `μ_y = -ln(1 - pD(y))` the event "at least one Poisson point lands on y"
//! has exactly that probability, and distinct `y` are independent. So a
//! parent draws `N ~ Poisson(Λ)`, `Λ = Σ μ_y`, then `N` sites from `μ / Λ`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rustc_hash::FxHashSet;

use crate::alias::AliasTable;
use crate::error::{param, Result};
use crate::kernel::orbit::random_image;
use crate::kernel::StepKernel;
use crate::numeric::KahanSum;

#[derive(Debug)]
pub struct BondFieldSampler {
    d: usize,
    p: f64,
    /// `Λ = Σ_y μ_y`.
    lambda: f64,
    poisson: Option<Poisson<f64>>,
    table: Option<AliasTable>,
    /// Canonical tuples, `d` entries per orbit.
    tuples: Vec<u32>,
    /// `pD(y)` per orbit.
    bond_prob: Vec<f64>,
}

impl BondFieldSampler {
    pub fn new(kernel: &StepKernel, p: f64) -> Result<Self> {
        let sup = kernel.sup_mass();
        if !(p >= 0.0 && p * sup < 1.0) || !p.is_finite() {
            return Err(param(
                "p",
                format!("must lie in [0, 1/‖D‖_∞) = [0, {})", 1.0 / sup),
            ));
        }
        let d = kernel.d();
        let mut weights = Vec::with_capacity(kernel.orbit_count());
        let mut tuples = Vec::with_capacity(kernel.orbit_count() * d);
        let mut bond_prob = Vec::with_capacity(kernel.orbit_count());
        let mut total = KahanSum::new();
        kernel.for_each_orbit(|t, m, mass| {
            let q = p * mass;
            let mu = -(-q).ln_1p();
            weights.push(m as f64 * mu);
            total.add(m as f64 * mu);
            tuples.extend_from_slice(t);
            bond_prob.push(q);
        });
        let lambda = total.value();
        let (poisson, table) = if lambda > 0.0 {
            (
                Some(Poisson::new(lambda).map_err(|e| param("p", e.to_string()))?),
                AliasTable::new(&weights),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            d,
            p,
            lambda,
            poisson,
            table,
            tuples,
            bond_prob,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Mean number of Poisson points per parent.
    pub fn intensity(&self) -> f64 {
        self.lambda
    }

    /// Largest single-bond occupation probability `p ‖D‖_∞`.
    pub fn max_bond_probability(&self) -> f64 {
        self.bond_prob.iter().copied().fold(0.0, f64::max)
    }

    /// Calls `f` with the displacement of every Poisson point drawn for one
    /// parent. Repeats are possible; the occupied set is their union.
    #[inline]
    pub fn for_each_point<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut [i64], mut f: impl FnMut(&[i64])) {
        let (Some(poisson), Some(table)) = (&self.poisson, &self.table) else {
            return;
        };
        let n = poisson.sample(rng) as u64;
        let d = self.d;
        for _ in 0..n {
            let i = table.sample(rng);
            random_image(&self.tuples[i * d..(i + 1) * d], buf, rng);
            f(buf);
        }
    }

    /// The occupied children of one parent at the origin, as a sorted list
    /// of distinct displacements.
    pub fn sample_children<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<i64>> {
        let mut buf = vec![0i64; self.d];
        let mut set = FxHashSet::default();
        self.for_each_point(rng, &mut buf, |y| {
            set.insert(y.to_vec());
        });
        let mut out: Vec<Vec<i64>> = set.into_iter().collect();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile};
    use crate::rng::stream_rng;

    fn kernel() -> StepKernel {
        StepKernel::build(KernelSpec::power_law(1, 1.0, 2, 40).with_tail_tol(0.9)).unwrap()
    }

    #[test]
    fn zero_p_has_no_children() {
        let s = BondFieldSampler::new(&kernel(), 0.0).unwrap();
        assert_eq!(s.intensity(), 0.0);
        let mut rng = stream_rng(1, 0);
        assert!(s.sample_children(&mut rng).is_empty());
    }

    #[test]
    fn range_checked() {
        let k = kernel();
        let max = 1.0 / k.sup_mass();
        assert!(BondFieldSampler::new(&k, max).is_err());
        assert!(BondFieldSampler::new(&k, -0.1).is_err());
        assert!(BondFieldSampler::new(&k, 0.99 * max).is_ok());
    }

    #[test]
    fn intensity_dominates_p() {
        let k = kernel();
        for p in [0.1, 0.5, 1.0, 2.0] {
            let s = BondFieldSampler::new(&k, p).unwrap();
            assert!(s.intensity() >= p);
        }
    }

    #[test]
    fn nearest_neighbour_occupancy() {
        let k = StepKernel::build(KernelSpec {
            d: 1,
            alpha: 1.0,
            l: 1,
            profile: Profile::PuncturedBox,
            radius: 1,
            tail_tol: 0.5,
        })
        .unwrap();
        let s = BondFieldSampler::new(&k, 1.2).unwrap();
        let mut rng = stream_rng(3, 0);
        let trials = 200_000;
        let mut hits = [0u32; 2];
        for _ in 0..trials {
            for c in s.sample_children(&mut rng) {
                hits[(c[0] > 0) as usize] += 1;
            }
        }
        let q = 0.6;
        let sigma = (q * (1.0 - q) / trials as f64).sqrt();
        for h in hits {
            assert!((h as f64 / trials as f64 - q).abs() < 4.0 * sigma);
        }
    }
}

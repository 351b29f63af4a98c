//! Generation-by-generation growth of the cluster of `(o, 0)`.

use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::kernel::MAX_DIM;

use super::sampler::BondFieldSampler;

/// Default cap on the size of one generation.
pub const DEFAULT_SITE_CAP: usize = 1_000_000;

pub(crate) type Site = [i32; MAX_DIM];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTrace {
    pub d: usize,
    /// `fronts[t]` lists `C_t`, sorted, as rows of `d` coordinates.
    pub fronts: Vec<Vec<Vec<i64>>>,
    /// First `t` with `C_t` empty.
    pub died_at: Option<usize>,
    /// Generation whose size exceeded the cap; it is not stored.
    pub truncated_at: Option<usize>,
}

impl ClusterTrace {
    pub fn truncated(&self) -> bool {
        self.truncated_at.is_some()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.fronts.iter().map(Vec::len).collect()
    }
}

/// How a growth run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GrowthEnd {
    Survived,
    Died(usize),
    Truncated(usize),
}

/// Checks that coordinates after `n_max` steps fit the site encoding.
pub(crate) fn check_range(sampler_radius: u64, n_max: usize) -> Result<()> {
    if (n_max as u128) * (sampler_radius as u128) >= i32::MAX as u128 {
        return Err(param("n_max", "n_max * R overflows the site encoding"));
    }
    Ok(())
}

/// Reusable buffers for [`grow_with`].
#[derive(Default)]
pub(crate) struct GrowthScratch {
    front: Vec<Site>,
    next: FxHashSet<Site>,
    buf: Vec<i64>,
}

/// Grows one cluster, handing each complete generation `(t, C_t)` to
/// `visit`, `t = 0..`. Stops at extinction, at `n_max`, or when a
/// generation exceeds `site_cap` (that generation is not visited).
pub(crate) fn grow_with<R: Rng + ?Sized>(
    sampler: &BondFieldSampler,
    n_max: usize,
    site_cap: usize,
    rng: &mut R,
    scratch: &mut GrowthScratch,
    mut visit: impl FnMut(usize, &[Site]),
) -> GrowthEnd {
    let d = sampler.d();
    scratch.buf.resize(d, 0);
    scratch.front.clear();
    scratch.front.push([0; MAX_DIM]);
    visit(0, &scratch.front);
    for t in 1..=n_max {
        scratch.next.clear();
        let GrowthScratch { front, next, buf } = scratch;
        for x in front.iter() {
            sampler.for_each_point(rng, buf, |y| {
                let mut s = *x;
                for (si, yi) in s.iter_mut().zip(y) {
                    *si += *yi as i32;
                }
                next.insert(s);
            });
            if next.len() > site_cap {
                return GrowthEnd::Truncated(t);
            }
        }
        front.clear();
        front.extend(next.drain());
        if front.is_empty() {
            return GrowthEnd::Died(t);
        }
        visit(t, front);
    }
    GrowthEnd::Survived
}

/// Grows and records one cluster up to time `n_max`.
pub fn grow_cluster<R: Rng + ?Sized>(
    sampler: &BondFieldSampler,
    n_max: usize,
    rng: &mut R,
    site_cap: usize,
) -> Result<ClusterTrace> {
    if site_cap == 0 {
        return Err(param("site_cap", "must be positive"));
    }
    let d = sampler.d();
    let mut fronts = Vec::new();
    let mut scratch = GrowthScratch::default();
    let end = grow_with(sampler, n_max, site_cap, rng, &mut scratch, |_, front| {
        let mut rows: Vec<Vec<i64>> = front.iter().map(|s| s[..d].iter().map(|&x| x as i64).collect()).collect();
        rows.sort_unstable();
        fronts.push(rows);
    });
    let (died_at, truncated_at) = match end {
        GrowthEnd::Survived => (None, None),
        GrowthEnd::Died(t) => {
            fronts.push(Vec::new());
            (Some(t), None)
        }
        GrowthEnd::Truncated(t) => (None, Some(t)),
    };
    Ok(ClusterTrace {
        d,
        fronts,
        died_at,
        truncated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, StepKernel};
    use crate::rng::stream_rng;

    #[test]
    fn zero_p_dies_at_one() {
        let k = StepKernel::build(KernelSpec::power_law(2, 1.0, 2, 8).with_tail_tol(0.9)).unwrap();
        let s = BondFieldSampler::new(&k, 0.0).unwrap();
        let t = grow_cluster(&s, 10, &mut stream_rng(0, 0), 100).unwrap();
        assert_eq!(t.died_at, Some(1));
        assert_eq!(t.sizes(), vec![1, 0]);
    }

    #[test]
    fn parents_exist_at_support_displacement() {
        let k = StepKernel::build(KernelSpec::power_law(2, 1.0, 2, 6).with_tail_tol(0.9)).unwrap();
        let s = BondFieldSampler::new(&k, 1.3).unwrap();
        let t = grow_cluster(&s, 12, &mut stream_rng(5, 2), 10_000).unwrap();
        assert_eq!(t.fronts[0], vec![vec![0, 0]]);
        for w in t.fronts.windows(2) {
            for c in &w[1] {
                assert!(w[0].iter().any(|p| c.iter().zip(p).all(|(a, b)| (a - b).abs() <= 6)));
            }
        }
    }

    #[test]
    fn cap_truncates() {
        let k = StepKernel::build(KernelSpec::power_law(1, 1.0, 8, 64).with_tail_tol(0.9)).unwrap();
        let s = BondFieldSampler::new(&k, 3.0).unwrap();
        let t = grow_cluster(&s, 200, &mut stream_rng(1, 0), 20).unwrap();
        assert!(t.truncated());
        assert!(t.fronts.iter().all(|f| f.len() <= 20));
    }
}

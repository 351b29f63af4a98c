//! Exhaustive bond-configuration sums on tiny instances: the exact
//! two-point function and the first expansion identity
//! `φ = π⁰ + π⁰ ∗ q_p ∗ φ - R¹`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::orbit::{for_each_image, permutations};
use crate::kernel::StepKernel;

use super::sampler::BondFieldSampler;

/// Default cap on enumeration work (configurations times per-configuration
/// cost).
pub const DEFAULT_WORK_CAP: f64 = (1u64 << 30) as f64;

/// Space-time function on the reachable sites, `values[t][x]`.
pub type SpaceTime = Vec<BTreeMap<Vec<i64>, f64>>;

fn support(kernel: &StepKernel, p: f64) -> Result<Vec<(Vec<i64>, f64)>> {
    BondFieldSampler::new(kernel, p)?;
    if kernel.orbit_count() > 64 {
        return Err(Error::WorkCap(format!(
            "kernel has {} orbits; enumeration needs a tiny support",
            kernel.orbit_count()
        )));
    }
    let perms = permutations(kernel.d());
    let mut out = BTreeMap::new();
    kernel.for_each_orbit(|t, _, mass| {
        if mass > 0.0 {
            for_each_image(t, &perms, |img| {
                out.insert(img.to_vec(), p * mass);
            });
        }
    });
    Ok(out.into_iter().collect())
}

fn shifted(x: &[i64], y: &[i64]) -> Vec<i64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTwoPoint {
    pub p: f64,
    /// `φ_p(x, t)` for `t = 0..=n`.
    pub phi: SpaceTime,
    /// Configurations summed over.
    pub configurations: f64,
}

impl ExactTwoPoint {
    /// `Z_p(0; t) = Σ_x φ_p(x, t)`.
    pub fn z0(&self, t: usize) -> f64 {
        self.phi[t].values().sum()
    }
}

/// `φ_p(x, t)`, `t <= n`, summing `P(ω)` over the configurations of the
/// bonds leaving each reached generation. Bonds out of unreached sites do
/// not affect connectivity and sum out to one.
pub fn exact_enumeration_two_point(kernel: &StepKernel, p: f64, n: usize, work_cap: f64) -> Result<ExactTwoPoint> {
    let sup = support(kernel, p)?;
    let s = sup.len();
    let mut states: BTreeMap<Vec<Vec<i64>>, f64> = BTreeMap::new();
    states.insert(vec![vec![0; kernel.d()]], 1.0);
    let mut phi: SpaceTime = Vec::with_capacity(n + 1);
    let mut work = 0.0;
    for t in 0..=n {
        let mut layer = BTreeMap::new();
        for (set, &pr) in &states {
            for x in set {
                *layer.entry(x.clone()).or_insert(0.0) += pr;
            }
        }
        phi.push(layer);
        if t == n {
            break;
        }
        let mut next: BTreeMap<Vec<Vec<i64>>, f64> = BTreeMap::new();
        for (set, &pr) in &states {
            let bonds = set.len() * s;
            work += 2f64.powi(bonds as i32) * bonds as f64;
            if bonds >= 63 || work > work_cap {
                return Err(Error::WorkCap(format!(
                    "layer {t}: {bonds} bonds per state, work {work:.3e} over cap {work_cap:.3e}"
                )));
            }
            for mask in 0u64..(1u64 << bonds) {
                let mut w = pr;
                let mut child: Vec<Vec<i64>> = Vec::new();
                for (b, (x, (y, q))) in set.iter().flat_map(|x| sup.iter().map(move |e| (x, e))).enumerate() {
                    if mask >> b & 1 == 1 {
                        w *= q;
                        child.push(shifted(x, y));
                    } else {
                        w *= 1.0 - q;
                    }
                }
                if w == 0.0 {
                    continue;
                }
                child.sort_unstable();
                child.dedup();
                *next.entry(child).or_insert(0.0) += w;
            }
        }
        states = next;
    }
    Ok(ExactTwoPoint {
        p,
        phi,
        configurations: work,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub p: f64,
    pub n: usize,
    pub phi: SpaceTime,
    /// `π⁰(x, t) = P((o,0) ⇉ (x,t))`.
    pub pi0: SpaceTime,
    /// `R¹(x, t)`.
    pub r1: SpaceTime,
    /// `(π⁰ ∗ q_p ∗ φ)(x, t)`.
    pub convolution: SpaceTime,
    /// `max |φ - π⁰ - π⁰∗q_p∗φ + R¹|` over the reachable sites.
    pub residual: f64,
    pub configurations: u64,
    pub bonds: usize,
}

struct Bond {
    from: usize,
    to: usize,
    q: f64,
}

/// Enumerates every configuration of the reachable bond set and evaluates
/// the three terms of the first expansion step.
pub fn verify_expansion_step(kernel: &StepKernel, p: f64, n: usize, work_cap: f64) -> Result<ExpansionCheck> {
    let sup = support(kernel, p)?;
    let d = kernel.d();
    // sites by layer
    let mut layers: Vec<Vec<Vec<i64>>> = vec![vec![vec![0; d]]];
    for t in 0..n {
        let mut next: Vec<Vec<i64>> = layers[t]
            .iter()
            .flat_map(|x| sup.iter().map(move |(y, _)| shifted(x, y)))
            .collect();
        next.sort_unstable();
        next.dedup();
        layers.push(next);
    }
    let mut index: BTreeMap<(usize, Vec<i64>), usize> = BTreeMap::new();
    let mut sites: Vec<(usize, Vec<i64>)> = Vec::new();
    for (t, layer) in layers.iter().enumerate() {
        for x in layer {
            index.insert((t, x.clone()), sites.len());
            sites.push((t, x.clone()));
        }
    }
    let mut bonds = Vec::new();
    for t in 0..n {
        for x in &layers[t] {
            for (y, q) in &sup {
                bonds.push(Bond {
                    from: index[&(t, x.clone())],
                    to: index[&(t + 1, shifted(x, y))],
                    q: *q,
                });
            }
        }
    }
    let nb = bonds.len();
    let ns = sites.len();
    let configs = 2f64.powi(nb as i32);
    let work = configs * (nb * nb) as f64;
    if nb >= 63 || ns > 128 || work > work_cap {
        return Err(Error::WorkCap(format!(
            "{nb} bonds on {ns} sites: work {work:.3e} over cap {work_cap:.3e}"
        )));
    }

    let reach = |mask: u64, skip: usize| -> u128 {
        let mut r: u128 = 1;
        for (b, bond) in bonds.iter().enumerate() {
            if b != skip && mask >> b & 1 == 1 && r >> bond.from & 1 == 1 {
                r |= 1 << bond.to;
            }
        }
        r
    };
    let mut phi = vec![0.0; ns];
    let mut pi0 = vec![0.0; ns];
    let mut r1 = vec![0.0; ns];
    let mut from = vec![0u128; ns];
    let mut without = vec![0u128; nb];
    for mask in 0u64..(1u64 << nb) {
        let mut w = 1.0;
        for (b, bond) in bonds.iter().enumerate() {
            w *= if mask >> b & 1 == 1 { bond.q } else { 1.0 - bond.q };
        }
        if w == 0.0 {
            continue;
        }
        let all = reach(mask, usize::MAX);
        let mut pivotal_for: u128 = 0;
        for (b, slot) in without.iter_mut().enumerate() {
            if mask >> b & 1 == 1 {
                *slot = reach(mask, b);
                pivotal_for |= all & !*slot;
            } else {
                *slot = all;
            }
        }
        // (o,0) ⇉ z: connected with no pivotal bond, or z = o
        let double = (all & !pivotal_for) | 1;
        for (z, v) in from.iter_mut().enumerate() {
            *v = 1 << z;
        }
        for (b, bond) in bonds.iter().enumerate().rev() {
            if mask >> b & 1 == 1 {
                let f = from[bond.to];
                from[bond.from] |= f;
            }
        }
        for z in 0..ns {
            if all >> z & 1 == 1 {
                phi[z] += w;
            }
            if double >> z & 1 == 1 {
                pi0[z] += w;
            }
        }
        for (b, bond) in bonds.iter().enumerate() {
            if mask >> b & 1 == 1 && double >> bond.from & 1 == 1 {
                let mut hit = from[bond.to] & without[b];
                while hit != 0 {
                    let z = hit.trailing_zeros() as usize;
                    r1[z] += w;
                    hit &= hit - 1;
                }
            }
        }
    }

    let to_map = |v: &[f64]| -> SpaceTime {
        let mut out: SpaceTime = vec![BTreeMap::new(); n + 1];
        for ((t, x), &val) in sites.iter().zip(v) {
            out[*t].insert(x.clone(), val);
        }
        out
    };
    let phi_m = to_map(&phi);
    let pi0_m = to_map(&pi0);
    let r1_m = to_map(&r1);
    let mut conv = vec![0.0; ns];
    for (i, (t, x)) in sites.iter().enumerate() {
        let mut acc = 0.0;
        for m in 0..*t {
            for (u, pu) in &pi0_m[m] {
                for (y, q) in &sup {
                    let rest: Vec<i64> = x.iter().zip(u).zip(y).map(|((a, b), c)| a - b - c).collect();
                    if let Some(f) = phi_m[t - m - 1].get(&rest) {
                        acc += pu * q * f;
                    }
                }
            }
        }
        conv[i] = acc;
    }
    let residual = (0..ns)
        .map(|i| (phi[i] - pi0[i] - conv[i] + r1[i]).abs())
        .fold(0.0, f64::max);
    Ok(ExpansionCheck {
        p,
        n,
        phi: phi_m,
        pi0: pi0_m,
        r1: r1_m,
        convolution: to_map(&conv),
        residual,
        configurations: 1u64 << nb,
        bonds: nb,
    })
}

/// `d = 1`, `D` uniform on `{-1, 0, 1}`.
pub fn tiny_kernel() -> StepKernel {
    use crate::kernel::{KernelSpec, Profile};
    StepKernel::build(KernelSpec {
        d: 1,
        alpha: 1.0,
        l: 1,
        profile: Profile::Box,
        radius: 1,
        tail_tol: 0.5,
    })
    .expect("tiny kernel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_is_bond_law() {
        let k = tiny_kernel();
        let e = exact_enumeration_two_point(&k, 0.6, 1, DEFAULT_WORK_CAP).unwrap();
        for x in [-1, 0, 1] {
            assert!((e.phi[1][&vec![x]] - 0.2).abs() < 1e-15);
        }
        assert_eq!(e.phi[0][&vec![0]], 1.0);
    }

    #[test]
    fn layered_matches_full_enumeration() {
        let k = tiny_kernel();
        let layered = exact_enumeration_two_point(&k, 0.6, 2, DEFAULT_WORK_CAP).unwrap();
        let full = verify_expansion_step(&k, 0.6, 2, DEFAULT_WORK_CAP).unwrap();
        assert_eq!(full.bonds, 12);
        for t in 0..=2 {
            for (x, v) in &layered.phi[t] {
                assert!((full.phi[t][x] - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expansion_identity_holds() {
        let k = tiny_kernel();
        let c = verify_expansion_step(&k, 0.6, 2, DEFAULT_WORK_CAP).unwrap();
        assert!(c.residual <= 1e-12, "{}", c.residual);
        assert!((c.pi0[0][&vec![0]] - 1.0).abs() < 1e-13);
        assert!(c.pi0[1].values().all(|&v| v == 0.0));
        assert!(c.r1[2].values().any(|&v| v > 0.0));
    }

    #[test]
    fn monotone_in_p() {
        let k = tiny_kernel();
        let a = exact_enumeration_two_point(&k, 0.6, 2, DEFAULT_WORK_CAP).unwrap();
        let b = exact_enumeration_two_point(&k, 0.7, 2, DEFAULT_WORK_CAP).unwrap();
        for (x, v) in &a.phi[2] {
            assert!(b.phi[2][x] >= *v);
        }
    }

    #[test]
    fn refuses_large_work() {
        let k = tiny_kernel();
        assert!(matches!(verify_expansion_step(&k, 0.6, 3, DEFAULT_WORK_CAP), Err(Error::WorkCap(_))));
        assert!(exact_enumeration_two_point(&k, 0.6, 3, DEFAULT_WORK_CAP).is_ok());
    }
}

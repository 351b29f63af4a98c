//! The long-range step distribution `D` and its sampling tables.
//!
//! `D(x) = h(x/L) / sum_y h(y/L)` with the power-law profile
//! `h(u) ∝ (|u| ∨ 1)^{-d-α}`, truncated to the box `|x|_inf <= R` and
//! renormalized there. Masses are stored once per hyperoctahedral orbit, so
//! the symmetry `D(x) = D(σx)` holds bit-exactly by construction.

pub mod orbit;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::error::{param, Error, Result};
use crate::numeric::{kahan_sum, sphere_area, KahanSum};
use orbit::{canonical, multiplicity, orbit_count, permutations, OrbitIter};

/// Maximum spatial dimension supported.
pub const MAX_DIM: usize = 8;

/// Default cap on stored orbit representatives (8 bytes each).
pub const DEFAULT_MAX_ORBITS: u64 = 1 << 26;

/// Shape of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `(|u| ∨ 1)^{-d-α}`; regularity radius ℓ = 1.
    PowerLaw,
    /// Uniform on `|x|_inf <= L` (origin included). Test profile.
    Box,
    /// Uniform on `1 <= |x|_inf <= L`. Test profile; `L = 1` gives the
    /// nearest-neighbour kernel in `d = 1`.
    PuncturedBox,
}

impl Profile {
    /// Regularity radius ℓ beyond which the profile is exactly its tail form.
    pub fn ell(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: usize,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: u32,
    pub profile: Profile,
    /// Truncation radius in the sup norm.
    #[serde(rename = "R")]
    pub radius: u64,
    pub tail_tol: f64,
}

impl KernelSpec {
    pub fn power_law(d: usize, alpha: f64, l: u32, radius: u64) -> Self {
        Self {
            d,
            alpha,
            l,
            profile: Profile::PowerLaw,
            radius,
            tail_tol: 1e-4,
        }
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }

    /// `α ∧ 2`.
    pub fn stable_index(&self) -> f64 {
        self.alpha.min(2.0)
    }

    pub fn lambda(&self) -> f64 {
        (self.l as f64).powi(-(self.d as i32))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(param("d", format!("must be in 1..={MAX_DIM}")));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(param("alpha", "must be positive"));
        }
        if self.l == 0 {
            return Err(param("L", "must be >= 1"));
        }
        if (self.radius as f64) < self.profile.ell() * self.l as f64 {
            return Err(param("R", format!("must be >= ell*L = {}", self.l)));
        }
        if self.radius > u32::MAX as u64 / 2 {
            return Err(param("R", "too large"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(param("tail_tol", "must lie in (0,1)"));
        }
        Ok(())
    }

    /// Unnormalized weight of a site given its canonical tuple.
    #[inline]
    pub(crate) fn weight(&self, tuple: &[u32]) -> f64 {
        match self.profile {
            Profile::PowerLaw => {
                let r2: f64 = tuple.iter().map(|&x| (x as f64) * (x as f64)).sum();
                let u = r2.sqrt() / self.l as f64;
                if u <= 1.0 {
                    1.0
                } else {
                    u.powf(-(self.d as f64) - self.alpha)
                }
            }
            Profile::Box => {
                if tuple.last().map_or(0, |&m| m) <= self.l {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::PuncturedBox => {
                let m = tuple.last().map_or(0, |&m| m);
                if m >= 1 && m <= self.l {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Upper bound on the unnormalized weight of all sites with
    /// `|x|_inf > radius`, from the power-law integral: each such site is
    /// dominated by the integral over its unit cell, shifted inward by the
    /// cell half-diagonal.
    pub fn tail_weight_bound(&self, radius: u64) -> f64 {
        match self.profile {
            Profile::Box | Profile::PuncturedBox => {
                if radius >= self.l as u64 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Profile::PowerLaw => {
                let d = self.d as f64;
                let c = d.sqrt() / 2.0;
                let inner = radius as f64 + 0.5 - c;
                if inner <= 0.0 || (radius as f64) < self.l as f64 {
                    return f64::INFINITY;
                }
                let k = (1.0 + c / inner).powf(d - 1.0);
                let l = self.l as f64;
                sphere_area(self.d) * k * inner.powf(-self.alpha) / self.alpha * l.powf(d + self.alpha)
            }
        }
    }
}

/// Build-time resource limits.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_orbits: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_orbits: DEFAULT_MAX_ORBITS,
        }
    }
}

/// Truncated, renormalized step distribution.
#[derive(Debug)]
pub struct StepKernel {
    spec: KernelSpec,
    /// Mass of one site per orbit, in `OrbitIter` order.
    masses: Vec<f64>,
    /// Σ over the truncated box of the unnormalized weights.
    normalization: f64,
    tail_bound: f64,
    sampler: OnceLock<SiteSampler>,
}

#[derive(Debug)]
struct SiteSampler {
    table: AliasTable,
    tuples: Vec<u32>,
}

impl StepKernel {
    pub fn build(spec: KernelSpec) -> Result<Self> {
        Self::build_with(spec, BuildOptions::default())
    }

    pub fn build_with(spec: KernelSpec, opts: BuildOptions) -> Result<Self> {
        spec.validate()?;
        let count = orbit_count(spec.d, spec.radius);
        if count > opts.max_orbits as f64 {
            return Err(Error::Resource(format!(
                "kernel with d={} R={} needs {count:.3e} orbit representatives (budget {})",
                spec.d, spec.radius, opts.max_orbits
            )));
        }
        let mut masses = Vec::with_capacity(count as usize);
        let mut total = KahanSum::new();
        OrbitIter::new(spec.d, spec.radius as u32).for_each(|t| {
            let w = spec.weight(t);
            masses.push(w);
            total.add(w * multiplicity(t) as f64);
        });
        let normalization = total.value();
        if !(normalization > 0.0) {
            return Err(param("profile", "kernel has no mass inside the box"));
        }
        let tail_w = spec.tail_weight_bound(spec.radius);
        let tail_bound = tail_w / (normalization + tail_w);
        if tail_bound > spec.tail_tol {
            return Err(Error::TailTooHeavy {
                tail: tail_bound,
                tail_tol: spec.tail_tol,
                min_radius: minimal_radius(&spec, normalization),
            });
        }
        for m in &mut masses {
            *m /= normalization;
        }
        Ok(Self {
            spec,
            masses,
            normalization,
            tail_bound,
            sampler: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn radius(&self) -> u64 {
        self.spec.radius
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda()
    }

    /// Upper bound on the mass the untruncated `D` puts outside the box.
    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn orbit_count(&self) -> usize {
        self.masses.len()
    }

    /// `D(x)`; zero outside the box.
    pub fn mass(&self, site: &[i64]) -> f64 {
        assert_eq!(site.len(), self.spec.d, "site dimension");
        if site.iter().any(|x| x.unsigned_abs() > self.spec.radius) {
            return 0.0;
        }
        self.spec.weight(&canonical(site)) / self.normalization
    }

    /// `‖D‖_∞`.
    pub fn sup_mass(&self) -> f64 {
        self.masses.iter().copied().fold(0.0, f64::max)
    }

    /// Visits each orbit as (canonical tuple, multiplicity, per-site mass).
    pub fn for_each_orbit(&self, mut f: impl FnMut(&[u32], u32, f64)) {
        let mut i = 0;
        OrbitIter::new(self.spec.d, self.spec.radius as u32).for_each(|t| {
            f(t, multiplicity(t), self.masses[i]);
            i += 1;
        });
    }

    /// Σ_x D(x), compensated.
    pub fn total_mass(&self) -> f64 {
        let mut s = KahanSum::new();
        self.for_each_orbit(|_, m, p| s.add(m as f64 * p));
        s.value()
    }

    /// Mass of `D` on sites with `|x|_inf > r`.
    pub fn sup_norm_tail(&self, r: u64) -> f64 {
        let mut s = KahanSum::new();
        self.for_each_orbit(|t, m, p| {
            if *t.last().unwrap() as u64 > r {
                s.add(m as f64 * p);
            }
        });
        s.value().max(0.0)
    }

    /// Σ_x |x|^r D(x) over the truncated support.
    pub fn raw_moment(&self, r: f64) -> f64 {
        let mut s = KahanSum::new();
        self.for_each_orbit(|t, m, p| {
            let n2: f64 = t.iter().map(|&x| (x as f64).powi(2)).sum();
            let term = if r == 0.0 { 1.0 } else { n2.sqrt().powf(r) };
            s.add(m as f64 * p * term);
        });
        s.value()
    }

    /// Moment with a doubling-based convergence diagnostic.
    pub fn moment(&self, r: f64) -> Result<MomentReport> {
        if !(r >= 0.0) {
            return Err(param("r", "must be nonnegative"));
        }
        let at = |radius: u64| -> f64 {
            if radius == self.spec.radius {
                return self.raw_moment(r);
            }
            let spec = KernelSpec { radius, ..self.spec.clone() };
            let mut num = KahanSum::new();
            let mut den = KahanSum::new();
            OrbitIter::new(spec.d, radius as u32).for_each(|t| {
                let w = spec.weight(t) * multiplicity(t) as f64;
                let n2: f64 = t.iter().map(|&x| (x as f64).powi(2)).sum();
                den.add(w);
                num.add(w * if r == 0.0 { 1.0 } else { n2.sqrt().powf(r) });
            });
            num.value() / den.value()
        };
        let r0 = self.spec.radius;
        let values = [at(r0), at(2 * r0), at(4 * r0)];
        let d1 = values[1] - values[0];
        let d2 = values[2] - values[1];
        let change = d1.abs();
        let growth = if d1.abs() > 0.0 && d2.abs() > 0.0 {
            (d2.abs() / d1.abs()).log2()
        } else {
            f64::NEG_INFINITY
        };
        let convergent = change < self.spec.tail_tol || growth < -0.05;
        let extrapolated = if convergent && growth.is_finite() {
            let q = 2f64.powf(growth);
            values[2] + d2 * q / (1.0 - q)
        } else {
            values[2]
        };
        Ok(MomentReport {
            r,
            value: values[0],
            doubled: values[1],
            quadrupled: values[2],
            growth_exponent: growth,
            convergent,
            extrapolated,
        })
    }

    /// `D̂(k) = Σ_x cos(k·x) D(x)` evaluated orbit by orbit.
    pub fn fourier(&self, k: &[f64]) -> f64 {
        self.fourier_pair(k).0
    }

    /// `1 - D̂(k)`, accumulated term by term for accuracy at small `|k|`.
    pub fn one_minus_fourier(&self, k: &[f64]) -> f64 {
        self.fourier_pair(k).1
    }

    /// Returns `(D̂(k), 1 - D̂(k))`.
    pub fn fourier_pair(&self, k: &[f64]) -> (f64, f64) {
        let mut fs = KahanSum::new();
        let mut gs = KahanSum::new();
        self.orbit_cosines(k, |_, w, c, omc| {
            fs.add(w * c);
            gs.add(w * omc);
        });
        (fs.value(), gs.value())
    }

    /// Law of `|x_1|`: entry `j` is `P(|x_1| = j)`, `j = 0..=R`.
    pub fn axis_marginal(&self) -> Vec<f64> {
        let d = self.spec.d as f64;
        let mut acc: Vec<KahanSum> = vec![KahanSum::new(); self.spec.radius as usize + 1];
        self.for_each_orbit(|t, m, p| {
            // each coordinate slot sees every tuple entry equally often
            let share = m as f64 * p / d;
            for &x in t {
                acc[x as usize].add(share);
            }
        });
        acc.iter().map(KahanSum::value).collect()
    }

    /// `1 - D̂(k e_1)` from a precomputed [`axis_marginal`](Self::axis_marginal).
    pub fn one_minus_fourier_axis(marginal: &[f64], k: f64) -> f64 {
        let mut s = KahanSum::new();
        for (j, &w) in marginal.iter().enumerate().skip(1) {
            let h = (0.5 * k * j as f64).sin();
            s.add(w * 2.0 * h * h);
        }
        s.value()
    }

    /// Calls `f(tuple, orbit_mass, mean cos over orbit, mean (1-cos) over orbit)`.
    pub(crate) fn orbit_cosines(&self, k: &[f64], mut f: impl FnMut(&[u32], f64, f64, f64)) {
        let d = self.spec.d;
        assert_eq!(k.len(), d, "wavevector dimension");
        if d == 1 {
            let k0 = k[0];
            self.for_each_orbit(|t, m, p| {
                let x = t[0] as f64 * k0;
                let s = (0.5 * x).sin();
                f(t, m as f64 * p, x.cos(), 2.0 * s * s);
            });
            return;
        }
        let r = self.spec.radius as usize;
        // 1 - cos(k_i j) = 2 sin^2(k_i j / 2), kept separately for small |k|
        let omc: Vec<Vec<f64>> = k
            .iter()
            .map(|&ki| {
                (0..=r)
                    .map(|j| {
                        let s = (0.5 * ki * j as f64).sin();
                        2.0 * s * s
                    })
                    .collect()
            })
            .collect();
        let perms = permutations(d);
        let inv = 1.0 / perms.len() as f64;
        self.for_each_orbit(|t, m, p| {
            let mut acc = 0.0;
            for perm in &perms {
                // 1 - Π(1 - a_i) built up as g <- g + a - g a
                let mut g = 0.0;
                for (i, &pi) in perm.iter().enumerate() {
                    let a = omc[i][t[pi] as usize];
                    g += a - g * a;
                }
                acc += g;
            }
            let g = acc * inv;
            f(t, m as f64 * p, 1.0 - g, g);
        });
    }

    /// Draws one step from `D` exactly (alias table over orbits, then a
    /// uniformly random signed permutation).
    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i64]) {
        let s = self.sampler();
        let i = s.table.sample(rng);
        let d = self.spec.d;
        orbit::random_image(&s.tuples[i * d..(i + 1) * d], out, rng);
    }

    fn sampler(&self) -> &SiteSampler {
        self.sampler.get_or_init(|| {
            let d = self.spec.d;
            let mut weights = Vec::with_capacity(self.masses.len());
            let mut tuples = Vec::with_capacity(self.masses.len() * d);
            self.for_each_orbit(|t, m, p| {
                weights.push(m as f64 * p);
                tuples.extend_from_slice(t);
            });
            SiteSampler {
                table: AliasTable::new(&weights).expect("kernel has positive mass"),
                tuples,
            }
        })
    }

    /// Writes the full support, lexicographically ordered, as CSV.
    pub fn write_csv<W: Write>(&self, mut out: W, max_sites: u64) -> Result<()> {
        let d = self.spec.d;
        let side = 2 * self.spec.radius + 1;
        let sites = (side as f64).powi(d as i32);
        if sites > max_sites as f64 {
            return Err(Error::Resource(format!(
                "kernel dump would contain {sites:.3e} sites (limit {max_sites})"
            )));
        }
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["mass".into()]).collect();
        writeln!(out, "{}", header.join(","))?;
        let r = self.spec.radius as i64;
        let mut site = vec![-r; d];
        loop {
            let m = self.mass(&site);
            if m > 0.0 {
                let cols: Vec<String> = site.iter().map(|x| x.to_string()).collect();
                writeln!(out, "{},{:.17e}", cols.join(","), m)?;
            }
            let mut i = d;
            loop {
                if i == 0 {
                    return Ok(());
                }
                i -= 1;
                if site[i] < r {
                    site[i] += 1;
                    break;
                }
                site[i] = -r;
            }
        }
    }

    /// JSON sidecar accompanying a kernel dump.
    pub fn metadata(&self) -> KernelMetadata {
        KernelMetadata {
            spec: self.spec.clone(),
            ell: self.spec.profile.ell(),
            lambda: self.lambda(),
            truncated_tail_mass_bound: self.tail_bound,
            normalization: self.normalization,
            sup_mass: self.sup_mass(),
            orbit_count: self.masses.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMetadata {
    pub spec: KernelSpec,
    pub ell: f64,
    pub lambda: f64,
    pub truncated_tail_mass_bound: f64,
    pub normalization: f64,
    pub sup_mass: f64,
    pub orbit_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub r: f64,
    pub value: f64,
    /// Moment of the same family truncated at `2R`.
    pub doubled: f64,
    /// ... and at `4R`.
    pub quadrupled: f64,
    /// `log2` of the ratio of successive doubling increments; tends to
    /// `r - α` for the power-law profile.
    pub growth_exponent: f64,
    pub convergent: bool,
    pub extrapolated: f64,
}

/// Smallest radius whose tail bound meets `tail_tol`, holding the box
/// normalization fixed (which can only overstate the tail fraction).
fn minimal_radius(spec: &KernelSpec, normalization: f64) -> u64 {
    let ok = |r: u64| {
        let b = spec.tail_weight_bound(r);
        b / (normalization + b) <= spec.tail_tol
    };
    let mut hi = spec.radius.max(1);
    while !ok(hi) {
        if hi > u64::MAX / 4 {
            return u64::MAX;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `D(o)` of the untruncated `d = 1`, `α = 1`, `L = 1` kernel.
pub fn d1_alpha1_origin_mass() -> f64 {
    1.0 / (1.0 + PI * PI / 3.0)
}

/// Convenience: Σ_x D(x)² computed in real space.
pub fn self_overlap(kernel: &StepKernel) -> f64 {
    let mut v = Vec::new();
    kernel.for_each_orbit(|_, m, p| v.push(m as f64 * p * p));
    kahan_sum(v)
}

//! Monte Carlo accumulators for `Z_p(k; n) = E Σ_{x ∈ C_n} e^{ik·x}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::kernel::StepKernel;
use crate::rng::stream_rng;
use crate::spectral::scaled_probe;

use super::cluster::{check_range, grow_with, GrowthEnd, GrowthScratch, Site};
use super::sampler::BondFieldSampler;

/// Replicas per deterministic work unit.
pub const CHUNK: u64 = 512;

/// Probe wavevectors, either fixed or rescaled with `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeSet {
    Fixed {
        k: Vec<Vec<f64>>,
    },
    /// `k_n` from `k` by the stable scaling with index `alpha` and
    /// amplitude `v`; times `n < 2` reuse the `n = 2` scaling.
    Scaled {
        k: Vec<Vec<f64>>,
        alpha: f64,
        v: f64,
    },
}

impl ProbeSet {
    pub fn base(&self) -> &[Vec<f64>] {
        match self {
            ProbeSet::Fixed { k } | ProbeSet::Scaled { k, .. } => k,
        }
    }

    pub fn len(&self) -> usize {
        self.base().len()
    }

    pub fn is_empty(&self) -> bool {
        self.base().is_empty()
    }

    /// Wavevector of probe `i` at time `n`.
    pub fn at(&self, i: usize, n: usize) -> Result<Vec<f64>> {
        match self {
            ProbeSet::Fixed { k } => Ok(k[i].clone()),
            ProbeSet::Scaled { k, alpha, v } => scaled_probe(*alpha, *v, &k[i], n.max(2) as u64),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let k = self.base();
        if k.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(param("probes", format!("every probe needs {d} finite components")));
        }
        if !k.iter().any(|v| v.iter().all(|&x| x == 0.0)) {
            return Err(param("probes", "must include k = 0"));
        }
        Ok(())
    }
}

/// Running sums for one `(k, n)` cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub sum_re: f64,
    pub sumsq_re: f64,
    pub sum_im: f64,
    pub sumsq_im: f64,
}

impl Moments {
    fn add(&mut self, re: f64, im: f64) {
        self.sum_re += re;
        self.sumsq_re += re * re;
        self.sum_im += im;
        self.sumsq_im += im * im;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum_re += o.sum_re;
        self.sumsq_re += o.sumsq_re;
        self.sum_im += o.sum_im;
        self.sumsq_im += o.sumsq_im;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTable {
    pub d: usize,
    pub p: f64,
    pub n_max: usize,
    pub probes: ProbeSet,
    /// `cells[n * probes + i]`.
    pub cells: Vec<Moments>,
    /// Replicas whose generation `n` is exact (not truncated at or before `n`).
    pub counts: Vec<u64>,
    /// Replicas truncated at or before `n`.
    pub truncated: Vec<u64>,
    /// Sums of `Σ_{n <= n_max} |C_n|` and its square over replicas that were
    /// never truncated.
    pub size_sum: f64,
    pub size_sumsq: f64,
    pub complete_replicas: u64,
    /// Replica index ranges `[start, end)` folded into this table.
    pub ranges: Vec<(u64, u64)>,
}

/// Mean and standard error of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub k_index: usize,
    pub n: usize,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr: f64,
    pub stderr_im: f64,
    pub replicas: u64,
    /// False when replicas were dropped by truncation at or before `n`.
    pub unbiased: bool,
}

impl CellEstimate {
    pub fn valid(&self) -> bool {
        self.replicas > 0
    }
}

fn mean_se(sum: f64, sumsq: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let se = if n > 1 {
        ((sumsq / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt()
    } else {
        f64::INFINITY
    };
    (mean, se)
}

impl EstimatorTable {
    pub fn new(d: usize, p: f64, n_max: usize, probes: ProbeSet) -> Result<Self> {
        probes.validate(d)?;
        let k = probes.len();
        Ok(Self {
            d,
            p,
            n_max,
            probes,
            cells: vec![Moments::default(); (n_max + 1) * k],
            counts: vec![0; n_max + 1],
            truncated: vec![0; n_max + 1],
            size_sum: 0.0,
            size_sumsq: 0.0,
            complete_replicas: 0,
            ranges: Vec::new(),
        })
    }

    pub fn replicas(&self) -> u64 {
        self.ranges.iter().map(|(a, b)| b - a).sum()
    }

    /// Index of the first `k = 0` probe.
    pub fn zero_probe(&self) -> usize {
        self.probes
            .base()
            .iter()
            .position(|v| v.iter().all(|&x| x == 0.0))
            .expect("validated")
    }

    pub fn cell(&self, k_index: usize, n: usize) -> CellEstimate {
        let m = &self.cells[n * self.probes.len() + k_index];
        let c = self.counts[n];
        let (mean_re, stderr) = mean_se(m.sum_re, m.sumsq_re, c);
        let (mean_im, stderr_im) = mean_se(m.sum_im, m.sumsq_im, c);
        CellEstimate {
            k_index,
            n,
            mean_re,
            mean_im,
            stderr,
            stderr_im,
            replicas: c,
            unbiased: self.truncated[n] == 0,
        }
    }

    /// `Ẑ(0; n)` with its standard error, `n = 0..=n_max`.
    pub fn zero_series(&self) -> Vec<CellEstimate> {
        let z = self.zero_probe();
        (0..=self.n_max).map(|n| self.cell(z, n)).collect()
    }

    pub fn estimates(&self) -> Vec<CellEstimate> {
        (0..=self.n_max)
            .flat_map(|n| (0..self.probes.len()).map(move |i| (i, n)))
            .map(|(i, n)| self.cell(i, n))
            .collect()
    }

    fn compatible(&self, o: &Self) -> bool {
        self.d == o.d && self.p.to_bits() == o.p.to_bits() && self.n_max == o.n_max && self.probes == o.probes
    }

    /// Adds the replicas of `other`. Commutative; associative up to
    /// floating-point rounding of the real sums.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.compatible(other) {
            return Err(param("table", "merging tables with different settings"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.truncated.iter_mut().zip(&other.truncated) {
            *a += b;
        }
        self.size_sum += other.size_sum;
        self.size_sumsq += other.size_sumsq;
        self.complete_replicas += other.complete_replicas;
        self.ranges.extend_from_slice(&other.ranges);
        self.ranges.sort_unstable();
        Ok(())
    }

    /// CSV with columns `k_index,n,mean_re,mean_im,stderr,replicas`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k_index,n,mean_re,mean_im,stderr,replicas")?;
        for e in self.estimates() {
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{}",
                e.k_index, e.n, e.mean_re, e.mean_im, e.stderr, e.replicas
            )?;
        }
        Ok(())
    }
}

/// Simulation settings shared by all replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub site_cap: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            site_cap: super::cluster::DEFAULT_SITE_CAP,
        }
    }
}

/// Probe wavevectors for every `(n, i)`, flattened.
fn probe_table(probes: &ProbeSet, n_max: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity((n_max + 1) * probes.len());
    for n in 0..=n_max {
        for i in 0..probes.len() {
            out.push(probes.at(i, n)?);
        }
    }
    Ok(out)
}

/// Runs replicas `range` sequentially into a fresh table.
pub fn run_replicas(
    sampler: &BondFieldSampler,
    n_max: usize,
    probes: &ProbeSet,
    seed: u64,
    range: (u64, u64),
    opts: &McOptions,
) -> Result<EstimatorTable> {
    let table = EstimatorTable::new(sampler.d(), sampler.p(), n_max, probes.clone())?;
    let ks = probe_table(probes, n_max)?;
    Ok(run_with_table(sampler, table, &ks, seed, range, opts))
}

fn run_with_table(
    sampler: &BondFieldSampler,
    mut table: EstimatorTable,
    ks: &[Vec<f64>],
    seed: u64,
    range: (u64, u64),
    opts: &McOptions,
) -> EstimatorTable {
    let d = sampler.d();
    let kp = table.probes.len();
    let n_max = table.n_max;
    let mut scratch = GrowthScratch::default();
    let mut gen = vec![(0.0f64, 0.0f64); kp];
    for r in range.0..range.1 {
        let mut rng = stream_rng(seed, r);
        let mut size = 0.0;
        let cells = &mut table.cells;
        let end = grow_with(sampler, n_max, opts.site_cap, &mut rng, &mut scratch, |t, front: &[Site]| {
            size += front.len() as f64;
            for (i, g) in gen.iter_mut().enumerate() {
                let k = &ks[t * kp + i];
                if k.iter().all(|&x| x == 0.0) {
                    *g = (front.len() as f64, 0.0);
                    continue;
                }
                let (mut c, mut s) = (0.0, 0.0);
                for x in front {
                    let phase: f64 = k.iter().zip(&x[..d]).map(|(a, &b)| a * b as f64).sum();
                    let (sn, cs) = phase.sin_cos();
                    c += cs;
                    s += sn;
                }
                *g = (c, s);
            }
            for (cell, &(c, s)) in cells[t * kp..(t + 1) * kp].iter_mut().zip(&gen) {
                cell.add(c, s);
            }
        });
        // zero contributions after extinction still count as observations
        let exact_through = match end {
            GrowthEnd::Truncated(t) => {
                for v in &mut table.truncated[t..] {
                    *v += 1;
                }
                t - 1
            }
            _ => {
                table.size_sum += size;
                table.size_sumsq += size * size;
                table.complete_replicas += 1;
                n_max
            }
        };
        for c in &mut table.counts[..=exact_through] {
            *c += 1;
        }
    }
    table.ranges.push(range);
    table
}

/// Splits `[start, end)` into the fixed work units used by every run, so
/// results do not depend on thread count or on where a run was resumed.
pub fn chunk_ranges(start: u64, end: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut a = start;
    while a < end {
        let b = ((a / CHUNK + 1) * CHUNK).min(end);
        out.push((a, b));
        a = b;
    }
    out
}

/// Continues `table` with replicas `[table.replicas(), end)`; chunks run in
/// parallel and are folded in index order.
pub fn extend_table(
    sampler: &BondFieldSampler,
    table: &mut EstimatorTable,
    seed: u64,
    end: u64,
    opts: &McOptions,
) -> Result<()> {
    let start = table.replicas();
    if table.ranges.iter().any(|r| r.1 > start) || (start > 0 && table.ranges[0].0 != 0) {
        return Err(param("table", "can only extend a table holding replicas 0..N"));
    }
    let ks = probe_table(&table.probes, table.n_max)?;
    let empty = EstimatorTable::new(table.d, table.p, table.n_max, table.probes.clone())?;
    let parts: Vec<EstimatorTable> = chunk_ranges(start, end)
        .into_par_iter()
        .map(|r| run_with_table(sampler, empty.clone(), &ks, seed, r, opts))
        .collect();
    for part in &parts {
        table.merge(part)?;
    }
    coalesce(&mut table.ranges);
    Ok(())
}

fn coalesce(ranges: &mut Vec<(u64, u64)>) {
    ranges.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(ranges.len());
    for &(a, b) in ranges.iter() {
        match out.last_mut() {
            Some(last) if last.1 == a => last.1 = b,
            _ => out.push((a, b)),
        }
    }
    *ranges = out;
}

/// `Ẑ_p(k; n)` for all probes and `n <= n_max` from `replicas` clusters.
pub fn estimate_two_point_transform(
    kernel: &StepKernel,
    p: f64,
    n_max: usize,
    probes: &ProbeSet,
    replicas: u64,
    seed: u64,
    opts: &McOptions,
) -> Result<EstimatorTable> {
    if replicas == 0 {
        return Err(param("replicas", "must be positive"));
    }
    if opts.site_cap == 0 {
        return Err(param("site_cap", "must be positive"));
    }
    check_range(kernel.radius(), n_max)?;
    let sampler = BondFieldSampler::new(kernel, p)?;
    let mut table = EstimatorTable::new(kernel.d(), p, n_max, probes.clone())?;
    extend_table(&sampler, &mut table, seed, replicas, opts)?;
    if table.counts[0] == 0 {
        return Err(Error::WorkCap("every replica was truncated".into()));
    }
    Ok(table)
}

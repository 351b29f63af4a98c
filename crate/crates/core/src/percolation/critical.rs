//! Susceptibility, the growth-slope statistic and the bisection for `p_c`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::kernel::StepKernel;
use crate::numeric::{fit_line, weighted_least_squares};

use rayon::prelude::*;

use super::cluster::check_range;
use super::estimator::{chunk_ranges, run_replicas, EstimatorTable, McOptions, ProbeSet};
use super::sampler::BondFieldSampler;

/// Window `[lo, hi]` of times; `None` bounds mean `n_max/2` and `n_max`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Option<usize>,
    pub hi: Option<usize>,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn resolve(&self, n_max: usize) -> Result<(usize, usize)> {
        let hi = self.hi.unwrap_or(n_max).min(n_max);
        let lo = self.lo.unwrap_or(n_max / 2);
        if lo >= hi {
            return Err(param("window", format!("empty window [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    }
}

/// Inverse-variance weighted slope of `log Ẑ(0; n)` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeStatistic {
    pub slope: f64,
    pub slope_se: f64,
    /// Points with `Ẑ > 0` used in the fit.
    pub points: usize,
    /// True when every replica died before the window could be fitted; the
    /// slope is then `log Ẑ(0; n*) / n*` at the last positive `n*`.
    pub extinct: bool,
}

pub fn slope_statistic(table: &EstimatorTable, window: Window) -> Result<SlopeStatistic> {
    let (lo, hi) = window.resolve(table.n_max)?;
    let z = table.zero_series();
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for e in &z[lo..=hi] {
        if e.valid() && e.mean_re > 0.0 && e.stderr > 0.0 {
            x.push(e.n as f64);
            y.push(e.mean_re.ln());
            w.push((e.mean_re / e.stderr).powi(2));
        }
    }
    if x.len() >= 2 {
        if let Some(f) = fit_line(&x, &y, Some(&w)) {
            return Ok(SlopeStatistic {
                slope: f.slope,
                slope_se: f.slope_se,
                points: x.len(),
                extinct: false,
            });
        }
    }
    let last = z
        .iter()
        .rposition(|e| e.valid() && e.mean_re > 0.0)
        .unwrap_or(0);
    let slope = if last == 0 { -1e3 } else { z[last].mean_re.ln() / last as f64 };
    Ok(SlopeStatistic {
        slope,
        slope_se: 0.0,
        points: x.len(),
        extinct: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Susceptibility {
    pub chi: f64,
    pub chi_se: f64,
    /// `Σ_{n <= N} Ẑ(0; n)`.
    pub head: f64,
    /// Geometric extrapolation beyond `N`.
    pub tail: f64,
    /// Fitted ratio `r̂ = Ẑ(0; n+1)/Ẑ(0; n)` over the window.
    pub ratio: f64,
    pub ratio_se: f64,
}

/// `χ̂ = Σ_{n<=N} Ẑ(0;n) + Ẑ(0;N) r̂/(1-r̂)`.
pub fn estimate_susceptibility(table: &EstimatorTable, window: Window, margin: f64) -> Result<Susceptibility> {
    let z = table.zero_series();
    let n = table.n_max;
    if z.iter().any(|e| !e.valid()) {
        return Err(Error::WorkCap("rows without replicas (all truncated)".into()));
    }
    let head: f64 = z.iter().map(|e| e.mean_re).sum();
    let exact_head = table.truncated[n] == 0 && table.complete_replicas > 1;
    let head_se = if exact_head {
        let c = table.complete_replicas as f64;
        let m = table.size_sum / c;
        ((table.size_sumsq / c - m * m).max(0.0) / (c - 1.0)).sqrt()
    } else {
        z.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt()
    };
    let zn = z[n].mean_re;
    if zn == 0.0 {
        return Ok(Susceptibility {
            chi: head,
            chi_se: head_se,
            head,
            tail: 0.0,
            ratio: 0.0,
            ratio_se: 0.0,
        });
    }
    let s = slope_statistic(table, window)?;
    let r = s.slope.exp();
    let r_se = r * s.slope_se;
    if r >= 1.0 - margin {
        return Err(Error::Critical { ratio: r, margin });
    }
    let tail = zn * r / (1.0 - r);
    let d_z = r / (1.0 - r);
    let d_r = zn / ((1.0 - r) * (1.0 - r));
    let tail_se = ((d_z * z[n].stderr).powi(2) + (d_r * r_se).powi(2)).sqrt();
    Ok(Susceptibility {
        chi: head + tail,
        chi_se: (head_se * head_se + tail_se * tail_se).sqrt(),
        head,
        tail,
        ratio: r,
        ratio_se: r_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcSearchOptions {
    pub n_max: usize,
    pub replicas: u64,
    pub seed: u64,
    pub window: Window,
    /// Stop once the bracket is narrower than this.
    pub tol: f64,
    pub max_iter: usize,
    pub mc: McOptions,
}

impl Default for PcSearchOptions {
    fn default() -> Self {
        Self {
            n_max: 256,
            replicas: 20_000,
            seed: 1,
            window: Window::default(),
            tol: 1e-3,
            max_iter: 20,
            mc: McOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub iter: usize,
    pub p: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcEstimate {
    pub p_c: f64,
    pub uncertainty: f64,
    /// Statistical part of `uncertainty`, from the slope standard errors.
    pub statistical: f64,
    pub trajectory: Vec<BisectionStep>,
    /// `p̂_c + 3σ >= 1`, as required of the critical point.
    pub at_least_one: bool,
}

/// Replica groups used for jackknife errors.
pub const JACKKNIFE_GROUPS: usize = 16;

/// Slope with a delete-one-group jackknife error. The WLS error of
/// [`slope_statistic`] treats the `Ẑ(0; n)` as independent, but they share
/// replicas and are strongly correlated in `n`.
pub fn jackknife_slope(groups: &[EstimatorTable], window: Window) -> Result<SlopeStatistic> {
    let mut full = groups.first().ok_or_else(|| param("groups", "empty"))?.clone();
    for g in &groups[1..] {
        full.merge(g)?;
    }
    let base = slope_statistic(&full, window)?;
    let k = groups.len();
    if k < 2 || base.extinct {
        return Ok(base);
    }
    let mut loo = Vec::with_capacity(k);
    for skip in 0..k {
        let mut t: Option<EstimatorTable> = None;
        for (i, g) in groups.iter().enumerate() {
            if i == skip {
                continue;
            }
            match &mut t {
                None => t = Some(g.clone()),
                Some(acc) => acc.merge(g)?,
            }
        }
        let s = slope_statistic(&t.expect("k >= 2"), window)?;
        loo.push(s.slope);
    }
    let mean = loo.iter().sum::<f64>() / k as f64;
    let var = (k as f64 - 1.0) / k as f64 * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    Ok(SlopeStatistic {
        slope_se: var.sqrt(),
        ..base
    })
}

/// Tables for `groups` contiguous, chunk-aligned blocks of `0..replicas`.
#[allow(clippy::too_many_arguments)]
pub fn group_tables(
    kernel: &StepKernel,
    p: f64,
    n_max: usize,
    probes: &ProbeSet,
    replicas: u64,
    seed: u64,
    opts: &McOptions,
    groups: usize,
) -> Result<Vec<EstimatorTable>> {
    check_range(kernel.radius(), n_max)?;
    let sampler = BondFieldSampler::new(kernel, p)?;
    let chunks = chunk_ranges(0, replicas);
    let per = chunks.len().div_ceil(groups.max(1)).max(1);
    let ranges: Vec<(u64, u64)> = chunks.chunks(per).map(|c| (c[0].0, c[c.len() - 1].1)).collect();
    ranges
        .into_par_iter()
        .map(|r| run_replicas(&sampler, n_max, probes, seed, r, opts))
        .collect()
}

fn slope_at(kernel: &StepKernel, p: f64, opts: &PcSearchOptions) -> Result<SlopeStatistic> {
    let probes = ProbeSet::Fixed {
        k: vec![vec![0.0; kernel.d()]],
    };
    // common random numbers across p
    let groups = group_tables(kernel, p, opts.n_max, &probes, opts.replicas, opts.seed, &opts.mc, JACKKNIFE_GROUPS)?;
    jackknife_slope(&groups, opts.window)
}

/// Bisection on the sign of the growth slope.
pub fn find_pc(kernel: &StepKernel, bracket: (f64, f64), opts: &PcSearchOptions) -> Result<PcEstimate> {
    find_pc_with(bracket, opts, |p| slope_at(kernel, p, opts))
}

/// [`find_pc`] against an arbitrary slope oracle.
pub fn find_pc_with(
    bracket: (f64, f64),
    opts: &PcSearchOptions,
    mut slope: impl FnMut(f64) -> Result<SlopeStatistic>,
) -> Result<PcEstimate> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(param("bracket", "need lo < hi"));
    }
    opts.window.resolve(opts.n_max)?;
    let s_lo = slope(lo)?;
    let s_hi = slope(hi)?;
    let mut traj = vec![
        BisectionStep {
            iter: 0,
            p: lo,
            slope: s_lo.slope,
            slope_se: s_lo.slope_se,
            lo,
            hi,
        },
        BisectionStep {
            iter: 0,
            p: hi,
            slope: s_hi.slope,
            slope_se: s_hi.slope_se,
            lo,
            hi,
        },
    ];
    if !(s_lo.slope < 0.0 && s_hi.slope > 0.0) {
        return Err(Error::Bracket {
            lo,
            hi,
            slope_lo: s_lo.slope,
            slope_hi: s_hi.slope,
        });
    }
    let mut iter = 0;
    while hi - lo > opts.tol && iter < opts.max_iter {
        iter += 1;
        let mid = 0.5 * (lo + hi);
        let s = slope(mid)?;
        if s.slope < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        traj.push(BisectionStep {
            iter,
            p: mid,
            slope: s.slope,
            slope_se: s.slope_se,
            lo,
            hi,
        });
    }
    let (p_c, statistical) = local_root(&traj, lo, hi);
    let resolution = (hi - lo) / 12f64.sqrt();
    let uncertainty = (statistical * statistical + resolution * resolution).sqrt();
    Ok(PcEstimate {
        p_c,
        uncertainty,
        statistical,
        at_least_one: p_c + 3.0 * uncertainty >= 1.0,
        trajectory: traj,
    })
}

/// Zero of a weighted line through the trajectory points near the final
/// bracket, with its delta-method standard error. Falls back to the
/// bracket midpoint when the local fit is unusable.
fn local_root(traj: &[BisectionStep], lo: f64, hi: f64) -> (f64, f64) {
    let mid = 0.5 * (lo + hi);
    let near = |reach: f64| -> Vec<&BisectionStep> {
        traj.iter().filter(|s| (s.p - mid).abs() <= reach && s.slope_se > 0.0).collect()
    };
    let mut reach = 8.0 * (hi - lo);
    let mut pts = near(reach);
    while pts.len() < 3 && reach < 1e3 {
        reach *= 2.0;
        pts = near(reach);
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|s| vec![1.0, s.p - mid]).collect();
    let y: Vec<f64> = pts.iter().map(|s| s.slope).collect();
    let w: Vec<f64> = pts.iter().map(|s| 1.0 / (s.slope_se * s.slope_se)).collect();
    match weighted_least_squares(&rows, &y, &w) {
        Some((c, cov)) if pts.len() >= 2 && c[1] > 0.0 => {
            let root = -c[0] / c[1];
            // d root / d c0 = -1/c1, d root / d c1 = c0/c1²
            let g = [-1.0 / c[1], c[0] / (c[1] * c[1])];
            let var = g[0] * g[0] * cov[0] + 2.0 * g[0] * g[1] * cov[1] + g[1] * g[1] * cov[3];
            let w = hi - lo;
            ((mid + root).clamp(lo - w, hi + w), var.max(0.0).sqrt())
        }
        _ => (mid, 0.5 * (hi - lo)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_on_exact_oracle() {
        let opts = PcSearchOptions {
            tol: 1e-6,
            max_iter: 60,
            ..Default::default()
        };
        let r = find_pc_with((0.5, 2.0), &opts, |p| {
            Ok(SlopeStatistic {
                slope: (p / 1.0625f64).ln(),
                slope_se: 1e-4,
                points: 10,
                extinct: false,
            })
        })
        .unwrap();
        assert!((r.p_c - 1.0625).abs() < 1e-5, "{}", r.p_c);
        assert!(r.at_least_one);
    }

    #[test]
    fn bracket_must_straddle() {
        let opts = PcSearchOptions::default();
        let e = find_pc_with((0.2, 0.4), &opts, |p| {
            Ok(SlopeStatistic {
                slope: p.ln(),
                slope_se: 0.0,
                points: 3,
                extinct: false,
            })
        });
        assert!(matches!(e, Err(Error::Bracket { .. })));
    }

    #[test]
    fn window_defaults_to_last_half() {
        assert_eq!(Window::default().resolve(256).unwrap(), (128, 256));
        assert!(Window::new(10, 10).resolve(20).is_err());
    }
}

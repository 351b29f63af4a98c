//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! `LROP_ACCEPTANCE_ONLY=2,5` runs a subset. The process fails only when
//! `LROP_ACCEPTANCE_STRICT=1` and some criterion failed; otherwise FAIL lines
//! are reported and the target exits 0.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lrop::analysis::{exponent_fits, fit_growth, fit_limit_shape, rw_shape_fit, sweep_point, ShapeRun};
use lrop::cli::config::{AnalyzeParams, OracleParams, PcSearchParams, SimulateParams, SweepParams};
use lrop::cli::{oracle_report, run, ExperimentConfig, RunOptions, RunRecord, Subcommand};
use lrop::kernel::{d1_alpha1_origin_mass, KernelSpec, Profile, StepKernel};
use lrop::percolation::{
    estimate_two_point_transform, extend_table, find_pc, run_replicas, BondFieldSampler, EstimatorTable, McOptions,
    PcSearchOptions, ProbeSet, Window, CHUNK,
};
use lrop::spectral::diagrams::default_grid;
use lrop::spectral::{
    diagram_values, doubling_list, heat_kernel_bound_report, pc_prediction, shell_decomposition, spectral_asymptotics,
    DiagramOptions, DiagramValue, TorusGrid,
};

const ALPHAS: [f64; 5] = [0.5, 1.0, 1.5, 2.5, 3.0];

// pinned tolerances
const MASS_TOL: f64 = 1e-12;
const EXPONENT_TOL: f64 = 0.05;
const HEAT_SPREAD: f64 = 4.0;
const PARTITION_TOL: f64 = 1e-12;
const SHELL_SPREAD: f64 = 4.0;
const PARSEVAL_TOL: f64 = 0.01;
const SCALING_TOL: f64 = 0.25;
const RESIDUAL_TOL: f64 = 1e-12;
const Z_SIGMA: f64 = 3.0;
const ETA_TOL: f64 = 0.1;
const C1_BAND: (f64, f64) = (0.8, 1.2);
const RW_TOL: f64 = 0.02;
const SHAPE_BAND: (f64, f64) = (0.5, 2.0);
const GAMMA_TOL: f64 = 0.15;
const TAU_TOL: f64 = 0.2;

// Monte Carlo settings for d = 4, alpha = 1.5, L = 4
const MC_RADIUS: u64 = 96;
const MC_TAIL_TOL: f64 = 0.5;
const PC_REPLICAS: u64 = 400_000;
const PC_BRACKET: (f64, f64) = (0.99, 1.01);
const PC_TOL: f64 = 2.5e-4;
const N_MAX: usize = 256;
const MC_REPLICAS: u64 = 100_000;
const GROWTH_WINDOW: (usize, usize) = (8, 256);
const SHAPE_K: [f64; 3] = [0.5, 1.0, 1.5];
const SHAPE_N: [usize; 3] = [64, 128, 256];
const SWEEP_EPS: [f64; 5] = [0.02, 0.03, 0.05, 0.08, 0.12];
const SWEEP_HORIZON: f64 = 4.0;

struct Report {
    only: Option<Vec<usize>>,
    failed: Vec<usize>,
}

impl Report {
    fn wants(&self, id: usize) -> bool {
        self.only.as_ref().is_none_or(|v| v.contains(&id))
    }

    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String, t: Instant) {
        if !pass {
            self.failed.push(id);
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {detail} ({:.1}s)", t.elapsed().as_secs_f64());
    }

    fn error(&mut self, id: usize, name: &str, e: impl std::fmt::Display, t: Instant) {
        self.line(id, name, false, format!("error: {e}"), t);
    }
}

fn power(d: usize, alpha: f64, l: u32, r: u64, tol: f64) -> lrop::Result<StepKernel> {
    StepKernel::build(KernelSpec::power_law(d, alpha, l, r).with_tail_tol(tol))
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn kernel_exactness(rep: &mut Report) {
    let t = Instant::now();
    let mut worst_mass: f64 = 0.0;
    let mut ok = true;
    let mut detail = Vec::new();
    for d in 1..=3usize {
        for a in [0.5, 1.0, 2.0, 3.0] {
            let r = [1 << 12, 256, 48][d - 1];
            match power(d, a, 2, r, 0.999) {
                Ok(k) => worst_mass = worst_mass.max((k.total_mass() - 1.0).abs()),
                Err(e) => return rep.error(1, "kernel exactness", e, t),
            }
        }
    }
    ok &= worst_mass <= MASS_TOL;
    let target = d1_alpha1_origin_mass();
    let mut last = f64::INFINITY;
    for j in 10..=22 {
        let k = match power(1, 1.0, 1, 1 << j, 0.5) {
            Ok(k) => k,
            Err(e) => return rep.error(1, "kernel exactness", e, t),
        };
        let d0 = k.mass(&[0]);
        let err = d0 - target;
        let bound = d0 * k.tail_mass_bound() + 1e-15;
        ok &= err >= -1e-15 && err <= bound && err.abs() < last;
        last = err.abs();
        if j % 4 == 2 {
            detail.push(format!("R=2^{j} err {err:.2e} <= {bound:.2e}"));
        }
    }
    rep.line(
        1,
        "kernel exactness",
        ok,
        format!("max |sum D - 1| = {worst_mass:.1e}; D(0) -> {target:.12}: {}", detail.join(", ")),
        t,
    );
}

fn spectrum_radius(d: usize) -> u64 {
    if d == 1 {
        1 << 22
    } else {
        11_000
    }
}

fn spectrum(rep: &mut Report) {
    let t = Instant::now();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut misses = Vec::new();
    let mut log_ok = true;
    for d in [1usize, 2] {
        for l in [4u32, 8] {
            for a in ALPHAS.iter().copied().chain([2.0]) {
                let fit = match power(d, a, l, spectrum_radius(d), 0.99).and_then(|k| spectral_asymptotics(&k, None)) {
                    Ok(f) => f,
                    Err(e) => return rep.error(2, "spectral exponent", e, t),
                };
                if a == 2.0 {
                    log_ok &= fit.log_residual < fit.power_residual;
                    continue;
                }
                let dev = (fit.exponent - a.min(2.0)).abs();
                if dev > worst.0 {
                    worst = (dev, format!("d={d} L={l} a={a}"));
                }
                if dev > EXPONENT_TOL {
                    misses.push(format!("d={d} L={l} a={a}: {:.3}", fit.exponent));
                }
            }
        }
    }
    rep.line(
        2,
        "spectral exponent",
        misses.is_empty() && log_ok,
        format!(
            "max |s - a^2| = {:.3} at {} (tol {EXPONENT_TOL}); alpha=2 log model better: {log_ok}; misses [{}]",
            worst.0,
            worst.1,
            misses.join("; ")
        ),
        t,
    );
}

/// Torus side: twice the walk's reach `L n^{1/(α∧2)}` at `n = 512`, within
/// the node budget in `d = 2`.
fn heat_grid(d: usize, l: u32, a: f64) -> usize {
    if d == 1 {
        return 1 << 22;
    }
    let reach = 2.0 * l as f64 * 512f64.powf(1.0 / a.min(2.0));
    (reach as usize).next_power_of_two().clamp(2048, 8192)
}

fn heat_kernel(rep: &mut Report) {
    let t = Instant::now();
    let ns = doubling_list(512);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut misses = Vec::new();
    for d in [1usize, 2] {
        for l in [4u32, 8] {
            for a in ALPHAS {
                let m = heat_grid(d, l, a);
                let grid = TorusGrid::new(d, m).expect("grid");
                let r = (m / 2 - 1) as u64;
                let rep_k = match power(d, a, l, r, 0.99).and_then(|k| heat_kernel_bound_report(&k, &ns, &grid)) {
                    Ok(h) => h,
                    Err(e) => return rep.error(3, "heat-kernel bound", e, t),
                };
                if rep_k.spread > worst.0 {
                    worst = (rep_k.spread, format!("d={d} L={l} a={a}"));
                }
                if !(rep_k.spread < HEAT_SPREAD) {
                    misses.push(format!("d={d} L={l} a={a}: {:.2}", rep_k.spread));
                }
            }
        }
    }
    rep.line(
        3,
        "heat-kernel bound",
        misses.is_empty(),
        format!("max spread over n in [4,512] = {:.2} at {} (< {HEAT_SPREAD}); misses [{}]", worst.0, worst.1, misses.join("; ")),
        t,
    );
}

fn shells(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut err: f64 = 0.0;
    let mut worst: (f64, String) = (0.0, String::new());
    for d in [1usize, 2] {
        let r = if d == 1 { 1 << 16 } else { 2048 };
        for l in [4u32, 8] {
            for a in ALPHAS.iter().copied().chain([2.0]) {
                let k = match power(d, a, l, r, 0.99) {
                    Ok(k) => k,
                    Err(e) => return rep.error(4, "shell partition", e, t),
                };
                for _ in 0..100 {
                    let kv: Vec<f64> = (0..d).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
                    err = err.max(shell_decomposition(&k, &kv).partition_error());
                }
                let mut ratios = [Vec::new(), Vec::new(), Vec::new()];
                for i in 0..16 {
                    let mut kv = vec![0.0; d];
                    kv[0] = 0.1 * 10f64.powf(i as f64 / 15.0) / l as f64;
                    let s = shell_decomposition(&k, &kv);
                    err = err.max(s.partition_error());
                    ratios[0].push(s.ratio1);
                    ratios[1].push(s.ratio2);
                    ratios[2].push(s.ratio3);
                }
                for (j, v) in ratios.iter().enumerate() {
                    let s = spread(v);
                    if !(s <= worst.0) {
                        worst = (s, format!("S{} d={d} L={l} a={a}", j + 1));
                    }
                }
            }
        }
    }
    rep.line(
        4,
        "shell partition",
        err <= PARTITION_TOL && worst.0 <= SHELL_SPREAD,
        format!("partition error {err:.1e}; max ratio spread {:.2} at {} (<= {SHELL_SPREAD})", worst.0, worst.1),
        t,
    );
}

fn gap(v: &DiagramValue) -> Option<f64> {
    v.discrepancy()
}

fn parseval(rep: &mut Report) {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, a, r) in [(1usize, 0.4, 1u64 << 22), (2, 0.9, 11_000), (4, 1.5, 190)] {
        let k = match power(d, a, 4, r, 0.99) {
            Ok(k) => k,
            Err(e) => return rep.error(5, "Parseval cross-check", e, t),
        };
        let m = default_grid(d);
        let coarse = diagram_values(&k, &DiagramOptions { m: Some(m), ..Default::default() });
        let fine = diagram_values(&k, &DiagramOptions { m: Some(2 * m), ..Default::default() });
        let (c, f) = match (coarse, fine) {
            (Ok(c), Ok(f)) => (c, f),
            (c, f) => {
                ok = false;
                let e = c.err().or(f.err()).expect("one failed");
                parts.push(format!("(d={d},a={a}) M={m}/{}: {e}", 2 * m));
                continue;
            }
        };
        for (name, vc, vf) in [("triangle", &c.triangle, &f.triangle), ("bubble", &c.bubble, &f.bubble)] {
            match (gap(vc), gap(vf)) {
                (Some(g0), Some(g1)) => {
                    let pass = g0 <= PARSEVAL_TOL && g1 <= 0.5 * g0;
                    ok &= pass;
                    parts.push(format!("(d={d},a={a}) {name} gap {g0:.2e} -> {g1:.2e}{}", if pass { "" } else { " x" }));
                }
                _ => {
                    ok = false;
                    parts.push(format!("(d={d},a={a}) {name} not converged"));
                }
            }
        }
    }
    rep.line(5, "Parseval cross-check", ok, parts.join("; "), t);
}

/// Shared Monte Carlo state for criteria 6, 8, 9 and 10.
struct McContext {
    kernel: StepKernel,
    pred: f64,
    corr: f64,
    p_c: Option<(f64, f64)>,
}

fn mc_kernel() -> lrop::Result<StepKernel> {
    power(4, 1.5, 4, MC_RADIUS, MC_TAIL_TOL)
}

fn critical_point(rep: &mut Report, ctx: &mut Option<McContext>) {
    let t = Instant::now();
    let name = "critical point";
    let mut corr = Vec::new();
    for l in [2u32, 4, 8] {
        match power(4, 1.5, l, 190, 0.99).and_then(|k| pc_prediction(&k, &DiagramOptions::default())) {
            Ok(p) => corr.push(p.correction),
            Err(e) => return rep.error(6, name, e, t),
        }
    }
    let ratios = [corr[0] / corr[1], corr[1] / corr[2]];
    let scaling_ok = ratios.iter().all(|r| (r / 16.0 - 1.0).abs() <= SCALING_TOL);
    let k = match mc_kernel() {
        Ok(k) => k,
        Err(e) => return rep.error(6, name, e, t),
    };
    let pred = match pc_prediction(&k, &DiagramOptions::default()) {
        Ok(p) => p,
        Err(e) => return rep.error(6, name, e, t),
    };
    let opts = PcSearchOptions {
        n_max: N_MAX,
        replicas: PC_REPLICAS,
        tol: PC_TOL,
        ..Default::default()
    };
    let est = match find_pc(&k, PC_BRACKET, &opts) {
        Ok(e) => e,
        Err(e) => return rep.error(6, name, e, t),
    };
    let allowed = (3.0 * est.statistical).max(5.0 * pred.correction.powi(2));
    let diff = (est.p_c - pred.value).abs();
    rep.line(
        6,
        name,
        scaling_ok && diff <= allowed,
        format!(
            "L-ratios of (pred-1) {:.2}, {:.2} (16 ± {:.0}%); pred {:.6} vs p_c {:.6} ± {:.1e}: |diff| {diff:.1e} <= {allowed:.1e}",
            ratios[0],
            ratios[1],
            SCALING_TOL * 100.0,
            pred.value,
            est.p_c,
            est.statistical
        ),
        t,
    );
    *ctx = Some(McContext {
        kernel: k,
        pred: pred.value,
        corr: pred.correction,
        p_c: Some((est.p_c, est.statistical)),
    });
}

fn expansion_step(rep: &mut Report) {
    let t = Instant::now();
    match oracle_report(0.5, 3, 200_000, 7) {
        Ok(r) => {
            let zs: Vec<String> = r.rows.iter().map(|x| format!("n={} z={:+.2}", x.n, x.z)).collect();
            let z_ok = r.rows.iter().all(|x| x.z.abs() <= Z_SIGMA);
            rep.line(
                7,
                "expansion step",
                r.expansion_residual <= RESIDUAL_TOL && z_ok,
                format!("residual {:.1e} over {} configurations; {}", r.expansion_residual, r.expansion_configurations, zs.join(", ")),
                t,
            );
        }
        Err(e) => rep.error(7, "expansion step", e, t),
    }
}

/// `p̂_c` from criterion 6, or a fresh kernel with the prediction when
/// criterion 6 was skipped.
fn context(ctx: &mut Option<McContext>) -> lrop::Result<&McContext> {
    if ctx.is_none() {
        let k = mc_kernel()?;
        let pred = pc_prediction(&k, &DiagramOptions::default())?;
        *ctx = Some(McContext {
            kernel: k,
            pred: pred.value,
            corr: pred.correction,
            p_c: None,
        });
    }
    Ok(ctx.as_ref().expect("set"))
}

fn p_at(c: &McContext) -> (f64, f64, &'static str) {
    match c.p_c {
        Some((p, se)) => (p, se, "p_c"),
        None => (c.pred, c.corr * c.corr, "prediction"),
    }
}

fn growth(rep: &mut Report, ctx: &mut Option<McContext>) {
    let t = Instant::now();
    let name = "growth at p_c";
    let c = match context(ctx) {
        Ok(c) => c,
        Err(e) => return rep.error(8, name, e, t),
    };
    let (p, _, src) = p_at(c);
    let probes = ProbeSet::Fixed { k: vec![vec![0.0; 4]] };
    let fit = estimate_two_point_transform(&c.kernel, p, N_MAX, &probes, MC_REPLICAS, 8, &McOptions::default())
        .and_then(|tab| fit_growth(&tab, Window::new(GROWTH_WINDOW.0, GROWTH_WINDOW.1)));
    match fit {
        Ok(g) => rep.line(
            8,
            name,
            g.eta.abs() <= ETA_TOL && (C1_BAND.0..=C1_BAND.1).contains(&g.c1),
            format!(
                "{src} {p:.6}, window {:?}: eta {:+.3} ± {:.3}, C1 {:.3} ± {:.3}, m {:.6}",
                g.window,
                g.eta,
                g.eta_se,
                g.c1,
                g.c1 * g.log_c1_se,
                g.m
            ),
            t,
        ),
        Err(e) => rep.error(8, name, e, t),
    }
}

fn limit_shape(rep: &mut Report, ctx: &mut Option<McContext>) {
    let t = Instant::now();
    let name = "limit shape";
    let rw = power(1, 1.2, 4, 1 << 20, 0.99).and_then(|k| {
        let fit = spectral_asymptotics(&k, None)?;
        rw_shape_fit(&k, &fit, &SHAPE_K, &[16, 64, 256, 1024, 4096], SHAPE_BAND)
    });
    let rw = match rw {
        Ok(s) => s,
        Err(e) => return rep.error(9, name, e, t),
    };
    let rw_c = rw.per_n.last().expect("rows").c_hat;
    let rw_ok = (rw_c - 1.0).abs() <= RW_TOL;
    let c = match context(ctx) {
        Ok(c) => c,
        Err(e) => return rep.error(9, name, e, t),
    };
    let (p, _, src) = p_at(c);
    let run = ShapeRun {
        p,
        replicas: MC_REPLICAS,
        seed: 9,
        band: SHAPE_BAND,
        k_window: None,
        mc: McOptions::default(),
    };
    match fit_limit_shape(&c.kernel, &SHAPE_K, &SHAPE_N, &run) {
        Ok((s, _)) => {
            let per_n: Vec<String> = s.per_n.iter().map(|x| format!("n={} {:.3}", x.n, x.c_hat)).collect();
            rep.line(
                9,
                name,
                rw_ok && s.in_band && s.monotone,
                format!(
                    "random walk C(4096) {rw_c:.4} (1 ± {RW_TOL}); percolation at {src} {p:.6}: C {:.3} ± {:.3} in {SHAPE_BAND:?}: {}, monotone: {} [{}]",
                    s.c_hat,
                    s.c_se,
                    s.in_band,
                    s.monotone,
                    per_n.join(", ")
                ),
                t,
            );
        }
        Err(e) => rep.error(9, name, e, t),
    }
}

fn exponents(rep: &mut Report, ctx: &mut Option<McContext>) {
    let t = Instant::now();
    let name = "exponents";
    let c = match context(ctx) {
        Ok(c) => c,
        Err(e) => return rep.error(10, name, e, t),
    };
    let (p_c, p_c_se, src) = p_at(c);
    let probes = ProbeSet::Fixed { k: vec![vec![0.0; 4]] };
    let mut sweep = Vec::new();
    for eps in SWEEP_EPS {
        let n_max = (SWEEP_HORIZON / eps).ceil() as usize;
        let pt = estimate_two_point_transform(&c.kernel, p_c * (1.0 - eps), n_max, &probes, MC_REPLICAS, 10, &McOptions::default())
            .and_then(|tab| sweep_point(&tab, Window::new(n_max / 4, n_max), 0.0));
        match pt {
            Ok(s) => sweep.push(s),
            Err(e) => return rep.error(10, name, e, t),
        }
    }
    match exponent_fits(&sweep, p_c, p_c_se) {
        Ok(f) => rep.line(
            10,
            name,
            (f.gamma - 1.0).abs() <= GAMMA_TOL && (f.tau - 1.0).abs() <= TAU_TOL,
            format!(
                "{src} {p_c:.6}: gamma {:.3} ± {:.3} (1 ± {GAMMA_TOL}), tau {:.3} ± {:.3} (1 ± {TAU_TOL}), {} points",
                f.gamma, f.gamma_se, f.tau, f.tau_se, f.used
            ),
            t,
        ),
        Err(e) => rep.error(10, name, e, t),
    }
}

fn random_config(rng: &mut ChaCha8Rng) -> ExperimentConfig {
    let d = rng.gen_range(1..=4);
    let l = rng.gen_range(1..10);
    let profile = [Profile::PowerLaw, Profile::Box, Profile::PuncturedBox][rng.gen_range(0..3)];
    let replicas = rng.gen_range(1..1_000_000);
    let n_max = rng.gen_range(1..512);
    let site_cap = rng.gen_range(1..10_000_000);
    let lo = rng.gen_range(0.5..1.0);
    ExperimentConfig {
        seed: rng.gen_range(0..i64::MAX as u64),
        output: rng.gen_bool(0.5).then(|| format!("out{}", rng.gen::<u16>()).into()),
        kernel: KernelSpec {
            d,
            alpha: rng.gen_range(0.05..4.0),
            l,
            profile,
            radius: l as u64 + rng.gen_range(0..1000),
            tail_tol: rng.gen_range(1e-9..0.99),
        },
        simulate: SimulateParams {
            p: rng.gen_range(0.0..3.0),
            n_max,
            replicas,
            probes: rng.gen_bool(0.5).then(|| ProbeSet::Scaled {
                k: vec![vec![0.0; d], (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()],
                alpha: rng.gen_range(0.1..2.0),
                v: rng.gen_range(0.1..10.0),
            }),
            site_cap,
            checkpoint_every: CHUNK * rng.gen_range(1..64),
        },
        pc_search: PcSearchParams {
            bracket: (lo, lo + rng.gen_range(1e-4..1.0)),
            n_max,
            replicas,
            window: Window::new(rng.gen_range(0..50), rng.gen_range(50..400)),
            tol: rng.gen_range(1e-6..0.1),
            max_iter: rng.gen_range(1..40),
            site_cap,
        },
        analyze: AnalyzeParams {
            shape_n: (0..rng.gen_range(0..4)).map(|_| rng.gen_range(1..1024)).collect(),
            p_c: rng.gen_bool(0.5).then(|| rng.gen_range(0.5..2.0)),
            p_c_se: rng.gen_range(0.0..0.01),
            sweep: SweepParams {
                eps: (0..rng.gen_range(1..8)).map(|_| rng.gen_range(0.001..0.999)).collect(),
                replicas,
                horizon: rng.gen_range(0.1..20.0),
                window_div: rng.gen_range(1..16),
                margin: rng.gen_range(-1.0..1.0),
            },
            ..Default::default()
        },
        oracle: OracleParams {
            p: rng.gen_range(0.0..=1.0),
            replicas,
            n_max: rng.gen_range(1..4),
        },
        ..Default::default()
    }
}

fn infrastructure(rep: &mut Report) {
    let t = Instant::now();
    let name = "infrastructure";
    let mut notes = Vec::new();
    let root = match tempfile::tempdir() {
        Ok(r) => r,
        Err(e) => return rep.error(11, name, e, t),
    };
    // determinism: identical configs give identical file digests
    let mut cfg = ExperimentConfig {
        seed: 5,
        kernel: KernelSpec::power_law(2, 1.5, 2, 40).with_tail_tol(0.2),
        ..Default::default()
    };
    cfg.simulate.n_max = 24;
    cfg.simulate.replicas = 2000;
    cfg.simulate.p = 0.9;
    cfg.simulate.checkpoint_every = 1024;
    let digests = |sub: &str| -> lrop::Result<Vec<(String, String)>> {
        let opts = RunOptions {
            root: root.path().join(sub),
            resume: false,
            budget: None,
            max_dump_sites: None,
        };
        run(Subcommand::Simulate, &cfg, &opts)?;
        let rec = RunRecord::load(&opts.root.join("simulate"))?;
        Ok(rec.files.into_iter().map(|f| (f.path, f.sha256)).collect())
    };
    let det = match (digests("a"), digests("b")) {
        (Ok(a), Ok(b)) => !a.is_empty() && a == b,
        _ => false,
    };
    notes.push(format!("determinism {det}"));

    // merge laws: commutative bit-exact, counts additive, chunked == unsplit
    let k = lrop::percolation::tiny_kernel();
    let mut merge_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = rng.gen_range(0.2..0.9);
        let seed = rng.gen_range(0..1000);
        let (a, b) = (rng.gen_range(1..300u64), rng.gen_range(1..300u64));
        let probes = ProbeSet::Fixed { k: vec![vec![0.0], vec![0.8]] };
        let s = BondFieldSampler::new(&k, p).expect("sampler");
        let mc = McOptions::default();
        let x = run_replicas(&s, 6, &probes, seed, (0, a), &mc).expect("mc");
        let y = run_replicas(&s, 6, &probes, seed, (a, a + b), &mc).expect("mc");
        let (mut xy, mut yx) = (x.clone(), y.clone());
        merge_ok &= xy.merge(&y).is_ok() && yx.merge(&x).is_ok() && xy == yx;
        merge_ok &= (0..=6).all(|n| xy.counts[n] == x.counts[n] + y.counts[n]) && xy.replicas() == a + b;
        let cut = CHUNK * rng.gen_range(0..3);
        let end = cut + rng.gen_range(1..1200);
        let mut whole = EstimatorTable::new(1, p, 6, probes.clone()).expect("table");
        let mut parts = whole.clone();
        merge_ok &= extend_table(&s, &mut whole, seed, end, &mc).is_ok()
            && extend_table(&s, &mut parts, seed, cut, &mc).is_ok()
            && extend_table(&s, &mut parts, seed, end, &mc).is_ok()
            && whole == parts;
    }
    notes.push(format!("merge laws {merge_ok}"));

    // config round trip over randomized configs
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut trips = 0;
    for _ in 0..100 {
        let c = random_config(&mut rng);
        let back = c.to_toml().and_then(|s| ExperimentConfig::from_toml(&s));
        if back.as_ref().ok() == Some(&c) {
            trips += 1;
        }
    }
    notes.push(format!("config round trip {trips}/100"));
    rep.line(11, name, det && merge_ok && trips == 100, notes.join(", "), t);
}

type Step = dyn Fn(&mut Report, &mut Option<McContext>);

fn main() {
    let only = std::env::var("LROP_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("LROP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut rep = Report { only, failed: Vec::new() };
    let mut ctx = None;
    let start = Instant::now();
    println!("acceptance report");
    let steps: [(usize, &Step); 11] = [
        (1, &|r, _| kernel_exactness(r)),
        (2, &|r, _| spectrum(r)),
        (3, &|r, _| heat_kernel(r)),
        (4, &|r, _| shells(r)),
        (5, &|r, _| parseval(r)),
        (6, &critical_point),
        (7, &|r, _| expansion_step(r)),
        (8, &growth),
        (9, &limit_shape),
        (10, &exponents),
        (11, &|r, _| infrastructure(r)),
    ];
    for (id, f) in steps {
        if rep.wants(id) {
            f(&mut rep, &mut ctx);
        }
    }
    println!(
        "acceptance: {} failed {:?} in {:.0}s",
        if rep.failed.is_empty() { "all passed" } else { "some" },
        rep.failed,
        start.elapsed().as_secs_f64()
    );
    if strict && !rep.failed.is_empty() {
        std::process::exit(1);
    }
}

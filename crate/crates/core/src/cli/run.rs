//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    exponent_fits, growth_report, limit_shape_from_table, sweep_point, ExponentFit, GrowthReport, ShapeFit,
    SweepPoint,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelMetadata, StepKernel};
use crate::percolation::{
    estimate_two_point_transform, exact_enumeration_two_point, extend_table, find_pc_with, group_tables,
    jackknife_slope, tiny_kernel, verify_expansion_step, BondFieldSampler, EstimatorTable, McOptions, PcEstimate,
    ProbeSet, SlopeStatistic, Window, CHUNK, DEFAULT_WORK_CAP, JACKKNIFE_GROUPS,
};
use crate::spectral::grid::MAX_NODES;
use crate::spectral::{
    doubling_list, heat_kernel_bound_report, pc_prediction, spectral_asymptotics, AsymptoticFit, HeatKernelReport,
    PcPrediction, TorusGrid,
};

use super::config::ExperimentConfig;
use super::record::{read_envelope, RunRecord, RunWriter, Status, RECORD_FILE};

/// The runner's subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Kernel,
    Spectral,
    PcFormula,
    Simulate,
    PcSearch,
    Analyze,
    OracleCheck,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Kernel => "kernel",
            Subcommand::Spectral => "spectral",
            Subcommand::PcFormula => "pc-formula",
            Subcommand::Simulate => "simulate",
            Subcommand::PcSearch => "pc-search",
            Subcommand::Analyze => "analyze",
            Subcommand::OracleCheck => "oracle-check",
        }
    }
}

/// Invocation settings that are not part of the experiment.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub root: PathBuf,
    /// Continue from checkpoints in the run directory.
    pub resume: bool,
    /// Replicas to add in this invocation before stopping as truncated.
    pub budget: Option<u64>,
    /// Largest kernel dump, in sites.
    pub max_dump_sites: Option<u64>,
}

/// Default cap on kernel dump size.
pub const DEFAULT_MAX_DUMP_SITES: u64 = 10_000_000;

/// Outcome of one subcommand body.
struct Outcome {
    status: Status,
    message: Option<String>,
}

impl Outcome {
    fn complete() -> Self {
        Self {
            status: Status::Complete,
            message: None,
        }
    }
}

/// Runs `sub` and writes its results and `run.json`. A failing run still
/// leaves a record with status `failed` before the error is returned.
pub fn run(sub: Subcommand, config: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    config.validate()?;
    let dir = config.run_dir(&opts.root, sub.name());
    let mut w = RunWriter::create(dir, sub.name(), config)?;
    let body = match sub {
        Subcommand::Kernel => run_kernel(&mut w, config, opts),
        Subcommand::Spectral => run_spectral(&mut w, config),
        Subcommand::PcFormula => run_pc_formula(&mut w, config),
        Subcommand::Simulate => run_simulate(&mut w, config, opts),
        Subcommand::PcSearch => run_pc_search(&mut w, config, opts),
        Subcommand::Analyze => run_analyze(&mut w, config, opts),
        Subcommand::OracleCheck => run_oracle(&mut w, config),
    };
    match body {
        Ok(o) => w.finish(o.status, o.message),
        Err(e) => {
            let status = if matches!(e, Error::Resource(_) | Error::WorkCap(_)) {
                Status::Truncated
            } else {
                Status::Failed
            };
            w.finish(status, Some(e.to_string()))?;
            Err(e)
        }
    }
}

fn build_kernel(w: &mut RunWriter, config: &ExperimentConfig) -> Result<StepKernel> {
    w.step("build kernel", || StepKernel::build(config.kernel.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub metadata: KernelMetadata,
    pub total_mass: f64,
    pub origin_mass: f64,
}

fn run_kernel(w: &mut RunWriter, config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let k = build_kernel(w, config)?;
    let mut buf = Vec::new();
    let cap = opts.max_dump_sites.unwrap_or(DEFAULT_MAX_DUMP_SITES);
    w.step("dump", || k.write_csv(&mut buf, cap))?;
    w.write_csv("kernel.csv", &String::from_utf8(buf).expect("ascii"))?;
    let summary = KernelSummary {
        metadata: k.metadata(),
        total_mass: k.total_mass(),
        origin_mass: k.mass(&vec![0; k.d()]),
    };
    w.write_json("kernel.json", &summary)?;
    Ok(Outcome::complete())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub heat: HeatKernelReport,
    pub asymptotics: AsymptoticFit,
}

/// Smallest power-of-two side keeping `D^{*n}`, `n <= n_max`, wrap-free.
pub fn wrap_free_side(d: usize, radius: u64, n_max: u64) -> Result<usize> {
    let need = 2 * radius.saturating_mul(n_max).max(radius + 1) + 1;
    let m = need.next_power_of_two();
    if (m as f64).powi(d as i32) > MAX_NODES as f64 {
        return Err(Error::Resource(format!(
            "wrap-free torus needs side {m} in d = {d}; exceeds {MAX_NODES} nodes (set spectral.m)"
        )));
    }
    Ok(m as usize)
}

fn run_spectral(w: &mut RunWriter, config: &ExperimentConfig) -> Result<Outcome> {
    let k = build_kernel(w, config)?;
    let s = &config.spectral;
    let m = match s.m {
        Some(m) => m,
        None => wrap_free_side(k.d(), k.radius(), s.n_max)?,
    };
    let grid = TorusGrid::new(k.d(), m)?;
    let heat = w.step("heat kernel", || heat_kernel_bound_report(&k, &doubling_list(s.n_max), &grid))?;
    let fit = w.step("asymptotics", || spectral_asymptotics(&k, s.k_window))?;
    let mut csv = String::from("n,value\n");
    for r in &heat.rows {
        writeln!(csv, "{},{:.17e}", r.n, r.scaled).unwrap();
    }
    w.write_csv("heat_kernel.csv", &csv)?;
    let mut csv = String::from("k,value\n");
    for (kk, v) in &fit.samples {
        writeln!(csv, "{kk:.17e},{v:.17e}").unwrap();
    }
    w.write_csv("one_minus_dhat.csv", &csv)?;
    w.write_json(
        "spectral.json",
        &SpectralSummary {
            heat,
            asymptotics: fit,
        },
    )?;
    Ok(Outcome::complete())
}

fn run_pc_formula(w: &mut RunWriter, config: &ExperimentConfig) -> Result<Outcome> {
    let k = build_kernel(w, config)?;
    let pred: PcPrediction = w.step("diagrams", || pc_prediction(&k, &config.diagrams.options()))?;
    w.write_json("pc_formula.json", &pred)?;
    Ok(Outcome::complete())
}

fn checkpoint_every(config: &ExperimentConfig) -> Result<u64> {
    let e = config.simulate.checkpoint_every;
    if !e.is_multiple_of(CHUNK) {
        return Err(Error::Config(format!(
            "simulate.checkpoint_every: must be a multiple of {CHUNK}"
        )));
    }
    Ok(e)
}

fn run_simulate(w: &mut RunWriter, config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let s = &config.simulate;
    let every = checkpoint_every(config)?;
    let k = build_kernel(w, config)?;
    let sampler = BondFieldSampler::new(&k, s.p)?;
    let mc = McOptions { site_cap: s.site_cap };
    let resumed = if opts.resume {
        w.resume_json::<EstimatorTable>("table.json")?
    } else {
        None
    };
    let mut table = match resumed {
        Some(t) => t,
        None => EstimatorTable::new(k.d(), s.p, s.n_max, s.probes(k.d()))?,
    };
    let mut done = table.replicas();
    // budgets stop on chunk boundaries so a resumed run folds the same units
    let limit = match opts.budget {
        Some(b) => (done + b.div_ceil(CHUNK) * CHUNK).min(s.replicas),
        None => s.replicas,
    };
    while done < limit {
        let next = ((done / every + 1) * every).min(limit);
        w.step("replicas", || extend_table(&sampler, &mut table, config.seed, next, &mc))?;
        w.write_json("table.json", &table)?;
        done = next;
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    w.write_csv("two_point.csv", &String::from_utf8(csv).expect("ascii"))?;
    if table.replicas() == 0 {
        w.write_json("table.json", &table)?;
    }
    let capped = table.truncated.iter().any(|&t| t > 0);
    if done < s.replicas {
        return Ok(Outcome {
            status: Status::Truncated,
            message: Some(format!("budget reached at {done} of {} replicas; rerun with --resume", s.replicas)),
        });
    }
    if capped {
        return Ok(Outcome {
            status: Status::Truncated,
            message: Some(format!(
                "{} replicas hit the site cap {}",
                table.truncated[table.n_max], s.site_cap
            )),
        });
    }
    Ok(Outcome::complete())
}

/// Slope evaluations of a search, kept for resume.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlopeCache {
    pub points: Vec<(f64, SlopeStatistic)>,
}

fn run_pc_search(w: &mut RunWriter, config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let q = &config.pc_search;
    let k = build_kernel(w, config)?;
    let search = q.options(config.seed);
    let mut cache = if opts.resume {
        w.resume_json::<SlopeCache>("slopes.json")?.unwrap_or_default()
    } else {
        SlopeCache::default()
    };
    let probes = ProbeSet::Fixed {
        k: vec![vec![0.0; k.d()]],
    };
    let t = std::time::Instant::now();
    let est: Result<PcEstimate> = find_pc_with(q.bracket, &search, |p| {
        if let Some((_, s)) = cache.points.iter().find(|(x, _)| x.to_bits() == p.to_bits()) {
            return Ok(*s);
        }
        let groups = group_tables(&k, p, search.n_max, &probes, search.replicas, search.seed, &search.mc, JACKKNIFE_GROUPS)?;
        let s = jackknife_slope(&groups, search.window)?;
        cache.points.push((p, s));
        w.write_json("slopes.json", &cache)?;
        Ok(s)
    });
    w.record("bisection", t.elapsed().as_secs_f64());
    let est = est?;
    let mut csv = String::from("iter,p,slope,slope_se,lo,hi\n");
    for s in &est.trajectory {
        writeln!(
            csv,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            s.iter, s.p, s.slope, s.slope_se, s.lo, s.hi
        )
        .unwrap();
    }
    w.write_csv("bisection.csv", &csv)?;
    w.write_json("pc_search.json", &est)?;
    Ok(Outcome::complete())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub p_c: f64,
    pub p_c_se: f64,
    pub points: Vec<SweepPoint>,
    pub fit: Option<ExponentFit>,
    pub fit_error: Option<String>,
}

/// Table path for `analyze`: explicit input, else the `simulate` run under
/// the output root.
pub fn analyze_input(config: &ExperimentConfig, root: &Path) -> PathBuf {
    config
        .analyze
        .input
        .clone()
        .unwrap_or_else(|| root.join("simulate").join("table.json"))
}

fn plot_csv(rows: impl IntoIterator<Item = (f64, f64, f64, f64)>) -> String {
    let mut csv = String::from("x,y,yerr,model\n");
    for (x, y, e, m) in rows {
        writeln!(csv, "{x:.17e},{y:.17e},{e:.17e},{m:.17e}").unwrap();
    }
    csv
}

fn run_analyze(w: &mut RunWriter, config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let a = &config.analyze;
    let input = analyze_input(config, &opts.root);
    let mut did = false;
    if input.exists() || a.input.is_some() {
        let table: EstimatorTable = read_envelope(&input)?.result;
        let growth: GrowthReport = w.step("growth fit", || growth_report(&table, a.growth_window))?;
        let rows = table
            .zero_series()
            .into_iter()
            .filter(|e| e.n >= 1 && e.valid())
            .map(|e| (e.n as f64, e.mean_re, e.stderr, growth.fit.model(e.n as f64)));
        w.write_csv("growth_plot.csv", &plot_csv(rows))?;
        w.write_json("growth.json", &growth)?;
        if matches!(table.probes, ProbeSet::Scaled { .. }) && !a.shape_n.is_empty() {
            let index = config.kernel.stable_index();
            let shape: ShapeFit = limit_shape_from_table(&table, index, &a.shape_n, a.shape_band)?;
            let last = *a.shape_n.iter().max().expect("nonempty");
            let rows = shape
                .rows
                .iter()
                .filter(|r| r.n == last)
                .map(|r| (r.absk, r.ratio, r.err, shape.model_ratio(r.absk)));
            w.write_csv("shape_plot.csv", &plot_csv(rows))?;
            w.write_json("shape.json", &shape)?;
        }
        did = true;
    }
    if let Some(p_c) = a.p_c {
        let k = build_kernel(w, config)?;
        let sw = &a.sweep;
        let mut points: Vec<SweepPoint> = if opts.resume {
            w.resume_json::<SweepReport>("sweep.json")?.map(|r| r.points).unwrap_or_default()
        } else {
            Vec::new()
        };
        let probes = ProbeSet::Fixed {
            k: vec![vec![0.0; k.d()]],
        };
        let mc = McOptions {
            site_cap: config.simulate.site_cap,
        };
        for &eps in &sw.eps {
            let p = p_c * (1.0 - eps);
            if points.iter().any(|s| s.p.to_bits() == p.to_bits()) {
                continue;
            }
            let n_max = ((sw.horizon / eps).ceil() as usize).max(2 * sw.window_div);
            let table = w.step("sweep point", || {
                estimate_two_point_transform(&k, p, n_max, &probes, sw.replicas, config.seed, &mc)
            })?;
            points.push(sweep_point(&table, Window::new(n_max / sw.window_div, n_max), sw.margin)?);
            let partial = SweepReport {
                p_c,
                p_c_se: a.p_c_se,
                points: points.clone(),
                fit: None,
                fit_error: None,
            };
            w.write_json("sweep.json", &partial)?;
        }
        let (fit, fit_error) = match exponent_fits(&points, p_c, a.p_c_se) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(f) = &fit {
            // amplitude of χ ≈ A (p_c - p)^{-γ} from the log-mean
            let used: Vec<&SweepPoint> = points.iter().filter(|s| s.subcritical && s.chi > 0.0).collect();
            let log_a = used.iter().map(|s| s.chi.ln() + f.gamma * (p_c - s.p).ln()).sum::<f64>() / used.len() as f64;
            let rows = used.iter().map(|s| {
                let x = p_c - s.p;
                (x, s.chi, s.chi_se, (log_a - f.gamma * x.ln()).exp())
            });
            w.write_csv("sweep_plot.csv", &plot_csv(rows))?;
        }
        let report = SweepReport {
            p_c,
            p_c_se: a.p_c_se,
            points,
            fit,
            fit_error: fit_error.clone(),
        };
        w.write_json("sweep.json", &report)?;
        if let Some(e) = fit_error {
            return Err(Error::Fit(e));
        }
        did = true;
    }
    if !did {
        return Err(Error::Config(format!(
            "analyze: no table at {} and analyze.p_c unset",
            input.display()
        )));
    }
    Ok(Outcome::complete())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub n: usize,
    pub exact: f64,
    pub mc: f64,
    pub stderr: f64,
    /// `(mc - exact) / stderr`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub p: f64,
    pub expansion_n: usize,
    pub expansion_residual: f64,
    pub expansion_bonds: usize,
    pub expansion_configurations: u64,
    pub rows: Vec<OracleRow>,
    pub residual_ok: bool,
    pub mc_ok: bool,
}

/// Residual tolerance of the expansion identity.
pub const EXPANSION_TOL: f64 = 1e-12;

/// Expansion identity and Monte Carlo against exact enumeration on the
/// three-site box kernel.
pub fn oracle_report(p: f64, n_max: usize, replicas: u64, seed: u64) -> Result<OracleReport> {
    let k = tiny_kernel();
    let check = verify_expansion_step(&k, p, 2, DEFAULT_WORK_CAP)?;
    let exact = exact_enumeration_two_point(&k, p, n_max, DEFAULT_WORK_CAP)?;
    let probes = ProbeSet::Fixed { k: vec![vec![0.0]] };
    let table = estimate_two_point_transform(&k, p, n_max, &probes, replicas, seed, &McOptions::default())?;
    let rows: Vec<OracleRow> = (1..=n_max)
        .map(|n| {
            let c = table.cell(0, n);
            let ex = exact.z0(n);
            OracleRow {
                n,
                exact: ex,
                mc: c.mean_re,
                stderr: c.stderr,
                z: (c.mean_re - ex) / c.stderr,
            }
        })
        .collect();
    Ok(OracleReport {
        p,
        expansion_n: check.n,
        expansion_residual: check.residual,
        expansion_bonds: check.bonds,
        expansion_configurations: check.configurations,
        residual_ok: check.residual <= EXPANSION_TOL,
        mc_ok: rows.iter().all(|r| r.z.abs() <= 3.0),
        rows,
    })
}

fn run_oracle(w: &mut RunWriter, config: &ExperimentConfig) -> Result<Outcome> {
    let o = &config.oracle;
    let rep = w.step("oracles", || oracle_report(o.p, o.n_max, o.replicas, config.seed))?;
    w.write_json("oracle.json", &rep)?;
    if !(rep.residual_ok && rep.mc_ok) {
        return Err(Error::Divergent(format!(
            "oracle mismatch: residual {:.3e}, max |z| {:.2}",
            rep.expansion_residual,
            rep.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
        )));
    }
    Ok(Outcome::complete())
}

/// Figure tags understood by [`emit_plot`].
pub const PLOT_TAGS: [&str; 3] = ["limit-shape", "growth", "spectral"];

/// Writes plot data for `tag` from the completed run in `run_dir` and
/// returns the CSV text.
pub fn emit_plot(run_dir: &Path, tag: &str) -> Result<String> {
    if !PLOT_TAGS.contains(&tag) {
        return Err(Error::Config(format!(
            "unknown plot tag `{tag}`; valid tags: {}",
            PLOT_TAGS.join(", ")
        )));
    }
    let rec = RunRecord::load(run_dir).map_err(|e| {
        Error::Config(format!("no readable {RECORD_FILE} in {}: {e}", run_dir.display()))
    })?;
    if rec.status == Status::Failed {
        return Err(Error::Config(format!("run in {} failed", run_dir.display())));
    }
    let mut csv = format!("# config_sha256={}\n", rec.config_digest);
    match tag {
        "limit-shape" => {
            let s: ShapeFit = read_envelope(&run_dir.join("shape.json"))?.result;
            let last = s.rows.iter().map(|r| r.n).max().unwrap_or(0);
            csv.push_str("absk,ratio,err,model_ratio\n");
            for r in s.rows.iter().filter(|r| r.n == last) {
                writeln!(csv, "{:.17e},{:.17e},{:.17e},{:.17e}", r.absk, r.ratio, r.err, s.model_ratio(r.absk)).unwrap();
            }
        }
        "growth" => {
            let g: GrowthReport = read_envelope(&run_dir.join("growth.json"))?.result;
            let input = analyze_input(&rec.config, run_dir.parent().unwrap_or(Path::new(".")));
            let table: EstimatorTable = read_envelope(&input)?.result;
            csv.push_str("n,z0,err,fit\n");
            for e in table.zero_series().into_iter().filter(|e| e.n >= 1 && e.valid()) {
                writeln!(csv, "{},{:.17e},{:.17e},{:.17e}", e.n, e.mean_re, e.stderr, g.fit.model(e.n as f64)).unwrap();
            }
        }
        _ => {
            let s: SpectralSummary = read_envelope(&run_dir.join("spectral.json"))?.result;
            csv.push_str("absk,one_minus_dhat,powerlaw_fit\n");
            let f = &s.asymptotics;
            for &(k, v) in &f.samples {
                writeln!(csv, "{k:.17e},{v:.17e},{:.17e}", f.power_v * k.powf(f.power_slope)).unwrap();
            }
        }
    }
    std::fs::write(run_dir.join(format!("plot_{tag}.csv")), &csv)?;
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_free_side_is_power_of_two() {
        let m = wrap_free_side(1, 10, 8).unwrap();
        assert!(m.is_power_of_two() && m as u64 > 2 * 10 * 8);
        assert!(matches!(wrap_free_side(4, 1000, 512), Err(Error::Resource(_))));
    }

    #[test]
    fn unknown_tag_lists_valid_tags() {
        let e = emit_plot(Path::new("/nonexistent"), "nope").unwrap_err();
        let msg = e.to_string();
        assert!(PLOT_TAGS.iter().all(|t| msg.contains(t)), "{msg}");
    }

    #[test]
    fn oracle_passes_on_tiny_kernel() {
        let r = oracle_report(0.5, 3, 20_000, 5).unwrap();
        assert!(r.residual_ok, "{}", r.expansion_residual);
        assert!(r.mc_ok, "{:?}", r.rows);
    }
}

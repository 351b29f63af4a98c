//! Versioned experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::percolation::{McOptions, PcSearchOptions, ProbeSet, Window, DEFAULT_SITE_CAP};
use crate::spectral::{DiagramOptions, KWindow};

/// Schema version written into every config.
pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the output root.
pub const OUTPUT_ROOT_ENV: &str = "LROP_OUTPUT_ROOT";

/// Heat-kernel and small-`|k|` settings for `spectral`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    /// Largest `n` in the heat-kernel report.
    pub n_max: u64,
    /// Torus side for convolution powers; `None` picks the smallest
    /// wrap-free power of two.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub k_window: Option<KWindow>,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            n_max: 64,
            m: None,
            k_window: None,
        }
    }
}

/// Diagram settings for `pc-formula`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramParams {
    #[serde(default)]
    pub m: Option<usize>,
    pub n_terms: usize,
    pub reach: f64,
}

impl Default for DiagramParams {
    fn default() -> Self {
        let o = DiagramOptions::default();
        Self {
            m: o.m,
            n_terms: o.n_terms,
            reach: o.reach,
        }
    }
}

impl DiagramParams {
    pub fn options(&self) -> DiagramOptions {
        DiagramOptions {
            m: self.m,
            n_terms: self.n_terms,
            reach: self.reach,
        }
    }
}

/// Monte Carlo settings for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub p: f64,
    pub n_max: usize,
    pub replicas: u64,
    /// `None` means the single probe `k = 0`.
    #[serde(default)]
    pub probes: Option<ProbeSet>,
    pub site_cap: usize,
    /// Replicas between checkpoints.
    pub checkpoint_every: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            n_max: 64,
            replicas: 10_000,
            probes: None,
            site_cap: DEFAULT_SITE_CAP,
            checkpoint_every: 8192,
        }
    }
}

impl SimulateParams {
    pub fn probes(&self, d: usize) -> ProbeSet {
        self.probes.clone().unwrap_or(ProbeSet::Fixed { k: vec![vec![0.0; d]] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcSearchParams {
    pub bracket: (f64, f64),
    pub n_max: usize,
    pub replicas: u64,
    #[serde(default)]
    pub window: Window,
    pub tol: f64,
    pub max_iter: usize,
    pub site_cap: usize,
}

impl Default for PcSearchParams {
    fn default() -> Self {
        let o = PcSearchOptions::default();
        Self {
            bracket: (0.9, 1.1),
            n_max: o.n_max,
            replicas: o.replicas,
            window: o.window,
            tol: o.tol,
            max_iter: o.max_iter,
            site_cap: o.mc.site_cap,
        }
    }
}

impl PcSearchParams {
    pub fn options(&self, seed: u64) -> PcSearchOptions {
        PcSearchOptions {
            n_max: self.n_max,
            replicas: self.replicas,
            seed,
            window: self.window,
            tol: self.tol,
            max_iter: self.max_iter,
            mc: McOptions {
                site_cap: self.site_cap,
            },
        }
    }
}

/// Subcritical sweep `p = p_c (1 - ε)` for the exponent fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub eps: Vec<f64>,
    pub replicas: u64,
    /// `n_max = ceil(horizon / ε)`.
    pub horizon: f64,
    /// The fit window is `[n_max / window_div, n_max]`.
    pub window_div: usize,
    pub margin: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            eps: vec![0.02, 0.03, 0.05, 0.08, 0.12],
            replicas: 20_000,
            horizon: 4.0,
            window_div: 4,
            margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeParams {
    /// Table written by `simulate`; `None` uses the `simulate` run under the
    /// output root.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub growth_window: Window,
    /// Times at which the limit shape is fitted (scaled probes only).
    pub shape_n: Vec<usize>,
    pub shape_band: (f64, f64),
    /// Critical point for the sweep; the sweep runs only when set.
    #[serde(default)]
    pub p_c: Option<f64>,
    #[serde(default)]
    pub p_c_se: f64,
    #[serde(default)]
    pub sweep: SweepParams,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        Self {
            input: None,
            growth_window: Window::default(),
            shape_n: Vec::new(),
            shape_band: (0.5, 2.0),
            p_c: None,
            p_c_se: 0.0,
            sweep: SweepParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    pub p: f64,
    pub replicas: u64,
    /// Largest `n` for enumeration and Monte Carlo comparison.
    pub n_max: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            p: 0.5,
            replicas: 200_000,
            n_max: 3,
        }
    }
}

/// Everything a run needs. Sections not used by a subcommand are ignored
/// but still echoed and digested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Seeds are stored as TOML integers, so they must fit in `i64`.
    pub seed: u64,
    /// Output directory relative to the output root; `None` uses the
    /// subcommand name.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub spectral: SpectralParams,
    #[serde(default)]
    pub diagrams: DiagramParams,
    #[serde(default)]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub pc_search: PcSearchParams,
    #[serde(default)]
    pub analyze: AnalyzeParams,
    #[serde(default)]
    pub oracle: OracleParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 1,
            output: None,
            kernel: KernelSpec::power_law(1, 1.0, 1, 1 << 16),
            spectral: SpectralParams::default(),
            diagrams: DiagramParams::default(),
            simulate: SimulateParams::default(),
            pc_search: PcSearchParams::default(),
            analyze: AnalyzeParams::default(),
            oracle: OracleParams::default(),
        }
    }
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(cfg(format!("{name}: must be finite")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical TOML form. The output location does not
    /// affect results and is left out, so relocated runs share digests.
    pub fn digest(&self) -> Result<String> {
        let mut c = self.clone();
        c.output = None;
        Ok(hex(&Sha256::digest(c.to_toml()?.as_bytes())))
    }

    /// Field-level checks that do not need a built kernel.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(cfg(format!(
                "version: expected {CONFIG_VERSION}, found {}",
                self.version
            )));
        }
        if self.seed > i64::MAX as u64 {
            return Err(cfg("seed: must be < 2^63"));
        }
        self.kernel.validate().map_err(|e| cfg(format!("kernel: {e}")))?;
        finite("kernel.tail_tol", self.kernel.tail_tol)?;
        let s = &self.simulate;
        finite("simulate.p", s.p)?;
        if s.p < 0.0 {
            return Err(cfg("simulate.p: must be >= 0"));
        }
        if s.n_max == 0 || s.replicas == 0 || s.checkpoint_every == 0 {
            return Err(cfg("simulate: n_max, replicas and checkpoint_every must be positive"));
        }
        let q = &self.pc_search;
        finite("pc_search.bracket", q.bracket.0)?;
        finite("pc_search.bracket", q.bracket.1)?;
        if !(q.bracket.0 < q.bracket.1) {
            return Err(cfg("pc_search.bracket: need lo < hi"));
        }
        if !(q.tol > 0.0) {
            return Err(cfg("pc_search.tol: must be positive"));
        }
        let d = &self.diagrams;
        if !(d.reach > 0.0 && d.reach.is_finite()) || d.n_terms == 0 {
            return Err(cfg("diagrams: reach and n_terms must be positive"));
        }
        let a = &self.analyze;
        if let Some(pc) = a.p_c {
            finite("analyze.p_c", pc)?;
        }
        finite("analyze.p_c_se", a.p_c_se)?;
        if a.sweep.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(cfg("analyze.sweep.eps: values must lie in (0, 1)"));
        }
        if !(a.sweep.horizon > 0.0 && a.sweep.horizon.is_finite()) || a.sweep.window_div == 0 {
            return Err(cfg("analyze.sweep: horizon and window_div must be positive"));
        }
        finite("analyze.sweep.margin", a.sweep.margin)?;
        let o = &self.oracle;
        if !(0.0..=1.0).contains(&o.p) {
            return Err(cfg("oracle.p: must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Output directory for `subcommand` below `root`.
    pub fn run_dir(&self, root: &Path, subcommand: &str) -> PathBuf {
        root.join(self.output.clone().unwrap_or_else(|| PathBuf::from(subcommand)))
    }
}

/// Output root: the explicit flag, else the environment variable, else
/// `lrop-out`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lrop-out"))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        let t = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&t).unwrap(), c);
    }

    #[test]
    fn version_checked() {
        let c = ExperimentConfig {
            version: 99,
            ..Default::default()
        };
        let t = toml::to_string(&c).unwrap();
        assert!(matches!(ExperimentConfig::from_toml(&t), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_field_rejected() {
        let t = ExperimentConfig::default().to_toml().unwrap() + "\nbogus = 1\n";
        assert!(ExperimentConfig::from_toml(&t).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
        b.seed = a.seed;
        b.output = Some("elsewhere".into());
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        assert_eq!(a.digest().unwrap(), a.clone().digest().unwrap());
    }
}

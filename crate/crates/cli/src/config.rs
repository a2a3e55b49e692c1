//! Project configuration files and their translation into library objects.

use std::path::{Path, PathBuf};

use lsmm::builtin::{fss_generator, inverter_generator, FssParams, InverterChainParams};
use lsmm::generator::{build_generator, InterpolationSpec};
use lsmm::{Mat, Row, SignalGenerator, SimConfig, StateSpace, Vector, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{mat_from_rows, Complex};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub system: SystemSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<InterpolationConfig>,
    /// Reduced order; builtin systems supply a default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub freq: FreqGrid,
    #[serde(default)]
    pub gamma: GammaMethod,
    /// Previously written model file, used instead of running a reduction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
}

/// Exactly one system source, selected by the key used.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    Inline {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<f64>,
        #[serde(rename = "C")]
        c: Vec<f64>,
    },
    Fss(FssConfig),
    Inverter(InverterConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FssConfig {
    #[serde(default = "FssConfig::default_modes")]
    pub modes: usize,
    #[serde(default = "FssConfig::default_seed")]
    pub seed: u64,
}

impl FssConfig {
    fn default_modes() -> usize {
        FssParams::default().modes
    }

    fn default_seed() -> u64 {
        FssParams::default().seed
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterConfig {
    #[serde(default = "InverterConfig::default_stages")]
    pub stages: usize,
    #[serde(default = "InverterConfig::default_v_t")]
    pub v_t: f64,
    #[serde(default = "InverterConfig::default_alpha")]
    pub alpha: f64,
    /// Degree of the Taylor expansion of `tanh` and of the series solution.
    #[serde(default = "InverterConfig::default_degree")]
    pub degree: usize,
}

impl InverterConfig {
    fn default_stages() -> usize {
        12
    }

    fn default_v_t() -> f64 {
        0.25
    }

    fn default_alpha() -> f64 {
        4.0
    }

    fn default_degree() -> usize {
        3
    }

    pub fn params(&self) -> Result<InverterChainParams, CliError> {
        if self.stages < 2 {
            return Err(CliError::Config(
                "inverter chain needs at least 2 stages".into(),
            ));
        }
        if self.degree % 2 == 0 {
            return Err(CliError::Config(
                "inverter expansion degree must be odd".into(),
            ));
        }
        let mut p = InverterChainParams::standard(self.stages);
        p.v_t = self.v_t;
        p.alpha = self.alpha;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationConfig {
    /// Order-zero points `±i w` for each frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Complex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Pipeline {
    /// Place `sigma(S - Delta L)` on dominant eigenvalues of `A`.
    #[default]
    Dominant,
    /// Given `P`, and `Delta` unless it should be placed on dominant eigenvalues.
    Explicit {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        #[serde(rename = "Delta", default, skip_serializing_if = "Option::is_none")]
        delta: Option<Vec<f64>>,
    },
    /// Least-squares optimal `(F, G, H)` for a given `P`.
    Relaxed {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state_fraction: Option<f64>,
}

impl SimSettings {
    /// Settings given in the file, with the rest taken from `d`.
    pub fn resolve(&self, d: &SimConfig) -> Result<SimConfig, CliError> {
        let cfg = SimConfig {
            t_final: self.t_final.unwrap_or(d.t_final),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            sample_dt: self.sample_dt.unwrap_or(d.sample_dt),
            steady_state_fraction: self
                .steady_state_fraction
                .unwrap_or(d.steady_state_fraction),
            max_steps: d.max_steps,
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(cfg.t_final) {
            return Err(CliError::Config(format!(
                "horizon must be positive, got {}",
                cfg.t_final
            )));
        }
        if !positive(cfg.rel_tol) || !positive(cfg.abs_tol) || !positive(cfg.sample_dt) {
            return Err(CliError::Config(
                "tolerances and sample spacing must be positive".into(),
            ));
        }
        if !(cfg.steady_state_fraction > 0.0 && cfg.steady_state_fraction <= 1.0) {
            return Err(CliError::Config(
                "steady_state_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for FreqGrid {
    fn default() -> Self {
        FreqGrid {
            lo: 1e-2,
            hi: 1e4,
            points: 400,
        }
    }
}

/// How `bound` obtains the steady-state gain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    /// Simulate unless the transient outlasts [`MAX_SIMULATED_HORIZON`].
    #[default]
    Auto,
    Simulate,
    /// Exact infinite-horizon limit from the harmonic content of the error.
    Harmonic,
}

/// Longest horizon `bound` will simulate in `auto` mode.
pub const MAX_SIMULATED_HORIZON: f64 = 1e4;

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ProjectConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative model paths are taken from the config's directory.
        if let (Some(m), Some(dir)) = (&cfg.model_file, path.parent()) {
            if m.is_relative() {
                cfg.model_file = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn apply_seed(&mut self, seed: u64) {
        if let SystemSource::Fss(f) = &mut self.system {
            f.seed = seed;
        }
    }

    pub fn order(&self) -> Result<usize, CliError> {
        let r = match (&self.r, &self.system) {
            (Some(r), _) => *r,
            (None, SystemSource::Fss(_)) => 10,
            (None, SystemSource::Inverter(_)) => 4,
            (None, SystemSource::Inline { .. }) => {
                return Err(CliError::Config("reduced order r is required".into()))
            }
        };
        if r == 0 {
            return Err(CliError::Config(
                "reduced order r must be at least 1".into(),
            ));
        }
        Ok(r)
    }

    /// Linear system, or the linearization with output `x_n` for the inverter chain.
    pub fn linear_system(&self) -> Result<StateSpace, CliError> {
        match &self.system {
            SystemSource::Inline { a, b, c } => {
                let a = mat_from_rows(a).map_err(CliError::Config)?;
                Ok(StateSpace::new(
                    a,
                    Vector::from_vec(b.clone()),
                    Row::from_vec(c.clone()),
                )?)
            }
            SystemSource::Fss(f) => {
                if f.modes == 0 {
                    return Err(CliError::Config("FSS needs at least one mode".into()));
                }
                let params = FssParams {
                    modes: f.modes,
                    seed: f.seed,
                    ..FssParams::default()
                };
                Ok(lsmm::builtin::build_fss(&params)?)
            }
            SystemSource::Inverter(inv) => {
                let (field, _) = lsmm::builtin::build_inverter_chain(&inv.params()?, 1)?;
                let (a, b) = field.linearization();
                let mut c = Row::zeros(a.nrows());
                c[a.nrows() - 1] = 1.0;
                Ok(StateSpace::new(a, b, c)?)
            }
        }
    }

    pub fn generator(&self) -> Result<SignalGenerator, CliError> {
        let Some(ic) = &self.interpolation else {
            return match &self.system {
                SystemSource::Fss(_) => Ok(fss_generator()?),
                SystemSource::Inverter(_) => Ok(inverter_generator()?),
                SystemSource::Inline { .. } => Err(CliError::Config(
                    "interpolation is required for inline systems".into(),
                )),
            };
        };
        let spec = match (&ic.frequencies, &ic.points) {
            (Some(w), None) => {
                if ic.orders.is_some() {
                    return Err(CliError::Config(
                        "orders apply to points, not frequencies".into(),
                    ));
                }
                InterpolationSpec::imaginary_axis(w)?
            }
            (None, Some(p)) => {
                let points: Vec<C64> = p.iter().map(|z| C64::new(z.re, z.im)).collect();
                let orders = ic.orders.clone().unwrap_or_else(|| vec![0; points.len()]);
                InterpolationSpec::new(points, orders)?
            }
            _ => {
                return Err(CliError::Config(
                    "interpolation needs exactly one of frequencies or points".into(),
                ))
            }
        };
        let l = ic.l.as_ref().map(|v| Row::from_vec(v.clone()));
        let w0 = ic.omega0.as_ref().map(|v| Vector::from_vec(v.clone()));
        Ok(build_generator(&spec, l, w0)?)
    }
}

pub fn pipeline_matrix(rows: &[Vec<f64>]) -> Result<Mat, CliError> {
    mat_from_rows(rows).map_err(CliError::Config)
}

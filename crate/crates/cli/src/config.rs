//! Strict TOML run configuration.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use burgers_core::fields::{make_trig_field, TrigPolynomial};
use burgers_core::heat::lacunary_field;
use burgers_core::oracle::{cole_hopf_datum, cole_hopf_potential, gradient_forcing};
use burgers_core::scheme::SchemeConfig;
use burgers_core::{Forcing, GridSpec, Modulation, ScalarField, VectorField};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<burgers_core::Error> for ConfigError {
    fn from(e: burgers_core::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Uniform,
    ShortTime,
    Gronwall,
    Schauder,
    Interpolation,
    HeatScaling,
    OracleCompare,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Uniform => "uniform",
            Check::ShortTime => "short_time",
            Check::Gronwall => "gronwall",
            Check::Schauder => "schauder",
            Check::Interpolation => "interpolation",
            Check::HeatScaling => "heat_scaling",
            Check::OracleCompare => "oracle_compare",
        }
    }

    /// Whether the check reads the Picard fixed point.
    pub fn needs_picard(self) -> bool {
        !matches!(self, Check::HeatScaling | Check::Interpolation)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Defaults to the experiment's registered checks.
    #[serde(default)]
    pub checks: Option<Vec<Check>>,
    /// Also write BFLD snapshots of the datum and the final frame.
    #[serde(default)]
    pub snapshots: bool,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub d: usize,
    pub n: usize,
    #[serde(default = "default_length")]
    pub l: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_tol_fp")]
    pub tol_fp: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_holder_frames")]
    pub holder_frames: usize,
    #[serde(default = "default_holder_pairs")]
    pub holder_pairs: usize,
}

fn default_length() -> f64 {
    TAU
}
fn one() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    0.25
}
fn default_m_max() -> usize {
    40
}
fn default_tol_fp() -> f64 {
    1e-10
}
fn default_holder_frames() -> usize {
    17
}
fn default_holder_pairs() -> usize {
    50_000
}
fn minus_two() -> f64 {
    -2.0
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    Trig {
        seed: u64,
        kmax: usize,
        amp: f64,
    },
    ColeHopf {
        eps: f64,
    },
    Lacunary {
        alpha: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    #[default]
    Zero,
    /// Separable `θ(t)·profile` with a random band-limited profile.
    Trig {
        seed: u64,
        kmax: usize,
        amp: f64,
        #[serde(default = "one")]
        mean: f64,
        #[serde(default)]
        amplitude: f64,
        #[serde(default)]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `λ∇f` for a random scalar potential `f`.
    Gradient {
        seed: u64,
        kmax: usize,
        amp: f64,
        #[serde(default = "minus_two")]
        lambda: f64,
        #[serde(default = "one")]
        mean: f64,
        #[serde(default)]
        amplitude: f64,
        #[serde(default)]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        Ok(GridSpec::new(self.scheme.d, self.scheme.n, self.scheme.l)?)
    }

    /// Scheme parameters in physical units.
    pub fn scheme_config(&self) -> Result<SchemeConfig, ConfigError> {
        let s = &self.scheme;
        let mut cfg = SchemeConfig::new(self.grid()?, s.horizon, s.dt);
        cfg.nu = s.nu;
        cfg.c = s.c;
        cfg.alpha = s.alpha;
        cfg.beta = s.beta;
        cfg.m_max = s.m_max;
        cfg.tol_fp = s.tol_fp;
        cfg.seed = s.seed;
        cfg.holder_frames = s.holder_frames;
        cfg.holder_pairs = s.holder_pairs;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if crate::registry::find(&self.experiment).is_none() {
            return invalid(format!(
                "unknown experiment `{}`; run `burgers list` for the catalog",
                self.experiment
            ));
        }
        if let Some(checks) = &self.checks {
            let mut seen = checks.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != checks.len() {
                return invalid("checks list contains duplicates".into());
            }
        }
        let s = &self.scheme;
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return invalid(format!("scheme.horizon = {} must be positive", s.horizon));
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return invalid(format!("scheme.dt = {} must be positive", s.dt));
        }
        self.scheme_config()?.validate()?;
        let d = s.d;
        match &self.data {
            DataSpec::Constant { value } if value.len() != d => {
                return invalid(format!("data.value has {} entries, expected d = {d}", value.len()));
            }
            DataSpec::Trig { amp, .. } if !amp.is_finite() => return invalid("data.amp must be finite".into()),
            DataSpec::ColeHopf { .. } if d != 1 => return invalid("cole_hopf data needs d = 1".into()),
            DataSpec::ColeHopf { eps } if !(eps.abs() < 1.0) => {
                return invalid(format!("data.eps = {eps} must satisfy |ε| < 1"));
            }
            DataSpec::Lacunary { .. } if d != 1 => return invalid("lacunary data needs d = 1".into()),
            DataSpec::Lacunary { alpha, .. } if !(*alpha > 0.0 && *alpha < 1.0) => {
                return invalid(format!("data.alpha = {alpha} must lie in (0, 1)"));
            }
            _ => {}
        }
        // Build once so range errors surface before any computation.
        self.datum()?;
        self.forcing()?;
        Ok(())
    }

    pub fn datum(&self) -> Result<VectorField, ConfigError> {
        let g = self.grid()?;
        Ok(match &self.data {
            DataSpec::Zero => VectorField::zeros(g, g.d),
            DataSpec::Constant { value } => VectorField::constant(g, value),
            DataSpec::Trig { seed, kmax, amp } => make_trig_field(g, *seed, *kmax, *amp)?,
            DataSpec::ColeHopf { eps } => cole_hopf_datum(g, *eps)?,
            DataSpec::Lacunary { alpha, seed } => VectorField::from_scalar(lacunary_field(g, *alpha, *seed)?),
        })
    }

    /// Scalar potential `f` of a gradient forcing, as a forcing with one component.
    pub fn potential(&self) -> Result<Option<Forcing>, ConfigError> {
        let ForcingSpec::Gradient {
            seed,
            kmax,
            amp,
            mean,
            amplitude,
            omega,
            phase,
            ..
        } = &self.forcing
        else {
            return Ok(None);
        };
        let g = self.grid()?;
        let profile = TrigPolynomial::random_with_components(g, 1, *seed, *kmax, *amp)?.sample();
        let modulation = Modulation {
            mean: *mean,
            amplitude: *amplitude,
            omega: *omega,
            phase: *phase,
        };
        Ok(Some(Forcing::separable(profile, modulation)?))
    }

    pub fn forcing(&self) -> Result<Forcing, ConfigError> {
        let g = self.grid()?;
        Ok(match &self.forcing {
            ForcingSpec::Zero => Forcing::Zero,
            ForcingSpec::Trig {
                seed,
                kmax,
                amp,
                mean,
                amplitude,
                omega,
                phase,
            } => Forcing::separable(
                make_trig_field(g, *seed, *kmax, *amp)?,
                Modulation {
                    mean: *mean,
                    amplitude: *amplitude,
                    omega: *omega,
                    phase: *phase,
                },
            )?,
            ForcingSpec::Gradient { lambda, .. } => {
                let f = self.potential()?.expect("gradient forcing has a potential");
                gradient_forcing(&f, *lambda)?
            }
        })
    }

    /// Initial potential when the datum comes from one.
    pub fn initial_potential(&self) -> Result<Option<ScalarField>, ConfigError> {
        Ok(match self.data {
            DataSpec::ColeHopf { eps } => Some(cole_hopf_potential(self.grid()?, eps)),
            _ => None,
        })
    }

    pub fn checks(&self) -> Vec<Check> {
        match &self.checks {
            Some(c) => c.clone(),
            None => crate::registry::find(&self.experiment)
                .map(|e| e.checks.to_vec())
                .unwrap_or_default(),
        }
    }
}

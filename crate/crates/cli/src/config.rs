//! Run configuration: a flat, sectioned TOML document.
//!
//! ```toml
//! scenario = "oscillators"
//!
//! [oscillators]
//! coupling = 0.8
//! r = 1.498
//!
//! [bath]
//! gamma0 = 0.1
//! cutoff = 100.0
//! temperature = 10.0
//!
//! [sweep]
//! parameter = "r"
//! values = [1.0, 1.498, 2.0]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use cvgauss_core::bath::{SpectralDensity, ThermalSpec};
use cvgauss_core::cavity::{effective_couplings, squeeze_parameters, EffectiveCouplings, EnsembleParams, Propagation};
use cvgauss_core::ode::OdeOptions;
use cvgauss_core::oscillators::{
    output_grid, transformed_frequencies, DynamicsOptions, OscillatorPair, ThresholdSearch,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Oscillators,
    RingCavity,
    Threshold,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Oscillators => "oscillators",
            Scenario::RingCavity => "ring-cavity",
            Scenario::Threshold => "threshold",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oscillators" => Ok(Scenario::Oscillators),
            "ring-cavity" => Ok(Scenario::RingCavity),
            "threshold" => Ok(Scenario::Threshold),
            _ => Err(format!("unknown scenario `{s}` (expected oscillators, ring-cavity or threshold)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReservoirKind {
    Off,
    TimeDependent,
    Markov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    /// Stem of the output files; defaults to the preset or scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub oscillators: OscillatorSection,
    #[serde(default)]
    pub bath: BathSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub ode: OdeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscillatorSection {
    pub mass: f64,
    pub omega: f64,
    pub coupling: f64,
    pub r: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub reservoir: ReservoirKind,
    pub renormalize: bool,
}

impl Default for OscillatorSection {
    fn default() -> Self {
        Self {
            mass: 1.0,
            omega: 1.0,
            coupling: 0.0,
            r: 1.0,
            t_end: 50.0,
            dt_out: 0.01,
            reservoir: ReservoirKind::TimeDependent,
            renormalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub gamma0: f64,
    pub cutoff: f64,
    pub exponent: u32,
    pub temperature: f64,
    pub coupling_factor: f64,
    /// Also write the time-dependent coefficients next to the trajectory.
    pub dump_coefficients: bool,
}

impl Default for BathSection {
    fn default() -> Self {
        Self {
            gamma0: 0.1,
            cutoff: 100.0,
            exponent: 1,
            temperature: 10.0,
            coupling_factor: 1.0,
            dump_coefficients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub kappa: Option<f64>,
    /// Effective couplings given directly; otherwise derived from `[ensemble]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_s: Option<f64>,
    #[serde(default)]
    pub phase_u: f64,
    #[serde(default)]
    pub phase_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_out: Option<f64>,
    #[serde(default = "clockwise")]
    pub first: Propagation,
}

fn clockwise() -> Propagation {
    Propagation::Clockwise
}

/// Atomic ensemble parameters; unset keys take the library defaults. The
/// cavity decay rate comes from `[cavity]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_c: Option<f64>,
}

impl EnsembleSection {
    pub fn params(&self, kappa: f64) -> EnsembleParams {
        let d = EnsembleParams::default();
        EnsembleParams {
            n_atoms: self.n_atoms.unwrap_or(d.n_atoms),
            g_u: self.g_u.unwrap_or(d.g_u),
            g_s: self.g_s.unwrap_or(d.g_s),
            delta_u: self.delta_u.unwrap_or(d.delta_u),
            delta_s: self.delta_s.unwrap_or(d.delta_s),
            omega_u: self.omega_u.unwrap_or(d.omega_u),
            omega_s: self.omega_s.unwrap_or(d.omega_s),
            phi_u: self.phi_u.unwrap_or(d.phi_u),
            phi_s: self.phi_s.unwrap_or(d.phi_s),
            kappa,
            gamma_u: self.gamma_u.unwrap_or(d.gamma_u),
            gamma_s: self.gamma_s.unwrap_or(d.gamma_s),
            delta_c: self.delta_c.unwrap_or(d.delta_c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub window_start: f64,
    pub window_end: f64,
    pub dt: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_tol: f64,
    /// Points of the coarse `r` scan written to the CSV.
    pub scan_points: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let s = ThresholdSearch::default();
        Self {
            window_start: s.window.0,
            window_end: s.window.1,
            dt: s.dt,
            r_min: s.bracket.0,
            r_max: s.bracket.1,
            r_tol: s.r_tol,
            scan_points: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for OdeSection {
    fn default() -> Self {
        let o = OdeOptions::default();
        Self { rel_tol: o.rel_tol, abs_tol: o.abs_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    R,
    Coupling,
    Gamma0,
    Cutoff,
    Temperature,
    Kappa,
}

impl SweepParameter {
    fn label(self) -> &'static str {
        match self {
            SweepParameter::R => "r",
            SweepParameter::Coupling => "lambda",
            SweepParameter::Gamma0 => "gamma0",
            SweepParameter::Cutoff => "cutoff",
            SweepParameter::Temperature => "T",
            SweepParameter::Kappa => "kappa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// One concrete run after sweep expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub stem: String,
    pub config: Config,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Reads a TOML config, or the `config` entry of a run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|x| x == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let inner = manifest
                .get("config")
                .ok_or_else(|| CliError::Config(format!("{}: manifest has no `config` entry", path.display())))?;
            serde_json::from_value(inner.clone()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            Self::parse(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        };
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn base_name(&self) -> String {
        self.name.clone().or_else(|| self.preset.clone()).unwrap_or_else(|| self.scenario.to_string())
    }

    /// Expands the sweep into validated single runs.
    pub fn jobs(&self) -> Result<Vec<Job>, CliError> {
        let base = self.base_name();
        if base.is_empty() || base.contains(['/', '\\']) {
            return Err(CliError::Config(format!("name `{base}` is not a valid file stem")));
        }
        let jobs = match &self.sweep {
            None => vec![Job { stem: base, config: self.clone() }],
            Some(sweep) => {
                if sweep.values.is_empty() {
                    return Err(CliError::Config("sweep.values must not be empty".into()));
                }
                let mut out = Vec::with_capacity(sweep.values.len());
                for &v in &sweep.values {
                    let mut cfg = self.clone();
                    cfg.sweep = None;
                    cfg.apply(sweep.parameter, v)?;
                    let stem = format!("{base}_{}={v}", sweep.parameter.label());
                    cfg.name = Some(stem.clone());
                    out.push(Job { stem, config: cfg });
                }
                out
            }
        };
        for job in &jobs {
            job.config.validate().map_err(|e| CliError::Config(format!("{}: {e}", job.stem)))?;
        }
        Ok(jobs)
    }

    fn apply(&mut self, p: SweepParameter, v: f64) -> Result<(), CliError> {
        match p {
            SweepParameter::R => self.oscillators.r = v,
            SweepParameter::Coupling => self.oscillators.coupling = v,
            SweepParameter::Gamma0 => self.bath.gamma0 = v,
            SweepParameter::Cutoff => self.bath.cutoff = v,
            SweepParameter::Temperature => self.bath.temperature = v,
            SweepParameter::Kappa => match self.cavity.as_mut() {
                Some(c) => c.kappa = Some(v),
                None => return Err(CliError::Config("sweep over kappa needs a [cavity] section".into())),
            },
        }
        Ok(())
    }

    pub fn pair(&self) -> cvgauss_core::Result<OscillatorPair> {
        let o = &self.oscillators;
        OscillatorPair::new(o.mass, o.omega, o.coupling)
    }

    pub fn spectral_density(&self) -> cvgauss_core::Result<SpectralDensity> {
        let b = &self.bath;
        SpectralDensity::new(b.gamma0, b.cutoff, b.exponent)?
            .with_mass(self.oscillators.mass)?
            .with_coupling_factor(b.coupling_factor)
    }

    pub fn thermal(&self) -> cvgauss_core::Result<ThermalSpec> {
        ThermalSpec::new(self.bath.temperature)
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions { rel_tol: self.ode.rel_tol, abs_tol: self.ode.abs_tol, ..OdeOptions::default() }
    }

    pub fn dynamics_options(&self) -> DynamicsOptions {
        DynamicsOptions { ode: self.ode_options(), renormalize: self.oscillators.renormalize }
    }

    pub fn threshold_search(&self) -> ThresholdSearch {
        let t = &self.threshold;
        ThresholdSearch {
            window: (t.window_start, t.window_end),
            dt: t.dt,
            bracket: (t.r_min, t.r_max),
            r_tol: t.r_tol,
        }
    }

    /// `kappa` of the ring-cavity scenario; its absence is a config error.
    pub fn kappa(&self) -> Result<f64, String> {
        let kappa = self
            .cavity
            .as_ref()
            .and_then(|c| c.kappa)
            .ok_or_else(|| "ring-cavity scenario needs cavity.kappa (missing kappa)".to_string())?;
        if kappa <= 0.0 || !kappa.is_finite() {
            return Err(format!("cavity.kappa must be positive, got {kappa}"));
        }
        Ok(kappa)
    }

    pub fn ensemble_params(&self) -> Option<EnsembleParams> {
        let kappa = self.kappa().ok()?;
        Some(self.ensemble.clone().unwrap_or_default().params(kappa))
    }

    pub fn couplings(&self) -> Result<EffectiveCouplings, String> {
        let cav = self.cavity.as_ref().ok_or("ring-cavity scenario needs a [cavity] section")?;
        match (cav.beta_u, cav.beta_s) {
            (Some(bu), Some(bs)) => {
                if self.ensemble.is_some() {
                    return Err("give either cavity.beta_u/beta_s or [ensemble], not both".into());
                }
                Ok(EffectiveCouplings {
                    beta_u: Complex64::from_polar(bu, cav.phase_u),
                    beta_s: Complex64::from_polar(bs, cav.phase_s),
                })
            }
            (None, None) => {
                let p = self.ensemble_params().ok_or("ring-cavity scenario needs cavity.kappa (missing kappa)")?;
                effective_couplings(&p).map_err(|e| e.to_string())
            }
            _ => Err("cavity.beta_u and cavity.beta_s must be given together".into()),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let o = &self.oscillators;
        let e = |err: cvgauss_core::Error| err.to_string();
        if self.ode.rel_tol <= 0.0 || self.ode.abs_tol <= 0.0 {
            return Err("ode tolerances must be positive".into());
        }
        match self.scenario {
            Scenario::Oscillators | Scenario::Threshold => {
                transformed_frequencies(&self.pair().map_err(e)?).map_err(e)?;
                self.spectral_density().map_err(e)?;
                self.thermal().map_err(e)?;
                if !o.r.is_finite() {
                    return Err(format!("oscillators.r must be finite, got {}", o.r));
                }
            }
            Scenario::RingCavity => {
                self.kappa()?;
                if let Some(p) = self.ensemble_params() {
                    if self.ensemble.is_some() {
                        p.validate().map_err(e)?;
                    }
                }
                squeeze_parameters(&self.couplings()?).map_err(e)?;
                let c = self.cavity.as_ref().expect("checked by kappa()");
                for (key, v) in [("tau1", c.tau1), ("tau2", c.tau2), ("dt_out", c.dt_out)] {
                    if let Some(v) = v {
                        if v <= 0.0 || !v.is_finite() {
                            return Err(format!("cavity.{key} must be positive, got {v}"));
                        }
                    }
                }
            }
        }
        match self.scenario {
            Scenario::Oscillators => {
                output_grid(o.t_end, o.dt_out).map_err(e)?;
            }
            Scenario::Threshold => {
                let t = &self.threshold;
                if !(t.window_start >= 0.0 && t.window_end > t.window_start) {
                    return Err("threshold window must satisfy 0 <= window_start < window_end".into());
                }
                if !(t.dt > 0.0 && t.dt < t.window_end - t.window_start) {
                    return Err("threshold.dt must be positive and shorter than the window".into());
                }
                if !(t.r_max > t.r_min && t.r_min >= 0.0 && t.r_tol > 0.0) {
                    return Err("threshold bracket needs 0 <= r_min < r_max and r_tol > 0".into());
                }
            }
            Scenario::RingCavity => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_oscillator_config() {
        let cfg = Config::parse("scenario = \"oscillators\"\n[oscillators]\nr = 2.0\n").unwrap();
        assert_eq!(cfg.oscillators.r, 2.0);
        assert_eq!(cfg.bath, BathSection::default());
        let jobs = cfg.jobs().unwrap();
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].stem, "oscillators");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let err = Config::parse("scenario = \"oscillators\"\n\n[bath]\ngama0 = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("gama0"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = Config::parse("scenario = \"oscillators\"\n[bath\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn missing_kappa() {
        let cfg = Config::parse("scenario = \"ring-cavity\"\n[cavity]\nbeta_u = 1.0\nbeta_s = 0.5\n").unwrap();
        let err = cfg.jobs().unwrap_err().to_string();
        assert!(err.contains("missing kappa"), "{err}");
        let bare = Config::parse("scenario = \"ring-cavity\"\n").unwrap();
        assert!(bare.jobs().unwrap_err().to_string().contains("kappa"));
    }

    #[test]
    fn invariants_checked_at_load() {
        let strong = Config::parse("scenario = \"oscillators\"\n[oscillators]\ncoupling = 1.0\n").unwrap();
        assert!(strong.jobs().is_err());
        let cold = Config::parse("scenario = \"threshold\"\n[bath]\ntemperature = -1.0\n").unwrap();
        assert!(cold.jobs().is_err());
        let equal =
            Config::parse("scenario = \"ring-cavity\"\n[cavity]\nkappa = 1.0\nbeta_u = 1.0\nbeta_s = 1.0\n").unwrap();
        assert!(equal.jobs().unwrap_err().to_string().contains("beta_u"));
    }

    #[test]
    fn sweep_expansion() {
        let cfg = Config::parse(
            "scenario = \"oscillators\"\nname = \"scan\"\n[sweep]\nparameter = \"cutoff\"\nvalues = [200.0, 500.0]\n",
        )
        .unwrap();
        let jobs = cfg.jobs().unwrap();
        assert_eq!(jobs.iter().map(|j| j.stem.as_str()).collect::<Vec<_>>(), ["scan_cutoff=200", "scan_cutoff=500"]);
        assert_eq!(jobs[1].config.bath.cutoff, 500.0);
        assert!(jobs[1].config.sweep.is_none());
    }

    #[test]
    fn round_trips_through_toml_and_json() {
        let cfg = Config::parse(
            "scenario = \"ring-cavity\"\n[cavity]\nkappa = 2.0\nfirst = \"anticlockwise\"\n[ensemble]\nn_atoms = 500\n",
        )
        .unwrap();
        assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
        let json = serde_json::to_value(&cfg).unwrap();
        assert_eq!(serde_json::from_value::<Config>(json).unwrap(), cfg);
    }
}

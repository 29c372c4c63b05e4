//! Run configuration: a single TOML file selects the experiment and carries
//! all knobs. Unknown keys are rejected so typos fail loudly, and a loaded
//! config re-serializes to the exact same run (the config hash in output
//! metadata is computed from the canonical serialization).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{AnglePair, CircuitParams, SignAssignment};
use crate::meanfield::PhaseThresholds;
use crate::model::{ModelError, PumpPreset, PumpSpec, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("invalid config: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Meanfield,
    PhaseDiagram,
    PeriodScan,
    Trajectories,
    Spectrum,
    BetaScan,
    Detector,
    Circuit,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Meanfield => "meanfield",
            ExperimentKind::PhaseDiagram => "phase-diagram",
            ExperimentKind::PeriodScan => "period-scan",
            ExperimentKind::Trajectories => "trajectories",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::BetaScan => "beta-scan",
            ExperimentKind::Detector => "detector",
            ExperimentKind::Circuit => "circuit",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_modes: usize,
    #[serde(default = "one")]
    pub gamma_hop: f64,
    /// Pump strength, interpreted through `preset`.
    pub gamma_g: f64,
    #[serde(default = "default_preset")]
    pub preset: PumpPreset,
    /// Explicit `(gamma_up, gamma_down)` override; wins over `preset`.
    #[serde(default)]
    pub gamma_up: Option<f64>,
    #[serde(default)]
    pub gamma_down: Option<f64>,
    pub kappa_c: f64,
    pub kappa_l: f64,
    #[serde(default)]
    pub kappa_0: f64,
}

fn one() -> f64 {
    1.0
}

fn default_preset() -> PumpPreset {
    PumpPreset::InfiniteTemperature
}

impl SystemSection {
    pub fn to_params(&self) -> Result<SystemParams, ConfigError> {
        let pump = match (self.gamma_up, self.gamma_down) {
            (Some(up), Some(down)) => PumpSpec {
                gamma_up: up,
                gamma_down: down,
            },
            (None, None) => self.preset.spec(self.gamma_g),
            _ => {
                return Err(ConfigError::Validation(
                    "gamma_up and gamma_down must be given together".into(),
                ))
            }
        };
        Ok(SystemParams::new(
            self.n_modes,
            self.gamma_hop,
            pump,
            self.kappa_c,
            self.kappa_l,
            self.kappa_0,
        )?)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub gamma_g: Vec<f64>,
    #[serde(default)]
    pub kappa_c: Vec<f64>,
    #[serde(default)]
    pub gamma_hop: Vec<f64>,
    #[serde(default)]
    pub n_modes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_n_traj")]
    pub n_traj: u64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt_sample: Option<f64>,
    #[serde(default)]
    pub record_events: bool,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
    /// Fixed-step cross-validation mode; `None` selects the exact direct method.
    #[serde(default)]
    pub fixed_dt: Option<f64>,
}

fn default_n_traj() -> u64 {
    50
}

fn default_event_cap() -> u64 {
    100_000_000
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_traj: default_n_traj(),
            t_end: None,
            dt_sample: None,
            record_events: false,
            event_cap: default_event_cap(),
            fixed_dt: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSection {
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Initial cavity seed amplitude; defaults to `sqrt(10)`.
    #[serde(default)]
    pub seed_amplitude: Option<f64>,
    #[serde(default = "default_eps_c")]
    pub eps_c: f64,
    #[serde(default = "default_eps_d")]
    pub eps_d: f64,
    #[serde(default = "default_eps_osc")]
    pub eps_osc: f64,
}

fn default_rel_tol() -> f64 {
    1e-8
}
fn default_n_samples() -> usize {
    4001
}
fn default_eps_c() -> f64 {
    PhaseThresholds::default().eps_c
}
fn default_eps_d() -> f64 {
    PhaseThresholds::default().eps_d
}
fn default_eps_osc() -> f64 {
    PhaseThresholds::default().eps_osc
}

impl Default for MeanFieldSection {
    fn default() -> Self {
        Self {
            t_end: None,
            rel_tol: default_rel_tol(),
            n_samples: default_n_samples(),
            seed_amplitude: None,
            eps_c: default_eps_c(),
            eps_d: default_eps_d(),
            eps_osc: default_eps_osc(),
        }
    }
}

impl MeanFieldSection {
    pub fn thresholds(&self) -> PhaseThresholds {
        PhaseThresholds {
            eps_c: self.eps_c,
            eps_d: self.eps_d,
            eps_osc: self.eps_osc,
        }
    }

    pub fn seed_amplitude(&self) -> f64 {
        self.seed_amplitude.unwrap_or_else(|| 10f64.sqrt())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_tukey_flat")]
    pub tukey_flat: f64,
    #[serde(default)]
    pub omega_floor: Option<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn default_tukey_flat() -> f64 {
    0.8
}
fn default_bootstrap() -> usize {
    100
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            tukey_flat: default_tukey_flat(),
            omega_floor: None,
            bootstrap: default_bootstrap(),
        }
    }
}

impl AnalysisSection {
    pub fn spectrum_config(&self) -> crate::analysis::SpectrumConfig {
        crate::analysis::SpectrumConfig {
            tukey_flat: self.tukey_flat,
            omega_floor: self.omega_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "default_n1_values")]
    pub n1_values: Vec<u64>,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_bin_width")]
    pub bin_width: u64,
}

fn default_n1_values() -> Vec<u64> {
    (0..=5).collect()
}
fn default_runs() -> u64 {
    500
}
fn default_bin_width() -> u64 {
    1
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            n1_values: default_n1_values(),
            runs: default_runs(),
            t_end: None,
            bin_width: default_bin_width(),
        }
    }
}

/// Circuit parameter file mirroring the reference table field names.
/// Frequencies in Hz (ordinary frequency), impedance in Ohm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub e_j: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// Sine magnitudes; quadrant signs come from `sign_search` unless given.
    pub sin_psi_third: f64,
    pub sin_chi_half: f64,
    pub sin_theta: f64,
    #[serde(default)]
    pub signs: Option<[i8; 6]>,
    pub z: f64,
    pub delta_phi_e: f64,
    pub kappa_b: f64,
    pub n_modes: usize,
    pub omega_1: f64,
    pub delta_omega: f64,
    pub omega_c: f64,
    pub omega_b: f64,
    pub kappa_c: f64,
    pub kappa_0: f64,
    /// Smallest detuning of any unwanted resonance, taken as an input.
    pub delta_min: f64,
    #[serde(default = "one")]
    pub n_bar: f64,
    #[serde(default = "ten")]
    pub n_c_bar: f64,
}

fn ten() -> f64 {
    10.0
}

impl CircuitSection {
    pub fn to_params(&self) -> Result<CircuitParams, ConfigError> {
        let signs = match self.signs {
            Some(s) => SignAssignment {
                psi_third: AnglePair::from_magnitude(
                    self.sin_psi_third,
                    s[0] as f64,
                    s[3] as f64,
                ),
                chi_half: AnglePair::from_magnitude(self.sin_chi_half, s[1] as f64, s[4] as f64),
                theta: AnglePair::from_magnitude(self.sin_theta, s[2] as f64, s[5] as f64),
            },
            None => {
                crate::circuit::sign_search(
                    self.alpha2,
                    self.alpha3,
                    self.sin_psi_third,
                    self.sin_chi_half,
                    self.sin_theta,
                )
                .0
            }
        };
        for (name, value) in [
            ("e_j", self.e_j),
            ("kappa_b", self.kappa_b),
            ("z", self.z),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::Validation(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(CircuitParams {
            e_j: self.e_j,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
            psi_third: signs.psi_third,
            chi_half: signs.chi_half,
            theta: signs.theta,
            z_ohm: self.z,
            delta_phi_e: self.delta_phi_e,
            kappa_b: self.kappa_b,
            n_modes: self.n_modes,
            omega_1: self.omega_1,
            delta_omega: self.delta_omega,
            omega_c: self.omega_c,
            omega_b: self.omega_b,
            kappa_c: self.kappa_c,
            kappa_0: self.kappa_0,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub system: Option<SystemSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub meanfield: MeanFieldSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub circuit: Option<CircuitSection>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.experiment {
            ExperimentKind::Circuit => {
                if self.circuit.is_none() {
                    return Err(ConfigError::Validation(
                        "circuit experiment needs a [circuit] section".into(),
                    ));
                }
                self.circuit.as_ref().unwrap().to_params()?;
            }
            _ => {
                let Some(system) = &self.system else {
                    return Err(ConfigError::Validation(format!(
                        "{} experiment needs a [system] section",
                        self.experiment.name()
                    )));
                };
                system.to_params()?;
            }
        }
        if let Some(dt) = self.ensemble.dt_sample {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(ConfigError::Validation(format!(
                    "dt_sample must be positive, got {dt}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialization used for the config hash.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "meanfield"
[system]
n_modes = 10
gamma_g = 12.0
kappa_c = 20.0
kappa_l = 10.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let config = RunConfig::from_str(MINIMAL).unwrap();
        let params = config.system.as_ref().unwrap().to_params().unwrap();
        assert_eq!(params.kappa_0, 0.0);
        assert_eq!(params.gamma_hop, 1.0);
        assert_eq!(params.pump, PumpSpec::infinite_temperature(12.0));
        assert_eq!(config.master_seed, 0);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let text = MINIMAL.replace("kappa_c = 20.0", "kappa_c = -1.0");
        assert!(matches!(
            RunConfig::from_str(&text),
            Err(ConfigError::Model(_))
        ));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}\nkappa_x = 1.0\n");
        assert!(matches!(
            RunConfig::from_str(&text),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn round_trip_is_identity() {
        let config = RunConfig::from_str(MINIMAL).unwrap();
        let reloaded = RunConfig::from_str(&config.canonical_toml()).unwrap();
        assert_eq!(config.hash(), reloaded.hash());
    }

    #[test]
    fn pump_override_must_be_complete() {
        let text = format!("{}gamma_up = 1.0\n", MINIMAL.replace("kappa_l = 10.0", "kappa_l = 10.0\n"));
        // gamma_up inside [system] without gamma_down
        let text = text.replace("[system]", "[system]");
        assert!(RunConfig::from_str(&text).is_err());
    }

    #[test]
    fn circuit_section_builds_params() {
        let text = r#"
experiment = "circuit"
[circuit]
e_j = 50e9
alpha2 = 2.4
alpha3 = 2.1
sin_psi_third = 0.85
sin_chi_half = 0.88
sin_theta = 0.33
z = 160.0
delta_phi_e = 0.25
kappa_b = 30e6
n_modes = 5
omega_1 = 4.7e9
delta_omega = 300e6
omega_c = 3.6e9
omega_b = 10.7e9
kappa_c = 0.5e6
kappa_0 = 20e3
delta_min = 200e6
"#;
        let config = RunConfig::from_str(text).unwrap();
        let params = config.circuit.as_ref().unwrap().to_params().unwrap();
        assert!(params.psi_third.is_normalized());
        assert_eq!(params.n_modes, 5);
    }
}

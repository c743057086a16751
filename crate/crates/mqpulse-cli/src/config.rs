//! Run configuration: TOML with explicit units in key names, strict
//! unknown-key rejection, and range validation with field-path errors.

use serde::{Deserialize, Serialize};

use mqpulse::hamiltonian::{QuadrupoleParams, SpinSystemParams};
use mqpulse::optimizer::{LineSearchParams, OptimizerOptions};
use mqpulse::powder::PowderSpec;
use mqpulse::spinops::Spin;

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemConfig {
    /// Spin quantum number; only 3/2 runs end to end.
    #[serde(default = "default_spin")]
    pub spin: f64,
    pub cq_hz: f64,
    pub eta: f64,
    pub larmor_hz: f64,
    #[serde(default)]
    pub shift_ppm: f64,
    pub rotor_hz: f64,
}

fn default_spin() -> f64 {
    1.5
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PulseGridConfig {
    pub n_steps: usize,
    pub dt_s: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PowderConfig {
    pub n_alpha_beta: usize,
    pub n_gamma: usize,
    pub rf_scales: Vec<f64>,
    #[serde(default = "default_repulsion_iterations")]
    pub repulsion_iterations: usize,
}

fn default_repulsion_iterations() -> usize {
    2000
}

impl Default for PowderConfig {
    fn default() -> Self {
        PowderConfig {
            n_alpha_beta: 50,
            n_gamma: 3,
            rf_scales: vec![0.95, 1.0, 1.05],
            repulsion_iterations: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Grape,
    Group,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub kind: ModeKind,
    /// GROUP basis sizes to sweep; ignored for GRAPE.
    #[serde(default)]
    pub basis_sizes: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub cost_tolerance: f64,
    pub memory: usize,
    pub sufficient_decrease: f64,
    pub curvature: f64,
    pub penalty_weight: f64,
    /// Amplitude scale of random starting waveforms (nutation Hz).
    pub initial_amplitude_hz: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let opts = OptimizerOptions::default();
        OptimizerConfig {
            max_iterations: opts.max_iterations,
            gradient_tolerance: opts.gradient_tolerance,
            cost_tolerance: opts.cost_tolerance,
            memory: opts.memory,
            sufficient_decrease: opts.line_search.sufficient_decrease,
            curvature: opts.line_search.curvature,
            penalty_weight: opts.penalty_weight,
            initial_amplitude_hz: 20e3,
        }
    }
}

impl OptimizerConfig {
    pub fn to_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            cost_tolerance: self.cost_tolerance,
            memory: self.memory,
            line_search: LineSearchParams {
                sufficient_decrease: self.sufficient_decrease,
                curvature: self.curvature,
                ..Default::default()
            },
            penalty_weight: self.penalty_weight,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_starts: usize,
    pub base_seed: u64,
    pub output_dir: String,
}

/// Full validated run configuration.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spin_system: SpinSystemConfig,
    pub pulse_grid: PulseGridConfig,
    #[serde(default)]
    pub powder: PowderConfig,
    pub mode: ModeConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn spin(&self) -> Result<Spin, CliError> {
        Spin::new(self.spin_system.spin)
            .map_err(|e| CliError::Config(format!("spin_system.spin: {e}")))
    }

    pub fn spin_system_params(&self) -> Result<SpinSystemParams, CliError> {
        let spin = self.spin()?;
        let quad = QuadrupoleParams::new(self.spin_system.cq_hz, self.spin_system.eta, spin)
            .map_err(|e| CliError::Config(format!("spin_system: {e}")))?;
        SpinSystemParams::new(
            quad,
            self.spin_system.larmor_hz,
            self.spin_system.shift_ppm,
            self.spin_system.rotor_hz,
        )
        .map_err(|e| CliError::Config(format!("spin_system: {e}")))
    }

    pub fn powder_spec(&self) -> Result<PowderSpec, CliError> {
        let mut spec = PowderSpec::new(
            self.powder.n_alpha_beta,
            self.powder.n_gamma,
            self.powder.rf_scales.clone(),
        )
        .map_err(|e| CliError::Config(format!("powder: {e}")))?;
        spec.repulsion_iterations = self.powder.repulsion_iterations;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.spin_system_params()?;
        self.powder_spec()?;
        if self.pulse_grid.n_steps == 0 {
            return Err(CliError::Config("pulse_grid.n_steps: must be at least 1".into()));
        }
        if !(self.pulse_grid.dt_s > 0.0) || !self.pulse_grid.dt_s.is_finite() {
            return Err(CliError::Config(format!(
                "pulse_grid.dt_s: must be finite and > 0, got {}",
                self.pulse_grid.dt_s
            )));
        }
        match self.mode.kind {
            ModeKind::Grape => {
                if !self.mode.basis_sizes.is_empty() {
                    return Err(CliError::Config(
                        "mode.basis_sizes: must be empty in grape mode".into(),
                    ));
                }
            }
            ModeKind::Group => {
                if self.mode.basis_sizes.is_empty() {
                    return Err(CliError::Config(
                        "mode.basis_sizes: group mode needs at least one basis size".into(),
                    ));
                }
                if self.mode.basis_sizes.iter().any(|&m| m == 0) {
                    return Err(CliError::Config(
                        "mode.basis_sizes: basis sizes must be >= 1".into(),
                    ));
                }
            }
        }
        self.optimizer
            .to_options()
            .validate()
            .map_err(|e| CliError::Config(format!("optimizer: {e}")))?;
        if !(self.optimizer.initial_amplitude_hz >= 0.0)
            || !self.optimizer.initial_amplitude_hz.is_finite()
        {
            return Err(CliError::Config(format!(
                "optimizer.initial_amplitude_hz: must be finite and >= 0, got {}",
                self.optimizer.initial_amplitude_hz
            )));
        }
        if self.run.n_starts == 0 {
            return Err(CliError::Config("run.n_starts: must be at least 1".into()));
        }
        if self.run.output_dir.is_empty() {
            return Err(CliError::Config("run.output_dir: must not be empty".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse and validate a configuration, filling defaults. Unknown keys
/// are rejected by the parser; range violations name the offending
/// field.
pub fn validate_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_config() -> String {
        r#"
[spin_system]
cq_hz = 3.2e6
eta = 0.2
larmor_hz = 130.9e6
rotor_hz = 30e3

[pulse_grid]
n_steps = 1331
dt_s = 1e-7

[mode]
kind = "grape"

[run]
n_starts = 20
base_seed = 1
output_dir = "out"
"#
        .to_string()
    }

    #[test]
    fn paper_defaults_are_accepted() {
        let cfg = validate_config(&paper_config()).unwrap();
        assert_eq!(cfg.spin_system.spin, 1.5);
        assert_eq!(cfg.spin_system.shift_ppm, 0.0);
        assert_eq!(cfg.powder.n_alpha_beta, 50);
        assert_eq!(cfg.powder.rf_scales, vec![0.95, 1.0, 1.05]);
        assert_eq!(cfg.optimizer.max_iterations, 500);
        assert_eq!(cfg.optimizer.memory, 20);
        assert_eq!(cfg.optimizer.initial_amplitude_hz, 20e3);
        // The normalized echo contains the defaulted optimizer block.
        let echoed = cfg.to_toml();
        assert!(echoed.contains("max_iterations = 500"));
        assert!(echoed.contains("initial_amplitude_hz = 20000.0"));
    }

    #[test]
    fn out_of_range_eta_names_the_field() {
        let text = paper_config().replace("eta = 0.2", "eta = 1.5");
        let err = validate_config(&text).unwrap_err().to_string();
        assert!(err.contains("eta"), "error did not name eta: {err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = paper_config() + "\n[spectrometer]\nfield_t = 9.4\n";
        assert!(validate_config(&text).is_err());
        let text2 = paper_config().replace("cq_hz = 3.2e6", "cq_hz = 3.2e6\ncq_mhz = 3.2");
        assert!(validate_config(&text2).is_err());
    }

    #[test]
    fn group_mode_needs_basis_sizes() {
        let text = paper_config().replace("kind = \"grape\"", "kind = \"group\"");
        assert!(validate_config(&text).is_err());
        let ok = paper_config()
            .replace("kind = \"grape\"", "kind = \"group\"\nbasis_sizes = [10, 100]");
        let cfg = validate_config(&ok).unwrap();
        assert_eq!(cfg.mode.basis_sizes, vec![10, 100]);
    }

    #[test]
    fn grape_mode_rejects_basis_sizes() {
        let text =
            paper_config().replace("kind = \"grape\"", "kind = \"grape\"\nbasis_sizes = [10]");
        assert!(validate_config(&text).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = validate_config(&paper_config()).unwrap();
        let echoed = cfg.to_toml();
        let again = validate_config(&echoed).unwrap();
        assert_eq!(cfg, again);
    }
}

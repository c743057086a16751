//! Run orchestration: build the ensemble, sweep modes/basis sizes with
//! multistart optimization, persist per-run artifacts, and write the
//! manifest (checkpointed every few completed runs).

use std::path::{Path, PathBuf};
use std::time::Instant;

use mqpulse::groupbasis::ResponseMatrix;
use mqpulse::objective::{EnsembleProblem, Normalization};
use mqpulse::optimizer::{OptimizationRun, PulseOptimization, RunMode};
use mqpulse::powder::{build_ensemble, write_ensemble_text};

use crate::config::{ModeKind, RunConfig};
use crate::manifest::{FailureRecord, RunManifest, RunRecord, ARTIFACT_VERSION};
use crate::pulsefile::{save_pulse, CoefficientFile};
use crate::CliError;

const TAU: f64 = std::f64::consts::TAU;
const CHECKPOINT_EVERY: usize = 10;

const ENSEMBLE_FILE: &str = "ensemble.txt";
const CONFIG_ECHO_FILE: &str = "config_normalized.toml";

fn mode_dir_name(mode: RunMode, seed: u64) -> String {
    match mode {
        RunMode::Grape => format!("grape_seed{seed:05}"),
        RunMode::Group { basis_size } => format!("group_m{basis_size:03}_seed{seed:05}"),
    }
}

fn write_history(path: &Path, run: &OptimizationRun) -> Result<(), CliError> {
    let mut text = String::from("iteration\tcost\tgrad_norm\tstep_size\n");
    for (i, rec) in run.history.iter().enumerate() {
        text.push_str(&format!(
            "{i}\t{:.12e}\t{:.12e}\t{:.12e}\n",
            rec.cost, rec.grad_norm, rec.step_size
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Execute every optimization requested by the config and persist the
/// artifacts under `config.run.output_dir`. Returns the manifest (also
/// written to disk).
pub fn run_optimize(config: &RunConfig) -> Result<RunManifest, CliError> {
    let t_start = Instant::now();
    let out_dir = PathBuf::from(&config.run.output_dir);
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join(CONFIG_ECHO_FILE), config.to_toml())?;

    let params = config.spin_system_params()?;
    let spec = config.powder_spec()?;
    let ensemble = build_ensemble(&spec, &params, config.run.base_seed)?;
    let mut ensemble_text = Vec::new();
    write_ensemble_text(&mut ensemble_text, &ensemble)?;
    std::fs::write(out_dir.join(ENSEMBLE_FILE), ensemble_text)?;

    let n_steps = config.pulse_grid.n_steps;
    let dt = config.pulse_grid.dt_s;
    let problem =
        EnsembleProblem::new(&ensemble, n_steps, dt, Normalization::three_quantum_iz())?;

    let modes: Vec<RunMode> = match config.mode.kind {
        ModeKind::Grape => vec![RunMode::Grape],
        ModeKind::Group => config
            .mode
            .basis_sizes
            .iter()
            .map(|&basis_size| RunMode::Group { basis_size })
            .collect(),
    };

    let opts = config.optimizer.to_options();
    let initial_scale = TAU * config.optimizer.initial_amplitude_hz;

    let mut manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config: config.clone(),
        ensemble_file: ENSEMBLE_FILE.to_string(),
        runs: Vec::new(),
        failures: Vec::new(),
        wall_seconds_total: 0.0,
    };

    let mut completed = 0usize;
    for mode in modes {
        let response = match mode {
            RunMode::Grape => None,
            RunMode::Group { basis_size } => {
                Some(ResponseMatrix::fourier(basis_size, n_steps, dt)?)
            }
        };
        let optimization = PulseOptimization {
            problem: &problem,
            mode,
            response: response.as_ref(),
            initial_scale,
        };
        let (mode_name, basis_size) = match mode {
            RunMode::Grape => ("grape".to_string(), None),
            RunMode::Group { basis_size } => ("group".to_string(), Some(basis_size)),
        };

        // Runs execute one by one (ensemble members already evaluate in
        // parallel inside each cost call); each run is seeded
        // independently as base_seed + start index.
        for i in 0..config.run.n_starts {
            let seed = config.run.base_seed + i as u64;
            let t_run = Instant::now();
            match optimization.run_single(seed, &opts) {
                Ok(run) => {
                    let dir_name = mode_dir_name(mode, seed);
                    let run_dir = out_dir.join(&dir_name);
                    std::fs::create_dir_all(&run_dir)?;
                    let pulse_file = format!("{dir_name}/pulse.json");
                    save_pulse(&out_dir.join(&pulse_file), &run.pulse)?;
                    let history_file = format!("{dir_name}/history.tsv");
                    write_history(&out_dir.join(&history_file), &run)?;
                    let coefficients_file = match &run.coefficients {
                        Some(coeffs) => {
                            let name = format!("{dir_name}/coefficients.json");
                            let file = CoefficientFile::new(coeffs, n_steps, dt);
                            std::fs::write(
                                out_dir.join(&name),
                                serde_json::to_string_pretty(&file)?,
                            )?;
                            Some(name)
                        }
                        None => None,
                    };
                    manifest.runs.push(RunRecord {
                        mode: mode_name.clone(),
                        basis_size,
                        seed,
                        final_fidelity: run.final_fidelity,
                        final_cost: run.final_cost,
                        iterations: run.history.len() - 1,
                        n_evaluations: run.n_evaluations,
                        termination: run.termination.as_str().to_string(),
                        wall_seconds: t_run.elapsed().as_secs_f64(),
                        pulse_file,
                        coefficients_file,
                        history_file,
                    });
                }
                Err(e) => {
                    manifest.failures.push(FailureRecord {
                        mode: mode_name.clone(),
                        basis_size,
                        seed,
                        message: e.to_string(),
                    });
                }
            }
            completed += 1;
            if completed % CHECKPOINT_EVERY == 0 {
                manifest.wall_seconds_total = t_start.elapsed().as_secs_f64();
                manifest.save(&out_dir)?;
            }
        }
    }

    manifest.wall_seconds_total = t_start.elapsed().as_secs_f64();
    manifest.save(&out_dir)?;
    Ok(manifest)
}

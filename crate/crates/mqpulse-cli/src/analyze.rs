//! Post-run analysis: fidelity quartiles per mode/basis size, averaged
//! pulse spectra, and spectral energy fractions at the basis cutoff
//! frequencies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mqpulse::analysis::{
    average_spectrum, quartile_stats, spectral_energy_fraction, write_spectrum_table,
};
use mqpulse::propagation::PulseShape;

use crate::manifest::RunManifest;
use crate::pulsefile::load_pulse;
use crate::CliError;

/// Group key: GRAPE runs have no basis size.
type GroupKey = (String, Option<usize>);

fn group_label(key: &GroupKey) -> String {
    match key {
        (mode, Some(m)) => format!("{mode}_m{m:03}"),
        (mode, None) => mode.clone(),
    }
}

/// Half-period sine cutoff frequency (M+1)/(2T) for basis size M over
/// duration T.
pub fn basis_cutoff_hz(basis_size: usize, duration_s: f64) -> f64 {
    (basis_size as f64 + 1.0) / (2.0 * duration_s)
}

/// Files produced by one analysis pass.
#[derive(Debug)]
pub struct AnalysisArtifacts {
    pub quartile_table: PathBuf,
    pub spectrum_tables: Vec<PathBuf>,
    pub energy_table: PathBuf,
}

/// Read a run directory and emit the quartile/spectrum/energy tables.
pub fn run_analyze(dir: &Path) -> Result<AnalysisArtifacts, CliError> {
    let manifest = RunManifest::load(dir)?;
    if manifest.runs.is_empty() {
        return Err(CliError::Format("manifest contains no completed runs".into()));
    }

    let mut groups: BTreeMap<GroupKey, Vec<(f64, PulseShape)>> = BTreeMap::new();
    for rec in &manifest.runs {
        let pulse = load_pulse(&dir.join(&rec.pulse_file))?;
        groups
            .entry((rec.mode.clone(), rec.basis_size))
            .or_default()
            .push((rec.final_fidelity, pulse));
    }

    // Fidelity quartiles per group.
    let mut quartiles = String::from("mode\tbasis_size\tn\tmin\tq25\tmedian\tq75\tmax\n");
    for (key, runs) in &groups {
        let fidelities: Vec<f64> = runs.iter().map(|(f, _)| *f).collect();
        let s = quartile_stats(&fidelities)?;
        quartiles.push_str(&format!(
            "{}\t{}\t{}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.12e}\n",
            key.0,
            key.1.map_or("-".to_string(), |m| m.to_string()),
            fidelities.len(),
            s.min,
            s.q25,
            s.median,
            s.q75,
            s.max
        ));
    }
    let quartile_table = dir.join("quartiles.tsv");
    std::fs::write(&quartile_table, quartiles)?;

    // Average spectrum per group.
    let mut spectrum_tables = Vec::new();
    let mut spectra = BTreeMap::new();
    for (key, runs) in &groups {
        let pulses: Vec<PulseShape> = runs.iter().map(|(_, p)| p.clone()).collect();
        let spectrum = average_spectrum(&pulses)?;
        let path = dir.join(format!("spectrum_{}.tsv", group_label(key)));
        let mut buf = Vec::new();
        write_spectrum_table(&mut buf, &spectrum)?;
        std::fs::write(&path, buf)?;
        spectrum_tables.push(path);
        spectra.insert(key.clone(), spectrum);
    }

    // Energy fraction below each basis cutoff present in the run set;
    // GRAPE groups are evaluated at every GROUP cutoff for comparison.
    let duration = manifest.config.pulse_grid.n_steps as f64 * manifest.config.pulse_grid.dt_s;
    let cutoffs: Vec<usize> = groups
        .keys()
        .filter_map(|(_, basis)| *basis)
        .collect();
    let mut energy = String::from("mode\tbasis_size\tcutoff_basis\tf_cut_hz\tfraction_below\n");
    for (key, spectrum) in &spectra {
        let own: Vec<usize> = match key.1 {
            Some(m) => vec![m],
            None => cutoffs.clone(),
        };
        for m in own {
            let f_cut = basis_cutoff_hz(m, duration);
            let frac = spectral_energy_fraction(spectrum, f_cut)?;
            energy.push_str(&format!(
                "{}\t{}\t{}\t{:.12e}\t{:.12e}\n",
                key.0,
                key.1.map_or("-".to_string(), |m| m.to_string()),
                m,
                f_cut,
                frac
            ));
        }
    }
    let energy_table = dir.join("energy_fraction.tsv");
    std::fs::write(&energy_table, energy)?;

    Ok(AnalysisArtifacts { quartile_table, spectrum_tables, energy_table })
}

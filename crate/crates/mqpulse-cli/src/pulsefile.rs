//! Pulse persistence and shape export.
//!
//! Pulses are stored in nutation-frequency units (Hz) and converted to
//! rad/s on load. The native format is JSON; CSV (time/ux/uy columns)
//! round-trips through export/import, and the vendor text format emits
//! amplitude-percent / phase-degree rows.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mqpulse::groupbasis::GroupParametrization;
use mqpulse::propagation::PulseShape;

use crate::CliError;

/// On-disk pulse record (Hz).
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    pub n_steps: usize,
    pub dt_s: f64,
    pub ux_hz: Vec<f64>,
    pub uy_hz: Vec<f64>,
}

impl PulseFile {
    pub fn from_pulse(pulse: &PulseShape) -> Self {
        PulseFile {
            n_steps: pulse.n_steps(),
            dt_s: pulse.dt(),
            ux_hz: pulse.values().iter().map(|v| v[0] / TAU).collect(),
            uy_hz: pulse.values().iter().map(|v| v[1] / TAU).collect(),
        }
    }

    pub fn to_pulse(&self) -> Result<PulseShape, CliError> {
        if self.ux_hz.len() != self.n_steps || self.uy_hz.len() != self.n_steps {
            return Err(CliError::Format(format!(
                "pulse file claims {} steps but holds {}/{} samples",
                self.n_steps,
                self.ux_hz.len(),
                self.uy_hz.len()
            )));
        }
        let values = self
            .ux_hz
            .iter()
            .zip(&self.uy_hz)
            .map(|(&x, &y)| [x * TAU, y * TAU])
            .collect();
        PulseShape::new(self.dt_s, values).map_err(CliError::Lib)
    }
}

/// On-disk GROUP coefficient record (Hz).
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFile {
    pub basis_size: usize,
    pub n_steps: usize,
    pub dt_s: f64,
    pub cx_hz: Vec<f64>,
    pub cy_hz: Vec<f64>,
}

impl CoefficientFile {
    pub fn new(coefficients: &[[f64; 2]], n_steps: usize, dt_s: f64) -> Self {
        CoefficientFile {
            basis_size: coefficients.len(),
            n_steps,
            dt_s,
            cx_hz: coefficients.iter().map(|c| c[0] / TAU).collect(),
            cy_hz: coefficients.iter().map(|c| c[1] / TAU).collect(),
        }
    }

    pub fn to_parametrization(&self) -> Result<GroupParametrization, CliError> {
        let coefficients: Vec<[f64; 2]> = self
            .cx_hz
            .iter()
            .zip(&self.cy_hz)
            .map(|(&x, &y)| [x * TAU, y * TAU])
            .collect();
        GroupParametrization::new(coefficients, self.n_steps, self.dt_s).map_err(CliError::Lib)
    }
}

pub fn save_pulse(path: &Path, pulse: &PulseShape) -> Result<(), CliError> {
    let file = PulseFile::from_pulse(pulse);
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Load a pulse from its native JSON or from an exported CSV.
pub fn load_pulse(path: &Path) -> Result<PulseShape, CliError> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_csv(&text),
        _ => {
            let file: PulseFile = serde_json::from_str(&text)?;
            file.to_pulse()
        }
    }
}

/// CSV export: `time_s,ux_hz,uy_hz` at 12 significant digits, preceded
/// by a comment header carrying the exact step length.
pub fn write_csv<W: std::io::Write>(mut w: W, pulse: &PulseShape) -> Result<(), CliError> {
    writeln!(w, "# mqpulse shape n_steps={} dt_s={:.16e}", pulse.n_steps(), pulse.dt())?;
    writeln!(w, "time_s,ux_hz,uy_hz")?;
    for (j, v) in pulse.values().iter().enumerate() {
        writeln!(
            w,
            "{:.11e},{:.11e},{:.11e}",
            j as f64 * pulse.dt(),
            v[0] / TAU,
            v[1] / TAU
        )?;
    }
    Ok(())
}

fn parse_csv(text: &str) -> Result<PulseShape, CliError> {
    let mut dt_header: Option<f64> = None;
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<[f64; 2]> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some(v) = token.strip_prefix("dt_s=") {
                    dt_header = v.parse().ok();
                }
            }
            continue;
        }
        if line.starts_with("time_s") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Format(format!("bad csv row: {line}")));
        }
        let t: f64 = fields[0].trim().parse().map_err(|_| {
            CliError::Format(format!("bad time value: {}", fields[0]))
        })?;
        let ux: f64 = fields[1].trim().parse().map_err(|_| {
            CliError::Format(format!("bad ux value: {}", fields[1]))
        })?;
        let uy: f64 = fields[2].trim().parse().map_err(|_| {
            CliError::Format(format!("bad uy value: {}", fields[2]))
        })?;
        times.push(t);
        values.push([ux * TAU, uy * TAU]);
    }
    if values.is_empty() {
        return Err(CliError::Format("csv contains no samples".into()));
    }
    let dt = match dt_header {
        Some(dt) => dt,
        None if times.len() >= 2 => times[1] - times[0],
        None => {
            return Err(CliError::Format(
                "cannot infer dt from a single-row csv without a header".into(),
            ))
        }
    };
    PulseShape::new(dt, values).map_err(CliError::Lib)
}

/// Vendor text export: one `amplitude_percent phase_degrees` row per
/// step with a comment header. Zero-amplitude steps emit `0 0`.
pub fn write_vendor<W: std::io::Write>(mut w: W, pulse: &PulseShape) -> Result<(), CliError> {
    let max_amp = pulse
        .values()
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .fold(0.0f64, f64::max);
    writeln!(
        w,
        "# mqpulse vendor shape n_steps={} dt_s={:.16e} max_nutation_hz={:.12e}",
        pulse.n_steps(),
        pulse.dt(),
        max_amp / TAU
    )?;
    for v in pulse.values() {
        let amp = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if amp == 0.0 || max_amp == 0.0 {
            writeln!(w, "0.000000 0.000000")?;
        } else {
            let pct = 100.0 * amp / max_amp;
            let phase = v[1].atan2(v[0]).to_degrees().rem_euclid(360.0);
            writeln!(w, "{pct:.6} {phase:.6}")?;
        }
    }
    Ok(())
}

/// Shape-export formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Vendor,
}

pub fn export_shape(
    pulse_path: &Path,
    format: ExportFormat,
    out_path: &Path,
) -> Result<(), CliError> {
    let pulse = load_pulse(pulse_path)?;
    let mut buf = Vec::new();
    match format {
        ExportFormat::Csv => write_csv(&mut buf, &pulse)?,
        ExportFormat::Vendor => write_vendor(&mut buf, &pulse)?,
    }
    std::fs::write(out_path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(values: Vec<[f64; 2]>) -> PulseShape {
        PulseShape::new(1e-7, values).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = pulse(vec![[TAU * 1.25e4, -TAU * 3.5e3], [0.0, TAU * 9.9e4]]);
        let file = PulseFile::from_pulse(&p);
        let text = serde_json::to_string(&file).unwrap();
        let back: PulseFile = serde_json::from_str(&text).unwrap();
        let q = back.to_pulse().unwrap();
        assert_eq!(p.values(), q.values());
        assert_eq!(p.dt(), q.dt());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let p = pulse(vec![
            [TAU * 1.2345678901e4, -TAU * 3.5e3],
            [TAU * -7.77e2, TAU * 9.87654321e4],
            [0.0, 0.0],
        ]);
        let mut first = Vec::new();
        write_csv(&mut first, &p).unwrap();
        let reimported = parse_csv(std::str::from_utf8(&first).unwrap()).unwrap();
        let mut second = Vec::new();
        write_csv(&mut second, &reimported).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn vendor_constant_x_pulse() {
        let p = pulse(vec![[TAU * 5e4, 0.0]; 4]);
        let mut buf = Vec::new();
        write_vendor(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 4);
        for row in rows {
            let mut it = row.split_whitespace();
            let amp: f64 = it.next().unwrap().parse().unwrap();
            let phase: f64 = it.next().unwrap().parse().unwrap();
            assert!((amp - 100.0).abs() < 1e-9);
            assert_eq!(phase, 0.0);
        }
        assert!(text.contains("max_nutation_hz=5.000000000000e4"));
    }

    #[test]
    fn vendor_constant_y_pulse_has_phase_90() {
        let p = pulse(vec![[0.0, TAU * 5e4]; 2]);
        let mut buf = Vec::new();
        write_vendor(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().find(|l| !l.starts_with('#')).unwrap();
        let phase: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((phase - 90.0).abs() < 1e-9);
    }

    #[test]
    fn vendor_zero_pulse_uses_zero_convention() {
        let p = pulse(vec![[0.0, 0.0]; 3]);
        let mut buf = Vec::new();
        write_vendor(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for row in text.lines().filter(|l| !l.starts_with('#')) {
            assert_eq!(row, "0.000000 0.000000");
        }
    }

    #[test]
    fn vendor_phase_wraps_into_0_360() {
        // Third quadrant: atan2 < 0 must wrap to (180, 270).
        let p = pulse(vec![[-TAU * 1e4, -TAU * 1e4]]);
        let mut buf = Vec::new();
        write_vendor(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().find(|l| !l.starts_with('#')).unwrap();
        let phase: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((phase - 225.0).abs() < 1e-9);
    }

    #[test]
    fn csv_without_header_infers_dt() {
        let text = "time_s,ux_hz,uy_hz\n0.0,1.0,2.0\n2.5e-7,3.0,4.0\n";
        let p = parse_csv(text).unwrap();
        assert_eq!(p.dt(), 2.5e-7);
        assert_eq!(p.n_steps(), 2);
        assert!((p.values()[1][0] - 3.0 * TAU).abs() < 1e-12);
    }

    #[test]
    fn csv_errors() {
        assert!(parse_csv("time_s,ux_hz,uy_hz\n").is_err());
        assert!(parse_csv("time_s,ux_hz,uy_hz\n0.0,1.0\n").is_err());
        assert!(parse_csv("time_s,ux_hz,uy_hz\n0.0,a,2.0\n").is_err());
        assert!(parse_csv("time_s,ux_hz,uy_hz\n0.0,1.0,2.0\n").is_err()); // single row, no dt
    }
}

//! Pulse spectral diagnostics, distribution statistics over multistart
//! runs, and a small linear-fit/R^2 tool for comparing fidelity
//! predictions against measured intensities.

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::propagation::PulseShape;

/// Centered discrete spectrum of the complex control waveform
/// u_x + i u_y.
#[derive(Clone, Debug)]
pub struct PulseSpectrum {
    /// Bin frequencies in Hz, ascending, spanning [-1/(2 dt), +1/(2 dt)).
    pub frequencies: Vec<f64>,
    /// |FT| per bin with 1/N normalization, rad/s per bin.
    pub magnitude: Vec<f64>,
}

/// DFT magnitude of `u_x + i u_y`, no window, 1/N normalization,
/// frequencies centered on zero.
pub fn pulse_spectrum(pulse: &PulseShape) -> PulseSpectrum {
    let n = pulse.n_steps();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = pulse
        .values()
        .iter()
        .map(|v| rustfft::num_complex::Complex::new(v[0], v[1]))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let shift = n.div_ceil(2);
    let scale = 1.0 / n as f64;
    let df = 1.0 / (n as f64 * pulse.dt());
    let mut frequencies = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    for i in 0..n {
        let raw = (i + shift) % n;
        let k = raw as i64 - if raw >= shift { n as i64 } else { 0 };
        frequencies.push(k as f64 * df);
        magnitude.push(buf[raw].norm() * scale);
    }
    PulseSpectrum { frequencies, magnitude }
}

/// Elementwise mean of the magnitude spectra of several pulses sharing
/// one time grid.
pub fn average_spectrum(pulses: &[PulseShape]) -> Result<PulseSpectrum> {
    let first = pulses.first().ok_or(Error::EmptyInput("average_spectrum needs pulses"))?;
    let n = first.n_steps();
    let dt = first.dt();
    if pulses.iter().any(|p| p.n_steps() != n || p.dt() != dt) {
        return Err(Error::InvalidParameter {
            field: "pulses",
            message: "all pulses must share the same N and dt".into(),
        });
    }
    let mut acc = pulse_spectrum(first);
    for p in &pulses[1..] {
        let s = pulse_spectrum(p);
        for (a, m) in acc.magnitude.iter_mut().zip(&s.magnitude) {
            *a += m;
        }
    }
    let inv = 1.0 / pulses.len() as f64;
    for a in acc.magnitude.iter_mut() {
        *a *= inv;
    }
    Ok(acc)
}

/// Fraction of squared spectral magnitude at |f| <= f_cut. Returns 1 for
/// an identically zero spectrum.
pub fn spectral_energy_fraction(spectrum: &PulseSpectrum, f_cut: f64) -> Result<f64> {
    if !(f_cut >= 0.0) {
        return Err(Error::InvalidParameter {
            field: "f_cut",
            message: format!("must be >= 0, got {f_cut}"),
        });
    }
    let mut total = 0.0;
    let mut below = 0.0;
    for (f, m) in spectrum.frequencies.iter().zip(&spectrum.magnitude) {
        let e = m * m;
        total += e;
        if f.abs() <= f_cut {
            below += e;
        }
    }
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok(below / total)
}

/// Five-number summary with linear-interpolation quantiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuartileSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Min/quartiles/max of a nonempty sample.
pub fn quartile_stats(values: &[f64]) -> Result<QuartileSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quartile_stats needs at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "values",
            message: "all values must be finite".into(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(QuartileSummary {
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Least-squares line fit; returns (slope, intercept, r_squared) with
/// `r_squared = 1 - SS_res / SS_tot` (0 when y is constant).
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "linear_fit_r2: x vs y length",
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("linear_fit_r2 needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("linear_fit_r2: x values are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        let ss_res = syy - slope * sxy;
        1.0 - ss_res / syy
    };
    Ok((slope, intercept, r_squared))
}

/// Two-column frequency/magnitude table, tab-separated.
pub fn write_spectrum_table<W: std::io::Write>(
    mut w: W,
    spectrum: &PulseSpectrum,
) -> std::io::Result<()> {
    writeln!(w, "frequency_hz\tmagnitude")?;
    for (f, m) in spectrum.frequencies.iter().zip(&spectrum.magnitude) {
        writeln!(w, "{f:.12e}\t{m:.12e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn dc_pulse_has_single_zero_bin() {
        let pulse = PulseShape::new(1e-7, vec![[5.0e4, 0.0]; 64]).unwrap();
        let spec = pulse_spectrum(&pulse);
        for (f, m) in spec.frequencies.iter().zip(&spec.magnitude) {
            if *f == 0.0 {
                assert!((m - 5.0e4).abs() < 1e-9);
            } else {
                assert!(*m < 1e-9, "leakage at {f} Hz: {m}");
            }
        }
    }

    #[test]
    fn frequencies_are_centered_and_ascending() {
        for n in [16usize, 17, 1331] {
            let pulse = PulseShape::zero(1e-7, n).unwrap();
            let spec = pulse_spectrum(&pulse);
            assert_eq!(spec.frequencies.len(), n);
            for w in spec.frequencies.windows(2) {
                assert!(w[1] > w[0]);
            }
            let nyquist = 0.5 / 1e-7;
            assert!(spec.frequencies[0] >= -nyquist - 1e-6);
            assert!(*spec.frequencies.last().unwrap() < nyquist);
            // Zero must be an exact bin.
            assert!(spec.frequencies.iter().any(|&f| f == 0.0));
        }
    }

    #[test]
    fn complex_tone_lands_on_its_bin() {
        // u_x + i u_y = exp(2 pi i f0 t) puts all energy in one positive
        // bin.
        let n = 128;
        let dt = 1e-7;
        let k0 = 13;
        let f0 = k0 as f64 / (n as f64 * dt);
        let values: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let ph = TAU * f0 * j as f64 * dt;
                [ph.cos(), ph.sin()]
            })
            .collect();
        let spec = pulse_spectrum(&PulseShape::new(dt, values).unwrap());
        for (f, m) in spec.frequencies.iter().zip(&spec.magnitude) {
            if (f - f0).abs() < 1.0 {
                assert!((m - 1.0).abs() < 1e-9);
            } else {
                assert!(*m < 1e-9);
            }
        }
    }

    #[test]
    fn parseval_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [64usize, 1331] {
            let values: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)])
                .collect();
            let pulse = PulseShape::new(1e-7, values).unwrap();
            let spec = pulse_spectrum(&pulse);
            let lhs: f64 =
                spec.magnitude.iter().map(|m| m * m).sum::<f64>() * n as f64;
            let rhs: f64 = pulse
                .values()
                .iter()
                .map(|v| v[0] * v[0] + v[1] * v[1])
                .sum();
            assert!((lhs - rhs).abs() < 1e-10 * rhs, "Parseval violated: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn group_expansion_concentrates_at_basis_frequency() {
        use crate::groupbasis::{expand, GroupParametrization, ResponseMatrix};
        let n = 256;
        let dt = 1e-7;
        let m = 7usize; // f = (m+1)/(2T), a half-integer bin
        let resp = ResponseMatrix::fourier(8, n, dt).unwrap();
        let mut coeffs = vec![[0.0; 2]; 8];
        coeffs[m][0] = 1e5;
        let pulse =
            expand(&GroupParametrization::new(coeffs, n, dt).unwrap(), &resp).unwrap();
        let spec = pulse_spectrum(&pulse);
        let f_tone = (m as f64 + 1.0) / (2.0 * n as f64 * dt);
        // The two dominant bins flank +/- f_tone.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| spec.magnitude[b].total_cmp(&spec.magnitude[a]));
        let df = 1.0 / (n as f64 * dt);
        assert!((spec.frequencies[order[0]].abs() - f_tone).abs() <= df);
        assert!((spec.frequencies[order[1]].abs() - f_tone).abs() <= df);
    }

    #[test]
    fn average_of_identical_pulses_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let values: Vec<[f64; 2]> = (0..64)
            .map(|_| [rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)])
            .collect();
        let p = PulseShape::new(1e-7, values).unwrap();
        let one = pulse_spectrum(&p);
        let avg = average_spectrum(&[p.clone(), p.clone()]).unwrap();
        for (a, b) in one.magnitude.iter().zip(&avg.magnitude) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        // Mixed grids are rejected.
        let q = PulseShape::zero(2e-7, 64).unwrap();
        assert!(average_spectrum(&[p.clone(), q]).is_err());
        let r = PulseShape::zero(1e-7, 32).unwrap();
        assert!(average_spectrum(&[p, r]).is_err());
        assert!(average_spectrum(&[]).is_err());
    }

    #[test]
    fn energy_fraction_basics() {
        let n = 128;
        let dt = 1e-7;
        let k0 = 13;
        let f0 = k0 as f64 / (n as f64 * dt);
        let values: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let ph = TAU * f0 * j as f64 * dt;
                [ph.cos(), ph.sin()]
            })
            .collect();
        let spec = pulse_spectrum(&PulseShape::new(dt, values).unwrap());
        let nyquist = 0.5 / dt;
        assert_eq!(spectral_energy_fraction(&spec, nyquist).unwrap(), 1.0);
        assert!(spectral_energy_fraction(&spec, 0.0).unwrap() < 1e-12);
        // Monotone in f_cut.
        let mut prev = 0.0;
        for k in 0..20 {
            let f = spectral_energy_fraction(&spec, k as f64 * nyquist / 19.0).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        assert!(spectral_energy_fraction(&spec, -1.0).is_err());
    }

    #[test]
    fn quartiles_match_conventions() {
        let s = quartile_stats(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.median, 3.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 5.0);
        assert_eq!(s.q25, 2.0);
        assert_eq!(s.q75, 4.0);

        let t = quartile_stats(&[0.0, 1.0]).unwrap();
        assert_eq!(t.median, 0.5);
        assert_eq!(t.q25, 0.25);
        assert_eq!(t.q75, 0.75);

        let u = quartile_stats(&[2.0; 7]).unwrap();
        assert_eq!(u.min, 2.0);
        assert_eq!(u.q25, 2.0);
        assert_eq!(u.median, 2.0);
        assert_eq!(u.q75, 2.0);
        assert_eq!(u.max, 2.0);

        assert!(quartile_stats(&[]).is_err());
        assert!(quartile_stats(&[f64::NAN]).is_err());

        let single = quartile_stats(&[0.42]).unwrap();
        assert_eq!(single.median, 0.42);
        assert_eq!(single.min, single.max);
    }

    #[test]
    fn quartile_ordering_invariant_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let n = rng.random_range(1..200);
            let vals: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let s = quartile_stats(&vals).unwrap();
            assert!(s.min <= s.q25 && s.q25 <= s.median && s.median <= s.q75 && s.q75 <= s.max);
        }
    }

    #[test]
    fn exact_line_fits_perfectly() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|xi| 2.0 * xi + 1.0).collect();
        let (slope, intercept, r2) = linear_fit_r2(&x, &y).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_y_has_zero_r2() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [4.0; 4];
        let (slope, _, r2) = linear_fit_r2(&x, &y).unwrap();
        assert_eq!(slope, 0.0);
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(linear_fit_r2(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(linear_fit_r2(&[1.0], &[0.0]).is_err());
        assert!(linear_fit_r2(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn noisy_line_r2_matches_noise_model() {
        // y = x + gaussian(sigma) over x ~ U[0,1):
        // R^2 should approach 1 - sigma^2 / var(y).
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let sigma = 0.15;
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let xi: f64 = rng.random_range(0.0..1.0);
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random_range(0.0..TAU);
            let noise = sigma * (-2.0 * u1.ln()).sqrt() * u2.cos();
            x.push(xi);
            y.push(xi + noise);
        }
        let (_, _, r2) = linear_fit_r2(&x, &y).unwrap();
        let my = y.iter().sum::<f64>() / n as f64;
        let var_y = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n as f64;
        let expected = 1.0 - sigma * sigma / var_y;
        assert!((r2 - expected).abs() < 0.05, "r2 = {r2}, expected ~{expected}");
    }
}

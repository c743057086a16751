//! Reduced-basis pulse parametrization: a Fourier sine basis, the
//! response matrix mapping coefficients to piecewise control values,
//! and the chain-rule projection of per-step gradients onto the
//! coefficients.

use crate::error::{Error, Result};
use crate::propagation::PulseShape;

/// Linear map T[m][j] from basis coefficient m to control value at step
/// j; both channels share one response.
#[derive(Clone, Debug)]
pub struct ResponseMatrix {
    basis_size: usize,
    n_steps: usize,
    dt: f64,
    /// basis_size x n_steps, row-major.
    entries: Vec<f64>,
}

impl ResponseMatrix {
    /// Sine basis `sin((m+1) pi j dt / T)` on the step grid, `T = N dt`,
    /// with unit shape function. Every row vanishes at `j = 0` and at
    /// the (virtual) endpoint `j = N`.
    pub fn fourier(basis_size: usize, n_steps: usize, dt: f64) -> Result<Self> {
        Self::with_shape(basis_size, n_steps, dt, |_| 1.0)
    }

    /// Sine basis multiplied by an arbitrary shape function `s(t)`; the
    /// hook for substituting a measured transfer response.
    pub fn with_shape<F: Fn(f64) -> f64>(
        basis_size: usize,
        n_steps: usize,
        dt: f64,
        shape: F,
    ) -> Result<Self> {
        if basis_size == 0 {
            return Err(Error::InvalidParameter {
                field: "basis_size",
                message: "need at least one basis function".into(),
            });
        }
        if n_steps < 2 {
            return Err(Error::InvalidParameter {
                field: "n_steps",
                message: format!("need at least 2 steps, got {n_steps}"),
            });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dt",
                message: format!("must be finite and > 0, got {dt}"),
            });
        }
        let duration = n_steps as f64 * dt;
        let mut entries = Vec::with_capacity(basis_size * n_steps);
        for m in 0..basis_size {
            let freq = (m + 1) as f64 * std::f64::consts::PI / duration;
            for j in 0..n_steps {
                let t = j as f64 * dt;
                entries.push((freq * t).sin() * shape(t));
            }
        }
        Ok(ResponseMatrix { basis_size, n_steps, dt, entries })
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.entries[m * self.n_steps..(m + 1) * self.n_steps]
    }
}

/// Fourier coefficients for both channels plus the grid they expand on.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupParametrization {
    pub basis_size: usize,
    /// c_{k,m}: one [x, y] pair per basis function, rad/s.
    pub coefficients: Vec<[f64; 2]>,
    pub n_steps: usize,
    /// Total pulse length N dt in seconds.
    pub duration: f64,
}

impl GroupParametrization {
    pub fn new(coefficients: Vec<[f64; 2]>, n_steps: usize, dt: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::EmptyInput("GROUP parametrization needs coefficients"));
        }
        if coefficients.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::InvalidParameter {
                field: "coefficients",
                message: "all coefficients must be finite".into(),
            });
        }
        Ok(GroupParametrization {
            basis_size: coefficients.len(),
            coefficients,
            n_steps,
            duration: n_steps as f64 * dt,
        })
    }
}

/// Expand coefficients into the piecewise-constant waveform
/// `u_{k,j} = sum_m c_{k,m} T[m][j]`.
pub fn expand(param: &GroupParametrization, response: &ResponseMatrix) -> Result<PulseShape> {
    if param.basis_size != response.basis_size() || param.n_steps != response.n_steps() {
        return Err(Error::DimensionMismatch {
            context: "expand: parametrization vs response matrix",
            left: param.basis_size,
            right: response.basis_size(),
        });
    }
    let n = response.n_steps();
    let mut values = vec![[0.0f64; 2]; n];
    for (m, c) in param.coefficients.iter().enumerate() {
        let row = response.row(m);
        for (v, &t) in values.iter_mut().zip(row) {
            v[0] += c[0] * t;
            v[1] += c[1] * t;
        }
    }
    PulseShape::new(response.dt(), values)
}

/// Chain rule: `dJ/dc_{k,m} = sum_j dJ/du_{k,j} T[m][j]`.
pub fn project_gradient(grad_u: &[[f64; 2]], response: &ResponseMatrix) -> Result<Vec<[f64; 2]>> {
    if grad_u.len() != response.n_steps() {
        return Err(Error::DimensionMismatch {
            context: "project_gradient: gradient length vs response matrix",
            left: grad_u.len(),
            right: response.n_steps(),
        });
    }
    let mut out = vec![[0.0f64; 2]; response.basis_size()];
    for (m, o) in out.iter_mut().enumerate() {
        let row = response.row(m);
        for (g, &t) in grad_u.iter().zip(row) {
            o[0] += g[0] * t;
            o[1] += g[1] * t;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn response_entries_are_sines() {
        let n = 64;
        let dt = 1e-7;
        let resp = ResponseMatrix::fourier(8, n, dt).unwrap();
        // m = 0 at the midpoint: sin(pi/2) = 1.
        assert!((resp.row(0)[n / 2] - 1.0).abs() < 1e-12);
        // m = 1 at the quarter point: sin(pi/2) = 1.
        assert!((resp.row(1)[n / 4] - 1.0).abs() < 1e-12);
        // Every row is zero at the boundary.
        for m in 0..8 {
            assert_eq!(resp.row(m)[0], 0.0);
        }
    }

    #[test]
    fn expand_single_coefficient_is_one_sine() {
        let n = 64;
        let dt = 1e-7;
        let resp = ResponseMatrix::fourier(4, n, dt).unwrap();
        let amp = 1e5;
        let mut coeffs = vec![[0.0; 2]; 4];
        coeffs[0][0] = amp;
        let param = GroupParametrization::new(coeffs, n, dt).unwrap();
        let pulse = expand(&param, &resp).unwrap();
        let duration = n as f64 * dt;
        for (j, v) in pulse.values().iter().enumerate() {
            let want = amp * (std::f64::consts::PI * j as f64 * dt / duration).sin();
            assert!((v[0] - want).abs() < 1e-9);
            assert_eq!(v[1], 0.0);
        }
    }

    #[test]
    fn zero_coefficients_expand_to_zero_pulse() {
        let resp = ResponseMatrix::fourier(4, 16, 1e-7).unwrap();
        let param = GroupParametrization::new(vec![[0.0; 2]; 4], 16, 1e-7).unwrap();
        let pulse = expand(&param, &resp).unwrap();
        assert!(pulse.values().iter().all(|v| v == &[0.0, 0.0]));
    }

    #[test]
    fn projection_of_zero_gradient_is_zero() {
        let resp = ResponseMatrix::fourier(4, 16, 1e-7).unwrap();
        let out = project_gradient(&vec![[0.0; 2]; 16], &resp).unwrap();
        assert!(out.iter().all(|c| c == &[0.0, 0.0]));
    }

    #[test]
    fn projection_of_a_basis_row_gives_its_norm() {
        let n = 64;
        let resp = ResponseMatrix::fourier(8, n, 1e-7).unwrap();
        let m = 3;
        let grad: Vec<[f64; 2]> = resp.row(m).iter().map(|&t| [t, 0.0]).collect();
        let out = project_gradient(&grad, &resp).unwrap();
        // Explicit loop as the independent reference.
        let mut direct = 0.0;
        for &t in resp.row(m) {
            direct += t * t;
        }
        assert!((out[m][0] - direct).abs() < 1e-12);
        assert_eq!(out[m][1], 0.0);
        // Sum of sin^2 over a full grid is N/2 up to the missing
        // endpoint contributions.
        assert!((direct - n as f64 / 2.0).abs() < 1.0);
    }

    #[test]
    fn validation_errors() {
        assert!(ResponseMatrix::fourier(0, 16, 1e-7).is_err());
        assert!(ResponseMatrix::fourier(4, 1, 1e-7).is_err());
        assert!(ResponseMatrix::fourier(4, 16, 0.0).is_err());
        assert!(GroupParametrization::new(vec![], 4, 1e-7).is_err());
        let resp = ResponseMatrix::fourier(4, 16, 1e-7).unwrap();
        let p = GroupParametrization::new(vec![[0.0; 2]; 3], 16, 1e-7).unwrap();
        assert!(expand(&p, &resp).is_err());
        assert!(project_gradient(&vec![[0.0; 2]; 15], &resp).is_err());
    }

    proptest! {
        #[test]
        fn expansion_is_linear(
            seed in 0u64..1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = 6;
            let n = 32;
            let dt = 1e-7;
            let resp = ResponseMatrix::fourier(m, n, dt).unwrap();
            let c1: Vec<[f64; 2]> = (0..m)
                .map(|_| [rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)])
                .collect();
            let c2: Vec<[f64; 2]> = (0..m)
                .map(|_| [rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)])
                .collect();
            let mix: Vec<[f64; 2]> = c1
                .iter()
                .zip(&c2)
                .map(|(x, y)| [a * x[0] + b * y[0], a * x[1] + b * y[1]])
                .collect();
            let p1 = expand(&GroupParametrization::new(c1, n, dt).unwrap(), &resp).unwrap();
            let p2 = expand(&GroupParametrization::new(c2, n, dt).unwrap(), &resp).unwrap();
            let pm = expand(&GroupParametrization::new(mix, n, dt).unwrap(), &resp).unwrap();
            let scale = 1e5 * (a.abs() + b.abs()).max(1.0);
            for j in 0..n {
                for k in 0..2 {
                    let want = a * p1.values()[j][k] + b * p2.values()[j][k];
                    prop_assert!((pm.values()[j][k] - want).abs() < 1e-12 * scale);
                }
            }
        }

        #[test]
        fn expanded_waveform_starts_at_zero(seed in 0u64..1000) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = 5;
            let n = 24;
            let resp = ResponseMatrix::fourier(m, n, 5e-8).unwrap();
            let coeffs: Vec<[f64; 2]> = (0..m)
                .map(|_| [rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)])
                .collect();
            let p = expand(&GroupParametrization::new(coeffs, n, 5e-8).unwrap(), &resp).unwrap();
            prop_assert_eq!(p.values()[0], [0.0, 0.0]);
        }
    }
}
